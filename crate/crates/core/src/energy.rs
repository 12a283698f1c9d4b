//! Stochastic UAV energy consumption and Monte Carlo success probabilities.
//!
//! Power follows a cubic polynomial in airspeed plus a payload term. Each
//! flight draws its take-off weight from a normal distribution and a steady
//! wind (Weibull speed, uniform heading) that stays fixed for the flight and
//! is re-projected onto every leg's heading.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Weibull};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest probability handed to the log transform.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

const JOULES_PER_WH: f64 = 3600.0;
/// Seed offset for the conditions of the flight after a recharge.
const POST_RECHARGE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyModel {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
    /// Take-off weight mean and standard deviation, kg.
    pub weight_mu: f64,
    pub weight_sigma: f64,
    /// Weibull scale (characteristic wind speed, m/s) and shape.
    pub wind_a: f64,
    pub wind_b: f64,
    pub capacity_wh: f64,
    /// Monte Carlo samples per probability estimate.
    pub samples: usize,
    pub seed: u64,
    /// Power used in place of a non-positive polynomial value, W.
    pub power_floor_w: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            b0: -88.77,
            b1: 3.53,
            b2: -0.42,
            b3: 0.043,
            b4: 107.5,
            b5: -2.74,
            weight_mu: 2.3,
            weight_sigma: 0.05,
            wind_a: 1.5,
            wind_b: 3.0,
            capacity_wh: 97.0,
            samples: 1000,
            seed: 0,
            power_floor_w: 1.0,
        }
    }
}

/// Per-flight random conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightConditions {
    pub weight: f64,
    pub wind_speed: f64,
    /// Direction the wind blows towards, degrees.
    pub wind_heading_deg: f64,
}

/// Remaining battery energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeState {
    pub energy_j: f64,
}

impl ChargeState {
    pub fn full(model: &EnergyModel) -> Self {
        Self {
            energy_j: model.capacity_j(),
        }
    }

    pub fn from_soc(soc: f64, model: &EnergyModel) -> Result<Self> {
        if !(0.0..=1.0).contains(&soc) {
            return Err(Error::InvalidParameter(format!("state of charge {soc} outside [0, 1]")));
        }
        Ok(Self {
            energy_j: soc * model.capacity_j(),
        })
    }

    pub fn soc(&self, model: &EnergyModel) -> f64 {
        self.energy_j / model.capacity_j()
    }
}

/// One piece of a flight plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    /// Straight flight; `heading_deg` is the ground-track direction.
    Fly { distance: f64, speed: f64, heading_deg: f64 },
    /// Hovering in place.
    Wait { duration: f64 },
}

impl Leg {
    pub fn fly(distance: f64, speed: f64) -> Self {
        Leg::Fly {
            distance,
            speed,
            heading_deg: 0.0,
        }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            Leg::Fly { distance, speed, .. } => distance / speed,
            Leg::Wait { duration } => duration,
        }
    }
}

/// `|v + cos(psi) xi|`, with `psi` the wind direction relative to the ground track.
pub fn airspeed(ground_speed: f64, wind_speed: f64, wind_heading_deg: f64) -> f64 {
    (ground_speed + wind_heading_deg.to_radians().cos() * wind_speed).abs()
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.capacity_wh > 0.0) {
            return bad("battery capacity must be > 0");
        }
        if !(self.weight_mu > 0.0) || !(self.weight_sigma >= 0.0) {
            return bad("weight distribution needs mu > 0 and sigma >= 0");
        }
        if !(self.wind_a >= 0.0) || !(self.wind_b > 0.0) {
            return bad("Weibull parameters must be positive");
        }
        if self.samples == 0 {
            return bad("sample count must be >= 1");
        }
        if !(self.power_floor_w > 0.0) {
            return bad("power floor must be > 0");
        }
        Ok(())
    }

    pub fn capacity_j(&self) -> f64 {
        self.capacity_wh * JOULES_PER_WH
    }

    /// Raw polynomial value, W; may be non-positive.
    pub fn polynomial(&self, airspeed: f64, weight: f64) -> f64 {
        let v = airspeed;
        self.b0 + self.b1 * v + self.b2 * v * v + self.b3 * v * v * v + self.b4 * weight + self.b5 * v * weight
    }

    /// Electrical power, W, clamped to the configured floor.
    pub fn power_draw(&self, airspeed: f64, weight: f64) -> f64 {
        let p = self.polynomial(airspeed, weight);
        if p > self.power_floor_w {
            p
        } else {
            log::warn!("power polynomial gives {p:.3} W at v={airspeed}, w={weight}; clamped to {} W", self.power_floor_w);
            self.power_floor_w
        }
    }

    pub fn hover_power(&self, weight: f64) -> f64 {
        self.power_draw(0.0, weight)
    }

    /// Energy of one leg under fixed conditions, J.
    pub fn leg_energy(&self, leg: &Leg, c: &FlightConditions) -> f64 {
        match *leg {
            Leg::Fly {
                distance,
                speed,
                heading_deg,
            } => {
                if distance <= 0.0 {
                    return 0.0;
                }
                let v = airspeed(speed, c.wind_speed, c.wind_heading_deg - heading_deg);
                self.power_draw(v, c.weight) * distance / speed
            }
            Leg::Wait { duration } => self.hover_power(c.weight) * duration.max(0.0),
        }
    }

    pub fn plan_energy(&self, plan: &[Leg], c: &FlightConditions) -> f64 {
        plan.iter().map(|leg| self.leg_energy(leg, c)).sum()
    }

    /// Draws conditions from an arbitrary generator.
    pub fn draw_conditions(&self, rng: &mut impl Rng) -> FlightConditions {
        let weight = if self.weight_sigma > 0.0 {
            Normal::new(self.weight_mu, self.weight_sigma)
                .expect("validated normal parameters")
                .sample(rng)
        } else {
            self.weight_mu
        };
        let wind_speed = if self.wind_a > 0.0 {
            Weibull::new(self.wind_a, self.wind_b)
                .expect("validated Weibull parameters")
                .sample(rng)
        } else {
            0.0
        };
        let wind_heading_deg = rng.random_range(0.0..360.0);
        FlightConditions {
            weight: weight.max(1e-3),
            wind_speed,
            wind_heading_deg,
        }
    }

    /// Conditions of sample `index` under `seed`; independent of evaluation order.
    pub fn sample_conditions(&self, seed: u64, index: u64) -> FlightConditions {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        self.draw_conditions(&mut rng)
    }

    /// Mean-parameter conditions (mean weight, no wind).
    pub fn nominal_conditions(&self) -> FlightConditions {
        FlightConditions {
            weight: self.weight_mu,
            wind_speed: 0.0,
            wind_heading_deg: 0.0,
        }
    }

    /// A bank of `samples` conditions for `seed`.
    pub fn sample_bank(&self, seed: u64) -> SampleBank {
        SampleBank {
            conditions: (0..self.samples as u64)
                .into_par_iter()
                .map(|i| self.sample_conditions(seed, i))
                .collect(),
        }
    }

    /// Bank for the independent flight that follows a recharge.
    pub fn post_recharge_bank(&self, seed: u64) -> SampleBank {
        self.sample_bank(seed ^ POST_RECHARGE_SALT)
    }
}

/// Pre-drawn per-sample conditions shared by many estimates (common random numbers).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBank {
    pub conditions: Vec<FlightConditions>,
}

impl SampleBank {
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// Per-sample energy of a plan.
    pub fn energies(&self, model: &EnergyModel, plan: &[Leg]) -> Vec<f64> {
        self.conditions.iter().map(|c| model.plan_energy(plan, c)).collect()
    }

    /// Fraction of samples whose energy stays within `available`.
    pub fn survival(&self, energies: &[f64], available: f64) -> f64 {
        let ok = energies.iter().filter(|&&e| e <= available).count();
        ok as f64 / energies.len() as f64
    }
}

/// Probability that the plan completes on the given charge. Empty plans give 1.
///
/// Energy is cumulative and non-negative per leg, so surviving the whole
/// plan implies surviving every leg boundary.
pub fn survival_probability(state: ChargeState, plan: &[Leg], model: &EnergyModel, seed: u64) -> Result<f64> {
    model.validate()?;
    if plan.is_empty() {
        return Ok(1.0);
    }
    let ok: usize = (0..model.samples as u64)
        .into_par_iter()
        .filter(|&i| {
            let c = model.sample_conditions(seed, i);
            model.plan_energy(plan, &c) <= state.energy_j
        })
        .count();
    Ok(ok as f64 / model.samples as f64)
}

/// Probability of running out of charge before the plan completes.
pub fn depletion_probability(state: ChargeState, plan: &[Leg], model: &EnergyModel, seed: u64) -> Result<f64> {
    Ok(1.0 - survival_probability(state, plan, model, seed)?)
}

/// Success probability of a recharging detour: reach the charger on the
/// current charge, then finish the rest of the horizon on a full battery.
/// The flight after the recharge has its own independent conditions.
pub fn edge_probability(
    state: ChargeState,
    to_rendezvous: &[Leg],
    after_recharge: &[Leg],
    model: &EnergyModel,
    seed: u64,
) -> Result<f64> {
    let pre = survival_probability(state, to_rendezvous, model, seed)?;
    let post = survival_probability(ChargeState::full(model), after_recharge, model, seed ^ POST_RECHARGE_SALT)?;
    Ok(pre * post)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_coefficients() {
        let m = EnergyModel::default();
        assert!((m.power_draw(0.0, 2.3) - 158.48).abs() < 1e-9);
        assert!((m.power_draw(9.8, 2.3) - 131.45).abs() < 0.01);
    }

    #[test]
    fn non_positive_power_is_clamped() {
        let m = EnergyModel::default();
        assert!(m.polynomial(0.0, 0.5) < 0.0);
        assert_eq!(m.power_draw(0.0, 0.5), m.power_floor_w);
    }

    #[test]
    fn airspeed_cases() {
        assert!((airspeed(9.8, 1.5, 0.0) - 11.3).abs() < 1e-12);
        assert!((airspeed(9.8, 1.5, 90.0) - 9.8).abs() < 1e-12);
        assert!((airspeed(1.0, 1.5, 180.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_plan_survives() {
        let m = EnergyModel::default();
        assert_eq!(survival_probability(ChargeState { energy_j: 0.0 }, &[], &m, 1).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_distributions_are_deterministic() {
        let m = EnergyModel {
            weight_sigma: 0.0,
            wind_a: 0.0,
            samples: 50,
            ..Default::default()
        };
        let c: Vec<f64> = (0..20).map(|i| m.plan_energy(&[Leg::fly(980.0, 9.8)], &m.sample_conditions(4, i))).collect();
        assert!(c.iter().all(|&e| e == c[0]));
        let need = c[0];
        let plan = [Leg::fly(980.0, 9.8)];
        assert_eq!(survival_probability(ChargeState { energy_j: need }, &plan, &m, 4).unwrap(), 1.0);
        assert_eq!(survival_probability(ChargeState { energy_j: need * 0.999 }, &plan, &m, 4).unwrap(), 0.0);
    }

    #[test]
    fn capacity_default_in_joules() {
        assert!((EnergyModel::default().capacity_j() - 349_200.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let m = EnergyModel {
            samples: 0,
            ..Default::default()
        };
        assert!(m.validate().is_err());
        assert!(ChargeState::from_soc(1.5, &EnergyModel::default()).is_err());
    }
}
