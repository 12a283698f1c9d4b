//! Bisection on the Lagrange multiplier.
//!
//! Starting from `lambda = 1`, the multiplier doubles while the subproblem
//! optimum exceeds the budget and bisects once a budget-feasible optimum has
//! been seen. The search stops when the bracket is narrower than
//! `dlambda_min` and returns one feasible and one infeasible subproblem
//! optimum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::LagrangianSolver;
use crate::model::{RendezvousInstance, Schedule, BUDGET_SLACK};

/// Gives up after this many subproblem solves; far beyond what doubling plus
/// bisection needs for any finite double-precision bracket.
const MAX_ITERATIONS: usize = 4096;

/// Two subproblem optima bracketing the budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangianCertificate {
    /// Multiplier at which both schedules are (near-)optimal; equals `lambda_upper`.
    pub lambda: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    /// Budget-feasible optimum at `lambda_upper`.
    pub feasible: Schedule,
    /// Budget-infeasible optimum at `lambda_lower`.
    pub infeasible: Schedule,
}

impl LagrangianCertificate {
    /// `|w(M1) - w(M2)|` at the certificate multiplier.
    pub fn gap(&self, inst: &RendezvousInstance) -> Result<f64> {
        Ok((inst.lagrangian(&self.feasible, self.lambda)? - inst.lagrangian(&self.infeasible, self.lambda)?).abs())
    }

    /// Checks `a(M1) <= B <= a(M2)`.
    pub fn check_bracket(&self, inst: &RendezvousInstance) -> Result<()> {
        let a1 = inst.weight(&self.feasible)?;
        let a2 = inst.weight(&self.infeasible)?;
        let b = inst.budget();
        if a1 > b + BUDGET_SLACK {
            return Err(Error::Certificate(format!("a(M1) = {a1} exceeds budget {b}")));
        }
        if a2 < b - BUDGET_SLACK {
            return Err(Error::Certificate(format!("a(M2) = {a2} is below budget {b}")));
        }
        Ok(())
    }
}

/// What the multiplier search found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SearchOutcome {
    /// The unconstrained cost optimum already meets the budget; it is optimal.
    BudgetSlack(Schedule),
    /// A subproblem optimum with weight exactly at the budget; it is optimal.
    BudgetTight { schedule: Schedule, lambda: f64 },
    Bracketed(LagrangianCertificate),
}

impl SearchOutcome {
    /// A budget-feasible schedule: the optimum, or `M1` of the certificate.
    pub fn feasible_schedule(&self) -> &Schedule {
        match self {
            SearchOutcome::BudgetSlack(s) => s,
            SearchOutcome::BudgetTight { schedule, .. } => schedule,
            SearchOutcome::Bracketed(c) => &c.feasible,
        }
    }
}

/// Default stopping width: `1e-6 * c_max / max(a_min_nonzero, 1e-12)`.
pub fn default_dlambda_min(inst: &RendezvousInstance) -> f64 {
    let c_max = inst.max_cost();
    let a_min = inst.min_positive_weight().unwrap_or(1.0).max(1e-12);
    let d = 1e-6 * c_max / a_min;
    if d > 0.0 && d.is_finite() {
        d
    } else {
        1e-9
    }
}

/// Bisection search with an explicit stopping width.
pub fn binary_search(inst: &RendezvousInstance, dlambda_min: f64) -> Result<SearchOutcome> {
    if !(dlambda_min > 0.0) || !dlambda_min.is_finite() {
        return Err(Error::InvalidParameter(format!("dlambda_min must be > 0, got {dlambda_min}")));
    }
    let budget = inst.budget();
    let mut solver = LagrangianSolver::new(inst);

    let unconstrained = solver.solve(0.0)?;
    if inst.weight(&unconstrained)? <= budget + BUDGET_SLACK {
        return Ok(SearchOutcome::BudgetSlack(unconstrained));
    }
    let lightest = solver.solve_min_weight()?;
    let min_weight = inst.weight(&lightest)?;
    if min_weight > budget + BUDGET_SLACK {
        return Err(Error::Infeasible { min_weight, budget });
    }

    let mut lambda_lower = 0.0;
    let mut lambda_upper = f64::INFINITY;
    let mut lambda: f64 = 1.0;
    let mut feasible: Option<Schedule> = None;
    let mut infeasible = unconstrained;

    let mut iterations = 0;
    while lambda_upper - lambda_lower >= dlambda_min {
        iterations += 1;
        if iterations > MAX_ITERATIONS || !lambda.is_finite() {
            // Only reachable if the multiplier diverges; the lightest schedule
            // is still feasible and optimal for a large enough multiplier.
            log::warn!("multiplier search did not converge; using the minimum-weight schedule");
            break;
        }
        // Re-solving at lambda_upper reproduces the stored feasible optimum.
        let x = match &feasible {
            Some(m1) if lambda == lambda_upper => m1.clone(),
            _ => solver.solve(lambda)?,
        };
        let a = inst.weight(&x)?;
        if a <= budget + BUDGET_SLACK {
            if (a - budget).abs() <= BUDGET_SLACK {
                return Ok(SearchOutcome::BudgetTight { schedule: x, lambda });
            }
            feasible = Some(x);
            lambda_upper = lambda;
            lambda = 0.5 * (lambda_upper + lambda_lower);
        } else {
            infeasible = x;
            lambda_lower = lambda;
            lambda = (2.0 * lambda).min(lambda_upper);
        }
    }

    let feasible = match feasible {
        Some(f) => f,
        None => lightest,
    };
    if !lambda_upper.is_finite() {
        lambda_upper = lambda_lower.max(1.0);
    }
    Ok(SearchOutcome::Bracketed(LagrangianCertificate {
        lambda: lambda_upper,
        lambda_lower,
        lambda_upper,
        feasible,
        infeasible,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Edge, EdgeId, UgvVertex};

    fn one_uav(budget: f64, null_weight: f64) -> RendezvousInstance {
        RendezvousInstance::new(
            vec![vec![0, 1]],
            vec![UgvVertex::Plain, UgvVertex::Null { group: 0 }],
            vec![Edge::from_weight(0, 0, 10.0, 0.5), Edge::from_weight(1, 1, 0.0, null_weight)],
            budget,
            1,
        )
        .unwrap()
    }

    #[test]
    fn slack_budget_returns_cost_optimum() {
        let inst = one_uav(0.1, 0.0);
        let out = binary_search(&inst, 1e-6).unwrap();
        assert_eq!(out, SearchOutcome::BudgetSlack(Schedule::from_edges([EdgeId(1)])));
        assert_eq!(inst.cost(out.feasible_schedule()).unwrap(), 0.0);
    }

    #[test]
    fn brackets_the_crossover_multiplier() {
        let inst = one_uav(1.0, 2.0);
        let dl = default_dlambda_min(&inst);
        assert!((dl - 2e-5).abs() < 1e-18);
        let SearchOutcome::Bracketed(cert) = binary_search(&inst, dl).unwrap() else {
            panic!("expected a certificate");
        };
        assert_eq!(cert.feasible, Schedule::from_edges([EdgeId(0)]));
        assert_eq!(cert.infeasible, Schedule::from_edges([EdgeId(1)]));
        // Crossover where 10 + 0.5 l = 2 l.
        let crossover = 20.0 / 3.0;
        assert!(cert.lambda_lower <= crossover && crossover <= cert.lambda_upper + 1e-12);
        assert!(cert.lambda_upper - cert.lambda_lower < dl);
        cert.check_bracket(&inst).unwrap();
        assert!(inst.cost(&cert.feasible).unwrap() >= inst.cost(&cert.infeasible).unwrap());
    }

    #[test]
    fn infeasible_instance_reports_min_weight() {
        let inst = RendezvousInstance::new(
            vec![vec![0, 1]],
            vec![UgvVertex::Plain, UgvVertex::Null { group: 0 }],
            vec![Edge::from_weight(0, 0, 10.0, 1.2), Edge::from_weight(1, 1, 0.0, 2.0)],
            1.0,
            1,
        )
        .unwrap();
        match binary_search(&inst, 1e-6) {
            Err(Error::Infeasible { min_weight, budget }) => {
                assert!((min_weight - 1.2).abs() < 1e-12);
                assert_eq!(budget, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tight_optimum_is_returned_directly() {
        let inst = one_uav(0.5, 2.0);
        match binary_search(&inst, 1e-6).unwrap() {
            SearchOutcome::BudgetTight { schedule, .. } => {
                assert_eq!(schedule, Schedule::from_edges([EdgeId(0)]))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_positive_tolerance() {
        assert!(binary_search(&one_uav(1.0, 2.0), 0.0).is_err());
    }
}
