//! The `(1 + eps, 2)` bicriteria scheduler.
//!
//! Pipeline per (sub)instance: multiplier bisection, local search to an
//! adjacent pair `(M1, M2)`, then an exchange along their single difference
//! component. The exchange result respects the budget, assigns one edge per
//! UAV and may load a single UGV slot twice. Guessing the `ceil(1/eps)`
//! most expensive optimal edges up front turns the additive `c_max` error of
//! the exchange into a multiplicative `1 + eps`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lagrangian::{binary_search, default_dlambda_min, LagrangianCertificate, SearchOutcome};
use crate::local_search::{local_search, symmetric_difference, Origin};
use crate::model::{EdgeId, RendezvousInstance, Schedule, BUDGET_SLACK};

/// The signed exchange sequence along the single difference component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeSequence {
    pub edges: Vec<(EdgeId, Origin)>,
    /// `+w(z)` for edges of `M1`, `-w(z)` for edges of `M2`.
    pub alphas: Vec<f64>,
    /// Start index whose cyclic prefix sums are all non-positive.
    pub start: usize,
    /// Largest cyclic prefix sum from `start`; `<= 0` up to rounding and the multiplier gap.
    pub max_prefix_sum: f64,
    /// Length of the shortest prefix that pushes the weight over the budget (`Z'`).
    pub crossing_len: usize,
    /// Length of the applied prefix (`Z''`); it ends with an `M2` edge.
    pub applied_len: usize,
}

impl ExchangeSequence {
    /// Cyclic prefix sums of `alphas` starting at `start`.
    pub fn prefix_sums(&self) -> Vec<f64> {
        let k = self.alphas.len();
        let mut acc = 0.0;
        (0..k)
            .map(|h| {
                acc += self.alphas[(self.start + h) % k];
                acc
            })
            .collect()
    }

    /// The edge ids of the applied prefix `Z''`, in walk order.
    pub fn applied_edges(&self) -> Vec<EdgeId> {
        let k = self.edges.len();
        (0..self.applied_len).map(|h| self.edges[(self.start + h) % k].0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeResult {
    pub schedule: Schedule,
    /// `None` when the step returned `M1` or `M2` without exchanging.
    pub sequence: Option<ExchangeSequence>,
    /// Edges removed because their UAV group had two.
    pub dropped: Vec<EdgeId>,
    /// `(from, to)` edge replacements moving a UAV to a free UGV vertex.
    pub rerouted: Vec<(EdgeId, EdgeId)>,
}

fn signed_weights(inst: &RendezvousInstance, edges: &[(EdgeId, Origin)], lambda: f64) -> Vec<f64> {
    edges
        .iter()
        .map(|&(e, o)| {
            let w = inst.edge(e).lagrangian(lambda);
            match o {
                Origin::First => w,
                Origin::Second => -w,
            }
        })
        .collect()
}

/// Picks the start index after the largest prefix sum, preferring an `M2` edge
/// among near-ties.
fn gasoline_start(edges: &[(EdgeId, Origin)], alphas: &[f64]) -> usize {
    let k = alphas.len();
    let mut prefix = Vec::with_capacity(k);
    let mut acc = 0.0;
    for &a in alphas {
        prefix.push(acc);
        acc += a;
    }
    let scale = alphas.iter().fold(1.0f64, |m, a| m.max(a.abs()));
    let best = prefix.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * scale * k as f64;
    let candidates: Vec<usize> = (0..k).filter(|&t| prefix[t] >= best - tol).collect();
    candidates
        .iter()
        .copied()
        .find(|&t| edges[t].1 == Origin::Second)
        .unwrap_or(candidates[0])
}

/// Exchanges part of the single `M1 ⊕ M2` component into `M1`.
///
/// Requires an adjacent certificate with `a(M1) <= B <= a(M2)`. The result
/// has weight at most `B`, one edge per UAV group, and at most one UGV vertex
/// with load two.
pub fn exchange_step(inst: &RendezvousInstance, cert: &LagrangianCertificate) -> Result<ExchangeResult> {
    cert.check_bracket(inst)?;
    let m1 = &cert.feasible;
    let m2 = &cert.infeasible;
    let lambda = cert.lambda;
    let budget = inst.budget();
    let plain = |schedule: Schedule| ExchangeResult {
        schedule,
        sequence: None,
        dropped: vec![],
        rerouted: vec![],
    };

    let components = symmetric_difference(inst, m1, m2)?;
    match components.len() {
        0 => return Ok(plain(m1.clone())),
        1 => {}
        n => {
            return Err(Error::Certificate(format!(
                "exchange needs adjacent schedules, difference has {n} components"
            )))
        }
    }
    if inst.weight(m2)? <= budget + BUDGET_SLACK {
        let best = if inst.cost(m2)? <= inst.cost(m1)? { m2 } else { m1 };
        return Ok(plain(best.clone()));
    }

    let edges = components.into_iter().next().unwrap().edges;
    let k = edges.len();
    let alphas = signed_weights(inst, &edges, lambda);
    let start = gasoline_start(&edges, &alphas);

    let mut weight = inst.weight(m1)?;
    let mut crossing_len = k;
    for h in 0..k {
        let (e, o) = edges[(start + h) % k];
        match o {
            Origin::First => weight -= inst.edge(e).weight,
            Origin::Second => weight += inst.edge(e).weight,
        }
        if weight > budget + BUDGET_SLACK {
            crossing_len = h + 1;
            break;
        }
    }
    let mut applied_len = crossing_len - 1;
    while applied_len > 0 && edges[(start + applied_len - 1) % k].1 != Origin::Second {
        applied_len -= 1;
    }

    let mut sequence = ExchangeSequence {
        edges: edges.clone(),
        alphas,
        start,
        max_prefix_sum: 0.0,
        crossing_len,
        applied_len,
    };
    sequence.max_prefix_sum = sequence.prefix_sums().into_iter().fold(f64::NEG_INFINITY, f64::max);

    if applied_len == 0 {
        return Ok(ExchangeResult {
            schedule: m1.clone(),
            sequence: Some(sequence),
            dropped: vec![],
            rerouted: vec![],
        });
    }

    let crossing: Vec<EdgeId> = (0..crossing_len).map(|h| edges[(start + h) % k].0).collect();
    let cost_bound = inst.cost(&m1.toggled(crossing))? + inst.max_cost();

    let mut schedule = m1.toggled(sequence.applied_edges());
    let (dropped, rerouted) = repair(inst, m1, &mut schedule, cost_bound)?;
    Ok(ExchangeResult {
        schedule,
        sequence: Some(sequence),
        dropped,
        rerouted,
    })
}

/// Restores one edge per group, then tries to move one UAV off a doubly used
/// UGV vertex onto a free vertex of no larger weight.
fn repair(
    inst: &RendezvousInstance,
    m1: &Schedule,
    schedule: &mut Schedule,
    cost_bound: f64,
) -> Result<(Vec<EdgeId>, Vec<(EdgeId, EdgeId)>)> {
    let mut by_group: BTreeMap<usize, Vec<EdgeId>> = BTreeMap::new();
    for e in schedule.iter() {
        by_group.entry(inst.group_of_edge(e)).or_default().push(e);
    }
    // A group left empty can only arise from a zero-weight M1 edge at the
    // start; putting it back is free.
    for e in m1.iter() {
        let r = inst.group_of_edge(e);
        if !by_group.contains_key(&r) {
            schedule.insert(e);
            by_group.insert(r, vec![e]);
        }
    }
    let mut dropped = Vec::new();
    for list in by_group.values().filter(|l| l.len() > 1) {
        let loads = inst.ugv_loads(schedule);
        let keep = *list
            .iter()
            .min_by(|&&x, &&y| {
                let (ex, ey) = (inst.edge(x), inst.edge(y));
                ex.cost
                    .total_cmp(&ey.cost)
                    .then_with(|| loads[&ex.ugv].cmp(&loads[&ey.ugv]))
                    .then_with(|| ex.weight.total_cmp(&ey.weight))
                    .then_with(|| x.cmp(&y))
            })
            .unwrap();
        for &e in list.iter().filter(|&&e| e != keep) {
            schedule.remove(e);
            dropped.push(e);
        }
    }

    let mut rerouted = Vec::new();
    let loads = inst.ugv_loads(schedule);
    let used: BTreeSet<usize> = loads.keys().copied().collect();
    for (&vertex, _) in loads.iter().filter(|(_, &n)| n > 1) {
        let current_cost = inst.cost(schedule)?;
        let mut best: Option<(f64, EdgeId, EdgeId)> = None;
        for from in schedule.iter().filter(|&e| inst.edge(e).ugv == vertex) {
            let fe = inst.edge(from);
            for to in inst.edges_of_group(inst.group_of_edge(from)) {
                let te = inst.edge(*to);
                if te.uav != fe.uav || used.contains(&te.ugv) || te.weight > fe.weight {
                    continue;
                }
                let new_cost = current_cost - fe.cost + te.cost;
                let better = match best {
                    None => true,
                    Some((c, f, t)) => new_cost < c || (new_cost == c && (from, *to) < (f, t)),
                };
                if better {
                    best = Some((new_cost, from, *to));
                }
            }
        }
        if let Some((new_cost, from, to)) = best {
            if new_cost <= cost_bound {
                schedule.remove(from);
                schedule.insert(to);
                rerouted.push((from, to));
            }
        }
    }
    Ok((dropped, rerouted))
}

/// Result of running the search, local search and exchange on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub outcome: SearchOutcome,
    /// Local-search output; `None` when the search found an optimum directly.
    pub adjacent: Option<LagrangianCertificate>,
    /// Budget-feasible schedule (`M1` or the optimum).
    pub feasible: Schedule,
    /// Exchange output (equal to `feasible` when no exchange was needed).
    pub exchanged: ExchangeResult,
    /// Additive slack from the inexact multiplier, seconds.
    pub gap: f64,
}

/// Cyclic prefix sums of one exchange, kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeAudit {
    pub max_prefix_sum: f64,
    /// `max(0, w(M1) - w(M2))` at the certificate multiplier; zero for an exact multiplier.
    pub allowance: f64,
    /// `sum |alpha|`, the scale of rounding error in the prefix sums.
    pub scale: f64,
}

impl PipelineResult {
    pub fn audit(&self, inst: &RendezvousInstance) -> Result<Option<ExchangeAudit>> {
        let (Some(cert), Some(seq)) = (&self.adjacent, &self.exchanged.sequence) else {
            return Ok(None);
        };
        let w1 = inst.lagrangian(&cert.feasible, cert.lambda)?;
        let w2 = inst.lagrangian(&cert.infeasible, cert.lambda)?;
        Ok(Some(ExchangeAudit {
            max_prefix_sum: seq.max_prefix_sum,
            allowance: (w1 - w2).max(0.0),
            scale: seq.alphas.iter().map(|a| a.abs()).sum(),
        }))
    }
}

/// Search, local search and exchange on one instance.
pub fn run_pipeline(inst: &RendezvousInstance, dlambda_min: Option<f64>) -> Result<PipelineResult> {
    let dl = dlambda_min.unwrap_or_else(|| default_dlambda_min(inst));
    let outcome = binary_search(inst, dl)?;
    let cert = match &outcome {
        SearchOutcome::BudgetSlack(s) | SearchOutcome::BudgetTight { schedule: s, .. } => {
            let exchanged = ExchangeResult {
                schedule: s.clone(),
                sequence: None,
                dropped: vec![],
                rerouted: vec![],
            };
            return Ok(PipelineResult {
                feasible: s.clone(),
                outcome,
                adjacent: None,
                exchanged,
                gap: 0.0,
            });
        }
        SearchOutcome::Bracketed(c) => c.clone(),
    };
    let optimum_w = inst.lagrangian(&cert.feasible, cert.lambda)?;
    let adjacent = local_search(inst, &cert)?.certificate;
    let exchanged = exchange_step(inst, &adjacent)?;
    let w1 = inst.lagrangian(&adjacent.feasible, adjacent.lambda)?;
    let w2 = inst.lagrangian(&adjacent.infeasible, adjacent.lambda)?;
    let prefix = exchanged.sequence.as_ref().map_or(0.0, |s| s.max_prefix_sum.max(0.0));
    let gap = (w1 - w2).abs() + (w1 - optimum_w).max(0.0) + prefix;
    Ok(PipelineResult {
        feasible: adjacent.feasible.clone(),
        outcome,
        adjacent: Some(adjacent),
        exchanged,
        gap,
    })
}

/// The always-feasible schedule of the pipeline: `M1` after local search, or
/// the optimum when the search found one directly.
pub fn feasible_fallback(inst: &RendezvousInstance, outcome: &SearchOutcome) -> Result<Schedule> {
    match outcome {
        SearchOutcome::Bracketed(cert) => Ok(local_search(inst, cert)?.certificate.feasible),
        other => Ok(other.feasible_schedule().clone()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicriteriaOptions {
    pub epsilon: f64,
    pub dlambda_min: Option<f64>,
    /// Replace an output that overloads a UGV vertex by the feasible `M1`.
    pub fallback_on_violation: bool,
    pub parallel: bool,
}

impl Default for BicriteriaOptions {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            dlambda_min: None,
            fallback_on_violation: true,
            parallel: true,
        }
    }
}

impl BicriteriaOptions {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BicriteriaReport {
    pub schedule: Schedule,
    pub cost: f64,
    pub weight: f64,
    pub budget: f64,
    /// Largest pipeline gap over every evaluated guess; the cost guarantee is
    /// `cost <= (1 + eps) opt + gap`.
    pub gap: f64,
    /// Highest load on any UGV vertex.
    pub max_load: usize,
    pub violation_count: usize,
    /// The guessed high-cost edges of the winning candidate.
    pub guess: Vec<EdgeId>,
    pub guesses_evaluated: usize,
    /// Set when the exchange output overloaded a vertex and `M1` was returned instead.
    pub used_fallback: bool,
    /// One entry per exchange performed across all candidates.
    pub exchanges: Vec<ExchangeAudit>,
}

fn enumerate_guesses(inst: &RendezvousInstance, size: usize) -> Vec<Vec<EdgeId>> {
    fn rec(
        inst: &RendezvousInstance,
        size: usize,
        from: usize,
        current: &mut Vec<EdgeId>,
        groups: &mut BTreeSet<usize>,
        vertices: &mut BTreeSet<usize>,
        weight: f64,
        out: &mut Vec<Vec<EdgeId>>,
    ) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for id in from..inst.edges().len() {
            let e = inst.edge(EdgeId(id));
            let r = inst.group_of_edge(EdgeId(id));
            if groups.contains(&r) || vertices.contains(&e.ugv) || weight + e.weight > inst.budget() + BUDGET_SLACK {
                continue;
            }
            current.push(EdgeId(id));
            groups.insert(r);
            vertices.insert(e.ugv);
            rec(inst, size, id + 1, current, groups, vertices, weight + e.weight, out);
            vertices.remove(&e.ugv);
            groups.remove(&r);
            current.pop();
        }
    }
    let mut out = Vec::new();
    rec(
        inst,
        size,
        0,
        &mut Vec::new(),
        &mut BTreeSet::new(),
        &mut BTreeSet::new(),
        0.0,
        &mut out,
    );
    out
}

struct Candidate {
    schedule: Schedule,
    cost: f64,
    gap: f64,
    guess: Vec<EdgeId>,
    audit: Option<ExchangeAudit>,
}

fn evaluate_guess(inst: &RendezvousInstance, guess: &[EdgeId], dl: Option<f64>) -> Result<Option<Candidate>> {
    let threshold = guess.iter().map(|&e| inst.edge(e).cost).fold(f64::INFINITY, f64::min);
    let groups: BTreeSet<usize> = guess.iter().map(|&e| inst.group_of_edge(e)).collect();
    let vertices: BTreeSet<usize> = guess.iter().map(|&e| inst.edge(e).ugv).collect();
    let used: f64 = guess.iter().map(|&e| inst.edge(e).weight).sum();
    let budget = inst.budget() - used;
    if budget < -BUDGET_SLACK {
        return Ok(None);
    }
    let sub = inst.residual(&groups, &vertices, threshold, budget)?;
    let residual = &sub.instance;
    if (0..residual.n_groups()).any(|r| residual.edges_of_group(r).is_empty()) {
        return Ok(None);
    }
    let run = match run_pipeline(residual, dl) {
        Ok(run) => run,
        Err(Error::Infeasible { .. }) | Err(Error::InvalidInstance(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let schedule = sub.lift(&run.exchanged.schedule).union(&Schedule::from_edges(guess.iter().copied()));
    Ok(Some(Candidate {
        cost: inst.cost(&schedule)?,
        schedule,
        gap: run.gap,
        guess: guess.to_vec(),
        audit: run.audit(residual)?,
    }))
}

/// Bicriteria scheduling with guessing of the `ceil(1/eps)` costliest edges.
pub fn bicriteria_solve(inst: &RendezvousInstance, options: &BicriteriaOptions) -> Result<BicriteriaReport> {
    let eps = options.epsilon;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    let dl = options.dlambda_min;
    // The full-instance run doubles as the no-guess candidate and the fallback source.
    let base = run_pipeline(inst, dl)?;
    let guess_size = ((1.0 / eps).ceil() as usize).min(inst.n_groups());
    let guesses = if guess_size == 0 {
        Vec::new()
    } else {
        enumerate_guesses(inst, guess_size)
    };

    let evaluated: Vec<Result<Option<Candidate>>> = if options.parallel {
        guesses.par_iter().map(|g| evaluate_guess(inst, g, dl)).collect()
    } else {
        guesses.iter().map(|g| evaluate_guess(inst, g, dl)).collect()
    };

    let mut best = Candidate {
        cost: inst.cost(&base.exchanged.schedule)?,
        schedule: base.exchanged.schedule.clone(),
        gap: base.gap,
        guess: Vec::new(),
        audit: base.audit(inst)?,
    };
    let mut gap = base.gap;
    let mut exchanges: Vec<ExchangeAudit> = best.audit.iter().cloned().collect();
    for candidate in evaluated {
        if let Some(c) = candidate? {
            gap = gap.max(c.gap);
            exchanges.extend(c.audit.iter().cloned());
            if c.cost < best.cost {
                best = c;
            }
        }
    }

    let mut schedule = best.schedule;
    let mut report = inst.check(&schedule)?;
    let mut used_fallback = false;
    if options.fallback_on_violation && report.violation_count() > 0 {
        schedule = base.feasible.clone();
        report = inst.check(&schedule)?;
        used_fallback = true;
    }
    Ok(BicriteriaReport {
        cost: report.cost,
        weight: report.weight,
        budget: inst.budget(),
        gap,
        max_load: report.max_load(),
        violation_count: report.violation_count(),
        guess: best.guess,
        guesses_evaluated: guesses.len(),
        used_fallback,
        schedule,
        exchanges,
    })
}
