//! Budget-constrained subset selection.
//!
//! [`greedy`] adds, each round, the feasible model with the best ratio of
//! marginal objective gain to cost. Plain greedy over the correctness
//! probability has no approximation guarantee (the objective is not
//! submodular), so [`surrogate_greedy`] runs greedy twice -- once against the
//! correctness estimator and once against the submodular surrogate `gamma` --
//! compares both results with the best affordable single model, and keeps the
//! winner. The instance-dependent guarantee ratio of the returned plan is
//! `max{PA(S1), PA(S2), p*} / max{gamma(S2), p*} * (1 - 1/sqrt(e))`.

use std::collections::HashMap;

use crate::catalog::{ClassProfile, SelectionProblem};
use crate::correctness::{
    exact_pa_with_threshold, mc_pa, surrogate_gamma, PaEstimate, DEFAULT_EXACT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::seedmix::mix;
use crate::set::ModelSet;

/// A set function over model subsets, as consumed by [`greedy`].
///
/// Implementations short-circuit the empty set to 0 so greedy's first
/// marginal equals the singleton objective value.
pub trait SetObjective {
    fn eval(&mut self, set: ModelSet) -> Result<f64>;

    /// Like [`eval`](Self::eval), but reporting estimator metadata.
    fn estimate(&mut self, set: ModelSet) -> Result<PaEstimate> {
        Ok(PaEstimate::exact(self.eval(set)?))
    }
}

/// Exact correctness-probability objective, memoized per subset.
pub struct ExactPaObjective<'a> {
    profile: &'a ClassProfile,
    threshold: u64,
    cache: HashMap<u64, f64>,
}

impl<'a> ExactPaObjective<'a> {
    pub fn new(profile: &'a ClassProfile) -> Self {
        Self::with_threshold(profile, DEFAULT_EXACT_THRESHOLD)
    }

    pub fn with_threshold(profile: &'a ClassProfile, threshold: u64) -> Self {
        ExactPaObjective {
            profile,
            threshold,
            cache: HashMap::new(),
        }
    }
}

impl SetObjective for ExactPaObjective<'_> {
    fn eval(&mut self, set: ModelSet) -> Result<f64> {
        if set.is_empty() {
            return Ok(0.0);
        }
        if let Some(&v) = self.cache.get(&set.bits()) {
            return Ok(v);
        }
        let v = exact_pa_with_threshold(self.profile, set, self.threshold)?.value;
        self.cache.insert(set.bits(), v);
        Ok(v)
    }
}

/// Monte Carlo correctness objective with common random numbers: each
/// subset's stream derives from `(master seed, subset mask)`, and estimates
/// are cached, so re-evaluating a subset anywhere in one selection run
/// returns the identical value.
pub struct MonteCarloPaObjective<'a> {
    profile: &'a ClassProfile,
    samples: u64,
    master_seed: u64,
    cache: HashMap<u64, f64>,
}

impl<'a> MonteCarloPaObjective<'a> {
    pub fn new(profile: &'a ClassProfile, samples: u64, master_seed: u64) -> Self {
        MonteCarloPaObjective {
            profile,
            samples,
            master_seed,
            cache: HashMap::new(),
        }
    }

    pub fn subset_seed(&self, set: ModelSet) -> u64 {
        mix(self.master_seed, set.bits())
    }
}

impl SetObjective for MonteCarloPaObjective<'_> {
    fn eval(&mut self, set: ModelSet) -> Result<f64> {
        if set.is_empty() {
            return Ok(0.0);
        }
        if let Some(&v) = self.cache.get(&set.bits()) {
            return Ok(v);
        }
        let v = mc_pa(self.profile, set, self.samples, self.subset_seed(set)).value;
        self.cache.insert(set.bits(), v);
        Ok(v)
    }

    fn estimate(&mut self, set: ModelSet) -> Result<PaEstimate> {
        Ok(PaEstimate {
            value: self.eval(set)?,
            method: crate::correctness::PaMethod::MonteCarlo,
            samples_used: self.samples,
            seed: self.subset_seed(set),
        })
    }
}

/// The surrogate objective `gamma`.
pub struct GammaObjective<'a> {
    profile: &'a ClassProfile,
}

impl<'a> GammaObjective<'a> {
    pub fn new(profile: &'a ClassProfile) -> Self {
        GammaObjective { profile }
    }
}

impl SetObjective for GammaObjective<'_> {
    fn eval(&mut self, set: ModelSet) -> Result<f64> {
        Ok(surrogate_gamma(self.profile, set))
    }
}

/// Cost-ratio greedy over an arbitrary set objective.
///
/// Each round picks the model maximizing `(f(S + l) - f(S)) / b_l`; exact
/// ratio ties go to the largest `p_i / b_i`. A pick whose cost exceeds the
/// remaining budget is removed from the pool for good. The returned indices
/// are in selection order and always cost at most the budget; an empty
/// result is legal.
pub fn greedy(problem: &SelectionProblem, objective: &mut dyn SetObjective) -> Result<Vec<usize>> {
    let profile = &problem.profile;
    let mut pool: Vec<usize> = (0..profile.len()).collect();
    let mut chosen = Vec::new();
    let mut chosen_set = ModelSet::empty();
    let mut remaining = problem.budget;
    let mut current = objective.eval(chosen_set)?;

    while remaining > 0.0 && !pool.is_empty() {
        let mut best_ratio = f64::NEG_INFINITY;
        let mut tie: Vec<usize> = Vec::new();
        for &l in &pool {
            let gain = objective.eval(chosen_set.with(l))? - current;
            let ratio = gain / profile.entry(l).query_cost;
            if ratio > best_ratio {
                best_ratio = ratio;
                tie.clear();
                tie.push(l);
            } else if ratio == best_ratio {
                tie.push(l);
            }
        }
        // Tie rule: largest probability/cost ratio.
        let mut pick = tie[0];
        let mut pick_key = profile.entry(pick).success_prob / profile.entry(pick).query_cost;
        for &l in &tie[1..] {
            let key = profile.entry(l).success_prob / profile.entry(l).query_cost;
            if key > pick_key {
                pick = l;
                pick_key = key;
            }
        }
        pool.retain(|&l| l != pick);
        let cost = profile.entry(pick).query_cost;
        if cost > remaining {
            continue;
        }
        chosen.push(pick);
        chosen_set.insert(pick);
        remaining -= cost;
        current = objective.eval(chosen_set)?;
    }
    Ok(chosen)
}

/// Diagnostics recorded alongside a plan, enough to recompute the
/// data-dependent guarantee of the selection.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanDiagnostics {
    /// Greedy solution under the correctness objective.
    pub s1: ModelSet,
    /// Greedy solution under the surrogate objective.
    pub s2: ModelSet,
    /// Best affordable single model.
    pub best_single: Option<usize>,
    /// Success probability of `best_single`.
    pub p_star: f64,
    /// Correctness estimate of `s1` from the selection run.
    pub pa_s1: f64,
    /// Correctness estimate of `s2` from the selection run.
    pub pa_s2: f64,
    pub gamma_s2: f64,
    /// Guarantee ratio at `epsilon = 0`.
    pub guarantee_ratio: f64,
}

/// Outcome of a selection run: the chosen models (in selection order), their
/// total planned cost, the correctness estimate, and diagnostics. Baseline
/// plans built outside [`surrogate_greedy`] carry no diagnostics.
#[derive(Debug, Clone)]
pub struct SelectionPlan {
    pub chosen: Vec<usize>,
    pub planned_cost: f64,
    pub pa_estimate: PaEstimate,
    pub diagnostics: Option<PlanDiagnostics>,
}

impl SelectionPlan {
    pub fn chosen_set(&self) -> ModelSet {
        self.chosen.iter().copied().collect()
    }

    /// Wrap an externally chosen subset (baselines, replayed plans).
    pub fn bare(profile: &ClassProfile, chosen: Vec<usize>, pa_estimate: PaEstimate) -> Self {
        let planned_cost = chosen.iter().map(|&l| profile.entry(l).query_cost).sum();
        SelectionPlan {
            chosen,
            planned_cost,
            pa_estimate,
            diagnostics: None,
        }
    }
}

/// Instance-dependent approximation ratio:
/// `(max{PA(S1), PA(S2), p*} / max{gamma(S2), p*} - epsilon) * (1 - 1/sqrt(e))`,
/// clamped into `[0, 1]`.
pub fn guarantee_ratio(diagnostics: &PlanDiagnostics, epsilon: f64) -> f64 {
    let numerator = diagnostics
        .pa_s1
        .max(diagnostics.pa_s2)
        .max(diagnostics.p_star);
    let denominator = diagnostics.gamma_s2.max(diagnostics.p_star);
    let term = numerator / denominator - epsilon;
    (term * (1.0 - (-0.5f64).exp())).clamp(0.0, 1.0)
}

/// Surrogate greedy: compare the best affordable singleton with greedy under
/// the correctness estimator and greedy under `gamma`, and keep the best of
/// the three by estimated correctness.
pub fn surrogate_greedy(
    problem: &SelectionProblem,
    pa_objective: &mut dyn SetObjective,
    gamma_objective: &mut dyn SetObjective,
) -> Result<SelectionPlan> {
    let profile = &problem.profile;
    let feasible: Vec<usize> = (0..profile.len())
        .filter(|&l| profile.entry(l).query_cost <= problem.budget)
        .collect();
    if feasible.is_empty() {
        let min_cost = profile
            .entries()
            .iter()
            .map(|e| e.query_cost)
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NoFeasibleModel {
            budget: problem.budget,
            min_cost,
        });
    }

    // l* = argmax p over affordable singletons; ties to the cheaper model.
    let mut best_single = feasible[0];
    for &l in &feasible[1..] {
        let e = profile.entry(l);
        let b = profile.entry(best_single);
        if e.success_prob > b.success_prob
            || (e.success_prob == b.success_prob && e.query_cost < b.query_cost)
        {
            best_single = l;
        }
    }
    let p_star = profile.entry(best_single).success_prob;

    let s1 = greedy(problem, pa_objective)?;
    let s2 = greedy(problem, gamma_objective)?;
    let s1_set: ModelSet = s1.iter().copied().collect();
    let s2_set: ModelSet = s2.iter().copied().collect();

    // Final comparison reuses the evaluator's cached estimates; the singleton
    // is scored with its known probability (PA of one model is exactly p).
    let pa_s1 = pa_objective.eval(s1_set)?;
    let pa_s2 = pa_objective.eval(s2_set)?;
    let gamma_s2 = surrogate_gamma(profile, s2_set);

    let candidates: [(&[usize], f64); 3] = [
        (&s1, pa_s1),
        (&s2, pa_s2),
        (std::slice::from_ref(&best_single), p_star),
    ];
    let mut winner = 0usize;
    for i in 1..candidates.len() {
        let (set_i, pa_i) = (candidates[i].0, candidates[i].1);
        let (set_w, pa_w) = (candidates[winner].0, candidates[winner].1);
        let cost = |s: &[usize]| -> f64 { s.iter().map(|&l| profile.entry(l).query_cost).sum() };
        if pa_i > pa_w
            || (pa_i == pa_w && cost(set_i) < cost(set_w))
            || (pa_i == pa_w && cost(set_i) == cost(set_w) && set_i.len() < set_w.len())
        {
            winner = i;
        }
    }
    let chosen: Vec<usize> = candidates[winner].0.to_vec();
    let chosen_set: ModelSet = chosen.iter().copied().collect();
    let planned_cost: f64 = chosen.iter().map(|&l| profile.entry(l).query_cost).sum();

    let pa_estimate = if winner == 2 {
        PaEstimate::exact(p_star)
    } else {
        pa_objective.estimate(chosen_set)?
    };

    let mut diagnostics = PlanDiagnostics {
        s1: s1_set,
        s2: s2_set,
        best_single: Some(best_single),
        p_star,
        pa_s1,
        pa_s2,
        gamma_s2,
        guarantee_ratio: 0.0,
    };
    diagnostics.guarantee_ratio = guarantee_ratio(&diagnostics, 0.0);

    Ok(SelectionPlan {
        chosen,
        planned_cost,
        pa_estimate,
        diagnostics: Some(diagnostics),
    })
}
