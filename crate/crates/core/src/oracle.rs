//! Ground-truth machinery for tests and guarantee audits: brute-force
//! optimal subsets, submodularity probes, and approximation-bound checks.
//!
//! Everything here evaluates correctness probabilities exactly, never by
//! sampling, so a failed audit always points at the algorithm rather than at
//! estimator noise.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::catalog::SelectionProblem;
use crate::correctness::{exact_pa_with_threshold, DEFAULT_EXACT_THRESHOLD};
use crate::error::{Error, Result};
use crate::selection::{guarantee_ratio, SelectionPlan, SetObjective};
use crate::set::ModelSet;

/// Largest pool size accepted by the exhaustive subset search.
pub const MAX_BRUTE_FORCE_MODELS: usize = 12;

/// Slack applied when comparing a plan against its lower bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// Outcome of checking one plan against the approximation guarantee.
#[derive(Debug, Clone)]
pub struct GuaranteeReport {
    pub optimum_set: ModelSet,
    pub optimum_pa: f64,
    pub plan_pa: f64,
    pub bound_value: f64,
    pub satisfied: bool,
    pub instance_digest: String,
}

/// Exhaustively find the feasible subset with maximal exact correctness
/// probability. The empty set scores 0, so it is returned only when nothing
/// is affordable. Ties break to the fewest models, then lexicographically by
/// index list.
pub fn brute_force_optimum(problem: &SelectionProblem) -> Result<(ModelSet, f64)> {
    let profile = &problem.profile;
    let l = profile.len();
    if l > MAX_BRUTE_FORCE_MODELS {
        return Err(Error::InstanceTooLarge {
            models: l,
            limit: MAX_BRUTE_FORCE_MODELS,
        });
    }
    let candidates: Vec<(ModelSet, f64)> = (0u64..(1u64 << l))
        .into_par_iter()
        .map(|bits| -> Result<Option<(ModelSet, f64)>> {
            let set = ModelSet::from_indices((0..l).filter(|&i| bits & (1 << i) != 0));
            debug_assert_eq!(set.bits(), bits);
            let cost: f64 = set.iter().map(|i| profile.entry(i).query_cost).sum();
            if cost > problem.budget {
                return Ok(None);
            }
            let pa = if set.is_empty() {
                0.0
            } else {
                exact_pa_with_threshold(profile, set, DEFAULT_EXACT_THRESHOLD)?.value
            };
            Ok(Some((set, pa)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let best = candidates
        .into_iter()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .expect("empty set is always feasible");
    Ok(best)
}

/// Deterministic preference: higher PA, then fewer models, then
/// lexicographically smaller index list.
fn better(challenger: &(ModelSet, f64), incumbent: &(ModelSet, f64)) -> bool {
    if challenger.1 != incumbent.1 {
        return challenger.1 > incumbent.1;
    }
    if challenger.0.len() != incumbent.0.len() {
        return challenger.0.len() < incumbent.0.len();
    }
    challenger.0.indices() < incumbent.0.indices()
}

/// Compare a plan's exact correctness against the data-dependent bound
/// `guarantee_ratio(diagnostics, epsilon) * PA(optimum)`, with every PA term
/// in the ratio re-evaluated exactly from the diagnostics' sets.
pub fn audit_guarantee(
    problem: &SelectionProblem,
    plan: &SelectionPlan,
    epsilon: f64,
) -> Result<GuaranteeReport> {
    let diagnostics = plan
        .diagnostics
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("plan carries no diagnostics to audit".into()))?;
    let profile = &problem.profile;
    let exact = |set: ModelSet| -> Result<f64> {
        if set.is_empty() {
            Ok(0.0)
        } else {
            Ok(exact_pa_with_threshold(profile, set, DEFAULT_EXACT_THRESHOLD)?.value)
        }
    };

    let (optimum_set, optimum_pa) = brute_force_optimum(problem)?;
    let plan_pa = exact(plan.chosen_set())?;

    let mut exact_diag = diagnostics.clone();
    exact_diag.pa_s1 = exact(diagnostics.s1)?;
    exact_diag.pa_s2 = exact(diagnostics.s2)?;
    exact_diag.gamma_s2 = crate::correctness::surrogate_gamma(profile, diagnostics.s2);

    let bound_value = guarantee_ratio(&exact_diag, epsilon) * optimum_pa;
    Ok(GuaranteeReport {
        optimum_set,
        optimum_pa,
        plan_pa,
        bound_value,
        satisfied: plan_pa >= bound_value - BOUND_SLACK,
        instance_digest: instance_digest(problem),
    })
}

/// A strict violation of the submodular marginal inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmodularityWitness {
    pub s1: ModelSet,
    pub s2: ModelSet,
    pub extra: usize,
    pub gain_s1: f64,
    pub gain_s2: f64,
}

/// Search for `S1 subset S2`, `l` outside `S2`, with
/// `f(S1 + l) - f(S1) < f(S2 + l) - f(S2)` strictly (beyond float noise).
/// Non-exhaustive mode restricts `S2` to `S1` plus one model, which is where
/// the classic violations live; exhaustive mode scans every nested pair.
/// Returns the first witness in canonical order, or `None`.
pub fn submodularity_probe(
    objective: &mut dyn SetObjective,
    pool_size: usize,
    exhaustive: bool,
) -> Result<Option<SubmodularityWitness>> {
    const MARGIN: f64 = 1e-12;
    if pool_size > MAX_BRUTE_FORCE_MODELS {
        return Err(Error::InstanceTooLarge {
            models: pool_size,
            limit: MAX_BRUTE_FORCE_MODELS,
        });
    }
    for s2_bits in 0u64..(1u64 << pool_size) {
        let s2 = ModelSet::from_indices((0..pool_size).filter(|&i| s2_bits & (1 << i) != 0));
        // Proper submasks of s2, ascending so the canonical witness comes
        // out first.
        let mut submasks = Vec::new();
        let mut sub = s2_bits;
        loop {
            sub = sub.wrapping_sub(1) & s2_bits;
            if sub == s2_bits {
                break;
            }
            submasks.push(sub);
            if sub == 0 {
                break;
            }
        }
        submasks.reverse();
        for sub in submasks {
            let s1 = ModelSet::from_indices((0..pool_size).filter(|&i| sub & (1 << i) != 0));
            if !exhaustive && s2.len() != s1.len() + 1 {
                continue;
            }
            for extra in 0..pool_size {
                if s2.contains(extra) {
                    continue;
                }
                let gain_s1 = objective.eval(s1.with(extra))? - objective.eval(s1)?;
                let gain_s2 = objective.eval(s2.with(extra))? - objective.eval(s2)?;
                if gain_s1 < gain_s2 - MARGIN {
                    return Ok(Some(SubmodularityWitness {
                        s1,
                        s2,
                        extra,
                        gain_s1,
                        gain_s2,
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Stable fingerprint of a problem instance (profile content plus budget).
pub fn instance_digest(problem: &SelectionProblem) -> String {
    let mut canonical = String::new();
    write!(
        canonical,
        "K={};B={:.17e}",
        problem.profile.class_count(),
        problem.budget
    )
    .unwrap();
    for e in problem.profile.entries() {
        write!(
            canonical,
            ";{}:{:.17e}:{:.17e}",
            e.model_id, e.success_prob, e.query_cost
        )
        .unwrap();
    }
    format!("{:016x}", crate::seedmix::hash_str(&canonical))
}
