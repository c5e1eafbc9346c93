//! Observation probabilities, per-class beliefs, and the maximum-likelihood
//! aggregated prediction.
//!
//! Given an observation (one class vote per invoked model), the belief in
//! class `k` is the product of `p (K-1) / (1-p)` over the models that voted
//! for `k`; classes nobody voted for get the fixed default
//! `p_min / (2 (1 - p_min))`. The argmax of the beliefs equals the argmax of
//! the full likelihood, so predictions never need the shared
//! `prod (1-p)/(K-1)` factor.
//!
//! All belief arithmetic is done in the natural-log domain: linear-domain
//! products over 10+ models overflow, and only the ordering matters.

use rand::Rng;

use crate::catalog::ClassProfile;
use crate::error::{Error, Result};
use crate::set::ModelSet;

/// Ordered list of `(model index, predicted class)` pairs for one query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Observation {
    responses: Vec<(usize, usize)>,
}

impl Observation {
    pub fn new() -> Self {
        Observation::default()
    }

    /// Validated constructor: every model index in range and distinct, every
    /// class below the profile's `K`.
    pub fn from_pairs(profile: &ClassProfile, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut obs = Observation::new();
        for &(model, class) in pairs {
            if model >= profile.len() {
                return Err(Error::ObservationMismatch(format!(
                    "model index {model} out of range for pool of {}",
                    profile.len()
                )));
            }
            if class >= profile.class_count() {
                return Err(Error::ObservationMismatch(format!(
                    "class {class} out of range for K={}",
                    profile.class_count()
                )));
            }
            if obs.responses.iter().any(|&(m, _)| m == model) {
                return Err(Error::ObservationMismatch(format!(
                    "model index {model} appears twice"
                )));
            }
            obs.responses.push((model, class));
        }
        Ok(obs)
    }

    /// Append a response. Callers are responsible for model uniqueness.
    pub fn push(&mut self, model: usize, class: usize) {
        debug_assert!(!self.responses.iter().any(|&(m, _)| m == model));
        self.responses.push((model, class));
    }

    pub fn responses(&self) -> &[(usize, usize)] {
        &self.responses
    }

    pub fn models(&self) -> ModelSet {
        self.responses.iter().map(|&(m, _)| m).collect()
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// Per-class log-domain belief values derived from one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefTable {
    log_belief: Vec<f64>,
}

impl BeliefTable {
    pub fn log_belief(&self) -> &[f64] {
        &self.log_belief
    }

    /// Classes attaining the maximum belief. Nonempty; exact float equality
    /// decides ties, which only arise from structurally identical products.
    pub fn tie_classes(&self) -> Vec<usize> {
        let mut ties = Vec::new();
        argmax_ties(&self.log_belief, &mut ties);
        ties
    }

    /// Highest and second-highest belief values (log domain, multiset
    /// semantics: two classes tied at the top yield `H1 == H2`).
    pub fn top_two_log(&self) -> (f64, f64) {
        let mut h1 = f64::NEG_INFINITY;
        let mut h2 = f64::NEG_INFINITY;
        for &v in &self.log_belief {
            if v > h1 {
                h2 = h1;
                h1 = v;
            } else if v > h2 {
                h2 = v;
            }
        }
        (h1, h2)
    }
}

/// Probability of observing `obs` when `assumed_truth` is the ground-truth
/// class: correct voters contribute `p`, wrong voters `(1-p)/(K-1)`.
pub fn observation_probability(
    profile: &ClassProfile,
    subset: ModelSet,
    assumed_truth: usize,
    obs: &Observation,
) -> Result<f64> {
    if assumed_truth >= profile.class_count() {
        return Err(Error::InvalidParameter(format!(
            "assumed truth {assumed_truth} out of range for K={}",
            profile.class_count()
        )));
    }
    if obs.models() != subset {
        return Err(Error::ObservationMismatch(format!(
            "observation covers {:?}, expected {:?}",
            obs.models(),
            subset
        )));
    }
    let wrong_classes = (profile.class_count() - 1) as f64;
    let mut prob = 1.0;
    for &(model, class) in obs.responses() {
        let p = profile.entry(model).success_prob;
        prob *= if class == assumed_truth {
            p
        } else {
            (1.0 - p) / wrong_classes
        };
    }
    Ok(prob)
}

/// Likelihood of class `class` being the ground truth given `obs`. Shares
/// the observation-probability form with the truth role played by `class`;
/// its argmax over classes coincides with the belief-table argmax.
pub fn likelihood(
    profile: &ClassProfile,
    subset: ModelSet,
    class: usize,
    obs: &Observation,
) -> Result<f64> {
    observation_probability(profile, subset, class, obs)
}

/// Build the per-class belief table for an observation.
pub fn belief_table(profile: &ClassProfile, obs: &Observation) -> BeliefTable {
    let k = profile.class_count();
    let default = profile.default_log_belief();
    let mut log_belief = vec![0.0; k];
    let mut votes = vec![0u32; k];
    for &(model, class) in obs.responses() {
        log_belief[class] += profile.log_weight(model);
        votes[class] += 1;
    }
    for class in 0..k {
        if votes[class] == 0 {
            log_belief[class] = default;
        }
    }
    BeliefTable { log_belief }
}

/// Argmax class of the belief table; ties are broken uniformly at random
/// from the caller's seeded stream.
pub fn aggregate_prediction<R: Rng + ?Sized>(table: &BeliefTable, rng: &mut R) -> usize {
    let mut scratch = Vec::new();
    predict_from_log_beliefs(&table.log_belief, &mut scratch, rng)
}

/// Shared argmax-with-random-tie-break over raw log beliefs. The Monte Carlo
/// simulator calls this directly to avoid rebuilding tables per sample.
pub(crate) fn predict_from_log_beliefs<R: Rng + ?Sized>(
    log_beliefs: &[f64],
    tie_scratch: &mut Vec<usize>,
    rng: &mut R,
) -> usize {
    argmax_ties(log_beliefs, tie_scratch);
    if tie_scratch.len() == 1 {
        tie_scratch[0]
    } else {
        tie_scratch[rng.random_range(0..tie_scratch.len())]
    }
}

fn argmax_ties(values: &[f64], ties: &mut Vec<usize>) {
    ties.clear();
    let mut best = f64::NEG_INFINITY;
    for (idx, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            ties.clear();
            ties.push(idx);
        } else if v == best {
            ties.push(idx);
        }
    }
    debug_assert!(!ties.is_empty());
}

/// Log-domain potential belief of a set: the largest belief the set could
/// contribute to a single class if all its members voted together. Empty set
/// yields 0 (an empty product).
pub fn potential_belief(profile: &ClassProfile, set: ModelSet) -> f64 {
    set.iter().map(|idx| profile.log_weight(idx)).sum()
}
