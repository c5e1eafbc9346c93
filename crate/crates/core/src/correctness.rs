//! Correctness probability of a model subset: exact enumeration for small
//! instances, Monte Carlo estimation in general, and the submodular
//! surrogate `gamma`.
//!
//! The correctness probability `PA(S)` is the chance that the aggregated
//! prediction of `S` matches the ground truth on a random query of the
//! class. It is independent of which class is the true one, so both the
//! exact and the sampled evaluator fix class 0 as the truth.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aggregation::predict_from_log_beliefs;
use crate::catalog::ClassProfile;
use crate::error::{Error, Result};
use crate::seedmix::mix;
use crate::set::ModelSet;

/// Default cap on enumerated observations for [`exact_pa`].
pub const DEFAULT_EXACT_THRESHOLD: u64 = 2_000_000;

const MC_BATCH: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaMethod {
    Exact,
    MonteCarlo,
}

/// A correctness-probability value together with how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PaEstimate {
    pub value: f64,
    pub method: PaMethod,
    pub samples_used: u64,
    pub seed: u64,
}

impl PaEstimate {
    pub fn exact(value: f64) -> Self {
        PaEstimate {
            value,
            method: PaMethod::Exact,
            samples_used: 0,
            seed: 0,
        }
    }
}

/// Exact `PA(subset)` by enumerating all `K^|subset|` observations under the
/// default threshold.
pub fn exact_pa(profile: &ClassProfile, subset: ModelSet) -> Result<PaEstimate> {
    exact_pa_with_threshold(profile, subset, DEFAULT_EXACT_THRESHOLD)
}

pub fn exact_pa_with_threshold(
    profile: &ClassProfile,
    subset: ModelSet,
    threshold: u64,
) -> Result<PaEstimate> {
    let value = exact_pa_assuming_truth(profile, subset, 0, threshold)?;
    Ok(PaEstimate::exact(value))
}

/// Exact correctness probability under an explicit assumed ground truth.
///
/// Exposed so the ground-truth-independence property can be checked
/// directly; production callers go through [`exact_pa`], which fixes class 0.
/// Observations whose belief argmax ties with the truth contribute
/// fractionally (`Pr / |tie set|`), which is the expected value under
/// uniform random tie-breaking.
pub fn exact_pa_assuming_truth(
    profile: &ClassProfile,
    subset: ModelSet,
    truth: usize,
    threshold: u64,
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter(
            "exact_pa requires a nonempty subset".into(),
        ));
    }
    if truth >= profile.class_count() {
        return Err(Error::InvalidParameter(format!(
            "assumed truth {truth} out of range for K={}",
            profile.class_count()
        )));
    }
    let k = profile.class_count();
    let states = (k as u128)
        .checked_pow(subset.len() as u32)
        .unwrap_or(u128::MAX);
    if states > threshold as u128 {
        return Err(Error::EnumerationTooLarge {
            states,
            limit: threshold,
        });
    }

    let models = subset.indices();
    let weights: Vec<f64> = models.iter().map(|&m| profile.log_weight(m)).collect();
    let probs: Vec<f64> = models
        .iter()
        .map(|&m| profile.entry(m).success_prob)
        .collect();
    let mut walker = Enumerator {
        k,
        truth,
        wrong: (k - 1) as f64,
        default_belief: profile.default_log_belief(),
        weights: &weights,
        probs: &probs,
        log_sums: vec![0.0; k],
        votes: vec![0u32; k],
        acc: 0.0,
    };
    walker.walk(0, 1.0);
    Ok(walker.acc)
}

struct Enumerator<'a> {
    k: usize,
    truth: usize,
    wrong: f64,
    default_belief: f64,
    weights: &'a [f64],
    probs: &'a [f64],
    log_sums: Vec<f64>,
    votes: Vec<u32>,
    acc: f64,
}

impl Enumerator<'_> {
    fn walk(&mut self, depth: usize, prob: f64) {
        if depth == self.weights.len() {
            self.settle(prob);
            return;
        }
        let p = self.probs[depth];
        let w = self.weights[depth];
        for class in 0..self.k {
            let factor = if class == self.truth {
                p
            } else {
                (1.0 - p) / self.wrong
            };
            self.log_sums[class] += w;
            self.votes[class] += 1;
            self.walk(depth + 1, prob * factor);
            self.log_sums[class] -= w;
            self.votes[class] -= 1;
        }
    }

    fn settle(&mut self, prob: f64) {
        let mut best = f64::NEG_INFINITY;
        let mut ties = 0usize;
        let mut truth_is_max = false;
        for class in 0..self.k {
            let belief = if self.votes[class] > 0 {
                self.log_sums[class]
            } else {
                self.default_belief
            };
            if belief > best {
                best = belief;
                ties = 1;
                truth_is_max = class == self.truth;
            } else if belief == best {
                ties += 1;
                truth_is_max |= class == self.truth;
            }
        }
        if truth_is_max {
            self.acc += prob / ties as f64;
        }
    }
}

/// Monte Carlo estimate of `PA(subset)` from `samples` simulated queries.
///
/// Deterministic given `seed`: simulations run in fixed-size batches whose
/// sub-seeds derive from `(seed, batch index)`, and integer success counts
/// are summed before the single final division, so the result is independent
/// of thread scheduling.
pub fn mc_pa(profile: &ClassProfile, subset: ModelSet, samples: u64, seed: u64) -> PaEstimate {
    assert!(samples >= 1, "mc_pa requires at least one sample");
    let models = subset.indices();
    let weights: Vec<f64> = models.iter().map(|&m| profile.log_weight(m)).collect();
    let probs: Vec<f64> = models
        .iter()
        .map(|&m| profile.entry(m).success_prob)
        .collect();
    let k = profile.class_count();
    let default_belief = profile.default_log_belief();

    let batches = samples.div_ceil(MC_BATCH);
    let successes: u64 = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let batch_samples = MC_BATCH.min(samples - batch * MC_BATCH);
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, batch));
            let mut log_sums = vec![0.0f64; k];
            let mut votes = vec![0u32; k];
            let mut beliefs = vec![0.0f64; k];
            let mut ties = Vec::with_capacity(k);
            let mut hits = 0u64;
            for _ in 0..batch_samples {
                log_sums.iter_mut().for_each(|v| *v = 0.0);
                votes.iter_mut().for_each(|v| *v = 0);
                for (i, &p) in probs.iter().enumerate() {
                    let class = sample_response(p, k, 0, &mut rng);
                    log_sums[class] += weights[i];
                    votes[class] += 1;
                }
                for class in 0..k {
                    beliefs[class] = if votes[class] > 0 {
                        log_sums[class]
                    } else {
                        default_belief
                    };
                }
                if predict_from_log_beliefs(&beliefs, &mut ties, &mut rng) == 0 {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    PaEstimate {
        value: successes as f64 / samples as f64,
        method: PaMethod::MonteCarlo,
        samples_used: samples,
        seed,
    }
}

/// Draw one simulated response: correct with probability `p`, otherwise
/// uniform over the `K-1` wrong classes.
pub(crate) fn sample_response<R: Rng + ?Sized>(
    p: f64,
    class_count: usize,
    truth: usize,
    rng: &mut R,
) -> usize {
    if rng.random::<f64>() < p {
        truth
    } else {
        let wrong = rng.random_range(0..class_count - 1);
        if wrong >= truth {
            wrong + 1
        } else {
            wrong
        }
    }
}

/// Number of Monte Carlo simulations needed so every estimate in one
/// selection run lands within `epsilon * p_star / 2` of the truth with
/// probability at least `1 - delta / L^2`:
/// `ceil((8 + 2 eps) / (eps^2 p*) * ln(2 L^2 / delta))`.
pub fn required_samples(epsilon: f64, delta: f64, p_star: f64, pool_size: usize) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be in (0, 1], found {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0, 1), found {delta}"
        )));
    }
    if !(p_star > 0.0 && p_star < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p_star must be in (0, 1), found {p_star}"
        )));
    }
    if pool_size == 0 {
        return Err(Error::InvalidParameter("pool size must be positive".into()));
    }
    let l = pool_size as f64;
    let theta = (8.0 + 2.0 * epsilon) / (epsilon * epsilon * p_star) * (2.0 * l * l / delta).ln();
    Ok((theta.ceil() as u64).max(1))
}

/// Submodular surrogate `gamma(S) = 1 - prod_{l in S} (1 - p_l)`: the
/// probability at least one member answers correctly. Upper-bounds `PA(S)`.
pub fn surrogate_gamma(profile: &ClassProfile, subset: ModelSet) -> f64 {
    1.0 - subset
        .iter()
        .map(|m| 1.0 - profile.entry(m).success_prob)
        .product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_pa_two_models_is_max() {
        let profile = ClassProfile::from_probs_costs(3, &[0.9, 0.8], &[1.0, 1.0]).unwrap();
        let pa = exact_pa(&profile, ModelSet::full(2)).unwrap();
        assert!((pa.value - 0.9).abs() < 1e-12);
        assert_eq!(pa.method, PaMethod::Exact);
        assert_eq!(pa.samples_used, 0);
    }

    #[test]
    fn exact_pa_single_model_is_p() {
        for k in [2usize, 3, 5] {
            let profile = ClassProfile::from_probs_costs(k, &[0.73], &[1.0]).unwrap();
            let pa = exact_pa(&profile, ModelSet::singleton(0)).unwrap();
            assert!((pa.value - 0.73).abs() < 1e-12, "K={k}");
        }
    }

    #[test]
    fn exact_pa_nonsubmodular_witness_value() {
        // P = {0.6, 0.58, 0.58}, K = 2; closed form for the three-model set:
        // p1 - p1(1-p2)(1-p3)/(K-1) + (1-p1) p2 p3.
        let profile =
            ClassProfile::from_probs_costs(2, &[0.6, 0.58, 0.58], &[1.0, 1.0, 1.0]).unwrap();
        let pa = exact_pa(&profile, ModelSet::full(3)).unwrap();
        let closed = 0.6f64 - 0.6 * 0.42 * 0.42 + 0.4 * 0.58 * 0.58;
        assert!((closed - 0.62872).abs() < 1e-12);
        assert!((pa.value - closed).abs() < 1e-12);
    }

    #[test]
    fn exact_pa_threshold_guard() {
        let probs = vec![0.7; 12];
        let costs = vec![1.0; 12];
        let profile = ClassProfile::from_probs_costs(4, &probs, &costs).unwrap();
        match exact_pa_with_threshold(&profile, ModelSet::full(12), 1000) {
            Err(Error::EnumerationTooLarge { states, limit }) => {
                assert_eq!(states, 4u128.pow(12));
                assert_eq!(limit, 1000);
            }
            other => panic!("expected size error, got {other:?}"),
        }
    }

    #[test]
    fn exact_pa_rejects_empty_subset() {
        let profile = ClassProfile::from_probs_costs(2, &[0.7], &[1.0]).unwrap();
        assert!(exact_pa(&profile, ModelSet::empty()).is_err());
    }

    #[test]
    fn mc_pa_matches_exact_on_fig2_pair() {
        let profile = ClassProfile::from_probs_costs(3, &[0.9, 0.8], &[1.0, 1.0]).unwrap();
        let est = mc_pa(&profile, ModelSet::full(2), 200_000, 7);
        assert!((est.value - 0.9).abs() < 0.01, "estimate {}", est.value);
        assert_eq!(est.samples_used, 200_000);
    }

    #[test]
    fn mc_pa_matches_exact_on_witness_profile() {
        let profile =
            ClassProfile::from_probs_costs(2, &[0.6, 0.58, 0.58], &[1.0, 1.0, 1.0]).unwrap();
        let est = mc_pa(&profile, ModelSet::full(3), 500_000, 11);
        assert!(
            (est.value - 0.62872).abs() < 0.005,
            "estimate {}",
            est.value
        );
    }

    #[test]
    fn mc_pa_single_sample_is_bernoulli() {
        let profile = ClassProfile::from_probs_costs(2, &[0.5], &[1.0]).unwrap();
        let est = mc_pa(&profile, ModelSet::singleton(0), 1, 3);
        assert!(est.value == 0.0 || est.value == 1.0);
    }

    #[test]
    fn mc_pa_deterministic_per_seed() {
        let profile = ClassProfile::from_probs_costs(3, &[0.9, 0.8, 0.7], &[1.0; 3]).unwrap();
        let a = mc_pa(&profile, ModelSet::full(3), 30_000, 99);
        let b = mc_pa(&profile, ModelSet::full(3), 30_000, 99);
        assert_eq!(a.value, b.value);
        let c = mc_pa(&profile, ModelSet::full(3), 30_000, 100);
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn required_samples_reference_value() {
        assert_eq!(required_samples(0.1, 0.01, 0.9, 12).unwrap(), 9356);
    }

    #[test]
    fn required_samples_boundary_and_monotonicity() {
        // eps = 1 reduces the leading factor to 10 / p*.
        let l: f64 = 5.0;
        let expected = (10.0 / 0.5 * (2.0 * l * l / 0.01f64).ln()).ceil() as u64;
        assert_eq!(required_samples(1.0, 0.01, 0.5, 5).unwrap(), expected);

        let small = required_samples(0.1, 0.01, 0.9, 6).unwrap();
        let large = required_samples(0.1, 0.01, 0.9, 12).unwrap();
        assert!(large > small);
    }

    #[test]
    fn required_samples_rejects_bad_ranges() {
        assert!(required_samples(0.0, 0.01, 0.9, 4).is_err());
        assert!(required_samples(0.1, 1.0, 0.9, 4).is_err());
        assert!(required_samples(0.1, 0.01, 1.0, 4).is_err());
        assert!(required_samples(0.1, 0.01, 0.9, 0).is_err());
    }

    #[test]
    fn gamma_examples() {
        let profile = ClassProfile::from_probs_costs(3, &[0.9, 0.8], &[1.0, 1.0]).unwrap();
        assert!((surrogate_gamma(&profile, ModelSet::full(2)) - 0.98).abs() < 1e-12);
        assert_eq!(surrogate_gamma(&profile, ModelSet::empty()), 0.0);
        assert!((surrogate_gamma(&profile, ModelSet::singleton(0)) - 0.9).abs() < 1e-12);
    }
}
