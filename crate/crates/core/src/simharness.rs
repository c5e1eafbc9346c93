//! Synthetic instance generation and budget sweeps.
//!
//! The sweep runs every (instance, budget, method) cell through planning and
//! per-query simulation, then aggregates accuracy and spend per (budget,
//! method) pair into CSV rows. All randomness derives from the master seed,
//! and per-query backend responses depend only on the instance stream -- not
//! on the method or the budget -- so methods sharing a plan see identical
//! answers and files are byte-stable across reruns.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{ClassProfile, SelectionProblem};
use crate::correctness::required_samples;
use crate::error::{Error, Result};
use crate::runtime::{adaptive_run, full_run, SimulatedBackend};
use crate::seedmix::mix;
use crate::selection::{
    greedy, surrogate_greedy, GammaObjective, MonteCarloPaObjective, SelectionPlan, SetObjective,
};

/// Recipe for one synthetic instance family. Ranges are inclusive.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceSpec {
    pub seed: u64,
    pub models: (usize, usize),
    pub classes: (usize, usize),
    pub success_prob: (f64, f64),
    pub query_cost: (f64, f64),
    pub queries: usize,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            seed: 42,
            models: (4, 8),
            classes: (2, 4),
            success_prob: (0.70, 0.95),
            query_cost: (2e-6, 4e-5),
            queries: 200,
        }
    }
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.models.0 < 1 || self.models.0 > self.models.1 {
            return Err(Error::InvalidParameter(format!(
                "model range {:?} is empty or unordered",
                self.models
            )));
        }
        if self.classes.0 < 2 || self.classes.0 > self.classes.1 {
            return Err(Error::InvalidParameter(format!(
                "class range {:?} is empty or unordered",
                self.classes
            )));
        }
        let (plo, phi) = self.success_prob;
        if !(plo > 0.0 && phi < 1.0 && plo <= phi) {
            return Err(Error::InvalidParameter(format!(
                "success probability range {:?} must be ordered inside (0, 1)",
                self.success_prob
            )));
        }
        let (clo, chi) = self.query_cost;
        if !(clo > 0.0 && clo <= chi && chi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "query cost range {:?} must be ordered inside (0, inf)",
                self.query_cost
            )));
        }
        if self.queries == 0 {
            return Err(Error::InvalidParameter(
                "query count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A generated instance: a profile, per-query ground truths, and the seed
/// that drives its simulated backend.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub profile: ClassProfile,
    pub truths: Vec<usize>,
    pub seed: u64,
}

impl GeneratedInstance {
    pub fn query_id(index: usize) -> String {
        format!("q{index:06}")
    }

    pub fn truth_map(&self) -> HashMap<String, usize> {
        self.truths
            .iter()
            .enumerate()
            .map(|(i, &t)| (Self::query_id(i), t))
            .collect()
    }
}

fn sample_range_usize<R: Rng>(rng: &mut R, range: (usize, usize)) -> usize {
    rng.random_range(range.0..=range.1)
}

fn sample_range_f64<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// Deterministically generate one instance from the spec's seed.
pub fn gen_instance(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = sample_range_usize(&mut rng, spec.models);
    let k = sample_range_usize(&mut rng, spec.classes);
    let probs: Vec<f64> = (0..l)
        .map(|_| sample_range_f64(&mut rng, spec.success_prob))
        .collect();
    let costs: Vec<f64> = (0..l)
        .map(|_| sample_range_f64(&mut rng, spec.query_cost))
        .collect();
    let truths: Vec<usize> = (0..spec.queries).map(|_| rng.random_range(0..k)).collect();
    Ok(GeneratedInstance {
        profile: ClassProfile::from_probs_costs(k, &probs, &costs)?,
        truths,
        seed: mix(spec.seed, 0x5157),
    })
}

/// Generate `count` instances by deriving one sub-seed per instance.
pub fn gen_instances(spec: &InstanceSpec, count: usize) -> Result<Vec<GeneratedInstance>> {
    (0..count)
        .map(|i| {
            let sub = InstanceSpec {
                seed: mix(spec.seed, i as u64),
                ..spec.clone()
            };
            gen_instance(&sub)
        })
        .collect()
}

/// Planning/execution strategies compared by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Surrogate-greedy plan, adaptive execution with early stopping.
    Thrift,
    /// The same plan, every model invoked.
    SurgreedyFull,
    /// Plain cost-ratio greedy plan, every model invoked.
    Greedy,
    /// The single affordable model with the highest success probability.
    BestSingle,
    /// A random feasible subset.
    RandomFeasible,
}

impl Method {
    pub fn all() -> [Method; 5] {
        [
            Method::Thrift,
            Method::SurgreedyFull,
            Method::Greedy,
            Method::BestSingle,
            Method::RandomFeasible,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Thrift => "thrift",
            Method::SurgreedyFull => "surgreedy_full",
            Method::Greedy => "greedy",
            Method::BestSingle => "best_single",
            Method::RandomFeasible => "random_feasible",
        }
    }

    pub fn parse(name: &str) -> Result<Method> {
        Method::all()
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{name}`")))
    }
}

/// Aggregated outcome of one (budget, method) pair across instances.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub budget: f64,
    pub method: Method,
    pub accuracy: f64,
    pub mean_spent: f64,
    pub mean_saved: f64,
    pub instances: usize,
    pub queries: usize,
}

/// The budget grid used when the caller does not supply one.
pub fn default_budgets() -> Vec<f64> {
    [1.0, 5.0, 10.0, 50.0, 100.0]
        .iter()
        .map(|b| b * 1e-5)
        .collect()
}

struct CellOutcome {
    correct: usize,
    queries: usize,
    spent: f64,
    saved: f64,
}

/// Run the full sweep. Deterministic given `seed`; rows are sorted by
/// (budget, method name) so serialized output is byte-stable.
pub fn run_sweep(
    instances: &[GeneratedInstance],
    budgets: &[f64],
    methods: &[Method],
    seed: u64,
    epsilon: f64,
    delta: f64,
) -> Result<Vec<SweepRow>> {
    if budgets.is_empty() {
        return Err(Error::InvalidParameter("budget list is empty".into()));
    }
    let cells: Vec<(usize, usize, Method)> = budgets
        .iter()
        .enumerate()
        .flat_map(|(bi, _)| {
            methods
                .iter()
                .flat_map(move |&m| (0..instances.len()).map(move |ii| (bi, ii, m)))
        })
        .collect();

    let outcomes: Vec<((usize, Method), CellOutcome)> = cells
        .into_par_iter()
        .map(
            |(bi, ii, method)| -> Result<((usize, Method), CellOutcome)> {
                let outcome = run_cell(
                    &instances[ii],
                    budgets[bi],
                    bi,
                    method,
                    seed,
                    epsilon,
                    delta,
                )?;
                Ok(((bi, method), outcome))
            },
        )
        .collect::<Result<Vec<_>>>()?;

    #[derive(Default)]
    struct CellTotals {
        correct: usize,
        spent: f64,
        saved: f64,
        instances: usize,
        queries: usize,
    }
    let mut grouped: HashMap<(usize, Method), CellTotals> = HashMap::new();
    for ((bi, method), outcome) in outcomes {
        let entry = grouped.entry((bi, method)).or_default();
        entry.correct += outcome.correct;
        entry.spent += outcome.spent;
        entry.saved += outcome.saved;
        entry.instances += 1;
        entry.queries += outcome.queries;
    }

    let mut rows: Vec<SweepRow> = grouped
        .into_iter()
        .map(|((bi, method), totals)| SweepRow {
            budget: budgets[bi],
            method,
            accuracy: totals.correct as f64 / totals.queries as f64,
            mean_spent: totals.spent / totals.queries as f64,
            mean_saved: totals.saved / totals.queries as f64,
            instances: totals.instances,
            queries: totals.queries,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.budget
            .total_cmp(&b.budget)
            .then_with(|| a.method.name().cmp(b.method.name()))
    });
    Ok(rows)
}

fn run_cell(
    instance: &GeneratedInstance,
    budget: f64,
    budget_index: usize,
    method: Method,
    seed: u64,
    epsilon: f64,
    delta: f64,
) -> Result<CellOutcome> {
    let profile = &instance.profile;
    let problem = SelectionProblem::new(profile.clone(), budget)?;

    // Planning randomness is shared by thrift and surgreedy_full (identical
    // plans); only the method-specific baselines mix the method in.
    let plan_seed = mix(mix(seed, instance.seed), budget_index as u64);
    let plan = match method {
        Method::Thrift | Method::SurgreedyFull => {
            plan_with_surgreedy(&problem, plan_seed, epsilon, delta)?
        }
        Method::Greedy => plan_with_greedy(&problem, plan_seed, epsilon, delta)?,
        Method::BestSingle => best_single_plan(&problem),
        Method::RandomFeasible => random_feasible_plan(&problem, mix(plan_seed, 0xbead)),
    };

    let truths = instance.truth_map();
    let backend = SimulatedBackend::new(profile, truths, instance.seed);
    let tie_seed = mix(seed, instance.seed);
    // Method-specific stream for empty-plan guessing.
    let mut guess_rng = ChaCha8Rng::seed_from_u64(mix(
        mix(tie_seed, budget_index as u64),
        method.name().len() as u64 ^ crate::seedmix::hash_str(method.name()),
    ));

    let mut outcome = CellOutcome {
        correct: 0,
        queries: instance.truths.len(),
        spent: 0.0,
        saved: 0.0,
    };
    for (qi, &truth) in instance.truths.iter().enumerate() {
        let query_id = GeneratedInstance::query_id(qi);
        let prediction = match &plan {
            Some(plan) => {
                let record = if method == Method::Thrift {
                    adaptive_run(plan, profile, &backend, &query_id, budget, tie_seed)?
                } else {
                    full_run(plan, profile, &backend, &query_id, budget, tie_seed)?
                };
                debug_assert!(record.spent <= budget * (1.0 + 1e-9));
                outcome.spent += record.spent;
                outcome.saved += record.saved;
                record.prediction
            }
            // Nothing affordable: a uniform random guess keeps the row
            // comparable.
            None => guess_rng.random_range(0..profile.class_count()),
        };
        if prediction == truth {
            outcome.correct += 1;
        }
    }
    Ok(outcome)
}

fn plan_with_surgreedy(
    problem: &SelectionProblem,
    plan_seed: u64,
    epsilon: f64,
    delta: f64,
) -> Result<Option<SelectionPlan>> {
    let (mut pa, mut gamma) = match mc_objectives(problem, plan_seed, epsilon, delta)? {
        Some(pair) => pair,
        None => return Ok(None),
    };
    match surrogate_greedy(problem, &mut pa, &mut gamma) {
        Ok(plan) => Ok(Some(plan)),
        Err(Error::NoFeasibleModel { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn plan_with_greedy(
    problem: &SelectionProblem,
    plan_seed: u64,
    epsilon: f64,
    delta: f64,
) -> Result<Option<SelectionPlan>> {
    let (mut pa, _) = match mc_objectives(problem, plan_seed, epsilon, delta)? {
        Some(pair) => pair,
        None => return Ok(None),
    };
    let chosen = greedy(problem, &mut pa)?;
    if chosen.is_empty() {
        return Ok(None);
    }
    let set = chosen.iter().copied().collect();
    let estimate = pa.estimate(set)?;
    Ok(Some(SelectionPlan::bare(
        &problem.profile,
        chosen,
        estimate,
    )))
}

type Objectives<'a> = (MonteCarloPaObjective<'a>, GammaObjective<'a>);

fn mc_objectives<'a>(
    problem: &'a SelectionProblem,
    plan_seed: u64,
    epsilon: f64,
    delta: f64,
) -> Result<Option<Objectives<'a>>> {
    let profile = &problem.profile;
    let p_star = (0..profile.len())
        .filter(|&l| profile.entry(l).query_cost <= problem.budget)
        .map(|l| profile.entry(l).success_prob)
        .fold(f64::NEG_INFINITY, f64::max);
    if p_star == f64::NEG_INFINITY {
        return Ok(None);
    }
    let samples = required_samples(epsilon, delta, p_star, profile.len())?;
    Ok(Some((
        MonteCarloPaObjective::new(profile, samples, plan_seed),
        GammaObjective::new(profile),
    )))
}

fn best_single_plan(problem: &SelectionProblem) -> Option<SelectionPlan> {
    let profile = &problem.profile;
    let best = (0..profile.len())
        .filter(|&l| profile.entry(l).query_cost <= problem.budget)
        .max_by(|&a, &b| {
            profile
                .entry(a)
                .success_prob
                .partial_cmp(&profile.entry(b).success_prob)
                .unwrap()
                .then(
                    profile
                        .entry(b)
                        .query_cost
                        .partial_cmp(&profile.entry(a).query_cost)
                        .unwrap(),
                )
        })?;
    let p = profile.entry(best).success_prob;
    Some(SelectionPlan::bare(
        profile,
        vec![best],
        crate::correctness::PaEstimate::exact(p),
    ))
}

fn random_feasible_plan(problem: &SelectionProblem, seed: u64) -> Option<SelectionPlan> {
    let profile = &problem.profile;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..profile.len()).collect();
    // Fisher-Yates over the candidate order.
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut chosen = Vec::new();
    let mut remaining = problem.budget;
    for l in order {
        let cost = profile.entry(l).query_cost;
        if cost <= remaining {
            chosen.push(l);
            remaining -= cost;
        }
    }
    if chosen.is_empty() {
        return None;
    }
    let value = crate::correctness::PaEstimate::exact(0.0);
    Some(SelectionPlan::bare(profile, chosen, value))
}

/// Serialize sweep rows in the stable CSV format.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("budget,method,accuracy,mean_spent,mean_saved,instances,queries\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.budget,
            r.method.name(),
            r.accuracy,
            r.mean_spent,
            r.mean_saved,
            r.instances,
            r.queries
        )
        .unwrap();
    }
    out
}

pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, sweep_to_csv(rows)).map_err(|e| Error::io(&path.display().to_string(), e))
}

/// On-disk sweep configuration: an instance family plus how many instances
/// to draw and (optionally) the budget grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub spec: InstanceSpec,
    pub instances: usize,
    #[serde(default)]
    pub budgets: Option<Vec<f64>>,
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&display, e.line(), e.to_string()))
    }
}
