//! Adaptive per-query execution of a selection plan.
//!
//! Models are invoked in descending success probability. Before each
//! invocation the runtime checks whether the models not yet invoked could
//! still overturn the current leading class: with `F(T)` the potential
//! belief of the remainder and `H1 >= H2` the two highest current beliefs,
//! invocation continues only while `F(T) * H2 > H1`. Once the check fails,
//! the remaining models cannot change the aggregated prediction and their
//! cost is saved.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aggregation::{aggregate_prediction, belief_table, BeliefTable, Observation};
use crate::catalog::ClassProfile;
use crate::correctness::sample_response;
use crate::error::{Error, Result};
use crate::seedmix::{hash_str, mix};
use crate::selection::SelectionPlan;
use crate::set::ModelSet;

/// Relative slack for float budget comparisons; cost sums are exact to a few
/// ulps, so this never masks a real overrun.
const BUDGET_SLACK: f64 = 1e-9;

/// One model invocation result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackendResponse {
    pub predicted_class: usize,
    pub actual_cost: f64,
}

/// Source of model responses: a seeded simulator or a replay table.
pub trait ModelBackend {
    fn invoke(&self, model: usize, query_id: &str) -> Result<BackendResponse>;
}

/// Simulated backend: model `i` answers the planted truth with probability
/// `p_i`, otherwise a uniformly random wrong class; cost is the profile cost.
/// Responses are a pure function of `(seed, query_id, model)`, so any
/// invocation order or subset sees the same answers.
pub struct SimulatedBackend<'a> {
    profile: &'a ClassProfile,
    truths: HashMap<String, usize>,
    seed: u64,
}

impl<'a> SimulatedBackend<'a> {
    pub fn new(profile: &'a ClassProfile, truths: HashMap<String, usize>, seed: u64) -> Self {
        SimulatedBackend {
            profile,
            truths,
            seed,
        }
    }
}

impl ModelBackend for SimulatedBackend<'_> {
    fn invoke(&self, model: usize, query_id: &str) -> Result<BackendResponse> {
        let truth = *self
            .truths
            .get(query_id)
            .ok_or_else(|| Error::MissingTruth {
                query: query_id.to_string(),
            })?;
        let mut rng =
            ChaCha8Rng::seed_from_u64(mix(mix(self.seed, hash_str(query_id)), model as u64));
        Ok(simulated_invoke(self.profile, truth, model, &mut rng))
    }
}

/// Draw one simulated response for `model` under a planted ground truth.
pub fn simulated_invoke<R: rand::Rng + ?Sized>(
    profile: &ClassProfile,
    truth: usize,
    model: usize,
    rng: &mut R,
) -> BackendResponse {
    let entry = profile.entry(model);
    BackendResponse {
        predicted_class: sample_response(entry.success_prob, profile.class_count(), truth, rng),
        actual_cost: entry.query_cost,
    }
}

/// Replay backend over a recorded `(query, model) -> (class, cost)` table.
/// Missing cells are hard errors, never imputed.
pub struct ReplayBackend<'a> {
    profile: &'a ClassProfile,
    table: HashMap<(String, String), (usize, f64)>,
}

impl<'a> ReplayBackend<'a> {
    pub fn new(profile: &'a ClassProfile, table: HashMap<(String, String), (usize, f64)>) -> Self {
        ReplayBackend { profile, table }
    }

    /// Load a replay table: CSV `query_id,model_id,predicted_class,actual_cost`.
    pub fn load(profile: &'a ClassProfile, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end() == "query_id,model_id,predicted_class,actual_cost" => {}
            Some((_, h)) => {
                return Err(Error::parse(
                    &display,
                    1,
                    format!("unexpected replay header `{}`", h.trim_end()),
                ))
            }
            None => return Err(Error::parse(&display, 1, "missing header")),
        }
        let mut table = HashMap::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    &display,
                    lineno,
                    format!("expected 4 fields, found {}", fields.len()),
                ));
            }
            let class: usize = fields[2].trim().parse().map_err(|_| {
                Error::parse(
                    &display,
                    lineno,
                    format!("cannot parse predicted_class `{}`", fields[2]),
                )
            })?;
            if class >= profile.class_count() {
                return Err(Error::parse(
                    &display,
                    lineno,
                    format!(
                        "predicted_class {class} out of range for K={}",
                        profile.class_count()
                    ),
                ));
            }
            let cost: f64 = fields[3].trim().parse().map_err(|_| {
                Error::parse(
                    &display,
                    lineno,
                    format!("cannot parse actual_cost `{}`", fields[3]),
                )
            })?;
            table.insert(
                (fields[0].trim().to_string(), fields[1].trim().to_string()),
                (class, cost),
            );
        }
        Ok(ReplayBackend { profile, table })
    }
}

impl ModelBackend for ReplayBackend<'_> {
    fn invoke(&self, model: usize, query_id: &str) -> Result<BackendResponse> {
        let model_id = &self.profile.entry(model).model_id;
        let key = (query_id.to_string(), model_id.clone());
        match self.table.get(&key) {
            Some(&(class, cost)) => Ok(BackendResponse {
                predicted_class: class,
                actual_cost: cost,
            }),
            None => Err(Error::MissingReplayCell {
                query: query_id.to_string(),
                model: model_id.clone(),
            }),
        }
    }
}

/// Load a ground-truth table: CSV `query_id,true_class`. Order preserved.
pub fn load_truths(path: impl AsRef<Path>, class_count: usize) -> Result<Vec<(String, usize)>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == "query_id,true_class" => {}
        Some((_, h)) => {
            return Err(Error::parse(
                &display,
                1,
                format!("unexpected truth header `{}`", h.trim_end()),
            ))
        }
        None => return Err(Error::parse(&display, 1, "missing header")),
    }
    let mut truths = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                &display,
                lineno,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        let class: usize = fields[1].trim().parse().map_err(|_| {
            Error::parse(
                &display,
                lineno,
                format!("cannot parse true_class `{}`", fields[1]),
            )
        })?;
        if class >= class_count {
            return Err(Error::parse(
                &display,
                lineno,
                format!("true_class {class} out of range for K={class_count}"),
            ));
        }
        truths.push((fields[0].trim().to_string(), class));
    }
    Ok(truths)
}

/// Everything observed while answering one query.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub query_id: String,
    /// Models invoked, a prefix of the plan's probability-descending order.
    pub invoked: Vec<usize>,
    pub observation: Observation,
    pub prediction: usize,
    pub spent: f64,
    /// `planned_cost - spent`.
    pub saved: f64,
}

/// True while the models in `remaining` could still overturn the leading
/// class of `table`: `log F(remaining) + log H2 > log H1`. An empty
/// remainder can never continue.
pub fn should_continue(profile: &ClassProfile, remaining: ModelSet, table: &BeliefTable) -> bool {
    if remaining.is_empty() {
        return false;
    }
    let potential = crate::aggregation::potential_belief(profile, remaining);
    let (h1, h2) = table.top_two_log();
    potential + h2 > h1
}

/// Plan models sorted for invocation: descending success probability, ties
/// by lower cost, then lexicographic model id.
pub fn invocation_order(profile: &ClassProfile, plan: &SelectionPlan) -> Vec<usize> {
    let mut order = plan.chosen.clone();
    order.sort_by(|&a, &b| {
        let ea = profile.entry(a);
        let eb = profile.entry(b);
        eb.success_prob
            .partial_cmp(&ea.success_prob)
            .unwrap()
            .then(ea.query_cost.partial_cmp(&eb.query_cost).unwrap())
            .then_with(|| ea.model_id.cmp(&eb.model_id))
    });
    order
}

/// Run one query adaptively: invoke plan models in probability order while
/// [`should_continue`] holds, then aggregate. Spending that would cross
/// `budget` aborts with an error rather than silently proceeding.
pub fn adaptive_run(
    plan: &SelectionPlan,
    profile: &ClassProfile,
    backend: &dyn ModelBackend,
    query_id: &str,
    budget: f64,
    seed: u64,
) -> Result<RunRecord> {
    run_query(plan, profile, backend, query_id, budget, seed, true)
}

/// Invoke the full plan unconditionally; the reference behavior the adaptive
/// run must match prediction-for-prediction.
pub fn full_run(
    plan: &SelectionPlan,
    profile: &ClassProfile,
    backend: &dyn ModelBackend,
    query_id: &str,
    budget: f64,
    seed: u64,
) -> Result<RunRecord> {
    run_query(plan, profile, backend, query_id, budget, seed, false)
}

fn run_query(
    plan: &SelectionPlan,
    profile: &ClassProfile,
    backend: &dyn ModelBackend,
    query_id: &str,
    budget: f64,
    seed: u64,
    adaptive: bool,
) -> Result<RunRecord> {
    let order = invocation_order(profile, plan);
    let mut remaining = plan.chosen_set();
    let mut obs = Observation::new();
    let mut table = belief_table(profile, &obs);
    let mut spent = 0.0f64;
    let mut invoked = Vec::new();

    for &model in &order {
        if adaptive && !should_continue(profile, remaining, &table) {
            break;
        }
        let response = backend.invoke(model, query_id)?;
        let attempted = spent + response.actual_cost;
        if attempted > budget * (1.0 + BUDGET_SLACK) {
            return Err(Error::BudgetExceeded {
                query: query_id.to_string(),
                attempted,
                budget,
            });
        }
        spent = attempted;
        obs.push(model, response.predicted_class);
        table = belief_table(profile, &obs);
        remaining.remove(model);
        invoked.push(model);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, hash_str(query_id)));
    let prediction = aggregate_prediction(&table, &mut rng);
    Ok(RunRecord {
        query_id: query_id.to_string(),
        invoked,
        observation: obs,
        prediction,
        spent,
        saved: (plan.planned_cost - spent).max(0.0),
    })
}
