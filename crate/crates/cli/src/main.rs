//! Operator entry point: estimate profiles from history, select plans under
//! a budget, run adaptive execution, audit guarantees, and sweep budgets.
//!
//! Exit codes: 0 success, 2 validation error, 3 infeasible, 4 size guard.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use enselect::catalog::{ClassProfile, SelectionProblem};
use enselect::correctness::{required_samples, PaMethod};
use enselect::error::Error;
use enselect::estimation::{
    cluster_queries, load_embeddings, profile_bounds, rows_by_cluster, HistoricalMatrix,
};
use enselect::oracle::{audit_guarantee, instance_digest, GuaranteeReport};
use enselect::runtime::{adaptive_run, load_truths, ModelBackend, ReplayBackend, SimulatedBackend};
use enselect::selection::{
    greedy, surrogate_greedy, ExactPaObjective, GammaObjective, MonteCarloPaObjective,
    SelectionPlan, SetObjective,
};
use enselect::simharness::{
    default_budgets, gen_instances, run_sweep, write_sweep_csv, Method, SweepConfig,
};

#[derive(Parser)]
#[command(
    name = "enselect",
    version,
    about = "Budget-constrained ensemble selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build per-cluster profile bundles from historical 0/1 performance.
    Estimate(EstimateArgs),
    /// Select a model subset for a profile under a budget.
    Select(SelectArgs),
    /// Execute a plan adaptively over a query stream.
    Run(RunArgs),
    /// Audit plans against the brute-force optimum and the guarantee bound.
    Oracle(OracleArgs),
    /// Sweep budgets over synthetic instances and emit accuracy/cost rows.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Historical matrix CSV: header `query_id,<model ids...>`, cells 0/1.
    #[arg(long)]
    matrix: PathBuf,
    /// Embeddings CSV: rows `query_id,v1,v2,...` (no header).
    #[arg(long)]
    embeddings: PathBuf,
    /// Number of classes for the emitted profiles.
    #[arg(long)]
    classes: usize,
    /// Per-model query costs CSV: header `model_id,query_cost`.
    #[arg(long)]
    costs: PathBuf,
    /// Density radius (cosine distance).
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    /// Core-point neighbor threshold (the point itself counts).
    #[arg(long, default_value_t = 3)]
    min_pts: usize,
    /// Per-model interval failure probability.
    #[arg(long, default_value_t = 0.05)]
    delta_l: f64,
    /// Output prefix for `<prefix>.cluster<i>.{low,hat,up}` and
    /// `<prefix>.assignments.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    /// Profile file (`K=<int>` line, then `model_id,success_prob,query_cost`).
    #[arg(long)]
    profile: PathBuf,
    /// Per-query budget in USD.
    #[arg(long)]
    budget: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Evaluate correctness exactly instead of by Monte Carlo.
    #[arg(long)]
    exact: bool,
    /// Cap on enumerated observations for exact evaluation.
    #[arg(long, default_value_t = enselect::correctness::DEFAULT_EXACT_THRESHOLD)]
    exact_threshold: u64,
    /// Write the plan CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Plan CSV produced by `select`.
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    /// `sim` or `replay`.
    #[arg(long, default_value = "sim")]
    backend: String,
    /// Replay table CSV (`query_id,model_id,predicted_class,actual_cost`).
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Ground-truth CSV (`query_id,true_class`); defines the query stream.
    #[arg(long)]
    truth: PathBuf,
    /// Per-query budget; defaults to the plan's planned cost.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write per-query records here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, required_unless_present = "counterexample")]
    profile: Option<PathBuf>,
    #[arg(long, required_unless_present = "counterexample")]
    budget: Option<f64>,
    /// Use the built-in greedy-failure instance instead of a profile file.
    #[arg(long)]
    counterexample: bool,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Write the report CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration JSON (instance spec, instance count, budgets).
    #[arg(long)]
    config: PathBuf,
    /// Override the budget grid, comma-separated USD values.
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<f64>>,
    /// Override the configured instance count.
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Select(args) => cmd_select(args),
        Command::Run(args) => cmd_run(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NoFeasibleModel { .. } | Error::BudgetExceeded { .. } => 3,
        Error::EnumerationTooLarge { .. } | Error::InstanceTooLarge { .. } => 4,
        _ => 2,
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Error> {
    let matrix = HistoricalMatrix::load(&args.matrix)?;
    let embeddings = load_embeddings(&args.embeddings)?;
    let costs = load_costs(&args.costs, &matrix.model_ids)?;

    // The embedding row set must equal the matrix's query set.
    let by_id: HashMap<&str, &Vec<f64>> =
        embeddings.iter().map(|(id, v)| (id.as_str(), v)).collect();
    let mut rows = Vec::with_capacity(matrix.n_queries());
    for query in &matrix.query_ids {
        match by_id.get(query.as_str()) {
            Some(v) => rows.push((*v).clone()),
            None => {
                return Err(Error::MissingEmbedding {
                    query: query.clone(),
                })
            }
        }
    }
    let matrix_ids: HashSet<&str> = matrix.query_ids.iter().map(|s| s.as_str()).collect();
    for (id, _) in &embeddings {
        if !matrix_ids.contains(id.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "embedding row `{id}` has no matrix row"
            )));
        }
    }

    let assignment = cluster_queries(&rows, args.eps, args.min_pts)?;
    let clusters = rows_by_cluster(&assignment);

    let out_display = args.out.display();
    let mut assignment_csv = String::from("query_id,cluster\n");
    for (query, cluster) in matrix.query_ids.iter().zip(&assignment) {
        writeln!(assignment_csv, "{query},{cluster}").unwrap();
    }
    let assignment_path = format!("{out_display}.assignments.csv");
    std::fs::write(&assignment_path, assignment_csv).map_err(|e| Error::Io {
        path: assignment_path.clone(),
        source: e,
    })?;

    println!("queries: {}", matrix.n_queries());
    println!("models: {}", matrix.n_models());
    println!("clusters: {}", clusters.len());
    for (cluster, rows_in_cluster) in clusters.iter().enumerate() {
        let bounds = profile_bounds(&matrix, rows_in_cluster, args.classes, &costs, args.delta_l)?;
        let base = format!("{out_display}.cluster{cluster}");
        bounds.low.save(format!("{base}.low"))?;
        bounds.hat.save(format!("{base}.hat"))?;
        bounds.up.save(format!("{base}.up"))?;
        println!(
            "cluster {cluster}: {} queries -> {base}.{{low,hat,up}}",
            rows_in_cluster.len()
        );
    }
    println!("assignments: {assignment_path}");
    Ok(())
}

fn load_costs(path: &Path, model_ids: &[String]) -> Result<Vec<f64>, Error> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == "model_id,query_cost" => {}
        _ => {
            return Err(Error::Parse {
                path: display,
                line: 1,
                message: "expected header `model_id,query_cost`".into(),
            })
        }
    }
    let mut map = HashMap::new();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: display,
                line: idx + 1,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let cost: f64 = fields[1].trim().parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: idx + 1,
            message: format!("cannot parse query_cost `{}`", fields[1]),
        })?;
        map.insert(fields[0].trim().to_string(), cost);
    }
    model_ids
        .iter()
        .map(|id| {
            map.get(id)
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("no query cost for model `{id}`")))
        })
        .collect()
}

fn cmd_select(args: SelectArgs) -> Result<(), Error> {
    let profile = ClassProfile::load(&args.profile)?;
    let problem = SelectionProblem::new(profile.clone(), args.budget)?;

    let mut gamma = GammaObjective::new(&profile);
    let plan = if args.exact {
        let mut pa = ExactPaObjective::with_threshold(&profile, args.exact_threshold);
        surrogate_greedy(&problem, &mut pa, &mut gamma)?
    } else {
        let p_star = feasible_p_star(&problem)?;
        let samples = required_samples(args.epsilon, args.delta, p_star, profile.len())?;
        let mut pa = MonteCarloPaObjective::new(&profile, samples, args.seed);
        surrogate_greedy(&problem, &mut pa, &mut gamma)?
    };

    println!("seed: {}", args.seed);
    println!("budget: {}", args.budget);
    print_plan(&profile, &plan);
    if let Some(out) = &args.out {
        write_plan(out, &profile, &plan)?;
        println!("plan written to {}", out.display());
    }
    Ok(())
}

fn feasible_p_star(problem: &SelectionProblem) -> Result<f64, Error> {
    let profile = &problem.profile;
    let p_star = (0..profile.len())
        .filter(|&l| profile.entry(l).query_cost <= problem.budget)
        .map(|l| profile.entry(l).success_prob)
        .fold(f64::NEG_INFINITY, f64::max);
    if p_star == f64::NEG_INFINITY {
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
    Ok(p_star)
}

fn print_plan(profile: &ClassProfile, plan: &SelectionPlan) {
    let ids = |set: enselect::ModelSet| -> String {
        let names: Vec<&str> = set
            .iter()
            .map(|i| profile.entry(i).model_id.as_str())
            .collect();
        if names.is_empty() {
            "(empty)".to_string()
        } else {
            names.join(",")
        }
    };
    let chosen: Vec<&str> = plan
        .chosen
        .iter()
        .map(|&i| profile.entry(i).model_id.as_str())
        .collect();
    println!("chosen: {}", chosen.join(","));
    println!("planned_cost: {}", plan.planned_cost);
    let method = match plan.pa_estimate.method {
        PaMethod::Exact => "exact",
        PaMethod::MonteCarlo => "monte_carlo",
    };
    println!(
        "pa_estimate: {} (method={method}, samples={})",
        plan.pa_estimate.value, plan.pa_estimate.samples_used
    );
    if let Some(d) = &plan.diagnostics {
        println!("s1: {}", ids(d.s1));
        println!("s2: {}", ids(d.s2));
        println!(
            "best_single: {}",
            d.best_single
                .map(|i| profile.entry(i).model_id.clone())
                .unwrap_or_else(|| "(none)".into())
        );
        println!("p_star: {}", d.p_star);
        println!("gamma_s2: {}", d.gamma_s2);
        println!("guarantee_ratio: {}", d.guarantee_ratio);
    }
}

fn write_plan(path: &Path, profile: &ClassProfile, plan: &SelectionPlan) -> Result<(), Error> {
    let mut out = String::from("order,model_id,success_prob,query_cost\n");
    for (order, &model) in plan.chosen.iter().enumerate() {
        let e = profile.entry(model);
        writeln!(
            out,
            "{order},{},{},{}",
            e.model_id, e.success_prob, e.query_cost
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn load_plan(path: &Path, profile: &ClassProfile) -> Result<Vec<usize>, Error> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == "order,model_id,success_prob,query_cost" => {}
        _ => {
            return Err(Error::Parse {
                path: display,
                line: 1,
                message: "expected header `order,model_id,success_prob,query_cost`".into(),
            })
        }
    }
    let mut chosen = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: display,
                line: idx + 1,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let model_id = fields[1].trim();
        let model = profile.index_of(model_id).ok_or_else(|| Error::Parse {
            path: display.clone(),
            line: idx + 1,
            message: format!("plan model `{model_id}` is not in the profile"),
        })?;
        chosen.push(model);
    }
    if chosen.is_empty() {
        return Err(Error::InvalidParameter("plan is empty".into()));
    }
    Ok(chosen)
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let profile = ClassProfile::load(&args.profile)?;
    let chosen = load_plan(&args.plan, &profile)?;
    let plan = SelectionPlan::bare(
        &profile,
        chosen,
        enselect::correctness::PaEstimate::exact(0.0),
    );
    let truths = load_truths(&args.truth, profile.class_count())?;
    let budget = args.budget.unwrap_or(plan.planned_cost);

    let replay_backend;
    let sim_backend;
    let backend: &dyn ModelBackend = match args.backend.as_str() {
        "sim" => {
            let map: HashMap<String, usize> = truths.iter().cloned().collect();
            sim_backend = SimulatedBackend::new(&profile, map, args.seed);
            &sim_backend
        }
        "replay" => {
            let path = args.replay.as_ref().ok_or_else(|| {
                Error::InvalidParameter("--backend replay requires --replay <path>".into())
            })?;
            replay_backend = ReplayBackend::load(&profile, path)?;
            &replay_backend
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown backend `{other}` (expected `sim` or `replay`)"
            )))
        }
    };

    println!("seed: {}", args.seed);
    println!("budget: {budget}");
    let mut csv = String::from("query_id,invoked,prediction,true_class,correct,spent,saved\n");
    let mut correct = 0usize;
    let mut spent_total = 0.0;
    let mut saved_total = 0.0;
    for (query_id, truth) in &truths {
        let record = adaptive_run(&plan, &profile, backend, query_id, budget, args.seed)?;
        let invoked: Vec<&str> = record
            .invoked
            .iter()
            .map(|&i| profile.entry(i).model_id.as_str())
            .collect();
        let hit = record.prediction == *truth;
        correct += usize::from(hit);
        spent_total += record.spent;
        saved_total += record.saved;
        writeln!(
            csv,
            "{query_id},{},{},{},{},{},{}",
            invoked.join(";"),
            record.prediction,
            truth,
            u8::from(hit),
            record.spent,
            record.saved
        )
        .unwrap();
    }
    let n = truths.len().max(1) as f64;
    println!("queries: {}", truths.len());
    println!("accuracy: {}", correct as f64 / n);
    println!("mean_spent: {}", spent_total / n);
    println!("mean_saved: {}", saved_total / n);
    if let Some(out) = &args.out {
        std::fs::write(out, csv).map_err(|e| Error::Io {
            path: out.display().to_string(),
            source: e,
        })?;
        println!("records written to {}", out.display());
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Error> {
    let (profile, budget) = if args.counterexample {
        // Greedy-failure construction: the strong model costs the whole
        // budget, the weak one is cheap with a better probability/cost ratio.
        (
            ClassProfile::from_probs_costs(2, &[0.9, 0.2], &[10.0, 1.0])?,
            10.0,
        )
    } else {
        let profile = ClassProfile::load(args.profile.as_ref().expect("clap enforces"))?;
        (profile, args.budget.expect("clap enforces"))
    };
    let problem = SelectionProblem::new(profile.clone(), budget)?;

    let mut pa = ExactPaObjective::new(&profile);
    let mut gamma = GammaObjective::new(&profile);
    let surgreedy_plan = surrogate_greedy(&problem, &mut pa, &mut gamma)?;

    let mut pa2 = ExactPaObjective::new(&profile);
    let greedy_chosen = greedy(&problem, &mut pa2)?;
    let greedy_estimate = if greedy_chosen.is_empty() {
        enselect::correctness::PaEstimate::exact(0.0)
    } else {
        pa2.estimate(greedy_chosen.iter().copied().collect())?
    };
    let greedy_cost: f64 = greedy_chosen
        .iter()
        .map(|&l| profile.entry(l).query_cost)
        .sum();
    let greedy_plan = SelectionPlan {
        chosen: greedy_chosen,
        planned_cost: greedy_cost,
        pa_estimate: greedy_estimate,
        // Audit the myopic pick against the surrogate-greedy bound.
        diagnostics: surgreedy_plan.diagnostics.clone(),
    };

    let greedy_report = audit_guarantee(&problem, &greedy_plan, args.epsilon)?;
    let surgreedy_report = audit_guarantee(&problem, &surgreedy_plan, args.epsilon)?;

    println!("instance: {}", instance_digest(&problem));
    let show = |label: &str, plan: &SelectionPlan, report: &GuaranteeReport| {
        let names: Vec<&str> = plan
            .chosen
            .iter()
            .map(|&i| profile.entry(i).model_id.as_str())
            .collect();
        println!(
            "{label}: chosen=[{}] pa={} bound={} optimum_pa={} satisfied={}",
            names.join(","),
            report.plan_pa,
            report.bound_value,
            report.optimum_pa,
            report.satisfied
        );
    };
    show("greedy", &greedy_plan, &greedy_report);
    show("surgreedy", &surgreedy_plan, &surgreedy_report);

    if let Some(out) = &args.out {
        let mut csv = String::from("instance_digest,optimum_pa,plan_pa,bound_value,satisfied\n");
        for report in [&greedy_report, &surgreedy_report] {
            writeln!(
                csv,
                "{},{},{},{},{}",
                report.instance_digest,
                report.optimum_pa,
                report.plan_pa,
                report.bound_value,
                report.satisfied
            )
            .unwrap();
        }
        std::fs::write(out, csv).map_err(|e| Error::Io {
            path: out.display().to_string(),
            source: e,
        })?;
        println!(
            "report written to {} (rows: greedy, surgreedy)",
            out.display()
        );
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let config = SweepConfig::load(&args.config)?;
    let budgets = args
        .budgets
        .or(config.budgets.clone())
        .unwrap_or_else(default_budgets);
    if budgets.is_empty() {
        return Err(Error::InvalidParameter("budget list is empty".into()));
    }
    let count = args.instances.unwrap_or(config.instances);
    let instances = gen_instances(&config.spec, count)?;
    let rows = run_sweep(
        &instances,
        &budgets,
        &Method::all(),
        args.seed,
        args.epsilon,
        args.delta,
    )?;
    write_sweep_csv(&args.out, &rows)?;
    println!("seed: {}", args.seed);
    println!("instances: {count}");
    println!("budgets: {budgets:?}");
    println!("rows: {}", rows.len());
    println!("sweep written to {}", args.out.display());
    Ok(())
}
