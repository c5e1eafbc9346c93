//! Data model and ingestion for model pools, per-class profiles, budgets,
//! and token-based pricing.
//!
//! A [`ClassProfile`] is the per-query-class view of the pool: `K` class
//! labels plus, for each model, its estimated success probability and its
//! fixed per-query cost in USD. Success probabilities are clamped into
//! `[P_FLOOR, P_CAP]` at construction time because the belief arithmetic
//! divides by `1 - p`; everything downstream may assume probabilities are
//! strictly inside `(0, 1)`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::set::MAX_MODELS;

/// Lower clamp for success probabilities.
pub const P_FLOOR: f64 = 1e-3;
/// Upper clamp for success probabilities.
pub const P_CAP: f64 = 1.0 - 1e-3;

/// Pricing entry for one model: USD per million input/output tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub id: String,
    pub price_in: f64,
    pub price_out: f64,
}

/// Cost of one query against `spec`, given its token counts.
pub fn query_cost_from_tokens(spec: &ModelSpec, in_tokens: u64, out_tokens: u64) -> f64 {
    in_tokens as f64 * spec.price_in / 1e6 + out_tokens as f64 * spec.price_out / 1e6
}

/// Clamp a probability into `[P_FLOOR, P_CAP]`.
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(P_FLOOR, P_CAP)
}

const CATALOG_HEADER: &str = "id,price_in,price_out";

/// Load a pricing catalog from a CSV file with header `id,price_in,price_out`.
///
/// Row order is preserved. Duplicate ids and malformed rows are reported with
/// their line number.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<ModelSpec>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let mut lines = text.lines().enumerate();

    match lines.next() {
        Some((_, header)) if header.trim_end() == CATALOG_HEADER => {}
        Some((_, header)) => {
            return Err(Error::parse(
                &display,
                1,
                format!(
                    "expected header `{CATALOG_HEADER}`, found `{}`",
                    header.trim_end()
                ),
            ))
        }
        None => return Err(Error::parse(&display, 1, "missing header")),
    }

    let mut specs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                &display,
                lineno,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].trim().to_string();
        if id.is_empty() {
            return Err(Error::parse(&display, lineno, "empty model id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateModelId {
                path: display,
                line: lineno,
                id,
            });
        }
        let price_in = parse_price(&display, lineno, fields[1], "price_in")?;
        let price_out = parse_price(&display, lineno, fields[2], "price_out")?;
        specs.push(ModelSpec {
            id,
            price_in,
            price_out,
        });
    }
    Ok(specs)
}

/// Write a pricing catalog in the format [`load_catalog`] reads.
pub fn save_catalog(path: impl AsRef<Path>, specs: &[ModelSpec]) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut out = String::new();
    out.push_str(CATALOG_HEADER);
    out.push('\n');
    for spec in specs {
        writeln!(out, "{},{},{}", spec.id, spec.price_in, spec.price_out).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(&display, e))
}

fn parse_price(path: &str, line: usize, field: &str, name: &str) -> Result<f64> {
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse {name} `{field}`")))?;
    if !value.is_finite() || value < 0.0 {
        return Err(Error::parse(
            path,
            line,
            format!("{name} must be a nonnegative finite number, found {value}"),
        ));
    }
    Ok(value)
}

/// One model's row in a class profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEntry {
    pub model_id: String,
    /// Success probability on this query class, clamped into `(0, 1)`.
    pub success_prob: f64,
    /// Fixed per-query cost in USD.
    pub query_cost: f64,
}

/// Per-query-class view of the model pool.
///
/// Entry order is the canonical model order everywhere downstream: subsets,
/// observations, and plans all refer to models by their index here.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProfile {
    class_count: usize,
    entries: Vec<ProfileEntry>,
    min_prob: f64,
}

impl ClassProfile {
    /// Build a normalized profile: probabilities clamped, invariants checked.
    pub fn new(class_count: usize, entries: Vec<ProfileEntry>) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::InvalidProfile(format!(
                "class count must be at least 2, found {class_count}"
            )));
        }
        if entries.is_empty() {
            return Err(Error::InvalidProfile("model list is empty".into()));
        }
        if entries.len() > MAX_MODELS {
            return Err(Error::InvalidProfile(format!(
                "at most {MAX_MODELS} models per profile, found {}",
                entries.len()
            )));
        }
        let mut seen = HashSet::new();
        let mut normalized = Vec::with_capacity(entries.len());
        for entry in entries {
            if entry.model_id.is_empty() {
                return Err(Error::InvalidProfile("empty model id".into()));
            }
            if !seen.insert(entry.model_id.clone()) {
                return Err(Error::InvalidProfile(format!(
                    "duplicate model id `{}`",
                    entry.model_id
                )));
            }
            if !entry.success_prob.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "success probability of `{}` is not finite",
                    entry.model_id
                )));
            }
            if !entry.query_cost.is_finite() || entry.query_cost <= 0.0 {
                return Err(Error::InvalidProfile(format!(
                    "query cost of `{}` must be positive, found {}",
                    entry.model_id, entry.query_cost
                )));
            }
            normalized.push(ProfileEntry {
                success_prob: clamp_probability(entry.success_prob),
                ..entry
            });
        }
        let min_prob = normalized
            .iter()
            .map(|e| e.success_prob)
            .fold(f64::INFINITY, f64::min);
        Ok(ClassProfile {
            class_count,
            entries: normalized,
            min_prob,
        })
    }

    /// Convenience constructor for tests and generators: ids `m0, m1, ...`.
    pub fn from_probs_costs(class_count: usize, probs: &[f64], costs: &[f64]) -> Result<Self> {
        assert_eq!(probs.len(), costs.len());
        let entries = probs
            .iter()
            .zip(costs)
            .enumerate()
            .map(|(i, (&p, &b))| ProfileEntry {
                model_id: format!("m{i}"),
                success_prob: p,
                query_cost: b,
            })
            .collect();
        ClassProfile::new(class_count, entries)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ProfileEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &ProfileEntry {
        &self.entries[index]
    }

    pub fn index_of(&self, model_id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.model_id == model_id)
    }

    /// Minimum success probability over the full pool (all `L` models).
    pub fn min_prob(&self) -> f64 {
        self.min_prob
    }

    /// `ln(p (K-1) / (1-p))` for the model at `index`: its log-domain belief
    /// weight when it votes for a class.
    pub fn log_weight(&self, index: usize) -> f64 {
        let p = self.entries[index].success_prob;
        (p * (self.class_count - 1) as f64 / (1.0 - p)).ln()
    }

    /// Log-domain default belief assigned to classes no model voted for:
    /// `ln(p_min / (2 (1 - p_min)))` with `p_min` taken over the full pool.
    pub fn default_log_belief(&self) -> f64 {
        (self.min_prob / (2.0 * (1.0 - self.min_prob))).ln()
    }

    pub fn total_cost(&self) -> f64 {
        self.entries.iter().map(|e| e.query_cost).sum()
    }

    /// Load a profile file: a `K=<int>` metadata line, then the header
    /// `model_id,success_prob,query_cost`, then one row per model.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        let mut lines = text.lines().enumerate();

        let class_count = match lines.next() {
            Some((_, line)) => {
                let line = line.trim_end();
                let value = line.strip_prefix("K=").ok_or_else(|| {
                    Error::parse(&display, 1, format!("expected `K=<int>`, found `{line}`"))
                })?;
                value.trim().parse::<usize>().map_err(|_| {
                    Error::parse(&display, 1, format!("cannot parse class count `{value}`"))
                })?
            }
            None => return Err(Error::parse(&display, 1, "missing `K=<int>` line")),
        };

        match lines.next() {
            Some((_, header)) if header.trim_end() == "model_id,success_prob,query_cost" => {}
            Some((_, header)) => {
                return Err(Error::parse(
                    &display,
                    2,
                    format!(
                        "expected header `model_id,success_prob,query_cost`, found `{}`",
                        header.trim_end()
                    ),
                ))
            }
            None => return Err(Error::parse(&display, 2, "missing header")),
        }

        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    &display,
                    lineno,
                    format!("expected 3 fields, found {}", fields.len()),
                ));
            }
            let model_id = fields[0].trim().to_string();
            if !seen.insert(model_id.clone()) {
                return Err(Error::DuplicateModelId {
                    path: display,
                    line: lineno,
                    id: model_id,
                });
            }
            let success_prob: f64 = fields[1].trim().parse().map_err(|_| {
                Error::parse(
                    &display,
                    lineno,
                    format!("cannot parse success_prob `{}`", fields[1]),
                )
            })?;
            let query_cost: f64 = fields[2].trim().parse().map_err(|_| {
                Error::parse(
                    &display,
                    lineno,
                    format!("cannot parse query_cost `{}`", fields[2]),
                )
            })?;
            entries.push(ProfileEntry {
                model_id,
                success_prob,
                query_cost,
            });
        }
        ClassProfile::new(class_count, entries)
    }

    /// Write the profile in the format [`ClassProfile::load`] reads.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut out = String::new();
        writeln!(out, "K={}", self.class_count).unwrap();
        out.push_str("model_id,success_prob,query_cost\n");
        for e in &self.entries {
            writeln!(out, "{},{},{}", e.model_id, e.success_prob, e.query_cost).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(&display, e))
    }
}

/// Re-run normalization on an existing profile. Idempotent: a profile built
/// by [`ClassProfile::new`] comes back unchanged.
pub fn validate_profile(profile: ClassProfile) -> Result<ClassProfile> {
    ClassProfile::new(profile.class_count, profile.entries)
}

/// A profile together with a per-query cost budget.
#[derive(Debug, Clone)]
pub struct SelectionProblem {
    pub profile: ClassProfile,
    pub budget: f64,
}

impl SelectionProblem {
    pub fn new(profile: ClassProfile, budget: f64) -> Result<Self> {
        if !budget.is_finite() || budget <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "budget must be positive, found {budget}"
            )));
        }
        Ok(SelectionProblem { profile, budget })
    }
}
