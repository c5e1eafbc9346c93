//! Success-probability estimation from historical performance data.
//!
//! Queries are clustered by embedding similarity (density-based, cosine
//! distance); each cluster's per-model success probability is the column
//! mean of the historical 0/1 matrix over the cluster's rows. Hoeffding
//! intervals attach finite-sample confidence to each estimate, and
//! median-of-repetitions boosting drives the interval failure probability
//! down exponentially when per-run confidence is weak.

use std::collections::HashMap;
use std::path::Path;

use crate::catalog::{ClassProfile, ProfileEntry};
use crate::error::{Error, Result};

/// N x L record of past per-model correctness on individual queries.
#[derive(Debug, Clone)]
pub struct HistoricalMatrix {
    values: Vec<Vec<u8>>,
    pub model_ids: Vec<String>,
    pub query_ids: Vec<String>,
}

impl HistoricalMatrix {
    pub fn new(
        values: Vec<Vec<u8>>,
        model_ids: Vec<String>,
        query_ids: Vec<String>,
    ) -> Result<Self> {
        if values.is_empty() || model_ids.is_empty() {
            return Err(Error::InvalidParameter(
                "historical matrix needs at least one query and one model".into(),
            ));
        }
        if values.len() != query_ids.len() {
            return Err(Error::InvalidParameter(
                "row count differs from query id count".into(),
            ));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != model_ids.len() {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    model_ids.len()
                )));
            }
            if row.iter().any(|&v| v > 1) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} contains a non-binary entry"
                )));
            }
        }
        Ok(HistoricalMatrix {
            values,
            model_ids,
            query_ids,
        })
    }

    pub fn n_queries(&self) -> usize {
        self.values.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn value(&self, query: usize, model: usize) -> u8 {
        self.values[query][model]
    }

    /// Column mean of `model` over the given rows.
    pub fn column_mean(&self, model: usize, rows: &[usize]) -> f64 {
        let sum: u64 = rows.iter().map(|&r| u64::from(self.values[r][model])).sum();
        sum as f64 / rows.len() as f64
    }

    /// Load from CSV: header `query_id,<model id>...`, cells 0/1.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        let mut lines = text.lines().enumerate();
        let model_ids: Vec<String> = match lines.next() {
            Some((_, header)) => {
                let fields: Vec<&str> = header.trim_end().split(',').collect();
                if fields.len() < 2 || fields[0] != "query_id" {
                    return Err(Error::parse(
                        &display,
                        1,
                        "expected header `query_id,<model ids...>`",
                    ));
                }
                fields[1..].iter().map(|s| s.trim().to_string()).collect()
            }
            None => return Err(Error::parse(&display, 1, "missing header")),
        };
        let mut values = Vec::new();
        let mut query_ids = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != model_ids.len() + 1 {
                return Err(Error::parse(
                    &display,
                    lineno,
                    format!(
                        "expected {} fields, found {}",
                        model_ids.len() + 1,
                        fields.len()
                    ),
                ));
            }
            let mut row = Vec::with_capacity(model_ids.len());
            for field in &fields[1..] {
                match field.trim() {
                    "0" => row.push(0u8),
                    "1" => row.push(1u8),
                    other => {
                        return Err(Error::parse(
                            &display,
                            lineno,
                            format!("matrix cells must be 0 or 1, found `{other}`"),
                        ))
                    }
                }
            }
            query_ids.push(fields[0].trim().to_string());
            values.push(row);
        }
        HistoricalMatrix::new(values, model_ids, query_ids)
    }
}

/// Load embeddings: CSV rows `query_id,v1,v2,...` with no header.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f64>)>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::parse(
                &display,
                lineno,
                "expected `query_id,<components...>`",
            ));
        }
        let mut components = Vec::with_capacity(fields.len() - 1);
        for field in &fields[1..] {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(
                    &display,
                    lineno,
                    format!("cannot parse embedding component `{field}`"),
                )
            })?;
            components.push(v);
        }
        rows.push((fields[0].trim().to_string(), components));
    }
    Ok(rows)
}

/// Cosine distance `1 - cos(a, b)`. A zero-norm vector is at distance 1 from
/// everything except another zero vector.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 && nb == 0.0 {
        return 0.0;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na.sqrt() * nb.sqrt())
}

/// Density-based clustering under cosine distance.
///
/// A point with at least `min_pts` neighbors within `eps` (itself included)
/// is a core point; clusters grow from core points in the usual way. Noise
/// points become singleton clusters afterwards so that every query maps to
/// some profile. Returns one contiguous cluster index per row.
pub fn cluster_queries(rows: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<Vec<usize>> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no embedding rows".into()));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, found {eps}"
        )));
    }
    if min_pts == 0 {
        return Err(Error::InvalidParameter("min_pts must be positive".into()));
    }
    let dim = rows[0].len();
    if dim == 0 {
        return Err(Error::DimensionMismatch {
            row: 0,
            got: 0,
            expected: 1,
        });
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                row: i,
                got: row.len(),
                expected: dim,
            });
        }
    }

    let n = rows.len();
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| cosine_distance(&rows[i], &rows[j]) <= eps)
            .collect()
    };

    const UNVISITED: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut labels = vec![UNVISITED; n];
    let mut next_cluster = 0usize;

    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        let seed_neighbors = neighbors(i);
        if seed_neighbors.len() < min_pts {
            labels[i] = NOISE;
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[i] = cluster;
        let mut queue = seed_neighbors;
        let mut qi = 0;
        while qi < queue.len() {
            let j = queue[qi];
            qi += 1;
            if labels[j] == NOISE {
                labels[j] = cluster; // border point
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            let j_neighbors = neighbors(j);
            if j_neighbors.len() >= min_pts {
                queue.extend(j_neighbors);
            }
        }
    }

    // Promote noise points to singleton clusters.
    for label in labels.iter_mut() {
        if *label == NOISE {
            *label = next_cluster;
            next_cluster += 1;
        }
    }
    Ok(labels)
}

/// Mean embedding per cluster, indexed by cluster id.
pub fn cluster_centroids(rows: &[Vec<f64>], assignment: &[usize]) -> Vec<Vec<f64>> {
    let clusters = assignment.iter().copied().max().map_or(0, |m| m + 1);
    let dim = rows.first().map_or(0, |r| r.len());
    let mut sums = vec![vec![0.0; dim]; clusters];
    let mut counts = vec![0usize; clusters];
    for (row, &cluster) in rows.iter().zip(assignment) {
        counts[cluster] += 1;
        for (s, v) in sums[cluster].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            for s in sum.iter_mut() {
                *s /= count as f64;
            }
        }
    }
    sums
}

/// Map a new embedding to the nearest centroid by cosine similarity; ties go
/// to the lowest cluster index.
pub fn nearest_cluster(centroids: &[Vec<f64>], embedding: &[f64]) -> Result<usize> {
    if centroids.is_empty() {
        return Err(Error::InvalidParameter("no centroids".into()));
    }
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = cosine_distance(c, embedding);
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    Ok(best)
}

/// Estimate a class profile from one cluster: per-model success probability
/// is the column mean over the cluster's rows (then clamped), costs are
/// attached from the caller, aligned with the matrix's model order.
pub fn estimate_profile(
    matrix: &HistoricalMatrix,
    cluster_rows: &[usize],
    class_count: usize,
    costs: &[f64],
) -> Result<ClassProfile> {
    if cluster_rows.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if costs.len() != matrix.n_models() {
        return Err(Error::InvalidParameter(format!(
            "{} costs for {} models",
            costs.len(),
            matrix.n_models()
        )));
    }
    let entries = (0..matrix.n_models())
        .map(|l| ProfileEntry {
            model_id: matrix.model_ids[l].clone(),
            success_prob: matrix.column_mean(l, cluster_rows),
            query_cost: costs[l],
        })
        .collect();
    ClassProfile::new(class_count, entries)
}

/// A point estimate with a two-sided confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalEstimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub confidence: f64,
    pub n: u64,
}

/// Two-sided Hoeffding interval of half-width `sqrt(ln(2/delta_l) / (2n))`,
/// clipped into `[0, 1]`.
pub fn hoeffding_interval(point: f64, n: u64, delta_l: f64) -> Result<IntervalEstimate> {
    if !(0.0..=1.0).contains(&point) {
        return Err(Error::InvalidParameter(format!(
            "point estimate must lie in [0, 1], found {point}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    if !(delta_l > 0.0 && delta_l < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta_l must be in (0, 1), found {delta_l}"
        )));
    }
    let width = ((2.0 / delta_l).ln() / (2.0 * n as f64)).sqrt();
    Ok(IntervalEstimate {
        point,
        lo: (point - width).max(0.0),
        hi: (point + width).min(1.0),
        confidence: 1.0 - delta_l,
        n,
    })
}

/// Run a repeatable interval estimator `repetitions` times (rounded up to
/// odd) and keep the interval whose point estimate is the median. The
/// returned interval is one of the sampler outputs verbatim; the failure
/// probability drops to `exp(-reps (1 - 2 delta_l)^2 / 2)`.
pub fn median_boost<F>(mut sampler: F, repetitions: u64) -> Result<IntervalEstimate>
where
    F: FnMut(u64) -> Result<IntervalEstimate>,
{
    if repetitions == 0 {
        return Err(Error::InvalidParameter(
            "repetitions must be positive".into(),
        ));
    }
    let reps = if repetitions.is_multiple_of(2) {
        repetitions + 1
    } else {
        repetitions
    };
    let mut estimates = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        estimates.push(sampler(rep)?);
    }
    estimates.sort_by(|a, b| a.point.total_cmp(&b.point));
    Ok(estimates.swap_remove(reps as usize / 2))
}

/// Repetitions needed to push the boosted failure probability below the
/// target: `ceil(6 ln(L/delta) / (1 - 2 delta_l)^2)`, rounded up to odd.
pub fn required_repetitions(pool_size: usize, delta: f64, delta_l: f64) -> Result<u64> {
    required_repetitions_with_log_base(pool_size, delta, delta_l, std::f64::consts::E)
}

/// Same as [`required_repetitions`] with an explicit logarithm base, for
/// callers reading the closing formula with a different convention.
pub fn required_repetitions_with_log_base(
    pool_size: usize,
    delta: f64,
    delta_l: f64,
    log_base: f64,
) -> Result<u64> {
    if pool_size == 0 {
        return Err(Error::InvalidParameter("pool size must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0, 1), found {delta}"
        )));
    }
    if !(delta_l > 0.0 && delta_l < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "delta_l must be in (0, 0.5), found {delta_l}"
        )));
    }
    if !log_base.is_finite() || log_base <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "log base must exceed 1, found {log_base}"
        )));
    }
    let log = (pool_size as f64 / delta).ln() / log_base.ln();
    let lambda = (6.0 * log / (1.0 - 2.0 * delta_l).powi(2)).ceil() as u64;
    let lambda = lambda.max(1);
    Ok(if lambda.is_multiple_of(2) {
        lambda + 1
    } else {
        lambda
    })
}

/// Lower-bound, point, and upper-bound profiles sharing one cost vector.
#[derive(Debug, Clone)]
pub struct ProfileBounds {
    pub low: ClassProfile,
    pub hat: ClassProfile,
    pub up: ClassProfile,
}

/// Build the three bounding profiles for one cluster from per-model
/// Hoeffding intervals at confidence `1 - delta_l`.
pub fn profile_bounds(
    matrix: &HistoricalMatrix,
    cluster_rows: &[usize],
    class_count: usize,
    costs: &[f64],
    delta_l: f64,
) -> Result<ProfileBounds> {
    if cluster_rows.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if costs.len() != matrix.n_models() {
        return Err(Error::InvalidParameter(format!(
            "{} costs for {} models",
            costs.len(),
            matrix.n_models()
        )));
    }
    let n = cluster_rows.len() as u64;
    let mut low = Vec::new();
    let mut hat = Vec::new();
    let mut up = Vec::new();
    for (l, (model_id, &query_cost)) in matrix.model_ids.iter().zip(costs).enumerate() {
        let interval = hoeffding_interval(matrix.column_mean(l, cluster_rows), n, delta_l)?;
        let entry = |p: f64| ProfileEntry {
            model_id: model_id.clone(),
            success_prob: p,
            query_cost,
        };
        low.push(entry(interval.lo));
        hat.push(entry(interval.point));
        up.push(entry(interval.hi));
    }
    Ok(ProfileBounds {
        low: ClassProfile::new(class_count, low)?,
        hat: ClassProfile::new(class_count, hat)?,
        up: ClassProfile::new(class_count, up)?,
    })
}

/// Group row indices by cluster id, in ascending cluster order.
pub fn rows_by_cluster(assignment: &[usize]) -> Vec<Vec<usize>> {
    let mut by_cluster: HashMap<usize, Vec<usize>> = HashMap::new();
    for (row, &cluster) in assignment.iter().enumerate() {
        by_cluster.entry(cluster).or_default().push(row);
    }
    let mut clusters: Vec<usize> = by_cluster.keys().copied().collect();
    clusters.sort_unstable();
    clusters
        .into_iter()
        .map(|c| by_cluster.remove(&c).unwrap())
        .collect()
}
