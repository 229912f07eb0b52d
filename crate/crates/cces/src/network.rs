//! Multiplier-based network analysis: distances between sectors' positions
//! in the production network, agglomerative clustering, and histograms of
//! distance changes between states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mat::Mat;

/// Net multiplier matrix `(I - S)^{-1} - I` of a share block `S`: column j
/// holds the extra gross output each sector must produce per unit of final
/// demand for j, beyond that unit itself.
pub fn net_multipliers(s: &Mat) -> Result<Mat> {
    if s.rows() != s.cols() {
        return Err(Error::Validation(format!(
            "share block must be square, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    linalg::require_neumann(s, "net multipliers")?;
    let mut inv = linalg::invert_i_minus(s, "net multipliers")?;
    for i in 0..inv.rows() {
        let v = inv.get(i, i);
        inv.set(i, i, v - 1.0);
    }
    Ok(inv)
}

/// Pairwise distances between multiplier columns plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub d: Mat,
    /// Sectors whose multiplier column has zero variance; their correlations
    /// are 0 by convention, giving distance 1 to everything else.
    pub zero_variance: Vec<usize>,
}

/// Scaled Euclidean distance `sqrt(1 - corr)` between multiplier columns.
///
/// Correlation is Pearson's, over the n entries of each column. The range is
/// [0, sqrt(2)]: 0 for perfectly aligned profiles, sqrt(2) for perfectly
/// opposed ones. The diagonal is exactly 0.
pub fn distance_matrix(multipliers: &Mat) -> Result<DistanceMatrix> {
    let n = multipliers.rows();
    if multipliers.cols() != n {
        return Err(Error::Validation(format!(
            "multiplier matrix must be square, got {}x{}",
            n,
            multipliers.cols()
        )));
    }
    if n < 2 {
        return Err(Error::Validation(
            "distances need at least two sectors".into(),
        ));
    }
    // Column means and centered norms.
    let mut mean = vec![0.0; n];
    for j in 0..n {
        mean[j] = multipliers.col_sum(j) / n as f64;
    }
    let mut norm = vec![0.0; n];
    for j in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            let d = multipliers.get(i, j) - mean[j];
            acc += d * d;
        }
        norm[j] = acc.sqrt();
    }
    let zero_variance: Vec<usize> = (0..n).filter(|&j| norm[j] == 0.0).collect();

    let mut d = Mat::zeros(n, n);
    for j in 0..n {
        for k in (j + 1)..n {
            let corr = if norm[j] == 0.0 || norm[k] == 0.0 {
                0.0
            } else {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += (multipliers.get(i, j) - mean[j]) * (multipliers.get(i, k) - mean[k]);
                }
                (acc / (norm[j] * norm[k])).clamp(-1.0, 1.0)
            };
            let dist = (1.0 - corr).max(0.0).sqrt();
            d.set(j, k, dist);
            d.set(k, j, dist);
        }
    }
    Ok(DistanceMatrix { d, zero_variance })
}

/// Linkage rule for agglomerative clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

impl std::str::FromStr for Linkage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(Error::Validation(format!(
                "unknown linkage '{other}' (expected single, complete or average)"
            ))),
        }
    }
}

/// One agglomeration step. Cluster ids follow the usual convention: leaves
/// are 0..n-1, the cluster created by merge k gets id n+k. `a < b` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// A full agglomerative clustering of the sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
    /// Left-to-right order of the leaves under the final tree.
    pub leaf_order: Vec<usize>,
}

/// Agglomerative clustering with Lance-Williams updates.
///
/// At every step the closest active pair merges; exact ties break toward the
/// lexicographically smallest pair of cluster ids, so the result is fully
/// deterministic. The leaf order comes from walking the final tree with the
/// smaller child id first.
pub fn hierarchical_cluster(dist: &Mat, linkage: Linkage) -> Result<Dendrogram> {
    let n = dist.rows();
    if dist.cols() != n || n < 2 {
        return Err(Error::Validation(format!(
            "distance matrix must be square with at least 2 sectors, got {}x{}",
            n,
            dist.cols()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            let v = dist.get(i, j);
            if !v.is_finite() || v < 0.0 || (i == j && v != 0.0) {
                return Err(Error::Validation(format!(
                    "invalid distance {v} at ({i}, {j})"
                )));
            }
            if (v - dist.get(j, i)).abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "distance matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    // Active clusters in increasing id order; `d[x][y]` indexed by position
    // in `active`.
    #[derive(Clone)]
    struct Cluster {
        id: usize,
        size: usize,
    }
    let mut active: Vec<Cluster> = (0..n).map(|id| Cluster { id, size: 1 }).collect();
    let mut d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| dist.get(i, j)).collect())
        .collect();
    let mut children: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..(n - 1) {
        // Closest active pair; scanning ascending id order makes ties land
        // on the smallest (a, b).
        let (mut bi, mut bj, mut best) = (0usize, 1usize, f64::INFINITY);
        for i in 0..active.len() {
            for j in (i + 1)..active.len() {
                if d[i][j] < best {
                    best = d[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        let (a, b) = (active[bi].id, active[bj].id);
        let (sa, sb) = (active[bi].size as f64, active[bj].size as f64);
        let new_id = n + step;
        let new_size = active[bi].size + active[bj].size;
        merges.push(Merge {
            a,
            b,
            height: best,
            size: new_size,
        });
        children.push(Some((a, b)));

        // Lance-Williams distances from the merged cluster to the rest.
        let mut row: Vec<f64> = Vec::with_capacity(active.len() - 1);
        for k in 0..active.len() {
            if k == bi || k == bj {
                continue;
            }
            let (dak, dbk) = (d[bi][k], d[bj][k]);
            row.push(match linkage {
                Linkage::Single => dak.min(dbk),
                Linkage::Complete => dak.max(dbk),
                Linkage::Average => (sa * dak + sb * dbk) / (sa + sb),
            });
        }
        // Drop bj first (the larger index) so bi stays valid.
        active.remove(bj);
        active.remove(bi);
        for v in d.iter_mut() {
            v.remove(bj);
            v.remove(bi);
        }
        d.remove(bj);
        d.remove(bi);
        active.push(Cluster {
            id: new_id,
            size: new_size,
        });
        for (k, v) in d.iter_mut().enumerate() {
            v.push(row[k]);
        }
        row.push(0.0);
        d.push(row);
    }

    // Leaf order: depth-first walk, smaller child first.
    let mut leaf_order = Vec::with_capacity(n);
    let mut stack = vec![2 * n - 2];
    while let Some(id) = stack.pop() {
        match children[id] {
            None => leaf_order.push(id),
            Some((a, b)) => {
                stack.push(b);
                stack.push(a);
            }
        }
    }
    Ok(Dendrogram {
        linkage,
        merges,
        leaf_order,
    })
}

/// A fixed-width histogram plus summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// bin edges, length `counts.len() + 1`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
    pub n: usize,
}

/// Histogram of arbitrary values over `bins` equal-width bins spanning the
/// data range. A degenerate (constant) sample collapses to one spike bin
/// centered on the value.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() || bins == 0 {
        return Err(Error::Validation(
            "histogram needs at least one value and one bin".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("histogram values must be finite".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if lo == hi {
        return Ok(Histogram {
            edges: vec![lo - 0.5, lo + 0.5],
            counts: vec![values.len()],
            mean,
            n: values.len(),
        });
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram {
        edges,
        counts,
        mean,
        n: values.len(),
    })
}

/// Histogram of pairwise distance changes (`after - before`, upper triangle
/// only). Identical matrices give a single spike at 0.
pub fn distance_change_histogram(before: &Mat, after: &Mat, bins: usize) -> Result<Histogram> {
    let n = before.rows();
    if after.rows() != n || before.cols() != n || after.cols() != n {
        return Err(Error::Validation(
            "distance matrices must share one square shape".into(),
        ));
    }
    let mut diffs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            diffs.push(after.get(i, j) - before.get(i, j));
        }
    }
    histogram(&diffs, bins)
}
