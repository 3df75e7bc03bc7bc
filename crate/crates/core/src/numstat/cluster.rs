use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::hypothesis::pearson_corr;
use crate::{Error, Result};

/// One agglomeration step. Clusters are named by their smallest member
/// index; the merged cluster keeps the name `left` (`left < right`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster id per variable; ids are numbered by smallest member.
    pub labels: Vec<usize>,
    pub n_clusters: usize,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `1 − |corr|` between the columns of `x`.
pub fn correlation_distance(x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let p = x.ncols();
    let mut d = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in (i + 1)..p {
            let r = pearson_corr(x.column(i), x.column(j))
                .map_err(|_| Error::ConstantInput(format!("variable {i} or {j}")))?;
            let v = 1.0 - r.abs();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    if p == 1 && x.column(0).iter().all(|v| *v == x[[0, 0]]) {
        return Err(Error::ConstantInput("variable 0".into()));
    }
    Ok(d)
}

/// Average-linkage (UPGMA) agglomeration of a symmetric distance matrix.
/// Returns all `p − 1` merges; ties go to the lexicographically smallest pair.
pub fn average_linkage(distances: ArrayView2<f64>) -> Vec<Merge> {
    let p = distances.nrows();
    let mut d = distances.to_owned();
    let mut size = vec![1usize; p];
    let mut active = vec![true; p];
    let mut merges = Vec::with_capacity(p.saturating_sub(1));
    for _ in 1..p {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..p {
            if !active[a] {
                continue;
            }
            for b in (a + 1)..p {
                if !active[b] {
                    continue;
                }
                let v = d[[a, b]];
                if best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((a, b, v));
                }
            }
        }
        let (a, b, dist) = best.expect("at least two active clusters");
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for k in 0..p {
            if active[k] && k != a && k != b {
                let v = (sa * d[[k, a]] + sb * d[[k, b]]) / (sa + sb);
                d[[k, a]] = v;
                d[[a, k]] = v;
            }
        }
        active[b] = false;
        size[a] += size[b];
        merges.push(Merge {
            left: a,
            right: b,
            distance: dist,
            size: size[a],
        });
    }
    merges
}

/// Applies the first `p − n_clusters` merges.
pub fn cut_tree(p: usize, merges: &[Merge], n_clusters: usize) -> ClusterAssignment {
    let mut owner: Vec<usize> = (0..p).collect();
    for m in merges.iter().take(p - n_clusters) {
        for o in owner.iter_mut() {
            if *o == m.right {
                *o = m.left;
            }
        }
    }
    let mut roots: Vec<usize> = owner.clone();
    roots.sort_unstable();
    roots.dedup();
    let labels = owner
        .iter()
        .map(|o| roots.binary_search(o).expect("root present"))
        .collect();
    ClusterAssignment {
        labels,
        n_clusters: roots.len(),
    }
}

/// Clusters the columns of `x` by `1 − |corr|` with average linkage.
pub fn hierarchical_cluster(x: ArrayView2<f64>, n_clusters: usize) -> Result<ClusterAssignment> {
    let p = x.ncols();
    if n_clusters == 0 || n_clusters > p {
        return Err(Error::config(
            "n_clusters",
            format!("{n_clusters} not in 1..={p}"),
        ));
    }
    let d = correlation_distance(x)?;
    let merges = average_linkage(d.view());
    Ok(cut_tree(p, &merges, n_clusters))
}
