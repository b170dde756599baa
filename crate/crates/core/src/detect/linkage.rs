//! Single-linkage agglomerative clustering on a dense distance matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Merges the closest pair of clusters (minimum pairwise distance) until `k`
/// remain. Ties go to the lowest `(i, j)` cluster pair. Labels are numbered
/// in order of first appearance.
pub fn single_linkage_cluster(dist: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    let n = dist.nrows();
    if dist.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: dist.ncols() });
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("number of clusters must lie in 1..={n}, got {k}")));
    }
    // Cluster `c` is represented by its lowest member index; `owner[i]` maps
    // points to representatives.
    let mut owner: Vec<usize> = (0..n).collect();
    let mut active = vec![true; n];
    let mut link = dist.clone();
    let mut remaining = n;
    while remaining > k {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let v = link[(i, j)];
                if best.map_or(true, |(b, _, _)| v < b) {
                    best = Some((v, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("at least two active clusters");
        for m in 0..n {
            if active[m] && m != i && m != j {
                let v = link[(i, m)].min(link[(j, m)]);
                link[(i, m)] = v;
                link[(m, i)] = v;
            }
        }
        active[j] = false;
        for o in owner.iter_mut() {
            if *o == j {
                *o = i;
            }
        }
        remaining -= 1;
    }
    let mut relabel = vec![usize::MAX; n];
    let mut next = 0;
    Ok(owner
        .iter()
        .map(|&o| {
            if relabel[o] == usize::MAX {
                relabel[o] = next;
                next += 1;
            }
            relabel[o]
        })
        .collect())
}
