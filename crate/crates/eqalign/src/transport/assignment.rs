//! Optimal assignment between equal-size point lists by shortest augmenting
//! paths with dual potentials (Jonker–Volgenant). Independent of the network
//! simplex in `simplex`, so the two can cross-check each other.

use super::TransportError;
use crate::beosonic::BeoCoord;

/// Average Euclidean matching cost between `a` and `b` under the optimal
/// permutation. Equals the Kantorovich-1 distance between the uniform
/// measures on `a` and `b` when all points are distinct.
pub fn w1_assignment(a: &[BeoCoord], b: &[BeoCoord]) -> Result<f64, TransportError> {
    let n = a.len();
    if n == 0 || n != b.len() {
        return Err(TransportError::SizeMismatch { a: n, b: b.len() });
    }

    let cost = |i: usize, j: usize| a[i].dist(&b[j]);

    // Column-indexed state; column n is a virtual unmatched column that each
    // augmenting path starts from.
    let mut u = vec![0.0f64; n + 1]; // row potentials (indexed by row)
    let mut v = vec![0.0f64; n + 1]; // column potentials
    let mut row_of = vec![usize::MAX; n + 1]; // row matched to each column
    let mut way = vec![0usize; n + 1]; // previous column on the path

    for i in 0..n {
        row_of[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == usize::MAX {
                break;
            }
        }
        // flip matched edges back along the augmenting path
        while j0 != n {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
        }
    }

    let mut total = 0.0;
    for (j, &i) in row_of.iter().take(n).enumerate() {
        total += cost(i, j);
    }
    Ok(total / n as f64)
}
