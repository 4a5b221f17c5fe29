//! Sliced approximation of the Kantorovich-1 distance: average the 1D
//! transport cost of the two measures projected onto random unit directions.
//! In 1D the optimal coupling is the monotone (quantile) one, so each slice
//! is a sort plus a single merge-style sweep.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DiscreteMeasure, TransportError};

/// Mean 1D transport distance over `n_projections` directions drawn
/// uniformly on the circle from a seeded generator.
pub fn sliced_w1(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    n_projections: usize,
    seed: u64,
) -> Result<f64, TransportError> {
    if n_projections == 0 {
        return Err(TransportError::InvalidConfig(
            "n_projections must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut proj_a: Vec<(f64, f64)> = Vec::with_capacity(mu.len());
    let mut proj_b: Vec<(f64, f64)> = Vec::with_capacity(nu.len());

    let mut total = 0.0;
    for _ in 0..n_projections {
        let phi = rng.random_range(0.0..TAU);
        let (ty, tx) = phi.sin_cos();

        proj_a.clear();
        proj_a.extend(
            mu.points()
                .iter()
                .zip(mu.weights())
                .map(|(p, &w)| (tx * p.x() + ty * p.y(), w)),
        );
        proj_b.clear();
        proj_b.extend(
            nu.points()
                .iter()
                .zip(nu.weights())
                .map(|(p, &w)| (tx * p.x() + ty * p.y(), w)),
        );
        proj_a.sort_by(|a, b| a.0.total_cmp(&b.0));
        proj_b.sort_by(|a, b| a.0.total_cmp(&b.0));

        total += quantile_coupling_cost(&proj_a, &proj_b);
    }
    Ok(total / n_projections as f64)
}

/// W1 between two sorted weighted 1D point lists: walk both CDFs in
/// lockstep, always moving the smallest remaining mass.
fn quantile_coupling_cost(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut cost = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let mut rem_a = a[0].1;
    let mut rem_b = b[0].1;
    loop {
        let mass = rem_a.min(rem_b);
        cost += mass * (a[i].0 - b[j].0).abs();
        rem_a -= mass;
        rem_b -= mass;
        if rem_a <= 0.0 {
            i += 1;
            if i == a.len() {
                break;
            }
            rem_a = a[i].1;
        }
        if rem_b <= 0.0 {
            j += 1;
            if j == b.len() {
                break;
            }
            rem_b = b[j].1;
        }
    }
    cost
}
