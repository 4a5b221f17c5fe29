//! Optimal-transport distances between discrete measures on the EQ square.
//!
//! Three metrics with different cost/accuracy tradeoffs:
//!
//! * [`w1_exact`] — the exact Kantorovich-1 distance with Euclidean ground
//!   cost, solved on the transportation polytope by a network simplex.
//! * [`sinkhorn_divergence`] — debiased entropic regularization; positive
//!   definite, differentiable-friendly, approaches W1 as epsilon shrinks.
//! * [`sliced_w1`] — the average of seeded 1D projections; cheap in high
//!   atom counts.
//!
//! [`w1_assignment`] solves the equal-size uniform-weight special case with
//! an independent assignment algorithm; the two exact routes cross-check
//! each other in the test suite.

mod assignment;
mod simplex;
mod sinkhorn;
mod sliced;

pub use assignment::w1_assignment;
pub use sinkhorn::{sinkhorn_divergence, CostPower, SinkhornConfig};
pub use sliced::sliced_w1;

use crate::beosonic::BeoCoord;
use std::collections::BTreeMap;
use thiserror::Error;

/// Hard cap on atoms per side for the exact solver.
pub const MAX_ATOMS: usize = 10_000;

/// Tolerance on the total-mass invariant of a measure.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("points/weights length mismatch: {points} points vs {weights} weights")]
    LengthMismatch { points: usize, weights: usize },
    #[error("weight[{index}] = {value} is not a positive finite number")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}")]
    WeightSumInvalid { sum: f64 },
    #[error("{n} atoms exceed the {MAX_ATOMS}-atom limit")]
    TooManyAtoms { n: usize },
    #[error("assignment inputs must have equal non-zero length: {a} vs {b}")]
    SizeMismatch { a: usize, b: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sinkhorn did not converge within {iters} iterations (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },
    #[error("transportation problem is infeasible (residual artificial flow {0:e})")]
    Infeasible(f64),
    #[error("transportation problem is unbounded")]
    Unbounded,
    #[error("simplex pivot limit exceeded; solver is stalling")]
    PivotLimit,
}

/// A weighted point cloud on the square. Weights are strictly positive and
/// sum to 1 (within [`WEIGHT_SUM_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<BeoCoord>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<BeoCoord>, weights: Vec<f64>) -> Result<Self, TransportError> {
        if points.is_empty() {
            return Err(TransportError::EmptyMeasure);
        }
        if points.len() != weights.len() {
            return Err(TransportError::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        let mut sum = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(TransportError::InvalidWeight { index: i, value: w });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(TransportError::WeightSumInvalid { sum });
        }
        Ok(Self { points, weights })
    }

    /// Uniform weights over the given atoms.
    pub fn uniform(points: Vec<BeoCoord>) -> Result<Self, TransportError> {
        if points.is_empty() {
            return Err(TransportError::EmptyMeasure);
        }
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &[BeoCoord] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One cell of a transport plan: `mass` moved from atom `row` of the first
/// measure to atom `col` of the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanCell {
    pub row: usize,
    pub col: usize,
    pub mass: f64,
}

/// Sparse optimal coupling between two measures. Row sums reproduce the
/// first measure's weights and column sums the second's (within 1e-8).
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cells: Vec<PlanCell>,
}

impl TransportPlan {
    /// Sum of `mass * cost` over the plan for the given atom coordinates.
    pub fn total_cost(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        self.cells
            .iter()
            .map(|c| c.mass * mu.points()[c.row].dist(&nu.points()[c.col]))
            .sum()
    }

    /// Marginal sums (rows, cols) for feasibility checks.
    pub fn marginals(&self, n_rows: usize, n_cols: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rows = vec![0.0; n_rows];
        let mut cols = vec![0.0; n_cols];
        for c in &self.cells {
            rows[c.row] += c.mass;
            cols[c.col] += c.mass;
        }
        (rows, cols)
    }
}

/// Atoms at identical coordinates merged by weight summation, remembering
/// which original indices fused. Keeps the LP free of zero-distance columns
/// and lets the plan be expanded back to the caller's indexing.
struct Merged {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ws: Vec<f64>,
    groups: Vec<Vec<usize>>,
}

fn merge_atoms(m: &DiscreteMeasure) -> Merged {
    let mut index: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    let mut out = Merged {
        xs: Vec::new(),
        ys: Vec::new(),
        ws: Vec::new(),
        groups: Vec::new(),
    };
    for (i, (p, &w)) in m.points().iter().zip(m.weights()).enumerate() {
        let key = (p.x().to_bits(), p.y().to_bits());
        match index.get(&key) {
            Some(&g) => {
                out.ws[g] += w;
                out.groups[g].push(i);
            }
            None => {
                index.insert(key, out.xs.len());
                out.xs.push(p.x());
                out.ys.push(p.y());
                out.ws.push(w);
                out.groups.push(vec![i]);
            }
        }
    }
    out
}

/// Exact Kantorovich-1 distance between two measures, with the optimal plan.
///
/// Duplicate atoms are merged before solving and the plan is expanded back
/// proportionally, so the returned plan satisfies the caller's marginals.
///
/// # Errors
/// Rejects inputs above [`MAX_ATOMS`] atoms per side; propagates solver
/// failures (which cannot occur for measures satisfying the type invariants).
pub fn w1_exact(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(f64, TransportPlan), TransportError> {
    if mu.len() > MAX_ATOMS {
        return Err(TransportError::TooManyAtoms { n: mu.len() });
    }
    if nu.len() > MAX_ATOMS {
        return Err(TransportError::TooManyAtoms { n: nu.len() });
    }
    let a = merge_atoms(mu);
    let b = merge_atoms(nu);

    // One side a single point: the coupling is forced.
    if a.xs.len() == 1 || b.xs.len() == 1 {
        let mut dist = 0.0;
        for (ia, wa) in a.ws.iter().enumerate() {
            for (ib, wb) in b.ws.iter().enumerate() {
                let d = (a.xs[ia] - b.xs[ib]).hypot(a.ys[ia] - b.ys[ib]);
                dist += wa * wb * d;
            }
        }
        // product coupling: valid here and proportional by construction
        let mut cells = Vec::new();
        for (i, &wi) in mu.weights().iter().enumerate() {
            for (j, &wj) in nu.weights().iter().enumerate() {
                cells.push(PlanCell {
                    row: i,
                    col: j,
                    mass: wi * wj,
                });
            }
        }
        return Ok((dist, TransportPlan { cells }));
    }

    // Normalize away the ~1e-9 slack the type tolerates, then force the two
    // sides into exact float balance so the simplex sees a zero-sum supply.
    let wa_sum: f64 = a.ws.iter().sum();
    let wb_sum: f64 = b.ws.iter().sum();
    let wa: Vec<f64> = a.ws.iter().map(|w| w / wa_sum).collect();
    let mut wb: Vec<f64> = b.ws.iter().map(|w| w / wb_sum).collect();
    let last = wb.len() - 1;
    let head: f64 = wb[..last].iter().sum();
    let total_a: f64 = wa.iter().sum();
    wb[last] = total_a - head;
    if wb[last] <= 0.0 {
        // cannot happen for valid measures; guard against pathological input
        return Err(TransportError::WeightSumInvalid { sum: wb_sum });
    }

    let (cost, flows) = simplex::solve_transport(&a.xs, &a.ys, &wa, &b.xs, &b.ys, &wb)?;

    // expand merged plan cells back to original atom indices, splitting the
    // mass proportionally to the original weights inside each merged group
    let mut cells = Vec::with_capacity(flows.len());
    let wa_groups: Vec<f64> = a.ws.clone();
    let wb_groups: Vec<f64> = b.ws.clone();
    for (gi, gj, mass) in flows {
        for &i in &a.groups[gi] {
            let fi = mu.weights()[i] / wa_groups[gi];
            for &j in &b.groups[gj] {
                let fj = nu.weights()[j] / wb_groups[gj];
                let m = mass * fi * fj;
                if m > 0.0 {
                    cells.push(PlanCell {
                        row: i,
                        col: j,
                        mass: m,
                    });
                }
            }
        }
    }
    Ok((cost, TransportPlan { cells }))
}
