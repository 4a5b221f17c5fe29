//! Debiased Sinkhorn divergence with log-domain dual iterations.
//!
//! All updates run on the dual potentials directly — no kernel matrix is
//! materialized, so small epsilon cannot underflow anything. The target
//! epsilon is reached by annealing: a few warm-up phases at larger epsilon
//! move the potentials close to the fixed point before the final phase
//! polishes at the requested value.

use serde::{Deserialize, Serialize};

use super::{DiscreteMeasure, TransportError};
use crate::beosonic::BeoCoord;

/// Exponent applied to the Euclidean ground distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostPower {
    /// |x − y|: the divergence approximates the Kantorovich-1 distance.
    #[default]
    One,
    /// |x − y|²: the quadratic training-loss flavour.
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SinkhornConfig {
    /// Entropic regularization strength.
    pub epsilon: f64,
    /// Total budget of dual sweeps, warm-up phases included.
    pub max_iters: usize,
    /// Convergence threshold on the sup-norm change of the potentials.
    pub tolerance: f64,
    pub cost_power: CostPower,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: 0.05,
            max_iters: 10_000,
            tolerance: 1e-9,
            cost_power: CostPower::One,
        }
    }
}

impl SinkhornConfig {
    fn validate(&self) -> Result<(), TransportError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(TransportError::InvalidConfig(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(TransportError::InvalidConfig(format!(
                "tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        if self.max_iters == 0 {
            return Err(TransportError::InvalidConfig(
                "max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// S_eps(mu, nu) = OT_eps(mu, nu) − ½ OT_eps(mu, mu) − ½ OT_eps(nu, nu).
///
/// All three terms go through the same iteration, so for identical inputs
/// the debiasing cancels exactly and the result is 0 to the last bit.
pub fn sinkhorn_divergence(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &SinkhornConfig,
) -> Result<f64, TransportError> {
    cfg.validate()?;
    let cross = ot_eps(mu, nu, cfg)?;
    let self_mu = ot_eps(mu, mu, cfg)?;
    let self_nu = ot_eps(nu, nu, cfg)?;
    Ok(cross - 0.5 * self_mu - 0.5 * self_nu)
}

fn ground_cost(a: &BeoCoord, b: &BeoCoord, power: CostPower) -> f64 {
    let d = a.dist(b);
    match power {
        CostPower::One => d,
        CostPower::Two => d * d,
    }
}

/// Entropic transport cost at the dual fixed point: ⟨a, f⟩ + ⟨b, g⟩.
fn ot_eps(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &SinkhornConfig,
) -> Result<f64, TransportError> {
    let pa = mu.points();
    let wa = mu.weights();
    let pb = nu.points();
    let wb = nu.weights();
    let n = pa.len();
    let m = pb.len();
    let log_wa: Vec<f64> = wa.iter().map(|w| w.ln()).collect();
    let log_wb: Vec<f64> = wb.iter().map(|w| w.ln()).collect();

    // annealing schedule: halve from 1 down to the requested epsilon
    let mut schedule = Vec::new();
    let mut e = 1.0;
    while e > cfg.epsilon {
        schedule.push(e);
        e *= 0.5;
    }
    schedule.push(cfg.epsilon);

    const WARMUP_ITERS: usize = 100;

    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];
    let mut row = vec![0.0f64; n.max(m)];
    let mut used = 0usize;

    for (phase, &eps) in schedule.iter().enumerate() {
        let last_phase = phase + 1 == schedule.len();
        let budget = if last_phase {
            cfg.max_iters - used
        } else {
            WARMUP_ITERS.min(cfg.max_iters - used)
        };
        let mut residual = f64::INFINITY;
        let mut converged = false;
        for _ in 0..budget {
            used += 1;
            residual = 0.0f64;
            for i in 0..n {
                for j in 0..m {
                    row[j] = log_wb[j] + (g[j] - ground_cost(&pa[i], &pb[j], cfg.cost_power)) / eps;
                }
                let new_f = -eps * log_sum_exp(&row[..m]);
                residual = residual.max((new_f - f[i]).abs());
                f[i] = new_f;
            }
            for j in 0..m {
                for i in 0..n {
                    row[i] = log_wa[i] + (f[i] - ground_cost(&pa[i], &pb[j], cfg.cost_power)) / eps;
                }
                let new_g = -eps * log_sum_exp(&row[..n]);
                residual = residual.max((new_g - g[j]).abs());
                g[j] = new_g;
            }
            if residual < cfg.tolerance {
                converged = true;
                break;
            }
        }
        if last_phase && !converged {
            return Err(TransportError::NotConverged {
                iters: used,
                residual,
            });
        }
    }

    let mut value = 0.0;
    for i in 0..n {
        value += wa[i] * f[i];
    }
    for j in 0..m {
        value += wb[j] * g[j];
    }
    Ok(value)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() {
        return hi;
    }
    let sum: f64 = xs.iter().map(|&x| (x - hi).exp()).sum();
    hi + sum.ln()
}
