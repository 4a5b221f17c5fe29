//! Kernel density estimation on the bounded square, with boundary
//! correction by mirror reflection, and the grid-transport distance
//! built on top of it.
//!
//! The kernel is a per-dimension Gaussian product, so a point's nine
//! copies (itself plus four edge and four corner mirrors) factorize into
//! three x-sources times three y-sources; each point costs two axis
//! sweeps and one rank-1 accumulation.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beosonic::{BeoCoord, DB_MAX, DB_MIN};
use crate::transport::{w1_exact, DiscreteMeasure, TransportError};

/// Default grid resolution; 1024 cells keeps exact transport on grid
/// measures comfortably fast.
pub const DEFAULT_RESOLUTION: usize = 32;

/// Grids coarser than this are useless for the square.
pub const MIN_RESOLUTION: usize = 8;

/// Cells carrying less mass than this are dropped before transport.
pub const CELL_DROP_TOL: f64 = 1e-12;

/// Bandwidth substituted for a dimension with zero sample spread, where
/// no data-driven bandwidth exists (e.g. a constant recommender's output).
pub const DEGENERATE_BANDWIDTH: f64 = 0.25;

/// Sample spread at or below this counts as zero for bandwidth flooring.
/// Identical points can leave cancellation noise around 1e-16 in the
/// sample standard deviation; a sub-nano-dB spread is equally degenerate.
const ZERO_SPREAD_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("no points supplied")]
    EmptyInput,
    #[error("need at least 2 points for a data-driven bandwidth, got {0}")]
    TooFewPoints(usize),
    #[error("zero spread along {axis}; no data-driven bandwidth exists")]
    ZeroSpread { axis: &'static str },
    #[error("invalid density configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Per-dimension kernel bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// h_i = sigma_i * n^(-1/6), from the data.
    Scott,
    /// Fixed (x, y) bandwidths in dB.
    Fixed(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KdeConfig {
    pub bandwidth: Bandwidth,
    /// Cells per axis; the grid is resolution x resolution.
    pub resolution: usize,
    /// Mirror the data across the domain boundary before smoothing.
    pub reflect: bool,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            bandwidth: Bandwidth::Scott,
            resolution: DEFAULT_RESOLUTION,
            reflect: true,
        }
    }
}

/// A probability mass function over the R x R grid of cell midpoints.
/// Row index follows y, column index follows x.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    resolution: usize,
    cell_prob: Vec<f64>, // row-major
}

impl GridDensity {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Row-major cell probabilities; they sum to 1.
    pub fn probs(&self) -> &[f64] {
        &self.cell_prob
    }

    pub fn prob(&self, row: usize, col: usize) -> f64 {
        self.cell_prob[row * self.resolution + col]
    }

    pub fn cell_width(&self) -> f64 {
        (DB_MAX - DB_MIN) / self.resolution as f64
    }

    pub fn cell_center(&self, row: usize, col: usize) -> BeoCoord {
        let d = self.cell_width();
        BeoCoord::new(
            DB_MIN + (col as f64 + 0.5) * d,
            DB_MIN + (row as f64 + 0.5) * d,
        )
        .expect("cell centers lie strictly inside the square")
    }

    /// The grid as a discrete measure: atoms at cell centers, cells below
    /// [`CELL_DROP_TOL`] dropped, weights renormalized.
    pub fn to_measure(&self) -> Result<DiscreteMeasure, DensityError> {
        let r = self.resolution;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for row in 0..r {
            for col in 0..r {
                let w = self.prob(row, col);
                if w >= CELL_DROP_TOL {
                    points.push(self.cell_center(row, col));
                    weights.push(w);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(DiscreteMeasure::new(points, weights)?)
    }

    /// Number of cells strictly greater than every existing 8-neighbor.
    /// Plateau cells tie with a neighbor and are not counted.
    pub fn count_local_maxima(&self) -> usize {
        let r = self.resolution as isize;
        let mut count = 0;
        for row in 0..r {
            for col in 0..r {
                let v = self.prob(row as usize, col as usize);
                let mut is_max = true;
                'nbrs: for dr in -1..=1 {
                    for dc in -1..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (nr, nc) = (row + dr, col + dc);
                        if nr < 0 || nr >= r || nc < 0 || nc >= r {
                            continue;
                        }
                        if self.prob(nr as usize, nc as usize) >= v {
                            is_max = false;
                            break 'nbrs;
                        }
                    }
                }
                if is_max {
                    count += 1;
                }
            }
        }
        count
    }

    /// Dumps the grid as `row,col,prob` CSV for plotting.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "row,col,prob")?;
        for row in 0..self.resolution {
            for col in 0..self.resolution {
                writeln!(out, "{},{},{}", row, col, self.prob(row, col))?;
            }
        }
        Ok(())
    }
}

/// Per-dimension Scott's rule: h_i = sigma_i * n^(-1/6), sample standard
/// deviation with the n-1 denominator.
pub fn scott_bandwidth(points: &[BeoCoord]) -> Result<(f64, f64), DensityError> {
    let n = points.len();
    if n < 2 {
        return Err(DensityError::TooFewPoints(n));
    }
    let (sx, sy) = sample_std(points);
    if sx == 0.0 {
        return Err(DensityError::ZeroSpread { axis: "x" });
    }
    if sy == 0.0 {
        return Err(DensityError::ZeroSpread { axis: "y" });
    }
    let factor = (n as f64).powf(-1.0 / 6.0);
    Ok((sx * factor, sy * factor))
}

fn sample_std(points: &[BeoCoord]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x()).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y()).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p.x() - mx).powi(2)).sum::<f64>() / (n - 1.0);
    let syy = points.iter().map(|p| (p.y() - my).powi(2)).sum::<f64>() / (n - 1.0);
    (sxx.sqrt(), syy.sqrt())
}

/// KDE over the grid honoring `cfg.reflect`. The continuous estimate is
/// evaluated at cell midpoints, truncated to the square, and renormalized
/// to a probability mass function.
pub fn grid_density(points: &[BeoCoord], cfg: &KdeConfig) -> Result<GridDensity, DensityError> {
    if points.is_empty() {
        return Err(DensityError::EmptyInput);
    }
    if cfg.resolution < MIN_RESOLUTION {
        return Err(DensityError::InvalidConfig(format!(
            "resolution {} below the minimum of {MIN_RESOLUTION}",
            cfg.resolution
        )));
    }
    let (hx, hy) = match cfg.bandwidth {
        Bandwidth::Scott => scott_bandwidth(points)?,
        Bandwidth::Fixed(hx, hy) => {
            if !(hx > 0.0 && hy > 0.0 && hx.is_finite() && hy.is_finite()) {
                return Err(DensityError::InvalidConfig(format!(
                    "bandwidths must be positive and finite, got ({hx}, {hy})"
                )));
            }
            (hx, hy)
        }
    };
    build_grid(points, hx, hy, cfg.resolution, cfg.reflect)
}

/// KDE with boundary reflection, regardless of `cfg.reflect`.
pub fn reflective_kde(points: &[BeoCoord], cfg: &KdeConfig) -> Result<GridDensity, DensityError> {
    grid_density(
        points,
        &KdeConfig {
            reflect: true,
            ..cfg.clone()
        },
    )
}

/// Plain truncated-and-renormalized KDE, regardless of `cfg.reflect`.
pub fn standard_kde(points: &[BeoCoord], cfg: &KdeConfig) -> Result<GridDensity, DensityError> {
    grid_density(
        points,
        &KdeConfig {
            reflect: false,
            ..cfg.clone()
        },
    )
}

fn build_grid(
    points: &[BeoCoord],
    hx: f64,
    hy: f64,
    resolution: usize,
    reflect: bool,
) -> Result<GridDensity, DensityError> {
    let r = resolution;
    let delta = (DB_MAX - DB_MIN) / r as f64;
    let centers: Vec<f64> = (0..r).map(|i| DB_MIN + (i as f64 + 0.5) * delta).collect();

    let mut grid = vec![0.0f64; r * r];
    let mut gx = vec![0.0f64; r];
    let mut gy = vec![0.0f64; r];
    for p in points {
        axis_kernel_sums(&mut gx, &centers, p.x(), hx, reflect);
        axis_kernel_sums(&mut gy, &centers, p.y(), hy, reflect);
        for (row, &ky) in gy.iter().enumerate() {
            let line = &mut grid[row * r..(row + 1) * r];
            for (cell, &kx) in line.iter_mut().zip(&gx) {
                *cell += ky * kx;
            }
        }
    }

    let total: f64 = grid.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(DensityError::InvalidConfig(format!(
            "kernel mass vanished on the grid (bandwidth ({hx}, {hy}) too small for \
             resolution {r})"
        )));
    }
    for cell in &mut grid {
        *cell /= total;
    }
    Ok(GridDensity {
        resolution: r,
        cell_prob: grid,
    })
}

/// 1D kernel sums at the cell centers for one source value, optionally
/// with its two mirror images. Normalization constants cancel in the
/// final renormalization and are omitted.
fn axis_kernel_sums(out: &mut [f64], centers: &[f64], v: f64, h: f64, reflect: bool) {
    let lo_mirror = 2.0 * DB_MIN - v;
    let hi_mirror = 2.0 * DB_MAX - v;
    for (o, &c) in out.iter_mut().zip(centers) {
        let mut s = gauss(c - v, h);
        if reflect {
            s += gauss(c - lo_mirror, h) + gauss(c - hi_mirror, h);
        }
        *o = s;
    }
}

#[inline]
fn gauss(d: f64, h: f64) -> f64 {
    (-0.5 * (d / h).powi(2)).exp()
}

/// Transport distance between the reflective KDE grids of two point sets.
///
/// Scott bandwidths are resolved per set; a dimension with zero spread
/// (all points identical along it) falls back to [`DEGENERATE_BANDWIDTH`]
/// so constant point sets remain comparable. Fixed bandwidths are used as
/// given. The `reflect` flag of `cfg` is ignored — this distance is
/// defined on boundary-corrected densities.
pub fn reflective_kantorovich(
    a: &[BeoCoord],
    b: &[BeoCoord],
    cfg: &KdeConfig,
) -> Result<f64, DensityError> {
    let ga = reflective_kde(a, &floored_config(a, cfg))?;
    let gb = reflective_kde(b, &floored_config(b, cfg))?;
    let mu = ga.to_measure()?;
    let nu = gb.to_measure()?;
    let (dist, _) = w1_exact(&mu, &nu)?;
    Ok(dist)
}

fn floored_config(points: &[BeoCoord], cfg: &KdeConfig) -> KdeConfig {
    let bandwidth = match cfg.bandwidth {
        Bandwidth::Fixed(hx, hy) => Bandwidth::Fixed(hx, hy),
        Bandwidth::Scott => {
            if points.len() < 2 {
                Bandwidth::Fixed(DEGENERATE_BANDWIDTH, DEGENERATE_BANDWIDTH)
            } else {
                let (sx, sy) = sample_std(points);
                let factor = (points.len() as f64).powf(-1.0 / 6.0);
                let floor = |s: f64| {
                    if s <= ZERO_SPREAD_TOL {
                        DEGENERATE_BANDWIDTH
                    } else {
                        s * factor
                    }
                };
                Bandwidth::Fixed(floor(sx), floor(sy))
            }
        }
    };
    KdeConfig {
        bandwidth,
        resolution: cfg.resolution,
        reflect: true,
    }
}
