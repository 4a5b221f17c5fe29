//! The Beosonic parameter space: a bounded square of two EQ weights and the
//! gain curves they induce across the audible band.
//!
//! A coordinate `(x, y)` combines a smile-shaped component (bass and treble
//! up, mids down for positive `x`) with a spectral tilt (bass down, treble up
//! for positive `y`). Both weights live in [-6, 6] dB.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Serialize, Serializer};
use std::fmt;
use thiserror::Error;

/// Lower bound of both EQ weights, in dB.
pub const DB_MIN: f64 = -6.0;
/// Upper bound of both EQ weights, in dB.
pub const DB_MAX: f64 = 6.0;

#[derive(Debug, Error)]
pub enum BeosonicError {
    #[error("coordinate component is not finite: ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("coordinate out of range: ({0}, {1}) lies outside [{DB_MIN}, {DB_MAX}]^2")]
    OutOfRange(f64, f64),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
}

/// A point in the EQ square: `x` weighs the smile curve, `y` the spectral
/// tilt. Construction enforces finiteness and the [-6, 6] dB bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeoCoord {
    x: f64,
    y: f64,
}

impl BeoCoord {
    /// Builds a coordinate, rejecting non-finite or out-of-range components.
    pub fn new(x: f64, y: f64) -> Result<Self, BeosonicError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(BeosonicError::NonFinite(x, y));
        }
        if !(DB_MIN..=DB_MAX).contains(&x) || !(DB_MIN..=DB_MAX).contains(&y) {
            return Err(BeosonicError::OutOfRange(x, y));
        }
        Ok(Self { x, y })
    }

    /// Builds a coordinate by clamping each component into [-6, 6].
    /// Non-finite input is still an error; there is no sensible clamp for it.
    pub fn clamped(x: f64, y: f64) -> Result<Self, BeosonicError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(BeosonicError::NonFinite(x, y));
        }
        Ok(Self {
            x: x.clamp(DB_MIN, DB_MAX),
            y: y.clamp(DB_MIN, DB_MAX),
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Euclidean distance to another coordinate.
    pub fn dist(&self, other: &BeoCoord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

// Coordinates serialize as bare `[x, y]` pairs to match the dataset schema.
impl Serialize for BeoCoord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(2)?;
        tup.serialize_element(&self.x)?;
        tup.serialize_element(&self.y)?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for BeoCoord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairVisitor;
        impl<'de> Visitor<'de> for PairVisitor {
            type Value = BeoCoord;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [x, y] pair of finite numbers in [-6, 6]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<BeoCoord, A::Error> {
                let x: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let y: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                BeoCoord::new(x, y).map_err(de::Error::custom)
            }
        }
        deserializer.deserialize_tuple(2, PairVisitor)
    }
}

/// Logarithmically spaced frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    f_min: f64,
    f_max: f64,
    n_points: usize,
}

impl FreqGrid {
    pub fn new(f_min: f64, f_max: f64, n_points: usize) -> Result<Self, BeosonicError> {
        if !(f_min.is_finite() && f_max.is_finite()) || f_min <= 0.0 {
            return Err(BeosonicError::InvalidGrid(format!(
                "f_min must be positive and finite, got {f_min}"
            )));
        }
        if f_max <= f_min {
            return Err(BeosonicError::InvalidGrid(format!(
                "f_max ({f_max}) must exceed f_min ({f_min})"
            )));
        }
        if n_points < 2 {
            return Err(BeosonicError::InvalidGrid(format!(
                "grid needs at least 2 points, got {n_points}"
            )));
        }
        Ok(Self {
            f_min,
            f_max,
            n_points,
        })
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// The grid frequencies, strictly increasing, log-spaced between the
    /// endpoints (both included).
    pub fn freqs(&self) -> Vec<f64> {
        let ln_lo = self.f_min.ln();
        let ln_hi = self.f_max.ln();
        let step = (ln_hi - ln_lo) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| (ln_lo + step * i as f64).exp())
            .collect()
    }
}

impl Default for FreqGrid {
    /// 20 Hz to 20 kHz, 256 log-spaced points.
    fn default() -> Self {
        Self {
            f_min: 20.0,
            f_max: 20_000.0,
            n_points: 256,
        }
    }
}

/// A sampled gain curve over a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    pub freqs: Vec<f64>,
    pub gains_db: Vec<f64>,
}

/// Output formats for [`render_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFormat {
    Csv,
    Svg,
}

/// Normalized log-frequency position of `f` within the grid, in [0, 1].
fn log_pos(f: f64, grid: &FreqGrid) -> f64 {
    (f.ln() - grid.f_min.ln()) / (grid.f_max.ln() - grid.f_min.ln())
}

/// Synthesizes the gain curve for a coordinate.
///
/// With u the normalized log-frequency, the gain is
/// `x * cos(2*pi*u) + y * (2u - 1)`: the cosine term is the smile shape
/// (bass/treble boost, mid cut at positive x), the linear term is the
/// spectral tilt (treble boost at positive y). Each component contributes at
/// most +/-6 dB, so the sum stays within +/-12 dB.
pub fn frequency_response(coord: &BeoCoord, grid: &FreqGrid) -> GainCurve {
    let freqs = grid.freqs();
    let gains_db = freqs
        .iter()
        .map(|&f| {
            let u = log_pos(f, grid);
            coord.x() * (2.0 * std::f64::consts::PI * u).cos() + coord.y() * (2.0 * u - 1.0)
        })
        .collect();
    GainCurve { freqs, gains_db }
}

/// Renders a gain curve as CSV (`freq_hz,gain_db`) or as a standalone SVG
/// line plot. Both outputs are deterministic byte-for-byte for a given curve.
pub fn render_curve(curve: &GainCurve, format: CurveFormat) -> Vec<u8> {
    match format {
        CurveFormat::Csv => render_csv(curve).into_bytes(),
        CurveFormat::Svg => render_svg(curve).into_bytes(),
    }
}

fn render_csv(curve: &GainCurve) -> String {
    let mut out = String::from("freq_hz,gain_db\n");
    for (f, g) in curve.freqs.iter().zip(&curve.gains_db) {
        out.push_str(&format!("{f},{g}\n"));
    }
    out
}

/// Fixed-size plot; x is log-frequency, y spans the +/-12 dB envelope.
fn render_svg(curve: &GainCurve) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const ML: f64 = 56.0; // left margin, leaves room for dB labels
    const MR: f64 = 16.0;
    const MT: f64 = 16.0;
    const MB: f64 = 40.0;
    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;

    let f_lo = curve.freqs.first().copied().unwrap_or(20.0);
    let f_hi = curve.freqs.last().copied().unwrap_or(20_000.0);
    let ln_lo = f_lo.ln();
    let ln_hi = f_hi.ln();
    let x_of = |f: f64| ML + (f.ln() - ln_lo) / (ln_hi - ln_lo) * plot_w;
    let y_of = |g: f64| MT + (12.0 - g) / 24.0 * plot_h;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));

    // horizontal grid lines every 6 dB
    for k in -2..=2 {
        let g = 6.0 * k as f64;
        let y = y_of(g);
        let color = if k == 0 { "#888888" } else { "#dddddd" };
        s.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"1\"/>\n",
            ML,
            ML + plot_w,
        ));
        s.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\" fill=\"#444444\">{g} dB</text>\n",
            ML - 6.0,
            y + 4.0,
        ));
    }

    // vertical grid lines at decade-ish marks that fall inside the band
    for &f in &[20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0, 5000.0, 10000.0, 20000.0] {
        if f < f_lo * 0.999 || f > f_hi * 1.001 {
            continue;
        }
        let x = x_of(f.clamp(f_lo, f_hi));
        s.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MT,
            MT + plot_h,
        ));
        let label = if f >= 1000.0 {
            format!("{}k", f / 1000.0)
        } else {
            format!("{f}")
        };
        s.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\" fill=\"#444444\">{label}</text>\n",
            MT + plot_h + 16.0,
        ));
    }

    // the curve itself
    let pts: Vec<String> = curve
        .freqs
        .iter()
        .zip(&curve.gains_db)
        .map(|(&f, &g)| format!("{:.2},{:.2}", x_of(f), y_of(g)))
        .collect();
    s.push_str(&format!(
        "  <polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"{}\"/>\n",
        pts.join(" ")
    ));

    s.push_str(&format!(
        "  <rect x=\"{ML:.2}\" y=\"{MT:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" \
         fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n"
    ));
    s.push_str("</svg>\n");
    s
}
