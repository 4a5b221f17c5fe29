//! File emission for comparisons: three CSVs and a notched-boxplot SVG.
//!
//! Rendering is deliberately dependency-free and pure: pixel coordinates
//! are fixed-precision functions of the input numbers and nothing else,
//! so re-emitting the same report is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::stats::{boxplot_summary, BoxplotSummary};
use super::{EvalError, EvalRun, TestReport};
use crate::util::atomic_write;

const PLOT_HEIGHT: f64 = 360.0;
/// Horizontal room per run: box, whisker caps, and breathing space.
const BOX_SLOT: f64 = 140.0;
const BOX_WIDTH: f64 = 72.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 56.0;
/// Vertical distance between stacked significance brackets.
const BRACKET_STEP: f64 = 24.0;

/// Color for brackets at the stricter significance level.
const STRICT_BRACKET_COLOR: &str = "#d62728";
/// Adjusted p at or below this is drawn in [`STRICT_BRACKET_COLOR`].
const STRICT_LEVEL: f64 = 0.01;

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn distances_csv(runs: &[EvalRun]) -> String {
    let mut out = String::from("run,prompt_id,distance\n");
    for run in runs {
        for p in &run.per_prompt {
            let _ = writeln!(
                out,
                "{},{},{}",
                csv_field(&run.recommender_name),
                csv_field(&p.prompt_id),
                p.distance
            );
        }
    }
    out
}

fn summary_csv(runs: &[EvalRun], summaries: &[BoxplotSummary]) -> String {
    let mut out =
        String::from("run,n,median,q1,q3,whisker_lo,whisker_hi,notch_lo,notch_hi\n");
    for (run, s) in runs.iter().zip(summaries) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&run.recommender_name),
            s.n,
            s.median,
            s.q1,
            s.q3,
            s.whisker_lo,
            s.whisker_hi,
            s.notch_lo,
            s.notch_hi
        );
    }
    out
}

/// Long format: one row per statistic. `a`/`b` are empty for the global
/// Kruskal–Wallis rows and name the run pair for the pairwise rows.
fn tests_csv(report: &TestReport) -> String {
    let mut out = String::from("kind,a,b,value\n");
    let _ = writeln!(out, "kw_h,,,{}", report.kw_h);
    let _ = writeln!(out, "kw_p,,,{}", report.kw_p);
    let k = report.run_names.len();
    for i in 0..k {
        for j in (i + 1)..k {
            let _ = writeln!(
                out,
                "dunn_p,{},{},{}",
                csv_field(&report.run_names[i]),
                csv_field(&report.run_names[j]),
                report.dunn_p[i][j]
            );
        }
    }
    for b in &report.brackets {
        let _ = writeln!(
            out,
            "bracket,{},{},{}",
            csv_field(&report.run_names[b.a]),
            csv_field(&report.run_names[b.b]),
            b.level
        );
    }
    out
}

fn boxplot_svg(report: &TestReport, runs: &[EvalRun], summaries: &[BoxplotSummary]) -> String {
    // Everything drawable participates in the value range: whiskers,
    // notches (which may extend past the box on small n), and outliers.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut outliers: Vec<Vec<f64>> = Vec::with_capacity(runs.len());
    for (run, s) in runs.iter().zip(summaries) {
        lo = lo.min(s.whisker_lo).min(s.notch_lo);
        hi = hi.max(s.whisker_hi).max(s.notch_hi);
        let mut outs: Vec<f64> = run
            .per_prompt
            .iter()
            .map(|p| p.distance)
            .filter(|&d| d < s.whisker_lo || d > s.whisker_hi)
            .collect();
        outs.sort_by(|a, b| a.total_cmp(b));
        for &o in &outs {
            lo = lo.min(o);
            hi = hi.max(o);
        }
        outliers.push(outs);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    let bracket_space = report.brackets.len() as f64 * BRACKET_STEP;
    let plot_top = MARGIN_TOP + bracket_space;
    let width = MARGIN_LEFT + runs.len() as f64 * BOX_SLOT + MARGIN_RIGHT;
    let height = plot_top + PLOT_HEIGHT + MARGIN_BOTTOM;
    let y = |v: f64| plot_top + PLOT_HEIGHT * (hi - v) / (hi - lo);
    let cx = |i: usize| MARGIN_LEFT + BOX_SLOT * (i as f64 + 0.5);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>");

    // y axis with 5 ticks
    let axis_x = MARGIN_LEFT - 10.0;
    let _ = writeln!(
        svg,
        "<line x1=\"{axis_x:.2}\" y1=\"{:.2}\" x2=\"{axis_x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        y(hi),
        y(lo)
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let ty = y(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{ty:.2}\" x2=\"{axis_x:.2}\" y2=\"{ty:.2}\" stroke=\"black\"/>",
            axis_x - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>",
            axis_x - 9.0,
            ty + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text transform=\"rotate(-90 16 {mid:.2})\" x=\"16\" y=\"{mid:.2}\" \
         text-anchor=\"middle\">{label} distance</text>",
        mid = plot_top + PLOT_HEIGHT / 2.0,
        label = xml_escape(report.metric.name())
    );

    for (i, s) in summaries.iter().enumerate() {
        let c = cx(i);
        let w2 = BOX_WIDTH / 2.0;
        let w4 = BOX_WIDTH / 4.0;
        let (xl, xr) = (c - w2, c + w2);
        let (xnl, xnr) = (c - w4, c + w4);

        // whiskers with caps
        for (from, to) in [(s.q3, s.whisker_hi), (s.q1, s.whisker_lo)] {
            let _ = writeln!(
                svg,
                "<line x1=\"{c:.2}\" y1=\"{:.2}\" x2=\"{c:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>",
                y(from),
                y(to)
            );
            let _ = writeln!(
                svg,
                "<line x1=\"{x1:.2}\" y1=\"{yc:.2}\" x2=\"{x2:.2}\" y2=\"{yc:.2}\" stroke=\"#333333\"/>",
                x1 = c - w4,
                x2 = c + w4,
                yc = y(to)
            );
        }

        // notched box: the sides pinch to half width at the median
        let points = [
            (xl, y(s.q1)),
            (xl, y(s.notch_lo)),
            (xnl, y(s.median)),
            (xl, y(s.notch_hi)),
            (xl, y(s.q3)),
            (xr, y(s.q3)),
            (xr, y(s.notch_hi)),
            (xnr, y(s.median)),
            (xr, y(s.notch_lo)),
            (xr, y(s.q1)),
        ];
        let _ = write!(svg, "<polygon points=\"");
        for (k, (px, py)) in points.iter().enumerate() {
            let sep = if k == 0 { "" } else { " " };
            let _ = write!(svg, "{sep}{px:.2},{py:.2}");
        }
        let _ = writeln!(svg, "\" fill=\"#d0d7e5\" stroke=\"#333333\"/>");
        let _ = writeln!(
            svg,
            "<line x1=\"{xnl:.2}\" y1=\"{m:.2}\" x2=\"{xnr:.2}\" y2=\"{m:.2}\" \
             stroke=\"#333333\" stroke-width=\"2\"/>",
            m = y(s.median)
        );

        for &o in &outliers[i] {
            let _ = writeln!(
                svg,
                "<circle cx=\"{c:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"none\" stroke=\"#333333\"/>",
                y(o)
            );
        }

        let _ = writeln!(
            svg,
            "<text x=\"{c:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            plot_top + PLOT_HEIGHT + 24.0,
            xml_escape(&report.run_names[i])
        );
    }

    // significance brackets, stacked above the plot area
    for (bi, b) in report.brackets.iter().enumerate() {
        let yb = MARGIN_TOP + bi as f64 * BRACKET_STEP + 8.0;
        let color = if b.level <= STRICT_LEVEL {
            STRICT_BRACKET_COLOR
        } else {
            "black"
        };
        let (xa, xb) = (cx(b.a), cx(b.b));
        let _ = writeln!(
            svg,
            "<path d=\"M {xa:.2} {:.2} L {xa:.2} {yb:.2} L {xb:.2} {yb:.2} L {xb:.2} {:.2}\" \
             fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            yb + 6.0,
            yb + 6.0
        );
    }

    svg.push_str("</svg>\n");
    svg
}

/// Write `distances.csv`, `summary.csv`, `tests.csv`, and `boxplot.svg`
/// into `out_dir` (created if missing). Files land atomically and the
/// bytes are a pure function of the inputs. Returns the paths written.
pub fn emit_report(
    report: &TestReport,
    runs: &[EvalRun],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, EvalError> {
    if runs.len() != report.run_names.len() {
        return Err(EvalError::MismatchedRuns(format!(
            "report covers {} runs but {} were supplied",
            report.run_names.len(),
            runs.len()
        )));
    }
    for (run, name) in runs.iter().zip(&report.run_names) {
        if &run.recommender_name != name {
            return Err(EvalError::MismatchedRuns(format!(
                "report names run '{name}' where '{}' was supplied",
                run.recommender_name
            )));
        }
    }
    let summaries: Vec<BoxplotSummary> = runs
        .iter()
        .map(|r| boxplot_summary(&r.distances()))
        .collect::<Result<_, _>>()?;

    fs::create_dir_all(out_dir)?;
    let files = [
        ("distances.csv", distances_csv(runs)),
        ("summary.csv", summary_csv(runs, &summaries)),
        ("tests.csv", tests_csv(report)),
        ("boxplot.svg", boxplot_svg(report, runs, &summaries)),
    ];
    let mut paths = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = out_dir.join(name);
        atomic_write(&path, contents.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}
