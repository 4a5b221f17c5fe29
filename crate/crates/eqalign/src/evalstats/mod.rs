//! Recommender evaluation: per-prompt distance collection, nonparametric
//! group comparison, and report emission.
//!
//! [`evaluate`] runs one recommender over a test set and produces an
//! [`EvalRun`] — one distance per prompt under a chosen metric.
//! [`compare`] puts several runs side by side with a Kruskal–Wallis test
//! and Dunn–Bonferroni pairwise follow-ups, and [`emit_report`] renders
//! the whole thing to CSV files and a notched boxplot.

mod report;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beosonic::BeoCoord;
use crate::dataset::Dataset;
use crate::density::{reflective_kantorovich, KdeConfig};
use crate::recommend::Recommender;
use crate::transport::{
    sinkhorn_divergence, sliced_w1, w1_exact, DiscreteMeasure, SinkhornConfig,
};
use crate::util::derive_seed;

pub use report::emit_report;
pub use stats::{
    boxplot_summary, dunn_posthoc, kruskal_wallis, kruskal_wallis_with, BoxplotSummary,
    Correction, PValueMethod,
};

/// Distances below this are treated as numerically impossible and the
/// prompt is recorded as errored rather than kept.
pub const DISTANCE_FLOOR: f64 = -1e-6;

/// Default significance levels for bracket annotation, strongest last.
pub const ALPHA_LEVELS: [f64; 2] = [0.05, 0.01];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test dataset has no entries")]
    EmptyTest,
    #[error("invalid evaluation configuration: {0}")]
    InvalidConfig(String),
    #[error("{errored} of {total} prompts failed, over the 20% error budget")]
    TooManyErrors { errored: usize, total: usize },
    #[error("bad statistical input: {0}")]
    BadInput(String),
    #[error("runs are not comparable: {0}")]
    MismatchedRuns(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which distance separates a recommender's samples from the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Exact Kantorovich-1 between the two empirical measures.
    W1,
    /// Transport between boundary-corrected KDE grids.
    ReflectiveW1,
    /// Debiased entropic divergence.
    Sinkhorn,
    /// Projection-averaged 1D transport.
    SlicedW1,
}

impl Metric {
    /// The kebab-case name used in files and on the CLI.
    pub fn name(self) -> &'static str {
        match self {
            Metric::W1 => "w1",
            Metric::ReflectiveW1 => "reflective-w1",
            Metric::Sinkhorn => "sinkhorn",
            Metric::SlicedW1 => "sliced-w1",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Numeric knobs for every metric; only the selected metric's section is
/// consulted. Serialized into run manifests so results are auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub sinkhorn: SinkhornConfig,
    pub kde: KdeConfig,
    /// Projection count for the sliced metric.
    pub sliced_projections: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            sinkhorn: SinkhornConfig::default(),
            kde: KdeConfig::default(),
            sliced_projections: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDistance {
    pub prompt_id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptError {
    pub prompt_id: String,
    pub message: String,
}

/// One recommender × one metric over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub recommender_name: String,
    pub metric: Metric,
    /// Coordinates sampled per prompt; recorded because comparisons are
    /// only meaningful when it is known.
    pub n_samples: usize,
    pub seed: u64,
    pub config: MetricConfig,
    pub per_prompt: Vec<PromptDistance>,
    /// Prompts that produced no distance, with the reason.
    pub errors: Vec<PromptError>,
}

impl EvalRun {
    /// The distance vector in per-prompt order.
    pub fn distances(&self) -> Vec<f64> {
        self.per_prompt.iter().map(|p| p.distance).collect()
    }
}

fn prompt_distance(
    metric: Metric,
    config: &MetricConfig,
    predicted: &[BeoCoord],
    truth: &[BeoCoord],
    metric_seed: u64,
) -> Result<f64, String> {
    if metric == Metric::ReflectiveW1 {
        return reflective_kantorovich(predicted, truth, &config.kde).map_err(|e| e.to_string());
    }
    let mu = DiscreteMeasure::uniform(predicted.to_vec()).map_err(|e| e.to_string())?;
    let nu = DiscreteMeasure::uniform(truth.to_vec()).map_err(|e| e.to_string())?;
    match metric {
        Metric::W1 => w1_exact(&mu, &nu).map(|(d, _)| d).map_err(|e| e.to_string()),
        Metric::Sinkhorn => {
            sinkhorn_divergence(&mu, &nu, &config.sinkhorn).map_err(|e| e.to_string())
        }
        Metric::SlicedW1 => {
            sliced_w1(&mu, &nu, config.sliced_projections, metric_seed).map_err(|e| e.to_string())
        }
        Metric::ReflectiveW1 => unreachable!("handled above"),
    }
}

/// Score one recommender over every test prompt.
///
/// Each prompt gets its own seed derived from the run seed and the prompt
/// id, so results do not depend on evaluation order or on which other
/// prompts are present. Recommender and metric failures are recorded per
/// prompt; the run only fails once more than 20% of prompts are lost.
pub fn evaluate(
    rec: &dyn Recommender,
    test: &Dataset,
    metric: Metric,
    config: &MetricConfig,
    n_samples: usize,
    seed: u64,
) -> Result<EvalRun, EvalError> {
    if test.entries.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    if n_samples == 0 {
        return Err(EvalError::InvalidConfig("n_samples must be at least 1".into()));
    }
    if metric == Metric::SlicedW1 && config.sliced_projections == 0 {
        return Err(EvalError::InvalidConfig(
            "sliced_projections must be at least 1".into(),
        ));
    }

    let mut per_prompt = Vec::with_capacity(test.entries.len());
    let mut errors = Vec::new();
    for entry in &test.entries {
        let prompt_seed = derive_seed(seed, &entry.id);
        let mut fail = |message: String| {
            errors.push(PromptError {
                prompt_id: entry.id.clone(),
                message,
            });
        };
        match rec.recommend(&entry.prompt, n_samples, prompt_seed) {
            Err(e) => fail(e.to_string()),
            Ok(predicted) => {
                let metric_seed = derive_seed(prompt_seed, "metric");
                match prompt_distance(
                    metric,
                    config,
                    &predicted,
                    entry.responses.points(),
                    metric_seed,
                ) {
                    Ok(d) if d >= DISTANCE_FLOOR => per_prompt.push(PromptDistance {
                        prompt_id: entry.id.clone(),
                        distance: d,
                    }),
                    Ok(d) => fail(format!("distance {d} is below the {DISTANCE_FLOOR} floor")),
                    Err(message) => fail(message),
                }
            }
        }
    }

    let total = test.entries.len();
    if errors.len() * 5 > total {
        return Err(EvalError::TooManyErrors {
            errored: errors.len(),
            total,
        });
    }
    Ok(EvalRun {
        recommender_name: rec.name().to_string(),
        metric,
        n_samples,
        seed,
        config: config.clone(),
        per_prompt,
        errors,
    })
}

/// A pairwise significance annotation: runs `a` and `b` (indices into the
/// compared list) differ at adjusted p ≤ `level`, where `level` is the
/// strictest passed level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub a: usize,
    pub b: usize,
    pub level: f64,
}

/// Outcome of comparing several runs. `dunn_p` is symmetric with a NaN
/// diagonal, which is also why this type has no serialized form — the
/// numbers land in `tests.csv` instead.
#[derive(Debug, Clone)]
pub struct TestReport {
    pub run_names: Vec<String>,
    pub metric: Metric,
    pub kw_h: f64,
    pub kw_p: f64,
    pub dunn_p: Vec<Vec<f64>>,
    pub brackets: Vec<Bracket>,
}

/// Kruskal–Wallis across the runs' distance vectors, then Dunn–Bonferroni
/// pairwise tests. Runs must cover identical prompt sets under the same
/// metric. A bracket is emitted per pair at the strictest level its
/// adjusted p clears.
pub fn compare(runs: &[EvalRun], alpha_levels: &[f64]) -> Result<TestReport, EvalError> {
    if runs.len() < 2 {
        return Err(EvalError::MismatchedRuns(format!(
            "need at least 2 runs, got {}",
            runs.len()
        )));
    }
    if let Some(a) = alpha_levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(EvalError::InvalidConfig(format!(
            "significance level {a} is outside (0, 1)"
        )));
    }

    fn prompt_set(run: &EvalRun) -> Vec<&str> {
        let mut ids: Vec<&str> = run.per_prompt.iter().map(|p| p.prompt_id.as_str()).collect();
        ids.sort_unstable();
        ids
    }
    let first_set = prompt_set(&runs[0]);
    for run in &runs[1..] {
        if run.metric != runs[0].metric {
            return Err(EvalError::MismatchedRuns(format!(
                "'{}' uses metric {} but '{}' uses {}",
                runs[0].recommender_name, runs[0].metric, run.recommender_name, run.metric
            )));
        }
        if prompt_set(run) != first_set {
            return Err(EvalError::MismatchedRuns(format!(
                "'{}' and '{}' cover different prompt sets",
                runs[0].recommender_name, run.recommender_name
            )));
        }
    }

    let groups: Vec<Vec<f64>> = runs.iter().map(EvalRun::distances).collect();
    let (kw_h, kw_p) = kruskal_wallis(&groups)?;
    let dunn_p = dunn_posthoc(&groups, Correction::Bonferroni)?;

    let mut brackets = Vec::new();
    for (i, row) in dunn_p.iter().enumerate() {
        for (j, &p) in row.iter().enumerate().skip(i + 1) {
            let passed = alpha_levels
                .iter()
                .copied()
                .filter(|&a| p <= a)
                .fold(f64::INFINITY, f64::min);
            if passed.is_finite() {
                brackets.push(Bracket {
                    a: i,
                    b: j,
                    level: passed,
                });
            }
        }
    }

    Ok(TestReport {
        run_names: runs.iter().map(|r| r.recommender_name.clone()).collect(),
        metric: runs[0].metric,
        kw_h,
        kw_p,
        dunn_p,
        brackets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, PromptEntry, ResponseSet};
    use crate::dataset::AudioType;
    use crate::recommend::RecommendError;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn pt(x: f64, y: f64) -> BeoCoord {
        BeoCoord::new(x, y).unwrap()
    }

    fn tiny_dataset(n: usize, truth: &[BeoCoord]) -> Dataset {
        let entries = (0..n)
            .map(|i| PromptEntry {
                id: format!("p{i:02}"),
                prompt: format!("prompt number {i}"),
                audio_type: AudioType::Music1,
                responses: ResponseSet::new(truth.to_vec()).unwrap(),
            })
            .collect();
        Dataset {
            metadata: BTreeMap::new(),
            entries,
        }
    }

    /// Always answers with the same fixed points.
    struct Constant(Vec<BeoCoord>);

    impl Recommender for Constant {
        fn name(&self) -> &str {
            "constant"
        }
        fn recommend(
            &self,
            _prompt: &str,
            n_samples: usize,
            _seed: u64,
        ) -> Result<Vec<BeoCoord>, RecommendError> {
            Ok((0..n_samples).map(|i| self.0[i % self.0.len()]).collect())
        }
    }

    /// Fails on prompts whose id ends in an odd digit.
    struct FailsOnOdd;

    impl Recommender for FailsOnOdd {
        fn name(&self) -> &str {
            "fails-on-odd"
        }
        fn recommend(
            &self,
            prompt: &str,
            n_samples: usize,
            _seed: u64,
        ) -> Result<Vec<BeoCoord>, RecommendError> {
            let odd = prompt
                .chars()
                .last()
                .and_then(|c| c.to_digit(10))
                .is_some_and(|d| d % 2 == 1);
            if odd {
                Err(RecommendError::InvalidConfig("odd prompt".into()))
            } else {
                Ok(vec![pt(0.0, 0.0); n_samples])
            }
        }
    }

    #[test]
    fn constant_offset_gives_the_plain_distance() {
        // every predicted point (0,0), every truth point (3,4) → W1 = 5
        let data = tiny_dataset(4, &[pt(3.0, 4.0), pt(3.0, 4.0)]);
        let run = evaluate(
            &Constant(vec![pt(0.0, 0.0)]),
            &data,
            Metric::W1,
            &MetricConfig::default(),
            11,
            9,
        )
        .unwrap();
        assert_eq!(run.per_prompt.len(), 4);
        assert!(run.errors.is_empty());
        for p in &run.per_prompt {
            assert_abs_diff_eq!(p.distance, 5.0, epsilon = 1e-9);
        }
        assert_eq!(run.recommender_name, "constant");
        assert_eq!(run.n_samples, 11);
    }

    #[test]
    fn matching_prediction_gives_zero() {
        let truth = [pt(-2.0, 1.0), pt(3.0, -3.0)];
        let data = tiny_dataset(3, &truth);
        let run = evaluate(
            &Constant(truth.to_vec()),
            &data,
            Metric::W1,
            &MetricConfig::default(),
            2,
            9,
        )
        .unwrap();
        for p in &run.per_prompt {
            assert_abs_diff_eq!(p.distance, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn error_budget_is_twenty_percent() {
        // 10 prompts, 5 odd → 50% errors: over budget
        let data = tiny_dataset(10, &[pt(0.0, 0.0), pt(1.0, 0.0)]);
        match evaluate(
            &FailsOnOdd,
            &data,
            Metric::W1,
            &MetricConfig::default(),
            3,
            1,
        ) {
            Err(EvalError::TooManyErrors { errored, total }) => {
                assert_eq!((errored, total), (5, 10));
            }
            other => panic!("expected TooManyErrors, got {other:?}"),
        }

        // 1 failure in 5 prompts is exactly 20%: allowed, recorded
        let entries: Vec<PromptEntry> = (0..5)
            .map(|i| PromptEntry {
                id: format!("q{i}"),
                // only one prompt ends in an odd digit
                prompt: format!("prompt {}", if i == 0 { 1 } else { 2 * i }),
                audio_type: AudioType::Music1,
                responses: ResponseSet::new(vec![pt(1.0, 1.0), pt(-1.0, 0.0)]).unwrap(),
            })
            .collect();
        let data = Dataset {
            metadata: BTreeMap::new(),
            entries,
        };
        let run = evaluate(
            &FailsOnOdd,
            &data,
            Metric::W1,
            &MetricConfig::default(),
            3,
            1,
        )
        .unwrap();
        assert_eq!(run.errors.len(), 1);
        assert_eq!(run.per_prompt.len(), 4);
        assert_eq!(run.errors[0].prompt_id, "q0");
    }

    #[test]
    fn rejects_empty_and_misconfigured_runs() {
        let empty = Dataset {
            metadata: BTreeMap::new(),
            entries: vec![],
        };
        let rec = Constant(vec![pt(0.0, 0.0)]);
        assert!(matches!(
            evaluate(&rec, &empty, Metric::W1, &MetricConfig::default(), 1, 0),
            Err(EvalError::EmptyTest)
        ));

        let data = tiny_dataset(2, &[pt(0.0, 0.0), pt(1.0, 0.0)]);
        assert!(matches!(
            evaluate(&rec, &data, Metric::W1, &MetricConfig::default(), 0, 0),
            Err(EvalError::InvalidConfig(_))
        ));
        let cfg = MetricConfig {
            sliced_projections: 0,
            ..MetricConfig::default()
        };
        assert!(matches!(
            evaluate(&rec, &data, Metric::SlicedW1, &cfg, 1, 0),
            Err(EvalError::InvalidConfig(_))
        ));
    }

    #[test]
    fn evaluation_is_deterministic_per_seed() {
        use crate::recommend::RandomGaussianBaseline;
        let data = tiny_dataset(4, &[pt(1.0, -1.0), pt(2.0, 0.5)]);
        let rec = RandomGaussianBaseline::default();
        let cfg = MetricConfig::default();
        let a = evaluate(&rec, &data, Metric::SlicedW1, &cfg, 5, 42).unwrap();
        let b = evaluate(&rec, &data, Metric::SlicedW1, &cfg, 5, 42).unwrap();
        let c = evaluate(&rec, &data, Metric::SlicedW1, &cfg, 5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.distances(), c.distances());
    }

    fn run_with(name: &str, metric: Metric, distances: &[f64]) -> EvalRun {
        EvalRun {
            recommender_name: name.into(),
            metric,
            n_samples: 11,
            seed: 0,
            config: MetricConfig::default(),
            per_prompt: distances
                .iter()
                .enumerate()
                .map(|(i, &d)| PromptDistance {
                    prompt_id: format!("p{i:02}"),
                    distance: d,
                })
                .collect(),
            errors: vec![],
        }
    }

    #[test]
    fn comparing_a_run_with_itself_yields_no_brackets() {
        let d: Vec<f64> = (0..12).map(|i| 1.0 + 0.1 * i as f64).collect();
        let a = run_with("a", Metric::W1, &d);
        let b = run_with("b", Metric::W1, &d);
        let report = compare(&[a, b], &ALPHA_LEVELS).unwrap();
        assert!(report.brackets.is_empty());
        assert_eq!(report.kw_p, 1.0);
        assert_eq!(report.run_names, vec!["a", "b"]);
    }

    #[test]
    fn separated_runs_get_the_strictest_bracket() {
        let lo: Vec<f64> = (0..15).map(|i| 0.01 * i as f64).collect();
        let hi: Vec<f64> = (0..15).map(|i| 10.0 + 0.01 * i as f64).collect();
        let report = compare(
            &[run_with("lo", Metric::W1, &lo), run_with("hi", Metric::W1, &hi)],
            &ALPHA_LEVELS,
        )
        .unwrap();
        assert_eq!(report.brackets.len(), 1);
        let b = report.brackets[0];
        assert_eq!((b.a, b.b), (0, 1));
        assert_eq!(b.level, 0.01);
        assert!(report.dunn_p[0][1] <= 0.01);
        assert!(report.dunn_p[0][0].is_nan());
    }

    #[test]
    fn three_runs_give_three_pairwise_cells() {
        let mk = |base: f64| -> Vec<f64> { (0..10).map(|i| base + 0.05 * i as f64).collect() };
        let runs = [
            run_with("a", Metric::W1, &mk(0.0)),
            run_with("b", Metric::W1, &mk(0.3)),
            run_with("c", Metric::W1, &mk(8.0)),
        ];
        let report = compare(&runs, &ALPHA_LEVELS).unwrap();
        let mut cells = 0;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert!(report.dunn_p[i][j].is_nan());
                } else {
                    assert!((0.0..=1.0).contains(&report.dunn_p[i][j]));
                    cells += 1;
                }
            }
        }
        assert_eq!(cells, 6); // 3 unordered pairs, stored symmetrically
    }

    #[test]
    fn mismatched_runs_are_rejected() {
        let a = run_with("a", Metric::W1, &[1.0, 2.0, 3.0]);
        let mut b = run_with("b", Metric::W1, &[1.0, 2.0, 3.0]);
        b.per_prompt[2].prompt_id = "other".into();
        assert!(matches!(
            compare(&[a.clone(), b], &ALPHA_LEVELS),
            Err(EvalError::MismatchedRuns(_))
        ));

        let c = run_with("c", Metric::Sinkhorn, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            compare(&[a.clone(), c], &ALPHA_LEVELS),
            Err(EvalError::MismatchedRuns(_))
        ));

        assert!(matches!(
            compare(&[a], &ALPHA_LEVELS),
            Err(EvalError::MismatchedRuns(_))
        ));
    }

    #[test]
    fn metric_names_round_trip_through_serde() {
        for (metric, name) in [
            (Metric::W1, "\"w1\""),
            (Metric::ReflectiveW1, "\"reflective-w1\""),
            (Metric::Sinkhorn, "\"sinkhorn\""),
            (Metric::SlicedW1, "\"sliced-w1\""),
        ] {
            assert_eq!(serde_json::to_string(&metric).unwrap(), name);
            let back: Metric = serde_json::from_str(name).unwrap();
            assert_eq!(back, metric);
        }
    }

    #[test]
    fn runs_survive_a_serde_round_trip() {
        let run = run_with("a", Metric::ReflectiveW1, &[0.5, 1.5]);
        let json = serde_json::to_string(&run).unwrap();
        let back: EvalRun = serde_json::from_str(&json).unwrap();
        assert_eq!(back, run);
    }
}
