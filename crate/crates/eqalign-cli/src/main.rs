//! `eqalign` — one binary for the whole pipeline: validate a dataset, split
//! it, augment the train half, evaluate recommenders against the test half,
//! and compare finished runs into a statistical report.
//!
//! Exit codes: 0 success, 1 runtime failure (gateway, output writes),
//! 2 usage or validation failure. All outputs are deterministic for a given
//! (config, seed, cassette) and written atomically.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use eqalign::augment::{augment_prompts, AugmentConfig, SynonymDict};
use eqalign::beosonic::{frequency_response, render_curve, BeoCoord, CurveFormat, FreqGrid};
use eqalign::dataset::{load_dataset, prompt_stats, split_dataset, SplitSpec};
use eqalign::density::{reflective_kde, standard_kde, Bandwidth, KdeConfig, DEFAULT_RESOLUTION};
use eqalign::evalstats::{
    compare, emit_report, evaluate, EvalError, EvalRun, Metric, MetricConfig, ALPHA_LEVELS,
};
use eqalign::recommend::{
    build_index, load_cassette, template_inventory, verify_cassette, ExpertMapping, Gateway,
    HttpGateway, IclOptions, OracleReplay, Rag, RagQa, RandomGaussianBaseline, RecommendError,
    RecordingGateway, Recommender, ReplayGateway, StaticIcl, StaticPresetBaseline, StubGateway,
    Text2Beosonic,
};

#[derive(Parser)]
#[command(name = "eqalign", version, about = "Evaluate EQ-setting recommenders against listener data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a dataset file and print its statistics.
    Validate {
        dataset: PathBuf,
        /// Emit the statistics as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Split a dataset into train/val/test files.
    Split {
        dataset: PathBuf,
        #[arg(long, default_value_t = 60)]
        train: usize,
        #[arg(long, default_value_t = 30)]
        val: usize,
        #[arg(long, default_value_t = 30)]
        test: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Directory for train.json, val.json, test.json.
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Expand a training set with synonym variants and blurred labels.
    Augment {
        train: PathBuf,
        /// Synonym dictionary (JSON object: word -> [synonyms]).
        #[arg(long)]
        dict: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        factor: f64,
        /// Half-width of the label jitter, in dB.
        #[arg(long, default_value_t = 0.3)]
        blur: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the frequency-response curve for one coordinate.
    RenderEq {
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, default_value_t = 20.0)]
        f_min: f64,
        #[arg(long, default_value_t = 20_000.0)]
        f_max: f64,
        #[arg(long, default_value_t = 256)]
        points: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rasterize the response density of one dataset entry.
    Density {
        dataset: PathBuf,
        /// Entry id to rasterize.
        #[arg(long)]
        entry: String,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        /// "scott" or fixed "HX,HY" in dB.
        #[arg(long, default_value = "scott")]
        bandwidth: String,
        /// Plain (non-reflective) kernel density estimate.
        #[arg(long)]
        standard: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one recommender per a JSON run config.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Override the metric from the config file.
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
    },
    /// Compare finished runs (dirs with run.json, or run.json paths).
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Cassette utilities.
    Cassette {
        #[command(subcommand)]
        cmd: CassetteCmd,
    },
}

#[derive(Subcommand)]
enum CassetteCmd {
    /// Re-hash every record and report tampering.
    Verify { cassette: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "w1" => Ok(Metric::W1),
        "reflective-w1" => Ok(Metric::ReflectiveW1),
        "sinkhorn" => Ok(Metric::Sinkhorn),
        "sliced-w1" => Ok(Metric::SlicedW1),
        other => Err(format!(
            "unknown metric {other:?} (expected w1, reflective-w1, sinkhorn, sliced-w1)"
        )),
    }
}

// --- run config --------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    dataset: PathBuf,
    /// Optional split; recommenders that need training data use the train
    /// half and evaluation runs on the test half. Without it the whole
    /// dataset plays both roles (in-sample).
    #[serde(default)]
    split: Option<SplitSpec>,
    metric: Metric,
    #[serde(default)]
    metric_config: MetricConfig,
    recommender: RecommenderConfig,
    gateway: GatewayConfig,
    #[serde(default)]
    icl: IclConfig,
    #[serde(default = "default_n_samples")]
    n_samples: usize,
    seed: u64,
    out_dir: PathBuf,
}

fn default_n_samples() -> usize {
    11
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RecommenderConfig {
    OracleReplay,
    RandomGaussian {
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    StaticPreset,
    #[serde(rename = "text2beosonic")]
    Text2Beosonic,
    StaticIcl {
        #[serde(default = "default_examples")]
        n_examples: usize,
    },
    Rag {
        k: usize,
    },
    RagQa {
        k: usize,
    },
}

fn default_sigma() -> f64 {
    RandomGaussianBaseline::default().sigma
}

fn default_examples() -> usize {
    10
}

#[derive(Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
enum GatewayConfig {
    /// OpenAI-compatible endpoint from EQALIGN_BASE_URL / EQALIGN_API_KEY.
    Live,
    /// Live, with every exchange recorded to a new cassette.
    Record { cassette: PathBuf },
    /// Fully offline replay from a recorded cassette.
    Replay { cassette: PathBuf },
    /// Canned single reply; for plumbing tests.
    Stub {
        #[serde(default = "default_stub_reply")]
        reply: String,
    },
}

fn default_stub_reply() -> String {
    "[0, 0]".into()
}

/// Mirror of [`IclOptions`] with the same defaults, in config-file form.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IclConfig {
    model: String,
    embed_model: String,
    temperature: f64,
    max_tokens: u32,
    retries: usize,
}

impl Default for IclConfig {
    fn default() -> Self {
        let o = IclOptions::default();
        Self {
            model: o.model,
            embed_model: o.embed_model,
            temperature: o.temperature,
            max_tokens: o.max_tokens,
            retries: o.retries,
        }
    }
}

impl IclConfig {
    fn into_options(self) -> IclOptions {
        IclOptions {
            model: self.model,
            embed_model: self.embed_model,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            retries: self.retries,
        }
    }
}

// --- error plumbing ----------------------------------------------------------

enum CliError {
    /// Bad arguments, unreadable or invalid inputs. Exit 2.
    Usage(String),
    /// Failure while executing: gateway trouble, output writes. Exit 1.
    Runtime(String),
}

impl CliError {
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Construction-time recommender and gateway errors are usage errors unless
/// the gateway itself failed mid-flight.
fn recommend_err(e: RecommendError) -> CliError {
    match e {
        RecommendError::Gateway(g) => CliError::Runtime(g.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::TooManyErrors { .. } | EvalError::Io(_) => CliError::Runtime(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Validate { dataset, json } => cmd_validate(&dataset, json),
        Cmd::Split { dataset, train, val, test, seed, out_dir } => {
            cmd_split(&dataset, train, val, test, seed, &out_dir)
        }
        Cmd::Augment { train, dict, factor, blur, seed, out } => {
            cmd_augment(&train, &dict, factor, blur, seed, &out)
        }
        Cmd::RenderEq { x, y, format, f_min, f_max, points, out } => {
            cmd_render_eq(x, y, format, f_min, f_max, points, out.as_deref())
        }
        Cmd::Density { dataset, entry, resolution, bandwidth, standard, out } => {
            cmd_density(&dataset, &entry, resolution, &bandwidth, standard, out.as_deref())
        }
        Cmd::Eval { config, metric } => cmd_eval(&config, metric),
        Cmd::Compare { runs, out_dir } => cmd_compare(&runs, &out_dir),
        Cmd::Cassette { cmd: CassetteCmd::Verify { cassette } } => cmd_cassette_verify(&cassette),
    }
}

// --- subcommands ---------------------------------------------------------

fn cmd_validate(path: &Path, as_json: bool) -> Result<(), CliError> {
    let ds = load_dataset(path).map_err(usage)?;
    let stats = prompt_stats(&ds);
    if as_json {
        let mut out = serde_json::to_string_pretty(&stats).map_err(runtime)?;
        out.push('\n');
        print!("{out}");
    } else {
        println!("total prompts        {}", stats.total_prompts);
        println!("total annotations    {}", stats.total_annotations);
        println!("vocabulary size      {}", stats.vocab_size);
        println!("avg words per prompt {:.2}", stats.avg_words_per_prompt);
        println!(
            "generalized variance {:.2} min / {:.2} avg / {:.2} max",
            stats.gv_min, stats.gv_avg, stats.gv_max
        );
    }
    Ok(())
}

fn cmd_split(
    path: &Path,
    train: usize,
    val: usize,
    test: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    let ds = load_dataset(path).map_err(usage)?;
    let spec = SplitSpec { train_n: train, val_n: val, test_n: test, seed };
    let (tr, va, te) = split_dataset(&ds, &spec).map_err(usage)?;
    fs::create_dir_all(out_dir).map_err(runtime)?;
    for (name, part) in [("train.json", &tr), ("val.json", &va), ("test.json", &te)] {
        let dest = out_dir.join(name);
        atomic_write(&dest, part.to_json_string().as_bytes()).map_err(runtime)?;
        println!("{:5} {:3} entries -> {}", name.trim_end_matches(".json"), part.entries.len(), dest.display());
    }
    Ok(())
}

fn cmd_augment(
    train: &Path,
    dict: &Path,
    factor: f64,
    blur: f64,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let ds = load_dataset(train).map_err(usage)?;
    let dict = SynonymDict::load(dict).map_err(usage)?;
    let config = AugmentConfig { target_factor: factor, max_blur_db: blur, seed };
    let augmented = augment_prompts(&ds, &dict, &config).map_err(usage)?;
    atomic_write(out, augmented.to_json_string().as_bytes()).map_err(runtime)?;
    println!(
        "{} -> {} entries ({:.2}x) -> {}",
        ds.entries.len(),
        augmented.entries.len(),
        augmented.entries.len() as f64 / ds.entries.len() as f64,
        out.display()
    );
    Ok(())
}

fn cmd_render_eq(
    x: f64,
    y: f64,
    format: Format,
    f_min: f64,
    f_max: f64,
    points: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let coord = BeoCoord::new(x, y).map_err(usage)?;
    let grid = FreqGrid::new(f_min, f_max, points).map_err(usage)?;
    let curve = frequency_response(&coord, &grid);
    let bytes = render_curve(
        &curve,
        match format {
            Format::Csv => CurveFormat::Csv,
            Format::Svg => CurveFormat::Svg,
        },
    );
    emit(out, &bytes)
}

fn cmd_density(
    dataset: &Path,
    entry_id: &str,
    resolution: usize,
    bandwidth: &str,
    standard: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let ds = load_dataset(dataset).map_err(usage)?;
    let entry = ds
        .entries
        .iter()
        .find(|e| e.id == entry_id)
        .ok_or_else(|| CliError::Usage(format!("no entry with id {entry_id:?} in {}", dataset.display())))?;
    let cfg = KdeConfig {
        bandwidth: parse_bandwidth(bandwidth)?,
        resolution,
        reflect: !standard,
    };
    let grid = if standard {
        standard_kde(entry.responses.points(), &cfg)
    } else {
        reflective_kde(entry.responses.points(), &cfg)
    }
    .map_err(usage)?;
    let mut bytes = Vec::new();
    grid.write_csv(&mut bytes).map_err(runtime)?;
    emit(out, &bytes)
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, CliError> {
    if s == "scott" {
        return Ok(Bandwidth::Scott);
    }
    let parse = |t: &str| t.trim().parse::<f64>().ok();
    if let Some((hx, hy)) = s.split_once(',') {
        if let (Some(hx), Some(hy)) = (parse(hx), parse(hy)) {
            return Ok(Bandwidth::Fixed(hx, hy));
        }
    }
    Err(CliError::Usage(format!(
        "bandwidth must be \"scott\" or \"HX,HY\", got {s:?}"
    )))
}

fn cmd_eval(config_path: &Path, metric_override: Option<Metric>) -> Result<(), CliError> {
    let config_bytes = fs::read(config_path).map_err(usage)?;
    let config: RunConfig = serde_json::from_slice(&config_bytes).map_err(usage)?;
    let metric = metric_override.unwrap_or(config.metric);

    let dataset_bytes = fs::read(&config.dataset).map_err(usage)?;
    let ds = load_dataset(&config.dataset).map_err(usage)?;
    let (train, test) = match &config.split {
        Some(spec) => {
            let (tr, _va, te) = split_dataset(&ds, spec).map_err(usage)?;
            (tr, te)
        }
        None => (ds.clone(), ds),
    };

    // Owns whichever gateway the config selects; the recommenders below
    // borrow it for the whole run.
    enum Holder {
        Live(HttpGateway),
        Replay(ReplayGateway),
        Stub(StubGateway),
    }
    let holder = match &config.gateway {
        GatewayConfig::Live | GatewayConfig::Record { .. } => {
            Holder::Live(HttpGateway::from_env().map_err(usage)?)
        }
        GatewayConfig::Replay { cassette } => {
            Holder::Replay(ReplayGateway::from_path(cassette).map_err(usage)?)
        }
        GatewayConfig::Stub { reply } => Holder::Stub(StubGateway::canned(reply)),
    };
    let base: &dyn Gateway = match &holder {
        Holder::Live(g) => g,
        Holder::Replay(g) => g,
        Holder::Stub(g) => g,
    };
    let recording = matches!(config.gateway, GatewayConfig::Record { .. })
        .then(|| RecordingGateway::new(base, Vec::new()));
    let gw: &dyn Gateway = recording.as_ref().map(|r| r as &dyn Gateway).unwrap_or(base);

    let options = config.icl.into_options();
    let recommender: Box<dyn Recommender + '_> = match &config.recommender {
        RecommenderConfig::OracleReplay => {
            Box::new(OracleReplay::from_dataset(&test).map_err(recommend_err)?)
        }
        RecommenderConfig::RandomGaussian { sigma } => {
            Box::new(RandomGaussianBaseline { sigma: *sigma })
        }
        RecommenderConfig::StaticPreset => {
            Box::new(StaticPresetBaseline::from_train(&train).map_err(recommend_err)?)
        }
        RecommenderConfig::Text2Beosonic => Box::new(Text2Beosonic {
            mapping: ExpertMapping::builtin(),
            gateway: gw,
            options,
        }),
        RecommenderConfig::StaticIcl { n_examples } => Box::new(
            StaticIcl::from_train(&train, *n_examples, gw, options).map_err(recommend_err)?,
        ),
        RecommenderConfig::Rag { k } => Box::new(Rag {
            index: build_index(&train, gw, &options.embed_model).map_err(recommend_err)?,
            k: *k,
            gateway: gw,
            options,
        }),
        RecommenderConfig::RagQa { k } => Box::new(RagQa {
            index: build_index(&train, gw, &options.embed_model).map_err(recommend_err)?,
            k: *k,
            gateway: gw,
            options,
        }),
    };

    let run = evaluate(
        recommender.as_ref(),
        &test,
        metric,
        &config.metric_config,
        config.n_samples,
        config.seed,
    )
    .map_err(eval_err)?;
    drop(recommender);

    fs::create_dir_all(&config.out_dir).map_err(runtime)?;

    let mut run_json = serde_json::to_string_pretty(&run).map_err(runtime)?;
    run_json.push('\n');
    atomic_write(&config.out_dir.join("run.json"), run_json.as_bytes()).map_err(runtime)?;

    let mut distances = String::from("prompt_id,distance\n");
    for p in &run.per_prompt {
        distances.push_str(&format!("{},{}\n", p.prompt_id, p.distance));
    }
    atomic_write(&config.out_dir.join("distances.csv"), distances.as_bytes()).map_err(runtime)?;

    // Finalize the recorded cassette, if any, then hash whatever cassette
    // this run depended on or produced.
    let cassette_info: Option<(PathBuf, String)> = match &config.gateway {
        GatewayConfig::Record { cassette } => {
            let bytes = recording.expect("record mode builds a recorder").into_sink();
            atomic_write(cassette, &bytes).map_err(runtime)?;
            Some((cassette.clone(), sha256_hex(&bytes)))
        }
        GatewayConfig::Replay { cassette } => {
            let bytes = fs::read(cassette).map_err(runtime)?;
            Some((cassette.clone(), sha256_hex(&bytes)))
        }
        _ => None,
    };

    let templates: BTreeMap<&str, String> = template_inventory()
        .iter()
        .map(|(name, contents)| (*name, sha256_hex(contents.as_bytes())))
        .collect();
    let manifest = json!({
        "command": "eval",
        "config": config_path,
        "config_sha256": sha256_hex(&config_bytes),
        "dataset": config.dataset,
        "dataset_sha256": sha256_hex(&dataset_bytes),
        "cassette": cassette_info.as_ref().map(|(p, _)| p),
        "cassette_sha256": cassette_info.as_ref().map(|(_, h)| h),
        "templates_sha256": templates,
        "metric": metric.name(),
        "recommender": run.recommender_name,
        "n_samples": config.n_samples,
        "seed": config.seed,
        "outputs": ["distances.csv", "run.json"],
    });
    let mut manifest_json = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    manifest_json.push('\n');
    atomic_write(&config.out_dir.join("manifest.json"), manifest_json.as_bytes())
        .map_err(runtime)?;

    println!("recommender {}", run.recommender_name);
    println!("metric      {}", metric.name());
    println!("prompts     {} scored, {} failed", run.per_prompt.len(), run.errors.len());
    if !run.per_prompt.is_empty() {
        let mut d = run.distances();
        d.sort_by(f64::total_cmp);
        println!("median      {}", d[d.len() / 2]);
    }
    for name in ["run.json", "distances.csv", "manifest.json"] {
        println!("wrote {}", config.out_dir.join(name).display());
    }
    if let Some((path, _)) = &cassette_info {
        if matches!(config.gateway, GatewayConfig::Record { .. }) {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_compare(run_paths: &[PathBuf], out_dir: &Path) -> Result<(), CliError> {
    let runs: Vec<EvalRun> = run_paths
        .iter()
        .map(|p| {
            let path = if p.is_dir() { p.join("run.json") } else { p.clone() };
            let bytes = fs::read(&path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        })
        .collect::<Result<_, _>>()?;

    let report = compare(&runs, &ALPHA_LEVELS).map_err(eval_err)?;
    let files = emit_report(&report, &runs, out_dir).map_err(eval_err)?;

    println!("kruskal-wallis H {}, p {}", report.kw_h, report.kw_p);
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let bracket = report
                .brackets
                .iter()
                .find(|b| (b.a, b.b) == (i, j))
                .map(|b| format!("  [p <= {}]", b.level))
                .unwrap_or_default();
            println!(
                "{} vs {}: p {}{}",
                report.run_names[i], report.run_names[j], report.dunn_p[i][j], bracket
            );
        }
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_cassette_verify(path: &Path) -> Result<(), CliError> {
    let records = load_cassette(path).map_err(usage)?;
    let bad = verify_cassette(&records);
    if bad.is_empty() {
        println!("ok: {} records verified", records.len());
        Ok(())
    } else {
        for i in &bad {
            eprintln!("record {i}: stored hash does not match its request");
        }
        Err(CliError::Usage(format!(
            "{} of {} records failed verification",
            bad.len(),
            records.len()
        )))
    }
}

// --- helpers ---------------------------------------------------------------

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            atomic_write(path, bytes).map_err(runtime)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => io::stdout().write_all(bytes).map_err(runtime),
    }
}

fn atomic_write(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir
        .unwrap_or_else(|| Path::new("."))
        .join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
