//! Prompt/response datasets: loading, validation, deterministic splitting,
//! and the summary statistics used to sanity-check a corpus.
//!
//! The on-disk format is JSON:
//! `{"metadata": {...}, "entries": [{"id", "prompt", "audio_type", "responses": [[x,y],...]}]}`
//! with coordinates in [-6, 6] and audio types serialized as "music1",
//! "music2", "movies1", "movies2", "nature_noise", "audiobooks" or
//! "other:<name>".

use crate::beosonic::BeoCoord;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("entry {index} ({id}): {message}")]
    InvalidEntry {
        index: usize,
        id: String,
        message: String,
    },
    #[error("duplicate id {id:?} (entries {first} and {second})")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },
    #[error("empty dataset")]
    Empty,
    #[error("split sizes {requested} exceed dataset size {available}")]
    SplitTooLarge { requested: usize, available: usize },
    #[error("response set needs at least 2 points, got {0}")]
    TooFewResponses(usize),
}

/// Source material category for a prompt.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum AudioType {
    Music1,
    Music2,
    Movies1,
    Movies2,
    NatureNoise,
    Audiobooks,
    Other(String),
}

impl AudioType {
    pub fn parse(s: &str) -> Self {
        match s {
            "music1" => AudioType::Music1,
            "music2" => AudioType::Music2,
            "movies1" => AudioType::Movies1,
            "movies2" => AudioType::Movies2,
            "nature_noise" => AudioType::NatureNoise,
            "audiobooks" => AudioType::Audiobooks,
            other => {
                if let Some(name) = other.strip_prefix("other:") {
                    AudioType::Other(name.to_string())
                } else {
                    // unknown bare tags round-trip as "other:<tag>"
                    AudioType::Other(other.to_string())
                }
            }
        }
    }
}

impl fmt::Display for AudioType {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            AudioType::Music1 => f.write_str("music1"),
            AudioType::Music2 => f.write_str("music2"),
            AudioType::Movies1 => f.write_str("movies1"),
            AudioType::Movies2 => f.write_str("movies2"),
            AudioType::NatureNoise => f.write_str("nature_noise"),
            AudioType::Audiobooks => f.write_str("audiobooks"),
            AudioType::Other(name) => write!(f, "other:{name}"),
        }
    }
}

impl Serialize for AudioType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AudioType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(AudioType::parse(&s))
    }
}

/// The empirical distribution of listener settings for one prompt: one
/// coordinate per annotator, at least two in total.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ResponseSet {
    points: Vec<BeoCoord>,
}

impl ResponseSet {
    pub fn new(points: Vec<BeoCoord>) -> Result<Self, DatasetError> {
        if points.len() < 2 {
            return Err(DatasetError::TooFewResponses(points.len()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[BeoCoord] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl<'de> Deserialize<'de> for ResponseSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let points = Vec::<BeoCoord>::deserialize(deserializer)?;
        ResponseSet::new(points).map_err(serde::de::Error::custom)
    }
}

/// One prompt with its annotated response distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEntry {
    pub id: String,
    pub prompt: String,
    pub audio_type: AudioType,
    pub responses: ResponseSet,
}

/// A full corpus: entries plus free-form string metadata (source, version,
/// license, recorded fixture statistics, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    pub entries: Vec<PromptEntry>,
}

impl Dataset {
    /// Validates the structural invariants: non-empty, unique ids, non-empty
    /// prompts. Coordinate bounds and response-set sizes are enforced by the
    /// component types during deserialization or construction.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.entries.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.prompt.is_empty() {
                return Err(DatasetError::InvalidEntry {
                    index: i,
                    id: e.id.clone(),
                    message: "empty prompt".into(),
                });
            }
            if let Some(&first) = seen.get(e.id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    id: e.id.clone(),
                    first,
                    second: i,
                });
            }
            seen.insert(&e.id, i);
        }
        Ok(())
    }

    /// Serializes to the canonical pretty-printed JSON form. Output is
    /// byte-deterministic: metadata keys are sorted, entries keep their
    /// order.
    pub fn to_json_string(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("dataset serialization");
        out.push('\n');
        out
    }
}

/// How to partition a dataset. Sizes may leave a remainder, which is simply
/// not assigned to any split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_n: usize,
    pub val_n: usize,
    pub test_n: usize,
    pub seed: u64,
}

/// Corpus summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptStats {
    pub total_prompts: usize,
    pub total_annotations: usize,
    pub vocab_size: usize,
    pub avg_words_per_prompt: f64,
    pub gv_avg: f64,
    pub gv_min: f64,
    pub gv_max: f64,
}

/// Loads and validates a dataset file.
///
/// # Errors
/// Reports I/O failures, JSON schema violations (including out-of-range
/// coordinates and undersized response sets, with serde's line context), and
/// dataset-level invariant violations such as duplicate ids.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ds: Dataset = serde_json::from_str(&text).map_err(|source| DatasetError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    ds.validate()?;
    Ok(ds)
}

/// Splits a dataset into train/val/test by a seeded Fisher-Yates shuffle
/// followed by prefix slicing. Deterministic for a given seed; the splits
/// are disjoint and keep the shuffled order. Entries beyond
/// `train_n + val_n + test_n` are dropped.
pub fn split_dataset(
    ds: &Dataset,
    spec: &SplitSpec,
) -> Result<(Dataset, Dataset, Dataset), DatasetError> {
    let want = spec.train_n + spec.val_n + spec.test_n;
    if want > ds.entries.len() {
        return Err(DatasetError::SplitTooLarge {
            requested: want,
            available: ds.entries.len(),
        });
    }
    let mut order: Vec<usize> = (0..ds.entries.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let take = |range: std::ops::Range<usize>| Dataset {
        metadata: ds.metadata.clone(),
        entries: order[range]
            .iter()
            .map(|&i| ds.entries[i].clone())
            .collect(),
    };
    let train = take(0..spec.train_n);
    let val = take(spec.train_n..spec.train_n + spec.val_n);
    let test = take(spec.train_n + spec.val_n..want);
    Ok((train, val, test))
}

/// Determinant of the 2x2 sample covariance matrix (n-1 denominator) of a
/// response set. Tiny negative determinants from cancellation are clamped
/// to zero.
pub fn generalized_variance(responses: &ResponseSet) -> f64 {
    let pts = responses.points();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.x()).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.y()).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for p in pts {
        let dx = p.x() - mx;
        let dy = p.y() - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let denom = n - 1.0;
    let det = (sxx / denom) * (syy / denom) - (sxy / denom) * (sxy / denom);
    det.max(0.0)
}

/// Tokenizes a prompt for the vocabulary statistics: lowercase, split on
/// Unicode whitespace, strip leading/trailing ASCII punctuation. Tokens that
/// are all punctuation are dropped.
pub fn tokenize(prompt: &str) -> Vec<String> {
    prompt
        .split_whitespace()
        .filter_map(|raw| {
            let core = raw.trim_matches(|c: char| c.is_ascii_punctuation());
            if core.is_empty() {
                None
            } else {
                Some(core.to_lowercase())
            }
        })
        .collect()
}

/// Computes corpus statistics: prompt and annotation counts, vocabulary
/// size, average prompt length, and the spread of per-entry generalized
/// variances.
pub fn prompt_stats(ds: &Dataset) -> PromptStats {
    let mut vocab: HashSet<String> = HashSet::new();
    let mut total_words = 0usize;
    let mut total_annotations = 0usize;
    let mut gv_sum = 0.0;
    let mut gv_min = f64::INFINITY;
    let mut gv_max = f64::NEG_INFINITY;
    for e in &ds.entries {
        let toks = tokenize(&e.prompt);
        total_words += toks.len();
        vocab.extend(toks);
        total_annotations += e.responses.len();
        let gv = generalized_variance(&e.responses);
        gv_sum += gv;
        gv_min = gv_min.min(gv);
        gv_max = gv_max.max(gv);
    }
    let n = ds.entries.len();
    PromptStats {
        total_prompts: n,
        total_annotations,
        vocab_size: vocab.len(),
        avg_words_per_prompt: total_words as f64 / n.max(1) as f64,
        gv_avg: gv_sum / n.max(1) as f64,
        gv_min: if n == 0 { 0.0 } else { gv_min },
        gv_max: if n == 0 { 0.0 } else { gv_max },
    }
}

/// Ids of every entry, in order. Convenience for split-disjointness checks.
pub fn entry_ids(ds: &Dataset) -> BTreeSet<String> {
    ds.entries.iter().map(|e| e.id.clone()).collect()
}
