//! Synonym-substitution data augmentation with optional label blur.
//!
//! Each training entry is expanded into a family of paraphrased prompts by
//! swapping dictionary words for their synonyms, one position at a time
//! first, then pairs, then triples, and so on. Label copies get a small
//! uniform jitter so the augmented set does not contain hundreds of exact
//! duplicates of the same eleven points.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::beosonic::BeoCoord;
use crate::util::derive_seed;
use crate::dataset::{Dataset, PromptEntry, ResponseSet};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("failed to read synonym dictionary: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse synonym dictionary: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("dictionary word {word:?} appears twice after lowercasing")]
    DuplicateWord { word: String },
    #[error("dictionary word {word:?} has an empty synonym list")]
    EmptySynonyms { word: String },
    #[error("dictionary word {word:?} lists itself as a synonym")]
    SelfMapping { word: String },
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error("training set has no entries")]
    EmptyTrain,
}

/// A word-level synonym table. Keys are stored lowercased; lookups are
/// case-insensitive on the prompt side. Every synonym list is non-empty and
/// never contains the key itself, so each substitution genuinely changes the
/// prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymDict {
    map: BTreeMap<String, Vec<String>>,
}

impl SynonymDict {
    /// Builds a dictionary from raw entries, lowercasing the keys and
    /// checking the structural invariants.
    pub fn new<I>(entries: I) -> Result<Self, AugmentError>
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut map = BTreeMap::new();
        for (word, synonyms) in entries {
            let key = word.to_lowercase();
            if synonyms.is_empty() {
                return Err(AugmentError::EmptySynonyms { word: key });
            }
            if synonyms.iter().any(|s| s.to_lowercase() == key) {
                return Err(AugmentError::SelfMapping { word: key });
            }
            if map.insert(key.clone(), synonyms).is_some() {
                return Err(AugmentError::DuplicateWord { word: key });
            }
        }
        Ok(Self { map })
    }

    /// A dictionary with no entries. Augmenting with it is the identity.
    pub fn empty() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }

    /// Parses the on-disk JSON form: an object mapping each word to its
    /// synonym list, e.g. `{"warm": ["cozy", "mellow"]}`.
    pub fn from_json_str(json: &str) -> Result<Self, AugmentError> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(json)?;
        Self::new(raw)
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Synonyms for `word`, if it is in the table. The caller is expected to
    /// pass a lowercased, punctuation-trimmed token.
    pub fn synonyms(&self, word: &str) -> Option<&[String]> {
        self.map.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

impl<'de> Deserialize<'de> for SynonymDict {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, Vec<String>>::deserialize(deserializer)?;
        SynonymDict::new(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    /// Desired output-to-input size ratio. Each entry gets up to
    /// `ceil(target_factor)` paraphrase variants on top of the original.
    pub target_factor: f64,
    /// Half-width of the uniform jitter applied to each coordinate of every
    /// variant's label copy, in dB. Zero disables the blur.
    pub max_blur_db: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            target_factor: 50.0,
            max_blur_db: 0.3,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !self.target_factor.is_finite() || self.target_factor < 1.0 {
            return Err(AugmentError::InvalidConfig(format!(
                "target_factor must be finite and >= 1, got {}",
                self.target_factor
            )));
        }
        if !self.max_blur_db.is_finite() || self.max_blur_db < 0.0 || self.max_blur_db >= 6.0 {
            return Err(AugmentError::InvalidConfig(format!(
                "max_blur_db must lie in [0, 6), got {}",
                self.max_blur_db
            )));
        }
        Ok(())
    }
}

/// Returns a copy of `labels` with every coordinate jittered by an
/// independent Uniform(-max_blur_db, +max_blur_db) draw and clamped back to
/// the valid square. `max_blur_db` of zero returns an exact copy.
///
/// Panics if `max_blur_db` is negative or non-finite; [`AugmentConfig::validate`]
/// rejects such values before they can reach this point.
pub fn blur_labels(labels: &ResponseSet, max_blur_db: f64, seed: u64) -> ResponseSet {
    assert!(
        max_blur_db.is_finite() && max_blur_db >= 0.0,
        "max_blur_db must be finite and non-negative"
    );
    if max_blur_db == 0.0 {
        return labels.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<BeoCoord> = labels
        .points()
        .iter()
        .map(|p| {
            let dx = rng.random_range(-max_blur_db..=max_blur_db);
            let dy = rng.random_range(-max_blur_db..=max_blur_db);
            BeoCoord::clamped(p.x() + dx, p.y() + dy).expect("jittered coordinate is finite")
        })
        .collect();
    ResponseSet::new(points).expect("blur preserves the response count")
}

/// One dictionary hit inside a tokenized prompt: which token, what surrounds
/// the core word, and the synonyms that can replace it.
struct Hit {
    token_index: usize,
    prefix: String,
    suffix: String,
    options: Vec<String>,
}

/// Splits a prompt on whitespace and records every position whose
/// punctuation-trimmed, lowercased core is in the dictionary. Punctuation
/// stays glued to the substituted word, so "warm," becomes "cozy,".
fn find_hits<'a>(prompt: &'a str, dict: &SynonymDict) -> (Vec<&'a str>, Vec<Hit>) {
    let tokens: Vec<&str> = prompt.split_whitespace().collect();
    let mut hits = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        let core = token.trim_matches(|c: char| c.is_ascii_punctuation());
        if core.is_empty() {
            continue;
        }
        if let Some(options) = dict.synonyms(&core.to_lowercase()) {
            let start = token.find(core).expect("core is a substring of its token");
            hits.push(Hit {
                token_index: i,
                prefix: token[..start].to_string(),
                suffix: token[start + core.len()..].to_string(),
                options: options.to_vec(),
            });
        }
    }
    (tokens, hits)
}

/// All index combinations of size `k` drawn from `0..n`, in lexicographic
/// order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        out.push(combo.clone());
        // advance to the next combination, rightmost index first
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if combo[i] < n - (k - i) {
                combo[i] += 1;
                for j in i + 1..k {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Every prompt obtainable by substituting exactly `level` of the hit
/// positions, enumerated deterministically: position combinations in
/// lexicographic order, synonym choices as an odometer within each.
fn enumerate_level(tokens: &[&str], hits: &[Hit], level: usize) -> Vec<String> {
    let mut out = Vec::new();
    for combo in combinations(hits.len(), level) {
        let counts: Vec<usize> = combo.iter().map(|&h| hits[h].options.len()).collect();
        let mut odo = vec![0usize; level];
        'combo: loop {
            let mut toks: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
            for (slot, &h) in combo.iter().enumerate() {
                let hit = &hits[h];
                toks[hit.token_index] =
                    format!("{}{}{}", hit.prefix, hit.options[odo[slot]], hit.suffix);
            }
            out.push(toks.join(" "));
            // odometer tick; exhaustion moves on to the next combination
            let mut s = level;
            loop {
                if s == 0 {
                    break 'combo;
                }
                s -= 1;
                odo[s] += 1;
                if odo[s] < counts[s] {
                    break;
                }
                odo[s] = 0;
            }
        }
    }
    out
}

/// Expands a training set by synonym substitution.
///
/// Every entry is kept verbatim and followed by up to `ceil(target_factor)`
/// paraphrase variants. Variants are taken level by level — all
/// single-substitution prompts first, then all pairs, and so on — so the
/// output is biased toward prompts close to the original. Only the level
/// that overflows the budget is subsampled, via a seeded shuffle, without
/// replacement. Each variant carries a jittered copy of the original labels
/// (see [`blur_labels`]); entries with no dictionary hits contribute only
/// their original.
///
/// The result is a pure function of `(train, dict, config)` — byte-identical
/// across runs and platforms.
pub fn augment_prompts(
    train: &Dataset,
    dict: &SynonymDict,
    config: &AugmentConfig,
) -> Result<Dataset, AugmentError> {
    config.validate()?;
    if train.entries.is_empty() {
        return Err(AugmentError::EmptyTrain);
    }
    let want = config.target_factor.ceil() as usize;

    let mut entries = Vec::with_capacity(train.entries.len());
    for entry in &train.entries {
        entries.push(entry.clone());

        let (tokens, hits) = find_hits(&entry.prompt, dict);
        if hits.is_empty() {
            continue;
        }
        let seed = derive_seed(config.seed, &entry.id);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut variants: Vec<String> = Vec::new();
        let mut level = 1;
        while variants.len() < want && level <= hits.len() {
            let mut batch = enumerate_level(&tokens, &hits, level);
            let remaining = want - variants.len();
            if batch.len() > remaining {
                batch.shuffle(&mut rng);
                batch.truncate(remaining);
            }
            variants.extend(batch);
            level += 1;
        }

        for (k, prompt) in variants.into_iter().enumerate() {
            entries.push(PromptEntry {
                id: format!("{}-aug{:03}", entry.id, k + 1),
                prompt,
                audio_type: entry.audio_type.clone(),
                responses: blur_labels(
                    &entry.responses,
                    config.max_blur_db,
                    seed.wrapping_add(k as u64 + 1),
                ),
            });
        }
    }

    Ok(Dataset {
        metadata: train.metadata.clone(),
        entries,
    })
}
