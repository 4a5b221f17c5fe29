//! Prompt-to-coordinate recommenders.
//!
//! Everything that turns a natural-language request into equalizer
//! coordinates lives here: the statistical baselines, the four
//! language-model strategies, embedding retrieval, reply parsing, and the
//! gateway plumbing that makes all of it runnable offline from recorded
//! cassettes.

mod baselines;
mod gateway;
mod icl;
mod parse;
mod retrieval;

pub use baselines::{OracleReplay, RandomGaussianBaseline, StaticPresetBaseline};
pub use gateway::{
    chat_request_value, chat_wire_body, embed_request_value, hash_embedding, load_cassette,
    request_hash, verify_cassette, CassetteRecord, FinishReason, Gateway, GatewayError,
    HttpGateway, LlmRequest, LlmResponse, RecordingGateway, ReplayGateway, StubGateway,
    DEFAULT_MAX_IN_FLIGHT,
};
pub use icl::{
    rag, rag_qa, static_icl, template_inventory, text2beosonic, IclOptions, Rag, RagQa, StaticIcl,
    Text2Beosonic, QA_PREDICTIONS,
};
pub use parse::{parse_coords, ParseError};
pub use retrieval::{build_index, retrieve, IndexItem, RetrievalIndex};

use thiserror::Error;

use crate::beosonic::BeoCoord;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("no usable reply after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: usize, last: ParseError },
    #[error("reply parse: {0}")]
    Parse(#[from] ParseError),
    #[error("invalid recommender config: {0}")]
    InvalidConfig(String),
    #[error("training set has no entries")]
    EmptyTrain,
    #[error("expert mapping has no entries")]
    EmptyMapping,
    #[error("retrieval index has no items")]
    EmptyIndex,
    #[error("descriptor {0:?} appears twice in the expert mapping")]
    DuplicateDescriptor(String),
    #[error("embedding {index} is degenerate (zero norm)")]
    DegenerateEmbedding { index: usize },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("prompt {prompt:?} is not in the oracle's answer table")]
    UnknownPrompt { prompt: String },
}

/// A strategy that maps a prompt to a sampled set of equalizer settings.
///
/// Implementations return exactly `n_samples` in-square coordinates and, in
/// replay or stub mode, are pure functions of `(prompt, n_samples, seed)`.
pub trait Recommender: Send + Sync {
    /// Stable name used in run records and reports.
    fn name(&self) -> &str;

    fn recommend(
        &self,
        prompt: &str,
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<BeoCoord>, RecommendError>;
}

/// An expert-elicited table mapping sound descriptors to coordinates.
/// Descriptors are stored lowercased and must be unique.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertMapping {
    entries: Vec<(String, BeoCoord)>,
}

impl ExpertMapping {
    pub fn new(
        entries: impl IntoIterator<Item = (String, BeoCoord)>,
    ) -> Result<Self, RecommendError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for (descriptor, coord) in entries {
            let descriptor = descriptor.to_lowercase();
            if !seen.insert(descriptor.clone()) {
                return Err(RecommendError::DuplicateDescriptor(descriptor));
            }
            out.push((descriptor, coord));
        }
        Ok(Self { entries: out })
    }

    /// The built-in table. The warm entry reproduces the elicitation
    /// study's published example; the rest are this repo's own additions in
    /// the same spirit.
    pub fn builtin() -> Self {
        let raw: &[(&str, f64, f64)] = &[
            ("warm", 0.0, -6.0),
            ("bright", 0.0, 5.0),
            ("dark", -1.0, -5.0),
            ("smooth", -4.0, -1.0),
            ("crisp", 2.0, 4.0),
            ("mellow", -3.0, -3.0),
            ("punchy", 4.0, -2.0),
            ("airy", -1.0, 5.0),
            ("boomy", 3.0, -5.0),
            ("flat", 0.0, 0.0),
            ("energetic", 5.0, 2.0),
            ("soft", -5.0, -2.0),
        ];
        Self::new(raw.iter().map(|&(d, x, y)| {
            (
                d.to_string(),
                BeoCoord::new(x, y).expect("built-in coordinates are in range"),
            )
        }))
        .expect("built-in descriptors are unique")
    }

    pub fn entries(&self) -> &[(String, BeoCoord)] {
        &self.entries
    }

    /// Rendered one-descriptor-per-line table for prompt templates.
    pub fn table(&self) -> String {
        self.entries
            .iter()
            .map(|(d, c)| format!("{} -> [{}, {}]", d, c.x(), c.y()))
            .collect::<Vec<String>>()
            .join("\n")
    }
}
