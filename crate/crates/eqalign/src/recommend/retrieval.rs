//! Embedding-based nearest-prompt retrieval over the training set.
//!
//! Index embeddings and queries are normalized to unit length, so the dot
//! product ranking is a cosine ranking and a query equal to an indexed
//! prompt always ranks that prompt first.

use super::gateway::{Gateway, GatewayError};
use super::RecommendError;
use crate::dataset::{Dataset, ResponseSet};

const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexItem {
    pub prompt: String,
    pub responses: ResponseSet,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    items: Vec<IndexItem>,
    dim: usize,
}

impl RetrievalIndex {
    pub fn items(&self) -> &[IndexItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn normalize(mut v: Vec<f64>, index: usize) -> Result<Vec<f64>, RecommendError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm < NORM_FLOOR {
        return Err(RecommendError::DegenerateEmbedding { index });
    }
    for x in &mut v {
        *x /= norm;
    }
    Ok(v)
}

/// Embeds every training prompt (one batched call) and builds the index.
pub fn build_index(
    train: &Dataset,
    gateway: &dyn Gateway,
    embed_model: &str,
) -> Result<RetrievalIndex, RecommendError> {
    if train.entries.is_empty() {
        return Err(RecommendError::EmptyTrain);
    }
    let inputs: Vec<String> = train.entries.iter().map(|e| e.prompt.clone()).collect();
    let embeddings = gateway.embed(embed_model, &inputs)?;
    if embeddings.len() != inputs.len() {
        return Err(RecommendError::Gateway(GatewayError::MalformedResponse(
            format!(
                "asked for {} embeddings, got {}",
                inputs.len(),
                embeddings.len()
            ),
        )));
    }
    let dim = embeddings[0].len();
    let mut items = Vec::with_capacity(train.entries.len());
    for (i, (entry, embedding)) in train.entries.iter().zip(embeddings).enumerate() {
        if embedding.len() != dim {
            return Err(RecommendError::DimensionMismatch {
                expected: dim,
                got: embedding.len(),
            });
        }
        items.push(IndexItem {
            prompt: entry.prompt.clone(),
            responses: entry.responses.clone(),
            embedding: normalize(embedding, i)?,
        });
    }
    Ok(RetrievalIndex { items, dim })
}

/// Top-`k` index items by dot product with the embedded query, descending;
/// exact ties keep index insertion order.
pub fn retrieve<'i>(
    index: &'i RetrievalIndex,
    prompt: &str,
    k: usize,
    gateway: &dyn Gateway,
    embed_model: &str,
) -> Result<Vec<&'i IndexItem>, RecommendError> {
    if k == 0 {
        return Err(RecommendError::InvalidConfig(
            "retrieval k must be at least 1".into(),
        ));
    }
    if k > index.len() {
        return Err(RecommendError::InvalidConfig(format!(
            "retrieval k = {} exceeds index size {}",
            k,
            index.len()
        )));
    }
    let mut embedded = gateway.embed(embed_model, &[prompt.to_string()])?;
    if embedded.len() != 1 {
        return Err(RecommendError::Gateway(GatewayError::MalformedResponse(
            format!("asked for 1 embedding, got {}", embedded.len()),
        )));
    }
    let query = embedded.pop().expect("length checked");
    if query.len() != index.dim() {
        return Err(RecommendError::DimensionMismatch {
            expected: index.dim(),
            got: query.len(),
        });
    }
    let query = normalize(query, 0)?;

    let mut scored: Vec<(f64, usize)> = index
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let dot = item
                .embedding
                .iter()
                .zip(&query)
                .map(|(a, b)| a * b)
                .sum::<f64>();
            (dot, i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored[..k].iter().map(|&(_, i)| &index.items[i]).collect())
}
