//! Chat/embedding gateway with offline record-replay cassettes.
//!
//! All model traffic flows through the [`Gateway`] trait so every consumer
//! works identically against the live HTTP endpoint, a recorded cassette,
//! or a synthetic stub. Cassettes are JSON Lines files keyed by a SHA-256
//! hash of the canonicalized request; repeated identical requests (the
//! normal case when sampling n coordinates at temperature > 0) replay in
//! first-recorded-first-served order.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::{Condvar, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("http: {0}")]
    Http(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("cassette has no remaining response for request hash {hash}")]
    MissingRecord { hash: String },
    #[error("cassette io: {0}")]
    CassetteIo(#[from] std::io::Error),
    #[error("cassette line {line}: {message}")]
    CassetteFormat { line: usize, message: String },
    #[error("environment variable {0} is not set")]
    MissingEnv(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !self.temperature.is_finite() || !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must lie in [0, 2], got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_tokens must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub finish_reason: FinishReason,
}

/// Abstract model endpoint: chat completions plus embeddings.
pub trait Gateway: Send + Sync {
    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError>;
    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;
}

// --- canonical request hashing ------------------------------------------

/// Canonical JSON form of a chat request. serde_json maps serialize with
/// sorted keys and no whitespace, which is exactly the canonicalization the
/// cassette format pins down.
pub fn chat_request_value(request: &LlmRequest) -> Value {
    json!({
        "kind": "chat",
        "max_tokens": request.max_tokens,
        "model": request.model,
        "system": request.system,
        "temperature": request.temperature,
        "user": request.user,
    })
}

pub fn embed_request_value(model: &str, inputs: &[String]) -> Value {
    json!({
        "inputs": inputs,
        "kind": "embeddings",
        "model": model,
    })
}

/// SHA-256 hex digest of the compact, key-sorted serialization of a request
/// value.
pub fn request_hash(request: &Value) -> String {
    let canonical = serde_json::to_string(request).expect("request value serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    hex::encode(hasher.finalize())
}

// --- cassette storage ----------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub hash: String,
    pub request: Value,
    pub response: Value,
}

/// Parses a JSON Lines cassette. Blank lines are ignored; anything else
/// must be a complete record.
pub fn load_cassette(path: &Path) -> Result<Vec<CassetteRecord>, GatewayError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CassetteRecord =
            serde_json::from_str(&line).map_err(|e| GatewayError::CassetteFormat {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Recomputes every record's request hash; returns the indices (0-based)
/// where the stored hash disagrees.
pub fn verify_cassette(records: &[CassetteRecord]) -> Vec<usize> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| request_hash(&r.request) != r.hash)
        .map(|(i, _)| i)
        .collect()
}

fn response_to_value(response: &LlmResponse) -> Value {
    serde_json::to_value(response).expect("response serializes")
}

fn value_to_response(v: &Value) -> Result<LlmResponse, GatewayError> {
    serde_json::from_value(v.clone())
        .map_err(|e| GatewayError::MalformedResponse(format!("cassette chat response: {e}")))
}

fn embeddings_to_value(embeddings: &[Vec<f64>]) -> Value {
    json!({ "embeddings": embeddings })
}

fn value_to_embeddings(v: &Value) -> Result<Vec<Vec<f64>>, GatewayError> {
    let arr = v
        .get("embeddings")
        .and_then(Value::as_array)
        .ok_or_else(|| {
            GatewayError::MalformedResponse("cassette embeddings response".into())
        })?;
    arr.iter()
        .map(|row| {
            let nums = row.as_array().ok_or_else(|| {
                GatewayError::MalformedResponse("cassette embedding row".into())
            })?;
            let floats: Vec<f64> = nums.iter().filter_map(Value::as_f64).collect();
            if floats.len() != nums.len() {
                return Err(GatewayError::MalformedResponse(
                    "non-numeric embedding entry".into(),
                ));
            }
            Ok(floats)
        })
        .collect()
}

/// Replays a recorded cassette. Every request must have been recorded;
/// identical requests are served in recording order.
pub struct ReplayGateway {
    queues: Mutex<BTreeMap<String, VecDeque<Value>>>,
}

impl ReplayGateway {
    pub fn from_records(records: Vec<CassetteRecord>) -> Self {
        let mut queues: BTreeMap<String, VecDeque<Value>> = BTreeMap::new();
        for r in records {
            queues.entry(r.hash).or_default().push_back(r.response);
        }
        Self {
            queues: Mutex::new(queues),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, GatewayError> {
        Ok(Self::from_records(load_cassette(path)?))
    }

    fn pop(&self, hash: &str) -> Result<Value, GatewayError> {
        let mut queues = self.queues.lock().expect("replay lock");
        queues
            .get_mut(hash)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| GatewayError::MissingRecord {
                hash: hash.to_string(),
            })
    }
}

impl Gateway for ReplayGateway {
    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        request.validate()?;
        let hash = request_hash(&chat_request_value(request));
        value_to_response(&self.pop(&hash)?)
    }

    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let hash = request_hash(&embed_request_value(model, inputs));
        value_to_embeddings(&self.pop(&hash)?)
    }
}

/// Wraps another gateway and appends every exchange to a JSON Lines sink.
/// Writes are serialized; the wrapped gateway decides concurrency.
pub struct RecordingGateway<'g, W: Write + Send> {
    inner: &'g dyn Gateway,
    sink: Mutex<W>,
}

impl<'g, W: Write + Send> RecordingGateway<'g, W> {
    pub fn new(inner: &'g dyn Gateway, sink: W) -> Self {
        Self {
            inner,
            sink: Mutex::new(sink),
        }
    }

    pub fn into_sink(self) -> W {
        self.sink.into_inner().expect("recording lock")
    }

    fn write_record(&self, record: &CassetteRecord) -> Result<(), GatewayError> {
        let line = serde_json::to_string(record).expect("record serializes");
        let mut sink = self.sink.lock().expect("recording lock");
        writeln!(sink, "{line}")?;
        sink.flush()?;
        Ok(())
    }
}

impl<W: Write + Send> Gateway for RecordingGateway<'_, W> {
    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        let request_value = chat_request_value(request);
        let response = self.inner.chat(request)?;
        self.write_record(&CassetteRecord {
            hash: request_hash(&request_value),
            request: request_value,
            response: response_to_value(&response),
        })?;
        Ok(response)
    }

    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let request_value = embed_request_value(model, inputs);
        let embeddings = self.inner.embed(model, inputs)?;
        self.write_record(&CassetteRecord {
            hash: request_hash(&request_value),
            request: request_value,
            response: embeddings_to_value(&embeddings),
        })?;
        Ok(embeddings)
    }
}

// --- stub ------------------------------------------------------------------

type ChatFn = dyn Fn(&LlmRequest) -> Result<LlmResponse, GatewayError> + Send + Sync;
type EmbedFn = dyn Fn(&str, &[String]) -> Result<Vec<Vec<f64>>, GatewayError> + Send + Sync;

/// Programmable offline gateway for tests and `--gateway stub` runs.
pub struct StubGateway {
    chat_fn: Box<ChatFn>,
    embed_fn: Box<EmbedFn>,
}

impl StubGateway {
    pub fn new(
        chat_fn: impl Fn(&LlmRequest) -> Result<LlmResponse, GatewayError> + Send + Sync + 'static,
        embed_fn: impl Fn(&str, &[String]) -> Result<Vec<Vec<f64>>, GatewayError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        Self {
            chat_fn: Box::new(chat_fn),
            embed_fn: Box::new(embed_fn),
        }
    }

    /// A stub that always answers `text` and embeds strings by content hash
    /// (identical inputs get identical unit vectors).
    pub fn canned(text: &str) -> Self {
        let text = text.to_string();
        Self::new(
            move |_req| {
                Ok(LlmResponse {
                    text: text.clone(),
                    finish_reason: FinishReason::Stop,
                })
            },
            |_model, inputs| Ok(inputs.iter().map(|s| hash_embedding(s, 16)).collect()),
        )
    }
}

impl Gateway for StubGateway {
    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        request.validate()?;
        (self.chat_fn)(request)
    }

    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        (self.embed_fn)(model, inputs)
    }
}

/// Deterministic unit vector derived from the text content. Not a semantic
/// embedding — it only guarantees that equal strings embed equally, which
/// is what stub-mode retrieval needs.
pub fn hash_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let seed = u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    v
}

// --- live HTTP ---------------------------------------------------------------

/// Counting semaphore bounding concurrent in-flight requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

struct SemaphoreGuard<'s> {
    semaphore: &'s Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// Live endpoint speaking the `/v1/chat/completions` and `/v1/embeddings`
/// wire protocol. Concurrent callers are admitted up to `max_in_flight` at
/// a time.
pub struct HttpGateway {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
    permits: Semaphore,
}

impl HttpGateway {
    pub fn new(base_url: &str, api_key: &str, max_in_flight: usize) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            agent: ureq::Agent::new_with_defaults(),
            permits: Semaphore::new(max_in_flight.max(1)),
        }
    }

    /// Reads `EQALIGN_BASE_URL` and `EQALIGN_API_KEY`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let base_url = std::env::var("EQALIGN_BASE_URL")
            .map_err(|_| GatewayError::MissingEnv("EQALIGN_BASE_URL"))?;
        let api_key = std::env::var("EQALIGN_API_KEY")
            .map_err(|_| GatewayError::MissingEnv("EQALIGN_API_KEY"))?;
        Ok(Self::new(&base_url, &api_key, DEFAULT_MAX_IN_FLIGHT))
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let _permit = self.permits.acquire();
        let url = format!("{}{}", self.base_url, path);
        let mut response = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| GatewayError::Http(e.to_string()))?;
        response
            .body_mut()
            .read_json()
            .map_err(|e| GatewayError::Http(e.to_string()))
    }
}

/// Wire body for a chat call. Split out so it is testable without a server.
pub fn chat_wire_body(request: &LlmRequest) -> Value {
    json!({
        "model": request.model,
        "messages": [
            { "role": "system", "content": request.system },
            { "role": "user", "content": request.user },
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    })
}

fn parse_finish_reason(v: Option<&Value>) -> FinishReason {
    match v.and_then(Value::as_str) {
        Some("stop") | None => FinishReason::Stop,
        Some("length") => FinishReason::Length,
        Some(other) => FinishReason::Other(other.to_string()),
    }
}

impl Gateway for HttpGateway {
    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        request.validate()?;
        let value = self.post("/v1/chat/completions", &chat_wire_body(request))?;
        let choice = value
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0]".into()))?;
        let text = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| {
                GatewayError::MalformedResponse("missing choices[0].message.content".into())
            })?
            .to_string();
        Ok(LlmResponse {
            text,
            finish_reason: parse_finish_reason(choice.get("finish_reason")),
        })
    }

    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let body = json!({ "model": model, "input": inputs });
        let value = self.post("/v1/embeddings", &body)?;
        let data = value
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::MalformedResponse("missing data".into()))?;
        if data.len() != inputs.len() {
            return Err(GatewayError::MalformedResponse(format!(
                "asked for {} embeddings, got {}",
                inputs.len(),
                data.len()
            )));
        }
        data.iter()
            .map(|item| {
                item.get("embedding")
                    .and_then(Value::as_array)
                    .map(|nums| nums.iter().filter_map(Value::as_f64).collect())
                    .ok_or_else(|| {
                        GatewayError::MalformedResponse("missing data[i].embedding".into())
                    })
            })
            .collect()
    }
}
