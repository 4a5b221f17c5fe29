//! Prompt-conditioned EQ recommendation and evaluation.
//!
//! The crate maps natural-language audio prompts to *distributions* of 2D
//! equalizer settings and scores arbitrary recommenders against human
//! preference distributions. The pieces compose into one pipeline:
//!
//! * [`dataset`] — prompt/response datasets: loading, validation, splitting,
//!   summary statistics.
//! * [`beosonic`] — the bounded EQ parameter square and its frequency
//!   response curves.
//! * [`transport`] — optimal-transport distances between discrete measures
//!   (exact Kantorovich-1, debiased Sinkhorn divergence, sliced W1).
//! * [`density`] — boundary-corrected kernel density estimation and the
//!   reflective Kantorovich distance.
//! * [`recommend`] — the recommender abstraction: statistical baselines,
//!   retrieval, LLM gateway with record/replay, and prompting strategies.
//! * [`augment`] — synonym-substitution training-set expansion with bounded
//!   label blur.
//! * [`evalstats`] — the evaluation loop, nonparametric tests, and report
//!   emission.
//! * [`synthpop`] — deterministic synthetic population used by the shipped
//!   fixtures and the offline end-to-end tests.

pub mod augment;
pub mod beosonic;
pub mod dataset;
pub mod density;
pub mod evalstats;
pub mod recommend;
pub mod synthpop;
pub mod transport;
mod util;

pub use beosonic::BeoCoord;
pub use dataset::{Dataset, PromptEntry, ResponseSet};
pub use transport::DiscreteMeasure;
