//! Max-margin bidirectional-LSTM tagger for named-entity recognition.
//!
//! The tagger scores a label sequence as the sum of learned transition
//! scores and per-position log-probabilities from a BiLSTM softmax layer.
//! Training minimizes a regularized structured hinge loss whose margin
//! ("trigger") is one of:
//!
//! - [`triggers::TriggerKind::Hamming`]: κ per mislabeled position,
//! - [`triggers::TriggerKind::FScore`]: κ·(1 − entity F1 of the sentence),
//! - [`triggers::TriggerKind::Integrated`]: the F-score trigger plus β times
//!   the Hamming trigger.
//!
//! Loss-augmented inference is exact (augmented Viterbi) for the Hamming
//! trigger and uses a Viterbi-seeded beam with reranking for the
//! non-decomposable ones.

pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod network;
pub mod structured;
pub mod tensor;
pub mod training;
pub mod triggers;

pub use error::{Error, Result};
