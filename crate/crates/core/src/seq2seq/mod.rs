//! Character-level GRU encoder-decoder with dot-product attention, trained as
//! a supervised denoiser.
//!
//! The source sequence is `[<lang>, chars..., EOS]`; the language tag lets a
//! single model serve every language it was trained on. The decoder is fed
//! the previous symbol concatenated with the previous attention context and
//! predicts each next character from its state and the current context.
//! Everything is `f64` and written out by hand, including the backward pass,
//! so gradients can be checked against finite differences.

use alloc::string::String;
use core::fmt;

mod decode;
pub mod gradcheck;
mod model;
mod params;
mod train;
mod vocab;

pub use decode::{greedy_decode, max_decode_len, ToyModel};
pub use model::{forward, loss_and_grads, Batch, Forward};
pub use params::{Dims, ModelParams};
pub use train::{clip_global_norm, train, EpochStats, TrainConfig, TrainedModel};
pub use vocab::{Symbol, Vocab, BOS, EOS, PAD, UNK};

#[derive(Clone, Debug, PartialEq)]
pub enum Seq2SeqError {
    UnknownLanguageTag(String),
    /// Ids out of range, empty sequences, interior padding or mismatched sizes.
    Shape(String),
    NonFiniteLoss {
        epoch: usize,
        step: usize,
    },
    EmptyData,
    InvalidConfig(&'static str),
}

impl fmt::Display for Seq2SeqError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Seq2SeqError::UnknownLanguageTag(l) => {
                write!(f, "language {l:?} is not in the vocabulary")
            }
            Seq2SeqError::Shape(msg) => write!(f, "shape error: {msg}"),
            Seq2SeqError::NonFiniteLoss { epoch, step } => {
                write!(f, "non-finite loss at epoch {epoch}, step {step}")
            }
            Seq2SeqError::EmptyData => f.write_str("training and dev data must be non-empty"),
            Seq2SeqError::InvalidConfig(what) => write!(f, "invalid training config: {what}"),
        }
    }
}

impl core::error::Error for Seq2SeqError {}
