//! Allocation-only building blocks for sentence-level lexical normalization.
//!
//! Noisy sentences are normalized as a whole (the translation framing) by any
//! [`backend::Normalizer`], the output is projected back onto the raw tokens by
//! [`align`], and the projected words are scored by [`metrics`]. The crate also
//! carries the word-level reference baselines, the synthetic noise channels used
//! to manufacture denoising data, and a small character-level encoder-decoder
//! that is trained as a supervised denoiser.
//!
//! Nothing here touches the filesystem or the network; see the `lexnorm` crate
//! for file formats, the remote client and the command-line tool.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod align;
pub mod augment;
pub mod backend;
pub mod baselines;
pub mod corpus;
pub mod metrics;
pub mod pipeline;
pub mod seq2seq;

mod text;

pub use align::{align_output, fast_path_align, levenshtein, AlignConfig, Alignment};
pub use corpus::{
    gold_word_assignments, parse_corpus, serialize_corpus, to_sentence_pairs, AnnotatedToken,
    Corpus, Sentence, SentencePair,
};
pub use metrics::{EvalCounts, EvalReport, LangReport};
