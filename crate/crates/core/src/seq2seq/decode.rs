use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::model::{argmax, encode, DecoderState};
use super::params::ModelParams;
use super::vocab::{Vocab, EOS};
use super::Seq2SeqError;

/// Decoding budget for a source of `src_chars` characters.
pub fn max_decode_len(src_chars: usize) -> usize {
    2 * src_chars + 10
}

/// Greedy argmax decoding until EOS or [`max_decode_len`] steps.
pub fn greedy_decode(
    params: &ModelParams,
    vocab: &Vocab,
    lang: &str,
    src: &str,
) -> Result<String, Seq2SeqError> {
    if params.dims().vocab != vocab.len() {
        return Err(Seq2SeqError::Shape(format!(
            "model vocabulary {} differs from {}",
            params.dims().vocab,
            vocab.len()
        )));
    }
    let ids = vocab.encode_text(lang, src)?;
    let enc = encode(params, &ids);
    let mut state = DecoderState::start(params.dims(), &enc, ids.len());
    let limit = max_decode_len(src.chars().count());
    let mut out: Vec<u32> = Vec::with_capacity(limit);
    let mut prev = super::vocab::BOS;
    for _ in 0..limit {
        state.step(params, &enc, prev);
        let next = argmax(&state.logits) as u32;
        if next == EOS {
            break;
        }
        out.push(next);
        prev = next;
    }
    Ok(vocab.decode(&out))
}

/// A vocabulary together with parameters sized for it.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    vocab: Vocab,
    params: ModelParams,
}

impl ToyModel {
    pub fn new(vocab: Vocab, params: ModelParams) -> Result<Self, Seq2SeqError> {
        if params.dims().vocab != vocab.len() {
            return Err(Seq2SeqError::Shape(format!(
                "parameters sized for {} symbols, vocabulary has {}",
                params.dims().vocab,
                vocab.len()
            )));
        }
        Ok(ToyModel { vocab, params })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn normalize(&self, lang: &str, src: &str) -> Result<String, Seq2SeqError> {
        greedy_decode(&self.params, &self.vocab, lang, src)
    }
}
