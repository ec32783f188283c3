//! The sentence-in, sentence-out normalizer interface shared by every backend.
//!
//! Backends see whole sentences and return whole sentences; projecting the
//! output back onto tokens is the caller's job (see [`crate::align`]), so that
//! every backend is scored the same way.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::baselines::{lai, mfr, Lexicon};
use crate::seq2seq::ToyModel;
use crate::text::collapse_ws;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LangSupport {
    Any,
    Only(BTreeSet<String>),
}

impl LangSupport {
    pub fn supports(&self, lang: &str) -> bool {
        match self {
            LangSupport::Any => true,
            LangSupport::Only(set) => set.contains(lang),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Capability {
    pub name: String,
    pub langs: LangSupport,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendError {
    UnsupportedLanguage { backend: String, lang: String },
    Failure { backend: String, detail: String },
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendError::UnsupportedLanguage { backend, lang } => {
                write!(f, "backend {backend} does not support language {lang:?}")
            }
            BackendError::Failure { backend, detail } => {
                write!(f, "backend {backend} failed: {detail}")
            }
        }
    }
}

impl core::error::Error for BackendError {}

/// A sentence-level normalizer. Output has the same length and order as the
/// input; every output sentence is single-space separated.
pub trait Normalizer: Send + Sync {
    fn capability(&self) -> Capability;

    fn normalize_batch(
        &self,
        lang: &str,
        sentences: &[String],
    ) -> Result<Vec<String>, BackendError>;
}

impl<N: Normalizer + ?Sized> Normalizer for alloc::boxed::Box<N> {
    fn capability(&self) -> Capability {
        (**self).capability()
    }

    fn normalize_batch(
        &self,
        lang: &str,
        sentences: &[String],
    ) -> Result<Vec<String>, BackendError> {
        (**self).normalize_batch(lang, sentences)
    }
}

/// Rejects languages outside the capability descriptor.
pub fn check_language(n: &(impl Normalizer + ?Sized), lang: &str) -> Result<(), BackendError> {
    let cap = n.capability();
    if cap.langs.supports(lang) {
        Ok(())
    } else {
        Err(BackendError::UnsupportedLanguage {
            backend: cap.name,
            lang: lang.to_owned(),
        })
    }
}

fn word_level(sentences: &[String], f: impl Fn(&[&str]) -> Vec<String>) -> Vec<String> {
    sentences
        .iter()
        .map(|s| {
            let words: Vec<&str> = s.split_whitespace().collect();
            collapse_ws(&f(&words).join(" "))
        })
        .collect()
}

/// Leave-as-is.
#[derive(Clone, Copy, Debug, Default)]
pub struct LaiNormalizer;

impl Normalizer for LaiNormalizer {
    fn capability(&self) -> Capability {
        Capability {
            name: "lai".into(),
            langs: LangSupport::Any,
        }
    }

    fn normalize_batch(
        &self,
        _lang: &str,
        sentences: &[String],
    ) -> Result<Vec<String>, BackendError> {
        Ok(word_level(sentences, |words| lai(words)))
    }
}

/// Most-frequent replacement, word by word.
#[derive(Clone, Debug)]
pub struct MfrNormalizer {
    lexicon: Lexicon,
}

impl MfrNormalizer {
    pub fn new(lexicon: Lexicon) -> Self {
        MfrNormalizer { lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

impl Normalizer for MfrNormalizer {
    fn capability(&self) -> Capability {
        Capability {
            name: "mfr".into(),
            langs: LangSupport::Any,
        }
    }

    fn normalize_batch(
        &self,
        _lang: &str,
        sentences: &[String],
    ) -> Result<Vec<String>, BackendError> {
        Ok(word_level(sentences, |words| mfr(words, &self.lexicon)))
    }
}

/// Greedy decoding with the toy encoder-decoder.
#[derive(Clone, Debug)]
pub struct ToyNormalizer {
    model: ToyModel,
}

impl ToyNormalizer {
    pub fn new(model: ToyModel) -> Self {
        ToyNormalizer { model }
    }

    pub fn model(&self) -> &ToyModel {
        &self.model
    }
}

impl Normalizer for ToyNormalizer {
    fn capability(&self) -> Capability {
        Capability {
            name: "toy".into(),
            langs: LangSupport::Only(self.model.vocab().langs().map(Into::into).collect()),
        }
    }

    fn normalize_batch(
        &self,
        lang: &str,
        sentences: &[String],
    ) -> Result<Vec<String>, BackendError> {
        check_language(self, lang)?;
        sentences
            .iter()
            .map(|s| {
                self.model
                    .normalize(lang, &collapse_ws(s))
                    .map(|out| collapse_ws(&out))
                    .map_err(|e| BackendError::Failure {
                        backend: "toy".into(),
                        detail: format!("{e}"),
                    })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::build_lexicon;
    use crate::corpus::parse_corpus;
    use alloc::vec;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| String::from(*s)).collect()
    }

    #[test]
    fn lai_echoes() {
        let input = strings(&["u r gr8", "ok"]);
        assert_eq!(LaiNormalizer.normalize_batch("en", &input).unwrap(), input);
    }

    #[test]
    fn mfr_rewrites_words_and_drops_merges() {
        let lex = build_lexicon(
            &parse_corpus(
                "u\tyou\n\nu\tyou\nr\tr\n\nu\tu\nr\tare\n\nwan\twanna\nna\t\n",
                "en",
            )
            .unwrap(),
            true,
        );
        let n = MfrNormalizer::new(lex);
        assert_eq!(
            n.normalize_batch("en", &strings(&["u r great", "wan na go"]))
                .unwrap(),
            vec!["you r great", "wanna go"]
        );
    }

    #[test]
    fn language_gate() {
        let only = LangSupport::Only(["en".into()].into_iter().collect());
        assert!(only.supports("en"));
        assert!(!only.supports("da"));
    }
}
