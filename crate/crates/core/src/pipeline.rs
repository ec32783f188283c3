//! Normalize, align, score: the evaluation path shared by every backend.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::align::{align, AlignConfig, AlignError, Alignment};
use crate::backend::{BackendError, Normalizer};
use crate::corpus::Corpus;
use crate::metrics::{EvalReport, Evaluator, MetricError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PipelineError {
    Backend(BackendError),
    /// The backend returned a different number of sentences than it was given.
    CountMismatch {
        expected: usize,
        found: usize,
    },
    Align {
        sentence: usize,
        source: AlignError,
    },
    Metric(MetricError),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Backend(e) => write!(f, "{e}"),
            PipelineError::CountMismatch { expected, found } => {
                write!(
                    f,
                    "backend returned {found} sentences for {expected} inputs"
                )
            }
            PipelineError::Align { sentence, source } => write!(f, "sentence {sentence}: {source}"),
            PipelineError::Metric(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for PipelineError {}

impl From<BackendError> for PipelineError {
    fn from(e: BackendError) -> Self {
        PipelineError::Backend(e)
    }
}

impl From<MetricError> for PipelineError {
    fn from(e: MetricError) -> Self {
        PipelineError::Metric(e)
    }
}

/// Normalizes every sentence of `corpus` in one batch and projects each output
/// onto the sentence's raw tokens.
pub fn predict_corpus(
    normalizer: &(impl Normalizer + ?Sized),
    corpus: &Corpus,
    cfg: &AlignConfig,
) -> Result<Vec<Alignment>, PipelineError> {
    if corpus.is_empty() {
        return Ok(Vec::new());
    }
    let sources: Vec<String> = corpus.sentences().iter().map(|s| s.to_pair().src).collect();
    let outputs = normalizer.normalize_batch(corpus.lang(), &sources)?;
    if outputs.len() != sources.len() {
        return Err(PipelineError::CountMismatch {
            expected: sources.len(),
            found: outputs.len(),
        });
    }
    corpus
        .sentences()
        .iter()
        .zip(&outputs)
        .enumerate()
        .map(|(i, (s, out))| {
            align(&s.raw_tokens(), out, cfg).map_err(|source| PipelineError::Align {
                sentence: i,
                source,
            })
        })
        .collect()
}

/// Runs [`predict_corpus`] over each corpus and scores the projections
/// (micro within a language, macro across languages).
pub fn evaluate_with(
    normalizer: &(impl Normalizer + ?Sized),
    corpora: &[Corpus],
    cfg: &AlignConfig,
    fold_case: bool,
) -> Result<EvalReport, PipelineError> {
    let mut ev = Evaluator::new(fold_case);
    for c in corpora {
        let predictions = predict_corpus(normalizer, c, cfg)?;
        ev.add_corpus(c, &predictions)?;
    }
    Ok(ev.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Capability, LaiNormalizer, LangSupport};
    use crate::corpus::parse_corpus;
    use alloc::vec;

    /// Returns each sentence's gold target.
    struct Oracle(Vec<Corpus>);

    impl Normalizer for Oracle {
        fn capability(&self) -> Capability {
            Capability {
                name: "oracle".into(),
                langs: LangSupport::Any,
            }
        }

        fn normalize_batch(
            &self,
            lang: &str,
            sentences: &[String],
        ) -> Result<Vec<String>, BackendError> {
            let c = self.0.iter().find(|c| c.lang() == lang).unwrap();
            Ok(sentences
                .iter()
                .map(|src| {
                    c.sentences()
                        .iter()
                        .map(|s| s.to_pair())
                        .find(|p| &p.src == src)
                        .unwrap()
                        .tgt
                })
                .collect())
        }
    }

    fn corpora() -> Vec<Corpus> {
        vec![
            parse_corpus(
                "u\tyou\nr\tare\ngr8\tgreat\n\nwan\twanna\nna\t\ngo\tgo\n\nim\ti am\nok\tok\n",
                "en",
            )
            .unwrap(),
            parse_corpus("d\tdet\ner\ter\n", "da").unwrap(),
        ]
    }

    #[test]
    fn lai_scores_zero_and_oracle_scores_one() {
        let cs = corpora();
        let cfg = AlignConfig::default();
        let lai = evaluate_with(&LaiNormalizer, &cs, &cfg, true).unwrap();
        for r in lai.per_lang.values() {
            assert_eq!(r.err, Some(0.0));
        }
        let perfect = evaluate_with(&Oracle(cs.clone()), &cs, &cfg, true).unwrap();
        for r in perfect.per_lang.values() {
            assert_eq!(r.err, Some(1.0));
            assert_eq!(r.accuracy, Some(1.0));
        }
        assert_eq!(perfect.macro_err, Some(1.0));
    }
}
