//! Intrinsic word-level scoring: accuracy, error reduction rate (ERR) against
//! the leave-as-is baseline, and precision/recall over normalization decisions.
//!
//! Counts are summed per language (micro) and ERR is averaged across languages
//! (macro). Metrics whose denominator is zero are `None`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign};

use crate::corpus::{gold_word_assignments, Corpus};
use crate::text::comparison_key;

/// Equality after whitespace-run collapsing and optional lowercasing.
pub fn compare(a: &str, b: &str, fold_case: bool) -> bool {
    comparison_key(a, fold_case) == comparison_key(b, fold_case)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricError {
    LengthMismatch {
        expected: usize,
        found: usize,
    },
    EmptyInput,
    /// Prediction shape disagrees with the corpus at `sentence`; when the
    /// sentence counts differ, `sentence` is the first missing/extra index.
    ShapeMismatch {
        sentence: usize,
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::LengthMismatch { expected, found } => {
                write!(f, "expected {expected} positions, found {found}")
            }
            MetricError::EmptyInput => f.write_str("nothing to score"),
            MetricError::ShapeMismatch {
                sentence,
                expected,
                found,
            } => write!(
                f,
                "sentence {sentence}: expected {expected} predictions, found {found}"
            ),
        }
    }
}

impl core::error::Error for MetricError {}

fn check_len(expected: usize, found: usize) -> Result<(), MetricError> {
    if expected == found {
        Ok(())
    } else {
        Err(MetricError::LengthMismatch { expected, found })
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Per-position decision counts; additive across sentences and corpora.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub n_tokens: usize,
    pub n_correct: usize,
    /// Positions whose gold differs from the raw token.
    pub n_needing_norm: usize,
    /// Positions where leaving the raw token is already correct.
    pub n_lai_correct: usize,
    /// Changed by the system and matching gold.
    pub tp: usize,
    /// Changed by the system but not matching gold.
    pub fp: usize,
    /// Left unchanged where gold needed a change.
    pub fn_: usize,
}

impl EvalCounts {
    pub fn from_positions<G, R, P>(
        gold: &[G],
        raw: &[R],
        pred: &[P],
        fold_case: bool,
    ) -> Result<Self, MetricError>
    where
        G: AsRef<str>,
        R: AsRef<str>,
        P: AsRef<str>,
    {
        check_len(gold.len(), raw.len())?;
        check_len(gold.len(), pred.len())?;
        let mut c = EvalCounts::default();
        for ((g, r), p) in gold.iter().zip(raw).zip(pred) {
            c.record(g.as_ref(), r.as_ref(), p.as_ref(), fold_case);
        }
        Ok(c)
    }

    fn record(&mut self, gold: &str, raw: &str, pred: &str, fold_case: bool) {
        let g = comparison_key(gold, fold_case);
        let r = comparison_key(raw, fold_case);
        let p = comparison_key(pred, fold_case);
        self.n_tokens += 1;
        let correct = p == g;
        let changed = p != r;
        let needs = g != r;
        self.n_correct += usize::from(correct);
        if needs {
            self.n_needing_norm += 1;
        } else {
            self.n_lai_correct += 1;
        }
        match (changed, correct) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, _) if needs => self.fn_ += 1,
            (false, _) => {}
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.n_correct, self.n_tokens)
    }

    pub fn lai_accuracy(&self) -> Option<f64> {
        ratio(self.n_lai_correct, self.n_tokens)
    }

    /// `(acc_sys - acc_lai) / (1 - acc_lai)`, computed on integer counts.
    pub fn err(&self) -> Option<f64> {
        if self.n_needing_norm == 0 {
            return None;
        }
        let gain = self.n_correct as f64 - self.n_lai_correct as f64;
        Some(gain / self.n_needing_norm as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }
}

impl Add for EvalCounts {
    type Output = EvalCounts;

    fn add(mut self, rhs: EvalCounts) -> EvalCounts {
        self += rhs;
        self
    }
}

impl AddAssign for EvalCounts {
    fn add_assign(&mut self, rhs: EvalCounts) {
        self.n_tokens += rhs.n_tokens;
        self.n_correct += rhs.n_correct;
        self.n_needing_norm += rhs.n_needing_norm;
        self.n_lai_correct += rhs.n_lai_correct;
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

pub fn word_accuracy<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    fold_case: bool,
) -> Result<f64, MetricError> {
    check_len(gold.len(), pred.len())?;
    if gold.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let hits = gold
        .iter()
        .zip(pred)
        .filter(|(g, p)| compare(g.as_ref(), p.as_ref(), fold_case))
        .count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Error reduction rate; `None` when the raw tokens are already all correct.
pub fn err<G, R, P>(
    gold: &[G],
    raw: &[R],
    pred: &[P],
    fold_case: bool,
) -> Result<Option<f64>, MetricError>
where
    G: AsRef<str>,
    R: AsRef<str>,
    P: AsRef<str>,
{
    let acc_sys = word_accuracy(gold, pred, fold_case)?;
    let acc_lai = word_accuracy(gold, raw, fold_case)?;
    if acc_lai == 1.0 {
        return Ok(None);
    }
    Ok(Some((acc_sys - acc_lai) / (1.0 - acc_lai)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionRecall {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn precision_recall<G, R, P>(
    gold: &[G],
    raw: &[R],
    pred: &[P],
    fold_case: bool,
) -> Result<PrecisionRecall, MetricError>
where
    G: AsRef<str>,
    R: AsRef<str>,
    P: AsRef<str>,
{
    let c = EvalCounts::from_positions(gold, raw, pred, fold_case)?;
    Ok(PrecisionRecall {
        precision: c.precision(),
        recall: c.recall(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LangReport {
    pub accuracy: Option<f64>,
    pub err: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub counts: EvalCounts,
}

impl From<EvalCounts> for LangReport {
    fn from(counts: EvalCounts) -> Self {
        LangReport {
            accuracy: counts.accuracy(),
            err: counts.err(),
            precision: counts.precision(),
            recall: counts.recall(),
            counts,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub per_lang: BTreeMap<String, LangReport>,
    /// Mean of the defined per-language ERR values.
    pub macro_err: Option<f64>,
}

impl EvalReport {
    pub fn from_counts(counts: &BTreeMap<String, EvalCounts>) -> Self {
        let per_lang: BTreeMap<String, LangReport> = counts
            .iter()
            .map(|(lang, c)| (lang.clone(), LangReport::from(*c)))
            .collect();
        let defined: Vec<f64> = per_lang.values().filter_map(|r| r.err).collect();
        let macro_err =
            (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        EvalReport {
            per_lang,
            macro_err,
        }
    }

    /// Token counts pooled over every language.
    pub fn pooled(&self) -> EvalCounts {
        self.per_lang
            .values()
            .fold(EvalCounts::default(), |acc, r| acc + r.counts)
    }
}

/// Accumulates counts over any number of corpora, keyed by corpus language.
#[derive(Clone, Debug)]
pub struct Evaluator {
    fold_case: bool,
    counts: BTreeMap<String, EvalCounts>,
}

impl Evaluator {
    pub fn new(fold_case: bool) -> Self {
        Evaluator {
            fold_case,
            counts: BTreeMap::new(),
        }
    }

    /// Scores one per-token prediction list per sentence of `gold`.
    pub fn add_corpus<P, S>(&mut self, gold: &Corpus, predictions: &[P]) -> Result<(), MetricError>
    where
        P: AsRef<[S]>,
        S: AsRef<str>,
    {
        if predictions.len() != gold.len() {
            return Err(MetricError::ShapeMismatch {
                sentence: predictions.len().min(gold.len()),
                expected: gold.len(),
                found: predictions.len(),
            });
        }
        let mut total = EvalCounts::default();
        for (idx, (sentence, pred)) in gold.sentences().iter().zip(predictions).enumerate() {
            let pred = pred.as_ref();
            let raw = sentence.raw_tokens();
            let gold_norms = gold_word_assignments(sentence);
            if pred.len() != raw.len() {
                return Err(MetricError::ShapeMismatch {
                    sentence: idx,
                    expected: raw.len(),
                    found: pred.len(),
                });
            }
            total += EvalCounts::from_positions(&gold_norms, &raw, pred, self.fold_case)?;
        }
        *self.counts.entry(String::from(gold.lang())).or_default() += total;
        Ok(())
    }

    pub fn counts(&self) -> &BTreeMap<String, EvalCounts> {
        &self.counts
    }

    pub fn report(&self) -> EvalReport {
        EvalReport::from_counts(&self.counts)
    }
}

pub fn evaluate_corpus<P, S>(
    gold: &Corpus,
    predictions: &[P],
    fold_case: bool,
) -> Result<EvalReport, MetricError>
where
    P: AsRef<[S]>,
    S: AsRef<str>,
{
    let mut ev = Evaluator::new(fold_case);
    ev.add_corpus(gold, predictions)?;
    Ok(ev.report())
}
