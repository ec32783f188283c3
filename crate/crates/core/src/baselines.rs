//! Word-level reference normalizers: leave-as-is and most-frequent-replacement.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::corpus::{gold_word_assignments, Corpus};

/// Leave-as-is: the identity normalizer.
pub fn lai<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens.iter().map(|t| String::from(t.as_ref())).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub norm: String,
    pub count: u64,
}

/// Training-time normalizations per raw word, each list ordered so that the
/// head is the preferred replacement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<Candidate>>,
    fold_case: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LexiconError {
    ZeroCount { raw: String, norm: String },
    EmptyRaw,
}

impl fmt::Display for LexiconError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LexiconError::ZeroCount { raw, norm } => {
                write!(f, "entry {raw:?} -> {norm:?} has a zero count")
            }
            LexiconError::EmptyRaw => f.write_str("lexicon entry with empty raw word"),
        }
    }
}

impl core::error::Error for LexiconError {}

/// Most frequent first, then the identity normalization, then lexicographic.
fn tie_order(raw: &str, a: &Candidate, b: &Candidate) -> Ordering {
    b.count
        .cmp(&a.count)
        .then_with(|| (b.norm == raw).cmp(&(a.norm == raw)))
        .then_with(|| a.norm.cmp(&b.norm))
}

fn key(s: &str, fold_case: bool) -> String {
    if fold_case {
        s.to_lowercase()
    } else {
        String::from(s)
    }
}

impl Lexicon {
    /// Builds a lexicon from `(raw, norm, count)` triples; repeated pairs are
    /// summed.
    pub fn from_entries<I, R, N>(entries: I, fold_case: bool) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = (R, N, u64)>,
        R: AsRef<str>,
        N: AsRef<str>,
    {
        let mut b = LexiconBuilder::new(fold_case);
        for (raw, norm, count) in entries {
            let (raw, norm) = (raw.as_ref(), norm.as_ref());
            if raw.is_empty() {
                return Err(LexiconError::EmptyRaw);
            }
            if count == 0 {
                return Err(LexiconError::ZeroCount {
                    raw: raw.into(),
                    norm: norm.into(),
                });
            }
            b.add(raw, norm, count);
        }
        Ok(b.build())
    }

    pub fn fold_case(&self) -> bool {
        self.fold_case
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidates(&self, raw: &str) -> Option<&[Candidate]> {
        self.entries
            .get(&key(raw, self.fold_case))
            .map(Vec::as_slice)
    }

    pub fn head(&self, raw: &str) -> Option<&str> {
        self.candidates(raw)
            .and_then(<[Candidate]>::first)
            .map(|c| c.norm.as_str())
    }

    /// All `(raw, candidate)` pairs: raw ascending, candidates in tie order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Candidate)> {
        self.entries
            .iter()
            .flat_map(|(raw, cands)| cands.iter().map(move |c| (raw.as_str(), c)))
    }
}

#[derive(Clone, Debug)]
pub struct LexiconBuilder {
    counts: BTreeMap<String, BTreeMap<String, u64>>,
    fold_case: bool,
}

impl LexiconBuilder {
    pub fn new(fold_case: bool) -> Self {
        LexiconBuilder {
            counts: BTreeMap::new(),
            fold_case,
        }
    }

    pub fn add(&mut self, raw: &str, norm: &str, count: u64) {
        *self
            .counts
            .entry(key(raw, self.fold_case))
            .or_default()
            .entry(key(norm, self.fold_case))
            .or_default() += count;
    }

    /// Records every token occurrence of `corpus`.
    pub fn add_corpus(&mut self, corpus: &Corpus) {
        for s in corpus.sentences() {
            for (tok, norm) in s.tokens().iter().zip(gold_word_assignments(s)) {
                self.add(tok.raw(), &norm, 1);
            }
        }
    }

    pub fn build(self) -> Lexicon {
        let entries = self
            .counts
            .into_iter()
            .map(|(raw, norms)| {
                let mut cands: Vec<Candidate> = norms
                    .into_iter()
                    .map(|(norm, count)| Candidate { norm, count })
                    .collect();
                cands.sort_by(|a, b| tie_order(&raw, a, b));
                (raw, cands)
            })
            .collect();
        Lexicon {
            entries,
            fold_case: self.fold_case,
        }
    }
}

pub fn build_lexicon(train: &Corpus, fold_case: bool) -> Lexicon {
    let mut b = LexiconBuilder::new(fold_case);
    b.add_corpus(train);
    b.build()
}

/// Most-frequent replacement: each token becomes its lexicon head, unseen
/// tokens are left as they are.
pub fn mfr<S: AsRef<str>>(tokens: &[S], lex: &Lexicon) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            String::from(lex.head(t).unwrap_or(t))
        })
        .collect()
}
