//! Word-aligned normalization corpora and the sentence pairs built from them.
//!
//! A corpus file holds one `RAW<TAB>NORM` line per token and a blank line after
//! each sentence. A normalization with spaces (`im<TAB>i am`) is a 1-to-N split;
//! an empty normalization marks a token whose content was merged into the
//! preceding token's normalization (`wan<TAB>wanna`, `na<TAB>`).

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::text::is_single_spaced;

/// One raw token with its gold normalization.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AnnotatedToken {
    raw: String,
    norm: String,
}

impl AnnotatedToken {
    /// Validates and builds a token. `raw` must be non-empty without whitespace;
    /// `norm` may be empty or contain single-space separated words.
    pub fn new(raw: impl Into<String>, norm: impl Into<String>) -> Result<Self, TokenError> {
        let raw = raw.into();
        let norm = norm.into();
        if raw.is_empty() {
            return Err(TokenError::EmptyRaw);
        }
        if raw.chars().any(char::is_whitespace) {
            return Err(TokenError::WhitespaceInRaw);
        }
        if !is_single_spaced(&norm) {
            return Err(TokenError::IrregularNorm);
        }
        Ok(AnnotatedToken { raw, norm })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn norm(&self) -> &str {
        &self.norm
    }

    /// True for the continuation token of an N-to-1 merge.
    pub fn is_merge_continuation(&self) -> bool {
        self.norm.is_empty()
    }
}

/// Reasons an individual token is rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenError {
    EmptyRaw,
    WhitespaceInRaw,
    IrregularNorm,
}

impl fmt::Display for TokenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenError::EmptyRaw => f.write_str("raw token is empty"),
            TokenError::WhitespaceInRaw => f.write_str("raw token contains whitespace"),
            TokenError::IrregularNorm => {
                f.write_str("normalization has leading, trailing, repeated or non-space whitespace")
            }
        }
    }
}

impl core::error::Error for TokenError {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<AnnotatedToken>,
    lang: String,
    sid: usize,
}

impl Sentence {
    /// Builds a sentence, enforcing that it is non-empty and does not open with
    /// a merge continuation.
    pub fn new(
        tokens: Vec<AnnotatedToken>,
        lang: impl Into<String>,
        sid: usize,
    ) -> Result<Self, SentenceError> {
        match tokens.first() {
            None => Err(SentenceError::Empty),
            Some(t) if t.is_merge_continuation() => Err(SentenceError::LeadingMergeContinuation),
            Some(_) => Ok(Sentence {
                tokens,
                lang: lang.into(),
                sid,
            }),
        }
    }

    pub fn tokens(&self) -> &[AnnotatedToken] {
        &self.tokens
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn sid(&self) -> usize {
        self.sid
    }

    pub fn raw_tokens(&self) -> Vec<&str> {
        self.tokens.iter().map(AnnotatedToken::raw).collect()
    }

    /// The translation-framing view of this sentence.
    pub fn to_pair(&self) -> SentencePair {
        let src = join_nonempty(self.tokens.iter().map(AnnotatedToken::raw));
        let tgt = join_nonempty(self.tokens.iter().map(AnnotatedToken::norm));
        SentencePair {
            lang: self.lang.clone(),
            sid: self.sid,
            src,
            tgt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SentenceError {
    Empty,
    LeadingMergeContinuation,
}

impl fmt::Display for SentenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SentenceError::Empty => f.write_str("sentence has no tokens"),
            SentenceError::LeadingMergeContinuation => {
                f.write_str("first token of a sentence has an empty normalization")
            }
        }
    }
}

impl core::error::Error for SentenceError {}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    lang: String,
    source_path: String,
}

impl Corpus {
    /// Builds a corpus; sentences are re-tagged with the corpus language and
    /// renumbered in order.
    pub fn new(lang: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        let lang = lang.into();
        let sentences = sentences
            .into_iter()
            .enumerate()
            .map(|(sid, mut s)| {
                s.sid = sid;
                s.lang.clone_from(&lang);
                s
            })
            .collect();
        Corpus {
            sentences,
            lang,
            source_path: String::new(),
        }
    }

    pub fn with_source(mut self, source_path: impl Into<String>) -> Self {
        self.source_path = source_path.into();
        self
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }
}

/// The MT framing of one sentence: raw source string and normalized target.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SentencePair {
    pub lang: String,
    pub sid: usize,
    pub src: String,
    pub tgt: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// A non-blank line did not have exactly two tab-separated fields.
    MalformedLine {
        fields: usize,
    },
    EmptyRawToken,
    WhitespaceInRaw,
    IrregularNorm,
    LeadingMergeContinuation,
}

/// A corpus parse failure at a 1-based line number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match self.kind {
            ParseErrorKind::MalformedLine { fields } => {
                write!(f, "expected 2 tab-separated fields, found {fields}")
            }
            ParseErrorKind::EmptyRawToken => f.write_str("empty raw token"),
            ParseErrorKind::WhitespaceInRaw => f.write_str("raw token contains whitespace"),
            ParseErrorKind::IrregularNorm => f.write_str("irregular whitespace in normalization"),
            ParseErrorKind::LeadingMergeContinuation => {
                f.write_str("sentence starts with an empty normalization")
            }
        }
    }
}

impl core::error::Error for ParseError {}

/// Parses a corpus file. Lines may end in `\n` or `\r\n`; whitespace-only lines
/// count as blank, and runs of blank lines separate sentences.
pub fn parse_corpus(text: &str, lang: &str) -> Result<Corpus, ParseError> {
    let mut sentences = Vec::new();
    let mut current: Vec<AnnotatedToken> = Vec::new();

    let flush = |tokens: &mut Vec<AnnotatedToken>, sentences: &mut Vec<Sentence>| {
        if !tokens.is_empty() {
            let sid = sentences.len();
            // A leading continuation is caught per line below.
            let s = Sentence::new(core::mem::take(tokens), lang, sid)
                .expect("sentence validated while parsing");
            sentences.push(s);
        }
    };

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            flush(&mut current, &mut sentences);
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(ParseError {
                line: lineno,
                kind: ParseErrorKind::MalformedLine {
                    fields: fields.len(),
                },
            });
        }
        let token = AnnotatedToken::new(fields[0], fields[1]).map_err(|e| ParseError {
            line: lineno,
            kind: match e {
                TokenError::EmptyRaw => ParseErrorKind::EmptyRawToken,
                TokenError::WhitespaceInRaw => ParseErrorKind::WhitespaceInRaw,
                TokenError::IrregularNorm => ParseErrorKind::IrregularNorm,
            },
        })?;
        if current.is_empty() && token.is_merge_continuation() {
            return Err(ParseError {
                line: lineno,
                kind: ParseErrorKind::LeadingMergeContinuation,
            });
        }
        current.push(token);
    }
    flush(&mut current, &mut sentences);

    Ok(Corpus {
        sentences,
        lang: lang.into(),
        source_path: String::new(),
    })
}

/// Canonical text form: one blank line between sentences, trailing newline,
/// empty string for an empty corpus.
pub fn serialize_corpus(c: &Corpus) -> String {
    let mut out = String::new();
    for (i, s) in c.sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for t in &s.tokens {
            out.push_str(&t.raw);
            out.push('\t');
            out.push_str(&t.norm);
            out.push('\n');
        }
    }
    out
}

pub fn to_sentence_pairs(c: &Corpus) -> Vec<SentencePair> {
    c.sentences.iter().map(Sentence::to_pair).collect()
}

/// One gold normalization per raw token; merge continuations yield `""`.
pub fn gold_word_assignments(s: &Sentence) -> Vec<String> {
    s.tokens.iter().map(|t| t.norm.clone()).collect()
}

fn join_nonempty<'a>(parts: impl Iterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for p in parts.filter(|p| !p.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(p);
    }
    out
}
