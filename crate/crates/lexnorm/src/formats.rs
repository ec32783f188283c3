//! On-disk formats: sentence-pair JSON lines, lexicon TSV, evaluation
//! reports, model checkpoints, and atomic file replacement.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use lexnorm_core::baselines::{Lexicon, LexiconError};
use lexnorm_core::metrics::{EvalCounts, EvalReport};
use lexnorm_core::seq2seq::{Dims, ModelParams, Seq2SeqError, ToyModel, Vocab};
use lexnorm_core::SentencePair;
use serde::{Deserialize, Serialize};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug)]
pub enum FormatError {
    Json {
        line: usize,
        source: serde_json::Error,
    },
    LexiconLine {
        line: usize,
        detail: String,
    },
    Lexicon(LexiconError),
    Checkpoint(String),
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Json { line, source } => write!(f, "line {line}: {source}"),
            FormatError::LexiconLine { line, detail } => write!(f, "line {line}: {detail}"),
            FormatError::Lexicon(e) => write!(f, "{e}"),
            FormatError::Checkpoint(detail) => write!(f, "bad checkpoint: {detail}"),
        }
    }
}

impl std::error::Error for FormatError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            FormatError::Json { source, .. } => Some(source),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    lang: String,
    sid: usize,
    src: String,
    tgt: String,
}

/// One JSON object per line, fields in the order lang, sid, src, tgt.
pub fn write_pairs(pairs: &[SentencePair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let rec = PairRecord {
            lang: p.lang.clone(),
            sid: p.sid,
            src: p.src.clone(),
            tgt: p.tgt.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("pair records always serialize"));
        out.push('\n');
    }
    out
}

/// Blank lines are skipped.
pub fn read_pairs(text: &str) -> Result<Vec<SentencePair>, FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rec: PairRecord = serde_json::from_str(l).map_err(|source| FormatError::Json {
                line: i + 1,
                source,
            })?;
            Ok(SentencePair {
                lang: rec.lang,
                sid: rec.sid,
                src: rec.src,
                tgt: rec.tgt,
            })
        })
        .collect()
}

/// `RAW<TAB>NORM<TAB>COUNT` per candidate, raw forms sorted, candidates in
/// rank order.
pub fn write_lexicon(lex: &Lexicon) -> String {
    let mut out = String::new();
    for (raw, cand) in lex.iter() {
        out.push_str(raw);
        out.push('\t');
        out.push_str(&cand.norm);
        out.push('\t');
        out.push_str(&cand.count.to_string());
        out.push('\n');
    }
    out
}

pub fn read_lexicon(text: &str, fold_case: bool) -> Result<Lexicon, FormatError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: &str| FormatError::LexiconLine {
            line: i + 1,
            detail: detail.into(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [raw, norm, count] = fields[..] else {
            return Err(bad(&format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        };
        let count: u64 = count
            .parse()
            .map_err(|_| bad("count is not a non-negative integer"))?;
        entries.push((raw.to_string(), norm.to_string(), count));
    }
    Lexicon::from_entries(entries, fold_case).map_err(FormatError::Lexicon)
}

#[derive(Serialize)]
struct CountsRecord {
    n_tokens: usize,
    n_correct: usize,
    n_needing_norm: usize,
    n_lai_correct: usize,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
}

impl From<&EvalCounts> for CountsRecord {
    fn from(c: &EvalCounts) -> Self {
        CountsRecord {
            n_tokens: c.n_tokens,
            n_correct: c.n_correct,
            n_needing_norm: c.n_needing_norm,
            n_lai_correct: c.n_lai_correct,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        }
    }
}

#[derive(Serialize)]
struct LangRecord {
    accuracy: Option<f64>,
    lai_accuracy: Option<f64>,
    err: Option<f64>,
    precision: Option<f64>,
    recall: Option<f64>,
    counts: CountsRecord,
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    backend: &'a str,
    fold_case: bool,
    languages: BTreeMap<&'a str, LangRecord>,
    macro_err: Option<f64>,
}

/// Pretty JSON with sorted language keys; undefined rates are `null`.
pub fn report_json(report: &EvalReport, backend: &str, fold_case: bool) -> String {
    let mut s = serde_json::to_string_pretty(&report_value(report, backend, fold_case))
        .expect("reports always serialize");
    s.push('\n');
    s
}

/// The document written by [`report_json`].
pub fn report_value(report: &EvalReport, backend: &str, fold_case: bool) -> serde_json::Value {
    let languages = report
        .per_lang
        .iter()
        .map(|(lang, r)| {
            (
                lang.as_str(),
                LangRecord {
                    accuracy: r.accuracy,
                    lai_accuracy: r.counts.lai_accuracy(),
                    err: r.err,
                    precision: r.precision,
                    recall: r.recall,
                    counts: CountsRecord::from(&r.counts),
                },
            )
        })
        .collect();
    let rec = ReportRecord {
        backend,
        fold_case,
        languages,
        macro_err: report.macro_err,
    };
    serde_json::to_value(&rec).expect("reports always serialize")
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Fixed-width table, one row per language plus the macro ERR.
pub fn report_table(report: &EvalReport) -> String {
    let mut out = format!(
        "{:<8}{:>8}{:>10}{:>10}{:>10}{:>10}{:>10}\n",
        "lang", "tokens", "accuracy", "lai", "err", "prec", "recall"
    );
    for (lang, r) in &report.per_lang {
        out.push_str(&format!(
            "{:<8}{:>8}{:>10}{:>10}{:>10}{:>10}{:>10}\n",
            lang,
            r.counts.n_tokens,
            cell(r.accuracy),
            cell(r.counts.lai_accuracy()),
            cell(r.err),
            cell(r.precision),
            cell(r.recall)
        ));
    }
    out.push_str(&format!("macro err {}\n", cell(report.macro_err)));
    out
}

#[derive(Serialize, Deserialize)]
struct DimsRecord {
    vocab: usize,
    embed: usize,
    hidden: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    format_version: u32,
    langs: Vec<String>,
    /// One single-character string per vocabulary character, in id order.
    chars: Vec<String>,
    dims: DimsRecord,
    params: Vec<f64>,
}

pub fn write_checkpoint(model: &ToyModel) -> String {
    let dims = model.params().dims();
    let rec = CheckpointRecord {
        format_version: CHECKPOINT_VERSION,
        langs: model.vocab().langs().map(Into::into).collect(),
        chars: model.vocab().chars().map(String::from).collect(),
        dims: DimsRecord {
            vocab: dims.vocab,
            embed: dims.embed,
            hidden: dims.hidden,
        },
        params: model.params().as_slice().to_vec(),
    };
    let mut s = serde_json::to_string(&rec).expect("finite parameters always serialize");
    s.push('\n');
    s
}

pub fn read_checkpoint(text: &str) -> Result<ToyModel, FormatError> {
    let rec: CheckpointRecord =
        serde_json::from_str(text).map_err(|e| FormatError::Checkpoint(e.to_string()))?;
    if rec.format_version != CHECKPOINT_VERSION {
        return Err(FormatError::Checkpoint(format!(
            "unsupported format_version {} (expected {CHECKPOINT_VERSION})",
            rec.format_version
        )));
    }
    let mut chars = Vec::with_capacity(rec.chars.len());
    for s in &rec.chars {
        let mut it = s.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => chars.push(c),
            _ => {
                return Err(FormatError::Checkpoint(format!(
                    "vocabulary entry {s:?} is not one character"
                )))
            }
        }
    }
    let vocab = Vocab::new(rec.langs, chars);
    let dims = Dims {
        vocab: rec.dims.vocab,
        embed: rec.dims.embed,
        hidden: rec.dims.hidden,
    };
    let params = ModelParams::from_flat(dims, rec.params).map_err(checkpoint_err)?;
    ToyModel::new(vocab, params).map_err(checkpoint_err)
}

fn checkpoint_err(e: Seq2SeqError) -> FormatError {
    FormatError::Checkpoint(e.to_string())
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
