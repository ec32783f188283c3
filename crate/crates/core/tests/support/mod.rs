//! Independent oracles and random generators shared by the property tests and
//! the acceptance run. Nothing here calls into the code under test except to
//! build inputs.

#![allow(dead_code)]

use lexnorm_core::{AnnotatedToken, Corpus, Sentence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain full-matrix edit distance over Unicode scalars.
pub fn lev_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Every monotone segmentation of `m` words over `n` tokens, as span lengths.
/// The first token's span is non-empty whenever `m > 0`.
pub fn segmentations(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let min = usize::from(i == 0 && left > 0);
        for len in min..=left {
            cur.push(len);
            rec(i + 1, n, left - len, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m == 0 {
        out.push(vec![0; n]);
    } else {
        rec(0, n, m, &mut Vec::new(), &mut out);
    }
    out
}

fn fold(s: &str, fold_case: bool) -> String {
    if fold_case {
        s.to_lowercase()
    } else {
        s.to_string()
    }
}

/// Cost of one segmentation, straight from the definition.
pub fn segmentation_cost(
    tokens: &[&str],
    words: &[&str],
    lens: &[usize],
    fold_case: bool,
    merge_penalty: usize,
) -> (usize, Vec<String>) {
    let mut at = 0;
    let mut cost = 0;
    let mut spans = Vec::new();
    for (t, &len) in tokens.iter().zip(lens) {
        let span = words[at..at + len].join(" ");
        at += len;
        cost += if len == 0 {
            t.chars().count() + merge_penalty
        } else {
            lev_oracle(&fold(t, fold_case), &fold(&span, fold_case))
        };
        spans.push(span);
    }
    (cost, spans)
}

/// Exhaustive minimum, with the stated tie order: cost, then fewer empty
/// spans, then lexicographically earliest span boundaries.
pub fn brute_force_align(
    tokens: &[&str],
    output: &str,
    fold_case: bool,
    merge_penalty: usize,
) -> (usize, Vec<String>) {
    let words: Vec<&str> = output.split_whitespace().collect();
    let mut best: Option<((usize, usize, Vec<usize>), Vec<String>)> = None;
    for lens in segmentations(tokens.len(), words.len()) {
        let (cost, spans) = segmentation_cost(tokens, &words, &lens, fold_case, merge_penalty);
        let empties = lens.iter().filter(|&&l| l == 0).count();
        let mut bounds = Vec::with_capacity(lens.len());
        let mut acc = 0;
        for l in &lens {
            acc += l;
            bounds.push(acc);
        }
        let key = (cost, empties, bounds);
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, spans));
        }
    }
    let ((cost, _, _), spans) = best.expect("at least one segmentation");
    (cost, spans)
}

/// Number of segmentations attaining the minimum cost.
pub fn minimizers(tokens: &[&str], output: &str, fold_case: bool, merge_penalty: usize) -> usize {
    let words: Vec<&str> = output.split_whitespace().collect();
    let costs: Vec<usize> = segmentations(tokens.len(), words.len())
        .iter()
        .map(|l| segmentation_cost(tokens, &words, l, fold_case, merge_penalty).0)
        .collect();
    let min = *costs.iter().min().unwrap();
    costs.iter().filter(|&&c| c == min).count()
}

pub fn random_string(rng: &mut ChaCha8Rng, alphabet: &[char], min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect()
}

pub const TOKEN_ALPHABET: &[char] = &[
    'a', 'b', 'c', 'd', 'e', 'o', 'u', 'x', 'A', 'E', '2', '8', 'æ', 'ß', 'é', 'ñ', '\'', '#', '@',
];

/// A random well-formed annotated sentence as (raw, norm) pairs.
pub fn random_annotations(rng: &mut ChaCha8Rng, max_tokens: usize) -> Vec<(String, String)> {
    let n = rng.random_range(1..=max_tokens);
    (0..n)
        .map(|i| {
            let raw = random_string(rng, TOKEN_ALPHABET, 1, 6);
            let norm = match rng.random_range(0..10) {
                0 if i > 0 => String::new(),
                1 | 2 => {
                    let k = rng.random_range(2..=3);
                    (0..k)
                        .map(|_| random_string(rng, TOKEN_ALPHABET, 1, 4))
                        .collect::<Vec<_>>()
                        .join(" ")
                }
                3..=5 => random_string(rng, TOKEN_ALPHABET, 1, 6),
                _ => raw.clone(),
            };
            (raw, norm)
        })
        .collect()
}

/// Canonical text of a corpus given as annotated sentences.
pub fn canonical_text(sentences: &[Vec<(String, String)>]) -> String {
    sentences
        .iter()
        .map(|s| {
            s.iter()
                .map(|(r, n)| format!("{r}\t{n}\n"))
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// A random well-formed corpus file and its canonical form. The file may use
/// CRLF, repeated or whitespace-only blank lines, leading and trailing blank
/// lines, and may omit the final newline.
pub fn random_corpus_file(rng: &mut ChaCha8Rng) -> (String, String, Vec<Vec<(String, String)>>) {
    let n = rng.random_range(0..=8);
    let sentences: Vec<Vec<(String, String)>> =
        (0..n).map(|_| random_annotations(rng, 7)).collect();
    let eol = if rng.random_bool(0.3) { "\r\n" } else { "\n" };
    let blank = |rng: &mut ChaCha8Rng| -> String {
        match rng.random_range(0..4) {
            0 => format!(" \t{eol}"),
            _ => eol.to_string(),
        }
    };
    let mut text = String::new();
    if rng.random_bool(0.2) {
        text.push_str(&blank(rng));
    }
    for (k, s) in sentences.iter().enumerate() {
        if k > 0 {
            for _ in 0..rng.random_range(1..=3) {
                text.push_str(&blank(rng));
            }
        }
        for (r, nrm) in s {
            text.push_str(&format!("{r}\t{nrm}{eol}"));
        }
    }
    if rng.random_bool(0.3) {
        text.push_str(&blank(rng));
    }
    if !sentences.is_empty() && rng.random_bool(0.2) {
        let trimmed = text.trim_end_matches(['\r', '\n']).len();
        // Only drop the final newline after a token line, never inside one.
        if text[..trimmed].ends_with(|c: char| c != ' ' && c != '\t') {
            text.truncate(trimmed);
        }
    }
    let canon = canonical_text(&sentences);
    (text, canon, sentences)
}

pub fn build_corpus(lang: &str, sentences: &[Vec<(String, String)>]) -> Corpus {
    Corpus::new(
        lang,
        sentences
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let toks = s
                    .iter()
                    .map(|(r, n)| AnnotatedToken::new(r.as_str(), n.as_str()).unwrap())
                    .collect();
                Sentence::new(toks, lang, i).unwrap()
            })
            .collect(),
    )
}

/// Raw counts recomputed from the definitions, one position at a time.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Recount {
    pub n_tokens: usize,
    pub n_correct: usize,
    pub n_needing_norm: usize,
    pub n_lai_correct: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

pub fn key(s: &str, fold_case: bool) -> String {
    let s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    fold(&s, fold_case)
}

pub fn recount(gold: &[String], raw: &[String], pred: &[String], fold_case: bool) -> Recount {
    let mut c = Recount::default();
    for i in 0..gold.len() {
        let g = key(&gold[i], fold_case);
        let r = key(&raw[i], fold_case);
        let p = key(&pred[i], fold_case);
        c.n_tokens += 1;
        if p == g {
            c.n_correct += 1;
        }
        if g == r {
            c.n_lai_correct += 1;
        } else {
            c.n_needing_norm += 1;
        }
        if p != r && p == g {
            c.tp += 1;
        }
        if p != r && p != g {
            c.fp += 1;
        }
        if p == r && g != r {
            c.fn_ += 1;
        }
    }
    c
}

/// A random (gold, raw, pred) triple of equal length over a tiny alphabet, so
/// that matches and case differences are frequent.
pub fn random_triple(rng: &mut ChaCha8Rng, len: usize) -> (Vec<String>, Vec<String>, Vec<String>) {
    const A: &[char] = &['a', 'b', 'A', 'B'];
    let mut gold = Vec::new();
    let mut raw = Vec::new();
    let mut pred = Vec::new();
    for _ in 0..len {
        let r = random_string(rng, A, 1, 2);
        let g = match rng.random_range(0..3) {
            0 => r.clone(),
            1 => r.to_lowercase(),
            _ => random_string(rng, A, 0, 2),
        };
        let p = match rng.random_range(0..4) {
            0 => r.clone(),
            1 => g.clone(),
            2 => format!(" {} ", g.to_uppercase()),
            _ => random_string(rng, A, 0, 2),
        };
        gold.push(g);
        raw.push(r);
        pred.push(p);
    }
    (gold, raw, pred)
}

/// A synthetic corpus for the gold round trip: identity, substitution,
/// 1-to-N and N-to-1 cases, each separated by identity anchors so every gold
/// assignment is the unique cost minimizer.
pub fn round_trip_corpus(seed: u64, n: usize) -> Corpus {
    const IDENT: &[&str] = &[
        "the", "house", "is", "green", "we", "went", "home", "today", "music", "coffee", "happy",
        "weekend",
    ];
    const SUB: &[(&str, &str)] = &[
        ("u", "you"),
        ("gr8", "great"),
        ("luv", "love"),
        ("pls", "please"),
        ("thx", "thanks"),
        ("2morrow", "tomorrow"),
        ("b4", "before"),
        ("ppl", "people"),
        ("soooo", "so"),
        ("nite", "night"),
    ];
    const SPLIT: &[(&str, &str)] = &[
        ("im", "i am"),
        ("dont", "do not"),
        ("lemme", "let me"),
        ("alot", "a lot"),
        ("cant", "can not"),
    ];
    const MERGE: &[(&str, &str, &str)] = &[
        ("wan", "na", "wanna"),
        ("gon", "na", "gonna"),
        ("every", "body", "everybody"),
        ("tomorr", "ow", "tomorrow"),
        ("some", "1", "someone"),
    ];
    let mut rng = rng(seed);
    let sentences: Vec<Vec<(String, String)>> = (0..n)
        .map(|_| {
            let mut s: Vec<(String, String)> = Vec::new();
            let parts = rng.random_range(1..=4);
            for p in 0..parts {
                if p > 0 || rng.random_bool(0.5) {
                    let w = IDENT[rng.random_range(0..IDENT.len())];
                    s.push((w.into(), w.into()));
                }
                match rng.random_range(0..4) {
                    0 => {
                        let w = IDENT[rng.random_range(0..IDENT.len())];
                        s.push((w.into(), w.into()));
                    }
                    1 => {
                        let (r, n) = SUB[rng.random_range(0..SUB.len())];
                        s.push((r.into(), n.into()));
                    }
                    2 => {
                        let (r, n) = SPLIT[rng.random_range(0..SPLIT.len())];
                        s.push((r.into(), n.into()));
                    }
                    _ => {
                        let (a, b, n) = MERGE[rng.random_range(0..MERGE.len())];
                        if s.is_empty() {
                            let w = IDENT[rng.random_range(0..IDENT.len())];
                            s.push((w.into(), w.into()));
                        }
                        s.push((a.into(), n.into()));
                        s.push((b.into(), String::new()));
                    }
                }
            }
            let w = IDENT[rng.random_range(0..IDENT.len())];
            s.push((w.into(), w.into()));
            s
        })
        .collect();
    build_corpus("en", &sentences)
}
