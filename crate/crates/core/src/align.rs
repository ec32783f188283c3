//! Projection of a normalized sentence back onto the raw token slots.
//!
//! The output words are cut into contiguous spans, one span per raw token, so
//! that the summed character edit distance between each token and its span is
//! minimal. A token may receive the empty span, which means its content was
//! merged into the token on its left; each such merge pays `merge_penalty` on
//! top of deleting the whole token.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

fn edit_distance(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignConfig {
    /// Lowercase both sides before costing.
    pub fold_case: bool,
    /// Added once per token that receives the empty span.
    pub merge_penalty: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            fold_case: true,
            merge_penalty: 1,
        }
    }
}

/// One output assignment per raw token; `""` marks a leftward merge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub assignments: Vec<String>,
    pub total_cost: usize,
}

impl AsRef<[String]> for Alignment {
    fn as_ref(&self) -> &[String] {
        &self.assignments
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignError {
    EmptyInput,
    LengthMismatch { tokens: usize, words: usize },
}

impl fmt::Display for AlignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlignError::EmptyInput => f.write_str("no raw tokens to align to"),
            AlignError::LengthMismatch { tokens, words } => {
                write!(f, "{tokens} raw tokens but {words} output words")
            }
        }
    }
}

impl core::error::Error for AlignError {}

fn prepare(s: &str, fold_case: bool) -> Vec<char> {
    if fold_case {
        s.chars().flat_map(char::to_lowercase).collect()
    } else {
        s.chars().collect()
    }
}

/// Dynamic-programming score: total cost, then number of empty spans.
type Score = (usize, usize);

/// Minimum-cost monotone segmentation of `output` onto `raw_tokens`.
///
/// Ties on cost are broken first by fewer empty spans, then by the earliest
/// span boundaries read left to right. When `output` has no words every token
/// receives `""`.
pub fn align_output<S: AsRef<str>>(
    raw_tokens: &[S],
    output: &str,
    cfg: &AlignConfig,
) -> Result<Alignment, AlignError> {
    let n = raw_tokens.len();
    if n == 0 {
        return Err(AlignError::EmptyInput);
    }
    let words: Vec<&str> = output.split_whitespace().collect();
    let m = words.len();
    let tokens: Vec<Vec<char>> = raw_tokens
        .iter()
        .map(|t| prepare(t.as_ref(), cfg.fold_case))
        .collect();
    let empty_cost = |i: usize| tokens[i].len() + cfg.merge_penalty;

    if m == 0 {
        let total_cost = (0..n).map(empty_cost).sum();
        return Ok(Alignment {
            assignments: vec![String::new(); n],
            total_cost,
        });
    }

    // span[i][j][k - j - 1]: cost of token i taking words j..k (k > j).
    let folded_words: Vec<Vec<char>> = words.iter().map(|w| prepare(w, cfg.fold_case)).collect();
    let mut span = vec![vec![Vec::new(); m]; n];
    let mut joined: Vec<char> = Vec::new();
    for j in 0..m {
        joined.clear();
        for (k, w) in folded_words.iter().enumerate().skip(j) {
            if k > j {
                joined.push(' ');
            }
            joined.extend_from_slice(w);
            for (i, tok) in tokens.iter().enumerate() {
                span[i][j].push(edit_distance(tok, &joined));
            }
        }
    }
    let span_cost = |i: usize, j: usize, k: usize| -> Score {
        if k == j {
            (empty_cost(i), 1)
        } else {
            (span[i][j][k - j - 1], 0)
        }
    };

    // best[i][j]: optimal score for tokens i.. over words j..; None = infeasible.
    let mut best: Vec<Vec<Option<Score>>> = vec![vec![None; m + 1]; n + 1];
    best[n][m] = Some((0, 0));
    for i in (0..n).rev() {
        for j in 0..=m {
            let first = if i == 0 { j + 1 } else { j };
            let mut acc: Option<Score> = None;
            for k in first..=m {
                if let Some(rest) = best[i + 1][k] {
                    let (c, e) = span_cost(i, j, k);
                    let cand = (c + rest.0, e + rest.1);
                    if acc.is_none_or(|a| cand < a) {
                        acc = Some(cand);
                    }
                }
            }
            best[i][j] = acc;
        }
    }

    let total = best[0][0].expect("a non-empty token list always admits a segmentation");
    let mut assignments = Vec::with_capacity(n);
    let mut j = 0;
    let mut remaining = total;
    for i in 0..n {
        let first = if i == 0 { j + 1 } else { j };
        let k = (first..=m)
            .find(|&k| {
                best[i + 1][k].is_some_and(|rest| {
                    let (c, e) = span_cost(i, j, k);
                    (c + rest.0, e + rest.1) == remaining
                })
            })
            .expect("optimal path is reconstructible");
        let (c, e) = span_cost(i, j, k);
        remaining = (remaining.0 - c, remaining.1 - e);
        assignments.push(words[j..k].join(" "));
        j = k;
    }

    Ok(Alignment {
        assignments,
        total_cost: total.0,
    })
}

/// Positional one-to-one assignment; requires as many output words as tokens.
///
/// Whenever the positional assignment attains the optimal cost it coincides
/// with [`align_output`], since it is the only segmentation with no empty spans.
pub fn fast_path_align<S: AsRef<str>>(
    raw_tokens: &[S],
    output: &str,
    cfg: &AlignConfig,
) -> Result<Alignment, AlignError> {
    let words: Vec<&str> = output.split_whitespace().collect();
    if words.len() != raw_tokens.len() {
        return Err(AlignError::LengthMismatch {
            tokens: raw_tokens.len(),
            words: words.len(),
        });
    }
    if raw_tokens.is_empty() {
        return Err(AlignError::EmptyInput);
    }
    let total_cost = raw_tokens
        .iter()
        .zip(&words)
        .map(|(t, w)| {
            edit_distance(
                &prepare(t.as_ref(), cfg.fold_case),
                &prepare(w, cfg.fold_case),
            )
        })
        .sum();
    Ok(Alignment {
        assignments: words.iter().map(|w| String::from(*w)).collect(),
        total_cost,
    })
}

/// [`align_output`] semantics, taking the positional shortcut only when it is
/// certified optimal (zero cost).
pub fn align<S: AsRef<str>>(
    raw_tokens: &[S],
    output: &str,
    cfg: &AlignConfig,
) -> Result<Alignment, AlignError> {
    match fast_path_align(raw_tokens, output, cfg) {
        Ok(a) if a.total_cost == 0 => Ok(a),
        _ => align_output(raw_tokens, output, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dp_oracle(a: &str, b: &str) -> usize {
        // Full-matrix Wagner-Fischer, kept separate from the rolling-row kernel.
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

    /// Enumerates every monotone segmentation; returns (score, assignments) of
    /// the minimum under (cost, empties, boundary vector).
    fn brute_force(tokens: &[&str], output: &str, cfg: &AlignConfig) -> (Score, Vec<String>) {
        let words: Vec<&str> = output.split_whitespace().collect();
        let n = tokens.len();
        let mut best: Option<(Score, Vec<usize>)> = None;
        let mut bounds = vec![0usize; n + 1];
        fn rec(
            i: usize,
            bounds: &mut Vec<usize>,
            tokens: &[&str],
            words: &[&str],
            cfg: &AlignConfig,
            best: &mut Option<(Score, Vec<usize>)>,
        ) {
            let (n, m) = (tokens.len(), words.len());
            if i == n {
                if bounds[n] != m {
                    return;
                }
                let mut score = (0, 0);
                for t in 0..n {
                    let span = words[bounds[t]..bounds[t + 1]].join(" ");
                    let (a, b) = if cfg.fold_case {
                        (tokens[t].to_lowercase(), span.to_lowercase())
                    } else {
                        (String::from(tokens[t]), span)
                    };
                    if bounds[t] == bounds[t + 1] {
                        score.0 += a.chars().count() + cfg.merge_penalty;
                        score.1 += 1;
                    } else {
                        score.0 += dp_oracle(&a, &b);
                    }
                }
                let key = (score, bounds.clone());
                if best.as_ref().is_none_or(|b| key < *b) {
                    *best = Some(key);
                }
                return;
            }
            let lo = bounds[i] + usize::from(i == 0 && m > 0);
            for k in lo..=m {
                if i + 1 == n && k != m {
                    continue;
                }
                bounds[i + 1] = k;
                rec(i + 1, bounds, tokens, words, cfg, best);
            }
        }
        rec(0, &mut bounds, tokens, &words, cfg, &mut best);
        let (score, b) = best.unwrap();
        let assignments = (0..n).map(|t| words[b[t]..b[t + 1]].join(" ")).collect();
        (score, assignments)
    }

    #[test]
    fn brute_force_agrees_on_examples() {
        let cfg = AlignConfig::default();
        for (toks, out) in [
            (&["wan", "na", "go"][..], "wanna go"),
            (&["a", "b"][..], "a b"),
            (&["x", "y", "z"][..], "xy"),
            (&["ok"][..], ""),
        ] {
            let (score, assignments) = brute_force(toks, out, &cfg);
            let a = align_output(toks, out, &cfg).unwrap();
            assert_eq!(a.total_cost, score.0);
            assert_eq!(a.assignments, assignments);
        }
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(dp_oracle("kitten", "sitting"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("sitting", "kitten"), 3);
        assert_eq!(levenshtein("ærø", "aro"), 2);
    }

    #[test]
    fn identity_alignment() {
        let a = align_output(&["a", "b"], "a b", &AlignConfig::default()).unwrap();
        assert_eq!(a.assignments, vec!["a", "b"]);
        assert_eq!(a.total_cost, 0);
    }

    #[test]
    fn split_and_merge_examples() {
        let cfg = AlignConfig::default();
        // {i am | so | happy} and {i | am so | happy} both cost 5; the earlier
        // first boundary decides.
        let a = align_output(&["im", "soooo", "happy"], "i am so happy", &cfg).unwrap();
        assert_eq!(a.total_cost, 5);
        assert_eq!(
            a.assignments,
            brute_force(&["im", "soooo", "happy"], "i am so happy", &cfg).1
        );
        assert_eq!(a.assignments, vec!["i", "am so", "happy"]);
        let a = align_output(&["wan", "na", "go"], "wanna go", &cfg).unwrap();
        assert_eq!(a.assignments, vec!["wanna", "", "go"]);
        assert_eq!(a.total_cost, 2 + 2 + 1);
    }

    #[test]
    fn empty_output_deletes_everything() {
        let cfg = AlignConfig::default();
        let a = align_output(&["ok"], "", &cfg).unwrap();
        assert_eq!(a.assignments, vec![""]);
        assert_eq!(a.total_cost, 2 + 1);
        let a = align_output(
            &["ok", "x"],
            "  \t ",
            &AlignConfig {
                merge_penalty: 0,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(a.assignments, vec!["", ""]);
        assert_eq!(a.total_cost, 3);
    }

    #[test]
    fn errors() {
        let none: [&str; 0] = [];
        assert_eq!(
            align_output(&none, "a", &AlignConfig::default()),
            Err(AlignError::EmptyInput)
        );
        assert_eq!(
            fast_path_align(&["a"], "a b", &AlignConfig::default()),
            Err(AlignError::LengthMismatch {
                tokens: 1,
                words: 2
            })
        );
    }

    #[test]
    fn case_folding_controls_cost() {
        let folded = align_output(&["YOU"], "you", &AlignConfig::default()).unwrap();
        assert_eq!(folded.total_cost, 0);
        let exact = AlignConfig {
            fold_case: false,
            ..AlignConfig::default()
        };
        assert_eq!(align_output(&["YOU"], "you", &exact).unwrap().total_cost, 3);
    }

    #[test]
    fn ties_prefer_fewer_merges_then_left_boundaries() {
        let cfg = AlignConfig {
            fold_case: true,
            merge_penalty: 0,
        };
        // ["x","y"] onto "a b c": {a | b c} and {a b | c} both cost 1+3;
        // the leftmost first boundary wins.
        let a = align_output(&["x", "y"], "a b c", &cfg).unwrap();
        assert_eq!(a.assignments, vec!["a", "b c"]);
        // With no penalty, ["ab","b"] onto "ab": merge costs 1 either way;
        // the single empty span is the only option.
        let a = align_output(&["ab", "b"], "ab", &cfg).unwrap();
        assert_eq!(a.assignments, vec!["ab", ""]);
    }

    #[test]
    fn fast_path_matches_positional() {
        let cfg = AlignConfig::default();
        assert_eq!(
            fast_path_align(&["u", "r"], "you are", &cfg)
                .unwrap()
                .assignments,
            vec!["you", "are"]
        );
        assert_eq!(
            fast_path_align(&["a"], "a", &cfg).unwrap().assignments,
            vec!["a"]
        );
        // Disagreement falls back to the full search.
        let a = align(&["wan", "na", "go"], "wanna go now", &cfg).unwrap();
        assert_eq!(
            a,
            align_output(&["wan", "na", "go"], "wanna go now", &cfg).unwrap()
        );
    }
}
