//! Seeded spelling-noise channels for manufacturing (noisy, clean) pairs.
//!
//! Every sentence draws from its own ChaCha8 stream selected by the sentence
//! id, so corrupting a corpus in parallel or in any order yields the same bytes
//! as corrupting it sequentially.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::SentencePair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    CharSwap,
    CharDrop,
    CharDup,
    KeyboardSub,
    VowelDrop,
    CaseFlip,
    Elongate,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::CharSwap,
        Channel::CharDrop,
        Channel::CharDup,
        Channel::KeyboardSub,
        Channel::VowelDrop,
        Channel::CaseFlip,
        Channel::Elongate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::CharSwap => "char_swap",
            Channel::CharDrop => "char_drop",
            Channel::CharDup => "char_dup",
            Channel::KeyboardSub => "keyboard_sub",
            Channel::VowelDrop => "vowel_drop",
            Channel::CaseFlip => "case_flip",
            Channel::Elongate => "elongate",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = NoiseSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| NoiseSpecError::UnknownChannel(s.into()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpecError {
    UnknownChannel(String),
    RateOutOfRange { channel: Channel, rate: f64 },
    Malformed(String),
}

impl fmt::Display for NoiseSpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpecError::UnknownChannel(name) => write!(f, "unknown noise channel {name:?}"),
            NoiseSpecError::RateOutOfRange { channel, rate } => {
                write!(f, "rate {rate} for {channel} is outside [0, 1]")
            }
            NoiseSpecError::Malformed(item) => {
                write!(f, "expected CHANNEL=RATE, found {item:?}")
            }
        }
    }
}

impl core::error::Error for NoiseSpecError {}

/// Noise channels applied in order, each firing per word with its rate.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    channels: Vec<(Channel, f64)>,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(channels: Vec<(Channel, f64)>, seed: u64) -> Result<Self, NoiseSpecError> {
        for &(channel, rate) in &channels {
            if !(0.0..=1.0).contains(&rate) {
                return Err(NoiseSpecError::RateOutOfRange { channel, rate });
            }
        }
        Ok(NoiseSpec { channels, seed })
    }

    /// Parses `char_drop=0.2,elongate=0.1`.
    pub fn parse(list: &str, seed: u64) -> Result<Self, NoiseSpecError> {
        let mut channels = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, rate) = item
                .split_once('=')
                .ok_or_else(|| NoiseSpecError::Malformed(item.into()))?;
            let channel: Channel = name.trim().parse()?;
            let rate: f64 = rate
                .trim()
                .parse()
                .map_err(|_| NoiseSpecError::Malformed(item.into()))?;
            channels.push((channel, rate));
        }
        NoiseSpec::new(channels, seed)
    }

    pub fn channels(&self) -> &[(Channel, f64)] {
        &self.channels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Random source for one sentence.
#[derive(Clone, Debug)]
pub struct NoiseStream(ChaCha8Rng);

impl NoiseStream {
    /// The substream for sentence `sid` under `seed`.
    pub fn substream(seed: u64, sid: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sid);
        NoiseStream(rng)
    }

    fn fires(&mut self, rate: f64) -> bool {
        self.0.random_bool(rate)
    }

    fn pick(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];

/// US QWERTY neighbours, letters only.
const QWERTY: [(char, &str); 26] = [
    ('a', "qwsz"),
    ('b', "vghn"),
    ('c', "xdfv"),
    ('d', "serfcx"),
    ('e', "wsdr"),
    ('f', "drtgvc"),
    ('g', "ftyhbv"),
    ('h', "gyujnb"),
    ('i', "ujko"),
    ('j', "huikmn"),
    ('k', "jiolm"),
    ('l', "kop"),
    ('m', "njk"),
    ('n', "bhjm"),
    ('o', "iklp"),
    ('p', "ol"),
    ('q', "wa"),
    ('r', "edft"),
    ('s', "awedxz"),
    ('t', "rfgy"),
    ('u', "yhji"),
    ('v', "cfgb"),
    ('w', "qase"),
    ('x', "zsdc"),
    ('y', "tghu"),
    ('z', "asx"),
];

fn qwerty_neighbours(c: char) -> Option<&'static str> {
    let lower = c.to_ascii_lowercase();
    QWERTY
        .binary_search_by_key(&lower, |&(k, _)| k)
        .ok()
        .map(|i| QWERTY[i].1)
}

fn fold_char(c: char) -> char {
    let mut it = c.to_lowercase();
    match (it.next(), it.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// The single-character case counterpart of `c`, if there is one.
fn flipped_case(c: char) -> Option<char> {
    let mut it = if c.is_lowercase() {
        c.to_uppercase()
    } else if c.is_uppercase() {
        let mut lower = c.to_lowercase();
        return match (lower.next(), lower.next()) {
            (Some(l), None) if l != c => Some(l),
            _ => None,
        };
    } else {
        return None;
    };
    match (it.next(), it.next()) {
        (Some(u), None) if u != c => Some(u),
        _ => None,
    }
}

fn apply(channel: Channel, w: &mut Vec<char>, stream: &mut NoiseStream) {
    let positions: Vec<usize> = match channel {
        Channel::CharSwap => (0..w.len().saturating_sub(1))
            .filter(|&i| w[i] != w[i + 1])
            .collect(),
        Channel::CharDrop => {
            if w.len() < 2 {
                return;
            }
            (0..w.len()).collect()
        }
        Channel::CharDup | Channel::Elongate => (0..w.len()).collect(),
        Channel::KeyboardSub => (0..w.len())
            .filter(|&i| qwerty_neighbours(w[i]).is_some())
            .collect(),
        Channel::VowelDrop => {
            if w.len() < 2 {
                return;
            }
            (0..w.len())
                .filter(|&i| VOWELS.contains(&fold_char(w[i])))
                .collect()
        }
        Channel::CaseFlip => (0..w.len())
            .filter(|&i| flipped_case(w[i]).is_some())
            .collect(),
    };
    if positions.is_empty() {
        return;
    }
    let at = positions[stream.pick(positions.len())];
    match channel {
        Channel::CharSwap => w.swap(at, at + 1),
        Channel::CharDrop | Channel::VowelDrop => {
            w.remove(at);
        }
        Channel::CharDup => w.insert(at, w[at]),
        Channel::KeyboardSub => {
            let neighbours: Vec<char> = qwerty_neighbours(w[at])
                .unwrap_or_default()
                .chars()
                .collect();
            let mut sub = neighbours[stream.pick(neighbours.len())];
            if w[at].is_ascii_uppercase() {
                sub = sub.to_ascii_uppercase();
            }
            w[at] = sub;
        }
        Channel::CaseFlip => {
            if let Some(f) = flipped_case(w[at]) {
                w[at] = f;
            }
        }
        Channel::Elongate => {
            let extra = 2 + stream.pick(3);
            let c = w[at];
            for _ in 0..extra {
                w.insert(at, c);
            }
        }
    }
}

/// Runs the channels of `spec` over one word, in spec order.
///
/// Each channel draws one Bernoulli decision from `stream` and, when it fires,
/// a uniform position among the positions it can act on (and, for
/// `keyboard_sub` and `elongate`, a uniform neighbour or repeat count).
pub fn corrupt_word(w: &str, spec: &NoiseSpec, stream: &mut NoiseStream) -> String {
    let mut chars: Vec<char> = w.chars().collect();
    for &(channel, rate) in &spec.channels {
        if stream.fires(rate) {
            apply(channel, &mut chars, stream);
        }
    }
    chars.into_iter().collect()
}

/// Corrupts each sentence word by word; the clean sentence becomes the target
/// with its whitespace collapsed, the corrupted one the source. `sid` is the
/// input index.
pub fn corrupt_corpus<L, S>(clean: &[(L, S)], spec: &NoiseSpec) -> Vec<SentencePair>
where
    L: AsRef<str>,
    S: AsRef<str>,
{
    clean
        .iter()
        .enumerate()
        .map(|(sid, (lang, sentence))| {
            corrupt_sentence(sid, lang.as_ref(), sentence.as_ref(), spec)
        })
        .collect()
}

/// One sentence of [`corrupt_corpus`], usable independently of the others.
pub fn corrupt_sentence(sid: usize, lang: &str, sentence: &str, spec: &NoiseSpec) -> SentencePair {
    let mut stream = NoiseStream::substream(spec.seed, sid as u64);
    let mut src = String::new();
    let mut tgt = String::new();
    for w in sentence.split_whitespace() {
        if !tgt.is_empty() {
            src.push(' ');
            tgt.push(' ');
        }
        src.push_str(&corrupt_word(w, spec, &mut stream));
        tgt.push_str(w);
    }
    SentencePair {
        lang: lang.into(),
        sid,
        src,
        tgt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn only(channel: Channel, rate: f64, seed: u64) -> NoiseSpec {
        NoiseSpec::new(vec![(channel, rate)], seed).unwrap()
    }

    #[test]
    fn qwerty_table_is_sorted_and_symmetric() {
        assert!(QWERTY.windows(2).all(|w| w[0].0 < w[1].0));
        for (k, ns) in QWERTY {
            for n in ns.chars() {
                assert!(qwerty_neighbours(n).unwrap().contains(k), "{k} -> {n}");
            }
        }
    }

    #[test]
    fn zero_rate_is_identity() {
        for c in Channel::ALL {
            let spec = only(c, 0.0, 7);
            let mut s = NoiseStream::substream(7, 0);
            assert_eq!(corrupt_word("great", &spec, &mut s), "great");
        }
    }

    #[test]
    fn seeded_golden_values() {
        let mut s = NoiseStream::substream(42, 0);
        let out = corrupt_word("great", &only(Channel::VowelDrop, 1.0, 42), &mut s);
        assert!(out == "grat" || out == "gret");
        assert_eq!(out, "grat");

        let elongate = only(Channel::Elongate, 1.0, 42);
        let mut s = NoiseStream::substream(42, 0);
        assert_eq!(corrupt_word("so", &elongate, &mut s), "ssssso");
        // A single-character word forces the position; only the repeat varies.
        let mut s = NoiseStream::substream(42, 0);
        assert_eq!(corrupt_word("o", &elongate, &mut s), "ooooo");
    }

    #[test]
    fn channel_semantics() {
        let mut s = NoiseStream::substream(1, 0);
        for _ in 0..50 {
            let out = corrupt_word("ab", &only(Channel::CharSwap, 1.0, 1), &mut s);
            assert_eq!(out, "ba");
            assert_eq!(
                corrupt_word("a", &only(Channel::CharDrop, 1.0, 1), &mut s),
                "a"
            );
            assert_eq!(
                corrupt_word("a", &only(Channel::VowelDrop, 1.0, 1), &mut s),
                "a"
            );
            assert_eq!(
                corrupt_word("aa", &only(Channel::CharSwap, 1.0, 1), &mut s),
                "aa"
            );
            assert_eq!(
                corrupt_word("x", &only(Channel::CharDup, 1.0, 1), &mut s),
                "xx"
            );
            assert_eq!(
                corrupt_word("a", &only(Channel::CaseFlip, 1.0, 1), &mut s),
                "A"
            );
            assert_eq!(
                corrupt_word("ø1", &only(Channel::KeyboardSub, 1.0, 1), &mut s),
                "ø1"
            );
            let sub = corrupt_word("Q", &only(Channel::KeyboardSub, 1.0, 1), &mut s);
            assert!(sub == "W" || sub == "A", "{sub}");
            let e = corrupt_word("o", &only(Channel::Elongate, 1.0, 1), &mut s);
            assert!((3..=5).contains(&e.chars().count()) && e.chars().all(|c| c == 'o'));
            let v = corrupt_word("brd", &only(Channel::VowelDrop, 1.0, 1), &mut s);
            assert_eq!(v, "brd");
        }
    }

    #[test]
    fn parse_channel_lists() {
        let spec = NoiseSpec::parse("char_drop=0.2, elongate=0.1", 3).unwrap();
        assert_eq!(
            spec.channels(),
            &[(Channel::CharDrop, 0.2), (Channel::Elongate, 0.1)]
        );
        assert!(matches!(
            NoiseSpec::parse("typo=0.2", 0),
            Err(NoiseSpecError::UnknownChannel(_))
        ));
        assert!(matches!(
            NoiseSpec::parse("char_dup=1.5", 0),
            Err(NoiseSpecError::RateOutOfRange { .. })
        ));
        assert!(matches!(
            NoiseSpec::parse("char_dup", 0),
            Err(NoiseSpecError::Malformed(_))
        ));
    }

    #[test]
    fn corpus_level_contract() {
        let clean = [("en", "you are  great"), ("da", "det er godt")];
        let none = NoiseSpec::parse("char_drop=0,elongate=0", 5).unwrap();
        for p in corrupt_corpus(&clean, &none) {
            assert_eq!(p.src, p.tgt);
        }
        let spec = NoiseSpec::parse("char_drop=0.5,elongate=0.5", 5).unwrap();
        let a = corrupt_corpus(&clean, &spec);
        assert_eq!(a, corrupt_corpus(&clean, &spec));
        assert_eq!(a[0].tgt, "you are great");
        assert_eq!(a[1], corrupt_sentence(1, "da", "det er godt", &spec));
    }
}
