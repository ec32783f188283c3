use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::Seq2SeqError;
use crate::corpus::SentencePair;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Symbol {
    Pad,
    Bos,
    Eos,
    Unk,
    Lang(String),
    Char(char),
}

/// Dense symbol ids: the four specials, then one tag per language, then the
/// characters, each group in the order given at construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    symbols: Vec<Symbol>,
    langs: BTreeMap<String, u32>,
    chars: BTreeMap<char, u32>,
}

impl Vocab {
    /// Duplicates are dropped, first occurrence wins.
    pub fn new<L, C>(langs: L, chars: C) -> Self
    where
        L: IntoIterator<Item = String>,
        C: IntoIterator<Item = char>,
    {
        let mut symbols = alloc::vec![Symbol::Pad, Symbol::Bos, Symbol::Eos, Symbol::Unk];
        let mut lang_ids = BTreeMap::new();
        for l in langs {
            if !lang_ids.contains_key(&l) {
                lang_ids.insert(l.clone(), symbols.len() as u32);
                symbols.push(Symbol::Lang(l));
            }
        }
        let mut char_ids = BTreeMap::new();
        for c in chars {
            if let alloc::collections::btree_map::Entry::Vacant(e) = char_ids.entry(c) {
                e.insert(symbols.len() as u32);
                symbols.push(Symbol::Char(c));
            }
        }
        Vocab {
            symbols,
            langs: lang_ids,
            chars: char_ids,
        }
    }

    /// Sorted languages of every pair and sorted characters of the sources and
    /// targets.
    pub fn from_pairs<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = &'a SentencePair>,
    {
        let mut langs = BTreeSet::new();
        let mut chars = BTreeSet::new();
        for p in pairs {
            langs.insert(p.lang.clone());
            chars.extend(p.src.chars());
            chars.extend(p.tgt.chars());
        }
        Vocab::new(langs, chars)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, id: u32) -> Option<&Symbol> {
        self.symbols.get(id as usize)
    }

    pub fn lang_id(&self, lang: &str) -> Option<u32> {
        self.langs.get(lang).copied()
    }

    pub fn char_id(&self, c: char) -> u32 {
        self.chars.get(&c).copied().unwrap_or(UNK)
    }

    /// Languages in id order.
    pub fn langs(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().filter_map(|s| match s {
            Symbol::Lang(l) => Some(l.as_str()),
            _ => None,
        })
    }

    /// Characters in id order.
    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.symbols.iter().filter_map(|s| match s {
            Symbol::Char(c) => Some(*c),
            _ => None,
        })
    }

    /// `[<lang>, chars..., EOS]`; characters outside the vocabulary become UNK.
    pub fn encode_text(&self, lang: &str, s: &str) -> Result<Vec<u32>, Seq2SeqError> {
        let tag = self
            .lang_id(lang)
            .ok_or_else(|| Seq2SeqError::UnknownLanguageTag(lang.into()))?;
        let mut ids = Vec::with_capacity(s.len() + 2);
        ids.push(tag);
        ids.extend(s.chars().map(|c| self.char_id(c)));
        ids.push(EOS);
        Ok(ids)
    }

    /// Decoder targets: `[chars..., EOS]`.
    pub fn encode_target(&self, s: &str) -> Vec<u32> {
        let mut ids: Vec<u32> = s.chars().map(|c| self.char_id(c)).collect();
        ids.push(EOS);
        ids
    }

    /// Characters up to the first EOS; other non-character symbols are dropped.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .filter_map(|&id| match self.symbol(id) {
                Some(Symbol::Char(c)) => Some(*c),
                _ => None,
            })
            .collect()
    }
}
