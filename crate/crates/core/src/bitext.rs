//! Pseudo-language parallel data with gold word alignments, and import of
//! externally produced translations.
//!
//! A pseudo-language rewrites each source token through a seeded letter
//! substitution plus a language suffix (a bijection onto a disjoint
//! vocabulary), reverses word order inside consecutive windows of `k`
//! tokens, and splits tokens into two marked halves with a fixed
//! probability. Every target token keeps exactly one source parent.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledUtterance;
use crate::error::{Error, Result};
use crate::hardalign::{project_labels, AlignmentResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLangSpec {
    /// Drives the letter substitution.
    pub lexicon_seed: u64,
    /// Word order is reversed inside consecutive windows of this size.
    pub reversal_window: usize,
    /// Probability that a token is split into two target tokens.
    pub fertility_rate: f64,
    pub seed: u64,
    /// Suffix that keeps pseudo-tokens disjoint from source tokens.
    pub lang_tag: String,
}

impl Default for PseudoLangSpec {
    fn default() -> Self {
        PseudoLangSpec { lexicon_seed: 1, reversal_window: 1, fertility_rate: 0.0, seed: 0, lang_tag: "ps".into() }
    }
}

impl PseudoLangSpec {
    pub fn validate(&self) -> Result<()> {
        if self.reversal_window == 0 {
            return Err(Error::Invalid("reversal window must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.fertility_rate) {
            return Err(Error::Invalid(format!("fertility rate {} not in [0, 1)", self.fertility_rate)));
        }
        if self.lang_tag.is_empty() || self.lang_tag.contains(char::is_whitespace) {
            return Err(Error::Invalid("language tag must be a nonempty word".into()));
        }
        Ok(())
    }

    fn cipher(&self) -> HashMap<char, char> {
        let letters: Vec<char> = ('a'..='z').collect();
        let mut shuffled = letters.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(self.lexicon_seed));
        letters.into_iter().zip(shuffled).collect()
    }

    /// The pseudo-language form of one token.
    pub fn map_token(&self, token: &str) -> String {
        self.map_with(&self.cipher(), token)
    }

    fn map_with(&self, cipher: &HashMap<char, char>, token: &str) -> String {
        let body: String = token.chars().map(|c| *cipher.get(&c).unwrap_or(&c)).collect();
        format!("{body}_{}", self.lang_tag)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub source: LabeledUtterance,
    pub target_tokens: Vec<String>,
    /// 1-based `(source, target)` links.
    pub gold_alignment: Option<Vec<(usize, usize)>>,
    pub gold_target_tags: Option<Vec<String>>,
}

impl AlignedPair {
    pub fn intent(&self) -> &str {
        &self.source.intent
    }

    pub fn gold_links(&self) -> Option<AlignmentResult> {
        let pairs = self.gold_alignment.as_ref()?;
        AlignmentResult::from_pairs(pairs, self.target_tokens.len()).ok()
    }

    /// Copy with every target-side annotation removed.
    pub fn unannotated(&self) -> AlignedPair {
        AlignedPair {
            source: self.source.clone(),
            target_tokens: self.target_tokens.clone(),
            gold_alignment: None,
            gold_target_tags: None,
        }
    }

    /// The target side as a labeled utterance, when gold tags exist.
    pub fn labeled_target(&self) -> Option<LabeledUtterance> {
        Some(LabeledUtterance {
            id: self.source.id.clone(),
            tokens: self.target_tokens.clone(),
            tags: self.gold_target_tags.clone()?,
            intent: self.source.intent.clone(),
        })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Source positions (0-based) in target order after windowed reversal.
fn reordered(len: usize, k: usize) -> Vec<usize> {
    (0..len).collect::<Vec<_>>().chunks(k).flat_map(|w| w.iter().rev().copied().collect::<Vec<_>>()).collect()
}

fn transduce_with(utt: &LabeledUtterance, spec: &PseudoLangSpec, cipher: &HashMap<char, char>) -> Result<AlignedPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(utt.id.as_bytes()));
    let mut target = Vec::new();
    let mut links = Vec::new();
    for i in reordered(utt.len(), spec.reversal_window) {
        let word = spec.map_with(cipher, &utt.tokens[i]);
        if rng.random::<f64>() < spec.fertility_rate {
            for half in 1..=2 {
                target.push(format!("{word}#{half}"));
                links.push((i + 1, target.len()));
            }
        } else {
            target.push(word);
            links.push((i + 1, target.len()));
        }
    }
    let alignment = AlignmentResult::from_pairs(&links, target.len())?;
    let tags = project_labels(&utt.tags, &alignment)?;
    Ok(AlignedPair {
        source: utt.clone(),
        target_tokens: target,
        gold_alignment: Some(links),
        gold_target_tags: Some(tags),
    })
}

/// Translates one utterance into the pseudo-language. Deterministic in
/// `(utt, spec)`; the randomness is seeded per utterance id.
pub fn transduce(utt: &LabeledUtterance, spec: &PseudoLangSpec) -> Result<AlignedPair> {
    spec.validate()?;
    transduce_with(utt, spec, &spec.cipher())
}

pub fn make_parallel_corpus(data: &[LabeledUtterance], spec: &PseudoLangSpec) -> Result<Vec<AlignedPair>> {
    spec.validate()?;
    let cipher = spec.cipher();
    data.iter().map(|u| transduce_with(u, spec, &cipher)).collect()
}

/// Pairs source utterances with translations read from
/// `id <TAB> target utterance` rows. The result follows source order and
/// carries no gold annotations.
pub fn import_translations_from<R: BufRead>(source: &[LabeledUtterance], reader: R) -> Result<Vec<AlignedPair>> {
    let known: HashSet<&str> = source.iter().map(|u| u.id.as_str()).collect();
    let mut translations: HashMap<String, Vec<String>> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<translations>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, text)) = line.split_once('\t') else {
            return Err(Error::ColumnCount { line: n + 1, id: line.clone(), expected: 2, found: 1 });
        };
        if text.contains('\t') {
            return Err(Error::ColumnCount { line: n + 1, id: id.into(), expected: 2, found: line.split('\t').count() });
        }
        if !known.contains(id) {
            return Err(Error::UnmatchedId(id.into()));
        }
        let tokens: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
        if tokens.is_empty() {
            return Err(Error::BadRow { line: n + 1, id: id.into(), msg: "empty translation".into() });
        }
        if translations.insert(id.to_string(), tokens).is_some() {
            return Err(Error::DuplicateId(id.into()));
        }
    }
    source
        .iter()
        .map(|u| {
            let target_tokens = translations.remove(&u.id).ok_or_else(|| Error::MissingTranslation(u.id.clone()))?;
            Ok(AlignedPair { source: u.clone(), target_tokens, gold_alignment: None, gold_target_tags: None })
        })
        .collect()
}

pub fn import_translations(source: &[LabeledUtterance], path: impl AsRef<Path>) -> Result<Vec<AlignedPair>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    import_translations_from(source, std::io::BufReader::new(f))
}
