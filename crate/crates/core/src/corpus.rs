//! ATIS-style NLU data: TSV loading, vocabularies, label maps, and batching.
//!
//! Row format (UTF-8, `\n` line endings, optional header):
//!
//! ```text
//! id <TAB> utterance <TAB> slot_labels <TAB> intent
//! ```
//!
//! `utterance` and `slot_labels` are single-space separated and have the same
//! number of items. Tokens are lowercased on load.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bio::{self, OUTSIDE};
use crate::error::{Error, Result};

pub const HEADER: &str = "id\tutterance\tslot_labels\tintent";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledUtterance {
    pub id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub intent: String,
}

impl LabeledUtterance {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, tags: Vec<String>, intent: impl Into<String>) -> Result<Self> {
        let utt = LabeledUtterance { id: id.into(), tokens, tags, intent: intent.into() };
        utt.check(0)?;
        Ok(utt)
    }

    /// Builds from space-separated text; mainly a convenience for tests.
    pub fn parse(id: &str, utterance: &str, tags: &str, intent: &str) -> Result<Self> {
        Self::new(
            id,
            utterance.split(' ').map(|t| t.to_lowercase()).collect(),
            tags.split(' ').map(str::to_string).collect(),
            intent,
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn check(&self, line: usize) -> Result<()> {
        if self.tokens.is_empty() || self.tokens.iter().any(String::is_empty) {
            return Err(Error::BadRow { line, id: self.id.clone(), msg: "empty token".into() });
        }
        if self.tokens.len() != self.tags.len() {
            return Err(Error::LengthMismatch {
                line,
                id: self.id.clone(),
                tokens: self.tokens.len(),
                tags: self.tags.len(),
            });
        }
        if let Some(bad) = self.tags.iter().find(|t| !bio::is_well_formed(t)) {
            return Err(Error::MalformedTag { line, id: self.id.clone(), tag: bad.clone() });
        }
        if self.intent.is_empty() {
            return Err(Error::BadRow { line, id: self.id.clone(), msg: "empty intent".into() });
        }
        Ok(())
    }

    pub fn to_tsv_row(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.id, self.tokens.join(" "), self.tags.join(" "), self.intent)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TsvSchema {
    pub header: bool,
}

pub fn parse_tsv<R: BufRead>(reader: R, schema: TsvSchema) -> Result<Vec<LabeledUtterance>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if i == 0 && schema.header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::ColumnCount {
                line: line_no,
                id: cols[0].to_string(),
                expected: 4,
                found: cols.len(),
            });
        }
        let utt = LabeledUtterance {
            id: cols[0].to_string(),
            tokens: cols[1].split(' ').map(|t| t.to_lowercase()).collect(),
            tags: cols[2].split(' ').map(str::to_string).collect(),
            intent: cols[3].to_string(),
        };
        utt.check(line_no)?;
        out.push(utt);
    }
    Ok(out)
}

pub fn load_tsv(path: impl AsRef<Path>, schema: TsvSchema) -> Result<Vec<LabeledUtterance>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tsv(std::io::BufReader::new(f), schema)
}

/// Loads a file, detecting the optional header line.
pub fn load_tsv_auto(path: impl AsRef<Path>) -> Result<Vec<LabeledUtterance>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = text.lines().next().is_some_and(|l| l.trim_end() == HEADER);
    parse_tsv(text.as_bytes(), TsvSchema { header })
}

pub fn write_tsv<W: Write>(mut w: W, data: &[LabeledUtterance], header: bool) -> std::io::Result<()> {
    if header {
        writeln!(w, "{HEADER}")?;
    }
    for utt in data {
        writeln!(w, "{}", utt.to_tsv_row())?;
    }
    Ok(())
}

pub fn save_tsv(path: impl AsRef<Path>, data: &[LabeledUtterance], header: bool) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_tsv(&mut w, data, header).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
const RESERVED: [&str; 3] = ["<pad>", "<unk>", "<cls>"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub min_count: usize,
}

impl Vocabulary {
    /// Tokens with frequency ≥ `min_count`, ordered by descending frequency
    /// and then lexicographically, after the three reserved entries.
    pub fn build<'a, I, S>(sequences: I, min_count: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut any = false;
        for seq in sequences {
            for tok in seq {
                any = true;
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        if !any {
            return Err(Error::EmptyCorpus);
        }
        let min_count = min_count.max(1);
        let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens: Vec<String> =
            RESERVED.iter().map(|s| s.to_string()).chain(kept.into_iter().map(|(t, _)| t.to_string())).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary { tokens, index, min_count })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t.as_ref())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMaps {
    pub intents: Vec<String>,
    /// BIO tags; `O` is always index 0.
    pub tags: Vec<String>,
}

impl LabelMaps {
    pub fn build<'a, I>(intents: I, tag_seqs: impl IntoIterator<Item = &'a [String]>) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let intents: BTreeSet<&str> = intents.into_iter().collect();
        let mut tags: BTreeSet<&str> = tag_seqs.into_iter().flatten().map(String::as_str).collect();
        tags.remove(OUTSIDE);
        LabelMaps {
            intents: intents.into_iter().map(str::to_string).collect(),
            tags: std::iter::once(OUTSIDE).chain(tags).map(str::to_string).collect(),
        }
    }

    pub fn from_utterances<'a>(sets: impl IntoIterator<Item = &'a [LabeledUtterance]>) -> Self {
        let all: Vec<&LabeledUtterance> = sets.into_iter().flatten().collect();
        Self::build(all.iter().map(|u| u.intent.as_str()), all.iter().map(|u| u.tags.as_slice()))
    }

    pub fn intent_index(&self, intent: &str) -> Result<usize> {
        self.intents.binary_search_by(|x| x.as_str().cmp(intent)).map_err(|_| Error::UnknownLabel(intent.into()))
    }

    pub fn tag_index(&self, tag: &str) -> Result<usize> {
        if tag == OUTSIDE {
            return Ok(0);
        }
        self.tags[1..]
            .binary_search_by(|x| x.as_str().cmp(tag))
            .map(|i| i + 1)
            .map_err(|_| Error::UnknownLabel(tag.into()))
    }

    pub fn num_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn num_tags(&self) -> usize {
        self.tags.len()
    }
}

/// Padded mini-batch. Rows are utterances; padded positions carry `PAD` and
/// the `O` tag and have mask 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    /// Positions of the utterances in the source dataset.
    pub indices: Vec<usize>,
    pub tokens: Vec<Vec<usize>>,
    pub tags: Vec<Vec<usize>>,
    pub intents: Vec<usize>,
    pub mask: Vec<Vec<bool>>,
}

impl Batch {
    pub fn from_utterances(
        items: &[(usize, &LabeledUtterance)],
        vocab: &Vocabulary,
        labels: &LabelMaps,
    ) -> Result<Self> {
        let max_len = items.iter().map(|(_, u)| u.len()).max().unwrap_or(0);
        let mut b = Batch {
            indices: Vec::new(),
            tokens: Vec::new(),
            tags: Vec::new(),
            intents: Vec::new(),
            mask: Vec::new(),
        };
        for &(i, u) in items {
            let mut toks = vocab.encode(&u.tokens);
            let mut tags = u.tags.iter().map(|t| labels.tag_index(t)).collect::<Result<Vec<_>>>()?;
            let mut mask = vec![true; u.len()];
            toks.resize(max_len, PAD);
            tags.resize(max_len, 0);
            mask.resize(max_len, false);
            b.indices.push(i);
            b.tokens.push(toks);
            b.tags.push(tags);
            b.intents.push(labels.intent_index(&u.intent)?);
            b.mask.push(mask);
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.tokens.first().map_or(0, Vec::len)
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.mask.iter().map(|m| m.iter().filter(|&&x| x).count()).collect()
    }
}

/// Order in which one epoch visits a dataset; a pure function of `seed`.
pub fn epoch_order(n: usize, seed: u64, shuffle: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
}

pub fn to_batches(
    data: &[LabeledUtterance],
    vocab: &Vocabulary,
    labels: &LabelMaps,
    batch_size: usize,
    seed: u64,
    shuffle: bool,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Invalid("batch size must be at least 1".into()));
    }
    let order = epoch_order(data.len(), seed, shuffle);
    order
        .chunks(batch_size)
        .map(|chunk| {
            let items: Vec<(usize, &LabeledUtterance)> = chunk.iter().map(|&i| (i, &data[i])).collect();
            Batch::from_utterances(&items, vocab, labels)
        })
        .collect()
}
