//! Intent accuracy and span-level slot F1 with conlleval chunking.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bio::Tag;
use crate::error::{Error, Result};

/// A chunk with 1-based inclusive bounds.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub slot_type: String,
    pub start: usize,
    pub end: usize,
}

/// Chunks as conlleval reads them: `B-X` always opens a chunk, `I-X` opens one
/// unless it continues an `X` chunk, and malformed tags count as `O`.
pub fn extract_spans<S: AsRef<str>>(tags: &[S]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(&str, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let pos = i + 1;
        let parsed = Tag::parse(tag.as_ref()).unwrap_or(Tag::Outside);
        let continues = matches!((parsed, open), (Tag::Inside(t), Some((o, _))) if t == o);
        if continues {
            continue;
        }
        if let Some((ty, start)) = open.take() {
            spans.push(Span { slot_type: ty.to_string(), start, end: pos - 1 });
        }
        if let Some(ty) = parsed.slot_type() {
            open = Some((ty, pos));
        }
    }
    if let Some((ty, start)) = open {
        spans.push(Span { slot_type: ty.to_string(), start, end: tags.len() });
    }
    spans
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: SpanCounts,
}

impl SpanCounts {
    pub fn scores(self) -> SlotScores {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.correct, self.predicted);
        let recall = ratio(self.correct, self.gold);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        SlotScores { precision, recall, f1, counts: self }
    }
}

/// Counts for one utterance.
pub fn span_counts<S: AsRef<str>, T: AsRef<str>>(gold: &[S], pred: &[T]) -> SpanCounts {
    let g = extract_spans(gold);
    let mut p = extract_spans(pred);
    p.sort_unstable();
    let correct = g.iter().filter(|s| p.binary_search(s).is_ok()).count();
    SpanCounts { gold: g.len(), predicted: p.len(), correct }
}

/// Micro-averaged span scores. `ids` name utterances in error messages.
pub fn slot_f1(ids: &[String], gold: &[Vec<String>], pred: &[Vec<String>]) -> Result<SlotScores> {
    if gold.len() != pred.len() || ids.len() != gold.len() {
        return Err(Error::SequenceLength { id: "<corpus>".into(), left: gold.len(), right: pred.len() });
    }
    let mut total = SpanCounts::default();
    for ((id, g), p) in ids.iter().zip(gold).zip(pred) {
        if g.len() != p.len() {
            return Err(Error::SequenceLength { id: id.clone(), left: g.len(), right: p.len() });
        }
        let c = span_counts(g, p);
        total.gold += c.gold;
        total.predicted += c.predicted;
        total.correct += c.correct;
    }
    Ok(total.scores())
}

pub fn intent_accuracy<S: AsRef<str>, T: AsRef<str>>(gold: &[S], pred: &[T]) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if gold.len() != pred.len() {
        return Err(Error::SequenceLength { id: "<intents>".into(), left: gold.len(), right: pred.len() });
    }
    let hits = gold.iter().zip(pred).filter(|(g, p)| g.as_ref() == p.as_ref()).count();
    Ok(hits as f64 / gold.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub intent_accuracy: f64,
    pub slot_precision: f64,
    pub slot_recall: f64,
    pub slot_f1: f64,
    pub counts: SpanCounts,
}

/// One predicted utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub intent: String,
    pub tags: Vec<String>,
}

pub fn evaluate(gold: &[crate::corpus::LabeledUtterance], pred: &[Prediction]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::SequenceLength { id: "<corpus>".into(), left: gold.len(), right: pred.len() });
    }
    let ids: Vec<String> = gold.iter().map(|u| u.id.clone()).collect();
    let gold_tags: Vec<Vec<String>> = gold.iter().map(|u| u.tags.clone()).collect();
    let pred_tags: Vec<Vec<String>> = pred.iter().map(|p| p.tags.clone()).collect();
    let slots = slot_f1(&ids, &gold_tags, &pred_tags)?;
    let gi: Vec<&str> = gold.iter().map(|u| u.intent.as_str()).collect();
    let pi: Vec<&str> = pred.iter().map(|p| p.intent.as_str()).collect();
    Ok(EvalReport {
        intent_accuracy: intent_accuracy(&gi, &pi)?,
        slot_precision: slots.precision,
        slot_recall: slots.recall,
        slot_f1: slots.f1,
        counts: slots.counts,
    })
}

/// conlleval input: `token gold pred` per line, a blank line after each
/// utterance.
pub fn write_conll<W: Write>(
    mut w: W,
    tokens: &[Vec<String>],
    gold: &[Vec<String>],
    pred: &[Vec<String>],
) -> std::io::Result<()> {
    for ((toks, g), p) in tokens.iter().zip(gold).zip(pred) {
        for ((t, g), p) in toks.iter().zip(g).zip(p) {
            writeln!(w, "{t} {g} {p}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
