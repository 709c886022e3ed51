//! Intent and slot classifiers over encoder states, the supervised loss, and
//! prediction.

use xnlu_autodiff::{argmax, Tape, Tensor, Var};

use crate::bio;
use crate::corpus::{Batch, LabelMaps, Vocabulary};
use crate::encoder::{encode, with_cls, Encoded};
use crate::error::Result;
use crate::metrics::Prediction;
use crate::model::{Bound, HeadParams, Model};

/// Intent logits from the CLS rows, `batch × intents`.
pub fn intent_logits(tape: &mut Tape, bound: &Bound, heads: &HeadParams, enc: &Encoded) -> Result<Var> {
    let cls = tape.slice_rows(enc.states, 0, enc.batch)?;
    linear(tape, cls, bound.var(heads.w_intent), bound.var(heads.b_intent))
}

/// Slot logits for every row of `states`.
pub fn slot_logits(tape: &mut Tape, bound: &Bound, heads: &HeadParams, states: Var) -> Result<Var> {
    linear(tape, states, bound.var(heads.w_slot), bound.var(heads.b_slot))
}

/// `x Wᵀ + b` with `W` stored output-major.
pub(crate) fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul_nt(x, w)?;
    Ok(tape.add_row(y, b)?)
}

fn distribution(heads_w: &Tensor, heads_b: &Tensor, h: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::row(h.to_vec()));
    let w = tape.constant(heads_w.clone());
    let b = tape.constant(heads_b.clone());
    let logits = linear(&mut tape, x, w, b)?;
    let p = tape.softmax_rows(logits, None)?;
    Ok(tape.value(p).data().to_vec())
}

/// `softmax(W^I h0 + b^I)`.
pub fn intent_distribution(model: &Model, h0: &[f64]) -> Result<Vec<f64>> {
    let s = &model.store;
    distribution(s.value(model.heads.w_intent), s.value(model.heads.b_intent), h0)
}

/// Per-position tag distributions for states `h_1..h_T`.
pub fn slot_distributions(model: &Model, states: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let s = &model.store;
    states.iter().map(|h| distribution(s.value(model.heads.w_slot), s.value(model.heads.b_slot), h)).collect()
}

/// Mean over utterances of intent NLL plus the summed tag NLL of the real
/// positions.
pub fn supervised_loss(tape: &mut Tape, bound: &Bound, model: &Model, batch: &Batch, train: bool, seed: u64) -> Result<Var> {
    let (idx, mask) = with_cls(&batch.tokens, &batch.lengths());
    let enc = encode(tape, bound, model, &idx, &mask, train, seed)?;
    let n = batch.len() as f64;
    let il = intent_logits(tape, bound, &model.heads, &enc)?;
    let intent = tape.cross_entropy(il, &batch.intents, &vec![1.0 / n; batch.len()])?;
    let steps = enc.steps - 1;
    let rest = tape.slice_rows(enc.states, enc.batch, enc.batch * enc.steps)?;
    let sl = slot_logits(tape, bound, &model.heads, rest)?;
    let mut targets = Vec::with_capacity(steps * enc.batch);
    let mut weights = Vec::with_capacity(steps * enc.batch);
    for t in 0..steps {
        for b in 0..enc.batch {
            targets.push(batch.tags[b][t]);
            weights.push(if batch.mask[b][t] { 1.0 / n } else { 0.0 });
        }
    }
    let slot = tape.cross_entropy(sl, &targets, &weights)?;
    Ok(tape.add(intent, slot)?)
}

/// Argmax intent and tags for a list of tokenized utterances, processed in
/// chunks of `chunk` sequences.
pub fn predict_many<S: AsRef<str>>(
    model: &Model,
    vocab: &Vocabulary,
    labels: &LabelMaps,
    utterances: &[Vec<S>],
    repair: bool,
    chunk: usize,
) -> Result<Vec<Prediction>> {
    let mut out = Vec::with_capacity(utterances.len());
    for part in utterances.chunks(chunk.max(1)) {
        let tokens: Vec<Vec<usize>> = part.iter().map(|u| vocab.encode(u)).collect();
        let lengths: Vec<usize> = tokens.iter().map(Vec::len).collect();
        if lengths.contains(&0) {
            return Err(crate::Error::Invalid("cannot predict an empty utterance".into()));
        }
        let (idx, mask) = with_cls(&tokens, &lengths);
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape);
        let enc = encode(&mut tape, &bound, model, &idx, &mask, false, 0)?;
        let il = intent_logits(&mut tape, &bound, &model.heads, &enc)?;
        let sl = slot_logits(&mut tape, &bound, &model.heads, enc.states)?;
        let (il, sl) = (tape.value(il), tape.value(sl));
        for (b, &len) in lengths.iter().enumerate() {
            let intent = labels.intents[il.argmax_row(b)].clone();
            let mut tags: Vec<String> =
                (1..=len).map(|t| labels.tags[argmax(sl.row_slice(enc.row(b, t)))].clone()).collect();
            if repair {
                tags = bio::repair(&tags);
            }
            out.push(Prediction { intent, tags });
        }
    }
    Ok(out)
}

pub fn predict<S: AsRef<str>>(
    model: &Model,
    vocab: &Vocabulary,
    labels: &LabelMaps,
    tokens: &[S],
    repair: bool,
) -> Result<Prediction> {
    let one = vec![tokens.iter().map(|s| s.as_ref()).collect::<Vec<&str>>()];
    Ok(predict_many(model, vocab, labels, &one, repair, 1)?.remove(0))
}
