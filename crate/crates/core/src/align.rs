//! Soft alignment: attention from source embeddings onto target encoder
//! states, trained through the source slot labels and a reconstruction of
//! the source tokens. Only used during training.

use std::collections::HashSet;

use xnlu_autodiff::{argmax, Adam, Tape, Tensor, Var};

use crate::bitext::AlignedPair;
use crate::corpus::{Batch, LabelMaps, Vocabulary};
use crate::encoder::{encode, with_cls};
use crate::error::{Error, Result};
use crate::heads::{intent_logits, linear, slot_logits, supervised_loss};
use crate::model::{derive_seed, Bound, Model};

/// Index form of a batch of aligned pairs. Only source labels are kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairBatch {
    pub target: Vec<Vec<usize>>,
    pub source: Vec<Vec<usize>>,
    pub source_tags: Vec<Vec<usize>>,
    pub intents: Vec<usize>,
}

impl PairBatch {
    pub fn from_pairs(pairs: &[&AlignedPair], vocab: &Vocabulary, labels: &LabelMaps) -> Result<Self> {
        let mut b = PairBatch { target: vec![], source: vec![], source_tags: vec![], intents: vec![] };
        for p in pairs {
            if p.target_tokens.is_empty() {
                return Err(Error::Invalid(format!("pair `{}` has an empty target", p.source.id)));
            }
            b.target.push(vocab.encode(&p.target_tokens));
            b.source.push(vocab.encode(&p.source.tokens));
            b.source_tags.push(p.source.tags.iter().map(|t| labels.tag_index(t)).collect::<Result<_>>()?);
            b.intents.push(labels.intent_index(&p.source.intent)?);
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }
}

/// `A = softmax((e W^Q)(h W^K)ᵀ / (√d τ))` over the rows of `tgt_states`,
/// which must not include CLS; `Z = A h`. Returns `(Z, A)`.
pub fn attend(
    tape: &mut Tape,
    bound: &Bound,
    model: &Model,
    src_embeddings: Var,
    tgt_states: Var,
    tgt_mask: Option<&[bool]>,
) -> Result<(Var, Var)> {
    let a = &model.align;
    let q = tape.matmul(src_embeddings, bound.var(a.w_q))?;
    let k = tape.matmul(tgt_states, bound.var(a.w_k))?;
    let scores = tape.matmul_nt(q, k)?;
    let scale = 1.0 / ((model.dims.d_att as f64).sqrt() * a.tau);
    let scores = tape.scale(scores, scale)?;
    let attn = tape.softmax_rows(scores, tgt_mask)?;
    let z = tape.matmul(attn, tgt_states)?;
    Ok((z, attn))
}

/// Summed NLL of the source tags under `softmax(W^S z_i + b^S)`.
pub fn aligned_slot_loss(tape: &mut Tape, bound: &Bound, model: &Model, z: Var, src_tags: &[usize], weight: f64) -> Result<Var> {
    let logits = slot_logits(tape, bound, &model.heads, z)?;
    Ok(tape.cross_entropy(logits, src_tags, &vec![weight; src_tags.len()])?)
}

/// Summed NLL of the source tokens under `softmax(E FF(z_i) + b^R)`.
pub fn reconstruction_loss(tape: &mut Tape, bound: &Bound, model: &Model, z: Var, src_tokens: &[usize], weight: f64) -> Result<Var> {
    let a = &model.align;
    let hidden = tape.matmul(z, bound.var(a.ff1))?;
    let hidden = tape.add_row(hidden, bound.var(a.ff1_b))?;
    let hidden = tape.relu(hidden)?;
    let out = tape.matmul(hidden, bound.var(a.ff2))?;
    let out = tape.add_row(out, bound.var(a.ff2_b))?;
    let logits = linear(tape, out, bound.var(model.encoder.embedding), bound.var(a.rec_bias))?;
    Ok(tape.cross_entropy(logits, src_tokens, &vec![weight; src_tokens.len()])?)
}

#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub intent: Var,
    pub slot: Var,
    pub reconstruction: Option<Var>,
    pub total: Var,
}

/// Per-pair attention matrices from the last forward pass.
pub struct PairForward {
    pub terms: LossTerms,
    pub attention: Vec<Var>,
}

/// `L_intent + L_slot (+ L_rec)`, each averaged over the pairs of the batch.
pub fn total_training_loss(
    tape: &mut Tape,
    bound: &Bound,
    model: &Model,
    batch: &PairBatch,
    reconstruction: bool,
    train: bool,
    seed: u64,
) -> Result<PairForward> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty pair batch".into()));
    }
    let lengths: Vec<usize> = batch.target.iter().map(Vec::len).collect();
    let (idx, mask) = with_cls(&batch.target, &lengths);
    let enc = encode(tape, bound, model, &idx, &mask, train, seed)?;
    let w = 1.0 / batch.len() as f64;

    let il = intent_logits(tape, bound, &model.heads, &enc)?;
    let intent = tape.cross_entropy(il, &batch.intents, &vec![w; batch.len()])?;

    let src_flat: Vec<usize> = batch.source.concat();
    let src_emb = tape.gather_rows(bound.var(model.encoder.embedding), &src_flat)?;
    let mut zs = Vec::with_capacity(batch.len());
    let mut attention = Vec::with_capacity(batch.len());
    let mut offset = 0;
    for (b, src) in batch.source.iter().enumerate() {
        let e = tape.slice_rows(src_emb, offset, offset + src.len())?;
        offset += src.len();
        let h = tape.gather_rows(enc.states, &enc.token_rows(b))?;
        let (z, a) = attend(tape, bound, model, e, h, None)?;
        zs.push(z);
        attention.push(a);
    }
    let z = tape.concat_rows(&zs)?;
    let slot = aligned_slot_loss(tape, bound, model, z, &batch.source_tags.concat(), w)?;
    let mut total = tape.add(intent, slot)?;
    let rec = if reconstruction {
        let r = reconstruction_loss(tape, bound, model, z, &src_flat, w)?;
        total = tape.add(total, r)?;
        Some(r)
    } else {
        None
    };
    Ok(PairForward { terms: LossTerms { intent, slot, reconstruction: rec, total }, attention })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JointOptions {
    pub reconstruction: bool,
}

impl Default for JointOptions {
    fn default() -> Self {
        JointOptions { reconstruction: true }
    }
}

/// One optimizer step on the sum of the supervised losses of `supervised`
/// and the pair loss of `pairs`. Returns the loss value.
pub fn joint_train_step(
    model: &mut Model,
    adam: &mut Adam,
    supervised: &[&Batch],
    pairs: Option<&PairBatch>,
    opts: JointOptions,
    seed: u64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape);
    let mut parts = Vec::new();
    for (k, batch) in supervised.iter().enumerate() {
        parts.push(supervised_loss(&mut tape, &bound, model, batch, true, derive_seed(seed, 10 + k as u64))?);
    }
    if let Some(pb) = pairs {
        parts.push(total_training_loss(&mut tape, &bound, model, pb, opts.reconstruction, true, derive_seed(seed, 1))?.terms.total);
    }
    let Some(&first) = parts.first() else {
        return Err(Error::Invalid("training step without data".into()));
    };
    let mut loss = first;
    for &p in &parts[1..] {
        loss = tape.add(loss, p)?;
    }
    let value = tape.value(loss).item();
    tape.backward(loss)?;
    model.store.collect_grads(&tape);
    adam.step(&mut model.store)?;
    Ok(value)
}

/// 1-based argmax target position per source row; ties go to the lowest.
pub fn hard_alignment(attention: &Tensor) -> Vec<usize> {
    (0..attention.rows()).map(|r| argmax(attention.row_slice(r)) + 1).collect()
}

/// Inference-time attention matrices for `pairs`.
pub fn attention_matrices(model: &Model, vocab: &Vocabulary, labels: &LabelMaps, pairs: &[&AlignedPair]) -> Result<Vec<Tensor>> {
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(64) {
        let pb = PairBatch::from_pairs(chunk, vocab, labels)?;
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape);
        let fwd = total_training_loss(&mut tape, &bound, model, &pb, false, false, 0)?;
        out.extend(fwd.attention.iter().map(|&a| tape.value(a).clone()));
    }
    Ok(out)
}

/// Fraction of source tokens whose argmax target is one of their gold links.
/// Pairs without gold alignments are skipped.
pub fn alignment_accuracy(model: &Model, vocab: &Vocabulary, labels: &LabelMaps, pairs: &[AlignedPair]) -> Result<f64> {
    let with_gold: Vec<&AlignedPair> = pairs.iter().filter(|p| p.gold_alignment.is_some()).collect();
    if with_gold.is_empty() {
        return Err(Error::Invalid("no pairs with gold alignments".into()));
    }
    let mats = attention_matrices(model, vocab, labels, &with_gold)?;
    let (mut hits, mut total) = (0usize, 0usize);
    for (p, a) in with_gold.iter().zip(&mats) {
        let gold: HashSet<(usize, usize)> = p.gold_alignment.as_ref().expect("filtered").iter().copied().collect();
        for (i, j) in hard_alignment(a).into_iter().enumerate() {
            total += 1;
            hits += gold.contains(&(i + 1, j)) as usize;
        }
    }
    Ok(hits as f64 / total as f64)
}
