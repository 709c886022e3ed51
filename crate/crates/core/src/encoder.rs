//! Bidirectional LSTM over CLS-prefixed, right-padded sequences.

use xnlu_autodiff::{Tape, Tensor, Var};

use crate::corpus::CLS;
use crate::error::{Error, Result};
use crate::model::{derive_seed, Bound, LstmParams, Model};

/// Encoder output. `states` stacks the per-position rows time-major: row
/// `t * batch + b` holds position `t` of sequence `b`, position 0 being CLS.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub states: Var,
    pub batch: usize,
    pub steps: usize,
    /// Real lengths including CLS.
    pub lengths: Vec<usize>,
}

impl Encoded {
    pub fn row(&self, b: usize, t: usize) -> usize {
        t * self.batch + b
    }

    /// State rows of the real tokens `1..len` of sequence `b`.
    pub fn token_rows(&self, b: usize) -> Vec<usize> {
        (1..self.lengths[b]).map(|t| self.row(b, t)).collect()
    }
}

/// Prepends CLS and right-pads with PAD. Returns the index matrix and its
/// mask.
pub fn with_cls(tokens: &[Vec<usize>], lengths: &[usize]) -> (Vec<Vec<usize>>, Vec<Vec<bool>>) {
    let steps = lengths.iter().max().map_or(1, |l| l + 1);
    let mut idx = Vec::with_capacity(tokens.len());
    let mut mask = Vec::with_capacity(tokens.len());
    for (toks, &len) in tokens.iter().zip(lengths) {
        let mut row = vec![crate::corpus::PAD; steps];
        row[0] = CLS;
        row[1..=len].copy_from_slice(&toks[..len]);
        idx.push(row);
        mask.push((0..steps).map(|t| t <= len).collect());
    }
    (idx, mask)
}

fn mask_column(tape: &mut Tape, mask: &[Vec<bool>], t: usize, width: usize) -> Option<Var> {
    if mask.iter().all(|m| m[t]) {
        return None;
    }
    let mut data = Vec::with_capacity(mask.len() * width);
    for m in mask {
        data.extend(std::iter::repeat_n(if m[t] { 1.0 } else { 0.0 }, width));
    }
    Some(tape.constant(Tensor::matrix(mask.len(), width, data).expect("mask shape")))
}

fn run_direction(
    tape: &mut Tape,
    bound: &Bound,
    p: &LstmParams,
    xw: Var,
    masks: &[Option<Var>],
    batch: usize,
    d_h: usize,
    reverse: bool,
) -> Result<Vec<Var>> {
    let steps = masks.len();
    let (wh, bias) = (bound.var(p.wh), bound.var(p.b));
    let zero = tape.constant(Tensor::zeros(&[batch, d_h]));
    let (mut h, mut c) = (zero, zero);
    let mut out = vec![zero; steps];
    let order: Box<dyn Iterator<Item = usize>> = if reverse { Box::new((0..steps).rev()) } else { Box::new(0..steps) };
    for (k, t) in order.enumerate() {
        let mut gates = tape.slice_rows(xw, t * batch, (t + 1) * batch)?;
        if k > 0 {
            let rec = tape.matmul(h, wh)?;
            gates = tape.add(gates, rec)?;
        }
        let gates = tape.add_row(gates, bias)?;
        let i = tape.slice_cols(gates, 0, d_h)?;
        let i = tape.sigmoid(i)?;
        let f = tape.slice_cols(gates, d_h, 2 * d_h)?;
        let f = tape.sigmoid(f)?;
        let g = tape.slice_cols(gates, 2 * d_h, 3 * d_h)?;
        let g = tape.tanh(g)?;
        let o = tape.slice_cols(gates, 3 * d_h, 4 * d_h)?;
        let o = tape.sigmoid(o)?;
        let ig = tape.mul(i, g)?;
        c = if k > 0 {
            let fc = tape.mul(f, c)?;
            tape.add(fc, ig)?
        } else {
            ig
        };
        let tc = tape.tanh(c)?;
        h = tape.mul(o, tc)?;
        // Padding zeroes the state, so the backward pass over a shorter
        // sequence starts fresh at its last real token.
        if let Some(m) = masks[t] {
            c = tape.mul(c, m)?;
            h = tape.mul(h, m)?;
        }
        out[t] = h;
    }
    Ok(out)
}

/// Runs the encoder over `tokens` (CLS at position 0, padded to equal
/// length). Dropout on embeddings and states is active only when `train`.
pub fn encode(
    tape: &mut Tape,
    bound: &Bound,
    model: &Model,
    tokens: &[Vec<usize>],
    mask: &[Vec<bool>],
    train: bool,
    seed: u64,
) -> Result<Encoded> {
    let batch = tokens.len();
    let steps = tokens.first().map_or(0, Vec::len);
    if batch == 0 || steps == 0 {
        return Err(Error::Invalid("empty encoder input".into()));
    }
    if tokens.iter().any(|r| r.len() != steps) || mask.len() != batch || mask.iter().any(|m| m.len() != steps || !m[0]) {
        return Err(Error::Invalid("encoder input must be rectangular with position 0 real".into()));
    }
    let d_h = model.dims.d_h;
    let keep = model.encoder.keep_prob;
    let flat: Vec<usize> = (0..steps).flat_map(|t| tokens.iter().map(move |r| r[t])).collect();
    let x = tape.gather_rows(bound.var(model.encoder.embedding), &flat)?;
    let x = tape.dropout(x, keep, derive_seed(seed, 1), train)?;
    let masks: Vec<Option<Var>> = (0..steps).map(|t| mask_column(tape, mask, t, d_h)).collect();

    let mut per_dir = Vec::new();
    for (p, reverse) in [(&model.encoder.fwd, false), (&model.encoder.bwd, true)] {
        let xw = tape.matmul(x, bound.var(p.wx))?;
        per_dir.push(run_direction(tape, bound, p, xw, &masks, batch, d_h, reverse)?);
    }
    let rows: Vec<Var> =
        (0..steps).map(|t| tape.concat_cols(&[per_dir[0][t], per_dir[1][t]])).collect::<xnlu_autodiff::Result<_>>()?;
    let states = tape.concat_rows(&rows)?;
    let states = tape.dropout(states, keep, derive_seed(seed, 2), train)?;
    let lengths = mask.iter().map(|m| m.iter().filter(|&&x| x).count()).collect();
    Ok(Encoded { states, batch, steps, lengths })
}
