//! Parameter layout shared by the encoder, the NLU heads and the alignment
//! module.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xnlu_autodiff::{init, ParamId, ParamStore, Tape, Tensor, Var};

use crate::error::{Error, Result};

/// Embeddings share the table with the reconstruction output layer; a wider
/// init keeps word identities apart early enough for attention to lock on.
const EMBEDDING_STD: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub intents: usize,
    pub tags: usize,
    pub d_e: usize,
    pub d_h: usize,
    /// Attention projection width.
    pub d_att: usize,
    /// Inner width of the reconstruction feed-forward.
    pub d_ff: usize,
    pub tau: f64,
    pub keep_prob: f64,
}

impl ModelDims {
    pub fn d_m(&self) -> usize {
        2 * self.d_h
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [self.vocab, self.intents, self.tags, self.d_e, self.d_h, self.d_att, self.d_ff];
        if sizes.contains(&0) {
            return Err(Error::Config(format!("zero dimension in {self:?}")));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.tau)));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::Config(format!("keep probability {} not in (0, 1]", self.keep_prob)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LstmParams {
    /// `d_e × 4d_h`, gate order input, forget, cell, output.
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub struct EncoderParams {
    pub embedding: ParamId,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub keep_prob: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct HeadParams {
    pub w_intent: ParamId,
    pub b_intent: ParamId,
    pub w_slot: ParamId,
    pub b_slot: ParamId,
}

/// The reconstruction output weights are the embedding table itself.
#[derive(Clone, Copy, Debug)]
pub struct AlignParams {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub ff1: ParamId,
    pub ff1_b: ParamId,
    pub ff2: ParamId,
    pub ff2_b: ParamId,
    pub rec_bias: ParamId,
    pub tau: f64,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub store: ParamStore,
    pub dims: ModelDims,
    pub encoder: EncoderParams,
    pub heads: HeadParams,
    pub align: AlignParams,
}

fn lstm(store: &mut ParamStore, prefix: &str, dims: &ModelDims, rng: &mut ChaCha8Rng) -> Result<LstmParams> {
    let h = dims.d_h;
    let mut bias = Tensor::zeros(&[1, 4 * h]);
    bias.data_mut()[h..2 * h].fill(1.0);
    Ok(LstmParams {
        wx: store.add(format!("{prefix}.wx"), init::xavier_uniform(dims.d_e, 4 * h, rng))?,
        wh: store.add(format!("{prefix}.wh"), init::xavier_uniform(h, 4 * h, rng))?,
        b: store.add(format!("{prefix}.b"), bias)?,
    })
}

impl Model {
    pub fn new(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let d_m = dims.d_m();
        let encoder = EncoderParams {
            embedding: s.add("embedding", init::normal(dims.vocab, dims.d_e, EMBEDDING_STD, &mut rng))?,
            fwd: lstm(&mut s, "lstm_fwd", &dims, &mut rng)?,
            bwd: lstm(&mut s, "lstm_bwd", &dims, &mut rng)?,
            keep_prob: dims.keep_prob,
        };
        let heads = HeadParams {
            w_intent: s.add("intent.w", init::xavier_uniform(dims.intents, d_m, &mut rng))?,
            b_intent: s.add("intent.b", init::zeros(1, dims.intents))?,
            w_slot: s.add("slot.w", init::xavier_uniform(dims.tags, d_m, &mut rng))?,
            b_slot: s.add("slot.b", init::zeros(1, dims.tags))?,
        };
        let align = AlignParams {
            w_q: s.add("align.w_q", init::xavier_uniform(dims.d_e, dims.d_att, &mut rng))?,
            w_k: s.add("align.w_k", init::xavier_uniform(d_m, dims.d_att, &mut rng))?,
            ff1: s.add("align.ff1", init::xavier_uniform(d_m, dims.d_ff, &mut rng))?,
            ff1_b: s.add("align.ff1_b", init::zeros(1, dims.d_ff))?,
            ff2: s.add("align.ff2", init::xavier_uniform(dims.d_ff, dims.d_e, &mut rng))?,
            ff2_b: s.add("align.ff2_b", init::zeros(1, dims.d_e))?,
            rec_bias: s.add("align.rec_bias", init::zeros(1, dims.vocab))?,
            tau: dims.tau,
        };
        Ok(Model { store: s, dims, encoder, heads, align })
    }

    /// Binds every parameter on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound { vars: self.store.ids().map(|id| tape.bind(&self.store, id)).collect() }
    }

    /// Parameter values in store order, for the finite-difference oracle.
    pub fn values(&self) -> Vec<Tensor> {
        self.store.ids().map(|id| self.store.value(id).clone()).collect()
    }

    pub fn align_param_ids(&self) -> Vec<ParamId> {
        let a = &self.align;
        vec![a.w_q, a.w_k, a.ff1, a.ff1_b, a.ff2, a.ff2_b, a.rec_bias]
    }
}

/// Tape handles for every model parameter, indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    /// Wraps leaves created in store order, e.g. by the gradient checker.
    pub fn from_vars(vars: &[Var]) -> Self {
        Bound { vars: vars.to_vec() }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.index()]
    }
}

/// Mixes a base seed with a stream label into an independent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
