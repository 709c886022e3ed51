//! String-addressable dispatch over the tape primitives.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, TensorError};
use crate::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    MatMul,
    MatMulNt,
    Add,
    AddRow,
    Mul,
    Scale,
    Tanh,
    Sigmoid,
    Relu,
    ConcatCols,
    ConcatRows,
    SliceCols,
    SliceRows,
    Embedding,
    Softmax,
    CrossEntropy,
    Sum,
    Dropout,
}

const NAMES: &[(OpKind, &str)] = &[
    (OpKind::MatMul, "matmul"),
    (OpKind::MatMulNt, "matmul_nt"),
    (OpKind::Add, "add"),
    (OpKind::AddRow, "add_row"),
    (OpKind::Mul, "mul"),
    (OpKind::Scale, "scale"),
    (OpKind::Tanh, "tanh"),
    (OpKind::Sigmoid, "sigmoid"),
    (OpKind::Relu, "relu"),
    (OpKind::ConcatCols, "concat_cols"),
    (OpKind::ConcatRows, "concat_rows"),
    (OpKind::SliceCols, "slice_cols"),
    (OpKind::SliceRows, "slice_rows"),
    (OpKind::Embedding, "embedding"),
    (OpKind::Softmax, "softmax"),
    (OpKind::CrossEntropy, "cross_entropy"),
    (OpKind::Sum, "sum"),
    (OpKind::Dropout, "dropout"),
];

impl OpKind {
    pub const ALL: [OpKind; 18] = [
        OpKind::MatMul,
        OpKind::MatMulNt,
        OpKind::Add,
        OpKind::AddRow,
        OpKind::Mul,
        OpKind::Scale,
        OpKind::Tanh,
        OpKind::Sigmoid,
        OpKind::Relu,
        OpKind::ConcatCols,
        OpKind::ConcatRows,
        OpKind::SliceCols,
        OpKind::SliceRows,
        OpKind::Embedding,
        OpKind::Softmax,
        OpKind::CrossEntropy,
        OpKind::Sum,
        OpKind::Dropout,
    ];

    pub fn name(self) -> &'static str {
        NAMES.iter().find(|(k, _)| *k == self).map(|(_, n)| *n).unwrap()
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = TensorError;

    fn from_str(s: &str) -> Result<Self> {
        NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(k, _)| *k)
            .ok_or_else(|| TensorError::UnknownOp(s.to_string()))
    }
}

/// Attributes consumed by the primitives that need them.
#[derive(Clone, Debug, Default)]
pub struct Attrs {
    pub start: Option<usize>,
    pub end: Option<usize>,
    pub indices: Vec<usize>,
    pub factor: Option<f64>,
    pub mask: Option<Vec<bool>>,
    pub targets: Vec<usize>,
    pub weights: Vec<f64>,
    pub keep_prob: Option<f64>,
    pub seed: u64,
    pub train: bool,
}

fn missing(op: &'static str, what: &str) -> TensorError {
    TensorError::BadAttr { op, msg: format!("missing attribute `{what}`") }
}

fn arity(op: OpKind, inputs: &[Var], n: usize) -> Result<()> {
    if inputs.len() == n {
        Ok(())
    } else {
        Err(TensorError::BadAttr { op: op.name(), msg: format!("expected {n} inputs, got {}", inputs.len()) })
    }
}

impl Tape {
    /// Applies a primitive by kind. The typed methods on [`Tape`] are the
    /// usual entry point; this exists for table-driven callers.
    pub fn apply(&mut self, kind: OpKind, inputs: &[Var], attrs: &Attrs) -> Result<Var> {
        let name = kind.name();
        match kind {
            OpKind::ConcatCols => return self.concat_cols(inputs),
            OpKind::ConcatRows => return self.concat_rows(inputs),
            OpKind::MatMul | OpKind::MatMulNt | OpKind::Add | OpKind::AddRow | OpKind::Mul => {
                arity(kind, inputs, 2)?
            }
            _ => arity(kind, inputs, 1)?,
        }
        let a = inputs[0];
        match kind {
            OpKind::MatMul => self.matmul(a, inputs[1]),
            OpKind::MatMulNt => self.matmul_nt(a, inputs[1]),
            OpKind::Add => self.add(a, inputs[1]),
            OpKind::AddRow => self.add_row(a, inputs[1]),
            OpKind::Mul => self.mul(a, inputs[1]),
            OpKind::Scale => self.scale(a, attrs.factor.ok_or_else(|| missing(name, "factor"))?),
            OpKind::Tanh => self.tanh(a),
            OpKind::Sigmoid => self.sigmoid(a),
            OpKind::Relu => self.relu(a),
            OpKind::SliceCols | OpKind::SliceRows => {
                let start = attrs.start.ok_or_else(|| missing(name, "start"))?;
                let end = attrs.end.ok_or_else(|| missing(name, "end"))?;
                if kind == OpKind::SliceCols {
                    self.slice_cols(a, start, end)
                } else {
                    self.slice_rows(a, start, end)
                }
            }
            OpKind::Embedding => self.gather_rows(a, &attrs.indices),
            OpKind::Softmax => self.softmax_rows(a, attrs.mask.as_deref()),
            OpKind::CrossEntropy => self.cross_entropy(a, &attrs.targets, &attrs.weights),
            OpKind::Sum => self.sum(a),
            OpKind::Dropout => {
                let keep = attrs.keep_prob.ok_or_else(|| missing(name, "keep_prob"))?;
                self.dropout(a, keep, attrs.seed, attrs.train)
            }
            OpKind::ConcatCols | OpKind::ConcatRows => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for kind in OpKind::ALL {
            assert_eq!(kind.name().parse::<OpKind>().unwrap(), kind);
        }
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(matches!("conv2d".parse::<OpKind>(), Err(TensorError::UnknownOp(_))));
    }
}
