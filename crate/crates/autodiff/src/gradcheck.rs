//! Central finite-difference oracle for tape gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TensorError};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Coordinates sampled per parameter; smaller tensors are checked fully.
    pub max_coords_per_param: usize,
    pub seed: u64,
    /// A coordinate whose forward and backward one-sided slopes differ by
    /// more than this (relative to max(1, |central|)) sits on a kink and is
    /// reported separately instead of counting toward the maximum error.
    pub kink_threshold: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-4, max_coords_per_param: 24, seed: 0, kink_threshold: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordCheck {
    pub param: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: Vec<CoordCheck>,
    pub kinks: Vec<CoordCheck>,
}

fn evaluate<F>(f: &F, params: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let value = tape.value(loss);
    if value.len() != 1 {
        return Err(TensorError::NonScalarLoss(value.shape().to_vec()));
    }
    Ok(value.item())
}

/// Compares backward-pass gradients of `f` at `params` with central
/// differences. `f` must build the same scalar on every call.
pub fn finite_diff_check<F>(f: F, params: &[Tensor], opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let base = evaluate(&f, params)?;
    if evaluate(&f, params)?.to_bits() != base.to_bits() {
        return Err(TensorError::NonDeterministic);
    }

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| tape.grad(v).cloned().expect("leaf grad")).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport::default();
    let h = opts.step;
    for (pi, p) in params.iter().enumerate() {
        let coords: Vec<usize> = if p.len() <= opts.max_coords_per_param {
            (0..p.len()).collect()
        } else {
            let mut c = rand::seq::index::sample(&mut rng, p.len(), opts.max_coords_per_param).into_vec();
            c.sort_unstable();
            c
        };
        for index in coords {
            let mut shifted = params.to_vec();
            shifted[pi].data_mut()[index] += h;
            let plus = evaluate(&f, &shifted)?;
            shifted[pi].data_mut()[index] -= 2.0 * h;
            let minus = evaluate(&f, &shifted)?;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi].data()[index];
            let scale = numeric.abs().max(1.0);
            let check = CoordCheck { param: pi, index, analytic: a, numeric, rel_error: (a - numeric).abs() / scale };
            let one_sided_gap = ((plus - base) / h - (base - minus) / h).abs();
            if one_sided_gap > opts.kink_threshold * scale {
                report.kinks.push(check);
            } else {
                report.max_rel_error = report.max_rel_error.max(check.rel_error);
                report.checked.push(check);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn linear_function_is_exact() {
        let c = Tensor::row(vec![0.5, -2.0, 3.0]);
        let w = Tensor::row(vec![1.0, 2.0, -1.0]);
        let report = finite_diff_check(
            |tape, vars| {
                let cv = tape.constant(c.clone());
                let prod = tape.mul(vars[0], cv)?;
                tape.sum(prod)
            },
            &[w],
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-8, "{report:?}");
        assert!(report.kinks.is_empty());
    }

    #[test]
    fn relu_kink_is_reported_separately() {
        let x = Tensor::row(vec![0.0, 1.0]);
        let report = finite_diff_check(
            |tape, vars| {
                let r = tape.relu(vars[0])?;
                tape.sum(r)
            },
            &[x],
            GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.kinks.len(), 1);
        assert_eq!(report.kinks[0].index, 0);
        assert!(report.max_rel_error < 1e-8);
    }

    #[test]
    fn nondeterministic_function_rejected() {
        let counter = Cell::new(0.0);
        let err = finite_diff_check(
            |tape, vars| {
                counter.set(counter.get() + 1.0);
                let s = tape.scale(vars[0], counter.get())?;
                tape.sum(s)
            },
            &[Tensor::scalar(1.0)],
            GradCheckOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, TensorError::NonDeterministic));
    }
}
