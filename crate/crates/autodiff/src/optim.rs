use crate::error::{Result, TensorError};
use crate::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Optional global-norm gradient clip.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, clip_norm: None }
    }
}

/// Adam with bias correction. Moments are allocated lazily on the first
/// step, one pair per parameter in store order.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, m: Vec::new(), v: Vec::new(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, index: usize) -> Option<&Tensor> {
        self.m.get(index)
    }

    pub fn second_moment(&self, index: usize) -> Option<&Tensor> {
        self.v.get(index)
    }

    /// One update over every parameter in `store`; gradients are cleared
    /// afterwards. Fails without touching anything if a gradient is missing.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        for id in store.ids() {
            if store.grad(id).is_none() {
                return Err(TensorError::MissingGrad(store.name(id).to_string()));
            }
        }
        if self.m.is_empty() {
            for id in store.ids() {
                self.m.push(Tensor::zeros(store.value(id).shape()));
                self.v.push(Tensor::zeros(store.value(id).shape()));
            }
        }
        let clip_scale = match self.config.clip_norm {
            Some(max_norm) => {
                let norm = store
                    .ids()
                    .map(|id| store.grad(id).unwrap().data().iter().map(|g| g * g).sum::<f64>())
                    .sum::<f64>()
                    .sqrt();
                if norm > max_norm { max_norm / norm } else { 1.0 }
            }
            None => 1.0,
        };
        self.t += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon, .. } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let grad = store.grad(id).unwrap().data().to_vec();
            let (m, v) = (self.m[id.index()].data_mut(), self.v[id.index()].data_mut());
            let value = store.value_mut(id).data_mut();
            for k in 0..value.len() {
                let g = grad[k] * clip_scale;
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                value[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
            if !value.iter().all(|x| x.is_finite()) {
                return Err(TensorError::NonFinite("adam_step"));
            }
        }
        store.clear_grads();
        Ok(())
    }
}
