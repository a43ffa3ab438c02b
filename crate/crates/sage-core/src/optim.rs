//! Adam optimizer with optional global-norm gradient clipping.
//!
//! Moment state is kept in f64 regardless of the parameter scalar type, so
//! an f32 model still gets stable moment estimates.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update. `grads[i]` of `None` leaves `params[i]` untouched (a
    /// parameter that did not influence the loss).
    pub fn step<S: Scalar>(&mut self, params: Vec<&mut Tensor<S>>, grads: &[Option<Tensor<S>>]) {
        assert_eq!(params.len(), grads.len(), "param/grad count mismatch");
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        assert_eq!(self.m.len(), params.len(), "optimizer bound to other model");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);

        for (i, (param, grad)) in params.into_iter().zip(grads).enumerate() {
            let Some(grad) = grad else { continue };
            assert_eq!(param.shape(), grad.shape(), "grad shape mismatch at {i}");
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, slot) in param.data_mut().iter_mut().enumerate() {
                let g = grad.data()[j].as_f64();
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                let upd = slot.as_f64() - self.lr * mh / (vh.sqrt() + self.eps);
                *slot = S::of_f64(upd);
            }
        }
    }
}

/// Scales all gradients down so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm<S: Scalar>(grads: &mut [Option<Tensor<S>>], max_norm: f64) {
    let sq: f64 = grads
        .iter()
        .flatten()
        .flat_map(|g| g.data())
        .map(|x| {
            let v = x.as_f64();
            v * v
        })
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = S::of_f64(max_norm / norm);
        for g in grads.iter_mut().flatten() {
            for x in g.data_mut() {
                *x *= scale;
            }
        }
    }
}
