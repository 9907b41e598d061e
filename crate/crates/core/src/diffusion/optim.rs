use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct AdamW<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: i32,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(lr: f64, weight_decay: f64, shapes: &[(usize, usize)]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [Array2<T>], grads: &[Array2<T>], decay: &[bool]) {
        self.t += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::one() - T::of(self.beta1.powi(self.t));
        let c2 = T::one() - T::of(self.beta2.powi(self.t));
        let lr = T::of(self.lr);
        let eps = T::of(self.eps);
        let wd = T::of(self.lr * self.weight_decay);
        for i in 0..params.len() {
            if decay[i] {
                params[i].mapv_inplace(|w| w - wd * w);
            }
            Zip::from(&mut params[i])
                .and(&mut self.m[i])
                .and(&mut self.v[i])
                .and(&grads[i])
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (T::one() - b1) * g;
                    *v = b2 * *v + (T::one() - b2) * g * g;
                    let mhat = *m / c1;
                    let vhat = *v / c2;
                    *w -= lr * mhat / (vhat.sqrt() + eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![array![[1.0f64, -1.0]]];
        let g = vec![array![[0.5, -2.0]]];
        let mut opt = AdamW::new(0.1, 0.0, &[(1, 2)]);
        opt.step(&mut p, &g, &[false]);
        assert!((p[0][[0, 0]] - 0.9).abs() < 1e-6);
        assert!((p[0][[0, 1]] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn decay_shrinks_weights_without_gradient() {
        let mut p = vec![array![[2.0f64], [2.0]]];
        let g = vec![Array2::zeros((2, 1))];
        let mut opt = AdamW::new(0.1, 0.5, &[(2, 1)]);
        opt.step(&mut p, &g, &[true]);
        assert!((p[0][[0, 0]] - 1.9).abs() < 1e-12);
    }
}
