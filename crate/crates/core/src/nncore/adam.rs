use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::tensor::ParamTensor;
use crate::error::{Error, Result};

/// Bias-corrected Adam. Moments are allocated on the first step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    #[serde(skip)]
    pub first_moment: Vec<Array2<f64>>,
    #[serde(skip)]
    pub second_moment: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.lr >= 0.0
            && self.lr.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "adam: need 0 <= beta < 1, eps > 0, lr >= 0 (lr={}, beta1={}, beta2={}, eps={})",
                self.lr, self.beta1, self.beta2, self.eps
            )))
        }
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    /// Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, mut params: Vec<&mut ParamTensor>) -> Result<()> {
        if let Some(bad) = params
            .iter()
            .find(|p| p.grad.iter().any(|g| !g.is_finite()))
        {
            return Err(Error::Numeric(format!(
                "non-finite gradient in parameter block {}",
                bad.name
            )));
        }
        if self.first_moment.is_empty() {
            self.first_moment = params
                .iter()
                .map(|p| Array2::zeros(p.value.raw_dim()))
                .collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != params.len()
            || params
                .iter()
                .zip(&self.first_moment)
                .any(|(p, m)| p.value.dim() != m.dim())
        {
            return Err(Error::Shape(
                "optimizer moments do not match the parameter blocks".into(),
            ));
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let p = &mut **p;
            Zip::from(&mut p.value)
                .and(&mut p.grad)
                .and(m)
                .and(v)
                .for_each(|w, g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * *g;
                    *v = b2 * *v + (1.0 - b2) * *g * *g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    *g = 0.0;
                });
        }
        Ok(())
    }
}
