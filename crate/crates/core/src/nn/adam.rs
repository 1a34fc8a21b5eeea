use crate::error::{Error, Result};
use crate::nn::{DenseNet, Gradients};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(parameter_count: usize) -> Self {
        Self::with_hyperparameters(parameter_count, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON)
    }

    pub fn with_hyperparameters(parameter_count: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first_moment: vec![0.0; parameter_count],
            second_moment: vec![0.0; parameter_count],
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn for_net(net: &DenseNet) -> Self {
        Self::new(net.parameter_count())
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// Updates `params` in place with bias-corrected Adam.
    ///
    /// Nothing is modified when the gradient contains a non-finite entry.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], learning_rate: f64) -> Result<()> {
        self.step_segments(&mut [params], grads, learning_rate)
    }

    fn step_segments(&mut self, segments: &mut [&mut [f64]], grads: &[f64], learning_rate: f64) -> Result<()> {
        let total: usize = segments.iter().map(|s| s.len()).sum();
        if total != self.len() || grads.len() != self.len() {
            return Err(Error::Shape(format!(
                "adam state holds {} moments, got {total} parameters and {} gradients",
                self.len(),
                grads.len()
            )));
        }
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Domain(format!("learning rate {learning_rate} must be positive")));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric {
                step: self.step_count as usize,
                what: format!("non-finite gradient entry {i}: {}", grads[i]),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let params = segments.iter_mut().flat_map(|s| s.iter_mut());
        for (((p, &g), m), v) in params
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

impl DenseNet {
    pub fn apply_adam(&mut self, state: &mut AdamState, grads: &Gradients, learning_rate: f64) -> Result<()> {
        let flat = grads.to_vec();
        if flat.len() != self.parameter_count() {
            return Err(Error::Shape("gradient layout does not match the network".into()));
        }
        state.step_segments(&mut self.parameter_segments_mut(), &flat, learning_rate)
    }
}
