use rand::seq::SliceRandom;
use rand::Rng;

use crate::funnel_env::OBS_DIM;
use crate::policy::{value_layer_sizes, Activations, Mlp, ObsNormalizer};

/// State-value baseline `V(s)` on normalized observations.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction {
    pub net: Mlp,
}

/// Regression settings for [`ValueFunction::fit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueFitSettings {
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
}

impl Default for ValueFitSettings {
    fn default() -> Self {
        Self { epochs: 5, minibatch: 64, learning_rate: 1e-3 }
    }
}

impl ValueFunction {
    pub fn init<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Self {
        Self { net: Mlp::orthogonal(&value_layer_sizes(hidden), 1.0, 1.0, rng) }
    }

    pub fn predict(&self, norm: &ObsNormalizer, obs: &[f64; OBS_DIM]) -> f64 {
        self.net.eval(&norm.normalize(obs))[0]
    }

    pub fn predict_batch(&self, norm: &ObsNormalizer, obs: &[[f64; OBS_DIM]]) -> Vec<f64> {
        obs.iter().map(|o| self.predict(norm, o)).collect()
    }

    /// Minibatch Adam on mean squared error; returns the final full-batch loss.
    pub fn fit<R: Rng + ?Sized>(
        &mut self,
        norm: &ObsNormalizer,
        obs: &[[f64; OBS_DIM]],
        targets: &[f64],
        settings: &ValueFitSettings,
        rng: &mut R,
    ) -> f64 {
        assert_eq!(obs.len(), targets.len());
        let inputs: Vec<[f64; OBS_DIM]> = obs.iter().map(|o| norm.normalize(o)).collect();
        let mut adam = Adam::new(self.net.num_params(), settings.learning_rate);
        let mut order: Vec<usize> = (0..obs.len()).collect();
        let mut grad = vec![0.0; self.net.num_params()];
        let mut act = Activations::default();
        for _ in 0..settings.epochs {
            order.shuffle(rng);
            for mb in order.chunks(settings.minibatch.max(1)) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let scale = 2.0 / mb.len() as f64;
                for &i in mb {
                    self.net.forward(&inputs[i], &mut act);
                    let err = act.output()[0] - targets[i];
                    self.net.backward(&act, &[scale * err], &mut grad);
                }
                adam.step(self.net.params_mut(), &grad);
            }
        }
        inputs.iter().zip(targets).map(|(x, t)| (self.net.eval(x)[0] - t).powi(2)).sum::<f64>() / obs.len().max(1) as f64
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}
