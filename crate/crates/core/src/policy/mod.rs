//! Stochastic sphere policy: tanh MLP mean network over normalized
//! observations plus a state-independent log standard deviation.

mod gaussian;
mod io;
mod mlp;
mod normalizer;

pub use gaussian::ActionDistribution;
pub use io::{load_mlp, save_mlp, FILE_VERSION, MLP_MAGIC, POLICY_MAGIC};
pub use mlp::{Activations, Mlp};
pub use normalizer::ObsNormalizer;

use rand::Rng;

use crate::error::PolicyError;
use crate::funnel_env::{Observation, ACT_DIM, OBS_DIM};
use crate::geom::Vec3;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const DEFAULT_HIDDEN: [usize; 2] = [32, 32];

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub mean_net: Mlp,
    pub log_std: [f64; ACT_DIM],
    pub normalizer: ObsNormalizer,
}

impl PolicyParams {
    /// Orthogonal init with a 0.01-scaled output layer and `log_std = 0`.
    pub fn init<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Self {
        let sizes = layer_sizes(hidden, ACT_DIM);
        Self {
            mean_net: Mlp::orthogonal(&sizes, 1.0, 0.01, rng),
            log_std: [0.0; ACT_DIM],
            normalizer: ObsNormalizer::identity(),
        }
    }

    /// All-zero weights and biases.
    pub fn zeros(hidden: &[usize]) -> Self {
        Self {
            mean_net: Mlp::zeros(&layer_sizes(hidden, ACT_DIM)),
            log_std: [0.0; ACT_DIM],
            normalizer: ObsNormalizer::identity(),
        }
    }

    /// Trainable parameter count (network plus log-std).
    pub fn num_params(&self) -> usize {
        self.mean_net.num_params() + ACT_DIM
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = self.mean_net.params().to_vec();
        v.extend_from_slice(&self.log_std);
        v
    }

    /// Overwrites trainable parameters; log-std is clamped into its bounds.
    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let n = self.mean_net.num_params();
        assert_eq!(flat.len(), n + ACT_DIM, "flat parameter length mismatch");
        self.mean_net.params_mut().copy_from_slice(&flat[..n]);
        for k in 0..ACT_DIM {
            self.log_std[k] = flat[n + k].clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn std(&self) -> Vec3 {
        Vec3::new(self.log_std[0].exp(), self.log_std[1].exp(), self.log_std[2].exp())
    }

    pub fn forward(&self, obs: &Observation) -> Result<ActionDistribution, PolicyError> {
        if !obs.is_finite() {
            return Err(PolicyError::NonFiniteObservation);
        }
        Ok(self.forward_array(&obs.to_array()))
    }

    pub fn forward_array(&self, obs: &[f64; OBS_DIM]) -> ActionDistribution {
        let mut act = Activations::default();
        self.forward_cached(obs, &mut act)
    }

    /// Forward pass keeping activations for gradient computations.
    pub fn forward_cached(&self, obs: &[f64; OBS_DIM], act: &mut Activations) -> ActionDistribution {
        let x = self.normalizer.normalize(obs);
        self.mean_net.forward(&x, act);
        let m = act.output();
        ActionDistribution { mean: Vec3::new(m[0], m[1], m[2]), std: self.std() }
    }

    /// Deterministic action: the distribution mean.
    pub fn mean_action(&self, obs: &Observation) -> Result<Vec3, PolicyError> {
        Ok(self.forward(obs)?.mean)
    }

    /// Log-density of `action` and its gradient with respect to the flat parameters.
    pub fn log_prob_with_grad(&self, obs: &[f64; OBS_DIM], action: Vec3) -> (f64, Vec<f64>) {
        let mut act = Activations::default();
        let dist = self.forward_cached(obs, &mut act);
        let mut grad = vec![0.0; self.num_params()];
        let n = self.mean_net.num_params();
        let mut d_mean = [0.0; ACT_DIM];
        for k in 0..ACT_DIM {
            let var = dist.std[k] * dist.std[k];
            let diff = action[k] - dist.mean[k];
            d_mean[k] = diff / var;
            grad[n + k] = diff * diff / var - 1.0;
        }
        self.mean_net.backward(&act, &d_mean, &mut grad[..n]);
        (dist.log_prob(action), grad)
    }

    /// `KL(old || self)` at one observation and its gradient with respect to `self`'s parameters.
    pub fn kl_with_grad(&self, old: &ActionDistribution, obs: &[f64; OBS_DIM]) -> (f64, Vec<f64>) {
        let mut act = Activations::default();
        let new = self.forward_cached(obs, &mut act);
        let mut grad = vec![0.0; self.num_params()];
        let n = self.mean_net.num_params();
        let mut d_mean = [0.0; ACT_DIM];
        for k in 0..ACT_DIM {
            let vn = new.std[k] * new.std[k];
            let dm = new.mean[k] - old.mean[k];
            d_mean[k] = dm / vn;
            grad[n + k] = 1.0 - (old.std[k] * old.std[k] + dm * dm) / vn;
        }
        self.mean_net.backward(&act, &d_mean, &mut grad[..n]);
        (old.kl(&new), grad)
    }
}

fn layer_sizes(hidden: &[usize], out: usize) -> Vec<usize> {
    let mut s = vec![OBS_DIM];
    s.extend_from_slice(hidden);
    s.push(out);
    s
}

/// Value-function sizes for the given hidden widths.
pub fn value_layer_sizes(hidden: &[usize]) -> Vec<usize> {
    layer_sizes(hidden, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn perturbed(hidden: &[usize], seed: u64) -> PolicyParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = PolicyParams::init(hidden, &mut rng);
        let mut flat = p.flat_params();
        for v in flat.iter_mut() {
            *v += 0.2 * rng.sample::<f64, _>(StandardNormal);
        }
        p.set_flat_params(&flat);
        p.normalizer.mean = [0.1, -0.2, 0.0, 0.05, 0.0, -0.05];
        p.normalizer.var = [0.09, 0.16, 0.25, 0.01, 0.02, 0.04];
        p.normalizer.count = 10.0;
        p
    }

    #[test]
    fn zero_net_outputs_zero_mean() {
        let p = PolicyParams::zeros(&DEFAULT_HIDDEN);
        let d = p.forward(&Observation { rel_pos: Vec3::new(3.0, -1.0, 2.0), force: Vec3::new(0.1, 0.2, 0.3) }).unwrap();
        assert_eq!(d.mean, Vec3::ZERO);
        assert_eq!(d.std, Vec3::splat(1.0));
    }

    #[test]
    fn hidden_activations_saturate_in_range() {
        let p = perturbed(&DEFAULT_HIDDEN, 1);
        let obs = [1e6, -1e6, 5e5, 1e6, 0.0, -1e6];
        let mut act = Activations::default();
        p.forward_cached(&obs, &mut act);
        let d = p.forward_array(&obs);
        assert!(d.mean.is_finite());
        let mut x = p.normalizer.normalize(&obs);
        let (w, b) = p.mean_net.layer(0);
        for r in 0..32 {
            let z: f64 = b[r] + (0..OBS_DIM).map(|c| w[r * OBS_DIM + c] * x[c]).sum::<f64>();
            assert!((-1.0..=1.0).contains(&z.tanh()));
        }
        x.iter_mut().for_each(|v| *v = v.abs());
        assert!(x.iter().all(|&v| v <= p.normalizer.clip));
    }

    #[test]
    fn non_finite_observation_rejected() {
        let p = PolicyParams::zeros(&DEFAULT_HIDDEN);
        let obs = Observation { rel_pos: Vec3::new(f64::NAN, 0.0, 0.0), force: Vec3::ZERO };
        assert!(matches!(p.forward(&obs), Err(PolicyError::NonFiniteObservation)));
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let p = perturbed(&[5, 4], 3);
        let obs = [0.3, -0.2, 0.6, 0.1, 0.0, -0.2];
        let a = Vec3::new(0.4, -0.7, 0.2);
        let (_, grad) = p.log_prob_with_grad(&obs, a);
        let base = p.flat_params();
        let h = 1e-6;
        for k in 0..base.len() {
            let mut plus = p.clone();
            let mut f = base.clone();
            f[k] += h;
            plus.set_flat_params(&f);
            let mut minus = p.clone();
            f[k] -= 2.0 * h;
            minus.set_flat_params(&f);
            let fd = (plus.forward_array(&obs).log_prob(a) - minus.forward_array(&obs).log_prob(a)) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-3);
            assert!(rel < 1e-4, "param {k}: fd {fd} analytic {}", grad[k]);
        }
    }

    #[test]
    fn kl_gradient_matches_finite_differences() {
        let p = perturbed(&[5, 4], 4);
        let q = perturbed(&[5, 4], 5);
        let obs = [0.3, -0.2, 0.6, 0.1, 0.0, -0.2];
        let old = q.forward_array(&obs);
        let (_, grad) = p.kl_with_grad(&old, &obs);
        let base = p.flat_params();
        let h = 1e-6;
        for k in 0..base.len() {
            let mut f = base.clone();
            f[k] += h;
            let mut plus = p.clone();
            plus.set_flat_params(&f);
            f[k] -= 2.0 * h;
            let mut minus = p.clone();
            minus.set_flat_params(&f);
            let fd = (old.kl(&plus.forward_array(&obs)) - old.kl(&minus.forward_array(&obs))) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-3);
            assert!(rel < 1e-4, "param {k}: fd {fd} analytic {}", grad[k]);
        }
    }

    #[test]
    fn log_std_is_clamped() {
        let mut p = PolicyParams::zeros(&[4]);
        let mut f = p.flat_params();
        let n = f.len();
        f[n - 3] = -9.0;
        f[n - 1] = 7.0;
        p.set_flat_params(&f);
        assert_eq!(p.log_std, [LOG_STD_MIN, 0.0, LOG_STD_MAX]);
    }
}
