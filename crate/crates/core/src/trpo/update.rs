use log::{debug, warn};

use crate::funnel_env::{ACT_DIM, OBS_DIM};
use crate::geom::Vec3;
use crate::policy::{ActionDistribution, Activations, PolicyParams};

/// Trust-region step settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrpoSettings {
    pub kl_target: f64,
    pub cg_iterations: usize,
    pub cg_damping: f64,
    pub line_search_backtracks: usize,
}

impl Default for TrpoSettings {
    fn default() -> Self {
        Self { kl_target: 0.01, cg_iterations: 10, cg_damping: 0.1, line_search_backtracks: 10 }
    }
}

/// Outcome of one policy update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateDiagnostics {
    pub accepted: bool,
    /// Sampled `KL(old || new)` of the accepted step (0 when rejected).
    pub kl: f64,
    /// Surrogate improvement of the accepted step (0 when rejected).
    pub improvement: f64,
    /// Number of halvings before acceptance; equals the backtrack budget on failure.
    pub ls_depth: usize,
    pub cg_residual: f64,
    pub used_gradient_fallback: bool,
    pub grad_norm: f64,
    /// Set when the iteration was aborted (e.g. non-finite gradient).
    pub aborted: Option<String>,
}

/// Cached forward passes of the pre-update policy over a batch.
pub struct BatchCache {
    obs: Vec<[f64; OBS_DIM]>,
    acts: Vec<Activations>,
    old: Vec<ActionDistribution>,
}

impl BatchCache {
    pub fn new(policy: &PolicyParams, obs: &[[f64; OBS_DIM]]) -> Self {
        let mut acts = Vec::with_capacity(obs.len());
        let mut old = Vec::with_capacity(obs.len());
        for o in obs {
            let mut a = Activations::default();
            old.push(policy.forward_cached(o, &mut a));
            acts.push(a);
        }
        Self { obs: obs.to_vec(), acts, old }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn old_distributions(&self) -> &[ActionDistribution] {
        &self.old
    }

    /// Damped Fisher-vector product `(F + damping I) v` of the mean KL at the cached parameters.
    ///
    /// For a diagonal Gaussian with state-independent log-std the Fisher matrix is block
    /// diagonal: `E[J^T diag(1/sigma^2) J]` for the mean network and `2 I` for the log-std.
    pub fn fisher_vector_product(&self, policy: &PolicyParams, v: &[f64], damping: f64) -> Vec<f64> {
        let n_net = policy.mean_net.num_params();
        let mut out = vec![0.0; v.len()];
        let inv_var: [f64; ACT_DIM] = std::array::from_fn(|k| (-2.0 * policy.log_std[k]).exp());
        for act in &self.acts {
            let jv = policy.mean_net.jvp(act, &v[..n_net]);
            let w: Vec<f64> = (0..ACT_DIM).map(|k| jv[k] * inv_var[k]).collect();
            policy.mean_net.backward(act, &w, &mut out[..n_net]);
        }
        let inv_n = 1.0 / self.len() as f64;
        for (o, vi) in out[..n_net].iter_mut().zip(&v[..n_net]) {
            *o = *o * inv_n + damping * vi;
        }
        for k in 0..ACT_DIM {
            out[n_net + k] = 2.0 * v[n_net + k] + damping * v[n_net + k];
        }
        out
    }
}

/// Conjugate gradient for `A x = b` with `A` symmetric positive definite.
pub fn conjugate_gradient<F: FnMut(&[f64]) -> Vec<f64>>(mut apply: F, b: &[f64], iterations: usize) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    let tol = 1e-24 * rr;
    for _ in 0..iterations {
        if rr <= tol {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn surrogate_and_kl(
    policy: &PolicyParams,
    cache: &BatchCache,
    actions: &[Vec3],
    old_logp: &[f64],
    adv: &[f64],
) -> (f64, f64) {
    let mut sur = 0.0;
    let mut kl = 0.0;
    for i in 0..cache.len() {
        let d = policy.forward_array(&cache.obs[i]);
        sur += (d.log_prob(actions[i]) - old_logp[i]).exp() * adv[i];
        kl += cache.old[i].kl(&d);
    }
    let n = cache.len() as f64;
    (sur / n, kl / n)
}

/// One natural-gradient step on the importance-sampled surrogate `E[ratio * A]`.
///
/// `obs` are raw observations (the policy normalizer is applied internally);
/// `advantages` should already be normalized. Parameters are left untouched
/// unless a line-search step is accepted.
pub fn trpo_update(
    policy: &mut PolicyParams,
    obs: &[[f64; OBS_DIM]],
    actions: &[Vec3],
    advantages: &[f64],
    settings: &TrpoSettings,
) -> UpdateDiagnostics {
    assert!(!obs.is_empty(), "empty batch");
    assert!(obs.len() == actions.len() && obs.len() == advantages.len());
    let mut diag = UpdateDiagnostics { ls_depth: settings.line_search_backtracks, ..Default::default() };
    let cache = BatchCache::new(policy, obs);
    let n_net = policy.mean_net.num_params();
    let n = obs.len() as f64;

    // Surrogate gradient at the current parameters (ratio = 1).
    let mut g = vec![0.0; policy.num_params()];
    let mut old_logp = Vec::with_capacity(obs.len());
    for i in 0..obs.len() {
        let d = &cache.old[i];
        old_logp.push(d.log_prob(actions[i]));
        let mut dm = [0.0; ACT_DIM];
        for k in 0..ACT_DIM {
            let var = d.std[k] * d.std[k];
            let diff = actions[i][k] - d.mean[k];
            dm[k] = advantages[i] * diff / var;
            g[n_net + k] += advantages[i] * (diff * diff / var - 1.0);
        }
        policy.mean_net.backward(&cache.acts[i], &dm, &mut g[..n_net]);
    }
    g.iter_mut().for_each(|x| *x /= n);
    diag.grad_norm = dot(&g, &g).sqrt();
    if !diag.grad_norm.is_finite() {
        let msg = "non-finite surrogate gradient".to_string();
        warn!("{msg}; skipping policy update");
        diag.aborted = Some(msg);
        return diag;
    }
    if diag.grad_norm == 0.0 {
        debug!("zero surrogate gradient; policy unchanged");
        return diag;
    }

    let fvp = |v: &[f64]| cache.fisher_vector_product(policy, v, settings.cg_damping);
    let mut step = conjugate_gradient(fvp, &g, settings.cg_iterations);
    let fs = fvp(&step);
    let resid: f64 = fs.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    diag.cg_residual = resid / diag.grad_norm;
    if !(diag.cg_residual < 1e-2) {
        warn!("conjugate gradient residual {:.3e} >= 1e-2; using plain gradient direction", diag.cg_residual);
        step = g.clone();
        diag.used_gradient_fallback = true;
    }
    let shs = dot(&step, &fvp(&step));
    if !(shs > 0.0 && shs.is_finite()) {
        let msg = format!("degenerate step curvature {shs}");
        warn!("{msg}; skipping policy update");
        diag.aborted = Some(msg);
        return diag;
    }
    let beta = (2.0 * settings.kl_target / shs).sqrt();
    let theta0 = policy.flat_params();
    let sur0 = advantages.iter().sum::<f64>() / n;

    let mut trial = policy.clone();
    let mut frac = 1.0;
    for depth in 0..settings.line_search_backtracks {
        let theta: Vec<f64> = theta0.iter().zip(&step).map(|(t, s)| t + frac * beta * s).collect();
        trial.set_flat_params(&theta);
        let (sur, kl) = surrogate_and_kl(&trial, &cache, actions, &old_logp, advantages);
        let improvement = sur - sur0;
        if improvement > 0.0 && kl <= settings.kl_target && kl.is_finite() {
            *policy = trial;
            diag.accepted = true;
            diag.kl = kl;
            diag.improvement = improvement;
            diag.ls_depth = depth;
            return diag;
        }
        frac *= 0.5;
    }
    debug!("line search failed after {} backtracks; policy unchanged", settings.line_search_backtracks);
    diag
}
