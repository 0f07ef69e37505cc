use super::chain::KinematicChain;
use super::layout::{HapticSphereLayout, SphereCommand};
use crate::geom::Vec3;

const ARMIJO: f64 = 1e-4;

/// Gradient-descent budget for one solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IkConfig {
    pub iterations: usize,
    pub initial_step: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Cap on any single coordinate change per iteration (radians or metres).
    pub max_delta: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self { iterations: 50, initial_step: 1.0, shrink: 0.5, max_backtracks: 30, max_delta: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IkResult {
    pub q: Vec<f64>,
    pub energy: f64,
    pub initial_energy: f64,
    pub iterations: usize,
    pub diagnostic: Option<String>,
}

/// `sum_i w_i |p(q, r_i) - desired_i|^2`.
pub fn ik_energy(chain: &KinematicChain, layout: &HapticSphereLayout, q: &[f64], commands: &[SphereCommand]) -> f64 {
    let pose = chain.forward_kinematics(q);
    commands
        .iter()
        .map(|c| {
            let s = layout.spheres[c.sphere];
            c.weight * chain.point(&pose, s.link, s.local).distance_squared(c.desired)
        })
        .sum()
}

fn energy_and_gradient(chain: &KinematicChain, layout: &HapticSphereLayout, q: &[f64], commands: &[SphereCommand]) -> (f64, Vec<f64>) {
    let pose = chain.forward_kinematics(q);
    let mut e = 0.0;
    let mut g = vec![0.0; q.len()];
    for c in commands {
        let s = layout.spheres[c.sphere];
        let p = chain.point(&pose, s.link, s.local);
        let r: Vec3 = p - c.desired;
        e += c.weight * r.norm_squared();
        for (k, col) in chain.point_jacobian(&pose, s.link, p).iter().enumerate() {
            g[k] += 2.0 * c.weight * col.dot(r);
        }
    }
    (e, g)
}

/// Projected gradient descent with Armijo backtracking, warm-started at `q0`.
///
/// The trial step starts at `initial_step`, shortened if needed so no coordinate moves
/// more than `max_delta`.
/// Each iterate is clamped into the joint limits; the best iterate is returned, so
/// the final energy never exceeds the starting one.
pub fn ik_solve(chain: &KinematicChain, layout: &HapticSphereLayout, q0: &[f64], commands: &[SphereCommand], cfg: &IkConfig) -> IkResult {
    let mut q = q0.to_vec();
    chain.clamp(&mut q);
    let (mut e, mut g) = energy_and_gradient(chain, layout, &q, commands);
    let initial_energy = e;
    if !e.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return IkResult { q: q0.to_vec(), energy: e, initial_energy, iterations: 0, diagnostic: Some("non-finite IK energy".into()) };
    }
    let mut iterations = 0;
    for _ in 0..cfg.iterations {
        if e == 0.0 {
            break;
        }
        let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut step = cfg.initial_step.min(cfg.max_delta / gmax);
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let mut trial: Vec<f64> = q.iter().zip(&g).map(|(v, d)| v - step * d).collect();
            chain.clamp(&mut trial);
            let et = ik_energy(chain, layout, &trial, commands);
            // Armijo condition along the projected step.
            let slope: f64 = trial.iter().zip(&q).zip(&g).map(|((t, v), d)| d * (t - v)).sum();
            if et < e && et <= e + ARMIJO * slope {
                accepted = Some(trial);
                break;
            }
            step *= cfg.shrink;
        }
        iterations += 1;
        match accepted {
            Some(next) => {
                q = next;
                (e, g) = energy_and_gradient(chain, layout, &q, commands);
            }
            None => break,
        }
    }
    IkResult { q, energy: e, initial_energy, iterations, diagnostic: None }
}
