/// Generalized advantage estimates for one episode.
///
/// `values[t]` is `V(s_t)`; `bootstrap` is `V(s_T)` after the last step, which
/// callers set to zero for absorbing terminals.
pub fn gae_episode(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len());
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_v - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    adv
}

/// Advantages and value targets over a batch of episodes.
///
/// Returns `(advantages, returns)` with `returns = advantages + values`; the
/// advantages are not normalized.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    episode_ends: &[usize],
    bootstraps: &[f64],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(episode_ends.len(), bootstraps.len());
    let mut adv = Vec::with_capacity(rewards.len());
    let mut start = 0;
    for (&end, &b) in episode_ends.iter().zip(bootstraps) {
        adv.extend(gae_episode(&rewards[start..end], &values[start..end], b, gamma, lambda));
        start = end;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Shifts and scales to zero mean and unit variance (no-op scaling when constant).
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for x in xs.iter_mut() {
        *x -= mean;
        if std > 1e-8 {
            *x /= std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `A_t = sum_l (gamma lambda)^l delta_{t+l}` evaluated term by term.
    fn brute_force(r: &[f64], v: &[f64], boot: f64, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let vnext = |t: usize| if t + 1 < n { v[t + 1] } else { boot };
        (0..n)
            .map(|t| {
                let mut s = 0.0;
                for k in t..n {
                    let delta = r[k] + g * vnext(k) - v[k];
                    s += (g * l).powi((k - t) as i32) * delta;
                }
                s
            })
            .collect()
    }

    #[test]
    fn matches_double_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r: Vec<f64> = (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..20).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let boot = if rng.gen_bool(0.5) { rng.gen_range(-5.0..5.0) } else { 0.0 };
            let (g, l) = (rng.gen_range(0.8..1.0), rng.gen_range(0.0..1.0));
            let a = gae_episode(&r, &v, boot, g, l);
            let b = brute_force(&r, &v, boot, g, l);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let r = [1.0, -0.5, 2.0];
        let v = [0.3, 0.7, -0.2];
        let a = gae_episode(&r, &v, 0.4, 0.9, 0.0);
        assert_eq!(a[0], 1.0 + 0.9 * 0.7 - 0.3);
        assert_eq!(a[1], -0.5 + 0.9 * -0.2 - 0.7);
        assert_eq!(a[2], 2.0 + 0.9 * 0.4 - -0.2);
    }

    #[test]
    fn unit_gamma_lambda_zero_values_is_reward_to_go() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let a = gae_episode(&r, &[0.0; 4], 0.0, 1.0, 1.0);
        assert_eq!(a, vec![10.0, 9.0, 7.0, 4.0]);
    }

    #[test]
    fn episodes_do_not_leak() {
        let r = [1.0, 1.0, 1.0, 1.0, 1.0];
        let v = [0.0; 5];
        let (a, ret) = compute_gae(&r, &v, &[2, 5], &[0.0, 0.0], 1.0, 1.0);
        assert_eq!(a, vec![2.0, 1.0, 3.0, 2.0, 1.0]);
        assert_eq!(ret, a);
    }

    #[test]
    fn normalize_gives_zero_mean_unit_variance() {
        let mut x = vec![1.0, 2.0, 3.0, 10.0];
        normalize(&mut x);
        let m: f64 = x.iter().sum::<f64>() / 4.0;
        let v: f64 = x.iter().map(|a| a * a).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        let mut z = vec![0.0; 3];
        normalize(&mut z);
        assert_eq!(z, vec![0.0; 3]);
    }
}
