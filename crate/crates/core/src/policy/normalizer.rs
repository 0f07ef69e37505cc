use crate::funnel_env::OBS_DIM;

/// Running per-component mean/variance of observations.
///
/// Updated between training iterations and frozen for evaluation; the
/// normalized observation is clipped to `[-clip, clip]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsNormalizer {
    pub count: f64,
    pub mean: [f64; OBS_DIM],
    pub var: [f64; OBS_DIM],
    pub clip: f64,
}

impl Default for ObsNormalizer {
    fn default() -> Self {
        Self::identity()
    }
}

impl ObsNormalizer {
    pub const MIN_STD: f64 = 1e-4;

    /// Pass-through normalizer (mean 0, variance 1, no history).
    pub fn identity() -> Self {
        Self { count: 0.0, mean: [0.0; OBS_DIM], var: [1.0; OBS_DIM], clip: 10.0 }
    }

    pub fn normalize(&self, obs: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        for k in 0..OBS_DIM {
            let std = self.var[k].sqrt().max(Self::MIN_STD);
            out[k] = ((obs[k] - self.mean[k]) / std).clamp(-self.clip, self.clip);
        }
        out
    }

    /// Merges a batch of observations (Chan et al. parallel variance update).
    pub fn update(&mut self, batch: &[[f64; OBS_DIM]]) {
        if batch.is_empty() {
            return;
        }
        let n = batch.len() as f64;
        let mut bmean = [0.0; OBS_DIM];
        for o in batch {
            for k in 0..OBS_DIM {
                bmean[k] += o[k];
            }
        }
        bmean.iter_mut().for_each(|m| *m /= n);
        let mut bvar = [0.0; OBS_DIM];
        for o in batch {
            for k in 0..OBS_DIM {
                bvar[k] += (o[k] - bmean[k]).powi(2);
            }
        }
        bvar.iter_mut().for_each(|v| *v /= n);

        if self.count == 0.0 {
            self.mean = bmean;
            self.var = bvar;
            self.count = n;
            return;
        }
        let total = self.count + n;
        for k in 0..OBS_DIM {
            let delta = bmean[k] - self.mean[k];
            let m2 = self.var[k] * self.count + bvar[k] * n + delta * delta * self.count * n / total;
            self.mean[k] += delta * n / total;
            self.var[k] = m2 / total;
        }
        self.count = total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incremental_matches_batch_statistics() {
        let data: Vec<[f64; OBS_DIM]> =
            (0..500).map(|i| std::array::from_fn(|k| ((i * (k + 3)) % 17) as f64 * 0.1 - (k as f64))).collect();
        let mut inc = ObsNormalizer::identity();
        for chunk in data.chunks(37) {
            inc.update(chunk);
        }
        let mut whole = ObsNormalizer::identity();
        whole.update(&data);
        for k in 0..OBS_DIM {
            assert!((inc.mean[k] - whole.mean[k]).abs() < 1e-12);
            assert!((inc.var[k] - whole.var[k]).abs() < 1e-12);
        }
        assert_eq!(inc.count, 500.0);
    }

    #[test]
    fn clip_bounds_output() {
        let n = ObsNormalizer { count: 1.0, mean: [0.0; OBS_DIM], var: [1e-12; OBS_DIM], clip: 5.0 };
        let out = n.normalize(&[1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(out[0], 5.0);
        assert_eq!(out[1], -5.0);
    }
}
