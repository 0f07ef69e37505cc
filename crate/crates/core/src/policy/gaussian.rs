use rand::Rng;
use rand_distr::StandardNormal;

use crate::geom::Vec3;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7; // 0.5 * ln(2 pi)

/// Diagonal Gaussian over 3-D velocity actions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionDistribution {
    pub mean: Vec3,
    pub std: Vec3,
}

impl ActionDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let e = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        self.mean + e.component_mul(self.std)
    }

    pub fn log_prob(&self, a: Vec3) -> f64 {
        (0..3)
            .map(|k| {
                let z = (a[k] - self.mean[k]) / self.std[k];
                -0.5 * z * z - self.std[k].ln() - HALF_LN_TAU
            })
            .sum()
    }

    /// `KL(self || other)` in closed form.
    pub fn kl(&self, other: &ActionDistribution) -> f64 {
        (0..3)
            .map(|k| {
                let (so, sn) = (self.std[k], other.std[k]);
                let dm = self.mean[k] - other.mean[k];
                (sn / so).ln() + (so * so + dm * dm) / (2.0 * sn * sn) - 0.5
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        (0..3).map(|k| self.std[k].ln() + 0.5 + HALF_LN_TAU).sum()
    }
}
