//! Binary policy and network files.
//!
//! Layout (all integers `u32` little-endian, all reals `f64` little-endian):
//!
//! ```text
//! magic[8] version n_sizes sizes[n_sizes]
//! for each layer: W (out x in, row-major), b (out)
//! policy files only: log_std[3] norm_count norm_mean[6] norm_var[6] norm_clip
//! ```

use std::fs;
use std::path::Path;

use super::{Mlp, ObsNormalizer, PolicyParams};
use crate::error::PolicyError;
use crate::funnel_env::{ACT_DIM, OBS_DIM};

pub const POLICY_MAGIC: &[u8; 8] = b"HNPOLICY";
pub const MLP_MAGIC: &[u8; 8] = b"HNMLPNET";
pub const FILE_VERSION: u32 = 1;

const MAX_LAYERS: usize = 64;
const MAX_WIDTH: usize = 1 << 16;

fn write_header(buf: &mut Vec<u8>, magic: &[u8; 8], sizes: &[usize]) {
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&FILE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
}

fn write_reals(buf: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], PolicyError> {
        if self.data.len() - self.pos < n {
            return Err(PolicyError::Malformed(format!("truncated while reading {what}")));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, PolicyError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn reals(&mut self, out: &mut [f64], what: &str) -> Result<(), PolicyError> {
        let bytes = self.take(out.len() * 8, what)?;
        for (dst, chunk) in out.iter_mut().zip(bytes.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    }

    fn finish(&self) -> Result<(), PolicyError> {
        if self.pos != self.data.len() {
            return Err(PolicyError::Malformed(format!("{} trailing bytes", self.data.len() - self.pos)));
        }
        Ok(())
    }
}

fn read_header(r: &mut Reader, magic: &[u8; 8]) -> Result<Vec<usize>, PolicyError> {
    if r.take(8, "magic")? != magic {
        return Err(PolicyError::Malformed("bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != FILE_VERSION {
        return Err(PolicyError::Version { found: version, expected: FILE_VERSION });
    }
    let n = r.u32("layer count")? as usize;
    if !(2..=MAX_LAYERS).contains(&n) {
        return Err(PolicyError::Malformed(format!("implausible layer count {n}")));
    }
    let mut sizes = Vec::with_capacity(n);
    for _ in 0..n {
        let s = r.u32("layer sizes")? as usize;
        if s == 0 || s > MAX_WIDTH {
            return Err(PolicyError::Malformed(format!("implausible layer width {s}")));
        }
        sizes.push(s);
    }
    Ok(sizes)
}

/// Compares declared sizes to `expected`, naming the first offending layer.
fn check_shape(sizes: &[usize], expected: &[usize]) -> Result<(), PolicyError> {
    if sizes.len() != expected.len() {
        let layer = sizes.len().min(expected.len()).saturating_sub(1);
        return Err(PolicyError::ShapeMismatch {
            layer,
            detail: format!("file has {} layers, expected {}", sizes.len() - 1, expected.len() - 1),
        });
    }
    for l in 0..sizes.len() - 1 {
        if sizes[l] != expected[l] || sizes[l + 1] != expected[l + 1] {
            return Err(PolicyError::ShapeMismatch {
                layer: l,
                detail: format!(
                    "file has {}x{}, expected {}x{}",
                    sizes[l + 1],
                    sizes[l],
                    expected[l + 1],
                    expected[l]
                ),
            });
        }
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>, PolicyError> {
    fs::read(path).map_err(|source| PolicyError::Io { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, buf: &[u8]) -> Result<(), PolicyError> {
    fs::write(path, buf).map_err(|source| PolicyError::Io { path: path.to_path_buf(), source })
}

impl PolicyParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_header(&mut buf, POLICY_MAGIC, self.mean_net.sizes());
        write_reals(&mut buf, self.mean_net.params());
        write_reals(&mut buf, &self.log_std);
        let n = &self.normalizer;
        write_reals(&mut buf, &[n.count]);
        write_reals(&mut buf, &n.mean);
        write_reals(&mut buf, &n.var);
        write_reals(&mut buf, &[n.clip]);
        buf
    }

    /// Parses a policy; its input and output widths must match the environment.
    pub fn from_bytes(data: &[u8]) -> Result<Self, PolicyError> {
        Self::parse(data, None)
    }

    /// Parses a policy whose layer sizes must equal `expected` exactly.
    pub fn from_bytes_with_shape(data: &[u8], expected: &[usize]) -> Result<Self, PolicyError> {
        Self::parse(data, Some(expected))
    }

    fn parse(data: &[u8], expected: Option<&[usize]>) -> Result<Self, PolicyError> {
        let mut r = Reader { data, pos: 0 };
        let sizes = read_header(&mut r, POLICY_MAGIC)?;
        match expected {
            Some(e) => check_shape(&sizes, e)?,
            None => {
                if sizes[0] != OBS_DIM {
                    return Err(PolicyError::ShapeMismatch {
                        layer: 0,
                        detail: format!("input width {} but observations have {OBS_DIM}", sizes[0]),
                    });
                }
                let last = sizes[sizes.len() - 1];
                if last != ACT_DIM {
                    return Err(PolicyError::ShapeMismatch {
                        layer: sizes.len() - 2,
                        detail: format!("output width {last} but actions have {ACT_DIM}"),
                    });
                }
            }
        }
        let mut mean_net = Mlp::zeros(&sizes);
        r.reals(mean_net.params_mut(), "network parameters")?;
        let mut log_std = [0.0; ACT_DIM];
        r.reals(&mut log_std, "log_std")?;
        let mut normalizer = ObsNormalizer::identity();
        let mut scalar = [0.0];
        r.reals(&mut scalar, "normalizer count")?;
        normalizer.count = scalar[0];
        r.reals(&mut normalizer.mean, "normalizer mean")?;
        r.reals(&mut normalizer.var, "normalizer variance")?;
        r.reals(&mut scalar, "normalizer clip")?;
        normalizer.clip = scalar[0];
        r.finish()?;
        Ok(Self { mean_net, log_std, normalizer })
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        Self::from_bytes(&read_file(path)?)
    }

    pub fn load_with_shape(path: &Path, expected: &[usize]) -> Result<Self, PolicyError> {
        Self::from_bytes_with_shape(&read_file(path)?, expected)
    }
}

/// Writes a bare network (used for the value function in checkpoints).
pub fn save_mlp(net: &Mlp, path: &Path) -> Result<(), PolicyError> {
    let mut buf = Vec::new();
    write_header(&mut buf, MLP_MAGIC, net.sizes());
    write_reals(&mut buf, net.params());
    write_file(path, &buf)
}

pub fn load_mlp(path: &Path, expected: &[usize]) -> Result<Mlp, PolicyError> {
    let data = read_file(path)?;
    let mut r = Reader { data: &data, pos: 0 };
    let sizes = read_header(&mut r, MLP_MAGIC)?;
    check_shape(&sizes, expected)?;
    let mut net = Mlp::zeros(&sizes);
    r.reals(net.params_mut(), "network parameters")?;
    r.finish()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::DEFAULT_HIDDEN;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_policy() -> PolicyParams {
        let mut p = PolicyParams::init(&DEFAULT_HIDDEN, &mut ChaCha8Rng::seed_from_u64(11));
        p.log_std = [-0.3, 0.1, -1.7];
        p.normalizer.update(&[[0.1, 0.2, 0.3, 0.0, 0.5, 0.0], [-0.4, 0.0, 0.9, 0.2, 0.1, 0.0]]);
        p
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample_policy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        p.save(&path).unwrap();
        let q = PolicyParams::load(&path).unwrap();
        assert_eq!(p.to_bytes(), q.to_bytes());
        for (a, b) in p.flat_params().iter().zip(q.flat_params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(p.normalizer, q.normalizer);
        let probe = [0.2, -0.1, 0.4, 0.3, 0.0, 0.1];
        assert_eq!(p.forward_array(&probe), q.forward_array(&probe));
    }

    #[test]
    fn truncated_file_errors() {
        let bytes = sample_policy().to_bytes();
        for cut in [0, 5, 12, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(PolicyParams::from_bytes(&bytes[..cut]), Err(PolicyError::Malformed(_))), "cut {cut}");
        }
    }

    #[test]
    fn version_mismatch_errors() {
        let mut bytes = sample_policy().to_bytes();
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(PolicyParams::from_bytes(&bytes), Err(PolicyError::Version { found: 7, expected: 1 })));
    }

    #[test]
    fn wrong_layer_size_names_layer() {
        let other = PolicyParams::init(&[32, 16], &mut ChaCha8Rng::seed_from_u64(1));
        let err = PolicyParams::from_bytes_with_shape(&other.to_bytes(), &[6, 32, 32, 3]).unwrap_err();
        match err {
            PolicyError::ShapeMismatch { layer, detail } => {
                assert_eq!(layer, 1);
                assert!(detail.contains("16x32"), "{detail}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn wrong_output_width_rejected() {
        let mut buf = Vec::new();
        write_header(&mut buf, POLICY_MAGIC, &[6, 4, 2]);
        write_reals(&mut buf, &[0.0; 6 * 4 + 4 + 4 * 2 + 2 + 3 + 14]);
        assert!(matches!(PolicyParams::from_bytes(&buf), Err(PolicyError::ShapeMismatch { layer: 1, .. })));
    }

    #[test]
    fn mlp_round_trip() {
        let net = Mlp::orthogonal(&[6, 8, 1], 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(2));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.bin");
        save_mlp(&net, &path).unwrap();
        assert_eq!(load_mlp(&path, &[6, 8, 1]).unwrap(), net);
        assert!(load_mlp(&path, &[6, 9, 1]).is_err());
    }
}
