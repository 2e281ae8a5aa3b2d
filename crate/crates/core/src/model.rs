//! System parameters, Rayleigh channel synthesis and precoder construction.
//!
//! Random draws use ChaCha20 (`rand_chacha`), a counter-based generator whose
//! output for a given `(seed, stream)` pair is identical on every platform.
//! Each consumer owns a fixed stream id so that, for example, CSI perturbation
//! never shifts the channel draws of the same seed.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_inverse, CMatrix, RMatrix, C64};

/// ChaCha stream ids.
pub const STREAM_CHANNELS: u64 = 0;
pub const STREAM_CSI_ERROR: u64 = 1;
pub const STREAM_SYMBOLS: u64 = 2;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian(rng: &mut ChaCha20Rng, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

fn gaussian_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize, variance: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

/// Antenna counts and scalars, all in linear units (powers in mW).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Base station antennas.
    pub n: usize,
    /// Single-antenna users (one stream each).
    pub k: usize,
    /// Friendly jammer antennas.
    pub l: usize,
    /// Eavesdropper antennas.
    pub z: usize,
    pub sigma2: f64,
    /// Per-user SINR target.
    pub tau: f64,
    pub p_tot: f64,
}

impl SystemParams {
    pub fn new(n: usize, k: usize, l: usize, z: usize, sigma2: f64, tau: f64, p_tot: f64) -> Result<Self> {
        let params = Self { n, k, l, z, sigma2, tau, p_tot };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.l == 0 || self.z == 0 {
            return Err(Error::InvalidParams("antenna and user counts must be at least 1".into()));
        }
        if self.l < self.z {
            return Err(Error::InvalidParams(format!(
                "jammer antennas ({}) must be at least the eavesdropper antennas ({})",
                self.l, self.z
            )));
        }
        for (name, v) in [("sigma2", self.sigma2), ("tau", self.tau), ("p_tot", self.p_tot)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Rate threshold `log2(1 + tau)` in bits.
    pub fn rate_threshold(&self) -> f64 {
        (1.0 + self.tau).log2()
    }

    /// True when the jammer can zero-force every user and still span Eve's space.
    pub fn zero_forcing_possible(&self) -> bool {
        self.l >= self.k + self.z
    }
}

/// The four channel matrices. Column `k` of `f`/`b` is user `k`, column `j`
/// of `h`/`g` is eavesdropper antenna `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// BS to users, N x K.
    pub f: CMatrix,
    /// BS to Eve, N x Z.
    pub h: CMatrix,
    /// Jammer to users, L x K.
    pub b: CMatrix,
    /// Jammer to Eve, L x Z.
    pub g: CMatrix,
}

impl ChannelSet {
    /// Independent Rayleigh draws: unit-variance entries for F, H, G and
    /// `10^(gain_db_b/10)` variance for B. B is drawn at unit variance and
    /// rescaled, so the same seed yields the same B direction at every gain.
    pub fn generate_rayleigh(params: &SystemParams, gain_db_b: f64, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, STREAM_CHANNELS);
        let f = gaussian_matrix(&mut rng, params.n, params.k, 1.0);
        let h = gaussian_matrix(&mut rng, params.n, params.z, 1.0);
        let b = gaussian_matrix(&mut rng, params.l, params.k, 1.0);
        let g = gaussian_matrix(&mut rng, params.l, params.z, 1.0);
        let b = b.scale(db_to_linear(gain_db_b).sqrt());
        Self { f, h, b, g }
    }

    /// Adds `CN(0, xi2)` estimation error to G and B; F and H are kept exact.
    pub fn perturb_csi(&self, xi2: f64, seed: u64) -> Result<Self> {
        if !(xi2 >= 0.0) {
            return Err(Error::InvalidParams(format!("CSI error variance must be >= 0, got {xi2}")));
        }
        if xi2 == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = seeded_rng(seed, STREAM_CSI_ERROR);
        let dg = gaussian_matrix(&mut rng, self.g.nrows(), self.g.ncols(), xi2);
        let db = gaussian_matrix(&mut rng, self.b.nrows(), self.b.ncols(), xi2);
        Ok(Self {
            f: self.f.clone(),
            h: self.h.clone(),
            b: &self.b + db,
            g: &self.g + dg,
        })
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        let expect = [
            ("F", &self.f, params.n, params.k),
            ("H", &self.h, params.n, params.z),
            ("B", &self.b, params.l, params.k),
            ("G", &self.g, params.l, params.z),
        ];
        for (name, m, r, c) in expect {
            if m.shape() != (r, c) {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }
}

/// Unit-norm precoding directions and the derived quantities every solver uses.
#[derive(Clone, Debug)]
pub struct Precoder {
    /// N x K, unit-norm columns.
    pub u: CMatrix,
    /// Z x K, column k is `a_k = H^H u_k`.
    pub a: CMatrix,
    /// `gains[(k, i)] = |f_k^H u_i|^2`.
    pub gains: RMatrix,
    /// K x K QoS matrix: column k holds `|f_k^H u_i|^2` off the diagonal and
    /// `-|f_k^H u_k|^2 / tau` on it, so `Delta^T p + sigma2 1 <= 0` is the
    /// interference-free QoS constraint.
    pub delta: RMatrix,
    pub tau: f64,
}

impl Precoder {
    /// Channel inversion: column k of `F (F^H F)^-1`, normalized.
    pub fn channel_inversion(ch: &ChannelSet, tau: f64) -> Result<Self> {
        let (n, k) = ch.f.shape();
        if n < k {
            return Err(Error::InvalidParams(format!(
                "channel inversion needs N >= K (N = {n}, K = {k})"
            )));
        }
        let gram_inv = hermitian_inverse(&(ch.f.adjoint() * &ch.f))?;
        let mut u = &ch.f * gram_inv;
        for mut col in u.column_iter_mut() {
            let norm = col.norm();
            col /= C64::new(norm, 0.0);
        }
        Self::from_unit_columns(u, ch, tau)
    }

    /// Accepts any externally designed set of unit-norm directions.
    pub fn from_unit_columns(u: CMatrix, ch: &ChannelSet, tau: f64) -> Result<Self> {
        if u.nrows() != ch.f.nrows() || u.ncols() != ch.f.ncols() {
            return Err(Error::Dimension(format!(
                "precoder is {}x{}, expected {}x{}",
                u.nrows(),
                u.ncols(),
                ch.f.nrows(),
                ch.f.ncols()
            )));
        }
        for (k, col) in u.column_iter().enumerate() {
            if (col.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParams(format!(
                    "precoder column {k} has norm {}",
                    col.norm()
                )));
            }
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParams("tau must be positive".into()));
        }
        let k = u.ncols();
        let a = ch.h.adjoint() * &u;
        let fu = ch.f.adjoint() * &u;
        let gains = RMatrix::from_fn(k, k, |r, c| fu[(r, c)].norm_sqr());
        let delta = DMatrix::from_fn(k, k, |i, col| {
            if i == col {
                -gains[(col, col)] / tau
            } else {
                gains[(col, i)]
            }
        });
        Ok(Self { u, a, gains, delta, tau })
    }

    pub fn users(&self) -> usize {
        self.u.ncols()
    }

    /// `|a_kj|^2` as a K x Z matrix.
    pub fn eve_gains(&self) -> RMatrix {
        RMatrix::from_fn(self.a.ncols(), self.a.nrows(), |k, j| self.a[(j, k)].norm_sqr())
    }

    /// `||a_k||^2` per stream.
    pub fn eve_norms(&self) -> Vec<f64> {
        self.a.column_iter().map(|c| c.norm_squared()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::identity;

    fn params(n: usize, k: usize, l: usize, z: usize) -> SystemParams {
        SystemParams::new(n, k, l, z, 0.1, 10.0, 100.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(4, 2, 1, 2, 0.1, 10.0, 1.0).is_err());
        assert!(SystemParams::new(4, 0, 3, 2, 0.1, 10.0, 1.0).is_err());
        assert!(SystemParams::new(4, 2, 3, 2, 0.0, 10.0, 1.0).is_err());
        assert!(SystemParams::new(4, 2, 3, 2, 0.1, 10.0, -1.0).is_err());
        assert!(SystemParams::new(4, 2, 3, 2, 0.1, 10.0, 1.0).is_ok());
    }

    #[test]
    fn rayleigh_entry_variance() {
        let p = params(100, 50, 100, 50);
        let unit = ChannelSet::generate_rayleigh(&p, 0.0, 42);
        let mean = |m: &CMatrix| m.iter().map(|v| v.norm_sqr()).sum::<f64>() / m.len() as f64;
        for m in [&unit.f, &unit.h, &unit.b, &unit.g] {
            assert!((mean(m) - 1.0).abs() < 0.05, "variance {}", mean(m));
        }
        let weak = ChannelSet::generate_rayleigh(&p, -30.0, 42);
        assert!((mean(&weak.b) / 1e-3 - 1.0).abs() < 0.05);
        // same directions, only B rescaled
        assert_eq!(weak.g, unit.g);
        assert!(crate::numerics::max_abs(&(weak.b.scale(1e3f64.sqrt()) - &unit.b)) < 1e-12);
    }

    #[test]
    fn rayleigh_is_deterministic() {
        let p = params(4, 2, 5, 2);
        assert_eq!(
            ChannelSet::generate_rayleigh(&p, 0.0, 9),
            ChannelSet::generate_rayleigh(&p, 0.0, 9)
        );
        assert_ne!(
            ChannelSet::generate_rayleigh(&p, 0.0, 9),
            ChannelSet::generate_rayleigh(&p, 0.0, 10)
        );
    }

    #[test]
    fn csi_perturbation() {
        let p = params(4, 50, 200, 50);
        let ch = ChannelSet::generate_rayleigh(&p, 0.0, 1);
        assert_eq!(ch.perturb_csi(0.0, 3).unwrap(), ch);
        let noisy = ch.perturb_csi(0.1, 3).unwrap();
        assert_eq!(noisy.f, ch.f);
        assert_eq!(noisy.h, ch.h);
        let err = &noisy.g - &ch.g;
        let var = err.iter().map(|v| v.norm_sqr()).sum::<f64>() / err.len() as f64;
        assert!((var / 0.1 - 1.0).abs() < 0.05, "variance {var}");
        assert_eq!(noisy, ch.perturb_csi(0.1, 3).unwrap());
        assert!(ch.perturb_csi(-1.0, 3).is_err());
    }

    #[test]
    fn inversion_of_orthonormal_channels() {
        let p = params(3, 3, 4, 1);
        let mut ch = ChannelSet::generate_rayleigh(&p, 0.0, 2);
        ch.f = identity(3);
        let pre = Precoder::channel_inversion(&ch, 10.0).unwrap();
        assert!(crate::numerics::max_abs(&(&pre.u - identity(3))) < 1e-14);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { -0.1 } else { 0.0 };
                assert!((pre.delta[(i, j)] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_user_precoder_is_matched_filter() {
        let p = params(4, 1, 2, 1);
        let ch = ChannelSet::generate_rayleigh(&p, 0.0, 5);
        let pre = Precoder::channel_inversion(&ch, 4.0).unwrap();
        let f = ch.f.column(0);
        let expect = f / C64::new(f.norm(), 0.0);
        assert!((pre.u.column(0) - expect).norm() < 1e-12);
        assert!((pre.delta[(0, 0)] + f.norm_squared() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn inversion_zero_forces_users() {
        let p = params(4, 2, 3, 1);
        for seed in 0..20 {
            let ch = ChannelSet::generate_rayleigh(&p, 0.0, seed);
            let pre = Precoder::channel_inversion(&ch, 10.0).unwrap();
            for col in pre.u.column_iter() {
                assert!((col.norm() - 1.0).abs() < 1e-12);
            }
            for k in 0..2 {
                for i in 0..2 {
                    let ip = (ch.f.column(k).adjoint() * pre.u.column(i))[(0, 0)].norm();
                    if i != k {
                        assert!(ip < 1e-10, "leak {ip}");
                        assert!(pre.delta[(i, k)].abs() < 1e-20);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_non_unit_precoder() {
        let p = params(3, 2, 3, 1);
        let ch = ChannelSet::generate_rayleigh(&p, 0.0, 5);
        let u = CMatrix::from_element(3, 2, C64::new(1.0, 0.0));
        assert!(Precoder::from_unit_columns(u, &ch, 1.0).is_err());
    }
}
