//! SINR and secrecy-rate quantities for a given power vector and jamming
//! covariance, plus a Monte Carlo symbol-error comparison of Eve's detectors.
//!
//! Rates are in bits (log base 2). All positive-part clamps are per stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{seeded_rng, complex_gaussian, ChannelSet, Precoder, SystemParams, STREAM_SYMBOLS};
use crate::numerics::{check_hermitian, hermitian_inverse, hermitian_solve, identity, psd_sqrt, CMatrix, CVector, C64};

fn check_inputs(pre: &Precoder, ch: &ChannelSet, p: &[f64], sigma: &CMatrix) -> Result<()> {
    let k = pre.users();
    if p.len() != k {
        return Err(Error::Dimension(format!("power vector has {} entries, expected {k}", p.len())));
    }
    if let Some(v) = p.iter().find(|v| !(**v >= -1e-12)) {
        return Err(Error::InvalidParams(format!("negative stream power {v}")));
    }
    let l = ch.b.nrows();
    if sigma.shape() != (l, l) {
        return Err(Error::Dimension(format!(
            "jamming covariance is {}x{}, expected {l}x{l}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    check_hermitian(sigma)
}

/// Jamming-plus-noise covariance seen by Eve, `sigma2 I + G^H Sigma G`.
pub fn eve_noise_covariance(ch: &ChannelSet, sigma: &CMatrix, sigma2: f64) -> CMatrix {
    let z = ch.g.ncols();
    identity(z).scale(sigma2) + ch.g.adjoint() * sigma * &ch.g
}

/// Per-user SINR with all other streams and the received jamming as interference.
pub fn sinr_user(pre: &Precoder, ch: &ChannelSet, p: &[f64], sigma: &CMatrix, sigma2: f64) -> Result<Vec<f64>> {
    check_inputs(pre, ch, p, sigma)?;
    let k = pre.users();
    Ok((0..k)
        .map(|user| {
            let bk: CVector = ch.b.column(user).into_owned();
            let jam = crate::numerics::quad_form(sigma, &bk).max(0.0);
            let interference: f64 = (0..k).filter(|&i| i != user).map(|i| p[i] * pre.gains[(user, i)]).sum();
            p[user] * pre.gains[(user, user)] / (interference + jam + sigma2)
        })
        .collect())
}

/// Eve's SINR per stream with an MMSE receive beamformer and all other
/// streams as interference: `q / (1 - q)` with `q = p_k a_k^H M^-1 a_k`.
pub fn sinr_eve_full(pre: &Precoder, ch: &ChannelSet, p: &[f64], sigma: &CMatrix, sigma2: f64) -> Result<Vec<f64>> {
    check_inputs(pre, ch, p, sigma)?;
    let mut m = eve_noise_covariance(ch, sigma, sigma2);
    for (i, col) in pre.a.column_iter().enumerate() {
        m += (&col * col.adjoint()).scale(p[i]);
    }
    let x = hermitian_solve(&m, &pre.a)?;
    Ok((0..pre.users())
        .map(|k| {
            let q = p[k] * (pre.a.column(k).adjoint() * x.column(k))[(0, 0)].re;
            q / (1.0 - q)
        })
        .collect())
}

/// Upper bound on Eve's SINR that drops inter-stream interference:
/// `p_k a_k^H (sigma2 I + G^H Sigma G)^-1 a_k`.
pub fn sinr_eve_upper(pre: &Precoder, ch: &ChannelSet, p: &[f64], sigma: &CMatrix, sigma2: f64) -> Result<Vec<f64>> {
    check_inputs(pre, ch, p, sigma)?;
    let r = eve_noise_covariance(ch, sigma, sigma2);
    let x = hermitian_solve(&r, &pre.a)?;
    Ok((0..pre.users())
        .map(|k| p[k] * (pre.a.column(k).adjoint() * x.column(k))[(0, 0)].re)
        .collect())
}

/// `[a - b]^+`.
fn positive_part(v: f64) -> f64 {
    v.max(0.0)
}

/// Secrecy rate and its two lower bounds per stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecrecyBounds {
    pub c_se: Vec<f64>,
    pub c_se_l1: Vec<f64>,
    pub c_se_l2: Vec<f64>,
}

pub fn secrecy_bounds(sinr_user: &[f64], sinr_eve: &[f64], sinr_eve_upper: &[f64], rate_threshold: f64) -> Result<SecrecyBounds> {
    if !(rate_threshold >= 0.0) {
        return Err(Error::InvalidParams(format!("rate threshold must be >= 0, got {rate_threshold}")));
    }
    if sinr_user.len() != sinr_eve.len() || sinr_eve.len() != sinr_eve_upper.len() {
        return Err(Error::Dimension("per-stream SINR vectors differ in length".into()));
    }
    let rate = |s: f64| (1.0 + s).log2();
    let c_se = sinr_user.iter().zip(sinr_eve).map(|(&u, &e)| positive_part(rate(u) - rate(e))).collect();
    let c_se_l1 = sinr_user.iter().zip(sinr_eve_upper).map(|(&u, &e)| positive_part(rate(u) - rate(e))).collect();
    let c_se_l2 = sinr_eve_upper.iter().map(|&e| positive_part(rate_threshold - rate(e))).collect();
    Ok(SecrecyBounds { c_se, c_se_l1, c_se_l2 })
}

/// Every per-stream quantity for one `(p, Sigma)` operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamMetrics {
    pub sinr_user: Vec<f64>,
    pub sinr_eve: Vec<f64>,
    pub sinr_eve_upper: Vec<f64>,
    /// `log2(1 + SINR_k)`.
    pub c_k: Vec<f64>,
    pub c_se: Vec<f64>,
    pub c_se_l1: Vec<f64>,
    pub c_se_l2: Vec<f64>,
}

impl StreamMetrics {
    pub fn evaluate(pre: &Precoder, ch: &ChannelSet, p: &[f64], sigma: &CMatrix, params: &SystemParams) -> Result<Self> {
        let sinr_user = sinr_user(pre, ch, p, sigma, params.sigma2)?;
        let sinr_eve = sinr_eve_full(pre, ch, p, sigma, params.sigma2)?;
        let sinr_eve_upper = sinr_eve_upper(pre, ch, p, sigma, params.sigma2)?;
        let bounds = secrecy_bounds(&sinr_user, &sinr_eve, &sinr_eve_upper, params.rate_threshold())?;
        let c_k = sinr_user.iter().map(|s| (1.0 + s).log2()).collect();
        Ok(Self {
            sinr_user,
            sinr_eve,
            sinr_eve_upper,
            c_k,
            c_se: bounds.c_se,
            c_se_l1: bounds.c_se_l1,
            c_se_l2: bounds.c_se_l2,
        })
    }

    /// `max_k SINR^U_{e,k}`.
    pub fn eta(&self) -> f64 {
        self.sinr_eve_upper.iter().copied().fold(0.0, f64::max)
    }
}

/// Symbol error rates of stream 0 at Eve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerEstimate {
    /// Joint ML detection over all K streams of the full received signal.
    pub ser_ml_full: f64,
    /// Matched filter on the single-stream model (no inter-stream interference).
    pub ser_mf_reduced: f64,
    pub trials: usize,
}

impl SerEstimate {
    /// Binomial standard error of the reduced-model estimate.
    pub fn standard_error(&self) -> f64 {
        let p = self.ser_mf_reduced;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

const QPSK: [C64; 4] = [
    C64::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    C64::new(-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    C64::new(-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
    C64::new(std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
];

fn qpsk_slice(v: C64) -> usize {
    match (v.re >= 0.0, v.im >= 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

/// QPSK Monte Carlo of Eve's detection of stream 0. Both detectors see the
/// same symbol and the same (whitened) noise draw in every trial.
pub fn ser_monte_carlo(
    pre: &Precoder,
    ch: &ChannelSet,
    p: &[f64],
    sigma: &CMatrix,
    sigma2: f64,
    trials: usize,
    seed: u64,
) -> Result<SerEstimate> {
    check_inputs(pre, ch, p, sigma)?;
    if trials < 10_000 {
        return Err(Error::InvalidParams(format!("SER estimate needs at least 10^4 trials, got {trials}")));
    }
    let k = pre.users();
    let z = pre.a.nrows();
    // Whitening by R^{-1/2} turns the jamming-plus-noise into CN(0, I).
    let whitener = psd_sqrt(&hermitian_inverse(&eve_noise_covariance(ch, sigma, sigma2))?)?;
    let steer: Vec<CVector> = (0..k)
        .map(|i| (&whitener * pre.a.column(i)).scale(p[i].max(0.0).sqrt()))
        .collect();
    let combos = 4usize.pow(k as u32);
    let hypotheses: Vec<CVector> = (0..combos)
        .map(|mut idx| {
            let mut v = CVector::zeros(z);
            for s in &steer {
                v += s * QPSK[idx % 4];
                idx /= 4;
            }
            v
        })
        .collect();
    let target_energy = steer[0].norm_squared();

    let mut rng = seeded_rng(seed, STREAM_SYMBOLS);
    let mut errors_full = 0usize;
    let mut errors_reduced = 0usize;
    let mut symbols = vec![0usize; k];
    for _ in 0..trials {
        for s in symbols.iter_mut() {
            *s = rng.random_range(0..4);
        }
        let noise = CVector::from_fn(z, |_, _| complex_gaussian(&mut rng, 1.0));
        let mut received = noise.clone();
        for (s, sym) in steer.iter().zip(&symbols) {
            received += s * QPSK[*sym];
        }
        let mut best = (f64::INFINITY, 0usize);
        for (idx, h) in hypotheses.iter().enumerate() {
            let d = (&received - h).norm_squared();
            if d < best.0 {
                best = (d, idx);
            }
        }
        if best.1 % 4 != symbols[0] {
            errors_full += 1;
        }

        let single = &steer[0] * QPSK[symbols[0]] + &noise;
        let estimate = if target_energy > 0.0 {
            (steer[0].adjoint() * single)[(0, 0)] / target_energy
        } else {
            C64::new(0.0, 0.0)
        };
        if qpsk_slice(estimate) != symbols[0] {
            errors_reduced += 1;
        }
    }
    Ok(SerEstimate {
        ser_ml_full: errors_full as f64 / trials as f64,
        ser_mf_reduced: errors_reduced as f64 / trials as f64,
        trials,
    })
}
