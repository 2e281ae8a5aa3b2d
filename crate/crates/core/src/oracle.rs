//! Brute-force reference for tiny instances with a single eavesdropper antenna.
//!
//! With `Z = 1` a rank-one covariance `Sigma = q q^H` is enough. Only the part
//! of `q` inside `span{g, b_1, .., b_K}` changes any SINR, so `q` is searched
//! on a grid over the unit sphere of that subspace (global phase removed) and
//! then refined by a shrinking local grid. Along each direction the stream
//! powers are the minimal QoS powers for the leaked jamming, and every
//! eavesdropper bound is a ratio of affine functions of the jamming power, so
//! the best power on the ray is found exactly among the endpoints and pairwise
//! crossings.

use crate::error::{Error, Result};
use crate::feasibility::{power_for_interference, qos_matrix};
use crate::model::{ChannelSet, Precoder, SystemParams};
use crate::numerics::{CMatrix, CVector, RMatrix, RVector, C64};

/// Grid points per real dimension below which results are not trusted.
pub const MIN_GRID: usize = 24;

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub eta: f64,
    pub p: RVector,
    /// Jamming vector, `Sigma = q q^H`.
    pub q: CVector,
    pub evaluations: u64,
}

struct Reduced {
    /// Rows: `g^H Q` and `b_k^H Q` in the reduced basis.
    g: CVector,
    b: Vec<CVector>,
    basis: CMatrix,
    d: RMatrix,
    p0: RVector,
    a2: Vec<f64>,
    sigma2: f64,
    p_tot: f64,
}

/// Best value along one direction: `(eta, jamming power)`.
fn best_on_ray(r: &Reduced, u: &CVector) -> Option<(f64, f64)> {
    let t = r.g.dotc(u).norm_sqr();
    let c: Vec<f64> = r.b.iter().map(|b| b.dotc(u).norm_sqr()).collect();
    let dp = power_for_interference(&r.d, &c, 0.0);
    let k = r.p0.len();
    // p(s) = p0 + s dp, budget sum p(s) + s <= P_tot, p(s) >= 0
    let mut hi = (r.p_tot - r.p0.sum()) / (1.0 + dp.sum());
    if !(hi >= 0.0) {
        return None;
    }
    for i in 0..k {
        if dp[i] < 0.0 {
            hi = hi.min(-r.p0[i] / dp[i]);
        }
    }
    let hi = hi.max(0.0);
    let value = |s: f64| {
        (0..k)
            .map(|i| (r.p0[i] + s * dp[i]).max(0.0) * r.a2[i] / (r.sigma2 + s * t))
            .fold(0.0, f64::max)
    };
    let mut cands = vec![0.0, hi];
    // f_i = f_j where numerators cross (shared denominator)
    for i in 0..k {
        for j in i + 1..k {
            let (ai, bi) = (r.p0[i] * r.a2[i], dp[i] * r.a2[i]);
            let (aj, bj) = (r.p0[j] * r.a2[j], dp[j] * r.a2[j]);
            if bi != bj {
                let s = (aj - ai) / (bi - bj);
                if s > 0.0 && s < hi {
                    cands.push(s);
                }
            }
        }
    }
    cands.into_iter().map(|s| (value(s), s)).min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Unit vector from `r - 1` magnitude angles in `[0, pi/2]` followed by
/// `r - 1` phases; the first component is real and nonnegative.
fn direction(r: usize, coords: &[f64]) -> CVector {
    let (angles, phases) = coords.split_at(r - 1);
    let mut u = CVector::zeros(r);
    let mut tail = 1.0;
    for i in 0..r {
        let mag = if i + 1 < r { tail * angles[i].cos() } else { tail };
        if i + 1 < r {
            tail *= angles[i].sin();
        }
        u[i] = if i == 0 { C64::new(mag, 0.0) } else { C64::from_polar(mag, phases[i - 1]) };
    }
    u
}

fn reduce(pre: &Precoder, ch: &ChannelSet, params: &SystemParams) -> Result<Reduced> {
    let l = params.l;
    let mut span = CMatrix::zeros(l, params.k + 1);
    span.set_column(0, &ch.g.column(0));
    for k in 0..params.k {
        span.set_column(k + 1, &ch.b.column(k));
    }
    let svd = span.svd(true, false);
    let u = svd.u.ok_or_else(|| Error::NumericalFailure("SVD did not return U".into()))?;
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-12 * smax).collect();
    if keep.is_empty() {
        return Err(Error::RankDeficientG);
    }
    let basis = CMatrix::from_columns(&keep.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
    let project = |v: CVector| basis.adjoint() * v;
    let d = qos_matrix(pre)?;
    let p0 = power_for_interference(&d, &vec![0.0; params.k], params.sigma2);
    if p0.iter().any(|v| *v < -1e-12) || p0.sum() > params.p_tot * (1.0 + 1e-12) {
        return Err(Error::Infeasible("no power allocation meets the SINR target within the budget".into()));
    }
    Ok(Reduced {
        g: project(ch.g.column(0).into_owned()),
        b: (0..params.k).map(|k| project(ch.b.column(k).into_owned())).collect(),
        basis,
        d,
        p0: p0.map(|v| v.max(0.0)),
        a2: pre.eve_norms(),
        sigma2: params.sigma2,
        p_tot: params.p_tot,
    })
}

/// Searches `grid` points per real dimension, then zooms in on the best one.
pub fn grid_oracle(pre: &Precoder, ch: &ChannelSet, params: &SystemParams, grid: usize) -> Result<OracleResult> {
    params.validate()?;
    ch.validate(params)?;
    if params.k > 2 || params.z != 1 || params.l > 4 {
        return Err(Error::InvalidParams(format!(
            "the grid oracle needs K <= 2, Z = 1, L <= 4 (got K = {}, Z = {}, L = {})",
            params.k, params.z, params.l
        )));
    }
    if grid < 2 {
        return Err(Error::InvalidParams("grid needs at least 2 points per dimension".into()));
    }
    let red = reduce(pre, ch, params)?;
    let r = red.basis.ncols();
    let dims = 2 * (r - 1);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let two_pi = 2.0 * std::f64::consts::PI;
    let upper = |d: usize| if d < r - 1 { half_pi } else { two_pi };
    let periodic = |d: usize| d >= r - 1;
    let step = |d: usize| {
        if periodic(d) {
            two_pi / grid as f64
        } else {
            half_pi / (grid - 1) as f64
        }
    };

    let mut evaluations = 0u64;
    let mut eval = |coords: &[f64]| {
        evaluations += 1;
        best_on_ray(&red, &direction(r, coords))
    };

    // coarse grid
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let total = grid.pow(dims as u32);
    let mut coords = vec![0.0; dims];
    for idx in 0..total.max(1) {
        let mut rem = idx;
        for (d, c) in coords.iter_mut().enumerate() {
            *c = (rem % grid) as f64 * step(d);
            rem /= grid;
        }
        if let Some((v, s)) = eval(&coords) {
            if best.as_ref().map_or(true, |b| v < b.0) {
                best = Some((v, s, coords.clone()));
            }
        }
    }
    let (mut value, mut power, mut center) = best.ok_or(Error::InfeasibleProgram)?;

    // local zoom: 5 points per dimension around the incumbent
    let mut width: Vec<f64> = (0..dims).map(step).collect();
    let offsets = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let local = 5usize.pow(dims as u32);
    for _ in 0..400 {
        if width.iter().all(|w| *w < 1e-10) {
            break;
        }
        let mut moved = false;
        let mut trial = vec![0.0; dims];
        for idx in 0..local {
            let mut rem = idx;
            for d in 0..dims {
                let mut c = center[d] + offsets[rem % 5] * width[d];
                rem /= 5;
                if periodic(d) {
                    c = c.rem_euclid(two_pi);
                } else {
                    c = c.clamp(0.0, upper(d));
                }
                trial[d] = c;
            }
            if let Some((v, s)) = eval(&trial) {
                if v < value {
                    value = v;
                    power = s;
                    center.copy_from_slice(&trial);
                    moved = true;
                }
            }
        }
        if !moved {
            for w in width.iter_mut() {
                *w *= 0.5;
            }
        }
    }

    let u = direction(r, &center);
    let c: Vec<f64> = red.b.iter().map(|b| (b.dotc(&u).norm_sqr()) * power).collect();
    let p = power_for_interference(&red.d, &c, params.sigma2).map(|v| v.max(0.0));
    let q = &red.basis * u * C64::new(power.sqrt(), 0.0);
    Ok(OracleResult { eta: value, p, q, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{sinr_eve_upper, sinr_user};
    use crate::model::db_to_linear;

    fn instance(k: usize, l: usize, p_dbm: f64, seed: u64) -> Option<(SystemParams, ChannelSet, Precoder)> {
        let params = SystemParams::new(k + 1, k, l, 1, db_to_linear(-10.0), db_to_linear(10.0), db_to_linear(p_dbm)).ok()?;
        let ch = ChannelSet::generate_rayleigh(&params, 0.0, seed);
        let pre = Precoder::channel_inversion(&ch, params.tau).ok()?;
        crate::feasibility::optimal_power(&pre, &params).ok()?;
        Some((params, ch, pre))
    }

    #[test]
    fn directions_are_unit() {
        for coords in [[0.3, 1.1, 0.2, 5.0], [0.0, 0.0, 0.0, 0.0], [1.55, 1.55, 3.0, 1.0]] {
            let u = direction(3, &coords);
            assert!((u.norm() - 1.0).abs() < 1e-12);
            assert_eq!(u[0].im, 0.0);
        }
    }

    #[test]
    fn reported_design_reproduces_eta() {
        for seed in 0..5 {
            let Some((params, ch, pre)) = instance(2, 4, 10.0, seed) else { continue };
            let res = grid_oracle(&pre, &ch, &params, 12).unwrap();
            let sigma = &res.q * res.q.adjoint();
            let su = sinr_user(&pre, &ch, res.p.as_slice(), &sigma, params.sigma2).unwrap();
            for v in su {
                assert!(v >= params.tau * (1.0 - 1e-9));
            }
            let eve = sinr_eve_upper(&pre, &ch, res.p.as_slice(), &sigma, params.sigma2).unwrap();
            let eta = eve.iter().copied().fold(0.0, f64::max);
            assert!((eta - res.eta).abs() <= 1e-9 * eta);
            assert!(res.p.sum() + res.q.norm_squared() <= params.p_tot * (1.0 + 1e-9));
        }
    }

    #[test]
    fn zero_headroom_gives_no_jamming() {
        let (mut params, ch, pre) = instance(1, 2, 10.0, 3).unwrap();
        let p = crate::feasibility::optimal_power(&pre, &params).unwrap();
        params.p_tot = p.sum();
        let res = grid_oracle(&pre, &ch, &params, 24).unwrap();
        let expect = p[0] * pre.eve_norms()[0] / params.sigma2;
        assert!((res.eta - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let params = SystemParams::new(4, 3, 5, 1, 0.1, 10.0, 100.0).unwrap();
        let ch = ChannelSet::generate_rayleigh(&params, 0.0, 0);
        let pre = Precoder::channel_inversion(&ch, params.tau).unwrap();
        assert!(matches!(grid_oracle(&pre, &ch, &params, 24), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn repeated_runs_are_identical() {
        let (params, ch, pre) = instance(1, 3, 10.0, 4).unwrap();
        let a = grid_oracle(&pre, &ch, &params, 24).unwrap();
        let b = grid_oracle(&pre, &ch, &params, 24).unwrap();
        assert_eq!(a.eta.to_bits(), b.eta.to_bits());
        assert_eq!(a.evaluations, b.evaluations);
    }
}
