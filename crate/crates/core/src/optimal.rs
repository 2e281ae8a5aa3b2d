//! Jointly optimal powers and jamming covariance when the jammer has at least
//! `K + Z` antennas.
//!
//! The powers are the interference-free minimum (jamming is kept orthogonal to
//! every user). With `G^H Sigma G = diag(lambda)` and `x_j = 1/(sigma2 + lambda_j)`
//! the eavesdropper bound becomes `p_k sum_j |a_kj|^2 x_j` and the jamming
//! power `sum_j phi_j (1/x_j - sigma2)`, leaving a small convex program in `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{headroom, optimal_power};
use crate::kernel::{gamma_nullspace_param, solve, Constraint, ConvexProgram, KernelOptions};
use crate::model::{ChannelSet, Precoder, SystemParams};
use crate::numerics::{hermitian_inverse, max_abs, CMatrix, RVector, C64};

/// Lower bound standing in for the open constraint `x > 0`.
pub const X_FLOOR: f64 = 1e-12;
/// Headroom (relative to the budget) below which no jamming is attempted.
const HEADROOM_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignStatus {
    Converged,
    /// The stream powers use the whole budget; the design has no jamming.
    NoJammingPower,
}

#[derive(Clone, Debug)]
pub struct OptimalDesign {
    pub p: RVector,
    /// `1 / (sigma2 + lambda_j)`.
    pub x: RVector,
    pub lambda: RVector,
    /// Z x L jamming factor, `Sigma = Gamma^H Gamma`.
    pub gamma: CMatrix,
    pub sigma: CMatrix,
    pub eta: f64,
    pub phi: RVector,
    pub status: DesignStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Diagonal of `[G^H G - G^H B (B^H B)^-1 B^H G]^-1`.
pub fn compute_phi(g: &CMatrix, b: &CMatrix) -> Result<RVector> {
    if g.nrows() != b.nrows() {
        return Err(Error::Dimension(format!("G has {} rows, B has {}", g.nrows(), b.nrows())));
    }
    let ghg = g.adjoint() * g;
    let schur = if b.ncols() == 0 {
        ghg
    } else {
        let bhg = b.adjoint() * g;
        let inner = hermitian_inverse(&(b.adjoint() * b))?;
        &ghg - bhg.adjoint() * inner * &bhg
    };
    let inv = hermitian_inverse(&crate::numerics::hermitize(&schur))?;
    let phi = RVector::from_iterator(inv.nrows(), inv.diagonal().iter().map(|v| v.re));
    if let Some(v) = phi.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::IllConditioned(*v));
    }
    Ok(phi)
}

/// Solves for `x` and returns it with `eta = max_k p_k sum_j |a_kj|^2 x_j`.
pub fn solve_eq14(pre: &Precoder, ch: &ChannelSet, params: &SystemParams, p_opt: &RVector) -> Result<(RVector, f64)> {
    let phi = compute_phi(&ch.g, &ch.b)?;
    let (x, eta, _) = solve_x_program(pre, params, p_opt, &phi)?;
    Ok((x, eta))
}

pub(crate) fn eta_of(pre: &Precoder, p: &RVector, x: &RVector) -> f64 {
    let gains = pre.eve_gains();
    (0..p.len())
        .map(|k| p[k] * (0..x.len()).map(|j| gains[(k, j)] * x[j]).sum::<f64>())
        .fold(0.0, f64::max)
}

fn no_jamming_x(z: usize, sigma2: f64) -> RVector {
    RVector::from_element(z, 1.0 / sigma2)
}

fn solve_x_program(
    pre: &Precoder,
    params: &SystemParams,
    p: &RVector,
    phi: &RVector,
) -> Result<(RVector, f64, Option<(f64, usize)>)> {
    solve_x_with_budget(pre, params, p, phi, headroom(p, params))
}

/// Minimizes `eta` with jamming power `sum_j phi_j (1/x_j - sigma2) <= h`.
/// Returns `(x, eta, kernel result summary)`; `None` summary means no jamming.
pub(crate) fn solve_x_with_budget(
    pre: &Precoder,
    params: &SystemParams,
    p: &RVector,
    phi: &RVector,
    h: f64,
) -> Result<(RVector, f64, Option<(f64, usize)>)> {
    let z = phi.len();
    let s2 = params.sigma2;
    if h <= HEADROOM_RTOL * params.p_tot {
        let x = no_jamming_x(z, s2);
        let eta = eta_of(pre, p, &x);
        return Ok((x, eta, None));
    }
    let gains = pre.eve_gains();
    if !(eta_of(pre, p, &no_jamming_x(z, s2)) > 0.0) {
        // nothing leaks to Eve even without jamming
        return Ok((no_jamming_x(z, s2), 0.0, None));
    }

    // Uniform start that spends half the headroom; strictly inside every bound.
    let phi_sum: f64 = phi.sum();
    let theta = s2 * phi_sum / (s2 * phi_sum + h / 2.0);
    let eta_ref = eta_of(pre, p, &RVector::from_element(z, theta / s2));

    // Variables y_j = sigma2 x_j in (0, 1] and e = eta / eta_ref.
    let rhs = h + s2 * phi_sum;
    let mut constraints = vec![Constraint::ReciprocalSum {
        terms: (0..z).map(|j| (j, phi[j] * s2 / rhs)).collect(),
        power: 1,
        linear: vec![],
        rhs: 1.0,
    }];
    for k in 0..p.len() {
        let mut a: Vec<(usize, f64)> = (0..z).map(|j| (j, p[k] * gains[(k, j)] / (s2 * eta_ref))).collect();
        a.push((z, -1.0));
        constraints.push(Constraint::Linear { a, rhs: 0.0 });
    }
    for j in 0..z {
        constraints.push(Constraint::Box { index: j, lower: X_FLOOR * s2, upper: 1.0 });
    }
    let mut objective = RVector::zeros(z + 1);
    objective[z] = 1.0;
    let program = ConvexProgram { dim: z + 1, objective, constraints };

    let mut start = RVector::from_element(z + 1, theta);
    start[z] = 1.01;

    let sol = solve(&program, Some(&start), &KernelOptions::default())?;
    let x = RVector::from_iterator(z, (0..z).map(|j| sol.x[j].min(1.0) / s2));
    let eta = eta_of(pre, p, &x);
    Ok((x, eta, Some((sol.kkt_residual, sol.outer_iterations))))
}

/// `lambda_j = 1/x_j - sigma2`, clamped at zero next to the no-jamming corner.
pub fn lambda_from_x(x: &RVector, sigma2: f64) -> RVector {
    x.map(|xj| {
        if (xj - 1.0 / sigma2).abs() <= 1e-12 * (1.0 / sigma2) {
            0.0
        } else {
            (1.0 / xj - sigma2).max(0.0)
        }
    })
}

/// Minimal-norm jamming factor with `G^H Gamma^H = diag(sqrt(lambda))` and
/// `B^H Gamma^H = 0`. Returns `(Gamma, Sigma)` with `Gamma` Z x L.
pub fn build_sigma(ch: &ChannelSet, x: &RVector, sigma2: f64) -> Result<(CMatrix, CMatrix)> {
    let (l, z) = ch.g.shape();
    if x.len() != z {
        return Err(Error::Dimension(format!("x has {} entries, Z = {z}", x.len())));
    }
    if let Some(v) = x.iter().find(|v| !(**v > 0.0) || **v > (1.0 + 1e-12) / sigma2) {
        return Err(Error::InvalidParams(format!("x entry {v} outside (0, 1/sigma2]")));
    }
    let k = ch.b.ncols();
    let param = gamma_nullspace_param(&ch.g, Some(&ch.b)).map_err(|e| match e {
        Error::RankDeficientG => Error::RankDeficient(format!(
            "[G B] is not full column rank (L = {l}, K + Z = {})",
            k + z
        )),
        other => other,
    })?;
    let root: Vec<f64> = lambda_from_x(x, sigma2).iter().map(|v| v.sqrt()).collect();
    let gamma_h = param.gamma_h(&root, &CMatrix::zeros(param.free_dim(), z));

    let target = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(z, root.iter().map(|v| C64::new(*v, 0.0))));
    let scale = root.iter().copied().fold(1.0, f64::max);
    let residual = max_abs(&(ch.g.adjoint() * &gamma_h - target)).max(max_abs(&(ch.b.adjoint() * &gamma_h)));
    if residual > 1e-9 * scale {
        return Err(Error::NumericalFailure(format!("jamming factor misses its constraints by {residual:.3e}")));
    }
    let sigma = &gamma_h * gamma_h.adjoint();
    Ok((gamma_h.adjoint(), sigma))
}

pub fn solve_optimal(pre: &Precoder, ch: &ChannelSet, params: &SystemParams) -> Result<OptimalDesign> {
    params.validate()?;
    ch.validate(params)?;
    if params.l < params.k + params.z {
        return Err(Error::RankDeficient(format!(
            "the optimal design needs L >= K + Z (L = {}, K + Z = {})",
            params.l,
            params.k + params.z
        )));
    }
    let p = optimal_power(pre, params)?;
    let phi = compute_phi(&ch.g, &ch.b)?;
    let (x, eta, summary) = solve_x_program(pre, params, &p, &phi)?;
    let (status, kkt_residual, iterations) = match summary {
        Some((kkt, it)) => (DesignStatus::Converged, kkt, it),
        None => (DesignStatus::NoJammingPower, 0.0, 0),
    };
    let lambda = lambda_from_x(&x, params.sigma2);
    let (gamma, sigma) = match status {
        DesignStatus::Converged => build_sigma(ch, &x, params.sigma2)?,
        DesignStatus::NoJammingPower => (CMatrix::zeros(params.z, params.l), CMatrix::zeros(params.l, params.l)),
    };
    Ok(OptimalDesign { p, x, lambda, gamma, sigma, eta, phi, status, kkt_residual, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{sinr_eve_upper, sinr_user};
    use crate::model::{complex_gaussian, db_to_linear, seeded_rng};
    use crate::numerics::{identity, orthogonal_complement};

    fn params(n: usize, k: usize, l: usize, z: usize, p_tot_dbm: f64) -> SystemParams {
        SystemParams::new(n, k, l, z, db_to_linear(-10.0), db_to_linear(10.0), db_to_linear(p_tot_dbm)).unwrap()
    }

    fn random_complex(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = seeded_rng(seed, 21);
        CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn phi_trivial_cases() {
        let basis = orthogonal_complement(&random_complex(6, 1, 1)).unwrap();
        let g = basis.columns(0, 2).into_owned();
        let b = basis.columns(2, 2).into_owned();
        let phi = compute_phi(&g, &b).unwrap();
        assert!((phi.add_scalar(-1.0)).amax() < 1e-10);
        let phi2 = compute_phi(&(&g * C64::new(3.0, 0.0)), &b).unwrap();
        assert!((phi2 * 9.0 - phi).amax() < 1e-10);
    }

    #[test]
    fn phi_matches_block_inverse() {
        for seed in 0..10 {
            let g = random_complex(6, 2, seed);
            let b = random_complex(6, 2, seed + 100);
            let phi = compute_phi(&g, &b).unwrap();
            // the (1,1) block of the joint Gram inverse is the Schur complement inverse
            let mut joint = CMatrix::zeros(6, 4);
            joint.columns_mut(0, 2).copy_from(&g);
            joint.columns_mut(2, 2).copy_from(&b);
            let inv = (joint.adjoint() * &joint).try_inverse().unwrap();
            for j in 0..2 {
                assert!((phi[j] - inv[(j, j)].re).abs() <= 1e-10 * phi[j]);
            }
        }
    }

    fn single_instance(p_tot_dbm: f64, seed: u64) -> (SystemParams, ChannelSet, Precoder) {
        let params = params(2, 1, 2, 1, p_tot_dbm);
        let ch = ChannelSet::generate_rayleigh(&params, 0.0, seed);
        let pre = Precoder::channel_inversion(&ch, params.tau).unwrap();
        (params, ch, pre)
    }

    #[test]
    fn single_stream_closed_form() {
        for seed in 0..10 {
            let (params, ch, pre) = single_instance(15.0, seed);
            let Ok(p) = optimal_power(&pre, &params) else { continue };
            let phi = compute_phi(&ch.g, &ch.b).unwrap()[0];
            let (x, eta) = solve_eq14(&pre, &ch, &params, &p).unwrap();
            let expect = (phi / (params.p_tot + params.sigma2 * phi - p[0])).min(1.0 / params.sigma2);
            assert!((x[0] - expect).abs() <= 1e-7 * expect, "{} vs {}", x[0], expect);
            let a2 = pre.a.column(0).norm_squared();
            assert!((eta - p[0] * a2 * expect).abs() <= 1e-7 * eta);
        }
    }

    #[test]
    fn zero_headroom_means_no_jamming() {
        let (mut params, ch, pre) = single_instance(30.0, 3);
        let p = optimal_power(&pre, &params).unwrap();
        params.p_tot = p.sum();
        let d = solve_optimal(&pre, &ch, &params).unwrap();
        assert_eq!(d.status, DesignStatus::NoJammingPower);
        assert!((d.x[0] - 1.0 / params.sigma2).abs() < 1e-9);
        assert_eq!(max_abs(&d.sigma), 0.0);
        let expect = p[0] * pre.a.column(0).norm_squared() / params.sigma2;
        assert!((d.eta - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn symmetric_eve_antennas_get_equal_x() {
        let params = params(3, 1, 3, 2, 10.0);
        let mut ch = ChannelSet::generate_rayleigh(&params, 0.0, 5);
        let basis = identity(3);
        // orthonormal G and B: phi = 1 for both Eve antennas
        ch.g = basis.columns(0, 2).into_owned();
        ch.b = basis.columns(2, 1).into_owned();
        let pre0 = Precoder::channel_inversion(&ch, params.tau).unwrap();
        // equal leakage magnitude on both antennas
        let a_mag = pre0.a.column(0).norm() / 2f64.sqrt();
        ch.h = CMatrix::zeros(3, 2);
        let u = pre0.u.column(0).into_owned();
        for j in 0..2 {
            ch.h.column_mut(j).copy_from(&(&u * C64::new(a_mag, 0.0)));
        }
        let pre = Precoder::from_unit_columns(pre0.u.clone(), &ch, params.tau).unwrap();
        let d = solve_optimal(&pre, &ch, &params).unwrap();
        assert!((d.x[0] - d.x[1]).abs() <= 1e-6 * d.x[0]);
    }

    #[test]
    fn build_sigma_cases() {
        let params = params(4, 2, 7, 2, 10.0);
        let ch = ChannelSet::generate_rayleigh(&params, 0.0, 8);
        let x = RVector::from_element(2, 1.0 / params.sigma2);
        let (_, sigma) = build_sigma(&ch, &x, params.sigma2).unwrap();
        assert_eq!(max_abs(&sigma), 0.0);

        let x = RVector::from_vec(vec![2.0, 5.0]);
        let (gamma, sigma) = build_sigma(&ch, &x, params.sigma2).unwrap();
        let phi = compute_phi(&ch.g, &ch.b).unwrap();
        let lambda = lambda_from_x(&x, params.sigma2);
        let trace: f64 = sigma.diagonal().iter().map(|v| v.re).sum();
        assert!((trace - phi.dot(&lambda)).abs() <= 1e-8 * trace);
        assert!(max_abs(&(gamma.adjoint() * &gamma - &sigma)) < 1e-10);

        let mut orth = ch.clone();
        let basis = orthogonal_complement(&random_complex(7, 3, 2)).unwrap();
        orth.g = basis.columns(0, 2).into_owned();
        orth.b = CMatrix::zeros(7, 2);
        orth.b.copy_from(&basis.columns(2, 2));
        let (gamma, sigma) = build_sigma(&orth, &x, params.sigma2).unwrap();
        let expect = &orth.g * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, lambda.iter().map(|v| C64::new(v.sqrt(), 0.0))));
        assert!(max_abs(&(gamma.adjoint() - expect)) < 1e-10);
        let trace: f64 = sigma.diagonal().iter().map(|v| v.re).sum();
        assert!((trace - lambda.sum()).abs() <= 1e-9 * trace);
    }

    #[test]
    fn rejects_small_jammer() {
        let params = params(4, 2, 3, 2, 10.0);
        let ch = ChannelSet::generate_rayleigh(&params, 0.0, 1);
        let pre = Precoder::channel_inversion(&ch, params.tau).unwrap();
        assert!(matches!(solve_optimal(&pre, &ch, &params), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn design_invariants_on_random_instances() {
        let mut solved = 0;
        for seed in 0..30 {
            let params = params(8, 3, 6, 2, 20.0);
            let ch = ChannelSet::generate_rayleigh(&params, 0.0, seed);
            let pre = Precoder::channel_inversion(&ch, params.tau).unwrap();
            let d = match solve_optimal(&pre, &ch, &params) {
                Ok(d) => d,
                Err(Error::Infeasible(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            solved += 1;
            assert_eq!(d.status, DesignStatus::Converged);
            assert!(d.kkt_residual <= 1e-8);
            let su = sinr_user(&pre, &ch, d.p.as_slice(), &d.sigma, params.sigma2).unwrap();
            assert!(su.iter().all(|s| (s - params.tau).abs() <= 1e-6 * params.tau));
            let se = sinr_eve_upper(&pre, &ch, d.p.as_slice(), &d.sigma, params.sigma2).unwrap();
            let eta = se.iter().copied().fold(0.0, f64::max);
            assert!((eta - d.eta).abs() <= 1e-6 * d.eta);
            let trace: f64 = d.sigma.diagonal().iter().map(|v| v.re).sum();
            assert!(d.p.sum() + trace <= params.p_tot * (1.0 + 1e-6));
            // the budget is spent
            assert!(d.p.sum() + trace >= params.p_tot * (1.0 - 1e-6));
            assert!(max_abs(&(ch.b.adjoint() * &d.sigma)) <= 1e-6 * max_abs(&d.sigma));
            assert!(d.x.iter().all(|v| *v > 0.0 && *v <= 1.0 / params.sigma2 * (1.0 + 1e-12)));
        }
        assert!(solved > 10);
    }

    #[test]
    fn more_budget_lowers_eta() {
        let mut prev = f64::INFINITY;
        for p_dbm in [10.0, 15.0, 20.0, 25.0] {
            let params = params(8, 3, 6, 2, p_dbm);
            let ch = ChannelSet::generate_rayleigh(&params, 0.0, 4);
            let pre = Precoder::channel_inversion(&ch, params.tau).unwrap();
            let d = solve_optimal(&pre, &ch, &params).unwrap();
            assert!(d.eta < prev);
            prev = d.eta;
        }
    }
}
