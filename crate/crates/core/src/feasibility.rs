//! QoS feasibility test and the minimum-power allocation under interference
//! from the other streams only.

use crate::error::{Error, Result};
use crate::model::{Precoder, SystemParams};
use crate::numerics::{RMatrix, RVector};

/// Powers within this of zero are treated as exactly zero.
pub const POWER_CLAMP: f64 = 1e-12;
/// Relative slack on the total power budget.
pub const BUDGET_RTOL: f64 = 1e-12;
/// Reciprocal condition number below which Delta counts as singular.
const SINGULAR_RCOND: f64 = 1e-14;

/// `D = -(Delta^T)^-1`. Row k of `D` is the vector `delta_k` such that the
/// minimum power of stream k under extra received interference `c` is
/// `delta_k^T (c + sigma2 1)`.
pub fn qos_matrix(pre: &Precoder) -> Result<RMatrix> {
    let dt = pre.delta.transpose();
    let svd = dt.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= SINGULAR_RCOND * smax {
        return Err(Error::SingularDelta);
    }
    let inv = dt.try_inverse().ok_or(Error::SingularDelta)?;
    Ok(-inv)
}

/// `p(c) = D (c + sigma2 1)`.
pub fn power_for_interference(d: &RMatrix, c: &[f64], sigma2: f64) -> RVector {
    let rhs = RVector::from_iterator(c.len(), c.iter().map(|v| v + sigma2));
    d * rhs
}

fn clamp_powers(p: &mut RVector) {
    for v in p.iter_mut() {
        if *v < 0.0 && *v > -POWER_CLAMP {
            *v = 0.0;
        }
    }
}

/// Minimal QoS-achieving powers with no jamming, or `Infeasible` when they are
/// negative or exceed the budget.
pub fn optimal_power(pre: &Precoder, params: &SystemParams) -> Result<RVector> {
    if pre.users() != params.k {
        return Err(Error::Dimension(format!("precoder has {} streams, K = {}", pre.users(), params.k)));
    }
    let d = qos_matrix(pre)?;
    let mut p = power_for_interference(&d, &vec![0.0; params.k], params.sigma2);
    clamp_powers(&mut p);
    if let Some((k, v)) = p.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::Infeasible(format!(
            "the SINR target cannot be met by any nonnegative power allocation (stream {k} would need {v:.3e} mW)"
        )));
    }
    let total = p.sum();
    if total > params.p_tot * (1.0 + BUDGET_RTOL) {
        return Err(Error::Infeasible(format!(
            "meeting the SINR target needs {total:.6e} mW, above the budget of {:.6e} mW",
            params.p_tot
        )));
    }
    Ok(p)
}

/// `true` when some jamming design meets every QoS target within the budget.
pub fn check_existence(pre: &Precoder, params: &SystemParams) -> Result<bool> {
    match optimal_power(pre, params) {
        Ok(_) => Ok(true),
        Err(Error::Infeasible(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Budget left for jamming once the minimal stream powers are paid for.
pub fn headroom(p: &RVector, params: &SystemParams) -> f64 {
    (params.p_tot - p.sum()).max(0.0)
}
