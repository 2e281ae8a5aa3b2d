//! Reference designs: a fixed BS/jammer power split, no jamming at all, and
//! the large-array limit of the optimal design.

use crate::error::{Error, Result};
use crate::feasibility::{headroom, optimal_power, BUDGET_RTOL};
use crate::model::{ChannelSet, Precoder, SystemParams};
use crate::numerics::{CMatrix, RVector};
use crate::optimal::{build_sigma, compute_phi, eta_of, lambda_from_x, solve_x_with_budget, DesignStatus};
use crate::report::{DesignSummary, SolveReport};

pub const DEFAULT_SPLIT: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct FixedSplitDesign {
    pub p: RVector,
    /// `1 / (sigma2 + lambda_j)`.
    pub x: RVector,
    pub lambda: RVector,
    /// Z x L.
    pub gamma: CMatrix,
    pub sigma: CMatrix,
    pub eta: f64,
    /// Power reserved for the jammer, `(1 - split) P_tot`.
    pub jammer_budget: f64,
    pub status: DesignStatus,
    pub iterations: usize,
}

/// The BS spends at most `split * P_tot` on the minimal QoS powers and the
/// jammer gets `(1 - split) * P_tot`, whatever the BS leaves unused.
pub fn solve_fixed_split(pre: &Precoder, ch: &ChannelSet, params: &SystemParams, split: f64) -> Result<FixedSplitDesign> {
    params.validate()?;
    ch.validate(params)?;
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidParams(format!("split must lie in (0, 1), got {split}")));
    }
    if params.l < params.k + params.z {
        return Err(Error::RankDeficient(format!(
            "the fixed-split design needs L >= K + Z (L = {}, K + Z = {})",
            params.l,
            params.k + params.z
        )));
    }
    let p = optimal_power(pre, params)?;
    let bs_budget = split * params.p_tot;
    if p.sum() > bs_budget * (1.0 + BUDGET_RTOL) {
        return Err(Error::Infeasible(format!(
            "the minimal QoS powers need {:.6e} mW, above the base station share of {bs_budget:.6e} mW",
            p.sum()
        )));
    }
    let jammer_budget = (1.0 - split) * params.p_tot;
    let phi = compute_phi(&ch.g, &ch.b)?;
    let (x, eta, summary) = solve_x_with_budget(pre, params, &p, &phi, jammer_budget)?;
    let lambda = lambda_from_x(&x, params.sigma2);
    let (status, iterations, gamma, sigma) = match summary {
        Some((_, it)) => {
            let (gamma, sigma) = build_sigma(ch, &x, params.sigma2)?;
            (DesignStatus::Converged, it, gamma, sigma)
        }
        None => (
            DesignStatus::NoJammingPower,
            0,
            CMatrix::zeros(params.z, params.l),
            CMatrix::zeros(params.l, params.l),
        ),
    };
    Ok(FixedSplitDesign { p, x, lambda, gamma, sigma, eta, jammer_budget, status, iterations })
}

/// Minimal QoS powers and no jamming.
pub fn no_jamming_report(pre: &Precoder, ch: &ChannelSet, params: &SystemParams) -> Result<SolveReport> {
    let p = optimal_power(pre, params)?;
    let sigma = CMatrix::zeros(params.l, params.l);
    let objective = eta_of(pre, &p, &RVector::from_element(params.z, 1.0 / params.sigma2));
    SolveReport::build(
        pre,
        ch,
        params,
        DesignSummary {
            solver: "no_jamming",
            status: "converged",
            p: &p,
            sigma: &sigma,
            objective,
            objective_exact: true,
            zero_forcing: false,
            iterations: 0,
            notes: vec![],
        },
    )
}

/// Optimal-design program with `phi_j = 1 / ||g_j||^2`, the value `phi_j`
/// approaches when the jammer array grows and its channels decorrelate.
#[derive(Clone, Debug)]
pub struct LimitDesign {
    pub p: RVector,
    pub x: RVector,
    pub phi: RVector,
    /// Per-stream `p_k sum_j |a_kj|^2 x_j`.
    pub sinr_eve_upper: Vec<f64>,
    pub eta: f64,
}

pub fn l_infinity_design(pre: &Precoder, ch: &ChannelSet, params: &SystemParams) -> Result<LimitDesign> {
    params.validate()?;
    ch.validate(params)?;
    let p = optimal_power(pre, params)?;
    let phi = RVector::from_iterator(params.z, ch.g.column_iter().map(|c| 1.0 / c.norm_squared()));
    if let Some(v) = phi.iter().find(|v| !v.is_finite()) {
        return Err(Error::IllConditioned(*v));
    }
    let (x, eta, _) = solve_x_with_budget(pre, params, &p, &phi, headroom(&p, params))?;
    let gains = pre.eve_gains();
    let sinr_eve_upper = (0..params.k)
        .map(|k| p[k] * (0..params.z).map(|j| gains[(k, j)] * x[j]).sum::<f64>())
        .collect();
    Ok(LimitDesign { p, x, phi, sinr_eve_upper, eta })
}

pub fn l_infinity_limit(pre: &Precoder, ch: &ChannelSet, params: &SystemParams) -> Result<f64> {
    Ok(l_infinity_design(pre, ch, params)?.eta)
}
