//! Solver-independent summary of a design, with the invariant checks that the
//! command line prints and the JSON schema it emits.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::StreamMetrics;
use crate::model::{linear_to_db, ChannelSet, Precoder, SystemParams};
use crate::numerics::{eig_hermitian, hermitian_defect, hermitize, CMatrix, RVector};

/// Version of the JSON layout of [`SolveReport`].
pub const REPORT_SCHEMA: u32 = 1;

/// Relative slack allowed on the power budget.
pub const BUDGET_CHECK_RTOL: f64 = 1e-6;
/// Relative slack allowed on the user SINR targets.
pub const QOS_CHECK_RTOL: f64 = 1e-6;
/// `||B^H Sigma|| <= ORTHOGONALITY_RTOL ||Sigma||` for zero-forcing designs.
pub const ORTHOGONALITY_RTOL: f64 = 1e-6;
/// Eigenvalues below `-PSD_RTOL * lambda_max` fail the PSD check; eigenvalues
/// past the Z-th above `PSD_RTOL * lambda_max` fail the rank check.
pub const PSD_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl InvariantCheck {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.to_string(), pass, detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: u32,
    pub solver: String,
    pub status: String,
    /// Stream powers in mW.
    pub p_mw: Vec<f64>,
    pub p_total_mw: f64,
    /// Jamming power `tr(Sigma)` in mW.
    pub trace_sigma_mw: f64,
    /// `max_k SINR^U_{e,k}` recomputed from `(p, Sigma)` with full noise.
    pub eta: f64,
    pub eta_db: f64,
    /// Objective value reported by the solver itself.
    pub solver_objective: f64,
    pub sinr_user_db: Vec<f64>,
    pub sinr_eve_upper_db: Vec<f64>,
    /// `[log2(1 + tau) - log2(1 + SINR^U_{e,k})]^+` per stream, in bits.
    pub secrecy_lb_bits: Vec<f64>,
    pub iterations: usize,
    pub notes: Vec<String>,
    pub invariants: Vec<InvariantCheck>,
}

/// What a solver hands over to build its report.
#[derive(Clone, Debug)]
pub struct DesignSummary<'a> {
    pub solver: &'a str,
    pub status: &'a str,
    pub p: &'a RVector,
    pub sigma: &'a CMatrix,
    pub objective: f64,
    /// The solver objective is the exact `eta` and must agree with the metrics.
    pub objective_exact: bool,
    /// The design keeps jamming orthogonal to every user.
    pub zero_forcing: bool,
    pub iterations: usize,
    pub notes: Vec<String>,
}

impl SolveReport {
    pub fn build(pre: &Precoder, ch: &ChannelSet, params: &SystemParams, d: DesignSummary<'_>) -> Result<Self> {
        let m = StreamMetrics::evaluate(pre, ch, d.p.as_slice(), d.sigma, params)?;
        let eta = m.eta();
        let trace: f64 = d.sigma.diagonal().iter().map(|v| v.re).sum();
        let invariants = check_invariants(ch, params, &d, &m, trace)?;
        Ok(Self {
            schema: REPORT_SCHEMA,
            solver: d.solver.to_string(),
            status: d.status.to_string(),
            p_mw: d.p.iter().copied().collect(),
            p_total_mw: d.p.sum(),
            trace_sigma_mw: trace,
            eta,
            eta_db: linear_to_db(eta),
            solver_objective: d.objective,
            sinr_user_db: m.sinr_user.iter().map(|v| linear_to_db(*v)).collect(),
            sinr_eve_upper_db: m.sinr_eve_upper.iter().map(|v| linear_to_db(*v)).collect(),
            secrecy_lb_bits: m.c_se_l2.clone(),
            iterations: d.iterations,
            notes: d.notes,
            invariants,
        })
    }

    pub fn all_pass(&self) -> bool {
        self.invariants.iter().all(|c| c.pass)
    }

    pub fn min_secrecy_lb(&self) -> f64 {
        self.secrecy_lb_bits.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_secrecy_lb(&self) -> f64 {
        self.secrecy_lb_bits.iter().sum::<f64>() / self.secrecy_lb_bits.len().max(1) as f64
    }
}

fn check_invariants(
    ch: &ChannelSet,
    params: &SystemParams,
    d: &DesignSummary<'_>,
    m: &StreamMetrics,
    trace: f64,
) -> Result<Vec<InvariantCheck>> {
    let mut out = Vec::new();
    let used = d.p.sum() + trace;
    out.push(InvariantCheck::new(
        "power_budget",
        used <= params.p_tot * (1.0 + BUDGET_CHECK_RTOL),
        format!("{used:.6e} mW used of {:.6e} mW", params.p_tot),
    ));

    let worst = m.sinr_user.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(InvariantCheck::new(
        "qos",
        worst >= params.tau * (1.0 - QOS_CHECK_RTOL),
        format!("min user SINR {worst:.6e}, target {:.6e}", params.tau),
    ));

    let defect = hermitian_defect(d.sigma);
    let eig = eig_hermitian(&hermitize(d.sigma))?;
    let top = eig.max_value().max(0.0);
    let lowest = eig.min_value();
    let scale = top.max(f64::MIN_POSITIVE);
    out.push(InvariantCheck::new(
        "sigma_psd",
        defect <= PSD_RTOL * scale.max(1.0) && lowest >= -PSD_RTOL * top,
        format!("hermitian defect {defect:.3e}, smallest eigenvalue {lowest:.3e}"),
    ));
    let tail = eig.values.iter().skip(params.z).copied().fold(0.0, f64::max);
    out.push(InvariantCheck::new(
        "sigma_rank",
        tail <= PSD_RTOL * top,
        format!("largest eigenvalue past index {} is {tail:.3e} (max {top:.3e})", params.z),
    ));

    if d.zero_forcing {
        let leak = (ch.b.adjoint() * d.sigma).norm();
        let norm = d.sigma.norm();
        out.push(InvariantCheck::new(
            "orthogonality",
            leak <= ORTHOGONALITY_RTOL * norm,
            format!("||B^H Sigma|| = {leak:.3e}, ||Sigma|| = {norm:.3e}"),
        ));
    }
    if d.objective_exact {
        let eta = m.eta();
        let gap = (d.objective - eta).abs() / eta.max(f64::MIN_POSITIVE);
        out.push(InvariantCheck::new(
            "eta_consistency",
            gap <= 1e-6,
            format!("solver {:.9e} vs recomputed {eta:.9e}", d.objective),
        ));
    }
    Ok(out)
}
