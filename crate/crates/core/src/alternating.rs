//! Alternating design for jammers with fewer than `K + Z` antennas, where the
//! jamming cannot be kept off every user.
//!
//! The leaked jamming power `c_k = ||Gamma b_k||^2` raises the power stream k
//! needs to `p_k(c) = delta_k^T (c + sigma2 1)`. The jamming factor is written
//! as `Gamma^H = M diag(x) + N W` so that `G^H Gamma^H = diag(x)`, and the
//! eavesdropper bound is optimized in its high-power form
//! `p_k sum_j |a_kj|^2 / x_j^2`. Step 1 updates `(x, W)` with `c` fixed,
//! step 2 updates `(c, W)` with `x` fixed; each step is a convex program and
//! neither can increase the objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{optimal_power, power_for_interference, qos_matrix};
use crate::kernel::{gamma_nullspace_param, solve, Constraint, ConvexProgram, KernelOptions, NullspaceParam};
use crate::model::{ChannelSet, Precoder, SystemParams};
use crate::numerics::{CMatrix, RMatrix, RVector, C64};

#[derive(Clone, Debug)]
pub struct AlternatingOptions {
    pub max_iters: usize,
    /// Relative change in the objective that counts as converged.
    pub tol: f64,
}

impl Default for AlternatingOptions {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlternatingStatus {
    Converged,
    MaxIterations,
    /// The stream powers use the whole budget; the design has no jamming.
    NoJammingPower,
}

#[derive(Clone, Debug)]
pub struct AlternatingState {
    /// Jamming power received by each user.
    pub c_tilde: RVector,
    /// Diagonal of `G^H Gamma^H`.
    pub x: RVector,
    /// Z x L jamming factor.
    pub gamma: CMatrix,
    pub sigma: CMatrix,
    pub p: RVector,
    /// High-power objective `max_k p_k sum_j |a_kj|^2 / x_j^2`.
    pub eta: f64,
    /// Objective after initialization and after every iteration.
    pub eta_history: Vec<f64>,
    pub iterations: usize,
    pub status: AlternatingStatus,
}

/// Design that treats the jammer-to-user channels as zero.
#[derive(Clone, Debug)]
pub struct BZeroDesign {
    pub p: RVector,
    pub x: RVector,
    pub gamma: CMatrix,
    pub sigma: CMatrix,
    pub eta: f64,
}

/// `max_k p_k sum_j |a_kj|^2 / x_j^2`.
pub fn asymptotic_eta(gains: &RMatrix, p: &RVector, x: &RVector) -> f64 {
    (0..p.len())
        .map(|k| p[k] * stream_weight(gains, k, x))
        .fold(0.0, f64::max)
}

fn stream_weight(gains: &RMatrix, k: usize, x: &RVector) -> f64 {
    (0..x.len()).map(|j| gains[(k, j)] / (x[j] * x[j])).sum()
}

/// `sum_rows |c_r . v + c0_r|^2` over a real coordinate vector `v`.
struct QuadForm {
    q: RMatrix,
    lin: RVector,
    constant: f64,
}

impl QuadForm {
    fn zeros(n: usize) -> Self {
        Self { q: RMatrix::zeros(n, n), lin: RVector::zeros(n), constant: 0.0 }
    }

    fn add_row(&mut self, coeffs: &[(usize, C64)], c0: C64) {
        for &(i, ci) in coeffs {
            for &(j, cj) in coeffs {
                self.q[(i, j)] += ci.re * cj.re + ci.im * cj.im;
            }
            self.lin[i] += 2.0 * (c0.re * ci.re + c0.im * ci.im);
        }
        self.constant += c0.norm_sqr();
    }
}

/// Real packing of the r x Z complex matrix W starting at `offset`.
#[derive(Clone, Copy)]
struct WLayout {
    offset: usize,
    r: usize,
}

impl WLayout {
    fn len(&self, z: usize) -> usize {
        2 * self.r * z
    }

    fn re(&self, i: usize, j: usize) -> usize {
        self.offset + 2 * (j * self.r + i)
    }

    fn pack(&self, w: &CMatrix, scale: f64, out: &mut RVector) {
        for j in 0..w.ncols() {
            for i in 0..self.r {
                out[self.re(i, j)] = w[(i, j)].re / scale;
                out[self.re(i, j) + 1] = w[(i, j)].im / scale;
            }
        }
    }

    fn unpack(&self, v: &RVector, z: usize, scale: f64) -> CMatrix {
        CMatrix::from_fn(self.r, z, |i, j| C64::new(v[self.re(i, j)], v[self.re(i, j) + 1]) * scale)
    }
}

/// Leakage `||Gamma b_k||^2` as a quadratic form. `x_index` maps column j to
/// the coordinate of `x_j` when it is a variable; otherwise `x_fixed` holds it.
fn leakage_form(
    param: &NullspaceParam,
    b_k: &CMatrix,
    layout: WLayout,
    n: usize,
    x_index: Option<usize>,
    x_fixed: Option<&RVector>,
) -> QuadForm {
    let z = param.m.ncols();
    let beta = param.m.adjoint() * b_k;
    let nu = param.basis.adjoint() * b_k;
    let mut form = QuadForm::zeros(n);
    for j in 0..z {
        let mut coeffs: Vec<(usize, C64)> = Vec::with_capacity(2 * layout.r + 1);
        let mut c0 = C64::new(0.0, 0.0);
        let bj = beta[(j, 0)].conj();
        match (x_index, x_fixed) {
            (Some(off), _) => coeffs.push((off + j, bj)),
            (None, Some(x)) => c0 = bj * x[j],
            (None, None) => unreachable!("x is either a variable or fixed"),
        }
        for i in 0..layout.r {
            let c = nu[(i, 0)].conj();
            coeffs.push((layout.re(i, j), c));
            coeffs.push((layout.re(i, j) + 1, c * C64::new(0.0, 1.0)));
        }
        form.add_row(&coeffs, c0);
    }
    form
}

struct Problem<'a> {
    pre: &'a Precoder,
    ch: &'a ChannelSet,
    params: &'a SystemParams,
    d: RMatrix,
    gains: RMatrix,
    p_opt: RVector,
    full: NullspaceParam,
    /// Scale of x and W.
    x_s: f64,
    /// Scale of the objective.
    eta_s: f64,
}

impl<'a> Problem<'a> {
    fn new(pre: &'a Precoder, ch: &'a ChannelSet, params: &'a SystemParams) -> Result<Self> {
        params.validate()?;
        ch.validate(params)?;
        let p_opt = optimal_power(pre, params)?;
        let d = qos_matrix(pre)?;
        let full = gamma_nullspace_param(&ch.g, None)?;
        let m_norm: f64 = full.m.column_iter().map(|c| c.norm_squared()).sum();
        let h0 = (params.p_tot - p_opt.sum()).max(f64::MIN_POSITIVE);
        let x_s = (h0 / m_norm).sqrt();
        let gains = pre.eve_gains();
        let eta_s = asymptotic_eta(&gains, &p_opt, &RVector::from_element(params.z, x_s)).max(f64::MIN_POSITIVE);
        Ok(Self { pre, ch, params, d, gains, p_opt, full, x_s, eta_s })
    }

    fn power(&self, c: &RVector) -> RVector {
        power_for_interference(&self.d, c.as_slice(), self.params.sigma2)
    }

    fn leakage(&self, gamma_h: &CMatrix) -> RVector {
        let gb = gamma_h.adjoint() * &self.ch.b;
        RVector::from_iterator(self.params.k, gb.column_iter().map(|c| c.norm_squared()))
    }
}

/// Result of one alternating step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub c_tilde: RVector,
    pub x: RVector,
    /// L x Z.
    pub gamma_h: CMatrix,
    pub eta: f64,
}

fn b_column(ch: &ChannelSet, k: usize) -> CMatrix {
    ch.b.columns(k, 1).into_owned()
}

fn step1(prob: &Problem, c_tilde: &RVector, incumbent: Option<(&RVector, &CMatrix)>) -> Result<StepResult> {
    let params = prob.params;
    let (k_users, z) = (params.k, params.z);
    let p = prob.power(c_tilde);
    if p.iter().any(|v| *v < 0.0) {
        return Err(Error::Infeasible("leaked jamming makes the SINR target unreachable".into()));
    }
    let remaining = params.p_tot - p.sum();
    if !(remaining > 0.0) {
        return Err(Error::Infeasible("leaked jamming leaves no power for jamming".into()));
    }

    // users that must see no jamming at all are folded into the parameterization
    let active: Vec<usize> = (0..k_users).filter(|&k| b_column(prob.ch, k).norm() > 0.0).collect();
    let silenced: Vec<usize> = active.iter().copied().filter(|&k| c_tilde[k] <= 0.0).collect();
    let param = if silenced.is_empty() {
        prob.full.clone()
    } else {
        if z + silenced.len() > params.l {
            return Err(Error::InfeasibleProgram);
        }
        let mut b0 = CMatrix::zeros(params.l, silenced.len());
        for (col, &k) in silenced.iter().enumerate() {
            b0.column_mut(col).copy_from(&prob.ch.b.column(k));
        }
        gamma_nullspace_param(&prob.ch.g, Some(&b0))?
    };
    let r = param.free_dim();
    let layout = WLayout { offset: z, r };
    let e_idx = z + layout.len(z);
    let n = e_idx + 1;
    let x_s = prob.x_s;

    let mut constraints = Vec::new();
    let mut budget = RMatrix::zeros(e_idx, e_idx);
    for j in 0..z {
        budget[(j, j)] = param.m.column(j).norm_squared();
    }
    for i in z..e_idx {
        budget[(i, i)] = 1.0;
    }
    constraints.push(Constraint::Quadratic { q: budget * (x_s * x_s / remaining), linear: RVector::zeros(e_idx), rhs: 1.0 });
    for k in 0..k_users {
        constraints.push(Constraint::ReciprocalSum {
            terms: (0..z).map(|j| (j, p[k] * prob.gains[(k, j)] / (x_s * x_s * prob.eta_s))).collect(),
            power: 2,
            linear: vec![(e_idx, -1.0)],
            rhs: 0.0,
        });
    }
    for &k in active.iter().filter(|k| !silenced.contains(k)) {
        let form = leakage_form(&param, &b_column(prob.ch, k), layout, e_idx, Some(0), None);
        let scale = x_s * x_s / c_tilde[k];
        constraints.push(Constraint::Quadratic { q: form.q * scale, linear: form.lin * scale, rhs: 1.0 });
    }
    let mut objective = RVector::zeros(n);
    objective[e_idx] = 1.0;
    let program = ConvexProgram { dim: n, objective, constraints };

    let mut start = RVector::zeros(n);
    match incumbent {
        Some((x, gamma_h)) => {
            const SHRINK: f64 = 0.999;
            for j in 0..z {
                start[j] = SHRINK * x[j] / x_s;
            }
            let w = param.basis.adjoint() * gamma_h;
            layout.pack(&w, x_s / SHRINK, &mut start);
        }
        None => {
            let m_norm: f64 = param.m.column_iter().map(|c| c.norm_squared()).sum();
            let xi = (remaining / 2.0 / (x_s * x_s * m_norm)).sqrt();
            for j in 0..z {
                start[j] = xi;
            }
        }
    }
    let xs = RVector::from_iterator(z, (0..z).map(|j| start[j] * x_s));
    start[e_idx] = 1.01 * asymptotic_eta(&prob.gains, &p, &xs) / prob.eta_s + 1e-9;

    let sol = solve(&program, Some(&start), &KernelOptions::default())?;
    let x = RVector::from_iterator(z, (0..z).map(|j| sol.x[j] * x_s));
    let w = layout.unpack(&sol.x, z, x_s);
    let gamma_h = param.gamma_h(x.as_slice(), &w);
    let eta = asymptotic_eta(&prob.gains, &p, &x);
    Ok(StepResult { c_tilde: c_tilde.clone(), x, gamma_h, eta })
}

fn step2(prob: &Problem, x: &RVector, incumbent: (&RVector, &CMatrix)) -> Result<StepResult> {
    let params = prob.params;
    let (k_users, z) = (params.k, params.z);
    let param = &prob.full;
    let r = param.free_dim();
    let layout = WLayout { offset: 0, r };
    let wl = layout.len(z);
    let g_idx = wl;
    let e_idx = wl + k_users;
    let n = e_idx + 1;
    let (x_s, s2) = (prob.x_s, params.sigma2);
    let xi = x / x_s;
    let (c_inc, gamma_inc) = incumbent;
    let c_s = c_inc.iter().copied().fold(s2, f64::max);
    let weights: Vec<f64> = (0..k_users).map(|k| stream_weight(&prob.gains, k, x)).collect();
    let row_sum = |k: usize| (0..k_users).map(|i| prob.d[(k, i)]).sum::<f64>();

    let mut constraints = Vec::new();
    for k in 0..k_users {
        let form = leakage_form(param, &b_column(prob.ch, k), layout, wl, None, Some(&xi));
        let scale = x_s * x_s / c_s;
        let mut linear = RVector::zeros(g_idx + k_users);
        linear.rows_mut(0, wl).copy_from(&(form.lin * scale));
        linear[g_idx + k] = -1.0;
        constraints.push(Constraint::Quadratic { q: form.q * scale, linear, rhs: -form.constant * scale });
    }
    let fixed_trace: f64 = (0..z).map(|j| param.m.column(j).norm_squared() * x[j] * x[j]).sum();
    let total_d: f64 = (0..k_users).map(row_sum).sum();
    let mut linear = RVector::zeros(g_idx + k_users);
    for i in 0..k_users {
        linear[g_idx + i] = c_s * (0..k_users).map(|k| prob.d[(k, i)]).sum::<f64>() / params.p_tot;
    }
    constraints.push(Constraint::Quadratic {
        q: RMatrix::identity(wl, wl) * (x_s * x_s / params.p_tot),
        linear,
        rhs: 1.0 - (fixed_trace + s2 * total_d) / params.p_tot,
    });
    for k in 0..k_users {
        let a: Vec<(usize, f64)> = (0..k_users).map(|i| (g_idx + i, -prob.d[(k, i)] * c_s / params.p_tot)).collect();
        constraints.push(Constraint::Linear { a, rhs: s2 * row_sum(k) / params.p_tot });
        let mut a: Vec<(usize, f64)> =
            (0..k_users).map(|i| (g_idx + i, weights[k] * prob.d[(k, i)] * c_s / prob.eta_s)).collect();
        a.push((e_idx, -1.0));
        constraints.push(Constraint::Linear { a, rhs: -weights[k] * s2 * row_sum(k) / prob.eta_s });
    }
    let mut objective = RVector::zeros(n);
    objective[e_idx] = 1.0;
    let program = ConvexProgram { dim: n, objective, constraints };

    let mut start = RVector::zeros(n);
    let w = param.basis.adjoint() * gamma_inc;
    layout.pack(&w, x_s, &mut start);
    for k in 0..k_users {
        start[g_idx + k] = c_inc[k] / c_s;
    }
    start[e_idx] = 1.01 * asymptotic_eta(&prob.gains, &prob.power(c_inc), x) / prob.eta_s + 1e-9;

    let sol = solve(&program, Some(&start), &KernelOptions::default())?;
    let c_tilde = RVector::from_iterator(k_users, (0..k_users).map(|k| (sol.x[g_idx + k] * c_s).max(0.0)));
    let w = layout.unpack(&sol.x, z, x_s);
    let gamma_h = param.gamma_h(x.as_slice(), &w);
    let eta = asymptotic_eta(&prob.gains, &prob.power(&c_tilde), x);
    Ok(StepResult { c_tilde, x: x.clone(), gamma_h, eta })
}

/// Step 1 on its own: best `(x, W)` for the given leakage levels.
pub fn step1_update_x(pre: &Precoder, ch: &ChannelSet, params: &SystemParams, c_tilde: &RVector) -> Result<StepResult> {
    let prob = Problem::new(pre, ch, params)?;
    step1(&prob, c_tilde, None)
}

/// Step 2 on its own, starting from a design `(c_tilde, Gamma^H)` that is
/// feasible for the given `x`.
pub fn step2_update_c(
    pre: &Precoder,
    ch: &ChannelSet,
    params: &SystemParams,
    x: &RVector,
    c_tilde: &RVector,
    gamma_h: &CMatrix,
) -> Result<StepResult> {
    let prob = Problem::new(pre, ch, params)?;
    step2(&prob, x, (c_tilde, gamma_h))
}

/// Minimal jamming power that gives `G^H Sigma G = diag(x)^2` with no
/// constraint towards the users.
fn b_zero_x(prob: &Problem, p: &RVector) -> Result<RVector> {
    let params = prob.params;
    let z = params.z;
    let remaining = params.p_tot - p.sum();
    if !(remaining > 0.0) {
        return Err(Error::InfeasibleProgram);
    }
    let x_s = prob.x_s;
    let phi0: Vec<f64> = prob.full.m.column_iter().map(|c| c.norm_squared()).collect();
    let mut budget = RMatrix::zeros(z, z);
    for j in 0..z {
        budget[(j, j)] = phi0[j] * x_s * x_s / remaining;
    }
    let mut constraints = vec![Constraint::Quadratic { q: budget, linear: RVector::zeros(z), rhs: 1.0 }];
    for k in 0..params.k {
        constraints.push(Constraint::ReciprocalSum {
            terms: (0..z).map(|j| (j, p[k] * prob.gains[(k, j)] / (x_s * x_s * prob.eta_s))).collect(),
            power: 2,
            linear: vec![(z, -1.0)],
            rhs: 0.0,
        });
    }
    let mut objective = RVector::zeros(z + 1);
    objective[z] = 1.0;
    let program = ConvexProgram { dim: z + 1, objective, constraints };
    let xi = (remaining / 2.0 / (x_s * x_s * phi0.iter().sum::<f64>())).sqrt();
    let mut start = RVector::from_element(z + 1, xi);
    let xs = RVector::from_element(z, xi * x_s);
    start[z] = 1.01 * asymptotic_eta(&prob.gains, p, &xs) / prob.eta_s + 1e-9;
    let sol = solve(&program, Some(&start), &KernelOptions::default())?;
    Ok(RVector::from_iterator(z, (0..z).map(|j| sol.x[j] * x_s)))
}

pub fn solve_b_zero(pre: &Precoder, ch: &ChannelSet, params: &SystemParams) -> Result<BZeroDesign> {
    let prob = Problem::new(pre, ch, params)?;
    let p = prob.p_opt.clone();
    let x = b_zero_x(&prob, &p)?;
    let gamma_h = prob.full.gamma_h(x.as_slice(), &CMatrix::zeros(prob.full.free_dim(), params.z));
    let eta = asymptotic_eta(&prob.gains, &p, &x);
    let sigma = &gamma_h * gamma_h.adjoint();
    Ok(BZeroDesign { p, x, gamma: gamma_h.adjoint(), sigma, eta })
}

/// Relative increase tolerated before a step is treated as a solver fault.
const NON_MONOTONE_RTOL: f64 = 1e-6;
/// Relative change below which a step counts as making no progress.
const STALL_RTOL: f64 = 1e-12;

fn no_jamming_state(prob: &Problem) -> AlternatingState {
    let params = prob.params;
    let p = prob.p_opt.clone();
    let eta = prob.pre.eve_norms().iter().zip(p.iter()).map(|(a, pk)| pk * a / params.sigma2).fold(0.0, f64::max);
    AlternatingState {
        c_tilde: RVector::zeros(params.k),
        x: RVector::zeros(params.z),
        gamma: CMatrix::zeros(params.z, params.l),
        sigma: CMatrix::zeros(params.l, params.l),
        p,
        eta,
        eta_history: vec![eta],
        iterations: 0,
        status: AlternatingStatus::NoJammingPower,
    }
}

/// Starting point: zero leakage when the jammer can null every user, otherwise
/// the `B = 0` design scaled down until its leakage fits the budget.
fn initial_state(prob: &Problem) -> Result<(RVector, StepResult)> {
    let params = prob.params;
    let zero = RVector::zeros(params.k);
    if params.l >= params.k + params.z {
        let first = step1(prob, &zero, None)?;
        return Ok((zero, first));
    }
    let x_b = b_zero_x(prob, &prob.p_opt)?;
    let gamma_b = prob.full.gamma_h(x_b.as_slice(), &CMatrix::zeros(prob.full.free_dim(), params.z));
    let leak = prob.leakage(&gamma_b);
    let trace0 = gamma_b.norm_squared();
    let headroom = params.p_tot - prob.p_opt.sum();
    let d_leak: f64 = (&prob.d * &leak).sum();
    let theta = ((1.0 - 1e-3) * headroom / (trace0 + d_leak)).sqrt();
    let c = &leak * (theta * theta);
    let x = &x_b * theta;
    let gamma_h = &gamma_b * C64::new(theta, 0.0);
    let eta = asymptotic_eta(&prob.gains, &prob.power(&c), &x);
    Ok((c.clone(), StepResult { c_tilde: c, x, gamma_h, eta }))
}

pub fn solve_alternating(
    pre: &Precoder,
    ch: &ChannelSet,
    params: &SystemParams,
    opts: &AlternatingOptions,
) -> Result<AlternatingState> {
    let prob = Problem::new(pre, ch, params)?;
    if params.p_tot - prob.p_opt.sum() <= 1e-12 * params.p_tot {
        return Ok(no_jamming_state(&prob));
    }
    let (_, mut best) = initial_state(&prob)?;
    let mut history = vec![best.eta];
    let mut stalls = 0;
    let mut iterations = 0;
    let mut status = AlternatingStatus::MaxIterations;

    // a step whose program cannot be solved leaves the incumbent in place
    let accept = |incumbent: &StepResult, step: Result<StepResult>| -> Result<Option<StepResult>> {
        match step {
            Ok(s) if s.eta <= incumbent.eta * (1.0 + 1e-12) => Ok(Some(s)),
            Ok(s) if s.eta > incumbent.eta * (1.0 + NON_MONOTONE_RTOL) => {
                Err(Error::NonMonotone { prev: incumbent.eta, next: s.eta })
            }
            Ok(_) | Err(Error::InfeasibleProgram) | Err(Error::NumericalFailure(_)) | Err(Error::Infeasible(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    while iterations < opts.max_iters {
        iterations += 1;
        let before = best.eta;
        let s1 = step1(&prob, &best.c_tilde, Some((&best.x, &best.gamma_h)));
        if let Some(s) = accept(&best, s1)? {
            best = s;
        }
        let mid = best.eta;
        let s2 = step2(&prob, &best.x, (&best.c_tilde, &best.gamma_h));
        if let Some(s) = accept(&best, s2)? {
            best = s;
        }
        history.push(best.eta);
        if (mid - best.eta).abs() <= STALL_RTOL * best.eta.max(1e-300) {
            stalls += 1;
        } else {
            stalls = 0;
        }
        if (before - best.eta).abs() / best.eta.max(1e-12) < opts.tol || stalls >= 2 {
            status = AlternatingStatus::Converged;
            break;
        }
    }

    let p = prob.power(&best.c_tilde);
    let sigma = &best.gamma_h * best.gamma_h.adjoint();
    Ok(AlternatingState {
        c_tilde: best.c_tilde,
        x: best.x,
        gamma: best.gamma_h.adjoint(),
        sigma,
        p,
        eta: best.eta,
        eta_history: history,
        iterations,
        status,
    })
}
