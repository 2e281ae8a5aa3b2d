//! Monte Carlo sweeps over one system parameter, with CSV output.
//!
//! Every trial draws one channel realization from a seed derived from the
//! sweep seed, the axis value and the trial index, and runs every requested
//! solver on that same draw so that solvers can be compared pairwise.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alternating::{solve_alternating, solve_b_zero, AlternatingOptions, AlternatingStatus};
use crate::baselines::{l_infinity_design, no_jamming_report, solve_fixed_split, DEFAULT_SPLIT};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::metrics::secrecy_bounds;
use crate::model::{linear_to_db, ChannelSet, Precoder, SystemParams};
use crate::optimal::{solve_optimal, DesignStatus};
use crate::report::{DesignSummary, SolveReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Z,
    PTot,
    Tau,
    L,
    BGain,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::Z, Axis::PTot, Axis::Tau, Axis::L, Axis::BGain];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Z => "z",
            Axis::PTot => "p_tot_dbm",
            Axis::Tau => "tau_db",
            Axis::L => "l",
            Axis::BGain => "b_gain_db",
        }
    }

    fn is_count(self) -> bool {
        matches!(self, Axis::Z | Axis::L)
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &Config, value: f64) -> Result<Config> {
        let mut cfg = base.clone();
        if self.is_count() && (value < 1.0 || value.fract() != 0.0) {
            return Err(Error::InvalidParams(format!("{} must be a positive integer, got {value}", self.name())));
        }
        match self {
            Axis::Z => cfg.z = value as usize,
            Axis::L => cfg.l = value as usize,
            Axis::PTot => cfg.p_tot_dbm = value,
            Axis::Tau => cfg.tau_db = value,
            Axis::BGain => cfg.b_gain_db = value,
        }
        Ok(cfg)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(Axis::Z),
            "l" => Ok(Axis::L),
            "p_tot" | "p_tot_dbm" | "ptot" => Ok(Axis::PTot),
            "tau" | "tau_db" => Ok(Axis::Tau),
            "b_gain" | "b_gain_db" => Ok(Axis::BGain),
            _ => Err(Error::InvalidParams(format!(
                "unknown axis '{s}' (expected one of z, p_tot, tau, l, b_gain_db)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    Optimal,
    Alternating,
    FixedSplit,
    NoJamming,
    BZero,
    LInfLimit,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Optimal,
        SolverKind::Alternating,
        SolverKind::FixedSplit,
        SolverKind::NoJamming,
        SolverKind::BZero,
        SolverKind::LInfLimit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Optimal => "optimal",
            SolverKind::Alternating => "alternating",
            SolverKind::FixedSplit => "fixed_split",
            SolverKind::NoJamming => "no_jamming",
            SolverKind::BZero => "b_zero",
            SolverKind::LInfLimit => "l_inf_limit",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "optimal" => Ok(SolverKind::Optimal),
            "alternating" => Ok(SolverKind::Alternating),
            "fixed_split" => Ok(SolverKind::FixedSplit),
            "no_jamming" | "no_jam" => Ok(SolverKind::NoJamming),
            "b_zero" => Ok(SolverKind::BZero),
            "l_inf_limit" | "l_inf" => Ok(SolverKind::LInfLimit),
            _ => Err(Error::InvalidParams(format!("unknown solver '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    /// Fixed parameters, including B gain and CSI error.
    pub base: Config,
    pub axis: Axis,
    pub axis_values: Vec<f64>,
    pub trials: usize,
    pub solvers: Vec<SolverKind>,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axis_values.is_empty() {
            return Err(Error::InvalidParams("a sweep needs at least one axis value".into()));
        }
        if self.axis_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParams("axis values must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParams("a sweep needs at least one trial".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidParams("a sweep needs at least one solver".into()));
        }
        for &v in &self.axis_values {
            self.axis.apply(&self.base, v)?.params()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub axis_value: f64,
    pub solver: String,
    pub trial_seed: u64,
    pub feasible: bool,
    pub eta: f64,
    pub eta_db: f64,
    pub min_secrecy_lb: f64,
    pub mean_secrecy_lb: f64,
    pub iterations: usize,
    pub status: String,
}

pub const CSV_HEADER: [&str; 11] = [
    "axis",
    "axis_value",
    "solver",
    "trial_seed",
    "feasible",
    "eta",
    "eta_db",
    "min_secrecy_lb",
    "mean_secrecy_lb",
    "iterations",
    "status",
];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `seed XOR hash(axis_value, trial)`.
pub fn trial_seed(seed: u64, axis_value: f64, trial: usize) -> u64 {
    seed ^ splitmix64(splitmix64(axis_value.to_bits()) ^ trial as u64)
}

/// Short machine-readable status for an error.
pub fn error_status(e: &Error) -> &'static str {
    match e {
        Error::Infeasible(_) | Error::SingularDelta => "infeasible",
        Error::InfeasibleProgram => "infeasible_program",
        Error::RankDeficient(_) | Error::RankDeficientG => "rank_deficient",
        Error::IllConditioned(_) => "ill_conditioned",
        Error::NonMonotone { .. } => "non_monotone",
        _ => "error",
    }
}

fn alternating_status(s: AlternatingStatus) -> &'static str {
    match s {
        AlternatingStatus::Converged => "converged",
        AlternatingStatus::MaxIterations => "max_iterations",
        AlternatingStatus::NoJammingPower => "no_jamming_power",
    }
}

fn design_status(s: DesignStatus) -> &'static str {
    match s {
        DesignStatus::Converged => "converged",
        DesignStatus::NoJammingPower => "no_jamming_power",
    }
}

/// Runs one solver. The design sees `ch_design` (possibly with CSI errors),
/// the report is evaluated on the true channels `ch`.
pub fn solve_report(
    kind: SolverKind,
    pre: &Precoder,
    ch: &ChannelSet,
    ch_design: &ChannelSet,
    params: &SystemParams,
) -> Result<SolveReport> {
    let perfect = ch == ch_design;
    let mut notes = Vec::new();
    if !perfect {
        notes.push("designed on perturbed jammer channels, evaluated on the true ones".to_string());
    }
    let report = match kind {
        SolverKind::Optimal => {
            let d = solve_optimal(pre, ch_design, params)?;
            SolveReport::build(pre, ch, params, DesignSummary {
                solver: kind.name(),
                status: design_status(d.status),
                p: &d.p,
                sigma: &d.sigma,
                objective: d.eta,
                objective_exact: perfect,
                zero_forcing: perfect,
                iterations: d.iterations,
                notes,
            })?
        }
        SolverKind::FixedSplit => {
            let d = solve_fixed_split(pre, ch_design, params, DEFAULT_SPLIT)?;
            notes.push(format!("jammer budget fixed at {:.6e} mW", d.jammer_budget));
            SolveReport::build(pre, ch, params, DesignSummary {
                solver: kind.name(),
                status: design_status(d.status),
                p: &d.p,
                sigma: &d.sigma,
                objective: d.eta,
                objective_exact: perfect,
                zero_forcing: perfect,
                iterations: d.iterations,
                notes,
            })?
        }
        SolverKind::Alternating => {
            let s = solve_alternating(pre, ch_design, params, &AlternatingOptions::default())?;
            notes.push("solver objective is the high-power form of the eavesdropper bound".to_string());
            SolveReport::build(pre, ch, params, DesignSummary {
                solver: kind.name(),
                status: alternating_status(s.status),
                p: &s.p,
                sigma: &s.sigma,
                objective: s.eta,
                objective_exact: false,
                zero_forcing: false,
                iterations: s.iterations,
                notes,
            })?
        }
        SolverKind::BZero => {
            let d = solve_b_zero(pre, ch_design, params)?;
            notes.push("design ignores the jammer-to-user channels; user QoS is not guaranteed".to_string());
            SolveReport::build(pre, ch, params, DesignSummary {
                solver: kind.name(),
                status: "converged",
                p: &d.p,
                sigma: &d.sigma,
                objective: d.eta,
                objective_exact: false,
                zero_forcing: false,
                iterations: 0,
                notes,
            })?
        }
        SolverKind::NoJamming => {
            let mut r = no_jamming_report(pre, ch, params)?;
            r.notes = notes;
            r
        }
        SolverKind::LInfLimit => {
            return Err(Error::InvalidParams("the large-array limit has no covariance to report".into()));
        }
    };
    Ok(report)
}

fn row_from(axis: Axis, value: f64, kind: SolverKind, seed: u64, result: std::result::Result<(f64, Vec<f64>, usize, String), &'static str>) -> SweepRow {
    let mut row = SweepRow {
        axis: axis.name().into(),
        axis_value: value,
        solver: kind.name().into(),
        trial_seed: seed,
        feasible: false,
        eta: f64::NAN,
        eta_db: f64::NAN,
        min_secrecy_lb: f64::NAN,
        mean_secrecy_lb: f64::NAN,
        iterations: 0,
        status: String::new(),
    };
    match result {
        Ok((eta, lb, iterations, status)) => {
            row.feasible = true;
            row.eta = eta;
            row.eta_db = linear_to_db(eta);
            row.min_secrecy_lb = lb.iter().copied().fold(f64::INFINITY, f64::min);
            row.mean_secrecy_lb = lb.iter().sum::<f64>() / lb.len().max(1) as f64;
            row.iterations = iterations;
            row.status = status;
        }
        Err(status) => row.status = status.into(),
    }
    row
}

/// All rows of one trial, in solver order.
pub fn run_trial(spec: &SweepSpec, value: f64, trial: usize) -> Vec<SweepRow> {
    let seed = trial_seed(spec.seed, value, trial);
    let setup = (|| -> Result<(SystemParams, ChannelSet, ChannelSet, Precoder)> {
        let cfg = spec.axis.apply(&spec.base, value)?;
        let params = cfg.params()?;
        let ch = ChannelSet::generate_rayleigh(&params, cfg.b_gain_db, seed);
        let ch_design = if cfg.xi2() > 0.0 { ch.perturb_csi(cfg.xi2(), seed)? } else { ch.clone() };
        let pre = Precoder::channel_inversion(&ch, params.tau)?;
        Ok((params, ch, ch_design, pre))
    })();
    spec.solvers
        .iter()
        .map(|&kind| {
            let result = match &setup {
                Err(e) => Err(error_status(e)),
                Ok((params, ch, ch_design, pre)) => match kind {
                    SolverKind::LInfLimit => l_infinity_design(pre, ch_design, params).and_then(|d| {
                        let none = vec![0.0; d.sinr_eve_upper.len()];
                        let b = secrecy_bounds(&none, &none, &d.sinr_eve_upper, params.rate_threshold())?;
                        Ok((d.eta, b.c_se_l2, 0, "converged".to_string()))
                    }),
                    _ => solve_report(kind, pre, ch, ch_design, params)
                        .map(|r| (r.eta, r.secrecy_lb_bits, r.iterations, r.status)),
                }
                .map_err(|e| error_status(&e)),
            };
            row_from(spec.axis, value, kind, seed, result)
        })
        .collect()
}

/// Rows ordered by axis value, then solver (in spec order), then trial.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let work: Vec<(usize, f64, usize)> = spec
        .axis_values
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| (0..spec.trials).map(move |t| (i, v, t)))
        .collect();
    let per_trial: Vec<Vec<SweepRow>> = work.par_iter().map(|&(_, v, t)| run_trial(spec, v, t)).collect();

    let mut rows = Vec::with_capacity(per_trial.len() * spec.solvers.len());
    for (vi, _) in spec.axis_values.iter().enumerate() {
        for si in 0..spec.solvers.len() {
            for t in 0..spec.trials {
                rows.push(per_trial[vi * spec.trials + t][si].clone());
            }
        }
    }
    Ok(rows)
}

pub fn write_csv_to<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.axis.clone(),
            format!("{}", r.axis_value),
            r.solver.clone(),
            r.trial_seed.to_string(),
            r.feasible.to_string(),
            format!("{:e}", r.eta),
            format!("{}", r.eta_db),
            format!("{}", r.min_secrecy_lb),
            format!("{}", r.mean_secrecy_lb),
            r.iterations.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(rows, std::io::BufWriter::new(file))
}

/// Averages over the feasible trials of one (axis value, solver) point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub axis_value: f64,
    pub solver: String,
    pub trials: usize,
    pub feasible: usize,
    /// Mean of `10 log10(eta)`.
    pub mean_eta_db: f64,
    pub mean_eta: f64,
    pub mean_min_secrecy_lb: f64,
    pub mean_secrecy_lb: f64,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<PointSummary> {
    let mut out: Vec<PointSummary> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (rows[start].axis_value, &rows[start].solver);
        let mut end = start;
        while end < rows.len() && (rows[end].axis_value, &rows[end].solver) == key {
            end += 1;
        }
        let group = &rows[start..end];
        let ok: Vec<&SweepRow> = group.iter().filter(|r| r.feasible).collect();
        let mean = |f: &dyn Fn(&SweepRow) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        out.push(PointSummary {
            axis_value: key.0,
            solver: key.1.clone(),
            trials: group.len(),
            feasible: ok.len(),
            mean_eta_db: mean(&|r| r.eta_db),
            mean_eta: mean(&|r| r.eta),
            mean_min_secrecy_lb: mean(&|r| r.min_secrecy_lb),
            mean_secrecy_lb: mean(&|r| r.mean_secrecy_lb),
        });
        start = end;
    }
    out
}
