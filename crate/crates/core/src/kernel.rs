//! Log-barrier interior-point solver for the small convex programs built by the
//! jamming designers, and the null-space parameterization of jamming factors.
//!
//! Programs minimize a linear objective `c^T x` subject to smooth convex
//! inequalities. Each centering step is a damped Newton method on
//! `t c^T x - sum_i log(-f_i(x))`; `t` grows geometrically until the duality
//! gap bound `m / t` is small. A phase-I program supplies a strictly feasible
//! start when the caller has none.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::numerics::{hermitian_inverse, orthogonal_complement, CMatrix, RMatrix, RVector, C64, MAX_CONDITION};

/// One convex inequality. Sparse terms are `(variable index, coefficient)`.
#[derive(Clone, Debug)]
pub enum Constraint {
    /// `sum a_i x_i <= rhs`.
    Linear { a: Vec<(usize, f64)>, rhs: f64 },
    /// `sum w_i / x_i^power + sum l_i x_i <= rhs` with `w_i >= 0`, on `x_i > 0`.
    ReciprocalSum { terms: Vec<(usize, f64)>, power: i32, linear: Vec<(usize, f64)>, rhs: f64 },
    /// `y^T Q y + q^T x' <= rhs`, where `y` is the leading `Q.nrows()` block of
    /// `x`, `x'` the leading `q.len()` block (at least as long as `y`), and `Q`
    /// is symmetric PSD.
    Quadratic { q: RMatrix, linear: RVector, rhs: f64 },
    /// `lower <= x_index <= upper`.
    Box { index: usize, lower: f64, upper: f64 },
}

impl Constraint {
    pub fn linear_dense(a: &RVector, rhs: f64) -> Self {
        Constraint::Linear {
            a: a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect(),
            rhs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvexProgram {
    pub dim: usize,
    pub objective: RVector,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug)]
pub struct KernelOptions {
    /// Barrier parameter growth factor.
    pub mu: f64,
    /// Fallback initial barrier weight when the centering heuristic fails.
    pub t0: f64,
    /// Stop when `m / t <= gap_tol (1 + |c^T x|)`.
    pub gap_tol: f64,
    /// Newton decrement threshold (`lambda^2 / 2`).
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_outer: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { mu: 10.0, t0: 1.0, gap_tol: 1e-9, newton_tol: 1e-10, max_newton: 200, max_outer: 60 }
    }
}

#[derive(Clone, Debug)]
pub struct KernelSolution {
    pub x: RVector,
    pub objective: f64,
    /// One multiplier per barrier term, in the order the constraints were given
    /// (a `Box` contributes lower then upper).
    pub duals: Vec<f64>,
    pub kkt_residual: f64,
    pub outer_iterations: usize,
    pub newton_steps: usize,
    /// Objective after each centering step.
    pub history: Vec<f64>,
}

/// A single barrier term `f(x) - x_slack <= 0` (no slack outside phase I).
#[derive(Clone, Debug)]
enum Atom {
    Linear { a: Vec<(usize, f64)>, rhs: f64 },
    Reciprocal { terms: Vec<(usize, f64)>, power: i32, linear: Vec<(usize, f64)>, rhs: f64 },
    Quadratic { q: RMatrix, linear: RVector, rhs: f64 },
}

#[derive(Clone, Debug)]
struct Term {
    atom: Atom,
    slack: Option<usize>,
}

impl Term {
    /// `None` outside the domain.
    fn value(&self, x: &RVector) -> Option<f64> {
        let v = match &self.atom {
            Atom::Linear { a, rhs } => a.iter().map(|(i, c)| c * x[*i]).sum::<f64>() - rhs,
            Atom::Reciprocal { terms, power, linear, rhs } => {
                let mut acc = 0.0;
                for (i, w) in terms {
                    if !(x[*i] > 0.0) {
                        return None;
                    }
                    acc += w * x[*i].powi(-power);
                }
                acc + linear.iter().map(|(i, c)| c * x[*i]).sum::<f64>() - rhs
            }
            Atom::Quadratic { q, linear, rhs } => {
                let y = x.rows(0, q.nrows());
                (y.transpose() * q * y)[(0, 0)] + linear.dot(&x.rows(0, linear.len())) - rhs
            }
        };
        Some(match self.slack {
            Some(s) => v - x[s],
            None => v,
        })
    }

    fn gradient(&self, x: &RVector) -> Vec<(usize, f64)> {
        let mut g: Vec<(usize, f64)> = match &self.atom {
            Atom::Linear { a, .. } => a.clone(),
            Atom::Reciprocal { terms, power, linear, .. } => {
                let p = *power as f64;
                let mut g: Vec<(usize, f64)> = terms.iter().map(|(i, w)| (*i, -p * w * x[*i].powi(-power - 1))).collect();
                g.extend(linear.iter().copied());
                g
            }
            Atom::Quadratic { q, linear, .. } => {
                let n = q.nrows();
                let y = x.rows(0, n);
                let mut d = linear.clone();
                d.rows_mut(0, n).axpy(2.0, &(q * y), 1.0);
                d.iter().enumerate().map(|(i, v)| (i, *v)).collect()
            }
        };
        if let Some(s) = self.slack {
            g.push((s, -1.0));
        }
        g
    }

    fn add_hessian(&self, x: &RVector, scale: f64, h: &mut RMatrix) {
        match &self.atom {
            Atom::Linear { .. } => {}
            Atom::Reciprocal { terms, power, .. } => {
                let p = *power as f64;
                for (i, w) in terms {
                    h[(*i, *i)] += scale * p * (p + 1.0) * w * x[*i].powi(-power - 2);
                }
            }
            Atom::Quadratic { q, .. } => {
                let n = q.nrows();
                let mut block = h.view_mut((0, 0), (n, n));
                block += q * (2.0 * scale);
            }
        }
    }
}

fn lower_terms(constraints: &[Constraint], slack: Option<usize>) -> Vec<Term> {
    let mut out = Vec::new();
    for c in constraints {
        let atom = |atom| Term { atom, slack };
        match c {
            Constraint::Linear { a, rhs } => out.push(atom(Atom::Linear { a: a.clone(), rhs: *rhs })),
            Constraint::ReciprocalSum { terms, power, linear, rhs } => out.push(atom(Atom::Reciprocal {
                terms: terms.clone(),
                power: *power,
                linear: linear.clone(),
                rhs: *rhs,
            })),
            Constraint::Quadratic { q, linear, rhs } => {
                out.push(atom(Atom::Quadratic { q: q.clone(), linear: linear.clone(), rhs: *rhs }))
            }
            Constraint::Box { index, lower, upper } => {
                out.push(atom(Atom::Linear { a: vec![(*index, -1.0)], rhs: -lower }));
                out.push(atom(Atom::Linear { a: vec![(*index, 1.0)], rhs: *upper }));
            }
        }
    }
    out
}

fn validate(program: &ConvexProgram) -> Result<()> {
    let n = program.dim;
    if program.objective.len() != n {
        return Err(Error::Dimension(format!("objective has {} entries, program has {n}", program.objective.len())));
    }
    let check = |i: usize| {
        if i >= n {
            Err(Error::Dimension(format!("constraint references variable {i} of {n}")))
        } else {
            Ok(())
        }
    };
    for c in &program.constraints {
        match c {
            Constraint::Linear { a, .. } => a.iter().try_for_each(|(i, _)| check(*i))?,
            Constraint::ReciprocalSum { terms, power, linear, .. } => {
                if !(1..=4).contains(power) {
                    return Err(Error::InvalidParams(format!("unsupported reciprocal power {power}")));
                }
                for (i, w) in terms {
                    check(*i)?;
                    if *w < 0.0 {
                        return Err(Error::InvalidParams("reciprocal weights must be nonnegative".into()));
                    }
                }
                linear.iter().try_for_each(|(i, _)| check(*i))?
            }
            Constraint::Quadratic { q, linear, .. } => {
                if q.nrows() != q.ncols() || linear.len() < q.nrows() || linear.len() > n {
                    return Err(Error::Dimension("quadratic constraint block does not fit the program".into()));
                }
            }
            Constraint::Box { index, lower, upper } => {
                check(*index)?;
                if !(lower < upper) {
                    return Err(Error::InvalidParams(format!("empty box [{lower}, {upper}] on variable {index}")));
                }
            }
        }
    }
    Ok(())
}

struct Barrier<'a> {
    objective: &'a RVector,
    terms: &'a [Term],
}

impl Barrier<'_> {
    /// Values of all terms if `x` is strictly feasible.
    fn values(&self, x: &RVector) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            let v = t.value(x)?;
            if !(v < 0.0) {
                return None;
            }
            out.push(v);
        }
        Some(out)
    }

    fn merit(&self, x: &RVector, t: f64) -> Option<f64> {
        let vals = self.values(x)?;
        Some(t * self.objective.dot(x) - vals.iter().map(|v| (-v).ln()).sum::<f64>())
    }

    fn derivatives(&self, x: &RVector, vals: &[f64], t: f64) -> (RVector, RMatrix) {
        let n = x.len();
        let mut g = self.objective * t;
        let mut h = RMatrix::zeros(n, n);
        for (term, &f) in self.terms.iter().zip(vals) {
            let inv = 1.0 / (-f);
            let grad = term.gradient(x);
            for &(i, gi) in &grad {
                g[i] += gi * inv;
            }
            let inv2 = inv * inv;
            for &(i, gi) in &grad {
                for &(j, gj) in &grad {
                    h[(i, j)] += gi * gj * inv2;
                }
            }
            term.add_hessian(x, inv, &mut h);
        }
        (g, h)
    }
}

/// Newton direction with Jacobi scaling, regularized once if Cholesky fails.
fn newton_direction(g: &RVector, h: &RMatrix) -> Result<RVector> {
    let n = g.len();
    let scale = RVector::from_iterator(n, h.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d.sqrt() } else { 1.0 }));
    let mut hs = h.clone();
    for i in 0..n {
        for j in 0..n {
            hs[(i, j)] *= scale[i] * scale[j];
        }
    }
    let gs = g.component_mul(&scale);
    let chol = match Cholesky::new(hs.clone()) {
        Some(c) => c,
        None => {
            for i in 0..n {
                hs[(i, i)] += 1e-10;
            }
            Cholesky::new(hs).ok_or_else(|| Error::NumericalFailure("barrier Hessian is not positive definite".into()))?
        }
    };
    let ys = chol.solve(&(-gs));
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite Newton step".into()));
    }
    Ok(ys.component_mul(&scale))
}

/// Barrier weight for which `x0` is closest to the central path: minimizes
/// the Newton-step norm of `t c + grad phi(x0)` over `t`.
fn initial_t(barrier: &Barrier, x0: &RVector) -> Option<f64> {
    let vals = barrier.values(x0)?;
    let (g, h) = barrier.derivatives(x0, &vals, 0.0);
    let c = barrier.objective;
    let hc = newton_direction(&-c, &h).ok()?;
    let hg = newton_direction(&-&g, &h).ok()?;
    let t = -c.dot(&hg) / c.dot(&hc);
    (t.is_finite() && t > 0.0).then(|| t.clamp(1e-8, 1e8))
}

struct Centering {
    x: RVector,
    steps: usize,
}

const MERIT_ULPS: f64 = 64.0;

fn center(barrier: &Barrier, mut x: RVector, t: f64, opts: &KernelOptions, stop: &impl Fn(&RVector) -> bool) -> Result<Centering> {
    const ALPHA: f64 = 0.01;
    const BETA: f64 = 0.5;
    let mut steps = 0;
    for _ in 0..opts.max_newton {
        let vals = barrier.values(&x).ok_or_else(|| Error::NumericalFailure("iterate left the interior".into()))?;
        let (g, h) = barrier.derivatives(&x, &vals, t);
        let dx = newton_direction(&g, &h)?;
        let slope = g.dot(&dx);
        if -slope / 2.0 <= opts.newton_tol {
            break;
        }
        let f0 = barrier.merit(&x, t).expect("current point is interior");
        // decreases below this are rounding noise in the merit
        let resolution = MERIT_ULPS * f64::EPSILON * f0.abs().max(1.0);
        let mut s = 1.0;
        let mut decrease = None;
        for _ in 0..200 {
            let trial = &x + &dx * s;
            if trial == x {
                break;
            }
            if let Some(f1) = barrier.merit(&trial, t) {
                if f1 <= f0 + ALPHA * s * slope {
                    x = trial;
                    decrease = Some(f0 - f1);
                    break;
                }
            }
            s *= BETA;
        }
        steps += 1;
        if stop(&x) {
            break;
        }
        match decrease {
            // no further progress is representable at this precision
            None => break,
            Some(d) if d <= resolution && s < 1.0 => break,
            _ => {}
        }
    }
    Ok(Centering { x, steps })
}

fn run_barrier(objective: &RVector, terms: &[Term], x0: RVector, opts: &KernelOptions, stop: impl Fn(&RVector) -> bool) -> Result<KernelSolution> {
    let barrier = Barrier { objective, terms };
    let m = terms.len() as f64;
    let mut t = initial_t(&barrier, &x0).unwrap_or(opts.t0);
    let mut x = x0;
    let mut history = Vec::new();
    let mut newton_steps = 0;
    let mut outer = 0;
    let mut stopped = false;
    loop {
        outer += 1;
        match center(&barrier, x.clone(), t, opts, &stop) {
            Ok(c) => {
                x = c.x;
                newton_steps += c.steps;
            }
            Err(e) => {
                // late in the path the Hessian can lose definiteness to rounding;
                // the last centered point is then already accurate enough
                let obj = objective.dot(&x);
                if outer > 1 && m / (t / opts.mu) <= 1e-6 * (1.0 + obj.abs()) {
                    t /= opts.mu;
                    break;
                }
                return Err(e);
            }
        }
        let obj = objective.dot(&x);
        history.push(obj);
        if stop(&x) {
            stopped = true;
            break;
        }
        if m / t <= opts.gap_tol * (1.0 + obj.abs()) || outer >= opts.max_outer {
            break;
        }
        t *= opts.mu;
    }

    // polish the last centering so the barrier multipliers satisfy stationarity tightly
    if !stopped {
        let polish = KernelOptions { newton_tol: 1e-20, max_newton: 10, ..opts.clone() };
        if let Ok(c) = center(&barrier, x.clone(), t, &polish, &|_| false) {
            x = c.x;
            newton_steps += c.steps;
        }
    }
    let vals = barrier.values(&x).ok_or_else(|| Error::NumericalFailure("final iterate is not interior".into()))?;
    let grads: Vec<Vec<(usize, f64)>> = terms.iter().map(|term| term.gradient(&x)).collect();
    let barrier_duals: Vec<f64> = vals.iter().map(|f| 1.0 / (-t * f)).collect();
    let residual = |duals: &[f64]| {
        let mut stationarity = objective.clone();
        for (grad, lam) in grads.iter().zip(duals) {
            for &(i, gi) in grad {
                stationarity[i] += lam * gi;
            }
        }
        let complementarity = duals.iter().zip(&vals).map(|(l, f)| (l * f).abs()).fold(0.0, f64::max);
        (stationarity.amax() / objective.amax().max(1.0)).max(complementarity)
    };
    let mut duals = barrier_duals.clone();
    let mut kkt_residual = residual(&duals);
    if let Some(refined) = refine_duals(objective, &grads, &barrier_duals) {
        let r = residual(&refined);
        if r < kkt_residual {
            duals = refined;
            kkt_residual = r;
        }
    }
    Ok(KernelSolution {
        objective: objective.dot(&x),
        x,
        duals,
        kkt_residual,
        outer_iterations: outer,
        newton_steps,
        history,
    })
}

/// Near an active bound the barrier multipliers `1 / (-t f_i)` inherit the
/// cancellation error of `f_i`. Re-fit the strongly active ones by least
/// squares on the stationarity condition, holding the rest fixed.
fn refine_duals(objective: &RVector, grads: &[Vec<(usize, f64)>], duals: &[f64]) -> Option<Vec<f64>> {
    let largest = duals.iter().copied().fold(0.0, f64::max);
    let active: Vec<usize> = (0..duals.len()).filter(|&i| duals[i] >= 1e-6 * largest && largest > 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let n = objective.len();
    let mut rhs = -objective.clone();
    for (i, (grad, lam)) in grads.iter().zip(duals).enumerate() {
        if !active.contains(&i) {
            for &(j, gj) in grad {
                rhs[j] -= lam * gj;
            }
        }
    }
    let mut jac = RMatrix::zeros(n, active.len());
    for (col, &i) in active.iter().enumerate() {
        for &(j, gj) in &grads[i] {
            jac[(j, col)] += gj;
        }
    }
    let fitted = jac.svd(true, true).solve(&rhs, 1e-14).ok()?;
    if fitted.iter().any(|v| !(*v >= 0.0)) {
        return None;
    }
    let mut out = duals.to_vec();
    for (col, &i) in active.iter().enumerate() {
        out[i] = fitted[col];
    }
    Some(out)
}

fn strictly_feasible(terms: &[Term], x: &RVector) -> bool {
    terms.iter().all(|t| matches!(t.value(x), Some(v) if v < 0.0))
}

/// Finds a strictly feasible point by minimizing the largest constraint value
/// `s` (bounded below by -1). Fails with `InfeasibleProgram` if `s` cannot be
/// pushed below zero.
pub fn phase_one(program: &ConvexProgram, start: Option<&RVector>, opts: &KernelOptions) -> Result<RVector> {
    validate(program)?;
    let n = program.dim;
    let base = lower_terms(&program.constraints, None);
    let mut x = start.cloned().unwrap_or_else(|| RVector::zeros(n));
    if x.len() != n {
        return Err(Error::Dimension(format!("start point has {} entries, program has {n}", x.len())));
    }
    // reciprocal terms need positive arguments
    for t in &base {
        if let Atom::Reciprocal { terms, .. } = &t.atom {
            for (i, _) in terms {
                if !(x[*i] > 0.0) {
                    x[*i] = 1.0;
                }
            }
        }
    }
    if strictly_feasible(&base, &x) {
        return Ok(x);
    }
    // The auxiliary program can have directions of recession along which the
    // barrier keeps improving; a box around the start keeps it bounded and is
    // widened before infeasibility is declared.
    let mut radius = 1e3 * (1.0 + x.amax());
    for _ in 0..4 {
        match phase_one_in_box(&program.constraints, &base, &x, radius, opts) {
            Err(Error::InfeasibleProgram) | Err(Error::NumericalFailure(_)) => radius *= 1e3,
            other => return other,
        }
    }
    Err(Error::InfeasibleProgram)
}

fn phase_one_in_box(constraints: &[Constraint], base: &[Term], x: &RVector, radius: f64, opts: &KernelOptions) -> Result<RVector> {
    let n = x.len();
    let worst = base.iter().map(|t| t.value(x).expect("domain repaired above")).fold(f64::NEG_INFINITY, f64::max);
    let mut terms = lower_terms(constraints, Some(n));
    terms.push(Term { atom: Atom::Linear { a: vec![(n, -1.0)], rhs: 1.0 }, slack: None });
    for i in 0..n {
        terms.push(Term { atom: Atom::Linear { a: vec![(i, 1.0)], rhs: x[i] + radius }, slack: None });
        terms.push(Term { atom: Atom::Linear { a: vec![(i, -1.0)], rhs: radius - x[i] }, slack: None });
    }
    let mut objective = RVector::zeros(n + 1);
    objective[n] = 1.0;
    let z0 = x.clone().insert_row(n, worst.max(-0.5) + 1.0);
    let sol = run_barrier(&objective, &terms, z0, opts, |y| {
        y[n] < 0.0 && strictly_feasible(base, &y.rows(0, n).into_owned())
    })?;
    let out = sol.x.rows(0, n).into_owned();
    if sol.x[n] > -1e-10 || !strictly_feasible(base, &out) {
        return Err(Error::InfeasibleProgram);
    }
    Ok(out)
}

/// Solves the program from `start` if it is strictly feasible, otherwise from
/// a phase-I point.
pub fn solve(program: &ConvexProgram, start: Option<&RVector>, opts: &KernelOptions) -> Result<KernelSolution> {
    validate(program)?;
    let terms = lower_terms(&program.constraints, None);
    let x0 = match start {
        Some(x) if x.len() == program.dim && strictly_feasible(&terms, x) => x.clone(),
        _ => phase_one(program, start, opts)?,
    };
    run_barrier(&program.objective, &terms, x0, opts, |_| false)
}

/// Affine parameterization of jamming factors `Gamma^H` (L x Z) with
/// `G^H Gamma^H = diag(x)` and `B0^H Gamma^H = 0`:
/// column j is `x_j m_j + N w_j`, where `N` spans the orthogonal complement of
/// `[G B0]`.
#[derive(Clone, Debug)]
pub struct NullspaceParam {
    /// L x Z, `G^H M = I`, `B0^H M = 0`.
    pub m: CMatrix,
    /// L x (L - Z - |B0|), orthonormal columns.
    pub basis: CMatrix,
}

impl NullspaceParam {
    pub fn free_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `Gamma^H` for diagonal targets `x` and free coefficients `w` ((L-Z-|B0|) x Z).
    pub fn gamma_h(&self, x: &[f64], w: &CMatrix) -> CMatrix {
        let mut out = &self.basis * w;
        for (j, xj) in x.iter().enumerate() {
            let mut col = out.column_mut(j);
            col += self.m.column(j) * C64::new(*xj, 0.0);
        }
        out
    }

    /// `Sigma = Gamma^H Gamma`.
    pub fn sigma(&self, x: &[f64], w: &CMatrix) -> CMatrix {
        let gh = self.gamma_h(x, w);
        &gh * gh.adjoint()
    }
}

pub fn gamma_nullspace_param(g: &CMatrix, b0: Option<&CMatrix>) -> Result<NullspaceParam> {
    let (l, z) = g.shape();
    let extra = b0.map_or(0, |b| b.ncols());
    if let Some(b) = b0 {
        if b.nrows() != l {
            return Err(Error::Dimension(format!("B0 has {} rows, G has {l}", b.nrows())));
        }
    }
    if z + extra > l {
        return Err(Error::RankDeficientG);
    }
    let mut stacked = CMatrix::zeros(l, z + extra);
    stacked.columns_mut(0, z).copy_from(g);
    if let Some(b) = b0 {
        stacked.columns_mut(z, extra).copy_from(b);
    }
    let gram = stacked.adjoint() * &stacked;
    let gram_inv = match hermitian_inverse(&gram) {
        Ok(inv) => inv,
        Err(Error::IllConditioned(_)) => return Err(Error::RankDeficientG),
        Err(e) => return Err(e),
    };
    let m = &stacked * gram_inv.columns(0, z);
    let basis = if z + extra == l {
        CMatrix::zeros(l, 0)
    } else {
        orthogonal_complement(&stacked)?
    };
    if !m.iter().all(|v| v.re.is_finite() && v.im.is_finite()) || m.norm() > MAX_CONDITION {
        return Err(Error::RankDeficientG);
    }
    Ok(NullspaceParam { m, basis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{complex_gaussian, seeded_rng};
    use crate::numerics::{identity, max_abs};
    use proptest::prelude::*;

    fn lin(a: &[(usize, f64)], rhs: f64) -> Constraint {
        Constraint::Linear { a: a.to_vec(), rhs }
    }

    #[test]
    fn one_dimensional_cases() {
        let p = ConvexProgram { dim: 1, objective: RVector::from_vec(vec![1.0]), constraints: vec![lin(&[(0, -1.0)], -1.0)] };
        let s = solve(&p, Some(&RVector::from_vec(vec![5.0])), &KernelOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-8);

        // min eta s.t. a x <= eta, c / x <= b, 0 < x <= u  ->  x = c / b, eta = a c / b
        let (a, c, b, u) = (2.0, 3.0, 1.5, 10.0);
        let p = ConvexProgram {
            dim: 2,
            objective: RVector::from_vec(vec![0.0, 1.0]),
            constraints: vec![
                lin(&[(0, a), (1, -1.0)], 0.0),
                Constraint::ReciprocalSum { terms: vec![(0, c)], power: 1, linear: vec![], rhs: b },
                Constraint::Box { index: 0, lower: 1e-12, upper: u },
            ],
        };
        let s = solve(&p, None, &KernelOptions::default()).unwrap();
        assert!((s.x[0] - c / b).abs() < 1e-7);
        assert!((s.objective - a * c / b).abs() < 1e-7);
        assert!(s.kkt_residual <= 1e-8);
    }

    #[test]
    fn box_lp() {
        let p = ConvexProgram {
            dim: 2,
            objective: RVector::from_vec(vec![1.0, -2.0]),
            constraints: vec![
                Constraint::Box { index: 0, lower: -1.0, upper: 3.0 },
                Constraint::Box { index: 1, lower: 0.5, upper: 2.0 },
            ],
        };
        let s = solve(&p, None, &KernelOptions::default()).unwrap();
        assert!((s.x[0] + 1.0).abs() < 1e-8 && (s.x[1] - 2.0).abs() < 1e-8);
        assert!(s.kkt_residual < 1e-8);
    }

    #[test]
    fn ball_qcqp() {
        let c = RVector::from_vec(vec![3.0, -4.0, 0.0]);
        let p = ConvexProgram {
            dim: 3,
            objective: c.clone(),
            constraints: vec![Constraint::Quadratic { q: RMatrix::identity(3, 3), linear: RVector::zeros(3), rhs: 4.0 }],
        };
        let s = solve(&p, None, &KernelOptions::default()).unwrap();
        let expect = -&c * (2.0 / c.norm());
        assert!((&s.x - expect).amax() < 1e-7);
        assert!((s.objective + 10.0).abs() < 1e-8);
    }

    #[test]
    fn reciprocal_closed_forms() {
        // min x1 + x2 s.t. 1/x1 + 4/x2 <= 1 -> (3, 6)
        let p = ConvexProgram {
            dim: 2,
            objective: RVector::from_vec(vec![1.0, 1.0]),
            constraints: vec![Constraint::ReciprocalSum { terms: vec![(0, 1.0), (1, 4.0)], power: 1, linear: vec![], rhs: 1.0 }],
        };
        let s = solve(&p, Some(&RVector::from_vec(vec![10.0, 10.0])), &KernelOptions::default()).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-7 && (s.x[1] - 6.0).abs() < 1e-7);

        // min x1 + x2 s.t. 1/x1^2 + 1/x2^2 <= 2 -> (1, 1)
        let p = ConvexProgram {
            dim: 2,
            objective: RVector::from_vec(vec![1.0, 1.0]),
            constraints: vec![Constraint::ReciprocalSum { terms: vec![(0, 1.0), (1, 1.0)], power: 2, linear: vec![], rhs: 2.0 }],
        };
        let s = solve(&p, None, &KernelOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-7 && (s.x[1] - 1.0).abs() < 1e-7);

        // epigraph form: min eta s.t. 2/x^2 - eta <= 0, x <= 2 -> eta = 0.5
        let p = ConvexProgram {
            dim: 2,
            objective: RVector::from_vec(vec![0.0, 1.0]),
            constraints: vec![
                Constraint::ReciprocalSum { terms: vec![(0, 2.0)], power: 2, linear: vec![(1, -1.0)], rhs: 0.0 },
                lin(&[(0, 1.0)], 2.0),
            ],
        };
        let s = solve(&p, None, &KernelOptions::default()).unwrap();
        assert!((s.objective - 0.5).abs() < 1e-8);
    }

    #[test]
    fn central_path_is_monotone() {
        let p = ConvexProgram {
            dim: 3,
            objective: RVector::from_vec(vec![1.0, 2.0, 0.5]),
            constraints: vec![
                Constraint::ReciprocalSum { terms: vec![(0, 1.0), (1, 2.0), (2, 0.5)], power: 1, linear: vec![], rhs: 1.0 },
                Constraint::Quadratic { q: RMatrix::identity(3, 3), linear: RVector::zeros(3), rhs: 400.0 },
            ],
        };
        let s = solve(&p, None, &KernelOptions::default()).unwrap();
        for w in s.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        assert!(s.kkt_residual < 1e-8);
    }

    #[test]
    fn infeasible_programs_are_detected() {
        let p = ConvexProgram {
            dim: 1,
            objective: RVector::from_vec(vec![1.0]),
            constraints: vec![lin(&[(0, -1.0)], -1.0), lin(&[(0, 1.0)], 0.0)],
        };
        assert!(matches!(solve(&p, None, &KernelOptions::default()), Err(Error::InfeasibleProgram)));
        // a single point has no interior
        let p = ConvexProgram {
            dim: 1,
            objective: RVector::from_vec(vec![1.0]),
            constraints: vec![lin(&[(0, -1.0)], -1.0), lin(&[(0, 1.0)], 1.0)],
        };
        assert!(matches!(solve(&p, None, &KernelOptions::default()), Err(Error::InfeasibleProgram)));
    }

    #[test]
    fn bad_programs_are_rejected() {
        let p = ConvexProgram { dim: 1, objective: RVector::from_vec(vec![1.0]), constraints: vec![lin(&[(3, 1.0)], 0.0)] };
        assert!(matches!(solve(&p, None, &KernelOptions::default()), Err(Error::Dimension(_))));
    }

    /// Vertex enumeration for a bounded 2-D LP.
    fn lp2_oracle(c: [f64; 2], rows: &[([f64; 2], f64)]) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let (a, b) = (rows[i].0, rows[j].0);
                let det = a[0] * b[1] - a[1] * b[0];
                if det.abs() < 1e-9 {
                    continue;
                }
                let x = (rows[i].1 * b[1] - a[1] * rows[j].1) / det;
                let y = (a[0] * rows[j].1 - rows[i].1 * b[0]) / det;
                if rows.iter().all(|(r, h)| r[0] * x + r[1] * y <= h + 1e-9) {
                    let v = c[0] * x + c[1] * y;
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_2d_lps_match_vertex_enumeration(
            c in prop::array::uniform2(-1.0f64..1.0),
            extra in prop::collection::vec((prop::array::uniform2(-1.0f64..1.0), 0.2f64..2.0), 1..5),
        ) {
            let mut rows: Vec<([f64; 2], f64)> = vec![([1.0, 0.0], 3.0), ([-1.0, 0.0], 3.0), ([0.0, 1.0], 3.0), ([0.0, -1.0], 3.0)];
            rows.extend(extra);
            let oracle = lp2_oracle(c, &rows).unwrap();
            let p = ConvexProgram {
                dim: 2,
                objective: RVector::from_vec(c.to_vec()),
                constraints: rows.iter().map(|(a, h)| lin(&[(0, a[0]), (1, a[1])], *h)).collect(),
            };
            let s = solve(&p, None, &KernelOptions::default()).unwrap();
            prop_assert!((s.objective - oracle).abs() < 1e-6, "kernel {} oracle {}", s.objective, oracle);
        }
    }

    /// Feasible-grid minimum with repeated zooming around the incumbent.
    fn grid_oracle(c: [f64; 2], feasible: impl Fn(f64, f64) -> bool, mut lo: [f64; 2], mut hi: [f64; 2]) -> f64 {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for _ in 0..6 {
            let steps = 200;
            for i in 0..=steps {
                for j in 0..=steps {
                    let x = lo[0] + (hi[0] - lo[0]) * i as f64 / steps as f64;
                    let y = lo[1] + (hi[1] - lo[1]) * j as f64 / steps as f64;
                    if feasible(x, y) {
                        let v = c[0] * x + c[1] * y;
                        if v < best.0 {
                            best = (v, x, y);
                        }
                    }
                }
            }
            let w = [(hi[0] - lo[0]) / 20.0, (hi[1] - lo[1]) / 20.0];
            lo = [best.1 - w[0], best.2 - w[1]];
            hi = [best.1 + w[0], best.2 + w[1]];
        }
        best.0
    }

    #[test]
    fn small_programs_match_grid_search() {
        let mut rng = seeded_rng(5, 12);
        use rand::Rng;
        for _ in 0..10 {
            let center = [rng.random_range(2.0..3.0), rng.random_range(2.0..3.0)];
            let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let r = 1.0 / center[0] + 1.0 / center[1] + 0.1;
            let p = ConvexProgram {
                dim: 2,
                objective: RVector::from_vec(c.to_vec()),
                constraints: vec![
                    Constraint::Quadratic {
                        q: RMatrix::identity(2, 2),
                        linear: RVector::from_vec(vec![-2.0 * center[0], -2.0 * center[1]]),
                        rhs: 1.0 - center[0] * center[0] - center[1] * center[1],
                    },
                    Constraint::ReciprocalSum { terms: vec![(0, 1.0), (1, 1.0)], power: 1, linear: vec![], rhs: r },
                ],
            };
            let s = solve(&p, None, &KernelOptions::default()).unwrap();
            let feasible = |x: f64, y: f64| {
                (x - center[0]).powi(2) + (y - center[1]).powi(2) <= 1.0 && x > 0.0 && y > 0.0 && 1.0 / x + 1.0 / y <= r
            };
            let oracle = grid_oracle(c, feasible, [center[0] - 1.0, center[1] - 1.0], [center[0] + 1.0, center[1] + 1.0]);
            assert!((s.objective - oracle).abs() < 1e-4, "kernel {} grid {}", s.objective, oracle);
            assert!(s.kkt_residual <= 1e-8);
            for w in s.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
        }
    }

    fn random_complex(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = seeded_rng(seed, 11);
        CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn nullspace_param_identities() {
        for seed in 0..10 {
            let (l, z) = (7, 3);
            let g = random_complex(l, z, seed);
            let b0 = random_complex(l, 2, seed + 50);
            for b in [None, Some(&b0)] {
                let param = gamma_nullspace_param(&g, b).unwrap();
                let extra = b.map_or(0, |m| m.ncols());
                assert_eq!(param.free_dim(), l - z - extra);
                let x = [0.5, 1.5, 2.0];
                let w = random_complex(param.free_dim(), z, seed + 99);
                let gh = param.gamma_h(&x, &w);
                let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(z, x.iter().map(|v| C64::new(*v, 0.0))));
                assert!(max_abs(&(g.adjoint() * &gh - diag)) < 1e-10);
                if let Some(bm) = b {
                    assert!(max_abs(&(bm.adjoint() * &gh)) < 1e-10);
                }
                assert!(max_abs(&(param.basis.adjoint() * &param.basis - identity(param.free_dim()))) < 1e-10);
            }
        }
    }

    #[test]
    fn nullspace_param_rejects_rank_deficiency() {
        let g = random_complex(4, 2, 1);
        let mut dup = CMatrix::zeros(4, 2);
        dup.column_mut(0).copy_from(&g.column(0));
        dup.column_mut(1).copy_from(&g.column(0));
        assert!(matches!(gamma_nullspace_param(&dup, None), Err(Error::RankDeficientG)));
        let wide = random_complex(3, 2, 2);
        assert!(matches!(gamma_nullspace_param(&random_complex(3, 2, 3), Some(&wide)), Err(Error::RankDeficientG)));
    }
}
