//! Accelerated dual decomposition for `min ‖x̃‖² s.t. Ax̃ ≤ c, Bx̃ = e`.
//!
//! Each iteration has two bulk-synchronous phases on the factor graph:
//! precoded-symbol nodes (one per subcarrier, owning `x̃_{2n}, x̃_{2n+1}`)
//! form the Lagrangian minimizer from their neighbours' duals, then
//! output-symbol nodes (one per user, owning that user's rows) take an
//! accelerated projected-gradient step on the dual. Both phases only read
//! values produced by the previous phase, so any parallel schedule gives the
//! same bits as the sequential one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSystem, RowKind};
use crate::{Error, Result};

/// Iteration control for [`solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop when `|g⁽ᵗ⁾ − g*| / |g*| ≤ rel_tolerance`, `g*` the best earlier value.
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    /// Initial multipliers for the rows of `A` (padding entries ignored).
    /// Defaults to one on every active row.
    pub initial_lambda: Option<Vec<f64>>,
    /// Initial multipliers for the rows of `B`. Defaults to zero.
    pub initial_nu: Option<Vec<f64>>,
    /// Extra iteration blocks run when the stopped iterate is still infeasible.
    pub repair_blocks: usize,
    pub repair_block_len: usize,
    /// Feasibility tolerance relative to `max(1, ‖c‖_∞, ‖e‖_∞)`.
    pub feasibility_tolerance: f64,
    /// Run the node updates on the rayon pool.
    pub parallel: bool,
    /// Record the primal violation at every iteration (costs one extra
    /// matrix-vector product per iteration).
    pub record_violation: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_tolerance: 1e-4,
            max_iterations: 5000,
            initial_lambda: None,
            initial_nu: None,
            repair_blocks: 3,
            repair_block_len: 500,
            feasibility_tolerance: 1e-4,
            parallel: false,
            record_violation: false,
        }
    }
}

/// Operation counts under the distributed node model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    /// Scalar values crossing a graph edge.
    pub messages: u64,
    pub additions: u64,
    pub multiplications: u64,
}

impl std::ops::AddAssign for OpCounters {
    fn add_assign(&mut self, o: Self) {
        self.messages += o.messages;
        self.additions += o.additions;
        self.multiplications += o.multiplications;
    }
}

impl std::ops::Mul<u64> for OpCounters {
    type Output = OpCounters;

    fn mul(self, t: u64) -> OpCounters {
        OpCounters {
            messages: self.messages * t,
            additions: self.additions * t,
            multiplications: self.multiplications * t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Stacked real precoded vector `x̃*`.
    pub x: Vec<f64>,
    /// Multipliers for every row of `A` (zero on padding rows).
    pub lambda: Vec<f64>,
    /// Multipliers for every row of `B` (zero on padding rows).
    pub nu: Vec<f64>,
    pub iterations: usize,
    pub dual_trace: Vec<f64>,
    pub violation_trace: Option<Vec<f64>>,
    pub counters: OpCounters,
    pub converged: bool,
    /// `max(0, max(Ax̃ − c), max|Bx̃ − e|)` at the returned point.
    pub primal_violation: f64,
    pub kappa: f64,
}

impl SolveResult {
    pub fn power(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }
}

/// Step normalizer `κ = (‖ĀĀᵀ‖₁·‖ĀĀᵀ‖_∞)^{1/2}` over the active rows of
/// `Ā = [Aᵀ, Bᵀ]ᵀ`.
pub fn compute_kappa(system: &ConstraintSystem) -> Result<f64> {
    let rows: Vec<(bool, usize)> = system
        .active_inequalities()
        .map(|i| (false, i))
        .chain(system.active_equalities().map(|j| (true, j)))
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptySystem);
    }
    let mut compact = vec![usize::MAX; system.a.n_rows() + system.b.n_rows()];
    for (r, &(eq, i)) in rows.iter().enumerate() {
        compact[if eq { system.a.n_rows() + i } else { i }] = r;
    }
    let m = rows.len();
    let mut col_sums = vec![0.0; m];
    let mut max_row_sum: f64 = 0.0;
    let mut acc = vec![0.0; m];
    for &(eq, i) in &rows {
        acc.iter_mut().for_each(|v| *v = 0.0);
        let (cols, vals) = if eq { system.b.row(i) } else { system.a.row(i) };
        for (&l, &v) in cols.iter().zip(vals) {
            let (ra, va) = system.a.col(l);
            for (&s, &w) in ra.iter().zip(va) {
                let r = compact[s];
                if r != usize::MAX {
                    acc[r] += v * w;
                }
            }
            let (rb, vb) = system.b.col(l);
            for (&s, &w) in rb.iter().zip(vb) {
                let r = compact[system.a.n_rows() + s];
                if r != usize::MAX {
                    acc[r] += v * w;
                }
            }
        }
        let row_sum: f64 = acc.iter().map(|v| v.abs()).sum();
        max_row_sum = max_row_sum.max(row_sum);
        for (cs, v) in col_sums.iter_mut().zip(&acc) {
            *cs += v.abs();
        }
    }
    let max_col_sum = col_sums.into_iter().fold(0.0, f64::max);
    let kappa = (max_col_sum * max_row_sum).sqrt();
    if kappa == 0.0 {
        return Err(Error::EmptySystem);
    }
    Ok(kappa)
}

/// Lagrangian minimizer `x̃ = −½(Aᵀλ + Bᵀν)`, one coordinate per column
/// from the column's own neighbours.
pub fn primal_from_dual(system: &ConstraintSystem, lambda: &[f64], nu: &[f64]) -> Vec<f64> {
    (0..system.n_vars())
        .map(|l| primal_coordinate(system, lambda, nu, l))
        .collect()
}

fn primal_coordinate(system: &ConstraintSystem, lambda: &[f64], nu: &[f64], l: usize) -> f64 {
    let (ra, va) = system.a.col(l);
    let mut sa = 0.0;
    for (&i, &v) in ra.iter().zip(va) {
        sa += v * lambda[i];
    }
    let (rb, vb) = system.b.col(l);
    let mut sb = 0.0;
    for (&j, &v) in rb.iter().zip(vb) {
        sb += v * nu[j];
    }
    -0.5 * (sa + sb)
}

/// `g = x̃ᵀx̃ + λᵀ(Ax̃ − c) + νᵀ(Bx̃ − e)` over the active rows.
pub fn dual_objective(system: &ConstraintSystem, x: &[f64], lambda: &[f64], nu: &[f64]) -> f64 {
    let mut g: f64 = x.iter().map(|v| v * v).sum();
    for i in system.active_inequalities() {
        g += lambda[i] * (system.a.row_dot(i, x) - system.c[i]);
    }
    for j in system.active_equalities() {
        g += nu[j] * (system.b.row_dot(j, x) - system.e[j]);
    }
    g
}

/// Momentum weight `(t − 1)/(t + 2)`.
pub fn momentum(t: usize) -> f64 {
    (t as f64 - 1.0) / (t as f64 + 2.0)
}

/// One accelerated dual step. `x_hat` is the extrapolated primal
/// `x*⁽ᵗ⁾ + m_t(x*⁽ᵗ⁾ − x*⁽ᵗ⁻¹⁾)`. Only `λ` is projected onto `λ ≥ 0`.
#[allow(clippy::too_many_arguments)]
pub fn dual_update(
    system: &ConstraintSystem,
    lambda: &[f64],
    lambda_prev: &[f64],
    nu: &[f64],
    nu_prev: &[f64],
    x_hat: &[f64],
    kappa: f64,
    t: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = momentum(t);
    let step = 1.0 / (2.0 * kappa);
    let mut new_lambda = vec![0.0; lambda.len()];
    let mut new_nu = vec![0.0; nu.len()];
    for i in system.active_inequalities() {
        new_lambda[i] = lambda_step(system, lambda, lambda_prev, x_hat, m, step, i);
    }
    for j in system.active_equalities() {
        new_nu[j] = nu_step(system, nu, nu_prev, x_hat, m, step, j);
    }
    (new_lambda, new_nu)
}

#[inline]
fn lambda_step(
    system: &ConstraintSystem,
    lambda: &[f64],
    lambda_prev: &[f64],
    x_hat: &[f64],
    m: f64,
    step: f64,
    i: usize,
) -> f64 {
    let grad = system.a.row_dot(i, x_hat) - system.c[i];
    (lambda[i] + m * (lambda[i] - lambda_prev[i]) + step * grad).max(0.0)
}

#[inline]
fn nu_step(
    system: &ConstraintSystem,
    nu: &[f64],
    nu_prev: &[f64],
    x_hat: &[f64],
    m: f64,
    step: f64,
    j: usize,
) -> f64 {
    let grad = system.b.row_dot(j, x_hat) - system.e[j];
    nu[j] + m * (nu[j] - nu_prev[j]) + step * grad
}

/// Per-iteration counts: duals flow OSN → PSN along each edge, primal pairs
/// flow back. A PSN coordinate fed by `n` duals costs `n` multiplications and
/// `n − 1` additions. An OSN row with `n` entries costs `2n` multiplications
/// and `3n + 3` additions (extrapolation, inner product, bound, momentum,
/// and step).
pub fn per_iteration_counters(system: &ConstraintSystem) -> OpCounters {
    let n_psn = system.n_vars() / 2;
    let n_users = system
        .a_rows
        .iter()
        .chain(&system.b_rows)
        .map(|p| p.user + 1)
        .max()
        .unwrap_or(0);
    let mut active_per_user = vec![0u64; n_users];
    let mut touches = vec![vec![false; n_psn]; n_users];
    let mut c = OpCounters::default();
    let rows = system
        .active_inequalities()
        .map(|i| (&system.a_rows[i], system.a.row(i).0))
        .chain(
            system
                .active_equalities()
                .map(|j| (&system.b_rows[j], system.b.row(j).0)),
        );
    for (prov, cols) in rows {
        debug_assert_ne!(prov.kind, RowKind::Padding);
        active_per_user[prov.user] += 1;
        for &l in cols {
            touches[prov.user][l / 2] = true;
        }
        let n = cols.len() as u64;
        c.multiplications += 2 * n + 2;
        c.additions += 3 * n + 3;
    }
    for (k, row) in touches.iter().enumerate() {
        let edges = row.iter().filter(|&&b| b).count() as u64;
        c.messages += edges * (active_per_user[k] + 2);
    }
    for l in 0..system.n_vars() {
        let n = (system.a.col(l).0.len() + system.b.col(l).0.len()) as u64;
        c.multiplications += n;
        c.additions += n.saturating_sub(1);
    }
    c
}

fn full_initial(len: usize, given: Option<&Vec<f64>>, default: f64, active: &[usize]) -> Result<Vec<f64>> {
    let mut v = vec![0.0; len];
    match given {
        Some(g) => {
            if g.len() != len {
                return Err(Error::Dimension(format!(
                    "initial dual of length {} for {len} rows",
                    g.len()
                )));
            }
            for &i in active {
                v[i] = g[i];
            }
        }
        None => {
            for &i in active {
                v[i] = default;
            }
        }
    }
    Ok(v)
}

/// Runs the accelerated dual decomposition until the normalized dual
/// improvement drops below the tolerance or the iteration cap is hit.
pub fn solve(system: &ConstraintSystem, options: &SolverOptions) -> Result<SolveResult> {
    if !(options.rel_tolerance > 0.0) || options.max_iterations == 0 {
        return Err(Error::InvalidParameter(
            "solver needs a positive tolerance and at least one iteration".into(),
        ));
    }
    let kappa = compute_kappa(system)?;
    let active_a: Vec<usize> = system.active_inequalities().collect();
    let active_b: Vec<usize> = system.active_equalities().collect();
    let mut lambda = full_initial(system.a.n_rows(), options.initial_lambda.as_ref(), 1.0, &active_a)?;
    if active_a.iter().any(|&i| !(lambda[i] > 0.0)) {
        return Err(Error::InvalidParameter("initial lambda must be positive".into()));
    }
    let mut nu = full_initial(system.b.n_rows(), options.initial_nu.as_ref(), 0.0, &active_b)?;
    let mut lambda_prev = lambda.clone();
    let mut nu_prev = nu.clone();
    let step = 1.0 / (2.0 * kappa);
    let tol_abs = options.feasibility_tolerance * system.bound_scale();

    let n_vars = system.n_vars();
    let mut x = vec![0.0; n_vars];
    let mut x_prev: Vec<f64> = Vec::new();
    let mut x_hat = vec![0.0; n_vars];
    let mut new_lambda = lambda.clone();
    let mut new_nu = nu.clone();
    let mut trace = Vec::new();
    let mut violations = options.record_violation.then(Vec::new);
    let mut best = f64::NEG_INFINITY;

    let mut t = 0usize;
    let mut converged = false;
    let mut stop_at = options.max_iterations;
    let mut repairs_left = options.repair_blocks;
    let mut check_stop = true;

    loop {
        t += 1;
        // PSN phase
        if options.parallel {
            x.par_iter_mut()
                .enumerate()
                .for_each(|(l, v)| *v = primal_coordinate(system, &lambda, &nu, l));
        } else {
            for (l, v) in x.iter_mut().enumerate() {
                *v = primal_coordinate(system, &lambda, &nu, l);
            }
        }
        if t == 1 {
            x_prev = x.clone();
        }
        let g = dual_objective(system, &x, &lambda, &nu);
        trace.push(g);
        if let Some(v) = violations.as_mut() {
            v.push(system.primal_violation(&x));
        }

        let mut stop = false;
        if check_stop && t >= 2 {
            let improvement = (g - best).abs();
            let settled = if best.abs() < 1e-9 {
                improvement <= options.rel_tolerance
            } else {
                improvement / best.abs() <= options.rel_tolerance
            };
            if settled {
                converged = true;
                stop = true;
            }
        }
        best = best.max(g);
        if t >= stop_at {
            stop = true;
        }
        if stop {
            let violation = system.primal_violation(&x);
            if violation > tol_abs && repairs_left > 0 {
                repairs_left -= 1;
                check_stop = false;
                stop_at = t + options.repair_block_len;
            } else {
                if violation > tol_abs {
                    converged = false;
                }
                break;
            }
        }

        // OSN phase
        let m = momentum(t);
        for ((h, &xc), &xp) in x_hat.iter_mut().zip(&x).zip(&x_prev) {
            *h = xc + m * (xc - xp);
        }
        if options.parallel {
            new_lambda.par_iter_mut().enumerate().for_each(|(i, v)| {
                if system.a_rows[i].kind != RowKind::Padding {
                    *v = lambda_step(system, &lambda, &lambda_prev, &x_hat, m, step, i);
                }
            });
            new_nu.par_iter_mut().enumerate().for_each(|(j, v)| {
                if system.b_rows[j].kind != RowKind::Padding {
                    *v = nu_step(system, &nu, &nu_prev, &x_hat, m, step, j);
                }
            });
        } else {
            for &i in &active_a {
                new_lambda[i] = lambda_step(system, &lambda, &lambda_prev, &x_hat, m, step, i);
            }
            for &j in &active_b {
                new_nu[j] = nu_step(system, &nu, &nu_prev, &x_hat, m, step, j);
            }
        }
        std::mem::swap(&mut lambda_prev, &mut lambda);
        std::mem::swap(&mut lambda, &mut new_lambda);
        std::mem::swap(&mut nu_prev, &mut nu);
        std::mem::swap(&mut nu, &mut new_nu);
        std::mem::swap(&mut x_prev, &mut x);
    }

    let primal_violation = system.primal_violation(&x);
    Ok(SolveResult {
        x,
        lambda,
        nu,
        iterations: t,
        dual_trace: trace,
        violation_trace: violations,
        counters: per_iteration_counters(system) * t as u64,
        converged,
        primal_violation,
        kappa,
    })
}
