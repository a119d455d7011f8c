//! Graph-form ADMM for
//!
//! ```text
//! minimize    cᵀx + I_K(y)
//! subject to  y = Ax + b
//! ```
//!
//! Each iteration takes the proximal steps on `x` and `y` separately and
//! then projects `(x, y)` onto the graph `{y = Ax + b}`, which means solving
//! `(I + AᵀA) x = u + Aᵀ(v − b)`. That solve uses warm-started conjugate
//! gradient, so `A` is only ever applied, never formed.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::canon::ConeProgram;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};

use super::cones::{project_product, Cone};
use super::operator::{DagOperator, EmptyOperator, LinearOperator};

/// ADMM step size; fixed so runs are reproducible.
pub const RHO: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iters: usize,
    /// CG stops at this relative residual (or after `10√n` iterations).
    pub cg_tol: f64,
    /// Threads for evaluating the operator DAGs.
    pub threads: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps_abs: 1e-4,
            eps_rel: 1e-3,
            max_iters: 10_000,
            cg_tol: 1e-7,
            threads: 1,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(eps_abs: f64, eps_rel: f64) -> Self {
        SolverOptions {
            eps_abs,
            eps_rel,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Solved,
    MaxIters,
}

/// One line of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
    pub objective: f64,
}

impl fmt::Display for IterRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:.6e} {:.6e} {:.9e}",
            self.iter, self.primal, self.dual, self.objective
        )
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Stacked variable values (see [`ConeProgram::var_index`]).
    pub x: Vec<f64>,
    /// Cone-side values, `y ∈ K` with `y ≈ Ax + b`.
    pub y: Vec<f64>,
    pub objective: f64,
    pub status: Status,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub cg_iterations: usize,
    pub history: Vec<IterRecord>,
}

impl Solution {
    /// Writes the history, one record per line.
    pub fn write_log(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "iter primal dual objective")?;
        for r in &self.history {
            writeln!(out, "{r}")?;
        }
        Ok(())
    }
}

/// `‖Ax + b − y‖₂`.
pub fn primal_residual(op: &mut dyn LinearOperator, b: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mut ax = vec![0.0; op.rows()];
    op.forward(x, &mut ax);
    ax.iter()
        .zip(b)
        .zip(y)
        .map(|((a, b), y)| (a + b - y) * (a + b - y))
        .sum::<f64>()
        .sqrt()
}

/// `ρ‖z_new − z_old‖₂` for the stacked iterate `z = (x, y)`.
pub fn dual_residual(z_new: (&[f64], &[f64]), z_old: (&[f64], &[f64])) -> f64 {
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    RHO * (d2(z_new.0, z_old.0) + d2(z_new.1, z_old.1)).sqrt()
}

/// `out = (I + AᵀA) v`, using `ap` for `Av`.
fn apply_normal(op: &mut dyn LinearOperator, ap: &mut [f64], v: &[f64], out: &mut [f64]) {
    op.forward(v, ap);
    op.adjoint(ap, out);
    for (o, vi) in out.iter_mut().zip(v) {
        *o += vi;
    }
}

/// Conjugate gradient on `(I + AᵀA) x = rhs`, starting from `x`.
struct Cg {
    r: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    ap: Vec<f64>,
    max_iters: usize,
    tol: f64,
}

impl Cg {
    fn new(n: usize, m: usize, tol: f64) -> Cg {
        Cg {
            r: vec![0.0; n],
            p: vec![0.0; n],
            q: vec![0.0; n],
            ap: vec![0.0; m],
            max_iters: ((10.0 * (n as f64).sqrt()).ceil() as usize).max(1),
            tol,
        }
    }

    /// Returns the number of iterations taken.
    fn solve(&mut self, op: &mut dyn LinearOperator, rhs: &[f64], x: &mut [f64]) -> usize {
        apply_normal(op, &mut self.ap, x, &mut self.r);
        for (r, b) in self.r.iter_mut().zip(rhs) {
            *r = b - *r;
        }
        let target = self.tol * norm2(rhs).max(f64::MIN_POSITIVE);
        let mut rr = dot(&self.r, &self.r);
        self.p.copy_from_slice(&self.r);
        let mut k = 0;
        while rr.sqrt() > target && k < self.max_iters {
            apply_normal(op, &mut self.ap, &self.p, &mut self.q);
            let alpha = rr / dot(&self.p, &self.q);
            for i in 0..x.len() {
                x[i] += alpha * self.p[i];
                self.r[i] -= alpha * self.q[i];
            }
            let rr_new = dot(&self.r, &self.r);
            let beta = rr_new / rr;
            for (p, r) in self.p.iter_mut().zip(&self.r) {
                *p = r + beta * *p;
            }
            rr = rr_new;
            k += 1;
        }
        k
    }
}

/// Solves `cp` with its FAO DAG as the operator.
pub fn solve(cp: &ConeProgram, opts: &SolverOptions) -> Result<Solution> {
    match &cp.g {
        Some(g) => {
            let mut op = DagOperator::new(g)?;
            op.set_threads(opts.threads);
            solve_with(&mut op, cp, opts)
        }
        None => solve_with(&mut EmptyOperator(cp.n()), cp, opts),
    }
}

/// Solves `cp` with `op` standing in for `A`.
pub fn solve_with(op: &mut dyn LinearOperator, cp: &ConeProgram, opts: &SolverOptions) -> Result<Solution> {
    let (m, n) = (cp.m(), cp.n());
    if op.rows() != m || op.cols() != n {
        return Err(Error::dim(format!(
            "operator is {}x{}, program needs {m}x{n}",
            op.rows(),
            op.cols()
        )));
    }
    let cones: &[Cone] = &cp.cones;
    let c = &cp.c;
    let b = &cp.b;

    let (mut x, mut y) = (vec![0.0; n], vec![0.0; m]);
    let (mut xt, mut yt) = (vec![0.0; n], vec![0.0; m]);
    let (mut xh, mut yh) = (vec![0.0; n], vec![0.0; m]);
    let (mut x_old, mut y_old) = (vec![0.0; n], vec![0.0; m]);
    let mut rhs = vec![0.0; n];
    let mut tmp_m = vec![0.0; m];
    let mut axh = vec![0.0; m];
    let mut cg = Cg::new(n, m, opts.cg_tol);
    let (norm_b, norm_c) = (norm2(b), norm2(c));

    let mut history = Vec::new();
    let mut cg_total = 0;
    let mut status = Status::MaxIters;
    let (mut pri, mut dua) = (f64::INFINITY, f64::INFINITY);
    let mut iters = 0;
    let (mut best_x, mut best_y) = (vec![0.0; n], vec![0.0; m]);
    let (mut best_score, mut best_res) = (f64::INFINITY, (f64::INFINITY, f64::INFINITY));

    for k in 0..opts.max_iters {
        iters = k + 1;
        // Proximal steps.
        for i in 0..n {
            xh[i] = x[i] - xt[i] - c[i] / RHO;
        }
        for i in 0..m {
            yh[i] = y[i] - yt[i];
        }
        project_product(cones, &mut yh);

        // Projection onto y = Ax + b.
        x_old.copy_from_slice(&x);
        y_old.copy_from_slice(&y);
        for i in 0..m {
            tmp_m[i] = yh[i] + yt[i] - b[i];
        }
        op.adjoint(&tmp_m, &mut rhs);
        for i in 0..n {
            rhs[i] += xh[i] + xt[i];
        }
        cg_total += cg.solve(op, &rhs, &mut x);
        op.forward(&x, &mut y);
        for i in 0..m {
            y[i] += b[i];
        }

        // Dual updates.
        for i in 0..n {
            xt[i] += xh[i] - x[i];
        }
        for i in 0..m {
            yt[i] += yh[i] - y[i];
        }

        op.forward(&xh, &mut axh);
        pri = axh
            .iter()
            .zip(b)
            .zip(&yh)
            .map(|((a, b), y)| (a + b - y) * (a + b - y))
            .sum::<f64>()
            .sqrt();
        dua = dual_residual((&x, &y), (&x_old, &y_old));
        let objective = dot(c, &xh) + cp.d;
        history.push(IterRecord {
            iter: k,
            primal: pri,
            dual: dua,
            objective,
        });

        let tol_pri = opts.eps_abs + opts.eps_rel * norm2(&axh).max(norm2(&yh)).max(norm_b);
        let dual_scale = RHO * (dot(&xt, &xt) + dot(&yt, &yt)).sqrt();
        let tol_dua = opts.eps_abs + opts.eps_rel * dual_scale.max(norm_c);
        if pri <= tol_pri && dua <= tol_dua {
            status = Status::Solved;
            break;
        }
        let score = (pri / tol_pri).max(dua / tol_dua);
        if score < best_score {
            best_score = score;
            best_res = (pri, dua);
            best_x.copy_from_slice(&xh);
            best_y.copy_from_slice(&yh);
        }
    }

    // Without convergence, report the iterate closest to the tolerances.
    let (x, y) = match status {
        Status::Solved => (xh, yh),
        Status::MaxIters => {
            (pri, dua) = best_res;
            (best_x, best_y)
        }
    };
    Ok(Solution {
        objective: dot(c, &x) + cp.d,
        x,
        y,
        status,
        primal_residual: pri,
        dual_residual: dua,
        iterations: iters,
        cg_iterations: cg_total,
        history,
    })
}
