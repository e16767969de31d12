//! Matrix-free inner solvers shared by the optimizers: conjugate gradient for
//! symmetric positive-definite systems and Armijo backtracking line search.

use crate::error::SolverError;
use crate::linalg::{all_finite, axpy, dot, norm2};

/// Conjugate-gradient controls. `rel_tol` is relative to ‖b‖.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            max_iters: 10,
            rel_tol: 1e-10,
        }
    }
}

/// Backtracking (Armijo) line-search controls: try `init_step·shrink^k` for
/// k = 0..=max_backtracks and accept the first step with sufficient decrease
/// f(w+αp) ≤ f(w) + c·α·⟨g,p⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    pub init_step: f64,
    pub c: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            init_step: 1.0,
            c: 1e-4,
            shrink: 0.5,
            max_backtracks: 50,
        }
    }
}

/// Solve A x = b from x₀ = 0, where `apply_a` computes A·v for an SPD
/// operator A. Stops after `max_iters` iterations, on an exactly zero
/// residual, or once ‖r‖ ≤ rel_tol·‖b‖. A direction of nonpositive curvature
/// (⟨p, Ap⟩ ≤ 0) aborts with `CgBreakdown`; any non-finite intermediate
/// aborts with `NonFinite`.
///
/// Evaluation cost is whatever `apply_a` charges; this routine adds nothing.
pub fn cg_solve(
    mut apply_a: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    cfg: &CgConfig,
) -> Result<Vec<f64>, SolverError> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut p = r.clone();
    let mut rs_old = dot(&r, &r);
    for _ in 0..cfg.max_iters {
        let ap = apply_a(&p);
        assert_eq!(ap.len(), n, "operator changed dimension");
        if !all_finite(&ap) {
            return Err(SolverError::NonFinite {
                context: "conjugate gradient operator output",
            });
        }
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolverError::CgBreakdown { pap });
        }
        let alpha = rs_old / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rs_new = dot(&r, &r);
        if !rs_new.is_finite() {
            return Err(SolverError::NonFinite {
                context: "conjugate gradient residual",
            });
        }
        if rs_new.sqrt() <= cfg.rel_tol * b_norm {
            break;
        }
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    Ok(x)
}

/// Armijo backtracking along `p` from `w`, with `g` the gradient at `w` and
/// `f` a value oracle (monitoring evaluations — never charged). Returns the
/// accepted step length.
///
/// Errors: `NotDescent` if ⟨g,p⟩ ≥ 0 (which includes p = 0), and
/// `LineSearchFailed` if no trial step satisfies sufficient decrease.
pub fn backtracking_line_search(
    mut f: impl FnMut(&[f64]) -> f64,
    w: &[f64],
    p: &[f64],
    g: &[f64],
    cfg: &LineSearchConfig,
) -> Result<f64, SolverError> {
    let slope = dot(g, p);
    if slope.is_nan() || slope >= 0.0 {
        return Err(SolverError::NotDescent { slope });
    }
    let f0 = f(w);
    let mut alpha = cfg.init_step;
    let mut trial = vec![0.0; w.len()];
    for k in 0..=cfg.max_backtracks {
        for i in 0..w.len() {
            trial[i] = w[i] + alpha * p[i];
        }
        let ft = f(&trial);
        if ft <= f0 + cfg.c * alpha * slope {
            return Ok(alpha);
        }
        if k < cfg.max_backtracks {
            alpha *= cfg.shrink;
        }
    }
    Err(SolverError::LineSearchFailed {
        backtracks: cfg.max_backtracks,
        alpha,
    })
}
