//! Weighted least-squares state estimation.
//!
//! A single damped Gauss-Newton iteration serves both the observable
//! problem (`wls`, more measurements than free variables) and the
//! underdetermined real-time problem (`un`). Steps are computed from the
//! SVD of the weighted Jacobian with Levenberg damping
//!
//! ```text
//! dx = V diag(s_i / (s_i^2 + lambda)) U^T r_w
//! ```
//!
//! which always lies in the row space of the Jacobian. In the
//! underdetermined case every step is therefore the least-norm correction,
//! and the iterate starting from the flat profile is a deterministic
//! particular solution of `z_a = h_a(x)`.
//!
//! Observable solves additionally double accepted steps while the objective
//! keeps falling, and switch to a Newton model on the full Hessian once
//! Gauss-Newton progress stalls. Newton trial steps get a chord correction
//! against the trial residual. A rejected Newton step drops back to
//! Gauss-Newton.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::grid::AdmittanceMatrix;
use crate::measurement::{eval_h, eval_jacobian, MeasurementPlan, StateVector};

/// Objective below which an underdetermined solve counts as exact.
pub const EXACT_FIT_OBJECTIVE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop when the weighted gradient's max-norm drops below this.
    pub grad_tol: f64,
    /// Stop when the undamped step's max-norm drops below this.
    pub step_tol: f64,
    /// A solve that can no longer decrease the objective counts as
    /// converged when its undamped step is below this.
    pub stall_step_tol: f64,
    pub max_iter: usize,
    pub lambda0: f64,
    pub lambda_factor: f64,
    pub lambda_min: f64,
    /// Damping above which the solve is declared stalled.
    pub lambda_max: f64,
    /// Singular values below `rcond * s_max` are discarded.
    pub rcond: f64,
    /// Observable solves switch to the full Hessian, including measurement
    /// curvature weighted by residuals, once an accepted step lowers the
    /// objective by less than `newton_switch` relative while the step
    /// length shrinks by less than half.
    pub second_order: bool,
    pub newton_switch: f64,
    /// Observable solves try doubling an accepted step up to this many
    /// times while the objective keeps falling.
    pub max_extrapolation: usize,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grad_tol: 1e-8,
            step_tol: 1e-10,
            stall_step_tol: 1e-6,
            max_iter: 500,
            lambda0: 1e-3,
            lambda_factor: 10.0,
            lambda_min: 1e-12,
            lambda_max: 1e16,
            rcond: 1e-10,
            second_order: true,
            newton_switch: 1e-3,
            max_extrapolation: 6,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub lambda: f64,
    pub step_norm: f64,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iteration,objective,lambda,step_norm\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e}",
            r.iteration, r.objective, r.lambda, r.step_norm
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct WlsProblem<'a> {
    pub plan: &'a MeasurementPlan,
    pub adm: &'a AdmittanceMatrix,
    pub z: DVector<f64>,
    /// Diagonal of `W`, usually `sigma^-2`.
    pub weights: DVector<f64>,
    pub init: StateVector,
}

impl WlsProblem<'_> {
    fn validate(&self) -> Result<()> {
        if self.z.len() != self.plan.m() {
            return Err(Error::Shape {
                expected: self.plan.m(),
                got: self.z.len(),
            });
        }
        if self.weights.len() != self.plan.m() {
            return Err(Error::Shape {
                expected: self.plan.m(),
                got: self.weights.len(),
            });
        }
        if let Some(w) = self.weights.iter().find(|w| !w.is_finite() || **w <= 0.0) {
            return Err(Error::Config(format!(
                "weights must be positive and finite, got {w}"
            )));
        }
        if self.init.n_buses() != self.adm.n_buses() {
            return Err(Error::Shape {
                expected: self.adm.n_buses(),
                got: self.init.n_buses(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x_hat: StateVector,
    /// Final weighted sum of squared residuals.
    pub objective: f64,
    /// Accepted steps.
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the last computed step.
    pub step_norm: f64,
    pub grad_norm: f64,
    pub trace: Vec<TraceRow>,
}

/// Observable weighted least squares. Fails with an observability error
/// when the weighted Jacobian at the initial point is rank deficient.
pub fn wls(problem: &WlsProblem<'_>, opts: &SolverOptions) -> Result<SolveReport> {
    problem.validate()?;
    let n_free = problem.init.n_free();
    if problem.plan.m() < n_free {
        return Err(Error::Observability(format!(
            "{} measurements for {n_free} state variables",
            problem.plan.m()
        )));
    }
    solve(problem, opts, true)
}

/// Underdetermined weighted least squares on the real-time measurements.
/// The returned state reproduces `z_a` whenever `objective` is below
/// [`EXACT_FIT_OBJECTIVE`].
pub fn un(
    z_a: &DVector<f64>,
    plan_a: &MeasurementPlan,
    weights_a: &DVector<f64>,
    init: &StateVector,
    adm: &AdmittanceMatrix,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let problem = WlsProblem {
        plan: plan_a,
        adm,
        z: z_a.clone(),
        weights: weights_a.clone(),
        init: init.clone(),
    };
    problem.validate()?;
    solve(&problem, opts, false)
}

/// Pseudo-measurements for the delayed rows, evaluated at an `un` solution.
pub fn pseudo_from_un(
    x_tilde: &StateVector,
    delayed: &MeasurementPlan,
    adm: &AdmittanceMatrix,
) -> DVector<f64> {
    eval_h(x_tilde, delayed, adm)
}

/// Damped step from a precomputed SVD of the weighted Jacobian.
fn filtered_step(
    svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rw: &DVector<f64>,
    lambda: f64,
    rcond: f64,
) -> DVector<f64> {
    let u = svd.u.as_ref().expect("U computed");
    let v_t = svd.v_t.as_ref().expect("V^T computed");
    let s_max = svd.singular_values.max();
    let mut c = u.tr_mul(rw);
    for (ci, &s) in c.iter_mut().zip(svd.singular_values.iter()) {
        *ci = if s > rcond * s_max && s > 0.0 {
            *ci * s / (s * s + lambda)
        } else {
            0.0
        };
    }
    v_t.tr_mul(&c)
}

/// Levenberg step `dx` for weighted Jacobian `jw` and weighted residual
/// `rw`. With `lambda = 0` this is the truncated pseudo-inverse solution.
pub fn lm_step(jw: &DMatrix<f64>, rw: &DVector<f64>, lambda: f64, rcond: f64) -> DVector<f64> {
    let svd = SVD::new(jw.clone(), true, true);
    filtered_step(&svd, rw, lambda, rcond)
}

fn weighted_residual(
    problem: &WlsProblem<'_>,
    x: &StateVector,
    w_sqrt: &DVector<f64>,
) -> DVector<f64> {
    (&problem.z - eval_h(x, problem.plan, problem.adm)).component_mul(w_sqrt)
}

fn weighted_jacobian(
    problem: &WlsProblem<'_>,
    x: &StateVector,
    w_sqrt: &DVector<f64>,
) -> DMatrix<f64> {
    let mut jw = eval_jacobian(x, problem.plan, problem.adm);
    for (mut row, w) in jw.row_iter_mut().zip(w_sqrt.iter()) {
        row *= *w;
    }
    jw
}

/// `sum_i rw_i * Hess(sqrt(w_i) h_i)` by forward differences of the
/// analytic Jacobian.
fn residual_curvature(
    problem: &WlsProblem<'_>,
    x: &StateVector,
    w_sqrt: &DVector<f64>,
    rw: &DVector<f64>,
    jw: &DMatrix<f64>,
) -> DMatrix<f64> {
    const EPS: f64 = 1e-7;
    let base = jw.tr_mul(rw);
    let free = x.to_free();
    let (n, slack) = (x.n_buses(), x.slack());
    let mut s = DMatrix::zeros(free.len(), free.len());
    for c in 0..free.len() {
        let mut shifted = free.clone();
        shifted[c] += EPS;
        let xs = StateVector::from_free(&shifted, n, slack);
        let col = (weighted_jacobian(problem, &xs, w_sqrt).tr_mul(rw) - &base) / EPS;
        s.set_column(c, &col);
    }
    (&s + s.transpose()) * 0.5
}

enum StepModel {
    /// Damped pseudo-inverse from the SVD of the weighted Jacobian.
    Filtered(SVD<f64, nalgebra::Dyn, nalgebra::Dyn>),
    /// Damped Newton on the full Hessian with eigenvalues replaced by their
    /// magnitudes, so every step is a descent direction.
    Newton {
        eigen: SymmetricEigen<f64, nalgebra::Dyn>,
        grad: DVector<f64>,
        chord: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    },
}

impl StepModel {
    fn chord(&self) -> &SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
        match self {
            StepModel::Filtered(svd) => svd,
            StepModel::Newton { chord, .. } => chord,
        }
    }

    fn step(&self, rw: &DVector<f64>, lambda: f64, rcond: f64) -> DVector<f64> {
        match self {
            StepModel::Filtered(svd) => filtered_step(svd, rw, lambda, rcond),
            StepModel::Newton { eigen, grad, .. } => {
                let scale = eigen.eigenvalues.amax();
                let mut c = eigen.eigenvectors.tr_mul(grad);
                for (ci, &mu) in c.iter_mut().zip(eigen.eigenvalues.iter()) {
                    let m = mu.abs();
                    *ci = if m > rcond * scale || lambda > 0.0 {
                        *ci / (m + lambda)
                    } else {
                        0.0
                    };
                }
                &eigen.eigenvectors * c
            }
        }
    }
}

fn solve(
    problem: &WlsProblem<'_>,
    opts: &SolverOptions,
    require_full_rank: bool,
) -> Result<SolveReport> {
    let w_sqrt = problem.weights.map(f64::sqrt);
    let mut x = problem.init.clone();
    let mut rw = weighted_residual(problem, &x, &w_sqrt);
    let mut objective = rw.norm_squared();
    let mut lambda = opts.lambda0;
    let mut iterations = 0;
    let mut step_norm = f64::INFINITY;
    let mut grad_norm;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut newton = false;
    let extrapolate = require_full_rank && opts.max_extrapolation > 0;

    loop {
        let jw = weighted_jacobian(problem, &x, &w_sqrt);
        let grad = jw.tr_mul(&rw);
        grad_norm = grad.amax();

        if require_full_rank && iterations == 0 {
            let s = jw.singular_values();
            let s_max = s.max();
            let rank = s.iter().filter(|&&v| v > opts.rcond * s_max).count();
            if rank < x.n_free() {
                return Err(Error::Observability(format!(
                    "weighted Jacobian has rank {rank}, need {}",
                    x.n_free()
                )));
            }
        }

        if grad_norm <= opts.grad_tol {
            converged = true;
            break;
        }
        let model = if newton {
            let curvature = residual_curvature(problem, &x, &w_sqrt, &rw, &jw);
            StepModel::Newton {
                eigen: SymmetricEigen::new(jw.tr_mul(&jw) - curvature),
                grad,
                chord: SVD::new(jw, true, true),
            }
        } else {
            StepModel::Filtered(SVD::new(jw, true, true))
        };
        let full_norm = model.step(&rw, 0.0, opts.rcond).amax();
        if full_norm <= opts.step_tol {
            step_norm = full_norm;
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        // inner damping loop: grow lambda until the objective decreases
        let mut rejected = false;
        let accepted = loop {
            let mut dx = model.step(&rw, lambda, opts.rcond);
            let mut trial = x.step(&dx);
            let mut trial_rw = weighted_residual(problem, &trial, &w_sqrt);
            let mut trial_obj = trial_rw.norm_squared();
            if newton {
                let fix = filtered_step(model.chord(), &trial_rw, 0.0, opts.rcond);
                let dx2 = &dx + fix;
                let t2 = x.step(&dx2);
                let r2 = weighted_residual(problem, &t2, &w_sqrt);
                let o2 = r2.norm_squared();
                if o2.is_finite() && (trial_obj.is_nan() || o2 < trial_obj) {
                    (dx, trial, trial_rw, trial_obj) = (dx2, t2, r2, o2);
                }
            }
            if trial_obj.is_finite() && trial_obj < objective {
                let (mut dx, mut trial, mut trial_rw, mut trial_obj) =
                    (dx, trial, trial_rw, trial_obj);
                if extrapolate {
                    for _ in 0..opts.max_extrapolation {
                        let longer = &dx * 2.0;
                        let cand = x.step(&longer);
                        let cand_rw = weighted_residual(problem, &cand, &w_sqrt);
                        let cand_obj = cand_rw.norm_squared();
                        if !(cand_obj.is_finite() && cand_obj < trial_obj) {
                            break;
                        }
                        (dx, trial, trial_rw, trial_obj) = (longer, cand, cand_rw, cand_obj);
                    }
                }
                let new_norm = dx.amax();
                newton = if newton {
                    !rejected
                } else {
                    require_full_rank
                        && opts.second_order
                        && objective - trial_obj <= opts.newton_switch * objective
                        && new_norm > 0.5 * step_norm.min(f64::MAX)
                };
                step_norm = new_norm;
                x = trial;
                rw = trial_rw;
                objective = trial_obj;
                lambda = (lambda / opts.lambda_factor).max(opts.lambda_min);
                break true;
            }
            rejected = true;
            lambda *= opts.lambda_factor;
            if lambda > opts.lambda_max {
                break false;
            }
        };
        if !accepted {
            converged = full_norm <= opts.stall_step_tol;
            step_norm = full_norm;
            if !converged {
                log::debug!("solve stalled at objective {objective:e} after {iterations} steps");
            }
            break;
        }
        iterations += 1;
        if opts.trace {
            trace.push(TraceRow {
                iteration: iterations,
                objective,
                lambda,
                step_norm,
            });
        }
    }

    Ok(SolveReport {
        x_hat: x,
        objective,
        iterations,
        converged,
        step_norm,
        grad_norm,
        trace,
    })
}
