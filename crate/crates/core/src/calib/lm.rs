//! Dense Levenberg–Marquardt for small problems.
//!
//! Damped normal equations `(JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr`, λ starting at
//! `1e-3`, multiplied by 10 on a rejected step and divided by 10 on an
//! accepted one.

use nalgebra::{DMatrix, DVector};

pub const LAMBDA_INIT: f64 = 1e-3;
pub const LAMBDA_UP: f64 = 10.0;
pub const LAMBDA_DOWN: f64 = 10.0;
const LAMBDA_MAX: f64 = 1e16;

/// Stopping thresholds.
#[derive(Debug, Clone, Copy)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the objective by less than this fraction.
    pub rel_decrease: f64,
    /// Stop when `‖Jᵀr‖₂` falls below this.
    pub gradient_norm: f64,
    /// Relative step for forward differences.
    pub fd_step: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_decrease: 1e-10,
            gradient_norm: 1e-8,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Sum of squared residuals.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

/// Forward-difference Jacobian with step `h·max(|x_k|, 1)`.
pub fn forward_jacobian<F>(f: &F, x: &DVector<f64>, r0: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.clone();
    for k in 0..x.len() {
        let step = h * x[k].abs().max(1.0);
        xp[k] = x[k] + step;
        let actual = xp[k] - x[k];
        let rk = f(&xp);
        jac.column_mut(k).copy_from(&((rk - r0) / actual));
        xp[k] = x[k];
    }
    jac
}

/// Minimizes `‖f(x)‖²` from `x0`. `jacobian` returns `∂f/∂x`; pass `None`
/// to use forward differences.
pub fn minimize<F, J>(
    f: F,
    jacobian: Option<J>,
    x0: DVector<f64>,
    settings: &LmSettings,
) -> LmOutcome
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let mut x = x0;
    let mut r = f(&x);
    let mut obj = r.norm_squared();
    let mut lambda = LAMBDA_INIT;
    let mut history = vec![obj];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        iterations += 1;
        let jac = match &jacobian {
            Some(jf) => jf(&x),
            None => forward_jacobian(&f, &x, &r, settings.fd_step),
        };
        let grad = jac.transpose() * &r;
        if grad.norm() < settings.gradient_norm || obj == 0.0 {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = jtj.clone();
            for k in 0..damped.nrows() {
                let d = jtj[(k, k)];
                damped[(k, k)] += lambda * if d > 0.0 { d } else { 1.0 };
            }
            let step = damped.cholesky().map(|c| c.solve(&(-&grad)));
            if let Some(delta) = step {
                let x_new = &x + &delta;
                let r_new = f(&x_new);
                let obj_new = r_new.norm_squared();
                if obj_new.is_finite() && obj_new < obj {
                    let rel = (obj - obj_new) / obj;
                    x = x_new;
                    r = r_new;
                    obj = obj_new;
                    history.push(obj);
                    lambda = (lambda / LAMBDA_DOWN).max(1e-15);
                    accepted = true;
                    if rel < settings.rel_decrease {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= LAMBDA_UP;
        }
        if !accepted {
            // No damping level lowers the objective: numerically stationary.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    LmOutcome {
        params: x,
        residuals: r,
        objective: obj,
        iterations,
        converged,
        history,
    }
}
