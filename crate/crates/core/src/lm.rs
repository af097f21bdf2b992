//! Levenberg–Marquardt for small nonlinear least-squares problems.
//!
//! Parameters live in a vector space (algebra coordinates); problems that
//! optimise over a group supply a retraction inside their residual function.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    /// Budget of trial steps (accepted plus rejected).
    pub max_iters: usize,
    /// Stop when `‖Jᵀr‖∞` falls below this.
    pub grad_tol: f64,
    pub damping_init: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Stop when `‖δ‖ ≤ step_tol·(1 + ‖x‖)`.
    pub step_tol: f64,
    /// Stop when an accepted step reduces the cost by less than `cost_tol·cost`.
    pub cost_tol: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            grad_tol: 1e-10,
            damping_init: 1e-3,
            damping_up: 10.0,
            damping_down: 10.0,
            step_tol: 1e-14,
            cost_tol: 1e-7,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("lm: max_iters must be positive"));
        }
        if !(self.grad_tol >= 0.0 && self.damping_init > 0.0 && self.damping_up > 1.0 && self.damping_down > 1.0) {
            return Err(invalid("lm: tolerances must be non-negative and damping factors > 1"));
        }
        Ok(())
    }
}

/// Cost is `‖residuals‖²`.
pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>>;
    /// Jacobian at `params`, given the residuals already computed there.
    fn jacobian(&self, params: &[f64], residuals: &[f64]) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub cost: f64,
    pub initial_cost: f64,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimise `‖r(x)‖²` from `x0`. Returns the best iterate even when the
/// budget runs out (`converged = false`).
pub fn levenberg_marquardt<P: LeastSquaresProblem + ?Sized>(problem: &P, x0: &[f64], cfg: &LmConfig) -> Result<LmOutcome> {
    cfg.validate()?;
    let n = problem.n_params();
    if x0.len() != n {
        return Err(invalid(alloc::format!("lm: expected {n} parameters, got {}", x0.len())));
    }
    let mut x = x0.to_vec();
    let mut r = problem.residuals(&x)?;
    let mut cost = sq_norm(&r);
    let initial_cost = cost;
    let mut history = alloc::vec![cost];
    let mut lambda = cfg.damping_init;
    let mut iterations = 0;
    let mut converged = n == 0 || cost == 0.0;

    'outer: while !converged && iterations < cfg.max_iters {
        let j = problem.jacobian(&x, &r)?;
        let rv = DVector::from_column_slice(&r);
        let g = j.tr_mul(&rv);
        if g.amax() <= cfg.grad_tol {
            converged = true;
            break;
        }
        let a = j.tr_mul(&j);
        let dmax = a.diagonal().max();
        let floor = (1e-12 * dmax).max(f64::MIN_POSITIVE);
        loop {
            if iterations >= cfg.max_iters {
                break 'outer;
            }
            iterations += 1;
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * a[(i, i)].max(floor);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= cfg.damping_up;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if delta.norm() <= cfg.step_tol * (1.0 + xnorm) {
                converged = true;
                break 'outer;
            }
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let trial_cost = match problem.residuals(&trial) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) => Some((sq_norm(&rt), rt)),
                _ => None,
            };
            match trial_cost {
                Some((c, rt)) if c < cost => {
                    let small = cost - c <= cfg.cost_tol * cost;
                    x = trial;
                    r = rt;
                    cost = c;
                    history.push(c);
                    lambda = (lambda / cfg.damping_down).max(1e-15);
                    if small || cost == 0.0 {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    lambda *= cfg.damping_up;
                    if lambda > 1e16 {
                        // No descent direction left at double precision.
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    Ok(LmOutcome {
        params: x,
        cost,
        initial_cost,
        cost_history: history,
        iterations,
        converged,
    })
}
