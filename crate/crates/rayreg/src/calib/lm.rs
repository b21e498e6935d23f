//! Dense Levenberg-Marquardt with numeric Jacobians, for the small
//! refinement problems in this crate (camera parameters, rig poses).

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease of an accepted step falls below
    /// this.
    pub cost_tol: f64,
    pub lambda_init: f64,
    pub lambda_max: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 100,
            cost_tol: 1e-12,
            lambda_init: 1e-3,
            lambda_max: 1e12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmStatus {
    Converged,
    MaxIterations,
    /// Lambda hit its ceiling without an acceptable step.
    Diverged,
}

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub status: LmStatus,
}

/// Minimize ||r(x)||^2 starting from `initial`. `residual_fn` writes the
/// residual vector for the given parameters; `residual_len` is fixed.
///
/// Damping is scaled by the diagonal of J^T J; lambda shrinks by 10 on
/// accepted steps and grows by 10 on rejected ones. The cost never increases
/// across accepted iterations.
pub fn lm_solve<F>(
    mut residual_fn: F,
    initial: DVector<f64>,
    residual_len: usize,
    opts: &LmOptions,
) -> LmOutcome
where
    F: FnMut(&DVector<f64>, &mut DVector<f64>),
{
    let n = initial.len();
    let mut params = initial;
    let mut residuals = DVector::zeros(residual_len);
    residual_fn(&params, &mut residuals);
    let mut cost = residuals.norm_squared();
    let mut lambda = opts.lambda_init;

    let mut jacobian = DMatrix::<f64>::zeros(residual_len, n);
    let mut r_plus = DVector::zeros(residual_len);
    let mut r_minus = DVector::zeros(residual_len);

    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;

        for j in 0..n {
            let step = 1e-6 * (1.0 + params[j].abs());
            let saved = params[j];
            params[j] = saved + step;
            residual_fn(&params, &mut r_plus);
            params[j] = saved - step;
            residual_fn(&params, &mut r_minus);
            params[j] = saved;
            let inv = 1.0 / (2.0 * step);
            for i in 0..residual_len {
                jacobian[(i, j)] = (r_plus[i] - r_minus[i]) * inv;
            }
        }

        let jtj = jacobian.transpose() * &jacobian;
        let jtr = jacobian.transpose() * &residuals;

        // Track the best rejected cost: a plateau (no step decreases the
        // cost, none increases it materially) is convergence, not divergence.
        let mut best_rejected = f64::INFINITY;
        loop {
            let mut damped = jtj.clone();
            for d in 0..n {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let delta = damped.lu().solve(&(-&jtr));
            let trial_cost = match &delta {
                Some(d) => {
                    let trial = &params + d;
                    residual_fn(&trial, &mut r_plus);
                    let c = r_plus.norm_squared();
                    if c.is_finite() && c < cost {
                        let decrease = (cost - c) / cost.max(1e-300);
                        params = trial;
                        residuals.copy_from(&r_plus);
                        cost = c;
                        lambda = (lambda / 10.0).max(1e-12);
                        if decrease < opts.cost_tol {
                            return LmOutcome {
                                params,
                                cost,
                                iterations,
                                status: LmStatus::Converged,
                            };
                        }
                        break;
                    }
                    c
                }
                None => f64::INFINITY,
            };
            if trial_cost.is_finite() {
                best_rejected = best_rejected.min(trial_cost);
            }
            lambda *= 10.0;
            if lambda > opts.lambda_max {
                let status = if best_rejected <= cost * (1.0 + 1e-9) {
                    LmStatus::Converged
                } else {
                    LmStatus::Diverged
                };
                return LmOutcome {
                    params,
                    cost,
                    iterations,
                    status,
                };
            }
        }
    }

    LmOutcome {
        params,
        cost,
        iterations,
        status: LmStatus::MaxIterations,
    }
}
