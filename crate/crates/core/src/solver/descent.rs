//! Inner iterations shared by the support solver and the local solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{data_gradient, Instance};
use crate::numeric::sum;
use crate::scalar::prox;

/// Stopping rule for cyclic coordinate descent.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stopping {
    /// Stop once a full sweep moves `x` by less than this (Euclidean).
    pub step_tol: f64,
    /// Stop once a sweep lowers the objective by less than this.
    pub decrease_tol: Option<f64>,
    pub max_sweeps: usize,
    /// Abort with [`Error::Divergence`] if the objective ever increases.
    pub guard: bool,
}

pub(crate) struct CdOutcome {
    /// Objective after each sweep, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Objective `‖r‖² + λ·penalty` with the residual already formed.
fn objective_from_residual(r: &DVector<f64>, x: &[f64], lambda: f64, p: f64, epsilon: f64) -> f64 {
    sum(r.iter().map(|v| v * v)) + lambda * crate::model::penalty(x, p, epsilon)
}

/// Cyclic exact coordinate minimisation of `‖Ax - b‖² + λ Σ (|x_i| + ε)^p`
/// over the coordinates in `coords`; `r` holds `b - Ax` and is kept current.
/// Each coordinate step is the global minimiser of the one-dimensional
/// restriction, so the objective never increases beyond rounding.
pub(crate) fn coordinate_descent(
    inst: &Instance,
    col_sq: &[f64],
    coords: &[usize],
    x: &mut [f64],
    r: &mut DVector<f64>,
    epsilon: f64,
    stop: Stopping,
) -> Result<CdOutcome> {
    let (p, lambda) = (inst.p, inst.lambda);
    let mut f = objective_from_residual(r, x, lambda, p, epsilon);
    let mut trace = vec![f];
    let mut sweeps = 0;
    while sweeps < stop.max_sweeps {
        sweeps += 1;
        let mut step_sq = 0.0;
        for &i in coords {
            let nsq = col_sq[i];
            let col = inst.a.column(i);
            let old = x[i];
            let new = if nsq == 0.0 {
                0.0
            } else {
                let t = old + col.dot(r) / nsq;
                prox(t, lambda / nsq, p, epsilon)
            };
            if new != old {
                r.axpy(old - new, &col, 1.0);
                x[i] = new;
                step_sq += (new - old) * (new - old);
            }
        }
        // Refresh the residual to keep accumulated drift out of the objective.
        *r = &inst.b - &inst.a * DVector::from_column_slice(x);
        let next = objective_from_residual(r, x, lambda, p, epsilon);
        trace.push(next);
        if stop.guard && next > f + 1e-12 * (1.0 + f.abs()) {
            return Err(Error::Divergence {
                before: f,
                after: next,
            });
        }
        let decrease = f - next;
        f = next;
        if step_sq.sqrt() < stop.step_tol {
            break;
        }
        if let Some(tol) = stop.decrease_tol {
            if decrease < tol && sweeps > 1 {
                break;
            }
        }
    }
    Ok(CdOutcome { trace })
}

/// Newton iterations on a fixed support and sign pattern for `q = 2`,
/// `ε = 0`, `p > 0`. Only steps that keep every sign and do not increase the
/// objective are taken; stops when the Hessian is not positive definite.
pub(crate) fn newton_polish(inst: &Instance, x: &mut [f64]) {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    if support.is_empty() {
        return;
    }
    let (p, lambda) = (inst.p, inst.lambda);
    let b_t: DMatrix<f64> = inst.a.select_columns(support.iter());
    let gram = b_t.tr_mul(&b_t) * 2.0;
    let f_of = |xs: &[f64]| -> f64 {
        let xt = DVector::from_column_slice(xs);
        let r = &b_t * xt - &inst.b;
        sum(r.iter().map(|v| v * v)) + lambda * sum(xs.iter().map(|v| v.abs().powf(p)))
    };
    let grad_of = |xs: &[f64]| -> DVector<f64> {
        let xt = DVector::from_column_slice(xs);
        let r = &b_t * &xt - &inst.b;
        let mut g = b_t.tr_mul(&r) * 2.0;
        for (k, v) in xs.iter().enumerate() {
            g[k] += lambda * p * v.signum() * v.abs().powf(p - 1.0);
        }
        g
    };
    let mut xs: Vec<f64> = support.iter().map(|&i| x[i]).collect();
    let mut f = f_of(&xs);
    let mut g = grad_of(&xs);
    for _ in 0..50 {
        let gnorm = g.norm();
        if gnorm == 0.0 {
            break;
        }
        let mut h = gram.clone();
        for (k, v) in xs.iter().enumerate() {
            h[(k, k)] += lambda * p * (p - 1.0) * v.abs().powf(p - 2.0);
        }
        let Some(chol) = h.cholesky() else { break };
        let d = chol.solve(&(-&g));
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-12 {
            let trial: Vec<f64> = xs.iter().zip(d.iter()).map(|(v, dv)| v + step * dv).collect();
            if trial.iter().zip(&xs).all(|(t, v)| t.signum() == v.signum() && *t != 0.0) {
                let ft = f_of(&trial);
                let gt = grad_of(&trial);
                if ft < f || (ft <= f && gt.norm() < gnorm) {
                    xs = trial;
                    f = ft;
                    g = gt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    for (k, &i) in support.iter().enumerate() {
        x[i] = xs[k];
    }
}

/// Monotone gradient descent with Armijo backtracking on the support of `x`
/// for data terms other than `q = 2`. A coordinate that would change sign is
/// clamped to zero and leaves the support. For `q = 1` the residual is
/// smoothed as `(r² + δ²)^{1/2}`.
pub(crate) fn support_descent(inst: &Instance, x: &mut [f64], smoothing: f64, max_iter: usize) -> f64 {
    let (p, q, lambda) = (inst.p, inst.q, inst.lambda);
    let surrogate = |xs: &[f64]| -> f64 {
        let r = inst.residual(xs);
        let data = if smoothing > 0.0 {
            sum(r.iter().map(|v| (v * v + smoothing * smoothing).powf(q / 2.0)))
        } else {
            inst.data_term(&r)
        };
        data + lambda * crate::model::penalty(xs, p, 0.0)
    };
    let gradient = |xs: &[f64]| -> DVector<f64> {
        let r = inst.residual(xs);
        let mut g = if smoothing > 0.0 {
            let w = r.map(|v| q * v * (v * v + smoothing * smoothing).powf(q / 2.0 - 1.0));
            inst.a.tr_mul(&w)
        } else {
            data_gradient(inst, &r)
        };
        for (i, v) in xs.iter().enumerate() {
            if *v == 0.0 {
                g[i] = 0.0;
            } else if p > 0.0 {
                g[i] += lambda * p * v.signum() * v.abs().powf(p - 1.0);
            }
        }
        g
    };
    let mut f = surrogate(x);
    let mut step = 1.0;
    for _ in 0..max_iter {
        let g = gradient(x);
        let gsq = g.norm_squared();
        if gsq == 0.0 {
            break;
        }
        let mut accepted = None;
        let mut s = step;
        while s > 1e-16 {
            let trial: Vec<f64> = x
                .iter()
                .zip(g.iter())
                .map(|(v, gv)| {
                    if *v == 0.0 {
                        0.0
                    } else {
                        let t = v - s * gv;
                        if t.signum() != v.signum() {
                            0.0
                        } else {
                            t
                        }
                    }
                })
                .collect();
            let ft = surrogate(&trial);
            if ft <= f - 1e-4 * s * gsq || (ft < f && trial.iter().zip(x.iter()).any(|(t, v)| *t == 0.0 && *v != 0.0)) {
                accepted = Some((trial, ft, s));
                break;
            }
            s *= 0.5;
        }
        let Some((trial, ft, s)) = accepted else { break };
        let decrease = f - ft;
        x.copy_from_slice(&trial);
        f = ft;
        step = (2.0 * s).min(1e6);
        if decrease < 1e-13 {
            break;
        }
    }
    f
}
