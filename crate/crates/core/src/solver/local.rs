use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::descent::{coordinate_descent, newton_polish, Stopping};
use super::{certification_available, certify, Method, SolveResult, WARMUP_SWEEPS};
use crate::bounds;
use crate::error::{Error, Result};
use crate::model::{Candidate, Instance};
use crate::numeric::spectral_norm;

#[derive(Clone, Debug)]
pub struct LocalOptions {
    /// Smoothing levels visited before the final stage at the instance's own ε.
    pub schedule: Vec<f64>,
    pub step_tol: f64,
    pub max_sweeps: usize,
    pub certify_tol: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions {
            schedule: Vec::new(),
            step_tol: 1e-12,
            max_sweeps: 100_000,
            certify_tol: super::DEFAULT_CERTIFY_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub epsilon: f64,
    pub objectives: Vec<f64>,
}

/// Proximal coordinate descent from `x0`.
///
/// Each smoothing level in the schedule is run to convergence on
/// `‖Ax-b‖² + λΣ(|x_i|+ε_t)^p`, then a final stage runs on the instance's own
/// objective. For unsmoothed instances the result is hard-thresholded at half
/// the local magnitude floor, re-polished on the surviving support and
/// certified. The zero vector is returned unchanged.
pub fn local_solve(inst: &Instance, x0: &[f64], opts: &LocalOptions) -> Result<SolveResult> {
    if inst.q != 2.0 {
        return Err(Error::Unsupported("local_solve requires q = 2".into()));
    }
    if inst.p == 0.0 {
        return Err(Error::Unsupported("local_solve requires p > 0".into()));
    }
    if x0.len() != inst.n() {
        return Err(Error::Dimension(format!(
            "x0 has length {}, instance has n = {}",
            x0.len(),
            inst.n()
        )));
    }
    if let Some(bad) = opts.schedule.iter().find(|e| !(**e >= inst.epsilon && e.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "smoothing level {bad} must be finite and >= the instance epsilon"
        )));
    }
    let certifiable = certification_available(inst);
    let start_certification = if certifiable && x0.iter().any(|v| *v != 0.0) {
        Some(certify(inst, x0, opts.certify_tol)?)
    } else {
        None
    };
    if x0.iter().all(|v| *v == 0.0) {
        let best = Candidate::zero(inst);
        let certification = if certifiable {
            Some(certify(inst, &best.x, opts.certify_tol)?)
        } else {
            None
        };
        return Ok(SolveResult {
            best,
            method: Method::Local,
            certification,
            heuristic: false,
            all_support_optima: None,
            stats: None,
            start_certification,
            trace: Some(Vec::new()),
        });
    }

    let col_sq = inst.column_sq_norms();
    let all: Vec<usize> = (0..inst.n()).collect();
    let stop = Stopping {
        step_tol: opts.step_tol,
        decrease_tol: None,
        max_sweeps: opts.max_sweeps,
        guard: true,
    };
    let mut x = x0.to_vec();
    let mut traces = Vec::new();
    for &eps in opts.schedule.iter().chain(std::iter::once(&inst.epsilon)) {
        let mut r = &inst.b - &inst.a * DVector::from_column_slice(&x);
        let mut objectives = Vec::new();
        if eps == 0.0 && certifiable {
            // A short run fixes the sign pattern; Newton then does the slow part.
            let warmup = Stopping {
                max_sweeps: stop.max_sweeps.min(WARMUP_SWEEPS),
                ..stop
            };
            objectives = coordinate_descent(inst, &col_sq, &all, &mut x, &mut r, eps, warmup)?.trace;
            newton_polish(inst, &mut x);
            r = &inst.b - &inst.a * DVector::from_column_slice(&x);
        }
        let out = coordinate_descent(inst, &col_sq, &all, &mut x, &mut r, eps, stop)?;
        objectives.extend(out.trace);
        traces.push(StageTrace {
            epsilon: eps,
            objectives,
        });
    }

    if certifiable {
        let floor = bounds::l_local(inst.lambda, inst.p, spectral_norm(&inst.a), inst.norm_b());
        for v in x.iter_mut() {
            if v.abs() < 0.5 * floor {
                *v = 0.0;
            }
        }
        let survivors: Vec<usize> = all.iter().copied().filter(|&i| x[i] != 0.0).collect();
        if !survivors.is_empty() {
            let mut r = &inst.b - &inst.a * DVector::from_column_slice(&x);
            let out = coordinate_descent(inst, &col_sq, &survivors, &mut x, &mut r, 0.0, stop)?;
            traces.push(StageTrace {
                epsilon: 0.0,
                objectives: out.trace,
            });
            newton_polish(inst, &mut x);
        }
    }
    let best = Candidate::new(inst, x)?;
    let certification = if certifiable {
        Some(certify(inst, &best.x, opts.certify_tol)?)
    } else {
        None
    };
    Ok(SolveResult {
        best,
        method: Method::Local,
        certification,
        heuristic: false,
        all_support_optima: None,
        stats: None,
        start_certification,
        trace: Some(traces),
    })
}
