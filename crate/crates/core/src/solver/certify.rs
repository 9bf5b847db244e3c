use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{objective_unchecked, second_order_matrix, stationarity_residual, Instance};

/// Default tolerance for the first- and second-order checks.
pub const DEFAULT_CERTIFY_TOL: f64 = 1e-8;

/// Coordinate perturbation sizes used by the strict-improvement probe.
pub const PROBE_STEPS: [f64; 2] = [1e-3, 1e-4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeHit {
    pub index: usize,
    pub step: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub first_order_norm: f64,
    pub second_order_min_eig: Option<f64>,
    pub is_zero_vector: bool,
    pub strict_improvement_found: bool,
    pub improvement: Option<ProbeHit>,
    /// All three checks passed (the zero vector always passes).
    pub certified: bool,
    pub tol: f64,
}

/// Checks `x` against the first- and second-order necessary conditions on
/// its support and probes `f` at `x ± δ e_i` for `i` in the support.
///
/// Probes that would move a coordinate onto or across zero are skipped, so
/// the probe stays on the support.
pub fn certify(inst: &Instance, x: &[f64], tol: f64) -> Result<Certification> {
    if inst.q != 2.0 || inst.epsilon != 0.0 || inst.p == 0.0 {
        return Err(Error::Unsupported(
            "certification requires q = 2, epsilon = 0 and p > 0".into(),
        ));
    }
    let first = stationarity_residual(inst, x)?;
    if first.zero_vector {
        return Ok(Certification {
            first_order_norm: 0.0,
            second_order_min_eig: None,
            is_zero_vector: true,
            strict_improvement_found: false,
            improvement: None,
            certified: true,
            tol,
        });
    }
    let second = second_order_matrix(inst, x)?;
    let f0 = objective_unchecked(inst, x);
    let slack = 4.0 * f64::EPSILON * (1.0 + f0.abs());
    let mut hit: Option<ProbeHit> = None;
    let mut probe = x.to_vec();
    'outer: for &i in &first.support {
        for &step in &PROBE_STEPS {
            if step >= x[i].abs() {
                continue;
            }
            for dir in [-1.0, 1.0] {
                probe[i] = x[i] + dir * step;
                let f = objective_unchecked(inst, &probe);
                probe[i] = x[i];
                if f < f0 - slack {
                    hit = Some(ProbeHit {
                        index: i,
                        step: dir * step,
                        objective: f,
                    });
                    break 'outer;
                }
            }
        }
    }
    let strict = hit.is_some();
    let certified = first.norm <= tol && second.min_eigenvalue >= -tol && !strict;
    Ok(Certification {
        first_order_norm: first.norm,
        second_order_min_eig: Some(second.min_eigenvalue),
        is_zero_vector: false,
        strict_improvement_found: strict,
        improvement: hit,
        certified,
        tol,
    })
}
