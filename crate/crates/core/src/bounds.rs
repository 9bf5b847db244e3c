//! λ thresholds that control the support size of minimisers.
//!
//! With `α = max_i ‖a_i‖²`:
//!
//! ```text
//! β(k) = k^{p/2-1} (2α / (p(1-p)))^{p/2} ‖b‖^{2-p}     (global minimisers)
//! γ(k) = k^{p-1}   (2‖A‖ / p)^p          ‖b‖^{2-p}     (local minimisers with f ≤ ‖b‖²)
//! ```
//!
//! `λ ≥ β(k)` forces every global minimiser to have fewer than `k` nonzeros;
//! `λ ≥ γ(k)` does the same for local minimisers in the level set of zero.
//! Below `‖b‖² / ‖x_c‖_p^p` for a feasible `x_c` (`A x_c = b`) the zero vector
//! is never a global minimiser.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{penalty, Instance};
use crate::numeric::{min_norm_lstsq, spectral_norm};

/// Feasibility tolerance for `‖A x_c - b‖ ≤ tol · ‖b‖`.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityBounds {
    pub k: usize,
    pub alpha: f64,
    pub beta_k: f64,
    pub gamma_k: f64,
    /// `(λp(1-p)/(2α))^{1/(2-p)}`: floor on nonzero magnitudes of global minimisers.
    pub l_global: f64,
    /// `(λp/(2‖A‖‖b‖))^{1/(1-p)}`: floor for local minimisers with `f ≤ ‖b‖²`.
    pub l_local: f64,
    pub spectral_norm_a: f64,
    pub norm_b: f64,
}

pub fn beta(k: usize, p: f64, alpha: f64, norm_b: f64) -> f64 {
    let k = k as f64;
    k.powf(p / 2.0 - 1.0) * (2.0 * alpha / (p * (1.0 - p))).powf(p / 2.0) * norm_b.powf(2.0 - p)
}

pub fn gamma(k: usize, p: f64, spectral_norm_a: f64, norm_b: f64) -> f64 {
    let k = k as f64;
    k.powf(p - 1.0) * (2.0 * spectral_norm_a / p).powf(p) * norm_b.powf(2.0 - p)
}

pub fn l_global(lambda: f64, p: f64, alpha: f64) -> f64 {
    (lambda * p * (1.0 - p) / (2.0 * alpha)).powf(1.0 / (2.0 - p))
}

pub fn l_local(lambda: f64, p: f64, spectral_norm_a: f64, norm_b: f64) -> f64 {
    (lambda * p / (2.0 * spectral_norm_a * norm_b)).powf(1.0 / (1.0 - p))
}

/// The bounds are established only for `0 < p < 1`, `q = 2`, `ε = 0`.
pub(crate) fn require_bounds_regime(inst: &Instance) -> Result<()> {
    if inst.p == 0.0 {
        return Err(Error::Unsupported(
            "sparsity bounds are not established for p = 0".into(),
        ));
    }
    if inst.q != 2.0 {
        return Err(Error::Unsupported(
            "sparsity bounds hold for the q = 2 data term only".into(),
        ));
    }
    if inst.epsilon != 0.0 {
        return Err(Error::Unsupported(
            "sparsity bounds are stated for the unsmoothed objective".into(),
        ));
    }
    Ok(())
}

pub fn alpha(inst: &Instance) -> f64 {
    inst.column_sq_norms().into_iter().fold(0.0, f64::max)
}

pub fn sparsity_bounds(inst: &Instance, k: usize) -> Result<SparsityBounds> {
    require_bounds_regime(inst)?;
    if k < 1 || k > inst.n() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must satisfy 1 <= k <= n = {}",
            inst.n()
        )));
    }
    let alpha = alpha(inst);
    if alpha == 0.0 {
        return Err(Error::InvalidParameter("A has only zero columns".into()));
    }
    let spec = spectral_norm(&inst.a);
    let norm_b = inst.norm_b();
    let p = inst.p;
    Ok(SparsityBounds {
        k,
        alpha,
        beta_k: beta(k, p, alpha, norm_b),
        gamma_k: gamma(k, p, spec, norm_b),
        l_global: l_global(inst.lambda, p, alpha),
        l_local: l_local(inst.lambda, p, spec, norm_b),
        spectral_norm_a: spec,
        norm_b,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonzeroGuarantee {
    pub threshold: f64,
    /// The feasible point the threshold was computed from.
    pub x_c: Vec<f64>,
    pub supplied: bool,
}

/// `‖b‖² / ‖x_c‖_p^p`, either for the supplied feasible `x_c` or for the
/// minimum-norm solution of `Ax = b`.
pub fn nonzero_guarantee(inst: &Instance, x_c: Option<&[f64]>) -> Result<NonzeroGuarantee> {
    require_bounds_regime(inst)?;
    let norm_b = inst.norm_b();
    let (x_c, supplied) = match x_c {
        Some(x) => {
            if x.len() != inst.n() {
                return Err(Error::Dimension(format!(
                    "x_c has length {}, instance has n = {}",
                    x.len(),
                    inst.n()
                )));
            }
            let r = inst.residual(x).norm();
            if r > FEASIBILITY_TOL * norm_b {
                return Err(Error::Infeasible(format!(
                    "‖A x_c - b‖ = {r:e} exceeds {FEASIBILITY_TOL:e}·‖b‖"
                )));
            }
            (x.to_vec(), true)
        }
        None => {
            let (x, r) = min_norm_lstsq(&inst.a, &inst.b);
            if r > FEASIBILITY_TOL * norm_b {
                return Err(Error::InconsistentSystem { residual: r });
            }
            (x.iter().copied().collect(), false)
        }
    };
    let pen = penalty(&x_c, inst.p, 0.0);
    Ok(NonzeroGuarantee {
        threshold: norm_b * norm_b / pen,
        x_c,
        supplied,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRule {
    /// Upper end `β(k)`: guarantees for global minimisers.
    Global,
    /// Upper end `γ(k)`: guarantees for local minimisers with `f ≤ ‖b‖²`.
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecommendationRegime {
    /// `k = 1`: at or above the upper end the zero vector is the only minimiser.
    ZeroUniqueAbove,
    /// `k ≥ 2`: at or above the upper end every minimiser has fewer than `k` nonzeros.
    SupportBelowK,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRecommendation {
    pub k: usize,
    pub rule: LambdaRule,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub regime: RecommendationRegime,
    pub empty: bool,
    pub warning: Option<String>,
}

/// Interval `[nonzero threshold, β(k) or γ(k)]` of λ values that keep
/// minimisers nonzero yet sparser than `k`.
pub fn recommend_lambda(
    inst: &Instance,
    k: usize,
    rule: LambdaRule,
    x_c: Option<&[f64]>,
) -> Result<LambdaRecommendation> {
    let bounds = sparsity_bounds(inst, k)?;
    let lambda_hi = match rule {
        LambdaRule::Global => bounds.beta_k,
        LambdaRule::Local => bounds.gamma_k,
    };
    let (lambda_lo, warning) = match nonzero_guarantee(inst, x_c) {
        Ok(g) => (g.threshold, None),
        Err(Error::InconsistentSystem { residual }) => (
            0.0,
            Some(format!(
                "Ax = b is inconsistent (residual {residual:e}); no nonzero guarantee"
            )),
        ),
        Err(e) => return Err(e),
    };
    Ok(LambdaRecommendation {
        k,
        rule,
        lambda_lo,
        lambda_hi,
        regime: if k == 1 {
            RecommendationRegime::ZeroUniqueAbove
        } else {
            RecommendationRegime::SupportBelowK
        },
        empty: lambda_lo > lambda_hi,
        warning,
    })
}
