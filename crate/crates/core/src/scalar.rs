//! The one-dimensional subproblem
//!
//! ```text
//! g(z) = |1 - z|^q + ½ (|z| + ε)^p
//! ```
//!
//! and the separable proximal step `argmin_z (t - z)² + w|z|^p` used by the
//! coordinate solvers.
//!
//! Stationary points of `g` on `(0, 1)` solve `k(z) = p / (2q)` with
//! `k(z) = (z + ε)^{1-p} (1 - z)^{q-1}`. For `q > 1`, `k` is unimodal with its
//! peak at `z̄ = ((1-p) - (q-1)ε) / (q - p)`, so there are at most two roots,
//! one on each monotone branch. All root finding is done on `ln k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bisection stops once the bracket is this narrow.
const BISECT_WIDTH: f64 = 1e-14;
/// Safeguarded Newton steps applied after bisection.
const NEWTON_POLISH_STEPS: usize = 3;
/// Roots this close to an endpoint are merged with it.
const ENDPOINT_MERGE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarRegime {
    /// Minimum at an interior stationary point.
    InteriorMin,
    /// `q = 1`: `g` is concave on `[0, 1]` and the minimum sits at `z = 1`.
    EndpointQ1,
    /// `p = 0`: the penalty is an indicator and the minimum sits at `z = 1`.
    EndpointP0,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarMin {
    pub z_star: f64,
    pub c: f64,
    pub stationary_points: Vec<f64>,
    pub regime: ScalarRegime,
}

/// `g(z) = |1 - z|^q + ½ (|z| + ε)^p`, with the `p = 0` indicator convention.
pub fn scalar_objective(z: f64, p: f64, q: f64, epsilon: f64) -> f64 {
    let data = if q == 2.0 {
        (1.0 - z) * (1.0 - z)
    } else {
        (1.0 - z).abs().powf(q)
    };
    let pen = if p == 0.0 {
        if z != 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (z.abs() + epsilon).powf(p)
    };
    data + 0.5 * pen
}

/// `ln k(z) - ln target` for `k(z) = (z + s)^{1-p}(1 - z)^{q-1}`.
#[derive(Clone, Copy, Debug)]
struct LogBalance {
    p: f64,
    q: f64,
    shift: f64,
    log_target: f64,
}

impl LogBalance {
    fn value(&self, z: f64) -> f64 {
        let left = (1.0 - self.p) * (z + self.shift).ln();
        let right = if self.q == 1.0 {
            0.0
        } else {
            (self.q - 1.0) * (1.0 - z).ln()
        };
        left + right - self.log_target
    }

    fn slope(&self, z: f64) -> f64 {
        let right = if self.q == 1.0 {
            0.0
        } else {
            (self.q - 1.0) / (1.0 - z)
        };
        (1.0 - self.p) / (z + self.shift) - right
    }

    /// Maximiser of `k` on `[0, 1)`; `None` when `k` is monotone there.
    fn peak(&self) -> Option<f64> {
        if self.q == 1.0 {
            return None;
        }
        let zbar = ((1.0 - self.p) - (self.q - 1.0) * self.shift) / (self.q - self.p);
        (zbar > 0.0).then_some(zbar)
    }
}

#[derive(Clone, Copy)]
enum RootMode {
    /// Bisection to `BISECT_WIDTH`, then a few safeguarded Newton steps.
    BisectPolish,
    /// Newton with bisection fallback, run to full precision.
    Hybrid,
}

/// Root of `f` in `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs
/// (`hi` may be `1` with `f(1) = -∞`).
fn bracketed_root(f: &LogBalance, mut lo: f64, mut hi: f64, mode: RootMode) -> f64 {
    let f_lo = f.value(lo);
    let increasing = f_lo < 0.0;
    // Normalise so that the function is negative at `lo`.
    let sign = if increasing { 1.0 } else { -1.0 };
    let eval = |z: f64| sign * f.value(z);
    let deriv = |z: f64| sign * f.slope(z);

    match mode {
        RootMode::BisectPolish => {
            while hi - lo > BISECT_WIDTH {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if eval(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let mut fz = eval(z).abs();
            for _ in 0..NEWTON_POLISH_STEPS {
                let d = deriv(z);
                if d == 0.0 || !d.is_finite() {
                    break;
                }
                let cand = z - eval(z) / d;
                if !(cand > lo && cand < hi) {
                    break;
                }
                let fc = eval(cand).abs();
                if fc >= fz {
                    break;
                }
                z = cand;
                fz = fc;
            }
            z
        }
        RootMode::Hybrid => {
            let mut z = 0.5 * (lo + hi);
            for _ in 0..200 {
                let fz = eval(z);
                if fz == 0.0 {
                    return z;
                }
                if fz < 0.0 {
                    lo = z;
                } else {
                    hi = z;
                }
                let d = deriv(z);
                let newton = z - fz / d;
                let next = if d > 0.0 && newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
                if (next - z).abs() <= 4.0 * f64::EPSILON * next.abs().max(f64::MIN_POSITIVE)
                    || hi - lo <= 4.0 * f64::EPSILON * hi.abs()
                {
                    return next;
                }
                z = next;
            }
            z
        }
    }
}

/// Roots of `(z + shift)^{1-p}(1 - z)^{q-1} = target` in `(0, 1)`, ascending.
fn balance_roots(p: f64, q: f64, shift: f64, target: f64, mode: RootMode) -> Vec<f64> {
    let f = LogBalance {
        p,
        q,
        shift,
        log_target: target.ln(),
    };
    let below_one = 1.0 - f64::EPSILON / 2.0;
    if q == 1.0 {
        // k is increasing: a single closed-form root.
        let z = target.powf(1.0 / (1.0 - p)) - shift;
        return if z > 0.0 && z < 1.0 { vec![z] } else { vec![] };
    }
    let mut roots = Vec::with_capacity(2);
    let f0 = if shift > 0.0 {
        f.value(0.0)
    } else {
        f64::NEG_INFINITY
    };
    match f.peak() {
        Some(zbar) => {
            let fbar = f.value(zbar);
            if fbar < 0.0 {
                return roots;
            }
            if fbar == 0.0 {
                roots.push(zbar);
                return roots;
            }
            if f0 < 0.0 {
                let lo = if shift > 0.0 { 0.0 } else { f64::MIN_POSITIVE };
                roots.push(bracketed_root(&f, lo, zbar, mode));
            }
            roots.push(bracketed_root(&f, zbar, below_one, mode));
        }
        None => {
            if f0 > 0.0 {
                roots.push(bracketed_root(&f, 0.0, below_one, mode));
            }
        }
    }
    roots
}

fn check_open_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} not in (0, 1)")));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
    }
    Ok(())
}

/// Solutions of `z^{1-p}(1-z)^{q-1} = p/(2q)` in `(0, 1)`: the stationary
/// points of `g` with `ε = 0`. At most two, ascending.
pub fn scalar_stationary_points(p: f64, q: f64) -> Result<Vec<f64>> {
    check_open_p(p)?;
    check_q(q)?;
    Ok(balance_roots(p, q, 0.0, p / (2.0 * q), RootMode::BisectPolish))
}

/// Global minimum of `g` over the real line.
pub fn scalar_min(p: f64, q: f64, epsilon: f64) -> Result<ScalarMin> {
    check_q(q)?;
    if !(p >= 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} not in [0, 1)")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be >= 0")));
    }
    if p == 0.0 {
        if epsilon > 0.0 {
            return Err(Error::InvalidParameter(
                "smoothing (epsilon > 0) requires p > 0".into(),
            ));
        }
        return Ok(ScalarMin {
            z_star: 1.0,
            c: 0.5,
            stationary_points: Vec::new(),
            regime: ScalarRegime::EndpointP0,
        });
    }
    let stationary_points: Vec<f64> =
        balance_roots(p, q, epsilon, p / (2.0 * q), RootMode::BisectPolish)
            .into_iter()
            .filter(|z| *z > ENDPOINT_MERGE && *z < 1.0 - ENDPOINT_MERGE)
            .collect();

    let mut z_star = 1.0;
    let mut c = scalar_objective(1.0, p, q, epsilon);
    let mut regime = ScalarRegime::EndpointQ1;
    for &z in &stationary_points {
        let v = scalar_objective(z, p, q, epsilon);
        if v < c {
            z_star = z;
            c = v;
            regime = ScalarRegime::InteriorMin;
        }
    }
    // g(0) = 1 + ½ε^p exceeds g(1) = ½(1+ε)^p by subadditivity of t ↦ t^p.
    debug_assert!(scalar_objective(0.0, p, q, epsilon) > c);
    Ok(ScalarMin {
        z_star,
        c,
        stationary_points,
        regime,
    })
}

/// Global minimiser of `(t - z)² + w|z|^p`; ties go to zero.
pub fn separable_prox(t: f64, w: f64, p: f64) -> f64 {
    prox(t, w, p, 0.0)
}

/// Global minimiser of `(t - z)² + w(|z| + ε)^p`; ties go to zero.
pub fn separable_prox_smoothed(t: f64, w: f64, p: f64, epsilon: f64) -> f64 {
    prox(t, w, p, epsilon)
}

pub(crate) fn prox(t: f64, w: f64, p: f64, epsilon: f64) -> f64 {
    let a = t.abs();
    if a == 0.0 || !a.is_finite() {
        return if a.is_finite() { 0.0 } else { t };
    }
    if w <= 0.0 {
        return t;
    }
    if p == 0.0 {
        return if a * a > w { t } else { 0.0 };
    }
    // z = a·u with u ∈ [0, 1]; stationary points solve
    // (u + ε/a)^{1-p}(1 - u) = w·p / (2 a^{2-p}).
    let shift = epsilon / a;
    let target = w * p / (2.0 * a.powf(2.0 - p));
    let f = LogBalance {
        p,
        q: 2.0,
        shift,
        log_target: target.ln(),
    };
    let below_one = 1.0 - f64::EPSILON / 2.0;
    let u = match f.peak() {
        Some(zbar) => {
            if f.value(zbar) <= 0.0 {
                return 0.0;
            }
            bracketed_root(&f, zbar, below_one, RootMode::Hybrid)
        }
        None => {
            if shift == 0.0 || f.value(0.0) <= 0.0 {
                return 0.0;
            }
            bracketed_root(&f, 0.0, below_one, RootMode::Hybrid)
        }
    };
    let z = a * u;
    let at_zero = a * a + w * epsilon.powf(p);
    let at_z = (a - z) * (a - z) + w * (z + epsilon).powf(p);
    if at_z < at_zero {
        z.copysign(t)
    } else {
        0.0
    }
}
