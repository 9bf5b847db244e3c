//! Global minimisation by support enumeration, a local coordinate solver,
//! and certification of candidates.
//!
//! The global solver enumerates every support of size at most `k_max`,
//! solves each restricted problem with a multi-start coordinate method, and
//! keeps the best candidate. Restricted problems are still nonconvex, so the
//! result is exact only up to the per-support multi-start.

mod certify;
mod descent;
mod local;

use itertools::Itertools;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::model::{Candidate, Instance};
use crate::numeric::{min_norm_lstsq, rank};

pub use certify::{certify, Certification, ProbeHit, DEFAULT_CERTIFY_TOL, PROBE_STEPS};
pub use local::{local_solve, LocalOptions, StageTrace};

use descent::{coordinate_descent, newton_polish, support_descent, Stopping};

/// Residual smoothing used for `q = 1` (no certification is offered there).
pub const Q1_SMOOTHING: f64 = 1e-9;

/// Coordinate sweeps before the first Newton polish.
pub(crate) const WARMUP_SWEEPS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bruteforce,
    Local,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportOptimum {
    pub support: Vec<usize>,
    pub candidate: Candidate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnumerationStats {
    pub supports_total: u64,
    pub solved: u64,
    pub pruned: u64,
    pub dependent: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub best: Candidate,
    pub method: Method,
    pub certification: Option<Certification>,
    /// Set when `q = 1` forced the smoothed-residual heuristic.
    pub heuristic: bool,
    pub all_support_optima: Option<Vec<SupportOptimum>>,
    pub stats: Option<EnumerationStats>,
    /// Local mode: certification of the starting point.
    pub start_certification: Option<Certification>,
    /// Local mode: objective after every sweep, per smoothing stage.
    pub trace: Option<Vec<StageTrace>>,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub seed: u64,
    pub random_starts: usize,
    /// Maximum number of supports `global_solve` may enumerate.
    pub enumeration_cap: u128,
    /// Objectives closer than this are ties.
    pub tie_tol: f64,
    pub keep_all: bool,
    pub certify_tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            seed: 0,
            random_starts: 8,
            enumeration_cap: 1_000_000,
            tie_tol: 1e-10,
            keep_all: false,
            certify_tol: DEFAULT_CERTIFY_TOL,
            max_sweeps: 10_000,
        }
    }
}

/// `a` is strictly preferred to `b`: lower objective beyond `tol`, else a
/// smaller support, else the lexicographically smaller support.
pub fn prefer(a: &Candidate, b: &Candidate, tol: f64) -> bool {
    if a.objective < b.objective - tol {
        return true;
    }
    if a.objective > b.objective + tol {
        return false;
    }
    (a.support.len(), &a.support) < (b.support.len(), &b.support)
}

pub(crate) fn certification_available(inst: &Instance) -> bool {
    inst.q == 2.0 && inst.epsilon == 0.0 && inst.p > 0.0
}

fn support_seed(seed: u64, support: &[usize]) -> u64 {
    support.iter().fold(seed ^ 0x9E37_79B9_7F4A_7C15, |h, &i| {
        (h ^ (i as u64 + 1)).wrapping_mul(0x0100_0000_01B3).rotate_left(17)
    })
}

fn check_support(inst: &Instance, support: &[usize]) -> Result<()> {
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "support must be strictly increasing".into(),
        ));
    }
    if let Some(&i) = support.iter().find(|&&i| i >= inst.n()) {
        return Err(Error::InvalidParameter(format!(
            "support index {i} out of range for n = {}",
            inst.n()
        )));
    }
    if support.len() > inst.m().min(inst.n()) {
        return Err(Error::InvalidParameter(format!(
            "support size {} exceeds min(m, n) = {}",
            support.len(),
            inst.m().min(inst.n())
        )));
    }
    Ok(())
}

/// Best point found for the problem restricted to `support` (coordinates off
/// the support are exactly zero). Coordinates may drop out of the support
/// during the solve, in which case the candidate has a smaller support.
pub fn solve_support(inst: &Instance, support: &[usize], opts: &SolveOptions) -> Result<Candidate> {
    solve_support_flagged(inst, support, opts).map(|(c, _)| c)
}

/// As [`solve_support`], also reporting whether the `q = 1` heuristic ran.
pub fn solve_support_flagged(
    inst: &Instance,
    support: &[usize],
    opts: &SolveOptions,
) -> Result<(Candidate, bool)> {
    if inst.epsilon != 0.0 && inst.q != 2.0 {
        return Err(Error::Unsupported(
            "smoothed objectives are supported for q = 2 only".into(),
        ));
    }
    check_support(inst, support)?;
    let n = inst.n();
    if support.is_empty() {
        return Ok((Candidate::zero(inst), false));
    }
    let b_t = inst.a.select_columns(support.iter());
    if rank(&b_t) < support.len() {
        return Err(Error::DependentColumns(support.to_vec()));
    }
    let (x_ls, _) = min_norm_lstsq(&b_t, &inst.b);
    let scatter = |vals: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (k, &i) in support.iter().enumerate() {
            x[i] = vals[k];
        }
        x
    };

    if inst.p == 0.0 && inst.q == 2.0 {
        let ls: Vec<f64> = x_ls.iter().copied().collect();
        return Ok((Candidate::new(inst, scatter(&ls))?, false));
    }

    let starts = starting_points(inst, support, &x_ls, opts);
    let col_sq = inst.column_sq_norms();
    let mut best: Option<Candidate> = None;
    let heuristic = inst.q == 1.0;
    for start in starts {
        let mut x = scatter(&start);
        if inst.q == 2.0 {
            refine_q2(inst, &col_sq, support, &mut x, opts)?;
        } else {
            let smoothing = if heuristic { Q1_SMOOTHING } else { 0.0 };
            support_descent(inst, &mut x, smoothing, 20_000);
        }
        let cand = Candidate::new(inst, x)?;
        if best.as_ref().is_none_or(|b| prefer(&cand, b, opts.tie_tol)) {
            best = Some(cand);
        }
    }
    Ok((best.expect("at least one start"), heuristic))
}

/// Least-squares start, its sign flips for small supports, and seeded
/// random starts scaled to the data.
fn starting_points(
    inst: &Instance,
    support: &[usize],
    x_ls: &DVector<f64>,
    opts: &SolveOptions,
) -> Vec<Vec<f64>> {
    let ls: Vec<f64> = x_ls.iter().copied().collect();
    let mut starts = vec![ls.clone()];
    if support.len() <= 3 {
        for mask in 1u32..(1 << support.len()) {
            starts.push(
                ls.iter()
                    .enumerate()
                    .map(|(k, v)| if mask & (1 << k) != 0 { -v } else { *v })
                    .collect(),
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(support_seed(opts.seed, support));
    let norm_b = inst.norm_b();
    let scales: Vec<f64> = support
        .iter()
        .map(|&i| 2.0 * norm_b / inst.a.column(i).norm())
        .collect();
    for _ in 0..opts.random_starts {
        starts.push(scales.iter().map(|s| rng.random_range(-*s..=*s)).collect());
    }
    starts
}

/// Coordinate descent on the support, pruning coordinates below half the
/// global magnitude floor and re-solving, then a Newton polish.
///
/// Coordinate descent converges slowly on strongly correlated columns, so a
/// short run hands over to Newton early; the full run then starts close to
/// the minimiser.
fn refine_q2(
    inst: &Instance,
    col_sq: &[f64],
    support: &[usize],
    x: &mut [f64],
    opts: &SolveOptions,
) -> Result<()> {
    let stop = Stopping {
        step_tol: 1e-12,
        decrease_tol: Some(1e-13),
        max_sweeps: opts.max_sweeps,
        guard: false,
    };
    let eps = inst.epsilon;
    if eps > 0.0 {
        let mut r = &inst.b - &inst.a * DVector::from_column_slice(x);
        coordinate_descent(inst, col_sq, support, x, &mut r, eps, stop)?;
        return Ok(());
    }
    let floor = bounds::l_global(inst.lambda, inst.p, bounds::alpha(inst));
    let mut coords: Vec<usize> = support.to_vec();
    let warmup = Stopping {
        max_sweeps: stop.max_sweeps.min(WARMUP_SWEEPS),
        ..stop
    };
    loop {
        let mut r = &inst.b - &inst.a * DVector::from_column_slice(x);
        coordinate_descent(inst, col_sq, &coords, x, &mut r, 0.0, warmup)?;
        newton_polish(inst, x);
        let mut r = &inst.b - &inst.a * DVector::from_column_slice(x);
        coordinate_descent(inst, col_sq, &coords, x, &mut r, 0.0, stop)?;
        let before = coords.len();
        for &i in &coords {
            if x[i].abs() < 0.5 * floor {
                x[i] = 0.0;
            }
        }
        coords.retain(|&i| x[i] != 0.0);
        if coords.len() == before {
            break;
        }
    }
    newton_polish(inst, x);
    // A final sweep settles any coordinate the polish left off its prox value.
    let mut r = &inst.b - &inst.a * DVector::from_column_slice(x);
    coordinate_descent(
        inst,
        col_sq,
        &coords,
        x,
        &mut r,
        0.0,
        Stopping {
            max_sweeps: 2,
            ..stop
        },
    )?;
    Ok(())
}

/// Lower bound on the objective of any global minimiser whose support is
/// exactly `support`, or `None` when no bound is available.
fn prune_bound(inst: &Instance, support: &[usize], floor_pow: Option<f64>) -> Option<f64> {
    if inst.q != 2.0 {
        return None;
    }
    let b_t = inst.a.select_columns(support.iter());
    let (_, r) = min_norm_lstsq(&b_t, &inst.b);
    let k = support.len() as f64;
    if inst.p == 0.0 {
        Some(r * r + inst.lambda * k)
    } else {
        floor_pow.map(|fp| r * r + inst.lambda * k * fp)
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Brute-force global minimisation over all supports of size at most
/// `k_max` (default `min(m, n)`), plus the zero vector.
///
/// Supports are processed one size at a time. Within a size every support
/// is pruned against the incumbent from the previous sizes and the survivors
/// are solved in parallel; the merge runs in enumeration order, so the result
/// does not depend on the number of worker threads.
pub fn global_solve(inst: &Instance, k_max: Option<usize>, opts: &SolveOptions) -> Result<SolveResult> {
    if inst.epsilon != 0.0 && inst.q != 2.0 {
        return Err(Error::Unsupported(
            "smoothed objectives are supported for q = 2 only".into(),
        ));
    }
    let n = inst.n();
    let limit = inst.m().min(n);
    let k_max = k_max.unwrap_or(limit).min(limit);
    let total: u128 = (1..=k_max).map(|k| binomial(n as u64, k as u64)).sum();
    if total > opts.enumeration_cap {
        return Err(Error::CapExceeded {
            needed: total,
            cap: opts.enumeration_cap,
        });
    }
    let floor_pow = (inst.q == 2.0 && inst.p > 0.0 && inst.epsilon == 0.0)
        .then(|| bounds::l_global(inst.lambda, inst.p, bounds::alpha(inst)).powf(inst.p));

    let mut best = Candidate::zero(inst);
    let mut heuristic = false;
    let mut stats = EnumerationStats {
        supports_total: total as u64,
        ..Default::default()
    };
    let mut all = opts.keep_all.then(Vec::new);
    for k in 1..=k_max {
        let supports: Vec<Vec<usize>> = (0..n).combinations(k).collect();
        let incumbent = best.objective + opts.tie_tol;
        let outcomes: Vec<Option<Result<(Candidate, bool)>>> = supports
            .par_iter()
            .map(|s| {
                if !opts.keep_all {
                    if let Some(lb) = prune_bound(inst, s, floor_pow) {
                        if lb > incumbent {
                            return None;
                        }
                    }
                }
                Some(solve_support_flagged(inst, s, opts))
            })
            .collect();
        for (s, out) in supports.into_iter().zip(outcomes) {
            match out {
                None => stats.pruned += 1,
                Some(Err(Error::DependentColumns(_))) => stats.dependent += 1,
                Some(Err(e)) => return Err(e),
                Some(Ok((cand, h))) => {
                    stats.solved += 1;
                    heuristic |= h;
                    if prefer(&cand, &best, opts.tie_tol) {
                        best = cand.clone();
                    }
                    if let Some(all) = all.as_mut() {
                        all.push(SupportOptimum {
                            support: s,
                            candidate: cand,
                        });
                    }
                }
            }
        }
    }
    let certification = if certification_available(inst) {
        Some(certify(inst, &best.x, opts.certify_tol)?)
    } else {
        None
    };
    Ok(SolveResult {
        best,
        method: Method::Bruteforce,
        certification,
        heuristic,
        all_support_optima: all,
        stats: Some(stats),
        start_certification: None,
        trace: None,
    })
}
