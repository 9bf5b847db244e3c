//! λ bounds under a standardized design (`‖a_i‖² = m`, `‖A‖ = √m`), their
//! behaviour as the sample size grows, and a support-recovery experiment.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::solver::{global_solve, SolveOptions};

/// Relative spread below which a scaled sequence counts as constant.
pub const CONSTANT_TOL: f64 = 1e-12;

/// Largest design materialised by the experiment, in entries.
pub const DESIGN_ENTRY_LIMIT: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundRule {
    Beta,
    Gamma,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizedBounds {
    pub beta: f64,
    pub gamma: f64,
}

impl StandardizedBounds {
    pub fn get(&self, rule: BoundRule) -> f64 {
        match rule {
            BoundRule::Beta => self.beta,
            BoundRule::Gamma => self.gamma,
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p = {p} not in (0, 1)")))
    }
}

/// `β(k)` and `γ(k)` with `α = m` and `‖A‖ = √m`.
pub fn standardized_bounds(m: u64, k: usize, norm_b: f64, p: f64) -> Result<StandardizedBounds> {
    check_p(p)?;
    if m == 0 || k == 0 {
        return Err(Error::InvalidParameter("m and k must be >= 1".into()));
    }
    if !(norm_b > 0.0 && norm_b.is_finite()) {
        return Err(Error::InvalidParameter(format!("‖b‖ = {norm_b} must be > 0")));
    }
    let m = m as f64;
    Ok(StandardizedBounds {
        beta: bounds::beta(k, p, m, norm_b),
        gamma: bounds::gamma(k, p, m.sqrt(), norm_b),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    /// `λ_m m^{-p/2}`, expected to be constant.
    Stand,
    /// `λ_m m^{-1/2}`, expected to vanish like `m^{(p-1)/2}`.
    Stand2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVerdict {
    Constant,
    ConvergesToZero,
    Diverges,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub m: u64,
    pub lambda: f64,
    pub scaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub kind: LimitKind,
    pub rule: BoundRule,
    pub p: f64,
    pub k: usize,
    pub norm_b: f64,
    pub rows: Vec<LimitRow>,
    /// Least-squares slope of `log scaled` against `log m`.
    pub fitted_exponent: f64,
    pub expected_exponent: f64,
    /// Largest relative deviation from the first scaled value.
    pub relative_spread: f64,
    pub verdict: LimitVerdict,
}

pub fn limit_check(
    kind: LimitKind,
    p: f64,
    m_grid: &[u64],
    rule: BoundRule,
    k: usize,
    norm_b: f64,
) -> Result<LimitReport> {
    check_p(p)?;
    if m_grid.len() < 3 {
        return Err(Error::InvalidParameter("m grid needs at least three values".into()));
    }
    if m_grid[0] == 0 || m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "m grid must be positive and strictly increasing".into(),
        ));
    }
    let power = match kind {
        LimitKind::Stand => p / 2.0,
        LimitKind::Stand2 => 0.5,
    };
    let rows = m_grid
        .iter()
        .map(|&m| {
            let lambda = standardized_bounds(m, k, norm_b, p)?.get(rule);
            Ok(LimitRow {
                m,
                lambda,
                scaled: lambda * (m as f64).powf(-power),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let xs: Vec<f64> = rows.iter().map(|r| (r.m as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.scaled.ln()).collect();
    let len = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / len, ys.iter().sum::<f64>() / len);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let fitted_exponent = sxy / sxx;

    let first = rows[0].scaled;
    let relative_spread = rows
        .iter()
        .map(|r| (r.scaled - first).abs() / first)
        .fold(0.0, f64::max);
    let verdict = if relative_spread <= CONSTANT_TOL {
        LimitVerdict::Constant
    } else if fitted_exponent < 0.0 {
        LimitVerdict::ConvergesToZero
    } else {
        LimitVerdict::Diverges
    };
    Ok(LimitReport {
        kind,
        rule,
        p,
        k,
        norm_b,
        rows,
        fitted_exponent,
        expected_exponent: match kind {
            LimitKind::Stand => 0.0,
            LimitKind::Stand2 => (p - 1.0) / 2.0,
        },
        relative_spread,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m_grid: Vec<usize>,
    pub n: usize,
    pub k_true: usize,
    /// Standard deviation of the Gaussian noise added to `b`.
    pub noise: f64,
    pub p: f64,
    pub rule: BoundRule,
    /// Support size the λ bound is evaluated at.
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if self.n == 0 || self.n > 12 {
            return Err(Error::InvalidParameter(format!(
                "n = {} must be in 1..=12 for brute-force solving",
                self.n
            )));
        }
        if self.k_true == 0 || self.k_true > 3 || self.k_true > self.n {
            return Err(Error::InvalidParameter(format!(
                "k_true = {} must be in 1..=min(3, n)",
                self.k_true
            )));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::InvalidParameter(format!(
                "k = {} must be in 1..=n",
                self.k
            )));
        }
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            return Err(Error::InvalidParameter("m grid must be nonempty and positive".into()));
        }
        if let Some(&m) = self.m_grid.iter().find(|&&m| m * self.n > DESIGN_ENTRY_LIMIT) {
            return Err(Error::SizeLimit(format!(
                "design {m}x{} exceeds {DESIGN_ENTRY_LIMIT} entries",
                self.n
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise = {} must be >= 0",
                self.noise
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub m: usize,
    pub trial: usize,
    pub support_size: usize,
    pub exact_recovery: bool,
    /// Size of the symmetric difference with the true support.
    pub support_distance: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub m: usize,
    pub mean_support_size: f64,
    pub recovery_rate: f64,
    pub mean_support_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
}

pub const CSV_HEADER: &str = "m,trial,support_size,exact_recovery,support_distance";

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.m, r.trial, r.support_size, r.exact_recovery as u8, r.support_distance
            ));
        }
        out
    }
}

fn trial_seed(seed: u64, m: usize, trial: usize) -> u64 {
    let mut h = seed ^ 0xD6E8_FEB8_6659_FD93;
    for v in [m as u64, trial as u64] {
        h = (h ^ v).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(29);
    }
    h
}

/// Gaussian design with columns rescaled to `‖a_i‖² = m`.
pub fn standardized_design(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col *= (m as f64).sqrt() / norm;
        }
    }
    a
}

fn run_trial(cfg: &ExperimentConfig, m: usize, trial: usize) -> Result<TrialRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, m, trial));
    let a = standardized_design(m, cfg.n, &mut rng);
    let mut truth: Vec<usize> = sample(&mut rng, cfg.n, cfg.k_true).into_vec();
    truth.sort_unstable();
    let mut x_true = nalgebra::DVector::zeros(cfg.n);
    for &i in &truth {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        x_true[i] = sign * rng.random_range(1.0..=2.0);
    }
    let mut b = &a * &x_true;
    if cfg.noise > 0.0 {
        for v in b.iter_mut() {
            *v += cfg.noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let norm_b = b.norm();
    let bounds = standardized_bounds(m as u64, cfg.k, norm_b, cfg.p)?;
    let lambda = bounds.get(cfg.rule);
    let inst = Instance::new(a, b, cfg.p, 2.0, lambda, 0.0)?;
    let opts = SolveOptions {
        seed: cfg.seed,
        ..Default::default()
    };
    let found = global_solve(&inst, None, &opts)?.best.support;
    let support_distance = found.iter().filter(|i| !truth.contains(i)).count()
        + truth.iter().filter(|i| !found.contains(i)).count();
    Ok(TrialRow {
        m,
        trial,
        support_size: found.len(),
        exact_recovery: found == truth,
        support_distance,
        lambda,
    })
}

/// Runs every `(m, trial)` pair with its own derived seed, so the rows do
/// not depend on scheduling.
pub fn recovery_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .m_grid
        .iter()
        .flat_map(|&m| (0..cfg.trials).map(move |t| (m, t)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(m, t)| run_trial(cfg, m, t))
        .collect::<Result<Vec<_>>>()?;
    let summary = cfg
        .m_grid
        .iter()
        .map(|&m| {
            let group: Vec<&TrialRow> = rows.iter().filter(|r| r.m == m).collect();
            let len = group.len() as f64;
            SummaryRow {
                m,
                mean_support_size: group.iter().map(|r| r.support_size as f64).sum::<f64>() / len,
                recovery_rate: group.iter().filter(|r| r.exact_recovery).count() as f64 / len,
                mean_support_distance: group.iter().map(|r| r.support_distance as f64).sum::<f64>()
                    / len,
            }
        })
        .collect();
    Ok(ExperimentReport { rows, summary })
}
