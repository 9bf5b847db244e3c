//! Hardness gadgets: λ-rescaling, partition and 3-partition instances, their
//! decision thresholds, and combinatorial oracles to check them against.
//!
//! Every gadget is built at `λ = 1/2`. Its optimum equals the threshold
//! exactly when the source instance is a yes-instance.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{objective_unchecked, Instance, InstanceDoc};
use crate::scalar::scalar_min;
use crate::solver::{global_solve, local_solve, LocalOptions, SolveOptions};

/// Largest gadget, in variables, that [`decide_with`] brute-forces by default.
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Largest structured enumeration (`2^n` or `m^n` assignments).
pub const ASSIGNMENT_LIMIT: u64 = 1 << 22;

/// Largest number sum accepted by the subset-sum table.
pub const SUBSET_SUM_LIMIT: u64 = 1_000_000;

/// Largest subset count accepted by the 3-partition backtracking oracle.
pub const BACKTRACK_SUBSET_LIMIT: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Partition,
    ThreePartition,
}

/// Positive integers to split into two (partition) or `m_sets`
/// (3-partition) groups of equal sum.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionInstance {
    pub a: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_sets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<u64>,
}

impl PartitionInstance {
    pub fn partition(a: Vec<u64>) -> Result<Self> {
        let src = PartitionInstance {
            a,
            m_sets: None,
            target: None,
        };
        src.validate()?;
        Ok(src)
    }

    pub fn three_partition(a: Vec<u64>, m_sets: usize, target: u64) -> Result<Self> {
        let src = PartitionInstance {
            a,
            m_sets: Some(m_sets),
            target: Some(target),
        };
        src.validate()?;
        Ok(src)
    }

    /// 3-partition source with `B = Σa / m`.
    pub fn three_partition_auto(a: Vec<u64>, m_sets: usize) -> Result<Self> {
        if m_sets == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        let total: u64 = a.iter().sum();
        if total % m_sets as u64 != 0 {
            return Err(Error::InvalidParameter(format!(
                "sum {total} is not divisible by m = {m_sets}"
            )));
        }
        Self::three_partition(a, m_sets, total / m_sets as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() < 2 {
            return Err(Error::InvalidParameter("need at least two numbers".into()));
        }
        if self.a.contains(&0) {
            return Err(Error::InvalidParameter("numbers must be >= 1".into()));
        }
        match (self.m_sets, self.target) {
            (None, None) => Ok(()),
            (Some(m), Some(target)) => {
                if m == 0 || self.a.len() != 3 * m {
                    return Err(Error::InvalidParameter(format!(
                        "3-partition needs n = 3m numbers, got n = {} and m = {m}",
                        self.a.len()
                    )));
                }
                let total: u64 = self.a.iter().sum();
                if total != m as u64 * target {
                    return Err(Error::InvalidParameter(format!(
                        "sum {total} differs from m·B = {m}·{target}"
                    )));
                }
                Ok(())
            }
            _ => Err(Error::InvalidParameter(
                "m and B must be given together".into(),
            )),
        }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn kind(&self) -> SourceKind {
        if self.m_sets.is_some() {
            SourceKind::ThreePartition
        } else {
            SourceKind::Partition
        }
    }

    fn sets_and_target(&self) -> Result<(usize, u64)> {
        match (self.m_sets, self.target) {
            (Some(m), Some(t)) => Ok((m, t)),
            _ => Err(Error::InvalidParameter(
                "3-partition requires m and B".into(),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetKind {
    Partition,
    ThreePartition,
    SmoothedThreePartition,
}

/// Right-hand side of the subset-sum rows of a 3-partition gadget.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsConvention {
    /// `z*·B`: the rows see `z*` times each subset sum at the witness, so a
    /// yes-instance reaches the threshold.
    #[default]
    Scaled,
    /// `B` as printed. A yes-instance then leaves residual `(1-z*)B` per
    /// subset and stays strictly above the threshold.
    Literal,
}

/// Where each gadget variable sits in the flat vector (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum VariableLayout {
    /// `x_j` at `j`, `y_j` at `items + j`.
    Pairs { items: usize },
    /// `x_ij` at `subsets·i + j`.
    Grid { items: usize, subsets: usize },
}

impl VariableLayout {
    pub fn len(&self) -> usize {
        match *self {
            VariableLayout::Pairs { items } => 2 * items,
            VariableLayout::Grid { items, subsets } => items * subsets,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_index(&self, item: usize) -> usize {
        item
    }

    pub fn y_index(&self, item: usize) -> usize {
        match *self {
            VariableLayout::Pairs { items } => items + item,
            VariableLayout::Grid { .. } => panic!("grid layout has no y variables"),
        }
    }

    pub fn grid_index(&self, item: usize, subset: usize) -> usize {
        match *self {
            VariableLayout::Grid { subsets, .. } => subsets * item + subset,
            VariableLayout::Pairs { .. } => panic!("pair layout has no grid variables"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionInstance {
    pub instance: Instance,
    pub threshold: f64,
    pub source: PartitionInstance,
    pub kind: GadgetKind,
    pub layout: VariableLayout,
    /// Minimiser of the scalar problem the threshold is built from.
    pub z_star: f64,
    pub c: f64,
    pub rhs: RhsConvention,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionDoc {
    pub kind: GadgetKind,
    pub threshold: f64,
    pub z_star: f64,
    pub c: f64,
    pub rhs: RhsConvention,
    pub layout: VariableLayout,
    pub source: PartitionInstance,
    pub instance: InstanceDoc,
}

impl ReductionInstance {
    pub fn to_doc(&self) -> ReductionDoc {
        ReductionDoc {
            kind: self.kind,
            threshold: self.threshold,
            z_star: self.z_star,
            c: self.c,
            rhs: self.rhs,
            layout: self.layout,
            source: self.source.clone(),
            instance: self.instance.to_doc(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("reduction serializes")
    }

    /// Rebuilds the gadget from its source and checks the stored copy
    /// against it.
    pub fn from_doc(doc: &ReductionDoc) -> Result<Self> {
        doc.source.validate()?;
        let inst = Instance::from_doc(&doc.instance)?;
        let rebuilt = match doc.kind {
            GadgetKind::Partition => partition_gadget(&doc.source, inst.p, inst.q)?,
            GadgetKind::ThreePartition | GadgetKind::SmoothedThreePartition => {
                three_partition_gadget_with(&doc.source, inst.p, inst.q, inst.epsilon, doc.rhs)?
            }
        };
        if rebuilt.kind != doc.kind
            || rebuilt.instance != inst
            || rebuilt.threshold != doc.threshold
            || rebuilt.layout != doc.layout
        {
            return Err(Error::InvalidParameter(
                "reduction file does not match the gadget built from its source".into(),
            ));
        }
        Ok(rebuilt)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReductionDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }
}

/// Coordinate scaling `x̃ = s·x`, `Ã = A/s` with `s = (2λ)^{1/p}`, taking an
/// instance to the equivalent one with `λ = 1/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rescaling {
    pub instance: Instance,
    pub scale: f64,
}

impl Rescaling {
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v * self.scale).collect()
    }

    pub fn inverse(&self, x_tilde: &[f64]) -> Vec<f64> {
        x_tilde.iter().map(|v| v / self.scale).collect()
    }
}

pub fn rescale_lambda(inst: &Instance) -> Result<Rescaling> {
    inst.validate()?;
    if inst.p == 0.0 {
        return Err(Error::Unsupported(
            "rescaling needs p > 0 (the scale is (2λ)^{1/p})".into(),
        ));
    }
    if inst.epsilon != 0.0 {
        return Err(Error::Unsupported(
            "rescaling a smoothed objective changes epsilon; not supported".into(),
        ));
    }
    let scale = (2.0 * inst.lambda).powf(1.0 / inst.p);
    let a = if scale == 1.0 {
        inst.a.clone()
    } else {
        &inst.a / scale
    };
    let instance = Instance::new(a, inst.b.clone(), inst.p, inst.q, 0.5, 0.0)?;
    Ok(Rescaling { instance, scale })
}

fn check_gadget_params(p: f64, q: f64, epsilon: f64) -> Result<()> {
    if !(p >= 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} not in [0, 1)")));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be >= 0")));
    }
    if epsilon > 0.0 && p == 0.0 {
        return Err(Error::InvalidParameter(
            "smoothing (epsilon > 0) requires p > 0".into(),
        ));
    }
    Ok(())
}

/// `|aᵀ(x-y)|^q + Σ|x_j+y_j-1|^q + ½Σ(|x_j|^p + |y_j|^p)` over `(x, y)`.
pub fn partition_gadget(src: &PartitionInstance, p: f64, q: f64) -> Result<ReductionInstance> {
    src.validate()?;
    if src.kind() != SourceKind::Partition {
        return Err(Error::InvalidParameter(
            "partition gadget needs a partition source".into(),
        ));
    }
    check_gadget_params(p, q, 0.0)?;
    let n = src.n();
    let layout = VariableLayout::Pairs { items: n };
    let mut a = DMatrix::zeros(n + 1, 2 * n);
    let mut b = DVector::zeros(n + 1);
    for (j, &aj) in src.a.iter().enumerate() {
        a[(0, layout.x_index(j))] = aj as f64;
        a[(0, layout.y_index(j))] = -(aj as f64);
        a[(j + 1, layout.x_index(j))] = 1.0;
        a[(j + 1, layout.y_index(j))] = 1.0;
        b[j + 1] = 1.0;
    }
    let scalar = scalar_min(p, q, 0.0)?;
    Ok(ReductionInstance {
        instance: Instance::new(a, b, p, q, 0.5, 0.0)?,
        threshold: n as f64 * scalar.c,
        source: src.clone(),
        kind: GadgetKind::Partition,
        layout,
        z_star: scalar.z_star,
        c: scalar.c,
        rhs: RhsConvention::Scaled,
    })
}

/// `Σ_j|Σ_i a_i x_ij - B_rhs|^q + Σ_i|Σ_j x_ij - 1|^q + ½ΣΣ(|x_ij|+ε)^p`
/// with the default [`RhsConvention::Scaled`].
pub fn three_partition_gadget(
    src: &PartitionInstance,
    p: f64,
    q: f64,
    epsilon: f64,
) -> Result<ReductionInstance> {
    three_partition_gadget_with(src, p, q, epsilon, RhsConvention::Scaled)
}

pub fn three_partition_gadget_with(
    src: &PartitionInstance,
    p: f64,
    q: f64,
    epsilon: f64,
    rhs: RhsConvention,
) -> Result<ReductionInstance> {
    src.validate()?;
    let (m, target) = src.sets_and_target()?;
    check_gadget_params(p, q, epsilon)?;
    let n = src.n();
    let layout = VariableLayout::Grid {
        items: n,
        subsets: m,
    };
    let scalar = scalar_min(p, q, epsilon)?;
    let rhs_value = match rhs {
        RhsConvention::Scaled => scalar.z_star * target as f64,
        RhsConvention::Literal => target as f64,
    };
    let mut a = DMatrix::zeros(m + n, n * m);
    let mut b = DVector::zeros(m + n);
    for j in 0..m {
        for (i, &ai) in src.a.iter().enumerate() {
            a[(j, layout.grid_index(i, j))] = ai as f64;
        }
        b[j] = rhs_value;
    }
    for i in 0..n {
        for j in 0..m {
            a[(m + i, layout.grid_index(i, j))] = 1.0;
        }
        b[m + i] = 1.0;
    }
    let (kind, threshold) = if epsilon > 0.0 {
        (
            GadgetKind::SmoothedThreePartition,
            n as f64 * (scalar.c + 0.5 * (m as f64 - 1.0) * epsilon.powf(p)),
        )
    } else {
        (GadgetKind::ThreePartition, n as f64 * scalar.c)
    };
    Ok(ReductionInstance {
        instance: Instance::new(a, b, p, q, 0.5, epsilon)?,
        threshold,
        source: src.clone(),
        kind,
        layout,
        z_star: scalar.z_star,
        c: scalar.c,
        rhs,
    })
}

#[derive(Clone, Debug)]
pub struct DecideOptions {
    pub delta: f64,
    /// Brute-force the gadget when it has at most this many variables.
    pub brute_force_limit: usize,
    /// Number of assignment points, lowest objective first, that are
    /// polished by the local solver.
    pub polish_count: usize,
    pub solve: SolveOptions,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            delta: 1e-6,
            brute_force_limit: BRUTE_FORCE_LIMIT,
            polish_count: 16,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub decision: bool,
    /// Best objective found minus the threshold.
    pub gap: f64,
    pub optimum: f64,
    pub threshold: f64,
    /// Verdict of the exact assignment enumeration.
    pub structured: bool,
    pub brute_force: bool,
    pub assignments: u64,
    /// Point attaining `optimum`.
    pub witness: Vec<f64>,
}

pub fn decide_via_optimization(red: &ReductionInstance, delta: f64) -> Result<Decision> {
    decide_with(
        red,
        &DecideOptions {
            delta,
            ..Default::default()
        },
    )
}

/// Decides the source through the gadget's optimum.
///
/// The optimum estimate is the best of: every one-nonzero-per-item
/// assignment point (the witnesses of the combinatorial structure), local
/// polishes of the most promising ones, and a brute-force solve for small
/// gadgets. The answer is `optimum ≤ threshold + delta`. It is checked
/// against the exact balance test over the same assignments; disagreement
/// is reported as [`Error::Ambiguous`].
pub fn decide_with(red: &ReductionInstance, opts: &DecideOptions) -> Result<Decision> {
    if !(opts.delta >= 0.0 && opts.delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta = {} must be >= 0",
            opts.delta
        )));
    }
    let inst = &red.instance;
    let src = &red.source;
    let n = src.n();
    let groups = match red.layout {
        VariableLayout::Pairs { .. } => 2usize,
        VariableLayout::Grid { subsets, .. } => subsets,
    };
    let count = (groups as u64)
        .checked_pow(n as u32)
        .filter(|c| *c <= ASSIGNMENT_LIMIT)
        .ok_or_else(|| {
            Error::SizeLimit(format!(
                "{groups}^{n} assignments exceed {ASSIGNMENT_LIMIT}"
            ))
        })?;
    let target = match red.layout {
        VariableLayout::Pairs { .. } => 0i128,
        VariableLayout::Grid { .. } => src.target.expect("grid gadgets carry B") as i128,
    };

    let groups_of = |mut code: u64| -> Vec<usize> {
        (0..n)
            .map(|_| {
                let g = (code % groups as u64) as usize;
                code /= groups as u64;
                g
            })
            .collect()
    };
    let balanced = |assign: &[usize]| -> bool {
        match red.layout {
            VariableLayout::Pairs { .. } => {
                let signed: i128 = assign
                    .iter()
                    .zip(&src.a)
                    .map(|(g, &a)| if *g == 0 { a as i128 } else { -(a as i128) })
                    .sum();
                signed == 0
            }
            VariableLayout::Grid { .. } => {
                let mut loads = vec![0i128; groups];
                for (g, &a) in assign.iter().zip(&src.a) {
                    loads[*g] += a as i128;
                }
                loads.iter().all(|l| *l == target)
            }
        }
    };
    let point = |assign: &[usize]| -> Vec<f64> {
        let mut x = vec![0.0; inst.n()];
        for (i, g) in assign.iter().enumerate() {
            let idx = match red.layout {
                VariableLayout::Pairs { .. } if *g == 0 => red.layout.x_index(i),
                VariableLayout::Pairs { .. } => red.layout.y_index(i),
                VariableLayout::Grid { .. } => red.layout.grid_index(i, *g),
            };
            x[idx] = red.z_star;
        }
        x
    };

    // Exact structure check and the objective at every assignment point.
    let scored: Vec<(f64, bool)> = (0..count)
        .into_par_iter()
        .map(|code| {
            let assign = groups_of(code);
            (objective_unchecked(inst, &point(&assign)), balanced(&assign))
        })
        .collect();
    let structured = scored.iter().any(|(_, ok)| *ok);

    let mut order: Vec<u64> = (0..count).collect();
    order.sort_by(|&i, &j| scored[i as usize].0.total_cmp(&scored[j as usize].0).then(i.cmp(&j)));
    let mut best_value = scored[order[0] as usize].0;
    let mut best_x = point(&groups_of(order[0]));

    // Nothing lies below the threshold, so a witness at it needs no polish.
    let polishable = inst.q == 2.0 && inst.p > 0.0 && best_value > red.threshold + opts.delta;
    if polishable {
        let local = LocalOptions {
            certify_tol: opts.solve.certify_tol,
            ..Default::default()
        };
        let polished: Vec<Result<(f64, Vec<f64>)>> = order
            .iter()
            .take(opts.polish_count)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&&code| {
                let r = local_solve(inst, &point(&groups_of(code)), &local)?;
                Ok((r.best.objective, r.best.x))
            })
            .collect();
        for out in polished {
            let (value, x) = out?;
            if value < best_value {
                best_value = value;
                best_x = x;
            }
        }
    }
    let brute_force = inst.n() <= opts.brute_force_limit;
    if brute_force {
        let r = global_solve(inst, None, &opts.solve)?;
        if r.best.objective < best_value {
            best_value = r.best.objective;
            best_x = r.best.x;
        }
    }

    let gap = best_value - red.threshold;
    let decision = gap <= opts.delta;
    if decision != structured {
        return Err(Error::Ambiguous(format!(
            "optimum {best_value:.12e} is {gap:.3e} from threshold {:.12e} (delta {:e}), \
             but the assignment enumeration says {}",
            red.threshold,
            opts.delta,
            if structured { "yes" } else { "no" }
        )));
    }
    Ok(Decision {
        decision,
        gap,
        optimum: best_value,
        threshold: red.threshold,
        structured,
        brute_force,
        assignments: count,
        witness: best_x,
    })
}

/// Ground truth for the source problem, independent of any optimisation.
///
/// Partition uses a subset-sum table; 3-partition searches assignments of
/// items to `m` subsets of sum `B` by backtracking. Subset sizes are not
/// restricted, matching what the gadget encodes.
pub fn combinatorial_oracle(src: &PartitionInstance, kind: SourceKind) -> Result<bool> {
    src.validate()?;
    match kind {
        SourceKind::Partition => subset_sum_split(&src.a),
        SourceKind::ThreePartition => {
            let (m, target) = src.sets_and_target()?;
            if m > BACKTRACK_SUBSET_LIMIT {
                return Err(Error::SizeLimit(format!(
                    "backtracking oracle handles m <= {BACKTRACK_SUBSET_LIMIT}, got {m}"
                )));
            }
            let mut items = src.a.clone();
            items.sort_unstable_by(|a, b| b.cmp(a));
            let mut loads = vec![0u64; m];
            Ok(fill_subsets(&items, 0, &mut loads, target))
        }
    }
}

fn subset_sum_split(a: &[u64]) -> Result<bool> {
    let total: u64 = a.iter().sum();
    if total > SUBSET_SUM_LIMIT {
        return Err(Error::SizeLimit(format!(
            "sum {total} exceeds the subset-sum limit {SUBSET_SUM_LIMIT}"
        )));
    }
    if total % 2 == 1 {
        return Ok(false);
    }
    let half = (total / 2) as usize;
    let mut reachable = vec![false; half + 1];
    reachable[0] = true;
    for &v in a {
        let v = v as usize;
        for s in (v..=half).rev() {
            if reachable[s - v] {
                reachable[s] = true;
            }
        }
    }
    Ok(reachable[half])
}

fn fill_subsets(items: &[u64], next: usize, loads: &mut [u64], target: u64) -> bool {
    if next == items.len() {
        return loads.iter().all(|l| *l == target);
    }
    let v = items[next];
    for j in 0..loads.len() {
        if loads[j] + v > target || loads[..j].contains(&loads[j]) {
            continue;
        }
        loads[j] += v;
        let done = fill_subsets(items, next + 1, loads, target);
        loads[j] -= v;
        if done {
            return true;
        }
    }
    false
}
