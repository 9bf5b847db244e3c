//! Command-line front end.
//!
//! Results go to stdout (or `--out`) as JSON, except the recovery
//! experiment, which writes CSV. The resolved configuration is logged to
//! stderr as one JSON line. Exit codes: 0 success, 1 usage, 2 invalid
//! input, 3 numerical failure, 4 ambiguous decision.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::asymptotics::{
    limit_check, recovery_experiment, standardized_bounds, BoundRule, ExperimentConfig, LimitKind,
};
use crate::bounds::{recommend_lambda, sparsity_bounds, LambdaRule};
use crate::error::{Error, Result};
use crate::model::{parse_instance, Instance};
use crate::reduction::{
    combinatorial_oracle, decide_with, partition_gadget, rescale_lambda,
    three_partition_gadget_with, DecideOptions, PartitionInstance, ReductionInstance,
    RhsConvention, SourceKind, BRUTE_FORCE_LIMIT,
};
use crate::scalar::scalar_min;
use crate::solver::{certify, global_solve, local_solve, LocalOptions, SolveOptions, DEFAULT_CERTIFY_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_AMBIGUOUS: i32 = 4;

#[derive(Debug, Parser, Serialize)]
#[command(name = "lpreg", version, about = "Sparse least squares with an Lp quasi-norm penalty")]
pub struct Cli {
    /// Seed for randomised starts and experiments.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tolerance for the first- and second-order certification checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Minimiser of |1-z|^q + ½(|z|+ε)^p.
    Scalar {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Sparsity bounds and the recommended λ interval for support size k.
    Bounds {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        k: usize,
        /// A feasible point (A x_c = b) for the nonzero guarantee.
        #[arg(long)]
        xc: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RuleArg::Global)]
        rule: RuleArg,
    },
    /// Global minimum by support enumeration, or a local minimiser from a start point.
    Solve(SolveArgs),
    /// First- and second-order checks plus the strict-improvement probe.
    Certify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        x: PathBuf,
    },
    /// Build a gadget instance from a partition or 3-partition source.
    Reduce {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = RhsArg::Scaled)]
        rhs: RhsArg,
    },
    /// Decide a gadget through its optimum and compare with the oracle.
    Decide {
        #[arg(long)]
        reduction: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = BRUTE_FORCE_LIMIT)]
        brute_force_limit: usize,
    },
    /// Combinatorial ground truth.
    Oracle {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Transform an instance to λ = 1/2.
    Rescale {
        #[arg(long)]
        instance: PathBuf,
        /// Point to map into the rescaled coordinates.
        #[arg(long)]
        x: Option<PathBuf>,
    },
    /// Bound scaling in m and support-recovery experiments.
    Asymptotics {
        #[command(subcommand)]
        action: AsymptoticsCommand,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Global)]
    pub mode: ModeArg,
    /// Largest support enumerated in global mode.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Start point for local mode (default: the least-squares solution).
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// Smoothing levels for local mode, e.g. 0.1,0.01.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Vec<f64>,
    /// Report the optimum of every enumerated support.
    #[arg(long)]
    pub keep_all: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SourceArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub numbers: Vec<u64>,
    /// Number of subsets (3-partition).
    #[arg(long)]
    pub m: Option<usize>,
    /// Subset sum (3-partition; default Σa/m).
    #[arg(long = "B")]
    pub target: Option<u64>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticsCommand {
    /// Standardized β(k), γ(k).
    Bounds {
        #[arg(long)]
        config: PathBuf,
    },
    /// λ_m scaled by m^{-p/2} or m^{-1/2} over a grid of m.
    Limits {
        #[arg(long)]
        config: PathBuf,
    },
    /// Support recovery with brute-force solves; writes CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleArg {
    Global,
    Local,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Global,
    Local,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum KindArg {
    #[value(name = "partition")]
    #[serde(rename = "partition")]
    Partition,
    #[value(name = "3partition")]
    #[serde(rename = "3partition")]
    ThreePartition,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsArg {
    Scaled,
    Literal,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsConfig {
    m: u64,
    k: usize,
    norm_b: f64,
    p: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsConfig {
    kind: LimitKind,
    p: f64,
    m_grid: Vec<u64>,
    rule: BoundRule,
    k: usize,
    norm_b: f64,
}

/// A point file holds either a bare array or an object with an `x` field.
#[derive(Deserialize)]
#[serde(untagged)]
enum PointFile {
    Bare(Vec<f64>),
    Wrapped { x: Vec<f64> },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } | Error::CapExceeded { .. } => EXIT_NUMERICAL,
        Error::Ambiguous(_) => EXIT_AMBIGUOUS,
        _ => EXIT_VALIDATION,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn read_instance(path: &Path) -> Result<Instance> {
    parse_instance(&read(path)?)
}

fn read_point(path: &Path) -> Result<Vec<f64>> {
    Ok(match serde_json::from_str::<PointFile>(&read(path)?)? {
        PointFile::Bare(x) | PointFile::Wrapped { x } => x,
    })
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read(path)?)?)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

fn source_of(args: &SourceArgs) -> Result<PartitionInstance> {
    match args.kind {
        KindArg::Partition => {
            if args.m.is_some() || args.target.is_some() {
                return Err(Error::InvalidParameter(
                    "--m and --B apply to 3partition only".into(),
                ));
            }
            PartitionInstance::partition(args.numbers.clone())
        }
        KindArg::ThreePartition => {
            let m = args
                .m
                .ok_or_else(|| Error::InvalidParameter("3partition requires --m".into()))?;
            match args.target {
                Some(target) => PartitionInstance::three_partition(args.numbers.clone(), m, target),
                None => PartitionInstance::three_partition_auto(args.numbers.clone(), m),
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<String> {
    let seed = cli.seed.unwrap_or(0);
    let tol = cli.tol.unwrap_or(DEFAULT_CERTIFY_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("--tol {tol} must be > 0")));
    }
    let solve_opts = SolveOptions {
        seed,
        certify_tol: tol,
        ..Default::default()
    };
    match &cli.command {
        Command::Scalar { p, q, epsilon } => Ok(pretty(&scalar_min(*p, *q, *epsilon)?)),
        Command::Bounds { instance, k, xc, rule } => {
            let inst = read_instance(instance)?;
            let xc = xc.as_deref().map(read_point).transpose()?;
            let rule = match rule {
                RuleArg::Global => LambdaRule::Global,
                RuleArg::Local => LambdaRule::Local,
            };
            let bounds = sparsity_bounds(&inst, *k)?;
            let recommendation = recommend_lambda(&inst, *k, rule, xc.as_deref())?;
            Ok(pretty(&json!({ "bounds": bounds, "recommendation": recommendation })))
        }
        Command::Solve(args) => {
            let inst = read_instance(&args.instance)?;
            let result = match args.mode {
                ModeArg::Global => {
                    if args.x0.is_some() || !args.schedule.is_empty() {
                        return Err(Error::InvalidParameter(
                            "--x0 and --schedule apply to local mode only".into(),
                        ));
                    }
                    let opts = SolveOptions {
                        keep_all: args.keep_all,
                        ..solve_opts
                    };
                    global_solve(&inst, args.kmax, &opts)?
                }
                ModeArg::Local => {
                    if args.kmax.is_some() || args.keep_all {
                        return Err(Error::InvalidParameter(
                            "--kmax and --keep-all apply to global mode only".into(),
                        ));
                    }
                    let x0 = match &args.x0 {
                        Some(path) => read_point(path)?,
                        None => crate::numeric::min_norm_lstsq(&inst.a, &inst.b)
                            .0
                            .iter()
                            .copied()
                            .collect(),
                    };
                    let opts = LocalOptions {
                        schedule: args.schedule.clone(),
                        certify_tol: tol,
                        ..Default::default()
                    };
                    local_solve(&inst, &x0, &opts)?
                }
            };
            Ok(pretty(&result))
        }
        Command::Certify { instance, x } => {
            let inst = read_instance(instance)?;
            let x = read_point(x)?;
            Ok(pretty(&certify(&inst, &x, tol)?))
        }
        Command::Reduce { source, p, q, epsilon, rhs } => {
            let src = source_of(source)?;
            let red = match source.kind {
                KindArg::Partition => {
                    if *epsilon != 0.0 {
                        return Err(Error::InvalidParameter(
                            "the partition gadget has no smoothed form".into(),
                        ));
                    }
                    partition_gadget(&src, *p, *q)?
                }
                KindArg::ThreePartition => {
                    let rhs = match rhs {
                        RhsArg::Scaled => RhsConvention::Scaled,
                        RhsArg::Literal => RhsConvention::Literal,
                    };
                    three_partition_gadget_with(&src, *p, *q, *epsilon, rhs)?
                }
            };
            Ok(red.to_json() + "\n")
        }
        Command::Decide { reduction, delta, brute_force_limit } => {
            let red = ReductionInstance::from_json(&read(reduction)?)?;
            let opts = DecideOptions {
                delta: *delta,
                brute_force_limit: *brute_force_limit,
                solve: solve_opts,
                ..Default::default()
            };
            let decision = decide_with(&red, &opts)?;
            let oracle = match combinatorial_oracle(&red.source, red.source.kind()) {
                Ok(answer) => Some(answer),
                Err(Error::SizeLimit(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(pretty(&json!({
                "decision": decision,
                "oracle": oracle,
                "agreement": oracle.map(|o| o == decision.decision),
            })))
        }
        Command::Oracle { source } => {
            let src = source_of(source)?;
            let kind = match source.kind {
                KindArg::Partition => SourceKind::Partition,
                KindArg::ThreePartition => SourceKind::ThreePartition,
            };
            Ok(pretty(&json!({
                "kind": kind,
                "source": src,
                "answer": combinatorial_oracle(&src, kind)?,
            })))
        }
        Command::Rescale { instance, x } => {
            let inst = read_instance(instance)?;
            let r = rescale_lambda(&inst)?;
            let x_tilde = match x {
                Some(path) => {
                    let x = read_point(path)?;
                    if x.len() != inst.n() {
                        return Err(Error::Dimension(format!(
                            "x has length {}, instance has n = {}",
                            x.len(),
                            inst.n()
                        )));
                    }
                    Some(r.forward(&x))
                }
                None => None,
            };
            Ok(pretty(&json!({
                "scale": r.scale,
                "instance": r.instance.to_doc(),
                "x_tilde": x_tilde,
            })))
        }
        Command::Asymptotics { action } => match action {
            AsymptoticsCommand::Bounds { config } => {
                let c: BoundsConfig = read_config(config)?;
                Ok(pretty(&standardized_bounds(c.m, c.k, c.norm_b, c.p)?))
            }
            AsymptoticsCommand::Limits { config } => {
                let c: LimitsConfig = read_config(config)?;
                Ok(pretty(&limit_check(c.kind, c.p, &c.m_grid, c.rule, c.k, c.norm_b)?))
            }
            AsymptoticsCommand::Experiment { config } => {
                let mut c: ExperimentConfig = read_config(config)?;
                if let Some(s) = cli.seed {
                    c.seed = s;
                }
                Ok(recovery_experiment(&c)?.to_csv())
            }
        },
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
                let _ = writeln!(stderr, "error: usage: {first}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return code;
        }
    };
    let _ = writeln!(
        stderr,
        "config: {}",
        serde_json::to_string(&cli).expect("config serializes")
    );
    let outcome = match cli.threads {
        Some(0) => Err(Error::InvalidParameter("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| execute(&cli))),
        None => execute(&cli),
    };
    let written = outcome.and_then(|text| match &cli.out {
        Some(path) => fs::write(path, text).map_err(Error::from),
        None => stdout.write_all(text.as_bytes()).map_err(Error::from),
    });
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error: {}: {msg}", e.kind());
            exit_code(&e)
        }
    }
}
