//! `spnorm`: (s0,p)-norm adaptive tests on CSV data, Monte Carlo studies,
//! and a Hotelling T² baseline.
//!
//! Exit codes: 0 success (whatever the decision), 1 usage or I/O error,
//! 2 numerical failure (degenerate variance, singular matrices, ...).

mod input;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spnorm_core::{
    hotelling_test, run_adaptive_test, run_study, AdaptiveConfig, Exponent, Kernel, KernelFamily,
    Method, Model, ModelSpec, PairSet, Problem, ShiftSpec, StudyConfig,
};

use report::{T2Report, TestConfig, TestReport};

#[derive(Parser)]
#[command(
    name = "spnorm",
    version,
    about = "High-dimensional (s0,p)-norm tests with multiplier bootstrap calibration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One- or two-sample test on CSV data.
    Test(TestArgs),
    /// Size/power study on a simulation model.
    Simulate(SimulateArgs),
    /// Hotelling's T² two-sample test with its F-reference P-value.
    T2(T2Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Mean,
    Cov,
    Tau,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Mean => KernelFamily::Mean,
            KernelArg::Cov => KernelFamily::Covariance,
            KernelArg::Tau => KernelFamily::KendallTau,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PairsArg {
    /// Upper triangle including the diagonal.
    Upper,
    /// Strict upper triangle.
    Offdiag,
    /// First column against every other column.
    First,
}

impl From<PairsArg> for PairSet {
    fn from(p: PairsArg) -> Self {
        match p {
            PairsArg::Upper => PairSet::UpperWithDiagonal,
            PairsArg::Offdiag => PairSet::OffDiagonal,
            PairsArg::First => PairSet::FirstVersusRest,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lowcost,
    Doubleloop,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lowcost => Method::LowCost,
            MethodArg::Doubleloop => Method::DoubleLoop,
        }
    }
}

/// Bootstrap and decision settings shared by `test` and `simulate`.
#[derive(Args)]
struct BootstrapArgs {
    /// Exponent set, comma separated; `inf` for the max norm.
    #[arg(long = "p", default_value = "1,2,3,4,5,inf")]
    p: String,
    /// Outer bootstrap replicates.
    #[arg(long = "B", default_value_t = 300)]
    replicates: usize,
    /// Inner replicates for the double-loop method.
    #[arg(long = "L", default_value_t = 300)]
    inner: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "lowcost")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Use the unnormalized statistics.
    #[arg(long)]
    no_normalize: bool,
    /// Record wall-clock time in the report (makes reruns differ).
    #[arg(long)]
    timing: bool,
    /// Output file for the JSON report (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BootstrapArgs {
    fn config(&self, s0: Option<usize>) -> Result<AdaptiveConfig> {
        let cfg = AdaptiveConfig {
            p_set: Exponent::parse_list(&self.p)?,
            s0,
            replicates: self.replicates,
            inner_replicates: self.inner,
            alpha: self.alpha,
            normalize: !self.no_normalize,
            method: self.method.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TestArgs {
    /// First sample (rows are observations).
    #[arg(long)]
    x: PathBuf,
    /// Second sample; omit for a one-sample test.
    #[arg(long)]
    y: Option<PathBuf>,
    /// One-sample null value: `zeros`, `identity` (unit variances, zero
    /// covariances) or a CSV with one value per tested coordinate.
    #[arg(long)]
    null: Option<String>,
    #[arg(long, value_enum, default_value = "mean")]
    kernel: KernelArg,
    /// Entries tested by cov/tau (default: upper for cov, offdiag for tau).
    #[arg(long, value_enum)]
    pairs: Option<PairsArg>,
    /// Number of largest coordinates kept (default: round(sqrt(q))).
    #[arg(long)]
    s0: Option<usize>,
    #[command(flatten)]
    boot: BootstrapArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation model, 1-5.
    #[arg(long, default_value_t = 1)]
    model: u8,
    #[arg(long, default_value_t = 75)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    n1: usize,
    #[arg(long, default_value_t = 100)]
    n2: usize,
    /// Replications.
    #[arg(long = "R", default_value_t = 100)]
    replications: usize,
    /// Comma-separated s0 values, one table row each.
    #[arg(long, default_value = "5")]
    s0: String,
    /// Kernel; Models 1-4 use mean, Model 5 cov or tau.
    #[arg(long, value_enum, default_value = "mean")]
    kernel: KernelArg,
    /// Nonzero coordinates of the shift; 0 simulates the null.
    #[arg(long, default_value_t = 0)]
    shift_s: usize,
    #[arg(long, default_value_t = 0.0)]
    u1: f64,
    #[arg(long, default_value_t = 0.0)]
    u2: f64,
    /// Stiefel rank for Model 3 (default floor(d/5)).
    #[arg(long)]
    stiefel_rank: Option<usize>,
    /// Degrees of freedom for Models 4-5.
    #[arg(long, default_value_t = 5.0)]
    nu: f64,
    /// Also write the plain-text table here (`-` for stderr).
    #[arg(long)]
    table: Option<String>,
    #[command(flatten)]
    boot: BootstrapArgs,
}

#[derive(Args)]
struct T2Args {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(f)),
        None => Ok(f()),
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn null_vector(spec: Option<&str>, kernel: &Kernel) -> Result<Vec<f64>> {
    let q = kernel.output_dim();
    match spec.unwrap_or("zeros") {
        "zeros" => Ok(vec![0.0; q]),
        "identity" => match kernel.pairs() {
            Some(pairs) => Ok(pairs
                .iter()
                .map(|&(j, l)| if j == l { 1.0 } else { 0.0 })
                .collect()),
            None => bail!("--null identity needs a cov or tau kernel"),
        },
        path => {
            let u0 = input::read_vector(Path::new(path))?;
            if u0.len() != q {
                bail!(
                    "null vector has {} entries but the kernel tests {q} coordinates",
                    u0.len()
                );
            }
            Ok(u0)
        }
    }
}

fn cmd_test(args: TestArgs) -> Result<()> {
    let start = Instant::now();
    let x = input::read_sample(&args.x)?;
    let family: KernelFamily = args.kernel.into();
    let pair_set = match (family, args.pairs) {
        (KernelFamily::Mean, Some(_)) => bail!("--pairs applies to cov and tau kernels only"),
        (KernelFamily::Mean, None) => None,
        (KernelFamily::KendallTau, None) => Some(PairSet::OffDiagonal),
        (_, None) => Some(PairSet::UpperWithDiagonal),
        (_, Some(p)) => Some(p.into()),
    };
    let kernel = Kernel::builtin(
        family,
        x.d(),
        pair_set.unwrap_or(PairSet::UpperWithDiagonal),
    )?;
    let problem = match &args.y {
        Some(path) => {
            if args.null.is_some() {
                bail!("--null applies to one-sample tests only");
            }
            let y = input::read_sample(path)?;
            if y.d() != x.d() {
                bail!("x has {} columns but y has {}", x.d(), y.d());
            }
            Problem::TwoSample { x, y }
        }
        None => {
            let u0 = null_vector(args.null.as_deref(), &kernel)?;
            Problem::OneSample { x, u0 }
        }
    };
    let cfg = args.boot.config(args.s0)?;
    let seed = args.boot.seed;
    let outcome = with_threads(args.boot.threads, || {
        run_adaptive_test(&problem, &kernel, &cfg, seed)
    })??;
    let config = TestConfig {
        x: args.x.display().to_string(),
        y: args.y.as_ref().map(|p| p.display().to_string()),
        null: matches!(problem, Problem::OneSample { .. })
            .then(|| args.null.clone().unwrap_or_else(|| "zeros".into())),
        kernel: family,
        pairs: pair_set,
        s0: outcome.s0,
        p: spnorm_core::norms::dedup_exponents(&cfg.p_set),
        replicates: cfg.replicates,
        inner_replicates: outcome.inner_replicates,
        alpha: cfg.alpha,
        method: cfg.method,
        normalize: cfg.normalize,
    };
    let mut report = TestReport::new(config, outcome, seed);
    if args.boot.timing {
        report.runtime_ms = Some(elapsed_ms(start));
    }
    write_json(&report, args.boot.out.as_deref())
}

fn parse_s0_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("bad s0 value `{t}`"))
        })
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let model = Model::from_id(args.model)?;
    let mut spec = ModelSpec::new(model, args.d, args.boot.seed);
    spec.stiefel_rank = args.stiefel_rank;
    spec.nu = args.nu;
    let s0_list = parse_s0_list(&args.s0)?;
    let cfg = StudyConfig {
        model: spec,
        n1: args.n1,
        n2: args.n2,
        replications: args.replications,
        shift: ShiftSpec {
            s: args.shift_s,
            u1: args.u1,
            u2: args.u2,
        },
        kernel: args.kernel.into(),
        test: args.boot.config(s0_list.first().copied())?,
        s0_list,
        seed: args.boot.seed,
    };
    let mut result = with_threads(args.boot.threads, || run_study(&cfg))??;
    if args.boot.timing {
        result.runtime_ms = Some(elapsed_ms(start));
    }
    match args.table.as_deref() {
        Some("-") => eprint!("{}", result.to_table()),
        Some(path) => std::fs::write(path, result.to_table())
            .with_context(|| format!("cannot write {path}"))?,
        None => {}
    }
    write_json(&result, args.boot.out.as_deref())
}

fn cmd_t2(args: T2Args) -> Result<()> {
    let x = input::read_sample(&args.x)?;
    let y = input::read_sample(&args.y)?;
    if x.d() != y.d() {
        bail!("x has {} columns but y has {}", x.d(), y.d());
    }
    let report = T2Report {
        x: args.x.display().to_string(),
        y: args.y.display().to_string(),
        result: hotelling_test(&x, &y)?,
    };
    write_json(&report, args.out.as_deref())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<spnorm_core::Error>() {
        Some(e) if e.is_numeric() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::T2(a) => cmd_t2(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
