//! `gcs`: command line front end for the generative compressed sensing
//! library.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 runtime error,
//! 3 a verification check failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gcs_core::coherence::{coherence_exact_pieces, coherence_heuristic, CoherenceVector};
use gcs_core::experiment::{
    parse_config_file, read_results, run_phase_transition, write_outputs, PhaseResults,
};
use gcs_core::generative_model::{
    enumerate_pieces, lowpass_gaussian_init, random_gaussian_init, EnumerationMode,
};
use gcs_core::io;
use gcs_core::recovery::{complex_gaussian_noise, measure, recover, MeasurementSet};
use gcs_core::rng;
use gcs_core::sampling::{
    build_preconditioner, draw_block_plan, draw_plan, optimal_probabilities, ProbabilityVector,
    SamplingPlan,
};
use gcs_core::transform::{TransformSpec, UnitaryOperator};
use gcs_core::verification::{
    isotropy_check, rip_deviation_cone, rip_deviation_subspace, theorem1_end_to_end,
    CoherenceSource, ConeMethod, SchemeKind, Theorem1Config, RIP_THRESHOLD,
};
use gcs_core::{Network, RecoveryConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gcs",
    version,
    about = "Model-adapted subsampled unitary measurements with ReLU generative priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random network in GCSNET format, optionally with a range signal.
    GenNet(GenNetArgs),
    /// Estimate local coherences and write `index,alpha`.
    Coherence(CoherenceArgs),
    /// Draw a sampling plan and write `i,index`.
    Sample(SampleArgs),
    /// Take subsampled measurements of a signal and write `i,index,re,im`.
    Measure(MeasureArgs),
    /// Recover a signal from measurements in the latent space of a network.
    Recover(RecoverArgs),
    /// Empirical checks of the recovery guarantee's ingredients.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Run a uniform vs adapted phase-transition sweep from a config file.
    Experiment(ExperimentArgs),
    /// Re-render plots from a results file.
    Plot(PlotArgs),
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// RIP deviation of a plan on a subspace (`--basis`) or a network's cone (`--net`).
    Rip(RipArgs),
    /// Isotropy and boundedness of the sampled rows on a subspace.
    Isotropy(IsotropyArgs),
    /// End-to-end check: coherence, sample complexity, RIP rate and error bound.
    Theorem1(Theorem1Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Gaussian,
    Lowpass,
}

#[derive(Args)]
struct GenNetArgs {
    /// Layer widths k, k_1, ..., n.
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    #[arg(long, value_enum, default_value = "gaussian")]
    init: Init,
    /// Number of low DFT rows the range may touch (lowpass init).
    #[arg(long, default_value_t = 8)]
    lowpass_rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write G(z) for a standard Gaussian code z.
    #[arg(long)]
    signal_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    signal_seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoherenceMode {
    Heuristic,
    Exact,
}

#[derive(Args)]
struct CoherenceArgs {
    #[arg(long)]
    net: PathBuf,
    /// identity | dft1d | dft2d:HxW | hadamard | dense:FILE
    #[arg(long, default_value = "dft1d")]
    transform: TransformSpec,
    #[arg(long, value_enum, default_value = "heuristic")]
    method: CoherenceMode,
    #[arg(long, default_value_t = 1000)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// A probability vector given as `uniform`, `adapted` or a CSV file.
#[derive(Clone, Debug)]
enum PSpec {
    Uniform,
    Adapted,
    File(PathBuf),
}

impl std::str::FromStr for PSpec {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "uniform" => PSpec::Uniform,
            "adapted" => PSpec::Adapted,
            _ => PSpec::File(PathBuf::from(s)),
        })
    }
}

#[derive(Args)]
struct ProbArgs {
    /// Sampling distribution: `uniform`, `adapted` (needs --coherence) or an `index,p` file.
    #[arg(long = "p")]
    p: PSpec,
    /// Coherence file for `--p adapted`.
    #[arg(long)]
    coherence: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    prob: ProbArgs,
    /// Ambient dimension, needed with `--p uniform`.
    #[arg(long)]
    n: Option<usize>,
    /// Number of measurements (per block when `--blocks` > 1).
    #[arg(long)]
    m: usize,
    /// Sample independently within this many equal index blocks (outside the theory).
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the probabilities of the plan as `index,p`.
    #[arg(long)]
    p_out: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    /// Signal as whitespace separated floats.
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value = "dft1d")]
    transform: TransformSpec,
    /// Standard deviation of circular complex Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimArgs {
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.003)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    /// Stop a restart once the objective falls below this value.
    #[arg(long)]
    early_stop: Option<f64>,
}

impl OptimArgs {
    fn config(&self, seed: u64, preconditioned: bool) -> RecoveryConfig {
        RecoveryConfig {
            restarts: self.restarts,
            iterations: self.iterations,
            lr: self.lr,
            weight_decay: self.weight_decay,
            early_stop: self.early_stop,
            preconditioned,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    measurements: PathBuf,
    #[command(flatten)]
    prob: ProbArgs,
    #[arg(long, default_value = "dft1d")]
    transform: TransformSpec,
    #[command(flatten)]
    optim: OptimArgs,
    /// Use the plain least-squares objective without the preconditioner.
    #[arg(long)]
    no_precondition: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the recovered signal here.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth signal, for reporting the relative error.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConeMode {
    Exact,
    Sampled,
}

#[derive(Args)]
struct RipArgs {
    #[arg(long)]
    plan: PathBuf,
    #[command(flatten)]
    prob: ProbArgs,
    #[arg(long, default_value = "dft1d")]
    transform: TransformSpec,
    /// Orthonormal basis of a subspace, GCSMAT file.
    #[arg(long, conflicts_with = "net", required_unless_present = "net")]
    basis: Option<PathBuf>,
    /// Network whose difference cone is checked.
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    method: ConeMode,
    #[arg(long, default_value_t = 0)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = RIP_THRESHOLD)]
    threshold: f64,
    /// CSV of per-evaluation deviations.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IsotropyArgs {
    #[arg(long)]
    basis: PathBuf,
    #[command(flatten)]
    prob: ProbArgs,
    #[arg(long, default_value = "dft1d")]
    transform: TransformSpec,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Uniform,
    Adapted,
}

#[derive(Args)]
struct Theorem1Args {
    #[arg(long)]
    net: PathBuf,
    #[arg(long, default_value = "dft1d")]
    transform: TransformSpec,
    /// Constant in the sample-complexity bound.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    method: CoherenceMode,
    #[arg(long, default_value_t = 1000)]
    batch: usize,
    #[arg(long, default_value_t = 1000)]
    probes: usize,
    #[arg(long, value_enum, default_value = "adapted")]
    scheme: SchemeArg,
    /// Use this many measurements instead of the bound.
    #[arg(long)]
    m: Option<usize>,
    /// Skip the recoveries and check only the RIP rate.
    #[arg(long)]
    no_bound: bool,
    #[arg(long, default_value_t = RIP_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// `results.csv` written by `experiment`.
    #[arg(long)]
    results: PathBuf,
    /// Optional `index,alpha` file for the coherence plot.
    #[arg(long)]
    coherence: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Error caused by the invocation itself rather than the computation.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<gcs_core::Error>() {
        Some(
            gcs_core::Error::Config(_)
            | gcs_core::Error::Parse { .. }
            | gcs_core::Error::InvalidArgument(_)
            | gcs_core::Error::InvalidWidths(_),
        ) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads().and_then(|_| run(cli.command));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("GCS_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| usage(format!("GCS_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::GenNet(a) => gen_net(a),
        Command::Coherence(a) => coherence(a),
        Command::Sample(a) => sample(a),
        Command::Measure(a) => measure_cmd(a),
        Command::Recover(a) => recover_cmd(a),
        Command::Verify(VerifyCommand::Rip(a)) => verify_rip(a),
        Command::Verify(VerifyCommand::Isotropy(a)) => verify_isotropy(a),
        Command::Verify(VerifyCommand::Theorem1(a)) => verify_theorem1(a),
        Command::Experiment(a) => experiment(a),
        Command::Plot(a) => plot(a),
    }
}

fn load_net(path: &Path) -> Result<Network> {
    io::read_network(path).with_context(|| format!("reading network {}", path.display()))
}

fn load_coherence(path: &Path) -> Result<CoherenceVector<f64>> {
    let r = io::open(path).with_context(|| format!("opening {}", path.display()))?;
    io::read_coherence(r).with_context(|| format!("reading coherences {}", path.display()))
}

fn resolve_p(prob: &ProbArgs, n: Option<usize>) -> Result<ProbabilityVector<f64>> {
    let p = match &prob.p {
        PSpec::Uniform => {
            let n = match (n, &prob.coherence) {
                (Some(n), _) => n,
                (None, Some(c)) => load_coherence(c)?.len(),
                (None, None) => {
                    return Err(usage(
                        "--p uniform needs the dimension (--n or --coherence)",
                    ))
                }
            };
            ProbabilityVector::uniform(n)?
        }
        PSpec::Adapted => {
            let c = prob
                .coherence
                .as_ref()
                .ok_or_else(|| usage("--p adapted needs --coherence FILE"))?;
            optimal_probabilities(&load_coherence(c)?)?
        }
        PSpec::File(path) => {
            let r = io::open(path).with_context(|| format!("opening {}", path.display()))?;
            io::read_probabilities(r)
                .with_context(|| format!("reading probabilities {}", path.display()))?
        }
    };
    if let Some(n) = n {
        if p.len() != n {
            return Err(usage(format!(
                "probability vector has length {}, expected {n}",
                p.len()
            )));
        }
    }
    Ok(p)
}

fn load_plan(path: &Path, p: ProbabilityVector<f64>) -> Result<SamplingPlan<f64>> {
    let r = io::open(path).with_context(|| format!("opening {}", path.display()))?;
    let idx =
        io::read_plan_indices(r).with_context(|| format!("reading plan {}", path.display()))?;
    Ok(SamplingPlan::from_indices(idx, p, 0)?)
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = io::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn check_result(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn gen_net(a: GenNetArgs) -> Result<ExitCode> {
    let n = *a.widths.last().ok_or_else(|| usage("--widths is empty"))?;
    let net: Network = match a.init {
        Init::Gaussian => random_gaussian_init(&a.widths, n, a.seed)?,
        Init::Lowpass => lowpass_gaussian_init(&a.widths, n, a.lowpass_rows, a.seed)?,
    };
    io::save_network(&net, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.signal_out {
        let mut r = rng::stream(a.signal_seed, 0);
        let z: Vec<f64> = rng::gaussian_vec(&mut r, net.latent_dim());
        io::save_vector(&net.forward(&z)?, path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn coherence(a: CoherenceArgs) -> Result<ExitCode> {
    let net = load_net(&a.net)?;
    let op: UnitaryOperator<f64> = a.transform.build(net.output_dim())?;
    let alpha = match a.method {
        CoherenceMode::Heuristic => coherence_heuristic(&net, &op, a.batch, a.seed)?,
        CoherenceMode::Exact => {
            let pieces = enumerate_pieces(&net, EnumerationMode::Exhaustive)?;
            coherence_exact_pieces(&op, &pieces)?
        }
    };
    io::write_coherence(&alpha, io::create(&a.out)?)?;
    println!("|alpha|_2 = {}", alpha.norm());
    Ok(ExitCode::SUCCESS)
}

fn sample(a: SampleArgs) -> Result<ExitCode> {
    let p = resolve_p(&a.prob, a.n)?;
    let plan = if a.blocks > 1 {
        draw_block_plan(&p, a.blocks, a.m, a.seed)?
    } else {
        draw_plan(&p, a.m, a.seed)?
    };
    io::write_plan(&plan, io::create(&a.out)?)?;
    if let Some(path) = &a.p_out {
        io::write_probabilities(plan.probabilities(), io::create(path)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn measure_cmd(a: MeasureArgs) -> Result<ExitCode> {
    if !(a.noise >= 0.0) || !a.noise.is_finite() {
        return Err(usage(format!(
            "--noise must be a nonnegative number, got {}",
            a.noise
        )));
    }
    let x0: Vec<f64> =
        io::read_vector(&a.signal).with_context(|| format!("reading {}", a.signal.display()))?;
    let n = x0.len();
    let op: UnitaryOperator<f64> = a.transform.build(n)?;
    // Measurements do not depend on p; a uniform vector keeps the plan valid.
    let plan = load_plan(&a.plan, ProbabilityVector::uniform(n)?)?;
    let eta = complex_gaussian_noise(plan.m(), a.noise, a.seed);
    let meas = measure(&x0, &plan, &op, &eta)?;
    io::write_measurements(&meas, io::create(&a.out)?)?;
    Ok(ExitCode::SUCCESS)
}

fn recover_cmd(a: RecoverArgs) -> Result<ExitCode> {
    let net = load_net(&a.net)?;
    let n = net.output_dim();
    let op: UnitaryOperator<f64> = a.transform.build(n)?;
    let p = resolve_p(&a.prob, Some(n))?;
    let r = io::open(&a.measurements)
        .with_context(|| format!("opening {}", a.measurements.display()))?;
    let (idx, b) = io::read_measurements(r)?;
    let plan = SamplingPlan::from_indices(idx, p, 0)?;
    let precond = build_preconditioner(&plan)?;
    let meas = MeasurementSet::from_parts(b, plan)?;
    let res = recover(
        &net,
        &op,
        &meas,
        &precond,
        &a.optim.config(a.seed, !a.no_precondition),
    )?;
    io::save_vector(&res.x_hat, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("eps_hat = {:e}", res.eps_hat);
    println!("best restart = {}", res.best_restart + 1);
    if let Some(t) = &a.truth {
        let x0: Vec<f64> = io::read_vector(t)?;
        let rre = res.rre(&x0)?;
        println!("rre = {rre:e}");
        println!("success = {}", rre < gcs_core::experiment::SUCCESS_RRE);
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_rip(a: RipArgs) -> Result<ExitCode> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(usage(format!(
            "--threshold must lie in (0, 1), got {}",
            a.threshold
        )));
    }
    let net = a.net.as_deref().map(load_net).transpose()?;
    let basis = a
        .basis
        .as_deref()
        .map(|b| {
            io::read_matrix::<f64>(b, "GCSMAT")
                .with_context(|| format!("reading basis {}", b.display()))
        })
        .transpose()?;
    let n = match (&net, &basis) {
        (Some(net), _) => net.output_dim(),
        (None, Some(b)) => b.rows(),
        (None, None) => return Err(usage("give --basis or --net")),
    };
    let op: UnitaryOperator<f64> = a.transform.build(n)?;
    let plan = load_plan(&a.plan, resolve_p(&a.prob, Some(n))?)?;
    let precond = build_preconditioner(&plan)?;
    let mut report = match (&net, &basis) {
        (_, Some(b)) => rip_deviation_subspace(&plan, &precond, &op, b, a.probes, a.seed)?,
        (Some(net), None) => {
            let pieces;
            let method = match a.method {
                ConeMode::Exact => {
                    pieces = enumerate_pieces(net, EnumerationMode::Exhaustive)?;
                    ConeMethod::Exact(&pieces)
                }
                ConeMode::Sampled => {
                    if a.probes < 2 {
                        return Err(usage("--method sampled needs --probes of at least 2"));
                    }
                    ConeMethod::Sampled {
                        probes: a.probes,
                        seed: a.seed,
                    }
                }
            };
            rip_deviation_cone(&plan, &precond, &op, net, method)?
        }
        (None, None) => unreachable!(),
    };
    report.threshold = a.threshold;
    report.passed = report.estimate <= a.threshold;
    println!("{report}");
    if let Some(out) = &a.out {
        write_csv(
            out,
            &["evaluation", "deviation"],
            report
                .deviations
                .iter()
                .enumerate()
                .map(|(i, d)| vec![(i + 1).to_string(), format!("{d:.16e}")]),
        )?;
    }
    Ok(check_result(report.passed))
}

fn verify_isotropy(a: IsotropyArgs) -> Result<ExitCode> {
    let basis = io::read_matrix::<f64>(&a.basis, "GCSMAT")
        .with_context(|| format!("reading basis {}", a.basis.display()))?;
    let n = basis.rows();
    let op: UnitaryOperator<f64> = a.transform.build(n)?;
    let p = resolve_p(&a.prob, Some(n))?;
    let report = isotropy_check(&p, &op, &basis, a.samples, a.seed)?;
    println!("{report}");
    if let Some(out) = &a.out {
        write_csv(
            out,
            &[
                "samples",
                "mu",
                "max_norm",
                "norm_violations",
                "distance",
                "tolerance",
                "passed",
            ],
            [vec![
                report.samples.to_string(),
                format!("{:.16e}", report.mu),
                format!("{:.16e}", report.max_norm),
                report.norm_violations.to_string(),
                format!("{:.16e}", report.distance),
                format!("{:.16e}", report.tolerance),
                u8::from(report.passed).to_string(),
            ]],
        )?;
    }
    Ok(check_result(report.passed))
}

fn verify_theorem1(a: Theorem1Args) -> Result<ExitCode> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(usage(format!(
            "--threshold must lie in (0, 1), got {}",
            a.threshold
        )));
    }
    let net = load_net(&a.net)?;
    let op: UnitaryOperator<f64> = a.transform.build(net.output_dim())?;
    let cfg = Theorem1Config {
        c: a.c,
        eps: a.eps,
        trials: a.trials,
        seed: a.seed,
        rip_threshold: a.threshold,
        coherence: match a.method {
            CoherenceMode::Exact => CoherenceSource::ExactPieces,
            CoherenceMode::Heuristic => CoherenceSource::Heuristic {
                batch: a.batch,
                probes: a.probes,
            },
        },
        scheme: match a.scheme {
            SchemeArg::Uniform => SchemeKind::Uniform,
            SchemeArg::Adapted => SchemeKind::Adapted,
        },
        m: a.m,
        check_bound: !a.no_bound,
        recovery: a.optim.config(a.seed, true),
    };
    let report = theorem1_end_to_end(&net, &op, &cfg)?;
    println!("{report}");
    if let Some(out) = &a.out {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        write_csv(
            out,
            &[
                "trial",
                "deviation",
                "rip_passed",
                "error",
                "rhs",
                "bound_holds",
            ],
            report.trials.iter().map(|t| {
                vec![
                    (t.trial + 1).to_string(),
                    format!("{:.16e}", t.deviation),
                    u8::from(t.rip_passed).to_string(),
                    fmt_opt(t.bound.map(|b| b.error)),
                    fmt_opt(t.bound.map(|b| b.rhs)),
                    t.bound
                        .map(|b| u8::from(b.holds).to_string())
                        .unwrap_or_default(),
                ]
            }),
        )?;
    }
    Ok(check_result(report.passed))
}

fn experiment(a: ExperimentArgs) -> Result<ExitCode> {
    let mut cfg = parse_config_file(&a.config)?;
    if let Some(out) = a.out {
        cfg.output_dir = out;
    }
    let results = run_phase_transition(&cfg)?;
    let written = write_outputs(&results, &cfg.output_dir)?;
    println!("scheme,m,trials,successes,success_rate,median_rre,mean_rre");
    for s in results.summary() {
        println!(
            "{},{},{},{},{:.4},{:.3e},{:.3e}",
            s.scheme, s.m, s.trials, s.successes, s.success_rate, s.median_rre, s.mean_rre
        );
    }
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn plot(a: PlotArgs) -> Result<ExitCode> {
    let r = io::open(&a.results).with_context(|| format!("opening {}", a.results.display()))?;
    let rows = read_results(r).with_context(|| format!("reading {}", a.results.display()))?;
    let mut schemes: Vec<String> = Vec::new();
    for row in &rows {
        if !schemes.contains(&row.scheme) {
            schemes.push(row.scheme.clone());
        }
    }
    let coherence = a.coherence.as_deref().map(load_coherence).transpose()?;
    let results = PhaseResults {
        rows,
        schemes,
        coherence,
    };
    for path in gcs_core::experiment::emit_plots(&results, &a.out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
