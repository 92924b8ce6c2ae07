//! Command-line front end: certificate synthesis and verification, recovery
//! routines, incoherence reports and the desk-scale experiment harness.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blockcert::blockmodel::{BlockNorm, Exponent, RepresentationStructure};
use blockcert::conditions::{mutual_block_incoherence, verify_certificate, Certificate, Verification};
use blockcert::harness::{
    build_contrasts, gen_matrix, run_ratings_with, run_sigma_sweep_with, run_table2, stream_rng, write_ratings_csv,
    write_sweep_csv, write_table1_csv, write_table2_csv, ContrastName, ExperimentConfig, MatrixType, SparsityMode,
};
use blockcert::io::{load_matrix, save_matrix_csv};
use blockcert::optim::SolverOptions;
use blockcert::recovery::{
    error_bound, group_lasso, lasso_lambdas, nebmp, recover_penalized_with, recover_regular_with, write_nebmp_log_csv,
    BoundVariant, NebmpParams, Observation, RecoveryResult, Routine,
};
use blockcert::synthesis::{max_certifiable_s, rho_epsilon, synthesize_kappa, NoiseModel, SynthesizedContrast};
use blockcert::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "blockcert", version, about = "Verifiable block-sparse recovery")]
struct Cli {
    /// seed of the random generators
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// solver tolerance; for `verify`, the acceptance threshold
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// directory receiving every output file
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize contrast matrices and their certificates
    Synth(SynthArgs),
    /// Re-check a certificate against a sensing matrix
    Verify(VerifyArgs),
    /// Recover a signal from observations
    Recover(RecoverArgs),
    /// Run the block matching pursuit and write its iteration log
    Nebmp(NebmpArgs),
    /// Report incoherence parameters of a sensing matrix
    Incoherence(IncoherenceArgs),
    /// Run the ratings protocol and the noise sweep on random instances
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct StructureArgs {
    /// uniform block size
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// explicit block sizes, e.g. `2,2,4` (overrides --d)
    #[arg(long, value_delimiter = ',')]
    block_dims: Option<Vec<usize>>,
    /// block norm: 1, 2 or inf
    #[arg(long, default_value = "inf")]
    r: BlockNorm,
    /// representation matrix B (identity when omitted)
    #[arg(long)]
    b: Option<PathBuf>,
}

impl StructureArgs {
    fn structure(&self, n: usize) -> Result<RepresentationStructure> {
        let b = self.b.as_deref().map(load_matrix).transpose()?;
        let rows = b.as_ref().map_or(n, DMatrix::nrows);
        let dims = match &self.block_dims {
            Some(dims) => dims.clone(),
            None => {
                if self.d == 0 || rows % self.d != 0 {
                    return Err(Error::InvalidArgument(format!("block size {} does not divide {rows}", self.d)));
                }
                vec![self.d; rows / self.d]
            }
        };
        let norms = vec![self.r; dims.len()];
        match b {
            Some(b) => RepresentationStructure::new(b, dims, norms),
            None => RepresentationStructure::identity(dims, self.r),
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// sensing matrix A (.csv or .json)
    #[arg(long)]
    a: PathBuf,
    #[command(flatten)]
    structure: StructureArgs,
    /// single sparsity level; scans s = 1, 2, … when omitted
    #[arg(long)]
    s: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// certificate JSON
    #[arg(long)]
    cert: PathBuf,
    #[arg(long)]
    a: PathBuf,
    /// representation matrix B (identity when omitted)
    #[arg(long)]
    b: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RoutineArg {
    Regular,
    Penalized,
    GroupLasso,
}

#[derive(Args, Debug)]
struct ObservationArgs {
    /// observation vector y
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    a: PathBuf,
    #[command(flatten)]
    structure: StructureArgs,
    /// white-noise level; enables the default `ρ` and the noise model
    #[arg(long)]
    sigma: Option<f64>,
    /// confidence parameter of `ρ`
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
}

impl ObservationArgs {
    fn load(&self) -> Result<Observation> {
        let a = load_matrix(&self.a)?;
        let y = load_vector(&self.y)?;
        let rs = self.structure.structure(a.ncols())?;
        let noise = self.sigma.map(|s| NoiseModel::gaussian(a.nrows(), s, self.epsilon)).transpose()?;
        Observation::new(y, a, rs, noise)
    }
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[command(flatten)]
    obs: ObservationArgs,
    /// contrast matrix H (required except for the group Lasso)
    #[arg(long)]
    h: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RoutineArg::Regular)]
    routine: RoutineArg,
    /// fit tolerance of the regular routine (default `ρ_ε` if --sigma is set, else 0)
    #[arg(long)]
    rho: Option<f64>,
    /// penalty of the penalized routine (default 2s)
    #[arg(long)]
    lambda: Option<f64>,
    /// sparsity level used for the default penalty and the error bound
    #[arg(long)]
    s: Option<usize>,
    /// attach an error bound of this kind (needs --s)
    #[arg(long)]
    bound: Option<BoundVariant>,
    /// norm of the reported error bound
    #[arg(long, default_value = "inf")]
    p: Exponent,
    /// exponent of the condition behind the bound
    #[arg(long, default_value = "inf")]
    q: Exponent,
    /// multiplier of the group Lasso penalties
    #[arg(long, default_value_t = 1.0)]
    lasso_c: f64,
}

#[derive(Args, Debug)]
struct NebmpArgs {
    #[command(flatten)]
    obs: ObservationArgs,
    #[arg(long)]
    h: PathBuf,
    #[arg(long)]
    s: usize,
    /// bound on the entries of `Ω` (default: the largest entry for H)
    #[arg(long)]
    gamma_bar: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// guess of the sparse-approximation tail
    #[arg(long, default_value_t = 0.0)]
    upsilon: f64,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// ground-truth signal, adds errors to the iteration log
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IncoherenceArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long, default_value_t = 1)]
    d: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// matrix type: H, G, R or T
    #[arg(long = "type", default_value = "H")]
    matrix_type: MatrixType,
    #[arg(long, default_value_t = 24)]
    m: usize,
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 0.001)]
    sigma: f64,
    /// certified, double_certified or an explicit integer
    #[arg(long, default_value = "certified")]
    s_mode: SparsityMode,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// noise levels of the sweep
    #[arg(long, value_delimiter = ',', default_value = "0.0001,0.001,0.01")]
    sigmas: Vec<f64>,
    /// also run the four-type, two-sparsity summary table
    #[arg(long)]
    table2: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_failure() { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(tol) = cli.tol {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::InvalidArgument(format!("--tol must be positive, got {tol}")));
        }
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::Synth(args) => synth(cli, args),
        Command::Verify(args) => verify(cli, args),
        Command::Recover(args) => recover(cli, args),
        Command::Nebmp(args) => run_nebmp(cli, args),
        Command::Incoherence(args) => incoherence(cli, args),
        Command::Bench(args) => bench(cli, args),
    }
}

fn load_vector(path: &Path) -> Result<DVector<f64>> {
    let m = load_matrix(path)?;
    if m.ncols() == 1 || m.nrows() == 1 {
        Ok(DVector::from_iterator(m.len(), m.iter().copied()))
    } else {
        Err(Error::Dimension(format!(
            "{} holds a {}×{} matrix, expected a vector",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Writes to stdout; a closed pipe on the reading side is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn solver_options(cli: &Cli) -> SolverOptions {
    cli.tol.map(SolverOptions::with_tol).unwrap_or_default()
}

#[derive(Serialize)]
struct SynthSummary {
    s: usize,
    r: BlockNorm,
    kappa1: f64,
    kappa_inf: f64,
    certifies: bool,
    method: String,
    certificate: String,
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let a = load_matrix(&args.a)?;
    let rs = args.structure.structure(a.ncols())?;
    let r = args.structure.r;
    let contrasts: Vec<SynthesizedContrast> = match args.s {
        Some(s) => vec![synthesize_kappa(&a, &rs, s, r)?],
        None => max_certifiable_s(&a, &rs, r)?.contrasts,
    };
    let mut summary = Vec::new();
    for c in &contrasts {
        let s = c.certificate.s;
        let name = format!("certificate_s{s}.json");
        write_json(&cli.out_dir, &name, &c.certificate)?;
        save_matrix_csv(&cli.out_dir.join(format!("H_s{s}.csv")), &c.certificate.h)?;
        summary.push(SynthSummary {
            s,
            r,
            kappa1: c.kappa1,
            kappa_inf: c.kappa_inf,
            certifies: c.certifies(),
            method: format!("{:?}", c.method).to_lowercase(),
            certificate: name,
        });
    }
    match cli.format {
        Format::Json => {
            write_json(&cli.out_dir, "certificates.json", &summary)?;
            emit(&(serde_json::to_string_pretty(&summary)? + "\n"))?;
        }
        Format::Csv => {
            let mut text = String::from("s,r,kappa1,kappa_inf,certifies,method,certificate\n");
            for row in &summary {
                text += &format!(
                    "{},{},{},{},{},{},{}\n",
                    row.s, row.r, row.kappa1, row.kappa_inf, row.certifies, row.method, row.certificate
                );
            }
            std::fs::write(cli.out_dir.join("certificates.csv"), &text)?;
            emit(&text)?;
        }
    }
    Ok(())
}

fn verify(cli: &Cli, args: &VerifyArgs) -> Result<()> {
    let cert: Certificate = serde_json::from_reader(std::io::BufReader::new(File::open(&args.cert)?))?;
    let a = load_matrix(&args.a)?;
    let norms = vec![cert.r; cert.block_dims.len()];
    let rs = match &args.b {
        Some(b) => RepresentationStructure::new(load_matrix(b)?, cert.block_dims.clone(), norms)?,
        None => RepresentationStructure::identity(cert.block_dims.clone(), cert.r)?,
    };
    let mut v: Verification = verify_certificate(&cert, &a, &rs)?;
    if let Some(tol) = cli.tol {
        v.valid = v.residual <= tol && v.margin >= -tol;
    }
    match cli.format {
        Format::Json => {
            write_json(&cli.out_dir, "verification.json", &v)?;
            emit(&(serde_json::to_string_pretty(&v)? + "\n"))?;
        }
        Format::Csv => {
            let text = format!(
                "valid,kappa,kappa_min,margin,residual\n{},{},{},{},{}\n",
                v.valid, cert.kappa, v.kappa_min, v.margin, v.residual
            );
            std::fs::write(cli.out_dir.join("verification.csv"), &text)?;
            emit(&text)?;
        }
    }
    Ok(())
}

fn default_rho(obs: &Observation, h: &DMatrix<f64>, rho: Option<f64>) -> Result<f64> {
    match (rho, &obs.noise) {
        (Some(rho), _) => Ok(rho),
        (None, Some(noise)) => rho_epsilon(h, noise),
        (None, None) => Ok(0.0),
    }
}

fn emit_result(cli: &Cli, name: &str, result: &RecoveryResult) -> Result<()> {
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    write_json(&cli.out_dir, &format!("{name}.json"), result)?;
    if cli.format == Format::Csv {
        save_matrix_csv(
            &cli.out_dir.join("x_hat.csv"),
            &DMatrix::from_column_slice(result.x_hat.len(), 1, result.x_hat.as_slice()),
        )?;
    }
    emit(&(serde_json::to_string_pretty(result)? + "\n"))?;
    Ok(())
}

fn recover(cli: &Cli, args: &RecoverArgs) -> Result<()> {
    let obs = args.obs.load()?;
    let opts = solver_options(cli);
    let load_h = || -> Result<DMatrix<f64>> {
        let path =
            args.h.as_deref().ok_or_else(|| Error::InvalidArgument("--h is required for this routine".into()))?;
        load_matrix(path)
    };
    let result = match args.routine {
        RoutineArg::GroupLasso => {
            let sigma = args.obs.sigma.unwrap_or(0.0);
            group_lasso(&obs, &lasso_lambdas(&obs.rs, obs.m(), sigma, args.lasso_c))?
        }
        RoutineArg::Regular | RoutineArg::Penalized => {
            let h = load_h()?;
            let rho = default_rho(&obs, &h, args.rho)?;
            let mut result = if args.routine == RoutineArg::Regular {
                recover_regular_with(&obs, &h, rho, &opts)?
            } else {
                let lambda = match (args.lambda, args.s) {
                    (Some(l), _) => l,
                    (None, Some(s)) => 2.0 * s as f64,
                    (None, None) => {
                        return Err(Error::InvalidArgument("penalized recovery needs --lambda or --s".into()))
                    }
                };
                recover_penalized_with(&obs, &h, lambda, &opts)?
            };
            if let Some(variant) = args.bound {
                let s = args.s.ok_or_else(|| Error::InvalidArgument("--bound needs --s".into()))?;
                let cert = Certificate::from_contrast(&obs.a, h, &obs.rs, s, args.q, "cli")?;
                let lambda = args.lambda.or(Some(2.0 * s as f64)).filter(|_| variant == BoundVariant::Penalized);
                match error_bound(&cert, args.p, rho, 0.0, variant, lambda) {
                    Ok(bound) => result = result.with_bound(bound),
                    Err(e) => result.warnings.push(format!("no error bound: {e}")),
                }
            }
            result
        }
    };
    emit_result(cli, result.routine.tag(), &result)
}

fn run_nebmp(cli: &Cli, args: &NebmpArgs) -> Result<()> {
    let obs = args.obs.load()?;
    let h = load_matrix(&args.h)?;
    let gamma_bar = match args.gamma_bar {
        Some(g) => g,
        None => Certificate::from_contrast(&obs.a, h.clone(), &obs.rs, args.s, Exponent::Inf, "cli")?.omega.max(),
    };
    let rho = default_rho(&obs, &h, args.rho)?;
    let truth = args.truth.as_deref().map(load_vector).transpose()?;
    let params = NebmpParams { gamma_bar, rho, s: args.s, upsilon: args.upsilon, iters: args.iters };
    let result = nebmp(&obs, &h, &params, truth.as_ref())?;
    let mut w = create(&cli.out_dir, "nebmp_log.csv")?;
    write_nebmp_log_csv(&result.log, &mut w)?;
    w.flush()?;
    debug_assert_eq!(result.routine, Routine::Nebmp);
    emit_result(cli, "nebmp", &result)
}

fn incoherence(cli: &Cli, args: &IncoherenceArgs) -> Result<()> {
    let a = load_matrix(&args.a)?;
    if args.d == 0 || a.ncols() % args.d != 0 {
        return Err(Error::InvalidArgument(format!("block size {} does not divide {}", args.d, a.ncols())));
    }
    let rs = RepresentationStructure::uniform(a.ncols(), args.d, BlockNorm::L2)?;
    let report = mutual_block_incoherence(&a, &rs)?;
    match cli.format {
        Format::Json => {
            write_json(&cli.out_dir, "incoherence.json", &report)?;
            emit(&(serde_json::to_string_pretty(&report)? + "\n"))?;
        }
        Format::Csv => {
            let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            let text = format!(
                "mu,nu,mu_b,chi,mu_bar,max_certified_s\n{},{},{},{},{},{}\n",
                report.mu.value(),
                cell(report.nu),
                cell(report.mu_b),
                cell(report.chi),
                cell(report.mu_bar),
                report.mu.max_certified_s().map(|s| s.to_string()).unwrap_or_default(),
            );
            std::fs::write(cli.out_dir.join("incoherence.csv"), &text)?;
            emit(&text)?;
        }
    }
    Ok(())
}

fn bench(cli: &Cli, args: &BenchArgs) -> Result<()> {
    if args.d == 0 || !args.n.is_multiple_of(args.d) {
        return Err(Error::InvalidArgument(format!("block size {} does not divide n = {}", args.d, args.n)));
    }
    let cfg = ExperimentConfig {
        matrix_type: args.matrix_type,
        m: args.m,
        n: args.n,
        k: args.n / args.d,
        d: args.d,
        sigma: args.sigma,
        s_mode: args.s_mode,
        trials: args.trials,
        seed: cli.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let a = gen_matrix(&cfg, &mut stream_rng(cfg.seed, 0))?;
    let set = build_contrasts(&a, &cfg, &ContrastName::ALL, true)?;
    for e in set.entries.iter().filter(|e| e.h.is_none()) {
        eprintln!("warning: contrast {} unavailable: {}", e.name, e.note.as_deref().unwrap_or(""));
    }
    let ratings = run_ratings_with(&cfg, &a, &set)?;
    let sweep = run_sigma_sweep_with(&cfg, &a, &set, &args.sigmas)?;
    let table2 = if args.table2 { Some(run_table2(&cfg, &MatrixType::ALL)?) } else { None };
    match cli.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                table1: &'a [blockcert::harness::Table1Row],
                s_bar: &'a [(BlockNorm, Option<usize>)],
                ratings: &'a blockcert::harness::RatingTable,
                sweep: &'a [blockcert::harness::SweepRow],
            }
            let report = Report { table1: &set.table, s_bar: &set.s_bar, ratings: &ratings, sweep: &sweep };
            write_json(&cli.out_dir, "bench.json", &report)?;
        }
        Format::Csv => {
            let mut w = create(&cli.out_dir, "table1.csv")?;
            write_table1_csv(&set, &mut w)?;
            w.flush()?;
            let mut w = create(&cli.out_dir, "ratings.csv")?;
            write_ratings_csv(&ratings, &mut w)?;
            w.flush()?;
            let mut w = create(&cli.out_dir, "sweep.csv")?;
            write_sweep_csv(&sweep, &mut w)?;
            w.flush()?;
        }
    }
    if let Some(t2) = &table2 {
        let mut w = create(&cli.out_dir, "table2.csv")?;
        write_table2_csv(t2, &mut w)?;
        w.flush()?;
    }
    let mut text = Vec::new();
    write_ratings_csv(&ratings, &mut text)?;
    writeln!(text)?;
    write_sweep_csv(&sweep, &mut text)?;
    emit(&String::from_utf8_lossy(&text))
}
