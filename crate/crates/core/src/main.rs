//! `hdglm` command-line front end.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hdglm::bench::{run_experiment, ExperimentSpec, GridCell, ScenarioTag};
use hdglm::calibrate::{calibrate, CalibrateOptions};
use hdglm::covariance::CovarianceModel;
use hdglm::data::{read_dataset_csv, sample_dataset, write_dataset_csv, write_vector, GlmModel, SyntheticConfig};
use hdglm::fit::{fit_ridge, fit_surrogate, FitOptions};
use hdglm::inference::{infer, linear_predictor_ci, InferOptions};
use hdglm::link::LinkSpec;
use hdglm::prox::prox;
use hdglm::se::{residual_on_panel, solve_se_on_panel, McPanel, SeProblem};
use hdglm::Error;

#[derive(Parser, Debug)]
#[command(name = "hdglm", version, about = "Bias-corrected inference for high-dimensional GLMs")]
struct Cli {
    /// Flat `key = value` file; entries fill in options not given on the command line.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset.
    Generate(GenerateArgs),
    /// Fit the surrogate (or ridge) estimator.
    Fit(FitArgs),
    /// Estimate γ², σ_e² and τ_j² from a dataset.
    Calibrate(CalibrateArgs),
    /// Solve the state-evolution system.
    SeSolve(SeSolveArgs),
    /// Sweep the state-evolution solution over κ and γ² grids.
    SeFigures(SeFiguresArgs),
    /// Calibrate, fit, solve and build confidence intervals.
    Infer(InferArgs),
    /// Run a seeded simulation experiment.
    Coverage(CoverageArgs),
    /// Evaluate the proximal operator of ηG.
    ProxEval(ProxEvalArgs),
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Preset (`poisson-clippedexp`, `logistic`, `piecewise`, `square`, ...) or `law/link`.
    #[arg(long, default_value = "poisson-clippedexp")]
    model: String,
}

impl ModelArg {
    fn parse(&self) -> hdglm::Result<GlmModel> {
        self.model.parse()
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, conflicts_with = "kappa")]
    p: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma2: f64,
    #[command(flatten)]
    model: ModelArg,
    /// `identity` or `ar1:rho`.
    #[arg(long, default_value = "identity")]
    covariance: String,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    /// Where to write the true coefficients (default: `beta_true.csv` next to the output).
    #[arg(long)]
    beta_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    data: PathBuf,
    #[command(flatten)]
    model: ModelArg,
    /// Ridge penalty on the fit scale (`λ Σ b_j²`).
    #[arg(long)]
    lambda: Option<f64>,
    /// β̂, one value per line.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Convergence report (default: stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    data: PathBuf,
    #[command(flatten)]
    model: ModelArg,
    #[arg(long)]
    seed: u64,
    /// Panel size of the simulated mean curve.
    #[arg(long, default_value_t = 1_000_000)]
    m: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SeSolveArgs {
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    gamma2: f64,
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 200_000)]
    m: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SeFiguresArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.3, 0.4, 0.5])]
    kappa: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0])]
    gamma2: Vec<f64>,
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 200_000)]
    m: usize,
    /// Independent panels per grid point.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InferArgs {
    data: PathBuf,
    #[command(flatten)]
    model: ModelArg,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Panel size of the γ̂ mean curve.
    #[arg(long, default_value_t = 1_000_000)]
    m_curve: usize,
    /// Panel size of the SE solve.
    #[arg(long, default_value_t = 200_000)]
    m_se: usize,
    /// Skip the classical Wald intervals.
    #[arg(long)]
    no_classical: bool,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Flat `j,beta_hat,center,lo,hi,tau_hat` table of the corrected intervals.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-observation intervals for the linear predictor.
    #[arg(long)]
    linear_predictor_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoverageArgs {
    /// gamma-recovery, sigma-e2-recovery, coverage-comparison, se-curves, error-limits or pivot-normality.
    #[arg(long, default_value = "coverage-comparison")]
    scenario: String,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1000])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.3, 0.5])]
    kappa: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0])]
    gamma2: Vec<f64>,
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "identity")]
    covariance: String,
    #[arg(long, default_value_t = 1_000_000)]
    m_curve: usize,
    #[arg(long, default_value_t = 200_000)]
    m_se: usize,
    #[arg(long, default_value_t = 0)]
    pivot_coordinate: usize,
    /// Record per-cell wall-clock time (output is then not reproducible).
    #[arg(long)]
    wall_time: bool,
    /// CSV report.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProxEvalArgs {
    /// Link name (`logistic`, `clippedexp:50`, `piecewise:5,0.1`, ...).
    #[arg(long, default_value = "logistic")]
    link: String,
    #[arg(long)]
    eta: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x: Vec<f64>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::SeSolve(a) => se_solve(a),
        Command::SeFigures(a) => se_figures(a),
        Command::Infer(a) => infer_cmd(a),
        Command::Coverage(a) => coverage(a),
        Command::ProxEval(a) => prox_eval(a),
    }
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn generate(a: GenerateArgs) -> CliResult {
    let model = a.model.parse()?;
    let cov: CovarianceModel = a.covariance.parse()?;
    let config = match (a.p, a.kappa) {
        (Some(p), None) => SyntheticConfig::new(a.n, p, a.gamma2, a.seed),
        (None, Some(k)) => SyntheticConfig::with_kappa(a.n, k, a.gamma2, a.seed),
        _ => return Err(usage("give exactly one of --p and --kappa")),
    };
    let data = sample_dataset(&config, &model, &cov)?;
    write_dataset_csv(&data, &a.output)?;
    let beta_path = a.beta_out.unwrap_or_else(|| a.output.with_file_name("beta_true.csv"));
    write_vector(&beta_path, data.truth()?.as_slice())?;
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    model: String,
    n: usize,
    p: usize,
    lambda: Option<f64>,
    converged: bool,
    diverged: bool,
    iterations: usize,
    final_gradient_norm: f64,
}

fn fit(a: FitArgs) -> CliResult {
    let model = a.model.parse()?;
    let data = read_dataset_csv(&a.data)?;
    let opts = FitOptions::default();
    let res = match a.lambda {
        Some(l) => fit_ridge(&data, &model.link, l, &opts)?,
        None => fit_surrogate(&data, &model.link, &opts)?,
    };
    if let Some(out) = &a.output {
        write_vector(out, res.beta_hat.as_slice())?;
    }
    let report = FitReport {
        model: model.name(),
        n: data.n(),
        p: data.p(),
        lambda: a.lambda,
        converged: res.converged,
        diverged: res.diverged,
        iterations: res.iterations,
        final_gradient_norm: res.final_gradient_norm,
    };
    emit_json(&report, a.json.as_deref())?;
    if res.diverged {
        return Err(Failure::Numeric(Error::Diverged.to_string()));
    }
    Ok(())
}

fn calibrate_cmd(a: CalibrateArgs) -> CliResult {
    let model = a.model.parse()?;
    let data = read_dataset_csv(&a.data)?;
    let opts = CalibrateOptions { mc_samples: a.m, ..CalibrateOptions::new(a.seed) };
    let hyper = calibrate(&data, &model, &opts)?;
    emit_json(&hyper, a.json.as_deref())
}

#[derive(Serialize)]
struct SeReport {
    model: String,
    kappa: f64,
    gamma2: f64,
    lambda: f64,
    mc_samples: usize,
    seed: u64,
    mu: f64,
    sigma2: f64,
    eta: f64,
    iterations: usize,
    panel_checksum: String,
    residuals: [f64; 3],
    residual_std_errors: [f64; 3],
}

fn se_solve(a: SeSolveArgs) -> CliResult {
    let model = a.model.parse()?;
    let prob = SeProblem {
        lambda: a.lambda,
        mc_samples: a.m,
        seed: a.seed,
        damping: a.damping,
        tol: a.tol,
        max_iter: a.max_iter,
        ..SeProblem::new(a.kappa, a.gamma2, model)
    };
    prob.validate()?;
    let panel = McPanel::new(&model, a.gamma2, a.m, a.seed)?;
    let sol = solve_se_on_panel(&prob, &panel)?;
    let r = residual_on_panel(&sol.params, &prob, &panel)?;
    let report = SeReport {
        model: model.name(),
        kappa: a.kappa,
        gamma2: a.gamma2,
        lambda: a.lambda,
        mc_samples: a.m,
        seed: a.seed,
        mu: sol.params.mu,
        sigma2: sol.params.sigma2,
        eta: sol.params.eta,
        iterations: sol.iterations,
        panel_checksum: format!("{:016x}", sol.panel_checksum),
        residuals: [r.r1, r.r2, r.r3],
        residual_std_errors: [r.se1, r.se2, r.se3],
    };
    emit_json(&report, a.json.as_deref())
}

fn se_figures(a: SeFiguresArgs) -> CliResult {
    let model = a.model.parse()?;
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let mut out = String::from("kappa,gamma2,rep,mu,sigma2,eta,iterations,status\n");
    let mut failures = 0usize;
    for &kappa in &a.kappa {
        for &gamma2 in &a.gamma2 {
            for rep in 0..a.reps {
                let prob = SeProblem {
                    lambda: a.lambda,
                    mc_samples: a.m,
                    seed: hdglm::rng::derive_seed(a.seed, 0xF1, rep as u64),
                    ..SeProblem::new(kappa, gamma2, model)
                };
                match hdglm::se::solve_se_detailed(&prob) {
                    Ok(s) => out.push_str(&format!(
                        "{kappa},{gamma2},{rep},{},{},{},{},ok\n",
                        s.params.mu, s.params.sigma2, s.params.eta, s.iterations
                    )),
                    Err(e) if e.is_usage() => return Err(e.into()),
                    Err(e) => {
                        failures += 1;
                        out.push_str(&format!("{kappa},{gamma2},{rep},,,,,\"{e}\"\n"));
                    }
                }
            }
        }
    }
    match &a.output {
        Some(p) => fs::write(p, out).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => print!("{out}"),
    }
    if failures > 0 {
        return Err(Failure::Numeric(format!("{failures} grid point(s) failed")));
    }
    Ok(())
}

fn infer_cmd(a: InferArgs) -> CliResult {
    let model = a.model.parse()?;
    let data = read_dataset_csv(&a.data)?;
    let opts = InferOptions {
        alpha: a.alpha,
        curve_samples: a.m_curve,
        se_samples: a.m_se,
        classical: !a.no_classical,
        ..InferOptions::new(a.seed)
    };
    let out = infer(&data, &model, &opts)?;
    if let Some(p) = &a.csv {
        out.corrected.write_csv(p)?;
    }
    if let Some(p) = &a.linear_predictor_csv {
        linear_predictor_ci(&data, out.fit.beta_hat.as_slice(), &out.se, &model.link, a.alpha)?.write_csv(p)?;
    }
    emit_json(&out, a.json.as_deref())
}

fn coverage(a: CoverageArgs) -> CliResult {
    let model = a.model.parse()?;
    let scenario: ScenarioTag = a.scenario.parse()?;
    let mut grid = Vec::new();
    for &n in &a.n {
        for &kappa in &a.kappa {
            for &gamma2 in &a.gamma2 {
                grid.push(GridCell { n, kappa, gamma2, model, alpha: a.alpha });
            }
        }
    }
    let spec = ExperimentSpec {
        output_path: a.output.clone(),
        covariance: a.covariance.parse()?,
        curve_samples: a.m_curve,
        se_samples: a.m_se,
        pivot_coordinate: a.pivot_coordinate,
        record_wall_time: a.wall_time,
        ..ExperimentSpec::new(scenario, grid, a.reps, a.seed)
    };
    let report = run_experiment(&spec)?;
    if a.output.is_none() || a.json.is_some() {
        emit_json(&report, a.json.as_deref())?;
    }
    let failed = report.rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        return Err(Failure::Numeric(format!("{failed} grid cell(s) failed")));
    }
    Ok(())
}

#[derive(Serialize)]
struct ProxPoint {
    x: f64,
    prox: f64,
}

fn prox_eval(a: ProxEvalArgs) -> CliResult {
    let link: LinkSpec = a.link.parse()?;
    let points = a
        .x
        .iter()
        .map(|&x| Ok(ProxPoint { x, prox: prox(&link, a.eta, x)? }))
        .collect::<hdglm::Result<Vec<_>>>()?;
    emit_json(&points, a.json.as_deref())
}
