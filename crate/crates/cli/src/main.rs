//! `atdev`: effect curves, matrix plots and importance for regression models.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error, 3 numerical
//! failure.

mod commands;
mod config;
mod stage;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use atdev::dependence::DependenceMethod;
use atdev::effects::MatrixKind;
use atdev::model::{MlpConfig, ModelId};
use atdev::simgen::{CaseId, SimSpec};
use atdev::{Error, ErrorClass, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "atdev", version, about = "Derivative-based effect curves and importance for regression models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a simulated dataset with its sidecar description.
    Simulate(SimulateArgs),
    /// Train the built-in one-hidden-layer network on a dataset.
    FitMlp(FitArgs),
    /// Per-variable curves (PD, marginal, ALE, ACE, ATDEV, LE) and overlays.
    Effects(RunArgs),
    /// ATDEV or LE matrix-plot data.
    Matrix(MatrixArgs),
    /// Importance and correlation heat maps plus bar-chart data.
    Heatmap(RunArgs),
    /// ATDEV variance components and DGSM.
    Importance(RunArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// indep_61, additive_621, interaction_622, complex_623, le_71_indep,
    /// le_71_corr or bivariate_normal.
    #[arg(long)]
    case: String,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_sd: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Model for bivariate_normal.
    #[arg(long, default_value = "additive_linear")]
    model: String,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    mu1: f64,
    #[arg(long, default_value_t = 0.0)]
    mu2: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma1: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// JSON run configuration (only `seed` and `output_dir` are used).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Response column: auto, none, last or a column name.
    #[arg(long)]
    response: Option<String>,
    /// Analytic model id (e.g. case_623, custom models only via config).
    #[arg(long, value_name = "ID")]
    analytic: Option<String>,
    /// Comma-separated replacement coefficients for --analytic.
    #[arg(long, requires = "analytic")]
    coeffs: Option<String>,
    /// Network weights written by fit-mlp.
    #[arg(long, value_name = "PATH")]
    mlp: Option<PathBuf>,
    /// External scorer command line ("N p" header and space-separated rows in, one prediction per line out).
    #[arg(long, value_name = "CMD")]
    external: Option<String>,
    /// Quantile bins per variable (at least 2).
    #[arg(long)]
    bins: Option<usize>,
    /// Central-difference step, overriding the per-column default.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Use finite differences even when exact gradients exist.
    #[arg(long)]
    force_fd: bool,
    #[arg(long, value_enum)]
    dependence: Option<DependenceArg>,
    /// Anchor bins for local_linear dependence.
    #[arg(long)]
    dependence_bins: Option<usize>,
    /// Report curves without subtracting their weighted mean.
    #[arg(long)]
    uncentered: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG figures (needs the `svg` feature).
    #[arg(long)]
    svg: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Share of rows held out for early stopping.
    #[arg(long, default_value_t = 0.1)]
    valid_fraction: f64,
}

#[derive(Debug, Args)]
struct MatrixArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "atdev")]
    kind: KindArg,
    /// Maximum scatter points per LE cell.
    #[arg(long, default_value_t = 5000)]
    scatter_cap: usize,
    /// Bins of the derivative histograms.
    #[arg(long, default_value_t = 30)]
    hist_bins: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DependenceArg {
    Linear,
    LocalLinear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Atdev,
    Le,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn base_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), |p| RunConfig::load(p))
}

impl RunArgs {
    /// Config file with flags applied on top.
    fn config(&self, needs_model: bool) -> Result<RunConfig> {
        let mut c = base_config(self.config.as_ref())?;
        let flag_sources = usize::from(self.analytic.is_some())
            + usize::from(self.mlp.is_some())
            + usize::from(self.external.is_some());
        if flag_sources > 1 {
            return Err(usage("give only one of --analytic, --mlp and --external"));
        }
        if flag_sources == 1 {
            c.clear_model();
            if let Some(id) = &self.analytic {
                c.analytic = Some(config::analytic_from_flags(id, self.coeffs.as_deref())?);
            }
            c.mlp_weights = self.mlp.clone().or(c.mlp_weights);
            c.external_command = self.external.clone().or(c.external_command);
        }
        if let Some(v) = &self.data {
            c.dataset = Some(v.clone());
        }
        if let Some(v) = &self.response {
            c.response = v.clone();
        }
        if let Some(v) = self.bins {
            c.bins = v;
        }
        if let Some(v) = self.fd_step {
            c.fd_step = Some(v);
        }
        c.force_fd |= self.force_fd;
        if let Some(v) = self.dependence {
            c.dependence = match v {
                DependenceArg::Linear => DependenceMethod::Linear,
                DependenceArg::LocalLinear => DependenceMethod::LocalLinear,
            };
        }
        if let Some(v) = self.dependence_bins {
            c.dependence_bins = v;
        }
        if self.uncentered {
            c.centered = false;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.svg |= self.svg;
        c.output_dir = Some(c.resolve_output_dir(self.out.clone()));
        c.validate(needs_model)?;
        Ok(c)
    }
}

fn out_dir(c: &RunConfig) -> PathBuf {
    c.output_dir.clone().expect("resolved by RunArgs::config")
}

fn simulate(a: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let base = base_config(a.config.as_ref())?;
    let case = if a.case == "bivariate_normal" {
        CaseId::BivariateNormal {
            mu1: a.mu1,
            mu2: a.mu2,
            sigma1: a.sigma1,
            sigma2: a.sigma2,
            rho: a.rho,
            model: ModelId::parse(&a.model).map_err(|_| usage(format!("unknown model '{}'", a.model)))?,
        }
    } else {
        CaseId::parse(&a.case)?
    };
    let spec = SimSpec {
        noise_sd: a.noise_sd,
        ..SimSpec::new(case, a.n, a.seed.unwrap_or(base.seed))
    };
    commands::simulate(&spec, base.resolve_output_dir(a.out.clone()))
}

fn fit(a: &FitArgs) -> Result<Vec<PathBuf>> {
    let c = a.run.config(false)?;
    let d = MlpConfig::default();
    let mlp = MlpConfig {
        hidden: a.hidden.unwrap_or(d.hidden),
        max_epochs: a.epochs.unwrap_or(d.max_epochs),
        patience: a.patience.unwrap_or(d.patience),
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        seed: c.seed,
    };
    commands::fit(&c, &mlp, a.valid_fraction, out_dir(&c))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::FitMlp(a) => fit(&a),
        Command::Effects(a) => {
            let c = a.config(true)?;
            commands::effects(&commands::Session::open(&c)?, out_dir(&c))
        }
        Command::Matrix(a) => {
            let c = a.run.config(true)?;
            let kind = match a.kind {
                KindArg::Atdev => MatrixKind::ATDEV,
                KindArg::Le => MatrixKind::LE,
            };
            let s = commands::Session::open(&c)?;
            commands::matrix(&s, kind, a.scatter_cap, a.hist_bins, out_dir(&c))
        }
        Command::Heatmap(a) => {
            let c = a.config(true)?;
            commands::heatmap(&commands::Session::open(&c)?, out_dir(&c))
        }
        Command::Importance(a) => {
            let c = a.config(true)?;
            commands::importance(&commands::Session::open(&c)?, out_dir(&c))
        }
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::DataOrModel => 2,
        ErrorClass::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("atdev: error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
