//! `dsii`: command-line driver for the dsii-core laboratory.

mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{obj, to_json_bytes, write_atomic};

#[derive(Parser, Debug)]
#[command(name = "dsii", version, about = "Davey-Stewartson II homoclinic orbit and Melnikov laboratory")]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Override any config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

/// Model and grid overrides shared by most subcommands.
#[derive(Args, Debug, Default)]
struct ModelArgs {
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa2: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
}

/// Darboux and quadrature overrides.
#[derive(Args, Debug, Default)]
struct DarbouxArgs {
    #[arg(long, allow_hyphen_values = true)]
    delta_rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long)]
    quad_nodes: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    quad_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the oracle suite and print a pass/fail table.
    Verify {
        #[command(flatten)]
        common: ModelArgs,
    },
    /// Linearized spectrum about the circle point.
    Spectrum {
        #[command(flatten)]
        common: ModelArgs,
        #[arg(long)]
        kmax: Option<u32>,
    },
    /// Homoclinic orbit snapshots.
    Orbit {
        #[command(flatten)]
        common: ModelArgs,
        #[command(flatten)]
        orbit: DarbouxArgs,
        /// Comma list or lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        times: Option<String>,
    },
    /// Melnikov component matrix.
    Melnikov {
        #[command(flatten)]
        common: ModelArgs,
        #[command(flatten)]
        orbit: DarbouxArgs,
    },
    /// Solve the Melnikov conditions for (alpha, beta) and chi.
    SolveParams {
        #[command(flatten)]
        common: ModelArgs,
        #[command(flatten)]
        orbit: DarbouxArgs,
    },
    /// Tabulate (alpha, beta) over an (omega, delta_rho, gamma) lattice.
    ScanDomain {
        #[command(flatten)]
        common: ModelArgs,
        #[arg(long)]
        quad_nodes: Option<usize>,
        #[arg(long)]
        scan_omega: Option<String>,
        #[arg(long)]
        scan_delta_rho: Option<String>,
        #[arg(long)]
        scan_gamma: Option<String>,
    },
    /// Integrate the perturbed equation and write snapshots.
    Simulate {
        #[command(flatten)]
        common: ModelArgs,
        #[command(flatten)]
        orbit: DarbouxArgs,
        #[arg(long, allow_hyphen_values = true)]
        dt: Option<f64>,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        t0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t_final: Option<f64>,
        #[arg(long)]
        snapshot_stride: Option<usize>,
        /// orbit, circle or file:PATH.
        #[arg(long)]
        initial: Option<String>,
    },
    /// Solve the normal-form homological system on a mode lattice.
    Normalform {
        #[command(flatten)]
        common: ModelArgs,
        #[arg(long)]
        kmax: Option<i32>,
    },
}

fn push<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((key, v.to_string()));
    }
}

impl ModelArgs {
    fn overrides(&self, out: &mut Vec<(&'static str, String)>) {
        push(out, "omega", &self.omega);
        push(out, "epsilon", &self.epsilon);
        push(out, "alpha", &self.alpha);
        push(out, "beta", &self.beta);
        push(out, "kappa1", &self.kappa1);
        push(out, "kappa2", &self.kappa2);
        push(out, "nx", &self.nx);
        push(out, "ny", &self.ny);
    }
}

impl DarbouxArgs {
    fn overrides(&self, out: &mut Vec<(&'static str, String)>) {
        push(out, "delta_rho", &self.delta_rho);
        push(out, "rho", &self.rho);
        push(out, "gamma", &self.gamma);
        push(out, "quad_nodes", &self.quad_nodes);
        push(out, "quad_tol", &self.quad_tol);
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify { .. } => "verify",
            Command::Spectrum { .. } => "spectrum",
            Command::Orbit { .. } => "orbit",
            Command::Melnikov { .. } => "melnikov",
            Command::SolveParams { .. } => "solve-params",
            Command::ScanDomain { .. } => "scan-domain",
            Command::Simulate { .. } => "simulate",
            Command::Normalform { .. } => "normalform",
        }
    }

    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        match self {
            Command::Verify { common } => common.overrides(&mut o),
            Command::Spectrum { common, kmax } => {
                common.overrides(&mut o);
                push(&mut o, "spectrum_kmax", kmax);
            }
            Command::Orbit { common, orbit, times } => {
                common.overrides(&mut o);
                orbit.overrides(&mut o);
                push(&mut o, "times", times);
            }
            Command::Melnikov { common, orbit } | Command::SolveParams { common, orbit } => {
                common.overrides(&mut o);
                orbit.overrides(&mut o);
            }
            Command::ScanDomain {
                common,
                quad_nodes,
                scan_omega,
                scan_delta_rho,
                scan_gamma,
            } => {
                common.overrides(&mut o);
                push(&mut o, "quad_nodes", quad_nodes);
                push(&mut o, "scan_omega", scan_omega);
                push(&mut o, "scan_delta_rho", scan_delta_rho);
                push(&mut o, "scan_gamma", scan_gamma);
            }
            Command::Simulate {
                common,
                orbit,
                dt,
                scheme,
                t0,
                t_final,
                snapshot_stride,
                initial,
            } => {
                common.overrides(&mut o);
                orbit.overrides(&mut o);
                push(&mut o, "dt", dt);
                push(&mut o, "scheme", scheme);
                push(&mut o, "t0", t0);
                push(&mut o, "t_final", t_final);
                push(&mut o, "snapshot_stride", snapshot_stride);
                push(&mut o, "initial", initial);
            }
            Command::Normalform { common, kmax } => {
                common.overrides(&mut o);
                push(&mut o, "nf_kmax", kmax);
            }
        }
        o
    }
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        cfg.apply_text(&text)?;
    }
    for s in &cli.set {
        cfg.apply_assignment(s)?;
    }
    for (k, v) in cli.command.overrides() {
        cfg.set(k, &v)?;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            FormatArg::Csv => config::Format::Csv,
            FormatArg::Json => config::Format::Json,
        };
    }
    Ok(cfg)
}

fn init_threads() -> Result<usize, CliError> {
    let n = match std::env::var("DSII_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("DSII_THREADS = {s}: expected a non-negative integer")))?,
        Err(_) => 0,
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(n)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = init_threads()?;
    let cfg = resolve(cli)?;
    let name = cli.command.name();
    let outcome: Outcome = match &cli.command {
        Command::Verify { .. } => verify::verify(&cfg)?,
        Command::Spectrum { .. } => commands::spectrum(&cfg)?,
        Command::Orbit { .. } => commands::orbit_cmd(&cfg)?,
        Command::Melnikov { .. } => commands::melnikov(&cfg)?,
        Command::SolveParams { .. } => commands::solve_params(&cfg)?,
        Command::ScanDomain { .. } => commands::scan_domain(&cfg)?,
        Command::Simulate { .. } => commands::simulate(&cfg)?,
        Command::Normalform { .. } => commands::normalform(&cfg)?,
    };
    for (file, bytes) in &outcome.files {
        write_atomic(&cfg.out.join(file), bytes)?;
    }
    let manifest = obj([
        ("subcommand", name.into()),
        (
            "versions",
            obj([
                ("dsii-cli", env!("CARGO_PKG_VERSION").into()),
                ("dsii-core", dsii_core::VERSION.into()),
            ]),
        ),
        ("threads", threads.into()),
        ("inputs", cfg.to_json()),
        ("tolerances", outcome.tolerances.clone()),
        ("results", outcome.results.clone()),
        (
            "outputs",
            Value::from(outcome.files.iter().map(|f| f.0.clone()).collect::<Vec<_>>()),
        ),
    ]);
    let manifest_name = format!("{}.manifest.json", name.replace('-', "_"));
    write_atomic(&cfg.out.join(manifest_name), &to_json_bytes(&manifest))?;
    print!("{}", outcome.summary);

    if name == "verify" {
        let failed = verify::failures(&outcome);
        if !failed.is_empty() {
            return Err(CliError::Check(format!("failed checks: {}", failed.join(", "))));
        }
    }
    Ok(())
}

fn report(e: &CliError) {
    let line = obj([
        ("level", "error".into()),
        ("kind", e.kind().into()),
        ("exit_code", e.exit_code().into()),
        ("message", e.to_string().into()),
    ]);
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::Usage(e.to_string().trim_end().to_string());
            report(&err);
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
