use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robin_plap::bounds::BoundsCertificate;
use robin_plap::eigensolver::solve_lambda;
use robin_plap::harness::{
    alpha_sweep, certificate_for, corner_demo, emit, run_suite, sweep_mesh, to_csv, to_json, FlatConfig, Format,
    HarnessError, Suite,
};

#[derive(Parser)]
#[command(name = "robin-plap", version, about = "First Robin p-Laplacian eigenvalue: solves, sweeps and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for one coupling.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        alpha: f64,
        /// Write the solve record as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve along a list of couplings.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Warm-start each coupling from the previous one.
        #[arg(long)]
        warm: bool,
    },
    /// Print the bound certificate for one coupling.
    Bounds {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        alpha: f64,
    },
    /// Run a seeded property suite.
    Check {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep on the square and compare the fitted limit with 1 - p.
    CornerDemo {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [4.0, 8.0, 16.0])]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 0.005)]
        h: f64,
        #[arg(long, default_value_t = 1.0)]
        side: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    side: Option<f64>,
    #[arg(long)]
    half_length: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    semi_axes: Option<Vec<f64>>,
    #[arg(long)]
    rounding_radius: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    holder_exponent: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    /// Use a uniform mesh instead of grading it towards the boundary.
    #[arg(long)]
    uniform: bool,
    /// closed_form, charts or default.
    #[arg(long)]
    certificate: Option<String>,
    #[arg(long)]
    charts: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn flat(&self) -> Result<FlatConfig, HarnessError> {
        let file = match &self.config {
            Some(path) => FlatConfig::load(path)?,
            None => FlatConfig::default(),
        };
        let flags = FlatConfig {
            domain: self.domain.clone(),
            radius: self.radius,
            side: self.side,
            half_length: self.half_length,
            semi_axes: self.semi_axes.clone(),
            rounding_radius: self.rounding_radius,
            amplitude: self.amplitude,
            holder_exponent: self.holder_exponent,
            p: self.p,
            h: self.h,
            graded: self.uniform.then_some(false),
            certificate: self.certificate.clone(),
            charts: self.charts,
            sigma: self.sigma,
            max_iter: self.max_iter,
            tolerance: self.tolerance,
            seed: self.seed,
            ..FlatConfig::default()
        };
        Ok(file.merge(flags))
    }
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Solve { run, alpha, out } => {
            let mut flat = run.flat()?;
            flat.alphas = Some(vec![alpha]);
            let cfg = flat.run_config()?;
            let mesh = sweep_mesh(&cfg.domain, cfg.p, alpha, cfg.h, cfg.graded)?;
            let r = solve_lambda(&mesh, cfg.p, alpha, &cfg.solver)?;
            let rec = r.record(Some(cfg.domain.kind().to_string()), None);
            let text = serde_json::to_string_pretty(&rec)?;
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?,
                None => println!("{text}"),
            }
            Ok(r.converged)
        }
        Command::Sweep { run, alphas, csv, json, warm } => {
            let mut flat = run.flat()?;
            flat.alphas = alphas.or(flat.alphas);
            flat.csv = csv.or(flat.csv);
            flat.json = json.or(flat.json);
            if warm {
                flat.warm = Some(true);
            }
            let cfg = flat.run_config()?;
            let sweep = alpha_sweep(&cfg)?;
            if let Some(path) = &cfg.csv {
                emit(&sweep.records, Format::Csv, path)?;
            }
            if let Some(path) = &cfg.json {
                emit(&sweep.records, Format::Json, path)?;
            }
            if cfg.csv.is_none() && cfg.json.is_none() {
                print!("{}", to_csv(&sweep.records)?);
            }
            Ok(sweep.records.iter().all(|r| r.converged))
        }
        Command::Bounds { run, alpha } => {
            let mut flat = run.flat()?;
            flat.alphas = Some(vec![alpha]);
            flat.h = flat.h.or(Some(1.0));
            let cfg = flat.run_config()?;
            let ext = certificate_for(&cfg.domain, &cfg.certificate)?;
            println!("{}", BoundsCertificate::new(cfg.p, alpha, &ext)?.to_json());
            Ok(true)
        }
        Command::Check { suite, seed } => {
            let report = run_suite(suite, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.passed())
        }
        Command::CornerDemo { p, alphas, h, side, csv } => {
            let demo = corner_demo(side, p, &alphas, h, &Default::default())?;
            match csv {
                Some(path) => emit(&demo.records, Format::Csv, &path)?,
                None => println!("{}", to_json(&demo.records)),
            }
            println!("{}", serde_json::json!({ "fit": demo.fit, "verdict": demo.verdict }));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
