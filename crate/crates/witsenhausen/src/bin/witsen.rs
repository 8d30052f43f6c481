use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use witsenhausen::commands::{
    cmd_baseline, cmd_curves, cmd_solve, cmd_verify, parse_init, to_csv, CurveRequest, Method, OutputFormat,
    RunConfig, VERIFY_TOL,
};
use witsenhausen::counterexample::Prior;
use witsenhausen::Result;

#[derive(Parser)]
#[command(name = "witsen", version, about = "Solve and evaluate strategies for the Witsenhausen counterexample")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for person-by-person optimal strategies (ghq or picard)
    Solve(RunArgs),
    /// Evaluate the affine or sign/tanh baseline
    Baseline(RunArgs),
    /// Sample both strategies on a grid and summarise the staircase
    Curves {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, allow_hyphen_values = true)]
        x_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        x_max: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y_max: Option<f64>,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Check the change-of-measure identities on a finite model file
    Verify {
        model: PathBuf,
        /// Also enumerate all strategy profiles for person-by-person optimality
        #[arg(long)]
        pbp: bool,
        #[arg(long, default_value_t = VERIFY_TOL)]
        tol: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Gaussian,
    TwoPoint,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0.2)]
    k: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 5.0)]
    sigma_x: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    prior: PriorArg,
    /// Quadrature order (number of signaling levels)
    #[arg(long, default_value_t = 7)]
    n: usize,
    #[arg(long, default_value_t = 600_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// auto | affine | quantizer[:scale] | user:v1,v2,…
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    init: String,
    /// Evaluate the start point instead of solving
    #[arg(long)]
    no_iterate: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write `timing: null` for byte-identical reruns
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn config(&self, default_method: Method) -> Result<RunConfig> {
        Ok(RunConfig {
            k: self.k,
            sigma: self.sigma,
            sigma_x: self.sigma_x,
            prior: match self.prior {
                PriorArg::Gaussian => Prior::Gaussian,
                PriorArg::TwoPoint => Prior::TwoPoint,
            },
            n: self.n,
            samples: self.samples,
            seed: self.seed,
            method: self.method.unwrap_or(default_method),
            init: parse_init(&self.init)?,
            iterate: !self.no_iterate,
            format: self.format,
            output: self.output.clone(),
            timing: !self.no_timing,
        })
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents serialise");
    s.push('\n');
    s
}

fn emit(text: &str, path: Option<PathBuf>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&p, text)?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn ext(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve(args) => run_doc(&args.config(Method::Ghq)?, "solve", cmd_solve),
        Command::Baseline(args) => run_doc(&args.config(Method::Affine)?, "baseline", cmd_baseline),
        Command::Curves { run, x_min, x_max, y_min, y_max, points } => {
            let cfg = run.config(Method::Ghq)?;
            let mut req = CurveRequest::default_for(&cfg.params()?, points);
            req.x_range = (x_min.unwrap_or(req.x_range.0), x_max.unwrap_or(req.x_range.1));
            req.y_range = (y_min.unwrap_or(req.y_range.0), y_max.unwrap_or(req.y_range.1));
            let curves = cmd_curves(&cfg, &req)?;
            let text = match cfg.format {
                OutputFormat::Json => json(&curves),
                OutputFormat::Csv => curves.to_csv(),
            };
            let name = format!("curves-{}.{}", json_name(&cfg.method), ext(cfg.format));
            emit(&text, cfg.output_path(&name))?;
            eprintln!("staircase: {} steps", curves.staircase.steps);
            Ok(curves.converged != Some(false))
        }
        Command::Verify { model, pbp, tol, output } => {
            let report = cmd_verify(&model, pbp, tol)?;
            let path = output.or_else(|| {
                std::env::var_os(witsenhausen::commands::OUTPUT_DIR_ENV)
                    .map(|d| PathBuf::from(d).join("verify.json"))
            });
            emit(&json(&report), path)?;
            if !report.passed {
                if let Some(d) = report.kernel_defects.first() {
                    eprintln!("kernel row {} sums to {}", d.location, d.sum);
                }
                if let Some(w) = &report.martingale.worst {
                    eprintln!(
                        "largest martingale gap {:e} at t = {} after states {:?}, observations {:?}",
                        w.gap(),
                        w.t,
                        w.states,
                        w.observations
                    );
                }
            }
            Ok(report.passed)
        }
    }
}

fn json_name(m: &Method) -> String {
    serde_json::to_value(m).unwrap().as_str().unwrap().to_owned()
}

fn run_doc(
    cfg: &RunConfig,
    sub: &str,
    f: impl Fn(&RunConfig) -> Result<witsenhausen::commands::ResultDocument>,
) -> Result<bool> {
    let doc = f(cfg)?;
    let text = match cfg.format {
        OutputFormat::Json => json(&doc),
        OutputFormat::Csv => to_csv(&doc),
    };
    let name = format!("{sub}-{}.{}", json_name(&cfg.method), ext(cfg.format));
    emit(&text, cfg.output_path(&name))?;
    if !doc.success() {
        eprintln!("solver did not converge (residual norm {:?})", doc.residual_norm);
    }
    Ok(doc.success())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
