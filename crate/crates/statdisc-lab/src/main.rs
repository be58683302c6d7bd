//! `statdisc` command-line lab.
//!
//! Complex vectors on the command line are comma-separated entries, each
//! `re` or `re:im`, e.g. `--a 0.1:0.02,-0.05`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use statdisc::discs::{build_lift, defective, stationary_minimal};
use statdisc::error::{Error, Result};
use statdisc::jets::local_diffeo_verdict_with_tol;
use statdisc::linalg::{CVector, C64};
use statdisc::matrix_eq::{contraction_guard, solve_x, DiscParameters, SolveOptions};
use statdisc::quadric::{self, QuadricModel};
use statdisc_lab::explorer::{
    self, exit_code, run_experiment, ExperimentConfig, OutputFormat, Tolerances,
};
use statdisc_lab::generator::QuadricKind;
use statdisc_lab::search::search_stationary_minimal;

#[derive(Parser)]
#[command(
    name = "statdisc",
    about = "Stationary-disc lab for model quadrics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DiscParamArgs {
    /// Complex parameter vector a (entries `re` or `re:im`, comma-separated)
    #[arg(long)]
    a: String,
    /// Real direction vector b (comma-separated)
    #[arg(long)]
    b: String,
}

#[derive(Subcommand)]
enum Command {
    /// Load a quadric, check hermiticity, and print its Levi classification
    Validate {
        quadric: PathBuf,
        /// Optional b for the pointwise classifications
        #[arg(long)]
        b: Option<String>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve the quadratic matrix equation for X
    SolveX {
        quadric: PathBuf,
        #[command(flatten)]
        params: DiscParamArgs,
        /// Attempt the solve even when the contraction guard fails
        #[arg(long)]
        force: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Stationary-disc operations
    #[command(subcommand)]
    Disc(DiscCommand),
    /// 1-jet Jacobian report and local-diffeomorphism verdict
    Jet {
        quadric: PathBuf,
        #[command(flatten)]
        params: DiscParamArgs,
        /// Center vector V (entries `re` or `re:im`, comma-separated)
        #[arg(long)]
        v: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Search for (a, V) making the quadric stationary minimal
    SearchMin {
        quadric: PathBuf,
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a seeded conjecture-exploration campaign
    Explore {
        /// pseudoconvex | strongly-nondeg-indefinite | levi-degenerate
        #[arg(long)]
        kind: QuadricKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        a_radius: f64,
        /// Per-trial search budget on pseudoconvex campaigns (0 disables)
        #[arg(long, default_value_t = 0)]
        budget: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "json")]
        format: String,
    },
}

#[derive(Subcommand)]
enum DiscCommand {
    /// Build the explicit lift and verify attachment, holomorphy, and the
    /// endpoint condition on the boundary circle
    Verify {
        quadric: PathBuf,
        #[command(flatten)]
        params: DiscParamArgs,
        #[arg(long)]
        v: String,
        /// Boundary sample count (power of two, at least 64)
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        /// json (lift + verification) or csv (boundary trace)
        #[arg(long, default_value = "json")]
        format: String,
    },
}

fn parse_complex_vector(s: &str) -> Result<CVector> {
    let entries = s
        .split(',')
        .map(|e| {
            let e = e.trim();
            let (re, im) = match e.split_once(':') {
                Some((re, im)) => (re, im),
                None => (e, "0"),
            };
            let re: f64 = re
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad complex entry '{e}'")))?;
            let im: f64 = im
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad complex entry '{e}'")))?;
            Ok(C64::new(re, im))
        })
        .collect::<Result<Vec<_>>>()?;
    if entries.is_empty() {
        return Err(Error::InvalidInput("empty vector".into()));
    }
    Ok(CVector::from_vec(entries))
}

fn parse_real_vector(s: &str) -> Result<DVector<f64>> {
    let entries = s
        .split(',')
        .map(|e| {
            e.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad real entry '{e}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if entries.is_empty() {
        return Err(Error::InvalidInput("empty vector".into()));
    }
    Ok(DVector::from_vec(entries))
}

/// STATDISC_SEED overrides --seed when set.
fn resolve_seed(flag: u64) -> Result<u64> {
    match std::env::var("STATDISC_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad STATDISC_SEED '{s}'"))),
        Err(_) => Ok(flag),
    }
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => {
            use std::io::Write;
            // a closed pipe (e.g. `| head`) is a clean exit, not a panic
            if writeln!(std::io::stdout(), "{text}").is_err() {
                std::process::exit(0);
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate {
            quadric,
            b,
            tol,
            output,
        } => {
            let q = QuadricModel::load(&quadric)?;
            let b = b.as_deref().map(parse_real_vector).transpose()?;
            let class = quadric::classify(&q, b.as_ref(), tol)?;
            emit(output.as_ref(), &serde_json::to_string_pretty(&class)?)?;
            Ok(0)
        }
        Command::SolveX {
            quadric,
            params,
            force,
            output,
        } => {
            let q = QuadricModel::load(&quadric)?;
            let a = parse_complex_vector(&params.a)?;
            let b = parse_real_vector(&params.b)?;
            let params = DiscParameters::new(&q, a, b)?;
            let guard = contraction_guard(&params)?;
            let opts = SolveOptions {
                force,
                ..SolveOptions::default()
            };
            let sol = solve_x(&params, &opts)?;
            let x_rows: Vec<Vec<[f64; 2]>> = (0..q.n())
                .map(|i| {
                    (0..q.n())
                        .map(|j| [sol.x[(i, j)].re, sol.x[(i, j)].im])
                        .collect()
                })
                .collect();
            let out = serde_json::json!({
                "guard": guard,
                "x": x_rows,
                "residual_norm": sol.residual_norm,
                "iterations": sol.iterations,
                "norm_x": sol.norm_x,
            });
            emit(output.as_ref(), &serde_json::to_string_pretty(&out)?)?;
            Ok(0)
        }
        Command::Disc(DiscCommand::Verify {
            quadric,
            params,
            v,
            samples,
            output,
            format,
        }) => {
            let q = QuadricModel::load(&quadric)?;
            let a = parse_complex_vector(&params.a)?;
            let b = parse_real_vector(&params.b)?;
            let v = parse_complex_vector(&v)?;
            let lift = build_lift(&q, a, b, v, &SolveOptions::default())?;
            match format.as_str() {
                "json" => {
                    let ver = lift.verify(samples)?;
                    let min = stationary_minimal(
                        &lift.quadric,
                        &lift.params.a,
                        &lift.params.b,
                        &lift.v,
                        &SolveOptions::default(),
                    )?;
                    let mut out = lift.to_json(Some(&ver));
                    out["minimality"] = serde_json::to_value(&min)?;
                    out["defective"] = serde_json::Value::Bool(defective(&lift)?);
                    emit(output.as_ref(), &serde_json::to_string_pretty(&out)?)?;
                }
                "csv" => emit(output.as_ref(), &lift.boundary_trace_csv(samples)?)?,
                other => return Err(Error::InvalidInput(format!("unknown format '{other}'"))),
            }
            Ok(0)
        }
        Command::Jet {
            quadric,
            params,
            v,
            tol,
            output,
        } => {
            let q = QuadricModel::load(&quadric)?;
            let a = parse_complex_vector(&params.a)?;
            let b = parse_real_vector(&params.b)?;
            let v = parse_complex_vector(&v)?;
            let report =
                local_diffeo_verdict_with_tol(&q, &a, &b, &v, &SolveOptions::default(), tol)?;
            emit(output.as_ref(), &serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
        Command::SearchMin {
            quadric,
            b,
            budget,
            seed,
            output,
        } => {
            let q = QuadricModel::load(&quadric)?;
            let b = parse_real_vector(&b)?;
            let seed = resolve_seed(seed)?;
            let (result, stats) = search_stationary_minimal(&q, &b, budget, seed)?;
            let found = result.is_some();
            let out = serde_json::json!({
                "found": found,
                "result": result,
                "stats": stats,
            });
            emit(output.as_ref(), &serde_json::to_string_pretty(&out)?)?;
            Ok(if found { 0 } else { 1 })
        }
        Command::Explore {
            kind,
            n,
            d,
            trials,
            seed,
            a_radius,
            budget,
            tol,
            output,
            format,
        } => {
            let format = match format.as_str() {
                "json" => OutputFormat::Json,
                "csv" => OutputFormat::Csv,
                other => return Err(Error::InvalidInput(format!("unknown format '{other}'"))),
            };
            let config = ExperimentConfig {
                kind,
                n,
                d,
                trials,
                seed: resolve_seed(seed)?,
                a_radius,
                budget,
                tolerances: Tolerances {
                    rank: tol,
                    diffeo: tol,
                },
                output_path: output.map(|p| p.display().to_string()),
                format,
            };
            let report = run_experiment(&config)?;
            if config.output_path.is_none() {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!(
                    "{} trials, {} errors, {} candidates ({} survived quarantine)",
                    report.summary.trials,
                    report.summary.errors,
                    report.summary.counterexample_candidates,
                    report.summary.surviving_candidates,
                );
            }
            let v = serde_json::to_value(&report)?;
            explorer::validate_report(&v)?;
            Ok(exit_code(&report))
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
