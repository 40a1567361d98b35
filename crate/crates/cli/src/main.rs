//! `gwgauss`: closed-form Gromov-Wasserstein bounds and maps between
//! Gaussian measures, plus the empirical side on sampled point clouds.
//!
//! Exit codes: 0 on success, 1 on numerical failure (the error name is
//! printed), 2 on malformed input (with a line/field diagnostic).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use gwgauss::io::{self, InputError};
use gwgauss::{
    assignment_slope_data, bounds, brute_force_gw, entropic_gw_solve, ggw_map, sample, sorted_eig,
    w2_squared, AffineMap, EntropicGwParams, GaussianMeasure, GwError, PointCloud, SolveReport,
};

mod selfcheck;

#[derive(Parser)]
#[command(
    name = "gwgauss",
    version,
    about = "Gromov-Wasserstein bounds, maps and experiments for Gaussian measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower/upper bounds, gap and gap cap for two Gaussians (JSON out).
    Bounds {
        /// Source Gaussian as JSON: {"mean": [..], "cov": [[..], ..]}.
        a: PathBuf,
        /// Target Gaussian, same schema.
        b: PathBuf,
        /// Omit the metadata block for byte-reproducible output.
        #[arg(long)]
        no_meta: bool,
    },
    /// Optimal affine map of the Gaussian-restricted problem (JSON out).
    Map {
        a: PathBuf,
        b: PathBuf,
        /// Reflection signs, one +-1 per target rank (default all +1).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        signs: Option<Vec<f64>>,
        #[arg(long)]
        no_meta: bool,
    },
    /// Quadratic Wasserstein distance squared with its affine map.
    W2 {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        no_meta: bool,
    },
    /// Sweep the second source eigenvalue and emit CSV rows
    /// (alpha2, ggw2, lgw2, gap_cap) for the pair
    /// N(0, diag(alpha1, alpha2)) vs N(0, beta1).
    Sweep {
        #[arg(long)]
        alpha1: f64,
        #[arg(long)]
        beta1: f64,
        /// Range as lo:hi:points, endpoints included (e.g. 0:2:41).
        #[arg(long, value_name = "LO:HI:POINTS")]
        alpha2_range: String,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample both Gaussians, run the entropic solver, report the result
    /// (JSON out) and optionally dump scatter/plan CSV files.
    Empirical {
        a: PathBuf,
        b: PathBuf,
        /// Number of samples per cloud.
        #[arg(long)]
        k: usize,
        /// Sampling seed; the source cloud uses `seed`, the target `seed+1`.
        #[arg(long, env = "GWGAUSS_SEED", default_value_t = 0)]
        seed: u64,
        /// Final entropic regularization strength.
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 60)]
        max_outer: usize,
        #[arg(long, default_value_t = 500)]
        max_sinkhorn: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Extra solver runs from seeded random initializations.
        #[arg(long, default_value_t = 0)]
        restarts: usize,
        /// Write first-coordinate scatter rows (x,y,mass) here.
        #[arg(long)]
        scatter_out: Option<PathBuf>,
        /// Write the dense coupling matrix here.
        #[arg(long)]
        plan_out: Option<PathBuf>,
        #[arg(long)]
        no_meta: bool,
    },
    /// Exhaustive permutation solver for two CSV point clouds (k <= 8).
    Oracle {
        x: PathBuf,
        y: PathBuf,
        /// Treat the last CSV column as per-point weights.
        #[arg(long)]
        weighted: bool,
        #[arg(long)]
        no_meta: bool,
    },
    /// Run the invariant battery on random instances; exit 0 when clean.
    Selfcheck {
        #[arg(long, env = "GWGAUSS_SEED", default_value_t = 0)]
        seed: u64,
    },
}

enum CliError {
    /// Malformed input (schema violation, unreadable file): exit 2.
    Input(String),
    /// Numerical failure: exit 1, message starts with the error name.
    Numerical(GwError),
    /// Selfcheck found a violated invariant: exit 1.
    CheckFailed(String),
}

impl From<GwError> for CliError {
    fn from(e: GwError) -> Self {
        CliError::Numerical(e)
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_gaussian(path: &Path) -> Result<GaussianMeasure, CliError> {
    let text = read_input(path)?;
    io::gaussian_from_json(&text).map_err(|e| match e {
        InputError::Schema(s) => CliError::Input(format!("{}: {s}", path.display())),
        InputError::Numerical(n) => CliError::Numerical(n),
    })
}

fn load_cloud(path: &Path, weighted: bool) -> Result<PointCloud, CliError> {
    let text = read_input(path)?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        io::cloud_from_json(&text)
    } else {
        io::cloud_from_csv(&text, weighted)
    };
    parsed.map_err(|e| match e {
        InputError::Schema(s) => CliError::Input(format!("{}: {s}", path.display())),
        InputError::Numerical(n) => CliError::Numerical(n),
    })
}

fn meta_value() -> Value {
    json!({
        "tool": format!("gwgauss {}", env!("CARGO_PKG_VERSION")),
        "generated_at": chrono::Utc::now().to_rfc3339(),
    })
}

fn emit_json(mut doc: Value, no_meta: bool) {
    if !no_meta {
        doc["meta"] = meta_value();
    }
    println!("{}", serde_json::to_string_pretty(&doc).expect("valid JSON"));
}

fn map_to_json(map: &AffineMap) -> Value {
    let matrix: Vec<Vec<f64>> = (0..map.output_dim())
        .map(|i| map.matrix().row(i).iter().copied().collect())
        .collect();
    let offset: Vec<f64> = map.offset().iter().copied().collect();
    json!({
        "matrix": matrix,
        "offset": offset,
        "input_dim": map.input_dim(),
        "output_dim": map.output_dim(),
    })
}

fn report_to_json(report: &SolveReport, include_plan: bool) -> Value {
    let mut doc = json!({
        "objective": report.objective,
        "iterations": report.iterations,
        "converged": report.converged,
        "marginal_error": report.marginal_error,
    });
    if include_plan {
        let m = report.plan.matrix();
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect();
        doc["plan"] = json!(rows);
    }
    doc
}

fn parse_range(range: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Input(format!(
            "range '{range}' must be lo:hi:points"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Input(format!("'{}' is not a number", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Input(format!("'{}' is not a number", parts[1])))?;
    let points: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Input(format!("'{}' is not a point count", parts[2])))?;
    if points == 0 {
        return Err(CliError::Input("point count must be positive".into()));
    }
    Ok(if points == 1 {
        vec![lo]
    } else {
        (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect()
    })
}

fn write_output(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bounds { a, b, no_meta } => {
            let g0 = load_gaussian(&a)?;
            let g1 = load_gaussian(&b)?;
            let report = bounds(&g0, &g1);
            emit_json(serde_json::to_value(&report).expect("plain struct"), no_meta);
        }
        Command::Map {
            a,
            b,
            signs,
            no_meta,
        } => {
            let g0 = load_gaussian(&a)?;
            let g1 = load_gaussian(&b)?;
            let map = ggw_map(&g0, &g1, signs.as_deref())?;
            emit_json(map_to_json(&map), no_meta);
        }
        Command::W2 { a, b, no_meta } => {
            let g0 = load_gaussian(&a)?;
            let g1 = load_gaussian(&b)?;
            let (value, map) = w2_squared(&g0, &g1)?;
            let doc = json!({
                "value": value,
                "map": map.as_ref().map(map_to_json),
            });
            emit_json(doc, no_meta);
        }
        Command::Sweep {
            alpha1,
            beta1,
            alpha2_range,
            out,
        } => {
            let mut csv = String::from("alpha2,ggw2,lgw2,gap_cap\n");
            for alpha2 in parse_range(&alpha2_range)? {
                let g0 = GaussianMeasure::centered_diagonal(&[alpha1, alpha2])?;
                let g1 = GaussianMeasure::centered_diagonal(&[beta1])?;
                let b = bounds(&g0, &g1);
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    io::fmt_f64(alpha2),
                    io::fmt_f64(b.upper),
                    io::fmt_f64(b.lower),
                    io::fmt_f64(b.gap_cap)
                ));
            }
            match out {
                Some(path) => write_output(&path, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Empirical {
            a,
            b,
            k,
            seed,
            epsilon,
            max_outer,
            max_sinkhorn,
            tol,
            restarts,
            scatter_out,
            plan_out,
            no_meta,
        } => {
            if k == 0 {
                return Err(CliError::Input("k must be positive".into()));
            }
            let g0 = load_gaussian(&a)?;
            let g1 = load_gaussian(&b)?;
            let x = sample(&g0, k, seed);
            let y = sample(&g1, k, seed.wrapping_add(1));
            let params = EntropicGwParams {
                epsilon,
                max_outer,
                max_sinkhorn,
                tol,
                seed,
                restarts,
            };
            let report = entropic_gw_solve(&x, &y, &params)?;

            // Reference lines y = +-slope x from the leading eigenvalues.
            let top0 = sorted_eig(g0.covariance()).eigenvalues()[0];
            let top1 = sorted_eig(g1.covariance()).eigenvalues()[0];
            let slope = if top0 > 0.0 { (top1 / top0).sqrt() } else { 0.0 };

            if let Some(path) = &scatter_out {
                let mut csv = String::from("x_first,y_first,mass\n");
                for row in assignment_slope_data(&x, &y, &report.plan) {
                    csv.push_str(&format!(
                        "{},{},{}\n",
                        io::fmt_f64(row.x),
                        io::fmt_f64(row.y),
                        io::fmt_f64(row.mass)
                    ));
                }
                write_output(path, &csv)?;
            }
            if let Some(path) = &plan_out {
                write_output(path, &io::plan_to_csv(&report.plan))?;
            }

            let mut doc = report_to_json(&report, false);
            doc["k"] = json!(k);
            doc["seed"] = json!(seed);
            doc["epsilon"] = json!(epsilon);
            doc["reference_slope"] = json!(slope);
            emit_json(doc, no_meta);
        }
        Command::Oracle {
            x,
            y,
            weighted,
            no_meta,
        } => {
            let cx = load_cloud(&x, weighted)?;
            let cy = load_cloud(&y, weighted)?;
            let report = brute_force_gw(&cx, &cy)?;
            emit_json(report_to_json(&report, true), no_meta);
        }
        Command::Selfcheck { seed } => {
            selfcheck::run(seed).map_err(CliError::CheckFailed)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Numerical(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::CheckFailed(msg)) => {
            eprintln!("selfcheck failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
