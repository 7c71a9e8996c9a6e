use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use fracsolve_core::gagliardo::load_or_assemble;
use fracsolve_core::grid::lp_norm;
use fracsolve_core::io::{read_scalar_csv, write_convergence_csv, write_json, write_scalar_csv, write_vector_csv};
use fracsolve_core::kernels::{bessel_kernel_eval, riesz_kernel_eval};
use fracsolve_core::riesz::riesz_gradient;
use fracsolve_core::selftest::run_selftest;
use fracsolve_core::torsion::{hopf_exponent, hopf_ratio, select_sigma, solve_torsion};
use fracsolve_core::{
    build_grid, distance_field, load_config, solve_problem, BesselParams, ConvolutionPlan, Error, Grid,
    OperatorParams, PairWeightTable, RieszParams, RunConfig,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fracsolve", version, about = "Fractional (p,q)-Laplacian solver with Riesz-gradient convection")]
struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full problem and write solution.csv, report.json and convergence.csv.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the torsion problem and write the field and its lower-bound certificate.
    Torsion {
        #[arg(long)]
        config: PathBuf,
        /// Fixed right-hand side; by default it is selected automatically.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fractional gradient of a field (default: the distance to the boundary).
    Gradient {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print radius,I_alpha,g_alpha rows.
    KernelTable {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
    },
    /// Print the hypothesis report; exit 2 if a required inequality fails.
    CheckHypotheses {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run randomised invariant checks on small built-in instances.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Core(Error),
    Message { kind: &'static str, message: String, code: u8 },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(Error::Hypothesis { .. } | Error::Config { .. } | Error::Parse(_)) => 2,
            Failure::Core(_) => 1,
            Failure::Message { code, .. } => *code,
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: String,
    kind: &'a str,
    exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<&'a str>,
}

type CliResult = std::result::Result<(), Failure>;

fn output_dir(out: Option<PathBuf>, cfg: &RunConfig, default: &str) -> std::io::Result<PathBuf> {
    let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn tables(cfg: &RunConfig, grid: &Grid) -> fracsolve_core::Result<(Arc<PairWeightTable>, Arc<PairWeightTable>)> {
    let e = cfg.exponents;
    let cache = cfg.effective_cache_dir();
    let tp = load_or_assemble(grid, OperatorParams::new(e.s1, e.p)?, cfg.node_cap, cache.as_deref())?;
    let tq = load_or_assemble(grid, OperatorParams::new(e.s2, e.q)?, cfg.node_cap, cache.as_deref())?;
    Ok((Arc::new(tp), Arc::new(tq)))
}

fn solve(config: &Path, out: Option<PathBuf>) -> CliResult {
    let cfg = load_config(config)?;
    let dir = output_dir(out, &cfg, "out").map_err(Error::from)?;
    let inst = cfg.build_instance()?;
    let mut report = solve_problem(&inst)?;
    report.timestamp = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    write_scalar_csv(&dir.join("solution.csv"), &inst.grid, &report.u)?;
    write_json(&dir.join("report.json"), &report)?;
    write_convergence_csv(&dir.join("convergence.csv"), &report)?;
    println!(
        "converged: {} after {} outer steps, residual {:.3e}, min u {:.4e}",
        report.converged, report.iterations, report.final_residual, report.min_value
    );
    println!("wrote {}", dir.display());
    if !report.converged {
        return Err(Failure::Message {
            kind: "non_convergence",
            message: format!("outer iteration did not converge in {} steps", report.iterations),
            code: 1,
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct TorsionRecord {
    sigma: f64,
    eta: f64,
    exponent: f64,
    sup_norm: f64,
    residual: f64,
    iterations: Option<usize>,
    halvings: Option<usize>,
}

fn torsion(config: &Path, sigma: Option<f64>, out: Option<PathBuf>) -> CliResult {
    let cfg = load_config(config)?;
    let dir = output_dir(out, &cfg, "out").map_err(Error::from)?;
    let grid = build_grid(&cfg.domain, cfg.resolution)?;
    let (tp, tq) = tables(&cfg, &grid)?;
    let e = cfg.exponents;
    let (u, record) = match sigma {
        Some(sigma) => {
            let sol = solve_torsion(sigma, &grid, tp, tq, e.s1, &cfg.minimizer)?;
            let exponent = hopf_exponent(&e);
            let eta = hopf_ratio(&sol.u, &distance_field(&grid), exponent)?;
            let rec = TorsionRecord {
                sigma,
                eta,
                exponent,
                sup_norm: sol.u.max_abs(),
                residual: sol.residual,
                iterations: Some(sol.iterations),
                halvings: None,
            };
            (sol.u, rec)
        }
        None => {
            let cert = select_sigma(&cfg.f, &e, &grid, tp, tq, cfg.epsilon, &cfg.minimizer)?;
            let rec = TorsionRecord {
                sigma: cert.sigma,
                eta: cert.eta,
                exponent: cert.exponent,
                sup_norm: cert.sup_norm,
                residual: cert.residual,
                iterations: None,
                halvings: Some(cert.halvings),
            };
            (cert.u, rec)
        }
    };
    write_scalar_csv(&dir.join("torsion.csv"), &grid, &u)?;
    write_json(&dir.join("certificate.json"), &record)?;
    println!(
        "sigma {:.6e}: |u|_inf {:.6e}, eta {:.6e} (exponent {})",
        record.sigma, record.sup_norm, record.eta, record.exponent
    );
    Ok(())
}

fn gradient(config: &Path, s: f64, field: Option<PathBuf>, out: Option<PathBuf>) -> CliResult {
    let cfg = RunConfig::from_file(config)?;
    let grid = build_grid(&cfg.domain, cfg.resolution)?;
    let u = match field {
        Some(path) => read_scalar_csv(&path, &grid)?,
        None => distance_field(&grid),
    };
    let plan = ConvolutionPlan::with_padding(&grid, s, cfg.padding)?;
    let g = riesz_gradient(&grid, &u, &plan)?;
    let path = match out {
        Some(p) => p,
        None => output_dir(None, &cfg, "out").map_err(Error::from)?.join("gradient.csv"),
    };
    write_vector_csv(&path, &grid, &g)?;
    let mags = fracsolve_core::ScalarField::from_interior(&grid, g.magnitudes())?;
    println!("|D^s u|_2 = {:.6e}; wrote {}", lp_norm(&grid, &mags, 2.0)?, path.display());
    Ok(())
}

fn kernel_table(dim: usize, alpha: f64, radii: &[f64]) -> CliResult {
    let bessel = BesselParams::new(dim, alpha)?;
    let riesz = RieszParams::new(dim, alpha).ok();
    println!("radius,I_alpha,g_alpha");
    for &r in radii {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Config { field: "radii".into(), reason: format!("radius {r} must be positive") }.into());
        }
        let x = [r, 0.0];
        let i = match &riesz {
            Some(p) => riesz_kernel_eval(p, &x[..dim])?,
            None => f64::NAN,
        };
        let g = bessel_kernel_eval(&bessel, &x[..dim])?;
        println!("{r:.16e},{i:.16e},{g:.16e}");
    }
    Ok(())
}

fn check_hypotheses(config: &Path) -> CliResult {
    let cfg = RunConfig::from_file(config)?;
    let report = cfg.hypotheses();
    print!("{report}");
    report.into_result()?;
    Ok(())
}

fn selftest(seed: u64) -> CliResult {
    let checks = run_selftest(seed)?;
    let mut failed = 0;
    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::Message {
            kind: "selftest",
            message: format!("{failed} of {} checks failed", checks.len()),
            code: 1,
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Solve { config, out } => solve(&config, out),
        Command::Torsion { config, sigma, out } => torsion(&config, sigma, out),
        Command::Gradient { config, s, field, out } => gradient(&config, s, field, out),
        Command::KernelTable { dim, alpha, radii } => kernel_table(dim, alpha, &radii),
        Command::CheckHypotheses { config } => check_hypotheses(&config),
        Command::Selftest { seed } => selftest(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let record = match &f {
                Failure::Core(e) => ErrorRecord {
                    error: e.to_string(),
                    kind: e.kind(),
                    exit_code: code,
                    name: match e {
                        Error::Hypothesis { name, .. } => Some(name.as_str()),
                        Error::Config { field, .. } => Some(field.as_str()),
                        _ => None,
                    },
                },
                Failure::Message { kind, message, .. } => ErrorRecord {
                    error: message.clone(),
                    kind,
                    exit_code: code,
                    name: None,
                },
            };
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| record.error.clone()));
            ExitCode::from(code)
        }
    }
}
