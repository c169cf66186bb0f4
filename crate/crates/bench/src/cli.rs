//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ncopt::admm::{
    admm_g_gamma_interval, admm_g_params, admm_iteration_bound, admm_m_params, admm_solve, bcd_constants,
    bcd_params, complexity_constants, penalty_solve, proximal_bcd_solve, sigma_n, AdmmConfig, ComplexityConstants,
    ConstantInputs, PenaltyConfig, PenaltySchedule, Variant, DEFAULT_MARGIN,
};
use ncopt::gcg::{gcg_solve, GcgConfig};
use ncopt::stationarity::stationarity_report;
use ncopt::subproblem::ProxMetric;
use ncopt::{BlockVector, ProblemSpec, Setting, Vector};

use crate::bench::{render_csv, run_experiment};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::problem::{load_vector, parse_setting, read, split_point, ProblemFile};

#[derive(Debug, Parser)]
#[command(name = "ncopt", version, about = "Nonconvex block optimization solvers and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamsAlgorithm {
    AdmmG,
    AdmmM,
    ProxBcd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveAlgorithm {
    AdmmG,
    AdmmM,
    Bcd,
    ProxBcd,
    Gcg,
    Penalty,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a tensor RPCA experiment configuration and print CSV.
    BenchRpca {
        config: PathBuf,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every processor.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Also write the CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print parameter choices, complexity constants and the iteration bound.
    Params {
        #[arg(long, value_enum)]
        algorithm: ParamsAlgorithm,
        #[arg(long = "lipschitz", short = 'L')]
        lipschitz: f64,
        /// Smallest eigenvalue of `A_N A_N'`; required for admm-m.
        #[arg(long)]
        sigma_n: Option<f64>,
        /// Comma-separated scales of `H_i = h_i I`, e.g. `3` or `3I,2I`.
        #[arg(long, default_value = "1")]
        h: String,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        /// Uses this `beta` instead of the calculator.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Common bound on `||A_i||`.
        #[arg(long, default_value_t = 1.0)]
        a_norm: f64,
        /// Largest set diameter; positive selects Setting 1.
        #[arg(long, default_value_t = 0.0)]
        diam: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// `Psi_1` minus its lower bound.
        #[arg(long, default_value_t = 1.0)]
        psi_gap: f64,
    },
    /// Evaluate the stationarity residuals of a point.
    Check {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[arg(long)]
        lambda: Option<PathBuf>,
        #[arg(long)]
        setting: u8,
    },
    /// Solve a problem file and report stationarity of the result.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum)]
        algorithm: SolveAlgorithm,
        #[arg(long)]
        setting: u8,
        #[arg(long)]
        x0: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        /// Stopping tolerance; `eps` of the penalty method.
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Write the solution as JSON `{"x": [...], "lambda": [...]}`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "ncopt: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> CliResult<String> {
    match cmd {
        Command::BenchRpca { config, seed, jobs, out } => bench_rpca(config, *seed, *jobs, out.as_deref()),
        Command::Params {
            algorithm,
            lipschitz,
            sigma_n,
            h,
            margin,
            beta,
            gamma,
            a_norm,
            diam,
            eps,
            psi_gap,
        } => params(&ParamsArgs {
            algorithm: *algorithm,
            lipschitz: *lipschitz,
            sigma_n: *sigma_n,
            h: parse_h(h)?,
            margin: *margin,
            beta: *beta,
            gamma: *gamma,
            a_norm: *a_norm,
            diam: *diam,
            eps: *eps,
            psi_gap: *psi_gap,
        }),
        Command::Check { problem, point, lambda, setting } => check(problem, point, lambda.as_deref(), *setting),
        Command::Solve {
            problem,
            algorithm,
            setting,
            x0,
            max_iters,
            eps,
            h,
            margin,
            beta,
            gamma,
            out,
        } => solve(&SolveArgs {
            problem,
            algorithm: *algorithm,
            setting: *setting,
            x0: x0.as_deref(),
            max_iters: *max_iters,
            eps: *eps,
            h: *h,
            margin: *margin,
            beta: *beta,
            gamma: *gamma,
            out: out.as_deref(),
        }),
    }
}

fn bench_rpca(config: &Path, seed: Option<u64>, jobs: usize, out: Option<&Path>) -> CliResult<String> {
    let mut cfg = ExperimentConfig::parse(&read(config)?)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    let rows = pool.install(|| run_experiment(&cfg))?;
    let csv = render_csv(&cfg, &rows);
    if let Some(path) = out {
        std::fs::write(path, &csv).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(csv)
}

fn parse_h(spec: &str) -> CliResult<Vec<f64>> {
    spec.split(',')
        .map(|t| {
            let t = t.trim();
            let t = t.strip_suffix('I').unwrap_or(t);
            t.parse::<f64>().map_err(|_| CliError::Input(format!("bad H scale `{t}`")))
        })
        .collect()
}

pub struct ParamsArgs {
    pub algorithm: ParamsAlgorithm,
    pub lipschitz: f64,
    pub sigma_n: Option<f64>,
    pub h: Vec<f64>,
    pub margin: f64,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub a_norm: f64,
    pub diam: f64,
    pub eps: f64,
    pub psi_gap: f64,
}

fn usage(m: impl Into<String>) -> CliError {
    CliError::Input(m.into())
}

fn params(a: &ParamsArgs) -> CliResult<String> {
    let l = a.lipschitz;
    let metrics = a.h.iter().map(|&s| ProxMetric::scaled_identity(1, s)).collect::<Result<Vec<_>, _>>()?;
    let (beta, gamma, sn) = match a.algorithm {
        ParamsAlgorithm::AdmmG => {
            let (b, g) = match a.beta {
                Some(b) => (b, a.gamma.map_or_else(|| mid_gamma(l, b), Ok)?),
                None => admm_g_params(l, &metrics, a.margin)?,
            };
            (b, Some(g), 1.0)
        }
        ParamsAlgorithm::AdmmM => {
            let sn = a.sigma_n.ok_or_else(|| usage("admm-m needs --sigma-n"))?;
            let b = match a.beta {
                Some(b) => b,
                None => admm_m_params(l, sn, &metrics, a.margin)?,
            };
            (b, None, sn)
        }
        ParamsAlgorithm::ProxBcd => {
            let (b, g) = match a.beta {
                Some(b) => (b, a.gamma.map_or_else(|| mid_gamma(l, b), Ok)?),
                None => bcd_params(l, &metrics, a.margin)?,
            };
            (b, Some(g), 1.0)
        }
    };
    let nb = metrics.len() + 1;
    let inputs = ConstantInputs {
        lipschitz: l,
        beta,
        gamma: gamma.unwrap_or(1.0),
        sigma_n: sn,
        num_blocks: nb,
        a_norms: vec![a.a_norm; nb],
        h_norms: a.h.clone(),
        h_sigma_mins: a.h.clone(),
        max_diam_sq: a.diam * a.diam,
    };
    let consts = match a.algorithm {
        ParamsAlgorithm::AdmmG => complexity_constants(Variant::G, &inputs),
        ParamsAlgorithm::AdmmM => complexity_constants(Variant::M, &inputs),
        ParamsAlgorithm::ProxBcd => bcd_constants(&inputs),
    };
    let setting = if a.diam > 0.0 { Setting::Setting1 } else { Setting::Setting2 };
    let k = admm_iteration_bound(&consts, a.psi_gap, 0.0, a.eps, setting)?;
    let mut s = String::new();
    let _ = writeln!(s, "beta = {beta:.6}");
    if let Some(g) = gamma {
        let _ = writeln!(s, "gamma = {g:.6}");
    }
    match consts {
        ComplexityConstants::Admm { kappa1, kappa2, kappa3, kappa4, tau } => {
            let _ = writeln!(s, "kappa1 = {kappa1:.6e}");
            let _ = writeln!(s, "kappa2 = {kappa2:.6e}");
            let _ = writeln!(s, "kappa3 = {kappa3:.6e}");
            let _ = writeln!(s, "kappa4 = {kappa4:.6e}");
            let _ = writeln!(s, "tau = {tau:.6e}");
        }
        ComplexityConstants::Bcd { kappa5, kappa6, tau } => {
            let _ = writeln!(s, "kappa5 = {kappa5:.6e}");
            let _ = writeln!(s, "kappa6 = {kappa6:.6e}");
            let _ = writeln!(s, "tau = {tau:.6e}");
        }
    }
    let _ = writeln!(s, "K = {k}");
    Ok(s)
}

fn mid_gamma(l: f64, beta: f64) -> CliResult<f64> {
    let (lo, hi) = admm_g_gamma_interval(l, beta)?;
    Ok(0.5 * (lo + hi))
}

fn check(problem: &Path, point: &Path, lambda: Option<&Path>, setting: u8) -> CliResult<String> {
    let setting = parse_setting(setting)?;
    let p = ProblemFile::load(problem)?.build(setting)?;
    let x = split_point(&load_vector(point)?, p.dims())?;
    let lam = lambda.map(load_vector).transpose()?;
    check_lambda(&p, lam.as_ref())?;
    Ok(stationarity_report(&p, &x, lam.as_ref(), None)?.to_text())
}

fn check_lambda(p: &ProblemSpec, lam: Option<&Vector>) -> CliResult<()> {
    match (p.affine(), lam) {
        (Some(a), Some(l)) if l.len() != a.rows() => {
            Err(usage(format!("lambda has length {}, expected {}", l.len(), a.rows())))
        }
        (Some(_), None) => Err(usage("the problem has a coupling constraint: pass --lambda")),
        _ => Ok(()),
    }
}

pub struct SolveArgs<'a> {
    pub problem: &'a Path,
    pub algorithm: SolveAlgorithm,
    pub setting: u8,
    pub x0: Option<&'a Path>,
    pub max_iters: usize,
    pub eps: f64,
    pub h: f64,
    pub margin: f64,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub out: Option<&'a Path>,
}

fn solve(a: &SolveArgs) -> CliResult<String> {
    let file = ProblemFile::load(a.problem)?;
    let p = file.build(parse_setting(a.setting)?)?;
    let dims = p.dims().to_vec();
    let x0 = match (a.x0, &file.x0) {
        (Some(path), _) => split_point(&load_vector(path)?, &dims)?,
        (None, Some(v)) => split_point(&Vector::from_column_slice(v), &dims)?,
        (None, None) => BlockVector::zeros(&dims),
    };
    let metric = |d: usize| ProxMetric::scaled_identity(d, a.h);
    let all_metrics = || dims.iter().map(|&d| metric(d)).collect::<Result<Vec<_>, _>>();
    let rows = p.affine().map_or(0, |af| af.rows());
    let mut s = String::new();
    let (x, lambda) = match a.algorithm {
        SolveAlgorithm::AdmmG | SolveAlgorithm::AdmmM => {
            let metrics = dims[..dims.len() - 1].iter().map(|&d| metric(d)).collect::<Result<Vec<_>, _>>()?;
            let l = p.f().lipschitz();
            let (variant, beta, gamma) = if a.algorithm == SolveAlgorithm::AdmmG {
                let (b, g) = match a.beta {
                    Some(b) => (b, a.gamma.map_or_else(|| mid_gamma(l, b), Ok)?),
                    None => admm_g_params(l, &metrics, a.margin)?,
                };
                (Variant::G, b, g)
            } else {
                let af = p.affine().ok_or_else(|| CliError::Violation("ADMM needs a coupling constraint".into()))?;
                let sn = sigma_n(af.mats().last().expect("nonempty"))?;
                let b = match a.beta {
                    Some(b) => b,
                    None => admm_m_params(l, sn, &metrics, a.margin)?,
                };
                (Variant::M, b, 1.0)
            };
            let cfg = AdmmConfig::new(beta, gamma, metrics)?
                .with_max_iters(a.max_iters)
                .with_eps_theta(a.eps);
            let res = admm_solve(&p, &x0, &Vector::zeros(rows), &cfg, variant)?;
            let _ = writeln!(s, "beta={beta:.12e}");
            let _ = writeln!(s, "iterations={}", res.last.k);
            let _ = writeln!(s, "stop={:?}", res.stop);
            (res.state.x, Some(res.state.lambda))
        }
        SolveAlgorithm::ProxBcd => {
            let res = proximal_bcd_solve(&p, &x0, &all_metrics()?, a.max_iters, a.eps)?;
            let _ = writeln!(s, "iterations={}", res.iters);
            let _ = writeln!(s, "converged={}", res.converged);
            (res.x, None)
        }
        SolveAlgorithm::Gcg => {
            let start = p.set(0).project(x0.block(0));
            let (x, trace) = gcg_solve(&p, &start, &GcgConfig::new(a.max_iters, a.eps)?)?;
            let _ = writeln!(s, "iterations={}", trace.records.len() - 1);
            let _ = writeln!(s, "converged={}", trace.converged);
            (BlockVector::new(vec![x])?, None)
        }
        SolveAlgorithm::Penalty => {
            let mut cfg = PenaltyConfig::new(all_metrics()?, PenaltySchedule::Standard);
            cfg.max_iters = Some(a.max_iters);
            let res = penalty_solve(&p, &x0, a.eps, &cfg)?;
            let _ = writeln!(s, "iterations={}", res.iters);
            let _ = writeln!(s, "constraint_residual={:.12e}", res.constraint_residual);
            (res.x, Some(res.lambda))
        }
        SolveAlgorithm::Bcd => {
            return Err(CliError::Violation(
                "plain BCD is provided for the tensor RPCA model only; use prox-bcd".into(),
            ))
        }
    };
    let lam = lambda.filter(|_| p.affine().is_some());
    s.push_str(&stationarity_report(&p, &x, lam.as_ref(), None)?.to_text());
    if let Some(path) = a.out {
        let json = serde_json::json!({
            "x": x.to_flat().as_slice(),
            "lambda": lam.as_ref().map(|l| l.as_slice().to_vec()),
        });
        std::fs::write(path, json.to_string()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(s)
}
