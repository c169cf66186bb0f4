//! Seeded batch runs of the tensor RPCA solvers.

use ncopt_rpca::{generate_instance, relative_error, rpca_solve, RpcaAlgorithm, RpcaParams, RpcaState};
use rayon::prelude::*;

use crate::config::{ConfigAlgorithm, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::format::sig6;

/// Relative error below which a run counts as a recovery.
pub const SUCCESS_THRESHOLD: f64 = 0.01;

pub const CSV_HEADER: &str = "algorithm,I1,I2,I3,Rcp,Rinit,iter_mean,err_mean,num_success";

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    pub seed: u64,
    pub iters: usize,
    pub rel_err: f64,
    pub converged: bool,
}

/// Aggregate of one algorithm on one `(dims, R_cp)` row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: RpcaAlgorithm,
    pub dims: [usize; 3],
    pub r_cp: usize,
    pub r_init: usize,
    pub iter_mean: f64,
    pub err_mean: f64,
    pub num_success: usize,
    pub num_instances: usize,
    /// Indexed by instance.
    pub outcomes: Vec<Result<InstanceOutcome, String>>,
}

impl ResultRow {
    pub fn num_converged(&self) -> usize {
        self.outcomes.iter().filter(|o| matches!(o, Ok(r) if r.converged)).count()
    }

    pub fn csv_line(&self) -> String {
        let [i1, i2, i3] = self.dims;
        format!(
            "{},{i1},{i2},{i3},{},{},{},{},{}",
            self.algorithm.name(),
            self.r_cp,
            self.r_init,
            sig6(self.iter_mean),
            sig6(self.err_mean),
            self.num_success
        )
    }
}

pub fn rpca_algorithm(a: ConfigAlgorithm) -> CliResult<RpcaAlgorithm> {
    match a {
        ConfigAlgorithm::AdmmG => Ok(RpcaAlgorithm::AdmmG),
        ConfigAlgorithm::AdmmM => Ok(RpcaAlgorithm::AdmmM),
        ConfigAlgorithm::Bcd => Ok(RpcaAlgorithm::Bcd),
        ConfigAlgorithm::ProxBcd => Ok(RpcaAlgorithm::ProxBcd),
        ConfigAlgorithm::Gcg | ConfigAlgorithm::Penalty => Err(CliError::Violation(
            "gcg and penalty do not apply to the tensor RPCA model".into(),
        )),
    }
}

/// Seed of instance `idx`.
pub fn instance_seed(base_seed: u64, idx: usize) -> u64 {
    base_seed.wrapping_add(idx as u64)
}

/// Generates, solves and scores one instance.
pub fn run_instance(
    alg: RpcaAlgorithm,
    dims: [usize; 3],
    r_cp: usize,
    r_init: usize,
    seed: u64,
    max_iters: usize,
    theta_tol: f64,
) -> ncopt_rpca::Result<InstanceOutcome> {
    let inst = generate_instance(dims, r_cp, seed)?;
    let params = RpcaParams::preset(alg, dims);
    let init = RpcaState::initial(&inst.t, r_init, seed)?;
    let run = rpca_solve(&inst.t, init, &params, alg, max_iters, theta_tol)?;
    Ok(InstanceOutcome {
        seed,
        iters: run.iters,
        rel_err: relative_error(&run.state.z, &inst.z0)?,
        converged: run.converged,
    })
}

/// Runs every row and algorithm of `cfg`; instances of a row run in parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    let algs = cfg.algorithm.to_vec().into_iter().map(rpca_algorithm).collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (dims, r_cp) in cfg.rows() {
        let r_init = cfg.r_init_rule.rank(r_cp);
        for &alg in &algs {
            let outcomes: Vec<Result<InstanceOutcome, String>> = (0..cfg.num_instances)
                .into_par_iter()
                .map(|idx| {
                    let seed = instance_seed(cfg.base_seed, idx);
                    run_instance(alg, dims, r_cp, r_init, seed, cfg.max_iters, cfg.theta_tol).map_err(|e| e.to_string())
                })
                .collect();
            rows.push(aggregate(alg, dims, r_cp, r_init, outcomes));
        }
    }
    Ok(rows)
}

/// Means over solved instances; failed instances count as unsuccessful.
pub fn aggregate(
    algorithm: RpcaAlgorithm,
    dims: [usize; 3],
    r_cp: usize,
    r_init: usize,
    outcomes: Vec<Result<InstanceOutcome, String>>,
) -> ResultRow {
    let ok: Vec<&InstanceOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let n = ok.len() as f64;
    ResultRow {
        algorithm,
        dims,
        r_cp,
        r_init,
        iter_mean: ok.iter().map(|o| o.iters as f64).sum::<f64>() / n,
        err_mean: ok.iter().map(|o| o.rel_err).sum::<f64>() / n,
        num_success: ok.iter().filter(|o| o.rel_err < SUCCESS_THRESHOLD).count(),
        num_instances: outcomes.len(),
        outcomes,
    }
}

/// Seed comment, header and one line per row.
pub fn render_csv(cfg: &ExperimentConfig, rows: &[ResultRow]) -> String {
    let mut out = String::new();
    if cfg.num_instances == 0 {
        out.push_str(&format!("# seeds: none (base_seed={})\n", cfg.base_seed));
    } else {
        let last = instance_seed(cfg.base_seed, cfg.num_instances - 1);
        out.push_str(&format!(
            "# seeds: {}..={} (ChaCha8Rng::seed_from_u64)\n",
            cfg.base_seed, last
        ));
    }
    for row in rows {
        for (idx, o) in row.outcomes.iter().enumerate() {
            if let Err(e) = o {
                out.push_str(&format!("# failed: {} instance {idx}: {e}\n", row.algorithm.name()));
            }
        }
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    if cfg.num_instances > 0 {
        for row in rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
    }
    out
}
