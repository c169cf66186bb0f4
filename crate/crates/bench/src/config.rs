//! Experiment configuration files.

use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// A single value or a list of them.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum ConfigAlgorithm {
    #[serde(rename = "admm-g")]
    AdmmG,
    #[serde(rename = "admm-m")]
    AdmmM,
    #[serde(rename = "bcd")]
    Bcd,
    #[serde(rename = "prox-bcd")]
    ProxBcd,
    #[serde(rename = "gcg")]
    Gcg,
    #[serde(rename = "penalty")]
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum RInitRule {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "plus1")]
    Plus1,
    #[serde(rename = "plus20pct")]
    Plus20Pct,
}

impl RInitRule {
    pub fn rank(&self, r_cp: usize) -> usize {
        match self {
            RInitRule::Exact => r_cp,
            RInitRule::Plus1 => r_cp + 1,
            RInitRule::Plus20Pct => r_cp + (2 * r_cp).div_ceil(10),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum ParamsPreset {
    #[serde(rename = "practical")]
    Practical,
}

fn default_instances() -> usize {
    20
}
fn default_max_iters() -> usize {
    2000
}
fn default_theta_tol() -> f64 {
    1e-6
}
fn default_rule() -> RInitRule {
    RInitRule::Plus1
}
fn default_preset() -> ParamsPreset {
    ParamsPreset::Practical
}

/// One benchmark table: every `(dims, R_cp)` pair is a row, run by every algorithm.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: OneOrMany<ConfigAlgorithm>,
    pub dims: OneOrMany<[usize; 3]>,
    #[serde(rename = "R_cp")]
    pub r_cp: OneOrMany<usize>,
    #[serde(rename = "R_init_rule", default = "default_rule")]
    pub r_init_rule: RInitRule,
    #[serde(default = "default_instances")]
    pub num_instances: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_theta_tol")]
    pub theta_tol: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_preset")]
    pub params: ParamsPreset,
}

impl ExperimentConfig {
    /// Parses and validates; syntax errors report line and column.
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Input(format!("config line {} column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Input(format!("config: {m}")));
        if self.algorithm.to_vec().is_empty() {
            return bad("algorithm list is empty");
        }
        if self.dims.to_vec().iter().any(|d| d.contains(&0)) {
            return bad("dims must be positive");
        }
        if self.r_cp.to_vec().contains(&0) {
            return bad("R_cp must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.theta_tol > 0.0 && self.theta_tol.is_finite()) {
            return bad("theta_tol must be positive");
        }
        Ok(())
    }

    /// `(dims, R_cp)` rows in file order, dims outermost.
    pub fn rows(&self) -> Vec<([usize; 3], usize)> {
        let rcps = self.r_cp.to_vec();
        self.dims
            .to_vec()
            .into_iter()
            .flat_map(|d| rcps.iter().map(move |&r| (d, r)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_lists() {
        let c = ExperimentConfig::parse(r#"{"algorithm": ["admm-g", "bcd"], "dims": [10, 20, 30], "R_cp": [3, 10]}"#)
            .unwrap();
        assert_eq!(c.num_instances, 20);
        assert_eq!(c.max_iters, 2000);
        assert_eq!(c.theta_tol, 1e-6);
        assert_eq!(c.rows(), vec![([10, 20, 30], 3), ([10, 20, 30], 10)]);
        assert_eq!(c.algorithm.to_vec(), vec![ConfigAlgorithm::AdmmG, ConfigAlgorithm::Bcd]);
    }

    #[test]
    fn rank_rules() {
        assert_eq!(RInitRule::Exact.rank(10), 10);
        assert_eq!(RInitRule::Plus1.rank(10), 11);
        assert_eq!(RInitRule::Plus20Pct.rank(10), 12);
        assert_eq!(RInitRule::Plus20Pct.rank(3), 4);
        assert_eq!(RInitRule::Plus20Pct.rank(15), 18);
    }

    #[test]
    fn rejects_unknown_keys_with_location() {
        let e = ExperimentConfig::parse("{\n\"algorithm\": \"admm-g\",\n\"dims\": [1,2,3],\n\"R_cp\": 1,\n\"seed\": 4\n}")
            .unwrap_err();
        match e {
            CliError::Input(m) => assert!(m.contains("line 5"), "{m}"),
            _ => panic!(),
        }
        assert!(ExperimentConfig::parse(r#"{"algorithm": "admm-x", "dims": [1,2,3], "R_cp": 1}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"algorithm": "admm-g", "dims": [1,2,3], "R_cp": 0}"#).is_err());
    }
}
