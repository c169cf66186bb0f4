use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RpcaAlgorithm {
    AdmmG,
    AdmmM,
    Bcd,
    ProxBcd,
}

impl RpcaAlgorithm {
    pub const ALL: [RpcaAlgorithm; 4] = [
        RpcaAlgorithm::AdmmG,
        RpcaAlgorithm::AdmmM,
        RpcaAlgorithm::Bcd,
        RpcaAlgorithm::ProxBcd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RpcaAlgorithm::AdmmG => "admm-g",
            RpcaAlgorithm::AdmmM => "admm-m",
            RpcaAlgorithm::Bcd => "bcd",
            RpcaAlgorithm::ProxBcd => "prox-bcd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        RpcaAlgorithm::ALL.into_iter().find(|a| a.name() == s)
    }
}

/// Model weights and step parameters of one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct RpcaParams {
    /// Weight of the sparse term.
    pub alpha: f64,
    /// Weight of the noise term.
    pub alpha_n: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Proximal weights for `A, B, C, E, Z`.
    pub delta: [f64; 5],
    /// Majorization modulus for the noise block.
    pub lipschitz: f64,
}

/// `2 / max(sqrt(I1), sqrt(I2), sqrt(I3))`.
pub fn default_alpha(dims: [usize; 3]) -> f64 {
    2.0 / (dims.iter().copied().max().unwrap_or(1) as f64).sqrt()
}

impl RpcaParams {
    /// Practical preset: `H_i = beta/2 I`, `beta = 4`, `gamma = 1/beta` for
    /// ADMM-g; `H_i = 2 beta/5 I`, `beta = 5` for ADMM-m; `delta_i = 1` for
    /// the BCD pair.
    pub fn preset(alg: RpcaAlgorithm, dims: [usize; 3]) -> Self {
        let alpha = default_alpha(dims);
        let alpha_n = 1.0;
        let (beta, gamma, d) = match alg {
            RpcaAlgorithm::AdmmG => (4.0, 0.25, 0.5 * 4.0),
            RpcaAlgorithm::AdmmM => (5.0, 0.0, 0.4 * 5.0),
            RpcaAlgorithm::Bcd | RpcaAlgorithm::ProxBcd => (0.0, 0.0, 1.0),
        };
        RpcaParams {
            alpha,
            alpha_n,
            beta,
            gamma,
            delta: [d; 5],
            lipschitz: 2.0 * alpha_n,
        }
    }

    pub fn validate(&self, alg: RpcaAlgorithm) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive, got {v}")))
            }
        };
        pos("alpha", self.alpha)?;
        pos("alpha_n", self.alpha_n)?;
        match alg {
            RpcaAlgorithm::AdmmG => {
                pos("beta", self.beta)?;
                pos("gamma", self.gamma)?;
            }
            RpcaAlgorithm::AdmmM => {
                pos("beta", self.beta)?;
                pos("lipschitz", self.lipschitz)?;
            }
            RpcaAlgorithm::Bcd => return Ok(()),
            RpcaAlgorithm::ProxBcd => {}
        }
        for (i, &d) in self.delta.iter().enumerate() {
            pos(&format!("delta{}", i + 1), d)?;
        }
        Ok(())
    }
}
