//! Robust tensor PCA with a CP low-rank part, solved by proximal ADMM-g,
//! proximal ADMM-m, plain BCD and proximal BCD.

pub mod coupling;
pub mod error;
pub mod instance;
pub mod params;
pub mod solve;
pub mod steps;
pub mod tensor;

pub use error::{Result, RpcaError};
pub use instance::{generate_instance, relative_error, RpcaInstance};
pub use params::{RpcaAlgorithm, RpcaParams};
pub use solve::{rpca_solve, RpcaRun};
pub use steps::{rpca_admm_g_step, rpca_admm_m_step, rpca_bcd_step, RpcaState};
pub use tensor::{khatri_rao, CpFactors, Tensor3};
