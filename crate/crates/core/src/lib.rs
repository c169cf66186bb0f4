//! Block-structured nonconvex, nonsmooth optimization.
//!
//! The crate provides the problem model ([`block`]), proximal maps
//! ([`prox`]), a generalized conditional gradient method ([`gcg`]), proximal
//! ADMM variants and proximal block coordinate descent ([`admm`]), and
//! stationarity measures ([`stationarity`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod block;
pub mod error;
pub mod gcg;
pub mod instances;
pub mod linalg;
pub mod prox;
pub mod stationarity;
pub mod subproblem;

pub use block::{
    eval_aug_lagrangian, eval_objective, Affine, BlockVector, ConstraintSet, ProblemSpec,
    Quadratic, Regularizer, RegularizerKind, Setting, SmoothFunction,
};
pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
