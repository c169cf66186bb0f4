//! JSON problem, point and multiplier files.
//!
//! A problem file describes a quadratic `f(x) = x'Qx/2 + c'x + c0` over the
//! stacked blocks, per-block regularizers and sets, and an optional coupling
//! constraint `sum_i A_i x_i = b`. Matrices are lists of rows.

use std::path::Path;
use std::sync::Arc;

use ncopt::prox::{PenaltyKind, ScalarPenalty, SeparablePenalty, ZeroRegularizer};
use ncopt::{Affine, BlockVector, ConstraintSet, Matrix, ProblemSpec, Quadratic, Regularizer, Setting, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegFile {
    None,
    L1 { alpha: f64 },
    Scad { alpha: f64, a: f64 },
    Mcp { alpha: f64, gamma: f64 },
    CappedL1 { alpha: f64, cap: f64 },
    Lsp { alpha: f64, theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetFile {
    Whole,
    Ball { radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockFile {
    pub reg: RegFile,
    #[serde(default = "whole")]
    pub set: SetFile,
}

fn whole() -> SetFile {
    SetFile::Whole
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineFile {
    /// One matrix per block.
    pub a: Vec<Vec<Vec<f64>>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dims: Vec<usize>,
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    #[serde(default)]
    pub c0: f64,
    /// `N` entries, or `N - 1` when the last block is free.
    pub blocks: Vec<BlockFile>,
    #[serde(default)]
    pub affine: Option<AffineFile>,
    #[serde(default)]
    pub f_star: Option<f64>,
    /// Stacked starting point for `solve`.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> CliResult<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Input(format!("{what}: rows have unequal lengths")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Matrix::from_row_slice(r, c, &flat))
}

fn regularizer(r: &RegFile) -> CliResult<Arc<dyn Regularizer>> {
    let pen = |kind, alpha, shape| -> CliResult<Arc<dyn Regularizer>> {
        Ok(Arc::new(SeparablePenalty::new(ScalarPenalty::new(kind, alpha, shape)?)))
    };
    match *r {
        RegFile::None => Ok(Arc::new(ZeroRegularizer)),
        RegFile::L1 { alpha } => pen(PenaltyKind::L1, alpha, 0.0),
        RegFile::Scad { alpha, a } => pen(PenaltyKind::Scad, alpha, a),
        RegFile::Mcp { alpha, gamma } => pen(PenaltyKind::Mcp, alpha, gamma),
        RegFile::CappedL1 { alpha, cap } => pen(PenaltyKind::CappedL1, alpha, cap),
        RegFile::Lsp { alpha, theta } => pen(PenaltyKind::Lsp, alpha, theta),
    }
}

fn set(s: &SetFile, dim: usize) -> CliResult<ConstraintSet> {
    Ok(match s {
        SetFile::Whole => ConstraintSet::whole(dim),
        SetFile::Ball { radius } => ConstraintSet::ball(dim, *radius)?,
        SetFile::Box { lo, hi } => {
            ConstraintSet::boxed(Vector::from_column_slice(lo), Vector::from_column_slice(hi))?
        }
    })
}

impl ProblemFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Input(format!("problem line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&read(path)?)
    }

    /// Builds the problem under `setting`; structural mismatches are violations.
    pub fn build(&self, setting: Setting) -> CliResult<ProblemSpec> {
        let n: usize = self.dims.iter().sum();
        let q = rows_to_matrix(&self.q, "q")?;
        if q.nrows() != n || q.ncols() != n || self.c.len() != n {
            return Err(CliError::Input(format!("q must be {n}x{n} and c of length {n}")));
        }
        let f = Quadratic::new(q, Vector::from_column_slice(&self.c), self.c0, self.dims.clone())?;
        if self.blocks.len() > self.dims.len() {
            return Err(CliError::Input("more block entries than blocks".into()));
        }
        let regs = self.blocks.iter().map(|b| regularizer(&b.reg)).collect::<CliResult<Vec<_>>>()?;
        let sets = self
            .blocks
            .iter()
            .zip(&self.dims)
            .map(|(b, &d)| set(&b.set, d))
            .collect::<CliResult<Vec<_>>>()?;
        let affine = match &self.affine {
            None => None,
            Some(a) => {
                let mats = a
                    .a
                    .iter()
                    .enumerate()
                    .map(|(i, m)| rows_to_matrix(m, &format!("A_{i}")))
                    .collect::<CliResult<Vec<_>>>()?;
                Some(Affine::new(mats, Vector::from_column_slice(&a.b))?)
            }
        };
        let mut p = ProblemSpec::new(Arc::new(f), regs, sets, affine, setting)?.with_quadratic_block_solvers()?;
        if let Some(fs) = self.f_star {
            p = p.with_f_star(fs);
        }
        Ok(p)
    }
}

pub fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// A flat JSON array of numbers.
pub fn load_vector(path: &Path) -> CliResult<Vector> {
    let v: Vec<f64> = serde_json::from_str(&read(path)?).map_err(|e| {
        CliError::Input(format!("{} line {} column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    Ok(Vector::from_vec(v))
}

pub fn split_point(flat: &Vector, dims: &[usize]) -> CliResult<BlockVector> {
    BlockVector::from_flat(flat.as_slice(), dims).map_err(|e| CliError::Input(e.to_string()))
}

pub fn parse_setting(s: u8) -> CliResult<Setting> {
    match s {
        1 => Ok(Setting::Setting1),
        2 => Ok(Setting::Setting2),
        _ => Err(CliError::Input(format!("setting must be 1 or 2, got {s}"))),
    }
}
