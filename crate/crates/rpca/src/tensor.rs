//! Dense third-order tensors, mode unfoldings and CP factors.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, mismatch, Result, RpcaError};

/// Dense `I1 x I2 x I3` tensor; entry `(i, j, k)` sits at `i + I1 (j + I2 k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: DVector<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Tensor3 {
            dims,
            data: DVector::zeros(dims.iter().product()),
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        Self::from_vector(dims, DVector::from_vec(data))
    }

    pub fn from_vector(dims: [usize; 3], data: DVector<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(mismatch("tensor entries", n, data.len()));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(RpcaError::NonFinite);
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(dims);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let idx = t.index(i, j, k);
                    t.data[idx] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    /// Entries in storage order.
    pub fn vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn vector_mut(&mut self) -> &mut DVector<f64> {
        &mut self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn check_same_dims(&self, other: &Tensor3, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(mismatch(what, format!("{:?}", self.dims), format!("{:?}", other.dims)));
        }
        Ok(())
    }

    /// Mode-`n` unfolding, `n` in `1..=3`.
    ///
    /// Columns are ordered with the lower remaining index running fastest:
    /// `j + I2 k` for mode 1, `i + I1 k` for mode 2, `i + I1 j` for mode 3.
    pub fn unfold(&self, mode: usize) -> Result<DMatrix<f64>> {
        let [n1, n2, n3] = self.dims;
        match mode {
            1 => Ok(DMatrix::from_column_slice(n1, n2 * n3, self.data.as_slice())),
            2 => Ok(DMatrix::from_fn(n2, n1 * n3, |j, c| self.get(c % n1, j, c / n1))),
            3 => Ok(DMatrix::from_fn(n3, n1 * n2, |k, c| self.get(c % n1, c / n1, k))),
            m => Err(RpcaError::InvalidMode(m)),
        }
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn fold(m: &DMatrix<f64>, mode: usize, dims: [usize; 3]) -> Result<Self> {
        let [n1, n2, n3] = dims;
        let shape = match mode {
            1 => (n1, n2 * n3),
            2 => (n2, n1 * n3),
            3 => (n3, n1 * n2),
            m => return Err(RpcaError::InvalidMode(m)),
        };
        if m.shape() != shape {
            return Err(mismatch(format!("mode-{mode} unfolding"), format!("{shape:?}"), format!("{:?}", m.shape())));
        }
        let t = match mode {
            1 => Tensor3::from_fn(dims, |i, j, k| m[(i, j + n2 * k)]),
            2 => Tensor3::from_fn(dims, |i, j, k| m[(j, i + n1 * k)]),
            _ => Tensor3::from_fn(dims, |i, j, k| m[(k, i + n1 * j)]),
        };
        Ok(t)
    }

    /// Writes three little-endian `u64` dims, then the entries as `f64` in storage order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for d in self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in self.data.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut dims = [0usize; 3];
        let mut buf = [0u8; 8];
        for d in dims.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|e| RpcaError::Format(format!("header: {e}")))?;
            *d = usize::try_from(u64::from_le_bytes(buf))
                .map_err(|_| RpcaError::Format("dimension overflows usize".into()))?;
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| RpcaError::Format("entry count overflows".into()))?;
        let mut data = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            r.read_exact(&mut buf)
                .map_err(|e| RpcaError::Format(format!("payload: {e}")))?;
            data.push(f64::from_le_bytes(buf));
        }
        if r.read(&mut buf)? != 0 {
            return Err(RpcaError::Format("trailing bytes after payload".into()));
        }
        Tensor3::from_vec(dims, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Tensor3::read_from(std::io::BufReader::new(f))
    }
}

/// Columnwise Kronecker product; row `a q + b` of column `r` is `X[a, r] Y[b, r]`.
pub fn khatri_rao(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != y.ncols() {
        return Err(mismatch("Khatri-Rao columns", x.ncols(), y.ncols()));
    }
    let q = y.nrows();
    Ok(DMatrix::from_fn(x.nrows() * q, x.ncols(), |row, r| x[(row / q, r)] * y[(row % q, r)]))
}

/// CP factors `A (I1 x R)`, `B (I2 x R)`, `C (I3 x R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl CpFactors {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let r = a.ncols();
        if r == 0 {
            return Err(invalid("rank", "must be at least 1"));
        }
        if b.ncols() != r || c.ncols() != r {
            return Err(mismatch("CP rank", r, format!("{} and {}", b.ncols(), c.ncols())));
        }
        Ok(CpFactors { a, b, c })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.a.nrows(), self.b.nrows(), self.c.nrows()]
    }

    /// `[[A, B, C]]` through the mode-1 form `A (C kr B)'`.
    pub fn reconstruct(&self) -> Tensor3 {
        let m = &self.a * khatri_rao(&self.c, &self.b).expect("equal ranks").transpose();
        Tensor3 {
            dims: self.dims(),
            data: DVector::from_column_slice(m.as_slice()),
        }
    }
}

/// `Z_(n)` times the Khatri-Rao product of the other two factors, in the
/// order used by the unfolding: `(C kr B)`, `(C kr A)`, `(B kr A)`.
pub fn mttkrp(z: &Tensor3, f: &CpFactors, mode: usize) -> Result<DMatrix<f64>> {
    if z.dims() != f.dims() {
        return Err(mismatch("tensor and factors", format!("{:?}", f.dims()), format!("{:?}", z.dims())));
    }
    let [n1, n2, n3] = z.dims();
    let r = f.rank();
    let (a, b, c) = (&f.a, &f.b, &f.c);
    let mut out = match mode {
        1 => DMatrix::zeros(n1, r),
        2 => DMatrix::zeros(n2, r),
        3 => DMatrix::zeros(n3, r),
        m => return Err(RpcaError::InvalidMode(m)),
    };
    if mode == 1 {
        return Ok(z.unfold(1)? * khatri_rao(c, b)?);
    }
    let data = z.as_slice();
    for k in 0..n3 {
        for j in 0..n2 {
            let base = n1 * (j + n2 * k);
            for q in 0..r {
                let mut s = 0.0;
                for i in 0..n1 {
                    s += data[base + i] * a[(i, q)];
                }
                if mode == 2 {
                    out[(j, q)] += s * c[(k, q)];
                } else {
                    out[(k, q)] += s * b[(j, q)];
                }
            }
        }
    }
    Ok(out)
}

/// `(X'X) o (Y'Y)`, the Gram matrix of `X kr Y`.
pub fn hadamard_gram(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    (x.transpose() * x).component_mul(&(y.transpose() * y))
}
