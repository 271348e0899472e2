//! Dense Cholesky factorization with column appending, triangular solves and
//! the diagonal of the inverse.

use crate::error::{KeaError, Result};

/// Pivot tolerance on squared quantities (Schur complements, squared power
/// values). Anything at or below is treated as numerically singular.
pub const PIVOT_TOL: f64 = 1e-13;

/// Lower-triangular factor `L` with `L L^T = K`, stored as packed rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CholeskyFactor {
    n: usize,
    // row i occupies packed[i(i+1)/2 .. i(i+1)/2 + i + 1]
    packed: Vec<f64>,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl CholeskyFactor {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Factors the symmetric `n`x`n` row-major matrix `k`. Only the lower
    /// triangle is read.
    pub fn factor(k: &[f64], n: usize) -> Result<Self> {
        if k.len() != n * n {
            return Err(KeaError::InvalidArgument(format!(
                "expected {n}x{n} matrix, got {} entries",
                k.len()
            )));
        }
        let mut f = Self {
            n: 0,
            packed: Vec::with_capacity(row_offset(n)),
        };
        for i in 0..n {
            f.append_in_place(&k[i * n..i * n + i], k[i * n + i])?;
        }
        Ok(f)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let o = row_offset(i);
        &self.packed[o..o + i + 1]
    }

    /// Entry `L[i][j]` (zero above the diagonal).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.packed[row_offset(i) + j]
        }
    }

    /// Factor of the bordered matrix `[[K, col], [col^T, diag]]`.
    pub fn append(&self, col: &[f64], diag: f64) -> Result<Self> {
        let mut next = self.clone();
        next.append_in_place(col, diag)?;
        Ok(next)
    }

    pub fn append_in_place(&mut self, col: &[f64], diag: f64) -> Result<()> {
        let w = self.forward_solve(col)?;
        let schur = diag - w.iter().map(|v| v * v).sum::<f64>();
        self.push_row(w, schur)
    }

    /// Appends a row whose off-diagonal part `w` is already known
    /// (`L w = col`), given the Schur complement `diag - |w|^2`.
    pub(crate) fn push_row(&mut self, w: Vec<f64>, schur: f64) -> Result<()> {
        debug_assert_eq!(w.len(), self.n);
        if !(schur > PIVOT_TOL) {
            return Err(KeaError::NotPositiveDefinite {
                index: self.n,
                pivot: schur,
            });
        }
        self.packed.extend(w);
        self.packed.push(schur.sqrt());
        self.n += 1;
        Ok(())
    }

    /// Solves `L w = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len())?;
        let mut w = b.to_vec();
        for i in 0..self.n {
            let row = self.row(i);
            let s: f64 = row[..i].iter().zip(&w[..i]).map(|(l, v)| l * v).sum();
            w[i] = (w[i] - s) / row[i];
        }
        Ok(w)
    }

    /// Solves `L^T x = b`.
    pub fn backward_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len())?;
        let mut x = b.to_vec();
        for i in (0..self.n).rev() {
            let xi = x[i] / self.get(i, i);
            x[i] = xi;
            // column i of L^T is row i of L
            for (j, l) in self.row(i)[..i].iter().enumerate() {
                x[j] -= l * xi;
            }
        }
        Ok(x)
    }

    /// Solves `K x = b` with `K = L L^T`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let w = self.forward_solve(b)?;
        self.backward_solve(&w)
    }

    /// Diagonal of `K^{-1}`, i.e. the squared column norms of `L^{-1}`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.n;
        let mut diag = vec![0.0; n];
        // Column j of L^{-1} solves L c = e_j and vanishes above row j.
        let mut c = vec![0.0; n];
        for j in 0..n {
            c[j] = 1.0 / self.get(j, j);
            let mut sq = c[j] * c[j];
            for i in j + 1..n {
                let row = self.row(i);
                let s: f64 = row[j..i].iter().zip(&c[j..i]).map(|(l, v)| l * v).sum();
                c[i] = -s / row[i];
                sq += c[i] * c[i];
            }
            diag[j] = sq;
        }
        diag
    }

    /// `L L^T`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = self.row(i)[..=j].iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                k[i * n + j] = s;
                k[j * n + i] = s;
            }
        }
        k
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(KeaError::InvalidArgument(format!(
                "right-hand side of length {len} for factor of order {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Convenience wrapper for [`CholeskyFactor::factor`].
pub fn cholesky(k: &[f64], n: usize) -> Result<CholeskyFactor> {
    CholeskyFactor::factor(k, n)
}
