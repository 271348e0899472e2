//! Kernel interpolants over a fixed base set, kept in Newton form.
//!
//! A [`KernelModel`] with centers `X_n` carries, for every point of the base
//! set, the values of the Newton basis `v_1..v_n`, the squared power function
//! `P^2 = 1 - sum_j v_j^2` and the residual `f - s`. The Newton basis is
//! `V = k(X, X_n) L^{-T}` where `L L^T = k(X_n, X_n)`, so the rows of `V` at
//! the centers reproduce `L`, and the kernel coefficients are `alpha = L^{-T} c`
//! for the Newton coefficients `c`.

use rayon::prelude::*;

use crate::error::{KeaError, Result};
use crate::kernel::KernelDescriptor;
use crate::linalg::{CholeskyFactor, PIVOT_TOL};
use crate::points::Points;

/// Squared power values in `[-P2_CLAMP, 0)` are rounded up to zero; anything
/// more negative is reported as an internal inconsistency.
pub const P2_CLAMP: f64 = 1e-10;

// Below this many kernel evaluations a sequential loop beats rayon's overhead.
const PAR_THRESHOLD: usize = 1 << 14;

/// Base point set with target values. Rows are pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Points,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(points: Points, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(KeaError::InvalidArgument(format!(
                "{} points but {} target values",
                points.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(KeaError::InvalidArgument(format!("target value {i} is not finite")));
        }
        if let Some(i) = points.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(KeaError::InvalidArgument(format!(
                "point {} has a non-finite coordinate",
                i / points.dim()
            )));
        }
        if let Some((first, second)) = find_duplicate(&points) {
            return Err(KeaError::DuplicatePoints { first, second });
        }
        Ok(Self { points, values })
    }

    /// Samples `f` at every point.
    pub fn from_fn(points: Points, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = points.iter().map(f).collect();
        Self::new(points, values)
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn max_abs_value(&self) -> f64 {
        max_abs(&self.values)
    }
}

fn find_duplicate(points: &Points) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let key = |i: usize| -> Vec<u64> {
        // +0.0 and -0.0 are the same point
        points.row(i).iter().map(|v| (v + 0.0).to_bits()).collect()
    };
    order.sort_by_key(|&i| key(i));
    order.windows(2).find_map(|w| {
        (key(w[0]) == key(w[1])).then(|| (w[0].min(w[1]), w[0].max(w[1])))
    })
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Kernel interpolant `s = sum_j alpha_j k(., x_j)` on centers drawn from a
/// dataset, together with its Newton-form state on the whole base set.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    kernel: KernelDescriptor,
    centers: Vec<usize>,
    center_points: Points,
    is_center: Vec<bool>,
    factor: CholeskyFactor,
    alpha: Vec<f64>,
    newton_coeffs: Vec<f64>,
    // basis[j][i] = v_j(x_i)
    basis: Vec<Vec<f64>>,
    p2: Vec<f64>,
    residual: Vec<f64>,
}

impl KernelModel {
    /// The zero model: no centers, `P^2 = 1` and residual `= y` everywhere.
    pub fn empty(kernel: &KernelDescriptor, data: &Dataset) -> Result<Self> {
        kernel.check_dim(data.dim())?;
        Ok(Self {
            kernel: kernel.clone(),
            centers: Vec::new(),
            center_points: Points::empty(data.dim()),
            is_center: vec![false; data.len()],
            factor: CholeskyFactor::empty(),
            alpha: Vec::new(),
            newton_coeffs: Vec::new(),
            basis: Vec::new(),
            p2: vec![1.0; data.len()],
            residual: data.values().to_vec(),
        })
    }

    /// Interpolant on `centers` by factoring `k(X_n, X_n)` directly.
    ///
    /// A singular kernel matrix is reported as [`KeaError::NearDuplicateCenter`]
    /// naming the dataset index of the first center whose pivot vanished.
    pub fn fit_direct(kernel: &KernelDescriptor, data: &Dataset, centers: &[usize]) -> Result<Self> {
        if centers.is_empty() {
            return Err(KeaError::InvalidArgument("center list is empty".into()));
        }
        Self::fit_centers(kernel, data, centers)
    }

    fn fit_centers(kernel: &KernelDescriptor, data: &Dataset, centers: &[usize]) -> Result<Self> {
        kernel.check_dim(data.dim())?;
        let n_base = data.len();
        let mut is_center = vec![false; n_base];
        for &c in centers {
            if c >= n_base {
                return Err(KeaError::InvalidArgument(format!(
                    "center index {c} out of range for {n_base} base points"
                )));
            }
            if std::mem::replace(&mut is_center[c], true) {
                return Err(KeaError::DuplicateCenter(c));
            }
        }
        if centers.is_empty() {
            return Self::empty(kernel, data);
        }

        let n = centers.len();
        let center_points = data.points().select(centers);
        let gram = kernel.matrix(&center_points, &center_points)?;
        let factor = CholeskyFactor::factor(&gram, n).map_err(|e| match e {
            KeaError::NotPositiveDefinite { index, pivot } => KeaError::NearDuplicateCenter {
                index: centers[index],
                p2: pivot,
            },
            other => other,
        })?;
        let y_centers: Vec<f64> = centers.iter().map(|&c| data.values()[c]).collect();
        let newton_coeffs = factor.forward_solve(&y_centers)?;
        let alpha = factor.backward_solve(&newton_coeffs)?;

        // Row i of V solves L v = k(X_n, x_i).
        let row_of = |x: &[f64]| -> Vec<f64> {
            let kx: Vec<f64> = center_points.iter().map(|c| kernel.eval_unchecked(c, x)).collect();
            factor.forward_solve(&kx).expect("length matches factor order")
        };
        let rows: Vec<Vec<f64>> = if n_base * n * n >= PAR_THRESHOLD {
            (0..n_base).into_par_iter().map(|i| row_of(data.points().row(i))).collect()
        } else {
            data.points().iter().map(row_of).collect()
        };

        let mut basis = vec![vec![0.0; n_base]; n];
        let mut p2 = Vec::with_capacity(n_base);
        let mut residual = Vec::with_capacity(n_base);
        for (i, row) in rows.iter().enumerate() {
            let mut sq = 0.0;
            let mut s = 0.0;
            for (j, v) in row.iter().enumerate() {
                basis[j][i] = *v;
                sq += v * v;
                s += v * newton_coeffs[j];
            }
            p2.push(clamp_p2(i, 1.0 - sq)?);
            residual.push(data.values()[i] - s);
        }

        Ok(Self {
            kernel: kernel.clone(),
            centers: centers.to_vec(),
            center_points,
            is_center,
            factor,
            alpha,
            newton_coeffs,
            basis,
            p2,
            residual,
        })
    }

    /// Refit on a new center list. Unlike [`fit_direct`](Self::fit_direct)
    /// an empty list yields the empty model.
    pub fn rebuild(&self, data: &Dataset, centers: &[usize]) -> Result<Self> {
        Self::fit_centers(&self.kernel, data, centers)
    }

    /// Model with `new_center` appended, via the Newton-basis recursion.
    pub fn newton_extend(&self, data: &Dataset, new_center: usize) -> Result<Self> {
        let mut next = self.clone();
        next.extend_in_place(data, new_center)?;
        Ok(next)
    }

    /// In-place [`newton_extend`](Self::newton_extend). On error `self` is
    /// left unchanged.
    pub fn extend_in_place(&mut self, data: &Dataset, new_center: usize) -> Result<()> {
        let n_base = self.p2.len();
        if data.len() != n_base {
            return Err(KeaError::InvalidArgument(format!(
                "model tracks {n_base} base points, dataset has {}",
                data.len()
            )));
        }
        if new_center >= n_base {
            return Err(KeaError::InvalidArgument(format!(
                "center index {new_center} out of range for {n_base} base points"
            )));
        }
        if self.is_center[new_center] {
            return Err(KeaError::DuplicateCenter(new_center));
        }
        let pivot = self.p2[new_center];
        if !(pivot > PIVOT_TOL) {
            return Err(KeaError::NearDuplicateCenter {
                index: new_center,
                p2: pivot,
            });
        }
        let norm = pivot.sqrt();
        let x_new = data.points().row(new_center);
        let w: Vec<f64> = self.basis.iter().map(|col| col[new_center]).collect();

        // v_{n+1}(x) = (k(x, x_new) - sum_j v_j(x) v_j(x_new)) / P(x_new)
        let mut col: Vec<f64> = if n_base >= PAR_THRESHOLD {
            data.points()
                .as_slice()
                .par_chunks_exact(data.dim())
                .map(|x| self.kernel.eval_unchecked(x, x_new))
                .collect()
        } else {
            data.points().iter().map(|x| self.kernel.eval_unchecked(x, x_new)).collect()
        };
        for (vj, wj) in self.basis.iter().zip(&w) {
            for (c, v) in col.iter_mut().zip(vj) {
                *c -= v * wj;
            }
        }
        col.iter_mut().for_each(|c| *c /= norm);

        let mut p2 = self.p2.clone();
        for (i, (p, v)) in p2.iter_mut().zip(&col).enumerate() {
            *p = clamp_p2(i, *p - v * v)?;
        }
        p2[new_center] = 0.0;

        let coeff = self.residual[new_center] / norm;
        let mut factor = self.factor.clone();
        factor.push_row(w, pivot)?;
        let mut newton_coeffs = self.newton_coeffs.clone();
        newton_coeffs.push(coeff);
        let alpha = factor.backward_solve(&newton_coeffs)?;

        for (r, v) in self.residual.iter_mut().zip(&col) {
            *r -= coeff * v;
        }
        self.p2 = p2;
        self.basis.push(col);
        self.factor = factor;
        self.newton_coeffs = newton_coeffs;
        self.alpha = alpha;
        self.centers.push(new_center);
        self.is_center[new_center] = true;
        self.center_points.push(x_new)?;
        Ok(())
    }

    /// Replaces the kernel-basis coefficients, e.g. by ones read from a file
    /// that describe the same interpolant up to rounding.
    pub(crate) fn with_alpha(mut self, alpha: Vec<f64>) -> Self {
        debug_assert_eq!(alpha.len(), self.alpha.len());
        self.alpha = alpha;
        self
    }

    /// `s(x)` at every point.
    pub fn evaluate(&self, points: &Points) -> Result<Vec<f64>> {
        self.check_points(points)?;
        let eval = |x: &[f64]| -> f64 {
            self.center_points
                .iter()
                .zip(&self.alpha)
                .map(|(c, a)| a * self.kernel.eval_unchecked(x, c))
                .sum()
        };
        Ok(if points.len() * self.centers.len() >= PAR_THRESHOLD {
            points.as_slice().par_chunks_exact(points.dim()).map(eval).collect()
        } else {
            points.iter().map(eval).collect()
        })
    }

    /// Power function `P(x) = sqrt(1 - k(x, X_n) K^{-1} k(X_n, x))` at every point.
    pub fn power_function(&self, points: &Points) -> Result<Vec<f64>> {
        self.check_points(points)?;
        let power = |(i, x): (usize, &[f64])| -> Result<f64> {
            if self.centers.is_empty() {
                return Ok(1.0);
            }
            let kx: Vec<f64> = self
                .center_points
                .iter()
                .map(|c| self.kernel.eval_unchecked(c, x))
                .collect();
            let v = self.factor.forward_solve(&kx)?;
            let p2 = 1.0 - v.iter().map(|a| a * a).sum::<f64>();
            Ok(clamp_p2(i, p2)?.sqrt())
        };
        let n = self.centers.len();
        if points.len() * n * n >= PAR_THRESHOLD {
            points
                .as_slice()
                .par_chunks_exact(points.dim())
                .enumerate()
                .map(power)
                .collect()
        } else {
            points.iter().enumerate().map(power).collect()
        }
    }

    fn check_points(&self, points: &Points) -> Result<()> {
        if points.dim() != self.center_points.dim() {
            return Err(KeaError::InvalidArgument(format!(
                "points have dimension {}, model expects {}",
                points.dim(),
                self.center_points.dim()
            )));
        }
        Ok(())
    }

    pub fn kernel(&self) -> &KernelDescriptor {
        &self.kernel
    }

    /// Dataset indices of the centers, in insertion order.
    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn center_points(&self) -> &Points {
        &self.center_points
    }

    pub fn is_center(&self, index: usize) -> bool {
        self.is_center[index]
    }

    pub fn size(&self) -> usize {
        self.centers.len()
    }

    pub fn base_size(&self) -> usize {
        self.p2.len()
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn newton_coeffs(&self) -> &[f64] {
        &self.newton_coeffs
    }

    /// Newton basis function `v_j` on the base set.
    pub fn basis_column(&self, j: usize) -> &[f64] {
        &self.basis[j]
    }

    /// Squared power function on the base set.
    pub fn p2(&self) -> &[f64] {
        &self.p2
    }

    /// `f - s` on the base set.
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn max_residual(&self) -> f64 {
        max_abs(&self.residual)
    }

    pub fn max_power(&self) -> f64 {
        self.p2.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt()
    }
}

fn clamp_p2(index: usize, value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -P2_CLAMP {
        Ok(0.0)
    } else {
        Err(KeaError::InternalConsistency { index, value })
    }
}
