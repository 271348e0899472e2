//! Matérn kernels of half-integer smoothness and their fixed linear-transform
//! ("two-layered") variant.
//!
//! The radial profile for smoothness `p` is the normalized Matérn function of
//! order `p + 1/2`, i.e. the kernel whose Fourier transform is
//! `(1 + |w|^2)^(-(d + 2p + 1) / 2)`, scaled so that `phi_p(0) = 1`. All five
//! supported orders have closed forms `poly_p(r) * exp(-r)`.

use std::fmt;

use crate::error::{KeaError, Result};
use crate::points::Points;

/// Largest supported smoothness order.
pub const MAX_SMOOTHNESS: u8 = 4;

// Coefficients of poly_p in ascending powers of r.
const MATERN_POLY: [&[f64]; 5] = [
    &[1.0],
    &[1.0, 1.0],
    &[1.0, 1.0, 1.0 / 3.0],
    &[1.0, 1.0, 2.0 / 5.0, 1.0 / 15.0],
    &[1.0, 1.0, 3.0 / 7.0, 2.0 / 21.0, 1.0 / 105.0],
];

/// Normalized Matérn radial profile `phi_p(r)` for `p` in `0..=4`.
pub fn matern_radial(p: u8, r: f64) -> Result<f64> {
    if p > MAX_SMOOTHNESS {
        return Err(KeaError::InvalidArgument(format!(
            "unsupported Matérn smoothness {p}, expected 0..=4"
        )));
    }
    if !(r >= 0.0) {
        return Err(KeaError::InvalidArgument(format!("radius must be nonnegative, got {r}")));
    }
    Ok(radial(p, r))
}

#[inline]
fn radial(p: u8, r: f64) -> f64 {
    let coeffs = MATERN_POLY[p as usize];
    let poly = coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c);
    poly * (-r).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Matern,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Matern => f.write_str("matern"),
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = KeaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matern" => Ok(KernelFamily::Matern),
            other => Err(KeaError::InvalidArgument(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Square matrix `A` applied to differences before the radial profile,
/// giving `k(x, z) = phi(|A (x - z)|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTransform {
    dim: usize,
    // row-major
    entries: Vec<f64>,
}

impl LinearTransform {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(KeaError::InvalidArgument(format!(
                "transform needs {dim}x{dim} entries, got {}",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(KeaError::InvalidArgument("transform has non-finite entries".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut t = Self::identity(dim);
        t.entries.iter_mut().for_each(|v| *v *= scale);
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    fn norm_of_image(&self, diff: impl Fn(usize) -> f64) -> f64 {
        let mut sq = 0.0;
        for i in 0..self.dim {
            let mut acc = 0.0;
            for (j, a) in self.row(i).iter().enumerate() {
                acc += a * diff(j);
            }
            sq += acc * acc;
        }
        sq.sqrt()
    }
}

/// Full description of a kernel; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDescriptor {
    family: KernelFamily,
    smoothness: u8,
    length_scale: f64,
    transform: Option<LinearTransform>,
}

impl KernelDescriptor {
    /// Matérn kernel of smoothness `p` with unit length scale and no transform.
    pub fn matern(p: u8) -> Result<Self> {
        if p > MAX_SMOOTHNESS {
            return Err(KeaError::InvalidArgument(format!(
                "unsupported Matérn smoothness {p}, expected 0..=4"
            )));
        }
        Ok(Self {
            family: KernelFamily::Matern,
            smoothness: p,
            length_scale: 1.0,
            transform: None,
        })
    }

    pub fn with_length_scale(mut self, length_scale: f64) -> Result<Self> {
        if !(length_scale > 0.0) || !length_scale.is_finite() {
            return Err(KeaError::InvalidArgument(format!(
                "length scale must be positive and finite, got {length_scale}"
            )));
        }
        self.length_scale = length_scale;
        Ok(self)
    }

    pub fn with_transform(mut self, transform: LinearTransform) -> Self {
        self.transform = Some(transform);
        self
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn smoothness(&self) -> u8 {
        self.smoothness
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn transform(&self) -> Option<&LinearTransform> {
        self.transform.as_ref()
    }

    /// Checks that the descriptor can act on points of dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match &self.transform {
            Some(t) if t.dim() != dim => Err(KeaError::InvalidArgument(format!(
                "transform is {0}x{0} but data dimension is {dim}",
                t.dim()
            ))),
            _ => Ok(()),
        }
    }

    /// `k(x, z)`; fails on dimension mismatch.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if x.len() != z.len() {
            return Err(KeaError::InvalidArgument(format!(
                "points of dimension {} and {} cannot be paired",
                x.len(),
                z.len()
            )));
        }
        self.check_dim(x.len())?;
        Ok(self.eval_unchecked(x, z))
    }

    /// `k(x, z)` without dimension checks. Both points must have the
    /// descriptor's dimension.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        let dist = match &self.transform {
            None => x
                .iter()
                .zip(z)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            // a - b == -(b - a) exactly in floating point, so this stays
            // symmetric in (x, z) bit for bit.
            Some(t) => t.norm_of_image(|j| x[j] - z[j]),
        };
        radial(self.smoothness, dist / self.length_scale)
    }

    /// Pairwise kernel values, `rows.len()` by `cols.len()`, row-major.
    pub fn matrix(&self, rows: &Points, cols: &Points) -> Result<Vec<f64>> {
        if rows.dim() != cols.dim() {
            return Err(KeaError::InvalidArgument(format!(
                "point lists have dimensions {} and {}",
                rows.dim(),
                cols.dim()
            )));
        }
        self.check_dim(rows.dim())?;
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for x in rows.iter() {
            for z in cols.iter() {
                out.push(self.eval_unchecked(x, z));
            }
        }
        Ok(out)
    }
}

impl fmt::Display for KernelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} p={} length_scale={}",
            self.family, self.smoothness, self.length_scale
        )?;
        if let Some(t) = &self.transform {
            write!(f, " transform={}x{}", t.dim(), t.dim())?;
        }
        Ok(())
    }
}
