//! Uniform planar arrays, DFT beam codebooks and effective scalar channels.
//!
//! Element `i` of an `n1 x n2` array sits at column `i mod n1` and row `i / n1`.
//! Angles are array-local: `theta` is azimuth and `phi` elevation, both in
//! `[-pi/2, pi/2]`, and only their sines enter the response.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)] // float math without std
use num_traits::Float as _;

use crate::error::domain;
use crate::linalg::{self, CMat};
use crate::{Error, Result, C64};

const ANGLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArrayGeometry {
    /// Horizontal element count.
    pub n1: usize,
    /// Vertical element count.
    pub n2: usize,
    /// Phase progression per unit sine between adjacent elements; `pi` is
    /// half-wavelength spacing.
    #[cfg_attr(feature = "serde", serde(default = "default_phase_const"))]
    pub phase_const: f64,
}

#[cfg(feature = "serde")]
fn default_phase_const() -> f64 {
    PI
}

impl ArrayGeometry {
    /// Half-wavelength array of `n1 x n2` elements.
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        Self::with_phase_const(n1, n2, PI)
    }

    pub fn with_phase_const(n1: usize, n2: usize, phase_const: f64) -> Result<Self> {
        let g = Self { n1, n2, phase_const };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(domain("array dimensions must be at least 1"));
        }
        if !(self.phase_const > 0.0 && self.phase_const.is_finite()) {
            return Err(domain("phase constant must be positive"));
        }
        Ok(())
    }

    /// Total element count.
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unit-modulus response for direction sines `(sin theta, sin phi)`.
    pub fn steering_from_sines(&self, sin_theta: f64, sin_phi: f64) -> Vec<C64> {
        (0..self.len())
            .map(|i| {
                let col = (i % self.n1) as f64;
                let row = (i / self.n1) as f64;
                C64::from_polar(1.0, -self.phase_const * (col * sin_theta + row * sin_phi))
            })
            .collect()
    }
}

/// Unit-norm complex weight vector over array elements.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector(Vec<C64>);

impl BeamVector {
    /// Scales `coeffs` to unit norm. Fails on an all-zero or non-finite input.
    pub fn normalized(coeffs: Vec<C64>) -> Result<Self> {
        let n = linalg::norm(&coeffs);
        if !(n > 0.0 && n.is_finite()) {
            return Err(domain("beam vector has zero or non-finite norm"));
        }
        Ok(Self(coeffs.into_iter().map(|z| z / n).collect()))
    }

    /// One-hot vector along element `axis`.
    pub fn basis(len: usize, axis: usize) -> Self {
        let mut v = alloc::vec![C64::new(0.0, 0.0); len];
        v[axis] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }
}

impl AsRef<[C64]> for BeamVector {
    fn as_ref(&self) -> &[C64] {
        &self.0
    }
}

/// Normalized array response toward `(theta, phi)`.
pub fn upa_response(geom: &ArrayGeometry, theta: f64, phi: f64) -> Result<BeamVector> {
    geom.validate()?;
    if !(theta.abs() <= FRAC_PI_2 + ANGLE_SLACK && phi.abs() <= FRAC_PI_2 + ANGLE_SLACK) {
        return Err(domain("steering angles must lie in [-pi/2, pi/2]"));
    }
    BeamVector::normalized(geom.steering_from_sines(theta.sin(), phi.sin()))
}

/// A fixed set of beams for one array.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    vectors: Vec<BeamVector>,
    geometry: ArrayGeometry,
}

impl Codebook {
    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, index: usize) -> &BeamVector {
        &self.vectors[index]
    }

    pub fn vectors(&self) -> &[BeamVector] {
        &self.vectors
    }

    /// Matrix of Hermitian inner products between codebook vectors.
    pub fn gram(&self) -> CMat {
        let n = self.len();
        CMat::from_fn(n, n, |r, c| {
            linalg::inner(self.vectors[r].as_slice(), self.vectors[c].as_slice())
        })
    }
}

/// Grid sines `2n/count - 1` for `n = 0..count`.
pub fn dft_grid_sines(count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |n| 2.0 * n as f64 / count as f64 - 1.0)
}

/// Array responses on the DFT angle grid, row-major over (azimuth, elevation).
pub fn dft_codebook(geom: &ArrayGeometry) -> Result<Codebook> {
    geom.validate()?;
    let mut vectors = Vec::with_capacity(geom.len());
    for s_theta in dft_grid_sines(geom.n1) {
        for s_phi in dft_grid_sines(geom.n2) {
            vectors.push(upa_response(geom, s_theta.asin(), s_phi.asin())?);
        }
    }
    Ok(Codebook {
        vectors,
        geometry: *geom,
    })
}

/// Scalar channel `wᵀ H v` between a receive beam `w` and a transmit beam `v`.
///
/// The uplink value is the same number, obtained as `effective_channel(v, Hᵀ, w)`.
pub fn effective_channel(w: &[C64], h: &CMat, v: &[C64]) -> Result<C64> {
    if w.len() != h.rows() {
        return Err(Error::Dimension {
            expected: h.rows(),
            got: w.len(),
        });
    }
    if v.len() != h.cols() {
        return Err(Error::Dimension {
            expected: h.cols(),
            got: v.len(),
        });
    }
    let hv = h.mul_vec(v)?;
    Ok(linalg::dot(w, &hv))
}
