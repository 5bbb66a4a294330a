use std::ops::{Add, Sub};

use num_complex::Complex64;

use super::OccIndex;

/// Vector in the Fock space, one complex amplitude per basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        StateVector {
            amps: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    /// Standard unit vector `e_s`.
    pub fn basis(dim: usize, s: OccIndex) -> Self {
        let mut v = Self::zeros(dim);
        v.amps[s.0] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::basis(dim, OccIndex::VACUUM)
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        StateVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, s: OccIndex) -> Complex64 {
        self.amps[s.0]
    }

    /// `(self, other)`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "state dimensions differ");
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, factor: Complex64) -> StateVector {
        StateVector {
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> StateVector {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `self + factor * other`, in place.
    pub fn axpy(&mut self, factor: Complex64, other: &StateVector) {
        assert_eq!(self.dim(), other.dim(), "state dimensions differ");
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += factor * b;
        }
    }

    /// Largest componentwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "state dimensions differ");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: Self) -> StateVector {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), rhs);
        out
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: Self) -> StateVector {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), rhs);
        out
    }
}
