use std::ops::{Add, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{apply_word, Ladder, OccIndex, StateVector};

/// Complex linear operator on the Fock space, stored row-wise with only the
/// nonzero entries. Rows are sorted by column; exact zeros are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        SparseOperator {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(dim, |_| 1.0)
    }

    /// Real diagonal operator `sum_s f(s) |s><s|`.
    pub fn diagonal(dim: usize, f: impl Fn(OccIndex) -> f64) -> Self {
        let rows = (0..dim)
            .map(|s| {
                let v = f(OccIndex(s));
                if v == 0.0 {
                    Vec::new()
                } else {
                    vec![(s, Complex64::new(v, 0.0))]
                }
            })
            .collect();
        SparseOperator { dim, rows }
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            rows[r].push((c, v));
        }
        for row in &mut rows {
            compact_row(row);
        }
        SparseOperator { dim, rows }
    }

    /// `coeff` times the product of ladder operators in `word` (leftmost
    /// factor applied last).
    pub fn from_word(dim: usize, word: &[(Ladder, usize)], coeff: Complex64) -> Self {
        let triplets = (0..dim).filter_map(|s| {
            apply_word(word, OccIndex(s)).map(|(sign, t)| (t.0, s, coeff * sign as f64))
        });
        Self::from_triplets(dim, triplets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, r: usize) -> &[(usize, Complex64)] {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.rows[r]
            .binary_search_by_key(&c, |&(col, _)| col)
            .map(|i| self.rows[r][i].1)
            .unwrap_or(ZERO)
    }

    /// All stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.entries().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut out: Vec<_> = row.iter().map(|&(c, v)| (c, v * factor)).collect();
                out.retain(|&(_, v)| v != ZERO);
                out
            })
            .collect();
        SparseOperator { dim: self.dim, rows }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `self + factor * I`.
    pub fn add_identity(&self, factor: f64) -> Self {
        self + &SparseOperator::identity(self.dim).scale_real(factor)
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimensions differ");
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| merge_rows(a, b, sign))
            .collect();
        SparseOperator { dim: self.dim, rows }
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimensions differ");
        let mut acc = vec![ZERO; self.dim];
        let mut touched = vec![false; self.dim];
        let mut cols = Vec::new();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                for &(k, a) in row {
                    for &(c, b) in &other.rows[k] {
                        if !touched[c] {
                            touched[c] = true;
                            cols.push(c);
                        }
                        acc[c] += a * b;
                    }
                }
                cols.sort_unstable();
                let out: Vec<_> = cols
                    .drain(..)
                    .filter_map(|c| {
                        touched[c] = false;
                        let v = std::mem::replace(&mut acc[c], ZERO);
                        (v != ZERO).then_some((c, v))
                    })
                    .collect();
                out
            })
            .collect();
        SparseOperator { dim: self.dim, rows }
    }

    /// `[self, other] = self other - other self`.
    pub fn commutator(&self, other: &Self) -> Self {
        &self.mul(other) - &other.mul(self)
    }

    /// `{self, other} = self other + other self`.
    pub fn anticommutator(&self, other: &Self) -> Self {
        &self.mul(other) + &other.mul(self)
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        assert_eq!(self.dim, v.dim(), "operator and state dimensions differ");
        let amps = v.amplitudes();
        StateVector::from_amplitudes(
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(c, a)| a * amps[c]).sum())
                .collect(),
        )
    }

    /// Induced infinity norm: the largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(_, v)| v.norm()).fold(0.0, |s, x| s + x))
            .fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).entries().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_selfadjoint(&self, tol: f64) -> bool {
        (self - &self.adjoint()).norm_inf() <= tol
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }
}

fn compact_row(row: &mut Vec<(usize, Complex64)>) {
    row.sort_by_key(|&(c, _)| c);
    let mut out: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
    for &(c, v) in row.iter() {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|&(_, v)| v != ZERO);
    *row = out;
}

fn merge_rows(a: &[(usize, Complex64)], b: &[(usize, Complex64)], sign: f64) -> Vec<(usize, Complex64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&(ca, va)), Some(&(cb, vb))) if ca == cb => {
                i += 1;
                j += 1;
                (ca, va + vb * sign)
            }
            (Some(&(ca, va)), Some(&(cb, _))) if ca < cb => {
                i += 1;
                (ca, va)
            }
            (Some(&(ca, va)), None) => {
                i += 1;
                (ca, va)
            }
            (_, Some(&(cb, vb))) => {
                j += 1;
                (cb, vb * sign)
            }
            (None, None) => unreachable!(),
        };
        if next.1 != ZERO {
            out.push(next);
        }
    }
    out
}

impl Add for &SparseOperator {
    type Output = SparseOperator;
    fn add(self, rhs: Self) -> SparseOperator {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &SparseOperator {
    type Output = SparseOperator;
    fn sub(self, rhs: Self) -> SparseOperator {
        self.combine(rhs, -1.0)
    }
}
