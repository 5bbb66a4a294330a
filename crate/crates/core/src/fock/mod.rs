//! Occupation-number basis of the fermionic Fock space `C^(2^(2M))`.
//!
//! Spin-orbital `j` of mode `i` is `2i` for spin up and `2i + 1` for spin
//! down, and basis vector `e_s` is the occupation pattern whose bit `j` is
//! `n_j`. Mode 0 is the least significant bit, so index 0 is the vacuum and
//! index `2^(2M) - 1` is the completely filled state.
//!
//! A ladder operator acting on spin-orbital `j` picks up the sign
//! `(-1)^#`, `#` being the number of occupied spin-orbitals strictly below
//! `j`. Signs are computed with integer popcounts, so every operator built
//! from ladder words has entries that are exact small integers.

mod operator;
mod state;

pub use operator::SparseOperator;
pub use state::StateVector;

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Default ceiling on the number of modes `M` (dimension `2^14`).
pub const DEFAULT_MAX_MODES: usize = 7;

/// Ceiling on `M` for dense eigendecompositions (dimension 1024).
pub const DENSE_MAX_MODES: usize = 5;

/// Environment variable overriding [`DEFAULT_MAX_MODES`].
pub const DIM_CAP_ENV: &str = "BCSLAB_DIM_CAP";

// 2M spin-orbitals must fit in a usize index with room to spare.
const HARD_MAX_MODES: usize = 15;

/// The effective mode ceiling: `BCSLAB_DIM_CAP` if set and parseable,
/// otherwise [`DEFAULT_MAX_MODES`].
pub fn max_modes() -> usize {
    std::env::var(DIM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map(|cap| cap.min(HARD_MAX_MODES))
        .unwrap_or(DEFAULT_MAX_MODES)
}

/// Hilbert-space dimension for `modes` modes, or a resource error if the
/// ceiling is exceeded.
pub fn fock_dim(modes: usize) -> Result<usize> {
    let cap = max_modes();
    if modes > cap {
        return Err(Error::Resource(format!(
            "M = {modes} exceeds the mode cap {cap} (set {DIM_CAP_ENV} to override)"
        )));
    }
    Ok(1usize << (2 * modes))
}

/// Occupation pattern of all `2M` spin-orbitals, the index of a standard
/// basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccIndex(pub usize);

impl OccIndex {
    pub const VACUUM: OccIndex = OccIndex(0);

    /// The completely filled state `|1,1,...,1>` on `n_orbitals` spin-orbitals.
    pub fn filled(n_orbitals: usize) -> Self {
        OccIndex((1usize << n_orbitals) - 1)
    }

    /// Build from an occupation list `[n_0, n_1, ...]` in spin-orbital order.
    pub fn from_occupations(occ: &[u8]) -> Self {
        OccIndex(
            occ.iter()
                .enumerate()
                .filter(|(_, &n)| n != 0)
                .fold(0, |acc, (j, _)| acc | (1 << j)),
        )
    }

    pub fn bits(self) -> usize {
        self.0
    }

    pub fn is_occupied(self, j: usize) -> bool {
        (self.0 >> j) & 1 == 1
    }

    pub fn particle_count(self) -> u32 {
        self.0.count_ones()
    }

    /// Number of occupied spin-orbitals strictly below `j`.
    pub fn occupied_below(self, j: usize) -> u32 {
        (self.0 & ((1usize << j) - 1)).count_ones()
    }
}

/// Creation or annihilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// Spin-orbital index of `(mode, spin)`; `down = false` is spin up.
pub fn orbital(mode: usize, down: bool) -> usize {
    2 * mode + usize::from(down)
}

#[inline]
fn ladder_action(op: Ladder, j: usize, s: OccIndex) -> Option<(i32, OccIndex)> {
    let occupied = s.is_occupied(j);
    let allowed = match op {
        Ladder::Annihilate => occupied,
        Ladder::Create => !occupied,
    };
    if !allowed {
        return None;
    }
    let sign = if s.occupied_below(j).is_multiple_of(2) { 1 } else { -1 };
    Some((sign, OccIndex(s.0 ^ (1 << j))))
}

fn check_orbital(j: usize, n_orbitals: usize) -> Result<()> {
    if j >= n_orbitals {
        return Err(Error::argument(format!(
            "spin-orbital index {j} out of range for {n_orbitals} spin-orbitals"
        )));
    }
    Ok(())
}

/// `C_j |s>`: `None` when spin-orbital `j` is empty, else the sign and the
/// resulting basis state.
pub fn apply_annihilate(j: usize, s: OccIndex, n_orbitals: usize) -> Result<Option<(i32, OccIndex)>> {
    check_orbital(j, n_orbitals)?;
    Ok(ladder_action(Ladder::Annihilate, j, s))
}

/// `C*_j |s>`: `None` when spin-orbital `j` is already occupied.
pub fn apply_create(j: usize, s: OccIndex, n_orbitals: usize) -> Result<Option<(i32, OccIndex)>> {
    check_orbital(j, n_orbitals)?;
    Ok(ladder_action(Ladder::Create, j, s))
}

/// Apply a product of ladder operators to a basis state. The word is written
/// left to right as in the operator product, so the last entry acts first.
pub fn apply_word(word: &[(Ladder, usize)], s: OccIndex) -> Option<(i32, OccIndex)> {
    word.iter()
        .rev()
        .try_fold((1, s), |(sign, state), &(op, j)| {
            ladder_action(op, j, state).map(|(sg, next)| (sign * sg, next))
        })
}

/// Matrix of the annihilation operator `C_j` on `2^(2M)` dimensions. The
/// creator is its adjoint.
pub fn ladder_matrix(j: usize, modes: usize) -> Result<SparseOperator> {
    let dim = fock_dim(modes)?;
    check_orbital(j, 2 * modes)?;
    Ok(SparseOperator::from_word(dim, &[(Ladder::Annihilate, j)], Complex64::new(1.0, 0.0)))
}

/// Largest deviation from the canonical anticommutation relations over all
/// pairs of spin-orbitals, in the operator infinity norm.
pub fn anticommutator_check(modes: usize) -> Result<f64> {
    let dim = fock_dim(modes)?;
    let n = 2 * modes;
    let ann: Vec<SparseOperator> = (0..n).map(|j| ladder_matrix(j, modes)).collect::<Result<_>>()?;
    let cre: Vec<SparseOperator> = ann.iter().map(SparseOperator::adjoint).collect();
    let identity = SparseOperator::identity(dim);
    let zero = SparseOperator::zeros(dim);
    let mut worst = 0.0f64;
    for j in 0..n {
        for jp in 0..n {
            let expected = if j == jp { &identity } else { &zero };
            worst = worst
                .max((&ann[j].anticommutator(&cre[jp]) - expected).norm_inf())
                .max(ann[j].anticommutator(&ann[jp]).norm_inf())
                .max(cre[j].anticommutator(&cre[jp]).norm_inf());
        }
    }
    Ok(worst)
}

/// Truncated commutator series
/// `sum_n (i alpha)^n / n! [...[A, B], ..., B]`, which converges to
/// `e^{-i alpha B} A e^{i alpha B}` for selfadjoint `B`.
///
/// Stops once a term's norm drops to `tol / 10`, or immediately when a
/// commutator vanishes exactly.
pub fn conjugate_series(a: &SparseOperator, b: &SparseOperator, alpha: f64, tol: f64) -> Result<SparseOperator> {
    const MAX_TERMS: usize = 200;
    if a.dim() != b.dim() {
        return Err(Error::argument("operator dimensions differ"));
    }
    if !(tol > 0.0) {
        return Err(Error::argument("tolerance must be positive"));
    }
    if !b.is_selfadjoint(1e-12) {
        return Err(Error::argument("generator of the conjugation must be selfadjoint"));
    }
    if alpha == 0.0 {
        return Ok(a.clone());
    }
    let mut sum = a.clone();
    let mut term = a.clone();
    for n in 1..=MAX_TERMS {
        term = term.commutator(b).scale(Complex64::new(0.0, alpha / n as f64));
        let size = term.norm_inf();
        if size == 0.0 {
            return Ok(sum);
        }
        sum = &sum + &term;
        if size <= tol / 10.0 {
            return Ok(sum);
        }
    }
    Err(Error::Convergence {
        what: "commutator series".into(),
        iterations: MAX_TERMS,
    })
}

/// `e^{iB} v` by a Taylor series with norm-based stopping.
pub fn evolve_state(b: &SparseOperator, v: &StateVector, tol: f64) -> Result<StateVector> {
    const MAX_TERMS: usize = 500;
    if b.dim() != v.dim() {
        return Err(Error::argument("operator and state dimensions differ"));
    }
    if !(tol > 0.0) {
        return Err(Error::argument("tolerance must be positive"));
    }
    if !b.is_selfadjoint(1e-12) {
        return Err(Error::argument("generator of the evolution must be selfadjoint"));
    }
    let mut sum = v.clone();
    let mut term = v.clone();
    for n in 1..=MAX_TERMS {
        term = b.apply(&term).scale(Complex64::new(0.0, 1.0 / n as f64));
        sum = &sum + &term;
        if term.norm() <= tol / 10.0 {
            return Ok(sum);
        }
    }
    Err(Error::Convergence {
        what: "exponential Taylor series".into(),
        iterations: MAX_TERMS,
    })
}

/// `(phi, A psi)`, antilinear in the first slot.
pub fn expectation(phi: &StateVector, a: &SparseOperator, psi: &StateVector) -> Result<Complex64> {
    if phi.dim() != a.dim() || psi.dim() != a.dim() {
        return Err(Error::argument(format!(
            "dimension mismatch: states {} and {}, operator {}",
            phi.dim(),
            psi.dim(),
            a.dim()
        )));
    }
    Ok(phi.inner(&a.apply(psi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(bits: &[u8]) -> OccIndex {
        OccIndex::from_occupations(bits)
    }

    #[test]
    fn annihilate_examples() {
        assert_eq!(apply_annihilate(0, occ(&[1, 0, 0, 0]), 4).unwrap(), Some((1, occ(&[0, 0, 0, 0]))));
        assert_eq!(apply_annihilate(1, occ(&[1, 1, 0, 0]), 4).unwrap(), Some((-1, occ(&[1, 0, 0, 0]))));
        assert_eq!(apply_annihilate(0, occ(&[0, 1, 0, 0]), 4).unwrap(), None);
    }

    #[test]
    fn create_examples() {
        assert_eq!(apply_create(1, occ(&[0, 0, 0, 0]), 4).unwrap(), Some((1, occ(&[0, 1, 0, 0]))));
        assert_eq!(apply_create(2, occ(&[1, 1, 0, 0]), 4).unwrap(), Some((1, occ(&[1, 1, 1, 0]))));
        assert_eq!(apply_create(0, occ(&[1, 0, 0, 0]), 4).unwrap(), None);
    }

    #[test]
    fn ladder_index_out_of_range() {
        assert!(matches!(apply_create(4, OccIndex::VACUUM, 4), Err(Error::Argument(_))));
        assert!(matches!(apply_annihilate(9, OccIndex::VACUUM, 4), Err(Error::Argument(_))));
        assert!(matches!(ladder_matrix(4, 2), Err(Error::Argument(_))));
    }

    #[test]
    fn sign_is_parity_of_lower_occupations() {
        // brute force: count set bits below j one by one
        for s in 0..64usize {
            for j in 0..6 {
                let below = (0..j).filter(|&i| (s >> i) & 1 == 1).count();
                let expect = if below % 2 == 0 { 1 } else { -1 };
                if let Some((sign, _)) = apply_create(j, OccIndex(s), 6).unwrap() {
                    assert_eq!(sign, expect);
                }
                if let Some((sign, _)) = apply_annihilate(j, OccIndex(s), 6).unwrap() {
                    assert_eq!(sign, expect);
                }
            }
        }
    }

    #[test]
    fn ladder_matrix_single_mode() {
        // dim 4, C_0 maps |1,n1> to |0,n1> with sign +1
        let c0 = ladder_matrix(0, 1).unwrap();
        assert_eq!(c0.nnz(), 2);
        assert_eq!(c0.get(0b00, 0b01), Complex64::new(1.0, 0.0));
        assert_eq!(c0.get(0b10, 0b11), Complex64::new(1.0, 0.0));
        let c1 = ladder_matrix(1, 1).unwrap();
        assert_eq!(c1.get(0b00, 0b10), Complex64::new(1.0, 0.0));
        assert_eq!(c1.get(0b01, 0b11), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn ladder_matrix_nnz_and_nilpotency() {
        for modes in 1..=3 {
            for j in 0..2 * modes {
                let c = ladder_matrix(j, modes).unwrap();
                assert_eq!(c.nnz(), 1 << (2 * modes - 1));
                assert_eq!(c.mul(&c).nnz(), 0);
            }
        }
        assert_eq!(ladder_matrix(3, 2).unwrap().nnz(), 8);
    }

    #[test]
    fn car_holds_exactly() {
        for modes in 1..=4 {
            assert_eq!(anticommutator_check(modes).unwrap(), 0.0, "M = {modes}");
        }
    }

    #[test]
    fn dimension_cap_is_enforced() {
        assert!(matches!(fock_dim(DEFAULT_MAX_MODES + 1), Err(Error::Resource(_))));
        assert_eq!(fock_dim(2).unwrap(), 16);
    }

    #[test]
    fn vacuum_and_filled_are_annihilated() {
        let modes = 3;
        let n = 2 * modes;
        let dim = 1 << n;
        let vac = StateVector::basis(dim, OccIndex::VACUUM);
        let full = StateVector::basis(dim, OccIndex::filled(n));
        for j in 0..n {
            let c = ladder_matrix(j, modes).unwrap();
            assert_eq!(c.apply(&vac).norm(), 0.0);
            assert_eq!(c.adjoint().apply(&full).norm(), 0.0);
        }
    }

    #[test]
    fn creators_in_mode_order_rebuild_basis() {
        let modes = 2;
        let n = 2 * modes;
        let dim = 1 << n;
        for s in 0..dim {
            // (C*_0)^{n_0} (C*_1)^{n_1} ... |0>
            let word: Vec<(Ladder, usize)> = (0..n)
                .filter(|&j| (s >> j) & 1 == 1)
                .map(|j| (Ladder::Create, j))
                .collect();
            assert_eq!(apply_word(&word, OccIndex::VACUUM), Some((1, OccIndex(s))));
        }
    }

    #[test]
    fn conjugate_series_alpha_zero_is_identity_map() {
        let a = ladder_matrix(1, 2).unwrap();
        let g = SparseOperator::diagonal(16, |s| s.particle_count() as f64);
        let out = conjugate_series(&a, &g, 0.0, 1e-12).unwrap();
        assert_eq!((&out - &a).norm_inf(), 0.0);
    }

    #[test]
    fn conjugate_series_rejects_non_hermitian_generator() {
        let a = ladder_matrix(0, 1).unwrap();
        assert!(matches!(conjugate_series(&a, &a, 1.0, 1e-12), Err(Error::Argument(_))));
        let v = StateVector::basis(4, OccIndex::VACUUM);
        assert!(matches!(evolve_state(&a, &v, 1e-12), Err(Error::Argument(_))));
    }

    #[test]
    fn evolve_with_zero_generator() {
        let v = StateVector::basis(16, OccIndex(5));
        let w = evolve_state(&SparseOperator::zeros(16), &v, 1e-12).unwrap();
        assert_eq!(w.max_abs_diff(&v), 0.0);
    }

    #[test]
    fn expectation_basics() {
        let vac = StateVector::basis(16, OccIndex::VACUUM);
        let one = expectation(&vac, &SparseOperator::identity(16), &vac).unwrap();
        assert_eq!(one, Complex64::new(1.0, 0.0));
        let short = StateVector::basis(4, OccIndex::VACUUM);
        assert!(matches!(
            expectation(&short, &SparseOperator::identity(16), &vac),
            Err(Error::Argument(_))
        ));
    }
}
