//! Matrices of the pairing Hamiltonian and the operators derived from it.
//!
//! With `B_k = C_{-k↓} C_{k↑}`:
//!
//! ```text
//! H   = Σ_{k,σ} ξ_k C*_{kσ} C_{kσ} + Σ_{k,k'} U(k,k') B*_{k'} B_k
//! G   = Σ_{k,σ} C*_{kσ} C_{kσ}
//! G_B = i Σ_k θ_k (B_k - B*_k)
//! H_M = Σ_{k,σ} ξ_k C*_{kσ} C_{kσ} - Σ_k Δ_k (B_k + B*_k) + Σ_k Δ_k w_k
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{self, orbital, Ladder, OccIndex, SparseOperator};
use crate::gapsolve::{AngleTable, GapTable};
use crate::model::{ensure_valid_kernel, Kernel, ModeTable};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Default)]
struct Terms {
    triplets: Vec<(usize, usize, Complex64)>,
}

impl Terms {
    fn word(&mut self, dim: usize, word: &[(Ladder, usize)], coeff: Complex64) {
        if coeff == Complex64::new(0.0, 0.0) {
            return;
        }
        for s in 0..dim {
            if let Some((sign, t)) = fock::apply_word(word, OccIndex(s)) {
                self.triplets.push((t.0, s, coeff * sign as f64));
            }
        }
    }

    fn build(self, dim: usize) -> SparseOperator {
        SparseOperator::from_triplets(dim, self.triplets)
    }
}

fn up(k: usize) -> usize {
    orbital(k, false)
}

fn down(k: usize) -> usize {
    orbital(k, true)
}

fn pair_word(modes: &ModeTable, k: usize) -> [(Ladder, usize); 2] {
    [(Ladder::Annihilate, down(modes.pair(k))), (Ladder::Annihilate, up(k))]
}

fn pair_creation_word(modes: &ModeTable, k: usize) -> [(Ladder, usize); 2] {
    [(Ladder::Create, up(k)), (Ladder::Create, down(modes.pair(k)))]
}

fn dim_of(modes: &ModeTable) -> Result<usize> {
    fock::fock_dim(modes.len())
}

/// `C_{kσ}` for mode `k`.
pub fn annihilator(modes: &ModeTable, k: usize, spin_down: bool) -> Result<SparseOperator> {
    fock::ladder_matrix(orbital(k, spin_down), modes.len())
}

/// `B_k = C_{-k↓} C_{k↑}`.
pub fn pair_annihilator(modes: &ModeTable, k: usize) -> Result<SparseOperator> {
    Ok(SparseOperator::from_word(dim_of(modes)?, &pair_word(modes, k), ONE))
}

/// `h_k = C*_{k↑} C_{k↑} + C*_{-k↓} C_{-k↓}`.
pub fn pair_number(modes: &ModeTable, k: usize) -> Result<SparseOperator> {
    let (a, b) = (up(k), down(modes.pair(k)));
    Ok(SparseOperator::diagonal(dim_of(modes)?, |s| {
        f64::from(u8::from(s.is_occupied(a)) + u8::from(s.is_occupied(b)))
    }))
}

/// `v_k = B_k + B*_k`.
pub fn pair_field(modes: &ModeTable, k: usize) -> Result<SparseOperator> {
    let b = pair_annihilator(modes, k)?;
    Ok(&b + &b.adjoint())
}

/// `Σ_{k,σ} ξ_k C*_{kσ} C_{kσ}`.
pub fn kinetic(modes: &ModeTable) -> Result<SparseOperator> {
    let xi = modes.xi().to_vec();
    Ok(SparseOperator::diagonal(dim_of(modes)?, move |s| {
        (0..xi.len())
            .map(|k| xi[k] * f64::from(u8::from(s.is_occupied(up(k))) + u8::from(s.is_occupied(down(k)))))
            .sum()
    }))
}

/// The BCS Hamiltonian `H`. The kernel is validated first.
pub fn build_h(modes: &ModeTable, kernel: &Kernel) -> Result<SparseOperator> {
    ensure_valid_kernel(kernel, modes)?;
    let dim = dim_of(modes)?;
    let mut terms = Terms::default();
    for k in 0..modes.len() {
        for kp in 0..modes.len() {
            let u = kernel.get(k, kp);
            let [c1, c2] = pair_creation_word(modes, kp);
            let [a1, a2] = pair_word(modes, k);
            terms.word(dim, &[c1, c2, a1, a2], Complex64::new(u, 0.0));
        }
    }
    Ok(&kinetic(modes)? + &terms.build(dim))
}

/// Total particle number `G`.
pub fn build_g(modes: &ModeTable) -> Result<SparseOperator> {
    Ok(SparseOperator::diagonal(dim_of(modes)?, |s| f64::from(s.particle_count())))
}

/// Generator of the Bogoliubov rotation, `G_B = i Σ_k θ_k (B_k - B*_k)`.
pub fn build_gb(modes: &ModeTable, angles: &AngleTable) -> Result<SparseOperator> {
    angles.validate(modes)?;
    let dim = dim_of(modes)?;
    let mut terms = Terms::default();
    for k in 0..modes.len() {
        let t = angles.theta[k];
        terms.word(dim, &pair_word(modes, k), Complex64::new(0.0, t));
        terms.word(dim, &pair_creation_word(modes, k), Complex64::new(0.0, -t));
    }
    Ok(terms.build(dim))
}

/// Mean-field Hamiltonian for gap `delta` and pair expectations `w_k`.
/// The same operator serves both the product state (`w_k = C_k S_k`) and
/// the corrected state (`w_k = (Ψ, B_k Ψ)`).
pub fn build_hm(modes: &ModeTable, delta: &GapTable, w: &[f64]) -> Result<SparseOperator> {
    delta.validate(modes)?;
    if w.len() != modes.len() {
        return Err(Error::validation(format!(
            "{} pair expectations given for {} modes",
            w.len(),
            modes.len()
        )));
    }
    let dim = dim_of(modes)?;
    let mut terms = Terms::default();
    for k in 0..modes.len() {
        let d = Complex64::new(-delta.0[k], 0.0);
        terms.word(dim, &pair_word(modes, k), d);
        terms.word(dim, &pair_creation_word(modes, k), d);
    }
    let offset: f64 = delta.values().iter().zip(w).map(|(d, w)| d * w).sum();
    Ok((&kinetic(modes)? + &terms.build(dim)).add_identity(offset))
}

/// `Σ_{k,k'} U(k,k') b*_{k'} b_k` with fluctuations `b_k = B_k - w_k`.
pub fn fluctuation_interaction(modes: &ModeTable, kernel: &Kernel, w: &[f64]) -> Result<SparseOperator> {
    let dim = dim_of(modes)?;
    let identity = SparseOperator::identity(dim);
    let b: Vec<SparseOperator> = (0..modes.len())
        .map(|k| Ok(&pair_annihilator(modes, k)? - &identity.scale_real(w[k])))
        .collect::<Result<_>>()?;
    let mut total = SparseOperator::zeros(dim);
    for k in 0..modes.len() {
        for kp in 0..modes.len() {
            let u = kernel.get(k, kp);
            if u != 0.0 {
                total = &total + &b[kp].adjoint().mul(&b[k]).scale_real(u);
            }
        }
    }
    Ok(total)
}

/// Residual interaction
/// `H' = Σ U(k,k') { B*_{k'} B_k - C_{k'} S_{k'} (B*_k + B_k) + C_k S_k C_{k'} S_{k'} }`,
/// equal to `H - H_M` when the angles come from a solution of the gap
/// equation.
pub fn build_hprime(modes: &ModeTable, kernel: &Kernel, angles: &AngleTable) -> Result<SparseOperator> {
    ensure_valid_kernel(kernel, modes)?;
    angles.validate(modes)?;
    let dim = dim_of(modes)?;
    let cs: Vec<f64> = (0..modes.len()).map(|k| angles.pair_amplitude(k)).collect();
    let mut terms = Terms::default();
    let mut offset = 0.0;
    for k in 0..modes.len() {
        for kp in 0..modes.len() {
            let u = kernel.get(k, kp);
            if u == 0.0 {
                continue;
            }
            let [c1, c2] = pair_creation_word(modes, kp);
            let [a1, a2] = pair_word(modes, k);
            terms.word(dim, &[c1, c2, a1, a2], Complex64::new(u, 0.0));
            let field = Complex64::new(-u * cs[kp], 0.0);
            terms.word(dim, &pair_word(modes, k), field);
            terms.word(dim, &pair_creation_word(modes, k), field);
            offset += u * cs[k] * cs[kp];
        }
    }
    Ok(terms.build(dim).add_identity(offset))
}

/// `H`, `G` and the per-mode `B_k`, `h_k`, `v_k`.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    pub h: SparseOperator,
    pub g: SparseOperator,
    pub pair: Vec<SparseOperator>,
    pub number: Vec<SparseOperator>,
    pub field: Vec<SparseOperator>,
}

impl OperatorBundle {
    pub fn build(modes: &ModeTable, kernel: &Kernel) -> Result<Self> {
        let pair = (0..modes.len())
            .map(|k| pair_annihilator(modes, k))
            .collect::<Result<Vec<_>>>()?;
        let field = pair.iter().map(|b| b + &b.adjoint()).collect();
        Ok(OperatorBundle {
            h: build_h(modes, kernel)?,
            g: build_g(modes)?,
            number: (0..modes.len()).map(|k| pair_number(modes, k)).collect::<Result<_>>()?,
            pair,
            field,
        })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{conjugate_series, StateVector};
    use crate::gapsolve::theta_from_delta;
    use crate::model::{explicit_modes, separable_kernel, Physics};
    use std::f64::consts::PI;

    fn tm() -> (ModeTable, Kernel) {
        let mt = explicit_modes(&[[1, 0, 0], [-1, 0, 0]], Some(&[1.6, 1.6]), 2.0 * PI, Physics::default()).unwrap();
        let k = separable_kernel(&mt, 4.0, |_| true);
        (mt, k)
    }

    fn three_mode() -> (ModeTable, Kernel) {
        let mt = explicit_modes(&[[1, 0, 0], [0, 0, 0], [-1, 0, 0]], Some(&[0.3, -0.5, 0.3]), 2.0 * PI, Physics::default())
            .unwrap();
        let k = Kernel::from_rows(&[vec![0.0, -2.0, -1.5], vec![-2.0, 0.0, -2.0], vec![-1.5, -2.0, 0.0]]).unwrap();
        (mt, k)
    }

    #[test]
    fn h_and_g_are_exactly_selfadjoint_and_commute() {
        for (mt, k) in [tm(), three_mode()] {
            let h = build_h(&mt, &k).unwrap();
            let g = build_g(&mt).unwrap();
            assert_eq!(h, h.adjoint());
            assert_eq!(g, g.adjoint());
            assert!(h.commutator(&g).norm_inf() <= 1e-12);
        }
    }

    #[test]
    fn free_hamiltonian_is_diagonal_kinetic() {
        let (mt, _) = tm();
        let h = build_h(&mt, &Kernel::zeros(2)).unwrap();
        for (r, c, v) in h.entries() {
            assert_eq!(r, c);
            let s = OccIndex(r);
            assert!((v.re - 1.6 * f64::from(s.particle_count())).abs() < 1e-15);
        }
    }

    #[test]
    fn single_self_paired_mode_ground_energy() {
        let mu = 0.7;
        let mt = explicit_modes(&[[0, 0, 0]], None, 2.0 * PI, Physics { mu, ..Physics::default() }).unwrap();
        let h = build_h(&mt, &Kernel::zeros(1)).unwrap();
        let ground = (0..4).map(|s| h.get(s, s).re).fold(f64::INFINITY, f64::min);
        assert!((ground + 2.0 * mu).abs() < 1e-15);
        assert_eq!(h.get(3, 3).re, -2.0 * mu);
    }

    #[test]
    fn kernel_violation_blocks_construction() {
        let (mt, _) = tm();
        let bad = Kernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(build_h(&mt, &bad), Err(Error::Validation(_))));
    }

    #[test]
    fn number_operator_examples() {
        let (mt, _) = three_mode();
        let g = build_g(&mt).unwrap();
        let dim = mt.dim();
        let vac = StateVector::vacuum(dim);
        assert_eq!(g.apply(&vac).norm(), 0.0);
        let full = StateVector::basis(dim, OccIndex::filled(mt.n_orbitals()));
        assert_eq!(g.apply(&full).max_abs_diff(&full.scale_real(6.0)), 0.0);
        for k in 0..mt.len() {
            let b = pair_annihilator(&mt, k).unwrap();
            assert_eq!(g.commutator(&b), b.scale_real(-2.0));
        }
    }

    #[test]
    fn gb_is_selfadjoint_and_vanishes_at_zero_angle() {
        let (mt, _) = tm();
        let zero = theta_from_delta(&mt, &GapTable::zeros(2));
        assert_eq!(build_gb(&mt, &zero).unwrap().nnz(), 0);
        let t = theta_from_delta(&mt, &GapTable(vec![1.2, 1.2]));
        let gb = build_gb(&mt, &t).unwrap();
        assert!(gb.nnz() > 0 && gb.norm_inf().is_finite());
        assert!(gb.is_selfadjoint(1e-12));
    }

    #[test]
    fn gb_rejects_asymmetric_angles() {
        let (mt, _) = tm();
        let mut t = theta_from_delta(&mt, &GapTable(vec![1.2, 1.2]));
        t.theta[0] = 0.1;
        assert!(matches!(build_gb(&mt, &t), Err(Error::Validation(_))));
    }

    #[test]
    fn hm_rejects_bad_gap() {
        let (mt, _) = tm();
        assert!(build_hm(&mt, &GapTable(vec![1.0, 0.5]), &[0.0, 0.0]).is_err());
        assert!(build_hm(&mt, &GapTable(vec![-1.0, -1.0]), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn hm_without_gap_is_free() {
        let (mt, _) = tm();
        let hm = build_hm(&mt, &GapTable::zeros(2), &[0.0, 0.0]).unwrap();
        assert_eq!(hm, kinetic(&mt).unwrap());
    }

    #[test]
    fn mean_field_split_reassembles_h() {
        for (mt, k) in [tm(), three_mode()] {
            let d = GapTable::constant(mt.len(), 0.9);
            let t = theta_from_delta(&mt, &d);
            let w: Vec<f64> = (0..mt.len()).map(|i| t.pair_amplitude(i)).collect();
            let h = build_h(&mt, &k).unwrap();
            let hm = build_hm(&mt, &d, &w).unwrap();
            let rest = fluctuation_interaction(&mt, &k, &w).unwrap();
            // off the gap solution the split leaves (Δ_k + Σ U w)(v_k - w_k) behind
            let field: Vec<f64> =
                (0..mt.len()).map(|i| d.0[i] + (0..mt.len()).map(|j| k.get(i, j) * w[j]).sum::<f64>()).collect();
            let linear = (0..mt.len()).fold(SparseOperator::zeros(mt.dim()), |acc, i| {
                &acc + &pair_field(&mt, i).unwrap().scale_real(field[i])
            });
            let offset: f64 = (0..mt.len()).map(|i| field[i] * w[i]).sum();
            let rebuilt = (&(&hm + &rest) + &linear).add_identity(-offset);
            assert!(h.max_abs_diff(&rebuilt) < 1e-13);
        }
    }

    #[test]
    fn hprime_is_h_minus_hm_at_the_gap_solution() {
        let (mt, k) = tm();
        let d = GapTable(vec![1.2, 1.2]);
        let t = theta_from_delta(&mt, &d);
        let w = [0.3, 0.3];
        let h = build_h(&mt, &k).unwrap();
        let hm = build_hm(&mt, &d, &w).unwrap();
        let hp = build_hprime(&mt, &k, &t).unwrap();
        assert!(hp.max_abs_diff(&(&h - &hm)) <= 1e-10);
        assert!(hp.max_abs_diff(&fluctuation_interaction(&mt, &k, &w).unwrap()) <= 1e-12);
        assert_eq!(build_hprime(&mt, &Kernel::zeros(2), &t).unwrap().nnz(), 0);
    }

    #[test]
    fn rotation_commutators() {
        let (mt, _) = three_mode();
        let d = GapTable(vec![0.8, 1.3, 0.8]);
        let t = theta_from_delta(&mt, &d);
        let igb = build_gb(&mt, &t).unwrap().scale(Complex64::new(0.0, 1.0));
        for k in 0..mt.len() {
            let h = pair_number(&mt, k).unwrap();
            let v = pair_field(&mt, k).unwrap();
            let two_theta = 2.0 * t.theta[k];
            assert!(h.commutator(&igb).max_abs_diff(&v.scale_real(two_theta)) <= 1e-12);
            let expect = h.add_identity(-1.0).scale_real(-two_theta);
            assert!(v.commutator(&igb).max_abs_diff(&expect) <= 1e-12);
        }
    }

    #[test]
    fn rotated_quadratic_form() {
        let (mt, _) = three_mode();
        let d = GapTable(vec![0.8, 1.3, 0.8]);
        let t = theta_from_delta(&mt, &d);
        let gb = build_gb(&mt, &t).unwrap();
        let xi = mt.xi();
        for k in 0..mt.len() {
            let h = pair_number(&mt, k).unwrap();
            let v = pair_field(&mt, k).unwrap();
            let a = &h.scale_real(xi[k]) - &v.scale_real(d.0[k]);
            let rotated = conjugate_series(&a, &gb, 1.0, 1e-13).unwrap();
            let (s2, c2, s) = ((2.0 * t.theta[k]).sin(), (2.0 * t.theta[k]).cos(), t.theta[k].sin());
            let expect = (&h.scale_real(xi[k] * c2 + d.0[k] * s2) + &v.scale_real(xi[k] * s2 - d.0[k] * c2))
                .add_identity(2.0 * xi[k] * s * s - d.0[k] * s2);
            assert!(rotated.max_abs_diff(&expect) <= 1e-9);
        }
    }

    #[test]
    fn phase_rotation_by_particle_number() {
        let (mt, k) = three_mode();
        let g = build_g(&mt).unwrap();
        let h = build_h(&mt, &k).unwrap();
        for alpha in [0.3, 1.0, PI] {
            let phase = Complex64::from_polar(1.0, alpha);
            for j in 0..mt.n_orbitals() {
                let c = fock::ladder_matrix(j, mt.len()).unwrap();
                let rotated = conjugate_series(&c, &g, alpha, 1e-12).unwrap();
                assert!(rotated.max_abs_diff(&c.scale(phase)) <= 1e-9);
            }
            let rotated = conjugate_series(&h, &g, alpha, 1e-12).unwrap();
            assert!(rotated.max_abs_diff(&h) <= 1e-9);
        }
    }
}
