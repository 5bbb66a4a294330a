//! Reference states, Bogoliubov quasiparticles and the four-quasiparticle
//! correction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, conjugate_series, orbital, StateVector, SparseOperator};
use crate::gapsolve::AngleTable;
use crate::hamiltonian::build_gb;
use crate::model::{Kernel, ModeTable};

/// Agreement required between the closed-form quasiparticle operators and
/// the conjugation definition.
pub const QUASI_CROSSCHECK_TOL: f64 = 1e-9;

/// Largest `|(Ψref, Φ)|` accepted by [`normalized_psi`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

fn pair_creation(modes: &ModeTable, k: usize, v: &StateVector) -> StateVector {
    let (a, b) = (orbital(k, false), orbital(modes.pair(k), true));
    let word = [(fock::Ladder::Create, a), (fock::Ladder::Create, b)];
    let mut out = vec![Complex64::new(0.0, 0.0); v.dim()];
    for (s, amp) in v.amplitudes().iter().enumerate() {
        if let Some((sign, t)) = fock::apply_word(&word, fock::OccIndex(s)) {
            out[t.0] += *amp * sign as f64;
        }
    }
    StateVector::from_amplitudes(out)
}

/// `Ψ_F`: every pair with `ξ_k ≤ 0` doubly occupied.
pub fn fermi_vacuum(modes: &ModeTable) -> Result<StateVector> {
    let mut psi = StateVector::vacuum(fock::fock_dim(modes.len())?);
    for k in 0..modes.len() {
        if modes.xi()[k] <= 0.0 {
            psi = pair_creation(modes, k, &psi);
        }
    }
    Ok(psi)
}

/// `Ψ_BCS = Π_k (cos θ_k + sin θ_k C*_{k↑} C*_{-k↓}) |0>`.
pub fn bcs_state(modes: &ModeTable, angles: &AngleTable) -> Result<StateVector> {
    angles.validate(modes)?;
    let mut psi = StateVector::vacuum(fock::fock_dim(modes.len())?);
    for k in 0..modes.len() {
        let mut next = psi.scale_real(angles.cos[k]);
        next.axpy(Complex64::new(angles.sin[k], 0.0), &pair_creation(modes, k, &psi));
        psi = next;
    }
    Ok(psi)
}

/// Quasiparticle annihilators `γ_{k↑}`, `γ_{k↓}` for every mode.
#[derive(Debug, Clone)]
pub struct QuasiOps {
    pub up: Vec<SparseOperator>,
    pub down: Vec<SparseOperator>,
    /// Largest entrywise gap to `e^{iG_B} C e^{-iG_B}` seen when building.
    pub crosscheck: f64,
}

impl QuasiOps {
    pub fn get(&self, k: usize, spin_down: bool) -> &SparseOperator {
        if spin_down {
            &self.down[k]
        } else {
            &self.up[k]
        }
    }

    /// `X_p = γ*_{p↑} γ*_{-p↓}`.
    pub fn pair_creator(&self, modes: &ModeTable, p: usize) -> SparseOperator {
        self.up[p].adjoint().mul(&self.down[modes.pair(p)].adjoint())
    }

    /// Largest deviation from the anticommutation relations among the
    /// quasiparticle operators.
    pub fn car_deviation(&self) -> f64 {
        let all: Vec<&SparseOperator> = self.up.iter().chain(&self.down).collect();
        let Some(first) = all.first() else {
            return 0.0;
        };
        let identity = SparseOperator::identity(first.dim());
        let mut worst: f64 = 0.0;
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate().skip(i) {
                worst = worst.max(a.anticommutator(b).norm_inf());
                let mixed = a.anticommutator(&b.adjoint());
                let dev = if i == j { (&mixed - &identity).norm_inf() } else { mixed.norm_inf() };
                worst = worst.max(dev);
            }
        }
        worst
    }

    /// Largest `‖γ_{kσ} ψ‖` over all quasiparticle operators.
    pub fn annihilation_residual(&self, psi: &StateVector) -> f64 {
        self.up.iter().chain(&self.down).map(|g| g.apply(psi).norm()).fold(0.0, f64::max)
    }
}

/// Closed-form quasiparticle operators
/// `γ_{k↑} = cos θ_k C_{k↑} - sin θ_k C*_{-k↓}` and
/// `γ_{-k↓} = sin θ_k C*_{k↑} + cos θ_k C_{-k↓}`, checked against the
/// conjugation `e^{iG_B} C e^{-iG_B}`.
pub fn quasi_ops(modes: &ModeTable, angles: &AngleTable) -> Result<QuasiOps> {
    let ops = quasi_ops_unchecked(modes, angles)?;
    if ops.crosscheck > QUASI_CROSSCHECK_TOL {
        return Err(Error::Internal(format!(
            "quasiparticle closed form differs from the conjugation by {:e}",
            ops.crosscheck
        )));
    }
    Ok(ops)
}

/// As [`quasi_ops`], leaving the cross-check deviation for the caller.
pub(crate) fn quasi_ops_unchecked(modes: &ModeTable, angles: &AngleTable) -> Result<QuasiOps> {
    angles.validate(modes)?;
    let m = modes.len();
    let ladders: Vec<SparseOperator> =
        (0..2 * m).map(|j| fock::ladder_matrix(j, m)).collect::<Result<_>>()?;
    let c = |k: usize, down: bool| &ladders[orbital(k, down)];
    let mut up = Vec::with_capacity(m);
    let mut down = Vec::with_capacity(m);
    for k in 0..m {
        let partner = modes.pair(k);
        let (s, co) = (angles.sin[k], angles.cos[k]);
        up.push(&c(k, false).scale_real(co) - &c(partner, true).adjoint().scale_real(s));
        down.push(&c(partner, false).adjoint().scale_real(s) + &c(k, true).scale_real(co));
    }
    let gb = build_gb(modes, angles)?;
    let mut crosscheck: f64 = 0.0;
    for k in 0..m {
        for (spin_down, gamma) in [(false, &up[k]), (true, &down[k])] {
            let conj = conjugate_series(c(k, spin_down), &gb, -1.0, 1e-13)?;
            crosscheck = crosscheck.max(conj.max_abs_diff(gamma));
        }
    }
    Ok(QuasiOps { up, down, crosscheck })
}

/// The unnormalized correction `Φ` and its ingredients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionState {
    pub phi: Vec<Complex64>,
    /// `(Φ, Φ)`.
    pub overlap: f64,
    /// `c_{p,p'} = U(p,p') (C_p² S_{p'}² + C_{p'}² S_p²) / (E_p + E_{p'})`.
    pub coeffs: Vec<Vec<f64>>,
}

impl CorrectionState {
    pub fn state(&self) -> StateVector {
        StateVector::from_amplitudes(self.phi.clone())
    }
}

/// Pair amplitudes `c_{p,p'}`. Where both energies vanish the numerator is
/// zero as well and the amplitude is taken as 0.
pub fn pair_amplitudes(kernel: &Kernel, angles: &AngleTable) -> Vec<Vec<f64>> {
    let m = angles.len();
    (0..m)
        .map(|p| {
            (0..m)
                .map(|q| {
                    let (cp, sp, cq, sq) = (angles.cos[p], angles.sin[p], angles.cos[q], angles.sin[q]);
                    let num = kernel.get(p, q) * ((cp * sq).powi(2) + (cq * sp).powi(2));
                    if num == 0.0 {
                        0.0
                    } else {
                        num / (angles.energy[p] + angles.energy[q])
                    }
                })
                .collect()
        })
        .collect()
}

/// `Φ = 1/2 Σ_{p,p'} c_{p,p'} X_p X_{p'} Ψref` with `X_p = γ*_{p↑} γ*_{-p↓}`.
/// The `X_p` commute and the diagonal terms vanish, so the sum runs over
/// unordered pairs with weight 1.
pub fn correction_state(
    modes: &ModeTable,
    kernel: &Kernel,
    angles: &AngleTable,
    quasi: &QuasiOps,
    reference: &StateVector,
) -> Result<CorrectionState> {
    angles.validate(modes)?;
    let coeffs = pair_amplitudes(kernel, angles);
    let m = modes.len();
    let x: Vec<SparseOperator> = (0..m).map(|p| quasi.pair_creator(modes, p)).collect();
    let mut phi = StateVector::zeros(reference.dim());
    for q in 0..m {
        if coeffs[q].iter().all(|&c| c == 0.0) {
            continue;
        }
        let xq = x[q].apply(reference);
        for p in 0..q {
            if coeffs[p][q] != 0.0 {
                phi.axpy(Complex64::new(coeffs[p][q], 0.0), &x[p].apply(&xq));
            }
        }
    }
    Ok(CorrectionState {
        overlap: phi.norm_sqr(),
        phi: phi.amplitudes().to_vec(),
        coeffs,
    })
}

/// `Ψ = (Ψref + Φ) / sqrt(1 + (Φ, Φ))`.
pub fn normalized_psi(reference: &StateVector, correction: &CorrectionState) -> Result<StateVector> {
    let phi = correction.state();
    if phi.dim() != reference.dim() {
        return Err(Error::validation("reference and correction dimensions differ"));
    }
    let overlap = reference.inner(&phi).norm();
    if overlap > ORTHOGONALITY_TOL {
        return Err(Error::validation(format!(
            "correction is not orthogonal to the reference state: |(Ψref, Φ)| = {overlap:e}"
        )));
    }
    Ok((reference + &phi).scale_real(1.0 / (1.0 + correction.overlap).sqrt()))
}
