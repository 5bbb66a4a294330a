//! Closed-form energies, spectra and expectation values, each paired with a
//! brute-force evaluation on the Fock space, and the verification report
//! that collects them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, conjugate_series, evolve_state, expectation, SparseOperator, StateVector};
use crate::gapsolve::{
    dk_weights, gap_residual, new_gap_residual, solve_gap, solve_new_gap, AngleTable, Equation, GapSolution,
    GapTable, SolverOptions,
};
use crate::hamiltonian::{build_gb, build_hm, build_hprime, fluctuation_interaction, OperatorBundle};
use crate::model::{Instance, Kernel, ModeTable, WaveVector};
use crate::states::{self, bcs_state, correction_state, fermi_vacuum, normalized_psi, CorrectionState, QuasiOps};

/// Margin for the strict energy inequalities.
pub const STRICT_MARGIN: f64 = 1e-12;

/// Verification never solves the gap equation more loosely than this.
pub const VERIFY_MAX_TOL: f64 = 1e-12;

/// Number of random angle tables in the product-form check.
pub const RANDOM_ANGLE_TABLES: usize = 20;

const PHASES: [f64; 3] = [0.3, 1.0, PI];

// ---------------------------------------------------------------- formulas

// a(p,q) = C_p² S_q² + C_q² S_p²
fn mix(t: &AngleTable, p: usize, q: usize) -> f64 {
    (t.cos[p] * t.sin[q]).powi(2) + (t.cos[q] * t.sin[p]).powi(2)
}

// num / den with 0/0 read as 0
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `E_BCS = Σ_k (ξ_k - E_k + Δ_k w_k)`.
pub fn ebcs_formula(modes: &ModeTable, angles: &AngleTable, w: &[f64]) -> f64 {
    (0..modes.len())
        .map(|k| modes.xi()[k] - angles.energy[k] + angles.delta[k] * w[k])
        .sum()
}

/// Product-state pair amplitudes `w_k = C_k S_k`.
pub fn bcs_pair_amplitudes(angles: &AngleTable) -> Vec<f64> {
    (0..angles.len()).map(|k| angles.pair_amplitude(k)).collect()
}

/// `(Ψ_F, H Ψ_F) = Σ_k (ξ_k - |ξ_k|)`.
pub fn fermi_energy_formula(modes: &ModeTable) -> f64 {
    modes.xi().iter().map(|x| x - x.abs()).sum()
}

/// `-1/2 Σ_k (E_k - |ξ_k|)² / E_k`.
pub fn condensation_energy(modes: &ModeTable, delta: &GapTable) -> f64 {
    -0.5 * modes
        .xi()
        .iter()
        .zip(delta.values())
        .map(|(x, d)| {
            let e = x.hypot(*d);
            ratio((e - x.abs()).powi(2), e)
        })
        .sum::<f64>()
}

/// `Σ_{p,p'} U(p,p')² a(p,p')² / (E_p + E_p')` over ordered pairs.
pub fn pair_energy_sum(kernel: &Kernel, angles: &AngleTable) -> f64 {
    let m = angles.len();
    (0..m)
        .flat_map(|p| (0..m).map(move |q| (p, q)))
        .map(|(p, q)| ratio((kernel.get(p, q) * mix(angles, p, q)).powi(2), angles.energy[p] + angles.energy[q]))
        .sum()
}

/// Energy gained by the corrected state over the product state.
pub fn delta_e_formula(modes: &ModeTable, kernel: &Kernel, angles: &AngleTable, overlap: f64) -> f64 {
    let m = modes.len();
    let t = angles;
    let e = &t.energy;
    let norm = 1.0 + overlap;
    let mut first = 0.0;
    let mut second = 0.0;
    for k in 0..m {
        for kp in 0..m {
            let u = kernel.get(k, kp);
            if u == 0.0 {
                continue;
            }
            let weight = (t.cos[k] * t.cos[kp]).powi(2) + (t.sin[k] * t.sin[kp]).powi(2);
            let inner: f64 = (0..m)
                .map(|p| {
                    let num = kernel.get(k, p) * kernel.get(kp, p) * mix(t, k, p) * mix(t, kp, p);
                    ratio(num, (e[k] + e[p]) * (e[kp] + e[p]))
                })
                .sum();
            first += u * weight * inner;
            let cs = t.pair_amplitude(k) * t.pair_amplitude(kp);
            second += u * cs * ratio(u * u * mix(t, k, kp).powi(2), (e[k] + e[kp]).powi(2));
        }
    }
    (first + 4.0 * second) / norm
}

/// `(Ψ, H_M Ψ)` predicted for the corrected state built on `angles`.
pub fn corrected_mean_field_formula(modes: &ModeTable, kernel: &Kernel, angles: &AngleTable, overlap: f64) -> f64 {
    ebcs_formula(modes, angles, &bcs_pair_amplitudes(angles)) + pair_energy_sum(kernel, angles) / (1.0 + overlap)
}

/// `(Ψ, B_k Ψ) = 1/2 sin 2θ_k (1 - 4 D_k / (D + 2))` for the corrected state.
pub fn corrected_pair_amplitudes(modes: &ModeTable, kernel: &Kernel, angles: &AngleTable) -> Vec<f64> {
    let d = dk_weights(modes, kernel, &GapTable(angles.delta.clone()));
    d.factors().iter().enumerate().map(|(k, f)| angles.pair_amplitude(k) * f).collect()
}

/// Sorted predicted spectrum of `H_M`: `Σ_j E_{k(j)} n_j + E_BCS` over
/// every occupation pattern of the quasiparticle orbitals.
pub fn spectrum_formula(angles: &AngleTable, e_bcs: f64) -> Vec<f64> {
    let n = 2 * angles.len();
    let mut out: Vec<f64> = (0..1usize << n)
        .map(|s| (0..n).filter(|j| s >> j & 1 == 1).map(|j| angles.energy[j / 2]).sum::<f64>() + e_bcs)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

// ---------------------------------------------------------- brute force

fn expect_re(op: &SparseOperator, psi: &StateVector) -> Result<f64> {
    Ok(expectation(psi, op, psi)?.re)
}

/// `(Ψ, B_k Ψ)` for every mode.
pub fn pair_expectations(psi: &StateVector, bundle: &OperatorBundle) -> Result<Vec<f64>> {
    bundle.pair.iter().map(|b| expect_re(b, psi)).collect()
}

/// All eigenvalues of a selfadjoint operator, ascending. Limited to
/// [`fock::DENSE_MAX_MODES`] modes.
pub fn dense_eigenvalues(op: &SparseOperator) -> Result<Vec<f64>> {
    let limit = 1usize << (2 * fock::DENSE_MAX_MODES);
    if op.dim() > limit {
        return Err(Error::Resource(format!(
            "dense eigendecomposition of dimension {} exceeds the limit {limit} (M <= {})",
            op.dim(),
            fock::DENSE_MAX_MODES
        )));
    }
    let mut values: Vec<f64> = if op.entries().all(|(_, _, v)| v.im == 0.0) {
        let mut m = DMatrix::<f64>::zeros(op.dim(), op.dim());
        for (r, c, v) in op.entries() {
            m[(r, c)] = v.re;
        }
        SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
    } else {
        SymmetricEigen::new(op.to_dense()).eigenvalues.iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn max_sorted_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Outcome of comparing `σ(H_M)` with the predicted multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumComparison {
    pub deviation: f64,
    pub eigenvalues: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// Dense spectrum of `hm` against [`spectrum_formula`].
pub fn hm_spectrum_check(hm: &SparseOperator, angles: &AngleTable, e_bcs: f64) -> Result<SpectrumComparison> {
    let eigenvalues = dense_eigenvalues(hm)?;
    let predicted = spectrum_formula(angles, e_bcs);
    Ok(SpectrumComparison {
        deviation: max_sorted_diff(&eigenvalues, &predicted),
        eigenvalues,
        predicted,
    })
}

/// `(Ψ, [G, B_k] Ψ)`.
pub fn ssb_witness(psi: &StateVector, k: usize, bundle: &OperatorBundle) -> Result<Complex64> {
    let c = bundle.g.commutator(&bundle.pair[k]);
    expectation(psi, &c, psi)
}

/// `max_k |Δ_k + Σ_k' U(k,k') (Ψ, B_k' Ψ)|` at a converged solution.
pub fn pair_self_consistency(kernel: &Kernel, sol: &GapSolution, psi: &StateVector, bundle: &OperatorBundle) -> Result<f64> {
    if !sol.converged {
        return Err(Error::validation("gap solution did not converge"));
    }
    let w = pair_expectations(psi, bundle)?;
    let m = w.len();
    Ok((0..m)
        .map(|k| (sol.delta.0[k] + (0..m).map(|kp| kernel.get(k, kp) * w[kp]).sum::<f64>()).abs())
        .fold(0.0, f64::max))
}

/// `H' Ψ_BCS` written in quasiparticles:
/// `-Σ_{k,k'} U(k,k') S_k² C_k'² X_k' X_k Ψ_BCS`.
pub fn hprime_expansion(
    modes: &ModeTable,
    kernel: &Kernel,
    angles: &AngleTable,
    quasi: &QuasiOps,
    psi_bcs: &StateVector,
) -> StateVector {
    let m = modes.len();
    let x: Vec<SparseOperator> = (0..m).map(|p| quasi.pair_creator(modes, p)).collect();
    let mut out = StateVector::zeros(psi_bcs.dim());
    for k in 0..m {
        let xk = x[k].apply(psi_bcs);
        for kp in 0..m {
            let c = -kernel.get(k, kp) * angles.sin[k].powi(2) * angles.cos[kp].powi(2);
            if c != 0.0 {
                out.axpy(Complex64::new(c, 0.0), &x[kp].apply(&xk));
            }
        }
    }
    out
}

/// Brute-force side of the residual-interaction identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HprimeValues {
    /// `(Ψ_BCS, H' Ψ_BCS)`.
    pub bcs_expectation: f64,
    /// `(Φ, H' Ψ_BCS)`.
    pub phi_bcs: f64,
    /// `‖H' Ψ_BCS - expansion‖`.
    pub expansion_error: f64,
}

pub fn hprime_checks(
    modes: &ModeTable,
    kernel: &Kernel,
    angles: &AngleTable,
    quasi: &QuasiOps,
    phi: &CorrectionState,
    psi_bcs: &StateVector,
) -> Result<HprimeValues> {
    let hp = build_hprime(modes, kernel, angles)?;
    let applied = hp.apply(psi_bcs);
    Ok(HprimeValues {
        bcs_expectation: psi_bcs.inner(&applied).re,
        phi_bcs: phi.state().inner(&applied).re,
        expansion_error: (&applied - &hprime_expansion(modes, kernel, angles, quasi, psi_bcs)).norm(),
    })
}

// --------------------------------------------------------------- summaries

/// Pair expectations of the state matching `sol`: `C_k S_k` for the classic
/// equation, the dense `(Ψ̃, B_k Ψ̃)` for the new one.
fn solution_pair_amplitudes(instance: &Instance, sol: &GapSolution, bundle: &OperatorBundle) -> Result<Vec<f64>> {
    match sol.equation {
        Equation::Classic => Ok(bcs_pair_amplitudes(&sol.theta)),
        Equation::New => {
            let (modes, kernel) = (instance.modes(), instance.kernel());
            let reference = bcs_state(modes, &sol.theta)?;
            let quasi = states::quasi_ops(modes, &sol.theta)?;
            let corr = correction_state(modes, kernel, &sol.theta, &quasi, &reference)?;
            pair_expectations(&normalized_psi(&reference, &corr)?, bundle)
        }
    }
}

/// Mean-field spectrum at a gap solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub equation: Equation,
    pub e_bcs: f64,
    pub pair_expectations: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub predicted: Vec<f64>,
    pub deviation: f64,
}

pub fn spectrum_summary(instance: &Instance, sol: &GapSolution) -> Result<SpectrumSummary> {
    let bundle = OperatorBundle::build(instance.modes(), instance.kernel())?;
    let w = solution_pair_amplitudes(instance, sol, &bundle)?;
    let e_bcs = ebcs_formula(instance.modes(), &sol.theta, &w);
    let hm = build_hm(instance.modes(), &sol.delta, &w)?;
    let c = hm_spectrum_check(&hm, &sol.theta, e_bcs)?;
    Ok(SpectrumSummary {
        equation: sol.equation,
        e_bcs,
        pair_expectations: w,
        eigenvalues: c.eigenvalues,
        predicted: c.predicted,
        deviation: c.deviation,
    })
}

/// Closed-form and dense energies of the normal, product and corrected
/// states at a gap solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub equation: Equation,
    pub e_bcs_formula: f64,
    pub fermi_formula: f64,
    pub fermi_dense: f64,
    pub bcs_dense: f64,
    pub condensation_formula: f64,
    pub condensation_dense: f64,
    pub overlap: f64,
    pub delta_e_formula: f64,
    pub delta_e_dense: f64,
    pub corrected_dense: f64,
}

pub fn energy_summary(instance: &Instance, sol: &GapSolution) -> Result<EnergySummary> {
    let (modes, kernel) = (instance.modes(), instance.kernel());
    let t = &sol.theta;
    let bundle = OperatorBundle::build(modes, kernel)?;
    let psi_f = fermi_vacuum(modes)?;
    let psi_bcs = bcs_state(modes, t)?;
    let quasi = states::quasi_ops(modes, t)?;
    let corr = correction_state(modes, kernel, t, &quasi, &psi_bcs)?;
    let psi = normalized_psi(&psi_bcs, &corr)?;
    let (fermi_dense, bcs_dense, corrected_dense) =
        (expect_re(&bundle.h, &psi_f)?, expect_re(&bundle.h, &psi_bcs)?, expect_re(&bundle.h, &psi)?);
    Ok(EnergySummary {
        equation: sol.equation,
        e_bcs_formula: ebcs_formula(modes, t, &bcs_pair_amplitudes(t)),
        fermi_formula: fermi_energy_formula(modes),
        fermi_dense,
        bcs_dense,
        condensation_formula: condensation_energy(modes, &sol.delta),
        condensation_dense: bcs_dense - fermi_dense,
        overlap: corr.overlap,
        delta_e_formula: delta_e_formula(modes, kernel, t, corr.overlap),
        delta_e_dense: corrected_dense - bcs_dense,
        corrected_dense,
    })
}

// ---------------------------------------------------------------- report

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub formula_value: Option<f64>,
    pub brute_value: Option<f64>,
    pub deviation: Option<f64>,
    pub tolerance: f64,
    /// `None` when skipped.
    pub pass: Option<bool>,
    pub skipped: Option<String>,
    pub note: Option<String>,
}

/// Per-instance data recorded alongside the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub modes: usize,
    pub dimension: usize,
    pub wave_vectors: Vec<WaveVector>,
    pub xi: Vec<f64>,
    pub kernel: Vec<Vec<f64>>,
    pub solver: SolverOptions,
    pub verification_tol: f64,
    pub seed: u64,
    pub classic: GapSolution,
    pub new: GapSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub instance: Option<InstanceSummary>,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.pass == Some(false))
    }

    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Every check in report order.
pub const CHECK_NAMES: &[&str] = &[
    "car_relations",
    "hamiltonian_selfadjoint",
    "number_conservation",
    "pair_number_commutator",
    "phase_covariance_ladder",
    "phase_covariance_hamiltonian",
    "gap_solution",
    "bogoliubov_commutators",
    "rotated_quadratic_form",
    "bcs_norm",
    "bcs_product_form",
    "random_bcs_product_form",
    "quasi_conjugation",
    "quasi_car",
    "quasi_annihilate_bcs",
    "bcs_pair_expectation",
    "ssb_witness_bcs",
    "ebcs_mean_field",
    "ebcs_hamiltonian",
    "fermi_energy",
    "condensation_energy",
    "mean_field_split",
    "hm_spectrum",
    "hm_ground_energy",
    "correction_orthogonal",
    "correction_overlap",
    "hprime_split",
    "hprime_bcs_expectation",
    "hprime_phi_bcs",
    "hprime_expansion",
    "hm_corrected_expectation",
    "delta_e",
    "energy_chain",
    "new_gap_solution",
    "new_gap_reduction",
    "new_quasi_annihilate",
    "new_correction_orthogonal",
    "new_correction_overlap",
    "new_pair_expectation",
    "new_gap_self_consistency",
    "ssb_witness_corrected",
    "new_hm_spectrum",
    "ordering_invariance",
];

/// Which checks to run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum CheckSelection {
    #[default]
    All,
    Only(Vec<String>),
}

impl CheckSelection {
    pub fn validate(&self) -> Result<()> {
        if let CheckSelection::Only(names) = self {
            if let Some(bad) = names.iter().find(|n| !CHECK_NAMES.contains(&n.as_str())) {
                return Err(Error::Config(format!("unknown check '{bad}'")));
            }
        }
        Ok(())
    }

    pub fn includes(&self, name: &str) -> bool {
        match self {
            CheckSelection::All => true,
            CheckSelection::Only(names) => names.iter().any(|n| n == name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyOptions {
    pub solver: SolverOptions,
    pub checks: CheckSelection,
    pub seed: u64,
}

enum Eval {
    Value {
        formula: Option<f64>,
        brute: Option<f64>,
        deviation: f64,
        note: Option<String>,
    },
    Skip(String),
}

impl Eval {
    fn compare(formula: f64, brute: f64) -> Self {
        Eval::Value {
            formula: Some(formula),
            brute: Some(brute),
            deviation: (formula - brute).abs(),
            note: None,
        }
    }

    fn deviation(deviation: f64) -> Self {
        Eval::Value {
            formula: None,
            brute: None,
            deviation,
            note: None,
        }
    }

    fn with_note(mut self, text: impl Into<String>) -> Self {
        if let Eval::Value { note, .. } = &mut self {
            *note = Some(text.into());
        }
        self
    }
}

// worst |formula_k - brute_k|, reported at the worst mode
fn compare_modes(formula: &[f64], brute: &[f64]) -> Eval {
    let (k, _) = formula
        .iter()
        .zip(brute)
        .map(|(f, b)| (f - b).abs())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, d)| if d > best.1 { (k, d) } else { best });
    if formula.is_empty() {
        return Eval::deviation(0.0);
    }
    Eval::compare(formula[k], brute[k]).with_note(format!("worst mode {k}"))
}

/// Everything built once from an instance and reused by the checks.
struct Workspace<'a> {
    modes: &'a ModeTable,
    kernel: &'a Kernel,
    bundle: OperatorBundle,
    classic: GapSolution,
    psi_bcs: StateVector,
    quasi: QuasiOps,
    corr: CorrectionState,
    psi: StateVector,
    w_bcs: Vec<f64>,
    hm: SparseOperator,
    e_bcs: f64,
    e_f_dense: f64,
    e_bcs_dense: f64,
    e_psi_dense: f64,
    new: GapSolution,
    psi_bcs_new: StateVector,
    quasi_new: QuasiOps,
    corr_new: CorrectionState,
    psi_new: StateVector,
    w_new: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn build(instance: &'a Instance, solver: &SolverOptions) -> Result<Self> {
        let (modes, kernel) = (instance.modes(), instance.kernel());
        let bundle = OperatorBundle::build(modes, kernel)?;
        let classic = solve_gap(modes, kernel, solver)?;
        let t = &classic.theta;
        let psi_f = fermi_vacuum(modes)?;
        let psi_bcs = bcs_state(modes, t)?;
        let quasi = states::quasi_ops_unchecked(modes, t)?;
        let corr = correction_state(modes, kernel, t, &quasi, &psi_bcs)?;
        let psi = normalized_psi(&psi_bcs, &corr)?;
        let w_bcs = bcs_pair_amplitudes(t);
        let hm = build_hm(modes, &classic.delta, &w_bcs)?;

        let new = solve_new_gap(modes, kernel, solver)?;
        let psi_bcs_new = bcs_state(modes, &new.theta)?;
        let quasi_new = states::quasi_ops_unchecked(modes, &new.theta)?;
        let corr_new = correction_state(modes, kernel, &new.theta, &quasi_new, &psi_bcs_new)?;
        let psi_new = normalized_psi(&psi_bcs_new, &corr_new)?;
        let w_new = pair_expectations(&psi_new, &bundle)?;

        Ok(Workspace {
            e_bcs: ebcs_formula(modes, t, &w_bcs),
            e_f_dense: expect_re(&bundle.h, &psi_f)?,
            e_bcs_dense: expect_re(&bundle.h, &psi_bcs)?,
            e_psi_dense: expect_re(&bundle.h, &psi)?,
            modes,
            kernel,
            bundle,
            classic,
            psi_bcs,
            quasi,
            corr,
            psi,
            w_bcs,
            hm,
            new,
            psi_bcs_new,
            quasi_new,
            corr_new,
            psi_new,
            w_new,
        })
    }

    fn angles(&self) -> &AngleTable {
        &self.classic.theta
    }

    fn nontrivial_coupling(&self) -> bool {
        !self.classic.is_trivial() && !self.kernel.is_zero()
    }

    fn spectrum(&self) -> Result<Eval> {
        match hm_spectrum_check(&self.hm, self.angles(), self.e_bcs) {
            Ok(c) => Ok(Eval::deviation(c.deviation)),
            Err(Error::Resource(msg)) => Ok(Eval::Skip(msg)),
            Err(e) => Err(e),
        }
    }

    // Scalars that must not depend on how Λ is enumerated; per-mode values
    // are listed in sorted wave-vector order.
    fn invariants(&self) -> Result<Vec<f64>> {
        let mut order: Vec<usize> = (0..self.modes.len()).collect();
        order.sort_by_key(|&i| self.modes.modes()[i]);
        let mut out = vec![
            self.e_bcs,
            self.e_f_dense,
            self.e_bcs_dense,
            self.e_psi_dense,
            self.corr.overlap,
            condensation_energy(self.modes, &self.classic.delta),
            delta_e_formula(self.modes, self.kernel, self.angles(), self.corr.overlap),
            self.corr_new.overlap,
            expect_re(&self.bundle.h, &self.psi_new)?,
        ];
        out.extend(order.iter().map(|&i| self.classic.delta.0[i]));
        out.extend(order.iter().map(|&i| self.new.delta.0[i]));
        out.extend(order.iter().map(|&i| self.w_new[i]));
        if self.modes.len() <= fock::DENSE_MAX_MODES {
            out.extend(dense_eigenvalues(&self.hm)?);
        }
        Ok(out)
    }
}

fn permutation(m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(rng);
    if m > 1 && perm.iter().enumerate().all(|(i, &p)| i == p) {
        perm.reverse();
    }
    perm
}

fn random_angles(modes: &ModeTable, rng: &mut impl Rng) -> AngleTable {
    let mut theta = vec![0.0; modes.len()];
    for orbit in modes.orbits() {
        let t = rng.gen_range(0.0..=std::f64::consts::FRAC_PI_2);
        for k in orbit {
            theta[k] = t;
        }
    }
    AngleTable::from_angles(theta)
}

fn summary(ws: &Workspace, solver: &SolverOptions, seed: u64) -> InstanceSummary {
    InstanceSummary {
        modes: ws.modes.len(),
        dimension: ws.bundle.dim(),
        wave_vectors: ws.modes.modes().to_vec(),
        xi: ws.modes.xi().to_vec(),
        kernel: ws.kernel.rows(),
        solver: *solver,
        verification_tol: solver.tol,
        seed,
        classic: ws.classic.clone(),
        new: ws.new.clone(),
    }
}

/// Run the selected checks on `instance` in [`CHECK_NAMES`] order.
/// Individual failures are recorded in the report; construction errors
/// abort the run.
pub fn run_verification(instance: &Instance, opts: &VerifyOptions) -> Result<VerificationReport> {
    opts.checks.validate()?;
    opts.solver.validate()?;
    let solver = SolverOptions {
        tol: opts.solver.tol.min(VERIFY_MAX_TOL),
        ..opts.solver
    };
    let ws = Workspace::build(instance, &solver)?;
    let (modes, kernel) = (ws.modes, ws.kernel);
    let m = modes.len();
    let dim = ws.bundle.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let gb = build_gb(modes, ws.angles())?;

    let mut checks = Vec::with_capacity(CHECK_NAMES.len());
    let mut run = |name: &str, tolerance: f64, f: &mut dyn FnMut() -> Result<Eval>| -> Result<()> {
        debug_assert!(CHECK_NAMES.contains(&name));
        let eval = if opts.checks.includes(name) {
            f()?
        } else {
            Eval::Skip("not selected".into())
        };
        checks.push(match eval {
            Eval::Value {
                formula,
                brute,
                deviation,
                note,
            } => Check {
                name: name.into(),
                formula_value: formula,
                brute_value: brute,
                deviation: Some(deviation),
                tolerance,
                pass: Some(deviation <= tolerance),
                skipped: None,
                note,
            },
            Eval::Skip(reason) => Check {
                name: name.into(),
                formula_value: None,
                brute_value: None,
                deviation: None,
                tolerance,
                pass: None,
                skipped: Some(reason),
                note: None,
            },
        });
        Ok(())
    };

    let b = &ws.bundle;
    let t = ws.angles();

    run("car_relations", 0.0, &mut || Ok(Eval::deviation(fock::anticommutator_check(m)?)))?;
    run("hamiltonian_selfadjoint", 0.0, &mut || Ok(Eval::deviation(b.h.max_abs_diff(&b.h.adjoint()))))?;
    run("number_conservation", 1e-12, &mut || Ok(Eval::deviation(b.h.commutator(&b.g).norm_inf())))?;
    run("pair_number_commutator", 1e-12, &mut || {
        Ok(Eval::deviation(
            b.pair.iter().map(|p| b.g.commutator(p).max_abs_diff(&p.scale_real(-2.0))).fold(0.0, f64::max),
        ))
    })?;
    run("phase_covariance_ladder", 1e-9, &mut || {
        let mut worst: f64 = 0.0;
        for alpha in PHASES {
            for j in 0..2 * m {
                let c = fock::ladder_matrix(j, m)?;
                let rotated = conjugate_series(&c, &b.g, alpha, 1e-12)?;
                worst = worst.max(rotated.max_abs_diff(&c.scale(Complex64::from_polar(1.0, alpha))));
            }
        }
        Ok(Eval::deviation(worst))
    })?;
    run("phase_covariance_hamiltonian", 1e-9, &mut || {
        let mut worst: f64 = 0.0;
        for alpha in PHASES {
            worst = worst.max(conjugate_series(&b.h, &b.g, alpha, 1e-12)?.max_abs_diff(&b.h));
        }
        Ok(Eval::deviation(worst))
    })?;
    run("gap_solution", solver.tol, &mut || {
        let r = gap_residual(modes, kernel, &ws.classic.delta).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let e = Eval::deviation(if ws.classic.converged { r } else { f64::INFINITY });
        Ok(e.with_note(format!("{:?} after {} iterations", ws.classic.outcome, ws.classic.iterations)))
    })?;
    run("bogoliubov_commutators", 1e-12, &mut || {
        let igb = gb.scale(Complex64::new(0.0, 1.0));
        let mut worst: f64 = 0.0;
        for k in 0..m {
            let two = 2.0 * t.theta[k];
            let (h, v) = (&b.number[k], &b.field[k]);
            worst = worst.max(h.commutator(&igb).max_abs_diff(&v.scale_real(two)));
            worst = worst.max(v.commutator(&igb).max_abs_diff(&h.add_identity(-1.0).scale_real(-two)));
        }
        Ok(Eval::deviation(worst))
    })?;
    run("rotated_quadratic_form", 1e-9, &mut || {
        let mut worst: f64 = 0.0;
        for k in 0..m {
            let (xi, d) = (modes.xi()[k], t.delta[k]);
            let (h, v) = (&b.number[k], &b.field[k]);
            let a = &h.scale_real(xi) - &v.scale_real(d);
            let rotated = conjugate_series(&a, &gb, 1.0, 1e-13)?;
            let (s2, c2) = ((2.0 * t.theta[k]).sin(), (2.0 * t.theta[k]).cos());
            let expect = (&h.scale_real(xi * c2 + d * s2) + &v.scale_real(xi * s2 - d * c2))
                .add_identity(2.0 * xi * t.sin[k].powi(2) - d * s2);
            worst = worst.max(rotated.max_abs_diff(&expect));
        }
        Ok(Eval::deviation(worst))
    })?;
    run("bcs_norm", 1e-12, &mut || Ok(Eval::compare(1.0, ws.psi_bcs.norm())))?;
    run("bcs_product_form", 1e-10, &mut || {
        let expo = evolve_state(&gb, &StateVector::vacuum(dim), 1e-14)?;
        Ok(Eval::deviation(ws.psi_bcs.max_abs_diff(&expo)))
    })?;
    run("random_bcs_product_form", 1e-10, &mut || {
        let mut worst: f64 = 0.0;
        for _ in 0..RANDOM_ANGLE_TABLES {
            let angles = random_angles(modes, &mut rng);
            let product = bcs_state(modes, &angles)?;
            let expo = evolve_state(&build_gb(modes, &angles)?, &StateVector::vacuum(dim), 1e-14)?;
            worst = worst.max(product.max_abs_diff(&expo));
        }
        Ok(Eval::deviation(worst).with_note(format!("{RANDOM_ANGLE_TABLES} angle tables, seed {}", opts.seed)))
    })?;
    run("quasi_conjugation", states::QUASI_CROSSCHECK_TOL, &mut || Ok(Eval::deviation(ws.quasi.crosscheck)))?;
    run("quasi_car", 1e-12, &mut || Ok(Eval::deviation(ws.quasi.car_deviation())))?;
    run("quasi_annihilate_bcs", 1e-10, &mut || Ok(Eval::deviation(ws.quasi.annihilation_residual(&ws.psi_bcs))))?;
    run("bcs_pair_expectation", 1e-11, &mut || {
        Ok(compare_modes(&ws.w_bcs.clone(), &pair_expectations(&ws.psi_bcs, b)?))
    })?;
    run("ssb_witness_bcs", 1e-11, &mut || {
        let formula: Vec<f64> = ws.w_bcs.iter().map(|w| -2.0 * w).collect();
        let brute = (0..m).map(|k| Ok(ssb_witness(&ws.psi_bcs, k, b)?.re)).collect::<Result<Vec<_>>>()?;
        Ok(compare_modes(&formula, &brute))
    })?;
    run("ebcs_mean_field", 1e-10, &mut || Ok(Eval::compare(ws.e_bcs, expect_re(&ws.hm, &ws.psi_bcs)?)))?;
    run("ebcs_hamiltonian", 1e-10, &mut || Ok(Eval::compare(ws.e_bcs, ws.e_bcs_dense)))?;
    run("fermi_energy", 1e-10, &mut || Ok(Eval::compare(fermi_energy_formula(modes), ws.e_f_dense)))?;
    run("condensation_energy", 1e-10, &mut || {
        let formula = condensation_energy(modes, &ws.classic.delta);
        Ok(Eval::compare(formula, ws.e_bcs_dense - ws.e_f_dense))
    })?;
    run("mean_field_split", 1e-10, &mut || {
        let rest = fluctuation_interaction(modes, kernel, &ws.w_bcs)?;
        Ok(Eval::deviation(b.h.max_abs_diff(&(&ws.hm + &rest))))
    })?;
    run("hm_spectrum", 1e-9, &mut || ws.spectrum())?;
    run("hm_ground_energy", 1e-9, &mut || match dense_eigenvalues(&ws.hm) {
        Ok(ev) => Ok(Eval::compare(ws.e_bcs, ev[0])),
        Err(Error::Resource(msg)) => Ok(Eval::Skip(msg)),
        Err(e) => Err(e),
    })?;
    run("correction_orthogonal", 1e-12, &mut || Ok(Eval::deviation(ws.psi_bcs.inner(&ws.corr.state()).norm())))?;
    run("correction_overlap", 1e-10, &mut || {
        let d = dk_weights(modes, kernel, &ws.classic.delta);
        Ok(Eval::compare(d.dsum / 2.0, ws.corr.overlap))
    })?;
    run("hprime_split", 1e-10, &mut || {
        let hp = build_hprime(modes, kernel, t)?;
        Ok(Eval::deviation(hp.max_abs_diff(&(&b.h - &ws.hm))))
    })?;
    let hprime = hprime_checks(modes, kernel, t, &ws.quasi, &ws.corr, &ws.psi_bcs)?;
    run("hprime_bcs_expectation", 1e-10, &mut || Ok(Eval::compare(0.0, hprime.bcs_expectation)))?;
    run("hprime_phi_bcs", 1e-10, &mut || Ok(Eval::compare(-0.5 * pair_energy_sum(kernel, t), hprime.phi_bcs)))?;
    run("hprime_expansion", 1e-10, &mut || Ok(Eval::deviation(hprime.expansion_error)))?;
    run("hm_corrected_expectation", 1e-9, &mut || {
        let formula = corrected_mean_field_formula(modes, kernel, t, ws.corr.overlap);
        Ok(Eval::compare(formula, expect_re(&ws.hm, &ws.psi)?))
    })?;
    run("delta_e", 1e-9, &mut || {
        let formula = delta_e_formula(modes, kernel, t, ws.corr.overlap);
        Ok(Eval::compare(formula, ws.e_psi_dense - ws.e_bcs_dense))
    })?;
    run("energy_chain", -STRICT_MARGIN, &mut || {
        if !ws.nontrivial_coupling() {
            return Ok(Eval::Skip("needs a nontrivial gap and a nonzero kernel".into()));
        }
        let gap = (ws.e_psi_dense - ws.e_bcs_dense).max(ws.e_bcs_dense - ws.e_f_dense);
        Ok(Eval::deviation(gap).with_note(format!(
            "(Ψ,HΨ) = {:.12}, (Ψ_BCS,HΨ_BCS) = {:.12}, (Ψ_F,HΨ_F) = {:.12}",
            ws.e_psi_dense, ws.e_bcs_dense, ws.e_f_dense
        )))
    })?;

    let tn = &ws.new.theta;
    run("new_gap_solution", solver.tol, &mut || {
        let r = new_gap_residual(modes, kernel, &ws.new.delta, false).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let e = Eval::deviation(if ws.new.converged { r } else { f64::INFINITY });
        Ok(e.with_note(format!(
            "{:?} after {} iterations, max 4D_k/(D+2) = {:.6e}",
            ws.new.outcome,
            ws.new.iterations,
            ws.new.max_correction.unwrap_or(0.0)
        )))
    })?;
    run("new_gap_reduction", 1e-9, &mut || {
        let reduced = solve_new_gap(modes, kernel, &SolverOptions {
            zero_d: true,
            ..solver
        })?;
        Ok(compare_modes(&ws.classic.delta.0, &reduced.delta.0))
    })?;
    run("new_quasi_annihilate", 1e-10, &mut || {
        Ok(Eval::deviation(ws.quasi_new.annihilation_residual(&ws.psi_bcs_new).max(ws.quasi_new.crosscheck)))
    })?;
    run("new_correction_orthogonal", 1e-12, &mut || {
        Ok(Eval::deviation(ws.psi_bcs_new.inner(&ws.corr_new.state()).norm()))
    })?;
    run("new_correction_overlap", 1e-10, &mut || {
        Ok(Eval::compare(ws.new.dsum.unwrap_or(0.0) / 2.0, ws.corr_new.overlap))
    })?;
    run("new_pair_expectation", 1e-10, &mut || {
        Ok(compare_modes(&corrected_pair_amplitudes(modes, kernel, tn), &ws.w_new))
    })?;
    run("new_gap_self_consistency", (10.0 * solver.tol).max(1e-9), &mut || {
        if !ws.new.converged {
            return Ok(Eval::deviation(f64::INFINITY).with_note("new gap equation did not converge"));
        }
        Ok(Eval::deviation(pair_self_consistency(kernel, &ws.new, &ws.psi_new, b)?))
    })?;
    run("ssb_witness_corrected", 1e-11, &mut || {
        let formula: Vec<f64> = corrected_pair_amplitudes(modes, kernel, tn).iter().map(|w| -2.0 * w).collect();
        let brute = (0..m).map(|k| Ok(ssb_witness(&ws.psi_new, k, b)?.re)).collect::<Result<Vec<_>>>()?;
        Ok(compare_modes(&formula, &brute))
    })?;
    run("new_hm_spectrum", 1e-9, &mut || {
        let hm = build_hm(modes, &ws.new.delta, &ws.w_new)?;
        match hm_spectrum_check(&hm, tn, ebcs_formula(modes, tn, &ws.w_new)) {
            Ok(c) => Ok(Eval::deviation(c.deviation)),
            Err(Error::Resource(msg)) => Ok(Eval::Skip(msg)),
            Err(e) => Err(e),
        }
    })?;
    run("ordering_invariance", 1e-10, &mut || {
        if m < 2 {
            return Ok(Eval::Skip("a single mode has one ordering".into()));
        }
        let perm = permutation(m, &mut rng);
        let permuted = instance.reordered(&perm)?;
        let other = Workspace::build(&permuted, &solver)?;
        let (a, c) = (ws.invariants()?, other.invariants()?);
        Ok(Eval::deviation(max_sorted_diff(&a, &c)).with_note(format!("permutation {perm:?}")))
    })?;

    Ok(VerificationReport {
        instance: Some(summary(&ws, &solver, opts.seed)),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gapsolve::theta_from_delta;
    use crate::model::{explicit_modes, separable_kernel, Physics};

    fn tm() -> Instance {
        let mt = explicit_modes(&[[1, 0, 0], [-1, 0, 0]], Some(&[1.6, 1.6]), 2.0 * PI, Physics::default()).unwrap();
        let k = separable_kernel(&mt, 4.0, |_| true);
        Instance::new(mt, k).unwrap()
    }

    fn tm_angles() -> (ModeTable, Kernel, AngleTable) {
        let i = tm();
        let t = theta_from_delta(i.modes(), &GapTable(vec![1.2, 1.2]));
        (i.modes().clone(), i.kernel().clone(), t)
    }

    #[test]
    fn tm_closed_forms() {
        let (mt, k, t) = tm_angles();
        let w = bcs_pair_amplitudes(&t);
        assert!((ebcs_formula(&mt, &t, &w) + 0.08).abs() < 1e-15);
        assert!((condensation_energy(&mt, &GapTable(vec![1.2, 1.2])) + 0.08).abs() < 1e-15);
        assert_eq!(fermi_energy_formula(&mt), 0.0);
        assert!((pair_energy_sum(&k, &t) - 0.2592).abs() < 1e-15);
        let de = delta_e_formula(&mt, &k, &t, 0.0324);
        assert!((de + 0.09038357225881441).abs() < 1e-14);
        let hm = corrected_mean_field_formula(&mt, &k, &t, 0.0324);
        assert!((hm - 0.1710654784967064).abs() < 1e-14);
    }

    #[test]
    fn trivial_closed_forms() {
        let mt = explicit_modes(&[[1, 0, 0], [0, 0, 0], [-1, 0, 0]], Some(&[0.5, -0.7, 0.5]), 2.0 * PI, Physics::default())
            .unwrap();
        let zero = GapTable::zeros(3);
        let t = theta_from_delta(&mt, &zero);
        assert_eq!(condensation_energy(&mt, &zero), 0.0);
        assert!((ebcs_formula(&mt, &t, &[0.0; 3]) - fermi_energy_formula(&mt)).abs() < 1e-15);
        assert!((fermi_energy_formula(&mt) + 1.4).abs() < 1e-15);
        assert_eq!(delta_e_formula(&mt, &Kernel::zeros(3), &t, 0.0), 0.0);
    }

    #[test]
    fn tm_spectrum() {
        let (mt, _, t) = tm_angles();
        let hm = build_hm(&mt, &GapTable(vec![1.2, 1.2]), &[0.3, 0.3]).unwrap();
        let c = hm_spectrum_check(&hm, &t, -0.08).unwrap();
        assert!(c.deviation <= 1e-9);
        assert!((c.eigenvalues[0] + 0.08).abs() < 1e-9);
        assert!((c.eigenvalues[1] - 1.92).abs() < 1e-9);
    }

    #[test]
    fn free_spectrum() {
        let (mt, _, _) = tm_angles();
        let hm = build_hm(&mt, &GapTable::zeros(2), &[0.0, 0.0]).unwrap();
        let t = theta_from_delta(&mt, &GapTable::zeros(2));
        assert!(hm_spectrum_check(&hm, &t, 0.0).unwrap().deviation <= 1e-12);
    }

    #[test]
    fn tm_summaries() {
        let i = tm();
        let sol = solve_gap(i.modes(), i.kernel(), &SolverOptions { tol: 1e-13, ..SolverOptions::default() }).unwrap();
        let e = energy_summary(&i, &sol).unwrap();
        assert!((e.condensation_dense + 0.08).abs() < 1e-10);
        assert!((e.delta_e_dense + 0.09038357225881441).abs() < 1e-9);
        assert!((e.corrected_dense + 0.1703835722588144).abs() < 1e-9);
        let s = spectrum_summary(&i, &sol).unwrap();
        assert!(s.deviation < 1e-9);
        let new = solve_new_gap(i.modes(), i.kernel(), &SolverOptions { tol: 1e-13, ..SolverOptions::default() }).unwrap();
        let s = spectrum_summary(&i, &new).unwrap();
        assert!(s.deviation < 1e-9);
        assert!(s.pair_expectations[0] < 0.3);
    }

    #[test]
    fn dense_limit() {
        let big = SparseOperator::identity(1 << 12);
        assert!(matches!(dense_eigenvalues(&big), Err(Error::Resource(_))));
    }

    #[test]
    fn ssb_witness_examples() {
        let i = tm();
        let bundle = OperatorBundle::build(i.modes(), i.kernel()).unwrap();
        let vac = StateVector::vacuum(16);
        assert_eq!(ssb_witness(&vac, 0, &bundle).unwrap(), Complex64::new(0.0, 0.0));
        let (mt, _, t) = tm_angles();
        let psi = bcs_state(&mt, &t).unwrap();
        assert!((ssb_witness(&psi, 0, &bundle).unwrap().re + 0.6).abs() < 1e-12);
    }

    #[test]
    fn hprime_values_on_tm() {
        let (mt, k, t) = tm_angles();
        let q = crate::states::quasi_ops(&mt, &t).unwrap();
        let psi = bcs_state(&mt, &t).unwrap();
        let corr = correction_state(&mt, &k, &t, &q, &psi).unwrap();
        let v = hprime_checks(&mt, &k, &t, &q, &corr, &psi).unwrap();
        assert!(v.bcs_expectation.abs() < 1e-12);
        assert!((v.phi_bcs + 0.1296).abs() < 1e-12);
        assert!(v.expansion_error < 1e-12);
    }

    #[test]
    fn self_consistency_rejects_unconverged() {
        let i = tm();
        let bundle = OperatorBundle::build(i.modes(), i.kernel()).unwrap();
        let mut sol = solve_new_gap(i.modes(), i.kernel(), &SolverOptions::default()).unwrap();
        sol.converged = false;
        let psi = StateVector::vacuum(16);
        assert!(matches!(pair_self_consistency(i.kernel(), &sol, &psi, &bundle), Err(Error::Validation(_))));
    }

    #[test]
    fn tm_report_passes() {
        let report = run_verification(&tm(), &VerifyOptions::default()).unwrap();
        let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, CHECK_NAMES);
        for c in &report.checks {
            assert_eq!(c.pass, Some(true), "{c:?}");
        }
        let ce = report.check("condensation_energy").unwrap();
        assert!((ce.formula_value.unwrap() + 0.08).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_report() {
        let i = tm();
        let free = Instance::new(i.modes().clone(), Kernel::zeros(2)).unwrap();
        let report = run_verification(&free, &VerifyOptions::default()).unwrap();
        let gap = report.check("gap_solution").unwrap();
        assert_eq!(gap.pass, Some(true));
        assert!(gap.note.as_deref().unwrap().starts_with("Trivial"));
        assert!(report.check("energy_chain").unwrap().skipped.is_some());
        assert!(report.all_pass());
    }

    #[test]
    fn selection_filters_and_rejects_unknown() {
        let sel = CheckSelection::Only(vec!["delta_e".into()]);
        let report = run_verification(&tm(), &VerifyOptions {
            checks: sel,
            ..VerifyOptions::default()
        })
        .unwrap();
        assert_eq!(report.checks.iter().filter(|c| c.skipped.is_none()).count(), 1);
        let bad = CheckSelection::Only(vec!["nope".into()]);
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
