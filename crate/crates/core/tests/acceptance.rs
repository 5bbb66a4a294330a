//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! TM is the two-mode instance Λ = {k, -k}, ξ = 1.6, U(k,-k) = -4, whose gap
//! equation has the closed form `sqrt(ξ² + Δ²) = 2`, so Δ = 1.2.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use bcslab::analysis::{
    bcs_pair_amplitudes, pair_self_consistency, dense_eigenvalues, ebcs_formula, energy_summary, hprime_checks,
    run_verification, spectrum_formula, ssb_witness,
};
use bcslab::cli::config::RunConfig;
use bcslab::fock::{anticommutator_check, evolve_state, expectation, ladder_matrix, SparseOperator, StateVector};
use bcslab::gapsolve::{
    dk_weights, solve_gap, solve_new_gap, theta_from_delta, AngleTable, GapSolution, GapTable, SolverOptions,
};
use bcslab::hamiltonian::{build_gb, build_h, build_hm, OperatorBundle};
use bcslab::model::{explicit_modes, random_kernel, separable_kernel, Instance, Kernel, ModeTable, Physics};
use bcslab::states::{bcs_state, correction_state, normalized_psi, quasi_ops};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = bcslab::Result<(bool, String)>;

const SEED: u64 = 20_261_014;

fn tm_modes() -> ModeTable {
    explicit_modes(&[[1, 0, 0], [-1, 0, 0]], Some(&[1.6, 1.6]), 2.0 * PI, Physics::default()).unwrap()
}

fn tm() -> Instance {
    let k = Kernel::from_rows(&[vec![0.0, -4.0], vec![-4.0, 0.0]]).unwrap();
    Instance::new(tm_modes(), k).unwrap()
}

fn tm_angles() -> AngleTable {
    theta_from_delta(&tm_modes(), &GapTable(vec![1.2, 1.2]))
}

/// Modes {0, ±x} with `ξ = 0.5, 1.5, 1.5` and a seeded attractive kernel.
fn random_three() -> Instance {
    let physics = Physics { mu: -0.5, ..Physics::default() };
    let modes = explicit_modes(&[[0, 0, 0], [1, 0, 0], [-1, 0, 0]], None, 2.0 * PI, physics).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let kernel = random_kernel(&modes, 6.0, &mut rng);
    Instance::new(modes, kernel).unwrap()
}

fn tight() -> SolverOptions {
    SolverOptions { tol: 1e-13, ..SolverOptions::default() }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `e^{iαG}` built directly from particle counts.
fn phase_unitary(dim: usize, alpha: f64) -> SparseOperator {
    SparseOperator::from_triplets(
        dim,
        (0..dim).map(|s| (s, s, Complex64::from_polar(1.0, alpha * f64::from(s.count_ones())))),
    )
}

fn corrected_state(instance: &Instance, sol: &GapSolution) -> bcslab::Result<(StateVector, f64)> {
    let (modes, kernel) = (instance.modes(), instance.kernel());
    let reference = bcs_state(modes, &sol.theta)?;
    let quasi = quasi_ops(modes, &sol.theta)?;
    let corr = correction_state(modes, kernel, &sol.theta, &quasi, &reference)?;
    Ok((normalized_psi(&reference, &corr)?, corr.overlap))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for m in 1..=4 {
        worst = worst.max(anticommutator_check(m)?);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst == 0.0 && secs < 5.0, format!("M=1..4 max deviation {worst:e}, {secs:.3} s")))
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for instance in [tm(), random_three()] {
        let modes = instance.modes();
        let h = build_h(modes, instance.kernel())?;
        for alpha in [0.3, 1.0, PI] {
            let u = phase_unitary(modes.dim(), alpha);
            let u_inv = phase_unitary(modes.dim(), -alpha);
            for j in 0..modes.n_orbitals() {
                let c = ladder_matrix(j, modes.len())?;
                let rotated = u_inv.mul(&c).mul(&u);
                worst = worst.max(rotated.max_abs_diff(&c.scale(Complex64::from_polar(1.0, alpha))));
            }
            worst = worst.max(u_inv.mul(&h).mul(&u).max_abs_diff(&h));
        }
    }
    Ok((worst <= 1e-9, format!("M=2,3 max deviation {worst:e}")))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let sol = solve_gap(&tm_modes(), tm().kernel(), &tight())?;
    let err = sol.delta.values().iter().map(|d| (d - 1.2).abs()).fold(0.0, f64::max);
    let sub = separable_kernel(&tm_modes(), 2.0, |_| true);
    let trivial = solve_gap(&tm_modes(), &sub, &SolverOptions::default())?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        sol.converged && err <= 1e-10 && trivial.is_trivial() && secs < 1.0,
        format!("|Δ-1.2| = {err:e}, g=2 trivial: {}, {secs:.3} s", trivial.is_trivial()),
    ))
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    let mut check = |modes: &ModeTable, angles: &AngleTable| -> bcslab::Result<()> {
        let product = bcs_state(modes, angles)?;
        let expo = evolve_state(&build_gb(modes, angles)?, &StateVector::vacuum(modes.dim()), 1e-14)?;
        worst = worst.max(product.max_abs_diff(&expo));
        Ok(())
    };
    check(&tm_modes(), &tm_angles())?;
    let three = random_three();
    let modes = three.modes();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..20 {
        let draws: Vec<f64> = (0..modes.len()).map(|_| rng.gen_range(0.0..=FRAC_PI_2)).collect();
        let theta = (0..modes.len()).map(|i| draws[i.min(modes.pair(i))]).collect();
        check(modes, &AngleTable::from_angles(theta))?;
    }
    Ok((worst <= 1e-10, format!("TM + 20 random M=3 tables, max deviation {worst:e}")))
}

fn criterion_5() -> Outcome {
    let instance = tm();
    let bundle = OperatorBundle::build(instance.modes(), instance.kernel())?;
    let psi = bcs_state(instance.modes(), &tm_angles())?;
    let mut worst = 0.0f64;
    for k in 0..2 {
        let pair = expectation(&psi, &bundle.pair[k], &psi)?;
        let witness = ssb_witness(&psi, k, &bundle)?;
        worst = worst
            .max((pair - Complex64::new(0.3, 0.0)).norm())
            .max((pair.re - 0.5 * tm_angles().sin2[k]).abs())
            .max((witness - Complex64::new(-0.6, 0.0)).norm());
    }
    Ok((worst <= 1e-11, format!("(B_k) = 0.3, ([G,B_k]) = -0.6, max deviation {worst:e}")))
}

fn spectrum_deviation(modes: &ModeTable, delta: &GapTable, angles: &AngleTable) -> bcslab::Result<(f64, f64)> {
    let w = bcs_pair_amplitudes(angles);
    let e_bcs = ebcs_formula(modes, angles, &w);
    let eig = sorted(dense_eigenvalues(&build_hm(modes, delta, &w)?)?);
    let predicted = sorted(spectrum_formula(angles, e_bcs));
    Ok((max_diff(&eig, &predicted), eig[0]))
}

fn criterion_6() -> Outcome {
    let (tm_dev, ground) = spectrum_deviation(&tm_modes(), &GapTable(vec![1.2, 1.2]), &tm_angles())?;
    let three = random_three();
    let sol = solve_gap(three.modes(), three.kernel(), &tight())?;
    let (three_dev, _) = spectrum_deviation(three.modes(), &sol.delta, &sol.theta)?;
    let ground_dev = (ground + 0.08).abs();
    Ok((
        sol.converged && !sol.is_trivial() && tm_dev <= 1e-9 && three_dev <= 1e-9 && ground_dev <= 1e-9,
        format!("TM {tm_dev:e}, M=3 {three_dev:e}, ground {ground:.12} (|+0.08| = {ground_dev:e})"),
    ))
}

fn criterion_7() -> Outcome {
    let sol = solve_gap(tm().modes(), tm().kernel(), &tight())?;
    let e = energy_summary(&tm(), &sol)?;
    let cond = (e.condensation_formula - e.condensation_dense).abs();
    let cond_lit = (e.condensation_dense + 0.08).abs();
    let de = (e.delta_e_formula - e.delta_e_dense).abs();
    let de_lit = (e.delta_e_dense + 0.090384).abs();
    let strict = e.corrected_dense < e.bcs_dense && e.bcs_dense < e.fermi_dense;
    Ok((
        cond <= 1e-10 && cond_lit <= 1e-10 && de <= 1e-9 && de_lit <= 1e-6 && strict,
        format!(
            "condensation {:.12} (dev {cond:e}), ΔE {:.12} (dev {de:e}), strict ordering {strict}",
            e.condensation_dense, e.delta_e_dense
        ),
    ))
}

fn criterion_8() -> Outcome {
    let instance = tm();
    let (modes, kernel) = (instance.modes(), instance.kernel());
    let angles = tm_angles();
    let reference = bcs_state(modes, &angles)?;
    let quasi = quasi_ops(modes, &angles)?;
    let corr = correction_state(modes, kernel, &angles, &quasi, &reference)?;
    let orth = reference.inner(&corr.state()).norm();
    let hp = hprime_checks(modes, kernel, &angles, &quasi, &corr, &reference)?;
    let psi = normalized_psi(&reference, &corr)?;
    let hm = build_hm(modes, &GapTable(vec![1.2, 1.2]), &bcs_pair_amplitudes(&angles))?;
    let hm_psi = expectation(&psi, &hm, &psi)?.re;
    let phi_dev = (hp.phi_bcs + 0.1296).abs();
    let hm_dev = (hm_psi - 0.171065).abs();
    Ok((
        orth <= 1e-12 && hp.bcs_expectation.abs() <= 1e-12 && phi_dev <= 1e-10 && hm_dev <= 1e-6,
        format!(
            "(Ψ_BCS,Φ) {orth:e}, (Ψ_BCS,H'Ψ_BCS) {:e}, (Φ,H'Ψ_BCS) {:.12}, (Ψ,H_MΨ) {hm_psi:.9}",
            hp.bcs_expectation, hp.phi_bcs
        ),
    ))
}

fn self_consistency_deviation(instance: &Instance) -> bcslab::Result<(GapSolution, f64, f64)> {
    let sol = solve_new_gap(instance.modes(), instance.kernel(), &tight())?;
    let bundle = OperatorBundle::build(instance.modes(), instance.kernel())?;
    let (psi, overlap) = corrected_state(instance, &sol)?;
    let d = dk_weights(instance.modes(), instance.kernel(), &sol.delta);
    let overlap_dev = (overlap - d.dsum / 2.0).abs();
    Ok((sol.clone(), pair_self_consistency(instance.kernel(), &sol, &psi, &bundle)?, overlap_dev))
}

fn criterion_9() -> Outcome {
    let (tm_sol, tm_dev, tm_overlap) = self_consistency_deviation(&tm())?;
    let (three_sol, three_dev, three_overlap) = self_consistency_deviation(&random_three())?;
    let gap = tm_sol.delta.0[0];
    let mut zero_dev = 0.0f64;
    for instance in [tm(), random_three()] {
        let opts = SolverOptions { zero_d: true, ..tight() };
        let reduced = solve_new_gap(instance.modes(), instance.kernel(), &opts)?;
        let classic = solve_gap(instance.modes(), instance.kernel(), &tight())?;
        zero_dev = zero_dev.max(max_diff(reduced.delta.values(), classic.delta.values()));
    }
    let pass = tm_sol.converged
        && tm_sol.residual_inf <= 1e-10
        && gap > 0.0
        && gap < 1.2
        && three_sol.converged
        && !three_sol.is_trivial()
        && tm_overlap.max(three_overlap) <= 1e-10
        && tm_dev.max(three_dev) <= 1e-9
        && zero_dev <= 1e-9;
    Ok((
        pass,
        format!(
            "M=3 outcome {:?}, Δ̃ = {gap:.12}, residual {:e}, overlap dev {:e}, self-consistency TM {tm_dev:e} M=3 {three_dev:e}, D=0 vs classic {zero_dev:e}",
            three_sol.outcome,
            tm_sol.residual_inf,
            tm_overlap.max(three_overlap)
        ),
    ))
}

fn criterion_10() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ball5.json");
    let config = RunConfig::from_path(&path)?;
    let instance = config.instance()?;
    let start = Instant::now();
    let report = run_verification(&instance, &config.verify_options()?)?;
    let secs = start.elapsed().as_secs_f64();
    let ordering = report.check("ordering_invariance").and_then(|c| c.deviation).unwrap_or(f64::INFINITY);
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    Ok((
        instance.modes().len() == 5 && failed.is_empty() && secs < 60.0 && ordering <= 1e-10,
        format!("M=5 verify {secs:.2} s, ordering invariance {ordering:e}, failed checks {failed:?}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let mut all = true;
    for (i, run) in criteria.iter().enumerate() {
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        all &= pass;
        println!("criterion {}: {} {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
