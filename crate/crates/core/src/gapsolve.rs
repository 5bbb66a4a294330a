//! Damped self-consistent iteration for the classic gap equation
//!
//! ```text
//! Δ_k = -1/2 Σ_k' U(k,k') Δ_k' / E_k',        E_k = sqrt(ξ_k² + Δ_k²)
//! ```
//!
//! and for the corrected equation, in which each summand carries the factor
//! `1 - 4 D_k' / (D + 2)` with
//!
//! ```text
//! D_k' = 1/4 Σ_p U(k',p)² / (E_k' + E_p)² · (1 - ξ_k' ξ_p / (E_k' E_p))²,   D = Σ_k' D_k'.
//! ```

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Kernel, ModeTable};

/// `‖Δ‖∞` below which an iterate counts as collapsed onto `Δ ≡ 0`.
pub const TRIVIAL_THRESHOLD: f64 = 1e-13;
/// Consecutive collapsed iterates needed to declare the trivial solution.
pub const TRIVIAL_RUN: usize = 10;
/// A nontrivial iterate is accepted only if its residual is also this small
/// relative to `‖Δ‖∞`; a slowly collapsing iterate can reach an absolute
/// residual of `tol` long before it reaches zero.
pub const RELATIVE_RESIDUAL_GUARD: f64 = 1e-6;
/// Stand-in for a vanishing quasiparticle energy inside `D_k`.
pub const ENERGY_GUARD: f64 = f64::EPSILON;

/// Gap function Δ_k, one entry per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GapTable(pub Vec<f64>);

impl GapTable {
    pub fn zeros(m: usize) -> Self {
        GapTable(vec![0.0; m])
    }

    pub fn constant(m: usize, value: f64) -> Self {
        GapTable(vec![value; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `Δ_k >= 0` and `Δ_{-k} = Δ_k`, exactly.
    pub fn validate(&self, modes: &ModeTable) -> Result<()> {
        if self.len() != modes.len() {
            return Err(Error::validation(format!(
                "gap table has {} entries for {} modes",
                self.len(),
                modes.len()
            )));
        }
        for (i, &d) in self.0.iter().enumerate() {
            if !(d >= 0.0) {
                return Err(Error::validation(format!("negative gap {d} at mode {i}")));
            }
            if d != self.0[modes.pair(i)] {
                return Err(Error::validation(format!("gap differs between mode {i} and its partner")));
            }
        }
        Ok(())
    }
}

/// Bogoliubov angles with cached trigonometric values and quasiparticle
/// energies, derived from a gap table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleTable {
    pub theta: Vec<f64>,
    /// `S_k = sin θ_k`
    pub sin: Vec<f64>,
    /// `C_k = cos θ_k`
    pub cos: Vec<f64>,
    /// `sin 2θ_k`
    pub sin2: Vec<f64>,
    /// `cos 2θ_k`
    pub cos2: Vec<f64>,
    /// `E_k = sqrt(ξ_k² + Δ_k²)`
    pub energy: Vec<f64>,
    pub delta: Vec<f64>,
}

impl AngleTable {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Angles not derived from a gap table; `energy` and `delta` are zero.
    pub fn from_angles(theta: Vec<f64>) -> Self {
        let m = theta.len();
        AngleTable {
            sin: theta.iter().map(|t| t.sin()).collect(),
            cos: theta.iter().map(|t| t.cos()).collect(),
            sin2: theta.iter().map(|t| (2.0 * t).sin()).collect(),
            cos2: theta.iter().map(|t| (2.0 * t).cos()).collect(),
            energy: vec![0.0; m],
            delta: vec![0.0; m],
            theta,
        }
    }

    /// `C_k S_k = sin(2θ_k) / 2`, the pair amplitude of the product state.
    pub fn pair_amplitude(&self, k: usize) -> f64 {
        self.cos[k] * self.sin[k]
    }

    /// `θ_k ∈ [0, π/2]` and `θ_{-k} = θ_k`.
    pub fn validate(&self, modes: &ModeTable) -> Result<()> {
        if self.len() != modes.len() {
            return Err(Error::validation("angle table size differs from mode count"));
        }
        for (i, &t) in self.theta.iter().enumerate() {
            if !(0.0..=FRAC_PI_2).contains(&t) {
                return Err(Error::validation(format!("theta {t} at mode {i} outside [0, pi/2]")));
            }
            if t != self.theta[modes.pair(i)] {
                return Err(Error::validation(format!("theta differs between mode {i} and its partner")));
            }
        }
        Ok(())
    }
}

/// `θ_k = atan2(Δ_k, ξ_k) / 2`. For `Δ_k = 0` the angle is 0 when
/// `ξ_k > 0` and π/2 when `ξ_k <= 0`, so a vanishing gap reproduces the
/// filled Fermi sea.
pub fn theta_from_delta(modes: &ModeTable, delta: &GapTable) -> AngleTable {
    let m = modes.len();
    let mut t = AngleTable {
        theta: Vec::with_capacity(m),
        sin: Vec::with_capacity(m),
        cos: Vec::with_capacity(m),
        sin2: Vec::with_capacity(m),
        cos2: Vec::with_capacity(m),
        energy: Vec::with_capacity(m),
        delta: delta.0.clone(),
    };
    for (&xi, &d) in modes.xi().iter().zip(delta.values()) {
        let e = xi.hypot(d);
        let (theta, s, c, s2, c2) = if d == 0.0 {
            if xi > 0.0 {
                (0.0, 0.0, 1.0, 0.0, 1.0)
            } else {
                (FRAC_PI_2, 1.0, 0.0, 0.0, -1.0)
            }
        } else {
            let theta = 0.5 * d.atan2(xi);
            (theta, theta.sin(), theta.cos(), d / e, xi / e)
        };
        t.theta.push(theta);
        t.sin.push(s);
        t.cos.push(c);
        t.sin2.push(s2);
        t.cos2.push(c2);
        t.energy.push(e);
    }
    t
}

fn energies(modes: &ModeTable, delta: &[f64]) -> Vec<f64> {
    modes.xi().iter().zip(delta).map(|(x, d)| x.hypot(*d)).collect()
}

// Δ/E with the 0/0 case (ξ = Δ = 0) defined as 0.
fn gap_ratio(d: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        d / e
    }
}

/// `-1/2 Σ_k' U(k,k') w_k' Δ_k' / E_k'` for per-mode weights `w`.
fn weighted_rhs(kernel: &Kernel, delta: &[f64], energy: &[f64], weight: &[f64]) -> Vec<f64> {
    (0..delta.len())
        .map(|k| {
            -0.5 * (0..delta.len())
                .map(|kp| kernel.get(k, kp) * gap_ratio(delta[kp], energy[kp]) * weight[kp])
                .sum::<f64>()
        })
        .collect()
}

/// `r_k = Δ_k + 1/2 Σ_k' U(k,k') Δ_k' / E_k'`; zero at a solution.
pub fn gap_residual(modes: &ModeTable, kernel: &Kernel, delta: &GapTable) -> Vec<f64> {
    let e = energies(modes, delta.values());
    let ones = vec![1.0; delta.len()];
    let rhs = weighted_rhs(kernel, delta.values(), &e, &ones);
    delta.values().iter().zip(rhs).map(|(d, r)| d - r).collect()
}

/// `D_k` weights of the corrected gap equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DWeights {
    pub dk: Vec<f64>,
    pub dsum: f64,
    /// Modes with `ξ_k = Δ_k = 0`, where [`ENERGY_GUARD`] replaced `E_k`.
    pub degenerate: Vec<usize>,
}

impl DWeights {
    /// `1 - 4 D_k / (D + 2)`.
    pub fn factors(&self) -> Vec<f64> {
        self.dk.iter().map(|d| 1.0 - 4.0 * d / (self.dsum + 2.0)).collect()
    }

    /// `max_k 4 D_k / (D + 2)`.
    pub fn max_correction(&self) -> f64 {
        self.dk.iter().map(|d| 4.0 * d / (self.dsum + 2.0)).fold(0.0, f64::max)
    }
}

/// `D_k` and `D = Σ D_k` at the gap `delta`.
pub fn dk_weights(modes: &ModeTable, kernel: &Kernel, delta: &GapTable) -> DWeights {
    let m = modes.len();
    let xi = modes.xi();
    let raw = energies(modes, delta.values());
    let degenerate: Vec<usize> = (0..m).filter(|&k| raw[k] == 0.0).collect();
    let e: Vec<f64> = raw.iter().map(|&v| if v == 0.0 { ENERGY_GUARD } else { v }).collect();
    let dk: Vec<f64> = (0..m)
        .map(|k| {
            0.25 * (0..m)
                .map(|p| {
                    let u = kernel.get(k, p);
                    if u == 0.0 {
                        return 0.0;
                    }
                    let mix = 1.0 - xi[k] * xi[p] / (e[k] * e[p]);
                    u * u / ((e[k] + e[p]) * (e[k] + e[p])) * mix * mix
                })
                .sum::<f64>()
        })
        .collect();
    DWeights {
        dsum: dk.iter().sum(),
        dk,
        degenerate,
    }
}

/// Residual of the corrected gap equation. With `zero_d` set, `D_k` are
/// taken as 0 and this is [`gap_residual`].
pub fn new_gap_residual(modes: &ModeTable, kernel: &Kernel, delta: &GapTable, zero_d: bool) -> Vec<f64> {
    let e = energies(modes, delta.values());
    let factors = if zero_d {
        vec![1.0; delta.len()]
    } else {
        dk_weights(modes, kernel, delta).factors()
    };
    let rhs = weighted_rhs(kernel, delta.values(), &e, &factors);
    delta.values().iter().zip(rhs).map(|(d, r)| d - r).collect()
}

/// Which self-consistency condition to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    #[default]
    Classic,
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Starting gap on every mode that couples to the kernel.
    pub init: f64,
    /// Mixing weight λ in `Δ ← (1-λ) Δ + λ F(Δ)`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Drop the `D_k` correction (new equation only).
    #[serde(skip)]
    pub zero_d: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            init: 1.0,
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            zero_d: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.init > 0.0) {
            return Err(Error::argument("solver init must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::argument("solver damping must lie in (0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::argument("solver tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// A nontrivial solution within tolerance.
    Converged,
    /// The iteration collapsed onto `Δ ≡ 0`.
    Trivial,
    /// `max_iter` reached; the best iterate is returned.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSolution {
    pub equation: Equation,
    pub delta: GapTable,
    pub theta: AngleTable,
    pub residual_inf: f64,
    pub iterations: usize,
    pub converged: bool,
    pub outcome: Outcome,
    /// Whether the `Δ >= 0` clamp ever changed an iterate.
    pub clamped: bool,
    pub dk: Option<Vec<f64>>,
    pub dsum: Option<f64>,
    /// `max_k 4 D_k / (D + 2)` at the returned gap.
    pub max_correction: Option<f64>,
    /// Modes whose factor `1 - 4 D_k / (D + 2)` is not positive.
    pub nonpositive_factor: Vec<usize>,
    /// Modes with `ξ_k = Δ_k = 0` at the returned gap.
    pub degenerate: Vec<usize>,
}

impl GapSolution {
    pub fn is_trivial(&self) -> bool {
        self.outcome == Outcome::Trivial
    }
}

fn symmetrize(modes: &ModeTable, delta: &mut [f64]) {
    for orbit in modes.orbits() {
        if let [a, b] = orbit[..] {
            let avg = 0.5 * (delta[a] + delta[b]);
            delta[a] = avg;
            delta[b] = avg;
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn check_inputs(modes: &ModeTable, kernel: &Kernel, opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    crate::model::ensure_valid_kernel(kernel, modes)
}

fn iterate(
    modes: &ModeTable,
    kernel: &Kernel,
    opts: &SolverOptions,
    equation: Equation,
    factors: impl Fn(&[f64]) -> Vec<f64>,
) -> GapSolution {
    let m = modes.len();
    let residual = |d: &[f64]| {
        let e = energies(modes, d);
        let rhs = weighted_rhs(kernel, d, &e, &factors(d));
        inf_norm(&d.iter().zip(rhs).map(|(a, b)| a - b).collect::<Vec<_>>())
    };

    let mut delta: Vec<f64> = (0..m)
        .map(|k| if kernel.row_abs_sum(k) > 0.0 { opts.init } else { 0.0 })
        .collect();
    let mut clamped = false;
    let mut small_run = 0;
    let mut best = (f64::INFINITY, delta.clone());
    let mut outcome = Outcome::NotConverged;
    let mut iterations = 0;

    if delta.iter().all(|&d| d == 0.0) {
        outcome = Outcome::Trivial;
        best = (residual(&delta), delta.clone());
    } else {
        while iterations < opts.max_iter {
            iterations += 1;
            let e = energies(modes, &delta);
            let target = weighted_rhs(kernel, &delta, &e, &factors(&delta));
            for (d, t) in delta.iter_mut().zip(target) {
                let t = if t < 0.0 {
                    clamped = true;
                    0.0
                } else {
                    t
                };
                *d = (1.0 - opts.damping) * *d + opts.damping * t;
            }
            symmetrize(modes, &mut delta);

            let res = residual(&delta);
            let size = inf_norm(&delta);
            if res < best.0 {
                best = (res, delta.clone());
            }
            if size < TRIVIAL_THRESHOLD {
                small_run += 1;
                if small_run >= TRIVIAL_RUN {
                    outcome = Outcome::Trivial;
                    best = (res, delta.clone());
                    break;
                }
            } else {
                small_run = 0;
                if res <= opts.tol && res <= RELATIVE_RESIDUAL_GUARD * size {
                    outcome = Outcome::Converged;
                    best = (res, delta.clone());
                    break;
                }
            }
        }
    }

    let (residual_inf, delta) = best;
    let delta = GapTable(delta);
    let theta = theta_from_delta(modes, &delta);
    let degenerate = (0..m).filter(|&k| theta.energy[k] == 0.0).collect();
    GapSolution {
        equation,
        theta,
        residual_inf,
        iterations,
        converged: outcome != Outcome::NotConverged && residual_inf <= opts.tol,
        outcome,
        clamped,
        dk: None,
        dsum: None,
        max_correction: None,
        nonpositive_factor: Vec::new(),
        degenerate,
        delta,
    }
}

/// Solve the classic gap equation.
pub fn solve_gap(modes: &ModeTable, kernel: &Kernel, opts: &SolverOptions) -> Result<GapSolution> {
    check_inputs(modes, kernel, opts)?;
    let ones = vec![1.0; modes.len()];
    Ok(iterate(modes, kernel, opts, Equation::Classic, |_| ones.clone()))
}

/// Solve the corrected gap equation, recomputing `D_k` and `D` from every
/// iterate.
pub fn solve_new_gap(modes: &ModeTable, kernel: &Kernel, opts: &SolverOptions) -> Result<GapSolution> {
    check_inputs(modes, kernel, opts)?;
    let m = modes.len();
    let mut sol = iterate(modes, kernel, opts, Equation::New, |d| {
        if opts.zero_d {
            vec![1.0; m]
        } else {
            dk_weights(modes, kernel, &GapTable(d.to_vec())).factors()
        }
    });
    let w = if opts.zero_d {
        DWeights {
            dk: vec![0.0; m],
            dsum: 0.0,
            degenerate: Vec::new(),
        }
    } else {
        dk_weights(modes, kernel, &sol.delta)
    };
    sol.nonpositive_factor = w
        .factors()
        .iter()
        .enumerate()
        .filter(|(_, &f)| f <= 0.0)
        .map(|(k, _)| k)
        .collect();
    sol.max_correction = Some(w.max_correction());
    sol.dk = Some(w.dk);
    sol.dsum = Some(w.dsum);
    Ok(sol)
}

/// Dispatch on [`Equation`].
pub fn solve(modes: &ModeTable, kernel: &Kernel, equation: Equation, opts: &SolverOptions) -> Result<GapSolution> {
    match equation {
        Equation::Classic => solve_gap(modes, kernel, opts),
        Equation::New => solve_new_gap(modes, kernel, opts),
    }
}
