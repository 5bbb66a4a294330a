//! Wave-vector set Λ, dispersion ξ_k, the pairing involution k ↔ −k and
//! the pair-scattering kernel U.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock;

/// Integer triple `(n1, n2, n3)`; the physical wave vector is `(2π/L) n`.
pub type WaveVector = [i32; 3];

/// Relative slack on the `|k| <= K_max` boundary so that a box length typed
/// to a few digits of 2π still captures the shell at `|k| = K_max`.
pub const BOUNDARY_RTOL: f64 = 1e-6;

/// Dispersion parameters: `xi_k = hbar^2 |k|^2 / (2 m) - mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub m: f64,
    pub mu: f64,
    pub hbar: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            m: 0.5,
            mu: 0.0,
            hbar: 1.0,
        }
    }
}

impl Physics {
    pub fn xi(&self, k_sqr: f64) -> f64 {
        self.hbar * self.hbar * k_sqr / (2.0 * self.m) - self.mu
    }
}

/// The ordered mode set Λ with dispersion and pairing map.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTable {
    modes: Vec<WaveVector>,
    xi: Vec<f64>,
    pair: Vec<usize>,
    length: f64,
    k_max: Option<f64>,
    physics: Physics,
}

fn negate(k: WaveVector) -> WaveVector {
    [-k[0], -k[1], -k[2]]
}

fn norm_sqr(k: WaveVector) -> i64 {
    k.iter().map(|&n| i64::from(n) * i64::from(n)).sum()
}

/// All integer triples with `(2π/L)|n| <= K_max`, in lexicographic order.
/// No dimension cap is applied.
pub fn lambda_points(length: f64, k_max: f64) -> Result<Vec<WaveVector>> {
    if !(length > 0.0 && k_max > 0.0) {
        return Err(Error::argument("L and K_max must be positive"));
    }
    let radius = k_max * length / (2.0 * PI) * (1.0 + BOUNDARY_RTOL);
    let bound = radius.floor() as i32;
    let r2 = radius * radius;
    let mut points = Vec::new();
    for n1 in -bound..=bound {
        for n2 in -bound..=bound {
            for n3 in -bound..=bound {
                let k = [n1, n2, n3];
                if norm_sqr(k) as f64 <= r2 {
                    points.push(k);
                }
            }
        }
    }
    Ok(points)
}

/// Λ for a periodic box of side `length` and momentum cutoff `k_max`.
pub fn build_lambda(length: f64, k_max: f64, physics: Physics) -> Result<ModeTable> {
    let table = lambda_table(length, k_max, physics)?;
    fock::fock_dim(table.len()).map_err(|_| {
        Error::Resource(format!(
            "L = {length}, K_max = {k_max} gives M = {} modes, above the cap of {}",
            table.len(),
            fock::max_modes()
        ))
    })?;
    Ok(table)
}

/// As [`build_lambda`] without the mode cap; for listing Λ only.
pub fn lambda_table(length: f64, k_max: f64, physics: Physics) -> Result<ModeTable> {
    let mut table = ModeTable::assemble(lambda_points(length, k_max)?, None, length, physics)?;
    table.k_max = Some(k_max);
    Ok(table)
}

/// Λ from a hand-picked list of integer triples, optionally with ξ values
/// overriding the dispersion (listed in the same order as `ks`).
pub fn explicit_modes(ks: &[WaveVector], xi_override: Option<&[f64]>, length: f64, physics: Physics) -> Result<ModeTable> {
    if ks.is_empty() {
        return Err(Error::validation("mode list is empty"));
    }
    if !(length > 0.0) {
        return Err(Error::argument("L must be positive"));
    }
    if let Some(xi) = xi_override {
        if xi.len() != ks.len() {
            return Err(Error::validation(format!(
                "{} xi overrides given for {} modes",
                xi.len(),
                ks.len()
            )));
        }
    }
    fock::fock_dim(ks.len())?;
    ModeTable::assemble(ks.to_vec(), xi_override.map(<[f64]>::to_vec), length, physics)
}

impl ModeTable {
    fn assemble(ks: Vec<WaveVector>, xi_override: Option<Vec<f64>>, length: f64, physics: Physics) -> Result<Self> {
        let mut order: Vec<usize> = (0..ks.len()).collect();
        order.sort_by_key(|&i| ks[i]);
        let modes: Vec<WaveVector> = order.iter().map(|&i| ks[i]).collect();
        if let Some(w) = modes.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(format!("duplicate wave vector {:?}", w[0])));
        }
        let index: HashMap<WaveVector, usize> = modes.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let pair = modes
            .iter()
            .map(|&k| {
                index.get(&negate(k)).copied().ok_or_else(|| {
                    Error::validation(format!("mode set is not closed under negation: {k:?} has no partner"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scale = 2.0 * PI / length;
        let xi: Vec<f64> = match xi_override {
            Some(values) => order.iter().map(|&i| values[i]).collect(),
            None => modes
                .iter()
                .map(|&k| physics.xi(scale * scale * norm_sqr(k) as f64))
                .collect(),
        };
        for (i, &p) in pair.iter().enumerate() {
            if xi[i] != xi[p] {
                return Err(Error::validation(format!(
                    "xi override breaks xi(-k) = xi(k) at k = {:?}: {} vs {}",
                    modes[i], xi[i], xi[p]
                )));
            }
        }
        Ok(ModeTable {
            modes,
            xi,
            pair,
            length,
            k_max: None,
            physics,
        })
    }

    /// Copy with modes listed in a different order: new mode `n` is old mode
    /// `perm[n]`.
    pub fn reordered(&self, perm: &[usize]) -> Result<ModeTable> {
        check_permutation(perm, self.len())?;
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        Ok(ModeTable {
            modes: perm.iter().map(|&o| self.modes[o]).collect(),
            xi: perm.iter().map(|&o| self.xi[o]).collect(),
            pair: perm.iter().map(|&o| inverse[self.pair[o]]).collect(),
            length: self.length,
            k_max: self.k_max,
            physics: self.physics,
        })
    }

    /// Number of modes `M`.
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn n_orbitals(&self) -> usize {
        2 * self.len()
    }

    /// Fock-space dimension `2^(2M)`.
    pub fn dim(&self) -> usize {
        1 << self.n_orbitals()
    }

    pub fn modes(&self) -> &[WaveVector] {
        &self.modes
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Index of `-k` for the mode at index `i`.
    pub fn pair(&self, i: usize) -> usize {
        self.pair[i]
    }

    pub fn pairs(&self) -> &[usize] {
        &self.pair
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn k_max(&self) -> Option<f64> {
        self.k_max
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    pub fn index_of(&self, k: WaveVector) -> Option<usize> {
        self.modes.iter().position(|&m| m == k)
    }

    /// Physical wave vector `(2π/L) n`.
    pub fn wave_vector(&self, i: usize) -> [f64; 3] {
        let scale = 2.0 * PI / self.length;
        self.modes[i].map(|n| scale * f64::from(n))
    }

    pub fn k_norm(&self, i: usize) -> f64 {
        2.0 * PI / self.length * (norm_sqr(self.modes[i]) as f64).sqrt()
    }

    /// The `{k, -k}` orbits, each listed once, smallest index first.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        (0..self.len())
            .filter(|&i| i <= self.pair[i])
            .map(|i| if i == self.pair[i] { vec![i] } else { vec![i, self.pair[i]] })
            .collect()
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n || !perm.iter().all(|&p| p < n && !std::mem::replace(&mut seen[p], true)) {
        return Err(Error::argument(format!("not a permutation of 0..{n}")));
    }
    Ok(())
}

/// Real `M x M` pair-scattering matrix `U[k][k']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    size: usize,
    values: Vec<f64>,
}

impl Kernel {
    pub fn zeros(size: usize) -> Self {
        Kernel {
            size,
            values: vec![0.0; size * size],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != size) {
            return Err(Error::validation(format!(
                "kernel is not square: row of length {} in a {size}-row matrix",
                bad.len()
            )));
        }
        Ok(Kernel {
            size,
            values: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.size + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_abs_sum(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v.abs()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Same convention as [`ModeTable::reordered`].
    pub fn reordered(&self, perm: &[usize]) -> Result<Kernel> {
        check_permutation(perm, self.size)?;
        let mut out = Kernel::zeros(self.size);
        for (a, &i) in perm.iter().enumerate() {
            for (b, &j) in perm.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        Ok(out)
    }
}

/// A broken kernel constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelViolation {
    Shape { expected: usize, found: usize },
    PositiveEntry { row: usize, col: usize, value: f64 },
    Asymmetric { row: usize, col: usize },
    ParityBroken { row: usize, col: usize },
    NonzeroDiagonal { mode: usize, value: f64 },
}

impl fmt::Display for KernelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelViolation::Shape { expected, found } => {
                write!(f, "kernel is {found}x{found} but there are {expected} modes")
            }
            KernelViolation::PositiveEntry { row, col, value } => {
                write!(f, "positive entry U[{row}][{col}] = {value}")
            }
            KernelViolation::Asymmetric { row, col } => write!(f, "asymmetric pair U[{row}][{col}] != U[{col}][{row}]"),
            KernelViolation::ParityBroken { row, col } => write!(f, "U(-k,-k') != U(k,k') at U[{row}][{col}]"),
            KernelViolation::NonzeroDiagonal { mode, value } => write!(f, "nonzero diagonal at k = mode {mode} ({value})"),
        }
    }
}

/// Every violated constraint among `U <= 0`, `U(k',k) = U(k,k')`,
/// `U(-k,-k') = U(k,k')` and `U(k,k) = 0`, compared exactly.
pub fn validate_kernel(kernel: &Kernel, modes: &ModeTable) -> Vec<KernelViolation> {
    let m = modes.len();
    if kernel.size() != m {
        return vec![KernelViolation::Shape {
            expected: m,
            found: kernel.size(),
        }];
    }
    let mut out = Vec::new();
    for i in 0..m {
        if kernel.get(i, i) != 0.0 {
            out.push(KernelViolation::NonzeroDiagonal {
                mode: i,
                value: kernel.get(i, i),
            });
        }
        for j in 0..m {
            let v = kernel.get(i, j);
            // NaN fails every comparison, so flag it with the positive entries
            if !(v <= 0.0) {
                out.push(KernelViolation::PositiveEntry { row: i, col: j, value: v });
            }
            if i < j && v != kernel.get(j, i) {
                out.push(KernelViolation::Asymmetric { row: i, col: j });
            }
            if v != kernel.get(modes.pair(i), modes.pair(j)) && (i, j) < (modes.pair(i), modes.pair(j)) {
                out.push(KernelViolation::ParityBroken { row: i, col: j });
            }
        }
    }
    out
}

/// Validation as a `Result`, listing every violation in the message.
pub fn ensure_valid_kernel(kernel: &Kernel, modes: &ModeTable) -> Result<()> {
    let violations = validate_kernel(kernel, modes);
    if violations.is_empty() {
        return Ok(());
    }
    let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
    Err(Error::Validation(format!("kernel: {}", msg.join("; "))))
}

/// Attractive separable kernel `U(k,k') = -g w_k w_k'` for `k != k'`, with
/// `w_k = 1` when `in_shell(|k|)` holds and 0 otherwise.
pub fn separable_kernel(modes: &ModeTable, g: f64, in_shell: impl Fn(f64) -> bool) -> Kernel {
    let m = modes.len();
    let weight: Vec<bool> = (0..m).map(|i| in_shell(modes.k_norm(i))).collect();
    let mut kernel = Kernel::zeros(m);
    if g == 0.0 {
        return kernel;
    }
    for i in 0..m {
        for j in 0..m {
            if i != j && weight[i] && weight[j] {
                kernel.set(i, j, -g);
            }
        }
    }
    kernel
}

/// Random valid kernel with entries drawn uniformly from `[-strength, 0)`,
/// shared across each class `{(k,k'), (k',k), (-k,-k'), (-k',-k)}`.
pub fn random_kernel(modes: &ModeTable, strength: f64, rng: &mut impl Rng) -> Kernel {
    let m = modes.len();
    let mut kernel = Kernel::zeros(m);
    let mut done = vec![false; m * m];
    for i in 0..m {
        for j in 0..m {
            if i == j || done[i * m + j] {
                continue;
            }
            let v = -strength * (1.0 - rng.gen::<f64>());
            let (pi, pj) = (modes.pair(i), modes.pair(j));
            for (a, b) in [(i, j), (j, i), (pi, pj), (pj, pi)] {
                kernel.set(a, b, v);
                done[a * m + b] = true;
            }
        }
    }
    kernel
}

/// A mode table together with a kernel that has passed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    modes: ModeTable,
    kernel: Kernel,
}

impl Instance {
    pub fn new(modes: ModeTable, kernel: Kernel) -> Result<Self> {
        ensure_valid_kernel(&kernel, &modes)?;
        Ok(Instance { modes, kernel })
    }

    pub fn modes(&self) -> &ModeTable {
        &self.modes
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// The same instance with modes listed in the order `perm`.
    pub fn reordered(&self, perm: &[usize]) -> Result<Self> {
        Instance::new(self.modes.reordered(perm)?, self.kernel.reordered(perm)?)
    }
}
