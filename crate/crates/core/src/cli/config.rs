//! JSON run configuration.
//!
//! ```json
//! {
//!   "lattice": { "explicit": { "modes": [[1,0,0], [-1,0,0]], "xi": [1.6, 1.6] } },
//!   "physics": { "m": 0.5, "mu": 0.0, "hbar": 1.0 },
//!   "kernel": { "separable": { "g": 4.0 } },
//!   "solver": { "equation": "classic", "init": 1.0, "damping": 0.5, "tol": 1e-10, "max_iter": 10000 },
//!   "checks": "all",
//!   "seed": 0,
//!   "output": { "dir": "out", "formats": ["json", "csv"] }
//! }
//! ```
//!
//! `lattice` is either `{"box": {"L": .., "k_max": ..}}` or
//! `{"explicit": {"modes": [..], "xi": [..], "L": ..}}`; `kernel` is either
//! `{"dense": [[..], ..]}` or `{"separable": {"g": .., "shell_min": ..,
//! "shell_max": ..}}`. Dense kernel rows follow the order in which explicit
//! modes are listed, or the canonical order for a box lattice.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{CheckSelection, VerifyOptions};
use crate::error::{Error, Result};
use crate::gapsolve::{Equation, SolverOptions};
use crate::model::{build_lambda, explicit_modes, separable_kernel, Instance, Kernel, ModeTable, Physics, WaveVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeConfig {
    Box {
        #[serde(rename = "L")]
        length: f64,
        k_max: f64,
    },
    Explicit {
        modes: Vec<WaveVector>,
        #[serde(default)]
        xi: Option<Vec<f64>>,
        #[serde(rename = "L", default = "two_pi")]
        length: f64,
    },
}

fn two_pi() -> f64 {
    2.0 * PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Dense(Vec<Vec<f64>>),
    Separable {
        g: f64,
        #[serde(default)]
        shell_min: f64,
        #[serde(default)]
        shell_max: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub equation: Equation,
    pub init: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            equation: Equation::Classic,
            init: o.init,
            damping: o.damping,
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            init: self.init,
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
            zero_d: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChecksConfig {
    Keyword(String),
    List(Vec<String>),
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig::Keyword("all".into())
    }
}

impl ChecksConfig {
    pub fn selection(&self) -> Result<CheckSelection> {
        let sel = match self {
            ChecksConfig::Keyword(k) if k == "all" => CheckSelection::All,
            ChecksConfig::Keyword(k) => return Err(Error::Config(format!("checks must be \"all\" or a list, got \"{k}\""))),
            ChecksConfig::List(names) => CheckSelection::Only(names.clone()),
        };
        sel.validate()?;
        Ok(sel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn parse_list(text: &str) -> Result<Vec<Format>> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "json" => Ok(Format::Json),
                "csv" => Ok(Format::Csv),
                other => Err(Error::Config(format!("unknown output format '{other}'"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub physics: Physics,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.solver.tol > 0.0) {
            return Err(Error::Config("solver.tol must be positive".into()));
        }
        self.checks.selection()?;
        Ok(())
    }

    pub fn modes(&self) -> Result<ModeTable> {
        match &self.lattice {
            LatticeConfig::Box { length, k_max } => build_lambda(*length, *k_max, self.physics),
            LatticeConfig::Explicit { modes, xi, length } => {
                explicit_modes(modes, xi.as_deref(), *length, self.physics)
            }
        }
    }

    /// Mode table and kernel; every kernel constraint is checked here,
    /// before any operator is built.
    pub fn instance(&self) -> Result<Instance> {
        let modes = self.modes()?;
        let kernel = match &self.kernel {
            KernelConfig::Dense(rows) => {
                let listed = Kernel::from_rows(rows)?;
                if listed.size() != modes.len() {
                    return Err(Error::validation(format!(
                        "kernel is {0}x{0} but the lattice has {1} modes",
                        listed.size(),
                        modes.len()
                    )));
                }
                match &self.lattice {
                    LatticeConfig::Explicit { modes: ks, .. } => {
                        let idx: Vec<usize> = ks.iter().map(|k| modes.index_of(*k).expect("listed mode")).collect();
                        let mut k = Kernel::zeros(modes.len());
                        for (i, &a) in idx.iter().enumerate() {
                            for (j, &b) in idx.iter().enumerate() {
                                k.set(a, b, listed.get(i, j));
                            }
                        }
                        k
                    }
                    LatticeConfig::Box { .. } => listed,
                }
            }
            KernelConfig::Separable { g, shell_min, shell_max } => {
                let hi = shell_max.unwrap_or(f64::INFINITY);
                separable_kernel(&modes, *g, |k| *shell_min <= k && k <= hi)
            }
        };
        Instance::new(modes, kernel)
    }

    pub fn verify_options(&self) -> Result<VerifyOptions> {
        Ok(VerifyOptions {
            solver: self.solver.options(),
            checks: self.checks.selection()?,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TM: &str = r#"{
        "lattice": {"explicit": {"modes": [[1,0,0],[-1,0,0]], "xi": [1.6, 1.6]}},
        "kernel": {"dense": [[0, -4], [-4, 0]]}
    }"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_json(TM).unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.checks.selection().unwrap(), CheckSelection::All);
        assert_eq!(cfg.output.formats, vec![Format::Json, Format::Csv]);
        let inst = cfg.instance().unwrap();
        assert_eq!(inst.kernel().get(0, 1), -4.0);
    }

    #[test]
    fn dense_rows_follow_listing_order() {
        let text = r#"{
            "lattice": {"explicit": {"modes": [[1,0,0],[0,0,0],[-1,0,0]], "xi": [0.3, -0.5, 0.3]}},
            "kernel": {"dense": [[0, -2, -1], [-2, 0, -2], [-1, -2, 0]]}
        }"#;
        let inst = RunConfig::from_json(text).unwrap().instance().unwrap();
        let m = inst.modes();
        let (a, z) = (m.index_of([1, 0, 0]).unwrap(), m.index_of([0, 0, 0]).unwrap());
        let b = m.index_of([-1, 0, 0]).unwrap();
        assert_eq!(inst.kernel().get(a, z), -2.0);
        assert_eq!(inst.kernel().get(a, b), -1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_json("{}").is_err());
        let unknown = TM.replacen('{', r#"{"extra": 1,"#, 1);
        assert!(matches!(RunConfig::from_json(&unknown), Err(Error::Config(_))));
        let both = r#"{"lattice": {"box": {"L": 6.28, "k_max": 1}, "explicit": {"modes": []}},
                       "kernel": {"separable": {"g": 1}}}"#;
        assert!(RunConfig::from_json(both).is_err());
        let tol = TM.replacen('{', r#"{"solver": {"tol": 0},"#, 1);
        assert!(RunConfig::from_json(&tol).is_err());
        let checks = TM.replacen('{', r#"{"checks": "some","#, 1);
        assert!(RunConfig::from_json(&checks).is_err());
        let positive = TM.replace("-4", "4");
        let cfg = RunConfig::from_json(&positive).unwrap();
        assert!(matches!(cfg.instance(), Err(Error::Validation(_))));
    }

    #[test]
    fn separable_shell() {
        let text = r#"{
            "lattice": {"box": {"L": 6.2831853, "k_max": 1.0}},
            "kernel": {"separable": {"g": 1.5, "shell_min": 0.5}}
        }"#;
        let inst = RunConfig::from_json(text).unwrap().instance().unwrap();
        let m = inst.modes();
        let origin = m.index_of([0, 0, 0]).unwrap();
        assert!(inst.kernel().row(origin).iter().all(|&v| v == 0.0));
        assert_eq!(inst.kernel().get(0, 1), -1.5);
    }

    #[test]
    fn formats() {
        assert_eq!(Format::parse_list("json, csv").unwrap(), vec![Format::Json, Format::Csv]);
        assert!(Format::parse_list("xml").is_err());
    }
}
