//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed checks, 2 usage or configuration error,
//! 3 resource, convergence or I/O error.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{
    energy_summary, run_verification, spectrum_summary, EnergySummary, SpectrumSummary, VerificationReport,
};
use crate::error::{Error, Result};
use crate::gapsolve::{solve, Equation, GapSolution, Outcome};
use crate::model::{lambda_table, ModeTable, WaveVector};
use config::{Format, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "bcslab", version, about = "Exact Fock-space checks of BCS pairing theory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print Λ with ξ_k and the partner of each mode.
    Lattice {
        /// Box side length.
        #[arg(long = "L")]
        length: Option<f64>,
        /// Momentum cutoff.
        #[arg(long)]
        kmax: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve the classic gap equation.
    SolveGap(Common),
    /// Solve the corrected gap equation.
    SolveNewGap(Common),
    /// Compare the mean-field spectrum with its closed form.
    Spectrum(Common),
    /// Energies of the normal, BCS and corrected states.
    Energy(Common),
    /// Run the verification checks.
    Verify(Common),
    /// Everything above in one document.
    Report(Common),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EquationArg {
    Classic,
    New,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated output formats (json, csv).
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    equation: Option<EquationArg>,
    /// Seed for the randomized checks.
    #[arg(long)]
    seed: Option<u64>,
}

struct Settings {
    config: RunConfig,
    dir: Option<PathBuf>,
    formats: Vec<Format>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
        let mut config = RunConfig::from_path(path)?;
        self.apply(&mut config)?;
        Ok(Settings {
            dir: self.out.clone().or_else(|| config.output.dir.clone()),
            formats: match &self.format {
                Some(f) => Format::parse_list(f)?,
                None => config.output.formats.clone(),
            },
            config,
        })
    }

    fn apply(&self, config: &mut RunConfig) -> Result<()> {
        if let Some(t) = self.tol {
            config.solver.tol = t;
        }
        if let Some(n) = self.max_iter {
            config.solver.max_iter = n;
        }
        if let Some(e) = self.equation {
            config.solver.equation = match e {
                EquationArg::Classic => Equation::Classic,
                EquationArg::New => Equation::New,
            };
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        config.validate()
    }
}

/// Parse `argv` (program name first), run the command and return the exit
/// code. Tables go to stdout and diagnostics to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bcslab: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Lattice { length, kmax, common } => lattice(length, kmax, &common),
        Command::SolveGap(c) => solve_cmd(&c, Equation::Classic),
        Command::SolveNewGap(c) => solve_cmd(&c, Equation::New),
        Command::Spectrum(c) => spectrum_cmd(&c),
        Command::Energy(c) => energy_cmd(&c),
        Command::Verify(c) => verify_cmd(&c),
        Command::Report(c) => report_cmd(&c),
    }
}

fn announce(paths: Vec<PathBuf>) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn emit<T: Serialize>(s: &Settings, value: &T, stem: &str) -> Result<()> {
    if let Some(dir) = &s.dir {
        announce(output::emit_json(value, stem, dir, &s.formats)?);
    }
    Ok(())
}

/// One row of the Λ listing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeRow {
    pub index: usize,
    pub k: WaveVector,
    pub k_norm: f64,
    pub xi: f64,
    pub partner: usize,
}

pub fn lattice_rows(modes: &ModeTable) -> Vec<LatticeRow> {
    (0..modes.len())
        .map(|i| LatticeRow {
            index: i,
            k: modes.modes()[i],
            k_norm: modes.k_norm(i),
            xi: modes.xi()[i],
            partner: modes.pair(i),
        })
        .collect()
}

fn print_lattice(modes: &ModeTable) {
    println!("M = {}", modes.len());
    println!("{:>5} {:>14} {:>12} {:>14} {:>8}", "mode", "k", "|k|", "xi", "partner");
    for r in lattice_rows(modes) {
        let k = format!("({},{},{})", r.k[0], r.k[1], r.k[2]);
        println!("{:>5} {:>14} {:>12.6} {:>14.8} {:>8}", r.index, k, r.k_norm, r.xi, r.partner);
    }
}

fn lattice(length: Option<f64>, kmax: Option<f64>, common: &Common) -> Result<i32> {
    let (modes, settings) = match (length, kmax) {
        (Some(l), Some(k)) => {
            let settings = common.config.as_ref().map(|_| common.settings()).transpose()?;
            let physics = settings.as_ref().map(|s| s.config.physics).unwrap_or_default();
            (lambda_table(l, k, physics)?, settings)
        }
        (None, None) => {
            let s = common.settings()?;
            (s.config.modes()?, Some(s))
        }
        _ => return Err(Error::Config("--L and --kmax must be given together".into())),
    };
    print_lattice(&modes);
    if modes.len() > crate::fock::max_modes() {
        eprintln!(
            "note: M = {} is above the Fock-space cap of {} modes; set {} to raise it",
            modes.len(),
            crate::fock::max_modes(),
            crate::fock::DIM_CAP_ENV
        );
    }
    let dir = common.out.clone().or_else(|| settings.as_ref().and_then(|s| s.dir.clone()));
    if let Some(dir) = dir {
        let formats = match &common.format {
            Some(f) => Format::parse_list(f)?,
            None => settings.map(|s| s.formats).unwrap_or_else(|| vec![Format::Json]),
        };
        announce(output::emit_json(&lattice_rows(&modes), "lattice", &dir, &formats)?);
    }
    Ok(0)
}

fn outcome_label(sol: &GapSolution) -> &'static str {
    match sol.outcome {
        Outcome::Converged => "converged",
        Outcome::Trivial => "trivial solution",
        Outcome::NotConverged => "not converged",
    }
}

fn print_solution(modes: &ModeTable, sol: &GapSolution) {
    let name = match sol.equation {
        Equation::Classic => "classic",
        Equation::New => "new",
    };
    println!("equation: {name}");
    println!(
        "outcome: {} ({} iterations, residual {:.3e})",
        outcome_label(sol),
        sol.iterations,
        sol.residual_inf
    );
    if let (Some(d), Some(m)) = (sol.dsum, sol.max_correction) {
        println!("D = {d:.12e}, max 4D_k/(D+2) = {m:.12e}");
    }
    if sol.clamped {
        println!("note: the Δ >= 0 clamp was active");
    }
    if !sol.nonpositive_factor.is_empty() {
        println!("note: 1 - 4D_k/(D+2) <= 0 at modes {:?}", sol.nonpositive_factor);
    }
    if !sol.degenerate.is_empty() {
        println!("note: ξ_k = Δ_k = 0 at modes {:?}", sol.degenerate);
    }
    println!("{:>5} {:>14} {:>14} {:>14} {:>14}", "mode", "xi", "delta", "theta", "E");
    for k in 0..modes.len() {
        println!(
            "{:>5} {:>14.8} {:>14.10} {:>14.10} {:>14.10}",
            k,
            modes.xi()[k],
            sol.delta.0[k],
            sol.theta.theta[k],
            sol.theta.energy[k]
        );
    }
}

fn solved(s: &Settings, equation: Equation) -> Result<GapSolution> {
    let inst = s.config.instance()?;
    solve(inst.modes(), inst.kernel(), equation, &s.config.solver.options())
}

fn convergence_error(sol: &GapSolution) -> Error {
    Error::Convergence {
        what: "gap iteration".into(),
        iterations: sol.iterations,
    }
}

fn solve_cmd(c: &Common, equation: Equation) -> Result<i32> {
    let s = c.settings()?;
    let inst = s.config.instance()?;
    let sol = solve(inst.modes(), inst.kernel(), equation, &s.config.solver.options())?;
    print_solution(inst.modes(), &sol);
    let stem = match equation {
        Equation::Classic => "gap",
        Equation::New => "new_gap",
    };
    emit(&s, &sol, stem)?;
    if !sol.converged {
        return Err(convergence_error(&sol));
    }
    Ok(0)
}

fn converged_solution(s: &Settings) -> Result<GapSolution> {
    let sol = solved(s, s.config.solver.equation)?;
    if !sol.converged {
        return Err(convergence_error(&sol));
    }
    Ok(sol)
}

fn print_spectrum(sp: &SpectrumSummary) {
    println!("E_BCS = {:.12}", sp.e_bcs);
    println!("max |eigenvalue - predicted| = {:.3e}", sp.deviation);
    println!("{:>6} {:>20} {:>20}", "n", "eigenvalue", "predicted");
    for (n, (a, b)) in sp.eigenvalues.iter().zip(&sp.predicted).enumerate().take(16) {
        println!("{n:>6} {a:>20.12} {b:>20.12}");
    }
    if sp.eigenvalues.len() > 16 {
        println!("   ... {} more", sp.eigenvalues.len() - 16);
    }
}

fn spectrum_cmd(c: &Common) -> Result<i32> {
    let s = c.settings()?;
    let sol = converged_solution(&s)?;
    let sp = spectrum_summary(&s.config.instance()?, &sol)?;
    print_spectrum(&sp);
    emit(&s, &sp, "spectrum")?;
    Ok(0)
}

fn print_energy(e: &EnergySummary) {
    println!("{:<28} {:>20} {:>20}", "quantity", "closed form", "dense");
    let rows = [
        ("E_BCS / (Ψ_BCS,HΨ_BCS)", e.e_bcs_formula, e.bcs_dense),
        ("(Ψ_F,HΨ_F)", e.fermi_formula, e.fermi_dense),
        ("condensation energy", e.condensation_formula, e.condensation_dense),
        ("ΔE", e.delta_e_formula, e.delta_e_dense),
    ];
    for (name, f, d) in rows {
        println!("{name:<28} {f:>20.12} {d:>20.12}");
    }
    println!("{:<28} {:>20} {:>20.12}", "(Ψ,HΨ)", "", e.corrected_dense);
    println!("{:<28} {:>20.12}", "(Φ,Φ)", e.overlap);
}

fn energy_cmd(c: &Common) -> Result<i32> {
    let s = c.settings()?;
    let sol = converged_solution(&s)?;
    let e = energy_summary(&s.config.instance()?, &sol)?;
    print_energy(&e);
    emit(&s, &e, "energy")?;
    Ok(0)
}

fn print_report(report: &VerificationReport) {
    println!("{:<30} {:>12} {:>10} {:>8}", "check", "deviation", "tolerance", "status");
    for c in &report.checks {
        let dev = c.deviation.map(|d| format!("{d:.3e}")).unwrap_or_default();
        let status = match c.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "skip",
        };
        println!("{:<30} {:>12} {:>10.0e} {:>8}", c.name, dev, c.tolerance, status);
    }
    let failed = report.failures().count();
    let skipped = report.checks.iter().filter(|c| c.pass.is_none()).count();
    println!(
        "{} checks: {} passed, {failed} failed, {skipped} skipped",
        report.checks.len(),
        report.checks.len() - failed - skipped
    );
}

fn verification(s: &Settings) -> Result<VerificationReport> {
    run_verification(&s.config.instance()?, &s.config.verify_options()?)
}

fn verify_cmd(c: &Common) -> Result<i32> {
    let s = c.settings()?;
    let report = verification(&s)?;
    print_report(&report);
    if let Some(dir) = &s.dir {
        announce(output::emit_report(&report, dir, &s.formats)?);
    }
    Ok(if report.all_pass() { 0 } else { 1 })
}

#[derive(Debug, Serialize)]
struct ReportDocument {
    lattice: Vec<LatticeRow>,
    classic: GapSolution,
    new: GapSolution,
    spectrum: Option<SpectrumSummary>,
    energy: Option<EnergySummary>,
    verification: VerificationReport,
}

fn report_cmd(c: &Common) -> Result<i32> {
    let s = c.settings()?;
    let inst = s.config.instance()?;
    let opts = s.config.solver.options();
    let classic = solve(inst.modes(), inst.kernel(), Equation::Classic, &opts)?;
    let new = solve(inst.modes(), inst.kernel(), Equation::New, &opts)?;
    let chosen = match s.config.solver.equation {
        Equation::Classic => &classic,
        Equation::New => &new,
    };
    let spectrum = match spectrum_summary(&inst, chosen) {
        Ok(sp) => Some(sp),
        Err(Error::Resource(msg)) => {
            eprintln!("spectrum skipped: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let energy = chosen.converged.then(|| energy_summary(&inst, chosen)).transpose()?;
    let verification = verification(&s)?;

    print_lattice(inst.modes());
    println!();
    print_solution(inst.modes(), &classic);
    println!();
    print_solution(inst.modes(), &new);
    if let Some(sp) = &spectrum {
        println!();
        print_spectrum(sp);
    }
    if let Some(e) = &energy {
        println!();
        print_energy(e);
    }
    println!();
    print_report(&verification);

    let pass = verification.all_pass();
    let doc = ReportDocument {
        lattice: lattice_rows(inst.modes()),
        classic,
        new,
        spectrum,
        energy,
        verification,
    };
    if let Some(dir) = &s.dir {
        announce(output::emit_json(&doc, "full_report", dir, &s.formats)?);
        if s.formats.contains(&Format::Csv) {
            announce(output::emit_report(&doc.verification, dir, &[Format::Csv])?);
        }
    }
    Ok(if pass { 0 } else { 1 })
}
