//! Command-line front end: Hardy states, optimal probabilities, the four
//! noisy bounds, ε scans, and self-test reports.
//!
//! Exit codes: 0 success, 1 self-test ran but did not certify, 2 invalid
//! input, 3 solver failure or nonconvergence, 4 self-test hypothesis unmet.

pub mod error;
pub mod files;
pub mod scan;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hardy_core::behavior::{hardy_statistics, joint_distribution, measurements_from_pairs, QuantumState, Scenario};
use hardy_core::hardystate::{
    hardy_state, is_genuinely_entangled, pmax, success_prob_closed, MeasurementPair, MAX_PARTIES,
};
use hardy_core::npa::npa_solve;
use hardy_core::polytope::{local_max, nosignaling_max, BoundQuery, LPSolution};
use hardy_core::selftest::{canonical_instance, selftest_report_with, ObservablePair, SelfTestMode, SelfTestOptions};
use hardy_core::variational::{lower_bound_with, VariationalOptions};
use serde_json::json;

use error::{CliError, CliResult};
use files::{read_observables_file, read_state_file, state_amplitudes, PairSpec, StateReport, StateSpecFile, SCHEMA};
use scan::{run_scan, threads_from_env, ScanConfig};

/// Largest ε accepted by `bounds`.
pub const MAX_BOUNDS_EPSILON: f64 = 0.3;

#[derive(Debug, Parser)]
#[command(
    name = "hardy",
    version,
    about = "Hardy nonlocality: states, optimal probabilities and noisy bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the Hardy state for given measurements and evaluate it.
    State(StateArgs),
    /// Print the optimal Hardy probability for n parties.
    Pmax(PmaxArgs),
    /// Bound the noisy tripartite (or bipartite) Hardy probability.
    Bounds(BoundsArgs),
    /// Compute every bound on a grid of noise levels and write CSV.
    Scan(ScanArgs),
    /// Check a state and observables against the self-testing statement.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct StateArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// `|α|²` for every party; defaults to the optimal value.
    #[arg(long)]
    pub alpha_sq: Option<f64>,
    /// State file with per-party measurement pairs (overrides --n/--alpha-sq).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PmaxArgs {
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Local,
    Ns,
    Npa,
    Variational,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub level: usize,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// SDP tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    #[arg(long, default_value_t = 0.25)]
    pub to: f64,
    /// Grid points, ends included.
    #[arg(long, default_value_t = 26)]
    pub steps: usize,
    #[arg(long, default_value_t = 3)]
    pub level: usize,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// State file with explicit amplitudes, or with pairs only.
    #[arg(long)]
    pub state: PathBuf,
    /// Observables file; by default the pairs of the state file are used.
    #[arg(long, conflicts_with = "canonical")]
    pub observables: Option<PathBuf>,
    /// Use the optimal canonical qubit observables.
    #[arg(long)]
    pub canonical: bool,
    /// Hypothesis tolerance and fidelity threshold.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Skip the near-optimality check (the report is then not a certificate).
    #[arg(long)]
    pub loose: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::State(a) => cmd_state(&a, stdout),
        Command::Pmax(a) => cmd_pmax(&a, stdout),
        Command::Bounds(a) => cmd_bounds(&a, stdout),
        Command::Scan(a) => cmd_scan(&a, stdout),
        Command::Selftest(a) => cmd_selftest(&a, stdout),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `text` to `out` if given, otherwise to stdout.
fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn say(stdout: &mut dyn Write, line: &str) -> CliResult<()> {
    writeln!(stdout, "{line}").map_err(|e| CliError::Io(e.to_string()))
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable values");
    s.push('\n');
    s
}

fn check_parties(n: usize) -> CliResult<()> {
    if !(2..=MAX_PARTIES).contains(&n) {
        return Err(CliError::Input(format!("n must lie in 2..={MAX_PARTIES}, got {n}")));
    }
    Ok(())
}

pub fn cmd_state(a: &StateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let (n, pairs) = match &a.spec {
        Some(path) => {
            let spec = read_state_file(path)?;
            let pairs = spec
                .pairs()?
                .ok_or_else(|| CliError::Input(format!("{}: no measurement pairs", path.display())))?;
            (spec.n, pairs)
        }
        None => {
            check_parties(a.n)?;
            let t = match a.alpha_sq {
                Some(t) => t,
                None => pmax(a.n)?.t,
            };
            (a.n, vec![MeasurementPair::from_alpha_sq(t)?; a.n])
        }
    };
    check_parties(n)?;
    let psi = hardy_state(n, &pairs)?;
    let stats = hardy_statistics(&joint_distribution(
        &QuantumState::Pure(psi.clone()),
        &measurements_from_pairs(&pairs)?,
    )?)?;
    let report = StateReport {
        spec: StateSpecFile {
            schema: SCHEMA,
            n,
            pairs: Some(pairs.iter().map(PairSpec::from_pair).collect()),
            dims: Some(psi.dims().to_vec()),
            amplitudes: Some(state_amplitudes(&psi)),
        },
        alpha_sq: pairs.iter().map(|p| p.alpha_sq()).collect(),
        p: stats.p,
        p_closed: success_prob_closed(&pairs)?,
        zeros: stats.zeros,
        genuinely_entangled: is_genuinely_entangled(&psi, 1e-9)?,
    };
    emit(a.out.as_deref(), &pretty(&report), stdout)?;
    if a.out.is_some() {
        say(stdout, &format!("p {:.12}", report.p))?;
    }
    Ok(())
}

pub fn cmd_pmax(a: &PmaxArgs, stdout: &mut dyn Write) -> CliResult<()> {
    check_parties(a.n)?;
    let r = pmax(a.n)?;
    say(stdout, &format!("n={} t={:.12} p_max={:.12}", r.n, r.t, r.p_max))
}

fn lp_value(r: LPSolution) -> CliResult<(f64, serde_json::Value)> {
    if !r.is_optimal() {
        return Err(CliError::Core(hardy_core::Error::Numeric(format!(
            "linear program ended {:?}",
            r.status
        ))));
    }
    Ok((r.value, json!({ "status": "optimal", "variables": r.assignment.len() })))
}

pub fn cmd_bounds(a: &BoundsArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if !(0.0..=MAX_BOUNDS_EPSILON).contains(&a.epsilon) {
        return Err(CliError::Input(format!(
            "epsilon {} outside [0, {MAX_BOUNDS_EPSILON}]",
            a.epsilon
        )));
    }
    let q = BoundQuery::new(a.n, a.epsilon)?;
    let (value, diagnostics) = match a.method {
        Method::Local => lp_value(local_max(q)?)?,
        Method::Ns => lp_value(nosignaling_max(q)?)?,
        Method::Npa => {
            let (s, _) = npa_solve(Scenario::new(a.n)?, a.level, a.epsilon, a.tol, None)?;
            let d = json!({
                "level": a.level,
                "tol": a.tol,
                "iterations": s.iterations,
                "psd_residual": s.psd_residual,
                "affine_residual": s.affine_residual,
                "dual_bound": s.dual_bound,
            });
            (s.value, d)
        }
        Method::Variational => {
            if a.n != 3 {
                return Err(CliError::Input("the variational bound is tripartite only".into()));
            }
            let opts = VariationalOptions {
                restarts: a.restarts,
                seed: a.seed,
                threads: threads_from_env()?,
                ..VariationalOptions::default()
            };
            let r = lower_bound_with(a.epsilon, &opts)?;
            let p = r.params;
            let d = json!({
                "restarts": r.restarts_used,
                "seed": r.seed,
                "constraint_values": r.constraint_values,
                "params": {
                    "c000": p.c000, "c001": p.c001, "c011": p.c011, "c111": p.c111,
                    "phi": p.phi, "xi": p.xi, "theta": p.theta,
                    "meas_alpha": p.meas_alpha, "meas_beta": p.meas_beta, "meas_gamma": p.meas_gamma,
                },
            });
            (r.value, d)
        }
    };
    let method = format!("{:?}", a.method).to_lowercase();
    let doc = json!({
        "schema": SCHEMA,
        "method": method,
        "n": a.n,
        "epsilon": a.epsilon,
        "value": value,
        "diagnostics": diagnostics,
    });
    let text = pretty(&doc);
    if let Some(path) = &a.out {
        write_file(path, &text)?;
    }
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))
}

pub fn cmd_scan(a: &ScanArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = ScanConfig {
        from: a.from,
        to: a.to,
        steps: a.steps,
        level: a.level,
        restarts: a.restarts,
        seed: a.seed,
        tol: a.tol,
        threads: threads_from_env()?,
    };
    let outcome = run_scan(&cfg)?;
    emit(a.out.as_deref(), &scan::to_csv(&outcome.rows), stdout)?;
    for d in &outcome.diagnostics {
        eprintln!("scan: {d}");
    }
    let failed = outcome.rows.iter().filter(|r| !r.problems().is_empty()).count();
    if failed > 0 {
        return Err(CliError::ScanFailed(failed));
    }
    Ok(())
}

pub fn cmd_selftest(a: &SelftestArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let spec = read_state_file(&a.state)?;
    let pairs = spec.pairs()?;
    let psi = match (spec.state()?, &pairs) {
        (Some(psi), _) => psi,
        (None, Some(pairs)) => hardy_state(spec.n, pairs)?,
        (None, None) => {
            return Err(CliError::Input(format!(
                "{}: neither amplitudes nor pairs",
                a.state.display()
            )));
        }
    };
    let observables: Vec<ObservablePair> = if let Some(path) = &a.observables {
        read_observables_file(path)?.observables()?
    } else if a.canonical {
        canonical_instance(spec.n)?.1
    } else if let Some(pairs) = &pairs {
        pairs.iter().map(ObservablePair::from_pair).collect::<Result<_, _>>()?
    } else {
        return Err(CliError::Input(
            "no observables: pass --observables or --canonical".into(),
        ));
    };
    let opts = SelfTestOptions {
        mode: if a.loose {
            SelfTestMode::Loose
        } else {
            SelfTestMode::Exact
        },
        hypothesis_tol: a.tol,
        ..SelfTestOptions::default()
    };
    let report = selftest_report_with(&QuantumState::Pure(psi), &observables, &opts)?;
    emit(a.out.as_deref(), &report.to_text(), stdout)?;
    if a.out.is_some() {
        say(stdout, &format!("total_fidelity {:.12}", report.total_fidelity))?;
    }
    if report.total_fidelity < 1.0 - a.tol {
        return Err(CliError::NotCertified(report.total_fidelity));
    }
    Ok(())
}
