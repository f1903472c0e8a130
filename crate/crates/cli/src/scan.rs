//! Noise scans: every bound on one ε grid, written as CSV.
//!
//! Columns, in order (gnuplot: `plot 'scan.csv' using 1:2, '' using 1:4, …`):
//! `epsilon,local,no_signaling,npa_upper,npa_level,variational_lower,restarts,seed`.
//! A failed solver leaves `nan` in its column.

use std::fmt::Write as _;

use hardy_core::behavior::Scenario;
use hardy_core::npa::npa_solve;
use hardy_core::polytope::{local_max, nosignaling_max, BoundQuery, LPSolution};
use hardy_core::variational::{lower_bound_with, AnsatzParams, VariationalOptions};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

pub const CSV_HEADER: &str = "epsilon,local,no_signaling,npa_upper,npa_level,variational_lower,restarts,seed";
/// Slack allowed in the ordering checks between columns.
pub const ORDER_SLACK: f64 = 2e-3;
/// Environment variable with the worker count.
pub const THREADS_VAR: &str = "HARDY_THREADS";
/// Scans are tripartite.
const PARTIES: usize = 3;

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub from: f64,
    pub to: f64,
    /// Number of grid points, ends included.
    pub steps: usize,
    pub level: usize,
    pub restarts: usize,
    pub seed: u64,
    /// SDP tolerance.
    pub tol: f64,
    /// Worker threads; `0` means all cores.
    pub threads: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            from: 0.0,
            to: 0.25,
            steps: 26,
            level: 3,
            restarts: 50,
            seed: 0,
            tol: 1e-6,
            threads: 0,
        }
    }
}

impl ScanConfig {
    pub fn grid(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        let h = (self.to - self.from) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.from + h * i as f64).collect()
    }

    fn validate(&self) -> CliResult<()> {
        if !(self.from.is_finite()
            && self.to.is_finite()
            && 0.0 <= self.from
            && self.from <= self.to
            && self.to <= 0.25)
        {
            return Err(CliError::Input(format!(
                "scan range [{}, {}] must satisfy 0 <= from <= to <= 0.25",
                self.from, self.to
            )));
        }
        if self.steps == 0 || (self.steps == 1 && self.from != self.to) {
            return Err(CliError::Input(
                "need at least two grid points for a proper range".into(),
            ));
        }
        if self.restarts == 0 {
            return Err(CliError::Input("need at least one restart".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub epsilon: f64,
    pub local: Option<f64>,
    pub no_signaling: Option<f64>,
    pub npa_upper: Option<f64>,
    pub npa_level: usize,
    pub variational_lower: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
}

impl ScanRow {
    /// Failed columns and broken orderings, as messages.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let cols = [
            ("local", self.local),
            ("no_signaling", self.no_signaling),
            ("npa_upper", self.npa_upper),
            ("variational_lower", self.variational_lower),
        ];
        for (name, v) in cols {
            if v.is_none() {
                out.push(format!("{name} failed"));
            }
        }
        let order = [
            ("local", self.local, "npa_upper", self.npa_upper),
            ("variational_lower", self.variational_lower, "npa_upper", self.npa_upper),
            ("npa_upper", self.npa_upper, "no_signaling", self.no_signaling),
        ];
        for (a, x, b, y) in order {
            if let (Some(x), Some(y)) = (x, y) {
                if x > y + ORDER_SLACK {
                    out.push(format!("{a} = {x:.6} exceeds {b} = {y:.6}"));
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.10}"));
        format!(
            "{:.6},{},{},{},{},{},{},{}",
            self.epsilon,
            f(self.local),
            f(self.no_signaling),
            f(self.npa_upper),
            self.npa_level,
            f(self.variational_lower),
            self.restarts,
            self.seed
        )
    }

    pub fn parse_csv(line: &str) -> CliResult<Self> {
        let parts: Vec<&str> = line.trim().split(',').collect();
        if parts.len() != 8 {
            return Err(CliError::Input(format!("scan row has {} fields: {line}", parts.len())));
        }
        let num = |s: &str| -> CliResult<f64> { s.parse().map_err(|_| CliError::Input(format!("bad number {s:?}"))) };
        let opt = |s: &str| -> CliResult<Option<f64>> {
            if s == "nan" {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let int = |s: &str| -> CliResult<u64> { s.parse().map_err(|_| CliError::Input(format!("bad integer {s:?}"))) };
        Ok(Self {
            epsilon: num(parts[0])?,
            local: opt(parts[1])?,
            no_signaling: opt(parts[2])?,
            npa_upper: opt(parts[3])?,
            npa_level: int(parts[4])? as usize,
            variational_lower: opt(parts[5])?,
            restarts: int(parts[6])? as usize,
            seed: int(parts[7])?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub rows: Vec<ScanRow>,
    /// One message per failed solver or broken ordering.
    pub diagnostics: Vec<String>,
}

/// Worker count from the environment, `0` (all cores) when unset.
pub fn threads_from_env() -> CliResult<usize> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{THREADS_VAR}={v:?} is not a thread count"))),
        Err(_) => Ok(0),
    }
}

/// Per-point seed, so that grid points explore different restarts.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Computes all rows. The relaxations run in parallel; the variational
/// column runs in grid order, each point also starting from the previous
/// point's optimum (still feasible, since the constraint set only grows).
pub fn run_scan(cfg: &ScanConfig) -> CliResult<ScanOutcome> {
    cfg.validate()?;
    let grid = cfg.grid();
    let scenario = Scenario::new(PARTIES)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;

    let relaxations: Vec<[Result<f64, String>; 3]> = pool.install(|| {
        grid.par_iter()
            .map(|&eps| {
                let q = BoundQuery {
                    n: PARTIES,
                    epsilon: eps,
                };
                let lp = |r: hardy_core::Result<LPSolution>| match r {
                    Ok(s) if s.is_optimal() => Ok(s.value),
                    Ok(s) => Err(format!("linear program ended {:?}", s.status)),
                    Err(e) => Err(e.to_string()),
                };
                let npa = npa_solve(scenario, cfg.level, eps, cfg.tol, None)
                    .map(|(s, _)| s.value)
                    .map_err(|e| e.to_string());
                [lp(local_max(q)), lp(nosignaling_max(q)), npa]
            })
            .collect()
    });

    let mut previous: Option<AnsatzParams> = None;
    let mut rows = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::new();
    for (i, (&eps, [local, ns, npa])) in grid.iter().zip(relaxations).enumerate() {
        let seed = point_seed(cfg.seed, i);
        let opts = VariationalOptions {
            restarts: cfg.restarts,
            seed,
            extra_starts: previous.into_iter().collect(),
            threads: cfg.threads,
            ..VariationalOptions::default()
        };
        let var = lower_bound_with(eps, &opts).map_err(|e| e.to_string());
        previous = var.as_ref().ok().map(|r| r.params);
        let mut keep = |name: &str, r: Result<f64, String>| match r {
            Ok(v) => Some(v),
            Err(e) => {
                diagnostics.push(format!("epsilon {eps:.6}: {name}: {e}"));
                None
            }
        };
        let row = ScanRow {
            epsilon: eps,
            local: keep("local", local),
            no_signaling: keep("no_signaling", ns),
            npa_upper: keep("npa_upper", npa),
            npa_level: cfg.level,
            variational_lower: keep("variational_lower", var.map(|r| r.value)),
            restarts: cfg.restarts,
            seed,
        };
        for p in row.problems().into_iter().filter(|p| !p.ends_with("failed")) {
            diagnostics.push(format!("epsilon {eps:.6}: {p}"));
        }
        rows.push(row);
    }
    Ok(ScanOutcome { rows, diagnostics })
}

pub fn to_csv(rows: &[ScanRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

pub fn parse_csv(text: &str) -> CliResult<Vec<ScanRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CliError::Input("scan CSV header does not match".into()));
    }
    lines.filter(|l| !l.trim().is_empty()).map(ScanRow::parse_csv).collect()
}
