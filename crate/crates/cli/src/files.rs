//! JSON files read and written by the CLI. Every file carries `"schema": 1`.
//!
//! State file:
//!
//! ```json
//! {
//!   "schema": 1,
//!   "n": 3,
//!   "pairs": [{"alpha": [0.73, 0.0], "beta": [0.67, 0.0]}, ...],
//!   "dims": [2, 2, 2],
//!   "amplitudes": [[0.13, 0.0], ...]
//! }
//! ```
//!
//! `pairs` gives each party's `D` eigenvector `α|0⟩ + β|1⟩` (`U` is always
//! computational); `dims` and `amplitudes` give an explicit state, party 1
//! most significant. Written state files add the evaluated statistics.
//!
//! Observables file:
//!
//! ```json
//! {"schema": 1, "parties": [{"u": [[[1,0],[0,0]],[[0,0],[-1,0]]], "d": ...}, ...]}
//! ```
//!
//! Matrices are arrays of rows, entries `[re, im]`.

use std::path::Path;

use hardy_core::hardystate::MeasurementPair;
use hardy_core::numkernel::{DenseMatrix, StateVector, C64};
use hardy_core::selftest::ObservablePair;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA: u32 = 1;

pub type Complex = [f64; 2];

fn to_c64(z: &Complex) -> C64 {
    C64::new(z[0], z[1])
}

fn from_c64(z: C64) -> Complex {
    [z.re, z.im]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSpec {
    pub alpha: Complex,
    pub beta: Complex,
}

impl PairSpec {
    pub fn from_pair(p: &MeasurementPair) -> Self {
        Self {
            alpha: from_c64(p.alpha()),
            beta: from_c64(p.beta()),
        }
    }

    pub fn to_pair(&self) -> CliResult<MeasurementPair> {
        Ok(MeasurementPair::new(to_c64(&self.alpha), to_c64(&self.beta))?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpecFile {
    pub schema: u32,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<Complex>>,
}

impl StateSpecFile {
    pub fn pairs(&self) -> CliResult<Option<Vec<MeasurementPair>>> {
        let Some(specs) = &self.pairs else { return Ok(None) };
        if specs.len() != self.n {
            return Err(CliError::Input(format!(
                "{} measurement pairs for n = {}",
                specs.len(),
                self.n
            )));
        }
        specs
            .iter()
            .map(PairSpec::to_pair)
            .collect::<CliResult<Vec<_>>>()
            .map(Some)
    }

    pub fn state(&self) -> CliResult<Option<StateVector>> {
        let Some(amps) = &self.amplitudes else { return Ok(None) };
        let dims = self.dims.clone().unwrap_or_else(|| vec![2; self.n]);
        if dims.len() != self.n {
            return Err(CliError::Input(format!(
                "{} local dimensions for n = {}",
                dims.len(),
                self.n
            )));
        }
        Ok(Some(StateVector::new(dims, amps.iter().map(to_c64).collect())?))
    }
}

/// A written state: the spec plus evaluated statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateReport {
    #[serde(flatten)]
    pub spec: StateSpecFile,
    pub alpha_sq: Vec<f64>,
    /// Born-rule success probability.
    pub p: f64,
    /// Closed-form success probability.
    pub p_closed: f64,
    /// `P(++|D_i,U_{i+1})` for each party, then `P(−…−|D…D)`.
    pub zeros: Vec<f64>,
    pub genuinely_entangled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub u: Vec<Vec<Complex>>,
    pub d: Vec<Vec<Complex>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservablesFile {
    pub schema: u32,
    pub parties: Vec<ObservableSpec>,
}

fn matrix(rows: &[Vec<Complex>]) -> CliResult<DenseMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Input("ragged matrix rows".into()));
    }
    Ok(DenseMatrix::from_vec(
        r,
        c,
        rows.iter().flatten().map(to_c64).collect(),
    )?)
}

fn rows(m: &DenseMatrix) -> Vec<Vec<Complex>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| from_c64(m[(i, j)])).collect())
        .collect()
}

impl ObservablesFile {
    pub fn from_pairs(obs: &[ObservablePair]) -> Self {
        Self {
            schema: SCHEMA,
            parties: obs
                .iter()
                .map(|o| ObservableSpec {
                    u: rows(&o.a1),
                    d: rows(&o.a2),
                })
                .collect(),
        }
    }

    pub fn observables(&self) -> CliResult<Vec<ObservablePair>> {
        self.parties
            .iter()
            .map(|p| Ok(ObservablePair::new(matrix(&p.u)?, matrix(&p.d)?)?))
            .collect()
    }
}

fn check_schema(found: u32, path: &Path) -> CliResult<()> {
    if found != SCHEMA {
        return Err(CliError::Input(format!(
            "{}: schema {found} is not supported (expected {SCHEMA})",
            path.display()
        )));
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_state_file(path: &Path) -> CliResult<StateSpecFile> {
    let f: StateSpecFile = read_json(path)?;
    check_schema(f.schema, path)?;
    Ok(f)
}

pub fn read_observables_file(path: &Path) -> CliResult<ObservablesFile> {
    let f: ObservablesFile = read_json(path)?;
    check_schema(f.schema, path)?;
    Ok(f)
}

pub fn state_amplitudes(psi: &StateVector) -> Vec<Complex> {
    psi.amps().iter().map(|&z| from_c64(z)).collect()
}
