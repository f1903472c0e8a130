//! Joint distributions `P(outcomes | settings)` for `n` parties with two
//! dichotomic measurements each, and the Hardy statistics read off them.
//!
//! Layout: entry `s · 2ⁿ + o`, where `s` and `o` are bit strings with party 0
//! in the most significant bit. Setting bit `0 = U`, `1 = D`; outcome bit
//! `0 = +1`, `1 = −1`.

use crate::error::{Error, Result};
use crate::hardystate::MeasurementPair;
use crate::numkernel::{apply_local, total_dim, DenseMatrix, StateVector, C64, ONE};

const NEGATIVE_CLAMP: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-10;
/// Signaling tolerated before two-party marginals are considered ill-defined.
const MARGINAL_SIGNALING_TOL: f64 = 1e-9;
const PROJECTOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setting {
    U,
    D,
}

impl Setting {
    pub fn bit(self) -> usize {
        match self {
            Setting::U => 0,
            Setting::D => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn bit(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }
}

/// `n` parties, two settings per party, two outcomes per setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub n: usize,
}

impl Scenario {
    pub const SETTINGS_PER_PARTY: usize = 2;
    pub const OUTCOMES_PER_SETTING: usize = 2;

    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Scenario(format!("need at least 2 parties, got {n}")));
        }
        if n > 16 {
            return Err(Error::Size(format!("{n} parties is too many for dense behaviors")));
        }
        Ok(Self { n })
    }

    /// Number of setting (or outcome) strings, `2ⁿ`.
    pub fn strings(&self) -> usize {
        1 << self.n
    }

    /// Bit of `party` within a setting or outcome string.
    pub fn shift(&self, party: usize) -> usize {
        self.n - 1 - party
    }

    pub fn setting_index(&self, settings: &[Setting]) -> usize {
        settings.iter().fold(0, |acc, s| (acc << 1) | s.bit())
    }

    pub fn outcome_index(&self, outcomes: &[Outcome]) -> usize {
        outcomes.iter().fold(0, |acc, o| (acc << 1) | o.bit())
    }
}

/// Full table of joint conditional probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorTensor {
    scenario: Scenario,
    probs: Vec<f64>,
}

impl BehaviorTensor {
    /// Validates and stores `probs`. Entries in `[-1e-12, 0)` are clamped to
    /// zero; anything more negative is rejected.
    pub fn from_probs(scenario: Scenario, mut probs: Vec<f64>) -> Result<Self> {
        let m = scenario.strings();
        if probs.len() != m * m {
            return Err(Error::Validation(format!(
                "{} entries for a {}-party behavior (expected {})",
                probs.len(),
                scenario.n,
                m * m
            )));
        }
        for p in probs.iter_mut() {
            if !p.is_finite() {
                return Err(Error::Validation("non-finite probability".into()));
            }
            if *p < 0.0 {
                if *p < -NEGATIVE_CLAMP {
                    return Err(Error::Numeric(format!("negative probability {p}")));
                }
                *p = 0.0;
            }
        }
        for s in 0..m {
            let total: f64 = probs[s * m..(s + 1) * m].iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::Validation(format!("setting string {s:b} sums to {total}")));
            }
        }
        Ok(Self { scenario, probs })
    }

    /// Uniformly random outcomes for every setting.
    pub fn uniform(scenario: Scenario) -> Self {
        let m = scenario.strings();
        Self {
            scenario,
            probs: vec![1.0 / m as f64; m * m],
        }
    }

    /// Deterministic local strategy: `table[party][setting]` is the outcome
    /// that party always reports.
    pub fn deterministic(scenario: Scenario, table: &[[Outcome; 2]]) -> Result<Self> {
        if table.len() != scenario.n {
            return Err(Error::Validation("one outcome pair per party is required".into()));
        }
        let m = scenario.strings();
        let mut probs = vec![0.0; m * m];
        for s in 0..m {
            let o = (0..scenario.n).fold(0, |acc, party| {
                let bit = (s >> scenario.shift(party)) & 1;
                (acc << 1) | table[party][bit].bit()
            });
            probs[s * m + o] = 1.0;
        }
        Ok(Self { scenario, probs })
    }

    /// Convex combination `Σ w_i b_i`.
    pub fn mixture(parts: &[(f64, &BehaviorTensor)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Validation("empty mixture".into()))?
            .1;
        let mut probs = vec![0.0; first.probs.len()];
        for (w, b) in parts {
            if b.scenario != first.scenario {
                return Err(Error::Validation("mixture of different scenarios".into()));
            }
            for (acc, p) in probs.iter_mut().zip(&b.probs) {
                *acc += w * p;
            }
        }
        Self::from_probs(first.scenario, probs)
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(o | s)` by string indices.
    pub fn prob(&self, s: usize, o: usize) -> f64 {
        self.probs[s * self.scenario.strings() + o]
    }

    pub fn get(&self, settings: &[Setting], outcomes: &[Outcome]) -> f64 {
        self.prob(
            self.scenario.setting_index(settings),
            self.scenario.outcome_index(outcomes),
        )
    }

    /// Marginal probability that the parties in `kept_mask` (bitmask in string
    /// order) report the outcome bits of `o` when the full setting string is
    /// `s`.
    pub fn marginal(&self, s: usize, kept_mask: usize, o: usize) -> f64 {
        let m = self.scenario.strings();
        (0..m)
            .filter(|full| full & kept_mask == o & kept_mask)
            .map(|full| self.prob(s, full))
            .sum()
    }
}

/// Projectors of one party's two measurements.
#[derive(Debug, Clone)]
pub struct LocalMeasurement {
    pub dim: usize,
    /// `[Π_{+|U}, Π_{−|U}]`.
    pub u: [DenseMatrix; 2],
    /// `[Π_{+|D}, Π_{−|D}]`.
    pub d: [DenseMatrix; 2],
}

impl LocalMeasurement {
    pub fn new(u: [DenseMatrix; 2], d: [DenseMatrix; 2]) -> Result<Self> {
        let dim = u[0].rows();
        for pi in u.iter().chain(d.iter()) {
            if !pi.is_square() || pi.rows() != dim {
                return Err(Error::Validation("projectors must share one square shape".into()));
            }
            if !pi.is_hermitian(PROJECTOR_TOL) {
                return Err(Error::Validation("projector is not Hermitian".into()));
            }
            if pi.matmul(pi)?.max_abs_diff(pi) > PROJECTOR_TOL {
                return Err(Error::Validation("projector is not idempotent".into()));
            }
        }
        let id = DenseMatrix::identity(dim);
        for pair in [&u, &d] {
            if pair[0].add(&pair[1])?.max_abs_diff(&id) > PROJECTOR_TOL {
                return Err(Error::Validation("projector pair does not sum to the identity".into()));
            }
        }
        Ok(Self { dim, u, d })
    }

    /// Projectors `(I ± A)/2` of two dichotomic observables.
    pub fn from_observables(u_obs: &DenseMatrix, d_obs: &DenseMatrix) -> Result<Self> {
        let split = |a: &DenseMatrix| -> Result<[DenseMatrix; 2]> {
            let id = DenseMatrix::identity(a.rows());
            let half = C64::new(0.5, 0.0);
            Ok([id.add(a)?.scale(half), id.sub(a)?.scale(half)])
        };
        Self::new(split(u_obs)?, split(d_obs)?)
    }

    pub fn projector(&self, setting: usize, outcome: usize) -> &DenseMatrix {
        if setting == 0 {
            &self.u[outcome]
        } else {
            &self.d[outcome]
        }
    }
}

/// Per-party measurements.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub parties: Vec<LocalMeasurement>,
}

impl MeasurementSet {
    pub fn dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.dim).collect()
    }
}

/// Qubit projectors: `U` onto `|0>, |1>` and `D` onto `|+>, |->`.
pub fn measurements_from_pairs(pairs: &[MeasurementPair]) -> Result<MeasurementSet> {
    let parties = pairs
        .iter()
        .map(|p| {
            let pair = MeasurementPair::new(p.alpha(), p.beta())?;
            LocalMeasurement::new(
                [DenseMatrix::outer(&pair.u_plus()), DenseMatrix::outer(&pair.u_minus())],
                [DenseMatrix::outer(&pair.d_plus()), DenseMatrix::outer(&pair.d_minus())],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementSet { parties })
}

/// A pure state or a density matrix over the same tensor-product space.
#[derive(Debug, Clone)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed { dims: Vec<usize>, rho: DenseMatrix },
}

impl QuantumState {
    pub fn mixed(dims: Vec<usize>, rho: DenseMatrix) -> Result<Self> {
        let total = total_dim(&dims)?;
        if !rho.is_square() || rho.rows() != total {
            return Err(Error::Validation("density matrix does not match dimensions".into()));
        }
        if !rho.is_hermitian(1e-10) {
            return Err(Error::Validation("density matrix is not Hermitian".into()));
        }
        if (rho.trace().re - 1.0).abs() > 1e-10 {
            return Err(Error::Validation("density matrix does not have unit trace".into()));
        }
        Ok(Self::Mixed { dims, rho })
    }

    pub fn dims(&self) -> &[usize] {
        match self {
            QuantumState::Pure(psi) => psi.dims(),
            QuantumState::Mixed { dims, .. } => dims,
        }
    }

    pub fn density(&self) -> DenseMatrix {
        match self {
            QuantumState::Pure(psi) => psi.density(),
            QuantumState::Mixed { rho, .. } => rho.clone(),
        }
    }
}

impl From<StateVector> for QuantumState {
    fn from(psi: StateVector) -> Self {
        QuantumState::Pure(psi)
    }
}

/// Born-rule probabilities for every setting and outcome string.
pub fn joint_distribution(state: &QuantumState, m: &MeasurementSet) -> Result<BehaviorTensor> {
    let dims = state.dims().to_vec();
    if m.dims() != dims {
        return Err(Error::Validation(format!(
            "state dimensions {dims:?} do not match measurement dimensions {:?}",
            m.dims()
        )));
    }
    let scenario = Scenario::new(dims.len())?;
    let n = scenario.n;
    let strings = scenario.strings();

    // Mixed states are handled as vectors over (row ⊗ column), with the local
    // projectors acting on the row factor; the leaf value is then a trace.
    let (root, work_dims, leaf): (Vec<C64>, Vec<usize>, Box<dyn Fn(&[C64]) -> f64>) = match state {
        QuantumState::Pure(psi) => (
            psi.amps().to_vec(),
            dims.clone(),
            Box::new(|v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum()),
        ),
        QuantumState::Mixed { rho, .. } => {
            let total = rho.rows();
            let mut wd = dims.clone();
            wd.push(total);
            (
                rho.as_slice().to_vec(),
                wd,
                Box::new(move |v: &[C64]| (0..total).map(|i| v[i * total + i].re).sum()),
            )
        }
    };

    let mut probs = vec![0.0; strings * strings];
    for s in 0..strings {
        // Depth-first over parties; `stack` holds (party, outcome prefix, vector).
        let mut stack: Vec<(usize, usize, Vec<C64>)> = vec![(0, 0, root.clone())];
        while let Some((party, prefix, v)) = stack.pop() {
            if party == n {
                probs[s * strings + prefix] = leaf(&v);
                continue;
            }
            let setting = (s >> scenario.shift(party)) & 1;
            for outcome in 0..2 {
                let pi = m.parties[party].projector(setting, outcome);
                let next = apply_local(pi, party, &work_dims, &v)?;
                stack.push((party + 1, (prefix << 1) | outcome, next));
            }
        }
    }
    BehaviorTensor::from_probs(scenario, probs)
}

/// Success probability and the constrained probabilities of the Hardy test.
#[derive(Debug, Clone, PartialEq)]
pub struct HardyStats {
    /// `P(+1, …, +1 | U, …, U)`.
    pub p: f64,
    /// `zeros[i] = P(+1, +1 | D_i, U_{i+1})` (cyclic) for `i < n`, and
    /// `zeros[n] = P(−1, …, −1 | D, …, D)`.
    pub zeros: Vec<f64>,
}

impl HardyStats {
    pub fn max_zero(&self) -> f64 {
        self.zeros.iter().copied().fold(0.0, f64::max)
    }
}

pub fn hardy_statistics(b: &BehaviorTensor) -> Result<HardyStats> {
    let report = check_no_signaling(b, MARGINAL_SIGNALING_TOL);
    if !report.passes {
        return Err(Error::Validation(format!(
            "behavior signals ({:.3e}); two-party marginals are ill-defined",
            report.max_violation
        )));
    }
    let sc = b.scenario();
    let n = sc.n;
    let strings = sc.strings();
    let p = b.prob(0, 0);
    let mut zeros = Vec::with_capacity(n + 1);
    for i in 0..n {
        let j = (i + 1) % n;
        // Party i measures D, everyone else U; parties i and j report +1.
        let s = 1 << sc.shift(i);
        let kept = (1 << sc.shift(i)) | (1 << sc.shift(j));
        zeros.push(b.marginal(s, kept, 0));
    }
    zeros.push(b.prob(strings - 1, strings - 1));
    Ok(HardyStats { p, zeros })
}

/// Largest signaling found by [`check_no_signaling`] and where it occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct NoSignalingReport {
    pub max_violation: f64,
    pub passes: bool,
    /// Kept parties, their setting and outcome bits at the worst marginal.
    pub offending: Option<OffendingMarginal>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffendingMarginal {
    pub kept_parties: Vec<usize>,
    pub settings: usize,
    pub outcomes: usize,
}

/// Maximum over kept-party subsets of the spread of a marginal across the
/// settings of the traced-out parties.
pub fn check_no_signaling(b: &BehaviorTensor, tol: f64) -> NoSignalingReport {
    let sc = b.scenario();
    let strings = sc.strings();
    let full = strings - 1;
    let mut worst = 0.0;
    let mut offending = None;
    for kept in 1..full {
        let traced = full & !kept;
        // Enumerate settings of the kept parties (s with traced bits zero).
        for s_kept in (0..strings).filter(|s| s & traced == 0) {
            for o_kept in (0..strings).filter(|o| o & traced == 0) {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for s_traced in (0..strings).filter(|s| s & kept == 0) {
                    let v = b.marginal(s_kept | s_traced, kept, o_kept);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if hi - lo > worst {
                    worst = hi - lo;
                    offending = Some(OffendingMarginal {
                        kept_parties: (0..sc.n).filter(|&p| (kept >> sc.shift(p)) & 1 == 1).collect(),
                        settings: s_kept,
                        outcomes: o_kept,
                    });
                }
            }
        }
    }
    NoSignalingReport {
        max_violation: worst,
        passes: worst <= tol,
        offending,
    }
}

/// Maximally mixed state on `dims`.
pub fn maximally_mixed(dims: Vec<usize>) -> Result<QuantumState> {
    let total = total_dim(&dims)?;
    let rho = DenseMatrix::identity(total).scale(ONE / total as f64);
    QuantumState::mixed(dims, rho)
}
