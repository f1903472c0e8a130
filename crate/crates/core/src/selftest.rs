//! Checks that a state reaching the optimal Hardy probability is the Hardy
//! state up to local unitaries and junk.
//!
//! Each party's two dichotomic observables split the local space into
//! invariant blocks of dimension at most two. On a two-dimensional block
//! with `+1` eigenvectors `|u⟩` of `U` and `|d⟩` of `D`, a frame is fixed by
//! `e0 = |u⟩` and `e1 ∝ D|u⟩ − ⟨u|D|u⟩|u⟩`, so that `U` is diagonal and `D`
//! is real with a positive off-diagonal entry: exactly the canonical qubit
//! pair for the block's angle. The state is cut into products of blocks and
//! each piece is compared to the canonical Hardy state in those frames.

use std::fmt::Write as _;

use crate::behavior::{hardy_statistics, joint_distribution, LocalMeasurement, MeasurementSet, QuantumState};
use crate::error::{Error, Result};
use crate::hardystate::{hardy_state, pmax, MeasurementPair};
use crate::numkernel::{eig_herm, kron, DenseMatrix, StateVector, C64};

/// Default tolerance on `p_max − p` and on the Hardy zeros in exact mode.
pub const DEFAULT_HYPOTHESIS_TOL: f64 = 1e-6;
/// Default tolerance of the block decomposition.
pub const DEFAULT_BLOCK_TOL: f64 = 1e-9;
/// Block angles within this of the optimal one count as matched.
pub const ANGLE_TOL: f64 = 1e-6;
/// Block combinations lighter than this get no fidelity.
const WEIGHT_FLOOR: f64 = 1e-12;

/// A party's `U` (`a1`) and `D` (`a2`) observables.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservablePair {
    pub a1: DenseMatrix,
    pub a2: DenseMatrix,
}

impl ObservablePair {
    pub fn new(a1: DenseMatrix, a2: DenseMatrix) -> Result<Self> {
        let p = Self { a1, a2 };
        p.validate(DEFAULT_BLOCK_TOL)?;
        Ok(p)
    }

    /// `U = |0⟩⟨0| − |1⟩⟨1|` and `D` with `+1` eigenvector `√t|0⟩ + √(1−t)|1⟩`.
    pub fn canonical(alpha_sq: f64) -> Result<Self> {
        Self::from_pair(&MeasurementPair::from_alpha_sq(alpha_sq)?)
    }

    pub fn from_pair(pair: &MeasurementPair) -> Result<Self> {
        let obs = |plus: [C64; 2]| {
            DenseMatrix::outer(&plus)
                .scale(C64::new(2.0, 0.0))
                .sub(&DenseMatrix::identity(2))
        };
        Self::new(obs(pair.u_plus())?, obs(pair.d_plus())?)
    }

    pub fn dim(&self) -> usize {
        self.a1.rows()
    }

    /// `V† a V` for both observables.
    pub fn conjugated(&self, v: &DenseMatrix) -> Result<Self> {
        let c = |a: &DenseMatrix| v.matmul(a)?.matmul(&v.adjoint());
        Ok(Self {
            a1: c(&self.a1)?,
            a2: c(&self.a2)?,
        })
    }

    fn validate(&self, tol: f64) -> Result<()> {
        let d = self.a1.rows();
        if !self.a1.is_square() || !self.a2.is_square() || self.a2.rows() != d || d == 0 {
            return Err(Error::Validation("observables must be square and of one size".into()));
        }
        let id = DenseMatrix::identity(d);
        for a in [&self.a1, &self.a2] {
            if !a.is_hermitian(tol) {
                return Err(Error::Validation("observable is not Hermitian".into()));
            }
            let err = a.matmul(a)?.max_abs_diff(&id);
            if err > tol.max(1e-10) {
                return Err(Error::Validation(format!(
                    "observable squares to I only within {err:.3e}"
                )));
            }
        }
        Ok(())
    }

    fn measurement(&self) -> Result<LocalMeasurement> {
        LocalMeasurement::from_observables(&self.a1, &self.a2)
    }
}

/// One invariant subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanBlock {
    /// Orthonormal basis as columns: `e0, e1` for a qubit block, one vector
    /// for a degenerate block.
    pub basis: DenseMatrix,
    /// Angle `θ ∈ [0, π]` with `cos θ = ⟨e0|D|e0⟩`; `None` for degenerate
    /// blocks, where `U` and `D` commute.
    pub angle: Option<f64>,
}

impl JordanBlock {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn is_degenerate(&self) -> bool {
        self.angle.is_none()
    }

    /// `|⟨u₊|d₊⟩|² = cos²(θ/2)`.
    pub fn overlap_sq(&self) -> Option<f64> {
        self.angle.map(|t| (t / 2.0).cos().powi(2))
    }

    fn projector(&self) -> Result<DenseMatrix> {
        self.basis.matmul(&self.basis.adjoint())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanDecomposition {
    pub dim: usize,
    pub blocks: Vec<JordanBlock>,
}

impl JordanDecomposition {
    /// `‖Σ_μ Π^μ − I‖` over entries.
    pub fn completeness_error(&self) -> Result<f64> {
        let mut sum = DenseMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            sum = sum.add(&b.projector()?)?;
        }
        Ok(sum.max_abs_diff(&DenseMatrix::identity(self.dim)))
    }

    /// Largest `‖(I − Π^μ) A Π^μ‖` over blocks and both observables.
    pub fn invariance_error(&self, p: &ObservablePair) -> Result<f64> {
        let id = DenseMatrix::identity(self.dim);
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            let pi = b.projector()?;
            let out = id.sub(&pi)?;
            for a in [&p.a1, &p.a2] {
                worst = worst.max(
                    out.matmul(a)?
                        .matmul(&pi)?
                        .max_abs_diff(&DenseMatrix::zeros(self.dim, self.dim)),
                );
            }
        }
        Ok(worst)
    }

    /// Columns of all blocks in order; a unitary.
    pub fn frame(&self) -> DenseMatrix {
        let cols: Vec<Vec<C64>> = self
            .blocks
            .iter()
            .flat_map(|b| (0..b.dim()).map(|j| b.basis.column(j)))
            .collect();
        DenseMatrix::from_fn(self.dim, self.dim, |i, j| cols[j][i])
    }

    pub fn qubit_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| !b.is_degenerate()).count()
    }
}

fn column_matrix(cols: &[Vec<C64>]) -> DenseMatrix {
    let rows = cols.first().map_or(0, |c| c.len());
    DenseMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Simultaneous block-diagonalization of two dichotomic observables.
///
/// The anticommutator `{a1, a2}` commutes with both and equals `2 cos θ` on a
/// qubit block, so its eigenspaces are unions of blocks with equal angle.
/// Inside an eigenspace the `+1` eigenvectors of `a1` seed one block each.
pub fn jordan_blocks(p: &ObservablePair, tol: f64) -> Result<JordanDecomposition> {
    p.validate(tol)?;
    let d = p.dim();
    let anti = p.a1.matmul(&p.a2)?.add(&p.a2.matmul(&p.a1)?)?;
    let eig = eig_herm(&anti, tol.max(1e-12))?;
    // Eigenvalues of the anticommutator are accurate to rounding; group them
    // well above that but far below any meaningful angle separation.
    let cluster_tol = 1e-7;

    let mut blocks = Vec::new();
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && eig.eigenvalues[end] - eig.eigenvalues[end - 1] <= cluster_tol {
            end += 1;
        }
        let cos = (eig.eigenvalues[start..end].iter().sum::<f64>() / (end - start) as f64 / 2.0).clamp(-1.0, 1.0);
        let space: Vec<Vec<C64>> = (start..end).map(|k| eig.eigenvectors.column(k)).collect();
        let q = column_matrix(&space);
        // a1 restricted to the eigenspace.
        let restricted = q.adjoint().matmul(&p.a1)?.matmul(&q)?;
        let inner = eig_herm(&restricted, 1e-8)?;
        let lift = |k: usize| -> Result<Vec<C64>> { q.apply(&inner.eigenvectors.column(k)) };
        let m = end - start;

        if 1.0 - cos.abs() <= tol.max(1e-12) {
            // U and D commute here: every common eigenvector is its own block.
            for k in 0..m {
                blocks.push(JordanBlock {
                    basis: column_matrix(&[lift(k)?]),
                    angle: None,
                });
            }
        } else {
            let plus: Vec<usize> = (0..m).filter(|&k| inner.eigenvalues[k] > 0.0).collect();
            if 2 * plus.len() != m {
                return Err(Error::Numeric(format!(
                    "eigenspace of dimension {m} does not split evenly under the first observable"
                )));
            }
            for k in plus {
                let e0 = lift(k)?;
                let de0 = p.a2.apply(&e0)?;
                let c = dot(&e0, &de0);
                let mut e1: Vec<C64> = de0.iter().zip(&e0).map(|(x, y)| x - c * y).collect();
                let norm = e1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-8 {
                    return Err(Error::Numeric("qubit block collapsed while building its frame".into()));
                }
                e1.iter_mut().for_each(|z| *z /= norm);
                blocks.push(JordanBlock {
                    basis: column_matrix(&[e0, e1]),
                    angle: Some(c.re.clamp(-1.0, 1.0).acos()),
                });
            }
        }
        start = end;
    }
    Ok(JordanDecomposition { dim: d, blocks })
}

/// Whether the near-optimality hypothesis is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfTestMode {
    /// Require `p ≥ p_max − tol` and every Hardy zero `≤ tol`.
    Exact,
    /// Report fidelities without checking the hypothesis. Exploratory only:
    /// a high fidelity here certifies nothing.
    Loose,
}

#[derive(Debug, Clone, Copy)]
pub struct SelfTestOptions {
    pub mode: SelfTestMode,
    pub hypothesis_tol: f64,
    pub block_tol: f64,
}

impl Default for SelfTestOptions {
    fn default() -> Self {
        Self {
            mode: SelfTestMode::Exact,
            hypothesis_tol: DEFAULT_HYPOTHESIS_TOL,
            block_tol: DEFAULT_BLOCK_TOL,
        }
    }
}

/// One product of local blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTerm {
    /// Block index per party.
    pub blocks: Vec<usize>,
    /// `Tr(ρ Π^μ ⊗ Π^ν ⊗ …)`.
    pub weight: f64,
    /// Fidelity of the normalized piece to the canonical Hardy state; `None`
    /// if a block is degenerate or the weight is negligible.
    pub fidelity: Option<f64>,
    /// Every block angle equals the optimal one within [`ANGLE_TOL`].
    pub angles_matched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestReport {
    pub mode: SelfTestMode,
    pub n: usize,
    /// Success probability and Hardy zeros of the input.
    pub p: f64,
    pub zeros: Vec<f64>,
    pub p_max: f64,
    pub decompositions: Vec<JordanDecomposition>,
    pub terms: Vec<BlockTerm>,
    /// `Σ weight · fidelity`; degenerate pieces contribute nothing.
    pub total_fidelity: f64,
    /// Total weight on pieces with a degenerate block.
    pub degenerate_weight: f64,
    /// Per party, the unitary whose rows are the block frames: applying it
    /// maps each qubit block onto the canonical qubit.
    pub rotations: Vec<DenseMatrix>,
    /// Per party, the number of qubit blocks (the junk dimension).
    pub junk_dims: Vec<usize>,
}

impl SelfTestReport {
    /// Hypothesis checked, no weight on degenerate blocks and fidelity
    /// within `tol` of one.
    pub fn certified(&self, tol: f64) -> bool {
        self.mode == SelfTestMode::Exact && self.degenerate_weight <= tol && self.total_fidelity >= 1.0 - tol
    }

    /// Line-oriented summary: `key value` pairs, then one `term` line per
    /// block product (`indices weight fidelity|- matched`).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mode = match self.mode {
            SelfTestMode::Exact => "exact",
            SelfTestMode::Loose => "loose (hypothesis not checked)",
        };
        let _ = writeln!(out, "mode {mode}");
        let _ = writeln!(out, "parties {}", self.n);
        let _ = writeln!(out, "p {:.12}", self.p);
        let _ = writeln!(out, "p_max {:.12}", self.p_max);
        let zeros: Vec<String> = self.zeros.iter().map(|z| format!("{z:.3e}")).collect();
        let _ = writeln!(out, "zeros {}", zeros.join(" "));
        let _ = writeln!(out, "total_fidelity {:.12}", self.total_fidelity);
        let _ = writeln!(out, "degenerate_weight {:.3e}", self.degenerate_weight);
        let junk: Vec<String> = self.junk_dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "junk_dims {}", junk.join(" "));
        for (party, dec) in self.decompositions.iter().enumerate() {
            let angles: Vec<String> = dec
                .blocks
                .iter()
                .map(|b| b.angle.map_or("degenerate".to_string(), |a| format!("{a:.9}")))
                .collect();
            let _ = writeln!(out, "blocks {party} {}", angles.join(" "));
        }
        for t in &self.terms {
            let idx: Vec<String> = t.blocks.iter().map(|b| b.to_string()).collect();
            let fid = t.fidelity.map_or("-".to_string(), |f| format!("{f:.12}"));
            let _ = writeln!(
                out,
                "term {} {:.12} {fid} {}",
                idx.join(","),
                t.weight,
                t.angles_matched
            );
        }
        out
    }
}

/// [`selftest_report_with`] in exact mode with hypothesis tolerance `tol`.
pub fn selftest_report(state: &QuantumState, observables: &[ObservablePair], tol: f64) -> Result<SelfTestReport> {
    selftest_report_with(
        state,
        observables,
        &SelfTestOptions {
            hypothesis_tol: tol,
            ..SelfTestOptions::default()
        },
    )
}

pub fn selftest_report_with(
    state: &QuantumState,
    observables: &[ObservablePair],
    opts: &SelfTestOptions,
) -> Result<SelfTestReport> {
    let dims = state.dims().to_vec();
    let n = dims.len();
    if observables.len() != n {
        return Err(Error::Validation(format!(
            "{} observable pairs for {n} parties",
            observables.len()
        )));
    }
    for (k, (o, &d)) in observables.iter().zip(&dims).enumerate() {
        if o.dim() != d {
            return Err(Error::Validation(format!(
                "party {k}: observables of size {} on a {d}-dimensional system",
                o.dim()
            )));
        }
    }
    let optimum = pmax(n)?;
    let m = MeasurementSet {
        parties: observables.iter().map(|o| o.measurement()).collect::<Result<_>>()?,
    };
    let stats = hardy_statistics(&joint_distribution(state, &m)?)?;
    if opts.mode == SelfTestMode::Exact {
        let tol = opts.hypothesis_tol;
        if stats.p < optimum.p_max - tol {
            return Err(Error::HypothesisUnmet(format!(
                "success probability {:.9} is below p_max = {:.9} by more than {tol:e}",
                stats.p, optimum.p_max
            )));
        }
        if let Some(z) = stats.zeros.iter().find(|&&z| z > tol) {
            return Err(Error::HypothesisUnmet(format!(
                "a Hardy condition is violated by {z:.3e}"
            )));
        }
    }

    let decompositions = observables
        .iter()
        .map(|o| jordan_blocks(o, opts.block_tol))
        .collect::<Result<Vec<_>>>()?;
    let canonical = MeasurementPair::from_alpha_sq(optimum.t)?;
    let target = hardy_state(n, &vec![canonical; n])?;
    let rho = state.density();
    let optimal_angle = (2.0 * optimum.t - 1.0).acos();

    let mut terms = Vec::new();
    let mut index = vec![0usize; n];
    loop {
        let chosen: Vec<&JordanBlock> = index.iter().zip(&decompositions).map(|(&i, d)| &d.blocks[i]).collect();
        let mut w = chosen[0].basis.clone();
        for b in &chosen[1..] {
            w = kron(&w, &b.basis)?;
        }
        // The compressed state W† ρ W; its trace is the block weight.
        let sigma = w.adjoint().matmul(&rho)?.matmul(&w)?;
        let weight = sigma.trace().re;
        let degenerate = chosen.iter().any(|b| b.is_degenerate());
        let fidelity = if degenerate || weight <= WEIGHT_FLOOR {
            None
        } else {
            let h = target.amps();
            let s = sigma.apply(h)?;
            Some((dot(h, &s).re / weight).clamp(0.0, 1.0))
        };
        let angles_matched = chosen
            .iter()
            .all(|b| b.angle.is_some_and(|a| (a - optimal_angle).abs() <= ANGLE_TOL));
        terms.push(BlockTerm {
            blocks: index.clone(),
            weight,
            fidelity,
            angles_matched,
        });

        if !advance(&mut index, &decompositions) {
            break;
        }
    }

    let total_weight: f64 = terms.iter().map(|t| t.weight).sum();
    if (total_weight - 1.0).abs() > 1e-8 {
        return Err(Error::Numeric(format!("block weights sum to {total_weight}")));
    }
    let total_fidelity = terms
        .iter()
        .filter_map(|t| t.fidelity.map(|f| f * t.weight))
        .sum::<f64>()
        .min(1.0);
    let degenerate_weight = terms
        .iter()
        .filter(|t| {
            t.blocks
                .iter()
                .zip(&decompositions)
                .any(|(&b, d)| d.blocks[b].is_degenerate())
        })
        .fold(0.0, |acc, t| acc + t.weight);
    Ok(SelfTestReport {
        mode: opts.mode,
        n,
        p: stats.p,
        zeros: stats.zeros,
        p_max: optimum.p_max,
        rotations: decompositions.iter().map(|d| d.frame().adjoint()).collect(),
        junk_dims: decompositions.iter().map(|d| d.qubit_blocks()).collect(),
        decompositions,
        terms,
        total_fidelity,
        degenerate_weight,
    })
}

/// Odometer step over block choices, last party fastest; false once all
/// combinations have been visited.
fn advance(index: &mut [usize], decs: &[JordanDecomposition]) -> bool {
    for k in (0..index.len()).rev() {
        index[k] += 1;
        if index[k] < decs[k].blocks.len() {
            return true;
        }
        index[k] = 0;
    }
    false
}

/// The canonical optimal Hardy state with its observables.
pub fn canonical_instance(n: usize) -> Result<(StateVector, Vec<ObservablePair>)> {
    let t = pmax(n)?.t;
    let pair = MeasurementPair::from_alpha_sq(t)?;
    let psi = hardy_state(n, &vec![pair; n])?;
    Ok((psi, vec![ObservablePair::from_pair(&pair)?; n]))
}
