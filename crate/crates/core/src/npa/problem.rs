use std::collections::BTreeMap;

use super::monomial::{canonical_monomial, monomial_list, Letter, Monomial};
use crate::behavior::{Scenario, Setting};
use crate::error::{Error, Result};

/// Sparse linear form over moment variables.
pub type SparseRow = Vec<(usize, f64)>;

/// Real-symmetric moment relaxation: maximize `objective · y` subject to
/// `Γ(y) ⪰ 0`, `y[0] = 1`, the equalities and the `≤` inequalities.
///
/// `Γ(y)[i][j] = y[cells[i·size + j]]`. Variable 0 is the identity moment.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentProblem {
    pub size: usize,
    pub num_vars: usize,
    pub cells: Vec<usize>,
    pub objective: SparseRow,
    pub equalities: Vec<(SparseRow, f64)>,
    pub inequalities: Vec<(SparseRow, f64)>,
    /// Monomial basis indexing rows and columns (empty for hand-built problems).
    pub basis: Vec<Monomial>,
    /// Monomial of each variable (empty for hand-built problems).
    pub moments: Vec<Monomial>,
    pub moment_index: BTreeMap<Monomial, usize>,
    /// Basis-space vectors `x` with `Γ x = 0` at every feasible point
    /// (sparse over basis indices). The solver restricts the PSD cone to the
    /// face orthogonal to them.
    pub null_vectors: Vec<SparseRow>,
}

impl MomentProblem {
    /// A problem given directly by its cell map.
    pub fn from_cells(
        size: usize,
        cells: Vec<usize>,
        objective: SparseRow,
        equalities: Vec<(SparseRow, f64)>,
        inequalities: Vec<(SparseRow, f64)>,
    ) -> Result<Self> {
        let num_vars = cells.iter().copied().max().map_or(1, |m| m + 1);
        let p = Self {
            size,
            num_vars,
            cells,
            objective,
            equalities,
            inequalities,
            basis: vec![],
            moments: vec![],
            moment_index: BTreeMap::new(),
            null_vectors: vec![],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation(msg.to_string()));
        if self.size == 0 || self.cells.len() != self.size * self.size {
            return bad("cell map does not match the matrix size");
        }
        if self.cells.iter().any(|&v| v >= self.num_vars) {
            return bad("cell refers to an unknown variable");
        }
        for i in 0..self.size {
            for j in 0..i {
                if self.cells[i * self.size + j] != self.cells[j * self.size + i] {
                    return bad("cell map is not symmetric");
                }
            }
        }
        if !self.cells.contains(&0) {
            return bad("the identity variable 0 must appear in the matrix");
        }
        let rows = std::iter::once(&self.objective)
            .chain(self.equalities.iter().map(|(r, _)| r))
            .chain(self.inequalities.iter().map(|(r, _)| r));
        for row in rows {
            if row.iter().any(|&(v, c)| v >= self.num_vars || !c.is_finite()) {
                return bad("sparse row refers to an unknown variable or is not finite");
            }
        }
        if self
            .null_vectors
            .iter()
            .flatten()
            .any(|&(i, c)| i >= self.size || !c.is_finite())
        {
            return bad("null vector refers to an unknown basis element");
        }
        let bounds = self.equalities.iter().chain(&self.inequalities);
        if bounds.clone().any(|(_, b)| !b.is_finite()) {
            return bad("non-finite constraint bound");
        }
        Ok(())
    }

    /// Γ(y) as a dense row-major array.
    pub fn moment_matrix(&self, y: &[f64]) -> Vec<f64> {
        self.cells.iter().map(|&v| y[v]).collect()
    }

    /// Number of cells mapped to each variable.
    pub fn cell_counts(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.num_vars];
        for &v in &self.cells {
            counts[v] += 1.0;
        }
        counts
    }

    /// Largest violation of `y[0] = 1`, the equalities and the inequalities.
    pub fn affine_violation(&self, y: &[f64]) -> f64 {
        let eval = |row: &SparseRow| row.iter().map(|&(v, c)| c * y[v]).sum::<f64>();
        let mut worst = (y[0] - 1.0).abs();
        for (row, b) in &self.equalities {
            worst = worst.max((eval(row) - b).abs());
        }
        for (row, b) in &self.inequalities {
            worst = worst.max(eval(row) - b);
        }
        worst
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * y[v]).sum()
    }

    fn variable(&self, m: &Monomial) -> Result<usize> {
        self.moment_index
            .get(&m.real_key())
            .copied()
            .ok_or_else(|| Error::Capability(format!("moment of {m} does not appear at this hierarchy level")))
    }
}

/// NPA relaxation of the noisy Hardy problem at an integer `level`.
///
/// Objective `m(A_U B_U …)`; constraints `P(++|D_i, U_{i+1}) ≤ ε` (cyclic)
/// and `P(−…−|D…D) ≤ ε`, with `Π₋ = 1 − Π₊` expanded.
pub fn build_moment_problem(scenario: Scenario, level: usize, epsilon: f64) -> Result<MomentProblem> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Validation(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    if scenario.n > 3 {
        return Err(Error::Scenario(format!(
            "the noisy program is defined for 2 or 3 parties, got {}",
            scenario.n
        )));
    }
    let basis = monomial_list(scenario, level)?;
    let size = basis.len();

    let mut keys = Vec::with_capacity(size * size);
    for u in &basis {
        for v in &basis {
            keys.push(u.adjoint_times(v).real_key());
        }
    }
    let mut moment_index = BTreeMap::new();
    for k in &keys {
        moment_index.entry(k.clone()).or_insert(0);
    }
    for (id, value) in moment_index.values_mut().enumerate() {
        *value = id;
    }
    let moments: Vec<Monomial> = moment_index.keys().cloned().collect();
    let cells = keys.iter().map(|k| moment_index[k]).collect();

    let mut problem = MomentProblem {
        size,
        num_vars: moments.len(),
        cells,
        objective: vec![],
        equalities: vec![],
        inequalities: vec![],
        basis,
        moments,
        moment_index,
        null_vectors: vec![],
    };

    let n = scenario.n;
    let all_u: Vec<Letter> = (0..n).map(|p| Letter::new(p, Setting::U)).collect();
    problem.objective = vec![(problem.variable(&canonical_monomial(&all_u))?, 1.0)];

    for i in 0..n {
        let j = (i + 1) % n;
        let m = canonical_monomial(&[Letter::new(i, Setting::D), Letter::new(j, Setting::U)]);
        problem.inequalities.push((vec![(problem.variable(&m)?, 1.0)], epsilon));
    }
    // Σ_S (−1)^{|S|} m(Π_{i∈S} D_i)
    let mut all_minus = BTreeMap::new();
    for subset in 0..1usize << n {
        let word: Vec<Letter> = (0..n)
            .filter(|p| subset >> p & 1 == 1)
            .map(|p| Letter::new(p, Setting::D))
            .collect();
        let sign = if word.len() % 2 == 0 { 1.0 } else { -1.0 };
        *all_minus
            .entry(problem.variable(&canonical_monomial(&word))?)
            .or_insert(0.0) += sign;
    }
    problem.inequalities.push((all_minus.into_iter().collect(), epsilon));

    if epsilon == 0.0 {
        let mut zero_conditions: Vec<Polynomial> = (0..n)
            .map(|i| {
                vec![(
                    1.0,
                    vec![Letter::new(i, Setting::D), Letter::new((i + 1) % n, Setting::U)],
                )]
            })
            .collect();
        zero_conditions.push(
            (0..1usize << n)
                .map(|subset| {
                    let word: Vec<Letter> = (0..n)
                        .filter(|p| subset >> p & 1 == 1)
                        .map(|p| Letter::new(p, Setting::D))
                        .collect();
                    (if word.len() % 2 == 0 { 1.0 } else { -1.0 }, word)
                })
                .collect(),
        );
        problem.null_vectors = implied_null_vectors(&problem.basis, &zero_conditions);
    }
    Ok(problem)
}

type Polynomial = Vec<(f64, Vec<Letter>)>;

/// Expands `prefix · poly` over the basis; `None` if a term falls outside it.
fn expand(index: &BTreeMap<&Monomial, usize>, prefix: &[Letter], poly: &Polynomial) -> Option<SparseRow> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (c, word) in poly {
        let mut full = prefix.to_vec();
        full.extend_from_slice(word);
        *acc.entry(*index.get(&canonical_monomial(&full))?).or_insert(0.0) += c;
    }
    let row: SparseRow = acc.into_iter().filter(|&(_, c)| c != 0.0).collect();
    (!row.is_empty()).then_some(row)
}

/// Each zero condition `m(O) = 0` with `O` a projector forces `Γ x_O = 0`.
/// The same holds for `x = u·O` whenever `u†u·O` also lies in the basis: then
/// `xᵀΓx = m(O u†u O)` is an entry of `Γ x_O`.
fn implied_null_vectors(basis: &[Monomial], zero_conditions: &[Polynomial]) -> Vec<SparseRow> {
    let index: BTreeMap<&Monomial, usize> = basis.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut out: Vec<SparseRow> = Vec::new();
    for o in zero_conditions {
        for u in basis {
            let mut uu: Vec<Letter> = u.letters().iter().rev().copied().collect();
            uu.extend_from_slice(u.letters());
            if expand(&index, &uu, o).is_none() {
                continue;
            }
            if let Some(row) = expand(&index, u.letters(), o) {
                if !out.contains(&row) {
                    out.push(row);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> Scenario {
        Scenario::new(3).unwrap()
    }

    #[test]
    fn tripartite_level_two_structure() {
        let p = build_moment_problem(tri(), 2, 0.0).unwrap();
        assert_eq!(p.size, 25);
        assert_eq!(p.inequalities.len(), 4);
        assert_eq!(p.objective.len(), 1);
        assert_eq!(p.moments[p.objective[0].0].to_string(), "A_U B_U C_U");
        assert_eq!(p.moments[0], Monomial::identity());
        p.validate().unwrap();
        let all_minus = &p.inequalities[3].0;
        assert_eq!(all_minus.len(), 8);
        assert_eq!(all_minus.iter().map(|t| t.1).sum::<f64>(), 0.0);
    }

    #[test]
    fn bipartite_level_two_is_thirteen() {
        let p = build_moment_problem(Scenario::new(2).unwrap(), 2, 0.0).unwrap();
        assert_eq!(p.size, 13);
        assert_eq!(p.inequalities.len(), 3);
    }

    #[test]
    fn level_one_cannot_express_three_body_moments() {
        assert!(matches!(build_moment_problem(tri(), 1, 0.0), Err(Error::Capability(_))));
    }

    #[test]
    fn cells_follow_the_monomial_algebra() {
        let p = build_moment_problem(tri(), 2, 0.1).unwrap();
        for (i, u) in p.basis.iter().enumerate() {
            for (j, v) in p.basis.iter().enumerate() {
                let id = p.cells[i * p.size + j];
                assert_eq!(id, p.cells[j * p.size + i]);
                assert_eq!(p.moments[id], u.adjoint_times(v).real_key());
            }
        }
        assert_eq!(p.cells[0], 0);
    }

    #[test]
    fn loose_epsilon_makes_constraints_slack() {
        // Any moments in [0, 1] satisfy the single-moment constraints at ε = 1,
        // and the all-minus constraint is a probability under a real state.
        let p = build_moment_problem(tri(), 2, 1.0).unwrap();
        for (row, b) in &p.inequalities[..3] {
            assert_eq!(*b, 1.0);
            assert_eq!(row.len(), 1);
        }
    }

    #[test]
    fn rejects_bad_epsilon_and_hand_built_asymmetry() {
        assert!(matches!(build_moment_problem(tri(), 2, 1.5), Err(Error::Validation(_))));
        assert!(MomentProblem::from_cells(2, vec![0, 1, 2, 0], vec![], vec![], vec![]).is_err());
    }
}
