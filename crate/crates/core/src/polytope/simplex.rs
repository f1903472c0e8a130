//! Dense two-phase primal simplex with Bland's anti-cycling rule.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self { coeffs, relation, rhs }
    }
}

/// `maximize objective·x` subject to the constraints and
/// `lower[j] ≤ x_j ≤ upper[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Finite lower bounds.
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    /// All variables in `[0, ∞)`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
        self
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj);
            if let Some(u) = self.upper[j] {
                worst = worst.max(xj - u);
            }
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Validation(
                "bound vectors do not match the variable count".into(),
            ));
        }
        let finite = |x: &f64| x.is_finite();
        if !self.objective.iter().all(finite) || !self.lower.iter().all(finite) {
            return Err(Error::Validation("non-finite objective or lower bound".into()));
        }
        if self.upper.iter().flatten().any(|u| !u.is_finite()) {
            return Err(Error::Validation("non-finite upper bound".into()));
        }
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(Error::Validation(
                    "constraint length does not match the variable count".into(),
                ));
            }
            if !c.coeffs.iter().all(finite) || !c.rhs.is_finite() {
                return Err(Error::Validation("non-finite constraint entry".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LPSolution {
    pub status: LpStatus,
    pub value: f64,
    pub assignment: Vec<f64>,
}

impl LPSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (x, y) in r.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Maximizes `cost·x` over columns flagged in `allowed`, Bland's rule.
    fn run(&mut self, cost: &[f64], allowed: &[bool]) -> Result<Outcome> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::Numeric(format!(
                    "simplex exceeded {MAX_PIVOTS} pivots (cycling guard)"
                )));
            }
            let entering = (0..self.cols).find(|&j| {
                allowed[j] && !self.basis.contains(&j) && {
                    let reduced = cost[j]
                        - self
                            .basis
                            .iter()
                            .enumerate()
                            .map(|(i, &b)| cost[b] * self.t[i][j])
                            .sum::<f64>();
                    reduced > COST_TOL
                }
            });
            let Some(col) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Ok(Outcome::Unbounded),
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }
}

/// Two-phase primal simplex.
pub fn lp_solve(lp: &LinearProgram) -> Result<LPSolution> {
    lp.validate()?;
    let nv = lp.num_vars();

    // Shift to y = x - lower ≥ 0 and turn finite upper bounds into rows.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let shift: f64 = c.coeffs.iter().zip(&lp.lower).map(|(a, l)| a * l).sum();
        rows.push((c.coeffs.clone(), c.relation, c.rhs - shift));
    }
    for j in 0..nv {
        if let Some(u) = lp.upper[j] {
            let mut coeffs = vec![0.0; nv];
            coeffs[j] = 1.0;
            rows.push((coeffs, Relation::Le, u - lp.lower[j]));
        }
    }
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|a| *a = -*a);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = nv + n_slack + n_art;
    let art_start = nv + n_slack;

    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let (mut next_slack, mut next_art) = (nv, art_start);
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        t[i][..nv].copy_from_slice(coeffs);
        t[i][cols] = *rhs;
        match rel {
            Relation::Le => {
                t[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t[i][next_slack] = -1.0;
                next_slack += 1;
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    let mut tab = Tableau {
        t,
        basis,
        cols,
        pivots: 0,
    };

    // Phase 1: maximize -Σ artificials.
    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        cost[art_start..].iter_mut().for_each(|c| *c = -1.0);
        let all = vec![true; cols];
        tab.run(&cost, &all)?;
        let infeasibility: f64 = (0..tab.t.len())
            .filter(|&i| tab.basis[i] >= art_start)
            .map(|i| tab.rhs(i))
            .sum();
        if infeasibility > PHASE_ONE_TOL {
            return Ok(LPSolution {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                assignment: vec![],
            });
        }
        // Drive remaining (zero-level) artificials out; drop redundant rows.
        let mut i = 0;
        while i < tab.t.len() {
            if tab.basis[i] >= art_start {
                let col = (0..art_start).find(|&j| tab.t[i][j].abs() > 1e-9);
                match col {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.t.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    // Phase 2.
    let mut cost = vec![0.0; cols];
    cost[..nv].copy_from_slice(&lp.objective);
    let allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
    if let Outcome::Unbounded = tab.run(&cost, &allowed)? {
        return Ok(LPSolution {
            status: LpStatus::Unbounded,
            value: f64::INFINITY,
            assignment: vec![],
        });
    }

    let mut x = lp.lower.clone();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < nv {
            x[b] += tab.rhs(i);
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let violation = lp.max_violation(&x);
    if violation > 1e-9 {
        return Err(Error::Numeric(format!(
            "simplex returned a point violating constraints by {violation:.3e}"
        )));
    }
    Ok(LPSolution {
        status: LpStatus::Optimal,
        value,
        assignment: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_bound() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![1.0], Relation::Le, 3.0);
        let s = lp_solve(&lp).unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_on_two_variables() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add(vec![1.0, 1.0], Relation::Le, 1.0);
        let s = lp_solve(&lp).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(lp.max_violation(&s.assignment) <= 1e-9);
    }

    #[test]
    fn infeasible_system() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![1.0], Relation::Le, -1.0);
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_system() {
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.add(vec![-1.0, 1.0], Relation::Le, 1.0);
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equalities_bounds_and_redundancy() {
        // max 2x + 3y, x + y = 4 (stated twice), x - y ≥ -2, 1 ≤ x, y ≤ 2.5
        let mut lp = LinearProgram::new(vec![2.0, 3.0]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 4.0);
        lp.add(vec![2.0, 2.0], Relation::Eq, 8.0);
        lp.add(vec![1.0, -1.0], Relation::Ge, -2.0);
        lp.lower = vec![1.0, 0.0];
        lp.upper = vec![None, Some(2.5)];
        let s = lp_solve(&lp).unwrap();
        assert!(s.is_optimal());
        // y = 2.5 is cut by x - y ≥ -2 → y ≤ 3; bound wins: x = 1.5, y = 2.5.
        assert!((s.value - (2.0 * 1.5 + 3.0 * 2.5)).abs() < 1e-9);
        assert!(lp.max_violation(&s.assignment) <= 1e-9);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic Beale cycling example (cycles under Dantzig's rule).
        let mut lp = LinearProgram::new(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = lp_solve(&lp).unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 0.05).abs() < 1e-9);
    }
}
