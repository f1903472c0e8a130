//! Linear programs over the local and no-signaling polytopes of the noisy
//! Hardy problem.

mod simplex;

pub use simplex::{lp_solve, Constraint, LPSolution, LinearProgram, LpStatus, Relation};

use crate::behavior::{BehaviorTensor, Outcome, Scenario};
use crate::error::{Error, Result};

/// Largest party count for which the 4ⁿ vertices are enumerated.
pub const MAX_VERTEX_PARTIES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub n: usize,
    pub epsilon: f64,
}

impl BoundQuery {
    pub fn new(n: usize, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Validation(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        if !(2..=3).contains(&n) {
            return Err(Error::Scenario(format!(
                "noisy bounds are available for n = 2 or 3, got {n}"
            )));
        }
        Ok(Self { n, epsilon })
    }
}

/// All 4ⁿ deterministic local strategies.
pub fn deterministic_vertices(n: usize) -> Result<Vec<BehaviorTensor>> {
    if n > MAX_VERTEX_PARTIES {
        return Err(Error::Size(format!(
            "vertex enumeration is limited to n ≤ {MAX_VERTEX_PARTIES}, got {n}"
        )));
    }
    let sc = Scenario::new(n)?;
    let outcome = |bit: usize| if bit == 0 { Outcome::Plus } else { Outcome::Minus };
    (0..1usize << (2 * n))
        .map(|code| {
            let table: Vec<[Outcome; 2]> = (0..n)
                .map(|party| {
                    let bits = code >> (2 * party);
                    [outcome(bits & 1), outcome((bits >> 1) & 1)]
                })
                .collect();
            BehaviorTensor::deterministic(sc, &table)
        })
        .collect()
}

/// Hardy success probability and zero conditions as linear functionals on
/// the behavior entries (same order as `hardy_statistics`).
pub fn hardy_functionals(sc: Scenario) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = sc.strings();
    let n = sc.n;
    let mut p = vec![0.0; m * m];
    p[0] = 1.0;
    let mut zeros = Vec::with_capacity(n + 1);
    for i in 0..n {
        let j = (i + 1) % n;
        let s = 1 << sc.shift(i);
        let kept = (1 << sc.shift(i)) | (1 << sc.shift(j));
        let mut f = vec![0.0; m * m];
        for o in (0..m).filter(|o| o & kept == 0) {
            f[s * m + o] = 1.0;
        }
        zeros.push(f);
    }
    let mut all_minus = vec![0.0; m * m];
    all_minus[(m - 1) * m + (m - 1)] = 1.0;
    zeros.push(all_minus);
    (p, zeros)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximum Hardy probability over local hidden-variable models whose zero
/// conditions are each at most ε. Posed over vertex weights.
pub fn local_max(q: BoundQuery) -> Result<LPSolution> {
    let q = BoundQuery::new(q.n, q.epsilon)?;
    let sc = Scenario::new(q.n)?;
    let vertices = deterministic_vertices(q.n)?;
    let (p, zeros) = hardy_functionals(sc);
    let objective: Vec<f64> = vertices.iter().map(|v| dot(&p, v.probs())).collect();
    let mut lp = LinearProgram::new(objective);
    lp.add(vec![1.0; vertices.len()], Relation::Eq, 1.0);
    for z in &zeros {
        let row = vertices.iter().map(|v| dot(z, v.probs())).collect();
        lp.add(row, Relation::Le, q.epsilon);
    }
    lp_solve(&lp)
}

/// Builds the no-signaling LP over behavior entries.
pub fn nosignaling_program(q: BoundQuery) -> Result<LinearProgram> {
    let q = BoundQuery::new(q.n, q.epsilon)?;
    let sc = Scenario::new(q.n)?;
    let m = sc.strings();
    let full = m - 1;
    let (p, zeros) = hardy_functionals(sc);
    let mut lp = LinearProgram::new(p);

    for s in 0..m {
        let mut row = vec![0.0; m * m];
        row[s * m..(s + 1) * m].iter_mut().for_each(|x| *x = 1.0);
        lp.add(row, Relation::Eq, 1.0);
    }
    // Every marginal of every proper party subset, compared between each pair
    // of settings of the complement.
    for kept in 1..full {
        let rest = full & !kept;
        let kept_settings: Vec<usize> = (0..m).filter(|s| s & rest == 0).collect();
        let rest_settings: Vec<usize> = (0..m).filter(|s| s & kept == 0).collect();
        let kept_outcomes = kept_settings.clone();
        for &sk in &kept_settings {
            for &ok in &kept_outcomes {
                for (a, &r1) in rest_settings.iter().enumerate() {
                    for &r2 in &rest_settings[a + 1..] {
                        let mut row = vec![0.0; m * m];
                        for o in (0..m).filter(|o| o & kept == ok) {
                            row[(sk | r1) * m + o] += 1.0;
                            row[(sk | r2) * m + o] -= 1.0;
                        }
                        lp.add(row, Relation::Eq, 0.0);
                    }
                }
            }
        }
    }
    for z in zeros {
        lp.add(z, Relation::Le, q.epsilon);
    }
    Ok(lp)
}

/// Maximum Hardy probability over no-signaling behaviors.
pub fn nosignaling_max(q: BoundQuery) -> Result<LPSolution> {
    lp_solve(&nosignaling_program(q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::{check_no_signaling, hardy_statistics};

    #[test]
    fn vertex_counts() {
        assert_eq!(deterministic_vertices(2).unwrap().len(), 16);
        assert_eq!(deterministic_vertices(3).unwrap().len(), 64);
        assert!(matches!(deterministic_vertices(5), Err(Error::Size(_))));
    }

    #[test]
    fn vertices_are_distinct_and_no_signaling() {
        let vs = deterministic_vertices(3).unwrap();
        for (i, a) in vs.iter().enumerate() {
            assert_eq!(check_no_signaling(a, 0.0).max_violation, 0.0);
            for b in &vs[i + 1..] {
                assert_ne!(a.probs(), b.probs());
            }
        }
    }

    #[test]
    fn functionals_agree_with_statistics() {
        let sc = Scenario::new(3).unwrap();
        let (p, zeros) = hardy_functionals(sc);
        for v in deterministic_vertices(3).unwrap() {
            let stats = hardy_statistics(&v).unwrap();
            assert_eq!(dot(&p, v.probs()), stats.p);
            for (z, expected) in zeros.iter().zip(&stats.zeros) {
                assert_eq!(dot(z, v.probs()), *expected);
            }
        }
    }

    #[test]
    fn query_validation() {
        assert!(matches!(BoundQuery::new(3, -0.1), Err(Error::Validation(_))));
        assert!(matches!(BoundQuery::new(3, 1.5), Err(Error::Validation(_))));
        assert!(matches!(BoundQuery::new(4, 0.1), Err(Error::Scenario(_))));
    }

    #[test]
    fn local_examples() {
        let at = |e| local_max(BoundQuery { n: 3, epsilon: e }).unwrap().value;
        assert!(at(0.0).abs() < 1e-9);
        assert!((at(0.05) - 0.2).abs() < 1e-9);
        assert!((at(0.30) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nosignaling_examples() {
        let at = |e| nosignaling_max(BoundQuery { n: 3, epsilon: e }).unwrap();
        let top = at(0.25);
        assert!((top.value - 1.0).abs() < 1e-9);
        let zero = at(0.0);
        assert!(zero.is_optimal());
        assert!(zero.value >= 0.018193827729559325 - 1e-9 && zero.value <= 1.0);
    }

    #[test]
    fn bipartite_local_bound_vanishes_at_zero() {
        let s = local_max(BoundQuery { n: 2, epsilon: 0.0 }).unwrap();
        assert!(s.value.abs() < 1e-9);
    }
}
