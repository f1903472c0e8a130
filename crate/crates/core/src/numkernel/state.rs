use super::eigen::eig_herm;
use super::matrix::{DenseMatrix, C64, ZERO};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;

/// Pure multipartite state. Party 0 is the most significant tensor factor.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl StateVector {
    /// Validating constructor: lengths must agree and the norm must be 1
    /// within 1e-12.
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let psi = Self::unchecked(dims, amps)?;
        let norm_sq = psi.norm_sqr();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!(
                "state has squared norm {norm_sq}, expected 1"
            )));
        }
        Ok(psi)
    }

    /// Scales `amps` to unit norm.
    pub fn normalized(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let mut psi = Self::unchecked(dims, amps)?;
        let norm = psi.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::Validation("cannot normalize the zero vector".into()));
        }
        psi.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(psi)
    }

    fn unchecked(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::Validation("every party needs a positive dimension".into()));
        }
        let total = total_dim(&dims)?;
        if amps.len() != total {
            return Err(Error::Validation(format!(
                "{} amplitudes for total dimension {total}",
                amps.len()
            )));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("non-finite amplitude".into()));
        }
        Ok(Self { dims, amps })
    }

    /// Computational basis state `|index>`.
    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let total = total_dim(&dims)?;
        if index >= total {
            return Err(Error::Validation(format!("basis index {index} out of range")));
        }
        let mut amps = vec![ZERO; total];
        amps[index] = C64::new(1.0, 0.0);
        Self::new(dims, amps)
    }

    /// Product state from single-party vectors.
    pub fn product(factors: &[Vec<C64>]) -> Result<Self> {
        let dims: Vec<usize> = factors.iter().map(Vec::len).collect();
        let mut amps = vec![C64::new(1.0, 0.0)];
        for f in factors {
            amps = amps.iter().flat_map(|a| f.iter().map(move |b| a * b)).collect();
        }
        Self::normalized(dims, amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Tensor product `self ⊗ other` with `other`'s parties appended.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Self { dims, amps }
    }

    pub fn density(&self) -> DenseMatrix {
        DenseMatrix::outer(&self.amps)
    }

    /// Multiplies every amplitude by `phase`.
    pub fn with_global_phase(&self, phase: C64) -> Self {
        Self {
            dims: self.dims.clone(),
            amps: self.amps.iter().map(|a| a * phase).collect(),
        }
    }

    /// Distance to `other` after removing the optimal global phase.
    pub fn distance_up_to_phase(&self, other: &Self) -> f64 {
        let overlap = self.inner(other);
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a * phase - b).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn total_dim(dims: &[usize]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| {
        acc.checked_mul(d)
            .ok_or_else(|| Error::Size("state dimension overflows".into()))
    })
}

/// Applies a single-party operator to the `party` tensor factor of `v`.
pub fn apply_local(op: &DenseMatrix, party: usize, dims: &[usize], v: &[C64]) -> Result<Vec<C64>> {
    let d = *dims
        .get(party)
        .ok_or_else(|| Error::Validation(format!("party {party} out of range")))?;
    if op.rows() != d || op.cols() != d {
        return Err(Error::Validation(format!(
            "local operator is {}x{}, party {party} has dimension {d}",
            op.rows(),
            op.cols()
        )));
    }
    let inner: usize = dims[party + 1..].iter().product();
    let outer: usize = dims[..party].iter().product();
    if v.len() != inner * d * outer {
        return Err(Error::Validation("vector length does not match dimensions".into()));
    }
    let mut out = vec![ZERO; v.len()];
    for o in 0..outer {
        let base = o * d * inner;
        for r in 0..d {
            for c in 0..d {
                let m = op[(r, c)];
                if m == ZERO {
                    continue;
                }
                let src = &v[base + c * inner..base + (c + 1) * inner];
                let dst = &mut out[base + r * inner..base + (r + 1) * inner];
                for (x, y) in dst.iter_mut().zip(src) {
                    *x += m * y;
                }
            }
        }
    }
    Ok(out)
}

/// Reduced matrix on the parties in `keep` (kept in ascending order).
pub fn partial_trace(rho: &DenseMatrix, dims: &[usize], keep: &[usize]) -> Result<DenseMatrix> {
    let total = total_dim(dims)?;
    if !rho.is_square() || rho.rows() != total {
        return Err(Error::Validation(format!(
            "matrix is {}x{}, dimensions multiply to {total}",
            rho.rows(),
            rho.cols()
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Validation("kept party index out of range".into()));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|p| !kept.contains(p)).collect();
    let kdims: Vec<usize> = kept.iter().map(|&p| dims[p]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&p| dims[p]).collect();
    let kdim: usize = kdims.iter().product();
    let tdim: usize = tdims.iter().product();

    // Full index of (kept multi-index, traced multi-index).
    let strides: Vec<usize> = (0..dims.len()).map(|p| dims[p + 1..].iter().product()).collect();
    let compose = |ki: usize, ti: usize| -> usize {
        let mut idx = 0;
        let mut rem = ki;
        for (slot, &p) in kept.iter().enumerate().rev() {
            idx += (rem % kdims[slot]) * strides[p];
            rem /= kdims[slot];
        }
        let mut rem = ti;
        for (slot, &p) in traced.iter().enumerate().rev() {
            idx += (rem % tdims[slot]) * strides[p];
            rem /= tdims[slot];
        }
        idx
    };

    let mut out = DenseMatrix::zeros(kdim, kdim);
    for t in 0..tdim {
        let rows: Vec<usize> = (0..kdim).map(|k| compose(k, t)).collect();
        for (i, &ri) in rows.iter().enumerate() {
            for (j, &rj) in rows.iter().enumerate() {
                out[(i, j)] += rho[(ri, rj)];
            }
        }
    }
    Ok(out)
}

/// Eigenvalues of the reduced state on `bipartition`, descending.
pub fn schmidt_spectrum(psi: &StateVector, bipartition: &[usize], tol: f64) -> Result<Vec<f64>> {
    let n = psi.parties();
    let mut side: Vec<usize> = bipartition.to_vec();
    side.sort_unstable();
    side.dedup();
    if side.is_empty() || side.len() >= n || side.iter().any(|&p| p >= n) {
        return Err(Error::Validation(
            "bipartition must be a nonempty proper subset of the parties".into(),
        ));
    }
    if (psi.norm_sqr() - 1.0).abs() > tol.max(NORM_TOL) {
        return Err(Error::Validation("state is not normalized".into()));
    }
    let reduced = partial_trace(&psi.density(), psi.dims(), &side)?;
    let eig = eig_herm(&reduced, 1e-10)?;
    let mut spectrum: Vec<f64> = eig.eigenvalues.into_iter().map(|x| x.max(0.0)).collect();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    Ok(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn ghz3() -> StateVector {
        let mut amps = vec![ZERO; 8];
        amps[0] = c(1.0);
        amps[7] = c(1.0);
        StateVector::normalized(vec![2, 2, 2], amps).unwrap()
    }

    fn random_density(dims: &[usize], rng: &mut impl Rng) -> DenseMatrix {
        let d: usize = dims.iter().product();
        let g = DenseMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let rho = g.matmul(&g.adjoint()).unwrap();
        let tr = rho.trace();
        rho.scale(tr.inv())
    }

    #[test]
    fn product_state_reduces_to_pure() {
        let rho = StateVector::basis(vec![2, 2], 0).unwrap().density();
        let r = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert_eq!(r, DenseMatrix::diag(&[1.0, 0.0]));
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let bell = StateVector::normalized(vec![2, 2], vec![c(1.0), ZERO, ZERO, c(1.0)]).unwrap();
        let r = partial_trace(&bell.density(), &[2, 2], &[0]).unwrap();
        assert!(r.max_abs_diff(&DenseMatrix::diag(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn partial_trace_respects_party_order() {
        // |0> ⊗ |+> ⊗ |1>: keeping party 2 gives |1><1|.
        let s = 0.5f64.sqrt();
        let psi = StateVector::product(&[vec![c(1.0), ZERO], vec![c(s), c(s)], vec![ZERO, c(1.0)]]).unwrap();
        let r = partial_trace(&psi.density(), psi.dims(), &[2]).unwrap();
        assert!(r.max_abs_diff(&DenseMatrix::diag(&[0.0, 1.0])) < 1e-15);
        let r = partial_trace(&psi.density(), psi.dims(), &[1]).unwrap();
        assert!(r.max_abs_diff(&DenseMatrix::from_fn(2, 2, |_, _| c(0.5))) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let rho = DenseMatrix::identity(4);
        assert!(matches!(partial_trace(&rho, &[2, 3], &[0]), Err(Error::Validation(_))));
    }

    #[test]
    fn schmidt_examples() {
        let s = schmidt_spectrum(&StateVector::basis(vec![2, 2, 2], 0).unwrap(), &[0], 1e-12).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12 && s[1].abs() < 1e-12);
        let s = schmidt_spectrum(&ghz3(), &[0], 1e-12).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-12 && (s[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn schmidt_rejects_trivial_bipartitions() {
        assert!(schmidt_spectrum(&ghz3(), &[], 1e-12).is_err());
        assert!(schmidt_spectrum(&ghz3(), &[0, 1, 2], 1e-12).is_err());
    }

    #[test]
    fn apply_local_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = [2, 3, 2];
        let op = DenseMatrix::from_fn(3, 3, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let v: Vec<C64> = (0..12).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
        let full = super::super::kron(
            &super::super::kron(&DenseMatrix::identity(2), &op).unwrap(),
            &DenseMatrix::identity(2),
        )
        .unwrap();
        let want = full.apply(&v).unwrap();
        let got = apply_local(&op, 1, &dims, &v).unwrap();
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn partial_trace_is_linear_and_trace_preserving(seed in any::<u64>(), keep in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dims = [2, 3, 2];
            let a = random_density(&dims, &mut rng);
            let b = random_density(&dims, &mut rng);
            let ra = partial_trace(&a, &dims, &[keep]).unwrap();
            prop_assert!((ra.trace() - a.trace()).norm() <= 1e-12);
            let mix = a.scale(c(0.3)).add(&b.scale(c(0.7))).unwrap();
            let rmix = partial_trace(&mix, &dims, &[keep]).unwrap();
            let rb = partial_trace(&b, &dims, &[keep]).unwrap();
            let lin = ra.scale(c(0.3)).add(&rb.scale(c(0.7))).unwrap();
            prop_assert!(rmix.max_abs_diff(&lin) <= 1e-12);
        }

        #[test]
        fn kron_is_associative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = || DenseMatrix::from_fn(2, 2, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let (a, b, cc) = (m(), m(), m());
            use super::super::kron;
            let left = kron(&kron(&a, &b).unwrap(), &cc).unwrap();
            let right = kron(&a, &kron(&b, &cc).unwrap()).unwrap();
            prop_assert!(left.max_abs_diff(&right) <= 1e-12);
        }
    }
}
