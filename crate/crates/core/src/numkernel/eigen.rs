use super::matrix::{DenseMatrix, RealMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Relative off-diagonal mass at which Jacobi sweeps stop.
const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `eigenvalues`.
    pub eigenvectors: RealMatrix,
}

impl SymEigResult {
    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> RealMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = RealMatrix::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = w * v[(i, k)];
                if vik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> RealMatrix {
        self.reconstruct_with(|x| x)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations with threshold
/// sweeps. `tol` bounds the admissible asymmetry of the input.
pub fn eig_sym(a: &RealMatrix, tol: f64) -> Result<SymEigResult> {
    validate_symmetric(a, tol)?;
    let n = a.rows();
    let mut work = a.clone();
    symmetrize(&mut work);
    let vt = RealMatrix::identity(n);
    jacobi_in_place(work, vt)
}

/// Same as [`eig_sym`] but starts from an orthogonal guess whose columns are
/// approximate eigenvectors; converges in a few sweeps when the guess is good.
pub fn eig_sym_from_guess(a: &RealMatrix, guess: &RealMatrix, tol: f64) -> Result<SymEigResult> {
    validate_symmetric(a, tol)?;
    if guess.rows() != a.rows() || guess.cols() != a.cols() {
        return Err(Error::Validation("eigenvector guess has the wrong shape".into()));
    }
    // B = Gᵀ A G, then rotate G's columns alongside B.
    let mut b = guess.t_matmul(&a.matmul(guess));
    symmetrize(&mut b);
    jacobi_in_place(b, guess.transpose())
}

fn validate_symmetric(a: &RealMatrix, tol: f64) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::Validation(format!(
            "eigen-decomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if a.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("non-finite matrix entry".into()));
    }
    if !a.is_symmetric(tol) {
        return Err(Error::Validation("matrix is not symmetric within tolerance".into()));
    }
    Ok(())
}

fn symmetrize(a: &mut RealMatrix) {
    let n = a.rows();
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

fn off_diagonal_norm(a: &RealMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    (2.0 * s).sqrt()
}

/// Runs Jacobi on `a`, accumulating rotations into the rows of `vt`
/// (rows of `vt` are the eigenvectors).
fn jacobi_in_place(mut a: RealMatrix, mut vt: RealMatrix) -> Result<SymEigResult> {
    let n = a.rows();
    let norm = a.frobenius_norm();
    let target = JACOBI_REL_TOL * norm;

    let mut converged = norm == 0.0 || off_diagonal_norm(&a) <= target;
    let mut sweep = 0;
    while !converged {
        if sweep == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
        let off = off_diagonal_norm(&a);
        // Early sweeps only touch the large entries.
        let threshold = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= threshold {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if sweep > 3 && 1e3 * apq.abs() + app.abs() == app.abs() && 1e3 * apq.abs() + aqq.abs() == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotate(&mut a, &mut vt, p, q);
            }
        }
        sweep += 1;
        converged = off_diagonal_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = RealMatrix::from_fn(n, n, |row, col| vt[(order[col], row)]);
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

fn rotate(a: &mut RealMatrix, vt: &mut RealMatrix, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = akp - s * (akq + tau * akp);
        let new_kq = akq + s * (akp - tau * akq);
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    let cols = vt.cols();
    let data = vt.as_mut_slice();
    let (lo, hi) = data.split_at_mut(q * cols);
    let row_p = &mut lo[p * cols..(p + 1) * cols];
    let row_q = &mut hi[..cols];
    for (vp, vq) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let (x, y) = (*vp, *vq);
        *vp = x - s * (y + tau * x);
        *vq = y + s * (x - tau * y);
    }
}

/// Nearest positive-semidefinite matrix in Frobenius norm: `V · max(Λ, 0) · Vᵀ`.
pub fn psd_project(a: &RealMatrix) -> Result<RealMatrix> {
    let eig = eig_sym(a, 1e-9 * a.frobenius_norm().max(1.0))?;
    Ok(clip_negative(a, &eig))
}

/// Builds the projection from a precomputed decomposition of `a`, subtracting
/// the negative part when it is the smaller of the two.
pub(crate) fn clip_negative(a: &RealMatrix, eig: &SymEigResult) -> RealMatrix {
    let negatives = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if negatives == 0 {
        let mut out = a.clone();
        symmetrize(&mut out);
        return out;
    }
    if 2 * negatives <= eig.eigenvalues.len() {
        let neg = eig.reconstruct_with(|l| l.min(0.0));
        let mut out = RealMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] - neg[(i, j)]);
        symmetrize(&mut out);
        out
    } else {
        eig.reconstruct_with(|l| l.max(0.0))
    }
}

/// Eigen-decomposition of a complex Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub eigenvectors: DenseMatrix,
}

/// Hermitian eigen-decomposition through the real-symmetric embedding
/// `[[Re, -Im], [Im, Re]]`. Each eigenvalue of the embedding appears twice;
/// the pairs are merged and one complex vector kept per multiplicity.
pub fn eig_herm(a: &DenseMatrix, tol: f64) -> Result<HermEigResult> {
    if !a.is_square() {
        return Err(Error::Validation(
            "Hermitian eigen-decomposition needs a square matrix".into(),
        ));
    }
    if !a.is_hermitian(tol) {
        return Err(Error::Validation("matrix is not Hermitian within tolerance".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(HermEigResult {
            eigenvalues: vec![],
            eigenvectors: DenseMatrix::zeros(0, 0),
        });
    }
    let emb = a.real_embedding();
    let eig = eig_sym(&emb, tol.max(1e-12))?;
    let scale = emb.frobenius_norm().max(1.0);
    let cluster_tol = 1e-9 * scale;

    let mut eigenvalues = Vec::with_capacity(n);
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < 2 * n {
        let mut end = start + 1;
        while end < 2 * n && eig.eigenvalues[end] - eig.eigenvalues[end - 1] <= cluster_tol {
            end += 1;
        }
        let size = end - start;
        if size % 2 != 0 {
            return Err(Error::Numeric(
                "could not pair the doubled spectrum of the real embedding".into(),
            ));
        }
        let mean = eig.eigenvalues[start..end].iter().sum::<f64>() / size as f64;
        let mut kept: Vec<Vec<C64>> = Vec::with_capacity(size / 2);
        for k in start..end {
            if kept.len() == size / 2 {
                break;
            }
            let mut z: Vec<C64> = (0..n)
                .map(|i| C64::new(eig.eigenvectors[(i, k)], eig.eigenvectors[(i + n, k)]))
                .collect();
            for prev in &kept {
                let overlap: C64 = prev.iter().zip(&z).map(|(p, x)| p.conj() * x).sum();
                for (x, p) in z.iter_mut().zip(prev) {
                    *x -= overlap * p;
                }
            }
            let norm = z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.5 {
                z.iter_mut().for_each(|x| *x /= norm);
                kept.push(z);
            }
        }
        if kept.len() != size / 2 {
            return Err(Error::Numeric("lost rank while merging embedded eigenvectors".into()));
        }
        for z in kept {
            eigenvalues.push(mean);
            columns.push(z);
        }
        start = end;
    }
    let eigenvectors = DenseMatrix::from_fn(n, n, |i, j| columns[j][i]);
    Ok(HermEigResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Orthonormalizes `v` against `basis` (modified Gram–Schmidt, two passes)
/// and returns the residual norm before normalization.
pub(crate) fn orthonormalize_against(v: &mut [C64], basis: &[Vec<C64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let overlap: C64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= overlap * y;
            }
        }
    }
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v.iter_mut().for_each(|x| *x = ZERO);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn givens(n: usize, p: usize, q: usize, angle: f64) -> RealMatrix {
        let mut g = RealMatrix::identity(n);
        g[(p, p)] = angle.cos();
        g[(q, q)] = angle.cos();
        g[(p, q)] = -angle.sin();
        g[(q, p)] = angle.sin();
        g
    }

    fn random_symmetric(n: usize, rng: &mut impl Rng) -> RealMatrix {
        let mut a = RealMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.gen_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    fn check_decomposition(a: &RealMatrix, eig: &SymEigResult) {
        let n = a.rows();
        let anorm = a.frobenius_norm().max(f64::MIN_POSITIVE);
        let v = &eig.eigenvectors;
        let vtv = v.t_matmul(v);
        assert!(vtv.max_abs_diff(&RealMatrix::identity(n)) <= 1e-10);
        let rec = eig.reconstruct();
        let diff = RealMatrix::from_fn(n, n, |i, j| rec[(i, j)] - a[(i, j)]);
        assert!(diff.frobenius_norm() <= 1e-10 * anorm.max(1.0));
        for k in 0..n {
            let col = v.column(k);
            let mut res = 0.0;
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[(i, j)] * col[j]).sum();
                res += (av - eig.eigenvalues[k] * col[i]).powi(2);
            }
            assert!(res.sqrt() <= 1e-10 * anorm.max(1.0));
        }
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn identity_spectrum() {
        let eig = eig_sym(&RealMatrix::identity(3), 1e-12).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn pauli_x_spectrum() {
        let x = RealMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let eig = eig_sym(&x, 1e-12).unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rotated_diagonal_recovers_spectrum() {
        // Q diag(5, -2, 0) Qᵀ with Q a product of Givens rotations.
        let q = givens(3, 0, 1, 0.7)
            .matmul(&givens(3, 1, 2, -1.3))
            .matmul(&givens(3, 0, 2, 2.1));
        let a = q.matmul(&RealMatrix::diag(&[5.0, -2.0, 0.0])).matmul(&q.transpose());
        let eig = eig_sym(&a, 1e-12).unwrap();
        for (got, want) in eig.eigenvalues.iter().zip([-2.0, 0.0, 5.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        check_decomposition(&a, &eig);
    }

    #[test]
    fn rejects_non_symmetric_input() {
        let a = RealMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(eig_sym(&a, 1e-12), Err(Error::Validation(_))));
    }

    #[test]
    fn random_symmetric_up_to_200() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 17, 64, 200] {
            let a = random_symmetric(n, &mut rng);
            let eig = eig_sym(&a, 1e-12).unwrap();
            check_decomposition(&a, &eig);
        }
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_symmetric(30, &mut rng);
        let cold = eig_sym(&a, 1e-12).unwrap();
        let perturbed = RealMatrix::from_fn(30, 30, |i, j| a[(i, j)] + 1e-3 * ((i + j) as f64).sin());
        let warm = eig_sym_from_guess(&perturbed, &cold.eigenvectors, 1e-12).unwrap();
        check_decomposition(&perturbed, &warm);
    }

    #[test]
    fn psd_projection_examples() {
        let p = psd_project(&RealMatrix::diag(&[2.0, -3.0])).unwrap();
        assert!(p.max_abs_diff(&RealMatrix::diag(&[2.0, 0.0])) < 1e-14);
        let p = psd_project(&RealMatrix::diag(&[-1.0, -1.0])).unwrap();
        assert!(p.max_abs_diff(&RealMatrix::zeros(2, 2)) < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_symmetric(6, &mut rng);
        let psd = b.t_matmul(&b);
        assert!(psd_project(&psd).unwrap().max_abs_diff(&psd) < 1e-10);
    }

    #[test]
    fn hermitian_spectrum_deduplicates_pairs() {
        // Pauli Y has eigenvalues ±1.
        let y = DenseMatrix::from_vec(2, 2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]).unwrap();
        let eig = eig_herm(&y, 1e-12).unwrap();
        assert_eq!(eig.eigenvalues.len(), 2);
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-12);
        for k in 0..2 {
            let v = eig.eigenvectors.column(k);
            let yv = y.apply(&v).unwrap();
            for (a, b) in yv.iter().zip(&v) {
                assert!((a - b * eig.eigenvalues[k]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hermitian_degenerate_eigenspace_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // U diag(1,1,-1,2) U† with a random unitary from Gram–Schmidt.
        let mut cols: Vec<Vec<C64>> = Vec::new();
        while cols.len() < 4 {
            let mut v: Vec<C64> = (0..4)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            if orthonormalize_against(&mut v, &cols) > 1e-3 {
                cols.push(v);
            }
        }
        let u = DenseMatrix::from_columns(&cols).unwrap();
        let h = u
            .matmul(&DenseMatrix::diag(&[1.0, 1.0, -1.0, 2.0]))
            .unwrap()
            .matmul(&u.adjoint())
            .unwrap();
        let eig = eig_herm(&h, 1e-10).unwrap();
        let want = [-1.0, 1.0, 1.0, 2.0];
        for (g, w) in eig.eigenvalues.iter().zip(want) {
            assert!((g - w).abs() < 1e-10);
        }
        let v = &eig.eigenvectors;
        assert!(v.adjoint().matmul(v).unwrap().max_abs_diff(&DenseMatrix::identity(4)) < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn psd_projection_is_idempotent(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_symmetric(n, &mut rng);
            let once = psd_project(&a).unwrap();
            let twice = psd_project(&once).unwrap();
            prop_assert!(once.max_abs_diff(&twice) <= 1e-10);
        }
    }
}
