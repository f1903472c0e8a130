//! Householder tridiagonalization followed by implicit QL iterations.
//!
//! Roughly ten times fewer flops than Jacobi on dense inputs; the moment
//! solver calls it once per iteration.

use super::eigen::SymEigResult;
use super::matrix::RealMatrix;
use crate::error::{Error, Result};

const QL_MAX_ITER: usize = 60;

/// Symmetric eigen-decomposition via Householder reduction and implicit QL.
/// Only the lower triangle of `a` is read.
pub fn eig_sym_tridiagonal(a: &RealMatrix) -> Result<SymEigResult> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::Validation("eigen-decomposition needs a square matrix".into()));
    }
    if a.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("non-finite matrix entry".into()));
    }
    if n == 0 {
        return Ok(SymEigResult {
            eigenvalues: vec![],
            eigenvectors: RealMatrix::zeros(0, 0),
        });
    }
    let mut v = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder(n, &mut v, &mut d, &mut e);
    implicit_ql(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let eigenvectors = RealMatrix::from_fn(n, n, |row, col| v[row * n + order[col]]);
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

fn householder(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for x in d[..i].iter_mut() {
                *x /= scale;
                h += *x * *x;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    // Accumulate the reflections.
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let g: f64 = (0..=i).map(|k| v[at(k, i + 1)] * v[at(k, j)]).sum();
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn implicit_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::Numeric("implicit QL did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d[l + 2..].iter_mut() {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let row = &mut v[k * n..(k + 1) * n];
                        let vh = row[i + 1];
                        row[i + 1] = s * row[i] + c * vh;
                        row[i] = c * row[i] - s * vh;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::eig_sym;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut impl Rng) -> RealMatrix {
        let a = RealMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        RealMatrix::from_fn(n, n, |i, j| a[(i, j)] + a[(j, i)])
    }

    #[test]
    fn agrees_with_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [1, 2, 3, 10, 63, 150] {
            let a = random_symmetric(n, &mut rng);
            let fast = eig_sym_tridiagonal(&a).unwrap();
            let slow = eig_sym(&a, 1e-12).unwrap();
            for (x, y) in fast.eigenvalues.iter().zip(&slow.eigenvalues) {
                assert!((x - y).abs() <= 1e-10 * a.frobenius_norm());
            }
            let v = &fast.eigenvectors;
            assert!(v.t_matmul(v).max_abs_diff(&RealMatrix::identity(n)) <= 1e-10);
            let rec = fast.reconstruct();
            assert!(rec.max_abs_diff(&a) <= 1e-10 * a.frobenius_norm());
        }
    }

    #[test]
    fn handles_degenerate_and_diagonal_inputs() {
        let eig = eig_sym_tridiagonal(&RealMatrix::identity(4)).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0; 4]);
        let eig = eig_sym_tridiagonal(&RealMatrix::diag(&[3.0, -1.0, 0.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![-1.0, 0.0, 3.0]);
        let eig = eig_sym_tridiagonal(&RealMatrix::zeros(3, 3)).unwrap();
        assert_eq!(eig.eigenvalues, vec![0.0; 3]);
    }
}
