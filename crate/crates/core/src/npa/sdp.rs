//! Operator-splitting (ADMM) solver for the moment relaxation.
//!
//! Splits `Γ(y) = X, X ⪰ 0` and `K y + s = h, s ≥ 0`. The `y`-step is an
//! exact least-squares solve: `Γ*Γ` is diagonal (cell counts) and `K` has a
//! handful of rows, so Woodbury reduces it to a tiny dense system. The
//! `X`-step is a PSD projection.

use super::problem::MomentProblem;
use crate::error::{Error, Result};
use crate::numkernel::{clip_negative, eig_sym, eig_sym_tridiagonal, RealMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty.
    pub rho: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    /// Rebalance `rho` from the residual ratio.
    pub adapt_rho: bool,
    pub check_every: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200_000,
            rho: 1.0,
            relaxation: 1.6,
            adapt_rho: true,
            check_every: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSolution {
    /// `objective · moments`.
    pub value: f64,
    pub moments: Vec<f64>,
    /// `max(0, −λ_min(Γ(y)))`.
    pub psd_residual: f64,
    /// Largest violation of the affine constraints.
    pub affine_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Lagrangian bound built from the solver's multipliers; an upper bound
    /// on the optimum whenever feasible moments lie in `[−1, 1]`.
    pub dual_bound: f64,
}

/// Iterate state, reusable as a warm start for a neighbouring problem.
#[derive(Debug, Clone)]
pub struct SdpState {
    y: Vec<f64>,
    x: Vec<f64>,
    u: Vec<f64>,
    s: Vec<f64>,
    w: Vec<f64>,
    rho: f64,
}

struct Affine {
    /// Dense rows over free variables `1..num_vars`.
    k: Vec<Vec<f64>>,
    /// Right-hand side with the identity column moved over.
    h: Vec<f64>,
    is_eq: Vec<bool>,
    /// Original rows over all variables with their bounds.
    full: Vec<(Vec<(usize, f64)>, f64)>,
}

struct LinearSolve {
    dinv: Vec<f64>,
    /// Inverse of `I + K D⁻¹ Kᵀ`.
    schur_inv: Vec<Vec<f64>>,
}

impl LinearSolve {
    fn new(counts: &[f64], aff: &Affine) -> Result<Self> {
        let dinv: Vec<f64> = counts[1..].iter().map(|c| 1.0 / c).collect();
        let m = aff.k.len();
        let mut s = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in 0..m {
                let dot: f64 = aff.k[a]
                    .iter()
                    .zip(&aff.k[b])
                    .zip(&dinv)
                    .map(|((x, y), d)| x * y * d)
                    .sum();
                s[a][b] = dot + if a == b { 1.0 } else { 0.0 };
            }
        }
        Ok(Self {
            dinv,
            schur_inv: invert(s)?,
        })
    }

    /// Solves `(D + KᵀK) y = r` over the free variables.
    fn solve(&self, aff: &Affine, r: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = r.iter().zip(&self.dinv).map(|(a, d)| a * d).collect();
        let kz: Vec<f64> = aff
            .k
            .iter()
            .map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect();
        let t: Vec<f64> = self
            .schur_inv
            .iter()
            .map(|row| row.iter().zip(&kz).map(|(a, b)| a * b).sum())
            .collect();
        let mut y = z;
        for (row, ti) in aff.k.iter().zip(&t) {
            for ((yj, kj), dj) in y.iter_mut().zip(row).zip(&self.dinv) {
                *yj -= dj * kj * ti;
            }
        }
        y
    }
}

/// Gauss–Jordan with partial pivoting for the small Schur complement.
fn invert(mut a: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let m = a.len();
    let mut inv: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[piv][col].abs() < 1e-14 {
            return Err(Error::Numeric("singular constraint system".into()));
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..m {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..m {
            if i != col {
                let f = a[i][col];
                for j in 0..m {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Ok(inv)
}

fn affine_system(p: &MomentProblem) -> Affine {
    let nf = p.num_vars - 1;
    let mut aff = Affine {
        k: vec![],
        h: vec![],
        is_eq: vec![],
        full: vec![],
    };
    let rows = p
        .equalities
        .iter()
        .map(|r| (r, true))
        .chain(p.inequalities.iter().map(|r| (r, false)));
    for ((row, b), is_eq) in rows {
        let mut dense = vec![0.0; nf];
        let mut rhs = *b;
        for &(v, c) in row {
            if v == 0 {
                rhs -= c;
            } else {
                dense[v - 1] += c;
            }
        }
        aff.k.push(dense);
        aff.h.push(rhs);
        aff.is_eq.push(is_eq);
        aff.full.push((row.clone(), *b));
    }
    aff
}

/// `Γ*(M)`: per-variable sums of the cells of `M`.
fn adjoint_map(p: &MomentProblem, m: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (&v, &x) in p.cells.iter().zip(m) {
        out[v] += x;
    }
}

fn dense_c(p: &MomentProblem) -> Vec<f64> {
    let mut c = vec![0.0; p.num_vars];
    for &(v, coeff) in &p.objective {
        c[v] += coeff;
    }
    c
}

fn frob(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cone the `X` iterate lives in: the full PSD cone, or the face
/// `{V S Vᵀ : S ⪰ 0}` when null vectors are known.
enum Cone {
    Full,
    Face(RealMatrix),
}

impl Cone {
    fn new(p: &MomentProblem) -> Result<Self> {
        if p.null_vectors.is_empty() {
            return Ok(Cone::Full);
        }
        let n = p.size;
        let mut q: Vec<Vec<f64>> = Vec::new();
        for row in &p.null_vectors {
            let mut v = vec![0.0; n];
            for &(i, c) in row {
                v[i] += c;
            }
            for _ in 0..2 {
                for b in &q {
                    let d: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
                }
            }
            let norm = frob(&v);
            if norm > 1e-9 {
                v.iter_mut().for_each(|x| *x /= norm);
                q.push(v);
            }
        }
        // Complement: eigenvectors of I − QQᵀ with eigenvalue 1.
        let proj = RealMatrix::from_fn(n, n, |i, j| {
            let qq: f64 = q.iter().map(|b| b[i] * b[j]).sum();
            if i == j {
                1.0 - qq
            } else {
                -qq
            }
        });
        let eig = eig_sym_tridiagonal(&proj)?;
        let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
        if keep.is_empty() {
            return Err(Error::Validation("null vectors span the whole basis".into()));
        }
        let v = RealMatrix::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
        Ok(Cone::Face(v))
    }

    fn project(&self, size: usize, a: &[f64]) -> Result<Vec<f64>> {
        let m = RealMatrix::from_fn(size, size, |i, j| 0.5 * (a[i * size + j] + a[j * size + i]));
        match self {
            Cone::Full => {
                let eig = eig_sym_tridiagonal(&m)?;
                Ok(clip_negative(&m, &eig).as_slice().to_vec())
            }
            Cone::Face(v) => {
                let reduced = v.t_matmul(&m.matmul(v));
                let eig = eig_sym_tridiagonal(&reduced)?;
                let clipped = clip_negative(&reduced, &eig);
                Ok(v.matmul(&clipped).matmul(&v.transpose()).as_slice().to_vec())
            }
        }
    }
}

/// Minimum eigenvalue of `Γ(y)`, computed with Jacobi independently of the
/// solver loop.
pub fn moment_matrix_min_eigenvalue(p: &MomentProblem, y: &[f64]) -> Result<f64> {
    let g = p.moment_matrix(y);
    let m = RealMatrix::from_fn(p.size, p.size, |i, j| g[i * p.size + j]);
    Ok(eig_sym(&m, 1e-12)?.min_eigenvalue())
}

/// Solves the relaxation with default options and the given tolerance and
/// iteration cap. A run that hits `max_iter` returns `converged = false`.
pub fn sdp_solve(p: &MomentProblem, tol: f64, max_iter: usize) -> Result<MomentSolution> {
    let opts = SdpOptions {
        tol,
        max_iter,
        ..SdpOptions::default()
    };
    sdp_solve_with(p, &opts, None).map(|(sol, _)| sol)
}

/// Full-control entry point; returns the final iterate for warm starts.
pub fn sdp_solve_with(
    p: &MomentProblem,
    opts: &SdpOptions,
    warm: Option<&SdpState>,
) -> Result<(MomentSolution, SdpState)> {
    p.validate()?;
    if !(opts.tol > 0.0) || !(opts.rho > 0.0) || !(opts.relaxation > 0.0 && opts.relaxation < 2.0) {
        return Err(Error::Validation("invalid solver options".into()));
    }
    let n = p.size;
    let nv = p.num_vars;
    let counts = p.cell_counts();
    if counts.iter().any(|&c| c == 0.0) {
        return Err(Error::Validation(
            "every variable must appear in the moment matrix".into(),
        ));
    }
    let aff = affine_system(p);
    let lin = LinearSolve::new(&counts, &aff)?;
    let c = dense_c(p);
    let m = aff.k.len();
    let alpha = opts.relaxation;
    let cone = Cone::new(p)?;

    let mut st = match warm {
        Some(w) if w.y.len() == nv && w.x.len() == n * n && w.s.len() == m => w.clone(),
        _ => {
            let mut y = vec![0.0; nv];
            y[0] = 1.0;
            SdpState {
                x: p.moment_matrix(&y),
                y,
                u: vec![0.0; n * n],
                s: aff
                    .h
                    .iter()
                    .zip(&aff.is_eq)
                    .map(|(h, &eq)| if eq { 0.0 } else { h.max(0.0) })
                    .collect(),
                w: vec![0.0; m],
                rho: opts.rho,
            }
        }
    };

    let mut rhs = vec![0.0; nv];
    let mut gamma_adj = vec![0.0; nv];
    let mut xu = vec![0.0; n * n];
    let mut iterations = 0;
    let mut converged = false;
    let mut psd_residual = f64::INFINITY;
    let mut affine_residual = f64::INFINITY;

    while iterations < opts.max_iter {
        iterations += 1;
        // y-step.
        for (d, (x, u)) in xu.iter_mut().zip(st.x.iter().zip(&st.u)) {
            *d = x - u;
        }
        adjoint_map(p, &xu, &mut gamma_adj);
        for k in 1..nv {
            rhs[k] = c[k] / st.rho + gamma_adj[k];
        }
        for r in 0..m {
            let t = aff.h[r] - st.s[r] - st.w[r];
            for (k, a) in aff.k[r].iter().enumerate() {
                rhs[k + 1] += a * t;
            }
        }
        let y_free = lin.solve(&aff, &rhs[1..]);
        st.y[1..].copy_from_slice(&y_free);
        let g = p.moment_matrix(&st.y);
        let ky: Vec<f64> = aff
            .k
            .iter()
            .map(|row| row.iter().zip(&st.y[1..]).map(|(a, b)| a * b).sum())
            .collect();

        // Relaxed X-step.
        let g_hat: Vec<f64> = g
            .iter()
            .zip(&st.x)
            .map(|(a, x)| alpha * a + (1.0 - alpha) * x)
            .collect();
        for ((d, gh), u) in xu.iter_mut().zip(&g_hat).zip(&st.u) {
            *d = gh + u;
        }
        let x_new = cone.project(n, &xu)?;
        let x_old = std::mem::replace(&mut st.x, x_new);
        for ((u, gh), x) in st.u.iter_mut().zip(&g_hat).zip(&st.x) {
            *u += gh - x;
        }

        // Slack step.
        let s_old = st.s.clone();
        for r in 0..m {
            let k_hat = alpha * ky[r] + (1.0 - alpha) * (aff.h[r] - st.s[r]);
            st.s[r] = if aff.is_eq[r] {
                0.0
            } else {
                (aff.h[r] - k_hat - st.w[r]).max(0.0)
            };
            st.w[r] += k_hat + st.s[r] - aff.h[r];
        }

        if iterations % opts.check_every != 0 && iterations != opts.max_iter {
            continue;
        }
        let prim_mat = frob(&g.iter().zip(&st.x).map(|(a, b)| a - b).collect::<Vec<_>>());
        let prim_aff = (0..m).map(|r| (ky[r] + st.s[r] - aff.h[r]).abs()).fold(0.0, f64::max);
        let r_prim = prim_mat.max(prim_aff);
        let dx: Vec<f64> = st.x.iter().zip(&x_old).map(|(a, b)| a - b).collect();
        adjoint_map(p, &dx, &mut gamma_adj);
        let mut dual = gamma_adj[1..].to_vec();
        for r in 0..m {
            let ds = st.s[r] - s_old[r];
            for (d, a) in dual.iter_mut().zip(&aff.k[r]) {
                *d += a * ds;
            }
        }
        let r_dual = st.rho * frob(&dual);

        if r_prim <= opts.tol && r_dual <= opts.tol {
            psd_residual = (-moment_matrix_min_eigenvalue(p, &st.y)?).max(0.0);
            affine_residual = p.affine_violation(&st.y).max(0.0);
            if psd_residual <= opts.tol && affine_residual <= opts.tol {
                converged = true;
                break;
            }
        }
        if opts.adapt_rho {
            let scale = if r_prim > 10.0 * r_dual {
                2.0
            } else if r_dual > 10.0 * r_prim {
                0.5
            } else {
                1.0
            };
            if scale != 1.0 {
                st.rho *= scale;
                st.u.iter_mut().for_each(|u| *u /= scale);
                st.w.iter_mut().for_each(|w| *w /= scale);
            }
        }
    }
    if !converged {
        psd_residual = (-moment_matrix_min_eigenvalue(p, &st.y)?).max(0.0);
        affine_residual = p.affine_violation(&st.y).max(0.0);
    }

    let dual_bound = lagrangian_bound(p, &aff, &c, &st);
    Ok((
        MomentSolution {
            value: p.objective_value(&st.y),
            moments: st.y.clone(),
            psd_residual,
            affine_residual,
            iterations,
            converged,
            dual_bound,
        },
        st,
    ))
}

/// `sup_y c·y + ⟨Z, Γ(y)⟩ + λ·(b − K y)` over `|y_k| ≤ 1`, `y_0 = 1`, with
/// `Z = −ρU ⪰ 0` and `λ = ρw`.
fn lagrangian_bound(p: &MomentProblem, aff: &Affine, c: &[f64], st: &SdpState) -> f64 {
    let z: Vec<f64> = st.u.iter().map(|u| -st.rho * u).collect();
    let mut g = vec![0.0; p.num_vars];
    adjoint_map(p, &z, &mut g);
    for (gk, ck) in g.iter_mut().zip(c) {
        *gk += ck;
    }
    let mut bound = 0.0;
    for ((row, b), w) in aff.full.iter().zip(&st.w) {
        let lambda = st.rho * w;
        bound += lambda * b;
        for &(v, coeff) in row {
            g[v] -= lambda * coeff;
        }
    }
    bound + g[0] + g[1..].iter().map(|x| x.abs()).sum::<f64>()
}
