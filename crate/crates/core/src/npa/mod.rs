//! NPA moment relaxation of the noisy Hardy problem and a self-contained
//! first-order SDP solver.
//!
//! Moment matrices are taken real symmetric without loss: if `Γ` is feasible
//! so is its complex conjugate, and their average is real with the same
//! (real) objective. Cells `(u, v)` and `(v, u)` therefore share a variable,
//! keyed by the smaller of `u†v` and its adjoint.

mod monomial;
mod problem;
mod sdp;
mod text;

pub use monomial::{canonical_monomial, monomial_count, monomial_list, Letter, Monomial, MAX_MONOMIALS};
pub use problem::{build_moment_problem, MomentProblem, SparseRow};
pub use sdp::{moment_matrix_min_eigenvalue, sdp_solve, sdp_solve_with, MomentSolution, SdpOptions, SdpState};
pub use text::{parse_problem, write_problem, FORMAT_VERSION};

use crate::behavior::Scenario;
use crate::error::{Error, Result};

/// Default iteration cap used by [`npa_upper_bound`].
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Upper bound on the noisy Hardy probability over the level-`level` NPA set.
pub fn npa_upper_bound(scenario: Scenario, level: usize, epsilon: f64, tol: f64) -> Result<f64> {
    npa_solve(scenario, level, epsilon, tol, None).map(|(s, _)| s.value)
}

/// Like [`npa_upper_bound`] but returns the full solution and accepts a warm
/// start from a neighbouring solve.
pub fn npa_solve(
    scenario: Scenario,
    level: usize,
    epsilon: f64,
    tol: f64,
    warm: Option<&SdpState>,
) -> Result<(MomentSolution, SdpState)> {
    let problem = build_moment_problem(scenario, level, epsilon)?;
    let opts = SdpOptions {
        tol,
        max_iter: DEFAULT_MAX_ITER,
        ..SdpOptions::default()
    };
    let (sol, state) = sdp_solve_with(&problem, &opts, warm)?;
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            psd_residual: sol.psd_residual,
            affine_residual: sol.affine_residual,
        });
    }
    Ok((sol, state))
}
