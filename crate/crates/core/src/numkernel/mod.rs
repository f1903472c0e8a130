//! Dense complex linear algebra shared by every other module: Kronecker
//! products, partial traces, symmetric eigen-decomposition, PSD projection and
//! Schmidt spectra.

mod eigen;
mod matrix;
mod state;
mod tridiag;

pub(crate) use eigen::{clip_negative, orthonormalize_against};
pub use eigen::{eig_herm, eig_sym, eig_sym_from_guess, psd_project, HermEigResult, SymEigResult};
pub use matrix::{kron, DenseMatrix, RealMatrix, C64};
pub(crate) use matrix::{ONE, ZERO};
pub(crate) use state::total_dim;
pub use state::{apply_local, partial_trace, schmidt_spectrum, StateVector};
pub use tridiag::eig_sym_tridiagonal;
