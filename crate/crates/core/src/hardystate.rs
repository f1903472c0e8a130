//! The unique n-qubit Hardy state for a given list of local observables.
//!
//! Each party `j` measures `U_j` with eigenbasis `{|0>, |1>}` and `D_j` with
//! eigenbasis `|+> = α|0> + β|1>`, `|-> = β*|0> - α*|1>`. The Hardy state is
//! the unit vector orthogonal to `|-…->` and to every product
//! `|x_1 … x_n>`, `x_i ∈ {0, +}`, other than `|0…0>` and `|+…+>`.

use crate::error::{Error, Result};
use crate::numkernel::{orthonormalize_against, schmidt_spectrum, StateVector, C64, ONE, ZERO};

/// Largest party count for which dense states are built.
pub const MAX_PARTIES: usize = 12;

/// Above this party count [`hardy_state`] switches from Gram–Schmidt over the
/// full product basis (cubic in `2ⁿ`) to the two-vector complement formula.
pub const GRAM_SCHMIDT_MAX_PARTIES: usize = 8;

const PAIR_TOL: f64 = 1e-12;
const DEGENERACY_TOL: f64 = 1e-12;

/// One party's two dichotomic observables, encoded by the `D` eigenvector
/// `|+> = α|0> + β|1>`; `U` is the computational basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementPair {
    alpha: C64,
    beta: C64,
}

impl MeasurementPair {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        if ![alpha.re, alpha.im, beta.re, beta.im].iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("non-finite measurement amplitude".into()));
        }
        let a2 = alpha.norm_sqr();
        let b2 = beta.norm_sqr();
        if (a2 + b2 - 1.0).abs() > PAIR_TOL {
            return Err(Error::Validation(format!(
                "|alpha|^2 + |beta|^2 = {} (expected 1)",
                a2 + b2
            )));
        }
        if a2 <= 0.0 || b2 <= 0.0 || a2 >= 1.0 {
            return Err(Error::DegenerateMeasurement(format!(
                "|alpha|^2 = {a2}: U and D commute"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Real positive amplitudes with `|α|² = alpha_sq`.
    pub fn from_alpha_sq(alpha_sq: f64) -> Result<Self> {
        if !alpha_sq.is_finite() || alpha_sq <= 0.0 || alpha_sq >= 1.0 {
            return Err(Error::DegenerateMeasurement(format!(
                "|alpha|^2 = {alpha_sq} must lie strictly inside (0, 1)"
            )));
        }
        Self::new(C64::new(alpha_sq.sqrt(), 0.0), C64::new((1.0 - alpha_sq).sqrt(), 0.0))
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// `|0>`, the `U = +1` eigenvector.
    pub fn u_plus(&self) -> [C64; 2] {
        [ONE, ZERO]
    }

    /// `|1>`, the `U = -1` eigenvector.
    pub fn u_minus(&self) -> [C64; 2] {
        [ZERO, ONE]
    }

    /// `|+> = α|0> + β|1>`.
    pub fn d_plus(&self) -> [C64; 2] {
        [self.alpha, self.beta]
    }

    /// `|-> = β*|0> - α*|1>`.
    pub fn d_minus(&self) -> [C64; 2] {
        [self.beta.conj(), -self.alpha.conj()]
    }

    /// The same projectors with `α` rotated to the positive real axis.
    pub fn with_real_alpha(&self) -> Self {
        let phase = if self.alpha.norm() > 0.0 {
            self.alpha.conj() / self.alpha.norm()
        } else {
            ONE
        };
        Self {
            alpha: C64::new(self.alpha.norm(), 0.0),
            beta: self.beta * phase,
        }
    }
}

fn check_parties(n: usize, pairs: &[MeasurementPair]) -> Result<()> {
    if n < 2 {
        return Err(Error::Scenario(format!("Hardy tests need at least 2 parties, got {n}")));
    }
    if n > MAX_PARTIES {
        return Err(Error::Scenario(format!(
            "at most {MAX_PARTIES} parties are supported, got {n}"
        )));
    }
    if pairs.len() != n {
        return Err(Error::Validation(format!(
            "{} measurement pairs for {n} parties",
            pairs.len()
        )));
    }
    Ok(())
}

/// The product vectors `φ_−, φ_1, …, φ_{2ⁿ−1}`.
///
/// `φ_k = |x_1 … x_n>` with `x_i = 0` when bit `i-1` of `k` is set and
/// `x_i = +` otherwise; `φ_0 = |+…+>` is not part of the basis.
#[derive(Debug, Clone)]
pub struct ProductBasis {
    pub n: usize,
    pub vectors: Vec<StateVector>,
}

impl ProductBasis {
    pub fn phi_minus(&self) -> &StateVector {
        &self.vectors[0]
    }

    /// `φ_k` for `1 ≤ k ≤ 2ⁿ − 1`.
    pub fn phi(&self, k: usize) -> &StateVector {
        assert!(k >= 1 && k < self.vectors.len(), "phi index {k} out of range");
        &self.vectors[k]
    }
}

/// `φ_k` for any `0 ≤ k < 2ⁿ` (including `φ_0`).
pub fn product_vector(pairs: &[MeasurementPair], k: usize) -> Result<StateVector> {
    let factors: Vec<Vec<C64>> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if (k >> i) & 1 == 1 {
                p.u_plus().to_vec()
            } else {
                p.d_plus().to_vec()
            }
        })
        .collect();
    StateVector::product(&factors)
}

fn phi_minus(pairs: &[MeasurementPair]) -> Result<StateVector> {
    let factors: Vec<Vec<C64>> = pairs.iter().map(|p| p.d_minus().to_vec()).collect();
    StateVector::product(&factors)
}

pub fn product_basis(n: usize, pairs: &[MeasurementPair]) -> Result<ProductBasis> {
    check_parties(n, pairs)?;
    let mut vectors = Vec::with_capacity(1 << n);
    vectors.push(phi_minus(pairs)?);
    for k in 1..(1usize << n) {
        vectors.push(product_vector(pairs, k)?);
    }
    Ok(ProductBasis { n, vectors })
}

/// Fixes the global phase so that the `|0…0>` amplitude is real positive.
fn fix_phase(psi: StateVector) -> StateVector {
    let a0 = psi.amps()[0];
    if a0.norm() == 0.0 {
        return psi;
    }
    psi.with_global_phase(a0.conj() / a0.norm())
}

/// The Hardy state, built by orthonormalizing `φ_−, φ_1, …, φ_{2ⁿ−2}` and
/// keeping the normalized residual of `φ_{2ⁿ−1}`. Phase convention:
/// `<ψ|φ_{2ⁿ−1}>` is real positive.
pub fn hardy_state(n: usize, pairs: &[MeasurementPair]) -> Result<StateVector> {
    check_parties(n, pairs)?;
    if n > GRAM_SCHMIDT_MAX_PARTIES {
        return hardy_state_complement(n, pairs);
    }
    let basis = product_basis(n, pairs)?;
    let dims = vec![2; n];
    let mut ortho: Vec<Vec<C64>> = Vec::with_capacity(basis.vectors.len());
    for (i, v) in basis.vectors.iter().enumerate() {
        let mut w = v.amps().to_vec();
        let residual = orthonormalize_against(&mut w, &ortho);
        if residual < DEGENERACY_TOL {
            return Err(Error::Numeric(format!(
                "product basis is degenerate at vector {i} (residual norm {residual:.3e})"
            )));
        }
        ortho.push(w);
    }
    let last = ortho.pop().expect("basis is nonempty");
    let psi = StateVector::normalized(dims, last)?;

    // The construction must leave ψ orthogonal to the spanning set.
    let leak = ortho
        .iter()
        .map(|b| b.iter().zip(psi.amps()).map(|(x, y)| x.conj() * y).sum::<C64>().norm())
        .fold(0.0, f64::max);
    if leak > 1e-10 {
        return Err(Error::Numeric(format!("Gram–Schmidt lost orthogonality ({leak:.3e})")));
    }
    Ok(fix_phase(psi))
}

/// The Hardy state from the orthogonal complement of the constrained span,
/// `ψ ∝ |1…1> − <−…−|1…1> |−…−>`. Linear in `2ⁿ`.
pub fn hardy_state_complement(n: usize, pairs: &[MeasurementPair]) -> Result<StateVector> {
    check_parties(n, pairs)?;
    let minus = phi_minus(pairs)?;
    let ones = StateVector::basis(vec![2; n], (1 << n) - 1)?;
    let overlap = minus.inner(&ones);
    let amps: Vec<C64> = ones
        .amps()
        .iter()
        .zip(minus.amps())
        .map(|(o, m)| o - overlap * m)
        .collect();
    Ok(fix_phase(StateVector::normalized(vec![2; n], amps)?))
}

/// `Π|α_i|²|β_i|² / (1 − Π|α_i|²)`.
pub fn success_prob_closed(pairs: &[MeasurementPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Validation("no measurement pairs".into()));
    }
    let prod_a: f64 = pairs.iter().map(MeasurementPair::alpha_sq).product();
    let prod_b: f64 = pairs.iter().map(|p| p.beta().norm_sqr()).product();
    Ok(prod_a * prod_b / (1.0 - prod_a))
}

/// Optimal Hardy probability for `n` parties together with the optimal `|α|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmaxResult {
    pub n: usize,
    /// Root of `x^{n+1} − 2x + 1` in `(0, 1)`.
    pub t: f64,
    pub p_max: f64,
}

/// `q(x) = x + x² + … + xⁿ − 1`, i.e. `(x^{n+1} − 2x + 1)/(x − 1)`.
fn deflated(n: usize, x: f64) -> f64 {
    let mut power = 1.0;
    let mut sum = -1.0;
    for _ in 0..n {
        power *= x;
        sum += power;
    }
    sum
}

pub fn pmax(n: usize) -> Result<PmaxResult> {
    if n < 2 {
        return Err(Error::Scenario(format!("Hardy tests need at least 2 parties, got {n}")));
    }
    // q is increasing on (0, 1) with q(0) = -1 and q(1) = n - 1.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deflated(n, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let tn = t.powi(n as i32);
    let p_max = tn * (1.0 - t).powi(n as i32) / (1.0 - tn);
    Ok(PmaxResult { n, t, p_max })
}

/// Closed-form optimal `|α|²` for three parties (the real root of `x³ + x² + x − 1`).
pub fn optimal_alpha_sq_tripartite() -> f64 {
    let s = 17.0 + 3.0 * 33f64.sqrt();
    let cbrt = s.cbrt();
    (cbrt * cbrt - cbrt - 2.0) / (3.0 * cbrt)
}

/// Coefficients of the symmetric three-qubit Hardy state
/// `c0|000> + c1(|001>+|010>+|100>) + c2(|011>+|101>+|110>) + c3|111>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripartiteCoefficients {
    pub c0: C64,
    pub c1: C64,
    pub c2: C64,
    pub c3: C64,
}

impl TripartiteCoefficients {
    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + 3.0 * self.c1.norm_sqr() + 3.0 * self.c2.norm_sqr() + self.c3.norm_sqr()
    }
}

/// Three-qubit Hardy state for identical measurements on every party, from
/// explicit coefficient formulas. The formulas assume a real positive `α`;
/// other phases of `α` are first absorbed into `β`, which leaves the
/// measurement projectors unchanged.
pub fn tripartite_explicit(pair: &MeasurementPair) -> Result<(TripartiteCoefficients, StateVector)> {
    let pair = MeasurementPair::new(pair.alpha(), pair.beta())?.with_real_alpha();
    let a = pair.alpha().norm();
    let beta = pair.beta();
    let b = beta.norm();
    let root = (1.0 - a.powi(6)).sqrt();
    let coeffs = TripartiteCoefficients {
        c0: C64::new(a.powi(3) * b.powi(3) / root, 0.0),
        c1: -beta * (a.powi(4) * b / root),
        c2: beta * beta * (a.powi(5) / (b * root)),
        c3: beta * beta * beta * (root / b.powi(3)),
    };
    let mut amps = vec![ZERO; 8];
    for (idx, amp) in amps.iter_mut().enumerate() {
        *amp = match idx.count_ones() {
            0 => coeffs.c0,
            1 => coeffs.c1,
            2 => coeffs.c2,
            _ => coeffs.c3,
        };
    }
    let norm = coeffs.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Numeric(format!("explicit coefficients have norm {norm}")));
    }
    let psi = StateVector::normalized(vec![2, 2, 2], amps)?;
    Ok((coeffs, psi))
}

/// True iff every bipartition of the parties has a second Schmidt
/// coefficient above `tol`.
pub fn is_genuinely_entangled(psi: &StateVector, tol: f64) -> Result<bool> {
    let n = psi.parties();
    if n < 2 {
        return Err(Error::Validation("entanglement needs at least two parties".into()));
    }
    // Subsets containing party 0 enumerate each bipartition once.
    for mask in 0..(1usize << (n - 1)) {
        let side: Vec<usize> = std::iter::once(0)
            .chain((1..n).filter(|p| (mask >> (p - 1)) & 1 == 1))
            .collect();
        if side.len() == n {
            continue;
        }
        let spectrum = schmidt_spectrum(psi, &side, 1e-10)?;
        if spectrum.get(1).copied().unwrap_or(0.0) <= tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{eig_herm, partial_trace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const T2: f64 = 0.618_034;
    const T3: f64 = 0.543_689;

    fn random_pair(rng: &mut impl Rng) -> MeasurementPair {
        let a2: f64 = rng.gen_range(0.05..0.95);
        let pa = rng.gen_range(0.0..std::f64::consts::TAU);
        let pb = rng.gen_range(0.0..std::f64::consts::TAU);
        MeasurementPair::new(C64::from_polar(a2.sqrt(), pa), C64::from_polar((1.0 - a2).sqrt(), pb)).unwrap()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    fn det(mut m: Vec<Vec<C64>>) -> C64 {
        let n = m.len();
        let mut d = ONE;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
                .unwrap();
            if m[piv][col].norm() == 0.0 {
                return ZERO;
            }
            if piv != col {
                m.swap(piv, col);
                d = -d;
            }
            d *= m[col][col];
            for r in col + 1..n {
                let f = m[r][col] / m[col][col];
                for c in col..n {
                    let sub = f * m[col][c];
                    m[r][c] -= sub;
                }
            }
        }
        d
    }

    #[test]
    fn pair_validation() {
        assert!(matches!(
            MeasurementPair::from_alpha_sq(0.0),
            Err(Error::DegenerateMeasurement(_))
        ));
        assert!(matches!(
            MeasurementPair::from_alpha_sq(1.0),
            Err(Error::DegenerateMeasurement(_))
        ));
        assert!(matches!(MeasurementPair::new(ONE, ONE), Err(Error::Validation(_))));
        assert!(matches!(
            MeasurementPair::new(ONE, ZERO),
            Err(Error::DegenerateMeasurement(_))
        ));
    }

    #[test]
    fn product_basis_examples() {
        let pairs = vec![MeasurementPair::from_alpha_sq(0.5).unwrap(); 2];
        let basis = product_basis(2, &pairs).unwrap();
        assert_eq!(basis.vectors.len(), 4);
        assert_eq!(basis.phi(3).amps(), StateVector::basis(vec![2, 2], 0).unwrap().amps());
        for k in 0..3 {
            let v = product_vector(&pairs, k).unwrap();
            assert!(basis.phi_minus().inner(&v).norm() < 1e-12);
        }
        assert!(matches!(product_basis(1, &pairs[..1]), Err(Error::Scenario(_))));
    }

    #[test]
    fn tripartite_basis_is_nonsingular() {
        let pairs = vec![MeasurementPair::from_alpha_sq(T3).unwrap(); 3];
        let basis = product_basis(3, &pairs).unwrap();
        let gram: Vec<Vec<C64>> = basis
            .vectors
            .iter()
            .map(|u| basis.vectors.iter().map(|v| u.inner(v)).collect())
            .collect();
        assert!(det(gram).norm() > 1e-6);
    }

    #[test]
    fn bipartite_optimum_overlap() {
        let pairs = vec![MeasurementPair::from_alpha_sq(T2).unwrap(); 2];
        let psi = hardy_state(2, &pairs).unwrap();
        assert!((psi.amps()[0].norm_sqr() - 0.090_169_9).abs() < 1e-6);
        assert!(psi.amps()[0].im.abs() < 1e-15 && psi.amps()[0].re > 0.0);
    }

    #[test]
    fn gram_schmidt_agrees_with_complement_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in 2..=GRAM_SCHMIDT_MAX_PARTIES {
            let pairs: Vec<_> = (0..n).map(|_| random_pair(&mut rng)).collect();
            let gs = hardy_state(n, &pairs).unwrap();
            let cf = hardy_state_complement(n, &pairs).unwrap();
            assert!(gs.distance_up_to_phase(&cf) < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn closed_form_probability_examples() {
        let half = vec![MeasurementPair::from_alpha_sq(0.5).unwrap(); 2];
        let p = success_prob_closed(&half).unwrap();
        assert!((p - 1.0 / 12.0).abs() < 1e-15);
        let psi = hardy_state(2, &half).unwrap();
        assert!((psi.amps()[0].norm_sqr() - 1.0 / 12.0).abs() < 1e-12);

        let opt2 = vec![MeasurementPair::from_alpha_sq(T2).unwrap(); 2];
        assert!((success_prob_closed(&opt2).unwrap() - 0.090_169_9).abs() < 1e-6);
        let opt3 = vec![MeasurementPair::from_alpha_sq(T3).unwrap(); 3];
        assert!((success_prob_closed(&opt3).unwrap() - 0.018_194_0).abs() < 1e-6);
    }

    #[test]
    fn pmax_examples() {
        let r2 = pmax(2).unwrap();
        assert!((r2.t - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
        assert!((r2.p_max - (5.0 * 5f64.sqrt() - 11.0) / 2.0).abs() < 1e-14);
        let r3 = pmax(3).unwrap();
        assert!((r3.t - 0.543_689_0).abs() < 1e-7);
        assert!((r3.p_max - 0.018_194_0).abs() < 1e-6);
        let r4 = pmax(4).unwrap();
        assert!(deflated(4, r4.t).abs() < 1e-12);
        assert!(r4.p_max < r3.p_max);
        for r in [r2, r3, r4] {
            let t = r.t;
            assert!((t.powi(r.n as i32 + 1) - 2.0 * t + 1.0).abs() < 1e-12);
        }
        assert!(matches!(pmax(1), Err(Error::Scenario(_))));
    }

    #[test]
    fn pmax_strictly_decreasing() {
        let values: Vec<f64> = (2..=6).map(|n| pmax(n).unwrap().p_max).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn optimal_alpha_matches_bisection() {
        let a = optimal_alpha_sq_tripartite();
        assert!(a > 0.0 && a < 1.0);
        assert!((a - 0.543_689_0).abs() < 1e-7);
        assert!((a - pmax(3).unwrap().t).abs() < 1e-9);
        assert!((a.powi(3) + a * a + a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_tripartite_values() {
        let pair = MeasurementPair::new(C64::new(T3.sqrt(), 0.0), C64::new((1.0 - T3).sqrt(), 0.0)).unwrap();
        let (c, psi) = tripartite_explicit(&pair).unwrap();
        assert!((c.c0.re - 0.134_883).abs() < 1e-5);
        assert!((c.c3.re - 0.916_126).abs() < 1e-5);
        assert!((c.c0.norm_sqr() - 0.018_193_4).abs() < 1e-5);
        assert!((c.norm_sqr() - 1.0).abs() < 1e-10);
        assert!((psi.amps()[0].norm_sqr() - success_prob_closed(&[pair; 3]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn explicit_tripartite_matches_construction_for_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let pair = random_pair(&mut rng);
            let (_, explicit) = tripartite_explicit(&pair).unwrap();
            let built = hardy_state(3, &[pair; 3]).unwrap();
            assert!(explicit.distance_up_to_phase(&built) < 1e-9);
        }
    }

    #[test]
    fn genuine_entanglement_examples() {
        assert!(!is_genuinely_entangled(&StateVector::basis(vec![2, 2, 2], 0).unwrap(), 1e-9).unwrap());
        let mut ghz = vec![ZERO; 8];
        ghz[0] = ONE;
        ghz[7] = ONE;
        let ghz = StateVector::normalized(vec![2, 2, 2], ghz).unwrap();
        assert!(is_genuinely_entangled(&ghz, 1e-9).unwrap());
        // Bell pair ⊗ |0> is entangled but not genuinely so.
        let mut bell0 = vec![ZERO; 8];
        bell0[0] = ONE;
        bell0[6] = ONE;
        let bell0 = StateVector::normalized(vec![2, 2, 2], bell0).unwrap();
        assert!(!is_genuinely_entangled(&bell0, 1e-9).unwrap());
        let single = StateVector::basis(vec![2], 0).unwrap();
        assert!(is_genuinely_entangled(&single, 1e-9).is_err());
    }

    #[test]
    fn optimal_tripartite_state_is_genuinely_entangled() {
        let psi = hardy_state(3, &[MeasurementPair::from_alpha_sq(pmax(3).unwrap().t).unwrap(); 3]).unwrap();
        for side in [[0usize], [1], [2]] {
            // Oracle: reduce with partial_trace and diagonalize directly.
            let reduced = partial_trace(&psi.density(), psi.dims(), &side).unwrap();
            let eig = eig_herm(&reduced, 1e-12).unwrap();
            assert!(eig.eigenvalues.iter().all(|&l| l > 1e-3));
            let spec = schmidt_spectrum(&psi, &side, 1e-12).unwrap();
            assert!((spec.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(spec[1] > 1e-3);
        }
        assert!(is_genuinely_entangled(&psi, 1e-9).unwrap());
    }

    #[test]
    fn large_party_counts_use_the_complement_route() {
        let pairs = vec![MeasurementPair::from_alpha_sq(0.5).unwrap(); 10];
        let psi = hardy_state(10, &pairs).unwrap();
        assert!((psi.amps()[0].norm_sqr() - success_prob_closed(&pairs).unwrap()).abs() < 1e-12);
        assert!(matches!(hardy_state(13, &vec![pairs[0]; 13]), Err(Error::Scenario(_))));
    }
}
