//! Explicit-quantum lower bound on the noisy tripartite Hardy probability.
//!
//! The search runs over a ten-parameter family: a permutation-symmetric
//! three-qubit state with four real amplitudes dressed by local phases, and
//! per-party `D` measurements given by a polar angle and the same phase. The
//! phases `φ, ξ, θ` belong to parties 1, 2, 3; a basis state picks up
//! `e^{-iφ}` for every party whose bit is `0`. Optionally the measurement
//! phases can be decoupled from the state phases (13 parameters).
//!
//! Constraints `g_i ≤ ε` are handled by a quadratic penalty with an
//! escalating weight, then a hard feasibility repair and a barrier polish.
//! Restart 0 always starts from the noiseless optimum, so the result is
//! feasible for every `ε ≥ 0`.

mod nelder_mead;

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::behavior::{hardy_statistics, joint_distribution, measurements_from_pairs, MeasurementSet, QuantumState};
use crate::error::{Error, Result};
use crate::hardystate::{optimal_alpha_sq_tripartite, tripartite_explicit, MeasurementPair};
use crate::numkernel::{StateVector, C64};
use nelder_mead::{nelder_mead, NmOptions};

/// Largest admissible noise level.
pub const MAX_EPSILON: f64 = 0.25;
/// Default number of restarts.
pub const DEFAULT_RESTARTS: usize = 50;

const NORM_TOL: f64 = 1e-10;
/// Slack on `g_i ≤ ε` used while searching.
const FEAS_SLACK: f64 = 1e-14;
/// Tolerance of the final re-check through the behavior module.
const RECHECK_TOL: f64 = 1e-8;
const PENALTIES: [f64; 3] = [1e2, 1e3, 1e4];
/// Angles are kept this far inside `(0, π)`.
const ANGLE_MARGIN: f64 = 1e-6;
const BISECTION_STEPS: usize = 60;

/// One point of the ansatz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzParams {
    pub c000: f64,
    pub c001: f64,
    pub c011: f64,
    pub c111: f64,
    pub phi: f64,
    pub xi: f64,
    pub theta: f64,
    pub meas_alpha: f64,
    pub meas_beta: f64,
    pub meas_gamma: f64,
    /// Separate measurement phases; `None` shares `phi, xi, theta`.
    pub meas_phases: Option<[f64; 3]>,
}

impl AnsatzParams {
    /// `c000² + 3 c001² + 3 c011² + c111²`.
    pub fn weighted_norm_sqr(&self) -> f64 {
        self.c000 * self.c000 + 3.0 * self.c001 * self.c001 + 3.0 * self.c011 * self.c011 + self.c111 * self.c111
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c000,
            self.c001,
            self.c011,
            self.c111,
            self.phi,
            self.xi,
            self.theta,
            self.meas_alpha,
            self.meas_beta,
            self.meas_gamma,
        ];
        if !all
            .iter()
            .chain(self.meas_phases.iter().flatten())
            .all(|v| v.is_finite())
        {
            return Err(Error::Validation("non-finite ansatz parameter".into()));
        }
        let norm = self.weighted_norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!(
                "ansatz amplitudes have weighted norm {norm}, expected 1"
            )));
        }
        Ok(())
    }

    /// The noiseless optimum: real symmetric Hardy state with
    /// `cos²(angle/2)` equal to the optimal `|α|²` and all phases zero.
    pub fn hardy_optimum() -> Result<Self> {
        let t = optimal_alpha_sq_tripartite();
        let (c, _) = tripartite_explicit(&MeasurementPair::from_alpha_sq(t)?)?;
        let angle = 2.0 * t.sqrt().acos();
        Ok(Self {
            c000: c.c0.re,
            c001: c.c1.re,
            c011: c.c2.re,
            c111: c.c3.re,
            phi: 0.0,
            xi: 0.0,
            theta: 0.0,
            meas_alpha: angle,
            meas_beta: angle,
            meas_gamma: angle,
            meas_phases: None,
        })
    }

    fn state_phases(&self) -> [f64; 3] {
        [self.phi, self.xi, self.theta]
    }

    fn measurement_phases(&self) -> [f64; 3] {
        self.meas_phases.unwrap_or_else(|| self.state_phases())
    }

    fn angles(&self) -> [f64; 3] {
        [self.meas_alpha, self.meas_beta, self.meas_gamma]
    }

    fn to_vec(self) -> Vec<f64> {
        let mut v = vec![
            self.c000,
            self.c001,
            self.c011,
            self.c111,
            self.phi,
            self.xi,
            self.theta,
            self.meas_alpha,
            self.meas_beta,
            self.meas_gamma,
        ];
        if let Some(m) = self.meas_phases {
            v.extend_from_slice(&m);
        }
        v
    }

    /// Inverse of `to_vec`; phases are wrapped into `[0, 2π)`.
    fn from_vec(v: &[f64]) -> Self {
        let wrap = |x: f64| {
            let w = x.rem_euclid(TAU);
            if w >= TAU {
                0.0
            } else {
                w
            }
        };
        Self {
            c000: v[0],
            c001: v[1],
            c011: v[2],
            c111: v[3],
            phi: wrap(v[4]),
            xi: wrap(v[5]),
            theta: wrap(v[6]),
            meas_alpha: v[7],
            meas_beta: v[8],
            meas_gamma: v[9],
            meas_phases: (v.len() == 13).then(|| [wrap(v[10]), wrap(v[11]), wrap(v[12])]),
        }
    }
}

fn amplitude_coefficient(p: &[f64], index: usize) -> f64 {
    match index.count_ones() {
        0 => p[0],
        1 => p[1],
        2 => p[2],
        _ => p[3],
    }
}

/// Raw amplitudes, party 1 as the most significant bit.
fn state_amplitudes(c: &[f64], phases: &[f64; 3]) -> [C64; 8] {
    let mut amps = [C64::new(0.0, 0.0); 8];
    for (idx, amp) in amps.iter_mut().enumerate() {
        let phase: f64 = (0..3).filter(|k| (idx >> (2 - k)) & 1 == 0).map(|k| phases[k]).sum();
        *amp = C64::from_polar(amplitude_coefficient(c, idx), -phase);
    }
    amps
}

fn measurement_pair(angle: f64, phase: f64) -> Result<MeasurementPair> {
    if !(angle > 0.0 && angle < PI) {
        return Err(Error::DegenerateMeasurement(format!(
            "measurement angle {angle} must lie strictly inside (0, π)"
        )));
    }
    MeasurementPair::new(
        C64::new((angle / 2.0).cos(), 0.0),
        C64::from_polar((angle / 2.0).sin(), phase),
    )
}

pub fn ansatz_state(p: &AnsatzParams) -> Result<StateVector> {
    p.validate()?;
    let c = [p.c000, p.c001, p.c011, p.c111];
    StateVector::new(vec![2, 2, 2], state_amplitudes(&c, &p.state_phases()).to_vec())
}

pub fn ansatz_measurements(p: &AnsatzParams) -> Result<MeasurementSet> {
    let pairs = p
        .angles()
        .iter()
        .zip(p.measurement_phases())
        .map(|(&a, ph)| measurement_pair(a, ph))
        .collect::<Result<Vec<_>>>()?;
    measurements_from_pairs(&pairs)
}

/// Success probability and the four constraint values at a raw parameter
/// vector, evaluated directly from amplitudes.
fn evaluate(v: &[f64]) -> (f64, [f64; 4]) {
    let phases = [v[4], v[5], v[6]];
    let psi = state_amplitudes(&v[..4], &phases);
    let mphases = if v.len() == 13 { [v[10], v[11], v[12]] } else { phases };
    let mut plus = [[C64::new(0.0, 0.0); 2]; 3];
    let mut minus = [[C64::new(0.0, 0.0); 2]; 3];
    for k in 0..3 {
        let (s, c) = (v[7 + k] / 2.0).sin_cos();
        // Conjugated bras of |D+> and of |D-> up to a phase.
        plus[k] = [C64::new(c, 0.0), C64::from_polar(s, -mphases[k])];
        minus[k] = [C64::new(-s, 0.0), C64::from_polar(c, -mphases[k])];
    }
    let at = |a: usize, b: usize, c: usize| psi[(a << 2) | (b << 1) | c];

    let mut g = [0.0; 4];
    for x in 0..2 {
        g[0] += (plus[0][0] * at(0, 0, x) + plus[0][1] * at(1, 0, x)).norm_sqr();
        g[1] += (plus[1][0] * at(x, 0, 0) + plus[1][1] * at(x, 1, 0)).norm_sqr();
        g[2] += (plus[2][0] * at(0, x, 0) + plus[2][1] * at(0, x, 1)).norm_sqr();
    }
    let mut all_minus = C64::new(0.0, 0.0);
    for (idx, amp) in psi.iter().enumerate() {
        all_minus += minus[0][idx >> 2] * minus[1][(idx >> 1) & 1] * minus[2][idx & 1] * amp;
    }
    g[3] = all_minus.norm_sqr();
    (psi[0].norm_sqr(), g)
}

/// Keeps amplitudes on the weighted unit sphere and angles inside `(0, π)`.
fn project(v: &mut [f64]) {
    let norm = (v[0] * v[0] + 3.0 * v[1] * v[1] + 3.0 * v[2] * v[2] + v[3] * v[3]).sqrt();
    if norm > 1e-300 {
        v[..4].iter_mut().for_each(|x| *x /= norm);
    } else {
        v[..4].copy_from_slice(&[0.0, 0.0, 0.0, 1.0]);
    }
    for a in &mut v[7..10] {
        *a = a.clamp(ANGLE_MARGIN, PI - ANGLE_MARGIN);
    }
}

fn is_feasible(g: &[f64; 4], epsilon: f64) -> bool {
    g.iter().all(|&x| x <= epsilon + FEAS_SLACK)
}

#[derive(Debug, Clone)]
pub struct VariationalOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Search over separate measurement phases.
    pub decoupled_phases: bool,
    /// Additional starting points (for instance the optimum at a nearby `ε`),
    /// run after the regular restarts.
    pub extra_starts: Vec<AnsatzParams>,
    /// Evaluation budget of each simplex run.
    pub max_evals: usize,
    /// Worker threads; `0` uses the available parallelism.
    pub threads: usize,
}

impl Default for VariationalOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            decoupled_phases: false,
            extra_starts: Vec::new(),
            max_evals: 4000,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundResult {
    pub value: f64,
    pub params: AnsatzParams,
    /// `P(++|D1,U2), P(++|D2,U3), P(++|D3,U1), P(---|DDD)`.
    pub constraint_values: [f64; 4],
    pub restarts_used: usize,
    pub seed: u64,
}

/// Best feasible success probability found over `restarts` starts.
pub fn lower_bound(epsilon: f64, restarts: usize, seed: u64) -> Result<LowerBoundResult> {
    lower_bound_with(
        epsilon,
        &VariationalOptions {
            restarts,
            seed,
            ..VariationalOptions::default()
        },
    )
}

pub fn lower_bound_with(epsilon: f64, opts: &VariationalOptions) -> Result<LowerBoundResult> {
    if !(0.0..=MAX_EPSILON).contains(&epsilon) {
        return Err(Error::Validation(format!(
            "epsilon {epsilon} outside [0, {MAX_EPSILON}]"
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::Validation("need at least one restart".into()));
    }
    let mut anchor = AnsatzParams::hardy_optimum()?;
    if opts.decoupled_phases {
        anchor.meas_phases = Some([0.0; 3]);
    }
    let anchor = anchor.to_vec();

    let mut starts: Vec<Vec<f64>> = (0..opts.restarts)
        .map(|r| {
            if r == 0 {
                anchor.clone()
            } else {
                random_start(opts.seed, r, opts.decoupled_phases)
            }
        })
        .collect();
    for extra in &opts.extra_starts {
        extra.validate()?;
        let mut e = *extra;
        match (opts.decoupled_phases, e.meas_phases) {
            (true, None) => e.meas_phases = Some(e.state_phases()),
            (false, Some(_)) => e.meas_phases = None,
            _ => {}
        }
        starts.push(e.to_vec());
    }

    let threads = match opts.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(starts.len());
    let mut outcomes: Vec<Option<(Vec<f64>, f64)>> = vec![None; starts.len()];
    std::thread::scope(|scope| {
        let chunk = starts.len().div_ceil(threads);
        for (slots, inputs) in outcomes.chunks_mut(chunk).zip(starts.chunks(chunk)) {
            let anchor = &anchor;
            scope.spawn(move || {
                for (slot, x0) in slots.iter_mut().zip(inputs) {
                    *slot = optimize_from(x0, anchor, epsilon, opts.max_evals);
                }
            });
        }
    });

    // First maximum wins, so the result does not depend on scheduling.
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (x, value) in outcomes.into_iter().flatten() {
        if best.as_ref().map_or(true, |(_, b)| value > *b) {
            best = Some((x, value));
        }
    }
    let (x, value) = best.ok_or_else(|| Error::Infeasible(format!("no feasible ansatz point at epsilon {epsilon}")))?;
    recheck(&x, value, epsilon, opts)
}

/// Independent evaluation through the behavior module.
fn recheck(x: &[f64], value: f64, epsilon: f64, opts: &VariationalOptions) -> Result<LowerBoundResult> {
    let mut params = AnsatzParams::from_vec(x);
    // Exact renormalization; the search keeps this to rounding error.
    let norm = params.weighted_norm_sqr().sqrt();
    params.c000 /= norm;
    params.c001 /= norm;
    params.c011 /= norm;
    params.c111 /= norm;
    let psi = ansatz_state(&params)?;
    let behavior = joint_distribution(&QuantumState::Pure(psi), &ansatz_measurements(&params)?)?;
    let stats = hardy_statistics(&behavior)?;
    if (stats.p - value).abs() > 1e-10 {
        return Err(Error::Numeric(format!(
            "success probability re-evaluates to {} instead of {value}",
            stats.p
        )));
    }
    let constraint_values = [stats.zeros[0], stats.zeros[1], stats.zeros[2], stats.zeros[3]];
    if let Some(g) = constraint_values.iter().find(|&&g| g > epsilon + RECHECK_TOL) {
        return Err(Error::Numeric(format!(
            "constraint re-evaluates to {g} above epsilon {epsilon}"
        )));
    }
    Ok(LowerBoundResult {
        value: stats.p,
        params,
        constraint_values,
        restarts_used: opts.restarts + opts.extra_starts.len(),
        seed: opts.seed,
    })
}

fn random_start(seed: u64, restart: usize, decoupled: bool) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    // A standard normal in R^4 scaled by the metric diag(1, 3, 3, 1)^{-1/2}
    // is uniform on the weighted sphere after projection.
    let w = [1.0, 3f64.sqrt(), 3f64.sqrt(), 1.0];
    let mut v: Vec<f64> = w.iter().map(|w| rng.sample::<f64, _>(StandardNormal) / w).collect();
    for _ in 0..3 {
        v.push(rng.gen_range(0.0..TAU));
    }
    for _ in 0..3 {
        v.push(rng.gen_range(ANGLE_MARGIN..PI - ANGLE_MARGIN));
    }
    if decoupled {
        for _ in 0..3 {
            v.push(rng.gen_range(0.0..TAU));
        }
    }
    project(&mut v);
    v
}

/// Penalty stages, feasibility repair and barrier polish from one start.
/// Returns the final point and its value when feasible.
fn optimize_from(x0: &[f64], anchor: &[f64], epsilon: f64, max_evals: usize) -> Option<(Vec<f64>, f64)> {
    let mut x = x0.to_vec();
    project(&mut x);
    let nm = NmOptions {
        max_evals,
        f_tol: 1e-15,
        x_tol: 1e-9,
    };
    let steps = |scale: f64| -> Vec<f64> { x0.iter().map(|_| scale).collect() };

    for (stage, &mu) in PENALTIES.iter().enumerate() {
        let mut f = |v: &[f64]| {
            let (p, g) = evaluate(v);
            -p + mu * g.iter().map(|gi| (gi - epsilon).max(0.0).powi(2)).sum::<f64>()
        };
        let scale = [0.2, 0.05, 0.01][stage];
        x = nelder_mead(&mut f, &project, &x, &steps(scale), &nm);
    }

    let (_, g) = evaluate(&x);
    if !is_feasible(&g, epsilon) {
        x = repair(&x, anchor, epsilon)?;
    }

    let mut barrier = |v: &[f64]| {
        let (p, g) = evaluate(v);
        if is_feasible(&g, epsilon) {
            -p
        } else {
            f64::INFINITY
        }
    };
    for scale in [1e-2, 1e-3, 1e-4] {
        x = nelder_mead(&mut barrier, &project, &x, &steps(scale), &nm);
    }
    let (p, g) = evaluate(&x);
    is_feasible(&g, epsilon).then_some((x, p))
}

/// Bisects along the segment toward the (always feasible) anchor for the
/// feasible point closest to `x`.
fn repair(x: &[f64], anchor: &[f64], epsilon: f64) -> Option<Vec<f64>> {
    let point = |t: f64| -> Vec<f64> {
        let mut v: Vec<f64> = anchor.iter().zip(x).map(|(a, b)| a + t * (b - a)).collect();
        project(&mut v);
        v
    };
    let feasible = |t: f64| is_feasible(&evaluate(&point(t)).1, epsilon);
    if !feasible(0.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(point(lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis_111() -> AnsatzParams {
        AnsatzParams {
            c000: 0.0,
            c001: 0.0,
            c011: 0.0,
            c111: 1.0,
            phi: 0.0,
            xi: 0.0,
            theta: 0.0,
            meas_alpha: PI / 2.0,
            meas_beta: PI / 2.0,
            meas_gamma: PI / 2.0,
            meas_phases: None,
        }
    }

    #[test]
    fn basis_state_and_phase_pattern() {
        let psi = ansatz_state(&basis_111()).unwrap();
        assert!((psi.amps()[7].re - 1.0).abs() < 1e-15);

        let p = AnsatzParams {
            c000: 0.5,
            c001: 0.3,
            c011: 0.2,
            c111: (1.0f64 - 0.25 - 0.27 - 0.12).sqrt(),
            phi: 0.1,
            xi: 0.7,
            theta: 1.9,
            ..basis_111()
        };
        let a = ansatz_state(&p).unwrap();
        let a = a.amps();
        let expect = |idx: usize, c: f64, ph: f64| (a[idx] - C64::from_polar(c, -ph)).norm() < 1e-14;
        assert!(expect(0b000, 0.5, 0.1 + 0.7 + 1.9));
        assert!(expect(0b010, 0.3, 0.1 + 1.9));
        assert!(expect(0b100, 0.3, 0.7 + 1.9));
        assert!(expect(0b001, 0.3, 0.1 + 0.7));
        assert!(expect(0b011, 0.2, 0.1));
        assert!(expect(0b101, 0.2, 0.7));
        assert!(expect(0b110, 0.2, 1.9));
    }

    #[test]
    fn rejects_unnormalized_and_boundary_angles() {
        let bad = AnsatzParams {
            c000: 0.5,
            ..basis_111()
        };
        assert!(matches!(ansatz_state(&bad), Err(Error::Validation(_))));
        let edge = AnsatzParams {
            meas_beta: 0.0,
            ..basis_111()
        };
        assert!(matches!(
            ansatz_measurements(&edge),
            Err(Error::DegenerateMeasurement(_))
        ));
        let edge = AnsatzParams {
            meas_gamma: PI,
            ..basis_111()
        };
        assert!(matches!(
            ansatz_measurements(&edge),
            Err(Error::DegenerateMeasurement(_))
        ));
    }

    #[test]
    fn fast_evaluator_matches_behavior_module() {
        for r in 1..6 {
            for decoupled in [false, true] {
                let v = random_start(3, r, decoupled);
                let params = AnsatzParams::from_vec(&v);
                let psi = ansatz_state(&params).unwrap();
                let b = joint_distribution(&QuantumState::Pure(psi), &ansatz_measurements(&params).unwrap()).unwrap();
                let stats = hardy_statistics(&b).unwrap();
                let (p, g) = evaluate(&v);
                assert!((p - stats.p).abs() < 1e-13);
                for i in 0..4 {
                    assert!(
                        (g[i] - stats.zeros[i]).abs() < 1e-13,
                        "{i}: {} vs {}",
                        g[i],
                        stats.zeros[i]
                    );
                }
            }
        }
    }

    #[test]
    fn hardy_optimum_is_feasible_at_zero() {
        let v = AnsatzParams::hardy_optimum().unwrap().to_vec();
        let (p, g) = evaluate(&v);
        assert!((p - 0.018193827729559325).abs() < 1e-12);
        assert!(g.iter().all(|&x| x < 1e-15), "{g:?}");
    }

    #[test]
    fn validates_inputs() {
        assert!(matches!(lower_bound(-0.1, 1, 0), Err(Error::Validation(_))));
        assert!(matches!(lower_bound(0.3, 1, 0), Err(Error::Validation(_))));
        assert!(matches!(lower_bound(0.0, 0, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn random_starts_are_normalized_and_reproducible() {
        let a = random_start(11, 4, false);
        assert_eq!(a, random_start(11, 4, false));
        assert_ne!(a, random_start(11, 5, false));
        assert!((AnsatzParams::from_vec(&a).weighted_norm_sqr() - 1.0).abs() < 1e-14);
        assert_eq!(random_start(11, 4, true).len(), 13);
    }
}
