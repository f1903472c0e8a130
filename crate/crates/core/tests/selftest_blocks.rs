use hardy_core::behavior::QuantumState;
use hardy_core::numkernel::{apply_local, eig_herm, kron, DenseMatrix, StateVector, C64};
use hardy_core::selftest::{
    canonical_instance, jordan_blocks, selftest_report, selftest_report_with, ObservablePair, SelfTestMode,
    SelfTestOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `exp(iH)` for a random Hermitian `H`.
fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> DenseMatrix {
    let g = DenseMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let h = g.add(&g.adjoint()).unwrap();
    let e = eig_herm(&h, 1e-9).unwrap();
    let phases = DenseMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::from_polar(1.0, e.eigenvalues[i])
        } else {
            C64::new(0.0, 0.0)
        }
    });
    e.eigenvectors
        .matmul(&phases)
        .unwrap()
        .matmul(&e.eigenvectors.adjoint())
        .unwrap()
}

fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..d).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn direct_sum(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (m, n) = (a.rows(), b.rows());
    DenseMatrix::from_fn(m + n, m + n, |i, j| match (i < m, j < m) {
        (true, true) => a[(i, j)],
        (false, false) => b[(i - m, j - m)],
        _ => C64::new(0.0, 0.0),
    })
}

/// Optimal three-party Hardy state with `junk_dim`-dimensional junk on every
/// party (the junk is a random, generally entangled, state), then a random
/// local unitary per party on state and observables alike.
fn hidden_instance(rng: &mut ChaCha8Rng, junk_dim: usize) -> (StateVector, Vec<ObservablePair>) {
    let (psi, obs) = canonical_instance(3).unwrap();
    let junk = random_vector(rng, junk_dim.pow(3));
    let d = 2 * junk_dim;
    let mut amps = vec![C64::new(0.0, 0.0); d.pow(3)];
    for (s, a) in psi.amps().iter().enumerate() {
        for (j, b) in junk.iter().enumerate() {
            let local = |k: usize| ((s >> (2 - k)) & 1) * junk_dim + (j / junk_dim.pow(2 - k as u32)) % junk_dim;
            amps[(local(0) * d + local(1)) * d + local(2)] = a * b;
        }
    }
    let dims = vec![d; 3];
    let id = DenseMatrix::identity(junk_dim);
    let mut observables = Vec::new();
    for (party, o) in obs.iter().enumerate() {
        let u = random_unitary(rng, d);
        amps = apply_local(&u, party, &dims, &amps).unwrap();
        let lifted = ObservablePair::new(kron(&o.a1, &id).unwrap(), kron(&o.a2, &id).unwrap()).unwrap();
        observables.push(lifted.conjugated(&u).unwrap());
    }
    (StateVector::new(dims, amps).unwrap(), observables)
}

#[test]
fn recovers_angles_of_a_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = ObservablePair::canonical(0.3).unwrap();
    let q = ObservablePair::canonical(0.7).unwrap();
    let v = random_unitary(&mut rng, 4);
    let sum = ObservablePair::new(direct_sum(&p.a1, &q.a1), direct_sum(&p.a2, &q.a2))
        .unwrap()
        .conjugated(&v)
        .unwrap();
    let dec = jordan_blocks(&sum, 1e-9).unwrap();
    let mut found: Vec<f64> = dec.blocks.iter().map(|b| b.overlap_sq().unwrap()).collect();
    found.sort_by(f64::total_cmp);
    assert_eq!(found.len(), 2);
    assert!(
        (found[0] - 0.3).abs() < 1e-9 && (found[1] - 0.7).abs() < 1e-9,
        "{found:?}"
    );
    assert!(dec.completeness_error().unwrap() < 1e-9);
    assert!(dec.invariance_error(&sum).unwrap() < 1e-9);
}

#[test]
fn hidden_hardy_state_with_junk() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..20 {
        let junk_dim = 1 + trial % 2;
        let (psi, obs) = hidden_instance(&mut rng, junk_dim);
        let r = selftest_report(&psi.into(), &obs, 1e-6).unwrap();
        assert!(r.total_fidelity >= 1.0 - 1e-6, "trial {trial}: {}", r.total_fidelity);
        assert!(r.total_fidelity <= 1.0 + 1e-9);
        assert_eq!(r.junk_dims, vec![junk_dim; 3]);
        assert!(r.certified(1e-6));
        assert!(r
            .terms
            .iter()
            .all(|t| t.weight >= -1e-10 && (t.weight < 1e-12 || t.angles_matched)));
        for (dec, o) in r.decompositions.iter().zip(&obs) {
            assert!(dec.completeness_error().unwrap() < 1e-9);
            assert!(dec.invariance_error(o).unwrap() < 1e-9);
        }
    }
}

#[test]
fn weights_match_block_projector_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (psi, obs) = hidden_instance(&mut rng, 2);
    let state: QuantumState = psi.clone().into();
    let r = selftest_report(&state, &obs, 1e-6).unwrap();
    let rho = psi.density();
    let mut total = 0.0;
    for t in &r.terms {
        let proj: Vec<DenseMatrix> = t
            .blocks
            .iter()
            .zip(&r.decompositions)
            .map(|(&b, d)| {
                let basis = &d.blocks[b].basis;
                basis.matmul(&basis.adjoint()).unwrap()
            })
            .collect();
        let big = kron(&kron(&proj[0], &proj[1]).unwrap(), &proj[2]).unwrap();
        let trace = rho.matmul(&big).unwrap().trace().re;
        assert!((trace - t.weight).abs() < 1e-8);
        total += t.weight;
    }
    assert!((total - 1.0).abs() < 1e-8);
}

#[test]
fn fidelity_is_invariant_under_more_local_unitaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (psi, obs) = hidden_instance(&mut rng, 2);
    let before = selftest_report(&psi.clone().into(), &obs, 1e-6).unwrap().total_fidelity;

    let dims = psi.dims().to_vec();
    let mut amps = psi.amps().to_vec();
    let mut rotated = Vec::new();
    for (party, o) in obs.iter().enumerate() {
        let u = random_unitary(&mut rng, dims[party]);
        amps = apply_local(&u, party, &dims, &amps).unwrap();
        rotated.push(o.conjugated(&u).unwrap());
    }
    let after = selftest_report(&StateVector::new(dims, amps).unwrap().into(), &rotated, 1e-6)
        .unwrap()
        .total_fidelity;
    assert!((before - after).abs() < 1e-9);
}

#[test]
fn mixed_junk_is_accepted() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (psi, obs) = canonical_instance(3).unwrap();
    // Party 1 carries a maximally mixed junk qubit.
    let junk = DenseMatrix::diag(&[0.5, 0.5]);
    let sys = psi.density();
    let rho = DenseMatrix::from_fn(16, 16, |r, c| {
        // Party 1 index is (system bit, junk bit); the other parties are qubits.
        let split = |i: usize| ((((i >> 3) & 1) << 2) | (i & 3), (i >> 2) & 1);
        let ((sr, jr), (sc, jc)) = (split(r), split(c));
        sys[(sr, sc)] * junk[(jr, jc)]
    });
    let u = random_unitary(&mut rng, 4);
    let big_u = kron(&u, &DenseMatrix::identity(4)).unwrap();
    let rho = big_u.matmul(&rho).unwrap().matmul(&big_u.adjoint()).unwrap();
    let id = DenseMatrix::identity(2);
    let mut observables = obs.clone();
    observables[0] = ObservablePair::new(kron(&obs[0].a1, &id).unwrap(), kron(&obs[0].a2, &id).unwrap())
        .unwrap()
        .conjugated(&u)
        .unwrap();
    let state = QuantumState::mixed(vec![4, 2, 2], rho).unwrap();
    let r = selftest_report(&state, &observables, 1e-6).unwrap();
    assert!((r.total_fidelity - 1.0).abs() < 1e-9, "{}", r.total_fidelity);
    assert_eq!(r.junk_dims, vec![2, 1, 1]);
}

#[test]
fn degenerate_sector_is_reported_not_raised() {
    let (psi, obs) = canonical_instance(3).unwrap();
    let one = DenseMatrix::identity(1);
    let obs: Vec<ObservablePair> = obs
        .iter()
        .map(|o| ObservablePair::new(direct_sum(&o.a1, &one), direct_sum(&o.a2, &one)).unwrap())
        .collect();
    let mut amps = vec![C64::new(0.0, 0.0); 27];
    for (s, a) in psi.amps().iter().enumerate() {
        let idx = ((s >> 2) * 3 + ((s >> 1) & 1)) * 3 + (s & 1);
        amps[idx] = a * 0.9f64.sqrt();
    }
    amps[26] = C64::new(0.1f64.sqrt(), 0.0);
    let state: QuantumState = StateVector::new(vec![3; 3], amps).unwrap().into();
    let loose = SelfTestOptions {
        mode: SelfTestMode::Loose,
        ..SelfTestOptions::default()
    };
    let r = selftest_report_with(&state, &obs, &loose).unwrap();
    assert!((r.degenerate_weight - 0.1).abs() < 1e-9);
    assert!((r.total_fidelity - 0.9).abs() < 1e-9);
    assert!(!r.certified(1e-6));
    // The diluted state misses the optimum, so exact mode refuses it.
    assert!(selftest_report(&state, &obs, 1e-6).is_err());
}

#[test]
fn mismatched_angle_lowers_fidelity_in_loose_mode() {
    let pair = hardy_core::hardystate::MeasurementPair::from_alpha_sq(0.45).unwrap();
    let psi = hardy_core::hardystate::hardy_state(3, &vec![pair; 3]).unwrap();
    let obs = vec![ObservablePair::from_pair(&pair).unwrap(); 3];
    let loose = SelfTestOptions {
        mode: SelfTestMode::Loose,
        ..SelfTestOptions::default()
    };
    let r = selftest_report_with(&psi.clone().into(), &obs, &loose).unwrap();
    assert!(!r.terms[0].angles_matched);
    assert!(r.total_fidelity < 1.0 - 1e-4);
    assert!(matches!(
        selftest_report(&psi.into(), &obs, 1e-6),
        Err(hardy_core::Error::HypothesisUnmet(_))
    ));
}
