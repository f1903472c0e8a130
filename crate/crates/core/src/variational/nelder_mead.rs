//! Derivative-free simplex-reflection minimizer.

pub(crate) struct NmOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and every vertex is within this distance of the best one.
    pub x_tol: f64,
}

/// Minimizes `f` and returns the best vertex. `project` maps every proposed point back onto the feasible
/// parameter manifold before it is evaluated; `+∞` values act as a barrier.
pub(crate) fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    project: &dyn Fn(&mut [f64]),
    x0: &[f64],
    steps: &[f64],
    opts: &NmOptions,
) -> Vec<f64> {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &mut Vec<f64>, evals: &mut usize| {
        project(x);
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    let f0 = eval(&mut start, &mut evals);
    simplex.push((start, f0));
    for i in 0..n {
        let mut x = simplex[0].0.clone();
        x[i] += steps[i];
        let fx = eval(&mut x, &mut evals);
        simplex.push((x, fx));
    }

    let point = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if evals >= opts.max_evals {
            break;
        }
        if best.is_finite() && worst - best <= opts.f_tol {
            let spread = simplex[1..]
                .iter()
                .map(|(x, _)| {
                    x.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if spread <= opts.x_tol {
                break;
            }
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst_x = simplex[n].0.clone();
        let mut xr = point(&centroid, &worst_x, -1.0);
        let fr = eval(&mut xr, &mut evals);

        if fr < best {
            let mut xe = point(&centroid, &worst_x, -2.0);
            let fe = eval(&mut xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (mut xc, inside) = if fr < worst {
            (point(&centroid, &xr, 0.5), false)
        } else {
            (point(&centroid, &worst_x, 0.5), true)
        };
        let fc = eval(&mut xc, &mut evals);
        let accept = if inside { fc < worst } else { fc <= fr };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best_x = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut x = point(&best_x, &entry.0, 0.5);
            let fx = eval(&mut x, &mut evals);
            *entry = (x, fx);
        }
    }
    simplex.swap_remove(0).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> NmOptions {
        NmOptions {
            max_evals: 20_000,
            f_tol: 1e-16,
            x_tol: 1e-10,
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let mut f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(&mut f, &|_| {}, &[-1.2, 1.0], &[0.5, 0.5], &opts());
        assert!((r[0] - 1.0).abs() < 1e-5 && (r[1] - 1.0).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn respects_barrier_and_projection() {
        // minimize -x - y on the unit circle with x ≤ 0.5 as a barrier.
        let mut f = |x: &[f64]| if x[0] > 0.5 { f64::INFINITY } else { -x[0] - x[1] };
        let project = |x: &mut [f64]| {
            let n = (x[0] * x[0] + x[1] * x[1]).sqrt();
            x.iter_mut().for_each(|v| *v /= n);
        };
        let r = nelder_mead(&mut f, &project, &[0.0, 1.0], &[0.1, 0.0], &opts());
        assert!(r[0] <= 0.5);
        assert!((r[1] - 0.75f64.sqrt()).abs() < 1e-6, "{r:?}");
    }
}
