//! Downhill simplex (Nelder–Mead) minimisation for small derivative-free problems.

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct SimplexOptions<T> {
    pub max_iterations: usize,
    /// Stop once `|f_worst - f_best| <= rel_tolerance * (|f_best| + |f_worst|) / 2`.
    pub rel_tolerance: T,
}

impl<T: Scalar> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tolerance: T::lit(1e-4),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult<T> {
    pub point: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Minimises `f` from `start`, with the initial simplex spanned by `start + steps[i] e_i`.
pub fn minimize<T, F>(
    mut f: F,
    start: &[T],
    steps: &[T],
    options: &SimplexOptions<T>,
) -> SimplexResult<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    assert_eq!(start.len(), steps.len(), "one step per coordinate");
    let n = start.len();
    let mut evaluations = 0usize;
    let mut eval = |p: &[T], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(p);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    let v0 = eval(start, &mut evaluations);
    simplex.push((start.to_vec(), v0));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] = p[i] + steps[i];
        let v = eval(&p, &mut evaluations);
        simplex.push((p, v));
    }

    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let mut iterations = 0;
    while iterations < options.max_iterations {
        // stable sort keeps earlier vertices first on ties, so runs are reproducible
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let scale = (best.abs() + worst.abs()) / T::lit(2.0);
        if (worst - best).abs() <= options.rel_tolerance * scale + T::min_positive_value() {
            break;
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); n];
        for (p, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c = *c + *x;
            }
        }
        let nn = T::from_usize_lossy(n);
        centroid.iter_mut().for_each(|c| *c = *c / nn);

        let along = |t: T, from: &[T]| -> Vec<T> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, w)| *c + t * (*c - *w))
                .collect()
        };

        let worst_point = simplex[n].0.clone();
        let reflected = along(alpha, &worst_point);
        let fr = eval(&reflected, &mut evaluations);
        if fr < simplex[0].1 {
            let expanded = along(gamma, &worst_point);
            let fe = eval(&expanded, &mut evaluations);
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < simplex[n].1 {
                let c = along(rho, &worst_point);
                let fc = eval(&c, &mut evaluations);
                (c, fc)
            } else {
                let c = along(-rho, &worst_point);
                let fc = eval(&c, &mut evaluations);
                (c, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let p: Vec<T> = anchor
                        .iter()
                        .zip(&vertex.0)
                        .map(|(a, x)| *a + sigma * (*x - *a))
                        .collect();
                    let v = eval(&p, &mut evaluations);
                    *vertex = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (point, value) = simplex.swap_remove(0);
    SimplexResult {
        point,
        value,
        iterations,
        evaluations,
    }
}
