//! Fuzzy landscapes built by morphological dilation, and the degree of
//! intersection that turns a landscape and a target into a relation degree.

use crate::error::{Error, Result};
use crate::fuzzy::{field_sum, FuzzyDegree, ScalarField};
use crate::scalar::Scalar;

/// Reference pixels beyond this count are reduced to a subsample of their boundary.
pub const MAX_REFERENCE_SAMPLES: usize = 256;

#[derive(Clone, Copy, Debug)]
struct RefPixel<T> {
    x: T,
    y: T,
    degree: T,
}

fn is_boundary<T: Scalar>(f: &ScalarField<T>, x: usize, y: usize) -> bool {
    let (w, h) = (f.width(), f.height());
    x == 0
        || y == 0
        || x + 1 == w
        || y + 1 == h
        || f.get(x - 1, y) <= T::zero()
        || f.get(x + 1, y) <= T::zero()
        || f.get(x, y - 1) <= T::zero()
        || f.get(x, y + 1) <= T::zero()
}

/// Support pixels with a background 4-neighbour, plus every non-crisp support
/// pixel (a partial-degree interior pixel can still dominate the dilation).
fn boundary_pixels<T: Scalar>(f: &ScalarField<T>) -> Vec<RefPixel<T>> {
    f.support()
        .into_iter()
        .filter(|&(x, y, v)| v < T::one() || is_boundary(f, x, y))
        .map(|(x, y, v)| RefPixel {
            x: T::from_usize_lossy(x),
            y: T::from_usize_lossy(y),
            degree: v,
        })
        .collect()
}

/// Boundary (and non-crisp) pixels of the reference, evenly subsampled to at
/// most [`MAX_REFERENCE_SAMPLES`]. Interior crisp pixels never attain the
/// maximum of a dilation outside the object.
fn reference_samples<T: Scalar>(f: &ScalarField<T>) -> Vec<RefPixel<T>> {
    let boundary = boundary_pixels(f);
    if boundary.len() <= MAX_REFERENCE_SAMPLES {
        return boundary;
    }
    (0..MAX_REFERENCE_SAMPLES)
        .map(|i| boundary[i * boundary.len() / MAX_REFERENCE_SAMPLES])
        .collect()
}

/// Unit vector of `angle`, with rounding residue such as `sin(π)` set to zero
/// so that opposite directions are exact negatives of each other.
fn unit_direction<T: Scalar>(angle: T) -> (T, T) {
    let snap = |v: T| {
        if v.abs() < T::lit(1e-12) {
            T::zero()
        } else {
            v
        }
    };
    (snap(angle.cos()), snap(angle.sin()))
}

/// Directional membership `max(0, 1 - 2θ/π)` from the cosine of the angle.
#[inline]
fn directional_membership<T: Scalar>(cos: T) -> T {
    let theta = cos.max(-T::one()).min(T::one()).acos();
    (T::one() - T::lit(2.0) * theta / T::PI()).max(T::zero())
}

/// Landscape of the pixels lying in direction `direction_angle` from the
/// reference (image axes: +x right, +y down, so "above" is `-π/2`).
pub fn directional_landscape<T: Scalar>(
    reference: &ScalarField<T>,
    direction_angle: T,
) -> Result<ScalarField<T>> {
    Ok(directional_landscapes(reference, &[direction_angle])?.remove(0))
}

/// One landscape per direction, sharing the pass over reference samples.
pub fn directional_landscapes<T: Scalar>(
    reference: &ScalarField<T>,
    direction_angles: &[T],
) -> Result<Vec<ScalarField<T>>> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let (crisp, fuzzy): (Vec<RefPixel<T>>, Vec<RefPixel<T>>) = reference_samples(reference)
        .into_iter()
        .partition(|a| a.degree >= T::one());
    let dirs: Vec<(T, T)> = direction_angles
        .iter()
        .map(|&a| unit_direction(a))
        .collect();
    let nd = dirs.len();
    let (w, h) = (reference.width(), reference.height());
    let mut data: Vec<Vec<T>> = vec![Vec::with_capacity(w * h); nd];
    let floor = -T::one() - T::one();
    let mut best_crisp_cos = vec![floor; nd];
    let mut best_fuzzy = vec![T::zero(); nd];
    for py in 0..h {
        for px in 0..w {
            let own = reference.get(px, py);
            if own >= T::one() {
                data.iter_mut().for_each(|d| d.push(T::one()));
                continue;
            }
            let (fx, fy) = (T::from_usize_lossy(px), T::from_usize_lossy(py));
            best_crisp_cos.iter_mut().for_each(|c| *c = floor);
            best_fuzzy.iter_mut().for_each(|c| *c = T::zero());
            for a in &crisp {
                let (dx, dy) = (fx - a.x, fy - a.y);
                let norm_sq = dx * dx + dy * dy;
                if norm_sq <= T::zero() {
                    continue;
                }
                let inv = T::one() / norm_sq.sqrt();
                let (cx, cy) = (dx * inv, dy * inv);
                for (best, &(ux, uy)) in best_crisp_cos.iter_mut().zip(&dirs) {
                    let cos = cx * ux + cy * uy;
                    if cos > *best {
                        *best = cos;
                    }
                }
            }
            for a in &fuzzy {
                let (dx, dy) = (fx - a.x, fy - a.y);
                let norm_sq = dx * dx + dy * dy;
                if norm_sq <= T::zero() {
                    continue;
                }
                let inv = T::one() / norm_sq.sqrt();
                for (best, &(ux, uy)) in best_fuzzy.iter_mut().zip(&dirs) {
                    if a.degree > *best {
                        let cos = (dx * ux + dy * uy) * inv;
                        *best = best.max(a.degree.min(directional_membership(cos)));
                    }
                }
            }
            for i in 0..nd {
                let mut v = own.max(best_fuzzy[i]);
                if best_crisp_cos[i] >= -T::one() {
                    v = v.max(directional_membership(best_crisp_cos[i]));
                }
                data[i].push(v.min(T::one()).max(T::zero()));
            }
        }
    }
    Ok(data
        .into_iter()
        .map(|d| ScalarField::from_raw(w, h, d))
        .collect())
}

/// Trapezoidal "close to" kernel: 1 up to `near`, linear down to 0 at `far`.
#[inline]
fn distance_membership<T: Scalar>(d: T, near: T, far: T) -> T {
    if d <= near {
        T::one()
    } else if d >= far {
        T::zero()
    } else {
        (far - d) / (far - near)
    }
}

/// Landscape of the pixels within `near_radius` of the reference, fading to 0 at `far_radius`.
pub fn distance_landscape<T: Scalar>(
    reference: &ScalarField<T>,
    near_radius: T,
    far_radius: T,
) -> Result<ScalarField<T>> {
    if !(near_radius >= T::zero() && near_radius < far_radius) {
        return Err(Error::InvalidRadii {
            near: near_radius.as_f64(),
            far: far_radius.as_f64(),
        });
    }
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let samples = boundary_pixels(reference);
    let (w, h) = (reference.width(), reference.height());
    let far_sq = far_radius * far_radius;
    let mut data = Vec::with_capacity(w * h);
    for py in 0..h {
        for px in 0..w {
            let own = reference.get(px, py);
            if own >= T::one() {
                data.push(T::one());
                continue;
            }
            let (fx, fy) = (T::from_usize_lossy(px), T::from_usize_lossy(py));
            let mut v = own;
            for a in &samples {
                if a.degree <= v {
                    continue;
                }
                let (dx, dy) = (fx - a.x, fy - a.y);
                let dsq = dx * dx + dy * dy;
                if dsq >= far_sq {
                    continue;
                }
                let k = distance_membership(dsq.sqrt(), near_radius, far_radius);
                v = v.max(a.degree.min(k));
            }
            data.push(v.min(T::one()).max(T::zero()));
        }
    }
    Ok(ScalarField::from_raw(w, h, data))
}

/// `Σ min(L, B) / min(Σ L, Σ B)`.
pub fn degree_of_intersection<T: Scalar>(
    landscape: &ScalarField<T>,
    target: &ScalarField<T>,
) -> Result<FuzzyDegree<T>> {
    landscape.same_dims(target)?;
    let sum_l = field_sum(landscape);
    let sum_t = field_sum(target);
    if sum_l <= T::zero() || sum_t <= T::zero() {
        return Err(Error::DegenerateIntersection);
    }
    let overlap: T = landscape
        .data()
        .iter()
        .zip(target.data())
        .map(|(l, b)| l.min(*b))
        .sum();
    FuzzyDegree::new(overlap / sum_l.min(sum_t))
}
