use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyDegree, ScalarField};
use crate::scalar::Scalar;

/// Elongation of a shape: `1 - minor_extent / major_extent` along the
/// degree-weighted principal axes of its support.
pub fn stretched_degree<T: Scalar>(mask: &ScalarField<T>) -> Result<FuzzyDegree<T>> {
    let support = mask.support();
    if support.len() < 2 {
        return Err(Error::DegenerateShape(format!(
            "stretched needs at least 2 support pixels, got {}",
            support.len()
        )));
    }
    let (cx, cy) = mask.centroid().expect("non-empty support");
    let (mut sxx, mut syy, mut sxy, mut sw) = (T::zero(), T::zero(), T::zero(), T::zero());
    for &(x, y, w) in &support {
        let dx = T::from_usize_lossy(x) - cx;
        let dy = T::from_usize_lossy(y) - cy;
        sxx = sxx + w * dx * dx;
        syy = syy + w * dy * dy;
        sxy = sxy + w * dx * dy;
        sw = sw + w;
    }
    let (sxx, syy, sxy) = (sxx / sw, syy / sw, sxy / sw);

    // major axis of the 2x2 covariance
    let angle = T::lit(0.5) * (sxy + sxy).atan2(sxx - syy);
    let (ux, uy) = (angle.cos(), angle.sin());
    let (vx, vy) = (-uy, ux);

    let extent = |ax: T, ay: T| {
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for &(x, y, _) in &support {
            let p = T::from_usize_lossy(x) * ax + T::from_usize_lossy(y) * ay;
            lo = lo.min(p);
            hi = hi.max(p);
        }
        hi - lo
    };
    let (e1, e2) = (extent(ux, uy), extent(vx, vy));
    let (major, minor) = if e1 >= e2 { (e1, e2) } else { (e2, e1) };
    if major <= T::zero() {
        return Err(Error::DegenerateShape("support has no extent".into()));
    }
    // collinear supports leave a rounding-level minor extent
    if minor <= T::lit(1e-6) * major {
        return Ok(FuzzyDegree::one());
    }
    Ok(FuzzyDegree::clamped(T::one() - minor / major))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotated_rect(
        w: usize,
        h: usize,
        cx: f64,
        cy: f64,
        len: f64,
        wid: f64,
        phi: f64,
    ) -> ScalarField<f64> {
        ScalarField::from_fn(w, h, |x, y| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let u = dx * phi.cos() + dy * phi.sin();
            let v = -dx * phi.sin() + dy * phi.cos();
            if u.abs() <= len / 2.0 && v.abs() <= wid / 2.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn disk_is_not_stretched() {
        let d = ScalarField::<f64>::from_fn(64, 64, |x, y| {
            let (dx, dy) = (x as f64 - 31.5, y as f64 - 31.5);
            if dx * dx + dy * dy <= 400.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(stretched_degree(&d).unwrap().value() < 0.05);
    }

    #[test]
    fn axis_aligned_rectangle() {
        let r = ScalarField::<f64>::from_fn(80, 40, |x, y| {
            if (20..60).contains(&x) && (15..25).contains(&y) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let d = stretched_degree(&r).unwrap().value();
        assert!((d - 0.75).abs() <= 0.03, "{d}");
    }

    #[test]
    fn rotated_rectangle_keeps_degree() {
        let base = stretched_degree(&rotated_rect(96, 96, 48.0, 48.0, 40.0, 10.0, 0.0))
            .unwrap()
            .value();
        let rot = stretched_degree(&rotated_rect(
            96,
            96,
            48.0,
            48.0,
            40.0,
            10.0,
            30f64.to_radians(),
        ))
        .unwrap()
        .value();
        assert!((base - rot).abs() <= 0.05, "{base} vs {rot}");
    }

    #[test]
    fn collinear_support_is_maximally_stretched() {
        let line =
            ScalarField::<f64>::from_fn(20, 20, |x, y| if y == 4 && x < 12 { 1.0 } else { 0.0 })
                .unwrap();
        assert_eq!(stretched_degree(&line).unwrap().value(), 1.0);
        let diag =
            ScalarField::<f64>::from_fn(20, 20, |x, y| if x == y { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(stretched_degree(&diag).unwrap().value(), 1.0);
    }

    #[test]
    fn single_pixel_is_degenerate() {
        let mut f = ScalarField::<f64>::zeros(5, 5).unwrap();
        f.set(2, 2, FuzzyDegree::one());
        assert!(matches!(
            stretched_degree(&f),
            Err(Error::DegenerateShape(_))
        ));
    }

    #[test]
    fn translation_invariant() {
        let a = stretched_degree(&rotated_rect(96, 96, 30.0, 30.0, 30.0, 12.0, 0.3)).unwrap();
        let b = stretched_degree(&rotated_rect(96, 96, 60.0, 50.0, 30.0, 12.0, 0.3)).unwrap();
        assert!((a.value() - b.value()).abs() < 1e-9);
    }
}
