//! Line symmetry between two objects, searched with the downhill simplex.

use serde::{Deserialize, Serialize};

use super::simplex::{minimize, SimplexOptions};
use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyDegree, ScalarField};
use crate::scalar::Scalar;

/// A line `{p : (p - c) · (cos θ, sin θ) = rho}` where `c` is the image centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line<T> {
    /// Signed distance from the image centre, in pixels.
    pub rho: T,
    /// Angle of the line normal, in radians.
    pub theta: T,
}

impl<T: Scalar> Line<T> {
    pub fn new(rho: T, theta: T) -> Self {
        Self { rho, theta }
    }

    /// Same line with `theta` folded into `[0, π)`.
    pub fn normalized(self) -> Self {
        let pi = T::PI();
        let two_pi = pi + pi;
        let mut theta = self.theta % two_pi;
        if theta < T::zero() {
            theta = theta + two_pi;
        }
        let mut rho = self.rho;
        if theta >= pi {
            theta = theta - pi;
            rho = -rho;
        }
        Self { rho, theta }
    }

    fn normal(&self) -> (T, T) {
        (self.theta.cos(), self.theta.sin())
    }
}

#[derive(Clone, Copy, Debug)]
struct Reflector<T> {
    cx: T,
    cy: T,
    nx: T,
    ny: T,
    rho: T,
}

impl<T: Scalar> Reflector<T> {
    fn new(width: usize, height: usize, line: Line<T>) -> Self {
        let (nx, ny) = line.normal();
        Self {
            cx: T::from_usize_lossy(width - 1) / T::lit(2.0),
            cy: T::from_usize_lossy(height - 1) / T::lit(2.0),
            nx,
            ny,
            rho: line.rho,
        }
    }

    #[inline]
    fn apply(&self, x: T, y: T) -> (T, T) {
        let s = (x - self.cx) * self.nx + (y - self.cy) * self.ny - self.rho;
        let two = T::lit(2.0);
        (x - two * s * self.nx, y - two * s * self.ny)
    }

    /// Nearest-neighbour sample of `f` at the mirror of pixel `(x, y)`.
    #[inline]
    fn sample(&self, f: &ScalarField<T>, x: usize, y: usize) -> T {
        let (sx, sy) = self.apply(T::from_usize_lossy(x), T::from_usize_lossy(y));
        let (rx, ry) = (sx.round(), sy.round());
        if rx < T::zero() || ry < T::zero() {
            return T::zero();
        }
        let (ix, iy) = (
            rx.to_usize().unwrap_or(usize::MAX),
            ry.to_usize().unwrap_or(usize::MAX),
        );
        if ix >= f.width() || iy >= f.height() {
            return T::zero();
        }
        f.get(ix, iy)
    }
}

/// Mirror image of `f` across `line`, nearest-neighbour resampled; content
/// mapped outside the grid is dropped.
pub fn reflect_field<T: Scalar>(f: &ScalarField<T>, line: Line<T>) -> ScalarField<T> {
    let r = Reflector::new(f.width(), f.height(), line);
    let mut data = Vec::with_capacity(f.width() * f.height());
    for y in 0..f.height() {
        for x in 0..f.width() {
            data.push(r.sample(f, x, y));
        }
    }
    ScalarField::from_raw(f.width(), f.height(), data)
}

#[derive(Clone, Copy, Debug)]
struct BBox {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

fn support_bbox<T: Scalar>(f: &ScalarField<T>) -> Option<BBox> {
    let mut bb: Option<BBox> = None;
    for (x, y, _) in f.support() {
        bb = Some(match bb {
            None => BBox {
                x0: x,
                y0: y,
                x1: x,
                y1: y,
            },
            Some(b) => BBox {
                x0: b.x0.min(x),
                y0: b.y0.min(y),
                x1: b.x1.max(x),
                y1: b.y1.max(y),
            },
        });
    }
    bb
}

/// Precomputed pieces of the fuzzy Jaccard measure between `reflect(a)` and `b`.
struct SymmetryObjective<'a, T> {
    a: &'a ScalarField<T>,
    b: &'a ScalarField<T>,
    a_box: BBox,
    b_sum: T,
}

impl<'a, T: Scalar> SymmetryObjective<'a, T> {
    fn new(a: &'a ScalarField<T>, b: &'a ScalarField<T>) -> Result<Self> {
        let a_box = support_bbox(a).ok_or_else(|| Error::DegenerateShape("empty field".into()))?;
        if b.is_empty() {
            return Err(Error::DegenerateShape("empty field".into()));
        }
        Ok(Self {
            a,
            b,
            a_box,
            b_sum: crate::fuzzy::field_sum(b),
        })
    }

    /// `Σ min(reflect(a), b) / Σ max(reflect(a), b)`.
    fn measure(&self, line: Line<T>) -> T {
        let r = Reflector::new(self.a.width(), self.a.height(), line);
        let corners = [
            (self.a_box.x0, self.a_box.y0),
            (self.a_box.x1, self.a_box.y0),
            (self.a_box.x0, self.a_box.y1),
            (self.a_box.x1, self.a_box.y1),
        ];
        let (mut lo_x, mut lo_y) = (T::infinity(), T::infinity());
        let (mut hi_x, mut hi_y) = (T::neg_infinity(), T::neg_infinity());
        for (x, y) in corners {
            let (rx, ry) = r.apply(T::from_usize_lossy(x), T::from_usize_lossy(y));
            lo_x = lo_x.min(rx);
            lo_y = lo_y.min(ry);
            hi_x = hi_x.max(rx);
            hi_y = hi_y.max(ry);
        }
        let w = self.a.width() as i64;
        let h = self.a.height() as i64;
        let clamp = |v: T, hi: i64| -> i64 {
            let v = v
                .to_i64()
                .unwrap_or(if v > T::zero() { i64::MAX } else { i64::MIN });
            v.clamp(0, hi - 1)
        };
        let one = T::one();
        let (x0, x1) = (
            clamp((lo_x - one).floor(), w),
            clamp((hi_x + one).ceil(), w),
        );
        let (y0, y1) = (
            clamp((lo_y - one).floor(), h),
            clamp((hi_y + one).ceil(), h),
        );
        let mut overlap = T::zero();
        let mut reflected_sum = T::zero();
        if !(lo_x - one > T::from_usize_lossy(self.a.width())
            || hi_x + one < T::zero()
            || lo_y - one > T::from_usize_lossy(self.a.height())
            || hi_y + one < T::zero())
        {
            for y in y0 as usize..=y1 as usize {
                for x in x0 as usize..=x1 as usize {
                    let ra = r.sample(self.a, x, y);
                    if ra > T::zero() {
                        reflected_sum = reflected_sum + ra;
                        overlap = overlap + ra.min(self.b.get(x, y));
                    }
                }
            }
        }
        let union = reflected_sum + self.b_sum - overlap;
        if union <= T::zero() {
            T::zero()
        } else {
            overlap / union
        }
    }
}

/// Fuzzy Jaccard index of `reflect(a, line)` and `b`.
pub fn symmetry_measure<T: Scalar>(
    a: &ScalarField<T>,
    b: &ScalarField<T>,
    line: Line<T>,
) -> Result<FuzzyDegree<T>> {
    a.same_dims(b)?;
    let obj = SymmetryObjective::new(a, b)?;
    Ok(FuzzyDegree::clamped(obj.measure(line)))
}

#[derive(Clone, Debug)]
pub struct SymmetrySearch<T> {
    /// Initial simplex step on rho, in pixels.
    pub rho_step: T,
    /// Initial simplex step on theta, in degrees.
    pub theta_step_deg: T,
    /// Theta offsets (degrees) of the starting lines, relative to the centroid bisector.
    pub start_offsets_deg: Vec<T>,
    pub simplex: SimplexOptions<T>,
}

impl<T: Scalar> Default for SymmetrySearch<T> {
    fn default() -> Self {
        Self {
            rho_step: T::lit(5.0),
            theta_step_deg: T::lit(5.0),
            start_offsets_deg: vec![T::zero(), T::lit(15.0), T::lit(-15.0)],
            simplex: SimplexOptions::default(),
        }
    }
}

/// Perpendicular bisector of the two centroids; a vertical line through the
/// common centroid when they coincide.
pub fn centroid_bisector<T: Scalar>(a: &ScalarField<T>, b: &ScalarField<T>) -> Result<Line<T>> {
    let (ax, ay) = a
        .centroid()
        .ok_or_else(|| Error::DegenerateShape("empty field".into()))?;
    let (bx, by) = b
        .centroid()
        .ok_or_else(|| Error::DegenerateShape("empty field".into()))?;
    let (dx, dy) = (bx - ax, by - ay);
    let theta = if (dx * dx + dy * dy).sqrt() > T::lit(1e-9) {
        dy.atan2(dx)
    } else {
        T::zero()
    };
    Ok(line_through(
        a.width(),
        a.height(),
        (ax + bx) / T::lit(2.0),
        (ay + by) / T::lit(2.0),
        theta,
    ))
}

fn line_through<T: Scalar>(width: usize, height: usize, px: T, py: T, theta: T) -> Line<T> {
    let cx = T::from_usize_lossy(width - 1) / T::lit(2.0);
    let cy = T::from_usize_lossy(height - 1) / T::lit(2.0);
    Line::new((px - cx) * theta.cos() + (py - cy) * theta.sin(), theta)
}

/// Degree of symmetry between `a` and `b` and the line achieving it.
pub fn symmetry_degree<T: Scalar>(
    a: &ScalarField<T>,
    b: &ScalarField<T>,
) -> Result<(FuzzyDegree<T>, Line<T>)> {
    symmetry_degree_with(a, b, &SymmetrySearch::default())
}

pub fn symmetry_degree_with<T: Scalar>(
    a: &ScalarField<T>,
    b: &ScalarField<T>,
    search: &SymmetrySearch<T>,
) -> Result<(FuzzyDegree<T>, Line<T>)> {
    a.same_dims(b)?;
    let objective = SymmetryObjective::new(a, b)?;
    let guess = centroid_bisector(a, b)?;
    let (ax, ay) = a.centroid().expect("checked non-empty");
    let (bx, by) = b.centroid().expect("checked non-empty");
    let (mx, my) = ((ax + bx) / T::lit(2.0), (ay + by) / T::lit(2.0));

    let deg = T::PI() / T::lit(180.0);
    let mut best = (objective.measure(guess), guess);
    for offset in &search.start_offsets_deg {
        let theta0 = guess.theta + *offset * deg;
        let start = line_through(a.width(), a.height(), mx, my, theta0);
        let run = minimize(
            |p: &[T]| -objective.measure(Line::new(p[0], p[1] * deg)),
            &[start.rho, theta0 / deg],
            &[search.rho_step, search.theta_step_deg],
            &search.simplex,
        );
        let value = -run.value;
        if value > best.0 {
            best = (value, Line::new(run.point[0], run.point[1] * deg));
        }
    }
    Ok((FuzzyDegree::clamped(best.0), best.1.normalized()))
}
