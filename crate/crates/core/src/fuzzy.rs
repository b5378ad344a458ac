//! Fuzzy degrees, dense 2-D membership fields and min aggregation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A membership degree in the closed unit interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FuzzyDegree<T>(T);

impl<T: Scalar> FuzzyDegree<T> {
    /// Builds a degree, clamping tiny numeric overshoot back into `[0, 1]`.
    pub fn new(value: T) -> Result<Self> {
        let slack = T::clamp_slack();
        if value.is_nan() || value < -slack || value > T::one() + slack {
            return Err(Error::DegreeOutOfRange(value.as_f64()));
        }
        Ok(Self(value.max(T::zero()).min(T::one())))
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    pub fn one() -> Self {
        Self(T::one())
    }

    /// Caller guarantees `value` is already in `[0, 1]`.
    pub(crate) fn clamped(value: T) -> Self {
        Self(value.max(T::zero()).min(T::one()))
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    pub fn min(self, other: Self) -> Self {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other.0 > self.0 {
            other
        } else {
            self
        }
    }
}

impl<T: Scalar> fmt::Display for FuzzyDegree<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.0.as_f64())
    }
}

impl<T: Scalar> TryFrom<f64> for FuzzyDegree<T> {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(T::lit(v))
    }
}

/// Minimum of a non-empty sequence of degrees (the min t-norm).
pub fn aggregate_min<T, I>(degrees: I) -> Result<FuzzyDegree<T>>
where
    T: Scalar,
    I: IntoIterator<Item = FuzzyDegree<T>>,
{
    degrees
        .into_iter()
        .reduce(FuzzyDegree::min)
        .ok_or(Error::EmptyAggregation)
}

/// Dense row-major grid of membership degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, T::zero())
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        check_dims(width, height)?;
        let v = FuzzyDegree::new(value)?.value();
        Ok(Self {
            width,
            height,
            data: vec![v; width * height],
        })
    }

    /// Validates and clamps every entry.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidField(format!(
                "expected {} entries for {}x{}, got {}",
                width * height,
                width,
                height,
                data.len()
            )));
        }
        let data = data
            .into_iter()
            .map(|v| FuzzyDegree::new(v).map(FuzzyDegree::value))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a field from a per-pixel function `(x, y) -> value`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(FuzzyDegree::new(f(x, y))?.value());
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Internal constructor for kernels whose outputs are already clamped.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn degree(&self, x: usize, y: usize) -> FuzzyDegree<T> {
        FuzzyDegree(self.get(x, y))
    }

    pub fn set(&mut self, x: usize, y: usize, value: FuzzyDegree<T>) {
        self.data[y * self.width + x] = value.value();
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn same_dims(&self, other: &Self) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Coordinates and degrees of every pixel with positive membership.
    pub fn support(&self) -> Vec<(usize, usize, T)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > T::zero())
            .map(|(i, v)| (i % self.width, i / self.width, *v))
            .collect()
    }

    pub fn support_len(&self) -> usize {
        self.data.iter().filter(|v| **v > T::zero()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|v| *v <= T::zero())
    }

    /// Degree-weighted centroid, `None` for an all-zero field.
    pub fn centroid(&self) -> Option<(T, T)> {
        let mut sx = T::zero();
        let mut sy = T::zero();
        let mut sw = T::zero();
        for (i, &v) in self.data.iter().enumerate() {
            if v > T::zero() {
                sx = sx + v * T::from_usize_lossy(i % self.width);
                sy = sy + v * T::from_usize_lossy(i / self.width);
                sw = sw + v;
            }
        }
        (sw > T::zero()).then(|| (sx / sw, sy / sw))
    }

    /// Pointwise maximum; used to merge disjoint masks.
    pub fn union(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.max(*b))
            .collect();
        Ok(Self::from_raw(self.width, self.height, data))
    }

    /// Lossless widening or narrowing to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ScalarField<U> {
        ScalarField {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|v| U::lit(v.as_f64()).max(U::zero()).min(U::one()))
                .collect(),
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidField(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Sum of every entry of the field.
pub fn field_sum<T: Scalar>(f: &ScalarField<T>) -> T {
    f.data.iter().copied().sum()
}

/// Crisp mask of the pixels whose membership is at least `alpha`.
pub fn alpha_cut<T: Scalar>(f: &ScalarField<T>, alpha: FuzzyDegree<T>) -> Result<ScalarField<T>> {
    let a = alpha.value();
    if a <= T::zero() {
        return Err(Error::InvalidAlpha(a.as_f64()));
    }
    let data = f
        .data
        .iter()
        .map(|&v| if v >= a { T::one() } else { T::zero() })
        .collect();
    Ok(ScalarField::from_raw(f.width, f.height, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(v: f64) -> FuzzyDegree<f64> {
        FuzzyDegree::new(v).unwrap()
    }

    #[test]
    fn degree_clamps_overshoot_and_rejects_far_values() {
        assert_eq!(d(1.0 + 5e-10).value(), 1.0);
        assert_eq!(d(-5e-10).value(), 0.0);
        assert!(FuzzyDegree::<f64>::new(1.001).is_err());
        assert!(FuzzyDegree::<f64>::new(-0.1).is_err());
        assert!(FuzzyDegree::<f64>::new(f64::NAN).is_err());
        assert_eq!(FuzzyDegree::<f32>::new(0.5).unwrap().value(), 0.5f32);
    }

    #[test]
    fn aggregate_min_examples() {
        assert_eq!(aggregate_min([d(1.0), d(1.0)]).unwrap(), d(1.0));
        assert_eq!(aggregate_min([d(0.3), d(0.9), d(0.7)]).unwrap(), d(0.3));
        assert_eq!(aggregate_min([d(0.42)]).unwrap(), d(0.42));
        assert!(matches!(
            aggregate_min(Vec::<FuzzyDegree<f64>>::new()),
            Err(Error::EmptyAggregation)
        ));
    }

    #[test]
    fn field_sum_examples() {
        let zero = ScalarField::<f64>::zeros(4, 4).unwrap();
        assert_eq!(field_sum(&zero), 0.0);
        let ones = ScalarField::<f64>::filled(4, 4, 1.0).unwrap();
        assert_eq!(field_sum(&ones), 16.0);
        let mut half = zero.clone();
        half.set(0, 0, d(0.5));
        half.set(3, 2, d(0.5));
        assert_eq!(field_sum(&half), 1.0);
    }

    #[test]
    fn field_rejects_bad_shapes() {
        assert!(ScalarField::<f64>::zeros(0, 3).is_err());
        assert!(ScalarField::<f64>::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(ScalarField::<f64>::from_vec(2, 1, vec![0.0, 1.5]).is_err());
    }

    #[test]
    fn alpha_cut_examples() {
        let f = ScalarField::<f64>::filled(3, 3, 0.6).unwrap();
        assert!(alpha_cut(&f, d(0.5))
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 1.0));
        assert!(alpha_cut(&f, d(0.7))
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let mixed = ScalarField::<f64>::from_vec(2, 1, vec![0.2, 0.8]).unwrap();
        assert_eq!(alpha_cut(&mixed, d(0.5)).unwrap().data(), &[0.0, 1.0]);
        assert!(matches!(alpha_cut(&f, d(0.0)), Err(Error::InvalidAlpha(_))));
    }

    #[test]
    fn generic_over_f32() {
        let f = ScalarField::<f32>::filled(2, 2, 0.25).unwrap();
        assert_eq!(field_sum(&f), 1.0f32);
        let cut = alpha_cut(&f, FuzzyDegree::new(0.25f32).unwrap()).unwrap();
        assert_eq!(field_sum(&cut), 4.0f32);
    }

    proptest! {
        #[test]
        fn aggregate_min_laws(v in prop::collection::vec(0.0f64..=1.0, 1..12), w in 0.0f64..=1.0) {
            let degs: Vec<_> = v.iter().map(|&x| d(x)).collect();
            let m = aggregate_min(degs.clone()).unwrap();
            for x in &degs {
                prop_assert!(m <= *x);
            }
            let mut rev = degs.clone();
            rev.reverse();
            prop_assert_eq!(aggregate_min(rev).unwrap(), m);
            prop_assert_eq!(aggregate_min([m, m]).unwrap(), m);
            let split = aggregate_min([aggregate_min(degs[..1].to_vec()).unwrap(), aggregate_min(degs.iter().copied().chain([d(w)])).unwrap()]).unwrap();
            prop_assert_eq!(split, m.min(d(w)));
        }

        #[test]
        fn field_sum_additive_on_disjoint_support(cells in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 16)) {
            let a: Vec<f64> = cells.iter().map(|&(v, left)| if left { v } else { 0.0 }).collect();
            let b: Vec<f64> = cells.iter().map(|&(v, left)| if left { 0.0 } else { v }).collect();
            let fa = ScalarField::from_vec(4, 4, a).unwrap();
            let fb = ScalarField::from_vec(4, 4, b).unwrap();
            let both = fa.union(&fb).unwrap();
            prop_assert!((field_sum(&both) - field_sum(&fa) - field_sum(&fb)).abs() < 1e-12);
        }
    }
}
