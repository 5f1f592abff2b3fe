//! Gaussian splat primitives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Quat, Vec3};
use crate::scalar::Real;

/// One anisotropic 3D Gaussian with opacity and a flat RGB color.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Splat<T> {
    /// World-space center (meters).
    pub mean: Vec3<T>,
    /// Orientation; normalized wherever it is consumed.
    pub rotation: Quat<T>,
    /// Standard deviations along the local axes (meters), strictly positive.
    pub scales: Vec3<T>,
    /// Opacity in `(0, 1)`.
    pub opacity: T,
    /// Linear RGB in `[0, 1]`.
    pub color: Vec3<T>,
}

impl<T: Real> Splat<T> {
    pub fn new(mean: Vec3<T>, rotation: Quat<T>, scales: Vec3<T>, opacity: T, color: Vec3<T>) -> Self {
        Self {
            mean,
            rotation,
            scales,
            opacity,
            color,
        }
    }

    /// Isotropic splat with identity rotation.
    pub fn isotropic(mean: Vec3<T>, sigma: T, opacity: T, color: Vec3<T>) -> Self {
        Self::new(mean, Quat::identity(), Vec3::splat(sigma), opacity, color)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite()
            || !self.rotation.is_finite()
            || !self.scales.is_finite()
            || !self.opacity.is_finite()
            || !self.color.is_finite()
        {
            return Err(Error::InvalidParameter("non-finite splat parameter".into()));
        }
        if (self.rotation.norm() - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidParameter(format!(
                "rotation quaternion norm {} is not unit",
                self.rotation.norm()
            )));
        }
        if !(self.scales.min_component() > T::zero()) {
            return Err(Error::InvalidParameter("scales must be strictly positive".into()));
        }
        if !(self.opacity > T::zero() && self.opacity < T::one()) {
            return Err(Error::InvalidParameter(format!("opacity {} outside (0,1)", self.opacity)));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Splat<U> {
        Splat {
            mean: self.mean.cast(),
            rotation: self.rotation.cast(),
            scales: self.scales.cast(),
            opacity: U::lit(self.opacity.as_f64()),
            color: self.color.cast(),
        }
    }
}

/// Sigmoid used to squash raw opacity logits into `(0, 1)`.
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub fn inverse_sigmoid<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

/// Ordered collection of splats: the optimizable scene state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplatSet<T> {
    pub splats: Vec<Splat<T>>,
}

impl<T: Real> SplatSet<T> {
    pub fn new(splats: Vec<Splat<T>>) -> Self {
        Self { splats }
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Splat<T>> {
        self.splats.iter()
    }

    pub fn validate(&self) -> Result<()> {
        if self.splats.is_empty() {
            return Err(Error::InvalidParameter("splat set is empty".into()));
        }
        for (i, s) in self.splats.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::InvalidParameter(format!("splat {i}: {e}")))?;
        }
        Ok(())
    }

    /// Axis-aligned bounds of the splat centers.
    pub fn bounds(&self) -> Option<(Vec3<T>, Vec3<T>)> {
        let first = self.splats.first()?.mean;
        let (mut lo, mut hi) = (first, first);
        for s in &self.splats {
            for k in 0..3 {
                lo[k] = lo[k].min(s.mean[k]);
                hi[k] = hi[k].max(s.mean[k]);
            }
        }
        Some((lo, hi))
    }

    pub fn cast<U: Real>(&self) -> SplatSet<U> {
        SplatSet::new(self.splats.iter().map(|s| s.cast()).collect())
    }
}

impl<T> FromIterator<Splat<T>> for SplatSet<T> {
    fn from_iter<I: IntoIterator<Item = Splat<T>>>(iter: I) -> Self {
        Self {
            splats: iter.into_iter().collect(),
        }
    }
}
