//! Shrinkage maps and the regularized objective.
//!
//! With `f(x) = λ‖x‖₁ + ½‖x‖²` the gradient of the conjugate `f*` is the soft
//! shrinkage `S_λ`, so every solver keeps a dual iterate `z` and reads the
//! primal off as `x = S_λ(z)`. Adding the constraint `x ≥ 0` replaces `S_λ`
//! with [`nonneg_shrink`].

use crate::error::{Error, Result};
use crate::linalg::{norm1, norm_sq};
use crate::operators::VectorField2D;

/// The regularization weight `λ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RegParam(f64);

impl RegParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(RegParam(lambda))
        } else {
            Err(Error::InvalidLambda(lambda))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Which shrinkage links the dual and primal iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShrinkMode {
    #[default]
    Signed,
    /// Truncate negatives before shrinking, enforcing `x ≥ 0`.
    Nonnegative,
}

impl ShrinkMode {
    #[inline]
    pub fn scalar(self, z: f64, lambda: f64) -> f64 {
        match self {
            ShrinkMode::Signed => soft_shrink_scalar(z, lambda),
            ShrinkMode::Nonnegative => (z - lambda).max(0.0),
        }
    }

    pub fn apply_into(self, z: &[f64], lambda: f64, out: &mut [f64]) {
        for (o, &zi) in out.iter_mut().zip(z) {
            *o = self.scalar(zi, lambda);
        }
    }

    pub fn apply(self, z: &[f64], lambda: f64) -> Vec<f64> {
        z.iter().map(|&zi| self.scalar(zi, lambda)).collect()
    }
}

#[inline]
pub fn soft_shrink_scalar(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Componentwise `max(|z|−λ, 0)·sign(z)`.
pub fn soft_shrink(z: &[f64], lambda: f64) -> Vec<f64> {
    ShrinkMode::Signed.apply(z, lambda)
}

/// Componentwise `max(z−λ, 0)`.
pub fn nonneg_shrink(z: &[f64], lambda: f64) -> Vec<f64> {
    ShrinkMode::Nonnegative.apply(z, lambda)
}

/// Per-pixel shrinkage of the vector `(dx, dy)` by its Euclidean length.
/// The zero vector maps to zero.
pub fn group_shrink2(p: &VectorField2D, lambda: f64) -> VectorField2D {
    let mut out = VectorField2D::zeros(p.shape());
    group_shrink2_into(p, lambda, &mut out);
    out
}

pub fn group_shrink2_into(p: &VectorField2D, lambda: f64, out: &mut VectorField2D) {
    for k in 0..p.dx.len() {
        let (a, b) = (p.dx[k], p.dy[k]);
        let mag = a.hypot(b);
        if mag > lambda {
            let scale = (mag - lambda) / mag;
            out.dx[k] = scale * a;
            out.dy[k] = scale * b;
        } else {
            out.dx[k] = 0.0;
            out.dy[k] = 0.0;
        }
    }
}

/// `λ‖x‖₁ + ½‖x‖²`.
pub fn objective(x: &[f64], lambda: f64) -> f64 {
    lambda * norm1(x) + 0.5 * norm_sq(x)
}

/// Convex conjugate of [`objective`]: `½‖S_λ(z)‖²`.
pub fn conjugate_value(z: &[f64], lambda: f64) -> f64 {
    0.5 * z
        .iter()
        .map(|&zi| {
            let s = soft_shrink_scalar(zi, lambda);
            s * s
        })
        .sum::<f64>()
}
