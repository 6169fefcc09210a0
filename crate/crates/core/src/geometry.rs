//! Planar vectors and small 2x2 matrices.
//!
//! Everything in the simulator lives in the plane, so the linear algebra is
//! written out in closed form rather than pulled from a general-purpose
//! matrix library.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Planar position, velocity or displacement.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `theta` from the x axis.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Outer product `self * other^T`.
    pub fn outer(self, other: Vec2) -> Mat2 {
        Mat2::new(self.x * other.x, self.x * other.y, self.y * other.x, self.y * other.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl std::iter::Sum for Vec2 {
    fn sum<I: Iterator<Item = Vec2>>(iter: I) -> Vec2 {
        iter.fold(Vec2::ZERO, |acc, v| acc + v)
    }
}

/// Row-major 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
    };
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Self::new(a, 0.0, 0.0, d)
    }

    /// Matrix whose columns are `c0` and `c1`.
    pub fn from_columns(c0: Vec2, c1: Vec2) -> Self {
        Self::new(c0.x, c1.x, c0.y, c1.y)
    }

    pub fn transpose(self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    /// Inverse, or `None` when the determinant vanishes relative to the
    /// matrix scale.
    pub fn inverse(self) -> Option<Mat2> {
        let det = self.det();
        let scale = self.max_abs().powi(2);
        if !det.is_finite() || scale == 0.0 || det.abs() <= scale * 1e-14 {
            return None;
        }
        Some(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    pub fn solve(self, rhs: Vec2) -> Option<Vec2> {
        self.inverse().map(|inv| inv.mul_vec(rhs))
    }

    pub fn max_abs(self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// `(M + M^T) / 2`.
    pub fn symmetrized(self) -> Self {
        let off = 0.5 * (self.b + self.c);
        Self::new(self.a, off, off, self.d)
    }

    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Eigenvalues `(min, max)` of the symmetric part of the matrix.
    pub fn sym_eigenvalues(self) -> (f64, f64) {
        let s = self.symmetrized();
        let mean = 0.5 * (s.a + s.d);
        let half_diff = 0.5 * (s.a - s.d);
        let radius = half_diff.hypot(s.b);
        (mean - radius, mean + radius)
    }

    /// Singular values `(min, max)`.
    pub fn singular_values(self) -> (f64, f64) {
        // sigma_max +- sigma_min = |(a +- d, c -+ b)|, stable for any matrix.
        let p = (self.a + self.d).hypot(self.c - self.b);
        let q = (self.a - self.d).hypot(self.c + self.b);
        let s_max = 0.5 * (p + q);
        let s_min = 0.5 * (p - q).abs();
        (s_min, s_max)
    }

    pub fn is_symmetric_positive_definite(self, sym_tol: f64) -> bool {
        if !self.is_finite() || (self.b - self.c).abs() > sym_tol * self.max_abs().max(1.0) {
            return false;
        }
        self.a > 0.0 && self.det() > 0.0
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, r: Mat2) -> Mat2 {
        Mat2::new(self.a + r.a, self.b + r.b, self.c + r.c, self.d + r.d)
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, r: Mat2) {
        *self = *self + r;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, r: Mat2) -> Mat2 {
        Mat2::new(self.a - r.a, self.b - r.b, self.c - r.c, self.d - r.d)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }
}

impl Mul<Mat2> for Mat2 {
    type Output = Mat2;
    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        self.mul_vec(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_diagonal() {
        let (lo, hi) = Mat2::diag(2.0, -1.0).singular_values();
        assert!((lo - 1.0).abs() < 1e-15);
        assert!((hi - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let m = Mat2::new(0.3, -1.7, 2.2, 0.9);
        let (lo, hi) = m.singular_values();
        let (e_lo, e_hi) = (m.transpose() * m).sym_eigenvalues();
        assert!((lo * lo - e_lo).abs() < 1e-12);
        assert!((hi * hi - e_hi).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip_and_singular() {
        let m = Mat2::new(2.0, 1.0, 1.0, 3.0);
        let p = m * m.inverse().unwrap();
        assert!((p - Mat2::IDENTITY).max_abs() < 1e-15);
        assert!(Mat2::new(1.0, 2.0, 2.0, 4.0).inverse().is_none());
    }

    #[test]
    fn eigenvalues_of_symmetric() {
        let (lo, hi) = Mat2::new(2.0, 1.0, 1.0, 2.0).sym_eigenvalues();
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }
}
