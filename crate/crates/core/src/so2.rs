//! Unit-circle algebra.
//!
//! A [`UnitVec`] `(c, s)` stands for the rotation by the angle whose cosine is
//! `c` and sine is `s`. Composition is the product `C[a] b`, and the kinematics
//! `ż = u J z` are integrated with the exponential map, so a step is always an
//! exact rotation by `u dt`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

/// Quarter-turn matrix `J = [[0, -1], [1, 0]]`.
pub fn j_matrix() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// `J v` for a plane vector.
#[inline]
pub fn j_times(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec {
    pub c: f64,
    pub s: f64,
}

impl Default for UnitVec {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitVec {
    pub const IDENTITY: UnitVec = UnitVec { c: 1.0, s: 0.0 };

    /// Normalizes `(c, s)` onto the circle. Returns `None` for the zero vector
    /// or non-finite input.
    pub fn new(c: f64, s: f64) -> Option<Self> {
        let n = c.hypot(s);
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        Some(Self { c: c / n, s: s / n })
    }

    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { c, s }
    }

    /// Angle in `(-π, π]`.
    pub fn angle(&self) -> f64 {
        let a = self.s.atan2(self.c);
        // atan2 returns -π for (-1, -0.0)
        if a == -PI {
            PI
        } else {
            a
        }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.c, self.s)
    }

    /// Rotation matrix `C[z] = [[c, -s], [s, c]]`.
    pub fn rot_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.c, -self.s, self.s, self.c)
    }

    /// Group product `C[self] other`.
    pub fn mul(&self, other: &UnitVec) -> UnitVec {
        UnitVec {
            c: self.c * other.c - self.s * other.s,
            s: self.s * other.c + self.c * other.s,
        }
        .renormalized()
    }

    /// Inverse element, `C[self]ᵀ`.
    pub fn inverse(&self) -> UnitVec {
        UnitVec {
            c: self.c,
            s: -self.s,
        }
    }

    /// `self · sign`, i.e. the antipode when `sign < 0`.
    pub fn signed(&self, sign: f64) -> UnitVec {
        if sign < 0.0 {
            UnitVec {
                c: -self.c,
                s: -self.s,
            }
        } else {
            *self
        }
    }

    /// `C[self] v`.
    pub fn rotate(&self, v: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.c * v.x - self.s * v.y, self.s * v.x + self.c * v.y)
    }

    /// `C[self]ᵀ v`.
    pub fn rotate_back(&self, v: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.c * v.x + self.s * v.y, -self.s * v.x + self.c * v.y)
    }

    /// Exact solution of `ż = u J z` over `dt`.
    pub fn step(&self, rate: f64, dt: f64) -> UnitVec {
        UnitVec::from_angle(rate * dt).mul(self)
    }

    pub fn norm_error(&self) -> f64 {
        (self.c * self.c + self.s * self.s - 1.0).abs()
    }

    fn renormalized(self) -> UnitVec {
        let n2 = self.c * self.c + self.s * self.s;
        // One Newton step on 1/sqrt is enough near the circle.
        let k = 0.5 * (3.0 - n2);
        UnitVec {
            c: self.c * k,
            s: self.s * k,
        }
    }
}

/// Free-function form of [`UnitVec::rot_matrix`].
pub fn rot_matrix(z: &UnitVec) -> Matrix2<f64> {
    z.rot_matrix()
}

pub fn mul(a: &UnitVec, b: &UnitVec) -> UnitVec {
    a.mul(b)
}

pub fn step(z: &UnitVec, rate: f64, dt: f64) -> UnitVec {
    z.step(rate, dt)
}

pub fn from_angle(theta: f64) -> UnitVec {
    UnitVec::from_angle(theta)
}

pub fn angle_of(z: &UnitVec) -> f64 {
    z.angle()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn angle_diff(a: f64, b: f64) -> f64 {
        wrap_angle(a - b).abs()
    }

    #[test]
    fn identity_and_quarter_turn_matrices() {
        assert_eq!(UnitVec::IDENTITY.rot_matrix(), Matrix2::identity());
        let q = UnitVec { c: 0.0, s: 1.0 };
        assert_eq!(q.rot_matrix(), j_matrix());
    }

    #[test]
    fn rotation_matrix_is_orthogonal() {
        let m = UnitVec::from_angle(0.3).rot_matrix();
        let err = (m.transpose() * m - Matrix2::identity()).abs().max();
        assert!(err < 1e-12);
        assert!((m.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_turn_products() {
        let q = UnitVec { c: 0.0, s: 1.0 };
        let h = q.mul(&q);
        assert!(close(h.c, -1.0, 1e-15) && close(h.s, 0.0, 1e-15));
        let z = UnitVec::from_angle(1.234);
        assert_eq!(z.mul(&UnitVec::IDENTITY), z);
    }

    #[test]
    fn step_half_turn_and_zero_rate() {
        let z = UnitVec::IDENTITY.step(PI, 1.0);
        assert!(close(z.c, -1.0, 1e-15) && close(z.s, 0.0, 1e-15));
        let w = UnitVec::from_angle(0.7);
        assert_eq!(w.step(0.0, 1e-3), w);
    }

    #[test]
    fn angle_extraction_examples() {
        assert_eq!(from_angle(0.0), UnitVec::IDENTITY);
        let q = from_angle(PI / 2.0);
        assert!(close(q.c, 0.0, 1e-16) && close(q.s, 1.0, 1e-16));
        assert_eq!(UnitVec { c: -1.0, s: -0.0 }.angle(), PI);
    }

    #[test]
    fn million_small_steps_match_closed_form() {
        let (rate, dt, n) = (100.0, 1e-6, 1_000_000);
        let mut z = UnitVec::IDENTITY;
        let mut worst_norm: f64 = 0.0;
        for _ in 0..n {
            z = z.step(rate, dt);
            worst_norm = worst_norm.max(z.norm_error());
        }
        let expected = wrap_angle(rate * dt * n as f64);
        assert!(angle_diff(z.angle(), expected) < 1e-7);
        assert!(worst_norm < 1e-9);
    }

    #[test]
    fn step_equals_single_rotation() {
        let z0 = UnitVec::from_angle(-2.0);
        let (rate, total) = (37.5, 0.08);
        let mut z = z0;
        for _ in 0..80 {
            z = z.step(rate, total / 80.0);
        }
        let direct = z0.step(rate, total);
        assert!((z.c - direct.c).abs() < 1e-12 && (z.s - direct.s).abs() < 1e-12);
    }

    #[test]
    fn wrap_is_in_half_open_interval() {
        for k in -10..=10 {
            let a = wrap_angle(PI + 2.0 * PI * k as f64);
            assert!(a > -PI && a <= PI && close(a.abs(), PI, 1e-12), "{a}");
        }
        assert!(close(wrap_angle(-PI + 1e-9), -PI + 1e-9, 1e-12));
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(UnitVec::new(0.0, 0.0).is_none());
        assert!(UnitVec::new(f64::NAN, 1.0).is_none());
        let u = UnitVec::new(3.0, 4.0).unwrap();
        assert!(close(u.c, 0.6, 1e-15) && close(u.s, 0.8, 1e-15));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn angle_addition(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let p = from_angle(a).mul(&from_angle(b));
            prop_assert!(angle_diff(p.angle(), wrap_angle(a + b)) < 1e-12);
        }

        #[test]
        fn commutative(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (x, y) = (from_angle(a), from_angle(b));
            let (p, q) = (x.mul(&y), y.mul(&x));
            prop_assert!((p.c - q.c).abs() < 1e-12 && (p.s - q.s).abs() < 1e-12);
        }

        #[test]
        fn round_trip(theta in -50.0f64..50.0) {
            prop_assert!(angle_diff(from_angle(theta).angle(), wrap_angle(theta)) < 1e-12);
        }

        #[test]
        fn composition_keeps_unit_norm(angles in proptest::collection::vec(-4.0f64..4.0, 1..200)) {
            let mut z = UnitVec::IDENTITY;
            for a in &angles {
                z = z.mul(&from_angle(*a)).step(*a * 10.0, 1e-3);
            }
            prop_assert!(z.norm_error() < 1e-9);
        }
    }
}
