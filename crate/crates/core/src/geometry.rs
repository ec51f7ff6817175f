//! Planar geometry shared by every stage: vectors, SE(2) poses with
//! timestamps, and polar feature points.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds since an arbitrary epoch.
pub type TimeStamp = f64;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    /// Rotates counter-clockwise by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
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
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// SE(2) element with the timestamp it refers to.
///
/// Composition keeps the timestamp of the right operand, so chaining
/// `world_from_prev * prev_from_curr` is stamped with the current time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub t: TimeStamp,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64, t: TimeStamp) -> Self {
        Self {
            x,
            y,
            yaw: wrap_angle(yaw),
            t,
        }
    }

    pub fn identity(t: TimeStamp) -> Self {
        Self::new(0.0, 0.0, 0.0, t)
    }

    pub fn translation(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// `self * other`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let p = self.translation() + other.translation().rotated(self.yaw);
        Pose2::new(p.x, p.y, self.yaw + other.yaw, other.t)
    }

    pub fn inverse(&self) -> Pose2 {
        let p = -self.translation().rotated(-self.yaw);
        Pose2::new(p.x, p.y, -self.yaw, self.t)
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn transform_point(&self, p: Vec2) -> Vec2 {
        self.translation() + p.rotated(self.yaw)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite() && self.t.is_finite()
    }
}

pub fn se2_compose(a: &Pose2, b: &Pose2) -> Pose2 {
    a.compose(b)
}

pub fn se2_inverse(a: &Pose2) -> Pose2 {
    a.inverse()
}

/// A feature in sensor polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
    pub intensity: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64, intensity: f64) -> Self {
        Self {
            r,
            theta: wrap_angle(theta),
            intensity,
        }
    }

    pub fn to_cart(&self) -> Vec2 {
        polar_to_cart(self)
    }
}

pub fn polar_to_cart(p: &PolarPoint) -> Vec2 {
    let (s, c) = p.theta.sin_cos();
    Vec2::new(p.r * c, p.r * s)
}

pub fn cart_to_polar(v: Vec2, intensity: f64) -> Result<PolarPoint> {
    if v.x == 0.0 && v.y == 0.0 {
        return Err(Error::DegenerateInput("cartesian point at the origin"));
    }
    Ok(PolarPoint::new(v.norm(), v.y.atan2(v.x), intensity))
}
