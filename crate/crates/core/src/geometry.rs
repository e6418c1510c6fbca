//! Planar mirror geometry linking anchors, virtual anchors, the reference
//! point and virtual reference points.
//!
//! A reflective surface is never stored as line coefficients. It is carried
//! as a [`SurfaceFrame`]: the reference point (the agent's start position)
//! and its mirror image across the surface. The surface is the perpendicular
//! bisector of that pair.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separations below this are treated as coincident points (meters).
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self::new(r * c, r * s)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        (self + other) * 0.5
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, rhs: Point2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Div<f64> for Point2 {
    type Output = Point2;
    fn div(self, k: f64) -> Point2 {
        Point2::new(self.x / k, self.y / k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

/// A reflective surface expressed through the reference point and its mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFrame {
    pub rp: Point2,
    pub vrp: Point2,
}

impl SurfaceFrame {
    pub fn new(rp: Point2, vrp: Point2) -> Result<Self> {
        let frame = Self { rp, vrp };
        surface_normal(&frame)?;
        Ok(frame)
    }
}

fn check_finite(points: &[Point2]) -> Result<()> {
    if points.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::Degenerate("non-finite coordinate"))
    }
}

/// Mirror `p` across the line through `anchor` with unit normal `n`.
fn mirror(p: Point2, anchor: Point2, n: Point2) -> Point2 {
    p - n * (2.0 * (p - anchor).dot(n))
}

/// Unit normal of the surface, pointing from the reference point to the VRP.
pub fn surface_normal(frame: &SurfaceFrame) -> Result<Point2> {
    check_finite(&[frame.rp, frame.vrp])?;
    let d = frame.vrp - frame.rp;
    let len = d.norm();
    if len < DEGENERACY_TOL {
        return Err(Error::Degenerate("reference point coincides with VRP"));
    }
    Ok(d / len)
}

/// Virtual anchor: the anchor mirrored across the surface.
pub fn va_from_pa(frame: &SurfaceFrame, pa: Point2) -> Result<Point2> {
    let n = surface_normal(frame)?;
    check_finite(&[pa])?;
    Ok(mirror(pa, frame.rp.midpoint(frame.vrp), n))
}

/// VRP recovered from an anchor and its virtual anchor: the reference point
/// mirrored across the perpendicular bisector of `pa` and `va`.
pub fn vrp_from_pa_va(rp: Point2, pa: Point2, va: Point2) -> Result<Point2> {
    check_finite(&[rp, pa, va])?;
    let d = va - pa;
    let len = d.norm();
    if len < DEGENERACY_TOL {
        return Err(Error::Degenerate("anchor coincides with virtual anchor"));
    }
    Ok(mirror(rp, pa.midpoint(va), d / len))
}

/// Anchor recovered from a virtual anchor (the mirror is its own inverse).
pub fn pa_from_vrp_va(frame: &SurfaceFrame, va: Point2) -> Result<Point2> {
    va_from_pa(frame, va)
}

/// Point hit by a beam of angle `phi` at range `d` from `agent`.
pub fn rsp_position(agent: Point2, d: f64, phi: f64) -> Result<Point2> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::NonPositiveDistance(d));
    }
    check_finite(&[agent])?;
    Ok(agent + Point2::from_polar(d, phi))
}

/// Numerator/denominator triple `(a0, b0, c0)` of the closed-form VRP
/// `(a0 / b0, c0 / b0)` for two points on the surface.
pub(crate) fn vrp_closed_form_terms(rp: Point2, p1: Point2, p2: Point2) -> (f64, f64, f64) {
    let dx = p2.x - p1.x;
    let dy = p2.y - p1.y;
    let a0 = rp.x * dx * dx - (rp.x - 2.0 * p1.x) * dy * dy + 2.0 * (rp.y - p1.y) * dy * dx;
    let b0 = dx * dx + dy * dy;
    let c0 = rp.y * dy * dy - (rp.y - 2.0 * p1.y) * dx * dx + 2.0 * (rp.x - p1.x) * dy * dx;
    (a0, b0, c0)
}

/// VRP from two reflection sample points lying on the same surface.
///
/// Uses the closed form obtained from the perpendicularity and collinearity
/// constraints; it coincides with mirroring `rp` across the line through
/// the two points.
pub fn vrp_from_two_rsps(rp: Point2, rsp1: Point2, rsp2: Point2) -> Result<Point2> {
    check_finite(&[rp, rsp1, rsp2])?;
    if rsp1.distance(rsp2) < DEGENERACY_TOL {
        return Err(Error::Degenerate("coincident reflection sample points"));
    }
    let (a0, b0, c0) = vrp_closed_form_terms(rp, rsp1, rsp2);
    Ok(Point2::new(a0 / b0, c0 / b0))
}

/// Mirror `p` across the infinite line through `a` and `b`.
pub fn reflect_across_line(p: Point2, a: Point2, b: Point2) -> Result<Point2> {
    check_finite(&[p, a, b])?;
    let d = b - a;
    let len = d.norm();
    if len < DEGENERACY_TOL {
        return Err(Error::Degenerate("line endpoints coincide"));
    }
    let n = Point2::new(-d.y, d.x) / len;
    Ok(mirror(p, a, n))
}
