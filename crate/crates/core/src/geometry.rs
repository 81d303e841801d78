//! Rotated-box geometry: le90 angle normalization, polygon conversion,
//! rotated IoU via convex clipping, and edge-swap-aware angular deviation.
//!
//! Boxes use the le90 convention: `theta` is the rotation of the `w` edge
//! from the +x axis, kept in `[-pi/2, pi/2)`. Swapping `w`/`h` and advancing
//! the angle a quarter turn describes the same region; the angular-deviation
//! routines correct for that ambiguity before comparing angles.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance that suppresses sliver artifacts of floating-point
/// clipping: intersections below `EPS_GEOM * (area_a + area_b)` count as zero.
pub const EPS_GEOM: f64 = 1e-9;

/// An oriented box: center, positive extents, and the le90 edge angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedBox<S: Real = f64> {
    cx: S,
    cy: S,
    w: S,
    h: S,
    theta: S,
}

impl<S: Real> RotatedBox<S> {
    /// Builds a box, normalizing `theta` into `[-pi/2, pi/2)`.
    ///
    /// Non-finite fields and non-positive extents are rejected rather than
    /// clamped.
    pub fn new(cx: S, cy: S, w: S, h: S, theta: S) -> Result<Self> {
        for (name, v) in [("cx", cx), ("cy", cy), ("w", w), ("h", h), ("theta", theta)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("box field `{name}` is not finite")));
            }
        }
        if w <= S::zero() || h <= S::zero() {
            return Err(Error::invalid(format!(
                "box extents must be positive, got w={w:?} h={h:?}"
            )));
        }
        Ok(Self { cx, cy, w, h, theta: wrap_half_pi(theta) })
    }

    /// Builds from the `[cx, cy, w, h, theta]` wire layout.
    pub fn from_array(a: [S; 5]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    /// The `[cx, cy, w, h, theta]` wire layout.
    pub fn to_array(&self) -> [S; 5] {
        [self.cx, self.cy, self.w, self.h, self.theta]
    }

    pub fn cx(&self) -> S {
        self.cx
    }

    pub fn cy(&self) -> S {
        self.cy
    }

    pub fn w(&self) -> S {
        self.w
    }

    pub fn h(&self) -> S {
        self.h
    }

    pub fn theta(&self) -> S {
        self.theta
    }

    pub fn area(&self) -> S {
        self.w * self.h
    }

    /// The same region in the 90deg-swapped representation: `w` and `h`
    /// exchanged, angle advanced a quarter turn and re-normalized.
    pub fn swap_edges(&self) -> Self {
        Self {
            cx: self.cx,
            cy: self.cy,
            w: self.h,
            h: self.w,
            theta: wrap_half_pi(self.theta + S::FRAC_PI_2()),
        }
    }
}

/// A strictly convex quadrilateral with counter-clockwise corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexQuad<S: Real = f64> {
    corners: [[S; 2]; 4],
}

impl<S: Real> ConvexQuad<S> {
    /// Validates finiteness, counter-clockwise order, and convexity up to
    /// the clipping tolerance.
    pub fn new(corners: [[S; 2]; 4]) -> Result<Self> {
        if corners.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("quad corner is not finite"));
        }
        let area = shoelace(&corners);
        if area <= S::zero() {
            return Err(Error::invalid(
                "quad corners must be counter-clockwise with positive area",
            ));
        }
        let slack = S::of(EPS_GEOM) * area.max(S::one());
        for i in 0..4 {
            let a = corners[i];
            let b = corners[(i + 1) % 4];
            let c = corners[(i + 2) % 4];
            if cross(a, b, c) < -slack {
                return Err(Error::invalid("quad corners are not convex"));
            }
        }
        Ok(Self { corners })
    }

    pub(crate) fn new_unchecked(corners: [[S; 2]; 4]) -> Self {
        Self { corners }
    }

    pub fn corners(&self) -> &[[S; 2]; 4] {
        &self.corners
    }

    /// Shoelace area.
    pub fn area(&self) -> S {
        shoelace(&self.corners)
    }
}

/// Wraps an angle into `[-pi/2, pi/2)` modulo pi.
///
/// Rejects non-finite input; the result is congruent to `theta` mod pi.
pub fn normalize_angle<S: Real>(theta: S) -> Result<S> {
    if !theta.is_finite() {
        return Err(Error::invalid("angle is not finite"));
    }
    Ok(wrap_half_pi(theta))
}

/// Infallible wrap for already-validated angles.
fn wrap_half_pi<S: Real>(theta: S) -> S {
    let pi = S::PI();
    let half = S::FRAC_PI_2();
    let mut r = theta % pi;
    if r < -half {
        r = r + pi;
    }
    if r >= half {
        r = r - pi;
    }
    r
}

/// The box corners rotated about its center, in counter-clockwise order.
pub fn to_polygon<S: Real>(b: &RotatedBox<S>) -> ConvexQuad<S> {
    let (sin, cos) = b.theta().sin_cos();
    let hw = b.w() / S::of(2.0);
    let hh = b.h() / S::of(2.0);
    let local = [[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]];
    let corners = local.map(|[x, y]| [b.cx() + x * cos - y * sin, b.cy() + x * sin + y * cos]);
    ConvexQuad::new_unchecked(corners)
}

/// Area of the intersection of two convex quads (Sutherland-Hodgman clip
/// followed by the shoelace formula). Zero when disjoint.
pub fn intersection_area<S: Real>(a: &ConvexQuad<S>, b: &ConvexQuad<S>) -> S {
    let mut poly: Vec<[S; 2]> = a.corners.to_vec();
    for i in 0..4 {
        let from = b.corners[i];
        let to = b.corners[(i + 1) % 4];
        poly = clip_halfplane(&poly, from, to);
        if poly.len() < 3 {
            return S::zero();
        }
    }
    shoelace_slice(&poly).max(S::zero())
}

/// Rotated IoU of two boxes, clamped to `[0, 1]`.
///
/// The clip runs in a canonical argument order so the result is bit-identical
/// under argument exchange.
pub fn riou<S: Real>(a: &RotatedBox<S>, b: &RotatedBox<S>) -> S {
    if a == b {
        return S::one();
    }
    let (first, second) = if lex_le(a, b) { (a, b) } else { (b, a) };
    let total = first.area() + second.area();
    let mut inter = intersection_area(&to_polygon(first), &to_polygon(second));
    if inter < S::of(EPS_GEOM) * total {
        inter = S::zero();
    }
    let union = total - inter;
    (inter / union).min(S::one()).max(S::zero())
}

/// The predicted angle corrected for the edge-swap ambiguity: when the
/// long-side indicators `[w >= h]` of prediction and ground truth disagree,
/// the prediction is advanced a quarter turn before normalization.
pub fn corrected_pred_angle<S: Real>(pred: &RotatedBox<S>, gt: &RotatedBox<S>) -> S {
    let long_sides_differ = (pred.w() >= pred.h()) != (gt.w() >= gt.h());
    if long_sides_differ {
        wrap_half_pi(pred.theta() + S::FRAC_PI_2())
    } else {
        pred.theta()
    }
}

/// Minimal angular difference between the corrected predicted angle and the
/// ground-truth angle, wrapping across the `+-pi/2` boundary. In `[0, pi/2]`.
pub fn angular_deviation<S: Real>(pred: &RotatedBox<S>, gt: &RotatedBox<S>) -> S {
    let d = (corrected_pred_angle(pred, gt) - gt.theta()).abs();
    d.min(S::PI() - d)
}

fn lex_le<S: Real>(a: &RotatedBox<S>, b: &RotatedBox<S>) -> bool {
    let (aa, ba) = (a.to_array(), b.to_array());
    for i in 0..5 {
        if aa[i] < ba[i] {
            return true;
        }
        if aa[i] > ba[i] {
            return false;
        }
    }
    true
}

fn cross<S: Real>(a: [S; 2], b: [S; 2], c: [S; 2]) -> S {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn shoelace<S: Real>(corners: &[[S; 2]; 4]) -> S {
    shoelace_slice(corners)
}

fn shoelace_slice<S: Real>(poly: &[[S; 2]]) -> S {
    let n = poly.len();
    let mut acc = S::zero();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        acc = acc + p[0] * q[1] - q[0] * p[1];
    }
    acc / S::of(2.0)
}

/// Signed distance proxy: positive when `q` lies left of the directed edge.
fn side<S: Real>(a: [S; 2], b: [S; 2], q: [S; 2]) -> S {
    cross(a, b, q)
}

fn clip_halfplane<S: Real>(poly: &[[S; 2]], a: [S; 2], b: [S; 2]) -> Vec<[S; 2]> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let cur_side = side(a, b, cur);
        let next_side = side(a, b, next);
        let cur_in = cur_side >= S::zero();
        if cur_in {
            out.push(cur);
        }
        if cur_in != (next_side >= S::zero()) {
            let t = cur_side / (cur_side - next_side);
            out.push([cur[0] + t * (next[0] - cur[0]), cur[1] + t * (next[1] - cur[1])]);
        }
    }
    out
}
