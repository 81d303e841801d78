//! Shared helpers for the integration and acceptance suites: seeded box
//! generators and a Monte-Carlo RIoU oracle that never touches the clipping
//! code it cross-checks.
#![allow(dead_code)] // each test binary uses its own subset

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oriactive_core::RotatedBox;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Point-in-box test by rotating the point into the box frame.
pub fn box_contains(b: &RotatedBox, x: f64, y: f64) -> bool {
    let (sin, cos) = b.theta().sin_cos();
    let dx = x - b.cx();
    let dy = y - b.cy();
    let u = dx * cos + dy * sin;
    let v = -dx * sin + dy * cos;
    2.0 * u.abs() <= b.w() && 2.0 * v.abs() <= b.h()
}

/// Axis-aligned bounding rectangle as `(x0, x1, y0, y1)`.
fn bounding_rect(b: &RotatedBox) -> (f64, f64, f64, f64) {
    let (sin, cos) = b.theta().sin_cos();
    let ex = (b.w() / 2.0 * cos).abs() + (b.h() / 2.0 * sin).abs();
    let ey = (b.w() / 2.0 * sin).abs() + (b.h() / 2.0 * cos).abs();
    (b.cx() - ex, b.cx() + ex, b.cy() - ey, b.cy() + ey)
}

/// Monte-Carlo RIoU oracle: uniform point samples over the joint bounding
/// rectangle shared by both boxes estimate the intersection mass; the union
/// uses the exact box areas. Zero when the bounding rectangles are disjoint.
pub fn monte_carlo_riou(a: &RotatedBox, b: &RotatedBox, samples: u64, seed: u64) -> f64 {
    let ra = bounding_rect(a);
    let rb = bounding_rect(b);
    let (x0, x1) = (ra.0.max(rb.0), ra.1.min(rb.1));
    let (y0, y1) = (ra.2.max(rb.2), ra.3.min(rb.3));
    if x0 >= x1 || y0 >= y1 {
        return 0.0;
    }
    let mut rng = rng(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        let x = x0 + rng.gen::<f64>() * (x1 - x0);
        let y = y0 + rng.gen::<f64>() * (y1 - y0);
        if box_contains(a, x, y) && box_contains(b, x, y) {
            hits += 1;
        }
    }
    let inter = (x1 - x0) * (y1 - y0) * hits as f64 / samples as f64;
    let union = a.w() * a.h() + b.w() * b.h() - inter;
    inter / union
}

/// A box with moderate area and aspect ratio around the given center.
pub fn random_box(rng: &mut impl Rng, cx: f64, cy: f64) -> RotatedBox {
    let area = rng.gen_range(1.5..9.0);
    let aspect: f64 = rng.gen_range(1.0..3.0);
    let w = (area * aspect).sqrt();
    let h = area / w;
    let theta = rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
    RotatedBox::new(cx, cy, w, h, theta).unwrap()
}

/// A nearby pair in the regime where the Monte-Carlo estimate resolves well
/// inside the oracle tolerance.
pub fn random_box_pair(rng: &mut impl Rng) -> (RotatedBox, RotatedBox) {
    let a = random_box(rng, 0.0, 0.0);
    let dx = rng.gen_range(-2.0..2.0);
    let dy = rng.gen_range(-2.0..2.0);
    let b = random_box(rng, dx, dy);
    (a, b)
}
