//! Randomized and property tests of the rotated-box geometry.

mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{monte_carlo_riou, random_box, random_box_pair, rng};
use oriactive_core::geometry::{angular_deviation, normalize_angle, riou, to_polygon};
use oriactive_core::RotatedBox;

#[test]
fn riou_symmetric_and_one_on_self() {
    let mut r = rng(101);
    for _ in 0..1_000 {
        let (a, b) = random_box_pair(&mut r);
        assert_eq!(riou(&a, &b), riou(&b, &a));
        assert!((riou(&a, &a) - 1.0).abs() < 1e-9);
        let v = riou(&a, &b);
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn riou_invariant_under_common_rigid_transform() {
    let mut r = rng(202);
    for _ in 0..1_000 {
        let (a, b) = random_box_pair(&mut r);
        let base = riou(&a, &b);
        let phi: f64 = r.gen_range(-3.0..3.0);
        let (dx, dy): (f64, f64) = (r.gen_range(-50.0..50.0), r.gen_range(-50.0..50.0));
        let transform = |v: &RotatedBox| {
            let (sin, cos) = phi.sin_cos();
            RotatedBox::new(
                v.cx() * cos - v.cy() * sin + dx,
                v.cx() * sin + v.cy() * cos + dy,
                v.w(),
                v.h(),
                v.theta() + phi,
            )
            .unwrap()
        };
        let moved = riou(&transform(&a), &transform(&b));
        assert!((moved - base).abs() < 1e-7, "base {base}, moved {moved}");
    }
}

#[test]
fn riou_tracks_monte_carlo_oracle() {
    // the full 1,000-pair sweep runs in the acceptance suite
    let mut r = rng(303);
    for i in 0..60 {
        let (a, b) = random_box_pair(&mut r);
        let exact = riou(&a, &b);
        let sampled = monte_carlo_riou(&a, &b, 1_000_000, 7_000 + i);
        assert!(
            (exact - sampled).abs() <= 5e-3,
            "pair {i}: exact {exact}, sampled {sampled}"
        );
    }
}

#[test]
fn angular_deviation_edge_swap_invariance() {
    let mut r = rng(404);
    for _ in 0..10_000 {
        let (p, g) = random_box_pair(&mut r);
        let direct = angular_deviation(&p, &g);
        let swapped = angular_deviation(&p.swap_edges(), &g);
        assert!((direct - swapped).abs() < 1e-9);
    }
}

#[test]
fn angular_deviation_zero_on_self_and_swap() {
    let mut r = rng(505);
    for _ in 0..10_000 {
        let (cx, cy): (f64, f64) = (r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0));
        let b = random_box(&mut r, cx, cy);
        assert_eq!(angular_deviation(&b, &b), 0.0);
        assert!(angular_deviation(&b, &b.swap_edges()).abs() < 1e-9);
    }
}

#[test]
fn polygon_area_matches_box_area() {
    let mut r = rng(606);
    for _ in 0..10_000 {
        let (cx, cy): (f64, f64) = (r.gen_range(-100.0..100.0), r.gen_range(-100.0..100.0));
        let b = random_box(&mut r, cx, cy);
        let area = to_polygon(&b).area();
        assert!((area - b.area()).abs() <= 1e-9 * b.area());
    }
}

proptest! {
    #[test]
    fn normalize_angle_in_range_and_congruent(theta in -50.0_f64..50.0) {
        let n = normalize_angle(theta).unwrap();
        prop_assert!((-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2).contains(&n));
        let residue = (theta - n) / std::f64::consts::PI;
        prop_assert!((residue - residue.round()).abs() < 1e-9);
    }

    #[test]
    fn riou_bounded_and_symmetric(
        cx in -20.0_f64..20.0,
        cy in -20.0_f64..20.0,
        w1 in 0.1_f64..30.0,
        h1 in 0.1_f64..30.0,
        t1 in -8.0_f64..8.0,
        w2 in 0.1_f64..30.0,
        h2 in 0.1_f64..30.0,
        t2 in -8.0_f64..8.0,
    ) {
        let a = RotatedBox::new(cx, cy, w1, h1, t1).unwrap();
        let b = RotatedBox::new(-cy, cx, w2, h2, t2).unwrap();
        let v = riou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, riou(&b, &a));
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-15).contains(&angular_deviation(&a, &b)));
    }
}
