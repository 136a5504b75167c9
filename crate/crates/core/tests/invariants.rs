use std::f64::consts::PI;

use proptest::prelude::*;

use wigglehair::ext::{ldexp, ExtComplex};
use wigglehair::export::fmt_f64;
use wigglehair::geometry::koebe_distortion_bound;
use wigglehair::verify::{self, Suite};
use wigglehair::{Config, ExternalAddress, TractSpec, Triangle, C64};

fn point() -> impl Strategy<Value = C64> {
    (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| C64::new(x, y))
}

fn triangle() -> impl Strategy<Value = Triangle> {
    (point(), point(), point()).prop_filter_map("coincident vertices", |(a, b, c)| Triangle::new(a, b, c).ok())
}

/// Brute force over the six labelings.
fn degeneracy_oracle(t: &Triangle) -> f64 {
    let v = t.vertices();
    let mut best = 0.0f64;
    for (i, j, k) in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)] {
        let d = |p: usize, q: usize| (v[p] - v[q]).norm();
        best = best.max(d(i, j) / (d(i, k) + d(k, j)));
    }
    best.min(1.0)
}

proptest! {
    #[test]
    fn degeneracy_matches_labeling_oracle(t in triangle()) {
        let d = t.degeneracy();
        prop_assert!((d - degeneracy_oracle(&t)).abs() <= 1e-15);
        prop_assert!((0.5 - 1e-15..=1.0).contains(&d));
    }

    #[test]
    fn degeneracy_is_similarity_invariant(t in triangle(), r in 1e-3..1e3f64, th in -PI..PI, s in point()) {
        let a = C64::from_polar(r, th);
        let moved = t.map(|z| a * (z + s)).unwrap();
        prop_assert!((moved.degeneracy() - t.degeneracy()).abs() < 1e-12);
    }

    #[test]
    fn degeneracy_ignores_vertex_order(t in triangle()) {
        let [a, b, c] = t.vertices();
        for u in [Triangle::new(b, a, c), Triangle::new(c, b, a), Triangle::new(b, c, a)] {
            prop_assert_eq!(u.unwrap().degeneracy(), t.degeneracy());
        }
    }

    #[test]
    fn collinear_points_are_degenerate(a in point(), d in point(), s in 0.01..10.0f64, u in 1.5..20.0f64) {
        prop_assume!(d.norm() > 1e-3);
        let t = Triangle::new(a, a + d * s, a + d * u * s).unwrap();
        prop_assert!(t.degeneracy() > 1.0 - 1e-12);
    }

    #[test]
    fn angles_sum_to_pi(t in triangle()) {
        let a = t.angles();
        prop_assert!((a.iter().sum::<f64>() - PI).abs() < 1e-12);
        prop_assert!(a.iter().all(|&x| (0.0..=PI).contains(&x)));
    }

    #[test]
    fn diameter_is_longest_side(t in triangle()) {
        let [a, b, c] = t.vertices();
        let m = (a - b).norm().max((b - c).norm()).max((a - c).norm());
        prop_assert_eq!(t.diameter(), m);
    }

    #[test]
    fn koebe_bound_grows_with_s(r in 0.1..100.0f64, f in 0.0..0.98f64, g in 0.001..0.01f64) {
        let (s, s2) = (f * r, (f + g) * r);
        let k = koebe_distortion_bound(r, s).unwrap();
        prop_assert!(k >= 1.0);
        prop_assert!(koebe_distortion_bound(r, s2).unwrap() > k);
        prop_assert!(koebe_distortion_bound(r, r).is_err());
    }

    #[test]
    fn address_display_parse_roundtrip(pre in prop::collection::vec(-8i64..=8, 0..5), per in prop::collection::vec(-8i64..=8, 1..4)) {
        let a = ExternalAddress::new(pre, per).unwrap();
        let back: ExternalAddress = a.to_string().parse().unwrap();
        prop_assert_eq!(&back, &a);
    }

    #[test]
    fn address_shift_composes(pre in prop::collection::vec(-8i64..=8, 0..5), per in prop::collection::vec(-8i64..=8, 1..4), m in 0usize..12, n in 0usize..12) {
        let a = ExternalAddress::new(pre, per).unwrap();
        prop_assert_eq!(a.shift(m).shift(n).prefix(10), a.shift(m + n).prefix(10));
        prop_assert_eq!(a.shift(m).symbol(n), a.symbol(m + n));
    }

    #[test]
    fn invert_h_roundtrip(x in 0.05..60.0f64, y in -0.99..0.99f64) {
        let s = TractSpec::default();
        let w = C64::new(x, y * PI);
        let z = s.invert_h(w, None).unwrap();
        prop_assert!(s.domain_strip.contains(z));
        prop_assert!((s.h(z) - w).norm() <= 1e-12 * w.norm().max(1.0));
    }

    #[test]
    fn h_delta_matches_difference(x in -1.0..5.0f64, y in -1.0..1.0f64, e in 1e-3..1.0f64, th in -PI..PI) {
        let s = TractSpec::default();
        let base = C64::new(x, y);
        let eta = C64::from_polar(e, th);
        let direct = s.h(base + eta) - s.h(base);
        prop_assert!((s.h_delta(base, eta) - direct).norm() <= 1e-12 * s.h(base + eta).norm().max(1.0));
    }

    #[test]
    fn ext_complex_mul_div(a in point(), b in point(), ea in -3000i64..3000, eb in -3000i64..3000) {
        prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
        let x = ExtComplex::from_c64(a);
        let x = ExtComplex::new(x.mant, x.exp + ea);
        let y = ExtComplex::from_c64(b);
        let y = ExtComplex::new(y.mant, y.exp + eb);
        let back = x.mul(&y).div(&y);
        prop_assert_eq!(back.exp, x.exp);
        prop_assert!((back.mant - x.mant).norm() < 1e-15);
        let ln = x.mul(&y).ln_abs();
        let expect = a.norm().ln() + b.norm().ln() + (ea + eb) as f64 * std::f64::consts::LN_2;
        prop_assert!((ln - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn ldexp_matches_powi(m in -1.0..1.0f64, e in -1000i64..1000) {
        prop_assert_eq!(ldexp(m, e), m * 2f64.powi(e as i32));
    }

    #[test]
    fn csv_floats_roundtrip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn geometry_suite_passes_for_any_seed(seed in any::<u64>()) {
        let r = verify::run(&Config::default(), None, Suite::Geometry, seed);
        let failing: Vec<_> = r.failures().map(|c| c.id.clone()).collect();
        prop_assert!(r.passed, "failing {:?}", failing);
    }
}
