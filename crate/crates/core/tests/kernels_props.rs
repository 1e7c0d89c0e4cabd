use pcl_core::kernels::{d_alpha, envelope, envelope_inner, eval_kernel, integrate_with, KernelSpec, Norm, QuadratureSpec, Window};
use proptest::prelude::*;

fn gamma() -> impl Strategy<Value = f64> {
    prop_oneof![0.55f64..0.98, 1.02f64..4.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_law_equals_scaled_envelope(alpha in gamma(), c in 0.1f64..5.0, u in -50i64..50, x in -500.0f64..500.0) {
        let spec = KernelSpec::power_law(alpha, c).unwrap().with_shift(u);
        let lhs = eval_kernel(&spec, x);
        let rhs = c * envelope(alpha, u, x).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-14));
        prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs);
    }

    #[test]
    fn envelope_product_sup_bound(g in gamma(), i in -200i64..200, j in -200i64..200) {
        let v = envelope_inner(g, i, j, Norm::Linf).unwrap();
        prop_assert!(v <= (1.0 + (i - j).abs() as f64).powf(-g) * (1.0 + 1e-14));
    }

    #[test]
    fn integrate_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, lo in -40.0f64..0.0, len in 0.5f64..80.0, k in 0.0f64..4.0) {
        let w = Window::new(lo, lo + len).unwrap();
        let quad = QuadratureSpec::default();
        let f = |x: f64| (1.0 + x.abs()).powf(-2.0);
        let g = |x: f64| (-x * x / 4.0).exp() * (k * x).cos();
        let bp = [0.0];
        let fi: f64 = integrate_with(f, w, &bp, &quad).unwrap();
        let gi: f64 = integrate_with(g, w, &bp, &quad).unwrap();
        let hi: f64 = integrate_with(|x| a * f(x) + b * g(x), w, &bp, &quad).unwrap();
        let scale = 1.0 + a.abs() * fi.abs() + b.abs() * gi.abs();
        prop_assert!((hi - a * fi - b * gi).abs() <= 2.0 * quad.tolerance * scale);
    }

    #[test]
    fn d_alpha_is_minimal_integer_above(alpha in 0.5001f64..10.0) {
        let d = d_alpha(alpha).unwrap() as f64;
        let r = 1.0 / (2.0 * alpha - 1.0);
        prop_assert!(d > r);
        prop_assert!(d - 1.0 <= r);
    }

    #[test]
    fn envelope_l1_matches_its_decay_rate(g in gamma(), u in 0i64..2000) {
        // two-sided estimate: the ratio to (1+u)^{max(1-2g, -g)} stays in a fixed band
        let v = envelope_inner(g, 0, u, Norm::L1).unwrap();
        let rate = (1.0 + u as f64).powf((1.0 - 2.0 * g).max(-g));
        let ratio = v / rate;
        prop_assert!(ratio > 0.05 && ratio < 60.0, "ratio {ratio}");
    }
}

#[test]
fn whole_line_integral_of_power_law() {
    let spec = KernelSpec::power_law(3.0, 2.0).unwrap().with_shift(7);
    let v: f64 = integrate_with(|x| spec.eval(x), Window::whole_line(), &spec.breakpoints(), &QuadratureSpec::default()).unwrap();
    // 2 * 2 * int_0^inf (1+y)^-3 dy = 2
    assert!((v - 2.0).abs() < 1e-10);
}
