use pcl_core::chaos::{chaos_kernel_norms, expm1_i, truncate_exponential, TruncationRange};
use pcl_core::kernels::{KernelSpec, Window};
use pcl_core::process::{apply_difference, sample_configuration};
use proptest::prelude::*;

fn window() -> Window {
    Window::new(-6.0, 8.0).unwrap()
}

fn spec() -> KernelSpec {
    KernelSpec::power_law(2.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn truncations_reassemble(theta in -3.0f64..3.0, seed in 0u64..500, m in 0usize..8, m2 in 0usize..6) {
        let c = sample_configuration(window(), seed).unwrap();
        let s = spec();
        let full = truncate_exponential(theta, &s, TruncationRange::AtLeast(0), &c).unwrap();
        let low = truncate_exponential(theta, &s, TruncationRange::AtMost(m), &c).unwrap();
        let high = truncate_exponential(theta, &s, TruncationRange::AtLeast(m + 1), &c).unwrap();
        prop_assert!((low + high - full).norm() <= 1e-12 * (1.0 + full.norm()));
        let (a, b) = (m, m + m2);
        let mid = truncate_exponential(theta, &s, TruncationRange::Between(a, b), &c).unwrap();
        let diff = truncate_exponential(theta, &s, TruncationRange::AtLeast(a), &c).unwrap()
            - truncate_exponential(theta, &s, TruncationRange::AtLeast(b + 1), &c).unwrap();
        prop_assert!((mid - diff).norm() <= 1e-12 * (1.0 + full.norm()));
        // the whole expansion is e^{i theta X}
        let x: f64 = pcl_core::process::first_chaos(&c, &s).unwrap();
        let direct = num_complex::Complex64::new(0.0, theta * x).exp();
        prop_assert!((full - direct).norm() <= 1e-10);
    }

    #[test]
    fn difference_of_truncation_lowers_the_order(
        theta in -2.0f64..2.0,
        seed in 0u64..500,
        d in 0usize..5,
        xs in prop::collection::vec(-5.0f64..7.0, 1..4),
    ) {
        // D^k T^{>=d} e^{i theta X} = prod_i (e^{i theta psi(x_i)} - 1) T^{>=max(d-k,0)} e^{i theta X}
        let c = sample_configuration(window(), seed).unwrap();
        let s = spec();
        let lhs = apply_difference(|c| truncate_exponential(theta, &s, TruncationRange::AtLeast(d), c).unwrap(), &c, &xs);
        prop_assume!(lhs.is_ok());
        let lhs = lhs.unwrap();
        let k = xs.len();
        let g: num_complex::Complex64 = xs.iter().map(|&x| expm1_i(theta * s.eval(x))).product();
        let rhs = g * truncate_exponential(theta, &s, TruncationRange::AtLeast(d.saturating_sub(k)), &c).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-8 * (1.0 + rhs.norm()), "{lhs} vs {rhs}");
    }

    #[test]
    fn parseval_partial_sums(theta in -4.0f64..4.0, m in 0usize..30) {
        let norms = chaos_kernel_norms(theta, &spec(), window(), 30).unwrap();
        let partial: f64 = norms[..=m].iter().sum();
        let total: f64 = norms.iter().sum();
        prop_assert!(partial <= total + 1e-15);
        prop_assert!(total <= 1.0 + 1e-10);
        prop_assert!(total >= 1.0 - 1e-9, "total {total}");
    }
}
