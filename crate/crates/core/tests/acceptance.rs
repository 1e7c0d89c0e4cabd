//! Acceptance run: the ten numbered criteria at their stated tolerances.
//! One PASS/FAIL line per criterion; exits non-zero if any fails.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcl_core::chaos::{char_fn, multiple_integral, BaseFn, NonlinearitySpec, TensorPowerKernel};
use pcl_core::diagram::{
    b_moment_ladder, double_factorial_odd, enumerate_partitions, moment_of_product, BMomentQuery, GroupShape,
    PartitionFilter, ProductKernel,
};
use pcl_core::harness::{clt_report, sg_check, ExperimentConfig, StatsReport};
use pcl_core::kernels::{KernelSpec, QuadratureSpec, Window};
use pcl_core::process::{sample_with_rng, PointConfiguration};
use pcl_core::spectral::{cov_phi_decay, mu_squared, MuMethod, MuOptions};

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// ---------- 1 ----------

fn characteristic_functional() -> Outcome {
    let mut o = Outcome::new();
    let spec = KernelSpec::indicator(0.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for k in 0..100 {
        let theta = -10.0 + 20.0 * k as f64 / 99.0;
        let got = char_fn(theta, &spec, Window::whole_line()).unwrap();
        let exact = (Complex64::new(0.0, theta).exp() - 1.0 - Complex64::new(0.0, theta)).exp();
        worst = worst.max((got - exact).norm());
    }
    o.check(worst < 1e-10, format!("max |char_fn - exp(e^(i theta) - 1 - i theta)| = {worst:.2e} (< 1e-10)"));
    o
}

// ---------- 2 ----------

/// Σ over ordered k-tuples of distinct points of ∏ g(x_i): the factorial measure.
fn factorial_measure(values: &[Complex64], k: usize, used: &mut Vec<bool>) -> Complex64 {
    if k == 0 {
        return c(1.0);
    }
    let mut s = c(0.0);
    for i in 0..values.len() {
        if !used[i] {
            used[i] = true;
            s += values[i] * factorial_measure(values, k - 1, used);
            used[i] = false;
        }
    }
    s
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn chaos_oracle() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let quad = QuadratureSpec::default();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let len = rng.random_range(0.5..3.0);
        let w = Window::new(0.0, len).unwrap();
        let a = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let b = rng.random_range(-1.5..1.5);
        let omega = rng.random_range(-3.0..3.0);
        let order = rng.random_range(1..=4usize);
        let npts = rng.random_range(0..=8usize);
        let mut pts: Vec<f64> = (0..npts).map(|_| rng.random_range(0.0..len)).collect();
        pts.sort_by(f64::total_cmp);
        let config = PointConfiguration::new(w, pts.clone()).unwrap();
        // g(x) = a·e^{(b + iω)x}, with ∫_0^L g in closed form
        let z = Complex64::new(b, omega);
        let g = move |x: f64| a * (z * x).exp();
        let base: BaseFn = Arc::new(g);
        let coef = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let kernel = TensorPowerKernel::new(coef, base, order, w, &[], &quad).unwrap();
        let got = multiple_integral(&config, &kernel).unwrap();

        let s = a * ((z * len).exp() - 1.0) / z;
        let values: Vec<Complex64> = pts.iter().map(|&x| g(x)).collect();
        let mut oracle = c(0.0);
        for k in 0..=order {
            let sign = if (order - k) % 2 == 0 { 1.0 } else { -1.0 };
            let fm = factorial_measure(&values, k, &mut vec![false; values.len()]);
            oracle += fm * s.powu((order - k) as u32) * (sign * binom(order, k));
        }
        oracle *= coef;
        let rel = (got - oracle).norm() / oracle.norm().max(1e-300);
        worst = worst.max(rel);
    }
    o.check(worst < 1e-9, format!("200 random cases, max relative error {worst:.2e} (< 1e-9)"));
    o
}

// ---------- 3 ----------

const MC_REPS: usize = 1_000_000;

fn isometry() -> Outcome {
    let mut o = Outcome::new();
    let w = Window::new(0.0, 2.0).unwrap();
    let quad = QuadratureSpec::default();
    let g: BaseFn = Arc::new(|x: f64| c((-x).exp()));
    let h: BaseFn = Arc::new(|x: f64| c(1.0 - 0.5 * x));
    // ∫_0^2 e^{-x}(1 - x/2) dx
    let gh = 0.5 + 0.5 * (-2f64).exp();
    let kg: Vec<_> = (1..=3).map(|n| TensorPowerKernel::new(c(1.0), g.clone(), n, w, &[], &quad).unwrap()).collect();
    let kh: Vec<_> = (1..=3).map(|n| TensorPowerKernel::new(c(1.0), h.clone(), n, w, &[], &quad).unwrap()).collect();
    let mut sum = [[0.0f64; 3]; 3];
    let mut sum2 = [[0.0f64; 3]; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..MC_REPS {
        let config = sample_with_rng(w, &mut rng).unwrap();
        let ig: Vec<f64> = kg.iter().map(|k| multiple_integral(&config, k).unwrap().re).collect();
        let ih: Vec<f64> = kh.iter().map(|k| multiple_integral(&config, k).unwrap().re).collect();
        for a in 0..3 {
            for b in 0..3 {
                let p = ig[a] * ih[b];
                sum[a][b] += p;
                sum2[a][b] += p * p;
            }
        }
    }
    let r = MC_REPS as f64;
    for a in 0..3 {
        for b in 0..3 {
            let (n, m) = (a + 1, b + 1);
            let mean = sum[a][b] / r;
            let se = ((sum2[a][b] / r - mean * mean) / (r - 1.0)).sqrt();
            let exact = if n == m { (1..=n).product::<usize>() as f64 * gh.powi(n as i32) } else { 0.0 };
            o.check(
                (mean - exact).abs() <= 3.0 * se,
                format!("E[I_{n} I_{m}] = {mean:.5} vs {exact:.5}, |diff|/SE = {:.2}", (mean - exact).abs() / se),
            );
        }
    }
    o
}

// ---------- 4 ----------

fn diagram_formula() -> Outcome {
    let mut o = Outcome::new();
    for p in 1..=4 {
        let n = enumerate_partitions(&GroupShape::ones(2 * p).unwrap(), PartitionFilter::PiEq2).unwrap().len() as u64;
        o.check(n == double_factorial_odd(p), format!("|pairings of {}| = {n}, (2p-1)!! = {}", 2 * p, double_factorial_odd(p)));
    }
    let n22 = enumerate_partitions(&GroupShape::new(vec![2, 2]).unwrap(), PartitionFilter::PiGe2).unwrap().len();
    o.check(n22 == 2, format!("|Pi_>=2((2,2))| = {n22}"));

    let w = Window::new(0.0, 2.0).unwrap();
    let quad = QuadratureSpec::default();
    let fs: [BaseFn; 3] = [
        Arc::new(|x: f64| c((-x).exp())),
        Arc::new(|x: f64| c(1.0 - 0.5 * x)),
        Arc::new(|x: f64| c((3.0 * x).sin())),
    ];
    let tk = |i: usize, a: usize| TensorPowerKernel::new(c(1.0), fs[i].clone(), a, w, &[], &quad).unwrap();
    let pk = |i: usize, a: usize| ProductKernel::tensor_power(c(1.0), fs[i].clone(), a);
    // (shape, kernel index per group)
    let cases: [(&[usize], &[usize]); 3] = [(&[1, 1], &[0, 1]), (&[2, 2], &[0, 1]), (&[1, 1, 2], &[0, 1, 2])];
    let mut sums = [0.0f64; 3];
    let mut sums2 = [0.0f64; 3];
    let kernels: Vec<Vec<TensorPowerKernel>> =
        cases.iter().map(|(s, idx)| s.iter().zip(idx.iter()).map(|(&a, &i)| tk(i, a)).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..MC_REPS {
        let config = sample_with_rng(w, &mut rng).unwrap();
        for (ci, ks) in kernels.iter().enumerate() {
            let p: f64 = ks.iter().map(|k| multiple_integral(&config, k).unwrap().re).product();
            sums[ci] += p;
            sums2[ci] += p * p;
        }
    }
    let r = MC_REPS as f64;
    for (ci, (s, idx)) in cases.iter().enumerate() {
        let shape = GroupShape::new(s.to_vec()).unwrap();
        let pks: Vec<ProductKernel> = s.iter().zip(idx.iter()).map(|(&a, &i)| pk(i, a)).collect();
        let exact = moment_of_product(&pks, &shape, w, &quad).unwrap().re;
        let mean = sums[ci] / r;
        let se = ((sums2[ci] / r - mean * mean) / (r - 1.0)).sqrt();
        o.check(
            (mean - exact).abs() <= 3.0 * se,
            format!("shape {s:?}: Monte Carlo {mean:.5} vs moment_of_product {exact:.5}, |diff|/SE = {:.2}", (mean - exact).abs() / se),
        );
    }
    o
}

// ---------- 5 ----------

fn mu_triangulation() -> Outcome {
    let mut o = Outcome::new();
    let g = NonlinearitySpec::gaussian_bump();
    for (alpha, d, fraction) in [(2.0, 1usize, 1e-6), (0.8, 2, 1e-2)] {
        let spec = KernelSpec::power_law(alpha, 1.0).unwrap();
        let opts = MuOptions { tail_fraction: fraction, ..MuOptions::default() };
        let chaos = mu_squared(&g, d, &spec, Window::whole_line(), MuMethod::ChaosSeries, &opts).unwrap();
        let cov = mu_squared(&g, d, &spec, Window::whole_line(), MuMethod::CovarianceSeries, &opts).unwrap();
        let gap = (chaos.value - cov.value).abs() / chaos.value.abs();
        o.check(
            gap < 1e-3,
            format!(
                "alpha={alpha} d={d}: chaos {:.8} vs covariance {:.8}, gap {gap:.1e} (< 1e-3); tail bound beyond |u|>200: {:.2e}",
                chaos.value, cov.value, chaos.tail_bound
            ),
        );
        let mc = mu_squared(&g, d, &spec, Window::whole_line(), MuMethod::MonteCarlo, &opts).unwrap();
        let rel = (mc.value / chaos.value - 1.0).abs();
        o.check(
            rel <= 0.05,
            format!(
                "alpha={alpha} d={d}: Monte Carlo (n=2^14, R=2000, tail fraction {fraction:e}) {:.5} +- {:.5} vs {:.5}, rel {rel:.3} (<= 0.05)",
                mc.value, mc.std_error, chaos.value
            ),
        );
    }
    let ind = KernelSpec::indicator(0.0, 1.0).unwrap();
    let cases = [
        ("phi=x, d=1", NonlinearitySpec::polynomial(&[0.0, 1.0]).unwrap(), 1usize, 1.0),
        ("phi=x^2, d=2", NonlinearitySpec::polynomial(&[0.0, 0.0, 1.0]).unwrap(), 2, 2.0),
    ];
    for (name, phi, d, exact) in cases {
        for m in [MuMethod::ChaosSeries, MuMethod::CovarianceSeries] {
            let v = mu_squared(&phi, d, &ind, Window::whole_line(), m, &MuOptions::default()).unwrap().value;
            o.check((v - exact).abs() < 1e-6, format!("{name}, {m:?}: {v:.12} vs {exact} (< 1e-6)"));
        }
    }
    o
}

// ---------- 6 and 9 ----------

fn clt_config() -> ExperimentConfig {
    let spec = KernelSpec::power_law(2.0, 1.0).unwrap();
    let mut cfg = ExperimentConfig::new(spec, NonlinearitySpec::gaussian_bump(), 1);
    cfg.n_values = vec![1 << 10, 1 << 12, 1 << 14];
    cfg.replications = 2000;
    cfg.seed = 7;
    cfg
}

fn clt_reproduction(report: &StatsReport) -> Outcome {
    let mut o = Outcome::new();
    let n = 1 << 14;
    o.check(true, format!("mu^2 = {:.6} (chaos), {:.6} (covariance)", report.mu2_chaos, report.mu2_covariance));
    for f in report.flags.iter().filter(|f| f.n == n) {
        let wanted = f.name == "ks_pvalue"
            || f.name == "variance_t1"
            || f.name == "mean_t1"
            || f.name == "third_moment_t1"
            || f.name.starts_with("increment_cov_");
        if wanted {
            o.check(f.pass, format!("{}: {:.5} vs {:.5} (tolerance {:.2e})", f.name, f.lhs, f.rhs, f.tolerance));
        }
    }
    if report.flag("ks_pvalue", n).is_none() {
        o.check(false, "KS flag missing".into());
    }
    o
}

fn tightness(report: &StatsReport) -> Outcome {
    let mut o = Outcome::new();
    let ratios: Vec<f64> = report.rows_named("tightness_ratio_p4").map(|r| r.value).collect();
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    o.check(
        report.tightness_spread <= 3.0,
        format!("{} (s,t,n) cells, ratio range [{min:.4}, {max:.4}], spread {:.4} (<= 3)", ratios.len(), report.tightness_spread),
    );
    o
}

// ---------- 7 ----------

fn covariance_decay() -> Outcome {
    let mut o = Outcome::new();
    let g = NonlinearitySpec::gaussian_bump();
    for alpha in [0.8, 2.0] {
        let spec = KernelSpec::power_law(alpha, 1.0).unwrap();
        let t = cov_phi_decay(&g, 2, &spec, 200).unwrap();
        let bound = t.bound.unwrap();
        o.check(t.slope <= bound, format!("alpha={alpha}, d=2: slope over [4,200] = {:.4} vs bound {bound:.4}", t.slope));
    }
    o
}

// ---------- 8 ----------

fn truncated_moments() -> Outcome {
    let mut o = Outcome::new();
    let spec = KernelSpec::power_law(2.0, 1.0).unwrap();
    let ns = [1 << 8, 1 << 9, 1 << 10, 1 << 11, 1 << 12];
    let q = BMomentQuery::new(vec![1.0, -1.0], 1, 4, spec);
    let ladder = b_moment_ladder(&q, &ns).unwrap();
    let gaps: Vec<f64> = ladder
        .iter()
        .map(|b| {
            let f = Complex64::new(b.finite.0, b.finite.1);
            let l = Complex64::new(b.limit.0, b.limit.1);
            (f - l).norm() / l.norm()
        })
        .collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    o.check(decreasing, format!("ell=2 relative gaps over n=2^8..2^12: {:?}", gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()));
    let last = *gaps.last().unwrap();
    o.check(last < 0.05, format!("ell=2 gap at n=2^12 = {last:.3e} (< 0.05), limit tail bound {:.1e}", ladder[0].limit_tail_bound));
    let q3 = BMomentQuery::new(vec![1.0, -1.0, 0.5], 1, 4, spec);
    let mags: Vec<f64> = b_moment_ladder(&q3, &ns)
        .unwrap()
        .iter()
        .map(|b| Complex64::new(b.finite.0, b.finite.1).norm())
        .collect();
    let dec3 = mags.windows(2).all(|w| w[1] < w[0]);
    o.check(dec3, format!("ell=3 |B| over n=2^8..2^12: {:?}", mags.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()));
    o
}

// ---------- 10 ----------

fn spectral_gap() -> Outcome {
    let mut o = Outcome::new();
    let spec = KernelSpec::power_law(2.0, 1.0).unwrap();
    let t = sg_check(&spec, &[0.5, 1.0, 2.0], &[2.0, 4.0], 100_000, 10).unwrap();
    for r in &t.rows {
        o.check(r.ratio.is_finite(), format!("{:?} p={}: LHS {:.4} +- {:.4}, RHS {:.4}, ratio {:.4}", r.family, r.p, r.lhs, r.lhs_se, r.rhs, r.ratio));
    }
    o.check(t.stable, format!("single constant C = {:.4}; spread over non-constant rows {:.4} (<= 3)", t.constant, t.spread));
    o
}

fn main() {
    let mut all = true;
    let mut run = |k: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        for l in &out.lines {
            println!("    {l}");
        }
        println!(
            "criterion {k:>2} [{name}]: {} ({:.1}s)",
            if out.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        all &= out.pass;
    };
    run(1, "characteristic functional", &mut characteristic_functional);
    run(2, "chaos integral oracle", &mut chaos_oracle);
    run(3, "isometry and orthogonality", &mut isometry);
    run(4, "diagram formula", &mut diagram_formula);
    run(5, "mu^2 triangulation", &mut mu_triangulation);
    let t = Instant::now();
    let report = clt_report(&clt_config()).expect("clt report");
    println!("    (shared CLT run for criteria 6 and 9: {:.1}s)", t.elapsed().as_secs_f64());
    run(6, "CLT reproduction", &mut || clt_reproduction(&report));
    run(7, "covariance decay", &mut covariance_decay);
    run(8, "truncated-moment convergence", &mut truncated_moments);
    run(9, "tightness moment criterion", &mut || tightness(&report));
    run(10, "spectral-gap ratios", &mut spectral_gap);
    if !all {
        println!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
