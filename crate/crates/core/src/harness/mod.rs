//! Monte Carlo experiments for 𝒯^{≥d}Y_n and 𝒯^{≥d}Z_n.
//!
//! One Poisson configuration per replication drives every X_u. Shift sums
//! go through [`ShiftSummer`], so a replication costs a few FFTs rather
//! than n passes over the points.

mod report;
mod sg;
pub mod stats;

use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::chaos::{log_char_fn, NonlinearitySpec, PhiTruncation, ThetaGrid};
use crate::error::{PclError, Result};
use crate::kernels::{covering_window, integrate_with, KernelFamily, KernelSpec, QuadratureSpec, Window};
use crate::process::field::ShiftSummer;
use crate::process::{sample_with_rng, stream_rng, PointConfiguration};
pub use report::{clt_report, write_report, Flag, ReportRow, StatsReport};
pub use sg::{sg_check, SgFamily, SgRow, SgTable};

/// Default ψ² tail fraction left outside the simulation window.
pub const DEFAULT_TAIL_FRACTION: f64 = 1e-6;
/// Number of Taylor terms of the far-field functions.
const FAR_TERMS: usize = 24;
/// Terms of the outside-window corrections.
const TAIL_TERMS: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub phi: NonlinearitySpec,
    pub d: usize,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub times: Vec<f64>,
    pub fdd_b: Vec<f64>,
    pub fdd_t: Vec<f64>,
    pub seed: u64,
    pub tail_fraction: f64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kernel: KernelSpec, phi: NonlinearitySpec, d: usize) -> Self {
        ExperimentConfig {
            kernel,
            phi,
            d,
            n_values: vec![1 << 10],
            replications: 2000,
            times: vec![0.25, 0.5, 0.75, 1.0],
            fdd_b: vec![1.0],
            fdd_t: vec![1.0],
            seed: 0,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            output: None,
        }
    }

    /// Checks the theorem hypothesis α > 1/2 + 1/(2d) and the run settings.
    pub fn validate(&self) -> Result<()> {
        check_hypothesis(&self.kernel, self.d)?;
        if !self.phi.has_fourier() && self.d > 2 {
            return Err(PclError::invalid("d", format!("polynomial nonlinearities support d <= 2, got {}", self.d)));
        }
        if self.replications < 100 {
            return Err(PclError::invalid("reps", format!("need at least 100 replications, got {}", self.replications)));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(PclError::invalid("n", "need at least one positive n"));
        }
        check_times(&self.times)?;
        if self.fdd_b.len() != self.fdd_t.len() || self.fdd_b.is_empty() {
            return Err(PclError::invalid("fdd", "fdd coefficients and times must have equal non-zero length"));
        }
        if self.fdd_t.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(PclError::invalid("fdd_t", "times must lie in [0,1]"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(PclError::invalid("tail_fraction", "must lie in (0,1)"));
        }
        Ok(())
    }
}

/// α > 1/2 + 1/(2d) for power-law kernels; compact kernels always pass.
pub fn check_hypothesis(kernel: &KernelSpec, d: usize) -> Result<()> {
    if d == 0 {
        return Err(PclError::invalid("d", "must be at least 1"));
    }
    if let Some(alpha) = kernel.alpha() {
        let bound = 0.5 + 0.5 / d as f64;
        if !(alpha > bound) {
            return Err(PclError::Hypothesis(format!(
                "alpha = {alpha} violates alpha > 1/2 + 1/(2d) = {bound} for d = {d}"
            )));
        }
    }
    Ok(())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(PclError::invalid("times", "times must lie in [0,1]"));
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(PclError::invalid("times", "times must be sorted"));
    }
    Ok(())
}

/// Chebyshev interpolant on [a, b].
#[derive(Clone, Debug)]
struct Chebyshev {
    a: f64,
    b: f64,
    c: Vec<f64>,
}

impl Chebyshev {
    fn fit(a: f64, b: f64, degree: usize, f: impl Fn(f64) -> f64) -> Self {
        let m = degree + 1;
        let vals: Vec<f64> = (0..m)
            .map(|k| {
                let t = (std::f64::consts::PI * (k as f64 + 0.5) / m as f64).cos();
                f(0.5 * (a + b) + 0.5 * (b - a) * t)
            })
            .collect();
        let c = (0..m)
            .map(|j| {
                let s: f64 = (0..m)
                    .map(|k| vals[k] * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / m as f64).cos())
                    .sum();
                2.0 * s / m as f64
            })
            .collect();
        Chebyshev { a, b, c }
    }

    fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.c.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + 0.5 * self.c[0]
    }
}

enum Mode {
    /// φ(X_u) − E φ(X_u), optionally minus I₁ of a first kernel.
    Fourier {
        mean: Vec<f64>,
        /// near-field h, its Taylor coefficients and ∫_W h(ψ_u)
        first: Option<(Chebyshev, Vec<f64>)>,
    },
    Polynomial {
        coeffs: [f64; 4],
        /// κ_k(u) = ∫_W ψ_u^k for k = 1..3
        kappa: Vec<[f64; 3]>,
    },
    /// Direct per-shift truncation for d ≥ 3.
    Direct(Vec<PhiTruncation>),
}

/// Per-(config, n) simulation engine.
pub struct PathSimulator {
    phi: NonlinearitySpec,
    d: usize,
    n: usize,
    seed: u64,
    window: Window,
    summer: ShiftSummer,
    kappa1: Vec<f64>,
    mode: Mode,
    first_comp: Vec<f64>,
}

/// Window policy: shifts 0..n covered with ψ² tail mass below `fraction`.
pub fn simulation_window(kernel: &KernelSpec, n: usize, fraction: f64) -> Result<Window> {
    covering_window(kernel, n, fraction)
}

impl PathSimulator {
    pub fn new(cfg: &ExperimentConfig, n: usize) -> Result<Self> {
        Self::build(&cfg.kernel, &cfg.phi, cfg.d, n, cfg.seed, cfg.tail_fraction)
    }

    pub fn build(kernel: &KernelSpec, phi: &NonlinearitySpec, d: usize, n: usize, seed: u64, fraction: f64) -> Result<Self> {
        check_hypothesis(kernel, d)?;
        let kernel = kernel.with_shift(0);
        let window = simulation_window(&kernel, n, fraction)?;
        let compact = !matches!(kernel.family(), KernelFamily::PowerLaw { .. });
        // ∫_W ψ_u^k, k = 1..TAIL_TERMS, and the whole-line masses P_k
        let full: Vec<f64> = (1..=TAIL_TERMS as u32)
            .map(|k| if k == 1 && !compact { Ok(f64::NAN) } else { kernel.power_integral(k, f64::NEG_INFINITY, f64::INFINITY) })
            .collect::<Result<_>>()?;
        let masses: Vec<Vec<f64>> = if compact {
            vec![full.clone(); n]
        } else {
            (0..n)
                .map(|u| {
                    let s = kernel.with_shift(u as i64);
                    (1..=TAIL_TERMS as u32).map(|k| s.power_integral(k, window.lo(), window.hi())).collect()
                })
                .collect::<Result<_>>()?
        };
        let kappa1: Vec<f64> = masses.iter().map(|m| m[0]).collect();
        let mut far_functions = vec![vec![1.0]];
        let mut first_comp = vec![0.0; n];
        let mode = match phi.poly_coeffs() {
            Some(coeffs) => {
                if d > 2 {
                    return Err(PclError::invalid("d", format!("polynomial nonlinearities support d <= 2, got {d}")));
                }
                if d == 2 {
                    far_functions.push(vec![0.0, 1.0]);
                    far_functions.push(vec![0.0, 0.0, 1.0]);
                }
                Mode::Polynomial { coeffs, kappa: masses.iter().map(|m| [m[0], m[1], m[2]]).collect() }
            }
            None if d >= 3 => {
                log::warn!("d = {d} uses direct per-shift truncation; expect O(n * points) work per replication");
                let trunc = (0..n)
                    .map(|u| PhiTruncation::new(phi, d, &kernel.with_shift(u as i64), window, None))
                    .collect::<Result<_>>()?;
                Mode::Direct(trunc)
            }
            None => {
                let grid = phi.theta_grid().expect("Fourier family");
                let nodes: Vec<(f64, f64)> = grid.nodes().into_iter().map(|(t, w)| (t, w * phi.fourier(t).unwrap())).collect();
                let quad = QuadratureSpec::default();
                let lcf: Vec<Complex64> =
                    nodes.iter().map(|(t, _)| log_char_fn(*t, &kernel, Window::whole_line(), &quad)).collect::<Result<_>>()?;
                // per-u mean with the outside-window part of log cf removed
                let mean: Vec<f64> = masses
                    .iter()
                    .map(|m| {
                        let mut e = Complex64::new(0.0, 0.0);
                        for ((t, w), l) in nodes.iter().zip(&lcf) {
                            let mut corr = Complex64::new(0.0, 0.0);
                            let mut term = Complex64::new(1.0, 0.0);
                            for k in 1..=TAIL_TERMS {
                                term = term * Complex64::new(0.0, *t) / k as f64;
                                if k >= 2 {
                                    corr += term * (full[k - 1] - m[k - 1]);
                                }
                            }
                            e += (l - corr).exp() * *w;
                        }
                        e.re
                    })
                    .collect();
                let first = if d == 2 {
                    let cf: Vec<Complex64> = lcf.iter().map(|l| l.exp()).collect();
                    let h = |v: f64| -> f64 {
                        nodes.iter().zip(&cf).map(|((t, w), c)| (c * (Complex64::new(0.0, t * v).exp() - 1.0)).re * w).sum()
                    };
                    let (_, vmax) = kernel.value_range();
                    let cheb = Chebyshev::fit(0.0, vmax, 60, h);
                    let mut taylor = Vec::with_capacity(FAR_TERMS);
                    for k in 1..=FAR_TERMS {
                        let c: f64 = nodes
                            .iter()
                            .zip(&cf)
                            .map(|((t, w), c)| (c * Complex64::new(0.0, *t).powu(k as u32)).re * w)
                            .sum::<f64>()
                            / crate::chaos::factorial(k);
                        taylor.push(c);
                    }
                    // ∫_W h(ψ_u) = c₁κ₁(u) + ∫_ℝ (h − c₁v)(ψ) − Σ_{k≥2} c_k (P_k − κ_k(u))
                    let c1 = taylor[0];
                    let rest = integrate_with(|x| { let v = kernel.eval(x); h(v) - c1 * v }, Window::whole_line(), &kernel.breakpoints(), &quad)?;
                    for (u, m) in masses.iter().enumerate() {
                        let mut out = 0.0;
                        for k in 2..=TAIL_TERMS {
                            out += taylor[k - 1] * (full[k - 1] - m[k - 1]);
                        }
                        first_comp[u] = c1 * m[0] + rest - out;
                    }
                    far_functions.push(taylor.clone());
                    Some((cheb, taylor))
                } else {
                    None
                };
                Mode::Fourier { mean, first }
            }
        };
        let summer = ShiftSummer::new(&kernel, window, n, &far_functions)?;
        Ok(PathSimulator { phi: phi.clone(), d, n, seed, window, summer, kappa1, mode, first_comp })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn configuration(&self, replication: u64) -> Result<PointConfiguration> {
        let mut rng = stream_rng(self.seed, replication);
        sample_with_rng(self.window, &mut rng)
    }

    /// 𝒯^{≥d}φ(X_u) for u = 0..n on replication `replication`.
    pub fn terms(&self, replication: u64) -> Result<Vec<f64>> {
        let config = self.configuration(replication)?;
        self.terms_on(&config)
    }

    pub fn terms_on(&self, config: &PointConfiguration) -> Result<Vec<f64>> {
        if let Mode::Direct(trunc) = &self.mode {
            return trunc.iter().map(|t| t.apply(config)).collect();
        }
        let ranges = self.summer.near_ranges(config);
        let far = self.summer.far_sums(config);
        let s1 = self.summer.total(config, &ranges, &far[0], |v| v);
        let x: Vec<f64> = s1.iter().zip(&self.kappa1).map(|(s, k)| s - k).collect();
        let mut out: Vec<f64> = x.iter().map(|&v| self.phi.eval(v)).collect();
        match &self.mode {
            Mode::Polynomial { coeffs, kappa } => {
                let c = coeffs;
                let (s2, s3) = if self.d == 2 {
                    (
                        self.summer.total(config, &ranges, &far[1], |v| v * v),
                        self.summer.total(config, &ranges, &far[2], |v| v * v * v),
                    )
                } else {
                    (Vec::new(), Vec::new())
                };
                for u in 0..self.n {
                    let k = kappa[u];
                    out[u] -= c[0] + c[2] * k[1] + c[3] * k[2];
                    if self.d == 2 {
                        let a1 = c[1] + 3.0 * c[3] * k[1];
                        let sum = a1 * s1[u] + c[2] * s2[u] + c[3] * s3[u];
                        let comp = a1 * k[0] + c[2] * k[1] + c[3] * k[2];
                        out[u] -= sum - comp;
                    }
                }
            }
            Mode::Fourier { mean, first } => {
                for u in 0..self.n {
                    out[u] -= mean[u];
                }
                if let Some((cheb, _)) = first {
                    let sh = self.summer.total(config, &ranges, &far[1], |v| cheb.eval(v));
                    for u in 0..self.n {
                        out[u] -= sh[u] - self.first_comp[u];
                    }
                }
            }
            Mode::Direct(_) => unreachable!(),
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(PclError::NonFinite { context: "truncated term", x: 0.0, value: f64::NAN });
        }
        Ok(out)
    }
}

/// n^{−1/2} Σ_{u<[nt]} terms[u] for each t.
pub fn path_from_terms(terms: &[f64], times: &[f64]) -> Vec<f64> {
    let n = terms.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in terms {
        acc += v;
        prefix.push(acc);
    }
    let s = (n as f64).sqrt();
    times.iter().map(|&t| prefix[step_count(n, t)] / s).collect()
}

/// [nt], clamped to n.
pub fn step_count(n: usize, t: f64) -> usize {
    ((n as f64 * t).floor() as usize).min(n)
}

/// One path of 𝒯^{≥d}Y_n over `cfg.times` at the given n.
pub fn simulate_path(cfg: &ExperimentConfig, n: usize, replication_index: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let sim = PathSimulator::new(cfg, n)?;
    Ok(path_from_terms(&sim.terms(replication_index)?, &cfg.times))
}

/// 𝒯^{≥d}Z_n(t) = 𝒯^{≥d}Y_n(t) + ((nt − [nt])/√n)·𝒯^{≥d}φ(X_{[nt]}).
pub fn interpolate_z(path: &[f64], terms: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    if path.len() != times.len() {
        return Err(PclError::invalid("path", "path and time grid lengths differ"));
    }
    let n = terms.len();
    let s = (n as f64).sqrt();
    Ok(path
        .iter()
        .zip(times)
        .map(|(&y, &t)| {
            let k = step_count(n, t);
            let frac = n as f64 * t - k as f64;
            if frac > 0.0 && k < n {
                y + frac / s * terms[k]
            } else {
                y
            }
        })
        .collect())
}

/// Ỹ_n = n^{−1/2} Σ_j b_j Σ_{u<[nt_j]} terms[u].
pub fn fdd_from_terms(terms: &[f64], b: &[f64], t: &[f64]) -> f64 {
    path_from_terms(terms, t).iter().zip(b).map(|(y, b)| y * b).sum()
}

/// Ỹ_n for every replication at the first configured n.
pub fn fdd_statistic(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let sim = PathSimulator::new(cfg, cfg.n_values[0])?;
    run_replications(cfg.replications, |r| Ok(fdd_from_terms(&sim.terms(r)?, &cfg.fdd_b, &cfg.fdd_t)))
}

/// Runs `f` over replications 0..reps in parallel, returning results in order.
pub fn run_replications<T: Send>(reps: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..reps as u64).into_par_iter().map(&f).collect()
}

/// Var(𝒯^{≥d}Y_n(1)) over R replications with its standard error.
pub fn monte_carlo_mu2(
    phi: &NonlinearitySpec,
    d: usize,
    spec: &KernelSpec,
    n: usize,
    reps: usize,
    seed: u64,
    tail_fraction: f64,
) -> Result<(f64, f64)> {
    if reps < 2 {
        return Err(PclError::invalid("reps", "need at least two replications"));
    }
    let sim = PathSimulator::build(spec, phi, d, n, seed, tail_fraction)?;
    let ys = run_replications(reps, |r| Ok(path_from_terms(&sim.terms(r)?, &[1.0])[0]))?;
    let m = stats::Moments::of(&ys);
    Ok((m.variance, m.variance_se))
}

/// Grid used by the harness for Fourier φ (the default grid).
pub fn harness_grid(phi: &NonlinearitySpec) -> Option<ThetaGrid> {
    phi.theta_grid()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::truncate_phi;

    #[test]
    fn chebyshev_is_accurate() {
        let c = Chebyshev::fit(0.0, 1.0, 40, |x| (3.0 * x).sin());
        for k in 0..50 {
            let x = k as f64 / 49.0;
            assert!((c.eval(x) - (3.0 * x).sin()).abs() < 1e-14);
        }
    }

    fn check_terms(kernel: KernelSpec, phi: NonlinearitySpec, d: usize, n: usize, tol: f64) {
        let sim = PathSimulator::build(&kernel, &phi, d, n, 11, 1e-6).unwrap();
        let config = sim.configuration(3).unwrap();
        let fast = sim.terms_on(&config).unwrap();
        for u in [0, n / 3, n - 1] {
            let slow = truncate_phi(&phi, d, &kernel.with_shift(u as i64), &config, None).unwrap();
            assert!((fast[u] - slow).abs() < tol, "u={u}: {} vs {slow}", fast[u]);
        }
    }

    #[test]
    fn fast_terms_match_direct_truncation() {
        let pl = KernelSpec::power_law(2.0, 1.0).unwrap();
        let bump = KernelSpec::compact_bump(0.0, 1.5).unwrap();
        let g = NonlinearitySpec::gaussian_bump();
        let x2 = NonlinearitySpec::polynomial(&[0.5, 1.0, -0.3, 0.2]).unwrap();
        check_terms(pl, g.clone(), 1, 64, 1e-9);
        check_terms(pl, g.clone(), 2, 64, 1e-5);
        check_terms(bump, g, 2, 32, 1e-9);
        check_terms(pl, x2.clone(), 1, 64, 1e-9);
        check_terms(pl, x2, 2, 64, 1e-8);
    }

    #[test]
    fn paths_and_interpolation() {
        let terms = vec![1.0, 2.0, 3.0, 4.0];
        let times = [0.0, 0.5, 0.6, 1.0];
        let p = path_from_terms(&terms, &times);
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 1.5).abs() < 1e-15 && (p[3] - 5.0).abs() < 1e-15);
        let z = interpolate_z(&p, &terms, &times).unwrap();
        assert_eq!(z[1], p[1]);
        assert!((z[2] - (p[2] + 0.4 / 2.0 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn hypothesis_is_enforced() {
        let k = KernelSpec::power_law(0.7, 1.0).unwrap();
        assert!(matches!(check_hypothesis(&k, 1), Err(PclError::Hypothesis(_))));
        let k = KernelSpec::power_law(0.8, 1.0).unwrap();
        assert!(check_hypothesis(&k, 2).is_ok());
    }
}
