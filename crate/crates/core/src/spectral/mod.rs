//! Covariances of truncated exponentials, the ρ_k series and μ².
//!
//! Two analytic routes compute μ²:
//! * `ChaosSeries` pairs cf(θ₁)cf(θ₂) with exp(G_u) − Σ_{k<d} G_u^k/k!,
//!   where G_u is the pair integral and the characteristic functions come
//!   from adaptive quadrature.
//! * `CovarianceSeries` evaluates the joint characteristic function of
//!   (X₀, X_u) from the fused integrand e^{i(θ₁ψ₀+θ₂ψ_u)} − 1 − i(θ₁ψ₀+θ₂ψ_u)
//!   and subtracts the low chaoses.
//!
//! Polynomial φ uses chaos-kernel inner products for the first route and
//! joint moments from cumulants for the second.

mod tables;

use num_complex::Complex64;
use serde::Serialize;

use crate::chaos::{expm1_i, factorial, log_char_fn, NonlinearitySpec, PolynomialMoments, ThetaGrid};
use crate::error::{PclError, Result};
use crate::kernels::{d_alpha, integrate_with, KernelSpec, QuadratureSpec, Window};
pub use tables::{shift_contributions, ShiftContribution};

/// Default shift cutoff of the u-series.
pub const DEFAULT_SHIFT_CUTOFF: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceQuery {
    pub theta1: f64,
    pub theta2: f64,
    pub shift: i64,
    pub d: usize,
    pub spec: KernelSpec,
    pub window: Window,
}

impl CovarianceQuery {
    fn kernels(&self) -> (KernelSpec, KernelSpec) {
        (self.spec.with_shift(0), self.spec.with_shift(self.shift))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let (a, b) = self.kernels();
        let mut bp = a.breakpoints();
        bp.extend(b.breakpoints());
        bp
    }
}

/// Σ_{k≥d} z^k/k!, as exp(z) minus its partial sum when |z| is not small
/// and as the direct series otherwise.
pub fn exp_tail(z: Complex64, d: usize) -> Complex64 {
    if d == 0 {
        return z.exp();
    }
    if z.norm() < 0.5 {
        let mut term = z.powu(d as u32) / factorial(d);
        let mut sum = term;
        let mut k = d;
        while term.norm() > 1e-18 * sum.norm() && k < d + 60 {
            k += 1;
            term = term * z / k as f64;
            sum += term;
        }
        return sum;
    }
    let mut partial = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    for k in 0..d {
        if k > 0 {
            term = term * z / k as f64;
        }
        partial += term;
    }
    z.exp() - partial
}

/// G_u(θ₁,θ₂) = ∫_W (e^{iθ₁ψ₀} − 1)(e^{iθ₂ψ_u} − 1).
pub fn pair_integral(q: &CovarianceQuery) -> Result<Complex64> {
    if q.theta1 == 0.0 || q.theta2 == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (a, b) = q.kernels();
    integrate_with(
        |x| expm1_i(q.theta1 * a.eval(x)) * expm1_i(q.theta2 * b.eval(x)),
        q.window,
        &q.breakpoints(),
        &QuadratureSpec::default(),
    )
}

/// Same pairing with the second factor conjugated.
pub fn pair_integral_conj(q: &CovarianceQuery) -> Result<Complex64> {
    let (a, b) = q.kernels();
    integrate_with(
        |x| expm1_i(q.theta1 * a.eval(x)) * expm1_i(q.theta2 * b.eval(x)).conj(),
        q.window,
        &q.breakpoints(),
        &QuadratureSpec::default(),
    )
}

/// E[𝒯^{≥d}e^{iθ₁X₀}·𝒯^{≥d}e^{iθ₂X_u}] (bilinear, no conjugation).
pub fn cov_truncated_exponential(q: &CovarianceQuery) -> Result<Complex64> {
    let quad = QuadratureSpec::default();
    let (a, b) = q.kernels();
    let cf1 = log_char_fn(q.theta1, &a, q.window, &quad)?.exp();
    let cf2 = log_char_fn(q.theta2, &b, q.window, &quad)?.exp();
    Ok(cf1 * cf2 * exp_tail(pair_integral(q)?, q.d))
}

/// E[𝒯^{≥d}e^{iθ₁X₀}·conj(𝒯^{≥d}e^{iθ₂X_u})], the isometry pairing.
pub fn cov_truncated_exponential_conj(q: &CovarianceQuery) -> Result<Complex64> {
    let quad = QuadratureSpec::default();
    let (a, b) = q.kernels();
    let cf1 = log_char_fn(q.theta1, &a, q.window, &quad)?.exp();
    let cf2 = log_char_fn(q.theta2, &b, q.window, &quad)?.exp();
    Ok(cf1 * cf2.conj() * exp_tail(pair_integral_conj(q)?, q.d))
}

/// E e^{iθ₁X₀ + iθ₂X_u} from the fused integrand.
pub fn joint_char_fn(theta1: f64, theta2: f64, shift: i64, spec: &KernelSpec, window: Window) -> Result<Complex64> {
    let a = spec.with_shift(0);
    let b = spec.with_shift(shift);
    let mut bp = a.breakpoints();
    bp.extend(b.breakpoints());
    let lg = integrate_with(
        |x| crate::chaos::kappa_i(theta1 * a.eval(x) + theta2 * b.eval(x)),
        window,
        &bp,
        &QuadratureSpec::default(),
    )?;
    Ok(lg.exp())
}

/// Decay exponent (1−2α)∨(−α) of ⟨Ψ₀,Ψ_u⟩; −∞ for compact kernels.
pub fn pair_decay_exponent(spec: &KernelSpec) -> f64 {
    match spec.alpha() {
        Some(a) => (1.0 - 2.0 * a).max(-a),
        None => f64::NEG_INFINITY,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeriesValue {
    pub value: Complex64Ser,
    pub tail_bound: f64,
}

/// Serializable complex number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Complex64Ser {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Complex64Ser {
    fn from(z: Complex64) -> Self {
        Complex64Ser { re: z.re, im: z.im }
    }
}

impl From<Complex64Ser> for Complex64 {
    fn from(z: Complex64Ser) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Envelope tail Σ_{|u|>cutoff} C(1+|u|)^{e}, with C fitted on |u| ∈ [cutoff/2, cutoff].
fn envelope_tail(values: &[(i64, f64)], cutoff: usize, e: f64) -> f64 {
    if e == f64::NEG_INFINITY {
        return 0.0;
    }
    let lo = (cutoff / 2).max(1) as i64;
    let c = values
        .iter()
        .filter(|(u, _)| u.unsigned_abs() as i64 >= lo)
        .map(|(u, v)| v / (1.0 + u.unsigned_abs() as f64).powf(e))
        .fold(0.0, f64::max);
    if e >= -1.0 {
        return f64::INFINITY;
    }
    2.0 * c * (1.0 + cutoff as f64).powf(e + 1.0) / (-e - 1.0)
}

/// ρ_k(θ₁,θ₂) = Σ_{|u|≤cutoff} cf(θ₁)cf(θ₂)G_u^k with its envelope tail bound.
pub fn rho_k(
    theta1: f64,
    theta2: f64,
    k: usize,
    spec: &KernelSpec,
    window: Window,
    shift_cutoff: usize,
) -> Result<(Complex64, f64)> {
    if k == 0 {
        return Err(PclError::invalid("k", "must be at least 1"));
    }
    let quad = QuadratureSpec::default();
    let mut total = Complex64::new(0.0, 0.0);
    let mut mags = Vec::new();
    let cf1 = log_char_fn(theta1, &spec.with_shift(0), window, &quad)?.exp();
    for u in -(shift_cutoff as i64)..=(shift_cutoff as i64) {
        let q = CovarianceQuery { theta1, theta2, shift: u, d: 0, spec: *spec, window };
        let cf2 = log_char_fn(theta2, &spec.with_shift(u), window, &quad)?.exp();
        let term = cf1 * cf2 * pair_integral(&q)?.powu(k as u32);
        mags.push((u, term.norm()));
        total += term;
    }
    let tail = envelope_tail(&mags, shift_cutoff, k as f64 * pair_decay_exponent(spec));
    Ok((total, tail))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MuMethod {
    ChaosSeries,
    CovarianceSeries,
    MonteCarlo,
}

impl std::str::FromStr for MuMethod {
    type Err = PclError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chaos_series" | "chaos" => Ok(MuMethod::ChaosSeries),
            "covariance_series" | "covariance" => Ok(MuMethod::CovarianceSeries),
            "monte_carlo" | "mc" => Ok(MuMethod::MonteCarlo),
            other => Err(PclError::invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Settings for [`mu_squared`].
#[derive(Clone, Debug)]
pub struct MuOptions {
    pub shift_cutoff: usize,
    pub grid: Option<ThetaGrid>,
    /// (n, replications, master seed) for the Monte Carlo route.
    pub monte_carlo: (usize, usize, u64),
    /// Tail fraction of the simulation window.
    pub tail_fraction: f64,
}

impl Default for MuOptions {
    fn default() -> Self {
        MuOptions { shift_cutoff: DEFAULT_SHIFT_CUTOFF, grid: None, monte_carlo: (1 << 14, 2000, 0), tail_fraction: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MuSquared {
    pub method: MuMethod,
    pub value: f64,
    /// Monte Carlo standard error; zero for the analytic routes.
    pub std_error: f64,
    /// Bound on the neglected |u| > cutoff part of the series.
    pub tail_bound: f64,
    pub imag_residue: f64,
    pub shift_cutoff: usize,
}

/// The limiting variance μ² by one of three routes.
pub fn mu_squared(
    phi: &NonlinearitySpec,
    d: usize,
    spec: &KernelSpec,
    window: Window,
    method: MuMethod,
    opts: &MuOptions,
) -> Result<MuSquared> {
    if d == 0 {
        return Err(PclError::invalid("d", "must be at least 1"));
    }
    if !phi.has_fourier() && d > 2 {
        return Err(PclError::invalid(
            "d",
            format!("polynomial nonlinearities support d <= 2, got {d}; use a Fourier-path family"),
        ));
    }
    if method == MuMethod::MonteCarlo {
        let (n, reps, seed) = opts.monte_carlo;
        let (v, se) = crate::harness::monte_carlo_mu2(phi, d, spec, n, reps, seed, opts.tail_fraction)?;
        return Ok(MuSquared { method, value: v, std_error: se, tail_bound: 0.0, imag_residue: 0.0, shift_cutoff: 0 });
    }
    let contribs = shift_contributions(phi, d, spec, window, opts.shift_cutoff, opts.grid)?;
    let pick = |c: &ShiftContribution| if method == MuMethod::ChaosSeries { c.chaos } else { c.covariance };
    let mut total = Complex64::new(0.0, 0.0);
    for c in &contribs {
        total += pick(c) * c.multiplicity as f64;
    }
    let mags: Vec<(i64, f64)> = contribs.iter().map(|c| (c.shift, pick(c).norm())).collect();
    let tail = envelope_tail(&mags, opts.shift_cutoff, d as f64 * pair_decay_exponent(spec));
    if total.im.abs() > 1e-6 * (1.0 + total.re.abs()) {
        log::warn!("imaginary residue {:.3e} in the mu^2 series", total.im);
    }
    Ok(MuSquared {
        method,
        value: total.re,
        std_error: 0.0,
        tail_bound: tail,
        imag_residue: total.im,
        shift_cutoff: opts.shift_cutoff,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayTable {
    pub entries: Vec<(i64, f64)>,
    pub slope: f64,
    /// (1−2α)d_α + 0.2 for power-law kernels.
    pub bound: Option<f64>,
}

/// |cov(𝒯^{≥d}φ(X₀), 𝒯^{≥d}φ(X_u))| for u = 0..u_max on ℝ, with the
/// least-squares log-log slope over u ∈ [4, u_max].
pub fn cov_phi_decay(phi: &NonlinearitySpec, d: usize, spec: &KernelSpec, u_max: usize) -> Result<DecayTable> {
    if u_max < 10 {
        return Err(PclError::invalid("u_max", "must be at least 10"));
    }
    let contribs = shift_contributions(phi, d, spec, Window::whole_line(), u_max, None)?;
    let entries: Vec<(i64, f64)> = contribs.iter().map(|c| (c.shift, c.covariance.re.abs())).collect();
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter(|(u, v)| *u >= 4 && *v > 0.0)
        .map(|(u, v)| ((*u as f64).ln(), v.ln()))
        .collect();
    let slope = if pts.len() >= 2 { least_squares_slope(&pts) } else { f64::NEG_INFINITY };
    let bound = match spec.alpha() {
        Some(a) => Some((1.0 - 2.0 * a) * d_alpha(a)? as f64 + 0.2),
        None => None,
    };
    Ok(DecayTable { entries, slope, bound })
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Covariance of 𝒯^{≥d}φ(X₀) and 𝒯^{≥d}φ(X_u) on a window (covariance route).
pub fn cov_phi(phi: &NonlinearitySpec, d: usize, spec: &KernelSpec, window: Window, u: i64) -> Result<f64> {
    let c = tables::single_shift(phi, d, spec, window, u, None)?;
    Ok(c.covariance.re)
}

/// Exact chaos covariance of polynomial φ between shifts 0 and u.
pub(crate) fn polynomial_chaos_covariance(
    coeffs: [f64; 4],
    d: usize,
    spec: &KernelSpec,
    window: Window,
    u: i64,
) -> Result<(f64, f64)> {
    let p = pair_powers(spec, window, u)?;
    let m0 = PolynomialMoments::new(coeffs, &spec.with_shift(0), window)?;
    let mu = PolynomialMoments::new(coeffs, &spec.with_shift(u), window)?;
    let (c2, c3) = (coeffs[2], coeffs[3]);
    let h0 = m0.first_kernel();
    let hu = mu.first_kernel();
    let mut first = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            first += h0[a] * hu[b] * p[a + 1][b + 1];
        }
    }
    let second = 2.0
        * (c2 * c2 * p[1][1].powi(2)
            + 3.0 * c2 * c3 * p[1][1] * (p[1][2] + p[2][1])
            + 9.0 * c3 * c3 * 0.5 * (p[1][1] * p[2][2] + p[1][2] * p[2][1]));
    let third = 6.0 * c3 * c3 * p[1][1].powi(3);
    let chaos = match d {
        1 => first + second + third,
        2 => second + third,
        _ => return Err(PclError::invalid("d", format!("polynomial nonlinearities support d <= 2, got {d}"))),
    };
    // second route: joint moments from joint cumulants
    let mut mixed = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let cab = coeffs[a] * coeffs[b];
            if cab != 0.0 {
                mixed += cab * joint_moment(a, b, &p);
            }
        }
    }
    let mut cov = mixed - m0.mean() * mu.mean();
    if d == 2 {
        cov -= first;
    }
    Ok((chaos, cov))
}

/// P[a][b] = ∫_W ψ₀^a ψ_u^b for a, b ≤ 3.
fn pair_powers(spec: &KernelSpec, window: Window, u: i64) -> Result<[[f64; 4]; 4]> {
    let a = spec.with_shift(0);
    let b = spec.with_shift(u);
    let mut bp = a.breakpoints();
    bp.extend(b.breakpoints());
    let quad = QuadratureSpec { tolerance: 1e-13, ..Default::default() };
    let mut p = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i + j < 2 {
                continue;
            }
            p[i][j] = if j == 0 {
                a.power_integral(i as u32, window.lo(), window.hi())?
            } else if i == 0 {
                b.power_integral(j as u32, window.lo(), window.hi())?
            } else {
                integrate_with(|x| a.eval(x).powi(i as i32) * b.eval(x).powi(j as i32), window, &bp, &quad)?
            };
        }
    }
    Ok(p)
}

/// E[X₀^a X_u^b] by summing products of joint cumulants over set partitions.
fn joint_moment(a: usize, b: usize, p: &[[f64; 4]; 4]) -> f64 {
    let n = a + b;
    if n == 0 {
        return 1.0;
    }
    let shape = crate::diagram::GroupShape::new(vec![n]).expect("at most six elements");
    let parts = crate::diagram::enumerate_partitions(&shape, crate::diagram::PartitionFilter::All).expect("small");
    let mut total = 0.0;
    for sigma in parts {
        let mut prod = 1.0;
        for block in sigma.blocks() {
            if block.len() < 2 {
                prod = 0.0;
                break;
            }
            let zeros = block.iter().filter(|&&i| i < a).count();
            prod *= p[zeros][block.len() - zeros];
        }
        total += prod;
    }
    total
}

/// d_α, exposed for reports.
pub fn hypothesis_d_alpha(spec: &KernelSpec) -> Option<usize> {
    spec.alpha().and_then(|a| d_alpha(a).ok())
}
