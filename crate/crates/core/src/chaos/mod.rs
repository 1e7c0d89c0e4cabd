//! Chaos calculus for exponential functionals of X_u = I₁(ψ_u).
//!
//! The n-th chaos kernel of e^{iθX_u} is cf(θ)·g^{⊗n}/n! with
//! g = e^{iθψ_u} − 1, so every multiple integral needed here is a tensor
//! power, and I_n(g^{⊗n}) reduces to elementary symmetric polynomials of
//! the values of g at the points.

pub mod nonlinearity;

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{PclError, Result};
use crate::kernels::{integrate_with, KernelSpec, QuadratureSpec, Window};
use crate::process::PointConfiguration;
pub use nonlinearity::{NonlinearitySpec, PhiFamily, ThetaGrid};

/// Order cap for multiple integrals and truncations.
pub const MAX_ORDER: usize = 30;

/// e^{iz} − 1 without cancellation at small z.
#[inline]
pub fn expm1_i(z: f64) -> Complex64 {
    let s = (0.5 * z).sin();
    Complex64::new(-2.0 * s * s, z.sin())
}

/// e^{iz} − 1 − iz without cancellation at small z.
#[inline]
pub fn kappa_i(z: f64) -> Complex64 {
    let s = (0.5 * z).sin();
    let im = if z.abs() < 0.1 {
        let z2 = z * z;
        -z * z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0)))
    } else {
        z.sin() - z
    };
    Complex64::new(-2.0 * s * s, im)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// log E e^{iθX_u} = ∫_W (e^{iθψ_u} − 1 − iθψ_u).
pub fn log_char_fn(theta: f64, spec: &KernelSpec, window: Window, quad: &QuadratureSpec) -> Result<Complex64> {
    if theta == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    integrate_with(|x| kappa_i(theta * spec.eval(x)), window, &spec.breakpoints(), quad)
}

/// Characteristic function of the windowed X_u.
pub fn char_fn(theta: f64, spec: &KernelSpec, window: Window) -> Result<Complex64> {
    Ok(log_char_fn(theta, spec, window, &QuadratureSpec::default())?.exp())
}

/// (e₀, …, e_{max_order}) by the one-pass recurrence.
pub fn elementary_symmetric(values: &[Complex64], max_order: usize) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); max_order + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        let top = (i + 1).min(max_order);
        for k in (1..=top).rev() {
            let prev = e[k - 1];
            e[k] += prev * v;
        }
    }
    e
}

/// I_n(g^{⊗n}) from the values of g at the points and S = ∫_W g.
pub fn tensor_power_integral(values: &[Complex64], s: Complex64, order: usize) -> Complex64 {
    let e = elementary_symmetric(values, order);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..=order {
        let sign = if (order - k) % 2 == 0 { 1.0 } else { -1.0 };
        acc += e[k] * s.powu((order - k) as u32) * (sign * binomial(order, k) * factorial(k));
    }
    acc
}

pub type BaseFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// c·g^{⊗n} with g restricted to a window.
#[derive(Clone)]
pub struct TensorPowerKernel {
    coefficient: Complex64,
    base: BaseFn,
    order: usize,
    window: Window,
    integral: Complex64,
}

impl std::fmt::Debug for TensorPowerKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TensorPowerKernel")
            .field("coefficient", &self.coefficient)
            .field("order", &self.order)
            .field("window", &self.window)
            .field("integral", &self.integral)
            .finish()
    }
}

impl TensorPowerKernel {
    /// Computes ∫_W g by quadrature and checks that g is square integrable.
    pub fn new(
        coefficient: Complex64,
        base: BaseFn,
        order: usize,
        window: Window,
        breakpoints: &[f64],
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        let integral = integrate_with(|x| base(x), window, breakpoints, quad)?;
        let sq: f64 = integrate_with(|x| base(x).norm_sqr(), window, breakpoints, quad)?;
        if !sq.is_finite() {
            return Err(PclError::Guard("kernel base is not square integrable on the window".into()));
        }
        Self::from_parts(coefficient, base, order, window, integral)
    }

    /// Uses a precomputed ∫_W g.
    pub fn from_parts(coefficient: Complex64, base: BaseFn, order: usize, window: Window, integral: Complex64) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(PclError::invalid("order", format!("{order} exceeds the cap {MAX_ORDER}")));
        }
        Ok(TensorPowerKernel { coefficient, base, order, window, integral })
    }

    /// cf(θ)·(e^{iθψ_u} − 1)^{⊗order}: order! times the chaos kernel of e^{iθX_u}.
    pub fn exponential(theta: f64, spec: &KernelSpec, window: Window, order: usize) -> Result<Self> {
        let quad = QuadratureSpec::default();
        let cf = log_char_fn(theta, spec, window, &quad)?.exp();
        let s = *spec;
        let base: BaseFn = Arc::new(move |x| expm1_i(theta * s.eval(x)));
        let integral = integrate_with(|x| base(x), window, &spec.breakpoints(), &quad)?;
        Self::from_parts(cf, base, order, window, integral)
    }

    pub fn coefficient(&self) -> Complex64 {
        self.coefficient
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn integral(&self) -> Complex64 {
        self.integral
    }

    /// g(x)·1_W(x).
    pub fn base_at(&self, x: f64) -> Complex64 {
        if self.window.contains(x) {
            (self.base)(x)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

/// coefficient · I_n(g^{⊗n}) on a configuration.
pub fn multiple_integral(config: &PointConfiguration, kernel: &TensorPowerKernel) -> Result<Complex64> {
    if kernel.order > MAX_ORDER {
        return Err(PclError::invalid("order", format!("{} exceeds the cap {MAX_ORDER}", kernel.order)));
    }
    if kernel.order == 0 {
        return Ok(kernel.coefficient);
    }
    let values: Vec<Complex64> = config.points().iter().map(|&x| kernel.base_at(x)).collect();
    Ok(kernel.coefficient * tensor_power_integral(&values, kernel.integral, kernel.order))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncationRange {
    /// 𝒯^{≥d}
    AtLeast(usize),
    /// 𝒯^{[m₁,m₂]}
    Between(usize, usize),
    /// 𝒯^{≤m}
    AtMost(usize),
}

impl TruncationRange {
    fn validate(&self) -> Result<()> {
        let top = match *self {
            TruncationRange::AtLeast(d) => d,
            TruncationRange::Between(a, b) => {
                if a > b {
                    return Err(PclError::invalid("range", format!("empty range [{a}, {b}]")));
                }
                b
            }
            TruncationRange::AtMost(m) => m,
        };
        if top > MAX_ORDER {
            return Err(PclError::invalid("range", format!("bound {top} exceeds the cap {MAX_ORDER}")));
        }
        Ok(())
    }
}

/// Precomputed chaos data of e^{iθX_u} on a window: cf(θ) and S = ∫_W g.
#[derive(Clone, Debug)]
pub struct ExponentialChaos {
    theta: f64,
    spec: KernelSpec,
    window: Window,
    cf: Complex64,
    s: Complex64,
    compensator: f64,
}

impl ExponentialChaos {
    pub fn new(theta: f64, spec: &KernelSpec, window: Window) -> Result<Self> {
        let quad = QuadratureSpec::default();
        let cf = log_char_fn(theta, spec, window, &quad)?.exp();
        let s = integrate_with(|x| expm1_i(theta * spec.eval(x)), window, &spec.breakpoints(), &quad)?;
        let compensator = spec.windowed_integral(window)?;
        Ok(ExponentialChaos { theta, spec: *spec, window, cf, s, compensator })
    }

    pub fn cf(&self) -> Complex64 {
        self.cf
    }

    pub fn integral(&self) -> Complex64 {
        self.s
    }

    fn check(&self, config: &PointConfiguration) -> Result<()> {
        if config.window() != self.window {
            return Err(PclError::invalid("config", "configuration window differs from the chaos window"));
        }
        Ok(())
    }

    /// e^{iθX_u}.
    pub fn value(&self, config: &PointConfiguration) -> Result<Complex64> {
        self.check(config)?;
        let x = crate::process::compensated_sum(config, &self.spec, self.compensator);
        Ok(Complex64::new(0.0, self.theta * x).exp())
    }

    /// The chaos components cf·I_q(g^{⊗q})/q! for q = 0..=max_q.
    pub fn components(&self, config: &PointConfiguration, max_q: usize) -> Result<Vec<Complex64>> {
        self.check(config)?;
        if max_q > MAX_ORDER {
            return Err(PclError::invalid("order", format!("{max_q} exceeds the cap {MAX_ORDER}")));
        }
        let values: Vec<Complex64> = config
            .points()
            .iter()
            .map(|&x| if self.window.contains(x) { expm1_i(self.theta * self.spec.eval(x)) } else { Complex64::new(0.0, 0.0) })
            .collect();
        let e = elementary_symmetric(&values, max_q);
        let mut out = Vec::with_capacity(max_q + 1);
        for q in 0..=max_q {
            // I_q/q! = Σ_k (−1)^{q−k} e_k S^{q−k}/(q−k)!
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=q {
                let sign = if (q - k) % 2 == 0 { 1.0 } else { -1.0 };
                acc += e[k] * self.s.powu((q - k) as u32) * (sign / factorial(q - k));
            }
            out.push(self.cf * acc);
        }
        Ok(out)
    }

    pub fn truncate(&self, config: &PointConfiguration, range: TruncationRange) -> Result<Complex64> {
        range.validate()?;
        match range {
            TruncationRange::AtLeast(d) => {
                let f = self.value(config)?;
                if d == 0 {
                    return Ok(f);
                }
                let low: Complex64 = self.components(config, d - 1)?.iter().sum();
                Ok(f - low)
            }
            TruncationRange::Between(a, b) => Ok(self.components(config, b)?[a..].iter().sum()),
            TruncationRange::AtMost(m) => Ok(self.components(config, m)?.iter().sum()),
        }
    }
}

/// 𝒯 applied to e^{iθX_u}, with X_u on the configuration's window.
pub fn truncate_exponential(
    theta: f64,
    spec: &KernelSpec,
    range: TruncationRange,
    config: &PointConfiguration,
) -> Result<Complex64> {
    ExponentialChaos::new(theta, spec, config.window())?.truncate(config, range)
}

/// (n!‖f_n‖²)_{n=0..m} for F = e^{iθX_u} on a window.
pub fn chaos_kernel_norms(theta: f64, spec: &KernelSpec, window: Window, m: usize) -> Result<Vec<f64>> {
    if m > MAX_ORDER {
        return Err(PclError::invalid("m", format!("{m} exceeds the cap {MAX_ORDER}")));
    }
    let quad = QuadratureSpec::default();
    let cf2 = log_char_fn(theta, spec, window, &quad)?.exp().norm_sqr();
    let g2: f64 = integrate_with(|x| expm1_i(theta * spec.eval(x)).norm_sqr(), window, &spec.breakpoints(), &quad)?;
    let mut out = Vec::with_capacity(m + 1);
    let mut term = cf2;
    for n in 0..=m {
        if n > 0 {
            term *= g2 / n as f64;
        }
        out.push(term);
    }
    Ok(out)
}

/// Cumulant data of a polynomial φ evaluated at X_u on a window.
#[derive(Clone, Copy, Debug)]
pub struct PolynomialMoments {
    pub coeffs: [f64; 4],
    /// κ_m = ∫_W ψ_u^m for m = 1, 2, 3 (κ₁ is NaN when it diverges).
    pub kappa: [f64; 3],
}

impl PolynomialMoments {
    pub fn new(coeffs: [f64; 4], spec: &KernelSpec, window: Window) -> Result<Self> {
        let mut kappa = [0.0; 3];
        for (m, k) in kappa.iter_mut().enumerate() {
            *k = match spec.power_integral(m as u32 + 1, window.lo(), window.hi()) {
                // κ₁ = ∞ for α ≤ 1 on ℝ; moments of the centred X never use it
                Err(PclError::Guard(_)) if m == 0 => f64::NAN,
                r => r?,
            };
        }
        Ok(PolynomialMoments { coeffs, kappa })
    }

    /// E φ(X_u), using E X = 0, E X² = κ₂, E X³ = κ₃.
    pub fn mean(&self) -> f64 {
        let c = &self.coeffs;
        c[0] + c[2] * self.kappa[1] + c[3] * self.kappa[2]
    }

    /// Coefficients (a₁, a₂, a₃) of h(v) = E[φ(X+v) − φ(X)] = Σ a_k v^k.
    pub fn first_kernel(&self) -> [f64; 3] {
        let c = &self.coeffs;
        [c[1] + 3.0 * c[3] * self.kappa[1], c[2], c[3]]
    }

    /// ∫_W h(ψ_u).
    pub fn first_kernel_integral(&self) -> f64 {
        let a = self.first_kernel();
        a[0] * self.kappa[0] + a[1] * self.kappa[1] + a[2] * self.kappa[2]
    }
}

/// Precomputed 𝒯^{≥d}φ(X_u) for one shift and window.
pub enum PhiTruncation {
    Fourier {
        phi: NonlinearitySpec,
        spec: KernelSpec,
        d: usize,
        compensator: f64,
        nodes: Vec<(f64, f64)>,
        chaos: Vec<ExponentialChaos>,
    },
    Polynomial {
        phi: NonlinearitySpec,
        spec: KernelSpec,
        d: usize,
        compensator: f64,
        moments: PolynomialMoments,
    },
}

impl PhiTruncation {
    pub fn new(phi: &NonlinearitySpec, d: usize, spec: &KernelSpec, window: Window, grid: Option<ThetaGrid>) -> Result<Self> {
        let compensator = spec.windowed_integral(window)?;
        match phi.poly_coeffs() {
            Some(coeffs) => {
                if d > 2 {
                    return Err(PclError::invalid(
                        "d",
                        format!("polynomial nonlinearities support d <= 2, got {d}; use a Fourier-path family such as the Gaussian bump"),
                    ));
                }
                let moments = PolynomialMoments::new(coeffs, spec, window)?;
                Ok(PhiTruncation::Polynomial { phi: phi.clone(), spec: *spec, d, compensator, moments })
            }
            None => {
                if d > MAX_ORDER {
                    return Err(PclError::invalid("d", format!("{d} exceeds the cap {MAX_ORDER}")));
                }
                let grid = grid.or_else(|| phi.theta_grid()).unwrap();
                grid.validate()?;
                let mut nodes = Vec::new();
                let mut chaos = Vec::new();
                if d > 0 {
                    for (t, w) in grid.nodes() {
                        nodes.push((t, w * phi.fourier(t).unwrap()));
                        chaos.push(ExponentialChaos::new(t, spec, window)?);
                    }
                }
                Ok(PhiTruncation::Fourier { phi: phi.clone(), spec: *spec, d, compensator, nodes, chaos })
            }
        }
    }

    /// 𝒯^{≥d}φ(X_u) on one configuration.
    ///
    /// φ(X_u) itself is evaluated exactly; the removed low chaoses are the
    /// θ-grid integral of φ̂ against the exponential components.
    pub fn apply(&self, config: &PointConfiguration) -> Result<f64> {
        match self {
            PhiTruncation::Polynomial { phi, spec, d, compensator, moments } => {
                let x = crate::process::compensated_sum(config, spec, *compensator);
                let mut v = phi.eval(x);
                if *d >= 1 {
                    v -= moments.mean();
                }
                if *d >= 2 {
                    let a = moments.first_kernel();
                    let w = config.window();
                    let s: f64 = config
                        .points()
                        .iter()
                        .filter(|p| w.contains(**p))
                        .map(|&p| {
                            let y = spec.eval(p);
                            ((a[2] * y + a[1]) * y + a[0]) * y
                        })
                        .sum();
                    v -= s - moments.first_kernel_integral();
                }
                Ok(v)
            }
            PhiTruncation::Fourier { phi, spec, d, compensator, nodes, chaos } => {
                let x = crate::process::compensated_sum(config, spec, *compensator);
                let mut v = phi.eval(x);
                if *d == 0 {
                    return Ok(v);
                }
                let mut low = Complex64::new(0.0, 0.0);
                for ((_, w), ch) in nodes.iter().zip(chaos) {
                    let comps = ch.components(config, d - 1)?;
                    low += comps.iter().sum::<Complex64>() * *w;
                }
                if low.im.abs() >= 1e-6 {
                    return Err(PclError::Guard(format!("imaginary residue {:.3e} of the θ integral", low.im)));
                }
                log::trace!("theta-grid imaginary residue {:.3e}", low.im);
                v -= low.re;
                Ok(v)
            }
        }
    }
}

/// 𝒯^{≥d}φ(X_u) with X_u on the configuration's window.
pub fn truncate_phi(
    phi: &NonlinearitySpec,
    d: usize,
    spec: &KernelSpec,
    config: &PointConfiguration,
    grid: Option<ThetaGrid>,
) -> Result<f64> {
    PhiTruncation::new(phi, d, spec, config.window(), grid)?.apply(config)
}
