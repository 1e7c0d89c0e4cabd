//! Kernels ψ, their shifts ψ_u, the envelopes Ψ_β and windowed integrals.

pub mod quadrature;

use serde::Serialize;

use crate::error::{PclError, Result};
pub use quadrature::{integrate, integrate_with, NodeSet, QuadValue, QuadratureSpec};

/// Integration domain. Simulation needs finite windows; the analytic
/// routes may use the whole line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    lo: f64,
    hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(PclError::invalid("window", "bounds must be finite (use Window::whole_line for ℝ)"));
        }
        if lo >= hi {
            return Err(PclError::invalid("window", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }

    pub fn whole_line() -> Self {
        Window { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_infinite(&self) -> bool {
        !self.lo.is_finite() || !self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum KernelFamily {
    PowerLaw { alpha: f64, scale: f64 },
    Indicator { lo: f64, hi: f64 },
    CompactBump { center: f64, halfwidth: f64 },
}

/// A kernel family together with an integer shift u.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelSpec {
    family: KernelFamily,
    shift: i64,
}

impl KernelSpec {
    pub fn power_law(alpha: f64, scale: f64) -> Result<Self> {
        check_exponent("alpha", alpha)?;
        if !scale.is_finite() || scale == 0.0 {
            return Err(PclError::invalid("scale", "must be finite and nonzero"));
        }
        Ok(KernelSpec { family: KernelFamily::PowerLaw { alpha, scale }, shift: 0 })
    }

    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(PclError::invalid("indicator", format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(KernelSpec { family: KernelFamily::Indicator { lo, hi }, shift: 0 })
    }

    pub fn compact_bump(center: f64, halfwidth: f64) -> Result<Self> {
        if !(center.is_finite() && halfwidth.is_finite() && halfwidth > 0.0) {
            return Err(PclError::invalid("bump", "need finite center and positive halfwidth"));
        }
        Ok(KernelSpec { family: KernelFamily::CompactBump { center, halfwidth }, shift: 0 })
    }

    pub fn with_shift(mut self, u: i64) -> Self {
        self.shift = u;
        self
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    /// ψ(y) for the unshifted kernel.
    #[inline]
    pub fn base(&self, y: f64) -> f64 {
        match self.family {
            KernelFamily::PowerLaw { alpha, scale } => scale * (1.0 + y.abs()).powf(-alpha),
            KernelFamily::Indicator { lo, hi } => {
                if y >= lo && y <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::CompactBump { center, halfwidth } => {
                let r = (y - center) / halfwidth;
                if r.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// ψ_u(x) = ψ(x − u).
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.base(x - self.shift as f64)
    }

    /// Feature points of ψ_u (kinks, jumps, peaks) for quadrature layout.
    pub fn breakpoints(&self) -> Vec<f64> {
        let u = self.shift as f64;
        match self.family {
            KernelFamily::PowerLaw { .. } => vec![u],
            KernelFamily::Indicator { lo, hi } => vec![u + lo, u + hi],
            KernelFamily::CompactBump { center, halfwidth } => {
                vec![u + center - halfwidth, u + center, u + center + halfwidth]
            }
        }
    }

    /// Support of the unshifted kernel, if bounded.
    pub fn base_support(&self) -> Option<(f64, f64)> {
        match self.family {
            KernelFamily::PowerLaw { .. } => None,
            KernelFamily::Indicator { lo, hi } => Some((lo, hi)),
            KernelFamily::CompactBump { center, halfwidth } => Some((center - halfwidth, center + halfwidth)),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.family {
            KernelFamily::PowerLaw { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// Smallest and largest value taken by ψ.
    pub fn value_range(&self) -> (f64, f64) {
        match self.family {
            KernelFamily::PowerLaw { scale, .. } => (scale.min(0.0), scale.max(0.0)),
            _ => (0.0, 1.0),
        }
    }

    /// ∫_a^b ψ_u(x)^k dx, in closed form where one exists.
    pub fn power_integral(&self, k: u32, a: f64, b: f64) -> Result<f64> {
        if k == 0 {
            return Err(PclError::invalid("k", "power must be at least 1"));
        }
        if !(a <= b) {
            return Err(PclError::invalid("bounds", format!("need a <= b, got [{a}, {b}]")));
        }
        let u = self.shift as f64;
        let (a, b) = (a - u, b - u);
        match self.family {
            KernelFamily::PowerLaw { alpha, scale } => {
                let beta = alpha * k as f64;
                Ok(scale.powi(k as i32) * power_law_mass(beta, a, b)?)
            }
            KernelFamily::Indicator { lo, hi } => Ok((b.min(hi) - a.max(lo)).max(0.0)),
            KernelFamily::CompactBump { center, halfwidth } => {
                let lo = a.max(center - halfwidth);
                let hi = b.min(center + halfwidth);
                if lo >= hi {
                    return Ok(0.0);
                }
                let base = self.with_shift(0);
                integrate_with(
                    |y| base.base(y).powi(k as i32),
                    Window::new(lo, hi)?,
                    &[center],
                    &QuadratureSpec { tolerance: 1e-14, ..Default::default() },
                )
            }
        }
    }

    /// ∫_W ψ_u.
    pub fn windowed_integral(&self, window: Window) -> Result<f64> {
        self.power_integral(1, window.lo(), window.hi())
    }

    /// ∫ψ² over ℝ.
    pub fn l2_norm_sq(&self) -> Result<f64> {
        self.power_integral(2, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Distance beyond which ψ² carries at most `fraction` of its mass.
    pub fn tail_margin(&self, fraction: f64) -> Result<(f64, f64)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(PclError::invalid("tail_fraction", "must lie in (0, 1)"));
        }
        match self.family {
            KernelFamily::PowerLaw { alpha, .. } => {
                let l = fraction.powf(-1.0 / (2.0 * alpha - 1.0)) - 1.0;
                if l > 1e7 {
                    return Err(PclError::Guard(format!(
                        "window margin {l:.3e} needed for tail fraction {fraction:e} at alpha = {alpha} exceeds the 1e7 cap"
                    )));
                }
                Ok((-l, l))
            }
            _ => {
                let (lo, hi) = self.base_support().unwrap();
                Ok((lo, hi))
            }
        }
    }
}

fn check_exponent(name: &'static str, a: f64) -> Result<()> {
    if !a.is_finite() || a <= 0.5 {
        return Err(PclError::invalid(name, format!("must exceed 1/2, got {a}")));
    }
    if a == 1.0 {
        return Err(PclError::invalid(name, "the value 1 is excluded (logarithmic case)"));
    }
    Ok(())
}

/// ∫_a^b (1+|y|)^{-beta} dy.
fn power_law_mass(beta: f64, a: f64, b: f64) -> Result<f64> {
    // 0 <= a <= b, possibly b = ∞
    fn half(beta: f64, a: f64, b: f64) -> Result<f64> {
        if a >= b {
            return Ok(0.0);
        }
        if (beta - 1.0).abs() < 1e-14 {
            if b.is_infinite() {
                return Err(PclError::Guard("integral of (1+|y|)^{-1} over a half line diverges".into()));
            }
            return Ok(((1.0 + b) / (1.0 + a)).ln());
        }
        if b.is_infinite() {
            if beta < 1.0 {
                return Err(PclError::Guard(format!("integral of (1+|y|)^{{-{beta}}} over a half line diverges")));
            }
            return Ok((1.0 + a).powf(1.0 - beta) / (beta - 1.0));
        }
        Ok(((1.0 + a).powf(1.0 - beta) - (1.0 + b).powf(1.0 - beta)) / (beta - 1.0))
    }
    if a >= 0.0 {
        half(beta, a, b)
    } else if b <= 0.0 {
        half(beta, -b, -a)
    } else {
        Ok(half(beta, 0.0, -a)? + half(beta, 0.0, b)?)
    }
}

pub fn eval_kernel(spec: &KernelSpec, x: f64) -> f64 {
    spec.eval(x)
}

/// Ψ_{β,u}(x) = (1+|x−u|)^{-β}.
pub fn envelope(beta: f64, u: i64, x: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PclError::invalid("beta", format!("must be positive, got {beta}")));
    }
    Ok((1.0 + (x - u as f64).abs()).powf(-beta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    Linf,
}

/// ‖Ψ_{γ,i}Ψ_{γ,j}‖ in L1 or L∞.
pub fn envelope_inner(gamma: f64, i: i64, j: i64, norm: Norm) -> Result<f64> {
    check_exponent("gamma", gamma)?;
    let f = |x: f64| (1.0 + (x - i as f64).abs()).powf(-gamma) * (1.0 + (x - j as f64).abs()).powf(-gamma);
    match norm {
        // the product is maximal at one of the two centres
        Norm::Linf => Ok(f(i as f64).max(f(j as f64))),
        Norm::L1 if i == j => Ok(2.0 / (2.0 * gamma - 1.0)),
        Norm::L1 => integrate_with(f, Window::whole_line(), &[i as f64, j as f64], &QuadratureSpec::default()),
    }
}

/// Minimal integer strictly larger than 1/(2α−1).
pub fn d_alpha(alpha: f64) -> Result<usize> {
    if !alpha.is_finite() || alpha <= 0.5 {
        return Err(PclError::invalid("alpha", format!("must exceed 1/2, got {alpha}")));
    }
    Ok((1.0 / (2.0 * alpha - 1.0)).floor() as usize + 1)
}

/// Finite window covering shifts `0..n_shifts` with ψ² tail mass below `fraction`.
pub fn covering_window(spec: &KernelSpec, n_shifts: usize, fraction: f64) -> Result<Window> {
    if n_shifts == 0 {
        return Err(PclError::invalid("n", "need at least one shift"));
    }
    let (l, r) = spec.with_shift(0).tail_margin(fraction)?;
    Window::new(l, (n_shifts - 1) as f64 + r)
}
