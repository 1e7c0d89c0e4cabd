//! Numeric ratio check of the L^p spectral-gap inequality
//! ‖F‖_p ≤ C (|EF| + ‖‖D_xF‖_p‖_{L²(dx)} + ‖‖D_xF‖_p‖_{L^p(dx)}).
//!
//! For the three families used here D_xF has a deterministic modulus, so
//! the Ω-norm of D_xF is exact and only ‖F‖_p needs Monte Carlo.

use num_complex::Complex64;
use serde::Serialize;

use super::run_replications;
use crate::chaos::char_fn;
use crate::error::{PclError, Result};
use crate::kernels::{covering_window, integrate_with, KernelSpec, QuadratureSpec, Window};
use crate::process::{first_chaos, sample_with_rng, stream_rng};

/// ψ² mass left outside the sampling window.
const SG_TAIL_FRACTION: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SgFamily {
    Constant(f64),
    FirstChaos,
    CenteredExponential { theta: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct SgRow {
    pub family: SgFamily,
    pub p: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SgTable {
    pub rows: Vec<SgRow>,
    /// Largest LHS/RHS over all rows.
    pub constant: f64,
    /// max/min ratio over the non-constant rows.
    pub spread: f64,
    pub stable: bool,
}

fn lp_norm(g: impl Fn(f64) -> f64, spec: &KernelSpec, p: f64) -> Result<f64> {
    let v = integrate_with(|x| g(spec.eval(x)).abs().powf(p), Window::whole_line(), &spec.breakpoints(), &QuadratureSpec::default())?;
    Ok(v.powf(1.0 / p))
}

/// Ratio table over the constant, I₁(ψ) and e^{iθX₀} − cf(θ) families.
pub fn sg_check(spec: &KernelSpec, thetas: &[f64], ps: &[f64], samples: usize, seed: u64) -> Result<SgTable> {
    if let Some(p) = ps.iter().find(|p| !(**p >= 2.0)) {
        return Err(PclError::invalid("p", format!("need p >= 2, got {p}")));
    }
    if samples < 2 {
        return Err(PclError::invalid("samples", "need at least two samples"));
    }
    let spec = spec.with_shift(0);
    let window = covering_window(&spec, 1, SG_TAIL_FRACTION)?;
    let xs: Vec<f64> = run_replications(samples, |r| {
        let mut rng = stream_rng(seed, r);
        first_chaos(&sample_with_rng(window, &mut rng)?, &spec)
    })?;
    let moment = |vals: &[f64], p: f64| -> (f64, f64) {
        let n = vals.len() as f64;
        let a: Vec<f64> = vals.iter().map(|v| v.powf(p)).collect();
        let m = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        // delta method for m^{1/p}
        (m.powf(1.0 / p), m.powf(1.0 / p - 1.0) * se / p)
    };
    let mut rows = Vec::new();
    for &p in ps {
        let c = 1.0;
        rows.push(SgRow { family: SgFamily::Constant(c), p, lhs: c, lhs_se: 0.0, rhs: c, ratio: 1.0 });

        let abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        let (lhs, se) = moment(&abs, p);
        let rhs = lp_norm(|v| v, &spec, 2.0)? + lp_norm(|v| v, &spec, p)?;
        rows.push(SgRow { family: SgFamily::FirstChaos, p, lhs, lhs_se: se, rhs, ratio: lhs / rhs });

        for &theta in thetas {
            let cf = char_fn(theta, &spec, window)?;
            let abs: Vec<f64> = xs.iter().map(|x| (Complex64::new(0.0, theta * x).exp() - cf).norm()).collect();
            let (lhs, se) = moment(&abs, p);
            // |D_xF| = |e^{iθψ(x)} − 1| = 2|sin(θψ(x)/2)|
            let g = |v: f64| 2.0 * (0.5 * theta * v).sin();
            let rhs = lp_norm(g, &spec, 2.0)? + lp_norm(g, &spec, p)?;
            rows.push(SgRow { family: SgFamily::CenteredExponential { theta }, p, lhs, lhs_se: se, rhs, ratio: lhs / rhs });
        }
    }
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let varying: Vec<f64> =
        rows.iter().filter(|r| !matches!(r.family, SgFamily::Constant(_))).map(|r| r.ratio).collect();
    let spread = varying.iter().cloned().fold(0.0, f64::max) / varying.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SgTable { rows, constant, spread, stable: spread <= 3.0 })
}
