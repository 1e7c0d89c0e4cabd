//! Per-shift terms of the μ² series on θ-grid tables.
//!
//! For each shift u the pair integrals G_u(θ_a,θ_b) are a matrix product of
//! (e^{iθ_aψ₀} − 1) and w·(e^{iθ_bψ_u} − 1) over a fixed node set. The fused
//! joint log-characteristic function is summed directly on nodes where the
//! phase is large and through mixed power moments Σ w ψ₀^m ψ_u^n elsewhere.

use num_complex::Complex64;

use super::{exp_tail, polynomial_chaos_covariance};
use crate::chaos::{expm1_i, factorial, kappa_i, log_char_fn, NonlinearitySpec, ThetaGrid};
use crate::error::{PclError, Result};
use crate::kernels::{KernelSpec, NodeSet, QuadratureSpec, Window};

/// Phase below which the fused integrand uses its power series.
const SMALL_PHASE: f64 = 0.25;
/// Series length for phases below `SMALL_PHASE`.
const SERIES_TERMS: usize = 18;

/// Contribution of shift u (and of −u when `multiplicity` is 2).
#[derive(Clone, Copy, Debug)]
pub struct ShiftContribution {
    pub shift: i64,
    pub multiplicity: u32,
    /// cf(θ₁)cf(θ₂)(e^G − Σ_{k<d}G^k/k!) paired with φ̂⊗φ̂.
    pub chaos: Complex64,
    /// Joint characteristic function minus the low chaoses, paired with φ̂⊗φ̂.
    pub covariance: Complex64,
}

struct Grid {
    theta: Vec<f64>,
    /// trapezoid weight times φ̂(θ)
    weight: Vec<f64>,
}

impl Grid {
    fn new(phi: &NonlinearitySpec, grid: Option<ThetaGrid>) -> Result<Self> {
        let grid = grid.or_else(|| phi.theta_grid()).ok_or_else(|| PclError::invalid("phi", "no Fourier transform"))?;
        grid.validate()?;
        let mut theta = Vec::new();
        let mut weight = Vec::new();
        for (t, w) in grid.nodes() {
            theta.push(t);
            weight.push(w * phi.fourier(t).unwrap_or(0.0));
        }
        Ok(Grid { theta, weight })
    }

    fn len(&self) -> usize {
        self.theta.len()
    }

    fn max_abs(&self) -> f64 {
        self.theta.iter().fold(0.0f64, |m, t| m.max(t.abs()))
    }
}

fn cf_row(grid: &Grid, spec: &KernelSpec, window: Window) -> Result<Vec<Complex64>> {
    let quad = QuadratureSpec::default();
    grid.theta.iter().map(|&t| Ok(log_char_fn(t, spec, window, &quad)?.exp())).collect()
}

/// Terms for every shift with |u| ≤ cutoff. On ℝ the u and −u terms agree by
/// stationarity, so only u ≥ 0 is computed.
pub fn shift_contributions(
    phi: &NonlinearitySpec,
    d: usize,
    spec: &KernelSpec,
    window: Window,
    cutoff: usize,
    grid: Option<ThetaGrid>,
) -> Result<Vec<ShiftContribution>> {
    let symmetric = window.is_infinite();
    let shifts: Vec<(i64, u32)> = if symmetric {
        (0..=cutoff as i64).map(|u| (u, if u == 0 { 1 } else { 2 })).collect()
    } else {
        (-(cutoff as i64)..=cutoff as i64).map(|u| (u, 1)).collect()
    };
    if let Some(c) = phi.poly_coeffs() {
        return shifts
            .into_iter()
            .map(|(u, m)| {
                let (ch, cov) = polynomial_chaos_covariance(c, d, spec, window, u)?;
                Ok(ShiftContribution { shift: u, multiplicity: m, chaos: ch.into(), covariance: cov.into() })
            })
            .collect();
    }
    let g = Grid::new(phi, grid)?;
    let base = spec.with_shift(0);
    let cf0 = cf_row(&g, &base, window)?;
    let mut out = Vec::with_capacity(shifts.len());
    for (u, m) in shifts {
        let cfu = if symmetric { cf0.clone() } else { cf_row(&g, &spec.with_shift(u), window)? };
        let (chaos, covariance) = fourier_shift(&g, &cf0, &cfu, d, spec, window, u)?;
        out.push(ShiftContribution { shift: u, multiplicity: m, chaos, covariance });
    }
    Ok(out)
}

/// Terms for a single shift.
pub(crate) fn single_shift(
    phi: &NonlinearitySpec,
    d: usize,
    spec: &KernelSpec,
    window: Window,
    u: i64,
    grid: Option<ThetaGrid>,
) -> Result<ShiftContribution> {
    if let Some(c) = phi.poly_coeffs() {
        let (ch, cov) = polynomial_chaos_covariance(c, d, spec, window, u)?;
        return Ok(ShiftContribution { shift: u, multiplicity: 1, chaos: ch.into(), covariance: cov.into() });
    }
    let g = Grid::new(phi, grid)?;
    let cf0 = cf_row(&g, &spec.with_shift(0), window)?;
    let cfu = cf_row(&g, &spec.with_shift(u), window)?;
    let (chaos, covariance) = fourier_shift(&g, &cf0, &cfu, d, spec, window, u)?;
    Ok(ShiftContribution { shift: u, multiplicity: 1, chaos, covariance })
}

/// Integration window for the pair (ψ₀, ψ_u): the window itself for
/// power laws, and the window cut to the union of the supports otherwise.
fn pair_window(spec: &KernelSpec, window: Window, u: i64) -> Result<Option<Window>> {
    match spec.base_support() {
        None => Ok(Some(window)),
        Some((lo, hi)) => {
            let a = lo.min(lo + u as f64).max(window.lo());
            let b = hi.max(hi + u as f64).min(window.hi());
            if a < b {
                Ok(Some(Window::new(a, b)?))
            } else {
                Ok(None)
            }
        }
    }
}

fn fourier_shift(
    g: &Grid,
    cf0: &[Complex64],
    cfu: &[Complex64],
    d: usize,
    spec: &KernelSpec,
    window: Window,
    u: i64,
) -> Result<(Complex64, Complex64)> {
    let zero = Complex64::new(0.0, 0.0);
    let k0 = spec.with_shift(0);
    let ku = spec.with_shift(u);
    let na = g.len();
    let Some(win) = pair_window(spec, window, u)? else {
        // neither kernel reaches the window: both variables vanish
        return Ok((zero, zero));
    };
    let mut bp = k0.breakpoints();
    bp.extend(ku.breakpoints());
    let decay = spec.alpha().map_or(2.0, |a| 2.0 * a);
    let nodes = NodeSet::build(win, &bp, &QuadratureSpec::default(), decay)?;
    let p0: Vec<f64> = nodes.x.iter().map(|&x| k0.eval(x)).collect();
    let pu: Vec<f64> = nodes.x.iter().map(|&x| ku.eval(x)).collect();
    let tmax = g.max_abs();

    // rows for θ_a ≥ 0; the rest follow from conjugate symmetry of the grid
    let mid = na / 2;
    let rows: Vec<usize> = (mid..na).collect();
    let nn = nodes.len();
    let mut a_tab = vec![zero; rows.len() * nn];
    for (r, &a) in rows.iter().enumerate() {
        for j in 0..nn {
            a_tab[r * nn + j] = expm1_i(g.theta[a] * p0[j]);
        }
    }
    let mut b_tab = vec![zero; na * nn];
    for b in 0..na {
        for j in 0..nn {
            b_tab[b * nn + j] = expm1_i(g.theta[b] * pu[j]) * nodes.w[j];
        }
    }
    let big: Vec<usize> = (0..nn).filter(|&j| tmax * (p0[j] + pu[j]) >= SMALL_PHASE).collect();
    // Σ w ψ₀^m ψ_u^n over the small-phase nodes
    let mut moments = [[0.0f64; SERIES_TERMS + 1]; SERIES_TERMS + 1];
    for j in 0..nn {
        if tmax * (p0[j] + pu[j]) >= SMALL_PHASE {
            continue;
        }
        let mut pm = nodes.w[j];
        for row in moments.iter_mut() {
            let mut v = pm;
            for cell in row.iter_mut() {
                *cell += v;
                v *= pu[j];
            }
            pm *= p0[j];
        }
    }
    let mut gt = vec![zero; na * na];
    let mut jt = vec![zero; na * na];
    for (r, &a) in rows.iter().enumerate() {
        let arow = &a_tab[r * nn..(r + 1) * nn];
        for b in 0..na {
            let brow = &b_tab[b * nn..(b + 1) * nn];
            let mut acc = zero;
            for j in 0..nn {
                acc += arow[j] * brow[j];
            }
            gt[a * na + b] = acc;
            let (t1, t2) = (g.theta[a], g.theta[b]);
            let mut jv = zero;
            for &j in &big {
                jv += kappa_i(t1 * p0[j] + t2 * pu[j]) * nodes.w[j];
            }
            jv += fused_series(t1, t2, &moments);
            jt[a * na + b] = jv;
        }
    }
    for a in 0..mid {
        for b in 0..na {
            gt[a * na + b] = gt[(na - 1 - a) * na + (na - 1 - b)].conj();
            jt[a * na + b] = jt[(na - 1 - a) * na + (na - 1 - b)].conj();
        }
    }

    let mut chaos = zero;
    let mut cov = zero;
    for a in 0..na {
        for b in 0..na {
            let w = g.weight[a] * g.weight[b];
            if w == 0.0 {
                continue;
            }
            let gv = gt[a * na + b];
            let cc = cf0[a] * cfu[b];
            chaos += cc * exp_tail(gv, d) * w;
            // low chaoses Σ_{k<d} G^k/k!
            let mut low = zero;
            let mut term = Complex64::new(1.0, 0.0);
            for k in 0..d {
                if k > 0 {
                    term = term * gv / k as f64;
                }
                low += term;
            }
            cov += (jt[a * na + b].exp() - cc * low) * w;
        }
    }
    if !(chaos.re.is_finite() && cov.re.is_finite()) {
        return Err(PclError::NonFinite { context: "mu^2 shift term", x: u as f64, value: chaos.re });
    }
    Ok((chaos, cov))
}

/// Σ_{k≥2} i^k/k! Σ_m C(k,m) θ₁^m θ₂^{k−m} M[m][k−m].
fn fused_series(t1: f64, t2: f64, m: &[[f64; SERIES_TERMS + 1]; SERIES_TERMS + 1]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let ik = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)];
    for k in 2..=SERIES_TERMS {
        let mut s = 0.0;
        let mut binom = 1.0;
        for j in 0..=k {
            if j > 0 {
                binom = binom * (k - j + 1) as f64 / j as f64;
            }
            s += binom * t1.powi(j as i32) * t2.powi((k - j) as i32) * m[j][k - j];
        }
        acc += ik[k % 4] * (s / factorial(k));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{cov_truncated_exponential, joint_char_fn, CovarianceQuery};

    #[test]
    fn fused_series_matches_direct_kappa() {
        // one node of unit weight at (ψ₀, ψ_u) = (0.01, 0.013)
        let (a, b) = (0.01f64, 0.013f64);
        let mut m = [[0.0; SERIES_TERMS + 1]; SERIES_TERMS + 1];
        for i in 0..=SERIES_TERMS {
            for j in 0..=SERIES_TERMS {
                m[i][j] = a.powi(i as i32) * b.powi(j as i32);
            }
        }
        for &(t1, t2) in &[(6.0, -6.0), (1.5, 2.25), (-3.0, 0.5)] {
            let v = fused_series(t1, t2, &m);
            let e = kappa_i(t1 * a + t2 * b);
            assert!((v - e).norm() < 1e-17, "{v} {e}");
        }
    }

    #[test]
    fn single_pair_agrees_with_adaptive_routes() {
        // a one-point grid reduces the table sums to a single covariance
        let spec = KernelSpec::power_law(2.0, 1.0).unwrap();
        let phi = NonlinearitySpec::gaussian_bump();
        let grid = ThetaGrid { half_width: 1.5, step: 1.5 };
        let g = Grid::new(&phi, Some(grid)).unwrap();
        let w = Window::whole_line();
        let cf = cf_row(&g, &spec, w).unwrap();
        for d in 0..3 {
            let (ch, cov) = fourier_shift(&g, &cf, &cf, d, &spec, w, 3).unwrap();
            let mut expect = Complex64::new(0.0, 0.0);
            for a in 0..3 {
                for b in 0..3 {
                    let q = CovarianceQuery { theta1: g.theta[a], theta2: g.theta[b], shift: 3, d, spec, window: w };
                    expect += cov_truncated_exponential(&q).unwrap() * g.weight[a] * g.weight[b];
                }
            }
            assert!((ch - expect).norm() < 1e-11, "{d}: {ch} vs {expect}");
            assert!((cov - expect).norm() < 1e-11, "{d}: {cov} vs {expect}");
        }
        let jc = joint_char_fn(1.5, -1.5, 3, &spec, w).unwrap();
        assert!(jc.norm() > 0.0);
    }
}
