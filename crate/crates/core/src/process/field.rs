//! Fast evaluation of Σ_x F(ψ(x − u)) for every shift u = 0..n from one
//! configuration.
//!
//! Points within `near` unit bins of u are handled exactly by the caller.
//! The far field of a power-law kernel is smooth, so each far bin is
//! summarised by its Taylor moments Σ δ^m about the bin centre and the sum
//! over bins becomes a correlation with tabulated derivatives of F∘ψ,
//! evaluated with one FFT per moment pair.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::PointConfiguration;
use crate::error::{PclError, Result};
use crate::kernels::{KernelFamily, KernelSpec, Window};

/// Default number of bins treated exactly on each side of a shift.
pub const DEFAULT_NEAR: i64 = 8;
/// Default Taylor order of the far-field bin moments.
pub const DEFAULT_ORDER: usize = 10;

const MEMORY_CAP_BYTES: usize = 1 << 29;

struct FarPlan {
    j0: i64,
    nbins: usize,
    len: usize,
    order: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    // spectra[f][m]
    spectra: Vec<Vec<Vec<Complex64>>>,
}

/// Shift-sum engine for one kernel, window and shift count.
pub struct ShiftSummer {
    spec: KernelSpec,
    window: Window,
    n: usize,
    near: i64,
    far: Option<FarPlan>,
    functions: usize,
}

fn smooth_len(min: usize) -> usize {
    let mut best = min.next_power_of_two();
    let mut a = 1usize;
    while a < best {
        let mut b = a;
        while b < best {
            let mut c = b;
            while c < best {
                if c >= min {
                    best = c;
                }
                c *= 5;
            }
            b *= 3;
        }
        a *= 2;
    }
    best
}

impl ShiftSummer {
    /// `far_functions[f]` holds Taylor coefficients (a_1, a_2, …) of
    /// F_f(v) = Σ_k a_k v^k; the far field of each is returned by
    /// [`ShiftSummer::far_sums`].
    pub fn new(spec: &KernelSpec, window: Window, n: usize, far_functions: &[Vec<f64>]) -> Result<Self> {
        Self::with_params(spec, window, n, far_functions, DEFAULT_NEAR, DEFAULT_ORDER)
    }

    pub fn with_params(
        spec: &KernelSpec,
        window: Window,
        n: usize,
        far_functions: &[Vec<f64>],
        near: i64,
        order: usize,
    ) -> Result<Self> {
        if window.is_infinite() {
            return Err(PclError::invalid("window", "shift sums need a finite window"));
        }
        if n == 0 {
            return Err(PclError::invalid("n", "need at least one shift"));
        }
        if near < 1 {
            return Err(PclError::invalid("near", "must be at least 1"));
        }
        let spec = spec.with_shift(0);
        let (near, far) = match spec.family() {
            KernelFamily::PowerLaw { alpha, scale } => {
                let plan = FarPlan::new(alpha, scale, window, n, near, order, far_functions)?;
                (near, Some(plan))
            }
            _ => {
                let (lo, hi) = spec.base_support().unwrap();
                let reach = lo.abs().max(hi.abs()).ceil() as i64 + 1;
                (near.max(reach), None)
            }
        };
        Ok(ShiftSummer { spec, window, n, near, far, functions: far_functions.len() })
    }

    pub fn near(&self) -> i64 {
        self.near
    }

    pub fn shifts(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Index ranges of the points handled exactly for each shift.
    pub fn near_ranges(&self, config: &PointConfiguration) -> Vec<(usize, usize)> {
        let pts = config.points();
        let mut out = Vec::with_capacity(self.n);
        let (mut a, mut b) = (0usize, 0usize);
        for u in 0..self.n as i64 {
            let lo = (u - self.near) as f64;
            let hi = (u + self.near + 1) as f64;
            while a < pts.len() && pts[a] < lo {
                a += 1;
            }
            if b < a {
                b = a;
            }
            while b < pts.len() && pts[b] < hi {
                b += 1;
            }
            out.push((a, b));
        }
        out
    }

    /// Far-field sums, indexed `[function][u]`. Compact kernels have no far field.
    pub fn far_sums(&self, config: &PointConfiguration) -> Vec<Vec<f64>> {
        match &self.far {
            None => vec![vec![0.0; self.n]; self.functions],
            Some(plan) => plan.apply(config, self.n),
        }
    }

    /// Σ_x F(ψ(x−u)) for each u given the near-field evaluator of F and the
    /// far-field table of the same function.
    pub fn total<F: Fn(f64) -> f64>(
        &self,
        config: &PointConfiguration,
        ranges: &[(usize, usize)],
        far: &[f64],
        f: F,
    ) -> Vec<f64> {
        let pts = config.points();
        ranges
            .iter()
            .enumerate()
            .map(|(u, &(a, b))| {
                let uf = u as f64;
                let near: f64 = pts[a..b].iter().map(|&x| f(self.spec.base(x - uf))).sum();
                near + far[u]
            })
            .collect()
    }
}

impl FarPlan {
    fn new(
        alpha: f64,
        scale: f64,
        window: Window,
        n: usize,
        near: i64,
        order: usize,
        functions: &[Vec<f64>],
    ) -> Result<Self> {
        let j0 = window.lo().floor() as i64;
        let j1 = window.hi().floor() as i64;
        let nbins = (j1 - j0 + 1) as usize;
        let klen = nbins + n - 1;
        let len = smooth_len(nbins + n);
        let bytes = functions.len() * (order + 1) * len * 16;
        if bytes > MEMORY_CAP_BYTES {
            return Err(PclError::Guard(format!(
                "far-field tables need {} MiB (cap {} MiB); reduce n or the number of far functions",
                bytes >> 20,
                MEMORY_CAP_BYTES >> 20
            )));
        }
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let r_min = j0 - (n as i64 - 1);
        let mut spectra = Vec::with_capacity(functions.len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); len];
        for coeffs in functions {
            let mut per_m = Vec::with_capacity(order + 1);
            for m in 0..=order {
                scratch.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                for s in 0..klen {
                    let r = r_min + s as i64;
                    if r.abs() <= near {
                        continue;
                    }
                    scratch[s].re = derivative_coefficient(coeffs, alpha, scale, r as f64 + 0.5, m);
                }
                fwd.process(&mut scratch);
                per_m.push(scratch.clone());
            }
            spectra.push(per_m);
        }
        Ok(FarPlan { j0, nbins, len, order, fwd, inv, spectra })
    }

    fn apply(&self, config: &PointConfiguration, n: usize) -> Vec<Vec<f64>> {
        let p = self.order + 1;
        let mut moments = vec![vec![0.0f64; self.nbins]; p];
        for &x in config.points() {
            let j = x.floor() as i64;
            let idx = (j - self.j0) as usize;
            let delta = x - j as f64 - 0.5;
            let mut pw = 1.0;
            for row in moments.iter_mut() {
                row[idx] += pw;
                pw *= delta;
            }
        }
        // forward transforms, two real moments per complex FFT
        let mut spec_m: Vec<Vec<Complex64>> = Vec::with_capacity(p);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        let mut m = 0;
        while m < p {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (i, v) in moments[m].iter().enumerate() {
                buf[i].re = *v;
            }
            if m + 1 < p {
                for (i, v) in moments[m + 1].iter().enumerate() {
                    buf[i].im = *v;
                }
            }
            self.fwd.process(&mut buf);
            let l = self.len;
            let mut a = vec![Complex64::new(0.0, 0.0); l];
            let mut b = vec![Complex64::new(0.0, 0.0); l];
            for k in 0..l {
                let z = buf[k];
                let zc = buf[(l - k) % l].conj();
                a[k] = (z + zc) * 0.5;
                b[k] = (z - zc) * Complex64::new(0.0, -0.5);
            }
            spec_m.push(a);
            if m + 1 < p {
                spec_m.push(b);
            }
            m += 2;
        }
        let scale = 1.0 / self.len as f64;
        let mut out = Vec::with_capacity(self.spectra.len());
        let mut f = 0;
        while f < self.spectra.len() {
            let pair = f + 1 < self.spectra.len();
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for mm in 0..p {
                let a = &spec_m[mm];
                let k1 = &self.spectra[f][mm];
                if pair {
                    let k2 = &self.spectra[f + 1][mm];
                    for k in 0..self.len {
                        let ac = a[k].conj();
                        buf[k] += ac * k1[k] + Complex64::new(0.0, 1.0) * (ac * k2[k]);
                    }
                } else {
                    for k in 0..self.len {
                        buf[k] += a[k].conj() * k1[k];
                    }
                }
            }
            self.inv.process(&mut buf);
            let first: Vec<f64> = (0..n).map(|u| buf[n - 1 - u].re * scale).collect();
            out.push(first);
            if pair {
                let second: Vec<f64> = (0..n).map(|u| buf[n - 1 - u].im * scale).collect();
                out.push(second);
            }
            f += 2;
        }
        out
    }
}

/// (1/m!) d^m/dy^m Σ_k a_k (scale (1+|y|)^{-α})^k at y (|y| ≥ 1).
fn derivative_coefficient(coeffs: &[f64], alpha: f64, scale: f64, y: f64, m: usize) -> f64 {
    let ay = 1.0 + y.abs();
    let sign = if y > 0.0 && m % 2 == 1 { -1.0 } else { 1.0 };
    let mut total = 0.0;
    let mut sk = 1.0;
    for (k, a) in coeffs.iter().enumerate() {
        sk *= scale;
        if *a == 0.0 {
            continue;
        }
        let beta = alpha * (k + 1) as f64;
        // rising factorial (β)_m / m!
        let mut c = 1.0;
        for i in 0..m {
            c *= (beta + i as f64) / (i + 1) as f64;
        }
        total += a * sk * c * ay.powf(-beta - m as f64);
    }
    sign * total
}

/// Direct O(N·n) reference for Σ_x F(ψ(x−u)).
pub fn direct_sums<F: Fn(f64) -> f64>(config: &PointConfiguration, spec: &KernelSpec, n: usize, f: F) -> Vec<f64> {
    let base = spec.with_shift(0);
    (0..n)
        .map(|u| config.points().iter().map(|&x| f(base.base(x - u as f64))).sum())
        .collect()
}
