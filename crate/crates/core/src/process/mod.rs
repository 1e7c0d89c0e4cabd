//! Poisson configurations on a window, compensated sums and the difference operator.

pub mod field;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{PclError, Result};
use crate::kernels::{KernelSpec, Window};

/// Largest order accepted by [`apply_difference`].
pub const MAX_DIFFERENCE_ORDER: usize = 8;

/// A simple point configuration: strictly ascending points inside a window.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConfiguration {
    window: Window,
    points: Vec<f64>,
}

impl PointConfiguration {
    /// Builds a configuration from arbitrary-order points. Duplicates and
    /// points outside the window are rejected.
    pub fn new(window: Window, mut points: Vec<f64>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !window.contains(**p)) {
            return Err(PclError::invalid("points", format!("{p} lies outside [{}, {}]", window.lo(), window.hi())));
        }
        points.sort_by(f64::total_cmp);
        if let Some(w) = points.windows(2).find(|w| w[0] == w[1]) {
            return Err(PclError::DuplicatePoint(w[0]));
        }
        Ok(PointConfiguration { window, points })
    }

    pub fn empty(window: Window) -> Self {
        PointConfiguration { window, points: Vec::new() }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A new configuration with `extra` added. Extra points may lie outside
    /// the window; they are kept, since the difference operator is defined
    /// pointwise.
    pub fn with_points(&self, extra: &[f64]) -> Result<Self> {
        let mut pts = Vec::with_capacity(self.points.len() + extra.len());
        pts.extend_from_slice(&self.points);
        for &x in extra {
            if !x.is_finite() {
                return Err(PclError::invalid("xs", "insertion points must be finite"));
            }
            pts.push(x);
        }
        pts.sort_by(f64::total_cmp);
        if let Some(w) = pts.windows(2).find(|w| w[0] == w[1]) {
            return Err(PclError::DuplicatePoint(w[0]));
        }
        Ok(PointConfiguration { window: self.window, points: pts })
    }
}

/// Random stream `stream` of the family keyed by `master`. Streams are
/// independent ChaCha sequences, so replications can run in any order.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Poisson configuration with Lebesgue intensity on a finite window.
pub fn sample_with_rng<R: Rng + ?Sized>(window: Window, rng: &mut R) -> Result<PointConfiguration> {
    if window.is_infinite() {
        return Err(PclError::invalid("window", "sampling needs a finite window"));
    }
    let mean = window.len();
    let n = if mean > 0.0 {
        let pois = Poisson::new(mean).map_err(|e| PclError::invalid("window", e.to_string()))?;
        pois.sample(rng) as usize
    } else {
        0
    };
    let (lo, len) = (window.lo(), window.len());
    let mut points: Vec<f64> = (0..n).map(|_| lo + len * rng.random::<f64>()).collect();
    points.sort_unstable_by(f64::total_cmp);
    for i in 1..points.len() {
        if points[i] <= points[i - 1] {
            points[i] = points[i - 1].next_up();
        }
    }
    if let Some(last) = points.last_mut() {
        if *last > window.hi() {
            *last = window.hi();
        }
    }
    Ok(PointConfiguration { window, points })
}

pub fn sample_configuration(window: Window, seed: u64) -> Result<PointConfiguration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(window, &mut rng)
}

/// X_u = Σ ψ_u(x) − ∫_W ψ_u on the configuration's window.
pub fn first_chaos(config: &PointConfiguration, spec: &KernelSpec) -> Result<f64> {
    let comp = spec.windowed_integral(config.window())?;
    Ok(compensated_sum(config, spec, comp))
}

/// Σ ψ_u(x) − `compensator`, summing only over window points.
pub fn compensated_sum(config: &PointConfiguration, spec: &KernelSpec, compensator: f64) -> f64 {
    let w = config.window();
    let s: f64 = config.points().iter().filter(|x| w.contains(**x)).map(|&x| spec.eval(x)).sum();
    s - compensator
}

/// D^n_{x⃗}F by inclusion–exclusion over the 2ⁿ subsets of `xs`.
pub fn apply_difference<F>(f: F, config: &PointConfiguration, xs: &[f64]) -> Result<Complex64>
where
    F: Fn(&PointConfiguration) -> Complex64,
{
    let n = xs.len();
    if n == 0 {
        return Err(PclError::invalid("xs", "need at least one insertion point"));
    }
    if n > MAX_DIFFERENCE_ORDER {
        return Err(PclError::invalid("xs", format!("order {n} exceeds the cap {MAX_DIFFERENCE_ORDER}")));
    }
    // collisions are checked once on the full set
    config.with_points(xs)?;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut subset = Vec::with_capacity(n);
    for mask in 0u32..(1u32 << n) {
        subset.clear();
        subset.extend((0..n).filter(|j| mask & (1 << j) != 0).map(|j| xs[j]));
        let value = f(&config.with_points(&subset)?);
        if (n - subset.len()) % 2 == 0 {
            acc += value;
        } else {
            acc -= value;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(lo: f64, hi: f64) -> Window {
        Window::new(lo, hi).unwrap()
    }

    #[test]
    fn first_chaos_examples() {
        let ind = KernelSpec::indicator(0.0, 1.0).unwrap();
        let win = w(-2.0, 3.0);
        let c = PointConfiguration::new(win, vec![0.5]).unwrap();
        assert!((first_chaos(&c, &ind).unwrap()).abs() < 1e-15);
        let e = PointConfiguration::empty(win);
        assert!((first_chaos(&e, &ind).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn duplicates_rejected() {
        let win = w(0.0, 1.0);
        assert!(matches!(PointConfiguration::new(win, vec![0.2, 0.2]), Err(PclError::DuplicatePoint(_))));
        let c = PointConfiguration::new(win, vec![0.2, 0.7]).unwrap();
        assert!(c.with_points(&[0.7]).is_err());
        assert!(apply_difference(|_| Complex64::new(1.0, 0.0), &c, &[0.3, 0.3]).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_sorted() {
        let win = w(-5.0, 20.0);
        let a = sample_configuration(win, 7).unwrap();
        let b = sample_configuration(win, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.points().windows(2).all(|p| p[0] < p[1]));
        assert!(a.points().iter().all(|p| win.contains(*p)));
    }

    #[test]
    fn tiny_window_is_mostly_empty() {
        let win = w(0.0, 1e-6);
        let empty = (0..100_000u64).filter(|s| sample_configuration(win, *s).unwrap().is_empty()).count();
        assert!(empty as f64 >= 0.999 * 100_000.0);
    }

    #[test]
    fn mean_count_matches_intensity() {
        let win = w(0.0, 100.0);
        let reps = 10_000u64;
        let total: usize = (0..reps).map(|s| sample_configuration(win, s).unwrap().len()).sum();
        let mean = total as f64 / reps as f64;
        // standard error of the mean count is sqrt(100 / reps)
        assert!((mean - 100.0).abs() < 3.0 * (100.0 / reps as f64).sqrt());
    }

    #[test]
    fn difference_of_constant_and_linear() {
        let ind = KernelSpec::power_law(2.0, 1.0).unwrap().with_shift(2);
        let win = w(-10.0, 10.0);
        let c = sample_configuration(win, 3).unwrap();
        let k = |cfg: &PointConfiguration| Complex64::new(first_chaos(cfg, &ind).unwrap(), 0.0);
        for n in 1..=4usize {
            let xs: Vec<f64> = (0..n).map(|j| 0.123 + j as f64 * 1.37).collect();
            let d = apply_difference(|_| Complex64::new(2.5, -1.0), &c, &xs).unwrap();
            assert!(d.norm() < 1e-15);
            let dx = apply_difference(k, &c, &xs).unwrap();
            let expect = if n == 1 { ind.eval(xs[0]) } else { 0.0 };
            assert!((dx.re - expect).abs() < 1e-12 && dx.im.abs() < 1e-15, "{n}: {dx}");
        }
    }

    #[test]
    fn difference_order_cap() {
        let c = PointConfiguration::empty(w(0.0, 1.0));
        let xs: Vec<f64> = (0..9).map(|j| j as f64 + 0.5).collect();
        assert!(apply_difference(|_| Complex64::new(0.0, 0.0), &c, &xs).is_err());
    }
}
