//! Composite Gauss–Legendre quadrature on graded panels.
//!
//! Panels are unit width within `tail_split` of every breakpoint and grow
//! geometrically (ratio 2) away from them. Infinite ends are walked panel by
//! panel until the contributions decay, after which the remaining tail is
//! summed as a geometric series of panel contributions. For integrands with
//! power-law decay this is exact in the limit, which is what the heavy tails
//! of `(1+|x|)^{-a}` need.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{PclError, Result};

use super::Window;

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
    fn is_finite_value(self) -> bool;
    fn probe(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
    fn probe(self) -> f64 {
        self
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn probe(self) -> f64 {
        if self.re.is_finite() {
            self.im
        } else {
            self.re
        }
    }
}

/// Quadrature controls.
///
/// `panel_count` is the number of Gauss–Legendre nodes per panel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub panel_count: usize,
    pub tolerance: f64,
    pub tail_split: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { panel_count: 10, tolerance: 1e-12, tail_split: 8.0 }
    }
}

impl QuadratureSpec {
    pub fn new(panel_count: usize, tolerance: f64, tail_split: f64) -> Result<Self> {
        let q = QuadratureSpec { panel_count, tolerance, tail_split };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.panel_count < 8 || self.panel_count > 64 {
            return Err(PclError::invalid("panel_count", "must lie in [8, 64]"));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(PclError::invalid("tolerance", "must be positive and finite"));
        }
        if !(self.tail_split >= 1.0) || !self.tail_split.is_finite() {
            return Err(PclError::invalid("tail_split", "must be finite and at least 1"));
        }
        Ok(())
    }
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    fn apply<T: QuadValue>(&self, f: &impl Fn(f64) -> T, a: f64, b: f64, ctx: &'static str) -> Result<T> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::zero();
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            let x = mid + half * t;
            let v = f(x);
            if !v.is_finite_value() {
                return Err(PclError::NonFinite { context: ctx, x, value: v.probe() });
            }
            acc = acc + v * (w * half);
        }
        Ok(acc)
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Finite part of the panel layout plus the starting points of infinite tails.
#[derive(Clone, Debug)]
struct Layout {
    panels: Vec<(f64, f64)>,
    left_tail: Option<f64>,
    right_tail: Option<f64>,
}

fn clean_breakpoints(window: Window, breakpoints: &[f64]) -> Vec<f64> {
    let mut bps: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b >= window.lo() && *b <= window.hi())
        .collect();
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    if bps.is_empty() {
        let c = match (window.lo().is_finite(), window.hi().is_finite()) {
            (true, true) => 0.5 * (window.lo() + window.hi()),
            (true, false) => window.lo(),
            (false, true) => window.hi(),
            (false, false) => 0.0,
        };
        bps.push(c);
    }
    bps
}

fn equal_panels(a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
    if b <= a {
        return;
    }
    let m = (b - a).ceil().max(1.0) as usize;
    let w = (b - a) / m as f64;
    for k in 0..m {
        let lo = a + w * k as f64;
        let hi = if k + 1 == m { b } else { a + w * (k + 1) as f64 };
        out.push((lo, hi));
    }
}

/// Panels growing geometrically from both ends of a gap toward its middle.
fn graded_gap(a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
    let mut left = a;
    let mut right = b;
    let mut w = 1.0;
    let mut tail = Vec::new();
    while right - left > 4.0 * w {
        out.push((left, left + w));
        tail.push((right - w, right));
        left += w;
        right -= w;
        w *= 2.0;
    }
    if right > left {
        let m = 0.5 * (left + right);
        out.push((left, m));
        out.push((m, right));
    }
    tail.reverse();
    out.extend(tail);
}

/// Panels growing geometrically from `edge` outward to a finite `end`.
fn graded_outward(edge: f64, end: f64) -> Vec<(f64, f64)> {
    let dir = if end >= edge { 1.0 } else { -1.0 };
    let total = (end - edge).abs();
    let mut pos = 0.0;
    let mut w = 1.0;
    let mut out = Vec::new();
    while total - pos > 0.0 {
        let step = if total - pos <= 2.0 * w { total - pos } else { w };
        let a = edge + dir * pos;
        let b = if step == total - pos { end } else { edge + dir * (pos + step) };
        out.push(if dir > 0.0 { (a, b) } else { (b, a) });
        pos += step;
        w *= 2.0;
    }
    out
}

fn layout(window: Window, breakpoints: &[f64], split: f64) -> Layout {
    let bps = clean_breakpoints(window, breakpoints);
    let mut zones: Vec<(f64, f64)> = Vec::new();
    for &b in &bps {
        let lo = (b - split).max(window.lo());
        let hi = (b + split).min(window.hi());
        match zones.last_mut() {
            Some(z) if lo <= z.1 => z.1 = z.1.max(hi),
            _ => zones.push((lo, hi)),
        }
    }
    let mut panels = Vec::new();
    for (zi, &(zlo, zhi)) in zones.iter().enumerate() {
        if zi > 0 {
            graded_gap(zones[zi - 1].1, zlo, &mut panels);
        }
        let mut cuts = vec![zlo];
        cuts.extend(bps.iter().copied().filter(|&b| b > zlo && b < zhi));
        cuts.push(zhi);
        for w in cuts.windows(2) {
            equal_panels(w[0], w[1], &mut panels);
        }
    }
    let core_lo = zones.first().unwrap().0;
    let core_hi = zones.last().unwrap().1;
    let mut left_tail = None;
    let mut right_tail = None;
    if window.lo().is_finite() {
        if window.lo() < core_lo {
            let mut left = graded_outward(core_lo, window.lo());
            left.reverse();
            left.extend(panels);
            panels = left;
        }
    } else {
        left_tail = Some(core_lo);
    }
    if window.hi().is_finite() {
        if window.hi() > core_hi {
            panels.extend(graded_outward(core_hi, window.hi()));
        }
    } else {
        right_tail = Some(core_hi);
    }
    Layout { panels, left_tail, right_tail }
}

const MAX_DEPTH: u32 = 60;

fn adapt<T: QuadValue>(
    rule: &GaussLegendre,
    f: &impl Fn(f64) -> T,
    a: f64,
    b: f64,
    whole: T,
    tol: f64,
    depth: u32,
) -> Result<T> {
    let m = 0.5 * (a + b);
    let l = rule.apply(f, a, m, "quadrature")?;
    let r = rule.apply(f, m, b, "quadrature")?;
    let s = l + r;
    let err = (s - whole).magnitude();
    if err <= tol || depth >= MAX_DEPTH || (b - a) <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
        return Ok(s);
    }
    let sub = tol * std::f64::consts::FRAC_1_SQRT_2;
    Ok(adapt(rule, f, a, m, l, sub, depth + 1)? + adapt(rule, f, m, b, r, sub, depth + 1)?)
}

fn panel_integral<T: QuadValue>(rule: &GaussLegendre, f: &impl Fn(f64) -> T, a: f64, b: f64, tol: f64) -> Result<T> {
    let whole = rule.apply(f, a, b, "quadrature")?;
    adapt(rule, f, a, b, whole, tol, 0)
}

/// Walk an infinite tail starting at `edge` in direction `dir` and return
/// its integral, closing with a geometric-series extrapolation.
fn tail_integral<T: QuadValue>(rule: &GaussLegendre, f: &impl Fn(f64) -> T, edge: f64, dir: f64, tol: f64) -> Result<T> {
    let mut acc = T::zero();
    let mut pos = 0.0f64;
    let mut w = 1.0f64;
    let mut prev: Option<f64> = None;
    for k in 0..2000 {
        let a = edge + dir * pos;
        let b = edge + dir * (pos + w);
        let (lo, hi) = if dir > 0.0 { (a, b) } else { (b, a) };
        let ik = panel_integral(rule, f, lo, hi, tol * 1e-2)?;
        acc = acc + ik;
        let mag = ik.magnitude();
        if let Some(p) = prev {
            if mag == 0.0 && p == 0.0 {
                return Ok(acc);
            }
            if k >= 6 && p > 0.0 {
                let r = mag / p;
                if r < 0.97 {
                    let rest = r / (1.0 - r);
                    if mag * rest < 10.0 * tol {
                        return Ok(acc + ik * rest);
                    }
                }
            }
        }
        prev = Some(mag);
        pos += w;
        w *= 2.0;
        if !(edge + dir * (pos + w)).is_finite() {
            break;
        }
    }
    Err(PclError::Guard(format!(
        "tail integral starting at {edge} did not converge; integrand decays too slowly"
    )))
}

/// Integrate `f` over `window` with no known features.
pub fn integrate<T: QuadValue>(f: impl Fn(f64) -> T, window: Window, quad: &QuadratureSpec) -> Result<T> {
    integrate_with(f, window, &[], quad)
}

/// Integrate `f` over `window`; `breakpoints` mark kinks, jumps or peaks.
pub fn integrate_with<T: QuadValue>(
    f: impl Fn(f64) -> T,
    window: Window,
    breakpoints: &[f64],
    quad: &QuadratureSpec,
) -> Result<T> {
    quad.validate()?;
    let rule = GaussLegendre::new(quad.panel_count);
    let lay = layout(window, breakpoints, quad.tail_split);
    let parts = lay.panels.len() + 2;
    let tol = quad.tolerance / parts as f64;
    let mut acc = T::zero();
    if let Some(e) = lay.left_tail {
        acc = acc + tail_integral(&rule, &f, e, -1.0, quad.tolerance * 0.25)?;
    }
    for &(a, b) in &lay.panels {
        acc = acc + panel_integral(&rule, &f, a, b, tol)?;
    }
    if let Some(e) = lay.right_tail {
        acc = acc + tail_integral(&rule, &f, e, 1.0, quad.tolerance * 0.25)?;
    }
    Ok(acc)
}

/// A fixed node set for repeated integration of related integrands.
#[derive(Clone, Debug, Default)]
pub struct NodeSet {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl NodeSet {
    /// Build nodes on the graded layout without adaptive refinement.
    ///
    /// Infinite tails are cut where an integrand decaying like `|x|^{-decay}`
    /// has relative tail mass below 1e-16.
    pub fn build(window: Window, breakpoints: &[f64], quad: &QuadratureSpec, decay: f64) -> Result<Self> {
        quad.validate()?;
        if window.is_infinite() && !(decay > 1.0) {
            return Err(PclError::invalid("decay", "infinite windows need an integrand decay exponent above 1"));
        }
        let rule = GaussLegendre::new(quad.panel_count);
        let lay = layout(window, breakpoints, quad.tail_split);
        let reach = if decay > 1.0 { (1e16f64).powf(1.0 / (decay - 1.0)).min(1e200) } else { 0.0 };
        let mut panels = Vec::new();
        if let Some(e) = lay.left_tail {
            let mut left = graded_outward(e, e - reach);
            left.reverse();
            panels.extend(left);
        }
        panels.extend(lay.panels.iter().copied());
        if let Some(e) = lay.right_tail {
            panels.extend(graded_outward(e, e + reach));
        }
        let mut out = NodeSet::default();
        for (a, b) in panels {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                out.x.push(mid + half * t);
                out.w.push(w * half);
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sum<T: QuadValue>(&self, f: impl Fn(f64) -> T) -> T {
        let mut acc = T::zero();
        for (x, w) in self.x.iter().zip(&self.w) {
            acc = acc + f(*x) * *w;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(10);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 19 is the highest exact degree for 10 nodes
        let v = rule.apply(&|x: f64| x.powi(18), -1.0, 1.0, "t").unwrap();
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn indicator_without_breakpoints() {
        let w = Window::new(-2.0, 2.0).unwrap();
        let v = integrate(|x: f64| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }, w, &q()).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn power_tail_on_large_window() {
        let w = Window::new(-1e4, 1e4).unwrap();
        let v = integrate_with(|x: f64| (1.0 + x.abs()).powi(-4), w, &[0.0], &q()).unwrap();
        let exact = 2.0 / 3.0 - 2.0 / 3.0 * (1.0f64 + 1e4).powi(-3);
        assert!((v - exact).abs() < 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn slow_power_tail_on_whole_line() {
        // ∫(1+|x|)^{-1.2} over ℝ = 2/0.2
        let v = integrate_with(|x: f64| (1.0 + x.abs()).powf(-1.2), Window::whole_line(), &[0.0], &q()).unwrap();
        assert!((v - 10.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn complex_zero_integrand() {
        let w = Window::new(-3.0, 5.0).unwrap();
        let v = integrate(|_x: f64| Complex64::new(0.0, 0.0), w, &q()).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn nan_sample_is_reported() {
        let w = Window::new(-1.0, 1.0).unwrap();
        let err = integrate(|x: f64| if x > 0.5 { f64::NAN } else { 1.0 }, w, &q()).unwrap_err();
        assert!(matches!(err, PclError::NonFinite { .. }));
    }

    #[test]
    fn node_set_matches_adaptive() {
        let f = |x: f64| (1.0 + (x - 3.0).abs()).powf(-1.7) * (1.0 + x.abs()).powf(-1.7);
        let nodes = NodeSet::build(Window::whole_line(), &[0.0, 3.0], &q(), 3.4).unwrap();
        let a = nodes.sum(f);
        let b = integrate_with(f, Window::whole_line(), &[0.0, 3.0], &q()).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn layout_panels_tile_the_window() {
        let w = Window::new(-50.5, 300.25).unwrap();
        let lay = layout(w, &[0.0, 0.3, 120.0], 8.0);
        assert!(lay.left_tail.is_none() && lay.right_tail.is_none());
        assert_eq!(lay.panels.first().unwrap().0, -50.5);
        assert_eq!(lay.panels.last().unwrap().1, 300.25);
        for p in lay.panels.windows(2) {
            assert!((p[0].1 - p[1].0).abs() < 1e-12);
            assert!(p[0].1 > p[0].0);
        }
        assert!(lay.panels.iter().any(|p| (p.0 - 0.3).abs() < 1e-12));
    }
}
