//! Grouped set partitions and the diagram formula.
//!
//! Elements are 0-based: a shape ā = (a₁,…,a_ℓ) owns the indices
//! 0..a₁ (group 0), a₁..a₁+a₂ (group 1) and so on.

mod moments;

use std::collections::HashMap;

use num_complex::Complex64;

use crate::chaos::BaseFn;
use crate::error::{PclError, Result};
use crate::kernels::{integrate_with, QuadratureSpec, Window};
pub use moments::{b_limit, b_moment, b_moment_ladder, BMoment, BMomentQuery};

/// Largest total number of slots; Bell(12) ≈ 4.2 million partitions.
pub const MAX_TOTAL: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupShape {
    sizes: Vec<usize>,
    group_of: Vec<usize>,
}

impl GroupShape {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(PclError::invalid("shape", "group sizes must be positive and non-empty"));
        }
        let total: usize = sizes.iter().sum();
        if total > MAX_TOTAL {
            return Err(PclError::invalid("shape", format!("total {total} exceeds the cap {MAX_TOTAL}")));
        }
        let group_of = sizes.iter().enumerate().flat_map(|(g, &a)| std::iter::repeat_n(g, a)).collect();
        Ok(GroupShape { sizes, group_of })
    }

    /// ℓ ones.
    pub fn ones(ell: usize) -> Result<Self> {
        GroupShape::new(vec![1; ell])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    /// Index range of group q.
    pub fn group_range(&self, q: usize) -> std::ops::Range<usize> {
        let start: usize = self.sizes[..q].iter().sum();
        start..start + self.sizes[q]
    }
}

/// Blocks are ascending and ordered by their minimum element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates that `blocks` partition 0..total and normalizes the order.
    pub fn from_blocks(mut blocks: Vec<Vec<usize>>, total: usize) -> Result<Self> {
        let mut seen = vec![false; total];
        for b in blocks.iter_mut() {
            if b.is_empty() {
                return Err(PclError::invalid("sigma", "blocks must be non-empty"));
            }
            b.sort_unstable();
            for &i in b.iter() {
                if i >= total || seen[i] {
                    return Err(PclError::invalid("sigma", format!("index {i} is out of range or repeated")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(PclError::invalid("sigma", "blocks do not cover every index"));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Partition { blocks })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Groups touched by each block, as bit masks.
    pub fn group_masks(&self, shape: &GroupShape) -> Vec<u32> {
        self.blocks.iter().map(|b| b.iter().fold(0u32, |m, &i| m | 1 << shape.group_of(i))).collect()
    }

    fn respects_groups(&self, shape: &GroupShape) -> bool {
        self.blocks
            .iter()
            .all(|b| b.iter().map(|&i| shape.group_of(i)).collect::<std::collections::HashSet<_>>().len() == b.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionFilter {
    All,
    /// At most one element per group in every block.
    Pi,
    /// `Pi` with blocks of size at least 2.
    PiGe2,
    /// `Pi` with blocks of size exactly 2.
    PiEq2,
}

/// Restricted-growth-string enumeration with group pruning.
pub fn enumerate_partitions(shape: &GroupShape, filter: PartitionFilter) -> Result<Vec<Partition>> {
    let total = shape.total();
    if total > MAX_TOTAL {
        return Err(PclError::invalid("shape", format!("total {total} exceeds the cap {MAX_TOTAL}")));
    }
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    grow(shape, filter, 0, &mut blocks, &mut out);
    Ok(out)
}

fn grow(shape: &GroupShape, filter: PartitionFilter, i: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Partition>) {
    let total = shape.total();
    let grouped = filter != PartitionFilter::All;
    let min2 = matches!(filter, PartitionFilter::PiGe2 | PartitionFilter::PiEq2);
    if min2 {
        // every singleton still needs a partner from the remaining elements
        let singles = blocks.iter().filter(|b| b.len() == 1).count();
        if singles > total - i {
            return;
        }
    }
    if i == total {
        if !min2 || blocks.iter().all(|b| b.len() >= 2) {
            out.push(Partition { blocks: blocks.clone() });
        }
        return;
    }
    let g = shape.group_of(i);
    for b in 0..blocks.len() {
        if filter == PartitionFilter::PiEq2 && blocks[b].len() >= 2 {
            continue;
        }
        if grouped && blocks[b].iter().any(|&j| shape.group_of(j) == g) {
            continue;
        }
        blocks[b].push(i);
        grow(shape, filter, i + 1, blocks, out);
        blocks[b].pop();
    }
    blocks.push(vec![i]);
    grow(shape, filter, i + 1, blocks, out);
    blocks.pop();
}

/// Regularity of a pair partition: every group sends all its blocks to a
/// single partner group, and the partner relation is a perfect matching.
pub fn is_regular(sigma: &Partition, shape: &GroupShape) -> Result<bool> {
    if sigma.blocks.iter().map(|b| b.len()).sum::<usize>() != shape.total() {
        return Err(PclError::invalid("sigma", "partition does not match the shape"));
    }
    if !(sigma.blocks.iter().all(|b| b.len() == 2) && sigma.respects_groups(shape)) {
        return Err(PclError::invalid("sigma", "is_regular needs a partition in Pi_eq2"));
    }
    let ell = shape.groups();
    if ell % 2 == 1 {
        return Ok(false);
    }
    let mut partner: Vec<Option<usize>> = vec![None; ell];
    for b in &sigma.blocks {
        let (p, q) = (shape.group_of(b[0]), shape.group_of(b[1]));
        for (x, y) in [(p, q), (q, p)] {
            match partner[x] {
                None => partner[x] = Some(y),
                Some(z) if z == y => {}
                Some(_) => return Ok(false),
            }
        }
    }
    Ok(partner.iter().enumerate().all(|(g, p)| matches!(p, Some(h) if partner[*h] == Some(g))))
}

/// c · f₁(x₁)···f_a(x_a), one factor per tensor slot.
#[derive(Clone)]
pub struct ProductKernel {
    pub coefficient: Complex64,
    pub factors: Vec<BaseFn>,
    /// Points where the factors may be non-smooth.
    pub breakpoints: Vec<f64>,
}

impl std::fmt::Debug for ProductKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProductKernel")
            .field("coefficient", &self.coefficient)
            .field("factors", &self.factors.len())
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl ProductKernel {
    pub fn new(coefficient: Complex64, factors: Vec<BaseFn>) -> Self {
        ProductKernel { coefficient, factors, breakpoints: Vec::new() }
    }

    /// c · g^{⊗a}.
    pub fn tensor_power(coefficient: Complex64, base: BaseFn, order: usize) -> Self {
        ProductKernel::new(coefficient, vec![base; order])
    }

    pub fn with_breakpoints(mut self, bp: Vec<f64>) -> Self {
        self.breakpoints = bp;
        self
    }
}

/// Exponent of the envelope used by the domination check.
const ENVELOPE_BETA: f64 = 0.51;

/// |f(x)|(1+|x|)^β must not grow at the far end of a log-spaced grid.
fn envelope_dominated(f: &BaseFn, window: Window) -> bool {
    let mut near = 0.0f64;
    let mut far = 0.0f64;
    for k in -8..=32 {
        let r = 10f64.powf(k as f64 / 4.0);
        for x in [r, -r] {
            if !window.contains(x) {
                continue;
            }
            let v = f(x).norm() * (1.0 + x.abs()).powf(ENVELOPE_BETA);
            if !v.is_finite() {
                return false;
            }
            if r >= 1e6 {
                far = far.max(v);
            } else {
                near = near.max(v);
            }
        }
    }
    far <= near * (1.0 + 1e-9) + 1e-300
}

/// E ∏ I_{a_i}(f_i) = Σ_{σ∈Π_{≥2}(ā)} ∫(⊗f_i)_σ for product kernels.
pub fn moment_of_product(
    kernels: &[ProductKernel],
    shape: &GroupShape,
    window: Window,
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    if kernels.len() != shape.groups() {
        return Err(PclError::invalid("kernels", "one kernel per group is required"));
    }
    let mut slots: Vec<BaseFn> = Vec::with_capacity(shape.total());
    for (q, k) in kernels.iter().enumerate() {
        if k.factors.len() != shape.sizes()[q] {
            return Err(PclError::invalid("kernels", format!("kernel {q} has {} factors, group size is {}", k.factors.len(), shape.sizes()[q])));
        }
        slots.extend(k.factors.iter().cloned());
    }
    for (i, f) in slots.iter().enumerate() {
        if !envelope_dominated(f, window) {
            return Err(PclError::Hypothesis(format!(
                "factor {i} is not dominated by an envelope (1+|x|)^-{ENVELOPE_BETA}"
            )));
        }
    }
    let bp: Vec<f64> = kernels.iter().flat_map(|k| k.breakpoints.iter().copied()).collect();
    let coefficient: Complex64 = kernels.iter().map(|k| k.coefficient).product();
    let mut memo: HashMap<Vec<usize>, Complex64> = HashMap::new();
    let mut total = Complex64::new(0.0, 0.0);
    for sigma in enumerate_partitions(shape, PartitionFilter::PiGe2)? {
        let mut prod = Complex64::new(1.0, 0.0);
        for b in sigma.blocks() {
            let v = match memo.get(b) {
                Some(v) => *v,
                None => {
                    let fs: Vec<BaseFn> = b.iter().map(|&i| slots[i].clone()).collect();
                    let v = integrate_with(|x| fs.iter().map(|f| f(x)).product::<Complex64>(), window, &bp, quad)?;
                    memo.insert(b.clone(), v);
                    v
                }
            };
            prod *= v;
        }
        total += prod;
    }
    Ok(coefficient * total)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.5) || alpha == 1.0 || !alpha.is_finite() {
        return Err(PclError::invalid("alpha", format!("need alpha in (1/2,1) or (1,inf), got {alpha}")));
    }
    Ok(())
}

/// R_k(u) = ∫ Ψ_{α,u₁}···Ψ_{α,u_k}, with Ψ_{α,u}(x) = (1+|x−u|)^{−α}.
pub fn r_k(us: &[i64], alpha: f64, window: Window, quad: &QuadratureSpec) -> Result<f64> {
    check_alpha(alpha)?;
    if us.is_empty() {
        return Err(PclError::invalid("us", "need at least one shift"));
    }
    if window.is_infinite() && us.len() as f64 * alpha <= 1.0 {
        return Err(PclError::invalid("us", "the product is not integrable on the whole line"));
    }
    let bp: Vec<f64> = us.iter().map(|&u| u as f64).collect();
    integrate_with(|x| bp.iter().map(|u| (1.0 + (x - u).abs()).powf(-alpha)).product::<f64>(), window, &bp, quad)
}

/// Memoized R on ℝ keyed by sorted, min-normalized shifts.
pub struct RTable {
    alpha: f64,
    pairs: Vec<f64>,
    memo: HashMap<Vec<i64>, f64>,
    quad: QuadratureSpec,
}

impl RTable {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(RTable { alpha, pairs: Vec::new(), memo: HashMap::new(), quad: QuadratureSpec::default() })
    }

    /// R₂(0, h).
    pub fn pair(&mut self, h: i64) -> Result<f64> {
        let h = h.unsigned_abs() as usize;
        while self.pairs.len() <= h {
            let k = self.pairs.len() as i64;
            let v = r_k(&[0, k], self.alpha, Window::whole_line(), &self.quad)?;
            self.pairs.push(v);
        }
        Ok(self.pairs[h])
    }

    pub fn get(&mut self, us: &[i64]) -> Result<f64> {
        if us.len() == 2 {
            return self.pair(us[1] - us[0]);
        }
        let mut key = us.to_vec();
        key.sort_unstable();
        let m = key[0];
        key.iter_mut().for_each(|u| *u -= m);
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let v = r_k(&key, self.alpha, Window::whole_line(), &self.quad)?;
        self.memo.insert(key, v);
        Ok(v)
    }
}

/// Largest number of difference vectors summed by [`t_sigma`].
pub const T_SIGMA_GRID_CAP: f64 = 1e7;

/// Number of u⃗ in ∏[0, N_q) with u_q − u₀ = h_q.
pub(crate) fn shift_count(counts: &[i64], h: &[i64]) -> i64 {
    let mut lo = i64::MIN;
    let mut hi = i64::MAX;
    for (n, d) in counts.iter().zip(h) {
        lo = lo.max(-d);
        hi = hi.min(n - 1 - d);
    }
    (hi - lo + 1).max(0)
}

/// Iterates all h ∈ [−r, r]^{dim}.
pub(crate) fn for_each_offset(dim: usize, r: i64, mut f: impl FnMut(&[i64]) -> Result<()>) -> Result<()> {
    let mut h = vec![-r; dim];
    if dim == 0 {
        return f(&h);
    }
    loop {
        f(&h)?;
        let mut i = 0;
        loop {
            if i == dim {
                return Ok(());
            }
            if h[i] < r {
                h[i] += 1;
                break;
            }
            h[i] = -r;
            i += 1;
        }
    }
}

/// T_σ(n,j⃗) = n^{−ℓ/2} Σ_{u⃗∈U_j⃗} ∏_B R_{|B|}(u⃗_B).
///
/// R depends on shift differences only, so the sum runs over difference
/// vectors h ∈ [−(n−1), n−1]^{ℓ−1} weighted by their multiplicity in U_j⃗.
pub fn t_sigma(
    n: usize,
    js: &[usize],
    sigma: &Partition,
    shape: &GroupShape,
    alpha: f64,
    times: &[f64],
) -> Result<f64> {
    let ell = shape.groups();
    if js.len() != ell {
        return Err(PclError::invalid("js", "one time index per group is required"));
    }
    if !sigma.respects_groups(shape) || sigma.blocks.iter().any(|b| b.len() < 2) {
        return Err(PclError::invalid("sigma", "t_sigma needs a partition in Pi_ge2"));
    }
    if n == 0 {
        return Err(PclError::invalid("n", "must be positive"));
    }
    let grid = (2.0 * n as f64 - 1.0).powi(ell as i32 - 1);
    if grid > T_SIGMA_GRID_CAP {
        return Err(PclError::Guard(format!("difference grid of {grid:.3e} points exceeds {T_SIGMA_GRID_CAP:.0e}")));
    }
    let mut counts = Vec::with_capacity(ell);
    for &j in js {
        let t = *times.get(j).ok_or_else(|| PclError::invalid("js", format!("time index {j} out of range")))?;
        if !(0.0..=1.0).contains(&t) {
            return Err(PclError::invalid("times", "times must lie in [0,1]"));
        }
        counts.push((n as f64 * t).floor() as i64);
    }
    let groups: Vec<Vec<usize>> =
        sigma.blocks().iter().map(|b| b.iter().map(|&i| shape.group_of(i)).collect()).collect();
    let mut table = RTable::new(alpha)?;
    let mut total = 0.0;
    let mut us = Vec::with_capacity(ell);
    let mut block_us = Vec::new();
    for_each_offset(ell - 1, n as i64 - 1, |h| {
        us.clear();
        us.push(0);
        us.extend_from_slice(h);
        let c = shift_count(&counts, &us);
        if c == 0 {
            return Ok(());
        }
        let mut prod = c as f64;
        for g in &groups {
            block_us.clear();
            block_us.extend(g.iter().map(|&q| us[q]));
            prod *= table.get(&block_us)?;
        }
        total += prod;
        Ok(())
    })?;
    Ok(total * (n as f64).powf(-(ell as f64) / 2.0))
}

/// (2p−1)!!
pub fn double_factorial_odd(p: usize) -> u64 {
    (1..=p as u64).map(|k| 2 * k - 1).product()
}

#[cfg(test)]
pub(crate) fn arc_fn(f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> BaseFn {
    std::sync::Arc::new(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(s: &[usize]) -> GroupShape {
        GroupShape::new(s.to_vec()).unwrap()
    }

    fn bell(n: usize) -> usize {
        // Bell triangle
        let mut row = vec![1usize];
        for _ in 1..n {
            let mut next = vec![*row.last().unwrap()];
            for &v in &row {
                next.push(next.last().unwrap() + v);
            }
            row = next;
        }
        *row.last().unwrap()
    }

    #[test]
    fn partition_counts() {
        for p in 1..=4 {
            let s = GroupShape::ones(2 * p).unwrap();
            let n = enumerate_partitions(&s, PartitionFilter::PiEq2).unwrap().len();
            assert_eq!(n as u64, double_factorial_odd(p));
        }
        let ge2 = enumerate_partitions(&shape(&[2, 2]), PartitionFilter::PiGe2).unwrap();
        let blocks: Vec<_> = ge2.iter().map(|p| p.blocks().to_vec()).collect();
        assert_eq!(blocks, vec![vec![vec![0, 2], vec![1, 3]], vec![vec![0, 3], vec![1, 2]]]);
        assert_eq!(enumerate_partitions(&shape(&[4]), PartitionFilter::All).unwrap().len(), 15);
        assert_eq!(enumerate_partitions(&shape(&[4]), PartitionFilter::Pi).unwrap().len(), 1);
        for n in 1..=7 {
            assert_eq!(enumerate_partitions(&GroupShape::new(vec![n]).unwrap(), PartitionFilter::All).unwrap().len(), bell(n));
        }
        assert!(GroupShape::new(vec![7, 6]).is_err());
    }

    #[test]
    fn filters_nest() {
        let s = shape(&[2, 1, 2]);
        let all = enumerate_partitions(&s, PartitionFilter::All).unwrap();
        let pi = enumerate_partitions(&s, PartitionFilter::Pi).unwrap();
        let ge2 = enumerate_partitions(&s, PartitionFilter::PiGe2).unwrap();
        let eq2 = enumerate_partitions(&s, PartitionFilter::PiEq2).unwrap();
        assert!(eq2.iter().all(|p| ge2.contains(p)));
        assert!(ge2.iter().all(|p| pi.contains(p)));
        assert!(pi.iter().all(|p| all.contains(p)));
        assert_eq!(all.len(), bell(5));
    }

    #[test]
    fn regularity_examples() {
        let s = shape(&[1, 1, 1, 1]);
        let sig = Partition::from_blocks(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        assert!(is_regular(&sig, &s).unwrap());
        let s = shape(&[2, 2]);
        let sig = Partition::from_blocks(vec![vec![0, 2], vec![1, 3]], 4).unwrap();
        assert!(is_regular(&sig, &s).unwrap());
        let s = shape(&[2, 1, 1]);
        let sig = Partition::from_blocks(vec![vec![0, 2], vec![1, 3]], 4).unwrap();
        assert!(!is_regular(&sig, &s).unwrap());
        // not in Pi_eq2
        let s = shape(&[2, 2]);
        let sig = Partition::from_blocks(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        assert!(is_regular(&sig, &s).is_err());
    }

    #[test]
    fn regular_mutation_flips() {
        // (1,1,1,1) matched {0,1},{2,3}; crossing to {0,2},{1,3} is still a
        // matching, so mutate within shape (2,2,1,1) instead
        let s = shape(&[2, 2, 1, 1]);
        let sig = Partition::from_blocks(vec![vec![0, 2], vec![1, 3], vec![4, 5]], 6).unwrap();
        assert!(is_regular(&sig, &s).unwrap());
        let bad = Partition::from_blocks(vec![vec![0, 2], vec![1, 4], vec![3, 5]], 6).unwrap();
        assert!(!is_regular(&bad, &s).unwrap());
    }

    #[test]
    fn r_examples() {
        let q = QuadratureSpec::default();
        let w = Window::whole_line();
        assert!((r_k(&[0, 0], 2.0, w, &q).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let a = r_k(&[0, 3, 7], 0.8, w, &q).unwrap();
        let b = r_k(&[7, 0, 3], 0.8, w, &q).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
        assert!(r_k(&[0], 0.8, w, &q).is_err());
        assert!(r_k(&[0, 1], 1.0, w, &q).is_err());
    }

    #[test]
    fn moment_of_product_basics() {
        let w = Window::whole_line();
        let q = QuadratureSpec::default();
        let f = arc_fn(|x| Complex64::new((1.0 + x.abs()).powi(-2), 0.0));
        let g = arc_fn(|x| Complex64::new((1.0 + (x - 1.0).abs()).powi(-2), 0.0));
        let one = Complex64::new(1.0, 0.0);
        let s1 = shape(&[1]);
        assert_eq!(moment_of_product(&[ProductKernel::new(one, vec![f.clone()])], &s1, w, &q).unwrap(), Complex64::new(0.0, 0.0));
        let s11 = shape(&[1, 1]);
        let ks = [ProductKernel::new(one, vec![f.clone()]), ProductKernel::new(one, vec![g.clone()])];
        let v = moment_of_product(&ks, &s11, w, &q).unwrap();
        let fg = integrate_with(|x| f(x) * g(x), w, &[0.0, 1.0], &q).unwrap();
        assert!((v - fg).norm() < 1e-12);
        // isometry for tensor powers: E[I₂(g^{⊗2})²] = 2(∫g²)²
        let s22 = shape(&[2, 2]);
        let ks = [ProductKernel::tensor_power(one, g.clone(), 2), ProductKernel::tensor_power(one, g.clone(), 2)];
        let v = moment_of_product(&ks, &s22, w, &q).unwrap();
        let g2 = integrate_with(|x| g(x) * g(x), w, &[1.0], &q).unwrap();
        assert!((v - 2.0 * g2 * g2).norm() < 1e-12);
        let flat = arc_fn(|_| Complex64::new(1.0, 0.0));
        let bad = [ProductKernel::new(one, vec![f]), ProductKernel::new(one, vec![flat])];
        assert!(matches!(moment_of_product(&bad, &s11, w, &q), Err(PclError::Hypothesis(m)) if m.contains("factor 1")));
    }

    #[test]
    fn t_sigma_regular_limit() {
        let s = shape(&[1, 1]);
        let sig = Partition::from_blocks(vec![vec![0, 1]], 2).unwrap();
        let mut table = RTable::new(2.0).unwrap();
        let mut lim = 0.0;
        for h in -4000i64..=4000 {
            lim += table.pair(h).unwrap();
        }
        let mut prev = f64::INFINITY;
        for e in 6..=10 {
            let v = t_sigma(1 << e, &[0, 0], &sig, &s, 2.0, &[1.0]).unwrap();
            let gap = (v - lim).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev / lim < 0.02);
        assert!(matches!(t_sigma(1 << 13, &[0, 0, 0], &Partition::from_blocks(vec![vec![0, 1, 2]], 3).unwrap(), &shape(&[1, 1, 1]), 2.0, &[1.0]), Err(PclError::Guard(_))));
    }

    #[test]
    fn offsets_and_counts() {
        let mut n = 0;
        for_each_offset(2, 1, |_| {
            n += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(n, 9);
        assert_eq!(shift_count(&[5, 5], &[0, 2]), 3);
        assert_eq!(shift_count(&[5, 3], &[0, -1]), 3);
        assert_eq!(shift_count(&[5, 5], &[0, 5]), 0);
    }
}
