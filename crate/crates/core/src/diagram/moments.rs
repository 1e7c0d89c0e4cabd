//! The truncated moments ℬ_{n,ℓ,m}(θ⃗) and their limits.
//!
//! On ℝ every block integral depends on shift differences only, so the
//! u⃗-sum collapses to difference vectors weighted by their multiplicity in
//! U_j⃗. Partitions enter only through their block signature: how many
//! blocks join each subset of groups.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::Serialize;

use super::{enumerate_partitions, for_each_offset, shift_count, GroupShape, PartitionFilter, MAX_TOTAL};
use crate::chaos::{char_fn, expm1_i, factorial};
use crate::error::{PclError, Result};
use crate::kernels::{integrate_with, KernelSpec, QuadratureSpec, Window};
use crate::spectral::pair_decay_exponent;

/// Largest n accepted by [`b_moment`].
pub const MAX_N: usize = 1 << 12;
/// Shift range of the ρ_k sums in the limit.
pub const LIMIT_CUTOFF: i64 = 1 << 14;

#[derive(Clone, Debug)]
pub struct BMomentQuery {
    pub thetas: Vec<f64>,
    pub d: usize,
    pub m: usize,
    pub b: Vec<f64>,
    pub t: Vec<f64>,
    pub spec: KernelSpec,
    pub window: Window,
    /// Cutoff on shift differences for ℓ = 3 (ℓ = 2 is summed exactly).
    pub shift_cutoff: usize,
}

impl BMomentQuery {
    pub fn new(thetas: Vec<f64>, d: usize, m: usize, spec: KernelSpec) -> Self {
        BMomentQuery { thetas, d, m, b: vec![1.0], t: vec![1.0], spec, window: Window::whole_line(), shift_cutoff: 32 }
    }

    fn validate(&self) -> Result<()> {
        let ell = self.thetas.len();
        if ell == 0 {
            return Err(PclError::invalid("thetas", "need at least one theta"));
        }
        if self.d == 0 || self.m < self.d {
            return Err(PclError::invalid("m", "need 1 <= d <= m"));
        }
        if ell * self.m > MAX_TOTAL {
            return Err(PclError::invalid("m", format!("ell*m = {} exceeds the partition cap {MAX_TOTAL}", ell * self.m)));
        }
        if self.b.is_empty() || self.b.len() != self.t.len() {
            return Err(PclError::invalid("b", "coefficients and times must have equal non-zero length"));
        }
        if self.t.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(PclError::invalid("t", "times must lie in [0,1]"));
        }
        if !self.window.is_infinite() {
            return Err(PclError::invalid("window", "the shift-difference reduction needs the stationary whole-line window"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BMoment {
    pub n: usize,
    pub finite: (f64, f64),
    pub limit: (f64, f64),
    /// Envelope bound on the part of the ρ_k sums beyond |u| = 2^14.
    pub limit_tail_bound: f64,
}

/// Lazily filled block integrals for a fixed θ⃗.
struct BlockTables {
    spec: KernelSpec,
    thetas: Vec<f64>,
    quad: QuadratureSpec,
    pairs: HashMap<(usize, usize, i64), Complex64>,
    triples: HashMap<(i64, i64), Complex64>,
}

impl BlockTables {
    fn new(spec: KernelSpec, thetas: Vec<f64>) -> Self {
        BlockTables { spec, thetas, quad: QuadratureSpec::default(), pairs: HashMap::new(), triples: HashMap::new() }
    }

    /// ∫ (e^{iθ_aψ₀} − 1)(e^{iθ_bψ_h} − 1).
    fn pair(&mut self, a: usize, b: usize, h: i64) -> Result<Complex64> {
        if let Some(v) = self.pairs.get(&(a, b, h)) {
            return Ok(*v);
        }
        let (ta, tb) = (self.thetas[a], self.thetas[b]);
        let k0 = self.spec;
        let kh = self.spec.with_shift(h);
        let mut bp = k0.breakpoints();
        bp.extend(kh.breakpoints());
        let v = integrate_with(|x| expm1_i(ta * k0.eval(x)) * expm1_i(tb * kh.eval(x)), Window::whole_line(), &bp, &self.quad)?;
        self.pairs.insert((a, b, h), v);
        Ok(v)
    }

    /// ∫ g₀(x) g₁(x − h₁) g₂(x − h₂) for groups (0, 1, 2).
    fn triple(&mut self, h1: i64, h2: i64) -> Result<Complex64> {
        if let Some(v) = self.triples.get(&(h1, h2)) {
            return Ok(*v);
        }
        let t = [self.thetas[0], self.thetas[1], self.thetas[2]];
        let ks = [self.spec, self.spec.with_shift(h1), self.spec.with_shift(h2)];
        let bp: Vec<f64> = ks.iter().flat_map(|k| k.breakpoints()).collect();
        let v = integrate_with(
            |x| expm1_i(t[0] * ks[0].eval(x)) * expm1_i(t[1] * ks[1].eval(x)) * expm1_i(t[2] * ks[2].eval(x)),
            Window::whole_line(),
            &bp,
            &self.quad,
        )?;
        self.triples.insert((h1, h2), v);
        Ok(v)
    }
}

/// Σ_{k⃗∈[d,m]^ℓ} (1/∏k!) Σ_{σ∈Π_{≥2}(k⃗)} grouped by block signature.
/// Signatures count blocks per group mask (masks indexed 0..2^ℓ).
fn signatures(ell: usize, d: usize, m: usize) -> Result<Vec<(Vec<u32>, f64)>> {
    let mut acc: HashMap<Vec<u32>, f64> = HashMap::new();
    let mut ks = vec![d; ell];
    loop {
        let shape = GroupShape::new(ks.clone())?;
        let inv: f64 = ks.iter().map(|&k| 1.0 / factorial(k)).product();
        for sigma in enumerate_partitions(&shape, PartitionFilter::PiGe2)? {
            let mut sig = vec![0u32; 1 << ell];
            for mask in sigma.group_masks(&shape) {
                sig[mask as usize] += 1;
            }
            *acc.entry(sig).or_insert(0.0) += inv;
        }
        let mut i = 0;
        loop {
            if i == ell {
                let mut out: Vec<_> = acc.into_iter().collect();
                out.sort_by(|a, b| a.0.cmp(&b.0));
                return Ok(out);
            }
            if ks[i] < m {
                ks[i] += 1;
                break;
            }
            ks[i] = d;
            i += 1;
        }
    }
}

fn counts(n: usize, t: &[f64]) -> Vec<i64> {
    t.iter().map(|&t| (n as f64 * t).floor() as i64).collect()
}

fn finite_value(q: &BMomentQuery, n: usize, sigs: &[(Vec<u32>, f64)], tables: &mut BlockTables, cf: &[Complex64]) -> Result<Complex64> {
    let ell = q.thetas.len();
    let nj = counts(n, &q.t);
    let nb = q.b.len();
    let cfp: Complex64 = cf.iter().product();
    let r = match ell {
        1 => 0,
        2 => n as i64 - 1,
        _ => (q.shift_cutoff as i64).min(n as i64 - 1),
    };
    let mut total = Complex64::new(0.0, 0.0);
    let mut us = vec![0i64; ell];
    let mut block = vec![Complex64::new(0.0, 0.0); 1 << ell];
    for_each_offset(ell - 1, r, |h| {
        us[1..].copy_from_slice(h);
        // block integrals for every mask with at least two groups
        for mask in 0..(1usize << ell) {
            if mask.count_ones() < 2 {
                continue;
            }
            let members: Vec<usize> = (0..ell).filter(|g| mask & (1 << g) != 0).collect();
            block[mask] = match members.len() {
                2 => tables.pair(members[0], members[1], us[members[1]] - us[members[0]])?,
                3 => tables.triple(us[1], us[2])?,
                _ => unreachable!(),
            };
        }
        let mut sig_sum = Complex64::new(0.0, 0.0);
        for (sig, w) in sigs {
            let mut p = Complex64::new(*w, 0.0);
            for (mask, &c) in sig.iter().enumerate() {
                if c > 0 {
                    p *= block[mask].powu(c);
                }
            }
            sig_sum += p;
        }
        if sig_sum == Complex64::new(0.0, 0.0) {
            return Ok(());
        }
        // Σ_{j⃗} ∏b · #{u⃗ ∈ U_j⃗ with these differences}
        let mut weight = 0.0;
        let mut js = vec![0usize; ell];
        loop {
            let c: Vec<i64> = js.iter().map(|&j| nj[j]).collect();
            let cnt = shift_count(&c, &us);
            if cnt > 0 {
                weight += cnt as f64 * js.iter().map(|&j| q.b[j]).product::<f64>();
            }
            let mut i = 0;
            loop {
                if i == ell {
                    total += sig_sum * weight;
                    return Ok(());
                }
                if js[i] + 1 < nb {
                    js[i] += 1;
                    break;
                }
                js[i] = 0;
                i += 1;
            }
        }
    })?;
    Ok(cfp * total * (n as f64).powf(-(ell as f64) / 2.0))
}

/// 𝓑̃_{ℓ,m}(θ⃗): zero for odd ℓ, a sum over pairings of products of
/// V·Σ_{k=d}^m ρ_k/k! otherwise, with V = Σ b_j b_j' (t_j ∧ t_j').
fn limit_value(q: &BMomentQuery, tables: &mut BlockTables, cf: &[Complex64]) -> Result<(Complex64, f64)> {
    let ell = q.thetas.len();
    if ell % 2 == 1 {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let mut var = 0.0;
    for (bi, ti) in q.b.iter().zip(&q.t) {
        for (bj, tj) in q.b.iter().zip(&q.t) {
            var += bi * bj * ti.min(*tj);
        }
    }
    let e = pair_decay_exponent(&q.spec);
    let mut pair_val: HashMap<(usize, usize), (Complex64, f64)> = HashMap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut tail_total = 0.0;
    for sigma in enumerate_partitions(&GroupShape::ones(ell)?, PartitionFilter::PiEq2)? {
        let mut prod = Complex64::new(1.0, 0.0);
        let mut mag = 1.0;
        let mut tail = 0.0;
        for b in sigma.blocks() {
            let (a, c) = (b[0], b[1]);
            let (v, tb) = match pair_val.get(&(a, c)) {
                Some(v) => *v,
                None => {
                    let mut s = Complex64::new(0.0, 0.0);
                    let mut edge = 0.0f64;
                    for u in -LIMIT_CUTOFF..=LIMIT_CUTOFF {
                        let g = tables.pair(a, c, u)?;
                        let mut term = Complex64::new(0.0, 0.0);
                        for k in q.d..=q.m {
                            term += g.powu(k as u32) / factorial(k);
                        }
                        s += term;
                        if u.abs() >= LIMIT_CUTOFF / 2 {
                            edge = edge.max(term.norm() / (1.0 + u.abs() as f64).powf(q.d as f64 * e));
                        }
                    }
                    let de = q.d as f64 * e;
                    let tb = if e == f64::NEG_INFINITY {
                        0.0
                    } else if de < -1.0 {
                        2.0 * edge * (1.0 + LIMIT_CUTOFF as f64).powf(de + 1.0) / (-de - 1.0)
                    } else {
                        f64::INFINITY
                    };
                    let v = (cf[a] * cf[c] * s * var, tb * (cf[a] * cf[c]).norm() * var.abs());
                    pair_val.insert((a, c), v);
                    v
                }
            };
            tail = tail * (v.norm() + tb) + mag * tb;
            prod *= v;
            mag *= v.norm();
        }
        total += prod;
        tail_total += tail;
    }
    Ok((total, tail_total))
}

fn prepare(q: &BMomentQuery) -> Result<(Vec<(Vec<u32>, f64)>, BlockTables, Vec<Complex64>)> {
    q.validate()?;
    let ell = q.thetas.len();
    let sigs = if ell <= 3 { signatures(ell, q.d, q.m)? } else { Vec::new() };
    let cf = q.thetas.iter().map(|&t| char_fn(t, &q.spec, Window::whole_line())).collect::<Result<Vec<_>>>()?;
    Ok((sigs, BlockTables::new(q.spec, q.thetas.clone()), cf))
}

/// ℬ_{n,ℓ,m}(θ⃗) for ℓ ≤ 3 together with the limit 𝓑̃_{ℓ,m}(θ⃗).
pub fn b_moment(q: &BMomentQuery, n: usize) -> Result<BMoment> {
    Ok(b_moment_ladder(q, &[n])?.remove(0))
}

/// [`b_moment`] over several n, sharing the block-integral tables.
pub fn b_moment_ladder(q: &BMomentQuery, ns: &[usize]) -> Result<Vec<BMoment>> {
    let (sigs, mut tables, cf) = prepare(q)?;
    let ell = q.thetas.len();
    if ell > 3 {
        return Err(PclError::invalid("thetas", "finite-n moments are implemented for ell <= 3; use b_limit"));
    }
    let (limit, tail) = limit_value(q, &mut tables, &cf)?;
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 || n > MAX_N {
            return Err(PclError::invalid("n", format!("need 1 <= n <= {MAX_N}")));
        }
        let v = finite_value(q, n, &sigs, &mut tables, &cf)?;
        out.push(BMoment { n, finite: (v.re, v.im), limit: (limit.re, limit.im), limit_tail_bound: tail });
    }
    Ok(out)
}

/// 𝓑̃_{ℓ,m}(θ⃗) and its tail bound, for any ℓ.
pub fn b_limit(q: &BMomentQuery) -> Result<(Complex64, f64)> {
    let (_, mut tables, cf) = prepare(q)?;
    limit_value(q, &mut tables, &cf)
}
