//! CLT report: moments, KS, increment covariances, the p = 4 tightness
//! table and the μ² triangulation, written as CSV plus a JSON summary.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::stats::{covariance_se, ks_normal, lag1_autocorrelation, mean_se_of, Moments};
use super::{fdd_from_terms, interpolate_z, path_from_terms, run_replications, step_count, ExperimentConfig, PathSimulator};
use crate::error::{PclError, Result};
use crate::kernels::Window;
use crate::spectral::{least_squares_slope, shift_contributions, DEFAULT_SHIFT_CUTOFF};

/// CSV schema tag written as the first line.
pub const CSV_SCHEMA: &str = "# pcl-report v1";
/// Relative tolerance of the variance comparisons.
pub const VARIANCE_TOLERANCE: f64 = 0.05;
/// KS needs at least this many replications; below it only moments are flagged.
pub const KS_MIN_REPLICATIONS: usize = 2000;

#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub s: Option<f64>,
    pub t: f64,
    pub statistic: String,
    pub value: f64,
    pub std_error: Option<f64>,
}

/// A comparison with both sides and the tolerance that was applied.
#[derive(Clone, Debug, Serialize)]
pub struct Flag {
    pub name: String,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub config: ExperimentConfig,
    /// μ² by the chaos route (the reference) and the covariance route.
    pub mu2_chaos: f64,
    pub mu2_covariance: f64,
    pub mu2_relative_gap: f64,
    pub decay_slope: f64,
    pub decay: Vec<(i64, f64)>,
    pub tightness_spread: f64,
    pub rows: Vec<ReportRow>,
    pub flags: Vec<Flag>,
}

impl StatsReport {
    pub fn passed(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }

    pub fn flag(&self, name: &str, n: usize) -> Option<&Flag> {
        self.flags.iter().find(|f| f.name == name && f.n == n)
    }

    pub fn rows_named<'a>(&'a self, statistic: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.statistic == statistic)
    }
}

fn within_se(name: &str, n: usize, value: f64, target: f64, se: f64) -> Flag {
    Flag { name: name.into(), n, lhs: value, rhs: target, tolerance: 3.0 * se, pass: (value - target).abs() <= 3.0 * se }
}

fn within_rel(name: &str, n: usize, value: f64, target: f64, rel: f64) -> Flag {
    Flag { name: name.into(), n, lhs: value, rhs: target, tolerance: rel, pass: (value / target - 1.0).abs() <= rel }
}

/// Runs the configured experiment and aggregates the CLT statistics.
pub fn clt_report(cfg: &ExperimentConfig) -> Result<StatsReport> {
    cfg.validate()?;
    let contribs = shift_contributions(&cfg.phi, cfg.d, &cfg.kernel, Window::whole_line(), DEFAULT_SHIFT_CUTOFF, None)?;
    let mut mu2_chaos = 0.0;
    let mut mu2_cov = 0.0;
    for c in &contribs {
        mu2_chaos += c.chaos.re * c.multiplicity as f64;
        mu2_cov += c.covariance.re * c.multiplicity as f64;
    }
    if !(mu2_chaos > 0.0) {
        return Err(PclError::Guard(format!("analytic mu^2 = {mu2_chaos:e} is not positive")));
    }
    let decay: Vec<(i64, f64)> = contribs.iter().map(|c| (c.shift, c.covariance.re.abs())).collect();
    let pts: Vec<(f64, f64)> =
        decay.iter().filter(|(u, v)| *u >= 4 && *v > 0.0).map(|(u, v)| ((*u as f64).ln(), v.ln())).collect();
    let decay_slope = if pts.len() >= 2 { least_squares_slope(&pts) } else { f64::NEG_INFINITY };
    let mu = mu2_chaos.sqrt();

    let mut grid: Vec<f64> = cfg.times.iter().chain(&cfg.fdd_t).copied().chain([0.0, 1.0]).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let idx = |t: f64| grid.iter().position(|g| *g == t).unwrap();

    let mut rows = Vec::new();
    let mut flags = Vec::new();
    let mut ratios = Vec::new();
    let n_max = *cfg.n_values.iter().max().unwrap();
    let mut var_fdd = 0.0;
    for (bi, ti) in cfg.fdd_b.iter().zip(&cfg.fdd_t) {
        for (bj, tj) in cfg.fdd_b.iter().zip(&cfg.fdd_t) {
            var_fdd += bi * bj * ti.min(*tj);
        }
    }
    for &n in &cfg.n_values {
        let sim = PathSimulator::new(cfg, n)?;
        let per_rep = run_replications(cfg.replications, |r| {
            let terms = sim.terms(r)?;
            let y = path_from_terms(&terms, &grid);
            let z = interpolate_z(&y, &terms, &grid)?;
            let fdd = fdd_from_terms(&terms, &cfg.fdd_b, &cfg.fdd_t);
            let t0 = terms[0];
            Ok((y, z, fdd, t0))
        })?;
        let col = |j: usize| -> Vec<f64> { per_rep.iter().map(|r| r.0[j]).collect() };
        for &t in &cfg.times {
            let ys = col(idx(t));
            let m = Moments::of(&ys);
            for (name, v, se) in [
                ("mean", m.mean, Some(m.mean_se)),
                ("variance", m.variance, Some(m.variance_se)),
                ("third_moment", m.third, Some(m.third_se)),
                ("kurtosis", m.kurtosis, None),
            ] {
                rows.push(ReportRow { n, s: None, t, statistic: name.into(), value: v, std_error: se });
            }
            rows.push(ReportRow { n, s: None, t, statistic: "mu2_t".into(), value: mu2_chaos * t, std_error: None });
            let zs: Vec<f64> = per_rep.iter().map(|r| r.1[idx(t)] - r.0[idx(t)]).collect();
            let (z2, z2se) = mean_se_of(&zs, |v| v * v);
            rows.push(ReportRow { n, s: None, t, statistic: "z_minus_y_l2".into(), value: z2.sqrt(), std_error: Some(z2se / (2.0 * z2.sqrt().max(1e-300))) });
        }
        let y1 = col(idx(1.0));
        let m1 = Moments::of(&y1);
        // p = 4 scaling ratios over all s < t of the grid
        for (a, &s) in grid.iter().enumerate() {
            for &t in &grid[a + 1..] {
                let k = step_count(n, t) - step_count(n, s);
                if k == 0 {
                    continue;
                }
                let inc: Vec<f64> = per_rep.iter().map(|r| r.0[idx(t)] - r.0[idx(s)]).collect();
                let (m4, m4se) = mean_se_of(&inc, |v| v.powi(4));
                let scale = (k as f64 / n as f64).sqrt();
                let ratio = m4.powf(0.25) / scale;
                ratios.push(ratio);
                rows.push(ReportRow { n, s: Some(s), t, statistic: "tightness_ratio_p4".into(), value: ratio, std_error: Some(0.25 * m4.powf(-0.75) * m4se / scale) });
            }
        }
        // consecutive increments of cfg.times
        let mut incs: Vec<(f64, f64, Vec<f64>)> = Vec::new();
        let mut prev = 0.0;
        for &t in &cfg.times {
            if t > prev {
                let v: Vec<f64> = per_rep.iter().map(|r| r.0[idx(t)] - r.0[idx(prev)]).collect();
                incs.push((prev, t, v));
            }
            prev = t;
        }
        let fdd: Vec<f64> = per_rep.iter().map(|r| r.2).collect();
        let mf = Moments::of(&fdd);
        rows.push(ReportRow { n, s: None, t: 1.0, statistic: "fdd_variance".into(), value: mf.variance, std_error: Some(mf.variance_se) });
        let t0: Vec<f64> = per_rep.iter().map(|r| r.3).collect();
        let (phi2, _) = mean_se_of(&t0, |v| v * v);
        if n == n_max {
            flags.push(within_rel("variance_t1", n, m1.variance, mu2_chaos, VARIANCE_TOLERANCE));
            flags.push(within_se("mean_t1", n, m1.mean, 0.0, m1.mean_se));
            flags.push(within_se("third_moment_t1", n, m1.third, 0.0, m1.third_se));
            let (k4, k4se) = mean_se_of(&y1, |v| (v / mu).powi(4));
            flags.push(within_se("fourth_moment_scaled", n, k4, 3.0, k4se));
            flags.push(within_rel("fdd_variance", n, mf.variance, mu2_chaos * var_fdd, VARIANCE_TOLERANCE));
            flags.push(within_se("fdd_mean", n, mf.mean, 0.0, mf.mean_se));
            flags.push(within_se("fdd_third_moment", n, mf.third, 0.0, mf.third_se));
            let rho = lag1_autocorrelation(&y1);
            flags.push(within_se("lag1_autocorrelation", n, rho, 0.0, 1.0 / (cfg.replications as f64).sqrt()));
            for i in 0..incs.len() {
                for j in i + 1..incs.len() {
                    let (c, se) = covariance_se(&incs[i].2, &incs[j].2);
                    let name = format!("increment_cov_{}_{}__{}_{}", incs[i].0, incs[i].1, incs[j].0, incs[j].1);
                    flags.push(within_se(&name, n, c, 0.0, se));
                }
            }
            // ‖Z − Y‖₂ ≤ n^{−1/2}‖𝒯^{≥d}φ(X₀)‖₂ with a 3 SE allowance
            for &t in &cfg.times {
                let zs: Vec<f64> = per_rep.iter().map(|r| r.1[idx(t)] - r.0[idx(t)]).collect();
                let (z2, _) = mean_se_of(&zs, |v| v * v);
                let bound = (phi2 / n as f64).sqrt();
                let pass = z2.sqrt() <= bound * (1.0 + 3.0 / (cfg.replications as f64).sqrt());
                flags.push(Flag { name: format!("z_interpolation_t{t}"), n, lhs: z2.sqrt(), rhs: bound, tolerance: 3.0 / (cfg.replications as f64).sqrt(), pass });
            }
            if cfg.replications >= KS_MIN_REPLICATIONS {
                let ks = ks_normal(&y1, mu)?;
                rows.push(ReportRow { n, s: None, t: 1.0, statistic: "ks_statistic".into(), value: ks.statistic, std_error: None });
                rows.push(ReportRow { n, s: None, t: 1.0, statistic: "ks_pvalue".into(), value: ks.p_value, std_error: None });
                flags.push(Flag { name: "ks_pvalue".into(), n, lhs: ks.p_value, rhs: 0.01, tolerance: 0.0, pass: ks.p_value > 0.01 });
            }
        }
    }
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    flags.push(Flag { name: "tightness_spread".into(), n: n_max, lhs: spread, rhs: 3.0, tolerance: 0.0, pass: spread <= 3.0 });
    let gap = (mu2_chaos - mu2_cov).abs() / mu2_chaos;
    flags.push(Flag { name: "mu2_route_gap".into(), n: 0, lhs: mu2_chaos, rhs: mu2_cov, tolerance: 1e-3, pass: gap < 1e-3 });
    Ok(StatsReport {
        config: cfg.clone(),
        mu2_chaos,
        mu2_covariance: mu2_cov,
        mu2_relative_gap: gap,
        decay_slope,
        decay,
        tightness_spread: spread,
        rows,
        flags,
    })
}

fn fmt_num(x: f64) -> String {
    format!("{x:.17e}")
}

/// CSV text of the report rows.
pub fn report_csv(report: &StatsReport) -> String {
    let mut s = String::new();
    writeln!(s, "{CSV_SCHEMA}").unwrap();
    writeln!(s, "n,s,t,statistic,value,std_error").unwrap();
    for r in &report.rows {
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        writeln!(s, "{},{},{},{},{},{}", r.n, opt(r.s), fmt_num(r.t), r.statistic, fmt_num(r.value), opt(r.std_error)).unwrap();
    }
    s
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: &'a str,
    passed: bool,
    mu2_chaos: f64,
    mu2_covariance: f64,
    mu2_relative_gap: f64,
    decay_slope: f64,
    tightness_spread: f64,
    flags: &'a [Flag],
    decay: &'a [(i64, f64)],
}

/// Writes `report.csv` and `summary.json` into `dir`; returns the paths.
pub fn write_report(report: &StatsReport, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join("report.csv");
    std::fs::write(&csv, report_csv(report))?;
    let summary = Summary {
        schema: "pcl-summary v1",
        passed: report.passed(),
        mu2_chaos: report.mu2_chaos,
        mu2_covariance: report.mu2_covariance,
        mu2_relative_gap: report.mu2_relative_gap,
        decay_slope: report.decay_slope,
        tightness_spread: report.tightness_spread,
        flags: &report.flags,
        decay: &report.decay,
    };
    let json = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| PclError::Guard(e.to_string()))?;
    std::fs::write(&json, text)?;
    Ok(vec![csv, json])
}
