//! Subcommand bodies. Each resolves its configuration, runs the core
//! operation, prints a short table, writes `<out>/<name>.csv` and a manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use pcl_core::chaos::{char_fn, multiple_integral, BaseFn, TensorPowerKernel};
use pcl_core::diagram::{
    b_moment_ladder, double_factorial_odd, enumerate_partitions, is_regular, moment_of_product, BMomentQuery, GroupShape,
    PartitionFilter, ProductKernel,
};
use pcl_core::harness::{
    clt_report, interpolate_z, path_from_terms, run_replications, sg_check, write_report, ExperimentConfig, PathSimulator,
};
use pcl_core::kernels::{covering_window, envelope_inner, KernelSpec, Norm, QuadratureSpec, Window};
use pcl_core::process::{sample_with_rng, stream_rng};
use pcl_core::spectral::{cov_phi_decay, mu_squared, MuMethod, MuOptions};

use crate::config::{config_lines, load_config, RawConfig};
use crate::manifest::RunManifest;
use crate::{parse, Command, Common, CliError};

pub const DEFAULT_OUT: &str = "pcl-out";

/// Everything a subcommand needs after flags and config file are merged.
struct Run {
    cfg: ExperimentConfig,
    out: PathBuf,
    window: Option<Window>,
    manifest: RunManifest,
}

impl Run {
    fn output(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out)?;
        let mut text = format!("# pcl-{} v1\n{header}\n", name.trim_end_matches(".csv"));
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        std::fs::write(self.out.join(name), text)?;
        self.manifest.outputs.push(PathBuf::from(name));
        Ok(())
    }

    fn finish(mut self) -> Result<(), CliError> {
        let path = self.manifest.finish(&self.out)?;
        println!("manifest: {}", path.display());
        Ok(())
    }
}

fn window(text: &str) -> Result<Window, CliError> {
    match text.trim() {
        "whole" | "whole_line" | "R" => Ok(Window::whole_line()),
        t => match parse::reals(t)?.as_slice() {
            [lo, hi] => Ok(Window::new(*lo, *hi)?),
            _ => Err(CliError::Usage(format!("window must be `whole` or LO,HI, got `{t}`"))),
        },
    }
}

fn flag_config(c: &Common) -> Result<RawConfig, CliError> {
    let mut raw = RawConfig::default();
    let mut text = String::new();
    for (k, v) in [("kernel", &c.kernel), ("phi", &c.phi), ("d", &c.d), ("alpha", &c.alpha), ("n", &c.n), ("reps", &c.reps), ("seed", &c.seed)] {
        if let Some(v) = v {
            text += &format!("{k}={v}\n");
        }
    }
    if !text.is_empty() {
        raw = RawConfig::from_text(&text)?;
    }
    raw.out = c.out.clone();
    Ok(raw)
}

fn prepare(name: &str, common: &Common, extra: RawConfig, args: Vec<(String, String)>) -> Result<Run, CliError> {
    let file = match &common.config {
        Some(p) => load_config(p)?,
        None => RawConfig::default(),
    };
    let raw = file.overlay(flag_config(common)?).overlay(extra);
    let cfg = raw.resolve()?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let window = common.window.as_deref().map(window).transpose()?;
    let mut args = args;
    if let Some(w) = &common.window {
        args.insert(0, ("window".into(), w.clone()));
    }
    let lines = config_lines(&cfg);
    for (k, v) in &lines {
        log::info!("config {k}={v}");
    }
    if let Some((_, da)) = lines.iter().find(|(k, _)| k == "d_alpha") {
        println!("d = {}, d_alpha = {da}", cfg.d);
    }
    Ok(Run { cfg, out, window, manifest: RunManifest::new(name, lines, args) })
}

fn arg(k: &str, v: &str) -> (String, String) {
    (k.to_string(), v.to_string())
}

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Charfn { common, theta } => charfn(&common, &theta),
        Command::Simulate { common, rep, times } => simulate(&common, &rep, times.as_deref()),
        Command::Variance { common, method, cutoff } => variance(&common, &method, &cutoff),
        Command::Moments { common, thetas, m } => moments(&common, &thetas, &m),
        Command::DiagramCheck { common, shape } => diagram_check(&common, &shape),
        Command::PsiEstimates { common, u_max, gamma } => psi_estimates(&common, &u_max, gamma.as_deref()),
        Command::Clt { common, times, b, t } => clt(&common, times.as_deref(), b.as_deref(), t.as_deref()),
        Command::SgCheck { common, thetas, p, samples } => sg(&common, &thetas, &p, &samples),
    }
}

fn charfn(common: &Common, theta: &str) -> Result<(), CliError> {
    let thetas = parse::reals(theta)?;
    let mut run = prepare("charfn", common, RawConfig::default(), vec![arg("theta", theta)])?;
    let w = run.window.unwrap_or_else(Window::whole_line);
    let mut rows = Vec::new();
    for th in thetas {
        let v = char_fn(th, &run.cfg.kernel, w)?;
        println!("theta = {th}: re = {:.9}, im = {:.6e}", v.re, v.im);
        rows.push(format!("{th},{},{}", v.re, v.im));
    }
    run.output("charfn.csv", "theta,re,im", &rows)?;
    run.finish()
}

fn simulate(common: &Common, rep: &str, times: Option<&str>) -> Result<(), CliError> {
    let extra = RawConfig { times: times.map(parse::reals).transpose()?, ..Default::default() };
    let index = parse::count(rep)?;
    let mut run = prepare("simulate", common, extra, vec![arg("rep", rep)])?;
    let n = run.cfg.n_values[0];
    let sim = PathSimulator::new(&run.cfg, n)?;
    let terms = sim.terms(index)?;
    let y = path_from_terms(&terms, &run.cfg.times);
    let z = interpolate_z(&y, &terms, &run.cfg.times)?;
    println!("n = {n}, replication {index}");
    let mut rows = Vec::new();
    for ((t, y), z) in run.cfg.times.iter().zip(&y).zip(&z) {
        println!("t = {t}: Y = {y:.6}, Z = {z:.6}");
        rows.push(format!("{t},{y},{z}"));
    }
    run.output("path.csv", "t,y,z", &rows)?;
    run.finish()
}

fn variance(common: &Common, method_text: &str, cutoff: &str) -> Result<(), CliError> {
    let method: MuMethod = method_text.parse()?;
    let shift_cutoff = parse::count(cutoff)? as usize;
    let mut run = prepare("variance", common, RawConfig::default(), vec![arg("method", method_text), arg("cutoff", cutoff)])?;
    let cfg = &run.cfg;
    let opts = MuOptions { shift_cutoff, grid: None, monte_carlo: (cfg.n_values[0], cfg.replications, cfg.seed), tail_fraction: cfg.tail_fraction };
    let w = run.window.unwrap_or_else(Window::whole_line);
    let mu = mu_squared(&cfg.phi, cfg.d, &cfg.kernel, w, method, &opts)?;
    println!("mu2 = {:.6}", mu.value);
    println!("std_error = {:.3e}, tail_bound = {:.3e}, imag_residue = {:.3e}", mu.std_error, mu.tail_bound, mu.imag_residue);
    let row = format!("{:?},{},{},{},{},{}", mu.method, mu.value, mu.std_error, mu.tail_bound, mu.imag_residue, mu.shift_cutoff);
    run.output("variance.csv", "method,value,std_error,tail_bound,imag_residue,shift_cutoff", &[row])?;
    run.finish()
}

fn moments(common: &Common, thetas: &str, m: &str) -> Result<(), CliError> {
    let th = parse::reals(thetas)?;
    let m_val = parse::count(m)? as usize;
    let mut run = prepare("moments", common, RawConfig::default(), vec![arg("thetas", thetas), arg("m", m)])?;
    let q = BMomentQuery::new(th, run.cfg.d, m_val, run.cfg.kernel);
    let ladder = b_moment_ladder(&q, &run.cfg.n_values)?;
    let mut rows = Vec::new();
    for b in &ladder {
        let gap = ((b.finite.0 - b.limit.0).powi(2) + (b.finite.1 - b.limit.1).powi(2)).sqrt();
        println!("n = {}: B = {:.6} {:+.6}i, limit = {:.6} {:+.6}i, gap = {gap:.3e}", b.n, b.finite.0, b.finite.1, b.limit.0, b.limit.1);
        rows.push(format!("{},{},{},{},{},{gap},{}", b.n, b.finite.0, b.finite.1, b.limit.0, b.limit.1, b.limit_tail_bound));
    }
    run.output("moments.csv", "n,re,im,limit_re,limit_im,gap,limit_tail_bound", &rows)?;
    run.finish()
}

fn default_window(kernel: &KernelSpec) -> Result<Window, CliError> {
    Ok(match kernel.base_support() {
        Some((lo, hi)) => Window::new(lo, hi)?,
        None => covering_window(kernel, 1, 1e-4)?,
    })
}

fn diagram_check(common: &Common, shape_text: &str) -> Result<(), CliError> {
    let sizes: Vec<usize> = parse::counts(shape_text)?.into_iter().map(|v| v as usize).collect();
    let shape = GroupShape::new(sizes.clone())?;
    let mut run = prepare("diagram-check", common, RawConfig::default(), vec![arg("shape", shape_text)])?;
    let mut rows = Vec::new();
    for (name, filter) in [("all", PartitionFilter::All), ("pi", PartitionFilter::Pi), ("pi_ge2", PartitionFilter::PiGe2), ("pi_eq2", PartitionFilter::PiEq2)] {
        let parts = enumerate_partitions(&shape, filter)?;
        // regularity is defined for pairings only
        if filter == PartitionFilter::PiEq2 {
            let regular = parts.iter().map(|p| is_regular(p, &shape)).collect::<Result<Vec<_>, _>>()?.iter().filter(|r| **r).count();
            println!("{name}: {} partitions, {regular} regular", parts.len());
            rows.push(format!("count_{name},{},{regular}", parts.len()));
        } else {
            println!("{name}: {} partitions", parts.len());
            rows.push(format!("count_{name},{},", parts.len()));
        }
    }
    let total = shape.total();
    if sizes.iter().all(|&s| s == 1) && total % 2 == 0 {
        let pairings = enumerate_partitions(&shape, PartitionFilter::PiEq2)?.len() as u64;
        let expected = double_factorial_odd(total / 2);
        println!("pairings {pairings} vs (2p-1)!! = {expected}");
        if pairings != expected {
            return Err(pcl_core::PclError::Guard(format!("pairing count {pairings} differs from {expected}")).into());
        }
    }

    // E prod_q I_{a_q}(psi^{a_q}) by the diagram formula and by Monte Carlo
    let kernel = run.cfg.kernel;
    let w = match run.window {
        Some(w) => w,
        None => default_window(&kernel)?,
    };
    let base: BaseFn = Arc::new(move |x| Complex64::new(kernel.eval(x), 0.0));
    let bps = kernel.breakpoints();
    let quad = QuadratureSpec::default();
    let pks: Vec<ProductKernel> =
        sizes.iter().map(|&a| ProductKernel::tensor_power(Complex64::new(1.0, 0.0), base.clone(), a).with_breakpoints(bps.clone())).collect();
    let exact = moment_of_product(&pks, &shape, w, &quad)?;
    let tks: Vec<TensorPowerKernel> =
        sizes.iter().map(|&a| TensorPowerKernel::new(Complex64::new(1.0, 0.0), base.clone(), a, w, &bps, &quad)).collect::<Result<_, _>>()?;
    let seed = run.cfg.seed;
    let samples = run_replications(run.cfg.replications, |r| {
        let config = sample_with_rng(w, &mut stream_rng(seed, r))?;
        tks.iter().map(|k| multiple_integral(&config, k).map(|v| v.re)).product::<pcl_core::Result<f64>>()
    })?;
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    let se = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt();
    let z = (mean - exact.re).abs() / se;
    println!("window [{}, {}]: diagram formula {:.6}, Monte Carlo {mean:.6} +- {se:.2e} (|diff|/SE = {z:.2})", w.lo(), w.hi(), exact.re);
    rows.push(format!("moment_exact,{},{}", exact.re, exact.im));
    rows.push(format!("moment_monte_carlo,{mean},{se}"));
    run.output("diagram.csv", "statistic,value,aux", &rows)?;
    run.finish()
}

fn psi_estimates(common: &Common, u_max: &str, gamma: Option<&str>) -> Result<(), CliError> {
    let u_max_val = parse::count(u_max)? as usize;
    let mut args = vec![arg("u_max", u_max)];
    if let Some(g) = gamma {
        args.push(arg("gamma", g));
    }
    let mut run = prepare("psi-estimates", common, RawConfig::default(), args)?;
    let cfg = &run.cfg;
    let gamma = match gamma {
        Some(g) => parse::real(g)?,
        None => cfg.kernel.alpha().ok_or_else(|| CliError::Usage("--gamma is required for kernels without an exponent".into()))?,
    };
    let decay = cov_phi_decay(&cfg.phi, cfg.d, &cfg.kernel, u_max_val)?;
    let mut rows = Vec::new();
    for &(u, cov) in &decay.entries {
        let l1 = envelope_inner(gamma, 0, u, Norm::L1)?;
        let linf = envelope_inner(gamma, 0, u, Norm::Linf)?;
        let rate = (1.0 + u as f64).powf(-gamma);
        rows.push(format!("{u},{l1},{linf},{rate},{cov}"));
    }
    for r in rows.iter().take(6) {
        println!("{r}");
    }
    println!("cov decay slope over u in [4, {u_max_val}]: {:.3}", decay.slope);
    if let Some(b) = decay.bound {
        println!("bound: {b:.3} ({})", if decay.slope <= b { "met" } else { "not met" });
    }
    run.output("psi_estimates.csv", "u,envelope_l1,envelope_linf,rate,abs_cov", &rows)?;
    run.finish()
}

fn clt(common: &Common, times: Option<&str>, b: Option<&str>, t: Option<&str>) -> Result<(), CliError> {
    let extra = RawConfig {
        times: times.map(parse::reals).transpose()?,
        fdd_b: b.map(parse::reals).transpose()?,
        fdd_t: t.map(parse::reals).transpose()?,
        ..Default::default()
    };
    let mut run = prepare("clt", common, extra, Vec::new())?;
    let report = clt_report(&run.cfg)?;
    let files = write_report(&report, &run.out)?;
    run.manifest.outputs.extend(files.iter().map(|f| f.file_name().map(PathBuf::from).unwrap_or_else(|| f.clone())));
    println!("mu2 (chaos) = {:.6}, mu2 (covariance) = {:.6}", report.mu2_chaos, report.mu2_covariance);
    let failed: Vec<_> = report.flags.iter().filter(|f| !f.pass).collect();
    println!("flags: {}/{} passed", report.flags.len() - failed.len(), report.flags.len());
    for f in failed {
        println!("  failed {} (n = {}): {:.5} vs {:.5}, tolerance {:.3e}", f.name, f.n, f.lhs, f.rhs, f.tolerance);
    }
    print_outputs(&run.out, &files);
    run.finish()
}

fn print_outputs(dir: &Path, files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.strip_prefix(dir).map(|p| dir.join(p)).unwrap_or_else(|_| f.clone()).display());
    }
}

fn sg(common: &Common, thetas: &str, p: &str, samples: &str) -> Result<(), CliError> {
    let th = parse::reals(thetas)?;
    let ps = parse::reals(p)?;
    let n = parse::count(samples)? as usize;
    let mut run = prepare("sg-check", common, RawConfig::default(), vec![arg("thetas", thetas), arg("p", p), arg("samples", samples)])?;
    let table = sg_check(&run.cfg.kernel, &th, &ps, n, run.cfg.seed)?;
    let mut rows = Vec::new();
    for r in &table.rows {
        println!("{:?} p = {}: lhs = {:.5} +- {:.1e}, rhs = {:.5}, ratio = {:.4}", r.family, r.p, r.lhs, r.lhs_se, r.rhs, r.ratio);
        rows.push(format!("\"{:?}\",{},{},{},{},{}", r.family, r.p, r.lhs, r.lhs_se, r.rhs, r.ratio));
    }
    println!("constant = {:.4}, spread = {:.3}, stable = {}", table.constant, table.spread, table.stable);
    run.output("sg.csv", "family,p,lhs,lhs_se,rhs,ratio", &rows)?;
    run.finish()
}
