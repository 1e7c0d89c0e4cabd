//! Flat `key=value` experiment configuration.
//!
//! One pair per line, `#` starts a comment. Keys may carry a `config.`
//! prefix, so a run manifest can be fed back as a config file; the
//! manifest's own bookkeeping keys are skipped.

use std::path::{Path, PathBuf};

use pcl_core::chaos::NonlinearitySpec;
use pcl_core::harness::{check_hypothesis, ExperimentConfig, DEFAULT_TAIL_FRACTION};
use pcl_core::kernels::{d_alpha, KernelFamily, KernelSpec};

use crate::parse;
use crate::CliError;

const MANIFEST_KEYS: &[&str] = &["subcommand", "artifact_version", "config_hash", "started_unix", "finished_unix", "output", "d_alpha"];

/// Settings as read from a file or flags, before defaults.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    pub kernel: Option<KernelSpec>,
    pub alpha: Option<f64>,
    pub phi: Option<NonlinearitySpec>,
    pub d: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub times: Option<Vec<f64>>,
    pub fdd_b: Option<Vec<f64>>,
    pub fdd_t: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub tail_fraction: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RawConfig {
    /// Fields set in `other` win.
    pub fn overlay(mut self, other: RawConfig) -> RawConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(kernel, alpha, phi, d, n, reps, times, fdd_b, fdd_t, seed, tail_fraction, out);
        self
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let usize_of = |v: &str| -> Result<usize, CliError> { Ok(parse::count(v)? as usize) };
        match key {
            "kernel" => self.kernel = Some(parse::kernel(value)?),
            "alpha" => self.alpha = Some(parse::real(value)?),
            "phi" => self.phi = Some(parse::phi(value)?),
            "d" => self.d = Some(usize_of(value)?),
            "n" => self.n = Some(parse::counts(value)?.into_iter().map(|v| v as usize).collect()),
            "reps" | "replications" => self.reps = Some(usize_of(value)?),
            "times" => self.times = Some(parse::reals(value)?),
            "fdd_b" => self.fdd_b = Some(parse::reals(value)?),
            "fdd_t" => self.fdd_t = Some(parse::reals(value)?),
            "seed" => self.seed = Some(parse::count(value)?),
            "tail_fraction" => self.tail_fraction = Some(parse::real(value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<RawConfig, CliError> {
        let mut raw = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
            let k = k.trim();
            let k = k.strip_prefix("config.").unwrap_or(k);
            if MANIFEST_KEYS.contains(&k) || k.starts_with("arg.") {
                continue;
            }
            raw.set(k, v.trim()).map_err(|e| CliError::Usage(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(raw)
    }

    /// Kernel after applying `alpha` (which replaces the power-law exponent).
    pub fn resolved_kernel(&self) -> Result<KernelSpec, CliError> {
        match (self.kernel, self.alpha) {
            (None, None) => Ok(KernelSpec::power_law(2.0, 1.0)?),
            (None, Some(a)) => Ok(KernelSpec::power_law(a, 1.0)?),
            (Some(k), None) => Ok(k),
            (Some(k), Some(a)) => match k.family() {
                KernelFamily::PowerLaw { scale, .. } => Ok(KernelSpec::power_law(a, scale)?),
                _ => Err(CliError::Usage("--alpha only applies to power_law kernels".into())),
            },
        }
    }

    /// Default d: d_α for power-law kernels, 1 otherwise.
    pub fn resolved_d(&self, kernel: &KernelSpec) -> Result<usize, CliError> {
        match (self.d, kernel.alpha()) {
            (Some(d), _) => Ok(d),
            (None, Some(a)) => Ok(d_alpha(a)?),
            (None, None) => Ok(1),
        }
    }

    /// Fills defaults and applies every hypothesis and range check.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let kernel = self.resolved_kernel()?;
        let d = self.resolved_d(&kernel)?;
        check_hypothesis(&kernel, d)?;
        let mut cfg = ExperimentConfig::new(kernel, self.phi.clone().unwrap_or_else(NonlinearitySpec::gaussian_bump), d);
        if let Some(n) = &self.n {
            cfg.n_values = n.clone();
        }
        if let Some(r) = self.reps {
            cfg.replications = r;
        }
        if let Some(t) = &self.times {
            cfg.times = t.clone();
        }
        if let Some(b) = &self.fdd_b {
            cfg.fdd_b = b.clone();
        }
        if let Some(t) = &self.fdd_t {
            cfg.fdd_t = t.clone();
        }
        cfg.seed = self.seed.unwrap_or(0);
        cfg.tail_fraction = self.tail_fraction.unwrap_or(DEFAULT_TAIL_FRACTION);
        cfg.output = self.out.clone();
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    RawConfig::from_text(&text)
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// The resolved configuration as ordered key/value pairs; reloadable.
pub fn config_lines(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let mut out = vec![
        ("kernel".to_string(), parse::kernel_text(&cfg.kernel)),
        ("phi".into(), parse::phi_text(&cfg.phi)),
        ("d".into(), cfg.d.to_string()),
        ("n".into(), list(&cfg.n_values)),
        ("reps".into(), cfg.replications.to_string()),
        ("times".into(), list(&cfg.times)),
        ("fdd_b".into(), list(&cfg.fdd_b)),
        ("fdd_t".into(), list(&cfg.fdd_t)),
        ("seed".into(), cfg.seed.to_string()),
        ("tail_fraction".into(), cfg.tail_fraction.to_string()),
    ];
    if let Some(a) = cfg.kernel.alpha() {
        if let Ok(da) = d_alpha(a) {
            out.push(("d_alpha".into(), da.to_string()));
        }
    }
    out
}
