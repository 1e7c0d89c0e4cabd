//! Text forms of kernels, nonlinearities and numeric lists.

use pcl_core::chaos::{NonlinearitySpec, PhiFamily};
use pcl_core::kernels::{KernelFamily, KernelSpec};

use crate::CliError;

fn bad(what: &str, text: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("cannot parse {what} `{text}`: {why}"))
}

/// A real number; scientific notation is accepted.
pub fn real(text: &str) -> Result<f64, CliError> {
    let v: f64 = text.trim().parse().map_err(|e| bad("number", text, e))?;
    if !v.is_finite() {
        return Err(bad("number", text, "not finite"));
    }
    Ok(v)
}

/// A non-negative integer, also written as `1e4` or `2^14`.
pub fn count(text: &str) -> Result<u64, CliError> {
    let t = text.trim();
    let v = if let Some((b, e)) = t.split_once('^') {
        let b = count(b)?;
        let e = count(e)?;
        u32::try_from(e).ok().and_then(|e| b.checked_pow(e)).ok_or_else(|| bad("integer", text, "overflow"))? as f64
    } else {
        real(t)?
    };
    if v < 0.0 || v.fract() != 0.0 || v > 9.0e15 {
        return Err(bad("integer", text, "not a non-negative integer"));
    }
    Ok(v as u64)
}

pub fn reals(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(real).collect()
}

pub fn counts(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(count).collect()
}

/// `power_law:alpha[,scale]`, `indicator:lo,hi` or `bump:center,halfwidth`.
pub fn kernel(text: &str) -> Result<KernelSpec, CliError> {
    let (name, args) = text.split_once(':').unwrap_or((text, ""));
    let p = reals(args)?;
    let need = |k: usize| -> Result<(), CliError> {
        if p.len() == k {
            Ok(())
        } else {
            Err(bad("kernel", text, format!("expected {k} parameters, got {}", p.len())))
        }
    };
    let spec = match name.trim().to_ascii_lowercase().as_str() {
        "power_law" | "powerlaw" | "power" => match p.len() {
            1 => KernelSpec::power_law(p[0], 1.0),
            2 => KernelSpec::power_law(p[0], p[1]),
            _ => return Err(bad("kernel", text, "expected alpha[,scale]")),
        },
        "indicator" => {
            need(2)?;
            KernelSpec::indicator(p[0], p[1])
        }
        "bump" | "compact_bump" => {
            need(2)?;
            KernelSpec::compact_bump(p[0], p[1])
        }
        other => return Err(bad("kernel", text, format!("unknown family `{other}`"))),
    };
    Ok(spec?)
}

pub fn kernel_text(spec: &KernelSpec) -> String {
    match spec.family() {
        KernelFamily::PowerLaw { alpha, scale } => format!("power_law:{alpha},{scale}"),
        KernelFamily::Indicator { lo, hi } => format!("indicator:{lo},{hi}"),
        KernelFamily::CompactBump { center, halfwidth } => format!("bump:{center},{halfwidth}"),
    }
}

/// Polynomial in x such as `x`, `x^2`, `1 - 0.5x + x^3`.
fn poly_expression(text: &str) -> Result<Vec<f64>, CliError> {
    let mut coeffs = [0.0f64; 4];
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut terms = Vec::new();
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        // a sign right after the `e` of a mantissa is an exponent, not a new term
        let mut back = s[..i].chars().rev();
        let after_exp = matches!(back.next(), Some('e' | 'E')) && matches!(back.next(), Some(c) if c.is_ascii_digit() || c == '.');
        if (ch == '+' || ch == '-') && i > start && !after_exp {
            terms.push(&s[start..i]);
            start = i;
        }
    }
    terms.push(&s[start..]);
    for t in terms {
        if t.is_empty() {
            return Err(bad("polynomial", text, "empty term"));
        }
        let (coef, power) = match t.find('x') {
            None => (real(t)?, 0usize),
            Some(k) => {
                let c = match t[..k].trim_end_matches('*') {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    num => real(num)?,
                };
                let rest = &t[k + 1..];
                let p = if rest.is_empty() {
                    1
                } else {
                    rest.strip_prefix('^').ok_or_else(|| bad("polynomial", text, "expected ^ after x"))?.parse().map_err(|e| bad("polynomial", text, e))?
                };
                (c, p)
            }
        };
        if power > 3 {
            return Err(bad("polynomial", text, "degree at most 3"));
        }
        coeffs[power] += coef;
    }
    let deg = coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0);
    Ok(coeffs[..=deg].to_vec())
}

/// `gaussian_bump`, `modulated_gaussian:lambda`, `poly:c0,c1,...` or `poly:<expression in x>`.
pub fn phi(text: &str) -> Result<NonlinearitySpec, CliError> {
    let (name, args) = text.split_once(':').unwrap_or((text, ""));
    let spec = match name.trim().to_ascii_lowercase().as_str() {
        "gaussian_bump" | "gaussian" | "bump" => NonlinearitySpec::gaussian_bump(),
        "modulated_gaussian" | "modulated" => NonlinearitySpec::modulated_gaussian(real(args)?)?,
        "poly" | "polynomial" => {
            let coeffs = if args.contains('x') { poly_expression(args)? } else { reals(args)? };
            NonlinearitySpec::polynomial(&coeffs)?
        }
        other => return Err(bad("phi", text, format!("unknown family `{other}`"))),
    };
    Ok(spec)
}

pub fn phi_text(phi: &NonlinearitySpec) -> String {
    match &phi.family {
        PhiFamily::GaussianBump => "gaussian_bump".into(),
        PhiFamily::ModulatedGaussian { lambda } => format!("modulated_gaussian:{lambda}"),
        PhiFamily::Polynomial { coeffs } => {
            let deg = coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0);
            format!("poly:{}", coeffs[..=deg].iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
        }
    }
}
