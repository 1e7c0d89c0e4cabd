use serde::Serialize;

use crate::error::{PclError, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PhiFamily {
    /// e^{-x²/2}
    GaussianBump,
    /// cos(λx) e^{-x²/2}
    ModulatedGaussian { lambda: f64 },
    /// c₀ + c₁x + c₂x² + c₃x³
    Polynomial { coeffs: Vec<f64> },
}

/// The nonlinearity φ plus its regularity tags (γ₀, M₀), which are carried
/// as metadata only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlinearitySpec {
    pub family: PhiFamily,
    pub gamma0: f64,
    pub m0: u32,
}

impl NonlinearitySpec {
    pub fn gaussian_bump() -> Self {
        NonlinearitySpec { family: PhiFamily::GaussianBump, gamma0: 1.0, m0: 0 }
    }

    pub fn modulated_gaussian(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(PclError::invalid("lambda", "must be finite"));
        }
        Ok(NonlinearitySpec { family: PhiFamily::ModulatedGaussian { lambda }, gamma0: 1.0, m0: 0 })
    }

    pub fn polynomial(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > 4 {
            return Err(PclError::invalid("phi", "polynomials need 1 to 4 coefficients (degree at most 3)"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PclError::invalid("phi", "coefficients must be finite"));
        }
        let mut c = coeffs.to_vec();
        c.resize(4, 0.0);
        let degree = coeffs.len() as u32 - 1;
        Ok(NonlinearitySpec { family: PhiFamily::Polynomial { coeffs: c }, gamma0: 0.0, m0: degree })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.family {
            PhiFamily::GaussianBump => (-0.5 * x * x).exp(),
            PhiFamily::ModulatedGaussian { lambda } => (lambda * x).cos() * (-0.5 * x * x).exp(),
            PhiFamily::Polynomial { coeffs } => ((coeffs[3] * x + coeffs[2]) * x + coeffs[1]) * x + coeffs[0],
        }
    }

    /// φ̂ with φ(x) = ∫ φ̂(θ) e^{iθx} dθ; `None` for polynomials.
    pub fn fourier(&self, theta: f64) -> Option<f64> {
        match &self.family {
            PhiFamily::GaussianBump => Some(INV_SQRT_2PI * (-0.5 * theta * theta).exp()),
            PhiFamily::ModulatedGaussian { lambda } => {
                let a = (-0.5 * (theta - lambda).powi(2)).exp();
                let b = (-0.5 * (theta + lambda).powi(2)).exp();
                Some(0.5 * INV_SQRT_2PI * (a + b))
            }
            PhiFamily::Polynomial { .. } => None,
        }
    }

    pub fn has_fourier(&self) -> bool {
        !matches!(self.family, PhiFamily::Polynomial { .. })
    }

    pub fn poly_coeffs(&self) -> Option<[f64; 4]> {
        match &self.family {
            PhiFamily::Polynomial { coeffs } => Some([coeffs[0], coeffs[1], coeffs[2], coeffs[3]]),
            _ => None,
        }
    }

    /// Default θ grid for the Fourier path.
    pub fn theta_grid(&self) -> Option<ThetaGrid> {
        match &self.family {
            PhiFamily::GaussianBump => Some(ThetaGrid::symmetric(8.0, 0.25)),
            PhiFamily::ModulatedGaussian { lambda } => Some(ThetaGrid::symmetric(8.0 + lambda.abs(), 0.25)),
            PhiFamily::Polynomial { .. } => None,
        }
    }
}

/// Symmetric trapezoidal grid on [−Θ, Θ] with step h.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaGrid {
    pub half_width: f64,
    pub step: f64,
}

impl ThetaGrid {
    /// Θ is rounded up to a whole number of steps.
    pub fn symmetric(half_width: f64, step: f64) -> Self {
        let k = (half_width / step).ceil();
        ThetaGrid { half_width: k * step, step }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.half_width > 0.0) || !(self.half_width / self.step <= 1e5) {
            return Err(PclError::invalid("theta_grid", "need a positive step and at most 1e5 steps"));
        }
        Ok(())
    }

    /// Nodes and trapezoid weights.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let k = (self.half_width / self.step).round() as i64;
        (-k..=k)
            .map(|i| {
                let w = if i.abs() == k { 0.5 * self.step } else { self.step };
                (i as f64 * self.step, w)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_inversion_on_grid() {
        for phi in [NonlinearitySpec::gaussian_bump(), NonlinearitySpec::modulated_gaussian(1.5).unwrap()] {
            let grid = phi.theta_grid().unwrap();
            for &x in &[0.0, 0.7, -2.3, 5.0] {
                let re: f64 = grid.nodes().iter().map(|(t, w)| w * phi.fourier(*t).unwrap() * (t * x).cos()).sum();
                assert!((re - phi.eval(x)).abs() < 1e-8, "{x}: {re} vs {}", phi.eval(x));
            }
        }
    }

    #[test]
    fn polynomial_degree_cap() {
        assert!(NonlinearitySpec::polynomial(&[0.0, 0.0, 0.0, 0.0, 1.0]).is_err());
        let p = NonlinearitySpec::polynomial(&[1.0, 0.0, 2.0]).unwrap();
        assert_eq!(p.eval(2.0), 9.0);
        assert!(p.fourier(0.0).is_none());
    }
}
