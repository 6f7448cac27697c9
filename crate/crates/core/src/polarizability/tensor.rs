use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use super::{BChain, MaterialContrast};
use crate::geometry::{QuadratureSpec, SurfaceMesh};
use crate::{Background, CTensor, CVec3, Error, Result};

/// A 3×3 polarizability tensor together with the convergence record of its series.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizabilityTensor {
    pub tensor: CTensor,
    /// Series order n of the last approximation α⁽ⁿ⁾.
    pub order: usize,
    /// Ratio of the last two successive corrections (0 when undefined).
    pub q_hat: f64,
    /// Geometric-tail estimate of the truncation error (Frobenius norm).
    pub error_estimate: f64,
    /// ‖α⁽ᵏ⁾ − α⁽ᵏ⁻¹⁾‖ for k = 2..=n.
    pub corrections: Vec<f64>,
}

impl PolarizabilityTensor {
    pub fn zero() -> Self {
        Self {
            tensor: CTensor::zeros(),
            order: 0,
            q_hat: 0.0,
            error_estimate: 0.0,
            corrections: Vec::new(),
        }
    }

    pub fn from_tensor(tensor: CTensor) -> Self {
        Self { tensor, ..Self::zero() }
    }

    /// Ratios of successive corrections.
    pub fn correction_ratios(&self) -> Vec<f64> {
        self.corrections
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }

    /// Writes the tensor as three CSV rows of `re,im` pairs, preceded by `#` metadata lines.
    pub fn write_csv<W: Write>(&self, mut w: W, refinement: Option<u32>) -> Result<()> {
        writeln!(w, "# n={}", self.order)?;
        writeln!(w, "# q_hat={:.17e}", self.q_hat)?;
        writeln!(w, "# error_estimate={:.17e}", self.error_estimate)?;
        match refinement {
            Some(r) => writeln!(w, "# refinement={r}")?,
            None => writeln!(w, "# refinement=none")?,
        }
        write_complex_rows(&mut w, self.tensor.as_slice(), 3, 3)
    }
}

/// Row-major `re,im` CSV rows of a column-major `rows × cols` complex matrix.
pub(crate) fn write_complex_rows<W: Write>(w: &mut W, column_major: &[Complex64], rows: usize, cols: usize) -> Result<()> {
    for i in 0..rows {
        let line: Vec<String> = (0..cols)
            .flat_map(|j| {
                let z = column_major[i + rows * j];
                [format!("{:.17e}", z.re), format!("{:.17e}", z.im)]
            })
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// (γ^{n+2} − γ^{m+1})/(γ − 1) = Σ_{l=m+1}^{n+1} γ^l, summed explicitly near γ = 1.
fn geometric_factor(gamma: Complex64, n: usize, m: usize) -> Complex64 {
    if (gamma - 1.0).norm() < 1e-8 {
        (m + 1..=n + 1).map(|l| gamma.powu(l as u32)).sum()
    } else {
        (gamma.powu(n as u32 + 2) - gamma.powu(m as u32 + 1)) / (gamma - 1.0)
    }
}

impl BChain {
    /// α⁽ⁿ⁾(γ) = (2/V) Σ_{m=0}^{n} (−1/2π)^m [(γ^{n+2} − γ^{m+1})/(γ − 1)] b⁽ᵐ⁾.
    fn alpha_term(&self, gamma: Complex64, n: usize) -> CTensor {
        let mut acc = CTensor::zeros();
        for (m, b) in self.tensors().iter().take(n + 1).enumerate() {
            let c = geometric_factor(gamma, n, m) * (-1.0 / (2.0 * PI)).powi(m as i32);
            acc += b.map(|x| Complex64::new(x, 0.0)) * c;
        }
        acc * Complex64::new(2.0 / self.volume(), 0.0)
    }

    /// n-th approximation of α(γ), with q̂ and error estimate from the corrections of the
    /// lower orders.
    pub fn alpha(&self, gamma: Complex64, n: usize) -> Result<PolarizabilityTensor> {
        if n < 1 {
            return Err(Error::InvalidArgument("series order must be at least 1".into()));
        }
        if n > self.max_order() {
            return Err(Error::InvalidArgument(format!(
                "series order {n} exceeds the chain length {}",
                self.max_order()
            )));
        }
        if !(gamma.norm() <= 1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("|γ| = {} exceeds 1", gamma.norm())));
        }
        let approx: Vec<CTensor> = (1..=n).map(|k| self.alpha_term(gamma, k)).collect();
        let corrections: Vec<f64> = approx.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let q_hat = match corrections.as_slice() {
            [.., a, b] if *a > 0.0 => b / a,
            _ => 0.0,
        };
        let growing = corrections.windows(4).any(|w| w[0] < w[1] && w[1] < w[2] && w[2] < w[3]);
        if growing {
            return Err(Error::SeriesDivergence { q_hat });
        }
        let last = corrections.last().copied().unwrap_or(0.0);
        let error_estimate = if q_hat < 1.0 { last * q_hat / (1.0 - q_hat) } else { last };
        Ok(PolarizabilityTensor {
            tensor: *approx.last().expect("n >= 1"),
            order: n,
            q_hat,
            error_estimate,
            corrections,
        })
    }

    /// β = α(−1)·[skin regime] + α(γ_μ)·[μ ≠ μ₀].
    pub fn beta(&self, contrast: &MaterialContrast, characteristic_dimension: f64, n: usize) -> Result<PolarizabilityTensor> {
        let mut parts = Vec::new();
        if contrast.skin_regime(characteristic_dimension) {
            parts.push(self.alpha(Complex64::new(-1.0, 0.0), n)?);
        }
        let gamma_mu = contrast.gamma_mu()?;
        if gamma_mu != Complex64::new(0.0, 0.0) {
            parts.push(self.alpha(gamma_mu, n)?);
        }
        let mut out = PolarizabilityTensor { order: n, ..PolarizabilityTensor::zero() };
        for p in parts {
            out.tensor += p.tensor;
            out.q_hat = out.q_hat.max(p.q_hat);
            out.error_estimate += p.error_estimate;
            if out.corrections.is_empty() {
                out.corrections = p.corrections;
            } else {
                for (a, b) in out.corrections.iter_mut().zip(&p.corrections) {
                    *a += b;
                }
            }
        }
        Ok(out)
    }
}

/// α⁽ⁿ⁾(γ) for a mesh. Builds the chain up to order n; use [`BChain`] directly to reuse it.
pub fn alpha_approx(mesh: &SurfaceMesh, gamma: Complex64, n: usize, spec: &QuadratureSpec) -> Result<PolarizabilityTensor> {
    if n < 1 {
        return Err(Error::InvalidArgument("series order must be at least 1".into()));
    }
    if gamma.norm() == 0.0 {
        return Ok(PolarizabilityTensor { order: n, ..PolarizabilityTensor::zero() });
    }
    BChain::compute(mesh, n, spec)?.alpha(gamma, n)
}

/// Magnetic polarizability β of a mesh for the given material.
pub fn beta_tensor(mesh: &SurfaceMesh, contrast: &MaterialContrast, spec: &QuadratureSpec, n: usize) -> Result<PolarizabilityTensor> {
    let skin = contrast.skin_regime(mesh.characteristic_dimension());
    if !skin && contrast.gamma_mu()? == Complex64::new(0.0, 0.0) {
        return Ok(PolarizabilityTensor { order: n, ..PolarizabilityTensor::zero() });
    }
    BChain::compute(mesh, n, spec)?.beta(contrast, mesh.characteristic_dimension(), n)
}

/// Closed-form ball polarizability 3(ε − ε₀)/(ε + 2ε₀) (per unit volume, relative to ε₀).
pub fn ball_polarizability(eps: Complex64, eps0: f64) -> Complex64 {
    (eps - eps0) * 3.0 / (eps + 2.0 * eps0)
}

/// P = α V ε₀ E and M = β V μ₀ H.
pub fn induced_moments(alpha: &CTensor, beta: &CTensor, volume: f64, e: &CVec3, h: &CVec3, background: &Background) -> (CVec3, CVec3) {
    let p = alpha * e * Complex64::new(volume * background.eps0, 0.0);
    let m = beta * h * Complex64::new(volume * background.mu0, 0.0);
    (p, m)
}
