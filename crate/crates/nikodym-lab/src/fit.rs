//! Ordinary least squares on `(log δ, log value)`.

use anyhow::{bail, Result};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// half-width of the 95% confidence interval on the slope
    pub band95: f64,
    /// root-mean-square residual in log space
    pub residual: f64,
    pub points: usize,
}

impl LogLogFit {
    pub fn within(&self, expected: f64, tol: f64) -> bool {
        (self.slope - expected).abs() <= tol
    }
}

/// Fits `log y = slope · log x + intercept`; needs at least three positive points.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        bail!("fit needs equal-length inputs");
    }
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite()).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len();
    if n < 3 {
        bail!("degenerate fit: {n} usable points, need at least 3");
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        bail!("degenerate fit: all abscissae equal");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let dof = nf - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).expect("dof ≥ 1").inverse_cdf(0.975);
    Ok(LogLogFit { slope, intercept, band95: t * se, residual: (sse / nf).sqrt(), points: n })
}
