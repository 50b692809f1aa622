//! Curvature classifiers along geodesics and validation of geodesic Taylor coefficients.
//!
//! `ρ(x₁, ψ) = ½ (cos ψ ∂₂ + sin ψ ∂₃)(sin ψ ∂₂ − cos ψ ∂₃) g₁₁` on the axis of a
//! Fermi chart. Equivalently `ρ = −Rm(E₁, X, E₁, Y)` with `X = cos ψ E₂ + sin ψ E₃`
//! and `Y = sin ψ E₂ − cos ψ E₃` in the parallel frame, which is what the chart
//! based routines evaluate.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fermi::FermiChart;
use crate::geodesic::{integrate_span, taylor_of, GeodesicPath, TAYLOR_STENCIL};
use crate::la::{self, Vec3};
use crate::metric::{curvature, Metric};

/// `ρ` from second transverse derivatives of `g₁₁` of a metric already in Fermi form.
pub fn rho<M: Metric + ?Sized>(m_fermi: &M, x1: f64, psi: f64) -> f64 {
    let jet = m_fermi.jet([x1, 0.0, 0.0], 2);
    let (s, c) = psi.sin_cos();
    let (g22, g33, g23) = (jet.d2[1][1][0][0], jet.d2[2][2][0][0], jet.d2[1][2][0][0]);
    0.5 * (c * s * (g22 - g33) + (s * s - c * c) * g23)
}

/// `Rm(a, b, c, d)` contracted in ambient coordinates at `x`.
fn riemann_form<M: Metric + ?Sized>(m: &M, x: Vec3, a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> Result<f64> {
    let cd = curvature(m, x)?;
    let mut s = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                for n in 0..3 {
                    s += cd.riemann[i][k][l][n] * a[i] * b[k] * c[l] * d[n];
                }
            }
        }
    }
    Ok(s)
}

/// `ρ(x₁, ψ)` along the chart's base geodesic via the curvature tensor.
pub fn rho_chart(chart: &FermiChart, x1: f64, psi: f64) -> Result<f64> {
    let (s, c) = psi.sin_cos();
    let (e1, e2, e3) = (chart.e(0, x1), chart.e(1, x1), chart.e(2, x1));
    let xv = la::axpy(la::scale(e2, c), s, e3);
    let yv = la::axpy(la::scale(e2, s), -c, e3);
    Ok(-riemann_form(chart.metric().as_ref(), chart.base.position(x1), e1, xv, e1, yv)?)
}

/// `∂ρ/∂x₁` by central differences (one-sided at the ends of the base).
pub fn rho_prime_chart(chart: &FermiChart, x1: f64, psi: f64) -> Result<f64> {
    let e = 1e-4;
    let (lo, hi) = chart.x1_range();
    let a = (x1 - e).max(lo);
    let b = (x1 + e).min(hi);
    Ok((rho_chart(chart, b, psi)? - rho_chart(chart, a, psi)?) / (b - a))
}

/// Off-diagonal Ricci component `Ric(E₂, E₃)` along the base.
pub fn ricci23_chart(chart: &FermiChart, x1: f64) -> Result<f64> {
    let x = chart.base.position(x1);
    let cd = curvature(chart.metric().as_ref(), x)?;
    let (e2, e3) = (chart.e(1, x1), chart.e(2, x1));
    Ok(la::dot(e2, la::matvec(&cd.ricci, e3)))
}

#[derive(Clone, Debug, Serialize)]
pub struct ChaoticMargin {
    pub metric: String,
    pub n_t: usize,
    pub n_psi: usize,
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    /// `|ρ| + |∂ρ/∂x₁|`, row-major in `(t, ψ)`
    pub values: Vec<f64>,
    pub min: f64,
    pub argmin: (f64, f64),
    /// `max |Ric₂₃ − ρ(·, 0)|` over the t-grid
    pub ricci_slice_gap: f64,
}

/// Grid minimum of `|ρ| + |∂ρ/∂x₁|` over the chart's base; `n_psi` points in
/// `[0, π)` and `per_unit` t-samples per unit length.
pub fn chaotic_margin(chart: &FermiChart, n_psi: usize, per_unit: usize) -> Result<ChaoticMargin> {
    let (lo, hi) = chart.x1_range();
    let n_t = ((hi - lo) * per_unit as f64).ceil().max(2.0) as usize;
    let ts: Vec<f64> = (0..n_t).map(|i| lo + (hi - lo) * i as f64 / (n_t - 1) as f64).collect();
    let psis: Vec<f64> = (0..n_psi).map(|j| PI * j as f64 / n_psi as f64).collect();
    let rows = crate::par::try_map_range(n_t, |i| -> Result<(Vec<f64>, f64)> {
        let t = ts[i];
        let vals = psis
            .iter()
            .map(|&p| Ok(rho_chart(chart, t, p)?.abs() + rho_prime_chart(chart, t, p)?.abs()))
            .collect::<Result<Vec<f64>>>()?;
        let gap = (ricci23_chart(chart, t)? - rho_chart(chart, t, 0.0)?).abs();
        Ok((vals, gap))
    })?;
    let mut values = Vec::with_capacity(n_t * n_psi);
    let mut min = (f64::INFINITY, (0.0, 0.0));
    let mut gap = 0.0f64;
    for (i, (row, g)) in rows.into_iter().enumerate() {
        gap = gap.max(g);
        for (j, v) in row.into_iter().enumerate() {
            if v < min.0 {
                min = (v, (ts[i], psis[j]));
            }
            values.push(v);
        }
    }
    Ok(ChaoticMargin {
        metric: chart.metric().name(),
        n_t,
        n_psi,
        t: ts,
        psi: psis,
        values,
        min: min.0,
        argmin: min.1,
        ricci_slice_gap: gap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VariablyCurvedReport {
    pub verdict: bool,
    pub worst_margin: f64,
    pub margins: Vec<f64>,
}

/// True iff every sampled geodesic has chaotic margin at least `tol`.
pub fn is_variably_curved(geodesics: &[GeodesicPath], r: f64, tol: f64) -> Result<VariablyCurvedReport> {
    if geodesics.is_empty() {
        return Err(Error::Invalid("no geodesics".into()));
    }
    let margins = geodesics
        .iter()
        .map(|g| {
            let chart = crate::fermi::build_fermi_chart(g.clone(), r)?;
            Ok(chaotic_margin(&chart, 64, 64)?.min)
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(VariablyCurvedReport { verdict: worst >= tol, worst_margin: worst, margins })
}

/// Third and fourth transverse Taylor coefficients of the geodesic through
/// `(x₁, 0, 0)` tilted by `θ` in the direction `ψ`, in chart coordinates.
pub fn tilted_taylor(chart: &FermiChart, x1: f64, psi: f64, theta: f64) -> Result<(f64, f64)> {
    let m = chart.metric();
    let (s, c) = psi.sin_cos();
    let tilt = la::axpy(la::scale(chart.e(1, x1), c), s, chart.e(2, x1));
    let v = la::axpy(la::scale(chart.e(0, x1), theta.cos()), theta.sin(), tilt);
    let reach = 2.5 * TAYLOR_STENCIL;
    let path = integrate_span(m, chart.base.position(x1), v, -reach, reach, chart.base.h)?;
    let dir = [0.0, -s, c];
    let err = std::cell::Cell::new(None);
    let f = |t: f64| match chart.from_ambient(path.position(t)) {
        Ok(p) => p,
        Err(e) => {
            err.set(Some(e.to_string()));
            [f64::NAN; 3]
        }
    };
    let coeffs = taylor_of(&f, 4, dir, TAYLOR_STENCIL)?;
    if let Some(e) = err.take() {
        return Err(Error::NoConvergence(e));
    }
    Ok((coeffs[2], coeffs[3]))
}

/// Extrapolates `values[i] ≈ L + a θ_i² + b θ_i⁴ + …` to `θ = 0` (Neville in `θ²`).
pub fn extrapolate_theta(thetas: &[f64], values: &[f64]) -> f64 {
    let n = thetas.len();
    let mut p = values.to_vec();
    let z: Vec<f64> = thetas.iter().map(|t| t * t).collect();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (z[i + k] * p[i] - z[i] * p[i + 1]) / (z[i + k] - z[i]);
        }
    }
    p[0]
}

#[derive(Clone, Debug, Serialize)]
pub struct TaylorReport {
    pub metric: String,
    pub x1: f64,
    pub psi: f64,
    pub thetas: Vec<f64>,
    pub third_normalized: Vec<f64>,
    pub fourth_normalized: Vec<f64>,
    pub third_limit: f64,
    pub fourth_limit: f64,
    pub rho: f64,
    pub rho_prime: f64,
    /// sign relating the third-order limit to ρ (0 when ρ is too small to tell)
    pub sigma: i32,
    pub third_rel_error: f64,
    pub fourth_rel_error: f64,
}

/// Sign relating measured third derivatives to `ρ`; fixed by calibration on the
/// sogge example with the engine's `γ̈ = −Γ(γ̇, γ̇)` convention.
pub const SIGMA: f64 = -1.0;

/// Measures normalized third/fourth transverse derivatives for each `θ`,
/// extrapolates to `θ → 0` and compares with `σρ` and `2σρ′`.
pub fn taylor_validate(chart: &FermiChart, x1: f64, psi: f64, thetas: &[f64]) -> Result<TaylorReport> {
    if thetas.len() < 2 || thetas.windows(2).any(|w| w[1] >= w[0]) || thetas.iter().any(|&t| !(t > 0.0 && t <= 0.3)) {
        return Err(Error::Invalid("θ list must be descending in (0, 0.3] with at least two entries".into()));
    }
    let thetas: Vec<f64> = thetas.iter().map(|t| t.max(0.02)).collect();
    let rows = crate::par::try_map_slice(&thetas, |&th| tilted_taylor(chart, x1, psi, th))?;
    let third: Vec<f64> = rows.iter().zip(&thetas).map(|(r, t)| r.0 / (t.cos().powi(2) * t.sin())).collect();
    let fourth: Vec<f64> = rows.iter().zip(&thetas).map(|(r, t)| r.1 / (t.cos().powi(3) * t.sin())).collect();
    let l3 = extrapolate_theta(&thetas, &third);
    let l4 = extrapolate_theta(&thetas, &fourth);
    let rho = rho_chart(chart, x1, psi)?;
    let rho_p = rho_prime_chart(chart, x1, psi)?;
    let sigma = if rho.abs() > 1e-6 && l3.abs() > 1e-9 { (l3 / rho).signum() as i32 } else { 0 };
    let rel = |got: f64, want: f64| if want.abs() > 1e-12 { (got - want).abs() / want.abs() } else { got.abs() };
    Ok(TaylorReport {
        metric: chart.metric().name(),
        x1,
        psi,
        thetas: thetas.clone(),
        third_normalized: third,
        fourth_normalized: fourth,
        third_limit: l3,
        fourth_limit: l4,
        rho,
        rho_prime: rho_p,
        sigma,
        third_rel_error: rel(l3, SIGMA * rho),
        fourth_rel_error: rel(l4, SIGMA * 2.0 * rho_p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermi::build_fermi_chart;
    use crate::geodesic::DEFAULT_STEP;
    use crate::metric::{BuiltinKind, BuiltinMetric};
    use std::sync::Arc;

    fn axis_chart(kind: BuiltinKind, lo: f64, hi: f64) -> FermiChart {
        let m: Arc<dyn Metric> = Arc::new(BuiltinMetric::new(kind).unwrap());
        let base = integrate_span(&m, [0.0; 3], [1.0, 0.0, 0.0], lo, hi, DEFAULT_STEP).unwrap();
        build_fermi_chart(base, 0.3).unwrap()
    }

    #[test]
    fn sogge_rho_closed_form() {
        let m = BuiltinMetric::new(BuiltinKind::Sogge).unwrap();
        let c = axis_chart(BuiltinKind::Sogge, -1.0, 1.0);
        for (x1, psi) in [(0.0f64, 0.0f64), (0.7, 0.4), (-0.3, 2.0), (0.9, 1.1)] {
            let want = (2.0 * psi - x1).sin();
            assert!((rho(&m, x1, psi) - want).abs() < 1e-12);
            assert!((rho_chart(&c, x1, psi).unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn euclidean_margin_is_zero() {
        let c = axis_chart(BuiltinKind::Euclidean, -0.5, 0.5);
        let mg = chaotic_margin(&c, 16, 8).unwrap();
        assert_eq!(mg.min, 0.0);
    }

    #[test]
    fn neville_recovers_limit() {
        let th = [0.1, 0.05, 0.025];
        let v: Vec<f64> = th.iter().map(|t: &f64| 2.0 + 3.0 * t * t - 5.0 * t.powi(4)).collect();
        assert!((extrapolate_theta(&th, &v) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sogge_third_order_sign() {
        let c = axis_chart(BuiltinKind::Sogge, -0.5, 1.2);
        let rep = taylor_validate(&c, 0.7, 0.4, &[0.1, 0.05, 0.025]).unwrap();
        assert_eq!(rep.sigma, -1, "{rep:?}");
        assert!(rep.third_rel_error < 1e-3, "{rep:?}");
    }
}
