//! Fermi normal coordinates about a base geodesic.
//!
//! A point with coordinates `(x₁, x₂, x₃)` is reached by following the base
//! geodesic to arclength `x₁` and then the geodesic with initial velocity
//! `x₂E₂ + x₃E₃` for unit parameter time, where `E₂, E₃` are parallel and
//! orthonormal along the base.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::{flow, parallel_transport, GeodesicPath, TransportFrame};
use crate::la::{self, Mat3, Vec3};
use crate::metric::{Aabb, DerivativeMode, Metric};

#[derive(Clone, Debug)]
pub struct FermiChart {
    metric: Arc<dyn Metric>,
    pub base: GeodesicPath,
    /// transported `[E₁ = γ̇₀, E₂, E₃]`
    pub frame: TransportFrame,
    pub r: f64,
    pub transverse_steps: usize,
}

/// Gram–Schmidt of the two coordinate axes least aligned with `u` (unit in `g`).
fn initial_frame(g: &Mat3, u: Vec3) -> Result<(Vec3, Vec3)> {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| u[a].abs().partial_cmp(&u[b].abs()).unwrap().then(a.cmp(&b)));
    let mut axes = [order[0], order[1]];
    axes.sort();
    let unit = |i: usize| {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        e
    };
    let project = |v: Vec3, w: Vec3| la::axpy(v, -la::inner(g, v, w), w);
    let e2 = project(unit(axes[0]), u);
    let n2 = la::inner(g, e2, e2).sqrt();
    let e3 = project(unit(axes[1]), u);
    if n2 < 1e-8 {
        return Err(Error::Invalid("frame degeneracy".into()));
    }
    let e2 = la::scale(e2, 1.0 / n2);
    let e3 = project(e3, e2);
    let n3 = la::inner(g, e3, e3).sqrt();
    if n3 < 1e-8 {
        return Err(Error::Invalid("frame degeneracy".into()));
    }
    let mut e3 = la::scale(e3, 1.0 / n3);
    // right-handed in coordinates
    if la::dot(la::cross(u, e2), e3) < 0.0 {
        e3 = la::scale(e3, -1.0);
    }
    Ok((e2, e3))
}

/// Builds the chart about `base` (any unit-speed path whose `t = 0` is the chart origin).
pub fn build_fermi_chart(base: GeodesicPath, r: f64) -> Result<FermiChart> {
    build_fermi_chart_rotated(base, r, 0.0)
}

/// As [`build_fermi_chart`] with the initial transverse frame rotated by `phi`.
pub fn build_fermi_chart_rotated(base: GeodesicPath, r: f64, phi: f64) -> Result<FermiChart> {
    let metric = base.metric().clone();
    let x0 = base.start();
    let u = base.initial_velocity();
    if la::norm(u) < 1e-12 {
        return Err(Error::Invalid("frame degeneracy: zero tangent".into()));
    }
    let g = metric.g(x0);
    let (a, b) = initial_frame(&g, u)?;
    let (c, s) = (phi.cos(), phi.sin());
    let e2 = la::axpy(la::scale(a, c), s, b);
    let e3 = la::axpy(la::scale(b, c), -s, a);
    let frame = parallel_transport(&base, &[u, e2, e3])?;
    let transverse_steps = ((r / base.h).ceil() as usize).max(16);
    let chart = FermiChart { metric, base, frame, r, transverse_steps };
    // transverse geodesics of length r must stay in the domain
    for k in 0..8 {
        let t = chart.base.t_min() + chart.base.length() * k as f64 / 7.0;
        for j in 0..8 {
            let ang = j as f64 * std::f64::consts::FRAC_PI_4;
            chart.to_ambient([t, r * ang.cos(), r * ang.sin()])?;
        }
    }
    Ok(chart)
}

impl FermiChart {
    pub fn metric(&self) -> &Arc<dyn Metric> {
        &self.metric
    }

    pub fn e(&self, j: usize, x1: f64) -> Vec3 {
        self.frame.at(j, x1)
    }

    pub fn x1_range(&self) -> (f64, f64) {
        (self.base.t_min(), self.base.t_max())
    }

    pub fn to_ambient(&self, c: Vec3) -> Result<Vec3> {
        let p = self.base.position(c[0]);
        if c[1] == 0.0 && c[2] == 0.0 {
            return Ok(p);
        }
        let v = la::axpy(la::scale(self.e(1, c[0]), c[1]), c[2], self.e(2, c[0]));
        let (y, _) = flow(self.metric.as_ref(), p, v, 1.0, self.transverse_steps)?;
        if !self.metric.domain().contains(y) {
            return Err(Error::DomainExit { t: 1.0 });
        }
        Ok(y)
    }

    /// Jacobian `∂(ambient)/∂(Fermi)` by fourth-order central differences.
    pub fn jacobian(&self, c: Vec3) -> Result<Mat3> {
        let e = 1e-3;
        let mut j = [[0.0; 3]; 3];
        for col in 0..3 {
            let at = |o: f64| {
                let mut cc = c;
                cc[col] += o * e;
                self.to_ambient(cc)
            };
            let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
            for row in 0..3 {
                j[row][col] = (m2[row] - 8.0 * m1[row] + 8.0 * p1[row] - p2[row]) / (12.0 * e);
            }
        }
        Ok(j)
    }

    /// Inverse map by damped Newton, seeded by projection onto the base polyline.
    pub fn from_ambient(&self, y: Vec3) -> Result<Vec3> {
        let mut best = (f64::INFINITY, 0usize);
        for (k, x) in self.base.x.iter().enumerate() {
            let d = la::norm(la::sub(*x, y));
            if d < best.0 {
                best = (d, k);
            }
        }
        let k = best.1;
        let s0 = self.base.t[k];
        let g = self.metric.g(self.base.x[k]);
        let d = la::sub(y, self.base.x[k]);
        let mut c = [
            s0 + la::inner(&g, d, self.e(0, s0)),
            la::inner(&g, d, self.e(1, s0)),
            la::inner(&g, d, self.e(2, s0)),
        ];
        let (lo, hi) = self.x1_range();
        c[0] = c[0].clamp(lo, hi);
        let mut res = la::sub(self.to_ambient(c)?, y);
        for _ in 0..50 {
            let rn = la::norm(res);
            if rn < 1e-15 {
                return Ok(c);
            }
            let e = 1e-6;
            let mut jac = [[0.0; 3]; 3];
            for col in 0..3 {
                let mut cp = c;
                let mut cm = c;
                cp[col] += e;
                cm[col] -= e;
                let (a, b) = (self.to_ambient(cp)?, self.to_ambient(cm)?);
                for row in 0..3 {
                    jac[row][col] = (a[row] - b[row]) / (2.0 * e);
                }
            }
            let ji = la::inverse(&jac).ok_or_else(|| Error::NoConvergence("singular chart Jacobian".into()))?;
            let step = la::matvec(&ji, res);
            let mut lam = 1.0;
            let mut accepted = false;
            while lam > 1e-4 {
                let cand = la::axpy(c, -lam, step);
                if let Ok(p) = self.to_ambient(cand) {
                    let rc = la::sub(p, y);
                    if la::norm(rc) < rn {
                        c = cand;
                        res = rc;
                        accepted = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !accepted || la::norm(step) < 1e-14 {
                // no further decrease possible: converged to rounding level or stuck
                return if rn < 1e-11 { Ok(c) } else { Err(Error::NoConvergence(format!("chart inverse residual {rn}"))) };
            }
        }
        if la::norm(res) < 1e-11 {
            Ok(c)
        } else {
            Err(Error::NoConvergence("chart inverse after 50 steps".into()))
        }
    }

    /// Largest `|g(E_i, E_j) − δ_ij|` over the base nodes.
    pub fn frame_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (k, x) in self.base.x.iter().enumerate() {
            let g = self.metric.g(*x);
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((la::inner(&g, self.frame.vecs[k][i], self.frame.vecs[k][j]) - want).abs());
                }
            }
        }
        worst
    }
}

/// The ambient metric expressed in Fermi coordinates.
#[derive(Clone, Debug)]
pub struct FermiMetric {
    pub chart: Arc<FermiChart>,
}

pub fn pullback_metric(chart: Arc<FermiChart>) -> FermiMetric {
    FermiMetric { chart }
}

impl Metric for FermiMetric {
    fn name(&self) -> String {
        format!("fermi[{}]", self.chart.metric.name())
    }

    fn domain(&self) -> Aabb {
        let (lo, hi) = self.chart.x1_range();
        let r = self.chart.r;
        Aabb::new([lo, -r, -r], [hi, r, r])
    }

    fn mode(&self) -> DerivativeMode {
        DerivativeMode::FiniteDifference { h: 1e-3 }
    }

    fn g(&self, x: Vec3) -> Mat3 {
        let eval = || -> Result<Mat3> {
            let j = self.chart.jacobian(x)?;
            let g = self.chart.metric.g(self.chart.to_ambient(x)?);
            Ok(la::matmul(&la::transpose(&j), &la::matmul(&g, &j)))
        };
        eval().unwrap_or([[f64::NAN; 3]; 3])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FermiReport {
    pub metric: String,
    /// `max |Σ_k g_jk x_k − x_j|` (j = 2, 3) and `max |Σ_k g_1k x_k|`
    pub radial_residual: f64,
    /// `max |g − δ|`, `|∂₂ g|`, `|∂₃ g|` on the axis
    pub axis_residual: f64,
    pub roundtrip_error: f64,
    pub frame_error: f64,
    pub samples: usize,
}

/// Halton point in `[0,1)^3`.
pub fn halton(i: usize) -> Vec3 {
    let f = |mut n: usize, b: usize| {
        let (mut r, mut q) = (0.0, 1.0 / b as f64);
        n += 1;
        while n > 0 {
            r += q * (n % b) as f64;
            n /= b;
            q /= b as f64;
        }
        r
    };
    [f(i, 2), f(i, 3), f(i, 5)]
}

/// Checks the radial identity `Σ_{k=2,3} g_jk x_k = x_j` (and `0` for `j = 1`),
/// the axis condition `g = δ` to first transverse order, and chart round trips.
pub fn verify_fermi_conditions(chart: &Arc<FermiChart>, samples: usize) -> Result<FermiReport> {
    let fm = pullback_metric(chart.clone());
    let (lo, hi) = chart.x1_range();
    let margin = 0.1 * (hi - lo);
    let pts: Vec<Vec3> = (0..samples)
        .map(|i| {
            let u = halton(i);
            let rad = 0.9 * chart.r * u[1].sqrt();
            let ang = std::f64::consts::TAU * u[2];
            [lo + margin + (hi - lo - 2.0 * margin) * u[0], rad * ang.cos(), rad * ang.sin()]
        })
        .collect();
    let rows = crate::par::try_map_range(pts.len(), |i| -> Result<(f64, f64, f64)> {
        let x = pts[i];
        let g = fm.g(x);
        let mut radial = 0.0f64;
        for j in 0..3 {
            let s = g[j][1] * x[1] + g[j][2] * x[2];
            let want = if j == 0 { 0.0 } else { x[j] };
            radial = radial.max((s - want).abs());
        }
        let axis_pt = [x[0], 0.0, 0.0];
        let jet = fm.jet(axis_pt, 1);
        let mut axis = 0.0f64;
        for a in 0..3 {
            for b in 0..3 {
                let d = if a == b { 1.0 } else { 0.0 };
                axis = axis.max((jet.g[a][b] - d).abs()).max(jet.d1[1][a][b].abs()).max(jet.d1[2][a][b].abs());
            }
        }
        let y = chart.to_ambient(x)?;
        let back = chart.from_ambient(y)?;
        Ok((radial, axis, la::norm(la::sub(back, x))))
    })?;
    let fold = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(FermiReport {
        metric: chart.metric.name(),
        radial_residual: fold(|r| r.0),
        axis_residual: fold(|r| r.1),
        roundtrip_error: fold(|r| r.2),
        frame_error: chart.frame_error(),
        samples,
    })
}
