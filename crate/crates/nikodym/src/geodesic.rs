//! Geodesic integration, dense output, parallel transport and Taylor extraction.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::la::{self, Vec3};
use crate::metric::{christoffel_from, Metric};

pub const DEFAULT_STEP: f64 = 1e-3;

/// Coordinate acceleration `−Γ^k_ij v^i v^j`.
pub fn acceleration<M: Metric + ?Sized>(m: &M, x: Vec3, v: Vec3) -> Result<Vec3> {
    let (g, d1) = m.jet1(x);
    // w_l = Γ_ijl v^i v^j = Σ ∂_j g_il v^i v^j − ½ Σ ∂_l g_ij v^i v^j
    let mut w = [0.0; 3];
    for (l, wl) in w.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += (d1[j][i][l] - 0.5 * d1[l][i][j]) * v[i] * v[j];
            }
        }
        *wl = s;
    }
    if !la::is_positive_definite(&g) {
        return Err(Error::Singular(x));
    }
    let gi = la::inverse(&g).ok_or(Error::Singular(x))?;
    Ok(la::scale(la::matvec(&gi, w), -1.0))
}

#[inline]
fn rk4_step<M: Metric + ?Sized>(m: &M, x: Vec3, v: Vec3, dt: f64) -> Result<(Vec3, Vec3)> {
    let k1x = v;
    let k1v = acceleration(m, x, v)?;
    let x2 = la::axpy(x, 0.5 * dt, k1x);
    let v2 = la::axpy(v, 0.5 * dt, k1v);
    let k2v = acceleration(m, x2, v2)?;
    let x3 = la::axpy(x, 0.5 * dt, v2);
    let v3 = la::axpy(v, 0.5 * dt, k2v);
    let k3v = acceleration(m, x3, v3)?;
    let x4 = la::axpy(x, dt, v3);
    let v4 = la::axpy(v, dt, k3v);
    let k4v = acceleration(m, x4, v4)?;
    let xn = std::array::from_fn(|i| x[i] + dt / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]));
    let vn = std::array::from_fn(|i| v[i] + dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]));
    Ok((xn, vn))
}

/// Geodesic flow for parameter time `t` in `n` RK4 steps, without normalizing `v`.
/// Returns the final position and velocity.
pub fn flow<M: Metric + ?Sized>(m: &M, x: Vec3, v: Vec3, t: f64, n: usize) -> Result<(Vec3, Vec3)> {
    let dt = t / n.max(1) as f64;
    let (mut x, mut v) = (x, v);
    for _ in 0..n.max(1) {
        (x, v) = rk4_step(m, x, v, dt)?;
    }
    Ok((x, v))
}

/// `|v|_g` at `x`.
pub fn speed<M: Metric + ?Sized>(m: &M, x: Vec3, v: Vec3) -> f64 {
    la::inner(&m.g(x), v, v).sqrt()
}

/// Arclength-parameterized geodesic with dense output on `[t_min, t_max]`.
#[derive(Clone)]
pub struct GeodesicPath {
    metric: Arc<dyn Metric>,
    pub h: f64,
    pub t: Vec<f64>,
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub a: Vec<Vec3>,
    /// index of the node at `t = 0`
    origin: usize,
}

impl std::fmt::Debug for GeodesicPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeodesicPath")
            .field("metric", &self.metric.name())
            .field("t_min", &self.t_min())
            .field("t_max", &self.t_max())
            .field("h", &self.h)
            .finish()
    }
}

fn one_side<M: Metric + ?Sized>(m: &M, x0: Vec3, v0: Vec3, span: f64, h: f64) -> Result<Vec<(f64, Vec3, Vec3, Vec3)>> {
    let n = (span.abs() / h).ceil().max(1.0) as usize;
    let dt = span / n as f64;
    let dom = m.domain();
    let mut out = Vec::with_capacity(n + 1);
    let (mut x, mut v) = (x0, v0);
    out.push((0.0, x, v, acceleration(m, x, v)?));
    for k in 1..=n {
        (x, v) = rk4_step(m, x, v, dt)?;
        let t = k as f64 * dt;
        if !dom.contains(x) || !x.iter().all(|c| c.is_finite()) {
            return Err(Error::DomainExit { t });
        }
        out.push((t, x, v, acceleration(m, x, v)?));
    }
    Ok(out)
}

/// Integrates the unit-speed geodesic through `x0` with direction `v0` over `[0, alpha]`.
pub fn integrate_geodesic(m: &Arc<dyn Metric>, x0: Vec3, v0: Vec3, alpha: f64, h: f64) -> Result<GeodesicPath> {
    integrate_span(m, x0, v0, 0.0, alpha, h)
}

/// Two-sided integration over `[t_lo, t_hi]` with `t_lo ≤ 0 ≤ t_hi`.
pub fn integrate_span(m: &Arc<dyn Metric>, x0: Vec3, v0: Vec3, t_lo: f64, t_hi: f64, h: f64) -> Result<GeodesicPath> {
    if !(t_lo <= 0.0 && t_hi >= 0.0 && t_hi > t_lo) {
        return Err(Error::Invalid(format!("bad span [{t_lo}, {t_hi}]")));
    }
    if !(h > 0.0) {
        return Err(Error::Invalid("step must be positive".into()));
    }
    if !m.domain().contains(x0) {
        return Err(Error::DomainExit { t: 0.0 });
    }
    let s = speed(m.as_ref(), x0, v0);
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Invalid("zero initial velocity".into()));
    }
    let v0 = la::scale(v0, 1.0 / s);
    let back = if t_lo < 0.0 { one_side(m.as_ref(), x0, v0, t_lo, h)? } else { vec![] };
    let fwd = if t_hi > 0.0 { one_side(m.as_ref(), x0, v0, t_hi, h)? } else { vec![] };
    let mut nodes: Vec<_> = back.into_iter().skip(1).rev().collect();
    let origin = nodes.len();
    if fwd.is_empty() {
        nodes.push((0.0, x0, v0, acceleration(m.as_ref(), x0, v0)?));
    } else {
        nodes.extend(fwd);
    }
    Ok(GeodesicPath {
        metric: m.clone(),
        h,
        t: nodes.iter().map(|n| n.0).collect(),
        x: nodes.iter().map(|n| n.1).collect(),
        v: nodes.iter().map(|n| n.2).collect(),
        a: nodes.iter().map(|n| n.3).collect(),
        origin,
    })
}

impl GeodesicPath {
    pub fn metric(&self) -> &Arc<dyn Metric> {
        &self.metric
    }

    pub fn t_min(&self) -> f64 {
        self.t[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        self.t_max() - self.t_min()
    }

    pub fn start(&self) -> Vec3 {
        self.x[self.origin]
    }

    pub fn initial_velocity(&self) -> Vec3 {
        self.v[self.origin]
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.t.len();
        if n < 2 {
            return 0;
        }
        match self.t.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Position and velocity at `t` by quintic Hermite interpolation (clamped to the span).
    pub fn state(&self, t: f64) -> (Vec3, Vec3) {
        if self.t.len() < 2 {
            return (self.x[0], self.v[0]);
        }
        let t = t.clamp(self.t_min(), self.t_max());
        let k = self.segment(t);
        let dt = self.t[k + 1] - self.t[k];
        let s = (t - self.t[k]) / dt;
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);
        let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
        let h3 = 0.5 * s3 - s4 + 0.5 * s5;
        let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let d0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
        let d1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
        let d2 = s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4;
        let d3 = 1.5 * s2 - 4.0 * s3 + 2.5 * s4;
        let d4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
        let d5 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
        let (x0, x1, v0, v1, a0, a1) = (self.x[k], self.x[k + 1], self.v[k], self.v[k + 1], self.a[k], self.a[k + 1]);
        let pos = std::array::from_fn(|i| {
            h0 * x0[i] + h5 * x1[i] + dt * (h1 * v0[i] + h4 * v1[i]) + dt * dt * (h2 * a0[i] + h3 * a1[i])
        });
        let vel = std::array::from_fn(|i| {
            (d0 * x0[i] + d5 * x1[i]) / dt + d1 * v0[i] + d4 * v1[i] + dt * (d2 * a0[i] + d3 * a1[i])
        });
        (pos, vel)
    }

    pub fn position(&self, t: f64) -> Vec3 {
        self.state(t).0
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        self.state(t).1
    }

    /// Largest `|g(γ̇,γ̇) − 1|` over the nodes.
    pub fn energy_drift(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.v)
            .map(|(x, v)| (la::inner(&self.metric.g(*x), *v, *v) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Integrates back from the far end with reversed velocity and returns the
    /// distance from the arrival point to the start.
    pub fn reversal_error(&self) -> Result<f64> {
        let (xe, ve) = (*self.x.last().unwrap(), *self.v.last().unwrap());
        let back = integrate_geodesic(&self.metric, xe, la::scale(ve, -1.0), self.length(), self.h)?;
        Ok(la::norm(la::sub(*back.x.last().unwrap(), self.x[0])))
    }

    /// Polyline samples `(t, x)` at spacing at most `ds`.
    pub fn samples(&self, ds: f64) -> Vec<(f64, Vec3)> {
        let n = (self.length() / ds).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| {
                let t = self.t_min() + self.length() * i as f64 / n as f64;
                (t, self.position(t))
            })
            .collect()
    }
}

/// Vectors parallel-transported along a path, stored at the path's nodes.
#[derive(Clone, Debug)]
pub struct TransportFrame {
    pub t: Vec<f64>,
    pub vecs: Vec<Vec<Vec3>>,
    pub dvecs: Vec<Vec<Vec3>>,
}

fn transport_rhs<M: Metric + ?Sized>(m: &M, x: Vec3, gdot: Vec3, xs: &[Vec3]) -> Result<Vec<Vec3>> {
    let (g, d1) = m.jet1(x);
    let ch = christoffel_from(&g, &d1, x)?;
    Ok(xs
        .iter()
        .map(|xv| {
            std::array::from_fn(|i| {
                let mut s = 0.0;
                for j in 0..3 {
                    for k in 0..3 {
                        s += ch.upper[j][k][i] * gdot[j] * xv[k];
                    }
                }
                -s
            })
        })
        .collect())
}

/// Transports each of `x0` (given at `t = 0`) along the whole path:
/// `dX^i/dt = −Γ^i_jk γ̇^j X^k`.
pub fn parallel_transport(path: &GeodesicPath, x0: &[Vec3]) -> Result<TransportFrame> {
    let m = path.metric.as_ref();
    let n = path.t.len();
    let mut vecs = vec![Vec::new(); n];
    let mut dvecs = vec![Vec::new(); n];
    let o = path.origin;
    vecs[o] = x0.to_vec();
    dvecs[o] = transport_rhs(m, path.x[o], path.v[o], x0)?;
    let step = |from: usize, to: usize, cur: &[Vec3]| -> Result<Vec<Vec3>> {
        let (ta, tb) = (path.t[from], path.t[to]);
        let dt = tb - ta;
        let (xm, vm) = path.state(0.5 * (ta + tb));
        let k1 = transport_rhs(m, path.x[from], path.v[from], cur)?;
        let y2: Vec<Vec3> = cur.iter().zip(&k1).map(|(c, k)| la::axpy(*c, 0.5 * dt, *k)).collect();
        let k2 = transport_rhs(m, xm, vm, &y2)?;
        let y3: Vec<Vec3> = cur.iter().zip(&k2).map(|(c, k)| la::axpy(*c, 0.5 * dt, *k)).collect();
        let k3 = transport_rhs(m, xm, vm, &y3)?;
        let y4: Vec<Vec3> = cur.iter().zip(&k3).map(|(c, k)| la::axpy(*c, dt, *k)).collect();
        let k4 = transport_rhs(m, path.x[to], path.v[to], &y4)?;
        Ok((0..cur.len())
            .map(|j| std::array::from_fn(|i| cur[j][i] + dt / 6.0 * (k1[j][i] + 2.0 * k2[j][i] + 2.0 * k3[j][i] + k4[j][i])))
            .collect())
    };
    for k in o + 1..n {
        let next = step(k - 1, k, &vecs[k - 1])?;
        dvecs[k] = transport_rhs(m, path.x[k], path.v[k], &next)?;
        vecs[k] = next;
    }
    for k in (0..o).rev() {
        let next = step(k + 1, k, &vecs[k + 1])?;
        dvecs[k] = transport_rhs(m, path.x[k], path.v[k], &next)?;
        vecs[k] = next;
    }
    Ok(TransportFrame { t: path.t.clone(), vecs, dvecs })
}

impl TransportFrame {
    /// Transported vector `j` at `t` (cubic Hermite between nodes).
    pub fn at(&self, j: usize, t: f64) -> Vec3 {
        let n = self.t.len();
        if n < 2 {
            return self.vecs[0][j];
        }
        let t = t.clamp(self.t[0], self.t[n - 1]);
        let k = match self.t.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let dt = self.t[k + 1] - self.t[k];
        let s = (t - self.t[k]) / dt;
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        let (a, b, da, db) = (self.vecs[k][j], self.vecs[k + 1][j], self.dvecs[k][j], self.dvecs[k + 1][j]);
        std::array::from_fn(|i| h00 * a[i] + h01 * b[i] + dt * (h10 * da[i] + h11 * db[i]))
    }

    pub fn len(&self) -> usize {
        self.vecs.first().map_or(0, |v| v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Base stencil step for [`taylor_coefficients`]; the path must cover `[−2s, 2s]`.
pub const TAYLOR_STENCIL: f64 = 0.04;

/// `d^k/dt^k ⟨f(t), dir⟩` at `t = 0` for `k = 1..=order` (`order ≤ 4`) from
/// central differences of a smooth curve `f`, Richardson-extrapolated twice.
pub fn taylor_of(f: &dyn Fn(f64) -> Vec3, order: usize, dir: Vec3, s: f64) -> Result<Vec<f64>> {
    if order > 4 || order == 0 {
        return Err(Error::Invalid(format!("taylor order {order} not in 1..=4")));
    }
    let c = |t: f64| la::dot(f(t), dir);
    let raw = |k: usize, s: f64| -> f64 {
        match k {
            1 => (c(s) - c(-s)) / (2.0 * s),
            2 => (c(s) - 2.0 * c(0.0) + c(-s)) / (s * s),
            3 => (c(2.0 * s) - 2.0 * c(s) + 2.0 * c(-s) - c(-2.0 * s)) / (2.0 * s * s * s),
            _ => (c(2.0 * s) - 4.0 * c(s) + 6.0 * c(0.0) - 4.0 * c(-s) + c(-2.0 * s)) / (s * s * s * s),
        }
    };
    Ok((1..=order)
        .map(|k| {
            let (d0, d1, d2) = (raw(k, s), raw(k, s / 2.0), raw(k, s / 4.0));
            let (r0, r1) = ((4.0 * d1 - d0) / 3.0, (4.0 * d2 - d1) / 3.0);
            (16.0 * r1 - r0) / 15.0
        })
        .collect())
}

/// Taylor coefficients of the path's coordinates along `dir` at `t = 0`.
pub fn taylor_coefficients(path: &GeodesicPath, order: usize, dir: Vec3) -> Result<Vec<f64>> {
    let s = TAYLOR_STENCIL;
    if path.t_min() > -2.0 * s || path.t_max() < 2.0 * s {
        return Err(Error::Invalid("path too short for the Taylor stencil".into()));
    }
    taylor_of(&|t| path.position(t), order, dir, s)
}

/// Geodesic from `x` to `y` by Newton shooting on the initial velocity.
/// Returns the unit-speed path from `x` of length `dist(x, y)`.
pub fn geodesic_between(m: &Arc<dyn Metric>, x: Vec3, y: Vec3, h: f64) -> Result<GeodesicPath> {
    let v = shoot(m.as_ref(), x, y, h)?;
    let len = speed(m.as_ref(), x, v);
    integrate_geodesic(m, x, v, len, h)
}

/// Initial velocity `v` with `exp_x(v) = y` (parameter time one).
pub fn shoot<M: Metric + ?Sized>(m: &M, x: Vec3, y: Vec3, h: f64) -> Result<Vec3> {
    let d = la::sub(y, x);
    let scale = la::norm(d);
    if scale == 0.0 {
        return Err(Error::Invalid("coincident endpoints".into()));
    }
    let n = (scale * 2.0 / h).ceil().max(8.0) as usize;
    let end = |v: Vec3| flow(m, x, v, 1.0, n).map(|r| r.0);
    let mut v = d;
    let mut r = la::sub(end(v)?, y);
    for _ in 0..50 {
        let rn = la::norm(r);
        if rn <= 1e-13 * scale.max(1.0) {
            return Ok(v);
        }
        let e = 1e-6 * scale;
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut vp = v;
            let mut vm = v;
            vp[j] += e;
            vm[j] -= e;
            let (a, b) = (end(vp)?, end(vm)?);
            for i in 0..3 {
                jac[i][j] = (a[i] - b[i]) / (2.0 * e);
            }
        }
        let ji = la::inverse(&jac).ok_or_else(|| Error::NoConvergence("singular shooting Jacobian".into()))?;
        let dv = la::matvec(&ji, r);
        let mut lam = 1.0;
        loop {
            let cand = la::axpy(v, -lam, dv);
            if let Ok(p) = end(cand) {
                let rc = la::sub(p, y);
                if la::norm(rc) < rn || lam < 1e-3 {
                    v = cand;
                    r = rc;
                    break;
                }
            }
            lam *= 0.5;
            if lam < 1e-4 {
                return Err(Error::NoConvergence("shooting line search".into()));
            }
        }
    }
    if la::norm(r) <= 1e-10 * scale.max(1.0) {
        Ok(v)
    } else {
        Err(Error::NoConvergence(format!("shooting residual {}", la::norm(r))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{BuiltinKind, BuiltinMetric};

    fn metric(k: BuiltinKind) -> Arc<dyn Metric> {
        Arc::new(BuiltinMetric::new(k).unwrap())
    }

    #[test]
    fn euclidean_straight_line() {
        let m = metric(BuiltinKind::Euclidean);
        let p = integrate_geodesic(&m, [0.0; 3], [1.0, 0.0, 0.0], 0.5, DEFAULT_STEP).unwrap();
        let e = p.position(0.5);
        assert!((e[0] - 0.5).abs() < 1e-14 && e[1].abs() < 1e-14);
        let mid = p.position(0.123456);
        assert!((mid[0] - 0.123456).abs() < 1e-14);
    }

    #[test]
    fn hermite_reproduces_quintic_data() {
        // a polynomial path through the metric-free interpolation machinery
        let m = metric(BuiltinKind::Euclidean);
        let mut p = integrate_geodesic(&m, [0.0; 3], [1.0, 0.0, 0.0], 0.01, 0.005).unwrap();
        let f = |t: f64| [t.powi(5) - t * t, 3.0 * t.powi(4), t];
        let df = |t: f64| [5.0 * t.powi(4) - 2.0 * t, 12.0 * t.powi(3), 1.0];
        let ddf = |t: f64| [20.0 * t.powi(3) - 2.0, 36.0 * t * t, 0.0];
        for k in 0..p.t.len() {
            let t = p.t[k];
            p.x[k] = f(t);
            p.v[k] = df(t);
            p.a[k] = ddf(t);
        }
        for t in [0.001, 0.0042, 0.0077] {
            let (x, v) = p.state(t);
            for i in 0..3 {
                assert!((x[i] - f(t)[i]).abs() < 1e-15);
                assert!((v[i] - df(t)[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn radial_geodesic_in_space_form_stays_radial() {
        let m = metric(BuiltinKind::SpaceForm { k: 1.0 });
        let d = la::scale([1.0, 2.0, 2.0], 1.0 / 3.0);
        let p = integrate_geodesic(&m, [0.0; 3], d, 0.8, DEFAULT_STEP).unwrap();
        for x in &p.x {
            assert!(la::norm(la::cross(*x, d)) < 1e-12);
        }
        assert!(p.energy_drift() < 1e-10);
    }

    #[test]
    fn energy_and_reversal() {
        let m = metric(BuiltinKind::Sogge);
        let p = integrate_geodesic(&m, [0.0, 0.1, -0.1], [1.0, 0.3, 0.2], 1.0, DEFAULT_STEP).unwrap();
        assert!(p.energy_drift() < 1e-8);
        assert!(p.reversal_error().unwrap() < 1e-6);
    }

    #[test]
    fn two_sided_span_is_consistent() {
        let m = metric(BuiltinKind::Sogge);
        let x0 = [0.3, 0.05, 0.02];
        let v0 = [1.0, 0.2, -0.1];
        let both = integrate_span(&m, x0, v0, -0.4, 0.4, DEFAULT_STEP).unwrap();
        let fwd = integrate_geodesic(&m, x0, v0, 0.4, DEFAULT_STEP).unwrap();
        assert_eq!(both.start(), x0);
        assert!(la::norm(la::sub(both.position(0.4), fwd.position(0.4))) < 1e-14);
        let back = integrate_geodesic(&m, x0, la::scale(v0, -1.0), 0.4, DEFAULT_STEP).unwrap();
        assert!(la::norm(la::sub(both.position(-0.3), back.position(0.3))) < 1e-12);
    }

    #[test]
    fn transport_of_tangent_is_tangent() {
        let m = metric(BuiltinKind::SpaceForm { k: 1.0 });
        let p = integrate_span(&m, [0.1, -0.2, 0.1], [0.3, 1.0, 0.2], -0.3, 1.0, DEFAULT_STEP).unwrap();
        let other = [0.0, 0.2, 1.0];
        let f = parallel_transport(&p, &[p.initial_velocity(), other]).unwrap();
        let g0 = la::inner(&m.g(p.start()), other, other);
        for (k, t) in p.t.iter().enumerate().step_by(37) {
            assert!(la::norm(la::sub(f.vecs[k][0], p.v[k])) < 1e-8);
            let x = p.x[k];
            assert!((la::inner(&m.g(x), f.vecs[k][1], f.vecs[k][1]) - g0).abs() < 1e-8);
            assert!(la::norm(la::sub(f.at(1, *t), f.vecs[k][1])) < 1e-15);
        }
    }

    #[test]
    fn taylor_of_line_vanishes() {
        let m = metric(BuiltinKind::Euclidean);
        let p = integrate_span(&m, [0.0; 3], [1.0, 1.0, 0.0], -0.2, 0.2, DEFAULT_STEP).unwrap();
        let c = taylor_coefficients(&p, 4, [0.0, 1.0, 0.0]).unwrap();
        assert!((c[0] - 0.5f64.sqrt()).abs() < 1e-10);
        assert!(c[1].abs() < 1e-8 && c[2].abs() < 1e-6 && c[3].abs() < 1e-4);
        assert!(taylor_coefficients(&p, 5, [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn taylor_of_polynomial_curve() {
        let f = |t: f64| [0.0, 0.0, 0.3 * t.powi(3) - 0.05 * t.powi(4) + t.powi(6)];
        let c = taylor_of(&f, 4, [0.0, 0.0, 1.0], TAYLOR_STENCIL).unwrap();
        assert!(c[1].abs() < 1e-9);
        assert!((c[2] - 1.8).abs() < 1e-9);
        assert!((c[3] + 1.2).abs() < 1e-6);
    }

    #[test]
    fn shooting_hits_target() {
        let m = metric(BuiltinKind::Sogge);
        let (x, y) = ([0.0, 0.1, 0.0], [0.4, -0.1, 0.2]);
        let p = geodesic_between(&m, x, y, DEFAULT_STEP).unwrap();
        assert!(la::norm(la::sub(p.position(p.t_max()), y)) < 1e-8);
    }
}
