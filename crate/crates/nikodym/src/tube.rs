//! δ-tubes about geodesic segments and their lattice stencils.
//!
//! Membership is decided by the distance from a cell center to the sampled
//! center polyline, measured in the metric frozen at each segment's midpoint.
//! At node spacing δ/4 this is within O(δ²) of the Riemannian distance for the
//! smooth metrics used here.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geodesic::{integrate_span, GeodesicPath, DEFAULT_STEP};
use crate::grid::{cell_center, cell_of, CellIdx, ScalarField};
use crate::la::{self, Mat3, Vec3};
use crate::metric::{Aabb, Metric};

/// Polyline node: parameter, position, unit tangent, metric at the position.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
    pub g: Mat3,
}

#[derive(Clone)]
pub struct Tube {
    metric: Arc<dyn Metric>,
    pub delta: f64,
    pub nodes: Vec<Node>,
}

impl std::fmt::Debug for Tube {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tube")
            .field("metric", &self.metric.name())
            .field("delta", &self.delta)
            .field("t", &(self.t_min(), self.t_max()))
            .finish()
    }
}

fn mid(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (a[i][j] + b[i][j])))
}

/// Distance from `y` to segment `[p, q]` in the constant metric `g`, and the
/// segment fraction of the nearest point.
#[inline]
fn segment_distance(g: &Mat3, p: Vec3, q: Vec3, y: Vec3) -> (f64, f64) {
    let d = la::sub(q, p);
    let w = la::sub(y, p);
    let dd = la::inner(g, d, d);
    let u = if dd > 0.0 { (la::inner(g, w, d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    let r = la::axpy(w, -u, d);
    (la::inner(g, r, r).max(0.0).sqrt(), u)
}

impl Tube {
    /// Tube about `path` restricted to `[t0, t1]`, sampled at spacing ≤ δ/4.
    pub fn from_path(path: &GeodesicPath, t0: f64, t1: f64, delta: f64) -> Result<Tube> {
        if !(delta > 0.0) || !(t1 > t0) {
            return Err(Error::Invalid(format!("bad tube: δ = {delta}, [{t0}, {t1}]")));
        }
        if t0 < path.t_min() - 1e-12 || t1 > path.t_max() + 1e-12 {
            return Err(Error::Invalid("tube span exceeds the integrated path".into()));
        }
        let m = path.metric().clone();
        let n = ((t1 - t0) / (0.25 * delta)).ceil().max(1.0) as usize;
        let nodes = (0..=n)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / n as f64;
                let (x, v) = path.state(t);
                let g = m.g(x);
                let v = la::scale(v, 1.0 / la::inner(&g, v, v).sqrt());
                Node { t, x, v, g }
            })
            .collect();
        Ok(Tube { metric: m, delta, nodes })
    }

    /// Integrates the geodesic through `x0` with direction `v0` and wraps
    /// `[t0, t1]` (with `t0 ≤ 0 ≤ t1`).
    pub fn through(m: &Arc<dyn Metric>, x0: Vec3, v0: Vec3, t0: f64, t1: f64, delta: f64) -> Result<Tube> {
        let path = integrate_span(m, x0, v0, t0, t1, DEFAULT_STEP)?;
        Tube::from_path(&path, t0, t1, delta)
    }

    pub fn metric(&self) -> &Arc<dyn Metric> {
        &self.metric
    }

    pub fn t_min(&self) -> f64 {
        self.nodes[0].t
    }

    pub fn t_max(&self) -> f64 {
        self.nodes.last().unwrap().t
    }

    pub fn length(&self) -> f64 {
        self.t_max() - self.t_min()
    }

    /// `πδ²α`.
    pub fn nominal_volume(&self) -> f64 {
        std::f64::consts::PI * self.delta * self.delta * self.length()
    }

    pub fn reversed(&self) -> Tube {
        let nodes = self
            .nodes
            .iter()
            .rev()
            .map(|n| Node { t: -n.t, v: la::scale(n.v, -1.0), ..*n })
            .collect();
        Tube { metric: self.metric.clone(), delta: self.delta, nodes }
    }

    /// Center point and unit tangent at parameter `t` (linear between nodes).
    pub fn center(&self, t: f64) -> (Vec3, Vec3) {
        let n = self.nodes.len();
        if n == 1 {
            return (self.nodes[0].x, self.nodes[0].v);
        }
        let u = ((t - self.t_min()) / self.length() * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let k = (u.floor() as usize).min(n - 2);
        let f = u - k as f64;
        let (a, b) = (&self.nodes[k], &self.nodes[k + 1]);
        let x = std::array::from_fn(|i| a.x[i] + f * (b.x[i] - a.x[i]));
        let v = std::array::from_fn(|i| a.v[i] + f * (b.v[i] - a.v[i]));
        let g = self.metric.g(x);
        (x, la::scale(v, 1.0 / la::inner(&g, v, v).sqrt()))
    }

    /// Distance from `y` to the center polyline and the parameter of the nearest point.
    pub fn distance(&self, y: Vec3) -> (f64, f64) {
        if self.nodes.len() == 1 {
            let n = &self.nodes[0];
            let w = la::sub(y, n.x);
            return (la::inner(&n.g, w, w).sqrt(), n.t);
        }
        let mut best = (f64::INFINITY, self.t_min());
        for w in self.nodes.windows(2) {
            let g = mid(&w[0].g, &w[1].g);
            let (d, u) = segment_distance(&g, w[0].x, w[1].x, y);
            if d < best.0 {
                best = (d, w[0].t + u * (w[1].t - w[0].t));
            }
        }
        best
    }

    pub fn contains(&self, y: Vec3) -> bool {
        self.distance(y).0 <= self.delta
    }

    /// Box containing the center polyline.
    pub fn axis_box(&self) -> Aabb {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for n in &self.nodes {
            for i in 0..3 {
                lo[i] = lo[i].min(n.x[i]);
                hi[i] = hi[i].max(n.x[i]);
            }
        }
        Aabb::new(lo, hi)
    }

    /// Lattice cells of spacing `h` whose centers lie in the tube.
    pub fn stencil(&self, h: f64) -> TubeStencil {
        const CHUNK: usize = 8;
        let segs = self.nodes.len().saturating_sub(1).max(1);
        let chunks = segs.div_ceil(CHUNK);
        let delta = self.delta;
        let parts = crate::par::map_range(chunks, |c| {
            let a = c * CHUNK;
            let b = ((c + 1) * CHUNK).min(self.nodes.len() - 1);
            let seg: Vec<(Mat3, usize)> = if self.nodes.len() == 1 {
                vec![(self.nodes[0].g, 0)]
            } else {
                (a..b).map(|k| (mid(&self.nodes[k].g, &self.nodes[k + 1].g), k)).collect()
            };
            let lmin = seg.iter().map(|(g, _)| la::min_eigenvalue(g)).fold(f64::INFINITY, f64::min);
            let reach = delta / lmin.max(1e-12).sqrt();
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for n in &self.nodes[a..=b.max(a)] {
                for i in 0..3 {
                    lo[i] = lo[i].min(n.x[i] - reach);
                    hi[i] = hi[i].max(n.x[i] + reach);
                }
            }
            let (clo, chi) = (cell_of(h, lo), cell_of(h, hi));
            let mut out = Vec::new();
            for k in clo[2]..=chi[2] {
                for j in clo[1]..=chi[1] {
                    for i in clo[0]..=chi[0] {
                        let y = cell_center(h, [i, j, k]);
                        let mut best = (f64::INFINITY, 0.0);
                        for (g, s) in &seg {
                            let p = &self.nodes[*s];
                            let q = &self.nodes[(*s + 1).min(self.nodes.len() - 1)];
                            let (d, u) = segment_distance(g, p.x, q.x, y);
                            if d < best.0 {
                                best = (d, p.t + u * (q.t - p.t));
                            }
                        }
                        if best.0 <= delta {
                            out.push(TubeCell { idx: [i, j, k], s: best.1, dist: best.0, vol: 0.0 });
                        }
                    }
                }
            }
            out
        });
        let mut cells: Vec<TubeCell> = parts.concat();
        cells.sort_by(|p, q| p.idx.cmp(&q.idx).then(p.dist.total_cmp(&q.dist)));
        cells.dedup_by(|later, first| later.idx == first.idx);
        let h3 = h * h * h;
        let mut volume = 0.0;
        for c in cells.iter_mut() {
            c.vol = self.metric.sqrt_det(cell_center(h, c.idx)) * h3;
            volume += c.vol;
        }
        TubeStencil { h, cells, volume, axis: self.axis_box() }
    }

    pub fn on_grid(self, h: f64) -> GridTube {
        let stencil = self.stencil(h);
        GridTube { tube: self, stencil }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TubeCell {
    pub idx: CellIdx,
    /// center parameter of the nearest polyline point
    pub s: f64,
    pub dist: f64,
    /// `√det g · h³`
    pub vol: f64,
}

/// Cells of a tube sorted by lattice index.
#[derive(Clone, Debug)]
pub struct TubeStencil {
    pub h: f64,
    pub cells: Vec<TubeCell>,
    pub volume: f64,
    pub axis: Aabb,
}

impl TubeStencil {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Errors unless `f` shares the spacing and stores the whole center polyline.
    pub fn check_field(&self, f: &ScalarField) -> Result<()> {
        if (self.h - f.h).abs() > 1e-15 * f.h {
            return Err(Error::Invalid(format!("stencil spacing {} vs field spacing {}", self.h, f.h)));
        }
        let b = f.bounds();
        if !(b.contains(self.axis.lo) && b.contains(self.axis.hi)) {
            return Err(Error::TubeOutsideGrid);
        }
        Ok(())
    }

    /// Pairs of positions `(i, j)` with `self.cells[i].idx == other.cells[j].idx`.
    pub fn common(&self, other: &TubeStencil) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.cells.len() && j < other.cells.len() {
            match self.cells[i].idx.cmp(&other.cells[j].idx) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push((i, j));
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }
}

/// A tube together with its stencil.
#[derive(Clone, Debug)]
pub struct GridTube {
    pub tube: Tube,
    pub stencil: TubeStencil,
}

/// Integrand weight inside tube averages.
#[derive(Clone)]
pub enum WeightSpec {
    Unit,
    /// `|y − anchor|^β` in the metric at the anchor.
    Damping { beta: f64, anchor: Vec3, g: Mat3 },
    /// Indicator of `dist(y, γ₀) ≥ cut`, with the distance field precomputed.
    Truncated { cut: f64, dist: Arc<ScalarField> },
    /// `a(s, y)` with `s` the center parameter nearest to `y`.
    Table(Arc<dyn Fn(f64, Vec3) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightSpec::Unit => write!(f, "Unit"),
            WeightSpec::Damping { beta, anchor, .. } => write!(f, "Damping(β={beta}, anchor={anchor:?})"),
            WeightSpec::Truncated { cut, .. } => write!(f, "Truncated(cut={cut})"),
            WeightSpec::Table(_) => write!(f, "Table"),
        }
    }
}

impl WeightSpec {
    pub fn damping<M: Metric + ?Sized>(m: &M, beta: f64, anchor: Vec3) -> Self {
        WeightSpec::Damping { beta, anchor, g: m.g(anchor) }
    }

    #[inline]
    pub fn eval(&self, h: f64, c: &TubeCell) -> f64 {
        match self {
            WeightSpec::Unit => 1.0,
            WeightSpec::Damping { beta, anchor, g } => {
                if *beta == 0.0 {
                    return 1.0;
                }
                let w = la::sub(cell_center(h, c.idx), *anchor);
                la::inner(g, w, w).sqrt().powf(*beta)
            }
            WeightSpec::Truncated { cut, dist } => {
                if *cut <= 0.0 || dist.get(c.idx) >= *cut {
                    1.0
                } else {
                    0.0
                }
            }
            WeightSpec::Table(a) => a(c.s, cell_center(h, c.idx)),
        }
    }
}

/// `|T|⁻¹ Σ_cells |f| w √det g h³`.
pub fn tube_average(stencil: &TubeStencil, f: &ScalarField, weight: &WeightSpec) -> Result<f64> {
    stencil.check_field(f)?;
    if stencil.volume <= 0.0 {
        return Err(Error::Invalid("empty tube stencil; grid too coarse".into()));
    }
    let mut s = 0.0;
    for c in &stencil.cells {
        let v = f.get(c.idx);
        if v != 0.0 {
            s += v.abs() * weight.eval(stencil.h, c) * c.vol;
        }
    }
    Ok(s / stencil.volume)
}

/// Distance between geodesics in the unit tangent bundle, minimized over
/// sampled point pairs: `min √(|x₁−x₂|² + min_± |τ₁ ∓ τ₂|²)` in the local metric.
pub fn tm_distance(a: &Tube, b: &Tube) -> f64 {
    let mut best = f64::INFINITY;
    for p in &a.nodes {
        for q in &b.nodes {
            let g = mid(&p.g, &q.g);
            let dx = la::sub(p.x, q.x);
            let d2 = la::inner(&g, dx, dx);
            if d2 >= best * best {
                continue;
            }
            let m = la::sub(p.v, q.v);
            let s = la::add(p.v, q.v);
            let dv = la::inner(&g, m, m).min(la::inner(&g, s, s));
            best = best.min((d2 + dv).sqrt());
        }
    }
    best
}

/// Smallest angle `acos |g(τ₁, τ₂)|` over the common cells; `+∞` if disjoint.
pub fn tube_angle(a: &GridTube, b: &GridTube) -> f64 {
    let m = a.tube.metric();
    let h = a.stencil.h;
    let mut best = f64::INFINITY;
    for (i, j) in a.stencil.common(&b.stencil) {
        let (ca, cb) = (&a.stencil.cells[i], &b.stencil.cells[j]);
        let (_, ta) = a.tube.center(ca.s);
        let (_, tb) = b.tube.center(cb.s);
        let g = m.g(cell_center(h, ca.idx));
        let na = la::inner(&g, ta, ta).sqrt();
        let nb = la::inner(&g, tb, tb).sqrt();
        let c = (la::inner(&g, ta, tb) / (na * nb)).abs().min(1.0);
        best = best.min(c.acos());
    }
    best
}

/// Volume of the common cells.
pub fn intersection_volume(a: &GridTube, b: &GridTube) -> f64 {
    a.stencil.common(&b.stencil).iter().map(|(i, _)| a.stencil.cells[*i].vol).sum()
}

/// Largest distance from `a` (metric at `a`) over the common cells; zero if disjoint.
pub fn intersection_reach(t1: &GridTube, t2: &GridTube, a: Vec3) -> f64 {
    let g = t1.tube.metric().g(a);
    let h = t1.stencil.h;
    t1.stencil
        .common(&t2.stencil)
        .iter()
        .map(|(i, _)| {
            let w = la::sub(cell_center(h, t1.stencil.cells[*i].idx), a);
            la::inner(&g, w, w).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Whether `(T₁ ∩ T₂) \ B(a, λ)` is empty on the grid.
pub fn far_from_junction(t1: &GridTube, t2: &GridTube, a: Vec3, lambda: f64) -> bool {
    intersection_reach(t1, t2, a) <= lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{BuiltinKind, BuiltinMetric};

    fn euclid() -> Arc<dyn Metric> {
        Arc::new(BuiltinMetric::new(BuiltinKind::Euclidean).unwrap())
    }

    fn line(m: &Arc<dyn Metric>, x: Vec3, v: Vec3, delta: f64) -> Tube {
        Tube::through(m, x, v, -0.5, 0.5, delta).unwrap()
    }

    #[test]
    fn straight_tube_volume_and_membership() {
        let m = euclid();
        let t = line(&m, [0.0; 3], [1.0, 0.0, 0.0], 0.0625);
        assert!(t.contains([0.3, 0.06, 0.0]));
        assert!(!t.contains([0.3, 0.07, 0.0]));
        assert!(t.contains([0.55, 0.0, 0.0]));
        assert!(!t.contains([0.57, 0.0, 0.0]));
        let s = t.stencil(0.0625 / 6.0);
        let exact = std::f64::consts::PI * 0.0625f64.powi(2) * (1.0 + 4.0 / 3.0 * 0.0625);
        assert!((s.volume / exact - 1.0).abs() < 0.05, "{} vs {exact}", s.volume);
        assert!(s.cells.windows(2).all(|w| w[0].idx < w[1].idx));
    }

    #[test]
    fn reversal_preserves_membership() {
        let m = euclid();
        let t = line(&m, [0.1, 0.0, 0.0], [1.0, 1.0, 0.5], 0.05);
        let r = t.reversed();
        for y in [[0.1, 0.02, 0.01], [0.3, 0.2, 0.1], [0.0, 0.1, 0.0]] {
            assert_eq!(t.contains(y), r.contains(y));
            assert!((t.distance(y).0 - r.distance(y).0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_average_of_one() {
        let m = euclid();
        let t = line(&m, [0.0; 3], [0.0, 1.0, 1.0], 0.0625).on_grid(0.0625 / 3.0);
        let f = ScalarField::from_fn(t.stencil.h, &Aabb::cube(0.7), |_| 1.0);
        let a = tube_average(&t.stencil, &f, &WeightSpec::Unit).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        let small = ScalarField::from_fn(t.stencil.h, &Aabb::cube(0.1), |_| 1.0);
        assert!(matches!(tube_average(&t.stencil, &small, &WeightSpec::Unit), Err(Error::TubeOutsideGrid)));
    }

    #[test]
    fn tm_distance_of_parallel_lines() {
        let m = euclid();
        let a = line(&m, [0.0; 3], [1.0, 0.0, 0.0], 0.05);
        let b = line(&m, [0.0, 0.3, 0.0], [-1.0, 0.0, 0.0], 0.05);
        assert!((tm_distance(&a, &b) - 0.3).abs() < 1e-9);
        assert!(tm_distance(&a, &a) < 1e-12);
    }

    #[test]
    fn angle_and_intersection_of_crossing_lines() {
        let m = euclid();
        let d = 0.03125;
        let h = d / 6.0;
        let th: f64 = 0.4;
        let a = line(&m, [0.0; 3], [1.0, 0.0, 0.0], d).on_grid(h);
        let b = line(&m, [0.0; 3], [th.cos(), th.sin(), 0.0], d).on_grid(h);
        assert!((tube_angle(&a, &b) - th).abs() < d / 2.0);
        let v = intersection_volume(&a, &b);
        // Steinmetz solid of two radius-d cylinders crossing at angle θ
        let oracle = 16.0 / 3.0 * d.powi(3) / th.sin();
        assert!((v / oracle - 1.0).abs() < 0.1, "{v} vs {oracle}");
        let far = line(&m, [0.0, 0.5, 0.0], [1.0, 0.0, 0.0], d).on_grid(h);
        assert_eq!(intersection_volume(&a, &far), 0.0);
        assert!(tube_angle(&a, &far).is_infinite());
        assert!(far_from_junction(&a, &b, [0.0; 3], 4.0 * d / th));
        assert!(!far_from_junction(&a, &b, [0.0; 3], 0.5 * d));
    }
}
