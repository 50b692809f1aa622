//! Nikodym-type maximal functions over families of δ-tubes.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fermi::FermiChart;
use crate::geodesic::{integrate_span, shoot, speed, GeodesicPath, DEFAULT_STEP};
use crate::grid::ScalarField;
use crate::la::{self, Vec3};
use crate::metric::Metric;
use crate::tube::{tm_distance, tube_average, Tube, TubeStencil, WeightSpec};

/// Directions on the upper hemisphere from Fibonacci spheres of the given sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionNet {
    pub levels: Vec<usize>,
    pub dirs: Vec<Vec3>,
}

fn fibonacci_hemisphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .filter_map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            if z <= 0.0 {
                return None;
            }
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Some([r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

impl DirectionNet {
    pub fn fibonacci(n_sphere: usize) -> Self {
        DirectionNet { levels: vec![n_sphere], dirs: fibonacci_hemisphere(n_sphere) }
    }

    /// `⌈4π/δ²⌉` points on the sphere, i.e. spacing about δ.
    pub fn for_delta(delta: f64) -> Self {
        Self::fibonacci((4.0 * std::f64::consts::PI / (delta * delta)).ceil() as usize)
    }

    /// Union with the net of twice the finest size.
    pub fn refined(&self) -> Self {
        let n = 2 * self.levels.iter().copied().max().unwrap_or(1);
        let mut levels = self.levels.clone();
        levels.push(n);
        let mut dirs = self.dirs.clone();
        dirs.extend(fibonacci_hemisphere(n));
        DirectionNet { levels, dirs }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// A tube of the family through an evaluation point, with the point where it
/// meets the axis if the family has one.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub tube: Tube,
    pub anchor: Option<Vec3>,
}

#[derive(Clone, Debug)]
pub enum GeodesicFamily {
    /// Segments `t ∈ [−α/2, α/2]` centered at the point, one per net direction.
    AllDirections { alpha: f64, net: DirectionNet },
    /// As `AllDirections`, keeping tubes within TM-distance `c` of `axis`.
    NearAxis { alpha: f64, net: DirectionNet, axis: Arc<Tube>, c: f64 },
    /// Segments of length `α` starting at the point and passing through
    /// `axis(s)` for `s` on a net of `[s_lo, s_hi]` with the given spacing.
    ThroughAxis { alpha: f64, axis: Arc<GeodesicPath>, s_lo: f64, s_hi: f64, spacing: f64 },
}

impl GeodesicFamily {
    pub fn alpha(&self) -> f64 {
        match self {
            GeodesicFamily::AllDirections { alpha, .. }
            | GeodesicFamily::NearAxis { alpha, .. }
            | GeodesicFamily::ThroughAxis { alpha, .. } => *alpha,
        }
    }

    /// Tubes through `x`, in net order. Members leaving the metric domain are dropped.
    pub fn candidates(&self, m: &Arc<dyn Metric>, x: Vec3, delta: f64) -> Result<Vec<Candidate>> {
        let out: Vec<Candidate> = match self {
            GeodesicFamily::AllDirections { alpha, net } => net
                .dirs
                .iter()
                .filter_map(|d| Tube::through(m, x, *d, -alpha / 2.0, alpha / 2.0, delta).ok())
                .map(|tube| Candidate { tube, anchor: None })
                .collect(),
            GeodesicFamily::NearAxis { alpha, net, axis, c } => net
                .dirs
                .iter()
                .filter_map(|d| Tube::through(m, x, *d, -alpha / 2.0, alpha / 2.0, delta).ok())
                .filter(|t| tm_distance(t, axis) <= *c)
                .map(|tube| Candidate { tube, anchor: None })
                .collect(),
            GeodesicFamily::ThroughAxis { alpha, axis, s_lo, s_hi, spacing } => {
                let n = ((s_hi - s_lo) / spacing).ceil().max(0.0) as usize;
                (0..=n)
                    .filter_map(|k| {
                        let s = if n == 0 { *s_lo } else { s_lo + (s_hi - s_lo) * k as f64 / n as f64 };
                        let q = axis.position(s);
                        through_point(m, x, q, *alpha, delta).ok().flatten()
                    })
                    .collect()
            }
        };
        if out.is_empty() {
            return Err(Error::EmptyFamily(x));
        }
        Ok(out)
    }
}

/// Tube of length `α` from `x` through `q`; `None` if `q` is too far or coincides with `x`.
fn through_point(m: &Arc<dyn Metric>, x: Vec3, q: Vec3, alpha: f64, delta: f64) -> Result<Option<Candidate>> {
    if la::norm(la::sub(q, x)) < 1e-9 {
        return Ok(None);
    }
    let v = shoot(m.as_ref(), x, q, DEFAULT_STEP)?;
    if speed(m.as_ref(), x, v) > alpha {
        return Ok(None);
    }
    let path = integrate_span(m, x, v, 0.0, alpha, DEFAULT_STEP)?;
    Ok(Some(Candidate { tube: Tube::from_path(&path, 0.0, alpha, delta)?, anchor: Some(q) }))
}

/// `f*_δ(x) = sup` of unit-weight tube averages over the family's tubes through `x`.
pub fn nikodym_max(m: &Arc<dyn Metric>, f: &ScalarField, delta: f64, family: &GeodesicFamily, points: &[Vec3]) -> Result<Vec<f64>> {
    crate::par::try_map_slice(points, |x| {
        let cands = family.candidates(m, *x, delta)?;
        let mut best: f64 = 0.0;
        for c in &cands {
            best = best.max(tube_average(&c.tube.stencil(f.h), f, &WeightSpec::Unit)?);
        }
        Ok(best)
    })
}

/// A tube stencil bound to a field layout: storage offsets and weights `w·vol`.
#[derive(Clone, Debug)]
pub struct CompiledTube {
    pub offsets: Vec<u32>,
    pub weights: Vec<f32>,
    pub volume: f64,
}

impl CompiledTube {
    pub fn bind(stencil: &TubeStencil, layout: &ScalarField, weight: &WeightSpec) -> Result<Self> {
        stencil.check_field(layout)?;
        let mut offsets = Vec::with_capacity(stencil.len());
        let mut weights = Vec::with_capacity(stencil.len());
        for c in &stencil.cells {
            if let Some(o) = layout.offset(c.idx) {
                let w = weight.eval(stencil.h, c) * c.vol;
                if w != 0.0 {
                    offsets.push(o as u32);
                    weights.push(w as f32);
                }
            }
        }
        Ok(CompiledTube { offsets, weights, volume: stencil.volume })
    }

    #[inline]
    pub fn average(&self, values: &[f64]) -> f64 {
        let s: f64 = self.offsets.iter().zip(&self.weights).map(|(o, w)| values[*o as usize].abs() * *w as f64).sum();
        s / self.volume
    }
}

/// Precomputed tube stencils per evaluation point for repeated application to
/// fields sharing one layout.
#[derive(Clone, Debug)]
pub struct CompiledMaximal {
    pub h: f64,
    pub lo: [i64; 3],
    pub dims: [usize; 3],
    pub points: Vec<Vec3>,
    pub tubes: Vec<Vec<CompiledTube>>,
}

impl CompiledMaximal {
    pub fn compile(m: &Arc<dyn Metric>, layout: &ScalarField, delta: f64, family: &GeodesicFamily, points: &[Vec3]) -> Result<Self> {
        if layout.len() > u32::MAX as usize {
            return Err(Error::Invalid("field too large for 32-bit offsets".into()));
        }
        let tubes = crate::par::try_map_slice(points, |x| {
            family
                .candidates(m, *x, delta)?
                .iter()
                .map(|c| CompiledTube::bind(&c.tube.stencil(layout.h), layout, &WeightSpec::Unit))
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(CompiledMaximal { h: layout.h, lo: layout.lo, dims: layout.dims, points: points.to_vec(), tubes })
    }

    pub fn entries(&self) -> usize {
        self.tubes.iter().flatten().map(|t| t.offsets.len()).sum()
    }

    pub fn apply(&self, f: &ScalarField) -> Result<Vec<f64>> {
        if f.h != self.h || f.lo != self.lo || f.dims != self.dims {
            return Err(Error::Invalid("field layout differs from the compiled layout".into()));
        }
        Ok(crate::par::map_slice(&self.tubes, |ts| ts.iter().map(|t| t.average(&f.values)).fold(0.0, f64::max)))
    }
}

/// Distance field to the polyline of `axis`, on the layout of `like`.
pub fn axis_distance_field(axis: &Tube, like: &ScalarField) -> ScalarField {
    let mut out = like.clone();
    out.values = crate::par::map_range(like.len(), |o| axis.distance(like.center(o)).0);
    out
}

/// Points `(0, x′)` of the transverse disc at height `x₁ = 0`.
pub fn disc_points(chart: &FermiChart, xs: &[[f64; 2]]) -> Result<Vec<Vec3>> {
    xs.iter().map(|p| chart.to_ambient([0.0, p[0], p[1]])).collect()
}

fn axis_family(chart: &FermiChart, alpha: f64, delta: f64, half: bool) -> GeodesicFamily {
    let (lo, hi) = chart.x1_range();
    let s_lo = if half { (lo + hi) / 2.0 } else { lo };
    GeodesicFamily::ThroughAxis { alpha, axis: Arc::new(chart.base.clone()), s_lo, s_hi: hi, spacing: delta }
}

/// Auxiliary maximal function on the disc: sup over geodesics from `(0, x′)`
/// meeting the base geodesic (or its upper half) of the tube average with
/// weight `|y − γ∩γ₀|^β`.
pub fn aux_max_a(chart: &FermiChart, f: &ScalarField, delta: f64, alpha: f64, beta: f64, half: bool, disc: &[[f64; 2]]) -> Result<Vec<f64>> {
    let m = chart.metric().clone();
    let family = axis_family(chart, alpha, delta, half);
    let pts = disc_points(chart, disc)?;
    crate::par::try_map_slice(&pts, |x| {
        let mut best: f64 = 0.0;
        for c in family.candidates(&m, *x, delta)? {
            let w = WeightSpec::damping(m.as_ref(), beta, c.anchor.unwrap());
            best = best.max(tube_average(&c.tube.stencil(f.h), f, &w)?);
        }
        Ok(best)
    })
}

/// Unit-weight variant restricted to `dist(y, γ₀) ≥ λ_cut`, normalized by the full tube volume.
pub fn truncated_max_a(chart: &FermiChart, f: &ScalarField, delta: f64, alpha: f64, lambda_cut: f64, disc: &[[f64; 2]]) -> Result<Vec<f64>> {
    let m = chart.metric().clone();
    let (lo, hi) = chart.x1_range();
    let axis = Tube::from_path(&chart.base, lo, hi, delta)?;
    let weight = WeightSpec::Truncated { cut: lambda_cut, dist: Arc::new(axis_distance_field(&axis, f)) };
    let family = axis_family(chart, alpha, delta, false);
    let pts = disc_points(chart, disc)?;
    crate::par::try_map_slice(&pts, |x| {
        let mut best: f64 = 0.0;
        for c in family.candidates(&m, *x, delta)? {
            best = best.max(tube_average(&c.tube.stencil(f.h), f, &weight)?);
        }
        Ok(best)
    })
}

/// `C^∞` step: 0 for `z ≤ 0`, 1 for `z ≥ 1`.
pub fn smooth_step(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / z).exp();
    let b = (-1.0 / (1.0 - z)).exp();
    a / (a + b)
}

/// Smooth bump supported in `(a, d)` and equal to one on `[b, c]`.
pub fn bump(u: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    smooth_step((u - a) / (b - a)) * smooth_step((d - u) / (d - c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FoldBranch {
    /// `|ρ(x₁)| ≥ c₁`: bump on `(0, α₂)`, one on `[α₂/4, α₂/2]`
    Near,
    /// otherwise: bump on `(α₁, α₀)`, one on its middle half
    Far,
}

/// Table weight `a(s, y)` for a tube meeting the axis at height `x1` at tube
/// parameter `s_hit`. The tube arclength offset `|s − s_hit|` stands in for `|x₁ − y₁|`.
pub fn build_fold_adapted_weights(
    rho: impl Fn(f64) -> f64,
    x1: f64,
    s_hit: f64,
    c1: f64,
    a0: f64,
    a1: f64,
    a2: f64,
) -> Result<(WeightSpec, FoldBranch)> {
    if !(0.0 < a2 && a2 <= a1 && a1 < a0) || !(c1 > 0.0) {
        return Err(Error::Invalid(format!("need 0 < α₂ ≤ α₁ < α₀ and c₁ > 0, got {a2}, {a1}, {a0}, {c1}")));
    }
    if rho(x1).abs() >= c1 {
        let w = move |s: f64, _y: Vec3| bump((s - s_hit).abs(), 0.0, a2 / 4.0, a2 / 2.0, a2);
        Ok((WeightSpec::Table(Arc::new(w)), FoldBranch::Near))
    } else {
        let q = (a0 - a1) / 4.0;
        let w = move |s: f64, _y: Vec3| bump((s - s_hit).abs(), a1, a1 + q, a0 - q, a0);
        Ok((WeightSpec::Table(Arc::new(w)), FoldBranch::Far))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightSupport {
    /// `|{y ∈ T: a ≥ 1}| / |T|`
    pub c0: f64,
    pub max_weight: f64,
    /// `0 ≤ a ≤ 1/c₀` on the stencil
    pub bounded: bool,
}

pub fn weight_support(stencil: &TubeStencil, weight: &WeightSpec) -> WeightSupport {
    let mut on = 0.0;
    let mut max_w: f64 = 0.0;
    let mut min_w: f64 = f64::INFINITY;
    for c in &stencil.cells {
        let w = weight.eval(stencil.h, c);
        max_w = max_w.max(w);
        min_w = min_w.min(w);
        if w >= 1.0 - 1e-12 {
            on += c.vol;
        }
    }
    let c0 = if stencil.volume > 0.0 { on / stencil.volume } else { 0.0 };
    WeightSupport { c0, max_weight: max_w, bounded: c0 > 0.0 && min_w >= 0.0 && max_w <= 1.0 / c0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{Aabb, BuiltinKind, BuiltinMetric};

    fn euclid() -> Arc<dyn Metric> {
        Arc::new(BuiltinMetric::new(BuiltinKind::Euclidean).unwrap())
    }

    #[test]
    fn net_size_and_refinement() {
        let n = DirectionNet::for_delta(0.25);
        assert_eq!(n.levels, vec![202]);
        assert_eq!(n.len(), 101);
        assert!(n.dirs.iter().all(|d| (la::norm(*d) - 1.0).abs() < 1e-12 && d[2] > 0.0));
        let r = n.refined();
        assert!(n.dirs.iter().all(|d| r.dirs.contains(d)));
        assert_eq!(r.len(), 101 + 202);
    }

    #[test]
    fn constant_is_fixed_and_far_support_vanishes() {
        let m = euclid();
        let delta = 0.125;
        let fam = GeodesicFamily::AllDirections { alpha: 0.5, net: DirectionNet::for_delta(0.5) };
        let b = Aabb::cube(0.8);
        let one = ScalarField::from_fn(delta / 3.0, &b, |_| 1.0);
        let v = nikodym_max(&m, &one, delta, &fam, &[[0.0; 3], [0.1, -0.2, 0.05]]).unwrap();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-12));
        let far = ScalarField::from_fn(delta / 3.0, &b, |x| if x[0] > 0.7 { 1.0 } else { 0.0 });
        let v = nikodym_max(&m, &far, delta, &fam, &[[0.0; 3]]).unwrap();
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn compiled_matches_direct() {
        let m = euclid();
        let delta = 0.125;
        let fam = GeodesicFamily::AllDirections { alpha: 0.5, net: DirectionNet::for_delta(0.5) };
        let f = ScalarField::from_fn(delta / 3.0, &Aabb::cube(0.8), |x| (3.0 * x[0]).sin() + x[1] * x[2]);
        let pts = [[0.0; 3], [0.2, 0.1, -0.1]];
        let direct = nikodym_max(&m, &f, delta, &fam, &pts).unwrap();
        let c = CompiledMaximal::compile(&m, &f, delta, &fam, &pts).unwrap();
        let fast = c.apply(&f).unwrap();
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-6 * a.max(1.0));
        }
    }

    #[test]
    fn fold_weights_support_fractions() {
        let m = euclid();
        let alpha = 1.0;
        let tube = Tube::through(&m, [0.0; 3], [1.0, 0.0, 0.0], 0.0, alpha, 0.05).unwrap();
        let st = tube.stencil(0.05 / 4.0);
        let (a0, a1, a2) = (0.4, 0.2, 0.16);
        let (w, br) = build_fold_adapted_weights(|_| 1.0, 0.0, 0.0, 0.5, a0, a1, a2).unwrap();
        assert_eq!(br, FoldBranch::Near);
        let s = weight_support(&st, &w);
        assert!((s.c0 - a2 / 4.0 / alpha).abs() < 0.02, "{}", s.c0);
        assert!(s.bounded);
        let (w, br) = build_fold_adapted_weights(|_| 0.0, 0.0, 0.0, 0.5, a0, a1, a2).unwrap();
        assert_eq!(br, FoldBranch::Far);
        let s = weight_support(&st, &w);
        assert!((s.c0 - (a0 - a1) / (2.0 * alpha)).abs() < 0.02, "{}", s.c0);
        assert!(build_fold_adapted_weights(|_| 0.0, 0.0, 0.0, 0.5, 0.1, 0.2, 0.3).is_err());
    }

    #[test]
    fn smooth_bump_plateau() {
        assert_eq!(bump(0.5, 0.0, 0.25, 0.75, 1.0), 1.0);
        assert_eq!(bump(1.0, 0.0, 0.25, 0.75, 1.0), 0.0);
        let v = bump(0.1, 0.0, 0.25, 0.75, 1.0);
        assert!(v > 0.0 && v < 1.0);
    }
}
