//! Lower bounds for the maximal function of `χ_Ω` with `Ω` a thin diamond slab,
//! computed in the parameters `(x₁, θ, t) ↦ γ_{x₁θ}(t)` of the geodesics issued
//! from the axis with initial direction `(cos θ, sin θ, 0)`.
//!
//! For `y = γ_{x₁θ}(t)` the average `A(x₁, θ)` of `χ_Ω` over the δ-tube about
//! `γ_{x₁θ}([0, α])` bounds `f*_δ(y)` from below. Measures of images are
//! `∫ |det κ′| √det g` over the parameter box.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::{integrate_span, speed, GeodesicPath};
use crate::grid::{lp_norm, ScalarField};
use crate::la::{self, Vec3};
use crate::metric::{Aabb, Metric};

/// `{|x₁ − c| + |x₂| ≤ a, |x₃| ≤ b}`
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiamondSlab {
    pub center1: f64,
    pub a: f64,
    pub b: f64,
}

impl DiamondSlab {
    #[inline]
    pub fn contains(&self, x: Vec3) -> bool {
        (x[0] - self.center1).abs() + x[1].abs() <= self.a && x[2].abs() <= self.b
    }

    /// Lebesgue volume `4a²b`.
    pub fn volume(&self) -> f64 {
        4.0 * self.a * self.a * self.b
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new([self.center1 - self.a, -self.a, -self.b], [self.center1 + self.a, self.a, self.b])
    }

    /// Exact fraction of the cube `lo + [0, h]³` inside the slab.
    pub fn cell_fraction(&self, lo: Vec3, h: f64) -> f64 {
        let z = (lo[2] + h).min(self.b) - lo[2].max(-self.b);
        if z <= 0.0 {
            return 0.0;
        }
        let mut poly = vec![[lo[0], lo[1]], [lo[0] + h, lo[1]], [lo[0] + h, lo[1] + h], [lo[0], lo[1] + h]];
        for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            // keep sx (x − c) + sy y ≤ a
            let f = |p: [f64; 2]| sx * (p[0] - self.center1) + sy * p[1] - self.a;
            let mut out = Vec::with_capacity(poly.len() + 1);
            for i in 0..poly.len() {
                let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
                let (fp, fq) = (f(p), f(q));
                if fp <= 0.0 {
                    out.push(p);
                }
                if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
                    let t = fp / (fp - fq);
                    out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                }
            }
            poly = out;
            if poly.len() < 3 {
                return 0.0;
            }
        }
        let area: f64 = (0..poly.len())
            .map(|i| {
                let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
            / 2.0;
        area.abs() * z / h.powi(3)
    }
}

/// Unit-speed geodesic from `(x₁, 0, 0)` with direction `(cos θ, sin θ, 0)`.
pub fn launch(m: &Arc<dyn Metric>, x1: f64, theta: f64, t_lo: f64, t_hi: f64, h: f64) -> Result<GeodesicPath> {
    let x = [x1, 0.0, 0.0];
    let v = [theta.cos(), theta.sin(), 0.0];
    let v = la::scale(v, 1.0 / speed(m.as_ref(), x, v));
    integrate_span(m, x, v, t_lo, t_hi, h)
}

/// Equal-area polar rule on a disc: `rings × angles` nodes, equal weights.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiscRule {
    pub rings: usize,
    pub angles: usize,
}

impl Default for DiscRule {
    fn default() -> Self {
        DiscRule { rings: 4, angles: 12 }
    }
}

fn normal_frame(v: Vec3) -> (Vec3, Vec3) {
    let v = la::scale(v, 1.0 / la::norm(v));
    let k = (0..3).min_by(|a, b| v[*a].abs().total_cmp(&v[*b].abs())).unwrap();
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let n1 = la::cross(v, e);
    let n1 = la::scale(n1, 1.0 / la::norm(n1));
    (n1, la::cross(v, n1))
}

/// Average of `χ_region` over the δ-tube about `path([t0, t1])`: midpoint rule
/// along the axis at spacing `≤ δ/2` times a disc rule in the Euclidean normal plane.
pub fn tube_fraction(path: &GeodesicPath, t0: f64, t1: f64, delta: f64, region: &dyn Fn(Vec3) -> bool, rule: DiscRule) -> f64 {
    let n = (((t1 - t0) / (0.5 * delta)).ceil() as usize).max(64);
    let ds = (t1 - t0) / n as f64;
    let nodes = rule.rings * rule.angles;
    let mut hit = 0usize;
    for k in 0..n {
        let (x, v) = path.state(t0 + (k as f64 + 0.5) * ds);
        let (n1, n2) = normal_frame(v);
        for i in 0..rule.rings {
            let r = delta * ((i as f64 + 0.5) / rule.rings as f64).sqrt();
            for j in 0..rule.angles {
                let phi = TAU * (j as f64 + 0.5 * (i % 2) as f64) / rule.angles as f64;
                let y = la::axpy(la::axpy(x, r * phi.cos(), n1), r * phi.sin(), n2);
                hit += region(y) as usize;
            }
        }
    }
    hit as f64 / (n * nodes) as f64
}

/// `det ∂(γ¹, γ², γ³)/∂(x₁, θ, t)` at each `t`, by central differences of step `eps`
/// in `x₁` and `θ`.
pub fn kappa_dets(m: &Arc<dyn Metric>, x1: f64, theta: f64, ts: &[f64], t_hi: f64, h: f64, eps: f64) -> Result<Vec<f64>> {
    let base = launch(m, x1, theta, 0.0, t_hi, h)?;
    let xp = launch(m, x1 + eps, theta, 0.0, t_hi, h)?;
    let xm = launch(m, x1 - eps, theta, 0.0, t_hi, h)?;
    let tp = launch(m, x1, theta + eps, 0.0, t_hi, h)?;
    let tm = launch(m, x1, theta - eps, 0.0, t_hi, h)?;
    Ok(ts
        .iter()
        .map(|t| {
            let dx = la::scale(la::sub(xp.position(*t), xm.position(*t)), 0.5 / eps);
            let dth = la::scale(la::sub(tp.position(*t), tm.position(*t)), 0.5 / eps);
            let dt = base.velocity(*t);
            la::det(&[dx, dth, dt])
        })
        .collect())
}

/// Which of the two slab constructions is run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Construction {
    /// `a = δ^{1/4}`, `b = δ`, threshold `c δ^{1/4}`, `θ ∈ [δ₁/2, δ₁]`
    Sogge,
    /// `a = δ^{1/5}`, `b = 2δ`, threshold `c δ^{1/5}`, `θ ∈ [c_θ δ^{2/5}/2, c_θ δ^{2/5}]`
    Quartic,
}

impl Construction {
    pub fn exponent(self) -> f64 {
        match self {
            Construction::Sogge => 0.25,
            Construction::Quartic => 0.2,
        }
    }

    pub fn slab(self, delta: f64) -> DiamondSlab {
        match self {
            Construction::Sogge => DiamondSlab { center1: 0.0, a: delta.powf(0.25), b: delta },
            Construction::Quartic => DiamondSlab { center1: 0.0, a: delta.powf(0.2), b: 2.0 * delta },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SlabConfig {
    pub construction: Construction,
    pub alpha: f64,
    /// threshold constant `c` in `A ≥ c δ^{e}`
    pub c: f64,
    /// `|x₁| ≤ x_frac · a`
    pub x_frac: f64,
    /// `δ₁` (sogge) or `c_θ` (quartic)
    pub theta_scale: f64,
    /// `t ∈ [δ₂, 2δ₂]`
    pub delta2: f64,
    pub n_x: usize,
    pub n_theta: usize,
    pub n_t: usize,
    pub p: f64,
    pub q: f64,
    /// `h_grid = grid_ratio · δ`, at most `1/3`
    pub grid_ratio: f64,
    pub step: f64,
    pub fd_eps: f64,
    pub disc: DiscRule,
}

impl SlabConfig {
    pub fn sogge() -> Self {
        SlabConfig {
            construction: Construction::Sogge,
            alpha: 1.0,
            c: 0.25,
            x_frac: 0.1,
            theta_scale: 0.2,
            delta2: 0.5,
            n_x: 24,
            n_theta: 6,
            n_t: 8,
            p: 2.5,
            q: 10.0 / 3.0,
            grid_ratio: 1.0 / 3.0,
            step: crate::geodesic::DEFAULT_STEP,
            fd_eps: 1e-5,
            disc: DiscRule::default(),
        }
    }

    pub fn quartic() -> Self {
        SlabConfig { construction: Construction::Quartic, theta_scale: 0.3, p: 2.5, q: 2.5, ..Self::sogge() }
    }

    pub fn theta_range(&self, delta: f64) -> (f64, f64) {
        let hi = match self.construction {
            Construction::Sogge => self.theta_scale,
            Construction::Quartic => self.theta_scale * delta.powf(0.4),
        };
        (0.5 * hi, hi)
    }

    fn validate(&self, delta: f64) -> Result<()> {
        if self.grid_ratio > 1.0 / 3.0 + 1e-12 {
            return Err(Error::Precondition(format!("grid too coarse: h = {}δ, need h ≤ δ/3", self.grid_ratio)));
        }
        if !(delta > 0.0 && delta < self.alpha / 4.0) || self.alpha > 1.0 {
            return Err(Error::Invalid("need 0 < δ < α/4 and α ≤ 1".into()));
        }
        if 2.0 * self.delta2 > self.alpha {
            return Err(Error::Invalid("need 2δ₂ ≤ α".into()));
        }
        if self.n_x == 0 || self.n_theta == 0 || self.n_t == 0 {
            return Err(Error::Invalid("empty parameter grid".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SlabRow {
    pub delta: f64,
    pub a: f64,
    pub threshold: f64,
    /// Lebesgue `|Ω_δ|`, closed form
    pub omega_volume: f64,
    /// Lebesgue `|Ω_δ|` on the grid
    pub omega_volume_grid: f64,
    /// `‖χ_Ω‖_p` on the grid with the Riemannian volume
    pub f_p: f64,
    /// `|Ω*_δ|`: image measure of the parameters with `A ≥ threshold`
    pub omega_star: f64,
    /// parameter-box measure of the same set
    pub param_measure: f64,
    pub min_fstar: f64,
    pub max_fstar: f64,
    /// `(∫ A^q dμ)^{1/q}` over the image
    pub fstar_q: f64,
    pub ratio: f64,
    pub good_fraction: f64,
    /// range of `|det κ′| / θ` over the parameter box
    pub det_over_theta: (f64, f64),
    pub grid_cells: usize,
}

/// One δ of the slab counterexample.
pub fn slab_row(m: &Arc<dyn Metric>, cfg: &SlabConfig, delta: f64) -> Result<SlabRow> {
    cfg.validate(delta)?;
    let slab = cfg.construction.slab(delta);
    let threshold = cfg.c * delta.powf(cfg.construction.exponent());
    let xmax = cfg.x_frac * slab.a;
    let (th_lo, th_hi) = cfg.theta_range(delta);
    let mid = |lo: f64, hi: f64, n: usize, k: usize| lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
    let ts: Vec<f64> = (0..cfg.n_t).map(|k| mid(cfg.delta2, 2.0 * cfg.delta2, cfg.n_t, k)).collect();
    let pairs: Vec<(f64, f64)> = (0..cfg.n_x)
        .flat_map(|i| (0..cfg.n_theta).map(move |j| (i, j)))
        .map(|(i, j)| (mid(-xmax, xmax, cfg.n_x, i), mid(th_lo, th_hi, cfg.n_theta, j)))
        .collect();
    let cell = (2.0 * xmax / cfg.n_x as f64) * ((th_hi - th_lo) / cfg.n_theta as f64) * (cfg.delta2 / cfg.n_t as f64);
    let region = |y: Vec3| slab.contains(y);
    let samples = crate::par::try_map_slice(&pairs, |(x1, th)| -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let path = launch(m, *x1, *th, 0.0, cfg.alpha, cfg.step)?;
        let a = tube_fraction(&path, 0.0, cfg.alpha, delta, &region, cfg.disc);
        let dets = kappa_dets(m, *x1, *th, &ts, cfg.alpha, cfg.step, cfg.fd_eps)?;
        let vols = ts.iter().zip(&dets).map(|(t, d)| d.abs() * m.sqrt_det(path.position(*t))).collect();
        Ok((a, dets, vols))
    })?;
    let (mut omega_star, mut param, mut fq) = (0.0, 0.0, 0.0);
    let (mut min_f, mut max_f) = (f64::INFINITY, 0.0f64);
    let (mut r_lo, mut r_hi) = (f64::INFINITY, 0.0f64);
    let mut good = 0usize;
    for ((_, th), (a, dets, vols)) in pairs.iter().zip(&samples) {
        for d in dets {
            let r = d.abs() / th;
            r_lo = r_lo.min(r);
            r_hi = r_hi.max(r);
        }
        if *a < threshold {
            continue;
        }
        good += 1;
        min_f = min_f.min(*a);
        max_f = max_f.max(*a);
        let w: f64 = vols.iter().sum::<f64>() * cell;
        omega_star += w;
        param += cell * ts.len() as f64;
        fq += a.powf(cfg.q) * w;
    }
    let h = cfg.grid_ratio * delta;
    let field = ScalarField::from_fn(h, &slab.bounds(), |x| slab.cell_fraction(la::sub(x, [h / 2.0; 3]), h));
    let omega_volume_grid = field.values.iter().sum::<f64>() * h.powi(3);
    let f_p = lp_norm(m.as_ref(), &field, cfg.p);
    let fstar_q = fq.powf(1.0 / cfg.q);
    Ok(SlabRow {
        delta,
        a: slab.a,
        threshold,
        omega_volume: slab.volume(),
        omega_volume_grid,
        f_p,
        omega_star,
        param_measure: param,
        min_fstar: if good > 0 { min_f } else { 0.0 },
        max_fstar: max_f,
        fstar_q,
        ratio: fstar_q / f_p,
        good_fraction: good as f64 / pairs.len() as f64,
        det_over_theta: (r_lo, r_hi),
        grid_cells: field.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DetScan {
    pub delta1: f64,
    pub delta2: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

/// `|det κ′|/θ` over `|x₁| ≤ x_max`, `θ ∈ [δ₁/2, δ₁]`, `t ∈ [δ₂, 2δ₂]` for each candidate pair.
pub fn scan_det_ratio(m: &Arc<dyn Metric>, x_max: f64, delta1s: &[f64], delta2s: &[f64], h: f64) -> Result<Vec<DetScan>> {
    let jobs: Vec<(f64, f64)> = delta1s.iter().flat_map(|d1| delta2s.iter().map(move |d2| (*d1, *d2))).collect();
    crate::par::try_map_slice(&jobs, |(d1, d2)| {
        let ts: Vec<f64> = (0..5).map(|k| d2 * (1.0 + k as f64 / 4.0)).collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..5 {
            let x1 = x_max * (i as f64 / 2.0 - 1.0);
            for j in 0..3 {
                let th = d1 * (0.5 + j as f64 / 4.0);
                for d in kappa_dets(m, x1, th, &ts, 2.0 * d2, h, 1e-5)? {
                    lo = lo.min(d.abs() / th);
                    hi = hi.max(d.abs() / th);
                }
            }
        }
        Ok(DetScan { delta1: *d1, delta2: *d2, ratio_min: lo, ratio_max: hi })
    })
}

/// The scanned pair with the most uniform `|det κ′|/θ`, i.e. smallest max/min.
pub fn pick_calibration(scan: &[DetScan]) -> Option<&DetScan> {
    scan.iter().filter(|s| s.ratio_min > 0.0).min_by(|a, b| (a.ratio_max / a.ratio_min).total_cmp(&(b.ratio_max / b.ratio_min)))
}

#[derive(Clone, Debug, Serialize)]
pub struct TrappingReport {
    pub delta: f64,
    pub samples: usize,
    pub trapped: usize,
    /// `max |γ³| / 2δ` over all samples
    pub worst: f64,
}

/// Samples `|x₁| ≤ c δ^{1/5}`, `|θ| ≤ c δ^{2/5}` and checks `|γ³(t)| ≤ 2δ` for `|t| ≤ α`.
pub fn trapping(m: &Arc<dyn Metric>, delta: f64, c: f64, alpha: f64, samples: usize, seed: u64, h: f64) -> Result<TrappingReport> {
    let (xm, tm) = (c * delta.powf(0.2), c * delta.powf(0.4));
    let params: Vec<(f64, f64)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples).map(|_| (rng.gen_range(-xm..=xm), rng.gen_range(-tm..=tm))).collect()
    };
    let worst = crate::par::try_map_slice(&params, |(x1, th)| -> Result<f64> {
        let path = launch(m, *x1, *th, -alpha, alpha, h)?;
        Ok(path.samples(alpha / 400.0).iter().fold(0.0f64, |w, (_, x)| w.max(x[2].abs())))
    })?;
    let bound = 2.0 * delta;
    Ok(TrappingReport {
        delta,
        samples,
        trapped: worst.iter().filter(|w| **w <= bound).count(),
        worst: worst.iter().fold(0.0f64, |a, b| a.max(*b)) / bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{BuiltinKind, BuiltinMetric};

    fn euclid() -> Arc<dyn Metric> {
        Arc::new(BuiltinMetric::new(BuiltinKind::Euclidean).unwrap())
    }

    #[test]
    fn cell_fractions_sum_to_volume() {
        let slab = DiamondSlab { center1: 0.013, a: 0.37, b: 0.05 };
        let h = 0.0231;
        let f = ScalarField::from_fn(h, &slab.bounds(), |x| slab.cell_fraction(la::sub(x, [h / 2.0; 3]), h));
        let total: f64 = f.values.iter().sum::<f64>() * h.powi(3);
        assert!((total / slab.volume() - 1.0).abs() < 1e-12);
        // unit cell cut by the diagonal x + y ≤ 1: half the square, full height
        let tri = DiamondSlab { center1: 0.0, a: 1.0, b: 5.0 };
        assert!((tri.cell_fraction([0.0, 0.0, 0.0], 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn euclidean_line_fraction() {
        // a straight tube along x₁ through a slab of half-thickness ≥ δ: chord/α
        let m = euclid();
        let slab = DiamondSlab { center1: 0.0, a: 0.3, b: 0.05 };
        let path = launch(&m, -0.1, 0.0, 0.0, 1.0, 1e-3).unwrap();
        let f = tube_fraction(&path, 0.0, 1.0, 0.01, &|y| slab.contains(y), DiscRule::default());
        assert!((f - 0.4).abs() < 0.02, "{f}");
    }

    #[test]
    fn euclidean_dets_vanish() {
        // straight lines from the axis stay in the plane x₃ = 0
        let m = euclid();
        let d = kappa_dets(&m, 0.1, 0.2, &[0.3, 0.5], 1.0, 1e-3, 1e-5).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn coarse_grid_refused() {
        let m = euclid();
        let cfg = SlabConfig { grid_ratio: 0.5, ..SlabConfig::sogge() };
        assert!(matches!(slab_row(&m, &cfg, 0.125), Err(Error::Precondition(_))));
    }

    #[test]
    fn euclidean_geodesics_are_trapped() {
        let r = trapping(&euclid(), 1.0 / 64.0, 0.3, 1.0, 10, 5, 1e-3).unwrap();
        assert_eq!(r.trapped, 10);
        assert!(r.worst < 1e-12);
    }

    #[test]
    fn calibration_prefers_uniform_ratio() {
        let s = |d2, lo, hi| DetScan { delta1: 0.2, delta2: d2, ratio_min: lo, ratio_max: hi };
        let scan = [s(0.1, 1e-6, 1e-3), s(0.5, 0.004, 0.08), s(0.25, 0.0, 0.01)];
        assert_eq!(pick_calibration(&scan).unwrap().delta2, 0.5);
    }
}
