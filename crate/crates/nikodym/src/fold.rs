//! The model canonical relation: the maps `κ_r`, `κ_l` built from
//! `p(x₁; τ) = −ρτ³/12 − ρ′τ⁴/24`, `q = p/τ`, `τ = y₁ − x₁`, their singular
//! loci, and fold Hessians.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::la::{self, Mat3, Vec3};
use crate::scalar::{Scalar, D1, D3};

/// The curvature profile `ρ(x₁)` along the axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Rho {
    /// `Σ c_k x^k`
    Poly(Vec<f64>),
    /// `a sin(w x + φ)`
    Sin { a: f64, w: f64, phi: f64 },
}

impl Rho {
    pub fn zero() -> Self {
        Rho::Poly(vec![])
    }

    pub fn constant(c: f64) -> Self {
        Rho::Poly(vec![c])
    }

    pub fn affine(c0: f64, c1: f64) -> Self {
        Rho::Poly(vec![c0, c1])
    }

    /// `k`-th derivative at `x`.
    pub fn eval<S: Scalar>(&self, x: S, k: usize) -> S {
        match self {
            Rho::Poly(c) => {
                let mut acc = S::cst(0.0);
                for n in (k..c.len()).rev() {
                    let falling: f64 = (n - k + 1..=n).map(|m| m as f64).product();
                    acc = acc * x + c[n] * falling;
                }
                acc
            }
            Rho::Sin { a, w, phi } => {
                let shift = k as f64 * std::f64::consts::FRAC_PI_2;
                (x * *w + (*phi + shift)).sin() * (a * w.powi(k as i32))
            }
        }
    }

    pub fn at(&self, x: f64) -> f64 {
        self.eval(x, 0)
    }

    pub fn d(&self, x: f64) -> f64 {
        self.eval(x, 1)
    }
}

/// `p`, `q` and their closed-form first partials as functions of `(x₁, y₁)`.
#[derive(Clone, Debug, Serialize)]
pub struct ModelFamily {
    pub rho: Rho,
}

impl ModelFamily {
    pub fn new(rho: Rho) -> Self {
        ModelFamily { rho }
    }

    pub fn p<S: Scalar>(&self, x1: S, y1: S) -> S {
        let t = y1 - x1;
        let t3 = t * t * t;
        -(self.rho.eval(x1, 0) * t3) / 12.0 - self.rho.eval(x1, 1) * t3 * t / 24.0
    }

    pub fn q<S: Scalar>(&self, x1: S, y1: S) -> S {
        let t = y1 - x1;
        -(self.rho.eval(x1, 0) * t * t) / 12.0 - self.rho.eval(x1, 1) * t * t * t / 24.0
    }

    /// `∂p/∂y₁ = −ρτ²/4 − ρ′τ³/6`
    pub fn p_y<S: Scalar>(&self, x1: S, y1: S) -> S {
        let t = y1 - x1;
        -(self.rho.eval(x1, 0) * t * t) / 4.0 - self.rho.eval(x1, 1) * t * t * t / 6.0
    }

    /// `∂p/∂x₁ = ρτ²/4 + ρ′τ³/12 − ρ″τ⁴/24`
    pub fn p_x<S: Scalar>(&self, x1: S, y1: S) -> S {
        let t = y1 - x1;
        let t2 = t * t;
        self.rho.eval(x1, 0) * t2 / 4.0 + self.rho.eval(x1, 1) * t2 * t / 12.0 - self.rho.eval(x1, 2) * t2 * t2 / 24.0
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityResiduals {
    pub lhs1: f64,
    pub lhs2: f64,
    /// `∂²q/∂x₁² − ∂³p/∂x₁²∂y₁ − (ρ/3 + ρ′τ/12)`
    pub r1: f64,
    /// `∂²q/∂y₁² − ∂³p/∂x₁∂y₁² − (−2ρ/3 − 3ρ′τ/4)`
    pub r2: f64,
}

/// Residuals of the two third-order identities, derivatives by automatic differentiation.
pub fn identity_check(fam: &ModelFamily, x1: f64, y1: f64) -> Result<IdentityResiduals> {
    if x1 == y1 {
        return Err(Error::Invalid("need y₁ ≠ x₁".into()));
    }
    let (a, b) = (D3::var(x1, 0), D3::var(y1, 1));
    let p = fam.p(a, b);
    let q = fam.q(a, b);
    let t = y1 - x1;
    let (r, rp) = (fam.rho.at(x1), fam.rho.d(x1));
    let lhs1 = q.partial(&[0, 0]) - p.partial(&[0, 0, 1]);
    let lhs2 = q.partial(&[1, 1]) - p.partial(&[0, 1, 1]);
    Ok(IdentityResiduals {
        lhs1,
        lhs2,
        r1: lhs1 - (r / 3.0 + rp * t / 12.0),
        r2: lhs2 - (-2.0 * r / 3.0 - 0.75 * rp * t),
    })
}

/// A smooth map `ℝ³ → ℝ³` whose singularities are classified.
pub trait FoldMap: Sync {
    fn eval(&self, u: Vec3) -> Vec3;

    /// Jacobian `J[i][j] = ∂χ_i/∂u_j`; defaults to fourth-order differences.
    fn jacobian(&self, u: Vec3) -> Mat3 {
        let e = 1e-4;
        let mut j = [[0.0; 3]; 3];
        for c in 0..3 {
            let at = |o: f64| {
                let mut w = u;
                w[c] += o * e;
                self.eval(w)
            };
            let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
            for r in 0..3 {
                j[r][c] = (m2[r] - 8.0 * m1[r] + 8.0 * p1[r] - p2[r]) / (12.0 * e);
            }
        }
        j
    }
}

/// Any closure as a map, e.g. a numerically built canonical relation.
pub struct FnMap<F>(pub F);

impl<F: Fn(Vec3) -> Vec3 + Sync> FoldMap for FnMap<F> {
    fn eval(&self, u: Vec3) -> Vec3 {
        (self.0)(u)
    }
}

/// `z ↦ κ_r(z)` for fixed `y₁` and `ξ`:
/// `(z₂ − z₃q, z₃ + z₂q, τ⁻¹[(z₂,z₃)·ξ + ∂p/∂y₁ (−z₃,z₂)·ξ])`, `τ = y₁ − z₁`.
#[derive(Clone, Debug)]
pub struct KappaR {
    pub fam: ModelFamily,
    pub y1: f64,
    pub xi: [f64; 2],
}

impl KappaR {
    fn map<S: Scalar>(&self, z: [S; 3]) -> [S; 3] {
        let y1 = S::cst(self.y1);
        let q = self.fam.q(z[0], y1);
        let py = self.fam.p_y(z[0], y1);
        let t = y1 - z[0];
        let dot = z[1] * self.xi[0] + z[2] * self.xi[1];
        let rot = z[2] * (-self.xi[0]) + z[1] * self.xi[1];
        [z[1] - z[2] * q, z[2] + z[1] * q, (dot + py * rot) / t]
    }
}

impl FoldMap for KappaR {
    fn eval(&self, u: Vec3) -> Vec3 {
        self.map(u)
    }

    fn jacobian(&self, u: Vec3) -> Mat3 {
        let z = [D1::var(u[0], 0), D1::var(u[1], 1), D1::var(u[2], 2)];
        let k = self.map(z);
        std::array::from_fn(|i| std::array::from_fn(|j| k[i].d[j]))
    }
}

/// `(η₁, η₂, y₁) ↦ κ_l` for fixed `x`:
/// `(η₁ + qη₂, η₂ − qη₁, (x₁−y₁)⁻¹[η·(x₂,x₃) − ∂p/∂x₁ (−η₂,η₁)·(x₂,x₃)])`.
#[derive(Clone, Debug)]
pub struct KappaL {
    pub fam: ModelFamily,
    pub x: Vec3,
}

impl KappaL {
    fn map<S: Scalar>(&self, u: [S; 3]) -> [S; 3] {
        let x1 = S::cst(self.x[0]);
        let (e1, e2, y1) = (u[0], u[1], u[2]);
        let q = self.fam.q(x1, y1);
        let px = self.fam.p_x(x1, y1);
        let dot = e1 * self.x[1] + e2 * self.x[2];
        let rot = e2 * (-self.x[1]) + e1 * self.x[2];
        [e1 + q * e2, e2 - q * e1, (dot - px * rot) / (x1 - y1)]
    }
}

impl FoldMap for KappaL {
    fn eval(&self, u: Vec3) -> Vec3 {
        self.map(u)
    }

    fn jacobian(&self, u: Vec3) -> Mat3 {
        let v = [D1::var(u[0], 0), D1::var(u[1], 1), D1::var(u[2], 2)];
        let k = self.map(v);
        std::array::from_fn(|i| std::array::from_fn(|j| k[i].d[j]))
    }
}

/// Bisection for a sign change of `f` on `[a, b]`; `None` without a sign change.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Singular `κ_r` at `z`: solves `det κ_r′(z) = 0` for `ξ₁` with `ξ₂ = 1` on
/// `[−span, span]`, then normalizes `|ξ| = 1`. Re-verified: `|det| ≤ 1e-10`.
pub fn singular_kappa_r(fam: &ModelFamily, z: Vec3, y1: f64, span: f64) -> Option<KappaR> {
    let det_at = |xi1: f64| la::det(&KappaR { fam: fam.clone(), y1, xi: [xi1, 1.0] }.jacobian(z));
    let xi1 = bisect(det_at, -span, span)?;
    let n = (xi1 * xi1 + 1.0).sqrt();
    let k = KappaR { fam: fam.clone(), y1, xi: [xi1 / n, 1.0 / n] };
    (la::det(&k.jacobian(z)).abs() <= 1e-10).then_some(k)
}

/// Singular `κ_l` at `(η, y₁)`: solves `det κ_l′ = 0` for `x₃` on `[lo, hi]`
/// with `x₁, x₂` fixed. Re-verified: `|det| ≤ 1e-10`.
pub fn singular_kappa_l(fam: &ModelFamily, x1: f64, x2: f64, eta: [f64; 2], y1: f64, lo: f64, hi: f64) -> Option<KappaL> {
    let u = [eta[0], eta[1], y1];
    let det_at = |x3: f64| la::det(&KappaL { fam: fam.clone(), x: [x1, x2, x3] }.jacobian(u));
    let x3 = bisect(det_at, lo, hi)?;
    let k = KappaL { fam: fam.clone(), x: [x1, x2, x3] };
    (la::det(&k.jacobian(u)).abs() <= 1e-10).then_some(k)
}

/// Singular points of `κ_r` over seed points `z`, searching `ξ₁ ∈ [−span, span]`.
pub fn find_singular_locus(fam: &ModelFamily, seeds: &[Vec3], y1: f64, span: f64) -> Vec<(Vec3, [f64; 2])> {
    seeds.iter().filter_map(|z| singular_kappa_r(fam, *z, y1, span).map(|k| (*z, k.xi))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FoldClass {
    /// rank `d − 1` and non-vanishing Hessian
    Fold,
    /// rank `d − 1` with vanishing Hessian
    NotFold,
    /// full rank at the point
    Regular,
    /// rank below `d − 1`
    NotClassifiable,
}

#[derive(Clone, Debug, Serialize)]
pub struct FoldReport {
    pub hess: f64,
    pub kernel: Vec3,
    pub cokernel: Vec3,
    /// ascending
    pub singular_values: Vec3,
    pub class: FoldClass,
}

pub const SINGULAR_TOL: f64 = 1e-8;
pub const RANK_TOL: f64 = 1e-4;
pub const HESS_TOL: f64 = 1e-6;

/// Kernel and cokernel of the Jacobian by SVD and the second derivative of
/// `⟨χ, Y⟩` along `X` by central differences with step `e`.
pub fn fold_hessian(map: &dyn FoldMap, u: Vec3) -> FoldReport {
    let j = map.jacobian(u);
    let svd = Matrix3::from_fn(|r, c| j[r][c]).svd(true, true);
    let (uu, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));
    let sv = [svd.singular_values[order[0]], svd.singular_values[order[1]], svd.singular_values[order[2]]];
    let k = order[0];
    let kernel = [vt[(k, 0)], vt[(k, 1)], vt[(k, 2)]];
    let cokernel = [uu[(0, k)], uu[(1, k)], uu[(2, k)]];
    let class = if sv[0] > SINGULAR_TOL {
        FoldClass::Regular
    } else if sv[1] < RANK_TOL {
        FoldClass::NotClassifiable
    } else {
        FoldClass::NotFold
    };
    let scale = la::norm(u).max(1e-3);
    let e = 1e-3 * scale;
    let pair = |s: f64| la::dot(map.eval(la::axpy(u, s, kernel)), cokernel);
    let hess = ((pair(e) - 2.0 * pair(0.0) + pair(-e)) / (e * e)).abs();
    let class = if class == FoldClass::NotFold && hess > HESS_TOL { FoldClass::Fold } else { class };
    FoldReport { hess, kernel, cokernel, singular_values: sv, class }
}

/// `|(z₂,z₃)| |ρ/3 + ρ′τ/12|`
pub fn predicted_hess_r(fam: &ModelFamily, z: Vec3, y1: f64) -> f64 {
    let t = y1 - z[0];
    (z[1] * z[1] + z[2] * z[2]).sqrt() * (fam.rho.at(z[0]) / 3.0 + fam.rho.d(z[0]) * t / 12.0).abs()
}

/// `|−2ρ/3 − 3ρ′τ/4|`
pub fn predicted_hess_l(fam: &ModelFamily, x1: f64, y1: f64) -> f64 {
    let t = y1 - x1;
    (-2.0 * fam.rho.at(x1) / 3.0 - 0.75 * fam.rho.d(x1) * t).abs()
}

#[derive(Clone, Debug, Serialize)]
pub struct FoldTrial {
    pub tau: f64,
    pub x1: f64,
    pub rho: f64,
    pub rho_prime: f64,
    pub ratio_r: Option<f64>,
    pub class_r: Option<FoldClass>,
    pub ratio_l: Option<f64>,
    pub class_l: Option<FoldClass>,
    /// some located map has `hess ≥ ½ prediction`
    pub remark_ok: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FoldTrialReport {
    pub rho: Rho,
    pub trials: Vec<FoldTrial>,
    /// per `τ`: fraction of located trials with `|ρ| ≥ 0.5` and ratio in `[0.8, 1.2]`, for `κ_r` and `κ_l`
    pub within_band: Vec<(f64, f64, f64)>,
    /// fraction of located singular points classified as folds
    pub fold_fraction: f64,
    /// `|ρ| + |ρ′|` vanishes at every probe
    pub chaotic_violated: bool,
    pub located: usize,
    pub skipped: usize,
}

/// Locates singular points of `κ_r` and `κ_l` at random admissible data for each
/// `τ` and compares the fold Hessians with the leading-term predictions.
pub fn fold_trials(rho: &Rho, taus: &[f64], trials: usize, seed: u64) -> Result<FoldTrialReport> {
    if taus.iter().any(|t| !(0.01..=0.1).contains(&t.abs())) {
        return Err(Error::Invalid("τ must lie in [0.01, 0.1]".into()));
    }
    let fam = ModelFamily::new(rho.clone());
    let jobs: Vec<(f64, usize)> = taus.iter().flat_map(|t| (0..trials).map(move |k| (*t, k))).collect();
    let out: Vec<FoldTrial> = crate::par::map_slice(&jobs, |(tau, k)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((*k as u64) << 20) ^ tau.to_bits());
        let x1: f64 = rng.gen_range(-1.5..1.5);
        let y1 = x1 + tau;
        let r: f64 = rng.gen_range(0.5..2.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let z = [x1, tau * r * phi.cos(), tau * r * phi.sin()];
        let kr = singular_kappa_r(&fam, z, y1, 10.0);
        let rep_r = kr.as_ref().map(|k| fold_hessian(k, z));
        let pr = predicted_hess_r(&fam, z, y1);
        let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let eta = [ang.cos(), ang.sin()];
        let x2: f64 = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let kl = singular_kappa_l(&fam, x1, x2, eta, y1, -20.0, 20.0).filter(|k| {
            let n = k.x[1].hypot(k.x[2]);
            (0.5..=2.0).contains(&n)
        });
        let rep_l = kl.as_ref().map(|k| fold_hessian(k, [eta[0], eta[1], y1]));
        let pl = predicted_hess_l(&fam, x1, y1);
        let ratio = |h: f64, p: f64| if p > 0.0 { h / p } else { f64::INFINITY };
        let ratio_r = rep_r.as_ref().map(|f| ratio(f.hess, pr));
        let ratio_l = rep_l.as_ref().map(|f| ratio(f.hess, pl));
        let remark_ok = match (ratio_r, ratio_l) {
            (Some(a), Some(b)) => Some(a >= 0.5 || b >= 0.5),
            _ => None,
        };
        FoldTrial {
            tau: *tau,
            x1,
            rho: fam.rho.at(x1),
            rho_prime: fam.rho.d(x1),
            ratio_r,
            class_r: rep_r.map(|f| f.class),
            ratio_l,
            class_l: rep_l.map(|f| f.class),
            remark_ok,
        }
    });
    let mut within_band = Vec::new();
    for t in taus {
        let sel: Vec<&FoldTrial> = out.iter().filter(|r| r.tau == *t && r.rho.abs() >= 0.5).collect();
        let frac = |get: &dyn Fn(&FoldTrial) -> Option<f64>| {
            let v: Vec<f64> = sel.iter().filter_map(|r| get(r)).collect();
            if v.is_empty() {
                return f64::NAN;
            }
            v.iter().filter(|x| (0.8..=1.2).contains(*x)).count() as f64 / v.len() as f64
        };
        within_band.push((*t, frac(&|r| r.ratio_r), frac(&|r| r.ratio_l)));
    }
    let classes: Vec<FoldClass> = out.iter().flat_map(|r| r.class_r.into_iter().chain(r.class_l)).collect();
    let located = classes.len();
    let fold_fraction = if located == 0 {
        0.0
    } else {
        classes.iter().filter(|c| **c == FoldClass::Fold).count() as f64 / located as f64
    };
    let chaotic_violated = out.iter().all(|r| r.rho.abs() + r.rho_prime.abs() < 1e-12);
    Ok(FoldTrialReport { rho: rho.clone(), skipped: 2 * out.len() - located, trials: out, within_band, fold_fraction, chaotic_violated, located })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_derivatives() {
        let r = Rho::Poly(vec![1.0, 2.0, 3.0]);
        assert_eq!(r.at(2.0), 17.0);
        assert_eq!(r.d(2.0), 14.0);
        assert_eq!(r.eval(2.0, 2), 6.0);
        assert_eq!(r.eval(2.0, 3), 0.0);
        let s = Rho::Sin { a: 2.0, w: 3.0, phi: 0.1 };
        assert!((s.d(0.4) - 6.0 * (1.2f64 + 0.1).cos()).abs() < 1e-14);
    }

    #[test]
    fn closed_form_partials_match_ad() {
        let fam = ModelFamily::new(Rho::Sin { a: 1.0, w: 1.0, phi: 0.3 });
        let (x, y) = (0.2, 0.27);
        let p = fam.p(D1::var(x, 0), D1::var(y, 1));
        assert!((p.d[1] - fam.p_y(x, y)).abs() < 1e-15);
        assert!((p.d[0] - fam.p_x(x, y)).abs() < 1e-15);
        assert!((fam.q(x, y) * (y - x) - fam.p(x, y)).abs() < 1e-18);
    }

    #[test]
    fn flat_singular_set_is_orthogonality() {
        let fam = ModelFamily::new(Rho::zero());
        let z = [0.1, 0.03, -0.02];
        let k = singular_kappa_r(&fam, z, 0.15, 10.0).unwrap();
        assert!((z[1] * k.xi[0] + z[2] * k.xi[1]).abs() < 1e-12);
        let f = fold_hessian(&k, z);
        assert_eq!(f.class, FoldClass::NotFold);
    }

    #[test]
    fn constant_rho_is_fold() {
        let fam = ModelFamily::new(Rho::constant(1.0));
        let (z1, y1) = (0.0, 0.05);
        let z = [z1, 0.05, 0.0];
        let k = singular_kappa_r(&fam, z, y1, 10.0).unwrap();
        let f = fold_hessian(&k, z);
        assert_eq!(f.class, FoldClass::Fold);
        let pred = predicted_hess_r(&fam, z, y1);
        assert!((f.hess / pred - 1.0).abs() < 0.2, "{} vs {}", f.hess, pred);
    }

    #[test]
    fn identities_exact_for_affine_rho() {
        let fam = ModelFamily::new(Rho::affine(1.0, 2.0));
        let r = identity_check(&fam, 0.3, 0.5).unwrap();
        // ⅓ρ(0.3) + (2)(0.2)/12 by hand
        assert!((r.lhs1 - (1.6 / 3.0 + 0.4 / 12.0)).abs() < 1e-10);
        assert!(r.r1.abs() < 1e-12 && r.r2.abs() < 1e-12);
        assert!(identity_check(&fam, 0.1, 0.1).is_err());
    }

    #[test]
    fn identity_residual_is_quadratic_for_quadratic_rho() {
        let fam = ModelFamily::new(Rho::Poly(vec![0.5, -1.0, 3.0]));
        let mut tau = 0.2;
        let mut prev = identity_check(&fam, 0.1, 0.1 + tau).unwrap().r1;
        for _ in 0..4 {
            tau /= 2.0;
            let r = identity_check(&fam, 0.1, 0.1 + tau).unwrap().r1;
            assert!(((prev / r).log2() - 2.0).abs() < 0.1);
            // leading term −(7/12)ρ″τ²
            assert!((r / (-7.0 / 12.0 * 6.0 * tau * tau) - 1.0).abs() < 0.05);
            prev = r;
        }
    }

    #[test]
    fn singular_direction_leading_term() {
        let fam = ModelFamily::new(Rho::constant(1.0));
        for tau in [0.1, 0.05, 0.025] {
            let z = [0.0, tau, 0.0];
            let k = singular_kappa_r(&fam, z, tau, 10.0).unwrap();
            let (a, b) = (D3::var(0.0, 0), D3::var(tau, 1));
            let (q, p) = (fam.q(a, b), fam.p(a, b));
            let pred = tau * (q.partial(&[0]) - p.partial(&[1]) / tau - p.partial(&[0, 1]));
            assert!((k.xi[0] / k.xi[1] - pred).abs() < tau.powi(3));
        }
    }

    #[test]
    fn hessian_with_vanishing_rho() {
        // ρ(0) = 0, ρ′(0) = 1: only the τ/12 term survives
        let fam = ModelFamily::new(Rho::affine(0.0, 1.0));
        let tau = 0.05;
        let z = [0.0, 0.8 * tau, 0.6 * tau];
        let k = singular_kappa_r(&fam, z, tau, 10.0).unwrap();
        let f = fold_hessian(&k, z);
        assert!((f.hess / tau / (tau / 12.0) - 1.0).abs() < 0.2);
    }

    #[test]
    fn fold_trial_bands() {
        let r = fold_trials(&Rho::affine(1.0, 0.5), &[0.05, 0.0125], 20, 3).unwrap();
        assert!(r.within_band.iter().all(|(_, a, b)| *a >= 0.9 && *b >= 0.9));
        assert_eq!(r.fold_fraction, 1.0);
        assert!(r.trials.iter().all(|t| t.remark_ok != Some(false)));
        let flat = fold_trials(&Rho::zero(), &[0.05], 20, 3).unwrap();
        assert!(flat.chaotic_violated);
        assert!(flat.trials.iter().flat_map(|t| t.class_r.into_iter().chain(t.class_l)).all(|c| c == FoldClass::NotFold));
        assert!(fold_trials(&Rho::zero(), &[0.5], 1, 0).is_err());
    }
}
