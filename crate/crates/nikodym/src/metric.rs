//! Riemannian metrics on boxes in ℝ³ and their partial derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::la::{self, Mat3, Vec3, ZERO3};
use crate::scalar::{seed, Scalar, D1, D2, D3};

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Aabb {
    pub fn new(lo: Vec3, hi: Vec3) -> Self {
        Aabb { lo, hi }
    }

    pub fn cube(r: f64) -> Self {
        Aabb { lo: [-r; 3], hi: [r; 3] }
    }

    pub fn contains(&self, x: Vec3) -> bool {
        (0..3).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    /// Largest side length.
    pub fn scale(&self) -> f64 {
        (0..3).map(|i| self.hi[i] - self.lo[i]).fold(0.0, f64::max)
    }

    pub fn sample(&self, u: Vec3) -> Vec3 {
        std::array::from_fn(|i| self.lo[i] + u[i] * (self.hi[i] - self.lo[i]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { h: f64 },
}

/// Metric with partial derivatives at a point: `d1[i][j][k] = ∂_i g_jk`,
/// `d2[i][l][j][k] = ∂_i ∂_l g_jk`, and so on.
#[derive(Clone, Debug)]
pub struct Jet {
    pub g: Mat3,
    pub d1: [Mat3; 3],
    pub d2: [[Mat3; 3]; 3],
    pub d3: [[[Mat3; 3]; 3]; 3],
}

impl Jet {
    fn zero() -> Self {
        Jet { g: ZERO3, d1: [ZERO3; 3], d2: [[ZERO3; 3]; 3], d3: [[[ZERO3; 3]; 3]; 3] }
    }

    /// Partial of `g_jk` along the multi-index `idx` (length ≤ 3).
    pub fn partial(&self, idx: &[usize], j: usize, k: usize) -> f64 {
        match idx {
            [] => self.g[j][k],
            [a] => self.d1[*a][j][k],
            [a, b] => self.d2[*a][*b][j][k],
            [a, b, c] => self.d3[*a][*b][*c][j][k],
            _ => panic!("derivative order above 3"),
        }
    }
}

/// A smooth symmetric positive-definite 3×3 field on a box.
pub trait Metric: Send + Sync {
    fn name(&self) -> String;

    fn domain(&self) -> Aabb;

    fn mode(&self) -> DerivativeMode;

    fn g(&self, x: Vec3) -> Mat3;

    /// Metric and first partials; the geodesic hot path.
    fn jet1(&self, x: Vec3) -> (Mat3, [Mat3; 3]) {
        let h = fd_step(self, 1);
        let g = self.g(x);
        let d1 = std::array::from_fn(|i| fd_nested(&|y| self.g(y), x, &[i], h));
        (g, d1)
    }

    /// Partials up to `order` (≤ 3); higher slots are zero.
    fn jet(&self, x: Vec3, order: usize) -> Jet {
        fd_jet(&|y| self.g(y), x, order, fd_step(self, 1), fd_step(self, 3))
    }

    fn sqrt_det(&self, x: Vec3) -> f64 {
        la::det(&self.g(x)).sqrt()
    }
}

impl std::fmt::Debug for dyn Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Metric({})", self.name())
    }
}

fn fd_step<M: Metric + ?Sized>(m: &M, order: usize) -> f64 {
    let base = match m.mode() {
        DerivativeMode::FiniteDifference { h } => h,
        DerivativeMode::Analytic => 1e-3 * m.domain().scale(),
    };
    if order >= 3 {
        base * 10.0
    } else {
        base
    }
}

/// Nested fourth-order central differences along `idx`.
pub fn fd_nested(f: &dyn Fn(Vec3) -> Mat3, x: Vec3, idx: &[usize], h: f64) -> Mat3 {
    let Some((&i, rest)) = idx.split_first() else {
        return f(x);
    };
    const W: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let mut out = ZERO3;
    for (o, w) in W {
        let mut y = x;
        y[i] += o * h;
        let v = fd_nested(f, y, rest, h);
        for a in 0..3 {
            for b in 0..3 {
                out[a][b] += w * v[a][b];
            }
        }
    }
    for row in out.iter_mut() {
        for e in row.iter_mut() {
            *e /= 12.0 * h;
        }
    }
    out
}

fn fd_richardson(f: &dyn Fn(Vec3) -> Mat3, x: Vec3, idx: &[usize], h: f64) -> Mat3 {
    let a = fd_nested(f, x, idx, h);
    let b = fd_nested(f, x, idx, h / 2.0);
    std::array::from_fn(|i| std::array::from_fn(|j| (16.0 * b[i][j] - a[i][j]) / 15.0))
}

/// Finite-difference jet of an arbitrary matrix field.
pub fn fd_jet(f: &dyn Fn(Vec3) -> Mat3, x: Vec3, order: usize, h: f64, h3: f64) -> Jet {
    let mut jet = Jet::zero();
    jet.g = f(x);
    if order >= 1 {
        for i in 0..3 {
            jet.d1[i] = fd_nested(f, x, &[i], h);
        }
    }
    if order >= 2 {
        for i in 0..3 {
            for l in i..3 {
                let v = fd_nested(f, x, &[i, l], h);
                jet.d2[i][l] = v;
                jet.d2[l][i] = v;
            }
        }
    }
    if order >= 3 {
        for a in 0..3 {
            for b in a..3 {
                for c in b..3 {
                    let v = fd_richardson(f, x, &[a, b, c], h3);
                    for p in permutations([a, b, c]) {
                        jet.d3[p[0]][p[1]][p[2]] = v;
                    }
                }
            }
        }
    }
    jet
}

fn permutations(a: [usize; 3]) -> [[usize; 3]; 6] {
    let [x, y, z] = a;
    [[x, y, z], [x, z, y], [y, x, z], [y, z, x], [z, x, y], [z, y, x]]
}

/// Builtin metrics with closed-form components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BuiltinKind {
    Euclidean,
    /// `(1 + K|x|²/4)^{-2} δ`
    SpaceForm { k: f64 },
    /// `dx² + ε a(x₁) dx₂ dx₃` with `a(s) = e^{1/s}` for `s < 0`.
    MsPerturbation { eps: f64 },
    /// `g₁₁ = 1 + (x₂² − x₃²) cos x₁ + 2 x₂ x₃ sin x₁`, other entries Euclidean.
    Sogge,
}

/// Cut below which `a(s) = e^{1/s}` is treated as zero.
const A_CUT: f64 = -1e-8;

impl BuiltinKind {
    pub fn components<S: Scalar>(&self, x: [S; 3]) -> [[S; 3]; 3] {
        let zero = S::cst(0.0);
        let one = S::cst(1.0);
        match *self {
            BuiltinKind::Euclidean => diag(one, one, one, zero),
            BuiltinKind::SpaceForm { k } => {
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                let c = r2 * (k / 4.0) + 1.0;
                let f = (c * c).recip();
                diag(f, f, f, zero)
            }
            BuiltinKind::MsPerturbation { eps } => {
                let a = if x[0].re() < A_CUT { x[0].recip().exp() } else { zero };
                let mut m = diag(one, one, one, zero);
                m[1][2] = a * (eps / 2.0);
                m[2][1] = m[1][2];
                m
            }
            BuiltinKind::Sogge => {
                let (s, c) = (x[0].sin(), x[0].cos());
                let g11 = (x[1] * x[1] - x[2] * x[2]) * c + x[1] * x[2] * s * 2.0 + 1.0;
                diag(g11, one, one, zero)
            }
        }
    }

    pub fn default_domain(&self) -> Aabb {
        match self {
            BuiltinKind::Euclidean => Aabb::cube(2.0),
            BuiltinKind::SpaceForm { .. } => Aabb::cube(1.0),
            BuiltinKind::MsPerturbation { .. } => Aabb::cube(2.0),
            BuiltinKind::Sogge => Aabb::new([-3.2, -0.7, -0.7], [3.2, 0.7, 0.7]),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BuiltinKind::Euclidean => "euclidean".into(),
            BuiltinKind::SpaceForm { k } => format!("space_form({k})"),
            BuiltinKind::MsPerturbation { eps } => format!("ms_perturbation({eps})"),
            BuiltinKind::Sogge => "sogge_example".into(),
        }
    }
}

fn diag<S: Scalar>(a: S, b: S, c: S, z: S) -> [[S; 3]; 3] {
    [[a, z, z], [z, b, z], [z, z, c]]
}

#[derive(Clone, Debug)]
pub struct BuiltinMetric {
    pub kind: BuiltinKind,
    pub domain: Aabb,
}

impl BuiltinMetric {
    pub fn new(kind: BuiltinKind) -> Result<Self> {
        Self::with_domain(kind, kind.default_domain())
    }

    pub fn with_domain(kind: BuiltinKind, domain: Aabb) -> Result<Self> {
        match kind {
            BuiltinKind::SpaceForm { k } => {
                // the conformal factor is monotone in |x|², so the extremes sit at
                // the nearest and farthest points of the box
                let far: f64 = (0..3).map(|i| domain.lo[i].abs().max(domain.hi[i].abs()).powi(2)).sum();
                let near: f64 = (0..3)
                    .map(|i| if domain.lo[i] <= 0.0 && domain.hi[i] >= 0.0 { 0.0 } else { domain.lo[i].abs().min(domain.hi[i].abs()).powi(2) })
                    .sum();
                if !k.is_finite() || 1.0 + k * far / 4.0 <= 0.0 || 1.0 + k * near / 4.0 <= 0.0 {
                    return Err(Error::BadParams(format!("space_form({k}) degenerates inside the domain")));
                }
            }
            BuiltinKind::Sogge => {
                let r2 = (1..3).map(|i| domain.lo[i].abs().max(domain.hi[i].abs()).powi(2)).sum::<f64>();
                if r2 >= 1.0 {
                    return Err(Error::BadParams("sogge_example needs |x'| < 1 on the domain".into()));
                }
            }
            BuiltinKind::MsPerturbation { eps } if eps.abs() >= 2.0 => {
                return Err(Error::BadParams("ms_perturbation needs |ε| < 2".into()));
            }
            _ => {}
        }
        Ok(BuiltinMetric { kind, domain })
    }
}

/// Looks up a builtin by name: `euclidean`, `space_form` (params `[K]`),
/// `ms_perturbation` (params `[ε]`), `sogge_example`.
pub fn builtin_metric(name: &str, params: &[f64]) -> Result<BuiltinMetric> {
    let p = |i: usize, what: &str| {
        params.get(i).copied().ok_or_else(|| Error::BadParams(format!("{name} needs parameter {what}")))
    };
    let kind = match name {
        "euclidean" => BuiltinKind::Euclidean,
        "space_form" => BuiltinKind::SpaceForm { k: p(0, "K")? },
        "ms_perturbation" => BuiltinKind::MsPerturbation { eps: p(0, "eps")? },
        "sogge_example" | "sogge" => BuiltinKind::Sogge,
        _ => return Err(Error::UnknownMetric(name.to_string())),
    };
    BuiltinMetric::new(kind)
}

fn extract<S: Scalar>(c: &[[S; 3]; 3], idx: &[usize]) -> Mat3 {
    std::array::from_fn(|j| std::array::from_fn(|k| c[j][k].partial(idx)))
}

impl Metric for BuiltinMetric {
    fn name(&self) -> String {
        self.kind.label()
    }

    fn domain(&self) -> Aabb {
        self.domain
    }

    fn mode(&self) -> DerivativeMode {
        DerivativeMode::Analytic
    }

    fn g(&self, x: Vec3) -> Mat3 {
        self.kind.components::<f64>(x)
    }

    fn jet1(&self, x: Vec3) -> (Mat3, [Mat3; 3]) {
        let c = self.kind.components::<D1>(seed(x));
        (extract(&c, &[]), std::array::from_fn(|i| extract(&c, &[i])))
    }

    fn jet(&self, x: Vec3, order: usize) -> Jet {
        let mut jet = Jet::zero();
        match order {
            0 => jet.g = self.g(x),
            1 => (jet.g, jet.d1) = self.jet1(x),
            2 => {
                let c = self.kind.components::<D2>(seed(x));
                jet.g = extract(&c, &[]);
                for i in 0..3 {
                    jet.d1[i] = extract(&c, &[i]);
                    for l in 0..3 {
                        jet.d2[i][l] = extract(&c, &[i, l]);
                    }
                }
            }
            _ => {
                let c = self.kind.components::<D3>(seed(x));
                jet.g = extract(&c, &[]);
                for i in 0..3 {
                    jet.d1[i] = extract(&c, &[i]);
                    for l in 0..3 {
                        jet.d2[i][l] = extract(&c, &[i, l]);
                        for n in 0..3 {
                            jet.d3[i][l][n] = extract(&c, &[i, l, n]);
                        }
                    }
                }
            }
        }
        jet
    }
}

/// Metric given by parsed component expressions; derivatives by finite differences.
#[derive(Clone, Debug)]
pub struct ExprMetric {
    label: String,
    /// g11 g12 g13 g22 g23 g33
    comps: [Expr; 6],
    domain: Aabb,
    h: f64,
}

pub const COMPONENT_NAMES: [&str; 6] = ["g11", "g12", "g13", "g22", "g23", "g33"];

impl ExprMetric {
    /// Missing diagonal entries default to 1 and off-diagonal ones to 0.
    pub fn new(label: &str, entries: &[(&str, &str)], domain: Aabb) -> Result<Self> {
        let mut src = ["1", "0", "0", "1", "0", "1"].map(String::from);
        for (k, v) in entries {
            let key = match *k {
                "g21" => "g12",
                "g31" => "g13",
                "g32" => "g23",
                other => other,
            };
            let i = COMPONENT_NAMES
                .iter()
                .position(|n| *n == key)
                .ok_or_else(|| Error::Parse(format!("unknown metric entry `{k}`")))?;
            src[i] = v.to_string();
        }
        let comps = [0, 1, 2, 3, 4, 5].map(|i| Expr::parse(&src[i]));
        let comps = {
            let mut out = Vec::with_capacity(6);
            for c in comps {
                out.push(c?);
            }
            <[Expr; 6]>::try_from(out).expect("six components")
        };
        Ok(ExprMetric { label: label.to_string(), comps, domain, h: 1e-3 * domain.scale() })
    }
}

impl Metric for ExprMetric {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn domain(&self) -> Aabb {
        self.domain
    }

    fn mode(&self) -> DerivativeMode {
        DerivativeMode::FiniteDifference { h: self.h }
    }

    fn g(&self, x: Vec3) -> Mat3 {
        let c: [f64; 6] = std::array::from_fn(|i| self.comps[i].eval(x));
        [[c[0], c[1], c[2]], [c[1], c[3], c[4]], [c[2], c[4], c[5]]]
    }
}

/// Christoffel symbols at a point: `lower[i][j][k] = Γ_ijk`, `upper[i][j][k] = Γ_ij^k`.
#[derive(Clone, Debug)]
pub struct ChristoffelData {
    pub lower: [[[f64; 3]; 3]; 3],
    pub upper: [[[f64; 3]; 3]; 3],
}

/// `2Γ_ijk = g_ik,j + g_jk,i − g_ij,k`
pub fn christoffel_from(g: &Mat3, d1: &[Mat3; 3], x: Vec3) -> Result<ChristoffelData> {
    if !la::is_positive_definite(g) {
        return Err(Error::Singular(x));
    }
    let ginv = la::inverse(g).ok_or(Error::Singular(x))?;
    let mut lower = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                lower[i][j][k] = 0.5 * (d1[j][i][k] + d1[i][j][k] - d1[k][i][j]);
            }
        }
    }
    let mut upper = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                upper[i][j][k] = (0..3).map(|l| lower[i][j][l] * ginv[l][k]).sum();
            }
        }
    }
    Ok(ChristoffelData { lower, upper })
}

pub fn christoffel<M: Metric + ?Sized>(m: &M, x: Vec3) -> Result<ChristoffelData> {
    let (g, d1) = m.jet1(x);
    christoffel_from(&g, &d1, x)
}

#[derive(Clone, Debug)]
pub struct CurvatureData {
    pub riemann: [[[[f64; 3]; 3]; 3]; 3],
    pub ricci: Mat3,
    pub scalar: f64,
    pub einstein: Mat3,
    pub g: Mat3,
    pub ginv: Mat3,
}

impl CurvatureData {
    /// Largest violation of the antisymmetries and pair symmetry.
    pub fn symmetry_residual(&self) -> f64 {
        let r = &self.riemann;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = r[i][j][k][l];
                        worst = worst.max((v + r[j][i][k][l]).abs());
                        worst = worst.max((v + r[i][j][l][k]).abs());
                        worst = worst.max((v - r[k][l][i][j]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest first-Bianchi residual `R_ijkl + R_iklj + R_iljk`.
    pub fn bianchi_residual(&self) -> f64 {
        let r = &self.riemann;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        worst = worst.max((r[i][j][k][l] + r[i][k][l][j] + r[i][l][j][k]).abs());
                    }
                }
            }
        }
        worst
    }

    /// `g^{ij} B_ij`
    pub fn einstein_trace(&self) -> f64 {
        (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| self.ginv[i][j] * self.einstein[i][j]).sum()
    }
}

/// Full curvature from a second-order jet.
///
/// `R_iklm = ½(g_im,kl + g_kl,im − g_il,km − g_km,il) + Γ^n_kl Γ_imn − Γ^n_km Γ_iln`,
/// `R_km = g^{il} R_iklm`, `B = Ric − R g / 3`.
pub fn curvature_from(jet: &Jet, x: Vec3) -> Result<CurvatureData> {
    let ch = christoffel_from(&jet.g, &jet.d1, x)?;
    let ginv = la::inverse(&jet.g).ok_or(Error::Singular(x))?;
    let d2 = &jet.d2;
    let (lo, up) = (&ch.lower, &ch.upper);
    let mut r = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                for m in 0..3 {
                    let lin = 0.5 * (d2[k][l][i][m] + d2[i][m][k][l] - d2[k][m][i][l] - d2[i][l][k][m]);
                    let quad: f64 = (0..3).map(|n| up[k][l][n] * lo[i][m][n] - up[k][m][n] * lo[i][l][n]).sum();
                    r[i][k][l][m] = lin + quad;
                }
            }
        }
    }
    let mut ricci = ZERO3;
    for k in 0..3 {
        for m in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for l in 0..3 {
                    s += ginv[i][l] * r[i][k][l][m];
                }
            }
            ricci[k][m] = s;
        }
    }
    let scalar: f64 = (0..3).flat_map(|k| (0..3).map(move |m| (k, m))).map(|(k, m)| ginv[k][m] * ricci[k][m]).sum();
    let einstein = std::array::from_fn(|a| std::array::from_fn(|b| ricci[a][b] - scalar * jet.g[a][b] / 3.0));
    Ok(CurvatureData { riemann: r, ricci, scalar, einstein, g: jet.g, ginv })
}

pub fn curvature<M: Metric + ?Sized>(m: &M, x: Vec3) -> Result<CurvatureData> {
    curvature_from(&m.jet(x, 2), x)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantCurvatureReport {
    pub max_einstein: f64,
    pub worst_point: Vec3,
    pub verdict: bool,
}

/// Constant curvature holds iff the Einstein tensor vanishes.
pub fn is_constant_curvature<M: Metric + ?Sized>(m: &M, samples: &[Vec3], tol: f64) -> Result<ConstantCurvatureReport> {
    if samples.is_empty() {
        return Err(Error::Invalid("no sample points".into()));
    }
    let mut worst = (0.0f64, samples[0]);
    for &x in samples {
        let c = curvature(m, x)?;
        let b = la::max_abs(&c.einstein);
        if b > worst.0 {
            worst = (b, x);
        }
    }
    Ok(ConstantCurvatureReport { max_einstein: worst.0, worst_point: worst.1, verdict: worst.0 < tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sogge() -> BuiltinMetric {
        BuiltinMetric::new(BuiltinKind::Sogge).unwrap()
    }

    #[test]
    fn sogge_mixed_partial_of_g11() {
        let m = sogge();
        for x1 in [-1.0, 0.0, 0.4, 2.0] {
            let j = m.jet([x1, 0.0, 0.0], 2);
            // oracle: central difference of g11 in x2 and x3
            let h = 1e-4;
            let g11 = |a: f64, b: f64| m.g([x1, a, b])[0][0];
            let fd = (g11(h, h) - g11(h, -h) - g11(-h, h) + g11(-h, -h)) / (4.0 * h * h);
            assert!((j.d2[1][2][0][0] - 2.0 * f64::sin(x1)).abs() < 1e-12);
            assert!((fd - 2.0 * f64::sin(x1)).abs() < 1e-6);
        }
    }

    #[test]
    fn space_form_rejects_degenerate_k() {
        assert!(builtin_metric("space_form", &[-1.0]).is_ok());
        assert!(builtin_metric("space_form", &[-2.0]).is_err());
        assert!(builtin_metric("nope", &[]).is_err());
        assert!(builtin_metric("space_form", &[]).is_err());
    }

    #[test]
    fn ms_christoffel_matches_derivative_of_g23() {
        let eps = 0.1;
        let m = builtin_metric("ms_perturbation", &[eps]).unwrap();
        let ch = christoffel(&m, [-1.0, 0.0, 0.0]).unwrap();
        // Γ_123 = ½ ∂₁ g₂₃ = ε a'(−1)/4, a'(s) = −e^{1/s}/s²
        let want = eps * (-(-1.0f64).recip().exp()) / 4.0;
        assert!((ch.lower[0][1][2] - want).abs() < 1e-15);
        let h = 1e-5;
        let fd = (m.g([-1.0 + h, 0.0, 0.0])[1][2] - m.g([-1.0 - h, 0.0, 0.0])[1][2]) / (2.0 * h) / 2.0;
        assert!((ch.lower[0][1][2] - fd).abs() < 1e-9);
        let flat = christoffel(&m, [0.3, 0.2, -0.1]).unwrap();
        assert!(flat.upper.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn space_form_ricci_is_2k_g() {
        for k in [1.0, -1.0, 0.5] {
            let m = BuiltinMetric::new(BuiltinKind::SpaceForm { k }).unwrap();
            let x = [0.1, 0.2, 0.3];
            let c = curvature(&m, x).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    assert!((c.ricci[a][b] - 2.0 * k * c.g[a][b]).abs() < 1e-12);
                }
            }
            assert!((c.scalar - 6.0 * k).abs() < 1e-12);
        }
    }

    #[test]
    fn sogge_r23_on_axis() {
        let m = sogge();
        for x1 in [0.0, 0.5, std::f64::consts::FRAC_PI_2, -2.0] {
            let c = curvature(&m, [x1, 0.0, 0.0]).unwrap();
            assert!((c.ricci[1][2] + f64::sin(x1)).abs() < 1e-12);
            // R_1213 = −½ g₁₁,₂₃
            assert!((c.riemann[0][1][0][2] + f64::sin(x1)).abs() < 1e-12);
        }
    }

    #[test]
    fn expr_metric_matches_builtin() {
        let e = ExprMetric::new(
            "sogge_expr",
            &[("g11", "1 + (x2^2 - x3^2)*cos(x1) + 2*x2*x3*sin(x1)")],
            Aabb::new([-3.0, -0.6, -0.6], [3.0, 0.6, 0.6]),
        )
        .unwrap();
        let b = sogge();
        let x = [0.7, 0.1, -0.2];
        let (je, jb) = (e.jet(x, 3), b.jet(x, 3));
        for j in 0..3 {
            for k in 0..3 {
                assert!((je.g[j][k] - jb.g[j][k]).abs() < 1e-15);
                for i in 0..3 {
                    assert!((je.d1[i][j][k] - jb.d1[i][j][k]).abs() < 1e-9);
                    for l in 0..3 {
                        assert!((je.d2[i][l][j][k] - jb.d2[i][l][j][k]).abs() < 1e-7);
                        for n in 0..3 {
                            assert!((je.d3[i][l][n][j][k] - jb.d3[i][l][n][j][k]).abs() < 1e-5);
                        }
                    }
                }
            }
        }
        assert!(ExprMetric::new("bad", &[("g44", "1")], Aabb::cube(1.0)).is_err());
    }
}
