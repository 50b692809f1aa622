//! Check commands: tensor identities, Fermi charts, Taylor coefficients, folds,
//! maximal-operator properties, the degenerate metric and the discrete bound.

use std::f64::consts::PI;
use std::sync::Arc;

use anyhow::{bail, Result};
use nikodym::classify::{chaotic_margin, rho_chart, rho_prime_chart, taylor_validate, SIGMA};
use nikodym::combinatorics::{bush_extract, discrete_bound, multiplicity_select, trivial_lower_bound};
use nikodym::fermi::{build_fermi_chart, halton, verify_fermi_conditions, FermiChart};
use nikodym::fold::{fold_trials, identity_check, FoldClass, FoldTrialReport, ModelFamily, Rho};
use nikodym::geodesic::{integrate_geodesic, integrate_span, DEFAULT_STEP};
use nikodym::grid::{superlevel_measure, ScalarField};
use nikodym::maximal::{CompiledMaximal, DirectionNet, GeodesicFamily};
use nikodym::metric::{christoffel, curvature, is_constant_curvature};
use nikodym::tube::{far_from_junction, intersection_reach, intersection_volume, GridTube, Tube};
use nikodym::{la, Aabb, Error, Metric, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{dyadic, ExperimentConfig, MetricSpec};
use crate::report::{Check, Report};

fn shrink(b: Aabb, f: f64) -> Aabb {
    let c: Vec3 = std::array::from_fn(|i| 0.5 * (b.lo[i] + b.hi[i]));
    Aabb::new(std::array::from_fn(|i| c[i] + f * (b.lo[i] - c[i])), std::array::from_fn(|i| c[i] + f * (b.hi[i] - c[i])))
}

fn max_abs(a: &[[f64; 3]; 3]) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

fn riemann_sup(r: &[[[[f64; 3]; 3]; 3]; 3]) -> f64 {
    r.iter().flatten().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Fermi chart about the `x₁`-axis through the origin, clipped to the metric domain.
pub fn axis_chart(m: &Arc<dyn Metric>, half: f64, r: f64) -> Result<FermiChart> {
    let d = m.domain();
    let half = half.min(0.9 * d.hi[0]).min(-0.9 * d.lo[0]);
    let r = (1..3).fold(r, |r, i| r.min(0.9 * d.hi[i]).min(-0.9 * d.lo[i]));
    let base = integrate_span(m, [0.0; 3], [1.0, 0.0, 0.0], -half, half, DEFAULT_STEP)?;
    Ok(build_fermi_chart(base, r)?)
}

#[derive(Serialize)]
struct RicciAxis {
    x1: f64,
    ric23: f64,
    /// `½(g₂₃,₁₂ + g₁₂,₂₃ − g₁₃,₂₂ − g₂₂,₁₃)`
    index_formula: f64,
    /// `−½ g₁₁,₂₃`
    g11_form: f64,
}

pub fn curvature_report(cfg: &ExperimentConfig) -> Result<Report> {
    let m = cfg.metric_or(MetricSpec::named("sogge_example", &[])).build()?;
    let name = m.name();
    let dom = shrink(m.domain(), 0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts: Vec<Vec3> = (0..cfg.samples.max(1)).map(|_| dom.sample(rng.gen())).collect();
    let mut rep =
        Report::new("curvature-report", &name, &["x1", "x2", "x3", "einstein_sup", "einstein_trace", "riemann_symmetry", "bianchi"]);
    let rows = nikodym::par::try_map_slice(&pts, |x| -> nikodym::Result<Vec<f64>> {
        let cd = curvature(m.as_ref(), *x)?;
        Ok(vec![x[0], x[1], x[2], max_abs(&cd.einstein), cd.einstein_trace().abs(), cd.symmetry_residual(), cd.bianchi_residual()])
    })?;
    rows.into_iter().for_each(|r| rep.push_row(r));
    let colmax = |c: &str| rep.column(c).unwrap().into_iter().fold(0.0, f64::max);
    let checks = vec![
        Check::below("einstein_trace", colmax("einstein_trace"), cfg.tol("einstein_trace", 1e-10)),
        Check::below("riemann_symmetry", colmax("riemann_symmetry"), cfg.tol("riemann_symmetry", 1e-9)),
        Check::below("bianchi", colmax("bianchi"), cfg.tol("bianchi", 1e-9)),
    ];
    rep.checks.extend(checks);
    let cc = is_constant_curvature(m.as_ref(), &pts, cfg.tol("constant_curvature", 1e-8))?;
    rep.detail("constant_curvature", &cc);

    if name == "euclidean" || name.starts_with("space_form") {
        rep.checks.push(Check::below("einstein_sup", cc.max_einstein, cfg.tol("einstein_sup", 1e-8)));
    }
    if name == "sogge_example" {
        let b = max_abs(&curvature(m.as_ref(), [PI / 2.0, 0.0, 0.0])?.einstein);
        rep.checks.push(Check::new("einstein_at_half_pi", b >= 0.5, b, "≥ 0.5"));
        let mut worst = 0.0f64;
        for k in 0..=24 {
            let x1 = -3.0 + 0.25 * k as f64;
            worst = worst.max((curvature(m.as_ref(), [x1, 0.0, 0.0])?.ricci[1][2] + x1.sin()).abs());
        }
        rep.checks.push(Check::below("ricci23_axis_vs_minus_sin", worst, 1e-8));
    }
    if name.starts_with("ms_perturbation") {
        let (mut flat, mut other) = (0.0f64, 0.0f64);
        for x in &pts {
            let r = riemann_sup(&curvature(m.as_ref(), *x)?.riemann);
            if x[0] >= 0.0 {
                flat = flat.max(r);
            } else if x[2] >= 0.0 {
                other = other.max(r);
            }
        }
        rep.checks.push(Check::below("flat_for_x1_nonnegative", flat, 1e-12));
        // a flat half-space {x₃ ≥ 0} would make this zero too
        rep.detail("riemann_sup_x1_negative_x3_nonnegative", other);
    }

    if let Ok(chart) = axis_chart(&m, 1.0, 0.3) {
        let mg = chaotic_margin(&chart, 64, cfg.tol("margin_per_unit", 64.0) as usize)?;
        rep.detail("chaotic_margin", serde_json::json!({"min": mg.min, "argmin": mg.argmin, "ricci_slice_gap": mg.ricci_slice_gap, "n_t": mg.n_t, "n_psi": mg.n_psi}));
        let mut axis = Vec::new();
        for k in 0..=8 {
            let x1 = -0.8 + 0.2 * k as f64;
            let x = [x1, 0.0, 0.0];
            let j = m.jet(x, 2);
            let p = |i: usize, l: usize, a: usize, b: usize| j.partial(&[i, l], a, b);
            axis.push(RicciAxis {
                x1,
                ric23: curvature(m.as_ref(), x)?.ricci[1][2],
                index_formula: 0.5 * (p(0, 1, 1, 2) + p(1, 2, 0, 1) - p(1, 1, 0, 2) - p(0, 2, 1, 1)),
                g11_form: -0.5 * p(1, 2, 0, 0),
            });
        }
        rep.detail("ricci_axis", &axis);
        if name == "sogge_example" {
            rep.checks.push(Check::new("chaotic_margin_unit", (mg.min - 1.0).abs() <= 0.02, mg.min, "1 ± 0.02"));
            let (lo, hi) = chart.x1_range();
            let mut worst = 0.0f64;
            for _ in 0..100 {
                let x1 = rng.gen_range(0.9 * lo..0.9 * hi);
                let psi = rng.gen_range(0.0..PI);
                worst = worst.max((rho_chart(&chart, x1, psi)? - (2.0 * psi - x1).sin()).abs());
            }
            rep.checks.push(Check::below("rho_closed_form", worst, cfg.tol("rho_closed_form", 1e-6)));
            let gap = axis.iter().map(|a| (a.ric23 - a.g11_form).abs()).fold(0.0, f64::max);
            rep.checks.push(Check::below("ricci_g11_form", gap, 1e-6));
        }
    }
    Ok(rep)
}

pub fn fermi_check(cfg: &ExperimentConfig) -> Result<Report> {
    let m = cfg.metric_or(MetricSpec::named("sogge_example", &[])).build()?;
    let name = m.name();
    let chart = Arc::new(axis_chart(&m, cfg.alpha / 2.0, 0.3 * cfg.alpha)?);
    let fr = verify_fermi_conditions(&chart, cfg.samples.max(1))?;
    let (lo, hi) = chart.x1_range();
    let mut ident = 0.0f64;
    for i in 0..cfg.samples.max(1) {
        let u = halton(i);
        let rad = 0.9 * chart.r * u[1].sqrt();
        let c = [lo + (hi - lo) * (0.1 + 0.8 * u[0]), rad * (2.0 * PI * u[2]).cos(), rad * (2.0 * PI * u[2]).sin()];
        ident = ident.max(la::norm(la::sub(chart.to_ambient(c)?, c)));
    }
    let mut rep = Report::new(
        "fermi-check",
        &name,
        &["radial_residual", "axis_residual", "roundtrip_error", "frame_error", "identity_deviation"],
    );
    rep.push_row(vec![fr.radial_residual, fr.axis_residual, fr.roundtrip_error, fr.frame_error, ident]);
    rep.checks.push(Check::below("radial_condition", fr.radial_residual, cfg.tol("radial", 1e-5)));
    rep.checks.push(Check::below("axis_condition", fr.axis_residual, cfg.tol("axis", 1e-5)));
    rep.checks.push(Check::below("roundtrip", fr.roundtrip_error, cfg.tol("roundtrip", 1e-7)));
    rep.checks.push(Check::below("frame_orthonormal", fr.frame_error, cfg.tol("frame", 1e-8)));
    if name == "euclidean" || name == "sogge_example" {
        rep.checks.push(Check::below("chart_is_identity", ident, cfg.tol("identity", 1e-6)));
    }
    rep.detail("chart", serde_json::json!({"x1_range": [lo, hi], "r": chart.r}));
    Ok(rep)
}

pub fn taylor_check(cfg: &ExperimentConfig) -> Result<Report> {
    let m = cfg.metric_or(MetricSpec::named("sogge_example", &[])).build()?;
    let chart = axis_chart(&m, 1.0, 0.3)?;
    let thetas = [0.1, 0.05, 0.025];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.probes.max(1);
    let (mut probes, mut spare) = (Vec::new(), Vec::new());
    for _ in 0..50 * n {
        if probes.len() == n {
            break;
        }
        let (x1, psi) = (rng.gen_range(-0.7..0.7), rng.gen_range(0.0..PI));
        // keep both limits well away from zero so relative errors mean something
        if rho_chart(&chart, x1, psi)?.abs() >= 0.2 && rho_prime_chart(&chart, x1, psi)?.abs() >= 0.2 {
            probes.push((x1, psi));
        } else if spare.len() < n {
            spare.push((x1, psi));
        }
    }
    let short = n - probes.len();
    probes.extend(spare.into_iter().take(short));
    let reports = probes.iter().map(|(x1, psi)| taylor_validate(&chart, *x1, *psi, &thetas)).collect::<nikodym::Result<Vec<_>>>()?;
    let mut rep = Report::new(
        "taylor-check",
        &m.name(),
        &["x1", "psi", "rho", "rho_prime", "third_limit", "fourth_limit", "third_rel_error", "fourth_rel_error", "sigma"],
    );
    for r in &reports {
        rep.push_row(vec![r.x1, r.psi, r.rho, r.rho_prime, r.third_limit, r.fourth_limit, r.third_rel_error, r.fourth_rel_error, r.sigma as f64]);
    }
    let worst = |f: fn(&nikodym::classify::TaylorReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    rep.checks.push(Check::below("third_order", worst(|r| r.third_rel_error), cfg.tol("third_order", 1e-3)));
    rep.checks.push(Check::below("fourth_order", worst(|r| r.fourth_rel_error), cfg.tol("fourth_order", 1e-2)));
    let signed = reports.iter().filter(|r| r.sigma != 0).count();
    let agree = reports.iter().all(|r| r.sigma == 0 || r.sigma == SIGMA as i32);
    rep.checks.push(Check::new("sign_consistent", agree, signed as f64, format!("σ = {SIGMA} on every signed probe")));
    rep.detail("thetas", thetas);
    rep.detail("sigma", SIGMA);
    Ok(rep)
}

fn band_min(r: &FoldTrialReport) -> f64 {
    r.within_band.iter().map(|b| b.1.min(b.2)).fold(1.0, f64::min)
}

fn not_fold_fraction(r: &FoldTrialReport) -> f64 {
    let classes: Vec<FoldClass> = r.trials.iter().flat_map(|t| t.class_r.into_iter().chain(t.class_l)).collect();
    if classes.is_empty() {
        return 0.0;
    }
    classes.iter().filter(|c| **c == FoldClass::NotFold).count() as f64 / classes.len() as f64
}

pub fn fold_check(cfg: &ExperimentConfig) -> Result<Report> {
    let taus = [0.05, 0.025, 0.0125];
    let mut rep = Report::new(
        "fold-check",
        "model",
        &["tau", "residual1_quadratic", "residual2_quadratic", "band_r_affine", "band_l_affine", "band_r_sin", "band_l_sin"],
    );
    let quad = ModelFamily::new(Rho::Poly(vec![0.5, -1.0, 3.0]));
    let affine = fold_trials(&Rho::affine(1.0, 0.5), &taus, cfg.trials, cfg.seed)?;
    // ρ(x₁, 0) along the sogge axis
    let sin = fold_trials(&Rho::Sin { a: 1.0, w: -1.0, phi: 0.0 }, &taus, cfg.trials, cfg.seed ^ 1)?;
    let flat = fold_trials(&Rho::zero(), &taus, cfg.trials, cfg.seed ^ 2)?;
    for (k, tau) in taus.iter().enumerate() {
        let r = identity_check(&quad, 0.1, 0.1 + tau)?;
        rep.push_row(vec![*tau, r.r1, r.r2, affine.within_band[k].1, affine.within_band[k].2, sin.within_band[k].1, sin.within_band[k].2]);
    }
    rep.fit("tau", "residual1_quadratic", Some(2.0), Some(0.1))?;
    rep.fit("tau", "residual2_quadratic", Some(2.0), Some(0.1))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let fam = ModelFamily::new(Rho::affine(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)));
        let x1 = rng.gen_range(-1.0..1.0);
        let tau = rng.gen_range(0.001..0.5) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let r = identity_check(&fam, x1, x1 + tau)?;
        worst = worst.max(r.r1.abs()).max(r.r2.abs());
    }
    rep.checks.push(Check::below("identities_affine", worst, cfg.tol("identities_affine", 1e-12)));
    let band = cfg.tol("fold_band", 0.9);
    rep.checks.push(Check::new("fold_band_affine", band_min(&affine) >= band, band_min(&affine), format!("≥ {band}")));
    rep.checks.push(Check::new("fold_band_sin", band_min(&sin) >= band, band_min(&sin), format!("≥ {band}")));
    let nf = not_fold_fraction(&flat);
    rep.checks.push(Check::new("flat_not_fold", nf == 1.0 && flat.located > 0, nf, "every located point is not a fold"));
    rep.checks.push(Check::new("flat_violates_chaotic", flat.chaotic_violated, flat.chaotic_violated as u8 as f64, ""));
    let summary = |r: &FoldTrialReport| {
        serde_json::json!({"within_band": r.within_band, "fold_fraction": r.fold_fraction, "located": r.located, "skipped": r.skipped})
    };
    rep.detail("affine", summary(&affine));
    rep.detail("sin", summary(&sin));
    rep.detail("flat", summary(&flat));
    Ok(rep)
}

/// Random smooth positive field `exp(Σ aⱼ sin(wⱼ·x + φⱼ))`.
fn random_field(h: f64, b: &Aabb, rng: &mut ChaCha8Rng) -> ScalarField {
    let terms: Vec<(f64, Vec3, f64)> =
        (0..4).map(|_| (rng.gen_range(-1.0..1.0), std::array::from_fn(|_| rng.gen_range(-8.0..8.0)), rng.gen_range(0.0..2.0 * PI))).collect();
    ScalarField::from_fn(h, b, move |x| terms.iter().map(|(a, w, p)| a * (la::dot(*w, x) + p).sin()).sum::<f64>().exp())
}

/// Monotonicity, sublinearity, homogeneity, the constant fixed point, the sup
/// bound and net-refinement monotonicity of `f*_δ` on `fields` random fields.
pub fn maximal_properties(m: &Arc<dyn Metric>, delta: f64, fields: usize, seed: u64) -> Result<Vec<Check>> {
    let (h, alpha) = (delta / 3.0, 0.5);
    let b = Aabb::cube(0.6);
    let layout = ScalarField::from_fn(h, &b, |_| 1.0);
    let net = DirectionNet::for_delta(0.25);
    let pts: Vec<Vec3> = (0..8).map(|i| halton(i).map(|u| 0.3 * u - 0.15)).collect();
    let coarse = CompiledMaximal::compile(m, &layout, delta, &GeodesicFamily::AllDirections { alpha, net: net.clone() }, &pts)?;
    let fine = CompiledMaximal::compile(m, &layout, delta, &GeodesicFamily::AllDirections { alpha, net: net.refined() }, &pts)?;
    let one = coarse.apply(&layout)?.iter().fold(0.0f64, |a, v| a.max((v - 1.0).abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mono, mut sub, mut homog, mut supb, mut refine) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..fields {
        let f = random_field(h, &b, &mut rng);
        let g = random_field(h, &b, &mut rng);
        let bump = random_field(h, &b, &mut rng);
        let c = rng.gen_range(0.1..5.0);
        let fs = coarse.apply(&f)?;
        let gs = coarse.apply(&g)?;
        let up = coarse.apply(&f.zip(&bump, |a, b| a + 0.3 * b)?)?;
        let sum = coarse.apply(&f.zip(&g, |a, b| a + b)?)?;
        let scaled = coarse.apply(&f.map(|v| c * v))?;
        let refined = fine.apply(&f)?;
        let fmax = f.max_abs();
        for i in 0..pts.len() {
            mono = mono.max(fs[i] - up[i]);
            sub = sub.max((sum[i] - fs[i] - gs[i]) / (fs[i] + gs[i]));
            homog = homog.max((scaled[i] - c * fs[i]).abs() / (c * fs[i]));
            supb = supb.max(fs[i] - fmax);
            refine = refine.max(fs[i] - refined[i]);
        }
    }
    Ok(vec![
        Check::below("monotone", mono, 0.0),
        Check::below("sublinear", sub, 1e-12),
        Check::below("homogeneous", homog, 1e-12),
        Check::below("constant_fixed_point", one, 1e-3),
        Check::below("sup_bound", supb, 0.0),
        Check::below("net_refinement", refine, 0.0),
    ])
}

/// `f*_δ` of the indicator of a δ-ball at points 0.2 away; tubes that cover the
/// ball give `4δ/(3α)`, so the mean scales like `δ¹`.
pub fn maximal_scaling(cfg: &ExperimentConfig) -> Result<Report> {
    let m = cfg.metric_or(MetricSpec::named("euclidean", &[])).build()?;
    // at δ = 1/8 the tube radius is a quarter of its length and the ratio is far from asymptotic
    let ladder = cfg.ladder(&dyadic(4, 6))?;
    let alpha = cfg.alpha.min(0.5);
    let pts: Vec<Vec3> = (0..4).map(|k| {
        let a = 0.5 + k as f64 * PI / 2.0;
        [0.2 * a.cos() * 0.8, 0.2 * a.sin() * 0.8, 0.2 * 0.6]
    }).collect();
    let mut rep = Report::new("maximal-scaling", &m.name(), &["delta", "mean_fstar", "min_fstar", "max_fstar", "oracle", "tubes"]);
    for &delta in &ladder {
        let h = cfg.grid_ratio * delta;
        let b = Aabb::cube(0.2 + alpha / 2.0 + 2.0 * delta);
        let f = ScalarField::from_fn(h, &b, |x| if la::norm(x) <= delta { 1.0 } else { 0.0 });
        let fam = GeodesicFamily::AllDirections { alpha, net: DirectionNet::for_delta(cfg.net_factor * delta) };
        let comp = CompiledMaximal::compile(&m, &f, delta, &fam, &pts)?;
        let v = comp.apply(&f)?;
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(0.0, f64::max);
        rep.push_row(vec![delta, mean, lo, hi, 4.0 * delta / (3.0 * alpha), comp.tubes.iter().map(|t| t.len()).sum::<usize>() as f64]);
    }
    if ladder.len() >= 3 {
        rep.fit("delta", "mean_fstar", Some(1.0), Some(cfg.tol("maximal_slope", 0.15)))?;
    }
    let last = rep.rows.last().unwrap();
    let ratio = last[1] / last[4];
    let tol = cfg.tol("oracle_ratio", 0.1);
    rep.checks.push(Check::new("finest_vs_oracle", (ratio - 1.0).abs() <= tol, ratio, format!("mean f*/(4δ/3α) = 1 ± {tol} at the finest δ")));
    let delta = cfg.tol("property_delta", 0.0625);
    let props = maximal_properties(&m, delta, cfg.tol("property_fields", 20.0) as usize, cfg.seed)?;
    rep.checks.extend(props);
    rep.detail("alpha", alpha);
    rep.detail("property_delta", delta);
    Ok(rep)
}

pub fn nikodym_degenerate(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = cfg.metric_or(MetricSpec::named("ms_perturbation", &[0.1]));
    if spec.name.as_deref() != Some("ms_perturbation") {
        bail!("nikodym-degenerate needs the ms_perturbation metric");
    }
    let m = spec.build()?;
    let eps = spec.params[0];
    let mut rep = Report::new("nikodym-degenerate", &m.name(), &["phi", "max_abs_x3"]);
    let mut worst = 0.0f64;
    for k in 0..9 {
        let phi = -1.2 + 0.3 * k as f64;
        let p = integrate_geodesic(&m, [0.1, 0.0, 0.0], [phi.cos(), phi.sin(), 0.0], cfg.alpha, DEFAULT_STEP)?;
        let w = p.samples(1e-3).iter().filter(|(_, x)| x[0] >= 0.0).fold(0.0f64, |a, (_, x)| a.max(x[2].abs()));
        worst = worst.max(w);
        rep.push_row(vec![phi, w]);
    }
    rep.checks.push(Check::below("in_plane_trapped", worst, cfg.tol("in_plane", 1e-10)));

    let x = [-1.0, 0.0, 0.0];
    let gamma = christoffel(m.as_ref(), x)?.upper[0][1][2];
    let oracle = christoffel_oracle(m.as_ref(), x);
    rep.checks.push(Check::below("christoffel_123_oracle", (gamma - oracle).abs(), cfg.tol("christoffel", 1e-8)));
    rep.checks.push(Check::new("christoffel_123_nonzero", gamma.abs() > 0.0, gamma, "≠ 0 for x₁ < 0"));
    let flat = MetricSpec::named("ms_perturbation", &[0.0]).build()?;
    let mut zero = 0.0f64;
    for i in 0..20 {
        let p = halton(i).map(|u| 1.8 * u - 0.9);
        zero = zero.max(christoffel(flat.as_ref(), p)?.upper.iter().flatten().flatten().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    rep.checks.push(Check::below("epsilon_zero_flat", zero, 0.0));

    let entry = entry_measure(&m, cfg.samples.max(1), cfg.seed, cfg.tol("entry", 1e-3))?;
    rep.detail("epsilon", eps);
    rep.detail("christoffel_123", serde_json::json!({"engine": gamma, "oracle": oracle}));
    rep.detail("entry", &entry);
    Ok(rep)
}

/// `Γ₁₂³ = ½ ∂₁g₂₃ · g³³` for this metric, `∂₁g₂₃` by a fourth-order stencil on `g`.
fn christoffel_oracle(m: &dyn Metric, x: Vec3) -> f64 {
    let h = 1e-3;
    let at = |s: f64| m.g([x[0] + s, x[1], x[2]])[1][2];
    let d = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
    let g = m.g(x);
    let g33 = g[1][1] / (g[1][1] * g[2][2] - g[1][2] * g[2][1]);
    0.5 * d * g33
}

#[derive(Clone, Debug, Serialize)]
pub struct EntryMeasure {
    pub samples: usize,
    pub entered: usize,
    /// parameter-box measure times the entering fraction
    pub measure: f64,
    pub tol: f64,
}

/// Geodesics from `x₁ ∈ [−1, −¼]`, `|x₂| ≤ ½`, `0.01 ≤ |x₃| ≤ 0.05` heading into
/// `x₁ > 0`; counts those that reach `{|x₃| ≤ tol, x₁ > 0, |x₂| ≤ 1}`.
fn entry_measure(m: &Arc<dyn Metric>, samples: usize, seed: u64, tol: f64) -> Result<EntryMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe17);
    let params: Vec<(Vec3, Vec3)> = (0..samples)
        .map(|_| {
            let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let x = [rng.gen_range(-1.0..-0.25), rng.gen_range(-0.5..0.5), s * rng.gen_range(0.01..0.05)];
            let (phi, chi): (f64, f64) = (rng.gen_range(-PI / 3.0..PI / 3.0), rng.gen_range(-0.2..0.2));
            (x, [phi.cos() * chi.cos(), phi.sin() * chi.cos(), chi.sin()])
        })
        .collect();
    let hits = nikodym::par::try_map_slice(&params, |(x, v)| -> nikodym::Result<bool> {
        let p = match integrate_geodesic(m, *x, *v, 1.2, DEFAULT_STEP) {
            Ok(p) => p,
            Err(Error::DomainExit { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        let s = p.samples(2e-3);
        let inside = |y: &Vec3| y[0] > 0.0 && y[1].abs() <= 1.0;
        Ok(s.iter().any(|(_, y)| inside(y) && y[2].abs() <= tol)
            || s.windows(2).any(|w| inside(&w[0].1) && inside(&w[1].1) && w[0].1[2] * w[1].1[2] <= 0.0))
    })?;
    let entered = hits.iter().filter(|h| **h).count();
    // point box 0.75 · 1 · 0.08, directions (2π/3)(0.4)
    let box_measure = 0.75 * 1.0 * 0.08 * (2.0 * PI / 3.0) * 0.4;
    Ok(EntryMeasure { samples, entered, measure: box_measure * entered as f64 / samples as f64, tol })
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossingRow {
    pub delta: f64,
    pub theta: f64,
    /// `|T₁ ∩ T₂| / (δ³/θ)`
    pub volume_ratio: f64,
    /// farthest common cell from the crossing point
    pub reach: f64,
    /// `δ/(cθ)` with the calibrated `c`
    pub lambda: f64,
    pub empty_outside_ball: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossingReport {
    /// `min δ/(θ · reach)` over the calibration δ
    pub c: f64,
    pub rows: Vec<CrossingRow>,
}

fn crossing_pair(m: &Arc<dyn Metric>, delta: f64, theta: f64) -> Result<(GridTube, GridTube)> {
    let h = delta / 4.0;
    let a = Tube::through(m, [0.0; 3], [1.0, 0.0, 0.0], -0.5, 0.5, delta)?.on_grid(h);
    let b = Tube::through(m, [0.0; 3], [theta.cos(), theta.sin(), 0.0], -0.5, 0.5, delta)?.on_grid(h);
    Ok((a, b))
}

/// Euclidean unit-length tubes crossing at the origin at angle θ. The constant
/// `c` of the emptiness test is calibrated at `delta_cal` and then applied at
/// every δ in `deltas`.
pub fn crossing_geometry(delta_cal: f64, deltas: &[f64], thetas: &[f64]) -> Result<CrossingReport> {
    let m: Arc<dyn Metric> = MetricSpec::named("euclidean", &[]).build()?;
    let mut c = f64::INFINITY;
    for &th in thetas.iter().filter(|t| **t >= 4.0 * delta_cal) {
        let (a, b) = crossing_pair(&m, delta_cal, th)?;
        let reach = intersection_reach(&a, &b, [0.0; 3]);
        c = c.min(delta_cal / (th * reach));
    }
    let mut rows = Vec::new();
    for &delta in deltas {
        for &th in thetas.iter().filter(|t| **t >= 4.0 * delta) {
            let (a, b) = crossing_pair(&m, delta, th)?;
            let lambda = delta / (c * th);
            rows.push(CrossingRow {
                delta,
                theta: th,
                volume_ratio: intersection_volume(&a, &b) / (delta.powi(3) / th),
                reach: intersection_reach(&a, &b, [0.0; 3]),
                lambda,
                empty_outside_ball: far_from_junction(&a, &b, [0.0; 3], lambda),
            });
        }
    }
    Ok(CrossingReport { c, rows })
}

fn union_field(tubes: &[GridTube], h: f64, b: &Aabb) -> ScalarField {
    let mut e = ScalarField::covering(h, b);
    for t in tubes {
        for c in &t.stencil.cells {
            if let Some(o) = e.offset(c.idx) {
                e.values[o] = 1.0;
            }
        }
    }
    e
}

pub fn discrete_bound_cmd(cfg: &ExperimentConfig) -> Result<Report> {
    let m: Arc<dyn Metric> = MetricSpec::named("euclidean", &[]).build()?;
    let delta = cfg.ladder(&[1.0 / 32.0])?[0];
    let (h, b) = (delta / 3.0, Aabb::cube(0.8));
    let count = 24;
    // lines through (0, −0.3φ, ·) with heading φ all pass near (0.3, 0, ·)
    let tubes: Vec<GridTube> = (0..count)
        .map(|k| {
            let phi = -0.5 + k as f64 / (count - 1) as f64;
            let v = [phi.cos(), phi.sin(), 0.2 * (k as f64 / count as f64 - 0.5)];
            Ok(Tube::through(&m, [0.0, -0.3 * phi, 0.0], v, -0.5, 0.5, delta)?.on_grid(h))
        })
        .collect::<Result<_>>()?;
    let e = union_field(&tubes, h, &b);
    let e_measure = superlevel_measure(m.as_ref(), &e, 0.5);
    let ms = multiplicity_select(&e, &tubes, delta, cfg.lambda)?;
    let thetas = [0.125, 0.1875, 0.25, 0.375, 0.5];
    let cross = crossing_geometry(1.0 / 16.0, &[1.0 / 16.0, 1.0 / 32.0], &thetas)?;
    // star of tubes through the origin with well-separated directions; the
    // ball radius is δ/(cθ) for the smallest pairwise angle θ
    let star_dirs: Vec<Vec3> = (0..12)
        .map(|k| {
            let z = 1.0 - (k as f64 + 0.5) / 12.0;
            let phi = k as f64 * PI * (3.0 - 5f64.sqrt());
            let r = (1.0 - z * z).sqrt();
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect();
    let mut theta_min = f64::INFINITY;
    for (i, u) in star_dirs.iter().enumerate() {
        for w in &star_dirs[i + 1..] {
            theta_min = theta_min.min(la::dot(*u, *w).clamp(-1.0, 1.0).acos());
        }
    }
    let star: Vec<GridTube> = star_dirs
        .iter()
        .map(|v| Ok(Tube::through(&m, [0.0; 3], *v, -0.5, 0.5, delta)?.on_grid(h)))
        .collect::<Result<_>>()?;
    let es = union_field(&star, h, &b);
    let radius = delta / (cross.c * theta_min);
    let bush = bush_extract(&es, &star, radius)?;
    let c_eps = cfg.tol("c_eps", 10.0);
    let bound = discrete_bound(count, delta, cfg.lambda, e_measure, 0.0, c_eps);
    let lhs = count as f64 * delta * delta;
    let rhs_var = c_eps * (delta.powf(-2.0 / 3.0) * e_measure).powf(4.0 / 3.0);

    let mut rep = Report::new("discrete-bound", "euclidean", &["tubes", "delta", "e_measure", "n", "theta", "mu", "n0", "lhs", "rhs", "rhs_variant"]);
    rep.push_row(vec![count as f64, delta, e_measure, ms.n as f64, ms.theta, ms.mu, bush.n0 as f64, lhs, bound.rhs, rhs_var]);
    rep.checks.push(Check::new("bound_holds", bound.holds, bound.lhs / bound.rhs, format!("Mδ² ≤ C(δ^-1/2 λ^-5/2 |E|)^4/3, C = {c_eps}")));
    rep.checks.push(Check::new("variant_bound_holds", lhs <= rhs_var, lhs / rhs_var, format!("Mδ² ≤ C(δ^-2/3 |E|)^4/3, C = {c_eps}")));
    rep.checks.push(Check::new("multiplicity_case1", ms.case1_holds, ms.case1.len() as f64, "≥ M/2 tubes"));
    rep.checks.push(Check::new("multiplicity_case2", ms.case2_holds, ms.case2.len() as f64, "≥ M/(2L)² tubes"));
    rep.checks.push(Check::new(
        "bush_within_e",
        bush.n0 == star.len() && bush.rho > 0.5 && bush.bush_sum <= bush.e_measure * (1.0 + 1e-9),
        bush.bush_sum / bush.e_measure,
        format!("star of {}: N₀ = {}, ρ = {:.3}, Σ|T ∩ E \\ B(a, δ/cθ)| ≤ |E|", star.len(), bush.n0, bush.rho),
    ));

    let par: Vec<GridTube> = (0..8)
        .map(|k| Ok(Tube::through(&m, [0.0, -0.35 + 0.1 * k as f64, 0.0], [1.0, 0.0, 0.0], -0.5, 0.5, delta)?.on_grid(h)))
        .collect::<Result<_>>()?;
    let ep = union_field(&par, h, &b);
    let ep_measure = superlevel_measure(m.as_ref(), &ep, 0.5);
    let mp = multiplicity_select(&ep, &par, delta, 1.0)?;
    let ratio = ep_measure / (par.len() as f64 * PI * delta * delta);
    rep.checks.push(Check::new("disjoint_multiplicity_one", mp.n == 1, mp.n as f64, "N = 1"));
    rep.checks.push(Check::new(
        "disjoint_trivial_bound",
        ep_measure >= trivial_lower_bound(par.len(), delta, 1.0, 1, 1.0),
        ratio,
        "|E| ≥ λMδ²/(CN) with C = N = 1; value is |E|/(Mπδ²α)",
    ));
    let empty = e.map(|_| 0.0);
    let refused = matches!(multiplicity_select(&empty, &tubes, delta, cfg.lambda), Err(Error::Precondition(_)));
    rep.checks.push(Check::new("empty_set_refused", refused, refused as u8 as f64, "precondition error"));

    let all_empty = cross.rows.iter().all(|r| r.empty_outside_ball);
    rep.checks.push(Check::new("junction_emptiness", all_empty && cross.c > 0.0, cross.c, "calibrated at δ = 1/16, applied at 1/16 and 1/32"));
    rep.detail("multiplicity", &ms);
    rep.detail("bush", serde_json::json!({"a": bush.a, "radius": radius, "theta_min": theta_min, "n0": bush.n0, "rho": bush.rho, "bound": bush.bound, "bush_sum": bush.bush_sum}));
    rep.detail("crossings", &cross);
    rep.detail("constants", serde_json::json!({"c_eps": c_eps, "eps": 0.0, "lambda": cfg.lambda}));
    Ok(rep)
}
