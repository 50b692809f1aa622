//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime budget.
//! Runs as a plain program (`harness = false`) and exits non-zero on any FAIL.

use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use nikodym::geodesic::{integrate_geodesic, DEFAULT_STEP};
use nikodym::{la, Metric};
use nikodym_lab::checks::{crossing_geometry, curvature_report, fermi_check, fold_check, maximal_properties, nikodym_degenerate, taylor_check};
use nikodym_lab::scaling::{boxdim, counterexample_quartic, counterexample_sogge};
use nikodym_lab::{ExperimentConfig, MetricSpec, Report};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

fn cfg(name: &str, params: &[f64]) -> ExperimentConfig {
    ExperimentConfig { metric: MetricSpec::named(name, params), ..Default::default() }
}

fn checks_pass(rep: &Report, names: &[&str]) -> Result<bool> {
    let mut ok = true;
    for n in names {
        ok &= rep.check(n).with_context(|| format!("{} has no check {n}", rep.command))?.pass;
    }
    Ok(ok)
}

fn fit_pass(rep: &Report, quantity: &str) -> Result<bool> {
    let f = rep.fits.iter().find(|f| f.quantity == quantity).with_context(|| format!("no fit of {quantity}"))?;
    f.pass().context("fit has no expectation")
}

fn failing(rep: &Report) -> String {
    let mut bad: Vec<String> = rep.checks.iter().filter(|c| !c.pass).map(|c| format!("{}={:.3e}", c.name, c.value)).collect();
    bad.extend(rep.fits.iter().filter(|f| f.pass() == Some(false)).map(|f| format!("slope {}={:.4}", f.quantity, f.fit.slope)));
    bad.join(" ")
}

fn tensor_identities() -> Result<Verdict> {
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, p) in [("euclidean", vec![]), ("space_form", vec![1.0]), ("space_form", vec![-1.0]), ("ms_perturbation", vec![0.1]), ("sogge_example", vec![])] {
        let c = ExperimentConfig { samples: 100, ..cfg(name, &p) };
        let rep = curvature_report(&c)?;
        let mut names = vec!["einstein_trace", "riemann_symmetry", "bianchi"];
        if name != "ms_perturbation" && name != "sogge_example" {
            names.push("einstein_sup");
        }
        if name == "sogge_example" {
            names.extend(["einstein_at_half_pi", "ricci23_axis_vs_minus_sin"]);
        }
        let ok = checks_pass(&rep, &names)?;
        pass &= ok;
        if !ok {
            notes.push(format!("{}: {}", rep.metric, failing(&rep)));
        }
    }
    let b = curvature_report(&ExperimentConfig { samples: 1, ..cfg("sogge_example", &[]) })?;
    notes.push(format!("|B(π/2,0,0)| = {:.3}", b.check("einstein_at_half_pi").unwrap().value));
    verdict(pass, notes.join("; "))
}

fn end_error(m: &Arc<dyn Metric>, x0: [f64; 3], v0: [f64; 3], h: f64, reference: [f64; 3]) -> Result<f64> {
    let p = integrate_geodesic(m, x0, v0, 1.0, h)?;
    Ok(la::norm(la::sub(p.position(1.0), reference)))
}

fn geodesic_engine() -> Result<Verdict> {
    let (x0, v0) = ([-0.45, 0.1, -0.1], [1.0, 0.3, 0.2]);
    let (mut drift, mut reversal, mut worst_ratio) = (0.0f64, 0.0f64, f64::INFINITY);
    for spec in [MetricSpec::named("sogge_example", &[]), MetricSpec::named("space_form", &[1.0])] {
        let m = spec.build()?;
        let p = integrate_geodesic(&m, x0, v0, 1.0, DEFAULT_STEP)?;
        drift = drift.max(p.energy_drift());
        reversal = reversal.max(p.reversal_error()?);
        // self-convergence: the reference is the run at h/64
        let reference = integrate_geodesic(&m, x0, v0, 1.0, 0.1 / 64.0)?.position(1.0);
        let e1 = end_error(&m, x0, v0, 0.1, reference)?;
        let e2 = end_error(&m, x0, v0, 0.05, reference)?;
        worst_ratio = worst_ratio.min(e1 / e2);
    }
    verdict(
        drift <= 1e-8 && reversal <= 1e-6 && worst_ratio >= 12.0,
        format!("energy drift {drift:.2e} ≤ 1e-8, reversal {reversal:.2e} ≤ 1e-6, h-halving ratio {worst_ratio:.1} ≥ 12"),
    )
}

fn fermi_chart() -> Result<Verdict> {
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, p) in [("space_form", vec![1.0]), ("sogge_example", vec![])] {
        let rep = fermi_check(&cfg(name, &p))?;
        pass &= rep.passed();
        let row = &rep.rows[0];
        notes.push(format!("{}: radial {:.1e} axis {:.1e} roundtrip {:.1e} identity {:.1e}", rep.metric, row[0], row[1], row[2], row[4]));
    }
    verdict(pass, notes.join("; "))
}

fn rho_closed_form() -> Result<Verdict> {
    let rep = curvature_report(&ExperimentConfig { samples: 1, ..cfg("sogge_example", &[]) })?;
    let rho = rep.check("rho_closed_form").context("no rho check")?;
    let margin = rep.check("chaotic_margin_unit").context("no margin check")?;
    verdict(rho.pass && margin.pass, format!("|ρ − sin(2ψ−x₁)| ≤ {:.1e} at 100 probes, margin {:.4}", rho.value, margin.value))
}

fn taylor_validation() -> Result<Verdict> {
    let custom = ExperimentConfig::from_toml(include_str!("../configs/variable_curvature.toml"))?;
    let mut sigmas = Vec::new();
    let mut pass = true;
    let mut notes = Vec::new();
    for c in [cfg("sogge_example", &[]), custom] {
        let rep = taylor_check(&c)?;
        pass &= checks_pass(&rep, &["third_order", "fourth_order"])?;
        sigmas.extend(rep.column("sigma").unwrap());
        notes.push(format!(
            "{}: third {:.1e} fourth {:.1e}",
            rep.metric,
            rep.check("third_order").unwrap().value,
            rep.check("fourth_order").unwrap().value
        ));
    }
    let same = sigmas.iter().all(|s| *s == sigmas[0]) && sigmas[0] != 0.0;
    notes.push(format!("σ = {} on all {} probes: {same}", sigmas[0], sigmas.len()));
    verdict(pass && same, notes.join("; "))
}

fn identities(rep: &Report) -> Result<Verdict> {
    let pass = checks_pass(rep, &["identities_affine"])? && fit_pass(rep, "residual1_quadratic")? && fit_pass(rep, "residual2_quadratic")?;
    verdict(
        pass,
        format!(
            "affine residual {:.1e} at 1000 probes; quadratic slopes {:.3}, {:.3}",
            rep.check("identities_affine").unwrap().value,
            rep.slope("residual1_quadratic").unwrap(),
            rep.slope("residual2_quadratic").unwrap()
        ),
    )
}

fn folds(rep: &Report) -> Result<Verdict> {
    let names = ["fold_band_affine", "fold_band_sin", "flat_not_fold"];
    let values: Vec<String> = names.iter().map(|n| format!("{n} {:.3}", rep.check(n).unwrap().value)).collect();
    verdict(checks_pass(rep, &names)?, values.join(", "))
}

fn sogge_counterexample() -> Result<Verdict> {
    let rep = counterexample_sogge(&cfg("sogge_example", &[]))?;
    let pass = ["omega_star", "min_fstar", "ratio"].iter().map(|q| fit_pass(&rep, q)).collect::<Result<Vec<_>>>()?.into_iter().all(|b| b);
    verdict(
        pass,
        format!(
            "δ = 2⁻³…2⁻⁷: |Ω*| {:+.3}, min f* {:+.3}, ratio {:+.3} (−0.275)",
            rep.slope("omega_star").unwrap(),
            rep.slope("min_fstar").unwrap(),
            rep.slope("ratio").unwrap()
        ),
    )
}

fn quartic_counterexample() -> Result<Verdict> {
    let rep = counterexample_quartic(&ExperimentConfig { samples: 100, ..cfg("sogge_example", &[]) })?;
    let pass = checks_pass(&rep, &["trapping"])? && fit_pass(&rep, "min_fstar")?;
    verdict(
        pass,
        format!(
            "trapped 100/100 per δ: {}, worst |γ³|/2δ {:.3}; min f* slope {:+.3} (0.20 ± 0.06)",
            rep.check("trapping").unwrap().pass,
            rep.check("trapping").unwrap().value,
            rep.slope("min_fstar").unwrap()
        ),
    )
}

fn tube_geometry() -> Result<Verdict> {
    let thetas: Vec<f64> = (0..12).map(|k| 0.125 * (4.0f64).powf(k as f64 / 11.0)).collect();
    let r = crossing_geometry(1.0 / 16.0, &[1.0 / 16.0, 1.0 / 32.0], &thetas)?;
    let (lo, hi) = r.rows.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x.volume_ratio), b.max(x.volume_ratio)));
    let empty = r.rows.iter().all(|x| x.empty_outside_ball);
    verdict(
        lo >= 0.25 && hi <= 16.0 && empty && r.c > 0.0,
        format!("{} crossings: vol/(δ³/θ) ∈ [{lo:.2}, {hi:.2}], empty outside δ/(cθ): {empty}, c = {:.3}", r.rows.len(), r.c),
    )
}

fn maximal_operator() -> Result<Verdict> {
    let mut pass = true;
    let mut notes = Vec::new();
    for spec in [MetricSpec::named("euclidean", &[]), MetricSpec::named("sogge_example", &[])] {
        let m = spec.build()?;
        let checks = maximal_properties(&m, 1.0 / 16.0, 20, 0)?;
        let bad: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        pass &= bad.is_empty();
        let one = checks.iter().find(|c| c.name == "constant_fixed_point").unwrap().value;
        notes.push(format!("{}: {} properties, f≡1 error {one:.1e}{}", m.name(), checks.len(), if bad.is_empty() { String::new() } else { format!(", failing {bad:?}") }));
    }
    verdict(pass, notes.join("; "))
}

fn degenerate_metric() -> Result<Verdict> {
    let rep = nikodym_degenerate(&cfg("ms_perturbation", &[0.1]))?;
    let geo = checks_pass(&rep, &["in_plane_trapped", "christoffel_123_oracle", "christoffel_123_nonzero"])?;
    let c = ExperimentConfig::from_toml(include_str!("../configs/boxdim_square.toml"))?;
    let b = boxdim(&c)?;
    let dim = b.check("dimension").context("no dimension check")?;
    verdict(
        geo && dim.pass,
        format!(
            "|γ³| ≤ {:.1e}, Γ₁₂³ error {:.1e}, box dimension {:.4}",
            rep.check("in_plane_trapped").unwrap().value,
            rep.check("christoffel_123_oracle").unwrap().value,
            dim.value
        ),
    )
}

fn main() {
    // `cargo test` forwards its own arguments; only `--list` needs an answer
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let fold = std::cell::OnceCell::new();
    let fold_report = || -> Result<Report> {
        fold.get_or_init(|| fold_check(&ExperimentConfig::default()).map_err(|e| e.to_string())).clone().map_err(anyhow::Error::msg)
    };
    type Case<'a> = (&'a str, f64, Box<dyn Fn() -> Result<Verdict> + 'a>);
    let cases: Vec<Case> = vec![
        ("tensor identities", 5.0, Box::new(tensor_identities)),
        ("geodesic engine", 5.0, Box::new(geodesic_engine)),
        ("Fermi chart", 30.0, Box::new(fermi_chart)),
        ("rho closed form and chaotic margin", 10.0, Box::new(rho_closed_form)),
        ("Taylor coefficients", 60.0, Box::new(taylor_validation)),
        ("model identities", 1.0, Box::new(|| identities(&fold_report()?))),
        ("fold classification", 60.0, Box::new(|| folds(&fold_report()?))),
        ("slab counterexample", 1800.0, Box::new(sogge_counterexample)),
        ("quartic counterexample", 900.0, Box::new(quartic_counterexample)),
        ("tube geometry", 60.0, Box::new(tube_geometry)),
        ("maximal operator properties", 120.0, Box::new(maximal_operator)),
        ("degenerate metric and box dimension", 60.0, Box::new(degenerate_metric)),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in cases.iter().enumerate() {
        let t0 = Instant::now();
        let out = run();
        let dt = t0.elapsed().as_secs_f64();
        let (pass, detail) = match out {
            Ok(v) => (v.pass && dt <= *budget, v.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} {:>2}. {name} ({dt:.2} s, budget {budget} s): {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {} of {} criteria pass", cases.len() - failed, cases.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
