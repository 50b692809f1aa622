//! Command reports and their files: table (CSV or JSON), manifest, SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Format};
use crate::fit::{fit_loglog, LogLogFit};

/// A named pass/fail predicate with the measured value.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, value: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, value, detail: detail.into() }
    }

    /// `value ≤ tol`
    pub fn below(name: &str, value: f64, tol: f64) -> Self {
        Check::new(name, value <= tol, value, format!("≤ {tol:e}"))
    }
}

/// Log-log fit of one column against the first column, with the slope it is compared to.
#[derive(Clone, Debug, Serialize)]
pub struct SlopeFit {
    pub quantity: String,
    pub fit: LogLogFit,
    pub expected: Option<f64>,
    pub tol: Option<f64>,
}

impl SlopeFit {
    pub fn pass(&self) -> Option<bool> {
        Some(self.fit.within(self.expected?, self.tol?))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub metric: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub fits: Vec<SlopeFit>,
    pub checks: Vec<Check>,
    pub details: Value,
    pub runtime_s: f64,
}

impl Report {
    pub fn new(command: &str, metric: &str, columns: &[&str]) -> Self {
        Report {
            command: command.into(),
            metric: metric.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            details: Value::Object(Default::default()),
            runtime_s: 0.0,
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Fits `|column|` against the `x` column; `expected ± tol` is the comparison.
    pub fn fit(&mut self, x: &str, quantity: &str, expected: Option<f64>, tol: Option<f64>) -> Result<&SlopeFit> {
        let xs = self.column(x).with_context(|| format!("no column {x}"))?;
        let ys: Vec<f64> = self.column(quantity).with_context(|| format!("no column {quantity}"))?.iter().map(|v| v.abs()).collect();
        let fit = fit_loglog(&xs, &ys).with_context(|| format!("fitting {quantity}"))?;
        self.fits.push(SlopeFit { quantity: quantity.into(), fit, expected, tol });
        Ok(self.fits.last().unwrap())
    }

    pub fn slope(&self, quantity: &str) -> Option<f64> {
        self.fits.iter().find(|f| f.quantity == quantity).map(|f| f.fit.slope)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn detail(&mut self, key: &str, v: impl Serialize) {
        let v = serde_json::to_value(v).expect("serializable detail");
        self.details.as_object_mut().unwrap().insert(key.into(), v);
    }

    /// All checks and all fits with an expectation pass.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.fits.iter().all(|f| f.pass() != Some(false))
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} [{}] {:.2}s\n", self.command, self.metric, self.runtime_s);
        for f in &self.fits {
            let verdict = match f.pass() {
                Some(true) => "ok",
                Some(false) => "OFF",
                None => "",
            };
            let _ = write!(s, "  slope {:<14} {:+.4} ± {:.4}", f.quantity, f.fit.slope, f.fit.band95);
            if let (Some(e), Some(t)) = (f.expected, f.tol) {
                let _ = write!(s, "  (expected {e:+.4} ± {t})");
            }
            let _ = writeln!(s, " {verdict}");
        }
        for c in &self.checks {
            let _ = writeln!(s, "  {} {:<34} {:.3e} {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.value, c.detail);
        }
        s
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canon = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&canon).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    config: &'a ExperimentConfig,
    versions: Value,
    threads: usize,
    runtime_s: f64,
    passed: bool,
    files: Vec<String>,
}

/// Writes the table, optional SVG plots and `<command>.manifest.json` into `dir`.
pub fn write_outputs(report: &Report, cfg: &ExperimentConfig, dir: &Path, format: Format, svg: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    let stem = report.command.clone();
    match format {
        Format::Csv => {
            let p = dir.join(format!("{stem}.csv"));
            let mut w = csv::Writer::from_path(&p)?;
            w.write_record(&report.columns)?;
            for r in &report.rows {
                w.write_record(r.iter().map(|v| format!("{v:e}")))?;
            }
            w.flush()?;
            files.push(p);
        }
        Format::Json => {
            let p = dir.join(format!("{stem}.json"));
            std::fs::write(&p, serde_json::to_string_pretty(report)?)?;
            files.push(p);
        }
    }
    if format == Format::Csv {
        // fits, checks and details do not fit a flat table
        let p = dir.join(format!("{stem}.report.json"));
        std::fs::write(&p, serde_json::to_string_pretty(report)?)?;
        files.push(p);
    }
    if svg {
        for f in &report.fits {
            let p = dir.join(format!("{stem}.{}.svg", f.quantity));
            std::fs::write(&p, loglog_svg(report, f)?)?;
            files.push(p);
        }
    }
    let manifest = Manifest {
        command: &report.command,
        config_sha256: config_hash(cfg),
        config: cfg,
        versions: serde_json::json!({
            "nikodym-lab": env!("CARGO_PKG_VERSION"),
            "nikodym": nikodym::VERSION,
            "parallel": nikodym::par::is_parallel(),
        }),
        threads: crate::threads(),
        runtime_s: report.runtime_s,
        passed: report.passed(),
        files: files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect(),
    };
    let p = dir.join(format!("{stem}.manifest.json"));
    std::fs::write(&p, serde_json::to_string_pretty(&manifest)?)?;
    files.push(p);
    Ok(files)
}

/// Log-log scatter of a fitted column with the fitted line.
pub fn loglog_svg(report: &Report, f: &SlopeFit) -> Result<String> {
    let xs = report.column(&report.columns[0]).context("empty report")?;
    let ys = report.column(&f.quantity).context("no such column")?;
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(&ys).filter(|(x, y)| **x > 0.0 && y.abs() > 0.0).map(|(x, y)| (x.log2(), y.abs().log2())).collect();
    if pts.is_empty() {
        bail!("nothing to plot");
    }
    let (w, h, pad) = (480.0, 360.0, 50.0);
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let line = |x: f64| (f.fit.slope * x * std::f64::consts::LN_2 + f.fit.intercept) / std::f64::consts::LN_2;
    let (mut y0, mut y1) = pts
        .iter()
        .map(|p| p.1)
        .chain([line(x0), line(x1)])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, y| (a.0.min(y), a.1.max(y)));
    for (lo, hi) in [(&mut x0, &mut x1), (&mut y0, &mut y1)] {
        let m = 0.05 * (*hi - *lo).max(0.5);
        *lo -= m;
        *hi += m;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">log2 {}</text>"#, w / 2.0, h - 12.0, report.columns[0]);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">log2 {}</text>"#, h / 2.0, h / 2.0, f.quantity);
    for k in (x0.ceil() as i64)..=(x1.floor() as i64) {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{k}</text>"#, sx(k as f64), h - pad + 16.0);
    }
    let _ = writeln!(
        s,
        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="steelblue" stroke-width="1.5"/>"#,
        sx(x0),
        sy(line(x0)),
        sx(x1),
        sy(line(x1))
    );
    for (x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="firebrick"/>"#, sx(*x), sy(*y));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">slope {:.4} ± {:.4}</text>"#,
        pad + 8.0,
        pad + 4.0,
        f.fit.slope,
        f.fit.band95
    );
    s.push_str("</svg>\n");
    Ok(s)
}
