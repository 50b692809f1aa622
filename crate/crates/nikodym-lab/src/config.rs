//! Experiment configuration, read from TOML and overridable from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use nikodym::{builtin_metric, Aabb, BuiltinMetric, ExprMetric, Metric};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// `[metric]` table: a builtin by `name` (+ `params`), or custom entries `g11 = "expr"` ….
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricSpec {
    pub name: Option<String>,
    pub params: Vec<f64>,
    /// `[[lo], [hi]]`; required for custom metrics
    pub domain: Option<[[f64; 3]; 2]>,
    #[serde(flatten)]
    pub entries: BTreeMap<String, String>,
}

impl MetricSpec {
    pub fn named(name: &str, params: &[f64]) -> Self {
        MetricSpec { name: Some(name.into()), params: params.to_vec(), ..Default::default() }
    }

    pub fn build(&self) -> Result<Arc<dyn Metric>> {
        if !self.entries.is_empty() {
            if self.name.is_some() {
                bail!("[metric] has both `name` and custom entries");
            }
            let [lo, hi] = self.domain.context("custom metrics need `domain = [[lo], [hi]]`")?;
            let entries: Vec<(&str, &str)> = self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            return Ok(Arc::new(ExprMetric::new("custom", &entries, Aabb::new(lo, hi))?));
        }
        let name = self.name.as_deref().unwrap_or("euclidean");
        let m = builtin_metric(name, &self.params)?;
        Ok(match self.domain {
            Some([lo, hi]) => Arc::new(BuiltinMetric::with_domain(m.kind, Aabb::new(lo, hi))?),
            None => Arc::new(m),
        })
    }

    pub fn label(&self) -> String {
        if !self.entries.is_empty() {
            return "custom".into();
        }
        self.name.clone().unwrap_or_else(|| "euclidean".into())
    }
}

/// Options of the slab counterexamples; unset fields keep the construction defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlabOptions {
    pub c: Option<f64>,
    pub x_frac: Option<f64>,
    pub theta_scale: Option<f64>,
    pub delta2: Option<f64>,
    pub n_x: Option<usize>,
    pub n_theta: Option<usize>,
    pub n_t: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub grid_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub metric: MetricSpec,
    /// descending; each command has its own default ladder
    pub deltas: Option<Vec<f64>>,
    pub alpha: f64,
    pub seed: u64,
    pub threads: Option<usize>,
    /// grid spacing over δ
    pub grid_ratio: f64,
    /// direction-net spacing over δ for all-direction families
    pub net_factor: f64,
    pub lambda: f64,
    pub region: Option<String>,
    pub region_domain: Option<[[f64; 3]; 2]>,
    /// threshold constants swept by the counterexample commands
    pub thresholds: Vec<f64>,
    pub trials: usize,
    pub samples: usize,
    /// Taylor-check probes
    pub probes: usize,
    /// boxdim: dimension the estimate is checked against
    pub expected_dimension: Option<f64>,
    pub slab: SlabOptions,
    pub tolerances: BTreeMap<String, f64>,
    pub out: PathBuf,
    pub format: Format,
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            metric: MetricSpec::default(),
            deltas: None,
            alpha: 1.0,
            seed: 0,
            threads: None,
            grid_ratio: 1.0 / 3.0,
            net_factor: 2.0,
            lambda: 0.9,
            region: None,
            region_domain: None,
            thresholds: vec![0.1, 0.25, 0.5],
            trials: 100,
            samples: 100,
            probes: 10,
            expected_dimension: None,
            slab: SlabOptions::default(),
            tolerances: BTreeMap::new(),
            out: PathBuf::from("out"),
            format: Format::Csv,
            svg: false,
        }
    }
}

/// `2⁻ᵃ, …, 2⁻ᵇ`
pub fn dyadic(a: i32, b: i32) -> Vec<f64> {
    (a..=b).map(|k| 2f64.powi(-k)).collect()
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(src)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&src).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            bail!("need 0 < α ≤ 1, got {}", self.alpha);
        }
        if let Some(ds) = &self.deltas {
            check_ladder(ds, self.alpha)?;
        }
        if !(self.grid_ratio > 0.0) || !(self.net_factor > 0.0) {
            bail!("grid_ratio and net_factor must be positive");
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            bail!("need 0 < λ ≤ 1, got {}", self.lambda);
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        Ok(())
    }

    /// The configured ladder or `default`, validated either way.
    pub fn ladder(&self, default: &[f64]) -> Result<Vec<f64>> {
        let ds = self.deltas.clone().unwrap_or_else(|| default.to_vec());
        check_ladder(&ds, self.alpha)?;
        Ok(ds)
    }

    /// The configured metric, or `default` when the config names none.
    pub fn metric_or(&self, default: MetricSpec) -> MetricSpec {
        if self.metric == MetricSpec::default() {
            default
        } else {
            self.metric.clone()
        }
    }

    pub fn tol(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

pub fn check_ladder(ds: &[f64], alpha: f64) -> Result<()> {
    if ds.is_empty() {
        bail!("empty δ list");
    }
    if ds.windows(2).any(|w| w[1] >= w[0]) {
        bail!("δ list must be strictly descending: {ds:?}");
    }
    if let Some(d) = ds.iter().find(|d| !(**d > 0.0 && **d < alpha / 4.0)) {
        bail!("δ = {d} violates 0 < δ < α/4 with α = {alpha}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtin_and_custom() {
        let cfg = ExperimentConfig::from_toml(
            "deltas = [0.125, 0.0625]\nseed = 7\n[metric]\nname = \"space_form\"\nparams = [1.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.metric.build().unwrap().name(), "space_form(1)");
        let cfg = ExperimentConfig::from_toml(
            "[metric]\ng11 = \"1 + x2^2\"\ng23 = \"0.1*x1\"\ndomain = [[-1, -1, -1], [1, 1, 1]]\n",
        )
        .unwrap();
        let m = cfg.metric.build().unwrap();
        assert!((m.g([0.0, 0.5, 0.0])[0][0] - 1.25).abs() < 1e-15);
        assert!((m.g([0.5, 0.0, 0.0])[2][1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_ladders() {
        assert!(ExperimentConfig::from_toml("deltas = [0.0625, 0.125]").is_err());
        assert!(ExperimentConfig::from_toml("deltas = [0.3]").is_err());
        assert!(ExperimentConfig::from_toml("alpha = 1.5").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        let no_domain = ExperimentConfig::from_toml("[metric]\ng11 = \"1\"").unwrap();
        assert!(no_domain.metric.build().is_err());
    }
}
