use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use nikodym_lab::{config::check_ladder, report::write_outputs, Command, ExperimentConfig, Format, MetricSpec};

#[derive(Parser)]
#[command(name = "nikodym-lab", version, about = "Numerical experiments on Nikodym-type maximal operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// builtin metric, optionally with parameters: `space_form:-1`, `ms_perturbation:0.1`
    #[arg(long, global = true)]
    metric: Option<String>,
    /// comma-separated δ values, descending
    #[arg(long, global = true, value_delimiter = ',')]
    delta_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// also write log-log plots of every fitted column
    #[arg(long, global = true)]
    svg: bool,
}

fn parse_metric(s: &str) -> Result<MetricSpec> {
    let (name, params) = s.split_once(':').unwrap_or((s, ""));
    let params = params
        .split(',')
        .filter(|p| !p.is_empty())
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad metric parameter `{p}`")))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricSpec::named(name, &params))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &cli.metric {
        cfg.metric = parse_metric(m)?;
    }
    if let Some(ds) = cli.delta_list {
        check_ladder(&ds, cfg.alpha)?;
        cfg.deltas = Some(ds);
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    cfg.svg |= cli.svg;
    cfg.validate()?;
    nikodym_lab::init_threads(cfg.threads)?;

    let report = nikodym_lab::run(cli.command, &cfg)?;
    print!("{}", report.summary());
    let files = write_outputs(&report, &cfg, &cfg.out, cfg.format, cfg.svg)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    if !report.passed() {
        std::process::exit(2);
    }
    Ok(())
}
