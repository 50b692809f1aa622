//! Experiment harness for the `nikodym` crate: configuration, commands,
//! log-log fits and report files.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod fit;
pub mod report;
pub mod scaling;

use std::time::Instant;

use anyhow::Result;

pub use config::{ExperimentConfig, Format, MetricSpec};
pub use report::{Check, Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Tensor identities, constant-curvature test and chaotic margin
    CurvatureReport,
    /// Fermi chart conditions and round trips about the x1-axis
    FermiCheck,
    /// Third/fourth-order geodesic Taylor coefficients against ρ and ρ′
    TaylorCheck,
    /// Model identities and fold classification of the projections
    FoldCheck,
    /// Maximal-function scaling and operator properties
    MaximalScaling,
    /// First slab counterexample on sogge_example
    CounterexampleSogge,
    /// Second (quartic) slab counterexample with trapping
    CounterexampleQuartic,
    /// Totally geodesic plane and entry measure for the degenerate metric
    NikodymDegenerate,
    /// Box-counting dimension of a region
    Boxdim,
    /// Discrete tube-counting bound on a synthetic family
    DiscreteBound,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::CurvatureReport,
        Command::FermiCheck,
        Command::TaylorCheck,
        Command::FoldCheck,
        Command::MaximalScaling,
        Command::CounterexampleSogge,
        Command::CounterexampleQuartic,
        Command::NikodymDegenerate,
        Command::Boxdim,
        Command::DiscreteBound,
    ];
}

/// Runs one command and stamps its runtime.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut rep = match cmd {
        Command::CurvatureReport => checks::curvature_report(cfg),
        Command::FermiCheck => checks::fermi_check(cfg),
        Command::TaylorCheck => checks::taylor_check(cfg),
        Command::FoldCheck => checks::fold_check(cfg),
        Command::MaximalScaling => checks::maximal_scaling(cfg),
        Command::CounterexampleSogge => scaling::counterexample_sogge(cfg),
        Command::CounterexampleQuartic => scaling::counterexample_quartic(cfg),
        Command::NikodymDegenerate => checks::nikodym_degenerate(cfg),
        Command::Boxdim => scaling::boxdim(cfg),
        Command::DiscreteBound => checks::discrete_bound_cmd(cfg),
    }?;
    rep.runtime_s = t0.elapsed().as_secs_f64();
    Ok(rep)
}

/// Sizes the global pool; a no-op without the `parallel` feature.
pub fn init_threads(n: Option<usize>) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
