//! Command line front end, scenario files and result writers for `hbf-core`.

pub mod cli;
pub mod output;
pub mod scenario;

use anyhow::Result;
use hbf_core::engine::{aggregate, run_drop, DropResult, ScenarioConfig, Summary};

/// Runs every drop of `cfg` in order, calling `progress` after each.
pub fn simulate(cfg: &ScenarioConfig, mut progress: impl FnMut(&DropResult)) -> Result<(Vec<DropResult>, Summary)> {
    cfg.validate()?;
    let mut results = Vec::with_capacity(cfg.n_drops);
    for d in 0..cfg.n_drops {
        let r = run_drop(cfg, d)?;
        progress(&r);
        results.push(r);
    }
    let summary = aggregate(&results)?;
    Ok((results, summary))
}
