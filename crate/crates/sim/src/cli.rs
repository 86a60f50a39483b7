use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use hbf_core::beamforming::BfScheme;
use hbf_core::engine::{Preset, ScenarioConfig};
use hbf_core::mac::SchedulerKind;

use crate::scenario;

/// Single-cell mmWave hybrid beamforming simulator.
///
/// The scenario starts from the defaults or `--preset`, then takes the keys of
/// `--config`, then the remaining flags.
#[derive(Debug, Clone, Parser)]
#[command(name = "hbf-sim", version)]
pub struct Args {
    /// JSON scenario file; keys are scenario field names.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// paper-low-traffic or paper-high-traffic.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<Preset>,
    /// SDMA layers at the BS.
    #[arg(long, value_name = "N")]
    pub layers: Option<usize>,
    /// cbf or smbf.
    #[arg(long, value_name = "SCHEME")]
    pub bf: Option<BfScheme>,
    /// tmrs or pmrs.
    #[arg(long, value_name = "NAME")]
    pub scheduler: Option<SchedulerKind>,
    /// Independent drops.
    #[arg(long, value_name = "N")]
    pub drops: Option<usize>,
    /// Base seed; each drop derives its own stream.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Simulated time per drop.
    #[arg(long, value_name = "N")]
    pub duration_ms: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "PATH", default_value = "out")]
    pub out_dir: PathBuf,
    /// Also write channel_trace.csv (one row per drop, UE and subband).
    #[arg(long)]
    pub channel_trace: bool,
}

impl Args {
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = self.preset.map_or_else(ScenarioConfig::default, Preset::config);
        if let Some(path) = &self.config {
            cfg = scenario::load(path, &cfg)?;
        }
        if let Some(n) = self.layers {
            cfg.n_layers = n;
        }
        if let Some(bf) = self.bf {
            cfg.bf_scheme = bf;
        }
        if let Some(s) = self.scheduler {
            cfg.scheduler = s;
        }
        if let Some(n) = self.drops {
            cfg.n_drops = n;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(ms) = self.duration_ms {
            cfg.duration_ms = ms;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
