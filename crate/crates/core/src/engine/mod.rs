//! Subframe-stepped drop simulation binding channel, beamforming, link
//! abstraction, scheduling and traffic, plus result aggregation.
//!
//! A drop places the UEs, draws their pathloss and clusters, then walks the
//! subframes: evolve the fading, credit traffic, schedule from delayed CQI,
//! form beams per bundle, evaluate each transport block and credit the bits
//! that survive. Every random draw comes from a stream derived from
//! `(base_seed, drop_index)`, so a drop is a pure function of its inputs.

mod config;
mod drop;
mod stats;
mod traffic;

pub use config::{PowerSplit, Preset, ScenarioConfig, TrafficConfig, SUBFRAME_US};
pub use drop::{drop_channels, run_drop, DropResult, SymbolCounters, TbRecord, UeCounters, UeInfo};
pub use stats::{aggregate, bler_cdf, sinr_cdf, DirectionSummary, EmpiricalCdf, Summary, OUTAGE_BLER, RELIABLE_BLER};
pub use traffic::{cbr_arrivals, TrafficSource};
