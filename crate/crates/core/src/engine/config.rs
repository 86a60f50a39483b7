use alloc::format;
use alloc::string::{String, ToString};
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::array::ArrayGeometry;
use crate::beamforming::BfScheme;
use crate::channel::{ar1_coefficient, ClusterParams, Shadowing, SubbandGrid};
use crate::mac::{FrameConfig, SchedulerKind};
use crate::phy::{BlerModel, LinkBudget, McsTable};
use crate::{Error, Result};

/// Subframe period; every scheduling decision and channel update happens on
/// this grid.
pub const SUBFRAME_US: u64 = 1000;

/// How the BS power budget is shared between simultaneous layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PowerSplit {
    /// Every layer gets `P / n_subcarriers`.
    PerLayer,
    /// Layers share the budget: `P / (n_subcarriers · n_active_layers)`.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrafficConfig {
    pub packet_bytes: u64,
    pub interval_us: u64,
    /// Uplink carries the same load as downlink; otherwise uplink is silent.
    pub symmetric: bool,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            packet_bytes: 1500,
            interval_us: 1500,
            symmetric: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioConfig {
    pub n_ues: usize,
    pub disc_radius_m: f64,
    pub h_bs_m: f64,
    pub h_ut_m: f64,
    pub fc_ghz: f64,
    pub n_rbs: usize,
    pub subcarriers_per_rb: usize,
    pub delta_f_hz: f64,
    pub symbols_per_slot: usize,
    pub slots_per_subframe: usize,
    pub symbol_duration_us: f64,
    pub bs_array: ArrayGeometry,
    pub ue_array: ArrayGeometry,
    pub n_layers: usize,
    pub bf_scheme: BfScheme,
    pub scheduler: SchedulerKind,
    /// The scheduler knows beams are re-derived per bundle; PMRS needs it.
    pub bf_aware: bool,
    pub p_tx_bs_dbm: f64,
    pub p_tx_ue_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub power_split: PowerSplit,
    pub traffic: TrafficConfig,
    pub duration_ms: u64,
    pub n_drops: usize,
    pub base_seed: u64,
    pub n_clusters: usize,
    pub k_factor_db: f64,
    pub delay_spread_ns: f64,
    pub angle_spread_deg: f64,
    /// Channel coherence time; `None` freezes the small-scale fading.
    pub t_coh_ms: Option<f64>,
    pub shadowing: bool,
    pub cqi_delay_subframes: u64,
    pub subband_size: usize,
    pub eesm_beta: f64,
    pub bler_slope_db: f64,
    pub bler_margin_db: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let frame = FrameConfig::default();
        let bler = BlerModel::default();
        Self {
            n_ues: 7,
            disc_radius_m: 100.0,
            h_bs_m: 25.0,
            h_ut_m: 1.6,
            fc_ghz: 28.0,
            n_rbs: 275,
            subcarriers_per_rb: 12,
            delta_f_hz: 60e3,
            symbols_per_slot: frame.symbols_per_slot,
            slots_per_subframe: frame.slots_per_subframe,
            symbol_duration_us: frame.symbol_duration_us,
            bs_array: ArrayGeometry {
                n1: 8,
                n2: 8,
                phase_const: PI,
            },
            ue_array: ArrayGeometry {
                n1: 4,
                n2: 4,
                phase_const: PI,
            },
            n_layers: 1,
            bf_scheme: BfScheme::Cbf,
            scheduler: SchedulerKind::Tmrs,
            bf_aware: true,
            p_tx_bs_dbm: 30.0,
            p_tx_ue_dbm: 30.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 5.0,
            power_split: PowerSplit::PerLayer,
            traffic: TrafficConfig::default(),
            duration_ms: 200,
            n_drops: 5,
            base_seed: 1,
            n_clusters: 12,
            k_factor_db: 10.0,
            delay_spread_ns: 50.0,
            angle_spread_deg: 10.0,
            t_coh_ms: Some(50.0),
            shadowing: true,
            cqi_delay_subframes: 2,
            subband_size: 12,
            eesm_beta: 1.0,
            bler_slope_db: bler.slope_db,
            bler_margin_db: bler.margin_db,
        }
    }
}

fn bad(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Config {
        field,
        reason: reason.into(),
    }
}

fn positive(field: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {x}")))
    }
}

fn at_least_one(field: &'static str, n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(bad(field, "must be at least 1"))
    }
}

impl ScenarioConfig {
    /// Rejects inconsistent or out-of-range settings, naming the field.
    pub fn validate(&self) -> Result<()> {
        at_least_one("n_ues", self.n_ues)?;
        if !(self.disc_radius_m >= 0.0 && self.disc_radius_m.is_finite()) {
            return Err(bad("disc_radius_m", "must be finite and non-negative"));
        }
        positive("h_bs_m", self.h_bs_m)?;
        positive("h_ut_m", self.h_ut_m)?;
        if !(0.5..=100.0).contains(&self.fc_ghz) {
            return Err(bad("fc_ghz", "must lie within 0.5..100 GHz"));
        }
        at_least_one("n_rbs", self.n_rbs)?;
        at_least_one("subcarriers_per_rb", self.subcarriers_per_rb)?;
        positive("delta_f_hz", self.delta_f_hz)?;
        self.frame().validate()?;
        self.bs_array.validate().map_err(|e| bad("bs_array", e.to_string()))?;
        self.ue_array.validate().map_err(|e| bad("ue_array", e.to_string()))?;
        at_least_one("n_layers", self.n_layers)?;
        if self.scheduler == SchedulerKind::Tmrs && self.n_layers != 1 {
            return Err(bad("n_layers", "tmrs schedules a single layer"));
        }
        if self.scheduler == SchedulerKind::Pmrs && !self.bf_aware {
            return Err(bad("bf_aware", "pmrs needs a beamforming-aware scheduler"));
        }
        for (field, x) in [
            ("p_tx_bs_dbm", self.p_tx_bs_dbm),
            ("p_tx_ue_dbm", self.p_tx_ue_dbm),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("noise_figure_db", self.noise_figure_db),
            ("k_factor_db", self.k_factor_db),
            ("bler_margin_db", self.bler_margin_db),
        ] {
            if !x.is_finite() {
                return Err(bad(field, "must be finite"));
            }
        }
        if self.traffic.interval_us == 0 {
            return Err(bad("traffic", "interval_us must be positive"));
        }
        if self.duration_ms == 0 {
            return Err(bad("duration_ms", "must be at least 1"));
        }
        at_least_one("n_drops", self.n_drops)?;
        at_least_one("n_clusters", self.n_clusters)?;
        if !(self.delay_spread_ns >= 0.0 && self.delay_spread_ns.is_finite()) {
            return Err(bad("delay_spread_ns", "must be finite and non-negative"));
        }
        if !(self.angle_spread_deg >= 0.0 && self.angle_spread_deg.is_finite()) {
            return Err(bad("angle_spread_deg", "must be finite and non-negative"));
        }
        if let Some(t) = self.t_coh_ms {
            positive("t_coh_ms", t)?;
        }
        at_least_one("subband_size", self.subband_size)?;
        positive("eesm_beta", self.eesm_beta)?;
        positive("bler_slope_db", self.bler_slope_db)?;
        Ok(())
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_rbs * self.subcarriers_per_rb
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.n_subcarriers() as f64 * self.delta_f_hz
    }

    pub fn frame(&self) -> FrameConfig {
        FrameConfig {
            symbols_per_slot: self.symbols_per_slot,
            slots_per_subframe: self.slots_per_subframe,
            symbol_duration_us: self.symbol_duration_us,
            n_layers: self.n_layers,
        }
    }

    pub fn grid(&self) -> SubbandGrid {
        SubbandGrid {
            n_subcarriers: self.n_subcarriers(),
            subband_size: self.subband_size,
            delta_f_hz: self.delta_f_hz,
        }
    }

    /// Link budget for `n_active` simultaneous layers under the configured split.
    pub fn link_budget(&self, n_active: usize) -> LinkBudget {
        LinkBudget {
            p_tx_bs_dbm: self.p_tx_bs_dbm,
            p_tx_ue_dbm: self.p_tx_ue_dbm,
            noise_psd_dbm_hz: self.noise_psd_dbm_hz,
            noise_figure_db: self.noise_figure_db,
            delta_f_hz: self.delta_f_hz,
            n_subcarriers: self.n_subcarriers(),
            n_active_layers: match self.power_split {
                PowerSplit::PerLayer => 1,
                PowerSplit::Shared => n_active.max(1),
            },
        }
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            n_clusters: self.n_clusters,
            k_factor_db: self.k_factor_db,
            delay_spread_s: self.delay_spread_ns * 1e-9,
            angle_spread_rad: self.angle_spread_deg.to_radians(),
        }
    }

    pub fn shadowing(&self) -> Shadowing {
        Shadowing {
            enabled: self.shadowing,
            ..Shadowing::default()
        }
    }

    pub fn bler_model(&self) -> BlerModel {
        BlerModel {
            slope_db: self.bler_slope_db,
            margin_db: self.bler_margin_db,
        }
    }

    pub fn mcs_table(&self) -> McsTable {
        McsTable::nr_like()
    }

    /// Per-subframe fading correlation.
    pub fn rho(&self) -> f64 {
        match self.t_coh_ms {
            Some(t) => ar1_coefficient(SUBFRAME_US as f64 * 1e-6, t * 1e-3),
            None => 1.0,
        }
    }

    /// Offered load per UE and direction, bits per second.
    pub fn offered_rate_bps(&self) -> f64 {
        self.traffic.packet_bytes as f64 * 8.0 / (self.traffic.interval_us as f64 * 1e-6)
    }
}

/// Scenario presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 1500-byte packets every 1500 µs per UE and direction.
    PaperLowTraffic,
    /// 1500-byte packets every 150 µs per UE and direction.
    PaperHighTraffic,
}

impl Preset {
    pub fn config(self) -> ScenarioConfig {
        let interval_us = match self {
            Preset::PaperLowTraffic => 1500,
            Preset::PaperHighTraffic => 150,
        };
        ScenarioConfig {
            traffic: TrafficConfig {
                packet_bytes: 1500,
                interval_us,
                symmetric: true,
            },
            n_drops: 20,
            duration_ms: 500,
            ..ScenarioConfig::default()
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::PaperLowTraffic => "paper-low-traffic",
            Preset::PaperHighTraffic => "paper-high-traffic",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-low-traffic" => Ok(Preset::PaperLowTraffic),
            "paper-high-traffic" => Ok(Preset::PaperHighTraffic),
            _ => Err(bad("preset", "expected paper-low-traffic or paper-high-traffic")),
        }
    }
}
