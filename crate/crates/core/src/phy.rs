//! Link abstraction: per-subcarrier SINR with inter-beam interference,
//! exponential effective-SINR compression, MCS selection and the
//! SINR-to-BLER transport block verdict.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

#[allow(unused_imports)] // float math without std
use num_traits::Float as _;

use crate::array::effective_channel;
use crate::beamforming::PrecoderSet;
use crate::channel::ChannelRealization;
use crate::error::domain;
use crate::linalg::CMat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Direction {
    Dl,
    Ul,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Dl, Direction::Ul];

    pub fn other(self) -> Self {
        match self {
            Direction::Dl => Direction::Ul,
            Direction::Ul => Direction::Dl,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Dl => "DL",
            Direction::Ul => "UL",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dl" | "DL" => Ok(Direction::Dl),
            "ul" | "UL" => Ok(Direction::Ul),
            _ => Err(domain("direction must be DL or UL")),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Powers, noise and grid size entering the SINR expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub p_tx_bs_dbm: f64,
    pub p_tx_ue_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub delta_f_hz: f64,
    pub n_subcarriers: usize,
    /// Layers sharing the BS power budget.
    pub n_active_layers: usize,
}

impl LinkBudget {
    /// Downlink power per layer and subcarrier, watts.
    pub fn p_sc_dl(&self) -> f64 {
        db_to_linear(self.p_tx_bs_dbm - 30.0) / (self.n_subcarriers * self.n_active_layers.max(1)) as f64
    }

    /// Uplink power per subcarrier, watts. A UE transmits a single layer.
    pub fn p_sc_ul(&self) -> f64 {
        db_to_linear(self.p_tx_ue_dbm - 30.0) / self.n_subcarriers as f64
    }

    pub fn p_sc(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Dl => self.p_sc_dl(),
            Direction::Ul => self.p_sc_ul(),
        }
    }

    /// Thermal noise plus noise figure over one subcarrier, watts (`Δf·N_o`).
    pub fn noise_per_subcarrier(&self) -> f64 {
        db_to_linear(self.noise_psd_dbm_hz + self.noise_figure_db - 30.0) * self.delta_f_hz
    }

    /// Regularizer of the MMSE precoder, `N_o Δf / P_sc`.
    pub fn noise_ratio(&self, dir: Direction) -> f64 {
        self.noise_per_subcarrier() / self.p_sc(dir)
    }
}

/// Effective gains of co-scheduled layers at one subband.
///
/// Entry `(u, l)` is `√L_u · w_uᵀ H_u v_l`: the channel from the BS beam of layer
/// `l` to UE `u` (UE `u` holds layer `u`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGains(pub CMat);

impl LayerGains {
    /// Downlink SINR of layer `u`: interference reaches UE `u` through its own
    /// channel from the other active layers' beams.
    pub fn sinr_dl(&self, u: usize, active: &[bool], p_sc: f64, noise: f64) -> f64 {
        let g = &self.0;
        let interference: f64 = (0..g.cols())
            .filter(|&l| l != u && active[l])
            .map(|l| g[(u, l)].norm_sqr())
            .sum();
        g[(u, u)].norm_sqr() * p_sc / (interference * p_sc + noise)
    }

    /// Uplink SINR of layer `u`: UE `u'` leaks into the BS combiner of layer `u`
    /// through its own channel and pathloss.
    pub fn sinr_ul(&self, u: usize, active: &[bool], p_sc: f64, noise: f64) -> f64 {
        let g = &self.0;
        let interference: f64 = (0..g.rows())
            .filter(|&v| v != u && active[v])
            .map(|v| g[(v, u)].norm_sqr())
            .sum();
        g[(u, u)].norm_sqr() * p_sc / (interference * p_sc + noise)
    }

    pub fn sinr(&self, dir: Direction, u: usize, active: &[bool], p_sc: f64, noise: f64) -> f64 {
        match dir {
            Direction::Dl => self.sinr_dl(u, active, p_sc, noise),
            Direction::Ul => self.sinr_ul(u, active, p_sc, noise),
        }
    }
}

fn check_active(u: usize, active: &[bool], n_layers: usize) -> Result<()> {
    if active.len() != n_layers {
        return Err(Error::Dimension {
            expected: n_layers,
            got: active.len(),
        });
    }
    if !active.get(u).copied().unwrap_or(false) {
        return Err(domain("victim layer is not active"));
    }
    Ok(())
}

fn explicit_gains(k: usize, beams: &PrecoderSet, channels: &[&ChannelRealization]) -> Result<LayerGains> {
    let n = beams.n_layers();
    if channels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: channels.len(),
        });
    }
    let mut g = CMat::zeros(n, n);
    for (u, ch) in channels.iter().enumerate() {
        let h = ch.subbands.get(k).ok_or_else(|| domain("subband index out of range"))?;
        let amp = ch.linear_gain().sqrt();
        for l in 0..n {
            g[(u, l)] = effective_channel(beams.ue_beam(u).as_slice(), h, beams.bs_beam(l, k).as_slice())? * amp;
        }
    }
    Ok(LayerGains(g))
}

/// Downlink SINR of the UE on layer `u` at subband `k`.
///
/// `channels[l]` is the channel of the UE holding layer `l`; `active[l]` says
/// whether layer `l` transmits during the symbol.
pub fn sinr_dl(
    u: usize,
    k: usize,
    precoders: &PrecoderSet,
    channels: &[&ChannelRealization],
    budget: &LinkBudget,
    active: &[bool],
) -> Result<f64> {
    check_active(u, active, precoders.n_layers())?;
    let g = explicit_gains(k, precoders, channels)?;
    Ok(g.sinr_dl(u, active, budget.p_sc_dl(), budget.noise_per_subcarrier()))
}

/// Uplink SINR of the UE on layer `u` at subband `k`, with `combiners`
/// holding the BS receive beams and the UE transmit beams.
pub fn sinr_ul(
    u: usize,
    k: usize,
    combiners: &PrecoderSet,
    channels: &[&ChannelRealization],
    budget: &LinkBudget,
    active: &[bool],
) -> Result<f64> {
    check_active(u, active, combiners.n_layers())?;
    let g = explicit_gains(k, combiners, channels)?;
    Ok(g.sinr_ul(u, active, budget.p_sc_ul(), budget.noise_per_subcarrier()))
}

/// Exponential effective SINR `-β ln(mean exp(-γ_k/β))` of linear SINRs.
pub fn effective_sinr(sinrs: &[f64], beta: f64) -> Result<f64> {
    effective_sinr_weighted(sinrs.iter().map(|&s| (s, 1.0)), beta)
}

/// Effective SINR of `(sinr, weight)` samples, each standing for `weight`
/// subcarrier-symbols of equal SINR.
pub fn effective_sinr_weighted(samples: impl Iterator<Item = (f64, f64)> + Clone, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(domain("EESM beta must be positive"));
    }
    let min = samples
        .clone()
        .filter(|s| s.1 > 0.0)
        .map(|s| s.0)
        .fold(f64::INFINITY, f64::min);
    let total: f64 = samples.clone().map(|s| s.1.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(domain("effective SINR needs at least one sample"));
    }
    if !min.is_finite() {
        return Ok(min);
    }
    let acc: f64 = samples
        .filter(|s| s.1 > 0.0)
        .map(|(s, w)| w * (-(s - min) / beta).exp())
        .sum();
    Ok(min - beta * (acc / total).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McsEntry {
    pub index: usize,
    /// Bits per subcarrier per symbol.
    pub spectral_eff: f64,
    pub sinr_threshold_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(domain("MCS table is empty"));
        }
        for (i, w) in entries.windows(2).enumerate() {
            if !(w[1].spectral_eff > w[0].spectral_eff && w[1].sinr_threshold_db > w[0].sinr_threshold_db) {
                return Err(domain("MCS entries must increase in efficiency and threshold"));
            }
            if w[0].index != i || w[1].index != i + 1 {
                return Err(domain("MCS indices must be 0..n"));
            }
        }
        Ok(Self { entries })
    }

    /// `count` entries with efficiencies evenly spaced over `[lo, hi]` and
    /// thresholds at the Shannon inverse plus `gap_db`.
    pub fn shannon_gap(count: usize, lo: f64, hi: f64, gap_db: f64) -> Result<Self> {
        if count < 2 || !(hi > lo) || !(lo > 0.0) {
            return Err(domain("need at least two increasing positive efficiencies"));
        }
        let entries = (0..count)
            .map(|index| {
                let se = lo + (hi - lo) * index as f64 / (count - 1) as f64;
                McsEntry {
                    index,
                    spectral_eff: se,
                    sinr_threshold_db: linear_to_db(2f64.powf(se) - 1.0) + gap_db,
                }
            })
            .collect();
        Self::new(entries)
    }

    /// Fifteen entries from 0.2 to 5.55 bit/subcarrier with a 3 dB gap.
    pub fn nr_like() -> Self {
        Self::shannon_gap(15, 0.2, 5.55, 3.0).expect("static table is valid")
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn top(&self) -> &McsEntry {
        self.entries.last().expect("non-empty")
    }
}

impl Default for McsTable {
    fn default() -> Self {
        Self::nr_like()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsChoice {
    pub entry: McsEntry,
    /// No entry met the reported SINR; the lowest was taken.
    pub minimum_rate: bool,
}

/// Highest entry whose threshold does not exceed the report.
pub fn select_mcs(reported_sinr_eff_db: f64, table: &McsTable) -> McsChoice {
    match table
        .entries
        .iter()
        .rev()
        .find(|e| e.sinr_threshold_db <= reported_sinr_eff_db)
    {
        Some(e) => McsChoice {
            entry: *e,
            minimum_rate: false,
        },
        None => McsChoice {
            entry: table.entries[0],
            minimum_rate: true,
        },
    }
}

/// Logistic BLER curve around each MCS threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlerModel {
    pub slope_db: f64,
    /// BLER is one half at `threshold - margin`.
    pub margin_db: f64,
}

impl Default for BlerModel {
    fn default() -> Self {
        Self {
            slope_db: 0.5,
            margin_db: 2.5,
        }
    }
}

impl BlerModel {
    pub fn bler(&self, actual_sinr_eff_db: f64, mcs: &McsEntry) -> f64 {
        let x = (actual_sinr_eff_db - mcs.sinr_threshold_db + self.margin_db) / self.slope_db;
        if x.is_nan() {
            return 1.0;
        }
        1.0 / (1.0 + x.exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub bler: f64,
    pub corrupted: bool,
}

/// BLER of one transport block and a Bernoulli draw of its fate.
pub fn tb_verdict<R: Rng + ?Sized>(
    actual_sinr_eff_db: f64,
    mcs: &McsEntry,
    model: &BlerModel,
    rng: &mut R,
) -> Result<Verdict> {
    if !(model.slope_db > 0.0) {
        return Err(domain("BLER slope must be positive"));
    }
    let bler = model.bler(actual_sinr_eff_db, mcs);
    let corrupted = rng.random::<f64>() < bler;
    Ok(Verdict { bler, corrupted })
}

/// Bits carried by `n_symbols` full-band symbols at this MCS.
pub fn tb_size(mcs: &McsEntry, n_symbols: usize, n_subcarriers: usize) -> u64 {
    (mcs.spectral_eff * n_subcarriers as f64).floor() as u64 * n_symbols as u64
}

/// Outcome of one transport block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportBlockResult {
    pub ue_id: usize,
    pub direction: Direction,
    pub sinr_eff_db: f64,
    pub mcs: usize,
    pub tb_bits: u64,
    pub bler: f64,
    pub corrupted: bool,
}
