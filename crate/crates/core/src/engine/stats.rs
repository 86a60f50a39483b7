use alloc::vec::Vec;

#[allow(unused_imports)] // float math without std
use num_traits::Float as _;

use crate::error::domain;
use crate::phy::Direction;
use crate::Result;

use super::drop::DropResult;

/// BLER at or above which a transport block counts as an outage.
pub const OUTAGE_BLER: f64 = 0.99;
/// BLER at or below which a transport block counts as reliable.
pub const RELIABLE_BLER: f64 = 1e-2;

/// Empirical distribution of a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    /// NaN samples are discarded.
    pub fn new(samples: impl IntoIterator<Item = f64>) -> Self {
        let mut sorted: Vec<f64> = samples.into_iter().filter(|x| !x.is_nan()).collect();
        sorted.sort_unstable_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// Linear-interpolated quantile for `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        if self.sorted.is_empty() || !(0.0..=1.0).contains(&p) {
            return None;
        }
        let pos = p * (self.sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let (a, b) = (self.sorted[lo], self.sorted[hi]);
        if lo == hi || a == b {
            return Some(a);
        }
        Some(a + (b - a) * (pos - lo as f64))
    }

    pub fn median(&self) -> Option<f64> {
        self.quantile(0.5)
    }

    /// Quantiles at `0%, 1%, ..., 100%`.
    pub fn percentiles(&self) -> Vec<f64> {
        if self.sorted.is_empty() {
            return Vec::new();
        }
        (0..=100).filter_map(|i| self.quantile(i as f64 / 100.0)).collect()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DirectionSummary {
    pub offered_mbps: f64,
    pub delivered_mbps: f64,
    pub delivered_mbps_stderr: f64,
    pub corrupted_mbps: f64,
    pub n_tbs: usize,
    pub mean_bler: Option<f64>,
    pub outage_fraction: Option<f64>,
    /// Share of transport blocks with BLER in `[0, 1e-2] ∪ [0.99, 1]`.
    pub bimodal_fraction: Option<f64>,
    pub sinr_mean_db: Option<f64>,
    pub sinr_median_db: Option<f64>,
    pub sinr_percentiles_db: Vec<f64>,
    pub bler_percentiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Summary {
    pub n_drops: usize,
    pub duration_s: f64,
    pub dl: DirectionSummary,
    pub ul: DirectionSummary,
    pub padding_fraction: f64,
    pub idle_fraction: f64,
}

impl Summary {
    pub fn direction(&self, dir: Direction) -> &DirectionSummary {
        match dir {
            Direction::Dl => &self.dl,
            Direction::Ul => &self.ul,
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn stderr(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

pub fn sinr_cdf(results: &[DropResult], dir: Direction) -> EmpiricalCdf {
    EmpiricalCdf::new(
        results
            .iter()
            .flat_map(|r| r.tbs.iter())
            .filter(|t| t.direction == dir)
            .map(|t| t.sinr_db),
    )
}

pub fn bler_cdf(results: &[DropResult], dir: Direction) -> EmpiricalCdf {
    EmpiricalCdf::new(
        results
            .iter()
            .flat_map(|r| r.tbs.iter())
            .filter(|t| t.direction == dir)
            .map(|t| t.bler),
    )
}

fn direction_summary(results: &[DropResult], dir: Direction) -> DirectionSummary {
    let delivered: Vec<f64> = results.iter().map(|r| r.delivered_mbps(dir)).collect();
    let offered: Vec<f64> = results.iter().map(|r| r.offered_mbps(dir)).collect();
    let corrupted: Vec<f64> = results
        .iter()
        .map(|r| r.counters.iter().map(|c| c.corrupted_bits[dir.index()]).sum::<u64>() as f64 / r.duration_s / 1e6)
        .collect();
    let sinr = sinr_cdf(results, dir);
    let bler = bler_cdf(results, dir);
    let n = bler.len();
    let frac = |pred: &dyn Fn(f64) -> bool| {
        (n > 0).then(|| bler.samples().iter().filter(|&&b| pred(b)).count() as f64 / n as f64)
    };
    DirectionSummary {
        offered_mbps: mean(&offered),
        delivered_mbps: mean(&delivered),
        delivered_mbps_stderr: stderr(&delivered),
        corrupted_mbps: mean(&corrupted),
        n_tbs: n,
        mean_bler: (n > 0).then(|| mean(bler.samples())),
        outage_fraction: frac(&|b| b >= OUTAGE_BLER),
        bimodal_fraction: frac(&|b| b <= RELIABLE_BLER || b >= OUTAGE_BLER),
        sinr_mean_db: (!sinr.is_empty()).then(|| mean(sinr.samples())),
        sinr_median_db: sinr.median(),
        sinr_percentiles_db: sinr.percentiles(),
        bler_percentiles: bler.percentiles(),
    }
}

/// Pools the sample streams of several drops and averages their throughputs.
pub fn aggregate(results: &[DropResult]) -> Result<Summary> {
    if results.is_empty() {
        return Err(domain("nothing to aggregate"));
    }
    let grid: u64 = results.iter().map(|r| r.symbols.total()).sum();
    let ratio = |x: u64| if grid == 0 { 0.0 } else { x as f64 / grid as f64 };
    Ok(Summary {
        n_drops: results.len(),
        duration_s: results[0].duration_s,
        dl: direction_summary(results, Direction::Dl),
        ul: direction_summary(results, Direction::Ul),
        padding_fraction: ratio(results.iter().map(|r| r.symbols.padding).sum()),
        idle_fraction: ratio(results.iter().map(|r| r.symbols.idle).sum()),
    })
}
