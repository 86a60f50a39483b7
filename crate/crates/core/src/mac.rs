//! The (symbol, layer) allocation grid and the two round-robin schedulers.
//!
//! Allocations are placed on the subframe's data symbols only. `start_symbol`
//! is an OFDM symbol index within the subframe; `n_symbols` counts data
//! symbols from there, skipping the control symbols at both ends of each slot.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)] // float math without std
use num_traits::Float as _;

use crate::phy::{Direction, McsEntry};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameConfig {
    pub symbols_per_slot: usize,
    pub slots_per_subframe: usize,
    pub symbol_duration_us: f64,
    pub n_layers: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            symbols_per_slot: 14,
            slots_per_subframe: 4,
            symbol_duration_us: 17.85,
            n_layers: 1,
        }
    }
}

impl FrameConfig {
    pub fn with_layers(n_layers: usize) -> Self {
        Self {
            n_layers,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.symbols_per_slot < 3 {
            return Err(Error::Config {
                field: "symbols_per_slot",
                reason: "need at least one data symbol".into(),
            });
        }
        if self.slots_per_subframe == 0 {
            return Err(Error::Config {
                field: "slots_per_subframe",
                reason: "must be positive".into(),
            });
        }
        if !(self.symbol_duration_us > 0.0) {
            return Err(Error::Config {
                field: "symbol_duration_us",
                reason: "must be positive".into(),
            });
        }
        if self.n_layers == 0 {
            return Err(Error::Config {
                field: "n_layers",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn data_symbols_per_slot(&self) -> usize {
        self.symbols_per_slot - 2
    }

    /// `N_s`, data symbols per subframe.
    pub fn n_data_symbols(&self) -> usize {
        self.data_symbols_per_slot() * self.slots_per_subframe
    }

    pub fn symbols_per_subframe(&self) -> usize {
        self.symbols_per_slot * self.slots_per_subframe
    }

    pub fn slot_duration_us(&self) -> f64 {
        self.symbols_per_slot as f64 * self.symbol_duration_us
    }

    /// OFDM symbol index of the `d`-th data symbol.
    pub fn data_to_ofdm(&self, d: usize) -> usize {
        let per = self.data_symbols_per_slot();
        (d / per) * self.symbols_per_slot + 1 + d % per
    }

    /// Position of an OFDM symbol among the data symbols, `None` for control
    /// symbols and indices past the subframe.
    pub fn ofdm_to_data(&self, s: usize) -> Option<usize> {
        if s >= self.symbols_per_subframe() {
            return None;
        }
        let pos = s % self.symbols_per_slot;
        if pos == 0 || pos == self.symbols_per_slot - 1 {
            return None;
        }
        Some((s / self.symbols_per_slot) * self.data_symbols_per_slot() + pos - 1)
    }

    pub fn is_control(&self, s: usize) -> bool {
        s < self.symbols_per_subframe() && self.ofdm_to_data(s).is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SchedulerKind {
    Tmrs,
    Pmrs,
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerKind::Tmrs => "tmrs",
            SchedulerKind::Pmrs => "pmrs",
        })
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tmrs" => Ok(SchedulerKind::Tmrs),
            "pmrs" => Ok(SchedulerKind::Pmrs),
            _ => Err(Error::Config {
                field: "scheduler",
                reason: "expected tmrs or pmrs".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Allocation {
    pub ue_id: usize,
    pub layer: usize,
    pub direction: Direction,
    pub start_symbol: usize,
    pub n_symbols: usize,
    pub mcs: usize,
    pub bundle: usize,
    /// Wasted symbols between the end of this allocation and the next bundle.
    pub padding_after: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubframeSchedule {
    pub allocations: Vec<Allocation>,
    pub padding_symbols: Vec<usize>,
    pub idle_symbols: Vec<usize>,
    pub bundle_boundaries: Vec<usize>,
}

impl SubframeSchedule {
    fn empty(frame: &FrameConfig) -> Self {
        Self {
            allocations: Vec::new(),
            padding_symbols: vec![0; frame.n_layers],
            idle_symbols: vec![frame.n_data_symbols(); frame.n_layers],
            bundle_boundaries: Vec::new(),
        }
    }

    pub fn scheduled_symbols(&self) -> usize {
        self.allocations.iter().map(|a| a.n_symbols).sum()
    }

    pub fn total_padding(&self) -> usize {
        self.padding_symbols.iter().sum()
    }

    pub fn total_idle(&self) -> usize {
        self.idle_symbols.iter().sum()
    }

    /// Allocations of one bundle, in layer order.
    pub fn bundle(&self, b: usize) -> impl Iterator<Item = &Allocation> {
        self.allocations.iter().filter(move |a| a.bundle == b)
    }
}

/// Symbol demand of one UE for the coming subframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UeDemand {
    pub symbols: [usize; 2],
    pub mcs: [usize; 2],
}

impl UeDemand {
    pub fn get(&self, d: Direction) -> usize {
        self.symbols[d.index()]
    }

    pub fn total(&self) -> usize {
        self.symbols[0] + self.symbols[1]
    }
}

/// Round-robin order, byte queues and the direction served first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulerState {
    pub rr_queue: Vec<usize>,
    /// Queued bytes per UE, indexed by `Direction::index`.
    pub queues: Vec<[u64; 2]>,
    pub first_direction: Direction,
}

impl SchedulerState {
    pub fn new(n_ues: usize) -> Self {
        Self {
            rr_queue: (0..n_ues).collect(),
            queues: vec![[0; 2]; n_ues],
            first_direction: Direction::Dl,
        }
    }

    pub fn n_ues(&self) -> usize {
        self.queues.len()
    }

    /// Reorders the queue: UEs with demand that got nothing first, then the
    /// partially served, then UEs without demand, then the fully served in
    /// the order they were served.
    fn rotate(&mut self, demands: &[UeDemand], served: &[usize], service_order: &[usize]) {
        let want = |u: usize| demands.get(u).map_or(0, UeDemand::total);
        let mut next = Vec::with_capacity(self.rr_queue.len());
        next.extend(self.rr_queue.iter().filter(|&&u| want(u) > 0 && served[u] == 0));
        next.extend(self.rr_queue.iter().filter(|&&u| served[u] > 0 && served[u] < want(u)));
        next.extend(self.rr_queue.iter().filter(|&&u| want(u) == 0));
        let mut seen = vec![false; served.len()];
        for &u in service_order {
            if !seen[u] && want(u) > 0 && served[u] >= want(u) {
                seen[u] = true;
                next.push(u);
            }
        }
        debug_assert_eq!(next.len(), self.rr_queue.len());
        self.rr_queue = next;
        self.first_direction = self.first_direction.other();
    }
}

/// Symbols needed to drain `queue_bytes` at the given MCS.
pub fn demand_symbols(queue_bytes: u64, mcs: &McsEntry, n_subcarriers: usize) -> usize {
    if queue_bytes == 0 {
        return 0;
    }
    let per_symbol = (mcs.spectral_eff * n_subcarriers as f64).floor() as u64;
    if per_symbol == 0 {
        return usize::MAX;
    }
    (8 * queue_bytes).div_ceil(per_symbol) as usize
}

fn check_inputs(state: &SchedulerState, demands: &[UeDemand]) -> Result<()> {
    if demands.len() != state.n_ues() {
        return Err(Error::Dimension {
            expected: state.n_ues(),
            got: demands.len(),
        });
    }
    Ok(())
}

/// Padded multi-user round robin: the subframe is split into equal bundles of
/// start-aligned allocations, one UE per layer, one direction per bundle.
pub fn pmrs_schedule(
    state: &mut SchedulerState,
    demands: &[UeDemand],
    frame: &FrameConfig,
) -> Result<SubframeSchedule> {
    check_inputs(state, demands)?;
    frame.validate()?;
    let n_l = frame.n_layers;
    let n_s = frame.n_data_symbols();
    let mut sched = SubframeSchedule::empty(frame);

    let order = [state.first_direction, state.first_direction.other()];
    let mut groups: Vec<(Direction, Vec<usize>)> = Vec::new();
    for dir in order {
        let ues: Vec<usize> = state
            .rr_queue
            .iter()
            .copied()
            .filter(|&u| demands[u].get(dir) > 0)
            .collect();
        groups.extend(ues.chunks(n_l).map(|c| (dir, c.to_vec())));
    }
    let mut served = vec![0usize; state.n_ues()];
    let mut service_order = Vec::new();
    if !groups.is_empty() {
        let n_b = groups.len().min(n_s);
        let n_a = n_s / n_b;
        for (b, (dir, ues)) in groups.iter().take(n_b).enumerate() {
            let start_d = b * n_a;
            let start = frame.data_to_ofdm(start_d);
            sched.bundle_boundaries.push(start);
            for (layer, &u) in ues.iter().enumerate() {
                let n = demands[u].get(*dir).min(n_a);
                sched.allocations.push(Allocation {
                    ue_id: u,
                    layer,
                    direction: *dir,
                    start_symbol: start,
                    n_symbols: n,
                    mcs: demands[u].mcs[dir.index()],
                    bundle: b,
                    padding_after: n_a - n,
                });
                sched.padding_symbols[layer] += n_a - n;
                sched.idle_symbols[layer] -= n_a;
                served[u] += n;
                service_order.push(u);
            }
        }
    }
    state.rotate(demands, &served, &service_order);
    Ok(sched)
}

/// Single-layer time-division round robin without padding. Only layer 0 is
/// used; any further layers stay idle.
pub fn tmrs_schedule(
    state: &mut SchedulerState,
    demands: &[UeDemand],
    frame: &FrameConfig,
) -> Result<SubframeSchedule> {
    check_inputs(state, demands)?;
    frame.validate()?;
    let n_s = frame.n_data_symbols();
    let mut sched = SubframeSchedule::empty(frame);
    let mut served = vec![0usize; state.n_ues()];
    let mut service_order = Vec::new();
    let mut cursor = 0;
    let dirs = [state.first_direction, state.first_direction.other()];
    'outer: for &u in &state.rr_queue {
        for dir in dirs {
            if cursor == n_s {
                break 'outer;
            }
            let want = demands[u].get(dir);
            if want == 0 {
                continue;
            }
            let n = want.min(n_s - cursor);
            let start = frame.data_to_ofdm(cursor);
            let bundle = sched.bundle_boundaries.len();
            sched.bundle_boundaries.push(start);
            sched.allocations.push(Allocation {
                ue_id: u,
                layer: 0,
                direction: dir,
                start_symbol: start,
                n_symbols: n,
                mcs: demands[u].mcs[dir.index()],
                bundle,
                padding_after: 0,
            });
            cursor += n;
            served[u] += n;
            service_order.push(u);
        }
    }
    sched.idle_symbols[0] -= cursor;
    state.rotate(demands, &served, &service_order);
    Ok(sched)
}

pub fn schedule(
    kind: SchedulerKind,
    state: &mut SchedulerState,
    demands: &[UeDemand],
    frame: &FrameConfig,
) -> Result<SubframeSchedule> {
    match kind {
        SchedulerKind::Tmrs => tmrs_schedule(state, demands, frame),
        SchedulerKind::Pmrs => pmrs_schedule(state, demands, frame),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyAllocation {
        index: usize,
    },
    LayerOutOfRange {
        index: usize,
    },
    ControlSymbol {
        index: usize,
    },
    PastSubframeEnd {
        index: usize,
    },
    Overlap {
        first: usize,
        second: usize,
    },
    UnequalStart {
        first: usize,
        second: usize,
    },
    NotAtBundleStart {
        index: usize,
    },
    Accounting {
        layer: usize,
        total: usize,
        expected: usize,
    },
}

/// Checks every schedule invariant; an empty result means the schedule is valid.
pub fn validate_schedule(s: &SubframeSchedule, frame: &FrameConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let n_s = frame.n_data_symbols();
    let mut spans: Vec<Option<(usize, usize)>> = Vec::with_capacity(s.allocations.len());
    for (i, a) in s.allocations.iter().enumerate() {
        if a.n_symbols == 0 {
            out.push(Violation::EmptyAllocation { index: i });
        }
        if a.layer >= frame.n_layers {
            out.push(Violation::LayerOutOfRange { index: i });
        }
        if !s.bundle_boundaries.contains(&a.start_symbol) {
            out.push(Violation::NotAtBundleStart { index: i });
        }
        match frame.ofdm_to_data(a.start_symbol) {
            None => {
                out.push(Violation::ControlSymbol { index: i });
                spans.push(None);
            }
            Some(d) => {
                if d + a.n_symbols > n_s {
                    out.push(Violation::PastSubframeEnd { index: i });
                }
                spans.push(Some((d, d + a.n_symbols)));
            }
        }
    }
    for i in 0..s.allocations.len() {
        for j in i + 1..s.allocations.len() {
            let (Some((a0, a1)), Some((b0, b1))) = (spans[i], spans[j]) else {
                continue;
            };
            if a0 >= b1 || b0 >= a1 {
                continue;
            }
            if s.allocations[i].layer == s.allocations[j].layer {
                out.push(Violation::Overlap { first: i, second: j });
            }
            if a0 != b0 {
                out.push(Violation::UnequalStart { first: i, second: j });
            }
        }
    }
    let layers = frame.n_layers;
    if s.padding_symbols.len() != layers || s.idle_symbols.len() != layers {
        out.push(Violation::Accounting {
            layer: layers,
            total: s.padding_symbols.len(),
            expected: layers,
        });
        return out;
    }
    for l in 0..layers {
        let used: usize = s.allocations.iter().filter(|a| a.layer == l).map(|a| a.n_symbols).sum();
        let padding: usize = s
            .allocations
            .iter()
            .filter(|a| a.layer == l)
            .map(|a| a.padding_after)
            .sum();
        let total = used + s.padding_symbols[l] + s.idle_symbols[l];
        if total != n_s || padding != s.padding_symbols[l] {
            out.push(Violation::Accounting {
                layer: l,
                total,
                expected: n_s,
            });
        }
    }
    out
}
