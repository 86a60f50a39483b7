use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // float math without std
use num_traits::Float as _;

use crate::array::{dft_codebook, Codebook};
use crate::beamforming::{best_pair, normalize_port_map, port_gram};
use crate::channel::{
    drop_ues, generate_clusters, pathloss_uma, ChannelRealization, ClusterSet, PathlossSample, Placement,
};
use crate::linalg::{dot, CMat};
use crate::mac::{demand_symbols, schedule, Allocation, SchedulerState, SubframeSchedule, UeDemand};
use crate::phy::{
    effective_sinr_weighted, linear_to_db, select_mcs, tb_size, tb_verdict, Direction, LayerGains, LinkBudget, McsTable,
};
use crate::rng::{stream, substream, SimRng};
use crate::{Result, C64};

use super::config::{ScenarioConfig, SUBFRAME_US};
use super::traffic::TrafficSource;

/// Floor applied before converting a linear SINR to dB.
const SINR_FLOOR: f64 = 1e-20;

/// Outcome of one transport block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbRecord {
    pub time_us: f64,
    pub subframe: u64,
    pub ue: usize,
    pub direction: Direction,
    pub layer: usize,
    /// Mean linear SINR over the allocation's subcarrier-symbols, in dB.
    pub sinr_db: f64,
    pub sinr_eff_db: f64,
    pub mcs: usize,
    pub n_symbols: usize,
    pub tb_bits: u64,
    pub payload_bits: u64,
    pub bler: f64,
    pub corrupted: bool,
}

/// Bit counters of one UE, indexed by `Direction::index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UeCounters {
    pub offered_bits: [u64; 2],
    pub delivered_bits: [u64; 2],
    pub corrupted_bits: [u64; 2],
    pub queued_bits: [u64; 2],
}

/// Occupancy of the (symbol, layer) grid summed over a drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SymbolCounters {
    pub scheduled: u64,
    pub padding: u64,
    pub idle: u64,
}

impl SymbolCounters {
    pub fn total(&self) -> u64 {
        self.scheduled + self.padding + self.idle
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeInfo {
    pub d2d_m: f64,
    pub pathloss_db: f64,
    pub los: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub drop_index: usize,
    pub duration_s: f64,
    pub ues: Vec<UeInfo>,
    pub counters: Vec<UeCounters>,
    pub tbs: Vec<TbRecord>,
    pub schedule: Vec<(u64, Allocation)>,
    pub symbols: SymbolCounters,
}

impl DropResult {
    pub fn delivered_bits(&self, dir: Direction) -> u64 {
        self.counters.iter().map(|c| c.delivered_bits[dir.index()]).sum()
    }

    pub fn offered_bits(&self, dir: Direction) -> u64 {
        self.counters.iter().map(|c| c.offered_bits[dir.index()]).sum()
    }

    pub fn delivered_mbps(&self, dir: Direction) -> f64 {
        self.delivered_bits(dir) as f64 / self.duration_s / 1e6
    }

    pub fn offered_mbps(&self, dir: Direction) -> f64 {
        self.offered_bits(dir) as f64 / self.duration_s / 1e6
    }
}

/// One BS-UE link with its cluster projections onto every codebook beam.
///
/// Angles and delays stay fixed for the whole drop, so the effective channel
/// `wᵀ H(f) v = Σ_c g_c e^{-j2π τ_c f} (wᵀ a_rx,c)(a_tx,cᵀ v)` only needs the
/// current cluster gains.
struct Link {
    placement: Placement,
    pathloss: PathlossSample,
    amp: f64,
    clusters: ClusterSet,
    /// `wᵀ a_rx,c`, indexed `c * n_rx + w`.
    alpha: Vec<C64>,
    /// `a_tx,cᵀ v`, indexed `c * n_tx + v`.
    beta: Vec<C64>,
    /// `e^{-j2π τ_c f_k}`, indexed `c * n_sub + k`.
    phase: Vec<C64>,
    evolution: SimRng,
}

struct Setup {
    links: Vec<Link>,
    rx_cb: Codebook,
    tx_cb: Codebook,
}

fn setup(cfg: &ScenarioConfig, drop_index: usize) -> Result<Setup> {
    cfg.validate()?;
    let seed = cfg.base_seed;
    let d = drop_index as u64;
    let rx_cb = dft_codebook(&cfg.ue_array)?;
    let tx_cb = dft_codebook(&cfg.bs_array)?;
    let grid = cfg.grid();
    let n_sub = grid.count();
    let params = cfg.cluster_params();
    let placements = drop_ues(
        cfg.n_ues,
        cfg.disc_radius_m,
        cfg.h_bs_m,
        cfg.h_ut_m,
        &mut substream(seed, &[d, stream::PLACEMENT]),
    )?;
    let mut links = Vec::with_capacity(cfg.n_ues);
    for (u, mut placement) in placements.into_iter().enumerate() {
        let uid = u as u64;
        let pathloss = pathloss_uma(
            &placement,
            cfg.fc_ghz,
            cfg.shadowing(),
            &mut substream(seed, &[d, stream::PATHLOSS, uid]),
        )?;
        placement.los = pathloss.los;
        let clusters = generate_clusters(
            &placement,
            &params,
            cfg.ue_array,
            cfg.bs_array,
            &mut substream(seed, &[d, stream::CLUSTERS, uid]),
        )?;
        let n_c = clusters.clusters.len();
        let mut alpha = Vec::with_capacity(n_c * rx_cb.len());
        let mut beta = Vec::with_capacity(n_c * tx_cb.len());
        let mut phase = Vec::with_capacity(n_c * n_sub);
        for c in 0..n_c {
            let ar = clusters.rx_steering(c);
            let at = clusters.tx_steering(c);
            alpha.extend(rx_cb.vectors().iter().map(|w| dot(w.as_slice(), &ar)));
            beta.extend(tx_cb.vectors().iter().map(|v| dot(&at, v.as_slice())));
            let tau = clusters.clusters[c].delay_s;
            phase.extend((0..n_sub).map(|k| C64::from_polar(1.0, -2.0 * PI * tau * grid.center_offset_hz(k))));
        }
        links.push(Link {
            placement,
            amp: 10f64.powf(-pathloss.pathloss_db / 20.0),
            pathloss,
            clusters,
            alpha,
            beta,
            phase,
            evolution: substream(seed, &[d, stream::EVOLUTION, uid]),
        });
    }
    Ok(Setup { links, rx_cb, tx_cb })
}

/// Per-subband channel matrices of every UE at the start of a drop, as seen
/// by the engine.
pub fn drop_channels(cfg: &ScenarioConfig, drop_index: usize) -> Result<Vec<ChannelRealization>> {
    let s = setup(cfg, drop_index)?;
    let grid = cfg.grid();
    Ok(s.links
        .iter()
        .enumerate()
        .map(|(u, l)| ChannelRealization::realize(u, l.pathloss.pathloss_db, &l.clusters, &grid, 0.0))
        .collect())
}

/// Codebook beam pair of one UE for the current subframe.
#[derive(Debug, Clone, Copy)]
struct Beams {
    rx: usize,
    tx: usize,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    s: Setup,
    n_sub: usize,
    k_ref: usize,
    widths: Vec<f64>,
    noise: f64,
    /// Current cluster gains per UE.
    gains: Vec<Vec<C64>>,
    beams: Vec<Option<Beams>>,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig, s: Setup) -> Self {
        let grid = cfg.grid();
        let n_sub = grid.count();
        let mut eng = Engine {
            cfg,
            n_sub,
            k_ref: grid.reference_subband(),
            widths: (0..n_sub).map(|k| grid.width(k) as f64).collect(),
            noise: cfg.link_budget(1).noise_per_subcarrier(),
            gains: vec![Vec::new(); cfg.n_ues],
            beams: vec![None; cfg.n_ues],
            s,
        };
        eng.refresh_gains();
        eng
    }

    fn n_rx(&self) -> usize {
        self.s.rx_cb.len()
    }

    fn n_tx(&self) -> usize {
        self.s.tx_cb.len()
    }

    fn refresh_gains(&mut self) {
        for (g, l) in self.gains.iter_mut().zip(&self.s.links) {
            g.clear();
            g.extend(l.clusters.clusters.iter().map(|c| c.gain()));
        }
        self.beams.iter_mut().for_each(|b| *b = None);
    }

    /// Max-gain beam pair at the reference subband, cached per subframe.
    fn beams(&mut self, u: usize) -> Beams {
        if let Some(b) = self.beams[u] {
            return b;
        }
        let (n_rx, n_tx, n_sub) = (self.n_rx(), self.n_tx(), self.n_sub);
        let l = &self.s.links[u];
        let g = &self.gains[u];
        let n_c = g.len();
        let mut t = vec![C64::new(0.0, 0.0); n_rx * n_c];
        for w in 0..n_rx {
            for c in 0..n_c {
                t[w * n_c + c] = g[c] * l.phase[c * n_sub + self.k_ref] * l.alpha[c * n_rx + w];
            }
        }
        let (rx, tx, _) = best_pair(n_rx, n_tx, |w, v| {
            (0..n_c)
                .map(|c| t[w * n_c + c] * l.beta[c * n_tx + v])
                .sum::<C64>()
                .norm_sqr()
        });
        let b = Beams { rx, tx };
        self.beams[u] = Some(b);
        b
    }

    /// Pathloss-scaled equivalent channels `√L_i w_iᵀ H_i(f_k) v_{p_j}` for
    /// every subband, rows and columns following `ues`.
    fn equivalent_channels(&mut self, ues: &[usize]) -> (Vec<CMat>, Vec<Beams>) {
        let sel: Vec<Beams> = ues.iter().map(|&u| self.beams(u)).collect();
        let (n_rx, n_tx, n_sub) = (self.n_rx(), self.n_tx(), self.n_sub);
        let m = ues.len();
        let mut coef: Vec<Vec<C64>> = Vec::with_capacity(m * m);
        for (i, &u) in ues.iter().enumerate() {
            let l = &self.s.links[u];
            let g = &self.gains[u];
            for b in &sel {
                coef.push(
                    (0..g.len())
                        .map(|c| g[c] * l.alpha[c * n_rx + sel[i].rx] * l.beta[c * n_tx + b.tx] * l.amp)
                        .collect(),
                );
            }
        }
        let heqs = (0..n_sub)
            .map(|k| {
                CMat::from_fn(m, m, |i, j| {
                    let l = &self.s.links[ues[i]];
                    coef[i * m + j]
                        .iter()
                        .enumerate()
                        .map(|(c, a)| a * l.phase[c * n_sub + k])
                        .sum()
                })
            })
            .collect();
        (heqs, sel)
    }

    fn budget(&self, n_active: usize) -> LinkBudget {
        self.cfg.link_budget(n_active)
    }

    /// Interference-free SINR estimate of each UE with its codebook beams.
    fn initial_reports(&mut self) -> Result<Vec<[f64; 2]>> {
        let b = self.budget(1);
        (0..self.cfg.n_ues)
            .map(|u| {
                let (heqs, _) = self.equivalent_channels(&[u]);
                let mut out = [0.0; 2];
                for dir in Direction::BOTH {
                    let p = b.p_sc(dir);
                    let samples = heqs
                        .iter()
                        .zip(&self.widths)
                        .map(|(h, &w)| (h[(0, 0)].norm_sqr() * p / self.noise, w));
                    out[dir.index()] =
                        linear_to_db(effective_sinr_weighted(samples, self.cfg.eesm_beta)?.max(SINR_FLOOR));
                }
                Ok(out)
            })
            .collect()
    }
}

/// SINR summary of one allocation.
struct AllocationSinr {
    mean_linear: f64,
    effective: f64,
}

/// Evaluates every allocation of a bundle. `allocs` are the bundle's
/// allocations in layer order; the layer index is the row of the gain matrices.
fn bundle_sinrs(
    allocs: &[Allocation],
    gains: &[LayerGains],
    widths: &[f64],
    p_sc: f64,
    noise: f64,
    beta: f64,
) -> Result<Vec<AllocationSinr>> {
    let m = allocs.len();
    let mut ends: Vec<usize> = allocs.iter().map(|a| a.n_symbols).collect();
    ends.sort_unstable();
    ends.dedup();
    let mut samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
    let mut prev = 0;
    for &end in &ends {
        let active: Vec<bool> = allocs.iter().map(|a| a.n_symbols > prev).collect();
        let len = (end - prev) as f64;
        for (i, a) in allocs.iter().enumerate() {
            if !active[i] {
                continue;
            }
            for (g, &w) in gains.iter().zip(widths) {
                samples[i].push((g.sinr(a.direction, i, &active, p_sc, noise), w * len));
            }
        }
        prev = end;
    }
    samples
        .iter()
        .map(|s| {
            let total: f64 = s.iter().map(|x| x.1).sum();
            let mean_linear = s.iter().map(|x| x.0 * x.1).sum::<f64>() / total;
            Ok(AllocationSinr {
                mean_linear,
                effective: effective_sinr_weighted(s.iter().copied(), beta)?,
            })
        })
        .collect()
}

/// Latest CQI report usable at `subframe` given the feedback delay.
fn usable_report(history: &mut VecDeque<(u64, f64)>, subframe: u64, delay: u64) -> Option<f64> {
    let ready = |sf: u64| sf + delay <= subframe;
    while history.len() > 1 && ready(history[1].0) {
        history.pop_front();
    }
    history.front().filter(|r| ready(r.0)).map(|r| r.1)
}

/// Simulates one drop: placement, channels and the subframe loop.
pub fn run_drop(cfg: &ScenarioConfig, drop_index: usize) -> Result<DropResult> {
    let s = setup(cfg, drop_index)?;
    let frame = cfg.frame();
    let table: McsTable = cfg.mcs_table();
    let model = cfg.bler_model();
    let n_sc = cfg.n_subcarriers();
    let rho = cfg.rho();
    let n_ues = cfg.n_ues;
    let beamformer = cfg.bf_scheme.beamformer();

    let mut eng = Engine::new(cfg, s);
    let initial = eng.initial_reports()?;
    let ues: Vec<UeInfo> = eng
        .s
        .links
        .iter()
        .map(|l| UeInfo {
            d2d_m: l.placement.d2d,
            pathloss_db: l.pathloss.pathloss_db,
            los: l.pathloss.los,
        })
        .collect();

    let mut sources: Vec<TrafficSource> = Vec::new();
    for u in 0..n_ues {
        sources.push(TrafficSource::new(
            u,
            Direction::Dl,
            cfg.traffic.packet_bytes,
            cfg.traffic.interval_us,
        ));
        if cfg.traffic.symmetric {
            sources.push(TrafficSource::new(
                u,
                Direction::Ul,
                cfg.traffic.packet_bytes,
                cfg.traffic.interval_us,
            ));
        }
    }

    let mut state = SchedulerState::new(n_ues);
    let mut counters = vec![UeCounters::default(); n_ues];
    let mut reports: Vec<[VecDeque<(u64, f64)>; 2]> = (0..n_ues).map(|_| [VecDeque::new(), VecDeque::new()]).collect();
    let mut verdicts = substream(cfg.base_seed, &[drop_index as u64, stream::VERDICT]);
    let mut tbs = Vec::new();
    let mut trace = Vec::new();
    let mut symbols = SymbolCounters::default();

    let credit = |sources: &mut [TrafficSource], state: &mut SchedulerState, counters: &mut [UeCounters], t: u64| {
        for src in sources.iter_mut() {
            let bytes = src.take_until(t);
            state.queues[src.ue_id][src.direction.index()] += bytes;
            counters[src.ue_id].offered_bits[src.direction.index()] += 8 * bytes;
        }
    };

    for sf in 0..cfg.duration_ms {
        let t_us = sf * SUBFRAME_US;
        if sf > 0 {
            for l in eng.s.links.iter_mut() {
                l.clusters.evolve(rho, &mut l.evolution)?;
            }
            eng.refresh_gains();
        }
        credit(&mut sources, &mut state, &mut counters, t_us);

        let demands: Vec<UeDemand> = (0..n_ues)
            .map(|u| {
                let mut d = UeDemand::default();
                for dir in Direction::BOTH {
                    let i = dir.index();
                    let cqi = usable_report(&mut reports[u][i], sf, cfg.cqi_delay_subframes).unwrap_or(initial[u][i]);
                    let mcs = select_mcs(cqi, &table).entry;
                    d.mcs[i] = mcs.index;
                    d.symbols[i] = demand_symbols(state.queues[u][i], &mcs, n_sc);
                }
                d
            })
            .collect();
        let sched: SubframeSchedule = schedule(cfg.scheduler, &mut state, &demands, &frame)?;
        symbols.scheduled += sched.scheduled_symbols() as u64;
        symbols.padding += sched.total_padding() as u64;
        symbols.idle += sched.total_idle() as u64;

        for b in 0..sched.bundle_boundaries.len() {
            let mut allocs: Vec<Allocation> = sched.bundle(b).copied().collect();
            if allocs.is_empty() {
                continue;
            }
            allocs.sort_by_key(|a| a.layer);
            let dir = allocs[0].direction;
            let bundle_ues: Vec<usize> = allocs.iter().map(|a| a.ue_id).collect();
            let (heqs, sel) = eng.equivalent_channels(&bundle_ues);
            let budget = eng.budget(allocs.len());
            let p_sc = budget.p_sc(dir);
            let noise_ratio = eng.noise / p_sc;
            let ports: Vec<_> = sel.iter().map(|b| eng.s.tx_cb.get(b.tx).clone()).collect();
            let gram = port_gram(&ports);
            let layer_gains = heqs
                .iter()
                .map(|h| {
                    let map = match dir {
                        Direction::Dl => beamformer.downlink_map(h, noise_ratio)?,
                        Direction::Ul => beamformer.uplink_map(h, noise_ratio)?,
                    };
                    let (map, _) = normalize_port_map(&map, &gram);
                    Ok(LayerGains(h.matmul(&map)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let sinrs = bundle_sinrs(&allocs, &layer_gains, &eng.widths, p_sc, eng.noise, cfg.eesm_beta)?;

            for (a, sinr) in allocs.iter().zip(sinrs) {
                let i = a.direction.index();
                let eff_db = linear_to_db(sinr.effective.max(SINR_FLOOR));
                let mcs = table.entries()[a.mcs];
                let tb_bits = tb_size(&mcs, a.n_symbols, n_sc);
                let v = tb_verdict(eff_db, &mcs, &model, &mut verdicts)?;
                let payload_bytes = (tb_bits / 8).min(state.queues[a.ue_id][i]);
                state.queues[a.ue_id][i] -= payload_bytes;
                let c = &mut counters[a.ue_id];
                if v.corrupted {
                    c.corrupted_bits[i] += 8 * payload_bytes;
                } else {
                    c.delivered_bits[i] += 8 * payload_bytes;
                }
                reports[a.ue_id][i].push_back((sf, eff_db));
                tbs.push(TbRecord {
                    time_us: t_us as f64 + a.start_symbol as f64 * frame.symbol_duration_us,
                    subframe: sf,
                    ue: a.ue_id,
                    direction: a.direction,
                    layer: a.layer,
                    sinr_db: linear_to_db(sinr.mean_linear.max(SINR_FLOOR)),
                    sinr_eff_db: eff_db,
                    mcs: a.mcs,
                    n_symbols: a.n_symbols,
                    tb_bits,
                    payload_bits: 8 * payload_bytes,
                    bler: v.bler,
                    corrupted: v.corrupted,
                });
            }
        }
        trace.extend(sched.allocations.iter().map(|a| (sf, *a)));
    }
    credit(&mut sources, &mut state, &mut counters, cfg.duration_ms * SUBFRAME_US);
    for (c, q) in counters.iter_mut().zip(&state.queues) {
        c.queued_bits = [8 * q[0], 8 * q[1]];
    }

    Ok(DropResult {
        drop_index,
        duration_s: cfg.duration_ms as f64 * SUBFRAME_US as f64 * 1e-6,
        ues,
        counters,
        tbs,
        schedule: trace,
        symbols,
    })
}
