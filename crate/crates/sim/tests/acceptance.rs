//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The process exits successfully whatever the verdicts, so the workspace
//! test run stays usable while a criterion is red. Set
//! `HBF_ACCEPTANCE_STRICT=1` to turn any FAIL into a non-zero exit, and
//! `HBF_ACCEPTANCE_ONLY=1,3,7` to run a subset.

use std::env;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use hbf_core::array::{dft_codebook, ArrayGeometry, BeamVector};
use hbf_core::beamforming::{mmse_precoder, BfScheme, PrecoderSet};
use hbf_core::channel::ChannelRealization;
use hbf_core::engine::{
    aggregate, run_drop, sinr_cdf, DropResult, Preset, ScenarioConfig, Summary, OUTAGE_BLER, RELIABLE_BLER,
};
use hbf_core::linalg::CMat;
use hbf_core::mac::{pmrs_schedule, validate_schedule, FrameConfig, SchedulerKind, SchedulerState, UeDemand};
use hbf_core::phy::{sinr_dl, sinr_ul, tb_size, Direction, McsTable};
use hbf_core::rng::{complex_normal, substream};
use hbf_core::C64;
use nalgebra::DMatrix;
use rand::Rng;

type Criterion = (u32, &'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = env::var("HBF_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = env::var("HBF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [Criterion; 8] = [
        (1, "codebook orthonormality", codebook_orthonormality),
        (2, "MMSE zero-forcing and matched-filter limits", mmse_limits),
        (3, "SINR oracle equivalence", sinr_oracle),
        (4, "SINR CDF comparison, low traffic", sinr_cdfs),
        (5, "BLER bimodality and outage ordering", bler_bimodality),
        (6, "throughput under high traffic", throughput),
        (7, "scheduler property suite", scheduler_properties),
        (8, "frame arithmetic", frame_arithmetic),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let v = f();
        let elapsed = t.elapsed();
        ran += 1;
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {} [{}]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            secs(elapsed)
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn codebook_orthonormality() -> Verdict {
    let t = Instant::now();
    let sizes = [1, 2, 4, 8, 16];
    let mut worst: f64 = 0.0;
    for n1 in sizes {
        for n2 in sizes {
            let cb = dft_codebook(&ArrayGeometry::new(n1, n2).unwrap()).unwrap();
            let dev = cb.gram().sub(&CMat::identity(n1 * n2)).frobenius_norm();
            worst = worst.max(dev);
        }
    }
    let fast = within(t.elapsed(), 1.0);
    verdict(
        worst <= 1e-12 && fast,
        format!("max ‖G − I‖_F = {worst:.2e} over 25 geometries"),
    )
}

fn to_na(m: &CMat) -> DMatrix<C64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng, 1.0))
}

fn mmse_limits() -> Verdict {
    let t = Instant::now();
    let mut rng = substream(2, &[0]);
    let (mut zf_worst, mut mf_worst): (f64, f64) = (0.0, 0.0);
    let mut drawn = 0;
    let mut kept = 0;
    while kept < 100 {
        drawn += 1;
        let h = random_matrix(&mut rng, 4, 4);
        let hn = to_na(&h);
        let sv = hn.clone().singular_values();
        if sv.max() / sv.min() > 10.0 {
            continue;
        }
        kept += 1;
        let v = to_na(&mmse_precoder(&h, 1e-12).unwrap().matrix);
        zf_worst = zf_worst.max((&hn * &v - DMatrix::<C64>::identity(4, 4)).norm());
        let sigma = 1e6;
        let v = to_na(&mmse_precoder(&h, sigma).unwrap().matrix) * C64::new(sigma, 0.0);
        let hh = hn.adjoint();
        mf_worst = mf_worst.max((&v - &hh).norm() / hh.norm());
    }
    let pass = zf_worst <= 1e-6 && mf_worst <= 1e-3 && within(t.elapsed(), 1.0);
    verdict(
        pass,
        format!(
            "ZF residual {zf_worst:.2e}, MF deviation {mf_worst:.2e} ({kept} channels with cond ≤ 10 of {drawn} drawn)"
        ),
    )
}

fn unit(rng: &mut impl Rng, n: usize) -> BeamVector {
    BeamVector::normalized((0..n).map(|_| complex_normal(rng, 1.0)).collect()).unwrap()
}

/// `wᵀ H v` by explicit double loop.
fn raw_gain(w: &BeamVector, h: &CMat, v: &BeamVector) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..h.rows() {
        for c in 0..h.cols() {
            acc += w.as_slice()[r] * h[(r, c)] * v.as_slice()[c];
        }
    }
    acc.norm_sqr()
}

fn sinr_oracle() -> Verdict {
    let t = Instant::now();
    let cfg = ScenarioConfig::default();
    let budget = cfg.link_budget(4);
    let noise = budget.noise_per_subcarrier();
    let (n_rx, n_tx) = (16, 64);
    let mut rng = substream(3, &[0]);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for _ in 0..1000 {
        let chans: Vec<ChannelRealization> = (0..4)
            .map(|u| ChannelRealization {
                ue_id: u,
                pathloss_db: rng.random_range(80.0..130.0),
                subbands: vec![random_matrix(&mut rng, n_rx, n_tx)],
                timestamp_s: 0.0,
            })
            .collect();
        let refs: Vec<&ChannelRealization> = chans.iter().collect();
        let set = PrecoderSet {
            bs_beams: vec![(0..4).map(|_| unit(&mut rng, n_tx)).collect()],
            ue_beams: (0..4).map(|_| unit(&mut rng, n_rx)).collect(),
        };
        let mut active = [true; 4];
        for a in active.iter_mut() {
            *a = rng.random_bool(0.75);
        }
        let gain = |ue: usize, port: usize| {
            let l = 10f64.powf(-chans[ue].pathloss_db / 10.0);
            l * raw_gain(&set.ue_beams[ue], &chans[ue].subbands[0], &set.bs_beams[0][port])
        };
        for u in 0..4 {
            if !active[u] {
                continue;
            }
            let (p_dl, p_ul) = (budget.p_sc_dl(), budget.p_sc_ul());
            let i_dl: f64 = (0..4).filter(|&l| l != u && active[l]).map(|l| gain(u, l)).sum();
            let want_dl = gain(u, u) * p_dl / (i_dl * p_dl + noise);
            let i_ul: f64 = (0..4).filter(|&v| v != u && active[v]).map(|v| gain(v, u)).sum();
            let want_ul = gain(u, u) * p_ul / (i_ul * p_ul + noise);
            let got_dl = sinr_dl(u, 0, &set, &refs, &budget, &active).unwrap();
            let got_ul = sinr_ul(u, 0, &set, &refs, &budget, &active).unwrap();
            worst = worst
                .max(((got_dl - want_dl) / want_dl).abs())
                .max(((got_ul - want_ul) / want_ul).abs());
            checks += 2;
        }
    }
    let pass = worst <= 1e-10 && within(t.elapsed(), 10.0);
    verdict(
        pass,
        format!("max relative error {worst:.2e} over {checks} DL/UL evaluations"),
    )
}

struct Arm {
    label: &'static str,
    results: Vec<DropResult>,
    summary: Summary,
}

fn run_arm(label: &'static str, cfg: &ScenarioConfig) -> Arm {
    let results: Vec<DropResult> = (0..cfg.n_drops).map(|d| run_drop(cfg, d).unwrap()).collect();
    let summary = aggregate(&results).unwrap();
    Arm {
        label,
        results,
        summary,
    }
}

/// The three configurations compared in the SINR and BLER figures, run once
/// on the low-traffic preset and shared by the criteria that read them.
fn figure_arms() -> &'static [Arm; 3] {
    static ARMS: OnceLock<[Arm; 3]> = OnceLock::new();
    ARMS.get_or_init(|| run_figure_arms(Preset::PaperLowTraffic.config()))
}

fn run_figure_arms(base: ScenarioConfig) -> [Arm; 3] {
    let multi = ScenarioConfig {
        n_layers: 4,
        scheduler: SchedulerKind::Pmrs,
        ..base.clone()
    };
    [
        run_arm("1L CBF", &base),
        run_arm(
            "4L CBF",
            &ScenarioConfig {
                bf_scheme: BfScheme::Cbf,
                ..multi.clone()
            },
        ),
        run_arm(
            "4L SMBF",
            &ScenarioConfig {
                bf_scheme: BfScheme::Smbf,
                ..multi
            },
        ),
    ]
}

fn median(a: &Arm, dir: Direction) -> f64 {
    a.summary.direction(dir).sinr_median_db.unwrap_or(f64::NAN)
}

fn sinr_cdfs() -> Verdict {
    let t = Instant::now();
    let base = Preset::PaperLowTraffic.config();
    let [one, cbf, smbf] = figure_arms();
    let mut parts = Vec::new();
    let mut a_ok = true;
    let mut b_ok = true;
    for dir in Direction::BOTH {
        let (m1, mc, ms) = (median(one, dir), median(cbf, dir), median(smbf, dir));
        a_ok &= (ms - m1).abs() <= 3.0;
        b_ok &= mc <= ms - 5.0;
        parts.push(format!(
            "{dir} median {} {m1:.1} / {} {mc:.1} / {} {ms:.1} dB",
            one.label, cbf.label, smbf.label
        ));
    }
    let tail_cbf = sinr_cdf(&cbf.results, Direction::Ul).eval(-10.0);
    let tail_smbf = sinr_cdf(&smbf.results, Direction::Ul).eval(-10.0);
    let c_ok = tail_cbf >= 0.05 && tail_smbf < 0.01;
    let fast = within(t.elapsed(), 300.0);
    let detail = format!(
        "{}; (a) SMBF within 3 dB of 1L: {}; (b) 4L CBF ≥ 5 dB below SMBF: {}; (c) UL share below −10 dB {:.2}% CBF vs {:.2}% SMBF (need ≥ 5% and < 1%): {}; {} drops × {} ms",
        parts.join("; "),
        ok(a_ok),
        ok(b_ok),
        100.0 * tail_cbf,
        100.0 * tail_smbf,
        ok(c_ok),
        base.n_drops,
        base.duration_ms
    );
    verdict(a_ok && b_ok && c_ok && fast, detail)
}

fn ok(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn bler_bimodality() -> Verdict {
    let t = Instant::now();
    let base = Preset::PaperLowTraffic.config();
    assert_eq!(base.cqi_delay_subframes, 2);
    assert_eq!(base.t_coh_ms, Some(50.0));
    let arms = figure_arms();
    let mut bimodal_ok = true;
    let mut parts = Vec::new();
    for a in arms {
        let d = a.summary.direction(Direction::Ul);
        let frac = d.bimodal_fraction.unwrap_or(0.0);
        bimodal_ok &= frac >= 0.9;
        parts.push(format!(
            "{} UL in [0, {RELIABLE_BLER}] ∪ [{OUTAGE_BLER}, 1]: {:.1}%, outage {:.2}%",
            a.label,
            100.0 * frac,
            100.0 * d.outage_fraction.unwrap_or(0.0)
        ));
    }
    let out = |a: &Arm| a.summary.ul.outage_fraction.unwrap_or(0.0);
    let order_ok = out(&arms[1]) > out(&arms[2]);
    let fast = within(t.elapsed(), 300.0);
    let detail = format!(
        "{}; all ≥ 90%: {}; 4L CBF outage above 4L SMBF: {}",
        parts.join("; "),
        ok(bimodal_ok),
        ok(order_ok)
    );
    verdict(bimodal_ok && order_ok && fast, detail)
}

fn throughput() -> Verdict {
    let t = Instant::now();
    let base = Preset::PaperHighTraffic.config();
    let one = run_arm("1L TMRS CBF", &base);
    let four = run_arm(
        "4L PMRS SMBF",
        &ScenarioConfig {
            n_layers: 4,
            scheduler: SchedulerKind::Pmrs,
            bf_scheme: BfScheme::Smbf,
            ..base.clone()
        },
    );
    let s1 = &one.summary;
    let s4 = &four.summary;
    let saturated = Direction::BOTH
        .iter()
        .all(|&d| s1.direction(d).delivered_mbps < 0.8 * s1.direction(d).offered_mbps);
    let total1 = s1.dl.delivered_mbps + s1.ul.delivered_mbps;
    let total4 = s4.dl.delivered_mbps + s4.ul.delivered_mbps;
    let ratio = total4 / total1;
    let fast = within(t.elapsed(), 600.0);
    let detail = format!(
        "offered {:.0}/{:.0} Mbps DL/UL; {} delivers {:.1}/{:.1}, {} delivers {:.1}/{:.1}; 1L saturated: {}; ratio {ratio:.2} (need ≥ 1.5); published reference 330/180 (1L) and above 420/450 (4L)",
        s1.dl.offered_mbps,
        s1.ul.offered_mbps,
        one.label,
        s1.dl.delivered_mbps,
        s1.ul.delivered_mbps,
        four.label,
        s4.dl.delivered_mbps,
        s4.ul.delivered_mbps,
        ok(saturated)
    );
    verdict(saturated && ratio >= 1.5 && fast, detail)
}

fn scheduler_properties() -> Verdict {
    let t = Instant::now();
    let mut rng = substream(7, &[0]);
    let mut problems = Vec::new();
    let mut subframes = 0;
    while subframes < 10_000 {
        let n_ues = rng.random_range(1..=16);
        let frame = FrameConfig::with_layers(rng.random_range(1..=4));
        let mut state = SchedulerState::new(n_ues);
        for _ in 0..50 {
            let demands: Vec<UeDemand> = (0..n_ues)
                .map(|_| {
                    let mut pick = || {
                        if rng.random_bool(0.3) {
                            0
                        } else {
                            rng.random_range(1..=60)
                        }
                    };
                    UeDemand {
                        symbols: [pick(), pick()],
                        mcs: [0, 0],
                    }
                })
                .collect();
            let s = pmrs_schedule(&mut state, &demands, &frame).unwrap();
            let v = validate_schedule(&s, &frame);
            if !v.is_empty() {
                problems.push(format!("violations {v:?}"));
            }
            let cells = frame.n_data_symbols() * frame.n_layers;
            if s.scheduled_symbols() + s.total_padding() + s.total_idle() != cells {
                problems.push("symbol accounting".to_string());
            }
            subframes += 1;
        }
    }

    // Backlogged UEs, including more groups than data symbols.
    let mut fairness_windows = 0;
    for (n_ues, layers) in [(7, 4), (30, 1), (60, 1), (150, 2), (13, 3)] {
        let frame = FrameConfig::with_layers(layers);
        let mut state = SchedulerState::new(n_ues);
        let demands = vec![
            UeDemand {
                symbols: [100, 100],
                mcs: [0, 0]
            };
            n_ues
        ];
        let mut served: Vec<Vec<bool>> = Vec::new();
        let mut n_b = 0;
        for _ in 0..200 {
            let s = pmrs_schedule(&mut state, &demands, &frame).unwrap();
            n_b = s.bundle_boundaries.len();
            let mut hit = vec![false; n_ues];
            for a in &s.allocations {
                hit[a.ue_id] = true;
            }
            served.push(hit);
        }
        for w in served.windows(n_b) {
            fairness_windows += 1;
            if !(0..n_ues).all(|u| w.iter().any(|h| h[u])) {
                problems.push(format!(
                    "UE starved within {n_b} subframes ({n_ues} UEs, {layers} layers)"
                ));
                break;
            }
        }
    }

    let frame = FrameConfig::with_layers(4);
    let mut state = SchedulerState::new(7);
    let demands = vec![
        UeDemand {
            symbols: [48, 0],
            mcs: [0, 0]
        };
        7
    ];
    let s = pmrs_schedule(&mut state, &demands, &frame).unwrap();
    let n_b = s.bundle_boundaries.len();
    let n_a = s.allocations[0].n_symbols + s.allocations[0].padding_after;
    let example_ok = (n_b, n_a) == (2, 24);
    if !example_ok {
        problems.push(format!("worked example gave ({n_b}, {n_a})"));
    }
    let fast = within(t.elapsed(), 10.0);
    let detail = format!(
        "{subframes} random subframes validated, {fairness_windows} backlogged windows checked, worked example (N_b, N_a) = ({n_b}, {n_a}){}",
        if problems.is_empty() { String::new() } else { format!("; problems: {}", problems.join(", ")) }
    );
    verdict(problems.is_empty() && fast, detail)
}

fn frame_arithmetic() -> Verdict {
    let frame = FrameConfig::default();
    let slot = frame.symbols_per_slot as f64 * frame.symbol_duration_us;
    let n_sc = ScenarioConfig::default().n_subcarriers();
    let table = McsTable::default();
    let top = table.top();
    let threshold = 12_000.0 / n_sc as f64;
    let fits = tb_size(top, 1, n_sc) >= 12_000;
    let pass = (slot - 250.0).abs() <= 0.1 && n_sc == 3300 && threshold < 3.64 && top.spectral_eff >= threshold && fits;
    verdict(
        pass,
        format!(
            "slot {slot:.2} µs, {n_sc} subcarriers, packet-fit {threshold:.4} bit/subcarrier, top MCS {} bit/subcarrier carries {} bits in one symbol",
            top.spectral_eff,
            tb_size(top, 1, n_sc)
        ),
    )
}
