//! Result files written into the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hbf_core::engine::{drop_channels, DropResult, ScenarioConfig, Summary};
use hbf_core::phy::Direction;
use serde::Serialize;

pub const SINR_SAMPLES: &str = "sinr_samples.csv";
pub const BLER_SAMPLES: &str = "bler_samples.csv";
pub const SCHEDULE_TRACE: &str = "schedule_trace.csv";
pub const THROUGHPUT: &str = "throughput.csv";
pub const SUMMARY: &str = "summary.json";
pub const CHANNEL_TRACE: &str = "channel_trace.csv";

#[derive(Serialize)]
struct SinrRow {
    time_us: f64,
    ue: usize,
    direction: String,
    layer: usize,
    sinr_db: f64,
    bler: f64,
    corrupted: bool,
}

#[derive(Serialize)]
struct BlerRow {
    drop: usize,
    time_us: f64,
    ue: usize,
    direction: String,
    layer: usize,
    mcs: usize,
    n_symbols: usize,
    tb_bits: u64,
    sinr_eff_db: f64,
    bler: f64,
    corrupted: bool,
}

#[derive(Serialize)]
struct ScheduleRow {
    subframe: u64,
    bundle: usize,
    layer: usize,
    ue: usize,
    direction: String,
    start_symbol: usize,
    n_symbols: usize,
    padding_after: usize,
}

#[derive(Serialize)]
struct ThroughputRow {
    drop: usize,
    ue: usize,
    direction: String,
    offered_mbps: f64,
    delivered_mbps: f64,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    scenario: &'a ScenarioConfig,
    summary: &'a Summary,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

pub fn write_sinr_samples(path: &Path, results: &[DropResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for t in results.iter().flat_map(|r| &r.tbs) {
        w.serialize(SinrRow {
            time_us: t.time_us,
            ue: t.ue,
            direction: t.direction.to_string(),
            layer: t.layer,
            sinr_db: t.sinr_db,
            bler: t.bler,
            corrupted: t.corrupted,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bler_samples(path: &Path, results: &[DropResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in results {
        for t in &r.tbs {
            w.serialize(BlerRow {
                drop: r.drop_index,
                time_us: t.time_us,
                ue: t.ue,
                direction: t.direction.to_string(),
                layer: t.layer,
                mcs: t.mcs,
                n_symbols: t.n_symbols,
                tb_bits: t.tb_bits,
                sinr_eff_db: t.sinr_eff_db,
                bler: t.bler,
                corrupted: t.corrupted,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_schedule_trace(path: &Path, results: &[DropResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for (sf, a) in results.iter().flat_map(|r| &r.schedule) {
        w.serialize(ScheduleRow {
            subframe: *sf,
            bundle: a.bundle,
            layer: a.layer,
            ue: a.ue_id,
            direction: a.direction.to_string(),
            start_symbol: a.start_symbol,
            n_symbols: a.n_symbols,
            padding_after: a.padding_after,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_throughput(path: &Path, results: &[DropResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in results {
        for (ue, c) in r.counters.iter().enumerate() {
            for dir in Direction::BOTH {
                let i = dir.index();
                let mbps = |bits: u64| bits as f64 / r.duration_s / 1e6;
                w.serialize(ThroughputRow {
                    drop: r.drop_index,
                    ue,
                    direction: dir.to_string(),
                    offered_mbps: mbps(c.offered_bits[i]),
                    delivered_mbps: mbps(c.delivered_bits[i]),
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, cfg: &ScenarioConfig, summary: &Summary) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut out, &SummaryFile { scenario: cfg, summary })?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Channel matrices at the start of every drop, one row per
/// `(drop, ue, subband)`; entry `(r, c)` is flattened row-major into
/// `h_r_c_re, h_r_c_im` columns.
pub fn write_channel_trace(path: &Path, cfg: &ScenarioConfig) -> Result<()> {
    let mut w = csv_writer(path)?;
    let (rows, cols) = (cfg.ue_array.n1 * cfg.ue_array.n2, cfg.bs_array.n1 * cfg.bs_array.n2);
    let mut header = vec![
        "drop".to_string(),
        "ue".to_string(),
        "subband".to_string(),
        "pathloss_db".to_string(),
    ];
    for r in 0..rows {
        for c in 0..cols {
            header.push(format!("h_{r}_{c}_re"));
            header.push(format!("h_{r}_{c}_im"));
        }
    }
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for d in 0..cfg.n_drops {
        for ch in drop_channels(cfg, d)? {
            for (k, h) in ch.subbands.iter().enumerate() {
                record.clear();
                record.extend([
                    d.to_string(),
                    ch.ue_id.to_string(),
                    k.to_string(),
                    ch.pathloss_db.to_string(),
                ]);
                for z in h.as_slice() {
                    record.push(z.re.to_string());
                    record.push(z.im.to_string());
                }
                w.write_record(&record)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes every standard file into `dir`, creating it if needed, and returns
/// the paths written.
pub fn write_all(
    dir: &Path,
    cfg: &ScenarioConfig,
    results: &[DropResult],
    summary: &Summary,
    channel_trace: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = |name: &str| dir.join(name);
    write_sinr_samples(&p(SINR_SAMPLES), results)?;
    write_bler_samples(&p(BLER_SAMPLES), results)?;
    write_schedule_trace(&p(SCHEDULE_TRACE), results)?;
    write_throughput(&p(THROUGHPUT), results)?;
    write_summary(&p(SUMMARY), cfg, summary)?;
    let mut written: Vec<PathBuf> = [SINR_SAMPLES, BLER_SAMPLES, SCHEDULE_TRACE, THROUGHPUT, SUMMARY]
        .iter()
        .map(|n| p(n))
        .collect();
    if channel_trace {
        write_channel_trace(&p(CHANNEL_TRACE), cfg)?;
        written.push(p(CHANNEL_TRACE));
    }
    Ok(written)
}
