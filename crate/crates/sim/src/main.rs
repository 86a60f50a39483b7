use std::process::ExitCode;

use clap::Parser;
use hbf_core::phy::Direction;
use hbf_sim::cli::Args;
use hbf_sim::{output, simulate};

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<()> {
    let args = Args::parse();
    let cfg = args.scenario()?;
    eprintln!(
        "{} UEs, {} layer(s), {} + {}, {} drop(s) of {} ms",
        cfg.n_ues, cfg.n_layers, cfg.scheduler, cfg.bf_scheme, cfg.n_drops, cfg.duration_ms
    );
    let (results, summary) = simulate(&cfg, |r| {
        eprintln!(
            "drop {:>3}: DL {:7.1} Mbps, UL {:7.1} Mbps",
            r.drop_index,
            r.delivered_mbps(Direction::Dl),
            r.delivered_mbps(Direction::Ul)
        );
    })?;
    let written = output::write_all(&args.out_dir, &cfg, &results, &summary, args.channel_trace)?;
    for dir in Direction::BOTH {
        let d = summary.direction(dir);
        let median = d.sinr_median_db.map_or("-".to_string(), |m| format!("{m:.1} dB"));
        println!(
            "{dir}: offered {:.1} Mbps, delivered {:.1} ± {:.1} Mbps, median SINR {median}, mean BLER {:.4}",
            d.offered_mbps,
            d.delivered_mbps,
            d.delivered_mbps_stderr,
            d.mean_bler.unwrap_or(0.0)
        );
    }
    println!(
        "padding {:.3}, idle {:.3}",
        summary.padding_fraction, summary.idle_fraction
    );
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
