//! Scrambling-rate sweeps.

use super::config::{ExperimentConfig, Tracker};
use super::csv::{sort_rows, to_csv};
use super::run::run_detailed;
use crate::error::Result;
use crate::metrics::MetricsReport;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<MetricsReport>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// All (tracker, rate, trial) rows, sorted.
pub fn sweep_rows(cfg: &ExperimentConfig, trackers: &[Tracker]) -> Result<Vec<MetricsReport>> {
    cfg.validate()?;
    let jobs: Vec<(Tracker, f64, u64)> = trackers
        .iter()
        .flat_map(|&t| {
            cfg.sweep_sr
                .iter()
                .flat_map(move |&sr| (0..cfg.trials_per_point).map(move |k| (t, sr, k)))
        })
        .collect();
    let run = |&(t, sr, k): &(Tracker, f64, u64)| run_detailed(cfg, t, sr, k).map(|d| d.report);
    let mut rows: Vec<MetricsReport> = if cfg.parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };
    sort_rows(&mut rows);
    Ok(rows)
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 {
        x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v.sqrt())
}

/// Per (tracker, rate) mean and standard deviation of ξ̂ and key rate.
pub fn summarize(rows: &[MetricsReport]) -> String {
    let mut s = String::from(
        "# excess noise in SNU referenced to the channel input; key rate in bit/s\n\
         # tracker     sr_rad_s  trials  diverged  xi_mean  xi_std  skr_mean  skr_std\n",
    );
    let mut i = 0;
    while i < rows.len() {
        let j = rows[i..]
            .iter()
            .position(|r| r.tracker != rows[i].tracker || r.sr != rows[i].sr)
            .map_or(rows.len(), |p| i + p);
        let g = &rows[i..j];
        let ok: Vec<&MetricsReport> = g.iter().filter(|r| !r.diverged).collect();
        let (xm, xs) = mean_std(&ok.iter().map(|r| r.xi_hat).collect::<Vec<_>>());
        let (km, ks) = mean_std(&g.iter().map(|r| r.skr_bps).collect::<Vec<_>>());
        let _ = writeln!(
            s,
            "{:<10} {:>11.2} {:>7} {:>9} {:>8.4} {:>7.4} {:>9.4e} {:>8.2e}",
            g[0].tracker,
            g[0].sr,
            g.len(),
            g.len() - ok.len(),
            xm,
            xs,
            km,
            ks
        );
        i = j;
    }
    s
}

/// Runs the sweep and writes `sweep.csv` and `summary.txt` to `out_dir`.
pub fn sweep(cfg: &ExperimentConfig, trackers: &[Tracker]) -> Result<SweepOutput> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let rows = sweep_rows(cfg, trackers)?;
    let csv_path = cfg.out_dir.join("sweep.csv");
    let summary_path = cfg.out_dir.join("summary.txt");
    std::fs::write(&csv_path, to_csv(&rows))?;
    std::fs::write(&summary_path, summarize(&rows))?;
    Ok(SweepOutput {
        rows,
        csv_path,
        summary_path,
    })
}
