//! Report CSV: fixed header, one row per trial, rows sorted by
//! (tracker, rate, trial) so output never depends on scheduling.

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use std::cmp::Ordering;
use std::fmt::Write as _;

pub const HEADER: &str =
    "sr_rad_s,trial,seed,tracker,t_hat,xi_hat_snu,evm_db,alpha_rms_err_rad,skr_bps,diverged";

pub fn row_order(a: &MetricsReport, b: &MetricsReport) -> Ordering {
    a.tracker
        .cmp(&b.tracker)
        .then(a.sr.total_cmp(&b.sr))
        .then(a.trial.cmp(&b.trial))
}

pub fn sort_rows(rows: &mut [MetricsReport]) {
    rows.sort_by(row_order);
}

pub fn to_csv(rows: &[MetricsReport]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.sr,
            r.trial,
            r.seed,
            r.tracker,
            r.t_hat,
            r.xi_hat,
            r.evm_db,
            r.alpha_rms_err,
            r.skr_bps,
            r.diverged
        );
    }
    s
}

fn field<T: std::str::FromStr>(v: &str, name: &str, line: usize) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name} `{v}`"),
    })
}

/// Parses a report CSV. Blank lines are skipped; the header must match.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsReport>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        Some((n, h)) => {
            return Err(Error::Parse {
                line: n,
                msg: format!("unexpected header `{h}`"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (n, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 10 {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected 10 fields, found {}", f.len()),
            });
        }
        let tracker = f[3].trim();
        if tracker.is_empty() {
            return Err(Error::Parse {
                line: n,
                msg: "empty tracker".into(),
            });
        }
        rows.push(MetricsReport {
            sr: field(f[0], "sr_rad_s", n)?,
            trial: field(f[1], "trial", n)?,
            seed: field(f[2], "seed", n)?,
            tracker: tracker.to_string(),
            t_hat: field(f[4], "t_hat", n)?,
            xi_hat: field(f[5], "xi_hat_snu", n)?,
            evm_db: field(f[6], "evm_db", n)?,
            alpha_rms_err: field(f[7], "alpha_rms_err_rad", n)?,
            skr_bps: field(f[8], "skr_bps", n)?,
            block_size: 0,
            diverged: field(f[9], "diverged", n)?,
        });
    }
    Ok(rows)
}
