use clap::{Parser, Subcommand};
use pilotpol::channel::{analytic_calibration, calibrate_snu};
use pilotpol::experiment::csv::to_csv;
use pilotpol::experiment::plot::emit_plots;
use pilotpol::experiment::run::effective_receiver;
use pilotpol::experiment::sweep::summarize;
use pilotpol::experiment::{run_detailed, sweep, trial_setup, ExperimentConfig, Figure, Tracker};
use pilotpol::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pilotpol",
    version,
    about = "Pilot-tone polarization tracking link simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the default configuration.
    InitConfig {
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one trial and print its CSV row.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        sr: f64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Overrides the configured tracker (proposed, cma or fir).
        #[arg(long)]
        tracker: Option<String>,
    },
    /// Run a scrambling-rate sweep and write CSV plus summary.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset: 3 (krad/s), 4 (tracker comparison) or 5 (Mrad/s).
        #[arg(long)]
        figure: Option<u32>,
        #[arg(long)]
        tracker: Option<String>,
        /// Run trials one at a time.
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render SVG charts from a sweep CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
    },
    /// Print the shot-noise calibration for trial 0.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also measure it with two signal-off frames.
        #[arg(long)]
        measured: bool,
    },
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {}: {io}", p.display())),
            e => e,
        }),
        None => Ok(ExperimentConfig::default()),
    }
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::InitConfig { out } => {
            let text = ExperimentConfig::default().to_toml()?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Run {
            config,
            sr,
            trial,
            tracker,
        } => {
            let cfg = load(config.as_deref())?;
            let t = tracker.map_or(Ok(cfg.tracker), |s| s.parse::<Tracker>())?;
            if !(sr >= 0.0 && sr.is_finite()) {
                return Err(Error::Config(format!("sr {sr} must be finite and ≥ 0")));
            }
            let d = run_detailed(&cfg, t, sr, trial)?;
            print!("{}", to_csv(std::slice::from_ref(&d.report)));
        }
        Cmd::Sweep {
            config,
            figure,
            tracker,
            serial,
            out_dir,
        } => {
            let mut cfg = load(config.as_deref())?;
            if serial {
                cfg.parallel = false;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            let mut trackers = vec![cfg.tracker];
            if let Some(n) = figure {
                trackers = Figure::from_number(n)?.apply(&mut cfg);
            }
            if let Some(t) = tracker {
                trackers = vec![t.parse()?];
            }
            let out = sweep(&cfg, &trackers)?;
            print!("{}", summarize(&out.rows));
            eprintln!(
                "wrote {} and {}",
                out.csv_path.display(),
                out.summary_path.display()
            );
        }
        Cmd::Plot { csv } => {
            for p in emit_plots(&csv)? {
                println!("{}", p.display());
            }
        }
        Cmd::Calibrate { config, measured } => {
            let cfg = load(config.as_deref())?;
            let s = trial_setup(&cfg, 0.0, 0);
            let (fe, chain) = effective_receiver(&cfg, &s);
            let a = analytic_calibration(&s.channel, &fe, &chain)?;
            println!(
                "analytic: shot+ele {:.6e}  ele {:.6e}  scale {:.6e}  v_ele {:.4}",
                a.shot_plus_ele_var,
                a.ele_var,
                a.scale,
                a.v_ele()
            );
            if measured {
                let m = calibrate_snu(&s.channel, &fe, &chain, s.tx.n_symbols)?;
                println!(
                    "measured: shot+ele {:.6e}  ele {:.6e}  scale {:.6e}  v_ele {:.4}",
                    m.shot_plus_ele_var,
                    m.ele_var,
                    m.scale,
                    m.v_ele()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    pilotpol::memory::retain_freed_memory();
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
