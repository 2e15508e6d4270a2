//! Experiment configuration (TOML).

use crate::baselines::CmaConfig;
use crate::channel::{ChannelConfig, ScramblerMode};
use crate::dsp::LmsConfig;
use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::txgen::TxConfig;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tracker {
    Proposed,
    Cma,
    Fir,
}

impl Tracker {
    pub const ALL: [Tracker; 3] = [Tracker::Proposed, Tracker::Cma, Tracker::Fir];

    pub fn name(self) -> &'static str {
        match self {
            Tracker::Proposed => "proposed",
            Tracker::Cma => "cma",
            Tracker::Fir => "fir",
        }
    }
}

impl fmt::Display for Tracker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tracker {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Tracker::Proposed),
            "cma" => Ok(Tracker::Cma),
            "fir" => Ok(Tracker::Fir),
            _ => Err(Error::Config(format!(
                "unknown tracker `{s}` (proposed|cma|fir)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    /// Shot-noise scale from the receiver's noise bandwidth.
    Analytic,
    /// Two signal-off frames per trial.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmsSettings {
    pub taps: usize,
    pub mu: f64,
}

impl Default for LmsSettings {
    fn default() -> Self {
        LmsSettings { taps: 11, mu: 1e-5 }
    }
}

impl LmsSettings {
    pub fn to_config(&self) -> LmsConfig {
        LmsConfig {
            taps: self.taps,
            mu: self.mu,
            ..LmsConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaSettings {
    pub mu: f64,
    pub warmup: usize,
    pub pilot_offset: f64,
}

impl Default for CmaSettings {
    fn default() -> Self {
        let c = CmaConfig::default();
        CmaSettings {
            mu: c.mu,
            warmup: c.warmup,
            pilot_offset: c.pilot_offset,
        }
    }
}

impl CmaSettings {
    pub fn to_config(&self) -> CmaConfig {
        CmaConfig {
            mu: self.mu,
            warmup: self.warmup,
            pilot_offset: self.pilot_offset,
            ..CmaConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub tracker: Tracker,
    /// Pilot smoothing window for polarization and phase tracking, samples
    /// at the band rate.
    pub tracker_window: usize,
    pub sweep_sr: Vec<f64>,
    pub trials_per_point: u64,
    /// Reuse the same trial seeds at every scrambling rate.
    pub paired_trials: bool,
    pub out_dir: PathBuf,
    pub calibration: CalibrationMode,
    /// Run sweep trials on the rayon pool.
    pub parallel: bool,
    /// Reconciliation efficiency used for the key rate.
    pub beta: f64,
    /// Symbols dropped at each end of the payload before estimation.
    pub edge_guard: usize,
    /// Invert the detector response inside the extracted bands.
    pub deembed_bpd: bool,
    pub tx: TxConfig,
    pub channel: ChannelConfig,
    pub frontend: FrontendConfig,
    pub lms: LmsSettings,
    pub cma: CmaSettings,
}

/// Scrambling rates of the walk-mode experiments, rad/s.
pub const KRAD_SWEEP: [f64; 6] = [0.0, 0.63e3, 1.26e3, 3.14e3, 6.28e3, 12.57e3];

/// Rate-mode grid: 0, 2π·1 MHz, then 2π·10 MHz steps up to 2π·70 MHz.
pub fn mrad_sweep() -> Vec<f64> {
    let mut v = vec![0.0, TAU * 1e6];
    v.extend((1..=7).map(|k| TAU * 1e7 * k as f64));
    v
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 2024,
            tracker: Tracker::Proposed,
            tracker_window: 256,
            sweep_sr: KRAD_SWEEP.to_vec(),
            trials_per_point: 20,
            paired_trials: false,
            out_dir: PathBuf::from("out"),
            calibration: CalibrationMode::Analytic,
            parallel: true,
            beta: 0.95,
            edge_guard: 64,
            deembed_bpd: true,
            tx: TxConfig::default(),
            channel: ChannelConfig::default(),
            frontend: FrontendConfig::default(),
            lms: LmsSettings::default(),
            cma: CmaSettings::default(),
        }
    }
}

/// Sweep presets named after the figures they regenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Proposed tracker, walk mode, krad/s rates.
    KradSweep = 3,
    /// All three trackers at krad/s rates.
    Comparison = 4,
    /// Proposed tracker, rate mode, Mrad/s rates, per-sample tracking.
    MradSweep = 5,
}

impl Figure {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            3 => Ok(Figure::KradSweep),
            4 => Ok(Figure::Comparison),
            5 => Ok(Figure::MradSweep),
            _ => Err(Error::Config(format!("unknown figure {n} (3, 4 or 5)"))),
        }
    }

    /// Applies the preset and returns the trackers to sweep.
    pub fn apply(self, cfg: &mut ExperimentConfig) -> Vec<Tracker> {
        match self {
            Figure::KradSweep => {
                cfg.channel.mode = ScramblerMode::Walk;
                cfg.sweep_sr = KRAD_SWEEP.to_vec();
                vec![Tracker::Proposed]
            }
            Figure::Comparison => {
                cfg.channel.mode = ScramblerMode::Walk;
                cfg.sweep_sr = KRAD_SWEEP.to_vec();
                Tracker::ALL.to_vec()
            }
            Figure::MradSweep => {
                cfg.channel.mode = ScramblerMode::Rate;
                cfg.tracker_window = 1;
                cfg.paired_trials = true;
                cfg.sweep_sr = mrad_sweep();
                vec![Tracker::Proposed]
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                msg: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials_per_point == 0 {
            return Err(Error::Config("trials_per_point must be ≥ 1".into()));
        }
        if let Some(sr) = self
            .sweep_sr
            .iter()
            .find(|s| !(**s >= 0.0 && s.is_finite()))
        {
            return Err(Error::Config(format!(
                "sweep rate {sr} must be finite and ≥ 0"
            )));
        }
        if self.tracker_window == 0 {
            return Err(Error::Config("tracker_window must be ≥ 1".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta {} outside (0, 1]", self.beta)));
        }
        if self.lms.taps.is_multiple_of(2) || !(self.lms.mu > 0.0) {
            return Err(Error::Config(
                "lms.taps must be odd and lms.mu positive".into(),
            ));
        }
        if !(self.cma.mu > 0.0) {
            return Err(Error::Config("cma.mu must be positive".into()));
        }
        self.tx.validate()?;
        self.channel.validate()?;
        self.frontend.validate()?;
        if 2 * self.edge_guard >= self.tx.n_symbols - self.tx.n_train() {
            return Err(Error::Config("edge_guard leaves no payload".into()));
        }
        Ok(())
    }

    /// Stable hex digest of the serialized configuration.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = self.to_toml().unwrap_or_default();
        let d = Sha256::digest(text.as_bytes());
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
