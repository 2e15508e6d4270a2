//! Fiber channel: time-varying unitary Jones matrix, loss, transmitter
//! phase noise and band-limited excess noise. Also SNU calibration.

use crate::dsp::ReceiverChain;
use crate::error::{Error, Result};
use crate::frontend::{self, DetectorNoise, FrontendConfig};
use crate::jones::JonesMatrix;
use crate::rng::{self, TAG_EXCESS, TAG_TRAJECTORY, TAG_TX_PHASE};
use crate::series::{DualPolSeries, RealSeriesPair};
use crate::txgen::PulseShape;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScramblerMode {
    /// Constant matrix from the initial angles.
    Static,
    /// Planar rotation at angular rate `sr`.
    Rate,
    /// Random walk of (α, φ1, φ2) at angular speed `sr`.
    Walk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub mode: ScramblerMode,
    pub alpha0: f64,
    pub phi1_0: f64,
    pub phi2_0: f64,
    /// Jones-space angular rate, rad/s. Poincaré-sphere rates are twice this.
    pub sr: f64,
    /// Walk direction persistence length, rad of travelled angle.
    pub walk_persistence: f64,
    /// Samples between walk direction updates.
    pub walk_block: usize,
    pub loss_db: f64,
    pub eta: f64,
    /// Electronic noise, SNU.
    pub v_ele: f64,
    /// Channel excess noise, SNU at the channel input.
    pub xi_ch: f64,
    /// Transmitter laser linewidth, Hz.
    pub linewidth_tx: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            mode: ScramblerMode::Walk,
            alpha0: 0.3,
            phi1_0: 0.2,
            phi2_0: -0.1,
            sr: 0.0,
            walk_persistence: 1.0,
            walk_block: 1024,
            loss_db: 4.971,
            eta: 0.56,
            v_ele: 0.15,
            xi_ch: 0.030,
            linewidth_tx: 100.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta {} outside (0, 1]", self.eta));
        }
        if !(self.loss_db >= 0.0 && self.loss_db.is_finite()) {
            return bad(format!("loss_db {} must be ≥ 0", self.loss_db));
        }
        if !(self.xi_ch >= 0.0 && self.xi_ch.is_finite()) {
            return bad(format!("xi_ch {} must be ≥ 0", self.xi_ch));
        }
        if !(self.sr >= 0.0 && self.sr.is_finite()) {
            return bad(format!("sr {} must be ≥ 0", self.sr));
        }
        if !(self.v_ele >= 0.0 && self.linewidth_tx >= 0.0) {
            return bad("v_ele and linewidth_tx must be ≥ 0".into());
        }
        if !(self.walk_persistence > 0.0) || self.walk_block == 0 {
            return bad("walk persistence and block must be positive".into());
        }
        for a in [self.alpha0, self.phi1_0, self.phi2_0] {
            if !a.is_finite() {
                return bad("initial angles must be finite".into());
            }
        }
        Ok(())
    }
}

/// Ground-truth channel angles sampled every `stride` samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JonesTrajectory {
    pub stride: usize,
    pub sample_rate: f64,
    pub alpha: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
}

impl JonesTrajectory {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Evolving channel angles. In walk mode the angle vector moves at constant
/// speed `sr` along a unit direction that diffuses on the sphere with
/// persistence length `walk_persistence`.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    mode: ScramblerMode,
    angles: [f64; 3],
    dir: [f64; 3],
    step: f64,
    block: usize,
    dir_sigma: f64,
    since_update: usize,
    rng: ChaCha8Rng,
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        [1.0, 0.0, 0.0]
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

impl TrajectoryState {
    pub fn new(cfg: &ChannelConfig, sample_rate: f64) -> Self {
        let mut rng = rng::stream(cfg.seed, TAG_TRAJECTORY);
        let g: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let step = cfg.sr / sample_rate;
        let arc = step * cfg.walk_block as f64;
        TrajectoryState {
            mode: cfg.mode,
            angles: [cfg.alpha0, cfg.phi1_0, cfg.phi2_0],
            dir: normalize3(g),
            step,
            block: cfg.walk_block,
            dir_sigma: (arc / cfg.walk_persistence).sqrt(),
            since_update: 0,
            rng,
        }
    }

    /// Current (α, φ1, φ2) of the walk.
    pub fn angles(&self) -> [f64; 3] {
        self.angles
    }

    /// Per-sample angle increments until the next direction update.
    fn increments(&self) -> [f64; 3] {
        if self.mode != ScramblerMode::Walk {
            return [0.0; 3];
        }
        [
            self.dir[0] * self.step,
            self.dir[1] * self.step,
            self.dir[2] * self.step,
        ]
    }

    /// True when the next `advance` starts a new direction block.
    fn at_block_start(&self) -> bool {
        self.since_update == 0
    }

    /// Advances the walk by one sample; a no-op outside walk mode.
    pub fn advance(&mut self) {
        if self.mode != ScramblerMode::Walk || self.step == 0.0 {
            return;
        }
        for i in 0..3 {
            self.angles[i] += self.dir[i] * self.step;
        }
        self.since_update += 1;
        if self.since_update == self.block {
            self.since_update = 0;
            let g: [f64; 3] = [
                self.rng.sample(StandardNormal),
                self.rng.sample(StandardNormal),
                self.rng.sample(StandardNormal),
            ];
            let dot = g[0] * self.dir[0] + g[1] * self.dir[1] + g[2] * self.dir[2];
            let mut d = self.dir;
            for i in 0..3 {
                d[i] += self.dir_sigma * (g[i] - dot * self.dir[i]);
            }
            self.dir = normalize3(d);
        }
    }
}

/// Channel matrix at time `t` (seconds). Walk mode reads the angles held
/// by `state`, which the caller advances in step with `t`.
pub fn jones_at(t: f64, cfg: &ChannelConfig, state: &TrajectoryState) -> Result<JonesMatrix> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!("time {t} must be ≥ 0")));
    }
    Ok(match cfg.mode {
        ScramblerMode::Static => JonesMatrix::from_angles(cfg.alpha0, cfg.phi1_0, cfg.phi2_0),
        ScramblerMode::Rate => JonesMatrix::rotation(cfg.sr * t),
        ScramblerMode::Walk => {
            let [a, p1, p2] = state.angles();
            JonesMatrix::from_angles(a, p1, p2)
        }
    })
}

/// Jones matrices along a trajectory whose angles move linearly, advanced
/// by phasor multiplication between exact re-syncs.
struct JonesRecurrence {
    rate_mode: bool,
    a: Complex64,
    e1: Complex64,
    e2: Complex64,
    da: Complex64,
    d1: Complex64,
    d2: Complex64,
}

impl JonesRecurrence {
    fn sync(t: f64, cfg: &ChannelConfig, state: &TrajectoryState) -> Self {
        let unit = |x: f64| Complex64::from_polar(1.0, x);
        match cfg.mode {
            ScramblerMode::Rate => JonesRecurrence {
                rate_mode: true,
                a: unit(cfg.sr * t),
                e1: unit(0.0),
                e2: unit(0.0),
                da: unit(state.step),
                d1: unit(0.0),
                d2: unit(0.0),
            },
            _ => {
                let [a, p1, p2] = state.angles();
                let [ia, i1, i2] = state.increments();
                JonesRecurrence {
                    rate_mode: false,
                    a: unit(a),
                    e1: unit(p1),
                    e2: unit(p2),
                    da: small_phasor(ia),
                    d1: small_phasor(i1),
                    d2: small_phasor(i2),
                }
            }
        }
    }

    #[inline]
    fn next(&mut self) -> JonesMatrix {
        let (c, s) = (self.a.re, self.a.im);
        let j = if self.rate_mode {
            JonesMatrix {
                m_vv: Complex64::new(c, 0.0),
                m_vh: Complex64::new(s, 0.0),
                m_hv: Complex64::new(-s, 0.0),
                m_hh: Complex64::new(c, 0.0),
            }
        } else {
            JonesMatrix {
                m_vv: self.e1 * c,
                m_vh: -self.e2 * s,
                m_hv: self.e2.conj() * s,
                m_hh: self.e1.conj() * c,
            }
        };
        self.a *= self.da;
        self.e1 *= self.d1;
        self.e2 *= self.d2;
        j
    }
}

fn truth_angles(t: f64, cfg: &ChannelConfig, state: &TrajectoryState) -> [f64; 3] {
    match cfg.mode {
        ScramblerMode::Static => [cfg.alpha0, cfg.phi1_0, cfg.phi2_0],
        ScramblerMode::Rate => [-cfg.sr * t, 0.0, 0.0],
        ScramblerMode::Walk => state.angles(),
    }
}

/// Band-limited excess noise shaped like the quantum signal.
#[derive(Debug, Clone, Copy)]
pub struct ExcessNoise<'a> {
    pub pulse: &'a PulseShape,
    /// Quantum band center in the frame of the series, Hz.
    pub center: f64,
}

/// `e^{jd}` for |d| ≪ 1 from its Taylor series; exact to double precision
/// for the per-sample phase steps of sub-MHz linewidths.
#[inline]
pub(crate) fn small_phasor(d: f64) -> Complex64 {
    if d.abs() > 1e-3 {
        return Complex64::from_polar(1.0, d);
    }
    let d2 = d * d;
    Complex64::new(1.0 - d2 / 2.0 + d2 * d2 / 24.0, d * (1.0 - d2 / 6.0))
}

/// Applies loss, the Jones channel, transmitter phase noise and excess
/// noise. Returns the received field and the ground-truth trajectory
/// sampled every `record_stride` samples.
pub fn apply_channel(
    mut tx: DualPolSeries,
    cfg: &ChannelConfig,
    excess: Option<ExcessNoise<'_>>,
    record_stride: usize,
) -> Result<(DualPolSeries, JonesTrajectory)> {
    cfg.validate()?;
    if tx.is_empty() {
        return Err(Error::Config("empty transmit series".into()));
    }
    let fs = tx.sample_rate;
    let stride = record_stride.max(1);
    let sqrt_t = cfg.transmittance().sqrt();
    let mut state = TrajectoryState::new(cfg, fs);
    let mut phase_rng = rng::stream(cfg.seed, TAG_TX_PHASE);
    let phase_sigma = (TAU * cfg.linewidth_tx / fs).sqrt();
    let mut theta = 0.0f64;
    let n = tx.len();
    let mut truth = JonesTrajectory {
        stride,
        sample_rate: fs,
        alpha: Vec::with_capacity(n / stride + 1),
        phi1: Vec::with_capacity(n / stride + 1),
        phi2: Vec::with_capacity(n / stride + 1),
    };
    let static_j = jones_at(0.0, cfg, &state)?;
    let frozen = cfg.mode == ScramblerMode::Static || cfg.sr == 0.0;
    let mut ph = Complex64::new(1.0, 0.0);
    let mut rec = JonesRecurrence::sync(0.0, cfg, &state);
    for i in 0..n {
        let t = i as f64 / fs;
        if i % stride == 0 {
            let [a, p1, p2] = truth_angles(t, cfg, &state);
            truth.alpha.push(a);
            truth.phi1.push(p1);
            truth.phi2.push(p2);
        }
        let j = if frozen {
            static_j
        } else {
            if i % 1024 == 0 || state.at_block_start() {
                rec = JonesRecurrence::sync(t, cfg, &state);
            }
            rec.next()
        };
        let (v, h) = j.apply(tx.v[i], tx.h[i]);
        if phase_sigma > 0.0 {
            if i % 1024 == 0 {
                ph = Complex64::from_polar(1.0, theta);
            }
            let rot = ph * sqrt_t;
            tx.v[i] = v * rot;
            tx.h[i] = h * rot;
            let d = phase_sigma * phase_rng.sample::<f64, _>(StandardNormal);
            theta += d;
            ph *= small_phasor(d);
        } else {
            tx.v[i] = v * sqrt_t;
            tx.h[i] = h * sqrt_t;
        }
        state.advance();
    }
    if let Some(ex) = excess {
        if cfg.xi_ch > 0.0 {
            add_excess_noise(&mut tx, cfg, ex)?;
        }
    }
    Ok((tx, truth))
}

fn add_excess_noise(
    rx: &mut DualPolSeries,
    cfg: &ChannelConfig,
    ex: ExcessNoise<'_>,
) -> Result<()> {
    let sps = ex.pulse.sps;
    if !rx.len().is_multiple_of(sps) {
        return Err(Error::Config(format!(
            "series length {} is not a multiple of {sps} samples/symbol",
            rx.len()
        )));
    }
    let ns = rx.len() / sps;
    let sigma = (cfg.transmittance() * cfg.xi_ch).sqrt();
    let mut rng = rng::stream(cfg.seed, TAG_EXCESS);
    // The DFT of white circular Gaussian symbols is white circular Gaussian
    // with variance scaled by the length, so the spectrum is drawn directly.
    let spec_sigma = sigma * (ns as f64).sqrt();
    for pol in 0..2 {
        let spec: Vec<Complex64> = (0..ns)
            .map(|_| {
                Complex64::new(
                    spec_sigma * rng.sample::<f64, _>(StandardNormal),
                    spec_sigma * rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let shaped = ex.pulse.shape_spectrum(&spec, ex.center, rx.sample_rate);
        let dst = if pol == 0 { &mut rx.v } else { &mut rx.h };
        for (d, s) in dst.iter_mut().zip(&shaped) {
            *d += s;
        }
    }
    Ok(())
}

/// Shot-noise-unit normalization constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnuCalibration {
    pub shot_plus_ele_var: f64,
    pub ele_var: f64,
    pub scale: f64,
}

impl SnuCalibration {
    pub fn new(shot_plus_ele_var: f64, ele_var: f64) -> Result<Self> {
        let scale = shot_plus_ele_var - ele_var;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Calibration(format!(
                "non-positive SNU scale {scale:.3e} (shot+ele {shot_plus_ele_var:.3e}, ele {ele_var:.3e})"
            )));
        }
        Ok(SnuCalibration {
            shot_plus_ele_var,
            ele_var,
            scale,
        })
    }

    /// Calibration of data that is already in SNU.
    pub fn unit() -> Self {
        SnuCalibration {
            shot_plus_ele_var: 1.0,
            ele_var: 0.0,
            scale: 1.0,
        }
    }

    /// Electronic noise relative to shot noise.
    pub fn v_ele(&self) -> f64 {
        self.ele_var / self.scale
    }

    /// Amplitude factor converting raw symbols to SNU.
    pub fn amplitude_factor(&self) -> f64 {
        1.0 / self.scale.sqrt()
    }
}

/// Noise-only frame of `n_symbols` symbols passed through detection and the
/// quantum-band receiver chain; returns the per-quadrature variance.
fn noise_only_variance(
    fe: &FrontendConfig,
    chain: &ReceiverChain,
    noise: DetectorNoise,
    n_symbols: usize,
    seed: u64,
) -> Result<f64> {
    let sps = chain.tx.sps();
    let n = n_symbols * sps;
    let field = DualPolSeries::zeros(n, chain.tx.sample_rate);
    let pair: RealSeriesPair = frontend::heterodyne_detect(&field, fe, noise, seed)?;
    let pair = frontend::adc_capture(pair, fe)?;
    let (sv, sh) = chain.quantum_noise_symbols(&pair)?;
    let m = (sv.len() + sh.len()) as f64;
    let p: f64 = sv
        .iter()
        .chain(sh.iter())
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        / m;
    Ok(p / 2.0)
}

/// Measures the SNU scale with two signal-off frames: shot plus electronic
/// noise, then electronic noise alone.
pub fn calibrate_snu(
    cfg: &ChannelConfig,
    fe: &FrontendConfig,
    chain: &ReceiverChain,
    n_symbols: usize,
) -> Result<SnuCalibration> {
    cfg.validate()?;
    let seed = rng::derive_seed(cfg.seed, rng::TAG_CAL_SHOT);
    let both = noise_only_variance(
        fe,
        chain,
        DetectorNoise {
            eta: cfg.eta,
            shot: true,
            v_ele: cfg.v_ele,
        },
        n_symbols,
        seed,
    )?;
    let ele = noise_only_variance(
        fe,
        chain,
        DetectorNoise {
            eta: cfg.eta,
            shot: false,
            v_ele: cfg.v_ele,
        },
        n_symbols,
        rng::derive_seed(seed, 1),
    )?;
    SnuCalibration::new(both, ele)
}

/// Infinite-length limit of [`calibrate_snu`], from the noise PSD and the
/// receiver's noise bandwidth.
pub fn analytic_calibration(
    cfg: &ChannelConfig,
    fe: &FrontendConfig,
    chain: &ReceiverChain,
) -> Result<SnuCalibration> {
    let shot = chain.noise_gain_per_quadrature(fe)? * fe.shot_psd;
    SnuCalibration::new(shot * (1.0 + cfg.v_ele), shot * cfg.v_ele)
}
