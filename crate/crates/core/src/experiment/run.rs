//! One trial: txgen → channel → frontend → tracker → metrics.

use super::config::{CalibrationMode, ExperimentConfig, Tracker};
use crate::baselines::{cma_track, fir_mimo_track, fir_symbols};
use crate::channel::{
    analytic_calibration, apply_channel, calibrate_snu, ChannelConfig, ExcessNoise, SnuCalibration,
};
use crate::dsp::phase::{phase_reference, rotate_by_reference, smooth_pilot};
use crate::dsp::{
    apply_demux, bandsplit, compensate_phase, demodulate_xp, estimate_polarization,
    estimate_tone_freq_or_midpoint, lms_equalize, matched_filter_downsample, LmsOutcome,
    ReceiverChain,
};
use crate::error::{Error, Result, StageExt};
use crate::frontend::{adc_capture, heterodyne_detect, DetectorNoise, FrontendConfig};
use crate::metrics::{
    asymptotic_skr, estimate_params, evm, tracking_error_stats, MetricsReport, ParamEstimate,
    SkrParams, TrackingErrors,
};
use crate::rng;
use crate::txgen::{build_frame, synthesize_tx_offset, PulseShape, SymbolFrame, TxConfig};
use num_complex::Complex64;

/// Per-trial configurations with derived seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSetup {
    pub seed: u64,
    pub tx: TxConfig,
    pub channel: ChannelConfig,
    pub frontend: FrontendConfig,
}

pub fn trial_setup(cfg: &ExperimentConfig, sr: f64, trial: u64) -> TrialSetup {
    let seed = rng::trial_seed(
        cfg.master_seed,
        if cfg.paired_trials { 0.0 } else { sr },
        trial,
    );
    TrialSetup {
        seed,
        tx: TxConfig {
            seed: rng::derive_seed(seed, 101),
            ..cfg.tx.clone()
        },
        channel: ChannelConfig {
            sr,
            seed: rng::derive_seed(seed, 102),
            ..cfg.channel.clone()
        },
        frontend: FrontendConfig {
            seed: rng::derive_seed(seed, 103),
            ..cfg.frontend.clone()
        },
    }
}

/// Front-end settings and the receiver chain actually simulated. When the
/// detector response is de-embedded and no quantizer or decimator sits in
/// between, filter and inverse cancel bin by bin and both are skipped.
pub fn effective_receiver(
    cfg: &ExperimentConfig,
    setup: &TrialSetup,
) -> (FrontendConfig, ReceiverChain) {
    let fe = &setup.frontend;
    let direct =
        fe.adc_bits.is_none() && (setup.tx.sample_rate - fe.adc_rate).abs() <= 1e-9 * fe.adc_rate;
    if cfg.deembed_bpd && direct {
        let fe = FrontendConfig {
            bpd_bandwidth: None,
            ..fe.clone()
        };
        (fe, ReceiverChain::new(&setup.tx, None))
    } else {
        let deembed = if cfg.deembed_bpd {
            fe.bpd_bandwidth
        } else {
            None
        };
        (fe.clone(), ReceiverChain::new(&setup.tx, deembed))
    }
}

/// Everything a trial produces beyond its CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDetail {
    pub report: MetricsReport,
    pub calibration: SnuCalibration,
    pub estimate: Option<ParamEstimate>,
    pub tracking: Option<TrackingErrors>,
    /// Quantum-band H/V power ratio after demultiplexing, dB.
    pub crosstalk_db: Option<f64>,
    /// Payload EVM against `ĝ·tx`, dB.
    pub evm_db: f64,
}

/// Runs one trial with the configured tracker.
pub fn run_experiment(cfg: &ExperimentConfig, sr: f64, trial: u64) -> Result<MetricsReport> {
    run_detailed(cfg, cfg.tracker, sr, trial).map(|d| d.report)
}

fn power(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn calibration_for(
    cfg: &ExperimentConfig,
    setup: &TrialSetup,
    fe: &FrontendConfig,
    chain: &ReceiverChain,
) -> Result<SnuCalibration> {
    match cfg.calibration {
        CalibrationMode::Analytic => analytic_calibration(&setup.channel, fe, chain),
        CalibrationMode::Measured => calibrate_snu(&setup.channel, fe, chain, setup.tx.n_symbols),
    }
}

struct TrackerOutput {
    /// SNU-normalized, equalized symbols.
    symbols: Vec<Complex64>,
    tracking: Option<TrackingErrors>,
    crosstalk_db: Option<f64>,
}

/// Training-consistent target gain: with it the identity filter is the
/// MMSE solution, so LMS corrects only residual impairments.
fn reference_gain(y: &[Complex64], frame: &SymbolFrame) -> Complex64 {
    let n = frame.n_train();
    let py: f64 = power(&y[..n]);
    let cross: Complex64 = frame.symbols[..n]
        .iter()
        .zip(&y[..n])
        .map(|(t, r)| t * r.conj())
        .sum();
    if cross.norm() > 0.0 {
        Complex64::new(py, 0.0) / cross
    } else {
        Complex64::new(1.0, 0.0)
    }
}

fn equalize(y: Vec<Complex64>, frame: &SymbolFrame, cfg: &ExperimentConfig) -> Result<LmsOutcome> {
    let mut lc = cfg.lms.to_config();
    lc.reference_gain = reference_gain(&y, frame);
    lc.unit_noise_gain = true;
    lms_equalize(&y, frame, &lc)
}

fn lost_lock(e: &Error) -> bool {
    matches!(
        e.root(),
        Error::Divergence { .. } | Error::TrackerDropout { .. } | Error::CompensationDropout { .. }
    )
}

/// Runs one trial with an explicit tracker.
pub fn run_detailed(
    cfg: &ExperimentConfig,
    tracker: Tracker,
    sr: f64,
    trial: u64,
) -> Result<RunDetail> {
    cfg.validate()?;
    let setup = trial_setup(cfg, sr, trial);
    let (fe_eff, chain) = effective_receiver(cfg, &setup);
    let (tx, ch, fe) = (&setup.tx, &setup.channel, &fe_eff);
    let frame = build_frame(tx).stage("txgen")?;
    // Optical carrier frame: the LO beat moves everything back to the IF.
    let field = synthesize_tx_offset(&frame, tx, -fe.lo_offset).stage("txgen")?;
    let pulse = PulseShape::from_config(tx);
    let excess = ExcessNoise {
        pulse: &pulse,
        center: tx.f_q - fe.lo_offset,
    };
    let stride = (tx.sample_rate / chain.split.out_rate).round().max(1.0) as usize;
    let (rx, truth) = apply_channel(field, ch, Some(excess), stride).stage("channel")?;

    let noise = DetectorNoise {
        eta: ch.eta,
        shot: true,
        v_ele: ch.v_ele,
    };
    let pair = heterodyne_detect(&rx, fe, noise, fe.seed).stage("frontend")?;
    drop(rx);
    let pair = adc_capture(pair, fe).stage("frontend")?;
    let cal = calibration_for(cfg, &setup, fe, &chain).stage("calibration")?;
    let bands = bandsplit(&pair, tx, &chain.split).stage("bandsplit")?;
    drop(pair);

    let f1 = estimate_tone_freq_or_midpoint(&bands.pt1).stage("frequency")?;
    let f2 = estimate_tone_freq_or_midpoint(&bands.pt2).stage("frequency")?;
    // Polarization drift shifts the two pilots in opposite directions; the
    // LO offset is their mean. PT1 shares the offset of the quantum band so
    // its phase reference carries the same residual rotation.
    let offset = 0.5 * ((f1 - tx.f_pt1) + (f2 - tx.f_pt2));
    let mut bands = bands;
    bands.q = demodulate_xp(bands.q, tx.f_q + offset).stage("demod")?;
    bands.pt1 = demodulate_xp(bands.pt1, tx.f_pt1 + offset).stage("demod")?;
    bands.pt2 = demodulate_xp(bands.pt2, f2).stage("demod")?;

    let k = cal.amplitude_factor();
    let w = cfg.tracker_window;
    let out: Result<TrackerOutput> = match tracker {
        Tracker::Proposed => (|| {
            let est = estimate_polarization(&bands.pt2, w).stage("tracker")?;
            let tracking = tracking_error_stats(&est, &truth).ok();
            let (mut q, mut pt1) = (bands.q, bands.pt1);

            pt1 = smooth_pilot(pt1, w).stage("phase")?;
            drop(bands.pt2);
            apply_demux(&est, &mut [&mut q, &mut pt1]).stage("tracker")?;
            drop(est);
            // Circular band filtering smears the frame ends; skip the same
            // edge guard used for estimation.
            let sps = (q.fields.sample_rate / tx.symbol_rate).round() as usize;
            let g = (cfg.edge_guard * sps).min(q.len() / 4);
            let span = g..q.len() - g;
            let xt = power(&q.fields.h[span.clone()]) / power(&q.fields.v[span]);
            let q = compensate_phase(&q, &pt1, 1).stage("phase")?;
            drop(pt1);
            let sync = matched_filter_downsample(&q, tx).stage("matched filter")?;
            let y: Vec<Complex64> = sync.v.iter().map(|z| z * k).collect();
            let lms = equalize(y, &frame, cfg).stage("lms")?;
            Ok(TrackerOutput {
                symbols: lms.output,
                tracking,
                crosstalk_db: Some(10.0 * xt.log10()),
            })
        })(),
        Tracker::Cma => (|| {
            cma_track(&mut bands, &cfg.cma.to_config()).stage("cma")?;
            let u = phase_reference(&bands.pt1.fields.v, w, true).stage("phase")?;
            let q = rotate_by_reference(bands.q, &u);
            let sync = matched_filter_downsample(&q, tx).stage("matched filter")?;
            let y: Vec<Complex64> = sync.v.iter().map(|z| z * k).collect();
            let lms = equalize(y, &frame, cfg).stage("lms")?;
            Ok(TrackerOutput {
                symbols: lms.output,
                tracking: None,
                crosstalk_db: None,
            })
        })(),
        Tracker::Fir => (|| {
            let sync = fir_symbols(&bands.q, &bands.pt1, tx, w).stage("phase")?;
            drop(bands);
            let v: Vec<Complex64> = sync.v.iter().map(|z| z * k).collect();
            let h: Vec<Complex64> = sync.h.iter().map(|z| z * k).collect();
            let mut lc = cfg.lms.to_config();
            lc.reference_gain = reference_gain(&v, &frame);
            lc.unit_noise_gain = true;
            let lms = fir_mimo_track(&v, &h, &frame, &lc).stage("fir")?;
            Ok(TrackerOutput {
                symbols: lms.output,
                tracking: None,
                crosstalk_db: None,
            })
        })(),
    };

    let mut report = MetricsReport {
        sr,
        trial,
        seed: setup.seed,
        tracker: tracker.name().to_string(),
        t_hat: f64::NAN,
        xi_hat: f64::NAN,
        evm_db: f64::NAN,
        alpha_rms_err: f64::NAN,
        skr_bps: 0.0,
        block_size: 0,
        diverged: false,
    };
    let out = match out {
        Ok(o) => o,
        // Losing lock is a per-trial outcome, not a fault of the sweep.
        Err(e) if lost_lock(&e) => {
            report.diverged = true;
            return Ok(RunDetail {
                report,
                calibration: cal,
                estimate: None,
                tracking: None,
                crosstalk_db: None,
                evm_db: f64::NAN,
            });
        }
        Err(e) => return Err(e),
    };

    let lo = frame.n_train() + cfg.edge_guard;
    let hi = frame.len() - cfg.edge_guard;
    let txp = &frame.symbols[lo..hi];
    let rxp = &out.symbols[lo..hi];
    let est = estimate_params(txp, rxp, &SnuCalibration::unit(), cal.v_ele(), ch.eta)
        .stage("estimation")?;
    let scaled: Vec<Complex64> = rxp.iter().map(|z| z / est.gain).collect();
    let evm_db = evm(&scaled, txp).stage("estimation")?;
    let skr = asymptotic_skr(&SkrParams {
        v_a: tx.v_a,
        t: est.t_hat.clamp(0.0, 1.0),
        xi: est.xi_hat.max(0.0),
        eta: ch.eta,
        v_ele: cal.v_ele(),
        beta: cfg.beta,
        symbol_rate: tx.symbol_rate,
        train_ratio: tx.train_ratio,
    })
    .stage("key rate")?;
    report.t_hat = est.t_hat;
    report.xi_hat = est.xi_hat;
    report.evm_db = evm_db;
    report.alpha_rms_err = out.tracking.map_or(f64::NAN, |t| t.alpha_rms_err);
    report.skr_bps = skr;
    report.block_size = hi - lo;
    Ok(RunDetail {
        report,
        calibration: cal,
        estimate: Some(est),
        tracking: out.tracking,
        crosstalk_db: out.crosstalk_db,
        evm_db,
    })
}
