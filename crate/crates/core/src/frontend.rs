//! Polarization-diversity heterodyne detection and ADC capture.

use crate::channel::small_phasor;
use crate::error::{Error, Result};
use crate::fft;
use crate::rng::{self, TAG_DETECT_H, TAG_DETECT_V, TAG_LO_PHASE};
use crate::series::{DualPolSeries, Nco, RealSeriesPair};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    /// LO frequency offset from the carrier, Hz.
    pub lo_offset: f64,
    /// LO laser linewidth, Hz.
    pub lo_linewidth: f64,
    /// Single-pole detector 3-dB bandwidth, Hz; `None` disables the filter.
    pub bpd_bandwidth: Option<f64>,
    /// Per-sample shot-noise variance at the detector output.
    pub shot_psd: f64,
    /// When false, shot and electronic noise are not added.
    pub detection_noise: bool,
    pub adc_rate: f64,
    pub adc_bits: Option<u32>,
    pub seed: u64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            lo_offset: 1.75e9,
            lo_linewidth: 100.0,
            bpd_bandwidth: Some(1.6e9),
            shot_psd: 0.5,
            detection_noise: true,
            adc_rate: 10e9,
            adc_bits: None,
            seed: 0,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lo_offset.is_finite() && self.lo_linewidth >= 0.0) {
            return bad("lo_offset must be finite and lo_linewidth ≥ 0".into());
        }
        if let Some(b) = self.bpd_bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("bpd_bandwidth {b} must be positive"));
            }
        }
        if !(self.shot_psd > 0.0 && self.shot_psd.is_finite()) {
            return bad(format!("shot_psd {} must be positive", self.shot_psd));
        }
        if !(self.adc_rate > 0.0) {
            return bad(format!("adc_rate {} must be positive", self.adc_rate));
        }
        if let Some(b) = self.adc_bits {
            if !(1..=24).contains(&b) {
                return bad(format!("adc_bits {b} outside 1..=24"));
            }
        }
        Ok(())
    }
}

/// Detection-noise switches for one detection pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorNoise {
    /// Detector quantum efficiency applied to the field.
    pub eta: f64,
    /// Whether shot noise is present.
    pub shot: bool,
    /// Electronic noise relative to shot noise.
    pub v_ele: f64,
}

impl DetectorNoise {
    pub fn variance(&self, cfg: &FrontendConfig) -> f64 {
        if !cfg.detection_noise {
            return 0.0;
        }
        cfg.shot_psd * (if self.shot { 1.0 } else { 0.0 } + self.v_ele)
    }
}

/// Single-pole response `1 / (1 + j f / fc)`.
pub fn bpd_response(f: f64, fc: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) / Complex64::new(1.0, f / fc)
}

fn apply_bpd(x: &mut [f64], fs: f64, fc: f64) {
    let n = x.len();
    if n < 2 {
        return;
    }
    let mut spec = fft::real_forward(x);
    for (k, z) in spec.iter_mut().enumerate() {
        *z *= bpd_response(k as f64 * fs / n as f64, fc);
    }
    let out = fft::real_inverse(&mut spec, n);
    let inv = 1.0 / n as f64;
    for (d, s) in x.iter_mut().zip(out) {
        *d = s * inv;
    }
}

/// Beats each polarization against the LO and adds detection noise:
/// `i(t) = Re{√η E(t) e^{j(2π f_lo t + θ_lo(t))}} + n(t)`.
/// Noise enters before the optional detector lowpass.
pub fn heterodyne_detect(
    rx: &DualPolSeries,
    cfg: &FrontendConfig,
    noise: DetectorNoise,
    seed: u64,
) -> Result<RealSeriesPair> {
    cfg.validate()?;
    if rx.is_empty() {
        return Err(Error::Config("empty received series".into()));
    }
    if !(noise.eta > 0.0 && noise.eta <= 1.0) {
        return Err(Error::Config(format!("eta {} outside (0, 1]", noise.eta)));
    }
    let fs = rx.sample_rate;
    let n = rx.len();
    let amp = noise.eta.sqrt();
    let sigma = noise.variance(cfg).sqrt();
    let lo_sigma = (TAU * cfg.lo_linewidth / fs).sqrt();
    let mut lo_rng = rng::stream(seed, TAG_LO_PHASE);
    let mut nv = rng::stream(seed, TAG_DETECT_V);
    let mut nh = rng::stream(seed, TAG_DETECT_H);
    let mut nco = Nco::new(cfg.lo_offset, fs);
    let mut theta = 0.0f64;
    let mut i_v = Vec::with_capacity(n);
    let mut i_h = Vec::with_capacity(n);
    let mut ph = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let mut osc = nco.next_phasor() * amp;
        if lo_sigma > 0.0 {
            if k % 1024 == 0 {
                ph = Complex64::from_polar(1.0, theta);
            }
            osc *= ph;
            let d = lo_sigma * lo_rng.sample::<f64, _>(StandardNormal);
            theta += d;
            ph *= small_phasor(d);
        }
        let mut a = (rx.v[k] * osc).re;
        let mut b = (rx.h[k] * osc).re;
        if sigma > 0.0 {
            a += sigma * nv.sample::<f64, _>(StandardNormal);
            b += sigma * nh.sample::<f64, _>(StandardNormal);
        }
        i_v.push(a);
        i_h.push(b);
    }
    if let Some(fc) = cfg.bpd_bandwidth {
        apply_bpd(&mut i_v, fs, fc);
        apply_bpd(&mut i_h, fs, fc);
    }
    RealSeriesPair::new(i_v, i_h, fs)
}

/// Decimates to the ADC rate and optionally quantizes over the observed
/// range of both channels.
pub fn adc_capture(pair: RealSeriesPair, cfg: &FrontendConfig) -> Result<RealSeriesPair> {
    cfg.validate()?;
    let ratio = pair.sample_rate / cfg.adc_rate;
    let r = ratio.round();
    if r < 1.0 || (ratio - r).abs() > 1e-9 * ratio {
        return Err(Error::Config(format!(
            "ADC rate {} does not divide input rate {}",
            cfg.adc_rate, pair.sample_rate
        )));
    }
    let r = r as usize;
    let (mut i_v, mut i_h) = if r == 1 {
        (pair.i_v, pair.i_h)
    } else {
        (
            pair.i_v.iter().step_by(r).copied().collect(),
            pair.i_h.iter().step_by(r).copied().collect(),
        )
    };
    if let Some(bits) = cfg.adc_bits {
        let (lo, hi) = i_v
            .iter()
            .chain(i_h.iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        if hi > lo {
            let levels = (1u64 << bits) as f64;
            let step = (hi - lo) / levels;
            let q = |x: f64| lo + (((x - lo) / step).floor().clamp(0.0, levels - 1.0) + 0.5) * step;
            i_v.iter_mut().for_each(|x| *x = q(*x));
            i_h.iter_mut().for_each(|x| *x = q(*x));
        }
    }
    RealSeriesPair::new(i_v, i_h, cfg.adc_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quiet() -> FrontendConfig {
        FrontendConfig {
            lo_linewidth: 0.0,
            bpd_bandwidth: None,
            detection_noise: false,
            ..FrontendConfig::default()
        }
    }

    const UNIT: DetectorNoise = DetectorNoise {
        eta: 1.0,
        shot: true,
        v_ele: 0.0,
    };

    fn tone_field(n: usize, f0: f64, phase: f64, amp: f64) -> DualPolSeries {
        let fs = 10e9;
        let v = (0..n)
            .map(|k| Complex64::from_polar(amp, TAU * f0 * k as f64 / fs + phase))
            .collect();
        DualPolSeries::new(v, vec![Complex64::new(0.0, 0.0); n], fs).unwrap()
    }

    #[test]
    fn zero_field_noise_off_is_zero() {
        let out = heterodyne_detect(&DualPolSeries::zeros(100, 10e9), &quiet(), UNIT, 1).unwrap();
        assert!(out.i_v.iter().chain(&out.i_h).all(|&x| x == 0.0));
    }

    #[test]
    fn tone_matches_direct_evaluation() {
        let f0 = 0.123e9;
        let phi = 0.7;
        let out = heterodyne_detect(&tone_field(4000, f0, phi, 1.0), &quiet(), UNIT, 1).unwrap();
        for (k, &x) in out.i_v.iter().enumerate() {
            let t = k as f64 / 10e9;
            let want = (TAU * (f0 + 1.75e9) * t + phi).cos();
            assert!((x - want).abs() < 1e-9, "k={k}");
        }
        assert!(out.i_h.iter().all(|&x| x == 0.0));
    }

    fn tone_amplitude(x: &[f64], f: f64, fs: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &v) in x.iter().enumerate() {
            acc += v * Complex64::from_polar(1.0, -TAU * f * k as f64 / fs);
        }
        2.0 * acc.norm() / x.len() as f64
    }

    #[test]
    fn bpd_three_db_point() {
        let mut cfg = quiet();
        cfg.bpd_bandwidth = Some(1.6e9);
        let n = 100_000;
        // Beat tones on the 100 kHz grid at 1.6 GHz and 10 MHz.
        let hi =
            heterodyne_detect(&tone_field(n, 1.6e9 - 1.75e9, 0.0, 1.0), &cfg, UNIT, 1).unwrap();
        let lo =
            heterodyne_detect(&tone_field(n, 0.01e9 - 1.75e9, 0.0, 1.0), &cfg, UNIT, 1).unwrap();
        let rel = 20.0
            * (tone_amplitude(&hi.i_v, 1.6e9, 10e9) / tone_amplitude(&lo.i_v, 0.01e9, 10e9))
                .log10();
        assert!((rel + 3.0).abs() < 0.2, "{rel}");
    }

    #[test]
    fn noise_floor_variance() {
        let mut cfg = quiet();
        cfg.detection_noise = true;
        let noise = DetectorNoise {
            eta: 0.56,
            shot: true,
            v_ele: 0.15,
        };
        let out =
            heterodyne_detect(&DualPolSeries::zeros(1_000_000, 10e9), &cfg, noise, 4).unwrap();
        let var = out.i_v.iter().map(|x| x * x).sum::<f64>() / 1e6;
        assert!((var / (0.5 * 1.15) - 1.0).abs() < 0.02);
    }

    #[test]
    fn identical_pols_identical_outputs() {
        let f = tone_field(3000, 0.2e9, 0.1, 2.0);
        let both = DualPolSeries::new(f.v.clone(), f.v.clone(), f.sample_rate).unwrap();
        let mut cfg = quiet();
        cfg.bpd_bandwidth = Some(1.6e9);
        cfg.lo_linewidth = 1e6;
        let out = heterodyne_detect(&both, &cfg, UNIT, 3).unwrap();
        assert_eq!(out.i_v, out.i_h);
    }

    #[test]
    fn adc_identity_and_decimation() {
        let p = RealSeriesPair::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4], 10e9).unwrap();
        let cfg = quiet();
        assert_eq!(adc_capture(p.clone(), &cfg).unwrap(), p);
        let mut c2 = quiet();
        c2.adc_rate = 5e9;
        let d = adc_capture(p.clone(), &c2).unwrap();
        assert_eq!(d.i_v, vec![1.0, 3.0]);
        c2.adc_rate = 3e9;
        assert!(adc_capture(p, &c2).is_err());
    }

    #[test]
    fn eight_bit_sqnr() {
        let n = 100_000;
        let x: Vec<f64> = (0..n)
            .map(|k| (TAU * 0.01234567 * k as f64).sin())
            .collect();
        let p = RealSeriesPair::new(x.clone(), x.clone(), 10e9).unwrap();
        let mut cfg = quiet();
        cfg.adc_bits = Some(8);
        let q = adc_capture(p, &cfg).unwrap();
        let sig: f64 = x.iter().map(|v| v * v).sum();
        let err: f64 = x.iter().zip(&q.i_v).map(|(a, b)| (a - b).powi(2)).sum();
        let sqnr = 10.0 * (sig / err).log10();
        assert!((sqnr - (6.02 * 8.0 + 1.76)).abs() < 1.0, "{sqnr}");
    }

    proptest! {
        #[test]
        fn detection_is_linear(a in -5.0f64..5.0, seed in 0u64..100) {
            let f = tone_field(256, 0.3e9, seed as f64 * 0.1, 1.0);
            let mut cfg = quiet();
            cfg.bpd_bandwidth = Some(1.6e9);
            cfg.lo_linewidth = 1e5;
            let base = heterodyne_detect(&f, &cfg, UNIT, seed).unwrap();
            let mut scaled = f.clone();
            scaled.v.iter_mut().for_each(|z| *z *= a);
            let out = heterodyne_detect(&scaled, &cfg, UNIT, seed).unwrap();
            for (x, y) in base.i_v.iter().zip(&out.i_v) {
                prop_assert!((a * x - y).abs() < 1e-9);
            }
        }
    }
}
