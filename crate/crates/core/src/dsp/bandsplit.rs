//! Frequency-domain band separation into decimated complex baseband.

use crate::error::{Error, Result};
use crate::fft;
use crate::frontend::bpd_response;
use crate::series::{DualPolSeries, RealSeriesPair};
use crate::txgen::{BandInterval, TxConfig};
use num_complex::Complex64;

/// One demodulated frequency band, both polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodBand {
    /// Complex baseband fields at the band output rate.
    pub fields: DualPolSeries,
    /// Frequency (in the detected IF) that maps to 0 Hz in `fields`.
    pub f_ref: f64,
    /// Estimated band center or tone frequency in the detected IF.
    pub f_hat: f64,
    /// Normalization applied to `fields` so far.
    pub gain: Complex64,
    /// Occupied interval in the detected IF.
    pub interval: BandInterval,
}

impl DemodBand {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn rate(&self) -> f64 {
        self.fields.sample_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitBands {
    pub q: DemodBand,
    pub pt1: DemodBand,
    pub pt2: DemodBand,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitOptions {
    /// Output sample rate of every band.
    pub out_rate: f64,
    /// Detector 3-dB bandwidth to equalize inside the bands.
    pub deembed_bpd: Option<f64>,
}

impl SplitOptions {
    /// Two samples per symbol, no detector equalization.
    pub fn for_config(cfg: &TxConfig) -> Self {
        SplitOptions {
            out_rate: 2.0 * cfg.symbol_rate,
            deembed_bpd: None,
        }
    }
}

fn bin_range(b: &BandInterval, n: usize, fs: f64) -> (usize, usize) {
    let lo = (b.lo * n as f64 / fs).ceil().max(1.0) as usize;
    let hi = ((b.hi * n as f64 / fs).floor() as usize).min(n / 2);
    (lo, hi)
}

fn extract(
    spec: &[Complex64],
    n: usize,
    fs: f64,
    band: &BandInterval,
    k_ref: usize,
    m: usize,
) -> Vec<Complex64> {
    let (lo, hi) = bin_range(band, n, fs);
    let mut y = vec![Complex64::new(0.0, 0.0); m];
    // Analytic-signal factor 2, decimation factor m/n.
    let k = 2.0 * m as f64 / n as f64;
    for (b, &z) in spec.iter().enumerate().take(hi + 1).skip(lo) {
        let idx = (b as isize - k_ref as isize).rem_euclid(m as isize) as usize;
        y[idx] = z * k;
    }
    fft::inverse(&mut y);
    let inv = 1.0 / m as f64;
    y.iter_mut().for_each(|z| *z *= inv);
    y
}

/// Splits both detector outputs into the quantum, PT1 and PT2 bands.
/// Each band is shifted by its nominal center rounded to the FFT grid and
/// returned at `opts.out_rate`.
pub fn bandsplit(pair: &RealSeriesPair, cfg: &TxConfig, opts: &SplitOptions) -> Result<SplitBands> {
    let plan = cfg.band_plan();
    plan.check()?;
    let n = pair.len();
    let fs = pair.sample_rate;
    if n == 0 {
        return Err(Error::Config("empty detector output".into()));
    }
    if (fs - plan.sample_rate).abs() > 1e-6 * fs {
        return Err(Error::Config(format!(
            "capture rate {fs} differs from planned rate {}",
            plan.sample_rate
        )));
    }
    let ratio = fs / opts.out_rate;
    let r = ratio.round() as usize;
    if r == 0 || (ratio - r as f64).abs() > 1e-9 * ratio || !n.is_multiple_of(r) {
        return Err(Error::Config(format!(
            "band rate {} must divide the capture rate {fs} and length {n}",
            opts.out_rate
        )));
    }
    let m = n / r;
    for (name, b) in [("q", plan.q), ("pt1", plan.pt1), ("pt2", plan.pt2)] {
        if b.width() >= opts.out_rate {
            return Err(Error::Config(format!(
                "{name} band width {} exceeds band rate {}",
                b.width(),
                opts.out_rate
            )));
        }
    }
    let bands = [
        (plan.q, cfg.f_q),
        (plan.pt1, cfg.f_pt1),
        (plan.pt2, cfg.f_pt2),
    ];
    let refs: Vec<usize> = bands
        .iter()
        .map(|(_, f)| (f * n as f64 / fs).round() as usize)
        .collect();
    let mut out: Vec<[Vec<Complex64>; 2]> = vec![
        [Vec::new(), Vec::new()],
        [Vec::new(), Vec::new()],
        [Vec::new(), Vec::new()],
    ];
    for (pol, x) in [&pair.i_v, &pair.i_h].into_iter().enumerate() {
        let mut scratch = x.clone();
        let mut spec = fft::real_forward(&mut scratch);
        drop(scratch);
        if let Some(fc) = opts.deembed_bpd {
            for (b, _) in &bands {
                let (lo, hi) = bin_range(b, n, fs);
                for (k, z) in spec.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    *z /= bpd_response(k as f64 * fs / n as f64, fc);
                }
            }
        }
        for (i, (b, _)) in bands.iter().enumerate() {
            out[i][pol] = extract(&spec, n, fs, b, refs[i], m);
        }
    }
    let rate = fs / r as f64;
    let mut it = out.into_iter().zip(bands.iter().zip(refs.iter()));
    let mut make = || -> Result<DemodBand> {
        let ([v, h], ((interval, _), &k_ref)) = it.next().expect("three bands");
        let f_ref = k_ref as f64 * fs / n as f64;
        Ok(DemodBand {
            fields: DualPolSeries::new(v, h, rate)?,
            f_ref,
            f_hat: f_ref,
            gain: Complex64::new(1.0, 0.0),
            interval: *interval,
        })
    };
    let q = make()?;
    let pt1 = make()?;
    let pt2 = make()?;
    Ok(SplitBands { q, pt1, pt2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::energy;
    use std::f64::consts::TAU;

    fn cfg(n_symbols: usize) -> TxConfig {
        TxConfig {
            n_symbols,
            ..TxConfig::default()
        }
    }

    fn real_tone(n: usize, f: f64, fs: f64) -> Vec<f64> {
        (0..n).map(|k| (TAU * f * k as f64 / fs).cos()).collect()
    }

    #[test]
    fn pt2_tone_isolated() {
        let c = cfg(10_000);
        let n = c.n_samples();
        let x = real_tone(n, 1.75e9, 10e9);
        let pair = RealSeriesPair::new(x.clone(), x, 10e9).unwrap();
        let b = bandsplit(&pair, &c, &SplitOptions::for_config(&c)).unwrap();
        let e2 = energy(&b.pt2.fields.v);
        let eq = energy(&b.q.fields.v);
        let e1 = energy(&b.pt1.fields.v);
        assert!(eq == 0.0 || 10.0 * (eq / e2).log10() < -200.0);
        assert!(e1 == 0.0 || 10.0 * (e1 / e2).log10() < -200.0);
        // Analytic tone of unit amplitude at 0 Hz after the reference shift.
        for z in b.pt2.fields.v.iter().take(50) {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
        assert_eq!(b.pt2.f_ref, 1.75e9);
        assert_eq!(b.q.len(), n / 5);
    }

    #[test]
    fn zero_input_zero_bands() {
        let c = cfg(1000);
        let n = c.n_samples();
        let pair = RealSeriesPair::new(vec![0.0; n], vec![0.0; n], 10e9).unwrap();
        let b = bandsplit(&pair, &c, &SplitOptions::for_config(&c)).unwrap();
        for band in [&b.q, &b.pt1, &b.pt2] {
            assert_eq!(band.fields.energy(), 0.0);
        }
    }

    #[test]
    fn overlapping_plan_rejected() {
        let mut c = cfg(1000);
        c.guard_band = -0.2e9;
        let n = c.n_samples();
        let pair = RealSeriesPair::new(vec![0.0; n], vec![0.0; n], 10e9).unwrap();
        assert!(bandsplit(&pair, &c, &SplitOptions::for_config(&c)).is_err());
    }

    #[test]
    fn bpd_deembedding_restores_tone() {
        let c = cfg(2000);
        let n = c.n_samples();
        let fc = 1.6e9;
        let x = real_tone(n, 1.75e9, 10e9);
        let mut spec = crate::fft::real_forward(&mut x.clone());
        for (k, z) in spec.iter_mut().enumerate() {
            *z *= bpd_response(k as f64 * 10e9 / n as f64, fc);
        }
        let y: Vec<f64> = crate::fft::real_inverse(&mut spec, n)
            .iter()
            .map(|v| v / n as f64)
            .collect();
        let pair = RealSeriesPair::new(y.clone(), y, 10e9).unwrap();
        let opts = SplitOptions {
            deembed_bpd: Some(fc),
            ..SplitOptions::for_config(&c)
        };
        let b = bandsplit(&pair, &c, &opts).unwrap();
        assert!((b.pt2.fields.v[7] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }
}
