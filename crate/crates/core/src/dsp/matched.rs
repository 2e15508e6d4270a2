//! RRC matched filter with closed-form timing recovery.

use super::bandsplit::DemodBand;
use crate::error::{Error, Result};
use crate::fft;
use crate::txgen::{PulseShape, TxConfig};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Symbol-rate outputs of both polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSync {
    pub v: Vec<Complex64>,
    pub h: Vec<Complex64>,
    /// Applied sampling delay in band samples, in [0, 2).
    pub delay: f64,
}

/// Matched-filter response on the `m`-point band grid, scaled for unit
/// symbol gain. Entries are real (zero-phase pulse).
pub struct MatchedResponse {
    pub h: Vec<f64>,
    /// Pulse energy fraction inside the retained band.
    pub in_band_energy: f64,
}

impl MatchedResponse {
    pub fn new(cfg: &TxConfig, m: usize, cutoff: f64, rate: f64) -> Result<Self> {
        let sps = cfg.sps();
        let n = m * sps / 2;
        if 2 * n != m * sps || (rate - 2.0 * cfg.symbol_rate).abs() > 1e-6 * rate {
            return Err(Error::Config(format!(
                "matched filter needs 2 samples/symbol (band rate {rate}, {m} samples)"
            )));
        }
        let p = PulseShape::from_config(cfg).spectrum(n);
        let mut h = vec![0.0; m];
        let mut g = 0.0;
        for (k, hk) in h.iter_mut().enumerate() {
            let f = fft::bin_freq(k, m, rate);
            if f.abs() > cutoff {
                continue;
            }
            let idx = (f / rate * m as f64).round() as isize;
            let v = p[idx.rem_euclid(n as isize) as usize];
            *hk = v;
            g += v * v;
        }
        g /= n as f64;
        if !(g > 0.0) {
            return Err(Error::Config("matched filter has no in-band energy".into()));
        }
        h.iter_mut().for_each(|x| *x /= g);
        Ok(MatchedResponse {
            h,
            in_band_energy: g,
        })
    }
}

fn filtered_spectrum(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
    let mut z = x.to_vec();
    fft::forward(&mut z);
    for (a, &b) in z.iter_mut().zip(h) {
        *a *= b;
    }
    z
}

/// Decimates a filtered 2-sps spectrum to symbol rate at delay `tau`
/// (band samples) by folding the two spectral halves.
fn decimate(w: &[Complex64], tau: f64) -> Vec<Complex64> {
    let m = w.len();
    let ns = m / 2;
    let mut s = vec![Complex64::new(0.0, 0.0); ns];
    for k in 0..ns {
        // Signed bins: k and k − ns (the upper half).
        let a = w[k] * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * tau / m as f64);
        let b = w[k + ns]
            * Complex64::from_polar(1.0, 2.0 * PI * (k as f64 - ns as f64) * tau / m as f64);
        s[k] = a + b;
    }
    fft::inverse(&mut s);
    let inv = 1.0 / m as f64;
    s.iter_mut().for_each(|z| *z *= inv);
    s
}

/// Timing that maximizes the mean output power. With two samples per
/// symbol the folded spectrum power is `C + 2 Re(e^{jπτ} Σ A_k B_k^*)`, so the
/// optimum is closed form, taken in (−1, 1] samples so that decimation
/// keeps the nearest symbol. Returns `None` for an all-zero input.
fn best_delay(ws: &[&[Complex64]]) -> Result<Option<f64>> {
    let mut cross = Complex64::new(0.0, 0.0);
    let mut c = 0.0;
    for w in ws {
        let ns = w.len() / 2;
        for k in 0..ns {
            cross += w[k] * w[k + ns].conj();
            c += w[k].norm_sqr() + w[k + ns].norm_sqr();
        }
    }
    if c == 0.0 {
        return Ok(None);
    }
    if cross.norm() < 1e-9 * c {
        return Err(Error::Synchronization("timing metric is flat".into()));
    }
    Ok(Some(-cross.arg() / PI))
}

/// Matched filter, timing recovery from the V polarization, decimation to
/// one sample per symbol. Both polarizations use the same timing.
pub fn matched_filter_downsample(q: &DemodBand, cfg: &TxConfig) -> Result<SymbolSync> {
    let m = q.len();
    if !m.is_multiple_of(2) || m == 0 {
        return Err(Error::Config(format!(
            "band length {m} is not 2 samples/symbol"
        )));
    }
    let resp = MatchedResponse::new(cfg, m, q.rate() / 2.0, q.rate())?;
    let wv = filtered_spectrum(&q.fields.v, &resp.h);
    let wh = filtered_spectrum(&q.fields.h, &resp.h);
    let delay = match best_delay(&[&wv])? {
        Some(d) => d,
        None => {
            return Ok(SymbolSync {
                v: vec![Complex64::new(0.0, 0.0); m / 2],
                h: decimate(&wh, 0.0),
                delay: 0.0,
            })
        }
    };
    Ok(SymbolSync {
        v: decimate(&wv, delay),
        h: decimate(&wh, delay),
        delay,
    })
}

/// Matched filter at a fixed delay (noise-only calibration frames).
pub fn matched_filter_fixed(q: &DemodBand, cfg: &TxConfig, delay: f64) -> Result<SymbolSync> {
    let m = q.len();
    let resp = MatchedResponse::new(cfg, m, q.rate() / 2.0, q.rate())?;
    Ok(SymbolSync {
        v: decimate(&filtered_spectrum(&q.fields.v, &resp.h), delay),
        h: decimate(&filtered_spectrum(&q.fields.h, &resp.h), delay),
        delay,
    })
}
