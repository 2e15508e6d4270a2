//! Fine down-conversion and ideal lowpass of a split band.

use super::bandsplit::DemodBand;
use crate::error::{Error, Result};
use crate::fft;
use crate::series::Nco;
use num_complex::Complex64;

/// Mixes `band` so that `f_hat` lands at 0 Hz and keeps only
/// `|f| ≤ width/2` of the band interval. A shift below one frequency bin
/// cannot move content across the band edge, so the lowpass is skipped.
pub fn demodulate_xp(mut band: DemodBand, f_hat: f64) -> Result<DemodBand> {
    if !band.interval.contains(f_hat) {
        return Err(Error::FrequencyEstimation(format!(
            "f_hat {f_hat} Hz outside band [{}, {}]",
            band.interval.lo, band.interval.hi
        )));
    }
    let rate = band.rate();
    let offset = f_hat - band.f_ref;
    let mix = |x: &mut Vec<Complex64>| {
        let mut nco = Nco::new(-offset, rate);
        for z in x.iter_mut() {
            *z *= nco.next_phasor();
        }
    };
    if offset != 0.0 {
        mix(&mut band.fields.v);
        mix(&mut band.fields.h);
    }
    if offset.abs() < rate / band.len() as f64 {
        band.f_ref = f_hat;
        band.f_hat = f_hat;
        return Ok(band);
    }
    let half = band.interval.width() / 2.0;
    for x in [&mut band.fields.v, &mut band.fields.h] {
        lowpass(x, half, rate);
    }
    band.f_ref = f_hat;
    band.f_hat = f_hat;
    Ok(band)
}

/// Ideal lowpass keeping bins with `|f| ≤ cutoff`.
pub fn lowpass(x: &mut [Complex64], cutoff: f64, rate: f64) {
    let m = x.len();
    if m == 0 || cutoff >= rate / 2.0 {
        return;
    }
    fft::forward(x);
    for (k, z) in x.iter_mut().enumerate() {
        if fft::bin_freq(k, m, rate).abs() > cutoff {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    fft::inverse(x);
    let inv = 1.0 / m as f64;
    x.iter_mut().for_each(|z| *z *= inv);
}
