//! Tone frequency estimation from the dual-polarization periodogram.

use super::bandsplit::DemodBand;
use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex};

/// Minimum peak-to-median ratio of the periodogram (6 dB).
const PEAK_OVER_MEDIAN: f64 = 3.981_071_705_534_972;
/// A competing peak within this ratio of the strongest (1 dB) is ambiguous.
const AMBIGUITY_RATIO: f64 = 0.794_328_234_724_281_4;
/// Half-width, in bins, of the main lobe excluded from the ambiguity search.
const LOBE_BINS: usize = 3;

fn hann(m: usize) -> Arc<Vec<f64>> {
    static CACHE: Mutex<Option<(usize, Arc<Vec<f64>>)>> = Mutex::new(None);
    let mut c = CACHE.lock().unwrap_or_else(|e| e.into_inner());
    if let Some((len, w)) = c.as_ref() {
        if *len == m {
            return w.clone();
        }
    }
    let w: Arc<Vec<f64>> = Arc::new(
        (0..m)
            .map(|n| 0.5 - 0.5 * (TAU * n as f64 / m as f64).cos())
            .collect(),
    );
    *c = Some((m, w.clone()));
    w
}

/// Power of the windowed DTFT summed over polarizations, with its first
/// two derivatives in the angular frequency `w` (rad/sample).
fn dtft_power(ys: &[Vec<Complex64>], w: f64) -> (f64, f64, f64) {
    let mut p = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for y in ys {
        let m = y.len();
        let c = m as f64 / 2.0;
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        let step = Complex64::from_polar(1.0, -w);
        let mut ph = Complex64::new(0.0, 0.0);
        for (n, &v) in y.iter().enumerate() {
            if n % 1024 == 0 {
                ph = Complex64::from_polar(1.0, -w * (n as f64 - c));
            }
            let t = n as f64 - c;
            let a = v * ph;
            s0 += a;
            s1 += a * t;
            s2 += a * (t * t);
            ph *= step;
        }
        // X = s0, X' = −j s1, X'' = −s2.
        let x1 = Complex64::new(0.0, -1.0) * s1;
        p += s0.norm_sqr();
        d1 += 2.0 * (s0.conj() * x1).re;
        d2 += 2.0 * (x1.norm_sqr() - (s0.conj() * s2).re);
    }
    (p, d1, d2)
}

/// Estimates the frequency of the dominant tone in `band`, in the detected
/// IF frame. Uses a Hann-windowed periodogram summed over polarizations,
/// three-point log-parabolic interpolation and Newton refinement of the
/// continuous periodogram peak.
pub fn estimate_tone_freq(band: &DemodBand) -> Result<f64> {
    let m = band.len();
    if m < 8 {
        return Err(Error::FrequencyEstimation(format!(
            "band too short ({m} samples)"
        )));
    }
    let rate = band.rate();
    let w = hann(m);
    let ys: Vec<Vec<Complex64>> = [&band.fields.v, &band.fields.h]
        .into_iter()
        .map(|x| x.iter().zip(w.iter()).map(|(z, &a)| z * a).collect())
        .collect();
    let mut p = vec![0.0f64; m];
    for y in &ys {
        let mut s = y.clone();
        fft::forward(&mut s);
        for (acc, z) in p.iter_mut().zip(&s) {
            *acc += z.norm_sqr();
        }
    }
    let (k0, &pk) = p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let mut sorted = p.clone();
    let mid = m / 2;
    let (_, &mut median, _) = sorted.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    if !(pk > 0.0) || pk < PEAK_OVER_MEDIAN * median {
        return Err(Error::FrequencyEstimation(
            "no spectral peak 6 dB above the median".into(),
        ));
    }
    let signed = |k: usize| -> f64 { fft::bin_freq(k, m, rate) };
    // Strongest local maximum outside the main lobe.
    let dist = |a: usize, b: usize| -> usize {
        let d = a.abs_diff(b);
        d.min(m - d)
    };
    let mut second: Option<(usize, f64)> = None;
    for k in 0..m {
        if dist(k, k0) <= LOBE_BINS {
            continue;
        }
        let l = p[(k + m - 1) % m];
        let r = p[(k + 1) % m];
        if p[k] >= l && p[k] >= r && second.is_none_or(|(_, v)| p[k] > v) {
            second = Some((k, p[k]));
        }
    }
    if let Some((k2, v2)) = second {
        if v2 >= AMBIGUITY_RATIO * pk {
            return Err(Error::AmbiguousTone(vec![
                band.f_ref + signed(k0),
                band.f_ref + signed(k2),
            ]));
        }
    }
    let l = p[(k0 + m - 1) % m].max(f64::MIN_POSITIVE).ln();
    let c = pk.ln();
    let r = p[(k0 + 1) % m].max(f64::MIN_POSITIVE).ln();
    let den = l - 2.0 * c + r;
    let mut delta = if den < 0.0 { 0.5 * (l - r) / den } else { 0.0 };
    delta = delta.clamp(-0.5, 0.5);
    let bin_w = TAU / m as f64;
    let w0 = (signed(k0) / rate * m as f64 + delta) * bin_w;
    let mut wk = w0;
    for _ in 0..6 {
        let (_, d1, d2) = dtft_power(&ys, wk);
        if !(d2 < 0.0) {
            break;
        }
        let step = (-d1 / d2).clamp(-0.5 * bin_w, 0.5 * bin_w);
        wk += step;
        if step.abs() < 1e-4 * bin_w {
            break;
        }
    }
    if (wk - w0).abs() > bin_w {
        wk = w0;
    }
    Ok(band.f_ref + wk / TAU * rate)
}

/// Like [`estimate_tone_freq`], but resolves a two-peak ambiguity to the
/// midpoint of the candidates (symmetric modulation sidebands).
pub fn estimate_tone_freq_or_midpoint(band: &DemodBand) -> Result<f64> {
    match estimate_tone_freq(band) {
        Err(Error::AmbiguousTone(c)) if c.len() == 2 => Ok(0.5 * (c[0] + c[1])),
        r => r,
    }
}
