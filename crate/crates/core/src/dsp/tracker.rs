//! Pilot-driven inverse-Jones polarization tracker.

use super::bandsplit::DemodBand;
use super::unwrap::unwrap;
use crate::error::{Error, Result};
use crate::jones::JonesMatrix;
use crate::series::{moving_average_c, moving_average_r};
use num_complex::Complex64;

/// Smoothed pilot power below this fraction of the median is a dropout.
pub const DROPOUT_FRACTION: f64 = 1e-3;

/// Per-sample tracker output at the band rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PolEstimate {
    /// Splitting angle estimate, rad.
    pub alpha: Vec<f64>,
    /// Phase-sum estimate `−(φ1 + φ2)`, rad, unwrapped.
    pub dphi: Vec<f64>,
    pub window: usize,
}

impl PolEstimate {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Inverse Jones matrix at sample `i`.
    pub fn j_inv(&self, i: usize) -> JonesMatrix {
        build_inverse_jones(self.alpha[i], self.dphi[i])
    }
}

/// `[cos α e^{jΔ/2}, sin α e^{−jΔ/2}; −sin α e^{jΔ/2}, cos α e^{−jΔ/2}]`.
/// With `Δ = −(φ1 + φ2)` this yields `J⁻¹·J = diag(e^{jφ}, e^{−jφ})`,
/// `φ = (φ1 − φ2)/2`.
pub fn build_inverse_jones(alpha: f64, dphi: f64) -> JonesMatrix {
    let (s, c) = alpha.sin_cos();
    let e = Complex64::from_polar(1.0, dphi / 2.0);
    let ec = e.conj();
    JonesMatrix {
        m_vv: e * c,
        m_vh: ec * s,
        m_hv: -e * s,
        m_hh: ec * c,
    }
}

fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut s = x.to_vec();
    let mid = s.len() / 2;
    *s.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1
}

/// Returns `(first, count)` of samples whose power is below the dropout
/// threshold, if any.
pub(crate) fn find_dropouts(power: &[f64]) -> Option<(usize, usize)> {
    let thr = DROPOUT_FRACTION * median(power);
    let mut first = None;
    let mut count = 0;
    for (i, &p) in power.iter().enumerate() {
        if !(p > thr) {
            first.get_or_insert(i);
            count += 1;
        }
    }
    first.map(|f| (f, count))
}

/// Estimates (α, Δφ) per sample from the demodulated PT2 band.
pub fn estimate_polarization(pt2: &DemodBand, window: usize) -> Result<PolEstimate> {
    if pt2.is_empty() {
        return Err(Error::Config("empty PT2 band".into()));
    }
    if window == 0 {
        return Err(Error::Config("tracker window must be ≥ 1".into()));
    }
    let (ev, eh) = (&pt2.fields.v, &pt2.fields.h);
    let s_raw: Vec<Complex64> = ev.iter().zip(eh).map(|(v, h)| -v * h.conj()).collect();
    let ph_raw: Vec<f64> = eh.iter().map(|h| h.norm_sqr()).collect();
    let s = moving_average_c(&s_raw, window);
    drop(s_raw);
    let ph = moving_average_r(&ph_raw, window);
    drop(ph_raw);
    let pv = moving_average_r(&ev.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>(), window);
    let total: Vec<f64> = ph.iter().zip(&pv).map(|(a, b)| a + b).collect();
    if let Some((first, count)) = find_dropouts(&total) {
        return Err(Error::TrackerDropout { first, count });
    }
    drop(total);
    let sum_phase = unwrap(&s.iter().map(|z| z.arg()).collect::<Vec<_>>());
    // Double-angle form of atan2(Re{s·e^{−jΣ}}, |E^H|²): identical without
    // noise, and the equal noise floors of both polarizations cancel in
    // |E^H|² − |E^V|² instead of biasing α toward π/4 near the poles.
    let alpha_raw: Vec<f64> = s
        .iter()
        .zip(&sum_phase)
        .zip(ph.iter().zip(&pv))
        .map(|((z, &sig), (&h, &v))| {
            let c = (z * Complex64::from_polar(1.0, -sig)).re;
            0.5 * (2.0 * c).atan2(h - v)
        })
        .collect();
    Ok(PolEstimate {
        alpha: unwrap(&alpha_raw),
        dphi: sum_phase.into_iter().map(|x| -x).collect(),
        window,
    })
}

/// Applies the per-sample inverse Jones matrix to all three bands.
pub fn apply_demux(est: &PolEstimate, bands: &mut [&mut DemodBand]) -> Result<()> {
    for b in bands.iter() {
        if b.len() != est.len() {
            return Err(Error::Alignment(format!(
                "band has {} samples, estimate has {}",
                b.len(),
                est.len()
            )));
        }
    }
    for i in 0..est.len() {
        let j = est.j_inv(i);
        for b in bands.iter_mut() {
            let (v, h) = j.apply(b.fields.v[i], b.fields.h[i]);
            b.fields.v[i] = v;
            b.fields.h[i] = h;
        }
    }
    Ok(())
}
