//! Pilot-referenced carrier phase compensation.

use super::bandsplit::DemodBand;
use super::tracker::find_dropouts;
use crate::error::{Error, Result};
use crate::series::moving_average_c;
use num_complex::Complex64;

/// Unit-modulus phase reference from a pilot stream smoothed over
/// `window` samples. With `hold`, samples below the dropout floor reuse
/// the last valid reference instead of failing.
pub fn phase_reference(pilot: &[Complex64], window: usize, hold: bool) -> Result<Vec<Complex64>> {
    if window == 0 {
        return Err(Error::Config("phase window must be ≥ 1".into()));
    }
    let u = moving_average_c(pilot, window);
    let power: Vec<f64> = u.iter().map(|z| z.norm_sqr()).collect();
    let drop = find_dropouts(&power);
    if let Some((first, count)) = drop {
        if !hold || count == u.len() {
            return Err(Error::CompensationDropout { first, count });
        }
    }
    let thr = if drop.is_some() {
        let mut s = power.clone();
        let mid = s.len() / 2;
        super::tracker::DROPOUT_FRACTION * *s.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1
    } else {
        0.0
    };
    let mut last = u
        .iter()
        .zip(&power)
        .find(|(_, &p)| p > thr)
        .map(|(z, _)| z / z.norm())
        .unwrap_or(Complex64::new(1.0, 0.0));
    Ok(u.iter()
        .zip(&power)
        .map(|(z, &p)| {
            if p > thr {
                last = z / p.sqrt();
            }
            last
        })
        .collect())
}

/// Removes the common phase noise and the residual polarization phase by
/// referencing the quantum band to the demultiplexed PT1 V output.
pub fn compensate_phase(q: &DemodBand, pt1: &DemodBand, window: usize) -> Result<DemodBand> {
    if q.len() != pt1.len() {
        return Err(Error::Alignment(format!(
            "quantum band has {} samples, PT1 has {}",
            q.len(),
            pt1.len()
        )));
    }
    let u = phase_reference(&pt1.fields.v, window, false)?;
    Ok(rotate_by_reference(q.clone(), &u))
}

/// Smooths both polarizations of a pilot band. Applied before the
/// demultiplexer, so per-sample inverse Jones swings that q and the pilot
/// share stay out of the average.
pub fn smooth_pilot(mut pilot: DemodBand, window: usize) -> Result<DemodBand> {
    if window == 0 {
        return Err(Error::Config("phase window must be ≥ 1".into()));
    }
    pilot.fields.v = moving_average_c(&pilot.fields.v, window);
    pilot.fields.h = moving_average_c(&pilot.fields.h, window);
    Ok(pilot)
}

/// Multiplies both polarizations by `conj(u)`.
pub fn rotate_by_reference(mut q: DemodBand, u: &[Complex64]) -> DemodBand {
    for ((v, h), r) in q.fields.v.iter_mut().zip(q.fields.h.iter_mut()).zip(u) {
        let c = r.conj();
        *v *= c;
        *h *= c;
    }
    q
}
