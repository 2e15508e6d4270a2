//! Receiver chain: band split, x/p demodulation, polarization tracking,
//! phase compensation, matched filtering and LMS equalization.

pub mod bandsplit;
pub mod demod;
pub mod freq;
pub mod lms;
pub mod matched;
pub mod phase;
pub mod tracker;
pub mod unwrap;

pub use bandsplit::{bandsplit, DemodBand, SplitBands, SplitOptions};
pub use demod::demodulate_xp;
pub use freq::{estimate_tone_freq, estimate_tone_freq_or_midpoint};
pub use lms::{lms_equalize, train_and_apply, LmsConfig, LmsOutcome, RealMimoFir};
pub use matched::{matched_filter_downsample, matched_filter_fixed, MatchedResponse, SymbolSync};
pub use phase::compensate_phase;
pub use tracker::{apply_demux, build_inverse_jones, estimate_polarization, PolEstimate};
pub use unwrap::{unwrap, wrap};

use crate::error::Result;
use crate::fft;
use crate::frontend::{bpd_response, FrontendConfig};
use crate::series::RealSeriesPair;
use crate::txgen::{PulseShape, TxConfig};
use num_complex::Complex64;

/// Band-split settings shared by measurement and calibration frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverChain {
    pub tx: TxConfig,
    pub split: SplitOptions,
}

impl ReceiverChain {
    pub fn new(tx: &TxConfig, deembed_bpd: Option<f64>) -> Self {
        ReceiverChain {
            tx: tx.clone(),
            split: SplitOptions {
                deembed_bpd,
                ..SplitOptions::for_config(tx)
            },
        }
    }

    /// Quantum-band symbols of a noise-only capture at the nominal band
    /// center and zero timing offset.
    pub fn quantum_noise_symbols(
        &self,
        pair: &RealSeriesPair,
    ) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let bands = bandsplit(pair, &self.tx, &self.split)?;
        let q = demodulate_xp(bands.q, self.tx.f_q)?;
        let s = matched_filter_fixed(&q, &self.tx, 0.0)?;
        Ok((s.v, s.h))
    }

    /// Per-quadrature symbol variance produced by unit-variance white
    /// detector noise, including any residual detector response.
    pub fn noise_gain_per_quadrature(&self, fe: &FrontendConfig) -> Result<f64> {
        let cfg = &self.tx;
        let n = cfg.n_samples();
        let m = n / cfg.sps() * 2;
        let rate = self.split.out_rate;
        let resp = MatchedResponse::new(cfg, m, rate / 2.0, rate)?;
        let p = PulseShape::from_config(cfg).spectrum(n);
        let plan = cfg.band_plan();
        let half = plan.q.width() / 2.0;
        let mut s = 0.0;
        for k in 0..m {
            let f = fft::bin_freq(k, m, rate);
            if f.abs() > half || resp.h[k] == 0.0 {
                continue;
            }
            let f_if = cfg.f_q + f;
            let mut b = 1.0;
            if let Some(fc) = fe.bpd_bandwidth {
                b *= bpd_response(f_if, fc).norm_sqr();
            }
            if let Some(fc) = self.split.deembed_bpd {
                b /= bpd_response(f_if, fc).norm_sqr();
            }
            let idx = (f / rate * m as f64).round() as isize;
            let pv = p[idx.rem_euclid(n as isize) as usize];
            s += pv * pv * b;
        }
        s /= n as f64;
        let g = resp.in_band_energy;
        Ok(2.0 * s / (g * g))
    }
}
