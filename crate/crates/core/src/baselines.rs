//! Baseline trackers: a pilot-driven 1-tap CMA butterfly and a dual-pol
//! data-aided real FIR used without prior demultiplexing.

use crate::dsp::lms::DIVERGENCE_NORM;
use crate::dsp::phase::{phase_reference, rotate_by_reference};
use crate::dsp::{
    matched_filter_downsample, train_and_apply, DemodBand, LmsConfig, LmsOutcome, RealMimoFir,
    SplitBands, SymbolSync,
};
use crate::error::{Error, Result};
use crate::series::Nco;
use crate::txgen::{SymbolFrame, TxConfig};
use num_complex::Complex64;

/// 1-tap 2×2 complex butterfly, `[y_v; y_h] = W·[x_v; x_h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ButterflyWeights {
    pub w_vv: Complex64,
    pub w_vh: Complex64,
    pub w_hv: Complex64,
    pub w_hh: Complex64,
}

impl ButterflyWeights {
    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        ButterflyWeights {
            w_vv: o,
            w_vh: z,
            w_hv: z,
            w_hh: o,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w_vv.norm_sqr() + self.w_vh.norm_sqr() + self.w_hv.norm_sqr() + self.w_hh.norm_sqr())
            .sqrt()
    }

    #[inline]
    pub fn apply(&self, v: Complex64, h: Complex64) -> (Complex64, Complex64) {
        (self.w_vv * v + self.w_vh * h, self.w_hv * v + self.w_hh * h)
    }

    /// Rows scaled to unit norm, so white noise keeps its power.
    pub fn row_normalized(&self) -> Self {
        let rv = (self.w_vv.norm_sqr() + self.w_vh.norm_sqr()).sqrt();
        let rh = (self.w_hv.norm_sqr() + self.w_hh.norm_sqr()).sqrt();
        let (rv, rh) = (
            if rv > 0.0 { rv } else { 1.0 },
            if rh > 0.0 { rh } else { 1.0 },
        );
        ButterflyWeights {
            w_vv: self.w_vv / rv,
            w_vh: self.w_vh / rv,
            w_hv: self.w_hv / rh,
            w_hh: self.w_hh / rh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmaConfig {
    pub mu: f64,
    /// Samples adapted once before the tracking pass.
    pub warmup: usize,
    /// Frequency offset separating the two pilots in the composite input.
    pub pilot_offset: f64,
    /// Weight-trajectory decimation.
    pub record_stride: usize,
}

impl Default for CmaConfig {
    fn default() -> Self {
        CmaConfig {
            mu: 1e-5,
            warmup: 1 << 18,
            pilot_offset: 250e6,
            record_stride: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaOutcome {
    /// Weights every `stride` samples.
    pub trajectory: Vec<ButterflyWeights>,
    pub stride: usize,
    pub final_weights: ButterflyWeights,
}

fn rms(b: &DemodBand) -> f64 {
    let e: f64 = b
        .fields
        .v
        .iter()
        .chain(&b.fields.h)
        .map(|z| z.norm_sqr())
        .sum();
    (e / b.len().max(1) as f64).sqrt()
}

struct Cma {
    w: ButterflyWeights,
    r: f64,
    mu: f64,
}

impl Cma {
    /// One constant-modulus update; returns the output.
    #[inline]
    fn step(&mut self, xv: Complex64, xh: Complex64) -> (Complex64, Complex64) {
        self.r += 1e-4 * ((xv.norm_sqr() + xh.norm_sqr()) / 2.0 - self.r);
        let (yv, yh) = self.w.apply(xv, xh);
        let ev = yv * (self.r - yv.norm_sqr()) * self.mu;
        let eh = yh * (self.r - yh.norm_sqr()) * self.mu;
        let (cv, ch) = (xv.conj(), xh.conj());
        self.w.w_vv += ev * cv;
        self.w.w_vh += ev * ch;
        self.w.w_hv += eh * cv;
        self.w.w_hh += eh * ch;
        (yv, yh)
    }

    fn check(&self) -> Result<()> {
        let n = self.w.norm();
        if n <= DIVERGENCE_NORM {
            Ok(())
        } else {
            Err(Error::Divergence { norm: n })
        }
    }
}

/// Blind 1-tap CMA demultiplexer. The update is driven by a composite of
/// the two pilots, PT1 shifted up and PT2 shifted down by `pilot_offset`,
/// so that the input has full rank. The row-normalized weights of each
/// sample are applied to all three bands.
pub fn cma_track(bands: &mut SplitBands, cfg: &CmaConfig) -> Result<CmaOutcome> {
    let m = bands.pt2.len();
    if m == 0 {
        return Err(Error::Config("empty PT2 band".into()));
    }
    if bands.pt1.len() != m || bands.q.len() != m {
        return Err(Error::Alignment("CMA bands differ in length".into()));
    }
    if !(cfg.mu > 0.0 && cfg.mu.is_finite()) || cfg.record_stride == 0 {
        return Err(Error::Config(format!("invalid CMA settings {cfg:?}")));
    }
    let (a1, a2) = (rms(&bands.pt1), rms(&bands.pt2));
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(Error::Config("CMA needs nonzero pilots".into()));
    }
    let k = std::f64::consts::FRAC_1_SQRT_2;
    let (g1, g2) = (k / a1, k / a2);
    let rate = bands.pt2.rate();
    let composite = |b: &SplitBands, i: usize, up: Complex64| -> (Complex64, Complex64) {
        let dn = up.conj();
        (
            b.pt1.fields.v[i] * up * g1 + b.pt2.fields.v[i] * dn * g2,
            b.pt1.fields.h[i] * up * g1 + b.pt2.fields.h[i] * dn * g2,
        )
    };
    let mut st = Cma {
        w: ButterflyWeights::identity(),
        r: 0.5,
        mu: cfg.mu,
    };
    let mut nco = Nco::new(cfg.pilot_offset, rate);
    for i in 0..cfg.warmup.min(m) {
        let (xv, xh) = composite(bands, i, nco.next_phasor());
        st.step(xv, xh);
        if i % 1024 == 1023 {
            st.check()?;
        }
    }
    let mut nco = Nco::new(cfg.pilot_offset, rate);
    let mut trajectory = Vec::with_capacity(m / cfg.record_stride + 1);
    for i in 0..m {
        let (xv, xh) = composite(bands, i, nco.next_phasor());
        st.step(xv, xh);
        let w = st.w.row_normalized();
        for b in [&mut bands.q, &mut bands.pt1, &mut bands.pt2] {
            let (v, h) = w.apply(b.fields.v[i], b.fields.h[i]);
            b.fields.v[i] = v;
            b.fields.h[i] = h;
        }
        if i % cfg.record_stride == 0 {
            trajectory.push(st.w);
        }
        if i % 1024 == 1023 {
            st.check()?;
        }
    }
    st.check()?;
    Ok(CmaOutcome {
        trajectory,
        stride: cfg.record_stride,
        final_weights: st.w,
    })
}

/// Front end of the FIR baseline: carrier phase from the raw PT1 V input
/// (held through fades), then matched filtering of both polarizations.
pub fn fir_symbols(
    q: &DemodBand,
    pt1: &DemodBand,
    tx: &TxConfig,
    window: usize,
) -> Result<SymbolSync> {
    if q.len() != pt1.len() {
        return Err(Error::Alignment(
            "quantum and PT1 bands differ in length".into(),
        ));
    }
    let u = phase_reference(&pt1.fields.v, window, true)?;
    let rotated = rotate_by_reference(q.clone(), &u);
    drop(u);
    matched_filter_downsample(&rotated, tx)
}

/// 4-input real MIMO FIR over `[I_V, Q_V, I_H, Q_H]`, center-tap
/// initialized on the V path, trained on the leading training symbols.
pub fn fir_mimo_track(
    v: &[Complex64],
    h: &[Complex64],
    frame: &SymbolFrame,
    cfg: &LmsConfig,
) -> Result<LmsOutcome> {
    if cfg.taps.is_multiple_of(2) || cfg.taps == 0 {
        return Err(Error::Config(format!(
            "LMS taps must be odd, got {}",
            cfg.taps
        )));
    }
    train_and_apply(
        &[v, h],
        frame,
        cfg,
        RealMimoFir::center_identity(4, cfg.taps, 0),
    )
}
