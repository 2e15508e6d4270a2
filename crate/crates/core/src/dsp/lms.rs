//! Data-aided real-valued MIMO FIR equalizer trained by LMS.

use crate::error::{Error, Result};
use crate::txgen::SymbolFrame;
use num_complex::Complex64;

/// Weight norm beyond which training is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmsConfig {
    pub taps: usize,
    pub mu: f64,
    /// The training target is `reference_gain · tx`.
    pub reference_gain: Complex64,
    /// Rescale trained weights to unit white-noise power gain.
    pub unit_noise_gain: bool,
}

impl Default for LmsConfig {
    fn default() -> Self {
        LmsConfig {
            taps: 11,
            mu: 1e-5,
            reference_gain: Complex64::new(1.0, 0.0),
            unit_noise_gain: false,
        }
    }
}

/// Real FIR with `n_in` real inputs and two real outputs (I, Q).
/// Weights are indexed `[output][input][tap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMimoFir {
    pub n_in: usize,
    pub taps: usize,
    pub w: Vec<f64>,
}

impl RealMimoFir {
    /// Center-tap pass-through of input pair (`2p`, `2p+1`) to (I, Q).
    pub fn center_identity(n_in: usize, taps: usize, pair: usize) -> Self {
        let mut f = RealMimoFir {
            n_in,
            taps,
            w: vec![0.0; 2 * n_in * taps],
        };
        let c = taps / 2;
        let i0 = f.idx(0, 2 * pair, c);
        let i1 = f.idx(1, 2 * pair + 1, c);
        f.w[i0] = 1.0;
        f.w[i1] = 1.0;
        f
    }

    #[inline]
    pub fn idx(&self, out: usize, input: usize, tap: usize) -> usize {
        (out * self.n_in + input) * self.taps + tap
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Mean white-noise power gain of the two outputs.
    pub fn noise_gain(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum::<f64>() / 2.0
    }
}

/// Real input streams interleaved per symbol: `[I_0, Q_0, I_1, Q_1, …]`.
fn real_inputs(inputs: &[&[Complex64]]) -> (Vec<f64>, usize) {
    let n = inputs[0].len();
    let k = inputs.len() * 2;
    let mut x = Vec::with_capacity(n * k);
    for i in 0..n {
        for s in inputs {
            x.push(s[i].re);
            x.push(s[i].im);
        }
    }
    (x, k)
}

#[inline]
fn filter_at(f: &RealMimoFir, x: &[f64], n: usize, len: usize) -> (f64, f64) {
    let c = f.taps / 2;
    let k = f.n_in;
    let mut yi = 0.0;
    let mut yq = 0.0;
    for t in 0..f.taps {
        let pos = n as isize + t as isize - c as isize;
        if pos < 0 || pos >= len as isize {
            continue;
        }
        let base = pos as usize * k;
        for inp in 0..k {
            let xv = x[base + inp];
            yi += f.w[f.idx(0, inp, t)] * xv;
            yq += f.w[f.idx(1, inp, t)] * xv;
        }
    }
    (yi, yq)
}

/// Result of training plus frozen-weight filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsOutcome {
    /// Frozen-weight output for every symbol.
    pub output: Vec<Complex64>,
    pub weights: RealMimoFir,
    /// A-priori squared error per training symbol.
    pub train_error: Vec<f64>,
}

/// Trains `init` on the leading training symbols of `frame` and applies
/// the frozen weights to the whole sequence.
pub fn train_and_apply(
    inputs: &[&[Complex64]],
    frame: &SymbolFrame,
    cfg: &LmsConfig,
    mut init: RealMimoFir,
) -> Result<LmsOutcome> {
    if cfg.taps.is_multiple_of(2) || cfg.taps == 0 {
        return Err(Error::Config(format!(
            "LMS taps must be odd, got {}",
            cfg.taps
        )));
    }
    if !(cfg.mu > 0.0 && cfg.mu.is_finite()) {
        return Err(Error::Config(format!(
            "LMS step {} must be positive",
            cfg.mu
        )));
    }
    if inputs.is_empty() || inputs.iter().any(|s| s.len() != frame.len()) {
        return Err(Error::Alignment(
            "equalizer inputs and frame differ in length".into(),
        ));
    }
    let (x, k) = real_inputs(inputs);
    if init.n_in != k || init.taps != cfg.taps {
        return Err(Error::Config(
            "initial weights do not match the equalizer shape".into(),
        ));
    }
    let len = frame.len();
    let n_train = frame.n_train();
    let c = cfg.taps / 2;
    let mut train_error = Vec::with_capacity(n_train);
    for n in 0..n_train {
        let (yi, yq) = filter_at(&init, &x, n, len);
        let d = cfg.reference_gain * frame.symbols[n];
        let (ei, eq) = (d.re - yi, d.im - yq);
        train_error.push(ei * ei + eq * eq);
        for t in 0..cfg.taps {
            let pos = n as isize + t as isize - c as isize;
            if pos < 0 || pos >= len as isize {
                continue;
            }
            let base = pos as usize * k;
            for inp in 0..k {
                let xv = x[base + inp];
                let a = init.idx(0, inp, t);
                let b = init.idx(1, inp, t);
                init.w[a] += cfg.mu * ei * xv;
                init.w[b] += cfg.mu * eq * xv;
            }
        }
        if n % 1024 == 1023 || n + 1 == n_train {
            let norm = init.norm();
            if !(norm <= DIVERGENCE_NORM) {
                return Err(Error::Divergence { norm });
            }
        }
    }
    if cfg.unit_noise_gain {
        let g = init.noise_gain();
        if !(g > 0.0) {
            return Err(Error::Divergence { norm: 0.0 });
        }
        let s = 1.0 / g.sqrt();
        init.w.iter_mut().for_each(|w| *w *= s);
    }
    let output = (0..len)
        .map(|n| {
            let (yi, yq) = filter_at(&init, &x, n, len);
            Complex64::new(yi, yq)
        })
        .collect();
    Ok(LmsOutcome {
        output,
        weights: init,
        train_error,
    })
}

/// 2×2 real MIMO equalizer on the I/Q of one complex symbol stream.
pub fn lms_equalize(
    rx_syms: &[Complex64],
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
        &[rx_syms],
        frame,
        cfg,
        RealMimoFir::center_identity(2, cfg.taps, 0),
    )
}
