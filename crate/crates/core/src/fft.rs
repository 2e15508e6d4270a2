//! Cached FFT plans shared by all stages.

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::{Arc, Mutex, OnceLock};

fn complex_planner() -> &'static Mutex<FftPlanner<f64>> {
    static P: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    P.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn real_planner() -> &'static Mutex<RealFftPlanner<f64>> {
    static P: OnceLock<Mutex<RealFftPlanner<f64>>> = OnceLock::new();
    P.get_or_init(|| Mutex::new(RealFftPlanner::new()))
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = complex_planner().lock().unwrap_or_else(|e| e.into_inner());
    if inverse {
        p.plan_fft_inverse(n)
    } else {
        p.plan_fft_forward(n)
    }
}

thread_local! {
    /// Per-thread FFT scratch, reused so large transforms do not fault in
    /// fresh pages on every call.
    static SCRATCH: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

fn with_scratch<R>(len: usize, f: impl FnOnce(&mut [Complex64]) -> R) -> R {
    SCRATCH.with(|s| {
        let mut s = s.borrow_mut();
        if s.len() < len {
            s.resize(len, Complex64::new(0.0, 0.0));
        }
        f(&mut s[..len])
    })
}

fn run(buf: &mut [Complex64], inverse: bool) {
    if buf.len() > 1 {
        let p = plan(buf.len(), inverse);
        with_scratch(p.get_inplace_scratch_len(), |s| {
            p.process_with_scratch(buf, s)
        });
    }
}

/// In-place forward DFT, `X[k] = Σ x[n] e^{-j2πkn/N}`.
pub fn forward(buf: &mut [Complex64]) {
    run(buf, false);
}

/// In-place unnormalized inverse DFT.
pub fn inverse(buf: &mut [Complex64]) {
    run(buf, true);
}

/// Forward DFT of a real signal; returns the `n/2 + 1` non-negative bins.
/// The input buffer is used as scratch.
pub fn real_forward(input: &mut [f64]) -> Vec<Complex64> {
    let n = input.len();
    let r2c: Arc<dyn RealToComplex<f64>> = real_planner()
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .plan_fft_forward(n);
    let mut out = r2c.make_output_vec();
    with_scratch(r2c.get_scratch_len(), |s| {
        r2c.process_with_scratch(input, &mut out, s)
    })
    .expect("buffer sizes come from the plan");
    out
}

/// Unnormalized inverse of [`real_forward`] for a length-`n` real signal.
/// Imaginary parts of the DC and Nyquist bins are discarded.
pub fn real_inverse(spec: &mut [Complex64], n: usize) -> Vec<f64> {
    let c2r: Arc<dyn ComplexToReal<f64>> = real_planner()
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .plan_fft_inverse(n);
    assert_eq!(spec.len(), n / 2 + 1, "spectrum length");
    spec[0].im = 0.0;
    if n.is_multiple_of(2) {
        spec[n / 2].im = 0.0;
    }
    let mut out = c2r.make_output_vec();
    with_scratch(c2r.get_scratch_len(), |s| {
        c2r.process_with_scratch(spec, &mut out, s)
    })
    .expect("buffer sizes come from the plan");
    out
}

/// Signed frequency of bin `k` in an `n`-point transform at rate `fs`.
pub fn bin_freq(k: usize, n: usize, fs: f64) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    if k < n_f / 2.0 {
        k * fs / n_f
    } else {
        (k - n_f) * fs / n_f
    }
}
