//! Sample containers and small signal helpers.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Paired complex streams for the V and H polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolSeries {
    pub v: Vec<Complex64>,
    pub h: Vec<Complex64>,
    pub sample_rate: f64,
}

impl DualPolSeries {
    pub fn new(v: Vec<Complex64>, h: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if v.len() != h.len() {
            return Err(Error::Alignment(format!(
                "polarization lengths differ: {} vs {}",
                v.len(),
                h.len()
            )));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::Config(format!(
                "sample rate {sample_rate} must be positive"
            )));
        }
        Ok(DualPolSeries { v, h, sample_rate })
    }

    pub fn zeros(n: usize, sample_rate: f64) -> Self {
        DualPolSeries {
            v: vec![Complex64::new(0.0, 0.0); n],
            h: vec![Complex64::new(0.0, 0.0); n],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Total energy Σ(|v|² + |h|²).
    pub fn energy(&self) -> f64 {
        energy(&self.v) + energy(&self.h)
    }

    /// Multiplies both polarizations by `e^{j2π f n / fs}`.
    pub fn frequency_shift(&mut self, freq: f64) {
        if freq == 0.0 {
            return;
        }
        let mut nco = Nco::new(freq, self.sample_rate);
        for (v, h) in self.v.iter_mut().zip(self.h.iter_mut()) {
            let w = nco.next_phasor();
            *v *= w;
            *h *= w;
        }
    }
}

/// Two real detector outputs at a common rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSeriesPair {
    pub i_v: Vec<f64>,
    pub i_h: Vec<f64>,
    pub sample_rate: f64,
}

impl RealSeriesPair {
    pub fn new(i_v: Vec<f64>, i_h: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if i_v.len() != i_h.len() {
            return Err(Error::Alignment(format!(
                "detector output lengths differ: {} vs {}",
                i_v.len(),
                i_h.len()
            )));
        }
        Ok(RealSeriesPair {
            i_v,
            i_h,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.i_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_v.is_empty()
    }
}

pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        energy(x) / x.len() as f64
    }
}

/// Numerically controlled oscillator producing `e^{j2π f n / fs}`.
/// The recurrence is re-anchored to the exact phase every 1024 samples.
#[derive(Debug, Clone)]
pub struct Nco {
    cycles_per_sample: f64,
    step: Complex64,
    cur: Complex64,
    n: u64,
}

impl Nco {
    const RESYNC: u64 = 1024;

    pub fn new(freq: f64, sample_rate: f64) -> Self {
        let cps = freq / sample_rate;
        Nco {
            cycles_per_sample: cps,
            step: Complex64::from_polar(1.0, TAU * cps),
            cur: Complex64::new(1.0, 0.0),
            n: 0,
        }
    }

    fn exact(&self, n: u64) -> Complex64 {
        let cycles = (self.cycles_per_sample * n as f64).rem_euclid(1.0);
        Complex64::from_polar(1.0, TAU * cycles)
    }

    /// Returns the phasor for the current sample and advances.
    pub fn next_phasor(&mut self) -> Complex64 {
        if self.n.is_multiple_of(Self::RESYNC) {
            self.cur = self.exact(self.n);
        }
        let out = self.cur;
        self.cur *= self.step;
        self.n += 1;
        out
    }
}

/// Centered moving average of width `w`; near the edges the window is
/// truncated to the available samples.
pub fn moving_average_c(x: &[Complex64], w: usize) -> Vec<Complex64> {
    moving_average_generic(x, w, Complex64::new(0.0, 0.0))
}

pub fn moving_average_r(x: &[f64], w: usize) -> Vec<f64> {
    moving_average_generic(x, w, 0.0)
}

fn moving_average_generic<T>(x: &[T], w: usize, zero: T) -> Vec<T>
where
    T: Copy
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::ops::Div<f64, Output = T>,
{
    let n = x.len();
    if w <= 1 || n == 0 {
        return x.to_vec();
    }
    let before = w / 2;
    let after = w - 1 - before;
    // Block-local prefix sums keep cancellation error at the scale of one
    // block rather than the whole frame.
    const BLOCK: usize = 4096;
    let mut local = Vec::with_capacity(n + 1);
    let mut block_sums = Vec::with_capacity(n / BLOCK + 1);
    let mut acc = zero;
    for (i, &v) in x.iter().enumerate() {
        if i % BLOCK == 0 {
            if i > 0 {
                block_sums.push(acc);
            }
            acc = zero;
        }
        local.push(acc);
        acc = acc + v;
    }
    if n.is_multiple_of(BLOCK) {
        block_sums.push(acc);
        local.push(zero);
    } else {
        local.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            let mut s = local[hi] - local[lo];
            for &b in &block_sums[lo / BLOCK..hi / BLOCK] {
                s = s + b;
            }
            s / (hi - lo) as f64
        })
        .collect()
}
