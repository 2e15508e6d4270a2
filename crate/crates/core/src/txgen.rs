//! Transmitter: DG-256QAM symbols, RRC shaping and the two pilot tones.

use crate::error::{Error, Result};
use crate::fft;
use crate::rng::{self, TAG_SYMBOLS};
use crate::series::{DualPolSeries, Nco};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxConfig {
    /// Symbol rate, Hz.
    pub symbol_rate: f64,
    /// Waveform sample rate, Hz.
    pub sample_rate: f64,
    /// Quantum band center at the detected IF, Hz.
    pub f_q: f64,
    /// PT1 (V polarization) tone at the detected IF, Hz.
    pub f_pt1: f64,
    /// PT2 (H polarization) tone at the detected IF, Hz.
    pub f_pt2: f64,
    /// Modulation variance per quadrature, SNU.
    pub v_a: f64,
    /// PT1 power over mean quantum power, dB.
    pub pilot_to_signal_db: f64,
    /// PT2 power over mean quantum power, dB. Defaults to the PT1 value.
    pub pt2_to_signal_db: Option<f64>,
    pub rrc_rolloff: f64,
    /// Pulse length in symbols.
    pub rrc_span: usize,
    pub n_symbols: usize,
    pub train_ratio: f64,
    /// Shaping parameter ν of the discrete Gaussian on the unit grid.
    pub dg_nu: f64,
    /// Spacing kept between the quantum band and the pilot bands, Hz.
    pub guard_band: f64,
    /// Lowest usable frequency of the PT1 band, Hz.
    pub dc_guard: f64,
    pub seed: u64,
}

impl Default for TxConfig {
    fn default() -> Self {
        TxConfig {
            symbol_rate: 1e9,
            sample_rate: 10e9,
            f_q: 0.9e9,
            f_pt1: 0.05e9,
            f_pt2: 1.75e9,
            v_a: 6.15,
            pilot_to_signal_db: 20.0,
            pt2_to_signal_db: None,
            rrc_rolloff: 0.3,
            rrc_span: 64,
            n_symbols: 1_250_000,
            train_ratio: 0.2,
            dg_nu: 0.02,
            guard_band: 50e6,
            dc_guard: 10e6,
            seed: 0,
        }
    }
}

/// Closed frequency interval `[lo, hi]` in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandInterval {
    pub lo: f64,
    pub hi: f64,
}

impl BandInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }

    pub fn overlaps(&self, o: &BandInterval) -> bool {
        self.lo < o.hi && o.lo < self.hi
    }
}

/// Receiver band plan derived from the transmitter frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPlan {
    pub q: BandInterval,
    pub pt1: BandInterval,
    pub pt2: BandInterval,
    pub f_q: f64,
    pub f_pt1: f64,
    pub f_pt2: f64,
    pub sample_rate: f64,
}

impl BandPlan {
    pub fn check(&self) -> Result<()> {
        let nyq = self.sample_rate / 2.0;
        for (name, b) in [("q", self.q), ("pt1", self.pt1), ("pt2", self.pt2)] {
            if !(b.lo > 0.0 && b.hi < nyq && b.lo < b.hi) {
                return Err(Error::Config(format!(
                    "{name} band [{}, {}] Hz not inside (0, {nyq})",
                    b.lo, b.hi
                )));
            }
        }
        if self.q.overlaps(&self.pt1) || self.q.overlaps(&self.pt2) || self.pt1.overlaps(&self.pt2)
        {
            return Err(Error::Config("band intervals overlap".into()));
        }
        Ok(())
    }
}

impl TxConfig {
    pub fn sps(&self) -> usize {
        (self.sample_rate / self.symbol_rate).round() as usize
    }

    pub fn n_samples(&self) -> usize {
        self.n_symbols * self.sps()
    }

    pub fn n_train(&self) -> usize {
        n_train(self.n_symbols, self.train_ratio)
    }

    /// One-sided occupied half-width of the quantum band, Hz.
    pub fn q_half_width(&self) -> f64 {
        (1.0 + self.rrc_rolloff) * self.symbol_rate / 2.0
    }

    pub fn pilot_amplitudes(&self) -> (f64, f64) {
        let p_q = 2.0 * self.v_a / self.sps() as f64;
        let a1 = (p_q * 10f64.powf(self.pilot_to_signal_db / 10.0)).sqrt();
        let db2 = self.pt2_to_signal_db.unwrap_or(self.pilot_to_signal_db);
        let a2 = (p_q * 10f64.powf(db2 / 10.0)).sqrt();
        (a1, a2)
    }

    pub fn band_plan(&self) -> BandPlan {
        let hw = self.q_half_width();
        let q = BandInterval {
            lo: self.f_q - hw,
            hi: self.f_q + hw,
        };
        let pt1 = BandInterval {
            lo: self.dc_guard,
            hi: q.lo - self.guard_band,
        };
        let pt2_lo = q.hi + self.guard_band;
        let pt2 = BandInterval {
            lo: pt2_lo,
            hi: (2.0 * self.f_pt2 - pt2_lo).min(self.sample_rate / 2.0 - self.dc_guard),
        };
        BandPlan {
            q,
            pt1,
            pt2,
            f_q: self.f_q,
            f_pt1: self.f_pt1,
            f_pt2: self.f_pt2,
            sample_rate: self.sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (k, v) in [
            ("symbol_rate", self.symbol_rate),
            ("sample_rate", self.sample_rate),
            ("v_a", self.v_a),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        let ratio = self.sample_rate / self.symbol_rate;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 2.0 {
            return bad(format!(
                "sample_rate/symbol_rate = {ratio} is not an integer ≥ 2"
            ));
        }
        if !(self.rrc_rolloff > 0.0 && self.rrc_rolloff <= 1.0) {
            return bad(format!("rrc_rolloff {} outside (0, 1]", self.rrc_rolloff));
        }
        if self.rrc_span == 0 {
            return bad("rrc_span must be ≥ 1".into());
        }
        if self.n_symbols == 0 {
            return bad("n_symbols must be ≥ 1".into());
        }
        if !(0.0..1.0).contains(&self.train_ratio) {
            return bad(format!("train_ratio {} outside [0, 1)", self.train_ratio));
        }
        if !(self.dg_nu.is_finite() && self.dg_nu >= 0.0) {
            return bad(format!("dg_nu {} must be finite and ≥ 0", self.dg_nu));
        }
        if !(self.pilot_to_signal_db.is_finite()
            && self.pt2_to_signal_db.is_none_or(f64::is_finite))
        {
            return bad("pilot levels must be finite".into());
        }
        let hw = self.q_half_width();
        if !(self.f_pt1 < self.f_q - hw && self.f_pt2 > self.f_q + hw) {
            return bad("frequency plan: need f_pt1 < quantum band < f_pt2".into());
        }
        let plan = self.band_plan();
        plan.check()?;
        if !plan.pt1.contains(self.f_pt1) || !plan.pt2.contains(self.f_pt2) {
            return bad("pilot tones fall outside their guard-limited bands".into());
        }
        Ok(())
    }
}

pub fn n_train(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Quantum symbols with their training layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: Vec<Complex64>,
    pub train_mask: Vec<bool>,
    pub v_a: f64,
}

impl SymbolFrame {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Number of leading training symbols.
    pub fn n_train(&self) -> usize {
        self.train_mask.iter().take_while(|&&t| t).count()
    }
}

/// Discrete-Gaussian 256QAM: per-quadrature levels `g·{±1, ±3, …, ±15}`
/// with probability `∝ exp(−ν x²)` on the unit grid. The 2-D point
/// probability `∝ exp(−ν|a|²)` factorizes over the quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct Dg256Qam {
    pub nu: f64,
    pub gain: f64,
    levels: [f64; 16],
    cdf: [f64; 16],
}

impl Dg256Qam {
    pub fn new(nu: f64, gain: f64) -> Result<Self> {
        if !(nu.is_finite() && nu >= 0.0 && gain.is_finite() && gain > 0.0) {
            return Err(Error::Config(format!(
                "invalid DG-256QAM parameters ν={nu}, g={gain}"
            )));
        }
        let mut levels = [0.0; 16];
        let mut w = [0.0; 16];
        for i in 0..16 {
            let x = 2.0 * i as f64 - 15.0;
            levels[i] = x;
            w[i] = (-nu * x * x).exp();
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config(format!(
                "DG-256QAM weights vanish for ν={nu}"
            )));
        }
        let mut cdf = [0.0; 16];
        let mut acc = 0.0;
        for i in 0..16 {
            acc += w[i] / total;
            cdf[i] = acc;
        }
        cdf[15] = 1.0;
        Ok(Dg256Qam {
            nu,
            gain,
            levels,
            cdf,
        })
    }

    /// Solves the grid scale so the per-quadrature variance equals `v_a`.
    pub fn with_variance(nu: f64, v_a: f64) -> Result<Self> {
        if !(v_a.is_finite() && v_a > 0.0) {
            return Err(Error::Config(format!("v_a must be positive, got {v_a}")));
        }
        let unit = Dg256Qam::new(nu, 1.0)?;
        let var_unit = unit.quadrature_variance();
        // Variance scales as g², so bisection on g brackets the root in
        // [0, sqrt(v_a)] because the unit-grid variance is at least 1.
        let (mut lo, mut hi) = (0.0f64, v_a.sqrt());
        if var_unit * hi * hi < v_a {
            return Err(Error::Config(format!(
                "no DG-256QAM scale reaches v_a={v_a}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if var_unit * mid * mid < v_a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Dg256Qam::new(nu, 0.5 * (lo + hi))
    }

    fn level_prob(&self, i: usize) -> f64 {
        if i == 0 {
            self.cdf[0]
        } else {
            self.cdf[i] - self.cdf[i - 1]
        }
    }

    /// All 256 constellation points with their probabilities.
    pub fn points(&self) -> Vec<(Complex64, f64)> {
        let mut out = Vec::with_capacity(256);
        for i in 0..16 {
            for k in 0..16 {
                out.push((
                    Complex64::new(self.levels[i] * self.gain, self.levels[k] * self.gain),
                    self.level_prob(i) * self.level_prob(k),
                ));
            }
        }
        out
    }

    pub fn quadrature_variance(&self) -> f64 {
        (0..16)
            .map(|i| self.level_prob(i) * (self.levels[i] * self.gain).powi(2))
            .sum()
    }

    fn draw_level<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u).min(15);
        self.levels[idx] * self.gain
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Complex64> {
        (0..n)
            .map(|_| {
                let re = self.draw_level(rng);
                let im = self.draw_level(rng);
                Complex64::new(re, im)
            })
            .collect()
    }
}

/// Draws `n` DG-256QAM symbols with per-quadrature variance `v_a`.
pub fn sample_dg256qam(n: usize, v_a: f64, nu: f64, seed: u64) -> Result<SymbolFrame> {
    if n == 0 {
        return Err(Error::Config("symbol count must be ≥ 1".into()));
    }
    let c = Dg256Qam::with_variance(nu, v_a)?;
    let mut rng = rng::stream(seed, TAG_SYMBOLS);
    Ok(SymbolFrame {
        symbols: c.sample(n, &mut rng),
        train_mask: vec![false; n],
        v_a,
    })
}

pub fn build_frame(cfg: &TxConfig) -> Result<SymbolFrame> {
    cfg.validate()?;
    let mut f = sample_dg256qam(cfg.n_symbols, cfg.v_a, cfg.dg_nu, cfg.seed)?;
    let nt = cfg.n_train();
    for m in f.train_mask.iter_mut().take(nt) {
        *m = true;
    }
    Ok(f)
}

/// Truncated root-raised-cosine pulse with unit energy.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    pub taps: Vec<f64>,
    pub sps: usize,
    pub span: usize,
    pub rolloff: f64,
}

fn rrc_value(t: f64, beta: f64) -> f64 {
    // t in symbol periods.
    if t.abs() < 1e-12 {
        return 1.0 + beta * (4.0 / PI - 1.0);
    }
    if (4.0 * beta * t.abs() - 1.0).abs() < 1e-9 {
        let a = (1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin();
        let b = (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos();
        return beta / 2f64.sqrt() * (a + b);
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

type SpectrumKey = (usize, usize, u64, usize);

fn spectrum_cache() -> &'static Mutex<HashMap<SpectrumKey, Arc<Vec<f64>>>> {
    static C: OnceLock<Mutex<HashMap<SpectrumKey, Arc<Vec<f64>>>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

impl PulseShape {
    pub fn rrc(rolloff: f64, span: usize, sps: usize) -> Self {
        let len = span * sps + 1;
        let c = (len / 2) as f64;
        let mut taps: Vec<f64> = (0..len)
            .map(|m| rrc_value((m as f64 - c) / sps as f64, rolloff))
            .collect();
        let e: f64 = taps.iter().map(|x| x * x).sum();
        let k = 1.0 / e.sqrt();
        taps.iter_mut().for_each(|x| *x *= k);
        PulseShape {
            taps,
            sps,
            span,
            rolloff,
        }
    }

    pub fn from_config(cfg: &TxConfig) -> Self {
        PulseShape::rrc(cfg.rrc_rolloff, cfg.rrc_span, cfg.sps())
    }

    /// Zero-phase `n`-point DFT of the taps, centered on sample 0 with
    /// circular wrap. Results are cached per (pulse, n).
    pub fn spectrum(&self, n: usize) -> Arc<Vec<f64>> {
        let key = (self.sps, self.span, self.rolloff.to_bits(), n);
        if let Some(s) = spectrum_cache()
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&key)
        {
            return s.clone();
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let c = self.taps.len() / 2;
        for (m, &t) in self.taps.iter().enumerate() {
            let idx = (m as isize - c as isize).rem_euclid(n as isize) as usize;
            buf[idx].re += t;
        }
        fft::forward(&mut buf);
        let s = Arc::new(buf.into_iter().map(|z| z.re).collect::<Vec<_>>());
        let mut cache = spectrum_cache().lock().unwrap_or_else(|e| e.into_inner());
        if cache.len() > 8 {
            cache.clear();
        }
        cache.insert(key, s.clone());
        s
    }

    /// Circularly pulse-shapes `symbols` at `sps` samples per symbol and
    /// shifts the result to `center` Hz at rate `fs`.
    pub fn shape(&self, symbols: &[Complex64], center: f64, fs: f64) -> Vec<Complex64> {
        let mut s = symbols.to_vec();
        fft::forward(&mut s);
        self.shape_spectrum(&s, center, fs)
    }

    /// [`PulseShape::shape`] for symbols given by their DFT.
    pub fn shape_spectrum(&self, s: &[Complex64], center: f64, fs: f64) -> Vec<Complex64> {
        let ns = s.len();
        let n = ns * self.sps;
        let p = self.spectrum(n);
        let inv_n = 1.0 / n as f64;
        // A center on the DFT grid is applied as a bin rotation.
        let shift = center * n as f64 / fs;
        let on_grid = (shift - shift.round()).abs() < 1e-9;
        let k0 = if on_grid {
            (shift.round() as i64).rem_euclid(n as i64) as usize
        } else {
            0
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let (head, tail) = buf.split_at_mut(k0);
        for (d, (&pk, sk)) in tail
            .iter_mut()
            .chain(head.iter_mut())
            .zip(p.iter().zip(s.iter().cycle()))
        {
            *d = sk * (pk * inv_n);
        }
        fft::inverse(&mut buf);
        if !on_grid {
            let mut nco = Nco::new(center, fs);
            for z in buf.iter_mut() {
                *z *= nco.next_phasor();
            }
        }
        buf
    }
}

/// Builds the dual-polarization transmitter field at the detected IF
/// frame: shaped quantum band plus PT1 on V, PT2 alone on H.
pub fn synthesize_tx(frame: &SymbolFrame, cfg: &TxConfig) -> Result<DualPolSeries> {
    synthesize_tx_offset(frame, cfg, 0.0)
}

/// [`synthesize_tx`] with every component moved by `offset` Hz, in one pass
/// instead of a separate frequency shift.
pub fn synthesize_tx_offset(
    frame: &SymbolFrame,
    cfg: &TxConfig,
    offset: f64,
) -> Result<DualPolSeries> {
    cfg.validate()?;
    if frame.len() != cfg.n_symbols {
        return Err(Error::Config(format!(
            "frame has {} symbols, config expects {}",
            frame.len(),
            cfg.n_symbols
        )));
    }
    let fs = cfg.sample_rate;
    let pulse = PulseShape::from_config(cfg);
    let mut v = pulse.shape(&frame.symbols, cfg.f_q + offset, fs);
    let (a1, a2) = cfg.pilot_amplitudes();
    let mut n1 = Nco::new(cfg.f_pt1 + offset, fs);
    let mut n2 = Nco::new(cfg.f_pt2 + offset, fs);
    let h = v
        .iter_mut()
        .map(|z| {
            *z += n1.next_phasor() * a1;
            n2.next_phasor() * a2
        })
        .collect();
    DualPolSeries::new(v, h, fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::mean_power;
    use rand::SeedableRng;

    #[test]
    fn default_plan_intervals() {
        let p = TxConfig::default().band_plan();
        let close = |a: f64, b: f64| (a - b).abs() < 1.0;
        assert!(close(p.pt1.lo, 0.01e9) && close(p.pt1.hi, 0.20e9));
        assert!(close(p.q.lo, 0.25e9) && close(p.q.hi, 1.55e9));
        assert!(close(p.pt2.lo, 1.60e9) && close(p.pt2.hi, 1.90e9));
        TxConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_plans_rejected() {
        let mut c = TxConfig::default();
        c.f_pt1 = 0.3e9;
        assert!(c.validate().is_err());
        let mut c = TxConfig::default();
        c.sample_rate = 10.5e9;
        assert!(c.validate().is_err());
        let mut c = TxConfig::default();
        c.train_ratio = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn training_mask_block_layout() {
        let mut c = TxConfig::default();
        c.n_symbols = 10;
        let f = build_frame(&c).unwrap();
        let want = [
            true, true, false, false, false, false, false, false, false, false,
        ];
        assert_eq!(f.train_mask, want);
        c.train_ratio = 0.0;
        assert!(build_frame(&c).unwrap().train_mask.iter().all(|t| !t));
        c.train_ratio = 0.3;
        assert_eq!(build_frame(&c).unwrap().n_train(), 3);
    }

    #[test]
    fn frames_are_deterministic() {
        let mut c = TxConfig::default();
        c.n_symbols = 1000;
        c.seed = 42;
        assert_eq!(build_frame(&c).unwrap(), build_frame(&c).unwrap());
        c.seed = 43;
        let other = build_frame(&c).unwrap();
        c.seed = 42;
        assert_ne!(build_frame(&c).unwrap(), other);
    }

    #[test]
    fn uniform_limit() {
        let c = Dg256Qam::new(0.0, 1.0).unwrap();
        for (_, p) in c.points() {
            assert!((p - 1.0 / 256.0).abs() < 1e-15);
        }
    }

    #[test]
    fn brute_force_variance_matches_sampler() {
        let c = Dg256Qam::new(0.05, 1.0).unwrap();
        let pts = c.points();
        let total: f64 = pts.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Oracle: unnormalized exp(-ν|a|²) over all 256 points.
        let mut z = 0.0;
        let mut m2 = 0.0;
        for i in 0..16 {
            for k in 0..16 {
                let (x, y) = (2.0 * i as f64 - 15.0, 2.0 * k as f64 - 15.0);
                let w = (-0.05 * (x * x + y * y)).exp();
                z += w;
                m2 += w * x * x;
            }
        }
        let oracle = m2 / z;
        assert!((c.quadrature_variance() - oracle).abs() < 1e-12 * oracle);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s = c.sample(1_000_000, &mut rng);
        let emp: f64 = s.iter().map(|a| a.re * a.re).sum::<f64>() / s.len() as f64;
        // 4σ Monte-Carlo bound: Var(x²) ≈ 2σ⁴ for a near-Gaussian level set.
        let bound = 4.0 * (2.0f64).sqrt() * oracle / (s.len() as f64).sqrt();
        assert!((emp - oracle).abs() < bound, "emp {emp} oracle {oracle}");
    }

    #[test]
    fn dg_variance_on_grid_and_target() {
        let f = sample_dg256qam(1_000_000, 6.15, 0.02, 11).unwrap();
        let vr: f64 = f.symbols.iter().map(|a| a.re * a.re).sum::<f64>() / 1e6;
        let vi: f64 = f.symbols.iter().map(|a| a.im * a.im).sum::<f64>() / 1e6;
        assert!((vr / 6.15 - 1.0).abs() < 0.005, "{vr}");
        assert!((vi / 6.15 - 1.0).abs() < 0.005, "{vi}");
        let c = Dg256Qam::with_variance(0.02, 6.15).unwrap();
        assert!((c.quadrature_variance() - 6.15).abs() < 1e-12);
        for a in f.symbols.iter().take(1000) {
            let u = a.re / c.gain;
            assert!((u - u.round()).abs() < 1e-9 && (u.round() as i64).abs() % 2 == 1);
        }
        assert!(Dg256Qam::with_variance(-1.0, 6.15).is_err());
        assert!(sample_dg256qam(0, 6.15, 0.02, 1).is_err());
    }

    #[test]
    fn rrc_is_unit_energy_and_nyquist() {
        let p = PulseShape::rrc(0.3, 64, 10);
        let e: f64 = p.taps.iter().map(|x| x * x).sum();
        assert!((e - 1.0).abs() < 1e-12);
        // RRC ⊛ RRC is a Nyquist pulse: zero at nonzero symbol multiples.
        let c = p.taps.len() / 2;
        for k in 1..5 {
            let lag = k * 10;
            let r: f64 = (0..p.taps.len() - lag)
                .map(|m| p.taps[m] * p.taps[m + lag])
                .sum();
            assert!(r.abs() < 2e-3, "lag {k}: {r}");
        }
        assert!(p.taps[c] > 0.0);
    }

    fn small_cfg(n: usize) -> TxConfig {
        TxConfig {
            n_symbols: n,
            seed: 3,
            ..TxConfig::default()
        }
    }

    #[test]
    fn signal_off_leaves_pt1_only() {
        let cfg = small_cfg(2000);
        let mut f = build_frame(&cfg).unwrap();
        f.symbols
            .iter_mut()
            .for_each(|s| *s = Complex64::new(0.0, 0.0));
        let tx = synthesize_tx(&f, &cfg).unwrap();
        let mut spec = tx.v.clone();
        fft::forward(&mut spec);
        let (kmax, _) = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert_eq!(fft::bin_freq(kmax, spec.len(), cfg.sample_rate), 0.05e9);
    }

    #[test]
    fn pilot_ratio_and_energy_bookkeeping() {
        let cfg = small_cfg(100_000);
        let f = build_frame(&cfg).unwrap();
        let tx = synthesize_tx(&f, &cfg).unwrap();
        let n = tx.len() as f64;
        let plan = cfg.band_plan();
        let mut spec = tx.v.clone();
        fft::forward(&mut spec);
        let mut q = 0.0;
        let mut pt1 = 0.0;
        for (k, z) in spec.iter().enumerate() {
            let f = fft::bin_freq(k, spec.len(), cfg.sample_rate);
            let p = z.norm_sqr() / (n * n);
            if plan.q.contains(f) {
                q += p;
            } else if (f - cfg.f_pt1).abs() < 1e6 {
                pt1 += p;
            }
        }
        assert!((pt1 / q / 100.0 - 1.0).abs() < 0.01, "ratio {}", pt1 / q);
        let total = mean_power(&tx.v) + mean_power(&tx.h);
        assert!((total / (q + 2.0 * pt1) - 1.0).abs() < 1e-3);
        // Quantum energy in the ±1 MHz pilot bins.
        let mut qs = PulseShape::from_config(&cfg).shape(&f.symbols, cfg.f_q, cfg.sample_rate);
        fft::forward(&mut qs);
        let leak: f64 = qs
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = fft::bin_freq(*k, qs.len(), cfg.sample_rate);
                (f - cfg.f_pt1).abs() < 1e6 || (f - cfg.f_pt2).abs() < 1e6
            })
            .map(|(_, z)| z.norm_sqr() / (n * n))
            .sum();
        assert!(10.0 * (leak / pt1).log10() < -40.0);
    }

    #[test]
    fn synthesis_is_bit_identical() {
        let cfg = small_cfg(500);
        let f = build_frame(&cfg).unwrap();
        assert_eq!(
            synthesize_tx(&f, &cfg).unwrap(),
            synthesize_tx(&f, &cfg).unwrap()
        );
        let mut bad = cfg.clone();
        bad.n_symbols = 501;
        assert!(synthesize_tx(&f, &bad).is_err());
    }
}
