//! Parameter estimation, EVM, tracking error and the asymptotic key rate.
//!
//! Excess noise is referenced to the channel input: the residual noise
//! above shot and electronic noise is divided by `ηT̂`. Detection is
//! treated as heterodyne (both quadratures measured).

use crate::channel::{JonesTrajectory, SnuCalibration};
use crate::dsp::{wrap, PolEstimate};
use crate::error::{Error, Result};
use num_complex::Complex64;
#[cfg(test)]
use std::f64::consts::PI;

/// Minimum number of symbol pairs for parameter estimation.
pub const MIN_PAIRS: usize = 10_000;
/// EVM reported for an exact match.
pub const EVM_FLOOR_DB: f64 = -120.0;

/// One experiment result; the row type of all CSV outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub sr: f64,
    pub trial: u64,
    pub seed: u64,
    pub tracker: String,
    /// Channel transmittance estimate, excluding η.
    pub t_hat: f64,
    /// Excess noise, SNU at the channel input.
    pub xi_hat: f64,
    pub evm_db: f64,
    pub alpha_rms_err: f64,
    pub skr_bps: f64,
    pub block_size: usize,
    pub diverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamEstimate {
    /// Complex channel gain `ĝ`, so that `ηT̂ = |ĝ|²`.
    pub gain: Complex64,
    pub t_hat: f64,
    pub xi_hat: f64,
    /// Per-quadrature residual variance, SNU.
    pub residual_var: f64,
}

/// Training-correlation estimator of transmittance and excess noise.
/// `rx` is converted to SNU with `cal`.
pub fn estimate_params(
    tx: &[Complex64],
    rx: &[Complex64],
    cal: &SnuCalibration,
    v_ele: f64,
    eta: f64,
) -> Result<ParamEstimate> {
    if tx.len() != rx.len() {
        return Err(Error::Alignment(format!(
            "{} tx vs {} rx symbols",
            tx.len(),
            rx.len()
        )));
    }
    if tx.len() < MIN_PAIRS {
        return Err(Error::Config(format!(
            "parameter estimation needs ≥ {MIN_PAIRS} pairs, got {}",
            tx.len()
        )));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Config(format!("eta {eta} outside (0, 1]")));
    }
    let k = cal.amplitude_factor();
    let n = tx.len() as f64;
    let mut cross = Complex64::new(0.0, 0.0);
    let mut ptx = 0.0;
    for (t, r) in tx.iter().zip(rx) {
        cross += r * k * t.conj();
        ptx += t.norm_sqr();
    }
    if ptx == 0.0 {
        return Err(Error::Unestimable(0.0));
    }
    let g = cross / ptx;
    let g2 = g.norm_sqr();
    if !(g2 >= 1e-6) {
        return Err(Error::Unestimable(g2));
    }
    let mut mean = Complex64::new(0.0, 0.0);
    let mut m2 = 0.0;
    for (t, r) in tx.iter().zip(rx) {
        let e = r * k - g * t;
        mean += e;
        m2 += e.norm_sqr();
    }
    mean /= n;
    let var = (m2 / n - mean.norm_sqr()) / 2.0;
    Ok(ParamEstimate {
        gain: g,
        t_hat: g2 / eta,
        xi_hat: (var - 1.0 - v_ele) / g2,
        residual_var: var,
    })
}

/// `10 log10(Σ|rx − tx|² / Σ|tx|²)`, floored at [`EVM_FLOOR_DB`].
pub fn evm(rx: &[Complex64], tx: &[Complex64]) -> Result<f64> {
    if rx.len() != tx.len() {
        return Err(Error::Alignment(format!(
            "{} rx vs {} tx symbols",
            rx.len(),
            tx.len()
        )));
    }
    let r: f64 = tx.iter().map(|z| z.norm_sqr()).sum();
    if !(r > 0.0) {
        return Err(Error::UndefinedMetric("zero reference power".into()));
    }
    let e: f64 = rx.iter().zip(tx).map(|(a, b)| (a - b).norm_sqr()).sum();
    if e == 0.0 {
        return Ok(EVM_FLOOR_DB);
    }
    Ok((10.0 * (e / r).log10()).max(EVM_FLOOR_DB))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingErrors {
    pub alpha_rms_err: f64,
    pub dphi_rms_err: f64,
}

/// Splitting angle folded into [0, π/2]: the tracker cannot distinguish
/// α from −α or π − α (the sign is carried by the phase sum).
fn fold_alpha(a: f64) -> f64 {
    a.cos().abs().clamp(0.0, 1.0).acos()
}

/// Wraps into (−π/2, π/2].
fn wrap_half(x: f64) -> f64 {
    wrap(2.0 * x) / 2.0
}

/// RMS tracking errors against the channel ground truth, compared in the
/// tracker's gauge. The phase sum is compared modulo π and only where the
/// splitting angle makes it observable (|sin 2α| > 0.1).
pub fn tracking_error_stats(est: &PolEstimate, truth: &JonesTrajectory) -> Result<TrackingErrors> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::Alignment(format!(
            "estimate has {} samples, truth has {}",
            est.len(),
            truth.len()
        )));
    }
    let n = est.len() as f64;
    let mut a2 = 0.0;
    let mut d2 = 0.0;
    let mut dn = 0usize;
    for i in 0..est.len() {
        let da = fold_alpha(est.alpha[i]) - fold_alpha(truth.alpha[i]);
        a2 += da * da;
        if (2.0 * truth.alpha[i]).sin().abs() > 0.1 {
            let want = -(truth.phi1[i] + truth.phi2[i]);
            let dd = wrap_half(est.dphi[i] - want);
            d2 += dd * dd;
            dn += 1;
        }
    }
    Ok(TrackingErrors {
        alpha_rms_err: (a2 / n).sqrt(),
        dphi_rms_err: if dn > 0 { (d2 / dn as f64).sqrt() } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkrParams {
    pub v_a: f64,
    pub t: f64,
    pub xi: f64,
    pub eta: f64,
    pub v_ele: f64,
    pub beta: f64,
    pub symbol_rate: f64,
    pub train_ratio: f64,
}

impl SkrParams {
    /// Operating point with reconciliation efficiency 0.95 at 1 GBaud.
    pub fn operating_point(t: f64, xi: f64) -> Self {
        SkrParams {
            v_a: 6.15,
            t,
            xi,
            eta: 0.56,
            v_ele: 0.15,
            beta: 0.95,
            symbol_rate: 1e9,
            train_ratio: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.v_a > 0.0
            && self.t >= 0.0
            && self.t <= 1.0
            && self.xi >= 0.0
            && self.eta > 0.0
            && self.eta <= 1.0
            && self.v_ele >= 0.0
            && self.beta > 0.0
            && self.beta <= 1.0
            && self.symbol_rate > 0.0
            && (0.0..1.0).contains(&self.train_ratio);
        if ok
            && [self.v_a, self.t, self.xi, self.v_ele, self.symbol_rate]
                .iter()
                .all(|x| x.is_finite())
        {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid key-rate parameters {self:?}"
            )))
        }
    }
}

/// Intermediate key-rate quantities, bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkrTerms {
    pub i_ab: f64,
    pub chi_be: f64,
    /// Symplectic eigenvalues λ1..λ4.
    pub lambdas: [f64; 4],
}

/// Von Neumann entropy of a thermal mode with symplectic eigenvalue `x`.
pub fn g_entropy(x: f64) -> f64 {
    let a = (x + 1.0) / 2.0;
    let b = (x - 1.0) / 2.0;
    let t = |y: f64| if y <= 0.0 { 0.0 } else { y * y.log2() };
    t(a) - t(b)
}

fn checked_eig(x2: f64) -> Result<f64> {
    let x = x2.max(0.0).sqrt();
    if x < 1.0 - 1e-9 || !x.is_finite() {
        return Err(Error::Numerical(format!("symplectic eigenvalue {x} < 1")));
    }
    Ok(x.max(1.0))
}

/// Mutual information and Holevo bound for Gaussian-equivalent
/// heterodyne detection with trusted detector noise.
pub fn skr_terms(p: &SkrParams) -> Result<SkrTerms> {
    p.validate()?;
    if p.t <= 0.0 {
        return Err(Error::Numerical("zero transmittance".into()));
    }
    let v = p.v_a + 1.0;
    let t = p.t;
    let chi_line = 1.0 / t - 1.0 + p.xi;
    let chi_het = (2.0 - p.eta + 2.0 * p.v_ele) / p.eta;
    let chi_tot = chi_line + chi_het / t;
    let i_ab = ((v + chi_tot) / (1.0 + chi_tot)).log2();
    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line).powi(2);
    let b = t * t * (v * chi_line + 1.0).powi(2);
    let d = (a * a - 4.0 * b).max(0.0).sqrt();
    let l1 = checked_eig((a + d) / 2.0)?;
    let l2 = checked_eig((a - d) / 2.0)?;
    let sb = b.sqrt();
    let aa = (a * chi_het * chi_het
        + b
        + 1.0
        + 2.0 * chi_het * (v * sb + t * (v + chi_line))
        + 2.0 * t * (v * v - 1.0))
        / (t * t * (v + chi_tot).powi(2));
    let bb = ((v + sb * chi_het) / (t * (v + chi_tot))).powi(2);
    let dd = (aa * aa - 4.0 * bb).max(0.0).sqrt();
    let l3 = checked_eig((aa + dd) / 2.0)?;
    let l4 = checked_eig((aa - dd) / 2.0)?;
    let chi_be = g_entropy(l1) + g_entropy(l2) - g_entropy(l3) - g_entropy(l4);
    Ok(SkrTerms {
        i_ab,
        chi_be,
        lambdas: [l1, l2, l3, l4],
    })
}

/// Asymptotic secret key rate, bits/s, clamped at zero.
pub fn asymptotic_skr(p: &SkrParams) -> Result<f64> {
    p.validate()?;
    if p.t < 1e-12 {
        return Ok(0.0);
    }
    let s = skr_terms(p)?;
    let k = p.symbol_rate * (1.0 - p.train_ratio) * (p.beta * s.i_ab - s.chi_be);
    Ok(k.max(0.0))
}

/// Transmittance for a loss in dB.
pub fn db_to_transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}
