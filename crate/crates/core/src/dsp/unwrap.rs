use std::f64::consts::{PI, TAU};

/// Wraps an angle into (−π, π].
pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Removes 2π jumps so that consecutive differences lie in (−π, π].
pub fn unwrap(theta: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(theta.len());
    let mut offset = 0.0;
    let mut prev = None;
    for &t in theta {
        if let Some(p) = prev {
            let d = t - p;
            offset += wrap(d) - d;
        }
        out.push(t + offset);
        prev = Some(t);
    }
    out
}
