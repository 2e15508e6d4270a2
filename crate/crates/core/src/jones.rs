//! 2×2 Jones matrices.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    pub m_vv: Complex64,
    pub m_vh: Complex64,
    pub m_hv: Complex64,
    pub m_hh: Complex64,
}

impl JonesMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        JonesMatrix {
            m_vv: one,
            m_vh: zero,
            m_hv: zero,
            m_hh: one,
        }
    }

    /// Fiber matrix parameterized by the splitting angle `alpha` and the
    /// phases `phi1`, `phi2`:
    /// `[cos α e^{jφ1}, −sin α e^{jφ2}; sin α e^{−jφ2}, cos α e^{−jφ1}]`.
    pub fn from_angles(alpha: f64, phi1: f64, phi2: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        let e1 = Complex64::from_polar(1.0, phi1);
        let e2 = Complex64::from_polar(1.0, phi2);
        JonesMatrix {
            m_vv: e1 * c,
            m_vh: -e2 * s,
            m_hv: e2.conj() * s,
            m_hh: e1.conj() * c,
        }
    }

    /// Planar rotation `[cos θ, sin θ; −sin θ, cos θ]`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        JonesMatrix {
            m_vv: Complex64::new(c, 0.0),
            m_vh: Complex64::new(s, 0.0),
            m_hv: Complex64::new(-s, 0.0),
            m_hh: Complex64::new(c, 0.0),
        }
    }

    pub fn diag(a: Complex64, b: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        JonesMatrix {
            m_vv: a,
            m_vh: zero,
            m_hv: zero,
            m_hh: b,
        }
    }

    pub fn mul(&self, o: &JonesMatrix) -> JonesMatrix {
        JonesMatrix {
            m_vv: self.m_vv * o.m_vv + self.m_vh * o.m_hv,
            m_vh: self.m_vv * o.m_vh + self.m_vh * o.m_hh,
            m_hv: self.m_hv * o.m_vv + self.m_hh * o.m_hv,
            m_hh: self.m_hv * o.m_vh + self.m_hh * o.m_hh,
        }
    }

    pub fn adjoint(&self) -> JonesMatrix {
        JonesMatrix {
            m_vv: self.m_vv.conj(),
            m_vh: self.m_hv.conj(),
            m_hv: self.m_vh.conj(),
            m_hh: self.m_hh.conj(),
        }
    }

    pub fn scale(&self, k: Complex64) -> JonesMatrix {
        JonesMatrix {
            m_vv: self.m_vv * k,
            m_vh: self.m_vh * k,
            m_hv: self.m_hv * k,
            m_hh: self.m_hh * k,
        }
    }

    #[inline]
    pub fn apply(&self, v: Complex64, h: Complex64) -> (Complex64, Complex64) {
        (self.m_vv * v + self.m_vh * h, self.m_hv * v + self.m_hh * h)
    }

    /// Largest entry deviation of `J·J†` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.mul(&self.adjoint());
        let one = Complex64::new(1.0, 0.0);
        [
            (p.m_vv - one).norm(),
            p.m_vh.norm(),
            p.m_hv.norm(),
            (p.m_hh - one).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, o: &JonesMatrix) -> f64 {
        [
            (self.m_vv - o.m_vv).norm(),
            (self.m_vh - o.m_vh).norm(),
            (self.m_hv - o.m_hv).norm(),
            (self.m_hh - o.m_hh).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}
