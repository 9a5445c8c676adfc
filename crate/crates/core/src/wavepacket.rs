//! Free Gaussian packet spreading and the momentum assigned to a detected
//! segment of it.
//!
//! A packet `ψ(x) ∝ exp(-x²/4a²)` evolves freely into
//! `ψ_t(x) = N_t exp(-x² / (4 (a² + i t ħ / 2m)))`. The momentum carried by the
//! segment `[x_f - ε, x_f + ε]` is the ratio
//! `∫ ψ_t* (-iħ ∂ψ_t) / ∫ |ψ_t|²`, which tends to `m x_f / (t - 2 i m a²/ħ)` as
//! `ε → 0`. Each closed form here has a quadrature or algebraic counterpart.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Reduced Planck constant, J s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Electron mass, kg.
pub const ELECTRON_MASS_SI: f64 = 9.109_383_701_5e-31;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketParams {
    /// Half the initial width `2a`.
    pub a: f64,
    pub m: f64,
    pub hbar: f64,
    pub t: f64,
}

impl PacketParams {
    /// Natural units (ħ = 1).
    pub fn natural(a: f64, m: f64, t: f64) -> Self {
        Self { a, m, hbar: 1.0, t }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.a) && pos(self.m) && pos(self.hbar) && self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "packet parameters need a, m, hbar > 0 and t >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `a² + i t ħ / 2m`
    fn complex_width_sq(&self) -> Complex64 {
        Complex64::new(self.a * self.a, self.t * self.hbar / (2.0 * self.m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostSelection {
    pub x_f: f64,
    pub epsilon: f64,
}

impl PostSelection {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_f.is_finite() && self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("post-selection needs finite x_f and ε > 0, got {self:?}")));
        }
        Ok(())
    }
}

/// Normalized `ψ_t(x)`.
pub fn evolved_packet(p: &PacketParams, x: f64) -> Complex64 {
    let aa = p.complex_width_sq();
    let n0 = (2.0 * std::f64::consts::PI * p.a * p.a).powf(-0.25);
    let nt = (Complex64::new(p.a * p.a, 0.0) / aa).sqrt() * n0;
    nt * (-(x * x) / (aa * 4.0)).exp()
}

/// `∂ψ_t/∂x = -x / (2 (a² + i t ħ/2m)) ψ_t`.
pub fn evolved_packet_derivative(p: &PacketParams, x: f64) -> Complex64 {
    -evolved_packet(p, x) * x / (p.complex_width_sq() * 2.0)
}

/// Standard deviation `sqrt(a² + t²ħ²/(4m²a²))` of `|ψ_t|²`.
pub fn packet_width(p: &PacketParams) -> f64 {
    (p.a * p.a + (p.t * p.hbar).powi(2) / (4.0 * p.m * p.m * p.a * p.a)).sqrt()
}

/// `m x_f / (t - 2 i m a² / ħ)`, the `ε → 0` limit of the segment momentum.
pub fn postselected_momentum_closed(p: &PacketParams, sel: &PostSelection) -> Complex64 {
    Complex64::new(p.m * sel.x_f, 0.0) / Complex64::new(p.t, -2.0 * p.m * p.a * p.a / p.hbar)
}

/// A warning when `ε` exceeds a tenth of the packet width, outside the
/// regime where the closed form approximates the segment ratio.
pub fn closed_form_regime_warning(p: &PacketParams, sel: &PostSelection) -> Option<String> {
    let w = packet_width(p);
    (sel.epsilon > w / 10.0).then(|| format!("ε = {} exceeds width/10 = {}; closed form is only the ε → 0 limit", sel.epsilon, w / 10.0))
}

/// The segment ratio `∫ ψ_t*(-iħ ∂ψ_t) / ∫ |ψ_t|²` by adaptive quadrature.
pub fn postselected_momentum_quadrature(p: &PacketParams, sel: &PostSelection) -> Result<Complex64> {
    p.validate()?;
    sel.validate()?;
    let (lo, hi) = (sel.x_f - sel.epsilon, sel.x_f + sel.epsilon);
    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-12,
        max_intervals: 4000,
    };
    let den = integrate(|x| Complex64::new(evolved_packet(p, x).norm_sqr(), 0.0), lo, hi, tol)?;
    if den.value.re <= 0.0 {
        return Err(Error::Quadrature("segment carries no probability".into()));
    }
    let minus_i_hbar = Complex64::new(0.0, -p.hbar);
    // The numerator vanishes for symmetric segments; scale its absolute
    // tolerance to the size of its integrand.
    let num_scale = p.hbar * den.value.re * (sel.x_f.abs() + sel.epsilon) / packet_width(p).powi(2);
    let num_tol = Tolerance {
        abs: 1e-14 * num_scale,
        ..tol
    };
    let num = integrate(
        |x| evolved_packet(p, x).conj() * minus_i_hbar * evolved_packet_derivative(p, x),
        lo,
        hi,
        num_tol,
    )?;
    Ok(num.value / den.value.re)
}

/// `(r, θ)` with `value = r e^{iθ}`.
pub fn polar_decomposition(value: Complex64) -> (f64, f64) {
    value.to_polar()
}

/// Modulus from the closed form `r = m x_f / (t sqrt(1 + 4 m² a⁴ / (t² ħ²)))`.
pub fn momentum_modulus_formula(p: &PacketParams, x_f: f64) -> f64 {
    p.m * x_f / (p.t * (1.0 + 4.0 * p.m.powi(2) * p.a.powi(4) / (p.t * p.hbar).powi(2)).sqrt())
}

/// Root of the completed-square momentum variable
/// `p' = sqrt((2ma² + itħ)/(2mħ²)) p - (ix/2ħ) sqrt(2mħ²/(2ma² + itħ))`
/// at `x = x_f`.
pub fn dominant_momentum(p: &PacketParams, x_f: f64) -> Complex64 {
    let spread = Complex64::new(2.0 * p.m * p.a * p.a, p.t * p.hbar);
    let scale = 2.0 * p.m * p.hbar * p.hbar;
    let coef = (spread / scale).sqrt();
    let shift = Complex64::new(0.0, x_f / (2.0 * p.hbar)) * (Complex64::new(scale, 0.0) / spread).sqrt();
    shift / coef
}
