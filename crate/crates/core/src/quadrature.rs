//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-15,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += sum * WGK[j];
        if j % 2 == 1 {
            gauss += sum * WG[j / 2];
        }
    }
    let value = kronrod * half;
    // The embedded Gauss difference overestimates the Kronrod error for smooth integrands.
    let error = ((kronrod - gauss) * half).norm();
    Piece { a, b, value, error }
}

/// Integrates `f` over `[a, b]` to `max(abs, rel * |I|)`.
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature("interval must be finite".into()));
    }
    let mut pieces = vec![gk15(&f, a, b)];
    loop {
        let value: Complex64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
        if error <= tol.abs.max(tol.rel * value.norm()) {
            return Ok(Estimate {
                value,
                error,
                intervals: pieces.len(),
            });
        }
        if pieces.len() >= tol.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {error:e} above tolerance after {} subintervals",
                pieces.len()
            )));
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(k, _)| k)
            .unwrap();
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature("subinterval below machine resolution".into()));
        }
        pieces.push(gk15(&f, p.a, mid));
        pieces.push(gk15(&f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomials_are_exact() {
        let est = integrate(|x| Complex64::new(x.powi(5) - 3.0 * x * x, x), -1.0, 2.0, Tolerance::default()).unwrap();
        // ∫ x^5 - 3x^2 = [x^6/6 - x^3] = (64/6 - 8) - (1/6 + 1) = 1.5; ∫ x = 1.5
        assert_abs_diff_eq!(est.value.re, 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(est.value.im, 1.5, epsilon = 1e-14);
        assert_eq!(est.intervals, 1);
    }

    #[test]
    fn oscillatory_complex_exponential() {
        let k = 40.0;
        let est = integrate(|x| Complex64::from_polar(1.0, k * x), 0.0, 1.0, Tolerance::default()).unwrap();
        let exact = (Complex64::from_polar(1.0, k) - 1.0) / Complex64::new(0.0, k);
        assert!((est.value - exact).norm() < 1e-13);
    }

    #[test]
    fn peaked_gaussian() {
        let s = 1e-3;
        let est = integrate(|x| Complex64::new((-x * x / (2.0 * s * s)).exp(), 0.0), -1.0, 1.0, Tolerance::default()).unwrap();
        assert_abs_diff_eq!(est.value.re, s * (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_infinite_intervals() {
        assert!(integrate(|_| Complex64::new(1.0, 0.0), 0.0, f64::INFINITY, Tolerance::default()).is_err());
    }
}
