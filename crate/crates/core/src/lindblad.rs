//! Dense RK4 integrator for the Lindblad equation
//! `dρ/dt = -i[H, ρ] + V ρ V - ½{V², ρ}`,
//! the ensemble-average target of the collapse equation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::StateVector;

type Mat = DMatrix<Complex64>;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rhs(h: &Mat, v: &Mat, v2: &Mat, rho: &Mat) -> Mat {
    let i = Complex64::new(0.0, 1.0);
    let comm = h * rho - rho * h;
    let anti = v2 * rho + rho * v2;
    -(comm * i) + v * rho * v - anti * c(0.5)
}

fn hermitize(m: &Mat) -> Mat {
    (m + m.adjoint()) * c(0.5)
}

pub fn density_from_state(psi: &StateVector) -> Mat {
    let a = nalgebra::DVector::from_column_slice(psi.amplitudes());
    &a * a.adjoint()
}

/// `½ Σ |eig(a - b)|` for Hermitian `a`, `b`.
pub fn trace_distance(a: &Mat, b: &Mat) -> f64 {
    let d = hermitize(&(a - b));
    0.5 * d.symmetric_eigen().eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
}

/// Checks that `rho` is Hermitian, trace one and positive semidefinite to 1e-10.
pub fn validate_density(rho: &Mat) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::dim(rho.nrows(), rho.ncols(), "density matrix must be square"));
    }
    let herm_err = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm_err > 1e-10 {
        return Err(Error::NotHermitian(herm_err));
    }
    let tr = rho.trace();
    if (tr - c(1.0)).norm() > 1e-10 {
        return Err(Error::InvalidParameter(format!("density matrix trace {tr} != 1")));
    }
    let min = hermitize(rho)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::NegativeEigenvalue(min));
    }
    Ok(())
}

/// Integrates the Lindblad equation with classical RK4, symmetrizing every
/// step. Returns the `n_steps + 1` states `ρ(k dt)`.
pub fn lindblad_oracle(h: &Mat, v: &Mat, rho0: &Mat, dt: f64, n_steps: usize) -> Result<Vec<Mat>> {
    validate_density(rho0)?;
    let n = rho0.nrows();
    for (m, what) in [(h, "hamiltonian"), (v, "collapse operator")] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::dim(n, m.nrows(), what));
        }
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be finite and > 0".into()));
    }
    let v2 = v * v;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut rho = rho0.clone();
    out.push(rho.clone());
    let half = c(0.5 * dt);
    let full = c(dt);
    let sixth = c(dt / 6.0);
    for _ in 0..n_steps {
        let k1 = rhs(h, v, &v2, &rho);
        let k2 = rhs(h, v, &v2, &(&rho + &k1 * half));
        let k3 = rhs(h, v, &v2, &(&rho + &k2 * half));
        let k4 = rhs(h, v, &v2, &(&rho + &k3 * full));
        rho = hermitize(&(&rho + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * sixth));
        out.push(rho.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m2(a: [f64; 4]) -> Mat {
        DMatrix::from_row_slice(2, 2, &a.map(c))
    }

    #[test]
    fn unitary_case_keeps_spectrum() {
        let h = m2([0.3, 1.0, 1.0, -0.3]);
        let v = Mat::zeros(2, 2);
        let rho0 = m2([0.8, 0.1, 0.1, 0.2]);
        let ev0 = rho0.clone().symmetric_eigen().eigenvalues;
        let series = lindblad_oracle(&h, &v, &rho0, 1e-3, 2000).unwrap();
        let ev = series.last().unwrap().clone().symmetric_eigen().eigenvalues;
        let (mut a, mut b): (Vec<f64>, Vec<f64>) = (ev0.iter().copied().collect(), ev.iter().copied().collect());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn dephasing_fixes_diagonal_states() {
        let h = Mat::zeros(2, 2);
        let v = m2([0.7, 0.0, 0.0, -0.4]);
        let rho0 = m2([0.3, 0.0, 0.0, 0.7]);
        let series = lindblad_oracle(&h, &v, &rho0, 1e-2, 500).unwrap();
        assert!((series.last().unwrap() - &rho0).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn coherence_decays_at_closed_form_rate() {
        let (v0, v1) = (0.7, -0.4);
        let h = Mat::zeros(2, 2);
        let v = m2([v0, 0.0, 0.0, v1]);
        let rho0 = m2([0.5, 0.5, 0.5, 0.5]);
        let dt = 1e-3;
        let series = lindblad_oracle(&h, &v, &rho0, dt, 3000).unwrap();
        for (k, rho) in series.iter().enumerate().step_by(250) {
            let t = k as f64 * dt;
            let expect = 0.5 * (-(v0 - v1) * (v0 - v1) * t / 2.0).exp();
            assert_abs_diff_eq!(rho[(0, 1)].re, expect, epsilon = 1e-6);
            assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_invalid_initial_states() {
        let z = Mat::zeros(2, 2);
        assert!(matches!(
            lindblad_oracle(&z, &z, &m2([1.2, 0.0, 0.0, -0.2]), 1e-3, 1),
            Err(Error::NegativeEigenvalue(_))
        ));
        assert!(lindblad_oracle(&z, &z, &m2([0.5, 0.0, 0.0, 0.4]), 1e-3, 1).is_err());
        assert!(lindblad_oracle(&z, &z, &m2([0.5, 0.1, 0.0, 0.5]), 1e-3, 1).is_err());
    }

    #[test]
    fn trace_distance_of_orthogonal_pures_is_one() {
        assert_abs_diff_eq!(trace_distance(&m2([1.0, 0.0, 0.0, 0.0]), &m2([0.0, 0.0, 0.0, 1.0])), 1.0, epsilon = 1e-15);
    }
}
