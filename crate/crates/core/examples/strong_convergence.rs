//! Strong (pathwise) convergence of the Euler–Maruyama collapse step.
//!
//! One fine Brownian path is drawn per sample; coarser runs use sums of its
//! increments, so every resolution sees the same noise. The RMS distance to
//! the finest run is printed for each step size, for a QND two-level system
//! and for a driven qubit (`H = σx`, `V = σz`).
//!
//!     cargo run --release --example strong_convergence -- [paths]

use std::sync::Arc;

use collapse_lab::integrator::{Dynamics, IntegrationPlan};
use collapse_lab::scenario::qnd_two_level;
use collapse_lab::{AssembledOperator, CompositeSpace, CsrMatrix, NoiseKind, StateVector, SubsystemSpec};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RMS final-state error against the finest run, one entry per coarse step count.
fn strong_errors(d: &Dynamics, t_end: f64, coarse: &[usize], fine: usize, paths: usize) -> collapse_lab::Result<Vec<f64>> {
    let dt_fine = t_end / fine as f64;
    let mut sq = vec![0.0; coarse.len()];
    for path in 0..paths {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + path as u64);
        let incs: Vec<Complex64> = (0..fine).map(|_| NoiseKind::Complex.sample(&mut rng, dt_fine)).collect();
        let run = |n: usize| -> collapse_lab::Result<Vec<Complex64>> {
            let stride = fine / n;
            let plan = IntegrationPlan::new(t_end / n as f64, n).record_every(n);
            let rec = d.run_with_noise(&plan, 0, |k| incs[k * stride..(k + 1) * stride].iter().sum())?;
            Ok(rec.final_state.into_amplitudes())
        };
        let reference = run(fine)?;
        for (e, &n) in sq.iter_mut().zip(coarse) {
            let psi = run(n)?;
            *e += psi.iter().zip(&reference).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        }
    }
    Ok(sq.iter().map(|e| (e / paths as f64).sqrt()).collect())
}

fn driven_qubit() -> collapse_lab::Result<Dynamics> {
    let space = Arc::new(CompositeSpace::new(vec![SubsystemSpec::discrete("q", 2, 1.0)])?);
    let c = |x: f64| Complex64::new(x, 0.0);
    let sx = CsrMatrix::from_triplets(2, vec![(0, 1, c(1.0)), (1, 0, c(1.0))]);
    let sz = CsrMatrix::from_real_diagonal(&[1.0, -1.0]);
    let psi0 = StateVector::new(space.clone(), vec![c(1.0), c(0.0)])?;
    Dynamics::new(AssembledOperator::new(space.clone(), sx)?, Some(AssembledOperator::new(space, sz)?), psi0)
}

fn main() -> collapse_lab::Result<()> {
    let paths: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let coarse: Vec<usize> = (0..6).map(|k| 16usize << k).collect();
    let fine = 8192;
    let systems = [("qnd two-level", qnd_two_level(0.3).build()?.dynamics), ("driven qubit", driven_qubit()?)];
    for (name, d) in &systems {
        println!("{name} ({paths} paths, reference dt = 1/{fine})");
        println!("{:>10} {:>12} {:>8}", "dt", "rms error", "ratio");
        let errs = strong_errors(d, 1.0, &coarse, fine, paths)?;
        for (k, (e, n)) in errs.iter().zip(&coarse).enumerate() {
            let ratio = if k > 0 { format!("{:.3}", errs[k - 1] / e) } else { String::new() };
            println!("{:>10.3e} {:>12.4e} {:>8}", 1.0 / *n as f64, e, ratio);
        }
    }
    Ok(())
}
