//! Ensemble-averaged projectors of a driven qubit against the Lindblad
//! equation `dρ/dt = -i[H,ρ] - ½[V,[V,ρ]]`.
//!
//!     cargo run --release --example lindblad_match -- [n_traj]

use std::sync::Arc;

use collapse_lab::integrator::{run_ensemble, Dynamics, IntegrationPlan};
use collapse_lab::lindblad::{density_from_state, lindblad_oracle, trace_distance};
use collapse_lab::{AssembledOperator, CompositeSpace, CsrMatrix, StateVector, SubsystemSpec};
use num_complex::Complex64;

fn main() -> collapse_lab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let space = Arc::new(CompositeSpace::new(vec![SubsystemSpec::discrete("q", 2, 1.0)])?);
    let one = Complex64::new(1.0, 0.0);
    let h = CsrMatrix::from_triplets(2, vec![(0, 1, one), (1, 0, one)]);
    let v = CsrMatrix::from_real_diagonal(&[1.0, -1.0]);
    let psi0 = StateVector::basis(space.clone(), 0)?;
    let d = Dynamics::new(
        AssembledOperator::new(space.clone(), h.clone())?,
        Some(AssembledOperator::new(space, v.clone())?),
        psi0.clone(),
    )?;
    let plan = IntegrationPlan::new(1e-3, 3000).record_every(300).with_states();
    let ens = run_ensemble(&d, &plan, n, 1)?;
    let rhos = lindblad_oracle(&h.to_dense(), &v.to_dense(), &density_from_state(&psi0), plan.dt, plan.n_steps)?;
    let means = ens.stats.mean_projectors.expect("states recorded");
    println!("{:>5} {:>10} {:>10} {:>10}", "t", "ρ00 (ens)", "ρ00 (ME)", "trace dist");
    for (k, m) in means.iter().enumerate() {
        let r = &rhos[k * plan.record_every];
        println!("{:>5.2} {:>10.5} {:>10.5} {:>10.5}", ens.stats.times[k], m[(0, 0)].re, r[(0, 0)].re, trace_distance(m, r));
    }
    Ok(())
}
