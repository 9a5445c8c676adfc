//! Outcome frequencies of a QND two-level measurement against `|c0|²`.
//!
//!     cargo run --release --example born_rule -- [n_traj]

use collapse_lab::integrator::run_ensemble;
use collapse_lab::scenario::qnd_two_level;

fn main() -> collapse_lab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    println!("{:>6} {:>10} {:>10} {:>8}", "p0", "freq(q=0)", "3 SE", "none");
    for p0 in [0.1, 0.3, 0.5, 0.8] {
        let sc = qnd_two_level(p0).build()?;
        let ens = run_ensemble(&sc.dynamics, sc.plan(), n, 1)?;
        let band = 3.0 * (p0 * (1.0 - p0) / n as f64).sqrt();
        println!(
            "{p0:>6.2} {:>10.4} {band:>10.4} {:>8.4}",
            ens.stats.frequency("q=0"),
            ens.stats.frequency("none")
        );
    }
    Ok(())
}
