//! Two particles on a ring: a light packet runs into a heavy one.
//!
//! Prints positions, the interaction-driven collapse operator and the
//! entanglement entropy between the particles as the collision proceeds.
//!
//!     cargo run --release --example collision -- [heavy_mass] [seed]

use collapse_lab::scenario::two_particle_collision;

fn main() -> collapse_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let mass: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(100.0);
    let seed: Option<u64> = args.next().and_then(|s| s.parse().ok());
    let sc = two_particle_collision(mass).build()?;
    for w in &sc.warnings {
        eprintln!("warning: {w}");
    }
    let rec = sc.run(seed)?;
    let x1 = rec.observable("x:p1")?.real();
    let x2 = rec.observable("x:p2")?.real();
    let v = rec.observable("vhat")?.real();
    let s = rec.entropy("p1|p2").unwrap_or(&[]);
    println!("{:>6} {:>9} {:>9} {:>10} {:>10}", "t", "x1", "x2", "<V>", "S(p1)");
    for k in 0..rec.times.len() {
        println!("{:>6.2} {:>9.4} {:>9.4} {:>10.4} {:>10.6}", rec.times[k], x1[k], x2[k], v[k], s.get(k).unwrap_or(&0.0));
    }
    match &rec.collapse {
        Some(e) => println!("collapsed onto {} at t = {}", e.branch, e.time),
        None => println!("no branch crossed the collapse threshold"),
    }
    Ok(())
}
