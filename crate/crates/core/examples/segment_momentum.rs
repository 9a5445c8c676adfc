//! Momentum assigned to a detected segment of a freely spread packet:
//! closed form, quadrature, and the Richardson check under ε-halving.

use collapse_lab::wavepacket::*;

fn main() -> collapse_lab::Result<()> {
    let p = PacketParams::natural(1.0, 1.0, 2.0);
    let w = packet_width(&p);
    println!("width {w:.6}");
    println!("{:>6} {:>24} {:>10} {:>8}", "x_f", "closed", "rel dev", "ratio");
    for x_f in [-2.0, -0.5, 0.5, 1.0, 3.0] {
        let closed = postselected_momentum_closed(&p, &PostSelection { x_f, epsilon: w / 100.0 });
        let dev = |eps| -> collapse_lab::Result<f64> {
            let q = postselected_momentum_quadrature(&p, &PostSelection { x_f, epsilon: eps })?;
            Ok((q - closed).norm() / closed.norm())
        };
        let (d1, d2) = (dev(w / 100.0)?, dev(w / 200.0)?);
        println!("{x_f:>6.2} {:>24} {d1:>10.2e} {:>8.3}", format!("{:.5}", closed), d1 / d2);
    }
    let (r, theta) = polar_decomposition(postselected_momentum_closed(&p, &PostSelection { x_f: 1.0, epsilon: 0.01 }));
    println!("x_f = 1: r = {r:.6} (formula {:.6}), θ = {theta:.6}", momentum_modulus_formula(&p, 1.0));

    let e = PacketParams { a: 1e-10, m: ELECTRON_MASS_SI, hbar: HBAR_SI, t: 1e-6 };
    println!("electron, a = 1 Å, after 1 µs: width {:.4} m", packet_width(&e));
    Ok(())
}
