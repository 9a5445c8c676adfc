//! Free spreading of a Gaussian on a lattice against the continuum width.

use collapse_lab::scenario::free_packet;
use collapse_lab::wavepacket::{packet_width, PacketParams};

fn main() -> collapse_lab::Result<()> {
    let cfg = free_packet();
    let rec = cfg.build()?.run(None)?;
    let dx = rec.observable("dx:x")?.real();
    println!("{:>6} {:>10} {:>10} {:>9}", "t", "lattice", "continuum", "rel");
    for (t, w) in rec.times.iter().zip(&dx) {
        let exact = packet_width(&PacketParams::natural(1.0, 1.0, *t));
        println!("{t:>6.2} {w:>10.5} {exact:>10.5} {:>9.2e}", w / exact - 1.0);
    }
    Ok(())
}
