//! A spin-½ coupled to a pointer: the pointer drifts up or down and the
//! spin collapses with it.

use collapse_lab::scenario::stern_gerlach;

fn main() -> collapse_lab::Result<()> {
    let sc = stern_gerlach().build()?;
    for seed in 1..=6 {
        let rec = sc.run(Some(seed))?;
        let x = rec.observable("x:z")?.real();
        let dx = rec.observable("dx:z")?.real();
        let p_up = rec.branch_weight("s=0").map(|w| *w.last().unwrap()).unwrap_or(f64::NAN);
        println!(
            "seed {seed}: pointer {:.3} -> {:.3} (spread {:.3}), P(up) {p_up:.4}, outcome {}",
            x[0],
            x[x.len() - 1],
            dx[dx.len() - 1],
            rec.terminal_branch.as_deref().unwrap_or("none")
        );
    }
    Ok(())
}
