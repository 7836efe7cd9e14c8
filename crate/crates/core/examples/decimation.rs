//! Harmonic extension from the boundary keeps the renormalized energy fixed
//! across levels.
//!
//! ```text
//! cargo run --release --example decimation -- vicsek 5
//! ```

use fractrace::energy::{harmonic_from_boundary, EnergyForm};
use fractrace::graph::LevelGraph;
use fractrace::presets::builtin;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "gasket2".into());
    let top: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let p = builtin(&name)?;
    let rho = p.rho_value()?;
    let m = p.template_points().len();
    let b: Vec<f64> = (0..m).map(|k| (k as f64 * 1.7).sin()).collect();
    println!("boundary values {b:?}");
    for n in 0..=top {
        let g = LevelGraph::build(&p, n)?;
        let h = harmonic_from_boundary(&p, &g, &b)?;
        let e = EnergyForm::new(&g, rho)?.energy(&h)?;
        println!("n={n} vertices={} energy={e:.15}", g.n_vertices());
    }
    Ok(())
}
