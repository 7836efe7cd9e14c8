//! Whitney-type extension of trace data on the gasket: round trip, energy
//! against the discrete trace norm, and bump energies.
//!
//! ```text
//! cargo run --release --example extension -- gasket2 6
//! ```

use fractrace::besov::{cell_average, corpus};
use fractrace::exponents::compute;
use fractrace::presets::builtin;
use fractrace::whitney::{extension_report, Extension};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "gasket2".into());
    let top: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let preset = builtin(&name)?;
    let e = compute(&preset)?;
    let fs = corpus(&preset, top + 8)?;
    for n in 1..=top {
        let t = std::time::Instant::now();
        let ext = Extension::build(&preset, n)?;
        let built = t.elapsed();
        print!("n={n} |Ω|={} vertices={} build={built:.2?}", ext.cover.len(), ext.graph.n_vertices());
        for (fname, f) in &fs {
            let q = cell_average(&preset, f, n)?;
            let (_, r) = extension_report(&preset, &ext, &q, e.beta, e.rho)?;
            print!(" {fname}={:.4}", r.ratio);
            assert!(r.roundtrip_error < 1e-10);
        }
        println!();
        let bumps: Vec<String> = (0..ext.cover.len())
            .filter(|&k| ext.cover.omega[k].letters().iter().skip(1).all(|&l| l == 1) && ext.cover.omega[k].letters().first() == Some(&0))
            .map(|k| format!("{}:{:.4}", ext.cover.omega[k], ext.bump_energy(k, e.rho).unwrap() / e.rho.powi(ext.cover.omega[k].level() as i32)))
            .collect();
        println!("   bump energy / rho^|w| along 01..1: {}", bumps.join(" "));
        if n <= 4 {
            println!("   separation l={} distance constants={:?}", ext.separation_depth(), ext.distance_constants(&preset));
        }
    }
    Ok(())
}
