//! Discrete Besov terms against the continuum integrals at the two distance
//! thresholds, for the gasket test corpus.
//!
//! ```text
//! cargo run --release --example besov_sandwich -- 7
//! ```

use fractrace::besov::{corpus, sandwich};
use fractrace::exponents::compute;
use fractrace::presets::builtin;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let top: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(6);
    let p = builtin("gasket2")?;
    let beta = compute(&p)?.beta;
    println!("beta = {beta:.6}");
    for (name, f) in corpus(&p, top + 3)? {
        let rows = sandwich(&p, &f, beta, top, 3)?;
        let s: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.ratio)).collect();
        println!("{name:<16} ratios {}", s.join(" "));
    }
    Ok(())
}
