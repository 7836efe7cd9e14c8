//! Trace terms of harmonic functions against their energy, on the gasket and
//! on the Vicsek set where the trace sum does not stay bounded.
//!
//! ```text
//! cargo run --release --example trace_inequality -- 8
//! ```

use fractrace::besov::harmonic_trace;
use fractrace::presets::builtin;
use fractrace::restriction::trace_terms;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let depth: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    for (name, b) in [("gasket2", vec![0.3, -0.7, 0.2]), ("vicsek", vec![0.0, 0.5, 1.0, 0.5])] {
        let p = builtin(name)?;
        let rho = p.rho_value()?;
        let q = harmonic_trace(&p, &b, depth)?;
        let terms = trace_terms(&p, &q, rho, depth)?;
        let mut sum = 0.0;
        println!("{name}:");
        for (m, t) in terms.iter().enumerate() {
            sum += t;
            println!("  m={m} term={t:.6} partial={sum:.6}");
        }
    }
    Ok(())
}
