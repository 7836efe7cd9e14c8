//! Scaling exponents for every builtin preset. Carpets use the resistance
//! estimate at a chosen level.
//!
//! ```text
//! cargo run --release --example exponents -- 2
//! ```

use fractrace::exponents::{compute_with_rho, rho_or_estimate};
use fractrace::presets::{builtin, BUILTIN};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let level: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2);
    println!("{:<10} {:>8} {:>9} {:>8} {:>8} {:>8}  a7", "preset", "rho", "source", "d_f", "d_w", "beta");
    for name in BUILTIN {
        let p = builtin(name)?;
        let (rho, source) = rho_or_estimate(&p, level)?;
        let e = compute_with_rho(&p, rho, source);
        println!("{name:<10} {:>8.5} {source:>9} {:>8.5} {:>8.5} {:>8.5}  {}", e.rho, e.d_f, e.d_w, e.beta, e.a7_holds);
    }
    Ok(())
}
