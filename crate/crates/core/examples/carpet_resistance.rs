//! Resistance scaling of carpets against the two-sided window for the
//! renormalization factor.
//!
//! ```text
//! cargo run --release --example carpet_resistance -- carpet3 4
//! ```

use fractrace::energy::estimate_rho;
use fractrace::exponents::carpet_rho_bounds;
use fractrace::presets::builtin;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "carpet3".into());
    let top: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let preset = builtin(&name)?;
    let l = (1.0 / preset.maps[0].scale).round() as u64;
    let (lo, hi) = carpet_rho_bounds(l, 2)?;
    println!("window for l={l}: [{lo}, {hi}]");
    let t = std::time::Instant::now();
    let est = estimate_rho(&preset, 1..=top)?;
    for e in &est {
        println!("n={} R_n={:.6} rho_hat={:.6}", e.level, e.resistance, e.rho_hat);
    }
    println!("elapsed {:.2?}", t.elapsed());
    Ok(())
}
