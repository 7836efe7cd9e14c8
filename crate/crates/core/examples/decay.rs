//! Energy decay into the trace: minimal energies with boundary data pinned
//! away from the trace, for random data and constants.
//!
//! ```text
//! cargo run --release --example decay -- 4
//! ```

use fractrace::presets::builtin;
use fractrace::restriction::{decay_check, DecayData};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let top: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let p = builtin("gasket2")?;
    let data = [DecayData::Random(1), DecayData::Random(2), DecayData::Constant(1.0)];
    for n in 1..=top {
        for r in decay_check(&p, n, 2, &data)? {
            let s: Vec<String> = r.ratios.iter().map(|x| format!("{x:.4}")).collect();
            println!("n={n} graph level={} seed={:?} degenerate={} ratios [{}]", r.graph_level, r.seed, r.degenerate, s.join(", "));
        }
    }
    Ok(())
}
