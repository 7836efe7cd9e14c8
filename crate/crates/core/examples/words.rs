//! Word calculus on the Pentakun alphabet: reduction to canonical addresses
//! and combinatorial neighbourhoods.
//!
//! ```text
//! cargo run --release --example words -- 6153
//! ```

use std::collections::BTreeSet;

use fractrace::geometry::LevelCells;
use fractrace::presets::builtin;
use fractrace::word::{neighborhood, reduce, Word};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = std::env::args().nth(1).unwrap_or_else(|| "6153".into());
    let letters: Vec<u8> = raw.chars().map(|c| c.to_digit(10).map(|d| d as u8).ok_or("digits only")).collect::<Result<_, _>>()?;
    let preset = builtin("pentakun")?;
    let spec = &preset.alphabet;
    println!("S={:?} I={:?} W-letters={} group order={}", spec.s, spec.i, spec.w_size, spec.group.order());
    let w = Word::new(letters);
    let r = reduce(spec, &w)?;
    println!("{w} reduces to {} with isometry {}", r.canonical, r.isometry);

    let n = r.canonical.level().min(3);
    let cells = LevelCells::build(&preset, n)?;
    let a: BTreeSet<Word> = [r.canonical.prefix(n)].into();
    for k in 0..=3 {
        let nb = neighborhood(&a, k, &cells)?;
        println!("N_{k} of {} has {} cells", r.canonical.prefix(n), nb.len());
    }
    Ok(())
}
