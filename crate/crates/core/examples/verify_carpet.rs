//! Carpet admissibility conditions for the builtin carpets and a few
//! hand-made patterns.
//!
//! ```text
//! cargo run --release --example verify_carpet
//! ```

use std::collections::BTreeSet;

use fractrace::geometry::verify_carpet_conditions;
use fractrace::presets::{builtin, carpet_pattern, standard_pattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in ["carpet3", "carpet4", "square3"] {
        let (l, pattern) = carpet_pattern(&builtin(name)?).ok_or("not a carpet")?;
        let r = verify_carpet_conditions(l, &pattern)?;
        println!("{name}: {r:?} all_pass={}", r.all_pass());
    }
    let checker: BTreeSet<Vec<usize>> = (0..3).flat_map(|x| (0..3).map(move |y| vec![x, y])).filter(|c| (c[0] + c[1]) % 2 == 0).collect();
    let r = verify_carpet_conditions(3, &checker)?;
    println!("checkerboard: {r:?} all_pass={}", r.all_pass());
    let r = verify_carpet_conditions(5, &standard_pattern(5, 1))?;
    println!("5x5 with centre hole: {r:?} all_pass={}", r.all_pass());
    Ok(())
}
