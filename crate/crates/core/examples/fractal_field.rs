//! Random walk on two glued fractal components: interface detection,
//! penetration, first-step symmetry and detailed balance.
//!
//! ```text
//! cargo run --release --example fractal_field -- 7
//! ```

use fractrace::field::{
    build_glued, carpet_pair, detailed_balance_score, first_step_split, random_walk, stationary_start, symmetric_gaskets,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);

    let sym = build_glued(&symmetric_gaskets(3))?;
    let mid = sym.vertex_near(0, &[0.5, 0.5])?;
    let (split, _) = first_step_split(&sym, mid, 100_000, seed)?;
    println!("two gaskets: {} vertices, first steps from the interface {split:?}", sym.n_vertices());

    let field = build_glued(&carpet_pair(2, 2))?;
    for (pair, verts) in &field.interfaces {
        println!("interface {pair:?}: {} vertices", verts.len());
    }
    for s in field.time_scales() {
        println!("{} level {}: rho={:.4} estimated={} walk scale={:.3}", s.preset, s.level, s.rho, s.rho_estimated, s.walk_scale);
    }
    let start = stationary_start(&field, seed);
    let w = random_walk(&field, start, 1_000_000, seed, true)?;
    println!("first hits {:?}, interface visits {}", w.first_hit, w.interface_visits);
    println!("detailed balance max z {:.2}", detailed_balance_score(&w));
    Ok(())
}
