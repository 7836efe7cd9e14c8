//! The restriction side: trace terms `ρ^m E_(m)(Q_m h|_L)` against `ℰ(h)`, and
//! geometric decay of restricted energies towards `L`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyForm;
use crate::error::{Error, Result};
use crate::geometry::FractalPreset;
use crate::graph::LevelGraph;
use crate::solver::HarmonicSolver;
use crate::trace::{discrete_form, CellAverageVector, TraceLevel, TraceReadout};
use crate::word::all_words;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceInequalityReport {
    pub preset: String,
    pub rho: f64,
    pub energy: f64,
    /// `ρ^m E_(m)(Q_m h|_L)`, `m = 0..=n_max`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// `partial_sums / energy`; zero when the energy vanishes.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// `ρ^m E_(m)(Q_m)` for `m = 0..=n_max`, coarsening from the given averages.
pub fn trace_terms(preset: &FractalPreset, q: &CellAverageVector, rho: f64, n_max: usize) -> Result<Vec<f64>> {
    if q.level < n_max {
        return Err(Error::RefineDepth { depth: n_max, available: q.level });
    }
    let stack = q.stack(preset.n_trace());
    (0..=n_max)
        .map(|m| Ok(rho.powi(m as i32) * discrete_form(&stack[m], &TraceLevel::build(preset, m)?)? + 0.0))
        .collect()
}

pub fn report_from_terms(preset: &FractalPreset, rho: f64, energy: f64, terms: Vec<f64>) -> TraceInequalityReport {
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial_sums.push(acc);
    }
    let ratios: Vec<f64> = partial_sums.iter().map(|s| if energy > 0.0 { s / energy } else { 0.0 }).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    TraceInequalityReport { preset: preset.name.clone(), rho, energy, terms, partial_sums, ratios, max_ratio }
}

/// Trace terms of vertex values `h` on a level graph, against `ℰ(h)` on that graph.
pub fn trace_inequality_check(
    preset: &FractalPreset,
    g: &LevelGraph,
    h: &[f64],
    rho: f64,
    n_max: usize,
) -> Result<TraceInequalityReport> {
    if n_max > g.level {
        return Err(Error::InvalidInput(format!("n_max {n_max} above graph level {}", g.level)));
    }
    let energy = EnergyForm::new(g, rho)?.energy(h)?;
    let q = TraceReadout::new(preset, g)?.read(h);
    Ok(report_from_terms(preset, rho, energy, trace_terms(preset, &q, rho, n_max)?))
}

/// Data for one element of `ℋ(I^n, Φ(Î^n))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayData {
    /// Exterior values and trace means uniform in `[-1, 1]`.
    Random(u64),
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub n: usize,
    pub graph_level: usize,
    /// `ℰ_{Φ(Î^{n+b})}(h) / ℰ_{Φ(Î^n)}(h)` for `b = 1..=b_max`; empty when degenerate.
    pub ratios: Vec<f64>,
    /// `ℰ_{Φ(Î^n)}(h)` vanished.
    pub degenerate: bool,
    pub seed: Option<u64>,
}

/// Decay ratios for several instances on one graph, sharing a factorization.
///
/// `h` minimizes energy with values fixed off `K_{Φ(Î^n)}` and `Q_n h` pinned on `I^n`.
pub fn decay_check(preset: &FractalPreset, n: usize, b_max: usize, data: &[DecayData]) -> Result<Vec<DecayReport>> {
    if b_max == 0 {
        return Err(Error::InvalidInput("b_max must be at least 1".into()));
    }
    let rho = preset.rho_value()?;
    let g = LevelGraph::build(preset, n + b_max)?;
    let ihat_words = |m: usize| all_words(&preset.alphabet.ihat, m);
    let region = EnergyForm::new(&g, rho)?.restricted(preset, &ihat_words(n))?;
    let cells = region.restriction.as_ref().unwrap().cells.clone();
    let mut inside = vec![false; g.n_vertices()];
    g.mark_vertices(n, cells.iter().copied(), &mut inside);
    let fixed: Vec<u32> = (0..g.n_vertices() as u32).filter(|&v| !inside[v as usize]).collect();
    let rows = TraceReadout::new(preset, &g)?.rows_at(n);
    let solver = HarmonicSolver::new(&g.net, &fixed, &rows)?;
    let finer = (1..=b_max)
        .map(|b| EnergyForm::new(&g, rho)?.restricted(preset, &ihat_words(n + b)))
        .collect::<Result<Vec<_>>>()?;
    data.iter()
        .map(|d| {
            let (vals, targets, seed) = match *d {
                DecayData::Random(seed) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let v: Vec<f64> = fixed.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let t: Vec<f64> = rows.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
                    (v, t, Some(seed))
                }
                DecayData::Constant(c) => (vec![c; fixed.len()], vec![c; rows.len()], None),
            };
            let h = solver.solve(&vals, &targets)?;
            let base = region.energy(&h)?;
            let degenerate = base <= 1e-14 * (1.0 + vals.iter().map(|v| v * v).sum::<f64>());
            let ratios = if degenerate {
                Vec::new()
            } else {
                finer.iter().map(|f| Ok(f.energy(&h)? / base)).collect::<Result<Vec<_>>>()?
            };
            Ok(DecayReport { n, graph_level: g.level, ratios, degenerate, seed })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::harmonic_from_boundary;
    use crate::presets::builtin;

    #[test]
    fn constant_has_no_trace_terms() {
        let p = builtin("gasket2").unwrap();
        let g = LevelGraph::build(&p, 4).unwrap();
        let h = vec![2.0; g.n_vertices()];
        let r = trace_inequality_check(&p, &g, &h, 5.0 / 3.0, 4).unwrap();
        assert!(r.terms.iter().all(|&t| t == 0.0));
        assert_eq!(r.max_ratio, 0.0);
    }

    #[test]
    fn gasket_trace_terms_by_hand() {
        let p = builtin("gasket2").unwrap();
        let g = LevelGraph::build(&p, 1).unwrap();
        let h = harmonic_from_boundary(&p, &g, &[1.0, 0.0, 0.0]).unwrap();
        let r = trace_inequality_check(&p, &g, &h, 5.0 / 3.0, 1).unwrap();
        // Q_1 = (0.7, 0.2): ρ · 2 · 0.25
        assert!((r.terms[1] - 5.0 / 3.0 * 0.5).abs() < 1e-12);
        assert!((r.energy - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gasket_terms_match_harmonic_matrices() {
        // oracle: push boundary triples through the two bottom-row harmonic matrices
        let a0 = [[1.0, 0.0, 0.0], [0.4, 0.4, 0.2], [0.4, 0.2, 0.4]];
        let a1 = [[0.4, 0.4, 0.2], [0.0, 1.0, 0.0], [0.2, 0.4, 0.4]];
        let apply = |a: &[[f64; 3]; 3], v: &[f64; 3]| -> [f64; 3] {
            let mut o = [0.0; 3];
            for i in 0..3 {
                o[i] = (0..3).map(|j| a[i][j] * v[j]).sum();
            }
            o
        };
        let p = builtin("gasket2").unwrap();
        let rho = 5.0 / 3.0;
        let b = [0.3, -0.7, 0.2];
        let terms = trace_terms(&p, &crate::besov::harmonic_trace(&p, &b, 7).unwrap(), rho, 7).unwrap();
        let mut cells = vec![b];
        for _ in 0..7 {
            cells = cells.iter().flat_map(|c| [apply(&a0, c), apply(&a1, c)]).collect();
        }
        // Q_m: means of the deepest edge endpoints, then pairwise averages
        let mut means: Vec<f64> = cells.iter().map(|c| (c[0] + c[1]) / 2.0).collect();
        for m in (0..=7).rev() {
            let e: f64 = 2.0 * means.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum::<f64>();
            assert!((rho.powi(m as i32) * e - terms[m]).abs() < 1e-12, "m={m}");
            means = means.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        }
        // peak then geometric decay, so the partial sums converge
        assert!(terms[7] < terms[3] && terms[7] / terms[6] < 0.9);
    }

    #[test]
    fn decay_ratios_below_one() {
        let p = builtin("gasket2").unwrap();
        let data: Vec<DecayData> = (0..5).map(DecayData::Random).collect();
        for n in 1..=3 {
            for r in decay_check(&p, n, 2, &data).unwrap() {
                assert!(!r.degenerate);
                assert!(r.ratios.iter().all(|&x| x < 1.0 && x >= 0.0), "{r:?}");
                assert!(r.ratios[1] <= r.ratios[0]);
            }
        }
        let c = decay_check(&p, 2, 1, &[DecayData::Constant(0.5)]).unwrap();
        assert!(c[0].degenerate && c[0].ratios.is_empty());
    }
}
