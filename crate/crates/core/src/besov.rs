//! Cell averages `Q_n`, the discrete form `E_(n)`, and Besov term sequences
//! (discrete and continuum) on the trace set, plus the fixed test corpus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::HarmonicRefinement;
use crate::error::{Error, Result};
use crate::geometry::{FractalPreset, V3};
use crate::trace::{close_pairs, discrete_form, max_depth, CellAverageVector, TraceLevel};

/// A function on `L` that `Q_n` can be applied to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// `grad · x + offset` in Euclidean ambient coordinates.
    Affine { grad: V3, offset: f64 },
    /// Piecewise linear in the segment parameter `t ∈ [0, 1]`; constant beyond the end knots.
    Piecewise { knots: Vec<(f64, f64)> },
    /// Averages at some depth, coarsened on demand.
    Averages { averages: CellAverageVector },
}

/// Integrals of a piecewise-linear function from its left end.
struct PlIntegral<'a> {
    knots: &'a [(f64, f64)],
    cum: Vec<f64>,
}

impl<'a> PlIntegral<'a> {
    fn new(knots: &'a [(f64, f64)]) -> Self {
        let mut cum = vec![0.0];
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            cum.push(cum.last().unwrap() + (b.0 - a.0) * (a.1 + b.1) / 2.0);
        }
        PlIntegral { knots, cum }
    }

    /// `∫_{t_0}^{t} f`, with constant extension outside the knots.
    fn at(&self, t: f64) -> f64 {
        let k = self.knots;
        let (first, last) = (k[0], k[k.len() - 1]);
        if t <= first.0 {
            return (t - first.0) * first.1;
        }
        if t >= last.0 {
            return self.cum[k.len() - 1] + (t - last.0) * last.1;
        }
        let i = k.partition_point(|p| p.0 <= t) - 1;
        let (a, b) = (k[i], k[i + 1]);
        let s = if b.0 > a.0 { (t - a.0) / (b.0 - a.0) } else { 0.0 };
        let ft = a.1 + s * (b.1 - a.1);
        self.cum[i] + (t - a.0) * (a.1 + ft) / 2.0
    }
}

fn check_knots(knots: &[(f64, f64)]) -> Result<()> {
    if knots.is_empty() || knots.windows(2).any(|w| w[1].0 < w[0].0) || knots.iter().any(|k| !k.0.is_finite() || !k.1.is_finite()) {
        return Err(Error::InvalidInput("knots must be finite and sorted by parameter".into()));
    }
    Ok(())
}

/// `Q_n f` on the level-`n` trace cells.
pub fn cell_average(preset: &FractalPreset, f: &TestFunction, n: usize) -> Result<CellAverageVector> {
    let n_i = preset.n_trace();
    match f {
        TestFunction::Constant { value } => Ok(CellAverageVector { level: n, values: vec![*value; checked_count(n_i, n)?] }),
        TestFunction::Affine { grad, offset } => {
            let t = TraceLevel::geometry(preset, n)?;
            let values = t.centers.iter().map(|c| grad[0] * c[0] + grad[1] * c[1] + grad[2] * c[2] + offset).collect();
            Ok(CellAverageVector { level: n, values })
        }
        TestFunction::Piecewise { knots } => {
            check_knots(knots)?;
            let t = TraceLevel::geometry(preset, n)?;
            let params = t
                .params
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("piecewise functions need a segment trace".into()))?;
            let pl = PlIntegral::new(knots);
            let values = params.iter().map(|&(a, b)| (pl.at(b) - pl.at(a)) / (b - a)).collect();
            Ok(CellAverageVector { level: n, values })
        }
        TestFunction::Averages { averages } => {
            if averages.level < n {
                return Err(Error::RefineDepth { depth: n, available: averages.level });
            }
            let mut v = averages.clone();
            while v.level > n {
                v = v.coarsen(n_i);
            }
            Ok(v)
        }
    }
}

fn checked_count(n_i: usize, n: usize) -> Result<usize> {
    if n > max_depth(n_i) {
        return Err(Error::RefineDepth { depth: n, available: max_depth(n_i) });
    }
    Ok(n_i.pow(n as u32))
}

/// A term sequence with its `ℓ²` and `ℓ^∞` aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovSeq {
    pub beta: f64,
    pub terms: Vec<f64>,
    pub l2: f64,
    pub linf: f64,
}

impl BesovSeq {
    pub fn from_terms(beta: f64, terms: Vec<f64>) -> Self {
        let l2 = terms.iter().map(|t| t * t).sum::<f64>().sqrt();
        let linf = terms.iter().copied().fold(0.0, f64::max);
        BesovSeq { beta, terms, l2, linf }
    }
}

/// `α^{nβ} (α^{-nd} E_(n)(Q_n f))^{1/2}` for `n = 0..=n_max`.
pub fn besov_terms(preset: &FractalPreset, f: &TestFunction, beta: f64, n_max: usize) -> Result<BesovSeq> {
    let stack = cell_average(preset, f, n_max)?.stack(preset.n_trace());
    let terms = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let t = TraceLevel::build(preset, n)?;
            discrete_term(preset, &stack[n], &t, beta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BesovSeq::from_terms(beta, terms))
}

/// One discrete term from averages and trace adjacency at the same level.
pub fn discrete_term(preset: &FractalPreset, q: &CellAverageVector, t: &TraceLevel, beta: f64) -> Result<f64> {
    let n = q.level as i32;
    let e = discrete_form(q, t)?;
    Ok(preset.alpha().powf(n as f64 * beta) * (e / (preset.n_trace() as f64).powi(n)).sqrt())
}

/// `∫∫_{d(x,y) < c α^{-n}} (f(x) - f(y))² dν dν`, by cell pairs at depth `n + refine_k`.
pub fn continuum_integral(preset: &FractalPreset, q: &CellAverageVector, centers: &[V3], c: f64, n: usize) -> f64 {
    let r = c * preset.alpha().powi(-(n as i32));
    let w = (preset.n_trace() as f64).powi(-2 * q.level as i32);
    let s: f64 = close_pairs(centers, r)
        .iter()
        .map(|&(a, b)| (q.values[a as usize] - q.values[b as usize]).powi(2))
        .sum();
    2.0 * w * s
}

/// `α^{nβ} (α^{nd} ∫∫_{d<cα^{-n}} (f(x)-f(y))²)^{1/2}` for `n = 0..=n_max`.
pub fn continuum_terms(
    preset: &FractalPreset,
    f: &TestFunction,
    beta: f64,
    c: f64,
    n_max: usize,
    refine_k: usize,
) -> Result<BesovSeq> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("distance constant must be positive, got {c}")));
    }
    let n_i = preset.n_trace();
    let depth = n_max + refine_k;
    let stack = cell_average(preset, f, depth)?.stack(n_i);
    let deep = TraceLevel::geometry(preset, depth)?.centers;
    let mut centers = vec![deep];
    for _ in 0..n_max {
        let prev = centers.last().unwrap();
        let next: Vec<V3> = prev
            .chunks(n_i)
            .map(|ch| {
                let mut m = [0.0; 3];
                for x in ch {
                    for k in 0..3 {
                        m[k] += x[k] / n_i as f64;
                    }
                }
                m
            })
            .collect();
        centers.push(next);
    }
    centers.reverse();
    let terms = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let integral = continuum_integral(preset, &stack[n + refine_k], &centers[n], c, n);
            preset.alpha().powf(n as f64 * beta) * ((n_i as f64).powi(n as i32) * integral).sqrt()
        })
        .collect();
    Ok(BesovSeq::from_terms(beta, terms))
}

/// Values of the harmonic function with the given template boundary values on the
/// anchors of every `I^depth` trace cell, averaged per cell.
pub fn harmonic_trace(preset: &FractalPreset, boundary: &[f64], depth: usize) -> Result<CellAverageVector> {
    checked_count(preset.n_trace(), depth)?;
    let refine = HarmonicRefinement::new(preset)?;
    let tpl = preset.template_points();
    if boundary.len() != tpl.len() {
        return Err(Error::InvalidInput(format!("{} boundary values for {} points", boundary.len(), tpl.len())));
    }
    // each trace letter acts as F_s ∘ G_g: child values of s, permuted by G_g
    let mut letters = Vec::new();
    for &l in &preset.alphabet.i {
        let (s, g) = preset.alphabet.isometry[l as usize];
        let pos = preset.alphabet.s_pos(s).expect("isometry target in S");
        let ga = preset.group_affine(g);
        let perm = tpl
            .iter()
            .map(|p| {
                let q = ga.apply(p);
                tpl.iter()
                    .position(|r| crate::geometry::dist(r, &q) < 1e-9)
                    .ok_or_else(|| Error::InvalidPreset("group element does not permute the template".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        letters.push((pos, perm));
    }
    let mut level = vec![boundary.to_vec()];
    for _ in 0..depth {
        level = level
            .par_iter()
            .flat_map_iter(|v| {
                letters.iter().map(|(pos, perm)| {
                    let ch = refine.child(v, *pos);
                    perm.iter().map(|&j| ch[j]).collect::<Vec<f64>>()
                })
            })
            .collect();
    }
    let anchors = &preset.trace.anchors;
    let values = level.iter().map(|v| anchors.iter().map(|&a| v[a]).sum::<f64>() / anchors.len() as f64).collect();
    Ok(CellAverageVector { level: depth, values })
}

/// Indicator of trace cell `j` at level `k`, ramped linearly to zero across one
/// cell width on either side.
pub fn smoothed_indicator(preset: &FractalPreset, k: usize, j: usize) -> Result<TestFunction> {
    let t = TraceLevel::geometry(preset, k)?;
    let params = t.params.ok_or_else(|| Error::InvalidInput("smoothed indicators need a segment trace".into()))?;
    let &(a, b) = params.get(j).ok_or_else(|| Error::InvalidInput(format!("no trace cell {j} at level {k}")))?;
    let h = b - a;
    let mut knots = Vec::new();
    if a > 0.0 {
        knots.push(((a - h).max(0.0), 0.0));
    }
    knots.push((a, 1.0));
    knots.push((b, 1.0));
    if b < 1.0 {
        knots.push(((b + h).min(1.0), 0.0));
    }
    Ok(TestFunction::Piecewise { knots })
}

/// The fixed test corpus: constants, affine functions, smoothed indicators (segment
/// traces only) and traces of harmonic functions (template presets only).
pub fn corpus(preset: &FractalPreset, depth: usize) -> Result<Vec<(String, TestFunction)>> {
    let mut out = vec![
        ("constant".to_string(), TestFunction::Constant { value: 1.0 }),
        ("x".to_string(), TestFunction::Affine { grad: [1.0, 0.0, 0.0], offset: 0.0 }),
        ("affine".to_string(), TestFunction::Affine { grad: [0.3, 0.7, 0.0], offset: -0.2 }),
    ];
    if preset.trace.segment.is_some() {
        for (k, j) in [(1usize, 0usize), (2, 1), (3, 3)] {
            if j < preset.n_trace().pow(k as u32) {
                out.push((format!("bump_{k}_{j}"), smoothed_indicator(preset, k, j)?));
            }
        }
    }
    if !preset.is_cells() {
        let m = preset.template_points().len();
        for (name, b) in [
            ("harmonic_e0", (0..m).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect::<Vec<_>>()),
            ("harmonic_last", (0..m).map(|i| if i + 1 == m { 1.0 } else { 0.0 }).collect()),
            ("harmonic_mixed", (0..m).map(|i| ((i as f64) * 1.3 + 0.4).sin()).collect()),
        ] {
            out.push((name.to_string(), TestFunction::Averages { averages: harmonic_trace(preset, &b, depth)? }));
        }
    }
    Ok(out)
}

/// Discrete and continuum terms side by side for one function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub n: usize,
    pub discrete: f64,
    pub continuum_k1: f64,
    pub continuum_k2: f64,
    /// `discrete / continuum_k1`, `NaN` when both vanish.
    pub ratio: f64,
}

pub fn sandwich(preset: &FractalPreset, f: &TestFunction, beta: f64, n_max: usize, refine_k: usize) -> Result<Vec<SandwichRow>> {
    let d = besov_terms(preset, f, beta, n_max)?;
    let c1 = continuum_terms(preset, f, beta, preset.k1, n_max, refine_k)?;
    let c2 = continuum_terms(preset, f, beta, preset.k2, n_max, refine_k)?;
    Ok((0..=n_max)
        .map(|n| SandwichRow {
            n,
            discrete: d.terms[n],
            continuum_k1: c1.terms[n],
            continuum_k2: c2.terms[n],
            ratio: d.terms[n] / c1.terms[n] + 0.0,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::compute;
    use crate::presets::builtin;

    fn gasket() -> FractalPreset {
        builtin("gasket2").unwrap()
    }

    #[test]
    fn averages_of_simple_functions() {
        let p = gasket();
        let q = cell_average(&p, &TestFunction::Constant { value: 2.5 }, 3).unwrap();
        assert!(q.values.iter().all(|&v| v == 2.5));
        let x = TestFunction::Affine { grad: [1.0, 0.0, 0.0], offset: 0.0 };
        assert_eq!(cell_average(&p, &x, 1).unwrap().values, vec![0.25, 0.75]);
        let pl = TestFunction::Piecewise { knots: vec![(0.0, 0.0), (1.0, 1.0)] };
        assert_eq!(cell_average(&p, &pl, 1).unwrap().values, vec![0.25, 0.75]);
        // x² through a fine PL interpolant vs the exact cell integrals
        let knots: Vec<(f64, f64)> = (0..=1024).map(|k| (k as f64 / 1024.0, (k as f64 / 1024.0).powi(2))).collect();
        let q = cell_average(&p, &TestFunction::Piecewise { knots }, 2).unwrap();
        for (k, v) in q.values.iter().enumerate() {
            let (a, b) = (k as f64 / 4.0, (k + 1) as f64 / 4.0);
            let exact = (b.powi(3) - a.powi(3)) / 3.0 / (b - a);
            assert!((v - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn coarsening_reproduces_parents() {
        let p = gasket();
        let f = smoothed_indicator(&p, 2, 1).unwrap();
        let fine = cell_average(&p, &f, 6).unwrap();
        for n in 0..6 {
            let direct = cell_average(&p, &f, n).unwrap();
            let mut c = fine.clone();
            while c.level > n {
                c = c.coarsen(2);
            }
            for (a, b) in c.values.iter().zip(&direct.values) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        let too_deep = TestFunction::Averages { averages: fine };
        assert!(matches!(cell_average(&p, &too_deep, 7), Err(Error::RefineDepth { .. })));
    }

    #[test]
    fn linear_function_terms_are_flat_at_beta_one() {
        let p = gasket();
        let x = TestFunction::Affine { grad: [1.0, 0.0, 0.0], offset: 0.0 };
        let s = besov_terms(&p, &x, 1.0, 8).unwrap();
        // a_n² = 2 (2^n - 1) 4^{-n} 2^{-n} 4^n = 2 (1 - 2^{-n})
        for (n, t) in s.terms.iter().enumerate() {
            let exact = (2.0 * (1.0 - 0.5f64.powi(n as i32))).sqrt();
            assert!((t - exact).abs() < 1e-12, "n={n}");
        }
        assert!(s.linf <= s.l2);
        let zero = besov_terms(&p, &TestFunction::Constant { value: 3.0 }, 0.7, 5).unwrap();
        assert!(zero.terms.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let p = gasket();
        let x = TestFunction::Affine { grad: [1.0, 0.0, 0.0], offset: 0.0 };
        for depth in [3usize, 6, 9] {
            let h = 0.5f64.powi(depth as i32);
            let q = cell_average(&p, &x, depth).unwrap();
            let centers = TraceLevel::geometry(&p, depth).unwrap().centers;
            // c ≥ 1 covers the whole square; cell averages lose the within-cell variance h²/6
            let quad = continuum_integral(&p, &q, &centers, 1.5, 0);
            assert!((quad + h * h / 6.0 - 1.0 / 6.0).abs() < 1e-12);
            let c: f64 = 0.5;
            let exact = 2.0 * (c.powi(3) / 3.0 - c.powi(4) / 4.0);
            let quad = continuum_integral(&p, &q, &centers, c, 0);
            assert!((quad - exact).abs() < 2.0 * h, "depth {depth}: {quad} vs {exact}");
        }
    }

    #[test]
    fn discrete_form_below_continuum_k2() {
        let p = gasket();
        let e = compute(&p).unwrap();
        for (name, f) in corpus(&p, 12).unwrap() {
            let stack = cell_average(&p, &f, 9).unwrap().stack(2);
            for n in 0..=6 {
                let t = TraceLevel::build(&p, n).unwrap();
                let lhs = discrete_form(&stack[n], &t).unwrap();
                let centers = TraceLevel::geometry(&p, n + 3).unwrap().centers;
                let integral = continuum_integral(&p, &stack[n + 3], &centers, p.k2, n);
                let rhs = p.alpha().powf(2.0 * n as f64 * e.d) * integral;
                assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "{name} n={n}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn harmonic_trace_of_gasket() {
        let p = gasket();
        // bottom midpoint gets 2/5 from each bottom corner, 1/5 from the top
        let h = harmonic_trace(&p, &[1.0, 0.0, 0.0], 1).unwrap();
        assert!((h.values[0] - 0.7).abs() < 1e-14 && (h.values[1] - 0.2).abs() < 1e-14);
        let a = harmonic_trace(&p, &[1.0, 0.0, 0.0], 6).unwrap();
        assert!((a.coarsen(2).coarsen(2).coarsen(2).values.iter().sum::<f64>() / 8.0 - a.values.iter().sum::<f64>() / 64.0).abs() < 1e-14);
        // the top corner contributes 1/5 at the bottom midpoint
        let top = harmonic_trace(&p, &[0.0, 0.0, 1.0], 1).unwrap();
        assert!((top.values[0] - 0.1).abs() < 1e-14 && (top.values[1] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn pentakun_harmonic_trace_is_consistent() {
        let p = builtin("pentakun").unwrap();
        let b = [0.3, -0.1, 0.8, 0.2, 0.5];
        let h3 = harmonic_trace(&p, &b, 3).unwrap();
        let h4 = harmonic_trace(&p, &b, 4).unwrap();
        // anchor means only approximate averages; refinement changes them little
        let c = h4.coarsen(4);
        let err = c.values.iter().zip(&h3.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn sandwich_on_gasket_is_stable() {
        let p = gasket();
        let beta = compute(&p).unwrap().beta;
        for (name, f) in corpus(&p, 14).unwrap().into_iter().skip(1) {
            let rows = sandwich(&p, &f, beta, 8, 3).unwrap();
            let r: Vec<f64> = rows[2..].iter().map(|r| r.ratio).collect();
            let (lo, hi) = (r.iter().copied().fold(f64::MAX, f64::min), r.iter().copied().fold(0.0, f64::max));
            assert!(lo > 0.0 && hi / lo <= 4.0, "{name}: {r:?}");
        }
    }
}
