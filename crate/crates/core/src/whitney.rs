//! Whitney-type cover of `K ∖ L`, graph-harmonic bump functions, the partition of
//! unity they induce, and the extension operator `ξ^(n)`.
//!
//! Index sets live on `S`-cells: for a trace word `w` of level `m < n`,
//! `A_w = 𝒩_2(Φw)·S ∖ 𝒩_2(Φ(I^{m+1}))` and `B_w = 𝒩_3(Φw)·S ∖ 𝒩_1(Φ(I^{m+1}))`;
//! at the terminal level `m = n` the hatted sets `𝒩_2(Φw)·S` and `𝒩_3(Φw)·S` are used.
//! Bumps and the extension are evaluated on the level-`n + 2` graph.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyForm;
use crate::error::{Error, Result};
use crate::geometry::{dist, FractalPreset, LevelCells};
use crate::graph::LevelGraph;
use crate::graph::Network;
use crate::solver::HarmonicSolver;
use crate::trace::{CellAverageVector, TraceReadout};
use crate::word::{all_words, reduce, Word};

#[derive(Clone, Debug)]
pub struct WhitneyCover {
    pub n: usize,
    /// `Ω^(n) = ∪_{m≤n} I^m`, level by level in word order.
    pub omega: Vec<Word>,
    /// `Φ(w)` as a cell index at level `|w|`.
    pub canonical: Vec<usize>,
    /// Cell indices at level `|w| + 1`; hatted at the terminal level.
    pub a_sets: Vec<BTreeSet<usize>>,
    pub b_sets: Vec<BTreeSet<usize>>,
    /// `B̂_w = 𝒩_3(Φw)·S` for every `w`, used by the separation check.
    pub b_hat: Vec<BTreeSet<usize>>,
}

fn children(set: &BTreeSet<usize>, n_s: usize) -> BTreeSet<usize> {
    set.iter().flat_map(|&c| c * n_s..(c + 1) * n_s).collect()
}

impl WhitneyCover {
    pub fn build(preset: &FractalPreset, n: usize) -> Result<Self> {
        crate::geometry::check_level(n + 1)?;
        let n_s = preset.n_cells();
        let mut levels: Vec<LevelCells> = Vec::with_capacity(n + 2);
        for m in 0..=n + 1 {
            levels.push(LevelCells::build(preset, m)?);
        }
        let canon = |m: usize, w: &Word| -> Result<usize> {
            let c = reduce(&preset.alphabet, w)?.canonical;
            Ok(levels[m].cell_index(&c).expect("canonical words index S^m"))
        };
        let mut cover = WhitneyCover {
            n,
            omega: Vec::new(),
            canonical: Vec::new(),
            a_sets: Vec::new(),
            b_sets: Vec::new(),
            b_hat: Vec::new(),
        };
        for m in 0..=n {
            let next: BTreeSet<usize> =
                all_words(&preset.alphabet.i, m + 1).iter().map(|w| canon(m + 1, w)).collect::<Result<_>>()?;
            let near1 = levels[m + 1].expand(&next, 1);
            let near2 = levels[m + 1].expand(&next, 2);
            for w in all_words(&preset.alphabet.i, m) {
                let c = canon(m, &w)?;
                let one: BTreeSet<usize> = [c].into_iter().collect();
                let n2 = children(&levels[m].expand(&one, 2), n_s);
                let n3 = children(&levels[m].expand(&one, 3), n_s);
                let (a, b) = if m == n {
                    (n2, n3.clone())
                } else {
                    (n2.difference(&near2).copied().collect(), n3.difference(&near1).copied().collect())
                };
                cover.omega.push(w);
                cover.canonical.push(c);
                cover.a_sets.push(a);
                cover.b_sets.push(b);
                cover.b_hat.push(n3);
            }
        }
        Ok(cover)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Position of `w` in `omega`.
    pub fn index_of(&self, w: &Word, n_i: usize, i: &[u8]) -> Option<usize> {
        if w.level() > self.n {
            return None;
        }
        let offset: usize = (0..w.level()).map(|m| n_i.pow(m as u32)).sum();
        crate::word::word_index(i, w).map(|k| offset + k)
    }

    /// `A_w ⊆ B_w`, and no `A_w` cell meets a cell outside `B_w`.
    pub fn check_nesting(&self, preset: &FractalPreset) -> Result<bool> {
        let mut levels = HashMap::new();
        for (k, w) in self.omega.iter().enumerate() {
            let m = w.level() + 1;
            if !levels.contains_key(&m) {
                levels.insert(m, LevelCells::build(preset, m)?);
            }
            let a = &self.a_sets[k];
            if !a.is_subset(&self.b_sets[k]) || !levels[&m].expand(a, 1).is_subset(&self.b_sets[k]) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Bumps `φ_w`, the partition of unity and `ξ^(n)` on one graph.
#[derive(Clone, Debug)]
pub struct Extension {
    pub cover: WhitneyCover,
    pub graph: LevelGraph,
    /// Sparse `φ_w`: positive values only.
    pub bumps: Vec<Vec<(u32, f64)>>,
    /// `Σ_w φ_w` per vertex.
    pub denominators: Vec<f64>,
    pub readout: TraceReadout,
    /// Vertices on `L` and the induced subgraph in local numbering.
    trace_vertices: Vec<u32>,
    trace_net: Network,
    trace_rows: Vec<Vec<(u32, f64)>>,
}

fn marks(g: &LevelGraph, level: usize, set: &BTreeSet<usize>) -> Vec<bool> {
    let mut m = vec![false; g.n_vertices()];
    g.mark_vertices(level, set.iter().copied(), &mut m);
    m
}

/// `1` on `K_A`, `0` on `K_{W∖B}`, harmonic in between.
fn bump(g: &LevelGraph, level: usize, a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> Result<Vec<(u32, f64)>> {
    let in_a = marks(g, level, a);
    let outside: BTreeSet<usize> = (0..g.n_letters().pow(level as u32)).filter(|c| !b.contains(c)).collect();
    let in_out = marks(g, level, &outside);
    if in_a.iter().zip(&in_out).any(|(&x, &y)| x && y) {
        return Err(Error::Infeasible("a bump core meets the complement of its support".into()));
    }
    let is_free = |v: u32| !in_a[v as usize] && !in_out[v as usize];
    let free: Vec<u32> = (0..g.n_vertices() as u32).filter(|&v| is_free(v)).collect();
    let mut out: Vec<(u32, f64)> = (0..g.n_vertices() as u32).filter(|&v| in_a[v as usize]).map(|v| (v, 1.0)).collect();
    if free.is_empty() {
        return Ok(out);
    }
    let mut local: HashMap<u32, u32> = free.iter().enumerate().map(|(k, &v)| (v, k as u32)).collect();
    let mut nodes = free.clone();
    let mut edges = Vec::new();
    for &v in &free {
        for (u, c) in g.net.neighbors(v as usize) {
            let u = u as u32;
            let lu = *local.entry(u).or_insert_with(|| {
                nodes.push(u);
                (nodes.len() - 1) as u32
            });
            let lv = local[&v];
            if is_free(u) && u < v {
                continue; // free-free edges once
            }
            edges.push((lv, lu, c));
        }
    }
    let net = Network::from_edges(nodes.len(), edges)?;
    let fixed: Vec<u32> = (free.len() as u32..nodes.len() as u32).collect();
    let vals: Vec<f64> = nodes[free.len()..].iter().map(|&v| if in_a[v as usize] { 1.0 } else { 0.0 }).collect();
    if vals.iter().all(|&x| x == 0.0) {
        return Ok(out);
    }
    let h = HarmonicSolver::new(&net, &fixed, &[])?.solve(&vals, &[])?;
    for (k, &v) in free.iter().enumerate() {
        let x = h[k].clamp(0.0, 1.0);
        if x > 0.0 {
            out.push((v, x));
        }
    }
    out.sort_by_key(|&(v, _)| v);
    Ok(out)
}

impl Extension {
    /// Cover at level `n` and everything on the level-`n + 2` graph.
    pub fn build(preset: &FractalPreset, n: usize) -> Result<Self> {
        crate::geometry::check_level(n + 2)?;
        let cover = WhitneyCover::build(preset, n)?;
        let graph = LevelGraph::build(preset, n + 2)?;
        let bumps = (0..cover.len())
            .into_par_iter()
            .map(|k| bump(&graph, cover.omega[k].level() + 1, &cover.a_sets[k], &cover.b_sets[k]))
            .collect::<Result<Vec<_>>>()?;
        let mut denominators = vec![0.0; graph.n_vertices()];
        for b in &bumps {
            for &(v, x) in b {
                denominators[v as usize] += x;
            }
        }
        let readout = TraceReadout::new(preset, &graph)?;
        let trace_vertices = readout.trace_vertices();
        let local: HashMap<u32, u32> = trace_vertices.iter().enumerate().map(|(k, &v)| (v, k as u32)).collect();
        let mut edges = Vec::new();
        for &(a, b, c) in &graph.net.edges {
            if let (Some(&la), Some(&lb)) = (local.get(&a), local.get(&b)) {
                edges.push((la, lb, c));
            }
        }
        let trace_net = Network::from_edges(trace_vertices.len(), edges)?;
        let trace_rows = readout
            .rows_at(n)
            .into_iter()
            .map(|r| r.into_iter().map(|(v, w)| (local[&v], w)).collect())
            .collect();
        Ok(Extension { cover, graph, bumps, denominators, readout, trace_vertices, trace_net, trace_rows })
    }

    pub fn n(&self) -> usize {
        self.cover.n
    }

    /// `ψ_w(v)` for every `w` with `φ_w(v) > 0`.
    pub fn partition_weights(&self, v: u32) -> Vec<(usize, f64)> {
        let d = self.denominators[v as usize];
        let mut out = Vec::new();
        for (k, b) in self.bumps.iter().enumerate() {
            if let Ok(i) = b.binary_search_by_key(&v, |&(u, _)| u) {
                out.push((k, b[i].1 / d));
            }
        }
        out
    }

    /// `ξ^(n) f` from averages at level `≥ n`.
    pub fn extend(&self, q: &CellAverageVector) -> Result<Vec<f64>> {
        let n = self.n();
        let n_i = self.readout.n_i;
        if q.level < n {
            return Err(Error::RefineDepth { depth: n, available: q.level });
        }
        let mut top = q.clone();
        while top.level > n {
            top = top.coarsen(n_i);
        }
        let stack = top.stack(n_i);
        let mut num = vec![0.0; self.graph.n_vertices()];
        let mut offset = 0;
        for vals in &stack {
            for (j, &qv) in vals.values.iter().enumerate() {
                for &(v, x) in &self.bumps[offset + j] {
                    num[v as usize] += x * qv;
                }
            }
            offset += vals.values.len();
        }
        let mut out: Vec<f64> = num
            .iter()
            .zip(&self.denominators)
            .map(|(a, &d)| if d > 0.0 { a / d } else { 0.0 })
            .collect();
        // values on L: least energy along L with the level-n averages pinned
        let h = HarmonicSolver::new(&self.trace_net, &[], &self.trace_rows)?.solve(&[], &stack[n].values)?;
        for (k, &v) in self.trace_vertices.iter().enumerate() {
            out[v as usize] = h[k];
        }
        Ok(out)
    }

    /// `Q_n` of vertex values, read along `L`.
    pub fn restrict(&self, f: &[f64]) -> CellAverageVector {
        let mut q = self.readout.read(f);
        while q.level > self.n() {
            q = q.coarsen(self.readout.n_i);
        }
        q
    }

    pub fn trace_vertices(&self) -> &[u32] {
        &self.trace_vertices
    }

    /// Unrenormalized-by-level energy `ρ^N Σ c (φ(a) - φ(b))²` of bump `k`.
    pub fn bump_energy(&self, k: usize, rho: f64) -> Result<f64> {
        let mut f = vec![0.0; self.graph.n_vertices()];
        for &(v, x) in &self.bumps[k] {
            f[v as usize] = x;
        }
        EnergyForm::new(&self.graph, rho)?.energy(&f)
    }

    /// `R_w`: indices whose `K_B` sets share a vertex with that of `w`.
    pub fn overlap_index(&self) -> Vec<Vec<usize>> {
        let mut by_vertex: Vec<Vec<u32>> = vec![Vec::new(); self.graph.n_vertices()];
        for (k, b) in self.cover.b_sets.iter().enumerate() {
            let m = marks(&self.graph, self.cover.omega[k].level() + 1, b);
            for (v, &x) in m.iter().enumerate() {
                if x {
                    by_vertex[v].push(k as u32);
                }
            }
        }
        let mut out: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.cover.len()];
        for ks in &by_vertex {
            for &a in ks {
                for &b in ks {
                    out[a as usize].insert(b as usize);
                }
            }
        }
        out.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Smallest `l` with `K_{B_w} ∩ K_{B̂_{w'}} = ∅` whenever `|w'| ≥ |w| + l`, over the
    /// pairs available at this `n`.
    pub fn separation_depth(&self) -> usize {
        let c = &self.cover;
        let mark_sets: Vec<Vec<bool>> =
            (0..c.len()).map(|k| marks(&self.graph, c.omega[k].level() + 1, &c.b_sets[k])).collect();
        let mut l = 1;
        for k in 0..c.len() {
            if c.omega[k].level() == c.n {
                continue;
            }
            for j in 0..c.len() {
                let gap = c.omega[j].level() as isize - c.omega[k].level() as isize;
                if gap < l as isize {
                    continue;
                }
                let hat = &c.b_hat[j];
                let meet = hat.iter().any(|&cell| {
                    self.graph
                        .descendants(c.omega[j].level() + 1, cell)
                        .any(|d| self.graph.vertices_of_cell(d).iter().any(|&v| mark_sets[k][v as usize]))
                });
                if meet {
                    l = gap as usize + 1;
                }
            }
        }
        l
    }

    /// Measured `(min, max)` of `α^{|w|} d(L, K_{B_w})` over nonempty non-terminal `B_w`.
    pub fn distance_constants(&self, preset: &FractalPreset) -> Option<(f64, f64)> {
        let alpha = preset.alpha();
        let lpts: Vec<[f64; 3]> = self.trace_vertices.iter().map(|&v| self.graph.coords[v as usize]).collect();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for (k, b) in self.cover.b_sets.iter().enumerate() {
            let m = self.cover.omega[k].level();
            if m == self.cover.n || b.is_empty() {
                continue;
            }
            let mk = marks(&self.graph, m + 1, b);
            let d = mk
                .iter()
                .enumerate()
                .filter(|(_, &x)| x)
                .map(|(v, _)| lpts.iter().map(|p| dist(p, &self.graph.coords[v])).fold(f64::INFINITY, f64::min))
                .fold(f64::INFINITY, f64::min);
            let s = d * alpha.powi(m as i32);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        lo.is_finite().then_some((lo, hi))
    }
}

/// Energy of the extension against the discrete `Λ^β_{2,2}` norm of `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub n: usize,
    pub graph_level: usize,
    pub energy: f64,
    /// `(‖Q_n f‖_{ℓ²(ν)} + (Σ_{m≤n} a_m²)^{1/2})²`.
    pub besov_norm: f64,
    pub ratio: f64,
    /// `max |Q_n(ξ f|_L) - Q_n f|`.
    pub roundtrip_error: f64,
}

pub fn extension_report(
    preset: &FractalPreset,
    ext: &Extension,
    q: &CellAverageVector,
    beta: f64,
    rho: f64,
) -> Result<(Vec<f64>, ExtensionReport)> {
    let f = ext.extend(q)?;
    let n = ext.n();
    let n_i = preset.n_trace();
    let mut top = q.clone();
    while top.level > n {
        top = top.coarsen(n_i);
    }
    let back = ext.restrict(&f);
    let roundtrip_error = back.values.iter().zip(&top.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let energy = EnergyForm::new(&ext.graph, rho)?.energy(&f)?;
    let stack = top.stack(n_i);
    let mut sq = 0.0;
    for (m, level) in stack.iter().enumerate() {
        let t = crate::trace::TraceLevel::build(preset, m)?;
        sq += crate::besov::discrete_term(preset, level, &t, beta)?.powi(2);
    }
    let l2 = (top.values.iter().map(|x| x * x).sum::<f64>() / top.values.len() as f64).sqrt();
    let besov_norm = (l2 + sq.sqrt()).powi(2);
    let ratio = if besov_norm > 0.0 { energy / besov_norm } else { 0.0 };
    Ok((f, ExtensionReport { n, graph_level: ext.graph.level, energy, besov_norm, ratio, roundtrip_error }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::{cell_average, corpus, TestFunction};
    use crate::presets::builtin;

    #[test]
    fn empty_word_sets_match_the_direct_formula() {
        let p = builtin("gasket2").unwrap();
        let c = WhitneyCover::build(&p, 1).unwrap();
        let l1 = LevelCells::build(&p, 1).unwrap();
        let i: BTreeSet<usize> = [0, 1].into_iter().collect();
        let all: BTreeSet<usize> = (0..3).collect();
        let a0: BTreeSet<usize> = all.difference(&l1.expand(&i, 2)).copied().collect();
        let b0: BTreeSet<usize> = all.difference(&l1.expand(&i, 1)).copied().collect();
        assert_eq!(c.a_sets[0], a0);
        assert_eq!(c.b_sets[0], b0);
        // at level 1 every gasket cell meets the bottom two
        assert!(a0.is_empty() && b0.is_empty());
        assert_eq!(c.len(), 3);
        // terminal sets are the full hatted neighborhoods
        assert_eq!(c.a_sets[1].len(), 9);
        assert!(c.check_nesting(&p).unwrap());
    }

    #[test]
    fn gasket_level_two_cover() {
        let p = builtin("gasket2").unwrap();
        let c = WhitneyCover::build(&p, 2).unwrap();
        // A_0 and A_1 at level 2: children of 𝒩_2 minus 𝒩_2 of the bottom row
        let fmt = |s: &BTreeSet<usize>| s.iter().map(|&k| format!("{k:02}")).collect::<Vec<_>>().join(",");
        let a: Vec<String> = c.a_sets[1..3].iter().map(fmt).collect();
        let b: Vec<String> = c.b_sets[1..3].iter().map(fmt).collect();
        assert_eq!(a, vec!["08", "08"]);
        assert_eq!(b, vec!["06,07,08", "06,07,08"]);
        assert!(c.check_nesting(&p).unwrap());
    }

    #[test]
    fn constants_and_round_trip() {
        for name in ["gasket2", "vicsek", "carpet3"] {
            let p = builtin(name).unwrap();
            let ext = Extension::build(&p, 2).unwrap();
            let c = cell_average(&p, &TestFunction::Constant { value: 1.75 }, 2).unwrap();
            let f = ext.extend(&c).unwrap();
            assert!(f.iter().all(|x| (x - 1.75).abs() < 1e-12), "{name}");
            let x = cell_average(&p, &TestFunction::Affine { grad: [1.0, 0.3, 0.0], offset: 0.1 }, 2).unwrap();
            let back = ext.restrict(&ext.extend(&x).unwrap());
            for (a, b) in back.values.iter().zip(&x.values) {
                assert!((a - b).abs() < 1e-10, "{name}");
            }
        }
    }

    #[test]
    fn partition_of_unity_and_support() {
        let p = builtin("gasket2").unwrap();
        let ext = Extension::build(&p, 3).unwrap();
        for v in 0..ext.graph.n_vertices() as u32 {
            let w = ext.partition_weights(v);
            let s: f64 = w.iter().map(|x| x.1).sum();
            assert!((s - 1.0).abs() < 1e-12, "vertex {v}");
            for (k, x) in w {
                assert!((0.0..=1.0).contains(&x));
                let m = marks(&ext.graph, ext.cover.omega[k].level() + 1, &ext.cover.b_sets[k]);
                assert!(m[v as usize]);
            }
        }
        assert!(ext.distance_constants(&p).unwrap().0 > 0.0);
        let r = ext.overlap_index();
        assert!(r.iter().enumerate().all(|(k, s)| s.contains(&k) || ext.cover.b_sets[k].is_empty()));
    }

    #[test]
    fn linearity() {
        let p = builtin("gasket2").unwrap();
        let ext = Extension::build(&p, 3).unwrap();
        let fs = corpus(&p, 6).unwrap();
        let a = cell_average(&p, &fs[1].1, 3).unwrap();
        let b = cell_average(&p, &fs[4].1, 3).unwrap();
        let mix = CellAverageVector {
            level: 3,
            values: a.values.iter().zip(&b.values).map(|(x, y)| 2.0 * x - 0.5 * y).collect(),
        };
        let (ea, eb, em) = (ext.extend(&a).unwrap(), ext.extend(&b).unwrap(), ext.extend(&mix).unwrap());
        for k in 0..em.len() {
            assert!((em[k] - (2.0 * ea[k] - 0.5 * eb[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_energy_does_not_depend_on_graph_level() {
        let p = builtin("gasket2").unwrap();
        let a: BTreeSet<usize> = [8].into_iter().collect();
        let b: BTreeSet<usize> = [6, 7, 8].into_iter().collect();
        let energies: Vec<f64> = (2..=6)
            .map(|n| {
                let g = LevelGraph::build(&p, n).unwrap();
                let mut v = vec![0.0; g.n_vertices()];
                for (i, x) in bump(&g, 2, &a, &b).unwrap() {
                    v[i as usize] = x;
                }
                EnergyForm::new(&g, 5.0 / 3.0).unwrap().energy(&v).unwrap()
            })
            .collect();
        // two free cells, each with corners (1, 1, 0): 2 · ρ² · (3/5 · 2)... by decimation 25/3
        for e in &energies {
            assert!((e - 25.0 / 3.0).abs() < 1e-10, "{energies:?}");
        }
    }
}
