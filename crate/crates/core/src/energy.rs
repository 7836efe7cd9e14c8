//! Renormalized energies, restricted energies, harmonic extension and effective resistance.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FractalPreset, LevelCells, Terminals};
use crate::graph::{GraphKind, LevelGraph, Network};
use crate::solver::{minimize, ConstraintSet, HarmonicSolver};
use crate::word::{reduce, Word};

/// `E_A` with `A` a set of level-`level` cells (indices over `S^level`).
#[derive(Clone, Debug, PartialEq)]
pub struct Restriction {
    pub level: usize,
    pub cells: BTreeSet<usize>,
}

/// `ρ^n Σ c (f(a) - f(b))²` on a level graph, optionally restricted to `K_A`.
#[derive(Clone, Debug)]
pub struct EnergyForm<'g> {
    pub graph: &'g LevelGraph,
    pub rho: f64,
    pub restriction: Option<Restriction>,
}

impl<'g> EnergyForm<'g> {
    pub fn new(graph: &'g LevelGraph, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidInput(format!("rho must be positive, got {rho}")));
        }
        Ok(EnergyForm { graph, rho, restriction: None })
    }

    /// Restrict to the cells of `words` (all of one level ≤ the graph level).
    pub fn restricted(mut self, preset: &FractalPreset, words: &[Word]) -> Result<Self> {
        let level = words.first().map(|w| w.level()).unwrap_or(self.graph.level);
        if level > self.graph.level {
            return Err(Error::InvalidInput(format!(
                "restriction level {level} above graph level {}",
                self.graph.level
            )));
        }
        let cells = LevelCells::build(preset, level)?;
        let mut set = BTreeSet::new();
        for w in words {
            if w.level() != level {
                return Err(Error::LevelMismatch(level, w.level()));
            }
            let canon = reduce(&preset.alphabet, w)?.canonical;
            set.insert(cells.cell_index(&canon).expect("canonical words index S^n"));
        }
        self.restriction = Some(Restriction { level, cells: set });
        Ok(self)
    }

    pub fn with_cells(mut self, level: usize, cells: BTreeSet<usize>) -> Self {
        self.restriction = Some(Restriction { level, cells });
        self
    }

    /// Scope mask over edges.
    pub fn edge_in_scope(&self, e: usize) -> bool {
        let Some(r) = &self.restriction else { return true };
        let g = self.graph;
        match g.kind {
            GraphKind::Cells => {
                let (a, b, _) = g.net.edges[e];
                r.cells.contains(&g.ancestor(r.level, a as usize)) && r.cells.contains(&g.ancestor(r.level, b as usize))
            }
            _ => r.cells.contains(&g.ancestor(r.level, g.owners[e] as usize)),
        }
    }

    pub fn energy(&self, f: &[f64]) -> Result<f64> {
        let g = self.graph;
        if f.len() != g.n_vertices() {
            return Err(Error::InvalidInput(format!("{} values for {} vertices", f.len(), g.n_vertices())));
        }
        let mut s = 0.0;
        for (e, &(a, b, c)) in g.net.edges.iter().enumerate() {
            if self.edge_in_scope(e) {
                s += c * (f[a as usize] - f[b as usize]).powi(2);
            }
        }
        Ok(self.rho.powi(g.level as i32) * s)
    }
}

pub fn energy(form: &EnergyForm, f: &[f64]) -> Result<f64> {
    form.energy(f)
}

pub fn restricted_energy(form: &EnergyForm, f: &[f64]) -> Result<f64> {
    form.energy(f)
}

/// Unique energy minimizer under the constraints.
pub fn harmonic_extension(form: &EnergyForm, constraints: &ConstraintSet) -> Result<Vec<f64>> {
    minimize(&form.graph.net, constraints)
}

/// `1 / Σ c (h(a) - h(b))²` for the potential `h = 1` on `source`, `0` on `sink`.
pub fn effective_resistance(net: &Network, source: &[u32], sink: &[u32]) -> Result<f64> {
    if source.is_empty() || sink.is_empty() {
        return Err(Error::InvalidInput("source and sink must be nonempty".into()));
    }
    if source.iter().any(|v| sink.contains(v)) {
        return Err(Error::InvalidInput("source and sink overlap".into()));
    }
    if !net.is_connected() {
        return Err(Error::Disconnected);
    }
    let fixed: Vec<u32> = source.iter().chain(sink).copied().collect();
    let vals: Vec<f64> = source.iter().map(|_| 1.0).chain(sink.iter().map(|_| 0.0)).collect();
    let h = HarmonicSolver::new(net, &fixed, &[])?.solve(&vals, &[])?;
    let e = net.raw_energy(&h)?;
    Ok(1.0 / e)
}

/// The network and terminals used for the resistance scaling of a preset at level `n`.
pub fn resistance_network(preset: &FractalPreset, g: &LevelGraph) -> Result<(Network, Vec<u32>, Vec<u32>)> {
    match &preset.terminals {
        Terminals::Points { source, sink } => {
            let find = |i: usize| -> Result<u32> {
                let pts = preset.template_points();
                let x = preset.euclid(&pts[i]);
                let tol = preset.tolerance * preset.alpha().powi(-(g.level as i32));
                match preset.exact() {
                    Some(e) => {
                        let s = e.base.pow(g.level as u32);
                        let p = e.points[i];
                        g.vertex_at(&[p[0] * s, p[1] * s, p[2] * s])
                    }
                    None => g.vertex_near(&x, tol),
                }
                .ok_or_else(|| Error::InvalidPreset(format!("terminal point {i} is not a vertex")))
            };
            let s = source.iter().map(|&i| find(i)).collect::<Result<Vec<_>>>()?;
            let t = sink.iter().map(|&i| find(i)).collect::<Result<Vec<_>>>()?;
            Ok((g.net.clone(), s, t))
        }
        Terminals::Faces { axis } => {
            if g.kind != GraphKind::Cells {
                return Err(Error::InvalidInput("face terminals need a cell graph".into()));
            }
            let side = preset.exact().unwrap().base.pow(g.level as u32);
            let n = g.n_vertices();
            let (src, dst) = (n as u32, n as u32 + 1);
            let mut edges = g.net.edges.clone();
            for (c, o) in g.exact_coords.iter().enumerate() {
                // a boundary cell sits half a cell away from its face
                if o[*axis] == 0 {
                    edges.push((src, c as u32, 2.0));
                }
                if o[*axis] == side - 1 {
                    edges.push((dst, c as u32, 2.0));
                }
            }
            Ok((Network::from_edges(n + 2, edges)?, vec![src], vec![dst]))
        }
    }
}

pub fn level_resistance(preset: &FractalPreset, n: usize) -> Result<f64> {
    let g = LevelGraph::build(preset, n)?;
    let (net, s, t) = resistance_network(preset, &g)?;
    effective_resistance(&net, &s, &t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub level: usize,
    pub resistance: f64,
    pub next_resistance: f64,
    /// `R_{n+1} / R_n`.
    pub rho_hat: f64,
}

/// `ρ̂_n = R_{n+1} / R_n` for `n` in `levels`.
pub fn estimate_rho(preset: &FractalPreset, levels: std::ops::RangeInclusive<usize>) -> Result<Vec<RhoEstimate>> {
    if *levels.start() < 1 || levels.is_empty() {
        return Err(Error::InvalidInput("levels must be a nonempty range starting at 1 or above".into()));
    }
    let mut r: Vec<f64> = Vec::new();
    for n in *levels.start()..=*levels.end() + 1 {
        r.push(level_resistance(preset, n)?);
    }
    Ok(levels
        .clone()
        .enumerate()
        .map(|(k, n)| RhoEstimate { level: n, resistance: r[k], next_resistance: r[k + 1], rho_hat: r[k + 1] / r[k] })
        .collect())
}

/// Whether the cells of `a` form one connected piece under nonempty intersection.
pub fn is_energy_connected(preset: &FractalPreset, a: &[Word]) -> Result<bool> {
    let Some(first) = a.first() else {
        return Err(Error::InvalidInput("empty word set".into()));
    };
    let n = first.level();
    let cells = LevelCells::build(preset, n)?;
    let mut set = BTreeSet::new();
    for w in a {
        if w.level() != n {
            return Err(Error::LevelMismatch(n, w.level()));
        }
        set.insert(cells.cell_index(&reduce(&preset.alphabet, w)?.canonical).unwrap());
    }
    let start = *set.iter().next().unwrap();
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(c) = stack.pop() {
        for &d in cells.neighbors_of(c) {
            let d = d as usize;
            if set.contains(&d) && seen.insert(d) {
                stack.push(d);
            }
        }
    }
    Ok(seen.len() == set.len())
}

/// Cell-wise harmonic refinement for template presets.
///
/// `maps[i]` sends the template values of a cell to the template values of
/// its child `i`. Chaining them evaluates the harmonic extension of level-0
/// data on any single cell without building the whole graph.
#[derive(Clone, Debug)]
pub struct HarmonicRefinement {
    pub maps: Vec<Vec<Vec<f64>>>,
}

impl HarmonicRefinement {
    pub fn new(preset: &FractalPreset) -> Result<Self> {
        if preset.is_cells() {
            return Err(Error::InvalidInput("refinement needs a template preset".into()));
        }
        let g = LevelGraph::build(preset, 1)?;
        let k = preset.template_points().len();
        let boundary = template_vertices(preset, &g)?;
        let solver = HarmonicSolver::new(&g.net, &boundary, &[])?;
        let mut basis = Vec::with_capacity(k);
        for j in 0..k {
            let vals: Vec<f64> = (0..k).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            basis.push(solver.solve(&vals, &[])?);
        }
        let maps = (0..preset.n_cells())
            .map(|c| {
                let pts = g.vertices_of_cell(c);
                pts.iter().map(|&v| (0..k).map(|j| basis[j][v as usize]).collect()).collect()
            })
            .collect();
        Ok(HarmonicRefinement { maps })
    }

    /// Template values on cell `w` (word over `S`, given as positions in `S`).
    pub fn cell_values(&self, boundary: &[f64], positions: &[usize]) -> Vec<f64> {
        let mut v = boundary.to_vec();
        for &i in positions {
            v = self.child(&v, i);
        }
        v
    }

    pub fn child(&self, v: &[f64], i: usize) -> Vec<f64> {
        self.maps[i].iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Vertex ids of the level-0 template points inside a level graph.
pub fn template_vertices(preset: &FractalPreset, g: &LevelGraph) -> Result<Vec<u32>> {
    let pts = preset.template_points();
    (0..pts.len())
        .map(|i| {
            match preset.exact() {
                Some(e) => {
                    let s = e.base.pow(g.level as u32);
                    let p = e.points[i];
                    g.vertex_at(&[p[0] * s, p[1] * s, p[2] * s])
                }
                None => g.vertex_near(
                    &preset.euclid(&pts[i]),
                    preset.tolerance * preset.alpha().powi(-(g.level as i32)),
                ),
            }
            .ok_or_else(|| Error::InvalidPreset(format!("template point {i} missing at level {}", g.level)))
        })
        .collect()
}

/// Harmonic extension of boundary values on the template points to the level-`n` graph.
pub fn harmonic_from_boundary(preset: &FractalPreset, g: &LevelGraph, boundary: &[f64]) -> Result<Vec<f64>> {
    let b = template_vertices(preset, g)?;
    if boundary.len() != b.len() {
        return Err(Error::InvalidInput(format!("{} boundary values for {} points", boundary.len(), b.len())));
    }
    HarmonicSolver::new(&g.net, &b, &[])?.solve(boundary, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::builtin;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn gasket_level0_energy() {
        let p = builtin("gasket2").unwrap();
        let g = LevelGraph::build(&p, 0).unwrap();
        let form = EnergyForm::new(&g, 5.0 / 3.0).unwrap();
        let b = template_vertices(&p, &g).unwrap();
        let mut f = vec![0.0; 3];
        f[b[1] as usize] = 1.0;
        assert_eq!(form.energy(&f).unwrap(), 2.0);
        assert_eq!(form.energy(&[4.0, 4.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn gasket_level1_extension_and_restriction() {
        let p = builtin("gasket2").unwrap();
        let g = LevelGraph::build(&p, 1).unwrap();
        let h = harmonic_from_boundary(&p, &g, &[1.0, 0.0, 0.0]).unwrap();
        let form = EnergyForm::new(&g, 5.0 / 3.0).unwrap();
        assert!((form.energy(&h).unwrap() - 2.0).abs() < 1e-12);
        let r = EnergyForm::new(&g, 5.0 / 3.0).unwrap().restricted(&p, &[w("0")]).unwrap();
        assert!((r.energy(&h).unwrap() - 1.2).abs() < 1e-12);
        let full = EnergyForm::new(&g, 5.0 / 3.0).unwrap().restricted(&p, &[w("0"), w("1"), w("2")]).unwrap();
        assert!((full.energy(&h).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resistance_basics() {
        let one = Network::from_edges(2, vec![(0, 1, 1.0)]).unwrap();
        assert!((effective_resistance(&one, &[0], &[1]).unwrap() - 1.0).abs() < 1e-15);
        let two = Network::from_edges(2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert!((effective_resistance(&two, &[0], &[1]).unwrap() - 0.5).abs() < 1e-15);
        assert!(effective_resistance(&two, &[0], &[0]).is_err());
        let split = Network::from_edges(3, vec![(0, 1, 1.0)]).unwrap();
        assert!(matches!(effective_resistance(&split, &[0], &[1]), Err(Error::Disconnected)));
    }

    #[test]
    fn gasket_rho_is_five_thirds() {
        let p = builtin("gasket2").unwrap();
        for e in estimate_rho(&p, 1..=4).unwrap() {
            assert!((e.rho_hat - 5.0 / 3.0).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn connectivity_examples() {
        let g = builtin("gasket2").unwrap();
        assert!(is_energy_connected(&g, &[w("1")]).unwrap());
        assert!(is_energy_connected(&g, &[w("0"), w("1")]).unwrap());
        assert!(!is_energy_connected(&g, &[w("00"), w("11")]).unwrap());
        let c = builtin("carpet3").unwrap();
        assert!(!is_energy_connected(&c, &[w("3"), w("4")]).unwrap());
        assert!(is_energy_connected(&c, &[w("3"), w("0"), w("1"), w("2"), w("4")]).unwrap());
        assert!(is_energy_connected(&g, &[]).is_err());
    }

    #[test]
    fn refinement_matches_graph_solve() {
        for name in ["gasket2", "vicsek", "pentakun"] {
            let p = builtin(name).unwrap();
            let r = HarmonicRefinement::new(&p).unwrap();
            let k = p.template_points().len();
            let bdry: Vec<f64> = (0..k).map(|i| (i as f64 * 0.37).sin()).collect();
            let g = LevelGraph::build(&p, 3).unwrap();
            let h = harmonic_from_boundary(&p, &g, &bdry).unwrap();
            for c in 0..g.cells.n_cells {
                let word = g.cells.cell_word(c);
                let pos: Vec<usize> = word.letters().iter().map(|&l| p.alphabet.s_pos(l).unwrap()).collect();
                let v = r.cell_values(&bdry, &pos);
                for (j, &vid) in g.vertices_of_cell(c).iter().enumerate() {
                    assert!((v[j] - h[vid as usize]).abs() < 1e-10, "{name}");
                }
            }
        }
    }
}
