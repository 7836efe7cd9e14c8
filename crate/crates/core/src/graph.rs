//! Weighted graphs: the plain [`Network`] the solvers work on, and the
//! [`LevelGraph`] of a preset at level `n`.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{FractalPreset, GraphModel, LevelCells, IV3, V3};

/// Undirected weighted graph in adjacency (CSR) form.
#[derive(Clone, Debug)]
pub struct Network {
    pub n: usize,
    /// `(a, b, conductance)` with `a != b`.
    pub edges: Vec<(u32, u32, f64)>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    conds: Vec<f64>,
}

impl Network {
    pub fn from_edges(n: usize, edges: Vec<(u32, u32, f64)>) -> Result<Self> {
        let mut deg = vec![0usize; n + 1];
        for &(a, b, c) in &edges {
            if a == b || a as usize >= n || b as usize >= n || !(c > 0.0) {
                return Err(Error::InvalidInput(format!("bad edge ({a}, {b}, {c})")));
            }
            deg[a as usize + 1] += 1;
            deg[b as usize + 1] += 1;
        }
        for k in 0..n {
            deg[k + 1] += deg[k];
        }
        let offsets = deg.clone();
        let mut fill = deg;
        let mut targets = vec![0u32; offsets[n]];
        let mut conds = vec![0.0; offsets[n]];
        for &(a, b, c) in &edges {
            for (x, y) in [(a, b), (b, a)] {
                let slot = fill[x as usize];
                targets[slot] = y;
                conds[slot] = c;
                fill[x as usize] += 1;
            }
        }
        Ok(Network { n, edges, offsets, targets, conds })
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.targets[r.clone()].iter().zip(&self.conds[r]).map(|(&t, &c)| (t as usize, c))
    }

    /// Sum of incident conductances.
    pub fn degree(&self, v: usize) -> f64 {
        self.conds[self.offsets[v]..self.offsets[v + 1]].iter().sum()
    }

    /// Component label of every vertex.
    pub fn components(&self) -> (usize, Vec<u32>) {
        let mut label = vec![u32::MAX; self.n];
        let mut count = 0u32;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if label[s] != u32::MAX {
                continue;
            }
            label[s] = count;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for (u, _) in self.neighbors(v) {
                    if label[u] == u32::MAX {
                        label[u] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        (count as usize, label)
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.components().0 == 1
    }

    /// `Σ c (f(a) - f(b))²` over all edges.
    pub fn raw_energy(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.n {
            return Err(Error::InvalidInput(format!("{} values for {} vertices", f.len(), self.n)));
        }
        Ok(self.edges.iter().map(|&(a, b, c)| c * (f[a as usize] - f[b as usize]).powi(2)).sum())
    }

    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vertex_id,vertex_id")?;
        for &(a, b, _) in &self.edges {
            writeln!(w, "{a},{b}")?;
        }
        Ok(())
    }
}

/// Which objects are the vertices of a level graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    /// Images of the template points.
    Vertices,
    /// Level-n cells, face-adjacent pairs joined.
    Cells,
    /// Corners of box cells, box sides as edges.
    Corners,
}

/// The level-`n` approximation of a preset.
#[derive(Clone, Debug)]
pub struct LevelGraph {
    pub level: usize,
    pub kind: GraphKind,
    pub net: Network,
    /// Level-`n` cell owning each edge (same order as `net.edges`).
    pub owners: Vec<u32>,
    /// Vertices of each level-`n` cell, `stride` per cell.
    pub cell_vertices: Vec<u32>,
    pub stride: usize,
    /// Euclidean coordinates of vertices (cell centers for `Cells`).
    pub coords: Vec<V3>,
    /// Integer coordinates in units `b^{-n}` (exact presets; cell origins for `Cells`).
    pub exact_coords: Vec<IV3>,
    pub cells: LevelCells,
    n_letters: usize,
    exact_index: HashMap<IV3, u32>,
}

impl LevelGraph {
    /// The preset's native graph: template images or cells.
    pub fn build(preset: &FractalPreset, n: usize) -> Result<Self> {
        let cells = LevelCells::build(preset, n)?;
        match &preset.model {
            GraphModel::Vertex { edges, .. } => {
                let mut list = Vec::with_capacity(cells.n_cells * edges.len());
                let mut owners = Vec::with_capacity(cells.n_cells * edges.len());
                for c in 0..cells.n_cells {
                    let pts = cells.points_of(c);
                    for &(p, q, w) in edges {
                        list.push((pts[p], pts[q], w));
                        owners.push(c as u32);
                    }
                }
                let net = Network::from_edges(cells.points.len(), list)?;
                let coords = cells.points.iter().map(|x| preset.euclid(x)).collect();
                let exact_index =
                    cells.exact_points.iter().enumerate().map(|(k, p)| (*p, k as u32)).collect();
                Ok(LevelGraph {
                    level: n,
                    kind: GraphKind::Vertices,
                    net,
                    owners,
                    cell_vertices: cells.cell_points.clone(),
                    stride: cells.stride,
                    coords,
                    exact_coords: cells.exact_points.clone(),
                    n_letters: preset.n_cells(),
                    exact_index,
                    cells,
                })
            }
            GraphModel::Cells => {
                let mut list = Vec::new();
                let mut owners = Vec::new();
                for (c, o) in cells.origins.iter().enumerate() {
                    for k in 0..preset.dim {
                        let mut q = *o;
                        q[k] += 1;
                        if let Some(d) = cells.cell_index_of_box(&q) {
                            list.push((c as u32, d as u32, 1.0));
                            owners.push(c as u32);
                        }
                    }
                }
                let net = Network::from_edges(cells.n_cells, list)?;
                let coords = crate::geometry::cell_centers(preset, &cells);
                let exact_index = cells.origins.iter().enumerate().map(|(k, p)| (*p, k as u32)).collect();
                Ok(LevelGraph {
                    level: n,
                    kind: GraphKind::Cells,
                    net,
                    owners,
                    cell_vertices: (0..cells.n_cells as u32).collect(),
                    stride: 1,
                    coords,
                    exact_coords: cells.origins.clone(),
                    n_letters: preset.n_cells(),
                    exact_index,
                    cells,
                })
            }
        }
    }

    /// Box corners as vertices and box sides as unit edges (box presets only).
    pub fn corner_graph(preset: &FractalPreset, n: usize) -> Result<Self> {
        if !preset.is_cells() || preset.dim != 2 {
            return Err(Error::InvalidInput("corner graphs need a planar box preset".into()));
        }
        let cells = LevelCells::build(preset, n)?;
        let b = preset.exact().unwrap().base as f64;
        let sc = b.powi(-(n as i32));
        let mut index: HashMap<IV3, u32> = HashMap::new();
        let mut pts: Vec<IV3> = Vec::new();
        let mut cell_vertices = Vec::with_capacity(cells.n_cells * 4);
        let mut seen: HashMap<(u32, u32), ()> = HashMap::new();
        let mut list = Vec::new();
        let mut owners = Vec::new();
        for (c, o) in cells.origins.iter().enumerate() {
            let corners = [[0, 0], [1, 0], [1, 1], [0, 1]];
            let mut ids = [0u32; 4];
            for (k, d) in corners.iter().enumerate() {
                let p = [o[0] + d[0], o[1] + d[1], 0];
                let next = pts.len() as u32;
                let id = *index.entry(p).or_insert(next);
                if id == next {
                    pts.push(p);
                }
                ids[k] = id;
            }
            cell_vertices.extend_from_slice(&ids);
            for k in 0..4 {
                let (a, z) = (ids[k], ids[(k + 1) % 4]);
                let key = (a.min(z), a.max(z));
                if seen.insert(key, ()).is_none() {
                    list.push((a, z, 1.0));
                    owners.push(c as u32);
                }
            }
        }
        let net = Network::from_edges(pts.len(), list)?;
        let coords = pts
            .iter()
            .map(|p| preset.euclid(&[p[0] as f64 * sc, p[1] as f64 * sc, 0.0]))
            .collect();
        Ok(LevelGraph {
            level: n,
            kind: GraphKind::Corners,
            net,
            owners,
            cell_vertices,
            stride: 4,
            coords,
            exact_coords: pts,
            n_letters: preset.n_cells(),
            exact_index: index,
            cells,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.net.n
    }

    /// Degree-proportional vertex weights, normalized to sum 1.
    pub fn vertex_measure(&self) -> Vec<f64> {
        let d: Vec<f64> = (0..self.net.n).map(|v| self.net.degree(v)).collect();
        let total: f64 = d.iter().sum();
        d.into_iter().map(|x| x / total).collect()
    }

    /// Range of level-`n` cells below level-`m` cell `c`.
    pub fn descendants(&self, m: usize, c: usize) -> std::ops::Range<usize> {
        let k = self.n_letters.pow((self.level - m) as u32);
        c * k..(c + 1) * k
    }

    /// Level-`m` ancestor of level-`n` cell `c`.
    pub fn ancestor(&self, m: usize, c: usize) -> usize {
        c / self.n_letters.pow((self.level - m) as u32)
    }

    pub fn vertices_of_cell(&self, c: usize) -> &[u32] {
        &self.cell_vertices[c * self.stride..(c + 1) * self.stride]
    }

    /// Marks the vertices of all level-`n` cells below the level-`m` cells in `set`.
    pub fn mark_vertices(&self, m: usize, set: impl IntoIterator<Item = usize>, mark: &mut [bool]) {
        for c in set {
            for d in self.descendants(m, c) {
                for &v in self.vertices_of_cell(d) {
                    mark[v as usize] = true;
                }
            }
        }
    }

    /// Vertex at integer coordinates `p` (units `b^{-n}`).
    pub fn vertex_at(&self, p: &IV3) -> Option<u32> {
        self.exact_index.get(p).copied()
    }

    /// Vertex within `tol` of Euclidean point `x`.
    pub fn vertex_near(&self, x: &V3, tol: f64) -> Option<u32> {
        self.coords
            .iter()
            .position(|y| crate::geometry::dist(x, y) < tol)
            .map(|k| k as u32)
    }

    pub fn n_letters(&self) -> usize {
        self.n_letters
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::builtin;

    #[test]
    fn gasket_counts() {
        let g = builtin("gasket2").unwrap();
        for n in 0..=5usize {
            let lg = LevelGraph::build(&g, n).unwrap();
            let cells = 3usize.pow(n as u32);
            assert_eq!(lg.n_vertices(), 3 * (cells + 1) / 2);
            assert_eq!(lg.net.edges.len(), 3 * cells);
            assert!(lg.net.is_connected());
        }
    }

    #[test]
    fn other_presets_connected() {
        for (name, n) in [("vicsek", 3), ("pentakun", 3), ("carpet3", 3), ("carpet4", 2), ("square3", 2)] {
            let p = builtin(name).unwrap();
            let lg = LevelGraph::build(&p, n).unwrap();
            assert!(lg.net.is_connected(), "{name}");
            for &(a, b, _) in &lg.net.edges {
                assert_ne!(a, b);
            }
        }
        let v = LevelGraph::build(&builtin("vicsek").unwrap(), 1).unwrap();
        assert_eq!(v.n_vertices(), 16);
        let p = LevelGraph::build(&builtin("pentakun").unwrap(), 1).unwrap();
        assert_eq!(p.n_vertices(), 20);
        let c = LevelGraph::build(&builtin("carpet3").unwrap(), 1).unwrap();
        assert_eq!(c.n_vertices(), 8);
        assert_eq!(c.net.edges.len(), 8);
    }

    #[test]
    fn corner_graph_of_carpet() {
        let c = builtin("carpet3").unwrap();
        let g = LevelGraph::corner_graph(&c, 1).unwrap();
        assert_eq!(g.n_vertices(), 16);
        assert_eq!(g.net.edges.len(), 24);
        assert!(g.net.is_connected());
    }

    #[test]
    fn network_rejects_loops() {
        assert!(Network::from_edges(2, vec![(0, 0, 1.0)]).is_err());
        assert!(Network::from_edges(2, vec![(0, 1, 0.0)]).is_err());
        let n = Network::from_edges(3, vec![(0, 1, 1.0)]).unwrap();
        assert_eq!(n.components().0, 2);
    }
}
