//! Trace cells `L_w`, `w ∈ I^n`: geometry, adjacency `↔`, cell-average vectors,
//! and read-out of trace averages from a level graph.
//!
//! Trace cell `k` at level `n` is the `k`-th word of `all_words(I, n)`, so the
//! children of `k` are `k·N_I .. (k+1)·N_I`.

use std::collections::HashMap;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cell_box, cell_map, dist, extend_map, geometries_meet, pad, CellMap, FractalPreset, LevelCells, V3};
use crate::graph::LevelGraph;
use crate::word::{reduce, word_at, Word};

/// The values `Q_n f(w)` for `w ∈ I^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAverageVector {
    pub level: usize,
    pub values: Vec<f64>,
}

impl CellAverageVector {
    pub fn new(level: usize, values: Vec<f64>, n_i: usize) -> Result<Self> {
        if values.len() != n_i.pow(level as u32) {
            return Err(Error::InvalidInput(format!(
                "{} values for {} trace cells at level {level}",
                values.len(),
                n_i.pow(level as u32)
            )));
        }
        Ok(CellAverageVector { level, values })
    }

    /// Parent averages: `Q_{n-1} f(w) = N_I^{-1} Σ_j Q_n f(w·j)`.
    pub fn coarsen(&self, n_i: usize) -> CellAverageVector {
        assert!(self.level > 0, "level-0 vector has no parent level");
        CellAverageVector { level: self.level - 1, values: coarsen(&self.values, n_i) }
    }

    /// All levels `0..=self.level`, index `m` holding `Q_m`.
    pub fn stack(&self, n_i: usize) -> Vec<CellAverageVector> {
        let mut out = vec![self.clone()];
        while out.last().unwrap().level > 0 {
            let next = out.last().unwrap().coarsen(n_i);
            out.push(next);
        }
        out.reverse();
        out
    }
}

/// Averages of consecutive groups of `n_i` entries.
pub fn coarsen<T>(values: &[T], n_i: usize) -> Vec<T>
where
    T: Clone + Num + FromPrimitive,
{
    let k = T::from_usize(n_i).expect("n_i fits");
    values
        .chunks(n_i)
        .map(|c| c.iter().cloned().fold(T::zero(), |a, b| a + b) / k.clone())
        .collect()
}

/// Geometry and adjacency of the level-`n` trace cells.
#[derive(Clone, Debug)]
pub struct TraceLevel {
    pub level: usize,
    pub n_i: usize,
    /// Euclidean centers.
    pub centers: Vec<V3>,
    /// Parameter interval `[t0, t1]` along the segment `L`, if `L` is a segment.
    pub params: Option<Vec<(f64, f64)>>,
    /// Canonical level-`n` cell of each trace cell (filled by [`TraceLevel::with_adjacency`]).
    pub cells: Vec<usize>,
    /// Unordered pairs `i < j` with `i ↔ j`.
    pub pairs: Vec<(u32, u32)>,
}

fn segment_param(preset: &FractalPreset, x: &V3) -> Option<f64> {
    let (p, q) = preset.trace.segment.as_ref()?;
    let (p, q) = (preset.euclid(&pad(p)), preset.euclid(&pad(q)));
    let y = preset.euclid(x);
    let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let len2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    Some(((y[0] - p[0]) * d[0] + (y[1] - p[1]) * d[1] + (y[2] - p[2]) * d[2]) / len2)
}

/// Largest number of trace cells held in memory at once.
pub const MAX_TRACE_CELLS: usize = 1 << 24;

/// Deepest trace level with at most [`MAX_TRACE_CELLS`] cells.
pub fn max_depth(n_i: usize) -> usize {
    if n_i < 2 {
        return usize::MAX;
    }
    let mut d = 0;
    let mut c = 1usize;
    while c * n_i <= MAX_TRACE_CELLS {
        c *= n_i;
        d += 1;
    }
    d
}

/// Barycenter of `ν` on `L` (template coordinates): fixed point of `x ↦ N_I^{-1} Σ_{i∈I} F_i x`.
pub fn trace_barycenter(preset: &FractalPreset) -> V3 {
    let mut b = [0.0; 3];
    let k = preset.n_trace() as f64;
    for _ in 0..200 {
        let mut nb = [0.0; 3];
        for &l in &preset.alphabet.i {
            let y = preset.letter_affine(l).apply(&b);
            for j in 0..3 {
                nb[j] += y[j] / k;
            }
        }
        b = nb;
    }
    b
}

/// Cell maps of all `I^n` words, in index order.
fn trace_maps(preset: &FractalPreset, n: usize) -> Result<Vec<CellMap>> {
    let mut maps = vec![cell_map(preset, &Word::empty())?];
    for _ in 0..n {
        let mut next = Vec::with_capacity(maps.len() * preset.n_trace());
        for m in &maps {
            for &l in &preset.alphabet.i {
                next.push(extend_map(preset, m, l));
            }
        }
        maps = next;
    }
    Ok(maps)
}

impl TraceLevel {
    /// Centers (`ν`-barycenters) and parameters only; no level graph needed.
    pub fn geometry(preset: &FractalPreset, n: usize) -> Result<Self> {
        let count = preset.n_trace().checked_pow(n as u32).filter(|&c| c <= MAX_TRACE_CELLS);
        if count.is_none() {
            return Err(Error::RefineDepth { depth: n, available: max_depth(preset.n_trace()) });
        }
        let maps = trace_maps(preset, n)?;
        let seg = preset.trace.segment.as_ref().map(|(p, q)| (pad(p), pad(q)));
        let b = trace_barycenter(preset);
        let mut centers = Vec::with_capacity(maps.len());
        let mut params = seg.as_ref().map(|_| Vec::with_capacity(maps.len()));
        for m in &maps {
            centers.push(preset.euclid(&m.affine.apply(&b)));
            if let Some((p, q)) = &seg {
                let (a, b) = (m.affine.apply(p), m.affine.apply(q));
                let (ta, tb) = (segment_param(preset, &a).unwrap(), segment_param(preset, &b).unwrap());
                params.as_mut().unwrap().push((ta.min(tb), ta.max(tb)));
            }
        }
        Ok(TraceLevel { level: n, n_i: preset.n_trace(), centers, params, cells: Vec::new(), pairs: Vec::new() })
    }

    /// Geometry plus `↔` pairs, without enumerating all level-`n` cells when `M = 1`.
    pub fn build(preset: &FractalPreset, n: usize) -> Result<Self> {
        if preset.alphabet.m != 1 {
            return Self::with_adjacency(preset, &LevelCells::build(preset, n)?);
        }
        crate::geometry::check_level(n)?;
        let mut t = Self::geometry(preset, n)?;
        let b = preset.euclid(&trace_barycenter(preset));
        let hull: Vec<V3> = if preset.is_cells() {
            (0..1usize << preset.dim)
                .map(|c| {
                    let mut x = [0.0; 3];
                    for (k, v) in x.iter_mut().enumerate().take(preset.dim) {
                        *v = ((c >> k) & 1) as f64;
                    }
                    preset.euclid(&x)
                })
                .collect()
        } else {
            preset.template_points().iter().map(|p| preset.euclid(p)).collect()
        };
        let r0 = hull.iter().map(|x| dist(x, &b)).fold(0.0, f64::max);
        let reach = 2.0 * r0 * preset.alpha().powi(-(n as i32)) * (1.0 + 1e-6);
        let words: Vec<Word> = (0..t.len()).map(|k| word_at(&preset.alphabet.i, n, k)).collect();
        let boxes = words.iter().map(|w| cell_box(preset, w)).collect::<Result<Vec<_>>>()?;
        let tol = preset.tolerance * preset.alpha().powi(-(n as i32));
        for (a, c) in close_pairs(&t.centers, reach) {
            if geometries_meet(&boxes[a as usize].geometry, &boxes[c as usize].geometry, tol, preset) {
                t.pairs.push((a, c));
            }
        }
        t.pairs.sort_unstable();
        Ok(t)
    }

    /// Geometry plus canonical cells and the `↔` pairs at level `n`.
    pub fn with_adjacency(preset: &FractalPreset, cells: &LevelCells) -> Result<Self> {
        let n = cells.level;
        let mut t = Self::geometry(preset, n)?;
        let count = t.centers.len();
        t.cells = (0..count)
            .map(|k| {
                let w = word_at(&preset.alphabet.i, n, k);
                let c = reduce(&preset.alphabet, &w)?.canonical;
                Ok(cells.cell_index(&c).expect("canonical word"))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut by_cell: HashMap<usize, Vec<u32>> = HashMap::new();
        for (k, &c) in t.cells.iter().enumerate() {
            by_cell.entry(c).or_default().push(k as u32);
        }
        for (k, &c) in t.cells.iter().enumerate() {
            let near = cells.expand(&[c].into_iter().collect(), preset.alphabet.m);
            for d in near {
                if let Some(js) = by_cell.get(&d) {
                    for &j in js {
                        if (k as u32) < j {
                            t.pairs.push((k as u32, j));
                        }
                    }
                }
            }
        }
        t.pairs.sort_unstable();
        t.pairs.dedup();
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Unordered index pairs `i < j` with `|x_i - x_j| < r`, via a uniform bucket grid.
pub fn close_pairs(points: &[V3], r: f64) -> Vec<(u32, u32)> {
    let key = |x: &V3| [(x[0] / r).floor() as i64, (x[1] / r).floor() as i64, (x[2] / r).floor() as i64];
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for (k, x) in points.iter().enumerate() {
        grid.entry(key(x)).or_default().push(k as u32);
    }
    let mut out = Vec::new();
    for (k, x) in points.iter().enumerate() {
        let c = key(x);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(js) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &j in js {
                            if (k as u32) < j && dist(x, &points[j as usize]) < r {
                                out.push((k as u32, j));
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// `E_(n)(g) = Σ_{v↔w} (g(v) - g(w))²` over ordered pairs.
pub fn discrete_form(g: &CellAverageVector, level: &TraceLevel) -> Result<f64> {
    if g.level != level.level || g.values.len() != level.len() {
        return Err(Error::LevelMismatch(g.level, level.level));
    }
    Ok(2.0 * level.pairs.iter().map(|&(a, b)| (g.values[a as usize] - g.values[b as usize]).powi(2)).sum::<f64>())
}

/// How trace cells at the graph level are read from vertex values.
#[derive(Clone, Debug)]
pub struct TraceReadout {
    pub level: usize,
    pub n_i: usize,
    /// Per trace cell, vertex weights summing to 1.
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl TraceReadout {
    /// Anchor means (template graphs) or cell values (cell graphs) at the graph level.
    pub fn new(preset: &FractalPreset, g: &LevelGraph) -> Result<Self> {
        let n = g.level;
        let maps = trace_maps(preset, n)?;
        let tpl = preset.template_points();
        let tol = preset.tolerance * preset.alpha().powi(-(n as i32));
        let mut rows = Vec::with_capacity(maps.len());
        for (k, m) in maps.iter().enumerate() {
            let w = word_at(&preset.alphabet.i, n, k);
            let canon = reduce(&preset.alphabet, &w)?.canonical;
            let c = g.cells.cell_index(&canon).expect("canonical word");
            let verts = g.vertices_of_cell(c);
            if preset.is_cells() {
                rows.push(vec![(verts[0], 1.0)]);
                continue;
            }
            let anchors = &preset.trace.anchors;
            let mut row = Vec::with_capacity(anchors.len());
            for &a in anchors {
                let y = preset.euclid(&m.affine.apply(&tpl[a]));
                let v = verts
                    .iter()
                    .copied()
                    .find(|&v| dist(&g.coords[v as usize], &y) < tol.max(1e-12))
                    .ok_or_else(|| Error::InvalidPreset(format!("anchor {a} of trace cell {w} is not a vertex")))?;
                row.push((v, 1.0 / anchors.len() as f64));
            }
            rows.push(row);
        }
        Ok(TraceReadout { level: n, n_i: preset.n_trace(), rows })
    }

    pub fn read(&self, f: &[f64]) -> CellAverageVector {
        CellAverageVector {
            level: self.level,
            values: self.rows.iter().map(|r| r.iter().map(|&(v, w)| w * f[v as usize]).sum()).collect(),
        }
    }

    /// Weight rows of `Q_m` for `m ≤ level`, read through the graph.
    pub fn rows_at(&self, m: usize) -> Vec<Vec<(u32, f64)>> {
        let block = self.n_i.pow((self.level - m) as u32);
        (0..self.n_i.pow(m as u32))
            .map(|k| {
                let mut acc: HashMap<u32, f64> = HashMap::new();
                for r in &self.rows[k * block..(k + 1) * block] {
                    for &(v, w) in r {
                        *acc.entry(v).or_default() += w / block as f64;
                    }
                }
                let mut row: Vec<(u32, f64)> = acc.into_iter().collect();
                row.sort_by_key(|&(v, _)| v);
                row
            })
            .collect()
    }

    /// Vertices used by any trace cell (the vertices on `L`).
    pub fn trace_vertices(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.rows.iter().flat_map(|r| r.iter().map(|&(v, _)| v)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}
