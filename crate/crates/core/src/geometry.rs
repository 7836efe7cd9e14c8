//! Similitudes, presets, cell geometry and the intersection tests behind `∼` and `↔`.
//!
//! Presets in exact mode carry an integer form of every map: with base
//! `b = 1/scale`, the level-`n` image of an integer point `p` is
//! `(R_w p + T_w) / b^n` with integer `R_w`, `T_w`. Cells then compare
//! by integer equality. Float presets compare points within
//! `tolerance · α^{-n}`.

use std::collections::{BTreeSet, HashMap};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::{all_words, reduce, word_at, word_index, Adjacency, AlphabetSpec, Word};

pub type V3 = [f64; 3];
pub type M3 = [[f64; 3]; 3];
pub type IV3 = [i64; 3];
pub type IM3 = [[i64; 3]; 3];

pub const IDENTITY: M3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
const I_IDENTITY: IM3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

pub fn mat_vec(m: &M3, v: &V3) -> V3 {
    let mut o = [0.0; 3];
    for (i, row) in m.iter().enumerate() {
        o[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    o
}

pub fn mat_mul(a: &M3, b: &M3) -> M3 {
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    o
}

fn imat_vec(m: &IM3, v: &IV3) -> IV3 {
    let mut o = [0; 3];
    for (i, row) in m.iter().enumerate() {
        o[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    o
}

fn imat_mul(a: &IM3, b: &IM3) -> IM3 {
    let mut o = [[0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    o
}

pub fn dist(a: &V3, b: &V3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn inverse(m: &M3) -> Option<M3> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            o[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    Some(o)
}

/// `x ↦ lin·x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub lin: M3,
    pub t: V3,
}

impl Affine {
    pub fn identity() -> Self {
        Affine { lin: IDENTITY, t: [0.0; 3] }
    }

    pub fn apply(&self, x: &V3) -> V3 {
        let y = mat_vec(&self.lin, x);
        [y[0] + self.t[0], y[1] + self.t[1], y[2] + self.t[2]]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Affine) -> Affine {
        Affine { lin: mat_mul(&self.lin, &other.lin), t: self.apply(&other.t) }
    }
}

/// One letter map `x ↦ scale·matrix·x + translation`, as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similitude {
    pub scale: f64,
    pub matrix: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl Similitude {
    pub fn new(scale: f64, matrix: M3, translation: V3, dim: usize) -> Self {
        Similitude {
            scale,
            matrix: (0..dim).map(|i| matrix[i][..dim].to_vec()).collect(),
            translation: translation[..dim].to_vec(),
        }
    }

    /// `x ↦ (x - a)/α + a`.
    pub fn toward(a: V3, alpha: f64, dim: usize) -> Self {
        let s = 1.0 / alpha;
        Self::new(s, IDENTITY, [a[0] * (1.0 - s), a[1] * (1.0 - s), a[2] * (1.0 - s)], dim)
    }

    fn dense(&self, dim: usize) -> Result<(M3, V3)> {
        if self.matrix.len() != dim
            || self.matrix.iter().any(|r| r.len() != dim)
            || self.translation.len() != dim
        {
            return Err(Error::InvalidPreset(format!("map does not have dimension {dim}")));
        }
        let mut m = IDENTITY;
        let mut t = [0.0; 3];
        for i in 0..dim {
            for j in 0..dim {
                m[i][j] = self.matrix[i][j];
            }
            t[i] = self.translation[i];
        }
        Ok((m, t))
    }

    pub fn affine(&self, dim: usize) -> Result<Affine> {
        let (m, t) = self.dense(dim)?;
        let mut lin = IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                lin[i][j] = if i < dim && j < dim { self.scale * m[i][j] } else { m[i][j] };
            }
        }
        Ok(Affine { lin, t })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArithmeticMode {
    Exact,
    Float,
}

/// Renormalization factor; `exact` holds `(num, den)` when rational.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rho {
    pub value: f64,
    pub exact: Option<Ratio<i64>>,
}

impl Rho {
    pub fn rational(num: i64, den: i64) -> Self {
        let r = Ratio::new(num, den);
        Rho { value: num as f64 / den as f64, exact: Some(r) }
    }

    pub fn float(value: f64) -> Self {
        Rho { value, exact: None }
    }
}

/// How the level-n graph is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphModel {
    /// Images of the template points under all `F_w`, template edges copied per cell.
    Vertex { points: Vec<Vec<f64>>, edges: Vec<(usize, usize, f64)> },
    /// Level-n cells as vertices, face-adjacent cells joined.
    Cells,
}

/// Where `L` sits and how a trace cell is read off the graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    /// Template points of `L` whose images are averaged to read a trace cell (vertex model).
    #[serde(default)]
    pub anchors: Vec<usize>,
    /// Endpoints of `L` when it is a straight segment; enables closed-form test functions.
    #[serde(default)]
    pub segment: Option<(Vec<f64>, Vec<f64>)>,
}

/// Terminals for the resistance scaling estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terminals {
    Points { source: Vec<usize>, sink: Vec<usize> },
    /// Opposite faces `x_axis = 0` and `x_axis = 1` of the unit cube.
    Faces { axis: usize },
}

/// Integer form of an exact preset.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactIfs {
    pub base: i64,
    pub maps: Vec<(IM3, IV3)>,
    /// Template points (vertex model), integer in level-0 units.
    pub points: Vec<IV3>,
}

/// An iterated function system with the metadata the pipelines need.
#[derive(Clone, Debug)]
pub struct FractalPreset {
    pub name: String,
    pub dim: usize,
    pub alphabet: AlphabetSpec,
    pub maps: Vec<Similitude>,
    /// Isometries of the group, indexed like the group table.
    pub group: Vec<Similitude>,
    pub rho: Option<Rho>,
    pub mode: ArithmeticMode,
    pub tolerance: f64,
    /// Coordinates → Euclidean coordinates.
    pub frame: M3,
    pub model: GraphModel,
    pub trace: TraceSpec,
    pub terminals: Terminals,
    /// Trace distance constants `k_1 ≤ k_2`.
    pub k1: f64,
    pub k2: f64,
    /// Whether the ℓ²-summability condition on the trace holds.
    pub b4: bool,
    affines: Vec<Affine>,
    group_affines: Vec<Affine>,
    exact: Option<ExactIfs>,
}

pub struct PresetParts {
    pub name: String,
    pub dim: usize,
    pub alphabet: AlphabetSpec,
    pub maps: Vec<Similitude>,
    pub group: Vec<Similitude>,
    pub rho: Option<Rho>,
    pub mode: ArithmeticMode,
    pub tolerance: f64,
    pub frame: M3,
    pub model: GraphModel,
    pub trace: TraceSpec,
    pub terminals: Terminals,
    pub k1: f64,
    pub k2: f64,
    pub b4: bool,
}

fn round_int(x: f64, what: &str) -> Result<i64> {
    let r = x.round();
    if (x - r).abs() > 1e-9 {
        return Err(Error::InvalidPreset(format!("{what} is not an integer in exact mode ({x})")));
    }
    Ok(r as i64)
}

impl FractalPreset {
    pub fn from_parts(p: PresetParts) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidPreset(m));
        if !(1..=3).contains(&p.dim) {
            return bad(format!("ambient dimension {} not in 1..=3", p.dim));
        }
        p.alphabet.validate()?;
        if p.maps.len() != p.alphabet.w_size {
            return bad(format!("{} maps for {} letters", p.maps.len(), p.alphabet.w_size));
        }
        if p.group.len() != p.alphabet.group.order() {
            return bad("group isometries do not match the group table".into());
        }
        let finv = inverse(&p.frame).ok_or_else(|| Error::InvalidPreset("singular frame".into()))?;
        let mut affines = Vec::new();
        let scale = p.maps[0].scale;
        for (k, m) in p.maps.iter().enumerate() {
            if !(m.scale > 0.0 && m.scale < 1.0) {
                return bad(format!("map {k}: scale must lie in (0,1)"));
            }
            if (m.scale - scale).abs() > 1e-12 {
                return bad("all maps must share one contraction ratio".into());
            }
            let (lin, _) = m.dense(p.dim)?;
            check_isometry(&p.frame, &finv, &lin, p.dim).map_err(|e| {
                Error::InvalidPreset(format!("map {k}: linear part is not orthogonal ({e})"))
            })?;
            affines.push(m.affine(p.dim)?);
        }
        let mut group_affines = Vec::new();
        for (k, g) in p.group.iter().enumerate() {
            if (g.scale - 1.0).abs() > 1e-12 {
                return bad(format!("group element {k} is not an isometry"));
            }
            let (lin, _) = g.dense(p.dim)?;
            check_isometry(&p.frame, &finv, &lin, p.dim)
                .map_err(|e| Error::InvalidPreset(format!("group element {k}: {e}")))?;
            group_affines.push(g.affine(p.dim)?);
        }
        if let GraphModel::Vertex { points, edges } = &p.model {
            if points.iter().any(|q| q.len() != p.dim) {
                return bad("template points have the wrong dimension".into());
            }
            if edges.iter().any(|&(a, b, c)| a >= points.len() || b >= points.len() || a == b || c <= 0.0) {
                return bad("template edges malformed".into());
            }
            if p.trace.anchors.iter().any(|&a| a >= points.len()) || p.trace.anchors.is_empty() {
                return bad("trace anchors must index template points".into());
            }
        }
        if let Terminals::Points { source, sink } = &p.terminals {
            let n = match &p.model {
                GraphModel::Vertex { points, .. } => points.len(),
                GraphModel::Cells => 0,
            };
            if source.iter().chain(sink).any(|&i| i >= n) {
                return bad("resistance terminals must index template points".into());
            }
        }
        if !(p.k1 > 0.0 && p.k1 <= p.k2) {
            return bad("need 0 < k1 <= k2".into());
        }
        if !(p.tolerance > 0.0) {
            return bad("tolerance must be positive".into());
        }
        if let Some(r) = p.rho {
            if !(r.value > 0.0) {
                return bad("rho must be positive".into());
            }
        }
        let exact = match p.mode {
            ArithmeticMode::Float => None,
            ArithmeticMode::Exact => Some(exact_form(&p, scale)?),
        };
        if matches!(p.model, GraphModel::Cells) && p.mode != ArithmeticMode::Exact {
            return bad("cell-graph presets require exact mode".into());
        }
        Ok(FractalPreset {
            name: p.name,
            dim: p.dim,
            alphabet: p.alphabet,
            maps: p.maps,
            group: p.group,
            rho: p.rho,
            mode: p.mode,
            tolerance: p.tolerance,
            frame: p.frame,
            model: p.model,
            trace: p.trace,
            terminals: p.terminals,
            k1: p.k1,
            k2: p.k2,
            b4: p.b4,
            affines,
            group_affines,
            exact,
        })
    }

    pub fn alpha(&self) -> f64 {
        1.0 / self.maps[0].scale
    }

    pub fn n_cells(&self) -> usize {
        self.alphabet.s.len()
    }

    pub fn n_trace(&self) -> usize {
        self.alphabet.i.len()
    }

    pub fn exact(&self) -> Option<&ExactIfs> {
        self.exact.as_ref()
    }

    pub fn letter_affine(&self, letter: u8) -> &Affine {
        &self.affines[letter as usize]
    }

    pub fn group_affine(&self, g: usize) -> &Affine {
        &self.group_affines[g]
    }

    pub fn is_cells(&self) -> bool {
        matches!(self.model, GraphModel::Cells)
    }

    /// Template points as padded vectors (vertex model).
    pub fn template_points(&self) -> Vec<V3> {
        match &self.model {
            GraphModel::Vertex { points, .. } => points.iter().map(|q| pad(q)).collect(),
            GraphModel::Cells => Vec::new(),
        }
    }

    pub fn euclid(&self, x: &V3) -> V3 {
        mat_vec(&self.frame, x)
    }

    pub fn rho_value(&self) -> Result<f64> {
        self.rho.map(|r| r.value).ok_or_else(|| Error::MissingRho(self.name.clone()))
    }
}

pub fn pad(q: &[f64]) -> V3 {
    let mut o = [0.0; 3];
    for (i, x) in q.iter().take(3).enumerate() {
        o[i] = *x;
    }
    o
}

fn check_isometry(frame: &M3, finv: &M3, lin: &M3, dim: usize) -> std::result::Result<(), String> {
    let e = mat_mul(&mat_mul(frame, lin), finv);
    for i in 0..dim {
        for j in 0..dim {
            let dot: f64 = (0..dim).map(|k| e[k][i] * e[k][j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot - want).abs() > 1e-12 {
                return Err(format!("Gram entry ({i},{j}) = {dot}"));
            }
        }
    }
    Ok(())
}

fn exact_form(p: &PresetParts, scale: f64) -> Result<ExactIfs> {
    let base = round_int(1.0 / scale, "1/scale")?;
    if base < 2 {
        return Err(Error::InvalidPreset("exact mode needs an integer base >= 2".into()));
    }
    let mut maps = Vec::new();
    for m in &p.maps {
        let (lin, t) = m.dense(p.dim)?;
        let mut r = I_IDENTITY;
        let mut tt = [0i64; 3];
        for i in 0..p.dim {
            for j in 0..p.dim {
                r[i][j] = round_int(lin[i][j], "matrix entry")?;
            }
            tt[i] = round_int(t[i] * base as f64, "translation times base")?;
        }
        maps.push((r, tt));
    }
    let points = match &p.model {
        GraphModel::Vertex { points, .. } => points
            .iter()
            .map(|q| {
                let mut o = [0i64; 3];
                for (i, x) in q.iter().enumerate() {
                    o[i] = round_int(*x, "template point")?;
                }
                Ok(o)
            })
            .collect::<Result<Vec<_>>>()?,
        GraphModel::Cells => Vec::new(),
    };
    Ok(ExactIfs { base, maps, points })
}

/// `F_w` in float form plus, for exact presets, the integer form at level `|w|`.
#[derive(Clone, Debug)]
pub struct CellMap {
    pub affine: Affine,
    pub exact: Option<(IM3, IV3)>,
    pub level: usize,
}

impl CellMap {
    /// `b^n F_w(p)` for an integer point `p`.
    pub fn exact_point(&self, p: &IV3) -> Option<IV3> {
        self.exact.as_ref().map(|(r, t)| {
            let v = imat_vec(r, p);
            [v[0] + t[0], v[1] + t[1], v[2] + t[2]]
        })
    }
}

pub fn cell_map(preset: &FractalPreset, w: &Word) -> Result<CellMap> {
    preset.alphabet.check_word(w)?;
    let mut aff = Affine::identity();
    let mut ex = preset.exact.as_ref().map(|_| (I_IDENTITY, [0i64; 3]));
    for &l in w.letters() {
        aff = aff.compose(&preset.affines[l as usize]);
        if let (Some((r, t)), Some(e)) = (ex.as_mut(), preset.exact.as_ref()) {
            let (ri, ti) = &e.maps[l as usize];
            let rt = imat_vec(r, ti);
            let nt = [rt[0] + e.base * t[0], rt[1] + e.base * t[1], rt[2] + e.base * t[2]];
            *r = imat_mul(r, ri);
            *t = nt;
        }
    }
    Ok(CellMap { affine: aff, exact: ex, level: w.level() })
}

/// Geometry of one cell at level `|word|`.
#[derive(Clone, Debug, PartialEq)]
pub enum CellGeometry {
    /// Lattice points in units `b^{-n}`.
    ExactVertices(Vec<IV3>),
    /// Closed box `[lo, hi]` in units `b^{-n}`.
    Box { lo: IV3, hi: IV3 },
    FloatVertices(Vec<V3>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellBox {
    pub word: Word,
    pub geometry: CellGeometry,
}

pub fn cell_box(preset: &FractalPreset, w: &Word) -> Result<CellBox> {
    let cm = cell_map(preset, w)?;
    let geometry = match (&preset.model, &preset.exact) {
        (GraphModel::Cells, Some(_)) => {
            let mut lo = [i64::MAX; 3];
            let mut hi = [i64::MIN; 3];
            for corner in 0..(1usize << preset.dim) {
                let mut p = [0i64; 3];
                for (k, x) in p.iter_mut().enumerate().take(preset.dim) {
                    *x = ((corner >> k) & 1) as i64;
                }
                let q = cm.exact_point(&p).expect("exact");
                for k in 0..3 {
                    lo[k] = lo[k].min(q[k]);
                    hi[k] = hi[k].max(q[k]);
                }
            }
            CellGeometry::Box { lo, hi }
        }
        (GraphModel::Vertex { .. }, Some(e)) => {
            CellGeometry::ExactVertices(e.points.iter().map(|p| cm.exact_point(p).unwrap()).collect())
        }
        _ => CellGeometry::FloatVertices(
            preset.template_points().iter().map(|p| cm.affine.apply(p)).collect(),
        ),
    };
    Ok(CellBox { word: w.clone(), geometry })
}

/// `K_v ∩ K_w ≠ ∅` for `v`, `w` of the same level.
pub fn cells_adjacent(preset: &FractalPreset, v: &Word, w: &Word) -> Result<bool> {
    if v.level() != w.level() {
        return Err(Error::LevelMismatch(v.level(), w.level()));
    }
    let a = cell_box(preset, v)?;
    let b = cell_box(preset, w)?;
    let tol = preset.tolerance * preset.alpha().powi(-(v.level() as i32));
    Ok(geometries_meet(&a.geometry, &b.geometry, tol, preset))
}

pub(crate) fn geometries_meet(a: &CellGeometry, b: &CellGeometry, tol: f64, preset: &FractalPreset) -> bool {
    match (a, b) {
        (CellGeometry::ExactVertices(p), CellGeometry::ExactVertices(q)) => p.iter().any(|x| q.contains(x)),
        (CellGeometry::Box { lo: l1, hi: h1 }, CellGeometry::Box { lo: l2, hi: h2 }) => {
            (0..3).all(|k| l1[k] <= h2[k] && l2[k] <= h1[k])
        }
        (CellGeometry::FloatVertices(p), CellGeometry::FloatVertices(q)) => p
            .iter()
            .any(|x| q.iter().any(|y| dist(&preset.euclid(x), &preset.euclid(y)) < tol)),
        _ => false,
    }
}

/// `v ↔ w`: `v ∈ 𝒩_M(w)` for words over `I`.
pub fn trace_adjacent(preset: &FractalPreset, v: &Word, w: &Word) -> Result<bool> {
    if v.level() != w.level() {
        return Err(Error::LevelMismatch(v.level(), w.level()));
    }
    let i = &preset.alphabet.i;
    preset.alphabet.check_word_over(v, i, "I")?;
    preset.alphabet.check_word_over(w, i, "I")?;
    if preset.alphabet.m == 1 {
        return cells_adjacent(preset, v, w);
    }
    let cells = LevelCells::build(preset, v.level())?;
    let start: BTreeSet<Word> = [w.clone()].into_iter().collect();
    let nb = crate::word::neighborhood(&start, preset.alphabet.m, &cells)?;
    Ok(nb.contains(v))
}

/// `μ(K_w) = N^{-|w|}` for `w` over `S`, or `ν(L_w) = N_I^{-|w|}` when `trace` is set.
pub fn cell_measure(preset: &FractalPreset, w: &Word, trace: bool) -> Result<Ratio<i64>> {
    let (set, name, n) = if trace {
        (&preset.alphabet.i, "I", preset.n_trace())
    } else {
        (&preset.alphabet.s, "S", preset.n_cells())
    };
    preset.alphabet.check_word_over(w, set, name)?;
    Ok(Ratio::new(1, (n as i64).pow(w.level() as u32)))
}

/// Point key for vertex deduplication.
#[derive(Clone, Debug)]
enum PointIndex {
    Exact(HashMap<IV3, u32>),
    Float { buckets: HashMap<IV3, Vec<u32>>, cell: f64, tol: f64 },
}

/// All level-`n` cells over `S`, their points, and the intersection graph between them.
///
/// Cell `k` is the `k`-th word of `all_words(S, n)`.
#[derive(Clone, Debug)]
pub struct LevelCells {
    pub level: usize,
    pub n_cells: usize,
    /// Vertex model: `k` point ids per cell (`stride = k`). Empty for boxes.
    pub cell_points: Vec<u32>,
    pub stride: usize,
    /// Vertex model: deduplicated points (coordinates, not Euclidean).
    pub points: Vec<V3>,
    pub exact_points: Vec<IV3>,
    /// Box model: lower corners in units `b^{-n}`.
    pub origins: Vec<IV3>,
    origin_index: HashMap<IV3, u32>,
    neighbors: Vec<Vec<u32>>,
    s_letters: Vec<u8>,
    dim: usize,
}

/// Fails with [`Error::LevelCap`] above [`crate::level_cap`].
pub fn check_level(n: usize) -> Result<()> {
    let cap = crate::level_cap();
    if n > cap {
        return Err(Error::LevelCap { level: n, cap });
    }
    Ok(())
}

impl LevelCells {
    pub fn build(preset: &FractalPreset, n: usize) -> Result<Self> {
        check_level(n)?;
        let s = preset.alphabet.s.clone();
        let n_cells = s.len().pow(n as u32);
        let mut lc = LevelCells {
            level: n,
            n_cells,
            cell_points: Vec::new(),
            stride: 0,
            points: Vec::new(),
            exact_points: Vec::new(),
            origins: Vec::new(),
            origin_index: HashMap::new(),
            neighbors: Vec::new(),
            s_letters: s.clone(),
            dim: preset.dim,
        };
        // Enumerate cell maps level by level to share prefixes.
        let mut maps = vec![cell_map(preset, &Word::empty())?];
        for _ in 0..n {
            let mut next = Vec::with_capacity(maps.len() * s.len());
            for m in &maps {
                for &l in &s {
                    next.push(extend_map(preset, m, l));
                }
            }
            maps = next;
        }
        match &preset.model {
            GraphModel::Cells => {
                for (k, m) in maps.iter().enumerate() {
                    let b = cell_box_from_map(preset, m);
                    lc.origin_index.insert(b, k as u32);
                    lc.origins.push(b);
                }
            }
            GraphModel::Vertex { points, .. } => {
                lc.stride = points.len();
                let mut index = match preset.exact {
                    Some(_) => PointIndex::Exact(HashMap::new()),
                    None => {
                        let tol = preset.tolerance * preset.alpha().powi(-(n as i32));
                        PointIndex::Float { buckets: HashMap::new(), cell: 4.0 * tol, tol }
                    }
                };
                let tpl = preset.template_points();
                let expts = preset.exact.as_ref().map(|e| e.points.clone()).unwrap_or_default();
                for m in &maps {
                    for (pi, p) in tpl.iter().enumerate() {
                        let id = match &mut index {
                            PointIndex::Exact(h) => {
                                let q = m.exact_point(&expts[pi]).unwrap();
                                let next = lc.exact_points.len() as u32;
                                let id = *h.entry(q).or_insert(next);
                                if id == next {
                                    lc.exact_points.push(q);
                                    let b = preset.exact.as_ref().unwrap().base as f64;
                                    let sc = b.powi(-(n as i32));
                                    lc.points.push([q[0] as f64 * sc, q[1] as f64 * sc, q[2] as f64 * sc]);
                                }
                                id
                            }
                            PointIndex::Float { buckets, cell, tol } => {
                                let x = m.affine.apply(p);
                                let e = preset.euclid(&x);
                                let key = [
                                    (e[0] / *cell).floor() as i64,
                                    (e[1] / *cell).floor() as i64,
                                    (e[2] / *cell).floor() as i64,
                                ];
                                let mut found = None;
                                'outer: for dx in -1..=1 {
                                    for dy in -1..=1 {
                                        for dz in -1..=1 {
                                            let k2 = [key[0] + dx, key[1] + dy, key[2] + dz];
                                            if let Some(ids) = buckets.get(&k2) {
                                                for &id in ids {
                                                    let y = preset.euclid(&lc.points[id as usize]);
                                                    if dist(&e, &y) < *tol {
                                                        found = Some(id);
                                                        break 'outer;
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                                match found {
                                    Some(id) => id,
                                    None => {
                                        let id = lc.points.len() as u32;
                                        lc.points.push(x);
                                        buckets.entry(key).or_default().push(id);
                                        id
                                    }
                                }
                            }
                        };
                        lc.cell_points.push(id);
                    }
                }
            }
        }
        lc.neighbors = lc.compute_neighbors();
        Ok(lc)
    }

    fn compute_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nb: Vec<Vec<u32>> = vec![Vec::new(); self.n_cells];
        if self.stride > 0 {
            let mut incident: Vec<Vec<u32>> = vec![Vec::new(); self.points.len()];
            for c in 0..self.n_cells {
                for &p in &self.cell_points[c * self.stride..(c + 1) * self.stride] {
                    incident[p as usize].push(c as u32);
                }
            }
            for c in 0..self.n_cells {
                let mut v: Vec<u32> = self.cell_points[c * self.stride..(c + 1) * self.stride]
                    .iter()
                    .flat_map(|&p| incident[p as usize].iter().copied())
                    .collect();
                v.sort_unstable();
                v.dedup();
                nb[c] = v;
            }
        } else {
            let offsets = box_offsets(self.dim);
            for (c, o) in self.origins.iter().enumerate() {
                let mut v: Vec<u32> = offsets
                    .iter()
                    .filter_map(|d| self.origin_index.get(&[o[0] + d[0], o[1] + d[1], o[2] + d[2]]).copied())
                    .collect();
                v.sort_unstable();
                nb[c] = v;
            }
        }
        nb
    }

    /// Cells meeting cell `c` (including `c`).
    pub fn neighbors_of(&self, c: usize) -> &[u32] {
        &self.neighbors[c]
    }

    pub fn cell_index(&self, w: &Word) -> Option<usize> {
        if w.level() != self.level {
            return None;
        }
        word_index(&self.s_letters, w)
    }

    pub fn cell_word(&self, c: usize) -> Word {
        word_at(&self.s_letters, self.level, c)
    }

    pub fn cell_index_of_box(&self, origin: &IV3) -> Option<usize> {
        self.origin_index.get(origin).map(|&c| c as usize)
    }

    /// Point ids of cell `c` (vertex model).
    pub fn points_of(&self, c: usize) -> &[u32] {
        &self.cell_points[c * self.stride..(c + 1) * self.stride]
    }

    /// `𝒩_k` of a set of cell indices.
    pub fn expand(&self, set: &BTreeSet<usize>, k: usize) -> BTreeSet<usize> {
        let mut cur = set.clone();
        let mut frontier: Vec<usize> = set.iter().copied().collect();
        for _ in 0..k {
            let mut next = Vec::new();
            for &c in &frontier {
                for &d in &self.neighbors[c] {
                    if cur.insert(d as usize) {
                        next.push(d as usize);
                    }
                }
            }
            frontier = next;
        }
        cur
    }
}

impl Adjacency for LevelCells {
    fn neighbors(&self, w: &Word) -> Result<Vec<Word>> {
        let c = self
            .cell_index(w)
            .ok_or_else(|| Error::InvalidInput(format!("word {w} is not a level-{} S-word", self.level)))?;
        Ok(self.neighbors[c].iter().map(|&d| self.cell_word(d as usize)).collect())
    }
}

/// Neighborhoods of `W`-words via their reductions.
pub struct WordAdjacency<'a> {
    pub preset: &'a FractalPreset,
    pub cells: &'a LevelCells,
    preimages: Option<HashMap<Word, Vec<Word>>>,
}

impl<'a> WordAdjacency<'a> {
    pub fn new(preset: &'a FractalPreset, cells: &'a LevelCells) -> Result<Self> {
        let simple = preset.alphabet.s.len() == preset.alphabet.w_size;
        let preimages = if simple {
            None
        } else {
            let letters: Vec<u8> = (0..preset.alphabet.w_size as u8).collect();
            let mut map: HashMap<Word, Vec<Word>> = HashMap::new();
            for w in all_words(&letters, cells.level) {
                let r = reduce(&preset.alphabet, &w)?;
                map.entry(r.canonical).or_default().push(w);
            }
            Some(map)
        };
        Ok(WordAdjacency { preset, cells, preimages })
    }
}

impl Adjacency for WordAdjacency<'_> {
    fn neighbors(&self, w: &Word) -> Result<Vec<Word>> {
        let canon = reduce(&self.preset.alphabet, w)?.canonical;
        let nb = self.cells.neighbors(&canon)?;
        Ok(match &self.preimages {
            None => nb,
            Some(map) => nb.iter().flat_map(|v| map.get(v).cloned().unwrap_or_default()).collect(),
        })
    }
}

fn box_offsets(dim: usize) -> Vec<IV3> {
    let mut out = Vec::new();
    let r = |k: usize| if k < dim { -1..=1 } else { 0..=0 };
    for a in r(0) {
        for b in r(1) {
            for c in r(2) {
                out.push([a, b, c]);
            }
        }
    }
    out
}

pub(crate) fn extend_map(preset: &FractalPreset, m: &CellMap, letter: u8) -> CellMap {
    let affine = m.affine.compose(preset.letter_affine(letter));
    let exact = match (&m.exact, &preset.exact) {
        (Some((r, t)), Some(e)) => {
            let (ri, ti) = &e.maps[letter as usize];
            let rt = imat_vec(r, ti);
            Some((imat_mul(r, ri), [rt[0] + e.base * t[0], rt[1] + e.base * t[1], rt[2] + e.base * t[2]]))
        }
        _ => None,
    };
    CellMap { affine, exact, level: m.level + 1 }
}

fn cell_box_from_map(preset: &FractalPreset, m: &CellMap) -> IV3 {
    let mut lo = [i64::MAX; 3];
    for corner in 0..(1usize << preset.dim) {
        let mut p = [0i64; 3];
        for (k, x) in p.iter_mut().enumerate().take(preset.dim) {
            *x = ((corner >> k) & 1) as i64;
        }
        let q = m.exact_point(&p).expect("exact");
        for k in 0..3 {
            lo[k] = lo[k].min(q[k]);
        }
    }
    for x in lo.iter_mut().skip(preset.dim) {
        *x = 0;
    }
    lo
}

/// Per-condition outcome of the carpet checks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarpetReport {
    pub l: usize,
    pub dim: usize,
    pub cells: usize,
    pub symmetry: bool,
    pub connectivity: bool,
    pub non_diagonality: bool,
    pub borders_included: bool,
}

impl CarpetReport {
    pub fn all_pass(&self) -> bool {
        self.symmetry && self.connectivity && self.non_diagonality && self.borders_included
    }
}

/// Symmetry, connectivity, non-diagonality and borders for a generalized carpet pattern.
pub fn verify_carpet_conditions(l: usize, pattern: &BTreeSet<Vec<usize>>) -> Result<CarpetReport> {
    let dim = pattern
        .iter()
        .next()
        .map(|c| c.len())
        .ok_or_else(|| Error::InvalidInput("empty carpet pattern".into()))?;
    if l < 2 || dim == 0 || pattern.iter().any(|c| c.len() != dim || c.iter().any(|&x| x >= l)) {
        return Err(Error::InvalidInput("pattern cells must lie in the l^n grid".into()));
    }
    let symmetry = hyperoctahedral(dim).iter().all(|(perm, flip)| {
        pattern.iter().all(|c| {
            let img: Vec<usize> = (0..dim)
                .map(|k| if flip[k] { l - 1 - c[perm[k]] } else { c[perm[k]] })
                .collect();
            pattern.contains(&img)
        })
    });
    let touching = |a: &Vec<usize>, b: &Vec<usize>| (0..dim).all(|k| a[k].abs_diff(b[k]) <= 1);
    let face = |a: &Vec<usize>, b: &Vec<usize>| (0..dim).map(|k| a[k].abs_diff(b[k])).sum::<usize>() == 1;
    let all: Vec<Vec<usize>> = pattern.iter().cloned().collect();
    let connectivity = connected(&all, &touching);
    let mut non_diagonality = true;
    let corners = grid(l - 1, dim);
    for corner in &corners {
        let block: Vec<Vec<usize>> = grid(2, dim)
            .into_iter()
            .map(|o| (0..dim).map(|k| corner[k] + o[k]).collect::<Vec<_>>())
            .filter(|c| pattern.contains(c))
            .collect();
        if !block.is_empty() && !connected(&block, &face) {
            non_diagonality = false;
        }
    }
    let borders_included = (0..l).all(|x| {
        let mut c = vec![0; dim];
        c[0] = x;
        pattern.contains(&c)
    });
    Ok(CarpetReport {
        l,
        dim,
        cells: pattern.len(),
        symmetry,
        connectivity,
        non_diagonality,
        borders_included,
    })
}

fn grid(side: usize, dim: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..side).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

fn connected(cells: &[Vec<usize>], rel: &dyn Fn(&Vec<usize>, &Vec<usize>) -> bool) -> bool {
    if cells.is_empty() {
        return true;
    }
    let mut seen = vec![false; cells.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..cells.len() {
            if !seen[j] && rel(&cells[i], &cells[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn hyperoctahedral(dim: usize) -> Vec<(Vec<usize>, Vec<bool>)> {
    let mut perms: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for p in &perms {
            for x in (0..dim).filter(|x| !p.contains(x)) {
                let mut q = p.clone();
                q.push(x);
                next.push(q);
            }
        }
        perms = next;
    }
    let mut out = Vec::new();
    for p in perms {
        for mask in 0..(1usize << dim) {
            out.push((p.clone(), (0..dim).map(|k| (mask >> k) & 1 == 1).collect()));
        }
    }
    out
}

/// Bounded-neighborhood and center-distance checks at levels `1..=n_max`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdjacencyReport {
    /// `max_w #(𝒩_1(w) ∩ S^n)` over the tested levels.
    pub max_neighbors: usize,
    /// Largest center distance between adjacent cells, in units `α^{-n}`.
    pub max_adjacent_distance: f64,
    /// Smallest center distance between non-adjacent cells, in units `α^{-n}`.
    pub min_separated_distance: f64,
}

pub fn adjacency_report(preset: &FractalPreset, n_max: usize) -> Result<AdjacencyReport> {
    let mut rep = AdjacencyReport {
        max_neighbors: 0,
        max_adjacent_distance: 0.0,
        min_separated_distance: f64::INFINITY,
    };
    for n in 1..=n_max {
        let cells = LevelCells::build(preset, n)?;
        let centers = cell_centers(preset, &cells);
        let unit = preset.alpha().powi(-(n as i32));
        for c in 0..cells.n_cells {
            let nb = cells.neighbors_of(c);
            rep.max_neighbors = rep.max_neighbors.max(nb.len());
            for d in 0..cells.n_cells {
                let r = dist(&centers[c], &centers[d]) / unit;
                if nb.contains(&(d as u32)) {
                    rep.max_adjacent_distance = rep.max_adjacent_distance.max(r);
                } else {
                    rep.min_separated_distance = rep.min_separated_distance.min(r);
                }
            }
        }
    }
    Ok(rep)
}

/// Euclidean centers (vertex mean, or box center) of every cell.
pub fn cell_centers(preset: &FractalPreset, cells: &LevelCells) -> Vec<V3> {
    (0..cells.n_cells)
        .map(|c| {
            let x = if cells.stride > 0 {
                let pts = cells.points_of(c);
                let mut s = [0.0; 3];
                for &p in pts {
                    for k in 0..3 {
                        s[k] += cells.points[p as usize][k];
                    }
                }
                s.map(|v| v / pts.len() as f64)
            } else {
                let b = preset.exact().unwrap().base as f64;
                let sc = b.powi(-(cells.level as i32));
                let o = cells.origins[c];
                let mut x = [0.0; 3];
                for k in 0..preset.dim {
                    x[k] = (o[k] as f64 + 0.5) * sc;
                }
                x
            };
            preset.euclid(&x)
        })
        .collect()
}
