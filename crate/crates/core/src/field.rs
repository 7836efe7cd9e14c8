//! Fractal fields: several presets placed in a common frame and glued along
//! declared interface segments, the superposed energy, and a reversible random
//! walk on the merged graph.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyForm;
use crate::exponents::rho_or_estimate;
use crate::error::{Error, Result};
use crate::geometry::FractalPreset;
use crate::graph::{LevelGraph, Network};
use crate::presets::{builtin, PresetDoc};

pub type Q = Ratio<i64>;
pub type QPoint = [Q; 3];

/// A rational number given as an integer or a string like `"3/4"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatDoc {
    Int(i64),
    Str(String),
}

impl RatDoc {
    pub fn value(&self) -> Result<Q> {
        match self {
            RatDoc::Int(k) => Ok(Q::from_integer(*k)),
            RatDoc::Str(s) => Q::from_str(s.trim()).map_err(|_| Error::InvalidInput(format!("not a rational: '{s}'"))),
        }
    }
}

fn qpoint(v: &[RatDoc]) -> Result<QPoint> {
    if v.is_empty() || v.len() > 3 {
        return Err(Error::InvalidInput("points need 1 to 3 coordinates".into()));
    }
    let mut p = [Q::zero(); 3];
    for (k, x) in v.iter().enumerate() {
        p[k] = x.value()?;
    }
    Ok(p)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PresetRef {
    Name(String),
    Inline(Box<PresetDoc>),
}

impl PresetRef {
    pub fn resolve(&self) -> Result<FractalPreset> {
        match self {
            PresetRef::Name(n) => builtin(n),
            PresetRef::Inline(doc) => doc.as_ref().clone().into_preset(),
        }
    }
}

/// `x ↦ M x + t` in template coordinates, `M` an integer matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub matrix: Vec<Vec<i64>>,
    pub translation: Vec<RatDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub preset: PresetRef,
    pub level: usize,
    #[serde(default)]
    pub placement: Option<Placement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub components: [usize; 2],
    /// Closed segment in the common frame.
    pub segment: [Vec<RatDoc>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartSpec {
    pub component: usize,
    /// The vertex nearest this point (common frame) among the component's vertices.
    pub point: Vec<f64>,
}

/// Input of the `simulate` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexSpec {
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub interfaces: Vec<InterfaceSpec>,
    #[serde(default)]
    pub start: Option<StartSpec>,
    #[serde(default)]
    pub steps: Option<u64>,
}

pub struct Component {
    pub preset: FractalPreset,
    pub level: usize,
    pub graph: LevelGraph,
    pub rho: f64,
    pub rho_estimated: bool,
    /// Merged vertex of each local vertex.
    pub to_merged: Vec<u32>,
    /// Placed exact coordinates.
    pub points: Vec<QPoint>,
}

pub struct GluedComplex {
    pub components: Vec<Component>,
    /// Per declared interface: the identified merged vertices.
    pub interfaces: Vec<([usize; 2], Vec<u32>)>,
    /// Merged network with conductances `ρ_i^{n_i} c`.
    pub merged: Network,
    /// Lowest component containing each merged vertex.
    pub tags: Vec<u32>,
    pub on_interface: Vec<bool>,
    /// Approximate common-frame coordinates of merged vertices.
    pub coords: Vec<[f64; 3]>,
}

fn on_segment(p: &QPoint, a: &QPoint, b: &QPoint) -> bool {
    let d: Vec<Q> = (0..3).map(|k| b[k] - a[k]).collect();
    let e: Vec<Q> = (0..3).map(|k| p[k] - a[k]).collect();
    let cross = [d[1] * e[2] - d[2] * e[1], d[2] * e[0] - d[0] * e[2], d[0] * e[1] - d[1] * e[0]];
    if cross.iter().any(|c| !c.is_zero()) {
        return false;
    }
    let dot: Q = (0..3).map(|k| d[k] * e[k]).sum();
    let len: Q = (0..3).map(|k| d[k] * d[k]).sum();
    dot >= Q::zero() && dot <= len
}

fn to_f64(q: &Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// The graph a component contributes: template images, or box corners for carpets.
fn component_graph(preset: &FractalPreset, level: usize) -> Result<LevelGraph> {
    if preset.exact().is_none() {
        return Err(Error::Gluing(format!("preset '{}' has no exact coordinates", preset.name)));
    }
    if preset.is_cells() {
        LevelGraph::corner_graph(preset, level)
    } else {
        LevelGraph::build(preset, level)
    }
}

fn component_rho(preset: &FractalPreset, level: usize) -> Result<(f64, bool)> {
    let (rho, source) = rho_or_estimate(preset, level.clamp(1, 2))?;
    Ok((rho, source == "estimated"))
}

pub fn build_glued(spec: &ComplexSpec) -> Result<GluedComplex> {
    if spec.components.is_empty() {
        return Err(Error::InvalidInput("a field needs at least one component".into()));
    }
    let mut comps = Vec::with_capacity(spec.components.len());
    for c in &spec.components {
        let preset = c.preset.resolve()?;
        let graph = component_graph(&preset, c.level)?;
        let (rho, rho_estimated) = component_rho(&preset, c.level)?;
        let base = preset.exact().unwrap().base;
        let scale = Q::new(1, base.checked_pow(c.level as u32).ok_or_else(|| Error::InvalidInput("level too deep for exact gluing".into()))?);
        let dim = preset.dim;
        let (m, t) = match &c.placement {
            None => {
                let mut m = vec![vec![0i64; dim]; dim];
                for (k, row) in m.iter_mut().enumerate() {
                    row[k] = 1;
                }
                (m, [Q::zero(); 3])
            }
            Some(p) => {
                if p.matrix.len() != dim || p.matrix.iter().any(|r| r.len() != dim) || p.translation.len() != dim {
                    return Err(Error::InvalidInput(format!("placement of '{}' must be {dim}-dimensional", preset.name)));
                }
                (p.matrix.clone(), qpoint(&p.translation)?)
            }
        };
        let points = graph
            .exact_coords
            .iter()
            .map(|x| {
                let mut y = t;
                for i in 0..dim {
                    for j in 0..dim {
                        y[i] += Q::from_integer(m[i][j] * x[j]) * scale;
                    }
                }
                y
            })
            .collect();
        comps.push(Component { preset, level: c.level, graph, rho, rho_estimated, to_merged: Vec::new(), points });
    }
    // identify along declared interfaces
    let mut merged_of: Vec<Vec<Option<u32>>> = comps.iter().map(|c| vec![None; c.points.len()]).collect();
    let mut n_merged = 0u32;
    let mut tags = Vec::new();
    let mut coords = Vec::new();
    let mut interfaces = Vec::new();
    let mut index: Vec<HashMap<QPoint, u32>> = Vec::with_capacity(comps.len());
    for c in &comps {
        index.push(c.points.iter().enumerate().map(|(k, p)| (*p, k as u32)).collect());
    }
    let mut on_interface_points: Vec<Vec<bool>> = comps.iter().map(|c| vec![false; c.points.len()]).collect();
    for (ci, c) in comps.iter().enumerate() {
        for v in 0..c.points.len() {
            if merged_of[ci][v].is_none() {
                merged_of[ci][v] = Some(n_merged);
                tags.push(ci as u32);
                coords.push([to_f64(&c.points[v][0]), to_f64(&c.points[v][1]), to_f64(&c.points[v][2])]);
                n_merged += 1;
            }
        }
        for iface in spec.interfaces.iter().filter(|f| f.components[0].min(f.components[1]) == ci) {
            let [i, j] = iface.components;
            if i == j || j.max(i) >= comps.len() {
                return Err(Error::Gluing(format!("bad interface components {:?}", iface.components)));
            }
            let (lo, hi) = (i.min(j), i.max(j));
            let (a, b) = (qpoint(&iface.segment[0])?, qpoint(&iface.segment[1])?);
            let mut shared = Vec::new();
            for (v, p) in comps[lo].points.iter().enumerate() {
                if !on_segment(p, &a, &b) {
                    continue;
                }
                if let Some(&u) = index[hi].get(p) {
                    let target = merged_of[lo][v].unwrap();
                    match merged_of[hi][u as usize] {
                        Some(t) if t != target => {
                            return Err(Error::Gluing(format!("vertex {u} of component {hi} identified twice")))
                        }
                        _ => merged_of[hi][u as usize] = Some(target),
                    }
                    on_interface_points[lo][v] = true;
                    on_interface_points[hi][u as usize] = true;
                    shared.push(target);
                }
            }
            if shared.is_empty() {
                return Err(Error::Gluing(format!("empty interface between components {lo} and {hi}")));
            }
            interfaces.push(([lo, hi], shared));
        }
    }
    // undeclared contacts would silently disconnect coincident vertices
    for (ci, c) in comps.iter().enumerate() {
        for (v, p) in c.points.iter().enumerate() {
            for (cj, idx) in index.iter().enumerate().skip(ci + 1) {
                if let Some(&u) = idx.get(p) {
                    if merged_of[ci][v] != merged_of[cj][u as usize] {
                        return Err(Error::Gluing(format!(
                            "components {ci} and {cj} meet outside the declared interfaces"
                        )));
                    }
                }
            }
        }
    }
    let mut on_interface = vec![false; n_merged as usize];
    let mut weights: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (ci, c) in comps.iter_mut().enumerate() {
        c.to_merged = merged_of[ci].iter().map(|m| m.unwrap()).collect();
        for (v, &f) in on_interface_points[ci].iter().enumerate() {
            if f {
                on_interface[c.to_merged[v] as usize] = true;
            }
        }
        let s = c.rho.powi(c.level as i32);
        for &(a, b, w) in &c.graph.net.edges {
            let (x, y) = (c.to_merged[a as usize], c.to_merged[b as usize]);
            *weights.entry((x.min(y), x.max(y))).or_default() += s * w;
        }
    }
    let merged = Network::from_edges(n_merged as usize, weights.into_iter().map(|((a, b), w)| (a, b, w)).collect())?;
    Ok(GluedComplex { components: comps, interfaces, merged, tags, on_interface, coords })
}

impl GluedComplex {
    pub fn n_vertices(&self) -> usize {
        self.merged.n
    }

    /// Merged vertex nearest a common-frame point within one component.
    pub fn vertex_near(&self, component: usize, point: &[f64]) -> Result<u32> {
        let c = self
            .components
            .get(component)
            .ok_or_else(|| Error::InvalidInput(format!("no component {component}")))?;
        let p = crate::geometry::pad(point);
        c.to_merged
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = crate::geometry::dist(&self.coords[a as usize], &p);
                let db = crate::geometry::dist(&self.coords[b as usize], &p);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .ok_or_else(|| Error::InvalidInput("empty component".into()))
    }

    /// Per component: `(ρN)^n` and `ρ^n α^{2n}`, the two natural time scales.
    pub fn time_scales(&self) -> Vec<ComponentScales> {
        self.components
            .iter()
            .map(|c| {
                let n = c.level as i32;
                let (rho, big_n, alpha) = (c.rho, c.preset.n_cells() as f64, c.preset.alpha());
                ComponentScales {
                    preset: c.preset.name.clone(),
                    level: c.level,
                    rho: c.rho,
                    rho_estimated: c.rho_estimated,
                    walk_scale: (rho * big_n).powi(n),
                    diffusive_scale: rho.powi(n) * alpha.powi(2 * n),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentScales {
    pub preset: String,
    pub level: usize,
    pub rho: f64,
    pub rho_estimated: bool,
    pub walk_scale: f64,
    pub diffusive_scale: f64,
}

/// `Σ_i ℰ_{K_i}(f|_{K_i})`.
pub fn superposed_energy(complex: &GluedComplex, f: &[f64]) -> Result<f64> {
    if f.len() != complex.n_vertices() {
        return Err(Error::InvalidInput(format!("{} values for {} vertices", f.len(), complex.n_vertices())));
    }
    let mut total = 0.0;
    for c in &complex.components {
        let local: Vec<f64> = c.to_merged.iter().map(|&m| f[m as usize]).collect();
        total += EnergyForm::new(&c.graph, c.rho)?.energy(&local)?;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkStats {
    pub steps: u64,
    pub seed: u64,
    pub start: u32,
    /// Visits `X_0 .. X_{steps-1}` by component tag; interface vertices count for the lowest.
    pub occupation: Vec<u64>,
    pub interface_visits: u64,
    /// First time the walk stands on a non-interface vertex of each component.
    pub first_hit: Vec<Option<u64>>,
    /// Directed traversal counts `(u, v, N_uv)`, only when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traversals: Vec<(u32, u32, u64)>,
}

/// Cumulative transition weights per vertex.
struct Sampler {
    cum: Vec<Vec<(usize, f64)>>,
}

impl Sampler {
    fn new(net: &Network) -> Self {
        let cum = (0..net.n)
            .map(|v| {
                let mut acc = 0.0;
                net.neighbors(v)
                    .map(|(u, c)| {
                        acc += c;
                        (u, acc)
                    })
                    .collect()
            })
            .collect();
        Sampler { cum }
    }

    fn step(&self, v: usize, rng: &mut ChaCha8Rng) -> usize {
        let row = &self.cum[v];
        let x = rng.gen::<f64>() * row.last().map(|r| r.1).unwrap_or(0.0);
        let k = row.partition_point(|r| r.1 <= x).min(row.len() - 1);
        row[k].0
    }
}

/// Walk with transition probabilities proportional to merged conductances.
pub fn random_walk(complex: &GluedComplex, start: u32, steps: u64, seed: u64, record_traversals: bool) -> Result<WalkStats> {
    walk(complex, start, steps, seed, record_traversals, None)
}

/// As [`random_walk`], also returning `X_0 .. X_{steps-1}`.
pub fn random_walk_with_trajectory(complex: &GluedComplex, start: u32, steps: u64, seed: u64) -> Result<(WalkStats, Vec<u32>)> {
    let mut path = Vec::with_capacity(steps.min(1 << 24) as usize);
    let stats = walk(complex, start, steps, seed, false, Some(&mut path))?;
    Ok((stats, path))
}

fn walk(
    complex: &GluedComplex,
    start: u32,
    steps: u64,
    seed: u64,
    record_traversals: bool,
    mut path: Option<&mut Vec<u32>>,
) -> Result<WalkStats> {
    if start as usize >= complex.n_vertices() {
        return Err(Error::InvalidInput(format!("start vertex {start} does not exist")));
    }
    if !complex.merged.is_connected() {
        return Err(Error::Disconnected);
    }
    let sampler = Sampler::new(&complex.merged);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = complex.components.len();
    let mut occupation = vec![0u64; k];
    let mut first_hit = vec![None; k];
    let mut interface_visits = 0u64;
    let mut traversals: HashMap<(u32, u32), u64> = HashMap::new();
    let mut v = start as usize;
    for t in 0..steps {
        if let Some(p) = path.as_deref_mut() {
            p.push(v as u32);
        }
        let tag = complex.tags[v] as usize;
        occupation[tag] += 1;
        if complex.on_interface[v] {
            interface_visits += 1;
        } else if first_hit[tag].is_none() {
            first_hit[tag] = Some(t);
        }
        let u = sampler.step(v, &mut rng);
        if record_traversals {
            *traversals.entry((v as u32, u as u32)).or_default() += 1;
        }
        v = u;
    }
    let mut traversals: Vec<(u32, u32, u64)> = traversals.into_iter().map(|((a, b), n)| (a, b, n)).collect();
    traversals.sort_unstable();
    Ok(WalkStats { steps, seed, start, occupation, interface_visits, first_hit, traversals })
}

/// Start vertex drawn from the conductance-weighted degree distribution.
pub fn stationary_start(complex: &GluedComplex, seed: u64) -> u32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let deg: Vec<f64> = (0..complex.n_vertices()).map(|v| complex.merged.degree(v)).collect();
    let total: f64 = deg.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (v, d) in deg.iter().enumerate() {
        if x < *d {
            return v as u32;
        }
        x -= d;
    }
    (deg.len() - 1) as u32
}

/// First steps from `start` over many independent trials: counts landing on
/// non-interface vertices of each component, and on the interface.
pub fn first_step_split(complex: &GluedComplex, start: u32, trials: u64, seed: u64) -> Result<(Vec<u64>, u64)> {
    if start as usize >= complex.n_vertices() {
        return Err(Error::InvalidInput(format!("start vertex {start} does not exist")));
    }
    let sampler = Sampler::new(&complex.merged);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; complex.components.len()];
    let mut iface = 0;
    for _ in 0..trials {
        let u = sampler.step(start as usize, &mut rng);
        if complex.on_interface[u] {
            iface += 1;
        } else {
            counts[complex.tags[u] as usize] += 1;
        }
    }
    Ok((counts, iface))
}

/// Largest `|N_uv - N_vu| / sqrt(N_uv + N_vu)` over traversed edges.
pub fn detailed_balance_score(stats: &WalkStats) -> f64 {
    let map: HashMap<(u32, u32), u64> = stats.traversals.iter().map(|&(a, b, n)| ((a, b), n)).collect();
    let mut worst: f64 = 0.0;
    for (&(a, b), &n) in &map {
        if a < b {
            let m = map.get(&(b, a)).copied().unwrap_or(0);
            let z = (n as f64 - m as f64).abs() / ((n + m) as f64).sqrt();
            worst = worst.max(z);
        } else if !map.contains_key(&(b, a)) {
            worst = worst.max((n as f64).sqrt());
        }
    }
    worst
}

/// Two level-`n` gaskets sharing the edge from `(1, 0)` to `(0, 1)`, the second reflected.
pub fn symmetric_gaskets(level: usize) -> ComplexSpec {
    let r = |k: i64| RatDoc::Int(k);
    ComplexSpec {
        components: vec![
            ComponentSpec { preset: PresetRef::Name("gasket2".into()), level, placement: None },
            ComponentSpec {
                preset: PresetRef::Name("gasket2".into()),
                level,
                placement: Some(Placement { matrix: vec![vec![0, -1], vec![-1, 0]], translation: vec![r(1), r(1)] }),
            },
        ],
        interfaces: vec![InterfaceSpec { components: [0, 1], segment: [vec![r(1), r(0)], vec![r(0), r(1)]] }],
        start: None,
        steps: None,
    }
}

/// `carpet3` on `[0,1]²` next to `carpet4` on `[1,2]×[0,1]`.
pub fn carpet_pair(level3: usize, level4: usize) -> ComplexSpec {
    let r = |k: i64| RatDoc::Int(k);
    ComplexSpec {
        components: vec![
            ComponentSpec { preset: PresetRef::Name("carpet3".into()), level: level3, placement: None },
            ComponentSpec {
                preset: PresetRef::Name("carpet4".into()),
                level: level4,
                placement: Some(Placement { matrix: vec![vec![1, 0], vec![0, 1]], translation: vec![r(1), r(0)] }),
            },
        ],
        interfaces: vec![InterfaceSpec { components: [0, 1], segment: [vec![r(1), r(0)], vec![r(1), r(1)]] }],
        start: Some(StartSpec { component: 0, point: vec![0.0, 0.5] }),
        steps: Some(1_000_000),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component_is_its_graph() {
        let spec = ComplexSpec {
            components: vec![ComponentSpec { preset: PresetRef::Name("gasket2".into()), level: 3, placement: None }],
            interfaces: vec![],
            start: None,
            steps: None,
        };
        let c = build_glued(&spec).unwrap();
        let g = LevelGraph::build(&builtin("gasket2").unwrap(), 3).unwrap();
        assert_eq!(c.n_vertices(), g.n_vertices());
        let f: Vec<f64> = (0..g.n_vertices()).map(|k| (k as f64 * 0.7).sin()).collect();
        let direct = EnergyForm::new(&g, 5.0 / 3.0).unwrap().energy(&f).unwrap();
        assert_eq!(superposed_energy(&c, &f).unwrap(), direct);
        let w = random_walk(&c, 0, 0, 1, false).unwrap();
        assert_eq!(w.occupation, vec![0]);
    }

    #[test]
    fn symmetric_gaskets_share_an_edge() {
        let c = build_glued(&symmetric_gaskets(3)).unwrap();
        assert_eq!(c.interfaces[0].1.len(), 9);
        assert_eq!(c.n_vertices(), 2 * 42 - 9);
        assert!(c.merged.is_connected());
        assert_eq!(superposed_energy(&c, &vec![1.0; c.n_vertices()]).unwrap(), 0.0);
        let f: Vec<f64> = c.coords.iter().map(|x| x[0] + x[1]).collect();
        let parts: Vec<f64> = c
            .components
            .iter()
            .map(|k| {
                let local: Vec<f64> = k.to_merged.iter().map(|&m| f[m as usize]).collect();
                EnergyForm::new(&k.graph, k.rho).unwrap().energy(&local).unwrap()
            })
            .collect();
        // x + y is symmetric under the reflection, so both halves carry the same energy
        assert!((parts[0] - parts[1]).abs() < 1e-9 * parts[0], "{parts:?}");
    }

    #[test]
    fn symmetric_first_steps_split_evenly() {
        let c = build_glued(&symmetric_gaskets(2)).unwrap();
        let mid = c.vertex_near(0, &[0.5, 0.5]).unwrap();
        assert!(c.on_interface[mid as usize]);
        let (counts, _) = first_step_split(&c, mid, 100_000, 3).unwrap();
        let n = (counts[0] + counts[1]) as f64;
        let p = counts[0] as f64 / n;
        assert!((p - 0.5).abs() <= 3.0 * (0.25 / n).sqrt(), "{counts:?}");
    }

    #[test]
    fn walk_satisfies_detailed_balance() {
        let c = build_glued(&carpet_pair(1, 1)).unwrap();
        let start = stationary_start(&c, 4);
        let w = random_walk(&c, start, 200_000, 4, true).unwrap();
        assert!(detailed_balance_score(&w) <= 4.0);
        assert!(w.first_hit.iter().all(|h| h.is_some()));
    }

    #[test]
    fn carpets_meet_in_two_points() {
        let c = build_glued(&carpet_pair(2, 2)).unwrap();
        assert_eq!(c.interfaces[0].1.len(), 2);
        assert!(c.merged.is_connected());
        assert!(c.components[0].rho_estimated);
    }

    #[test]
    fn rejects_bad_gluing() {
        let mut spec = carpet_pair(1, 1);
        spec.interfaces[0].segment = [vec![RatDoc::Int(5), RatDoc::Int(5)], vec![RatDoc::Int(6), RatDoc::Int(6)]];
        assert!(matches!(build_glued(&spec), Err(Error::Gluing(_))));
        spec.interfaces.clear();
        assert!(matches!(build_glued(&spec), Err(Error::Gluing(_))));
        assert!(matches!(build_glued(&ComplexSpec { components: vec![], interfaces: vec![], start: None, steps: None }), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn walk_is_deterministic_and_counts_steps() {
        let c = build_glued(&symmetric_gaskets(2)).unwrap();
        let a = random_walk(&c, 3, 5000, 9, true).unwrap();
        let b = random_walk(&c, 3, 5000, 9, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.occupation.iter().sum::<u64>(), 5000);
        assert!(a.interface_visits <= 5000);
    }
}
