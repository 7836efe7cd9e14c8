//! Built-in fractals and the JSON preset format.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    ArithmeticMode, FractalPreset, GraphModel, PresetParts, Rho, Similitude, Terminals, TraceSpec, IDENTITY, M3,
};
use crate::word::{AlphabetSpec, GroupTable};

pub const BUILTIN: [&str; 6] = ["gasket2", "vicsek", "pentakun", "carpet3", "carpet4", "square3"];

/// Diagonal conductance of the level-0 pentagon network, relative to the sides.
///
/// With this value the level-1 network traces back to a multiple of the
/// level-0 one, so harmonic extension preserves renormalized energy.
pub const PENTAKUN_DIAGONAL: f64 = 0.406_326_967_174_965_74;

pub fn builtin(name: &str) -> Result<FractalPreset> {
    match name {
        "gasket2" => gasket(),
        "vicsek" => vicsek(),
        "pentakun" => pentakun(),
        "carpet3" => carpet("carpet3", 3, &standard_pattern(3, 1)),
        "carpet4" => carpet("carpet4", 4, &standard_pattern(4, 2)),
        "square3" => carpet("square3", 3, &standard_pattern(3, 0)),
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

/// `l × l` grid with a centered `hole × hole` square removed.
pub fn standard_pattern(l: usize, hole: usize) -> BTreeSet<Vec<usize>> {
    let lo = (l - hole) / 2;
    let inside = |x: usize| hole > 0 && x >= lo && x < lo + hole;
    let mut out = BTreeSet::new();
    for y in 0..l {
        for x in 0..l {
            if !(inside(x) && inside(y)) {
                out.insert(vec![x, y]);
            }
        }
    }
    out
}

fn gasket() -> Result<FractalPreset> {
    let a = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let mut frame = IDENTITY;
    frame[0][1] = 0.5;
    frame[1][1] = 3f64.sqrt() / 2.0;
    FractalPreset::from_parts(PresetParts {
        name: "gasket2".into(),
        dim: 2,
        alphabet: AlphabetSpec::simple(3, vec![0, 1], 1),
        maps: a.iter().map(|p| Similitude::toward(*p, 2.0, 2)).collect(),
        group: vec![Similitude::new(1.0, IDENTITY, [0.0; 3], 2)],
        rho: Some(Rho::rational(5, 3)),
        mode: ArithmeticMode::Exact,
        tolerance: 1e-9,
        frame,
        model: GraphModel::Vertex {
            points: a.iter().map(|p| p[..2].to_vec()).collect(),
            edges: vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
        },
        trace: TraceSpec { anchors: vec![0, 1], segment: Some((vec![0.0, 0.0], vec![1.0, 0.0])) },
        terminals: Terminals::Points { source: vec![0], sink: vec![1] },
        k1: 1.0,
        k2: 2.0,
        b4: true,
    })
}

fn vicsek() -> Result<FractalPreset> {
    let corners = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
    let mut fixed = corners.to_vec();
    fixed.push([0.5, 0.5, 0.0]);
    let s2 = 2f64.sqrt();
    let mut edges = Vec::new();
    for p in 0..4 {
        for q in p + 1..4 {
            edges.push((p, q, 1.0));
        }
    }
    FractalPreset::from_parts(PresetParts {
        name: "vicsek".into(),
        dim: 2,
        // the diagonal from a_1 to a_3 runs through the cells of a_1, the center and a_3
        alphabet: AlphabetSpec::simple(5, vec![0, 2, 4], 1),
        maps: fixed.iter().map(|p| Similitude::toward(*p, 3.0, 2)).collect(),
        group: vec![Similitude::new(1.0, IDENTITY, [0.0; 3], 2)],
        rho: Some(Rho::rational(3, 1)),
        mode: ArithmeticMode::Exact,
        tolerance: 1e-9,
        frame: IDENTITY,
        model: GraphModel::Vertex { points: corners.iter().map(|p| p[..2].to_vec()).collect(), edges },
        trace: TraceSpec { anchors: vec![0, 2], segment: Some((vec![0.0, 0.0], vec![1.0, 1.0])) },
        terminals: Terminals::Points { source: vec![0], sink: vec![2] },
        k1: s2,
        k2: 2.0 * s2,
        b4: false,
    })
}

fn rotation(theta: f64) -> M3 {
    let (s, c) = theta.sin_cos();
    let mut m = IDENTITY;
    m[0][0] = c;
    m[0][1] = -s;
    m[1][0] = s;
    m[1][1] = c;
    m
}

fn pentakun() -> Result<FractalPreset> {
    let alpha = (3.0 + 5f64.sqrt()) / 2.0;
    let a: Vec<[f64; 3]> = (0..5)
        .map(|k| {
            let t = 2.0 * k as f64 * PI / 5.0 + PI / 2.0;
            [t.cos(), t.sin(), 0.0]
        })
        .collect();
    let mut maps: Vec<Similitude> = a.iter().map(|p| Similitude::toward(*p, alpha, 2)).collect();
    // F_5 = F_2 ∘ G_1, F_6 = F_3 ∘ G_4
    for (j, k) in [(2usize, 1usize), (3, 4)] {
        let s = 1.0 / alpha;
        let t = [a[j][0] * (1.0 - s), a[j][1] * (1.0 - s), 0.0];
        maps.push(Similitude::new(s, rotation(2.0 * PI * k as f64 / 5.0), t, 2));
    }
    let mut isometry: Vec<(u8, usize)> = (0..5).map(|l| (l, 0)).collect();
    isometry.push((2, 1));
    isometry.push((3, 4));
    let mut edges = Vec::new();
    for p in 0..5usize {
        for q in p + 1..5 {
            let side = (q - p) % 5 == 1 || (q - p) % 5 == 4;
            edges.push((p, q, if side { 1.0 } else { PENTAKUN_DIAGONAL }));
        }
    }
    FractalPreset::from_parts(PresetParts {
        name: "pentakun".into(),
        dim: 2,
        alphabet: AlphabetSpec {
            w_size: 7,
            s: vec![0, 1, 2, 3, 4],
            i: vec![2, 3, 5, 6],
            ihat: vec![2, 3, 5, 6],
            m: 1,
            isometry,
            group: GroupTable::cyclic_rotation(5),
        },
        maps,
        group: (0..5).map(|k| Similitude::new(1.0, rotation(2.0 * PI * k as f64 / 5.0), [0.0; 3], 2)).collect(),
        rho: Some(Rho::float((161f64.sqrt() + 9.0) / 10.0)),
        mode: ArithmeticMode::Float,
        tolerance: 1e-9,
        frame: IDENTITY,
        model: GraphModel::Vertex { points: a.iter().map(|p| p[..2].to_vec()).collect(), edges },
        trace: TraceSpec { anchors: vec![2, 3], segment: None },
        terminals: Terminals::Points { source: vec![2], sink: vec![3] },
        k1: 1.0,
        k2: 3.0,
        b4: true,
    })
}

/// A generalized carpet from an `l × l` pattern; letters are ordered row by row from the bottom.
pub fn carpet(name: &str, l: usize, pattern: &BTreeSet<Vec<usize>>) -> Result<FractalPreset> {
    if l < 2 || pattern.iter().any(|c| c.len() != 2 || c[0] >= l || c[1] >= l) {
        return Err(Error::InvalidPreset("carpet pattern must be a subset of the l×l grid".into()));
    }
    let mut cells: Vec<&Vec<usize>> = pattern.iter().collect();
    cells.sort_by_key(|c| (c[1], c[0]));
    let s = 1.0 / l as f64;
    let maps: Vec<Similitude> = cells
        .iter()
        .map(|c| Similitude::new(s, IDENTITY, [c[0] as f64 * s, c[1] as f64 * s, 0.0], 2))
        .collect();
    let bottom: Vec<u8> = cells.iter().enumerate().filter(|(_, c)| c[1] == 0).map(|(k, _)| k as u8).collect();
    FractalPreset::from_parts(PresetParts {
        name: name.into(),
        dim: 2,
        alphabet: AlphabetSpec::simple(cells.len(), bottom, 1),
        maps,
        group: vec![Similitude::new(1.0, IDENTITY, [0.0; 3], 2)],
        rho: None,
        mode: ArithmeticMode::Exact,
        tolerance: 1e-9,
        frame: IDENTITY,
        model: GraphModel::Cells,
        trace: TraceSpec { anchors: vec![], segment: Some((vec![0.0, 0.0], vec![1.0, 0.0])) },
        terminals: Terminals::Faces { axis: 0 },
        k1: 1.0,
        k2: 2.0,
        b4: true,
    })
}

/// Side `l` and cell pattern of a carpet preset, read back from its maps.
pub fn carpet_pattern(preset: &FractalPreset) -> Option<(usize, BTreeSet<Vec<usize>>)> {
    if !preset.is_cells() {
        return None;
    }
    let l = (1.0 / preset.maps.first()?.scale).round() as usize;
    let pattern = preset
        .maps
        .iter()
        .map(|m| m.translation.iter().map(|t| (t * l as f64).round() as usize).collect())
        .collect();
    Some((l, pattern))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoDoc {
    Rational(String),
    Float(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphabetDoc {
    /// `#W`.
    pub w: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<u8>>,
    pub i: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ihat: Option<Vec<u8>>,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isometry: Option<Vec<(u8, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupTable>,
}

fn one() -> usize {
    1
}

/// On-disk preset description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PresetDoc {
    pub name: String,
    pub ambient_dim: usize,
    pub alphabet: AlphabetDoc,
    pub maps: Vec<Similitude>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Vec<Similitude>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoDoc>,
    pub arithmetic_mode: ArithmeticMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<f64>>>,
    pub graph: GraphModel,
    pub trace: TraceSpec,
    pub terminals: Terminals,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_k2")]
    pub k2: f64,
    #[serde(default = "yes")]
    pub b4: bool,
}

fn default_k1() -> f64 {
    1.0
}
fn default_k2() -> f64 {
    2.0
}
fn yes() -> bool {
    true
}

fn parse_rho(r: &RhoDoc) -> Result<Rho> {
    match r {
        RhoDoc::Float(x) => Ok(Rho::float(*x)),
        RhoDoc::Rational(s) => {
            let bad = || Error::InvalidPreset(format!("cannot parse rho '{s}'"));
            let (n, d) = match s.split_once('/') {
                Some((n, d)) => (n.trim().parse::<i64>().map_err(|_| bad())?, d.trim().parse::<i64>().map_err(|_| bad())?),
                None => (s.trim().parse::<i64>().map_err(|_| bad())?, 1),
            };
            if d <= 0 || n <= 0 {
                return Err(bad());
            }
            Ok(Rho::rational(n, d))
        }
    }
}

impl PresetDoc {
    pub fn into_preset(self) -> Result<FractalPreset> {
        let a = self.alphabet;
        let w = a.w;
        let s = a.s.unwrap_or_else(|| (0..w as u8).collect());
        let group = a.group.unwrap_or_else(|| GroupTable::trivial(w));
        let isometry = a.isometry.unwrap_or_else(|| (0..w as u8).map(|l| (l, 0)).collect());
        let alphabet = AlphabetSpec { w_size: w, ihat: a.ihat.unwrap_or_else(|| a.i.clone()), i: a.i, s, m: a.m, isometry, group };
        let dim = self.ambient_dim;
        let mut frame = IDENTITY;
        if let Some(f) = &self.frame {
            if f.len() != dim || f.iter().any(|r| r.len() != dim) {
                return Err(Error::InvalidPreset("frame has the wrong shape".into()));
            }
            for i in 0..dim {
                for j in 0..dim {
                    frame[i][j] = f[i][j];
                }
            }
        }
        let group_maps = self
            .group
            .unwrap_or_else(|| vec![Similitude::new(1.0, IDENTITY, [0.0; 3], dim.min(3))]);
        FractalPreset::from_parts(PresetParts {
            name: self.name,
            dim,
            alphabet,
            maps: self.maps,
            group: group_maps,
            rho: self.rho.as_ref().map(parse_rho).transpose()?,
            mode: self.arithmetic_mode,
            tolerance: self.tolerance.unwrap_or(1e-9),
            frame,
            model: self.graph,
            trace: self.trace,
            terminals: self.terminals,
            k1: self.k1,
            k2: self.k2,
            b4: self.b4,
        })
    }

    pub fn from_preset(p: &FractalPreset) -> Self {
        let rho = p.rho.map(|r| match r.exact {
            Some(q) => RhoDoc::Rational(format!("{}/{}", q.numer(), q.denom())),
            None => RhoDoc::Float(r.value),
        });
        PresetDoc {
            name: p.name.clone(),
            ambient_dim: p.dim,
            alphabet: AlphabetDoc {
                w: p.alphabet.w_size,
                s: Some(p.alphabet.s.clone()),
                i: p.alphabet.i.clone(),
                ihat: Some(p.alphabet.ihat.clone()),
                m: p.alphabet.m,
                isometry: Some(p.alphabet.isometry.clone()),
                group: Some(p.alphabet.group.clone()),
            },
            maps: p.maps.clone(),
            group: Some(p.group.clone()),
            rho,
            arithmetic_mode: p.mode,
            tolerance: Some(p.tolerance),
            frame: Some((0..p.dim).map(|i| p.frame[i][..p.dim].to_vec()).collect()),
            graph: p.model.clone(),
            trace: p.trace.clone(),
            terminals: p.terminals.clone(),
            k1: p.k1,
            k2: p.k2,
            b4: p.b4,
        }
    }
}

pub fn preset_from_json(text: &str) -> Result<FractalPreset> {
    let doc: PresetDoc = serde_json::from_str(text).map_err(|e| Error::InvalidPreset(e.to_string()))?;
    doc.into_preset()
}

pub fn preset_to_json(p: &FractalPreset) -> String {
    serde_json::to_string_pretty(&PresetDoc::from_preset(p)).expect("preset serializes")
}

pub fn load_preset_file(path: &Path) -> Result<FractalPreset> {
    preset_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_validate() {
        for name in BUILTIN {
            let p = builtin(name).unwrap();
            assert_eq!(p.name, name);
        }
        assert!(matches!(builtin("koch"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn carpet_letter_order() {
        let c = builtin("carpet3").unwrap();
        assert_eq!(c.alphabet.s.len(), 8);
        assert_eq!(c.alphabet.i, vec![0, 1, 2]);
        let c4 = builtin("carpet4").unwrap();
        assert_eq!(c4.alphabet.s.len(), 12);
        assert_eq!(c4.alphabet.i, vec![0, 1, 2, 3]);
        assert_eq!(builtin("square3").unwrap().alphabet.s.len(), 9);
    }

    #[test]
    fn json_roundtrip_keeps_everything() {
        for name in BUILTIN {
            let p = builtin(name).unwrap();
            let q = preset_from_json(&preset_to_json(&p)).unwrap();
            assert_eq!(q.alphabet, p.alphabet);
            assert_eq!(q.maps, p.maps);
            assert_eq!(q.model, p.model);
            assert_eq!(q.rho, p.rho);
            assert_eq!(q.exact(), p.exact());
        }
    }

    #[test]
    fn rejects_bad_documents() {
        let mut doc = PresetDoc::from_preset(&builtin("gasket2").unwrap());
        doc.maps[0].scale = 0.4;
        assert!(doc.clone().into_preset().is_err());
        let mut doc = PresetDoc::from_preset(&builtin("gasket2").unwrap());
        doc.maps[1].matrix[0][1] = 0.3;
        assert!(doc.into_preset().is_err());
        let mut doc = PresetDoc::from_preset(&builtin("gasket2").unwrap());
        doc.alphabet.i = vec![0, 1, 2];
        assert!(doc.into_preset().is_err());
        let mut doc = PresetDoc::from_preset(&builtin("gasket2").unwrap());
        doc.rho = Some(RhoDoc::Rational("five thirds".into()));
        assert!(doc.into_preset().is_err());
        assert!(preset_from_json("{}").is_err());
    }
}
