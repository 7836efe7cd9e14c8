//! The `fractrace` command line: argument parsing, dispatch, atomic output.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::besov::{corpus, sandwich, TestFunction};
use crate::energy::{estimate_rho, harmonic_from_boundary};
use crate::error::{Error, Result};
use crate::exponents::{carpet_rho_bounds, compute_with_rho, rho_or_estimate};
use crate::field::{
    build_glued, detailed_balance_score, random_walk, random_walk_with_trajectory, stationary_start, ComplexSpec,
    ComponentScales, WalkStats,
};
use crate::geometry::{check_level, verify_carpet_conditions, CarpetReport, FractalPreset};
use crate::graph::LevelGraph;
use crate::presets::{builtin, carpet_pattern, load_preset_file};
use crate::restriction::{decay_check, trace_inequality_check, DecayData, DecayReport};
use crate::trace::CellAverageVector;
use crate::whitney::{extension_report, Extension};
use crate::word::{word_index, Word};

#[derive(Debug, Parser)]
#[command(name = "fractrace", version, about = "Traces, Besov terms and extensions on self-similar sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scaling exponents of a preset (JSON).
    Exponents {
        #[command(flatten)]
        preset: PresetArgs,
        /// Level of the resistance estimate when the preset has no ρ.
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Discrete and continuum Besov terms of a test function (CSV).
    Besov {
        #[command(flatten)]
        preset: PresetArgs,
        /// Rows to emit, e.g. `0..6`.
        #[arg(long, value_parser = parse_levels, default_value = "0..6")]
        levels: RangeInclusive<usize>,
        /// Defaults to the preset's β.
        #[arg(long)]
        beta: Option<f64>,
        /// Name from the built-in corpus.
        #[arg(long, default_value = "x")]
        function: String,
        /// Cell averages `level,word,value` instead of a corpus function.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Extra depth for the continuum quadrature.
        #[arg(long, default_value_t = 3)]
        refine: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Trace terms of a random harmonic function against its energy (JSON).
    TraceCheck {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long, default_value_t = 4)]
        level: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Restricted-energy decay towards the trace set (JSON).
    Decay {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long, default_value_t = 2)]
        level: usize,
        /// Extra levels `b = 1..=depth`.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 5)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Extend trace data to the whole fractal (vertex CSV plus JSON report).
    Extend {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        level: usize,
        /// Cell averages `level,word,value`.
        #[arg(long)]
        input: PathBuf,
        /// JSON report path; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Resistance scaling `ρ̂_n` and, for carpets, the admissible window (CSV).
    Resistance {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long, value_parser = parse_levels, default_value = "1..3")]
        levels: RangeInclusive<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Symmetry, connectivity, non-diagonality and border checks for a carpet (JSON).
    VerifyCarpet {
        #[command(flatten)]
        preset: PresetArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Random walk on a glued fractal field (JSON).
    Simulate {
        /// Complex specification (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Overrides the spec's step count.
        #[arg(long)]
        steps: Option<u64>,
        /// CSV dump `step,vertex_id,component`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// Built-in preset name.
    #[arg(long, conflicts_with = "preset_file")]
    pub preset: Option<String>,
    /// Preset JSON document.
    #[arg(long)]
    pub preset_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Geometric tolerance override; also bounds the extension round trip.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// `a..b` (inclusive) or a single level.
pub fn parse_levels(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let bad = || format!("expected a..b, got '{s}'");
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().trim_start_matches('=').parse().map_err(|_| bad())?),
        None => {
            let a = s.trim().parse().map_err(|_| bad())?;
            (a, a)
        }
    };
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

impl PresetArgs {
    fn resolve(&self, tol: Option<f64>) -> Result<FractalPreset> {
        let mut p = match (&self.preset, &self.preset_file) {
            (Some(name), None) => builtin(name)?,
            (None, Some(path)) => load_preset_file(path)?,
            _ => return Err(Error::InvalidInput("give exactly one of --preset or --preset-file".into())),
        };
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidInput(format!("tolerance must be positive, got {t}")));
            }
            p.tolerance = t;
        }
        Ok(p)
    }
}

/// Writes to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// One finished artifact, held until every computation has succeeded.
struct Artifact {
    path: Option<PathBuf>,
    bytes: Vec<u8>,
}

fn json<T: Serialize>(path: Option<PathBuf>, value: &T) -> Result<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(Artifact { path, bytes })
}

fn csv_artifact(path: Option<PathBuf>, header: &[&str], rows: Vec<Vec<String>>) -> Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(Artifact { path, bytes })
}

fn num(x: f64) -> String {
    if x.is_finite() {
        // `+ 0.0` turns `-0` into `0`
        format!("{}", x + 0.0)
    } else {
        String::new()
    }
}

fn check_levels(levels: impl IntoIterator<Item = usize>) -> Result<()> {
    levels.into_iter().try_for_each(check_level)
}

fn beta_of(preset: &FractalPreset, beta: Option<f64>) -> Result<f64> {
    match beta {
        Some(b) if b.is_finite() => Ok(b),
        Some(b) => Err(Error::InvalidInput(format!("beta must be finite, got {b}"))),
        None => {
            let (rho, source) = rho_or_estimate(preset, 2)?;
            Ok(compute_with_rho(preset, rho, source).beta)
        }
    }
}

/// Reads `level,word,value` rows and returns the averages at the deepest level.
///
/// Shallower rows must agree with coarsening of the deepest level.
pub fn read_averages(preset: &FractalPreset, path: &Path, tol: f64) -> Result<CellAverageVector> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let mut by_level: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    let i = &preset.alphabet.i;
    for rec in rdr.deserialize::<(usize, String, f64)>() {
        let (level, word, value) = rec?;
        let w: Word = word.parse()?;
        if w.level() != level {
            return Err(Error::InvalidInput(format!("word '{word}' is not of level {level}")));
        }
        let idx = word_index(i, &w).ok_or_else(|| Error::InvalidInput(format!("word '{word}' is not a trace word")))?;
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite value for '{word}'")));
        }
        if by_level.entry(level).or_default().insert(idx, value).is_some() {
            return Err(Error::InvalidInput(format!("duplicate row for '{word}'")));
        }
    }
    let (&deep, rows) = by_level.iter().next_back().ok_or_else(|| Error::InvalidInput("no averages given".into()))?;
    check_level(deep)?;
    let n_i = preset.n_trace();
    let q = CellAverageVector::new(deep, rows.values().copied().collect(), n_i)?;
    let stack = q.stack(n_i);
    for (&m, rows) in &by_level {
        for (&idx, &v) in rows {
            if (stack[m].values[idx] - v).abs() > tol * (1.0 + v.abs()) {
                return Err(Error::InvalidInput(format!("level {m} averages disagree with level {deep}")));
            }
        }
    }
    Ok(q)
}

#[derive(Serialize)]
struct DecayOutput {
    preset: String,
    level: usize,
    depth: usize,
    reports: Vec<DecayReport>,
    max_ratio: f64,
}

#[derive(Serialize)]
struct VerifyOutput {
    preset: String,
    #[serde(flatten)]
    report: CarpetReport,
    all_pass: bool,
}

#[derive(Serialize)]
struct InterfaceSummary {
    components: [usize; 2],
    vertices: usize,
}

#[derive(Serialize)]
struct SimulationOutput {
    n_vertices: usize,
    interfaces: Vec<InterfaceSummary>,
    time_scales: Vec<ComponentScales>,
    /// Largest `|N_uv - N_vu| / sqrt(N_uv + N_vu)`.
    detailed_balance_max_z: f64,
    stats: WalkStats,
}

fn execute(cmd: Command) -> Result<Vec<Artifact>> {
    match cmd {
        Command::Exponents { preset, level, common } => {
            check_level(level)?;
            let p = preset.resolve(common.tol)?;
            let (rho, source) = rho_or_estimate(&p, level)?;
            Ok(vec![json(common.out, &compute_with_rho(&p, rho, source))?])
        }
        Command::Besov { preset, levels, beta, function, input, refine, common } => {
            let p = preset.resolve(common.tol)?;
            let n_max = *levels.end();
            check_levels([n_max, n_max + refine])?;
            let beta = beta_of(&p, beta)?;
            let f = match input {
                Some(path) => TestFunction::Averages { averages: read_averages(&p, &path, common.tol.unwrap_or(1e-9))? },
                None => corpus(&p, n_max + refine)?
                    .into_iter()
                    .find(|(name, _)| *name == function)
                    .map(|(_, f)| f)
                    .ok_or_else(|| Error::InvalidInput(format!("no corpus function '{function}' for {}", p.name)))?,
            };
            let rows = sandwich(&p, &f, beta, n_max, refine)?
                .into_iter()
                .filter(|r| levels.contains(&r.n))
                .map(|r| vec![r.n.to_string(), num(r.discrete), num(r.continuum_k1), num(r.continuum_k2), num(r.ratio)])
                .collect();
            Ok(vec![csv_artifact(
                common.out,
                &["n", "discrete_term", "continuum_term_k1", "continuum_term_k2", "ratio"],
                rows,
            )?])
        }
        Command::TraceCheck { preset, level, seed, common } => {
            check_level(level)?;
            let p = preset.resolve(common.tol)?;
            let rho = p.rho_value()?;
            let g = LevelGraph::build(&p, level)?;
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let boundary: Vec<f64> = p.template_points().iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = harmonic_from_boundary(&p, &g, &boundary)?;
            Ok(vec![json(common.out, &trace_inequality_check(&p, &g, &h, rho, level)?)?])
        }
        Command::Decay { preset, level, depth, samples, seed, common } => {
            check_level(level + depth)?;
            if samples == 0 {
                return Err(Error::InvalidInput("samples must be positive".into()));
            }
            let p = preset.resolve(common.tol)?;
            let data: Vec<DecayData> = (0..samples).map(|k| DecayData::Random(seed.wrapping_add(k))).collect();
            let reports = decay_check(&p, level, depth, &data)?;
            let max_ratio = reports.iter().flat_map(|r| r.ratios.iter().copied()).fold(0.0, f64::max);
            Ok(vec![json(common.out, &DecayOutput { preset: p.name.clone(), level, depth, reports, max_ratio })?])
        }
        Command::Extend { preset, level, input, report, beta, common } => {
            check_level(level + 2)?;
            let p = preset.resolve(common.tol)?;
            let tol = common.tol.unwrap_or(1e-8);
            let q = read_averages(&p, &input, tol)?;
            if q.level < level {
                return Err(Error::RefineDepth { depth: level, available: q.level });
            }
            let beta = beta_of(&p, beta)?;
            let (rho, _) = rho_or_estimate(&p, 2)?;
            let ext = Extension::build(&p, level)?;
            let (f, rep) = extension_report(&p, &ext, &q, beta, rho)?;
            if !(rep.roundtrip_error <= tol) {
                return Err(Error::NoConvergence(format!("round trip error {:e} above {tol:e}", rep.roundtrip_error)));
            }
            let rows = f.iter().enumerate().map(|(v, x)| vec![v.to_string(), num(*x)]).collect();
            Ok(vec![csv_artifact(common.out, &["vertex_id", "value"], rows)?, json(report, &rep)?])
        }
        Command::Resistance { preset, levels, common } => {
            check_levels([*levels.end() + 1])?;
            let p = preset.resolve(common.tol)?;
            let window = match carpet_pattern(&p) {
                Some((l, _)) => Some(carpet_rho_bounds(l as u64, p.dim as u32)?),
                None => None,
            };
            let rows = estimate_rho(&p, levels)?
                .into_iter()
                .map(|e| {
                    let (lo, hi, inside) = match window {
                        Some((lo, hi)) => {
                            let (a, b) = (*lo.numer() as f64 / *lo.denom() as f64, *hi.numer() as f64 / *hi.denom() as f64);
                            (lo.to_string(), hi.to_string(), (a <= e.rho_hat && e.rho_hat <= b).to_string())
                        }
                        None => (String::new(), String::new(), String::new()),
                    };
                    vec![e.level.to_string(), num(e.resistance), num(e.next_resistance), num(e.rho_hat), lo, hi, inside]
                })
                .collect();
            Ok(vec![csv_artifact(
                common.out,
                &["level", "resistance", "next_resistance", "rho_hat", "window_lower", "window_upper", "in_window"],
                rows,
            )?])
        }
        Command::VerifyCarpet { preset, common } => {
            let p = preset.resolve(common.tol)?;
            let (l, pattern) =
                carpet_pattern(&p).ok_or_else(|| Error::InvalidInput(format!("'{}' is not a carpet preset", p.name)))?;
            let report = verify_carpet_conditions(l, &pattern)?;
            let all_pass = report.all_pass();
            Ok(vec![json(common.out, &VerifyOutput { preset: p.name.clone(), report, all_pass })?])
        }
        Command::Simulate { spec, seed, steps, trajectory, common } => {
            let text = std::fs::read_to_string(&spec)?;
            let spec: ComplexSpec = serde_json::from_str(&text)?;
            for c in &spec.components {
                check_level(c.level)?;
            }
            let complex = build_glued(&spec)?;
            let steps = steps.or(spec.steps).ok_or_else(|| Error::InvalidInput("no step count given".into()))?;
            let start = match &spec.start {
                Some(s) => complex.vertex_near(s.component, &s.point)?,
                None => stationary_start(&complex, seed),
            };
            let mut out = Vec::new();
            let mut stats = random_walk(&complex, start, steps, seed, true)?;
            let z = detailed_balance_score(&stats);
            stats.traversals.clear();
            if let Some(path) = trajectory {
                let (again, path_v) = random_walk_with_trajectory(&complex, start, steps, seed)?;
                debug_assert_eq!(again.occupation, stats.occupation);
                let rows = path_v
                    .iter()
                    .enumerate()
                    .map(|(t, &v)| vec![t.to_string(), v.to_string(), complex.tags[v as usize].to_string()])
                    .collect();
                out.push(csv_artifact(Some(path), &["step", "vertex_id", "component"], rows)?);
            }
            let report = SimulationOutput {
                n_vertices: complex.n_vertices(),
                interfaces: complex
                    .interfaces
                    .iter()
                    .map(|(c, v)| InterfaceSummary { components: *c, vertices: v.len() })
                    .collect(),
                time_scales: complex.time_scales(),
                detailed_balance_max_z: z,
                stats,
            };
            out.insert(0, json(common.out, &report)?);
            Ok(out)
        }
    }
}

/// Exit status for an error: 2 for bad input, 1 for numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else {
        1
    }
}

/// Machine-readable description of a failure.
pub fn diagnostic(e: &Error) -> serde_json::Value {
    let kind = match e {
        Error::Infeasible(_) => "infeasible",
        Error::Singular(_) => "singular",
        Error::NoConvergence(_) => "no_convergence",
        Error::Disconnected => "disconnected",
        Error::UnknownPreset(_) => "unknown_preset",
        Error::LevelCap { .. } => "level_cap",
        Error::Gluing(_) => "gluing",
        _ => "invalid_input",
    };
    serde_json::json!({ "error": kind, "message": e.to_string(), "exit_code": exit_code(e) })
}

/// Runs one command; every artifact is written only after all of them were computed.
pub fn run(cli: Cli) -> Result<()> {
    let artifacts = execute(cli.command)?;
    let stdout = std::io::stdout();
    for a in artifacts {
        match a.path {
            Some(p) => write_atomic(&p, &a.bytes)?,
            None => stdout.lock().write_all(&a.bytes)?,
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_ranges() {
        assert_eq!(parse_levels("1..3").unwrap(), 1..=3);
        assert_eq!(parse_levels("1..=3").unwrap(), 1..=3);
        assert_eq!(parse_levels("4").unwrap(), 4..=4);
        assert!(parse_levels("3..1").is_err());
        assert!(parse_levels("a..b").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::UnknownPreset("x".into())), 2);
        assert_eq!(exit_code(&Error::Infeasible("x".into())), 1);
        assert_eq!(diagnostic(&Error::Infeasible("x".into()))["error"], "infeasible");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
