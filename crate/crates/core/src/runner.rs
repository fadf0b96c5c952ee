//! Manifest-driven execution of check grids and function sweeps.
//!
//! A manifest is a TOML document:
//!
//! ```toml
//! out_dir = "out"
//! [trunc]
//! tail_eps = 1e-18
//! [tol_overrides]
//! ybe = 1e-9
//! [[checks]]
//! name = "lemma_key"
//! N = [2, 3]
//! n = [-2, -1, 1, 2, 3]
//! points = 10
//! seed = 7
//! [[sweeps]]
//! function = "Y"
//! N = 2
//! n = 1
//! zeta = [0.0, 0.3]
//! tau = [0.0, 0.9]
//! ray = { start = [-0.2, 0.05], end = [0.2, 0.05], steps = 41 }
//! ```
//!
//! Every report line is computed from its own seed, derived from the check
//! seed and the line's position in the grid, so results do not depend on the
//! worker count.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identities::{
    check_lemma_key, check_quasi_shift_n, check_r_at_one, check_r_property, check_t_relations,
    check_tau_n, check_trace_transposition, check_transposed_ybe, check_w_kernel, RProperty,
};
use crate::params::{LogParams, SpectralPoint, SurfaceSpec};
use crate::poisson::{check_poisson_limit, f_h, PoissonArgs, DEFAULT_BETAS};
use crate::report::{from_pair, CheckReport, ParamRecord, ReportLine, Status};
use crate::specfun::{tau_n, TruncationPolicy};
use crate::structfn::{
    check_abelian, check_commuting, check_fg_duality, check_fy_ratio, sweep_ray, write_sweep_csv,
    Structure,
};
use crate::C64;

/// Pole guard used while screening random points.
pub const SCREEN_GUARD: f64 = 1e-6;
/// Resampling attempts before a line is reported as refused.
pub const MAX_ATTEMPTS: usize = 32;

pub const CHECK_NAMES: [&str; 19] = [
    "ybe",
    "unitarity",
    "crossing",
    "antisymmetry",
    "zn_symmetry",
    "quasi_periodicity",
    "r_at_one",
    "tau_n",
    "t_relations",
    "quasi_shift_n",
    "lemma_key",
    "trace_transposition",
    "transposed_ybe",
    "w_kernel",
    "fg_duality",
    "fy_ratio",
    "abelian",
    "commuting",
    "poisson_limit",
];

pub const SWEEP_FUNCTIONS: [&str; 5] = ["F", "Y", "G", "f_h", "tau_n"];

/// Default tolerance of each check.
pub fn default_tol(name: &str) -> f64 {
    match name {
        "r_at_one" | "tau_n" => 1e-10,
        "t_relations" | "fg_duality" | "fy_ratio" | "abelian" | "commuting" => 1e-9,
        "trace_transposition" | "w_kernel" => 1e-12,
        "poisson_limit" => crate::poisson::POISSON_TOL,
        _ => 1e-8,
    }
}

fn default_ranks() -> Vec<usize> {
    vec![2, 3]
}

fn default_points() -> usize {
    10
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub sweeps: Vec<SweepSpec>,
    #[serde(default)]
    pub tol_overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub trunc: TruncationPolicy,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// A grid of check evaluations. Empty label lists fall back to per-check
/// defaults; unset parameters are sampled from the default region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    #[serde(rename = "N", default = "default_ranks")]
    pub ranks: Vec<usize>,
    #[serde(default)]
    pub n: Vec<i64>,
    #[serde(default)]
    pub h: Vec<i64>,
    #[serde(default)]
    pub s: Vec<usize>,
    #[serde(default)]
    pub zeta: Option<[f64; 2]>,
    #[serde(default)]
    pub tau: Option<[f64; 2]>,
    #[serde(default)]
    pub c: Option<[f64; 2]>,
    #[serde(default)]
    pub xi: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
}

impl CheckSpec {
    pub fn new(name: &str) -> Self {
        CheckSpec {
            name: name.to_string(),
            ranks: default_ranks(),
            n: vec![],
            h: vec![],
            s: vec![],
            zeta: None,
            tau: None,
            c: None,
            xi: None,
            points: default_points(),
            seed: 0,
            betas: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ray {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub function: String,
    /// Output file stem; defaults to `sweep_<index>_<function>`.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "N")]
    pub rank: usize,
    #[serde(default)]
    pub n: i64,
    #[serde(default)]
    pub h: Option<i64>,
    pub zeta: [f64; 2],
    #[serde(default)]
    pub tau: Option<[f64; 2]>,
    pub ray: Ray,
}

impl SweepSpec {
    fn stem(&self, index: usize) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("sweep_{index}_{}", self.function))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub refused: usize,
}

impl Summary {
    pub fn from_lines(lines: &[ReportLine]) -> Self {
        let mut s = Summary::default();
        for line in lines {
            match line.status {
                Status::Pass => s.pass += 1,
                Status::Fail => s.fail += 1,
                Status::Refused => s.refused += 1,
            }
        }
        s
    }

    pub fn total(&self) -> usize {
        self.pass + self.fail + self.refused
    }
}

pub const PAPER_SUITE: &str = include_str!("../manifests/paper-suite.toml");

/// Manifests shipped with the library.
pub fn bundled(name: &str) -> Option<RunManifest> {
    match name {
        "paper-suite" => {
            Some(RunManifest::from_toml(PAPER_SUITE).expect("bundled manifest parses"))
        }
        _ => None,
    }
}

impl RunManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: RunManifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        RunManifest::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Manifest(m));
        self.trunc
            .validate()
            .map_err(|e| Error::Manifest(e.to_string()))?;
        for spec in &self.checks {
            if !CHECK_NAMES.contains(&spec.name.as_str()) {
                return bad(format!("unknown check `{}`", spec.name));
            }
            if spec.ranks.is_empty() {
                return bad(format!("check `{}` has an empty N list", spec.name));
            }
            if spec.ranks.iter().any(|&r| r < 2) {
                return bad(format!("check `{}` lists a rank below 2", spec.name));
            }
            if spec.points == 0 {
                return bad(format!("check `{}` needs points >= 1", spec.name));
            }
            if spec.xi.as_ref().is_some_and(|v| v.is_empty()) {
                return bad(format!("check `{}` has an empty xi list", spec.name));
            }
            if spec.h.contains(&0) {
                return bad(format!("check `{}` lists h = 0", spec.name));
            }
        }
        for name in self.tol_overrides.keys() {
            if !CHECK_NAMES.contains(&name.as_str()) {
                return bad(format!("tolerance override for unknown check `{name}`"));
            }
        }
        for (i, sw) in self.sweeps.iter().enumerate() {
            if !SWEEP_FUNCTIONS.contains(&sw.function.as_str()) {
                return bad(format!("sweep {i}: unknown function `{}`", sw.function));
            }
            if sw.ray.steps < 2 {
                return bad(format!("sweep {i}: steps must be at least 2"));
            }
            if matches!(sw.function.as_str(), "F" | "Y" | "G") && sw.tau.is_none() {
                return bad(format!("sweep {i}: `{}` needs tau", sw.function));
            }
            if sw.function == "f_h" && sw.h.is_none_or(|h| h == 0) {
                return bad(format!("sweep {i}: f_h needs a nonzero h"));
            }
        }
        Ok(())
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tol_overrides
            .get(name)
            .copied()
            .unwrap_or_else(|| default_tol(name))
    }

    /// Applies `tol` to every check named in the manifest.
    pub fn override_all_tols(&mut self, tol: f64) {
        for spec in &self.checks {
            self.tol_overrides.insert(spec.name.clone(), tol);
        }
    }

    pub fn override_seed(&mut self, seed: u64) {
        for spec in &mut self.checks {
            spec.seed = seed;
        }
    }
}

/// One point of a check grid before sampling.
#[derive(Clone, Debug)]
struct Cell {
    spec: usize,
    cell: usize,
    rank: usize,
    n: Option<i64>,
    h: Option<i64>,
    s: Option<usize>,
    point: usize,
    seed: u64,
}

fn or_default<T: Clone>(v: &[T], default: &[T]) -> Vec<T> {
    if v.is_empty() {
        default.to_vec()
    } else {
        v.to_vec()
    }
}

fn line_seed(seed: u64, spec: usize, line: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((spec as u64) << 32) | line as u64);
    rng.gen()
}

fn cells(manifest: &RunManifest) -> Vec<Cell> {
    let mut out = Vec::new();
    for (si, spec) in manifest.checks.iter().enumerate() {
        let ns = or_default(&spec.n, &[1]);
        let hs = or_default(&spec.h, &[1]);
        let ss = or_default(
            &spec.s,
            if spec.name == "trace_transposition" {
                &[2]
            } else {
                &[1]
            },
        );
        let uses_n = matches!(
            spec.name.as_str(),
            "quasi_shift_n"
                | "lemma_key"
                | "w_kernel"
                | "fg_duality"
                | "fy_ratio"
                | "abelian"
                | "poisson_limit"
        );
        let uses_h = matches!(spec.name.as_str(), "abelian" | "poisson_limit");
        let uses_s = matches!(
            spec.name.as_str(),
            "trace_transposition" | "w_kernel" | "fy_ratio"
        );
        let ns: Vec<Option<i64>> = if uses_n {
            ns.into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let hs: Vec<Option<i64>> = if uses_h {
            hs.into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let ss: Vec<Option<usize>> = if uses_s {
            ss.into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let mut line = 0;
        for &rank in &spec.ranks {
            for &n in &ns {
                for &h in &hs {
                    for &s in &ss {
                        for point in 0..spec.points {
                            out.push(Cell {
                                spec: si,
                                cell: out.len(),
                                rank,
                                n,
                                h,
                                s,
                                point,
                                seed: line_seed(spec.seed, si, line),
                            });
                            line += 1;
                        }
                    }
                }
            }
        }
    }
    out
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

fn sample_zeta(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(uniform(rng, -0.2, 0.2), uniform(rng, 0.2, 0.6))
}

fn sample_tau(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(uniform(rng, -0.2, 0.2), uniform(rng, 0.6, 1.2))
}

fn sample_xi(rng: &mut ChaCha8Rng) -> SpectralPoint {
    SpectralPoint::from_parts(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2))
}

/// A generic central charge keeping `|p*| < 1`.
fn sample_c(rng: &mut ChaCha8Rng, zeta: C64, tau: C64) -> C64 {
    loop {
        let c = C64::new(uniform(rng, -1.0, 1.0), uniform(rng, -0.3, 0.3));
        if (tau - c * zeta).im > 0.05 {
            return c;
        }
    }
}

/// Parameters drawn for one attempt of one line.
struct Draw {
    params: LogParams,
    points: Vec<SpectralPoint>,
}

fn draw(
    spec: &CheckSpec,
    cell: &Cell,
    rng: &mut ChaCha8Rng,
    attempt: usize,
    needs: usize,
) -> Result<Draw> {
    let zeta = spec.zeta.map(from_pair).unwrap_or_else(|| sample_zeta(rng));
    let tau = spec.tau.map(from_pair).unwrap_or_else(|| sample_tau(rng));
    let mut params = LogParams::new(cell.rank, zeta, tau)?;
    if matches!(spec.name.as_str(), "t_relations" | "transposed_ybe") {
        let c = spec
            .c
            .map(from_pair)
            .unwrap_or_else(|| sample_c(rng, zeta, tau));
        params = params.with_c(c);
    }
    let points = match &spec.xi {
        // Fixed points are used as given; only the first attempt can differ.
        Some(list) => (0..needs)
            .map(|k| {
                SpectralPoint::new(from_pair(
                    list[(cell.point * needs + k + attempt) % list.len()],
                ))
            })
            .collect(),
        None => (0..needs).map(|_| sample_xi(rng)).collect(),
    };
    Ok(Draw { params, points })
}

fn points_needed(name: &str) -> usize {
    match name {
        "ybe" | "transposed_ybe" => 2,
        "r_at_one" | "trace_transposition" => 0,
        _ => 1,
    }
}

fn evaluate(
    manifest: &RunManifest,
    spec: &CheckSpec,
    cell: &Cell,
    d: &Draw,
    trunc: &TruncationPolicy,
) -> Result<CheckReport> {
    let name = spec.name.as_str();
    let tol = manifest.tol(name);
    let p = &d.params;
    let pts = &d.points;
    let (n, h, s) = (
        cell.n.unwrap_or(0),
        cell.h.unwrap_or(1),
        cell.s.unwrap_or(1),
    );
    let surface = SurfaceSpec::new(cell.rank, n);
    let report = match name {
        "ybe" | "unitarity" | "crossing" | "antisymmetry" | "zn_symmetry" | "quasi_periodicity" => {
            let kind = RProperty::from_name(name).expect("validated name");
            check_r_property(kind, p, pts, trunc)?
        }
        "r_at_one" => check_r_at_one(p, trunc)?,
        "tau_n" => check_tau_n(p, pts[0], trunc)?,
        "t_relations" => check_t_relations(p, pts[0], trunc)?,
        "quasi_shift_n" => check_quasi_shift_n(p, n, pts[0], trunc)?,
        "lemma_key" => check_lemma_key(&surface, p, pts[0], trunc)?,
        "trace_transposition" => check_trace_transposition(cell.rank, s, cell.seed)?,
        "transposed_ybe" => check_transposed_ybe(p, pts[0], pts[1], trunc)?,
        "w_kernel" => check_w_kernel(s, pts[0], &surface, p, trunc)?,
        "fg_duality" => check_fg_duality(&surface, p, pts[0], trunc)?,
        "fy_ratio" => check_fy_ratio(&surface, p, s, pts[0], trunc)?,
        "abelian" => check_abelian(cell.rank, n, h, p.zeta, pts[0], trunc)?,
        "commuting" => check_commuting(p, pts[0], trunc)?,
        "poisson_limit" => {
            let betas = spec.betas.clone().unwrap_or_else(|| DEFAULT_BETAS.to_vec());
            check_poisson_limit(cell.rank, n, h, pts[0], p.zeta, &betas, trunc, tol)?.0
        }
        other => return Err(Error::Manifest(format!("unknown check `{other}`"))),
    };
    let record = report.record.clone().with_seed(cell.seed);
    Ok(CheckReport { record, ..report }.with_tol(tol))
}

fn run_cell(manifest: &RunManifest, cell: &Cell) -> ReportLine {
    let spec = &manifest.checks[cell.spec];
    let name = spec.name.as_str();
    let tol = manifest.tol(name);
    let needs = points_needed(name);
    let screen = manifest
        .trunc
        .with_pole_guard(manifest.trunc.pole_guard.max(SCREEN_GUARD));
    let mut rng = ChaCha8Rng::seed_from_u64(cell.seed);
    let mut last_err = None;
    let mut last_record = ParamRecord {
        rank: cell.rank,
        seed: Some(cell.seed),
        ..Default::default()
    };
    for attempt in 0..MAX_ATTEMPTS {
        let d = match draw(spec, cell, &mut rng, attempt, needs) {
            Ok(d) => d,
            Err(e) => return ReportLine::from_error(name, &last_record, tol, cell.cell, &e),
        };
        last_record = ParamRecord::new(&d.params, &d.points).with_seed(cell.seed);
        last_record.n = cell.n;
        last_record.h = cell.h;
        match evaluate(manifest, spec, cell, &d, &screen) {
            Ok(r) => return ReportLine::from_report(&r, cell.cell),
            Err(e @ Error::NearPole { .. }) => last_err = Some(e),
            Err(e) => return ReportLine::from_error(name, &last_record, tol, cell.cell, &e),
        }
    }
    let err = last_err.expect("at least one attempt ran");
    ReportLine::from_error(name, &last_record, tol, cell.cell, &err)
}

fn sort_lines(lines: &mut [ReportLine]) {
    lines.sort_by(|a, b| (a.name.as_str(), a.cell, a.seed).cmp(&(b.name.as_str(), b.cell, b.seed)));
}

/// Evaluates every check cell of the manifest on `jobs` workers (0 means the
/// rayon default) and returns report lines sorted by name, cell and seed.
pub fn evaluate_manifest(manifest: &RunManifest, jobs: usize) -> Result<Vec<ReportLine>> {
    manifest.validate()?;
    let cells = cells(manifest);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let mut lines: Vec<ReportLine> =
        pool.install(|| cells.par_iter().map(|c| run_cell(manifest, c)).collect());
    sort_lines(&mut lines);
    Ok(lines)
}

/// Evaluates one sweep.
pub fn evaluate_sweep(
    sweep: &SweepSpec,
    trunc: &TruncationPolicy,
) -> Result<Vec<crate::structfn::SweepRow>> {
    let zeta = from_pair(sweep.zeta);
    let start = from_pair(sweep.ray.start);
    let end = from_pair(sweep.ray.end);
    let steps = sweep.ray.steps;
    match sweep.function.as_str() {
        "F" | "Y" | "G" => {
            let tau = from_pair(
                sweep
                    .tau
                    .ok_or_else(|| Error::Manifest("sweep needs tau".into()))?,
            );
            let st = Structure::new(sweep.rank, zeta, tau, *trunc)?;
            let n = sweep.n;
            match sweep.function.as_str() {
                "F" => sweep_ray(start, end, steps, |x| st.f(n, x)),
                "Y" => sweep_ray(start, end, steps, |x| st.y(n, x)),
                _ => sweep_ray(start, end, steps, |x| st.g(n, x)),
            }
        }
        "f_h" => {
            let h = sweep
                .h
                .ok_or_else(|| Error::Manifest("f_h sweep needs h".into()))?;
            sweep_ray(start, end, steps, |x| {
                f_h(&PoissonArgs {
                    rank: sweep.rank,
                    n: sweep.n,
                    h,
                    x,
                    zeta,
                    trunc: *trunc,
                })
            })
        }
        "tau_n" => sweep_ray(start, end, steps, |x| tau_n(x, zeta, sweep.rank, trunc)),
        other => Err(Error::Manifest(format!("unknown sweep function `{other}`"))),
    }
}

pub fn write_report<W: Write>(mut w: W, lines: &[ReportLine]) -> std::io::Result<()> {
    for line in lines {
        writeln!(w, "{}", line.to_json())?;
    }
    Ok(())
}

/// Runs every check and sweep, writing `report.jsonl` and one CSV per sweep
/// into `out_dir` (the manifest's when `None`, else `out`).
pub fn run_manifest(
    manifest: &RunManifest,
    out_dir: Option<&Path>,
    jobs: usize,
) -> Result<Summary> {
    let dir: PathBuf = out_dir
        .map(Path::to_path_buf)
        .or_else(|| manifest.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let lines = evaluate_manifest(manifest, jobs)?;
    let report_path = dir.join("report.jsonl");
    let file = fs::File::create(&report_path)
        .map_err(|e| Error::Io(format!("{}: {e}", report_path.display())))?;
    let mut w = BufWriter::new(file);
    write_report(&mut w, &lines)?;
    w.flush()?;
    for (i, sweep) in manifest.sweeps.iter().enumerate() {
        let rows = evaluate_sweep(sweep, &manifest.trunc)?;
        let path = dir.join(format!("{}.csv", sweep.stem(i)));
        let file =
            fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_sweep_csv(&mut w, &rows)?;
        w.flush()?;
    }
    Ok(Summary::from_lines(&lines))
}

/// The fixed smoke manifest used by [`verify_quick`].
pub fn quick_manifest(rank: usize) -> RunManifest {
    let fixed = |name: &str| CheckSpec {
        ranks: vec![rank],
        zeta: Some([0.05, 0.3]),
        tau: Some([0.1, 0.9]),
        xi: Some(vec![[0.13, 0.07], [-0.07, 0.02]]),
        points: 1,
        ..CheckSpec::new(name)
    };
    let mut checks = vec![fixed("ybe"), fixed("unitarity"), fixed("quasi_periodicity")];
    checks.push(CheckSpec {
        n: vec![1],
        ..fixed("lemma_key")
    });
    checks.push(CheckSpec {
        n: vec![1],
        s: vec![1],
        ..fixed("fy_ratio")
    });
    checks.push(CheckSpec {
        n: vec![1],
        h: vec![2],
        ..fixed("poisson_limit")
    });
    RunManifest {
        checks,
        ..Default::default()
    }
}

/// Smoke run at baked-in parameters.
pub fn verify_quick(rank: usize, trunc: &TruncationPolicy) -> Result<(Summary, Vec<ReportLine>)> {
    if rank < 2 {
        return Err(Error::UnsupportedRank {
            rank,
            reason: "rank must be at least 2",
        });
    }
    let manifest = RunManifest {
        trunc: *trunc,
        ..quick_manifest(rank)
    };
    let lines = evaluate_manifest(&manifest, 0)?;
    Ok((Summary::from_lines(&lines), lines))
}
