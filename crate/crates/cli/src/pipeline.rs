//! Runs an [`ExperimentConfig`] and writes the artifact bundle.
//!
//! Layout of `output_dir`:
//!
//! | file | content |
//! |------|---------|
//! | `manifest.json` | version, conventions, resolved configuration, file list |
//! | `steady.json` | per-point solve diagnostics, photon numbers, negativities |
//! | `steady/<slug>_<k>.dat` | nonzero density-matrix entries `i j re im` |
//! | `sweep.csv` | one [`SweepRecord`] per `(series, h, ν)` |
//! | `timing.csv` | wall time per point |
//! | `wigner/<slug>_<k>.dat` | Wigner grid with fixed points in the metadata |
//! | `classical.json` | fixed points per point |
//!
//! Wall times live only in `timing.csv`, so every other file is a function
//! of the configuration alone.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use hyperspin::classical::{find_fixed_points, hypersphere_radius, FixedPointReport};
use hyperspin::density::{DensityMatrix, SolveInfo, TRUNCATION_TOLERANCE};
use hyperspin::entanglement::{negativity, NegativityResult};
use hyperspin::fock::FockSpace;
use hyperspin::liouvillian::build_liouvillian;
use hyperspin::network::NetworkParams;
use hyperspin::observables::{moments, wigner, WignerGrid};
use hyperspin::steady::solve_steady_state_with;

use crate::config::{ExperimentConfig, SeriesConfig};
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Memory granted to concurrently solved points.
const KRYLOV_BUDGET: usize = 2 << 30;

/// Steady state and derived observables at one pump value.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub series: String,
    /// Position of the pump value in the configured list.
    pub index: usize,
    pub h: f64,
    pub h_over_hth: f64,
    pub n_max: usize,
    pub params: NetworkParams,
    pub rho: DensityMatrix,
    pub info: SolveInfo,
    pub mean_n: Vec<f64>,
    /// One entry per requested mode, in the requested order.
    pub negativities: Vec<NegativityResult>,
    pub edge_ratio: f64,
    pub wall_time: f64,
}

impl PointResult {
    pub fn truncation_safe(&self) -> bool {
        self.edge_ratio <= TRUNCATION_TOLERANCE
    }

    pub fn negativity_of(&self, mode: usize) -> Option<f64> {
        self.negativities.iter().find(|n| n.modes == [mode]).map(|n| n.negativity)
    }
}

/// Row of `sweep.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub series: String,
    pub h: f64,
    pub h_over_hth: f64,
    /// Transposed mode, 1-based.
    pub nu: usize,
    pub negativity: f64,
    pub min_eigenvalue: f64,
    pub n_max: usize,
    pub scaled_residual: f64,
    pub truncation_safe: bool,
    pub mean_n: Vec<f64>,
}

impl SweepRecord {
    pub fn from_point(p: &PointResult) -> Vec<Self> {
        p.negativities
            .iter()
            .map(|n| Self {
                series: p.series.clone(),
                h: p.h,
                h_over_hth: p.h_over_hth,
                nu: n.modes[0] + 1,
                negativity: n.negativity,
                min_eigenvalue: n.min_eigenvalue,
                n_max: p.n_max,
                scaled_residual: p.info.scaled_residual,
                truncation_safe: p.truncation_safe(),
                mean_n: p.mean_n.clone(),
            })
            .collect()
    }
}

fn solver_error(series: &str, h: f64, n_max: usize) -> impl Fn(hyperspin::Error) -> CliError + '_ {
    move |source| CliError::Solver {
        context: format!("series {series:?}, h = {h}, n_max = {n_max}"),
        source,
    }
}

/// 0-based modes whose negativity `cfg` asks for.
pub fn negativity_modes(cfg: &ExperimentConfig, series: &SeriesConfig) -> Vec<usize> {
    match &cfg.outputs.negativity {
        None => Vec::new(),
        Some(n) if n.modes.is_empty() => (0..series.modes).collect(),
        Some(n) => n.modes.iter().map(|m| m - 1).collect(),
    }
}

/// Solves one point of `series` at pump `h`.
pub fn solve_point(cfg: &ExperimentConfig, series: &SeriesConfig, index: usize, h: f64) -> Result<PointResult, CliError> {
    let start = Instant::now();
    let params = series.params(h)?;
    let hth = series.threshold()?;
    let err = solver_error(&series.label, h, cfg.n_max);
    let space = FockSpace::with_n_max(series.modes, cfg.n_max).map_err(|e| CliError::Config(e.to_string()))?;
    let l = build_liouvillian(&params, &space).map_err(&err)?;
    let rho = solve_steady_state_with(&l, cfg.solver.method, &cfg.solver.options).map_err(&err)?;
    drop(l);
    let info = rho.info().cloned().unwrap_or_default();
    let mean_n = (0..series.modes)
        .map(|m| moments(&rho, m).map(|mo| mo.mean_n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(&err)?;
    let negativities = negativity_modes(cfg, series)
        .into_iter()
        .map(|m| negativity(&rho, m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(&err)?;
    let edge_ratio = rho.truncation_edge_ratio();
    log::info!(
        "{} h = {h:.4} (h/h_th = {:.3}): residual {:.2e}, edge {:.1e}, {:.1} s",
        series.label,
        h / hth,
        info.scaled_residual,
        edge_ratio,
        start.elapsed().as_secs_f64()
    );
    Ok(PointResult {
        series: series.label.clone(),
        index,
        h,
        h_over_hth: h / hth,
        n_max: cfg.n_max,
        params,
        rho,
        info,
        mean_n,
        negativities,
        edge_ratio,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Number of points solved at once without exceeding [`KRYLOV_BUDGET`].
fn concurrency(cfg: &ExperimentConfig) -> usize {
    let modes = cfg.series.iter().map(|s| s.modes).max().unwrap_or(1) as u32;
    let d = (cfg.n_max + 1).saturating_pow(modes);
    let per_point = d.saturating_mul(d).saturating_mul(16 * (cfg.solver.options.gmres_restart + 8));
    (KRYLOV_BUDGET / per_point.max(1)).clamp(1, rayon::current_num_threads())
}

/// Solves every `(series, h)` point, ordered by series then pump.
pub fn solve_all(cfg: &ExperimentConfig) -> Result<Vec<PointResult>, CliError> {
    let mut jobs = Vec::new();
    for s in &cfg.series {
        for (k, h) in cfg.pumps(s)?.into_iter().enumerate() {
            jobs.push((s, k, h));
        }
    }
    let width = concurrency(cfg);
    let mut out = Vec::with_capacity(jobs.len());
    for chunk in jobs.chunks(width) {
        let solved: Vec<_> = chunk.par_iter().map(|&(s, k, h)| solve_point(cfg, s, k, h)).collect();
        for r in solved {
            out.push(r?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalRecord {
    pub series: String,
    pub h: f64,
    pub h_over_hth: f64,
    pub threshold: f64,
    pub radius: Option<f64>,
    pub report: FixedPointReport,
}

pub fn classical_records(cfg: &ExperimentConfig) -> Result<Vec<ClassicalRecord>, CliError> {
    let Some(opts) = &cfg.outputs.classical else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for s in &cfg.series {
        let hth = s.threshold()?;
        for h in cfg.pumps(s)? {
            let params = s.params(h)?;
            let report = find_fixed_points(&params, opts.starts, cfg.seed).map_err(solver_error(&s.label, h, cfg.n_max))?;
            out.push(ClassicalRecord {
                series: s.label.clone(),
                h,
                h_over_hth: h / hth,
                threshold: hth,
                radius: hypersphere_radius(&params).value(),
                report,
            });
        }
    }
    Ok(out)
}

/// File-name stem for a series label.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if s.is_empty() {
        "series".into()
    } else {
        s
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path)(e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(path))
}

const CONVENTIONS: &str = "vec(rho)[i*D+j] = rho_ij; flat Fock index mode 1 slowest; x = (a + a^dag)/2";

fn matrix_text(m: &hyperspin::network::CouplingMatrix) -> String {
    let rows: Vec<String> = m
        .rows()
        .iter()
        .map(|r| r.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(","))
        .collect();
    format!("[{}]", rows.join(";"))
}

/// `# key value` header shared by the text outputs.
fn header_lines(cfg: &ExperimentConfig, kind: &str) -> Vec<(String, String)> {
    let mut out = vec![
        ("format".to_string(), format!("hyperspin-{kind} v{FORMAT_VERSION}")),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("conventions".into(), CONVENTIONS.into()),
        ("experiment".into(), cfg.name.clone()),
        ("n_max".into(), cfg.n_max.to_string()),
        ("solver".into(), cfg.solver.method.to_string()),
    ];
    for s in &cfg.series {
        if let Ok(p) = s.params(0.0) {
            out.push((
                "series".into(),
                format!(
                    "{} modes={} g={} beta={} C={} W={} h_th={:.12e}",
                    s.label,
                    s.modes,
                    p.loss,
                    p.beta,
                    matrix_text(&p.c),
                    matrix_text(&p.w),
                    s.threshold().unwrap_or(f64::NAN)
                ),
            ));
        }
    }
    out
}

fn point_metadata(cfg: &ExperimentConfig, p: &PointResult) -> Vec<(String, String)> {
    let mut m = header_lines(cfg, "point");
    m.retain(|(k, v)| k != "series" || v.split(' ').next() == Some(p.series.as_str()));
    m.extend([
        ("point_series".to_string(), p.series.clone()),
        ("h".into(), format!("{:.12e}", p.h)),
        ("h_over_hth".into(), format!("{:.12e}", p.h_over_hth)),
        ("scaled_residual".into(), format!("{:.3e}", p.info.scaled_residual)),
        ("min_eigenvalue".into(), format!("{:.3e}", p.info.min_eigenvalue)),
        ("truncation_edge_ratio".into(), format!("{:.3e}", p.edge_ratio)),
        ("truncation_safe".into(), p.truncation_safe().to_string()),
    ]);
    m
}

fn write_sweep_csv(path: &Path, cfg: &ExperimentConfig, points: &[PointResult]) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut head = String::new();
    for (k, v) in header_lines(cfg, "sweep") {
        writeln!(head, "# {k} {v}").unwrap();
    }
    w.write_all(head.as_bytes()).map_err(io_err(path))?;
    let modes = cfg.series.iter().map(|s| s.modes).max().unwrap_or(0);
    let mut csv = csv::Writer::from_writer(w);
    let mut cols: Vec<String> = [
        "series",
        "h",
        "h_over_hth",
        "nu",
        "negativity",
        "min_eigenvalue",
        "n_max",
        "scaled_residual",
        "truncation_safe",
    ]
    .map(String::from)
    .to_vec();
    cols.extend((1..=modes).map(|m| format!("mean_n_{m}")));
    let csv_err = |e: csv::Error| io_err(path)(e.into());
    csv.write_record(&cols).map_err(csv_err)?;
    for r in points.iter().flat_map(SweepRecord::from_point) {
        let mut row = vec![
            r.series.clone(),
            format!("{:.12e}", r.h),
            format!("{:.12e}", r.h_over_hth),
            r.nu.to_string(),
            format!("{:.12e}", r.negativity),
            format!("{:.12e}", r.min_eigenvalue),
            r.n_max.to_string(),
            format!("{:.3e}", r.scaled_residual),
            r.truncation_safe.to_string(),
        ];
        row.extend((0..modes).map(|m| r.mean_n.get(m).map(|v| format!("{v:.12e}")).unwrap_or_default()));
        csv.write_record(&row).map_err(csv_err)?;
    }
    csv.flush().map_err(io_err(path))
}

fn write_timing_csv(path: &Path, points: &[PointResult]) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| io_err(path)(e.into());
    csv.write_record(["series", "h", "solver", "iterations", "wall_time_s"]).map_err(csv_err)?;
    for p in points {
        csv.write_record([
            p.series.clone(),
            format!("{:.12e}", p.h),
            p.info.solver.clone(),
            p.info.iterations.to_string(),
            format!("{:.3}", p.wall_time),
        ])
        .map_err(csv_err)?;
    }
    csv.flush().map_err(io_err(path))
}

fn write_density(path: &Path, meta: &[(String, String)], rho: &DensityMatrix) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut text = String::new();
    for (k, v) in meta {
        writeln!(text, "# meta {k} {v}").unwrap();
    }
    writeln!(text, "# dim {}", rho.dim()).unwrap();
    writeln!(text, "# columns i j re im (nonzero entries, 0-based)").unwrap();
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            let v = rho.get(i, j);
            if v.re != 0.0 || v.im != 0.0 {
                writeln!(text, "{i} {j} {:.17e} {:.17e}", v.re, v.im).unwrap();
            }
        }
    }
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
}

#[derive(Serialize)]
struct SteadyEntry<'a> {
    series: &'a str,
    h: f64,
    h_over_hth: f64,
    n_max: usize,
    info: &'a SolveInfo,
    mean_n: &'a [f64],
    truncation_edge_ratio: f64,
    truncation_safe: bool,
    negativities: &'a [NegativityResult],
    density_file: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format_version: u32,
    version: &'static str,
    conventions: &'static str,
    truncation_tolerance: f64,
    config: &'a ExperimentConfig,
    files: &'a [String],
}

/// What [`run`] produced.
#[derive(Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub points: Vec<PointResult>,
    pub classical: Vec<ClassicalRecord>,
    /// Wigner grids, in point order.
    pub wigner: Vec<WignerGrid>,
}

/// Solves `cfg` and writes its artifact bundle.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut files = Vec::new();

    let classical = classical_records(cfg)?;
    let points = if cfg.outputs.needs_quantum() { solve_all(cfg)? } else { Vec::new() };

    let mut file_names = std::collections::HashMap::new();
    for p in &points {
        file_names.insert((p.series.clone(), p.index), format!("{}_{}", slug(&p.series), p.index));
    }

    let mut grids = Vec::new();
    if let Some(wo) = &cfg.outputs.wigner {
        let computed: Vec<Result<WignerGrid, CliError>> = points
            .iter()
            .map(|p| {
                let modes = p.params.num_modes();
                wigner(&p.rho, &wo.slice(modes)).map_err(solver_error(&p.series, p.h, p.n_max))
            })
            .collect();
        for (p, g) in points.iter().zip(computed) {
            let g = g?;
            let mut meta = point_metadata(cfg, p);
            if let Some(c) = classical.iter().find(|c| c.series == p.series && c.h == p.h) {
                for fp in &c.report.points {
                    let x: Vec<String> = fp.state.x.iter().map(|v| format!("{v:.12e}")).collect();
                    meta.push(("fixed_point".into(), format!("{} stable={} hits={}", x.join(","), fp.stable, fp.hits)));
                }
            }
            let name = format!("wigner/{}.dat", file_names[&(p.series.clone(), p.index)]);
            let path = dir.join(&name);
            let mut w = create(&path)?;
            g.write_to(&mut w, &meta).map_err(|e| match e {
                hyperspin::Error::Io(source) => CliError::Io { path: path.clone(), source },
                other => solver_error(&p.series, p.h, p.n_max)(other),
            })?;
            w.flush().map_err(io_err(&path))?;
            files.push(name);
            grids.push(g);
        }
    }

    if cfg.outputs.steady {
        let mut entries = Vec::new();
        for p in &points {
            let name = format!("steady/{}.dat", file_names[&(p.series.clone(), p.index)]);
            write_density(&dir.join(&name), &point_metadata(cfg, p), &p.rho)?;
            files.push(name.clone());
            entries.push(SteadyEntry {
                series: &p.series,
                h: p.h,
                h_over_hth: p.h_over_hth,
                n_max: p.n_max,
                info: &p.info,
                mean_n: &p.mean_n,
                truncation_edge_ratio: p.edge_ratio,
                truncation_safe: p.truncation_safe(),
                negativities: &p.negativities,
                density_file: Some(name),
            });
        }
        write_json(&dir.join("steady.json"), &entries)?;
        files.push("steady.json".into());
    }

    if cfg.outputs.negativity.is_some() {
        write_sweep_csv(&dir.join("sweep.csv"), cfg, &points)?;
        files.push("sweep.csv".into());
    }
    if !points.is_empty() {
        write_timing_csv(&dir.join("timing.csv"), &points)?;
        files.push("timing.csv".into());
    }
    if cfg.outputs.classical.is_some() {
        write_json(&dir.join("classical.json"), &classical)?;
        files.push("classical.json".into());
    }

    files.sort();
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            format_version: FORMAT_VERSION,
            version: env!("CARGO_PKG_VERSION"),
            conventions: CONVENTIONS,
            truncation_tolerance: TRUNCATION_TOLERANCE,
            config: cfg,
            files: &files,
        },
    )?;
    Ok(RunSummary {
        output_dir: dir,
        files,
        points,
        classical,
        wigner: grids,
    })
}
