//! Command implementations and run-directory file formats.

use crate::render;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use zonoreach::boundary::extract_boundary;
use zonoreach::inner::{inner_reach, InnerParams, StepRecord};
use zonoreach::metrics::{soundness_check, simulation_hull, width_ratios_box, EvalReport};
use zonoreach::ode::{benchmark, benchmark_from_json, benchmark_specs, Benchmark};
use zonoreach::outer::OuterParams;
use zonoreach::tiling::{split_parallelotope_grid, tile, tile_with_budget, tiles_from_matrix};
use zonoreach::zonotope::Zonotope;
use zonoreach::{Error, DEFAULT_TOL};

pub enum Outcome {
    Success,
    /// The reach run stopped on an unverified step.
    Unverified,
}

pub enum CmdError {
    /// Bad arguments, unreadable files, malformed JSON.
    Usage(String),
    /// The computation itself failed.
    Numeric(String),
}

type CmdResult = Result<Outcome, CmdError>;

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

fn numeric(e: Error) -> CmdError {
    CmdError::Numeric(e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CmdError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- boundary

#[derive(Serialize)]
struct FacetOut {
    center: Vec<f64>,
    generators: zonoreach::linalg::Mat,
    normal: Vec<f64>,
    row: usize,
}

pub fn cmd_boundary(zonotope_path: &Path, out: Option<&Path>) -> CmdResult {
    let z: Zonotope = read_json(zonotope_path)?;
    let (facets, matrix) = extract_boundary(&z, DEFAULT_TOL).map_err(numeric)?;
    let facets_out: Vec<FacetOut> = facets
        .into_iter()
        .map(|f| FacetOut {
            center: f.zonotope.center,
            generators: f.zonotope.generators,
            normal: f.normal,
            row: f.row,
        })
        .collect();
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| zonotope_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let stem = zonotope_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("zonotope");
    write_text(&dir.join(format!("{stem}.facets.json")), &pretty(&facets_out))?;
    write_text(
        &dir.join(format!("{stem}.boundary.csv")),
        &int_matrix_csv(&matrix.entries),
    )?;
    println!(
        "{} facets -> {}/{stem}.facets.json, boundary matrix -> {}/{stem}.boundary.csv",
        facets_out.len(),
        dir.display(),
        dir.display()
    );
    Ok(Outcome::Success)
}

fn int_matrix_csv(entries: &[Vec<i8>]) -> String {
    let mut out = String::new();
    for row in entries {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

// -------------------------------------------------------------------- tile

pub fn cmd_tile(
    zonotope_path: &Path,
    budget: usize,
    grid_k: usize,
    out: Option<&Path>,
) -> CmdResult {
    let z: Zonotope = read_json(zonotope_path)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| zonotope_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let stem = zonotope_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("zonotope");
    if grid_k > 0 {
        let pieces = split_parallelotope_grid(&z, grid_k).map_err(numeric)?;
        write_text(&dir.join(format!("{stem}.tiles.json")), &pretty(&pieces))?;
        println!("{} grid tiles -> {}/{stem}.tiles.json", pieces.len(), dir.display());
        return Ok(Outcome::Success);
    }
    let tm = if budget > 0 {
        tile_with_budget(&z, DEFAULT_TOL, budget)
    } else {
        tile(&z, DEFAULT_TOL)
    }
    .map_err(numeric)?;
    let tiles = tiles_from_matrix(&tm).map_err(numeric)?;
    write_text(&dir.join(format!("{stem}.tiles.json")), &pretty(&tiles))?;
    write_text(&dir.join(format!("{stem}.tiling.csv")), &int_matrix_csv(&tm.entries))?;
    // tiling-matrix columns refer to the normalized generator order; when it
    // differs from the input, record the original index of each column
    let identity = tm.permutation.len() == z.num_generators()
        && tm.permutation.iter().enumerate().all(|(i, &p)| i == p);
    if !identity {
        let line: Vec<String> = tm.permutation.iter().map(|p| p.to_string()).collect();
        write_text(
            &dir.join(format!("{stem}.permutation.csv")),
            &format!("{}\n", line.join(",")),
        )?;
    }
    println!(
        "{} tiles -> {}/{stem}.tiles.json, tiling matrix -> {}/{stem}.tiling.csv",
        tiles.len(),
        dir.display(),
        dir.display()
    );
    Ok(Outcome::Success)
}

// ------------------------------------------------------------------- reach

/// Run configuration file. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Bundled benchmark name or path to a system config JSON.
    pub system: String,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default, rename = "N")]
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub outer: Option<OuterParams>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub out_dir: String,
}

/// Everything a finished run directory records about itself. Wall-clock
/// time is printed, not stored: run directories are byte-reproducible.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub system: zonoreach::ode::BenchmarkSpec,
    pub h: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub records: usize,
    pub verified_records: usize,
    pub fully_verified: bool,
    pub final_time: f64,
    pub final_set: Option<Zonotope>,
}

/// Flag-level overrides for `reach`; any field set here wins over the
/// config file.
#[derive(Debug, Default)]
pub struct ReachOverrides {
    pub system: Option<String>,
    pub h: Option<f64>,
    pub n_steps: Option<usize>,
    pub budget: Option<usize>,
    pub epsilon: Option<f64>,
    pub out: Option<PathBuf>,
}

fn resolve_system(reference: &str, base: &Path) -> Result<(Benchmark, zonoreach::ode::BenchmarkSpec), CmdError> {
    // a path wins over a bundled name when the file exists
    let candidate = if Path::new(reference).is_absolute() {
        PathBuf::from(reference)
    } else {
        base.join(reference)
    };
    if candidate.is_file() {
        let text = fs::read_to_string(&candidate)
            .map_err(|e| usage(format!("cannot read {}: {e}", candidate.display())))?;
        let spec: zonoreach::ode::BenchmarkSpec =
            serde_json::from_str(&text).map_err(|e| usage(format!("{reference}: {e}")))?;
        let bench = benchmark_from_json(&text).map_err(numeric)?;
        return Ok((bench, spec));
    }
    let spec = benchmark_specs()
        .into_iter()
        .find(|s| s.name == reference)
        .ok_or_else(|| usage(format!("unknown system `{reference}` (not a file, not bundled)")))?;
    let bench = benchmark(reference).map_err(numeric)?;
    Ok((bench, spec))
}

pub fn cmd_reach(config_path: Option<&Path>, overrides: ReachOverrides) -> CmdResult {
    let (config, base) = match config_path {
        Some(path) => {
            let config: RunConfig = read_json(path)?;
            (Some(config), path.parent().unwrap_or(Path::new(".")).to_path_buf())
        }
        None => (None, PathBuf::from(".")),
    };
    let system_ref = overrides
        .system
        .or_else(|| config.as_ref().map(|c| c.system.clone()))
        .ok_or_else(|| usage("reach needs a config file or --system"))?;
    let (bench, mut spec) = resolve_system(&system_ref, &base)?;
    let h = overrides
        .h
        .or_else(|| config.as_ref().and_then(|c| c.h))
        .unwrap_or(bench.h);
    let n_steps = overrides
        .n_steps
        .or_else(|| config.as_ref().and_then(|c| c.n_steps))
        .unwrap_or(((bench.horizon / h).round() as usize).max(1));
    spec.h = h;
    spec.horizon = h * n_steps as f64;
    let params = InnerParams {
        h,
        n_steps,
        boundary_budget: overrides
            .budget
            .or_else(|| config.as_ref().and_then(|c| c.budget))
            .unwrap_or(0),
        epsilon: overrides
            .epsilon
            .or_else(|| config.as_ref().and_then(|c| c.epsilon))
            .unwrap_or(1e-6),
        outer: config.as_ref().and_then(|c| c.outer.clone()).unwrap_or_default(),
        ..Default::default()
    };
    let out_dir = match (&overrides.out, &config) {
        (Some(dir), _) => dir.clone(),
        (None, Some(cfg)) => {
            if Path::new(&cfg.out_dir).is_absolute() {
                PathBuf::from(&cfg.out_dir)
            } else {
                base.join(&cfg.out_dir)
            }
        }
        (None, None) => return Err(usage("reach needs --out when no config file is given")),
    };
    let seed = config.as_ref().and_then(|c| c.seed).unwrap_or(0);
    run_and_write(&bench, &spec, &params, seed, &out_dir)
}

fn run_and_write(
    bench: &Benchmark,
    spec: &zonoreach::ode::BenchmarkSpec,
    params: &InnerParams,
    seed: u64,
    out_dir: &Path,
) -> CmdResult {
    let started = Instant::now();
    let records = inner_reach(&bench.system, &bench.x0, params).map_err(numeric)?;
    let wall = started.elapsed().as_secs_f64();
    fs::create_dir_all(out_dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", out_dir.display())))?;
    for (i, rec) in records.iter().enumerate() {
        write_text(&out_dir.join(format!("step_{i:04}.json")), &pretty(rec))?;
    }
    let verified = records.iter().filter(|r| r.verified).count();
    let fully = verified == records.len() && !records.is_empty();
    let (final_time, final_set) = records
        .iter()
        .rev()
        .find(|r| r.verified)
        .map(|r| (r.t_start + r.h, r.candidate.clone()))
        .unwrap_or((0.0, None));
    let summary = RunSummary {
        system: spec.clone(),
        h: params.h,
        n_steps: params.n_steps,
        seed,
        records: records.len(),
        verified_records: verified,
        fully_verified: fully,
        final_time,
        final_set,
    };
    write_text(&out_dir.join("summary.json"), &pretty(&summary))?;
    println!(
        "{}: {verified}/{} records verified, t = {final_time:.4}, {wall:.2} s, wrote {}",
        spec.name,
        records.len(),
        out_dir.display()
    );
    if fully {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::Unverified)
    }
}

// -------------------------------------------------------------------- eval

pub fn cmd_eval(run_dir: &Path, samples: usize, seed: u64) -> CmdResult {
    let summary: RunSummary = read_json(&run_dir.join("summary.json"))?;
    let Some(final_set) = &summary.final_set else {
        return Err(usage("run has no verified final set to evaluate"));
    };
    let bench = summary.system.build().map_err(numeric)?;
    let started = Instant::now();
    let hull = simulation_hull(&bench.system, &bench.x0, summary.final_time, samples, seed)
        .map_err(numeric)?;
    let ratios = width_ratios_box(final_set, &hull).map_err(numeric)?;
    let gamma = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let soundness = soundness_check(
        &bench.system,
        final_set,
        &bench.x0,
        summary.final_time,
        samples,
        seed,
    )
    .map_err(numeric)?;
    let report = EvalReport {
        gamma_min: gamma,
        width_ratios: ratios,
        samples,
        soundness,
        seed,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_text(&run_dir.join("eval_report.json"), &pretty(&report))?;
    let csv = format!(
        "name,T,gamma_min,soundness,samples,seed\n{},{},{:.6},{:.6},{},{}\n",
        summary.system.name, summary.final_time, gamma, soundness, samples, seed
    );
    write_text(&run_dir.join("eval_report.csv"), &csv)?;
    println!(
        "{}: gamma_min = {gamma:.3}, soundness = {soundness:.3} ({samples} samples, seed {seed})",
        summary.system.name
    );
    Ok(Outcome::Success)
}

// ------------------------------------------------------------------- bench

pub fn cmd_bench(name: Option<&str>, all: bool, list: bool) -> CmdResult {
    if list {
        for spec in benchmark_specs() {
            println!("{} (n = {}, h = {}, T = {})", spec.name, spec.dim, spec.h, spec.horizon);
        }
        return Ok(Outcome::Success);
    }
    let names: Vec<String> = if all {
        benchmark_specs().iter().map(|s| s.name.clone()).collect()
    } else if let Some(n) = name {
        vec![n.to_string()]
    } else {
        return Err(usage("bench needs --name <benchmark>, --all or --list"));
    };
    println!(
        "{:<20} {:>4} {:>7} {:>6} {:>9} {:>10} {:>9}",
        "benchmark", "dim", "T", "steps", "time (s)", "gamma_min", "sound"
    );
    let mut any_failed = false;
    for name in names {
        let bench = benchmark(&name).map_err(numeric)?;
        let n_steps = ((bench.horizon / bench.h).round() as usize).max(1);
        let params = InnerParams { h: bench.h, n_steps, ..Default::default() };
        let started = Instant::now();
        let records = inner_reach(&bench.system, &bench.x0, &params).map_err(numeric)?;
        let wall = started.elapsed().as_secs_f64();
        let verified = records.iter().filter(|r| r.verified).count();
        let last_ok = records.iter().rev().find(|r| r.verified);
        match last_ok {
            Some(rec) if verified == records.len() => {
                let u = rec.candidate.as_ref().expect("verified record");
                let t = rec.t_start + rec.h;
                let hull = simulation_hull(&bench.system, &bench.x0, t, 1000, 20240001)
                    .map_err(numeric)?;
                let ratios = width_ratios_box(u, &hull).map_err(numeric)?;
                let gamma = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
                let sound =
                    soundness_check(&bench.system, u, &bench.x0, t, 1000, 20240002)
                        .map_err(numeric)?;
                println!(
                    "{:<20} {:>4} {:>7.3} {:>6} {:>9.2} {:>10.3} {:>9.3}",
                    name,
                    bench.system.dim,
                    t,
                    records.len(),
                    wall,
                    gamma,
                    sound
                );
            }
            _ => {
                any_failed = true;
                let failure = records
                    .last()
                    .and_then(|r| r.failure.clone())
                    .unwrap_or_else(|| "no steps".into());
                println!(
                    "{:<20} {:>4} {:>7} {:>6} {:>9.2} unverified after {verified}: {failure}",
                    name, bench.system.dim, "-", records.len(), wall
                );
            }
        }
    }
    if any_failed {
        Ok(Outcome::Unverified)
    } else {
        Ok(Outcome::Success)
    }
}

// ------------------------------------------------------------------ render

pub fn cmd_render(run_dir: &Path, axes: &[usize], pieces: bool, out: Option<&Path>) -> CmdResult {
    let summary: RunSummary = read_json(&run_dir.join("summary.json"))?;
    let Some(final_set) = &summary.final_set else {
        return Err(usage("run has no verified final set to render"));
    };
    if axes.len() != 2 {
        return Err(usage("--axes needs exactly two entries"));
    }
    let n = final_set.dim();
    let (a1, a2) = (axes[0], axes[1]);
    if a1 == 0 || a2 == 0 || a1 > n || a2 > n || a1 == a2 {
        return Err(usage(format!("axes must be distinct and within 1..={n}")));
    }
    let bench = summary.system.build().map_err(numeric)?;
    let hull = simulation_hull(&bench.system, &bench.x0, summary.final_time, 1000, summary.seed)
        .map_err(numeric)?;
    let piece_sets: Vec<Zonotope> = if pieces {
        let last_idx = summary.records.saturating_sub(1);
        let rec: StepRecord = read_json(&run_dir.join(format!("step_{last_idx:04}.json")))?;
        rec.boundary_pieces
    } else {
        Vec::new()
    };
    let svg = render::render_projection(final_set, &hull, &piece_sets, a1 - 1, a2 - 1);
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run_dir.join(format!("projection_{a1}_{a2}.svg")));
    write_text(&path, &svg)?;
    println!("wrote {}", path.display());
    Ok(Outcome::Success)
}
