//! The `gen-env`, `precompute`, `run` and `report` subcommands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};

use cco_core::ddpg::lambda_sweep;
use cco_core::mobo::bo_loop_with;
use cco_core::objectives::{Configuration, Evaluation, Thresholds, POWER_MAX_DBM, POWER_MIN_DBM};
use cco_core::pareto::{non_dominated, Point2, REFERENCE_POINT};
use cco_core::random::random_search_with;
use cco_core::rfmap::{generate_environment, precompute_coverage, CoverageTensor, EnvironmentSpec, RadioEnvironment};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Method, RunOverrides};
use crate::error::{CliError, Result};
use crate::history::{read_history_file, write_front_file, write_history_file};
use crate::report::{balanced_row, coverage_raster, frontier_report, label_histories, write_curves, write_pgm};

/// Caps the global thread pool at `CCO_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("CCO_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("CCO_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the environment description for the config's layout and seed.
pub fn gen_env(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<PathBuf> {
    let cfg = ExperimentConfig::load(config)?;
    let env = generate_environment(cfg.layout()?, seed.unwrap_or(cfg.environment.seed))?;
    let text = toml::to_string(env.spec()).map_err(|e| CliError::Runtime(format!("serializing environment: {e}")))?;
    let path = out.map_or_else(|| cfg.env_path(), Path::to_path_buf);
    write_file(&path, text.as_bytes())?;
    Ok(path)
}

pub fn load_environment(path: &Path) -> Result<RadioEnvironment> {
    let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    let spec: EnvironmentSpec =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: invalid environment: {e}", path.display())))?;
    Ok(RadioEnvironment::from_spec(spec)?)
}

pub fn load_tensor(path: &Path) -> Result<CoverageTensor> {
    let f = File::open(path).map_err(|e| CliError::read(path, e))?;
    CoverageTensor::read_from(BufReader::new(f))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecomputeSummary {
    pub path: PathBuf,
    pub dims: [usize; 4],
    pub bytes: usize,
    pub sha256: String,
}

/// Computes every sector/downtilt map and writes the tensor file.
pub fn precompute(config: Option<&Path>, env: Option<&Path>, out: Option<&Path>) -> Result<PrecomputeSummary> {
    let cfg = config.map(ExperimentConfig::load).transpose()?;
    let env_path = env
        .map(Path::to_path_buf)
        .or_else(|| cfg.as_ref().map(ExperimentConfig::env_path))
        .ok_or_else(|| CliError::Config("precompute needs --env or --config".into()))?;
    let out_path = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.as_ref().map(ExperimentConfig::tensor_path))
        .ok_or_else(|| CliError::Config("precompute needs --out or --config".into()))?;
    let tensor = precompute_coverage(&load_environment(&env_path)?);
    let mut bytes = Vec::new();
    tensor.write_to(&mut bytes)?;
    write_file(&out_path, &bytes)?;
    Ok(PrecomputeSummary { path: out_path, dims: tensor.dims(), bytes: bytes.len(), sha256: sha256_hex(&bytes) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub method: Method,
    pub evaluations: usize,
    pub front_size: usize,
    pub hypervolume: f64,
    pub history: PathBuf,
    pub front: PathBuf,
}

pub fn history_path(dir: &Path, method: Method) -> PathBuf {
    dir.join(format!("{}_history.csv", method.name()))
}

pub fn front_path(dir: &Path, method: Method) -> PathBuf {
    dir.join(format!("{}_front.csv", method.name()))
}

/// Runs one optimizer on the precomputed tensor and writes its CSVs.
pub fn run(
    config: &Path,
    method: Method,
    overrides: &RunOverrides,
    tensor: Option<&Path>,
    out: Option<&Path>,
) -> Result<RunSummary> {
    let cfg = ExperimentConfig::load(config)?.with_overrides(overrides, method)?;
    let planned = cfg.planned_evaluations(method)?;
    let tensor = load_tensor(&tensor.map_or_else(|| cfg.tensor_path(), Path::to_path_buf))?;
    let dir = out.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf);

    let progress = std::io::stderr().is_terminal();
    let mut seen = 0usize;
    let mut observe = |_: &Evaluation| {
        seen += 1;
        if progress && (seen.is_multiple_of(10) || seen == planned) {
            eprint!("\r{}: {seen}/{planned}", method.name());
            if seen == planned {
                eprintln!();
            }
        }
    };
    let evaluations = match method {
        Method::Random => random_search_with(&tensor, &cfg.thresholds, cfg.random.budget, cfg.seed, &mut observe)?,
        Method::Bo => bo_loop_with(&tensor, &cfg.thresholds, &cfg.bo_options(), &mut observe)?.history,
        Method::Ddpg => lambda_sweep(
            &tensor,
            &cfg.thresholds,
            cfg.ddpg.iterations,
            cfg.ddpg.lambda_stride,
            cfg.seed,
            &cfg.ddpg_config(tensor.sectors()),
        )?,
    };
    if evaluations.len() != planned {
        return Err(CliError::Runtime(format!("{} evaluations recorded, {planned} planned", evaluations.len())));
    }

    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let (history, front) = (history_path(&dir, method), front_path(&dir, method));
    write_history_file(&history, method.name(), &evaluations, &REFERENCE_POINT)?;
    write_front_file(&front, method.name(), &evaluations)?;
    let points: Vec<Point2> = evaluations.iter().map(|e| e.objectives.normalized()).collect();
    let nd = non_dominated(&points);
    Ok(RunSummary {
        method,
        evaluations: evaluations.len(),
        front_size: nd.len(),
        hypervolume: nd.hypervolume(&REFERENCE_POINT),
        history,
        front,
    })
}

#[derive(Clone, Debug)]
pub struct ReportSummary {
    pub table: String,
    pub files: Vec<PathBuf>,
}

/// Compares histories and renders coverage rasters when a tensor is at hand.
pub fn report(config: Option<&Path>, tensor: Option<&Path>, out: Option<&Path>, histories: &[PathBuf]) -> Result<ReportSummary> {
    if histories.is_empty() {
        return Err(CliError::Config("report needs at least one history file".into()));
    }
    let cfg = config.map(ExperimentConfig::load).transpose()?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.as_ref().map(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let thresholds = cfg.as_ref().map_or_else(Thresholds::default, |c| c.thresholds);
    let labeled = label_histories(histories.iter().map(|p| read_history_file(p)).collect::<Result<_>>()?);

    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut files = Vec::new();
    let table = frontier_report(&labeled, &REFERENCE_POINT)?.to_string();
    let report_path = dir.join("report.txt");
    write_file(&report_path, table.as_bytes())?;
    files.push(report_path);

    let curves = dir.join("hv_curve.csv");
    let f = File::create(&curves).map_err(|e| CliError::io(&curves, e))?;
    write_curves(BufWriter::new(f), &labeled, &REFERENCE_POINT)?;
    files.push(curves);

    let tensor_path = tensor.map(Path::to_path_buf).or_else(|| cfg.as_ref().map(ExperimentConfig::tensor_path));
    if let Some(tp) = tensor_path.filter(|p| p.exists()) {
        let t = load_tensor(&tp)?;
        let (rows, cols) = (t.grid().rows(), t.grid().cols());
        let mut render = |name: String, config: &Configuration| -> Result<()> {
            let pixels = coverage_raster(&t, config, &thresholds)?;
            let path = dir.join(name);
            let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
            let mut w = BufWriter::new(f);
            write_pgm(&mut w, rows, cols, &pixels).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
            files.push(path);
            Ok(())
        };
        let mid_tilt = t.downtilts()[t.downtilts().len() / 2];
        render("baseline_min_power.pgm".into(), &Configuration::uniform(t.sectors(), mid_tilt, POWER_MIN_DBM)?)?;
        render("baseline_max_power.pgm".into(), &Configuration::uniform(t.sectors(), mid_tilt, POWER_MAX_DBM)?)?;
        for h in &labeled {
            if let Some(row) = balanced_row(&h.rows) {
                render(format!("raster_{}.pgm", h.label.replace('#', "_")), &row.config)?;
            }
        }
    }
    Ok(ReportSummary { table, files })
}
