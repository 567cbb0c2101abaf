use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SITES: &str = r#"
[[layout.sites]]
x_m = 180.0
y_m = 170.0
height_m = 28.0
azimuths_deg = [30.0, 150.0, 270.0]

[[layout.sites]]
x_m = 1010.0
y_m = 210.0
height_m = 25.0
azimuths_deg = [90.0, 210.0, 330.0]

[[layout.sites]]
x_m = 200.0
y_m = 1000.0
height_m = 30.0
azimuths_deg = [0.0, 120.0, 240.0]

[[layout.sites]]
x_m = 1020.0
y_m = 1010.0
height_m = 27.0
azimuths_deg = [60.0, 180.0, 300.0]

[[layout.sites]]
x_m = 780.0
y_m = 760.0
height_m = 20.0
azimuths_deg = [45.0, 165.0, 285.0]
"#;

fn cco(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cco")).current_dir(dir).args(args).output().expect("spawn cco")
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// A 40 m grid with small budgets so the optimizers finish quickly.
fn coarse_workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        "seed = 5\n[environment]\nseed = 11\n[layout]\n{SITES}\n[layout.grid]\nwidth_m = 1200.0\nheight_m = 1200.0\nresolution_m = 40.0\n\
         [random]\nbudget = 50\n[bo]\nn_init = 8\nn_iter = 4\nraw_samples = 64\nstarts = 2\npattern_iterations = 5\n\
         [ddpg]\niterations = 20\nlambda_stride = 0.5\nhidden = [16, 16]\nbatch_size = 8\n[output]\ndir = \"out\"\n"
    );
    fs::write(dir.path().join("cfg.toml"), cfg).unwrap();
    ok(cco(dir.path(), &["gen-env", "--config", "cfg.toml"]));
    ok(cco(dir.path(), &["precompute", "--config", "cfg.toml"]));
    dir
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn gen_env_writes_fifteen_antennas_idempotently() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.toml"), format!("[environment]\nseed = 2024\n[layout]\n{SITES}")).unwrap();
    ok(cco(dir.path(), &["gen-env", "--config", "c.toml", "--out", "a.toml"]));
    ok(cco(dir.path(), &["gen-env", "--config", "c.toml", "--out", "b.toml"]));
    let a = fs::read_to_string(dir.path().join("a.toml")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.toml")).unwrap());
    assert_eq!(a.matches("[[antennas]]").count(), 15);
    assert!(a.starts_with("seed = 2024\n"));

    ok(cco(dir.path(), &["gen-env", "--config", "c.toml", "--seed", "7", "--out", "s.toml"]));
    assert!(fs::read_to_string(dir.path().join("s.toml")).unwrap().starts_with("seed = 7\n"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.toml"), "[environment]\nseed = 1\n").unwrap();
    let out = cco(dir.path(), &["gen-env", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing [layout] section"));

    let out = cco(dir.path(), &["gen-env", "--config", "absent.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));

    let out = cco(dir.path(), &["run", "--method", "anneal", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cco(dir.path(), &["run", "--method", "random", "--config", "c.toml", "--budget", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--budget"));
}

#[test]
fn precompute_checksum_is_stable() {
    let dir = coarse_workspace();
    let first = ok(cco(dir.path(), &["precompute", "--env", "out/env.toml", "--out", "t2.bin"]));
    let second = ok(cco(dir.path(), &["precompute", "--env", "out/env.toml", "--out", "t3.bin"]));
    let sum = |s: &str| s.lines().find(|l| l.starts_with("sha256 ")).unwrap().to_string();
    assert_eq!(sum(&first), sum(&second));
    assert!(first.contains("tensor 15 x 11 x 30 x 30"));
    let bytes = fs::read(dir.path().join("t2.bin")).unwrap();
    assert_eq!(bytes, fs::read(dir.path().join("out/tensor.bin")).unwrap());
    // magic, version, four u32 dims, three f64 grid fields, seed, power, 11 u32 tilts
    let header = 8 + 4 + 16 + 24 + 8 + 8 + 4 * 11;
    assert_eq!(bytes.len(), header + 15 * 11 * 30 * 30 * 4);
}

#[test]
fn truncated_tensor_is_a_runtime_error() {
    let dir = coarse_workspace();
    let t = dir.path().join("out/tensor.bin");
    let bytes = fs::read(&t).unwrap();
    fs::write(&t, &bytes[..bytes.len() - 100]).unwrap();
    let out = cco(dir.path(), &["run", "--method", "random", "--config", "cfg.toml"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_records_one_row_per_evaluation() {
    let dir = coarse_workspace();
    let d = dir.path();
    ok(cco(d, &["run", "--method", "random", "--config", "cfg.toml"]));
    ok(cco(d, &["run", "--method", "bo", "--config", "cfg.toml"]));
    ok(cco(d, &["run", "--method", "ddpg", "--config", "cfg.toml"]));

    let random = data_rows(&d.join("out/random_history.csv"));
    assert_eq!(random.len(), 50);
    assert!(random.iter().all(|r| r.len() == 3 + 30 + 5 && r[1] == "random" && r[2].is_empty()));

    let bo = data_rows(&d.join("out/bo_history.csv"));
    assert_eq!(bo.len(), 12);
    let hv: Vec<f64> = bo.iter().map(|r| r.last().unwrap().parse().unwrap()).collect();
    assert!(hv.windows(2).all(|w| w[1] >= w[0]));

    let ddpg = data_rows(&d.join("out/ddpg_history.csv"));
    assert_eq!(ddpg.len(), 3 * 20);
    for (k, lambda) in ["0", "0.5", "1"].iter().enumerate() {
        assert!(ddpg[k * 20..(k + 1) * 20].iter().all(|r| r[2] == *lambda));
    }

    let headers = |m: &str| fs::read_to_string(d.join(format!("out/{m}_history.csv"))).unwrap().lines().next().unwrap().to_string();
    assert_eq!(headers("random"), headers("bo"));
    assert_eq!(headers("random"), headers("ddpg"));
}

#[test]
fn budget_override_and_dry_run_agree() {
    let dir = coarse_workspace();
    let d = dir.path();
    let plan = ok(cco(d, &["run", "--method", "ddpg", "--config", "cfg.toml", "--budget", "7", "--lambda-stride", "0.25", "--dry-run"]));
    assert!(plan.contains("35 evaluations planned"), "{plan}");
    ok(cco(d, &["run", "--method", "ddpg", "--config", "cfg.toml", "--budget", "7", "--lambda-stride", "0.25", "--out", "o2"]));
    assert_eq!(data_rows(&d.join("o2/ddpg_history.csv")).len(), 35);
}

#[test]
fn runs_are_byte_identical_for_a_fixed_seed() {
    let dir = coarse_workspace();
    let d = dir.path();
    for method in ["random", "bo", "ddpg"] {
        for out in ["r1", "r2"] {
            ok(cco(d, &["run", "--method", method, "--config", "cfg.toml", "--seed", "3", "--out", out]));
        }
        for kind in ["history", "front"] {
            let name = format!("{method}_{kind}.csv");
            assert_eq!(fs::read(d.join("r1").join(&name)).unwrap(), fs::read(d.join("r2").join(&name)).unwrap(), "{name}");
        }
    }
    ok(cco(d, &["run", "--method", "random", "--config", "cfg.toml", "--seed", "4", "--out", "r3"]));
    assert_ne!(fs::read(d.join("r1/random_history.csv")).unwrap(), fs::read(d.join("r3/random_history.csv")).unwrap());
}

fn pgm_pixels(path: &Path) -> Vec<u8> {
    let bytes = fs::read(path).unwrap();
    let header = b"P5\n30 30\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    bytes[header.len()..].to_vec()
}

#[test]
fn report_writes_table_curves_and_rasters() {
    let dir = coarse_workspace();
    let d = dir.path();
    ok(cco(d, &["run", "--method", "random", "--config", "cfg.toml"]));
    fs::copy(d.join("out/random_history.csv"), d.join("copy.csv")).unwrap();
    let table = ok(cco(d, &["report", "--config", "cfg.toml", "--out", "rep", "out/random_history.csv", "copy.csv"]));
    assert!(table.contains("random#2"));
    let pairwise: Vec<&str> = table.lines().skip_while(|l| !l.contains("mean gap")).skip(1).take(2).collect();
    for line in &pairwise {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols[2..], ["0.000", "0.000"], "{line}");
    }

    let curve: Vec<Vec<String>> = data_rows(&d.join("rep/hv_curve.csv"));
    assert_eq!(curve.len(), 100);
    let hv: Vec<f64> = curve[..50].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(hv.windows(2).all(|w| w[1] >= w[0]));

    let low = pgm_pixels(&d.join("rep/baseline_min_power.pgm"));
    let high = pgm_pixels(&d.join("rep/baseline_max_power.pgm"));
    assert!(low.iter().chain(&high).all(|p| [0, 128, 255].contains(p)));
    let count = |px: &[u8], v: u8| px.iter().filter(|&&p| p == v).count();
    assert!(count(&low, 0) > count(&high, 0));
    assert!(count(&high, 255) > count(&low, 255));
    assert!(d.join("rep/raster_random.pgm").exists() && d.join("rep/raster_random_2.pgm").exists());
}

#[test]
fn malformed_history_is_located() {
    let dir = coarse_workspace();
    let d = dir.path();
    ok(cco(d, &["run", "--method", "random", "--config", "cfg.toml"]));
    let text = fs::read_to_string(d.join("out/random_history.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[4] = lines[4].replacen(",random,", ",random,oops", 1);
    let bad: PathBuf = d.join("bad.csv");
    fs::write(&bad, lines.join("\n")).unwrap();
    let out = cco(d, &["report", "--out", "rep", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:5:"), "{}", String::from_utf8_lossy(&out.stderr));
}
