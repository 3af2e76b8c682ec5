#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rmt_lab::config::ExperimentKind;

pub const BIN: &str = env!("CARGO_BIN_EXE_rmt-lab");

pub fn rmt_lab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("RMT_LAB_WORKERS").output().expect("binary runs")
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small configs for every experiment, each running in well under a second.
pub fn small_configs() -> Vec<(ExperimentKind, &'static str)> {
    vec![
        (
            ExperimentKind::Sample,
            r#"
master_seed = 5
trials = 20
[ensemble]
n = 30
[sample]
vectors = true
"#,
        ),
        (
            ExperimentKind::Smallball,
            r#"
master_seed = 6
trials = 300
[ensemble]
n = 60
[locations]
lambdas = [-0.7, 0.7]
units = "sqrt_n"
kappa = 0.6
delta_sep = 1.4
[grids]
delta = [0.4, 0.8]
delta_vectors = [[0.2, 1.0]]
"#,
        ),
        (
            ExperimentKind::Mesoscopic,
            r#"
master_seed = 7
trials = 200
[ensemble]
n = 60
[locations]
center = 0.0
d = 2
kappa = 0.5
delta_sep = 1.0
sep_exponent = 0.5
[grids]
n = [40, 60]
delta = [0.8]
"#,
        ),
        (
            ExperimentKind::Rigidity,
            r#"
master_seed = 8
trials = 20
[ensemble]
n = 60
[locations]
lambdas = [0.0, 0.7]
units = "sqrt_n"
kappa = 0.5
[grids]
n = [30, 60]
"#,
        ),
        (
            ExperimentKind::Relations,
            r#"
master_seed = 9
trials = 50
[relation]
coefficients = [1.0, 1.0]
kappa = 0.5
delta_sep = 0.5
[grids]
n = [20, 30, 40]
"#,
        ),
        (
            ExperimentKind::Oracle,
            r#"
master_seed = 10
[ensemble]
n = 20
[oracle]
checks = ["distance_identity", "sigma_min_bound", "product_inequality", "region_volume", "hanson_wright", "decoupling", "operator_norm_tail"]
distance_instances = 20
bound_instances = 20
product_instances = 20
region_d = [2, 3]
region_samples = 20000
hanson_wright_n = 10
hanson_wright_trials = 2000
decoupling_inner = 200
decoupling_outer = 100
operator_norm_trials = 100
"#,
        ),
    ]
}

/// Every CSV in `dir`, sorted by name, with contents.
pub fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}
