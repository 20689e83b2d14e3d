#![allow(dead_code)]

use std::path::PathBuf;

use nfteig_harness::ExperimentConfig;

pub fn bundled_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn bundled(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_path(&bundled_path(name)).expect("bundled config parses")
}

pub const SEARCH: &str = r#"
[search]
scheme = "forward-difference"
re_min = -0.5
re_max = 0.5
im_min = 0.1
im_max = 2.0
spacing = 0.1
compute_amplitudes = false
"#;

pub fn small_e9(runs: usize) -> String {
    format!(
        r#"experiment_id = "E9"
seed = 7
runs = {runs}
{SEARCH}
[params]
g = "sum-imag"

[params.pulse]
kind = "sech"
amplitude = 2.0

[params.noise]
epsilon = 0.0125
segment_length = 0.1

[thresholds]
min_correlation = 0.95
"#
    )
}

pub fn small_e2(min_error_ratio: f64) -> String {
    format!(
        r#"experiment_id = "E2"
seed = 3
runs = 100
{SEARCH}
[params]
lambda1_range = [0.70, 0.82]
lambda2_range = [0.90, 1.02]
sparse_shape = [4, 6]
dense_shape = [7, 12]

[params.noise]
kind = "gaussian"
sigma = 0.006
rho = 0.9

[thresholds]
min_error_ratio = {min_error_ratio:?}
min_noise_correlation = 0.7
"#
    )
}

pub fn small_e6(epsilon: f64) -> String {
    format!(
        r#"experiment_id = "E6"
seed = 11
runs = 20
{SEARCH}
[params]
z_total = 0.5
segments = 5
steps_per_segment = 16
epsilon = {epsilon:?}
g = "per-eigenvalue-imag"

[params.pulse]
kind = "sech"
amplitude = 2.0

[thresholds]
mean_rel_tol = 0.15
cov_rel_tol = 0.15
min_pair_correlation = 0.9
"#
    )
}
