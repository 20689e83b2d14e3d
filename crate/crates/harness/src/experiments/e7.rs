//! Scaling versus residual noise: the noise is split into its projection on
//! the signal (`n₁`) and the orthogonal rest (`n₂`), and each part is added
//! separately.

use nfteig_core::nft::{find_discrete_eigenvalues, SearchConfig};
use nfteig_core::noise::{decompose_noise, run_ensemble, tracked_spectrum, Ensemble, GSelector, RunFailure};
use nfteig_core::soliton::sech_pulse;
use nfteig_core::stats::variance;
use nfteig_core::{Complex64, Signal};
use serde::Serialize;

use super::{point_noise, reference_eigenvalues};
use crate::config::{E7Params, E7Thresholds, ExperimentConfig, PulseSpec};
use crate::error::HarnessError;
use crate::output::{num, Artifacts, CaseError};

const SWEEP_STREAM: u64 = 1;
const TWO_SOLITON_STREAM: u64 = 500;

/// `g` under the full noise, under `n₁` alone and under `n₂` alone.
pub type Triple = [f64; 3];

#[derive(Debug, Clone)]
pub struct DecompositionCase {
    pub label: String,
    pub amplitude: Option<f64>,
    pub reference: Vec<Complex64>,
    pub ensemble: Ensemble<Triple>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Variances {
    pub full: f64,
    pub n1: f64,
    pub n2: f64,
}

impl DecompositionCase {
    pub fn variances(&self) -> Variances {
        let col = |k: usize| variance(&self.ensemble.values().map(|v| v[k]).collect::<Vec<_>>());
        Variances {
            full: col(0),
            n1: col(1),
            n2: col(2),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    /// Strict interior local maxima of the `n₂` variance.
    pub n2_local_maxima: Vec<f64>,
    pub n2_local_minima: Vec<f64>,
    /// Per birth threshold `t`: the amplitude maximizing the `n₂` variance
    /// over `[t − ½, t + ½]`.
    pub n2_peaks: Vec<(f64, f64)>,
    /// Per regime between thresholds: `(mean, (max − min)/mean)` of the `n₁`
    /// variance, away from the thresholds.
    pub n1_regimes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct E7Outcome {
    pub fundamental: Option<DecompositionCase>,
    pub sweep: Vec<DecompositionCase>,
    pub two_soliton: Option<DecompositionCase>,
    pub errors: Vec<CaseError>,
}

impl E7Outcome {
    pub fn sweep_variances(&self) -> Vec<(f64, Variances)> {
        self.sweep
            .iter()
            .filter_map(|c| Some((c.amplitude?, c.variances())))
            .collect()
    }

    pub fn sweep_report(&self, th: &E7Thresholds) -> SweepReport {
        let s = self.sweep_variances();
        let mut maxima = Vec::new();
        let mut minima = Vec::new();
        for w in s.windows(3) {
            let (a, b, c) = (w[0].1.n2, w[1].1.n2, w[2].1.n2);
            if b > a && b > c {
                maxima.push(w[1].0);
            }
            if b < a && b < c {
                minima.push(w[1].0);
            }
        }
        let n2_peaks = th
            .birth_thresholds
            .iter()
            .filter_map(|&t| {
                s.iter()
                    .filter(|(amp, _)| (amp - t).abs() <= 0.5 + 1e-9)
                    .max_by(|x, y| x.1.n2.total_cmp(&y.1.n2))
                    .map(|(amp, _)| (t, *amp))
            })
            .collect();
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend(&th.birth_thresholds);
        edges.push(f64::INFINITY);
        let n1_regimes = edges
            .windows(2)
            .filter_map(|e| {
                let v: Vec<f64> = s
                    .iter()
                    .filter(|(amp, _)| *amp > e[0] + th.threshold_guard && *amp < e[1] - th.threshold_guard)
                    .map(|(_, v)| v.n1)
                    .collect();
                if v.is_empty() {
                    return None;
                }
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let (lo, hi) = v
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
                Some((mean, (hi - lo) / mean))
            })
            .collect();
        SweepReport {
            n2_local_maxima: maxima,
            n2_local_minima: minima,
            n2_peaks,
            n1_regimes,
        }
    }

    pub fn artifacts(&self, th: &E7Thresholds) -> Artifacts {
        let mut a = Artifacts::with_tables(
            &["case", "amplitude", "run", "seed", "g_full", "g_n1", "g_n2"],
            &[
                "case",
                "amplitude",
                "eigenvalues",
                "n",
                "var_full",
                "var_n1",
                "var_n2",
                "n1_ratio",
                "n2_ratio",
            ],
        );
        a.errors.extend(self.errors.iter().cloned());
        let cases = self.fundamental.iter().chain(&self.sweep).chain(&self.two_soliton);
        for c in cases {
            a.record(&c.label, &c.ensemble);
            for r in &c.ensemble.records {
                a.runs.push(vec![
                    c.label.clone(),
                    c.amplitude.map(num).unwrap_or_default(),
                    r.run.to_string(),
                    r.seed.to_string(),
                    num(r.value[0]),
                    num(r.value[1]),
                    num(r.value[2]),
                ]);
            }
            let v = c.variances();
            a.summary.push(vec![
                c.label.clone(),
                c.amplitude.map(num).unwrap_or_default(),
                c.reference.len().to_string(),
                c.ensemble.records.len().to_string(),
                num(v.full),
                num(v.n1),
                num(v.n2),
                num(v.n1 / v.full),
                num(v.n2 / v.full),
            ]);
        }
        for (amp, v) in self.sweep_variances() {
            a.plot_point("var_n1", amp, v.n1);
            a.plot_point("var_n2", amp, v.n2);
            a.plot_point("var_full", amp, v.full);
        }

        match &self.fundamental {
            Some(c) => {
                let v = c.variances();
                a.summary_value("fundamental", v);
                a.check(
                    "scaling noise dominates the fundamental soliton",
                    v.n1 >= th.n1_min_ratio * v.full,
                    format!("var n1/full = {:.3} (required >= {})", v.n1 / v.full, th.n1_min_ratio),
                );
                a.check(
                    "residual noise is minor for the fundamental soliton",
                    v.n2 <= th.n2_max_ratio * v.full,
                    format!("var n2/full = {:.3} (required <= {})", v.n2 / v.full, th.n2_max_ratio),
                );
            }
            None => a.check("fundamental soliton computed", false, "see errors"),
        }
        if let Some(c) = &self.two_soliton {
            a.summary_value("two_soliton", c.variances());
        }

        let r = self.sweep_report(th);
        for &t in &th.birth_thresholds {
            let peak = r.n2_peaks.iter().find(|p| p.0 == t).map(|p| p.1);
            a.check(
                &format!("n2 variance peaks just above A = {t}"),
                peak.is_some_and(|p| {
                    p >= t - 1e-9
                        && p <= t + th.peak_window + 1e-9
                        && r.n2_local_maxima.iter().any(|m| (m - p).abs() < 1e-9)
                }),
                format!(
                    "peak at {peak:?}, local maxima {:?}, window [{t}, {}]",
                    r.n2_local_maxima,
                    t + th.peak_window
                ),
            );
        }
        a.check(
            "n1 variance constant between thresholds",
            !r.n1_regimes.is_empty() && r.n1_regimes.iter().all(|x| x.1 <= th.n1_regime_spread),
            format!(
                "(mean, spread) per regime {:?} (allowed spread {})",
                r.n1_regimes, th.n1_regime_spread
            ),
        );
        a.check(
            "n1 variance steps up at each threshold",
            r.n1_regimes.len() == th.birth_thresholds.len() + 1 && r.n1_regimes.windows(2).all(|w| w[1].0 > w[0].0),
            format!("{:?}", r.n1_regimes.iter().map(|x| x.0).collect::<Vec<_>>()),
        );
        a.summary_value("sweep", r);
        a
    }
}

/// `Σ Im λ` over whatever the search finds.
fn sum_imag(q: &Signal, search: &SearchConfig) -> Result<f64, RunFailure> {
    let eigs = find_discrete_eigenvalues(q, search)?.spectrum.eigenvalues;
    Ok(GSelector::SumImag.apply(&eigs)[0])
}

fn decomposition_case(
    cfg: &ExperimentConfig,
    params: &E7Params,
    label: String,
    amplitude: Option<f64>,
    q0: &Signal,
    runs: usize,
    stream: u64,
    tracked: bool,
) -> Result<DecompositionCase, HarnessError> {
    let grid = *q0.grid();
    let ens_cfg = cfg.ensemble_config(runs);
    let reference = find_discrete_eigenvalues(q0, &cfg.search)?.spectrum.eigenvalues;
    if tracked && reference.is_empty() {
        return Err(HarnessError::config(
            "params",
            format!("{label}: no discrete eigenvalues"),
        ));
    }
    let untracked = SearchConfig {
        extra_seeds: reference.clone(),
        compute_amplitudes: false,
        ..cfg.search.clone()
    };
    let ensemble = run_ensemble(&grid, &ens_cfg, stream, |p, rng, _| {
        let n = point_noise(p, &params.noise, &grid, rng)?;
        let d = decompose_noise(q0, &n)?;
        let mut out = [0.0; 3];
        for (slot, part) in out.iter_mut().zip([&n, &d.scaling, &d.residual]) {
            let q = q0.add(part)?;
            *slot = if tracked {
                GSelector::SumImag.apply(&tracked_spectrum(&q, &reference, &cfg.search, ens_cfg.ambiguity_ratio)?)[0]
            } else {
                sum_imag(&q, &untracked)?
            };
        }
        Ok(out)
    })?;
    Ok(DecompositionCase {
        label,
        amplitude,
        reference,
        ensemble,
    })
}

pub fn sweep_amplitudes(sweep: [f64; 3]) -> Vec<f64> {
    let [start, stop, step] = sweep;
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

pub fn run(cfg: &ExperimentConfig, params: &E7Params) -> Result<E7Outcome, HarnessError> {
    let grid = cfg.grid.build()?;
    let mut errors = Vec::new();
    let mut keep = |label: &str, r: Result<DecompositionCase, HarnessError>| match r {
        Ok(c) => Some(c),
        Err(e) => {
            errors.push(CaseError::new(label, &e));
            None
        }
    };

    let a = params.fundamental_amplitude;
    let label = format!("fundamental A={a}");
    let fundamental = sech_pulse(a, &grid)
        .map_err(HarnessError::from)
        .and_then(|q| decomposition_case(cfg, params, label.clone(), Some(a), &q, cfg.runs, 0, true));
    let fundamental = keep(&label, fundamental);

    let mut sweep = Vec::new();
    // Every amplitude sees the same noise draws, so differences along the
    // sweep are not masked by sampling noise.
    for amp in sweep_amplitudes(params.sweep) {
        let label = format!("sweep A={amp}");
        let case = sech_pulse(amp, &grid).map_err(HarnessError::from).and_then(|q| {
            decomposition_case(
                cfg,
                params,
                label.clone(),
                Some(amp),
                &q,
                params.sweep_runs,
                SWEEP_STREAM,
                false,
            )
        });
        sweep.extend(keep(&label, case));
    }

    let two_soliton = if params.two_soliton.is_empty() {
        None
    } else {
        let label = format!("two-soliton {:?}", params.two_soliton);
        let case = PulseSpec::centered(&params.two_soliton)
            .build(&grid, "params.two_soliton")
            .and_then(|q| {
                reference_eigenvalues(&q, &cfg.search)?;
                decomposition_case(cfg, params, label.clone(), None, &q, cfg.runs, TWO_SOLITON_STREAM, true)
            });
        keep(&label, case)
    };

    Ok(E7Outcome {
        fundamental,
        sweep,
        two_soliton,
        errors,
    })
}
