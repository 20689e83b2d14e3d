//! Transceiver noise taxonomy: each of the six terms of
//! `[A₀ + A(t)]·q·exp(2πj[B₀ + B(t)]) + C₀ + C(t)` applied alone.

use nfteig_core::nlse::Propagator;
use nfteig_core::noise::{
    apply_transceiver_noise_with, run_ensemble, tracked_spectrum, Ensemble, NoiseTerm, RunFailure, TransceiverNoiseSpec,
};
use nfteig_core::rng::{rng_from_seed, RunRng};
use nfteig_core::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::reference_eigenvalues;
use crate::config::{E8Params, ExperimentConfig, PulseSpec};
use crate::error::HarnessError;
use crate::output::{num, Artifacts, CaseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Term {
    A0,
    At,
    B0,
    Bt,
    C0,
    Ct,
}

impl Term {
    pub const ALL: [Term; 6] = [Term::A0, Term::At, Term::B0, Term::Bt, Term::C0, Term::Ct];

    pub fn label(self) -> &'static str {
        match self {
            Term::A0 => "A0",
            Term::At => "A(t)",
            Term::B0 => "B0",
            Term::Bt => "B(t)",
            Term::C0 => "C0",
            Term::Ct => "C(t)",
        }
    }

    /// One run's noise spec. Constant terms are drawn per run with
    /// standard deviation `sigma`.
    fn spec(self, sigma: f64, bandwidth: f64, rng: &mut RunRng) -> TransceiverNoiseSpec {
        let term = NoiseTerm { sigma, bandwidth };
        let mut cn = || {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (sigma / std::f64::consts::SQRT_2)
        };
        let mut s = TransceiverNoiseSpec::default();
        match self {
            Term::A0 => s.a0 += cn(),
            Term::At => s.a_t = term,
            Term::B0 => s.b0 = sigma * rng.sample::<f64, _>(StandardNormal),
            Term::Bt => s.b_t = term,
            Term::C0 => s.c0 = cn(),
            Term::Ct => s.c_t = term,
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TermCase {
    pub term: Term,
    pub ensemble: Ensemble<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct PairCases {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Tracked spectrum of the untouched pulse.
    pub baseline: Vec<Complex64>,
    pub cases: Vec<TermCase>,
}

impl PairCases {
    /// `mean_k |E[λ_k − λ_k⁰]|`.
    pub fn mean_shift(&self, term: Term) -> Option<f64> {
        let c = self.cases.iter().find(|c| c.term == term)?;
        let n = c.ensemble.records.len();
        if n == 0 {
            return None;
        }
        let shift: f64 = self
            .baseline
            .iter()
            .enumerate()
            .map(|(k, b)| (c.ensemble.values().map(|v| v[k] - b).sum::<Complex64>() / n as f64).norm())
            .sum();
        Some(shift / self.baseline.len() as f64)
    }

    /// Runs whose eigenvalues differ in any bit from the baseline, and the
    /// largest deviation.
    pub fn deviation(&self, term: Term) -> Option<(usize, f64)> {
        let c = self.cases.iter().find(|c| c.term == term)?;
        let mut changed = 0;
        let mut worst: f64 = 0.0;
        for v in c.ensemble.values() {
            let (differs, d) = compare_bits(v, &self.baseline);
            changed += differs;
            worst = worst.max(d);
        }
        Some((changed, worst))
    }
}

/// `(1 if any bit differs else 0, largest |a − b|)`.
fn compare_bits(v: &[Complex64], baseline: &[Complex64]) -> (usize, f64) {
    let differs = v
        .iter()
        .zip(baseline)
        .any(|(a, b)| a.re.to_bits() != b.re.to_bits() || a.im.to_bits() != b.im.to_bits());
    let worst = v.iter().zip(baseline).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    (usize::from(differs), worst)
}

#[derive(Debug, Clone)]
pub struct E8Outcome {
    pub sigma: f64,
    pub pairs: Vec<PairCases>,
    /// Identity transceiver through the same code path.
    pub control: Vec<(usize, f64)>,
    pub errors: Vec<CaseError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TermSummary {
    pub term: Term,
    /// Mean shift averaged over the eigenvalue pairs.
    pub mean_shift: Option<f64>,
    pub changed_runs: usize,
    pub max_deviation: f64,
}

impl E8Outcome {
    pub fn term_summaries(&self) -> Vec<TermSummary> {
        Term::ALL
            .iter()
            .map(|&term| {
                let shifts: Vec<f64> = self.pairs.iter().filter_map(|p| p.mean_shift(term)).collect();
                let devs: Vec<(usize, f64)> = self.pairs.iter().filter_map(|p| p.deviation(term)).collect();
                TermSummary {
                    term,
                    mean_shift: (shifts.len() == self.pairs.len() && !shifts.is_empty())
                        .then(|| shifts.iter().sum::<f64>() / shifts.len() as f64),
                    changed_runs: devs.iter().map(|d| d.0).sum(),
                    max_deviation: devs.iter().map(|d| d.1).fold(0.0, f64::max),
                }
            })
            .collect()
    }

    pub fn artifacts(&self) -> Artifacts {
        let mut a = Artifacts::with_tables(
            &[
                "lambda1",
                "lambda2",
                "term",
                "run",
                "seed",
                "re_lambda1",
                "im_lambda1",
                "re_lambda2",
                "im_lambda2",
            ],
            &[
                "lambda1",
                "lambda2",
                "term",
                "n",
                "mean_shift",
                "changed_runs",
                "max_deviation",
            ],
        );
        a.errors.extend(self.errors.iter().cloned());
        for p in &self.pairs {
            for c in &p.cases {
                let case = format!("lambda1={} lambda2={} {}", p.lambda1, p.lambda2, c.term.label());
                a.record(&case, &c.ensemble);
                for r in &c.ensemble.records {
                    a.runs.push(vec![
                        num(p.lambda1),
                        num(p.lambda2),
                        c.term.label().to_string(),
                        r.run.to_string(),
                        r.seed.to_string(),
                        num(r.value[0].re),
                        num(r.value[0].im),
                        num(r.value[1].re),
                        num(r.value[1].im),
                    ]);
                }
                let (changed, worst) = p.deviation(c.term).unwrap_or((0, 0.0));
                a.summary.push(vec![
                    num(p.lambda1),
                    num(p.lambda2),
                    c.term.label().to_string(),
                    c.ensemble.records.len().to_string(),
                    p.mean_shift(c.term).map(num).unwrap_or_default(),
                    changed.to_string(),
                    num(worst),
                ]);
                for v in c.ensemble.values().take(500) {
                    for (k, l) in v.iter().enumerate() {
                        a.plot_point(&format!("{} {} lambda{}", c.term.label(), p.lambda2, k + 1), l.re, l.im);
                    }
                }
            }
        }
        let terms = self.term_summaries();
        let get = |t: Term| terms.iter().find(|s| s.term == t).expect("all terms");
        let b0 = get(Term::B0);
        a.check(
            "identity transceiver leaves eigenvalues bit-identical",
            !self.control.is_empty() && self.control.iter().all(|c| c.0 == 0),
            format!("{:?}", self.control),
        );
        a.check(
            "constant phase leaves eigenvalues bit-identical",
            b0.changed_runs == 0 && !self.pairs.is_empty(),
            format!(
                "{} runs differ from the baseline, largest deviation {:e}",
                b0.changed_runs, b0.max_deviation
            ),
        );
        let bt = get(Term::Bt).mean_shift;
        let others: Vec<(Term, Option<f64>)> = terms
            .iter()
            .filter(|s| s.term != Term::Bt)
            .map(|s| (s.term, s.mean_shift))
            .collect();
        a.check(
            "time-varying phase gives the largest mean shift",
            bt.is_some_and(|b| others.iter().all(|o| o.1.is_some_and(|x| x < b))),
            format!("B(t) {bt:?}, others {others:?}"),
        );
        a.summary_value("terms", &terms);
        a
    }
}

pub fn run(cfg: &ExperimentConfig, params: &E8Params) -> Result<E8Outcome, HarnessError> {
    let grid = cfg.grid.build()?;
    let ens_cfg = cfg.ensemble_config(cfg.runs);
    let mut pairs = Vec::new();
    let mut control = Vec::new();
    let mut errors = Vec::new();
    for (i, (&l1, &l2)) in params.lambda1.iter().zip(&params.lambda2).enumerate() {
        let pair = format!("lambda1={l1} lambda2={l2}");
        let setup = PulseSpec::centered(&[l1, l2]).build(&grid, "params").and_then(|q0| {
            let reference = reference_eigenvalues(&q0, &cfg.search)?;
            let baseline = tracked_spectrum(&q0, &reference, &cfg.search, ens_cfg.ambiguity_ratio)
                .map_err(|_| HarnessError::config("params", format!("{pair}: noiseless spectrum does not track")))?;
            Ok((q0, baseline))
        });
        let (q0, baseline) = match setup {
            Ok(x) => x,
            Err(e) => {
                errors.push(CaseError::new(&pair, &e));
                continue;
            }
        };
        let mut p = Propagator::new(grid);
        let identity =
            apply_transceiver_noise_with(&mut p, &q0, &TransceiverNoiseSpec::default(), &mut rng_from_seed(0))
                .map_err(RunFailure::from)
                .and_then(|q| tracked_spectrum(&q, &baseline, &cfg.search, ens_cfg.ambiguity_ratio));
        match identity {
            Ok(v) => control.push(compare_bits(&v, &baseline)),
            Err(_) => errors.push(CaseError::new(
                &format!("{pair} identity"),
                &HarnessError::config("params", "identity control does not track"),
            )),
        }
        let mut cases = Vec::new();
        for (k, &term) in Term::ALL.iter().enumerate() {
            let stream = (i * Term::ALL.len() + k) as u64;
            let ens = run_ensemble(&grid, &ens_cfg, stream, |p, rng, _| {
                let spec = term.spec(params.sigma, params.bandwidth, rng);
                let q = apply_transceiver_noise_with(p, &q0, &spec, rng)?;
                tracked_spectrum(&q, &baseline, &cfg.search, ens_cfg.ambiguity_ratio)
            });
            match ens {
                Ok(ensemble) => cases.push(TermCase { term, ensemble }),
                Err(e) => errors.push(CaseError::new(&format!("{pair} {}", term.label()), &e.into())),
            }
        }
        pairs.push(PairCases {
            lambda1: l1,
            lambda2: l2,
            baseline,
            cases,
        });
    }
    Ok(E8Outcome {
        sigma: params.sigma,
        pairs,
        control,
        errors,
    })
}
