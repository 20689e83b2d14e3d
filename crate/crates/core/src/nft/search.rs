use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::scatter::{derivative_step, ScatteringProblem, DERIVATIVE_FLOOR};
use super::Scheme;
use crate::error::{Error, Result};
use crate::grid::Signal;

/// How lattice points become Newton seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    /// Every lattice point seeds a Newton run.
    AllLattice,
    /// Only lattice points where `|a|` is a local minimum over the 8-neighbourhood.
    #[default]
    LocalMinima,
}

/// Rectangular seed lattice plus Newton parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub scheme: Scheme,
    pub re_min: f64,
    pub re_max: f64,
    /// Lattice floor; roots may still converge below it.
    pub im_min: f64,
    pub im_max: f64,
    pub spacing: f64,
    pub seed_mode: SeedMode,
    pub max_iter: usize,
    /// Convergence threshold on `|a(λ)|`.
    pub tol_root: f64,
    pub dedup_radius: f64,
    /// Roots with `Im λ` below this are flagged low-confidence.
    pub low_confidence_imag: f64,
    /// Extra seeds tried before the lattice (e.g. an unperturbed spectrum).
    pub extra_seeds: Vec<Complex64>,
    pub compute_amplitudes: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::ForwardDifference,
            re_min: -2.0,
            re_max: 2.0,
            im_min: 0.05,
            im_max: 3.0,
            spacing: 0.1,
            seed_mode: SeedMode::LocalMinima,
            max_iter: 50,
            tol_root: 1e-9,
            dedup_radius: 1e-4,
            low_confidence_imag: 0.15,
            extra_seeds: Vec::new(),
            compute_amplitudes: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max, self.spacing]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("search box must be finite"));
        }
        if self.re_max < self.re_min || self.im_max < self.im_min {
            return Err(Error::invalid("search box is empty"));
        }
        if self.im_min <= 0.0 {
            return Err(Error::invalid("search box must stay in the open upper half plane"));
        }
        if self.spacing <= 0.0 {
            return Err(Error::invalid("lattice spacing must be positive"));
        }
        if self.max_iter == 0 || self.tol_root <= 0.0 || self.dedup_radius < 0.0 {
            return Err(Error::invalid("Newton parameters must be positive"));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| lo + k as f64 * step).collect()
    }
}

/// Discrete eigenvalues sorted by ascending `Im λ`, paired with `Q^(d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiscreteSpectrum {
    pub eigenvalues: Vec<Complex64>,
    /// `NaN` where the amplitude could not be formed (see the search report).
    pub amplitudes: Vec<Complex64>,
    pub low_confidence: Vec<bool>,
}

impl DiscreteSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn imag_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.im).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub seeds: usize,
    pub converged: usize,
    pub diverged: usize,
    pub duplicates: usize,
    /// Roots whose amplitude failed (degenerate derivative or range error).
    pub amplitude_failures: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub spectrum: DiscreteSpectrum,
    pub report: ConvergenceReport,
}

impl SearchOutcome {
    /// True when at least one seed converged or no seed was needed.
    pub fn all_seeds_diverged(&self) -> bool {
        self.report.seeds > 0 && self.report.converged == 0
    }
}

/// Newton escape radius; iterates outside are treated as diverged.
const ESCAPE_RADIUS: f64 = 50.0;
const MAX_NEWTON_STEP: f64 = 1.0;

/// Newton iteration on `a(λ) / Π (λ − r)/(λ − r*)` over the known roots
/// `r`, so that iterates are pushed away from zeros already found.
fn newton(problem: &ScatteringProblem, seed: Complex64, known: &[Complex64], cfg: &SearchConfig) -> Option<Complex64> {
    let mut lambda = seed;
    for _ in 0..cfg.max_iter {
        let a = problem.a(lambda).ok()?;
        if a.norm() < cfg.tol_root {
            return Some(lambda);
        }
        let da = problem.a_derivative_with_step(lambda, derivative_step(lambda)).ok()?;
        if !(da.norm() >= DERIVATIVE_FLOOR) {
            return None;
        }
        let mut step = if known.is_empty() {
            a / da
        } else {
            let pull: Complex64 = known
                .iter()
                .map(|r| 1.0 / (lambda - r) - 1.0 / (lambda - r.conj()))
                .sum();
            1.0 / (da / a - pull)
        };
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        if step.norm() > MAX_NEWTON_STEP {
            step *= MAX_NEWTON_STEP / step.norm();
        }
        lambda -= step;
        if !(lambda.im > 0.0) || lambda.norm() > ESCAPE_RADIUS {
            return None;
        }
    }
    let a = problem.a(lambda).ok()?;
    (a.norm() < cfg.tol_root).then_some(lambda)
}

/// Rounds of deflated reseeding after the first pass.
const MAX_DEFLATION_ROUNDS: usize = 4;

struct Lattice {
    points: Vec<Complex64>,
    nr: usize,
    ni: usize,
    mags: Vec<f64>,
}

impl Lattice {
    fn new(problem: &ScatteringProblem, cfg: &SearchConfig, evaluate: bool) -> Self {
        let re = SearchConfig::axis(cfg.re_min, cfg.re_max, cfg.spacing);
        let im = SearchConfig::axis(cfg.im_min, cfg.im_max, cfg.spacing);
        let points: Vec<Complex64> = im
            .iter()
            .flat_map(|&y| re.iter().map(move |&x| Complex64::new(x, y)))
            .collect();
        let mags = if evaluate {
            points
                .iter()
                .map(|&l| problem.a(l).map(|a| a.norm()).unwrap_or(f64::INFINITY))
                .collect()
        } else {
            Vec::new()
        };
        Self {
            points,
            nr: re.len(),
            ni: im.len(),
            mags,
        }
    }

    /// Indices of 8-neighbour local minima of `|a|` divided by the zero
    /// factors of `known`.
    fn minima(&self, known: &[Complex64]) -> Vec<usize> {
        let vals: Vec<f64> = self
            .points
            .iter()
            .zip(&self.mags)
            .map(|(l, m)| {
                known
                    .iter()
                    .fold(*m, |acc, r| acc * (l - r.conj()).norm() / (l - r).norm())
            })
            .collect();
        let (nr, ni) = (self.nr as i64, self.ni as i64);
        let mut out = Vec::new();
        for k in 0..ni {
            for i in 0..nr {
                let m = vals[(k * nr + i) as usize];
                if !m.is_finite() {
                    continue;
                }
                let is_min = (-1i64..=1)
                    .flat_map(|dk| (-1i64..=1).map(move |di| (di, dk)))
                    .filter(|&(di, dk)| di != 0 || dk != 0)
                    .map(|(di, dk)| (i + di, k + dk))
                    .filter(|&(ii, kk)| ii >= 0 && kk >= 0 && ii < nr && kk < ni)
                    .all(|(ii, kk)| !(vals[(kk * nr + ii) as usize] < m));
                if is_min {
                    out.push((k * nr + i) as usize);
                }
            }
        }
        out
    }
}

/// All zeros of `a(λ)` reachable from the seed lattice, Newton-polished,
/// deduplicated and sorted by ascending `Im λ`.
///
/// Converged roots are never dropped: roots whose amplitude cannot be
/// formed keep a `NaN` amplitude and are listed in the report.
pub fn find_discrete_eigenvalues(signal: &Signal, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let problem = ScatteringProblem::new(signal, cfg.scheme);
    let lattice = Lattice::new(&problem, cfg, cfg.seed_mode == SeedMode::LocalMinima);
    let mut report = ConvergenceReport::default();
    let mut roots: Vec<Complex64> = Vec::new();

    let try_seed =
        |seed: Complex64, known: &[Complex64], roots: &mut Vec<Complex64>, report: &mut ConvergenceReport| {
            report.seeds += 1;
            if cfg.seed_mode == SeedMode::LocalMinima && roots.iter().any(|r| (r - seed).norm() < cfg.dedup_radius) {
                report.duplicates += 1;
                return;
            }
            match newton(&problem, seed, known, cfg) {
                Some(root) => {
                    report.converged += 1;
                    if roots.iter().any(|r| (r - root).norm() < cfg.dedup_radius) {
                        report.duplicates += 1;
                    } else {
                        roots.push(root);
                    }
                }
                None => report.diverged += 1,
            }
        };

    for &seed in &cfg.extra_seeds {
        try_seed(seed, &[], &mut roots, &mut report);
    }
    match cfg.seed_mode {
        SeedMode::AllLattice => {
            for &seed in &lattice.points {
                try_seed(seed, &[], &mut roots, &mut report);
            }
        }
        SeedMode::LocalMinima => {
            let mut used = vec![false; lattice.points.len()];
            for idx in lattice.minima(&[]) {
                used[idx] = true;
                try_seed(lattice.points[idx], &[], &mut roots, &mut report);
            }
            // Zeros sharing a lattice basin show up as minima once the
            // zeros already found are divided out.
            for _ in 0..MAX_DEFLATION_ROUNDS {
                if roots.is_empty() {
                    break;
                }
                let fresh: Vec<usize> = lattice.minima(&roots).into_iter().filter(|&i| !used[i]).collect();
                if fresh.is_empty() {
                    break;
                }
                let before = roots.len();
                let known = roots.clone();
                for idx in fresh {
                    used[idx] = true;
                    try_seed(lattice.points[idx], &known, &mut roots, &mut report);
                }
                if roots.len() == before {
                    break;
                }
            }
        }
    }
    roots.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));

    let mut spectrum = DiscreteSpectrum::default();
    for &root in &roots {
        let amplitude = if cfg.compute_amplitudes {
            let q = problem
                .a_derivative(root)
                .and_then(|da| Ok(problem.b_at_eigenvalue(root)? / da));
            match q {
                Ok(q) => q,
                Err(_) => {
                    report.amplitude_failures.push(root);
                    Complex64::new(f64::NAN, f64::NAN)
                }
            }
        } else {
            Complex64::new(f64::NAN, f64::NAN)
        };
        spectrum.eigenvalues.push(root);
        spectrum.amplitudes.push(amplitude);
        spectrum.low_confidence.push(root.im < cfg.low_confidence_imag);
    }
    Ok(SearchOutcome { spectrum, report })
}
