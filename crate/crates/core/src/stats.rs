//! Second-moment statistics of eigenvalue ensembles and nearest-point
//! decoding of eigenvalue constellations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue gap below which a covariance is treated as isotropic.
pub const ISOTROPY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble2D {
    points: Vec<[f64; 2]>,
}

impl Ensemble2D {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateEnsemble(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("ensemble contains non-finite values"));
        }
        Ok(Self { points })
    }

    pub fn from_columns(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "column lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        Self::new(x.iter().zip(y).map(|(a, b)| [*a, *b]).collect())
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[i]).collect()
    }

    pub fn mean(&self) -> [f64; 2] {
        let n = self.points.len() as f64;
        let (sx, sy) = self.points.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / n, sy / n]
    }

    /// Unbiased (n − 1) sample covariance.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let [mx, my] = self.mean();
        let mut c = [[0.0; 2]; 2];
        for p in &self.points {
            let (dx, dy) = (p[0] - mx, p[1] - my);
            c[0][0] += dx * dx;
            c[0][1] += dx * dy;
            c[1][1] += dy * dy;
        }
        let d = (self.points.len() - 1) as f64;
        c[0][0] /= d;
        c[0][1] /= d;
        c[1][1] /= d;
        c[1][0] = c[0][1];
        c
    }

    fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Ensemble2D {
        let n = self.points.len();
        Ensemble2D {
            points: (0..n).map(|_| self.points[rng.random_range(0..n)]).collect(),
        }
    }
}

/// `Σ(xᵢ−x̄)(yᵢ−ȳ) / ((n−1)·sₓ·s_y)`.
pub fn sample_correlation(e: &Ensemble2D) -> Result<f64> {
    let c = e.covariance();
    if c[0][0] <= 0.0 || c[1][1] <= 0.0 {
        return Err(Error::DegenerateEnsemble("a coordinate has zero variance".into()));
    }
    Ok((c[0][1] / (c[0][0] * c[1][1]).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSummary {
    pub n: usize,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    /// Orientation of the dominant eigenvector, in (−π/2, π/2]. `None` when
    /// the covariance is isotropic.
    pub principal_angle: Option<f64>,
    /// `None` when either variance is zero.
    pub correlation: Option<f64>,
    /// Covariance eigenvalues, largest first.
    pub eigenvalues: [f64; 2],
}

pub fn covariance_summary(e: &Ensemble2D) -> Result<CovarianceSummary> {
    if e.len() < 3 {
        return Err(Error::DegenerateEnsemble(format!(
            "need at least 3 points, got {}",
            e.len()
        )));
    }
    let cov = e.covariance();
    let (c11, c12, c22) = (cov[0][0], cov[0][1], cov[1][1]);
    let half_trace = (c11 + c22) / 2.0;
    let half_gap = (((c11 - c22) / 2.0).powi(2) + c12 * c12).sqrt();
    let scale = c11.abs() + c22.abs();
    let principal_angle = if scale == 0.0 || 2.0 * half_gap <= ISOTROPY_TOLERANCE * scale {
        None
    } else {
        Some(fold_angle(0.5 * (2.0 * c12).atan2(c11 - c22)))
    };
    Ok(CovarianceSummary {
        n: e.len(),
        mean: e.mean(),
        cov,
        principal_angle,
        correlation: sample_correlation(e).ok(),
        eigenvalues: [half_trace + half_gap, half_trace - half_gap],
    })
}

/// Folds an axis orientation into (−π/2, π/2].
pub fn fold_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut t = theta.rem_euclid(PI);
    if t > PI / 2.0 {
        t -= PI;
    }
    t
}

/// Smallest signed difference between two axis orientations, in (−π/2, π/2].
pub fn angle_difference(a: f64, b: f64) -> f64 {
    fold_angle(a - b)
}

/// Percentile bootstrap interval of `stat` at confidence `level`.
pub fn bootstrap_interval<R, F>(
    e: &Ensemble2D,
    resamples: usize,
    level: f64,
    rng: &mut R,
    stat: F,
) -> Result<(f64, f64)>
where
    R: Rng + ?Sized,
    F: Fn(&Ensemble2D) -> Option<f64>,
{
    if resamples < 10 {
        return Err(Error::invalid("bootstrap needs at least 10 resamples"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let mut values: Vec<f64> = (0..resamples).filter_map(|_| stat(&e.resample(rng))).collect();
    if values.len() < resamples / 2 {
        return Err(Error::DegenerateEnsemble(
            "statistic undefined on most resamples".into(),
        ));
    }
    values.sort_by(f64::total_cmp);
    Ok((
        quantile(&values, (1.0 - level) / 2.0),
        quantile(&values, (1.0 + level) / 2.0),
    ))
}

/// Percentile bootstrap interval of `diff(stat(a), stat(b))`, resampling
/// the two ensembles independently.
pub fn bootstrap_difference<R, F, D>(
    a: &Ensemble2D,
    b: &Ensemble2D,
    resamples: usize,
    level: f64,
    rng: &mut R,
    stat: F,
    diff: D,
) -> Result<(f64, f64)>
where
    R: Rng + ?Sized,
    F: Fn(&Ensemble2D) -> Option<f64>,
    D: Fn(f64, f64) -> f64,
{
    if resamples < 10 {
        return Err(Error::invalid("bootstrap needs at least 10 resamples"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let mut values: Vec<f64> = (0..resamples)
        .filter_map(|_| {
            let x = stat(&a.resample(rng));
            let y = stat(&b.resample(rng));
            Some(diff(x?, y?))
        })
        .collect();
    if values.len() < resamples / 2 {
        return Err(Error::DegenerateEnsemble(
            "statistic undefined on most resamples".into(),
        ));
    }
    values.sort_by(f64::total_cmp);
    Ok((
        quantile(&values, (1.0 - level) / 2.0),
        quantile(&values, (1.0 + level) / 2.0),
    ))
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean vector of equal-length rows.
pub fn mean_vector(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for r in rows {
        m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= rows.len() as f64);
    m
}

/// Unbiased sample covariance matrix of equal-length rows.
pub fn covariance_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = mean_vector(rows);
    let d = m.len();
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (r[i] - m[i]) * (r[j] - m[j]);
            }
        }
    }
    let denom = (rows.len() - 1) as f64;
    c.iter_mut().flatten().for_each(|v| *v /= denom);
    c
}

/// Every coordinate pair `(i, j)`, `i < j`, as a 2-D ensemble.
pub fn pairwise_projections(rows: &[Vec<f64>]) -> Result<Vec<((usize, usize), Ensemble2D)>> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("rows have different lengths"));
    }
    let mut out = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            out.push(((i, j), Ensemble2D::new(rows.iter().map(|r| [r[i], r[j]]).collect())?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionMetric {
    Euclidean,
    /// Mahalanobis distance under the given noise covariance.
    Mahalanobis([[f64; 2]; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub assignments: Vec<usize>,
    pub error_rate: f64,
    pub bits_per_symbol: f64,
}

/// Assigns each received point to the nearest constellation point under
/// `metric` and scores against `truth` (indices into `constellation`).
pub fn ml_classify(
    received: &[[f64; 2]],
    truth: &[usize],
    constellation: &[[f64; 2]],
    metric: DecisionMetric,
) -> Result<Classification> {
    if constellation.is_empty() {
        return Err(Error::invalid("constellation is empty"));
    }
    if received.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} received points but {} labels",
            received.len(),
            truth.len()
        )));
    }
    if let Some(t) = truth.iter().find(|&&t| t >= constellation.len()) {
        return Err(Error::invalid(format!("label {t} is outside the constellation")));
    }
    let weight = match metric {
        DecisionMetric::Euclidean => [[1.0, 0.0], [0.0, 1.0]],
        DecisionMetric::Mahalanobis(c) => invert_spd(c)?,
    };
    let dist = |a: [f64; 2], b: [f64; 2]| {
        let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
        weight[0][0] * dx * dx + 2.0 * weight[0][1] * dx * dy + weight[1][1] * dy * dy
    };
    let assignments: Vec<usize> = received
        .iter()
        .map(|&r| {
            let mut best = (f64::INFINITY, 0);
            for (i, &c) in constellation.iter().enumerate() {
                let d = dist(r, c);
                if d < best.0 {
                    best = (d, i);
                }
            }
            best.1
        })
        .collect();
    let errors = assignments.iter().zip(truth).filter(|(a, t)| a != t).count();
    Ok(Classification {
        error_rate: if truth.is_empty() {
            0.0
        } else {
            errors as f64 / truth.len() as f64
        },
        bits_per_symbol: (constellation.len() as f64).log2(),
        assignments,
    })
}

fn invert_spd(c: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let scale = c[0][0].abs() * c[1][1].abs();
    if !(c[0][0] > 0.0 && det > 1e-12 * scale) || (c[0][1] - c[1][0]).abs() > 1e-12 * scale.sqrt() {
        return Err(Error::SingularCovariance { det });
    }
    Ok([[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn ens(points: &[[f64; 2]]) -> Ensemble2D {
        Ensemble2D::new(points.to_vec()).unwrap()
    }

    fn gaussian(n: usize, sx: f64, sy: f64, theta: f64, seed: u64) -> Ensemble2D {
        let mut rng = rng_from_seed(seed);
        let (c, s) = (theta.cos(), theta.sin());
        let pts = (0..n)
            .map(|_| {
                let u: f64 = StandardNormal.sample(&mut rng);
                let v: f64 = StandardNormal.sample(&mut rng);
                let (x, y) = (u * sx, v * sy);
                [c * x - s * y, s * x + c * y]
            })
            .collect();
        Ensemble2D::new(pts).unwrap()
    }

    #[test]
    fn correlation_of_lines_and_square() {
        let line: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64 + 1.0]).collect();
        assert!((sample_correlation(&ens(&line)).unwrap() - 1.0).abs() < 1e-15);
        let anti: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, -(i as f64)]).collect();
        assert!((sample_correlation(&ens(&anti)).unwrap() + 1.0).abs() < 1e-15);
        let square = ens(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        assert_eq!(sample_correlation(&square).unwrap(), 0.0);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let flat = ens(&[[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]);
        assert!(matches!(sample_correlation(&flat), Err(Error::DegenerateEnsemble(_))));
        assert!(Ensemble2D::new(vec![[0.0, 0.0]]).is_err());
        assert!(Ensemble2D::new(vec![[0.0, 0.0], [f64::NAN, 1.0]]).is_err());
    }

    #[test]
    fn principal_angle_of_axes() {
        let diag: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, i as f64]).collect();
        let s = covariance_summary(&ens(&diag)).unwrap();
        assert!((s.principal_angle.unwrap() - FRAC_PI_4).abs() < 1e-12);
        let horiz = ens(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
        assert_eq!(covariance_summary(&horiz).unwrap().principal_angle, Some(0.0));
        let vert = ens(&[[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]]);
        assert!((covariance_summary(&vert).unwrap().principal_angle.unwrap() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn isotropic_angle_is_undefined() {
        let square = ens(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let s = covariance_summary(&square).unwrap();
        assert_eq!(s.principal_angle, None);
        assert!(covariance_summary(&ens(&[[0.0, 0.0], [1.0, 1.0]])).is_err());
    }

    #[test]
    fn rotated_gaussian_angle() {
        let e = gaussian(10_000, 3.0, 1.0, 0.3, 42);
        let a = covariance_summary(&e).unwrap().principal_angle.unwrap();
        assert!((a - 0.3).abs() < 0.02, "{a}");
    }

    #[test]
    fn covariance_matches_two_pass_oracle() {
        let e = gaussian(200, 1.0, 0.5, 0.7, 1);
        let (x, y) = (e.column(0), e.column(1));
        let cov = e.covariance();
        assert!((cov[0][0] - variance(&x)).abs() < 1e-12);
        assert!((cov[1][1] - variance(&y)).abs() < 1e-12);
        let rows: Vec<Vec<f64>> = e.points().iter().map(|p| p.to_vec()).collect();
        let full = covariance_matrix(&rows);
        assert!((full[0][1] - cov[0][1]).abs() < 1e-12);
        assert_eq!(mean_vector(&rows), e.mean().to_vec());
    }

    #[test]
    fn projections_of_three_columns() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64, -(i as f64)]).collect();
        let p = pairwise_projections(&rows).unwrap();
        let pairs: Vec<(usize, usize)> = p.iter().map(|(k, _)| *k).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert!((sample_correlation(&p[1].1).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_covers_true_angle() {
        let e = gaussian(2000, 2.0, 1.0, -0.4, 8);
        let mut rng = rng_from_seed(9);
        let (lo, hi) = bootstrap_interval(&e, 200, 0.95, &mut rng, |x| {
            covariance_summary(x).ok().and_then(|s| s.principal_angle)
        })
        .unwrap();
        assert!(lo < -0.4 && -0.4 < hi, "({lo}, {hi})");
        assert!(hi - lo < 0.2);
    }

    #[test]
    fn bootstrap_difference_separates_rotations() {
        let a = gaussian(2000, 2.0, 1.0, 0.3, 1);
        let same = gaussian(2000, 2.0, 1.0, 0.3, 2);
        let turned = gaussian(2000, 2.0, 1.0, 0.6, 3);
        let angle = |x: &Ensemble2D| covariance_summary(x).ok().and_then(|s| s.principal_angle);
        let mut rng = rng_from_seed(4);
        let (lo, hi) = bootstrap_difference(&a, &same, 200, 0.95, &mut rng, angle, angle_difference).unwrap();
        assert!(lo < 0.0 && 0.0 < hi, "({lo}, {hi})");
        let (lo, hi) = bootstrap_difference(&a, &turned, 200, 0.95, &mut rng, angle, angle_difference).unwrap();
        assert!(lo < -0.3 && -0.3 < hi && hi < 0.0, "({lo}, {hi})");
    }

    #[test]
    fn angle_folding() {
        assert!((fold_angle(std::f64::consts::PI) - 0.0).abs() < 1e-15);
        assert!((fold_angle(-FRAC_PI_2) - FRAC_PI_2).abs() < 1e-15);
        assert!((angle_difference(1.5, -1.5) - (3.0 - std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn exact_points_decode_without_error() {
        let constellation = [[0.7, 0.9], [0.7, 1.0], [0.8, 0.9]];
        let truth = [0, 1, 2, 1];
        let received: Vec<[f64; 2]> = truth.iter().map(|&t| constellation[t]).collect();
        for metric in [
            DecisionMetric::Euclidean,
            DecisionMetric::Mahalanobis([[1.0, 0.5], [0.5, 1.0]]),
        ] {
            let r = ml_classify(&received, &truth, &constellation, metric).unwrap();
            assert_eq!(r.error_rate, 0.0);
            assert_eq!(r.assignments, truth);
        }
    }

    #[test]
    fn bits_per_symbol() {
        let grid = |n: usize| -> Vec<[f64; 2]> { (0..n).map(|i| [i as f64, 0.0]).collect() };
        let r24 = ml_classify(&[], &[], &grid(24), DecisionMetric::Euclidean).unwrap();
        let r84 = ml_classify(&[], &[], &grid(84), DecisionMetric::Euclidean).unwrap();
        assert!((r24.bits_per_symbol - 4.585).abs() < 1e-3);
        assert!((r84.bits_per_symbol - 6.392).abs() < 1e-3);
        assert!((r84.bits_per_symbol / r24.bits_per_symbol - 1.394).abs() < 1e-3);
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let err = ml_classify(
            &[[0.0, 0.0]],
            &[0],
            &[[0.0, 0.0]],
            DecisionMetric::Mahalanobis([[1.0, 1.0], [1.0, 1.0]]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularCovariance { .. }));
        assert!(ml_classify(&[[0.0, 0.0]], &[3], &[[0.0, 0.0]], DecisionMetric::Euclidean).is_err());
    }

    #[test]
    fn mahalanobis_beats_euclidean_under_correlated_noise() {
        // Dense lattice, noise strongly correlated along the diagonal.
        let constellation: Vec<[f64; 2]> = (0..8)
            .flat_map(|i| (0..8).map(move |j| [i as f64 * 0.02, j as f64 * 0.02]))
            .collect();
        let rho: f64 = 0.9;
        let sigma = 0.012;
        let cov = [
            [sigma * sigma, rho * sigma * sigma],
            [rho * sigma * sigma, sigma * sigma],
        ];
        let mut rng = rng_from_seed(77);
        let mut received = Vec::new();
        let mut truth = Vec::new();
        for k in 0..20_000 {
            let t = k % constellation.len();
            let u: f64 = StandardNormal.sample(&mut rng);
            let v: f64 = StandardNormal.sample(&mut rng);
            let x = sigma * u;
            let y = sigma * (rho * u + (1.0 - rho * rho).sqrt() * v);
            received.push([constellation[t][0] + x, constellation[t][1] + y]);
            truth.push(t);
        }
        let e = ml_classify(&received, &truth, &constellation, DecisionMetric::Euclidean).unwrap();
        let m = ml_classify(&received, &truth, &constellation, DecisionMetric::Mahalanobis(cov)).unwrap();
        assert!(m.error_rate < e.error_rate, "{} vs {}", m.error_rate, e.error_rate);
    }
}
