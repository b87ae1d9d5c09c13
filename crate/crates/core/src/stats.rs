//! Ensemble statistics of Q: histograms, the detailed and integral
//! fluctuation theorems, and the closed-form QND distribution.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::numerics::{integrate, ln_cosh, CompensatedSum};

pub const DEFAULT_BIN_WIDTH: f64 = 0.25;
pub const DEFAULT_MIN_COUNT: u64 = 10;
pub const DEFAULT_FT_WINDOW: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEnsemble {
    pub values: Vec<f64>,
    pub duration: f64,
    pub params_fingerprint: String,
}

impl QEnsemble {
    pub fn new(values: Vec<f64>, duration: f64, params_fingerprint: impl Into<String>) -> Result<Self> {
        if let Some(i) = values.iter().position(|q| !q.is_finite()) {
            return Err(Error::invalid("q", format!("sample {i} is not finite")));
        }
        Ok(QEnsemble {
            values,
            duration,
            params_fingerprint: params_fingerprint.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniform bins centred on integer multiples of the width, symmetric about 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples inside the binned range.
    pub total: u64,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// All samples, including those outside the range.
    pub fn sample_count(&self) -> u64 {
        self.total + self.underflow + self.overflow
    }

    /// Count per unit Q, normalized by the full sample count.
    pub fn densities(&self) -> Vec<f64> {
        let norm = self.sample_count() as f64 * self.width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }

    pub fn check_symmetric(&self) -> Result<()> {
        let n = self.edges.len();
        if n < 2 || self.counts.len() + 1 != n {
            return Err(Error::AsymmetricHistogram);
        }
        let tol = 1e-9 * self.width().abs();
        let mirrored = (0..n).all(|i| (self.edges[i] + self.edges[n - 1 - i]).abs() <= tol);
        let increasing = self.edges.windows(2).all(|w| w[1] > w[0]);
        if mirrored && increasing {
            Ok(())
        } else {
            Err(Error::AsymmetricHistogram)
        }
    }
}

pub fn build_histogram(ensemble: &QEnsemble, bin_width: f64, q_max: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid("bin_width", format!("must be positive, got {bin_width}")));
    }
    if !(q_max > 0.0 && q_max.is_finite()) {
        return Err(Error::invalid("q_max", format!("must be positive, got {q_max}")));
    }
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let m = (q_max / bin_width).round().max(0.0) as i64;
    let edges = (-m..=m + 1)
        .map(|j| (j as f64 - 0.5) * bin_width)
        .collect::<Vec<_>>();
    let mut counts = vec![0u64; (2 * m + 1) as usize];
    let (mut underflow, mut overflow, mut total) = (0, 0, 0);
    for &q in &ensemble.values {
        // f64::round goes half away from zero, so q and −q land in mirror bins
        let j = (q / bin_width).round();
        if j < -(m as f64) {
            underflow += 1;
        } else if j > m as f64 {
            overflow += 1;
        } else {
            counts[(j as i64 + m) as usize] += 1;
            total += 1;
        }
    }
    Ok(Histogram {
        edges,
        counts,
        total,
        underflow,
        overflow,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtPoint {
    pub q: f64,
    pub ln_ratio: f64,
    pub stderr: f64,
}

/// Weighted least-squares slope of `ln_ratio` against `q` through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub window: f64,
    pub n_points: usize,
    /// Reduced χ² of the fit; NaN with a single point.
    pub reduced_chi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtCurve {
    pub points: Vec<FtPoint>,
    pub slope_fit: Option<SlopeFit>,
    pub min_count: u64,
}

/// `ln(P(Q)/P(−Q))` per positive bin where both bins hold at least
/// `min_count` samples, with Poisson errors `√(1/n₊ + 1/n₋)`.
pub fn detailed_ft_curve(hist: &Histogram, min_count: u64, window: f64) -> Result<FtCurve> {
    hist.check_symmetric()?;
    let centers = hist.centers();
    let n = hist.counts.len();
    let mut points = Vec::new();
    for (i, &q) in centers.iter().enumerate().skip(n / 2 + 1) {
        let plus = hist.counts[i];
        let minus = hist.counts[n - 1 - i];
        if plus >= min_count.max(1) && minus >= min_count.max(1) {
            let (p, m) = (plus as f64, minus as f64);
            points.push(FtPoint {
                q,
                ln_ratio: (p / m).ln(),
                stderr: (1.0 / p + 1.0 / m).sqrt(),
            });
        }
    }
    if points.is_empty() {
        return Err(Error::NoQualifyingBins { min_count });
    }
    let slope_fit = fit_slope(&points, window);
    Ok(FtCurve {
        points,
        slope_fit,
        min_count,
    })
}

fn fit_slope(points: &[FtPoint], window: f64) -> Option<SlopeFit> {
    let used: Vec<&FtPoint> = points.iter().filter(|p| p.q <= window + 1e-12).collect();
    if used.is_empty() {
        return None;
    }
    let mut sxy = CompensatedSum::new();
    let mut sxx = CompensatedSum::new();
    for p in &used {
        let w = 1.0 / (p.stderr * p.stderr);
        sxy.add(w * p.q * p.ln_ratio);
        sxx.add(w * p.q * p.q);
    }
    let slope = sxy.total() / sxx.total();
    let chi2: f64 = used
        .iter()
        .map(|p| ((p.ln_ratio - slope * p.q) / p.stderr).powi(2))
        .sum();
    let dof = used.len() as f64 - 1.0;
    Some(SlopeFit {
        slope,
        stderr: 1.0 / sxx.total().sqrt(),
        window,
        n_points: used.len(),
        reduced_chi2: if dof > 0.0 { chi2 / dof } else { f64::NAN },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralFt {
    pub mean: f64,
    /// Jackknife standard error of the mean.
    pub stderr: f64,
    pub median: f64,
    pub n: usize,
}

/// Sample mean of `e^{−Q}` with jackknife error and the median as a
/// heavy-tail diagnostic.
pub fn integral_ft(ensemble: &QEnsemble) -> Result<IntegralFt> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let w: Vec<f64> = ensemble.values.iter().map(|q| (-q).exp()).collect();
    let n = w.len();
    let total = w.iter().copied().collect::<CompensatedSum>().total();
    let mean = total / n as f64;
    let stderr = if n > 1 {
        let nf = n as f64;
        let loo = w.iter().map(|x| (total - x) / (nf - 1.0));
        let loo_mean = loo.clone().collect::<CompensatedSum>().total() / nf;
        let ss = loo.map(|t| (t - loo_mean).powi(2)).collect::<CompensatedSum>().total();
        ((nf - 1.0) / nf * ss).sqrt()
    } else {
        0.0
    };
    let mut sorted = w;
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(IntegralFt {
        mean,
        stderr,
        median,
        n,
    })
}

fn check_times(duration: f64, tau: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration", format!("must be positive, got {duration}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", format!("must be positive, got {tau}")));
    }
    Ok(())
}

/// `arcosh(e^{q/2})` for `q > 0` without forming `e^{q/2}`.
fn arcosh_exp_half(q: f64) -> f64 {
    0.5 * q + (-(-q).exp_m1()).sqrt().ln_1p()
}

/// Probability density of Q for QND monitoring started on the equator:
///
/// ```text
/// P(Q) = √(τ/2πT) · e^Q/√(e^Q − 1) · exp(−T/2τ − (τ/2T)·arcosh²(e^{Q/2})),  Q > 0
/// ```
///
/// Q is `2 ln cosh S` where the accumulated signal `S` is an equal mixture
/// of `N(±T/τ, T/τ)`. The density vanishes for `Q ≤ 0`.
pub fn analytic_qnd_density(q: f64, duration: f64, tau: f64) -> Result<f64> {
    check_times(duration, tau)?;
    if q <= 0.0 || q.is_nan() {
        return Ok(0.0);
    }
    if q == f64::INFINITY {
        return Ok(0.0);
    }
    let var = duration / tau;
    let u = arcosh_exp_half(q);
    let ln_p = -0.5 * (2.0 * PI * var).ln() + 0.5 * q - 0.5 * (-(-q).exp_m1()).ln()
        - 0.5 * var
        - u * u / (2.0 * var);
    Ok(ln_p.exp())
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Cumulative distribution of [`analytic_qnd_density`]:
/// `Φ((u − σ²)/σ) + Φ((u + σ²)/σ) − 1` with `u = arcosh(e^{q/2})`, `σ² = T/τ`.
pub fn analytic_qnd_cdf(q: f64, duration: f64, tau: f64) -> Result<f64> {
    check_times(duration, tau)?;
    if q <= 0.0 {
        return Ok(0.0);
    }
    let var = duration / tau;
    let sigma = var.sqrt();
    let u = arcosh_exp_half(q);
    Ok((normal_cdf((u - var) / sigma) + normal_cdf((u + var) / sigma) - 1.0).clamp(0.0, 1.0))
}

/// `∫₀^∞ P(Q) dQ` by adaptive quadrature in `u = arcosh(e^{Q/2})`, which
/// removes the `(e^Q − 1)^{−1/2}` edge singularity: `dQ = 2 tanh u du`.
pub fn qnd_density_mass(duration: f64, tau: f64) -> Result<f64> {
    check_times(duration, tau)?;
    let var = duration / tau;
    let sigma = var.sqrt();
    // at u = 0 the integrand tends to 2·e^{−σ²/2}/√(2πσ²)
    let edge = 2.0 * (-0.5 * var).exp() / (2.0 * PI * var).sqrt();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return edge;
        }
        let q = 2.0 * ln_cosh(u);
        analytic_qnd_density(q, duration, tau).unwrap_or(f64::NAN) * 2.0 * u.tanh()
    };
    let upper = var + 40.0 * sigma + 40.0;
    Ok(integrate(integrand, 0.0, upper, 1e-12, 256))
}

/// Kolmogorov–Smirnov distance between the empirical distribution of the
/// ensemble and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(ensemble: &QEnsemble, cdf: F) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut sorted = ensemble.values.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ens(values: Vec<f64>) -> QEnsemble {
        QEnsemble::new(values, 1.0, "test").unwrap()
    }

    fn normal_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Draw Q from the QND model: S ~ ½N(±σ², σ²), Q = 2 ln cosh S.
    fn qnd_samples(n: usize, var: f64, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n)
            .map(|_| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let z: f64 = rng.sample(StandardNormal);
                2.0 * ln_cosh(sign * var + var.sqrt() * z)
            })
            .collect()
    }

    #[test]
    fn single_zero_lands_in_central_bin() {
        let h = build_histogram(&ens(vec![0.0]), 1.0, 2.0).unwrap();
        assert_eq!(h.counts, vec![0, 0, 1, 0, 0]);
        assert_eq!(h.edges, vec![-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]);
        assert_eq!(h.total, 1);
        h.check_symmetric().unwrap();
    }

    #[test]
    fn out_of_range_samples_are_tallied() {
        let h = build_histogram(&ens(vec![-10.0, 0.3, 9.0, 12.0]), 0.5, 2.0).unwrap();
        assert_eq!((h.underflow, h.overflow, h.total), (1, 2, 1));
        assert_eq!(h.counts.iter().sum::<u64>(), h.total);
    }

    #[test]
    fn histogram_rejects_bad_input() {
        assert!(matches!(build_histogram(&ens(vec![]), 1.0, 1.0), Err(Error::EmptyEnsemble)));
        assert!(build_histogram(&ens(vec![1.0]), 0.0, 1.0).is_err());
        assert!(build_histogram(&ens(vec![1.0]), 1.0, -1.0).is_err());
        assert!(QEnsemble::new(vec![f64::NAN], 1.0, "").is_err());
    }

    #[test]
    fn gaussian_histogram_passes_chi_square() {
        let n = 100_000;
        let h = build_histogram(&ens(normal_samples(n, 1)), 0.25, 4.0).unwrap();
        let mut chi2 = 0.0;
        let mut dof = 0;
        for (i, &c) in h.counts.iter().enumerate() {
            let (lo, hi) = (h.edges[i], h.edges[i + 1]);
            let expected = n as f64 * (normal_cdf(hi) - normal_cdf(lo));
            if expected > 5.0 {
                chi2 += (c as f64 - expected).powi(2) / expected;
                dof += 1;
            }
        }
        // 0.1% upper quantile of χ² with ~30 dof is below 60
        assert!(chi2 < 60.0, "chi2={chi2} dof={dof}");
    }

    #[test]
    fn mirrored_samples_give_zero_ratio() {
        let mut v = normal_samples(20_000, 2);
        v.extend(v.clone().into_iter().map(|q| -q));
        // include exact half-bin boundaries
        v.extend([0.125, -0.125, 0.375, -0.375]);
        let h = build_histogram(&ens(v), 0.25, 3.0).unwrap();
        let n = h.counts.len();
        for i in 0..n {
            assert_eq!(h.counts[i], h.counts[n - 1 - i]);
        }
        let curve = detailed_ft_curve(&h, 10, 3.0).unwrap();
        assert!(curve.points.iter().all(|p| p.ln_ratio == 0.0));
        assert_eq!(curve.slope_fit.unwrap().slope, 0.0);
    }

    #[test]
    fn constructed_exponential_ratio_is_recovered() {
        let w = 0.5;
        let mut v = Vec::new();
        for j in 1..=6 {
            let q = j as f64 * w;
            let minus = 50;
            let plus = (minus as f64 * q.exp()).round() as usize;
            v.extend(std::iter::repeat_n(-q, minus));
            v.extend(std::iter::repeat_n(q, plus));
        }
        let h = build_histogram(&ens(v), w, 3.0).unwrap();
        let curve = detailed_ft_curve(&h, 10, 3.0).unwrap();
        assert_eq!(curve.points.len(), 6);
        for p in &curve.points {
            let exact = ((50.0 * p.q.exp()).round() / 50.0).ln();
            assert!((p.ln_ratio - exact).abs() < 1e-14);
            assert!((p.ln_ratio - p.q).abs() < 0.02);
        }
        assert!((curve.slope_fit.unwrap().slope - 1.0).abs() < 0.01);
    }

    #[test]
    fn exact_integer_ratio_fixture_is_unbiased() {
        // counts chosen so that plus/minus = e^{q} holds in floating point
        let q = 2f64.ln();
        let mut v = vec![-q; 100];
        v.extend(vec![q; 200]);
        let h = build_histogram(&ens(v), q, 2.0 * q).unwrap();
        let curve = detailed_ft_curve(&h, 10, 3.0).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert!((curve.points[0].ln_ratio - curve.points[0].q).abs() < 1e-15);
    }

    #[test]
    fn ft_curve_needs_qualifying_bins() {
        let h = build_histogram(&ens(vec![1.0; 50]), 0.25, 3.0).unwrap();
        assert!(matches!(
            detailed_ft_curve(&h, 10, 3.0),
            Err(Error::NoQualifyingBins { min_count: 10 })
        ));
    }

    #[test]
    fn ft_curve_rejects_asymmetric_histogram() {
        let mut h = build_histogram(&ens(vec![0.0]), 1.0, 2.0).unwrap();
        h.edges[0] = -3.0;
        assert!(matches!(detailed_ft_curve(&h, 1, 3.0), Err(Error::AsymmetricHistogram)));
    }

    #[test]
    fn integral_ft_of_zeros_is_one() {
        let r = integral_ft(&ens(vec![0.0; 100])).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.median, 1.0);
    }

    #[test]
    fn jackknife_matches_standard_error_of_mean() {
        let v = normal_samples(1000, 3);
        let r = integral_ft(&ens(v.clone())).unwrap();
        let w: Vec<f64> = v.iter().map(|q| (-q).exp()).collect();
        let n = w.len() as f64;
        let m = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((r.stderr - sd / n.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn gaussian_with_mean_half_variance_satisfies_integral_ft() {
        // Q ~ N(μ, 2μ) obeys P(Q)/P(−Q) = e^Q exactly
        let mu: f64 = 0.5;
        let v: Vec<f64> = normal_samples(200_000, 4)
            .into_iter()
            .map(|z| mu + (2.0 * mu).sqrt() * z)
            .collect();
        let r = integral_ft(&ens(v)).unwrap();
        assert!((r.mean - 1.0).abs() < 3.0 * r.stderr, "{r:?}");
    }

    #[test]
    fn qnd_density_support() {
        assert_eq!(analytic_qnd_density(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(analytic_qnd_density(-2.0, 1.0, 1.0).unwrap(), 0.0);
        for q in [1e-12, 1e-3, 0.5, 3.0, 40.0] {
            assert!(analytic_qnd_density(q, 1.0, 1.0).unwrap() > 0.0);
        }
        assert!(analytic_qnd_density(1.0, 0.0, 1.0).is_err());
        assert!(analytic_qnd_density(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn qnd_density_matches_direct_formula() {
        let (t, tau) = (1.5, 1.0);
        for q in [0.05, 0.7, 2.0, 6.0] {
            let e: f64 = f64::exp(q);
            let u = e.sqrt().acosh();
            let direct = (tau / (2.0 * PI * t)).sqrt() * e / (e - 1.0).sqrt()
                * (-t / (2.0 * tau) - tau / (2.0 * t) * u * u).exp();
            let got = analytic_qnd_density(q, t, tau).unwrap();
            assert!((got / direct - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qnd_density_is_normalized() {
        for ratio in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let mass = qnd_density_mass(ratio * 1e-6, 1e-6).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "T/τ={ratio}: {mass}");
        }
    }

    #[test]
    fn cdf_agrees_with_integrated_density() {
        let (t, tau) = (1.0, 1.0);
        for q in [0.1, 0.8, 2.5, 7.0] {
            let u_max = arcosh_exp_half(q);
            let integrand = |u: f64| {
                if u <= 0.0 {
                    return 2.0 * (-0.5f64).exp() / (2.0 * PI).sqrt();
                }
                analytic_qnd_density(2.0 * ln_cosh(u), t, tau).unwrap() * 2.0 * u.tanh()
            };
            let mass = integrate(integrand, 0.0, u_max, 1e-13, 64);
            let cdf = analytic_qnd_cdf(q, t, tau).unwrap();
            assert!((mass - cdf).abs() < 1e-9, "q={q}");
        }
        assert_eq!(analytic_qnd_cdf(0.0, t, tau).unwrap(), 0.0);
        assert!((analytic_qnd_cdf(1e4, t, tau).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_samples_follow_analytic_law() {
        let n = 1_000_000;
        for var in [0.5, 2.0] {
            let e = ens(qnd_samples(n, var, 5));
            let d = ks_distance(&e, |q| analytic_qnd_cdf(q, var, 1.0).unwrap()).unwrap();
            assert!(d < 0.01 * 0.5, "var={var}: {d}");
        }
    }

    #[test]
    fn ks_self_consistency_and_degenerate_cases() {
        let n = 100_000;
        let e = ens(normal_samples(n, 6));
        let d = ks_distance(&e, normal_cdf).unwrap();
        assert!(d < 1.63 / (n as f64).sqrt());

        let constant = ens(vec![0.0; 100]);
        assert!(ks_distance(&constant, normal_cdf).unwrap() >= 0.5);

        let disjoint = ens(vec![-5.0; 10]);
        let d = ks_distance(&disjoint, |q| if q < 0.0 { 0.0 } else { 1.0 - (-q).exp() }).unwrap();
        assert_eq!(d, 1.0);

        assert!(matches!(ks_distance(&ens(vec![]), normal_cdf), Err(Error::EmptyEnsemble)));
    }

    proptest! {
        #[test]
        fn negated_samples_mirror_counts(v in proptest::collection::vec(-5.0f64..5.0, 1..200), w in 0.05f64..1.0) {
            let neg: Vec<f64> = v.iter().map(|q| -q).collect();
            let a = build_histogram(&ens(v), w, 4.0).unwrap();
            let b = build_histogram(&ens(neg), w, 4.0).unwrap();
            let n = a.counts.len();
            for i in 0..n {
                prop_assert_eq!(a.counts[i], b.counts[n - 1 - i]);
            }
            prop_assert_eq!(a.underflow, b.overflow);
            prop_assert_eq!(a.counts.iter().sum::<u64>(), a.total);
        }

        #[test]
        fn integral_ft_is_bounded_by_extremes(v in proptest::collection::vec(-3.0f64..3.0, 1..100)) {
            let r = integral_ft(&ens(v.clone())).unwrap();
            let lo = v.iter().map(|q| (-q).exp()).fold(f64::INFINITY, f64::min);
            let hi = v.iter().map(|q| (-q).exp()).fold(0.0, f64::max);
            prop_assert!(r.mean >= lo * (1.0 - 1e-12) && r.mean <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn cdf_is_monotone(q1 in 0.0f64..20.0, dq in 0.0f64..5.0, var in 0.1f64..5.0) {
            let a = analytic_qnd_cdf(q1, var, 1.0).unwrap();
            let b = analytic_qnd_cdf(q1 + dq, var, 1.0).unwrap();
            prop_assert!(b >= a - 1e-15);
        }
    }
}
