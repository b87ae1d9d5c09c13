//! End-to-end acceptance checks.
//!
//! Each criterion runs a self-contained numerical experiment, compares the
//! outcome with its tolerance and wall-clock budget, and reports the
//! measured quantities so failures can be diagnosed from the report alone.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::{alice_q_ensemble, q_ensembles};
use crate::error::Result;
use crate::numerics::{compensated_sum, integrate, ln_cosh};
use crate::rng::stream_rng;
use crate::state::{povm_update, readout_density, sample_readout, undo_weight, QubitState, SimParams};
use crate::stats::{
    analytic_qnd_cdf, build_histogram, detailed_ft_curve, integral_ft, qnd_density_mass, ks_distance,
    QEnsemble, DEFAULT_BIN_WIDTH, DEFAULT_FT_WINDOW, DEFAULT_MIN_COUNT,
};
use crate::trajectory::{
    arrow_statistic, generate_finite_efficiency_record, generate_trajectory, reconstruct_trajectory,
};
use crate::unravel::{ensemble_summary, unravel_record, Basis, UnravelConfig};

/// Sample sizes for the checks. [`VerifyScale::default`] is the full desk
/// scale; smaller scales are useful for smoke runs but loosen nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyScale {
    pub n_traj: usize,
    pub n_exact: usize,
    pub n_unravel: usize,
    pub n_records: usize,
    pub n_unravel_per_record: usize,
    pub n_convergence: usize,
    pub n_states: usize,
}

impl Default for VerifyScale {
    fn default() -> Self {
        VerifyScale {
            n_traj: 100_000,
            n_exact: 1_000,
            n_unravel: 1_000,
            n_records: 1_000,
            n_unravel_per_record: 100,
            n_convergence: 1_000,
            n_states: 100,
        }
    }
}

impl VerifyScale {
    pub fn with_n_traj(mut self, n: usize) -> Self {
        self.n_traj = n;
        self
    }

    /// Every sample size divided by `factor` (at least 2 each).
    pub fn reduced(self, factor: usize) -> Self {
        let f = |n: usize| (n / factor.max(1)).max(2);
        VerifyScale {
            n_traj: f(self.n_traj),
            n_exact: f(self.n_exact),
            n_unravel: f(self.n_unravel),
            n_records: f(self.n_records),
            n_unravel_per_record: f(self.n_unravel_per_record),
            n_convergence: f(self.n_convergence),
            n_states: f(self.n_states),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub runtime_s: f64,
    pub runtime_limit_s: f64,
    pub metrics: BTreeMap<String, f64>,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {} ({}): {} [{:.2}s of {:.0}s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.runtime_s,
            self.runtime_limit_s
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub scale: VerifyScale,
    pub criteria: Vec<CriterionResult>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&CriterionResult> {
        self.criteria.iter().filter(|c| !c.passed).collect()
    }
}

/// Outcome of a check body before timing is attached.
struct Outcome {
    passed: bool,
    metrics: BTreeMap<String, f64>,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome {
            passed,
            metrics: BTreeMap::new(),
            detail,
        }
    }

    fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }
}

fn timed(
    id: &str,
    title: &str,
    limit_s: f64,
    body: impl FnOnce() -> Result<Outcome>,
) -> Result<CriterionResult> {
    let start = Instant::now();
    let outcome = body()?;
    let runtime_s = start.elapsed().as_secs_f64();
    let in_time = runtime_s < limit_s;
    let mut detail = outcome.detail;
    if !in_time {
        detail.push_str(&format!("; exceeded runtime limit {limit_s}s"));
    }
    Ok(CriterionResult {
        id: id.to_string(),
        title: title.to_string(),
        passed: outcome.passed && in_time,
        runtime_s,
        runtime_limit_s: limit_s,
        metrics: outcome.metrics,
        detail,
    })
}

fn random_pure_state<R: Rng + ?Sized>(rng: &mut R) -> QubitState {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return QubitState { x: v[0] / n, y: v[1] / n, z: v[2] / n };
        }
    }
}

fn random_state<R: Rng + ?Sized>(rng: &mut R) -> QubitState {
    let p = random_pure_state(rng);
    let radius: f64 = rng.random::<f64>().cbrt();
    QubitState { x: p.x * radius, y: p.y * radius, z: p.z * radius }
}

fn unit_params(seed: u64) -> SimParams {
    SimParams::paper_defaults().with_efficiency(1.0, 1.0).with_seed(seed)
}

/// QND parameters with `dt = τ/32`, so durations in units of τ are whole steps.
fn qnd_params(seed: u64) -> SimParams {
    let p = unit_params(seed).with_rabi(0.0);
    p.with_dt(p.tau / 32.0)
}

pub fn reversal_identity(seed: u64, scale: &VerifyScale) -> Result<Vec<CriterionResult>> {
    let p = unit_params(seed);
    let (k, dt) = (p.measurement_rate(), p.dt);
    let mut rng = stream_rng(seed, 1);
    let cases: Vec<(QubitState, f64)> = (0..scale.n_exact)
        .map(|_| {
            let s = random_pure_state(&mut rng);
            let r = sample_readout(&s, k, dt, &mut rng);
            (s, r)
        })
        .collect();

    let a = timed("1a", "measurement reversal restores the state", 1.0, || {
        let mut worst: f64 = 0.0;
        for (s, r) in &cases {
            let fwd = povm_update(s, *r, k, dt)?;
            let back = povm_update(&fwd, -r, k, dt)?;
            worst = worst.max(back.max_abs_diff(s));
        }
        Ok(Outcome::new(worst < 1e-12, format!("max component error {worst:.3e} (tol 1e-12)"))
            .metric("max_error", worst))
    })?;

    let b = timed("1b", "undo weight matches the stated scalar", 1.0, || {
        let a = dt * k;
        let mut worst: f64 = 0.0;
        for (_, r) in &cases {
            let stated = a / (2.0 * PI) * (-a * (r * r + 1.0) / 2.0).exp();
            worst = worst.max((undo_weight(*r, k, dt) - stated).abs());
        }
        Ok(Outcome::new(
            worst < 1e-12,
            format!(
                "max |weight − (dt/2πτ)e^(−dt(r²+1)/2τ)| = {worst:.3e} (tol 1e-12); \
                 the computed weight is tr(M_(−r) M_r ρ M_r† M_(−r)†) = (dt/2πτ)e^(−dt(r²+1)/τ)"
            ),
        )
        .metric("max_error", worst))
    })?;
    Ok(vec![a, b])
}

pub fn closed_form_oracles(seed: u64, scale: &VerifyScale) -> Result<CriterionResult> {
    timed("2", "closed-form Q on QND records", 1.0, || {
        let p = qnd_params(seed);
        let p = p.with_duration(100.0 * p.dt);
        let k = p.measurement_rate();
        let a = p.dt * k;
        let (mut worst_z, mut worst_x): (f64, f64) = (0.0, 0.0);
        for i in 0..scale.n_exact as u64 {
            let tz = generate_trajectory(&p, &QubitState::PLUS_Z, &mut stream_rng(seed, 2 * i))?;
            let sz = compensated_sum(tz.record.values.iter().copied());
            worst_z = worst_z.max((arrow_statistic(&tz, k) - 2.0 * a * sz).abs());

            let tx = generate_trajectory(&p, &QubitState::PLUS_X, &mut stream_rng(seed, 2 * i + 1))?;
            let sx = compensated_sum(tx.record.values.iter().copied());
            worst_x = worst_x.max((arrow_statistic(&tx, k) - 2.0 * ln_cosh(a * sx)).abs());
        }
        Ok(Outcome::new(
            worst_z < 1e-12 && worst_x < 1e-9,
            format!("z+ max error {worst_z:.3e} (tol 1e-12), x+ max error {worst_x:.3e} (tol 1e-9)"),
        )
        .metric("max_error_plus_z", worst_z)
        .metric("max_error_plus_x", worst_x))
    })
}

const QND_RATIOS: [f64; 3] = [0.5, 1.0, 2.0];

pub fn qnd_distribution(seed: u64, scale: &VerifyScale) -> Result<CriterionResult> {
    timed("3", "QND Q distribution matches the closed form", 120.0, || {
        let p = qnd_params(seed);
        let durations: Vec<f64> = QND_RATIOS.iter().map(|r| r * p.tau).collect();
        let ens = q_ensembles(&p, &QubitState::PLUS_X, &durations, scale.n_traj)?;
        let mut out = Outcome::new(true, String::new());
        let mut parts = Vec::new();
        for (ratio, e) in QND_RATIOS.iter().zip(&ens) {
            let q = QEnsemble::new(e.exact.clone(), e.duration, "")?;
            let d = ks_distance(&q, |x| analytic_qnd_cdf(x, e.duration, p.tau).unwrap_or(f64::NAN))?;
            out.passed &= d < 0.02;
            parts.push(format!("T/τ={ratio}: KS={d:.4}"));
            out = out.metric(&format!("ks_T{ratio}"), d);
        }
        out.detail = format!("{} (tol 0.02)", parts.join(", "));
        Ok(out)
    })
}

fn driven_params(seed: u64) -> SimParams {
    unit_params(seed).with_duration(0.32e-6)
}

pub fn detailed_ft_slope(seed: u64, scale: &VerifyScale) -> Result<CriterionResult> {
    timed("4", "detailed FT slope on the driven ensemble", 120.0, || {
        let p = driven_params(seed);
        let ens = q_ensembles(&p, &QubitState::PLUS_X, &[p.duration], scale.n_traj)?;
        let fit_of = |values: &[f64]| -> Result<Option<(f64, f64)>> {
            let q = QEnsemble::new(values.to_vec(), p.duration, "")?;
            let h = build_histogram(&q, DEFAULT_BIN_WIDTH, 10.0)?;
            Ok(detailed_ft_curve(&h, DEFAULT_MIN_COUNT, DEFAULT_FT_WINDOW)
                .ok()
                .and_then(|c| c.slope_fit)
                .map(|f| (f.slope, f.stderr)))
        };
        let exact = fit_of(&ens[0].exact)?;
        let prepoint = fit_of(&ens[0].continuous_prepoint)?;
        let (slope, se) = exact.unwrap_or((f64::NAN, f64::NAN));
        let mut out = Outcome::new(
            (slope - 1.0).abs() <= 0.1,
            format!(
                "slope {slope:.3} ± {se:.3} over |Q| ≤ {DEFAULT_FT_WINDOW} (target 1.0 ± 0.1); \
                 pre-point continuous Q gives {}",
                prepoint.map_or("no fit".to_string(), |(s, e)| format!("{s:.3} ± {e:.3}"))
            ),
        )
        .metric("slope", slope)
        .metric("slope_stderr", se);
        if let Some((s, _)) = prepoint {
            out = out.metric("slope_prepoint", s);
        }
        Ok(out)
    })
}

pub fn integral_ft_checks(seed: u64, scale: &VerifyScale) -> Result<Vec<CriterionResult>> {
    let a = timed("5a", "integral FT on the driven ensemble", 120.0, || {
        let p = driven_params(seed);
        let ens = q_ensembles(&p, &QubitState::PLUS_X, &[p.duration], scale.n_traj)?;
        let r = integral_ft(&QEnsemble::new(ens[0].exact.clone(), p.duration, "")?)?;
        let pre = integral_ft(&QEnsemble::new(ens[0].continuous_prepoint.clone(), p.duration, "")?)?;
        let z = (r.mean - 1.0) / r.stderr;
        Ok(Outcome::new(
            z.abs() <= 3.0,
            format!(
                "⟨e^(−Q)⟩ = {:.4} ± {:.4} ({z:+.1} SE from 1, tol 3 SE); \
                 pre-point continuous Q gives {:.4} ± {:.4}",
                r.mean, r.stderr, pre.mean, pre.stderr
            ),
        )
        .metric("mean", r.mean)
        .metric("stderr", r.stderr)
        .metric("mean_prepoint", pre.mean))
    })?;

    let b = timed("5b", "absolute irreversibility in QND monitoring", 120.0, || {
        let p = qnd_params(seed);
        let durations: Vec<f64> = QND_RATIOS.iter().map(|r| r * p.tau).collect();
        let ens = q_ensembles(&p, &QubitState::PLUS_X, &durations, scale.n_traj)?;
        let mut out = Outcome::new(true, String::new());
        let mut deficits = Vec::new();
        let mut parts = Vec::new();
        for (ratio, e) in QND_RATIOS.iter().zip(&ens) {
            let r = integral_ft(&QEnsemble::new(e.exact.clone(), e.duration, "")?)?;
            let sigmas = (1.0 - r.mean) / r.stderr;
            out.passed &= sigmas > 5.0;
            deficits.push(1.0 - r.mean);
            parts.push(format!("T/τ={ratio}: {:.4} ± {:.4} ({sigmas:.0} SE below 1)", r.mean, r.stderr));
            out = out.metric(&format!("mean_T{ratio}"), r.mean);
        }
        let monotone = deficits.windows(2).all(|w| w[1] > w[0]);
        out.passed &= monotone;
        out.detail = format!(
            "{}; deficit {}monotone in T",
            parts.join(", "),
            if monotone { "" } else { "not " }
        );
        Ok(out)
    })?;
    Ok(vec![a, b])
}

fn finite_params(seed: u64) -> SimParams {
    SimParams::paper_defaults().with_seed(seed).with_duration(0.32e-6)
}

pub fn unraveling_consistency(seed: u64, scale: &VerifyScale) -> Result<Vec<CriterionResult>> {
    let p = finite_params(seed);
    let (record, _) = generate_finite_efficiency_record(&p, &QubitState::PLUS_X, &mut stream_rng(seed, 6))?;
    let recon = reconstruct_trajectory(&record, &p, &QubitState::PLUS_X, p.unmonitored_dephasing())?;
    let start = Instant::now();
    let run = |basis| {
        let cfg = UnravelConfig { eta: p.eta, basis, n_samples: scale.n_unravel, seed };
        unravel_record(&record, &p, &cfg, &QubitState::PLUS_X)
    };
    let z = run(Basis::CompatibleZ)?;
    let phi = run(Basis::IncompatiblePhi)?;
    let shared = start.elapsed().as_secs_f64();

    let a = timed("6a", "unraveled ensemble mean tracks the dephased estimate", 30.0 - shared, || {
        let mut out = Outcome::new(true, String::new());
        let mut parts = Vec::new();
        for (name, e) in [("z", &z), ("phi", &phi)] {
            let summary = ensemble_summary(e)?;
            let mut worst_se: f64 = 0.0;
            let mut worst_abs: f64 = 0.0;
            for (s, target) in summary.iter().zip(&recon.states) {
                for c in 0..3 {
                    let diff = (s.mean[c] - target.to_array()[c]).abs();
                    worst_abs = worst_abs.max(diff);
                    let ok = if s.stderr[c] > 0.0 { diff <= 3.0 * s.stderr[c] } else { diff <= 1e-9 };
                    if !ok {
                        out.passed = false;
                    }
                    if s.stderr[c] > 0.0 {
                        worst_se = worst_se.max(diff / s.stderr[c]);
                    }
                }
            }
            parts.push(format!("{name}: max deviation {worst_se:.1} SE ({worst_abs:.3} absolute)"));
            out = out.metric(&format!("max_se_{name}"), worst_se);
        }
        out.detail = format!("{} over {} steps (tol 3 SE)", parts.join(", "), record.len());
        Ok(out)
    })?;

    let b = timed("6b", "basis controls motion out of the x-z plane", 30.0 - shared, || {
        let max_y = |e: &crate::unravel::UnravelEnsemble| {
            e.trajectories
                .iter()
                .flat_map(|t| t.states.iter().map(|s| s.y.abs()))
                .fold(0.0, f64::max)
        };
        let (yz, yphi) = (max_y(&z), max_y(&phi));
        Ok(Outcome::new(
            yz < 1e-9 && yphi > 0.05,
            format!("max |y|: phi {yphi:.3} (need > 0.05), z {yz:.1e} (need < 1e-9)"),
        )
        .metric("max_y_phi", yphi)
        .metric("max_y_z", yz))
    })?;
    Ok(vec![a, b])
}

/// Pooled variance of per-record groups and its delete-one-group jackknife
/// error, returned for the difference of two paired groupings.
fn paired_variance_difference(a: &[Vec<f64>], b: &[Vec<f64>]) -> (f64, f64, f64, f64) {
    let moments = |g: &[Vec<f64>]| -> Vec<(f64, f64, f64)> {
        g.iter()
            .map(|v| {
                (
                    v.len() as f64,
                    compensated_sum(v.iter().copied()),
                    compensated_sum(v.iter().map(|x| x * x)),
                )
            })
            .collect()
    };
    let var = |n: f64, s: f64, s2: f64| (s2 - s * s / n) / (n - 1.0);
    let (ma, mb) = (moments(a), moments(b));
    let total = |m: &[(f64, f64, f64)]| {
        m.iter().fold((0.0, 0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2))
    };
    let (ta, tb) = (total(&ma), total(&mb));
    let va = var(ta.0, ta.1, ta.2);
    let vb = var(tb.0, tb.1, tb.2);
    let g = ma.len() as f64;
    let loo: Vec<f64> = ma
        .iter()
        .zip(&mb)
        .map(|(x, y)| {
            var(ta.0 - x.0, ta.1 - x.1, ta.2 - x.2) - var(tb.0 - y.0, tb.1 - y.1, tb.2 - y.2)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / g;
    let se = ((g - 1.0) / g * loo.iter().map(|d| (d - mean).powi(2)).sum::<f64>()).sqrt();
    (va, vb, va - vb, se)
}

pub fn basis_spread(seed: u64, scale: &VerifyScale) -> Result<CriterionResult> {
    timed("7", "compatible basis broadens Alice's Q", 120.0, || {
        let p = finite_params(seed);
        let collect = |basis| -> Result<Vec<Vec<f64>>> {
            Ok(alice_q_ensemble(&p, &QubitState::PLUS_X, basis, scale.n_records, scale.n_unravel_per_record)?
                .into_iter()
                .map(|v| v.into_iter().map(|q| q.exact).collect())
                .collect())
        };
        let z = collect(Basis::CompatibleZ)?;
        let phi = collect(Basis::IncompatiblePhi)?;
        let (vz, vphi, diff, se) = paired_variance_difference(&z, &phi);
        let sigmas = diff / se;
        Ok(Outcome::new(
            sigmas > 3.0,
            format!("Var_z = {vz:.4}, Var_phi = {vphi:.4}, difference {sigmas:.1} SE (need > 3)"),
        )
        .metric("var_z", vz)
        .metric("var_phi", vphi)
        .metric("sigmas", sigmas))
    })
}

pub fn continuous_convergence(seed: u64, scale: &VerifyScale) -> Result<CriterionResult> {
    timed("8", "continuous form converges linearly in dt", 60.0, || {
        let base = driven_params(seed);
        let gap = |dt: f64| -> Result<f64> {
            let p = base.with_dt(dt);
            let e = q_ensembles(&p, &QubitState::PLUS_X, &[p.duration], scale.n_convergence)?;
            let diffs = e[0].exact.iter().zip(&e[0].continuous).map(|(a, b)| (a - b).abs());
            Ok(compensated_sum(diffs) / scale.n_convergence as f64)
        };
        let coarse = gap(base.dt)?;
        let fine = gap(base.dt / 2.0)?;
        let ratio = fine / coarse;
        Ok(Outcome::new(
            (ratio - 0.5).abs() <= 0.15,
            format!("mean |Q_cont − Q| {coarse:.4e} → {fine:.4e}, ratio {ratio:.3} (target 0.5 ± 0.15)"),
        )
        .metric("ratio", ratio)
        .metric("gap_dt", coarse)
        .metric("gap_half_dt", fine))
    })
}

pub fn normalization(seed: u64, scale: &VerifyScale) -> Result<CriterionResult> {
    timed("9", "densities integrate to one", 1.0, || {
        let tau = SimParams::paper_defaults().tau;
        let mut worst_q: f64 = 0.0;
        for ratio in [0.25, 0.5, 1.0, 2.0, 4.0] {
            worst_q = worst_q.max((qnd_density_mass(ratio * tau, tau)? - 1.0).abs());
        }
        let p = unit_params(seed);
        let (k, dt) = (p.measurement_rate(), p.dt);
        let half_width = 1.0 + 40.0 / (k * dt).sqrt();
        let mut rng = stream_rng(seed, 9);
        let mut worst_r: f64 = 0.0;
        for _ in 0..scale.n_states {
            let s = random_state(&mut rng);
            let mass = integrate(
                |r| readout_density(&s, r, k, dt).unwrap_or(f64::NAN),
                -half_width,
                half_width,
                1e-10,
                64,
            );
            worst_r = worst_r.max((mass - 1.0).abs());
        }
        Ok(Outcome::new(
            worst_q < 1e-6 && worst_r < 1e-6,
            format!("QND density max error {worst_q:.2e}, readout density max error {worst_r:.2e} (tol 1e-6)"),
        )
        .metric("max_error_qnd", worst_q)
        .metric("max_error_readout", worst_r))
    })
}

/// Run every criterion.
pub fn run_all(seed: u64, scale: &VerifyScale) -> Result<VerifyReport> {
    let mut criteria = reversal_identity(seed, scale)?;
    criteria.push(closed_form_oracles(seed, scale)?);
    criteria.push(qnd_distribution(seed, scale)?);
    criteria.push(detailed_ft_slope(seed, scale)?);
    criteria.extend(integral_ft_checks(seed, scale)?);
    criteria.extend(unraveling_consistency(seed, scale)?);
    criteria.push(basis_spread(seed, scale)?);
    criteria.push(continuous_convergence(seed, scale)?);
    criteria.push(normalization(seed, scale)?);
    let all_passed = criteria.iter().all(|c| c.passed);
    Ok(VerifyReport {
        seed,
        scale: *scale,
        criteria,
        all_passed,
    })
}
