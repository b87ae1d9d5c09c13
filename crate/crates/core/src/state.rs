//! Qubit states and the elementary update maps.
//!
//! States are Bloch vectors `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`. The measurement is the
//! Gaussian POVM `M_r ∝ exp[-(dt·k/4)(r - σz)²]` with rate `k`; its readout
//! density is a two-branch Gaussian mixture centred at `r = ±1` with
//! variance `1/(dt·k)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::log_add_exp;

/// Slack allowed on `|r| ≤ 1` before a state is rejected as unphysical.
pub const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl QubitState {
    pub const PLUS_Z: QubitState = QubitState { x: 0.0, y: 0.0, z: 1.0 };
    pub const MINUS_Z: QubitState = QubitState { x: 0.0, y: 0.0, z: -1.0 };
    pub const PLUS_X: QubitState = QubitState { x: 1.0, y: 0.0, z: 0.0 };
    pub const MINUS_X: QubitState = QubitState { x: -1.0, y: 0.0, z: 0.0 };
    pub const MIXED: QubitState = QubitState { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let state = QubitState { x, y, z };
        state.validate()?;
        Ok(state)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `tr ρ² = (1 + |r|²)/2`
    pub fn purity(&self) -> f64 {
        0.5 * (1.0 + self.norm_sqr())
    }

    pub fn transverse_norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_physical(&self) -> bool {
        let limit = 1.0 + PHYSICALITY_TOL;
        [self.x, self.y, self.z]
            .iter()
            .all(|c| c.is_finite() && c.abs() <= limit)
            && self.norm_sqr() <= limit
    }

    pub fn is_pure(&self) -> bool {
        self.is_physical() && (self.norm() - 1.0).abs() <= PHYSICALITY_TOL
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_physical() {
            Ok(())
        } else {
            Err(Error::UnphysicalState {
                x: self.x,
                y: self.y,
                z: self.z,
            })
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn max_abs_diff(&self, other: &QubitState) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }

    /// Branch weights `((1+z)/2, (1-z)/2)`, clamped into `[0, 1]`.
    fn branch_weights(&self) -> (f64, f64) {
        (
            (0.5 * (1.0 + self.z)).clamp(0.0, 1.0),
            (0.5 * (1.0 - self.z)).clamp(0.0, 1.0),
        )
    }
}

/// Physical and numerical parameters of a run. Times in seconds, rates in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Integration step δt.
    pub dt: f64,
    /// Characteristic measurement time; Alice's measurement rate is `1/tau`.
    pub tau: f64,
    /// Quantum efficiency of the monitored channel.
    pub eta: f64,
    /// Rabi angular frequency Ω (rad/s).
    pub rabi: f64,
    /// Dephasing rate carried by the unmonitored z channel (Bob).
    pub gamma_z: f64,
    /// Dephasing rate carried by the unmonitored φ channel (Rob).
    pub gamma_phi: f64,
    /// Total evolution time T.
    pub duration: f64,
    pub seed: u64,
}

impl SimParams {
    /// Experimental values: δt = 16 ns, 1/τ = 1.97 μs⁻¹, Ω/2π = 2.16 MHz,
    /// η = 0.4, T = 0.32 μs. The unmonitored dephasing is assigned to Bob's
    /// z channel.
    pub fn paper_defaults() -> Self {
        let tau = 1.0 / 1.97e6;
        let eta = 0.4;
        SimParams {
            dt: 16e-9,
            tau,
            eta,
            rabi: 2.0 * PI * 2.16e6,
            gamma_z: unmonitored_rate(eta, tau),
            gamma_phi: 0.0,
            duration: 0.32e-6,
            seed: 0,
        }
    }

    /// Copy with efficiency `eta`; the unmonitored rate `(1-η)/(2ητ)` is
    /// split so that a fraction `z_fraction` goes to Bob and the rest to Rob.
    pub fn with_efficiency(mut self, eta: f64, z_fraction: f64) -> Self {
        let rest = unmonitored_rate(eta, self.tau);
        self.eta = eta;
        self.gamma_z = rest * z_fraction;
        self.gamma_phi = rest * (1.0 - z_fraction);
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn with_rabi(mut self, rabi: f64) -> Self {
        self.rabi = rabi;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Alice's measurement rate `1/τ`.
    pub fn measurement_rate(&self) -> f64 {
        1.0 / self.tau
    }

    /// Ensemble dephasing rate `Γ = 1/(2τ) + γ_z + γ_φ`.
    pub fn total_dephasing(&self) -> f64 {
        0.5 / self.tau + self.gamma_z + self.gamma_phi
    }

    /// Full measurement strength `2Γ` used by a single time-segmented channel.
    pub fn full_strength(&self) -> f64 {
        2.0 * self.total_dephasing()
    }

    /// Dephasing beyond Alice's own backaction, `Γ - 1/(2τ)`.
    pub fn unmonitored_dephasing(&self) -> f64 {
        self.gamma_z + self.gamma_phi
    }

    pub fn rabi_angle(&self) -> f64 {
        self.rabi * self.dt
    }

    /// Number of whole steps in `duration`.
    pub fn steps(&self) -> usize {
        steps_for(self.duration, self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::invalid(
                "duration",
                format!("must be non-negative, got {}", self.duration),
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if !self.rabi.is_finite() {
            return Err(Error::invalid("rabi", "must be finite"));
        }
        for (name, v) in [("gamma_z", self.gamma_z), ("gamma_phi", self.gamma_phi)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.dt / self.tau > 0.5 {
            return Err(Error::invalid(
                "dt",
                format!("dt/tau = {} exceeds 0.5", self.dt / self.tau),
            ));
        }
        let expected = 0.5 / (self.eta * self.tau);
        let gamma = self.total_dephasing();
        if ((gamma - expected) / expected).abs() > 1e-9 {
            return Err(Error::invalid(
                "eta",
                format!(
                    "1/(2 tau) + gamma_z + gamma_phi = {gamma} but 1/(2 eta tau) = {expected}"
                ),
            ));
        }
        Ok(())
    }
}

/// `(1-η)/(2ητ)`, the dephasing rate of the channels Alice does not see.
pub fn unmonitored_rate(eta: f64, tau: f64) -> f64 {
    (1.0 - eta) / (2.0 * eta * tau)
}

pub fn steps_for(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor().max(0.0) as usize
}

fn check_measurement_inputs(state: &QubitState, r: f64, strength: f64, dt: f64) -> Result<()> {
    state.validate()?;
    if !r.is_finite() {
        return Err(Error::invalid("r", format!("readout must be finite, got {r}")));
    }
    if !(strength * dt).is_finite() {
        return Err(Error::invalid("strength", "strength·dt must be finite"));
    }
    Ok(())
}

/// Bayesian update `ρ → M_r ρ M_r† / tr(…)`.
///
/// With `s = r·dt·strength`:
/// `z' = ((1+z)e^s − (1−z)e^{−s}) / ((1+z)e^s + (1−z)e^{−s})` and
/// `(x', y') = (x, y) / (cosh s + z sinh s)`. Exponentials are shifted by
/// `|s|` so large arguments cannot overflow.
pub fn povm_update(state: &QubitState, r: f64, strength: f64, dt: f64) -> Result<QubitState> {
    check_measurement_inputs(state, r, strength, dt)?;
    Ok(povm_update_unchecked(state, r * strength * dt))
}

pub(crate) fn povm_update_unchecked(state: &QubitState, s: f64) -> QubitState {
    let m = s.abs();
    let up = (1.0 + state.z).max(0.0) * (s - m).exp();
    let down = (1.0 - state.z).max(0.0) * (-s - m).exp();
    let denom = up + down;
    let transverse = 2.0 * (-m).exp() / denom;
    QubitState {
        x: state.x * transverse,
        y: state.y * transverse,
        z: (up - down) / denom,
    }
}

/// `ln[(1+z)/2 · e^{s} + (1−z)/2 · e^{−s}]`, the state-dependent part of the
/// log readout density once the common Gaussian factor is removed.
pub fn log_branch_mixture(state: &QubitState, s: f64) -> f64 {
    let (up, down) = state.branch_weights();
    log_add_exp(up.ln() + s, down.ln() - s)
}

/// Natural log of [`readout_density`].
pub fn log_readout_density(state: &QubitState, r: f64, strength: f64, dt: f64) -> Result<f64> {
    check_measurement_inputs(state, r, strength, dt)?;
    let a = strength * dt;
    Ok(0.5 * (a / (2.0 * PI)).ln() - 0.5 * a * (r * r + 1.0) + log_branch_mixture(state, a * r))
}

/// `P(r|ρ) = √(a/2π)·[(1+z)/2·e^{−a(r−1)²/2} + (1−z)/2·e^{−a(r+1)²/2}]`, `a = dt·strength`.
pub fn readout_density(state: &QubitState, r: f64, strength: f64, dt: f64) -> Result<f64> {
    log_readout_density(state, r, strength, dt).map(f64::exp)
}

/// Draw a readout: branch ±1 with probability `(1±z)/2`, then Gaussian noise
/// of variance `1/(dt·strength)`.
pub fn sample_readout<R: Rng + ?Sized>(
    state: &QubitState,
    strength: f64,
    dt: f64,
    rng: &mut R,
) -> f64 {
    let (up, _) = state.branch_weights();
    let branch = if rng.random::<f64>() < up { 1.0 } else { -1.0 };
    let noise: f64 = rng.sample(StandardNormal);
    branch + noise / (strength * dt).sqrt()
}

/// Rotation about +y by `angle` (the Rabi drive `H = Ωσy/2` for time `angle/Ω`).
/// +z is carried toward +x.
pub fn rabi_rotate(state: &QubitState, angle: f64) -> QubitState {
    let (s, c) = angle.sin_cos();
    QubitState {
        x: state.x * c + state.z * s,
        y: state.y,
        z: -state.x * s + state.z * c,
    }
}

/// Pure dephasing: transverse components decay by `e^{−λ·dt}`.
pub fn dephase(state: &QubitState, lambda: f64, dt: f64) -> Result<QubitState> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("dephasing rate must be non-negative, got {lambda}"),
        ));
    }
    let f = (-lambda * dt).exp();
    Ok(QubitState {
        x: state.x * f,
        y: state.y * f,
        z: state.z,
    })
}

/// Rotation about +z by `angle`; the backaction of a φ-quadrature readout.
pub fn phase_kick(state: &QubitState, angle: f64) -> QubitState {
    let (s, c) = angle.sin_cos();
    QubitState {
        x: state.x * c - state.y * s,
        y: state.x * s + state.y * c,
        z: state.z,
    }
}

/// Trace weight of measuring `r` and then `−r`:
/// `M_{−r} M_r ρ M_r† M_{−r}† = (a/2π)·e^{−a(r²+1)}·ρ`.
pub fn undo_weight(r: f64, strength: f64, dt: f64) -> f64 {
    let a = strength * dt;
    a / (2.0 * PI) * (-a * (r * r + 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    const A: f64 = 0.03;

    fn arb_state() -> impl Strategy<Value = QubitState> {
        (0.0f64..1.0, 0.0f64..std::f64::consts::PI, 0.0f64..2.0 * PI).prop_map(|(rad, th, ph)| {
            QubitState {
                x: rad * th.sin() * ph.cos(),
                y: rad * th.sin() * ph.sin(),
                z: rad * th.cos(),
            }
        })
    }

    fn arb_pure() -> impl Strategy<Value = QubitState> {
        (0.0f64..std::f64::consts::PI, 0.0f64..2.0 * PI).prop_map(|(th, ph)| QubitState {
            x: th.sin() * ph.cos(),
            y: th.sin() * ph.sin(),
            z: th.cos(),
        })
    }

    #[test]
    fn eigenstates_are_fixed_points() {
        for r in [-7.0, -0.3, 0.0, 2.5, 40.0] {
            let out = povm_update(&QubitState::PLUS_Z, r, 1.0, A).unwrap();
            assert_eq!(out, QubitState::PLUS_Z);
            let out = povm_update(&QubitState::MINUS_Z, r, 1.0, A).unwrap();
            assert_eq!(out, QubitState::MINUS_Z);
        }
    }

    #[test]
    fn plus_x_update_matches_matrix_oracle() {
        let (strength, dt) = (1.0, 0.1);
        let out = povm_update(&QubitState::PLUS_X, 1.0, strength, dt).unwrap();
        let reference = oracle::measure(&QubitState::PLUS_X, 1.0, strength, dt);
        assert!((out.z - 0.1f64.tanh()).abs() < 1e-15);
        assert!((out.x - 1.0 / 0.1f64.cosh()).abs() < 1e-15);
        assert_eq!(out.y, 0.0);
        assert!(out.max_abs_diff(&reference) < 1e-15);
        assert!((out.z - 0.099668).abs() < 1e-6);
        assert!((out.x - 0.995021).abs() < 1e-6);
    }

    #[test]
    fn mixed_state_update_is_tanh() {
        for s in [-3.0, -0.2, 0.0, 0.4, 12.0] {
            let out = povm_update(&QubitState::MIXED, s, 1.0, 1.0).unwrap();
            let reference = oracle::measure(&QubitState::MIXED, s, 1.0, 1.0);
            assert!((out.z - f64::tanh(s)).abs() < 1e-15);
            assert_eq!((out.x, out.y), (0.0, 0.0));
            assert!(out.max_abs_diff(&reference) < 1e-14);
        }
    }

    #[test]
    fn huge_arguments_do_not_overflow() {
        let s = QubitState { x: 0.6, y: 0.0, z: 0.8 };
        let out = povm_update(&s, 1e4, 1.0, 0.5).unwrap();
        assert!(out.is_physical());
        assert!((out.z - 1.0).abs() < 1e-12);
        let out = povm_update(&s, -1e4, 1.0, 0.5).unwrap();
        assert!((out.z + 1.0).abs() < 1e-12);
    }

    #[test]
    fn measurement_rejects_bad_input() {
        assert!(povm_update(&QubitState::PLUS_X, f64::NAN, 1.0, A).is_err());
        let bad = QubitState { x: 1.0, y: 0.0, z: 0.5 };
        assert!(matches!(
            povm_update(&bad, 0.0, 1.0, A),
            Err(Error::UnphysicalState { .. })
        ));
        assert!(QubitState::new(0.0, 0.0, 1.0 + 1e-10).is_ok());
        assert!(QubitState::new(0.0, 0.0, 1.0 + 1e-8).is_err());
    }

    #[test]
    fn readout_peak_on_eigenstate() {
        let strength = 1.97e6;
        let dt = 16e-9;
        let p = readout_density(&QubitState::PLUS_Z, 1.0, strength, dt).unwrap();
        let expected = (dt * strength / (2.0 * PI)).sqrt();
        assert!((p - expected).abs() < 1e-15);
        let reference = oracle::readout_density(&QubitState::PLUS_Z, 1.0, strength, dt);
        assert!((p - reference).abs() < 1e-15);
    }

    #[test]
    fn readout_density_symmetric_for_balanced_state() {
        let s = QubitState { x: 0.7, y: 0.1, z: 0.0 };
        for r in [0.1, 1.0, 3.3, 11.0] {
            let plus = readout_density(&s, r, 1.0, A).unwrap();
            let minus = readout_density(&s, -r, 1.0, A).unwrap();
            assert!((plus - minus).abs() < 1e-15 * plus.max(1e-300));
        }
    }

    #[test]
    fn readout_density_integrates_to_one() {
        let sigma = 1.0 / A.sqrt();
        for z in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            let s = QubitState { x: 0.0, y: 0.0, z };
            let total = crate::numerics::integrate(
                |r| readout_density(&s, r, 1.0, A).unwrap(),
                -50.0 * sigma,
                50.0 * sigma,
                1e-12,
                200,
            );
            assert!((total - 1.0).abs() < 1e-6, "z={z}: {total}");
        }
    }

    #[test]
    fn sampling_moments_on_eigenstate() {
        let n = 100_000;
        let mut rng = stream_rng(11, 0);
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_readout(&QubitState::PLUS_Z, 1.0, A, &mut rng))
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sigma = (1.0 / A).sqrt();
        assert!((mean - 1.0).abs() < 5.0 * sigma / (n as f64).sqrt());
        assert!((var / (1.0 / A) - 1.0).abs() < 0.05);
    }

    #[test]
    fn sampling_balanced_state_has_zero_mean() {
        let n = 100_000;
        let mut rng = stream_rng(12, 0);
        let mean = (0..n)
            .map(|_| sample_readout(&QubitState::PLUS_X, 1.0, A, &mut rng))
            .sum::<f64>()
            / n as f64;
        // total variance is 1/A + 1
        let sigma = (1.0 / A + 1.0).sqrt();
        assert!(mean.abs() < 5.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn sampling_is_deterministic() {
        let draw = |seed| {
            let mut rng = stream_rng(seed, 5);
            (0..32)
                .map(|_| sample_readout(&QubitState::PLUS_X, 1.0, A, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn rabi_rotation_cases() {
        let s = QubitState { x: 0.2, y: -0.3, z: 0.4 };
        assert_eq!(rabi_rotate(&s, 0.0), s);
        let q = rabi_rotate(&QubitState::PLUS_Z, PI / 2.0);
        assert!(q.max_abs_diff(&QubitState::PLUS_X) < 1e-12);
        let q = rabi_rotate(&s, 0.77);
        assert!(q.max_abs_diff(&oracle::rotate_y(&s, 0.77)) < 1e-15);
    }

    #[test]
    fn dephase_cases() {
        let s = QubitState { x: 1.0, y: 0.0, z: 0.0 };
        assert_eq!(dephase(&s, 0.0, 1.0).unwrap(), s);
        let half = dephase(&s, 2f64.ln(), 1.0).unwrap();
        assert!((half.x - 0.5).abs() < 1e-15);
        assert_eq!(half.z, 0.0);
        let q = QubitState { x: 0.3, y: 0.4, z: 0.5 };
        let out = dephase(&q, 3.0, 0.1).unwrap();
        assert!(out.max_abs_diff(&oracle::dephase(&q, (-0.3f64).exp())) < 1e-15);
        assert!(dephase(&s, -1.0, 1.0).is_err());
    }

    #[test]
    fn phase_kick_cases() {
        let s = QubitState { x: 0.2, y: -0.3, z: 0.4 };
        assert_eq!(phase_kick(&s, 0.0), s);
        let q = phase_kick(&QubitState::PLUS_X, PI / 2.0);
        assert!(q.max_abs_diff(&QubitState { x: 0.0, y: 1.0, z: 0.0 }) < 1e-12);
        let q = phase_kick(&s, 1.3);
        assert_eq!(q.z, s.z);
        assert!(q.max_abs_diff(&oracle::rotate_z(&s, 1.3)) < 1e-15);
    }

    #[test]
    fn undo_weight_matches_matrix_product() {
        let s = QubitState { x: 0.6, y: 0.0, z: 0.8 };
        for r in [-4.0, 0.0, 0.5, 9.0] {
            let w = undo_weight(r, 1.0, A);
            let reference = oracle::undo_weight(&s, r, 1.0, A);
            assert!(((w - reference) / reference).abs() < 1e-13, "r={r}");
        }
    }

    #[test]
    fn sim_params_validation() {
        let p = SimParams::paper_defaults();
        p.validate().unwrap();
        assert!((p.total_dephasing() - 0.5 / (0.4 * p.tau)).abs() < 1e-6);
        assert_eq!(p.steps(), 20);
        let bad = SimParams { eta: 1.2, ..p };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter { name: "eta", .. })
        ));
        assert!(SimParams { dt: 0.6 * p.tau, ..p }.validate().is_err());
        assert!(SimParams { gamma_z: 0.0, ..p }.validate().is_err());
        let phi = p.with_efficiency(0.4, 0.0);
        phi.validate().unwrap();
        assert_eq!(phi.gamma_z, 0.0);
    }

    proptest! {
        #[test]
        fn measurement_is_undone_by_negated_readout(s in arb_state(), r in -40.0f64..40.0) {
            let fwd = povm_update(&s, r, 1.0, A).unwrap();
            let back = povm_update(&fwd, -r, 1.0, A).unwrap();
            prop_assert!(back.max_abs_diff(&s) < 1e-12);
        }

        #[test]
        fn update_agrees_with_matrix_oracle(s in arb_state(), r in -20.0f64..20.0) {
            let fast = povm_update(&s, r, 1.0, A).unwrap();
            let slow = oracle::measure(&s, r, 1.0, A);
            prop_assert!(fast.max_abs_diff(&slow) < 1e-12);
            prop_assert!(fast.is_physical());
        }

        #[test]
        fn pure_states_stay_pure(s in arb_pure(), r in -30.0f64..30.0, th in -3.0f64..3.0) {
            let m = povm_update(&s, r, 1.0, A).unwrap();
            prop_assert!((m.norm() - 1.0).abs() < 1e-12);
            prop_assert!((rabi_rotate(&s, th).norm() - s.norm()).abs() < 1e-12);
            prop_assert!((phase_kick(&s, th).norm() - s.norm()).abs() < 1e-12);
        }

        #[test]
        fn rotations_invert(s in arb_state(), th in -6.0f64..6.0) {
            prop_assert!(rabi_rotate(&rabi_rotate(&s, th), -th).max_abs_diff(&s) < 1e-12);
            prop_assert!(phase_kick(&phase_kick(&s, th), -th).max_abs_diff(&s) < 1e-12);
        }

        #[test]
        fn dephasing_never_raises_purity(s in arb_state(), lam in 0.0f64..1e7) {
            let out = dephase(&s, lam, 16e-9).unwrap();
            prop_assert!(out.purity() <= s.purity() + 1e-15);
            prop_assert!(out.transverse_norm() <= s.transverse_norm());
        }

        #[test]
        fn measurement_commutes_with_phase_kick(s in arb_state(), r in -20.0f64..20.0, th in -3.0f64..3.0) {
            let a = phase_kick(&povm_update(&s, r, 1.0, A).unwrap(), th);
            let b = povm_update(&phase_kick(&s, th), r, 1.0, A).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-12);
        }

        #[test]
        fn readout_density_matches_trace(s in arb_state(), r in -15.0f64..15.0) {
            let fast = readout_density(&s, r, 1.0, A).unwrap();
            let slow = oracle::readout_density(&s, r, 1.0, A);
            prop_assert!(((fast - slow) / slow).abs() < 1e-12);
        }
    }
}
