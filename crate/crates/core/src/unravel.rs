//! Unraveling a finite-efficiency record into pure-state trajectories.
//!
//! The unmonitored measurement is split into time segments. At every step
//! exactly one observer measures at the full strength `2Γ = 1/(ητ)`: Alice
//! (probability η, using her recorded readout) or one of the hidden
//! observers, Bob (z basis, readout sampled from the current state) or Rob
//! (φ basis, zero-mean readout that kicks the phase). Each hypothesis about
//! the hidden readouts yields one pure trajectory for Charlie, the observer
//! who sees every channel.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;
use crate::rng::stream_rng;
use crate::state::{phase_kick, povm_update_unchecked, rabi_rotate, sample_readout, QubitState, SimParams};
use crate::trajectory::{arrow_increment, check_dt, MeasurementRecord};

/// Which hidden observer takes the steps Alice does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Bob measures σz, the same observable as Alice.
    CompatibleZ,
    /// Rob measures the phase quadrature.
    IncompatiblePhi,
    /// Bob and Rob share the hidden steps in proportion `γ_z : γ_φ`
    /// taken from the simulation parameters.
    Split,
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z" | "compatible_z" => Ok(Basis::CompatibleZ),
            "phi" | "incompatible_phi" => Ok(Basis::IncompatiblePhi),
            "split" => Ok(Basis::Split),
            other => Err(Error::invalid(
                "basis",
                format!("expected z, phi or split, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::CompatibleZ => "z",
            Basis::IncompatiblePhi => "phi",
            Basis::Split => "split",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnravelConfig {
    pub eta: f64,
    pub basis: Basis,
    pub n_samples: usize,
    pub seed: u64,
}

impl UnravelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be at least 1"));
        }
        Ok(())
    }

    /// Strength `1/(ητ)` of every time-segmented step.
    pub fn full_strength(&self, tau: f64) -> f64 {
        1.0 / (self.eta * tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Alice,
    Bob,
    Rob,
}

impl Channel {
    pub fn letter(&self) -> char {
        match self {
            Channel::Alice => 'a',
            Channel::Bob => 'b',
            Channel::Rob => 'r',
        }
    }
}

/// One of Charlie's possible pure-state trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnraveledTrajectory {
    /// States at step boundaries; `states[k]` is the state before step `k`'s
    /// measurement.
    pub states: Vec<QubitState>,
    /// State right after step `k`'s measurement (before the rotation).
    pub post_update: Vec<QubitState>,
    /// Alice's readout on her steps, the synthetic readout otherwise.
    pub readouts: Vec<f64>,
    pub channels: Vec<Channel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnravelEnsemble {
    pub trajectories: Vec<UnraveledTrajectory>,
    pub alice_record: MeasurementRecord,
    /// Strength `1/(ητ)` used on every step.
    pub strength: f64,
    pub config: UnravelConfig,
}

impl UnravelEnsemble {
    pub fn channel_masks(&self) -> Vec<&[Channel]> {
        self.trajectories.iter().map(|t| t.channels.as_slice()).collect()
    }

    /// Fraction of all steps taken by Alice.
    pub fn alice_fraction(&self) -> f64 {
        let (alice, total) = self.trajectories.iter().fold((0usize, 0usize), |(a, n), t| {
            (
                a + t.channels.iter().filter(|c| **c == Channel::Alice).count(),
                n + t.channels.len(),
            )
        });
        alice as f64 / total.max(1) as f64
    }
}

/// Bob's step: sample `ϑ_z` from the current state and apply its backaction.
pub fn sample_bob_z<R: Rng + ?Sized>(
    state: &QubitState,
    strength: f64,
    dt: f64,
    rng: &mut R,
) -> (f64, QubitState) {
    let theta = sample_readout(state, strength, dt, rng);
    (theta, povm_update_unchecked(state, theta * strength * dt))
}

/// Rob's step: `ϑ_φ ~ N(0, 1/(strength·dt))`, phase kick by `strength·dt·ϑ_φ`.
pub fn sample_rob_phi<R: Rng + ?Sized>(
    state: &QubitState,
    strength: f64,
    dt: f64,
    rng: &mut R,
) -> (f64, QubitState) {
    let noise: f64 = rng.sample(StandardNormal);
    let theta = noise / (strength * dt).sqrt();
    (theta, phase_kick(state, strength * dt * theta))
}

/// Per-step probabilities of (Alice, Bob); Rob takes the remainder.
fn channel_weights(params: &SimParams, cfg: &UnravelConfig) -> (f64, f64) {
    let hidden = 1.0 - cfg.eta;
    let bob = match cfg.basis {
        Basis::CompatibleZ => hidden,
        Basis::IncompatiblePhi => 0.0,
        Basis::Split => {
            let total = params.gamma_z + params.gamma_phi;
            if total > 0.0 {
                hidden * params.gamma_z / total
            } else {
                hidden
            }
        }
    };
    (cfg.eta, bob)
}

fn unravel_one<R: Rng + ?Sized>(
    record: &MeasurementRecord,
    initial: &QubitState,
    strength: f64,
    angle: f64,
    weights: (f64, f64),
    rng: &mut R,
) -> UnraveledTrajectory {
    let n = record.len();
    let dt = record.dt;
    let mut states = Vec::with_capacity(n + 1);
    let mut post_update = Vec::with_capacity(n);
    let mut readouts = Vec::with_capacity(n);
    let mut channels = Vec::with_capacity(n);
    let mut state = *initial;
    states.push(state);
    for &r in &record.values {
        let (channel, readout, after) = if weights.0 >= 1.0 {
            (Channel::Alice, r, povm_update_unchecked(&state, r * strength * dt))
        } else {
            let u: f64 = rng.random();
            if u < weights.0 {
                (Channel::Alice, r, povm_update_unchecked(&state, r * strength * dt))
            } else if u < weights.0 + weights.1 {
                let (t, s) = sample_bob_z(&state, strength, dt, rng);
                (Channel::Bob, t, s)
            } else {
                let (t, s) = sample_rob_phi(&state, strength, dt, rng);
                (Channel::Rob, t, s)
            }
        };
        post_update.push(after);
        readouts.push(readout);
        channels.push(channel);
        state = rabi_rotate(&after, angle);
        states.push(state);
    }
    UnraveledTrajectory {
        states,
        post_update,
        readouts,
        channels,
    }
}

/// Unravel Alice's record into `cfg.n_samples` pure trajectories. Sample `i`
/// draws from stream `i` of `cfg.seed`, so results do not depend on thread
/// count. With `η = 1` there is nothing hidden and a single trajectory is
/// returned.
pub fn unravel_record(
    record: &MeasurementRecord,
    params: &SimParams,
    cfg: &UnravelConfig,
    initial: &QubitState,
) -> Result<UnravelEnsemble> {
    cfg.validate()?;
    initial.validate()?;
    if !initial.is_pure() {
        return Err(Error::invalid(
            "initial_state",
            format!("unraveling needs a pure state, Bloch norm is {}", initial.norm()),
        ));
    }
    if record.is_empty() {
        return Err(Error::invalid("record", "must contain at least one readout"));
    }
    check_dt(record.dt, params.dt)?;
    let strength = cfg.full_strength(params.tau);
    let angle = params.rabi_angle();
    let weights = channel_weights(params, cfg);
    let n = if cfg.eta >= 1.0 { 1 } else { cfg.n_samples };
    let trajectories = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            unravel_one(record, initial, strength, angle, weights, &mut rng)
        })
        .collect();
    Ok(UnravelEnsemble {
        trajectories,
        alice_record: record.clone(),
        strength,
        config: *cfg,
    })
}

/// Alice's share of the arrow of time along one unraveled trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AliceArrow {
    /// Sum of exact increments over Alice's steps at strength `1/(ητ)`.
    pub exact: f64,
    /// `2·dt/(ητ)·Σ r_k z_k` over Alice's steps, `z` at the step midpoint.
    pub continuous: f64,
}

pub fn alice_arrow(traj: &UnraveledTrajectory, strength: f64, dt: f64) -> AliceArrow {
    let mut exact = CompensatedSum::new();
    let mut cont = CompensatedSum::new();
    for (k, channel) in traj.channels.iter().enumerate() {
        if *channel != Channel::Alice {
            continue;
        }
        let (pre, post, r) = (&traj.states[k], &traj.post_update[k], traj.readouts[k]);
        exact.add(arrow_increment(pre, post, r, strength, dt));
        cont.add(r * 0.5 * (pre.z + post.z));
    }
    AliceArrow {
        exact: exact.total(),
        continuous: 2.0 * strength * dt * cont.total(),
    }
}

pub fn alice_arrow_from_ensemble(ensemble: &UnravelEnsemble) -> Vec<AliceArrow> {
    let dt = ensemble.alice_record.dt;
    ensemble
        .trajectories
        .iter()
        .map(|t| alice_arrow(t, ensemble.strength, dt))
        .collect()
}

/// Ensemble mean and standard error of the Bloch vector at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub mean: [f64; 3],
    pub stderr: [f64; 3],
}

pub fn ensemble_summary(ensemble: &UnravelEnsemble) -> Result<Vec<StepSummary>> {
    let first = ensemble.trajectories.first().ok_or(Error::EmptyEnsemble)?;
    let n = ensemble.trajectories.len() as f64;
    let summaries = (0..first.states.len())
        .map(|k| {
            let mut mean = [0.0; 3];
            let mut stderr = [0.0; 3];
            for c in 0..3 {
                let values = ensemble.trajectories.iter().map(|t| t.states[k].to_array()[c]);
                let m = values.clone().collect::<CompensatedSum>().total() / n;
                mean[c] = m;
                if n > 1.0 {
                    let var = values.map(|v| (v - m).powi(2)).collect::<CompensatedSum>().total()
                        / (n - 1.0);
                    stderr[c] = (var / n).sqrt();
                }
            }
            StepSummary { mean, stderr }
        })
        .collect();
    Ok(summaries)
}
