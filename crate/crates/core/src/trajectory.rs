//! Measurement records, quantum trajectories and the arrow-of-time statistic.
//!
//! A forward step measures and then rotates. Its time reverse rotates back
//! (Ω → −Ω) and then measures the negated readout, which undoes the forward
//! backaction exactly. The statistic
//!
//! ```text
//! Q = Σ_k ln P(r_k | ρ_k) − ln P(−r_k | ρ'_k)
//! ```
//!
//! compares forward and reversed readout densities around each measurement
//! sub-step (`ρ'_k` is the state right after measuring `r_k`). The rotation
//! appears with the same probability in both directions and contributes
//! nothing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, CompensatedSum};
use crate::state::{
    dephase, log_branch_mixture, phase_kick, povm_update, povm_update_unchecked, rabi_rotate,
    sample_readout, QubitState, SimParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub values: Vec<f64>,
    pub dt: f64,
    /// Measurement rate the readouts were produced (or are interpreted) at.
    pub strength: f64,
}

impl MeasurementRecord {
    pub fn new(values: Vec<f64>, dt: f64, strength: f64) -> Result<Self> {
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "record",
                format!("value at step {bad} is not finite"),
            ));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(strength.is_finite() && strength > 0.0) {
            return Err(Error::invalid(
                "strength",
                format!("must be positive, got {strength}"),
            ));
        }
        Ok(MeasurementRecord {
            values,
            dt,
            strength,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `r̃_k = −r_{n−1−k}`
    pub fn time_reversed(&self) -> MeasurementRecord {
        MeasurementRecord {
            values: self.values.iter().rev().map(|r| -r).collect(),
            dt: self.dt,
            strength: self.strength,
        }
    }
}

/// Sub-steps making up one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Measure,
    Rotate,
}

/// Forward order of the sub-steps.
pub const FORWARD_SCHEDULE: [StepKind; 2] = [StepKind::Measure, StepKind::Rotate];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// States at step boundaries, `record.len() + 1` of them.
    pub states: Vec<QubitState>,
    /// State immediately before each measurement sub-step.
    pub pre_measure: Vec<QubitState>,
    /// State immediately after each measurement sub-step.
    pub post_measure: Vec<QubitState>,
    pub record: MeasurementRecord,
    pub q_increments: Vec<f64>,
    pub q_total: f64,
    pub schedule: [StepKind; 2],
    /// Rabi angle applied by every rotate sub-step.
    pub rotation_angle: f64,
    /// Extra dephasing rate applied after each measurement (0 when reversible).
    pub dephase_extra: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.record.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record.is_empty()
    }

    pub fn initial(&self) -> &QubitState {
        &self.states[0]
    }

    pub fn final_state(&self) -> &QubitState {
        self.states.last().expect("trajectory holds at least one state")
    }
}

/// Builds a trajectory step by step; shared by generation, reconstruction
/// and reversal.
struct Builder {
    states: Vec<QubitState>,
    pre: Vec<QubitState>,
    post: Vec<QubitState>,
    readouts: Vec<f64>,
    q: Vec<f64>,
}

impl Builder {
    fn with_capacity(initial: QubitState, n: usize) -> Self {
        let mut states = Vec::with_capacity(n + 1);
        states.push(initial);
        Builder {
            states,
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
            readouts: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
        }
    }

    fn current(&self) -> QubitState {
        *self.states.last().unwrap()
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        schedule: [StepKind; 2],
        mut readout: impl FnMut(&QubitState) -> f64,
        strength: f64,
        dt: f64,
        angle: f64,
        dephase_extra: f64,
    ) -> Result<()> {
        let mut state = self.current();
        for kind in schedule {
            match kind {
                StepKind::Rotate => state = rabi_rotate(&state, angle),
                StepKind::Measure => {
                    let r = readout(&state);
                    let after = povm_update(&state, r, strength, dt)?;
                    self.q.push(arrow_increment(&state, &after, r, strength, dt));
                    self.pre.push(state);
                    self.post.push(after);
                    self.readouts.push(r);
                    state = if dephase_extra > 0.0 {
                        dephase(&after, dephase_extra, dt)?
                    } else {
                        after
                    };
                }
            }
        }
        self.states.push(state);
        Ok(())
    }

    fn finish(
        self,
        dt: f64,
        strength: f64,
        schedule: [StepKind; 2],
        angle: f64,
        dephase_extra: f64,
    ) -> Trajectory {
        let q_total = compensated_sum(self.q.iter().copied());
        Trajectory {
            states: self.states,
            pre_measure: self.pre,
            post_measure: self.post,
            record: MeasurementRecord {
                values: self.readouts,
                dt,
                strength,
            },
            q_increments: self.q,
            q_total,
            schedule,
            rotation_angle: angle,
            dephase_extra,
        }
    }
}

/// Simulate a unit-efficiency trajectory: each step samples `r_k` from the
/// current state at rate `1/τ`, applies the measurement backaction, then
/// rotates by `Ω·dt`.
pub fn generate_trajectory<R: Rng + ?Sized>(
    params: &SimParams,
    initial: &QubitState,
    rng: &mut R,
) -> Result<Trajectory> {
    params.validate()?;
    initial.validate()?;
    let n = params.steps();
    let strength = params.measurement_rate();
    let dt = params.dt;
    let angle = params.rabi_angle();
    let mut b = Builder::with_capacity(*initial, n);
    for _ in 0..n {
        b.step(
            FORWARD_SCHEDULE,
            |s| sample_readout(s, strength, dt, rng),
            strength,
            dt,
            angle,
            0.0,
        )?;
    }
    Ok(b.finish(dt, strength, FORWARD_SCHEDULE, angle, 0.0))
}

/// Replay a given record: measure at the record's strength, dephase by
/// `dephase_extra`, rotate. With `dephase_extra = Γ − strength/2` this is the
/// finite-efficiency state estimate; 0 gives the unit-efficiency estimate.
pub fn reconstruct_trajectory(
    record: &MeasurementRecord,
    params: &SimParams,
    initial: &QubitState,
    dephase_extra: f64,
) -> Result<Trajectory> {
    initial.validate()?;
    check_dt(record.dt, params.dt)?;
    if !(dephase_extra >= 0.0 && dephase_extra.is_finite()) {
        return Err(Error::invalid(
            "dephase_extra",
            format!("must be non-negative, got {dephase_extra}"),
        ));
    }
    let angle = params.rabi_angle();
    let mut b = Builder::with_capacity(*initial, record.len());
    for &r in &record.values {
        b.step(
            FORWARD_SCHEDULE,
            |_| r,
            record.strength,
            record.dt,
            angle,
            dephase_extra,
        )?;
    }
    Ok(b.finish(
        record.dt,
        record.strength,
        FORWARD_SCHEDULE,
        angle,
        dephase_extra,
    ))
}

pub(crate) fn check_dt(record_dt: f64, params_dt: f64) -> Result<()> {
    if ((record_dt - params_dt) / params_dt).abs() > 1e-9 {
        return Err(Error::invalid(
            "dt",
            format!("record dt {record_dt} does not match configured dt {params_dt}"),
        ));
    }
    Ok(())
}

/// `ln P(r|pre) − ln P(−r|post)` at equal strength and dt.
///
/// The Gaussian prefactor and `e^{−a(r²+1)/2}` cancel between the two
/// densities, leaving the log branch mixtures evaluated at `±a·r`.
/// `post` must be the measurement update of `pre` under `r`.
pub fn arrow_increment(
    pre: &QubitState,
    post: &QubitState,
    r: f64,
    strength: f64,
    dt: f64,
) -> f64 {
    let s = r * strength * dt;
    log_branch_mixture(pre, s) - log_branch_mixture(post, -s)
}

/// Exact `Q` of a trajectory, recomputed from its measurement sub-steps.
pub fn arrow_statistic(traj: &Trajectory, strength: f64) -> f64 {
    let dt = traj.record.dt;
    traj.pre_measure
        .iter()
        .zip(&traj.post_measure)
        .zip(&traj.record.values)
        .map(|((pre, post), &r)| arrow_increment(pre, post, r, strength, dt))
        .collect::<CompensatedSum>()
        .total()
}

/// Where `z` is sampled in the continuous form `Q ≈ 2·dt·k·Σ r_k z_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ContinuousForm {
    /// `z` averaged over the states bracketing the measurement. Converges to
    /// the exact statistic linearly in `dt`.
    #[default]
    Midpoint,
    /// `z` taken before the measurement. Differs from the exact statistic by
    /// `∫(1 − z²) dt/τ`, which survives the `dt → 0` limit.
    PrePoint,
}

impl ContinuousForm {
    #[inline]
    pub fn z(&self, pre: &QubitState, post: &QubitState) -> f64 {
        match self {
            ContinuousForm::Midpoint => 0.5 * (pre.z + post.z),
            ContinuousForm::PrePoint => pre.z,
        }
    }
}

/// Continuous-limit approximation `2·dt·k·Σ r_k z_k` (midpoint `z`).
pub fn arrow_statistic_continuous(traj: &Trajectory, strength: f64) -> f64 {
    arrow_statistic_continuous_with(traj, strength, ContinuousForm::Midpoint)
}

pub fn arrow_statistic_continuous_with(
    traj: &Trajectory,
    strength: f64,
    form: ContinuousForm,
) -> f64 {
    let a = traj.record.dt * strength;
    2.0 * a
        * traj
            .pre_measure
            .iter()
            .zip(&traj.post_measure)
            .zip(&traj.record.values)
            .map(|((pre, post), &r)| r * form.z(pre, post))
            .collect::<CompensatedSum>()
            .total()
}

/// Replay a trajectory backwards in time: reversed sub-step order, negated
/// Rabi angle and negated readouts, starting from the final state. The
/// result ends on the original initial state and its `Q` is `−Q`.
pub fn reverse_trajectory(traj: &Trajectory) -> Result<Trajectory> {
    if traj.dephase_extra > 0.0 {
        return Err(Error::Irreversible {
            dephase_extra: traj.dephase_extra,
        });
    }
    let schedule = [traj.schedule[1], traj.schedule[0]];
    let angle = -traj.rotation_angle;
    let reversed = traj.record.time_reversed();
    let mut b = Builder::with_capacity(*traj.final_state(), reversed.len());
    for &r in &reversed.values {
        b.step(schedule, |_| r, reversed.strength, reversed.dt, angle, 0.0)?;
    }
    Ok(b.finish(reversed.dt, reversed.strength, schedule, angle, 0.0))
}

/// Arrow statistics of one trajectory at a duration checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrowSample {
    pub steps: usize,
    pub exact: f64,
    pub continuous: f64,
    pub continuous_prepoint: f64,
}

/// Unit-efficiency simulation that keeps only the running state and sums.
/// Returns one sample per entry of `checkpoints` (step counts, ascending).
pub fn simulate_arrow<R: Rng + ?Sized>(
    params: &SimParams,
    initial: &QubitState,
    checkpoints: &[usize],
    rng: &mut R,
) -> Result<Vec<ArrowSample>> {
    initial.validate()?;
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("checkpoints", "must be ascending"));
    }
    let strength = params.measurement_rate();
    let dt = params.dt;
    let a = strength * dt;
    let angle = params.rabi_angle();
    let last = checkpoints.last().copied().unwrap_or(0);

    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let mut state = *initial;
    let mut exact = CompensatedSum::new();
    let mut mid = CompensatedSum::new();
    let mut pre_point = CompensatedSum::new();
    for step in 0..=last {
        while next.peek() == Some(&&step) {
            next.next();
            out.push(ArrowSample {
                steps: step,
                exact: exact.total(),
                continuous: 2.0 * a * mid.total(),
                continuous_prepoint: 2.0 * a * pre_point.total(),
            });
        }
        if step == last {
            break;
        }
        let r = sample_readout(&state, strength, dt, rng);
        let after = povm_update_unchecked(&state, a * r);
        exact.add(arrow_increment(&state, &after, r, strength, dt));
        mid.add(r * 0.5 * (state.z + after.z));
        pre_point.add(r * state.z);
        state = rabi_rotate(&after, angle);
    }
    Ok(out)
}

/// Simulate the full (Alice + Bob + Rob) dynamics at finite efficiency and
/// return Alice's record alongside the hidden pure states.
///
/// Every step applies three commuting measurements: Alice's readout at rate
/// `1/τ`, Bob's z readout at rate `2γ_z`, and Rob's φ readout at rate `2γ_φ`,
/// whose backaction is a z rotation by `2γ_φ·dt·ϑ_φ`. Then the Rabi rotation.
/// The returned record carries Alice's strength `1/τ`.
pub fn generate_finite_efficiency_record<R: Rng + ?Sized>(
    params: &SimParams,
    initial: &QubitState,
    rng: &mut R,
) -> Result<(MeasurementRecord, Vec<QubitState>)> {
    params.validate()?;
    initial.validate()?;
    let n = params.steps();
    let dt = params.dt;
    let alice = params.measurement_rate();
    let bob = 2.0 * params.gamma_z;
    let rob = 2.0 * params.gamma_phi;
    let angle = params.rabi_angle();
    let mut values = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n + 1);
    let mut state = *initial;
    states.push(state);
    for _ in 0..n {
        let r = sample_readout(&state, alice, dt, rng);
        state = povm_update_unchecked(&state, r * alice * dt);
        if bob > 0.0 {
            let theta = sample_readout(&state, bob, dt, rng);
            state = povm_update_unchecked(&state, theta * bob * dt);
        }
        if rob > 0.0 {
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            let theta = noise / (rob * dt).sqrt();
            state = phase_kick(&state, rob * dt * theta);
        }
        state = rabi_rotate(&state, angle);
        values.push(r);
        states.push(state);
    }
    Ok((MeasurementRecord::new(values, dt, alice)?, states))
}
