//! Parallel, seed-deterministic ensembles of arrow-of-time statistics.
//!
//! Trajectory `i` always draws from stream `i` of the run seed, so every
//! ensemble is identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::state::{steps_for, QubitState, SimParams};
use crate::trajectory::{generate_finite_efficiency_record, simulate_arrow, ArrowSample};
use crate::unravel::{alice_arrow_from_ensemble, unravel_record, AliceArrow, Basis, UnravelConfig};

/// Q values of every trajectory at one duration checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEnsemble {
    pub duration: f64,
    pub steps: usize,
    pub exact: Vec<f64>,
    pub continuous: Vec<f64>,
    pub continuous_prepoint: Vec<f64>,
}

/// Simulate `n_traj` unit-efficiency trajectories up to the longest of
/// `durations` and collect Q at each duration. Results come back in the
/// order of `durations`.
pub fn q_ensembles(
    params: &SimParams,
    initial: &QubitState,
    durations: &[f64],
    n_traj: usize,
) -> Result<Vec<CheckpointEnsemble>> {
    params.validate()?;
    initial.validate()?;
    if n_traj == 0 {
        return Err(Error::invalid("n_traj", "must be at least 1"));
    }
    if durations.is_empty() {
        return Err(Error::invalid("duration", "at least one duration is required"));
    }
    if let Some(d) = durations.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::invalid("duration", format!("must be non-negative, got {d}")));
    }
    let steps: Vec<usize> = durations.iter().map(|d| steps_for(*d, params.dt)).collect();
    let mut checkpoints = steps.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();

    let samples: Vec<Vec<ArrowSample>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(params.seed, i as u64);
            simulate_arrow(params, initial, &checkpoints, &mut rng)
        })
        .collect::<Result<_>>()?;

    Ok(durations
        .iter()
        .zip(&steps)
        .map(|(&duration, &n)| {
            let slot = checkpoints.binary_search(&n).expect("checkpoint present");
            let pick = |f: fn(&ArrowSample) -> f64| samples.iter().map(|s| f(&s[slot])).collect();
            CheckpointEnsemble {
                duration,
                steps: n,
                exact: pick(|s| s.exact),
                continuous: pick(|s| s.continuous),
                continuous_prepoint: pick(|s| s.continuous_prepoint),
            }
        })
        .collect())
}

/// Alice's Q over `n_records` finite-efficiency records, each unraveled
/// `n_unravel` times in `basis`. Record `i` depends only on the seed and
/// `i`, so the same records are shared by every basis.
pub fn alice_q_ensemble(
    params: &SimParams,
    initial: &QubitState,
    basis: Basis,
    n_records: usize,
    n_unravel: usize,
) -> Result<Vec<Vec<AliceArrow>>> {
    params.validate()?;
    if n_records == 0 {
        return Err(Error::invalid("n_records", "must be at least 1"));
    }
    (0..n_records)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(params.seed, i as u64);
            let (record, _) = generate_finite_efficiency_record(params, initial, &mut rng)?;
            let cfg = UnravelConfig {
                eta: params.eta,
                basis,
                n_samples: n_unravel,
                seed: derive_seed(params.seed, i as u64),
            };
            let ensemble = unravel_record(&record, params, &cfg, initial)?;
            Ok(alice_arrow_from_ensemble(&ensemble))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{arrow_statistic, generate_trajectory};

    fn params() -> SimParams {
        SimParams::paper_defaults().with_efficiency(1.0, 1.0).with_seed(21)
    }

    #[test]
    fn checkpoints_match_individual_trajectories() {
        let p = params().with_duration(0.32e-6);
        let e = q_ensembles(&p, &QubitState::PLUS_X, &[0.32e-6, 0.16e-6], 8).unwrap();
        assert_eq!(e[0].steps, 20);
        assert_eq!(e[1].steps, 10);
        for i in 0..8 {
            let t = generate_trajectory(&p, &QubitState::PLUS_X, &mut stream_rng(21, i as u64)).unwrap();
            assert!((e[0].exact[i] - arrow_statistic(&t, p.measurement_rate())).abs() < 1e-12);
        }
    }

    #[test]
    fn ensembles_do_not_depend_on_thread_count() {
        let p = params();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| q_ensembles(&p, &QubitState::PLUS_X, &[0.32e-6], 64).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn qnd_ensembles_are_positive() {
        let p = params().with_rabi(0.0);
        let durations: Vec<f64> = [0.25, 0.5, 1.0, 2.0].iter().map(|f| f * p.tau).collect();
        let e = q_ensembles(&p, &QubitState::PLUS_X, &durations, 200).unwrap();
        assert_eq!(e.len(), 4);
        assert!(e.iter().all(|c| c.exact.iter().all(|q| *q >= 0.0)));
    }

    #[test]
    fn rejects_empty_requests() {
        let p = params();
        assert!(q_ensembles(&p, &QubitState::PLUS_X, &[], 10).is_err());
        assert!(q_ensembles(&p, &QubitState::PLUS_X, &[1e-7], 0).is_err());
    }

    #[test]
    fn bases_share_records() {
        let p = SimParams::paper_defaults().with_duration(0.32e-6).with_seed(4);
        let z = alice_q_ensemble(&p, &QubitState::PLUS_X, Basis::CompatibleZ, 4, 3).unwrap();
        let phi = alice_q_ensemble(&p, &QubitState::PLUS_X, Basis::IncompatiblePhi, 4, 3).unwrap();
        assert_eq!(z.len(), 4);
        assert!(z.iter().chain(&phi).all(|v| v.len() == 3));
    }
}
