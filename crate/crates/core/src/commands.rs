//! The `simulate`, `unravel`, `analyze` and `verify` runs behind the CLI.
//!
//! Each run writes into its output directory through one [`OutputDir`] and
//! ends with a manifest, also when it fails part way.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::ensemble::{q_ensembles, CheckpointEnsemble};
use crate::error::{Error, Result};
use crate::io::{self, fmt_f64, OutputDir, RunManifest, RunStatus};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{
    analytic_qnd_cdf, build_histogram, detailed_ft_curve, integral_ft, ks_distance, IntegralFt, QEnsemble,
    SlopeFit,
};
use crate::trajectory::{generate_finite_efficiency_record, generate_trajectory, reconstruct_trajectory};
use crate::unravel::{alice_arrow_from_ensemble, ensemble_summary, unravel_record};
use crate::verify::{self, VerifyReport, VerifyScale};

/// Stream index reserved for the exported finite-efficiency record.
const RECORD_STREAM: u64 = u64::MAX;

/// Relative tolerance when comparing a record's `dt` and strength to the config.
const META_RTOL: f64 = 1e-9;

fn run<F>(command: &str, cfg: &RunConfig, body: F) -> Result<RunManifest>
where
    F: FnOnce(&mut OutputDir, &mut u64) -> Result<()>,
{
    let start = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let mut steps = 0u64;
    let result = body(&mut out, &mut steps);
    let manifest = RunManifest {
        generator: io::GENERATOR_VERSION.to_string(),
        command: command.to_string(),
        status: if result.is_ok() { RunStatus::Complete } else { RunStatus::Partial },
        error: result.as_ref().err().map(|e| e.to_string()),
        seed: cfg.seed,
        config: cfg.to_config_string(),
        config_fingerprint: io::fingerprint(&cfg.to_config_string()),
        outputs: Vec::new(),
        steps_simulated: steps,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    let manifest = out.finish(manifest)?;
    result.map(|_| manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub integral_ft: Option<IntegralFt>,
    pub slope_fit: Option<SlopeFit>,
    pub underflow: Option<u64>,
    pub overflow: Option<u64>,
    pub ks_qnd: Option<f64>,
    /// Why a statistic above is missing.
    pub notes: Vec<String>,
}

/// Histogram, FT curve and summary statistics of one Q ensemble, written
/// as `histogram{suffix}.csv` and `ft{suffix}.csv`. Statistics that cannot
/// be formed from this ensemble are noted rather than failing the run.
fn write_stats(out: &mut OutputDir, cfg: &RunConfig, ens: &QEnsemble, suffix: &str) -> Result<EnsembleStats> {
    let v = &ens.values;
    let mut stats = EnsembleStats {
        n: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        integral_ft: None,
        slope_fit: None,
        underflow: None,
        overflow: None,
        ks_qnd: None,
        notes: Vec::new(),
    };
    match integral_ft(ens) {
        Ok(ift) => stats.integral_ft = Some(ift),
        Err(e) => stats.notes.push(format!("integral_ft: {e}")),
    }
    let hist = build_histogram(ens, cfg.bin_width, cfg.q_max)?;
    stats.underflow = Some(hist.underflow);
    stats.overflow = Some(hist.overflow);
    out.write_rows(
        &format!("histogram{suffix}.csv"),
        &io::HISTOGRAM_HEADER,
        io::histogram_rows(&hist),
    )?;
    match detailed_ft_curve(&hist, cfg.min_bin_count, cfg.ft_window) {
        Ok(curve) => {
            out.write_rows(&format!("ft{suffix}.csv"), &io::FT_HEADER, io::ft_rows(&curve))?;
            stats.slope_fit = curve.slope_fit;
            if stats.slope_fit.is_none() {
                stats.notes.push("ft: too few points for a slope fit".into());
            }
        }
        Err(e) if e.is_validation() || matches!(e, Error::NoQualifyingBins { .. }) => {
            stats.notes.push(format!("ft: {e}"))
        }
        Err(e) => return Err(e),
    }
    if cfg.mode == Mode::Qnd && ens.duration > 0.0 {
        stats.ks_qnd = Some(ks_distance(ens, |q| {
            analytic_qnd_cdf(q, ens.duration, cfg.tau).unwrap_or(f64::NAN)
        })?);
    }
    Ok(stats)
}

#[derive(Debug, Clone, Serialize)]
struct DurationSummary {
    index: usize,
    duration_s: f64,
    steps: usize,
    q_file: String,
    exact: EnsembleStats,
    continuous_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SimulateSummary {
    mode: Mode,
    initial_state: String,
    n_traj: usize,
    durations: Vec<DurationSummary>,
}

/// Unit-efficiency Q ensembles at every configured duration, with their
/// statistics. With `n_traj = 1` only the single trajectory is exported.
/// `export_record` also writes one record at the configured efficiency.
pub fn cmd_simulate(cfg: &RunConfig, export_record: bool) -> Result<RunManifest> {
    cfg.validate()?;
    run("simulate", cfg, |out, steps| {
        let initial = cfg.initial_state.state();
        let unit = cfg.sim_params().with_efficiency(1.0, 1.0);
        if export_record {
            let params = cfg.sim_params();
            let mut rng = stream_rng(derive_seed(cfg.seed, RECORD_STREAM), 0);
            let (record, states) = generate_finite_efficiency_record(&params, &initial, &mut rng)?;
            io::write_record(out, "record.csv", &record, cfg.seed)?;
            let rows = states
                .iter()
                .enumerate()
                .map(|(k, s)| vec![k.to_string(), fmt_f64(s.x), fmt_f64(s.y), fmt_f64(s.z)])
                .collect();
            out.write_rows("record_states.csv", &["step", "x", "y", "z"], rows)?;
            *steps += record.len() as u64;
        }
        if cfg.n_traj == 1 {
            let traj = generate_trajectory(&unit, &initial, &mut stream_rng(cfg.seed, 0))?;
            out.write_rows("trajectory.csv", &io::TRAJECTORY_HEADER, io::trajectory_rows(&traj))?;
            *steps += traj.record.len() as u64;
            return Ok(());
        }
        let ensembles = q_ensembles(&unit, &initial, &cfg.durations, cfg.n_traj)?;
        *steps += (unit.steps() * cfg.n_traj) as u64;
        let fp = io::fingerprint(&unit);
        let mut durations = Vec::with_capacity(ensembles.len());
        for (j, CheckpointEnsemble { duration, steps: n, exact, continuous, .. }) in ensembles.into_iter().enumerate() {
            let q_file = format!("q_t{j}.csv");
            out.write_rows(&q_file, &io::Q_ENSEMBLE_HEADER, io::q_ensemble_rows(&exact, &continuous))?;
            let ens = QEnsemble::new(exact, duration, fp.clone())?;
            let stats = write_stats(out, cfg, &ens, &format!("_t{j}"))?;
            durations.push(DurationSummary {
                index: j,
                duration_s: duration,
                steps: n,
                q_file,
                exact: stats,
                continuous_mean: continuous.iter().sum::<f64>() / continuous.len() as f64,
            });
        }
        let summary = SimulateSummary {
            mode: cfg.mode,
            initial_state: cfg.initial_state.to_string(),
            n_traj: cfg.n_traj,
            durations,
        };
        out.write_json("summary.json", &summary)?;
        Ok(())
    })
}

fn check_meta(name: &'static str, recorded: f64, configured: f64) -> Result<()> {
    if (recorded - configured).abs() > META_RTOL * configured.abs() {
        return Err(Error::invalid(
            name,
            format!("record was taken with {recorded} but the configuration has {configured}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct UnravelSummary {
    record_fingerprint: String,
    basis: String,
    eta: f64,
    n_trajectories: usize,
    steps: usize,
    alice_fraction: f64,
    alice_q_mean: f64,
    alice_q_variance: f64,
    max_abs_y: f64,
    /// Largest |ensemble mean − reconstruction| over all steps and
    /// components, in standard errors of the mean.
    max_deviation_se: f64,
}

/// Unravel a stored record in the configured basis and compare the
/// ensemble mean with the dephased reconstruction.
pub fn cmd_unravel(cfg: &RunConfig, record_path: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let (record, meta) = io::read_record(record_path)?;
    let record_fingerprint = io::fingerprint(&record.values);
    check_meta("dt", meta.dt, cfg.dt)?;
    check_meta("tau", meta.strength, 1.0 / cfg.tau)?;
    run("unravel", cfg, |out, steps| {
        let initial = cfg.initial_state.state();
        let params = cfg.sim_params().with_duration(record.len() as f64 * record.dt);
        let ucfg = cfg.unravel_config();
        let ensemble = unravel_record(&record, &params, &ucfg, &initial)?;
        let recon = reconstruct_trajectory(&record, &params, &initial, params.unmonitored_dephasing())?;
        *steps += (record.len() * ensemble.trajectories.len()) as u64;

        let mut rows = Vec::new();
        for (i, t) in ensemble.trajectories.iter().enumerate() {
            for row in io::unraveled_rows(t, ucfg.basis, ensemble.strength, record.dt) {
                let mut full = vec![i.to_string()];
                full.extend(row);
                rows.push(full);
            }
        }
        let mut header = vec!["sample"];
        header.extend(io::UNRAVELED_HEADER);
        out.write_rows("unraveled.csv", &header, rows)?;
        out.write_rows("reconstruction.csv", &io::TRAJECTORY_HEADER, io::trajectory_rows(&recon))?;

        let summary = ensemble_summary(&ensemble)?;
        let mut max_dev: f64 = 0.0;
        let mut rows = io::summary_rows(&summary);
        for ((row, s), r) in rows.iter_mut().zip(&summary).zip(&recon.states) {
            let r = r.to_array();
            row.extend(r.iter().map(|v| fmt_f64(*v)));
            for ((m, se), r) in s.mean.iter().zip(&s.stderr).zip(&r) {
                if *se > 0.0 {
                    max_dev = max_dev.max((m - r).abs() / se);
                }
            }
        }
        let mut header = io::SUMMARY_HEADER.to_vec();
        header.extend(["recon_x", "recon_y", "recon_z"]);
        out.write_rows("comparison.csv", &header, rows)?;

        let arrows = alice_arrow_from_ensemble(&ensemble);
        let exact: Vec<f64> = arrows.iter().map(|a| a.exact).collect();
        let continuous: Vec<f64> = arrows.iter().map(|a| a.continuous).collect();
        out.write_rows("alice_q.csv", &io::Q_ENSEMBLE_HEADER, io::q_ensemble_rows(&exact, &continuous))?;

        let n = exact.len() as f64;
        let mean = exact.iter().sum::<f64>() / n;
        let variance = if exact.len() > 1 {
            exact.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let max_abs_y = ensemble
            .trajectories
            .iter()
            .flat_map(|t| &t.states)
            .map(|s| s.y.abs())
            .fold(0.0, f64::max);
        out.write_json(
            "summary.json",
            &UnravelSummary {
                record_fingerprint,
                basis: ucfg.basis.to_string(),
                eta: ucfg.eta,
                n_trajectories: ensemble.trajectories.len(),
                steps: record.len(),
                alice_fraction: ensemble.alice_fraction(),
                alice_q_mean: mean,
                alice_q_variance: variance,
                max_abs_y,
                max_deviation_se: max_dev,
            },
        )?;
        Ok(())
    })
}

/// Statistics of an existing Q-ensemble CSV. The duration used for the
/// QND comparison is the longest configured duration.
pub fn cmd_analyze(cfg: &RunConfig, q_csv: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let values = io::read_q_values(q_csv)?;
    let bytes = std::fs::read(q_csv)?;
    run("analyze", cfg, |out, _| {
        let ens = QEnsemble::new(values, cfg.max_duration(), io::fingerprint(&bytes))?;
        let stats = write_stats(out, cfg, &ens, "")?;
        out.write_json("summary.json", &stats)?;
        Ok(())
    })
}

/// Run the acceptance criteria and write `verify_report.json`. The returned
/// report says whether every criterion passed.
pub fn cmd_verify(cfg: &RunConfig, scale: &VerifyScale) -> Result<(VerifyReport, RunManifest)> {
    let mut report = None;
    let manifest = run("verify", cfg, |out, _| {
        let r = verify::run_all(cfg.seed, scale)?;
        out.write_json("verify_report.json", &r)?;
        report = Some(r);
        Ok(())
    })?;
    Ok((report.expect("report written"), manifest))
}
