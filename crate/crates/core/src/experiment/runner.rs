//! Monte Carlo orchestration over trials and one-dimensional sweeps.

use rayon::prelude::*;

use crate::aggregation::{norelay_optimum, DeviceWeights};
use crate::channel::{NodeLayout, PathGains};
use crate::error::{Error, Result};
use crate::federated::{make_synthetic_task, partition_iid, partition_shards, train, TrainOutcome, TrainSetup, TrainStreams};
use crate::optimizer::{solve_from, SchemeVariant};
use crate::seeds::{StreamPurpose, TrialSeed};
use crate::single_relay::{analytic_construction, check_theorem_conditions, snr_summary};

use super::config::{ExperimentConfig, LayoutKind, PartitionKind};

/// One output record. Optional fields are written as empty CSV cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_key: String,
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub round: usize,
    pub blocks_used: usize,
    pub nmse_db: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub mse_predicted: Option<f64>,
    pub mse_norelay_bound: Option<f64>,
    pub cond40: Option<bool>,
    pub cond41: Option<bool>,
}

/// Mean and standard error over trials at one (sweep value, round).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: Option<f64>,
    pub round: usize,
    pub blocks_used: usize,
    pub trials: usize,
    pub nmse_db_mean: f64,
    pub nmse_db_stderr: f64,
    pub accuracy_mean: f64,
    pub accuracy_stderr: f64,
}

fn draw_layout(config: &ExperimentConfig, seed: &TrialSeed) -> NodeLayout {
    let mut rng = seed.rng(StreamPurpose::Layout);
    match config.layout.kind {
        LayoutKind::Line => NodeLayout::line(&config.layout.line(), config.num_devices, config.num_relays, &mut rng),
        LayoutKind::Cell => NodeLayout::cell(&config.layout.cell(), config.num_devices, config.num_relays, &mut rng),
    }
}

/// One federated training run from the trial's own random streams.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrainOutcome> {
    let seed = TrialSeed::new(config.master_seed, trial as u64);
    let gains = PathGains::from_layout(&draw_layout(config, &seed), &config.path_loss)?;
    let task = make_synthetic_task(&config.fl.task, &mut seed.rng(StreamPurpose::Task))?;
    let mut partition_rng = seed.rng(StreamPurpose::Partition);
    let partition = match config.fl.partition {
        PartitionKind::Iid => partition_iid(task.num_train(), config.num_devices, &mut partition_rng)?,
        PartitionKind::Shards => {
            partition_shards(&task.train_labels, config.num_devices, config.fl.shards_c, &mut partition_rng)?
        }
    };
    let setup = TrainSetup {
        scheme: config.scheme,
        budget: config.power_budget()?,
        solver: config.solver,
        schedule: config.fl.lr,
        tau: config.fl.tau,
        total_blocks: config.fl.total_blocks,
        csi_kappa: config.csi_kappa,
    };
    let (mut channel, mut noise, mut csi) = (
        seed.rng(StreamPurpose::Channel),
        seed.rng(StreamPurpose::Noise),
        seed.rng(StreamPurpose::CsiError),
    );
    let streams = TrainStreams {
        channel: &mut channel,
        noise: &mut noise,
        csi: &mut csi,
    };
    let outcome = train(&setup, &task, &partition, &gains, streams)?;
    let warnings: usize = outcome.metrics.iter().map(|m| m.solver_warnings).sum();
    if warnings > 0 {
        log::warn!("trial {trial}: {warnings} solver warnings");
    }
    Ok(outcome)
}

fn sweep_points(config: &ExperimentConfig) -> Result<Vec<(String, Option<f64>, ExperimentConfig)>> {
    config.validate()?;
    match &config.sweep {
        None => Ok(vec![(String::new(), None, config.clone())]),
        Some(sweep) => sweep
            .values
            .iter()
            .map(|&v| Ok((sweep.key.name().to_string(), Some(v), config.with_sweep_value(sweep.key, v)?)))
            .collect(),
    }
}

/// Per-round records for every sweep value and trial, ordered by
/// (sweep index, trial, round).
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for (key, value, point) in sweep_points(config)? {
        let trials: Vec<_> = (0..point.trials)
            .into_par_iter()
            .map(|t| run_trial(&point, t))
            .collect::<Result<_>>()?;
        for (trial, outcome) in trials.into_iter().enumerate() {
            rows.extend(outcome.metrics.into_iter().map(|m| ResultRow {
                sweep_key: key.clone(),
                sweep_value: value,
                trial,
                round: m.round,
                blocks_used: m.blocks_used,
                nmse_db: Some(m.nmse_db),
                test_accuracy: Some(m.test_accuracy),
                mse_predicted: Some(m.mse_predicted),
                mse_norelay_bound: None,
                cond40: None,
                cond41: None,
            }));
        }
    }
    Ok(rows)
}

/// Outcome of one single-relay certification instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremInstance {
    pub cond40: bool,
    pub cond41: bool,
    pub construction_mse: f64,
    pub warm_started_mse: f64,
    pub norelay_mse: f64,
}

pub fn theorem_instance(config: &ExperimentConfig, trial: usize) -> Result<TheoremInstance> {
    let seed = TrialSeed::new(config.master_seed, trial as u64);
    let gains = PathGains::from_layout(&draw_layout(config, &seed), &config.path_loss)?;
    let channels = gains.realize(&mut seed.rng(StreamPurpose::Channel));
    let weights = DeviceWeights::uniform(config.num_devices);
    let budget = config.power_budget()?;
    let conditions = check_theorem_conditions(&snr_summary(&channels, &budget)?, config.num_devices);
    let construction = analytic_construction(&channels, &weights, &budget)?;
    let (_, trace) = solve_from(
        construction.config.clone(),
        &channels,
        &weights,
        &budget,
        &config.solver,
        SchemeVariant::Full,
    )?;
    let norelay = norelay_optimum(&channels.h, &weights, 2.0 * budget.p0, budget.sigma2)?;
    Ok(TheoremInstance {
        cond40: conditions.cond40,
        cond41: conditions.cond41,
        construction_mse: construction.mse,
        warm_started_mse: trace.final_objective(),
        norelay_mse: norelay.mse,
    })
}

/// Single-relay certification: for each trial, round 0 carries the analytic
/// construction's MSE and round 1 the MSE after the solver is warm-started
/// from it.
pub fn theorem_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for (key, value, point) in sweep_points(config)? {
        if point.num_relays != 1 {
            return Err(Error::Config(format!(
                "theorem-sweep needs num_relays = 1, got {}",
                point.num_relays
            )));
        }
        let instances: Vec<_> = (0..point.trials)
            .into_par_iter()
            .map(|t| theorem_instance(&point, t))
            .collect::<Result<_>>()?;
        for (trial, inst) in instances.into_iter().enumerate() {
            for (round, mse) in [inst.construction_mse, inst.warm_started_mse].into_iter().enumerate() {
                rows.push(ResultRow {
                    sweep_key: key.clone(),
                    sweep_value: value,
                    trial,
                    round,
                    blocks_used: 0,
                    nmse_db: None,
                    test_accuracy: None,
                    mse_predicted: Some(mse),
                    mse_norelay_bound: Some(inst.norelay_mse),
                    cond40: Some(inst.cond40),
                    cond41: Some(inst.cond41),
                });
            }
        }
    }
    Ok(rows)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pointwise averages over trials, in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Option<u64>, usize)> = Vec::new();
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for row in rows {
        let key = (row.sweep_value.map(f64::to_bits), row.round);
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(row),
            None => {
                keys.push(key);
                groups.push(vec![row]);
            }
        }
    }
    groups
        .into_iter()
        .map(|group| {
            let nmse: Vec<f64> = group.iter().filter_map(|r| r.nmse_db).collect();
            let acc: Vec<f64> = group.iter().filter_map(|r| r.test_accuracy).collect();
            let (nmse_db_mean, nmse_db_stderr) = mean_and_stderr(&nmse);
            let (accuracy_mean, accuracy_stderr) = mean_and_stderr(&acc);
            SummaryRow {
                sweep_value: group[0].sweep_value,
                round: group[0].round,
                blocks_used: group[0].blocks_used,
                trials: group.len(),
                nmse_db_mean,
                nmse_db_stderr,
                accuracy_mean,
                accuracy_stderr,
            }
        })
        .collect()
}
