//! The federated averaging loop with over-the-air aggregation.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{denormalize, normalize, relay_mse, simulate_round, NormalizationStats, PowerBudget};
use crate::channel::PathGains;
use crate::error::{Error, Result};
use crate::optimizer::{solve, SchemeVariant, SolverConfig};

use super::partition::Partition;
use super::task::LearningTask;

/// How the weighted sum of local updates reaches the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Two-phase relaying with all transceivers jointly optimized.
    Proposed,
    /// Two-phase relaying where the AP only hears the relayed copy.
    RelayOnly,
    /// Single-phase channel inversion, no relays.
    NoRelay,
    /// The exact weighted sum, as if the channel were noiseless.
    ErrorFree,
}

impl Scheme {
    pub fn blocks_per_round(self) -> usize {
        match self {
            Scheme::Proposed | Scheme::RelayOnly => 2,
            Scheme::NoRelay | Scheme::ErrorFree => 1,
        }
    }

    pub fn rounds_for(self, total_blocks: usize) -> usize {
        total_blocks / self.blocks_per_round()
    }

    fn variant(self) -> Option<SchemeVariant> {
        match self {
            Scheme::Proposed => Some(SchemeVariant::Full),
            Scheme::RelayOnly => Some(SchemeVariant::RelayOnly),
            Scheme::NoRelay => Some(SchemeVariant::NoRelaySinglePhase),
            Scheme::ErrorFree => None,
        }
    }
}

/// Step-decayed learning rate `max(initial decay^floor(t/step), floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub step: usize,
    pub floor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 0.05,
            decay: 0.9,
            step: 50,
            floor: 1e-5,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial > 0.0) || !(self.decay > 0.0) || self.step == 0 || !(self.floor > 0.0) {
            return Err(Error::Domain(format!("invalid learning-rate schedule {self:?}")));
        }
        Ok(())
    }

    pub fn at(&self, round: usize) -> f64 {
        let exponent = (round / self.step) as i32;
        (self.initial * self.decay.powi(exponent)).max(self.floor)
    }
}

/// `tau` full-batch gradient steps on one device's data; returns the change
/// in the model.
pub fn local_update(w: &[f64], task: &LearningTask, indices: &[usize], tau: usize, lr: f64) -> Vec<f64> {
    let mut local = w.to_vec();
    for _ in 0..tau {
        let grad = task.gradient(&local, indices);
        local.iter_mut().zip(&grad).for_each(|(x, g)| *x -= lr * g);
    }
    local.iter().zip(w).map(|(a, b)| a - b).collect()
}

pub fn global_update(w: &[f64], estimate: &[f64]) -> Vec<f64> {
    w.iter().zip(estimate).map(|(a, b)| a + b).collect()
}

/// `|estimate - truth|^2 / |truth|^2`.
pub fn nmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    let energy: f64 = truth.iter().map(|x| x * x).sum();
    if !(energy > 0.0) {
        return Err(Error::UndefinedNmse);
    }
    let err: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(err / energy)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    /// Cumulative transmission blocks after this round.
    pub blocks_used: usize,
    /// `-inf` for an exact aggregate, NaN when the true aggregate is zero.
    pub nmse_db: f64,
    pub test_accuracy: f64,
    /// Analytic symbol MSE of the transceiver used this round, evaluated on
    /// the channels the optimizer saw.
    pub mse_predicted: f64,
    pub solver_warnings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub scheme: Scheme,
    pub budget: PowerBudget,
    pub solver: SolverConfig,
    pub schedule: LrSchedule,
    pub tau: usize,
    pub total_blocks: usize,
    /// Weight of the true channel in the optimizer's estimate; `None` for
    /// perfect knowledge.
    pub csi_kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub metrics: Vec<RoundMetrics>,
    pub final_weights: Vec<f64>,
}

/// Independent random streams consumed by training.
pub struct TrainStreams<'a, R: Rng + ?Sized> {
    /// Small-scale fading, redrawn every round.
    pub channel: &'a mut R,
    /// Receiver noise in the symbol simulation.
    pub noise: &'a mut R,
    /// Channel-estimation error.
    pub csi: &'a mut R,
}

/// Runs federated averaging from `w = 0` until the block budget is spent.
pub fn train<R: Rng + ?Sized>(
    setup: &TrainSetup,
    task: &LearningTask,
    partition: &Partition,
    gains: &PathGains,
    streams: TrainStreams<'_, R>,
) -> Result<TrainOutcome> {
    if setup.total_blocks == 0 || setup.tau == 0 {
        return Err(Error::Domain("total_blocks and tau must be positive".into()));
    }
    setup.schedule.validate()?;
    if gains.h.len() != partition.num_devices() {
        return Err(Error::DimensionMismatch(format!(
            "{} devices in the layout, {} in the partition",
            gains.h.len(),
            partition.num_devices()
        )));
    }
    let weights = partition.weights()?;
    let rho = weights.as_slice();
    let sigma2 = setup.budget.sigma2;
    let d = task.model_dim();
    let mut w = vec![0.0; d];
    let rounds = setup.scheme.rounds_for(setup.total_blocks);
    let mut metrics = Vec::with_capacity(rounds);

    for round in 0..rounds {
        let lr = setup.schedule.at(round);
        let deltas: Vec<Vec<f64>> = partition
            .assignments
            .iter()
            .map(|idx| local_update(&w, task, idx, setup.tau, lr))
            .collect();
        let truth: Vec<f64> = (0..d).map(|i| deltas.iter().zip(rho).map(|(dk, r)| r * dk[i]).sum()).collect();

        let mut mse_predicted = 0.0;
        let mut solver_warnings = 0;
        let estimate = match setup.scheme.variant() {
            None => truth.clone(),
            Some(variant) => {
                let stats = NormalizationStats::from_updates(&deltas, &weights)?;
                let std = stats.global_std();
                if std > 0.0 {
                    let symbols = deltas
                        .iter()
                        .map(|dk| normalize(dk, stats.global_mean, std))
                        .collect::<Result<Vec<_>>>()?;
                    let (actual, perceived) = gains.realize_with_csi(setup.csi_kappa, streams.channel, streams.csi)?;
                    let (config, trace) = solve(&perceived, &weights, &setup.budget, &setup.solver, variant)?;
                    mse_predicted = relay_mse(&config, &perceived, &weights, sigma2);
                    solver_warnings = trace.warnings.len();
                    let received: Vec<Complex64> = simulate_round(&config, &actual, &symbols, sigma2, streams.noise)?;
                    received.iter().map(|x| denormalize(x.re, stats.global_mean, std)).collect()
                } else {
                    vec![stats.global_mean; d]
                }
            }
        };

        let nmse_db = match nmse(&estimate, &truth) {
            Ok(v) => to_db(v),
            Err(_) => f64::NAN,
        };
        w = global_update(&w, &estimate);
        metrics.push(RoundMetrics {
            round,
            blocks_used: (round + 1) * setup.scheme.blocks_per_round(),
            nmse_db,
            test_accuracy: task.accuracy(&w),
            mse_predicted,
            solver_warnings,
        });
    }
    Ok(TrainOutcome {
        metrics,
        final_weights: w,
    })
}
