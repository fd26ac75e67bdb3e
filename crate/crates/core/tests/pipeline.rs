use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relayfl_core::aggregation::{denormalize, normalize, simulate_round, NormalizationStats, TransceiverConfig};
use relayfl_core::federated::{global_update, local_update, make_synthetic_task, partition_iid, TaskParams};
use relayfl_core::single_relay::analytic_construction;
use relayfl_core::{ChannelRealization, DeviceWeights, PowerBudget};

fn small_task() -> relayfl_core::federated::LearningTask {
    let p = TaskParams {
        num_classes: 4,
        feature_dim: 6,
        samples_per_class: 60,
        separation: 2.5,
    };
    make_synthetic_task(&p, &mut ChaCha8Rng::seed_from_u64(11)).unwrap()
}

fn channels() -> ChannelRealization {
    ChannelRealization::new(
        vec![Complex64::new(0.4, -0.3), Complex64::new(-0.2, 0.5), Complex64::new(0.7, 0.1)],
        vec![Complex64::new(1.5, 0.2), Complex64::new(-0.9, 1.1), Complex64::new(0.3, -1.4)],
        vec![Complex64::new(0.8, 0.6)],
    )
    .unwrap()
}

/// Runs `rounds` FedAvg rounds at zero noise; returns the weight vectors of
/// the error-free and over-the-air trajectories after every round, with the
/// over-the-air one always starting from the error-free weights.
fn noiseless_rounds(config: &TransceiverConfig, rounds: usize) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let task = small_task();
    let partition = partition_iid(task.num_train(), 3, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let weights = DeviceWeights::from_sizes(&partition.sizes()).unwrap();
    let ch = channels();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut w = vec![0.0; task.model_dim()];
    let mut out = Vec::new();
    for _ in 0..rounds {
        let deltas: Vec<Vec<f64>> = partition.assignments.iter().map(|i| local_update(&w, &task, i, 1, 0.3)).collect();
        let stats = NormalizationStats::from_updates(&deltas, &weights).unwrap();
        let std = stats.global_std();
        let symbols: Vec<Vec<f64>> = deltas.iter().map(|d| normalize(d, stats.global_mean, std).unwrap()).collect();
        let received = simulate_round(config, &ch, &symbols, 0.0, &mut rng).unwrap();
        let estimate: Vec<f64> = received.iter().map(|x| denormalize(x.re, stats.global_mean, std)).collect();
        // every device's effective end-to-end gain, applied to its own symbols
        let predicted: Vec<f64> = (0..w.len())
            .map(|i| {
                let s: Complex64 = (0..3)
                    .map(|k| {
                        let relayed: Complex64 = (0..ch.num_relays()).map(|n| config.b[n] * ch.f[n] * ch.g(k, n)).sum();
                        let gain = config.c1 * ch.h[k] * config.a1[k] + config.c2 * ch.h[k] * config.a2[k] + config.c2 * config.a1[k] * relayed;
                        gain * symbols[k][i]
                    })
                    .sum();
                denormalize(s.re, stats.global_mean, std)
            })
            .collect();
        let truth: Vec<f64> = (0..w.len())
            .map(|i| deltas.iter().zip(weights.as_slice()).map(|(d, r)| r * d[i]).sum())
            .collect();
        let next_exact = global_update(&w, &truth);
        out.push((next_exact.clone(), global_update(&w, &estimate), global_update(&w, &predicted)));
        w = next_exact;
    }
    out
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

#[test]
fn perfectly_aligned_transceiver_reproduces_error_free_training() {
    let ch = channels();
    let budget = PowerBudget::new(1.0, 2.0, 1e-3).unwrap();
    let config = analytic_construction(&ch, &DeviceWeights::uniform(3), &budget).unwrap().config;
    // iid partition of 240 training samples over 3 devices gives equal weights
    for (exact, air, _) in noiseless_rounds(&config, 15) {
        assert!(rel(&exact, &air) <= 1e-6, "{}", rel(&exact, &air));
    }
}

#[test]
fn misaligned_transceiver_deviates_by_its_gain_error() {
    let ch = channels();
    let budget = PowerBudget::new(1.0, 2.0, 1e-3).unwrap();
    let mut config = analytic_construction(&ch, &DeviceWeights::uniform(3), &budget).unwrap().config;
    config.a2[1] *= Complex64::new(0.9, 0.2);
    config.c1 = Complex64::new(0.05, 0.0);
    let mut saw_deviation = false;
    for (exact, air, predicted) in noiseless_rounds(&config, 10) {
        assert!(rel(&predicted, &air) <= 1e-10, "{}", rel(&predicted, &air));
        saw_deviation |= rel(&exact, &air) > 1e-3;
    }
    assert!(saw_deviation);
}
