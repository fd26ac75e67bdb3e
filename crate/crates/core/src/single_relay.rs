//! One relay, uniform weights: SNR summaries, the sufficient conditions under
//! which relaying provably beats the relay-free scheme, and the explicit
//! `c1 = 0` transceiver that attains the certified MSE.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::aggregation::{DeviceWeights, PowerBudget, TransceiverConfig};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

/// Peak received SNRs of every link, in linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSummary {
    /// `P_0 |h_k|^2 / sigma2`
    pub snr_device_ap: Vec<f64>,
    /// `P_0 |g_k|^2 / sigma2`
    pub snr_device_relay: Vec<f64>,
    /// `P_r |f|^2 / sigma2`
    pub snr_relay_ap: f64,
    /// Worst direct SNR over worst device-to-relay SNR.
    pub delta: f64,
}

impl SnrSummary {
    pub fn min_snr_device_ap(&self) -> f64 {
        self.snr_device_ap.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn min_snr_device_relay(&self) -> f64 {
        self.snr_device_relay.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn require_single_relay(channels: &ChannelRealization) -> Result<()> {
    if channels.num_relays() != 1 {
        return Err(Error::Domain(format!(
            "single-relay analysis needs exactly one relay, got {}",
            channels.num_relays()
        )));
    }
    Ok(())
}

pub fn snr_summary(channels: &ChannelRealization, budget: &PowerBudget) -> Result<SnrSummary> {
    require_single_relay(channels)?;
    let scale = budget.p0 / budget.sigma2;
    let snr_device_ap: Vec<f64> = channels.h.iter().map(|h| scale * h.norm_sqr()).collect();
    let snr_device_relay: Vec<f64> = (0..channels.num_devices())
        .map(|k| scale * channels.g(k, 0).norm_sqr())
        .collect();
    let snr_relay_ap = budget.pr * channels.f[0].norm_sqr() / budget.sigma2;
    let mut summary = SnrSummary {
        snr_device_ap,
        snr_device_relay,
        snr_relay_ap,
        delta: 0.0,
    };
    let worst_relay = summary.min_snr_device_relay();
    if !(worst_relay > 0.0) {
        return Err(Error::Domain("delta is undefined: a device has no link to the relay".into()));
    }
    summary.delta = summary.min_snr_device_ap() / worst_relay;
    Ok(summary)
}

/// Outcome of the two sufficient conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremConditions {
    /// `delta <= 1`: every device reaches the relay at least as well as the
    /// worst device reaches the AP.
    pub cond40: bool,
    /// `SNR_relay-AP >= (K min SNR_k + delta) / (1 + sqrt(2 - 2 delta))^2`.
    pub cond41: bool,
    /// `delta > 1`, so the relay-AP threshold is not real and `cond41` is
    /// reported false without being evaluated.
    pub threshold_undefined: bool,
}

impl TheoremConditions {
    pub fn both(&self) -> bool {
        self.cond40 && self.cond41
    }
}

/// Relay-to-AP SNR required by the second condition, or `None` when
/// `delta > 1`.
pub fn relay_snr_threshold(summary: &SnrSummary, num_devices: usize) -> Option<f64> {
    if summary.delta > 1.0 {
        return None;
    }
    let root = 1.0 + (2.0 - 2.0 * summary.delta).sqrt();
    Some((num_devices as f64 * summary.min_snr_device_ap() + summary.delta) / (root * root))
}

pub fn check_theorem_conditions(summary: &SnrSummary, num_devices: usize) -> TheoremConditions {
    let cond40 = summary.delta <= 1.0;
    match relay_snr_threshold(summary, num_devices) {
        Some(threshold) => TheoremConditions {
            cond40,
            cond41: summary.snr_relay_ap >= threshold,
            threshold_undefined: false,
        },
        None => TheoremConditions {
            cond40,
            cond41: false,
            threshold_undefined: true,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionCase {
    /// `alpha = alpha_bar < 1/2`: the relay power budget binds `eta`.
    RelayLimited,
    /// `alpha = 1/2`: the direct-link budget binds `eta`.
    DirectLimited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticConstruction {
    /// Share of the target carried through the relay.
    pub alpha: f64,
    /// Share carried by the direct phase-two transmission, `1 - alpha`.
    pub beta: f64,
    /// `|c2|^2 |b|^2`
    pub gamma: f64,
    /// `|c2|^2`
    pub eta: f64,
    pub alpha_bar: f64,
    pub config: TransceiverConfig,
    /// `(eta + gamma |f|^2) sigma2`
    pub mse: f64,
    pub case: ConstructionCase,
}

/// Largest relay share for which the direct-link budget still binds `eta`:
/// `1 / (1 + phi)` with `phi^2 = (K min SNR_k + delta) / SNR_relay-AP`.
pub fn alpha_bar(summary: &SnrSummary, num_devices: usize) -> f64 {
    let phi = ((num_devices as f64 * summary.min_snr_device_ap() + summary.delta) / summary.snr_relay_ap).sqrt();
    1.0 / (1.0 + phi)
}

/// Perfectly aligned `c1 = 0` transceiver: the relay path carries `alpha rho`
/// and the direct phase-two path carries `beta rho` for every device, with
/// the smallest receive gains the power budgets allow.
///
/// `alpha = min(1/2, alpha_bar)`. The same rule is applied when the
/// conditions fail; the result is then still feasible but carries no
/// guarantee against the relay-free scheme.
pub fn analytic_construction(
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
) -> Result<AnalyticConstruction> {
    require_single_relay(channels)?;
    let k_count = channels.num_devices();
    if weights.len() != k_count {
        return Err(Error::DimensionMismatch(format!("{k_count} devices, {} weights", weights.len())));
    }
    let rho = 1.0 / k_count as f64;
    if weights.as_slice().iter().any(|r| (r - rho).abs() > 1e-12) {
        return Err(Error::Domain("the construction assumes uniform weights".into()));
    }
    let f = channels.f[0];
    let g: Vec<Complex64> = (0..k_count).map(|k| channels.g(k, 0)).collect();
    if f.norm() == 0.0 || g.iter().chain(&channels.h).any(|v| v.norm() == 0.0) {
        return Err(Error::SingularChannel("the construction needs every link nonzero".into()));
    }
    let summary = snr_summary(channels, budget)?;
    let (p0, pr, sigma2) = (budget.p0, budget.pr, budget.sigma2);
    let f2 = f.norm_sqr();
    let inv_g_max = g.iter().map(|v| 1.0 / v.norm_sqr()).fold(0.0, f64::max);
    let inv_h_max = channels.h.iter().map(|v| 1.0 / v.norm_sqr()).fold(0.0, f64::max);

    let alpha_bar = alpha_bar(&summary, k_count);
    let (alpha, case) = if alpha_bar < 0.5 {
        (alpha_bar, ConstructionCase::RelayLimited)
    } else {
        (0.5, ConstructionCase::DirectLimited)
    };
    let beta = 1.0 - alpha;
    let gamma = alpha * alpha * rho * rho / (p0 * f2) * inv_g_max;
    let direct_floor = beta * beta * rho * rho / p0 * inv_h_max;
    let relay_floor = (k_count as f64 * alpha * alpha * rho * rho + gamma * sigma2 * f2) / (pr * f2);
    let eta = direct_floor.max(relay_floor);

    let c2 = Complex64::new(eta.sqrt(), 0.0);
    let b = Complex64::from_polar((gamma / eta).sqrt(), -f.arg());
    let a1 = g.iter().map(|gk| alpha * rho / (c2 * f * b * gk)).collect();
    let a2 = channels.h.iter().map(|hk| beta * rho / (c2 * hk)).collect();
    let config = TransceiverConfig {
        a1,
        a2,
        b: vec![b],
        c1: Complex64::new(0.0, 0.0),
        c2,
    };
    Ok(AnalyticConstruction {
        alpha,
        beta,
        gamma,
        eta,
        alpha_bar,
        config,
        mse: (eta + gamma * f2) * sigma2,
        case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{effective_gains, norelay_optimum, relay_mse, relay_power_used};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn channels_from_gains(h2: &[f64], g2: &[f64], f2: f64) -> ChannelRealization {
        ChannelRealization::new(
            h2.iter().map(|v| real(v.sqrt())).collect(),
            g2.iter().map(|v| real(v.sqrt())).collect(),
            vec![real(f2.sqrt())],
        )
        .unwrap()
    }

    #[test]
    fn summary_hand_example() {
        let ch = channels_from_gains(&[1.0, 4.0], &[2.0, 8.0], 1.0);
        let s = snr_summary(&ch, &PowerBudget::new(1.0, 4.0, 1.0).unwrap()).unwrap();
        assert_eq!(s.snr_device_ap, vec![1.0, 4.0]);
        assert!((s.snr_device_relay[0] - 2.0).abs() < 1e-12 && (s.snr_device_relay[1] - 8.0).abs() < 1e-12);
        assert!((s.snr_relay_ap - 4.0).abs() < 1e-12);
        assert!((s.delta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn equal_links_give_unit_delta_and_scaling_keeps_it() {
        let ch = channels_from_gains(&[0.3, 0.7], &[0.3, 0.7], 2.0);
        let budget = PowerBudget::new(0.5, 1.0, 0.1).unwrap();
        assert!((snr_summary(&ch, &budget).unwrap().delta - 1.0).abs() < 1e-12);
        let a = snr_summary(&channels_from_gains(&[0.3, 0.9], &[0.5, 0.6], 1.0), &budget).unwrap();
        let b = snr_summary(&channels_from_gains(&[3.0, 9.0], &[5.0, 6.0], 1.0), &budget).unwrap();
        assert!((a.delta - b.delta).abs() < 1e-12);
    }

    #[test]
    fn summary_rejects_wrong_relay_count_and_dead_relay_link() {
        let budget = PowerBudget::new(1.0, 1.0, 1.0).unwrap();
        let none = ChannelRealization::direct_only(vec![real(1.0)]);
        assert!(snr_summary(&none, &budget).is_err());
        let dead = ChannelRealization::new(vec![real(1.0)], vec![real(0.0)], vec![real(1.0)]).unwrap();
        assert!(matches!(snr_summary(&dead, &budget), Err(Error::Domain(_))));
    }

    fn summary(min_snr: f64, delta: f64, relay_ap: f64, k: usize) -> SnrSummary {
        SnrSummary {
            snr_device_ap: vec![min_snr; k],
            snr_device_relay: vec![min_snr / delta.max(1e-300); k],
            snr_relay_ap: relay_ap,
            delta,
        }
    }

    #[test]
    fn condition_thresholds() {
        // delta = 1 collapses the threshold to K min SNR + 1
        let s = summary(10.0, 1.0, 201.0, 20);
        assert!((relay_snr_threshold(&s, 20).unwrap() - 201.0).abs() < 1e-12);
        assert!(check_theorem_conditions(&s, 20).both());
        assert!(!check_theorem_conditions(&summary(10.0, 1.0, 200.999, 20), 20).cond41);
        // delta = 0
        let s = summary(3.0, 0.0, 1.0, 4);
        let expected = 12.0 / (1.0 + 2f64.sqrt()).powi(2);
        assert!((relay_snr_threshold(&s, 4).unwrap() - expected).abs() < 1e-12);
        // delta > 1
        let c = check_theorem_conditions(&summary(3.0, 1.5, 1e9, 4), 4);
        assert!(!c.cond40 && !c.cond41 && c.threshold_undefined);
    }

    #[test]
    fn symmetric_hand_instance() {
        let ch = channels_from_gains(&[1.0], &[1.0], 1.0);
        let budget = PowerBudget::new(1.0, 1.0, 1.0).unwrap();
        let w = DeviceWeights::uniform(1);
        let s = snr_summary(&ch, &budget).unwrap();
        assert!((s.delta - 1.0).abs() < 1e-15);
        let out = analytic_construction(&ch, &w, &budget).unwrap();
        // phi^2 = (1 + 1) / 1
        assert!((out.alpha_bar - 1.0 / (1.0 + 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(out.case, ConstructionCase::RelayLimited);
        let a = out.alpha;
        let gamma = a * a;
        let eta = (a * a + gamma).max((1.0 - a).powi(2));
        assert!((out.gamma - gamma).abs() < 1e-15 && (out.eta - eta).abs() < 1e-15);
        assert!((out.mse - (eta + gamma)).abs() < 1e-15);
        let check = relay_mse(&out.config, &ch, &w, 1.0);
        assert!((check - out.mse).abs() <= 1e-9 * out.mse);
    }

    fn random_instance<R: Rng>(rng: &mut R) -> (ChannelRealization, PowerBudget) {
        let k = rng.random_range(1..12);
        let cn = |rng: &mut R, s: f64| crate::channel::sample_small_scale(rng) * s;
        let hs = 10f64.powf(rng.random_range(-2.0..0.0));
        let gs = 10f64.powf(rng.random_range(-1.0..1.0));
        let fs = 10f64.powf(rng.random_range(-1.0..1.5));
        let h = (0..k).map(|_| cn(rng, hs)).collect();
        let g = (0..k).map(|_| cn(rng, gs)).collect();
        let f = vec![cn(rng, fs)];
        let budget = PowerBudget::new(rng.random_range(0.01..1.0), rng.random_range(0.01..2.0), rng.random_range(1e-3..1.0)).unwrap();
        (ChannelRealization::new(h, g, f).unwrap(), budget)
    }

    #[test]
    fn construction_is_aligned_feasible_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..2000 {
            let (ch, budget) = random_instance(&mut rng);
            let k = ch.num_devices();
            let w = DeviceWeights::uniform(k);
            let out = analytic_construction(&ch, &w, &budget).unwrap();
            assert!((out.alpha + out.beta - 1.0).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&out.alpha));
            for e in effective_gains(&out.config, &ch) {
                assert!((e - 1.0 / k as f64).norm() < 1e-10);
            }
            let v = out.config.max_violation(&ch, budget.p0, budget.p0, budget.pr, budget.sigma2);
            assert!(v <= 1e-9, "violation {v}");
            let check = relay_mse(&out.config, &ch, &w, budget.sigma2);
            assert!((check - out.mse).abs() <= 1e-9 * out.mse, "{check} vs {}", out.mse);
        }
    }

    #[test]
    fn eta_branches_meet_at_alpha_bar() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..500 {
            let (ch, budget) = random_instance(&mut rng);
            let k = ch.num_devices();
            let s = snr_summary(&ch, &budget).unwrap();
            let a = alpha_bar(&s, k);
            let rho = 1.0 / k as f64;
            let f2 = ch.f[0].norm_sqr();
            let inv_g = (0..k).map(|i| 1.0 / ch.g(i, 0).norm_sqr()).fold(0.0, f64::max);
            let inv_h = ch.h.iter().map(|v| 1.0 / v.norm_sqr()).fold(0.0, f64::max);
            let gamma = a * a * rho * rho / (budget.p0 * f2) * inv_g;
            let direct = (1.0 - a).powi(2) * rho * rho / budget.p0 * inv_h;
            let relay = (k as f64 * a * a * rho * rho + gamma * budget.sigma2 * f2) / (budget.pr * f2);
            assert!((direct - relay).abs() <= 1e-9 * direct.max(relay));
        }
    }

    #[test]
    fn phi_identity_matches_alpha_bar_definition() {
        // alpha_bar written with raw gains equals 1 / (1 + phi) in SNR form
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let (ch, budget) = random_instance(&mut rng);
            let k = ch.num_devices();
            let s = snr_summary(&ch, &budget).unwrap();
            let g_min = (0..k).map(|i| ch.g(i, 0).norm_sqr()).fold(f64::INFINITY, f64::min);
            let h_min = ch.h.iter().map(|v| v.norm_sqr()).fold(f64::INFINITY, f64::min);
            let raw = (k as f64 * budget.p0 * g_min + budget.sigma2) * h_min / (budget.pr * ch.f[0].norm_sqr() * g_min);
            let direct = 1.0 / (1.0 + raw.sqrt());
            assert!((direct - alpha_bar(&s, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn certified_dominance_when_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut certified = 0;
        while certified < 1000 {
            let (ch, budget) = random_instance(&mut rng);
            let k = ch.num_devices();
            let s = snr_summary(&ch, &budget).unwrap();
            if !check_theorem_conditions(&s, k).both() {
                continue;
            }
            certified += 1;
            let w = DeviceWeights::uniform(k);
            let out = analytic_construction(&ch, &w, &budget).unwrap();
            let base = norelay_optimum(&ch.h, &w, 2.0 * budget.p0, budget.sigma2).unwrap().mse;
            assert!(out.mse <= base * (1.0 + 1e-12), "{} > {base}", out.mse);
        }
    }

    #[test]
    fn relay_budget_binds_in_relay_limited_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let mut seen = 0;
        for _ in 0..500 {
            let (ch, budget) = random_instance(&mut rng);
            let out = analytic_construction(&ch, &DeviceWeights::uniform(ch.num_devices()), &budget).unwrap();
            if out.case == ConstructionCase::RelayLimited {
                seen += 1;
                let used = relay_power_used(&out.config, &ch, budget.sigma2)[0];
                assert!((used - budget.pr).abs() <= 1e-9 * budget.pr);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn construction_rejects_nonuniform_weights() {
        let ch = channels_from_gains(&[1.0, 1.0], &[1.0, 1.0], 1.0);
        let w = DeviceWeights::new(vec![0.3, 0.7]).unwrap();
        assert!(analytic_construction(&ch, &w, &PowerBudget::new(1.0, 1.0, 1.0).unwrap()).is_err());
    }
}
