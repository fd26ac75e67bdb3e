//! Symbol normalization, the relay-free aggregation baseline, and the
//! two-phase amplify-and-forward signal chain with its analytic MSE.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{sample_small_scale, ChannelRealization};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Aggregation weights `rho_k = D_k / D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceWeights(Vec<f64>);

impl DeviceWeights {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::Domain("need at least one device weight".into()));
        }
        if rho.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Domain(format!("weights must be positive, got {rho:?}")));
        }
        let total: f64 = rho.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights must sum to 1, got {total}")));
        }
        Ok(Self(rho))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    /// Weights proportional to local dataset sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if total == 0 || sizes.contains(&0) {
            return Err(Error::Domain(format!("dataset sizes must be positive, got {sizes:?}")));
        }
        let mut rho: Vec<f64> = sizes.iter().map(|&s| s as f64 / total as f64).collect();
        // absorb rounding so the sum is 1 to machine precision
        let drift = 1.0 - rho.iter().sum::<f64>();
        rho[0] += drift;
        Self::new(rho)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `P_0` is the per-device budget of each relay phase, `P_r` the per-relay
/// budget and `sigma2` the receiver noise power, all in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    pub p0: f64,
    pub pr: f64,
    pub sigma2: f64,
}

impl PowerBudget {
    pub fn new(p0: f64, pr: f64, sigma2: f64) -> Result<Self> {
        let budget = Self { p0, pr, sigma2 };
        if !(p0 > 0.0 && pr > 0.0 && sigma2 > 0.0) {
            return Err(Error::Domain(format!("power budget entries must be positive: {budget:?}")));
        }
        Ok(budget)
    }
}

/// Transmit scalars of devices (`a1`, `a2`) and relays (`b`) and the AP's two
/// receive scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverConfig {
    pub a1: Vec<Complex64>,
    pub a2: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub c1: Complex64,
    pub c2: Complex64,
}

impl TransceiverConfig {
    pub fn zeros(num_devices: usize, num_relays: usize) -> Self {
        Self {
            a1: vec![ZERO; num_devices],
            a2: vec![ZERO; num_devices],
            b: vec![ZERO; num_relays],
            c1: ZERO,
            c2: ZERO,
        }
    }

    /// The single-phase relay-free scheme written as a two-phase config:
    /// only phase one carries signal and only `c1` is used.
    pub fn direct(a: Vec<Complex64>, c: Complex64, num_relays: usize) -> Self {
        let k = a.len();
        Self {
            a1: a,
            a2: vec![ZERO; k],
            b: vec![ZERO; num_relays],
            c1: c,
            c2: ZERO,
        }
    }

    /// Largest relative constraint violation; `<= 0` means feasible.
    ///
    /// `phase1_cap` and `phase2_cap` bound `|a1_k|^2` and `|a2_k|^2`.
    pub fn max_violation(
        &self,
        channels: &ChannelRealization,
        phase1_cap: f64,
        phase2_cap: f64,
        pr: f64,
        sigma2: f64,
    ) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..self.a1.len() {
            worst = worst.max((self.a1[k].norm_sqr() - phase1_cap) / phase1_cap);
            worst = worst.max((self.a2[k].norm_sqr() - phase2_cap) / phase2_cap);
        }
        for used in relay_power_used(self, channels, sigma2) {
            worst = worst.max((used - pr) / pr);
        }
        worst
    }
}

/// Per-device mean and population variance (divisor `d`).
pub fn compute_local_stats(delta: &[f64]) -> Result<(f64, f64)> {
    if delta.is_empty() {
        return Err(Error::Domain("local update must have at least one entry".into()));
    }
    let d = delta.len() as f64;
    let mean = delta.iter().sum::<f64>() / d;
    let var = delta.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d;
    Ok((mean, var))
}

/// Weighted global mean and variance from per-device `(mean, var)` pairs.
pub fn compute_global_stats(local: &[(f64, f64)], weights: &DeviceWeights) -> Result<(f64, f64)> {
    if local.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} local statistics for {} weights",
            local.len(),
            weights.len()
        )));
    }
    let rho = weights.as_slice();
    let mean = local.iter().zip(rho).map(|((m, _), r)| r * m).sum();
    let var = local.iter().zip(rho).map(|((_, v), r)| r * v).sum();
    Ok((mean, var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub local_means: Vec<f64>,
    pub local_vars: Vec<f64>,
    pub global_mean: f64,
    pub global_var: f64,
}

impl NormalizationStats {
    pub fn from_updates(deltas: &[Vec<f64>], weights: &DeviceWeights) -> Result<Self> {
        let local = deltas
            .iter()
            .map(|d| compute_local_stats(d))
            .collect::<Result<Vec<_>>>()?;
        let (global_mean, global_var) = compute_global_stats(&local, weights)?;
        Ok(Self {
            local_means: local.iter().map(|l| l.0).collect(),
            local_vars: local.iter().map(|l| l.1).collect(),
            global_mean,
            global_var,
        })
    }

    pub fn global_std(&self) -> f64 {
        self.global_var.sqrt()
    }
}

/// Maps an update onto zero-mean symbols: `(delta - mean) / std`.
pub fn normalize(delta: &[f64], global_mean: f64, global_std: f64) -> Result<Vec<f64>> {
    if !(global_std > 0.0) {
        return Err(Error::DegenerateUpdate(global_std));
    }
    Ok(delta.iter().map(|x| (x - global_mean) / global_std).collect())
}

pub fn denormalize(x_hat: f64, global_mean: f64, global_std: f64) -> f64 {
    global_std * x_hat + global_mean
}

/// Signal-aligned transceiver for the single-phase scheme without relays.
#[derive(Debug, Clone, PartialEq)]
pub struct NoRelaySolution {
    pub a: Vec<Complex64>,
    pub c: Complex64,
    pub mse: f64,
}

/// Channel-inversion optimum of the relay-free scheme.
///
/// `p0_total` is the whole per-device budget of the single phase (twice the
/// per-phase budget of the relay schemes). The receive scalar is real
/// positive and each `a_k` absorbs its channel phase, so `c h_k a_k = rho_k`.
pub fn norelay_optimum(
    h: &[Complex64],
    weights: &DeviceWeights,
    p0_total: f64,
    sigma2: f64,
) -> Result<NoRelaySolution> {
    if h.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} channels for {} weights",
            h.len(),
            weights.len()
        )));
    }
    if let Some(k) = h.iter().position(|hk| hk.norm() == 0.0) {
        return Err(Error::SingularChannel(format!("device {k} has a zero direct channel")));
    }
    let rho = weights.as_slice();
    let worst = rho
        .iter()
        .zip(h)
        .map(|(r, hk)| r / hk.norm())
        .fold(0.0_f64, f64::max);
    let c = worst / p0_total.sqrt();
    let a = rho.iter().zip(h).map(|(r, hk)| *r / (c * hk)).collect();
    let mse = sigma2 / p0_total * worst * worst;
    Ok(NoRelaySolution {
        a,
        c: Complex64::new(c, 0.0),
        mse,
    })
}

/// `sum_n f_n b_n g_{k,n}` for every device.
pub fn relay_path_gains(b: &[Complex64], channels: &ChannelRealization) -> Vec<Complex64> {
    (0..channels.num_devices())
        .map(|k| {
            channels
                .g_row(k)
                .iter()
                .zip(&channels.f)
                .zip(b)
                .map(|((g, f), b)| f * b * g)
                .sum()
        })
        .collect()
}

/// Composite end-to-end coefficient of each device:
/// `c1 h_k a1_k + c2 h_k a2_k + c2 a1_k sum_n f_n b_n g_{k,n}`.
pub fn effective_gains(config: &TransceiverConfig, channels: &ChannelRealization) -> Vec<Complex64> {
    relay_path_gains(&config.b, channels)
        .into_iter()
        .enumerate()
        .map(|(k, relay)| {
            let h = channels.h[k];
            config.c1 * h * config.a1[k] + config.c2 * h * config.a2[k] + config.c2 * config.a1[k] * relay
        })
        .collect()
}

/// Effective noise power at the AP after combining both phases.
pub fn combined_noise_power(config: &TransceiverConfig, channels: &ChannelRealization, sigma2: f64) -> f64 {
    let relay: f64 = channels
        .f
        .iter()
        .zip(&config.b)
        .map(|(f, b)| f.norm_sqr() * b.norm_sqr())
        .sum();
    (config.c1.norm_sqr() + config.c2.norm_sqr() * (1.0 + relay)) * sigma2
}

/// Analytic MSE of the two-phase estimate: misalignment plus noise.
pub fn relay_mse(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    sigma2: f64,
) -> f64 {
    let misalignment: f64 = effective_gains(config, channels)
        .iter()
        .zip(weights.as_slice())
        .map(|(e, r)| (e - r).norm_sqr())
        .sum();
    misalignment + combined_noise_power(config, channels, sigma2)
}

/// Left-hand side of each relay's power constraint:
/// `|b_n|^2 (sum_k |g_{k,n}|^2 |a1_k|^2 + sigma2)`.
pub fn relay_power_used(config: &TransceiverConfig, channels: &ChannelRealization, sigma2: f64) -> Vec<f64> {
    (0..channels.num_relays())
        .map(|n| {
            let received: f64 = (0..channels.num_devices())
                .map(|k| channels.g(k, n).norm_sqr() * config.a1[k].norm_sqr())
                .sum();
            config.b[n].norm_sqr() * (received + sigma2)
        })
        .collect()
}

/// Symbol-level simulation of one round of two-phase transmission.
///
/// `symbols[k]` holds device `k`'s `d` symbols. Every receive point (each
/// relay, the AP in phase one, the AP in phase two) adds fresh `CN(0, sigma2)`
/// noise per symbol. Returns the complex combined estimate `c1 y1 + c2 y2`
/// for each symbol; the AP uses its real part since the symbols are real.
pub fn simulate_round<R: Rng + ?Sized>(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    symbols: &[Vec<f64>],
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let k_count = channels.num_devices();
    let n_count = channels.num_relays();
    if symbols.len() != k_count || config.a1.len() != k_count || config.b.len() != n_count {
        return Err(Error::DimensionMismatch(format!(
            "{} symbol streams, {} devices, {} relay gains for {} relays",
            symbols.len(),
            k_count,
            config.b.len(),
            n_count
        )));
    }
    let d = symbols.first().map_or(0, Vec::len);
    if symbols.iter().any(|s| s.len() != d) {
        return Err(Error::DimensionMismatch("symbol streams differ in length".into()));
    }
    let std = sigma2.sqrt();
    let mut out = Vec::with_capacity(d);
    let mut relay_rx = vec![ZERO; n_count];
    for i in 0..d {
        for (n, rx) in relay_rx.iter_mut().enumerate() {
            let signal: Complex64 = (0..k_count)
                .map(|k| channels.g(k, n) * config.a1[k] * symbols[k][i])
                .sum();
            *rx = signal + std * sample_small_scale(rng);
        }
        let y1: Complex64 = (0..k_count)
            .map(|k| channels.h[k] * config.a1[k] * symbols[k][i])
            .sum::<Complex64>()
            + std * sample_small_scale(rng);
        let forwarded: Complex64 = (0..n_count).map(|n| channels.f[n] * config.b[n] * relay_rx[n]).sum();
        let direct: Complex64 = (0..k_count)
            .map(|k| channels.h[k] * config.a2[k] * symbols[k][i])
            .sum();
        let y2 = forwarded + direct + std * sample_small_scale(rng);
        out.push(config.c1 * y1 + config.c2 * y2);
    }
    Ok(out)
}
