//! Alternating minimization of the two-phase aggregation MSE.
//!
//! Each sweep updates, in order, the device transmit scalars (a convex QCQP,
//! see [`qcqp`]), the relay amplification gains, and the two receive scalars
//! at the AP. The receive scalars and, for one relay, the relay gains have
//! closed forms. Every block update is accepted only if it does not raise
//! [`relay_mse`], so the objective trace is non-increasing.

pub mod qcqp;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    norelay_optimum, relay_mse, relay_path_gains, DeviceWeights, PowerBudget, TransceiverConfig,
};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use qcqp::DeviceProblem;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub j_max: usize,
    pub epsilon: f64,
    pub qcqp_tol: f64,
    pub qcqp_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            j_max: 100,
            epsilon: 1e-4,
            qcqp_tol: 1e-8,
            qcqp_max_iter: 2000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j_max == 0 || self.qcqp_max_iter == 0 || !(self.epsilon > 0.0) || !(self.qcqp_tol > 0.0) {
            return Err(Error::Domain(format!("solver settings must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Which two-phase design is being optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeVariant {
    /// Devices transmit in both phases, the AP listens in both.
    Full,
    /// Devices transmit only in phase one (with the whole budget `2 P_0`),
    /// the AP listens only in phase two.
    RelayOnly,
    /// Single-phase channel inversion without relays.
    NoRelaySinglePhase,
}

impl SchemeVariant {
    fn phase1_cap(self, budget: &PowerBudget) -> f64 {
        match self {
            SchemeVariant::RelayOnly => 2.0 * budget.p0,
            _ => budget.p0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverWarning {
    /// The QCQP subsolver hit its iteration cap in this sweep.
    DeviceUpdateNotConverged { sweep: usize },
    /// `c2 = 0`, so the relay update was skipped in this sweep.
    RelayUpdateSkipped { sweep: usize },
    /// The relay normal equations were singular; a pseudo-inverse was used.
    RelayUpdateSingular { sweep: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    /// MSE after initialization followed by the MSE after every sweep.
    pub objectives: Vec<f64>,
    pub iterations_run: usize,
    pub terminated_by: Termination,
    pub warnings: Vec<SolverWarning>,
}

impl SolverTrace {
    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("trace always holds the initial objective")
    }
}

fn check_dims(channels: &ChannelRealization, weights: &DeviceWeights) -> Result<()> {
    if channels.num_devices() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} devices in the channel, {} weights",
            channels.num_devices(),
            weights.len()
        )));
    }
    Ok(())
}

fn max_rho_over_gain(rho: &[f64], gains: &[Complex64], what: &str) -> Result<f64> {
    if let Some(k) = gains.iter().position(|g| g.norm() == 0.0) {
        return Err(Error::SingularChannel(format!("device {k} has a zero {what} channel")));
    }
    Ok(rho.iter().zip(gains).map(|(r, g)| r / g.norm()).fold(0.0, f64::max))
}

/// Relay gains that make every relay power constraint active, with zero phase.
fn active_relay_gains(a1: &[Complex64], channels: &ChannelRealization, budget: &PowerBudget) -> Vec<Complex64> {
    (0..channels.num_relays())
        .map(|n| {
            let received: f64 = (0..channels.num_devices())
                .map(|k| channels.g(k, n).norm_sqr() * a1[k].norm_sqr())
                .sum();
            Complex64::new((budget.pr / (received + budget.sigma2)).sqrt(), 0.0)
        })
        .collect()
}

/// Channel-inversion starting point for the full two-phase scheme.
///
/// `a1 = a2 = sqrt(P_0) rho_k / (h_k max_j rho_j/|h_j|)`, relay gains with
/// active power constraints, `c1 = c2 = max_j rho_j/|h_j| / (2 sqrt(P_0))`.
pub fn init_config(
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
) -> Result<TransceiverConfig> {
    check_dims(channels, weights)?;
    let rho = weights.as_slice();
    let worst = max_rho_over_gain(rho, &channels.h, "direct")?;
    let sqrt_p0 = budget.p0.sqrt();
    let a: Vec<Complex64> = rho
        .iter()
        .zip(&channels.h)
        .map(|(r, h)| sqrt_p0 * r / (h * worst))
        .collect();
    let b = active_relay_gains(&a, channels, budget);
    let c = Complex64::new(worst / (2.0 * sqrt_p0), 0.0);
    Ok(TransceiverConfig {
        a1: a.clone(),
        a2: a,
        b,
        c1: c,
        c2: c,
    })
}

/// Starting point for the relay-only baseline: phase-one scalars invert the
/// unit-gain relay path `q_k = sum_n f_n g_{k,n}` with budget `2 P_0`, relay
/// gains are active, `c1 = 0`, and `c2` takes its closed-form optimum.
pub fn init_relay_only(
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
) -> Result<TransceiverConfig> {
    check_dims(channels, weights)?;
    if channels.num_relays() == 0 {
        return Err(Error::Domain("the relay-only scheme needs at least one relay".into()));
    }
    let rho = weights.as_slice();
    let unit = vec![Complex64::new(1.0, 0.0); channels.num_relays()];
    let q = relay_path_gains(&unit, channels);
    let worst = max_rho_over_gain(rho, &q, "relay-path")?;
    let cap = (2.0 * budget.p0).sqrt();
    let a1: Vec<Complex64> = rho.iter().zip(&q).map(|(r, qk)| cap * r / (qk * worst)).collect();
    let b = active_relay_gains(&a1, channels, budget);
    let mut config = TransceiverConfig {
        a2: vec![ZERO; a1.len()],
        a1,
        b,
        c1: ZERO,
        c2: ZERO,
    };
    config.c2 = update_c2(&config, channels, weights, budget.sigma2);
    Ok(config)
}

/// Per-device coefficients of the device subproblem:
/// `theta_k = c1 h_k + c2 sum_n f_n b_n g_{k,n}` and `phi_k = c2 h_k`.
pub fn device_coefficients(config: &TransceiverConfig, channels: &ChannelRealization) -> (Vec<Complex64>, Vec<Complex64>) {
    let relay = relay_path_gains(&config.b, channels);
    let theta = channels
        .h
        .iter()
        .zip(&relay)
        .map(|(h, r)| config.c1 * h + config.c2 * r)
        .collect();
    let phi = channels.h.iter().map(|h| config.c2 * h).collect();
    (theta, phi)
}

fn device_problem(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
    variant: SchemeVariant,
) -> DeviceProblem {
    let (theta, phi) = device_coefficients(config, channels);
    let relay_weights = (0..channels.num_relays())
        .map(|n| {
            let b2 = config.b[n].norm_sqr();
            (0..channels.num_devices()).map(|k| b2 * channels.g(k, n).norm_sqr()).collect()
        })
        .collect();
    let relay_caps = config
        .b
        .iter()
        .map(|b| (budget.pr - b.norm_sqr() * budget.sigma2).max(0.0))
        .collect();
    DeviceProblem {
        theta,
        phi,
        rho: weights.as_slice().to_vec(),
        cap1: variant.phase1_cap(budget),
        cap2: budget.p0,
        relay_weights,
        relay_caps,
        a2_fixed_zero: variant == SchemeVariant::RelayOnly,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceUpdate {
    pub a1: Vec<Complex64>,
    pub a2: Vec<Complex64>,
    /// Projected-gradient residual at the returned point, relative to `|rho|`.
    pub residual: f64,
    pub iterations: usize,
    /// False when the subsolver stopped at `qcqp_max_iter`; the returned
    /// point is then the best feasible iterate.
    pub converged: bool,
}

/// Optimal device scalars for fixed `b`, `c1`, `c2` (full scheme).
pub fn update_device_scalars(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
    solver: &SolverConfig,
) -> DeviceUpdate {
    update_device_scalars_for(config, channels, weights, budget, solver, SchemeVariant::Full)
}

pub fn update_device_scalars_for(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
    solver: &SolverConfig,
    variant: SchemeVariant,
) -> DeviceUpdate {
    let problem = device_problem(config, channels, weights, budget, variant);
    let sol = problem.solve(&config.a1, &config.a2, solver.qcqp_tol, solver.qcqp_max_iter);
    DeviceUpdate {
        a1: sol.a1,
        a2: sol.a2,
        residual: sol.residual,
        iterations: sol.iterations,
        converged: sol.converged,
    }
}

/// Radial projection of a relay gain onto `|b| <= sqrt(cap)`.
pub fn project_relay_gain(b: Complex64, cap: f64) -> Complex64 {
    let radius = cap.sqrt();
    let n = b.norm();
    if n > radius {
        b / n * radius
    } else {
        b
    }
}

/// Per-relay gain caps `P_r / (sum_k |g_{k,n}|^2 |a1_k|^2 + sigma2)`.
pub fn relay_gain_caps(config: &TransceiverConfig, channels: &ChannelRealization, budget: &PowerBudget) -> Vec<f64> {
    (0..channels.num_relays())
        .map(|n| {
            let received: f64 = (0..channels.num_devices())
                .map(|k| channels.g(k, n).norm_sqr() * config.a1[k].norm_sqr())
                .sum();
            budget.pr / (received + budget.sigma2)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayUpdate {
    pub b: Vec<Complex64>,
    /// The unconstrained stationary point before projection.
    pub unconstrained: Vec<Complex64>,
    /// The normal equations were singular and a pseudo-inverse was used.
    pub singular: bool,
    /// More than one relay hit its cap and the projected closed form was
    /// refined by projected gradient on the exact box-constrained problem.
    pub refined: bool,
}

/// Relay gains minimizing the MSE for fixed device and receive scalars.
///
/// Solves `c2 (sum_k |a1_k|^2 conj(g_k) g_k^T + sigma2 I) diag(f) b =
/// sum_k (rho_k - h_k (c1 a1_k + c2 a2_k)) conj(a1_k g_k)` and clips each
/// entry to its power cap. With one relay (or no active cap) that is the
/// constrained optimum. With several relays and an active cap the clipped
/// point is only a starting guess, so it is polished by projected gradient
/// on the same quadratic.
///
/// Requires `c2 != 0`.
pub fn update_relay_scalars(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
) -> Result<RelayUpdate> {
    let n_count = channels.num_relays();
    if n_count == 0 {
        return Ok(RelayUpdate {
            b: vec![],
            unconstrained: vec![],
            singular: false,
            refined: false,
        });
    }
    if config.c2.norm() == 0.0 {
        return Err(Error::Domain("relay update needs a nonzero phase-two receive scalar".into()));
    }
    let k_count = channels.num_devices();
    let rho = weights.as_slice();
    let sigma2 = budget.sigma2;

    let mut gram = DMatrix::<Complex64>::zeros(n_count, n_count);
    let mut rhs = DVector::<Complex64>::zeros(n_count);
    for k in 0..k_count {
        let a1 = config.a1[k];
        let p = a1.norm_sqr();
        let g = channels.g_row(k);
        let target = rho[k] - channels.h[k] * (config.c1 * a1 + config.c2 * config.a2[k]);
        for i in 0..n_count {
            rhs[i] += target * (a1 * g[i]).conj();
            for j in 0..n_count {
                gram[(i, j)] += p * g[i].conj() * g[j];
            }
        }
    }
    let mut system = gram;
    for i in 0..n_count {
        system[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    for j in 0..n_count {
        let scale = config.c2 * channels.f[j];
        for i in 0..n_count {
            system[(i, j)] *= scale;
        }
    }

    let (unconstrained, singular) = match system.clone().lu().solve(&rhs) {
        Some(sol) if sol.iter().all(|v| v.re.is_finite() && v.im.is_finite()) => (sol, false),
        _ => (relay_pseudo_inverse_solution(config, channels, weights, budget), true),
    };
    let unconstrained: Vec<Complex64> = unconstrained.iter().copied().collect();

    let caps = relay_gain_caps(config, channels, budget);
    let projected: Vec<Complex64> = unconstrained
        .iter()
        .zip(&caps)
        .map(|(&b, &cap)| project_relay_gain(b, cap))
        .collect();
    let clipped = projected.iter().zip(&unconstrained).any(|(p, u)| p != u);

    if n_count > 1 && (clipped || singular) {
        let refined = refine_relay_gains(config, channels, weights, budget, &projected, &caps);
        return Ok(RelayUpdate {
            b: refined,
            unconstrained,
            singular,
            refined: true,
        });
    }
    Ok(RelayUpdate {
        b: projected,
        unconstrained,
        singular,
        refined: false,
    })
}

/// Quadratic model of the MSE in `b`: `|U b + e0|^2 + b^H D b` with
/// `U[k, n] = c2 a1_k g_{k,n} f_n` and `D = |c2|^2 sigma2 diag(|f|^2)`.
struct RelayQuadratic {
    hessian: DMatrix<Complex64>,
    linear: DVector<Complex64>,
}

impl RelayQuadratic {
    fn new(config: &TransceiverConfig, channels: &ChannelRealization, weights: &DeviceWeights, sigma2: f64) -> Self {
        let n_count = channels.num_relays();
        let k_count = channels.num_devices();
        let rho = weights.as_slice();
        let u = DMatrix::<Complex64>::from_fn(k_count, n_count, |k, n| {
            config.c2 * config.a1[k] * channels.g(k, n) * channels.f[n]
        });
        let e0 = DVector::<Complex64>::from_fn(k_count, |k, _| {
            channels.h[k] * (config.c1 * config.a1[k] + config.c2 * config.a2[k]) - rho[k]
        });
        let mut hessian = u.adjoint() * &u;
        for n in 0..n_count {
            hessian[(n, n)] += config.c2.norm_sqr() * sigma2 * channels.f[n].norm_sqr();
        }
        let linear = u.adjoint() * e0;
        Self { hessian, linear }
    }

    /// Objective up to a constant: `b^H H b + 2 Re(b^H l)`.
    fn value(&self, b: &DVector<Complex64>) -> f64 {
        let hb = &self.hessian * b;
        (b.dotc(&hb)).re + 2.0 * b.dotc(&self.linear).re
    }
}

fn relay_pseudo_inverse_solution(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
) -> DVector<Complex64> {
    let quad = RelayQuadratic::new(config, channels, weights, budget.sigma2);
    let rhs = -quad.linear.clone();
    let svd = quad.hessian.clone().svd(true, true);
    let tol = svd.singular_values.max() * 1e-12;
    svd.solve(&rhs, tol)
        .unwrap_or_else(|_| DVector::zeros(channels.num_relays()))
}

/// Accelerated projected gradient on the box-constrained relay quadratic.
fn refine_relay_gains(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
    start: &[Complex64],
    caps: &[f64],
) -> Vec<Complex64> {
    let quad = RelayQuadratic::new(config, channels, weights, budget.sigma2);
    let n_count = start.len();
    // Gershgorin bound on the largest eigenvalue
    let lipschitz = (0..n_count)
        .map(|i| (0..n_count).map(|j| quad.hessian[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    if lipschitz == 0.0 {
        return start.to_vec();
    }
    let project = |v: &DVector<Complex64>| -> DVector<Complex64> {
        DVector::from_iterator(n_count, v.iter().zip(caps).map(|(&b, &cap)| project_relay_gain(b, cap)))
    };
    let step = 1.0 / lipschitz;
    let mut x = DVector::from_column_slice(start);
    let mut best = x.clone();
    let mut best_val = quad.value(&x);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut prev_val = best_val;
    let scale = caps.iter().map(|c| c.sqrt()).fold(0.0, f64::max);
    for _ in 0..20_000 {
        let grad = &quad.hessian * &y + &quad.linear;
        let z = project(&(&y - grad * Complex64::new(step, 0.0)));
        let val = quad.value(&z);
        if val < best_val {
            best_val = val;
            best = z.clone();
        }
        let moved = (&z - &y).norm();
        if val > prev_val {
            t = 1.0;
            x = best.clone();
            y = best.clone();
            prev_val = best_val;
            continue;
        }
        if moved <= 1e-14 * scale {
            break;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &z + (&z - &x) * Complex64::new((t - 1.0) / t_next, 0.0);
        x = z;
        t = t_next;
        prev_val = val;
    }
    best.iter().copied().collect()
}

/// Closed-form optimal phase-one receive scalar for fixed everything else.
pub fn update_c1(config: &TransceiverConfig, channels: &ChannelRealization, weights: &DeviceWeights, sigma2: f64) -> Complex64 {
    let relay = relay_path_gains(&config.b, channels);
    let rho = weights.as_slice();
    let mut numerator = ZERO;
    let mut denominator = sigma2;
    for k in 0..channels.num_devices() {
        let direct = channels.h[k] * config.a1[k];
        let phase2 = config.c2 * (channels.h[k] * config.a2[k] + config.a1[k] * relay[k]);
        numerator += (rho[k] - phase2) * direct.conj();
        denominator += direct.norm_sqr();
    }
    numerator / denominator
}

/// Closed-form optimal phase-two receive scalar for fixed everything else.
pub fn update_c2(config: &TransceiverConfig, channels: &ChannelRealization, weights: &DeviceWeights, sigma2: f64) -> Complex64 {
    let relay = relay_path_gains(&config.b, channels);
    let rho = weights.as_slice();
    let relay_noise: f64 = channels
        .f
        .iter()
        .zip(&config.b)
        .map(|(f, b)| f.norm_sqr() * b.norm_sqr())
        .sum();
    let mut numerator = ZERO;
    let mut denominator = (1.0 + relay_noise) * sigma2;
    for k in 0..channels.num_devices() {
        let phase2 = channels.h[k] * config.a2[k] + config.a1[k] * relay[k];
        numerator += (rho[k] - config.c1 * channels.h[k] * config.a1[k]) * phase2.conj();
        denominator += phase2.norm_sqr();
    }
    numerator / denominator
}

/// Runs the alternating minimization from the variant's default start.
pub fn solve(
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
    solver: &SolverConfig,
    variant: SchemeVariant,
) -> Result<(TransceiverConfig, SolverTrace)> {
    check_dims(channels, weights)?;
    match variant {
        SchemeVariant::NoRelaySinglePhase => {
            let sol = norelay_optimum(&channels.h, weights, 2.0 * budget.p0, budget.sigma2)?;
            let config = TransceiverConfig::direct(sol.a, sol.c, channels.num_relays());
            let trace = SolverTrace {
                objectives: vec![relay_mse(&config, channels, weights, budget.sigma2)],
                iterations_run: 0,
                terminated_by: Termination::Converged,
                warnings: vec![],
            };
            Ok((config, trace))
        }
        SchemeVariant::Full => {
            let start = init_config(channels, weights, budget)?;
            solve_from(start, channels, weights, budget, solver, variant)
        }
        SchemeVariant::RelayOnly => {
            let start = init_relay_only(channels, weights, budget)?;
            solve_from(start, channels, weights, budget, solver, variant)
        }
    }
}

/// Runs the alternating minimization from a given feasible start.
pub fn solve_from(
    start: TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
    solver: &SolverConfig,
    variant: SchemeVariant,
) -> Result<(TransceiverConfig, SolverTrace)> {
    check_dims(channels, weights)?;
    solver.validate()?;
    if variant == SchemeVariant::NoRelaySinglePhase {
        return Err(Error::Domain("the single-phase scheme has no iterative solver".into()));
    }
    let sigma2 = budget.sigma2;
    let mse = |c: &TransceiverConfig| relay_mse(c, channels, weights, sigma2);

    let mut config = start;
    if variant == SchemeVariant::RelayOnly {
        config.a2.iter_mut().for_each(|a| *a = ZERO);
        config.c1 = ZERO;
    }
    let mut current = mse(&config);
    let mut objectives = vec![current];
    let mut warnings = Vec::new();
    let mut terminated_by = Termination::MaxIterations;
    let mut iterations_run = 0;

    // Accept a block update only if it does not increase the MSE.
    let accept = |candidate: TransceiverConfig, config: &mut TransceiverConfig, current: &mut f64| {
        let value = mse(&candidate);
        if value <= *current {
            *config = candidate;
            *current = value;
        }
    };

    for sweep in 1..=solver.j_max {
        iterations_run = sweep;
        let previous = current;

        let update = update_device_scalars_for(&config, channels, weights, budget, solver, variant);
        if !update.converged {
            warnings.push(SolverWarning::DeviceUpdateNotConverged { sweep });
        }
        let mut candidate = config.clone();
        candidate.a1 = update.a1;
        candidate.a2 = update.a2;
        accept(candidate, &mut config, &mut current);

        if config.c2.norm() == 0.0 {
            warnings.push(SolverWarning::RelayUpdateSkipped { sweep });
        } else if channels.num_relays() > 0 {
            let relay = update_relay_scalars(&config, channels, weights, budget)?;
            if relay.singular {
                warnings.push(SolverWarning::RelayUpdateSingular { sweep });
            }
            let mut candidate = config.clone();
            candidate.b = relay.b;
            accept(candidate, &mut config, &mut current);
        }

        if variant == SchemeVariant::Full {
            let mut candidate = config.clone();
            candidate.c1 = update_c1(&config, channels, weights, sigma2);
            accept(candidate, &mut config, &mut current);
        }

        let mut candidate = config.clone();
        candidate.c2 = update_c2(&config, channels, weights, sigma2);
        accept(candidate, &mut config, &mut current);

        objectives.push(current);
        let improvement = if current == 0.0 {
            0.0
        } else {
            (current - previous).abs() / current.abs()
        };
        if improvement <= solver.epsilon {
            terminated_by = Termination::Converged;
            break;
        }
    }

    Ok((
        config,
        SolverTrace {
            objectives,
            iterations_run,
            terminated_by,
            warnings,
        },
    ))
}
