//! Slow reference solvers used to check the fast ones.
//!
//! Nothing here reuses the closed forms or subsolvers of the library. Block
//! objectives are rebuilt from [`relay_mse`] alone: a quadratic is recovered
//! exactly from a handful of evaluations, then minimized by a log-barrier
//! Newton method over the block's power constraints.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::aggregation::{relay_mse, DeviceWeights, PowerBudget, TransceiverConfig};
use crate::channel::ChannelRealization;

/// `x^T Q x + l^T x + c` over real vectors.
#[derive(Debug, Clone)]
pub struct RealQuadratic {
    pub q: DMatrix<f64>,
    pub l: DVector<f64>,
    pub c: f64,
}

impl RealQuadratic {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.q * x)[(0, 0)] + self.l.dot(x) + self.c
    }
}

/// `sum_i d_i x_i^2 <= cap`.
#[derive(Debug, Clone)]
pub struct DiagConstraint {
    pub d: DVector<f64>,
    pub cap: f64,
}

impl DiagConstraint {
    fn slack(&self, x: &DVector<f64>) -> f64 {
        self.cap - self.d.iter().zip(x.iter()).map(|(d, x)| d * x * x).sum::<f64>()
    }
}

/// Recovers the quadratic `f` by polarization around the origin with
/// probe length `scale`. Exact up to rounding when `f` is quadratic.
pub fn extract_quadratic(f: impl Fn(&DVector<f64>) -> f64, n: usize, scale: f64) -> RealQuadratic {
    let c = f(&DVector::zeros(n));
    let unit = |i: usize, s: f64| {
        let mut v = DVector::zeros(n);
        v[i] = s;
        v
    };
    let plus: Vec<f64> = (0..n).map(|i| f(&unit(i, scale))).collect();
    let minus: Vec<f64> = (0..n).map(|i| f(&unit(i, -scale))).collect();
    let mut q = DMatrix::zeros(n, n);
    let mut l = DVector::zeros(n);
    for i in 0..n {
        q[(i, i)] = ((plus[i] + minus[i]) / 2.0 - c) / (scale * scale);
        l[i] = (plus[i] - minus[i]) / (2.0 * scale);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut v = unit(i, scale);
            v[j] = scale;
            let both = f(&v);
            let linear_part = l[i] * scale + l[j] * scale;
            let quad = both - c - linear_part - q[(i, i)] * scale * scale - q[(j, j)] * scale * scale;
            q[(i, j)] = quad / (2.0 * scale * scale);
            q[(j, i)] = q[(i, j)];
        }
    }
    RealQuadratic { q, l, c }
}

/// Minimizes a convex quadratic over diagonal ellipsoids by a log-barrier
/// Newton method. `x0` must be strictly feasible.
pub fn barrier_minimize(quad: &RealQuadratic, constraints: &[DiagConstraint], x0: &DVector<f64>) -> DVector<f64> {
    let n = x0.len();
    let m = constraints.len() as f64;
    assert!(constraints.iter().all(|c| c.slack(x0) > 0.0), "barrier start must be strictly feasible");
    let mut x = x0.clone();
    let f_scale = quad.value(&x).abs().max(quad.c.abs()).max(f64::MIN_POSITIVE);
    let mut t = m / f_scale;

    let phi = |x: &DVector<f64>, t: f64| -> f64 {
        let mut total = t * quad.value(x);
        for c in constraints {
            let s = c.slack(x);
            if s <= 0.0 {
                return f64::INFINITY;
            }
            total -= s.ln();
        }
        total
    };

    for _outer in 0..80 {
        for _newton in 0..200 {
            let mut grad = (&quad.q * &x * 2.0 + &quad.l) * t;
            let mut hess = &quad.q * (2.0 * t);
            for c in constraints {
                let s = c.slack(&x);
                let px = DVector::from_iterator(n, c.d.iter().zip(x.iter()).map(|(d, x)| d * x));
                grad += &px * (2.0 / s);
                for i in 0..n {
                    hess[(i, i)] += 2.0 * c.d[i] / s;
                }
                hess += &px * px.transpose() * (4.0 / (s * s));
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    let ridge = hess.diagonal().max() * 1e-12;
                    let mut h = hess.clone();
                    for i in 0..n {
                        h[(i, i)] += ridge;
                    }
                    match h.lu().solve(&(-&grad)) {
                        Some(s) => s,
                        None => break,
                    }
                }
            };
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= 1e-13 {
                break;
            }
            let base = phi(&x, t);
            let mut alpha = 1.0;
            loop {
                let candidate = &x + &step * alpha;
                let value = phi(&candidate, t);
                if value.is_finite() && value <= base - 0.25 * alpha * decrement {
                    x = candidate;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-20 {
                    break;
                }
            }
            if alpha < 1e-20 {
                break;
            }
        }
        let gap = m / t;
        if gap <= 1e-13 * quad.value(&x).abs().max(1e-300) || gap < 1e-300 {
            break;
        }
        t *= 10.0;
    }
    x
}

fn unpack(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Constrained minimizer of the MSE over the device scalars, all else fixed.
///
/// With `a2_fixed_zero`, only `a1` is optimized (budget `cap1` per device).
pub fn device_block_oracle(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
    cap1: f64,
    a2_fixed_zero: bool,
) -> TransceiverConfig {
    let k_count = channels.num_devices();
    let n_vars = if a2_fixed_zero { 2 * k_count } else { 4 * k_count };
    let rebuild = |x: &DVector<f64>| {
        let mut c = config.clone();
        c.a1 = unpack(&x.as_slice()[..2 * k_count]);
        c.a2 = if a2_fixed_zero {
            vec![Complex64::new(0.0, 0.0); k_count]
        } else {
            unpack(&x.as_slice()[2 * k_count..])
        };
        c
    };
    let f = |x: &DVector<f64>| relay_mse(&rebuild(x), channels, weights, budget.sigma2);
    let quad = extract_quadratic(f, n_vars, cap1.sqrt());

    let mut constraints = Vec::new();
    for k in 0..k_count {
        let mut d = DVector::zeros(n_vars);
        d[2 * k] = 1.0;
        d[2 * k + 1] = 1.0;
        constraints.push(DiagConstraint { d, cap: cap1 });
        if !a2_fixed_zero {
            let mut d = DVector::zeros(n_vars);
            d[2 * k_count + 2 * k] = 1.0;
            d[2 * k_count + 2 * k + 1] = 1.0;
            constraints.push(DiagConstraint { d, cap: budget.p0 });
        }
    }
    for n in 0..channels.num_relays() {
        let b2 = config.b[n].norm_sqr();
        let mut d = DVector::zeros(n_vars);
        for k in 0..k_count {
            let w = b2 * channels.g(k, n).norm_sqr();
            d[2 * k] = w;
            d[2 * k + 1] = w;
        }
        constraints.push(DiagConstraint {
            d,
            cap: budget.pr - b2 * budget.sigma2,
        });
    }
    let x = barrier_minimize(&quad, &constraints, &DVector::zeros(n_vars));
    rebuild(&x)
}

/// Constrained minimizer of the MSE over the relay gains, all else fixed.
pub fn relay_block_oracle(
    config: &TransceiverConfig,
    channels: &ChannelRealization,
    weights: &DeviceWeights,
    budget: &PowerBudget,
) -> Vec<Complex64> {
    let n_count = channels.num_relays();
    let rebuild = |x: &DVector<f64>| {
        let mut c = config.clone();
        c.b = unpack(x.as_slice());
        c
    };
    let mut constraints = Vec::new();
    let mut radius: f64 = 0.0;
    for n in 0..n_count {
        let received: f64 = (0..channels.num_devices())
            .map(|k| channels.g(k, n).norm_sqr() * config.a1[k].norm_sqr())
            .sum();
        let load = received + budget.sigma2;
        radius = radius.max((budget.pr / load).sqrt());
        let mut d = DVector::zeros(2 * n_count);
        d[2 * n] = load;
        d[2 * n + 1] = load;
        constraints.push(DiagConstraint { d, cap: budget.pr });
    }
    let f = |x: &DVector<f64>| relay_mse(&rebuild(x), channels, weights, budget.sigma2);
    let quad = extract_quadratic(f, 2 * n_count, radius);
    let x = barrier_minimize(&quad, &constraints, &DVector::zeros(2 * n_count));
    unpack(x.as_slice())
}

/// Central-difference gradient `df/dRe + i df/dIm` of a real function of
/// one complex variable.
pub fn fd_gradient(f: impl Fn(Complex64) -> f64, z: Complex64, step: f64) -> Complex64 {
    let re = (f(z + Complex64::new(step, 0.0)) - f(z - Complex64::new(step, 0.0))) / (2.0 * step);
    let im = (f(z + Complex64::new(0.0, step)) - f(z - Complex64::new(0.0, step))) / (2.0 * step);
    Complex64::new(re, im)
}

/// Result of the exhaustive search over the relay-free transceiver.
#[derive(Debug, Clone, Copy)]
pub struct NoRelaySearch {
    pub mse: f64,
    pub c_magnitude: f64,
}

/// Per-device best `|c h a - rho|^2` over a polar grid on `|a|^2 <= p`,
/// refined by zooming into the best cell.
fn device_grid_min(gain: Complex64, rho: f64, p: f64) -> f64 {
    let radius = p.sqrt();
    let eval = |m: f64, ang: f64| (gain * Complex64::from_polar(m, ang) - rho).norm_sqr();
    let (mut m_lo, mut m_hi) = (0.0, radius);
    let (mut a_lo, mut a_hi) = (-std::f64::consts::PI, std::f64::consts::PI);
    let mut best = f64::INFINITY;
    const STEPS: usize = 24;
    for _ in 0..40 {
        let (mut bm, mut ba) = (m_lo, a_lo);
        for i in 0..=STEPS {
            let m = m_lo + (m_hi - m_lo) * i as f64 / STEPS as f64;
            for j in 0..=STEPS {
                let a = a_lo + (a_hi - a_lo) * j as f64 / STEPS as f64;
                let v = eval(m, a);
                if v < best {
                    best = v;
                    bm = m;
                    ba = a;
                }
            }
        }
        let dm = 2.0 * (m_hi - m_lo) / STEPS as f64;
        let da = 2.0 * (a_hi - a_lo) / STEPS as f64;
        m_lo = (bm - dm).max(0.0);
        m_hi = (bm + dm).min(radius);
        a_lo = ba - da;
        a_hi = ba + da;
    }
    best
}

/// Minimum over all `(a, c)` with `|a_k|^2 <= p` of
/// `sum_k |c h_k a_k - rho_k|^2 + |c|^2 sigma2`.
///
/// The receive phase is absorbed by the device phases, so only `|c|` is
/// searched: a log grid spanning twelve decades around
/// `max rho/|h| / sqrt(p)`, then golden-section refinement.
pub fn norelay_brute_force(h: &[Complex64], weights: &DeviceWeights, p: f64, sigma2: f64) -> NoRelaySearch {
    let rho = weights.as_slice();
    let objective = |c: f64| -> f64 {
        let misalignment: f64 = h
            .iter()
            .zip(rho)
            .map(|(hk, r)| device_grid_min(hk * c, *r, p))
            .sum();
        misalignment + c * c * sigma2
    };
    let reference = rho
        .iter()
        .zip(h)
        .map(|(r, hk)| r / hk.norm())
        .fold(0.0, f64::max)
        / p.sqrt();
    const GRID: usize = 241;
    let mut best = (f64::INFINITY, 0.0, 0usize);
    let grid: Vec<f64> = (0..GRID)
        .map(|i| reference * 10f64.powf(-6.0 + 12.0 * i as f64 / (GRID - 1) as f64))
        .collect();
    for (i, &c) in grid.iter().enumerate() {
        let v = objective(c);
        if v < best.0 {
            best = (v, c, i);
        }
    }
    let lo = if best.2 == 0 { 0.0 } else { grid[best.2 - 1] };
    let hi = grid[(best.2 + 1).min(GRID - 1)];
    let (mut a, mut b) = (lo, hi);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = b - ratio * (b - a);
        let x2 = a + ratio * (b - a);
        if objective(x1) < objective(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let c = 0.5 * (a + b);
    let v = objective(c);
    if v < best.0 {
        NoRelaySearch { mse: v, c_magnitude: c }
    } else {
        NoRelaySearch {
            mse: best.0,
            c_magnitude: best.1,
        }
    }
}
