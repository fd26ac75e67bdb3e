//! Device-scalar subproblem: a convex QCQP in `(a1, a2)`.
//!
//! ```text
//! minimize   sum_k |theta_k a1_k + phi_k a2_k - rho_k|^2
//! subject to |a1_k|^2 <= cap1,  |a2_k|^2 <= cap2,
//!            sum_k w_{k,n} |a1_k|^2 <= r_n   for every relay n
//! ```
//!
//! Solved by accelerated projected gradient in a per-device diagonal metric
//! `m_k = |theta_k|^2 + |phi_k|^2`. The Hessian is block diagonal with rank-one
//! 2x2 blocks whose nonzero eigenvalue is `2 m_k`, so in this metric the
//! gradient is 1-Lipschitz and the step needs no line search.
//!
//! Projection onto the feasible set works on `a1` only (the `a2` boxes are a
//! radial clip). Every constraint depends on magnitudes alone, so the
//! projection keeps phases and reduces to one multiplier per relay.

use num_complex::Complex64;

/// One instance of the device-scalar subproblem.
#[derive(Debug, Clone)]
pub struct DeviceProblem {
    pub theta: Vec<Complex64>,
    /// Ignored when `a2_fixed_zero` is set.
    pub phi: Vec<Complex64>,
    pub rho: Vec<f64>,
    pub cap1: f64,
    pub cap2: f64,
    /// `relay_weights[n][k] = |b_n|^2 |g_{k,n}|^2`.
    pub relay_weights: Vec<Vec<f64>>,
    /// `relay_caps[n] = P_r - |b_n|^2 sigma2`.
    pub relay_caps: Vec<f64>,
    pub a2_fixed_zero: bool,
}

#[derive(Debug, Clone)]
pub struct DeviceSolution {
    pub a1: Vec<Complex64>,
    pub a2: Vec<Complex64>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DeviceProblem {
    pub fn objective(&self, a1: &[Complex64], a2: &[Complex64]) -> f64 {
        (0..self.rho.len())
            .map(|k| (self.residual_k(k, a1[k], a2[k])).norm_sqr())
            .sum()
    }

    #[inline]
    fn phi_k(&self, k: usize) -> Complex64 {
        if self.a2_fixed_zero {
            Complex64::new(0.0, 0.0)
        } else {
            self.phi[k]
        }
    }

    #[inline]
    fn residual_k(&self, k: usize, a1: Complex64, a2: Complex64) -> Complex64 {
        self.theta[k] * a1 + self.phi_k(k) * a2 - self.rho[k]
    }

    /// Largest relative constraint violation, `<= 0` when feasible.
    pub fn violation(&self, a1: &[Complex64], a2: &[Complex64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..a1.len() {
            worst = worst.max((a1[k].norm_sqr() - self.cap1) / self.cap1);
            if !self.a2_fixed_zero {
                worst = worst.max((a2[k].norm_sqr() - self.cap2) / self.cap2);
            }
        }
        for (w, &cap) in self.relay_weights.iter().zip(&self.relay_caps) {
            let used: f64 = w.iter().zip(a1).map(|(w, a)| w * a.norm_sqr()).sum();
            let scale = cap.abs().max(f64::MIN_POSITIVE);
            worst = worst.max((used - cap) / scale);
        }
        worst
    }
}

/// Projection of `y` onto `{|x_k| <= sqrt(cap)} ∩ {sum_k w_k |x_k|^2 <= r}` in
/// the metric `sum_k m_k |x_k - y_k|^2`.
///
/// The minimizer keeps each phase and has magnitude
/// `min(|y_k| m_k / (m_k + mu w_k), sqrt(cap))` for the smallest `mu >= 0`
/// meeting the ellipsoid constraint.
pub(crate) fn project_box_ellipsoid(y: &[Complex64], metric: &[f64], cap: f64, w: &[f64], r: f64) -> Vec<Complex64> {
    let radius = cap.sqrt();
    let r = r.max(0.0);
    let magnitudes = |mu: f64| -> Vec<f64> {
        y.iter()
            .zip(metric)
            .zip(w)
            .map(|((yk, &mk), &wk)| {
                let shrunk = if wk > 0.0 { yk.norm() * mk / (mk + mu * wk) } else { yk.norm() };
                shrunk.min(radius)
            })
            .collect()
    };
    let load = |mags: &[f64]| -> f64 { mags.iter().zip(w).map(|(m, wk)| wk * m * m).sum() };

    let mut mags = magnitudes(0.0);
    if load(&mags) > r {
        // bracket mu: load(mu) <= sum_k |y_k|^2 m_k^2 / (mu^2 w_k)
        let numerator: f64 = y
            .iter()
            .zip(metric)
            .zip(w)
            .filter(|(_, &wk)| wk > 0.0)
            .map(|((yk, &mk), &wk)| yk.norm_sqr() * mk * mk / wk)
            .sum();
        let mut hi = if r > 0.0 { (numerator / r).sqrt() * (1.0 + 1e-12) } else { f64::INFINITY };
        if !hi.is_finite() {
            // r == 0: every device loading a relay must fall silent
            mags = y
                .iter()
                .zip(w)
                .map(|(yk, &wk)| if wk > 0.0 { 0.0 } else { yk.norm().min(radius) })
                .collect();
        } else {
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if load(&magnitudes(mid)) > r {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            mags = magnitudes(hi);
        }
    }
    y.iter()
        .zip(&mags)
        .map(|(yk, &m)| {
            let n = yk.norm();
            if n > 0.0 {
                yk * (m / n)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

fn clip(y: Complex64, radius: f64) -> Complex64 {
    let n = y.norm();
    if n > radius {
        y * (radius / n)
    } else {
        y
    }
}

/// Projection onto the box and several ellipsoids `sum_k w[n][k] |x_k|^2 <= r[n]`
/// in the metric `sum_k m_k |x_k - y_k|^2`.
///
/// Phases are kept and the magnitudes are
/// `min(|y_k| m_k / (m_k + sum_n mu_n w[n][k]), sqrt(cap))`; the multipliers
/// `mu >= 0` maximize the concave dual, found by projected Newton with an
/// exact coordinate-ascent sweep whenever the Newton step stalls.
pub(crate) fn project_box_ellipsoids(
    y: &[Complex64],
    metric: &[f64],
    cap: f64,
    w: &[Vec<f64>],
    r: &[f64],
) -> Vec<Complex64> {
    let k_count = y.len();
    let radius = cap.sqrt();
    // a relay with no budget left silences every device it hears
    let mut silenced = vec![false; k_count];
    let mut live: Vec<usize> = Vec::new();
    for n in 0..w.len() {
        if r[n] <= 0.0 {
            for k in 0..k_count {
                silenced[k] |= w[n][k] > 0.0;
            }
        } else {
            live.push(n);
        }
    }
    let target: Vec<f64> = y
        .iter()
        .zip(&silenced)
        .map(|(v, &s)| if s { 0.0 } else { v.norm() })
        .collect();

    let magnitudes = |mu: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut mags = Vec::with_capacity(k_count);
        let mut denoms = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let load: f64 = live.iter().zip(mu).map(|(&n, m)| m * w[n][k]).sum();
            let d = metric[k] + load;
            denoms.push(d);
            mags.push((target[k] * metric[k] / d).min(radius));
        }
        (mags, denoms)
    };
    let violations = |mags: &[f64]| -> Vec<f64> {
        live.iter()
            .map(|&n| w[n].iter().zip(mags).map(|(wk, s)| wk * s * s).sum::<f64>() - r[n])
            .collect()
    };
    let dual = |mu: &[f64], mags: &[f64], c: &[f64]| -> f64 {
        let primal: f64 = (0..k_count).map(|k| metric[k] * (mags[k] - target[k]).powi(2)).sum();
        primal + mu.iter().zip(c).map(|(m, c)| m * c).sum::<f64>()
    };
    let settled = |mu: &[f64], c: &[f64]| -> bool {
        live.iter().enumerate().all(|(i, &n)| {
            let tol = 1e-13 * r[n];
            c[i] <= tol && (mu[i] == 0.0 || c[i].abs() <= tol)
        })
    };

    let m = live.len();
    let mut mu = vec![0.0; m];
    let (mut mags, mut denoms) = magnitudes(&mu);
    let mut c = violations(&mags);
    for _ in 0..200 {
        if settled(&mu, &c) {
            break;
        }
        let free: Vec<usize> = (0..m).filter(|&i| mu[i] > 0.0 || c[i] > 0.0).collect();
        let mut jac = nalgebra::DMatrix::<f64>::zeros(free.len(), free.len());
        for k in 0..k_count {
            if mags[k] >= radius || mags[k] == 0.0 {
                continue;
            }
            let scale = 2.0 * mags[k] * mags[k] / denoms[k];
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    jac[(a, b)] += scale * w[live[i]][k] * w[live[j]][k];
                }
            }
        }
        let rhs = nalgebra::DVector::from_iterator(free.len(), free.iter().map(|&i| c[i]));
        let ridge = jac.diagonal().iter().cloned().fold(0.0, f64::max) * 1e-13 + f64::MIN_POSITIVE;
        for a in 0..free.len() {
            jac[(a, a)] += ridge;
        }
        let step = jac.cholesky().map(|ch| ch.solve(&rhs));
        let base = dual(&mu, &mags, &c);
        let mut accepted = false;
        if let Some(step) = step {
            let mut alpha = 1.0;
            for _ in 0..40 {
                let mut trial = mu.clone();
                for (a, &i) in free.iter().enumerate() {
                    trial[i] = (mu[i] + alpha * step[a]).max(0.0);
                }
                let (t_mags, t_denoms) = magnitudes(&trial);
                let t_c = violations(&t_mags);
                let gain: f64 = trial.iter().zip(&mu).zip(&c).map(|((t, m), c)| (t - m) * c).sum();
                if dual(&trial, &t_mags, &t_c) >= base + 1e-4 * gain && gain > 0.0 {
                    mu = trial;
                    mags = t_mags;
                    denoms = t_denoms;
                    c = t_c;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            // exact maximization along each multiplier in turn
            for i in 0..m {
                let n = live[i];
                let load_at = |value: f64, mu: &mut Vec<f64>| -> f64 {
                    mu[i] = value;
                    let (mags, _) = magnitudes(mu);
                    w[n].iter().zip(&mags).map(|(wk, s)| wk * s * s).sum::<f64>() - r[n]
                };
                let mut probe = mu.clone();
                if load_at(0.0, &mut probe) <= 0.0 {
                    mu[i] = 0.0;
                    continue;
                }
                let mut hi = mu[i].max(1e-300);
                while load_at(hi, &mut probe) > 0.0 {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        break;
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if load_at(mid, &mut probe) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                mu[i] = hi;
            }
            let fresh = magnitudes(&mu);
            mags = fresh.0;
            denoms = fresh.1;
            let next = violations(&mags);
            let stalled = next.iter().zip(&c).all(|(a, b)| (a - b).abs() <= 1e-15 * b.abs());
            c = next;
            if stalled {
                break;
            }
        }
    }
    y.iter()
        .zip(&mags)
        .map(|(yk, &s)| {
            let n = yk.norm();
            if n > 0.0 {
                yk * (s / n)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

impl DeviceProblem {
    /// Projection of `a1` onto the box and every relay ellipsoid.
    fn project_a1(&self, y: &[Complex64], metric: &[f64]) -> Vec<Complex64> {
        let radius = self.cap1.sqrt();
        match self.relay_weights.len() {
            0 => y.iter().map(|&v| clip(v, radius)).collect(),
            1 => project_box_ellipsoid(y, metric, self.cap1, &self.relay_weights[0], self.relay_caps[0]),
            _ => project_box_ellipsoids(y, metric, self.cap1, &self.relay_weights, &self.relay_caps),
        }
    }

    fn project(&self, a1: &[Complex64], a2: &[Complex64], metric: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let a1 = self.project_a1(a1, metric);
        let a2 = if self.a2_fixed_zero {
            vec![Complex64::new(0.0, 0.0); a2.len()]
        } else {
            let radius = self.cap2.sqrt();
            a2.iter().map(|&v| clip(v, radius)).collect()
        };
        (a1, a2)
    }

    /// Scales `a1` down uniformly until every relay constraint holds. Used to
    /// absorb the tolerance of the multiplier search.
    fn enforce_relays(&self, a1: &mut [Complex64]) {
        for (w, &cap) in self.relay_weights.iter().zip(&self.relay_caps) {
            let used: f64 = w.iter().zip(a1.iter()).map(|(w, a)| w * a.norm_sqr()).sum();
            if used > cap {
                let s = (cap.max(0.0) / used).sqrt();
                a1.iter_mut().for_each(|a| *a *= s);
            }
        }
    }

    /// One projected-gradient step from `(a1, a2)`; returns the new point.
    fn pg_step(&self, a1: &[Complex64], a2: &[Complex64], metric: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let k_count = self.rho.len();
        let mut y1 = Vec::with_capacity(k_count);
        let mut y2 = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let r = self.residual_k(k, a1[k], a2[k]);
            // gradient 2 conj(theta) r, scaled by 1 / (2 m_k)
            y1.push(a1[k] - self.theta[k].conj() * r / metric[k]);
            y2.push(a2[k] - self.phi_k(k).conj() * r / metric[k]);
        }
        self.project(&y1, &y2, metric)
    }

    fn step_norm(&self, a1: &[Complex64], a2: &[Complex64], b1: &[Complex64], b2: &[Complex64], metric: &[f64]) -> f64 {
        let rho_norm = self.rho.iter().map(|r| r * r).sum::<f64>().sqrt();
        let s: f64 = (0..a1.len())
            .map(|k| metric[k] * ((a1[k] - b1[k]).norm_sqr() + (a2[k] - b2[k]).norm_sqr()))
            .sum();
        s.sqrt() / rho_norm
    }

    /// Accelerated projected gradient with function-value restarts, warm
    /// started at `(a1, a2)`. Never returns a point worse than the start.
    ///
    /// `residual` is the metric norm of one projected-gradient step from the
    /// returned point, relative to `|rho|`; convergence means it fell to `tol`.
    pub fn solve(&self, a1: &[Complex64], a2: &[Complex64], tol: f64, max_iter: usize) -> DeviceSolution {
        let k_count = self.rho.len();
        let raw: Vec<f64> = (0..k_count)
            .map(|k| self.theta[k].norm_sqr() + self.phi_k(k).norm_sqr())
            .collect();
        let peak = raw.iter().cloned().fold(0.0, f64::max);
        let start_obj = self.objective(a1, a2);
        if peak == 0.0 {
            return DeviceSolution {
                a1: a1.to_vec(),
                a2: a2.to_vec(),
                objective: start_obj,
                residual: 0.0,
                iterations: 0,
                converged: true,
            };
        }
        let metric: Vec<f64> = raw.iter().map(|&m| m.max(peak * 1e-14)).collect();

        let mut best = (a1.to_vec(), a2.to_vec(), start_obj);
        let (mut x1, mut x2) = (a1.to_vec(), a2.to_vec());
        let (mut y1, mut y2) = (a1.to_vec(), a2.to_vec());
        let mut prev_obj = start_obj;
        let mut t = 1.0_f64;
        let mut iterations = 0;
        let mut converged = false;
        let mut residual = f64::INFINITY;

        while iterations < max_iter {
            iterations += 1;
            let (z1, z2) = self.pg_step(&y1, &y2, &metric);
            let obj = self.objective(&z1, &z2);
            let moved = self.step_norm(&z1, &z2, &y1, &y2, &metric);
            if obj < best.2 {
                best = (z1.clone(), z2.clone(), obj);
            }
            if moved <= tol {
                // confirm with a plain step from the best iterate
                let (p1, p2) = self.pg_step(&best.0, &best.1, &metric);
                residual = self.step_norm(&p1, &p2, &best.0, &best.1, &metric);
                let p_obj = self.objective(&p1, &p2);
                if p_obj < best.2 {
                    best = (p1, p2, p_obj);
                }
                if residual <= tol {
                    converged = true;
                    break;
                }
            }
            if obj > prev_obj {
                // restart momentum from the best point
                t = 1.0;
                x1.clone_from(&best.0);
                x2.clone_from(&best.1);
                y1.clone_from(&best.0);
                y2.clone_from(&best.1);
                prev_obj = best.2;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            for k in 0..k_count {
                y1[k] = z1[k] + momentum * (z1[k] - x1[k]);
                y2[k] = z2[k] + momentum * (z2[k] - x2[k]);
            }
            x1 = z1;
            x2 = z2;
            t = t_next;
            prev_obj = obj;
        }
        if !converged {
            let (p1, p2) = self.pg_step(&best.0, &best.1, &metric);
            residual = self.step_norm(&p1, &p2, &best.0, &best.1, &metric);
        }

        let (mut a1_out, a2_out, _) = best;
        self.enforce_relays(&mut a1_out);
        let objective = self.objective(&a1_out, &a2_out);
        if objective > start_obj {
            return DeviceSolution {
                a1: a1.to_vec(),
                a2: a2.to_vec(),
                objective: start_obj,
                residual,
                iterations,
                converged,
            };
        }
        DeviceSolution {
            a1: a1_out,
            a2: a2_out,
            objective,
            residual,
            iterations,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn box_ellipsoid_projection_is_identity_inside() {
        let y = vec![c(0.1, 0.1), c(-0.2, 0.0)];
        let p = project_box_ellipsoid(&y, &[1.0, 1.0], 1.0, &[1.0, 1.0], 10.0);
        assert_eq!(p, y);
    }

    #[test]
    fn box_ellipsoid_projection_kkt() {
        // Euclidean projection onto a single ellipsoid: x_k = y_k / (1 + mu w_k)
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let k = rng.random_range(1..6);
            let y: Vec<Complex64> = (0..k).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..3.0)).collect();
            let r = rng.random_range(0.01..1.0);
            let p = project_box_ellipsoid(&y, &vec![1.0; k], 1e9, &w, r);
            let load: f64 = p.iter().zip(&w).map(|(x, w)| w * x.norm_sqr()).sum();
            assert!(load <= r * (1.0 + 1e-12));
            let y_load: f64 = y.iter().zip(&w).map(|(x, w)| w * x.norm_sqr()).sum();
            if y_load > r {
                assert!((load - r).abs() < 1e-9 * r);
                // common multiplier across coordinates
                let mus: Vec<f64> = (0..k).map(|i| (y[i].norm() / p[i].norm() - 1.0) / w[i]).collect();
                for m in &mus {
                    assert!((m - mus[0]).abs() < 1e-6 * mus[0].max(1.0));
                }
            }
        }
    }

    #[test]
    fn multi_ellipsoid_projection_matches_barrier_oracle() {
        use crate::oracles::{barrier_minimize, DiagConstraint, RealQuadratic};
        use nalgebra::{DMatrix, DVector};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let k = rng.random_range(1..7);
            let n = rng.random_range(2..5);
            let y: Vec<Complex64> = (0..k).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let metric: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..4.0)).collect();
            let cap = rng.random_range(0.2..3.0);
            let w: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..k).map(|_| if rng.random_bool(0.8) { rng.random_range(0.0..3.0) } else { 0.0 }).collect())
                .collect();
            let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..2.0)).collect();
            let p = project_box_ellipsoids(&y, &metric, cap, &w, &r);

            let dist = |x: &[Complex64]| -> f64 { x.iter().zip(&y).zip(&metric).map(|((a, b), m)| m * (a - b).norm_sqr()).sum() };
            // same problem in real coordinates for the barrier solver
            let mut q = DMatrix::zeros(2 * k, 2 * k);
            let mut l = DVector::zeros(2 * k);
            let mut constant = 0.0;
            for i in 0..k {
                q[(2 * i, 2 * i)] = metric[i];
                q[(2 * i + 1, 2 * i + 1)] = metric[i];
                l[2 * i] = -2.0 * metric[i] * y[i].re;
                l[2 * i + 1] = -2.0 * metric[i] * y[i].im;
                constant += metric[i] * y[i].norm_sqr();
            }
            let mut cons = Vec::new();
            for i in 0..k {
                let mut d = DVector::zeros(2 * k);
                d[2 * i] = 1.0;
                d[2 * i + 1] = 1.0;
                cons.push(DiagConstraint { d, cap });
            }
            for (wn, &rn) in w.iter().zip(&r) {
                let d = DVector::from_iterator(2 * k, wn.iter().flat_map(|&v| [v, v]));
                cons.push(DiagConstraint { d, cap: rn });
            }
            let quad = RealQuadratic { q, l, c: constant };
            let x = barrier_minimize(&quad, &cons, &DVector::zeros(2 * k));
            let oracle: Vec<Complex64> = x.as_slice().chunks(2).map(|p| c(p[0], p[1])).collect();

            for (wn, &rn) in w.iter().zip(&r) {
                let used: f64 = wn.iter().zip(&p).map(|(w, x)| w * x.norm_sqr()).sum();
                assert!(used <= rn * (1.0 + 1e-10));
            }
            assert!(p.iter().all(|x| x.norm_sqr() <= cap * (1.0 + 1e-12)));
            assert!(dist(&p) <= dist(&oracle) * (1.0 + 1e-7) + 1e-12, "{} vs {}", dist(&p), dist(&oracle));
        }
    }

    #[test]
    fn zero_gain_problem_returns_start() {
        let prob = DeviceProblem {
            theta: vec![c(0.0, 0.0); 2],
            phi: vec![c(0.0, 0.0); 2],
            rho: vec![0.5, 0.5],
            cap1: 1.0,
            cap2: 1.0,
            relay_weights: vec![],
            relay_caps: vec![],
            a2_fixed_zero: false,
        };
        let a1 = vec![c(0.3, 0.1), c(0.0, 0.2)];
        let a2 = vec![c(-0.1, 0.0), c(0.4, 0.4)];
        let sol = prob.solve(&a1, &a2, 1e-8, 100);
        assert_eq!(sol.a1, a1);
        assert_eq!(sol.a2, a2);
    }

    #[test]
    fn unconstrained_single_device_reaches_zero() {
        let prob = DeviceProblem {
            theta: vec![c(1.0, 0.0)],
            phi: vec![c(1.0, 0.0)],
            rho: vec![1.0],
            cap1: 100.0,
            cap2: 100.0,
            relay_weights: vec![],
            relay_caps: vec![],
            a2_fixed_zero: false,
        };
        let sol = prob.solve(&[c(0.0, 0.0)], &[c(0.0, 0.0)], 1e-10, 1000);
        assert!(sol.objective < 1e-8);
        assert!((sol.a1[0] + sol.a2[0] - 1.0).norm() < 1e-4);
    }

    #[test]
    fn multi_relay_solution_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let k = 6;
            let n = 3;
            let prob = DeviceProblem {
                theta: (0..k).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect(),
                phi: (0..k).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect(),
                rho: vec![1.0 / k as f64; k],
                cap1: 0.05,
                cap2: 0.05,
                relay_weights: (0..n).map(|_| (0..k).map(|_| rng.random_range(0.0..5.0)).collect()).collect(),
                relay_caps: (0..n).map(|_| rng.random_range(0.01..0.1)).collect(),
                a2_fixed_zero: false,
            };
            let zero = vec![c(0.0, 0.0); k];
            let sol = prob.solve(&zero, &zero, 1e-9, 5000);
            assert!(prob.violation(&sol.a1, &sol.a2) <= 1e-9);
            assert!(sol.objective <= prob.objective(&zero, &zero));
        }
    }
}
