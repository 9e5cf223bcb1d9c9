use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};

use super::{FirstOrderModel, SecondOrderModel};

const TAU_STARTS: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];
const OMEGA_STARTS: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 25.0, 50.0];
const ZETA_STARTS: [f64; 4] = [0.3, 0.7, 1.5, 3.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once the log-parameter step falls below this.
    pub step_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
        }
    }
}

fn check_series(u: &[f64], y: &[f64], dt: f64) -> Result<()> {
    if u.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} vs {}",
            u.len(),
            y.len()
        )));
    }
    if u.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "need at least 10 samples, got {}",
            u.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sample interval must be positive, got {dt}"
        )));
    }
    if u.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contain non-finite values".into()));
    }
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
        return Err(Error::InsufficientExcitation("input is constant".into()));
    }
    Ok(())
}

/// Exact ZOH pair `(Phi, Gamma)` of the second-order companion form.
fn zoh_second(zeta: f64, omega: f64, dt: f64) -> (Matrix2<f64>, Vector2<f64>) {
    let w2 = omega * omega;
    #[rustfmt::skip]
    let m = Matrix3::new(
        0.0, 1.0, 0.0,
        -w2, -2.0 * zeta * omega, w2,
        0.0, 0.0, 0.0,
    ) * dt;
    let e = m.exp();
    (
        e.fixed_view::<2, 2>(0, 0).into_owned(),
        e.fixed_view::<2, 1>(0, 2).into_owned(),
    )
}

/// Unit-gain forced response from rest and free response from unit initial output.
fn basis_first(tau: f64, u: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let a = (-dt / tau).exp();
    let mut g = Vec::with_capacity(u.len());
    let mut h = Vec::with_capacity(u.len());
    let (mut x, mut f) = (0.0, 1.0);
    for &ui in u {
        g.push(x);
        h.push(f);
        x = a * x + (1.0 - a) * ui;
        f *= a;
    }
    (g, h)
}

fn basis_second(zeta: f64, omega: f64, u: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
    let (phi, gamma) = zoh_second(zeta, omega, dt);
    let mut g = Vec::with_capacity(u.len());
    let mut h = Vec::with_capacity(u.len());
    let mut x = Vector2::zeros();
    let mut f = Vector2::new(1.0, 0.0);
    for &ui in u {
        g.push(x[0]);
        h.push(f[0]);
        x = phi * x + gamma * ui;
        f = phi * f;
    }
    (g, h)
}

pub fn simulate_first_order(m: &FirstOrderModel<f64>, u: &[f64], dt: f64, y0: f64) -> Vec<f64> {
    let (g, h) = basis_first(m.tau, u, dt);
    g.iter().zip(&h).map(|(g, h)| m.k * g + y0 * h).collect()
}

/// Starts at output `y0` with zero rate.
pub fn simulate_second_order(m: &SecondOrderModel<f64>, u: &[f64], dt: f64, y0: f64) -> Vec<f64> {
    let (g, h) = basis_second(m.zeta, m.omega, u, dt);
    g.iter().zip(&h).map(|(g, h)| m.k * g + y0 * h).collect()
}

/// Gain and initial output are linear in the response; eliminate them by least squares.
struct Projected {
    k: f64,
    residual: Vec<f64>,
    cost: f64,
}

fn project(g: &[f64], h: &[f64], y: &[f64]) -> Option<Projected> {
    let (mut gg, mut gh, mut hh, mut gy, mut hy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        gg += g[i] * g[i];
        gh += g[i] * h[i];
        hh += h[i] * h[i];
        gy += g[i] * y[i];
        hy += h[i] * y[i];
    }
    let det = gg * hh - gh * gh;
    if !(det > 1e-14 * gg * hh) {
        return None;
    }
    let k = (gy * hh - hy * gh) / det;
    let y0 = (hy * gg - gy * gh) / det;
    let residual: Vec<f64> = (0..y.len()).map(|i| y[i] - k * g[i] - y0 * h[i]).collect();
    let cost = residual.iter().map(|r| r * r).sum();
    Some(Projected { k, residual, cost })
}

struct Solution {
    log_params: Vec<f64>,
    k: f64,
    cost: f64,
    converged: bool,
}

/// Levenberg-damped Gauss-Newton over log-parameters with central-difference Jacobian.
fn gauss_newton(eval: &dyn Fn(&[f64]) -> Option<Projected>, start: &[f64], opts: &FitOptions) -> Option<Solution> {
    let m = start.len();
    let mut theta = start.to_vec();
    let mut cur = eval(&theta)?;
    let mut mu = 1e-3;
    let fd = 1e-6;
    for _ in 0..opts.max_iterations {
        let n = cur.residual.len();
        let mut jac = DMatrix::<f64>::zeros(n, m);
        for j in 0..m {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += fd;
            tm[j] -= fd;
            let (Some(rp), Some(rm)) = (eval(&tp), eval(&tm)) else {
                return Some(Solution {
                    log_params: theta,
                    k: cur.k,
                    cost: cur.cost,
                    converged: false,
                });
            };
            // d(y - yhat)/dtheta
            for i in 0..n {
                jac[(i, j)] = (rp.residual[i] - rm.residual[i]) / (2.0 * fd);
            }
        }
        let r = DVector::from_column_slice(&cur.residual);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * r;
        let mut accepted = false;
        while mu < 1e12 {
            let mut lhs = jtj.clone();
            for d in 0..m {
                lhs[(d, d)] += mu * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = lhs.lu().solve(&(-&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let cand: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(t, s)| t + s.clamp(-2.0, 2.0))
                .collect();
            match eval(&cand) {
                Some(next) if next.cost <= cur.cost => {
                    let small = step.amax() < opts.step_tolerance;
                    let flat = cur.cost - next.cost <= 1e-12 * cur.cost;
                    theta = cand;
                    cur = next;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    if small || flat {
                        return Some(Solution {
                            log_params: theta,
                            k: cur.k,
                            cost: cur.cost,
                            converged: true,
                        });
                    }
                    break;
                }
                _ => mu *= 4.0,
            }
        }
        if !accepted {
            // no descent direction left at finite-difference resolution
            return Some(Solution {
                log_params: theta,
                k: cur.k,
                cost: cur.cost,
                converged: true,
            });
        }
    }
    Some(Solution {
        log_params: theta,
        k: cur.k,
        cost: cur.cost,
        converged: false,
    })
}

fn best_of(solutions: Vec<Solution>, opts: &FitOptions) -> Result<Solution> {
    let best_residual = solutions.iter().map(|s| s.cost).fold(f64::INFINITY, f64::min);
    solutions
        .into_iter()
        .filter(|s| s.converged && s.cost.is_finite())
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or(Error::NoConvergence {
            iterations: opts.max_iterations,
            best_residual,
        })
}

/// Output-error fit of `k / (tau s + 1)` to sampled input/output series.
pub fn fit_first_order(u: &[f64], y: &[f64], dt: f64) -> Result<FirstOrderModel<f64>> {
    fit_first_order_with(u, y, dt, &FitOptions::default())
}

pub fn fit_first_order_with(u: &[f64], y: &[f64], dt: f64, opts: &FitOptions) -> Result<FirstOrderModel<f64>> {
    check_series(u, y, dt)?;
    let eval = |p: &[f64]| {
        let (g, h) = basis_first(p[0].exp(), u, dt);
        project(&g, &h, y)
    };
    let sols = TAU_STARTS
        .iter()
        .filter_map(|t| gauss_newton(&eval, &[t.ln()], opts))
        .collect();
    let best = best_of(sols, opts)?;
    FirstOrderModel::new(best.k, best.log_params[0].exp())
}

/// Output-error fit of `k w^2 / (s^2 + 2 zeta w s + w^2)`.
pub fn fit_second_order(u: &[f64], y: &[f64], dt: f64) -> Result<SecondOrderModel<f64>> {
    fit_second_order_with(u, y, dt, &FitOptions::default())
}

pub fn fit_second_order_with(u: &[f64], y: &[f64], dt: f64, opts: &FitOptions) -> Result<SecondOrderModel<f64>> {
    check_series(u, y, dt)?;
    let eval = |p: &[f64]| {
        let (zeta, omega) = (p[0].exp(), p[1].exp());
        if !(zeta.is_finite() && omega.is_finite()) || omega * dt > 50.0 {
            return None;
        }
        let (g, h) = basis_second(zeta, omega, u, dt);
        project(&g, &h, y)
    };
    let mut sols = Vec::new();
    for w in OMEGA_STARTS {
        for z in ZETA_STARTS {
            if let Some(s) = gauss_newton(&eval, &[z.ln(), w.ln()], opts) {
                sols.push(s);
            }
        }
    }
    let best = best_of(sols, opts)?;
    SecondOrderModel::new(best.k, best.log_params[0].exp(), best.log_params[1].exp())
}
