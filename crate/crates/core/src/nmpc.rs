//! Receding-horizon position controller.
//!
//! The optimal control problem is transcribed by single shooting over `N` RK4 steps and
//! solved with a Gauss-Newton SQP: the objective is a sum of weighted squares, the
//! Hessian is approximated by `2 J^T W J`, box constraints on the inputs are handled by
//! projection with an active set, and a backtracking Armijo search along the projected
//! arc guarantees monotone descent.
//!
//! The OCP state is `(p, v, roll, pitch)`. Heading is frozen at its current value over
//! the horizon and regulated separately by a proportional yaw-rate law.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{dynamics_jacobians, rk4_step, steady_state, ControlInput, StateVector, VehicleParams};
use crate::error::{Error, Result};
use crate::frames::{EulerAngles, Vec3};
use crate::scalar::wrap_angle;
use crate::trajectory::{sample_reference, ReferenceTrajectory};

pub const NX: usize = 8;
pub const NU: usize = 3;

pub type Mat8 = SMatrix<f64, NX, NX>;
pub type Mat8x3 = SMatrix<f64, NX, NU>;
type Vec8 = SVector<f64, NX>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcWeights {
    /// Diagonal of the stage state weight: p, v, roll, pitch.
    pub q: [f64; NX],
    /// Diagonal of the input weight: roll, pitch, thrust.
    pub r: [f64; NU],
    /// Diagonal of the terminal weight.
    pub p: [f64; NX],
}

impl Default for MpcWeights {
    fn default() -> Self {
        let q = [40.0, 40.0, 60.0, 20.0, 20.0, 25.0, 10.0, 10.0];
        Self {
            q,
            r: [35.0, 35.0, 2.0],
            p: q.map(|w| 10.0 * w),
        }
    }
}

impl MpcWeights {
    pub fn validate(&self) -> Result<()> {
        if self.q.iter().chain(&self.p).any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config("state weights must be non-negative".into()));
        }
        if self.r.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config("input weights must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop when one iteration lowers the cost by less than this.
    pub cost_tolerance: f64,
    /// Stop when the projected gradient infinity-norm drops below this.
    pub gradient_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            cost_tolerance: 1e-8,
            gradient_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OcpSpec {
    pub n_steps: usize,
    pub dt: f64,
    pub weights: MpcWeights,
    /// `[lo, hi]` for roll (rad), pitch (rad) and thrust (N).
    pub input_bounds: [[f64; 2]; NU],
    pub params: VehicleParams<f64>,
    pub solver: SolverOptions,
}

impl OcpSpec {
    /// 20 steps of 0.1 s with the default weights and `U_C`.
    pub fn new(params: VehicleParams<f64>) -> Self {
        let mg = params.hover_thrust();
        let lim = std::f64::consts::FRAC_PI_6;
        Self {
            n_steps: 20,
            dt: 0.1,
            weights: MpcWeights::default(),
            input_bounds: [[-lim, lim], [-lim, lim], [0.3 * mg, 1.8 * mg]],
            params,
            solver: SolverOptions::default(),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::Config(format!(
                "horizon needs at least 2 steps, got {}",
                self.n_steps
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("horizon step must be positive, got {}", self.dt)));
        }
        for (i, [lo, hi]) in self.input_bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!(
                    "input bound {i} needs lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        if self.input_bounds[2][0] < 0.0 {
            return Err(Error::Config("thrust lower bound must be non-negative".into()));
        }
        self.weights.validate()?;
        self.params.validate()
    }

    pub fn project(&self, u: [f64; NU]) -> [f64; NU] {
        std::array::from_fn(|i| u[i].clamp(self.input_bounds[i][0], self.input_bounds[i][1]))
    }

    pub fn contains(&self, u: &ControlInput<f64>) -> bool {
        let a = [u.roll, u.pitch, u.thrust];
        (0..NU).all(|i| a[i] >= self.input_bounds[i][0] && a[i] <= self.input_bounds[i][1])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReferencePoint {
    pub x_ref: StateVector<f64>,
    pub u_ref: ControlInput<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlPlan {
    pub first_input: ControlInput<f64>,
    pub predicted_states: Vec<StateVector<f64>>,
    pub predicted_inputs: Vec<ControlInput<f64>>,
    pub cost: f64,
    pub iterations: usize,
    /// Objective after each accepted iterate, starting with the initial guess.
    pub cost_history: Vec<f64>,
}

fn reduced(x: &StateVector<f64>) -> Vec8 {
    let a = x.to_array();
    Vec8::from_fn(|i, _| a[i])
}

fn input(u: &[f64], yaw_rate: f64) -> ControlInput<f64> {
    ControlInput::new(u[0], u[1], u[2], yaw_rate)
}

/// Jacobians of one RK4 step with respect to `(p, v, roll, pitch)` and `(roll, pitch, thrust)`.
///
/// Heading and yaw rate are held fixed, matching the controller's prediction model.
pub fn linearize_dynamics(
    x: &StateVector<f64>,
    u: &ControlInput<f64>,
    params: &VehicleParams<f64>,
    f_ext: Vec3<f64>,
    dt: f64,
) -> (Mat8, Mat8x3) {
    let u = ControlInput::new(u.roll, u.pitch, u.thrust, 0.0);
    let f = |x: &StateVector<f64>| crate::dynamics::mav_dynamics(x, &u, params, f_ext);
    let jac = |x: &StateVector<f64>| {
        let (a, b) = dynamics_jacobians(x, &u, params);
        (Mat8::from_fn(|i, j| a[i][j]), Mat8x3::from_fn(|i, j| b[i][j]))
    };
    let h = dt / 2.0;
    let eye = Mat8::identity();

    let k1 = f(x);
    let (a1, b1) = jac(x);
    let x2 = x.add_scaled(&k1, h);
    let k2 = f(&x2);
    let (a2, b2) = jac(&x2);
    let x3 = x.add_scaled(&k2, h);
    let k3 = f(&x3);
    let (a3, b3) = jac(&x3);
    let x4 = x.add_scaled(&k3, dt);
    let (a4, b4) = jac(&x4);

    let k1x = a1;
    let k1u = b1;
    let k2x = a2 * (eye + k1x * h);
    let k2u = a2 * k1u * h + b2;
    let k3x = a3 * (eye + k2x * h);
    let k3u = a3 * k2u * h + b3;
    let k4x = a4 * (eye + k3x * dt);
    let k4u = a4 * k3u * dt + b4;

    let s = dt / 6.0;
    (
        eye + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * s,
        (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * s,
    )
}

/// Input holding the reference velocity at rest acceleration under `f_ext`.
pub fn steady_state_input(
    reference: &StateVector<f64>,
    f_ext: Vec3<f64>,
    params: &VehicleParams<f64>,
) -> Result<ControlInput<f64>> {
    steady_state(params, f_ext, Vec3::zeros(), reference.v, reference.attitude.yaw).map(|s| s.input)
}

struct Problem<'a> {
    ocp: &'a OcpSpec,
    x0: StateVector<f64>,
    refs: &'a [ReferencePoint],
    f_ext: Vec3<f64>,
}

impl Problem<'_> {
    fn rollout(&self, u: &[f64]) -> Vec<StateVector<f64>> {
        let mut xs = Vec::with_capacity(self.ocp.n_steps + 1);
        let mut x = self.x0;
        xs.push(x);
        for k in 0..self.ocp.n_steps {
            x = rk4_step(&x, &input(&u[NU * k..], 0.0), &self.ocp.params, self.f_ext, self.ocp.dt);
            xs.push(x);
        }
        xs
    }

    fn state_error(&self, x: &StateVector<f64>, k: usize) -> Vec8 {
        reduced(x) - reduced(&self.refs[k].x_ref)
    }

    fn input_error(&self, u: &[f64], k: usize) -> [f64; NU] {
        let r = &self.refs[k].u_ref;
        [u[NU * k] - r.roll, u[NU * k + 1] - r.pitch, u[NU * k + 2] - r.thrust]
    }

    fn state_weight(&self, k: usize) -> [f64; NX] {
        let w = &self.ocp.weights;
        if k == self.ocp.n_steps {
            w.p
        } else {
            w.q.map(|q| q * self.ocp.dt)
        }
    }

    fn cost_of(&self, u: &[f64], xs: &[StateVector<f64>]) -> f64 {
        let mut j = 0.0;
        for (k, x) in xs.iter().enumerate() {
            let e = self.state_error(x, k);
            let w = self.state_weight(k);
            j += (0..NX).map(|i| w[i] * e[i] * e[i]).sum::<f64>();
        }
        for k in 0..self.ocp.n_steps {
            let e = self.input_error(u, k);
            j += (0..NU)
                .map(|i| self.ocp.weights.r[i] * self.ocp.dt * e[i] * e[i])
                .sum::<f64>();
        }
        j
    }

    fn cost(&self, u: &[f64]) -> f64 {
        self.cost_of(u, &self.rollout(u))
    }

    /// Gauss-Newton Hessian and exact gradient of the objective.
    fn derivatives(&self, u: &[f64], xs: &[StateVector<f64>]) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.ocp.n_steps;
        let m = NU * n;
        let mut hess = DMatrix::<f64>::zeros(m, m);
        let mut grad = DVector::<f64>::zeros(m);
        // sensitivity of x_k to all inputs; columns beyond NU*k are zero
        let mut sens = DMatrix::<f64>::zeros(NX, m);
        for k in 0..n {
            let (a, b) = linearize_dynamics(
                &xs[k],
                &input(&u[NU * k..], 0.0),
                &self.ocp.params,
                self.f_ext,
                self.ocp.dt,
            );
            let cols = NU * k;
            let mut next = DMatrix::<f64>::zeros(NX, m);
            if cols > 0 {
                let prev = sens.columns(0, cols);
                next.columns_mut(0, cols).copy_from(&(a * prev));
            }
            next.fixed_view_mut::<NX, NU>(0, cols).copy_from(&b);
            sens = next;
            let used = cols + NU;
            let w = self.state_weight(k + 1);
            let e = self.state_error(&xs[k + 1], k + 1);
            let s = sens.columns(0, used);
            let mut ws = s.clone_owned();
            for i in 0..NX {
                ws.row_mut(i).scale_mut(w[i]);
            }
            let mut hb = hess.view_mut((0, 0), (used, used));
            hb += s.transpose() * &ws * 2.0;
            let we = DVector::from_fn(NX, |i, _| w[i] * e[i]);
            let mut gb = grad.rows_mut(0, used);
            gb += s.transpose() * we * 2.0;
        }
        for k in 0..n {
            let e = self.input_error(u, k);
            for i in 0..NU {
                let r = self.ocp.weights.r[i] * self.ocp.dt;
                hess[(NU * k + i, NU * k + i)] += 2.0 * r;
                grad[NU * k + i] += 2.0 * r * e[i];
            }
        }
        (hess, grad)
    }

    fn project(&self, u: &mut [f64]) {
        for (i, v) in u.iter_mut().enumerate() {
            let [lo, hi] = self.ocp.input_bounds[i % NU];
            *v = v.clamp(lo, hi);
        }
    }

    fn projected_gradient_norm(&self, u: &[f64], g: &DVector<f64>) -> f64 {
        let mut step: Vec<f64> = u.iter().zip(g.iter()).map(|(u, g)| u - g).collect();
        self.project(&mut step);
        u.iter().zip(&step).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Backtracking along the projected arc `P(u + alpha d)` with an Armijo test.
    fn line_search(&self, u: &[f64], j0: f64, g: &DVector<f64>, d: &[f64]) -> Option<(Vec<f64>, f64)> {
        let mut alpha = 1.0;
        for _ in 0..40 {
            let mut cand: Vec<f64> = u.iter().zip(d).map(|(u, d)| u + alpha * d).collect();
            self.project(&mut cand);
            let dec: f64 = cand.iter().zip(u).zip(g.iter()).map(|((c, u), g)| g * (c - u)).sum();
            if dec < 0.0 {
                let j = self.cost(&cand);
                if j <= j0 + 1e-4 * dec {
                    return Some((cand, j));
                }
            }
            alpha *= 0.5;
        }
        None
    }

    fn newton_direction(&self, u: &[f64], h: &DMatrix<f64>, g: &DVector<f64>) -> Vec<f64> {
        let m = u.len();
        let tol = |b: f64| 1e-9 * (1.0 + b.abs());
        let active: Vec<bool> = (0..m)
            .map(|i| {
                let [lo, hi] = self.ocp.input_bounds[i % NU];
                (u[i] <= lo + tol(lo) && g[i] > 0.0) || (u[i] >= hi - tol(hi) && g[i] < 0.0)
            })
            .collect();
        let free: Vec<usize> = (0..m).filter(|&i| !active[i]).collect();
        let mut d = vec![0.0; m];
        if free.is_empty() {
            return d;
        }
        let hf = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
        let gf = DVector::from_fn(free.len(), |a, _| -g[free[a]]);
        let sol = match hf.clone().cholesky() {
            Some(c) => c.solve(&gf),
            None => hf.lu().solve(&gf).unwrap_or(gf),
        };
        for (a, &i) in free.iter().enumerate() {
            d[i] = sol[a];
        }
        d
    }
}

/// Solves the horizon problem from `x0`. Always returns a plan inside the input box.
pub fn solve(
    ocp: &OcpSpec,
    x0: &StateVector<f64>,
    refs: &[ReferencePoint],
    f_ext: Vec3<f64>,
    warm_start: Option<&ControlPlan>,
) -> Result<ControlPlan> {
    ocp.validate()?;
    if !x0.is_finite() {
        return Err(Error::InvalidInput("initial state is not finite".into()));
    }
    if !f_ext.is_finite() {
        return Err(Error::InvalidInput("external force estimate is not finite".into()));
    }
    if refs.len() != ocp.n_steps + 1 {
        return Err(Error::InvalidInput(format!(
            "expected {} reference points, got {}",
            ocp.n_steps + 1,
            refs.len()
        )));
    }
    if refs.iter().any(|r| !r.x_ref.is_finite() || !r.u_ref.is_finite()) {
        return Err(Error::InvalidInput("reference is not finite".into()));
    }
    let prob = Problem {
        ocp,
        x0: *x0,
        refs,
        f_ext,
    };
    let n = ocp.n_steps;

    let mut u: Vec<f64> = match warm_start {
        Some(w) if w.predicted_inputs.len() == n => w
            .predicted_inputs
            .iter()
            .flat_map(|c| [c.roll, c.pitch, c.thrust])
            .collect(),
        _ => refs[..n]
            .iter()
            .flat_map(|r| [r.u_ref.roll, r.u_ref.pitch, r.u_ref.thrust])
            .collect(),
    };
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("warm start is not finite".into()));
    }
    prob.project(&mut u);

    let mut xs = prob.rollout(&u);
    let mut j = prob.cost_of(&u, &xs);
    let mut history = vec![j];
    let mut iterations = 0;
    while iterations < ocp.solver.max_iterations {
        let (h, g) = prob.derivatives(&u, &xs);
        if prob.projected_gradient_norm(&u, &g) < ocp.solver.gradient_tolerance {
            break;
        }
        let d = prob.newton_direction(&u, &h, &g);
        let step = prob.line_search(&u, j, &g, &d).or_else(|| {
            // fall back to a scaled projected-gradient step
            let scale = 1.0 / h.diagonal().amax().max(1e-12);
            let d: Vec<f64> = g.iter().map(|g| -g * scale).collect();
            prob.line_search(&u, j, &g, &d)
        });
        let Some((un, jn)) = step else { break };
        iterations += 1;
        let decrease = j - jn;
        u = un;
        j = jn;
        xs = prob.rollout(&u);
        history.push(j);
        if decrease < ocp.solver.cost_tolerance {
            break;
        }
    }

    let inputs: Vec<ControlInput<f64>> = (0..n).map(|k| input(&u[NU * k..], 0.0)).collect();
    if !j.is_finite() || xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical {
            time: 0.0,
            reason: "horizon prediction diverged".into(),
            dump: String::new(),
        });
    }
    Ok(ControlPlan {
        first_input: inputs[0],
        predicted_states: xs,
        predicted_inputs: inputs,
        cost: j,
        iterations,
        cost_history: history,
    })
}

/// Re-evaluates the objective of a plan from scratch.
pub fn evaluate_cost(
    ocp: &OcpSpec,
    x0: &StateVector<f64>,
    refs: &[ReferencePoint],
    f_ext: Vec3<f64>,
    inputs: &[ControlInput<f64>],
) -> f64 {
    let prob = Problem {
        ocp,
        x0: *x0,
        refs,
        f_ext,
    };
    let u: Vec<f64> = inputs.iter().flat_map(|c| [c.roll, c.pitch, c.thrust]).collect();
    prob.cost(&u)
}

/// Horizon references from a trajectory: position, velocity and the attitude and input
/// that realize the reference acceleration. Infeasible samples fall back to the hover
/// balance, and inputs are clipped into `U_C`.
pub fn horizon_references(
    ocp: &OcpSpec,
    traj: &ReferenceTrajectory<f64>,
    t0: f64,
    f_ext: Vec3<f64>,
) -> Result<Vec<ReferencePoint>> {
    (0..=ocp.n_steps)
        .map(|k| {
            let s = sample_reference(traj, t0 + k as f64 * ocp.dt)?;
            let ss = steady_state(&ocp.params, f_ext, s.a, s.v, s.yaw)
                .or_else(|_| steady_state(&ocp.params, f_ext, Vec3::zeros(), Vec3::zeros(), s.yaw))
                .or_else(|_| steady_state(&ocp.params, Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), s.yaw))?;
            let u = ocp.project([ss.input.roll, ss.input.pitch, ss.input.thrust]);
            Ok(ReferencePoint {
                x_ref: StateVector::new(s.p, s.v, EulerAngles::new(ss.attitude.roll, ss.attitude.pitch, s.yaw)),
                u_ref: ControlInput::new(u[0], u[1], u[2], 0.0),
            })
        })
        .collect()
}

/// Proportional heading law, clipped to `+-limit`.
pub fn yaw_rate_command(yaw_ref: f64, yaw: f64, k_psi: f64, limit: f64) -> f64 {
    (k_psi * wrap_angle(yaw_ref - yaw)).clamp(-limit, limit)
}

#[derive(Clone, Debug)]
pub struct MpcController {
    pub ocp: OcpSpec,
    pub k_psi: f64,
    pub yaw_rate_limit: f64,
    plan: Option<ControlPlan>,
}

impl MpcController {
    pub fn new(ocp: OcpSpec, k_psi: f64, yaw_rate_limit: f64) -> Result<Self> {
        ocp.validate()?;
        if !(k_psi >= 0.0 && yaw_rate_limit > 0.0) {
            return Err(Error::Config(
                "yaw gain must be non-negative and yaw-rate limit positive".into(),
            ));
        }
        Ok(Self {
            ocp,
            k_psi,
            yaw_rate_limit,
            plan: None,
        })
    }

    pub fn last_plan(&self) -> Option<&ControlPlan> {
        self.plan.as_ref()
    }

    pub fn reset(&mut self) {
        self.plan = None;
    }

    /// Solves at time `t` from `x0`, warm-started with the previous plan shifted one step.
    pub fn receding_horizon_step(
        &mut self,
        x0: &StateVector<f64>,
        traj: &ReferenceTrajectory<f64>,
        t: f64,
        f_ext: Vec3<f64>,
    ) -> Result<ControlInput<f64>> {
        let refs = horizon_references(&self.ocp, traj, t, f_ext)?;
        let warm = self.plan.take().map(|mut p| {
            p.predicted_inputs.remove(0);
            let last = *p.predicted_inputs.last().unwrap_or(&refs[self.ocp.n_steps - 1].u_ref);
            p.predicted_inputs.push(last);
            p
        });
        let plan = solve(&self.ocp, x0, &refs, f_ext, warm.as_ref())?;
        let yaw_ref = refs[0].x_ref.attitude.yaw;
        let mut u = plan.first_input;
        u.yaw_rate = yaw_rate_command(yaw_ref, x0.attitude.yaw, self.k_psi, self.yaw_rate_limit);
        self.plan = Some(plan);
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::hover_input;

    fn hover_refs(ocp: &OcpSpec, p: Vec3<f64>) -> Vec<ReferencePoint> {
        let u = hover_input(&ocp.params, Vec3::zeros()).unwrap();
        vec![
            ReferencePoint {
                x_ref: StateVector::at_rest(p),
                u_ref: u,
            };
            ocp.n_steps + 1
        ]
    }

    #[test]
    fn optimum_at_reference() {
        let ocp = OcpSpec::new(VehicleParams::default());
        let refs = hover_refs(&ocp, Vec3::new(1.0, 2.0, 3.0));
        let x0 = refs[0].x_ref;
        let plan = solve(&ocp, &x0, &refs, Vec3::zeros(), None).unwrap();
        let u = refs[0].u_ref;
        assert!((plan.first_input.roll - u.roll).abs() <= 1e-6);
        assert!((plan.first_input.pitch - u.pitch).abs() <= 1e-6);
        assert!((plan.first_input.thrust - u.thrust).abs() <= 1e-6);
        assert!(plan.cost <= 1e-10);
        assert_eq!(plan.predicted_states[0], x0);
    }

    #[test]
    fn offset_commands_negative_pitch() {
        let ocp = OcpSpec::new(VehicleParams::default());
        let refs = hover_refs(&ocp, Vec3::zeros());
        let x0 = StateVector::at_rest(Vec3::new(1.0, 0.0, 0.0));
        let plan = solve(&ocp, &x0, &refs, Vec3::zeros(), None).unwrap();
        assert!(plan.first_input.pitch < 0.0, "{:?}", plan.first_input);
        let idle: Vec<ControlInput<f64>> = refs[..ocp.n_steps].iter().map(|r| r.u_ref).collect();
        assert!(plan.cost < evaluate_cost(&ocp, &x0, &refs, Vec3::zeros(), &idle));
        assert!(plan.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn position_rows_follow_double_integrator() {
        let p = VehicleParams::default();
        let x = StateVector::at_rest(Vec3::zeros());
        let u = hover_input(&p, Vec3::zeros()).unwrap();
        let dt = 0.1;
        let (a, _) = linearize_dynamics(&x, &u, &p, Vec3::zeros(), dt);
        for i in 0..3 {
            assert!((a[(i, 3 + i)] - dt).abs() < dt * dt);
            assert_eq!(a[(i, i)], 1.0);
        }
    }

    #[test]
    fn yaw_law() {
        assert!((yaw_rate_command(0.1, 0.0, 1.0, 1.0) - 0.1).abs() < 1e-15);
        assert!((yaw_rate_command(-3.0, 3.0, 1.0, 5.0) - wrap_angle(-6.0)).abs() < 1e-12);
        assert_eq!(yaw_rate_command(2.0, 0.0, 1.0, 0.5), 0.5);
    }

    #[test]
    fn rejects_bad_arguments() {
        let ocp = OcpSpec::new(VehicleParams::default());
        let refs = hover_refs(&ocp, Vec3::zeros());
        let mut x0 = StateVector::zeros();
        x0.p.x = f64::NAN;
        assert!(solve(&ocp, &x0, &refs, Vec3::zeros(), None).is_err());
        assert!(solve(&ocp, &StateVector::zeros(), &refs[1..], Vec3::zeros(), None).is_err());
        let mut bad = ocp;
        bad.n_steps = 1;
        assert!(bad.validate().is_err());
        bad = ocp;
        bad.input_bounds[2] = [-1.0, 10.0];
        assert!(bad.validate().is_err());
    }
}
