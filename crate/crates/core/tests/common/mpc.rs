use mav_core::dynamics::{hover_input, rk4_step, ControlInput, StateVector, VehicleParams};
use mav_core::frames::{EulerAngles, Vec3};
use mav_core::nmpc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn hover_refs(ocp: &OcpSpec, p: Vec3<f64>) -> Vec<ReferencePoint> {
    let u = hover_input(&ocp.params, Vec3::zeros()).unwrap();
    vec![
        ReferencePoint {
            x_ref: StateVector::at_rest(p),
            u_ref: u,
        };
        ocp.n_steps + 1
    ]
}

pub fn random_state(rng: &mut ChaCha8Rng) -> StateVector<f64> {
    let mut r = |s: f64| rng.random_range(-s..s);
    StateVector::new(
        Vec3::new(r(5.0), r(5.0), r(5.0)),
        Vec3::new(r(3.0), r(3.0), r(2.0)),
        EulerAngles::new(r(0.5), r(0.5), r(3.1)),
    )
}

pub fn step8(x: &StateVector<f64>, u: &ControlInput<f64>, p: &VehicleParams<f64>, f: Vec3<f64>, dt: f64) -> [f64; 8] {
    let n = rk4_step(x, &ControlInput::new(u.roll, u.pitch, u.thrust, 0.0), p, f, dt).to_array();
    std::array::from_fn(|i| n[i])
}

pub fn small_ocp(n: usize) -> OcpSpec {
    let mut ocp = OcpSpec::new(VehicleParams::default());
    ocp.n_steps = n;
    ocp.solver.max_iterations = 200;
    ocp.solver.cost_tolerance = 1e-14;
    ocp.solver.gradient_tolerance = 1e-10;
    ocp
}

pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Worst relative error of the analytic `A`, `B` against central differences.
pub fn jacobian_errors(samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = VehicleParams::default();
    p.drag = 0.05;
    let eps = 1e-6;
    let dt = 0.1;
    let (mut worst_a, mut worst_b) = (0.0_f64, 0.0_f64);
    for _ in 0..samples {
        let x = random_state(&mut rng);
        let u = ControlInput::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(10.0..60.0),
            0.0,
        );
        let f = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.0);
        let (a, b) = linearize_dynamics(&x, &u, &p, f, dt);
        let (mut num, mut den) = (0.0_f64, 0.0_f64);
        for j in 0..8 {
            let mut xa = x.to_array();
            let mut xb = x.to_array();
            xa[j] += eps;
            xb[j] -= eps;
            let fa = step8(&StateVector::from_array(xa), &u, &p, f, dt);
            let fb = step8(&StateVector::from_array(xb), &u, &p, f, dt);
            for i in 0..8 {
                let fd = (fa[i] - fb[i]) / (2.0 * eps);
                num = num.max((a[(i, j)] - fd).abs());
                den = den.max(fd.abs());
            }
        }
        worst_a = worst_a.max(num / den);
        let (mut num, mut den) = (0.0_f64, 0.0_f64);
        for j in 0..3 {
            let mut ua = u.to_array();
            let mut ub = u.to_array();
            ua[j] += eps;
            ub[j] -= eps;
            let fa = step8(&x, &ControlInput::from_array(ua), &p, f, dt);
            let fb = step8(&x, &ControlInput::from_array(ub), &p, f, dt);
            for i in 0..8 {
                let fd = (fa[i] - fb[i]) / (2.0 * eps);
                // thrust is in newtons, angles in radians
                let s = if j == 2 { 20.0 } else { 1.0 };
                num = num.max(s * (b[(i, j)] - fd).abs());
                den = den.max(s * fd.abs());
            }
        }
        worst_b = worst_b.max(num / den);
    }
    (worst_a, worst_b)
}

/// Solver from the reference state: worst deviation of the plan from the reference.
pub fn optimum_at_reference_deviation() -> f64 {
    let ocp = OcpSpec::new(VehicleParams::default());
    let refs = hover_refs(&ocp, Vec3::new(1.0, 2.0, 3.0));
    let x0 = refs[0].x_ref;
    let plan = solve(&ocp, &x0, &refs, Vec3::zeros(), None).unwrap();
    let mut worst = 0.0_f64;
    for (u, r) in plan.predicted_inputs.iter().zip(&refs) {
        for (a, b) in u.to_array().iter().zip(r.u_ref.to_array()).take(3) {
            worst = worst.max((a - b).abs());
        }
    }
    for (x, r) in plan.predicted_states.iter().zip(&refs) {
        for (a, b) in x.to_array().iter().zip(r.x_ref.to_array()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Three thrust-only steps against an exhaustive 21^3 grid.
pub fn grid_oracle_thrust_only() -> Result<(), String> {
    let ocp = small_ocp(3);
    let refs = hover_refs(&ocp, Vec3::zeros());
    let x0 = StateVector::at_rest(Vec3::new(0.0, 0.0, -0.5));
    let plan = solve(&ocp, &x0, &refs, Vec3::zeros(), None).map_err(|e| e.to_string())?;
    let [tlo, thi] = ocp.input_bounds[2];
    let g = grid(tlo, thi, 21);
    let cell = g[1] - g[0];
    let mut best = (f64::INFINITY, [0.0; 3]);
    for &a in &g {
        for &b in &g {
            for &c in &g {
                let us = [a, b, c].map(|t| ControlInput::new(0.0, 0.0, t, 0.0));
                let j = evaluate_cost(&ocp, &x0, &refs, Vec3::zeros(), &us);
                if j < best.0 {
                    best = (j, [a, b, c]);
                }
            }
        }
    }
    if plan.cost > best.0 + 1e-9 {
        return Err(format!("cost {} above grid {}", plan.cost, best.0));
    }
    for k in 0..3 {
        let u = plan.predicted_inputs[k];
        if u.roll.abs() > 1e-9 || u.pitch.abs() > 1e-9 || (u.thrust - best.1[k]).abs() > cell {
            return Err(format!("step {k}: {u:?} vs grid thrust {}", best.1[k]));
        }
    }
    Ok(())
}

/// Two pitch+thrust steps against an exhaustive 21^4 grid.
pub fn grid_oracle_pitch_and_thrust() -> Result<(), String> {
    let ocp = small_ocp(2);
    let refs = hover_refs(&ocp, Vec3::zeros());
    let x0 = StateVector::at_rest(Vec3::new(0.3, 0.0, 0.0));
    let plan = solve(&ocp, &x0, &refs, Vec3::zeros(), None).map_err(|e| e.to_string())?;
    let [plo, phi] = ocp.input_bounds[1];
    let [tlo, thi] = ocp.input_bounds[2];
    let gp = grid(plo, phi, 21);
    let gt = grid(tlo, thi, 21);
    let cells = [gp[1] - gp[0], gt[1] - gt[0]];
    let mut best = (f64::INFINITY, [0.0; 4]);
    for &p0 in &gp {
        for &t0 in &gt {
            for &p1 in &gp {
                for &t1 in &gt {
                    let us = [ControlInput::new(0.0, p0, t0, 0.0), ControlInput::new(0.0, p1, t1, 0.0)];
                    let j = evaluate_cost(&ocp, &x0, &refs, Vec3::zeros(), &us);
                    if j < best.0 {
                        best = (j, [p0, t0, p1, t1]);
                    }
                }
            }
        }
    }
    if plan.cost > best.0 + 1e-9 {
        return Err(format!("cost {} above grid {}", plan.cost, best.0));
    }
    for k in 0..2 {
        let u = plan.predicted_inputs[k];
        if u.roll.abs() > 1e-9
            || (u.pitch - best.1[2 * k]).abs() > cells[0]
            || (u.thrust - best.1[2 * k + 1]).abs() > cells[1]
        {
            return Err(format!("step {k}: {u:?} vs grid {:?}", best.1));
        }
    }
    Ok(())
}

/// Random states, targets and forces: every returned input stays in the box, the cost
/// history is monotone and the reported cost re-evaluates exactly.
pub fn randomized_solves(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ocp = OcpSpec::new(VehicleParams::default());
    for i in 0..n {
        let x0 = random_state(&mut rng);
        let target = Vec3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        let f = Vec3::new(
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(-2.0..2.0),
        );
        let refs = hover_refs(&ocp, target);
        let plan = solve(&ocp, &x0, &refs, f, None).map_err(|e| format!("solve {i}: {e}"))?;
        if !plan.predicted_inputs.iter().all(|u| ocp.contains(u)) {
            return Err(format!("solve {i}: input outside bounds"));
        }
        if !plan.cost_history.windows(2).all(|w| w[1] <= w[0]) || plan.cost < 0.0 {
            return Err(format!("solve {i}: cost history not monotone"));
        }
        let again = evaluate_cost(&ocp, &x0, &refs, f, &plan.predicted_inputs);
        if (again - plan.cost).abs() > 1e-10 * plan.cost.max(1e-300) || plan.predicted_states[0] != x0 {
            return Err(format!("solve {i}: cost {} re-evaluates to {again}", plan.cost));
        }
    }
    Ok(())
}
