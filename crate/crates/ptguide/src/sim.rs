//! Fixed-step closed-loop propagation.
//!
//! The plant is the physical kinematics plus the actuator integrators —
//! not the error dynamics — so the controller's convergence claims are
//! validated rather than assumed. Control is held constant over each RK4
//! step (zero-order hold); disturbances are sampled continuously inside
//! the stages to preserve the integrator order.

use crate::controller::{self, Controller, Mode};
use crate::error::{Error, Result};
use crate::kinematics::{relative_rhs, wrap_angle, RelativeState, TargetState, R_MIN, V_MIN};
use crate::ptime::GainSchedule;
use crate::reference::{plan_velocity_profile, ReferenceParams, ReferenceTrajectory};
use crate::scenario::{
    ArrivalReport, ControlConfig, Scenario, SimTrace, TargetSpec, TraceRow, VehicleArrival,
    VehicleScenario,
};

/// Convergence thresholds checked at the clamp step `Td - eps_clamp`.
/// The speed-error allowance reflects the backward-differenced
/// feedforward: the speed command twists by `gain1 * R_e` per step as the
/// gains diverge, so `e_V` of order 1 m/s at the clamp is expected even
/// when the terminal geometry is met to centimeters.
pub const R_CONV_TOL: f64 = 5.0;
pub const Q_CONV_TOL_DEG: f64 = 0.5;
pub const EV_CONV_TOL: f64 = 2.0;
pub const EETA_CONV_TOL: f64 = 0.01;

/// Classical 4-stage Runge-Kutta step for a fallible right-hand side.
pub fn rk4_step<const N: usize>(
    f: &dyn Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    t: f64,
    y: &[f64; N],
    dt: f64,
) -> Result<[f64; N]> {
    let add = |y: &[f64; N], k: &[f64; N], h: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += h * k[i];
        }
        out
    };
    let k1 = f(t, y)?;
    let k2 = f(t + dt / 2.0, &add(y, &k1, dt / 2.0))?;
    let k3 = f(t + dt / 2.0, &add(y, &k2, dt / 2.0))?;
    let k4 = f(t + dt, &add(y, &k3, dt))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Plant right-hand side over `y = [R, q, V_s, theta_s, rd]` with the
/// control held fixed at `u` and the disturbance evaluated continuously.
pub fn plant_rhs(
    t: f64,
    y: &[f64; 5],
    u: (f64, f64),
    dist: (f64, f64),
    target: &TargetState,
    traj: &ReferenceTrajectory,
) -> Result<[f64; 5]> {
    if y[0] <= R_MIN || y[2] <= V_MIN {
        return Err(Error::Propagation {
            t,
            message: format!("state floor violated: R = {}, V_s = {}", y[0], y[2]),
        });
    }
    let state = RelativeState {
        r: y[0],
        q: y[1],
        vs: y[2],
        theta_s: y[3],
    };
    let (r_dot, q_dot) = relative_rhs(&state, target)?;
    Ok([
        r_dot,
        q_dot,
        u.0 + dist.0,
        u.1 / y[2] + dist.1,
        traj.rd_rate(t, y[4]),
    ])
}

fn schedule(control: &ControlConfig) -> GainSchedule {
    GainSchedule::new(
        control.td,
        control.h1,
        control.h2,
        control.k1,
        control.k2,
        control.lambda2,
        control.eps_clamp,
    )
}

fn target_state(target: &TargetSpec) -> TargetState {
    TargetState {
        vt: target.vt,
        theta_t: target.theta_t,
        x: target.x_t0,
        y: target.y_t0,
    }
}

/// Build the per-vehicle reference generator: geometry plus the cubic
/// speed profile meeting the common terminal time.
pub fn build_reference(
    vehicle: &VehicleScenario,
    control: &ControlConfig,
) -> Result<ReferenceTrajectory> {
    let params = ReferenceParams::new(
        vehicle.r0,
        vehicle.rf,
        vehicle.q0,
        vehicle.qf,
        vehicle.eta_d0,
        control.n1,
        control.n2,
    )?;
    let profile = plan_velocity_profile(vehicle.vs0, control.vdf, params.sd, control.td, 3)?;
    Ok(ReferenceTrajectory::new(params, profile, control.vdf))
}

/// Closed-loop run of one vehicle over `[0, t_end]`.
pub fn run_single_until(
    vehicle: &VehicleScenario,
    target: &TargetSpec,
    control: &ControlConfig,
    t_end: f64,
) -> Result<SimTrace> {
    let traj = build_reference(vehicle, control)?;
    let sched = schedule(control);
    let tstate = target_state(target);
    let dt = control.dt;
    let n_steps = (t_end / dt).round() as usize;
    let clamp_step = ((control.td - control.eps_clamp) / dt).round() as usize;

    let mut ctrl = Controller::new(sched);
    let mut y = [
        vehicle.r0,
        vehicle.q0,
        vehicle.vs0,
        vehicle.q0 - vehicle.eta_d0,
        0.0,
    ];
    let mut trace = SimTrace {
        rows: Vec::with_capacity(n_steps + 1),
        ..SimTrace::default()
    };

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        if y[0] <= R_MIN || y[2] <= V_MIN {
            return Err(Error::Propagation {
                t,
                message: format!("state floor violated: R = {}, V_s = {}", y[0], y[2]),
            });
        }
        let refs = traj.state(t, y[4]);
        let state = RelativeState {
            r: y[0],
            q: y[1],
            vs: y[2],
            theta_s: y[3],
        };
        let out = ctrl.step(t, &state, &refs, &tstate)?;
        if out.mode == Mode::Keeping && !out.gain_ok {
            trace.gain_condition_ok = Some(false);
        } else if out.mode == Mode::Keeping && trace.gain_condition_ok.is_none() {
            trace.gain_condition_ok = Some(true);
        }

        let (x_t, y_t) = tstate.position_at(t);
        trace.rows.push(TraceRow {
            t,
            r: y[0],
            q: y[1],
            eta_s: state.eta_s(),
            theta_s: y[3],
            v_s: y[2],
            v_d: refs.v_d,
            r_d: refs.r_d,
            q_d: refs.q_d,
            eta_d: refs.eta_d,
            r_e: y[0] - refs.r_d,
            q_e: y[1] - refs.q_d,
            e_v: out.e_v,
            e_eta: out.e_eta,
            u_v: out.u_v,
            u_theta: out.u_theta,
            // q is the angle of the vehicle-to-target ray (the sign
            // convention that makes R_dot = -V_s cos eta_s + V_t cos eta_t),
            // so the vehicle sits at target - R * e_q
            x: x_t - y[0] * y[1].cos(),
            y: y_t - y[0] * y[1].sin(),
            x_t,
            y_t,
        });

        if k == clamp_step {
            let r_e = (y[0] - refs.r_d).abs();
            let q_e = wrap_angle(y[1] - refs.q_d).abs();
            if r_e > R_CONV_TOL
                || q_e > Q_CONV_TOL_DEG.to_radians()
                || out.e_v.abs() > EV_CONV_TOL
                || out.e_eta.abs() > EETA_CONV_TOL
            {
                trace.convergence_failure = Some(format!(
                    "errors at clamp: |R_e| = {r_e:.3} m, |q_e| = {:.4} deg, \
                     |e_V| = {:.3}, |e_eta| = {:.4}",
                    q_e.to_degrees(),
                    out.e_v.abs(),
                    out.e_eta.abs()
                ));
            }
        }
        if k == n_steps {
            break;
        }

        let u = (out.u_v, out.u_theta);
        let dist_spec = control.disturbance;
        let rhs = |tt: f64, yy: &[f64; 5]| plant_rhs(tt, yy, u, dist_spec.eval(tt), &tstate, &traj);
        y = rk4_step(&rhs, t, &y, dt)?;
        // the reference coordinate saturates at arrival
        y[4] = y[4].min(traj.params.rf_scaled);
    }
    Ok(trace)
}

/// Standard single-vehicle run: approach plus keeping, `[0, 1.5 Td]`.
pub fn run_single(
    vehicle: &VehicleScenario,
    target: &TargetSpec,
    control: &ControlConfig,
) -> Result<SimTrace> {
    run_single_until(vehicle, target, control, 1.5 * control.td)
}

/// Simultaneous-arrival formation run. Per-vehicle failures annotate the
/// report without aborting the remaining vehicles.
pub fn run_formation(scenario: &Scenario) -> Result<(Vec<SimTrace>, ArrivalReport)> {
    if scenario.vehicles.len() < 2 {
        return Err(Error::validation(
            "vehicles",
            "formation run requires at least 2 vehicles",
        ));
    }
    let control = &scenario.control;
    let mut traces = Vec::new();
    let mut per_vehicle = Vec::new();
    for vehicle in &scenario.vehicles {
        let s_d = ReferenceParams::new(
            vehicle.r0,
            vehicle.rf,
            vehicle.q0,
            vehicle.qf,
            vehicle.eta_d0,
            control.n1,
            control.n2,
        )
        .map(|p| p.sd);
        match (s_d, run_single(vehicle, &scenario.target, control)) {
            (Ok(s_d), Ok(trace)) => {
                let idx = (control.td / control.dt).round() as usize;
                let row = &trace.rows[idx.min(trace.rows.len() - 1)];
                per_vehicle.push(VehicleArrival {
                    r_final: row.r,
                    q_final_deg: row.q.to_degrees(),
                    r_err: (row.r - vehicle.rf).abs(),
                    q_err_deg: wrap_angle(row.q - vehicle.qf).abs().to_degrees(),
                    s_d,
                    failure: trace.convergence_failure.clone(),
                });
                traces.push(trace);
            }
            (s_d, run) => {
                let message = match run {
                    Err(e) => e.to_string(),
                    Ok(_) => s_d.as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
                };
                per_vehicle.push(VehicleArrival {
                    r_final: f64::NAN,
                    q_final_deg: f64::NAN,
                    r_err: f64::NAN,
                    q_err_deg: f64::NAN,
                    s_d: s_d.unwrap_or(f64::NAN),
                    failure: Some(message.clone()),
                });
                traces.push(SimTrace {
                    rows: Vec::new(),
                    convergence_failure: Some(message),
                    gain_condition_ok: None,
                });
            }
        }
    }
    let report = ArrivalReport {
        td: control.td,
        per_vehicle,
    };
    Ok((traces, report))
}

/// One sample of the first-layer convergence-envelope run.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeSample {
    pub t: f64,
    /// `mu1 * ||(R_e, q_e)||`
    pub lhs: f64,
    /// `exp(k1 * phi1) * ||(R_e, q_e)(0)||`
    pub rhs: f64,
}

/// Integrate the pinned kinematic layer — `(V_s, eta_s)` identically equal
/// to the virtual command — from a perturbed initial condition, recording
/// the scaled error against its prescribed-time envelope. `phi1` is
/// accumulated by per-step Simpson.
pub fn run_pinned_kinematic(
    vehicle: &VehicleScenario,
    target: &TargetSpec,
    control: &ControlConfig,
    perturb: (f64, f64),
) -> Result<Vec<EnvelopeSample>> {
    let traj = build_reference(vehicle, control)?;
    let sched = schedule(control);
    let tstate = target_state(target);
    let dt = control.dt;
    // stop at the clamp time: an RK4 substep evaluated at t = Td would
    // touch the terminal singularity of the time scaling
    let n_steps = ((control.td - control.eps_clamp) / dt).round() as usize;

    let rhs = |t: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
        // the reference coordinate can saturate slightly before Td (the
        // terminal speed goes to zero, so the crossing time is sensitive
        // to the travel-range quadrature); after saturation the reference
        // point is frozen, and the pinned law must see v_d = 0 or it
        // injects a spurious recession bias
        let arrived = y[2] >= traj.params.rf_scaled;
        let mut refs = traj.state(t, y[2].min(traj.params.rf_scaled));
        if arrived {
            refs.v_d = 0.0;
        }
        let guess = RelativeState {
            r: y[0],
            q: y[1],
            vs: refs.v_d.max(10.0 * V_MIN),
            theta_s: y[1] - refs.eta_d,
        };
        let (state, _) = controller::pinned_virtual_state(&guess, &refs, &tstate, &sched, t)?;
        let (r_dot, q_dot) = relative_rhs(&state, &tstate)?;
        let rd_dot = if arrived { 0.0 } else { traj.rd_rate(t, y[2]) };
        Ok([r_dot, q_dot, rd_dot])
    };

    let refs0 = traj.state(0.0, 0.0);
    let mut y = [refs0.r_d + perturb.0, refs0.q_d + perturb.1, 0.0];
    let e0 = perturb.0.hypot(perturb.1);
    let mut phi1 = 0.0;
    let mut samples = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let t = k as f64 * dt;
        let refs = traj.state(t, y[2]);
        let err = ((y[0] - refs.r_d).powi(2) + (y[1] - refs.q_d).powi(2)).sqrt();
        samples.push(EnvelopeSample {
            t,
            lhs: sched.mu(t, sched.h1) * err,
            rhs: (sched.k1 * phi1).exp() * e0,
        });
        if k == n_steps {
            break;
        }
        y = rk4_step(&rhs, t, &y, dt)?;
        y[2] = y[2].min(traj.params.rf_scaled);
        // phi1 decrement over [t, t + dt] by Simpson
        let (a, m, b) = (
            sched.mu(t, sched.h1),
            sched.mu(t + dt / 2.0, sched.h1),
            sched.mu(t + dt, sched.h1),
        );
        phi1 -= dt / 6.0 * (a + 4.0 * m + b);
    }
    Ok(samples)
}
