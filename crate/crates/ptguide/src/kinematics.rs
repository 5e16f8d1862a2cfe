//! Polar pursuit kinematics: error variables and the coupling/drift
//! matrices of the combined tracking model.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::reference::ReferenceState;

/// Floor on the relative distance; `1/R` appears in the LOS rate.
pub const R_MIN: f64 = 1e-3;
/// Floor on the vehicle speed; `M` and `B` become singular at `V_s = 0`.
pub const V_MIN: f64 = 1e-2;

/// Actual polar relative state of one vehicle with respect to the target.
#[derive(Debug, Clone, Copy)]
pub struct RelativeState {
    /// relative distance (m)
    pub r: f64,
    /// LOS angle (rad)
    pub q: f64,
    /// vehicle speed (m/s)
    pub vs: f64,
    /// vehicle path angle (rad)
    pub theta_s: f64,
}

impl RelativeState {
    /// Heading angle `eta_s = q - theta_s`, always recomputed.
    pub fn eta_s(&self) -> f64 {
        self.q - self.theta_s
    }
}

/// Constant-velocity target state.
#[derive(Debug, Clone, Copy)]
pub struct TargetState {
    pub vt: f64,
    pub theta_t: f64,
    pub x: f64,
    pub y: f64,
}

impl TargetState {
    pub fn eta_t(&self, q: f64) -> f64 {
        q - self.theta_t
    }

    /// Position at time `t` (closed form, constant velocity).
    pub fn position_at(&self, t: f64) -> (f64, f64) {
        (
            self.x + self.vt * self.theta_t.cos() * t,
            self.y + self.vt * self.theta_t.sin() * t,
        )
    }
}

/// Tracking errors between actual and reference relative states.
#[derive(Debug, Clone, Copy)]
pub struct ErrorState {
    /// `R - R_d`
    pub r_e: f64,
    /// `q - q_d`
    pub q_e: f64,
    /// `eta_s - eta_d`, wrapped to (-pi, pi]
    pub eta_e: f64,
    /// `V_s - V_d`
    pub v_e: f64,
}

impl ErrorState {
    pub fn new(state: &RelativeState, refs: &ReferenceState) -> Self {
        ErrorState {
            r_e: state.r - refs.r_d,
            q_e: state.q - refs.q_d,
            eta_e: wrap_angle(state.eta_s() - refs.eta_d),
            v_e: state.vs - refs.v_d,
        }
    }
}

/// Coupling and drift blocks of the combined error model.
#[derive(Debug, Clone, Copy)]
pub struct CouplingMatrices {
    /// rows: `Rdot_e`, `R qdot_e`
    pub m: Matrix2<f64>,
    pub g: Vector2<f64>,
    /// `diag(1, 1/R) * M`
    pub m_bar: Matrix2<f64>,
    pub g_bar: Vector2<f64>,
    /// `diag(1, -1/V_s)`
    pub b: Matrix2<f64>,
    /// `[0, qdot]`
    pub h: Vector2<f64>,
    /// disturbance vector `[d_V, -d_theta]`
    pub f: Vector2<f64>,
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// The pair `((1 - cos x)/x, sin x / x)` with the removable singularity at
/// zero handled by a Taylor branch below `|x| < 1e-6`.
pub fn sinc_pair(eta_e: f64) -> (f64, f64) {
    let x = eta_e;
    if x.abs() < 1e-6 {
        let x2 = x * x;
        let c1 = x / 2.0 - x * x2 / 24.0;
        let c2 = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
        (c1, c2)
    } else {
        ((1.0 - x.cos()) / x, x.sin() / x)
    }
}

/// Exact rates of the relative kinematics: `(Rdot, qdot)`.
pub fn relative_rhs(state: &RelativeState, target: &TargetState) -> Result<(f64, f64)> {
    if state.r <= R_MIN {
        return Err(Error::Domain(format!(
            "relative distance R = {} at or below floor {R_MIN}",
            state.r
        )));
    }
    let eta_s = state.eta_s();
    let eta_t = target.eta_t(state.q);
    let r_dot = -state.vs * eta_s.cos() + target.vt * eta_t.cos();
    let q_dot = (state.vs * eta_s.sin() - target.vt * eta_t.sin()) / state.r;
    Ok((r_dot, q_dot))
}

/// Build the `M`, `G`, `M_bar`, `G_bar`, `B`, `H`, `F` blocks at the current
/// state. `dist` carries the instantaneous disturbance `(d_V, d_theta)`.
pub fn coupling(
    state: &RelativeState,
    refs: &ReferenceState,
    target: &TargetState,
    dist: (f64, f64),
) -> Result<CouplingMatrices> {
    if state.vs <= V_MIN {
        return Err(Error::Domain(format!(
            "vehicle speed V_s = {} at or below floor {V_MIN}",
            state.vs
        )));
    }
    if state.r <= R_MIN || refs.r_d <= R_MIN {
        return Err(Error::Domain("distance at or below floor".into()));
    }

    let eta_e = wrap_angle(state.eta_s() - refs.eta_d);
    let (c1, c2) = sinc_pair(eta_e);
    let (sd, cd) = refs.eta_d.sin_cos();
    let vs = state.vs;

    let m = Matrix2::new(
        -cd,
        vs * (cd * c1 + sd * c2),
        sd,
        vs * (cd * c2 - sd * c1),
    );

    let eta_t = target.eta_t(state.q);
    let r_e = state.r - refs.r_d;
    let g = Vector2::new(
        target.vt * eta_t.cos(),
        -target.vt * eta_t.sin() - refs.v_d * sd * (r_e / refs.r_d),
    );

    let scale = Matrix2::new(1.0, 0.0, 0.0, 1.0 / state.r);
    let (_, q_dot) = relative_rhs(state, target)?;

    Ok(CouplingMatrices {
        m,
        g,
        m_bar: scale * m,
        g_bar: scale * g,
        b: Matrix2::new(1.0, 0.0, 0.0, -1.0 / vs),
        h: Vector2::new(0.0, q_dot),
        f: Vector2::new(dist.0, -dist.1),
    })
}
