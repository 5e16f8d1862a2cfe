//! Time-free spatial reference trajectory.
//!
//! The remaining distance is reparameterized through the logarithmic scale
//! `rd = ln(R0 - Rf1) - ln(Rd - Rf1)` with `Rf1 = Rf - 1`, which turns the
//! reference LOS dynamics into a Cauchy-Euler equation with the closed-form
//! solution `q_d(rd) = C1 (rf - rd)^N1 + C2 (rf - rd)^N2 + qf`. The spatial
//! path is therefore independent of the speed profile; the travel range
//! `S_d` fixes the arrival time once a speed is chosen, which is what makes
//! simultaneous multi-vehicle arrival a pure velocity-planning problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Geometry and design constants of one reference trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceParams {
    /// initial distance (m)
    pub r0: f64,
    /// terminal distance (m)
    pub rf: f64,
    /// shifted terminal distance `Rf - 1` (m)
    pub rf1: f64,
    /// terminal scaled distance `ln(R0 - Rf1)`
    pub rf_scaled: f64,
    /// initial LOS angle (rad)
    pub q0: f64,
    /// terminal LOS angle (rad)
    pub qf: f64,
    /// initial reference heading angle (rad)
    pub eta_d0: f64,
    pub n1: u32,
    pub n2: u32,
    /// `N1 * N2`
    pub kd1: f64,
    /// `N1 + N2 - 1`
    pub kd2: f64,
    pub c1: f64,
    pub c2: f64,
    /// travel range (m), arc length of the path from `R0` to `Rf`
    pub sd: f64,
}

/// Reference state sampled at one instant.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceState {
    pub t: f64,
    /// scaled distance, in `[0, rf_scaled]`
    pub rd: f64,
    /// distance (m)
    pub r_d: f64,
    /// LOS angle (rad)
    pub q_d: f64,
    /// heading angle (rad)
    pub eta_d: f64,
    /// speed (m/s)
    pub v_d: f64,
    /// heading rate (rad/s)
    pub eta_d_rate: f64,
}

impl ReferenceParams {
    /// Build the closed-form coefficients and travel range for one vehicle
    /// geometry. `N1 >= 2` is required so that both power terms of the
    /// heading vanish at arrival.
    pub fn new(
        r0: f64,
        rf: f64,
        q0: f64,
        qf: f64,
        eta_d0: f64,
        n1: u32,
        n2: u32,
    ) -> Result<Self> {
        if !(r0 > rf && rf >= 0.0) {
            return Err(Error::validation("R0/Rf", "R0 > Rf >= 0 violated"));
        }
        if n1 < 2 {
            return Err(Error::validation(
                "N1",
                "N1 >= 2 required (N1 = 1 does not zero the terminal heading)",
            ));
        }
        if n1 >= n2 {
            return Err(Error::validation("N1/N2", "N1 < N2 violated"));
        }
        if eta_d0.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::validation("eta_d0", "|eta_d0| < pi/2 required"));
        }
        let rf1 = rf - 1.0;
        let rf_scaled = (r0 - rf1).ln();
        let (n1f, n2f) = (n1 as f64, n2 as f64);
        let span = rf_scaled * eta_d0.tan() * (r0 - rf1) / r0;
        let denom = n2f - n1f;
        let c1 = (n2f * (q0 - qf) + span) / (denom * rf_scaled.powi(n1 as i32));
        let c2 = (n1f * (qf - q0) - span) / (denom * rf_scaled.powi(n2 as i32));
        let mut params = ReferenceParams {
            r0,
            rf,
            rf1,
            rf_scaled,
            q0,
            qf,
            eta_d0,
            n1,
            n2,
            kd1: n1f * n2f,
            kd2: n1f + n2f - 1.0,
            c1,
            c2,
            sd: 0.0,
        };
        params.sd = params.travel_range(1e-6 * (r0 - rf))?;
        Ok(params)
    }

    /// Scaled distance for a physical distance `Rd` in `(Rf, R0]`.
    pub fn distance_scale(&self, r_d: f64) -> Result<f64> {
        if r_d <= self.rf || r_d > self.r0 {
            return Err(Error::Domain(format!(
                "Rd = {r_d} outside ({}, {}]",
                self.rf, self.r0
            )));
        }
        Ok(self.rf_scaled - (r_d - self.rf1).ln())
    }

    /// Physical distance for a scaled distance `rd` in `[0, rf_scaled]`.
    pub fn inverse_distance_scale(&self, rd: f64) -> Result<f64> {
        if !(0.0..=self.rf_scaled).contains(&rd) {
            return Err(Error::Domain(format!(
                "rd = {rd} outside [0, {}]",
                self.rf_scaled
            )));
        }
        Ok(self.rf1 + (self.r0 - self.rf1) * (-rd).exp())
    }

    /// Closed-form reference LOS angle.
    pub fn reference_los(&self, rd: f64) -> f64 {
        let u = self.rf_scaled - rd;
        self.c1 * u.powi(self.n1 as i32) + self.c2 * u.powi(self.n2 as i32) + self.qf
    }

    /// `d q_d / d rd` of the closed form.
    pub fn dq_drd(&self, rd: f64) -> f64 {
        let u = self.rf_scaled - rd;
        let (n1, n2) = (self.n1 as f64, self.n2 as f64);
        -(n1 * self.c1 * u.powi(self.n1 as i32 - 1) + n2 * self.c2 * u.powi(self.n2 as i32 - 1))
    }

    /// Closed-form reference heading angle; zero at `rd = rf_scaled`.
    pub fn reference_heading(&self, rd: f64) -> f64 {
        self.tan_eta_d(rd).atan()
    }

    fn tan_eta_d(&self, rd: f64) -> f64 {
        let r_d = self.rf1 + (self.r0 - self.rf1) * (-rd).exp();
        r_d / (r_d - self.rf1) * self.dq_drd(rd)
    }

    /// `d eta_d / d rd` of the closed form.
    pub fn deta_drd(&self, rd: f64) -> f64 {
        let r_d = self.rf1 + (self.r0 - self.rf1) * (-rd).exp();
        let u = self.rf_scaled - rd;
        let (n1, n2) = (self.n1 as f64, self.n2 as f64);
        let p = self.dq_drd(rd);
        let dp = n1 * (n1 - 1.0) * self.c1 * u.powi(self.n1 as i32 - 2)
            + n2 * (n2 - 1.0) * self.c2 * u.powi(self.n2 as i32 - 2);
        let tan = r_d / (r_d - self.rf1) * p;
        let dtan = self.rf1 / (r_d - self.rf1) * p + r_d / (r_d - self.rf1) * dp;
        dtan / (1.0 + tan * tan)
    }

    /// Full reference state from the closed form.
    pub fn state_at(&self, t: f64, rd: f64, v_d: f64) -> ReferenceState {
        let rd = rd.clamp(0.0, self.rf_scaled);
        let r_d = self.rf1 + (self.r0 - self.rf1) * (-rd).exp();
        let eta_d = self.reference_heading(rd);
        // eta_d_rate = (d eta_d / d rd) * rd_rate
        let rd_rate = v_d * eta_d.cos() / (r_d - self.rf1);
        ReferenceState {
            t,
            rd,
            r_d,
            q_d: self.reference_los(rd),
            eta_d,
            v_d,
            eta_d_rate: self.deta_drd(rd) * rd_rate,
        }
    }

    /// Post-arrival maintenance state: everything frozen at the terminal
    /// geometry with `eta_d = 0`.
    pub fn keep_position(&self, t: f64, v_df: f64) -> ReferenceState {
        ReferenceState {
            t,
            rd: self.rf_scaled,
            r_d: self.rf,
            q_d: self.qf,
            eta_d: 0.0,
            v_d: v_df,
            eta_d_rate: 0.0,
        }
    }

    /// The heading-rate feedback law driving `(q_d, eta_d)` to `(qf, 0)`
    /// before `rd` reaches `rf_scaled`. The gains diverge at arrival; the
    /// returned flag marks evaluations inside the singular band.
    pub fn heading_rate_law(&self, rd: f64, q_d: f64, eta_d: f64, v_d: f64) -> (f64, bool) {
        let near_singular = self.rf_scaled - rd < 1e-9;
        let u = (self.rf_scaled - rd).max(1e-12);
        let r_d = self.rf1 + (self.r0 - self.rf1) * (-rd).exp();
        let shift = r_d - self.rf1;
        let cos = eta_d.cos();
        let dq = shift / r_d * eta_d.tan();
        let rate = -r_d * v_d * cos.powi(3) / (shift * shift)
            * (self.kd2 / u * dq + self.kd1 * (q_d - self.qf) / (u * u))
            + self.rf1 * v_d * cos * cos * eta_d.sin() / (shift * r_d);
        (rate, near_singular)
    }

    /// Arc length of the reference path, by composite Simpson with interval
    /// halving until the Richardson estimate drops below `tol` (absolute).
    pub fn travel_range(&self, tol: f64) -> Result<f64> {
        let integrand = |r_d: f64| {
            let rd = self.rf_scaled - (r_d - self.rf1).ln();
            let tan = self.tan_eta_d(rd.clamp(0.0, self.rf_scaled));
            (1.0 + tan * tan).sqrt()
        };
        let mut n = 64usize;
        let mut prev = crate::ptime::simpson_fixed(&integrand, self.rf, self.r0, n);
        for _ in 0..25 {
            n *= 2;
            let cur = crate::ptime::simpson_fixed(&integrand, self.rf, self.r0, n);
            if (cur - prev).abs() / 15.0 < tol {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::QuadratureNonConvergence(25))
    }
}

/// Polynomial speed profile `V_d(t) = I1 t^m + ... + Im t + I_{m+1}`
/// meeting the endpoint speeds and the travel-range integral.
#[derive(Debug, Clone)]
pub struct VelocityProfile {
    /// `I1 ..= I_{m+1}`, descending powers
    pub coeffs: Vec<f64>,
    pub m: usize,
    pub td: f64,
}

impl VelocityProfile {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn eval_rate(&self, t: f64) -> f64 {
        let m = self.m;
        self.coeffs[..m]
            .iter()
            .enumerate()
            .fold(0.0, |acc, (j, c)| acc * t + (m - j) as f64 * c)
    }

    /// `∫₀ᵗ V_d` in closed form.
    pub fn integral(&self, t: f64) -> f64 {
        let m = self.m;
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate() {
            let pow = (m + 1 - j) as f64;
            acc += c * t.powf(pow) / pow;
        }
        acc
    }
}

/// Solve for the degree-`m` profile with `V(0) = vd0`, `V(td) = vdf`,
/// `∫₀^td V = sd`, closed by zero end derivatives of orders `1..=m-2`.
pub fn plan_velocity_profile(
    vd0: f64,
    vdf: f64,
    sd: f64,
    td: f64,
    m: usize,
) -> Result<VelocityProfile> {
    if td <= 0.0 || sd <= 0.0 {
        return Err(Error::validation("Td/Sd", "Td and Sd must be positive"));
    }
    let profile = if m == 1 {
        // degenerate order: endpoint conditions alone determine the line;
        // the integral constraint must be consistent
        let coeffs = vec![(vdf - vd0) / td, vd0];
        let p = VelocityProfile { coeffs, m, td };
        let integral = p.integral(td);
        if (integral - sd).abs() > 1e-9 * sd.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "m = 1 profile inconsistent: ∫V = {integral}, Sd = {sd}"
            )));
        }
        p
    } else {
        let dim = m + 1;
        let mut a = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        // V(0) = vd0
        a[(0, m)] = 1.0;
        rhs[0] = vd0;
        // V(td) = vdf
        for j in 0..dim {
            a[(1, j)] = td.powi((m - j) as i32);
        }
        rhs[1] = vdf;
        // ∫₀^td V = sd
        for j in 0..dim {
            let pow = (m + 1 - j) as i32;
            a[(2, j)] = td.powi(pow) / pow as f64;
        }
        rhs[2] = sd;
        // regularity: d^p V / dt^p (td) = 0 for p = 1..=m-2
        for p in 1..=m.saturating_sub(2) {
            let row = 2 + p;
            for j in 0..dim {
                let k = m - j; // power of t for coefficient j
                if k >= p {
                    let mut fac = 1.0;
                    for i in 0..p {
                        fac *= (k - i) as f64;
                    }
                    a[(row, j)] = fac * td.powi((k - p) as i32);
                }
            }
        }
        let lu = a.lu();
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("velocity-profile linear system".into()))?;
        VelocityProfile {
            coeffs: sol.iter().copied().collect(),
            m,
            td,
        }
    };

    // positivity is not implied by the linear solve; check on a dense grid
    let steps = 1000;
    for i in 0..steps {
        let t = td * i as f64 / steps as f64;
        let v = profile.eval(t);
        if v <= 0.0 {
            return Err(Error::ProfilePositivity { t, value: v });
        }
    }
    Ok(profile)
}

/// Reference generator used by the simulator: closed-form geometry indexed
/// by the integrated scaled distance, plus the planned speed profile.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    pub params: ReferenceParams,
    pub profile: VelocityProfile,
    pub v_df: f64,
}

impl ReferenceTrajectory {
    pub fn new(params: ReferenceParams, profile: VelocityProfile, v_df: f64) -> Self {
        ReferenceTrajectory {
            params,
            profile,
            v_df,
        }
    }

    /// `d rd / dt` at `(t, rd)` during the approach phase.
    pub fn rd_rate(&self, t: f64, rd: f64) -> f64 {
        if t >= self.profile.td {
            return 0.0;
        }
        let rd = rd.clamp(0.0, self.params.rf_scaled);
        let r_d = self.params.rf1 + (self.params.r0 - self.params.rf1) * (-rd).exp();
        let eta_d = self.params.reference_heading(rd);
        self.profile.eval(t).max(0.0) * eta_d.cos() / (r_d - self.params.rf1)
    }

    pub fn state(&self, t: f64, rd: f64) -> ReferenceState {
        if t >= self.profile.td {
            self.params.keep_position(t, self.v_df)
        } else {
            self.params.state_at(t, rd, self.profile.eval(t).max(0.0))
        }
    }
}

/// One sample of the validation integrators below.
#[derive(Debug, Clone, Copy)]
pub struct PathSample {
    pub t: f64,
    pub rd: f64,
    pub q_d: f64,
    pub eta_d: f64,
}

/// Integrate the reference dynamics in the scaled-distance domain
/// (`d q_d/d rd` and the transformed heading-rate law) from `rd = 0` to
/// `rd_end`, with an elapsed-time estimate for constant speed `v_d`.
///
/// This route never touches the closed-form coefficients `C1`, `C2`, so it
/// serves as an independent check of the closed-form solution.
pub fn integrate_rd_domain(params: &ReferenceParams, v_d: f64, rd_end: f64) -> Vec<PathSample> {
    let rf = params.rf_scaled;
    let rd_end = rd_end.min(rf - 1e-12);
    // state: (q_d, eta_d, t)
    let rhs = |rd: f64, y: &[f64; 3]| -> [f64; 3] {
        let r_d = params.rf1 + (params.r0 - params.rf1) * (-rd).exp();
        let shift = r_d - params.rf1;
        let u = (rf - rd).max(1e-15);
        let cos = y[1].cos();
        let dq = shift / r_d * y[1].tan();
        let deta = -r_d * cos * cos / shift * (params.kd2 / u * dq + params.kd1 * (y[0] - params.qf) / (u * u))
            + params.rf1 * cos * y[1].sin() / r_d;
        [dq, deta, shift / (v_d * cos)]
    };
    let mut samples = Vec::new();
    let mut rd = 0.0f64;
    let mut y = [params.q0, params.eta_d0, 0.0];
    samples.push(PathSample {
        t: 0.0,
        rd,
        q_d: y[0],
        eta_d: y[1],
    });
    let h_max = rf / 4000.0;
    while rd < rd_end {
        let h = h_max.min((rf - rd) / 100.0).min(rd_end - rd).max(1e-12);
        let k1 = rhs(rd, &y);
        let y2 = add(&y, &k1, h / 2.0);
        let k2 = rhs(rd + h / 2.0, &y2);
        let y3 = add(&y, &k2, h / 2.0);
        let k3 = rhs(rd + h / 2.0, &y3);
        let y4 = add(&y, &k3, h);
        let k4 = rhs(rd + h, &y4);
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        rd += h;
        samples.push(PathSample {
            t: y[2],
            rd,
            q_d: y[0],
            eta_d: y[1],
        });
    }
    samples
}

/// Outcome of a constant-speed time-domain run of the reference dynamics.
#[derive(Debug, Clone)]
pub struct TimeDomainRun {
    pub samples: Vec<PathSample>,
    pub t_arrival: f64,
}

/// Integrate the raw reference ODEs (distance, LOS, heading-rate law) in
/// real time at constant speed `v_d`, with the step shrunk near arrival
/// where the feedback gains diverge. Returns the sampled path and the
/// arrival time at `R_d = Rf`.
pub fn integrate_time_domain(params: &ReferenceParams, v_d: f64, dt_max: f64) -> TimeDomainRun {
    let rf = params.rf_scaled;
    // state: (rd, q_d, eta_d)
    let rhs = |_t: f64, y: &[f64; 3]| -> [f64; 3] {
        let rd = y[0].min(rf - 1e-15);
        let r_d = params.rf1 + (params.r0 - params.rf1) * (-rd).exp();
        let shift = r_d - params.rf1;
        let cos = y[2].cos();
        let (eta_rate, _) = params.heading_rate_law(rd, y[1], y[2], v_d);
        [v_d * cos / shift, v_d * y[2].sin() / r_d, eta_rate]
    };
    let mut samples = Vec::new();
    let mut t = 0.0f64;
    let mut y = [0.0, params.q0, params.eta_d0];
    samples.push(PathSample {
        t,
        rd: y[0],
        q_d: y[1],
        eta_d: y[2],
    });
    let stiff = params.kd2.max(params.kd1.sqrt());
    loop {
        let rd = y[0];
        if rf - rd < 1e-6 {
            break;
        }
        let r_d = params.rf1 + (params.r0 - params.rf1) * (-rd).exp();
        let shift = r_d - params.rf1;
        let h = dt_max.min(0.2 * shift * (rf - rd) / (v_d * stiff)).max(1e-12);
        let k1 = rhs(t, &y);
        let y2 = add(&y, &k1, h / 2.0);
        let k2 = rhs(t + h / 2.0, &y2);
        let y3 = add(&y, &k2, h / 2.0);
        let k3 = rhs(t + h / 2.0, &y3);
        let y4 = add(&y, &k3, h);
        let k4 = rhs(t + h, &y4);
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        samples.push(PathSample {
            t,
            rd: y[0],
            q_d: y[1],
            eta_d: y[2],
        });
        if t > 1e7 {
            break; // runaway guard
        }
    }
    // remaining straight-in distance once the heading has collapsed to zero
    let r_d = params.rf1 + (params.r0 - params.rf1) * (-y[0]).exp();
    let t_arrival = t + (r_d - params.rf).max(0.0) / v_d;
    TimeDomainRun { samples, t_arrival }
}

fn add(y: &[f64; 3], k: &[f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}
