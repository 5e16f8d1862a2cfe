//! Scenario definition, validation, and result persistence.
//!
//! Files carry angles in degrees (fields suffixed `_deg`); everything
//! in-memory is radians. Loading validates every invariant — no partially
//! valid scenario escapes.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial/terminal geometry of one vehicle (radians).
#[derive(Debug, Clone, Copy)]
pub struct VehicleScenario {
    pub r0: f64,
    pub q0: f64,
    pub theta0: f64,
    pub vs0: f64,
    pub rf: f64,
    pub qf: f64,
    pub eta_d0: f64,
}

/// Constant-velocity target (radians).
#[derive(Debug, Clone, Copy)]
pub struct TargetSpec {
    pub vt: f64,
    pub theta_t: f64,
    pub x_t0: f64,
    pub y_t0: f64,
}

/// Actuator-level disturbance acting on `(V̇_s, θ̇_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Disturbance {
    None,
    Constant { amp_v: f64, amp_theta: f64 },
    Sinusoid { amp_v: f64, amp_theta: f64, freq: f64 },
    /// seeded uniform noise, deterministic in (seed, t)
    Noise { amp_v: f64, amp_theta: f64, seed: u64 },
}

impl Disturbance {
    /// `(d_V, d_theta)` at time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            Disturbance::None => (0.0, 0.0),
            Disturbance::Constant { amp_v, amp_theta } => (amp_v, amp_theta),
            Disturbance::Sinusoid {
                amp_v,
                amp_theta,
                freq,
            } => {
                let w = 2.0 * std::f64::consts::PI * freq * t;
                (amp_v * w.sin(), amp_theta * w.cos())
            }
            Disturbance::Noise {
                amp_v,
                amp_theta,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t.to_bits().rotate_left(17));
                (
                    amp_v * rng.gen_range(-1.0..=1.0),
                    amp_theta * rng.gen_range(-1.0..=1.0),
                )
            }
        }
    }

    /// Bound `sigma` with `d_V² + d_theta² ≤ sigma²` for all t.
    pub fn sigma(&self) -> f64 {
        match *self {
            Disturbance::None => 0.0,
            Disturbance::Constant { amp_v, amp_theta }
            | Disturbance::Sinusoid {
                amp_v, amp_theta, ..
            }
            | Disturbance::Noise {
                amp_v, amp_theta, ..
            } => amp_v.hypot(amp_theta),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Disturbance::None)
    }
}

/// Controller and integration settings shared by all vehicles.
#[derive(Debug, Clone, Copy)]
pub struct ControlConfig {
    pub n1: u32,
    pub n2: u32,
    pub k1: f64,
    pub k2: f64,
    pub lambda2: f64,
    pub h1: f64,
    pub h2: f64,
    pub td: f64,
    pub vdf: f64,
    pub eps_clamp: f64,
    pub dt: f64,
    pub disturbance: Disturbance,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub vehicles: Vec<VehicleScenario>,
    pub target: TargetSpec,
    pub control: ControlConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.vehicles.is_empty() {
            return Err(Error::validation("vehicles", "at least one vehicle required"));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            let field = |name: &str| format!("vehicles[{i}].{name}");
            if !(v.r0 > v.rf && v.rf >= 0.0) {
                return Err(Error::validation(&field("R0"), "R0 > Rf >= 0 violated"));
            }
            if v.vs0 <= 0.0 {
                return Err(Error::validation(&field("Vs0"), "Vs0 > 0 violated"));
            }
            if v.eta_d0.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(Error::validation(
                    &field("eta_d0"),
                    "|eta_d0| < 90 deg violated",
                ));
            }
        }
        if self.target.vt < 0.0 {
            return Err(Error::validation("target.Vt", "Vt >= 0 violated"));
        }
        let c = &self.control;
        if c.n1 == 0 || c.n2 == 0 || c.n1 >= c.n2 {
            return Err(Error::validation("control.N1", "N1 < N2 violated"));
        }
        for (name, v) in [
            ("k1", c.k1),
            ("k2", c.k2),
            ("lambda2", c.lambda2),
            ("h1", c.h1),
            ("h2", c.h2),
            ("Td", c.td),
        ] {
            if v <= 0.0 {
                return Err(Error::validation(
                    &format!("control.{name}"),
                    format!("{name} > 0 violated"),
                ));
            }
        }
        if c.vdf < 0.0 {
            return Err(Error::validation("control.Vdf", "Vdf >= 0 violated"));
        }
        if !(c.eps_clamp > 0.0 && c.eps_clamp < c.td) {
            return Err(Error::validation(
                "control.eps_clamp",
                "0 < eps_clamp < Td violated",
            ));
        }
        if !(c.dt > 0.0 && c.dt <= c.eps_clamp) {
            return Err(Error::validation("control.dt", "0 < dt <= eps_clamp violated"));
        }
        Ok(())
    }
}

// --- file schema (degrees) ------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct VehicleFile {
    #[serde(rename = "R0")]
    r0: f64,
    q0_deg: f64,
    theta0_deg: f64,
    #[serde(rename = "Vs0")]
    vs0: f64,
    #[serde(rename = "Rf")]
    rf: f64,
    qf_deg: f64,
    /// defaults to `q0 - theta0` (vehicle initially points along its path)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta_d0_deg: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TargetFile {
    #[serde(rename = "Vt")]
    vt: f64,
    theta_t_deg: f64,
    #[serde(default)]
    x_t0: f64,
    #[serde(default)]
    y_t0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DisturbanceFile {
    kind: String,
    #[serde(rename = "amp_V", default)]
    amp_v: f64,
    #[serde(default)]
    amp_theta: f64,
    #[serde(default)]
    freq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ControlFile {
    #[serde(rename = "N1")]
    n1: u32,
    #[serde(rename = "N2")]
    n2: u32,
    k1: f64,
    k2: f64,
    lambda2: f64,
    h1: f64,
    h2: f64,
    #[serde(rename = "Td")]
    td: f64,
    #[serde(rename = "Vdf")]
    vdf: f64,
    /// defaults to `dt`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_clamp: Option<f64>,
    dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    disturbance: Option<DisturbanceFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    vehicles: Vec<VehicleFile>,
    target: TargetFile,
    control: ControlFile,
}

fn disturbance_from_file(d: &DisturbanceFile) -> Result<Disturbance> {
    match d.kind.as_str() {
        "none" => Ok(Disturbance::None),
        "constant" => Ok(Disturbance::Constant {
            amp_v: d.amp_v,
            amp_theta: d.amp_theta,
        }),
        "sinusoid" => Ok(Disturbance::Sinusoid {
            amp_v: d.amp_v,
            amp_theta: d.amp_theta,
            freq: d.freq,
        }),
        "noise" => Ok(Disturbance::Noise {
            amp_v: d.amp_v,
            amp_theta: d.amp_theta,
            seed: d.seed.unwrap_or(0),
        }),
        other => Err(Error::validation(
            "control.disturbance.kind",
            format!("unknown kind '{other}' (none|constant|sinusoid|noise)"),
        )),
    }
}

fn disturbance_to_file(d: &Disturbance) -> Option<DisturbanceFile> {
    let (kind, amp_v, amp_theta, freq, seed) = match *d {
        Disturbance::None => return None,
        Disturbance::Constant { amp_v, amp_theta } => ("constant", amp_v, amp_theta, 0.0, None),
        Disturbance::Sinusoid {
            amp_v,
            amp_theta,
            freq,
        } => ("sinusoid", amp_v, amp_theta, freq, None),
        Disturbance::Noise {
            amp_v,
            amp_theta,
            seed,
        } => ("noise", amp_v, amp_theta, 0.0, Some(seed)),
    };
    Some(DisturbanceFile {
        kind: kind.into(),
        amp_v,
        amp_theta,
        freq,
        seed,
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let vehicles = file
        .vehicles
        .iter()
        .map(|v| {
            let q0 = v.q0_deg.to_radians();
            let theta0 = v.theta0_deg.to_radians();
            VehicleScenario {
                r0: v.r0,
                q0,
                theta0,
                vs0: v.vs0,
                rf: v.rf,
                qf: v.qf_deg.to_radians(),
                eta_d0: v.eta_d0_deg.map_or(q0 - theta0, f64::to_radians),
            }
        })
        .collect();
    let c = &file.control;
    let scenario = Scenario {
        vehicles,
        target: TargetSpec {
            vt: file.target.vt,
            theta_t: file.target.theta_t_deg.to_radians(),
            x_t0: file.target.x_t0,
            y_t0: file.target.y_t0,
        },
        control: ControlConfig {
            n1: c.n1,
            n2: c.n2,
            k1: c.k1,
            k2: c.k2,
            lambda2: c.lambda2,
            h1: c.h1,
            h2: c.h2,
            td: c.td,
            vdf: c.vdf,
            eps_clamp: c.eps_clamp.unwrap_or(c.dt),
            dt: c.dt,
            disturbance: c
                .disturbance
                .as_ref()
                .map(disturbance_from_file)
                .transpose()?
                .unwrap_or(Disturbance::None),
        },
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    parse_scenario(&fs::read_to_string(path)?)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    scenario.validate()?;
    let file = ScenarioFile {
        vehicles: scenario
            .vehicles
            .iter()
            .map(|v| VehicleFile {
                r0: v.r0,
                q0_deg: v.q0.to_degrees(),
                theta0_deg: v.theta0.to_degrees(),
                vs0: v.vs0,
                rf: v.rf,
                qf_deg: v.qf.to_degrees(),
                eta_d0_deg: Some(v.eta_d0.to_degrees()),
            })
            .collect(),
        target: TargetFile {
            vt: scenario.target.vt,
            theta_t_deg: scenario.target.theta_t.to_degrees(),
            x_t0: scenario.target.x_t0,
            y_t0: scenario.target.y_t0,
        },
        control: ControlFile {
            n1: scenario.control.n1,
            n2: scenario.control.n2,
            k1: scenario.control.k1,
            k2: scenario.control.k2,
            lambda2: scenario.control.lambda2,
            h1: scenario.control.h1,
            h2: scenario.control.h2,
            td: scenario.control.td,
            vdf: scenario.control.vdf,
            eps_clamp: Some(scenario.control.eps_clamp),
            dt: scenario.control.dt,
            disturbance: disturbance_to_file(&scenario.control.disturbance),
        },
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

// --- trace / report output ------------------------------------------------

/// One simulated step; field order matches the CSV schema.
#[derive(Debug, Clone, Copy, Default)]
pub struct TraceRow {
    pub t: f64,
    pub r: f64,
    pub q: f64,
    pub eta_s: f64,
    pub theta_s: f64,
    pub v_s: f64,
    pub v_d: f64,
    pub r_d: f64,
    pub q_d: f64,
    pub eta_d: f64,
    pub r_e: f64,
    pub q_e: f64,
    pub e_v: f64,
    pub e_eta: f64,
    pub u_v: f64,
    pub u_theta: f64,
    pub x: f64,
    pub y: f64,
    pub x_t: f64,
    pub y_t: f64,
}

pub const TRACE_HEADER: &str =
    "t,R,q,eta_s,theta_s,V_s,V_d,R_d,q_d,eta_d,R_e,q_e,e_V,e_eta,u_V,u_theta,x,y,x_t,y_t";

#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
    /// set when the terminal errors at `Td - eps_clamp` exceed thresholds
    pub convergence_failure: Option<String>,
    /// keeping-phase gain condition `k1, k2 > 0.5 ||M_bar||`; `None` if the
    /// run never entered the keeping phase
    pub gain_condition_ok: Option<bool>,
}

pub fn write_trace(trace: &SimTrace, path: impl AsRef<Path>) -> Result<()> {
    if trace.rows.is_empty() {
        return Err(Error::Domain("empty trace".into()));
    }
    let mut out = String::with_capacity(trace.rows.len() * 400);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let vals = [
            r.t, r.r, r.q, r.eta_s, r.theta_s, r.v_s, r.v_d, r.r_d, r.q_d, r.eta_d, r.r_e, r.q_e,
            r.e_v, r.e_eta, r.u_v, r.u_theta, r.x, r.y, r.x_t, r.y_t,
        ];
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            // 15 significant digits
            out.push_str(&format!("{v:.14e}"));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Terminal-condition summary for one vehicle of a formation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleArrival {
    #[serde(rename = "R_final")]
    pub r_final: f64,
    pub q_final_deg: f64,
    #[serde(rename = "R_err")]
    pub r_err: f64,
    pub q_err_deg: f64,
    #[serde(rename = "S_d")]
    pub s_d: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalReport {
    #[serde(rename = "Td")]
    pub td: f64,
    pub per_vehicle: Vec<VehicleArrival>,
}

pub fn write_report(report: &ArrivalReport, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const BASELINE: &str = include_str!("../tests/fixtures/baseline.json");

    #[test]
    fn baseline_fixture_parses() {
        let s = parse_scenario(BASELINE).unwrap();
        assert_eq!(s.vehicles.len(), 4);
        let r0: Vec<f64> = s.vehicles.iter().map(|v| v.r0).collect();
        assert_eq!(r0, vec![7000.0, 6000.0, 5000.0, 5000.0]);
        assert_relative_eq!(s.vehicles[0].q0, 220f64.to_radians());
        assert_relative_eq!(s.vehicles[1].q0, (-60f64).to_radians());
        assert_relative_eq!(s.vehicles[3].qf, 140f64.to_radians());
        // default eta_d0 = q0 - theta0
        for (v, expect) in s.vehicles.iter().zip([30.0, -50.0, 30.0, -30.0]) {
            assert_relative_eq!(v.eta_d0, f64::to_radians(expect), max_relative = 1e-12);
        }
        assert_eq!(s.target.vt, 100.0);
        assert_eq!((s.control.n1, s.control.n2), (6, 10));
        assert_eq!(s.control.eps_clamp, s.control.dt);
    }

    #[test]
    fn swapped_roots_rejected() {
        let bad = BASELINE.replace("\"N1\": 6", "\"N1\": 10").replace("\"N2\": 10", "\"N2\": 6");
        let err = parse_scenario(&bad).unwrap_err();
        assert!(err.to_string().contains("N1 < N2 violated"), "{err}");
    }

    #[test]
    fn stationary_target_accepted() {
        let s = parse_scenario(&BASELINE.replace("\"Vt\": 100.0", "\"Vt\": 0.0")).unwrap();
        assert_eq!(s.target.vt, 0.0);
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(parse_scenario("{not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn roundtrip_preserves_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let s = parse_scenario(BASELINE).unwrap();
        save_scenario(&s, &path).unwrap();
        let s2 = load_scenario(&path).unwrap();
        for (a, b) in s.vehicles.iter().zip(&s2.vehicles) {
            assert_relative_eq!(a.q0, b.q0, max_relative = 1e-12);
            assert_relative_eq!(a.theta0, b.theta0, max_relative = 1e-12);
            assert_relative_eq!(a.eta_d0, b.eta_d0, max_relative = 1e-12);
            assert_eq!(a.r0, b.r0);
            assert_eq!(a.rf, b.rf);
        }
        assert_relative_eq!(s.target.theta_t, s2.target.theta_t, max_relative = 1e-12);
        assert_eq!(s.control.dt, s2.control.dt);
        assert_eq!(s.control.disturbance, s2.control.disturbance);
    }

    #[test]
    fn trace_row_count_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut trace = SimTrace::default();
        for i in 0..3 {
            trace.rows.push(TraceRow {
                t: i as f64 * 1e-3,
                r: 7000.0 - i as f64,
                ..TraceRow::default()
            });
        }
        write_trace(&trace, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], TRACE_HEADER);
        // 15 significant digits survive a parse round-trip
        let r: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(r, 6999.0);
    }

    #[test]
    fn empty_trace_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_trace(&SimTrace::default(), dir.path().join("x.csv")).unwrap_err();
        assert!(err.to_string().contains("empty trace"));
    }

    #[test]
    fn report_field_names_pinned() {
        let report = ArrivalReport {
            td: 20.0,
            per_vehicle: vec![VehicleArrival {
                r_final: 1000.2,
                q_final_deg: 229.9,
                r_err: 0.2,
                q_err_deg: 0.1,
                s_d: 6100.0,
                failure: None,
            }],
        };
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["Td"], 20.0);
        let v = &json["per_vehicle"][0];
        for key in ["R_final", "q_final_deg", "R_err", "q_err_deg", "S_d"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v.get("failure").is_none());
    }

    #[test]
    fn sinusoid_respects_sigma_bound() {
        let d = Disturbance::Sinusoid {
            amp_v: 1.0,
            amp_theta: 0.01,
            freq: 0.5,
        };
        let sigma = d.sigma();
        for i in 0..1000 {
            let (dv, dth) = d.eval(i as f64 * 0.013);
            assert!(dv * dv + dth * dth <= sigma * sigma + 1e-15);
        }
    }

    #[test]
    fn noise_is_deterministic_and_bounded() {
        let d = Disturbance::Noise {
            amp_v: 2.0,
            amp_theta: 0.1,
            seed: 42,
        };
        for i in 0..200 {
            let t = i as f64 * 0.37;
            let a = d.eval(t);
            let b = d.eval(t);
            assert_eq!(a, b);
            assert!(a.0.abs() <= 2.0 && a.1.abs() <= 0.1);
        }
        let other = Disturbance::Noise {
            amp_v: 2.0,
            amp_theta: 0.1,
            seed: 43,
        };
        assert_ne!(d.eval(1.0), other.eval(1.0));
    }
}
