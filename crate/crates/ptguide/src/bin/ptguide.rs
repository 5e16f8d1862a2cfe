//! Scenario-driven command-line front end.
//!
//! Exit codes: 0 success, 1 usage/validation error, 2 runtime or
//! convergence failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ptguide::cascade;
use ptguide::scenario::{self, Disturbance, Scenario};
use ptguide::sim;
use ptguide::{Error, ReferenceParams};

#[derive(Parser)]
#[command(
    name = "ptguide",
    version,
    about = "Prescribed-time guidance: reference trajectories, tracking runs, \
             simultaneous-arrival formations, and the cascade bench"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the spatial reference trajectory for one vehicle
    Reference {
        #[arg(long)]
        scenario: PathBuf,
        /// 1-based vehicle index
        #[arg(long, default_value_t = 1)]
        vehicle: usize,
        /// constant reference speed for the arrival-time summary (m/s)
        #[arg(long, default_value_t = 50.0)]
        speed: f64,
        /// output directory for the reference CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop tracking run of one vehicle
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// 1-based vehicle index
        #[arg(long, default_value_t = 1)]
        vehicle: usize,
        /// integration-step override (s)
        #[arg(long)]
        dt: Option<f64>,
        /// clamp-cutoff override (s)
        #[arg(long)]
        eps: Option<f64>,
        /// force the disturbance off
        #[arg(long)]
        no_disturbance: bool,
        /// seed override for the 'noise' disturbance kind
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simultaneous-arrival formation run of all vehicles
    Formation {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        no_disturbance: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Velocity-profile planning summary for every vehicle
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cascaded prescribed-time stability bench
    Bench {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. } | Error::Parse(_) | Error::Io(_) => 1,
        _ => 2,
    }
}

fn apply_overrides(
    s: &mut Scenario,
    dt: Option<f64>,
    eps: Option<f64>,
    no_disturbance: bool,
    seed: Option<u64>,
) -> Result<(), Error> {
    if let Some(dt) = dt {
        s.control.dt = dt;
        if eps.is_none() && s.control.eps_clamp < dt {
            s.control.eps_clamp = dt;
        }
    }
    if let Some(eps) = eps {
        s.control.eps_clamp = eps;
    }
    if no_disturbance {
        s.control.disturbance = Disturbance::None;
    } else if let Some(seed) = seed {
        match &mut s.control.disturbance {
            Disturbance::Noise { seed: old, .. } => *old = seed,
            _ => {
                return Err(Error::validation(
                    "--seed",
                    "only applies to the 'noise' disturbance kind",
                ))
            }
        }
    }
    s.validate()
}

fn vehicle_index(s: &Scenario, vehicle: usize) -> Result<usize, Error> {
    if vehicle == 0 || vehicle > s.vehicles.len() {
        return Err(Error::validation(
            "--vehicle",
            format!("index {vehicle} outside 1..={}", s.vehicles.len()),
        ));
    }
    Ok(vehicle - 1)
}

fn reference_params(s: &Scenario, idx: usize) -> Result<ReferenceParams, Error> {
    let v = &s.vehicles[idx];
    ReferenceParams::new(
        v.r0,
        v.rf,
        v.q0,
        v.qf,
        v.eta_d0,
        s.control.n1,
        s.control.n2,
    )
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Reference {
            scenario,
            vehicle,
            speed,
            out,
        } => {
            if speed <= 0.0 {
                return Err(Error::validation("--speed", "speed must be positive"));
            }
            let s = scenario::load_scenario(&scenario)?;
            let idx = vehicle_index(&s, vehicle)?;
            let p = reference_params(&s, idx)?;
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                let path = dir.join(format!("reference_v{vehicle}.csv"));
                let mut text = String::from("rd,R_d,q_d_deg,eta_d_deg\n");
                let n = 2000;
                for i in 0..=n {
                    let rd = p.rf_scaled * i as f64 / n as f64;
                    let r_d = p.inverse_distance_scale(rd)?;
                    text.push_str(&format!(
                        "{rd:.14e},{r_d:.14e},{:.14e},{:.14e}\n",
                        p.reference_los(rd).to_degrees(),
                        p.reference_heading(rd).to_degrees()
                    ));
                }
                std::fs::write(&path, text)?;
                println!("wrote {}", path.display());
            }
            println!("vehicle {vehicle}: S_d = {:.6} m", p.sd);
            println!("t_f at V_d = {speed} m/s: {:.6} s", p.sd / speed);
            Ok(())
        }
        Cmd::Simulate {
            scenario,
            out,
            vehicle,
            dt,
            eps,
            no_disturbance,
            seed,
        } => {
            let mut s = scenario::load_scenario(&scenario)?;
            apply_overrides(&mut s, dt, eps, no_disturbance, seed)?;
            let idx = vehicle_index(&s, vehicle)?;
            let trace = sim::run_single(&s.vehicles[idx], &s.target, &s.control)?;
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                let path = dir.join(format!("trace_v{vehicle}.csv"));
                scenario::write_trace(&trace, &path)?;
                println!("wrote {}", path.display());
            }
            if let Some(ok) = trace.gain_condition_ok {
                println!("keeping-phase gain condition satisfied: {ok}");
            }
            match trace.convergence_failure {
                Some(msg) => Err(Error::Propagation {
                    t: s.control.td - s.control.eps_clamp,
                    message: format!("vehicle {vehicle} did not converge: {msg}"),
                }),
                None => {
                    println!("vehicle {vehicle} converged");
                    Ok(())
                }
            }
        }
        Cmd::Formation {
            scenario,
            out,
            dt,
            eps,
            no_disturbance,
            seed,
        } => {
            let mut s = scenario::load_scenario(&scenario)?;
            apply_overrides(&mut s, dt, eps, no_disturbance, seed)?;
            let (traces, report) = sim::run_formation(&s)?;
            ensure_dir(&out)?;
            for (i, trace) in traces.iter().enumerate() {
                if trace.rows.is_empty() {
                    continue;
                }
                scenario::write_trace(trace, out.join(format!("trace_v{}.csv", i + 1)))?;
            }
            scenario::write_report(&report, out.join("arrival_report.json"))?;
            println!("wrote {} traces + arrival_report.json", traces.len());
            let failed: Vec<usize> = report
                .per_vehicle
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.failure.is_some().then_some(i + 1))
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Propagation {
                    t: s.control.td,
                    message: format!("vehicles {failed:?} failed; see arrival_report.json"),
                })
            }
        }
        Cmd::Plan { scenario, out } => {
            let s = scenario::load_scenario(&scenario)?;
            let mut entries = Vec::new();
            for (i, v) in s.vehicles.iter().enumerate() {
                let p = reference_params(&s, i)?;
                let profile = ptguide::reference::plan_velocity_profile(
                    v.vs0,
                    s.control.vdf,
                    p.sd,
                    s.control.td,
                    3,
                )?;
                entries.push(serde_json::json!({
                    "vehicle": i + 1,
                    "S_d": p.sd,
                    "Td": s.control.td,
                    "coeffs": profile.coeffs,
                }));
                println!(
                    "vehicle {}: S_d = {:.3} m, coeffs = {:?}",
                    i + 1,
                    p.sd,
                    profile.coeffs
                );
            }
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                let path = dir.join("velocity_plan.json");
                std::fs::write(
                    &path,
                    serde_json::to_string_pretty(&serde_json::json!({ "profiles": entries }))
                        .map_err(|e| Error::Parse(e.to_string()))?,
                )?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Cmd::Bench { out } => {
            let (spec, step) = cascade::strict_feedback_chain(
                1.0,
                &[5.0, 10.0],
                &[1.0, 2.0],
                &[1.0],
                &[0.0, 0.0],
            );
            let interconnection = cascade::check_interconnection(&spec, 40);
            let verdict = cascade::simulate_cascade(
                &spec,
                &[vec![1.0], vec![1.0]],
                1e-4,
                1e-4,
                &*step,
                1e6,
            )?;
            let scalar = cascade::scalar_example(
                1.0,
                1.0,
                2,
                1.0,
                &|x: f64| x.cos(),
                &|t: f64| (2.0 * t).sin(),
                1.0,
                2.0,
                1e-4,
            )?;
            let pass =
                interconnection.pass && verdict.pass && scalar.max_residual_rel <= 1e-6;
            let report = serde_json::json!({
                "interconnection_pass": interconnection.pass,
                "alpha_identity_ok": interconnection.alpha_identity_ok,
                "cascade_final_norms": verdict.final_norms,
                "cascade_pass": verdict.pass,
                "scalar_max_residual_rel": scalar.max_residual_rel,
                "scalar_omega_absorbing": scalar.omega_absorbing,
                "pass": pass,
            });
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Parse(e.to_string()))?;
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                let path = dir.join("bench_report.json");
                std::fs::write(&path, &text)?;
                println!("wrote {}", path.display());
            }
            println!("{text}");
            if pass {
                Ok(())
            } else {
                Err(Error::Propagation {
                    t: 1.0,
                    message: "cascade bench failed; see report".into(),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's default exit code for usage errors is 2; the CLI
            // contract reserves 2 for runtime failures
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
