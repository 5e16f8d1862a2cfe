//! Speed planning for simultaneous arrival: each vehicle gets a polynomial
//! speed profile matched to its own travel range so that all of them cover
//! their paths in the same flight time.

use ptguide::reference::plan_velocity_profile;
use ptguide::{ReferenceParams, Result};

fn main() -> Result<()> {
    let td = 20.0; // common flight time (s)
    let vdf = 0.0; // terminal closing speed relative to the reference point
    let geometries: [(f64, f64, f64, f64); 4] = [
        (7000.0, 220.0, 230.0, 30.0),
        (6000.0, -60.0, -40.0, -50.0),
        (5000.0, 30.0, 50.0, 30.0),
        (5000.0, 150.0, 140.0, -30.0),
    ];

    println!("vehicle   S_d (m)    V(0)   V(Td)   peak V   integral err");
    for (i, &(r0, q0, qf, eta0)) in geometries.iter().enumerate() {
        let params = ReferenceParams::new(
            r0,
            1000.0,
            q0.to_radians(),
            qf.to_radians(),
            eta0.to_radians(),
            6,
            10,
        )?;
        let profile = plan_velocity_profile(50.0, vdf, params.sd, td, 3)?;
        let peak = (0..=1000)
            .map(|k| profile.eval(td * k as f64 / 1000.0))
            .fold(f64::MIN, f64::max);
        println!(
            "{:>7}  {:9.2}  {:5.1}  {:6.1}  {:7.1}  {:+.2e}",
            i + 1,
            params.sd,
            profile.eval(0.0),
            profile.eval(td),
            peak,
            profile.integral(td) - params.sd
        );
    }
    println!("\nall profiles integrate to their travel ranges over the same Td = {td} s,");
    println!("so the vehicles arrive together even though their paths differ in length");
    Ok(())
}
