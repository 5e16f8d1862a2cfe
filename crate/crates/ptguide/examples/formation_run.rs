//! Four vehicles arriving simultaneously on a moving target, loaded from a
//! JSON scenario. Writes per-vehicle traces and the arrival report.

use ptguide::scenario::{parse_scenario, write_report, write_trace};
use ptguide::sim::run_formation;
use ptguide::Result;

const SCENARIO: &str = include_str!("../tests/fixtures/baseline.json");

fn main() -> Result<()> {
    let scenario = parse_scenario(SCENARIO)?;
    let (traces, report) = run_formation(&scenario)?;

    println!("Td = {} s", report.td);
    println!("vehicle   R(Td) (m)   q(Td) (deg)   |R err|   |q err| (deg)   S_d (m)");
    for (i, v) in report.per_vehicle.iter().enumerate() {
        println!(
            "{:>7}  {:10.3}  {:11.4}  {:8.4}  {:13.2e}  {:9.1}{}",
            i + 1,
            v.r_final,
            v.q_final_deg,
            v.r_err,
            v.q_err_deg,
            v.s_d,
            v.failure
                .as_deref()
                .map(|f| format!("   FAILED: {f}"))
                .unwrap_or_default()
        );
    }

    for (i, trace) in traces.iter().enumerate() {
        write_trace(trace, format!("formation_v{}.csv", i + 1))?;
    }
    write_report(&report, "formation_report.json")?;
    println!("\nwrote formation_v*.csv and formation_report.json");
    Ok(())
}
