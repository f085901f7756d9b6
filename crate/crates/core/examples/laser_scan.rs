// Scan a beam across a striated Si sample and print the signal.

use lps::config::RunConfig;
use lps::error::Result;
use lps::scan::{dominant_frequency, run_scan, ScanOptions};

const CONFIG: &str = r#"
material = "Si"

[grid]
nx = 300

[doping]
profile = "sinusoidal"
amplitude = 0.2
period = 0.125

[laser]
amplitude = 1.0
spot_radius = 0.015

[scan]
start = 0.0
stop = 0.984375
step = 0.015625
"#;

pub fn run() -> Result<()> {
    let config = RunConfig::from_str(CONFIG)?;
    let result = run_scan(&config, ScanOptions::default())?;
    for row in result.rows.iter().step_by(5) {
        println!("x0 = {:8.2} um   uD = {:+.4e} V", row.x0_um, row.ud_volts);
    }
    let k = dominant_frequency(&result.signal());
    println!("{} points in {:?}, dominant frequency {k}", result.rows.len(), result.elapsed);
    assert_eq!(k, 8);
    assert!(result.all_bounds_ok());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
