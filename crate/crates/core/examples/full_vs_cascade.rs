// The full drift-diffusion model approaches the asymptotic voltage as δ → 0.

use std::sync::Arc;

use lps::error::Result;
use lps::full::{delta_sweep, log_log_slope, FullSettings};
use lps::mesh::{build_grid, GridSpec};
use lps::physics::{DopingProfile, LaserSpec, ModelParams};

pub fn run() -> Result<()> {
    let grid = Arc::new(build_grid(&GridSpec::line(200))?);
    let params = ModelParams { resistance: 1.5, ..ModelParams::unit() };
    let doping = DopingProfile::Sinusoidal { mean: 1.0, amplitude: 0.2, period: 0.25, axis: 0 };
    let laser = LaserSpec { amplitude: 5.0, spot_radius: 0.03, penetration_depth: 0.05, position: 0.4 };

    let deltas = [1e-2, 3e-3, 1e-3];
    let rows = delta_sweep(&grid, &params, &doping, &laser, &deltas, &FullSettings::default())?;
    for r in &rows {
        println!("{r}");
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    println!("log-log slope {:.3}", log_log_slope(&deltas, &errors));
    assert!(errors.windows(2).all(|w| w[1] < w[0]));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
