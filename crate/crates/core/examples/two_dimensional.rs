// A penetrating beam on a 2D cross-section with contacts on the x-faces.

use std::sync::Arc;

use lps::cascade::{run_cascade, CascadeSettings};
use lps::error::Result;
use lps::mesh::{build_grid, GridSpec};
use lps::physics::{DopingProfile, LaserSpec, ModelParams};

pub fn run() -> Result<()> {
    let grid = Arc::new(build_grid(&GridSpec::rect(80, 20, 0.5))?);
    let params = ModelParams { resistance: 2.0, ..ModelParams::unit() };
    let doping = DopingProfile::Sinusoidal { mean: 0.8, amplitude: 0.25, period: 0.2, axis: 0 };
    let settings = CascadeSettings::default();

    for x0 in [0.3, 0.35, 0.4] {
        let laser = LaserSpec { amplitude: 2.0, spot_radius: 0.03, penetration_depth: 0.1, position: x0 };
        let sol = run_cascade(&grid, &params, &doping, &laser, &settings)?;
        println!(
            "x0 = {x0:.2}  uD2 = {:+.6e}  volume/flux mismatch {:.1e}  bounds ok {}",
            sol.ud2,
            (sol.ud2 - sol.ud2_flux).abs(),
            sol.bounds_ok()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
