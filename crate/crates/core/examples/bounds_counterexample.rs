// Weak, localized light where φₙ* leaves its a priori interval.
//
// With 0 < Ḡ < r̲ the interval's lower end is 0, yet φₙ* dips below zero
// under the spot. A larger resistance keeps φₙ⁽²⁾ inside its own bound.

use std::sync::Arc;

use lps::cascade::{run_cascade, CascadeSettings};
use lps::error::Result;
use lps::mesh::{build_grid, GridSpec};
use lps::physics::{DopingProfile, LaserSpec, ModelParams};

pub fn run() -> Result<()> {
    let grid = Arc::new(build_grid(&GridSpec::line(200))?);
    let doping = DopingProfile::Sinusoidal { mean: 1.0, amplitude: 0.2, period: 0.25, axis: 0 };
    let laser = LaserSpec { amplitude: 1e-2, spot_radius: 0.03, penetration_depth: 0.05, position: 0.37 };

    for resistance in [1e-3, 1.0] {
        let params = ModelParams { resistance, ..ModelParams::unit() };
        let sol = run_cascade(&grid, &params, &doping, &laser, &CascadeSettings::default())?;
        println!("resistance {resistance}");
        for b in sol.bounds.iter().chain(&sol.diagnostics) {
            println!("  {b}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
