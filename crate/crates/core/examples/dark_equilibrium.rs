// Equilibrium potential for striated doping, and the silent dark signal.

use lps::cascade::{run_cascade, CascadeSettings, Equilibrium};
use lps::error::Result;
use lps::mesh::{build_grid, GridSpec};
use lps::physics::{DopingProfile, LaserSpec, ModelParams};
use std::sync::Arc;

pub fn run() -> Result<()> {
    let grid = Arc::new(build_grid(&GridSpec::line(300))?);
    let params = ModelParams::unit();
    let doping = DopingProfile::Sinusoidal { mean: 1.0 / 1.2, amplitude: 0.2, period: 0.1, axis: 0 };
    let settings = CascadeSettings::default();

    let eq = Equilibrium::new(&grid, &params, &doping, &settings)?;
    let psi0 = eq.psi0.field.values();
    let (lo, hi) = psi0.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("psi0 in [{lo:.6}, {hi:.6}], newton iterations {}", eq.psi0.report.iterations);
    println!("energy of w: {:.6e}", eq.w_energy());

    let dark = run_cascade(&grid, &params, &doping, &LaserSpec::dark(), &settings)?;
    println!("dark uD2 = {:e}", dark.ud2);
    assert_eq!(dark.ud2, 0.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
