// Scaled parameters of the Si and GaAs presets.

use lps::error::Result;
use lps::units::{compute_scaling, Material, PhysicalParams};

pub fn run() -> Result<()> {
    for material in [Material::Si, Material::GaAs] {
        let phys = PhysicalParams::preset(material);
        let s = compute_scaling(&phys)?;
        println!("{material:?}");
        println!("  lambda       {:.6e}", s.lambda);
        println!("  delta        {:.6e}", s.delta);
        println!("  mu_p/mu_n    {:.4}", s.mu_p / s.mu_n);
        println!("  resistance   {:.4e}", s.resistance);
        println!("  kappa        {:.4e}", s.generation_amplitude);
        assert!(s.delta < s.lambda);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
