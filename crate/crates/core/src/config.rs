//! Run configuration: a flat key–value file with dotted sections.
//!
//! ```text
//! material = "Si"
//! grid.nx = 400
//! laser.power_mW = 2
//! laser.spot_radius_um = 20
//! scan.start = 0.1
//! scan.stop = 0.9
//! scan.step = 0.01
//! ```
//!
//! Every key is optional except `laser.spot_radius_um` (or the scaled
//! `laser.spot_radius`) whenever the laser is on. Unknown keys are rejected.
//! Scaled-unit keys override the values derived from physical ones.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::cascade::CascadeSettings;
use crate::error::{Error, Result};
use crate::full::FullSettings;
use crate::mesh::{build_grid, ContactLayout, Field, Grid, GridSpec};
use crate::physics::{DopingProfile, LaserSpec, ModelParams};
use crate::solver::NewtonSettings;
use crate::units::{compute_scaling, Material, PhysicalParams, ScaledParams};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    material: Option<String>,
    seed: Option<u64>,
    #[serde(default)]
    physics: RawPhysics,
    #[serde(default)]
    circuit: RawCircuit,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    doping: RawDoping,
    #[serde(default)]
    laser: RawLaser,
    #[serde(default)]
    scan: RawScan,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    validate: RawValidate,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    #[serde(rename = "temperature_K")]
    temperature_k: Option<f64>,
    diameter_mm: Option<f64>,
    doping_ref_cm3: Option<f64>,
    #[serde(rename = "band_gap_eV")]
    band_gap_ev: Option<f64>,
    relative_permittivity: Option<f64>,
    n_c_cm3: Option<f64>,
    n_v_cm3: Option<f64>,
    #[serde(rename = "mu_n_cm2Vs")]
    mu_n_cm2vs: Option<f64>,
    #[serde(rename = "mu_p_cm2Vs")]
    mu_p_cm2vs: Option<f64>,
    c_d_cm3s: Option<f64>,
    c_n_cm6s: Option<f64>,
    c_p_cm6s: Option<f64>,
    tau_n_s: Option<f64>,
    tau_p_s: Option<f64>,
    n_t_cm3: Option<f64>,
    p_t_cm3: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    resistance_ohm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    lambda: Option<f64>,
    delta: Option<f64>,
    resistance: Option<f64>,
    phi0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: Option<usize>,
    ny: Option<usize>,
    height: Option<f64>,
    contacts: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoping {
    profile: Option<String>,
    mean: Option<f64>,
    mean_cm3: Option<f64>,
    amplitude: Option<f64>,
    period: Option<f64>,
    period_um: Option<f64>,
    axis: Option<usize>,
    level: Option<f64>,
    file: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaser {
    #[serde(rename = "power_mW")]
    power_mw: Option<f64>,
    wavelength_nm: Option<f64>,
    spot_radius_um: Option<f64>,
    spot_radius: Option<f64>,
    penetration_depth_um: Option<f64>,
    penetration_depth: Option<f64>,
    reflectivity: Option<f64>,
    amplitude: Option<f64>,
    position: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    start: Option<f64>,
    stop: Option<f64>,
    step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    abs_tol: Option<f64>,
    step_tol: Option<f64>,
    max_iter: Option<usize>,
    slack: Option<f64>,
    exact_contact_density: Option<bool>,
    gummel_tol: Option<f64>,
    gummel_max: Option<usize>,
    coupling_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidate {
    cases: Option<usize>,
    deltas: Option<Vec<f64>>,
}

/// Laser positions x₀ = start, start + step, … ≤ stop (scaled).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ScanRange {
    pub fn positions(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSettings {
    pub cases: usize,
    pub deltas: Vec<f64>,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        ValidateSettings { cases: 50, deltas: vec![1e-2, 3e-3, 1e-3] }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub material: Material,
    pub physical: PhysicalParams,
    pub scaled: ScaledParams,
    pub model: ModelParams,
    pub grid: GridSpec,
    pub doping: DopingProfile,
    pub laser: LaserSpec,
    pub scan: Option<ScanRange>,
    pub cascade: CascadeSettings,
    pub full: FullSettings,
    pub seed: u64,
    pub validate: ValidateSettings,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses configuration text; relative paths resolve against the working directory.
    pub fn from_str(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("."))
    }

    /// Defaults for a material preset with the laser off.
    pub fn preset(material: Material) -> Result<Self> {
        Self::from_str(&format!("material = \"{}\"\nlaser.power_mW = 0", material_name(material)))
    }

    fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: Raw = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let material: Material = raw.material.as_deref().unwrap_or("Si").parse()?;
        let mut phys = PhysicalParams::preset(material);
        apply_physics(&mut phys, &raw.physics, &raw.circuit);
        let l = &raw.laser;
        if let Some(v) = l.power_mw {
            phys.laser_power = v * 1e-3;
        }
        if let Some(v) = l.wavelength_nm {
            phys.laser_wavelength = v * 1e-9;
        }
        if let Some(v) = l.spot_radius_um {
            phys.spot_radius = Some(v * 1e-6);
        }
        if let Some(v) = l.penetration_depth_um {
            phys.penetration_depth = v * 1e-6;
        }
        if let Some(v) = l.reflectivity {
            phys.reflectivity = v;
        }
        let scaled = compute_scaling(&phys)?;
        let mut model = scaled.model();
        let m = &raw.model;
        model.lambda = m.lambda.unwrap_or(model.lambda);
        model.delta = m.delta.unwrap_or(model.delta);
        model.resistance = m.resistance.unwrap_or(model.resistance);
        model.phi0 = m.phi0.unwrap_or(model.phi0);

        let grid = grid_spec(&raw.grid)?;
        let doping = doping_profile(&raw.doping, &scaled, &grid, base)?;

        let amplitude = l.amplitude.unwrap_or(scaled.generation_amplitude);
        let spot = l.spot_radius.or(scaled.spot_radius);
        let laser = if amplitude == 0.0 {
            LaserSpec { position: l.position.unwrap_or(0.5), ..LaserSpec::dark() }
        } else {
            let spot_radius = spot.ok_or_else(|| {
                config_err("laser.spot_radius_um is required when the laser is on (no default exists)")
            })?;
            LaserSpec {
                amplitude,
                spot_radius,
                penetration_depth: l.penetration_depth.unwrap_or(scaled.penetration_depth),
                position: l.position.unwrap_or(0.5),
            }
        };
        laser.validate().map_err(|e| config_err(e.to_string()))?;

        let scan = match (raw.scan.start, raw.scan.stop, raw.scan.step) {
            (None, None, None) => None,
            (Some(start), Some(stop), Some(step)) => {
                let extent = grid.extent[0];
                if !(step > 0.0) {
                    return Err(config_err(format!("scan.step must be > 0, got {step}")));
                }
                if !(0.0 <= start && start <= stop && stop <= extent) {
                    return Err(config_err(format!(
                        "scan range [{start}, {stop}] must lie inside the domain [0, {extent}]"
                    )));
                }
                Some(ScanRange { start, stop, step })
            }
            _ => return Err(config_err("scan.start, scan.stop and scan.step must be given together")),
        };

        let s = &raw.solver;
        let defaults = NewtonSettings::default();
        let newton = NewtonSettings {
            abs_tol: s.abs_tol.unwrap_or(defaults.abs_tol),
            step_tol: s.step_tol.unwrap_or(defaults.step_tol),
            max_iter: s.max_iter.unwrap_or(defaults.max_iter),
            ..defaults
        };
        newton.validate().map_err(|e| config_err(e.to_string()))?;
        let exact = s.exact_contact_density.unwrap_or(true);
        let cascade = CascadeSettings {
            newton,
            slack: s.slack.unwrap_or(CascadeSettings::default().slack),
            exact_contact_density: exact,
        };
        let fd = FullSettings::default();
        let full = FullSettings {
            newton,
            gummel_tol: s.gummel_tol.unwrap_or(fd.gummel_tol),
            gummel_max: s.gummel_max.unwrap_or(fd.gummel_max),
            coupling_tol: s.coupling_tol.unwrap_or(fd.coupling_tol),
            exact_contact_density: exact,
            ..fd
        };
        let vd = ValidateSettings::default();
        let validate = ValidateSettings {
            cases: raw.validate.cases.unwrap_or(vd.cases),
            deltas: raw.validate.deltas.clone().unwrap_or(vd.deltas),
        };
        Ok(RunConfig {
            material,
            physical: phys,
            scaled,
            model,
            grid,
            doping,
            laser,
            scan,
            cascade,
            full,
            seed: raw.seed.unwrap_or(0),
            validate,
        })
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(build_grid(&self.grid)?))
    }
}

fn material_name(m: Material) -> &'static str {
    match m {
        Material::Si => "Si",
        Material::GaAs => "GaAs",
    }
}

fn apply_physics(p: &mut PhysicalParams, r: &RawPhysics, c: &RawCircuit) {
    let cm3 = 1e6;
    let set = |dst: &mut f64, v: Option<f64>, factor: f64| {
        if let Some(v) = v {
            *dst = v * factor;
        }
    };
    set(&mut p.temperature, r.temperature_k, 1.0);
    set(&mut p.diameter, r.diameter_mm, 1e-3);
    set(&mut p.c_ref, r.doping_ref_cm3, cm3);
    set(&mut p.relative_permittivity, r.relative_permittivity, 1.0);
    set(&mut p.n_c, r.n_c_cm3, cm3);
    set(&mut p.n_v, r.n_v_cm3, cm3);
    set(&mut p.mu_n, r.mu_n_cm2vs, 1e-4);
    set(&mut p.mu_p, r.mu_p_cm2vs, 1e-4);
    set(&mut p.c_d, r.c_d_cm3s, 1e-6);
    set(&mut p.c_n, r.c_n_cm6s, 1e-12);
    set(&mut p.c_p, r.c_p_cm6s, 1e-12);
    set(&mut p.tau_n, r.tau_n_s, 1.0);
    set(&mut p.tau_p, r.tau_p_s, 1.0);
    set(&mut p.n_t, r.n_t_cm3, cm3);
    set(&mut p.p_t, r.p_t_cm3, cm3);
    set(&mut p.resistance, c.resistance_ohm, 1.0);
    // keep the conduction edge on the φ̂₀ = 0 convention of the presets
    p.e_c = p.thermal_voltage() * (p.n_c / p.c_ref).ln();
    let gap = r.band_gap_ev.unwrap_or(p.band_gap());
    p.e_v = p.e_c - gap;
}

fn grid_spec(r: &RawGrid) -> Result<GridSpec> {
    let nx = r.nx.unwrap_or(400);
    let contacts = match r.contacts.as_deref().unwrap_or("x") {
        "x" => ContactLayout::XFaces,
        "y" => ContactLayout::YFaces,
        other => return Err(config_err(format!("grid.contacts must be \"x\" or \"y\", got `{other}`"))),
    };
    let mut spec = match r.ny {
        None | Some(0) => GridSpec::line(nx),
        Some(ny) => GridSpec::rect(nx, ny, r.height.unwrap_or(0.5)),
    };
    spec.contacts = contacts;
    Ok(spec)
}

fn doping_profile(r: &RawDoping, s: &ScaledParams, grid: &GridSpec, base: &Path) -> Result<DopingProfile> {
    let cm3 = 1e6;
    match r.profile.as_deref().unwrap_or("sinusoidal") {
        "constant" => Ok(DopingProfile::Constant { level: r.level.unwrap_or(1.0) }),
        "sinusoidal" => {
            // default: the preset's N_D0 (1 + 0.2 sin(2πx / 100 µm)) with sup C = C̄
            let amplitude = r.amplitude.unwrap_or(0.2);
            let mean = match (r.mean, r.mean_cm3) {
                (Some(m), _) => m,
                (None, Some(m)) => m * cm3 / s.c_ref,
                (None, None) => 1.0 / (1.0 + amplitude.abs()),
            };
            let period = match (r.period, r.period_um) {
                (Some(p), _) => p,
                (None, Some(p)) => p * 1e-6 / s.diameter,
                (None, None) => 100e-6 / s.diameter,
            };
            Ok(DopingProfile::Sinusoidal { mean, amplitude, period, axis: r.axis.unwrap_or(0) })
        }
        "tabulated" => {
            let file = r.file.as_ref().ok_or_else(|| config_err("doping.file is required for a tabulated profile"))?;
            let g = Arc::new(build_grid(grid)?);
            let reader = std::io::BufReader::new(std::fs::File::open(base.join(file))?);
            Ok(DopingProfile::Tabulated { values: Field::load(g, reader)?.into_values() })
        }
        other => Err(config_err(format!("unknown doping.profile `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_si_preset() {
        let c = RunConfig::preset(Material::Si).unwrap();
        assert_eq!(c.laser.amplitude, 0.0);
        let m = compute_scaling(&PhysicalParams::preset(Material::Si)).unwrap().model();
        assert_eq!(c.model, m);
        match c.doping {
            DopingProfile::Sinusoidal { mean, amplitude, period, .. } => {
                assert!((mean * (1.0 + amplitude) - 1.0).abs() < 1e-15);
                assert!((period - 1.0 / 30.0).abs() < 1e-15);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let c = RunConfig::from_str(
            "material = \"GaAs\"\nlaser.power_mW = 2\nlaser.spot_radius_um = 30\nmodel.delta = 1e-3\n\
             grid.nx = 50\ngrid.ny = 10\nscan.start = 0.1\nscan.stop = 0.3\nscan.step = 0.1\ncircuit.resistance_ohm = 1e3\n",
        )
        .unwrap();
        assert_eq!(c.material, Material::GaAs);
        assert_eq!(c.model.delta, 1e-3);
        assert_eq!(c.grid.cells, vec![50, 10]);
        assert!((c.laser.spot_radius - 30e-6 / 3e-3).abs() < 1e-15);
        assert!(c.laser.amplitude > 0.0);
        assert_eq!(c.scan.unwrap().positions().len(), 3);
        assert!((c.physical.resistance - 1e3).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "laser.power_mW = 2",
            "grid.typo = 3",
            "scan.start = 0.5\nscan.stop = 0.2\nscan.step = 0.1",
            "scan.start = 0.1\nscan.stop = 1.5\nscan.step = 0.1",
            "scan.start = 0.1\nscan.stop = 0.5\nscan.step = 0",
            "scan.start = 0.1",
            "material = \"Ge\"",
            "doping.profile = \"gaussian\"",
            "solver.abs_tol = -1",
        ] {
            assert!(matches!(RunConfig::from_str(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn scan_positions_include_the_end() {
        let r = ScanRange { start: 0.1, stop: 0.9, step: 0.1 };
        let x = r.positions();
        assert_eq!(x.len(), 9);
        assert!((x[8] - 0.9).abs() < 1e-12);
    }
}
