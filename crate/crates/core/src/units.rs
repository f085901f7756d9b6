//! Dimensional parameters, material presets and the nondimensionalization.
//!
//! Everything is stored in SI units (m, m⁻³, m²/(V·s), s, W, Ω) except band
//! energies, which are kept in eV so that `E / V_th` is a plain ratio. The
//! helpers in [`cgs`] convert the centimetre-based values that material
//! tables are usually quoted in.

use crate::error::{Error, Result};
use crate::physics::{ModelParams, Recombination};

/// Elementary charge (C), CODATA 2018.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant (J/K), CODATA 2018.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Planck constant (J·s), CODATA 2018.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum (m/s).
pub const LIGHT_SPEED: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m), CODATA 2018.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Conversions from centimetre-based units to SI.
pub mod cgs {
    /// cm⁻³ → m⁻³
    pub fn per_cm3(x: f64) -> f64 {
        x * 1e6
    }
    /// cm²/(V·s) → m²/(V·s)
    pub fn cm2_per_vs(x: f64) -> f64 {
        x * 1e-4
    }
    /// cm³/s → m³/s
    pub fn cm3_per_s(x: f64) -> f64 {
        x * 1e-6
    }
    /// cm⁶/s → m⁶/s
    pub fn cm6_per_s(x: f64) -> f64 {
        x * 1e-12
    }
    /// cm → m
    pub fn cm(x: f64) -> f64 {
        x * 1e-2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Si,
    GaAs,
}

impl std::str::FromStr for Material {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "si" => Ok(Material::Si),
            "gaas" => Ok(Material::GaAs),
            other => Err(Error::Config(format!("unknown material preset `{other}`"))),
        }
    }
}

/// All dimensional constants of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// K
    pub temperature: f64,
    pub charge: f64,
    pub boltzmann: f64,
    pub planck: f64,
    pub light_speed: f64,
    /// ε̄ = ε_r ε₀ is derived from these two.
    pub vacuum_permittivity: f64,
    pub relative_permittivity: f64,
    /// Conduction band edge (eV).
    pub e_c: f64,
    /// Valence band edge (eV).
    pub e_v: f64,
    /// m⁻³
    pub n_c: f64,
    /// m⁻³
    pub n_v: f64,
    /// m²/(V·s)
    pub mu_n: f64,
    /// m²/(V·s)
    pub mu_p: f64,
    /// Reference doping C̄ = sup C (m⁻³).
    pub c_ref: f64,
    /// Domain diameter x̄ (m).
    pub diameter: f64,
    /// W
    pub laser_power: f64,
    /// m
    pub laser_wavelength: f64,
    /// m
    pub penetration_depth: f64,
    /// m; there is no sensible default, it must come from the configuration.
    pub spot_radius: Option<f64>,
    pub reflectivity: f64,
    /// m³/s
    pub c_d: f64,
    /// m⁶/s
    pub c_n: f64,
    /// m⁶/s
    pub c_p: f64,
    /// s
    pub tau_n: f64,
    /// s
    pub tau_p: f64,
    /// m⁻³
    pub n_t: f64,
    /// m⁻³
    pub p_t: f64,
    /// Ω
    pub resistance: f64,
}

impl PhysicalParams {
    /// Material table with default laser, recombination and circuit values.
    ///
    /// The conduction band edge is placed at `k_B T ln(N_c / C̄)`, which makes
    /// the scaled gauge potential φ̂₀ vanish; traps sit at midgap
    /// (`n_T = p_T = n_i`).
    pub fn preset(material: Material) -> Self {
        use cgs::*;
        let temperature = 300.0;
        let v_th = BOLTZMANN * temperature / ELEMENTARY_CHARGE;
        let (band_gap, n_c, n_v, eps_r, mu_n, mu_p, c_ref) = match material {
            Material::Si => (
                1.12,
                per_cm3(1.04e19),
                per_cm3(2.8e19),
                11.8,
                cm2_per_vs(1323.0),
                cm2_per_vs(480.0),
                per_cm3(1.2e16),
            ),
            Material::GaAs => (
                1.424,
                per_cm3(4.7e17),
                per_cm3(9e18),
                12.9,
                cm2_per_vs(9400.0),
                cm2_per_vs(400.0),
                per_cm3(1.2e18),
            ),
        };
        let (c_d, c_n, c_p, tau) = match material {
            Material::Si => (cm3_per_s(1.1e-14), cm6_per_s(2.8e-31), cm6_per_s(9.9e-32), 1e-6),
            Material::GaAs => (cm3_per_s(7.2e-10), cm6_per_s(1e-30), cm6_per_s(1e-30), 1e-8),
        };
        let e_c = v_th * (n_c / c_ref).ln();
        let mut p = PhysicalParams {
            temperature,
            charge: ELEMENTARY_CHARGE,
            boltzmann: BOLTZMANN,
            planck: PLANCK,
            light_speed: LIGHT_SPEED,
            vacuum_permittivity: VACUUM_PERMITTIVITY,
            relative_permittivity: eps_r,
            e_c,
            e_v: e_c - band_gap,
            n_c,
            n_v,
            mu_n,
            mu_p,
            c_ref,
            diameter: 3e-3,
            laser_power: 2e-3,
            laser_wavelength: 685e-9,
            penetration_depth: 4.8e-6,
            spot_radius: None,
            reflectivity: 0.3,
            c_d,
            c_n,
            c_p,
            tau_n: tau,
            tau_p: tau,
            n_t: 0.0,
            p_t: 0.0,
            resistance: 1e6,
        };
        let ni = intrinsic_density(&p);
        p.n_t = ni;
        p.p_t = ni;
        p
    }

    pub fn thermal_voltage(&self) -> f64 {
        self.boltzmann * self.temperature / self.charge
    }

    pub fn band_gap(&self) -> f64 {
        self.e_c - self.e_v
    }

    pub fn permittivity(&self) -> f64 {
        self.relative_permittivity * self.vacuum_permittivity
    }

    /// μ̄ = max(μ_n, μ_p)
    pub fn mu_ref(&self) -> f64 {
        self.mu_n.max(self.mu_p)
    }

    /// Photon flux κ = P λ_L (1 − ρ) / (h c), in 1/s.
    pub fn photon_flux(&self) -> f64 {
        self.laser_power * self.laser_wavelength * (1.0 - self.reflectivity)
            / (self.planck * self.light_speed)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                })
            }
        }
        fn non_negative(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                })
            }
        }
        positive("temperature", self.temperature)?;
        positive("charge", self.charge)?;
        positive("boltzmann", self.boltzmann)?;
        positive("planck", self.planck)?;
        positive("light_speed", self.light_speed)?;
        positive("vacuum_permittivity", self.vacuum_permittivity)?;
        positive("relative_permittivity", self.relative_permittivity)?;
        positive("n_c", self.n_c)?;
        positive("n_v", self.n_v)?;
        positive("mu_n", self.mu_n)?;
        positive("mu_p", self.mu_p)?;
        positive("c_ref", self.c_ref)?;
        positive("diameter", self.diameter)?;
        positive("penetration_depth", self.penetration_depth)?;
        positive("laser_wavelength", self.laser_wavelength)?;
        positive("tau_n", self.tau_n)?;
        positive("tau_p", self.tau_p)?;
        non_negative("laser_power", self.laser_power)?;
        non_negative("c_d", self.c_d)?;
        non_negative("c_n", self.c_n)?;
        non_negative("c_p", self.c_p)?;
        non_negative("n_t", self.n_t)?;
        non_negative("p_t", self.p_t)?;
        non_negative("resistance", self.resistance)?;
        if let Some(s) = self.spot_radius {
            positive("spot_radius", s)?;
        }
        if !(0.0..1.0).contains(&self.reflectivity) {
            return Err(Error::InvalidParameter {
                name: "reflectivity",
                reason: format!("must lie in [0, 1), got {}", self.reflectivity),
            });
        }
        if !(self.e_c.is_finite() && self.e_v.is_finite()) || self.e_c < self.e_v {
            return Err(Error::InvalidParameter {
                name: "e_c",
                reason: format!("need E_c >= E_v, got E_c = {}, E_v = {}", self.e_c, self.e_v),
            });
        }
        Ok(())
    }
}

/// n_i = sqrt(N_c N_v) exp(−(E_c − E_v) / (2 k_B T)), in m⁻³.
pub fn intrinsic_density(p: &PhysicalParams) -> f64 {
    (p.n_c * p.n_v).sqrt() * (-p.band_gap() / (2.0 * p.thermal_voltage())).exp()
}

/// Nondimensional constants together with the reference values needed to
/// map results back to physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledParams {
    pub lambda: f64,
    pub delta: f64,
    /// Time scale x̄² / (μ̄ V_th), s.
    pub tau: f64,
    pub thermal_voltage: f64,
    pub phi0: f64,
    pub c_d: f64,
    pub c_n: f64,
    pub c_p: f64,
    pub tau_n: f64,
    pub tau_p: f64,
    pub n_t: f64,
    pub p_t: f64,
    pub mu_n: f64,
    pub mu_p: f64,
    pub resistance: f64,
    /// ī_D = q μ̄ C̄ V_th x̄, A.
    pub current_scale: f64,
    /// Ḡ = n_i² / (C̄ τ), m⁻³ s⁻¹.
    pub generation_scale: f64,
    /// κ̂ = κ / (Ḡ x̄³)
    pub generation_amplitude: f64,
    pub spot_radius: Option<f64>,
    pub penetration_depth: f64,
    pub intrinsic_density: f64,
    pub c_ref: f64,
    pub diameter: f64,
    pub mu_ref: f64,
    pub charge: f64,
}

pub fn compute_scaling(p: &PhysicalParams) -> Result<ScaledParams> {
    p.validate()?;
    let v_th = p.thermal_voltage();
    let ni = intrinsic_density(p);
    let c_ref = p.c_ref;
    let x_ref = p.diameter;
    let mu_ref = p.mu_ref();
    let lambda = (p.permittivity() * v_th / (p.charge * c_ref * x_ref * x_ref)).sqrt();
    let delta = ni / c_ref;
    let tau = x_ref * x_ref / (mu_ref * v_th);
    let generation_scale = ni * ni / (c_ref * tau);
    let s = ScaledParams {
        lambda,
        delta,
        tau,
        thermal_voltage: v_th,
        phi0: p.e_c / v_th - (p.n_c / c_ref).ln(),
        c_d: tau * c_ref * p.c_d,
        c_n: tau * c_ref * c_ref * p.c_n,
        c_p: tau * c_ref * c_ref * p.c_p,
        tau_n: p.tau_n / tau,
        tau_p: p.tau_p / tau,
        n_t: p.n_t / ni,
        p_t: p.p_t / ni,
        mu_n: p.mu_n / mu_ref,
        mu_p: p.mu_p / mu_ref,
        resistance: p.charge * mu_ref * c_ref * x_ref * p.resistance,
        current_scale: p.charge * mu_ref * c_ref * v_th * x_ref,
        generation_scale,
        generation_amplitude: p.photon_flux() / (generation_scale * x_ref.powi(3)),
        spot_radius: p.spot_radius.map(|s| s / x_ref),
        penetration_depth: p.penetration_depth / x_ref,
        intrinsic_density: ni,
        c_ref,
        diameter: x_ref,
        mu_ref,
        charge: p.charge,
    };
    for (name, v) in [("lambda", s.lambda), ("delta", s.delta), ("tau", s.tau)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("scaled value {v} is not finite and positive"),
            });
        }
    }
    Ok(s)
}

impl ScaledParams {
    /// Scaled model constants for the solvers.
    pub fn model(&self) -> ModelParams {
        ModelParams {
            lambda: self.lambda,
            delta: self.delta,
            phi0: self.phi0,
            mu_n: self.mu_n,
            mu_p: self.mu_p,
            recombination: Recombination {
                c_d: self.c_d,
                c_n: self.c_n,
                c_p: self.c_p,
                tau_n: self.tau_n,
                tau_p: self.tau_p,
                n_t: self.n_t,
                p_t: self.p_t,
            },
            resistance: self.resistance,
        }
    }

    /// Inverse of [`compute_scaling`] for the derived quantities: rebuilds the
    /// recombination, circuit, mobility and laser-geometry fields of `base`.
    pub fn to_physical(&self, base: &PhysicalParams) -> PhysicalParams {
        let mut p = base.clone();
        let ni = self.intrinsic_density;
        p.c_d = self.c_d / (self.tau * self.c_ref);
        p.c_n = self.c_n / (self.tau * self.c_ref * self.c_ref);
        p.c_p = self.c_p / (self.tau * self.c_ref * self.c_ref);
        p.tau_n = self.tau_n * self.tau;
        p.tau_p = self.tau_p * self.tau;
        p.n_t = self.n_t * ni;
        p.p_t = self.p_t * ni;
        p.mu_n = self.mu_n * self.mu_ref;
        p.mu_p = self.mu_p * self.mu_ref;
        p.resistance = self.resistance / (self.charge * self.mu_ref * self.c_ref * self.diameter);
        p.spot_radius = self.spot_radius.map(|s| s * self.diameter);
        p.penetration_depth = self.penetration_depth * self.diameter;
        p
    }

    /// Scaled position along the scan axis → micrometres.
    pub fn length_um(&self, x_scaled: f64) -> f64 {
        x_scaled * self.diameter * 1e6
    }
}

/// (voltage in V, current in A) from scaled voltage and current.
pub fn descale_signal(u_scaled: f64, i_scaled: f64, s: &ScaledParams) -> (f64, f64) {
    (s.thermal_voltage * u_scaled, s.current_scale * i_scaled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn si_intrinsic_density() {
        let p = PhysicalParams::preset(Material::Si);
        // ~6.68e9 cm^-3 from the closed form with CODATA constants
        let ni_cm3 = intrinsic_density(&p) * 1e-6;
        assert!(rel(ni_cm3, 6.675_898_7e9) < 1e-6, "{ni_cm3}");
    }

    #[test]
    fn zero_band_gap_gives_geometric_mean() {
        let mut p = PhysicalParams::preset(Material::Si);
        p.e_v = p.e_c;
        let ni = intrinsic_density(&p);
        assert!(rel(ni, (p.n_c * p.n_v).sqrt()) < 1e-15);
    }

    #[test]
    fn published_lambda_and_delta() {
        let si = compute_scaling(&PhysicalParams::preset(Material::Si)).unwrap();
        assert!(rel(si.lambda, 1.249382e-5) < 1e-5);
        assert!(rel(si.delta, 5.528936e-7) < 1e-2);
        let gaas = compute_scaling(&PhysicalParams::preset(Material::GaAs)).unwrap();
        assert!(rel(gaas.lambda, 1.306319e-6) < 1e-5);
        assert!(rel(gaas.delta, 2.154036e-12) < 0.25);
        assert!(si.phi0.abs() < 1e-12);
    }

    #[test]
    fn lambda_halves_when_doping_quadruples() {
        let p = PhysicalParams::preset(Material::Si);
        let mut q = p.clone();
        q.c_ref *= 4.0;
        let a = compute_scaling(&p).unwrap();
        let b = compute_scaling(&q).unwrap();
        assert!(rel(b.lambda, a.lambda / 2.0) < 1e-14);
        let mut r = p.clone();
        r.c_ref *= 2.0;
        let c = compute_scaling(&r).unwrap();
        assert!(rel(c.delta, a.delta / 2.0) < 1e-14);
    }

    #[test]
    fn round_trip_restores_inputs() {
        let mut p = PhysicalParams::preset(Material::Si);
        p.spot_radius = Some(50e-6);
        let s = compute_scaling(&p).unwrap();
        let back = s.to_physical(&p);
        for (a, b) in [
            (back.c_d, p.c_d),
            (back.c_n, p.c_n),
            (back.c_p, p.c_p),
            (back.tau_n, p.tau_n),
            (back.tau_p, p.tau_p),
            (back.n_t, p.n_t),
            (back.p_t, p.p_t),
            (back.mu_n, p.mu_n),
            (back.mu_p, p.mu_p),
            (back.resistance, p.resistance),
            (back.spot_radius.unwrap(), p.spot_radius.unwrap()),
            (back.penetration_depth, p.penetration_depth),
        ] {
            assert!(rel(a, b) <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn unit_system_does_not_change_dimensionless_output() {
        let si = PhysicalParams::preset(Material::Si);
        // same material assembled from centimetre-based numbers
        let mut alt = si.clone();
        alt.n_c = cgs::per_cm3(1.04e19);
        alt.n_v = cgs::per_cm3(2.8e19);
        alt.mu_n = cgs::cm2_per_vs(1323.0);
        alt.c_ref = cgs::per_cm3(1.2e16);
        alt.diameter = cgs::cm(0.3);
        let a = compute_scaling(&si).unwrap();
        let b = compute_scaling(&alt).unwrap();
        assert!(rel(a.lambda, b.lambda) <= 1e-12);
        assert!(rel(a.delta, b.delta) <= 1e-12);
    }

    #[test]
    fn deterministic() {
        let p = PhysicalParams::preset(Material::GaAs);
        let a = compute_scaling(&p).unwrap();
        let b = compute_scaling(&p).unwrap();
        assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
        assert_eq!(a.delta.to_bits(), b.delta.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn descale() {
        let s = compute_scaling(&PhysicalParams::preset(Material::Si)).unwrap();
        assert_eq!(descale_signal(0.0, 0.0, &s), (0.0, 0.0));
        let (u, i) = descale_signal(1.0, 1.0, &s);
        assert!(rel(u, 0.025_852) < 1e-5);
        // q * 0.1323 m^2/Vs * 1.2e22 m^-3 * V_th * 3e-3 m, by hand
        let by_hand = 1.602_176_634e-19 * 0.1323 * 1.2e22 * 0.025_851_999_786 * 3e-3;
        assert!(rel(i, by_hand) < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut p = PhysicalParams::preset(Material::Si);
        p.c_ref = 0.0;
        assert!(compute_scaling(&p).is_err());
        let mut p = PhysicalParams::preset(Material::Si);
        p.diameter = f64::NAN;
        assert!(compute_scaling(&p).is_err());
        let mut p = PhysicalParams::preset(Material::Si);
        p.reflectivity = 1.0;
        assert!(compute_scaling(&p).is_err());
        let mut p = PhysicalParams::preset(Material::Si);
        p.e_v = p.e_c + 0.1;
        assert!(compute_scaling(&p).is_err());
    }
}
