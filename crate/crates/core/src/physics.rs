//! Constitutive terms of the scaled model: doping, laser generation,
//! recombination coefficients and the Boltzmann density relations.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Face, Field, Grid};

/// Scaled recombination constants (Ĉ_d, Ĉ_n, Ĉ_p, τ̂_n, τ̂_p, n̂_T, p̂_T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recombination {
    pub c_d: f64,
    pub c_n: f64,
    pub c_p: f64,
    pub tau_n: f64,
    pub tau_p: f64,
    pub n_t: f64,
    pub p_t: f64,
}

impl Recombination {
    /// Leading-order rate coefficient C_d + C_n n + 1/(τ_p n).
    pub fn r0(&self, n: f64) -> Result<f64> {
        if !(n > 0.0) {
            return Err(Error::NonPositive { what: "r0 density", value: n });
        }
        Ok(self.r0_unchecked(n))
    }

    #[inline]
    pub(crate) fn r0_unchecked(&self, n: f64) -> f64 {
        self.c_d + self.c_n * n + 1.0 / (self.tau_p * n)
    }

    /// d r0 / dn
    #[inline]
    pub(crate) fn r0_prime(&self, n: f64) -> f64 {
        self.c_n - 1.0 / (self.tau_p * n * n)
    }

    /// Full rate coefficient with trap terms weighted by δ.
    pub fn r_delta(&self, n: f64, p: f64, delta: f64) -> Result<f64> {
        if !(n > 0.0) {
            return Err(Error::NonPositive { what: "r_delta electron density", value: n });
        }
        if p < 0.0 || delta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "r_delta",
                reason: format!("need p >= 0 and delta >= 0, got p = {p}, delta = {delta}"),
            });
        }
        let denom = self.srh_denominator(n, p, delta);
        if !(denom > 0.0) {
            return Err(Error::NonPositive { what: "r_delta denominator", value: denom });
        }
        Ok(self.c_d + self.c_n * n + self.c_p * p + 1.0 / denom)
    }

    #[inline]
    pub(crate) fn srh_denominator(&self, n: f64, p: f64, delta: f64) -> f64 {
        self.tau_p * (n + delta * self.n_t) + self.tau_n * (p + delta * self.p_t)
    }

    /// (r, ∂r/∂n, ∂r/∂p) without argument checks.
    #[inline]
    pub(crate) fn r_delta_with_grad(&self, n: f64, p: f64, delta: f64) -> (f64, f64, f64) {
        let d = self.srh_denominator(n, p, delta);
        let inv = 1.0 / d;
        (
            self.c_d + self.c_n * n + self.c_p * p + inv,
            self.c_n - self.tau_p * inv * inv,
            self.c_p - self.tau_n * inv * inv,
        )
    }
}

/// Scaled model constants shared by every solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub lambda: f64,
    pub delta: f64,
    /// Gauge potential φ̂₀.
    pub phi0: f64,
    pub mu_n: f64,
    pub mu_p: f64,
    pub recombination: Recombination,
    /// Scaled circuit resistance 𝓡̂.
    pub resistance: f64,
}

impl ModelParams {
    /// Unit-order constants for experiments in the scaled system.
    pub fn unit() -> Self {
        ModelParams {
            lambda: 1e-2,
            delta: 1e-3,
            phi0: 0.0,
            mu_n: 1.0,
            mu_p: 1.0,
            recombination: Recombination {
                c_d: 1.0,
                c_n: 1.0,
                c_p: 1.0,
                tau_n: 1.0,
                tau_p: 1.0,
                n_t: 1.0,
                p_t: 1.0,
            },
            resistance: 1.0,
        }
    }

    /// Electron density at a contact where the doping is `c`: the
    /// electroneutral root ½(C + sqrt(C² + 4δ²)), or `c` itself at δ = 0.
    pub fn contact_density(&self, c: f64, delta: f64) -> f64 {
        if delta == 0.0 {
            c
        } else {
            0.5 * (c + (c * c + 4.0 * delta * delta).sqrt())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DopingProfile {
    Constant {
        level: f64,
    },
    /// mean · (1 + amplitude · sin(2π s / period)) along `axis`.
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        period: f64,
        axis: usize,
    },
    /// One value per cell.
    Tabulated {
        values: Vec<f64>,
    },
}

impl DopingProfile {
    /// Sinusoidal profile normalized so that its supremum is 1.
    pub fn sinusoidal_normalized(amplitude: f64, period: f64, axis: usize) -> Self {
        DopingProfile::Sinusoidal {
            mean: 1.0 / (1.0 + amplitude.abs()),
            amplitude,
            period,
            axis,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidParameter { name: "doping", reason });
        match self {
            DopingProfile::Constant { level } if !(level.is_finite() && *level > 0.0) => {
                bad(format!("level must be positive, got {level}"))
            }
            DopingProfile::Sinusoidal { mean, amplitude, period, axis } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    bad(format!("mean must be positive, got {mean}"))
                } else if !(amplitude.abs() < 1.0) {
                    bad(format!("|amplitude| must be < 1 for positive doping, got {amplitude}"))
                } else if !(period.is_finite() && *period > 0.0) {
                    bad(format!("period must be positive, got {period}"))
                } else if *axis >= grid.dim() {
                    bad(format!("axis {axis} not present in a {}D grid", grid.dim()))
                } else {
                    Ok(())
                }
            }
            DopingProfile::Tabulated { values } => {
                if values.len() != grid.cell_count() {
                    Err(Error::FieldMismatch {
                        expected: grid.cell_count(),
                        got: values.len(),
                    })
                } else if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    bad(format!("tabulated values must be positive, found {v}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn analytic(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            DopingProfile::Constant { level } => Some(*level),
            DopingProfile::Sinusoidal { mean, amplitude, period, axis } => {
                let s = if *axis == 0 { x } else { y };
                Some(mean * (1.0 + amplitude * (2.0 * PI * s / period).sin()))
            }
            DopingProfile::Tabulated { .. } => None,
        }
    }

    pub fn field(&self, grid: &Arc<Grid>) -> Result<Field> {
        self.validate(grid)?;
        match self {
            DopingProfile::Tabulated { values } => Field::new(grid.clone(), values.clone()),
            _ => Ok(Field::from_fn(grid.clone(), |x, y| self.analytic(x, y).unwrap())),
        }
    }

    /// Doping seen by a boundary face: exact for analytic profiles, the
    /// adjacent cell value for tabulated ones.
    pub fn at_face(&self, face: &Face) -> f64 {
        match self {
            DopingProfile::Tabulated { values } => values[face.inner],
            _ => self.analytic(face.center[0], face.center[1]).unwrap(),
        }
    }
}

/// Scaled laser description; the beam enters through the `y = 0` surface in 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserSpec {
    /// κ̂; zero means the laser is off.
    pub amplitude: f64,
    pub spot_radius: f64,
    pub penetration_depth: f64,
    pub position: f64,
}

impl LaserSpec {
    pub fn dark() -> Self {
        LaserSpec {
            amplitude: 0.0,
            spot_radius: 1.0,
            penetration_depth: 1.0,
            position: 0.5,
        }
    }

    pub fn at(self, position: f64) -> Self {
        LaserSpec { position, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, v: f64| Error::InvalidParameter {
            name,
            reason: format!("must be finite and positive, got {v}"),
        };
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "laser.amplitude",
                reason: format!("must be >= 0, got {}", self.amplitude),
            });
        }
        if !(self.spot_radius.is_finite() && self.spot_radius > 0.0) {
            return Err(bad("laser.spot_radius", self.spot_radius));
        }
        if !(self.penetration_depth.is_finite() && self.penetration_depth > 0.0) {
            return Err(bad("laser.penetration_depth", self.penetration_depth));
        }
        if !self.position.is_finite() {
            return Err(bad("laser.position", self.position));
        }
        Ok(())
    }

    /// Beam profile normalized to unit integral in the grid's dimension.
    pub fn shape(&self, dim: usize, x: f64, y: f64) -> f64 {
        let s = self.spot_radius;
        let dx = x - self.position;
        let gauss = (-0.5 * dx * dx / (s * s)).exp() / ((2.0 * PI).sqrt() * s);
        if dim == 1 {
            gauss
        } else {
            gauss * (-y / self.penetration_depth).exp() / self.penetration_depth
        }
    }
}

/// κ̂ · S(x − x₀) at cell centers.
pub fn generation(grid: &Arc<Grid>, laser: &LaserSpec) -> Result<Field> {
    laser.validate()?;
    if laser.amplitude == 0.0 {
        return Ok(Field::constant(grid.clone(), 0.0));
    }
    let dim = grid.dim();
    Ok(Field::from_fn(grid.clone(), |x, y| laser.amplitude * laser.shape(dim, x, y)))
}

fn checked_exp(e: f64) -> Result<f64> {
    if e.abs() > 700.0 || !e.is_finite() {
        Err(Error::Overflow(e))
    } else {
        Ok(e.exp())
    }
}

/// n = exp(ψ − φ_n), p = δ² exp(φ_p − ψ).
pub fn carrier_densities(psi: &Field, phi_n: &Field, phi_p: &Field, delta: f64) -> Result<(Field, Field)> {
    if !(psi.same_grid(phi_n) && psi.same_grid(phi_p)) {
        return Err(Error::InvalidGrid("carrier densities need fields on one grid".into()));
    }
    let grid = psi.grid().clone();
    let mut n = Vec::with_capacity(grid.cell_count());
    let mut p = Vec::with_capacity(grid.cell_count());
    for ((&s, &fn_), &fp) in psi.values().iter().zip(phi_n.values()).zip(phi_p.values()) {
        n.push(checked_exp(s - fn_)?);
        p.push(delta * delta * checked_exp(fp - s)?);
    }
    Ok((Field::from_vec(grid.clone(), n), Field::from_vec(grid, p)))
}
