//! The decoupled reduced model: the order-0 potential and hole problems, the
//! auxiliary w-problem, the order-2 electron problem with its closed-form
//! contact voltage, and the order-2 Poisson correction.
//!
//! The laser-independent part (ψ⁽⁰⁾, n⁽⁰⁾, w and the factorized linear
//! operators) lives in [`Equilibrium`] so a scan pays for it once.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use log::info;

use crate::error::{Error, Result, Stage};
use crate::linalg::DirectSolver;
use crate::mesh::{BoundaryTag, Field, Grid};
use crate::operators::{ContinuityProblem, PoissonProblem};
use crate::physics::{generation, DopingProfile, LaserSpec, ModelParams};
use crate::solver::{
    assemble_diffusion, bilinear_form, check_bounds, contact_flux, contact_values, exp_face_coefficients,
    factorize, newton_solve, BoundsReport, EllipticProblem, NewtonReport, NewtonSettings,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeSettings {
    pub newton: NewtonSettings,
    /// Slack for the analytic bound checks, scaled units.
    pub slack: f64,
    /// Contact density ½(C + √(C² + 4δ²)) when true, C when false.
    pub exact_contact_density: bool,
}

impl Default for CascadeSettings {
    fn default() -> Self {
        CascadeSettings {
            newton: NewtonSettings::default(),
            slack: 1e-8,
            exact_contact_density: true,
        }
    }
}

/// ψ⁽⁰⁾ with its contact data.
#[derive(Debug, Clone)]
pub struct Psi0 {
    pub field: Field,
    /// ψ₀ per face (meaningful on contact faces).
    pub boundary: Vec<f64>,
    pub report: NewtonReport,
}

/// Contact potential ψ₀ = φ₀ + ln n̂₀(C) on every boundary face.
pub fn psi0_boundary(grid: &Grid, params: &ModelParams, doping: &DopingProfile, exact: bool) -> Vec<f64> {
    let delta = if exact { params.delta } else { 0.0 };
    grid.faces()
        .iter()
        .map(|f| params.phi0 + params.contact_density(doping.at_face(f), delta).ln())
        .collect()
}

/// −λ²Δψ⁽⁰⁾ = C − e^{ψ⁽⁰⁾−φ₀}, started from the electroneutral field φ₀ + ln C.
pub fn solve_psi0(grid: &Arc<Grid>, params: &ModelParams, doping: &DopingProfile, settings: &CascadeSettings) -> Result<Psi0> {
    let c = doping.field(grid)?;
    let boundary = psi0_boundary(grid, params, doping, settings.exact_contact_density);
    let phi0 = params.phi0;
    let cv = c.values().to_vec();
    let problem = PoissonProblem {
        grid,
        lambda2: params.lambda * params.lambda,
        boundary: &boundary,
        source: Box::new(move |i, psi| {
            let n = (psi - phi0).exp();
            (cv[i] - n, -n)
        }),
        label: "psi0",
    };
    let guess: Vec<f64> = c.values().iter().map(|v| phi0 + v.ln()).collect();
    let (u, report) = newton_solve(&problem, guess, &settings.newton).map_err(|e| e.at(Stage::Psi0))?;
    drop(problem);
    Ok(Psi0 {
        field: Field::new(grid.clone(), u).map_err(|e| e.at(Stage::Psi0))?,
        boundary,
        report,
    })
}

/// Leading-order recombination coefficient r₀(n⁽⁰⁾) per cell.
fn r0_cells(params: &ModelParams, psi0: &Field) -> Vec<f64> {
    psi0.values()
        .iter()
        .map(|&s| params.recombination.r0_unchecked((s - params.phi0).exp()))
        .collect()
}

/// −∇·(μ_p e^{φₚ−ψ⁽⁰⁾}∇φₚ) = G − r₀(n⁽⁰⁾)(e^{φₚ−φ₀} − 1), φₚ = φ₀ on contacts.
///
/// Strong injection that defeats a direct Newton solve falls back to
/// continuation in the generation amplitude.
pub fn solve_phip0(psi0: &Psi0, params: &ModelParams, gen: &Field, settings: &NewtonSettings) -> Result<(Field, NewtonReport)> {
    let grid = psi0.field.grid();
    let phi0 = params.phi0;
    let r0 = r0_cells(params, &psi0.field);
    let offset: Vec<f64> = psi0.field.values().iter().map(|v| -v).collect();
    let boundary = vec![phi0; grid.faces().len()];
    let bexp: Vec<f64> = psi0.boundary.iter().map(|b| phi0 - b).collect();
    let attempt = |theta: f64, guess: Vec<f64>| {
        let problem = ContinuityProblem {
            grid,
            mobility: params.mu_p,
            sign: 1.0,
            offset: &offset,
            boundary: &boundary,
            boundary_exponent: &bexp,
            source: Box::new(|i, u| {
                let d = u - phi0;
                (theta * gen.values()[i] - r0[i] * d.exp_m1(), -r0[i] * d.exp())
            }),
            label: "phip0",
        };
        newton_solve(&problem, guess, settings)
    };
    let first = attempt(1.0, vec![phi0; grid.cell_count()]);
    let (u, report) = match first {
        Ok(v) => v,
        Err(Error::NoConvergence { .. }) => continuation(&attempt, grid.cell_count(), phi0).map_err(|e| e.at(Stage::Phip0))?,
        Err(e) => return Err(e.at(Stage::Phip0)),
    };
    Ok((Field::new(grid.clone(), u).map_err(|e| e.at(Stage::Phip0))?, report))
}

/// Walks θ from 0 to 1 in log steps, refining a step whenever Newton fails.
fn continuation<F>(attempt: &F, n: usize, phi0: f64) -> Result<(Vec<f64>, NewtonReport)>
where
    F: Fn(f64, Vec<f64>) -> Result<(Vec<f64>, NewtonReport)>,
{
    let mut u = vec![phi0; n];
    let mut log_theta = -12.0f64;
    let mut step = 1.0f64;
    let mut total = 0;
    let mut last_err = None;
    while step >= 1.0 / 64.0 {
        let target = (log_theta + step).min(0.0);
        match attempt(10f64.powf(target), u.clone()) {
            Ok((v, rep)) => {
                total += rep.iterations;
                u = v;
                log_theta = target;
                if target == 0.0 {
                    return Ok((u, NewtonReport { iterations: total, ..rep }));
                }
                step = (step * 2.0).min(2.0);
            }
            Err(e) => {
                last_err = Some(e);
                step /= 2.0;
            }
        }
    }
    Err(last_err.expect("continuation made at least one attempt"))
}

/// Face coefficients μ_n n⁽⁰⁾ of the electron operator.
pub fn electron_coefficients(psi0: &Psi0, params: &ModelParams) -> Vec<f64> {
    let grid = psi0.field.grid();
    let s: Vec<f64> = psi0.field.values().iter().map(|v| v - params.phi0).collect();
    exp_face_coefficients(grid, &s, params.mu_n, |k| psi0.boundary[k] - params.phi0)
}

/// Face coefficients μ_p p⁽⁰⁾ of the hole operator at φₚ⁽⁰⁾.
pub fn hole_coefficients(psi0: &Psi0, phip0: &Field, params: &ModelParams) -> Vec<f64> {
    let grid = psi0.field.grid();
    let s: Vec<f64> = phip0.values().iter().zip(psi0.field.values()).map(|(a, b)| a - b).collect();
    exp_face_coefficients(grid, &s, params.mu_p, |k| params.phi0 - psi0.boundary[k])
}

/// −∇·(μ_n n⁽⁰⁾∇w) = 0 with w = 0 on Γ_D1 and 1 on Γ_D2.
pub fn solve_w(grid: &Arc<Grid>, n_coeff: &[f64]) -> Result<Field> {
    let p = EllipticProblem::new(grid.clone(), n_coeff.to_vec(), vec![0.0; grid.cell_count()], (0.0, 1.0));
    crate::solver::solve_elliptic(&p).map_err(|e| e.at(Stage::W))
}

/// Right-hand side r₀(n⁽⁰⁾)(n⁽⁰⁾p⁽⁰⁾ − 1) − G of the φₙ* problem.
pub fn phin_star_source(psi0: &Field, phip0: &Field, gen: &Field, params: &ModelParams) -> Vec<f64> {
    let r0 = r0_cells(params, psi0);
    (0..r0.len())
        .map(|i| r0[i] * (phip0.values()[i] - params.phi0).exp_m1() - gen.values()[i])
        .collect()
}

/// −∇·(μ_n n⁽⁰⁾∇φₙ*) = r₀(n⁽⁰⁾p⁽⁰⁾ − 1) − G with zero contact data.
pub fn solve_phin_star(grid: &Arc<Grid>, n_coeff: &[f64], source: Vec<f64>) -> Result<Field> {
    let p = EllipticProblem::new(grid.clone(), n_coeff.to_vec(), source, (0.0, 0.0));
    crate::solver::solve_elliptic(&p).map_err(|e| e.at(Stage::PhinStar))
}

/// Closed-form order-2 contact voltage
/// u = −𝓡̂ [B_n(φₙ*, w) + B_p(φₚ⁽⁰⁾, w)] / (1 + 𝓡̂ B_n(w, w)).
#[allow(clippy::too_many_arguments)]
pub fn compute_ud2(
    grid: &Grid,
    n_coeff: &[f64],
    p_coeff: &[f64],
    phin_star: &Field,
    phip0: &Field,
    phi0: f64,
    w: &Field,
    resistance: f64,
) -> f64 {
    let zero = vec![0.0; grid.faces().len()];
    let wb = contact_values(grid, 0.0, 1.0);
    let phi0_b = vec![phi0; grid.faces().len()];
    let num = bilinear_form(grid, n_coeff, phin_star.values(), &zero, w.values(), &wb)
        + bilinear_form(grid, p_coeff, phip0.values(), &phi0_b, w.values(), &wb);
    let den = 1.0 + resistance * bilinear_form(grid, n_coeff, w.values(), &wb, w.values(), &wb);
    -resistance * num / den
}

/// φₙ⁽²⁾ = φₙ* + u_D⁽²⁾ w.
pub fn solve_phin2(phin_star: &Field, w: &Field, ud2: f64) -> Field {
    phin_star.zip_map(w, |a, b| a + ud2 * b)
}

/// −λ²Δψ⁽²⁾ + n⁽⁰⁾ψ⁽²⁾ = p⁽⁰⁾ + n⁽⁰⁾φₙ⁽²⁾ with ψ⁽²⁾ = 0 on Γ_D1 and u_D⁽²⁾ on Γ_D2.
pub fn solve_psi2(params: &ModelParams, n0: &Field, p0: &Field, phin2: &Field, ud2: f64) -> Result<Field> {
    let p = psi2_problem(params, n0, p0, phin2, ud2);
    crate::solver::solve_elliptic(&p).map_err(|e| e.at(Stage::Psi2))
}

fn psi2_problem(params: &ModelParams, n0: &Field, p0: &Field, phin2: &Field, ud2: f64) -> EllipticProblem {
    let grid = n0.grid().clone();
    let rhs: Vec<f64> = (0..grid.cell_count())
        .map(|i| p0.values()[i] + n0.values()[i] * phin2.values()[i])
        .collect();
    EllipticProblem::uniform(grid, params.lambda * params.lambda, rhs, (0.0, ud2)).with_reaction(n0.values().to_vec())
}

/// Discrete H¹ norm: √(Σ V u² + Σ_f T (Δu)²), boundary faces against `u_b`.
pub fn h1_norm(grid: &Grid, u: &[f64], u_b: &[f64]) -> f64 {
    let ones = vec![1.0; grid.faces().len()];
    let l2: f64 = grid.volumes().iter().zip(u).map(|(v, x)| v * x * x).sum();
    (l2 + bilinear_form(grid, &ones, u, u_b, u, u_b)).sqrt()
}

/// Analytic constants entering the bounds of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub psi0_lower: f64,
    pub psi0_upper: f64,
    pub r_lower: f64,
    pub r_upper: f64,
    pub g_max: f64,
}

impl BoundConstants {
    pub fn new(params: &ModelParams, c_min: f64, c_max: f64, psi0_b: &[f64], grid: &Grid, g_max: f64) -> Self {
        let contact = grid
            .faces()
            .iter()
            .zip(psi0_b)
            .filter(|(f, _)| matches!(f.tag, Some(BoundaryTag::Contact1 | BoundaryTag::Contact2)))
            .map(|(_, &b)| b);
        let (bmin, bmax) = contact.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let phi0 = params.phi0;
        let psi0_lower = bmin.min(phi0 + c_min.ln());
        let psi0_upper = bmax.max(phi0 + c_max.ln());
        let rc = &params.recombination;
        let r_lower = rc.c_d + rc.c_n * (psi0_lower - phi0).exp() + (phi0 - psi0_upper).exp() / rc.tau_p;
        let r_upper = rc.c_d + rc.c_n * (psi0_upper - phi0).exp() + (phi0 - psi0_lower).exp() / rc.tau_p;
        BoundConstants { psi0_lower, psi0_upper, r_lower, r_upper, g_max }
    }

    pub fn phip0(&self, phi0: f64) -> (f64, f64) {
        (
            phi0 + (self.r_lower / self.r_upper).ln(),
            phi0 + ((self.r_upper + self.g_max) / self.r_lower).ln(),
        )
    }

    pub fn phin_star(&self) -> (f64, f64) {
        (0f64.min(self.r_lower - self.g_max), self.r_upper)
    }
}

/// Laser-independent state shared by every point of a scan.
pub struct Equilibrium {
    pub grid: Arc<Grid>,
    pub params: ModelParams,
    pub settings: CascadeSettings,
    pub doping: Field,
    pub psi0: Psi0,
    pub n0: Field,
    pub w: Field,
    pub n_coeff: Vec<f64>,
    n_solver: DirectSolver,
    psi2_solver: DirectSolver,
    psi2_matrix_diag_load: Vec<f64>,
    bww: f64,
    w_h1: f64,
    n_coeff_max: f64,
    c_min: f64,
    c_max: f64,
}

impl Equilibrium {
    pub fn new(grid: &Arc<Grid>, params: &ModelParams, doping: &DopingProfile, settings: &CascadeSettings) -> Result<Self> {
        validate_params(params)?;
        let c = doping.field(grid)?;
        let psi0 = solve_psi0(grid, params, doping, settings)?;
        info!(
            "stage=psi0 iterations={} residual={:.3e}",
            psi0.report.iterations, psi0.report.residual
        );
        let n0 = psi0.field.map(|v| (v - params.phi0).exp());
        let n_coeff = electron_coefficients(&psi0, params);
        let nc = grid.cell_count();
        let (an, _) = assemble_diffusion(&EllipticProblem::new(grid.clone(), n_coeff.clone(), vec![0.0; nc], (0.0, 0.0)))
            .map_err(|e| e.at(Stage::W))?;
        let n_solver = factorize(grid, &an).map_err(|e| e.at(Stage::W))?;
        let w = solve_w(grid, &n_coeff)?;
        let wb = contact_values(grid, 0.0, 1.0);
        let bww = bilinear_form(grid, &n_coeff, w.values(), &wb, w.values(), &wb);

        // ψ⁽²⁾ operator: only the Γ_D2 datum and the right-hand side change per laser position
        let unit = EllipticProblem::uniform(grid.clone(), params.lambda * params.lambda, vec![0.0; nc], (0.0, 1.0))
            .with_reaction(n0.values().to_vec());
        let (a2, load_unit) = assemble_diffusion(&unit).map_err(|e| e.at(Stage::Psi2))?;
        let psi2_solver = factorize(grid, &a2).map_err(|e| e.at(Stage::Psi2))?;

        let n_b_max = grid
            .faces()
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f.tag, Some(BoundaryTag::Contact1 | BoundaryTag::Contact2)))
            .map(|(k, _)| (psi0.boundary[k] - params.phi0).exp())
            .fold(n0.max(), f64::max);
        Ok(Equilibrium {
            grid: grid.clone(),
            params: *params,
            settings: *settings,
            c_min: c.min(),
            c_max: c.max(),
            doping: c,
            w_h1: h1_norm(grid, w.values(), &wb),
            n_coeff_max: params.mu_n * n_b_max,
            psi0,
            n0,
            w,
            n_coeff,
            n_solver,
            psi2_solver,
            psi2_matrix_diag_load: load_unit,
            bww,
        })
    }

    /// B_n(w, w) = ∫ μ_n n⁽⁰⁾ |∇w|².
    pub fn w_energy(&self) -> f64 {
        self.bww
    }

    pub fn solve(&self, laser: &LaserSpec) -> Result<AsymptoticSolution> {
        let gen = generation(&self.grid, laser)?;
        self.solve_with_generation(&gen)
    }

    pub fn solve_with_generation(&self, gen: &Field) -> Result<AsymptoticSolution> {
        let grid = &self.grid;
        let params = &self.params;
        let phi0 = params.phi0;
        let nc = grid.cell_count();
        let nf = grid.faces().len();
        let vol = grid.volumes();

        let (phip0, phip0_report) = solve_phip0(&self.psi0, params, gen, &self.settings.newton)?;
        let p0 = phip0.zip_map(&self.psi0.field, |a, b| (a - b).exp());
        let p_coeff = hole_coefficients(&self.psi0, &phip0, params);

        let source = phin_star_source(&self.psi0.field, &phip0, gen, params);
        let load: Vec<f64> = source.iter().zip(vol).map(|(s, v)| s * v).collect();
        let phin_star = Field::new(grid.clone(), self.n_solver.solve(&load)).map_err(|e| e.at(Stage::PhinStar))?;

        let ud2 = compute_ud2(grid, &self.n_coeff, &p_coeff, &phin_star, &phip0, phi0, &self.w, params.resistance);
        let phin2 = solve_phin2(&phin_star, &self.w, ud2);

        let rhs: Vec<f64> = (0..nc)
            .map(|i| vol[i] * (p0.values()[i] + self.n0.values()[i] * phin2.values()[i]) + ud2 * self.psi2_matrix_diag_load[i])
            .collect();
        let psi2 = Field::new(grid.clone(), self.psi2_solver.solve(&rhs)).map_err(|e| e.at(Stage::Psi2))?;
        let n2 = Field::from_vec(
            grid.clone(),
            (0..nc).map(|i| self.n0.values()[i] * (psi2.values()[i] - phin2.values()[i])).collect(),
        );

        // certificates: coupled residual and the contact-flux form of u_D⁽²⁾
        let phin2_b = contact_values(grid, 0.0, ud2);
        let phi0_b = vec![phi0; nf];
        let electron_residual = {
            let p = EllipticProblem::new(grid.clone(), self.n_coeff.clone(), source, (0.0, ud2));
            let (a, b) = assemble_diffusion(&p)?;
            let ax = a.mul_vec(phin2.values());
            (0..nc).map(|i| ((ax[i] - b[i]) / vol[i]).abs()).fold(0.0, f64::max)
        };
        let i_d2 = contact_flux(grid, &self.n_coeff, phin2.values(), &phin2_b, BoundaryTag::Contact2)
            + contact_flux(grid, &p_coeff, phip0.values(), &phi0_b, BoundaryTag::Contact2);
        let ud2_flux = params.resistance * i_d2;

        // bounds
        let g_max = gen.max().max(0.0);
        let k = BoundConstants::new(params, self.c_min, self.c_max, &self.psi0.boundary, grid, g_max);
        let slack = self.settings.slack;
        let p_b_max = grid
            .faces()
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f.tag, Some(BoundaryTag::Contact1 | BoundaryTag::Contact2)))
            .map(|(k, _)| (phi0 - self.psi0.boundary[k]).exp())
            .fold(p0.max(), f64::max);
        let ud_bound = params.resistance
            * (self.n_coeff_max * h1_norm(grid, phin_star.values(), &contact_values(grid, 0.0, 0.0))
                + params.mu_p * p_b_max * h1_norm(grid, phip0.values(), &phi0_b))
            * self.w_h1;
        let ratio = p0.zip_map(&self.n0, |p, n| p / n);
        let (pl, pu) = k.phip0(phi0);
        let (sl, su) = k.phin_star();
        let bounds = vec![
            check_bounds("psi0", self.psi0.field.values(), k.psi0_lower, k.psi0_upper, slack),
            check_bounds("phip0", phip0.values(), pl, pu, slack),
            check_bounds("w", self.w.values(), 0.0, 1.0, slack),
            check_bounds("phin2", phin2.values(), sl - ud_bound, su + ud_bound, slack),
            check_bounds("ud2", &[ud2], -ud_bound, ud_bound, slack),
            check_bounds(
                "psi2",
                psi2.values(),
                (-ud_bound).min(ratio.min()) + sl - ud_bound,
                ud_bound.max(ratio.max()) + su + ud_bound,
                slack,
            ),
        ];
        let diagnostics = vec![check_bounds("phin_star", phin_star.values(), sl, su, slack)];
        Ok(AsymptoticSolution {
            delta: params.delta,
            phi0,
            psi0: self.psi0.field.clone(),
            phip0,
            w: self.w.clone(),
            phin_star,
            phin2,
            psi2,
            ud2,
            ud2_flux,
            ud_bound,
            n0: self.n0.clone(),
            p0,
            n2,
            bounds,
            diagnostics,
            psi0_report: self.psi0.report.clone(),
            phip0_report,
            coupled_residual: electron_residual.max((ud2 - ud2_flux).abs()),
        })
    }
}

fn validate_params(p: &ModelParams) -> Result<()> {
    let positive = [
        ("lambda", p.lambda),
        ("mu_n", p.mu_n),
        ("mu_p", p.mu_p),
        ("tau_p", p.recombination.tau_p),
    ];
    for (name, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") });
        }
    }
    let nonneg = [
        ("delta", p.delta),
        ("resistance", p.resistance),
        ("c_d", p.recombination.c_d),
        ("c_n", p.recombination.c_n),
        ("c_p", p.recombination.c_p),
        ("tau_n", p.recombination.tau_n),
        ("n_t", p.recombination.n_t),
        ("p_t", p.recombination.p_t),
    ];
    for (name, v) in nonneg {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter { name, reason: format!("must be >= 0, got {v}") });
        }
    }
    if !p.phi0.is_finite() {
        return Err(Error::InvalidParameter { name: "phi0", reason: "must be finite".into() });
    }
    Ok(())
}

/// Result of one pass through the reduced model.
#[derive(Debug, Clone)]
pub struct AsymptoticSolution {
    pub delta: f64,
    pub phi0: f64,
    pub psi0: Field,
    pub phip0: Field,
    pub w: Field,
    pub phin_star: Field,
    pub phin2: Field,
    pub psi2: Field,
    pub ud2: f64,
    /// 𝓡̂ times the discrete Γ_D2 flux of the order-2 current.
    pub ud2_flux: f64,
    /// ū_D
    pub ud_bound: f64,
    pub n0: Field,
    pub p0: Field,
    pub n2: Field,
    pub bounds: Vec<BoundsReport>,
    /// Checked and reported but not part of [`bounds_ok`](Self::bounds_ok):
    /// the φₙ* interval fails whenever 0 < Ḡ < r̲ and the laser is localized.
    pub diagnostics: Vec<BoundsReport>,
    pub psi0_report: NewtonReport,
    pub phip0_report: NewtonReport,
    /// Max of the φₙ⁽²⁾ equation residual and |u_D⁽²⁾ − 𝓡̂ i_D⁽²⁾|.
    pub coupled_residual: f64,
}

impl AsymptoticSolution {
    /// ψ⁽⁰⁾ + δ²ψ⁽²⁾
    pub fn psi(&self) -> Field {
        let d2 = self.delta * self.delta;
        self.psi0.zip_map(&self.psi2, |a, b| a + d2 * b)
    }

    /// φ₀ + δ²φₙ⁽²⁾
    pub fn phi_n(&self) -> Field {
        let d2 = self.delta * self.delta;
        self.phin2.map(|v| self.phi0 + d2 * v)
    }

    pub fn phi_p(&self) -> Field {
        self.phip0.clone()
    }

    /// δ²u_D⁽²⁾
    pub fn u_d(&self) -> f64 {
        self.delta * self.delta * self.ud2
    }

    /// n⁽⁰⁾ + δ²n⁽²⁾
    pub fn n(&self) -> Field {
        let d2 = self.delta * self.delta;
        self.n0.zip_map(&self.n2, |a, b| a + d2 * b)
    }

    pub fn bounds_ok(&self) -> bool {
        self.bounds.iter().all(|b| b.pass)
    }

    pub fn bound(&self, name: &str) -> Option<&BoundsReport> {
        self.bounds.iter().chain(&self.diagnostics).find(|b| b.name == name)
    }

    /// One dump file per stage plus `bounds.txt` in `dir`.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let fields = [
            ("psi0", &self.psi0),
            ("phip0", &self.phip0),
            ("w", &self.w),
            ("phin_star", &self.phin_star),
            ("phin2", &self.phin2),
            ("psi2", &self.psi2),
            ("n0", &self.n0),
            ("p0", &self.p0),
            ("n2", &self.n2),
        ];
        for (name, f) in fields {
            let file = std::fs::File::create(dir.join(format!("{name}.dat")))?;
            f.dump(std::io::BufWriter::new(file))?;
        }
        let mut out = std::fs::File::create(dir.join("bounds.txt"))?;
        writeln!(out, "ud2={:.17e} ud2_bound={:.17e}", self.ud2, self.ud_bound)?;
        for b in &self.bounds {
            writeln!(out, "{b}")?;
        }
        for b in &self.diagnostics {
            writeln!(out, "diagnostic {b}")?;
        }
        Ok(())
    }
}

/// Executes the full cascade for one laser configuration.
pub fn run_cascade(
    grid: &Arc<Grid>,
    params: &ModelParams,
    doping: &DopingProfile,
    laser: &LaserSpec,
    settings: &CascadeSettings,
) -> Result<AsymptoticSolution> {
    Equilibrium::new(grid, params, doping, settings)?.solve(laser)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, GridSpec};
    use crate::solver::solve_elliptic;

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&GridSpec::line(n)).unwrap())
    }

    fn sinus() -> DopingProfile {
        DopingProfile::Sinusoidal { mean: 1.0, amplitude: 0.2, period: 0.25, axis: 0 }
    }

    fn laser(x0: f64) -> LaserSpec {
        LaserSpec { amplitude: 5.0, spot_radius: 0.03, penetration_depth: 0.05, position: x0 }
    }

    #[test]
    fn psi0_constant_doping_is_flat() {
        let mut p = ModelParams::unit();
        p.phi0 = 0.4;
        let s = CascadeSettings { exact_contact_density: false, ..Default::default() };
        let psi0 = solve_psi0(&line(50), &p, &DopingProfile::Constant { level: 1.0 }, &s).unwrap();
        assert!(psi0.field.values().iter().all(|v| (v - 0.4).abs() <= 1e-10));
    }

    #[test]
    fn psi0_within_doping_range() {
        let p = ModelParams::unit();
        let s = CascadeSettings { exact_contact_density: false, ..Default::default() };
        let d = DopingProfile::Sinusoidal { mean: 1.0, amplitude: 0.2, period: 0.3, axis: 0 };
        let psi0 = solve_psi0(&line(200), &p, &d, &s).unwrap();
        assert!(psi0.field.min() >= 0.8f64.ln() - 1e-8);
        assert!(psi0.field.max() <= 1.2f64.ln() + 1e-8);
    }

    #[test]
    fn psi0_large_lambda_approaches_harmonic() {
        let mut p = ModelParams::unit();
        p.lambda = 1e3;
        let g = line(100);
        let d = DopingProfile::Sinusoidal { mean: 0.75, amplitude: 0.3, period: 0.7, axis: 0 };
        let psi0 = solve_psi0(&g, &p, &d, &CascadeSettings::default()).unwrap();
        let b1 = psi0.boundary[g.boundary_faces(BoundaryTag::Contact1).next().unwrap().0];
        let b2 = psi0.boundary[g.boundary_faces(BoundaryTag::Contact2).next().unwrap().0];
        let harmonic = solve_elliptic(&EllipticProblem::uniform(g.clone(), 1.0, vec![0.0; 100], (b1, b2))).unwrap();
        assert!(psi0.field.max_abs_diff(&harmonic) < 1e-3);
    }

    #[test]
    fn quadratic_tail_of_psi0_newton() {
        let mut p = ModelParams::unit();
        p.lambda = 0.05;
        let d = DopingProfile::Sinusoidal { mean: 0.6, amplitude: 0.5, period: 0.2, axis: 0 };
        let psi0 = solve_psi0(&line(400), &p, &d, &CascadeSettings::default()).unwrap();
        let h: Vec<f64> = psi0.report.history.iter().copied().filter(|v| *v > 1e-14).collect();
        assert!(h.len() >= 3, "{h:?}");
        let tail = &h[h.len() - 3..];
        for w in tail.windows(2) {
            assert!(w[1] <= 10.0 * w[0] * w[0] + 1e-13, "{h:?}");
        }
    }

    #[test]
    fn dark_case_is_trivial() {
        let g = line(200);
        let p = ModelParams::unit();
        let sol = run_cascade(&g, &p, &sinus(), &LaserSpec::dark(), &CascadeSettings::default()).unwrap();
        assert!(sol.phip0.values().iter().all(|&v| (v - p.phi0).abs() <= 1e-10));
        assert!(sol.phin_star.values().iter().all(|&v| v.abs() <= 1e-10));
        assert!(sol.ud2.abs() <= 1e-10);
        assert!(sol.u_d().abs() <= 1e-10);
        assert!(sol.phi_n().values().iter().all(|&v| (v - p.phi0).abs() <= 1e-12));
        assert!(sol.bounds_ok(), "{:#?}", sol.bounds);
        // dark ψ⁽²⁾ is driven by p⁽⁰⁾ > 0 alone and stays positive
        assert!(sol.psi2.min() > 0.0);
    }

    #[test]
    fn w_examples() {
        let g = line(64);
        let w = solve_w(&g, &vec![2.5; g.faces().len()]).unwrap();
        for (c, v) in g.centers().iter().zip(w.values()) {
            assert!((v - c[0]).abs() < 1e-13);
        }
        // two-resistor chain: coefficient 1 on the left half, 2 on the right
        let coeff: Vec<f64> = g.faces().iter().map(|f| if f.center[0] < 0.5 { 1.0 } else if f.center[0] > 0.5 { 2.0 } else { face_mid() }).collect();
        fn face_mid() -> f64 {
            // the midpoint face joins the two halves: series conductance of two half-cells
            2.0 * 1.0 * 2.0 / (1.0 + 2.0)
        }
        let w = solve_w(&g, &coeff).unwrap();
        // interpolate to x = 0.5 between cells 31 and 32 using the right-half slope
        let mid = 0.5 * (w.values()[31] + w.values()[32]);
        let flux = 2.0 * (w.values()[33] - w.values()[32]) * 64.0;
        let interp = w.values()[32] - flux / 2.0 * (0.5 / 64.0);
        assert!((interp - 2.0 / 3.0).abs() < 1e-12, "{interp} {mid}");
        assert!(w.min() >= 0.0 && w.max() <= 1.0);
    }

    #[test]
    fn phin_star_quadratic_profile() {
        let g = line(80);
        let c = 0.7;
        let mu = 1.3;
        let s = solve_phin_star(&g, &vec![mu; g.faces().len()], vec![c; 80]).unwrap();
        for (x, v) in g.centers().iter().zip(s.values()) {
            // the half-cell contact distance adds the constant c h²/(8μ)
            let exact = c * x[0] * (1.0 - x[0]) / (2.0 * mu) + c / (8.0 * mu * 80.0 * 80.0);
            assert!((v - exact).abs() < 1e-12, "{v} {exact}");
        }
    }

    #[test]
    fn psi2_constant_solution() {
        let g = line(30);
        let p = ModelParams::unit();
        let k = 0.37;
        let n0 = Field::from_fn(g.clone(), |x, _| 1.0 + x);
        let p0 = n0.map(|v| v * k);
        let phin2 = Field::constant(g.clone(), 0.0);
        // ψ = k everywhere needs ψ = k on both contacts; shift Γ_D1 data through the operator
        let prob = psi2_problem(&p, &n0, &p0, &phin2, k).with_boundary(contact_values(&g, k, k));
        let psi2 = solve_elliptic(&prob).unwrap();
        assert!(psi2.values().iter().all(|v| (v - k).abs() < 1e-12));
    }

    #[test]
    fn ud2_formula_limits() {
        let g = line(100);
        let p = ModelParams::unit();
        let eq = Equilibrium::new(&g, &p, &sinus(), &CascadeSettings::default()).unwrap();
        let gen = generation(&g, &laser(0.3)).unwrap();
        let (phip0, _) = solve_phip0(&eq.psi0, &p, &gen, &NewtonSettings::default()).unwrap();
        let pc = hole_coefficients(&eq.psi0, &phip0, &p);
        let star = solve_phin_star(&g, &eq.n_coeff, phin_star_source(&eq.psi0.field, &phip0, &gen, &p)).unwrap();
        let at = |r: f64| compute_ud2(&g, &eq.n_coeff, &pc, &star, &phip0, p.phi0, &eq.w, r);
        assert_eq!(at(0.0), 0.0);
        let wb = contact_values(&g, 0.0, 1.0);
        let num = bilinear_form(&g, &eq.n_coeff, star.values(), &vec![0.0; g.faces().len()], eq.w.values(), &wb)
            + bilinear_form(&g, &pc, phip0.values(), &vec![p.phi0; g.faces().len()], eq.w.values(), &wb);
        let limit = -num / eq.w_energy();
        let errs: Vec<f64> = [1e3, 1e6, 1e9].iter().map(|&r| (at(r) - limit).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] <= 1e-8 * limit.abs());
        // derivative at zero resistance is −numerator
        let h = 1e-7;
        let fd = (at(h) - at(-h)) / (2.0 * h);
        assert!((fd + num).abs() <= 1e-6 * num.abs(), "{fd} {num}");
    }

    #[test]
    fn volume_and_flux_forms_agree() {
        for grid in [line(150), Arc::new(build_grid(&GridSpec::rect(40, 20, 0.5)).unwrap())] {
            let mut p = ModelParams::unit();
            p.resistance = 3.0;
            let s = CascadeSettings {
                newton: NewtonSettings { abs_tol: 1e-12, ..Default::default() },
                ..Default::default()
            };
            let sol = run_cascade(&grid, &p, &sinus(), &laser(0.4), &s).unwrap();
            assert!(sol.ud2.abs() > 1e-6);
            assert!((sol.ud2 - sol.ud2_flux).abs() <= 1e-10, "{} {}", sol.ud2, sol.ud2_flux);
            assert!(sol.coupled_residual <= 1e-10);
            // trace identities
            let last = sol.phin2.values().len() - 1;
            assert!(grid.dim() == 2 || (sol.phin2.values()[last] - sol.ud2 * sol.w.values()[last] - sol.phin_star.values()[last]).abs() < 1e-15);
            for i in 0..sol.n0.values().len() {
                let n2 = sol.n0.values()[i] * (sol.psi2.values()[i] - sol.phin2.values()[i]);
                assert_eq!(n2, sol.n2.values()[i]);
                assert!(((sol.psi0.values()[i] - p.phi0).exp() - sol.n0.values()[i]).abs() < 1e-15 * sol.n0.values()[i]);
            }
        }
    }

    #[test]
    fn gauge_invariance() {
        let g = line(120);
        let mut p = ModelParams::unit();
        p.resistance = 2.0;
        let a = run_cascade(&g, &p, &sinus(), &laser(0.55), &CascadeSettings::default()).unwrap();
        let c = 1.75;
        p.phi0 += c;
        let b = run_cascade(&g, &p, &sinus(), &laser(0.55), &CascadeSettings::default()).unwrap();
        let shifted = |x: &Field, y: &Field| x.values().iter().zip(y.values()).map(|(u, v)| (u + c - v).abs()).fold(0.0, f64::max);
        assert!(shifted(&a.psi0, &b.psi0) <= 1e-10);
        assert!(shifted(&a.phip0, &b.phip0) <= 1e-10);
        for (x, y) in [(&a.n0, &b.n0), (&a.p0, &b.p0), (&a.w, &b.w), (&a.phin_star, &b.phin_star), (&a.phin2, &b.phin2)] {
            assert!(x.max_abs_diff(y) <= 1e-10);
        }
        assert!((a.ud2 - b.ud2).abs() <= 1e-10);
    }

    #[test]
    fn laser_response_is_local() {
        let g = line(300);
        let p = ModelParams::unit();
        let eq = Equilibrium::new(&g, &p, &sinus(), &CascadeSettings::default()).unwrap();
        for x0 in [0.2, 0.5, 0.71] {
            let l = laser(x0);
            let sol = eq.solve(&l).unwrap();
            let v = sol.p0.values();
            let arg = (0..v.len()).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
            assert!((g.centers()[arg][0] - x0).abs() <= 3.0 * l.spot_radius);
            assert!(sol.phip0.min() >= p.phi0 - 1e-8);
            // φₙ* near the spot carries the sign of R⁽⁰⁾ − G there
            let i = g.locate(x0, 0.0);
            let r0 = p.recombination.r0(sol.n0.values()[i]).unwrap();
            let rg = r0 * (sol.n0.values()[i] * v[i] - 1.0) - generation(&g, &l).unwrap().values()[i];
            assert_eq!(sol.phin_star.values()[i].signum(), rg.signum());
        }
    }

    #[test]
    fn phin_star_interval_is_violated_by_weak_localized_light() {
        // 0 < Ḡ < r̲: the interval's lower end is 0, yet φₙ* < 0 under the spot
        let g = line(200);
        let mut p = ModelParams::unit();
        p.resistance = 1e-3;
        let l = LaserSpec { amplitude: 1e-2, ..laser(0.37) };
        let sol = run_cascade(&g, &p, &sinus(), &l, &CascadeSettings::default()).unwrap();
        let d = sol.bound("phin_star").unwrap();
        assert_eq!(d.lower, 0.0);
        assert!(d.observed_min < -1e-3 && !d.pass);
        // φₙ⁽²⁾ only escapes through the ū_D widening when 𝓡̂ is small
        assert!(!sol.bound("phin2").unwrap().pass);
        p.resistance = 1.0;
        let sol = run_cascade(&g, &p, &sinus(), &l, &CascadeSettings::default()).unwrap();
        assert!(sol.bounds_ok());
    }

    #[test]
    fn stage_errors_carry_identity() {
        let g = line(20);
        let p = ModelParams::unit();
        let s = CascadeSettings {
            newton: NewtonSettings { max_iter: 1, ..Default::default() },
            ..Default::default()
        };
        let d = DopingProfile::Sinusoidal { mean: 0.5, amplitude: 0.9, period: 0.3, axis: 0 };
        match run_cascade(&g, &p, &d, &LaserSpec::dark(), &s) {
            Err(Error::Stage { stage: Stage::Psi0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
