//! The full scaled drift-diffusion system at finite δ with the implicit
//! resistor coupling u_D = 𝓡̂ i_D.
//!
//! Gummel sweeps (Poisson, electrons, holes; Newton on each) run inside a
//! secant iteration on the contact voltage. Electrons are carried as
//! v = (φₙ − φ₀)/δ² and the voltage as U = u_D/δ², so every unknown stays
//! of order one however small δ is.

use std::sync::Arc;

use log::{debug, info};

use crate::cascade::{psi0_boundary, run_cascade, AsymptoticSolution, CascadeSettings};
use crate::error::{Error, Result, Stage};
use crate::mesh::{BoundaryTag, Field, Grid};
use crate::operators::{ContinuityProblem, PoissonProblem};
use crate::physics::{generation, DopingProfile, LaserSpec, ModelParams};
use crate::solver::{
    bilinear_form, contact_flux, contact_values, exp_face_coefficients, newton_solve, solve_elliptic, EllipticProblem,
    NewtonSettings,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullSettings {
    pub newton: NewtonSettings,
    /// Max-norm of one Gummel sweep's update (ψ, v, φₚ) at convergence.
    pub gummel_tol: f64,
    pub gummel_max: usize,
    /// Bound on |𝓡̂ i_D − u_D| relative to δ².
    pub coupling_tol: f64,
    pub secant_max: usize,
    pub exact_contact_density: bool,
}

impl Default for FullSettings {
    fn default() -> Self {
        FullSettings {
            newton: NewtonSettings::default(),
            gummel_tol: 1e-11,
            gummel_max: 500,
            coupling_tol: 1e-10,
            secant_max: 30,
            exact_contact_density: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullSolution {
    pub delta: f64,
    pub psi: Field,
    pub phi_n: Field,
    pub phi_p: Field,
    /// (φₙ − φ₀)/δ²
    pub phi_n_scaled: Field,
    pub u_d: f64,
    /// Contact current from the weighted volume identity.
    pub i_d: f64,
    /// Contact current from the Γ_D2 face fluxes.
    pub i_d_flux: f64,
    /// Total current leaving through both contacts.
    pub flux_balance: f64,
    /// |𝓡̂ i_D − u_D|
    pub coupling_residual: f64,
    pub secant_iterations: usize,
    pub gummel_sweeps: Vec<usize>,
}

/// Gummel state: ψ, v = (φₙ − φ₀)/δ², φₚ.
#[derive(Debug, Clone)]
struct State {
    psi: Vec<f64>,
    v: Vec<f64>,
    phip: Vec<f64>,
}

struct Model<'a> {
    grid: &'a Arc<Grid>,
    params: &'a ModelParams,
    settings: &'a FullSettings,
    doping: Vec<f64>,
    gen: Vec<f64>,
    psi_b: Vec<f64>,
    /// unit-coefficient harmonic weight, 0 on Γ_D1 and 1 on Γ_D2
    w: Vec<f64>,
    w_b: Vec<f64>,
}

/// Face data for one contact voltage.
struct Contacts {
    psi: Vec<f64>,
    v: Vec<f64>,
    phip: Vec<f64>,
}

impl Model<'_> {
    fn d2(&self) -> f64 {
        self.params.delta * self.params.delta
    }

    fn contacts(&self, big_u: f64) -> Contacts {
        let u = self.d2() * big_u;
        let on_d2 = |x: f64, y: f64| -> Vec<f64> {
            self.grid
                .faces()
                .iter()
                .map(|f| if f.tag == Some(BoundaryTag::Contact2) { y } else { x })
                .collect()
        };
        let phi0 = self.params.phi0;
        Contacts {
            psi: self
                .grid
                .faces()
                .iter()
                .zip(&self.psi_b)
                .map(|(f, b)| if f.tag == Some(BoundaryTag::Contact2) { b + u } else { *b })
                .collect(),
            v: on_d2(0.0, big_u),
            phip: on_d2(phi0, phi0 + u),
        }
    }

    fn poisson(&self, s: &mut State, c: &Contacts) -> Result<usize> {
        let d2 = self.d2();
        let phi0 = self.params.phi0;
        let (v, phip, dop) = (&s.v, &s.phip, &self.doping);
        let problem = PoissonProblem {
            grid: self.grid,
            lambda2: self.params.lambda * self.params.lambda,
            boundary: &c.psi,
            source: Box::new(move |i, psi| {
                let n = (psi - phi0 - d2 * v[i]).exp();
                let p = d2 * (phip[i] - psi).exp();
                (p - n + dop[i], -p - n)
            }),
            label: "full.poisson",
        };
        let (u, rep) = newton_solve(&problem, s.psi.clone(), &self.settings.newton).map_err(|e| e.at(Stage::FullPoisson))?;
        drop(problem);
        s.psi = u;
        Ok(rep.iterations)
    }

    fn electrons(&self, s: &mut State, c: &Contacts) -> Result<usize> {
        let d2 = self.d2();
        let phi0 = self.params.phi0;
        let rc = self.params.recombination;
        let delta = self.params.delta;
        let offset: Vec<f64> = s.psi.iter().map(|p| p - phi0).collect();
        let bexp: Vec<f64> = c.psi.iter().zip(&c.v).map(|(p, v)| p - phi0 - d2 * v).collect();
        let (psi, phip, gen) = (&s.psi, &s.phip, &self.gen);
        let problem = ContinuityProblem {
            grid: self.grid,
            mobility: self.params.mu_n,
            sign: -d2,
            offset: &offset,
            boundary: &c.v,
            boundary_exponent: &bexp,
            source: Box::new(move |i, v| {
                let phin = phi0 + d2 * v;
                let n = (psi[i] - phin).exp();
                let p = d2 * (phip[i] - psi[i]).exp();
                let (r, rn, _) = rc.r_delta_with_grad(n, p, delta);
                let x = (phip[i] - phin).exp_m1();
                (r * x - gen[i], d2 * (-rn * n * x - r * (x + 1.0)))
            }),
            label: "full.electrons",
        };
        let (u, rep) = newton_solve(&problem, s.v.clone(), &self.settings.newton).map_err(|e| e.at(Stage::FullElectrons))?;
        drop(problem);
        s.v = u;
        Ok(rep.iterations)
    }

    fn holes(&self, s: &mut State, c: &Contacts) -> Result<usize> {
        let d2 = self.d2();
        let phi0 = self.params.phi0;
        let rc = self.params.recombination;
        let delta = self.params.delta;
        let offset: Vec<f64> = s.psi.iter().map(|p| -p).collect();
        let bexp: Vec<f64> = c.phip.iter().zip(&c.psi).map(|(a, b)| a - b).collect();
        let (psi, v, gen) = (&s.psi, &s.v, &self.gen);
        let problem = ContinuityProblem {
            grid: self.grid,
            mobility: self.params.mu_p,
            sign: 1.0,
            offset: &offset,
            boundary: &c.phip,
            boundary_exponent: &bexp,
            source: Box::new(move |i, phip| {
                let phin = phi0 + d2 * v[i];
                let n = (psi[i] - phin).exp();
                let p = d2 * (phip - psi[i]).exp();
                let (r, _, rp) = rc.r_delta_with_grad(n, p, delta);
                let x = (phip - phin).exp_m1();
                (gen[i] - r * x, -rp * p * x - r * (x + 1.0))
            }),
            label: "full.holes",
        };
        let (u, rep) = newton_solve(&problem, s.phip.clone(), &self.settings.newton).map_err(|e| e.at(Stage::FullHoles))?;
        drop(problem);
        s.phip = u;
        Ok(rep.iterations)
    }

    /// Gummel sweeps at fixed U until the update stalls below tolerance.
    fn gummel(&self, s: &mut State, big_u: f64) -> Result<usize> {
        let c = self.contacts(big_u);
        let mut history = Vec::new();
        for sweep in 1..=self.settings.gummel_max {
            let old = s.clone();
            let ip = self.poisson(s, &c)?;
            let ie = self.electrons(s, &c)?;
            let ih = self.holes(s, &c)?;
            let change = max_diff(&old.psi, &s.psi).max(max_diff(&old.v, &s.v)).max(max_diff(&old.phip, &s.phip));
            debug!("solver=gummel sweep={sweep} update={change:.3e} newton=({ip},{ie},{ih})");
            history.push(change);
            if change <= self.settings.gummel_tol {
                return Ok(sweep);
            }
        }
        let residual = *history.last().unwrap_or(&f64::NAN);
        Err(Error::NoConvergence { iterations: self.settings.gummel_max, residual, history }.at(Stage::FullCoupling))
    }

    fn coefficients(&self, s: &State, c: &Contacts) -> (Vec<f64>, Vec<f64>) {
        let d2 = self.d2();
        let phi0 = self.params.phi0;
        let sn: Vec<f64> = s.psi.iter().zip(&s.v).map(|(p, v)| p - phi0 - d2 * v).collect();
        let sp: Vec<f64> = s.phip.iter().zip(&s.psi).map(|(a, b)| a - b).collect();
        let an = exp_face_coefficients(self.grid, &sn, self.params.mu_n, |k| c.psi[k] - phi0 - d2 * c.v[k]);
        let ap = exp_face_coefficients(self.grid, &sp, self.params.mu_p, |k| c.phip[k] - c.psi[k]);
        (an, ap)
    }

    /// i_D/δ² from the weighted identity, from the Γ_D2 fluxes, and the
    /// total outflow through both contacts (all divided by δ²).
    fn currents(&self, s: &State, big_u: f64) -> (f64, f64, f64) {
        let c = self.contacts(big_u);
        let (an, ap) = self.coefficients(s, &c);
        let g = self.grid;
        let volume = -bilinear_form(g, &an, &s.v, &c.v, &self.w, &self.w_b)
            - bilinear_form(g, &ap, &s.phip, &c.phip, &self.w, &self.w_b);
        let flux = |tag| contact_flux(g, &an, &s.v, &c.v, tag) + contact_flux(g, &ap, &s.phip, &c.phip, tag);
        let direct = flux(BoundaryTag::Contact2);
        (volume, direct, direct + flux(BoundaryTag::Contact1))
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solves the full system, seeding fields and voltage from the cascade.
pub fn solve_full(
    grid: &Arc<Grid>,
    params: &ModelParams,
    doping: &DopingProfile,
    laser: &LaserSpec,
    settings: &FullSettings,
) -> Result<FullSolution> {
    if !(params.delta > 0.0) {
        return Err(Error::InvalidParameter { name: "delta", reason: format!("full model needs delta > 0, got {}", params.delta) });
    }
    let cs = CascadeSettings {
        newton: settings.newton,
        exact_contact_density: settings.exact_contact_density,
        ..Default::default()
    };
    let cascade = run_cascade(grid, params, doping, laser, &cs)?;
    solve_full_from(grid, params, doping, laser, settings, &cascade)
}

/// As [`solve_full`] with an already computed cascade as the initial guess.
pub fn solve_full_from(
    grid: &Arc<Grid>,
    params: &ModelParams,
    doping: &DopingProfile,
    laser: &LaserSpec,
    settings: &FullSettings,
    cascade: &AsymptoticSolution,
) -> Result<FullSolution> {
    let nc = grid.cell_count();
    let w = solve_elliptic(&EllipticProblem::uniform(grid.clone(), 1.0, vec![0.0; nc], (0.0, 1.0)))?;
    let model = Model {
        grid,
        params,
        settings,
        doping: doping.field(grid)?.into_values(),
        gen: generation(grid, laser)?.into_values(),
        psi_b: psi0_boundary(grid, params, doping, settings.exact_contact_density),
        w: w.into_values(),
        w_b: contact_values(grid, 0.0, 1.0),
    };
    let mut state = State {
        psi: cascade.psi().into_values(),
        v: cascade.phin2.values().to_vec(),
        phip: cascade.phip0.values().to_vec(),
    };
    let d2 = model.d2();
    let tol = settings.coupling_tol * d2.min(1.0);
    let r = params.resistance;
    let mut sweeps = Vec::new();

    // g(U) = 𝓡̂ i_D/δ² − U; U carries u_D/δ², so |g| δ² is the coupling residual
    let mut eval = |s: &mut State, u: f64| -> Result<f64> {
        sweeps.push(model.gummel(s, u)?);
        Ok(r * model.currents(s, u).0 - u)
    };
    let (mut u_prev, mut u_cur) = (0.0, cascade.ud2);
    let mut g_prev = eval(&mut state, u_prev)?;
    let mut iterations = 0;
    let mut g_cur = g_prev;
    if r == 0.0 || g_prev.abs() * d2 <= tol {
        u_cur = u_prev;
    } else {
        g_cur = eval(&mut state, u_cur)?;
        while g_cur.abs() * d2 > tol {
            iterations += 1;
            if iterations > settings.secant_max {
                return Err(Error::NoConvergence {
                    iterations: settings.secant_max,
                    residual: g_cur.abs() * d2,
                    history: vec![],
                }
                .at(Stage::FullCoupling));
            }
            let dg = g_cur - g_prev;
            if dg == 0.0 || !dg.is_finite() {
                return Err(Error::SecantStagnation(u_cur * d2).at(Stage::FullCoupling));
            }
            let mut next = u_cur - g_cur * (u_cur - u_prev) / dg;
            // g is decreasing with slope ≤ −1: never move more than the residual implies
            let cap = 10.0 * g_cur.abs().max((u_cur - u_prev).abs());
            next = next.clamp(u_cur - cap, u_cur + cap);
            if next == u_cur {
                break;
            }
            u_prev = u_cur;
            g_prev = g_cur;
            u_cur = next;
            g_cur = eval(&mut state, u_cur)?;
            debug!("solver=secant iter={iterations} U={u_cur:.6e} g={g_cur:.3e}");
        }
        if g_cur.abs() * d2 > tol {
            return Err(Error::SecantStagnation(u_cur * d2).at(Stage::FullCoupling));
        }
    }
    let (i_vol, i_flux, balance) = model.currents(&state, u_cur);
    info!(
        "stage=full delta={:.3e} u_d={:.6e} secant={} sweeps={:?}",
        params.delta,
        u_cur * d2,
        iterations,
        sweeps
    );
    let phi0 = params.phi0;
    let v = Field::new(grid.clone(), state.v)?;
    Ok(FullSolution {
        delta: params.delta,
        psi: Field::new(grid.clone(), state.psi)?,
        phi_n: v.map(|x| phi0 + d2 * x),
        phi_p: Field::new(grid.clone(), state.phip)?,
        phi_n_scaled: v,
        u_d: u_cur * d2,
        i_d: i_vol * d2,
        i_d_flux: i_flux * d2,
        flux_balance: balance * d2,
        coupling_residual: g_cur.abs() * d2,
        secant_iterations: iterations,
        gummel_sweeps: sweeps,
    })
}

/// Contact current −B_n(φₙ, w) − δ²B_p(φₚ, w) for fields held at contact
/// voltage `u_d`, using the unit-coefficient harmonic weight w.
pub fn contact_current(solution: &FullSolution, params: &ModelParams, doping: &DopingProfile) -> Result<f64> {
    let grid = solution.psi.grid();
    let nc = grid.cell_count();
    let w = solve_elliptic(&EllipticProblem::uniform(grid.clone(), 1.0, vec![0.0; nc], (0.0, 1.0)))?;
    let d2 = params.delta * params.delta;
    let phi0 = params.phi0;
    let psi_b: Vec<f64> = psi0_boundary(grid, params, doping, true)
        .into_iter()
        .zip(grid.faces())
        .map(|(b, f)| if f.tag == Some(BoundaryTag::Contact2) { b + solution.u_d } else { b })
        .collect();
    let phi_b = contact_values(grid, phi0, phi0 + solution.u_d);
    let wb = contact_values(grid, 0.0, 1.0);
    let sn: Vec<f64> = solution.psi.values().iter().zip(solution.phi_n.values()).map(|(a, b)| a - b).collect();
    let sp: Vec<f64> = solution.phi_p.values().iter().zip(solution.psi.values()).map(|(a, b)| a - b).collect();
    let an = exp_face_coefficients(grid, &sn, params.mu_n, |k| psi_b[k] - phi_b[k]);
    let ap = exp_face_coefficients(grid, &sp, params.mu_p, |k| phi_b[k] - psi_b[k]);
    Ok(-bilinear_form(grid, &an, solution.phi_n.values(), &phi_b, w.values(), &wb)
        - d2 * bilinear_form(grid, &ap, solution.phi_p.values(), &phi_b, w.values(), &wb))
}

/// One row of the δ-sweep consistency report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyRow {
    pub delta: f64,
    pub u_full: f64,
    /// δ²u_D⁽²⁾ from the cascade
    pub u_cascade: f64,
    /// |u_full − δ²u_D⁽²⁾|/δ²
    pub error: f64,
    /// max|φₙ − φ₀|
    pub phi_n_deviation: f64,
}

impl std::fmt::Display for ConsistencyRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "delta={:.3e} u_full={:.10e} u_cascade={:.10e} ratio={:.10e} error={:.3e}",
            self.delta,
            self.u_full,
            self.u_cascade,
            self.u_full / self.u_cascade,
            self.error
        )
    }
}

/// Solves cascade and full model for each δ.
pub fn delta_sweep(
    grid: &Arc<Grid>,
    params: &ModelParams,
    doping: &DopingProfile,
    laser: &LaserSpec,
    deltas: &[f64],
    settings: &FullSettings,
) -> Result<Vec<ConsistencyRow>> {
    deltas
        .iter()
        .map(|&delta| {
            let p = ModelParams { delta, ..*params };
            let cs = CascadeSettings {
                newton: settings.newton,
                exact_contact_density: settings.exact_contact_density,
                ..Default::default()
            };
            let cascade = run_cascade(grid, &p, doping, laser, &cs)?;
            let full = solve_full_from(grid, &p, doping, laser, settings, &cascade)?;
            let d2 = delta * delta;
            Ok(ConsistencyRow {
                delta,
                u_full: full.u_d,
                u_cascade: cascade.u_d(),
                error: (full.u_d - cascade.u_d()).abs() / d2,
                phi_n_deviation: full.phi_n.values().iter().map(|v| (v - p.phi0).abs()).fold(0.0, f64::max),
            })
        })
        .collect()
}

/// Least-squares slope of ln y against ln x.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
