//! Two-point flux finite-volume assembly, face averaging, a damped Newton
//! driver and analytic bound checks.
//!
//! Every operator has the per-cell form
//! `Σ_f a_f T_f (u_i − u_nb) + c_i V_i u_i = V_i f_i`,
//! where `u_nb` is the neighbouring cell value or the Dirichlet datum of a
//! contact face, and Neumann faces carry no flux.

use std::sync::Arc;

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{DirectSolver, SparseMatrix};
use crate::mesh::{BoundaryTag, Field, Grid};

/// Logarithmic mean of two positive cell coefficients.
pub fn face_coefficient(a_left: f64, a_right: f64) -> Result<f64> {
    for a in [a_left, a_right] {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::NonPositive { what: "face coefficient input", value: a });
        }
    }
    let d = a_left.ln() - a_right.ln();
    if d.abs() < 1e-12 {
        Ok(a_left)
    } else {
        Ok((a_left - a_right) / d)
    }
}

/// B(t) = (eᵗ − 1)/t and B'(t).
#[inline]
fn bern(t: f64) -> (f64, f64) {
    if t.abs() < 1e-4 {
        (
            1.0 + t * (0.5 + t * (1.0 / 6.0 + t / 24.0)),
            0.5 + t * (1.0 / 3.0 + t * (0.125 + t / 30.0)),
        )
    } else {
        let em1 = t.exp_m1();
        (em1 / t, (t * (em1 + 1.0) - em1) / (t * t))
    }
}

/// Logarithmic mean of `exp(s_l)` and `exp(s_r)` with its partial derivatives
/// in `s_l` and `s_r`. Works in exponent space so nearby arguments keep full
/// precision.
#[inline]
pub fn log_mean_exp(s_l: f64, s_r: f64) -> (f64, f64, f64) {
    // symmetric in its arguments; expand around the smaller exponent
    if s_l >= s_r {
        let er = s_r.exp();
        let (b, db) = bern(s_l - s_r);
        (er * b, er * db, er * (b - db))
    } else {
        let el = s_l.exp();
        let (b, db) = bern(s_r - s_l);
        (el * b, el * (b - db), el * db)
    }
}

/// Cell ordering that minimizes the band of grid operators (`perm[cell] = row`).
pub fn band_ordering(grid: &Grid) -> Option<Vec<usize>> {
    let [nx, ny] = grid.shape();
    if nx <= ny {
        return None;
    }
    let mut perm = vec![0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            perm[i + nx * j] = j + ny * i;
        }
    }
    Some(perm)
}

/// Factorizes an assembled grid operator.
pub fn factorize(grid: &Grid, a: &SparseMatrix) -> Result<DirectSolver> {
    DirectSolver::new(a, band_ordering(grid))
}

/// Face values of a coefficient `exp(s)` where `s` is given per cell and, for
/// boundary faces, by `boundary(face_index)`.
pub fn exp_face_coefficients(grid: &Grid, s: &[f64], scale: f64, boundary: impl Fn(usize) -> f64) -> Vec<f64> {
    grid.faces()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let other = match f.outer {
                Some(o) => s[o],
                None => boundary(k),
            };
            scale * log_mean_exp(s[f.inner], other).0
        })
        .collect()
}

/// Linear problem −∇·(a∇u) + c u = f with Dirichlet data on both contacts.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub grid: Arc<Grid>,
    /// One coefficient per face; ignored on Neumann faces.
    pub face_coeff: Vec<f64>,
    /// Optional zeroth-order coefficient per cell.
    pub reaction: Option<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Dirichlet value per face; ignored on interior and Neumann faces.
    pub boundary: Vec<f64>,
}

impl EllipticProblem {
    pub fn new(grid: Arc<Grid>, face_coeff: Vec<f64>, rhs: Vec<f64>, contacts: (f64, f64)) -> Self {
        let boundary = grid
            .faces()
            .iter()
            .map(|f| match f.tag {
                Some(BoundaryTag::Contact1) => contacts.0,
                Some(BoundaryTag::Contact2) => contacts.1,
                _ => 0.0,
            })
            .collect();
        EllipticProblem {
            grid,
            face_coeff,
            reaction: None,
            rhs,
            boundary,
        }
    }

    /// Constant coefficient `a` on every face.
    pub fn uniform(grid: Arc<Grid>, a: f64, rhs: Vec<f64>, contacts: (f64, f64)) -> Self {
        let nf = grid.faces().len();
        Self::new(grid, vec![a; nf], rhs, contacts)
    }

    pub fn with_reaction(mut self, c: Vec<f64>) -> Self {
        self.reaction = Some(c);
        self
    }

    pub fn with_boundary(mut self, values: Vec<f64>) -> Self {
        self.boundary = values;
        self
    }

    fn validate(&self) -> Result<()> {
        let nc = self.grid.cell_count();
        let nf = self.grid.faces().len();
        if self.rhs.len() != nc {
            return Err(Error::FieldMismatch { expected: nc, got: self.rhs.len() });
        }
        if self.face_coeff.len() != nf || self.boundary.len() != nf {
            return Err(Error::InvalidGrid(format!(
                "face data lengths {} / {} do not match {nf} faces",
                self.face_coeff.len(),
                self.boundary.len()
            )));
        }
        if let Some(c) = &self.reaction {
            if c.len() != nc {
                return Err(Error::FieldMismatch { expected: nc, got: c.len() });
            }
            if let Some(v) = c.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::InvalidParameter {
                    name: "reaction",
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Symmetric positive-definite matrix and load vector after Dirichlet elimination.
pub fn assemble_diffusion(problem: &EllipticProblem) -> Result<(SparseMatrix, Vec<f64>)> {
    problem.validate()?;
    let grid = &problem.grid;
    let n = grid.cell_count();
    let vol = grid.volumes();
    let mut t = Vec::with_capacity(n + 4 * grid.faces().len());
    let mut load: Vec<f64> = (0..n).map(|i| vol[i] * problem.rhs[i]).collect();
    for (k, f) in grid.faces().iter().enumerate() {
        if f.tag == Some(BoundaryTag::Neumann) {
            continue;
        }
        let a = problem.face_coeff[k];
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::NonPositiveCoefficient { face: k, value: a });
        }
        let g = a * f.transmissibility();
        t.push((f.inner, f.inner, g));
        match f.outer {
            Some(o) => {
                t.push((o, o, g));
                t.push((f.inner, o, -g));
                t.push((o, f.inner, -g));
            }
            None => load[f.inner] += g * problem.boundary[k],
        }
    }
    if let Some(c) = &problem.reaction {
        for i in 0..n {
            t.push((i, i, c[i] * vol[i]));
        }
    }
    Ok((SparseMatrix::from_triplets(n, t), load))
}

pub fn solve_elliptic(problem: &EllipticProblem) -> Result<Field> {
    let (a, b) = assemble_diffusion(problem)?;
    let x = factorize(&problem.grid, &a)?.solve(&b);
    Field::new(problem.grid.clone(), x)
}

/// Discrete energy form Σ_f a_f T_f (u_i − u_j)(w_i − w_j) over all
/// non-Neumann faces, boundary faces using the per-face boundary values.
pub fn bilinear_form(grid: &Grid, coeff: &[f64], u: &[f64], u_b: &[f64], w: &[f64], w_b: &[f64]) -> f64 {
    grid.faces()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.tag != Some(BoundaryTag::Neumann))
        .map(|(k, f)| {
            let (uj, wj) = match f.outer {
                Some(o) => (u[o], w[o]),
                None => (u_b[k], w_b[k]),
            };
            coeff[k] * f.transmissibility() * (u[f.inner] - uj) * (w[f.inner] - wj)
        })
        .sum()
}

/// Outward flux of −a∇u through the faces carrying `tag`.
pub fn contact_flux(grid: &Grid, coeff: &[f64], u: &[f64], u_b: &[f64], tag: BoundaryTag) -> f64 {
    grid.boundary_faces(tag)
        .map(|(k, f)| coeff[k] * f.transmissibility() * (u[f.inner] - u_b[k]))
        .sum()
}

/// Per-face Dirichlet data from the two contact values.
pub fn contact_values(grid: &Grid, d1: f64, d2: f64) -> Vec<f64> {
    grid.faces()
        .iter()
        .map(|f| match f.tag {
            Some(BoundaryTag::Contact1) => d1,
            Some(BoundaryTag::Contact2) => d2,
            _ => 0.0,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Tolerance on the max-norm of the residual per unit volume.
    pub abs_tol: f64,
    /// Additional tolerance relative to the initial residual.
    pub rel_tol: f64,
    /// Converged when a full step is this small relative to the iterate.
    pub step_tol: f64,
    pub max_iter: usize,
    /// Smallest damping factor tried by the line search.
    pub min_damping: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            step_tol: 1e-13,
            max_iter: 50,
            min_damping: 2f64.powi(-20),
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.abs_tol > 0.0) {
            return bad("solver.abs_tol", format!("must be > 0, got {}", self.abs_tol));
        }
        if !(self.rel_tol >= 0.0) {
            return bad("solver.rel_tol", format!("must be >= 0, got {}", self.rel_tol));
        }
        if !(self.step_tol > 0.0) {
            return bad("solver.step_tol", format!("must be > 0, got {}", self.step_tol));
        }
        if self.max_iter < 1 {
            return bad("solver.max_iter", "must be >= 1".into());
        }
        if !(self.min_damping > 0.0 && self.min_damping <= 1.0) {
            return bad("solver.min_damping", format!("must be in (0, 1], got {}", self.min_damping));
        }
        Ok(())
    }
}

/// Nonlinear system F(u) = 0 with an analytic Jacobian.
pub trait NonlinearProblem {
    fn dim(&self) -> usize;
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, u: &[f64]) -> Result<SparseMatrix>;
    /// Bandwidth-reducing permutation for the Jacobian factorization.
    fn ordering(&self) -> Option<Vec<usize>> {
        None
    }
    fn label(&self) -> &str {
        "newton"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    /// Residual norm before each iteration and after the last.
    pub history: Vec<f64>,
}

fn max_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

/// Damped Newton iteration with a halving line search on the residual max-norm.
pub fn newton_solve<P: NonlinearProblem + ?Sized>(
    problem: &P,
    initial: Vec<f64>,
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, NewtonReport)> {
    settings.validate()?;
    if initial.len() != problem.dim() {
        return Err(Error::FieldMismatch { expected: problem.dim(), got: initial.len() });
    }
    let mut u = initial;
    let mut r = problem.residual(&u)?;
    let mut norm = max_norm(&r);
    if !norm.is_finite() {
        return Err(Error::InvalidParameter {
            name: "initial guess",
            reason: "residual is not finite".into(),
        });
    }
    let tol = settings.abs_tol + settings.rel_tol * norm;
    let mut history = vec![norm];
    let perm = problem.ordering();
    for it in 0..settings.max_iter {
        if norm <= tol {
            debug!("solver={} iter={} residual={:.3e} status=converged", problem.label(), it, norm);
            return Ok((u, NewtonReport { iterations: it, residual: norm, history }));
        }
        let jac = problem.jacobian(&u)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let du = DirectSolver::new(&jac, perm.clone())?.solve(&rhs);

        let mut damping = 1.0;
        let (u_new, r_new, n_new) = loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + damping * b).collect();
            if let Ok(rt) = problem.residual(&trial) {
                let nt = max_norm(&rt);
                if nt.is_finite() && nt < norm {
                    break (trial, rt, nt);
                }
            }
            damping *= 0.5;
            if damping < settings.min_damping {
                // no decrease: either at the rounding floor or genuinely stuck
                let unorm = max_norm(&u);
                if max_norm(&du) <= settings.step_tol * (1.0 + unorm) {
                    debug!("solver={} iter={} residual={:.3e} status=step_converged", problem.label(), it, norm);
                    return Ok((u, NewtonReport { iterations: it, residual: norm, history }));
                }
                return Err(Error::NoConvergence {
                    iterations: it + 1,
                    residual: norm,
                    history,
                });
            }
        };
        let step = damping * max_norm(&du);
        u = u_new;
        r = r_new;
        norm = n_new;
        history.push(norm);
        debug!(
            "solver={} iter={} residual={:.3e} damping={} step={:.3e}",
            problem.label(),
            it + 1,
            norm,
            damping,
            step
        );
        if damping == 1.0 && step <= settings.step_tol * (1.0 + max_norm(&u)) && norm <= tol.max(1e-8) {
            return Ok((u, NewtonReport { iterations: it + 1, residual: norm, history }));
        }
    }
    if norm <= tol {
        let iterations = settings.max_iter;
        return Ok((u, NewtonReport { iterations, residual: norm, history }));
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iter,
        residual: norm,
        history,
    })
}

/// Outcome of comparing a field against analytic bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub observed_min: f64,
    pub observed_max: f64,
    pub slack: f64,
    pub pass: bool,
}

impl std::fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "bound={} lower={:.6e} upper={:.6e} min={:.6e} max={:.6e} slack={:.1e} pass={}",
            self.name, self.lower, self.upper, self.observed_min, self.observed_max, self.slack, self.pass
        )
    }
}

pub fn check_bounds(name: &str, values: &[f64], lower: f64, upper: f64, slack: f64) -> BoundsReport {
    let observed_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let observed_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = observed_min >= lower - slack && observed_max <= upper + slack;
    BoundsReport {
        name: name.to_string(),
        lower,
        upper,
        observed_min,
        observed_max,
        slack,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, GridSpec};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&GridSpec::line(n)).unwrap())
    }

    #[test]
    fn face_coefficient_examples() {
        assert_eq!(face_coefficient(3.0, 3.0).unwrap(), 3.0);
        let e = std::f64::consts::E;
        assert!((face_coefficient(1.0, e).unwrap() - (e - 1.0)).abs() < 1e-15);
        assert!(face_coefficient(0.0, 1.0).is_err());
        assert!(face_coefficient(1.0, -2.0).is_err());
    }

    proptest! {
        #[test]
        fn face_coefficient_is_a_mean(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
            let m = face_coefficient(a, b).unwrap();
            prop_assert!(m >= a.min(b) * (1.0 - 1e-14) && m <= a.max(b) * (1.0 + 1e-14));
        }

        #[test]
        fn log_mean_exp_matches_value_form(s in -30.0f64..30.0, t in -30.0f64..30.0) {
            let (v, dl, dr) = log_mean_exp(s, t);
            let direct = face_coefficient(s.exp(), t.exp()).unwrap();
            prop_assert!((v - direct).abs() <= 1e-9 * direct);
            let h = 1e-6;
            let fl = (log_mean_exp(s + h, t).0 - log_mean_exp(s - h, t).0) / (2.0 * h);
            let fr = (log_mean_exp(s, t + h).0 - log_mean_exp(s, t - h).0) / (2.0 * h);
            prop_assert!((dl - fl).abs() <= 1e-6 * v);
            prop_assert!((dr - fr).abs() <= 1e-6 * v);
        }
    }

    #[test]
    fn log_mean_exp_series_branch_is_continuous() {
        for t in [0.99e-4, 1.01e-4, -0.99e-4, -1.01e-4, 1e-9, 0.0] {
            let (v, dl, _) = log_mean_exp(t, 0.0);
            let exact = if t == 0.0 { 1.0 } else { t.exp_m1() / t };
            assert!((v - exact).abs() < 1e-15, "{t}");
            // the closed-form derivative cancels badly for tiny t; use its Taylor polynomial there
            let dexact = if t.abs() < 1e-6 { 0.5 + t / 3.0 } else { (t * t.exp() - t.exp_m1()) / (t * t) };
            assert!((dl - dexact).abs() < 1e-8, "{t}");
        }
    }

    #[test]
    fn linear_interpolant_is_exact() {
        let g = line(37);
        let p = EllipticProblem::uniform(g.clone(), 1.0, vec![0.0; 37], (0.0, 1.0));
        let u = solve_elliptic(&p).unwrap();
        for (c, v) in g.centers().iter().zip(u.values()) {
            assert!((v - c[0]).abs() < 1e-13);
        }
    }

    fn manufactured_error(n: usize) -> f64 {
        let g = line(n);
        let f: Vec<f64> = g.centers().iter().map(|c| PI * PI * (PI * c[0]).sin()).collect();
        let u = solve_elliptic(&EllipticProblem::uniform(g.clone(), 1.0, f, (0.0, 0.0))).unwrap();
        g.centers()
            .iter()
            .zip(u.values())
            .map(|(c, v)| (v - (PI * c[0]).sin()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn manufactured_sine_converges_at_order_two() {
        let e: Vec<f64> = [20, 40, 80, 160].iter().map(|&n| manufactured_error(n)).collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9, "observed order {order}");
        }
    }

    #[test]
    fn doubling_coefficient_and_load_is_neutral() {
        let g = Arc::new(build_grid(&GridSpec::rect(9, 6, 0.7)).unwrap());
        let f: Vec<f64> = g.centers().iter().map(|c| c[0] - c[1] * c[1]).collect();
        let a: Vec<f64> = g.faces().iter().map(|fc| 1.0 + fc.center[0]).collect();
        let p1 = EllipticProblem::new(g.clone(), a.clone(), f.clone(), (0.3, -0.2));
        let p2 = EllipticProblem::new(
            g.clone(),
            a.iter().map(|v| 2.0 * v).collect(),
            f.iter().map(|v| 2.0 * v).collect(),
            (0.3, -0.2),
        );
        let u1 = solve_elliptic(&p1).unwrap();
        let u2 = solve_elliptic(&p2).unwrap();
        assert!(u1.max_abs_diff(&u2) < 1e-13);
    }

    #[test]
    fn operator_is_symmetric() {
        let g = Arc::new(build_grid(&GridSpec::rect(13, 7, 0.5)).unwrap());
        let a: Vec<f64> = g.faces().iter().map(|fc| (3.0 * fc.center[0]).exp()).collect();
        let nc = g.cell_count();
        let p = EllipticProblem::new(g.clone(), a, vec![1.0; nc], (0.0, 1.0)).with_reaction(vec![0.5; nc]);
        let (m, _) = assemble_diffusion(&p).unwrap();
        assert!(m.symmetry_defect() <= 1e-14);
    }

    #[test]
    fn nonpositive_face_coefficient_rejected() {
        let g = line(4);
        let mut a = vec![1.0; g.faces().len()];
        a[2] = 0.0;
        let p = EllipticProblem::new(g, a, vec![0.0; 4], (0.0, 1.0));
        assert!(matches!(assemble_diffusion(&p), Err(Error::NonPositiveCoefficient { face: 2, .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn discrete_maximum_principle(seed in 0u64..1000, d1 in -2.0f64..2.0, d2 in -2.0f64..2.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Arc::new(build_grid(&GridSpec::rect(12, 9, 0.8)).unwrap());
            let a: Vec<f64> = g.faces().iter().map(|_| rng.gen_range(0.01..100.0)).collect();
            let nc = g.cell_count();
            let u = solve_elliptic(&EllipticProblem::new(g, a, vec![0.0; nc], (d1, d2))).unwrap();
            prop_assert!(u.min() >= d1.min(d2) - 1e-12);
            prop_assert!(u.max() <= d1.max(d2) + 1e-12);
        }
    }

    struct Scalar;
    impl NonlinearProblem for Scalar {
        fn dim(&self) -> usize {
            1
        }
        fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![u[0] - 1.0])
        }
        fn jacobian(&self, _u: &[f64]) -> Result<SparseMatrix> {
            Ok(SparseMatrix::from_triplets(1, vec![(0, 0, 1.0)]))
        }
    }

    #[test]
    fn linear_toy_converges_in_one_step() {
        let (u, rep) = newton_solve(&Scalar, vec![0.0], &NewtonSettings::default()).unwrap();
        assert_eq!(u, vec![1.0]);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.history, vec![1.0, 0.0]);
    }

    /// e^u − 2 = 0 per component, started far away so damping engages.
    struct ExpRoot(usize);
    impl NonlinearProblem for ExpRoot {
        fn dim(&self) -> usize {
            self.0
        }
        fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
            Ok(u.iter().map(|v| v.exp() - 2.0).collect())
        }
        fn jacobian(&self, u: &[f64]) -> Result<SparseMatrix> {
            Ok(SparseMatrix::from_triplets(self.0, u.iter().enumerate().map(|(i, v)| (i, i, v.exp())).collect()))
        }
    }

    #[test]
    fn damped_newton_reaches_root() {
        let (u, rep) = newton_solve(&ExpRoot(3), vec![-8.0, 0.0, 12.0], &NewtonSettings::default()).unwrap();
        for v in u {
            assert!((v - 2f64.ln()).abs() < 1e-12);
        }
        assert!(rep.residual <= 1e-10);
        let tail = &rep.history[rep.history.len() - 3..];
        assert!(tail[2] <= 10.0 * tail[1] * tail[1] + 1e-15);
    }

    #[test]
    fn iteration_cap_reports_history() {
        let s = NewtonSettings { max_iter: 2, ..Default::default() };
        match newton_solve(&ExpRoot(1), vec![30.0], &s) {
            Err(Error::NoConvergence { iterations, history, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(NewtonSettings { abs_tol: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn bounds_examples() {
        let r = check_bounds("c", &[0.5; 4], 0.0, 1.0, 1e-8);
        assert!(r.pass);
        let r = check_bounds("c", &[1.0 + 2e-8], 0.0, 1.0, 1e-8);
        assert!(!r.pass);
    }

    #[test]
    fn energy_form_and_flux_identity() {
        // Σ w_i (A u)_i = B(u, w) + flux on the w = 1 contact
        let g = Arc::new(build_grid(&GridSpec::rect(8, 5, 0.6)).unwrap());
        let a: Vec<f64> = g.faces().iter().map(|f| 1.0 + f.center[1]).collect();
        let u: Vec<f64> = g.centers().iter().map(|c| (2.0 * c[0]).cos() + c[1]).collect();
        let ub = contact_values(&g, 0.3, -1.1);
        let w: Vec<f64> = g.centers().iter().map(|c| c[0] * c[0]).collect();
        let wb = contact_values(&g, 0.0, 1.0);
        let p = EllipticProblem::new(g.clone(), a.clone(), vec![0.0; g.cell_count()], (0.3, -1.1));
        let (m, load) = assemble_diffusion(&p).unwrap();
        let au: Vec<f64> = m.mul_vec(&u).iter().zip(&load).map(|(x, l)| x - l).collect();
        let lhs: f64 = w.iter().zip(&au).map(|(a, b)| a * b).sum();
        let rhs = bilinear_form(&g, &a, &u, &ub, &w, &wb) + contact_flux(&g, &a, &u, &ub, BoundaryTag::Contact2);
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
    }
}
