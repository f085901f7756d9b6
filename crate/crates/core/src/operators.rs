//! Residuals and Jacobians of the nonlinear finite-volume operators shared by
//! the cascade and the full model. Rows are divided by the cell volume so the
//! Newton tolerance is a pointwise bound on the discrete equation.

use crate::error::Result;
use crate::linalg::SparseMatrix;
use crate::mesh::{BoundaryTag, Grid};
use crate::solver::{band_ordering, log_mean_exp, NonlinearProblem};

/// Pointwise source f(i, u) and its derivative in u.
pub(crate) type Source<'a> = Box<dyn Fn(usize, f64) -> (f64, f64) + Sync + 'a>;

/// −λ²Δψ = f(ψ) with Dirichlet data on the contacts.
pub(crate) struct PoissonProblem<'a> {
    pub grid: &'a Grid,
    pub lambda2: f64,
    pub boundary: &'a [f64],
    pub source: Source<'a>,
    pub label: &'static str,
}

impl NonlinearProblem for PoissonProblem<'_> {
    fn dim(&self) -> usize {
        self.grid.cell_count()
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let vol = self.grid.volumes();
        let mut r: Vec<f64> = (0..u.len()).map(|i| -vol[i] * (self.source)(i, u[i]).0).collect();
        for (k, f) in self.grid.faces().iter().enumerate() {
            if f.tag == Some(BoundaryTag::Neumann) {
                continue;
            }
            let g = self.lambda2 * f.transmissibility();
            match f.outer {
                Some(o) => {
                    let q = g * (u[f.inner] - u[o]);
                    r[f.inner] += q;
                    r[o] -= q;
                }
                None => r[f.inner] += g * (u[f.inner] - self.boundary[k]),
            }
        }
        for (v, w) in r.iter_mut().zip(vol) {
            *v /= w;
        }
        Ok(r)
    }

    fn jacobian(&self, u: &[f64]) -> Result<SparseMatrix> {
        let vol = self.grid.volumes();
        let mut t = Vec::with_capacity(5 * u.len());
        for i in 0..u.len() {
            t.push((i, i, -(self.source)(i, u[i]).1));
        }
        for f in self.grid.faces() {
            if f.tag == Some(BoundaryTag::Neumann) {
                continue;
            }
            let g = self.lambda2 * f.transmissibility();
            let i = f.inner;
            t.push((i, i, g / vol[i]));
            if let Some(o) = f.outer {
                t.push((o, o, g / vol[o]));
                t.push((i, o, -g / vol[i]));
                t.push((o, i, -g / vol[o]));
            }
        }
        Ok(SparseMatrix::from_triplets(u.len(), t))
    }

    fn ordering(&self) -> Option<Vec<usize>> {
        band_ordering(self.grid)
    }

    fn label(&self) -> &str {
        self.label
    }
}

/// −∇·(μ e^{s}∇u) = f(u) with s = sign·u + offset in cells and prescribed
/// exponents on contact faces.
pub(crate) struct ContinuityProblem<'a> {
    pub grid: &'a Grid,
    pub mobility: f64,
    pub sign: f64,
    pub offset: &'a [f64],
    pub boundary: &'a [f64],
    pub boundary_exponent: &'a [f64],
    pub source: Source<'a>,
    pub label: &'static str,
}

impl ContinuityProblem<'_> {
    #[inline]
    fn exponent(&self, i: usize, u: &[f64]) -> f64 {
        self.sign * u[i] + self.offset[i]
    }

    /// (u_j, s_j) across face `k` from cell `f.inner`.
    #[inline]
    fn across(&self, k: usize, outer: Option<usize>, u: &[f64]) -> (f64, f64) {
        match outer {
            Some(o) => (u[o], self.exponent(o, u)),
            None => (self.boundary[k], self.boundary_exponent[k]),
        }
    }
}

impl NonlinearProblem for ContinuityProblem<'_> {
    fn dim(&self) -> usize {
        self.grid.cell_count()
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let vol = self.grid.volumes();
        let mut r: Vec<f64> = (0..u.len()).map(|i| -vol[i] * (self.source)(i, u[i]).0).collect();
        for (k, f) in self.grid.faces().iter().enumerate() {
            if f.tag == Some(BoundaryTag::Neumann) {
                continue;
            }
            let i = f.inner;
            let (uj, sj) = self.across(k, f.outer, u);
            let a = self.mobility * log_mean_exp(self.exponent(i, u), sj).0;
            let q = a * f.transmissibility() * (u[i] - uj);
            r[i] += q;
            if let Some(o) = f.outer {
                r[o] -= q;
            }
        }
        for (v, w) in r.iter_mut().zip(vol) {
            *v /= w;
        }
        Ok(r)
    }

    fn jacobian(&self, u: &[f64]) -> Result<SparseMatrix> {
        let vol = self.grid.volumes();
        let mut t = Vec::with_capacity(5 * u.len());
        for i in 0..u.len() {
            t.push((i, i, -(self.source)(i, u[i]).1));
        }
        for (k, f) in self.grid.faces().iter().enumerate() {
            if f.tag == Some(BoundaryTag::Neumann) {
                continue;
            }
            let i = f.inner;
            let (uj, sj) = self.across(k, f.outer, u);
            let (l, dl, dr) = log_mean_exp(self.exponent(i, u), sj);
            let tm = self.mobility * f.transmissibility();
            let d = u[i] - uj;
            let dqi = tm * (l + self.sign * dl * d);
            t.push((i, i, dqi / vol[i]));
            if let Some(o) = f.outer {
                let dqo = tm * (-l + self.sign * dr * d);
                t.push((i, o, dqo / vol[i]));
                t.push((o, i, -dqi / vol[o]));
                t.push((o, o, -dqo / vol[o]));
            }
        }
        Ok(SparseMatrix::from_triplets(u.len(), t))
    }

    fn ordering(&self) -> Option<Vec<usize>> {
        band_ordering(self.grid)
    }

    fn label(&self) -> &str {
        self.label
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Max relative deviation of the analytic Jacobian from central differences.
    fn jacobian_error(p: &dyn NonlinearProblem, u: &[f64]) -> f64 {
        let jac = p.jacobian(u).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for j in 0..u.len() {
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[j] += h;
            um[j] -= h;
            let rp = p.residual(&up).unwrap();
            let rm = p.residual(&um).unwrap();
            let col_scale = (0..u.len()).map(|i| jac.get(i, j).abs()).fold(0.0, f64::max);
            for i in 0..u.len() {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                worst = worst.max((fd - jac.get(i, j)).abs() / col_scale.max(1e-300));
            }
        }
        worst
    }

    #[test]
    fn jacobians_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let grid = build_grid(&GridSpec::rect(6, 4, 0.5)).unwrap();
        let n = grid.cell_count();
        let nf = grid.faces().len();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.0)).collect();
        let boundary: Vec<f64> = (0..nf).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let bexp: Vec<f64> = (0..nf).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let offset: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..5 {
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cc = c.clone();
            let poisson = PoissonProblem {
                grid: &grid,
                lambda2: 0.3,
                boundary: &boundary,
                source: Box::new(move |i, v| (cc[i] - v.exp(), -v.exp())),
                label: "test",
            };
            assert!(jacobian_error(&poisson, &u) < 1e-6);
            for sign in [1.0, -1.0] {
                let cc = c.clone();
                let cont = ContinuityProblem {
                    grid: &grid,
                    mobility: 1.7,
                    sign,
                    offset: &offset,
                    boundary: &boundary,
                    boundary_exponent: &bexp,
                    source: Box::new(move |i, v| (cc[i] - 2.0 * v.exp_m1(), -2.0 * v.exp())),
                    label: "test",
                };
                assert!(jacobian_error(&cont, &u) < 1e-6);
            }
        }
    }
}
