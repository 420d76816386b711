//! Energy-regularized Dirichlet boundary control:
//!
//! minimize `½‖u − u_d‖²_{L2(Ω)} + (ν/2) |z|²_{H^{1/2}(Γ)}` subject to
//! `−Δu = f` in `Ω`, `u = z` on `Γ`, discretized with P1 elements. The
//! seminorm is `⟨N_h z, z⟩ = zᵀ Σ z`.
//!
//! The reduced equation `T z = g` is solved by GMRES in functional form:
//! `T z = Sᵀ M S z + ν Σ z` and `g = Sᵀ (b_d − M u_f)`, where `S` is the
//! discrete harmonic extension, `u_f = P_h f` and `b_d` is the load vector of
//! `u_d`. Each application of `T` costs one state solve and one adjoint solve.

use serde::Serialize;

use crate::boundary::{extension_and_schur, extension_transpose, robin_solve, solve_zero_trace};
use crate::error::{check_len, Error, Result};
use crate::fem::{load_vector, squared_l2_distance, FeSpace};
use crate::functions::AnalyticFunction;
use crate::solvers::{gmres_preconditioned, FnOperator, GmresOptions, LinearOperator};
use crate::sparse::dot;

#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub nu: f64,
    pub f: AnalyticFunction,
    pub u_d: AnalyticFunction,
}

impl ControlProblem {
    pub fn new(nu: f64, f: AnalyticFunction, u_d: AnalyticFunction) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid(format!("regularization parameter nu must be positive, got {nu}")));
        }
        Ok(Self { nu, f, u_d })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlSolution {
    /// Control, in boundary numbering.
    pub z: Vec<f64>,
    /// State; its trace is `z`.
    pub u: Vec<f64>,
    /// Adjoint state; zero on the boundary.
    pub p: Vec<f64>,
    pub objective: f64,
    pub gmres_iterations: usize,
    pub gmres_residual: f64,
    /// Dual norm of the gradient equation residual, relative to that of `g`.
    pub optimality_residual: f64,
}

/// The reduced operator in functional form.
pub struct ReducedOperator<'a> {
    space: &'a FeSpace,
    nu: f64,
}

impl<'a> ReducedOperator<'a> {
    pub fn new(space: &'a FeSpace, nu: f64) -> Self {
        Self { space, nu }
    }

    /// Returns `(Sᵀ M S z, ν Σ z)` separately.
    pub fn parts(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (u, sigma) = extension_and_schur(self.space, z)?;
        let mu = self.space.mass().mul_vec(&u)?;
        let tracking = extension_transpose(self.space, &mu)?;
        Ok((tracking, sigma.into_iter().map(|v| self.nu * v).collect()))
    }
}

impl LinearOperator for ReducedOperator<'_> {
    fn dim(&self) -> usize {
        self.space.num_boundary()
    }

    fn apply(&self, z: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.dim(), y.len())?;
        let (a, b) = self.parts(z)?;
        for ((y, a), b) in y.iter_mut().zip(a).zip(b) {
            *y = a + b;
        }
        Ok(())
    }
}

/// `u_f = P_h f`.
pub fn solve_pf(space: &FeSpace, f: &AnalyticFunction) -> Result<Vec<f64>> {
    solve_zero_trace(space, &load_vector(space.mesh(), f))
}

/// `T_h^ν z` as boundary function coefficients (Riesz representative).
pub fn apply_tnu(space: &FeSpace, nu: f64, z: &[f64]) -> Result<Vec<f64>> {
    let mut t = vec![0.0; space.num_boundary()];
    ReducedOperator::new(space, nu).apply(z, &mut t)?;
    space.solve_boundary_mass(&t)
}

fn rhs_functional(space: &FeSpace, u_f: &[f64], b_d: &[f64]) -> Result<Vec<f64>> {
    let muf = space.mass().mul_vec(u_f)?;
    let w: Vec<f64> = b_d.iter().zip(&muf).map(|(b, m)| b - m).collect();
    extension_transpose(space, &w)
}

/// `g_h = S_h^*(u_d − u_f)` as boundary function coefficients.
pub fn rhs_gh(space: &FeSpace, f: &AnalyticFunction, u_d: &AnalyticFunction) -> Result<Vec<f64>> {
    let u_f = solve_pf(space, f)?;
    let b_d = load_vector(space.mesh(), u_d);
    space.solve_boundary_mass(&rhs_functional(space, &u_f, &b_d)?)
}

/// `½‖u_h − u_d‖² + (ν/2)⟨N_h z, z⟩`, with the tracking term integrated by the
/// midpoint rule.
pub fn objective_value(space: &FeSpace, nu: f64, u: &[f64], z: &[f64], u_d: &AnalyticFunction) -> Result<f64> {
    check_len(space.num_boundary(), z.len())?;
    let tracking = squared_l2_distance(space.mesh(), u, u_d)?;
    let energy = dot(z, &crate::boundary::schur_apply(space, z)?);
    Ok(0.5 * tracking + 0.5 * nu * energy.max(0.0))
}

fn dual_norm(space: &FeSpace, r: &[f64]) -> Result<f64> {
    Ok(dot(r, &space.solve_boundary_mass(r)?).max(0.0).sqrt())
}

/// Scale of the right preconditioner `(ν Σ + α M_∂)⁻¹`: balances the
/// tracking part on constants, where `Σ` vanishes.
fn preconditioner_alpha(space: &FeSpace) -> f64 {
    let d = space.mesh().domain();
    d.area() / d.perimeter()
}

/// `T` in split coordinates `x = (c, w_1, …, w_{n−1})`, where `z = c·1 + w`
/// and `w_0` is fixed by `(w, 1)_Γ = 0`. The constant part of `z` never meets
/// `Σ`, so a large `ν` does not amplify its rounding.
struct SplitOperator<'a> {
    inner: ReducedOperator<'a>,
    /// `M_∂ 1`
    weights: Vec<f64>,
    /// `T 1 = Sᵀ M 1`
    t_one: Vec<f64>,
}

impl<'a> SplitOperator<'a> {
    fn new(space: &'a FeSpace, nu: f64) -> Result<Self> {
        let weights = space.boundary_mass().mul_vec(&vec![1.0; space.num_boundary()])?;
        let ones = vec![1.0; space.num_nodes()];
        let t_one = extension_transpose(space, &space.mass().mul_vec(&ones)?)?;
        Ok(Self { inner: ReducedOperator::new(space, nu), weights, t_one })
    }

    fn expand(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut w = x.to_vec();
        let rest: f64 = (1..w.len()).map(|k| self.weights[k] * w[k]).sum();
        w[0] = -rest / self.weights[0];
        (x[0], w)
    }

    fn compress(&self, z: &[f64]) -> Vec<f64> {
        let mean = dot(&self.weights, z) / self.weights.iter().sum::<f64>();
        let mut x: Vec<f64> = z.iter().map(|v| v - mean).collect();
        x[0] = mean;
        x
    }
}

impl LinearOperator for SplitOperator<'_> {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let (c, w) = self.expand(x);
        self.inner.apply(&w, y)?;
        for (y, t) in y.iter_mut().zip(&self.t_one) {
            *y += c * t;
        }
        Ok(())
    }
}

pub fn solve_control(problem: &ControlProblem, space: &FeSpace, options: &GmresOptions) -> Result<ControlSolution> {
    let nu = problem.nu;
    let u_f = solve_pf(space, &problem.f)?;
    let b_d = load_vector(space.mesh(), &problem.u_d);
    let g = rhs_functional(space, &u_f, &b_d)?;

    let op = SplitOperator::new(space, nu)?;
    let alpha = preconditioner_alpha(space);
    let precond = FnOperator::new(space.num_boundary(), |r: &[f64], out: &mut [f64]| {
        out.copy_from_slice(&op.compress(&robin_solve(space, nu, alpha, r)?));
        Ok(())
    });
    let sol = match gmres_preconditioned(&op, &precond, &g, options) {
        Ok(sol) => sol,
        Err(Error::NotConverged { solver, iterations, residual, best }) => {
            let (c, w) = op.expand(&best);
            let best = w.iter().map(|v| c + v).collect();
            return Err(Error::NotConverged { solver, iterations, residual, best });
        }
        Err(e) => return Err(e),
    };
    let (c, w) = op.expand(&sol.x);

    let (s_w, sigma_z) = extension_and_schur(space, &w)?;
    let u: Vec<f64> = s_w.iter().zip(&u_f).map(|(a, b)| c + a + b).collect();
    let z = space.restrict_boundary(&u);
    let mu = space.mass().mul_vec(&u)?;
    let source: Vec<f64> = mu.iter().zip(&b_d).map(|(m, b)| m - b).collect();
    let p = solve_zero_trace(space, &source)?;

    // ν Σ z + (M u − b_d)_B − A_BI p_I = 0
    let a_p = space.a_bi().mul_vec(&space.restrict_interior(&p))?;
    let residual: Vec<f64> =
        space.mesh().boundary_nodes().iter().enumerate().map(|(k, &i)| nu * sigma_z[k] + source[i] - a_p[k]).collect();
    let scale = dual_norm(space, &g)?;
    let abs = dual_norm(space, &residual)?;
    let optimality_residual = if scale > 0.0 { abs / scale } else { abs };

    let tracking = squared_l2_distance(space.mesh(), &u, &problem.u_d)?;
    let objective = 0.5 * tracking + 0.5 * nu * dot(&w, &sigma_z).max(0.0);

    Ok(ControlSolution {
        z,
        u,
        p,
        objective,
        gmres_iterations: sol.iterations,
        gmres_residual: sol.relative_residual,
        optimality_residual,
    })
}
