//! Boundary operators on P1 spaces: L2 projection onto traces, the
//! variational normal derivative, discrete harmonic and zero extensions, the
//! discrete Steklov–Poincaré operator and discrete trace norms.
//!
//! Operators returning "functional" vectors give the coefficients
//! `⟨F, φ_i⟩` against boundary hat functions; the others give function
//! coefficients (the Riesz representative with respect to `M_∂`).

use crate::error::{check_len, Result};
use crate::fem::{boundary_interpolant, boundary_load_vector, load_vector, nodal_interpolant, FeSpace};
use crate::functions::AnalyticFunction;
use crate::sparse::dot;

/// `Q_h g`: solves `M_∂ g_h = (g, φ_i)_Γ`.
pub fn l2_projection(space: &FeSpace, g: &AnalyticFunction) -> Result<Vec<f64>> {
    space.solve_boundary_mass(&boundary_load_vector(space.mesh(), g))
}

/// `(∇y_h, ∇φ_i) − (f, φ_i)` for boundary hat functions, where `load` is the
/// full load vector of `f`.
pub fn normal_derivative_functional(space: &FeSpace, y: &[f64], load: &[f64]) -> Result<Vec<f64>> {
    check_len(space.num_nodes(), y.len())?;
    check_len(space.num_nodes(), load.len())?;
    let ay = space.stiffness().mul_vec(y)?;
    Ok(space.mesh().boundary_nodes().iter().map(|&i| ay[i] - load[i]).collect())
}

/// `∂_n^h y_h` for the load vector of `f` (pass zeros for `f = 0`).
pub fn normal_derivative(space: &FeSpace, y: &[f64], load: &[f64]) -> Result<Vec<f64>> {
    space.solve_boundary_mass(&normal_derivative_functional(space, y, load)?)
}

/// Weighted boundary mean `(z, 1)_Γ / |Γ|`.
fn boundary_mean(space: &FeSpace, z: &[f64]) -> f64 {
    let m1 = space.boundary_mass().mul_vec(&vec![1.0; z.len()]).expect("sizes checked");
    dot(&m1, z) / m1.iter().sum::<f64>()
}

/// Harmonic extension of `z − mean(z)`, so the constant part never passes
/// through the solver.
fn extension_without_mean(space: &FeSpace, z: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_len(space.num_boundary(), z.len())?;
    let mean = boundary_mean(space, z);
    let w: Vec<f64> = z.iter().map(|v| v - mean).collect();
    let rhs: Vec<f64> = space.a_ib().mul_vec(&w)?.into_iter().map(|v| -v).collect();
    let interior = space.solve_interior(&rhs)?;
    Ok((space.combine(&interior, &w), mean))
}

/// `S_h z`: interior values solve `A_II u_I = −A_IB z`, trace is `z`.
pub fn harmonic_extension(space: &FeSpace, z: &[f64]) -> Result<Vec<f64>> {
    extension_and_schur(space, z).map(|(u, _)| u)
}

/// `E_h z`: trace `z`, zero at interior nodes.
pub fn zero_extension(space: &FeSpace, z: &[f64]) -> Result<Vec<f64>> {
    check_len(space.num_boundary(), z.len())?;
    Ok(space.combine(&vec![0.0; space.num_interior()], z))
}

/// `Ĩ_h y = I_h y + E_h(Q_h g − I_h g)`.
pub fn modified_interpolant(space: &FeSpace, y: &AnalyticFunction, g: &AnalyticFunction) -> Result<Vec<f64>> {
    let mut u = nodal_interpolant(space.mesh(), y);
    let qg = l2_projection(space, g)?;
    for (&i, &v) in space.mesh().boundary_nodes().iter().zip(&qg) {
        u[i] = v;
    }
    Ok(u)
}

/// `Σ z = (A S_h z)_B`, the Schur complement applied to `z`, as a functional.
pub fn schur_apply(space: &FeSpace, z: &[f64]) -> Result<Vec<f64>> {
    extension_and_schur(space, z).map(|(_, sz)| sz)
}

/// `(S_h z, Σ z)` from a single interior solve.
pub fn extension_and_schur(space: &FeSpace, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut u, mean) = extension_without_mean(space, z)?;
    let sigma = space.restrict_boundary(&space.stiffness().mul_vec(&u)?);
    for &i in space.mesh().interior_nodes() {
        u[i] += mean;
    }
    for (&i, &v) in space.mesh().boundary_nodes().iter().zip(z) {
        u[i] = v;
    }
    Ok((u, sigma))
}

/// `N_h z = ∂_n^h(S_h z)`.
pub fn steklov_poincare(space: &FeSpace, z: &[f64]) -> Result<Vec<f64>> {
    space.solve_boundary_mass(&schur_apply(space, z)?)
}

/// `|z|_{1/2,h} = ‖∇S_h z‖_{L2(Ω)}`.
pub fn h_half_seminorm(space: &FeSpace, z: &[f64]) -> Result<f64> {
    let (u, _) = extension_without_mean(space, z)?;
    space.h1_seminorm(&u)
}

/// Dual norm of `v` with respect to the `H^{1/2}` inner product
/// `⟨(N_h + I) z, w⟩`: `√(vᵀ M_∂ w)` with `(Σ + M_∂) w = M_∂ v`.
pub fn h_minus_half_norm(space: &FeSpace, v: &[f64]) -> Result<f64> {
    check_len(space.num_boundary(), v.len())?;
    let mv = space.boundary_mass().mul_vec(v)?;
    let w = robin_solve(space, 1.0, 1.0, &mv)?;
    Ok(dot(&mv, &w).max(0.0).sqrt())
}

/// Solves `(ν Σ + α M_∂) w = r` for a boundary functional `r`.
pub fn robin_solve(space: &FeSpace, nu: f64, alpha: f64, r: &[f64]) -> Result<Vec<f64>> {
    check_len(space.num_boundary(), r.len())?;
    let full = space.combine(&vec![0.0; space.num_interior()], r);
    let w = space.robin_solver(nu, alpha)?.solve(&full)?;
    Ok(space.restrict_boundary(&w))
}

/// `P_h`: zero-trace solution of `A_II u_I = load_I` for a full load vector.
pub fn solve_zero_trace(space: &FeSpace, load: &[f64]) -> Result<Vec<f64>> {
    check_len(space.num_nodes(), load.len())?;
    let interior = space.solve_interior(&space.restrict_interior(load))?;
    Ok(space.combine(&interior, &vec![0.0; space.num_boundary()]))
}

/// Discrete Dirichlet problem: `(∇y_h, ∇v_h) = load(v_h)` for `v_h ∈ V_0h`,
/// with trace `g`.
pub fn solve_dirichlet(space: &FeSpace, load: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let mut y = harmonic_extension(space, g)?;
    let p = solve_zero_trace(space, load)?;
    for &i in space.mesh().interior_nodes() {
        y[i] += p[i];
    }
    Ok(y)
}

/// `Sᵀ w = w_B − A_BI A_II⁻¹ w_I`, the transpose of the harmonic extension in
/// coefficient space, applied to a full functional `w`. Equals
/// `−M_∂ ∂_n^h(P_h w)` with `w` as load.
pub fn extension_transpose(space: &FeSpace, w: &[f64]) -> Result<Vec<f64>> {
    check_len(space.num_nodes(), w.len())?;
    let q = space.solve_interior(&space.restrict_interior(w))?;
    let aq = space.a_bi().mul_vec(&q)?;
    Ok(space.mesh().boundary_nodes().iter().zip(&aq).map(|(&i, a)| w[i] - a).collect())
}

/// Solves the Dirichlet problem with data `g = y|_Γ` projected by `Q_h` and
/// load `f`, returning `(y_h, ∂_n^h y_h)`.
pub fn solve_bvp(space: &FeSpace, f: &AnalyticFunction, g: &AnalyticFunction) -> Result<(Vec<f64>, Vec<f64>)> {
    let load = load_vector(space.mesh(), f);
    let gh = l2_projection(space, g)?;
    let y = solve_dirichlet(space, &load, &gh)?;
    let d = normal_derivative(space, &y, &load)?;
    Ok((y, d))
}

/// Nodal trace of an analytic function.
pub fn trace_interpolant(space: &FeSpace, g: &AnalyticFunction) -> Vec<f64> {
    boundary_interpolant(space.mesh(), g)
}
