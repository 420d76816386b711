//! Linear solvers: Jacobi-preconditioned conjugate gradients and sparse
//! Cholesky for SPD matrices, restarted GMRES for matrix-free operators.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::sparse::{axpy, dot, norm2, SparseMatrix};

/// A square linear map given only through its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.n_cols(), x.len())?;
        self.mul_vec_into(x, y);
        Ok(())
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (self.f)(x, y)
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖`, or zero for a zero right-hand side.
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient(a: &SparseMatrix, b: &[f64], rel_tol: f64, max_iters: usize) -> Result<Solution> {
    let n = a.n_rows();
    check_len(n, b.len())?;
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(Solution { x, iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iters {
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(Error::NotConverged {
                solver: "conjugate gradient (matrix not positive definite)",
                iterations: it,
                residual: norm2(&r) / b_norm,
                best: x,
            });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let res = norm2(&r) / b_norm;
        if res <= rel_tol {
            return Ok(Solution { x, iterations: it, relative_residual: res });
        }
        for ((z, r), d) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *z = r * d;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (p, z) in p.iter_mut().zip(&z) {
            *p = z + beta * *p;
        }
    }
    let res = norm2(&r) / b_norm;
    Err(Error::NotConverged { solver: "conjugate gradient", iterations: max_iters, residual: res, best: x })
}

fn default_cg_cap(n: usize) -> usize {
    (10 * n).max(200)
}

/// Solves `A x = b` for SPD `A` with `‖A x - b‖ ≤ rel_tol ‖b‖`.
pub fn spd_solve(a: &SparseMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    conjugate_gradient(a, b, rel_tol, default_cg_cap(a.n_rows())).map(|s| s.x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmresOptions {
    pub rel_tol: f64,
    pub restart: usize,
    /// Cap on the total number of Krylov iterations across restarts.
    pub max_iters: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, restart: 50, max_iters: 500 }
    }
}

pub fn gmres(op: &dyn LinearOperator, b: &[f64], options: &GmresOptions) -> Result<Solution> {
    gmres_impl(op, None, b, options)
}

/// GMRES with right preconditioning: iterates on `A M y = b`, returns `x = M y`.
/// The reported residual is the true residual of `A x = b`.
pub fn gmres_preconditioned(
    op: &dyn LinearOperator,
    preconditioner: &dyn LinearOperator,
    b: &[f64],
    options: &GmresOptions,
) -> Result<Solution> {
    check_len(op.dim(), preconditioner.dim())?;
    gmres_impl(op, Some(preconditioner), b, options)
}

fn gmres_impl(
    op: &dyn LinearOperator,
    preconditioner: Option<&dyn LinearOperator>,
    b: &[f64],
    options: &GmresOptions,
) -> Result<Solution> {
    let n = op.dim();
    check_len(n, b.len())?;
    if options.restart == 0 {
        return Err(Error::invalid("GMRES restart length must be positive"));
    }
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(Solution { x, iterations: 0, relative_residual: 0.0 });
    }
    let tol = options.rel_tol * b_norm;
    let m = options.restart;
    let mut total = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];

    loop {
        op.apply(&x, &mut r)?;
        r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
        let beta = norm2(&r);
        if beta <= tol {
            return Ok(Solution { x, iterations: total, relative_residual: beta / b_norm });
        }
        if total >= options.max_iters {
            return Err(Error::NotConverged { solver: "GMRES", iterations: total, residual: beta / b_norm, best: x });
        }

        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut search: Vec<Vec<f64>> = Vec::new();
        // Columns of the Hessenberg matrix, already rotated.
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];

        for j in 0..m {
            let z = match preconditioner {
                Some(p) => {
                    let mut z = vec![0.0; n];
                    p.apply(&basis[j], &mut z)?;
                    z
                }
                None => basis[j].clone(),
            };
            op.apply(&z, &mut w)?;
            search.push(z);
            total += 1;

            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                axpy(-hij, v, &mut w);
                col[i] = hij;
            }
            let h_next = norm2(&w);
            col[j + 1] = h_next;

            for i in 0..j {
                let (a, b) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * b;
                col[i + 1] = -sn[i] * a + cs[i] * b;
            }
            let rho = col[j].hypot(col[j + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[j] / rho, col[j + 1] / rho) };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);

            let estimate = g[j + 1].abs();
            if estimate <= tol || h_next == 0.0 || total >= options.max_iters {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // Back substitution on the rotated upper triangle.
        let k = h.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                s -= h[jj][i] * yj;
            }
            y[i] = if h[i][i] == 0.0 { 0.0 } else { s / h[i][i] };
        }
        for (yi, zi) in y.iter().zip(&search) {
            axpy(*yi, zi, &mut x);
        }
    }
}

/// Caps the threads used inside sparse factorizations. `0` or `1` means sequential.
pub fn set_thread_count(threads: usize) {
    let par = match std::num::NonZeroUsize::new(threads) {
        Some(n) if n.get() > 1 => faer::Par::Rayon(n),
        _ => faer::Par::Seq,
    };
    faer::set_global_parallelism(par);
}

/// Which factorization backs repeated SPD solves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpdBackend {
    /// Sparse supernodal Cholesky with fill-reducing ordering.
    #[default]
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

/// A reusable solver for one SPD matrix.
pub trait SpdSolver: Send + Sync {
    fn dim(&self) -> usize;
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>>;
}

struct CholeskySolver {
    llt: Llt<usize, f64>,
    n: usize,
}

impl SpdSolver for CholeskySolver {
    fn dim(&self) -> usize {
        self.n
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut x = b.to_vec();
        if self.n > 0 {
            self.llt.solve_in_place(faer::ColMut::from_slice_mut(&mut x));
        }
        Ok(x)
    }
}

struct CgSolver {
    matrix: SparseMatrix,
    rel_tol: f64,
}

impl SpdSolver for CgSolver {
    fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        conjugate_gradient(&self.matrix, b, self.rel_tol, default_cg_cap(self.matrix.n_rows())).map(|s| s.x)
    }
}

struct EmptySolver;

impl SpdSolver for EmptySolver {
    fn dim(&self) -> usize {
        0
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(0, b.len())?;
        Ok(Vec::new())
    }
}

/// Sets up a solver for the symmetric positive definite `matrix`.
/// `cg_tol` is the relative residual target of the CG backend.
pub fn factorize(matrix: SparseMatrix, backend: SpdBackend, cg_tol: f64) -> Result<Box<dyn SpdSolver>> {
    if matrix.n_rows() != matrix.n_cols() {
        return Err(Error::invalid("SPD solver needs a square matrix"));
    }
    if matrix.n_rows() == 0 {
        return Ok(Box::new(EmptySolver));
    }
    match backend {
        SpdBackend::Cg => Ok(Box::new(CgSolver { matrix, rel_tol: cg_tol })),
        SpdBackend::Cholesky => {
            let n = matrix.n_rows();
            // CSR of a symmetric matrix is its own CSC.
            let symbolic = SymbolicSparseColMatRef::new_checked(n, n, matrix.row_offsets(), None, matrix.col_indices());
            let csc = SparseColMatRef::new(symbolic, matrix.values());
            let llt = csc.sp_cholesky(faer::Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?;
            Ok(Box::new(CholeskySolver { llt, n }))
        }
    }
}
