//! Dense reference computations shared by the integration tests and the
//! acceptance harness. Nothing here calls the library's solvers.

#![allow(dead_code)]

use dirctl_core::control::ControlProblem;
use dirctl_core::fem::{load_vector, FeSpace};
use dirctl_core::geometry::BuiltinDomain;
use dirctl_core::mesh::TriMesh;
use dirctl_core::sparse::SparseMatrix;
use nalgebra::{DMatrix, DVector};

pub fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let rows = a.to_dense();
    DMatrix::from_fn(a.n_rows(), a.n_cols(), |i, j| rows[i][j])
}

/// Dense Schur complement `A_BB − A_BI A_II⁻¹ A_IB` by LU.
pub fn dense_schur(space: &FeSpace) -> DMatrix<f64> {
    let a = dense(space.stiffness());
    let mesh = space.mesh();
    let (b, i) = (mesh.boundary_nodes(), mesh.interior_nodes());
    let a_bb = DMatrix::from_fn(b.len(), b.len(), |r, c| a[(b[r], b[c])]);
    let a_bi = DMatrix::from_fn(b.len(), i.len(), |r, c| a[(b[r], i[c])]);
    let a_ib = a_bi.transpose();
    let a_ii = DMatrix::from_fn(i.len(), i.len(), |r, c| a[(i[r], i[c])]);
    if i.is_empty() {
        return a_bb;
    }
    let x = a_ii.lu().solve(&a_ib).expect("A_II is regular");
    a_bb - a_bi * x
}

/// Nodal `(z, u, p)` from one LU solve of the coupled optimality system.
///
/// Unknowns are `u` on all nodes and `p` on the interior nodes:
///
/// ```text
/// (A u)_I                          = b_f,I
/// A_II p_I − (M u)_I               = −b_d,I
/// ν Σ u_B + (M u)_B − A_BI p_I     = b_d,B
/// ```
pub struct KktSolution {
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

pub fn dense_kkt(space: &FeSpace, problem: &ControlProblem) -> KktSolution {
    let mesh = space.mesh();
    let n = mesh.num_nodes();
    let (bnd, int) = (mesh.boundary_nodes(), mesh.interior_nodes());
    let ni = int.len();
    let a = dense(space.stiffness());
    let m = dense(space.mass());
    let sigma = dense_schur(space);
    let b_f = load_vector(mesh, &problem.f);
    let b_d = load_vector(mesh, &problem.u_d);

    let dim = n + ni;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (r, &i) in int.iter().enumerate() {
        for c in 0..n {
            k[(r, c)] = a[(i, c)];
            k[(ni + r, c)] = -m[(i, c)];
        }
        for (s, &j) in int.iter().enumerate() {
            k[(ni + r, n + s)] = a[(i, j)];
        }
        rhs[r] = b_f[i];
        rhs[ni + r] = -b_d[i];
    }
    for (r, &i) in bnd.iter().enumerate() {
        let row = 2 * ni + r;
        for c in 0..n {
            k[(row, c)] = m[(i, c)];
        }
        for (s, &j) in bnd.iter().enumerate() {
            k[(row, j)] += problem.nu * sigma[(r, s)];
        }
        for (s, &j) in int.iter().enumerate() {
            k[(row, n + s)] = -a[(i, j)];
        }
        rhs[row] = b_d[i];
    }
    let x = k.lu().solve(&rhs).expect("KKT matrix is regular");
    let u: Vec<f64> = x.rows(0, n).iter().copied().collect();
    let mut p = vec![0.0; n];
    for (s, &j) in int.iter().enumerate() {
        p[j] = x[n + s];
    }
    KktSolution { z: bnd.iter().map(|&i| u[i]).collect(), u, p }
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Finest uniform refinement of a builtin domain with at most `max_nodes` nodes.
pub fn largest_mesh(which: BuiltinDomain, max_nodes: usize) -> TriMesh {
    let mut mesh = TriMesh::initial(which);
    loop {
        let next = mesh.refine();
        if next.num_nodes() > max_nodes {
            return mesh;
        }
        mesh = next;
    }
}
