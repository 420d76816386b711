//! P1 finite elements: assembly, quadrature, interpolation and norms.
//!
//! Field vectors hold one coefficient per mesh node. Boundary vectors hold one
//! coefficient per boundary node, in the counterclockwise order of
//! [`TriMesh::boundary_nodes`].

use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{check_len, Error, Result};
use crate::functions::AnalyticFunction;
use crate::geometry::{cross, dist, sub, Point};
use crate::mesh::TriMesh;
use crate::solvers::{factorize, SpdBackend, SpdSolver};
use crate::sparse::SparseMatrix;

fn checked_area(mesh: &TriMesh, t: usize) -> Result<f64> {
    let [a, b, c] = mesh.triangle_points(t);
    let area = 0.5 * cross(sub(b, a), sub(c, a));
    let scale = dist(a, b).max(dist(b, c)).max(dist(c, a));
    if area.is_nan() || area <= 1e-14 * scale * scale {
        return Err(Error::DegenerateTriangle { index: t, area });
    }
    Ok(area)
}

/// Zero matrix with the node-adjacency pattern of the mesh.
fn node_pattern(mesh: &TriMesh) -> SparseMatrix {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_nodes()];
    for tri in mesh.triangles() {
        for &i in tri {
            rows[i].extend_from_slice(tri);
        }
    }
    for row in &mut rows {
        row.sort_unstable();
        row.dedup();
    }
    SparseMatrix::from_pattern(mesh.num_nodes(), &rows)
}

/// Local stiffness matrix `∫ ∇φ_i · ∇φ_j` of one triangle.
pub fn local_stiffness(p: [Point; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * cross(sub(p[1], p[0]), sub(p[2], p[0]));
    let e = [sub(p[2], p[1]), sub(p[0], p[2]), sub(p[1], p[0])];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (e[i][0] * e[j][0] + e[i][1] * e[j][1]) / (4.0 * area);
        }
    }
    k
}

pub fn assemble_stiffness(mesh: &TriMesh) -> Result<SparseMatrix> {
    let mut a = node_pattern(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        checked_area(mesh, t)?;
        let k = local_stiffness(mesh.triangle_points(t));
        for i in 0..3 {
            for j in 0..3 {
                a.add_to(tri[i], tri[j], k[i][j]);
            }
        }
    }
    Ok(a)
}

pub fn assemble_mass(mesh: &TriMesh) -> Result<SparseMatrix> {
    let mut m = node_pattern(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = checked_area(mesh, t)? / 12.0;
        for i in 0..3 {
            for j in 0..3 {
                m.add_to(tri[i], tri[j], if i == j { 2.0 * w } else { w });
            }
        }
    }
    Ok(m)
}

/// Boundary mass matrix in boundary-node numbering.
pub fn assemble_boundary_mass(mesh: &TriMesh) -> Result<SparseMatrix> {
    let nb = mesh.num_boundary_nodes();
    let mut triplets = Vec::with_capacity(4 * mesh.boundary_edges().len());
    for (k, edge) in mesh.boundary_edges().iter().enumerate() {
        let [a, b] = edge.nodes;
        let len = dist(mesh.nodes()[a], mesh.nodes()[b]);
        if len.is_nan() || len <= 0.0 {
            return Err(Error::invalid(format!("boundary edge {k} has zero length")));
        }
        let (ia, ib) = (mesh.boundary_index(a).unwrap(), mesh.boundary_index(b).unwrap());
        let w = len / 6.0;
        triplets.extend([(ia, ia, 2.0 * w), (ib, ib, 2.0 * w), (ia, ib, w), (ib, ia, w)]);
    }
    SparseMatrix::from_triplets(nb, nb, &triplets)
}

/// `∫ f φ_i` with the three-point edge-midpoint rule (exact for quadratics).
pub fn load_vector(mesh: &TriMesh, f: &AnalyticFunction) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let w = mesh.triangle_area(t) / 3.0;
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let mid = [0.5 * (p[i][0] + p[j][0]), 0.5 * (p[i][1] + p[j][1])];
            let v = 0.5 * w * f.eval(mid);
            b[tri[i]] += v;
            b[tri[j]] += v;
        }
    }
    b
}

const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// `∫_Γ g φ_i` over boundary nodes, with 2-point Gauss per edge. The closure
/// receives the point and the tag of the polygon edge it lies on.
pub fn boundary_load_vector_with(mesh: &TriMesh, g: impl Fn(Point, usize) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_boundary_nodes()];
    for edge in mesh.boundary_edges() {
        let [a, c] = edge.nodes;
        let (pa, pc) = (mesh.nodes()[a], mesh.nodes()[c]);
        let half = 0.5 * dist(pa, pc);
        let (ia, ic) = (mesh.boundary_index(a).unwrap(), mesh.boundary_index(c).unwrap());
        for s in GAUSS2 {
            let p = [pa[0] + s * (pc[0] - pa[0]), pa[1] + s * (pc[1] - pa[1])];
            let v = half * g(p, edge.tag);
            b[ia] += (1.0 - s) * v;
            b[ic] += s * v;
        }
    }
    b
}

pub fn boundary_load_vector(mesh: &TriMesh, g: &AnalyticFunction) -> Vec<f64> {
    boundary_load_vector_with(mesh, |p, _| g.eval(p))
}

pub fn nodal_interpolant(mesh: &TriMesh, v: &AnalyticFunction) -> Vec<f64> {
    mesh.nodes().iter().map(|&p| v.eval(p)).collect()
}

pub fn boundary_interpolant(mesh: &TriMesh, v: &AnalyticFunction) -> Vec<f64> {
    mesh.boundary_nodes().iter().map(|&i| v.eval(mesh.nodes()[i])).collect()
}

// Radon's 7-point rule, exact for degree 5; barycentric points and weights
// summing to one.
fn radon7() -> [([f64; 3], f64); 7] {
    let s = 15f64.sqrt();
    let (a1, a2) = ((6.0 - s) / 21.0, (6.0 + s) / 21.0);
    let (w1, w2) = ((155.0 - s) / 1200.0, (155.0 + s) / 1200.0);
    let (b1, b2) = (1.0 - 2.0 * a1, 1.0 - 2.0 * a2);
    [
        ([1.0 / 3.0; 3], 9.0 / 40.0),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

/// `‖u_h − u‖_{L2(Ω)}` by 7-point quadrature per triangle.
pub fn l2_error(mesh: &TriMesh, uh: &[f64], exact: &AnalyticFunction) -> Result<f64> {
    check_len(mesh.num_nodes(), uh.len())?;
    let rule = radon7();
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        for (lam, w) in rule {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let vh = lam[0] * uh[tri[0]] + lam[1] * uh[tri[1]] + lam[2] * uh[tri[2]];
            let e = vh - exact.eval(x);
            sum += w * area * e * e;
        }
    }
    Ok(sum.sqrt())
}

/// `|u_h − u|_{H1(Ω)}` by 7-point quadrature; needs the exact gradient.
pub fn h1_error(mesh: &TriMesh, uh: &[f64], exact: &AnalyticFunction) -> Result<f64> {
    check_len(mesh.num_nodes(), uh.len())?;
    if !exact.has_gradient() {
        return Err(Error::invalid(format!("function `{}` has no gradient", exact.label())));
    }
    let rule = radon7();
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        let grad = p1_gradient(p, [uh[tri[0]], uh[tri[1]], uh[tri[2]]]);
        for (lam, w) in rule {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let g = exact.gradient(x).unwrap();
            sum += w * area * ((grad[0] - g[0]).powi(2) + (grad[1] - g[1]).powi(2));
        }
    }
    Ok(sum.sqrt())
}

/// Gradient of the linear function with the given vertex values.
pub fn p1_gradient(p: [Point; 3], v: [f64; 3]) -> Point {
    let area2 = cross(sub(p[1], p[0]), sub(p[2], p[0]));
    let e = [sub(p[2], p[1]), sub(p[0], p[2]), sub(p[1], p[0])];
    // ∇φ_i is the inward normal of the opposite edge scaled by 1/(2|T|).
    let mut g = [0.0, 0.0];
    for i in 0..3 {
        g[0] += v[i] * -e[i][1] / area2;
        g[1] += v[i] * e[i][0] / area2;
    }
    g
}

/// `½‖u_h − u‖²_{L2(Ω)}`-type integrand `∫ (u_h − u)²` by the midpoint rule,
/// consistent with [`load_vector`].
pub fn squared_l2_distance(mesh: &TriMesh, uh: &[f64], u: &AnalyticFunction) -> Result<f64> {
    check_len(mesh.num_nodes(), uh.len())?;
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let w = mesh.triangle_area(t) / 3.0;
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let mid = [0.5 * (p[i][0] + p[j][0]), 0.5 * (p[i][1] + p[j][1])];
            let e = 0.5 * (uh[tri[i]] + uh[tri[j]]) - u.eval(mid);
            sum += w * e * e;
        }
    }
    Ok(sum)
}

/// Settings for the SPD solves done inside an [`FeSpace`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub backend: SpdBackend,
    pub cg_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { backend: SpdBackend::Cholesky, cg_tol: 1e-12 }
    }
}

type RobinCache = Mutex<Vec<((u64, u64), Arc<dyn SpdSolver>)>>;

/// A mesh with its assembled matrices and cached factorizations.
pub struct FeSpace {
    mesh: Arc<TriMesh>,
    settings: SolverSettings,
    stiffness: SparseMatrix,
    mass: SparseMatrix,
    boundary_mass: SparseMatrix,
    /// `A_II`, `A_IB`, `A_BI` in interior/boundary numbering.
    a_ii: SparseMatrix,
    a_ib: SparseMatrix,
    a_bi: SparseMatrix,
    interior_solver: OnceLock<Box<dyn SpdSolver>>,
    boundary_mass_solver: OnceLock<Box<dyn SpdSolver>>,
    robin: RobinCache,
}

impl FeSpace {
    pub fn new(mesh: impl Into<Arc<TriMesh>>) -> Result<Self> {
        Self::with_settings(mesh, SolverSettings::default())
    }

    pub fn with_settings(mesh: impl Into<Arc<TriMesh>>, settings: SolverSettings) -> Result<Self> {
        let mesh = mesh.into();
        let stiffness = assemble_stiffness(&mesh)?;
        let mass = assemble_mass(&mesh)?;
        let boundary_mass = assemble_boundary_mass(&mesh)?;
        let n = mesh.num_nodes();
        let mut interior_map = vec![None; n];
        for (k, &i) in mesh.interior_nodes().iter().enumerate() {
            interior_map[i] = Some(k);
        }
        let boundary_map: Vec<Option<usize>> = (0..n).map(|i| mesh.boundary_index(i)).collect();
        let (ni, nb) = (mesh.num_interior_nodes(), mesh.num_boundary_nodes());
        let a_ii = stiffness.submatrix(mesh.interior_nodes(), &interior_map, ni);
        let a_ib = stiffness.submatrix(mesh.interior_nodes(), &boundary_map, nb);
        let a_bi = stiffness.submatrix(mesh.boundary_nodes(), &interior_map, ni);
        Ok(Self {
            mesh,
            settings,
            stiffness,
            mass,
            boundary_mass,
            a_ii,
            a_ib,
            a_bi,
            interior_solver: OnceLock::new(),
            boundary_mass_solver: OnceLock::new(),
            robin: Mutex::new(Vec::new()),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn settings(&self) -> SolverSettings {
        self.settings
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn boundary_mass(&self) -> &SparseMatrix {
        &self.boundary_mass
    }

    pub fn a_ii(&self) -> &SparseMatrix {
        &self.a_ii
    }

    pub fn a_ib(&self) -> &SparseMatrix {
        &self.a_ib
    }

    pub fn a_bi(&self) -> &SparseMatrix {
        &self.a_bi
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn num_boundary(&self) -> usize {
        self.mesh.num_boundary_nodes()
    }

    pub fn num_interior(&self) -> usize {
        self.mesh.num_interior_nodes()
    }

    fn cached<'a>(
        &self,
        cell: &'a OnceLock<Box<dyn SpdSolver>>,
        build: impl FnOnce() -> SparseMatrix,
    ) -> Result<&'a dyn SpdSolver> {
        if let Some(s) = cell.get() {
            return Ok(s.as_ref());
        }
        let solver = factorize(build(), self.settings.backend, self.settings.cg_tol)?;
        Ok(cell.get_or_init(|| solver).as_ref())
    }

    /// Solves `A_II x = b` in interior numbering.
    pub fn solve_interior(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.cached(&self.interior_solver, || self.a_ii.clone())?.solve(b)
    }

    /// Solves `M_∂ x = b` in boundary numbering.
    pub fn solve_boundary_mass(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.cached(&self.boundary_mass_solver, || self.boundary_mass.clone())?.solve(b)
    }

    /// Solver for `ν A + α E M_∂ Eᵀ`, where `E` embeds boundary numbering into
    /// node numbering. Eliminating the interior gives `ν Σ + α M_∂` on the
    /// boundary, with `Σ` the Schur complement of `A`.
    pub fn robin_solver(&self, nu: f64, alpha: f64) -> Result<Arc<dyn SpdSolver>> {
        let key = (nu.to_bits(), alpha.to_bits());
        let mut cache = self.robin.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((_, s)) = cache.iter().find(|(k, _)| *k == key) {
            return Ok(s.clone());
        }
        let n = self.num_nodes();
        let bn = self.mesh.boundary_nodes();
        let mut triplets = Vec::with_capacity(self.boundary_mass.nnz());
        for r in 0..self.boundary_mass.n_rows() {
            for (c, v) in self.boundary_mass.row(r) {
                triplets.push((bn[r], bn[c], v));
            }
        }
        let embedded = SparseMatrix::from_triplets(n, n, &triplets)?;
        let mut a = self.stiffness.clone();
        a.scale(nu);
        let matrix = a.add_scaled(alpha, &embedded)?;
        let solver: Arc<dyn SpdSolver> = factorize(matrix, self.settings.backend, self.settings.cg_tol)?.into();
        cache.push((key, solver.clone()));
        Ok(solver)
    }

    pub fn restrict_boundary(&self, u: &[f64]) -> Vec<f64> {
        self.mesh.boundary_nodes().iter().map(|&i| u[i]).collect()
    }

    pub fn restrict_interior(&self, u: &[f64]) -> Vec<f64> {
        self.mesh.interior_nodes().iter().map(|&i| u[i]).collect()
    }

    /// Node vector from interior and boundary parts.
    pub fn combine(&self, interior: &[f64], boundary: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.num_nodes()];
        for (&i, &v) in self.mesh.interior_nodes().iter().zip(interior) {
            u[i] = v;
        }
        for (&i, &v) in self.mesh.boundary_nodes().iter().zip(boundary) {
            u[i] = v;
        }
        u
    }

    pub fn h1_seminorm(&self, u: &[f64]) -> Result<f64> {
        check_len(self.num_nodes(), u.len())?;
        Ok(self.stiffness.quadratic_form(u).max(0.0).sqrt())
    }

    pub fn l2_norm(&self, u: &[f64]) -> Result<f64> {
        check_len(self.num_nodes(), u.len())?;
        Ok(self.mass.quadratic_form(u).max(0.0).sqrt())
    }

    pub fn boundary_l2_norm(&self, z: &[f64]) -> Result<f64> {
        check_len(self.num_boundary(), z.len())?;
        Ok(self.boundary_mass.quadratic_form(z).max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BuiltinDomain, PolygonalDomain};

    fn unit_triangle() -> TriMesh {
        let d = PolygonalDomain::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        TriMesh::from_parts(d, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    // Independent oracle: dense assembly from explicit basis-function gradients
    // computed by solving for the affine coefficients of each hat function.
    fn dense_stiffness(mesh: &TriMesh) -> Vec<Vec<f64>> {
        let n = mesh.num_nodes();
        let mut a = vec![vec![0.0; n]; n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let p = mesh.triangle_points(t);
            let m = nalgebra::Matrix3::new(1.0, p[0][0], p[0][1], 1.0, p[1][0], p[1][1], 1.0, p[2][0], p[2][1]);
            let inv = m.try_inverse().unwrap();
            let area = 0.5 * m.determinant().abs();
            for i in 0..3 {
                for j in 0..3 {
                    let gi = (inv[(1, i)], inv[(2, i)]);
                    let gj = (inv[(1, j)], inv[(2, j)]);
                    a[tri[i]][tri[j]] += area * (gi.0 * gj.0 + gi.1 * gj.1);
                }
            }
        }
        a
    }

    #[test]
    fn unit_triangle_local_matrices() {
        let mesh = unit_triangle();
        let a = assemble_stiffness(&mesh).unwrap().to_dense();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
        let m = assemble_mass(&mesh).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((m[i][j] - e).abs() < 1e-15);
            }
        }
        let mb = assemble_boundary_mass(&mesh).unwrap();
        let total: f64 = mb.values().iter().sum();
        assert!((total - (2.0 + 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn stiffness_matches_dense_oracle() {
        for which in BuiltinDomain::ALL {
            let mesh = TriMesh::initial(which).refine_n(3);
            let a = assemble_stiffness(&mesh).unwrap();
            let d = dense_stiffness(&mesh);
            let dense = a.to_dense();
            for i in 0..mesh.num_nodes() {
                for j in 0..mesh.num_nodes() {
                    assert!((dense[i][j] - d[i][j]).abs() < 1e-14);
                }
            }
            assert!(a.asymmetry() < 1e-14 * a.max_abs());
            let ones = vec![1.0; mesh.num_nodes()];
            assert!(a.mul_vec(&ones).unwrap().iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn mass_identities() {
        for which in BuiltinDomain::ALL {
            let mesh = TriMesh::initial(which).refine_n(4);
            let dom = mesh.domain().clone();
            let m = assemble_mass(&mesh).unwrap();
            let ones = vec![1.0; mesh.num_nodes()];
            assert!((m.quadratic_form(&ones) - dom.area()).abs() < 1e-13);
            let mb = assemble_boundary_mass(&mesh).unwrap();
            let ob = vec![1.0; mesh.num_boundary_nodes()];
            assert!((mb.quadratic_form(&ob) - dom.perimeter()).abs() < 1e-13);

            let b = load_vector(&mesh, &AnalyticFunction::constant(1.0));
            let m1 = m.mul_vec(&ones).unwrap();
            assert!(b.iter().zip(&m1).all(|(x, y)| (x - y).abs() < 1e-15));
            let bb = boundary_load_vector(&mesh, &AnalyticFunction::constant(1.0));
            let mb1 = mb.mul_vec(&ob).unwrap();
            assert!(bb.iter().zip(&mb1).all(|(x, y)| (x - y).abs() < 1e-15));
        }
    }

    #[test]
    fn load_vectors() {
        let mesh = TriMesh::initial(BuiltinDomain::Omega90);
        let f = AnalyticFunction::parse("x + y").unwrap();
        let b = load_vector(&mesh, &f);
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(load_vector(&mesh, &AnalyticFunction::zero()).iter().all(|&v| v == 0.0));

        // g = x on the bottom edge at h = 1/2: nodes (0,0), (1/2,0), (1,0).
        let mesh = mesh.refine_n(2);
        let g = AnalyticFunction::parse("x").unwrap();
        let bb = boundary_load_vector_with(&mesh, |p, tag| if tag == 0 { g.eval(p) } else { 0.0 });
        let at = |x: f64| {
            let node = mesh.nodes().iter().position(|q| *q == [x, 0.0]).unwrap();
            bb[mesh.boundary_index(node).unwrap()]
        };
        // ∫_0^{1/2} x (1 - 2x) dx, ∫_0^1 x φ_mid, ∫_{1/2}^1 x (2x - 1) dx
        assert!((at(0.0) - 1.0 / 24.0).abs() < 1e-15);
        assert!((at(0.5) - 1.0 / 4.0).abs() < 1e-15);
        assert!((at(1.0) - 5.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn norms_of_simple_fields() {
        let mesh = TriMesh::initial(BuiltinDomain::Omega90).refine_n(2);
        let space = FeSpace::new(mesh.clone()).unwrap();
        let u = nodal_interpolant(&mesh, &AnalyticFunction::parse("x + y").unwrap());
        assert!((space.h1_seminorm(&u).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let c = vec![-3.0; mesh.num_nodes()];
        assert!((space.l2_norm(&c).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(space.boundary_l2_norm(&vec![0.0; mesh.num_boundary_nodes()]).unwrap(), 0.0);

        let x2 = nodal_interpolant(&mesh, &AnalyticFunction::parse("x^2").unwrap());
        for (p, v) in mesh.nodes().iter().zip(&x2) {
            assert_eq!(*v, p[0] * p[0]);
        }
    }

    #[test]
    fn quadratic_form_is_elementwise_energy() {
        let mesh = TriMesh::initial(BuiltinDomain::Omega270).refine_n(5);
        let a = assemble_stiffness(&mesh).unwrap();
        let u: Vec<f64> = mesh.nodes().iter().map(|p| (3.0 * p[0]).sin() * p[1].exp()).collect();
        let mut energy = 0.0;
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let g = p1_gradient(mesh.triangle_points(t), [u[tri[0]], u[tri[1]], u[tri[2]]]);
            energy += mesh.triangle_area(t) * (g[0] * g[0] + g[1] * g[1]);
        }
        assert!((a.quadratic_form(&u) - energy).abs() < 1e-13 * energy.max(1.0));
    }

    #[test]
    fn quadrature_errors_vanish_for_linears() {
        let mesh = TriMesh::initial(BuiltinDomain::Omega135).refine_n(4);
        let f = AnalyticFunction::parse("2*x - y + 1").unwrap();
        let u = nodal_interpolant(&mesh, &f);
        assert!(l2_error(&mesh, &u, &f).unwrap() < 1e-14);
        assert!(h1_error(&mesh, &u, &f).unwrap() < 1e-13);
        assert!(squared_l2_distance(&mesh, &u, &f).unwrap() < 1e-28);
        // ∫_{(0,1)^2} (x+y)^2 = 7/6
        let sq = TriMesh::initial(BuiltinDomain::Omega90).refine_n(2);
        let zero = vec![0.0; sq.num_nodes()];
        let d = squared_l2_distance(&sq, &zero, &AnalyticFunction::parse("x+y").unwrap()).unwrap();
        assert!((d - 7.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn mass_matrices_are_positive_definite() {
        let mesh = TriMesh::initial(BuiltinDomain::Omega270).refine_n(3);
        for m in [assemble_mass(&mesh).unwrap(), assemble_boundary_mass(&mesh).unwrap()] {
            let n = m.n_rows();
            let d = nalgebra::DMatrix::from_fn(n, n, |i, j| m.get(i, j));
            let min = d.symmetric_eigenvalues().min();
            assert!(min > 0.0);
        }
    }

    #[test]
    fn sliver_triangle_rejected() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1e-15]];
        let built = PolygonalDomain::new(pts.clone())
            .and_then(|d| TriMesh::from_parts(d, pts, vec![[0, 1, 2]]))
            .and_then(|m| assemble_stiffness(&m));
        assert!(matches!(built, Err(Error::DegenerateTriangle { .. }) | Err(Error::InvalidInput(_))));
    }
}
