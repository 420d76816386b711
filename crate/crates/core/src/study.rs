//! Convergence studies on nested mesh hierarchies.
//!
//! Row `k` of a table is the mesh after `2k + 2` uniform bisection passes of
//! the initial mesh, so `h·√2 = 2^-k` on the builtin domains and `h` halves
//! from row to row.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::boundary::{h_half_seminorm, h_minus_half_norm, solve_bvp};
use crate::control::{solve_control, ControlProblem};
use crate::error::{Error, Result};
use crate::fem::{boundary_load_vector_with, h1_error, l2_error, FeSpace, SolverSettings};
use crate::functions::AnalyticFunction;
use crate::geometry::{BuiltinDomain, PolygonalDomain};
use crate::mesh::TriMesh;
use crate::solvers::GmresOptions;

/// Errors at or below this level are treated as exact; their EOC is undefined.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Bisection passes for table row `k`.
pub fn passes_for_row(row: i32) -> Result<usize> {
    if row < -1 {
        return Err(Error::invalid(format!("row {row} is coarser than the initial mesh")));
    }
    Ok((2 * row + 2) as usize)
}

/// Where the initial mesh comes from.
#[derive(Clone, Debug)]
pub enum DomainChoice {
    Builtin(BuiltinDomain),
    Custom(PolygonalDomain),
}

impl DomainChoice {
    pub fn initial_mesh(&self) -> Result<TriMesh> {
        match self {
            DomainChoice::Builtin(b) => Ok(TriMesh::initial(*b)),
            DomainChoice::Custom(d) => TriMesh::triangulate(d),
        }
    }

    pub fn domain(&self) -> PolygonalDomain {
        match self {
            DomainChoice::Builtin(b) => b.domain(),
            DomainChoice::Custom(d) => d.clone(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DomainChoice::Builtin(b) => b.name().to_string(),
            DomainChoice::Custom(_) => "custom".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum StudyProblem {
    /// Optimal control, errors against a reference solution.
    Control(ControlProblem),
    /// Dirichlet problem with known solution `y` and load `f = −Δy`.
    Bvp { solution: AnalyticFunction, f: AnalyticFunction },
}

impl StudyProblem {
    pub fn metric_names(&self) -> &'static [&'static str] {
        match self {
            StudyProblem::Control(_) => &["err_H1_state", "err_L2_control", "err_H12_control"],
            StudyProblem::Bvp { .. } => &["err_Hm12_normal", "err_L2_field", "err_H1_field", "bound_Hm12_projection"],
        }
    }

    /// Rates predicted for singular data on a domain with exponent `λ̄`.
    pub fn theory(&self, lambda_bar: f64) -> Vec<f64> {
        match self {
            StudyProblem::Control(_) => {
                vec![lambda_bar.min(1.0), lambda_bar.min(1.5) + 0.5, lambda_bar.min(1.5)]
            }
            StudyProblem::Bvp { .. } => {
                vec![lambda_bar.min(1.5), (2.0 * lambda_bar).min(2.0), lambda_bar.min(1.0), lambda_bar.min(1.5)]
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub domain: DomainChoice,
    pub first_row: i32,
    pub last_row: i32,
    /// Rows between the finest reported row and the reference (control only).
    pub reference_offset: usize,
    pub problem: StudyProblem,
    /// Subset of [`StudyProblem::metric_names`]; empty means all.
    pub metrics: Vec<String>,
    pub gmres: GmresOptions,
    pub solver: SolverSettings,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.last_row < self.first_row {
            return Err(Error::Config(format!("empty level range [{}, {}]", self.first_row, self.last_row)));
        }
        passes_for_row(self.first_row)?;
        if matches!(self.problem, StudyProblem::Control(_)) && self.reference_offset < 1 {
            return Err(Error::Config("reference_offset must be at least 1".into()));
        }
        let known = self.problem.metric_names();
        if let Some(bad) = self.metrics.iter().find(|m| !known.contains(&m.as_str())) {
            return Err(Error::Config(format!("unknown metric `{bad}` (expected one of {})", known.join(", "))));
        }
        if let StudyProblem::Bvp { solution, .. } = &self.problem {
            if !solution.has_gradient() {
                return Err(Error::Config(format!("solution `{}` has no gradient", solution.label())));
            }
        }
        Ok(())
    }

    fn selected(&self) -> Vec<usize> {
        let names = self.problem.metric_names();
        (0..names.len()).filter(|&k| self.metrics.is_empty() || self.metrics.iter().any(|m| m == names[k])).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub h_sqrt2: f64,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub errors: Vec<f64>,
    pub eoc: Vec<Option<f64>>,
}

/// Solve statistics of one mesh, for logs and summaries.
#[derive(Clone, Debug, Serialize)]
pub struct LevelStats {
    pub passes: usize,
    pub nodes: usize,
    pub gmres_iterations: Option<usize>,
    pub optimality_residual: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub metric_names: Vec<String>,
    pub rows: Vec<TableRow>,
    pub theory: Vec<f64>,
    pub levels: Vec<LevelStats>,
}

/// `log2(e_k / e_{k+1})`; the first entry and entries touching an error at
/// or below [`NOISE_FLOOR`] are `None`.
pub fn compute_eoc(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; errors.len()];
    for k in 1..errors.len() {
        let (a, b) = (errors[k - 1], errors[k]);
        if a > NOISE_FLOOR && b > NOISE_FLOOR && a.is_finite() && b.is_finite() {
            out[k] = Some((a / b).log2());
        }
    }
    out
}

/// Average rate over the last `rows` rows: `log2(e_first / e_last) / (rows − 1)`.
pub fn trailing_rate(errors: &[f64], rows: usize) -> Option<f64> {
    if rows < 2 || errors.len() < rows {
        return None;
    }
    let (a, b) = (errors[errors.len() - rows], errors[errors.len() - 1]);
    (a > NOISE_FLOOR && b > NOISE_FLOOR).then(|| (a / b).log2() / (rows - 1) as f64)
}

fn format_h(h_sqrt2: f64) -> String {
    let k = -h_sqrt2.log2();
    if (k - k.round()).abs() < 1e-9 {
        match k.round() as i64 {
            0 => "1".to_string(),
            k if k > 0 => format!("2^-{k}"),
            k => format!("2^{}", -k),
        }
    } else {
        format!("{h_sqrt2:.4e}")
    }
}

impl ConvergenceTable {
    pub fn column(&self, metric: &str) -> Option<Vec<f64>> {
        let k = self.metric_names.iter().position(|m| m == metric)?;
        Some(self.rows.iter().map(|r| r.errors[k]).collect())
    }

    pub fn final_eoc(&self, metric: &str) -> Option<f64> {
        let k = self.metric_names.iter().position(|m| m == metric)?;
        self.rows.last()?.eoc[k]
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["h_sqrt2".to_string(), "n_interior".into(), "n_boundary".into()];
        for m in &self.metric_names {
            h.push(m.clone());
            h.push("eoc".into());
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header().join(",");
        s.push('\n');
        for r in &self.rows {
            let mut cells = vec![format!("{:e}", r.h_sqrt2), r.n_interior.to_string(), r.n_boundary.to_string()];
            for (e, eoc) in r.errors.iter().zip(&r.eoc) {
                cells.push(format!("{e:.6e}"));
                cells.push(eoc.map_or(String::new(), |v| format!("{v:.4}")));
            }
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        let mut cells = vec!["theory".to_string(), String::new(), String::new()];
        for t in &self.theory {
            cells.push(String::new());
            cells.push(format!("{t:.4}"));
        }
        s.push_str(&cells.join(","));
        s.push('\n');
        s
    }

    /// Aligned Markdown table; rates in parentheses, undefined rates as `—`.
    pub fn to_markdown(&self) -> String {
        let header = self.header();
        let mut body: Vec<Vec<String>> = Vec::new();
        for r in &self.rows {
            let mut cells = vec![format_h(r.h_sqrt2), r.n_interior.to_string(), r.n_boundary.to_string()];
            for (e, eoc) in r.errors.iter().zip(&r.eoc) {
                cells.push(format!("{e:.2e}"));
                cells.push(eoc.map_or("—".to_string(), |v| format!("({v:.2})")));
            }
            body.push(cells);
        }
        let mut theory = vec!["theory".to_string(), String::new(), String::new()];
        for t in &self.theory {
            theory.push(String::new());
            theory.push(format!("({t:.2})"));
        }
        body.push(theory);

        let widths: Vec<usize> = (0..header.len())
            .map(|c| body.iter().map(|r| r[c].chars().count()).chain([header[c].len()]).max().unwrap())
            .collect();
        let line = |cells: &[String]| {
            let mut s = String::from("|");
            for (c, w) in cells.iter().zip(&widths) {
                write!(s, " {c:>w$} |", w = *w).unwrap();
            }
            s.push('\n');
            s
        };
        let mut s = line(&header);
        s.push('|');
        for w in &widths {
            write!(s, "{}:|", "-".repeat(w + 1)).unwrap();
        }
        s.push('\n');
        for r in &body {
            s.push_str(&line(r));
        }
        s
    }
}

/// Meshes at the requested pass counts, refined in one nested sequence.
fn hierarchy(initial: TriMesh, passes: &[usize]) -> Vec<Arc<TriMesh>> {
    let mut out = Vec::with_capacity(passes.len());
    let mut mesh = initial;
    let mut done = 0;
    for &p in passes {
        mesh = mesh.refine_n(p - done);
        done = p;
        out.push(Arc::new(mesh.clone()));
    }
    out
}

pub fn run_study(config: &StudyConfig, log: &mut dyn FnMut(&str)) -> Result<ConvergenceTable> {
    config.validate()?;
    match &config.problem {
        StudyProblem::Control(problem) => run_control(config, problem, log),
        StudyProblem::Bvp { solution, f } => run_bvp(config, solution, f, log),
    }
}

pub fn run_control_study(config: &StudyConfig) -> Result<ConvergenceTable> {
    run_study(config, &mut |_| {})
}

pub fn run_bvp_study(config: &StudyConfig) -> Result<ConvergenceTable> {
    run_study(config, &mut |_| {})
}

fn finish(config: &StudyConfig, rows: Vec<TableRow>, levels: Vec<LevelStats>) -> ConvergenceTable {
    let names = config.problem.metric_names();
    let selected = config.selected();
    let all_theory = config.problem.theory(config.domain.domain().lambda_bar());
    let columns: Vec<Vec<f64>> = (0..names.len()).map(|k| rows.iter().map(|r| r.errors[k]).collect()).collect();
    let eocs: Vec<Vec<Option<f64>>> = columns.iter().map(|c| compute_eoc(c)).collect();
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| TableRow {
            errors: selected.iter().map(|&k| r.errors[k]).collect(),
            eoc: selected.iter().map(|&k| eocs[k][i]).collect(),
            ..r
        })
        .collect();
    ConvergenceTable {
        metric_names: selected.iter().map(|&k| names[k].to_string()).collect(),
        rows,
        theory: selected.iter().map(|&k| all_theory[k]).collect(),
        levels,
    }
}

fn row_shell(mesh: &TriMesh) -> TableRow {
    TableRow {
        h_sqrt2: mesh.h() * std::f64::consts::SQRT_2,
        n_interior: mesh.num_interior_nodes(),
        n_boundary: mesh.num_boundary_nodes(),
        errors: Vec::new(),
        eoc: Vec::new(),
    }
}

fn run_control(config: &StudyConfig, problem: &ControlProblem, log: &mut dyn FnMut(&str)) -> Result<ConvergenceTable> {
    let rows: Vec<i32> = (config.first_row..=config.last_row).collect();
    let mut passes = rows.iter().map(|&r| passes_for_row(r)).collect::<Result<Vec<_>>>()?;
    let reference_row = config.last_row + config.reference_offset as i32;
    passes.push(passes_for_row(reference_row)?);
    let meshes = hierarchy(config.domain.initial_mesh()?, &passes);

    let mut levels = Vec::new();
    let mut solve = |mesh: &Arc<TriMesh>| -> Result<(FeSpace, Vec<f64>)> {
        let start = Instant::now();
        let space = FeSpace::with_settings(mesh.clone(), config.solver)?;
        let sol = solve_control(problem, &space, &config.gmres).inspect_err(|e| {
            log(&format!("level {} passes, {} nodes: {e}", mesh.level(), mesh.num_nodes()));
        })?;
        let stats = LevelStats {
            passes: mesh.level(),
            nodes: mesh.num_nodes(),
            gmres_iterations: Some(sol.gmres_iterations),
            optimality_residual: Some(sol.optimality_residual),
            seconds: start.elapsed().as_secs_f64(),
        };
        log(&format!(
            "level {:>2} passes, {:>7} nodes: {} GMRES iterations, optimality residual {:.1e}, {:.2} s",
            stats.passes, stats.nodes, sol.gmres_iterations, sol.optimality_residual, stats.seconds
        ));
        levels.push(stats);
        Ok((space, sol.u))
    };

    let (reference, reference_meshes) = meshes.split_last().expect("at least one row");
    let (ref_space, u_ref) = solve(reference)?;
    let mut out = Vec::new();
    for mesh in reference_meshes {
        let (_, u) = solve(mesh)?;
        let pu = reference.prolongate(mesh, &u)?;
        let e: Vec<f64> = u_ref.iter().zip(&pu).map(|(a, b)| a - b).collect();
        let eb = ref_space.restrict_boundary(&e);
        let mut row = row_shell(mesh);
        row.errors =
            vec![ref_space.h1_seminorm(&e)?, ref_space.boundary_l2_norm(&eb)?, h_half_seminorm(&ref_space, &eb)?];
        out.push(row);
    }
    Ok(finish(config, out, levels))
}

/// `Q_h(∂_n y)` with the exact normal derivative on each polygon edge.
pub fn projected_normal_derivative(space: &FeSpace, y: &AnalyticFunction) -> Result<Vec<f64>> {
    let domain = space.mesh().domain();
    let normals: Vec<_> = (0..domain.num_edges()).map(|j| domain.outward_normal(j)).collect();
    let load = boundary_load_vector_with(space.mesh(), |p, tag| {
        let g = y.gradient(p).unwrap_or([f64::NAN; 2]);
        g[0] * normals[tag][0] + g[1] * normals[tag][1]
    });
    space.solve_boundary_mass(&load)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, five points.
const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668, 0.118_463_442_528_095),
    (0.230_765_344_947_158, 0.239_314_335_249_683),
    (0.5, 0.284_444_444_444_444),
    (0.769_234_655_052_842, 0.239_314_335_249_683),
    (0.953_089_922_969_332, 0.118_463_442_528_095),
];

/// `h^{1/2} ‖∂_n y − Q_h ∂_n y‖_{L2(Γ)}`, a computable bound for the part of the
/// `H^{-1/2}` error that the projected comparison leaves out.
pub fn projection_error_bound(space: &FeSpace, y: &AnalyticFunction, projected: &[f64]) -> Result<f64> {
    let mesh = space.mesh();
    let domain = mesh.domain();
    let mut sum = 0.0;
    for edge in mesh.boundary_edges() {
        let [a, c] = edge.nodes;
        let (pa, pc) = (mesh.nodes()[a], mesh.nodes()[c]);
        let (ga, gc) = (projected[mesh.boundary_index(a).unwrap()], projected[mesh.boundary_index(c).unwrap()]);
        let n = domain.outward_normal(edge.tag);
        let len = (pc[0] - pa[0]).hypot(pc[1] - pa[1]);
        for (s, w) in GAUSS5 {
            let p = [pa[0] + s * (pc[0] - pa[0]), pa[1] + s * (pc[1] - pa[1])];
            let g = y.gradient(p).ok_or_else(|| Error::Config(format!("solution `{}` has no gradient", y.label())))?;
            let diff = g[0] * n[0] + g[1] * n[1] - (ga + s * (gc - ga));
            sum += w * len * diff * diff;
        }
    }
    Ok(mesh.h().sqrt() * sum.sqrt())
}

fn run_bvp(
    config: &StudyConfig,
    solution: &AnalyticFunction,
    f: &AnalyticFunction,
    log: &mut dyn FnMut(&str),
) -> Result<ConvergenceTable> {
    let passes = (config.first_row..=config.last_row).map(passes_for_row).collect::<Result<Vec<_>>>()?;
    let meshes = hierarchy(config.domain.initial_mesh()?, &passes);
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    for mesh in &meshes {
        let start = Instant::now();
        let space = FeSpace::with_settings(mesh.clone(), config.solver)?;
        let (y, d) = solve_bvp(&space, f, solution)?;
        let exact = projected_normal_derivative(&space, solution)?;
        let diff: Vec<f64> = exact.iter().zip(&d).map(|(a, b)| a - b).collect();
        let mut row = row_shell(mesh);
        row.errors = vec![
            h_minus_half_norm(&space, &diff)?,
            l2_error(mesh, &y, solution)?,
            h1_error(mesh, &y, solution)?,
            projection_error_bound(&space, solution, &exact)?,
        ];
        let seconds = start.elapsed().as_secs_f64();
        log(&format!("level {:>2} passes, {:>7} nodes: {:.2} s", mesh.level(), mesh.num_nodes(), seconds));
        levels.push(LevelStats {
            passes: mesh.level(),
            nodes: mesh.num_nodes(),
            gmres_iterations: None,
            optimality_residual: None,
            seconds,
        });
        rows.push(row);
    }
    Ok(finish(config, rows, levels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn control_config(which: BuiltinDomain, u_d: &str, first: i32, last: i32) -> StudyConfig {
        StudyConfig {
            domain: DomainChoice::Builtin(which),
            first_row: first,
            last_row: last,
            reference_offset: 2,
            problem: StudyProblem::Control(
                ControlProblem::new(1.0, AnalyticFunction::zero(), AnalyticFunction::parse(u_d).unwrap()).unwrap(),
            ),
            metrics: Vec::new(),
            gmres: GmresOptions::default(),
            solver: SolverSettings::default(),
        }
    }

    #[test]
    fn eoc_examples() {
        let e = compute_eoc(&[4e-3, 2e-3]);
        assert_eq!(e[0], None);
        assert!((e[1].unwrap() - 1.0).abs() < 1e-14);
        assert!((compute_eoc(&[1e-2, 2.5e-3])[1].unwrap() - 2.0).abs() < 1e-14);
        let r = compute_eoc(&[8.43e-4, 4.19e-4])[1].unwrap();
        assert!((r - 1.01).abs() < 0.005);
        assert_eq!(compute_eoc(&[1.0, 0.0, 1.0]), vec![None, None, None]);
        assert!((trailing_rate(&[8.0, 4.0, 1.0], 3).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn row_passes() {
        assert_eq!(passes_for_row(-1).unwrap(), 0);
        assert_eq!(passes_for_row(2).unwrap(), 6);
        assert!(passes_for_row(-2).is_err());
        let mesh = TriMesh::initial(BuiltinDomain::Omega270).refine_n(passes_for_row(3).unwrap());
        assert!((row_shell(&mesh).h_sqrt2 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn zero_data_gives_zero_errors_and_no_rates() {
        let cfg = control_config(BuiltinDomain::Omega90, "0", 0, 2);
        let t = run_control_study(&cfg).unwrap();
        assert_eq!(t.rows.len(), 3);
        for r in &t.rows {
            assert!(r.errors.iter().all(|&e| e == 0.0));
            assert!(r.eoc.iter().all(|e| e.is_none()));
        }
        assert!(t.to_markdown().contains('—'));
    }

    #[test]
    fn empty_range_rejected() {
        let cfg = control_config(BuiltinDomain::Omega90, "x + y", 3, 2);
        assert_eq!(run_control_study(&cfg).unwrap_err().category(), "config");
    }

    #[test]
    fn level_against_itself_has_zero_error() {
        // A reference offset of zero is rejected by validation, so compare a
        // prolongated solution with itself directly.
        let mesh = Arc::new(TriMesh::initial(BuiltinDomain::Omega135).refine_n(4));
        let space = FeSpace::new(mesh.clone()).unwrap();
        let p = ControlProblem::new(1.0, AnalyticFunction::zero(), AnalyticFunction::parse("x + y").unwrap()).unwrap();
        let u = solve_control(&p, &space, &GmresOptions::default()).unwrap().u;
        let pu = mesh.prolongate(&mesh, &u).unwrap();
        let e: Vec<f64> = u.iter().zip(&pu).map(|(a, b)| a - b).collect();
        assert_eq!(space.h1_seminorm(&e).unwrap(), 0.0);
    }

    #[test]
    fn tables_are_reproducible_and_formatted() {
        let mut cfg = control_config(BuiltinDomain::Omega270, "x + y", 0, 2);
        cfg.reference_offset = 1;
        let a = run_control_study(&cfg).unwrap();
        let b = run_control_study(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let md = a.to_markdown();
        assert!(md.lines().next().unwrap().contains("err_H12_control"));
        assert!(md.contains("2^-2"));
        assert!(md.contains("(0.67)") && md.contains("(1.17)"));
        let csv = a.to_csv();
        assert_eq!(
            csv.lines().next().unwrap(),
            "h_sqrt2,n_interior,n_boundary,err_H1_state,eoc,err_L2_control,eoc,err_H12_control,eoc"
        );
        assert!(csv.lines().last().unwrap().starts_with("theory"));

        cfg.metrics = vec!["err_L2_control".into()];
        let only = run_control_study(&cfg).unwrap();
        assert_eq!(only.metric_names, vec!["err_L2_control"]);
        assert_eq!(only.rows[2].errors[0], a.rows[2].errors[1]);
    }

    #[test]
    fn linear_bvp_is_reproduced_exactly() {
        let cfg = StudyConfig {
            domain: DomainChoice::Builtin(BuiltinDomain::Omega90),
            first_row: 0,
            last_row: 2,
            reference_offset: 2,
            problem: StudyProblem::Bvp {
                solution: AnalyticFunction::parse("x + 2*y").unwrap(),
                f: AnalyticFunction::zero(),
            },
            metrics: Vec::new(),
            gmres: GmresOptions::default(),
            solver: SolverSettings::default(),
        };
        let t = run_bvp_study(&cfg).unwrap();
        for r in &t.rows {
            assert!(r.errors[1] < 1e-13 && r.errors[2] < 1e-12, "{:?}", r.errors);
            assert_eq!(r.eoc[1], None);
        }
    }

    #[test]
    fn projection_bound_sees_corner_jumps() {
        let bound = |passes: usize, y: &str| {
            let space = FeSpace::new(TriMesh::initial(BuiltinDomain::Omega90).refine_n(passes)).unwrap();
            let y = AnalyticFunction::parse(y).unwrap();
            let g = projected_normal_derivative(&space, &y).unwrap();
            projection_error_bound(&space, &y, &g).unwrap()
        };
        assert!(bound(4, "3") < 1e-14);
        // ∂_n of x² − y² jumps from 0 to ±2 at the corners: the L2 error is O(h^{1/2}).
        let ratio = bound(6, "x^2 - y^2") / bound(8, "x^2 - y^2");
        assert!((ratio - 2.0).abs() < 0.02, "{ratio}");
    }
}
