use dirctl_core::fem::{assemble_mass, assemble_stiffness, nodal_interpolant};
use dirctl_core::functions::AnalyticFunction;
use dirctl_core::geometry::BuiltinDomain;
use dirctl_core::mesh::TriMesh;
use dirctl_core::Error;
use proptest::prelude::*;

fn domain(k: usize) -> BuiltinDomain {
    BuiltinDomain::ALL[k % 3]
}

#[test]
fn two_passes_halve_h_and_keep_angles() {
    for which in BuiltinDomain::ALL {
        let m0 = TriMesh::initial(which);
        let angle = m0.min_angle();
        let mut m = m0.refine_n(2);
        for _ in 0..3 {
            let next = m.refine_n(2);
            assert!((next.h() - 0.5 * m.h()).abs() < 1e-14);
            assert!(next.min_angle() >= angle - 1e-12);
            assert_eq!(next.num_triangles(), 4 * m.num_triangles());
            m = next;
        }
    }
}

#[test]
fn text_round_trip_is_exact() {
    let mesh = TriMesh::initial(BuiltinDomain::Omega135).refine_n(5);
    let mut buf = Vec::new();
    mesh.write_text(&mut buf).unwrap();
    let back = TriMesh::read_text(buf.as_slice()).unwrap();
    assert_eq!(back.nodes(), mesh.nodes());
    assert_eq!(back.triangles(), mesh.triangles());
    assert_eq!(back.boundary_edges().len(), mesh.boundary_edges().len());
    for (a, b) in back.boundary_edges().iter().zip(mesh.boundary_edges()) {
        assert_eq!((a.nodes, a.tag), (b.nodes, b.tag));
    }
}

#[test]
fn truncated_text_reports_a_line() {
    let mut buf = Vec::new();
    TriMesh::initial(BuiltinDomain::Omega90).write_text(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let cut: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
    assert!(matches!(TriMesh::read_text(cut.as_bytes()), Err(Error::Parse { .. })));
}

#[test]
fn prolongation_rejects_unrelated_meshes() {
    let a = TriMesh::initial(BuiltinDomain::Omega90).refine_n(2);
    let b = TriMesh::initial(BuiltinDomain::Omega270).refine_n(3);
    assert!(matches!(b.prolongate(&a, &vec![0.0; a.num_nodes()]), Err(Error::NotNested(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prolongation_reproduces_linears(k in 0usize..3, coarse_passes in 0usize..4, extra in 1usize..4,
                                       a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let coarse = TriMesh::initial(domain(k)).refine_n(coarse_passes);
        let fine = coarse.refine_n(extra);
        let lin = AnalyticFunction::new("lin", move |p| a * p[0] + b * p[1] + c);
        let pv = fine.prolongate(&coarse, &nodal_interpolant(&coarse, &lin)).unwrap();
        let expect = nodal_interpolant(&fine, &lin);
        for (x, y) in pv.iter().zip(&expect) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn prolongation_preserves_energy_and_mass(k in 0usize..3, extra in 1usize..3, seed in 0u64..1000) {
        let coarse = TriMesh::initial(domain(k)).refine_n(2);
        let fine = coarse.refine_n(extra);
        let v: Vec<f64> = (0..coarse.num_nodes()).map(|i| ((i as u64 * 7919 + seed) % 1000) as f64 / 500.0 - 1.0).collect();
        let pv = fine.prolongate(&coarse, &v).unwrap();
        let (ac, af) = (assemble_stiffness(&coarse).unwrap(), assemble_stiffness(&fine).unwrap());
        let (mc, mf) = (assemble_mass(&coarse).unwrap(), assemble_mass(&fine).unwrap());
        let (ec, ef) = (ac.quadratic_form(&v), af.quadratic_form(&pv));
        let (lc, lf) = (mc.quadratic_form(&v), mf.quadratic_form(&pv));
        prop_assert!((ec - ef).abs() <= 1e-11 * ec.max(1.0));
        prop_assert!((lc - lf).abs() <= 1e-11 * lc.max(1.0));
    }

    #[test]
    fn refined_meshes_tile_the_domain(k in 0usize..3, passes in 0usize..7) {
        let mesh = TriMesh::initial(domain(k)).refine_n(passes);
        let area: f64 = (0..mesh.num_triangles()).map(|t| mesh.triangle_area(t)).sum();
        prop_assert!((area - mesh.domain().area()).abs() < 1e-12);
        let perimeter: f64 = mesh.boundary_edges().iter().map(|e| {
            let [a, b] = e.nodes;
            let (p, q) = (mesh.nodes()[a], mesh.nodes()[b]);
            (p[0] - q[0]).hypot(p[1] - q[1])
        }).sum();
        prop_assert!((perimeter - mesh.domain().perimeter()).abs() < 1e-12);
        prop_assert_eq!(mesh.num_boundary_nodes(), mesh.boundary_edges().len());
        prop_assert!(mesh.is_refinement_of(&TriMesh::initial(domain(k))));
    }
}
