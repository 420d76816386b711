//! Conforming triangulations of polygonal domains, longest-edge bisection and
//! the nested prolongation between refinement levels.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use crate::error::{check_len, Error, Result};
use crate::geometry::{cross, dist, midpoint, sub, BuiltinDomain, Point, PolygonalDomain};

/// A mesh edge on `Γ`, oriented counterclockwise, tagged with the polygon edge it lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: usize,
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    domain: PolygonalDomain,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    /// For nodes created by bisection, the edge they split.
    parents: Vec<Option<[usize; 2]>>,
    /// Node index -> position in `boundary_nodes`.
    boundary_index: Vec<Option<usize>>,
    /// Boundary nodes, counterclockwise from polygon vertex 0.
    boundary_nodes: Vec<usize>,
    interior_nodes: Vec<usize>,
    /// Node index of each polygon vertex.
    corner_nodes: Vec<usize>,
    h: f64,
    /// Fingerprint of the level-0 mesh this one descends from.
    root: u64,
    /// Node counts of every level from the root up to this mesh.
    history: Vec<usize>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn triangle_area(p: [Point; 3]) -> f64 {
    0.5 * cross(sub(p[1], p[0]), sub(p[2], p[0]))
}

impl TriMesh {
    /// Builds a mesh from raw nodes and triangles, deriving and validating the
    /// boundary structure against `domain`. Clockwise triangles are reoriented.
    pub fn from_parts(domain: PolygonalDomain, nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let parents = vec![None; nodes.len()];
        let mut mesh = Self::assemble(domain, nodes, triangles, parents, 0, Vec::new())?;
        mesh.root = mesh.fingerprint();
        mesh.history = vec![mesh.nodes.len()];
        Ok(mesh)
    }

    fn assemble(
        domain: PolygonalDomain,
        nodes: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        parents: Vec<Option<[usize; 2]>>,
        root: u64,
        history: Vec<usize>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::invalid("mesh has no triangles"));
        }
        let n = nodes.len();
        for (index, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::invalid(format!("triangle {index} references a missing node")));
            }
            let area = triangle_area([nodes[t[0]], nodes[t[1]], nodes[t[2]]]);
            if area == 0.0 || !area.is_finite() {
                return Err(Error::DegenerateTriangle { index, area });
            }
            if area < 0.0 {
                t.swap(1, 2);
            }
        }

        // Oriented edges; an edge seen once is a boundary edge.
        let mut edge_count: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let entry = edge_count.entry(edge_key(a, b)).or_insert((0, [a, b]));
                entry.0 += 1;
                if entry.0 > 2 {
                    return Err(Error::invalid(format!("edge ({a}, {b}) shared by more than two triangles")));
                }
            }
        }
        let mut next = vec![usize::MAX; n];
        let mut edge_tag: HashMap<usize, usize> = HashMap::new();
        for &(count, [a, b]) in edge_count.values() {
            if count != 1 {
                continue;
            }
            let tag = domain.edge_containing(nodes[a], nodes[b]).ok_or_else(|| {
                Error::invalid(format!("boundary edge ({a}, {b}) does not lie on the polygon (non-conforming mesh?)"))
            })?;
            if next[a] != usize::MAX {
                return Err(Error::invalid(format!("node {a} starts two boundary edges")));
            }
            next[a] = b;
            edge_tag.insert(a, tag);
        }

        let corner_nodes = domain
            .vertices()
            .iter()
            .enumerate()
            .map(|(j, v)| {
                nodes
                    .iter()
                    .position(|p| dist(*p, *v) <= crate::geometry::CORNER_TOL)
                    .ok_or_else(|| Error::invalid(format!("polygon vertex {j} is not a mesh node")))
            })
            .collect::<Result<Vec<_>>>()?;

        let start = corner_nodes[0];
        let mut boundary_nodes = vec![start];
        let mut boundary_edges = Vec::new();
        let mut current = start;
        loop {
            let b = next[current];
            if b == usize::MAX {
                return Err(Error::invalid(format!("boundary chain broken at node {current}")));
            }
            boundary_edges.push(BoundaryEdge { nodes: [current, b], tag: edge_tag[&current] });
            if b == start {
                break;
            }
            if boundary_edges.len() > n {
                return Err(Error::invalid("boundary chain does not close"));
            }
            boundary_nodes.push(b);
            current = b;
        }
        let n_boundary_edges = edge_count.values().filter(|(c, _)| *c == 1).count();
        if boundary_edges.len() != n_boundary_edges {
            return Err(Error::invalid("boundary is not a single closed curve"));
        }

        let mut boundary_index = vec![None; n];
        for (k, &v) in boundary_nodes.iter().enumerate() {
            boundary_index[v] = Some(k);
        }
        let interior_nodes = (0..n).filter(|&v| boundary_index[v].is_none()).collect();
        let h = triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .map(|(a, b)| dist(nodes[a], nodes[b]))
            .fold(0.0, f64::max);

        Ok(Self {
            domain,
            nodes,
            triangles,
            boundary_edges,
            parents,
            boundary_index,
            boundary_nodes,
            interior_nodes,
            corner_nodes,
            h,
            root,
            history,
        })
    }

    fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        for p in &self.nodes {
            p[0].to_bits().hash(&mut hasher);
            p[1].to_bits().hash(&mut hasher);
        }
        self.triangles.hash(&mut hasher);
        hasher.finish()
    }

    /// The structured level-0 mesh of a builtin domain: 2, 3 or 6 right isosceles triangles.
    pub fn initial(which: BuiltinDomain) -> Self {
        let domain = which.domain();
        let (nodes, triangles): (Vec<Point>, Vec<[usize; 3]>) = match which {
            BuiltinDomain::Omega90 => {
                (vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0, 1, 2], [0, 2, 3]])
            }
            BuiltinDomain::Omega135 => (
                vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [-1.0, 1.0]],
                vec![[0, 1, 2], [0, 2, 3], [0, 3, 4]],
            ),
            // Fan around the reentrant corner; each unit square is cut along its diagonal through the origin.
            BuiltinDomain::Omega270 => (
                vec![
                    [0.0, 0.0],
                    [0.0, 1.0],
                    [-1.0, 1.0],
                    [-1.0, 0.0],
                    [-1.0, -1.0],
                    [0.0, -1.0],
                    [1.0, -1.0],
                    [1.0, 0.0],
                ],
                vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 5], [0, 5, 6], [0, 6, 7]],
            ),
        };
        Self::from_parts(domain, nodes, triangles).expect("builtin meshes are valid")
    }

    /// Ear-clipping triangulation using only the polygon vertices as nodes.
    pub fn triangulate(domain: &PolygonalDomain) -> Result<Self> {
        let v = domain.vertices();
        let mut remaining: Vec<usize> = (0..v.len()).collect();
        let mut triangles = Vec::with_capacity(v.len() - 2);
        while remaining.len() > 3 {
            let m = remaining.len();
            let ear = (0..m).find(|&i| {
                let (a, b, c) = (remaining[(i + m - 1) % m], remaining[i], remaining[(i + 1) % m]);
                if cross(sub(v[b], v[a]), sub(v[c], v[b])) <= 0.0 {
                    return false;
                }
                remaining.iter().all(|&p| p == a || p == b || p == c || !point_in_triangle(v[p], [v[a], v[b], v[c]]))
            });
            let i = ear.ok_or_else(|| Error::invalid("polygon could not be triangulated"))?;
            triangles.push([remaining[(i + m - 1) % m], remaining[i], remaining[(i + 1) % m]]);
            remaining.remove(i);
        }
        triangles.push([remaining[0], remaining[1], remaining[2]]);
        Self::from_parts(domain.clone(), v.to_vec(), triangles)
    }

    /// One uniform refinement pass: every triangle is bisected through the
    /// midpoint of its longest edge, and triangles whose other edges were split by
    /// a neighbour are bisected again on those edges so the result is conforming.
    pub fn refine(&self) -> Self {
        let mut nodes = self.nodes.clone();
        let mut parents = self.parents.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();

        let rotated: Vec<[usize; 3]> = self.triangles.iter().map(|t| self.rotate_to_longest(t)).collect();
        for t in &rotated {
            let key = edge_key(t[1], t[2]);
            midpoints.entry(key).or_insert_with(|| {
                nodes.push(midpoint(nodes[t[1]], nodes[t[2]]));
                parents.push(Some([key.0, key.1]));
                nodes.len() - 1
            });
        }

        let mut triangles = Vec::with_capacity(2 * rotated.len());
        for &[v0, v1, v2] in &rotated {
            let m = midpoints[&edge_key(v1, v2)];
            match midpoints.get(&edge_key(v0, v1)) {
                Some(&m1) => {
                    triangles.push([m, v0, m1]);
                    triangles.push([m, m1, v1]);
                }
                None => triangles.push([v0, v1, m]),
            }
            match midpoints.get(&edge_key(v2, v0)) {
                Some(&m2) => {
                    triangles.push([m, v2, m2]);
                    triangles.push([m, m2, v0]);
                }
                None => triangles.push([v0, m, v2]),
            }
        }

        let mut history = self.history.clone();
        history.push(nodes.len());
        Self::assemble(self.domain.clone(), nodes, triangles, parents, self.root, history)
            .expect("bisection of a valid mesh is valid")
    }

    /// Applies `passes` uniform refinement passes.
    pub fn refine_n(&self, passes: usize) -> Self {
        let mut mesh = self.clone();
        for _ in 0..passes {
            mesh = mesh.refine();
        }
        mesh
    }

    /// Rotates a triangle to `[opposite, a, b]` where `(a, b)` is its longest edge.
    /// Ties go to the edge whose opposite vertex has the smallest index.
    fn rotate_to_longest(&self, t: &[usize; 3]) -> [usize; 3] {
        let len = |k: usize| dist(self.nodes[t[(k + 1) % 3]], self.nodes[t[(k + 2) % 3]]);
        let lengths = [len(0), len(1), len(2)];
        let longest = lengths.iter().copied().fold(0.0, f64::max);
        let k = (0..3)
            .filter(|&k| lengths[k] >= longest * (1.0 - 1e-12))
            .min_by_key(|&k| t[k])
            .expect("a triangle has edges");
        [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
    }

    pub fn domain(&self) -> &PolygonalDomain {
        &self.domain
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_boundary_nodes(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn num_interior_nodes(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_index[node].is_some()
    }

    /// Boundary nodes in counterclockwise order starting at polygon vertex 0.
    /// This order fixes the coefficient layout of boundary functions.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_index(&self, node: usize) -> Option<usize> {
        self.boundary_index[node]
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn corner_nodes(&self) -> &[usize] {
        &self.corner_nodes
    }

    pub fn is_corner(&self, node: usize) -> bool {
        self.is_boundary(node) && self.domain.vertex_at(self.nodes[node]).is_some()
    }

    pub fn parent(&self, node: usize) -> Option<[usize; 2]> {
        self.parents[node]
    }

    /// Number of refinement passes since the level-0 mesh.
    pub fn level(&self) -> usize {
        self.history.len() - 1
    }

    /// Maximal element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        triangle_area(self.triangle_points(t))
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.triangles.len())
            .flat_map(|t| {
                let p = self.triangle_points(t);
                (0..3).map(move |k| {
                    let u = sub(p[(k + 1) % 3], p[k]);
                    let v = sub(p[(k + 2) % 3], p[k]);
                    cross(u, v).abs().atan2(u[0] * v[0] + u[1] * v[1])
                })
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// True if `self` was produced from `coarse` by zero or more calls to [`TriMesh::refine`].
    pub fn is_refinement_of(&self, coarse: &TriMesh) -> bool {
        self.root == coarse.root && self.history.starts_with(&coarse.history)
    }

    /// Embeds a P1 function given by nodal values on `coarse` into this mesh.
    /// New nodes take the mean of the two endpoints of the edge they bisected.
    pub fn prolongate(&self, coarse: &TriMesh, values: &[f64]) -> Result<Vec<f64>> {
        check_len(coarse.num_nodes(), values.len())?;
        if !self.is_refinement_of(coarse) {
            return Err(Error::NotNested(format!(
                "mesh with {} nodes is not a refinement of the mesh with {} nodes",
                self.num_nodes(),
                coarse.num_nodes()
            )));
        }
        let mut out = Vec::with_capacity(self.num_nodes());
        out.extend_from_slice(values);
        for node in coarse.num_nodes()..self.num_nodes() {
            let [a, b] = self.parents[node].expect("refined nodes have parents");
            out.push(0.5 * (out[a] + out[b]));
        }
        Ok(out)
    }

    /// Writes the line-oriented text format described in the README.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "dirctl-mesh 1").unwrap();
        writeln!(s, "polygon {}", self.domain.vertices().len()).unwrap();
        for p in self.domain.vertices() {
            writeln!(s, "{:?} {:?}", p[0], p[1]).unwrap();
        }
        writeln!(s, "nodes {}", self.nodes.len()).unwrap();
        for p in &self.nodes {
            writeln!(s, "{:?} {:?}", p[0], p[1]).unwrap();
        }
        writeln!(s, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        writeln!(s, "boundary_edges {}", self.boundary_edges.len()).unwrap();
        for e in &self.boundary_edges {
            writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.tag).unwrap();
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    /// Reads a mesh written by [`TriMesh::write_text`]. The result starts a new
    /// refinement hierarchy.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = TextLines::new(input);
        let (line, header) = lines.next_line()?;
        if header.trim() != "dirctl-mesh 1" {
            return Err(Error::Parse { line, message: format!("expected `dirctl-mesh 1`, found `{header}`") });
        }
        let n_poly = lines.section("polygon")?;
        let polygon = (0..n_poly).map(|_| lines.point()).collect::<Result<Vec<_>>>()?;
        let n_nodes = lines.section("nodes")?;
        let nodes = (0..n_nodes).map(|_| lines.point()).collect::<Result<Vec<_>>>()?;
        let n_tri = lines.section("triangles")?;
        let triangles = (0..n_tri).map(|_| lines.indices::<3>()).collect::<Result<Vec<_>>>()?;
        let n_bd = lines.section("boundary_edges")?;
        let edges = (0..n_bd).map(|_| lines.indices::<3>()).collect::<Result<Vec<_>>>()?;

        let domain = PolygonalDomain::new(polygon)?;
        let mesh = Self::from_parts(domain, nodes, triangles)?;
        let mut expected: Vec<[usize; 3]> =
            mesh.boundary_edges.iter().map(|e| [e.nodes[0], e.nodes[1], e.tag]).collect();
        let mut found = edges;
        expected.sort_unstable();
        found.sort_unstable();
        if expected != found {
            return Err(Error::Parse {
                line: lines.line,
                message: "boundary edge list does not match the triangulation".into(),
            });
        }
        Ok(mesh)
    }
}

fn point_in_triangle(p: Point, t: [Point; 3]) -> bool {
    (0..3).all(|k| cross(sub(t[(k + 1) % 3], t[k]), sub(p, t[k])) >= 0.0)
}

struct TextLines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> TextLines<R> {
    fn new(input: R) -> Self {
        Self { inner: input.lines(), line: 0 }
    }

    fn next_line(&mut self) -> Result<(usize, String)> {
        loop {
            self.line += 1;
            match self.inner.next() {
                None => return Err(Error::Parse { line: self.line, message: "unexpected end of file".into() }),
                Some(l) => {
                    let l = l?;
                    let t = l.trim();
                    if !t.is_empty() && !t.starts_with('#') {
                        return Ok((self.line, t.to_string()));
                    }
                }
            }
        }
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (line, l) = self.next_line()?;
        let mut it = l.split_whitespace();
        match (it.next(), it.next().and_then(|c| c.parse().ok()), it.next()) {
            (Some(n), Some(count), None) if n == name => Ok(count),
            _ => Err(Error::Parse { line, message: format!("expected `{name} <count>`, found `{l}`") }),
        }
    }

    fn fields<T: std::str::FromStr, const N: usize>(&mut self, what: &str) -> Result<[T; N]> {
        let (line, l) = self.next_line()?;
        let parsed: Vec<T> = l
            .split_whitespace()
            .map(|w| w.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| Error::Parse { line, message: format!("malformed {what}: `{l}`") })?;
        parsed.try_into().map_err(|_| Error::Parse { line, message: format!("expected {N} values for {what}: `{l}`") })
    }

    fn point(&mut self) -> Result<Point> {
        self.fields::<f64, 2>("coordinate pair")
    }

    fn indices<const N: usize>(&mut self) -> Result<[usize; N]> {
        self.fields::<usize, N>("index list")
    }
}
