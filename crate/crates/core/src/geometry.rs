//! Polygonal domains and the three builtin benchmark geometries.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Tolerance used to identify mesh nodes with polygon vertices.
pub const CORNER_TOL: f64 = 1e-12;

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Distance from `p` to the segment `[a, b]`.
pub(crate) fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0) };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// The builtin domains used in the convergence experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BuiltinDomain {
    /// The unit square `(0,1)^2`.
    Omega90,
    /// `(-1,1)^2` intersected with the sector of opening angle `3π/4`.
    Omega135,
    /// The L-shape `(-1,1)^2 \ [0,1]^2`.
    Omega270,
}

impl BuiltinDomain {
    pub const ALL: [BuiltinDomain; 3] = [Self::Omega90, Self::Omega135, Self::Omega270];

    pub fn name(self) -> &'static str {
        match self {
            Self::Omega90 => "omega90",
            Self::Omega135 => "omega135",
            Self::Omega270 => "omega270",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|d| d.name() == name).ok_or_else(|| Error::UnknownDomain(name.to_string()))
    }

    pub fn domain(self) -> PolygonalDomain {
        let vertices: Vec<Point> = match self {
            Self::Omega90 => vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            // The bounding ray at angle 3π/4 leaves the square through its corner (-1, 1).
            Self::Omega135 => vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [-1.0, 1.0]],
            Self::Omega270 => vec![[0.0, 0.0], [0.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 0.0]],
        };
        PolygonalDomain::new(vertices).expect("builtin polygons are valid")
    }
}

pub fn builtin_domain(name: &str) -> Result<PolygonalDomain> {
    Ok(BuiltinDomain::from_name(name)?.domain())
}

/// A simple polygon with counterclockwise vertices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolygonalDomain {
    vertices: Vec<Point>,
    corner_angles: Vec<f64>,
}

impl PolygonalDomain {
    /// Validates the polygon and reorders clockwise input to counterclockwise.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid("a polygon needs at least three vertices"));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("polygon vertices must be finite"));
        }
        let n = vertices.len();
        for i in 0..n {
            if dist(vertices[i], vertices[(i + 1) % n]) == 0.0 {
                return Err(Error::invalid(format!("repeated polygon vertex {i}")));
            }
        }
        check_simple(&vertices)?;
        let area = signed_area(&vertices);
        if area == 0.0 {
            return Err(Error::invalid("polygon has zero area"));
        }
        if area < 0.0 {
            vertices[1..].reverse();
        }
        let corner_angles = (0..n)
            .map(|j| {
                let prev = vertices[(j + n - 1) % n];
                let next = vertices[(j + 1) % n];
                let d_in = sub(vertices[j], prev);
                let d_out = sub(next, vertices[j]);
                let turn = cross(d_in, d_out).atan2(d_in[0] * d_out[0] + d_in[1] * d_out[1]);
                PI - turn
            })
            .collect();
        Ok(Self { vertices, corner_angles })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }

    /// Endpoints of the polygon edge `Γ_j` running from vertex `j` to `j + 1`.
    pub fn edge(&self, j: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[j], self.vertices[(j + 1) % n])
    }

    /// Unit outward normal of edge `j`.
    pub fn outward_normal(&self, j: usize) -> Point {
        let (a, b) = self.edge(j);
        let len = dist(a, b);
        [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
    }

    /// Interior angles `ω_j` in radians.
    pub fn corner_angles(&self) -> &[f64] {
        &self.corner_angles
    }

    /// Leading singular exponents `λ_j = π/ω_j`.
    pub fn singular_exponents(&self) -> Vec<f64> {
        self.corner_angles.iter().map(|w| PI / w).collect()
    }

    pub fn max_angle(&self) -> f64 {
        self.corner_angles.iter().copied().fold(0.0, f64::max)
    }

    /// `π / ω_max`, the exponent of the dominating corner singularity.
    pub fn lambda_bar(&self) -> f64 {
        PI / self.max_angle()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.num_edges())
            .map(|j| {
                let (a, b) = self.edge(j);
                dist(a, b)
            })
            .sum()
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(dist(*a, *b));
            }
        }
        d
    }

    /// Distance from `p` to the boundary polyline.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        (0..self.num_edges())
            .map(|j| {
                let (a, b) = self.edge(j);
                segment_distance(p, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the polygon vertex at `p`, if any.
    pub fn vertex_at(&self, p: Point) -> Option<usize> {
        self.vertices.iter().position(|v| dist(*v, p) <= CORNER_TOL)
    }

    /// Index of the polygon edge containing the segment `[a, b]`.
    pub(crate) fn edge_containing(&self, a: Point, b: Point) -> Option<usize> {
        let tol = 1e-12 * self.diameter().max(1.0);
        (0..self.num_edges()).find(|&j| {
            let (p, q) = self.edge(j);
            segment_distance(a, p, q) <= tol && segment_distance(b, p, q) <= tol
        })
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(sub(q2, q1), sub(p1, q1));
    let d2 = cross(sub(q2, q1), sub(p2, q1));
    let d3 = cross(sub(p2, p1), sub(q1, p1));
    let d4 = cross(sub(p2, p1), sub(q2, p1));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, p: Point, d: f64| d == 0.0 && segment_distance(p, a, b) == 0.0;
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn check_simple(v: &[Point]) -> Result<()> {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges may only share their common vertex.
                let (a, b, c) = if j == i + 1 { (v[i], v[j], v[(j + 1) % n]) } else { (v[j], v[0], v[1]) };
                let folded = cross(sub(b, a), sub(c, b)) == 0.0
                    && (c[0] - b[0]) * (b[0] - a[0]) + (c[1] - b[1]) * (b[1] - a[1]) < 0.0;
                if folded {
                    return Err(Error::invalid(format!("polygon folds back at vertex {}", (i + 1) % n)));
                }
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return Err(Error::invalid(format!("polygon edges {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_exponents() {
        let sq = builtin_domain("omega90").unwrap();
        assert_eq!(sq.vertices(), &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert!((sq.lambda_bar() - 2.0).abs() < 1e-14);

        let d135 = builtin_domain("omega135").unwrap();
        assert!((d135.max_angle() - 0.75 * PI).abs() < 1e-14);
        assert!((d135.lambda_bar() - 4.0 / 3.0).abs() < 1e-14);

        let l = builtin_domain("omega270").unwrap();
        assert!((l.max_angle() - 1.5 * PI).abs() < 1e-14);
        assert!((l.lambda_bar() - 2.0 / 3.0).abs() < 1e-14);
        assert!((l.area() - 3.0).abs() < 1e-14);
        assert!((l.perimeter() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn angles_sum_to_polygon_total() {
        for d in BuiltinDomain::ALL {
            let dom = d.domain();
            let n = dom.num_edges() as f64;
            let total: f64 = dom.corner_angles().iter().sum();
            assert!((total - (n - 2.0) * PI).abs() < 1e-12, "{}", d.name());
        }
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(matches!(builtin_domain("omega180"), Err(Error::UnknownDomain(_))));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let d = PolygonalDomain::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(d.area() > 0.0);
        assert_eq!(d.vertices()[0], [0.0, 0.0]);
        assert!((d.lambda_bar() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn self_intersecting_polygon_rejected() {
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(PolygonalDomain::new(bowtie).is_err());
        assert!(PolygonalDomain::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(PolygonalDomain::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
    }

    #[test]
    fn outward_normals_of_square() {
        let sq = builtin_domain("omega90").unwrap();
        assert_eq!(sq.outward_normal(0), [0.0, -1.0]);
        assert_eq!(sq.outward_normal(1), [1.0, 0.0]);
        assert_eq!(sq.outward_normal(2), [0.0, 1.0]);
        assert_eq!(sq.outward_normal(3), [-1.0, 0.0]);
    }
}
