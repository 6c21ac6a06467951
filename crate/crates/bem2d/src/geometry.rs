//! Polygonal boundaries, quasi-uniform boundary meshes and local regions.
//!
//! All coordinates are dimensionless. Canonical geometries are pre-scaled to
//! diameter <= 1/2 so the single-layer operator stays elliptic with margin,
//! and rotated so the bisector of the singular interior angle lies along the
//! positive x-axis.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, treating both as 3D vectors.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn rotated(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Simple closed polygon with CCW-ordered vertices and diameter < 1.
#[derive(Debug, Clone)]
pub struct Polygon {
    vertices: Vec<Point>,
    name: Option<String>,
}

impl Polygon {
    /// Validates every polygon invariant and reports the first violated one.
    pub fn new(vertices: Vec<Point>, name: Option<&str>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {n}"
            )));
        }
        let scale = vertices
            .iter()
            .map(|v| v.norm())
            .fold(0.0_f64, f64::max)
            .max(1e-30);
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i].dist(vertices[j]) <= 1e-12 * scale {
                return Err(Error::InvalidPolygon(format!(
                    "consecutive vertices {i} and {j} coincide"
                )));
            }
        }
        let area = signed_area(&vertices);
        if area <= 0.0 {
            return Err(Error::InvalidPolygon(format!(
                "vertices must be counter-clockwise (signed area {area} <= 0)"
            )));
        }
        if !is_simple(&vertices) {
            return Err(Error::InvalidPolygon(
                "boundary is self-intersecting".into(),
            ));
        }
        let poly = Polygon {
            vertices,
            name: name.map(str::to_owned),
        };
        for (j, omega) in poly.interior_angles().into_iter().enumerate() {
            if (omega - PI).abs() < 1e-9 {
                return Err(Error::InvalidPolygon(format!(
                    "interior angle at vertex {j} equals pi (flat vertex)"
                )));
            }
        }
        let d = poly.diameter();
        if d >= 1.0 {
            return Err(Error::DiameterTooLarge(d));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }

    /// Edge `i` runs from vertex `i` to vertex `i+1` (mod n).
    pub fn edge(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        a.dist(b)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.num_edges()).map(|i| self.edge_length(i)).sum()
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for i in 0..self.vertices.len() {
            for j in i + 1..self.vertices.len() {
                d = d.max(self.vertices[i].dist(self.vertices[j]));
            }
        }
        d
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Interior angle at each vertex, in (0, 2pi).
    pub fn interior_angles(&self) -> Vec<f64> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let prev = self.vertices[(i + n - 1) % n];
                let here = self.vertices[i];
                let next = self.vertices[(i + 1) % n];
                let din = here - prev;
                let dout = next - here;
                let turn = wrap_angle(dout.y.atan2(dout.x) - din.y.atan2(din.x));
                PI - turn
            })
            .collect()
    }

    /// Supremum of admissible shift parameters alpha_D:
    /// `min_j min{pi/omega_j, pi/(2pi - omega_j)} - 1/2`.
    pub fn alpha_d_bound(&self) -> Result<f64> {
        let mut s_star = f64::INFINITY;
        for (j, omega) in self.interior_angles().into_iter().enumerate() {
            if (omega - PI).abs() < 1e-9 {
                return Err(Error::InvalidPolygon(format!(
                    "interior angle at vertex {j} equals pi"
                )));
            }
            s_star = s_star.min((PI / omega).min(PI / (2.0 * PI - omega)));
        }
        Ok(s_star - 0.5)
    }
}

fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
}

/// Strict proper-intersection test for non-adjacent edges.
fn is_simple(vertices: &[Point]) -> bool {
    let n = vertices.len();
    let seg = |i: usize| (vertices[i], vertices[(i + 1) % n]);
    for i in 0..n {
        for j in i + 1..n {
            // Skip adjacent edges (they share an endpoint by construction).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q - p).cross(r - p);
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0) != (o2 > 0.0)) && ((o3 > 0.0) != (o4 > 0.0)) {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| {
        orient(p, q, r).abs() < 1e-14
            && r.x >= p.x.min(q.x) - 1e-14
            && r.x <= p.x.max(q.x) + 1e-14
            && r.y >= p.y.min(q.y) - 1e-14
            && r.y <= p.y.max(q.y) + 1e-14
    };
    on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b)
}

/// Canonical test geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalGeometry {
    LShape,
    ZShape,
    Square,
}

impl FromStr for CanonicalGeometry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lshape" | "l-shape" | "l" => Ok(CanonicalGeometry::LShape),
            "zshape" | "z-shape" | "z" => Ok(CanonicalGeometry::ZShape),
            "square" => Ok(CanonicalGeometry::Square),
            other => Err(Error::UnknownGeometry(other.to_owned())),
        }
    }
}

/// Builds one of the canonical polygons.
///
/// The L-shape is `[-1,1]^2` minus the fourth quadrant, rotated by -3pi/4 so
/// the reentrant corner (interior angle 3pi/2) sits at the origin with its
/// interior bisector along +x, then scaled to diameter 1/2.
///
/// The Z-shape takes eight points of a unit circle at angles
/// `-7pi/8 + k pi/4` together with the origin; the wedge of opening pi/4
/// around the negative x-axis is cut out, which makes the interior angle at
/// the origin 7pi/4 and the bisector the +x axis. Scaled to diameter 1/2.
pub fn canonical_geometry(which: CanonicalGeometry) -> Polygon {
    match which {
        CanonicalGeometry::LShape => {
            let base = [
                (0.0, 0.0),
                (1.0, 0.0),
                (1.0, 1.0),
                (-1.0, 1.0),
                (-1.0, -1.0),
                (0.0, -1.0),
            ];
            let scale = 0.5 / (2.0 * 2.0_f64.sqrt());
            let verts = base
                .iter()
                .map(|&(x, y)| Point::new(x, y).rotated(-3.0 * PI / 4.0) * scale)
                .collect();
            Polygon::new(verts, Some("lshape")).expect("canonical L-shape is valid")
        }
        CanonicalGeometry::ZShape => {
            let mut verts = vec![Point::new(0.0, 0.0)];
            for k in 0..8 {
                let theta = -7.0 * PI / 8.0 + k as f64 * PI / 4.0;
                verts.push(Point::new(theta.cos(), theta.sin()) * 0.25);
            }
            Polygon::new(verts, Some("zshape")).expect("canonical Z-shape is valid")
        }
        CanonicalGeometry::Square => {
            let s = 0.35;
            let verts = vec![
                Point::new(0.0, 0.0),
                Point::new(s, 0.0),
                Point::new(s, s),
                Point::new(0.0, s),
            ];
            Polygon::new(verts, Some("square")).expect("canonical square is valid")
        }
    }
}

/// Reads a polygon from a plain-text file: one `x y` pair per line, CCW
/// order, `#` starts a comment.
pub fn read_polygon_file(path: &Path) -> Result<Polygon> {
    let text = std::fs::read_to_string(path)?;
    let mut vertices = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<f64> {
            tok.ok_or_else(|| {
                Error::InvalidPolygon(format!("line {}: expected 'x y'", lineno + 1))
            })?
            .parse::<f64>()
            .map_err(|e| Error::InvalidPolygon(format!("line {}: {e}", lineno + 1)))
        };
        let x = parse(it.next())?;
        let y = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::InvalidPolygon(format!(
                "line {}: trailing tokens after 'x y'",
                lineno + 1
            )));
        }
        vertices.push(Point::new(x, y));
    }
    let name = path.file_stem().and_then(|s| s.to_str());
    Polygon::new(vertices, name)
}

/// Straight boundary element of a [`BoundaryMesh`].
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub a: Point,
    pub b: Point,
    pub midpoint: Point,
    pub length: f64,
    /// Outward unit normal.
    pub normal: Point,
    /// Parent polygon edge.
    pub edge: usize,
}

/// Closed loop of straight segments tiling a polygon boundary.
///
/// Node `i` is the start point of element `i`; element `i` ends at node
/// `i+1 (mod N)`. Every polygon vertex is a node.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    polygon: Polygon,
    nodes: Vec<Point>,
    edge_of: Vec<usize>,
    level: u32,
}

impl BoundaryMesh {
    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn num_elements(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn element(&self, i: usize) -> Element {
        let n = self.nodes.len();
        let a = self.nodes[i];
        let b = self.nodes[(i + 1) % n];
        let t = b - a;
        let length = t.norm();
        Element {
            a,
            b,
            midpoint: (a + b) * 0.5,
            length,
            // CCW traversal keeps the interior on the left, so the outward
            // normal is the tangent rotated by -pi/2.
            normal: Point::new(t.y / length, -t.x / length),
            edge: self.edge_of[i],
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.num_elements()).map(|i| self.element(i))
    }

    /// Global mesh width h = max element length.
    pub fn h(&self) -> f64 {
        self.elements().map(|e| e.length).fold(0.0, f64::max)
    }

    pub fn min_h(&self) -> f64 {
        self.elements().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    pub fn total_length(&self) -> f64 {
        self.elements().map(|e| e.length).sum()
    }

    /// Splits each polygon edge into equal segments of length <= `target_h`.
    pub fn initial(polygon: &Polygon, target_h: f64) -> Result<Self> {
        if !(target_h > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target_h must be positive, got {target_h}"
            )));
        }
        let counts: Vec<usize> = (0..polygon.num_edges())
            .map(|i| (polygon.edge_length(i) / target_h).ceil().max(1.0) as usize)
            .collect();
        Ok(Self::from_edge_counts(polygon, &counts))
    }

    /// Splits every polygon edge into exactly `k` equal segments.
    pub fn initial_per_edge(polygon: &Polygon, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("segments per edge must be >= 1".into()));
        }
        let counts = vec![k; polygon.num_edges()];
        Ok(Self::from_edge_counts(polygon, &counts))
    }

    fn from_edge_counts(polygon: &Polygon, counts: &[usize]) -> Self {
        let mut nodes = Vec::new();
        let mut edge_of = Vec::new();
        for (i, &k) in counts.iter().enumerate() {
            let (a, b) = polygon.edge(i);
            for j in 0..k {
                let t = j as f64 / k as f64;
                nodes.push(a + (b - a) * t);
                edge_of.push(i);
            }
        }
        BoundaryMesh {
            polygon: polygon.clone(),
            nodes,
            edge_of,
            level: 0,
        }
    }

    /// Bisects every element at its midpoint. N doubles, h halves, the
    /// quasi-uniformity constant is unchanged.
    pub fn refine_uniform(&self) -> Self {
        let n = self.nodes.len();
        let mut nodes = Vec::with_capacity(2 * n);
        let mut edge_of = Vec::with_capacity(2 * n);
        for i in 0..n {
            let a = self.nodes[i];
            let b = self.nodes[(i + 1) % n];
            nodes.push(a);
            nodes.push((a + b) * 0.5);
            edge_of.push(self.edge_of[i]);
            edge_of.push(self.edge_of[i]);
        }
        BoundaryMesh {
            polygon: self.polygon.clone(),
            nodes,
            edge_of,
            level: self.level + 1,
        }
    }
}

/// Refinement-stable union of elements selected on a coarse mesh.
#[derive(Debug, Clone)]
pub struct BoundaryRegion {
    coarse_level: u32,
    coarse_members: Vec<usize>,
}

impl BoundaryRegion {
    /// Selects elements whose midpoint satisfies `pred`.
    pub fn select<F: Fn(Point) -> bool>(mesh: &BoundaryMesh, pred: F) -> Result<Self> {
        let members: Vec<usize> = (0..mesh.num_elements())
            .filter(|&i| pred(mesh.element(i).midpoint))
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(BoundaryRegion {
            coarse_level: mesh.level(),
            coarse_members: members,
        })
    }

    /// Selects all elements lying on the given polygon edges.
    pub fn select_edges(mesh: &BoundaryMesh, edges: &[usize]) -> Result<Self> {
        let members: Vec<usize> = (0..mesh.num_elements())
            .filter(|&i| edges.contains(&mesh.element(i).edge))
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(BoundaryRegion {
            coarse_level: mesh.level(),
            coarse_members: members,
        })
    }

    /// Member element indices on `mesh`, which must descend from the mesh the
    /// region was selected on by uniform refinement.
    pub fn members(&self, mesh: &BoundaryMesh) -> Vec<usize> {
        assert!(
            mesh.level() >= self.coarse_level,
            "region selected on a finer mesh than queried"
        );
        let factor = 1usize << (mesh.level() - self.coarse_level);
        let mut out = Vec::with_capacity(self.coarse_members.len() * factor);
        for &c in &self.coarse_members {
            for j in 0..factor {
                out.push(c * factor + j);
            }
        }
        out
    }

    pub fn arc_length(&self, mesh: &BoundaryMesh) -> f64 {
        self.members(mesh)
            .iter()
            .map(|&i| mesh.element(i).length)
            .sum()
    }
}
