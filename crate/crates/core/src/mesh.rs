//! Structured curvilinear triangulations of truncated exterior domains.
//!
//! The domain between the obstacle and the truncation circle is covered by a
//! single chart `(rho, theta)`: for `rho` in `[0, 1]` the obstacle curve is
//! blended radially into the circle `|x| = r1`, for `rho` in `[1, 2]` the
//! polar annulus `r1 <= |x| <= R` is traversed. The circle `|x| = r1` is
//! therefore always a union of element edges.

use crate::quadrature::TriangleRule;
use crate::{Error, Result};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Obstacle {
    Disk { radius: f64 },
    Ellipse { a1: f64, a2: f64 },
}

impl Obstacle {
    /// Point of the obstacle boundary at polar angle `theta`.
    fn boundary(&self, theta: f64) -> Point {
        match *self {
            Obstacle::Disk { radius } => [radius * theta.cos(), radius * theta.sin()],
            Obstacle::Ellipse { a1, a2 } => [a1 * theta.cos(), a2 * theta.sin()],
        }
    }

    fn extent(&self) -> f64 {
        match *self {
            Obstacle::Disk { radius } => radius,
            Obstacle::Ellipse { a1, a2 } => a1.max(a2),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Obstacle::Disk { radius } => PI * radius * radius,
            Obstacle::Ellipse { a1, a2 } => PI * a1 * a2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    pub obstacle: Obstacle,
    pub r1: f64,
    pub layer_width: f64,
}

impl Geometry {
    pub fn new(obstacle: Obstacle, r1: f64, layer_width: f64) -> Result<Self> {
        let g = Geometry { obstacle, r1, layer_width };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.obstacle {
            Obstacle::Disk { radius } => radius > 0.0,
            Obstacle::Ellipse { a1, a2 } => a1 > 0.0 && a2 > 0.0,
        };
        if !ok {
            return Err(Error::Geometry("obstacle dimensions must be positive".into()));
        }
        if !(self.obstacle.extent() < self.r1) {
            return Err(Error::Geometry(format!(
                "obstacle extent {} does not fit strictly inside r1 = {}",
                self.obstacle.extent(),
                self.r1
            )));
        }
        if !(self.layer_width > 0.0 && self.layer_width.is_finite()) {
            return Err(Error::Geometry(format!("layer width {} must be positive", self.layer_width)));
        }
        Ok(())
    }

    /// Truncation radius `R = r1 + L`.
    pub fn outer_radius(&self) -> f64 {
        self.r1 + self.layer_width
    }

    /// Exact area of the truncated domain.
    pub fn area(&self) -> f64 {
        PI * self.outer_radius().powi(2) - self.obstacle.area()
    }

    pub fn with_layer_width(&self, layer_width: f64) -> Result<Self> {
        Geometry::new(self.obstacle, self.r1, layer_width)
    }

    /// Chart map `(rho, theta) -> x`.
    pub fn chart(&self, rho: f64, theta: f64) -> Point {
        let (c, s) = (theta.cos(), theta.sin());
        if rho <= 1.0 {
            let e = self.obstacle.boundary(theta);
            [
                (1.0 - rho) * e[0] + rho * self.r1 * c,
                (1.0 - rho) * e[1] + rho * self.r1 * s,
            ]
        } else {
            let r = self.r1 + (rho - 1.0) * self.layer_width;
            [r * c, r * s]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Interior,
    Pml,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Obstacle,
    Outer,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// Equispaced Lagrange nodes of order `q` on the reference triangle
/// `(0,0), (1,0), (0,1)`, ordered by `j` then `i` for the node `(i/q, j/q)`.
pub fn lattice(q: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::with_capacity((q + 1) * (q + 2) / 2);
    for j in 0..=q {
        for i in 0..=q - j {
            out.push([i, j]);
        }
    }
    out
}

/// `prod_{a<m} (q l - a) / (a + 1)` and its derivative in `l`.
fn lagrange_factor(q: usize, m: usize, l: f64) -> (f64, f64) {
    let mut v = 1.0;
    let mut d = 0.0;
    for a in 0..m {
        let f = (q as f64 * l - a as f64) / (a + 1) as f64;
        let df = q as f64 / (a + 1) as f64;
        d = d * f + v * df;
        v *= f;
    }
    (v, d)
}

/// Values and reference gradients of the order-`q` Lagrange basis at `xi`.
pub fn lagrange_basis(q: usize, xi: Point) -> Vec<(f64, Point)> {
    let l1 = xi[0];
    let l2 = xi[1];
    let l0 = 1.0 - l1 - l2;
    lattice(q)
        .into_iter()
        .map(|[i, j]| {
            let k = q - i - j;
            let (a, da) = lagrange_factor(q, k, l0);
            let (b, db) = lagrange_factor(q, i, l1);
            let (c, dc) = lagrange_factor(q, j, l2);
            let v = a * b * c;
            let gx = -da * b * c + a * db * c;
            let gy = -da * b * c + a * b * dc;
            (v, [gx, gy])
        })
        .collect()
}

/// Triangulation with an order-`q` geometric map per triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    boundary: Vec<BoundaryEdge>,
    order: usize,
    nodes: Vec<Vec<Point>>,
    geometry: Option<Geometry>,
    /// Chart coordinates of the triangle corners, when the mesh was built
    /// from a geometry.
    charts: Option<Vec<[Point; 3]>>,
}

impl Mesh {
    /// Straight-sided mesh (`q = 1`) from explicit connectivity.
    pub fn straight(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Mesh> {
        if regions.len() != triangles.len() {
            return Err(Error::Validation("one region tag per triangle required".into()));
        }
        let nv = vertices.len();
        if triangles.iter().flatten().chain(boundary.iter().flat_map(|e| e.vertices.iter())).any(|&i| i >= nv) {
            return Err(Error::Validation("vertex index out of range".into()));
        }
        let nodes = triangles.iter().map(|t| t.iter().map(|&i| vertices[i]).collect()).collect();
        let mesh = Mesh { vertices, triangles, regions, boundary, order: 1, nodes, geometry: None, charts: None };
        mesh.check_jacobians()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn geometry(&self) -> Option<&Geometry> {
        self.geometry.as_ref()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Mapping nodes of triangle `t` in [`lattice`] order.
    pub fn nodes(&self, t: usize) -> &[Point] {
        &self.nodes[t]
    }

    /// Physical point and Jacobian `dx/dxi` of triangle `t` at reference point `xi`.
    pub fn map(&self, t: usize, xi: Point) -> (Point, [[f64; 2]; 2]) {
        map_with(&self.nodes[t], self.order, xi)
    }

    /// Area by quadrature of the mapped elements.
    pub fn area(&self) -> f64 {
        let rule = TriangleRule::with_degree(2 * self.order);
        let basis: Vec<_> = rule.points.iter().map(|&p| lagrange_basis(self.order, p)).collect();
        (0..self.triangles.len())
            .map(|t| {
                basis
                    .iter()
                    .zip(&rule.weights)
                    .map(|(b, w)| w * det(&jacobian(&self.nodes[t], b)))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Longest straight edge between triangle corners.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .map(|(a, b)| dist(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Checks the Jacobian of every triangle at the quadrature points of a
    /// degree `2q + 2` rule.
    pub fn check_jacobians(&self) -> Result<()> {
        let rule = TriangleRule::with_degree(2 * self.order + 2);
        let mut pts = rule.points.clone();
        pts.extend([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let basis: Vec<_> = pts.iter().map(|&p| lagrange_basis(self.order, p)).collect();
        for t in 0..self.triangles.len() {
            for b in &basis {
                if !(det(&jacobian(&self.nodes[t], b)) > 0.0) {
                    return Err(Error::InvertedElement { cell: t });
                }
            }
        }
        Ok(())
    }

    /// Uniform red refinement: every triangle is split into four, tags and
    /// curved maps are inherited.
    pub fn refine(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut regions = Vec::with_capacity(4 * self.triangles.len());
        let mut nodes = Vec::with_capacity(4 * self.triangles.len());
        let mut charts = self.charts.as_ref().map(|c| Vec::with_capacity(4 * c.len()));

        // child corners in parent reference coordinates
        const CHILDREN: [[Point; 3]; 4] = [
            [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]],
            [[0.5, 0.0], [1.0, 0.0], [0.5, 0.5]],
            [[0.0, 0.5], [0.5, 0.5], [0.0, 1.0]],
            [[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
        ];
        let lat = lattice(self.order);
        let q = self.order as f64;

        for (t, tri) in self.triangles.iter().enumerate() {
            let mut mid = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoints.entry(key).or_insert_with(|| {
                    let xi = [
                        [0.5, 0.0],
                        [0.5, 0.5],
                        [0.0, 0.5],
                    ][k];
                    vertices.push(self.point_in(t, xi));
                    vertices.len() - 1
                });
            }
            let corner_ids = [
                [tri[0], mid[0], mid[2]],
                [mid[0], tri[1], mid[1]],
                [mid[2], mid[1], tri[2]],
                [mid[0], mid[1], mid[2]],
            ];
            for (child, ids) in CHILDREN.iter().zip(corner_ids) {
                triangles.push(ids);
                regions.push(self.regions[t]);
                let local = |l: [usize; 2]| {
                    let (s, u) = (l[0] as f64 / q, l[1] as f64 / q);
                    [
                        child[0][0] + s * (child[1][0] - child[0][0]) + u * (child[2][0] - child[0][0]),
                        child[0][1] + s * (child[1][1] - child[0][1]) + u * (child[2][1] - child[0][1]),
                    ]
                };
                nodes.push(lat.iter().map(|&l| self.point_in(t, local(l))).collect());
                if let (Some(out), Some(parent)) = (charts.as_mut(), self.charts.as_ref()) {
                    let p = &parent[t];
                    let c = |xi: Point| {
                        [
                            p[0][0] + xi[0] * (p[1][0] - p[0][0]) + xi[1] * (p[2][0] - p[0][0]),
                            p[0][1] + xi[0] * (p[1][1] - p[0][1]) + xi[1] * (p[2][1] - p[0][1]),
                        ]
                    };
                    out.push([c(child[0]), c(child[1]), c(child[2])]);
                }
            }
        }

        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for e in &self.boundary {
            let [a, b] = e.vertices;
            let m = midpoints[&(a.min(b), a.max(b))];
            boundary.push(BoundaryEdge { vertices: [a, m], tag: e.tag });
            boundary.push(BoundaryEdge { vertices: [m, b], tag: e.tag });
        }

        Mesh {
            vertices,
            triangles,
            regions,
            boundary,
            order: self.order,
            nodes,
            geometry: self.geometry,
            charts,
        }
    }

    /// Point of triangle `t` at reference coordinate `xi`: through the exact
    /// chart when available, otherwise through the element map.
    fn point_in(&self, t: usize, xi: Point) -> Point {
        match (&self.geometry, &self.charts) {
            (Some(g), Some(c)) => {
                let p = &c[t];
                let rho = p[0][0] + xi[0] * (p[1][0] - p[0][0]) + xi[1] * (p[2][0] - p[0][0]);
                let th = p[0][1] + xi[0] * (p[1][1] - p[0][1]) + xi[1] * (p[2][1] - p[0][1]);
                g.chart(rho, th)
            }
            _ => self.map(t, xi).0,
        }
    }

    /// Plain-text export with 17 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        let f = |x: f64| format!("{x:.16e}");
        writeln!(s, "anisopml-mesh 1").unwrap();
        match (&self.geometry, &self.charts) {
            (Some(g), Some(_)) => {
                let ob = match g.obstacle {
                    Obstacle::Disk { radius } => format!("disk {}", f(radius)),
                    Obstacle::Ellipse { a1, a2 } => format!("ellipse {} {}", f(a1), f(a2)),
                };
                writeln!(s, "geometry {ob} {} {}", f(g.r1), f(g.layer_width)).unwrap();
            }
            _ => writeln!(s, "geometry none").unwrap(),
        }
        writeln!(
            s,
            "counts {} {} {} {}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary.len(),
            self.order
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(s, "v {} {}", f(v[0]), f(v[1])).unwrap();
        }
        for (t, r) in self.triangles.iter().zip(&self.regions) {
            let tag = match r {
                Region::Interior => "interior",
                Region::Pml => "pml",
            };
            writeln!(s, "t {} {} {} {tag}", t[0], t[1], t[2]).unwrap();
        }
        for e in &self.boundary {
            let tag = match e.tag {
                BoundaryTag::Obstacle => "obstacle",
                BoundaryTag::Outer => "outer",
            };
            writeln!(s, "b {} {} {tag}", e.vertices[0], e.vertices[1]).unwrap();
        }
        for n in &self.nodes {
            s.push('m');
            for p in n {
                write!(s, " {} {}", f(p[0]), f(p[1])).unwrap();
            }
            s.push('\n');
        }
        if let Some(c) = &self.charts {
            for p in c {
                s.push('c');
                for q in p {
                    write!(s, " {} {}", f(q[0]), f(q[1])).unwrap();
                }
                s.push('\n');
            }
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Mesh> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l.split_whitespace().map(String::from).collect())),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") }),
            }
        };
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        fn num<T: std::str::FromStr>(line: usize, s: Option<&String>) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            let s = s.ok_or(Error::Parse { line, msg: "missing field".into() })?;
            s.parse::<T>().map_err(|e| Error::Parse { line, msg: format!("{s:?}: {e}") })
        }

        let (n, head) = next("header")?;
        if head.first().map(String::as_str) != Some("anisopml-mesh") {
            return Err(perr(n, "missing anisopml-mesh header".into()));
        }
        let (n, g) = next("geometry line")?;
        let geometry = match g.get(1).map(String::as_str) {
            Some("none") => None,
            Some("disk") => Some(Geometry::new(
                Obstacle::Disk { radius: num(n, g.get(2))? },
                num(n, g.get(3))?,
                num(n, g.get(4))?,
            )?),
            Some("ellipse") => Some(Geometry::new(
                Obstacle::Ellipse { a1: num(n, g.get(2))?, a2: num(n, g.get(3))? },
                num(n, g.get(4))?,
                num(n, g.get(5))?,
            )?),
            _ => return Err(perr(n, "unknown geometry".into())),
        };
        let (n, c) = next("counts")?;
        let nv: usize = num(n, c.get(1))?;
        let nt: usize = num(n, c.get(2))?;
        let nb: usize = num(n, c.get(3))?;
        let q: usize = num(n, c.get(4))?;
        if q == 0 {
            return Err(perr(n, "mapping order must be at least 1".into()));
        }
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (n, v) = next("vertex")?;
            vertices.push([num(n, v.get(1))?, num(n, v.get(2))?]);
        }
        let mut triangles = Vec::with_capacity(nt);
        let mut regions = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (n, t) = next("triangle")?;
            let tri: [usize; 3] = [num(n, t.get(1))?, num(n, t.get(2))?, num(n, t.get(3))?];
            if tri.iter().any(|&i| i >= nv) {
                return Err(perr(n, "vertex index out of range".into()));
            }
            triangles.push(tri);
            regions.push(match t.get(4).map(String::as_str) {
                Some("interior") => Region::Interior,
                Some("pml") => Region::Pml,
                _ => return Err(perr(n, "unknown region tag".into())),
            });
        }
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (n, b) = next("boundary edge")?;
            let tag = match b.get(3).map(String::as_str) {
                Some("obstacle") => BoundaryTag::Obstacle,
                Some("outer") => BoundaryTag::Outer,
                _ => return Err(perr(n, "unknown boundary tag".into())),
            };
            boundary.push(BoundaryEdge { vertices: [num(n, b.get(1))?, num(n, b.get(2))?], tag });
        }
        let per = (q + 1) * (q + 2) / 2;
        let mut nodes = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (n, m) = next("mapping nodes")?;
            if m.len() != 1 + 2 * per {
                return Err(perr(n, format!("expected {per} mapping nodes")));
            }
            let mut pts = Vec::with_capacity(per);
            for k in 0..per {
                pts.push([num(n, m.get(1 + 2 * k))?, num(n, m.get(2 + 2 * k))?]);
            }
            nodes.push(pts);
        }
        let charts = if geometry.is_some() {
            let mut cs = Vec::with_capacity(nt);
            for _ in 0..nt {
                let (n, c) = next("chart coordinates")?;
                let mut p = [[0.0; 2]; 3];
                for (k, pk) in p.iter_mut().enumerate() {
                    *pk = [num(n, c.get(1 + 2 * k))?, num(n, c.get(2 + 2 * k))?];
                }
                cs.push(p);
            }
            Some(cs)
        } else {
            None
        };
        Ok(Mesh { vertices, triangles, regions, boundary, order: q, nodes, geometry, charts })
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn det(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

fn jacobian(nodes: &[Point], basis: &[(f64, Point)]) -> [[f64; 2]; 2] {
    let mut j = [[0.0; 2]; 2];
    for (x, (_, g)) in nodes.iter().zip(basis) {
        for a in 0..2 {
            for b in 0..2 {
                j[a][b] += x[a] * g[b];
            }
        }
    }
    j
}

/// Evaluates an element map from its nodes.
pub fn map_with(nodes: &[Point], q: usize, xi: Point) -> (Point, [[f64; 2]; 2]) {
    let basis = lagrange_basis(q, xi);
    let mut x = [0.0; 2];
    for (p, (v, _)) in nodes.iter().zip(&basis) {
        x[0] += v * p[0];
        x[1] += v * p[1];
    }
    (x, jacobian(nodes, &basis))
}

/// Builds the structured mesh of `geometry` with quad sides at most `hmax`
/// and order-`q` element maps.
pub fn generate(geometry: &Geometry, hmax: f64, q: usize) -> Result<Mesh> {
    geometry.validate()?;
    if !(hmax > 0.0 && hmax.is_finite()) {
        return Err(Error::Validation(format!("hmax = {hmax} must be positive")));
    }
    if q == 0 {
        return Err(Error::Validation("mapping order q must be at least 1".into()));
    }
    let big_r = geometry.outer_radius();
    let n_theta = (((2.0 * PI * big_r / hmax - 1e-9).ceil() as usize).max(8)).div_ceil(4) * 4;
    // longest radial segment of the blended annulus
    let gap = (0..720)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / 720.0;
            dist(geometry.chart(0.0, t), geometry.chart(1.0, t))
        })
        .fold(0.0, f64::max);
    let n_int = ((gap / hmax - 1e-9).ceil() as usize).max(1);
    let n_pml = ((geometry.layer_width / hmax - 1e-9).ceil() as usize).max(1);
    let n_rad = n_int + n_pml;

    let rho_of = |i: usize| {
        if i <= n_int {
            i as f64 / n_int as f64
        } else {
            1.0 + (i - n_int) as f64 / n_pml as f64
        }
    };
    let theta_of = |j: usize| 2.0 * PI * j as f64 / n_theta as f64;
    let vid = |i: usize, j: usize| i * n_theta + j % n_theta;

    let mut vertices = Vec::with_capacity((n_rad + 1) * n_theta);
    for i in 0..=n_rad {
        for j in 0..n_theta {
            vertices.push(geometry.chart(rho_of(i), theta_of(j)));
        }
    }

    let lat = lattice(q);
    let mut triangles = Vec::with_capacity(2 * n_rad * n_theta);
    let mut regions = Vec::with_capacity(2 * n_rad * n_theta);
    let mut nodes = Vec::with_capacity(2 * n_rad * n_theta);
    let mut charts = Vec::with_capacity(2 * n_rad * n_theta);
    for i in 0..n_rad {
        let region = if i < n_int { Region::Interior } else { Region::Pml };
        for j in 0..n_theta {
            let a = [rho_of(i), theta_of(j)];
            let b = [rho_of(i + 1), theta_of(j)];
            let c = [rho_of(i + 1), theta_of(j + 1)];
            let d = [rho_of(i), theta_of(j + 1)];
            for (ids, p) in [
                ([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)], [a, b, c]),
                ([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)], [a, c, d]),
            ] {
                triangles.push(ids);
                regions.push(region);
                nodes.push(
                    lat.iter()
                        .map(|&[s, u]| {
                            let (s, u) = (s as f64 / q as f64, u as f64 / q as f64);
                            let rho = p[0][0] + s * (p[1][0] - p[0][0]) + u * (p[2][0] - p[0][0]);
                            let th = p[0][1] + s * (p[1][1] - p[0][1]) + u * (p[2][1] - p[0][1]);
                            geometry.chart(rho, th)
                        })
                        .collect(),
                );
                charts.push(p);
            }
        }
    }

    let mut boundary = Vec::with_capacity(2 * n_theta);
    for j in 0..n_theta {
        boundary.push(BoundaryEdge { vertices: [vid(0, j + 1), vid(0, j)], tag: BoundaryTag::Obstacle });
    }
    for j in 0..n_theta {
        boundary.push(BoundaryEdge { vertices: [vid(n_rad, j), vid(n_rad, j + 1)], tag: BoundaryTag::Outer });
    }

    let mesh = Mesh {
        vertices,
        triangles,
        regions,
        boundary,
        order: q,
        nodes,
        geometry: Some(*geometry),
        charts: Some(charts),
    };
    mesh.check_jacobians()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_basis_is_nodal() {
        for q in 1..=6 {
            let lat = lattice(q);
            for (k, l) in lat.iter().enumerate() {
                let xi = [l[0] as f64 / q as f64, l[1] as f64 / q as f64];
                for (m, (v, _)) in lagrange_basis(q, xi).iter().enumerate() {
                    let expect = if m == k { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-12, "q={q} k={k} m={m} v={v}");
                }
            }
        }
    }

    #[test]
    fn lagrange_gradients_match_differences() {
        let xi = [0.23, 0.41];
        let h = 1e-6;
        for q in 1..=5 {
            let b = lagrange_basis(q, xi);
            let bx = lagrange_basis(q, [xi[0] + h, xi[1]]);
            let by = lagrange_basis(q, [xi[0], xi[1] + h]);
            for k in 0..b.len() {
                assert!(((bx[k].0 - b[k].0) / h - b[k].1[0]).abs() < 1e-4);
                assert!(((by[k].0 - b[k].0) / h - b[k].1[1]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Geometry::new(Obstacle::Disk { radius: 1.5 }, 1.5, 2.0).is_err());
        assert!(Geometry::new(Obstacle::Ellipse { a1: 0.5, a2: 1.6 }, 1.5, 2.0).is_err());
        assert!(Geometry::new(Obstacle::Disk { radius: 1.0 }, 1.5, 0.0).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let g = Geometry::new(Obstacle::Ellipse { a1: 0.5, a2: 1.0 }, 1.5, 2.0).unwrap();
        let m = generate(&g, 0.8, 3).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }
}
