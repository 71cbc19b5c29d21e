//! High-order finite elements for `<sigma~ grad u, grad v> - omega^2 <w u, v>`
//! on curved triangular meshes.
//!
//! The basis is hierarchic: vertex hats, scaled integrated Legendre edge
//! modes (oriented from the lower to the higher global vertex), and
//! Dubiner-type interior bubbles. The forms are bilinear (no conjugation),
//! so both matrices are complex symmetric.

use crate::media::Medium;
use crate::mesh::{lagrange_basis, BoundaryTag, Mesh, Point, Region};
use crate::quadrature::TriangleRule;
use crate::scaling::ScalingProfile;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};

/// Highest supported polynomial order.
pub const MAX_ORDER: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryConditions {
    pub obstacle: BoundaryCondition,
    pub outer: BoundaryCondition,
}

impl Default for BoundaryConditions {
    /// Sound-hard obstacle, truncated by a homogeneous Dirichlet condition.
    fn default() -> Self {
        BoundaryConditions { obstacle: BoundaryCondition::Neumann, outer: BoundaryCondition::Dirichlet }
    }
}

impl BoundaryConditions {
    fn get(&self, tag: BoundaryTag) -> BoundaryCondition {
        match tag {
            BoundaryTag::Obstacle => self.obstacle,
            BoundaryTag::Outer => self.outer,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofEntity {
    Vertex(usize),
    Edge { edge: usize, mode: usize },
    Interior { triangle: usize, mode: usize },
}

/// First-order dual number in the two reference coordinates.
#[derive(Clone, Copy, Debug)]
struct Dual {
    v: f64,
    g: [f64; 2],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, g: [0.0, 0.0] }
    }

    fn scale(self, s: f64) -> Self {
        Dual { v: self.v * s, g: [self.g[0] * s, self.g[1] * s] }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, g: [self.g[0] + o.g[0], self.g[1] + o.g[1]] }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, g: [self.g[0] - o.g[0], self.g[1] - o.g[1]] }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            g: [self.g[0] * o.v + self.v * o.g[0], self.g[1] * o.v + self.v * o.g[1]],
        }
    }
}

/// Scaled Legendre polynomials `t^n P_n(x/t)` for `n = 0..=n_max`.
fn scaled_legendre(n_max: usize, x: Dual, t: Dual) -> Vec<Dual> {
    let mut p = vec![Dual::constant(1.0)];
    if n_max >= 1 {
        p.push(x);
    }
    let t2 = t * t;
    for n in 1..n_max {
        let next = (x * p[n]).scale((2 * n + 1) as f64) - (t2 * p[n - 1]).scale(n as f64);
        p.push(next.scale(1.0 / (n + 1) as f64));
    }
    p
}

/// Local edge `k` joins local vertices `k` and `(k + 1) % 3`.
const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Number of shape functions of order `p` on a triangle.
pub fn local_dofs(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Shape functions and reference gradients at `xi` in local order: three
/// vertex functions, then modes `2..=p` of edges 0, 1, 2 (each oriented from
/// its first to its second local vertex), then bubbles `(i, j)`,
/// `i + j <= p - 3`.
pub fn reference_basis(p: usize, xi: Point) -> Vec<(f64, [f64; 2])> {
    let lam = [
        Dual { v: 1.0 - xi[0] - xi[1], g: [-1.0, -1.0] },
        Dual { v: xi[0], g: [1.0, 0.0] },
        Dual { v: xi[1], g: [0.0, 1.0] },
    ];
    let mut out: Vec<Dual> = lam.to_vec();
    for [a, b] in LOCAL_EDGES {
        let x = lam[b] - lam[a];
        let t = lam[a] + lam[b];
        let ps = scaled_legendre(p, x, t);
        let t2 = t * t;
        for k in 2..=p {
            out.push((ps[k] - t2 * ps[k - 2]).scale(1.0 / (2 * k - 1) as f64));
        }
    }
    if p >= 3 {
        let cube = lam[0] * lam[1] * lam[2];
        let ps = scaled_legendre(p - 3, lam[1] - lam[0], lam[0] + lam[1]);
        let pl = scaled_legendre(p - 3, lam[2].scale(2.0) - Dual::constant(1.0), Dual::constant(1.0));
        for i in 0..=p - 3 {
            for j in 0..=p - 3 - i {
                out.push(cube * ps[i] * pl[j]);
            }
        }
    }
    out.into_iter().map(|d| (d.v, d.g)).collect()
}

/// Discrete space over a mesh.
#[derive(Clone, Debug)]
pub struct FunctionSpace<'a> {
    mesh: &'a Mesh,
    order: usize,
    bcs: BoundaryConditions,
    n_edges: usize,
    /// Global edge index of each local edge.
    tri_edges: Vec<[usize; 3]>,
    /// Global dof index (before elimination) to free index.
    free: Vec<Option<usize>>,
    entities: Vec<DofEntity>,
}

impl<'a> FunctionSpace<'a> {
    pub fn new(mesh: &'a Mesh, order: usize, bcs: BoundaryConditions) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::Validation(format!("polynomial order {order} outside 1..={MAX_ORDER}")));
        }
        let nv = mesh.vertices().len();
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut tri_edges = Vec::with_capacity(mesh.num_triangles());
        for t in mesh.triangles() {
            let mut ids = [0; 3];
            for (k, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let key = (t[*a].min(t[*b]), t[*a].max(t[*b]));
                let next = edge_ids.len();
                ids[k] = *edge_ids.entry(key).or_insert(next);
            }
            tri_edges.push(ids);
        }
        let n_edges = edge_ids.len();
        let per_edge = order - 1;
        let per_bubble = local_dofs(order) - 3 - 3 * per_edge;
        let total = nv + n_edges * per_edge + mesh.num_triangles() * per_bubble;

        let mut fixed = vec![false; total];
        for e in mesh.boundary_edges() {
            if bcs.get(e.tag) == BoundaryCondition::Dirichlet {
                let [a, b] = e.vertices;
                fixed[a] = true;
                fixed[b] = true;
                let id = edge_ids
                    .get(&(a.min(b), a.max(b)))
                    .ok_or_else(|| Error::Validation(format!("boundary edge ({a}, {b}) is not a mesh edge")))?;
                for m in 0..per_edge {
                    fixed[nv + id * per_edge + m] = true;
                }
            }
        }
        let mut free = vec![None; total];
        let mut entities = Vec::new();
        for g in 0..total {
            if fixed[g] {
                continue;
            }
            free[g] = Some(entities.len());
            entities.push(if g < nv {
                DofEntity::Vertex(g)
            } else if g < nv + n_edges * per_edge {
                let r = g - nv;
                DofEntity::Edge { edge: r / per_edge, mode: r % per_edge + 2 }
            } else {
                let r = g - nv - n_edges * per_edge;
                DofEntity::Interior { triangle: r / per_bubble, mode: r % per_bubble }
            });
        }
        Ok(FunctionSpace { mesh, order, bcs, n_edges, tri_edges, free, entities })
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn boundary_conditions(&self) -> BoundaryConditions {
        self.bcs
    }

    /// Number of free degrees of freedom.
    pub fn dof_count(&self) -> usize {
        self.entities.len()
    }

    pub fn entity(&self, dof: usize) -> DofEntity {
        self.entities[dof]
    }

    /// Free index (if any) and sign of every local shape function of triangle `t`.
    pub fn element_dofs(&self, t: usize) -> Vec<(Option<usize>, f64)> {
        let p = self.order;
        let nv = self.mesh.vertices().len();
        let per_edge = p - 1;
        let per_bubble = local_dofs(p) - 3 - 3 * per_edge;
        let tri = self.mesh.triangles()[t];
        let mut out = Vec::with_capacity(local_dofs(p));
        for &v in &tri {
            out.push((self.free[v], 1.0));
        }
        for (k, [a, b]) in LOCAL_EDGES.iter().enumerate() {
            let reversed = tri[*a] > tri[*b];
            for m in 2..=p {
                let sign = if reversed && m % 2 == 1 { -1.0 } else { 1.0 };
                out.push((self.free[nv + self.tri_edges[t][k] * per_edge + (m - 2)], sign));
            }
        }
        let base = nv + self.n_edges * per_edge + t * per_bubble;
        for m in 0..per_bubble {
            out.push((self.free[base + m], 1.0));
        }
        out
    }
}

/// `sigma~` and `w` at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledCoefficient {
    pub tensor: [[Complex64; 2]; 2],
    pub weight: Complex64,
}

fn unscaled(medium: &Medium) -> ScaledCoefficient {
    let s = medium.sigma();
    let c = |i, j| Complex64::new(s.get(i, j), 0.0);
    ScaledCoefficient { tensor: [[c(0, 0), c(0, 1)], [c(1, 0), c(1, 1)]], weight: Complex64::new(1.0, 0.0) }
}

/// 2D scaled tensor `(d~ d)^{-1} F diag(d~, d) F^T sigma F diag(d~, d) F^T`
/// with `F = (x^, x^_perp)` and weight `d~ d`.
pub fn scaled_tensor(x: Point, profile: &ScalingProfile, medium: &Medium) -> Result<ScaledCoefficient> {
    if medium.dim() != 2 {
        return Err(Error::Validation("scaled_tensor needs a 2D medium".into()));
    }
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        return Err(Error::Singularity("polar frame undefined at the origin".into()));
    }
    if r <= profile.r1() {
        return Ok(unscaled(medium));
    }
    let st = profile.eval(r);
    let (dt, d) = (st.d_tilde, st.d);
    let e = [x[0] / r, x[1] / r];
    let f = [[e[0], -e[1]], [e[1], e[0]]];
    // S = F diag(d~, d) F^T
    let diag = [dt, d];
    let mut s = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = (0..2).map(|k| f[i][k] * diag[k] * f[j][k]).sum();
        }
    }
    let sig = medium.sigma();
    let mut tmp = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            tmp[i][j] = (0..2).map(|k| s[i][k] * sig.get(k, j)).sum();
        }
    }
    let scale = 1.0 / (dt * d);
    let mut t = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            t[i][j] = scale * (0..2).map(|k| tmp[i][k] * s[k][j]).sum::<Complex64>();
        }
    }
    // symmetric by construction; remove rounding asymmetry
    let off = 0.5 * (t[0][1] + t[1][0]);
    t[0][1] = off;
    t[1][0] = off;
    Ok(ScaledCoefficient { tensor: t, weight: dt * d })
}

/// Trailing dofs `start..n` split into consecutive blocks of `size` that
/// couple only within their block (element bubbles).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteriorBlocks {
    pub start: usize,
    pub size: usize,
}

/// Stiffness and mass matrices over the free dofs.
#[derive(Clone, Debug, PartialEq)]
pub struct AssembledPencil {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    pub interior: Option<InteriorBlocks>,
}

impl AssembledPencil {
    pub fn new(k: CsrMatrix, m: CsrMatrix) -> Self {
        AssembledPencil { k, m, interior: None }
    }

    pub fn dim(&self) -> usize {
        self.k.dim()
    }
}

/// Dense element matrices (upper triangle mirrored) in local order.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementMatrices {
    pub stiffness: Vec<Vec<Complex64>>,
    pub mass: Vec<Vec<Complex64>>,
}

struct ReferenceTable {
    weights: Vec<f64>,
    shape: Vec<Vec<(f64, [f64; 2])>>,
    geometry: Vec<Vec<(f64, [f64; 2])>>,
}

impl ReferenceTable {
    fn new(p: usize, q: usize, degree: usize) -> Self {
        let rule = TriangleRule::with_degree(degree);
        ReferenceTable {
            shape: rule.points.iter().map(|&x| reference_basis(p, x)).collect(),
            geometry: rule.points.iter().map(|&x| lagrange_basis(q, x)).collect(),
            weights: rule.weights,
        }
    }
}

fn element_matrices_with(
    space: &FunctionSpace,
    t: usize,
    profile: Option<&ScalingProfile>,
    medium: &Medium,
    table: &ReferenceTable,
) -> Result<ElementMatrices> {
    let n = local_dofs(space.order);
    let zero = Complex64::new(0.0, 0.0);
    let mut kk = vec![vec![zero; n]; n];
    let mut mm = vec![vec![zero; n]; n];
    let nodes = space.mesh.nodes(t);
    let region = space.mesh.regions()[t];
    let mut grads = vec![[0.0f64; 2]; n];
    let mut agrads = vec![[zero; 2]; n];
    for ((w, shape), geo) in table.weights.iter().zip(&table.shape).zip(&table.geometry) {
        let mut x = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for (p, (v, g)) in nodes.iter().zip(geo) {
            for a in 0..2 {
                x[a] += v * p[a];
                for b in 0..2 {
                    jac[a][b] += p[a] * g[b];
                }
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det > 0.0) {
            return Err(Error::Assembly(format!(
                "nonpositive mapping Jacobian {det:e} in triangle {t} at {x:?}"
            )));
        }
        let coef = match (region, profile) {
            (Region::Pml, Some(p)) => scaled_tensor(x, p, medium)?,
            _ => unscaled(medium),
        };
        // J^{-T}
        let inv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        for (i, (_, g)) in shape.iter().enumerate() {
            grads[i] = [
                inv_t[0][0] * g[0] + inv_t[0][1] * g[1],
                inv_t[1][0] * g[0] + inv_t[1][1] * g[1],
            ];
            let a = &coef.tensor;
            agrads[i] = [
                a[0][0] * grads[i][0] + a[0][1] * grads[i][1],
                a[1][0] * grads[i][0] + a[1][1] * grads[i][1],
            ];
        }
        let wd = w * det;
        let wm = coef.weight * wd;
        for i in 0..n {
            let (vi, gi) = (shape[i].0, grads[i]);
            let mrow = wm * vi;
            for j in i..n {
                kk[i][j] += wd * (agrads[j][0] * gi[0] + agrads[j][1] * gi[1]);
                mm[i][j] += mrow * shape[j].0;
            }
        }
    }
    let signs: Vec<f64> = space.element_dofs(t).iter().map(|d| d.1).collect();
    for i in 0..n {
        for j in i..n {
            let s = signs[i] * signs[j];
            kk[i][j] *= s;
            mm[i][j] *= s;
            kk[j][i] = kk[i][j];
            mm[j][i] = mm[i][j];
        }
    }
    Ok(ElementMatrices { stiffness: kk, mass: mm })
}

/// Collapsed Gauss rule with `2p + 2` points per direction, exact for
/// polynomials of degree `4p + 2`.
pub fn default_quadrature_degree(p: usize) -> usize {
    4 * p + 2
}

/// Element matrices of triangle `t` with the default quadrature.
pub fn element_matrices(
    space: &FunctionSpace,
    t: usize,
    profile: Option<&ScalingProfile>,
    medium: &Medium,
) -> Result<ElementMatrices> {
    let table = ReferenceTable::new(space.order, space.mesh.order(), default_quadrature_degree(space.order));
    element_matrices_with(space, t, profile, medium, &table)
}

/// Assembles `(K, M)` with the default quadrature. Without a profile the
/// unscaled problem is assembled.
pub fn assemble(space: &FunctionSpace, profile: Option<&ScalingProfile>, medium: &Medium) -> Result<AssembledPencil> {
    assemble_with_degree(space, profile, medium, default_quadrature_degree(space.order))
}

const CHUNK: usize = 512;

/// Assembly with a triangle rule exact to polynomial `degree`.
pub fn assemble_with_degree(
    space: &FunctionSpace,
    profile: Option<&ScalingProfile>,
    medium: &Medium,
    degree: usize,
) -> Result<AssembledPencil> {
    if medium.dim() != 2 {
        return Err(Error::Validation("assembly needs a 2D medium".into()));
    }
    let n = space.dof_count();
    let nt = space.mesh.num_triangles();
    let dofs: Vec<Vec<(Option<usize>, f64)>> = (0..nt).map(|t| space.element_dofs(t)).collect();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for d in &dofs {
        for (i, _) in d {
            if let Some(i) = i {
                rows[*i].extend(d.iter().filter_map(|x| x.0));
            }
        }
    }
    let mut k = CsrMatrix::from_pattern(n, rows)?;
    let mut m = k.clone();
    let table = ReferenceTable::new(space.order, space.mesh.order(), degree);
    let ids: Vec<usize> = (0..nt).collect();
    for chunk in ids.chunks(CHUNK) {
        let local: Vec<ElementMatrices> = chunk
            .par_iter()
            .map(|&t| element_matrices_with(space, t, profile, medium, &table))
            .collect::<Result<_>>()?;
        for (&t, em) in chunk.iter().zip(&local) {
            let d = &dofs[t];
            for (a, (gi, _)) in d.iter().enumerate() {
                let Some(i) = *gi else { continue };
                for (b, (gj, _)) in d.iter().enumerate().skip(a) {
                    let Some(j) = *gj else { continue };
                    k.add(i, j, em.stiffness[a][b]);
                    m.add(i, j, em.mass[a][b]);
                    if i != j {
                        k.add(j, i, em.stiffness[a][b]);
                        m.add(j, i, em.mass[a][b]);
                    }
                }
            }
        }
    }
    let per_bubble = local_dofs(space.order) - 3 * space.order;
    let interior = (per_bubble > 0).then(|| InteriorBlocks { start: n - nt * per_bubble, size: per_bubble });
    Ok(AssembledPencil { k, m, interior })
}

/// `||K u - omega^2 M u|| / (||u|| (||K||_F + |omega^2| ||M||_F))`.
pub fn rayleigh_residual(pencil: &AssembledPencil, omega: Complex64, u: &[Complex64]) -> f64 {
    let w2 = omega * omega;
    let ku = pencil.k.mul_vec(u);
    let mu = pencil.m.mul_vec(u);
    let r: f64 = ku.iter().zip(&mu).map(|(a, b)| (a - w2 * b).norm_sqr()).sum::<f64>().sqrt();
    let un: f64 = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    r / (un * (pencil.k.frobenius_norm() + w2.norm() * pencil.m.frobenius_norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_count_and_partition_of_unity() {
        for p in 1..=MAX_ORDER {
            let b = reference_basis(p, [0.2, 0.3]);
            assert_eq!(b.len(), local_dofs(p));
            let s: f64 = b[..3].iter().map(|x| x.0).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_modes_vanish_on_other_edges() {
        let p = 6;
        // points on edge 1 (between local vertices 1 and 2) and edge 2
        for xi in [[0.3, 0.7], [0.0, 0.45]] {
            let b = reference_basis(p, xi);
            for m in 0..p - 1 {
                assert!(b[3 + m].0.abs() < 1e-15);
            }
        }
        // bubbles vanish on the whole boundary
        for xi in [[0.3, 0.0], [0.0, 0.6], [0.25, 0.75]] {
            let b = reference_basis(p, xi);
            for v in &b[3 + 3 * (p - 1)..] {
                assert!(v.0.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gradients_match_differences() {
        let h = 1e-7;
        let xi = [0.21, 0.33];
        let b = reference_basis(5, xi);
        let bx = reference_basis(5, [xi[0] + h, xi[1]]);
        let by = reference_basis(5, [xi[0], xi[1] + h]);
        for k in 0..b.len() {
            assert!(((bx[k].0 - b[k].0) / h - b[k].1[0]).abs() < 1e-5);
            assert!(((by[k].0 - b[k].0) / h - b[k].1[1]).abs() < 1e-5);
        }
    }

    #[test]
    fn edge_mode_parity() {
        // reversing the edge direction multiplies mode m by (-1)^m
        let p = 6;
        let a = reference_basis(p, [0.3, 0.0]);
        let b = reference_basis(p, [0.7, 0.0]);
        for m in 2..=p {
            let s = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((a[3 + m - 2].0 - s * b[3 + m - 2].0).abs() < 1e-15);
        }
    }
}
