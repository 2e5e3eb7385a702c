//! The variant nonconforming Crouzeix-Raviart velocity space and the
//! piecewise-constant pressure space.
//!
//! Velocities are piecewise linear per component with edge-mean continuity
//! rules that differ by region: the full vector mean is continuous across
//! edges of the closed Stokes region (and vanishes on Gamma_s), while across
//! Darcy-side and Darcy-boundary edges only the normal-component mean is
//! continuous (vanishing on Gamma_d). Tangential components on those edges
//! are independent per element. For piecewise linear functions an edge-mean
//! condition is exactly a midpoint-value condition, which is how degrees of
//! freedom are realized here: every scalar DOF is an edge-midpoint value,
//! either in Cartesian components (Stokes side) or in the edge normal/tangent
//! frame (Darcy side and the interface).
//!
//! Constrained midpoint values (on Gamma_s and the normal component on
//! Gamma_d) are carried as separate "fixed" slots holding boundary data,
//! zero by default.

use crate::error::{Error, Result};
use crate::mesh::{EdgeClass, Mesh, Point2};
use crate::quadrature;

/// A free velocity degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VelocityDof {
    /// Cartesian component of the shared midpoint vector on an interior Stokes edge.
    SharedVector { edge: usize, component: u8 },
    /// Shared normal midpoint component on a Darcy or interface edge.
    SharedNormal { edge: usize },
    /// One-sided tangential midpoint component on a Darcy-type edge.
    TangentialLocal { edge: usize, element: usize },
}

/// A constrained (boundary) midpoint value; holds data rather than an unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstrainedDof {
    /// Cartesian component of the midpoint vector on a Gamma_s edge.
    BoundaryVector { edge: usize, component: u8 },
    /// Normal midpoint component on a Gamma_d edge.
    BoundaryNormal { edge: usize },
}

/// Reference to either a free unknown or a constrained data slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofRef {
    Free(usize),
    Fixed(usize),
}

/// How one edge's midpoint value decomposes into DOF slots.
#[derive(Clone, Debug)]
pub enum EdgeDofs {
    /// Shared (or boundary) Cartesian vector value.
    Vector { x: DofRef, y: DofRef },
    /// Normal/tangent frame; tangential slots are per adjacent element.
    Frame {
        normal: DofRef,
        tangential: Vec<(usize, usize)>, // (element, free dof index)
    },
}

/// Velocity DOF numbering together with the per-element local-to-global map.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub dofs: Vec<VelocityDof>,
    pub constrained: Vec<ConstrainedDof>,
    pub edge_dofs: Vec<EdgeDofs>,
    pub n_pressure: usize,
    /// For each element and each local edge (opposite the local vertex of the
    /// same index), the two (slot, direction) pairs whose linear combination
    /// is the edge-midpoint vector value seen from this element.
    element_dofs: Vec<[[(DofRef, Point2); 2]; 3]>,
}

impl DofMap {
    pub fn n_velocity(&self) -> usize {
        self.dofs.len()
    }

    pub fn n_constrained(&self) -> usize {
        self.constrained.len()
    }

    /// The (slot, direction) pairs of element `t`'s local edge `i`.
    pub fn local_dofs(&self, t: usize, i: usize) -> &[(DofRef, Point2); 2] {
        &self.element_dofs[t][i]
    }
}

/// Builds the deterministic DOF numbering: edges in index order, normal
/// before tangential, component 0 before component 1, tangential slots in
/// adjacency order.
pub fn build_dof_map(mesh: &Mesh) -> DofMap {
    let mut dofs = Vec::new();
    let mut constrained = Vec::new();
    let mut edge_dofs = Vec::with_capacity(mesh.edges.len());

    for (e, edge) in mesh.edges.iter().enumerate() {
        let layout = match edge.class {
            EdgeClass::InteriorStokes => {
                let x = DofRef::Free(dofs.len());
                dofs.push(VelocityDof::SharedVector { edge: e, component: 0 });
                let y = DofRef::Free(dofs.len());
                dofs.push(VelocityDof::SharedVector { edge: e, component: 1 });
                EdgeDofs::Vector { x, y }
            }
            EdgeClass::GammaS => {
                let x = DofRef::Fixed(constrained.len());
                constrained.push(ConstrainedDof::BoundaryVector { edge: e, component: 0 });
                let y = DofRef::Fixed(constrained.len());
                constrained.push(ConstrainedDof::BoundaryVector { edge: e, component: 1 });
                EdgeDofs::Vector { x, y }
            }
            EdgeClass::InteriorDarcy | EdgeClass::InterfaceI => {
                let normal = DofRef::Free(dofs.len());
                dofs.push(VelocityDof::SharedNormal { edge: e });
                let mut tangential = Vec::with_capacity(2);
                let t0 = edge.neighbors.0;
                tangential.push((t0, dofs.len()));
                dofs.push(VelocityDof::TangentialLocal { edge: e, element: t0 });
                if let Some(t1) = edge.neighbors.1 {
                    tangential.push((t1, dofs.len()));
                    dofs.push(VelocityDof::TangentialLocal { edge: e, element: t1 });
                }
                EdgeDofs::Frame { normal, tangential }
            }
            EdgeClass::GammaD => {
                let normal = DofRef::Fixed(constrained.len());
                constrained.push(ConstrainedDof::BoundaryNormal { edge: e });
                let t0 = edge.neighbors.0;
                let tangential = vec![(t0, dofs.len())];
                dofs.push(VelocityDof::TangentialLocal { edge: e, element: t0 });
                EdgeDofs::Frame { normal, tangential }
            }
        };
        edge_dofs.push(layout);
    }

    let zero = (DofRef::Free(usize::MAX), Point2::default());
    let mut element_dofs = vec![[[zero; 2]; 3]; mesh.triangles.len()];
    for (t, edges) in mesh.element_edges.iter().enumerate() {
        for (i, &e) in edges.iter().enumerate() {
            let edge = &mesh.edges[e];
            element_dofs[t][i] = match &edge_dofs[e] {
                EdgeDofs::Vector { x, y } => {
                    [(*x, Point2::new(1.0, 0.0)), (*y, Point2::new(0.0, 1.0))]
                }
                EdgeDofs::Frame { normal, tangential } => {
                    let (_, g) = tangential
                        .iter()
                        .find(|(elem, _)| *elem == t)
                        .expect("element must own a tangential slot on its Darcy-type edge");
                    [(*normal, edge.normal), (DofRef::Free(*g), edge.tangent())]
                }
            };
        }
    }

    DofMap {
        dofs,
        constrained,
        edge_dofs,
        n_pressure: mesh.triangles.len(),
        element_dofs,
    }
}

/// Coefficients of a discrete velocity: free unknowns plus fixed boundary data.
#[derive(Clone, Debug)]
pub struct DiscreteVelocity {
    pub free: Vec<f64>,
    pub fixed: Vec<f64>,
}

impl DiscreteVelocity {
    pub fn zeros(dofmap: &DofMap) -> Self {
        Self {
            free: vec![0.0; dofmap.n_velocity()],
            fixed: vec![0.0; dofmap.n_constrained()],
        }
    }

    pub fn value(&self, r: DofRef) -> f64 {
        match r {
            DofRef::Free(g) => self.free[g],
            DofRef::Fixed(c) => self.fixed[c],
        }
    }

    fn set(&mut self, r: DofRef, v: f64) {
        match r {
            DofRef::Free(g) => self.free[g] = v,
            DofRef::Fixed(c) => self.fixed[c] = v,
        }
    }
}

/// One constant pressure value per element.
#[derive(Clone, Debug)]
pub struct DiscretePressure {
    pub values: Vec<f64>,
}

impl DiscretePressure {
    /// Area-weighted mean over the whole domain.
    pub fn weighted_mean(&self, mesh: &Mesh) -> f64 {
        let total: f64 = mesh.triangles.iter().map(|t| t.area).sum();
        let sum: f64 = self
            .values
            .iter()
            .zip(&mesh.triangles)
            .map(|(p, t)| p * t.area)
            .sum();
        sum / total
    }
}

/// Gradients of the barycentric coordinates of one element (constant fields).
#[derive(Clone, Copy, Debug)]
pub struct ElementBasis {
    pub grad_lambda: [Point2; 3],
    pub area: f64,
}

impl ElementBasis {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let [a, b, c] = mesh.element_coords(t);
        let det = (b - a).cross(c - a); // = 2 * area > 0
        let grad = |p: Point2, q: Point2| Point2::new(p.y - q.y, q.x - p.x) * (1.0 / det);
        ElementBasis {
            grad_lambda: [grad(b, c), grad(c, a), grad(a, b)],
            area: 0.5 * det,
        }
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, origin: Point2, p: Point2) -> [f64; 3] {
        let d = p - origin;
        let l1 = self.grad_lambda[1].dot(d);
        let l2 = self.grad_lambda[2].dot(d);
        [1.0 - l1 - l2, l1, l2]
    }

    /// Crouzeix-Raviart basis values psi_i = 1 - 2 lambda_i at a point.
    pub fn psi(&self, origin: Point2, p: Point2) -> [f64; 3] {
        self.barycentric(origin, p).map(|l| 1.0 - 2.0 * l)
    }

    /// Gradient of psi_i (constant over the element).
    pub fn grad_psi(&self, i: usize) -> Point2 {
        self.grad_lambda[i] * -2.0
    }
}

/// Midpoint vector values of a discrete velocity on the three edges of an
/// element, in the element's own trace sense.
pub fn edge_midpoint_values(dofmap: &DofMap, u: &DiscreteVelocity, t: usize) -> [Point2; 3] {
    let mut m = [Point2::default(); 3];
    for i in 0..3 {
        for &(slot, dir) in dofmap.local_dofs(t, i) {
            m[i] = m[i] + dir * u.value(slot);
        }
    }
    m
}

/// Evaluates a discrete velocity inside element `t`.
pub fn eval_velocity(
    mesh: &Mesh,
    dofmap: &DofMap,
    u: &DiscreteVelocity,
    t: usize,
    p: Point2,
) -> Result<Point2> {
    if t >= mesh.triangles.len() {
        return Err(Error::InvalidMesh(format!("element id {t} out of range")));
    }
    let basis = ElementBasis::new(mesh, t);
    let origin = mesh.element_coords(t)[0];
    let psi = basis.psi(origin, p);
    let m = edge_midpoint_values(dofmap, u, t);
    Ok(m[0] * psi[0] + m[1] * psi[1] + m[2] * psi[2])
}

/// Constant velocity gradient on element `t`; entry [r][c] is du_r / dx_c.
pub fn eval_velocity_gradient(
    mesh: &Mesh,
    dofmap: &DofMap,
    u: &DiscreteVelocity,
    t: usize,
) -> [[f64; 2]; 2] {
    let basis = ElementBasis::new(mesh, t);
    let m = edge_midpoint_values(dofmap, u, t);
    let mut g = [[0.0; 2]; 2];
    for i in 0..3 {
        let gp = basis.grad_psi(i);
        g[0][0] += m[i].x * gp.x;
        g[0][1] += m[i].x * gp.y;
        g[1][0] += m[i].y * gp.x;
        g[1][1] += m[i].y * gp.y;
    }
    g
}

/// Crouzeix-Raviart interpolation: every edge DOF is set to the matching
/// component of the edge mean of `v`, so that the interpolant has the same
/// edge means as `v`. Edge means are computed with a Gauss rule exact for
/// the given polynomial degree (degree 3, two points, by default).
pub fn cr_interpolate<F>(mesh: &Mesh, dofmap: &DofMap, v: F, degree: usize) -> DiscreteVelocity
where
    F: Fn(Point2) -> Point2,
{
    let rule = quadrature::edge_rule(degree);
    let mut u = DiscreteVelocity::zeros(dofmap);
    for (e, edge) in mesh.edges.iter().enumerate() {
        let a = mesh.vertices[edge.vertices[0]];
        let b = mesh.vertices[edge.vertices[1]];
        let mut mean = Point2::default();
        for &(s, w) in &rule {
            mean = mean + v(a + (b - a) * s) * w;
        }
        match &dofmap.edge_dofs[e] {
            EdgeDofs::Vector { x, y } => {
                u.set(*x, mean.x);
                u.set(*y, mean.y);
            }
            EdgeDofs::Frame { normal, tangential } => {
                u.set(*normal, mean.dot(edge.normal));
                for &(_, g) in tangential {
                    u.free[g] = mean.dot(edge.tangent());
                }
            }
        }
    }
    u
}

/// Default interpolation with the two-point edge rule.
pub fn cr_interpolate_default<F>(mesh: &Mesh, dofmap: &DofMap, v: F) -> DiscreteVelocity
where
    F: Fn(Point2) -> Point2,
{
    cr_interpolate(mesh, dofmap, v, 3)
}

/// Element-wise divergence of a discrete velocity (one constant per cell).
pub fn discrete_divergence(mesh: &Mesh, dofmap: &DofMap, u: &DiscreteVelocity) -> DiscretePressure {
    let mut values = Vec::with_capacity(mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let basis = ElementBasis::new(mesh, t);
        let m = edge_midpoint_values(dofmap, u, t);
        let div: f64 = (0..3).map(|i| m[i].dot(basis.grad_psi(i))).sum();
        values.push(div);
    }
    DiscretePressure { values }
}
