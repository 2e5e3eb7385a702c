//! Dense brute-force assembly oracle.
//!
//! Re-derives every block by looping over global basis-function pairs and
//! integrating with generic high-order quadrature. Basis functions are
//! evaluated through the reference element and the affine map Jacobian, a
//! different route than the library's barycentric-gradient assembly, so the
//! two implementations share nothing but the DOF layout.

// Each test binary uses its own subset of the oracle.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use stokes_darcy::assembly::MaterialParams;
use stokes_darcy::mesh::{EdgeClass, Mesh, Point2, Region};
use stokes_darcy::quadrature;
use stokes_darcy::space::{DofMap, DofRef};

pub fn ext_index(dofmap: &DofMap, slot: DofRef) -> usize {
    match slot {
        DofRef::Free(g) => g,
        DofRef::Fixed(c) => dofmap.n_velocity() + c,
    }
}

pub fn ext_dim(dofmap: &DofMap) -> usize {
    dofmap.n_velocity() + dofmap.n_constrained()
}

/// Affine map of one element: x = v0 + B x_ref.
struct RefMap {
    v0: Point2,
    b_inv: [[f64; 2]; 2],
}

impl RefMap {
    fn new(mesh: &Mesh, t: usize) -> Self {
        let [v0, v1, v2] = mesh.element_coords(t);
        let b = [[v1.x - v0.x, v2.x - v0.x], [v1.y - v0.y, v2.y - v0.y]];
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        let b_inv = [
            [b[1][1] / det, -b[0][1] / det],
            [-b[1][0] / det, b[0][0] / det],
        ];
        Self { v0, b_inv }
    }

    fn to_reference(&self, p: Point2) -> (f64, f64) {
        let d = p - self.v0;
        (
            self.b_inv[0][0] * d.x + self.b_inv[0][1] * d.y,
            self.b_inv[1][0] * d.x + self.b_inv[1][1] * d.y,
        )
    }

    /// psi_i = 1 - 2 lambda_i through the reference coordinates.
    fn psi(&self, p: Point2) -> [f64; 3] {
        let (x, y) = self.to_reference(p);
        [1.0 - 2.0 * (1.0 - x - y), 1.0 - 2.0 * x, 1.0 - 2.0 * y]
    }

    /// Physical gradients of psi_i via the inverse-transpose Jacobian.
    fn grad_psi(&self) -> [Point2; 3] {
        let ref_grads = [(-1.0, -1.0), (1.0, 0.0), (0.0, 1.0)];
        let mut out = [Point2::default(); 3];
        for (i, (gx, gy)) in ref_grads.into_iter().enumerate() {
            out[i] = Point2::new(
                -2.0 * (self.b_inv[0][0] * gx + self.b_inv[1][0] * gy),
                -2.0 * (self.b_inv[0][1] * gx + self.b_inv[1][1] * gy),
            );
        }
        out
    }
}

/// Vector value of the extended basis function `slot` on element `t`.
fn basis_value(mesh: &Mesh, dofmap: &DofMap, t: usize, slot: usize, p: Point2) -> Point2 {
    let map = RefMap::new(mesh, t);
    let psi = map.psi(p);
    let mut out = Point2::default();
    for i in 0..3 {
        for &(s, dir) in dofmap.local_dofs(t, i) {
            if ext_index(dofmap, s) == slot {
                out = out + dir * psi[i];
            }
        }
    }
    out
}

/// Gradient of the extended basis function `slot` on element `t`; [r][c] is
/// d phi_r / d x_c (constant per element).
fn basis_gradient(mesh: &Mesh, dofmap: &DofMap, t: usize, slot: usize) -> [[f64; 2]; 2] {
    let map = RefMap::new(mesh, t);
    let grads = map.grad_psi();
    let mut out = [[0.0; 2]; 2];
    for i in 0..3 {
        for &(s, dir) in dofmap.local_dofs(t, i) {
            if ext_index(dofmap, s) == slot {
                out[0][0] += dir.x * grads[i].x;
                out[0][1] += dir.x * grads[i].y;
                out[1][0] += dir.y * grads[i].x;
                out[1][1] += dir.y * grads[i].y;
            }
        }
    }
    out
}

fn triangle_points(mesh: &Mesh, t: usize, degree: usize) -> Vec<(Point2, f64)> {
    let rule = quadrature::triangle_rule(degree);
    let [a, b, c] = mesh.element_coords(t);
    let area = mesh.triangles[t].area;
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&(x, y), &w)| (a + (b - a) * x + (c - a) * y, 2.0 * area * w))
        .collect()
}

fn edge_points(mesh: &Mesh, e: usize, n_gauss: usize) -> Vec<(Point2, f64)> {
    let edge = &mesh.edges[e];
    let a = mesh.vertices[edge.vertices[0]];
    let b = mesh.vertices[edge.vertices[1]];
    quadrature::gauss_01(n_gauss)
        .into_iter()
        .map(|(s, w)| (a + (b - a) * s, w * edge.length))
        .collect()
}

/// Dense stiffness block over the extended slots, by basis-pair quadrature.
pub fn oracle_stiffness(mesh: &Mesh, dofmap: &DofMap, params: &MaterialParams) -> DMatrix<f64> {
    let dim = ext_dim(dofmap);
    let mut m = DMatrix::zeros(dim, dim);
    let k_inv = params.k_inverse();
    for t in 0..mesh.triangles.len() {
        let region = mesh.triangles[t].region;
        for (p, w) in triangle_points(mesh, t, 6) {
            for a in 0..dim {
                let ga = basis_gradient(mesh, dofmap, t, a);
                let va = basis_value(mesh, dofmap, t, a, p);
                for b in 0..dim {
                    let gb = basis_gradient(mesh, dofmap, t, b);
                    let vb = basis_value(mesh, dofmap, t, b, p);
                    let val = match region {
                        Region::Stokes => {
                            let mut dd = 0.0;
                            for r in 0..2 {
                                for c in 0..2 {
                                    let da = 0.5 * (ga[r][c] + ga[c][r]);
                                    let db = 0.5 * (gb[r][c] + gb[c][r]);
                                    dd += da * db;
                                }
                            }
                            2.0 * params.mu * dd
                        }
                        Region::Darcy => {
                            let kva = Point2::new(
                                k_inv[0][0] * va.x + k_inv[0][1] * va.y,
                                k_inv[1][0] * va.x + k_inv[1][1] * va.y,
                            );
                            let diva = ga[0][0] + ga[1][1];
                            let divb = gb[0][0] + gb[1][1];
                            params.mu * kva.dot(vb) + diva * divb
                        }
                    };
                    m[(a, b)] += w * val;
                }
            }
        }
    }
    // Interface slip term on the Stokes-side trace.
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.class != EdgeClass::InterfaceI {
            continue;
        }
        let tau = edge.tangent();
        let weight = params.mu * params.alpha1 / params.kappa(tau).sqrt();
        let ts = [edge.neighbors.0, edge.neighbors.1.unwrap()]
            .into_iter()
            .find(|&t| mesh.triangles[t].region == Region::Stokes)
            .unwrap();
        for (p, w) in edge_points(mesh, e, 4) {
            for a in 0..dim {
                let va = basis_value(mesh, dofmap, ts, a, p).dot(tau);
                for b in 0..dim {
                    let vb = basis_value(mesh, dofmap, ts, b, p).dot(tau);
                    m[(a, b)] += w * weight * va * vb;
                }
            }
        }
    }
    m
}

/// Dense jump-penalty block over the extended slots.
pub fn oracle_jump(mesh: &Mesh, dofmap: &DofMap, params: &MaterialParams) -> DMatrix<f64> {
    let dim = ext_dim(dofmap);
    let mut m = DMatrix::zeros(dim, dim);
    for (e, edge) in mesh.edges.iter().enumerate() {
        let weight = match edge.class {
            EdgeClass::InteriorStokes | EdgeClass::GammaS => params.stokes_weight() / edge.length,
            _ => 1.0 / edge.length,
        };
        let sides: Vec<(usize, f64)> = match edge.neighbors {
            (t0, Some(t1)) => vec![(t0, -1.0), (t1, 1.0)],
            (t0, None) => vec![(t0, -1.0)],
        };
        for (p, w) in edge_points(mesh, e, 4) {
            for a in 0..dim {
                let mut jump_a = Point2::default();
                for &(t, sign) in &sides {
                    jump_a = jump_a + basis_value(mesh, dofmap, t, a, p) * sign;
                }
                for b in 0..dim {
                    let mut jump_b = Point2::default();
                    for &(t, sign) in &sides {
                        jump_b = jump_b + basis_value(mesh, dofmap, t, b, p) * sign;
                    }
                    let pairing = if edge.class.on_darcy_boundary() {
                        jump_a.dot(edge.normal) * jump_b.dot(edge.normal)
                    } else {
                        jump_a.dot(jump_b)
                    };
                    m[(a, b)] += w * weight * pairing;
                }
            }
        }
    }
    m
}

/// Dense divergence block (pressure rows by extended slots).
pub fn oracle_divergence(mesh: &Mesh, dofmap: &DofMap) -> DMatrix<f64> {
    let dim = ext_dim(dofmap);
    let n_p = mesh.triangles.len();
    let mut m = DMatrix::zeros(n_p, dim);
    for t in 0..n_p {
        for (_, w) in triangle_points(mesh, t, 2) {
            for a in 0..dim {
                let ga = basis_gradient(mesh, dofmap, t, a);
                m[(t, a)] -= w * (ga[0][0] + ga[1][1]);
            }
        }
    }
    m
}

/// Dense volume right-hand sides: body-force work plus the Darcy mass-source
/// coupling, and the negative cell integrals of the source.
pub fn oracle_rhs<F, G>(
    mesh: &Mesh,
    dofmap: &DofMap,
    body_force: F,
    mass_source: G,
    degree: usize,
) -> (DVector<f64>, DVector<f64>)
where
    F: Fn(Point2, Region) -> Point2,
    G: Fn(Point2) -> f64,
{
    let n_v = dofmap.n_velocity();
    let mut f = DVector::zeros(n_v);
    let mut g = DVector::zeros(mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let region = mesh.triangles[t].region;
        for (p, w) in triangle_points(mesh, t, degree) {
            let fv = body_force(p, region);
            let gv = mass_source(p);
            for a in 0..n_v {
                let va = basis_value(mesh, dofmap, t, a, p);
                f[a] += w * fv.dot(va);
                if region == Region::Darcy {
                    let ga = basis_gradient(mesh, dofmap, t, a);
                    f[a] += w * gv * (ga[0][0] + ga[1][1]);
                }
            }
            g[t] -= w * gv;
        }
    }
    (f, g)
}

/// Dense penalty data functional for a prescribed boundary trace.
pub fn oracle_boundary_rhs<G>(
    mesh: &Mesh,
    dofmap: &DofMap,
    params: &MaterialParams,
    trace: G,
) -> DVector<f64>
where
    G: Fn(Point2) -> Point2,
{
    let n_v = dofmap.n_velocity();
    let mut f = DVector::zeros(n_v);
    for (e, edge) in mesh.edges.iter().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let weight = match edge.class {
            EdgeClass::GammaS => params.stokes_weight() / edge.length,
            _ => 1.0 / edge.length,
        };
        let t = edge.neighbors.0;
        for (p, w) in edge_points(mesh, e, 4) {
            let g = trace(p);
            for a in 0..n_v {
                let va = basis_value(mesh, dofmap, t, a, p);
                let pairing = if edge.class.on_darcy_boundary() {
                    g.dot(edge.normal) * va.dot(edge.normal)
                } else {
                    g.dot(va)
                };
                f[a] += w * weight * pairing;
            }
        }
    }
    f
}

/// Largest absolute entry difference between a sparse block and the matching
/// dense oracle sub-block.
pub fn max_entry_difference(
    sparse: &stokes_darcy::assembly::CsrMatrix,
    dense: &DMatrix<f64>,
) -> f64 {
    assert_eq!(sparse.nrows, dense.nrows());
    assert_eq!(sparse.ncols, dense.ncols());
    let mut worst: f64 = 0.0;
    for r in 0..sparse.nrows {
        for c in 0..sparse.ncols {
            worst = worst.max((sparse.get(r, c) - dense[(r, c)]).abs());
        }
    }
    worst
}
