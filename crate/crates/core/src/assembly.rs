//! Assembly of the discrete saddle-point blocks.
//!
//! The bilinear form splits into the symmetric stiffness part (viscous term
//! on Stokes elements, Darcy mass and divergence terms, interface slip term)
//! and the jump penalty over the three edge groups; the divergence block
//! couples velocities to the piecewise-constant pressures. All integrands
//! are polynomial, and every term uses a rule exact for its degree.
//!
//! Matrices are assembled over the extended index set (free unknowns first,
//! then constrained boundary slots); the public blocks are the free-free
//! restrictions, with the free-constrained couplings folded into the right
//! hand side by `assemble_system`.

use crate::error::{Error, Result};
use crate::mesh::{EdgeClass, Mesh, Point2, Region};
use crate::quadrature::{self, TriangleRule};
use crate::space::{DofMap, DofRef, ElementBasis};

/// Fluid and porous-medium parameters.
#[derive(Clone, Copy, Debug)]
pub struct MaterialParams {
    /// Fluid viscosity mu > 0.
    pub mu: f64,
    /// Symmetric positive-definite permeability tensor, row-major.
    pub permeability: [[f64; 2]; 2],
    /// Slip coefficient of the interface friction law.
    pub alpha1: f64,
    /// Override for the penalty weight on Stokes-side edges; defaults to 1 + 2 mu.
    pub stokes_penalty_weight: Option<f64>,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            permeability: [[1.0, 0.0], [0.0, 1.0]],
            alpha1: 1.0,
            stokes_penalty_weight: None,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParams(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.alpha1 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha1 must be positive, got {}",
                self.alpha1
            )));
        }
        let k = &self.permeability;
        if (k[0][1] - k[1][0]).abs() > 1e-14 * k[0][0].abs().max(k[1][1].abs()) {
            return Err(Error::InvalidParams("permeability must be symmetric".into()));
        }
        if !(k[0][0] > 0.0 && k[0][0] * k[1][1] - k[0][1] * k[1][0] > 0.0) {
            return Err(Error::InvalidParams(
                "permeability must be positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Inverse of the permeability tensor.
    pub fn k_inverse(&self) -> [[f64; 2]; 2] {
        let k = &self.permeability;
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        [
            [k[1][1] / det, -k[0][1] / det],
            [-k[1][0] / det, k[0][0] / det],
        ]
    }

    /// kappa = tau . K tau for a unit tangent of an interface edge.
    pub fn kappa(&self, tangent: Point2) -> f64 {
        let k = &self.permeability;
        let kt = Point2::new(
            k[0][0] * tangent.x + k[0][1] * tangent.y,
            k[1][0] * tangent.x + k[1][1] * tangent.y,
        );
        tangent.dot(kt)
    }

    /// Penalty weight on edges of the closed Stokes region.
    pub fn stokes_weight(&self) -> f64 {
        self.stokes_penalty_weight.unwrap_or(1.0 + 2.0 * self.mu)
    }
}

/// Body force and mass source; the force may differ between regions.
pub struct SourceData<'a> {
    pub body_force: Box<dyn Fn(Point2, Region) -> Point2 + 'a>,
    pub mass_source: Box<dyn Fn(Point2) -> f64 + 'a>,
}

/// Coordinate-triplet accumulator; duplicates sum on compression.
#[derive(Clone, Debug)]
pub struct CooMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            triplets: Vec::new(),
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.triplets.push((r, c, v));
    }

    pub fn extend_from(&mut self, other: &CooMatrix) {
        debug_assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.triplets.extend_from_slice(&other.triplets);
    }

    /// Compresses to CSR, summing duplicates in a stable order.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut entries = self.triplets.clone();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        for &(r, c, v) in &entries {
            if cols.len() > row_ptr[r] && *cols.last().unwrap() == c && row_ptr[r + 1] == cols.len()
            {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] = cols.len();
            }
        }
        // Make row_ptr cumulative over empty rows as well.
        for r in 0..self.nrows {
            if row_ptr[r + 1] < row_ptr[r] {
                row_ptr[r + 1] = row_ptr[r];
            }
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.cols[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.cols[lo..hi].binary_search(&c) {
            Ok(i) => self.vals[lo + i],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                y[c] += v * x[r];
            }
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Largest absolute deviation from symmetry, |a_ij - a_ji|.
    pub fn symmetry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Quadratic form x^T A y.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                acc += x[r] * v * y[c];
            }
        }
        acc
    }
}

/// The reduced saddle-point blocks over the free velocity unknowns.
#[derive(Clone, Debug)]
pub struct SystemBlocks {
    /// Stiffness plus jump penalty, n_v x n_v, symmetric positive definite.
    pub a: CsrMatrix,
    /// Divergence block, n_p x n_v.
    pub b: CsrMatrix,
    /// Momentum right-hand side including boundary-data couplings.
    pub f: Vec<f64>,
    /// Mass-equation right-hand side including boundary-data couplings.
    pub g: Vec<f64>,
}

/// One local scalar contribution: slot, direction, local edge index.
type LocalScalar = (DofRef, Point2, usize);

fn element_scalars(dofmap: &DofMap, t: usize) -> [LocalScalar; 6] {
    let mut out = [(DofRef::Free(0), Point2::default(), 0usize); 6];
    for i in 0..3 {
        for (k, &(slot, dir)) in dofmap.local_dofs(t, i).iter().enumerate() {
            out[2 * i + k] = (slot, dir, i);
        }
    }
    out
}

fn ext_index(dofmap: &DofMap, slot: DofRef) -> usize {
    match slot {
        DofRef::Free(g) => g,
        DofRef::Fixed(c) => dofmap.n_velocity() + c,
    }
}

fn ext_dim(dofmap: &DofMap) -> usize {
    dofmap.n_velocity() + dofmap.n_constrained()
}

/// Symmetric-gradient Frobenius product of two rank-one gradients d (x) g.
fn sym_grad_product(da: Point2, ga: Point2, db: Point2, gb: Point2) -> f64 {
    // D(phi)_{rc} = (d_r g_c + d_c g_r) / 2; contract over both indices.
    0.5 * ((da.dot(db)) * (ga.dot(gb)) + (da.dot(gb)) * (ga.dot(db)))
}

/// Stiffness part over the extended index set: viscous term on Stokes
/// elements, permeability-weighted mass and divergence terms on Darcy
/// elements, and the tangential slip term on interface edges.
pub fn assemble_stiffness_ext(
    mesh: &Mesh,
    dofmap: &DofMap,
    params: &MaterialParams,
) -> Result<CooMatrix> {
    params.validate()?;
    let dim = ext_dim(dofmap);
    let mut coo = CooMatrix::new(dim, dim);
    let k_inv = params.k_inverse();
    let mass_rule = quadrature::triangle_midpoint_rule();

    for t in 0..mesh.triangles.len() {
        let basis = ElementBasis::new(mesh, t);
        let area = basis.area;
        let scalars = element_scalars(dofmap, t);
        match mesh.triangles[t].region {
            Region::Stokes => {
                // 2 mu (D(u), D(v))_T with constant integrand.
                for &(sa, da, ia) in &scalars {
                    let ga = basis.grad_psi(ia);
                    for &(sb, db, ib) in &scalars {
                        let gb = basis.grad_psi(ib);
                        let val = 2.0 * params.mu * area * sym_grad_product(da, ga, db, gb);
                        coo.push(ext_index(dofmap, sa), ext_index(dofmap, sb), val);
                    }
                }
            }
            Region::Darcy => {
                // mu (K^{-1} u, v)_T via the three-point edge-midpoint rule
                // (exact for the quadratic integrand), plus the div-div term.
                let [a, b, c] = mesh.element_coords(t);
                let origin = a;
                let map = |xi: (f64, f64)| a + (b - a) * xi.0 + (c - a) * xi.1;
                for (&node, &w) in mass_rule.nodes.iter().zip(&mass_rule.weights) {
                    let p = map(node);
                    let psi = basis.psi(origin, p);
                    let scale = 2.0 * area * w * params.mu;
                    for &(sa, da, ia) in &scalars {
                        let kinv_da = Point2::new(
                            k_inv[0][0] * da.x + k_inv[0][1] * da.y,
                            k_inv[1][0] * da.x + k_inv[1][1] * da.y,
                        );
                        for &(sb, db, ib) in &scalars {
                            let val = scale * psi[ia] * psi[ib] * kinv_da.dot(db);
                            coo.push(ext_index(dofmap, sa), ext_index(dofmap, sb), val);
                        }
                    }
                }
                for &(sa, da, ia) in &scalars {
                    let diva = da.dot(basis.grad_psi(ia));
                    for &(sb, db, ib) in &scalars {
                        let divb = db.dot(basis.grad_psi(ib));
                        coo.push(ext_index(dofmap, sa), ext_index(dofmap, sb), area * diva * divb);
                    }
                }
            }
        }
    }

    // Tangential slip term on the Stokes-side trace of interface edges.
    let edge_gauss = quadrature::edge_rule(2);
    for edge in mesh.edges.iter() {
        if edge.class != EdgeClass::InterfaceI {
            continue;
        }
        let tau = edge.tangent();
        let weight = params.mu * params.alpha1 / params.kappa(tau).sqrt();
        let ts = [edge.neighbors.0, edge.neighbors.1.unwrap()]
            .into_iter()
            .find(|&t| mesh.triangles[t].region == Region::Stokes)
            .expect("interface edge must touch a Stokes element");
        let basis = ElementBasis::new(mesh, ts);
        let origin = mesh.element_coords(ts)[0];
        let scalars = element_scalars(dofmap, ts);
        let a = mesh.vertices[edge.vertices[0]];
        let b = mesh.vertices[edge.vertices[1]];
        for &(s, w) in &edge_gauss {
            let p = a + (b - a) * s;
            let psi = basis.psi(origin, p);
            let scale = weight * edge.length * w;
            for &(sa, da, ia) in &scalars {
                for &(sb, db, ib) in &scalars {
                    let val = scale * psi[ia] * psi[ib] * da.dot(tau) * db.dot(tau);
                    coo.push(ext_index(dofmap, sa), ext_index(dofmap, sb), val);
                }
            }
        }
    }

    Ok(coo)
}

/// Jump penalty over the extended index set: full vector jumps on edges of
/// the closed Stokes region (weight (1 + 2 mu) / h_E, overridable) and on
/// interior Darcy edges (weight 1 / h_E), normal-component jumps on the
/// Darcy boundary (weight 1 / h_E). Boundary edges use the jump convention
/// [phi] = -phi.
pub fn assemble_jump_penalty_ext(mesh: &Mesh, dofmap: &DofMap, params: &MaterialParams) -> CooMatrix {
    let dim = ext_dim(dofmap);
    let mut coo = CooMatrix::new(dim, dim);
    let edge_gauss = quadrature::edge_rule(2);

    for edge in mesh.edges.iter() {
        let weight = match edge.class {
            EdgeClass::InteriorStokes | EdgeClass::GammaS => params.stokes_weight() / edge.length,
            _ => 1.0 / edge.length,
        };
        let normal_only = edge.class.on_darcy_boundary();

        // (element, jump sign): the normal points from the first neighbor
        // into the second, so the second is the "+" side.
        let sides: Vec<(usize, f64)> = match edge.neighbors {
            (t0, Some(t1)) => vec![(t0, -1.0), (t1, 1.0)],
            (t0, None) => vec![(t0, -1.0)],
        };

        let a = mesh.vertices[edge.vertices[0]];
        let b = mesh.vertices[edge.vertices[1]];
        for &(s, w) in &edge_gauss {
            let p = a + (b - a) * s;
            let scale = weight * edge.length * w;
            // Trace values of every scalar slot of both sides at this point.
            let mut terms: Vec<(usize, f64, Point2)> = Vec::with_capacity(12);
            for &(t, sign) in &sides {
                let basis = ElementBasis::new(mesh, t);
                let origin = mesh.element_coords(t)[0];
                let psi = basis.psi(origin, p);
                for &(slot, dir, i) in &element_scalars(dofmap, t) {
                    terms.push((ext_index(dofmap, slot), sign * psi[i], dir));
                }
            }
            for &(ra, va, da) in &terms {
                for &(rb, vb, db) in &terms {
                    let pairing = if normal_only {
                        da.dot(edge.normal) * db.dot(edge.normal)
                    } else {
                        da.dot(db)
                    };
                    coo.push(ra, rb, scale * va * vb * pairing);
                }
            }
        }
    }

    coo
}

/// Divergence block over the extended index set: row k holds
/// -(1, div v)_{T_k} for each velocity slot.
pub fn assemble_divergence_ext(mesh: &Mesh, dofmap: &DofMap) -> CooMatrix {
    let mut coo = CooMatrix::new(dofmap.n_pressure, ext_dim(dofmap));
    for t in 0..mesh.triangles.len() {
        let basis = ElementBasis::new(mesh, t);
        for &(slot, dir, i) in &element_scalars(dofmap, t) {
            let val = -basis.area * dir.dot(basis.grad_psi(i));
            coo.push(t, ext_index(dofmap, slot), val);
        }
    }
    coo
}

/// Gram matrix of the discrete velocity norm on the extended index set:
/// broken full gradients on Stokes elements, unweighted interface tangential
/// traces, Darcy mass and divergence terms, plus the jump penalty.
pub fn assemble_norm_gram_ext(mesh: &Mesh, dofmap: &DofMap, params: &MaterialParams) -> CooMatrix {
    let dim = ext_dim(dofmap);
    let mut coo = CooMatrix::new(dim, dim);
    let mass_rule = quadrature::triangle_midpoint_rule();

    for t in 0..mesh.triangles.len() {
        let basis = ElementBasis::new(mesh, t);
        let area = basis.area;
        let scalars = element_scalars(dofmap, t);
        match mesh.triangles[t].region {
            Region::Stokes => {
                for &(sa, da, ia) in &scalars {
                    let ga = basis.grad_psi(ia);
                    for &(sb, db, ib) in &scalars {
                        let gb = basis.grad_psi(ib);
                        let val = area * da.dot(db) * ga.dot(gb);
                        coo.push(ext_index(dofmap, sa), ext_index(dofmap, sb), val);
                    }
                }
            }
            Region::Darcy => {
                let [a, b, c] = mesh.element_coords(t);
                let map = |xi: (f64, f64)| a + (b - a) * xi.0 + (c - a) * xi.1;
                for (&node, &w) in mass_rule.nodes.iter().zip(&mass_rule.weights) {
                    let p = map(node);
                    let psi = basis.psi(a, p);
                    let scale = 2.0 * area * w;
                    for &(sa, da, ia) in &scalars {
                        for &(sb, db, ib) in &scalars {
                            let val = scale * psi[ia] * psi[ib] * da.dot(db);
                            coo.push(ext_index(dofmap, sa), ext_index(dofmap, sb), val);
                        }
                    }
                }
                for &(sa, da, ia) in &scalars {
                    let diva = da.dot(basis.grad_psi(ia));
                    for &(sb, db, ib) in &scalars {
                        let divb = db.dot(basis.grad_psi(ib));
                        coo.push(ext_index(dofmap, sa), ext_index(dofmap, sb), area * diva * divb);
                    }
                }
            }
        }
    }

    let edge_gauss = quadrature::edge_rule(2);
    for edge in mesh.edges.iter() {
        if edge.class != EdgeClass::InterfaceI {
            continue;
        }
        let tau = edge.tangent();
        let ts = [edge.neighbors.0, edge.neighbors.1.unwrap()]
            .into_iter()
            .find(|&t| mesh.triangles[t].region == Region::Stokes)
            .unwrap();
        let basis = ElementBasis::new(mesh, ts);
        let origin = mesh.element_coords(ts)[0];
        let scalars = element_scalars(dofmap, ts);
        let a = mesh.vertices[edge.vertices[0]];
        let b = mesh.vertices[edge.vertices[1]];
        for &(s, w) in &edge_gauss {
            let p = a + (b - a) * s;
            let psi = basis.psi(origin, p);
            let scale = edge.length * w;
            for &(sa, da, ia) in &scalars {
                for &(sb, db, ib) in &scalars {
                    let val = scale * psi[ia] * psi[ib] * da.dot(tau) * db.dot(tau);
                    coo.push(ext_index(dofmap, sa), ext_index(dofmap, sb), val);
                }
            }
        }
    }

    coo.extend_from(&assemble_jump_penalty_ext(mesh, dofmap, params));
    coo
}

/// Splits an extended square matrix into its free-free and free-constrained blocks.
pub fn split_velocity_blocks(coo: &CooMatrix, dofmap: &DofMap) -> (CsrMatrix, CsrMatrix) {
    let n_v = dofmap.n_velocity();
    let n_c = dofmap.n_constrained();
    let mut ff = CooMatrix::new(n_v, n_v);
    let mut fc = CooMatrix::new(n_v, n_c);
    for &(r, c, v) in &coo.triplets {
        if r < n_v {
            if c < n_v {
                ff.push(r, c, v);
            } else {
                fc.push(r, c - n_v, v);
            }
        }
    }
    (ff.to_csr(), fc.to_csr())
}

/// Splits an extended-column rectangular matrix (e.g. the divergence block)
/// into free and constrained column parts.
pub fn split_columns(coo: &CooMatrix, dofmap: &DofMap) -> (CsrMatrix, CsrMatrix) {
    let n_v = dofmap.n_velocity();
    let n_c = dofmap.n_constrained();
    let mut free = CooMatrix::new(coo.nrows, n_v);
    let mut fixed = CooMatrix::new(coo.nrows, n_c);
    for &(r, c, v) in &coo.triplets {
        if c < n_v {
            free.push(r, c, v);
        } else {
            fixed.push(r, c - n_v, v);
        }
    }
    (free.to_csr(), fixed.to_csr())
}

/// Stiffness block restricted to the free unknowns.
pub fn assemble_stiffness(mesh: &Mesh, dofmap: &DofMap, params: &MaterialParams) -> Result<CsrMatrix> {
    let ext = assemble_stiffness_ext(mesh, dofmap, params)?;
    Ok(split_velocity_blocks(&ext, dofmap).0)
}

/// Jump-penalty block restricted to the free unknowns.
pub fn assemble_jump_penalty(mesh: &Mesh, dofmap: &DofMap, params: &MaterialParams) -> CsrMatrix {
    let ext = assemble_jump_penalty_ext(mesh, dofmap, params);
    split_velocity_blocks(&ext, dofmap).0
}

/// Divergence block restricted to the free unknowns.
pub fn assemble_divergence(mesh: &Mesh, dofmap: &DofMap) -> CsrMatrix {
    let ext = assemble_divergence_ext(mesh, dofmap);
    split_columns(&ext, dofmap).0
}

/// Velocity-norm Gram matrix restricted to the free unknowns.
pub fn assemble_norm_gram(mesh: &Mesh, dofmap: &DofMap, params: &MaterialParams) -> CsrMatrix {
    let ext = assemble_norm_gram_ext(mesh, dofmap, params);
    split_velocity_blocks(&ext, dofmap).0
}

/// Right-hand sides before boundary-data corrections: F holds the body-force
/// work plus the mass-source divergence coupling on Darcy elements, G the
/// negative cell integrals of the mass source.
pub fn assemble_rhs(
    mesh: &Mesh,
    dofmap: &DofMap,
    source: &SourceData,
    quad_degree: usize,
) -> (Vec<f64>, Vec<f64>) {
    let rule: TriangleRule = quadrature::triangle_rule(quad_degree);
    let mut f = vec![0.0; dofmap.n_velocity()];
    let mut g = vec![0.0; dofmap.n_pressure];

    for t in 0..mesh.triangles.len() {
        let basis = ElementBasis::new(mesh, t);
        let region = mesh.triangles[t].region;
        let [a, b, c] = mesh.element_coords(t);
        let map = |xi: (f64, f64)| a + (b - a) * xi.0 + (c - a) * xi.1;
        let scalars = element_scalars(dofmap, t);
        for (&node, &w) in rule.nodes.iter().zip(&rule.weights) {
            let p = map(node);
            let scale = 2.0 * basis.area * w;
            let fv = (source.body_force)(p, region);
            let gv = (source.mass_source)(p);
            let psi = basis.psi(a, p);
            for &(slot, dir, i) in &scalars {
                if let DofRef::Free(gid) = slot {
                    f[gid] += scale * fv.dot(dir) * psi[i];
                    if region == Region::Darcy {
                        f[gid] += scale * gv * dir.dot(basis.grad_psi(i));
                    }
                }
            }
            g[t] -= scale * gv;
        }
    }
    (f, g)
}

/// Work of prescribed boundary traces against the penalty: for an essential
/// trace g on the outer boundary the penalty acts on the deviation u - g, so
/// the right-hand side picks up the edge functionals
/// w_E h_E^{-1} <g, phi>_E (full vector on Gamma_s, normal component on
/// Gamma_d). With zero data this vanishes identically.
pub fn assemble_boundary_penalty_rhs<G>(
    mesh: &Mesh,
    dofmap: &DofMap,
    params: &MaterialParams,
    trace: G,
    quad_degree: usize,
) -> Vec<f64>
where
    G: Fn(Point2) -> Point2,
{
    let rule = quadrature::edge_rule(quad_degree);
    let mut f = vec![0.0; dofmap.n_velocity()];
    for edge in mesh.edges.iter().filter(|e| e.is_boundary()) {
        let weight = match edge.class {
            EdgeClass::GammaS => params.stokes_weight() / edge.length,
            _ => 1.0 / edge.length,
        };
        let t = edge.neighbors.0;
        let basis = ElementBasis::new(mesh, t);
        let origin = mesh.element_coords(t)[0];
        let scalars = element_scalars(dofmap, t);
        let a = mesh.vertices[edge.vertices[0]];
        let b = mesh.vertices[edge.vertices[1]];
        for &(s, w) in &rule {
            let p = a + (b - a) * s;
            let g = trace(p);
            let psi = basis.psi(origin, p);
            let scale = weight * edge.length * w;
            for &(slot, dir, i) in &scalars {
                if let DofRef::Free(gid) = slot {
                    let pairing = if edge.class.on_darcy_boundary() {
                        g.dot(edge.normal) * dir.dot(edge.normal)
                    } else {
                        g.dot(dir)
                    };
                    f[gid] += scale * psi[i] * pairing;
                }
            }
        }
    }
    f
}

/// Integral of the mass source over the domain; must vanish for a
/// well-posed problem.
pub fn source_compatibility(mesh: &Mesh, source: &SourceData, quad_degree: usize) -> f64 {
    let rule = quadrature::triangle_rule(quad_degree);
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.element_coords(t);
        let area = mesh.triangles[t].area;
        let map = |xi: (f64, f64)| a + (b - a) * xi.0 + (c - a) * xi.1;
        for (&node, &w) in rule.nodes.iter().zip(&rule.weights) {
            total += 2.0 * area * w * (source.mass_source)(map(node));
        }
    }
    total
}

/// Assembles the complete reduced system: free-free blocks plus right-hand
/// sides with the constrained boundary values folded in. When a boundary
/// trace function accompanies nonzero constrained values, the penalty data
/// functional keeps the stabilization consistent with the prescribed trace.
pub fn assemble_system(
    mesh: &Mesh,
    dofmap: &DofMap,
    params: &MaterialParams,
    source: &SourceData,
    boundary: &[f64],
    boundary_trace: Option<&dyn Fn(Point2) -> Point2>,
    quad_degree: usize,
) -> Result<SystemBlocks> {
    assert_eq!(boundary.len(), dofmap.n_constrained());
    let mut a_ext = assemble_stiffness_ext(mesh, dofmap, params)?;
    a_ext.extend_from(&assemble_jump_penalty_ext(mesh, dofmap, params));
    let (a, a_fc) = split_velocity_blocks(&a_ext, dofmap);
    let (b, b_c) = split_columns(&assemble_divergence_ext(mesh, dofmap), dofmap);

    let (mut f, mut g) = assemble_rhs(mesh, dofmap, source, quad_degree);
    let mut correction = vec![0.0; dofmap.n_velocity()];
    a_fc.matvec(boundary, &mut correction);
    for (fi, ci) in f.iter_mut().zip(&correction) {
        *fi -= ci;
    }
    if let Some(trace) = boundary_trace {
        let data = assemble_boundary_penalty_rhs(mesh, dofmap, params, trace, quad_degree);
        for (fi, di) in f.iter_mut().zip(&data) {
            *fi += di;
        }
    }
    let mut g_correction = vec![0.0; dofmap.n_pressure];
    b_c.matvec(boundary, &mut g_correction);
    for (gi, ci) in g.iter_mut().zip(&g_correction) {
        *gi -= ci;
    }

    Ok(SystemBlocks { a, b, f, g })
}
