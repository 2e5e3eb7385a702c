//! Conforming triangulations of the two-region rectangular domain.
//!
//! The flow domain is a rectangle split by a vertical interface into a fluid
//! (Stokes) region on the left and a porous (Darcy) region on the right.
//! Meshes are built structurally: a uniform grid of cells, each cut along the
//! lower-left to upper-right diagonal. Every edge is classified into one of
//! the five groups that drive degree-of-freedom placement and the jump
//! penalty.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, twice the signed area of (0, self, other).
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Counterclockwise rotation by 90 degrees.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Which flow model governs an element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Stokes,
    Darcy,
}

/// Triangle with counterclockwise vertices and cached geometric quantities.
#[derive(Clone, Debug)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub region: Region,
    pub area: f64,
    /// Longest edge length.
    pub diameter: f64,
    /// Radius of the inscribed circle.
    pub inradius: f64,
}

impl Triangle {
    /// Shape measure h_T / (2 r_T) used for the mesh regularity bound.
    pub fn aspect(&self) -> f64 {
        self.diameter / (2.0 * self.inradius)
    }
}

/// Edge groups of the two-region triangulation.
///
/// `InteriorStokes` and `GammaS` together form the edge set of the closed
/// Stokes region minus the interface; `InterfaceI` and `GammaD` form the
/// boundary of the Darcy region; `InteriorDarcy` are edges strictly inside
/// the Darcy region. The three groups partition all edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeClass {
    InteriorStokes,
    GammaS,
    InteriorDarcy,
    GammaD,
    InterfaceI,
}

impl EdgeClass {
    /// True for the groups whose jump penalty acts on the full vector jump.
    pub fn penalizes_full_vector(self) -> bool {
        matches!(
            self,
            EdgeClass::InteriorStokes | EdgeClass::GammaS | EdgeClass::InteriorDarcy
        )
    }

    /// True for edges on the boundary of the Darcy region (Gamma_d and the interface).
    pub fn on_darcy_boundary(self) -> bool {
        matches!(self, EdgeClass::GammaD | EdgeClass::InterfaceI)
    }
}

/// Mesh edge with adjacency and a fixed unit normal.
///
/// For interior edges the normal points from `neighbors.0` into `neighbors.1`
/// (i.e. it is the outward normal of the first neighbor); for boundary edges
/// it is the exterior normal of the domain and `neighbors.1` is `None`.
#[derive(Clone, Debug)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub neighbors: (usize, Option<usize>),
    pub normal: Point2,
    pub midpoint: Point2,
    pub length: f64,
    pub class: EdgeClass,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.neighbors.1.is_none()
    }

    /// Tangent vector: the normal rotated counterclockwise by 90 degrees.
    pub fn tangent(&self) -> Point2 {
        self.normal.perp()
    }
}

/// Rectangular two-region domain split by a vertical interface.
#[derive(Clone, Copy, Debug)]
pub struct DomainGeometry {
    pub x_left: f64,
    pub x_interface: f64,
    pub x_right: f64,
    pub y_bottom: f64,
    pub y_top: f64,
}

impl Default for DomainGeometry {
    /// The unit-square pair: Stokes on (0,1) x (0,1), Darcy on (1,2) x (0,1).
    fn default() -> Self {
        Self {
            x_left: 0.0,
            x_interface: 1.0,
            x_right: 2.0,
            y_bottom: 0.0,
            y_top: 1.0,
        }
    }
}

impl DomainGeometry {
    fn validate(&self) -> Result<()> {
        let vals = [
            self.x_left,
            self.x_interface,
            self.x_right,
            self.y_bottom,
            self.y_top,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh("geometry has non-finite extents".into()));
        }
        if !(self.x_left < self.x_interface && self.x_interface < self.x_right) {
            return Err(Error::InvalidMesh(format!(
                "degenerate geometry: require x_left < x_interface < x_right, got {} / {} / {}",
                self.x_left, self.x_interface, self.x_right
            )));
        }
        if !(self.y_bottom < self.y_top) {
            return Err(Error::InvalidMesh(format!(
                "degenerate geometry: require y_bottom < y_top, got {} / {}",
                self.y_bottom, self.y_top
            )));
        }
        Ok(())
    }
}

/// Immutable triangulation with classified edges.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// `element_edges[t][i]` is the edge opposite local vertex `i` of triangle `t`.
    pub element_edges: Vec<[usize; 3]>,
    pub geometry: DomainGeometry,
    /// Largest element diameter.
    pub h: f64,
    /// Largest shape measure h_T / (2 r_T).
    pub sigma_h: f64,
}

impl Mesh {
    /// Assembles edge connectivity, metadata and classification from tagged
    /// triangles. Fails if two elements of different regions share an edge
    /// away from the declared interface.
    pub fn from_triangles(
        vertices: Vec<Point2>,
        triangles: Vec<(Vec<usize>, Region)>,
        geometry: DomainGeometry,
    ) -> Result<Mesh> {
        geometry.validate()?;
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }

        let mut tris = Vec::with_capacity(triangles.len());
        for (t, (vs, region)) in triangles.iter().enumerate() {
            if vs.len() != 3 {
                return Err(Error::InvalidMesh(format!("element {t} is not a triangle")));
            }
            let [a, b, c] = [vertices[vs[0]], vertices[vs[1]], vertices[vs[2]]];
            let doubled = (b - a).cross(c - a);
            if doubled <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "element {t} is degenerate or not counterclockwise"
                )));
            }
            let area = 0.5 * doubled;
            let lengths = [(c - b).norm(), (a - c).norm(), (b - a).norm()];
            let perimeter: f64 = lengths.iter().sum();
            let diameter = lengths.iter().cloned().fold(0.0, f64::max);
            let inradius = 2.0 * area / perimeter;
            tris.push(Triangle {
                vertices: [vs[0], vs[1], vs[2]],
                region: *region,
                area,
                diameter,
                inradius,
            });
        }

        // Collect unique edges; remember which element/local slot touches each.
        let mut by_key: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for i in 0..3 {
                // Edge opposite local vertex i, traversed in element orientation.
                let va = tri.vertices[(i + 1) % 3];
                let vb = tri.vertices[(i + 2) % 3];
                let key = (va.min(vb), va.max(vb));
                by_key.entry(key).or_default().push((t, i));
            }
        }

        let mut edges = Vec::with_capacity(by_key.len());
        let mut element_edges = vec![[usize::MAX; 3]; tris.len()];
        for (&(v0, v1), touching) in &by_key {
            let p0 = vertices[v0];
            let p1 = vertices[v1];
            let midpoint = (p0 + p1) * 0.5;
            let length = (p1 - p0).norm();
            if length == 0.0 {
                return Err(Error::InvalidMesh("zero-length edge".into()));
            }

            let (neighbors, normal, class) = match touching.as_slice() {
                [(t, i)] => {
                    element_edges[*t][*i] = edges.len();
                    let class = match tris[*t].region {
                        Region::Stokes => EdgeClass::GammaS,
                        Region::Darcy => EdgeClass::GammaD,
                    };
                    ((*t, None), outward_normal(&vertices, &tris[*t], *i), class)
                }
                [(ta, ia), (tb, ib)] => {
                    let ((t0, i0), (t1, i1)) = if ta < tb {
                        ((*ta, *ia), (*tb, *ib))
                    } else {
                        ((*tb, *ib), (*ta, *ia))
                    };
                    element_edges[t0][i0] = edges.len();
                    element_edges[t1][i1] = edges.len();
                    let class = match (tris[t0].region, tris[t1].region) {
                        (Region::Stokes, Region::Stokes) => EdgeClass::InteriorStokes,
                        (Region::Darcy, Region::Darcy) => EdgeClass::InteriorDarcy,
                        _ => {
                            let tol = 1e-12 * (geometry.x_right - geometry.x_left).abs();
                            if (midpoint.x - geometry.x_interface).abs() > tol {
                                return Err(Error::NonConforming {
                                    first: t0,
                                    second: t1,
                                    x: midpoint.x,
                                    y: midpoint.y,
                                });
                            }
                            EdgeClass::InterfaceI
                        }
                    };
                    // Normal points away from the lower element id.
                    ((t0, Some(t1)), outward_normal(&vertices, &tris[t0], i0), class)
                }
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({v0}, {v1}) shared by more than two elements"
                    )))
                }
            };

            edges.push(Edge {
                vertices: [v0, v1],
                neighbors,
                normal,
                midpoint,
                length,
                class,
            });
        }

        let h = tris.iter().map(|t| t.diameter).fold(0.0, f64::max);
        let sigma_h = tris.iter().map(|t| t.aspect()).fold(0.0, f64::max);

        Ok(Mesh {
            vertices,
            triangles: tris,
            edges,
            element_edges,
            geometry,
            h,
            sigma_h,
        })
    }

    /// Coordinates of an element's three vertices.
    pub fn element_coords(&self, t: usize) -> [Point2; 3] {
        let v = self.triangles[t].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    /// Maximum element diameter and maximum shape measure.
    pub fn statistics(&self) -> (f64, f64) {
        (self.h, self.sigma_h)
    }

    /// Number of edges in each of the three penalty groups
    /// (Omega_s^+, Omega_d, boundary of Omega_d).
    pub fn edge_group_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for e in &self.edges {
            match e.class {
                EdgeClass::InteriorStokes | EdgeClass::GammaS => counts.0 += 1,
                EdgeClass::InteriorDarcy => counts.1 += 1,
                EdgeClass::GammaD | EdgeClass::InterfaceI => counts.2 += 1,
            }
        }
        counts
    }
}

/// Outward unit normal of triangle `t` on the edge opposite its local vertex `i`.
fn outward_normal(vertices: &[Point2], tri: &Triangle, i: usize) -> Point2 {
    let va = vertices[tri.vertices[(i + 1) % 3]];
    let vb = vertices[tri.vertices[(i + 2) % 3]];
    // The boundary is traversed counterclockwise, so rotating the edge vector
    // clockwise gives the outward direction.
    let d = vb - va;
    Point2::new(d.y, -d.x) * (1.0 / d.norm())
}

/// Builds the uniform two-region triangulation with `2n x n` cells, each cell
/// split along its lower-left to upper-right diagonal. The interface grid
/// line is always present, so the partition into regions is mesh-conforming.
pub fn build_structured_mesh(n: usize, geometry: DomainGeometry) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidMesh("resolution n must be at least 1".into()));
    }
    geometry.validate()?;

    let nx = 2 * n;
    let ny = n;
    let mut xs = Vec::with_capacity(nx + 1);
    for i in 0..=nx {
        // Place grid lines within each region separately so x_interface is hit exactly.
        let x = if i <= n {
            let s = i as f64 / n as f64;
            geometry.x_left + s * (geometry.x_interface - geometry.x_left)
        } else {
            let s = (i - n) as f64 / n as f64;
            geometry.x_interface + s * (geometry.x_right - geometry.x_interface)
        };
        xs.push(x);
    }
    let ys: Vec<f64> = (0..=ny)
        .map(|j| {
            let s = j as f64 / ny as f64;
            geometry.y_bottom + s * (geometry.y_top - geometry.y_bottom)
        })
        .collect();

    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point2::new(xs[i], ys[j]));
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let region = if i < n { Region::Stokes } else { Region::Darcy };
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push((vec![a, b, c], region));
            triangles.push((vec![a, c, d], region));
        }
    }

    Mesh::from_triangles(vertices, triangles, geometry)
}
