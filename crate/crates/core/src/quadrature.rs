//! Gauss quadrature on edges and triangles.
//!
//! Triangle rules are built as collapsed tensor-product Gauss rules on the
//! reference triangle {x, y >= 0, x + y <= 1}. The construction is exact for
//! any requested polynomial degree, which keeps quadrature error strictly out
//! of the verification budget.

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Nodes are found by Newton iteration on the Legendre polynomial; weights
/// sum to 2.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    assert!(m >= 1, "quadrature rule needs at least one point");
    let mut rule = Vec::with_capacity(m);
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rule
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule on [0, 1] with weights summing to 1; exact for degree 2m - 1.
pub fn gauss_01(m: usize) -> Vec<(f64, f64)> {
    gauss_legendre(m)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Edge rule exact for polynomials of the given degree (parameter in [0, 1],
/// weights summing to 1).
pub fn edge_rule(degree: usize) -> Vec<(f64, f64)> {
    gauss_01(degree / 2 + 1)
}

/// Quadrature on the reference triangle {x, y >= 0, x + y <= 1}.
/// Weights sum to the reference area 1/2.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub nodes: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

/// Collapsed-product rule exact for all polynomials of total degree <= `degree`.
///
/// Under the map (u, v) -> (u, v(1 - u)) a degree-d polynomial times the
/// Jacobian has degree at most d + 1 in u and d in v, which fixes the Gauss
/// orders per axis.
pub fn triangle_rule(degree: usize) -> TriangleRule {
    let mu = degree / 2 + 2;
    let mv = (degree + 1) / 2 + 1;
    let gu = gauss_01(mu);
    let gv = gauss_01(mv);
    let mut nodes = Vec::with_capacity(mu * mv);
    let mut weights = Vec::with_capacity(mu * mv);
    for &(u, wu) in &gu {
        for &(v, wv) in &gv {
            nodes.push((u, v * (1.0 - u)));
            weights.push(wu * wv * (1.0 - u));
        }
    }
    TriangleRule { nodes, weights }
}

/// Three-point edge-midpoint rule, exact for quadratics. This is the rule
/// that diagonalizes the Crouzeix-Raviart mass matrix.
pub fn triangle_midpoint_rule() -> TriangleRule {
    TriangleRule {
        nodes: vec![(0.5, 0.0), (0.5, 0.5), (0.0, 0.5)],
        weights: vec![1.0 / 6.0; 3],
    }
}
