//! Saddle-point solves and spectral stability estimators.
//!
//! The discrete system
//!
//! ```text
//!   [ A  B^T ] [u]   [F]
//!   [ B   0  ] [p] = [G]
//! ```
//!
//! is closed with one extra row and column carrying the zero-mean pressure
//! constraint through a scalar multiplier, keeping the matrix symmetric. The
//! primary path factors the augmented sparse matrix directly; a diagonally
//! scaled MINRES iteration serves as fallback. The coercivity constant is
//! estimated as the smallest generalized eigenvalue of (A, N) for the norm
//! Gram matrix N, and the inf-sup constant as the square root of the smallest
//! deflated eigenvalue of the pressure Schur complement B N^{-1} B^T against
//! the pressure mass matrix.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};

use crate::assembly::{CsrMatrix, SystemBlocks};
use crate::error::{Error, Result};
use crate::space::{DiscretePressure, DiscreteVelocity};

/// Tolerances of the saddle solver.
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Acceptable relative residual of both equations after the solve.
    pub residual_tol: f64,
    /// Relative tolerance of the MINRES fallback.
    pub minres_tol: f64,
    /// MINRES iteration cap as a multiple of the system dimension.
    pub minres_max_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            minres_tol: 1e-12,
            minres_max_factor: 20,
        }
    }
}

/// Residual norms reported with every solution.
#[derive(Clone, Copy, Debug)]
pub struct Residuals {
    /// ||A u + B^T p - F|| / max(1, ||F||)
    pub momentum: f64,
    /// ||B u - G|| / max(1, ||G||)
    pub mass: f64,
    /// |area-weighted mean of p| / max(||p||, eps)
    pub mean_pressure: f64,
}

/// Velocity, pressure and the residuals of the solve that produced them.
#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub velocity: DiscreteVelocity,
    pub pressure: DiscretePressure,
    pub residuals: Residuals,
}

/// Strategy for the eigenvalue estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMode {
    /// Dense below `DENSE_LIMIT` unknowns, iterative above.
    Auto,
    Dense,
    Iterative,
}

const DENSE_LIMIT: usize = 2000;

fn faer_from_triplets(dim: usize, trips: &[(usize, usize, f64)]) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = trips
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(dim, dim, &t)
        .map_err(|e| Error::Singular(format!("could not build sparse matrix: {e:?}")))
}

fn augmented_triplets(blocks: &SystemBlocks, areas: &[f64]) -> (usize, Vec<(usize, usize, f64)>) {
    let n_v = blocks.a.nrows;
    let n_p = blocks.b.nrows;
    let dim = n_v + n_p + 1;
    let mut trips = Vec::with_capacity(blocks.a.nnz() + 3 * blocks.b.nnz() + 2 * n_p);
    for r in 0..n_v {
        for (c, v) in blocks.a.row(r) {
            trips.push((r, c, v));
        }
    }
    for k in 0..n_p {
        for (c, v) in blocks.b.row(k) {
            trips.push((n_v + k, c, v));
            trips.push((c, n_v + k, v));
        }
        trips.push((n_v + k, dim - 1, areas[k]));
        trips.push((dim - 1, n_v + k, areas[k]));
    }
    (dim, trips)
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residuals_of(
    blocks: &SystemBlocks,
    areas: &[f64],
    u: &[f64],
    p: &[f64],
) -> Residuals {
    let n_v = blocks.a.nrows;
    let n_p = blocks.b.nrows;
    let mut r_mom = vec![0.0; n_v];
    blocks.a.matvec(u, &mut r_mom);
    let mut btp = vec![0.0; n_v];
    blocks.b.matvec_transpose(p, &mut btp);
    for i in 0..n_v {
        r_mom[i] += btp[i] - blocks.f[i];
    }
    let mut r_mass = vec![0.0; n_p];
    blocks.b.matvec(u, &mut r_mass);
    for k in 0..n_p {
        r_mass[k] -= blocks.g[k];
    }
    let total_area: f64 = areas.iter().sum();
    let weighted_mean: f64 =
        areas.iter().zip(p).map(|(a, q)| a * q).sum::<f64>() / total_area;
    let p_norm: f64 = areas
        .iter()
        .zip(p)
        .map(|(a, q)| a * q * q)
        .sum::<f64>()
        .sqrt();
    Residuals {
        momentum: norm2(&r_mom) / norm2(&blocks.f).max(1.0),
        mass: norm2(&r_mass) / norm2(&blocks.g).max(1.0),
        mean_pressure: weighted_mean.abs() / p_norm.max(f64::MIN_POSITIVE),
    }
}

/// Solves the augmented saddle-point system. The `boundary` slice carries the
/// fixed velocity slots already folded into `blocks` and is copied into the
/// returned velocity.
pub fn solve_saddle(
    blocks: &SystemBlocks,
    areas: &[f64],
    boundary: &[f64],
    opts: &SolverOptions,
) -> Result<SaddleSolution> {
    let n_v = blocks.a.nrows;
    let n_p = blocks.b.nrows;
    assert_eq!(areas.len(), n_p);

    let (dim, trips) = augmented_triplets(blocks, areas);
    let mut rhs = vec![0.0; dim];
    rhs[..n_v].copy_from_slice(&blocks.f);
    rhs[n_v..n_v + n_p].copy_from_slice(&blocks.g);

    let mut x = None;
    if let Ok(mat) = faer_from_triplets(dim, &trips) {
        if let Ok(lu) = mat.sp_lu() {
            let mut b = Mat::<f64>::zeros(dim, 1);
            for (i, &v) in rhs.iter().enumerate() {
                b[(i, 0)] = v;
            }
            let sol = lu.solve(&b);
            let cand: Vec<f64> = (0..dim).map(|i| sol[(i, 0)]).collect();
            if cand.iter().all(|v| v.is_finite()) {
                x = Some(cand);
            }
        }
    }

    let accept = |x: &[f64]| {
        let res = residuals_of(blocks, areas, &x[..n_v], &x[n_v..n_v + n_p]);
        (res.momentum <= opts.residual_tol && res.mass <= opts.residual_tol).then_some(res)
    };

    let mut accepted = x.as_deref().and_then(accept).map(|r| (x.clone().unwrap(), r));

    if accepted.is_none() {
        // Diagonally scaled MINRES on the augmented system.
        let mut diag = vec![0.0f64; dim];
        for &(r, c, v) in &trips {
            if r == c {
                diag[r] += v;
            }
        }
        let fallback = diag
            .iter()
            .filter(|d| d.abs() > 0.0)
            .map(|d| d.abs())
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        let scale: Vec<f64> = diag
            .iter()
            .map(|d| 1.0 / d.abs().max(fallback).sqrt())
            .collect();
        let scaled_rhs: Vec<f64> = rhs.iter().zip(&scale).map(|(v, s)| v * s).collect();
        let apply = |v: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            for &(r, c, m) in &trips {
                out[r] += m * scale[r] * scale[c] * v[c];
            }
        };
        let max_iters = opts.minres_max_factor * dim;
        let (y, iters, relres) = minres(&apply, &scaled_rhs, opts.minres_tol, max_iters);
        let cand: Vec<f64> = y.iter().zip(&scale).map(|(v, s)| v * s).collect();
        match accept(&cand) {
            Some(res) => accepted = Some((cand, res)),
            None => {
                return Err(Error::NoConvergence {
                    iterations: iters,
                    residual: relres,
                })
            }
        }
    }

    let (x, residuals) = accepted.unwrap();
    Ok(SaddleSolution {
        velocity: DiscreteVelocity {
            free: x[..n_v].to_vec(),
            fixed: boundary.to_vec(),
        },
        pressure: DiscretePressure {
            values: x[n_v..n_v + n_p].to_vec(),
        },
        residuals,
    })
}

/// Minimum-residual iteration for symmetric indefinite systems.
/// Returns the iterate, the iteration count and the final true relative
/// residual.
pub fn minres<F>(apply: &F, b: &[f64], tol: f64, max_iters: usize) -> (Vec<f64>, usize, f64)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let norm_b = norm2(b);
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        return (x, 0, 0.0);
    }

    let mut v = b.to_vec();
    let mut beta = norm_b;
    for vi in v.iter_mut() {
        *vi /= beta;
    }
    let mut v_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w_old = vec![0.0; n];
    let (mut c, mut c_old) = (1.0f64, 1.0f64);
    let (mut s, mut s_old) = (0.0f64, 0.0f64);
    let mut eta = beta;
    let mut iters = 0;

    let mut av = vec![0.0; n];
    for k in 1..=max_iters {
        iters = k;
        apply(&v, &mut av);
        let alpha: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        let mut v_new = av.clone();
        for i in 0..n {
            v_new[i] -= alpha * v[i] + beta * v_old[i];
        }
        let beta_new = norm2(&v_new);

        let rho0 = c * alpha - c_old * s * beta;
        let rho1 = (rho0 * rho0 + beta_new * beta_new).sqrt();
        let rho2 = s * alpha + c_old * c * beta;
        let rho3 = s_old * beta;

        if rho1 == 0.0 {
            break;
        }
        c_old = c;
        s_old = s;
        c = rho0 / rho1;
        s = beta_new / rho1;

        let mut w_new = v.clone();
        for i in 0..n {
            w_new[i] = (w_new[i] - rho3 * w_old[i] - rho2 * w[i]) / rho1;
            x[i] += c * eta * w_new[i];
        }
        eta = -s * eta;

        std::mem::swap(&mut v_old, &mut v);
        v = v_new;
        if beta_new > 0.0 {
            for vi in v.iter_mut() {
                *vi /= beta_new;
            }
        }
        std::mem::swap(&mut w_old, &mut w);
        w = w_new;
        beta = beta_new;

        if eta.abs() / norm_b < tol || beta_new == 0.0 {
            break;
        }
    }

    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let relres = norm2(&r) / norm_b;
    (x, iters, relres)
}

fn deterministic_start(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + 0.5 * ((i as u64).wrapping_mul(2654435761) % 1000) as f64 / 1000.0)
        .collect()
}

fn csr_to_faer(m: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
    let trips: Vec<(usize, usize, f64)> = (0..m.nrows)
        .flat_map(|r| m.row(r).map(move |(c, v)| (r, c, v)))
        .collect();
    faer_from_triplets(m.nrows, &trips)
}

/// Smallest generalized eigenvalue of A v = lambda N v: the numerical
/// coercivity constant of the stabilized form with respect to the discrete
/// velocity norm.
pub fn estimate_coercivity(a: &CsrMatrix, norm_gram: &CsrMatrix, mode: EigenMode) -> Result<f64> {
    assert_eq!(a.nrows, norm_gram.nrows);
    let dense = match mode {
        EigenMode::Dense => true,
        EigenMode::Iterative => false,
        EigenMode::Auto => a.nrows <= DENSE_LIMIT,
    };
    if dense {
        let n_dense = norm_gram.to_dense();
        let chol = nalgebra::Cholesky::new(n_dense)
            .ok_or_else(|| Error::NotPositiveDefinite("velocity norm Gram matrix".into()))?;
        let l = chol.l();
        let y = l
            .solve_lower_triangular(&a.to_dense())
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        let m = l
            .solve_lower_triangular(&y.transpose())
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        let m = (&m + m.transpose()) * 0.5;
        let eigen = nalgebra::SymmetricEigen::new(m);
        Ok(eigen.eigenvalues.min())
    } else {
        // Inverse iteration on the pencil: x <- A^{-1} N x.
        let lu = csr_to_faer(a)?
            .sp_lu()
            .map_err(|e| Error::Singular(format!("factorization of A failed: {e:?}")))?;
        let n = a.nrows;
        let mut x = deterministic_start(n);
        let mut rho_prev = f64::INFINITY;
        let mut nx = vec![0.0; n];
        for _ in 0..2000 {
            norm_gram.matvec(&x, &mut nx);
            let mut b = Mat::<f64>::zeros(n, 1);
            for i in 0..n {
                b[(i, 0)] = nx[i];
            }
            let sol = lu.solve(&b);
            for i in 0..n {
                x[i] = sol[(i, 0)];
            }
            norm_gram.matvec(&x, &mut nx);
            let xnx: f64 = x.iter().zip(&nx).map(|(a, b)| a * b).sum();
            if !(xnx > 0.0) {
                return Err(Error::NotPositiveDefinite("velocity norm Gram matrix".into()));
            }
            let scale = xnx.sqrt();
            for xi in x.iter_mut() {
                *xi /= scale;
            }
            let mut ax = vec![0.0; n];
            a.matvec(&x, &mut ax);
            let rho: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
            if (rho - rho_prev).abs() <= 1e-9 * rho.abs() {
                return Ok(rho);
            }
            rho_prev = rho;
        }
        Ok(rho_prev)
    }
}

/// Numerical inf-sup constant: sqrt of the smallest eigenvalue of the
/// pressure Schur complement B N^{-1} B^T relative to the diagonal pressure
/// mass matrix, with the constant-pressure mode deflated. Reports an error
/// if the deflated problem still carries a near-zero eigenvalue.
pub fn estimate_inf_sup(
    b: &CsrMatrix,
    norm_gram: &CsrMatrix,
    areas: &[f64],
    mode: EigenMode,
) -> Result<f64> {
    let n_p = b.nrows;
    let n_v = b.ncols;
    assert_eq!(areas.len(), n_p);
    let dense = match mode {
        EigenMode::Dense => true,
        EigenMode::Iterative => false,
        EigenMode::Auto => n_v + n_p <= DENSE_LIMIT,
    };
    let lambda_min = if dense {
        let chol = nalgebra::Cholesky::new(norm_gram.to_dense())
            .ok_or_else(|| Error::NotPositiveDefinite("velocity norm Gram matrix".into()))?;
        let bt = b.to_dense().transpose();
        let x = chol.solve(&bt);
        let s = b.to_dense() * x;
        // Scale to the standard problem with D^{-1/2} S D^{-1/2}.
        let mut c = s;
        for r in 0..n_p {
            for q in 0..n_p {
                c[(r, q)] /= (areas[r] * areas[q]).sqrt();
            }
        }
        let c = (&c + c.transpose()) * 0.5;

        // Householder reflection taking the constant-pressure direction to
        // the first coordinate axis; drop that row and column.
        let total: f64 = areas.iter().sum();
        let z = DVector::from_iterator(n_p, areas.iter().map(|a| (a / total).sqrt()));
        let mut v = z.clone();
        v[0] += 1.0; // z is unit with positive first entry; maps z to -e0
        let vnorm2 = v.dot(&v);
        let h = DMatrix::identity(n_p, n_p) - (&v * v.transpose()) * (2.0 / vnorm2);
        let hch = &h * c * &h;
        let deflated = hch.view((1, 1), (n_p - 1, n_p - 1)).into_owned();
        let deflated = (&deflated + deflated.transpose()) * 0.5;
        let eigen = nalgebra::SymmetricEigen::new(deflated);
        eigen.eigenvalues.min()
    } else {
        // Inverse iteration with the constraint-augmented factorization.
        let n_lu = csr_to_faer(norm_gram)?
            .sp_lu()
            .map_err(|e| Error::Singular(format!("factorization of N failed: {e:?}")))?;
        let dim = n_v + n_p + 1;
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for r in 0..n_v {
            for (c, v) in norm_gram.row(r) {
                trips.push((r, c, v));
            }
        }
        for k in 0..n_p {
            for (c, v) in b.row(k) {
                trips.push((n_v + k, c, v));
                trips.push((c, n_v + k, v));
            }
            trips.push((n_v + k, dim - 1, areas[k]));
            trips.push((dim - 1, n_v + k, areas[k]));
        }
        let aug_lu = faer_from_triplets(dim, &trips)?
            .sp_lu()
            .map_err(|e| Error::Singular(format!("factorization failed: {e:?}")))?;

        let total: f64 = areas.iter().sum();
        let project = |q: &mut Vec<f64>| {
            let mean: f64 = q.iter().zip(areas).map(|(v, a)| v * a).sum::<f64>() / total;
            for v in q.iter_mut() {
                *v -= mean;
            }
        };
        let schur_apply = |q: &[f64]| -> Vec<f64> {
            let mut btq = vec![0.0; n_v];
            b.matvec_transpose(q, &mut btq);
            let mut rhs = Mat::<f64>::zeros(n_v, 1);
            for i in 0..n_v {
                rhs[(i, 0)] = btq[i];
            }
            let y = n_lu.solve(&rhs);
            let yv: Vec<f64> = (0..n_v).map(|i| y[(i, 0)]).collect();
            let mut sq = vec![0.0; n_p];
            b.matvec(&yv, &mut sq);
            sq
        };

        let mut q = deterministic_start(n_p);
        project(&mut q);
        let mut rho_prev = f64::INFINITY;
        let mut rho = f64::INFINITY;
        for _ in 0..2000 {
            let dq: Vec<f64> = q.iter().zip(areas).map(|(v, a)| v * a).collect();
            let mut rhs = Mat::<f64>::zeros(dim, 1);
            for k in 0..n_p {
                rhs[(n_v + k, 0)] = dq[k];
            }
            let sol = aug_lu.solve(&rhs);
            let mut q_new: Vec<f64> = (0..n_p).map(|k| sol[(n_v + k, 0)]).collect();
            project(&mut q_new);
            let dnorm: f64 = q_new
                .iter()
                .zip(areas)
                .map(|(v, a)| v * v * a)
                .sum::<f64>()
                .sqrt();
            if !(dnorm > 0.0) {
                return Err(Error::Singular("inverse iteration collapsed".into()));
            }
            for v in q_new.iter_mut() {
                *v /= dnorm;
            }
            let sq = schur_apply(&q_new);
            let num: f64 = q_new.iter().zip(&sq).map(|(a, b)| a * b).sum();
            rho = num; // q is D-normalized
            q = q_new;
            if (rho - rho_prev).abs() <= 1e-9 * rho.abs() {
                break;
            }
            rho_prev = rho;
        }
        rho
    };

    if lambda_min < 1e-10 {
        return Err(Error::UnstablePressure {
            eigenvalue: lambda_min,
        });
    }
    Ok(lambda_min.sqrt())
}
