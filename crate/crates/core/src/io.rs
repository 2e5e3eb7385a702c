//! Text exporters: legacy VTK, MatrixMarket and the convergence CSV.

use std::fmt::Write;

use crate::assembly::CsrMatrix;
use crate::mesh::{Mesh, Region};
use crate::verification::ConvergenceStudy;

/// Legacy ASCII VTK unstructured grid:  mesh, region tags, optional cell
/// scalars and vectors.
pub fn vtk_unstructured_grid(
    mesh: &Mesh,
    title: &str,
    cell_scalars: &[(&str, &[f64])],
    cell_vectors: &[(&str, &[(f64, f64)])],
) -> String {
    let mut out = String::new();
    let nv = mesh.vertices.len();
    let nt = mesh.triangles.len();
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "{}", title.lines().next().unwrap_or("mesh")).unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(out, "POINTS {nv} double").unwrap();
    for p in &mesh.vertices {
        writeln!(out, "{:.12e} {:.12e} 0.0", p.x, p.y).unwrap();
    }
    writeln!(out, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t.vertices[0], t.vertices[1], t.vertices[2]).unwrap();
    }
    writeln!(out, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        writeln!(out, "5").unwrap();
    }
    writeln!(out, "CELL_DATA {nt}").unwrap();
    writeln!(out, "SCALARS region int 1").unwrap();
    writeln!(out, "LOOKUP_TABLE default").unwrap();
    for t in &mesh.triangles {
        writeln!(out, "{}", if t.region == Region::Stokes { 0 } else { 1 }).unwrap();
    }
    for (name, values) in cell_scalars {
        assert_eq!(values.len(), nt);
        writeln!(out, "SCALARS {name} double 1").unwrap();
        writeln!(out, "LOOKUP_TABLE default").unwrap();
        for v in *values {
            writeln!(out, "{v:.12e}").unwrap();
        }
    }
    for (name, values) in cell_vectors {
        assert_eq!(values.len(), nt);
        writeln!(out, "VECTORS {name} double").unwrap();
        for (x, y) in *values {
            writeln!(out, "{x:.12e} {y:.12e} 0.0").unwrap();
        }
    }
    out
}

/// MatrixMarket coordinate form with 1-based indices.
pub fn matrix_market(m: &CsrMatrix, comment: &str) -> String {
    let mut out = String::new();
    writeln!(out, "%%MatrixMarket matrix coordinate real general").unwrap();
    for line in comment.lines() {
        writeln!(out, "% {line}").unwrap();
    }
    writeln!(out, "{} {} {}", m.nrows, m.ncols, m.nnz()).unwrap();
    for r in 0..m.nrows {
        for (c, v) in m.row(r) {
            writeln!(out, "{} {} {:.15e}", r + 1, c + 1, v).unwrap();
        }
    }
    out
}

fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt12(v: Option<f64>) -> String {
    v.map(sig12).unwrap_or_default()
}

/// Convergence CSV with observed orders between consecutive rows. The first
/// row leaves the order columns empty.
pub fn convergence_csv(study: &ConvergenceStudy, provenance: &str) -> String {
    let mut out = String::new();
    writeln!(out, "# {provenance}").unwrap();
    writeln!(out, "n,h,err_u_h,eoc_u,err_p,eoc_p,jump_J,eoc_J,alpha_h,beta_h").unwrap();
    for (i, row) in study.rows.iter().enumerate() {
        let (eoc_u, eoc_p, eoc_j) = if i == 0 {
            (String::new(), String::new(), String::new())
        } else {
            let prev = &study.rows[i - 1];
            let order = |a: f64, b: f64| sig12(crate::verification::eoc(a, b, prev.h, row.h));
            (
                order(prev.errors.err_u, row.errors.err_u),
                order(prev.errors.err_p, row.errors.err_p),
                // The jump column tracks the squared penalty component.
                order(prev.errors.jump.powi(2), row.errors.jump.powi(2)),
            )
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.n,
            sig12(row.h),
            sig12(row.errors.err_u),
            eoc_u,
            sig12(row.errors.err_p),
            eoc_p,
            sig12(row.errors.jump.powi(2)),
            eoc_j,
            opt12(row.alpha),
            opt12(row.beta),
        )
        .unwrap();
    }
    out
}

/// Spectral CSV of the inf-sup command.
pub fn spectral_csv(rows: &[(usize, f64, f64, f64)], provenance: &str) -> String {
    let mut out = String::new();
    writeln!(out, "# {provenance}").unwrap();
    writeln!(out, "n,h,alpha_h,beta_h").unwrap();
    for &(n, h, alpha, beta) in rows {
        writeln!(out, "{},{},{},{}", n, sig12(h), sig12(alpha), sig12(beta)).unwrap();
    }
    out
}

/// Two-column log-log data block (h against each error), ready for gnuplot.
pub fn loglog_data(study: &ConvergenceStudy, provenance: &str) -> String {
    let mut out = String::new();
    writeln!(out, "# {provenance}").unwrap();
    writeln!(out, "# h err_u_h err_p jump_J").unwrap();
    for row in &study.rows {
        writeln!(
            out,
            "{} {} {} {}",
            sig12(row.h),
            sig12(row.errors.err_u),
            sig12(row.errors.err_p),
            sig12(row.errors.jump.powi(2)),
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, DomainGeometry};

    #[test]
    fn vtk_header_and_counts() {
        let mesh = build_structured_mesh(1, DomainGeometry::default()).unwrap();
        let pressure = vec![0.25; 4];
        let velocity = vec![(1.0, -1.0); 4];
        let text = vtk_unstructured_grid(
            &mesh,
            "test mesh",
            &[("pressure", &pressure)],
            &[("velocity", &velocity)],
        );
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# vtk DataFile Version 3.0"));
        assert_eq!(lines.next(), Some("test mesh"));
        assert_eq!(lines.next(), Some("ASCII"));
        assert_eq!(lines.next(), Some("DATASET UNSTRUCTURED_GRID"));
        assert_eq!(lines.next(), Some("POINTS 6 double"));
        assert!(text.contains("CELLS 4 16"));
        assert!(text.contains("CELL_TYPES 4"));
        assert!(text.contains("SCALARS region int 1"));
        assert!(text.contains("SCALARS pressure double 1"));
        assert!(text.contains("VECTORS velocity double"));
        // Two Stokes cells then two Darcy cells.
        let region_block: Vec<&str> = text
            .lines()
            .skip_while(|l| *l != "LOOKUP_TABLE default")
            .skip(1)
            .take(4)
            .collect();
        assert_eq!(region_block, vec!["0", "0", "1", "1"]);
    }

    #[test]
    fn matrix_market_round_trip_shape() {
        let mesh = build_structured_mesh(1, DomainGeometry::default()).unwrap();
        let dofmap = crate::space::build_dof_map(&mesh);
        let b = crate::assembly::assemble_divergence(&mesh, &dofmap);
        let text = matrix_market(&b, "divergence block");
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("%%MatrixMarket matrix coordinate real general")
        );
        assert_eq!(lines.next(), Some("% divergence block"));
        let dims = lines.next().unwrap();
        let parts: Vec<usize> = dims
            .split_whitespace()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(parts[0], 4);
        assert_eq!(parts[1], 11);
        assert_eq!(parts[2], b.nnz());
        assert_eq!(lines.count(), b.nnz());
    }
}
