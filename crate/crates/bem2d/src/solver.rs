//! Dense SPD factorization and the two end-to-end Galerkin solves.

use crate::error::{Error, Result};
use crate::geometry::BoundaryMesh;
use crate::operators::{
    assemble_rhs_hypsing, assemble_rhs_symm, assemble_stabilization, assemble_v, w_from_v,
    CoefficientVector, GalerkinMatrix, Space,
};
use crate::solutions::SingularSolution;

/// Lower-triangular Cholesky factor, rows stored contiguously.
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

/// Row-variant Cholesky factorization. Fails with the offending pivot index
/// when the matrix is not positive definite.
pub fn cholesky(a: &GalerkinMatrix) -> Result<CholeskyFactor> {
    let n = a.dim();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            // Contiguous dot product over the already-computed rows.
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            for (x, y) in ri.iter().zip(rj) {
                s -= x * y;
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotSpd { pivot: i, value: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(CholeskyFactor { n, l })
}

impl CholeskyFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }
}

/// Direct solve of a symmetric positive-definite system.
pub fn solve_spd(a: &GalerkinMatrix, b: &CoefficientVector) -> Result<CoefficientVector> {
    if a.dim() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but rhs has length {}",
            a.dim(),
            a.dim(),
            b.len()
        )));
    }
    if a.asymmetry() > 1e-10 {
        return Err(Error::InvalidConfig(
            "solve_spd requires a symmetric matrix".into(),
        ));
    }
    let x = cholesky(a)?.solve(b.as_slice());
    Ok(CoefficientVector::new(b.space(), x))
}

/// Relative residual `||Ax - b|| / ||b||` (0 when b = 0 and x = 0).
pub fn relative_residual(a: &GalerkinMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let num: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Assembled system for Symm's equation with the trace of `sol` as
/// Dirichlet data.
pub fn symm_system(
    mesh: &BoundaryMesh,
    sol: &SingularSolution,
) -> Result<(GalerkinMatrix, CoefficientVector)> {
    let v = assemble_v(mesh)?;
    let rhs = assemble_rhs_symm(mesh, |x| sol.trace(x), Some(sol.center));
    Ok((v, rhs))
}

/// Solves the discrete Symm equation for the piecewise-constant flux.
pub fn galerkin_solve_symm(
    mesh: &BoundaryMesh,
    sol: &SingularSolution,
) -> Result<CoefficientVector> {
    let (v, rhs) = symm_system(mesh, sol)?;
    solve_spd(&v, &rhs)
}

/// Assembled stabilized hypersingular system for Neumann data `flux`.
pub fn hypsing_system<F: Fn(crate::geometry::Point, crate::geometry::Point) -> f64 + Sync>(
    mesh: &BoundaryMesh,
    flux: F,
    singularity: Option<crate::geometry::Point>,
) -> Result<(GalerkinMatrix, CoefficientVector)> {
    let v = assemble_v(mesh)?;
    let w = w_from_v(mesh, &v);
    let system = w.add(&assemble_stabilization(mesh));
    let rhs = assemble_rhs_hypsing(mesh, flux, singularity);
    Ok((system, rhs))
}

/// Solves the stabilized hypersingular equation for the nodal trace
/// (zero-mean representative).
pub fn galerkin_solve_hypsing<F>(
    mesh: &BoundaryMesh,
    flux: F,
    singularity: Option<crate::geometry::Point>,
) -> Result<CoefficientVector>
where
    F: Fn(crate::geometry::Point, crate::geometry::Point) -> f64 + Sync,
{
    let (system, rhs) = hypsing_system(mesh, flux, singularity)?;
    let x = solve_spd(&system, &rhs)?;
    Ok(CoefficientVector::new(Space::P1, x.as_slice().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonical_geometry, BoundaryMesh, CanonicalGeometry, Point};
    use crate::operators::hat_masses;

    fn identity(n: usize) -> GalerkinMatrix {
        let mut m = GalerkinMatrix::zeros(n, Space::P0);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[test]
    fn identity_solve_and_zero_rhs() {
        let a = identity(5);
        let b = CoefficientVector::new(Space::P0, vec![1.0, -2.0, 0.5, 3.0, 0.0]);
        let x = solve_spd(&a, &b).unwrap();
        assert_eq!(x.as_slice(), b.as_slice());
        let z = CoefficientVector::new(Space::P0, vec![0.0; 5]);
        let x = solve_spd(&a, &z).unwrap();
        assert!(x.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_spd_reports_pivot() {
        let mut a = identity(3);
        a.set(2, 2, -1.0);
        let b = CoefficientVector::new(Space::P0, vec![1.0; 3]);
        match solve_spd(&a, &b) {
            Err(Error::NotSpd { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }

    #[test]
    fn residual_small_on_assembled_system() {
        let p = canonical_geometry(CanonicalGeometry::LShape);
        let mut m = BoundaryMesh::initial_per_edge(&p, 6).unwrap();
        m = m.refine_uniform(); // N = 72
        let v = crate::operators::assemble_v(&m).unwrap();
        // Deterministic pseudo-random rhs.
        let b: Vec<f64> = (0..v.dim())
            .map(|i| ((i as f64 * 12.9898).sin() * 43758.5453).fract())
            .collect();
        let b = CoefficientVector::new(Space::P0, b);
        let x = solve_spd(&v, &b).unwrap();
        let r = relative_residual(&v, x.as_slice(), b.as_slice());
        assert!(r <= 1e-10, "relative residual {r}");
    }

    #[test]
    fn symm_reproduces_per_element_constant_flux() {
        // u = x on the square: the exact flux n_x lies in S^{0,0}.
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = BoundaryMesh::initial_per_edge(&p, 4).unwrap();
        let sol = SingularSolution::centered(1.0).unwrap();
        let phi = galerkin_solve_symm(&m, &sol).unwrap();
        for (i, e) in m.elements().enumerate() {
            assert!(
                (phi[i] - e.normal.x).abs() < 1e-8,
                "element {i}: {} vs {}",
                phi[i],
                e.normal.x
            );
        }
    }

    #[test]
    fn symm_constant_trace_gives_zero_flux() {
        let p = canonical_geometry(CanonicalGeometry::LShape);
        let m = BoundaryMesh::initial_per_edge(&p, 3).unwrap();
        let v = crate::operators::assemble_v(&m).unwrap();
        let rhs = crate::operators::assemble_rhs_symm(&m, |_| 2.5, None);
        let phi = solve_spd(&v, &rhs).unwrap();
        for i in 0..phi.len() {
            assert!(phi[i].abs() < 1e-8, "element {i}: {}", phi[i]);
        }
    }

    #[test]
    fn hypsing_reproduces_linear_trace_on_square() {
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = BoundaryMesh::initial_per_edge(&p, 4).unwrap();
        let phi = galerkin_solve_hypsing(&m, |_, n| n.x, None).unwrap();
        // Exact: nodal values of x minus the boundary mean of x.
        let a = hat_masses(&m);
        let vals: Vec<f64> = m.nodes().iter().map(|p| p.x).collect();
        let mean: f64 =
            a.iter().zip(&vals).map(|(ai, vi)| ai * vi).sum::<f64>() / m.total_length();
        for i in 0..phi.len() {
            assert!(
                (phi[i] - (vals[i] - mean)).abs() < 1e-7,
                "node {i}: {} vs {}",
                phi[i],
                vals[i] - mean
            );
        }
        // Stabilization enforces the zero-mean representative.
        let mean_h: f64 = a
            .iter()
            .zip(phi.as_slice())
            .map(|(ai, vi)| ai * vi)
            .sum();
        assert!(mean_h.abs() < 1e-8, "<phi_h, 1> = {mean_h}");
    }

    #[test]
    fn hypsing_zero_rhs() {
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = BoundaryMesh::initial_per_edge(&p, 3).unwrap();
        let phi = galerkin_solve_hypsing(&m, |_, _| 0.0, None).unwrap();
        assert!(phi.as_slice().iter().all(|&v| v == 0.0));
        let _ = Point::new(0.0, 0.0);
    }
}
