//! Error measurement: local/global L2, local H^{-1/2} through the V-energy
//! of the cut-off error, local H^1 seminorms, and EOC fitting.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, BoundaryRegion, Point};
use crate::operators::{v_panel_entry, CoefficientVector};
use crate::quadrature::GaussRule;

fn gauss2() -> GaussRule {
    GaussRule::new(2)
}

/// Per-level error record of a convergence run.
#[derive(Debug, Clone)]
pub struct ErrorRecord {
    pub level: usize,
    pub n: usize,
    pub h: f64,
    pub norms: BTreeMap<String, f64>,
}

/// L2 error of a piecewise-constant density against the exact flux on a
/// region, using the 2-point Gauss rule per element.
pub fn l2_error<F: Fn(Point, Point) -> f64>(
    mesh: &BoundaryMesh,
    phi_h: &CoefficientVector,
    exact_flux: F,
    region: &BoundaryRegion,
) -> Result<f64> {
    let members = region.members(mesh);
    if members.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let g2 = gauss2();
    let mut sum = 0.0;
    for &i in &members {
        let e = mesh.element(i);
        let tau = (e.b - e.a) * (1.0 / e.length);
        sum += g2.integrate(0.0, e.length, |t| {
            let x = e.a + tau * t;
            let d = exact_flux(x, e.normal) - phi_h[i];
            d * d
        });
    }
    Ok(sum.sqrt())
}

/// Builds the `refine_factor`-fold split of the region's elements together
/// with the fine-mesh P0 projection of the error function `e`. On fine
/// panels with an endpoint at `singularity` the mean is computed with a
/// graded rule so that integrable blow-ups (r^{alpha-1} data) are projected
/// accurately instead of sampled.
fn fine_projection<F: Fn(usize, Point, Point) -> f64>(
    mesh: &BoundaryMesh,
    members: &[usize],
    refine_factor: usize,
    singularity: Option<Point>,
    e: F,
) -> (Vec<(Point, Point)>, Vec<f64>) {
    let g2 = gauss2();
    let g8 = GaussRule::new(8);
    let mut panels = Vec::with_capacity(members.len() * refine_factor);
    let mut weights = Vec::with_capacity(members.len() * refine_factor);
    for &i in members {
        let el = mesh.element(i);
        let step = (el.b - el.a) * (1.0 / refine_factor as f64);
        let tau = (el.b - el.a) * (1.0 / el.length);
        let hf = el.length / refine_factor as f64;
        for j in 0..refine_factor {
            let a = el.a + step * j as f64;
            let b = el.a + step * (j + 1) as f64;
            panels.push((a, b));
            let t0 = j as f64 * hf;
            let f = |t: f64| e(i, el.a + tau * t, el.normal);
            let mean = match singularity {
                Some(s) if a == s => {
                    g8.integrate_graded(t0, t0 + hf, true, 42, f) / hf
                }
                Some(s) if b == s => {
                    g8.integrate_graded(t0, t0 + hf, false, 42, f) / hf
                }
                _ => g2.integrate(t0, t0 + hf, f) / hf,
            };
            weights.push(mean);
        }
    }
    (panels, weights)
}

/// Streaming symmetric quadratic form `w^T V w` over a list of panels.
/// O(M^2) time, O(M) memory; per-row partial sums are reduced in index
/// order, so the result is independent of the thread count.
pub fn v_quadratic_form(panels: &[(Point, Point)], w: &[f64]) -> f64 {
    assert_eq!(panels.len(), w.len());
    let partials: Vec<f64> = (0..panels.len())
        .into_par_iter()
        .map(|k| {
            let (ak, bk) = panels[k];
            let mut s = w[k] * w[k] * v_panel_entry(ak, bk, ak, bk);
            for l in k + 1..panels.len() {
                let (al, bl) = panels[l];
                s += 2.0 * w[k] * w[l] * v_panel_entry(ak, bk, al, bl);
            }
            s
        })
        .collect();
    partials.iter().sum()
}

/// Local negative-order norm `sqrt(<V(chi e), chi e>)`: the region's
/// elements are split `refine_factor`-fold, `e` is projected by per-element
/// Gauss averaging, and the quadratic form is evaluated streaming.
pub fn neg_half_norm_local<F: Fn(usize, Point, Point) -> f64>(
    mesh: &BoundaryMesh,
    e: F,
    region: &BoundaryRegion,
    refine_factor: usize,
) -> Result<f64> {
    assert!(refine_factor >= 2, "refine_factor must be >= 2");
    let members = region.members(mesh);
    if members.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (panels, w) = fine_projection(mesh, &members, refine_factor, None, e);
    Ok(v_quadratic_form(&panels, &w).max(0.0).sqrt())
}

/// Global energy-norm error `sqrt(<V e, e>)` with the same streaming
/// projection scheme applied to the whole boundary. `singularity` marks a
/// point where the exact flux blows up (integrably), so the projection
/// means next to it are computed with graded quadrature.
pub fn energy_error_global<F: Fn(Point, Point) -> f64>(
    mesh: &BoundaryMesh,
    phi_h: &CoefficientVector,
    exact_flux: F,
    refine_factor: usize,
    singularity: Option<Point>,
) -> Result<f64> {
    let members: Vec<usize> = (0..mesh.num_elements()).collect();
    let (panels, w) = fine_projection(mesh, &members, refine_factor, singularity, |i, x, n| {
        exact_flux(x, n) - phi_h[i]
    });
    Ok(v_quadratic_form(&panels, &w).max(0.0).sqrt())
}

/// `<V phi, phi>` of an exact density through the fine projection, for the
/// Pythagoras cross-check.
pub fn v_energy_of<F: Fn(Point, Point) -> f64>(
    mesh: &BoundaryMesh,
    density: F,
    refine_factor: usize,
    singularity: Option<Point>,
) -> f64 {
    let members: Vec<usize> = (0..mesh.num_elements()).collect();
    let (panels, w) =
        fine_projection(mesh, &members, refine_factor, singularity, |_, x, n| density(x, n));
    v_quadratic_form(&panels, &w)
}

/// Local H^1 seminorm error of a continuous piecewise-linear trace
/// approximation: arc-length derivative mismatch, elementwise 2-point Gauss.
pub fn h1_seminorm_error_local<F: Fn(Point, Point) -> f64>(
    mesh: &BoundaryMesh,
    phi_h: &CoefficientVector,
    exact_tangential: F,
    region: &BoundaryRegion,
) -> Result<f64> {
    let members = region.members(mesh);
    if members.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let g2 = gauss2();
    let n = mesh.num_elements();
    let mut sum = 0.0;
    for &i in &members {
        let e = mesh.element(i);
        let tau = (e.b - e.a) * (1.0 / e.length);
        let slope = (phi_h[(i + 1) % n] - phi_h[i]) / e.length;
        sum += g2.integrate(0.0, e.length, |t| {
            let x = e.a + tau * t;
            let d = exact_tangential(x, tau) - slope;
            d * d
        });
    }
    Ok(sum.sqrt())
}

/// Least-squares slope of log(error) against log(N) over the last `window`
/// records, negated.
pub fn fit_eoc(records: &[ErrorRecord], norm: &str, window: usize) -> Result<f64> {
    let with_norm: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.norms.get(norm).map(|&e| (r.n as f64, e)))
        .collect();
    let start = with_norm.len().saturating_sub(window);
    let tail = &with_norm[start..];
    if tail.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "EOC fit for '{norm}' needs at least 2 records, got {}",
            tail.len()
        )));
    }
    let mut xs = Vec::with_capacity(tail.len());
    let mut ys = Vec::with_capacity(tail.len());
    for &(n, e) in tail {
        if !(e > 0.0) {
            return Err(Error::NonPositiveError(e));
        }
        xs.push(n.ln());
        ys.push(e.ln());
    }
    let m = xs.len() as f64;
    let mean_x: f64 = xs.iter().sum::<f64>() / m;
    let mean_y: f64 = ys.iter().sum::<f64>() / m;
    let cov: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let var: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    Ok(-(cov / var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonical_geometry, CanonicalGeometry, Polygon};
    use crate::operators::Space;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn record(n: usize, e: f64) -> ErrorRecord {
        let mut norms = BTreeMap::new();
        norms.insert("err".to_string(), e);
        ErrorRecord {
            level: 0,
            n,
            h: 1.0 / n as f64,
            norms,
        }
    }

    #[test]
    fn eoc_reference_values() {
        let recs = vec![record(100, 0.1), record(200, 0.05)];
        assert_relative_eq!(fit_eoc(&recs, "err", 4).unwrap(), 1.0, epsilon = 1e-12);
        let recs = vec![record(100, 0.1), record(400, 0.025)];
        assert_relative_eq!(fit_eoc(&recs, "err", 4).unwrap(), 1.0, epsilon = 1e-12);
        let recs = vec![record(100, 0.3), record(200, 0.3), record(400, 0.3)];
        assert_relative_eq!(fit_eoc(&recs, "err", 4).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eoc_rejects_bad_input() {
        let recs = vec![record(100, 0.1)];
        assert!(fit_eoc(&recs, "err", 4).is_err());
        let recs = vec![record(100, 0.1), record(200, 0.0)];
        assert!(matches!(
            fit_eoc(&recs, "err", 4),
            Err(Error::NonPositiveError(_))
        ));
    }

    #[test]
    fn l2_error_single_element_linear() {
        // e(x) = x on [0,1] approximated by 1/2: error sqrt(1/12); the
        // 2-point rule is exact for the quadratic integrand.
        let p = Polygon::new(
            vec![
                crate::geometry::Point::new(0.0, 0.0),
                crate::geometry::Point::new(0.5, 0.0),
                crate::geometry::Point::new(0.5, 0.5),
                crate::geometry::Point::new(0.0, 0.5),
            ],
            None,
        )
        .unwrap();
        let m = crate::geometry::BoundaryMesh::initial_per_edge(&p, 1).unwrap();
        let region = BoundaryRegion::select_edges(&m, &[0]).unwrap();
        // Scale to the unit-interval statement: element 0 is [0, 0.5].
        let phi_h = CoefficientVector::new(Space::P0, vec![0.25, 0.0, 0.0, 0.0]);
        let err = l2_error(&m, &phi_h, |x, _| x.x, &region).unwrap();
        // int_0^{1/2} (x - 1/4)^2 dx = (1/12)(1/2)^3
        assert_relative_eq!(err, (0.5_f64.powi(3) / 12.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn zero_error_gives_zero_norms() {
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = crate::geometry::BoundaryMesh::initial_per_edge(&p, 3).unwrap();
        let region = BoundaryRegion::select_edges(&m, &[0, 1]).unwrap();
        let v = neg_half_norm_local(&m, |_, _, _| 0.0, &region, 2).unwrap();
        assert_eq!(v, 0.0);
        let phi = CoefficientVector::new(Space::P0, vec![0.0; m.num_elements()]);
        let v = energy_error_global(&m, &phi, |_, _| 0.0, 2, None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn nested_projection_exact_for_p0() {
        // For a coarse P0 error function the fine projection is exact, so
        // the value must match the coarse quadratic form.
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = crate::geometry::BoundaryMesh::initial_per_edge(&p, 2).unwrap();
        let region = BoundaryRegion::select_edges(&m, &[0, 1, 2, 3]).unwrap();
        let coeffs: Vec<f64> = (0..m.num_elements())
            .map(|i| ((i * 7 + 3) % 5) as f64 - 2.0)
            .collect();
        let fine = neg_half_norm_local(
            &m,
            |i, _, _| coeffs[i],
            &region,
            2,
        )
        .unwrap();
        let panels: Vec<_> = m.elements().map(|e| (e.a, e.b)).collect();
        let coarse = v_quadratic_form(&panels, &coeffs).max(0.0).sqrt();
        assert_relative_eq!(fine, coarse, epsilon = 1e-10);
    }

    #[test]
    fn h1_seminorm_reference_values() {
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = crate::geometry::BoundaryMesh::initial_per_edge(&p, 2).unwrap();
        let region = BoundaryRegion::select_edges(&m, &[0]).unwrap();
        // Nodal interpolant of trace x: zero H^1 error on the bottom edge.
        let vals: Vec<f64> = m.nodes().iter().map(|q| q.x).collect();
        let phi = CoefficientVector::new(Space::P1, vals);
        let sol = crate::solutions::SingularSolution::centered(1.0).unwrap();
        let err = h1_seminorm_error_local(
            &m,
            &phi,
            |x, tau| sol.tangential(x, tau).unwrap(),
            &region,
        )
        .unwrap();
        assert!(err < 1e-10, "err = {err}");
        // phi_h = 0 against trace x on an axis-aligned edge of length L:
        // integrand (d_s x)^2 = 1, so the error is sqrt(L).
        let zero = CoefficientVector::new(Space::P1, vec![0.0; m.num_nodes()]);
        let err = h1_seminorm_error_local(
            &m,
            &zero,
            |x, tau| sol.tangential(x, tau).unwrap(),
            &region,
        )
        .unwrap();
        let edge_len = p.edge_length(0);
        assert_relative_eq!(err, edge_len.sqrt(), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn eoc_scale_invariant(c in 1e-6..1e6f64) {
            let base = vec![record(64, 0.31), record(128, 0.19),
                            record(256, 0.118), record(512, 0.07)];
            let scaled: Vec<ErrorRecord> = base
                .iter()
                .map(|r| record(r.n, r.norms["err"] * c))
                .collect();
            let a = fit_eoc(&base, "err", 4).unwrap();
            let b = fit_eoc(&scaled, "err", 4).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
