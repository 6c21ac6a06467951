//! Dense Galerkin matrices and load vectors for Symm's equation and the
//! stabilized hypersingular equation.
//!
//! Single-layer entries use the analytic inner integral; the outer variable
//! is integrated with fixed Gauss rules, dyadically graded towards the
//! closest point of the other panel when the panels are close or touching.
//! The hypersingular form is assembled through the arc-length
//! integration-by-parts congruence W = D^T V D, so constants land in the
//! kernel by construction.

use std::io::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, Point};
use crate::kernels::{
    dlp_adjoint_panel_moment, dlp_panel_linear, panel_log_moment, segment_distance,
    slp_self_entry,
};
use crate::quadrature::GaussRule;

const INV_2PI: f64 = 1.0 / (2.0 * std::f64::consts::PI);

/// Discrete boundary-element space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Piecewise constants, one coefficient per element.
    P0,
    /// Continuous piecewise linears, one coefficient per node.
    P1,
}

/// Dense symmetric operator matrix with its space tag.
#[derive(Debug, Clone)]
pub struct GalerkinMatrix {
    n: usize,
    space: Space,
    data: Vec<f64>,
}

impl GalerkinMatrix {
    pub fn zeros(n: usize, space: Space) -> Self {
        GalerkinMatrix {
            n,
            space,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> Space {
        self.space
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest relative asymmetry |A - A^T| / max|A|.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .data
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Entrywise sum, used for W + a a^T.
    pub fn add(&self, other: &GalerkinMatrix) -> GalerkinMatrix {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        GalerkinMatrix {
            n: self.n,
            space: self.space,
            data,
        }
    }
}

/// Density coefficients with their space tag.
#[derive(Debug, Clone)]
pub struct CoefficientVector {
    space: Space,
    data: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(space: Space, data: Vec<f64>) -> Self {
        CoefficientVector { space, data }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl std::ops::Index<usize> for CoefficientVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

fn rules() -> &'static (GaussRule, GaussRule, GaussRule) {
    static RULES: OnceLock<(GaussRule, GaussRule, GaussRule)> = OnceLock::new();
    RULES.get_or_init(|| (GaussRule::new(8), GaussRule::new(16), GaussRule::new(4)))
}

const GRADE_DEPTH_TOUCHING: usize = 42;

/// Integrates `f` along the segment `(a, b)`, choosing the scheme from the
/// distance `dist` to the nearest singular structure and the arc-length
/// parameter `t_near` of the closest point.
pub(crate) fn integrate_near_aware<F: FnMut(Point) -> f64>(
    a: Point,
    b: Point,
    dist: f64,
    t_near: f64,
    mut f: F,
) -> f64 {
    let len = a.dist(b);
    let tau = (b - a) * (1.0 / len);
    let (g8, g16, g4) = rules();
    let mut line = |t: f64| f(a + tau * t);
    if dist <= 1e-14 * len {
        // Touching panels: grade all the way down at the contact point.
        let mut sum = 0.0;
        if t_near > 0.0 {
            sum += g8.integrate_graded(0.0, t_near.min(len), false, GRADE_DEPTH_TOUCHING, &mut line);
        }
        if t_near < len {
            sum += g8.integrate_graded(t_near.max(0.0), len, true, GRADE_DEPTH_TOUCHING, &mut line);
        }
        sum
    } else if dist < len {
        let depth = ((len / dist).log2().ceil() as usize + 6).min(GRADE_DEPTH_TOUCHING);
        let mut sum = 0.0;
        if t_near > 0.0 {
            sum += g8.integrate_graded(0.0, t_near.min(len), false, depth, &mut line);
        }
        if t_near < len {
            sum += g8.integrate_graded(t_near.max(0.0), len, true, depth, &mut line);
        }
        sum
    } else if dist < 8.0 * len {
        g16.integrate(0.0, len, &mut line)
    } else if dist < 64.0 * len {
        g8.integrate(0.0, len, &mut line)
    } else {
        // Analytic integrand with convergence radius >= dist: the 4-point
        // rule is already far below f64 precision out here.
        g4.integrate(0.0, len, &mut line)
    }
}

fn same_panel(a1: Point, b1: Point, a2: Point, b2: Point) -> bool {
    (a1 == a2 && b1 == b2) || (a1 == b2 && b1 == a2)
}

/// Galerkin entry of the single-layer operator for a pair of straight
/// panels: `int_P int_Q G(x - y) ds_y ds_x`.
pub fn v_panel_entry(a1: Point, b1: Point, a2: Point, b2: Point) -> f64 {
    if same_panel(a1, b1, a2, b2) {
        return slp_self_entry(a1.dist(b1));
    }
    // Well-separated fast path: a lower bound on the distance from the
    // midpoint gap spares the exact segment-distance computation.
    let len1 = a1.dist(b1);
    let len2 = a2.dist(b2);
    let mid_gap = ((a1 + b1) * 0.5).dist((a2 + b2) * 0.5);
    let half_spans = 0.5 * (len1 + len2);
    if mid_gap - half_spans >= 64.0 * len1 {
        let inner = integrate_near_aware(a1, b1, mid_gap - half_spans, 0.0, |x| {
            panel_log_moment(a2, b2, x)
        });
        return -INV_2PI * inner;
    }
    let (dist, t_near) = segment_distance(a1, b1, a2, b2);
    let inner = integrate_near_aware(a1, b1, dist, t_near, |x| panel_log_moment(a2, b2, x));
    -INV_2PI * inner
}

fn check_diameter(mesh: &BoundaryMesh) -> Result<()> {
    let d = mesh.polygon().diameter();
    if d >= 1.0 {
        return Err(Error::DiameterTooLarge(d));
    }
    Ok(())
}

/// Assembles the single-layer Galerkin matrix on the piecewise-constant
/// space. Symmetric by construction (each unordered pair is computed once).
pub fn assemble_v(mesh: &BoundaryMesh) -> Result<GalerkinMatrix> {
    check_diameter(mesh)?;
    let n = mesh.num_elements();
    let elements: Vec<_> = mesh.elements().collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ei = &elements[i];
            (i..n)
                .map(|j| {
                    let ej = &elements[j];
                    v_panel_entry(ei.a, ei.b, ej.a, ej.b)
                })
                .collect()
        })
        .collect();
    let mut m = GalerkinMatrix::zeros(n, Space::P0);
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + k;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

/// Load vector for Symm's equation with Dirichlet data `g`:
/// `b_j = int_{T_j} ((1/2) g + K g)(x) ds_x`.
///
/// The double-layer part is evaluated with the order of integration swapped,
/// so the x-integral over `T_j` is the closed-form adjoint moment and only
/// the smooth y-integral is done numerically. `singularity`, when given,
/// marks a boundary point where `g` loses smoothness (the corner of a
/// manufactured solution); quadrature is graded towards it.
pub fn assemble_rhs_symm<G: Fn(Point) -> f64 + Sync>(
    mesh: &BoundaryMesh,
    g: G,
    singularity: Option<Point>,
) -> CoefficientVector {
    let n = mesh.num_elements();
    let elements: Vec<_> = mesh.elements().collect();
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let tj = &elements[j];
            // (1/2) int_{T_j} g
            let mut b = 0.5 * integrate_element(tj.a, tj.b, singularity, |x| g(x));
            // sum_k int_{T_k} g(y) [int_{T_j} dG/dn_y (x,y) ds_x] ds_y
            for tk in &elements {
                if tk.edge == tj.edge {
                    // Same straight edge: the kernel vanishes identically.
                    continue;
                }
                let (dist, t_near) = segment_distance(tk.a, tk.b, tj.a, tj.b);
                let (dist, t_near) = override_for_singularity(tk.a, tk.b, dist, t_near, singularity);
                b += integrate_near_aware(tk.a, tk.b, dist, t_near, |y| {
                    g(y) * dlp_adjoint_panel_moment(tj.a, tj.b, y, tk.normal)
                });
            }
            b
        })
        .collect();
    CoefficientVector::new(Space::P0, data)
}

/// Plain element integral, graded towards `singularity` when it coincides
/// with one of the endpoints.
fn integrate_element<F: FnMut(Point) -> f64>(
    a: Point,
    b: Point,
    singularity: Option<Point>,
    f: F,
) -> f64 {
    let len = a.dist(b);
    match endpoint_near(a, b, singularity) {
        Some(t) => integrate_near_aware(a, b, 0.0, t, f),
        None => {
            let (_, g16, _) = rules();
            let tau = (b - a) * (1.0 / len);
            let mut f = f;
            g16.integrate(0.0, len, |t| f(a + tau * t))
        }
    }
}

fn endpoint_near(a: Point, b: Point, singularity: Option<Point>) -> Option<f64> {
    let s = singularity?;
    let len = a.dist(b);
    if a.dist(s) <= 1e-12 * len.max(1.0) {
        Some(0.0)
    } else if b.dist(s) <= 1e-12 * len.max(1.0) {
        Some(len)
    } else {
        None
    }
}

fn override_for_singularity(
    a: Point,
    b: Point,
    dist: f64,
    t_near: f64,
    singularity: Option<Point>,
) -> (f64, f64) {
    match endpoint_near(a, b, singularity) {
        Some(t) => (0.0, t),
        None => (dist, t_near),
    }
}

/// Hypersingular Galerkin matrix on the continuous piecewise-linear space,
/// via the congruence W = D^T V D with D the nodal-to-slope map.
pub fn assemble_w(mesh: &BoundaryMesh) -> Result<GalerkinMatrix> {
    let v = assemble_v(mesh)?;
    Ok(w_from_v(mesh, &v))
}

/// The congruence step, exposed separately so a precomputed V can be reused.
pub fn w_from_v(mesh: &BoundaryMesh, v: &GalerkinMatrix) -> GalerkinMatrix {
    let n = mesh.num_elements();
    assert_eq!(v.dim(), n);
    let h: Vec<f64> = mesh.elements().map(|e| e.length).collect();
    let prev = |i: usize| (i + n - 1) % n;
    // C = V D, column q of D touching elements q-1 (+1/h) and q (-1/h).
    let mut c = vec![0.0; n * n];
    for e in 0..n {
        for q in 0..n {
            c[e * n + q] = v.get(e, prev(q)) / h[prev(q)] - v.get(e, q) / h[q];
        }
    }
    let mut w = GalerkinMatrix::zeros(n, Space::P1);
    for p in 0..n {
        for q in p..n {
            let val = c[prev(p) * n + q] / h[prev(p)] - c[p * n + q] / h[p];
            w.set(p, q, val);
            w.set(q, p, val);
        }
    }
    w
}

/// Integrals of the nodal hat functions, `a_i = int_Gamma hat_i ds`.
pub fn hat_masses(mesh: &BoundaryMesh) -> Vec<f64> {
    let n = mesh.num_elements();
    let h: Vec<f64> = mesh.elements().map(|e| e.length).collect();
    (0..n).map(|i| 0.5 * (h[(i + n - 1) % n] + h[i])).collect()
}

/// Rank-one stabilization matrix `a a^T` with `a` the hat masses.
pub fn assemble_stabilization(mesh: &BoundaryMesh) -> GalerkinMatrix {
    let a = hat_masses(mesh);
    let n = a.len();
    let mut m = GalerkinMatrix::zeros(n, Space::P1);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, a[i] * a[j]);
        }
    }
    m
}

/// Load vector for the stabilized hypersingular equation with Neumann data
/// given through the exterior Calderon relation: `f = (1/2 - K') flux`,
/// realized through the adjoint pairing
/// `b_j = (1/2) <flux, hat_j> - <flux, K hat_j>`.
pub fn assemble_rhs_hypsing<F: Fn(Point, Point) -> f64 + Sync>(
    mesh: &BoundaryMesh,
    flux: F,
    singularity: Option<Point>,
) -> CoefficientVector {
    let n = mesh.num_elements();
    let elements: Vec<_> = mesh.elements().collect();
    let prev = |i: usize| (i + n - 1) % n;
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            // hat_j rises on element j-1 and falls on element j.
            let rise = &elements[prev(j)];
            let fall = &elements[j];
            let khat = |x: Point| -> f64 {
                let (_, i1) = dlp_panel_linear(rise.a, rise.b, rise.normal, x);
                let (i0f, i1f) = dlp_panel_linear(fall.a, fall.b, fall.normal, x);
                i1 + (i0f - i1f)
            };
            let hat = |m: usize, x: Point, tm: &crate::geometry::Element| -> f64 {
                if m == prev(j) {
                    x.dist(tm.a) / tm.length
                } else if m == j {
                    1.0 - x.dist(tm.a) / tm.length
                } else {
                    0.0
                }
            };
            let mut b = 0.0;
            for (m, tm) in elements.iter().enumerate() {
                // Nearest non-smooth structure of K hat_j seen from tm. On
                // the support panels themselves the own-panel moment
                // vanishes, so only the opposite panel counts there.
                let d_rise = segment_distance(tm.a, tm.b, rise.a, rise.b);
                let d_fall = segment_distance(tm.a, tm.b, fall.a, fall.b);
                let (dist, t_near) = if m == prev(j) {
                    d_fall
                } else if m == j {
                    d_rise
                } else if d_rise.0 <= d_fall.0 {
                    d_rise
                } else {
                    d_fall
                };
                let (dist, t_near) =
                    override_for_singularity(tm.a, tm.b, dist, t_near, singularity);
                b += integrate_near_aware(tm.a, tm.b, dist, t_near, |x| {
                    flux(x, tm.normal) * (0.5 * hat(m, x, tm) - khat(x))
                });
            }
            b
        })
        .collect();
    CoefficientVector::new(Space::P1, data)
}

/// Debug dump: plain text, row-major, one row per line, `%.17g`-style floats.
pub fn dump_matrix(m: &GalerkinMatrix, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..m.dim() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonical_geometry, BoundaryMesh, CanonicalGeometry};
    use approx::assert_relative_eq;

    #[test]
    fn v_self_entry_unit_panel() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(1.0, 0.0);
        assert_relative_eq!(
            v_panel_entry(a, b, a, b),
            3.0 / (4.0 * std::f64::consts::PI),
            epsilon = 1e-15
        );
    }

    #[test]
    fn v_entry_scale_covariance() {
        // V(s panels) = s^2 V(panels) - s^2 ln(s)/(2 pi) * l_i l_j.
        let a1 = Point::new(0.0, 0.0);
        let b1 = Point::new(0.12, 0.0);
        let a2 = Point::new(0.12, 0.0);
        let b2 = Point::new(0.12, 0.1);
        let s = 0.37;
        let scale = |p: Point| p * s;
        let base = v_panel_entry(a1, b1, a2, b2);
        let scaled = v_panel_entry(scale(a1), scale(b1), scale(a2), scale(b2));
        let l1 = a1.dist(b1);
        let l2 = a2.dist(b2);
        let predicted = s * s * base - s * s * s.ln() * INV_2PI * l1 * l2;
        assert_relative_eq!(scaled, predicted, epsilon = 1e-11);
    }

    #[test]
    fn v_matrix_symmetric_spd_on_square() {
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = BoundaryMesh::initial_per_edge(&p, 3).unwrap();
        let v = assemble_v(&m).unwrap();
        assert!(v.asymmetry() < 1e-12);
        // All leading pivots positive <=> Cholesky succeeds.
        crate::solver::cholesky(&v).unwrap();
    }

    #[test]
    fn rhs_symm_constant_data_vanishes() {
        for g in [CanonicalGeometry::Square, CanonicalGeometry::LShape] {
            let p = canonical_geometry(g);
            let m = BoundaryMesh::initial_per_edge(&p, 3).unwrap();
            let b = assemble_rhs_symm(&m, |_| 1.0, None);
            for j in 0..b.len() {
                assert!(b[j].abs() < 1e-12, "{g:?} entry {j} = {}", b[j]);
            }
        }
    }

    #[test]
    fn rhs_symm_zero_data() {
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = BoundaryMesh::initial_per_edge(&p, 2).unwrap();
        let b = assemble_rhs_symm(&m, |_| 0.0, None);
        assert!(b.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn w_rows_sum_to_zero_and_symmetric() {
        let p = canonical_geometry(CanonicalGeometry::LShape);
        let m = BoundaryMesh::initial_per_edge(&p, 2).unwrap();
        let w = assemble_w(&m).unwrap();
        assert!(w.asymmetry() < 1e-12);
        let scale = w.as_slice().iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        for i in 0..w.dim() {
            let row_sum: f64 = w.row(i).iter().sum();
            assert!(row_sum.abs() < 1e-12 * scale.max(1.0), "row {i}: {row_sum}");
        }
    }

    #[test]
    fn stabilization_rank_one_properties() {
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = BoundaryMesh::initial_per_edge(&p, 4).unwrap();
        let a = hat_masses(&m);
        let total: f64 = a.iter().sum();
        assert_relative_eq!(total, m.total_length(), epsilon = 1e-13);
        // Uniform mesh: every hat integral equals h.
        let h = m.h();
        for &ai in &a {
            assert_relative_eq!(ai, h, epsilon = 1e-13);
        }
        // a a^T annihilates vectors orthogonal to a.
        let s = assemble_stabilization(&m);
        let mut v = vec![0.0; a.len()];
        v[0] = 1.0 / a[0];
        v[1] = -1.0 / a[1];
        let sv = s.matvec(&v);
        assert!(sv.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn rhs_hypsing_compatibility_and_zero() {
        let p = canonical_geometry(CanonicalGeometry::Square);
        let m = BoundaryMesh::initial_per_edge(&p, 3).unwrap();
        // flux of u = x is n_x; compatibility <f, 1> = 0.
        let b = assemble_rhs_hypsing(&m, |_, n| n.x, None);
        let total: f64 = b.as_slice().iter().sum();
        assert!(total.abs() < 1e-8, "<f,1> = {total}");
        let z = assemble_rhs_hypsing(&m, |_, _| 0.0, None);
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
    }
}
