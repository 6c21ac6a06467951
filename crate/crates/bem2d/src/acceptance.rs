//! Release gate: the named checks behind `bem-local verify`.
//!
//! Each criterion produces one [`CriterionResult`]; `run_all` executes the
//! full list. The four large convergence runs are shared across criteria.

use std::time::Instant;

use crate::error::Result;
use crate::geometry::{
    canonical_geometry, BoundaryMesh, BoundaryRegion, CanonicalGeometry, Point,
};
use crate::harness::{run_experiment, ConvergenceTable, Equation, ExperimentConfig, GeometrySpec};
use crate::norms::{fit_eoc, h1_seminorm_error_local, neg_half_norm_local};
use crate::operators::{
    assemble_rhs_symm, assemble_stabilization, assemble_v, hat_masses, w_from_v,
};
use crate::quadrature::adaptive_quad;
use crate::solutions::SingularSolution;
use crate::solver::{cholesky, galerkin_solve_hypsing, galerkin_solve_symm, solve_spd};

/// Outcome of one named acceptance check.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult {
        name,
        passed,
        detail,
    }
}

fn failure(name: &'static str, err: &crate::error::Error) -> CriterionResult {
    result(name, false, format!("run failed: {err}"))
}

struct BigRun {
    table: ConvergenceTable,
    seconds: f64,
}

fn big_run(geometry: CanonicalGeometry, alpha: f64, levels: usize) -> Result<BigRun> {
    let cfg = ExperimentConfig {
        levels,
        ..ExperimentConfig::new(GeometrySpec::Canonical(geometry), Equation::Symm, alpha)
    };
    let start = Instant::now();
    let table = run_experiment(&cfg)?;
    Ok(BigRun {
        table,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn rate_check(
    name: &'static str,
    run: &Result<BigRun>,
    norm: &str,
    expected: f64,
    tol: f64,
    budget: Option<f64>,
) -> CriterionResult {
    let run = match run {
        Ok(r) => r,
        Err(e) => return failure(name, e),
    };
    let eoc = match fit_eoc(&run.table.records, norm, 4) {
        Ok(v) => v,
        Err(e) => return failure(name, &e),
    };
    let mut passed = (eoc - expected).abs() <= tol;
    let mut detail = format!(
        "{} {}: eoc {:.3} vs {:.3} +/- {:.2} over last 4 of {} levels (final N = {})",
        run.table.geometry_label,
        norm,
        eoc,
        expected,
        tol,
        run.table.records.len(),
        run.table.records.last().map(|r| r.n).unwrap_or(0),
    );
    if let Some(limit) = budget {
        detail.push_str(&format!("; runtime {:.1}s (limit {:.0}s)", run.seconds, limit));
        passed &= run.seconds <= limit;
    }
    result(name, passed, detail)
}

pub fn run_all() -> Vec<CriterionResult> {
    let lshape_13 = big_run(CanonicalGeometry::LShape, 1.0 / 3.0, 8);
    let lshape_18 = big_run(CanonicalGeometry::LShape, 1.0 / 8.0, 8);
    let zshape_13 = big_run(CanonicalGeometry::ZShape, 1.0 / 3.0, 7);
    let zshape_18 = big_run(CanonicalGeometry::ZShape, 1.0 / 8.0, 7);

    let mut out = Vec::new();
    out.push(rate_check(
        "lshape-symm-a13-local-l2",
        &lshape_13,
        "l2_local",
        1.0,
        0.10,
        Some(300.0),
    ));
    out.push(rate_check(
        "lshape-symm-a18-local-l2",
        &lshape_18,
        "l2_local",
        19.0 / 24.0,
        0.10,
        None,
    ));
    out.push(rate_check(
        "zshape-symm-a13-local-l2",
        &zshape_13,
        "l2_local",
        19.0 / 21.0,
        0.08,
        None,
    ));
    out.push(rate_check(
        "zshape-symm-a18-local-l2",
        &zshape_18,
        "l2_local",
        39.0 / 56.0,
        0.08,
        None,
    ));
    out.push(energy_rates(&[
        (&lshape_13, 1.0 / 3.0),
        (&lshape_18, 1.0 / 8.0),
        (&zshape_13, 1.0 / 3.0),
        (&zshape_18, 1.0 / 8.0),
    ]));
    out.push(hm12_vs_l2(&lshape_13));
    out.push(exactness_suite());
    out.push(oracle_suite());
    out.push(norm_stability_gate());
    out
}

/// Global energy-norm EOC = alpha +/- 0.08 on all four big runs.
fn energy_rates(runs: &[(&Result<BigRun>, f64)]) -> CriterionResult {
    const NAME: &str = "global-energy-rates";
    let mut passed = true;
    let mut parts = Vec::new();
    for (run, alpha) in runs {
        let run = match run {
            Ok(r) => r,
            Err(e) => return failure(NAME, e),
        };
        let eoc = match fit_eoc(&run.table.records, "energy", 4) {
            Ok(v) => v,
            Err(e) => return failure(NAME, &e),
        };
        let ok = (eoc - alpha).abs() <= 0.08;
        passed &= ok;
        parts.push(format!(
            "{} a={:.3}: {:.3}{}",
            run.table.geometry_label,
            alpha,
            eoc,
            if ok { "" } else { " (off)" }
        ));
    }
    result(NAME, passed, parts.join("; "))
}

/// Local H^{-1/2} error below the local L2 error at every level, EOC within
/// 0.12 of the local L2 EOC.
fn hm12_vs_l2(run: &Result<BigRun>) -> CriterionResult {
    const NAME: &str = "hm12-below-l2-same-rate";
    let run = match run {
        Ok(r) => r,
        Err(e) => return failure(NAME, e),
    };
    let mut ordered = true;
    for rec in &run.table.records {
        ordered &= rec.norms["hm12_local"] <= rec.norms["l2_local"];
    }
    let eoc_l2 = match fit_eoc(&run.table.records, "l2_local", 4) {
        Ok(v) => v,
        Err(e) => return failure(NAME, &e),
    };
    let eoc_hm12 = match fit_eoc(&run.table.records, "hm12_local", 4) {
        Ok(v) => v,
        Err(e) => return failure(NAME, &e),
    };
    let close = (eoc_hm12 - eoc_l2).abs() <= 0.12;
    result(
        NAME,
        ordered && close,
        format!(
            "ordered at all {} levels: {}; eoc {:.3} vs l2 {:.3}",
            run.table.records.len(),
            ordered,
            eoc_hm12,
            eoc_l2
        ),
    )
}

/// alpha = 1 on the square: Symm reproduces the per-element normal component
/// n_x, the hypersingular solve the mean-zero nodal trace, to 1e-7 at every
/// level.
fn exactness_suite() -> CriterionResult {
    const NAME: &str = "square-exactness";
    const TOL: f64 = 1e-7;
    let p = canonical_geometry(CanonicalGeometry::Square);
    let sol = match SingularSolution::centered(1.0) {
        Ok(s) => s,
        Err(e) => return failure(NAME, &e),
    };
    let mut mesh = match BoundaryMesh::initial_per_edge(&p, 4) {
        Ok(m) => m,
        Err(e) => return failure(NAME, &e),
    };
    let mut worst_symm = 0.0_f64;
    let mut worst_hyp = 0.0_f64;
    const LEVELS: usize = 5;
    for level in 0..LEVELS {
        let phi = match galerkin_solve_symm(&mesh, &sol) {
            Ok(v) => v,
            Err(e) => return failure(NAME, &e),
        };
        for (i, e) in mesh.elements().enumerate() {
            worst_symm = worst_symm.max((phi[i] - e.normal.x).abs());
        }
        let g = match galerkin_solve_hypsing(&mesh, |_, n| n.x, None) {
            Ok(v) => v,
            Err(e) => return failure(NAME, &e),
        };
        let a = hat_masses(&mesh);
        let vals: Vec<f64> = mesh.nodes().iter().map(|q| q.x).collect();
        let mean: f64 =
            a.iter().zip(&vals).map(|(ai, vi)| ai * vi).sum::<f64>() / mesh.total_length();
        for i in 0..g.len() {
            worst_hyp = worst_hyp.max((g[i] - (vals[i] - mean)).abs());
        }
        if level + 1 < LEVELS {
            mesh = mesh.refine_uniform();
        }
    }
    result(
        NAME,
        worst_symm <= TOL && worst_hyp <= TOL,
        format!(
            "{LEVELS} levels (final N = {}): max |phi_h - n_x| = {:.2e}, max hypersingular nodal error = {:.2e} (tol {TOL:.0e})",
            mesh.num_elements(),
            worst_symm,
            worst_hyp
        ),
    )
}

/// Independent double adaptive quadrature of a single-layer Galerkin entry.
/// Splits the inner integral at the projection of x and integrates the outer
/// variable adaptively as well; shares no code with the assembly path beyond
/// the closed-form inner moment it is checking against.
fn v_entry_oracle(a1: Point, b1: Point, a2: Point, b2: Point) -> Result<f64> {
    let len1 = a1.dist(b1);
    let len2 = a2.dist(b2);
    let tau1 = (b1 - a1) * (1.0 / len1);
    let tau2 = (b2 - a2) * (1.0 / len2);
    let inv_2pi = 1.0 / (2.0 * std::f64::consts::PI);
    let inner = |x: Point| -> Result<f64> {
        let split = (x - a2).dot(tau2).clamp(0.0, len2);
        let f = |s: f64| {
            let r = x.dist(a2 + tau2 * s);
            if r == 0.0 {
                0.0
            } else {
                r.ln()
            }
        };
        let mut v = 0.0;
        if split > 0.0 {
            v += adaptive_quad(f, 0.0, split, 1e-12)?;
        }
        if split < len2 {
            v += adaptive_quad(f, split, len2, 1e-12)?;
        }
        Ok(v)
    };
    // The outer integrand is continuous (log-Lipschitz at touching points);
    // integrate it adaptively too, splitting at the point closest to the
    // other panel.
    let (_, t_split) = crate::kernels::segment_distance(a1, b1, a2, b2);
    let g = |t: f64| inner(a1 + tau1 * t).expect("inner oracle quadrature");
    let mut v = 0.0;
    if t_split > 1e-14 {
        v += adaptive_quad(g, 0.0, t_split.min(len1), 1e-11)?;
    }
    if t_split < len1 - 1e-14 {
        v += adaptive_quad(g, t_split.max(0.0), len1, 1e-11)?;
    }
    Ok(-inv_2pi * v)
}

fn oracle_suite() -> CriterionResult {
    const NAME: &str = "oracle-suite";
    let mut passed = true;
    let mut parts = Vec::new();

    // (a) V entries vs independent double quadrature on small meshes.
    let mut worst_v = 0.0_f64;
    for (geom, per_edge) in [
        (CanonicalGeometry::Square, 4),
        (CanonicalGeometry::LShape, 2),
    ] {
        let p = canonical_geometry(geom);
        let mesh = match BoundaryMesh::initial_per_edge(&p, per_edge) {
            Ok(m) => m,
            Err(e) => return failure(NAME, &e),
        };
        let v = match assemble_v(&mesh) {
            Ok(m) => m,
            Err(e) => return failure(NAME, &e),
        };
        let els: Vec<_> = mesh.elements().collect();
        for i in 0..els.len() {
            for j in i..els.len() {
                let oracle =
                    match v_entry_oracle(els[i].a, els[i].b, els[j].a, els[j].b) {
                        Ok(x) => x,
                        Err(e) => return failure(NAME, &e),
                    };
                worst_v = worst_v.max((v.get(i, j) - oracle).abs());
            }
        }
    }
    let ok = worst_v <= 1e-9;
    passed &= ok;
    parts.push(format!("V vs double quadrature: max dev {worst_v:.2e} (tol 1e-9)"));

    // (b) Jump relation: the Dirichlet load of g = 1 vanishes.
    let mut worst_jump = 0.0_f64;
    for geom in [CanonicalGeometry::LShape, CanonicalGeometry::ZShape] {
        let p = canonical_geometry(geom);
        let mesh = match BoundaryMesh::initial_per_edge(&p, 6) {
            Ok(m) => m,
            Err(e) => return failure(NAME, &e),
        };
        let rhs = assemble_rhs_symm(&mesh, |_| 1.0, None);
        for j in 0..rhs.len() {
            worst_jump = worst_jump.max(rhs[j].abs());
        }
    }
    let ok = worst_jump <= 1e-8;
    passed &= ok;
    parts.push(format!("constant-data load: max |b_j| {worst_jump:.2e} (tol 1e-8)"));

    // (c) W row sums vanish (constants in the kernel) and W + a a^T is SPD.
    let mut worst_row = 0.0_f64;
    let mut spd_ok = true;
    for (geom, per_edge) in [
        (CanonicalGeometry::LShape, 6),
        (CanonicalGeometry::ZShape, 6),
        (CanonicalGeometry::Square, 4),
    ] {
        let p = canonical_geometry(geom);
        let mesh = match BoundaryMesh::initial_per_edge(&p, per_edge) {
            Ok(m) => m,
            Err(e) => return failure(NAME, &e),
        };
        let v = match assemble_v(&mesh) {
            Ok(m) => m,
            Err(e) => return failure(NAME, &e),
        };
        let w = w_from_v(&mesh, &v);
        for i in 0..w.dim() {
            let s: f64 = w.row(i).iter().sum();
            worst_row = worst_row.max(s.abs());
        }
        let sys = w.add(&assemble_stabilization(&mesh));
        spd_ok &= cholesky(&sys).is_ok();
    }
    let ok = worst_row <= 1e-12;
    passed &= ok && spd_ok;
    parts.push(format!(
        "W row sums: max {worst_row:.2e} (tol 1e-12); stabilized SPD: {spd_ok}"
    ));

    // (d) Galerkin orthogonality: the algebraic residual of the solved Symm
    // system, entrywise, relative to the load scale.
    let ortho = {
        let p = canonical_geometry(CanonicalGeometry::LShape);
        let mesh = match BoundaryMesh::initial_per_edge(&p, 6) {
            Ok(m) => m.refine_uniform().refine_uniform(),
            Err(e) => return failure(NAME, &e),
        };
        let sol = match SingularSolution::centered(1.0 / 3.0) {
            Ok(s) => s,
            Err(e) => return failure(NAME, &e),
        };
        let (v, rhs) = match crate::solver::symm_system(&mesh, &sol) {
            Ok(t) => t,
            Err(e) => return failure(NAME, &e),
        };
        let phi = match solve_spd(&v, &rhs) {
            Ok(x) => x,
            Err(e) => return failure(NAME, &e),
        };
        let ax = v.matvec(phi.as_slice());
        let scale = rhs
            .as_slice()
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
            .max(1e-300);
        ax.iter()
            .zip(rhs.as_slice())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            / scale
    };
    let ok = ortho <= 1e-8;
    passed &= ok;
    parts.push(format!("Galerkin residual: {ortho:.2e} (tol 1e-8)"));

    // (e) Hypersingular solve: local H^1 seminorm error decreases
    // monotonically over 4 levels on the L-shape flux problem.
    let monotone = {
        let p = canonical_geometry(CanonicalGeometry::LShape);
        let sol = match SingularSolution::centered(1.0 / 3.0) {
            Ok(s) => s,
            Err(e) => return failure(NAME, &e),
        };
        let mut mesh = match BoundaryMesh::initial_per_edge(&p, 6) {
            Ok(m) => m,
            Err(e) => return failure(NAME, &e),
        };
        let diam = p.diameter();
        let region = match BoundaryRegion::select(&mesh, |mid| {
            mid.dist(sol.center) >= 0.3 * diam
        }) {
            Ok(r) => r,
            Err(e) => return failure(NAME, &e),
        };
        let mut errs = Vec::new();
        for level in 0..4 {
            let g = match galerkin_solve_hypsing(
                &mesh,
                |x, n| sol.flux(x, n).expect("flux at quadrature node"),
                Some(sol.center),
            ) {
                Ok(v) => v,
                Err(e) => return failure(NAME, &e),
            };
            let err = match h1_seminorm_error_local(
                &mesh,
                &g,
                |x, tau| sol.tangential(x, tau).expect("trace at quadrature node"),
                &region,
            ) {
                Ok(v) => v,
                Err(e) => return failure(NAME, &e),
            };
            errs.push(err);
            if level < 3 {
                mesh = mesh.refine_uniform();
            }
        }
        let mono = errs.windows(2).all(|w| w[1] < w[0]);
        parts.push(format!(
            "hypersingular local H1 over 4 levels: [{}] monotone: {mono}",
            errs.iter()
                .map(|e| format!("{e:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
        mono
    };
    passed &= monotone;

    result(NAME, passed, parts.join("; "))
}

/// Doubling the projection refine factor of the H^{-1/2} norm changes the
/// reported value by < 2% at N >= 256.
fn norm_stability_gate() -> CriterionResult {
    const NAME: &str = "hm12-refine-stability";
    let p = canonical_geometry(CanonicalGeometry::LShape);
    let sol = match SingularSolution::centered(1.0 / 3.0) {
        Ok(s) => s,
        Err(e) => return failure(NAME, &e),
    };
    let mesh0 = match BoundaryMesh::initial_per_edge(&p, 6) {
        Ok(m) => m,
        Err(e) => return failure(NAME, &e),
    };
    let diam = p.diameter();
    let region = match BoundaryRegion::select(&mesh0, |mid| mid.dist(sol.center) >= 0.3 * diam) {
        Ok(r) => r,
        Err(e) => return failure(NAME, &e),
    };
    let mesh = mesh0.refine_uniform().refine_uniform().refine_uniform(); // N = 288
    let phi = match galerkin_solve_symm(&mesh, &sol) {
        Ok(v) => v,
        Err(e) => return failure(NAME, &e),
    };
    let e = |i: usize, x: Point, n: Point| sol.flux(x, n).expect("flux") - phi[i];
    let coarse = match neg_half_norm_local(&mesh, e, &region, 4) {
        Ok(v) => v,
        Err(err) => return failure(NAME, &err),
    };
    let fine = match neg_half_norm_local(&mesh, e, &region, 8) {
        Ok(v) => v,
        Err(err) => return failure(NAME, &err),
    };
    let rel = (fine - coarse).abs() / fine.max(1e-300);
    result(
        NAME,
        rel < 0.02,
        format!(
            "N = {}: refine 4 -> {:.6e}, refine 8 -> {:.6e}, change {:.3}% (limit 2%)",
            mesh.num_elements(),
            coarse,
            fine,
            100.0 * rel
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_entry_oracle_matches_closed_forms() {
        // Disjoint pair: compare against the assembly-path entry.
        let a1 = Point::new(0.0, 0.0);
        let b1 = Point::new(0.2, 0.0);
        let a2 = Point::new(0.1, 0.3);
        let b2 = Point::new(0.35, 0.4);
        let o = v_entry_oracle(a1, b1, a2, b2).unwrap();
        let e = crate::operators::v_panel_entry(a1, b1, a2, b2);
        assert!((o - e).abs() < 1e-10, "oracle {o} vs entry {e}");
        // Self entry against the closed form h^2 (ln h - 3/2) scaling.
        let o = v_entry_oracle(a1, b1, a1, b1).unwrap();
        let e = crate::kernels::slp_self_entry(0.2);
        assert!((o - e).abs() < 1e-10, "oracle {o} vs self {e}");
    }

    #[test]
    fn stability_gate_runs() {
        let r = norm_stability_gate();
        assert!(r.passed, "{}", r.detail);
    }
}
