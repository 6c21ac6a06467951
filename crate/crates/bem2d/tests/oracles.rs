//! Cross-validation of the assembly path against independent adaptive
//! quadrature, on meshes small enough to brute-force.

use bem2d::geometry::{canonical_geometry, BoundaryMesh, CanonicalGeometry, Point};
use bem2d::kernels::dlp_kernel;
use bem2d::operators::{assemble_rhs_hypsing, assemble_rhs_symm, assemble_v};
use bem2d::quadrature::adaptive_quad;
use bem2d::solutions::SingularSolution;

/// Double adaptive quadrature of one single-layer entry, inner integral
/// split at the projection of the outer point.
fn v_entry_by_quadrature(a1: Point, b1: Point, a2: Point, b2: Point) -> f64 {
    let len1 = a1.dist(b1);
    let len2 = a2.dist(b2);
    let tau1 = (b1 - a1) * (1.0 / len1);
    let tau2 = (b2 - a2) * (1.0 / len2);
    let inner = |x: Point| {
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
            v += adaptive_quad(f, 0.0, split, 1e-12).unwrap();
        }
        if split < len2 {
            v += adaptive_quad(f, split, len2, 1e-12).unwrap();
        }
        v
    };
    let v = adaptive_quad(|t| inner(a1 + tau1 * t), 0.0, len1, 1e-11).unwrap();
    -v / (2.0 * std::f64::consts::PI)
}

#[test]
fn single_layer_matrix_matches_double_quadrature() {
    for (geom, per_edge) in [
        (CanonicalGeometry::Square, 2),
        (CanonicalGeometry::LShape, 1),
        (CanonicalGeometry::ZShape, 1),
    ] {
        let p = canonical_geometry(geom);
        let mesh = BoundaryMesh::initial_per_edge(&p, per_edge).unwrap();
        let v = assemble_v(&mesh).unwrap();
        let els: Vec<_> = mesh.elements().collect();
        for i in 0..els.len() {
            for j in i..els.len() {
                let oracle = v_entry_by_quadrature(els[i].a, els[i].b, els[j].a, els[j].b);
                assert!(
                    (v.get(i, j) - oracle).abs() < 1e-9,
                    "{geom:?} entry ({i},{j}): {} vs oracle {}",
                    v.get(i, j),
                    oracle
                );
            }
        }
    }
}

#[test]
fn symm_load_matches_double_quadrature() {
    // b_j = (1/2) int_{T_j} g + int_{T_j} int_Gamma dG/dn_y (x,y) g(y) ds_y ds_x
    // computed here with x-then-y adaptive quadrature (the assembly swaps the
    // order and uses closed forms). Smooth data keeps the oracle honest.
    let p = canonical_geometry(CanonicalGeometry::LShape);
    let mesh = BoundaryMesh::initial_per_edge(&p, 1).unwrap();
    let g = |x: Point| x.x + 0.5 * x.y * x.y - 0.1;
    let rhs = assemble_rhs_symm(&mesh, g, None);
    let els: Vec<_> = mesh.elements().collect();
    for (j, tj) in els.iter().enumerate() {
        let tauj = (tj.b - tj.a) * (1.0 / tj.length);
        let mut oracle = 0.5
            * adaptive_quad(|t| g(tj.a + tauj * t), 0.0, tj.length, 1e-12).unwrap();
        for tk in &els {
            if tk.edge == tj.edge {
                continue; // collinear: kernel vanishes
            }
            let tauk = (tk.b - tk.a) * (1.0 / tk.length);
            oracle += adaptive_quad(
                |t| {
                    let x = tj.a + tauj * t;
                    adaptive_quad(
                        |s| {
                            let y = tk.a + tauk * s;
                            if x.dist(y) == 0.0 {
                                0.0
                            } else {
                                dlp_kernel(y, tk.normal, x).unwrap() * g(y)
                            }
                        },
                        0.0,
                        tk.length,
                        1e-11,
                    )
                    .unwrap()
                },
                0.0,
                tj.length,
                1e-10,
            )
            .unwrap();
        }
        assert!(
            (rhs[j] - oracle).abs() < 1e-8,
            "entry {j}: {} vs oracle {}",
            rhs[j],
            oracle
        );
    }
}

#[test]
fn hypsing_load_matches_double_quadrature() {
    // b_j = int_Gamma flux(x) [ (1/2) hat_j(x) - (K hat_j)(x) ] ds_x with
    // K hat_j evaluated by adaptive quadrature over the hat's support.
    let p = canonical_geometry(CanonicalGeometry::Square);
    let mesh = BoundaryMesh::initial_per_edge(&p, 2).unwrap();
    let flux = |_: Point, n: Point| n.x - 0.3 * n.y;
    let rhs = assemble_rhs_hypsing(&mesh, flux, None);
    let els: Vec<_> = mesh.elements().collect();
    let n = els.len();
    for j in 0..n {
        let rise = &els[(j + n - 1) % n];
        let fall = &els[j];
        let khat = |x: Point| {
            let taur = (rise.b - rise.a) * (1.0 / rise.length);
            let tauf = (fall.b - fall.a) * (1.0 / fall.length);
            let kr = adaptive_quad(
                |s| {
                    let y = rise.a + taur * s;
                    if x.dist(y) < 1e-14 || (x - y).dot(rise.normal).abs() == 0.0 {
                        0.0
                    } else {
                        dlp_kernel(y, rise.normal, x).unwrap() * (s / rise.length)
                    }
                },
                0.0,
                rise.length,
                1e-11,
            )
            .unwrap();
            let kf = adaptive_quad(
                |s| {
                    let y = fall.a + tauf * s;
                    if x.dist(y) < 1e-14 || (x - y).dot(fall.normal).abs() == 0.0 {
                        0.0
                    } else {
                        dlp_kernel(y, fall.normal, x).unwrap() * (1.0 - s / fall.length)
                    }
                },
                0.0,
                fall.length,
                1e-11,
            )
            .unwrap();
            kr + kf
        };
        let mut oracle = 0.0;
        for (m, tm) in els.iter().enumerate() {
            let tau = (tm.b - tm.a) * (1.0 / tm.length);
            let hat = |x: Point| {
                if m == (j + n - 1) % n {
                    x.dist(tm.a) / tm.length
                } else if m == j {
                    1.0 - x.dist(tm.a) / tm.length
                } else {
                    0.0
                }
            };
            oracle += adaptive_quad(
                |t| {
                    let x = tm.a + tau * t;
                    flux(x, tm.normal) * (0.5 * hat(x) - khat(x))
                },
                0.0,
                tm.length,
                1e-9,
            )
            .unwrap();
        }
        assert!(
            (rhs[j] - oracle).abs() < 1e-7,
            "entry {j}: {} vs oracle {}",
            rhs[j],
            oracle
        );
    }
}

#[test]
fn symm_solution_matches_interior_representation() {
    // Solve Symm on the square for a smooth solution (alpha = 2) and verify
    // the representation formula u(z) = int G phi - int dG/dn u at interior
    // points against the exact solution.
    let p = canonical_geometry(CanonicalGeometry::Square);
    let mesh = BoundaryMesh::initial_per_edge(&p, 8).unwrap();
    let sol = SingularSolution::centered(2.0).unwrap();
    let phi = bem2d::solver::galerkin_solve_symm(&mesh, &sol).unwrap();
    let els: Vec<_> = mesh.elements().collect();
    // Interior points of the axis-aligned square [0, 0.35]^2.
    for z in [Point::new(0.15, 0.1), Point::new(0.2, 0.25)] {
        let mut u = 0.0;
        for (i, e) in els.iter().enumerate() {
            let tau = (e.b - e.a) * (1.0 / e.length);
            u += adaptive_quad(
                |t| {
                    let y = e.a + tau * t;
                    bem2d::kernels::green_log(z, y).unwrap() * phi[i]
                        - dlp_kernel(y, e.normal, z).unwrap() * sol.trace(y)
                },
                0.0,
                e.length,
                1e-11,
            )
            .unwrap();
        }
        let exact = sol.trace(z);
        assert!(
            (u - exact).abs() < 5e-4,
            "representation at {z}: {u} vs exact {exact}"
        );
    }
}
