//! Laplace fundamental solution and closed-form panel integrals.
//!
//! The single-layer assembly uses the analytic antiderivative of the log
//! kernel along a panel, which removes the singularity exactly; the
//! double-layer moments reduce to subtended angles and are evaluated with a
//! numerically robust atan2 form.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Point;

const INV_2PI: f64 = 1.0 / (2.0 * PI);

/// Fundamental solution G(x,y) = -(1/2pi) ln|x-y|.
pub fn green_log(x: Point, y: Point) -> Result<f64> {
    let r = x.dist(y);
    if r == 0.0 {
        return Err(Error::SingularPoint(format!("green_log at x = y = {x}")));
    }
    Ok(-INV_2PI * r.ln())
}

/// Double-layer kernel dG/dn_y (x,y) = (1/2pi) (x-y).n_y / |x-y|^2.
pub fn dlp_kernel(y: Point, normal_y: Point, x: Point) -> Result<f64> {
    let d = x - y;
    let r2 = d.dot(d);
    if r2 == 0.0 {
        return Err(Error::SingularPoint(format!("dlp_kernel at x = y = {x}")));
    }
    Ok(INV_2PI * d.dot(normal_y) / r2)
}

/// Exact value of the inner integral `int_panel ln|x-y| ds_y`, valid also
/// for x on the panel (the improper integral converges).
pub fn panel_log_moment(a: Point, b: Point, x: Point) -> f64 {
    let len = a.dist(b);
    debug_assert!(len > 0.0, "degenerate panel");
    let tau = (b - a) * (1.0 / len);
    let q = x - a;
    let u = q.dot(tau);
    let d = (q - tau * u).norm();
    log_antiderivative(len - u, d) - log_antiderivative(-u, d)
}

/// Antiderivative of s -> ln sqrt(s^2 + d^2), continuous through s = 0.
fn log_antiderivative(s: f64, d: f64) -> f64 {
    if d == 0.0 {
        if s == 0.0 {
            0.0
        } else {
            s * s.abs().ln() - s
        }
    } else {
        0.5 * (s * (s * s + d * d).ln() - 2.0 * s) + d * (s / d).atan()
    }
}

/// Robust atan(s2/d) - atan(s1/d) for s2 >= s1, any sign of d.
fn atan_span(s1: f64, s2: f64, d: f64) -> f64 {
    if d == 0.0 {
        // The kernel vanishes identically on the panel's own line, so the
        // principal value is 0 (not the one-sided limit pi).
        return 0.0;
    }
    (d * (s2 - s1)).atan2(d * d + s1 * s2)
}

/// `int_panel dG/dn_y (x,y) ds_y` for the panel's own (constant) normal:
/// the signed subtended angle divided by 2pi.
pub fn dlp_panel_moment(a: Point, b: Point, normal: Point, x: Point) -> f64 {
    let len = a.dist(b);
    debug_assert!(len > 0.0, "degenerate panel");
    let tau = (b - a) * (1.0 / len);
    let q = x - a;
    let u = q.dot(tau);
    let d = snap_offset(q.dot(normal), len, u);
    INV_2PI * atan_span(-u, len - u, d)
}

/// Collapses offsets that are pure rounding noise (points on the panel's
/// own line after inexact arithmetic) to exactly zero, so the principal
/// value is taken instead of a spurious one-sided jump.
fn snap_offset(d: f64, len: f64, u: f64) -> f64 {
    if d.abs() <= 1e-12 * (len + u.abs()) {
        0.0
    } else {
        d
    }
}

/// Moments of the double-layer kernel against the linear shape functions on
/// the panel: returns `(I0, I1)` with
/// `I0 = int k ds_y` and `I1 = int k (t/L) ds_y`,
/// so that `int k g = g(a) (I0 - I1) + g(b) I1` for linear g.
pub fn dlp_panel_linear(a: Point, b: Point, normal: Point, x: Point) -> (f64, f64) {
    let len = a.dist(b);
    debug_assert!(len > 0.0, "degenerate panel");
    let tau = (b - a) * (1.0 / len);
    let q = x - a;
    let u = q.dot(tau);
    let d = snap_offset(q.dot(normal), len, u);
    let span = atan_span(-u, len - u, d);
    let i0 = INV_2PI * span;
    if d == 0.0 {
        return (i0, 0.0);
    }
    let s1 = -u;
    let s2 = len - u;
    let log_ratio = ((s2 * s2 + d * d) / (s1 * s1 + d * d)).ln();
    let i1 = INV_2PI / len * (u * span + 0.5 * d * log_ratio);
    (i0, i1)
}

/// `int_panel dG/dn_y (x,y) ds_x` over x on the panel `(a, b)`, for a fixed
/// source point `y` with normal `n_y`. Used to assemble the Dirichlet
/// right-hand side by swapping the order of integration.
pub fn dlp_adjoint_panel_moment(a: Point, b: Point, y: Point, normal_y: Point) -> f64 {
    let len = a.dist(b);
    debug_assert!(len > 0.0, "degenerate panel");
    let tau = (b - a) * (1.0 / len);
    let nu = Point::new(-tau.y, tau.x);
    let p = a - y;
    let s1 = p.dot(tau);
    let s2 = s1 + len;
    let d = snap_offset(p.dot(nu), len, s1);
    let span = atan_span(s1, s2, d);
    let b_coef = tau.dot(normal_y);
    let mut value = nu.dot(normal_y) * span;
    if d != 0.0 || (s1 != 0.0 && s2 != 0.0) {
        if b_coef != 0.0 {
            value += 0.5 * b_coef * ((s2 * s2 + d * d) / (s1 * s1 + d * d)).ln();
        }
    }
    INV_2PI * value
}

/// Exact double integral `int_T int_T ln|x-y| ds_y ds_x = h^2 (ln h - 3/2)`
/// scaled by the kernel constant: the self entry of the single-layer matrix.
pub fn slp_self_entry(len: f64) -> f64 {
    -INV_2PI * len * len * (len.ln() - 1.5)
}

/// Distance between two segments and the parameter (arc length from `a1`)
/// on the first segment realizing it.
pub fn segment_distance(a1: Point, b1: Point, a2: Point, b2: Point) -> (f64, f64) {
    let orient = |p: Point, q: Point, r: Point| (q - p).cross(r - p);
    let o1 = orient(a1, b1, a2);
    let o2 = orient(a1, b1, b2);
    let o3 = orient(a2, b2, a1);
    let o4 = orient(a2, b2, b1);
    if ((o1 > 0.0) != (o2 > 0.0)) && ((o3 > 0.0) != (o4 > 0.0)) {
        // Proper crossing; the intersection parameter on segment 1.
        let denom = (b1 - a1).cross(b2 - a2);
        let t = (a2 - a1).cross(b2 - a2) / denom;
        return (0.0, t.clamp(0.0, 1.0) * a1.dist(b1));
    }
    let len1 = a1.dist(b1);
    let proj = |p: Point| -> (f64, f64) {
        // Distance from p to segment 1 and the foot parameter.
        let tau = (b1 - a1) * (1.0 / len1);
        let t = (p - a1).dot(tau).clamp(0.0, len1);
        let foot = a1 + tau * t;
        (p.dist(foot), t)
    };
    let point_seg = |p: Point, a: Point, b: Point| -> f64 {
        let len = a.dist(b);
        let tau = (b - a) * (1.0 / len);
        let t = (p - a).dot(tau).clamp(0.0, len);
        p.dist(a + tau * t)
    };
    let mut best = (f64::INFINITY, 0.0);
    for (d, t) in [proj(a2), proj(b2)] {
        if d < best.0 {
            best = (d, t);
        }
    }
    for (p, t) in [(a1, 0.0), (b1, len1)] {
        let d = point_seg(p, a2, b2);
        if d < best.0 {
            best = (d, t);
        }
    }
    best
}
