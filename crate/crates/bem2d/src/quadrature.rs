//! Gauss-Legendre rules and an adaptive-quadrature oracle.
//!
//! The adaptive routine exists for validation only; the assembly paths never
//! call it.

use crate::error::{Error, Result};

/// Gauss-Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Nodes via Newton iteration on the Legendre polynomial P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(c + half * x);
        }
        sum * half
    }

    /// Composite integration over `[a, b]` with dyadic subintervals graded
    /// towards `a` (or `b`), for integrands with an endpoint singularity.
    pub fn integrate_graded<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        towards_a: bool,
        depth: usize,
        mut f: F,
    ) -> f64 {
        let len = b - a;
        let mut sum = 0.0;
        // Intervals [len/2^{k+1}, len/2^k] measured from the graded endpoint,
        // plus the innermost piece [0, len/2^depth].
        for k in 0..=depth {
            let hi = len / (1u64 << k) as f64;
            let lo = if k == depth { 0.0 } else { hi * 0.5 };
            let (s, e) = if towards_a {
                (a + lo, a + hi)
            } else {
                (b - hi, b - lo)
            };
            sum += self.integrate(s, e, &mut f);
        }
        sum
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const ORACLE_BUDGET: usize = 1 << 16;

/// Adaptive bisection with a 10/20 point Gauss pair as local error estimate.
///
/// Handles smooth and endpoint-log-singular integrands. Test oracle; fails
/// loudly when the subdivision budget is exhausted.
pub fn adaptive_quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let lo = GaussRule::new(10);
    let hi = GaussRule::new(20);
    let mut intervals = 0usize;
    let total_len = b - a;
    let mut worst = 0.0_f64;
    let value = adapt(&f, a, b, tol, total_len, &lo, &hi, 0, &mut intervals, &mut worst)?;
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    total_len: f64,
    lo: &GaussRule,
    hi: &GaussRule,
    depth: usize,
    intervals: &mut usize,
    worst: &mut f64,
) -> Result<f64> {
    *intervals += 1;
    if *intervals > ORACLE_BUDGET {
        return Err(Error::QuadratureBudget {
            estimate: *worst,
            tol,
        });
    }
    let coarse = lo.integrate(a, b, |x| f(x));
    let fine = hi.integrate(a, b, |x| f(x));
    let err = (fine - coarse).abs();
    *worst = worst.max(err);
    let local_tol = tol * ((b - a) / total_len).max(1e-3);
    if err <= local_tol || depth >= 60 {
        return Ok(fine);
    }
    let mid = 0.5 * (a + b);
    let left = adapt(f, a, mid, tol, total_len, lo, hi, depth + 1, intervals, worst)?;
    let right = adapt(f, mid, b, tol, total_len, lo, hi, depth + 1, intervals, worst)?;
    Ok(left + right)
}
