//! Small numerical kernels: Gauss–Legendre quadrature and a bracketed
//! scalar root solver.

use std::sync::LazyLock;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RootError {
    #[error("no sign change over [{a}, {b}]: f(a) = {fa:.3e}, f(b) = {fb:.3e}")]
    NoSignChange { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("root solve did not converge in {max_iter} iterations (best |f| = {best:.3e})")]
    MaxIterations { max_iter: usize, best: f64 },
}

/// Gauss–Legendre rule on [-1, 1].
///
/// Nodes are the roots of the Legendre polynomial `P_n`, found by Newton
/// iteration from the Chebyshev-like initial guesses; weights follow from
/// the derivative. Exact for polynomials of degree `2n - 1`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be at least 1");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // i-th root counted from +1 end
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() <= 1e-16 {
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
            // middle node of odd rules is exactly zero
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes mapped onto [a, b], paired with their scaled weights.
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.points(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (p_prev - x * p) / (1.0 - x * x);
    (p, d)
}

static RULE_32: LazyLock<GaussLegendre> = LazyLock::new(|| GaussLegendre::new(32));
static RULE_64: LazyLock<GaussLegendre> = LazyLock::new(|| GaussLegendre::new(64));

/// Shared rules for the common orders; other orders are built on demand.
pub fn cached_rule(n: usize) -> &'static GaussLegendre {
    match n {
        32 => &RULE_32,
        64 => &RULE_64,
        _ => panic!("no cached rule of order {n}; use GaussLegendre::new"),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BracketedRoot {
    pub root: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Find a root of `f` in `[a, b]` by a bisection-safeguarded secant method.
///
/// The secant runs through the two most recent iterates; a candidate
/// falling outside the current sign-changing bracket is replaced by its
/// midpoint, and every eighth iteration bisects outright so the bracket
/// cannot stall. Iteration continues until the step (or the bracket) is
/// below `x_tol` — the root is located in `x`, not merely to a small
/// residual — and the final residual must still be below `f_tol`.
pub fn solve_bracketed(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> Result<BracketedRoot, RootError> {
    let mut lo = a;
    let mut hi = b;
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(BracketedRoot {
            root: lo,
            residual: 0.0,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Ok(BracketedRoot {
            root: hi,
            residual: 0.0,
            iterations: 0,
        });
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(RootError::NoSignChange {
            a,
            b,
            fa: f_lo,
            fb: f_hi,
        });
    }

    // two most recent iterates driving the secant
    let (mut x_prev, mut f_prev) = (lo, f_lo);
    let (mut x_cur, mut f_cur) = (hi, f_hi);
    // point with the smallest |residual| seen, with its signed residual
    let mut best = (lo, f_lo);

    let finish = |root: f64, residual: f64, iterations: usize| {
        if residual.abs() <= f_tol {
            Ok(BracketedRoot {
                root,
                residual,
                iterations,
            })
        } else {
            Err(RootError::MaxIterations {
                max_iter: iterations,
                best: residual.abs(),
            })
        }
    };

    for iter in 1..=max_iter {
        let secant = x_cur - f_cur * (x_cur - x_prev) / (f_cur - f_prev);
        let x = if secant.is_finite() && secant > lo && secant < hi && iter % 8 != 0 {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let fx = f(x);
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx == 0.0 {
            return Ok(BracketedRoot {
                root: x,
                residual: 0.0,
                iterations: iter,
            });
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }

        let step = (x - x_cur).abs();
        (x_prev, f_prev) = (x_cur, f_cur);
        (x_cur, f_cur) = (x, fx);

        if step <= x_tol || hi - lo <= x_tol {
            let (root, residual) = best;
            return finish(root, residual, iter);
        }
    }
    Err(RootError::MaxIterations {
        max_iter,
        best: best.1.abs(),
    })
}
