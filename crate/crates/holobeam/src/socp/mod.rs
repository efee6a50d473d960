//! Dense second-order cone programming.
//!
//! Problems are stated over real variables as
//!
//! ```text
//! minimize    c' x
//! subject to  a' x  = r            (linear equalities)
//!             a' x <= r            (linear inequalities)
//!             lo <= x_i <= hi      (box bounds)
//!             ||A x + b|| <= c' x + d   (second-order cones)
//! ```
//!
//! and solved by a primal-dual interior point method on the homogeneous
//! self-dual embedding with Nesterov-Todd scaling (see [`ipm`]). Quadratic
//! objectives are expressed through an epigraph variable and a cone, which is
//! how the rest of the crate uses this module.
//!
//! Complex-valued models reach the solver through the stacking helpers at the
//! bottom of this module: a complex vector maps to its stacked real/imaginary
//! parts, and `Re(a^H b)` maps to the plain dot product of stacked forms.

mod ipm;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use ipm::{DEFAULT_MAX_ITERS, DEFAULT_TOL};

/// One constraint of a [`SocpProblem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Constraint {
    /// `coeffs' x = rhs`
    Equality { coeffs: Array1<f64>, rhs: f64 },
    /// `coeffs' x <= rhs`
    Inequality { coeffs: Array1<f64>, rhs: f64 },
    /// `lower <= x[var] <= upper`
    Box { var: usize, lower: f64, upper: f64 },
    /// `||a x + b|| <= c' x + d`
    SecondOrderCone { a: Array2<f64>, b: Array1<f64>, c: Array1<f64>, d: f64 },
}

/// A dense second-order cone program over `num_vars` real variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocpProblem {
    num_vars: usize,
    objective: Array1<f64>,
    constraints: Vec<Constraint>,
}

/// Solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Primal feasibility, dual feasibility and relative gap all within
    /// tolerance.
    Optimal,
    /// A certificate of primal infeasibility was found.
    Infeasible,
    /// A certificate of dual infeasibility was found (objective unbounded
    /// below over the feasible set).
    Unbounded,
    /// Iteration cap reached before any of the above.
    MaxIters,
}

/// Solution report. `x` is meaningful for `Optimal` (and best-effort for
/// `MaxIters`); `max_constraint_violation` is always measured against the
/// original constraints.
#[derive(Debug, Clone)]
pub struct SocpSolution {
    pub status: SolveStatus,
    pub x: Array1<f64>,
    pub objective_value: f64,
    pub max_constraint_violation: f64,
    pub iterations: usize,
}

impl SocpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, objective: Array1::zeros(num_vars), constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Array1<f64> {
        &self.objective
    }

    /// Sets the linear objective to minimize.
    pub fn minimize(&mut self, c: Array1<f64>) -> &mut Self {
        assert_eq!(c.len(), self.num_vars);
        self.objective = c;
        self
    }

    pub fn add_equality(&mut self, coeffs: Array1<f64>, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars);
        self.constraints.push(Constraint::Equality { coeffs, rhs });
        self
    }

    pub fn add_inequality(&mut self, coeffs: Array1<f64>, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars);
        self.constraints.push(Constraint::Inequality { coeffs, rhs });
        self
    }

    pub fn add_box(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        assert!(var < self.num_vars);
        assert!(lower <= upper);
        self.constraints.push(Constraint::Box { var, lower, upper });
        self
    }

    /// Adds `||a x + b|| <= c' x + d`.
    pub fn add_soc(&mut self, a: Array2<f64>, b: Array1<f64>, c: Array1<f64>, d: f64) -> &mut Self {
        assert_eq!(a.ncols(), self.num_vars);
        assert_eq!(a.nrows(), b.len());
        assert_eq!(c.len(), self.num_vars);
        self.constraints.push(Constraint::SecondOrderCone { a, b, c, d });
        self
    }

    /// Largest violation of the original constraints at `x`.
    pub fn constraint_violation(&self, x: &Array1<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for con in &self.constraints {
            let v = match con {
                Constraint::Equality { coeffs, rhs } => (coeffs.dot(x) - rhs).abs(),
                Constraint::Inequality { coeffs, rhs } => (coeffs.dot(x) - rhs).max(0.0),
                Constraint::Box { var, lower, upper } => {
                    (lower - x[*var]).max(x[*var] - upper).max(0.0)
                }
                Constraint::SecondOrderCone { a, b, c, d } => {
                    let mut norm_sq = 0.0;
                    for i in 0..a.nrows() {
                        let mut acc = b[i];
                        for j in 0..a.ncols() {
                            acc += a[(i, j)] * x[j];
                        }
                        norm_sq += acc * acc;
                    }
                    (norm_sq.sqrt() - (c.dot(x) + d)).max(0.0)
                }
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Serializes the problem to a plain JSON matrix format, used for
    /// regression fixtures.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("SocpProblem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Solves the program. `status == Optimal` guarantees primal feasibility
/// residual and relative duality gap within `tol`; iteration exhaustion is
/// reported through the status, never as a silent wrong answer.
pub fn solve_socp(problem: &SocpProblem, tol: f64, max_iters: usize) -> SocpSolution {
    assert!(tol > 0.0, "tolerance must be positive");
    let data = ipm::ConicData::from_problem(problem);
    let raw = ipm::solve(&data, tol, max_iters);
    let x = Array1::from_vec(raw.x);
    let objective_value = problem.objective.dot(&x);
    let max_constraint_violation = problem.constraint_violation(&x);
    SocpSolution {
        status: raw.status,
        x,
        objective_value,
        max_constraint_violation,
        iterations: raw.iterations,
    }
}

// ---------------------------------------------------------------------------
// Complex <-> real stacking
// ---------------------------------------------------------------------------

/// `[Re(v); Im(v)]`
pub fn stack_complex_vector(v: &Array1<Complex64>) -> Array1<f64> {
    let k = v.len();
    let mut out = Array1::zeros(2 * k);
    for i in 0..k {
        out[i] = v[i].re;
        out[k + i] = v[i].im;
    }
    out
}

/// Inverse of [`stack_complex_vector`].
pub fn unstack_complex_vector(x: &Array1<f64>) -> Array1<Complex64> {
    let k = x.len() / 2;
    assert_eq!(x.len(), 2 * k, "stacked vector must have even length");
    Array1::from_shape_fn(k, |i| Complex64::new(x[i], x[k + i]))
}

/// Real 2x2-block form `[[Re, -Im], [Im, Re]]` so that
/// `stack(M v) = realify(M) . stack(v)`.
pub fn realify_matrix(m: &Array2<Complex64>) -> Array2<f64> {
    let (rows, cols) = m.dim();
    let mut out = Array2::zeros((2 * rows, 2 * cols));
    for i in 0..rows {
        for j in 0..cols {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, cols + j)] = -z.im;
            out[(rows + i, j)] = z.im;
            out[(rows + i, cols + j)] = z.re;
        }
    }
    out
}
