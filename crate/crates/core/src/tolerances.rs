//! Numerical tolerances shared by the library and its tests.

/// Maximum deviation of any row sum from one for a transition matrix.
pub const ROW_SUM: f64 = 1e-10;

/// `‖πP − π‖∞` accepted from the stationary solve.
pub const STATIONARY_RESIDUAL: f64 = 1e-10;

/// `‖πP − π‖∞` required of a stored chain analysis.
pub const STATIONARY_BALANCE: f64 = 1e-9;

/// `|Σπ − 1|` required of a stored chain analysis.
pub const STATIONARY_SUM: f64 = 1e-12;

/// `‖(I − P + Π)Z − I‖max` required of the fundamental matrix.
pub const FUNDAMENTAL_RESIDUAL: f64 = 1e-8;

/// Condition estimate above which `I − P + Π` is rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Feasibility residual required of every returned trajectory design.
pub const FEASIBILITY: f64 = 1e-7;

/// `‖π*P − π*‖∞` required of a design result.
pub const DESIGN_BALANCE: f64 = 1e-7;

/// Slack below which `z_ii − π_i` is treated as a numerical fault.
pub const RETURN_VARIANCE_SLACK: f64 = 1e-10;

/// Iteration cap for eigenvalue computations.
pub const EIGEN_MAX_ITERATIONS: usize = 100_000;

/// SLEM values this close to one are reported as periodic.
pub const PERIODICITY: f64 = 1e-9;

/// Relative Monte-Carlo margin applied to empirical-vs-bound checks.
pub const MONTE_CARLO_MARGIN: f64 = 0.02;
