//! Independent reference machinery used to audit the closed forms:
//! adaptive quadrature, central differences, Crank–Nicolson solvers,
//! and the Merton / brute-force control benchmarks.

pub mod cn;
pub mod diff;
pub mod hjb;
pub mod quadrature;

pub use cn::{cn_solve_heat, cn_solve_rcd, cn_solve_rcd_with, self_convergence_order, CnSolution, RcdBoundary};
pub use diff::{central_diff, second_central_diff};
pub use hjb::{brute_force_hjb_max, hamiltonian, merton_policy, MERTON_DEFAULT_GAMMA};
pub use quadrature::{
    adaptive_simpson, double_quadrature_remainder, double_quadrature_remainder_frozen,
    QuadratureSpec,
};
