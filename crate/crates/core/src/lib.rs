//! Tabular regularized Markov decision processes.
//!
//! The crate computes regularized values and optimal policies for finite
//! discounted MDPs where each state's return is penalized by a strictly convex
//! `Ω(π(s,·))`, together with discounted state occupancies and Bregman
//! divergences. The [`identities`] module checks, numerically and from both
//! sides, the exact relations between these objects: the regularized
//! performance difference lemma, first-order optimality in normal-cone form,
//! and the Bregman/value-gap identity `E_{μ^π} D_Ω(π, π⋆) ≤ (1−γ) E_ρ(V⋆ − V^π)`.
//!
//! ```
//! use regmdp::{random_mdp, solve_optimal, Regularizer, SolveOptions};
//!
//! let m = random_mdp(4, 2, 0.9, 7).unwrap();
//! let reg: Regularizer = "entropy:0.1".parse().unwrap();
//! let sol = solve_optimal(&m, &reg, &SolveOptions::default()).unwrap();
//! assert!(sol.residual <= 1e-10);
//! ```

// Negated comparisons are used on purpose so that NaN inputs fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod identities;
pub mod io;
mod linalg;
pub mod mdp;
pub mod regularizer;
pub mod solver;

pub use error::{Error, Result};
pub use identities::{
    check_basic_lemma, check_kl_corollary, check_kl_corollary_with, check_main_theorem,
    check_main_theorem_with, check_normal_cone, check_normal_cone_all, check_pdl,
    check_relint_all, check_relint_lemma, Identity, NormalConeCertificate, StateDiagnostic,
    VerificationReport, VerifyOptions, DEFAULT_VERIFY_TOL,
};
pub use io::{load_mdp, load_policy, save_mdp, save_policy};
pub use mdp::{
    boundary_mdp, induced_transition, random_mdp, rng_from_seed, stationary_distribution,
    validate_mdp, Mdp, Policy, StateDistribution, StateMatrix, ValidationResult, Violation,
};
pub use regularizer::{
    is_relint, kl_divergence, Potential, Quadratic, Regularizer, SimplexMaxResult, XLogX,
    DEFAULT_RELINT_EPS,
};
pub use solver::{
    bellman_residual, evaluate_policy, solve_optimal, SolveOptions, ValueSolution,
    DEFAULT_SOLVER_TOL,
};
