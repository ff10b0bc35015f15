//! Two-sided numerical checks of the regularized-MDP identities.
//!
//! Each check computes both sides independently, reports the residual, and
//! decides pass/fail at a caller-supplied tolerance:
//!
//! | identity | left side | right side |
//! |---|---|---|
//! | [`Identity::Pdl`] | `(1−γ) E_ρ(V^π − V^π')` | `E_{μ^π}(Σ_a π Q^π' − V^π' − Ω(π))` |
//! | [`Identity::BasicLemma`] | `μᵀ(I − γP^π)x` | `(1−γ) ρᵀx` |
//! | [`Identity::NormalCone`] | `max_s max_a y_a − yᵀπ⋆` | `0` |
//! | [`Identity::RelintLemma`] | `max_s max_a |yᵀ(e_a − π⋆)|` | `0` |
//! | [`Identity::MainTheorem`] | `E_{μ^π} D_Ω(π, π⋆)` | `(1−γ) E_ρ(V⋆ − V^π)` |
//! | [`Identity::KlCorollary`] | `E_{μ^π} KL(π ‖ π⋆)` | `((1−γ)/τ) E_ρ(V⋆ − V^π)` |
//!
//! with `y(s) = Q⋆(s,·) − ∇Ω(π⋆(s,·))`. The main theorem is an inequality
//! (`lhs ≤ rhs`) that becomes an equality when every `π⋆(s,·)` is interior.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{dot, induced_transition, stationary_distribution, Mdp, Policy};
use crate::regularizer::{kl_divergence, Regularizer};
use crate::solver::{evaluate_policy, solve_optimal, SolveOptions, ValueSolution};

pub const DEFAULT_VERIFY_TOL: f64 = 1e-7;

/// Allowed disagreement between `D_{−τH}/τ` and the direct KL sum, relative to `max(1, KL)`.
const KL_CROSS_CHECK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    Pdl,
    BasicLemma,
    NormalCone,
    RelintLemma,
    MainTheorem,
    KlCorollary,
}

impl Identity {
    pub const ALL: [Identity; 6] = [
        Identity::Pdl,
        Identity::BasicLemma,
        Identity::NormalCone,
        Identity::RelintLemma,
        Identity::MainTheorem,
        Identity::KlCorollary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Identity::Pdl => "pdl",
            Identity::BasicLemma => "basic_lemma",
            Identity::NormalCone => "normal_cone",
            Identity::RelintLemma => "relint_lemma",
            Identity::MainTheorem => "main_theorem",
            Identity::KlCorollary => "kl_corollary",
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub tol: f64,
    pub solver: SolveOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_VERIFY_TOL,
            solver: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StateDiagnostic {
    pub state: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interior: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl StateDiagnostic {
    fn new(state: usize) -> Self {
        Self {
            state,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub identity: Identity,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`.
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Observed `|lhs − rhs| ≤ tolerance`; set for inequality-type identities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equality: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inequality_holds: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_state: Vec<StateDiagnostic>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn equality(identity: Identity, lhs: f64, rhs: f64, tol: f64) -> Self {
        let residual = lhs - rhs;
        Self {
            identity,
            lhs,
            rhs,
            residual,
            tolerance: tol,
            passed: residual.abs() <= tol,
            equality: None,
            inequality_holds: None,
            per_state: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// `|lhs − rhs|`.
    pub fn gap(&self) -> f64 {
        self.residual.abs()
    }
}

/// Membership certificate for `y = q − ∇Ω(π) ∈ N_Δ(π)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalConeCertificate {
    pub y: Vec<f64>,
    /// `max_a y_a − yᵀπ`; the cone condition checked at the simplex vertices.
    pub max_violation: f64,
    /// Population standard deviation of `y` across actions.
    pub stdev: f64,
    /// `max_a y_a − min_a y_a`.
    pub spread: f64,
    pub member: bool,
    /// `y` is a multiple of the all-ones vector within tolerance.
    pub constant: bool,
}

/// `(1−γ) E_ρ(V^π − V^π') = E_{μ^π}(Σ_a π Q^π' − V^π' − Ω(π))`.
pub fn check_pdl(
    m: &Mdp,
    reg: &Regularizer,
    pi: &Policy,
    pi_prime: &Policy,
    tol: f64,
) -> Result<VerificationReport> {
    let eval = evaluate_policy(m, reg, pi)?;
    let other = evaluate_policy(m, reg, pi_prime)?;
    let mu = stationary_distribution(m, pi)?;
    let gamma = m.discount();
    let diff: Vec<f64> = eval.v.iter().zip(&other.v).map(|(a, b)| a - b).collect();
    let lhs = (1.0 - gamma) * dot(m.initial_dist(), &diff);

    let mut per_state = Vec::with_capacity(m.n_states());
    let mut rhs = 0.0;
    for s in 0..m.n_states() {
        // q^{(π,π')}_s = Σ_a π(s,a) Q^{π'}(s,a)
        let cross = dot(pi.row(s), other.q_row(s));
        let term = cross - other.v[s] - reg.omega(pi.row(s))?;
        let weight = mu.as_slice()[s];
        rhs += weight * term;
        per_state.push(StateDiagnostic {
            weight: Some(weight),
            term: Some(term),
            ..StateDiagnostic::new(s)
        });
    }
    let mut report = VerificationReport::equality(Identity::Pdl, lhs, rhs, tol);
    report.per_state = per_state;
    Ok(report)
}

/// `(μ^π)ᵀ(I − γP^π)x = (1−γ) ρᵀx`.
pub fn check_basic_lemma(m: &Mdp, pi: &Policy, x: &[f64], tol: f64) -> Result<VerificationReport> {
    if x.len() != m.n_states() {
        return Err(Error::Shape(format!(
            "vector has length {}, expected {}",
            x.len(),
            m.n_states()
        )));
    }
    let p = induced_transition(m, pi)?;
    let mu = stationary_distribution(m, pi)?;
    let gamma = m.discount();
    let px = p.apply(x);
    let lhs: f64 = (0..x.len()).map(|s| mu.as_slice()[s] * (x[s] - gamma * px[s])).sum();
    let rhs = (1.0 - gamma) * dot(m.initial_dist(), x);
    Ok(VerificationReport::equality(Identity::BasicLemma, lhs, rhs, tol))
}

/// Builds `y = q − ∇Ω(π⋆)` and tests `y ∈ N_Δ(π⋆)`.
///
/// A linear function attains its maximum over the simplex at a vertex, so
/// `yᵀ(π − π⋆) ≤ 0 ∀π ∈ Δ` reduces to `max_a y_a ≤ yᵀπ⋆`.
pub fn check_normal_cone(
    reg: &Regularizer,
    q_row: &[f64],
    pi_star_row: &[f64],
    tol: f64,
) -> Result<NormalConeCertificate> {
    if q_row.len() != pi_star_row.len() {
        return Err(Error::Shape("q_row and pi_star_row differ in length".into()));
    }
    let grad = reg.grad_omega(pi_star_row)?;
    let y: Vec<f64> = q_row.iter().zip(&grad).map(|(q, g)| q - g).collect();
    let at_point = dot(&y, pi_star_row);
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let stdev = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let max_violation = hi - at_point;
    Ok(NormalConeCertificate {
        member: max_violation <= tol,
        constant: hi - lo <= tol,
        max_violation,
        stdev,
        spread: hi - lo,
        y,
    })
}

/// For interior `π⋆`, `yᵀ(π − π⋆) = 0` on the whole simplex; checked at the vertices.
pub fn check_relint_lemma(reg: &Regularizer, q_row: &[f64], tol: f64) -> Result<VerificationReport> {
    let best = reg.simplex_max(q_row)?;
    if !(best.interior || reg.interior_guaranteed()) {
        return Err(Error::Precondition(format!(
            "maximizer {:?} is not in the relative interior",
            best.argmax
        )));
    }
    let lhs = relint_deviation(reg, q_row, &best.argmax)?;
    Ok(VerificationReport::equality(Identity::RelintLemma, lhs, 0.0, tol))
}

fn relint_deviation(reg: &Regularizer, q_row: &[f64], pi_star: &[f64]) -> Result<f64> {
    let grad = reg.grad_omega(pi_star)?;
    let y: Vec<f64> = q_row.iter().zip(&grad).map(|(q, g)| q - g).collect();
    let at_point = dot(&y, pi_star);
    Ok(y.iter().map(|v| (v - at_point).abs()).fold(0.0, f64::max))
}

fn state_interior(reg: &Regularizer, optimal: &ValueSolution, s: usize) -> bool {
    optimal.interior_flags[s] || reg.interior_guaranteed()
}

/// Normal-cone certificate for every state of an optimal solution. States whose
/// maximizer is interior must additionally have a constant `y`.
pub fn check_normal_cone_all(
    reg: &Regularizer,
    optimal: &ValueSolution,
    tol: f64,
) -> Result<VerificationReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut passed = true;
    let mut per_state = Vec::with_capacity(optimal.n_states());
    let mut max_stdev: f64 = 0.0;
    for s in 0..optimal.n_states() {
        let cert = check_normal_cone(reg, optimal.q_row(s), optimal.policy.row(s), tol)?;
        let interior = state_interior(reg, optimal, s);
        worst = worst.max(cert.max_violation);
        passed &= cert.member;
        if interior {
            passed &= cert.stdev <= tol;
            max_stdev = max_stdev.max(cert.stdev);
        }
        per_state.push(StateDiagnostic {
            term: Some(cert.max_violation),
            interior: Some(interior),
            note: Some(format!("stdev(y) = {:e}", cert.stdev)),
            y: Some(cert.y),
            ..StateDiagnostic::new(s)
        });
    }
    let mut report = VerificationReport::equality(Identity::NormalCone, worst, 0.0, tol);
    report.passed = passed;
    report.notes.push(format!("max stdev(y) over interior states = {max_stdev:e}"));
    report.per_state = per_state;
    Ok(report)
}

/// Relative-interior lemma at every interior state of an optimal solution.
/// Boundary states are skipped, not failed.
pub fn check_relint_all(
    reg: &Regularizer,
    optimal: &ValueSolution,
    tol: f64,
) -> Result<VerificationReport> {
    let mut worst: f64 = 0.0;
    let mut per_state = Vec::with_capacity(optimal.n_states());
    for s in 0..optimal.n_states() {
        let mut diag = StateDiagnostic::new(s);
        let interior = state_interior(reg, optimal, s);
        diag.interior = Some(interior);
        if interior {
            let dev = relint_deviation(reg, optimal.q_row(s), optimal.policy.row(s))?;
            worst = worst.max(dev);
            diag.term = Some(dev);
        } else {
            diag.note = Some("boundary maximizer; lemma does not apply".into());
        }
        per_state.push(diag);
    }
    let mut report = VerificationReport::equality(Identity::RelintLemma, worst, 0.0, tol);
    if per_state.iter().all(|d| d.interior == Some(false)) {
        report.notes.push("no interior states; check is vacuous".into());
    }
    report.per_state = per_state;
    Ok(report)
}

/// `E_{μ^π} D_Ω(π, π⋆) ≤ (1−γ) E_ρ(V⋆ − V^π)`, with equality required when
/// every `π⋆(s,·)` is interior.
pub fn check_main_theorem(
    m: &Mdp,
    reg: &Regularizer,
    pi: &Policy,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let optimal = solve_optimal(m, reg, &opts.solver)?;
    check_main_theorem_with(m, reg, &optimal, pi, opts.tol)
}

/// [`check_main_theorem`] against a precomputed optimal solution.
pub fn check_main_theorem_with(
    m: &Mdp,
    reg: &Regularizer,
    optimal: &ValueSolution,
    pi: &Policy,
    tol: f64,
) -> Result<VerificationReport> {
    pi.check_shape(m)?;
    let eval = evaluate_policy(m, reg, pi)?;
    let mu = stationary_distribution(m, pi)?;
    let mut lhs = 0.0;
    let mut per_state = Vec::with_capacity(m.n_states());
    for s in 0..m.n_states() {
        let d = reg.bregman(pi.row(s), optimal.policy.row(s))?;
        let weight = mu.as_slice()[s];
        lhs += weight * d;
        per_state.push(StateDiagnostic {
            weight: Some(weight),
            term: Some(d),
            interior: Some(state_interior(reg, optimal, s)),
            ..StateDiagnostic::new(s)
        });
    }
    let rhs = value_gap(m, optimal, &eval);
    let all_interior = (0..m.n_states()).all(|s| state_interior(reg, optimal, s));

    let mut report = VerificationReport::equality(Identity::MainTheorem, lhs, rhs, tol);
    let equality = report.residual.abs() <= tol;
    let inequality_holds = report.residual <= tol;
    report.equality = Some(equality);
    report.inequality_holds = Some(inequality_holds);
    report.passed = inequality_holds && (equality || !all_interior);
    if !all_interior {
        report.notes.push("boundary maximizer present; only the inequality is required".into());
    }
    report.per_state = per_state;
    Ok(report)
}

/// `(1−γ) E_ρ(V⋆ − V^π)`.
fn value_gap(m: &Mdp, optimal: &ValueSolution, eval: &ValueSolution) -> f64 {
    let diff: Vec<f64> = optimal.v.iter().zip(&eval.v).map(|(a, b)| a - b).collect();
    (1.0 - m.discount()) * dot(m.initial_dist(), &diff)
}

/// `E_{μ^π} KL(π ‖ π⋆) = ((1−γ)/τ) E_ρ(V⋆ − V^π)` for `Ω = −τH`.
pub fn check_kl_corollary(
    m: &Mdp,
    tau: f64,
    pi: &Policy,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let reg = Regularizer::neg_entropy(tau)?;
    let optimal = solve_optimal(m, &reg, &opts.solver)?;
    check_kl_corollary_with(m, tau, &optimal, pi, opts.tol)
}

/// [`check_kl_corollary`] against a precomputed entropy-regularized optimum.
pub fn check_kl_corollary_with(
    m: &Mdp,
    tau: f64,
    optimal: &ValueSolution,
    pi: &Policy,
    tol: f64,
) -> Result<VerificationReport> {
    let reg = Regularizer::neg_entropy(tau)?;
    pi.check_shape(m)?;
    let eval = evaluate_policy(m, &reg, pi)?;
    let mu = stationary_distribution(m, pi)?;
    let mut lhs = 0.0;
    let mut worst_cross = 0.0_f64;
    let mut per_state = Vec::with_capacity(m.n_states());
    for s in 0..m.n_states() {
        let kl = kl_divergence(pi.row(s), optimal.policy.row(s));
        let via_bregman = reg.bregman(pi.row(s), optimal.policy.row(s))? / tau;
        worst_cross = worst_cross.max((via_bregman - kl).abs() / kl.abs().max(1.0));
        let weight = mu.as_slice()[s];
        lhs += weight * kl;
        per_state.push(StateDiagnostic {
            weight: Some(weight),
            term: Some(kl),
            interior: Some(optimal.interior_flags[s]),
            ..StateDiagnostic::new(s)
        });
    }
    let rhs = value_gap(m, optimal, &eval) / tau;
    let mut report = VerificationReport::equality(Identity::KlCorollary, lhs, rhs, tol);
    report.notes.push(format!("bregman/tau vs KL max relative gap = {worst_cross:e}"));
    if worst_cross > KL_CROSS_CHECK_TOL {
        report.passed = false;
        report.notes.push("bregman/KL cross-check failed".into());
    }
    report.per_state = per_state;
    Ok(report)
}
