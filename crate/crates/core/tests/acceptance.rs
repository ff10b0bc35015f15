//! Acceptance criteria for the solver and the identity checks.
//!
//! Run with `cargo test -p regmdp --test acceptance`. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use regmdp::{
    boundary_mdp, check_basic_lemma, check_kl_corollary_with, check_main_theorem_with,
    check_normal_cone, check_pdl, random_mdp, rng_from_seed, solve_optimal, Mdp, Policy, Quadratic,
    Regularizer, SolveOptions, ValueSolution, XLogX,
};

const SEEDS: u64 = 50;
const GAMMAS: [f64; 3] = [0.5, 0.9, 0.99];
const TAUS: [f64; 3] = [0.05, 0.5, 5.0];
const DIRICHLET_POLICIES: usize = 4;

const THEOREM_TOL: f64 = 1e-7;
const KL_TOL: f64 = 1e-7;
const PDL_TOL: f64 = 1e-8;
const BASIC_LEMMA_TOL: f64 = 1e-10;
const NORMAL_CONE_TOL: f64 = 1e-8;
const GRID_ORACLE_TOL: f64 = 1e-2;
const CONTRACTION_SLACK: f64 = 1e-10;
const GRADIENT_STEP: f64 = 1e-6;
const GRADIENT_REL_TOL: f64 = 1e-5;

const THEOREM_BUDGET: Duration = Duration::from_secs(30);
const GRID_BUDGET: Duration = Duration::from_secs(60);

/// One seeded instance of the sweep grid.
struct Case {
    seed: u64,
    mdp: Mdp,
    tau: f64,
}

impl Case {
    fn new(seed: u64) -> Self {
        let mut rng = rng_from_seed(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let n_states = rng.random_range(1..=10);
        let n_actions = rng.random_range(2..=5);
        let gamma = GAMMAS[(seed % 3) as usize];
        let tau = TAUS[((seed / 3) % 3) as usize];
        let mdp = random_mdp(n_states, n_actions, gamma, seed).expect("valid instance");
        Self { seed, mdp, tau }
    }

    fn entropy(&self) -> Regularizer {
        Regularizer::neg_entropy(self.tau).unwrap()
    }

    fn l2(&self) -> Regularizer {
        Regularizer::squared_norm(self.tau).unwrap()
    }

    /// Four Dirichlet policies followed by one deterministic policy.
    fn policies(&self) -> Vec<Policy> {
        let (ns, na) = (self.mdp.n_states(), self.mdp.n_actions());
        let mut rng = rng_from_seed(self.seed ^ 0xA5A5_A5A5);
        let mut out: Vec<Policy> = (0..DIRICHLET_POLICIES)
            .map(|_| Policy::random(ns, na, &mut rng))
            .collect();
        out.push(Policy::random_deterministic(ns, na, &mut rng));
        out
    }
}

fn cases() -> Vec<Case> {
    (0..SEEDS).map(Case::new).collect()
}

fn solve(m: &Mdp, reg: &Regularizer) -> ValueSolution {
    solve_optimal(m, reg, &SolveOptions::default()).expect("solver converges")
}

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn entropy_theorem_equality() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut failures = Vec::new();
    for case in cases() {
        let reg = case.entropy();
        let optimal = solve(&case.mdp, &reg);
        for (k, pi) in case.policies().iter().enumerate() {
            let r = check_main_theorem_with(&case.mdp, &reg, &optimal, pi, THEOREM_TOL).unwrap();
            worst = worst.max(r.residual.abs());
            checks += 1;
            if !(r.passed && r.equality == Some(true)) {
                failures.push(format!("seed {} policy {k}", case.seed));
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed <= THEOREM_BUDGET;
    Outcome::new(
        passed,
        format!(
            "{checks} checks, max |lhs - rhs| = {worst:.3e} (tol {THEOREM_TOL:e}), {:.2}s (budget {}s){}",
            elapsed.as_secs_f64(),
            THEOREM_BUDGET.as_secs(),
            failure_suffix(&failures)
        ),
    )
}

fn l2_theorem_sweep() -> Outcome {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_interior: f64 = 0.0;
    let (mut interior_checks, mut boundary_checks) = (0, 0);
    let mut failures = Vec::new();
    for case in cases() {
        let reg = case.l2();
        let optimal = solve(&case.mdp, &reg);
        let all_interior = optimal.interior_flags.iter().all(|&f| f);
        for (k, pi) in case.policies().iter().enumerate() {
            let r = check_main_theorem_with(&case.mdp, &reg, &optimal, pi, THEOREM_TOL).unwrap();
            worst_excess = worst_excess.max(r.residual);
            let ok = r.inequality_holds == Some(true)
                && (!all_interior || r.equality == Some(true))
                && r.passed;
            if all_interior {
                interior_checks += 1;
                worst_interior = worst_interior.max(r.residual.abs());
            } else {
                boundary_checks += 1;
            }
            if !ok {
                failures.push(format!("seed {} policy {k}", case.seed));
            }
        }
    }

    // A vertex optimum with a uniform comparison policy must be strict.
    let mut strict_gaps = Vec::new();
    for &tau in &TAUS {
        let m = boundary_mdp(4, 3, 10.0 * tau, 0.9).unwrap();
        let reg = Regularizer::squared_norm(tau).unwrap();
        let optimal = solve(&m, &reg);
        let pi = Policy::uniform(4, 3);
        let r = check_main_theorem_with(&m, &reg, &optimal, &pi, THEOREM_TOL).unwrap();
        let ok = r.passed && r.inequality_holds == Some(true) && r.equality == Some(false);
        if !ok {
            failures.push(format!("boundary instance tau {tau}"));
        }
        strict_gaps.push(r.gap());
    }
    let min_gap = strict_gaps.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Outcome::new(
        failures.is_empty(),
        format!(
            "{interior_checks} all-interior checks (max |lhs - rhs| = {worst_interior:.3e}), \
             {boundary_checks} boundary checks, max (lhs - rhs) = {worst_excess:.3e}; \
             engineered boundary: equality false with min gap {min_gap:.3e}{}",
            failure_suffix(&failures)
        ),
    )
}

fn kl_corollary() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut failures = Vec::new();
    for case in cases() {
        let optimal = solve(&case.mdp, &case.entropy());
        for (k, pi) in case.policies().iter().enumerate() {
            let r = check_kl_corollary_with(&case.mdp, case.tau, &optimal, pi, KL_TOL).unwrap();
            worst = worst.max(r.residual.abs());
            checks += 1;
            if !r.passed {
                failures.push(format!("seed {} policy {k}", case.seed));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{checks} checks incl. deterministic policies, max |lhs - rhs| = {worst:.3e} (tol {KL_TOL:e}){}",
            failure_suffix(&failures)
        ),
    )
}

fn performance_difference() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut failures = Vec::new();
    for case in cases() {
        let policies = case.policies();
        // One Dirichlet policy against the deterministic one.
        let (pi, pi_prime) = (&policies[(case.seed % 4) as usize], &policies[4]);
        for reg in [case.entropy(), case.l2()] {
            for (a, b) in [(pi, pi_prime), (pi_prime, pi)] {
                let r = check_pdl(&case.mdp, &reg, a, b, PDL_TOL).unwrap();
                worst = worst.max(r.residual.abs());
                checks += 1;
                if !r.passed {
                    failures.push(format!("seed {} {reg}", case.seed));
                }
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{checks} checks (50 triples x 2 regularizers x 2 orders), max |lhs - rhs| = {worst:.3e} (tol {PDL_TOL:e}){}",
            failure_suffix(&failures)
        ),
    )
}

fn basic_lemma() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut failures = Vec::new();
    for case in cases().into_iter().take(10) {
        let pi = &case.policies()[0];
        let mut rng = rng_from_seed(case.seed + 10_000);
        for _ in 0..100 {
            let x: Vec<f64> = (0..case.mdp.n_states())
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let r = check_basic_lemma(&case.mdp, pi, &x, BASIC_LEMMA_TOL).unwrap();
            worst = worst.max(r.residual.abs());
            checks += 1;
            if !r.passed {
                failures.push(format!("seed {}", case.seed));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{checks} Gaussian vectors on 10 instances, max |lhs - rhs| = {worst:.3e} (tol {BASIC_LEMMA_TOL:e}){}",
            failure_suffix(&failures)
        ),
    )
}

fn normal_cone() -> Outcome {
    let mut worst_violation = f64::NEG_INFINITY;
    let mut worst_stdev: f64 = 0.0;
    let mut states = 0;
    let mut failures = Vec::new();
    let mut instances: Vec<(String, Mdp, Regularizer)> = Vec::new();
    for case in cases() {
        instances.push((format!("seed {}", case.seed), case.mdp.clone(), case.entropy()));
        instances.push((format!("seed {}", case.seed), case.mdp.clone(), case.l2()));
    }
    for &tau in &TAUS {
        instances.push((
            format!("boundary tau {tau}"),
            boundary_mdp(4, 3, 10.0 * tau, 0.9).unwrap(),
            Regularizer::squared_norm(tau).unwrap(),
        ));
    }
    for (label, m, reg) in &instances {
        let optimal = solve(m, reg);
        for s in 0..m.n_states() {
            let cert =
                check_normal_cone(reg, optimal.q_row(s), optimal.policy.row(s), NORMAL_CONE_TOL)
                    .unwrap();
            states += 1;
            worst_violation = worst_violation.max(cert.max_violation);
            let mut ok = cert.max_violation <= NORMAL_CONE_TOL;
            if matches!(reg, Regularizer::NegEntropy { .. }) {
                worst_stdev = worst_stdev.max(cert.stdev);
                ok &= cert.stdev <= NORMAL_CONE_TOL;
            }
            if !ok {
                failures.push(format!("{label} {reg} state {s}"));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{states} states on {} solved instances, max violation = {worst_violation:.3e}, \
             entropy max stdev(y) = {worst_stdev:.3e} (tol {NORMAL_CONE_TOL:e}){}",
            instances.len(),
            failure_suffix(&failures)
        ),
    )
}

/// `E_ρ V^π` for a two-state, two-action MDP with the policy `π(s, 0) = p_s`,
/// by Cramer's rule on `(I − γ P^π) V = r^π − Ω(π)`.
fn two_state_value(m: &Mdp, tau: f64, p: [f64; 2]) -> f64 {
    let g = m.discount();
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let mut a = [[0.0_f64; 2]; 2];
    let mut b = [0.0_f64; 2];
    for s in 0..2 {
        let w = [p[s], 1.0 - p[s]];
        b[s] = w[0] * m.reward(s, 0) + w[1] * m.reward(s, 1) - tau * (xlogx(w[0]) + xlogx(w[1]));
        for (t, row) in a[s].iter_mut().enumerate() {
            let pt = w[0] * m.transition_row(s, 0)[t] + w[1] * m.transition_row(s, 1)[t];
            *row = if s == t { 1.0 } else { 0.0 } - g * pt;
        }
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let v0 = (b[0] * a[1][1] - a[0][1] * b[1]) / det;
    let v1 = (a[0][0] * b[1] - b[0] * a[1][0]) / det;
    let rho = m.initial_dist();
    rho[0] * v0 + rho[1] * v1
}

fn grid_oracle() -> Outcome {
    const TAU: f64 = 0.5;
    const STEPS: usize = 200;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..5u64 {
        let m = random_mdp(2, 2, 0.9, 500 + seed).unwrap();
        let reg = Regularizer::neg_entropy(TAU).unwrap();
        let exact = solve(&m, &reg).expected_value(&m);
        let mut best = f64::NEG_INFINITY;
        for i in 0..=STEPS {
            for j in 0..=STEPS {
                let p = [i as f64 / STEPS as f64, j as f64 / STEPS as f64];
                best = best.max(two_state_value(&m, TAU, p));
            }
        }
        let err = (exact - best).abs();
        worst = worst.max(err);
        if err > GRID_ORACLE_TOL || best > exact + 1e-9 {
            failures.push(format!("seed {}", 500 + seed));
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        failures.is_empty() && elapsed <= GRID_BUDGET,
        format!(
            "5 instances on a {0}x{0} grid, max |V* - grid max| = {worst:.3e} (tol {GRID_ORACLE_TOL:e}), {1:.2}s (budget {2}s){3}",
            STEPS + 1,
            elapsed.as_secs_f64(),
            GRID_BUDGET.as_secs(),
            failure_suffix(&failures)
        ),
    )
}

fn contraction() -> Outcome {
    let opts = SolveOptions {
        track_contraction: true,
        ..SolveOptions::default()
    };
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_raw_excess = f64::NEG_INFINITY;
    let mut sweeps = 0;
    let mut failures = Vec::new();
    for case in cases() {
        let gamma = case.mdp.discount();
        for reg in [case.entropy(), case.l2()] {
            let sol = solve_optimal(&case.mdp, &reg, &opts).unwrap();
            for &factor in &sol.contraction_factors {
                sweeps += 1;
                worst_excess = worst_excess.max(factor - gamma);
                if factor > gamma + CONTRACTION_SLACK {
                    failures.push(format!("seed {} {reg}", case.seed));
                }
            }
            for w in sol.sweep_differences.windows(2) {
                if w[0] > 0.0 {
                    worst_raw_excess = worst_raw_excess.max(w[1] / w[0] - gamma);
                }
            }
        }
    }
    failures.dedup();
    Outcome::new(
        failures.is_empty(),
        format!(
            "{sweeps} sweeps, max (factor - gamma) = {worst_excess:.3e} (slack {CONTRACTION_SLACK:e}); \
             for reference, ratio of stored sweep differences exceeds gamma by up to {worst_raw_excess:.3e}{}",
            failure_suffix(&failures)
        ),
    )
}

fn gradient_check() -> Outcome {
    let regs = [
        Regularizer::neg_entropy(0.5).unwrap(),
        Regularizer::squared_norm(0.5).unwrap(),
        Regularizer::separable(Arc::new(XLogX), 0.5).unwrap(),
        Regularizer::separable(Arc::new(Quadratic), 2.0).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    let mut directions = 0;
    let mut failures = Vec::new();
    for reg in &regs {
        let mut rng = rng_from_seed(77);
        for point in 0..100 {
            let n = rng.random_range(2..=5);
            let draw = Policy::random(1, n, &mut rng);
            // Keep every coordinate well away from the boundary.
            let pi: Vec<f64> = draw.row(0).iter().map(|p| 0.9 * p + 0.1 / n as f64).collect();
            let grad = reg.grad_omega(&pi).unwrap();
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut plus = pi.clone();
                    let mut minus = pi.clone();
                    plus[i] += GRADIENT_STEP;
                    plus[j] -= GRADIENT_STEP;
                    minus[i] -= GRADIENT_STEP;
                    minus[j] += GRADIENT_STEP;
                    let fd = (reg.omega(&plus).unwrap() - reg.omega(&minus).unwrap())
                        / (2.0 * GRADIENT_STEP);
                    let analytic = grad[i] - grad[j];
                    let rel = (fd - analytic).abs() / analytic.abs().max(1.0);
                    worst = worst.max(rel);
                    directions += 1;
                    if rel > GRADIENT_REL_TOL {
                        failures.push(format!("{reg:?} point {point} ({i},{j})"));
                    }
                }
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{} regularizers x 100 points, {directions} tangent directions, max relative error = {worst:.3e} (tol {GRADIENT_REL_TOL:e}){}",
            regs.len(),
            failure_suffix(&failures)
        ),
    )
}

fn failure_suffix(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        let shown: Vec<&str> = failures.iter().take(5).map(String::as_str).collect();
        format!("; {} failures, first: {}", failures.len(), shown.join(", "))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("entropy value-gap identity holds with equality", entropy_theorem_equality),
        ("squared-norm value-gap inequality, equality iff interior", l2_theorem_sweep),
        ("KL form of the value-gap identity", kl_corollary),
        ("regularized performance difference", performance_difference),
        ("occupancy lemma", basic_lemma),
        ("normal-cone optimality certificate", normal_cone),
        ("grid-search oracle on 2x2 instances", grid_oracle),
        ("Bellman operator contraction", contraction),
        ("regularizer gradients vs central differences", gradient_check),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        if !outcome.passed {
            failed += 1;
        }
        println!("{tag} [{}] {name}: {}", k + 1, outcome.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
