//! Finite discounted MDPs, policies, and the state-level objects they induce.
//!
//! Everything is stored dense and row-major:
//! `transition[(s * n_actions + a) * n_states + s']` is `P(s' | s, a)`,
//! `reward[s * n_actions + a]` is `r(s, a)`, and policies use the same
//! `s * n_actions + a` layout as rewards.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on row sums of transition kernels, initial distributions and
/// policies. Inputs outside it are rejected, never renormalized.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Tolerance on the sum of a computed state distribution.
pub const DISTRIBUTION_TOL: f64 = 1e-10;

/// Deterministic generator used for every seeded construction in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    initial_dist: Vec<f64>,
    discount: f64,
}

impl Mdp {
    /// Builds an MDP and checks every invariant.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial_dist: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        let m = Self::from_parts(n_states, n_actions, transition, reward, initial_dist, discount)?;
        let report = m.validate();
        if report.is_ok() {
            Ok(m)
        } else {
            Err(Error::InvalidMdp(report))
        }
    }

    /// Builds an MDP checking only dimensions. Use [`Mdp::validate`] before
    /// handing the result to a solver.
    pub fn from_parts(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial_dist: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Shape(format!(
                "need at least one state and one action, got {n_states}x{n_actions}"
            )));
        }
        let expect = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Shape(format!("`{name}` has {got} entries, expected {want}")))
            }
        };
        expect("transition", transition.len(), n_states * n_actions * n_states)?;
        expect("reward", reward.len(), n_states * n_actions)?;
        expect("initial_dist", initial_dist.len(), n_states)?;
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            initial_dist,
            discount,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// `P(· | s, a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Rewards of state `s`, one per action.
    pub fn reward_row(&self, s: usize) -> &[f64] {
        &self.reward[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// Same model with every reward replaced by `f(r)`.
    pub fn map_rewards(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            reward: self.reward.iter().map(|&r| f(r)).collect(),
            ..self.clone()
        }
    }

    /// Same model with a different discount factor. The result is not validated.
    pub fn with_discount(&self, discount: f64) -> Self {
        Self {
            discount,
            ..self.clone()
        }
    }

    /// `r(s, a) + γ Σ_{s'} P(s'|s,a) v(s')` for every pair, row-major.
    pub fn backup(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_states);
        (0..self.n_states * self.n_actions)
            .map(|sa| {
                let row = &self.transition[sa * self.n_states..(sa + 1) * self.n_states];
                self.reward[sa] + self.discount * dot(row, v)
            })
            .collect()
    }

    pub fn validate(&self) -> ValidationResult {
        let mut violations = Vec::new();
        if !(0.0..1.0).contains(&self.discount) {
            violations.push(Violation::DiscountOutOfRange {
                discount: self.discount,
            });
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let r = self.reward(s, a);
                if !r.is_finite() {
                    violations.push(Violation::NonFiniteReward { state: s, action: a, value: r });
                }
                let row = self.transition_row(s, a);
                for (next, &p) in row.iter().enumerate() {
                    if !(p >= 0.0) {
                        violations.push(Violation::NegativeTransition {
                            state: s,
                            action: a,
                            next,
                            value: p,
                        });
                    }
                }
                let residual = (row.iter().sum::<f64>() - 1.0).abs();
                if !(residual <= STOCHASTIC_TOL) {
                    violations.push(Violation::TransitionRowSum {
                        state: s,
                        action: a,
                        residual,
                    });
                }
            }
        }
        for (s, &p) in self.initial_dist.iter().enumerate() {
            if !(p >= 0.0) {
                violations.push(Violation::NegativeInitial { state: s, value: p });
            }
        }
        let residual = (self.initial_dist.iter().sum::<f64>() - 1.0).abs();
        if !(residual <= STOCHASTIC_TOL) {
            violations.push(Violation::InitialDistSum { residual });
        }
        ValidationResult { violations }
    }
}

/// Checks all [`Mdp`] invariants and returns the full list of violations.
pub fn validate_mdp(m: &Mdp) -> ValidationResult {
    m.validate()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DiscountOutOfRange { discount: f64 },
    NonFiniteReward { state: usize, action: usize, value: f64 },
    NegativeTransition { state: usize, action: usize, next: usize, value: f64 },
    TransitionRowSum { state: usize, action: usize, residual: f64 },
    NegativeInitial { state: usize, value: f64 },
    InitialDistSum { residual: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DiscountOutOfRange { discount } => {
                write!(f, "discount out of range: {discount} not in [0, 1)")
            }
            Violation::NonFiniteReward { state, action, value } => {
                write!(f, "reward at (s={state}, a={action}) is not finite: {value}")
            }
            Violation::NegativeTransition { state, action, next, value } => write!(
                f,
                "transition P({next} | s={state}, a={action}) is negative: {value}"
            ),
            Violation::TransitionRowSum { state, action, residual } => write!(
                f,
                "transition row (s={state}, a={action}) does not sum to 1: residual {residual:.3e}"
            ),
            Violation::NegativeInitial { state, value } => {
                write!(f, "initial_dist[{state}] is negative: {value}")
            }
            Violation::InitialDistSum { residual } => {
                write!(f, "initial_dist does not sum to 1: residual {residual:.3e}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A stochastic policy: one distribution over actions per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(Error::Shape(format!(
                "policy table has {} entries, expected {n_states}x{n_actions}",
                probs.len()
            )));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            if let Some(a) = row.iter().position(|p| !(*p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!(
                    "pi({s}, {a}) = {} is negative",
                    row[a]
                )));
            }
            let residual = (row.iter().sum::<f64>() - 1.0).abs();
            if !(residual <= STOCHASTIC_TOL) {
                return Err(Error::InvalidPolicy(format!(
                    "row {s} does not sum to 1: residual {residual:.3e}"
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::Shape("policy rows have unequal lengths".into()));
        }
        Self::new(rows.len(), n_actions, rows.concat())
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self {
            n_states,
            n_actions,
            probs: vec![p; n_states * n_actions],
        }
    }

    /// Picks `actions[s]` with probability one in each state.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::Shape(format!("action {a} out of range in state {s}")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Self::new(actions.len(), n_actions, probs)
    }

    /// Rows drawn from a flat Dirichlet.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let probs = (0..n_states).flat_map(|_| flat_dirichlet(n_actions, rng)).collect();
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    /// One uniformly chosen action per state.
    pub fn random_deterministic<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Self {
        let actions: Vec<usize> = (0..n_states).map(|_| rng.random_range(0..n_actions)).collect();
        Self::deterministic(n_actions, &actions).expect("actions drawn in range")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.n_actions)
    }

    pub fn check_shape(&self, m: &Mdp) -> Result<()> {
        if self.n_states == m.n_states && self.n_actions == m.n_actions {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "policy is {}x{} but MDP is {}x{}",
                self.n_states, self.n_actions, m.n_states, m.n_actions
            )))
        }
    }
}

/// Discounted state occupancy of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    mu: Vec<f64>,
}

impl StateDistribution {
    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }

    /// `Σ_s μ(s) x(s)`.
    pub fn expect(&self, x: &[f64]) -> f64 {
        dot(&self.mu, x)
    }
}

/// Row-stochastic `|S| x |S|` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    n: usize,
    rows: Vec<f64>,
}

impl StateMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: usize, next: usize) -> f64 {
        self.rows[s * self.n + next]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s * self.n..(s + 1) * self.n]
    }

    /// `self · x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.chunks(self.n).map(|row| dot(row, x)).collect()
    }
}

/// `P^π(s, s') = Σ_a π(s,a) P(s'|s,a)`.
pub fn induced_transition(m: &Mdp, pi: &Policy) -> Result<StateMatrix> {
    pi.check_shape(m)?;
    let n = m.n_states;
    let mut rows = vec![0.0; n * n];
    for s in 0..n {
        let out = &mut rows[s * n..(s + 1) * n];
        for (a, &p) in pi.row(s).iter().enumerate() {
            for (o, &t) in out.iter_mut().zip(m.transition_row(s, a)) {
                *o += p * t;
            }
        }
    }
    Ok(StateMatrix { n, rows })
}

/// Discounted stationary distribution `μ = (1-γ)(I - γ (P^π)ᵀ)^{-1} ρ`,
/// computed by a dense LU solve.
pub fn stationary_distribution(m: &Mdp, pi: &Policy) -> Result<StateDistribution> {
    let p = induced_transition(m, pi)?;
    let n = m.n_states;
    let gamma = m.discount;
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - gamma * p.get(j, i)
    });
    let b = DVector::from_iterator(n, m.initial_dist.iter().map(|r| (1.0 - gamma) * r));
    let mu = linalg::solve(a, b)?;
    Ok(StateDistribution {
        mu: mu.iter().copied().collect(),
    })
}

/// Random instance: flat-Dirichlet transition rows and initial distribution,
/// rewards uniform on `[0, 1)`. Deterministic in `seed`.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<Mdp> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidArgument(format!(
            "dimensions must be positive, got {n_states}x{n_actions}"
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("discount {gamma} not in [0, 1)")));
    }
    let mut rng = rng_from_seed(seed);
    let transition = (0..n_states * n_actions)
        .flat_map(|_| flat_dirichlet(n_states, &mut rng))
        .collect();
    let reward = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    let initial_dist = flat_dirichlet(n_states, &mut rng);
    Mdp::new(n_states, n_actions, transition, reward, initial_dist, gamma)
}

/// Instance whose first action pays `spread` more than every other action in
/// every state. Transitions and initial distribution are uniform, so under a
/// squared-norm regularizer with `tau <= spread` the optimal policy is the
/// vertex `e_0` in every state.
pub fn boundary_mdp(n_states: usize, n_actions: usize, spread: f64, gamma: f64) -> Result<Mdp> {
    if n_states == 0 || n_actions < 2 {
        return Err(Error::InvalidArgument(
            "boundary instance needs at least one state and two actions".into(),
        ));
    }
    let u = 1.0 / n_states as f64;
    let transition = vec![u; n_states * n_actions * n_states];
    let reward = (0..n_states * n_actions)
        .map(|sa| if sa % n_actions == 0 { spread } else { 0.0 })
        .collect();
    Mdp::new(n_states, n_actions, transition, reward, vec![u; n_states], gamma)
}

/// Normalized independent unit exponentials.
pub(crate) fn flat_dirichlet<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
