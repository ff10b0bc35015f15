//! Regularized policy evaluation and value iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{dot, induced_transition, Mdp, Policy};
use crate::regularizer::{is_relint, Regularizer, DEFAULT_RELINT_EPS};

pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop once successive iterates differ by at most this in sup-norm.
    pub tol: f64,
    /// `None` derives a bound from the reward scale, `tol` and the discount.
    pub max_iter: Option<usize>,
    /// Record `‖T V_k − T V_{k−1}‖ / ‖V_k − V_{k−1}‖` for every sweep.
    pub track_contraction: bool,
    pub relint_eps: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_SOLVER_TOL,
            max_iter: None,
            track_contraction: false,
            relint_eps: DEFAULT_RELINT_EPS,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Action values, state values and the associated policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    /// `Q[s * n_actions + a]`.
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub policy: Policy,
    /// Value-iteration sweeps; zero for a direct solve.
    pub iterations: usize,
    /// Sup-norm residual of the defining fixed-point equation.
    pub residual: f64,
    pub interior_flags: Vec<bool>,
    /// `‖V_k − V_{k−1}‖_∞` of the stored iterates, one per sweep.
    pub sweep_differences: Vec<f64>,
    /// Contraction factor of the Bellman operator along the iterates, with the
    /// image difference formed by [`Regularizer::value_increment`]. Empty unless
    /// requested.
    pub contraction_factors: Vec<f64>,
}

impl ValueSolution {
    pub fn n_states(&self) -> usize {
        self.v.len()
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        let n_actions = self.q.len() / self.v.len();
        &self.q[s * n_actions..(s + 1) * n_actions]
    }

    /// `E_{s∼ρ} V(s)` for the model's initial distribution.
    pub fn expected_value(&self, m: &Mdp) -> f64 {
        dot(m.initial_dist(), &self.v)
    }
}

/// Solves `V = r^π − Ω^π + γ P^π V` directly, then `Q = r + γ P V`.
pub fn evaluate_policy(m: &Mdp, reg: &Regularizer, pi: &Policy) -> Result<ValueSolution> {
    let p = induced_transition(m, pi)?;
    let n = m.n_states();
    let gamma = m.discount();
    let mut rhs = Vec::with_capacity(n);
    for s in 0..n {
        rhs.push(dot(pi.row(s), m.reward_row(s)) - reg.omega(pi.row(s))?);
    }
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - gamma * p.get(i, j)
    });
    let v: Vec<f64> = linalg::solve(a, DVector::from_vec(rhs.clone()))?.iter().copied().collect();
    let pv = p.apply(&v);
    let residual = (0..n)
        .map(|s| (v[s] - rhs[s] - gamma * pv[s]).abs())
        .fold(0.0, f64::max);
    Ok(ValueSolution {
        q: m.backup(&v),
        interior_flags: pi.rows().map(|row| is_relint(row, DEFAULT_RELINT_EPS)).collect(),
        v,
        policy: pi.clone(),
        iterations: 0,
        residual,
        sweep_differences: Vec::new(),
        contraction_factors: Vec::new(),
    })
}

/// One application of the regularized Bellman operator: returns `Q = r + γPV`
/// and the per-state simplex maxima of its rows.
fn bellman_sweep(
    m: &Mdp,
    reg: &Regularizer,
    v: &[f64],
) -> Result<(Vec<f64>, Vec<crate::regularizer::SimplexMaxResult>)> {
    let q = m.backup(v);
    let rows = q
        .chunks(m.n_actions())
        .map(|row| reg.simplex_max(row))
        .collect::<Result<Vec<_>>>()?;
    Ok((q, rows))
}

/// A priori sweep budget `⌈ln(2S / ((1−γ) tol)) / ln(1/γ)⌉ + 64`, where `S`
/// bounds both the reward range and the first Bellman step from zero.
pub fn default_max_iter(m: &Mdp, reg: &Regularizer, tol: f64) -> Result<usize> {
    let gamma = m.discount();
    if gamma == 0.0 {
        return Ok(66);
    }
    let (lo, hi) = m
        .rewards()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let first_step = (0..m.n_states())
        .map(|s| reg.simplex_max(m.reward_row(s)).map(|r| r.value.abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let scale = (hi - lo) + first_step;
    let sweeps = (2.0 * scale / ((1.0 - gamma) * tol)).ln() / (1.0 / gamma).ln();
    Ok(sweeps.max(0.0).ceil() as usize + 64)
}

/// Value iteration `V ← max_π ⟨π, r + γPV⟩ − Ω(π)` from `V = 0` until
/// successive iterates differ by at most `opts.tol`.
///
/// The returned `v` is the last image `T V`, `q` is `r + γ P V` for the
/// iterate it came from, and `policy` holds the row maximizers of `q`, so
/// `v[s]` is exactly the regularized maximum of `q_row(s)`.
pub fn solve_optimal(m: &Mdp, reg: &Regularizer, opts: &SolveOptions) -> Result<ValueSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let max_iter = match opts.max_iter {
        Some(k) => k,
        None => default_max_iter(m, reg, opts.tol)?,
    };
    let n = m.n_states();
    let n_actions = m.n_actions();
    let gamma = m.discount();

    let mut v = vec![0.0; n];
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut sweep_differences = Vec::new();
    let mut contraction_factors = Vec::new();
    let mut diff = f64::INFINITY;

    for iteration in 1..=max_iter {
        let (q, rows) = bellman_sweep(m, reg, &v)?;
        let next: Vec<f64> = rows.iter().map(|r| r.value).collect();
        diff = sup_distance(&next, &v);
        sweep_differences.push(diff);

        if opts.track_contraction {
            if let Some((v_prev, q_prev)) = &previous {
                let step: Vec<f64> = v.iter().zip(v_prev).map(|(a, b)| a - b).collect();
                let denom = step.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
                if denom > 0.0 {
                    let mut numer = 0.0_f64;
                    for s in 0..n {
                        let delta: Vec<f64> = (0..n_actions)
                            .map(|a| gamma * dot(m.transition_row(s, a), &step))
                            .collect();
                        let q_row = &q_prev[s * n_actions..(s + 1) * n_actions];
                        numer = numer.max(reg.value_increment(q_row, &delta)?.abs());
                    }
                    contraction_factors.push(numer / denom);
                }
            }
        }

        if diff <= opts.tol {
            let mut probs = Vec::with_capacity(n * n_actions);
            for r in &rows {
                probs.extend_from_slice(&r.argmax);
            }
            let policy = Policy::new(n, n_actions, probs)?;
            return Ok(ValueSolution {
                q,
                interior_flags: policy.rows().map(|row| is_relint(row, opts.relint_eps)).collect(),
                v: next,
                policy,
                iterations: iteration,
                residual: diff,
                sweep_differences,
                contraction_factors,
            });
        }
        if opts.track_contraction {
            previous = Some((v, q));
        }
        v = next;
    }
    Err(Error::MaxIterations {
        iterations: max_iter,
        residual: diff,
    })
}

/// `‖V − T_Ω V‖_∞` for the solution's value vector.
pub fn bellman_residual(m: &Mdp, reg: &Regularizer, sol: &ValueSolution) -> Result<f64> {
    if sol.v.len() != m.n_states() || sol.q.len() != m.n_states() * m.n_actions() {
        return Err(Error::Shape("solution does not match MDP dimensions".into()));
    }
    let (_, rows) = bellman_sweep(m, reg, &sol.v)?;
    let image: Vec<f64> = rows.iter().map(|r| r.value).collect();
    Ok(sup_distance(&image, &sol.v))
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
