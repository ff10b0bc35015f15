//! Strictly convex regularizers on the probability simplex.
//!
//! A [`Regularizer`] provides `Ω`, its gradient, the Bregman divergence it
//! generates, and the regularized simplex maximum
//! `max_{π ∈ Δ} ⟨q, π⟩ − Ω(π)`, which is the per-state step of the
//! regularized Bellman operator.
//!
//! Negative entropy is solved in closed form (softmax / log-sum-exp). Every
//! other regularizer is separable, `Ω(π) = τ Σ_a φ(π_a)`, and is solved by
//! bisection on the multiplier `ν` of the simplex constraint:
//! `Σ_a ψ((q_a − ν)/τ) = 1`, where `ψ` is the inverse of `φ'` clipped to
//! `[0, ∞)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mdp::dot;

/// Default threshold for [`is_relint`].
pub const DEFAULT_RELINT_EPS: f64 = 1e-9;

/// Slack allowed when checking that a regularizer argument lies on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Required accuracy of the simplex constraint after multiplier bisection.
pub const BISECTION_TOL: f64 = 1e-12;

const MAX_BISECTION_STEPS: usize = 256;

/// Scalar convex potential `φ` on `[0, ∞)` defining a separable regularizer.
pub trait Potential: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    /// `φ(x)`, with its continuous extension at `x = 0`.
    fn value(&self, x: f64) -> f64;

    /// `φ'(x)`. May be `-∞` at zero.
    fn derivative(&self, x: f64) -> f64;

    /// `ψ(z) = argmin_{x ≥ 0} φ(x) − z x`, i.e. `(φ')^{-1}(z)` clipped at zero.
    /// Must be continuous and non-decreasing.
    fn clipped_inverse(&self, z: f64) -> f64;

    /// `ψ(z + h) − ψ(z)`. Override when the difference can be formed without
    /// cancellation.
    fn clipped_inverse_increment(&self, z: f64, h: f64) -> f64 {
        self.clipped_inverse(z + h) - self.clipped_inverse(z)
    }

    /// `φ(x + d) − φ(x) − z d` where `x = ψ(z)`. Non-negative; second order in `d`.
    fn linearization_gap(&self, x: f64, z: f64, d: f64) -> f64 {
        self.value(x + d) - self.value(x) - z * d
    }

    /// `φ'(0+) = −∞`: maximizers never touch the simplex boundary.
    fn has_barrier(&self) -> bool {
        false
    }
}

/// `φ(x) = x² / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quadratic;

impl Potential for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn value(&self, x: f64) -> f64 {
        0.5 * x * x
    }

    fn derivative(&self, x: f64) -> f64 {
        x
    }

    fn clipped_inverse(&self, z: f64) -> f64 {
        z.max(0.0)
    }

    fn clipped_inverse_increment(&self, z: f64, h: f64) -> f64 {
        match (z >= 0.0, z + h >= 0.0) {
            (true, true) => h,
            (true, false) => -z,
            (false, true) => z + h,
            (false, false) => 0.0,
        }
    }

    fn linearization_gap(&self, x: f64, z: f64, d: f64) -> f64 {
        (x - z) * d + 0.5 * d * d
    }
}

/// `φ(x) = x ln x`; `τ Σ φ` is the negative entropy.
#[derive(Debug, Clone, Copy, Default)]
pub struct XLogX;

impl Potential for XLogX {
    fn name(&self) -> &str {
        "xlogx"
    }

    fn value(&self, x: f64) -> f64 {
        if x > 0.0 {
            x * x.ln()
        } else {
            0.0
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        x.ln() + 1.0
    }

    fn clipped_inverse(&self, z: f64) -> f64 {
        (z - 1.0).exp()
    }

    fn clipped_inverse_increment(&self, z: f64, h: f64) -> f64 {
        (z - 1.0).exp() * h.exp_m1()
    }

    fn linearization_gap(&self, x: f64, z: f64, d: f64) -> f64 {
        if x > 0.0 {
            let y = x + d;
            let head = if y > 0.0 { y * (d / x).ln_1p() } else { 0.0 };
            head - d + (x.ln() + 1.0 - z) * d
        } else {
            self.value(d) - z * d
        }
    }

    fn has_barrier(&self) -> bool {
        true
    }
}

static QUADRATIC: Quadratic = Quadratic;

#[derive(Clone)]
pub enum Regularizer {
    /// `Ω(π) = τ Σ_a π_a ln π_a`.
    NegEntropy { tau: f64 },
    /// `Ω(π) = (τ/2) ‖π‖²`.
    SquaredNorm { tau: f64 },
    /// `Ω(π) = τ Σ_a φ(π_a)`.
    Separable { potential: Arc<dyn Potential>, tau: f64 },
}

impl fmt::Debug for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::Separable { potential, tau } => {
                write!(f, "Separable({}, tau={tau})", potential.name())
            }
            other => write!(f, "{other}"),
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::NegEntropy { tau } => write!(f, "entropy:{tau}"),
            Regularizer::SquaredNorm { tau } => write!(f, "l2:{tau}"),
            Regularizer::Separable { potential, tau } => {
                write!(f, "{}:{tau}", potential.name())
            }
        }
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    /// Parses `entropy:TAU` or `l2:TAU`.
    fn from_str(spec: &str) -> Result<Self> {
        let bad = |token: &str, reason: &str| Error::RegularizerSpec {
            token: token.to_string(),
            reason: reason.to_string(),
        };
        let (kind, tau) = spec
            .split_once(':')
            .ok_or_else(|| bad(spec, "expected KIND:TAU"))?;
        let tau: f64 = tau
            .trim()
            .parse()
            .map_err(|_| bad(tau, "strength is not a number"))?;
        let reg = match kind.trim() {
            "entropy" => Regularizer::neg_entropy(tau),
            "l2" => Regularizer::squared_norm(tau),
            other => return Err(bad(other, "unknown kind (expected `entropy` or `l2`)")),
        };
        reg.map_err(|_| bad(&tau.to_string(), "strength must be finite and positive"))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("regularization strength {tau} must be positive")))
    }
}

impl Regularizer {
    pub fn neg_entropy(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Regularizer::NegEntropy { tau })
    }

    pub fn squared_norm(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Regularizer::SquaredNorm { tau })
    }

    pub fn separable(potential: Arc<dyn Potential>, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Regularizer::Separable { potential, tau })
    }

    pub fn tau(&self) -> f64 {
        match self {
            Regularizer::NegEntropy { tau }
            | Regularizer::SquaredNorm { tau }
            | Regularizer::Separable { tau, .. } => *tau,
        }
    }

    /// True when the maximizer of `⟨q, π⟩ − Ω(π)` lies in the relative
    /// interior for every finite `q`, regardless of how small its entries get.
    pub fn interior_guaranteed(&self) -> bool {
        match self {
            Regularizer::NegEntropy { .. } => true,
            Regularizer::SquaredNorm { .. } => false,
            Regularizer::Separable { potential, .. } => potential.has_barrier(),
        }
    }

    fn potential(&self) -> Option<&dyn Potential> {
        match self {
            Regularizer::NegEntropy { .. } => None,
            Regularizer::SquaredNorm { .. } => Some(&QUADRATIC),
            Regularizer::Separable { potential, .. } => Some(potential.as_ref()),
        }
    }

    pub fn omega(&self, pi: &[f64]) -> Result<f64> {
        check_simplex(pi)?;
        Ok(self.omega_unchecked(pi))
    }

    pub(crate) fn omega_unchecked(&self, pi: &[f64]) -> f64 {
        let tau = self.tau();
        match self {
            Regularizer::NegEntropy { .. } => tau * pi.iter().map(|&p| XLogX.value(p)).sum::<f64>(),
            Regularizer::SquaredNorm { .. } => 0.5 * tau * dot(pi, pi),
            Regularizer::Separable { potential, .. } => {
                tau * pi.iter().map(|&p| potential.value(p)).sum::<f64>()
            }
        }
    }

    /// `∇Ω(π)`. Undefined on the boundary for barrier regularizers.
    pub fn grad_omega(&self, pi: &[f64]) -> Result<Vec<f64>> {
        check_simplex(pi)?;
        if self.interior_guaranteed() {
            if let Some((index, &value)) = pi.iter().enumerate().find(|(_, &p)| p <= 0.0) {
                return Err(Error::GradientDomain { index, value });
            }
        }
        let tau = self.tau();
        Ok(match self {
            Regularizer::NegEntropy { .. } => pi.iter().map(|p| tau * (p.ln() + 1.0)).collect(),
            Regularizer::SquaredNorm { .. } => pi.iter().map(|p| tau * p).collect(),
            Regularizer::Separable { potential, .. } => {
                pi.iter().map(|&p| tau * potential.derivative(p)).collect()
            }
        })
    }

    /// `D_Ω(π, π') = Ω(π) − Ω(π') − ∇Ω(π')ᵀ(π − π')`.
    pub fn bregman(&self, pi: &[f64], pi_prime: &[f64]) -> Result<f64> {
        if pi.len() != pi_prime.len() {
            return Err(Error::Shape(format!(
                "bregman arguments have lengths {} and {}",
                pi.len(),
                pi_prime.len()
            )));
        }
        let grad = self.grad_omega(pi_prime)?;
        let lin: f64 = grad
            .iter()
            .zip(pi.iter().zip(pi_prime))
            .map(|(g, (p, pp))| g * (p - pp))
            .sum();
        Ok(self.omega(pi)? - self.omega_unchecked(pi_prime) - lin)
    }

    /// Solves `max_{π ∈ Δ} ⟨q, π⟩ − Ω(π)`.
    pub fn simplex_max(&self, q: &[f64]) -> Result<SimplexMaxResult> {
        check_scores(q)?;
        match self.potential() {
            None => Ok(softmax_max(self.tau(), q)),
            Some(potential) => separable_max(potential, self.tau(), q),
        }
    }

    /// `f(q + δ) − f(q)` for `f(q) = max_{π ∈ Δ} ⟨q, π⟩ − Ω(π)`, formed
    /// without subtracting the two (possibly large) maxima. The result is a
    /// convex combination of `δ` minus a non-negative second-order term, so it
    /// is bounded by `‖δ‖_∞` up to a few ulps of `‖δ‖_∞` itself.
    pub fn value_increment(&self, q: &[f64], delta: &[f64]) -> Result<f64> {
        check_scores(q)?;
        check_scores(delta)?;
        if q.len() != delta.len() {
            return Err(Error::Shape("value_increment: q and delta differ in length".into()));
        }
        let tau = self.tau();
        match self.potential() {
            None => {
                let largest = delta.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
                if largest / tau > 32.0 {
                    let shifted: Vec<f64> = q.iter().zip(delta).map(|(a, b)| a + b).collect();
                    return Ok(tau * (log_sum_exp(&shifted, tau) - log_sum_exp(q, tau)));
                }
                let base = softmax_max(tau, q);
                let mix: f64 = base
                    .argmax
                    .iter()
                    .zip(delta)
                    .map(|(p, d)| p * (d / tau).exp_m1())
                    .sum();
                Ok(tau * mix.ln_1p())
            }
            Some(potential) => separable_increment(potential, tau, q, delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexMaxResult {
    pub argmax: Vec<f64>,
    /// `⟨q, π⋆⟩ − Ω(π⋆)`.
    pub value: f64,
    /// [`is_relint`] at [`DEFAULT_RELINT_EPS`].
    pub interior: bool,
    /// Multiplier `ν` of the simplex constraint; `q − ∇Ω(π⋆) = ν·1` on the support.
    pub multiplier: f64,
}

/// `min_a π_a > epsilon`.
pub fn is_relint(pi: &[f64], epsilon: f64) -> bool {
    pi.iter().all(|&p| p > epsilon)
}

/// `Σ_a p_a ln(p_a / q_a)` with `0 ln 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pa, _)| **pa > 0.0)
        .map(|(pa, qa)| pa * (pa / qa).ln())
        .sum()
}

/// `ln Σ_a exp(q_a / τ)`, shifted by the maximum before exponentiating.
pub fn log_sum_exp(q: &[f64], tau: f64) -> f64 {
    let m = q.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) / tau;
    m + q.iter().map(|&x| (x / tau - m).exp()).sum::<f64>().ln()
}

fn softmax_max(tau: f64, q: &[f64]) -> SimplexMaxResult {
    let m = q.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) / tau;
    let weights: Vec<f64> = q.iter().map(|&x| (x / tau - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    let lse = m + total.ln();
    let argmax: Vec<f64> = weights.iter().map(|w| w / total).collect();
    SimplexMaxResult {
        interior: is_relint(&argmax, DEFAULT_RELINT_EPS),
        argmax,
        value: tau * lse,
        multiplier: tau * lse - tau,
    }
}

fn check_simplex(pi: &[f64]) -> Result<()> {
    let sum: f64 = pi.iter().sum();
    let min = pi.iter().fold(f64::INFINITY, |m, &p| m.min(p));
    if pi.is_empty() || !(min >= -SIMPLEX_TOL) || !((sum - 1.0).abs() <= SIMPLEX_TOL) {
        return Err(Error::NotOnSimplex { sum, min });
    }
    Ok(())
}

fn check_scores(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return Err(Error::InvalidArgument("empty score vector".into()));
    }
    if let Some(bad) = q.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite score {bad}")));
    }
    Ok(())
}

/// Bisection for the multiplier `ν` solving `Σ_a ψ((q_a − ν)/τ) = 1`.
fn solve_multiplier(potential: &dyn Potential, tau: f64, q: &[f64]) -> Result<f64> {
    let n = q.len() as f64;
    let mass = |nu: f64| q.iter().map(|&qa| potential.clipped_inverse((qa - nu) / tau)).sum::<f64>();
    let q_max = q.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    // At `lo` the best action alone gets mass 1; at `hi` every action gets at most 1/n.
    let mut lo = q_max - tau * potential.derivative(1.0);
    let mut hi = q_max - tau * potential.derivative(1.0 / n);
    let (lo_mass, hi_mass) = (mass(lo), mass(hi));
    if !(lo <= hi) || !(lo_mass >= 1.0 - BISECTION_TOL) || !(hi_mass <= 1.0 + BISECTION_TOL) {
        return Err(Error::NotBracketed {
            low: lo,
            high: hi,
            low_sum: lo_mass,
            high_sum: hi_mass,
        });
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = mass(mid);
        if m > 1.0 {
            lo = mid;
        } else if m < 1.0 {
            hi = mid;
        } else {
            return Ok(mid);
        }
    }
    let nu = if (mass(lo) - 1.0).abs() <= (mass(hi) - 1.0).abs() {
        lo
    } else {
        hi
    };
    let residual = (mass(nu) - 1.0).abs();
    if residual > BISECTION_TOL {
        return Err(Error::SimplexConstraint { residual });
    }
    Ok(nu)
}

fn separable_max(potential: &dyn Potential, tau: f64, q: &[f64]) -> Result<SimplexMaxResult> {
    let nu = solve_multiplier(potential, tau, q)?;
    let mut argmax: Vec<f64> = q
        .iter()
        .map(|&qa| potential.clipped_inverse((qa - nu) / tau))
        .collect();
    let total: f64 = argmax.iter().sum();
    argmax.iter_mut().for_each(|p| *p /= total);
    let value = dot(q, &argmax) - tau * argmax.iter().map(|&p| potential.value(p)).sum::<f64>();
    Ok(SimplexMaxResult {
        interior: is_relint(&argmax, DEFAULT_RELINT_EPS),
        argmax,
        value,
        multiplier: nu,
    })
}

fn separable_increment(
    potential: &dyn Potential,
    tau: f64,
    q: &[f64],
    delta: &[f64],
) -> Result<f64> {
    let nu = solve_multiplier(potential, tau, q)?;
    let z: Vec<f64> = q.iter().map(|&qa| (qa - nu) / tau).collect();
    let base: Vec<f64> = z.iter().map(|&za| potential.clipped_inverse(za)).collect();
    let shift = |d_nu: f64| -> Vec<f64> {
        z.iter()
            .zip(delta)
            .map(|(&za, &da)| potential.clipped_inverse_increment(za, (da - d_nu) / tau))
            .collect()
    };
    let net = |d_nu: f64| shift(d_nu).iter().sum::<f64>();
    // The multiplier moves by at most the range of δ.
    let mut lo = delta.iter().fold(f64::INFINITY, |m, &d| m.min(d));
    let mut hi = delta.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d));
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = net(mid);
        if m > 0.0 {
            lo = mid;
        } else if m < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }
    let d_nu = if net(lo).abs() <= net(hi).abs() { lo } else { hi };
    let step = shift(d_nu);
    let mass: f64 = base.iter().sum();
    let linear: f64 = delta
        .iter()
        .zip(base.iter().zip(&step))
        .map(|(dl, (b, s))| dl * (b + s))
        .sum::<f64>()
        / mass;
    let curvature: f64 = base
        .iter()
        .zip(z.iter().zip(&step))
        .map(|(&x, (&za, &d))| potential.linearization_gap(x, za, d))
        .sum();
    Ok(linear - tau * curvature)
}
