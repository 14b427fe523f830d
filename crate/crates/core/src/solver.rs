//! Newton-Raphson iteration for the normalized implied-volatility equation.
//!
//! Two update rules are available:
//!
//! * [`Mode::Raw`] solves `h(σ̂) = b` directly:
//!   `σ̂ₙ₊₁ = σ̂ₙ − (h(σ̂ₙ) − b) / h'(σ̂ₙ)`.
//! * [`Mode::JackelLog`] solves `ln((h(σ̂) − τ)/(b − τ)) = 0` on the principal
//!   branch: `σ̂ₙ₊₁ = σ̂ₙ − (h − τ) ln((h − τ)/(b − τ)) / h'`.
//!
//! Iteration stops when `|σ̂ₙ₊₁ − σ̂ₙ| / |σ̂ₙ| ≤ ε` or after `L` updates. No
//! damping or safeguarding is applied; the point is to expose the raw map.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::pricing::{normalized_price, normalized_vega, NormalizedProblem, PricingError};

/// Largest residual `|h(root) − b|` accepted for a converged outcome.
pub const MAX_CONVERGED_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Raw,
    JackelLog,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Raw => f.write_str("raw"),
            Mode::JackelLog => f.write_str("jackel"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mode: Mode,
    /// Relative-change tolerance `ε`.
    pub tolerance: f64,
    /// Update cap `L`.
    pub max_iterations: u32,
    /// Distance to the reference real root below which a root counts as real.
    pub real_root_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::Raw,
            tolerance: 1e-8,
            max_iterations: 100,
            real_root_tolerance: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn with_mode(self, mode: Mode) -> Self {
        SolverConfig { mode, ..self }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.real_root_tolerance.is_finite() && self.real_root_tolerance > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "real_root_tolerance must be positive, got {}",
                self.real_root_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("target {target} has no positive real root: h maps (0, inf) onto ({lower}, {upper})")]
    NoRealRoot { target: f64, lower: f64, upper: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

/// Why a single Newton update could not be taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum FailureReason {
    #[error("iteration cap reached")]
    MaxIterations,
    #[error("overflow or non-finite iterate")]
    Overflow,
    #[error("iterate at the singularity sigma = 0")]
    SingularIterate,
    #[error("logarithm argument is zero")]
    InvalidLogArgument,
}

impl From<PricingError> for FailureReason {
    fn from(e: PricingError) -> Self {
        match e {
            PricingError::SingularInput => FailureReason::SingularIterate,
            PricingError::Overflow | PricingError::InvalidInput(_) => FailureReason::Overflow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    ConvergedReal,
    ConvergedComplex,
    Failed(FailureReason),
}

impl Status {
    pub fn is_converged(self) -> bool {
        !matches!(self, Status::Failed(_))
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::ConvergedReal => f.write_str("ConvergedReal"),
            Status::ConvergedComplex => f.write_str("ConvergedComplex"),
            Status::Failed(r) => {
                let name = match r {
                    FailureReason::MaxIterations => "MaxIterations",
                    FailureReason::Overflow => "Overflow",
                    FailureReason::SingularIterate => "SingularIterate",
                    FailureReason::InvalidLogArgument => "InvalidLogArgument",
                };
                write!(f, "Failed({name})")
            }
        }
    }
}

/// Terminal state of one Newton run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOutcome {
    pub status: Status,
    /// Last iterate; `None` on failure.
    pub root: Option<Complex64>,
    /// Number of updates performed.
    pub steps: u32,
    /// `|h(root) − b|`, present on convergence.
    pub residual: Option<f64>,
}

impl SolveOutcome {
    fn failed(reason: FailureReason, steps: u32) -> Self {
        SolveOutcome {
            status: Status::Failed(reason),
            root: None,
            steps,
            residual: None,
        }
    }
}

fn finite_or_overflow(z: Complex64) -> Result<Complex64, FailureReason> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(FailureReason::Overflow)
    }
}

fn check_iterate(sigma_hat: Complex64) -> Result<(), FailureReason> {
    if !sigma_hat.re.is_finite() || !sigma_hat.im.is_finite() {
        return Err(FailureReason::Overflow);
    }
    if sigma_hat.re == 0.0 && sigma_hat.im == 0.0 {
        return Err(FailureReason::SingularIterate);
    }
    Ok(())
}

/// One update of the raw Newton map.
pub fn newton_step_raw(
    sigma_hat: Complex64,
    problem: &NormalizedProblem,
) -> Result<Complex64, FailureReason> {
    check_iterate(sigma_hat)?;
    let h = normalized_price(sigma_hat, problem)?;
    let vega = normalized_vega(sigma_hat, problem)?;
    finite_or_overflow(sigma_hat - (h - problem.target) / vega)
}

/// One update of the log-transformed Newton map.
pub fn newton_step_log(
    sigma_hat: Complex64,
    problem: &NormalizedProblem,
) -> Result<Complex64, FailureReason> {
    check_iterate(sigma_hat)?;
    let shifted_target = problem.target - problem.intrinsic;
    if shifted_target == 0.0 {
        return Err(FailureReason::InvalidLogArgument);
    }
    let shifted = normalized_price(sigma_hat, problem)? - problem.intrinsic;
    if shifted.re == 0.0 && shifted.im == 0.0 {
        return Err(FailureReason::InvalidLogArgument);
    }
    let vega = normalized_vega(sigma_hat, problem)?;
    let log = (shifted / shifted_target).ln();
    finite_or_overflow(sigma_hat - shifted * log / vega)
}

/// The unique `σ̂ > 0` with `h(σ̂) = b`, by bracketing and bisection.
///
/// `h` increases strictly from `τ` to `e^{θa/2}` on the positive real axis, so
/// a root exists exactly when `τ < b < e^{θa/2}`.
pub fn reference_real_root(problem: &NormalizedProblem) -> Result<f64, SolverError> {
    let b = problem.target;
    let lower = problem.intrinsic;
    let upper = problem.upper_bound();
    let no_root = || SolverError::NoRealRoot {
        target: b,
        lower,
        upper,
    };
    if !(b > lower && b < upper) {
        return Err(no_root());
    }
    let h = |s: f64| -> Result<f64, SolverError> {
        Ok(normalized_price(Complex64::new(s, 0.0), problem)?.re)
    };

    let mut hi = 1.0;
    while h(hi)? < b {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(no_root());
        }
    }
    let mut lo = 0.5 * hi;
    while h(lo)? > b {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(no_root());
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid)? < b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (h_lo, h_hi) = (h(lo)?, h(hi)?);
    Ok(if (h_hi - b).abs() < (b - h_lo).abs() {
        hi
    } else {
        lo
    })
}

/// A problem, a configuration and the reference real root, ready to solve
/// from any number of seeds.
#[derive(Debug, Clone, Copy)]
pub struct Solver {
    problem: NormalizedProblem,
    config: SolverConfig,
    reference_root: Option<f64>,
}

impl Solver {
    /// Validates `config` and locates the reference real root once. A target
    /// with no positive real root is allowed; every converged outcome is then
    /// classified as complex.
    pub fn new(problem: NormalizedProblem, config: SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let reference_root = match reference_real_root(&problem) {
            Ok(r) => Some(r),
            Err(SolverError::NoRealRoot { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Solver {
            problem,
            config,
            reference_root,
        })
    }

    pub fn problem(&self) -> &NormalizedProblem {
        &self.problem
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn reference_root(&self) -> Option<f64> {
        self.reference_root
    }

    fn step(&self, sigma_hat: Complex64) -> Result<Complex64, FailureReason> {
        match self.config.mode {
            Mode::Raw => newton_step_raw(sigma_hat, &self.problem),
            Mode::JackelLog => newton_step_log(sigma_hat, &self.problem),
        }
    }

    fn residual(&self, root: Complex64) -> Option<f64> {
        normalized_price(root, &self.problem)
            .ok()
            .map(|h| (h - self.problem.target).norm())
            .filter(|r| r.is_finite())
    }

    /// Runs the iteration from `seed` (a total-volatility coordinate).
    ///
    /// A relative change below `ε` only terminates the run if the residual
    /// at the new iterate is at most [`MAX_CONVERGED_RESIDUAL`]; otherwise
    /// iteration continues.
    pub fn solve(&self, seed: Complex64) -> SolveOutcome {
        let mut current = seed;
        for n in 0..self.config.max_iterations {
            let next = match self.step(current) {
                Ok(next) => next,
                Err(reason) => return SolveOutcome::failed(reason, n),
            };
            let change = (next - current).norm() / current.norm();
            if change <= self.config.tolerance {
                if let Some(residual) = self.residual(next) {
                    if residual <= MAX_CONVERGED_RESIDUAL {
                        return SolveOutcome {
                            status: self.classify(next),
                            root: Some(next),
                            steps: n + 1,
                            residual: Some(residual),
                        };
                    }
                }
            }
            current = next;
        }
        SolveOutcome::failed(FailureReason::MaxIterations, self.config.max_iterations)
    }

    fn classify(&self, root: Complex64) -> Status {
        match self.reference_root {
            Some(r) if (root - r).norm() <= self.config.real_root_tolerance => {
                Status::ConvergedReal
            }
            _ => Status::ConvergedComplex,
        }
    }
}

/// One-off solve; recomputes the reference root. Prefer [`Solver`] for
/// repeated seeds on the same problem.
pub fn solve(
    seed: Complex64,
    problem: &NormalizedProblem,
    config: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    Ok(Solver::new(*problem, *config)?.solve(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::{Market, OptionSpec, Parity};

    fn atm_problem(sigma: f64) -> NormalizedProblem {
        let m = Market::new(102.10, 0.0268, 0.0271, 1.0).unwrap();
        let spec = OptionSpec::new(m, 102.76, Parity::Call).unwrap();
        NormalizedProblem::from_volatility(&spec, sigma).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.tolerance, 1e-8);
        assert_eq!(cfg.max_iterations, 100);
        assert!(cfg.validate().is_ok());
        assert!(SolverConfig {
            tolerance: 0.0,
            ..cfg
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            max_iterations: 0,
            ..cfg
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            real_root_tolerance: -1.0,
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn step_is_fixed_at_the_root() {
        let p = atm_problem(0.112);
        let s = c(0.112, 0.0);
        let p = NormalizedProblem {
            target: normalized_price(s, &p).unwrap().re,
            ..p
        };
        assert_eq!(newton_step_raw(s, &p).unwrap(), s);
        assert_eq!(newton_step_log(s, &p).unwrap(), s);
    }

    #[test]
    fn real_seed_stays_real() {
        let p = atm_problem(0.112);
        assert_eq!(newton_step_raw(c(0.20, 0.0), &p).unwrap().im, 0.0);
        assert_eq!(newton_step_log(c(0.20, 0.0), &p).unwrap().im, 0.0);
    }

    #[test]
    fn steps_match_finite_difference_newton() {
        let p = atm_problem(0.112);
        let s = c(0.20, 0.0);
        let eps = 1e-6;
        let h = |x: Complex64| normalized_price(x, &p).unwrap();
        let dh = (h(s + eps) - h(s - eps)) / (2.0 * eps);
        let raw = s - (h(s) - p.target) / dh;
        assert!((newton_step_raw(s, &p).unwrap() - raw).norm() <= 1e-7);

        assert_eq!(p.intrinsic, 0.0);
        let g = h(s) - p.intrinsic;
        let logged = s - (g / (p.target - p.intrinsic)).ln() / (dh / g);
        assert!((newton_step_log(s, &p).unwrap() - logged).norm() <= 1e-7);
    }

    #[test]
    fn step_errors() {
        let p = atm_problem(0.112);
        assert_eq!(
            newton_step_raw(c(0.0, 0.0), &p),
            Err(FailureReason::SingularIterate)
        );
        assert_eq!(
            newton_step_log(c(0.0, 0.0), &p),
            Err(FailureReason::SingularIterate)
        );
        assert_eq!(
            newton_step_raw(c(0.0, 1e-4), &p),
            Err(FailureReason::Overflow)
        );
        let degenerate = NormalizedProblem {
            target: p.intrinsic,
            ..p
        };
        assert_eq!(
            newton_step_log(c(0.2, 0.0), &degenerate),
            Err(FailureReason::InvalidLogArgument)
        );
    }

    #[test]
    fn reference_root_examples() {
        let p = atm_problem(0.112);
        let r = reference_real_root(&p).unwrap();
        assert!((r - 0.112).abs() <= 1e-12);
        let back = normalized_price(c(r, 0.0), &p).unwrap().re;
        assert!((back - p.target).abs() <= 1e-12);

        let too_big = NormalizedProblem {
            target: p.upper_bound(),
            ..p
        };
        assert!(matches!(
            reference_real_root(&too_big),
            Err(SolverError::NoRealRoot { .. })
        ));
        let too_small = NormalizedProblem {
            target: p.intrinsic,
            ..p
        };
        assert!(matches!(
            reference_real_root(&too_small),
            Err(SolverError::NoRealRoot { .. })
        ));
    }

    #[test]
    fn solve_recovers_atm_vol() {
        let p = atm_problem(0.112);
        let out = solve(c(0.25, 0.0), &p, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, Status::ConvergedReal);
        assert!((out.root.unwrap() - 0.112).norm() <= 1e-8);
        assert!(out.steps <= 15);
        assert!(out.residual.unwrap() <= MAX_CONVERGED_RESIDUAL);
    }

    #[test]
    fn solve_from_origin_fails_immediately() {
        let p = atm_problem(0.112);
        let out = solve(c(0.0, 0.0), &p, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, Status::Failed(FailureReason::SingularIterate));
        assert_eq!(out.steps, 0);
        assert!(out.root.is_none());
    }

    #[test]
    fn near_origin_seed_finds_complex_root() {
        let p = atm_problem(0.112);
        // 0.02+0.02i still lies in the real root's basin; the petals are
        // within about 0.002 of the origin.
        let out = solve(c(0.02, 0.02), &p, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, Status::ConvergedReal);

        let out = solve(c(0.0002, 0.001), &p, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, Status::ConvergedComplex, "{out:?}");
        let root = out.root.unwrap();
        assert!(root.im != 0.0);
        let residual = (normalized_price(root, &p).unwrap() - p.target).norm();
        assert!(residual <= 1e-8);
        // 30-digit Newton iteration of the same map from the same seed
        let reference = c(0.000599874376116, 0.00124455272772);
        assert!((root - reference).norm() <= 1e-12, "{root}");
    }

    #[test]
    fn one_iteration_cap_counts_steps() {
        let p = atm_problem(0.112);
        let cfg = SolverConfig {
            max_iterations: 1,
            ..SolverConfig::default()
        };
        let out = solve(c(0.25, 0.0), &p, &cfg).unwrap();
        assert_eq!(out.status, Status::Failed(FailureReason::MaxIterations));
        assert_eq!(out.steps, 1);
        // A seed already at the root converges on the single allowed update.
        let out = solve(c(0.112, 0.0), &p, &cfg).unwrap();
        assert_eq!(out.status, Status::ConvergedReal);
        assert_eq!(out.steps, 1);
    }
}
