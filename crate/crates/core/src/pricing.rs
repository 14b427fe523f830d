//! Black-Scholes pricing with a complex volatility.
//!
//! Two equivalent forms are provided: the discounted price `f(σ)` and the
//! normalized price `h(σ̂)` of total volatility `σ̂ = σ√T`, related by
//! `f(σ) = e^{-rT} √(FK) · h(σ√T)`. Both are analytic on `ℂ \ {0}`; the origin
//! is rejected and nothing near it is regularized.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::special::{self, cnorm_cdf, SpecialError};

const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_MAX: f64 = 709.782712893384;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("volatility is zero, an essential singularity of the price")]
    SingularInput,
    #[error("value exceeds the representable floating-point range")]
    Overflow,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl From<SpecialError> for PricingError {
    fn from(e: SpecialError) -> Self {
        match e {
            SpecialError::Overflow => PricingError::Overflow,
            SpecialError::InvalidInput => {
                PricingError::InvalidInput("non-finite volatility".to_string())
            }
        }
    }
}

/// Call (`θ = +1`) or put (`θ = -1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Call,
    Put,
}

impl Parity {
    /// The sign `θ`.
    pub fn theta(self) -> f64 {
        match self {
            Parity::Call => 1.0,
            Parity::Put => -1.0,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Call => f.write_str("call"),
            Parity::Put => f.write_str("put"),
        }
    }
}

/// Market inputs shared by every option on the same underlying and maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Market {
    pub spot: f64,
    /// Continuously compounded domestic rate, per year.
    pub domestic_rate: f64,
    /// Continuous dividend yield or foreign rate, per year.
    pub dividend_rate: f64,
    /// Years.
    pub maturity: f64,
}

impl Market {
    pub fn new(
        spot: f64,
        domestic_rate: f64,
        dividend_rate: f64,
        maturity: f64,
    ) -> Result<Self, PricingError> {
        if !(spot.is_finite() && spot > 0.0) {
            return Err(PricingError::InvalidInput(format!(
                "spot must be positive, got {spot}"
            )));
        }
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(PricingError::InvalidInput(format!(
                "maturity must be positive, got {maturity}"
            )));
        }
        if !domestic_rate.is_finite() || !dividend_rate.is_finite() {
            return Err(PricingError::InvalidInput(
                "rates must be finite".to_string(),
            ));
        }
        Ok(Market {
            spot,
            domestic_rate,
            dividend_rate,
            maturity,
        })
    }

    /// `F = S₀ e^{(r-d)T}`.
    pub fn forward(&self) -> f64 {
        self.spot * ((self.domestic_rate - self.dividend_rate) * self.maturity).exp()
    }

    /// `e^{-rT}`.
    pub fn discount(&self) -> f64 {
        (-self.domestic_rate * self.maturity).exp()
    }
}

/// A European option on a [`Market`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub market: Market,
    pub strike: f64,
    pub parity: Parity,
}

impl OptionSpec {
    pub fn new(market: Market, strike: f64, parity: Parity) -> Result<Self, PricingError> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(PricingError::InvalidInput(format!(
                "strike must be positive, got {strike}"
            )));
        }
        Ok(OptionSpec {
            market,
            strike,
            parity,
        })
    }

    /// Log-moneyness `a = ln(F/K)`.
    pub fn log_moneyness(&self) -> f64 {
        (forward(self) / self.strike).ln()
    }

    pub fn with_parity(self, parity: Parity) -> Self {
        OptionSpec { parity, ..self }
    }
}

pub fn forward(spec: &OptionSpec) -> f64 {
    spec.market.forward()
}

/// Quantities of the normalized equation `b = h(σ̂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedProblem {
    /// `a = ln(F/K)`.
    pub log_moneyness: f64,
    /// `b = V e^{rT} / √(FK)`.
    pub target: f64,
    /// `τ = 2θ H(θa) sinh(a/2)`.
    pub intrinsic: f64,
    pub forward: f64,
    /// `e^{-rT}`.
    pub discount: f64,
    pub maturity: f64,
    pub parity: Parity,
    /// `√(FK)`, the price scale between `f` and `h`.
    pub scale: f64,
}

impl NormalizedProblem {
    /// Normalizes the market price `price` of `spec`.
    pub fn new(spec: &OptionSpec, price: f64) -> Result<Self, PricingError> {
        if !price.is_finite() {
            return Err(PricingError::InvalidInput(format!(
                "price must be finite, got {price}"
            )));
        }
        let forward = forward(spec);
        let log_moneyness = (forward / spec.strike).ln();
        let discount = spec.market.discount();
        let scale = (forward * spec.strike).sqrt();
        Ok(NormalizedProblem {
            log_moneyness,
            target: price / (discount * scale),
            intrinsic: intrinsic(log_moneyness, spec.parity),
            forward,
            discount,
            maturity: spec.market.maturity,
            parity: spec.parity,
            scale,
        })
    }

    /// Problem whose target price is the Black-Scholes price at the real
    /// volatility `sigma`.
    pub fn from_volatility(spec: &OptionSpec, sigma: f64) -> Result<Self, PricingError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(PricingError::InvalidInput(format!(
                "volatility must be positive, got {sigma}"
            )));
        }
        let price = bs_price(Complex64::new(sigma, 0.0), spec)?.re;
        Self::new(spec, price)
    }

    /// Same market and target, opposite option type.
    pub fn with_parity(self, parity: Parity) -> Self {
        NormalizedProblem {
            parity,
            intrinsic: intrinsic(self.log_moneyness, parity),
            ..self
        }
    }

    /// Supremum of `h` on the positive real axis: `e^{θa/2}`.
    pub fn upper_bound(&self) -> f64 {
        (0.5 * self.parity.theta() * self.log_moneyness).exp()
    }
}

fn check_sigma(sigma: Complex64) -> Result<(), PricingError> {
    if !sigma.re.is_finite() || !sigma.im.is_finite() {
        return Err(PricingError::InvalidInput(
            "non-finite volatility".to_string(),
        ));
    }
    if sigma.re == 0.0 && sigma.im == 0.0 {
        return Err(PricingError::SingularInput);
    }
    Ok(())
}

/// `f(σ) = e^{-rT} θ {F Φ(θ d₊) − K Φ(θ d₋)}`,
/// `d± = ln(F/K)/(σ√T) ± σ√T/2`.
pub fn bs_price(sigma: Complex64, spec: &OptionSpec) -> Result<Complex64, PricingError> {
    check_sigma(sigma)?;
    let theta = spec.parity.theta();
    let forward = forward(spec);
    let a = (forward / spec.strike).ln();
    let total = sigma * spec.market.maturity.sqrt();
    let ratio = a / total;
    let d_plus = ratio + 0.5 * total;
    let d_minus = ratio - 0.5 * total;
    let n_plus = cnorm_cdf(theta * d_plus)?;
    let n_minus = cnorm_cdf(theta * d_minus)?;
    let v = (n_plus * forward - n_minus * spec.strike) * (theta * spec.market.discount());
    finite(v)
}

/// `h(σ̂) = θ e^{a/2} Φ(θ(a/σ̂ + σ̂/2)) − θ e^{-a/2} Φ(θ(a/σ̂ − σ̂/2))`.
pub fn normalized_price(
    sigma_hat: Complex64,
    problem: &NormalizedProblem,
) -> Result<Complex64, PricingError> {
    check_sigma(sigma_hat)?;
    let a = problem.log_moneyness;
    let theta = problem.parity.theta();
    let ratio = a / sigma_hat;
    let n_plus = cnorm_cdf(theta * (ratio + 0.5 * sigma_hat))?;
    let n_minus = cnorm_cdf(theta * (ratio - 0.5 * sigma_hat))?;
    let v = (n_plus * (0.5 * a).exp() - n_minus * (-0.5 * a).exp()) * theta;
    finite(v)
}

/// `h'(σ̂) = exp(−a²/(2σ̂²) − σ̂²/8) / √(2π)`, independent of `θ`.
pub fn normalized_vega(
    sigma_hat: Complex64,
    problem: &NormalizedProblem,
) -> Result<Complex64, PricingError> {
    check_sigma(sigma_hat)?;
    let a = problem.log_moneyness;
    let s2 = sigma_hat * sigma_hat;
    let exponent = -(a * a) / (2.0 * s2) - s2 / 8.0;
    if !exponent.re.is_finite() || exponent.re - LN_SQRT_2PI > LN_MAX {
        return Err(PricingError::Overflow);
    }
    let v = if exponent.re < 700.0 {
        exponent.exp() * FRAC_1_SQRT_2PI
    } else {
        Complex64::new(exponent.re - LN_SQRT_2PI, exponent.im).exp()
    };
    finite(v)
}

/// `τ = 2θ H(θa) sinh(a/2)` with `H(0) = 1/2`.
pub fn intrinsic(log_moneyness: f64, parity: Parity) -> f64 {
    let theta = parity.theta();
    let x = theta * log_moneyness;
    if x < 0.0 {
        return 0.0;
    }
    let heaviside = if x > 0.0 { 1.0 } else { 0.5 };
    2.0 * theta * heaviside * (0.5 * log_moneyness).sinh()
}

/// Spot delta `θ e^{-dT} Φ(θ(a/(σ√T) + σ√T/2))` for a real volatility.
pub fn delta(spec: &OptionSpec, sigma: f64) -> Result<f64, PricingError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(PricingError::InvalidInput(format!(
            "volatility must be positive, got {sigma}"
        )));
    }
    let theta = spec.parity.theta();
    let total = sigma * spec.market.maturity.sqrt();
    let d_plus = spec.log_moneyness() / total + 0.5 * total;
    let carry = (-spec.market.dividend_rate * spec.market.maturity).exp();
    Ok(theta * carry * special::norm_cdf(theta * d_plus))
}

/// Strike at which an option on `market` has spot delta `target_delta` at
/// volatility `sigma`:
/// `K = F exp(−θσ√T Φ⁻¹(θ e^{dT} Δ) + σ²T/2)`.
pub fn strike_from_delta(
    market: &Market,
    parity: Parity,
    sigma: f64,
    target_delta: f64,
) -> Result<f64, PricingError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(PricingError::InvalidInput(format!(
            "volatility must be positive, got {sigma}"
        )));
    }
    let theta = parity.theta();
    let p = theta * (market.dividend_rate * market.maturity).exp() * target_delta;
    if !(p > 0.0 && p < 1.0) {
        return Err(PricingError::InvalidInput(format!(
            "delta {target_delta} is unreachable for a {parity}"
        )));
    }
    let q = special::inverse_norm_cdf(p);
    let total = sigma * market.maturity.sqrt();
    Ok(market.forward() * (-theta * total * q + 0.5 * total * total).exp())
}

fn finite(v: Complex64) -> Result<Complex64, PricingError> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(PricingError::Overflow)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_market() -> Market {
        Market::new(102.10, 0.0268, 0.0271, 1.0).unwrap()
    }

    fn atm() -> OptionSpec {
        OptionSpec::new(paper_market(), 102.76, Parity::Call).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn forward_examples() {
        let zero_carry = Market::new(100.0, 0.03, 0.03, 2.5).unwrap();
        assert_eq!(zero_carry.forward(), 100.0);
        let m = paper_market();
        assert!((m.forward() - 102.10 * (-0.0003f64).exp()).abs() < 1e-12);
        let m = Market::new(100.0, 0.05, 0.0, 2.0).unwrap();
        assert!((m.forward() - 100.0 * 0.1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Market::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Market::new(100.0, 0.0, 0.0, -1.0).is_err());
        assert!(Market::new(100.0, f64::NAN, 0.0, 1.0).is_err());
        assert!(OptionSpec::new(paper_market(), -1.0, Parity::Call).is_err());
        assert_eq!(
            bs_price(c(0.0, 0.0), &atm()),
            Err(PricingError::SingularInput)
        );
        let p = NormalizedProblem::from_volatility(&atm(), 0.112).unwrap();
        assert_eq!(
            normalized_price(c(0.0, 0.0), &p),
            Err(PricingError::SingularInput)
        );
        assert_eq!(
            normalized_vega(c(0.0, 0.0), &p),
            Err(PricingError::SingularInput)
        );
        assert!(delta(&atm(), 0.0).is_err());
    }

    #[test]
    fn atm_forward_price_collapses() {
        let m = paper_market();
        let spec = OptionSpec::new(m, m.forward(), Parity::Call).unwrap();
        let v = bs_price(c(0.2, 0.0), &spec).unwrap();
        let expect = m.discount() * m.forward() * (2.0 * special::norm_cdf(0.1) - 1.0);
        assert!((v.re - expect).abs() < 1e-13);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn normalized_atm_collapse_and_large_vol_limit() {
        let m = paper_market();
        let spec = OptionSpec::new(m, m.forward(), Parity::Call).unwrap();
        let p = NormalizedProblem::new(&spec, 1.0).unwrap();
        let h = normalized_price(c(0.112, 0.0), &p).unwrap();
        assert!((h.re - (2.0 * special::norm_cdf(0.056) - 1.0)).abs() < 1e-15);

        let p = NormalizedProblem::new(&atm(), 1.0).unwrap();
        let h = normalized_price(c(40.0, 0.0), &p).unwrap();
        assert!((h.re - (0.5 * p.log_moneyness).exp()).abs() < 1e-15);
    }

    #[test]
    fn normalized_matches_discounted_price() {
        let spec = atm();
        let p = NormalizedProblem::new(&spec, 1.0).unwrap();
        for k in 0..200 {
            let sigma = 0.01 + 1.99 * k as f64 / 199.0;
            let f = bs_price(c(sigma, 0.0), &spec).unwrap();
            let h = normalized_price(c(sigma, 0.0), &p).unwrap();
            let back = h * p.discount * p.scale;
            assert!((back - f).norm() <= 1e-12 * f.norm(), "sigma={sigma}");
        }
        let s = c(0.05, 0.05);
        let f = bs_price(s, &spec).unwrap();
        let h = normalized_price(s, &p).unwrap();
        assert!((h - f / (p.discount * p.scale)).norm() <= 1e-12 * h.norm());
    }

    #[test]
    fn vega_examples() {
        let m = paper_market();
        let spec = OptionSpec::new(m, m.forward(), Parity::Call).unwrap();
        let p = NormalizedProblem::new(&spec, 1.0).unwrap();
        let v = normalized_vega(c(2.0, 0.0), &p).unwrap();
        assert!((v.re - (-0.5f64).exp() * FRAC_1_SQRT_2PI).abs() < 1e-16);

        let p = NormalizedProblem::new(&atm(), 1.0).unwrap();
        let s = c(0.112, 0.0);
        let eps = 1e-6;
        let fd = (normalized_price(s + eps, &p).unwrap() - normalized_price(s - eps, &p).unwrap())
            / (2.0 * eps);
        let v = normalized_vega(s, &p).unwrap();
        assert!((fd - v).norm() <= 1e-7 * v.norm());

        // -a²/(2(iy)²) = +a²/(2y²) blows up on the imaginary axis
        assert_eq!(
            normalized_vega(c(0.0, 1e-4), &p),
            Err(PricingError::Overflow)
        );
    }

    #[test]
    fn intrinsic_examples() {
        assert_eq!(intrinsic(0.0, Parity::Call), 0.0);
        assert_eq!(intrinsic(0.0, Parity::Put), 0.0);
        assert_eq!(intrinsic(0.2, Parity::Call), 2.0 * 0.1f64.sinh());
        assert_eq!(intrinsic(-0.2, Parity::Call), 0.0);
        assert_eq!(intrinsic(-0.2, Parity::Put), 2.0 * 0.1f64.sinh());
        assert_eq!(intrinsic(0.2, Parity::Put), 0.0);
    }

    #[test]
    fn delta_examples() {
        let m = paper_market();
        let spec = OptionSpec::new(m, m.forward(), Parity::Call).unwrap();
        let d = delta(&spec, 0.2).unwrap();
        let carry = (-m.dividend_rate).exp();
        assert!((d - carry * special::norm_cdf(0.1)).abs() < 1e-15);

        let call25 = OptionSpec::new(m, 113.85, Parity::Call).unwrap();
        assert!((delta(&call25, 0.15).unwrap() - 0.25).abs() < 0.01);
        let put10 = OptionSpec::new(m, 76.74, Parity::Put).unwrap();
        assert!((delta(&put10, 0.25).unwrap() + 0.10).abs() < 0.01);
    }

    #[test]
    fn strike_from_delta_examples() {
        let m = paper_market();
        let half = (-m.dividend_rate * m.maturity).exp() / 2.0;
        let k = strike_from_delta(&m, Parity::Call, 0.2, half).unwrap();
        assert!((k - m.forward() * (0.02f64).exp()).abs() < 1e-10);

        for (parity, sigma, d, published) in [
            (Parity::Call, 0.15, 0.25, 113.85),
            (Parity::Put, 0.20, -0.25, 91.40),
            (Parity::Call, 0.16, 0.10, 126.50),
            (Parity::Put, 0.25, -0.10, 76.74),
        ] {
            let k = strike_from_delta(&m, parity, sigma, d).unwrap();
            assert!((k / published - 1.0).abs() < 0.005, "{parity} {d}: {k}");
            let spec = OptionSpec::new(m, k, parity).unwrap();
            assert!((delta(&spec, sigma).unwrap() - d).abs() <= 1e-10);
        }
    }

    #[test]
    fn strike_from_delta_rejects_unreachable() {
        let m = paper_market();
        assert!(strike_from_delta(&m, Parity::Call, 0.2, -0.25).is_err());
        assert!(strike_from_delta(&m, Parity::Put, 0.2, 0.25).is_err());
        assert!(strike_from_delta(&m, Parity::Call, 0.2, 1.0).is_err());
        assert!(strike_from_delta(&m, Parity::Call, 0.2, 0.0).is_err());
    }

    #[test]
    fn conjugate_symmetry() {
        let spec = atm();
        let p = NormalizedProblem::from_volatility(&spec, 0.112).unwrap();
        for s in [c(0.1, 0.3), c(-0.4, 0.05), c(1.2, -0.7)] {
            let f = bs_price(s, &spec).unwrap();
            assert_eq!(bs_price(s.conj(), &spec).unwrap(), f.conj());
            let h = normalized_price(s, &p).unwrap();
            assert_eq!(normalized_price(s.conj(), &p).unwrap(), h.conj());
            let v = normalized_vega(s, &p).unwrap();
            assert!((normalized_vega(s.conj(), &p).unwrap() - v.conj()).norm() <= 1e-15 * v.norm());
        }
    }
}
