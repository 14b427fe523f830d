//! Market presets: the at-the-money quote and four delta-parameterized wings
//! sharing its market data.
//!
//! Target prices are manufactured from the quoted volatility, since only vols
//! are quoted.

use crate::pricing::{self, Market, NormalizedProblem, OptionSpec, Parity, PricingError};

pub const SPOT: f64 = 102.10;
pub const ATM_STRIKE: f64 = 102.76;
pub const DOMESTIC_RATE: f64 = 0.0268;
pub const DIVIDEND_RATE: f64 = 0.0271;
pub const MATURITY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivation {
    ExplicitStrike(f64),
    /// Strike implied by a spot delta at the scenario's volatility.
    FromDelta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub parity: Parity,
    /// Quoted volatility in vols.
    pub market_vol: f64,
    pub derivation: Derivation,
    /// Strike as published, rounded to two decimals.
    pub quoted_strike: f64,
}

pub const PRESETS: [Preset; 5] = [
    Preset {
        name: "atm",
        parity: Parity::Call,
        market_vol: 11.2,
        derivation: Derivation::ExplicitStrike(ATM_STRIKE),
        quoted_strike: ATM_STRIKE,
    },
    Preset {
        name: "put10",
        parity: Parity::Put,
        market_vol: 25.0,
        derivation: Derivation::FromDelta(-0.10),
        quoted_strike: 76.74,
    },
    Preset {
        name: "put25",
        parity: Parity::Put,
        market_vol: 20.0,
        derivation: Derivation::FromDelta(-0.25),
        quoted_strike: 91.40,
    },
    Preset {
        name: "call10",
        parity: Parity::Call,
        market_vol: 16.0,
        derivation: Derivation::FromDelta(0.10),
        quoted_strike: 126.50,
    },
    Preset {
        name: "call25",
        parity: Parity::Call,
        market_vol: 15.0,
        derivation: Derivation::FromDelta(0.25),
        quoted_strike: 113.85,
    },
];

pub fn market() -> Market {
    Market::new(SPOT, DOMESTIC_RATE, DIVIDEND_RATE, MATURITY).expect("preset market data is valid")
}

/// A preset with its strike and target price evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub preset: Preset,
    pub spec: OptionSpec,
    /// Quoted volatility as a decimal.
    pub sigma: f64,
    /// Discounted price at `sigma`.
    pub price: f64,
}

impl Scenario {
    pub fn from_preset(preset: Preset) -> Result<Self, PricingError> {
        let market = market();
        let sigma = preset.market_vol / 100.0;
        let strike = match preset.derivation {
            Derivation::ExplicitStrike(k) => k,
            Derivation::FromDelta(delta) => {
                pricing::strike_from_delta(&market, preset.parity, sigma, delta)?
            }
        };
        let spec = OptionSpec::new(market, strike, preset.parity)?;
        let price = pricing::bs_price(sigma.into(), &spec)?.re;
        Ok(Scenario {
            preset,
            spec,
            sigma,
            price,
        })
    }

    pub fn by_name(name: &str) -> Option<Result<Self, PricingError>> {
        PRESETS
            .iter()
            .find(|p| p.name == name)
            .map(|p| Self::from_preset(*p))
    }

    pub fn all() -> Result<Vec<Self>, PricingError> {
        PRESETS.iter().map(|p| Self::from_preset(*p)).collect()
    }

    pub fn atm() -> Self {
        Self::from_preset(PRESETS[0]).expect("atm preset is valid")
    }

    pub fn name(&self) -> &'static str {
        self.preset.name
    }

    pub fn problem(&self) -> Result<NormalizedProblem, PricingError> {
        NormalizedProblem::new(&self.spec, self.price)
    }

    /// Quoted volatility in total-volatility units `σ√T`.
    pub fn total_vol(&self) -> f64 {
        self.sigma * self.spec.market.maturity.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atm_uses_quoted_strike() {
        let s = Scenario::atm();
        assert_eq!(s.spec.strike, 102.76);
        assert_eq!(s.spec.parity, Parity::Call);
        assert!(s.price > 0.0);
        let p = s.problem().unwrap();
        assert!(p.log_moneyness < 0.0);
        assert_eq!(p.intrinsic, 0.0);
    }

    #[test]
    fn wing_strikes_match_quotes() {
        for s in Scenario::all().unwrap() {
            let rel = (s.spec.strike - s.preset.quoted_strike).abs() / s.preset.quoted_strike;
            assert!(
                rel <= 5e-3,
                "{}: {} vs {}",
                s.name(),
                s.spec.strike,
                s.preset.quoted_strike
            );
        }
    }

    #[test]
    fn wing_deltas_round_trip() {
        for s in Scenario::all().unwrap() {
            if let Derivation::FromDelta(d) = s.preset.derivation {
                let got = pricing::delta(&s.spec, s.sigma).unwrap();
                assert!((got - d).abs() < 1e-10, "{}: {got}", s.name());
            }
        }
    }

    #[test]
    fn unknown_name() {
        assert!(Scenario::by_name("straddle").is_none());
        assert!(Scenario::by_name("call10").unwrap().is_ok());
    }
}
