//! Exponents and constants derived from the gradient exponent `p`.
//!
//! Everything that depends only on `p` lives in [`ExponentContext`]: the scaling
//! exponent `beta = 1/(p-1)`, the self-similar time exponent
//! `gamma = (p-2)/(2(p-1))`, the amplitude `c_p` of the one-dimensional
//! stationary solutions and the limit `L = p^{-beta}/(beta+1)` of
//! `phi(y)/y^{beta+1}` for the self-similar profiles.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subquadratic,
    Quadratic,
    Superquadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentContext {
    pub p: f64,
    pub beta: f64,
    pub gamma_ss: f64,
    /// `beta^beta / |1 - beta|`; absent for `p = 2`.
    pub c_p: Option<f64>,
    #[serde(rename = "L_limit")]
    pub l_limit: f64,
    pub regime: Regime,
}

impl ExponentContext {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return Err(invalid("p", format!("expected p > 1, got {p}")));
        }
        let beta = 1.0 / (p - 1.0);
        let gamma_ss = (p - 2.0) / (2.0 * (p - 1.0));
        let regime = if p < 2.0 {
            Regime::Subquadratic
        } else if p == 2.0 {
            Regime::Quadratic
        } else {
            Regime::Superquadratic
        };
        let c_p = match regime {
            Regime::Quadratic => None,
            _ => Some(beta.powf(beta) / (1.0 - beta).abs()),
        };
        let l_limit = p.powf(-beta) / (beta + 1.0);
        Ok(Self {
            p,
            beta,
            gamma_ss,
            c_p,
            l_limit,
            regime,
        })
    }

    /// `|s|^p`, returning exactly zero at `s = 0`.
    #[inline]
    pub fn pow_p(&self, s: f64) -> f64 {
        pow_abs(s, self.p)
    }
}

/// `|s|^q` computed as `exp(q ln|s|)`; zero at the origin.
#[inline]
pub fn pow_abs(s: f64, q: f64) -> f64 {
    let a = s.abs();
    if a == 0.0 {
        0.0
    } else {
        (q * a.ln()).exp()
    }
}

/// Shorthand for [`ExponentContext::new`].
pub fn make_context(p: f64) -> Result<ExponentContext> {
    ExponentContext::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p3_values() {
        let ctx = make_context(3.0).unwrap();
        assert_eq!(ctx.beta, 0.5);
        assert_eq!(ctx.gamma_ss, 0.25);
        // 3^{-1/2} / 1.5
        assert!((ctx.l_limit - 0.384_900_179_459_750_5).abs() < 1e-12);
        assert!((ctx.c_p.unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(ctx.regime, Regime::Superquadratic);
    }

    #[test]
    fn p2_is_quadratic_without_cp() {
        let ctx = make_context(2.0).unwrap();
        assert_eq!(ctx.beta, 1.0);
        assert_eq!(ctx.gamma_ss, 0.0);
        assert_eq!(ctx.regime, Regime::Quadratic);
        assert!(ctx.c_p.is_none());
    }

    #[test]
    fn p_three_halves() {
        let ctx = make_context(1.5).unwrap();
        assert_eq!(ctx.beta, 2.0);
        assert_eq!(ctx.gamma_ss, -0.5);
        assert!((ctx.c_p.unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(ctx.regime, Regime::Subquadratic);
    }

    #[test]
    fn rejects_p_at_most_one() {
        assert!(make_context(1.0).is_err());
        assert!(make_context(0.5).is_err());
        assert!(make_context(f64::NAN).is_err());
    }

    #[test]
    fn pow_abs_zero() {
        assert_eq!(pow_abs(0.0, 1.5), 0.0);
        assert!((pow_abs(-2.0, 3.0) - 8.0).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn identities(p in 1.0001f64..20.0) {
            let ctx = make_context(p).unwrap();
            prop_assert!((ctx.beta * (p - 1.0) - 1.0).abs() <= 1e-14);
            prop_assert!((ctx.beta * p - (ctx.beta + 1.0)).abs() <= 1e-12 * (1.0 + ctx.beta));
            prop_assert!((ctx.gamma_ss - (1.0 - ctx.beta) / 2.0).abs() <= 1e-12 * (1.0 + ctx.beta));
            prop_assert!(ctx.l_limit > 0.0);
            if p != 2.0 {
                prop_assert!(ctx.c_p.unwrap() > 0.0);
            }
        }
    }
}
