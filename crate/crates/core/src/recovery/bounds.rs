use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blockmodel::Exponent;
use crate::conditions::Certificate;
use crate::error::{Error, Result};

/// Which accuracy guarantee to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// regular recovery under `Q_{s,q}(κ)`, `κ < ½`
    Regular,
    /// regular recovery under `Q_{s,1}(ϰ)`, `ϰ < ½`, and `Q_{s,q}(κ)`
    RegularRefined,
    /// penalized recovery with `λ ≥ 2s` under the same pair of conditions
    Penalized,
}

impl BoundVariant {
    pub const ALL: [BoundVariant; 3] = [BoundVariant::Regular, BoundVariant::RegularRefined, BoundVariant::Penalized];

    pub fn tag(self) -> &'static str {
        match self {
            BoundVariant::Regular => "regular",
            BoundVariant::RegularRefined => "regular_refined",
            BoundVariant::Penalized => "penalized",
        }
    }
}

impl fmt::Display for BoundVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BoundVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bound variant '{s}'")))
    }
}

/// Condition constants entering the bounds: `Q_{s,q}(κ)` and `Q_{s,1}(ϰ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    pub s: usize,
    pub q: Exponent,
    pub kappa: f64,
    pub varkappa: f64,
}

impl BoundParams {
    /// `κ` is the certified constant; `ϰ` is the `q = 1` constant of the same
    /// contrast read off its `Ω`, capped by `κ`.
    pub fn from_certificate(cert: &Certificate) -> Self {
        let varkappa = cert.kappa_at(cert.s, Exponent::ONE).min(cert.kappa);
        Self { s: cert.s, q: cert.q, kappa: cert.kappa, varkappa }
    }
}

/// Evaluated error bound on `L_p(B(x̂ − x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub variant: BoundVariant,
    pub p: Exponent,
    pub value: f64,
    pub kappa: f64,
    pub varkappa: f64,
    pub rho: f64,
    pub s: usize,
    /// guess for `L₁(Bx − [Bx]^s)`
    pub tail: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

/// `q(p − 1)/(p(q − 1))`, continuously extended to `p = 1` (value 0) and
/// `q = ∞` (value `(p − 1)/p`).
pub fn factor_exponent(p: Exponent, q: Exponent) -> f64 {
    match (p, q) {
        (Exponent::Finite(1.0), _) => 0.0,
        (Exponent::Inf, Exponent::Inf) => 1.0,
        (Exponent::Finite(p), Exponent::Inf) => (p - 1.0) / p,
        (Exponent::Finite(p), Exponent::Finite(q)) => q * (p - 1.0) / (p * (q - 1.0)),
        (Exponent::Inf, Exponent::Finite(_)) => f64::NAN,
    }
}

/// Bound for the certificate's own `(s, q, κ)`; see [`BoundParams::from_certificate`].
pub fn error_bound(
    cert: &Certificate,
    p: Exponent,
    rho: f64,
    tail: f64,
    variant: BoundVariant,
    lambda: Option<f64>,
) -> Result<ErrorBound> {
    error_bound_from(BoundParams::from_certificate(cert), p, rho, tail, variant, lambda)
}

pub fn error_bound_from(
    params: BoundParams,
    p: Exponent,
    rho: f64,
    tail: f64,
    variant: BoundVariant,
    lambda: Option<f64>,
) -> Result<ErrorBound> {
    let BoundParams { s, q, kappa, varkappa } = params;
    if s == 0 {
        return Err(Error::InvalidArgument("s must be positive".into()));
    }
    if !(rho >= 0.0 && rho.is_finite() && tail >= 0.0 && tail.is_finite()) {
        return Err(Error::InvalidArgument(format!("ρ and tail must be finite and nonnegative, got {rho}, {tail}")));
    }
    if p > q {
        return Err(Error::InvalidArgument(format!("p = {p} exceeds q = {q}")));
    }
    let sf = s as f64;
    let slack = rho + tail / (2.0 * sf);
    let (value, varkappa, lambda) = match variant {
        BoundVariant::Regular => {
            if kappa >= 0.5 {
                return Err(Error::ConditionViolated(format!("κ = {kappa} ≥ 1/2")));
            }
            let value = 4.0 * (2.0 * sf).powf(p.recip()) / (1.0 - 2.0 * kappa) * slack;
            (value, varkappa.min(kappa), None)
        }
        BoundVariant::RegularRefined | BoundVariant::Penalized => {
            if varkappa >= 0.5 {
                return Err(Error::ConditionViolated(format!("ϰ = {varkappa} ≥ 1/2")));
            }
            if kappa < varkappa {
                return Err(Error::InvalidArgument(format!("κ = {kappa} is below ϰ = {varkappa}")));
            }
            let e = factor_exponent(p, q);
            if variant == BoundVariant::RegularRefined {
                let value = 4.0 * (2.0 * sf).powf(p.recip()) * (1.0 + kappa - varkappa).powf(e)
                    / (1.0 - 2.0 * varkappa)
                    * slack;
                (value, varkappa, None)
            } else {
                let lambda = lambda.ok_or_else(|| Error::InvalidArgument("penalized bound needs λ".into()))?;
                if !(lambda >= 2.0 * sf && lambda.is_finite()) {
                    return Err(Error::InvalidArgument(format!("λ = {lambda} must be at least 2s = {}", 2 * s)));
                }
                let value = 4.0 * lambda.powf(p.recip()) * (1.0 + kappa * lambda / (2.0 * sf) - varkappa).powf(e)
                    / (1.0 - 2.0 * varkappa)
                    * slack;
                (value, varkappa, Some(lambda))
            }
        }
    };
    Ok(ErrorBound { variant, p, value, kappa, varkappa, rho, s, tail, lambda })
}
