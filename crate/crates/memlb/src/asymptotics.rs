//! Heavy- and low-traffic behaviour of the cavity means.
//!
//! Under heavy traffic the mean response time grows like a constant times
//! log(1/(1-lambda)); the constant is 1/log d for SQ(d) and 1/(d-1) for
//! LL(d), and the ISM(A) scheme divides either by A+1 (the only scheme
//! whose pi0 approaches 1 slowly enough to matter). Under low traffic every
//! policy's mean waiting time vanishes like lambda^d, and the ratio of two
//! policies' waiting times has a closed-form limit driven by the zero-load
//! limits of their pi0 curves.

use crate::cavity_ll::ll_mean_response_exp;
use crate::cavity_sq::sq_mean_response;
use crate::memory::{self, MemoryScheme, SchemeKind};
use crate::{Error, Policy, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticKind {
    HeavyLimit,
    LowRatio,
    Pi0ZeroLoad,
}

/// A limit value together with the parameter regime it describes.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AsymptoticResult {
    pub kind: AsymptoticKind,
    /// May be `f64::INFINITY` for low-traffic ratios.
    pub value: f64,
    pub regime: String,
}

fn describe(policy: Policy, scheme: &MemoryScheme) -> String {
    match scheme.a {
        Some(a) => format!(
            "{}({}) + {}(A={})",
            policy.name(),
            scheme.d,
            scheme.scheme.name(),
            a
        ),
        None => format!("{}({}) + {}", policy.name(), scheme.d, scheme.scheme.name()),
    }
}

/// Limit of -E[R_lambda]/log(1-lambda) as lambda -> 1: 1/log d for SQ,
/// 1/(d-1) for LL, divided by A+1 under ISM(A).
///
/// At d = 1 the mean grows like 1/(1-lambda) instead of logarithmically,
/// so no such constant exists.
pub fn heavy_traffic_limit(policy: Policy, scheme: &MemoryScheme) -> Result<AsymptoticResult> {
    scheme.validate()?;
    if scheme.d < 2 {
        return Err(Error::UndefinedLimit(
            "d = 1 response means grow like 1/(1-lambda), not log(1/(1-lambda))".into(),
        ));
    }
    let base = match policy {
        Policy::Sq => 1.0 / (scheme.d as f64).ln(),
        Policy::Ll => 1.0 / (scheme.d as f64 - 1.0),
    };
    let value = match scheme.scheme {
        SchemeKind::Ism => base / (scheme.a.unwrap() as f64 + 1.0),
        _ => base,
    };
    Ok(AsymptoticResult {
        kind: AsymptoticKind::HeavyLimit,
        value,
        regime: describe(policy, scheme),
    })
}

/// Evaluates -E[R_lambda]/log(1-lambda) at each given lambda (exponential
/// job sizes, mean 1), the finite-load quantity whose limit
/// [`heavy_traffic_limit`] predicts. The sequence must increase strictly
/// toward 1.
pub fn heavy_traffic_corroborate(
    policy: Policy,
    scheme: &MemoryScheme,
    lambdas: &[f64],
) -> Result<Vec<f64>> {
    scheme.validate()?;
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter("need at least one lambda".into()));
    }
    for pair in lambdas.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidParameter(
                "lambda sequence must be strictly increasing".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !(0.0 < lambda && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "corroboration needs 0 < lambda < 1, got {lambda}"
            )));
        }
        let pi0 = memory::pi0(scheme, lambda)?.pi0;
        let mean = match policy {
            Policy::Sq => sq_mean_response(scheme.d, lambda, 1.0, pi0)?,
            Policy::Ll => ll_mean_response_exp(scheme.d, lambda, 1.0, pi0)?,
        };
        out.push(-mean / (1.0 - lambda).ln());
    }
    Ok(out)
}

/// Zero-load limit of pi0: 1/d for IP, 0 for CP and BCP (an empty system
/// keeps their memory full), 1/(A+1) for ISM, 1 with no memory.
///
/// At d = 1 the CP and BCP memory can never be fed (the single probed
/// server takes the job), and BCP with A = 0 cannot store anything, so
/// those degenerate cases stay at 1 like the no-memory scheme.
pub fn pi0_zero_load(scheme: &MemoryScheme) -> Result<AsymptoticResult> {
    scheme.validate()?;
    let value = match scheme.scheme {
        SchemeKind::None => 1.0,
        SchemeKind::Ip => 1.0 / scheme.d as f64,
        SchemeKind::Cp | SchemeKind::Bcp => {
            if scheme.d == 1 || scheme.a == Some(0) {
                1.0
            } else {
                0.0
            }
        }
        SchemeKind::Ism => 1.0 / (scheme.a.unwrap() as f64 + 1.0),
    };
    Ok(AsymptoticResult {
        kind: AsymptoticKind::Pi0ZeroLoad,
        value,
        regime: format!(
            "{}(d={}{}), rho -> 0",
            scheme.scheme.name(),
            scheme.d,
            scheme.a.map(|a| format!(", A={a}")).unwrap_or_default()
        ),
    })
}

/// Limit of the mean-waiting-time ratio E[W^(1)]/E[W^(2)] as lambda -> 0
/// (exponential job sizes, mean 1).
///
/// Waiting times vanish like lambda^d, so a smaller d wins outright:
/// d1 < d2 gives infinity and d1 > d2 gives 0. At equal d the ratio is the
/// ratio of the zero-load pi0 limits, times d when comparing SQ against LL:
/// an SQ(d) job that waits does so for a full residual service, while an
/// LL(d) job waits for the minimum of d residual workloads, which is d
/// times shorter. Both zero-load limits vanishing (CP or BCP on both
/// sides, d >= 2) leaves the leading coefficients indeterminate.
pub fn low_traffic_ratio(
    policy1: Policy,
    scheme1: &MemoryScheme,
    policy2: Policy,
    scheme2: &MemoryScheme,
) -> Result<AsymptoticResult> {
    scheme1.validate()?;
    scheme2.validate()?;
    let regime = format!(
        "{} vs {}, lambda -> 0",
        describe(policy1, scheme1),
        describe(policy2, scheme2)
    );
    let value = if scheme1.d < scheme2.d {
        f64::INFINITY
    } else if scheme1.d > scheme2.d {
        0.0
    } else {
        let l1 = pi0_zero_load(scheme1)?.value;
        let l2 = pi0_zero_load(scheme2)?.value;
        let policy_factor = match (policy1, policy2) {
            (Policy::Sq, Policy::Ll) => scheme1.d as f64,
            (Policy::Ll, Policy::Sq) => 1.0 / scheme1.d as f64,
            _ => 1.0,
        };
        if l1 == 0.0 && l2 == 0.0 {
            return Err(Error::UndefinedLimit(format!(
                "both zero-load pi0 limits vanish ({regime}); the ratio needs the next order"
            )));
        } else if l2 == 0.0 {
            f64::INFINITY
        } else {
            policy_factor * l1 / l2
        }
    };
    Ok(AsymptoticResult {
        kind: AsymptoticKind::LowRatio,
        value,
        regime,
    })
}
