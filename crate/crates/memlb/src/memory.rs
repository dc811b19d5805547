//! Stationary analysis of the dispatcher's idle-server memory.
//!
//! Embedded at arrival instants, the memory size evolves as a Markov chain
//! whose stationary distribution `pi` (and in particular `pi0`, the
//! probability that an arrival finds the memory empty) fully determines the
//! mean-field behavior of the load-balancing system. Closed forms exist for
//! IP, CP and ISM; BCP is solved exactly as an (A+1)-state chain.
//!
//! Throughout, `rho` is the stationary probability that a probed server is
//! busy, which in equilibrium equals the offered load per server.

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

/// Which idle-server discovery scheme the dispatcher runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// No memory: every arrival is dispatched by probing alone.
    None,
    /// Interrupted probing: probe only when the memory is empty; leftover
    /// idle ids (at most d-1) are kept.
    Ip,
    /// Continuous probing: probe d servers on every arrival; unbounded
    /// memory.
    Cp,
    /// Continuous probing with the memory capped at A ids.
    Bcp,
    /// Idle-server messaging: servers notify the dispatcher when they become
    /// idle; memory capped at A ids.
    Ism,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::None => "none",
            SchemeKind::Ip => "ip",
            SchemeKind::Cp => "cp",
            SchemeKind::Bcp => "bcp",
            SchemeKind::Ism => "ism",
        }
    }
}

/// A discovery scheme together with the probe count `d` and, where it
/// applies, the memory capacity `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryScheme {
    pub scheme: SchemeKind,
    pub d: u32,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<u32>,
}

impl MemoryScheme {
    pub fn new(scheme: SchemeKind, d: u32, a: Option<u32>) -> Result<Self> {
        let spec = MemoryScheme { scheme, d, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::InvalidParameter("probe count d must be >= 1".into()));
        }
        if matches!(self.scheme, SchemeKind::Bcp | SchemeKind::Ism) && self.a.is_none() {
            return Err(Error::InvalidParameter(format!(
                "{} requires the memory capacity A",
                self.scheme.name()
            )));
        }
        Ok(())
    }

    /// Capacity for the schemes that have one.
    fn capacity(&self) -> Result<u32> {
        self.a.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "{} requires the memory capacity A",
                self.scheme.name()
            ))
        })
    }
}

/// Stationary law of the memory size at arrival instants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryStationary {
    /// Probability that an arrival finds the memory empty.
    pub pi0: f64,
    /// Full stationary vector, when the chain is finite.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
    /// Set when the chain has no stationary law (CP with d >= 1/(1-rho):
    /// the memory grows without bound and pi0 = 0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime_note: Option<String>,
}

impl MemoryStationary {
    fn plain(pi0: f64, pi: Option<Vec<f64>>) -> Self {
        MemoryStationary {
            pi0,
            pi,
            regime_note: None,
        }
    }
}

/// Stationary memory law for `spec` at load `rho` in [0, 1).
///
/// `rho = 0` returns the analytic zero-load limit of each scheme rather
/// than an indeterminate form.
pub fn pi0(spec: &MemoryScheme, rho: f64) -> Result<MemoryStationary> {
    spec.validate()?;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in [0, 1), got {rho}"
        )));
    }
    let d = spec.d as f64;
    match spec.scheme {
        SchemeKind::None => Ok(MemoryStationary::plain(1.0, None)),
        SchemeKind::Ip => {
            let p0 = 1.0 / (rho.powi(spec.d as i32) + (1.0 - rho) * d);
            let mut pi = vec![p0];
            // pi_k = pi0 * P{more than k of the d probes find an idle server}.
            let mut below = binomial_pmf(spec.d, 0, 1.0 - rho);
            for k in 1..spec.d {
                below += binomial_pmf(spec.d, k, 1.0 - rho);
                pi.push(p0 * (1.0 - below));
            }
            Ok(MemoryStationary::plain(p0, Some(pi)))
        }
        SchemeKind::Cp => {
            if spec.d == 1 {
                // A single probe is consumed by the arrival it serves; the
                // memory never grows.
                return Ok(MemoryStationary::plain(1.0, None));
            }
            if d < 1.0 / (1.0 - rho) {
                let p0 = (1.0 - d * (1.0 - rho)) / rho.powi(spec.d as i32);
                Ok(MemoryStationary::plain(p0, None))
            } else {
                Ok(MemoryStationary {
                    pi0: 0.0,
                    pi: None,
                    regime_note: Some(
                        "transient: d >= 1/(1-rho), memory grows without bound".into(),
                    ),
                })
            }
        }
        SchemeKind::Bcp => {
            let a = spec.capacity()?;
            if rho == 0.0 {
                let p0 = if spec.d == 1 { 1.0 } else { 0.0 };
                return Ok(MemoryStationary::plain(p0, None));
            }
            let m = bcp_transition_matrix(rho, spec.d, a)?;
            let pi = linalg::stationary_distribution(&m)?;
            Ok(MemoryStationary::plain(pi[0], Some(pi)))
        }
        SchemeKind::Ism => {
            let a = spec.capacity()?;
            let p0 = ism_pi0(rho, spec.d, a);
            // Birth-death occupancy: births (notifications accepted) occur
            // w.p. 1 - pi0*rho^d per arrival, deaths w.p. 1, so the levels
            // are geometric with that ratio.
            let q = 1.0 - p0 * rho.powi(spec.d as i32);
            let mut pi = Vec::with_capacity(a as usize + 1);
            let mut level = p0;
            for _ in 0..=a {
                pi.push(level);
                level *= q;
            }
            Ok(MemoryStationary::plain(p0, Some(pi)))
        }
    }
}

/// Closed-form ISM pi0, evaluated via log1p/expm1 so tiny loads do not lose
/// precision: pi0 = (1 - (1 - rho^d)^{1/(A+1)}) / rho^d -> 1/(A+1) as
/// rho -> 0.
fn ism_pi0(rho: f64, d: u32, a: u32) -> f64 {
    if a == 0 {
        return 1.0;
    }
    let q = rho.powi(d as i32);
    if q == 0.0 {
        return 1.0 / (a as f64 + 1.0);
    }
    -((-q).ln_1p() / (a as f64 + 1.0)).exp_m1() / q
}

/// One-step transition matrix of the BCP memory-size chain on {0, ..., A}.
///
/// From state 0 the d probes find j idle servers with Binomial(d, 1-rho)
/// probability; one idle server takes the arrival and the rest are stored.
/// From state k >= 1 one id serves the arrival and the d fresh probes add
/// their idle finds. Transitions past A are folded into column A.
pub fn bcp_transition_matrix(rho: f64, d: u32, a: u32) -> Result<Vec<Vec<f64>>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in [0, 1), got {rho}"
        )));
    }
    if d < 1 {
        return Err(Error::InvalidParameter("probe count d must be >= 1".into()));
    }
    let n = a as usize + 1;
    let mut m = vec![vec![0.0; n]; n];
    let idle = 1.0 - rho;
    // Row 0: j = 0 or 1 idle finds leave the memory empty.
    m[0][0] = binomial_pmf(d, 0, idle) + binomial_pmf(d, 1, idle);
    for j in 2..=d {
        let stored = ((j - 1) as usize).min(a as usize);
        m[0][stored] += binomial_pmf(d, j, idle);
    }
    for k in 1..n {
        for j in 0..=d {
            let next = (k - 1 + j as usize).min(a as usize);
            m[k][next] += binomial_pmf(d, j, idle);
        }
    }
    Ok(m)
}

/// d=2 BCP closed form, kept as an independent cross-check of the chain
/// solve: pi0 = (1 - r^2) / (1 - r^{2(A+1)}) with r = (1-rho)/rho.
pub fn bcp_pi0_closed_form_d2(rho: f64, a: u32) -> f64 {
    let r = (1.0 - rho) / rho;
    let log_r = r.ln();
    if log_r.abs() < 1e-12 {
        // rho = 1/2: the geometric sum degenerates to 1/(A+1).
        return 1.0 / (a as f64 + 1.0);
    }
    (2.0 * log_r).exp_m1() / (2.0 * (a as f64 + 1.0) * log_r).exp_m1()
}

/// Expected probes sent by the dispatcher per arrival.
///
/// `one_at_a_time` selects sequential probing that stops at the first idle
/// server, where that distinction exists (BCP refill probes and the plain
/// no-memory dispatch); batch probing always pays the full d.
pub fn probes_per_arrival(spec: &MemoryScheme, rho: f64, one_at_a_time: bool) -> Result<f64> {
    spec.validate()?;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "probe accounting has a pole at rho = 1; got {rho}"
        )));
    }
    let d = spec.d as f64;
    let stat = pi0(spec, rho)?;
    Ok(match spec.scheme {
        SchemeKind::None => {
            if one_at_a_time {
                sequential_probe_mean(rho, spec.d)
            } else {
                d
            }
        }
        // Probing happens only on the pi0 fraction of arrivals.
        SchemeKind::Ip => stat.pi0 * d,
        // CP refills on every arrival regardless of how ids get used.
        SchemeKind::Cp => d,
        SchemeKind::Bcp => {
            if one_at_a_time {
                eq_probe_rate(stat.pi0, rho, spec.d)
            } else {
                d
            }
        }
        // ISM probes only to dispatch when the memory is empty, one probe at
        // a time, stopping at the first idle server.
        SchemeKind::Ism => stat.pi0 * sequential_probe_mean(rho, spec.d),
    })
}

/// Expected probes plus idle notifications per arrival under ISM.
pub fn ism_messages_per_arrival(spec: &MemoryScheme, rho: f64) -> Result<f64> {
    if spec.scheme != SchemeKind::Ism {
        return Err(Error::WrongScheme(format!(
            "message accounting applies to ism, not {}",
            spec.scheme.name()
        )));
    }
    let probes = probes_per_arrival(spec, rho, true)?;
    let stat = pi0(spec, rho)?;
    // Every accepted notification is eventually consumed by an arrival, so
    // the notification rate per arrival is the memory-nonempty dispatch rate
    // 1 - pi0 * rho^d.
    Ok(probes + (1.0 - stat.pi0 * rho.powi(spec.d as i32)))
}

/// Mean of min(number of probes until an idle server, d) when each probe is
/// busy with probability rho: sum_{i=0}^{d-1} rho^i.
fn sequential_probe_mean(rho: f64, d: u32) -> f64 {
    let mut acc = 0.0;
    let mut term = 1.0;
    for _ in 0..d {
        acc += term;
        term *= rho;
    }
    acc
}

/// Probe rate (1 - pi0 rho^d) / (1 - rho): probes are sent until the memory
/// turns over, one per arrival not served from memory, amortized.
fn eq_probe_rate(pi0: f64, rho: f64, d: u32) -> f64 {
    (1.0 - pi0 * rho.powi(d as i32)) / (1.0 - rho)
}

fn binomial_pmf(n: u32, k: u32, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut coeff = 1.0;
    for i in 0..k {
        coeff *= (n - i) as f64 / (i + 1) as f64;
    }
    coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scheme(kind: SchemeKind, d: u32, a: Option<u32>) -> MemoryScheme {
        MemoryScheme::new(kind, d, a).unwrap()
    }

    fn assert_close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol,
            "got {got}, want {want} (tol {tol})"
        );
    }

    /// Stationary solve of the explicit IP chain: state = memory size after
    /// an arrival, probes happen only in state 0.
    fn ip_chain_pi0(rho: f64, d: u32) -> f64 {
        let n = d as usize;
        let mut m = vec![vec![0.0; n]; n];
        m[0][0] = binomial_pmf(d, 0, 1.0 - rho) + binomial_pmf(d, 1, 1.0 - rho);
        for j in 2..=d {
            m[0][(j - 1) as usize] += binomial_pmf(d, j, 1.0 - rho);
        }
        for k in 1..n {
            m[k][k - 1] = 1.0;
        }
        crate::linalg::stationary_distribution(&m).unwrap()[0]
    }

    #[test]
    fn ip_closed_form_matches_chain_solve() {
        let stat = pi0(&scheme(SchemeKind::Ip, 5, None), 0.9).unwrap();
        assert_close(stat.pi0, 0.917018, 1e-6);
        for d in 1..=6u32 {
            for rho in [0.05, 0.3, 0.5, 0.8, 0.95] {
                let closed = pi0(&scheme(SchemeKind::Ip, d, None), rho).unwrap();
                assert_close(closed.pi0, ip_chain_pi0(rho, d), 1e-12);
                let pi = closed.pi.unwrap();
                assert_eq!(pi.len(), d as usize);
                assert_close(pi.iter().sum::<f64>(), 1.0, 1e-12);
                assert_close(pi[0], closed.pi0, 0.0);
            }
        }
    }

    #[test]
    fn cp_regimes() {
        // One probe per arrival never stockpiles ids.
        for rho in [0.1, 0.5, 0.9] {
            assert_close(
                pi0(&scheme(SchemeKind::Cp, 1, None), rho).unwrap().pi0,
                1.0,
                0.0,
            );
        }
        // Recurrent regime: d < 1/(1-rho).
        let stat = pi0(&scheme(SchemeKind::Cp, 3, None), 0.8).unwrap();
        assert_close(stat.pi0, 0.78125, 1e-12);
        assert!(stat.regime_note.is_none());
        // Transient regime, including the null-recurrent boundary d=1/(1-rho).
        for (d, rho) in [(2, 0.3), (2, 0.5), (5, 0.75)] {
            let stat = pi0(&scheme(SchemeKind::Cp, d, None), rho).unwrap();
            assert_eq!(stat.pi0, 0.0);
            assert!(stat.regime_note.is_some());
        }
    }

    #[test]
    fn bcp_matrix_matches_hand_computation() {
        let m = bcp_transition_matrix(0.6, 2, 2).unwrap();
        let want = [[0.84, 0.16, 0.0], [0.36, 0.48, 0.16], [0.0, 0.36, 0.64]];
        for (row, wrow) in m.iter().zip(want.iter()) {
            for (x, w) in row.iter().zip(wrow.iter()) {
                assert_close(*x, *w, 1e-12);
            }
        }
        // A=0 collapses to the single state.
        let m0 = bcp_transition_matrix(0.6, 2, 0).unwrap();
        assert_eq!(m0.len(), 1);
        assert_close(m0[0][0], 1.0, 1e-15);
    }

    #[test]
    fn bcp_chain_solve_matches_d2_closed_form() {
        let stat = pi0(&scheme(SchemeKind::Bcp, 2, Some(2)), 0.6).unwrap();
        assert_close(stat.pi0, 405.0 / 665.0, 1e-12);
        for a in [0, 1, 3, 7] {
            for rho in [0.2, 0.5, 0.6, 0.9] {
                let solved = pi0(&scheme(SchemeKind::Bcp, 2, Some(a)), rho).unwrap().pi0;
                assert_close(solved, bcp_pi0_closed_form_d2(rho, a), 1e-12);
            }
        }
    }

    #[test]
    fn bcp_approaches_cp_with_large_capacity() {
        // Positive-recurrent CP regime only.
        for (d, rho) in [(3u32, 0.8), (2, 0.6), (4, 0.9)] {
            let cp = pi0(&scheme(SchemeKind::Cp, d, None), rho).unwrap().pi0;
            let bcp = pi0(&scheme(SchemeKind::Bcp, d, Some(200)), rho)
                .unwrap()
                .pi0;
            assert_close(bcp, cp, 1e-6);
        }
    }

    #[test]
    fn ism_closed_form_and_birth_death_balance() {
        let stat = pi0(&scheme(SchemeKind::Ism, 1, Some(1)), 0.9).unwrap();
        assert_close(stat.pi0, (1.0 - 0.1f64.sqrt()) / 0.9, 1e-12);
        // Zero capacity means no memory at all.
        for rho in [0.0, 0.4, 0.99] {
            assert_close(
                pi0(&scheme(SchemeKind::Ism, 3, Some(0)), rho).unwrap().pi0,
                1.0,
                0.0,
            );
        }
        // Self-consistency: pi0 must equal 1/sum_i q^i for the birth-death
        // chain with birth probability q = 1 - pi0 rho^d.
        for d in [1u32, 2, 5] {
            for a in [1u32, 4, 10] {
                for rho in [0.1, 0.5, 0.9, 0.999] {
                    let p0 = pi0(&scheme(SchemeKind::Ism, d, Some(a)), rho).unwrap().pi0;
                    let q = 1.0 - p0 * rho.powi(d as i32);
                    let norm: f64 = (0..=a).map(|i| q.powi(i as i32)).sum();
                    assert_close(p0, 1.0 / norm, 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_load_limits() {
        assert_close(
            pi0(&scheme(SchemeKind::Ip, 5, None), 0.0).unwrap().pi0,
            0.2,
            1e-15,
        );
        assert_close(
            pi0(&scheme(SchemeKind::Cp, 1, None), 0.0).unwrap().pi0,
            1.0,
            0.0,
        );
        assert_close(
            pi0(&scheme(SchemeKind::Cp, 3, None), 0.0).unwrap().pi0,
            0.0,
            0.0,
        );
        assert_close(
            pi0(&scheme(SchemeKind::Bcp, 4, Some(3)), 0.0).unwrap().pi0,
            0.0,
            0.0,
        );
        assert_close(
            pi0(&scheme(SchemeKind::Ism, 5, Some(4)), 0.0).unwrap().pi0,
            0.2,
            1e-15,
        );
        assert_close(
            pi0(&scheme(SchemeKind::None, 2, None), 0.0).unwrap().pi0,
            1.0,
            0.0,
        );
        // The ISM closed form must land on the limit smoothly from above.
        assert_close(
            pi0(&scheme(SchemeKind::Ism, 5, Some(4)), 1e-9).unwrap().pi0,
            0.2,
            1e-9,
        );
    }

    #[test]
    fn parameter_validation() {
        assert!(pi0(
            &MemoryScheme {
                scheme: SchemeKind::Ip,
                d: 0,
                a: None
            },
            0.5
        )
        .is_err());
        assert!(pi0(
            &MemoryScheme {
                scheme: SchemeKind::Bcp,
                d: 2,
                a: None
            },
            0.5
        )
        .is_err());
        assert!(pi0(
            &MemoryScheme {
                scheme: SchemeKind::Ism,
                d: 2,
                a: None
            },
            0.5
        )
        .is_err());
        assert!(pi0(&scheme(SchemeKind::Ip, 2, None), 1.0).is_err());
        assert!(pi0(&scheme(SchemeKind::Ip, 2, None), -0.1).is_err());
        assert!(ism_messages_per_arrival(&scheme(SchemeKind::Ip, 2, None), 0.5).is_err());
    }

    #[test]
    fn probe_accounting_identities() {
        // IP: pi0*d equals the turnover form (1 - pi0 rho^d)/(1 - rho).
        for d in [2u32, 3, 5] {
            for rho in [0.1, 0.5, 0.9] {
                let spec = scheme(SchemeKind::Ip, d, None);
                let p0 = pi0(&spec, rho).unwrap().pi0;
                let probes = probes_per_arrival(&spec, rho, false).unwrap();
                assert_close(probes, p0 * d as f64, 1e-12);
                assert_close(probes, eq_probe_rate(p0, rho, d), 1e-12);
            }
        }
        // CP pays d regardless; the turnover form agrees in the recurrent
        // regime.
        let cp = scheme(SchemeKind::Cp, 3, None);
        assert_close(probes_per_arrival(&cp, 0.8, false).unwrap(), 3.0, 0.0);
        assert_close(eq_probe_rate(0.78125, 0.8, 3), 3.0, 1e-12);
        // No-memory sequential probing finds an idle server immediately at
        // vanishing load.
        let none = scheme(SchemeKind::None, 4, None);
        assert_close(probes_per_arrival(&none, 0.0, true).unwrap(), 1.0, 0.0);
        assert_close(probes_per_arrival(&none, 0.5, false).unwrap(), 4.0, 0.0);
    }

    #[test]
    fn ism_message_count() {
        // A=0: pi0 = 1, so probes are geometric-capped and every busy-server
        // dispatch triggers a later notification... which is dropped; only
        // the (1 - rho^d) idle-dispatch rate shows up as accepted messages.
        let spec = scheme(SchemeKind::Ism, 2, Some(0));
        let rho: f64 = 0.6;
        let want = (1.0 - rho.powi(2)) / (1.0 - rho) + (1.0 - rho.powi(2));
        assert_close(ism_messages_per_arrival(&spec, rho).unwrap(), want, 1e-12);

        // Large capacity, d=1: pi0 -> 0 and exactly one message (the
        // notification) per arrival survives.
        let spec = scheme(SchemeKind::Ism, 1, Some(4000));
        let got = ism_messages_per_arrival(&spec, 0.9).unwrap();
        assert_close(got, 1.0, 1e-3);
    }

    #[test]
    fn scheme_fragment_roundtrip() {
        let text = r#"{"scheme":"ism","d":5,"A":4}"#;
        let spec: MemoryScheme = serde_json::from_str(text).unwrap();
        assert_eq!(spec, scheme(SchemeKind::Ism, 5, Some(4)));
        let back = serde_json::to_string(&spec).unwrap();
        let again: MemoryScheme = serde_json::from_str(&back).unwrap();
        assert_eq!(again, spec);
        // A is optional for the schemes that don't use it.
        let ip: MemoryScheme = serde_json::from_str(r#"{"scheme":"ip","d":3}"#).unwrap();
        assert_eq!(ip, scheme(SchemeKind::Ip, 3, None));
    }

    proptest! {
        #[test]
        fn bcp_rows_are_stochastic(rho in 0.01f64..0.99, d in 1u32..8, a in 0u32..12) {
            let m = bcp_transition_matrix(rho, d, a).unwrap();
            for row in &m {
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(row.iter().all(|&x| x >= 0.0));
            }
        }

        #[test]
        fn stationary_vectors_balance(rho in 0.01f64..0.99, d in 1u32..6, a in 0u32..8) {
            for spec in [
                scheme(SchemeKind::Ip, d, None),
                scheme(SchemeKind::Bcp, d, Some(a)),
                scheme(SchemeKind::Ism, d, Some(a)),
            ] {
                let stat = pi0(&spec, rho).unwrap();
                prop_assert!(stat.pi0 >= 0.0 && stat.pi0 <= 1.0);
                if spec.scheme != SchemeKind::Bcp {
                    // IP and ISM closed forms are bounded away from zero;
                    // the BCP chain solve may underflow to 0 at tiny loads
                    // where pi0 ~ ((1-rho)/rho)^{-2(A+1)}.
                    prop_assert!(stat.pi0 > 0.0);
                }
                if let Some(pi) = &stat.pi {
                    let sum: f64 = pi.iter().sum();
                    prop_assert!((sum - 1.0).abs() < 1e-10);
                    prop_assert!(pi.iter().all(|&x| x >= 0.0));
                    prop_assert!((pi[0] - stat.pi0).abs() < 1e-12);
                }
                // Residual of pi M = pi for the chains we can rebuild here.
                if spec.scheme == SchemeKind::Bcp {
                    let m = bcp_transition_matrix(rho, d, a).unwrap();
                    let pi = stat.pi.as_ref().unwrap();
                    for j in 0..pi.len() {
                        let flow: f64 = (0..pi.len()).map(|i| pi[i] * m[i][j]).sum();
                        prop_assert!((flow - pi[j]).abs() < 1e-10);
                    }
                }
            }
        }

        #[test]
        fn pi0_nonincreasing_in_capacity(rho in 0.05f64..0.95, d in 1u32..6, a in 0u32..10) {
            for kind in [SchemeKind::Bcp, SchemeKind::Ism] {
                let lo = pi0(&scheme(kind, d, Some(a)), rho).unwrap().pi0;
                let hi = pi0(&scheme(kind, d, Some(a + 1)), rho).unwrap().pi0;
                prop_assert!(hi <= lo + 1e-12);
            }
        }
    }
}
