//! Job-size distributions: exponential, balanced two-phase hyperexponential,
//! and phase-type (PH), with moments, tail/density evaluation, sampling, and
//! the PH "service stack" used for response-time distributions.
//!
//! A PH distribution is the absorption time of a Markov chain with initial
//! phase vector `alpha` and subgenerator `A`; its exit rate vector is
//! `nu = -A 1`. The tail is `alpha exp(A w) 1`, evaluated here by
//! uniformization, which preserves nonnegativity for any subgenerator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

/// Tolerance for "this vector of probabilities must sum to one".
const PROB_SUM_TOL: f64 = 1e-12;
/// Absolute truncation error budget for uniformization.
const UNIFORMIZATION_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum JobSizeDistribution {
    Exponential {
        rate: f64,
    },
    HyperExp2 {
        p1: f64,
        p2: f64,
        rate1: f64,
        rate2: f64,
    },
    PhaseType {
        alpha: Vec<f64>,
        a: Vec<Vec<f64>>,
    },
}

impl JobSizeDistribution {
    /// Exponential distribution with the given mean.
    pub fn exponential(mean: f64) -> Result<Self> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponential mean must be positive and finite, got {mean}"
            )));
        }
        Ok(JobSizeDistribution::Exponential { rate: 1.0 / mean })
    }

    /// Two-phase hyperexponential with balanced means (`p1/rate1 = p2/rate2`),
    /// fit to a mean and a squared coefficient of variation `scv > 1`.
    pub fn balanced_hyperexp(mean: f64, scv: f64) -> Result<Self> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "hyperexponential mean must be positive and finite, got {mean}"
            )));
        }
        if !(scv > 1.0) || !scv.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "two-phase balanced hyperexponential requires scv > 1, got {scv}"
            )));
        }
        let p1 = 0.5 * (1.0 + ((scv - 1.0) / (scv + 1.0)).sqrt());
        let p2 = 1.0 - p1;
        Ok(JobSizeDistribution::HyperExp2 {
            p1,
            p2,
            rate1: 2.0 * p1 / mean,
            rate2: 2.0 * p2 / mean,
        })
    }

    /// Phase-type distribution from an initial phase vector and subgenerator.
    pub fn phase_type(alpha: Vec<f64>, a: Vec<Vec<f64>>) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "phase-type needs >= 1 phase".into(),
            ));
        }
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "subgenerator must be {n}x{n} to match alpha"
            )));
        }
        if alpha.iter().any(|&x| x < 0.0) || (alpha.iter().sum::<f64>() - 1.0).abs() > PROB_SUM_TOL
        {
            return Err(Error::InvalidParameter(
                "alpha must be a stochastic vector".into(),
            ));
        }
        for (i, row) in a.iter().enumerate() {
            if !(row[i] < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "subgenerator diagonal entry {i} must be strictly negative"
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                if i != j && x < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "subgenerator off-diagonal entry ({i},{j}) must be nonnegative"
                    )));
                }
            }
            if row.iter().sum::<f64>() > PROB_SUM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "subgenerator row {i} must have nonpositive sum"
                )));
            }
        }
        let nu = exit_rates(&a);
        if !nu.iter().any(|&x| x > 0.0) {
            return Err(Error::InvalidParameter(
                "exit vector -A*1 must have a positive entry".into(),
            ));
        }
        let dist = JobSizeDistribution::PhaseType { alpha, a };
        // Absorption must be reachable from every started phase: a singular
        // solve or nonpositive mean betrays a defective chain.
        let mean = dist.mean();
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::InvalidParameter(
                "phase-type mean is not positive and finite".into(),
            ));
        }
        Ok(dist)
    }

    pub fn mean(&self) -> f64 {
        match self {
            JobSizeDistribution::Exponential { rate } => 1.0 / rate,
            JobSizeDistribution::HyperExp2 {
                p1,
                p2,
                rate1,
                rate2,
            } => p1 / rate1 + p2 / rate2,
            JobSizeDistribution::PhaseType { alpha, a } => match absorption_means(a) {
                Ok(m) => alpha.iter().zip(&m).map(|(x, y)| x * y).sum(),
                Err(_) => f64::NAN,
            },
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            JobSizeDistribution::Exponential { rate } => 2.0 / (rate * rate),
            JobSizeDistribution::HyperExp2 {
                p1,
                p2,
                rate1,
                rate2,
            } => 2.0 * (p1 / (rate1 * rate1) + p2 / (rate2 * rate2)),
            JobSizeDistribution::PhaseType { alpha, a } => {
                // E[T^2] = 2 alpha A^{-2} 1, via two triangular-free solves.
                let m = match absorption_means(a) {
                    Ok(m) => m,
                    Err(_) => return f64::NAN,
                };
                match linalg::solve(a.clone(), m.iter().map(|&x| -x).collect()) {
                    Ok(q) => 2.0 * alpha.iter().zip(&q).map(|(x, y)| x * y).sum::<f64>(),
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    /// Squared coefficient of variation, Var / mean^2.
    pub fn scv(&self) -> f64 {
        let m1 = self.mean();
        self.second_moment() / (m1 * m1) - 1.0
    }

    /// Tail probability P{G > w}.
    pub fn ccdf(&self, w: f64) -> Result<f64> {
        if w < 0.0 {
            return Err(Error::Domain(format!("ccdf needs w >= 0, got {w}")));
        }
        Ok(self.tail(w))
    }

    /// Infallible tail for w >= 0 (hot path for quadrature loops).
    pub(crate) fn tail(&self, w: f64) -> f64 {
        match self {
            JobSizeDistribution::Exponential { rate } => (-rate * w).exp(),
            JobSizeDistribution::HyperExp2 {
                p1,
                p2,
                rate1,
                rate2,
            } => p1 * (-rate1 * w).exp() + p2 * (-rate2 * w).exp(),
            JobSizeDistribution::PhaseType { alpha, a } => ph_tail(alpha, a, w),
        }
    }

    /// Density g(w).
    pub fn density(&self, w: f64) -> Result<f64> {
        if w < 0.0 {
            return Err(Error::Domain(format!("density needs w >= 0, got {w}")));
        }
        Ok(self.density_unchecked(w))
    }

    /// Infallible density for w >= 0 (hot path for quadrature loops).
    pub(crate) fn density_unchecked(&self, w: f64) -> f64 {
        match self {
            JobSizeDistribution::Exponential { rate } => rate * (-rate * w).exp(),
            JobSizeDistribution::HyperExp2 {
                p1,
                p2,
                rate1,
                rate2,
            } => p1 * rate1 * (-rate1 * w).exp() + p2 * rate2 * (-rate2 * w).exp(),
            JobSizeDistribution::PhaseType { alpha, a } => {
                let row = expm_action_row(a, alpha, w);
                let nu = exit_rates(a);
                row.iter().zip(&nu).map(|(x, y)| x * y).sum()
            }
        }
    }

    /// Embeds any variant as an explicit (alpha, A) phase-type pair.
    pub fn as_phase_type(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        match self {
            JobSizeDistribution::Exponential { rate } => (vec![1.0], vec![vec![-rate]]),
            JobSizeDistribution::HyperExp2 {
                p1,
                p2,
                rate1,
                rate2,
            } => (vec![*p1, *p2], vec![vec![-rate1, 0.0], vec![0.0, -rate2]]),
            JobSizeDistribution::PhaseType { alpha, a } => (alpha.clone(), a.clone()),
        }
    }

    /// Mean time to absorption from each phase, `-A^{-1} 1`.
    pub fn absorption_means(&self) -> Result<Vec<f64>> {
        let (_, a) = self.as_phase_type();
        absorption_means(&a)
    }

    /// One random draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JobSizeDistribution::Exponential { rate } => exp_draw(rng, *rate),
            JobSizeDistribution::HyperExp2 {
                p1, rate1, rate2, ..
            } => {
                if rng.gen::<f64>() < *p1 {
                    exp_draw(rng, *rate1)
                } else {
                    exp_draw(rng, *rate2)
                }
            }
            JobSizeDistribution::PhaseType { alpha, a } => {
                let n = alpha.len();
                let nu = exit_rates(a);
                let mut phase = discrete_draw(rng, alpha);
                let mut t = 0.0;
                loop {
                    let total = -a[phase][phase];
                    t += exp_draw(rng, total);
                    // Jump: absorb with prob nu/total, else move to phase j
                    // with prob A[phase][j]/total.
                    let mut x = rng.gen::<f64>() * total;
                    if x < nu[phase] {
                        return t;
                    }
                    x -= nu[phase];
                    let mut next = n - 1;
                    for j in 0..n {
                        if j == phase {
                            continue;
                        }
                        if x < a[phase][j] {
                            next = j;
                            break;
                        }
                        x -= a[phase][j];
                    }
                    phase = next;
                }
            }
        }
    }

    /// Distribution family label for reports ("exp", "hyperexp", "ph").
    pub fn family_name(&self) -> &'static str {
        match self {
            JobSizeDistribution::Exponential { .. } => "exp",
            JobSizeDistribution::HyperExp2 { .. } => "hyperexp",
            JobSizeDistribution::PhaseType { .. } => "ph",
        }
    }
}

/// Distribution of (residual service of a job started in `head_phase`) plus
/// `k` further full services: the response time of a job that joins a FCFS
/// queue holding `k` jobs whose head is in phase `head_phase` (the k-th
/// service being the tagged job's own).
///
/// Built as a PH on (k+1)*n phases: block-bidiagonal subgenerator with `A`
/// on the diagonal blocks and `nu alpha` coupling each block to the next,
/// started in phase `head_phase` of block 0.
pub fn ph_service_stack(
    dist: &JobSizeDistribution,
    head_phase: usize,
    k: usize,
) -> Result<JobSizeDistribution> {
    let (alpha, a) = dist.as_phase_type();
    let n = alpha.len();
    if head_phase >= n {
        return Err(Error::Domain(format!(
            "head phase {head_phase} out of range for {n} phases"
        )));
    }
    let nu = exit_rates(&a);
    let size = (k + 1) * n;
    let mut big = vec![vec![0.0; size]; size];
    for b in 0..=k {
        let off = b * n;
        for i in 0..n {
            for j in 0..n {
                big[off + i][off + j] = a[i][j];
            }
        }
        if b < k {
            for i in 0..n {
                for j in 0..n {
                    big[off + i][off + n + j] = nu[i] * alpha[j];
                }
            }
        }
    }
    let mut init = vec![0.0; size];
    init[head_phase] = 1.0;
    JobSizeDistribution::phase_type(init, big)
}

// ---------------------------------------------------------------------------
// JSON configuration fragments
// ---------------------------------------------------------------------------

/// Serializable description of a job-size distribution, as used in config
/// files: {"type":"exp","mean":1.0}, {"type":"hyperexp","mean":1.0,"scv":2.0}
/// or {"type":"ph","alpha":[...],"A":[[...]]}.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum JobSizeSpec {
    Exp {
        mean: f64,
    },
    HyperExp {
        mean: f64,
        scv: f64,
    },
    Ph {
        alpha: Vec<f64>,
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
}

impl JobSizeSpec {
    pub fn build(&self) -> Result<JobSizeDistribution> {
        match self {
            JobSizeSpec::Exp { mean } => JobSizeDistribution::exponential(*mean),
            JobSizeSpec::HyperExp { mean, scv } => {
                JobSizeDistribution::balanced_hyperexp(*mean, *scv)
            }
            JobSizeSpec::Ph { alpha, a } => {
                JobSizeDistribution::phase_type(alpha.clone(), a.clone())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Uniformization and small helpers
// ---------------------------------------------------------------------------

fn exit_rates(a: &[Vec<f64>]) -> Vec<f64> {
    a.iter()
        .map(|row| (-row.iter().sum::<f64>()).max(0.0))
        .collect()
}

fn absorption_means(a: &[Vec<f64>]) -> Result<Vec<f64>> {
    // Solve A m = -1; m_i is the mean absorption time from phase i.
    linalg::solve(a.to_vec(), vec![-1.0; a.len()])
}

/// Tail `alpha exp(A w) 1` of a phase-type distribution by uniformization,
/// absolute error below `UNIFORMIZATION_TOL`.
pub(crate) fn ph_tail(alpha: &[f64], a: &[Vec<f64>], w: f64) -> f64 {
    expm_action_row(a, alpha, w).iter().sum()
}

/// Row-vector action `v exp(A w)` by uniformization. Splits `w` into chunks
/// keeping the Poisson rate moderate, so weights never underflow even for
/// large `w`.
pub(crate) fn expm_action_row(a: &[Vec<f64>], v: &[f64], w: f64) -> Vec<f64> {
    let n = v.len();
    let lambda = a
        .iter()
        .enumerate()
        .map(|(i, row)| -row[i])
        .fold(0.0f64, f64::max);
    if lambda * w == 0.0 {
        return v.to_vec();
    }
    let chunks = (lambda * w / 200.0).ceil().max(1.0) as usize;
    let dt = w / chunks as f64;
    let rate = lambda * dt;
    let mut cur = v.to_vec();
    for _ in 0..chunks {
        // exp(A dt) = e^{-rate} sum_k rate^k/k! P^k with P = I + A/lambda.
        let mut weight = (-rate).exp();
        let mut remaining = 1.0 - weight;
        let mut term = cur.clone();
        let mut acc: Vec<f64> = term.iter().map(|x| x * weight).collect();
        let mut k = 0usize;
        loop {
            // P is substochastic, so max|term| never grows; the remaining
            // Poisson mass bounds the truncation error.
            let bound: f64 = term.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            if remaining * bound * n as f64 <= UNIFORMIZATION_TOL / chunks as f64 {
                break;
            }
            let mut next = vec![0.0; n];
            for i in 0..n {
                let ti = term[i];
                if ti == 0.0 {
                    continue;
                }
                for j in 0..n {
                    next[j] += ti * a[i][j];
                }
            }
            for j in 0..n {
                next[j] = term[j] + next[j] / lambda;
            }
            term = next;
            k += 1;
            weight *= rate / k as f64;
            remaining = (remaining - weight).max(0.0);
            for j in 0..n {
                acc[j] += weight * term[j];
            }
        }
        cur = acc;
    }
    cur
}

fn exp_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // gen::<f64>() is in [0,1); flip so the log argument stays positive.
    -(1.0 - rng.gen::<f64>()).ln() / rate
}

fn discrete_draw<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let mut x = rng.gen::<f64>();
    for (i, &p) in weights.iter().enumerate() {
        if x < p {
            return i;
        }
        x -= p;
    }
    weights.len() - 1
}
