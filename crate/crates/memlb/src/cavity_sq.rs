//! Cavity analysis of SQ(d): the tagged queue in the mean-field limit.
//!
//! At equilibrium the probability `u_k` that the cavity queue holds at
//! least `k` jobs satisfies `mu u_k = lambda pi0 u_{k-1}^d` for k >= 2 with
//! `u_1 = rho`, which closes to a double-exponential product form. The whole
//! memory effect is a rate rescaling: the system with memory at rate
//! `lambda` has the queue-tail and response-time law of the memoryless
//! system at `lambda pi0^{1/d}` (tails additionally divided by `pi0^{1/d}`).
//!
//! Beyond the exponential closed forms this module integrates the transient
//! tail ODEs (with the memory chain kept quasi-stationary at the current
//! load) and the per-phase equilibrium equations for phase-type job sizes,
//! and assembles the response-time distribution in both cases.

use crate::jobsize::{ph_service_stack, JobSizeDistribution};
use crate::memory::{self, MemoryScheme};
use crate::{Error, Result};

/// Queue tails below this are treated as exact zeros.
const TAIL_EPS: f64 = 1e-14;

/// Equilibrium of the cavity queue under SQ(d).
#[derive(Debug, Clone)]
pub struct SqCavitySolution {
    pub d: u32,
    pub lambda: f64,
    pub mu: f64,
    pub pi0: f64,
    /// Effective arrival rate lambda * pi0^(1/d) of the equivalent
    /// memoryless system.
    pub lambda_eff: f64,
    /// u[k] = P{cavity queue has >= k jobs}; u[0] = 1, truncated where the
    /// tail drops below `tail_eps`.
    pub u: Vec<f64>,
    /// Per-phase split of the tails for phase-type job sizes:
    /// `phase_tails[k-1][j]` is the probability of at least `k` jobs with
    /// the head-of-line job in phase `j`; rows sum to `u[k]`.
    pub phase_tails: Option<Vec<Vec<f64>>>,
    pub tail_eps: f64,
}

impl SqCavitySolution {
    /// Tail probability, zero beyond the stored truncation.
    pub fn tail(&self, k: usize) -> f64 {
        self.u.get(k).copied().unwrap_or(0.0)
    }

    /// Mean response time by Little's law: E[R] = sum_k u_k / lambda.
    pub fn mean_response(&self) -> f64 {
        self.u[1..].iter().sum::<f64>() / self.lambda
    }
}

fn check_rates(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rates must be positive and finite, got lambda={lambda}, mu={mu}"
        )));
    }
    if lambda >= mu {
        return Err(Error::Unstable(format!(
            "lambda={lambda} >= mu={mu}: the queue has no equilibrium"
        )));
    }
    Ok(())
}

fn check_pi0(pi0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::InvalidParameter(format!(
            "pi0 must lie in [0, 1], got {pi0}"
        )));
    }
    Ok(())
}

/// Exponent of the k-th equilibrium tail in the memoryless system:
/// e_k = (d^k - 1)/(d - 1) = 1 + d + ... + d^{k-1}.
fn tail_exponents(d: u32) -> impl Iterator<Item = f64> {
    let d = d as f64;
    std::iter::successors(Some(1.0f64), move |e| Some(e * d + 1.0))
}

/// Equilibrium queue-length tails for exponential job sizes:
/// u_k = (rho pi0^{1/d})^{e_k} / pi0^{1/d} with e_k = (d^k - 1)/(d - 1),
/// the d = 1 case being the continuity limit e_k = k.
pub fn sq_queue_tail(d: u32, lambda: f64, mu: f64, pi0: f64) -> Result<SqCavitySolution> {
    if d < 1 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    check_rates(lambda, mu)?;
    check_pi0(pi0)?;
    let rho = lambda / mu;
    if pi0 == 0.0 {
        // Every arrival is pointed at an idle server; only fresh arrivals
        // occupy the queue.
        return Ok(SqCavitySolution {
            d,
            lambda,
            mu,
            pi0,
            lambda_eff: 0.0,
            u: vec![1.0, rho],
            phase_tails: None,
            tail_eps: TAIL_EPS,
        });
    }
    let shrink = pi0.powf(1.0 / d as f64);
    let log_rho_eff = (rho * shrink).ln();
    let log_unshrink = -shrink.ln();
    let mut u = vec![1.0];
    for e_k in tail_exponents(d) {
        let log_u = e_k * log_rho_eff + log_unshrink;
        if log_u < TAIL_EPS.ln() {
            break;
        }
        u.push(log_u.exp());
        if u.len() > 10_000_000 {
            return Err(Error::NonConvergence {
                context: "queue tail truncation".into(),
                residual: *u.last().unwrap(),
            });
        }
    }
    Ok(SqCavitySolution {
        d,
        lambda,
        mu,
        pi0,
        lambda_eff: lambda * shrink,
        u,
        phase_tails: None,
        tail_eps: TAIL_EPS,
    })
}

/// Mean response time for exponential job sizes:
/// E[R] = (1/lambda') sum_{k>=1} (lambda'/mu)^{e_k} at lambda' =
/// lambda pi0^{1/d}.
pub fn sq_mean_response(d: u32, lambda: f64, mu: f64, pi0: f64) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    check_rates(lambda, mu)?;
    check_pi0(pi0)?;
    if pi0 == 0.0 {
        // No waiting: response is one service time.
        return Ok(1.0 / mu);
    }
    let lambda_eff = lambda * pi0.powf(1.0 / d as f64);
    let log_rho_eff = (lambda_eff / mu).ln();
    let mut acc = 0.0;
    for e_k in tail_exponents(d) {
        let term = (e_k * log_rho_eff).exp();
        acc += term;
        if term < 1e-16 {
            break;
        }
    }
    Ok(acc / lambda_eff)
}

/// Response-time tail for exponential job sizes:
/// P{R > w} = sum_{n>=0} e^{-mu w}(mu w)^n/n! * v_n^d with v_0 = 1 and
/// v_n = pi0^{1/d} u_n.
pub fn sq_response_ccdf(d: u32, lambda: f64, mu: f64, pi0: f64, w: f64) -> Result<f64> {
    if w < 0.0 {
        return Err(Error::Domain(format!(
            "response tail needs w >= 0, got {w}"
        )));
    }
    let sol = sq_queue_tail(d, lambda, mu, pi0)?;
    let rate = mu * w;
    let mut acc = 0.0;
    for (n, &u_n) in sol.u.iter().enumerate() {
        // v_n^d = pi0 u_n^d for n >= 1; the n = 0 term has v_0 = 1.
        let vd = if n == 0 {
            1.0
        } else {
            pi0 * u_n.powi(d as i32)
        };
        acc += poisson_pmf(n, rate) * vd;
    }
    // Terms beyond the stored tails are bounded by the remaining Poisson
    // mass times pi0 * tail_eps^d; at tail_eps = 1e-14 they never matter.
    Ok(acc)
}

/// Poisson pmf e^{-rate} rate^n / n!, evaluated in log space so large rates
/// (far tails of the response distribution) cannot underflow the recursion.
fn poisson_pmf(n: usize, rate: f64) -> f64 {
    if rate == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * rate.ln() - rate - ln_factorial(n)).exp()
}

fn ln_factorial(n: usize) -> f64 {
    // Stirling series after shifting the argument above 15; the first
    // dropped term is then below 3e-14.
    let mut x = n as f64 + 1.0;
    let mut shift = 0.0;
    while x < 15.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + inv / 12.0
        - inv * inv2 / 360.0
        + inv * inv2 * inv2 / 1260.0
        - inv * inv2 * inv2 * inv2 / 1680.0
}

// ---------------------------------------------------------------------------
// Transient dynamics (exponential job sizes)
// ---------------------------------------------------------------------------

/// A recorded transient trajectory of the cavity tails.
#[derive(Debug, Clone)]
pub struct SqTransient {
    pub times: Vec<f64>,
    /// tails[i][k-1] = u_k at times[i] (u_0 = 1 is implicit).
    pub tails: Vec<Vec<f64>>,
    /// Quasi-stationary pi0 at each recorded time.
    pub pi0_trace: Vec<f64>,
}

impl SqTransient {
    pub fn final_tail(&self) -> &[f64] {
        self.tails.last().unwrap()
    }
}

/// Right-hand side of the transient tail ODEs at the given state
/// (`tails[k-1]` = u_k), with the memory chain held quasi-stationary at the
/// instantaneous load rho(t) = u_1(t):
///
/// d/dt u_1 = lambda pi0 (1 - u_1^d) + lambda (1 - pi0) - mu (u_1 - u_2)
/// d/dt u_k = lambda pi0 (u_{k-1}^d - u_k^d) - mu (u_k - u_{k+1}), k >= 2
///
/// with the reflecting closure u_{K+1} = 0.
pub fn sq_transient_derivative(
    d: u32,
    lambda: f64,
    mu: f64,
    scheme: &MemoryScheme,
    tails: &[f64],
) -> Result<Vec<f64>> {
    let rho_now = tails
        .first()
        .copied()
        .unwrap_or(0.0)
        .clamp(0.0, 1.0 - 1e-12);
    let pi0 = memory::pi0(scheme, rho_now)?.pi0;
    let k_max = tails.len();
    let mut deriv = vec![0.0; k_max];
    for k in 0..k_max {
        let above = if k == 0 { 1.0 } else { tails[k - 1] };
        let here = tails[k];
        let below = if k + 1 < k_max { tails[k + 1] } else { 0.0 };
        let probe_flow = lambda * pi0 * (above.powi(d as i32) - here.powi(d as i32));
        // Memory-served arrivals always land on an idle server, feeding only
        // the k = 1 tail.
        let memory_flow = if k == 0 { lambda * (1.0 - pi0) } else { 0.0 };
        deriv[k] = probe_flow + memory_flow - mu * (here - below);
    }
    Ok(deriv)
}

/// Integrates the transient tail ODEs from `u_init` (tails from k = 1; an
/// empty slice is the empty system) over `horizon` with a fixed-step
/// classical Runge-Kutta scheme. pi0 is recomputed from the scheme at every
/// stage. At most ~100k states are recorded; long runs are thinned.
pub fn sq_transient(
    d: u32,
    lambda: f64,
    mu: f64,
    scheme: &MemoryScheme,
    u_init: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<SqTransient> {
    if d < 1 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    check_rates(lambda, mu)?;
    scheme.validate()?;
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(
            "need dt > 0 and horizon >= 0".into(),
        ));
    }
    let mut prev = 1.0;
    for (k, &x) in u_init.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) || x > prev + 1e-12 {
            return Err(Error::InvalidState(format!(
                "initial tails must be nonincreasing within [0, 1]; entry {k} breaks that"
            )));
        }
        prev = x;
    }

    // Truncation: everything the equilibrium envelope (pi0 = 1) or the
    // initial state can reach above tail_eps, with padding for transient
    // overshoot; beyond it the tails are reflected to zero.
    let envelope = sq_queue_tail(d, lambda, mu, 1.0)?;
    let significant = u_init.iter().take_while(|&&x| x > TAIL_EPS).count();
    let k_max = (envelope.u.len().max(significant + 1) + 8).max(12);

    let mut state = vec![0.0; k_max];
    state[..u_init.len().min(k_max)].copy_from_slice(&u_init[..u_init.len().min(k_max)]);

    let steps = (horizon / dt).ceil() as usize;
    let record_every = (steps / 100_000).max(1);
    let mut out = SqTransient {
        times: Vec::new(),
        tails: Vec::new(),
        pi0_trace: Vec::new(),
    };
    let rhs = |s: &[f64]| sq_transient_derivative(d, lambda, mu, scheme, s);
    let record = |out: &mut SqTransient, t: f64, s: &[f64]| -> Result<()> {
        let rho_now = s[0].clamp(0.0, 1.0 - 1e-12);
        out.times.push(t);
        out.tails.push(s.to_vec());
        out.pi0_trace.push(memory::pi0(scheme, rho_now)?.pi0);
        Ok(())
    };
    record(&mut out, 0.0, &state)?;
    for step in 0..steps {
        let k1 = rhs(&state)?;
        let k2 = rhs(&axpy(&state, &k1, dt / 2.0))?;
        let k3 = rhs(&axpy(&state, &k2, dt / 2.0))?;
        let k4 = rhs(&axpy(&state, &k3, dt))?;
        for i in 0..k_max {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            state[i] = state[i].clamp(0.0, 1.0);
        }
        if (step + 1) % record_every == 0 || step + 1 == steps {
            record(&mut out, (step + 1) as f64 * dt, &state)?;
        }
    }
    Ok(out)
}

fn axpy(base: &[f64], dir: &[f64], scale: f64) -> Vec<f64> {
    base.iter().zip(dir).map(|(x, dx)| x + scale * dx).collect()
}

// ---------------------------------------------------------------------------
// Phase-type job sizes
// ---------------------------------------------------------------------------

/// Equilibrium per-phase tails for phase-type job sizes.
///
/// Solves the memoryless per-phase system at the reduced rate
/// lambda' = lambda pi0^{1/d} by time-stepping
///
///   d/dt v_{1,j} = alpha_j lambda' (1 - v_1^d)
///                  + sum_{j'} (v_{1,j'} A_{j',j} + v_{2,j'} nu_{j'} alpha_j)
///   d/dt v_{k,j} = lambda' (v_{k-1,j} - v_{k,j})
///                    * (v_{k-1}^d - v_k^d)/(v_{k-1} - v_k)
///                  + sum_{j'} (v_{k,j'} A_{j',j} + v_{k+1,j'} nu_{j'} alpha_j)
///
/// to stationarity, then maps back through u_{k,j} = pi0^{-1/d} v_{k,j}.
/// The divided difference is evaluated as sum_i v_{k-1}^i v_k^{d-1-i},
/// which never divides by a vanishing gap.
pub fn sq_ph_equilibrium(
    d: u32,
    lambda: f64,
    dist: &JobSizeDistribution,
    pi0: f64,
) -> Result<SqCavitySolution> {
    if d < 1 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    check_pi0(pi0)?;
    let mean = dist.mean();
    let mu = 1.0 / mean;
    check_rates(lambda, mu)?;
    let rho = lambda * mean;
    if pi0 == 0.0 {
        return Ok(SqCavitySolution {
            d,
            lambda,
            mu,
            pi0,
            lambda_eff: 0.0,
            u: vec![1.0, rho],
            phase_tails: None,
            tail_eps: TAIL_EPS,
        });
    }
    let (alpha, a) = dist.as_phase_type();
    let n = alpha.len();
    let nu: Vec<f64> = a.iter().map(|row| -row.iter().sum::<f64>()).collect();
    let shrink = pi0.powf(1.0 / d as f64);
    let lambda_eff = lambda * shrink;

    // Initial truncation from the exponential envelope at the same load;
    // extended on the fly if mass reaches the last level.
    let mut k_max = sq_queue_tail(d, lambda_eff, mu, 1.0)?.u.len().max(6) + 4;
    let mut v = vec![vec![0.0; n]; k_max];

    // Explicit RK4 with a step bounded by the fastest phase rate.
    let rate_bound = a
        .iter()
        .enumerate()
        .map(|(i, row)| -row[i])
        .fold(0.0f64, f64::max)
        + lambda_eff * d as f64
        + 1.0;
    let dt = 0.2 / rate_bound;
    let max_steps = 50_000_000usize;

    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut step = 0usize;
    while step < max_steps {
        let k1 = ph_derivative(&v, &alpha, &a, &nu, lambda_eff, d);
        residual = k1.iter().flatten().fold(0.0f64, |m, &x| m.max(x.abs()));
        if residual < 1e-10 {
            converged = true;
            break;
        }
        let k2 = ph_derivative(&ph_axpy(&v, &k1, dt / 2.0), &alpha, &a, &nu, lambda_eff, d);
        let k3 = ph_derivative(&ph_axpy(&v, &k2, dt / 2.0), &alpha, &a, &nu, lambda_eff, d);
        let k4 = ph_derivative(&ph_axpy(&v, &k3, dt), &alpha, &a, &nu, lambda_eff, d);
        for k in 0..v.len() {
            for j in 0..n {
                v[k][j] += dt / 6.0 * (k1[k][j] + 2.0 * k2[k][j] + 2.0 * k3[k][j] + k4[k][j]);
                v[k][j] = v[k][j].clamp(0.0, 1.0);
            }
        }
        // Keep one empty level of headroom above the highest occupied one.
        let top: f64 = v.last().unwrap().iter().sum();
        if top > TAIL_EPS {
            k_max += 4;
            v.resize(k_max, vec![0.0; n]);
        }
        step += 1;
    }
    if !converged {
        return Err(Error::NonConvergence {
            context: "phase-type cavity equilibrium".into(),
            residual,
        });
    }

    let mut u = vec![1.0];
    let mut phase_tails = Vec::new();
    for row in &v {
        let unscaled: Vec<f64> = row.iter().map(|x| x / shrink).collect();
        let total: f64 = unscaled.iter().sum();
        if total < TAIL_EPS {
            break;
        }
        u.push(total);
        phase_tails.push(unscaled);
    }
    Ok(SqCavitySolution {
        d,
        lambda,
        mu,
        pi0,
        lambda_eff,
        u,
        phase_tails: Some(phase_tails),
        tail_eps: TAIL_EPS,
    })
}

fn ph_axpy(v: &[Vec<f64>], dv: &[Vec<f64>], scale: f64) -> Vec<Vec<f64>> {
    v.iter()
        .zip(dv)
        .map(|(row, drow)| row.iter().zip(drow).map(|(x, dx)| x + scale * dx).collect())
        .collect()
}

fn ph_derivative(
    v: &[Vec<f64>],
    alpha: &[f64],
    a: &[Vec<f64>],
    nu: &[f64],
    lambda: f64,
    d: u32,
) -> Vec<Vec<f64>> {
    let n = alpha.len();
    let k_max = v.len();
    let totals: Vec<f64> = v.iter().map(|row| row.iter().sum()).collect();
    let mut out = vec![vec![0.0; n]; k_max];
    for k in 0..k_max {
        let total_above = if k == 0 { 1.0 } else { totals[k - 1] };
        let total_here = totals[k];
        // (a^d - b^d)/(a - b) without the division.
        let mut divided_diff = 0.0;
        let mut pow_above = 1.0;
        for i in 0..d {
            divided_diff += pow_above * total_here.powi((d - 1 - i) as i32);
            pow_above *= total_above;
        }
        for j in 0..n {
            let arrival = if k == 0 {
                alpha[j] * lambda * (1.0 - total_here.powi(d as i32))
            } else {
                lambda * (v[k - 1][j] - v[k][j]) * divided_diff
            };
            let mut phase_flow = 0.0;
            for j2 in 0..n {
                phase_flow += v[k][j2] * a[j2][j];
                if k + 1 < k_max {
                    phase_flow += v[k + 1][j2] * nu[j2] * alpha[j];
                }
            }
            out[k][j] = arrival + phase_flow;
        }
    }
    out
}

/// Response-time distribution for phase-type job sizes, assembled from an
/// equilibrium solution as the mixture
///
/// P{R > w} = (1 - pi0) Gbar(w)
///          + pi0 [ (1 - u_1^d) Gbar(w)
///                + sum_{k>=1} sum_j (u_{k,j} - u_{k+1,j})/(u_k - u_{k+1})
///                    * (u_k^d - u_{k+1}^d) P{X_{k,j} > w} ]
///
/// where X_{k,j} is the service stack: residual service from phase j plus
/// k further services. Every component is itself phase-type, so both the
/// tail and the mean are exact.
pub struct SqPhResponse {
    /// Total weight on a bare service time Gbar.
    fresh_weight: f64,
    /// (weight, stack distribution) terms of the mixture.
    terms: Vec<(f64, JobSizeDistribution)>,
    dist: JobSizeDistribution,
}

pub fn sq_ph_response(sol: &SqCavitySolution, dist: &JobSizeDistribution) -> Result<SqPhResponse> {
    let phase_tails = match (&sol.phase_tails, sol.pi0) {
        (_, p) if p == 0.0 => {
            // Every job starts service immediately.
            return Ok(SqPhResponse {
                fresh_weight: 1.0,
                terms: Vec::new(),
                dist: dist.clone(),
            });
        }
        (Some(pt), _) => pt,
        (None, _) => {
            return Err(Error::InvalidState(
                "response mixture needs per-phase tails (phase-type equilibrium)".into(),
            ))
        }
    };
    let n = dist.as_phase_type().0.len();
    let d = sol.d as i32;
    let u1 = sol.tail(1);
    let mut terms = Vec::new();
    for k in 1..=phase_tails.len() {
        let here = sol.tail(k);
        let below = sol.tail(k + 1);
        let gap = here - below;
        let jump = here.powi(d) - below.powi(d);
        if gap <= 1e-300 || jump <= 0.0 {
            continue;
        }
        for j in 0..n {
            let here_j = phase_tails[k - 1][j];
            let below_j = phase_tails.get(k).map(|row| row[j]).unwrap_or(0.0);
            let weight = (here_j - below_j) / gap * jump;
            if weight <= 0.0 {
                continue;
            }
            terms.push((sol.pi0 * weight, ph_service_stack(dist, j, k)?));
        }
    }
    Ok(SqPhResponse {
        fresh_weight: (1.0 - sol.pi0) + sol.pi0 * (1.0 - u1.powi(d)),
        terms,
        dist: dist.clone(),
    })
}

impl SqPhResponse {
    pub fn ccdf(&self, w: f64) -> Result<f64> {
        if w < 0.0 {
            return Err(Error::Domain(format!(
                "response tail needs w >= 0, got {w}"
            )));
        }
        let mut acc = self.fresh_weight * self.dist.tail(w);
        for (weight, stack) in &self.terms {
            acc += weight * stack.tail(w);
        }
        Ok(acc)
    }

    /// Exact mean of the mixture (each component is phase-type).
    pub fn mean(&self) -> f64 {
        let mut acc = self.fresh_weight * self.dist.mean();
        for (weight, stack) in &self.terms {
            acc += weight * stack.mean();
        }
        acc
    }
}

/// Mean response time of the d = 1 idle-queue policy (dispatch to a
/// remembered idle server when one exists, else to a uniformly random
/// server) with memory capacity `A`: an M/G/1 queue at the reduced rate
/// lambda' = lambda pi0, through the Pollaczek-Khinchine mean.
pub fn jiq_mean_response(lambda: f64, dist: &JobSizeDistribution, a: u32) -> Result<f64> {
    let mean = dist.mean();
    check_rates(lambda, 1.0 / mean)?;
    let rho = lambda * mean;
    let pi0 = if a == 0 {
        1.0
    } else {
        -((-rho).ln_1p() / (a as f64 + 1.0)).exp_m1() / rho
    };
    let lambda_eff = lambda * pi0;
    let m2 = dist.second_moment();
    Ok(mean + lambda_eff * m2 / (2.0 * (1.0 - lambda_eff * mean)))
}
