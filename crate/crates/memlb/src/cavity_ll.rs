//! Cavity analysis of LL(d): workload and response of the tagged queue.
//!
//! The equilibrium workload ccdf F(w) = P{V > w} of the cavity queue
//! solves the fixed-point equation
//!
//!   F(w) = rho - lambda * int_0^w (1 - pi0 F(u)^d) Gbar(w - u) du
//!
//! with F(0) = rho. For exponential job sizes it closes to an explicit
//! formula; for anything else this module iterates the equation on a
//! uniform grid, accelerating the convolution with an FFT. The response
//! time of an arriving job is the minimum of d sampled workloads plus its
//! own service, giving
//!
//!   P{R > w} = Gbar(w) + pi0 * int_0^w F(w - u)^d g(u) du.
//!
//! The memory rescaling mirrors the queue-length case: pi0^{1/d} F under
//! (lambda, pi0) equals F under (lambda pi0^{1/d}, 1) pointwise, and the
//! response distributions coincide.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::jobsize::JobSizeDistribution;
use crate::{Error, Result};

/// Controls for the grid fixed-point solver.
#[derive(Debug, Clone)]
pub struct GridParams {
    /// Grid step; defaults to mean/1000.
    pub h: Option<f64>,
    /// Right end of the grid; defaults to an automatic choice that is
    /// doubled until the solution tail drops below 1e-10.
    pub w_max: Option<f64>,
    /// Initial damping factor of the Picard update.
    pub damping: f64,
    /// Sup-norm change at which the iteration stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            h: None,
            w_max: None,
            damping: 0.5,
            tol: 1e-10,
            max_iters: 500,
        }
    }
}

/// Workload ccdf of the cavity queue on a uniform grid.
#[derive(Debug, Clone)]
pub struct LlCavitySolution {
    pub d: u32,
    pub lambda: f64,
    pub pi0: f64,
    /// Grid step; fbar[i] approximates F(i * h).
    pub h: f64,
    pub fbar: Vec<f64>,
    pub dist: JobSizeDistribution,
    pub iterations: usize,
    /// Sup-norm change of the last accepted update.
    pub residual: f64,
}

impl LlCavitySolution {
    pub fn w_max(&self) -> f64 {
        self.h * (self.fbar.len() - 1) as f64
    }

    /// Linear interpolation of the workload ccdf on the grid.
    pub fn value(&self, w: f64) -> Result<f64> {
        if w < 0.0 {
            return Err(Error::Domain(format!(
                "workload ccdf needs w >= 0, got {w}"
            )));
        }
        if w > self.w_max() {
            return Err(Error::Domain(format!(
                "w = {w} lies beyond the solved grid (w_max = {}); re-solve with a larger w_max",
                self.w_max()
            )));
        }
        Ok(self.interp(w))
    }

    /// Interpolation that treats everything beyond the grid as zero (the
    /// solver guarantees the tail there is below 1e-10).
    fn interp(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return self.fbar[0];
        }
        let x = w / self.h;
        let i = x.floor() as usize;
        if i + 1 >= self.fbar.len() {
            return if i < self.fbar.len() {
                self.fbar[i]
            } else {
                0.0
            };
        }
        let frac = x - i as f64;
        self.fbar[i] * (1.0 - frac) + self.fbar[i + 1] * frac
    }
}

fn check_common(d: u32, lambda: f64, mean: f64, pi0: f64) -> Result<()> {
    if d < 1 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if lambda * mean >= 1.0 {
        return Err(Error::Unstable(format!(
            "load rho = {} >= 1: the workload has no equilibrium",
            lambda * mean
        )));
    }
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::InvalidParameter(format!(
            "pi0 must lie in [0, 1], got {pi0}"
        )));
    }
    Ok(())
}

/// Closed-form workload ccdf for exponential(mu) job sizes:
///
///   d >= 2: F(w) = (rho pi0 + (rho^{1-d} - rho pi0) e^{(d-1) mu w})^{1/(1-d)}
///   d  = 1: F(w) = rho e^{-(mu - lambda pi0) w}
///
/// evaluated in log space so large w cannot overflow the exponential.
pub fn ll_workload_ccdf_exp(d: u32, lambda: f64, mu: f64, pi0: f64, w: f64) -> Result<f64> {
    check_common(d, lambda, 1.0 / mu, pi0)?;
    if w < 0.0 {
        return Err(Error::Domain(format!(
            "workload ccdf needs w >= 0, got {w}"
        )));
    }
    let rho = lambda / mu;
    if d == 1 {
        return Ok(rho * (-(mu - lambda * pi0) * w).exp());
    }
    let a = rho * pi0;
    let b = rho.powi(1 - d as i32) - a;
    // (a + b e^x)^{1/(1-d)} = exp((x + ln(b + a e^{-x})) / (1 - d))
    let x = (d as f64 - 1.0) * mu * w;
    Ok(((x + (b + a * (-x).exp()).ln()) / (1.0 - d as f64)).exp())
}

/// Mean response time for exponential(mu) job sizes, by the series
///
///   E[R] = (1/lambda') sum_{n>=0} rho'^{dn+1} / (1 + n(d-1)),
///
/// lambda' = lambda pi0^{1/d}, rho' = lambda'/mu. The d = 1 case telescopes
/// to 1/(mu - lambda pi0).
pub fn ll_mean_response_exp(d: u32, lambda: f64, mu: f64, pi0: f64) -> Result<f64> {
    check_common(d, lambda, 1.0 / mu, pi0)?;
    if pi0 == 0.0 {
        // Arrivals always find an idle server.
        return Ok(1.0 / mu);
    }
    if d == 1 {
        return Ok(1.0 / (mu - lambda * pi0));
    }
    let lambda_eff = lambda * pi0.powf(1.0 / d as f64);
    let rho_eff = lambda_eff / mu;
    let log_rho = rho_eff.ln();
    let mut acc = 0.0;
    let mut n = 0u64;
    loop {
        let term =
            ((d as f64 * n as f64 + 1.0) * log_rho).exp() / (1.0 + n as f64 * (d as f64 - 1.0));
        acc += term;
        if term < acc * 1e-17 {
            break;
        }
        n += 1;
    }
    Ok(acc / lambda_eff)
}

/// Response-time ccdf for exponential(mu) job sizes, by Simpson quadrature
/// of Gbar(w) + pi0 int_0^w F(w-u)^d g(u) du over the closed-form workload.
pub fn ll_response_ccdf_exp(d: u32, lambda: f64, mu: f64, pi0: f64, w: f64) -> Result<f64> {
    check_common(d, lambda, 1.0 / mu, pi0)?;
    if w < 0.0 {
        return Err(Error::Domain(format!(
            "response ccdf needs w >= 0, got {w}"
        )));
    }
    let gbar = (-mu * w).exp();
    if pi0 == 0.0 || w == 0.0 {
        return Ok(gbar);
    }
    let n = 2000;
    let h = w / n as f64;
    let integrand = |u: f64| -> Result<f64> {
        Ok(ll_workload_ccdf_exp(d, lambda, mu, pi0, w - u)?.powi(d as i32) * mu * (-mu * u).exp())
    };
    let mut acc = integrand(0.0)? + integrand(w)?;
    for i in 1..n {
        let coeff = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += coeff * integrand(i as f64 * h)?;
    }
    Ok(gbar + pi0 * acc * h / 3.0)
}

// ---------------------------------------------------------------------------
// Grid fixed point for general job sizes
// ---------------------------------------------------------------------------

/// Solves the workload fixed-point equation on a uniform grid by damped
/// Picard iteration, with the convolution against Gbar done by FFT.
///
/// The grid extends until the solution tail falls below 1e-10, doubling
/// the window as needed (up to 12 times). The damping factor opens up
/// toward 1 while the iteration contracts monotonically.
pub fn ll_fixed_point(
    d: u32,
    lambda: f64,
    dist: &JobSizeDistribution,
    pi0: f64,
    params: &GridParams,
) -> Result<LlCavitySolution> {
    let mean = dist.mean();
    check_common(d, lambda, mean, pi0)?;
    if !(params.damping > 0.0 && params.damping <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in (0, 1], got {}",
            params.damping
        )));
    }
    let h = params.h.unwrap_or(mean * 1e-3);
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid step must be positive, got {h}"
        )));
    }

    let mut w_max = match params.w_max {
        Some(w) => {
            if !(w > h) {
                return Err(Error::InvalidParameter(format!(
                    "w_max = {w} must exceed the grid step {h}"
                )));
            }
            w
        }
        None => {
            // Start where the job-size tail is already negligible; the
            // solution tail check below extends further if needed.
            let mut w = 30.0 * mean;
            let mut grow = 0;
            while dist.tail(w) > 1e-9 && grow < 12 {
                w *= 2.0;
                grow += 1;
            }
            w
        }
    };

    let explicit_window = params.w_max.is_some();
    let mut doublings = 0;
    loop {
        let sol = solve_on_grid(d, lambda, dist, pi0, h, w_max, params)?;
        let tail = *sol.fbar.last().unwrap();
        if tail < 1e-10 || explicit_window {
            return Ok(sol);
        }
        doublings += 1;
        if doublings > 12 {
            return Err(Error::NonConvergence {
                context: "workload grid window doubling".into(),
                residual: tail,
            });
        }
        w_max *= 2.0;
    }
}

fn solve_on_grid(
    d: u32,
    lambda: f64,
    dist: &JobSizeDistribution,
    pi0: f64,
    h: f64,
    w_max: f64,
    params: &GridParams,
) -> Result<LlCavitySolution> {
    let rho = lambda * dist.mean();
    let m = (w_max / h).ceil() as usize;
    let gbar = tail_grid(dist, h, m);

    // c_i = rho - lambda int_0^{ih} Gbar, the pi0 = 0 part of the equation.
    let mut c = Vec::with_capacity(m + 1);
    let mut cum = 0.0;
    c.push(rho);
    for i in 1..=m {
        cum += 0.5 * (gbar[i - 1] + gbar[i]);
        c.push(rho - lambda * h * cum);
    }

    if pi0 == 0.0 {
        let mut fbar = c;
        finalize(&mut fbar, rho);
        return Ok(LlCavitySolution {
            d,
            lambda,
            pi0,
            h,
            fbar,
            dist: dist.clone(),
            iterations: 0,
            residual: 0.0,
        });
    }

    let conv = Convolver::new(&gbar);
    let mut fbar: Vec<f64> = gbar.iter().map(|g| rho * g).collect();
    let mut s = vec![0.0; m + 1];
    let mut theta = params.damping;
    let mut changes: Vec<f64> = Vec::new();

    for iter in 1..=params.max_iters {
        for i in 0..=m {
            s[i] = fbar[i].powi(d as i32);
        }
        let raw = conv.convolve(&s);
        let mut change = 0.0f64;
        for i in 0..=m {
            // Trapezoid end corrections of the convolution at lag i.
            let integral = h * (raw[i] - 0.5 * (s[0] * gbar[i] + s[i] * gbar[0]));
            // Clamp before measuring progress: quadrature bias can push the
            // raw target a hair below zero deep in the tail, and the fixed
            // point sought is that of the projected map.
            let target = (c[i] + lambda * pi0 * integral).clamp(0.0, 1.0);
            change = change.max((target - fbar[i]).abs());
            fbar[i] = (1.0 - theta) * fbar[i] + theta * target;
        }
        if change < params.tol {
            finalize(&mut fbar, rho);
            return Ok(LlCavitySolution {
                d,
                lambda,
                pi0,
                h,
                fbar,
                dist: dist.clone(),
                iterations: iter,
                residual: change,
            });
        }
        changes.push(change);
        let k = changes.len();
        if k >= 5 && changes[k - 5..].windows(2).all(|w| w[1] < w[0]) {
            theta = (theta * 1.2).min(1.0);
        } else if k >= 2 && change > 10.0 * changes[k - 2] {
            theta = (theta * 0.5).max(0.05);
        }
    }
    Err(Error::NonConvergence {
        context: "workload fixed-point iteration".into(),
        residual: *changes.last().unwrap(),
    })
}

/// Enforce the structure the exact solution has: F(0) = rho, values in
/// [0, rho], nonincreasing.
fn finalize(fbar: &mut [f64], rho: f64) {
    fbar[0] = rho;
    for i in 1..fbar.len() {
        fbar[i] = fbar[i].clamp(0.0, fbar[i - 1]);
    }
}

/// Job-size ccdf on the grid. Phase-type tails are propagated one step at
/// a time with the matrix exponential of a single step, which keeps the
/// cost linear in the grid size.
fn tail_grid(dist: &JobSizeDistribution, h: f64, m: usize) -> Vec<f64> {
    match dist {
        JobSizeDistribution::PhaseType { alpha, a } => {
            let n = alpha.len();
            // step[i] = row i of e^{A h}
            let step: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    crate::jobsize::expm_action_row(a, &e, h)
                })
                .collect();
            let mut beta = alpha.clone();
            let mut out = Vec::with_capacity(m + 1);
            out.push(beta.iter().sum());
            for _ in 0..m {
                let mut next = vec![0.0; n];
                for (j, b) in beta.iter().enumerate() {
                    if *b == 0.0 {
                        continue;
                    }
                    for (k, nk) in next.iter_mut().enumerate() {
                        *nk += b * step[j][k];
                    }
                }
                beta = next;
                out.push(beta.iter().sum::<f64>().max(0.0));
            }
            out
        }
        _ => (0..=m).map(|i| dist.tail(i as f64 * h)).collect(),
    }
}

/// Job-size density on the grid, by the same propagation for phase type.
fn density_grid(dist: &JobSizeDistribution, h: f64, m: usize) -> Vec<f64> {
    match dist {
        JobSizeDistribution::PhaseType { alpha, a } => {
            let n = alpha.len();
            let nu: Vec<f64> = a.iter().map(|row| -row.iter().sum::<f64>()).collect();
            let step: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    crate::jobsize::expm_action_row(a, &e, h)
                })
                .collect();
            let mut beta = alpha.clone();
            let mut out = Vec::with_capacity(m + 1);
            let dot = |b: &[f64]| b.iter().zip(&nu).map(|(x, y)| x * y).sum::<f64>();
            out.push(dot(&beta));
            for _ in 0..m {
                let mut next = vec![0.0; n];
                for (j, b) in beta.iter().enumerate() {
                    for (k, nk) in next.iter_mut().enumerate() {
                        *nk += b * step[j][k];
                    }
                }
                beta = next;
                out.push(dot(&beta).max(0.0));
            }
            out
        }
        _ => (0..=m)
            .map(|i| dist.density_unchecked(i as f64 * h))
            .collect(),
    }
}

struct Convolver {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    n: usize,
    m: usize,
    kernel_hat: Vec<Complex<f64>>,
}

impl Convolver {
    fn new(kernel: &[f64]) -> Self {
        let m = kernel.len() - 1;
        let n = (2 * (m + 1)).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let mut kernel_hat: Vec<Complex<f64>> = kernel
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(n)
            .collect();
        fft.process(&mut kernel_hat);
        Convolver {
            fft,
            ifft,
            n,
            m,
            kernel_hat,
        }
    }

    /// Linear convolution with the kernel, truncated to the grid:
    /// out[i] = sum_{j=0}^{i} s[j] kernel[i-j].
    fn convolve(&self, s: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = s
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.n)
            .collect();
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf[..=self.m].iter().map(|z| z.re * scale).collect()
    }
}

// ---------------------------------------------------------------------------
// Response and means from a grid solution
// ---------------------------------------------------------------------------

/// Response-time ccdf Gbar(w) + pi0 int_0^w F(w-u)^d g(u) du by trapezoid
/// over the solved grid.
pub fn ll_response_ccdf(sol: &LlCavitySolution, w: f64) -> Result<f64> {
    if w < 0.0 {
        return Err(Error::Domain(format!(
            "response ccdf needs w >= 0, got {w}"
        )));
    }
    let gbar = sol.dist.tail(w);
    if sol.pi0 == 0.0 || w == 0.0 {
        return Ok(gbar);
    }
    let steps = ((w / sol.h).ceil() as usize).max(1);
    let h = w / steps as f64;
    let g = density_grid(&sol.dist, h, steps);
    let mut acc = 0.0;
    for (i, &gi) in g.iter().enumerate() {
        let u = i as f64 * h;
        let weight = if i == 0 || i == steps { 0.5 } else { 1.0 };
        acc += weight * sol.interp(w - u).powi(sol.d as i32) * gi;
    }
    Ok(gbar + sol.pi0 * acc * h)
}

/// Mean response time E[G] + pi0 int_0^inf F^d, the integral by trapezoid
/// over the solved grid.
pub fn ll_mean_response(sol: &LlCavitySolution) -> f64 {
    let d = sol.d as i32;
    let mut acc = 0.0;
    for (i, &f) in sol.fbar.iter().enumerate() {
        let weight = if i == 0 || i == sol.fbar.len() - 1 {
            0.5
        } else {
            1.0
        };
        acc += weight * f.powi(d);
    }
    sol.dist.mean() + sol.pi0 * acc * sol.h
}

/// Mean workload int_0^inf F, by trapezoid over the solved grid.
pub fn ll_mean_workload(sol: &LlCavitySolution) -> f64 {
    let mut acc = 0.0;
    for (i, &f) in sol.fbar.iter().enumerate() {
        let weight = if i == 0 || i == sol.fbar.len() - 1 {
            0.5
        } else {
            1.0
        };
        acc += weight * f;
    }
    acc * sol.h
}
