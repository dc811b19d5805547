//! Job size variability and what it does to the two policies.
//!
//! Balanced hyperexponential sizes with a chosen squared coefficient of
//! variation feed the phase-type equilibrium solver for sq(d) and the
//! workload fixed point for ll(d). Least-loaded routing sees workloads,
//! not queue lengths, so it absorbs variability much more gracefully.

use memlb::cavity_ll::{ll_fixed_point, ll_mean_response, GridParams};
use memlb::cavity_sq::{sq_ph_equilibrium, sq_ph_response};
use memlb::jobsize::JobSizeDistribution;
use memlb::memory::{self, MemoryScheme, SchemeKind};

fn main() -> memlb::Result<()> {
    let d = 2;
    let lambda = 0.85;
    let scheme = MemoryScheme::new(SchemeKind::Ism, d, Some(10))?;
    let pi0 = memory::pi0(&scheme, lambda)?.pi0;

    println!("mean response at lambda = {lambda}, d = {d}, ism(10), mean size 1");
    println!("{:>6} {:>12} {:>12}", "scv", "sq(2)", "ll(2)");
    for scv in [1.0, 2.0, 3.0, 5.0, 8.0] {
        let dist = if scv == 1.0 {
            JobSizeDistribution::exponential(1.0)?
        } else {
            JobSizeDistribution::balanced_hyperexp(1.0, scv)?
        };

        let sq_sol = sq_ph_equilibrium(d, lambda, &dist, pi0)?;
        let sq_mean = sq_ph_response(&sq_sol, &dist)?.mean();

        let ll_sol = ll_fixed_point(d, lambda, &dist, pi0, &GridParams::default())?;
        let ll_mean = ll_mean_response(&ll_sol);

        println!("{scv:>6.1} {sq_mean:>12.6} {ll_mean:>12.6}");
    }

    // Any phase-type law works, not just the built-in families. Erlang-2
    // has scv = 1/2, smoother than exponential.
    let erlang2 =
        JobSizeDistribution::phase_type(vec![1.0, 0.0], vec![vec![-2.0, 2.0], vec![0.0, -2.0]])?;
    println!(
        "\nerlang-2 (mean {}, scv {}):",
        erlang2.mean(),
        erlang2.scv()
    );
    let sol = sq_ph_equilibrium(d, lambda, &erlang2, pi0)?;
    let resp = sq_ph_response(&sol, &erlang2)?;
    println!("  sq(2) mean response {:.6}", resp.mean());
    println!("  sq(2) response ccdf at w = 2: {:.6}", resp.ccdf(2.0)?);
    let ll = ll_fixed_point(d, lambda, &erlang2, pi0, &GridParams::default())?;
    println!("  ll(2) mean response {:.6}", ll_mean_response(&ll));
    Ok(())
}
