//! Relaxation of an initially empty shortest-of-d system toward its
//! equilibrium, integrating the mean-field tail ODEs. The memory state is
//! not tracked explicitly; pi0 is re-evaluated at the instantaneous load
//! at every integrator stage, so the trace also shows the memory filling
//! up as the system loads.

use memlb::cavity_sq::{sq_queue_tail, sq_transient};
use memlb::memory::{self, MemoryScheme, SchemeKind};

fn main() -> memlb::Result<()> {
    let d = 2;
    let lambda = 0.9;
    let mu = 1.0;
    let scheme = MemoryScheme::new(SchemeKind::Ism, d, Some(3))?;

    let trace = sq_transient(d, lambda, mu, &scheme, &[], 40.0, 1e-3)?;

    println!("empty start, sq({d}) + ism(3), lambda = {lambda}");
    println!(
        "{:>7} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "t", "P[Q>=1]", "P[Q>=2]", "P[Q>=3]", "P[Q>=4]", "pi0(t)"
    );
    let step = trace.times.len() / 10;
    for i in (0..trace.times.len()).step_by(step.max(1)) {
        let tails = &trace.tails[i];
        println!(
            "{:>7.2} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            trace.times[i],
            tails.first().copied().unwrap_or(0.0),
            tails.get(1).copied().unwrap_or(0.0),
            tails.get(2).copied().unwrap_or(0.0),
            tails.get(3).copied().unwrap_or(0.0),
            trace.pi0_trace[i]
        );
    }

    // The fixed point of the ODEs is the equilibrium profile.
    let pi0 = memory::pi0(&scheme, lambda / mu)?.pi0;
    let eq = sq_queue_tail(d, lambda, mu, pi0)?;
    let last = trace.final_tail();
    let gap = last
        .iter()
        .enumerate()
        .map(|(k, &x)| (x - eq.tail(k + 1)).abs())
        .fold(0.0f64, f64::max);
    println!("\nsup distance to equilibrium after t = 40: {gap:.2e}");
    Ok(())
}
