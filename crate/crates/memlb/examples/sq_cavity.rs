//! Shortest-of-d queues in the large-system limit, with and without
//! dispatcher memory.
//!
//! The whole effect of the memory is the reduced rate lambda' =
//! lambda * pi0^(1/d): queue-length tails of the memory system are the
//! memoryless tails at lambda' divided by pi0^(1/d), and the response
//! time distributions coincide. This example prints both sides of that
//! identity next to each other.

use memlb::cavity_sq::{sq_mean_response, sq_queue_tail, sq_response_ccdf};
use memlb::memory::{self, MemoryScheme, SchemeKind};

fn main() -> memlb::Result<()> {
    let d = 2;
    let lambda = 0.9;
    let mu = 1.0;

    let ism = MemoryScheme::new(SchemeKind::Ism, d, Some(2))?;
    let pi0 = memory::pi0(&ism, lambda / mu)?.pi0;
    let shrink = pi0.powf(1.0 / d as f64);
    let lambda_eff = lambda * shrink;

    println!("sq({d}) at lambda = {lambda}, ism(2) memory: pi0 = {pi0:.6}");
    println!("equivalent memoryless rate lambda' = {lambda_eff:.6}\n");

    let with_mem = sq_queue_tail(d, lambda, mu, pi0)?;
    let memoryless = sq_queue_tail(d, lambda_eff, mu, 1.0)?;

    // Tail identity: u_k(memory) = u_k(memoryless at lambda') / pi0^(1/d).
    println!("queue length tails P[Q >= k] (doubly exponential in k):");
    println!(
        "{:>3} {:>14} {:>14} {:>14}",
        "k", "with memory", "rescaled", "no memory"
    );
    let plain = sq_queue_tail(d, lambda, mu, 1.0)?;
    for k in 1..=6 {
        println!(
            "{:>3} {:>14.6e} {:>14.6e} {:>14.6e}",
            k,
            with_mem.tail(k),
            memoryless.tail(k) / shrink,
            plain.tail(k)
        );
    }

    // Response times need no rescaling at all; the distributions agree.
    println!("\nresponse time ccdf P[R > w]:");
    println!(
        "{:>6} {:>14} {:>14}",
        "w", "with memory", "memoryless at lambda'"
    );
    for w in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let a = sq_response_ccdf(d, lambda, mu, pi0, w)?;
        let b = sq_response_ccdf(d, lambda_eff, mu, 1.0, w)?;
        println!("{w:>6.1} {a:>14.8} {b:>14.8}");
    }

    println!(
        "\nmean response: {:.6} with memory, {:.6} without",
        sq_mean_response(d, lambda, mu, pi0)?,
        sq_mean_response(d, lambda, mu, 1.0)?
    );
    Ok(())
}
