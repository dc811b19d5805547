//! Exact analysis and simulation of randomized load balancing with
//! dispatcher-side memory of idle servers.
//!
//! A dispatcher routes jobs to `N` homogeneous FCFS servers. When its memory
//! holds idle-server ids the job goes to one of them; otherwise it probes `d`
//! servers at random and applies SQ(d) (join the shortest of d queues) or
//! LL(d) (join the least-loaded of d, by remaining workload). Four discovery
//! schemes keep the memory populated:
//!
//! * **IP**, interrupted probing: probe only when the memory is empty, keep
//!   the leftover idle ids.
//! * **CP**, continuous probing: probe on every arrival, unbounded memory.
//! * **BCP(A)**: continuous probing with memory capped at `A` ids.
//! * **ISM(A)**: idle servers message the dispatcher when they become idle;
//!   memory capped at `A` ids.
//!
//! In the mean-field (large-N) limit the whole effect of the memory on a
//! tagged queue is a single number: the probability `pi0` that an arrival
//! finds the memory empty. The system with memory at arrival rate `lambda`
//! behaves exactly like the memoryless system at the reduced rate
//! `lambda * pi0^(1/d)`, which turns every memoryless SQ(d)/LL(d) formula
//! into one for the memory-augmented system. This crate implements:
//!
//! * [`memory`]: `pi0` for every scheme (closed forms plus exact chain
//!   solves) and probe/message cost accounting,
//! * [`jobsize`]: exponential, balanced hyperexponential and phase-type job
//!   size distributions with moments, tails, densities and sampling,
//! * [`cavity_sq`]: SQ(d) queue-length tails, response-time distribution
//!   and mean for exponential and phase-type sizes, transient dynamics, and
//!   the d=1 idle-queue special case,
//! * [`cavity_ll`]: LL(d) workload and response distributions, as an
//!   exponential closed form and a fixed-point solver for general job sizes,
//! * [`asymptotics`]: heavy-traffic constants and low-traffic ratios,
//! * [`sim`]: a seeded event-driven simulator of the finite-N system,
//! * [`cli`]: the `memlb` command-line front end.
//!
//! The `examples/` directory exercises each capability end to end; start
//! with `cargo run --example pi0_schemes`.

pub mod asymptotics;
pub mod cavity_ll;
pub mod cavity_sq;
pub mod cli;
mod error;
pub mod jobsize;
mod linalg;
pub mod memory;
pub mod sim;

pub use error::{Error, Result};
pub use jobsize::JobSizeDistribution;
pub use memory::{MemoryScheme, MemoryStationary, SchemeKind};

/// Rule for picking among the `d` probed servers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Join the probed server with the shortest queue (ties at random).
    Sq,
    /// Join the probed server with the least remaining workload.
    Ll,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Sq => "sq",
            Policy::Ll => "ll",
        }
    }
}
