//! How often does an arrival find the dispatcher memory empty?
//!
//! Prints pi0 for every discovery scheme over a load sweep, then looks at
//! one scheme's full stationary vector and at the continuous-probing
//! blow-up region where the memory chain stops being positive recurrent.
//!
//! Run with: cargo run --example pi0_schemes

use memlb::memory::{self, MemoryScheme, SchemeKind};

fn main() -> memlb::Result<()> {
    let d = 3;
    let a = 4;
    let schemes = [
        ("none", MemoryScheme::new(SchemeKind::None, d, None)?),
        ("ip", MemoryScheme::new(SchemeKind::Ip, d, None)?),
        ("cp", MemoryScheme::new(SchemeKind::Cp, d, None)?),
        ("bcp(4)", MemoryScheme::new(SchemeKind::Bcp, d, Some(a))?),
        ("ism(4)", MemoryScheme::new(SchemeKind::Ism, d, Some(a))?),
    ];

    println!("pi0 at d = {d} (smaller = memory helps more)");
    print!("{:>6}", "rho");
    for (name, _) in &schemes {
        print!("{name:>10}");
    }
    println!();
    for rho in [0.30, 0.50, 0.70, 0.80, 0.90, 0.95] {
        print!("{rho:>6.2}");
        for (_, scheme) in &schemes {
            let stat = memory::pi0(scheme, rho)?;
            print!("{:>10.6}", stat.pi0);
        }
        println!();
    }

    // The ISM chain is birth-death with geometric stationary law, so the
    // vector must sum to one and decay by a constant factor.
    let ism = MemoryScheme::new(SchemeKind::Ism, d, Some(a))?;
    let stat = memory::pi0(&ism, 0.8)?;
    let pi = stat.pi.expect("finite chain has a stationary vector");
    println!("\nism(4) stationary memory-size law at rho = 0.8:");
    for (k, p) in pi.iter().enumerate() {
        println!("  P[mem = {k}] = {p:.6}");
    }
    println!("  sum = {:.12}", pi.iter().sum::<f64>());

    // CP keeps probing regardless of memory content. Once d >= 1/(1-rho)
    // the discoveries outpace the arrivals that consume them and the
    // memory grows without bound: pi0 = 0 and the chain carries a note.
    let cp = MemoryScheme::new(SchemeKind::Cp, 2, None)?;
    println!("\ncontinuous probing at d = 2:");
    for rho in [0.6, 0.5, 0.4] {
        let stat = memory::pi0(&cp, rho)?;
        match stat.regime_note {
            Some(note) => println!("  rho = {rho}: pi0 = {} ({note})", stat.pi0),
            None => println!("  rho = {rho}: pi0 = {:.6}", stat.pi0),
        }
    }

    Ok(())
}
