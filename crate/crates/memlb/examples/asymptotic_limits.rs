//! Extreme-load behaviour: the heavy-traffic constants that mean response
//! times approach as lambda -> 1, and the low-traffic ratios that rank
//! policies as lambda -> 0.

use memlb::asymptotics::{
    heavy_traffic_corroborate, heavy_traffic_limit, low_traffic_ratio, pi0_zero_load,
};
use memlb::memory::{MemoryScheme, SchemeKind};
use memlb::Policy;

fn main() -> memlb::Result<()> {
    let none2 = MemoryScheme::new(SchemeKind::None, 2, None)?;
    let ism2 = MemoryScheme::new(SchemeKind::Ism, 2, Some(1))?;

    // E[R] grows like -c * log(1 - lambda); the constant c depends only on
    // the policy, d, and (for idle-server messaging) the capacity.
    println!("heavy traffic: lim -E[R] / log(1 - lambda) as lambda -> 1\n");
    for (policy, scheme) in [
        (Policy::Sq, &none2),
        (Policy::Sq, &ism2),
        (Policy::Ll, &none2),
        (Policy::Ll, &ism2),
    ] {
        let limit = heavy_traffic_limit(policy, scheme)?;
        let seq = heavy_traffic_corroborate(policy, scheme, &[0.99, 0.999, 0.9999])?;
        println!("{}: limit {:.6}", limit.regime, limit.value);
        println!(
            "  -E[R]/log(1-lambda) at 0.99 / 0.999 / 0.9999: {:.4} / {:.4} / {:.4}",
            seq[0], seq[1], seq[2]
        );
        println!(
            "  (approach is logarithmically slow; still {:.1}% off at 0.9999)\n",
            100.0 * (seq[2] - limit.value).abs() / limit.value
        );
    }

    // At vanishing load the mean waiting times are polynomial in lambda,
    // and ratios of them are governed by d first, pi0 limits second.
    println!("low traffic: lim E[W_1] / E[W_2] as lambda -> 0\n");
    let ip3 = MemoryScheme::new(SchemeKind::Ip, 3, None)?;
    let none3 = MemoryScheme::new(SchemeKind::None, 3, None)?;
    let pairs = [
        (Policy::Sq, &none3, Policy::Sq, &none2),
        (Policy::Sq, &none2, Policy::Sq, &none3),
        (Policy::Sq, &ip3, Policy::Sq, &none3),
        (Policy::Sq, &none3, Policy::Ll, &none3),
    ];
    for (p1, s1, p2, s2) in pairs {
        let r = low_traffic_ratio(p1, s1, p2, s2)?;
        println!("{}: {}", r.regime, r.value);
    }

    println!("\nzero-load pi0 limits behind those ratios:");
    for scheme in [
        &none3,
        &ip3,
        &MemoryScheme::new(SchemeKind::Ism, 3, Some(4))?,
    ] {
        let z = pi0_zero_load(scheme)?;
        println!("  {}: {}", z.regime, z.value);
    }
    Ok(())
}
