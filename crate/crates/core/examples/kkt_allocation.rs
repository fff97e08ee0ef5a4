//! Fractional cache shares for the decentralized scheme from the convex
//! program, with its optimality certificate.

use coded_caching::decentralized::{ergodic_rate, kkt_optimize, FractionalAllocation};
use coded_caching::PopularityProfile;

fn main() -> coded_caching::Result<()> {
    let (files, users) = (50, 10);
    let profile = PopularityProfile::from_zipf(files, 0.9)?;

    for cache in [2.0, 10.0, 30.0] {
        let sol = kkt_optimize(&profile, users, cache)?;
        let uniform = FractionalAllocation::uniform(files, users, cache)?;
        let r = sol.allocation.levels();
        let full = r.iter().filter(|&&x| x >= 1.0).count();
        let empty = r.iter().filter(|&&x| x <= 0.0).count();
        println!(
            "R_c = {cache:>4}: rate {:.5} (uniform {:.5}); {full} files fully cached, {empty} not cached",
            sol.rate,
            ergodic_rate(&profile, &uniform)?
        );
        println!(
            "          λ = {:.6}, max residual {:.1e}, budget residual {:.1e}",
            sol.certificate.lambda, sol.certificate.max_residual, sol.certificate.sum_residual
        );
        println!("          first shares: {:?}", r.iter().take(6).map(|x| (x * 1e3).round() / 1e3).collect::<Vec<_>>());
    }
    Ok(())
}
