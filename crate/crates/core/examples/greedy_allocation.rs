//! Integer replication levels for the centralized scheme, chosen greedily,
//! and the same optimizer run in exact rational arithmetic.

use coded_caching::centralized::{ergodic_rate, greedy_optimize, greedy_optimize_in, IntegerAllocation};
use coded_caching::exact::{rational, Rational};
use coded_caching::PopularityProfile;

fn main() -> coded_caching::Result<()> {
    let (files, users) = (12, 8);
    let profile = PopularityProfile::from_zipf(files, 1.1)?;

    for cache in [1.0, 3.0, 6.0] {
        let best = greedy_optimize(&profile, users, cache)?;
        let steps = (cache * users as f64).round() as usize;
        let even = IntegerAllocation::new(spread(files, steps, users), users)?;
        println!(
            "R_c = {cache}: levels {:?}, rate {:.5} (even spread {:.5})",
            best.allocation.levels(),
            best.rate,
            ergodic_rate(&profile, &even)?
        );
    }

    let probs: Vec<Rational> = [5, 3, 2].iter().map(|&w| rational(w, 10)).collect();
    let (levels, rate) = greedy_optimize_in(&probs, 3, 4);
    println!("\nexact: p = (1/2, 3/10, 1/5), L = 3, R_c = 4/3 -> levels {levels:?}, rate {rate}");
    Ok(())
}

fn spread(files: usize, steps: usize, users: usize) -> Vec<usize> {
    (0..files).map(|n| (steps / files + usize::from(n < steps % files)).min(users)).collect()
}
