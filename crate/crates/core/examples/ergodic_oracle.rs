//! Expected delivery rate computed from first principles, checked against
//! the closed forms, exactly and by sampling.

use coded_caching::centralized::{self, IntegerAllocation};
use coded_caching::decentralized::{self, FractionalAllocation};
use coded_caching::exact::{rational, Rational};
use coded_caching::simulator::{ergodic_rate_oracle, ergodic_rate_oracle_in, OracleLevels, OracleOptions, OracleScheme};
use coded_caching::PopularityProfile;

fn main() -> coded_caching::Result<()> {
    let probs: Vec<Rational> = [1, 1].iter().map(|&w| rational(w, 2)).collect();
    let levels = [1usize, 0];
    let oracle = ergodic_rate_oracle_in(&probs, OracleLevels::Integer(&levels), 2)?;
    let closed = centralized::ergodic_rate_in(&probs, &levels, 2);
    println!("N = 2, L = 2, r = (1, 0): oracle {oracle}, closed form {closed}");

    let shares = [rational(1, 2), rational(1, 2)];
    let oracle = ergodic_rate_oracle_in(&probs, OracleLevels::Fractional(&shares), 2)?;
    let closed = decentralized::ergodic_rate_in(&probs, &shares, 2);
    println!("N = 2, L = 2, r = (1/2, 1/2): oracle {oracle}, closed form {closed}");

    let profile = PopularityProfile::from_zipf(6, 1.0)?;
    let alloc = IntegerAllocation::new(vec![3, 2, 1, 1, 1, 0], 4)?;
    let exact = ergodic_rate_oracle(&profile, OracleScheme::Centralized(&alloc), OracleOptions::default())?;
    println!("\nZipf, N = 6, L = 4: exact oracle {:.10} over {} requests, closed form {:.10}", exact.value, exact.evaluated, centralized::ergodic_rate(&profile, &alloc)?);

    let frac = FractionalAllocation::uniform(6, 4, 2.0)?;
    let options = OracleOptions { budget: 100, monte_carlo: true, samples: 50_000, ..OracleOptions::default() };
    let sampled = ergodic_rate_oracle(&profile, OracleScheme::Decentralized(&frac), options)?;
    println!(
        "sampled decentralized oracle {:.5} ± {:.5}, closed form {:.5}",
        sampled.value,
        sampled.std_error,
        decentralized::ergodic_rate(&profile, &frac)?
    );
    Ok(())
}
