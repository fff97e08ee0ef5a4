//! Converse bound on the delivery rate, including the maximizing user count
//! and the regime where it is met by an achievable scheme.

use coded_caching::bounds::{fsn_lower_bound, high_cache_optimal, uniform_lower_bound, LowerBoundEvaluator};
use coded_caching::centralized::greedy_optimize;
use coded_caching::PopularityProfile;

fn main() -> coded_caching::Result<()> {
    let (files, users) = (20, 6);
    let profile = PopularityProfile::from_zipf(files, 1.0)?;
    let eval = LowerBoundEvaluator::new(&profile, users)?;

    println!("{:>6} {:>10} {:>8} {:>10}", "R_c", "lower", "argmax", "uniform");
    for k in 0..=10 {
        let cache = files as f64 * k as f64 / 10.0;
        let b = eval.evaluate(cache)?;
        let u = uniform_lower_bound(files, users, cache)?;
        println!("{cache:>6.1} {:>10.5} {:>8} {u:>10.5}", b.rate, b.argmax_users);
    }

    let cache = files as f64 - 0.5 / users as f64;
    let opt = high_cache_optimal(&profile, users, cache)?;
    let lower = fsn_lower_bound(&profile, users, cache)?;
    let below = greedy_optimize(&profile, users, files as f64 - 1.0 / users as f64)?;
    let above = greedy_optimize(&profile, users, files as f64)?;
    let inner = 0.5 * (below.rate + above.rate);
    println!(
        "\nat R_c = {cache:.4} (regime starts at {:.4}): optimal {:.6}, lower {lower:.6}, greedy {inner:.6}",
        opt.regime_start, opt.rate
    );
    Ok(())
}
