//! Rates for a fixed request vector: per request, worst case and average.

use coded_caching::centralized::{self, IntegerAllocation};
use coded_caching::decentralized::{self, mn_worst_case, FractionalAllocation};
use coded_caching::{PopularityProfile, RequestVector};

fn main() -> coded_caching::Result<()> {
    let (files, users) = (4, 5);
    let profile = PopularityProfile::from_zipf(files, 1.0)?;
    let alloc = IntegerAllocation::new(vec![4, 3, 2, 1], users)?;
    let budget = 1_000_000;

    for y in [[1, 1, 1, 1, 1], [1, 2, 3, 4, 4], [4, 4, 4, 4, 4]] {
        let request = RequestVector::from_original_numbering(&profile, &y)?;
        println!("request {y:?}: centralized rate {:.5}", centralized::static_rate_for_request(&alloc, &request)?);
    }
    let worst = centralized::static_worst_case_rate(&profile, &alloc, budget)?;
    println!(
        "worst case {:.5} at {:?} (exact search: {}), average {:.5}",
        worst.rate,
        worst.request.to_original_numbering(&profile),
        worst.exact,
        centralized::static_average_rate(&profile, &alloc)?
    );

    let cache = 2.0;
    let frac = FractionalAllocation::uniform(files, users, cache)?;
    let worst = decentralized::static_worst_case_rate(&profile, &frac, budget)?;
    let average = decentralized::static_average_rate(&profile, &frac, budget)?;
    println!(
        "\nsymmetric decentralized at R_c = {cache}: worst {:.5} (closed form {:.5}), average {:.5}",
        worst.rate,
        mn_worst_case(files, users, cache).rate,
        average.value
    );
    Ok(())
}
