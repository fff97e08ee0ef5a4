//! Bit-level placement, coded delivery and decoding on random databases.

use coded_caching::centralized::{greedy_optimize, static_rate_for_request as centralized_rate};
use coded_caching::decentralized::{kkt_optimize, static_rate_for_request as decentralized_rate};
use coded_caching::simulator::{
    decode_centralized, deliver_centralized, place_centralized, simulate_centralized, simulate_decentralized,
    SimulatedNetwork,
};
use coded_caching::{PopularityProfile, RequestVector};

fn main() -> coded_caching::Result<()> {
    let profile = PopularityProfile::from_zipf(5, 0.8)?;
    let users = 4;
    let request = RequestVector::from_original_numbering(&profile, &[1, 2, 2, 5])?;

    let alloc = greedy_optimize(&profile, users, 2.0)?.allocation;
    let run = simulate_centralized(&alloc, &request, 6000, 4, 11)?;
    println!(
        "centralized {:?}: simulated {:.6}, formula {:.6}, decoded {}",
        alloc.levels(),
        run.rate,
        centralized_rate(&alloc, &request)?,
        run.decode_ok
    );

    let net = SimulatedNetwork::new(5, users, run.file_bits, 11)?;
    let caches = place_centralized(&net, &alloc)?;
    let transcript = deliver_centralized(&net, &alloc, &request)?;
    println!("  one trial sends {} messages, {} bits", transcript.messages.len(), transcript.total_bits());
    for m in transcript.messages.iter().take(3) {
        println!("  subset {:04b}: {} bits for users {:?}", m.subset, m.payload.len(), m.components.iter().map(|c| c.user).collect::<Vec<_>>());
    }
    let decoded = decode_centralized(&caches, &transcript, &alloc, &request, 0)?;
    println!("  user 1 recovers its file: {}", decoded == net.file(request.files()[0]));

    let frac = kkt_optimize(&profile, users, 2.0)?.allocation;
    let run = simulate_decentralized(&frac, &request, 20_000, 10, 11)?;
    println!(
        "decentralized: simulated {:.5} ± {:.5}, formula {:.5}, decoded {}",
        run.rate,
        run.std_error,
        decentralized_rate(&frac, &request)?,
        run.decode_ok
    );
    Ok(())
}
