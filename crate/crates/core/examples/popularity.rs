//! Request popularity: Zipf and file-based profiles, coverage probabilities
//! and the mapping back to the caller's file numbering.

use coded_caching::PopularityProfile;

fn main() -> coded_caching::Result<()> {
    let zipf = PopularityProfile::from_zipf(8, 0.8)?;
    println!("Zipf(0.8) over 8 files: {:?}", rounded(zipf.probs()));

    let users = 4;
    println!("P(file requested by at least one of {users} users):");
    for n in 0..zipf.n_files() {
        println!("  file {}: {:.4}", n + 1, zipf.coverage_prob(n, users)?);
    }
    println!("expected distinct requests: {:.4}", zipf.expected_distinct(users));

    // Values given in arbitrary order are sorted, but the permutation is kept.
    let listed = PopularityProfile::from_text("0.1\n0.5\n# comment\n0.4\n")?;
    println!("\nlisted 0.1, 0.5, 0.4 -> sorted {:?}", listed.probs());
    println!("sorted position of original file 1: {}", listed.sorted_index(1)? + 1);
    println!("back in original order: {:?}", listed.to_original_order(listed.probs()));
    Ok(())
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
