//! Rate vs. cache curves for every scheme on a common grid, with a convex
//! hull and CSV export.

use coded_caching::tradeoff::{build_curve, Scheme};
use coded_caching::PopularityProfile;

fn main() -> coded_caching::Result<()> {
    let (files, users) = (40, 8);
    let profile = PopularityProfile::from_zipf(files, 0.7)?;
    let step = 4.0;

    let schemes = [Scheme::Lower, Scheme::Centralized, Scheme::Decentralized, Scheme::Hpf];
    let curves = schemes
        .iter()
        .map(|&s| build_curve(s, &profile, users, step))
        .collect::<coded_caching::Result<Vec<_>>>()?;

    print!("{:>6}", "R_c");
    for s in schemes {
        print!(" {:>14}", s.name());
    }
    println!();
    for i in 0..curves[0].points.len() {
        print!("{:>6.1}", curves[0].points[i].cache);
        for c in &curves {
            print!(" {:>14.5}", c.points[i].rate);
        }
        println!();
    }

    let hpf = &curves[3];
    let hull = hpf.convexified()?;
    println!("\nuncoded caching between grid points at R_c = 6: {:.5}, hull {:.5}", hpf.evaluate(6.0)?, hull.evaluate(6.0)?);
    println!("\ncentralized curve as CSV:\n{}", curves[1].to_csv().lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
