//! Worst ratio between the achievable curves and the converse bound, for
//! uniform requests, plus the analytic constants that bound it.

use coded_caching::tradeoff::{gap_constants, gap_ergodic, gap_static, static_bound_chain};

fn main() -> coded_caching::Result<()> {
    for (n, l) in [(2, 2), (10, 5), (20, 40), (50, 50)] {
        let e = gap_ergodic(n, l, 2000)?;
        let s = gap_static(n, l, 2000)?;
        println!(
            "N = {n:>2}, L = {l:>2}: ergodic {:.4} at R_c {:.3} (holds: {}), static {:.4} at R_c {:.3} (holds: {})",
            e.max_ratio,
            e.argmax_rc,
            e.holds(),
            s.max_ratio,
            s.argmax_rc,
            s.holds()
        );
    }

    let c = gap_constants();
    println!("\nconstants: {:.4}, {:.4}, {:.4}", c.zero_cache, c.quarter, c.nu);

    println!("\nstatic chain for N = 10, L = 15:");
    let xs: Vec<f64> = (1..10).map(f64::from).collect();
    for p in static_bound_chain(10, 15, &xs)? {
        println!("  R_c {:>4.1}: {:.4} <= {:.4} <= {:.4}", p.r_c, p.lower, p.achievable, p.upper);
    }
    Ok(())
}
