//! One PASS/FAIL line per acceptance criterion.
//!
//! `MLL_ACCEPT_SECONDS` caps each search run by wall clock in addition to its
//! evaluation budget. Without it every run is reproducible.

use std::time::Instant;

use mll_core::verify::{self, Check, SearchPlan};

fn main() {
    // libtest passes flags such as --nocapture; this target ignores them.
    let plan = SearchPlan {
        seconds: std::env::var("MLL_ACCEPT_SECONDS")
            .ok()
            .and_then(|s| s.parse().ok()),
        ..SearchPlan::default()
    };
    let criteria: [Box<dyn Fn() -> Check>; 10] = [
        Box::new(verify::capacity_oracle_check),
        Box::new(verify::degenerate_quad_check),
        Box::new(verify::crossing_check),
        Box::new(verify::reference_check),
        Box::new(|| plan.demo_check()),
        Box::new(|| plan.controls_check()),
        Box::new(|| plan.cross_check()),
        Box::new(|| plan.geo_check()),
        Box::new(verify::property_check),
        Box::new(verify::reproducibility_check),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for check in &criteria {
        let c = check();
        failed += usize::from(!c.ok);
        println!("{}", c.line());
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
