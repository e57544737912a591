//! A defaultable claim paying P at T if tau > T and R otherwise, priced with
//! the default indicator and with Z_T. Both are unbiased; the second has a
//! smaller variance whenever Z_T is random.
//!
//! cargo run --release --example defaultable_pricing

use hazard_lab::lab::price_defaultable;
use hazard_lab::scenario::{Pricing, Scenario};

fn main() -> hazard_lab::Result<()> {
    for name in ["cox_unit", "cox_stochastic", "honest_expmart", "poisson_counterexample"] {
        let mut scenario = Scenario::bundled(name)?;
        scenario.n_paths = 20_000;
        let pricing = scenario.pricing.unwrap_or(Pricing { maturity: 1.0, promised: 1.0, recovery: 0.0 });
        scenario.pricing = Some(pricing);
        let report = price_defaultable(&scenario)?;
        println!(
            "{name:<24} T={} P={} R={}: indicator {:.4} (se {:.4})  conditional {:.4} (se {:.4})  variance ratio {:.2}",
            pricing.maturity,
            pricing.promised,
            pricing.recovery,
            report.price_indicator(),
            report.indicator.std_error(),
            report.price_conditional(),
            report.conditional.std_error(),
            report.variance_ratio(),
        );
    }
    Ok(())
}
