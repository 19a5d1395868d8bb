//! Reinflation odds and recurrence times of a low de Sitter phase, and the
//! comparison against a thermal fluctuation of an observer.

use decohist::cosmo::{compare_boltzmann_brain, recurrence_log_time, sweep, FluctuationSpec, ReinflationParams};

fn main() -> decohist::Result<()> {
    let params = ReinflationParams::new(1e-2, 3e-122, 1.0)?;
    let rec = recurrence_log_time(&params)?;
    println!("log recurrence time = {:.4e} (prefactor term {:.3})", rec.log_time, rec.log_prefactor);

    let brain = FluctuationSpec::new(1e3, 1e10)?;
    let cmp = compare_boltzmann_brain(&params, &brain)?;
    println!("log odds {:.4e}: {:?}", cmp.log_odds, cmp.verdict);

    for row in sweep(1e-2, 1.0, 1e-122, 1e-10, 5, &brain)? {
        println!("Λ₁ = {:.1e}: log p = {:.4e}, log odds = {:.4e}", row.lambda_low, row.log_p_reinflation, row.log_odds);
    }
    Ok(())
}
