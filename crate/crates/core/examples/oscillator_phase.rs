//! Phase-basis histories of a truncated oscillator started in its ground
//! state: only successor chains carry probability and the functional is
//! diagonal.

use decohist::histories::decoherence_functional;
use decohist::oscillator::TruncatedOscillator;

fn main() -> decohist::Result<()> {
    let osc = TruncatedOscillator::new(4, 1.0)?;
    let schedule = osc.phase_history_schedule(3)?;
    let ground = osc.energy_state(0)?.density();
    let d = decoherence_functional(&schedule, &ground)?;
    for (label, p) in d.probabilities() {
        if p > 1e-12 {
            let chain = if osc.is_successor_chain(&label) { "chain" } else { "" };
            println!("{label:>7}  p = {p:.6}  {chain}");
        }
    }
    println!("max |D(a,b)|, a != b: {:.2e}", d.max_off_diagonal());
    println!("decoherent at 1e-6: {}", d.is_decoherent(1e-6).decoherent);
    Ok(())
}
