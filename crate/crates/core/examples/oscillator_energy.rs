//! Energy-eigenprojector histories at arbitrary times decohere for any
//! initial state.

use decohist::ensembles::haar_state;
use decohist::histories::decoherence_functional;
use decohist::oscillator::TruncatedOscillator;
use decohist::rng::stream;

fn main() -> decohist::Result<()> {
    let osc = TruncatedOscillator::new(5, 1.0)?;
    let schedule = osc.energy_history_schedule(&[0.0, 0.37, 1.1])?;
    for seed in 0..3 {
        let psi = haar_state(5, &mut stream(seed, 0));
        let d = decoherence_functional(&schedule, &psi.density())?;
        let live = d.probabilities().iter().filter(|(_, p)| *p > 1e-12).count();
        println!(
            "seed {seed}: {live} live histories, max off-diagonal {:.1e}, sum of probabilities {:.12}",
            d.max_off_diagonal(),
            d.diagonal_sum()
        );
    }
    Ok(())
}
