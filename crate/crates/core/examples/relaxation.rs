//! Histories of a damped qubit measured in random bases: the longer the
//! relaxation between events, the smaller the interference.

use decohist::ensembles::sample_random_family;
use decohist::openquantum::{qubit_damping_model, relaxation_decoherence_experiment, spectral_gap};
use decohist::qops::DensityMatrix;
use decohist::rng::stream;

fn main() -> decohist::Result<()> {
    let model = qubit_damping_model(1.0)?;
    let tau = 1.0 / spectral_gap(&model)?;
    let mut rng = stream(5, 0);
    let families = (0..3)
        .map(|_| sample_random_family(2, &[1, 1], &mut rng))
        .collect::<decohist::Result<Vec<_>>>()?;
    let initial = DensityMatrix::from_populations(&[0.1, 0.9])?;
    for x in [0.0, 0.5, 2.0, 5.0, 20.0] {
        let r = relaxation_decoherence_experiment(&model, &families, x * tau, &initial)?;
        println!(
            "s = {x:>4} tau: max ratio {:.2e}, exp(-s/tau) {:.2e}, marginal deviation {:.1e}, route {:?}",
            r.max_ratio, r.gap_bound, r.marginal_deviation, r.route
        );
    }
    Ok(())
}
