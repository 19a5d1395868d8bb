//! Quantum-jump ensemble for a decaying qubit compared with the exact
//! master-equation solution.

use decohist::openquantum::{ensemble_average, qubit_damping_model, EnsembleConfig};
use decohist::qops::DensityMatrix;

fn main() -> decohist::Result<()> {
    let model = qubit_damping_model(1.0)?;
    let excited = DensityMatrix::from_populations(&[0.0, 1.0])?;
    let config = EnsembleConfig {
        horizon: 1.0,
        dt: 1e-3,
        trajectories: 10_000,
        seed: 2024,
        sample_every: 250,
        exact_oracle: true,
        record_jumps: false,
    };
    let start = std::time::Instant::now();
    let result = ensemble_average(&model, &excited, config)?;
    for snap in &result.snapshots {
        println!(
            "t = {:.2}  excited population = {:.4}  exact = {:.4}  trace distance = {:.2e}  stat. error = {:.1e}",
            snap.time,
            snap.mean.operator().get(1, 1).re,
            (-snap.time).exp(),
            snap.trace_distance_to_exact.unwrap_or(f64::NAN),
            snap.statistical_error,
        );
    }
    println!("{} jumps in {:.2?}", result.total_jumps, start.elapsed());
    Ok(())
}
