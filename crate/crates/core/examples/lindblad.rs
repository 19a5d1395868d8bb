//! Thermal relaxation of a truncated oscillator under the master equation.

use decohist::openquantum::{
    levels_for_tail, propagate, spectral_gap, stationary_state, thermal_oscillator_model, thermal_state,
    PropagationMethod,
};
use decohist::qops::StateVector;

fn main() -> decohist::Result<()> {
    let (omega, beta, gamma) = (1.0, 1.0, 0.5);
    let levels = levels_for_tail(omega, beta, 1e-8);
    let model = thermal_oscillator_model(levels, omega, beta, gamma)?;
    let thermal = thermal_state(levels, omega, beta)?;
    println!("{levels} levels, relaxation time {:.3}", 1.0 / spectral_gap(&model)?);
    println!(
        "stationary state vs thermal state: {:.2e}",
        stationary_state(&model)?.trace_distance(&thermal)
    );
    let start = StateVector::basis(levels, 3)?.density();
    for t in [0.0, 1.0, 4.0, 16.0, 64.0] {
        let rho = propagate(&model, &start, t, PropagationMethod::Exact)?;
        println!("t = {t:>4}: distance to thermal {:.3e}", rho.trace_distance(&thermal));
    }
    Ok(())
}
