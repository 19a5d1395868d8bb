//! One-step error of the averaged measure-and-feedback map against the
//! exact channel shrinks as the square of the step.

use decohist::openquantum::{qubit_damping_model, step_order_fit, thermal_oscillator_model};
use decohist::qops::DensityMatrix;

fn main() -> decohist::Result<()> {
    let dts = [1e-1, 1e-2, 1e-3, 1e-4];
    for (name, model) in [
        ("qubit damping", qubit_damping_model(1.0)?),
        ("thermal oscillator", thermal_oscillator_model(8, 1.0, 1.0, 0.5)?),
    ] {
        let rho = DensityMatrix::maximally_mixed(model.dim());
        let r = step_order_fit(&model, &rho, &dts)?;
        println!("{name}: errors {:?}, slope {:.3}", r.errors, r.slope.unwrap_or(f64::NAN));
    }
    Ok(())
}
