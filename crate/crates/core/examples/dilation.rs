//! The jump step as a projective measurement on system plus ancilla, and a
//! Lindblad interval as a unitary on system plus environment.

use decohist::openquantum::{dilate_to_projection, qubit_damping_model, stinespring_unitary, ChannelMap, JumpScheme};
use decohist::qops::{DensityMatrix, StateVector, C64};
use nalgebra::DVector;

fn main() -> decohist::Result<()> {
    let model = qubit_damping_model(1.0)?;
    let dt = 0.05;
    let scheme = JumpScheme::new(&model, dt)?;
    let polar = scheme.polar(0);
    let dil = dilate_to_projection(&polar.positive, dt, Some(&polar.unitary))?;
    let psi = StateVector::normalized(DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]))?;
    let rho = psi.density();
    println!("ancilla outcome probabilities {:?}", dil.probabilities(&rho)?);
    println!("direct jump probability {:?}", scheme.jump_probabilities(&rho));
    if let Some(post) = dil.post_state(&rho, 1)? {
        println!("state after a jump: p(excited) = {:.3}", post.operator().get(1, 1).re);
    }

    let map = ChannelMap::from_model(&model, 0.7)?;
    let kraus = map.kraus()?;
    let u = stinespring_unitary(&kraus)?;
    println!("{} Kraus operators, dilation unitary of dimension {}, unitary: {}", kraus.len(), u.dim(), u.is_unitary(1e-10));
    let mixed = DensityMatrix::from_populations(&[0.2, 0.8])?;
    println!("channel output p(excited) = {:.4}", map.apply(mixed.operator()).get(1, 1).re);
    Ok(())
}
