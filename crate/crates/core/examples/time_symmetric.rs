//! Functional conditioned on both an initial and a final state. A single
//! event does not care when it happens; two events do.

use decohist::histories::{time_symmetric_functional, Endpoints, Event, EventSchedule};
use decohist::qops::{DensityMatrix, Operator, ProjectorFamily, StateVector, ONE};
use nalgebra::DVector;

fn x_basis() -> decohist::Result<ProjectorFamily> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::new(DVector::from_vec(vec![ONE * s, ONE * s]))?;
    let minus = StateVector::new(DVector::from_vec(vec![ONE * s, -ONE * s]))?;
    ProjectorFamily::new(vec![plus.projector(), minus.projector()])
}

fn main() -> decohist::Result<()> {
    let h = Operator::from_real_diagonal(&[0.5, -0.5]);
    let endpoints = Endpoints {
        initial: DensityMatrix::from_populations(&[0.8, 0.2])?,
        final_state: DensityMatrix::from_populations(&[0.3, 0.7])?,
        final_time: Some(3.0),
    };
    for t in [0.5, 1.5, 2.5] {
        let s = EventSchedule::with_hamiltonian(vec![Event::new(t, x_basis()?)], h.clone())?.prepared_at(0.0)?;
        let d = time_symmetric_functional(&s, &endpoints)?;
        println!("single event at t = {t}: p = {:?}", d.diagonal());
    }
    for gap in [0.3, 1.0, 2.0] {
        let s = EventSchedule::with_hamiltonian(vec![Event::new(0.0, x_basis()?), Event::new(gap, x_basis()?)], h.clone())?
            .prepared_at(0.0)?;
        let d = time_symmetric_functional(&s, &endpoints)?;
        println!("two events, gap {gap}: D(0.0, 0.1) = {:.4}, Z = {:.3}", d.entry(0, 1), d.normalization());
    }
    Ok(())
}
