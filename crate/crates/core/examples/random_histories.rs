//! Ratio statistics of coarse-grained histories built from Haar-random
//! projector families, and the fineness at which they stop decohering.

use decohist::ensembles::{information_capacity_check, typical_ratio_experiment, InitialState, RandomScheduleSpec};

fn main() -> decohist::Result<()> {
    let spec = RandomScheduleSpec::uniform(32, 2, 16, 200, 3)?;
    for init in [InitialState::Random, InitialState::Ground, InitialState::Thermal] {
        let r = typical_ratio_experiment(&spec, init)?;
        let s = r.scaled_ratio.expect("pairs exist");
        let o = r.overlap_statistic.expect("pairs exist");
        println!("{init:?}: ratio*d*p*p' mean {:.3} median {:.3}; ratio*d median {:.3}", s.mean, s.median, o.median);
    }
    let cap = information_capacity_check(32, 2, &[16, 8, 4, 2, 1], 20, 3, 0.1)?;
    for p in &cap.points {
        println!("rank {:>2}: median ratio {:?}", p.rank, p.median_ratio);
    }
    println!("crossing at p = {:?}, prediction {:.3}", cap.crossing_probability, cap.prediction);
    Ok(())
}
