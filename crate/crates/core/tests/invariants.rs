use decohist::ensembles::{haar_state, haar_unitary, sample_random_family};
use decohist::histories::{
    block_sum, decoherence_functional, time_symmetric_functional, Endpoints, Event, EventSchedule, KrausFamily,
    MeasurementFamily,
};
use decohist::openquantum::{dilate_to_projection, povm_feedback_step, qubit_damping_model, JumpScheme};
use decohist::qops::{
    hermitian_eigen, matrix_exponential, polar_decompose, DensityMatrix, ExpMode, Operator, ProjectorFamily, C64,
};
use decohist::rng::stream;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn ginibre(d: usize, rng: &mut ChaCha8Rng) -> Operator {
    let entries: Vec<C64> = (0..d * d)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    Operator::from_rows(d, &entries).unwrap()
}

fn hermitian(d: usize, rng: &mut ChaCha8Rng) -> Operator {
    ginibre(d, rng).hermitian_part()
}

fn mixed_state(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = ginibre(d, rng);
    let rho = &g * &g.adjoint();
    let tr = rho.trace().re;
    DensityMatrix::with_tolerance(rho.scale_real(1.0 / tr).hermitian_part(), 1e-10).unwrap()
}

fn random_schedule(d: usize, events: usize, rng: &mut ChaCha8Rng) -> EventSchedule {
    let families: Vec<MeasurementFamily> = (0..events)
        .map(|_| sample_random_family(d, &vec![1; d], rng).unwrap().into())
        .collect();
    let unitaries = (1..events).map(|_| haar_unitary(d, rng)).collect();
    EventSchedule::with_unitaries(families, unitaries).unwrap()
}

proptest! {
    #[test]
    fn polar_factors_reassemble(seed in any::<u64>(), d in 1usize..5) {
        let l = ginibre(d, &mut stream(seed, 0));
        let p = polar_decompose(&l).unwrap();
        prop_assert!(p.unitary.is_unitary(1e-9));
        prop_assert!((&p.unitary * &p.positive).distance(&l) < 1e-9);
        prop_assert!(hermitian_eigen(&p.positive).values[0] > -1e-10);
    }

    #[test]
    fn propagators_compose(seed in any::<u64>(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let h = hermitian(3, &mut stream(seed, 0));
        let ab = matrix_exponential(&h, s + t, ExpMode::Propagator).unwrap();
        let a = matrix_exponential(&h, s, ExpMode::Propagator).unwrap();
        let b = matrix_exponential(&h, t, ExpMode::Propagator).unwrap();
        prop_assert!((&a * &b).distance(&ab) < 1e-10);
    }

    #[test]
    fn functional_is_hermitian_positive_and_normalized(seed in any::<u64>(), d in 2usize..4, n in 1usize..4) {
        let mut rng = stream(seed, 0);
        let schedule = random_schedule(d, n, &mut rng);
        let rho = mixed_state(d, &mut rng);
        let m = decoherence_functional(&schedule, &rho).unwrap().to_dense();
        prop_assert!((&m - m.adjoint()).camax() < 1e-12);
        prop_assert!((m.trace().re - 1.0).abs() < 1e-10);
        let eig = Operator::from_rows(m.nrows(), m.as_slice()).unwrap();
        prop_assert!(hermitian_eigen(&eig.hermitian_part()).values[0] > -1e-10);
    }

    #[test]
    fn coarse_functional_is_block_sum(seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        let d = 3;
        let fine_families: Vec<ProjectorFamily> =
            (0..2).map(|_| sample_random_family(d, &[1, 1, 1], &mut rng).unwrap()).collect();
        let u = haar_unitary(d, &mut rng);
        let rho = mixed_state(d, &mut rng);
        let fine = EventSchedule::with_unitaries(
            fine_families.iter().cloned().map(Into::into).collect(),
            vec![u.clone()],
        ).unwrap();
        let groups = vec![vec![0, 2], vec![1]];
        let coarse = EventSchedule::with_unitaries(
            vec![fine_families[0].coarsen(&groups).unwrap().into(), fine_families[1].clone().into()],
            vec![u],
        ).unwrap();
        let df = decoherence_functional(&fine, &rho).unwrap();
        let dc = decoherence_functional(&coarse, &rho).unwrap();
        // fine label index = 3 a + b
        let members = |g: &[usize], b: usize| g.iter().map(|&a| 3 * a + b).collect::<Vec<_>>();
        for (ci, gi) in groups.iter().enumerate() {
            for b in 0..3 {
                for (cj, gj) in groups.iter().enumerate() {
                    for b2 in 0..3 {
                        let expect = block_sum(&df, &members(gi, b), &members(gj, b2));
                        prop_assert!((dc.entry(3 * ci + b, 3 * cj + b2) - expect).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn projective_family_as_kraus_gives_same_functional(seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        let fams: Vec<ProjectorFamily> = (0..2).map(|_| sample_random_family(2, &[1, 1], &mut rng).unwrap()).collect();
        let u = haar_unitary(2, &mut rng);
        let rho = mixed_state(2, &mut rng);
        let proj = EventSchedule::with_unitaries(fams.iter().cloned().map(Into::into).collect(), vec![u.clone()]).unwrap();
        let kraus = EventSchedule::with_unitaries(
            fams.iter().map(|f| KrausFamily::new(f.members().to_vec()).unwrap().into()).collect(),
            vec![u],
        ).unwrap();
        let a = decoherence_functional(&proj, &rho).unwrap().to_dense();
        let b = decoherence_functional(&kraus, &rho).unwrap().to_dense();
        prop_assert!((a - b).camax() < 1e-12);
    }

    #[test]
    fn single_event_ignores_its_time_for_stationary_endpoints(seed in any::<u64>(), t in 0.0f64..4.0) {
        let mut rng = stream(seed, 0);
        let h = Operator::from_real_diagonal(&[0.0, 0.7, 1.9]);
        let fam = sample_random_family(3, &[1, 2], &mut rng).unwrap();
        let endpoints = Endpoints {
            initial: DensityMatrix::from_populations(&[0.5, 0.3, 0.2]).unwrap(),
            final_state: DensityMatrix::from_populations(&[0.1, 0.6, 0.3]).unwrap(),
            final_time: Some(4.0),
        };
        let at = |t: f64| {
            let s = EventSchedule::with_hamiltonian(vec![Event::new(t, fam.clone())], h.clone())
                .unwrap()
                .prepared_at(0.0)
                .unwrap();
            time_symmetric_functional(&s, &endpoints).unwrap().to_dense()
        };
        prop_assert!((at(t) - at(2.0)).camax() < 1e-10);
    }

    #[test]
    fn sampled_families_are_valid(seed in any::<u64>(), d in 2usize..7) {
        let mut rng = stream(seed, 0);
        let split = rng.gen_range(1..d);
        let fam = sample_random_family(d, &[split, d - split], &mut rng).unwrap();
        prop_assert!(ProjectorFamily::new(fam.members().to_vec()).is_ok());
        let ranks: Vec<f64> = fam.members().iter().map(|p| p.trace().re).collect();
        prop_assert!((ranks[0] - split as f64).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dilation_reproduces_the_jump_step(seed in any::<u64>(), dt in 1e-4f64..0.3, draw in 0.0f64..1.0) {
        let mut rng = stream(seed, 0);
        let model = qubit_damping_model(rng.gen_range(0.1..2.0)).unwrap();
        let scheme = JumpScheme::new(&model, dt).unwrap();
        let rho = mixed_state(2, &mut rng);
        let polar = scheme.polar(0);
        let weight = model.channels()[0].rate * dt;
        let dil = dilate_to_projection(&polar.positive, weight, Some(&polar.unitary)).unwrap();
        let [p0, p1] = dil.probabilities(&rho).unwrap();
        let direct = scheme.jump_probabilities(&rho);
        prop_assert!((p1 - direct[0]).abs() < 1e-12);
        prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
        let step = povm_feedback_step(&model, &rho, dt, draw).unwrap();
        let k = usize::from(step.outcome);
        if let Some(post) = dil.post_state(&rho, k).unwrap() {
            // feedback step does not include the Hamiltonian factor; H = 0 here
            prop_assert!(post.trace_distance(&step.state) < 1e-9);
        }
        let sum = &dil.projectors()[0] + &dil.projectors()[1];
        prop_assert!(sum.distance(&Operator::identity(4)) < 1e-10);
    }

    #[test]
    fn haar_states_are_normalized(seed in any::<u64>(), d in 1usize..9) {
        let psi = haar_state(d, &mut stream(seed, 0));
        prop_assert!((psi.amplitudes().norm() - 1.0).abs() < 1e-12);
    }
}
