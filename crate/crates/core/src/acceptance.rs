//! Acceptance suite shared by `selftest` and the `acceptance` test target.
//!
//! Each criterion returns a pass flag and a one-line detail; runtime
//! budgets count towards the verdict.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cli::{execute, Cli};
use crate::cosmo::{
    compare_boltzmann_brain, recurrence_log_time, reinflation_log_probability, FluctuationSpec, ReinflationForms,
    ReinflationParams,
};
use crate::ensembles::{
    haar_state, haar_unitary, information_capacity_check, sample_random_family, typical_ratio_experiment,
    InitialState, RandomScheduleSpec,
};
use crate::error::{Error, Result};
use crate::histories::{
    decoherence_functional, pure_branches, sum_rule_violation, time_symmetric_functional, Endpoints, Event,
    EventSchedule, MeasurementFamily,
};
use crate::io::{EventFile, FamilyKind, ModelFile, PropagatorFile, ScheduleFile};
use crate::openquantum::{
    ensemble_average, levels_for_tail, propagate, qubit_damping_model, relaxation_decoherence_experiment,
    spectral_gap, step_order_fit, thermal_oscillator_model, thermal_state, thermal_tail_weight, EnsembleConfig,
    PropagationMethod,
};
use crate::oscillator::TruncatedOscillator;
use crate::qops::{matrix_exponential, DensityMatrix, ExpMode, Operator, ProjectorFamily, StateVector, C64, ONE, ZERO};
use crate::rng::stream;
use crate::stats::log_log_slope;

/// Result of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Option<Duration>,
    check: fn() -> Result<(bool, String)>,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        title: "phase histories decohere along successor chains",
        budget: Some(Duration::from_secs(1)),
        check: phase_history_decoherence,
    },
    Criterion {
        id: 2,
        title: "energy histories are trivially decoherent",
        budget: Some(Duration::from_secs(1)),
        check: energy_history_triviality,
    },
    Criterion {
        id: 3,
        title: "pure ground endpoints make phase histories fully coherent",
        budget: Some(Duration::from_secs(1)),
        check: pure_endpoint_coherence,
    },
    Criterion {
        id: 4,
        title: "decoherence bounds the sum-rule violation",
        budget: Some(Duration::from_secs(10)),
        check: sum_rule_law,
    },
    Criterion {
        id: 5,
        title: "averaged jump step is second-order accurate",
        budget: Some(Duration::from_secs(30)),
        check: povm_step_order,
    },
    Criterion {
        id: 6,
        title: "jump ensemble converges to the master equation",
        budget: Some(Duration::from_secs(120)),
        check: unraveling_consistency,
    },
    Criterion {
        id: 7,
        title: "thermal state is stationary",
        budget: Some(Duration::from_secs(10)),
        check: thermal_stationarity,
    },
    Criterion {
        id: 8,
        title: "time-symmetric functional",
        budget: Some(Duration::from_secs(10)),
        check: time_symmetric_results,
    },
    Criterion {
        id: 9,
        title: "relaxation between events decoheres histories",
        budget: Some(Duration::from_secs(10)),
        check: relaxation_decoherence,
    },
    Criterion {
        id: 10,
        title: "de Sitter fluctuation identities",
        budget: Some(Duration::from_secs(5)),
        check: cosmology_identities,
    },
    Criterion {
        id: 11,
        title: "typical random histories",
        budget: Some(Duration::from_secs(120)),
        check: typical_histories,
    },
    Criterion {
        id: 12,
        title: "same seed gives byte-identical JSON",
        budget: None,
        check: determinism,
    },
];

fn evaluate(c: &Criterion) -> CriterionOutcome {
    let start = Instant::now();
    let (mut passed, mut detail) = match (c.check)() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed = start.elapsed();
    if let Some(budget) = c.budget {
        if elapsed > budget {
            passed = false;
            detail.push_str(&format!("; over budget {:.0?}", budget));
        }
    }
    CriterionOutcome {
        id: c.id,
        title: c.title,
        passed,
        detail,
        seconds: elapsed.as_secs_f64(),
    }
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    CRITERIA.iter().map(evaluate).collect()
}

/// Runs a single criterion by number.
pub fn run_one(id: u32) -> Option<CriterionOutcome> {
    CRITERIA.iter().find(|c| c.id == id).map(evaluate)
}

pub fn criterion_ids() -> Vec<u32> {
    CRITERIA.iter().map(|c| c.id).collect()
}

fn random_density(d: usize, rng: &mut ChaCha8Rng) -> Result<DensityMatrix> {
    let mut acc = Operator::zeros(d);
    let mut total = 0.0;
    for _ in 0..d {
        let w: f64 = rng.gen::<f64>() + 1e-3;
        acc = &acc + &haar_state(d, rng).projector().scale_real(w);
        total += w;
    }
    DensityMatrix::with_tolerance(acc.scale_real(1.0 / total).hermitian_part(), 1e-10)
}

fn max_by<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    items.iter().map(f).fold(0.0, f64::max)
}

fn phase_history_decoherence() -> Result<(bool, String)> {
    let mut worst_off: f64 = 0.0;
    let mut worst_marginal: f64 = 0.0;
    let mut support_ok = true;
    for n_levels in [2, 4, 8, 16] {
        let osc = TruncatedOscillator::new(n_levels, 1.0)?;
        let ground = osc.energy_state(0)?;
        for steps in 1..=4 {
            let schedule = osc.phase_history_schedule(steps)?;
            let branches = pure_branches(&schedule, &ground)?;
            worst_off = worst_off.max(branches.max_off_diagonal_bound(1e-12));
            let probs = branches.probabilities();
            for (label, &p) in branches.labels().iter().zip(&probs) {
                if (p > 1e-10) != osc.is_successor_chain(label) {
                    support_ok = false;
                }
            }
            let mut marginal = vec![0.0; n_levels];
            for (label, &p) in branches.labels().iter().zip(&probs) {
                marginal[label.outcomes()[0]] += p;
            }
            let target = 1.0 / n_levels as f64;
            worst_marginal = worst_marginal.max(max_by(&marginal, |m| (m - target).abs()));
        }
    }
    let passed = worst_off <= 1e-10 && support_ok && worst_marginal <= 1e-10;
    Ok((
        passed,
        format!(
            "max |D off-diagonal| {worst_off:.2e} (<= 1e-10), support on chains {support_ok}, \
             first-event marginal deviation {worst_marginal:.2e} (<= 1e-10)"
        ),
    ))
}

fn energy_history_triviality() -> Result<(bool, String)> {
    let mut rng = stream(2, 0);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let n_levels = [2, 3, 5, 8][k % 4];
        let osc = TruncatedOscillator::new(n_levels, 1.0)?;
        let mut times: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..10.0)).collect();
        times.sort_by(f64::total_cmp);
        let schedule = osc.energy_history_schedule(&times)?;
        let rho = random_density(n_levels, &mut rng)?;
        worst = worst.max(decoherence_functional(&schedule, &rho)?.max_off_diagonal());
    }
    Ok((worst <= 1e-10, format!("max |D off-diagonal| over 20 states {worst:.2e} (<= 1e-10)")))
}

fn pure_endpoint_coherence() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    let mut all_defined = true;
    for n_levels in [2, 4, 8] {
        let osc = TruncatedOscillator::new(n_levels, 1.0)?;
        for steps in 1..=3 {
            let report = osc.mixed_basis_coherence_demo(steps)?;
            let g = &report.ground_to_ground;
            all_defined &= !g.pairs.is_empty();
            pairs += g.pairs.len();
            worst = worst.max(g.max_deviation_from_unity);
        }
    }
    Ok((
        worst <= 1e-8 && all_defined,
        format!("{pairs} defined pairs, max |ratio - 1| {worst:.2e} (<= 1e-8)"),
    ))
}

fn hadamard() -> Operator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Operator::from_rows(2, &[ONE * s, ONE * s, ONE * s, -ONE * s]).expect("2x2")
}

/// `U diag(e^{iθ}) U†`, commuting with the rank-one projectors of `u`.
fn diagonal_in(u: &Operator, rng: &mut ChaCha8Rng) -> Operator {
    let d = u.dim();
    let phases: Vec<C64> = (0..d)
        .map(|_| C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    u * &(&Operator::from_diagonal(&phases) * &u.adjoint())
}

fn random_partition(d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..d {
        if groups.is_empty() || rng.gen_bool(0.6) {
            groups.push(vec![k]);
        } else {
            groups.last_mut().expect("non-empty").push(k);
        }
    }
    groups
}

fn random_sum_rule_schedule(kind: usize, rng: &mut ChaCha8Rng) -> Result<EventSchedule> {
    let d = if rng.gen_bool(0.5) { 2 } else { 3 };
    let events = rng.gen_range(2..=3);
    let basis = haar_unitary(d, rng);
    let fine = ProjectorFamily::from_basis(basis.matrix())?;
    let mut families: Vec<MeasurementFamily> = Vec::with_capacity(events);
    for _ in 0..events {
        let fam = match kind {
            0 => {
                let partition = random_partition(d, rng);
                let ranks: Vec<usize> = partition.iter().map(Vec::len).collect();
                sample_random_family(d, &ranks, rng)?
            }
            _ => fine.coarsen(&random_partition(d, rng))?,
        };
        families.push(fam.into());
    }
    let unitaries = (1..events)
        .map(|_| -> Result<Operator> {
            Ok(match kind {
                0 => haar_unitary(d, rng),
                1 => diagonal_in(&basis, rng),
                _ => {
                    let w = haar_unitary(d, rng);
                    let spectrum: Vec<C64> = (0..d).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
                    let k = &w * &(&Operator::from_diagonal(&spectrum) * &w.adjoint());
                    let delta = 10f64.powf(rng.gen_range(-5.0..-1.0));
                    &diagonal_in(&basis, rng) * &matrix_exponential(&k, delta, ExpMode::Propagator)?
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EventSchedule::with_unitaries(families, unitaries)
}

fn sum_rule_law() -> Result<(bool, String)> {
    let epsilon: f64 = 1e-6;
    let bound = 10.0 * epsilon.sqrt();
    let mut rng = stream(4, 0);
    let (mut decoherent, mut worst) = (0, 0.0f64);
    for k in 0..500 {
        let schedule = random_sum_rule_schedule(k % 3, &mut rng)?;
        let rho = random_density(schedule.dim(), &mut rng)?;
        let d = decoherence_functional(&schedule, &rho)?;
        if !d.is_decoherent(epsilon).decoherent {
            continue;
        }
        decoherent += 1;
        let outcomes = schedule.events().last().expect("non-empty").family.len();
        for a in 0..outcomes {
            worst = worst.max(sum_rule_violation(&schedule, &rho, a)?);
        }
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::new(DVector::from_vec(vec![ONE * s, ONE * s]))?;
    let interferometer = EventSchedule::with_unitaries(
        vec![ProjectorFamily::computational(2).into(), ProjectorFamily::computational(2).into()],
        vec![hadamard()],
    )?;
    let fringe = sum_rule_violation(&interferometer, &plus.density(), 0)?;
    Ok((
        decoherent > 0 && worst <= bound && fringe >= 0.1,
        format!(
            "{decoherent}/500 decoherent at eps=1e-6, worst violation {worst:.2e} (<= {bound:.0e}); \
             interferometer violation {fringe:.3} (>= 0.1)"
        ),
    ))
}

fn uniform_superposition(d: usize) -> Result<DensityMatrix> {
    let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    Ok(StateVector::new(DVector::from_element(d, a))?.density())
}

fn povm_step_order() -> Result<(bool, String)> {
    let dts = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, model) in [
        ("qubit damping", qubit_damping_model(1.0)?),
        ("N=8 thermal oscillator", thermal_oscillator_model(8, 1.0, 1.0, 0.5)?),
    ] {
        let rho = uniform_superposition(model.dim())?;
        let slope = step_order_fit(&model, &rho, &dts)?.slope.unwrap_or(f64::NAN);
        passed &= (slope - 2.0).abs() <= 0.2;
        parts.push(format!("{name} slope {slope:.3}"));
    }
    Ok((passed, format!("{} (2.0 +/- 0.2)", parts.join(", "))))
}

fn unraveling_consistency() -> Result<(bool, String)> {
    let model = qubit_damping_model(1.0)?;
    let rho = uniform_superposition(2)?;
    let config = |trajectories: usize, seed: u64| EnsembleConfig {
        horizon: 1.0,
        dt: 1e-3,
        trajectories,
        seed,
        sample_every: 0,
        exact_oracle: true,
        record_jumps: false,
    };
    let distance = |trajectories: usize, seed: u64| -> Result<f64> {
        ensemble_average(&model, &rho, config(trajectories, seed))?
            .final_snapshot()
            .trace_distance_to_exact
            .ok_or_else(|| Error::InvalidParameter("exact oracle missing".into()))
    };
    let full = distance(10_000, 6)?;

    let sizes = [100usize, 316, 1000, 3162];
    let replicates = [500u64, 158, 50, 16];
    let mut rms = Vec::with_capacity(sizes.len());
    for (k, (&m, &r)) in sizes.iter().zip(&replicates).enumerate() {
        let mut acc = 0.0;
        for rep in 0..r {
            let e = distance(m, 1_000_000 * (k as u64 + 1) + rep)?;
            acc += e * e;
        }
        rms.push((acc / r as f64).sqrt());
    }
    let xs: Vec<f64> = sizes.iter().map(|&m| m as f64).collect();
    let slope = log_log_slope(&xs, &rms).unwrap_or(f64::NAN);
    Ok((
        full <= 0.03 && (slope + 0.5).abs() <= 0.1,
        format!("M=1e4 trace distance {full:.4} (<= 0.03), error slope vs M {slope:.3} (-0.5 +/- 0.1)"),
    ))
}

fn thermal_stationarity() -> Result<(bool, String)> {
    let (omega, beta, gamma) = (1.0, 1.0, 1.0);
    let n = levels_for_tail(omega, beta, 1e-8);
    let tail = thermal_tail_weight(n, omega, beta);
    let model = thermal_oscillator_model(n, omega, beta, gamma)?;
    let rho = thermal_state(n, omega, beta)?;
    let rhs = model.rhs(rho.operator())?.trace_norm();
    let later = propagate(&model, &rho, 10.0 / gamma, PropagationMethod::Exact)?;
    let drift = later.trace_distance(&rho);
    Ok((
        tail < 1e-8 && rhs <= 1e-6 && drift <= 1e-6,
        format!("N={n} tail {tail:.1e}, ||L(rho)||_1 {rhs:.2e} (<= 1e-6), drift over 10/gamma {drift:.2e} (<= 1e-6)"),
    ))
}

fn pauli_x_family() -> Result<ProjectorFamily> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::new(DVector::from_vec(vec![ONE * s, ONE * s]))?;
    let minus = StateVector::new(DVector::from_vec(vec![ONE * s, -ONE * s]))?;
    ProjectorFamily::new(vec![plus.projector(), minus.projector()])
}

fn half_sigma_z() -> Operator {
    Operator::from_real_diagonal(&[0.5, -0.5])
}

fn time_symmetric_results() -> Result<(bool, String)> {
    let endpoints = |final_time| -> Result<Endpoints> {
        Ok(Endpoints {
            initial: DensityMatrix::from_populations(&[0.8, 0.2])?,
            final_state: DensityMatrix::from_populations(&[0.3, 0.7])?,
            final_time,
        })
    };
    let single = |t: f64| -> Result<nalgebra::DMatrix<C64>> {
        let s = EventSchedule::with_hamiltonian(vec![Event::new(t, pauli_x_family()?)], half_sigma_z())?
            .prepared_at(0.0)?;
        Ok(time_symmetric_functional(&s, &endpoints(Some(5.0))?)?.to_dense())
    };
    let reference = single(2.5)?;
    let mut rng = stream(8, 0);
    let mut shift: f64 = 0.0;
    for _ in 0..100 {
        shift = shift.max((single(rng.gen_range(0.0..5.0))? - &reference).camax());
    }

    let pair = |gap: f64| -> Result<nalgebra::DMatrix<C64>> {
        let fam = pauli_x_family()?;
        let s = EventSchedule::with_hamiltonian(vec![Event::new(0.0, fam.clone()), Event::new(gap, fam)], half_sigma_z())?;
        Ok(time_symmetric_functional(&s, &endpoints(None)?)?.to_dense())
    };
    let base = pair(0.3)?;
    let mut variation: f64 = 0.0;
    for gap in [0.7, 1.3, 2.1, 3.0] {
        variation = variation.max((pair(gap)? - &base).camax());
    }

    let mut catalog: Vec<(&str, EventSchedule)> = vec![(
        "two-event qubit",
        EventSchedule::with_hamiltonian(
            vec![Event::new(0.0, pauli_x_family()?), Event::new(0.8, ProjectorFamily::computational(2))],
            Operator::from_rows(2, &[ZERO, ONE, ONE, ZERO])?,
        )?,
    )];
    let osc = TruncatedOscillator::new(4, 1.0)?;
    catalog.push(("phase n=3", osc.phase_history_schedule(3)?));
    catalog.push(("energy n=3", osc.energy_history_schedule(&[0.0, 0.4, 1.7])?));
    catalog.push((
        "single event",
        EventSchedule::with_hamiltonian(vec![Event::new(0.0, osc.phase_family())], osc.hamiltonian())?,
    ));
    let mut failing = Vec::new();
    for (name, s) in &catalog {
        let mixed = DensityMatrix::maximally_mixed(s.dim());
        let e = Endpoints {
            initial: mixed.clone(),
            final_state: mixed,
            final_time: None,
        };
        if !time_symmetric_functional(s, &e)?.is_decoherent(1e-6).decoherent {
            failing.push(*name);
        }
    }
    Ok((
        shift <= 1e-10 && variation >= 1e-3 && failing.is_empty(),
        format!(
            "(a) single-event max |dD| {shift:.2e} (<= 1e-10); (b) two-event max |dD| over gaps {variation:.3e} (>= 1e-3); \
             (c) mixed endpoints coherent in {failing:?}"
        ),
    ))
}

fn relaxation_decoherence() -> Result<(bool, String)> {
    let model = qubit_damping_model(1.0)?;
    let tau = 1.0 / spectral_gap(&model)?;
    let rho = uniform_superposition(2)?;
    let (mut ratio, mut marginal) = (0.0f64, 0.0f64);
    for seed in 0..5 {
        let mut rng = stream(9, seed);
        let families = (0..2)
            .map(|_| sample_random_family(2, &[1, 1], &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let r = relaxation_decoherence_experiment(&model, &families, 20.0 * tau, &rho)?;
        ratio = ratio.max(r.max_ratio);
        marginal = marginal.max(r.marginal_deviation);
    }
    Ok((
        ratio <= 1e-3 && marginal <= 1e-6,
        format!("tau {tau:.3}, max ratio at 20 tau {ratio:.2e} (<= 1e-3), marginal deviation {marginal:.2e} (<= 1e-6)"),
    ))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

fn cosmology_identities() -> Result<(bool, String)> {
    let mut rng = stream(10, 0);
    let (mut worst, mut recurrence_ok) = (0.0f64, true);
    let draws = 100_000;
    for k in 0..draws {
        let lambda0 = log_uniform(&mut rng, 1e-12, 3.0);
        let lambda1 = if k == 0 { 3e-122 } else { log_uniform(&mut rng, 1e-125, lambda0) };
        let c = log_uniform(&mut rng, 0.1, 10.0);
        let params = ReinflationParams::new(lambda0, lambda1, c)?;
        worst = worst.max(ReinflationForms::of(&params).max_relative_disagreement());
        let log_p = reinflation_log_probability(&params)?;
        let rec = recurrence_log_time(&params)?;
        recurrence_ok &= rec.exponent + log_p == 0.0
            && rec.log_prefactor == (4.0 * std::f64::consts::PI.powi(2) * params.low.length).ln()
            && rec.log_time == rec.log_prefactor + rec.exponent;
    }

    let mut flips = true;
    for (l0, l1, c) in [(3.0, 3.0, 1.0), (1e-3, 3e-122, 2.0), (0.5, 1e-40, 0.3)] {
        let params = ReinflationParams::new(l0, l1, c)?;
        let same = params.fluctuation()?;
        let nudged = |f: f64| FluctuationSpec::new(same.energy * f, same.entropy_deficit);
        let at = compare_boltzmann_brain(&params, &same)?.log_odds;
        let above = compare_boltzmann_brain(&params, &nudged(1.0 + 1e-9)?)?.log_odds;
        let below = compare_boltzmann_brain(&params, &nudged(1.0 - 1e-9)?)?.log_odds;
        flips &= at == 0.0 && above > 0.0 && below < 0.0;
    }
    Ok((
        worst <= 1e-12 && recurrence_ok && flips,
        format!(
            "{draws} draws, max cross-form disagreement {worst:.2e} (<= 1e-12), recurrence components exact {recurrence_ok}, \
             brain verdict flips at equality {flips}"
        ),
    ))
}

fn typical_histories() -> Result<(bool, String)> {
    let d = 64;
    let spec = RandomScheduleSpec::uniform(d, 2, 32, 1000, 11)?;
    let report = typical_ratio_experiment(&spec, InitialState::Random)?;
    let scaled = report
        .scaled_ratio
        .ok_or_else(|| Error::InvalidParameter("no history pairs".into()))?;
    let mut medians = Vec::new();
    for init in [InitialState::Random, InitialState::Ground, InitialState::Thermal] {
        let r = typical_ratio_experiment(&RandomScheduleSpec::uniform(d, 2, 32, 200, 12)?, init)?;
        medians.push(r.scaled_ratio.map_or(f64::NAN, |s| s.median));
    }
    let spread = medians.iter().cloned().fold(f64::MIN, f64::max) / medians.iter().cloned().fold(f64::MAX, f64::min);
    let capacity = information_capacity_check(d, 2, &[32, 16, 8, 4, 2], 40, 13, crate::ensembles::CAPACITY_THRESHOLD)?;
    let factor = capacity.crossing_factor.unwrap_or(f64::INFINITY);
    let mean_ok = (0.2..=5.0).contains(&scaled.mean);
    Ok((
        mean_ok && factor <= 4.0 && spread <= 3.0,
        format!(
            "mean ratio*d*p*p' {:.3e} (in [0.2, 5]), capacity crossing p {:?} vs {:.3} (factor {factor:.2}, <= 4), \
             initial-state median spread {spread:.2} (<= 3)",
            scaled.mean, capacity.crossing_probability, capacity.prediction
        ),
    ))
}

struct Scratch(std::path::PathBuf);

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn write_fixtures(dir: &std::path::Path) -> Result<(String, String, String)> {
    let io_err = |e: std::io::Error| Error::Input {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let fam = pauli_x_family()?;
    let file = ScheduleFile {
        dim: 2,
        initial_state: DensityMatrix::from_populations(&[0.8, 0.2])?.into_operator(),
        final_state: Some(DensityMatrix::from_populations(&[0.4, 0.6])?.into_operator()),
        final_time: Some(2.0),
        events: [0.0, 0.5, 1.25]
            .iter()
            .map(|&t| EventFile {
                t,
                family: fam.members().to_vec(),
                kind: FamilyKind::Projective,
            })
            .collect(),
        propagator: PropagatorFile::Hamiltonian(half_sigma_z()),
    };
    let schedule = dir.join("schedule.json");
    std::fs::write(&schedule, serde_json::to_string_pretty(&file)?).map_err(io_err)?;
    let model = dir.join("model.json");
    let m = ModelFile::from_model(&thermal_oscillator_model(3, 1.0, 0.5, 1.0)?);
    std::fs::write(&model, serde_json::to_string_pretty(&m)?).map_err(io_err)?;
    Ok((
        schedule.display().to_string(),
        model.display().to_string(),
        dir.display().to_string(),
    ))
}

fn determinism() -> Result<(bool, String)> {
    let dir = std::env::temp_dir().join(format!("decohist-determinism-{}", std::process::id()));
    let _guard = Scratch(dir.clone());
    let (schedule, model, _) = write_fixtures(&dir)?;
    let runs: Vec<Vec<&str>> = vec![
        vec!["oscillator-phase", "--N", "8", "--steps", "3"],
        vec!["oscillator-energy", "--N", "4"],
        vec!["mixed-coherence", "--N", "4"],
        vec!["functional", "--schedule", &schedule],
        vec!["ts-functional", "--schedule", &schedule],
        vec!["lindblad-propagate", "--model", &model, "--horizon", "0.5"],
        vec!["jump-ensemble", "--trajectories", "200", "--dt", "0.01", "--sample-every", "25"],
        vec!["povm-step-order", "--builtin", "thermal-oscillator", "--levels", "4"],
        vec!["relaxation", "--spacing-over-tau", "0,2,10"],
        vec!["cosmo", "--lambda0", "3", "--lambda1", "1e-5", "--brain-dE", "10"],
        vec!["cosmo", "sweep", "--lambda0", "1", "--lambda1-range", "1e-120:1e-2:5"],
        vec!["random-histories", "--dim", "16", "--rank", "4", "--samples", "30", "--capacity", "--capacity-ranks", "8,4,2,1", "--capacity-samples", "5"],
    ];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut differing = Vec::new();
    for args in &runs {
        let argv: Vec<&str> = ["decohist", "--seed", "17"].iter().copied().chain(args.iter().copied()).collect();
        let cli = Cli::try_parse_from_args(&argv)?;
        let first = execute(&cli)?;
        let second = pool.install(|| execute(&cli))?;
        if first.json != second.json || first.csv != second.csv {
            differing.push(args[0]);
        }
    }
    Ok((
        differing.is_empty(),
        format!("{} runs repeated (second on 3 threads), differing: {differing:?}", runs.len()),
    ))
}
