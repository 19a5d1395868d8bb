//! Quantum-jump unraveling as a generalized measurement plus feedback.
//!
//! Over one step `Δt` each channel `L_j = U_j A_j` (polar form) defines an
//! effect `M_j = γ_j Δt A_j²`; the no-jump effect is `M_0 = I - Σ_j M_j`.
//! Outcome `j` happens with probability `tr(M_j ρ)` and leaves
//! `L_j ρ L_j† / tr(L_j ρ L_j†)` (measurement `A_j`, then feedback `U_j`);
//! no jump leaves `V √M_0 ρ √M_0 V† / p_0` with `V = exp(-i H Δt)`. The
//! outcome-averaged map agrees with the master equation to `O(Δt²)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::openquantum::model::{propagate, ChannelMap, LindbladModel, PropagationMethod};
use crate::qops::{
    hermitian_eigen, hermitian_sqrt, matrix_exponential, polar_decompose, DensityMatrix, ExpMode,
    Operator, PolarDecomposition, StateVector, C64,
};
use crate::rng::{pairwise_sum, stream};
use crate::stats::log_log_slope;

/// Precomputed one-step measurement-plus-feedback scheme for a model.
#[derive(Debug, Clone)]
pub struct JumpScheme {
    dt: f64,
    jumps: Vec<Operator>,
    polar: Vec<PolarDecomposition>,
    effects: Vec<Operator>,
    /// `exp(-i H Δt) √M_0`
    no_jump: Operator,
    /// `√M_0`
    no_jump_measurement: Operator,
}

impl JumpScheme {
    pub fn new(model: &LindbladModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let d = model.dim();
        let mut jumps = Vec::new();
        let mut polar = Vec::new();
        let mut effects = Vec::new();
        let mut remaining = Operator::identity(d);
        for c in model.channels() {
            let p = polar_decompose(&c.jump)?;
            let effect = (&p.positive * &p.positive).scale_real(c.rate * dt);
            remaining = &remaining - &effect;
            jumps.push(c.jump.scale_real((c.rate * dt).sqrt()));
            polar.push(p);
            effects.push(effect);
        }
        let min = hermitian_eigen(&remaining).values[0];
        if min < -1e-12 {
            return Err(Error::StepTooLarge { min_eigenvalue: min });
        }
        let no_jump_measurement = hermitian_sqrt(&remaining)?;
        let v = matrix_exponential(model.hamiltonian(), dt, ExpMode::Propagator)?;
        Ok(Self {
            dt,
            no_jump: &v * &no_jump_measurement,
            no_jump_measurement,
            jumps,
            polar,
            effects,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn channel_count(&self) -> usize {
        self.jumps.len()
    }

    /// Effects `M_1 … M_k` (jumps), in channel order.
    pub fn effects(&self) -> &[Operator] {
        &self.effects
    }

    pub fn polar(&self, channel: usize) -> &PolarDecomposition {
        &self.polar[channel]
    }

    /// `√(I - Σ_j γ_j Δt A_j²)`
    pub fn no_jump_measurement(&self) -> &Operator {
        &self.no_jump_measurement
    }

    /// Jump probabilities `p_j = γ_j Δt tr(A_j² ρ)`.
    pub fn jump_probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        self.effects
            .iter()
            .map(|m| rho.expectation(m).re.max(0.0))
            .collect()
    }

    fn pick(probs: &[f64], u: f64) -> Option<usize> {
        let mut acc = 0.0;
        for (j, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Some(j);
            }
        }
        None
    }

    /// One step on a density matrix with uniform draw `u ∈ [0, 1)`.
    pub fn step_density(&self, rho: &DensityMatrix, u: f64) -> (Option<usize>, DensityMatrix) {
        let probs = self.jump_probabilities(rho);
        let outcome = Self::pick(&probs, u);
        let k = match outcome {
            Some(j) => &self.jumps[j],
            None => &self.no_jump,
        };
        let out = k.conjugate(rho.operator());
        let p = out.trace().re;
        let state = DensityMatrix::from_operator_unchecked(out.scale_real(1.0 / p).hermitian_part());
        (outcome, state)
    }

    /// One step on a pure state with uniform draw `u ∈ [0, 1)`.
    pub fn step_vector(&self, psi: &DVector<C64>, u: f64) -> (Option<usize>, DVector<C64>) {
        let mut out = psi.clone();
        let mut scratch = DVector::zeros(psi.len());
        let o = self.step_in_place(&mut out, &mut scratch, u);
        (o, out)
    }

    /// In-place form of [`Self::step_vector`]; `scratch` must have the
    /// state's length.
    pub fn step_in_place(&self, psi: &mut DVector<C64>, scratch: &mut DVector<C64>, u: f64) -> Option<usize> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let mut acc = 0.0;
        // p_j = ||√(γ_j Δt) L_j ψ||² = γ_j Δt <ψ|A_j²|ψ>
        for (j, l) in self.jumps.iter().enumerate() {
            scratch.gemv(one, l.matrix(), psi, zero);
            acc += scratch.norm_squared();
            if u < acc {
                let n = scratch.norm();
                psi.copy_from(scratch);
                psi.unscale_mut(n);
                return Some(j);
            }
        }
        scratch.gemv(one, self.no_jump.matrix(), psi, zero);
        let n = scratch.norm();
        psi.copy_from(scratch);
        psi.unscale_mut(n);
        None
    }

    /// Outcome-averaged map `V √M_0 ρ √M_0 V† + Σ_j γ_j Δt L_j ρ L_j†`.
    pub fn averaged_step(&self, rho: &Operator) -> Operator {
        let mut out = self.no_jump.conjugate(rho);
        for l in &self.jumps {
            out = &out + &l.conjugate(rho);
        }
        out
    }
}

/// Branch data of one measurement-plus-feedback step.
#[derive(Debug, Clone)]
pub struct PovmStep {
    pub outcome: u8,
    pub probability_jump: f64,
    pub state: DensityMatrix,
}

/// Single-channel measurement-plus-feedback step: outcome 1 (jump) with
/// probability `γΔt tr(A²ρ)`, else outcome 0. `draw` is uniform on `[0, 1)`.
pub fn povm_feedback_step(model: &LindbladModel, rho: &DensityMatrix, dt: f64, draw: f64) -> Result<PovmStep> {
    if model.channels().len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "expected a single channel, got {}",
            model.channels().len()
        )));
    }
    if rho.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho.dim(),
        });
    }
    let scheme = JumpScheme::new(model, dt)?;
    let p1 = scheme.jump_probabilities(rho)[0];
    let (outcome, state) = scheme.step_density(rho, draw);
    Ok(PovmStep {
        outcome: u8::from(outcome.is_some()),
        probability_jump: p1,
        state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEvent {
    /// End of the step in which the jump occurred.
    pub time: f64,
    pub channel: usize,
}

/// State carried along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl TrajectoryState {
    pub fn density(&self) -> DensityMatrix {
        match self {
            Self::Pure(v) => v.density(),
            Self::Mixed(r) => r.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub seed: u64,
    pub samples: Vec<(f64, TrajectoryState)>,
    pub jumps: Vec<JumpEvent>,
}

/// Number of whole steps of size `dt` in `horizon`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter("horizon must be >= 0 and dt > 0".into()));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} is not a multiple of dt {dt}"
        )));
    }
    Ok(n as usize)
}

/// Runs one trajectory of the jump process.
///
/// The state is recorded at `t = 0` and then every `record_every` steps
/// (and always at the horizon). Identical seeds give identical trajectories.
pub fn jump_unravel(
    model: &LindbladModel,
    initial: &TrajectoryState,
    horizon: f64,
    dt: f64,
    seed: u64,
    record_every: usize,
) -> Result<Trajectory> {
    let scheme = JumpScheme::new(model, dt)?;
    let steps = step_count(horizon, dt)?;
    let every = record_every.max(1);
    let mut rng = rand_chacha::ChaCha8Rng::from_seed_u64(seed);
    let mut jumps = Vec::new();
    let mut samples = vec![(0.0, initial.clone())];
    let mut state = initial.clone();
    for k in 0..steps {
        let u: f64 = rng.gen();
        let (outcome, next) = match &state {
            TrajectoryState::Pure(v) => {
                let (o, w) = scheme.step_vector(v.amplitudes(), u);
                (o, TrajectoryState::Pure(StateVector::from_unit(w)))
            }
            TrajectoryState::Mixed(r) => {
                let (o, s) = scheme.step_density(r, u);
                (o, TrajectoryState::Mixed(s))
            }
        };
        let t = (k + 1) as f64 * dt;
        if let Some(channel) = outcome {
            jumps.push(JumpEvent { time: t, channel });
        }
        state = next;
        if (k + 1) % every == 0 || k + 1 == steps {
            samples.push((t, state.clone()));
        }
    }
    Ok(Trajectory {
        seed,
        samples,
        jumps,
    })
}

trait SeedFromU64 {
    fn from_seed_u64(seed: u64) -> Self;
}

impl SeedFromU64 for rand_chacha::ChaCha8Rng {
    fn from_seed_u64(seed: u64) -> Self {
        <Self as rand::SeedableRng>::seed_from_u64(seed)
    }
}

/// Settings for [`ensemble_average`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub horizon: f64,
    pub dt: f64,
    pub trajectories: usize,
    pub seed: u64,
    /// Record the ensemble mean every this many steps (0 = horizon only).
    pub sample_every: usize,
    /// Compare against the exact propagator.
    pub exact_oracle: bool,
    /// Keep every jump event (tagged with its trajectory index).
    pub record_jumps: bool,
}

/// Ensemble mean at one time, with element-wise standard errors.
#[derive(Debug, Clone)]
pub struct EnsembleSnapshot {
    pub time: f64,
    pub mean: DensityMatrix,
    /// Standard error of the real and imaginary parts of each entry.
    pub stderr_re: DMatrix<f64>,
    pub stderr_im: DMatrix<f64>,
    /// Frobenius norm of the standard-error matrix.
    pub statistical_error: f64,
    pub trace_distance_to_exact: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub snapshots: Vec<EnsembleSnapshot>,
    /// `Δt · T · (rate scale)²`, the order of the first-order step bias.
    pub dt_bias_scale: f64,
    pub total_jumps: usize,
    /// `(trajectory, event)` pairs when `record_jumps` is set.
    pub jumps: Vec<(usize, JumpEvent)>,
}

impl EnsembleResult {
    pub fn final_snapshot(&self) -> &EnsembleSnapshot {
        self.snapshots.last().expect("at least one snapshot")
    }
}

#[derive(Clone)]
struct Moments {
    sum: DMatrix<C64>,
    sq_re: DMatrix<f64>,
    sq_im: DMatrix<f64>,
}

impl Moments {
    fn of(rho: &DMatrix<C64>) -> Self {
        Self {
            sum: rho.clone(),
            sq_re: rho.map(|z| z.re * z.re),
            sq_im: rho.map(|z| z.im * z.im),
        }
    }

    fn add(a: &Self, b: &Self) -> Self {
        Self {
            sum: &a.sum + &b.sum,
            sq_re: &a.sq_re + &b.sq_re,
            sq_im: &a.sq_im + &b.sq_im,
        }
    }
}

type Partial = (Vec<Moments>, Vec<(usize, JumpEvent)>, usize);

fn add_rows(a: &Partial, b: &Partial) -> Partial {
    (
        a.0.iter().zip(&b.0).map(|(x, y)| Moments::add(x, y)).collect(),
        a.1.iter().chain(&b.1).copied().collect(),
        a.2 + b.2,
    )
}

const CHUNK: usize = 64;

/// Samples an initial pure state from the spectral decomposition of `rho`.
fn sample_initial(rho: &DensityMatrix, u: f64) -> DVector<C64> {
    let eig = hermitian_eigen(rho.operator());
    let mut acc = 0.0;
    let last = eig.values.len() - 1;
    for (k, &w) in eig.values.iter().enumerate().rev() {
        acc += w.max(0.0);
        if u < acc || k == 0 {
            return eig.vector(k);
        }
    }
    eig.vector(last)
}

/// Averages `trajectories` pure-state trajectories started from `initial`
/// (sampled through its eigendecomposition).
///
/// Trajectory `k` uses the stream seeded by `(seed, k)`; sums are reduced in
/// fixed-size chunks by pairwise summation, so the result does not depend on
/// the number of threads.
pub fn ensemble_average(model: &LindbladModel, initial: &DensityMatrix, config: EnsembleConfig) -> Result<EnsembleResult> {
    if config.trajectories == 0 {
        return Err(Error::InvalidParameter("need at least one trajectory".into()));
    }
    if initial.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: initial.dim(),
        });
    }
    let scheme = JumpScheme::new(model, config.dt)?;
    let steps = step_count(config.horizon, config.dt)?;
    let every = if config.sample_every == 0 { steps.max(1) } else { config.sample_every };
    let mut sample_steps: Vec<usize> = (0..=steps).step_by(every).collect();
    if *sample_steps.last().expect("non-empty") != steps {
        sample_steps.push(steps);
    }

    let run = |k: usize| -> Partial {
        let mut rng = stream(config.seed, k as u64);
        let mut psi = sample_initial(initial, rng.gen());
        let mut scratch = DVector::zeros(psi.len());
        let mut rows = Vec::with_capacity(sample_steps.len());
        let mut next_sample = 0;
        let mut jumps = 0;
        let mut events = Vec::new();
        for step in 0..=steps {
            if next_sample < sample_steps.len() && sample_steps[next_sample] == step {
                rows.push(Moments::of(&(&psi * psi.adjoint())));
                next_sample += 1;
            }
            if step == steps {
                break;
            }
            let o = scheme.step_in_place(&mut psi, &mut scratch, rng.gen());
            if let Some(channel) = o {
                jumps += 1;
                if config.record_jumps {
                    let time = (step + 1) as f64 * config.dt;
                    events.push((k, JumpEvent { time, channel }));
                }
            }
        }
        (rows, events, jumps)
    };

    let chunks: Vec<Partial> = (0..config.trajectories)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|ks| {
            let rows: Vec<Partial> = ks.iter().map(|&k| run(k)).collect();
            pairwise_sum(&rows, &add_rows).expect("non-empty chunk")
        })
        .collect();
    let (totals, jumps, total_jumps) = pairwise_sum(&chunks, &add_rows).expect("non-empty ensemble");

    let m = config.trajectories as f64;
    let mut snapshots = Vec::with_capacity(sample_steps.len());
    for (idx, &step) in sample_steps.iter().enumerate() {
        let t = step as f64 * config.dt;
        let mo = &totals[idx];
        let mean = &mo.sum / C64::new(m, 0.0);
        let var = |sq: &DMatrix<f64>, part: fn(&C64) -> f64| {
            DMatrix::from_fn(mean.nrows(), mean.ncols(), |i, j| {
                let mu = part(&mean[(i, j)]);
                let v = (sq[(i, j)] / m - mu * mu).max(0.0);
                if m > 1.0 {
                    (v / (m - 1.0)).sqrt()
                } else {
                    0.0
                }
            })
        };
        let stderr_re = var(&mo.sq_re, |z| z.re);
        let stderr_im = var(&mo.sq_im, |z| z.im);
        let statistical_error = (stderr_re.map(|x| x * x).sum() + stderr_im.map(|x| x * x).sum()).sqrt();
        let mean = DensityMatrix::from_operator_unchecked(Operator::from_matrix(mean).hermitian_part());
        let trace_distance_to_exact = if config.exact_oracle {
            let exact = propagate(model, initial, t, PropagationMethod::Auto)?;
            Some(mean.trace_distance(&exact))
        } else {
            None
        };
        snapshots.push(EnsembleSnapshot {
            time: t,
            mean,
            stderr_re,
            stderr_im,
            statistical_error,
            trace_distance_to_exact,
        });
    }
    let rate = model.rate_scale();
    Ok(EnsembleResult {
        config,
        snapshots,
        dt_bias_scale: config.dt * config.horizon * rate * rate,
        total_jumps,
        jumps,
    })
}

/// One-step error of the averaged jump map against the exact channel.
#[derive(Debug, Clone, Serialize)]
pub struct StepOrderReport {
    pub dts: Vec<f64>,
    /// `||averaged step - exact step||₁`
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
}

pub fn step_order_fit(model: &LindbladModel, rho: &DensityMatrix, dts: &[f64]) -> Result<StepOrderReport> {
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let scheme = JumpScheme::new(model, dt)?;
        let averaged = scheme.averaged_step(rho.operator());
        let exact = ChannelMap::from_model(model, dt)?.apply(rho.operator());
        errors.push((&averaged - &exact).trace_norm());
    }
    Ok(StepOrderReport {
        dts: dts.to_vec(),
        slope: log_log_slope(dts, &errors),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::openquantum::model::{qubit_damping_model, thermal_oscillator_model};
    use crate::qops::{ONE, ZERO};

    #[test]
    fn unitary_jump_has_fixed_probability() {
        let l = Operator::from_rows(2, &[ZERO, ONE, ONE, ZERO]).unwrap();
        let model = LindbladModel::new(
            Operator::zeros(2),
            vec![crate::openquantum::Channel { jump: l.clone(), rate: 2.0 }],
        )
        .unwrap();
        let rho = DensityMatrix::from_populations(&[0.3, 0.7]).unwrap();
        let step = povm_feedback_step(&model, &rho, 0.01, 0.0).unwrap();
        assert!((step.probability_jump - 0.02).abs() < 1e-15);
        assert_eq!(step.outcome, 1);
        assert!(step.state.operator().distance(&l.conjugate(rho.operator())) < 1e-14);
        let stay = povm_feedback_step(&model, &rho, 0.01, 0.5).unwrap();
        assert_eq!(stay.outcome, 0);
        assert!(stay.state.operator().distance(rho.operator()) < 1e-14);
    }

    #[test]
    fn damping_step_from_excited_state() {
        let model = qubit_damping_model(1.0).unwrap();
        let excited = DensityMatrix::from_populations(&[0.0, 1.0]).unwrap();
        let dt = 0.05;
        let jump = povm_feedback_step(&model, &excited, dt, 0.0).unwrap();
        assert!((jump.probability_jump - dt).abs() < 1e-15);
        assert!(jump.state.operator().distance(&Operator::from_real_diagonal(&[1.0, 0.0])) < 1e-14);
        let stay = povm_feedback_step(&model, &excited, dt, 0.99).unwrap();
        assert_eq!(stay.outcome, 0);
        assert!(stay.state.operator().distance(excited.operator()) < 1e-14);
    }

    #[test]
    fn step_too_large_is_rejected() {
        let model = qubit_damping_model(1.0).unwrap();
        assert!(matches!(JumpScheme::new(&model, 1.5), Err(Error::StepTooLarge { .. })));
        let two = thermal_oscillator_model(3, 1.0, 1.0, 1.0).unwrap();
        assert!(povm_feedback_step(&two, &DensityMatrix::maximally_mixed(3), 0.01, 0.1).is_err());
    }

    #[test]
    fn averaged_step_is_second_order_accurate() {
        let model = thermal_oscillator_model(4, 1.0, 0.8, 0.7).unwrap();
        let rho = DensityMatrix::from_populations(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut errs = Vec::new();
        for dt in [1e-2, 1e-3] {
            let s = JumpScheme::new(&model, dt).unwrap();
            let avg = s.averaged_step(rho.operator());
            let exact = ChannelMap::from_model(&model, dt).unwrap().apply(rho.operator());
            errs.push((&avg - &exact).trace_norm());
        }
        let slope = (errs[0] / errs[1]).log10();
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn trajectories_are_reproducible() {
        let model = qubit_damping_model(1.0).unwrap();
        let init = TrajectoryState::Pure(StateVector::basis(2, 1).unwrap());
        let a = jump_unravel(&model, &init, 2.0, 0.01, 42, 10).unwrap();
        let b = jump_unravel(&model, &init, 2.0, 0.01, 42, 10).unwrap();
        assert_eq!(a.jumps, b.jumps);
        assert_eq!(a.samples.len(), 21);
        assert!(a.jumps.len() <= 1);
        let mixed = TrajectoryState::Mixed(DensityMatrix::from_populations(&[0.5, 0.5]).unwrap());
        let c = jump_unravel(&model, &mixed, 1.0, 0.01, 1, 0).unwrap();
        let last = c.samples.last().unwrap().1.density();
        assert!((last.operator().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_model_trajectory_has_no_jumps() {
        let h = Operator::from_rows(2, &[ZERO, ONE, ONE, ZERO]).unwrap();
        let model = LindbladModel::new(h.clone(), vec![]).unwrap();
        let init = TrajectoryState::Pure(StateVector::basis(2, 0).unwrap());
        let t = jump_unravel(&model, &init, 1.0, 0.1, 3, 0).unwrap();
        assert!(t.jumps.is_empty());
        let exact = matrix_exponential(&h, 1.0, ExpMode::Propagator).unwrap();
        let expected = exact.conjugate(&StateVector::basis(2, 0).unwrap().projector());
        let got = t.samples.last().unwrap().1.density();
        assert!(got.operator().distance(&expected) < 1e-12);
    }

    #[test]
    fn horizon_must_be_multiple_of_step() {
        assert!(step_count(1.0, 0.3).is_err());
        assert_eq!(step_count(1.0, 0.25).unwrap(), 4);
    }

    #[test]
    fn single_trajectory_ensemble_equals_trajectory_state() {
        let model = qubit_damping_model(1.0).unwrap();
        let init = DensityMatrix::from_populations(&[0.0, 1.0]).unwrap();
        let cfg = EnsembleConfig {
            horizon: 0.5,
            dt: 0.01,
            trajectories: 1,
            seed: 9,
            sample_every: 0,
            exact_oracle: true,
            record_jumps: true,
        };
        let r = ensemble_average(&model, &init, cfg).unwrap();
        let snap = r.final_snapshot();
        let p = snap.mean.operator().get(1, 1).re;
        assert!(p == 0.0 || (p - 1.0).abs() < 1e-12);
        assert_eq!(snap.statistical_error, 0.0);
    }

    #[test]
    fn ensemble_is_deterministic_across_thread_pools() {
        let model = thermal_oscillator_model(3, 1.0, 1.0, 1.0).unwrap();
        let init = DensityMatrix::from_populations(&[0.2, 0.3, 0.5]).unwrap();
        let cfg = EnsembleConfig {
            horizon: 0.5,
            dt: 0.01,
            trajectories: 300,
            seed: 5,
            sample_every: 10,
            exact_oracle: false,
            record_jumps: false,
        };
        let a = ensemble_average(&model, &init, cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| ensemble_average(&model, &init, cfg).unwrap());
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(x.mean, y.mean);
        }
        assert_eq!(a.snapshots.len(), 6);
    }
}
