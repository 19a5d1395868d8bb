//! Truncated harmonic oscillator: energy and phase bases, the phase step
//! unitary, and the canned history schedules built from them.
//!
//! `H = ω · diag(0, 1, …, N-1)` on the lowest `N` levels. The phase states
//! `|φ_j> = N^{-1/2} Σ_l e^{i l φ_j} |l>`, `φ_j = 2πj/N`, form an
//! orthonormal basis that the propagator over `Δt = 2π/(Nω)` permutes
//! cyclically.
//!
//! Direction: with `U = exp(-i H Δt)` the index moves `j → j - 1 (mod N)`;
//! see [`TruncatedOscillator::successor`].

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::histories::{
    pure_endpoint_ratio, Event, EventSchedule, HistoryLabel, PureEndpointReport,
};
use crate::qops::{matrix_exponential, ExpMode, Operator, ProjectorFamily, StateVector, C64, I};

/// Index shift produced by one application of [`TruncatedOscillator::step_unitary`].
pub const STEP_SHIFT: isize = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedOscillator {
    levels: usize,
    omega: f64,
}

impl TruncatedOscillator {
    pub fn new(levels: usize, omega: f64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 levels, got {levels}")));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidParameter(format!("frequency must be positive, got {omega}")));
        }
        Ok(Self { levels, omega })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn hamiltonian(&self) -> Operator {
        let diag: Vec<f64> = (0..self.levels).map(|l| self.omega * l as f64).collect();
        Operator::from_real_diagonal(&diag)
    }

    /// Truncated annihilation operator, `a|l> = sqrt(l)|l-1>`.
    pub fn lowering(&self) -> Operator {
        let n = self.levels;
        Operator::from_matrix(DMatrix::from_fn(n, n, |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn raising(&self) -> Operator {
        self.lowering().adjoint()
    }

    /// `Δt = 2π / (N ω)`
    pub fn step_time(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.levels as f64 * self.omega)
    }

    pub fn phase(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.levels as f64
    }

    /// Index reached from `j` after one step.
    pub fn successor(&self, j: usize) -> usize {
        let n = self.levels as isize;
        ((j as isize + STEP_SHIFT).rem_euclid(n)) as usize
    }

    pub fn energy_state(&self, l: usize) -> Result<StateVector> {
        StateVector::basis(self.levels, l)
    }

    pub fn phase_states(&self) -> PhaseBasis {
        let n = self.levels;
        let norm = 1.0 / (n as f64).sqrt();
        let states = (0..n)
            .map(|j| {
                let phi = self.phase(j);
                StateVector::from_unit(DVector::from_fn(n, |l, _| (I * (l as f64 * phi)).exp() * norm))
            })
            .collect();
        PhaseBasis { states }
    }

    pub fn step_unitary(&self) -> Operator {
        matrix_exponential(&self.hamiltonian(), self.step_time(), ExpMode::Propagator)
            .expect("diagonal Hamiltonian is finite")
    }

    pub fn phase_family(&self) -> ProjectorFamily {
        let basis = self.phase_states();
        ProjectorFamily::new(basis.states.iter().map(StateVector::projector).collect())
            .expect("phase states are orthonormal")
    }

    pub fn energy_family(&self) -> ProjectorFamily {
        ProjectorFamily::computational(self.levels)
    }

    /// `n_events` phase measurements spaced by `Δt`, starting at `t = 0`.
    pub fn phase_history_schedule(&self, n_events: usize) -> Result<EventSchedule> {
        if n_events == 0 {
            return Err(Error::InvalidParameter("need at least one event".into()));
        }
        let dt = self.step_time();
        let family = self.phase_family();
        let events = (0..n_events)
            .map(|k| Event::new(k as f64 * dt, family.clone()))
            .collect();
        EventSchedule::with_hamiltonian(events, self.hamiltonian())
    }

    /// Energy-eigenprojector measurements at arbitrary increasing times.
    pub fn energy_history_schedule(&self, times: &[f64]) -> Result<EventSchedule> {
        if times.is_empty() {
            return Err(Error::InvalidParameter("need at least one event".into()));
        }
        let family = self.energy_family();
        let events = times.iter().map(|&t| Event::new(t, family.clone())).collect();
        EventSchedule::with_hamiltonian(events, self.hamiltonian())
    }

    /// Whether `label` follows the deterministic phase rotation.
    pub fn is_successor_chain(&self, label: &HistoryLabel) -> bool {
        label
            .outcomes()
            .windows(2)
            .all(|w| w[1] == self.successor(w[0]))
    }

    /// Phase histories bracketed by pure endpoints: the ground state on both
    /// ends (coherent) and a matched phase-state pair (deterministic control).
    pub fn mixed_basis_coherence_demo(&self, n_events: usize) -> Result<MixedCoherenceReport> {
        let schedule = self.phase_history_schedule(n_events)?;
        let ground = self.energy_state(0)?;
        let ground_to_ground = pure_endpoint_ratio(&schedule, &ground, &ground)?;

        let basis = self.phase_states();
        let mut end = 0;
        for _ in 1..n_events {
            end = self.successor(end);
        }
        let control = pure_endpoint_ratio(&schedule, &basis.states[0], &basis.states[end])?;
        Ok(MixedCoherenceReport {
            levels: self.levels,
            events: n_events,
            all_ratios_unity: ground_to_ground.max_deviation_from_unity <= 1e-8
                && !ground_to_ground.pairs.is_empty(),
            ground_to_ground,
            control,
        })
    }
}

/// Orthonormal discrete phase basis.
#[derive(Debug, Clone)]
pub struct PhaseBasis {
    pub states: Vec<StateVector>,
}

impl PhaseBasis {
    /// `max |<φ_j|φ_k> - δ_jk|`
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, a) in self.states.iter().enumerate() {
            for (k, b) in self.states.iter().enumerate() {
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b) - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MixedCoherenceReport {
    pub levels: usize,
    pub events: usize,
    pub ground_to_ground: PureEndpointReport,
    pub control: PureEndpointReport,
    pub all_ratios_unity: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::decoherence_functional;
    use crate::qops::DensityMatrix;

    #[test]
    fn two_level_phase_states() {
        let osc = TruncatedOscillator::new(2, 1.0).unwrap();
        let b = osc.phase_states();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a0 = b.states[0].amplitudes();
        let a1 = b.states[1].amplitudes();
        assert!((a0[0] - C64::new(s, 0.0)).norm() < 1e-15 && (a0[1] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((a1[0] - C64::new(s, 0.0)).norm() < 1e-15 && (a1[1] + C64::new(s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn phase_states_orthonormal() {
        for n in [2, 3, 4, 7, 16, 64] {
            let b = TruncatedOscillator::new(n, 0.7).unwrap().phase_states();
            assert!(b.orthonormality_defect() < 1e-10, "N={n}");
        }
        let b4 = TruncatedOscillator::new(4, 1.0).unwrap().phase_states();
        assert!(b4.states[0].inner(&b4.states[2]).norm() < 1e-15);
    }

    #[test]
    fn step_unitary_permutes_phase_basis() {
        for n in [2, 3, 5, 8, 16, 64] {
            let osc = TruncatedOscillator::new(n, 1.9).unwrap();
            let u = osc.step_unitary();
            assert!(u.is_unitary(1e-10));
            let b = osc.phase_states();
            for j in 0..n {
                let moved = u.apply(b.states[j].amplitudes());
                let overlap = b.states[osc.successor(j)].amplitudes().dotc(&moved);
                assert!((overlap.norm() - 1.0).abs() < 1e-10, "N={n} j={j}");
            }
            // full revolution is a global phase (here exactly the identity)
            let mut full = Operator::identity(n);
            for _ in 0..n {
                full = &u * &full;
            }
            let phase = full.get(0, 0);
            assert!(full.distance(&Operator::identity(n).scale(phase)) < 1e-9);
        }
    }

    #[test]
    fn two_level_step_swaps_phases() {
        let osc = TruncatedOscillator::new(2, 1.0).unwrap();
        assert_eq!(osc.successor(0), 1);
        assert_eq!(osc.successor(1), 0);
        let u = osc.step_unitary();
        // exp(-iπ diag(0,1)) = diag(1, -1)
        assert!(u.distance(&Operator::from_real_diagonal(&[1.0, -1.0])) < 1e-12);
    }

    #[test]
    fn energy_eigenstates_only_pick_up_phase() {
        let osc = TruncatedOscillator::new(6, 1.0).unwrap();
        let u = osc.step_unitary();
        for l in 0..6 {
            assert!((u.get(l, l).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_step_phase_schedule_from_ground() {
        let osc = TruncatedOscillator::new(2, 1.0).unwrap();
        let s = osc.phase_history_schedule(2).unwrap();
        let d = decoherence_functional(&s, &osc.energy_state(0).unwrap().density()).unwrap();
        let p: Vec<f64> = d.probabilities().into_iter().map(|(_, p)| p).collect();
        // labels 00, 01, 10, 11
        let expected = [0.0, 0.5, 0.5, 0.0];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(d.max_off_diagonal() < 1e-12);
    }

    #[test]
    fn energy_schedule_is_diagonal() {
        let osc = TruncatedOscillator::new(4, 1.0).unwrap();
        let s = osc.energy_history_schedule(&[0.0, 0.3, 1.7]).unwrap();
        let rho = osc.phase_states().states[1].density();
        let d = decoherence_functional(&s, &rho).unwrap();
        assert!(d.max_off_diagonal() < 1e-12);
        let _ = DensityMatrix::maximally_mixed(4);
    }

    #[test]
    fn mixed_basis_demo() {
        let osc = TruncatedOscillator::new(2, 1.0).unwrap();
        let r = osc.mixed_basis_coherence_demo(1).unwrap();
        assert!(r.all_ratios_unity);
        assert_eq!(r.ground_to_ground.pairs.len(), 1);
        assert!(r.control.decoherent);

        let big = TruncatedOscillator::new(8, 1.0).unwrap().mixed_basis_coherence_demo(3).unwrap();
        assert!(big.all_ratios_unity);
        assert_eq!(big.ground_to_ground.live_histories, 8);
        assert!(big.control.decoherent);
        assert_eq!(big.control.live_histories, 1);
    }

    #[test]
    fn invalid_oscillators() {
        assert!(TruncatedOscillator::new(1, 1.0).is_err());
        assert!(TruncatedOscillator::new(3, 0.0).is_err());
        assert!(TruncatedOscillator::new(3, f64::NAN).is_err());
    }
}
