//! Decoherence functionals for sequences of measurement events.
//!
//! A history `α = (α_1, …, α_n)` picks one outcome per event. Its class
//! operator is the time-ordered chain
//!
//! ```text
//! C_α = P^n_{α_n} U(t_n, t_{n-1}) … U(t_2, t_1) P^1_{α_1}
//! ```
//!
//! and the decoherence functional is `D(α, α') = tr(C_α ρ_i C_α'†)`.
//! Histories are (approximately) decoherent when every normalized
//! off-diagonal ratio `|D(α,α')|² / (D(α,α) D(α',α'))` is small.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qops::{
    matrix_exponential, DensityMatrix, ExpMode, Operator, ProjectorFamily, StateVector, C64,
    ZERO,
};

/// Diagonal entries below this are excluded from ratio tests.
pub const DEFAULT_RATIO_FLOOR: f64 = 1e-12;

/// Above this many histories the functional is evaluated pair by pair
/// instead of being stored as a dense matrix.
pub const DENSE_LABEL_LIMIT: usize = 4096;

/// Generalized measurement `{K_a}` with `Σ K_a† K_a = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausFamily {
    members: Vec<Operator>,
}

impl KrausFamily {
    pub fn new(members: Vec<Operator>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidFamily("empty Kraus family".into()));
        };
        let d = first.dim();
        let mut sum = Operator::zeros(d);
        for k in &members {
            first.check_dim(k)?;
            sum = &sum + &(&k.adjoint() * k);
        }
        let defect = sum.distance(&Operator::identity(d));
        if defect > 1e-10 {
            return Err(Error::InvalidFamily(format!(
                "Kraus operators are not complete ({defect:.3e})"
            )));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Operator] {
        &self.members
    }
}

impl From<ProjectorFamily> for KrausFamily {
    fn from(p: ProjectorFamily) -> Self {
        Self {
            members: p.members().to_vec(),
        }
    }
}

/// Outcome family attached to one event.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementFamily {
    Projective(ProjectorFamily),
    Kraus(KrausFamily),
}

impl MeasurementFamily {
    pub fn members(&self) -> &[Operator] {
        match self {
            Self::Projective(p) => p.members(),
            Self::Kraus(k) => k.members(),
        }
    }

    pub fn len(&self) -> usize {
        self.members().len()
    }

    pub fn is_empty(&self) -> bool {
        self.members().is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members()[0].dim()
    }

    pub fn is_projective(&self) -> bool {
        matches!(self, Self::Projective(_))
    }
}

impl From<ProjectorFamily> for MeasurementFamily {
    fn from(p: ProjectorFamily) -> Self {
        Self::Projective(p)
    }
}

impl From<KrausFamily> for MeasurementFamily {
    fn from(k: KrausFamily) -> Self {
        Self::Kraus(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub family: MeasurementFamily,
}

impl Event {
    pub fn new(time: f64, family: impl Into<MeasurementFamily>) -> Self {
        Self {
            time,
            family: family.into(),
        }
    }
}

/// Looks up the unitary for gap `k` (between events `k` and `k+1`) given
/// the outcome prefix `α_1 … α_{k+1}`.
pub type BranchRule = Arc<dyn Fn(usize, &[usize]) -> Option<Operator> + Send + Sync>;

/// How the state is carried between consecutive events.
#[derive(Clone)]
pub enum Propagation {
    /// `exp(-i H (t_{k+1} - t_k))`
    Hamiltonian(Operator),
    /// One explicit unitary per gap.
    Unitaries(Vec<Operator>),
    /// Outcome-dependent unitaries.
    Branching(BranchRule),
}

impl fmt::Debug for Propagation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hamiltonian(h) => f.debug_tuple("Hamiltonian").field(h).finish(),
            Self::Unitaries(u) => f.debug_tuple("Unitaries").field(&u.len()).finish(),
            Self::Branching(_) => f.write_str("Branching(..)"),
        }
    }
}

/// Ordered events at strictly increasing times plus the propagation rule.
#[derive(Debug, Clone)]
pub struct EventSchedule {
    dim: usize,
    events: Vec<Event>,
    propagation: Propagation,
    gap_unitaries: Vec<Operator>,
    prepared_at: Option<f64>,
}

impl EventSchedule {
    pub fn new(events: Vec<Event>, propagation: Propagation) -> Result<Self> {
        let Some(first) = events.first() else {
            return Err(Error::InvalidSchedule("schedule has no events".into()));
        };
        let dim = first.family.dim();
        for (k, e) in events.iter().enumerate() {
            if !e.time.is_finite() {
                return Err(Error::InvalidSchedule(format!("event {k} has non-finite time")));
            }
            if e.family.is_empty() {
                return Err(Error::InvalidSchedule(format!("event {k} has no outcomes")));
            }
            if e.family.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.family.dim(),
                });
            }
            if k > 0 && e.time <= events[k - 1].time {
                return Err(Error::InvalidSchedule(format!(
                    "event times must increase strictly (event {k} at {} after {})",
                    e.time,
                    events[k - 1].time
                )));
            }
        }
        let gaps = events.len() - 1;
        let gap_unitaries = match &propagation {
            Propagation::Hamiltonian(h) => {
                if h.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: h.dim(),
                    });
                }
                if !h.is_hermitian(1e-10) {
                    return Err(Error::NotHermitian(h.hermiticity_defect()));
                }
                events
                    .windows(2)
                    .map(|w| matrix_exponential(h, w[1].time - w[0].time, ExpMode::Propagator))
                    .collect::<Result<Vec<_>>>()?
            }
            Propagation::Unitaries(us) => {
                if us.len() != gaps {
                    return Err(Error::InvalidSchedule(format!(
                        "{} unitaries supplied for {gaps} gaps",
                        us.len()
                    )));
                }
                for u in us {
                    if u.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: u.dim(),
                        });
                    }
                    if !u.is_unitary(1e-8) {
                        return Err(Error::InvalidSchedule("gap propagator is not unitary".into()));
                    }
                }
                us.clone()
            }
            Propagation::Branching(_) => Vec::new(),
        };
        Ok(Self {
            dim,
            events,
            propagation,
            gap_unitaries,
            prepared_at: None,
        })
    }

    pub fn with_hamiltonian(events: Vec<Event>, h: Operator) -> Result<Self> {
        Self::new(events, Propagation::Hamiltonian(h))
    }

    /// Events separated by explicit unitaries; times are `0, 1, 2, …`.
    pub fn with_unitaries(families: Vec<MeasurementFamily>, unitaries: Vec<Operator>) -> Result<Self> {
        let events = families
            .into_iter()
            .enumerate()
            .map(|(k, f)| Event { time: k as f64, family: f })
            .collect();
        Self::new(events, Propagation::Unitaries(unitaries))
    }

    /// Declares that the initial state is given at `t0` rather than at the
    /// first event time; it is evolved with the schedule's Hamiltonian.
    pub fn prepared_at(mut self, t0: f64) -> Result<Self> {
        if !matches!(self.propagation, Propagation::Hamiltonian(_)) {
            return Err(Error::InvalidSchedule(
                "a preparation time needs Hamiltonian propagation".into(),
            ));
        }
        if !(t0 <= self.events[0].time) {
            return Err(Error::InvalidSchedule(format!(
                "preparation time {t0} is after the first event"
            )));
        }
        self.prepared_at = Some(t0);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn propagation(&self) -> &Propagation {
        &self.propagation
    }

    pub fn hamiltonian(&self) -> Option<&Operator> {
        match &self.propagation {
            Propagation::Hamiltonian(h) => Some(h),
            _ => None,
        }
    }

    pub fn is_projective(&self) -> bool {
        self.events.iter().all(|e| e.family.is_projective())
    }

    pub fn label_count(&self) -> usize {
        self.events.iter().map(|e| e.family.len()).product()
    }

    /// All histories in lexicographic order (first event slowest).
    pub fn labels(&self) -> Vec<HistoryLabel> {
        let sizes: Vec<usize> = self.events.iter().map(|e| e.family.len()).collect();
        let total = self.label_count();
        (0..total)
            .map(|mut idx| {
                let mut out = vec![0; sizes.len()];
                for (k, &s) in sizes.iter().enumerate().rev() {
                    out[k] = idx % s;
                    idx /= s;
                }
                HistoryLabel(out)
            })
            .collect()
    }

    pub fn validate_label(&self, label: &HistoryLabel) -> Result<()> {
        if label.0.len() != self.events.len() {
            return Err(Error::InvalidSchedule(format!(
                "label {label} has {} outcomes for {} events",
                label.0.len(),
                self.events.len()
            )));
        }
        for (k, (&a, e)) in label.0.iter().zip(&self.events).enumerate() {
            if a >= e.family.len() {
                return Err(Error::InvalidSchedule(format!(
                    "outcome {a} at event {k} out of range ({} outcomes)",
                    e.family.len()
                )));
            }
        }
        Ok(())
    }

    /// Unitary for gap `gap` given the outcomes of events `0..=gap`.
    pub fn propagator(&self, gap: usize, prefix: &[usize]) -> Result<Operator> {
        match &self.propagation {
            Propagation::Branching(rule) => {
                let u = rule(gap, prefix).ok_or_else(|| Error::MissingBranchPropagator {
                    gap,
                    prefix: prefix.to_vec(),
                })?;
                if u.dim() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: u.dim(),
                    });
                }
                Ok(u)
            }
            _ => self
                .gap_unitaries
                .get(gap)
                .cloned()
                .ok_or_else(|| Error::InvalidSchedule(format!("no gap {gap}"))),
        }
    }

    /// Evolves the initial state from the preparation time to the first event.
    fn prepare(&self, rho: &Operator) -> Result<Operator> {
        match (self.prepared_at, &self.propagation) {
            (Some(t0), Propagation::Hamiltonian(h)) => {
                let u = matrix_exponential(h, self.events[0].time - t0, ExpMode::Propagator)?;
                Ok(u.conjugate(rho))
            }
            _ => Ok(rho.clone()),
        }
    }
}

/// Outcome sequence `α_1 … α_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct HistoryLabel(pub Vec<usize>);

impl HistoryLabel {
    pub fn outcomes(&self) -> &[usize] {
        &self.0
    }

    pub fn last(&self) -> usize {
        *self.0.last().expect("labels are non-empty")
    }
}

impl fmt::Display for HistoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// `C_α = P^n_{α_n} U_{n-1} … U_1 P^1_{α_1}`
pub fn class_operator(schedule: &EventSchedule, label: &HistoryLabel) -> Result<Operator> {
    schedule.validate_label(label)?;
    let mut c = schedule.events[0].family.members()[label.0[0]].clone();
    for k in 1..schedule.events.len() {
        let u = schedule.propagator(k - 1, &label.0[..k])?;
        let p = &schedule.events[k].family.members()[label.0[k]];
        c = &(p * &u) * &c;
    }
    Ok(c)
}

/// Class operators for every label, sharing work across common prefixes.
fn all_class_operators(schedule: &EventSchedule) -> Result<Vec<Operator>> {
    let mut level: Vec<(Vec<usize>, Operator)> = schedule.events[0]
        .family
        .members()
        .iter()
        .enumerate()
        .map(|(a, p)| (vec![a], p.clone()))
        .collect();
    for k in 1..schedule.events.len() {
        let members = schedule.events[k].family.members();
        let mut next = Vec::with_capacity(level.len() * members.len());
        for (prefix, c) in &level {
            let evolved = &schedule.propagator(k - 1, prefix)? * c;
            for (a, p) in members.iter().enumerate() {
                let mut label = prefix.clone();
                label.push(a);
                next.push((label, p * &evolved));
            }
        }
        level = next;
    }
    Ok(level.into_iter().map(|(_, c)| c).collect())
}

/// Branch vectors `ψ_α = C_α ψ` of a pure initial state, in label order.
///
/// For `ρ = |ψ><ψ|` the functional is the Gram matrix
/// `D(α, α') = <ψ_α'|ψ_α>`; this avoids forming `d x d` class operators.
#[derive(Debug, Clone)]
pub struct PureBranches {
    labels: Vec<HistoryLabel>,
    vectors: Vec<DVector<C64>>,
}

pub fn pure_branches(schedule: &EventSchedule, psi: &StateVector) -> Result<PureBranches> {
    if psi.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch {
            expected: schedule.dim(),
            found: psi.dim(),
        });
    }
    let start = match (schedule.prepared_at, &schedule.propagation) {
        (Some(t0), Propagation::Hamiltonian(h)) => {
            matrix_exponential(h, schedule.events[0].time - t0, ExpMode::Propagator)?.apply(psi.amplitudes())
        }
        _ => psi.amplitudes().clone(),
    };
    let mut level: Vec<(Vec<usize>, DVector<C64>)> = schedule.events[0]
        .family
        .members()
        .iter()
        .enumerate()
        .map(|(a, p)| (vec![a], p.apply(&start)))
        .collect();
    for k in 1..schedule.events.len() {
        let members = schedule.events[k].family.members();
        let mut next = Vec::with_capacity(level.len() * members.len());
        for (prefix, v) in &level {
            let evolved = schedule.propagator(k - 1, prefix)?.apply(v);
            for (a, p) in members.iter().enumerate() {
                let mut label = prefix.clone();
                label.push(a);
                next.push((label, p.apply(&evolved)));
            }
        }
        level = next;
    }
    let (labels, vectors) = level.into_iter().map(|(l, v)| (HistoryLabel(l), v)).unzip();
    Ok(PureBranches { labels, vectors })
}

impl PureBranches {
    pub fn labels(&self) -> &[HistoryLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vector(&self, i: usize) -> &DVector<C64> {
        &self.vectors[i]
    }

    /// `D(i, j) = <ψ_j|ψ_i>`
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.vectors[j].dotc(&self.vectors[i])
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v.norm_squared()).collect()
    }

    /// Indices of histories with probability above `floor`.
    pub fn live(&self, floor: f64) -> Vec<usize> {
        self.probabilities()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > floor)
            .map(|(i, _)| i)
            .collect()
    }

    /// Upper bound on `max_{i≠j} |D(i, j)|`: exact over pairs of histories
    /// above `floor`, Cauchy-Schwarz `‖ψ_i‖‖ψ_j‖` for pairs involving one
    /// at or below it.
    pub fn max_off_diagonal_bound(&self, floor: f64) -> f64 {
        let norms: Vec<f64> = self.vectors.iter().map(|v| v.norm()).collect();
        let live = self.live(floor);
        let mut worst: f64 = 0.0;
        for (a, &i) in live.iter().enumerate() {
            for &j in &live[a + 1..] {
                worst = worst.max(self.entry(i, j).norm());
            }
        }
        let is_live = {
            let mut m = vec![false; norms.len()];
            for &i in &live {
                m[i] = true;
            }
            m
        };
        let top_live = live.iter().map(|&i| norms[i]).fold(0.0, f64::max);
        let mut dead: Vec<f64> = (0..norms.len()).filter(|&i| !is_live[i]).map(|i| norms[i]).collect();
        dead.sort_by(|a, b| b.total_cmp(a));
        if let Some(&d0) = dead.first() {
            worst = worst.max(top_live * d0);
            if let Some(&d1) = dead.get(1) {
                worst = worst.max(d0 * d1);
            }
        }
        worst
    }
}

/// `Σ_{ab} conj(y_ab) x_ab = tr(x y†)`
fn frobenius_inner(x: &DMatrix<C64>, y: &DMatrix<C64>) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b.conj()).sum()
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(DMatrix<C64>),
    /// `D(i, j) = tr(left_i · right_j†)`
    Streamed {
        left: Vec<DMatrix<C64>>,
        right: Vec<DMatrix<C64>>,
    },
}

/// Hermitian matrix `D(α, α')` over history labels.
#[derive(Debug, Clone)]
pub struct DecoherenceFunctional {
    labels: Vec<HistoryLabel>,
    storage: Storage,
    normalization: f64,
    floor: f64,
}

/// Value of a normalized off-diagonal ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Defined(f64),
    /// At least one of the two histories has probability below the floor.
    Pruned,
}

impl Ratio {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Defined(r) => Some(r),
            Self::Pruned => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstPair {
    pub first: HistoryLabel,
    pub second: HistoryLabel,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecoherenceVerdict {
    pub decoherent: bool,
    pub epsilon: f64,
    /// Largest defined ratio, if any pair is defined.
    pub worst: Option<WorstPair>,
    pub defined_pairs: usize,
    pub pruned_pairs: usize,
}

impl DecoherenceFunctional {
    fn build(labels: Vec<HistoryLabel>, left: Vec<DMatrix<C64>>, right: Vec<DMatrix<C64>>, normalization: f64) -> Self {
        let n = labels.len();
        let storage = if n <= DENSE_LABEL_LIMIT {
            let rows: Vec<Vec<C64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    (0..n)
                        .map(|j| frobenius_inner(&left[i], &right[j]) / normalization)
                        .collect()
                })
                .collect();
            let mut m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            // exact Hermiticity: average the two computed triangles
            for i in 0..n {
                m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
                for j in (i + 1)..n {
                    let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                    m[(i, j)] = v;
                    m[(j, i)] = v.conj();
                }
            }
            Storage::Dense(m)
        } else {
            Storage::Streamed { left, right }
        };
        Self {
            labels,
            storage,
            normalization,
            floor: DEFAULT_RATIO_FLOOR,
        }
    }

    /// Builds a functional directly from a dense matrix, e.g. one computed
    /// by a different route.
    pub fn from_matrix(labels: Vec<HistoryLabel>, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != labels.len() || matrix.ncols() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: matrix.nrows(),
            });
        }
        Ok(Self {
            labels,
            storage: Storage::Dense(matrix),
            normalization: 1.0,
            floor: DEFAULT_RATIO_FLOOR,
        })
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn labels(&self) -> &[HistoryLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &HistoryLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Normalization constant the raw traces were divided by
    /// (1, or `tr(ρ_f ρ_i)` for the time-symmetric functional).
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Streamed { left, right } => {
                frobenius_inner(&left[i], &right[j]) / self.normalization
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.entry(i, i).re).collect()
    }

    /// Materializes the full matrix (even past the dense limit).
    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Streamed { .. } => DMatrix::from_fn(self.len(), self.len(), |i, j| self.entry(i, j)),
        }
    }

    /// `p(α) = Re D(α, α)`, clamped at zero.
    pub fn probabilities(&self) -> Vec<(HistoryLabel, f64)> {
        self.labels
            .iter()
            .cloned()
            .zip(self.diagonal().into_iter().map(|p| p.max(0.0)))
            .collect()
    }

    pub fn diagonal_sum(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// `|D(i,j)|² / (D(i,i) D(j,j))`
    pub fn ratio(&self, i: usize, j: usize) -> Ratio {
        let (pi, pj) = (self.entry(i, i).re, self.entry(j, j).re);
        if pi < self.floor || pj < self.floor {
            return Ratio::Pruned;
        }
        Ratio::Defined(self.entry(i, j).norm_sqr() / (pi * pj))
    }

    /// Checks every off-diagonal pair against `epsilon`.
    pub fn is_decoherent(&self, epsilon: f64) -> DecoherenceVerdict {
        let n = self.len();
        let diag = self.diagonal();
        let live: Vec<usize> = (0..n).filter(|&i| diag[i] >= self.floor).collect();
        let dead = n - live.len();
        let pruned_pairs = dead * (dead.saturating_sub(1)) / 2 + dead * live.len();
        let mut worst: Option<(usize, usize, f64)> = None;
        let mut defined = 0;
        for (a, &i) in live.iter().enumerate() {
            for &j in &live[a + 1..] {
                defined += 1;
                let r = self.entry(i, j).norm_sqr() / (diag[i] * diag[j]);
                if worst.map_or(true, |(_, _, w)| r > w) {
                    worst = Some((i, j, r));
                }
            }
        }
        DecoherenceVerdict {
            decoherent: worst.map_or(true, |(_, _, r)| r <= epsilon),
            epsilon,
            worst: worst.map(|(i, j, r)| WorstPair {
                first: self.labels[i].clone(),
                second: self.labels[j].clone(),
                ratio: r,
            }),
            defined_pairs: defined,
            pruned_pairs,
        }
    }

    /// Largest off-diagonal modulus.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.len();
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(self.entry(i, j).norm());
            }
        }
        best
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.len();
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                best = best.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
        }
        best
    }
}

/// `D(α, α') = tr(C_α ρ_i C_α'†)`
pub fn decoherence_functional(schedule: &EventSchedule, rho_i: &DensityMatrix) -> Result<DecoherenceFunctional> {
    if rho_i.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch {
            expected: schedule.dim(),
            found: rho_i.dim(),
        });
    }
    let rho = schedule.prepare(rho_i.operator())?;
    let classes = all_class_operators(schedule)?;
    let left = classes.iter().map(|c| c.matrix() * rho.matrix()).collect();
    let right = classes.into_iter().map(Operator::into_matrix).collect();
    Ok(DecoherenceFunctional::build(schedule.labels(), left, right, 1.0))
}

/// `p(α) = D(α, α)` for every history.
pub fn history_probabilities(d: &DecoherenceFunctional) -> Vec<(HistoryLabel, f64)> {
    d.probabilities()
}

pub fn decoherence_ratio(d: &DecoherenceFunctional, a: &HistoryLabel, b: &HistoryLabel) -> Result<Ratio> {
    let i = d
        .index_of(a)
        .ok_or_else(|| Error::InvalidSchedule(format!("unknown label {a}")))?;
    let j = d
        .index_of(b)
        .ok_or_else(|| Error::InvalidSchedule(format!("unknown label {b}")))?;
    Ok(d.ratio(i, j))
}

/// Difference between the final-outcome probability with the intermediate
/// events summed out coherently and the sum of the history probabilities
/// ending in `outcome`.
///
/// The coherent side uses the operator `Σ_prefix C_{prefix, x}`, which for
/// complete projective families with prefix-independent propagators is
/// just `P_x U_total`.
pub fn sum_rule_violation(schedule: &EventSchedule, rho_i: &DensityMatrix, outcome: usize) -> Result<f64> {
    let last = schedule.events.last().expect("non-empty schedule");
    if outcome >= last.family.len() {
        return Err(Error::InvalidSchedule(format!(
            "final event has no outcome {outcome}"
        )));
    }
    if schedule.len() < 2 {
        return Ok(0.0);
    }
    if rho_i.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch {
            expected: schedule.dim(),
            found: rho_i.dim(),
        });
    }
    let rho = schedule.prepare(rho_i.operator())?;
    let labels = schedule.labels();
    let classes = all_class_operators(schedule)?;
    let mut coherent = Operator::zeros(schedule.dim());
    let mut separate = 0.0;
    for (label, c) in labels.iter().zip(&classes) {
        if label.last() == outcome {
            coherent = &coherent + c;
            separate += c.conjugate(&rho).trace().re;
        }
    }
    let together = coherent.conjugate(&rho).trace().re;
    Ok((together - separate).abs())
}

/// Initial and final conditions for the time-symmetric functional.
#[derive(Debug, Clone)]
pub struct Endpoints {
    pub initial: DensityMatrix,
    pub final_state: DensityMatrix,
    /// Time at which `final_state` applies (default: the last event time).
    pub final_time: Option<f64>,
}

/// `D(α, α') = tr(ρ_f C_α ρ_i C_α'†) / Z` with `Z = tr(ρ_f ρ_i)`.
///
/// The initial state is placed at the schedule's preparation time (see
/// [`EventSchedule::prepared_at`]) and the final state at
/// `endpoints.final_time`; both are carried to the first/last event with
/// the schedule's Hamiltonian.
pub fn time_symmetric_functional(schedule: &EventSchedule, endpoints: &Endpoints) -> Result<DecoherenceFunctional> {
    let d = schedule.dim();
    for rho in [&endpoints.initial, &endpoints.final_state] {
        if rho.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.dim(),
            });
        }
    }
    let z = (endpoints.initial.operator() * endpoints.final_state.operator()).trace().re;
    if z <= DEFAULT_RATIO_FLOOR {
        return Err(Error::OrthogonalEndpoints { overlap: z });
    }
    let rho_i = schedule.prepare(endpoints.initial.operator())?;
    let last_time = schedule.events.last().expect("non-empty").time;
    let rho_f = match endpoints.final_time {
        Some(tf) if tf != last_time => {
            if tf < last_time {
                return Err(Error::InvalidSchedule(format!(
                    "final time {tf} precedes the last event"
                )));
            }
            let h = schedule.hamiltonian().ok_or_else(|| {
                Error::InvalidSchedule("a final time needs Hamiltonian propagation".into())
            })?;
            // ρ_f at t_f seen from t_n: U(t_f - t_n)† ρ_f U(t_f - t_n)
            let u = matrix_exponential(h, tf - last_time, ExpMode::Propagator)?;
            u.adjoint().conjugate(endpoints.final_state.operator())
        }
        _ => endpoints.final_state.operator().clone(),
    };
    let classes = all_class_operators(schedule)?;
    let left = classes
        .iter()
        .map(|c| rho_f.matrix() * c.matrix() * rho_i.matrix())
        .collect();
    let right = classes.into_iter().map(Operator::into_matrix).collect();
    Ok(DecoherenceFunctional::build(schedule.labels(), left, right, z))
}

/// `D(α, α') = <φ|C_α|ψ><ψ|C_α'†|φ>` for pure initial and final states.
pub fn pure_endpoint_functional(schedule: &EventSchedule, psi: &StateVector, phi: &StateVector) -> Result<DecoherenceFunctional> {
    for v in [psi, phi] {
        if v.dim() != schedule.dim() {
            return Err(Error::DimensionMismatch {
                expected: schedule.dim(),
                found: v.dim(),
            });
        }
    }
    let rho = schedule.prepare(&psi.projector())?;
    let classes = all_class_operators(schedule)?;
    let rho_f = phi.projector();
    let left = classes
        .iter()
        .map(|c| rho_f.matrix() * c.matrix() * rho.matrix())
        .collect();
    let right = classes.into_iter().map(Operator::into_matrix).collect();
    Ok(DecoherenceFunctional::build(schedule.labels(), left, right, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRatio {
    pub first: HistoryLabel,
    pub second: HistoryLabel,
    pub ratio: f64,
}

/// Every defined pairwise ratio of a pure-endpoint functional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PureEndpointReport {
    pub pairs: Vec<PairRatio>,
    pub live_histories: usize,
    /// `max |ratio - 1|` over defined pairs (0 when there are none).
    pub max_deviation_from_unity: f64,
    pub decoherent: bool,
}

/// Pairwise ratios for pure initial and final states: 1 for every pair of
/// histories with nonzero amplitude.
pub fn pure_endpoint_ratio(schedule: &EventSchedule, psi: &StateVector, phi: &StateVector) -> Result<PureEndpointReport> {
    let d = pure_endpoint_functional(schedule, psi, phi)?;
    let diag = d.diagonal();
    let live: Vec<usize> = (0..d.len()).filter(|&i| diag[i] >= d.floor()).collect();
    let mut pairs = Vec::new();
    for (a, &i) in live.iter().enumerate() {
        for &j in &live[a + 1..] {
            if let Ratio::Defined(r) = d.ratio(i, j) {
                pairs.push(PairRatio {
                    first: d.labels()[i].clone(),
                    second: d.labels()[j].clone(),
                    ratio: r,
                });
            }
        }
    }
    let max_dev = pairs.iter().map(|p| (p.ratio - 1.0).abs()).fold(0.0, f64::max);
    Ok(PureEndpointReport {
        decoherent: pairs.is_empty(),
        live_histories: live.len(),
        max_deviation_from_unity: max_dev,
        pairs,
    })
}

/// Sum of `D` over blocks of labels, used for coarse-graining checks.
pub fn block_sum(d: &DecoherenceFunctional, rows: &[usize], cols: &[usize]) -> C64 {
    let mut acc = ZERO;
    for &i in rows {
        for &j in cols {
            acc += d.entry(i, j);
        }
    }
    acc
}
