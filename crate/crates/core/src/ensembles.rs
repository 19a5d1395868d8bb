//! Typical coarse-grained histories of a closed system with randomly
//! oriented projector families.
//!
//! Between events the state is left unchanged: for Haar-distributed
//! families any fixed unitary is absorbed into the next family.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::histories::DEFAULT_RATIO_FLOOR;
use crate::qops::{Operator, ProjectorFamily, StateVector, C64};
use crate::rng::stream;

/// Default median-ratio threshold for [`information_capacity_check`].
pub const CAPACITY_THRESHOLD: f64 = 0.1;

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary(d: usize, rng: &mut ChaCha8Rng) -> Operator {
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let x = r[(j, j)];
        let phase = if x.norm() > 0.0 { x / x.norm() } else { C64::new(1.0, 0.0) };
        let col = q.column(j) * phase;
        q.set_column(j, &col);
    }
    Operator::from_matrix(q)
}

/// Haar-random unit vector.
pub fn haar_state(d: usize, rng: &mut ChaCha8Rng) -> StateVector {
    StateVector::normalized(DVector::from_fn(d, |_, _| gaussian(rng))).expect("Gaussian vector is nonzero")
}

/// Projectors onto consecutive column blocks of a Haar unitary, with block
/// sizes `ranks`.
pub fn sample_random_family(d: usize, ranks: &[usize], rng: &mut ChaCha8Rng) -> Result<ProjectorFamily> {
    check_partition(d, ranks)?;
    ProjectorFamily::from_unitary_blocks(&haar_unitary(d, rng), ranks)
}

fn check_partition(d: usize, ranks: &[usize]) -> Result<()> {
    if ranks.is_empty() || ranks.contains(&0) || ranks.iter().sum::<usize>() != d {
        return Err(Error::InvalidFamily(format!("ranks {ranks:?} do not partition {d}")));
    }
    Ok(())
}

/// Sample mean and variance of `tr(P ρ)` for a Haar rank-`r` projector and
/// the fixed pure state `|0>`.
pub fn projector_overlap_moments(d: usize, r: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if r == 0 || r > d || samples < 2 {
        return Err(Error::InvalidParameter("need 0 < r <= d and at least two samples".into()));
    }
    let xs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let fam = sample_random_family(d, &[r, d - r].into_iter().filter(|&x| x > 0).collect::<Vec<_>>(), &mut rng)
                .expect("valid partition");
            fam.members()[0].get(0, 0).re
        })
        .collect();
    let n = samples as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomScheduleSpec {
    pub dim: usize,
    /// Rank partition of the family at each event.
    pub ranks: Vec<Vec<usize>>,
    pub samples: usize,
    pub seed: u64,
}

impl RandomScheduleSpec {
    pub fn new(dim: usize, ranks: Vec<Vec<usize>>, samples: usize, seed: u64) -> Result<Self> {
        if ranks.len() < 2 {
            return Err(Error::InvalidParameter("need at least two events".into()));
        }
        for r in &ranks {
            check_partition(dim, r)?;
        }
        if samples == 0 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        Ok(Self {
            dim,
            ranks,
            samples,
            seed,
        })
    }

    /// `events` events, each split into blocks of rank `rank`.
    pub fn uniform(dim: usize, events: usize, rank: usize, samples: usize, seed: u64) -> Result<Self> {
        if rank == 0 || dim % rank != 0 {
            return Err(Error::InvalidFamily(format!("rank {rank} does not divide {dim}")));
        }
        Self::new(dim, vec![vec![rank; dim / rank]; events], samples, seed)
    }

    pub fn label_count(&self) -> usize {
        self.ranks.iter().map(Vec::len).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Fresh Haar-random pure state per sample.
    Random,
    /// `|0>`
    Ground,
    /// Real amplitudes `√(e^{-β l}/Z)` over levels `l`, `β = 4/d`.
    Thermal,
}

impl InitialState {
    fn state(self, d: usize, rng: &mut ChaCha8Rng) -> StateVector {
        match self {
            Self::Random => haar_state(d, rng),
            Self::Ground => StateVector::basis(d, 0).expect("d >= 1"),
            Self::Thermal => {
                let beta = 4.0 / d as f64;
                let w: Vec<f64> = (0..d).map(|l| (-beta * l as f64).exp()).collect();
                let z: f64 = w.iter().sum();
                StateVector::normalized(DVector::from_fn(d, |l, _| C64::new((w[l] / z).sqrt(), 0.0)))
                    .expect("positive weights")
            }
        }
    }
}

/// One off-diagonal pair of histories with the same final outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSample {
    pub sample: usize,
    pub first: usize,
    pub second: usize,
    pub p: f64,
    pub p_prime: f64,
    /// `|D|² / (p p')`
    pub ratio: f64,
}

impl PairSample {
    /// `ratio · d · p · p'`
    pub fn scaled(&self, d: usize) -> f64 {
        self.ratio * d as f64 * self.p * self.p_prime
    }
}

/// History branch vectors `P_{α_n} ⋯ P_{α_1} ψ` in lexicographic label order.
pub fn branch_vectors(families: &[ProjectorFamily], psi: &StateVector) -> Vec<DVector<C64>> {
    let mut branches = vec![psi.amplitudes().clone()];
    for f in families {
        branches = branches
            .iter()
            .flat_map(|v| f.members().iter().map(move |p| p.matrix() * v))
            .collect();
    }
    branches
}

/// Pairs of distinct histories ending in the same outcome whose
/// probabilities both exceed `floor`. Pairs with different final outcomes
/// have `D = 0` identically and are not listed.
pub fn history_pairs(families: &[ProjectorFamily], psi: &StateVector, floor: f64, sample: usize) -> Vec<PairSample> {
    let last = families.last().map_or(1, ProjectorFamily::len);
    let branches = branch_vectors(families, psi);
    let probs: Vec<f64> = branches.iter().map(|v| v.norm_squared()).collect();
    let mut out = Vec::new();
    for i in 0..branches.len() {
        if probs[i] <= floor {
            continue;
        }
        for j in (i + 1..branches.len()).filter(|j| j % last == i % last) {
            if probs[j] <= floor {
                continue;
            }
            let d = branches[j].dotc(&branches[i]);
            out.push(PairSample {
                sample,
                first: i,
                second: j,
                p: probs[i],
                p_prime: probs[j],
                ratio: d.norm_sqr() / (probs[i] * probs[j]),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub p10: f64,
    pub median: f64,
    pub p90: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p10: quantile(&v, 0.1),
            median: quantile(&v, 0.5),
            p90: quantile(&v, 0.9),
        })
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let x = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (x.floor() as usize, x.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (x - lo as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct TypicalRatioReport {
    pub spec: RandomScheduleSpec,
    pub initial: InitialState,
    pub pairs: usize,
    /// `ratio · d · p · p'`
    pub scaled_ratio: Option<Summary>,
    /// `ratio · d`, i.e. `d |<ψ(α')|ψ(α)>|²` for normalized branches
    pub overlap_statistic: Option<Summary>,
    pub ratio: Option<Summary>,
    /// `√(p p')` over the same pairs
    pub pair_probability: Option<Summary>,
    #[serde(skip)]
    pub rows: Vec<PairSample>,
}

fn sample_pairs(spec: &RandomScheduleSpec, initial: InitialState) -> Result<Vec<PairSample>> {
    let per_sample: Vec<Result<Vec<PairSample>>> = (0..spec.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(spec.seed, k as u64);
            let families = spec
                .ranks
                .iter()
                .map(|r| sample_random_family(spec.dim, r, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let psi = initial.state(spec.dim, &mut rng);
            Ok(history_pairs(&families, &psi, DEFAULT_RATIO_FLOOR, k))
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_sample {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Ratio statistics over `spec.samples` random schedules.
pub fn typical_ratio_experiment(spec: &RandomScheduleSpec, initial: InitialState) -> Result<TypicalRatioReport> {
    let rows = sample_pairs(spec, initial)?;
    let d = spec.dim as f64;
    let col = |f: &dyn Fn(&PairSample) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Ok(TypicalRatioReport {
        spec: spec.clone(),
        initial,
        pairs: rows.len(),
        scaled_ratio: Summary::of(&col(&|r| r.scaled(spec.dim))),
        overlap_statistic: Summary::of(&col(&|r| r.ratio * d)),
        ratio: Summary::of(&col(&|r| r.ratio)),
        pair_probability: Summary::of(&col(&|r| (r.p * r.p_prime).sqrt())),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinenessPoint {
    pub rank: usize,
    /// `rank / d`, the typical single-event probability
    pub event_probability: f64,
    pub median_ratio: Option<f64>,
    /// median `√(p p')` over the pairs
    pub median_history_probability: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub dim: usize,
    pub events: usize,
    pub threshold: f64,
    pub points: Vec<FinenessPoint>,
    /// History probability at which the median ratio reaches the threshold.
    pub crossing_probability: Option<f64>,
    /// Single-event probability at the same crossing.
    pub crossing_event_probability: Option<f64>,
    /// `d^{-1/2}`
    pub prediction: f64,
    /// `max(x/pred, pred/x)` for the history-probability crossing.
    pub crossing_factor: Option<f64>,
}

/// Refines uniformly ranked families from coarse to fine and locates where
/// the median ratio first reaches `threshold`.
pub fn information_capacity_check(
    dim: usize,
    events: usize,
    ranks: &[usize],
    samples: usize,
    seed: u64,
    threshold: f64,
) -> Result<CapacityReport> {
    let mut ranks = ranks.to_vec();
    ranks.sort_unstable_by(|a, b| b.cmp(a));
    let mut points = Vec::with_capacity(ranks.len());
    for &r in &ranks {
        let spec = RandomScheduleSpec::uniform(dim, events, r, samples, seed)?;
        let rep = typical_ratio_experiment(&spec, InitialState::Random)?;
        points.push(FinenessPoint {
            rank: r,
            event_probability: r as f64 / dim as f64,
            median_ratio: rep.ratio.map(|s| s.median),
            median_history_probability: rep.pair_probability.map(|s| s.median),
        });
    }
    let mut crossing = None;
    for w in points.windows(2) {
        if let (Some(r0), Some(r1), Some(p0), Some(p1)) = (
            w[0].median_ratio,
            w[1].median_ratio,
            w[0].median_history_probability,
            w[1].median_history_probability,
        ) {
            if r0 < threshold && r1 >= threshold {
                // interpolate log p against log ratio
                let t = (threshold.ln() - r0.ln()) / (r1.ln() - r0.ln());
                let lerp = |a: f64, b: f64| (a.ln() + t * (b.ln() - a.ln())).exp();
                crossing = Some((lerp(p0, p1), lerp(w[0].event_probability, w[1].event_probability)));
                break;
            }
        }
    }
    let prediction = 1.0 / (dim as f64).sqrt();
    Ok(CapacityReport {
        dim,
        events,
        threshold,
        points,
        crossing_probability: crossing.map(|c| c.0),
        crossing_event_probability: crossing.map(|c| c.1),
        prediction,
        crossing_factor: crossing.map(|c| (c.0 / prediction).max(prediction / c.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::{decoherence_functional, EventSchedule, MeasurementFamily};

    #[test]
    fn haar_unitary_is_unitary_and_reproducible() {
        let a = haar_unitary(6, &mut stream(1, 0));
        let b = haar_unitary(6, &mut stream(1, 0));
        assert!(a.is_unitary(1e-10));
        assert_eq!(a, b);
    }

    #[test]
    fn family_shapes() {
        let mut rng = stream(3, 0);
        let whole = sample_random_family(5, &[5], &mut rng).unwrap();
        assert!(whole.members()[0].distance(&Operator::identity(5)) < 1e-10);
        let fine = sample_random_family(5, &[1; 5], &mut rng).unwrap();
        assert_eq!(fine.len(), 5);
        for p in fine.members() {
            assert!((p.trace().re - 1.0).abs() < 1e-10);
        }
        assert!(sample_random_family(5, &[2, 2], &mut rng).is_err());
        assert!(sample_random_family(5, &[5, 0], &mut rng).is_err());
    }

    #[test]
    fn beta_marginal_matches_gaussian_ratio_sampler() {
        let (d, r, n) = (8, 3, 4000);
        let (mean, var) = projector_overlap_moments(d, r, n, 11).unwrap();
        // oracle: tr(Pρ) ~ Σ_{i<r}|g_i|² / Σ_i |g_i|² for complex Gaussians
        let mut rng = stream(99, 0);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let g: Vec<f64> = (0..d).map(|_| gaussian(&mut rng).norm_sqr()).collect();
                g[..r].iter().sum::<f64>() / g.iter().sum::<f64>()
            })
            .collect();
        let om = xs.iter().sum::<f64>() / n as f64;
        let ov = xs.iter().map(|x| (x - om) * (x - om)).sum::<f64>() / (n - 1) as f64;
        let se = (ov / n as f64).sqrt();
        assert!((mean - om).abs() < 5.0 * se * std::f64::consts::SQRT_2, "{mean} vs {om}");
        assert!((var - ov).abs() < 0.15 * ov, "{var} vs {ov}");
        // closed form for reference: r/d and r(d-r)/(d²(d+1))
        assert!((om - 3.0 / 8.0).abs() < 5.0 * se);
    }

    #[test]
    fn pair_ratios_agree_with_brute_force_functional() {
        let mut rng = stream(5, 0);
        let d = 6;
        let fams: Vec<ProjectorFamily> = (0..2).map(|_| sample_random_family(d, &[3, 2, 1], &mut rng).unwrap()).collect();
        let psi = haar_state(d, &mut rng);
        let schedule = EventSchedule::with_unitaries(
            fams.iter().cloned().map(MeasurementFamily::from).collect(),
            vec![Operator::identity(d)],
        )
        .unwrap();
        let dfun = decoherence_functional(&schedule, &psi.density()).unwrap();
        let pairs = history_pairs(&fams, &psi, 0.0, 0);
        assert_eq!(pairs.len(), 3 * 3);
        for pr in &pairs {
            let r = dfun.ratio(pr.first, pr.second).value().unwrap();
            assert!((r - pr.ratio).abs() < 1e-10 * r.max(1e-3));
            assert!((dfun.diagonal()[pr.first] - pr.p).abs() < 1e-12);
        }
        // pairs ending differently vanish identically
        assert!(dfun.entry(0, 1).norm() < 1e-12);
    }

    #[test]
    fn energy_basis_histories_do_not_interfere() {
        let d = 4;
        let fams = vec![ProjectorFamily::computational(d), ProjectorFamily::computational(d)];
        let psi = haar_state(d, &mut stream(8, 0));
        assert!(history_pairs(&fams, &psi, 1e-12, 0).is_empty());
    }

    #[test]
    fn small_dimension_run_is_reproducible() {
        let spec = RandomScheduleSpec::uniform(2, 2, 1, 50, 4).unwrap();
        let a = typical_ratio_experiment(&spec, InitialState::Random).unwrap();
        let b = typical_ratio_experiment(&spec, InitialState::Random).unwrap();
        assert_eq!(a.rows, b.rows);
        assert!(a.pairs > 0);
        assert!(RandomScheduleSpec::uniform(4, 1, 2, 5, 0).is_err());
    }

    #[test]
    fn trivial_schedule_never_coheres() {
        let rep = information_capacity_check(4, 2, &[4], 5, 1, CAPACITY_THRESHOLD).unwrap();
        assert_eq!(rep.points[0].median_ratio, None);
        assert_eq!(rep.crossing_probability, None);
    }
}
