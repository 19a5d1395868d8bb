//! Histories of an open system whose events are spaced by Lindblad evolution.
//!
//! The initial state is prepared one spacing before the first event, so
//! every event sees a state that has relaxed for time `s`. Two routes give
//! the functional:
//!
//! * channel composition: `D(α,α') = tr(P_n E(… E(P_1 E(ρ) P_1') …) P_n')`;
//! * dilation: each interval becomes a unitary on system ⊗ its own fresh
//!   environment block, and the closed-system functional is applied on the
//!   enlarged space with projectors `P ⊗ I`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::histories::{
    decoherence_functional, DecoherenceFunctional, EventSchedule, HistoryLabel, MeasurementFamily,
    DEFAULT_RATIO_FLOOR,
};
use crate::openquantum::dilation::stinespring_unitary;
use crate::openquantum::model::{null_space_dimension, spectral_gap, stationary_state, ChannelMap, LindbladModel};
use crate::qops::{tensor_product, DensityMatrix, Operator, ProjectorFamily, StateVector, C64};

/// Largest enlarged-space dimension for which the dilated route is built.
pub const DILATION_DIM_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationRoute {
    Dilation,
    ChannelComposition,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxationReport {
    pub spacing: f64,
    pub relaxation_time: f64,
    pub spacing_over_tau: f64,
    /// `exp(-s/τ)`
    pub gap_bound: f64,
    pub max_ratio: f64,
    pub worst_pair: Option<(String, String)>,
    /// `max |Σ p(α | α_k = a) - tr(P_a ρ₀)|` over events and outcomes.
    pub marginal_deviation: f64,
    pub route: RelaxationRoute,
    /// `max |D_dilated - D_channel|` when both routes were built.
    pub route_agreement: Option<f64>,
    pub stationary: Vec<f64>,
}

fn check_unique_fixed_point(model: &LindbladModel) -> Result<()> {
    let (null, _) = null_space_dimension(&model.superoperator());
    if null != 1 {
        return Err(Error::DegenerateFixedPoint { null_dimension: null });
    }
    Ok(())
}

fn labels_of(families: &[ProjectorFamily]) -> Vec<HistoryLabel> {
    let mut out = vec![Vec::new()];
    for f in families {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..f.len()).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(HistoryLabel).collect()
}

/// Functional from composing the interval channel between events.
pub fn channel_composition_functional(
    map: &ChannelMap,
    families: &[ProjectorFamily],
    initial: &DensityMatrix,
) -> Result<DecoherenceFunctional> {
    let labels = labels_of(families);
    let prepared = map.apply(initial.operator());
    let n = labels.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (a, b) = (labels[i].outcomes(), labels[j].outcomes());
            let mut x = prepared.clone();
            for (k, fam) in families.iter().enumerate() {
                if k > 0 {
                    x = map.apply(&x);
                }
                let p = &fam.members()[a[k]];
                let q = &fam.members()[b[k]];
                x = &(p * &x) * q;
            }
            let v = x.trace();
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    DecoherenceFunctional::from_matrix(labels, m)
}

/// Embeds an operator on `S ⊗ E_block` into `S ⊗ E_0 ⊗ … ⊗ E_last`.
fn embed(op: &Operator, d: usize, env: &[usize], block: usize) -> Operator {
    let r_all: usize = env.iter().product();
    let rb = env[block];
    let stride: usize = env[block + 1..].iter().product();
    let n = d * r_all;
    let mut m = DMatrix::<C64>::zeros(n, n);
    for col in 0..n {
        let (s, e) = (col / r_all, col % r_all);
        let eb = (e / stride) % rb;
        let rest = e - eb * stride;
        for s2 in 0..d {
            for eb2 in 0..rb {
                let v = op.get(s2 * rb + eb2, s * rb + eb);
                if v != C64::new(0.0, 0.0) {
                    m[(s2 * r_all + rest + eb2 * stride, col)] = v;
                }
            }
        }
    }
    Operator::from_matrix(m)
}

/// Functional on the enlarged space built from the Stinespring unitaries.
pub fn dilated_functional(
    map: &ChannelMap,
    families: &[ProjectorFamily],
    initial: &DensityMatrix,
) -> Result<DecoherenceFunctional> {
    let d = initial.dim();
    let kraus = map.kraus()?;
    let r = kraus.len();
    let coupling = stinespring_unitary(&kraus)?;
    let env = vec![r; families.len()];
    let r_all: usize = env.iter().product();
    let env_identity = Operator::identity(r_all);
    let big_families = families
        .iter()
        .map(|f| {
            ProjectorFamily::new(f.members().iter().map(|p| tensor_product(p, &env_identity)).collect())
                .map(MeasurementFamily::from)
        })
        .collect::<Result<Vec<_>>>()?;
    let unitaries = (1..families.len()).map(|k| embed(&coupling, d, &env, k)).collect();
    let schedule = EventSchedule::with_unitaries(big_families, unitaries)?;
    let vacuum = StateVector::basis(r_all, 0)?.projector();
    let joint = embed(&coupling, d, &env, 0).conjugate(&tensor_product(initial.operator(), &vacuum));
    let prepared = DensityMatrix::with_tolerance(joint.hermitian_part(), 1e-8)?;
    decoherence_functional(&schedule, &prepared)
}

/// Runs the history experiment with events spaced by `spacing`.
pub fn relaxation_decoherence_experiment(
    model: &LindbladModel,
    families: &[ProjectorFamily],
    spacing: f64,
    initial: &DensityMatrix,
) -> Result<RelaxationReport> {
    if families.is_empty() {
        return Err(Error::InvalidSchedule("need at least one event".into()));
    }
    for f in families {
        if f.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: f.dim(),
            });
        }
    }
    if !(spacing >= 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidParameter(format!("spacing must be >= 0, got {spacing}")));
    }
    check_unique_fixed_point(model)?;
    let rho0 = stationary_state(model)?;
    let tau = 1.0 / spectral_gap(model)?;
    let map = if spacing == 0.0 {
        ChannelMap::identity(model.dim())
    } else {
        ChannelMap::from_model(model, spacing)?
    };

    let composed = channel_composition_functional(&map, families, initial)?;
    let rank = map.kraus()?.len();
    let big = (model.dim() as u128).saturating_mul((rank as u128).saturating_pow(families.len() as u32));
    let (functional, route, route_agreement) = if big <= DILATION_DIM_LIMIT as u128 {
        let dilated = dilated_functional(&map, families, initial)?;
        let mut worst: f64 = 0.0;
        for i in 0..dilated.len() {
            for j in 0..dilated.len() {
                worst = worst.max((dilated.entry(i, j) - composed.entry(i, j)).norm());
            }
        }
        (dilated, RelaxationRoute::Dilation, Some(worst))
    } else {
        (composed, RelaxationRoute::ChannelComposition, None)
    };

    let functional = functional.with_floor(DEFAULT_RATIO_FLOOR);
    let verdict = functional.is_decoherent(0.0);
    let probs = functional.diagonal();
    let labels = functional.labels();
    let mut marginal_deviation: f64 = 0.0;
    for (k, fam) in families.iter().enumerate() {
        for (a, p) in fam.members().iter().enumerate() {
            let marginal: f64 = labels
                .iter()
                .zip(&probs)
                .filter(|(l, _)| l.outcomes()[k] == a)
                .map(|(_, &w)| w)
                .sum();
            marginal_deviation = marginal_deviation.max((marginal - rho0.expectation(p).re).abs());
        }
    }
    Ok(RelaxationReport {
        spacing,
        relaxation_time: tau,
        spacing_over_tau: spacing / tau,
        gap_bound: (-spacing / tau).exp(),
        max_ratio: verdict.worst.as_ref().map_or(0.0, |w| w.ratio),
        worst_pair: verdict
            .worst
            .as_ref()
            .map(|w| (w.first.to_string(), w.second.to_string())),
        marginal_deviation,
        route,
        route_agreement,
        stationary: (0..rho0.dim()).map(|i| rho0.operator().get(i, i).re).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::openquantum::{qubit_damping_model, thermal_oscillator_model};
    use crate::qops::{ONE, ZERO};

    fn tilted_family(theta: f64) -> ProjectorFamily {
        let (c, s) = (theta.cos(), theta.sin());
        let a = StateVector::new(nalgebra::DVector::from_vec(vec![C64::new(c, 0.0), C64::new(0.0, s)])).unwrap();
        let b = StateVector::new(nalgebra::DVector::from_vec(vec![C64::new(0.0, s), C64::new(c, 0.0)])).unwrap();
        ProjectorFamily::new(vec![a.projector(), b.projector()]).unwrap()
    }

    #[test]
    fn long_spacing_decoheres_and_matches_stationary_marginals() {
        let model = qubit_damping_model(1.0).unwrap();
        let fams = vec![tilted_family(0.4), tilted_family(1.1)];
        let init = DensityMatrix::from_populations(&[0.3, 0.7]).unwrap();
        let probe = relaxation_decoherence_experiment(&model, &fams, 1.0, &init).unwrap();
        assert!((probe.relaxation_time - 2.0).abs() < 1e-8);
        let r = relaxation_decoherence_experiment(&model, &fams, 20.0 * probe.relaxation_time, &init).unwrap();
        assert!(r.max_ratio <= 1e-3, "{}", r.max_ratio);
        assert!(r.marginal_deviation <= 1e-6);
        assert_eq!(r.route, RelaxationRoute::Dilation);
        assert!(r.route_agreement.unwrap() < 1e-10);
        assert!(probe.max_ratio > r.max_ratio);
    }

    #[test]
    fn zero_spacing_repeat_is_deterministic() {
        let model = qubit_damping_model(1.0).unwrap();
        let f = tilted_family(0.3);
        let init = DensityMatrix::from_populations(&[0.5, 0.5]).unwrap();
        let r = relaxation_decoherence_experiment(&model, &[f.clone(), f], 0.0, &init).unwrap();
        assert!(r.max_ratio < 1e-24, "{r:?}");
    }

    #[test]
    fn routes_agree_on_three_events() {
        let model = thermal_oscillator_model(2, 1.0, 1.0, 0.5).unwrap();
        let fams = vec![tilted_family(0.2), tilted_family(0.9), tilted_family(1.3)];
        let init = DensityMatrix::from_populations(&[0.9, 0.1]).unwrap();
        let map = ChannelMap::from_model(&model, 0.7).unwrap();
        let a = dilated_functional(&map, &fams, &init).unwrap();
        let b = channel_composition_functional(&map, &fams, &init).unwrap();
        assert!((a.to_dense() - b.to_dense()).camax() < 1e-10);
        assert!((b.diagonal_sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_fixed_point_is_rejected() {
        let h = Operator::from_rows(2, &[ZERO, ZERO, ZERO, ONE]).unwrap();
        let model = LindbladModel::new(h, vec![]).unwrap();
        let f = ProjectorFamily::computational(2);
        let init = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            relaxation_decoherence_experiment(&model, &[f], 1.0, &init),
            Err(Error::DegenerateFixedPoint { .. })
        ));
    }
}
