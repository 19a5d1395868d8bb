//! Realizing the jump step and Lindblad intervals as projective measurements
//! and unitaries on an enlarged space.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::qops::{
    complete_to_unitary, hermitian_eigen, hermitian_sqrt, partial_trace, tensor_product, DensityMatrix, Operator,
    StateVector, Traced, C64,
};

/// Two-outcome measurement `{M_0 = I - γΔt A², M_1 = γΔt A²}` with optional
/// feedback unitary on outcome 1, realized on system ⊗ qubit ancilla.
///
/// The ancilla starts in `|0>`; the coupling `W` maps
/// `|ψ,0> ↦ √M_0|ψ>|0> + U√M_1|ψ>|1>`. Reading the ancilla with
/// `I ⊗ |k><k|` after `W` yields outcome `k`; equivalently the projectors
/// `W†(I ⊗ |k><k|)W` act on the undisturbed `ρ ⊗ σ`.
#[derive(Debug, Clone)]
pub struct ProjectiveDilation {
    dim: usize,
    ancilla: DensityMatrix,
    coupling: Operator,
    pointer: [Operator; 2],
    projectors: [Operator; 2],
}

const ANCILLA: usize = 2;

/// Builds the dilation of the jump step for positive `a`, weight `γΔt` and
/// feedback `u` (identity when `None`).
pub fn dilate_to_projection(a: &Operator, weight: f64, feedback: Option<&Operator>) -> Result<ProjectiveDilation> {
    if !a.is_hermitian(1e-10) {
        return Err(Error::NotHermitian(a.hermiticity_defect()));
    }
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(Error::InvalidParameter(format!("weight must be >= 0, got {weight}")));
    }
    let d = a.dim();
    let m1 = (a * a).scale_real(weight);
    let m0 = &Operator::identity(d) - &m1;
    let lo = hermitian_eigen(&m0).values[0].min(hermitian_eigen(&m1).values[0]);
    if lo < -1e-12 {
        return Err(Error::StepTooLarge { min_eigenvalue: lo });
    }
    let k0 = hermitian_sqrt(&m0)?;
    let mut k1 = hermitian_sqrt(&m1)?;
    if let Some(u) = feedback {
        a.check_dim(u)?;
        if !u.is_unitary(1e-10) {
            return Err(Error::InvalidParameter("feedback must be unitary".into()));
        }
        k1 = u * &k1;
    }
    let n = d * ANCILLA;
    let columns: Vec<(usize, DVector<C64>)> = (0..d)
        .map(|i| {
            let mut v = DVector::zeros(n);
            for s in 0..d {
                v[s * ANCILLA] = k0.get(s, i);
                v[s * ANCILLA + 1] = k1.get(s, i);
            }
            (i * ANCILLA, v)
        })
        .collect();
    let coupling = complete_to_unitary(n, &columns)?;
    let pointer = [0, 1].map(|k| {
        tensor_product(
            &Operator::identity(d),
            &StateVector::basis(ANCILLA, k).expect("qubit ancilla").projector(),
        )
    });
    let projectors = pointer.clone().map(|p| &(&coupling.adjoint() * &p) * &coupling);
    Ok(ProjectiveDilation {
        dim: d,
        ancilla: StateVector::basis(ANCILLA, 0).expect("qubit ancilla").density(),
        coupling,
        pointer,
        projectors,
    })
}

impl ProjectiveDilation {
    pub fn system_dim(&self) -> usize {
        self.dim
    }

    /// Ancilla state `σ = |0><0|`.
    pub fn ancilla(&self) -> &DensityMatrix {
        &self.ancilla
    }

    pub fn coupling(&self) -> &Operator {
        &self.coupling
    }

    /// `P_k = W†(I ⊗ |k><k|)W`; these sum to the identity.
    pub fn projectors(&self) -> &[Operator; 2] {
        &self.projectors
    }

    fn joint(&self, rho: &DensityMatrix) -> Result<Operator> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        Ok(tensor_product(rho.operator(), self.ancilla.operator()))
    }

    /// Outcome probabilities `tr(P_k (ρ ⊗ σ))`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<[f64; 2]> {
        let joint = self.joint(rho)?;
        Ok(self.projectors.clone().map(|p| (&p * &joint).trace().re))
    }

    /// Unnormalized system state after outcome `k`:
    /// `tr_anc((I ⊗ |k><k|) W (ρ ⊗ σ) W† (I ⊗ |k><k|))`.
    pub fn branch(&self, rho: &DensityMatrix, k: usize) -> Result<Operator> {
        if k >= ANCILLA {
            return Err(Error::InvalidParameter(format!("outcome {k} out of range")));
        }
        let joint = self.coupling.conjugate(&self.joint(rho)?);
        partial_trace(&self.pointer[k].conjugate(&joint), (self.dim, ANCILLA), Traced::Second)
    }

    /// Normalized post-measurement state, `None` if the outcome has zero weight.
    pub fn post_state(&self, rho: &DensityMatrix, k: usize) -> Result<Option<DensityMatrix>> {
        let b = self.branch(rho, k)?;
        let p = b.trace().re;
        if p <= 1e-15 {
            return Ok(None);
        }
        Ok(Some(DensityMatrix::from_operator_unchecked(b.scale_real(1.0 / p).hermitian_part())))
    }
}

/// Unitary on system ⊗ environment whose action on `|ψ>|0>` is
/// `Σ_m K_m|ψ>|m>`, for a complete Kraus family `{K_m}`.
pub fn stinespring_unitary(kraus: &[Operator]) -> Result<Operator> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::InvalidFamily("empty Kraus family".into()))?;
    let d = first.dim();
    let r = kraus.len();
    for k in kraus {
        first.check_dim(k)?;
    }
    let n = d * r;
    let columns: Vec<(usize, DVector<C64>)> = (0..d)
        .map(|i| {
            let mut v = DVector::zeros(n);
            for (m, k) in kraus.iter().enumerate() {
                for s in 0..d {
                    v[s * r + m] = k.get(s, i);
                }
            }
            (i * r, v)
        })
        .collect();
    complete_to_unitary(n, &columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::openquantum::{qubit_damping_model, ChannelMap};
    use crate::qops::{polar_decompose, ONE, ZERO};

    #[test]
    fn full_weight_identity_moves_ancilla() {
        let dil = dilate_to_projection(&Operator::identity(2), 1.0, None).unwrap();
        let [p0, p1] = dil.projectors().clone();
        assert!((&p0 + &p1).distance(&Operator::identity(4)) < 1e-12);
        let rho = DensityMatrix::from_populations(&[0.3, 0.7]).unwrap();
        let pr = dil.probabilities(&rho).unwrap();
        assert!((pr[1] - 1.0).abs() < 1e-12 && pr[0].abs() < 1e-12);
        // P_1 acts as identity on the system and as a rank-one ancilla projector
        let anc = partial_trace(&p1, (2, 2), Traced::First).unwrap().scale_real(0.5);
        assert!((anc.trace().re - 1.0).abs() < 1e-12);
        assert!((&(&anc * &anc) - &anc).max_abs() < 1e-12);
        assert!(p1.distance(&tensor_product(&Operator::identity(2), &anc)) < 1e-12);
    }

    #[test]
    fn zero_weight_never_fires() {
        let a = Operator::from_real_diagonal(&[0.0, 1.0]);
        let dil = dilate_to_projection(&a, 0.0, None).unwrap();
        let rho = DensityMatrix::from_populations(&[0.4, 0.6]).unwrap();
        assert_eq!(dil.probabilities(&rho).unwrap()[1].abs() < 1e-15, true);
        assert!(dil.post_state(&rho, 1).unwrap().is_none());
    }

    #[test]
    fn qubit_lowering_branches() {
        let lower = Operator::from_rows(2, &[ZERO, ONE, ZERO, ZERO]).unwrap();
        let polar = polar_decompose(&lower).unwrap();
        let w = 0.1;
        let dil = dilate_to_projection(&polar.positive, w, Some(&polar.unitary)).unwrap();
        let rho = DensityMatrix::from_populations(&[0.25, 0.75]).unwrap();
        let pr = dil.probabilities(&rho).unwrap();
        assert!((pr[1] - 0.075).abs() < 1e-14);
        let jumped = dil.post_state(&rho, 1).unwrap().unwrap();
        assert!(jumped.operator().distance(&Operator::from_real_diagonal(&[1.0, 0.0])) < 1e-12);
        let stayed = dil.post_state(&rho, 0).unwrap().unwrap();
        let expect = Operator::from_real_diagonal(&[0.25, 0.675]).scale_real(1.0 / 0.925);
        assert!(stayed.operator().distance(&expect) < 1e-12);
    }

    #[test]
    fn oversized_weight_is_rejected() {
        assert!(dilate_to_projection(&Operator::identity(2), 1.5, None).is_err());
    }

    #[test]
    fn stinespring_reproduces_channel() {
        let model = qubit_damping_model(0.8).unwrap();
        let map = ChannelMap::from_model(&model, 0.6).unwrap();
        let kraus = map.kraus().unwrap();
        let u = stinespring_unitary(&kraus).unwrap();
        assert!(u.is_unitary(1e-10));
        let r = kraus.len();
        let rho = DensityMatrix::from_populations(&[0.1, 0.9]).unwrap();
        let env = StateVector::basis(r, 0).unwrap().projector();
        let out = u.conjugate(&tensor_product(rho.operator(), &env));
        let reduced = partial_trace(&out, (2, r), Traced::Second).unwrap();
        assert!(reduced.distance(&map.apply(rho.operator())) < 1e-12);
    }
}
