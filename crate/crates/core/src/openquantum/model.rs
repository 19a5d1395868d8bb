use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{hermitian_eigen, DensityMatrix, Operator, C64, I, ONE, ZERO};

/// One dissipative channel `(L_j, γ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    #[serde(rename = "L")]
    pub jump: Operator,
    #[serde(rename = "gamma")]
    pub rate: f64,
}

/// `dρ/dt = -i[H, ρ] - Σ_j (γ_j/2)(L_j†L_j ρ - 2 L_j ρ L_j† + ρ L_j†L_j)`
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    hamiltonian: Operator,
    channels: Vec<Channel>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, channels: Vec<Channel>) -> Result<Self> {
        let defect = hamiltonian.hermiticity_defect();
        if defect > 1e-10 {
            return Err(Error::NotHermitian(defect));
        }
        for (j, c) in channels.iter().enumerate() {
            hamiltonian.check_dim(&c.jump)?;
            if !(c.rate >= 0.0) || !c.rate.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "channel {j} has invalid rate {}",
                    c.rate
                )));
            }
        }
        Ok(Self {
            hamiltonian,
            channels,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Right-hand side of the master equation at `rho`.
    pub fn rhs(&self, rho: &Operator) -> Result<Operator> {
        self.hamiltonian.check_dim(rho)?;
        let h = self.hamiltonian.matrix();
        let r = rho.matrix();
        let mut out = (h * r - r * h) * (-I);
        for c in &self.channels {
            let l = c.jump.matrix();
            let ldl = l.adjoint() * l;
            out -= (&ldl * r - l * r * l.adjoint() * C64::new(2.0, 0.0) + r * &ldl)
                * C64::new(c.rate / 2.0, 0.0);
        }
        Ok(Operator::from_matrix(out))
    }

    /// Generator as a `d² x d²` matrix acting on column-stacked operators,
    /// `vec(X)[i + d j] = X[i, j]`.
    pub fn superoperator(&self) -> DMatrix<C64> {
        let d = self.dim();
        let id = DMatrix::<C64>::identity(d, d);
        let h = self.hamiltonian.matrix();
        let mut s = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
        for c in &self.channels {
            let l = c.jump.matrix();
            let ldl = l.adjoint() * l;
            let g = C64::new(c.rate, 0.0);
            s += (l.conjugate().kronecker(l) - (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)) * C64::new(0.5, 0.0)) * g;
        }
        s
    }

    /// Largest `γ_j ||L_j†L_j||` plus `||H||`, a rate scale for step-size and
    /// bias estimates.
    pub fn rate_scale(&self) -> f64 {
        self.hamiltonian.operator_norm()
            + self
                .channels
                .iter()
                .map(|c| c.rate * (&c.jump.adjoint() * &c.jump).operator_norm())
                .sum::<f64>()
    }
}

pub(crate) fn vectorize(x: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(x.as_slice())
}

pub(crate) fn unvectorize(v: &DVector<C64>, d: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// Linear map on operators stored as a `d² x d²` matrix (column stacking).
#[derive(Debug, Clone)]
pub struct ChannelMap {
    dim: usize,
    matrix: DMatrix<C64>,
}

impl ChannelMap {
    pub fn identity(d: usize) -> Self {
        Self {
            dim: d,
            matrix: DMatrix::identity(d * d, d * d),
        }
    }

    /// `exp(𝓛 t)` for the model's generator.
    pub fn from_model(model: &LindbladModel, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
        }
        let d = model.dim();
        if t == 0.0 {
            return Ok(Self::identity(d));
        }
        let m = (model.superoperator() * C64::new(t, 0.0)).exp();
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Integration("superoperator exponential overflowed".into()));
        }
        Ok(Self { dim: d, matrix: m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Applies the map to any operator (Hermitian or not).
    pub fn apply(&self, x: &Operator) -> Operator {
        Operator::from_matrix(unvectorize(&(&self.matrix * vectorize(x.matrix())), self.dim))
    }

    pub fn compose(&self, next: &ChannelMap) -> ChannelMap {
        ChannelMap {
            dim: self.dim,
            matrix: &next.matrix * &self.matrix,
        }
    }

    /// Choi matrix `Σ_ij |i><j| ⊗ E(|i><j|)`.
    pub fn choi(&self) -> Operator {
        let d = self.dim;
        let mut j = DMatrix::<C64>::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                let mut e = DMatrix::<C64>::zeros(d, d);
                e[(a, b)] = ONE;
                let img = self.apply(&Operator::from_matrix(e));
                for x in 0..d {
                    for y in 0..d {
                        j[(a * d + x, b * d + y)] = img.get(x, y);
                    }
                }
            }
        }
        Operator::from_matrix(j)
    }

    /// Minimal Kraus decomposition from the Choi matrix.
    pub fn kraus(&self) -> Result<Vec<Operator>> {
        let d = self.dim;
        let eig = hermitian_eigen(&self.choi());
        let top = eig.values.iter().cloned().fold(0.0, f64::max);
        if let Some(&min) = eig.values.first() {
            if min < -1e-8 * top.max(1.0) {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
            }
        }
        let mut out = Vec::new();
        for (k, &lambda) in eig.values.iter().enumerate().rev() {
            if lambda <= 1e-13 * top {
                continue;
            }
            let v = eig.vector(k);
            let s = lambda.sqrt();
            // v[a d + x] ↔ K[x, a]
            out.push(Operator::from_matrix(DMatrix::from_fn(d, d, |x, a| v[a * d + x] * s)));
        }
        Ok(out)
    }
}

/// How [`propagate`] integrates the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PropagationMethod {
    /// Exponential of the superoperator.
    Exact,
    /// Adaptive fourth-order Runge-Kutta with step doubling.
    Rk4 { tolerance: f64 },
    /// `Exact` up to dimension 16, `Rk4` beyond.
    Auto,
}

fn rk4_step(model: &LindbladModel, rho: &Operator, h: f64) -> Result<Operator> {
    let k1 = model.rhs(rho)?;
    let k2 = model.rhs(&(rho + &k1.scale_real(h / 2.0)))?;
    let k3 = model.rhs(&(rho + &k2.scale_real(h / 2.0)))?;
    let k4 = model.rhs(&(rho + &k3.scale_real(h)))?;
    let incr = &(&(&k1 + &k2.scale_real(2.0)) + &k3.scale_real(2.0)) + &k4;
    Ok(rho + &incr.scale_real(h / 6.0))
}

fn integrate_rk4(model: &LindbladModel, rho: &Operator, t: f64, tol: f64) -> Result<Operator> {
    let mut x = rho.clone();
    let mut now = 0.0;
    let mut h = (0.1 / model.rate_scale().max(1e-12)).min(t);
    let mut steps = 0usize;
    while now < t {
        if steps > 10_000_000 {
            return Err(Error::Integration("step budget exhausted".into()));
        }
        steps += 1;
        h = h.min(t - now);
        let full = rk4_step(model, &x, h)?;
        let half = rk4_step(model, &rk4_step(model, &x, h / 2.0)?, h / 2.0)?;
        let err = full.distance(&half) / 15.0;
        if err <= tol || h < 1e-14 * t.max(1.0) {
            if err > tol {
                return Err(Error::Integration(format!(
                    "tolerance {tol:.1e} not met (local error {err:.2e})"
                )));
            }
            // Richardson-corrected step
            x = &half + &(&half - &full).scale_real(1.0 / 15.0);
            now += h;
            let grow = if err > 0.0 { 0.9 * (tol / err).powf(0.2) } else { 2.0 };
            h *= grow.clamp(0.2, 2.0);
        } else {
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.5);
        }
    }
    Ok(x)
}

/// Evolves `rho` for time `t` under the master equation.
pub fn propagate(model: &LindbladModel, rho: &DensityMatrix, t: f64, method: PropagationMethod) -> Result<DensityMatrix> {
    if rho.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho.dim(),
        });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(rho.clone());
    }
    let method = match method {
        PropagationMethod::Auto if model.dim() <= 16 => PropagationMethod::Exact,
        PropagationMethod::Auto => PropagationMethod::Rk4 { tolerance: 1e-10 },
        m => m,
    };
    let out = match method {
        PropagationMethod::Exact => ChannelMap::from_model(model, t)?.apply(rho.operator()),
        PropagationMethod::Rk4 { tolerance } => integrate_rk4(model, rho.operator(), t, tolerance)?,
        PropagationMethod::Auto => unreachable!(),
    };
    DensityMatrix::with_tolerance(out.hermitian_part(), 1e-8)
        .map_err(|e| Error::Integration(format!("propagated state invalid: {e}")))
}

/// Vectorized stationary states: null space of the generator.
pub(crate) fn null_space_dimension(superop: &DMatrix<C64>) -> (usize, f64) {
    let svd = superop.clone().svd(false, false);
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = 1e-9 * top.max(1e-300);
    (svd.singular_values.iter().filter(|&&s| s <= cutoff).count(), cutoff)
}

/// The unique stationary state of `model`.
pub fn stationary_state(model: &LindbladModel) -> Result<DensityMatrix> {
    let s = model.superoperator();
    let (null, _) = null_space_dimension(&s);
    if null != 1 {
        return Err(Error::DegenerateFixedPoint { null_dimension: null });
    }
    let d = model.dim();
    // null vector = right singular vector of the smallest singular value
    let svd = s.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("non-empty");
    let v: DVector<C64> = v_t.row(k).adjoint();
    let m = unvectorize(&v, d);
    let tr = m.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::Integration("stationary vector has zero trace".into()));
    }
    let rho = Operator::from_matrix(m / tr).hermitian_part();
    DensityMatrix::with_tolerance(rho, 1e-8)
}

/// Smallest nonzero decay rate `min(-Re λ)` of the generator.
pub fn spectral_gap(model: &LindbladModel) -> Result<f64> {
    let s = model.superoperator();
    let (_, cutoff) = null_space_dimension(&s);
    let eig = s
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Integration("complex Schur decomposition failed".into()))?;
    eig.iter()
        .filter(|z| z.norm() > cutoff.max(1e-10))
        .map(|z| -z.re)
        .filter(|&r| r > 0.0)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
        .ok_or_else(|| Error::InvalidParameter("generator has no decaying modes".into()))
}

/// Truncated thermal state `exp(-β ω n) / Z` on `levels` Fock states.
pub fn thermal_state(levels: usize, omega: f64, beta: f64) -> Result<DensityMatrix> {
    if levels == 0 || !(omega > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidParameter("thermal state needs levels >= 1, ω > 0, β > 0".into()));
    }
    let w: Vec<f64> = (0..levels).map(|n| (-beta * omega * n as f64).exp()).collect();
    let z: f64 = w.iter().sum();
    DensityMatrix::from_populations(&w.iter().map(|x| x / z).collect::<Vec<_>>())
}

/// Weight of the untruncated thermal state above the cutoff: `e^{-β ω N}`.
pub fn thermal_tail_weight(levels: usize, omega: f64, beta: f64) -> f64 {
    (-beta * omega * levels as f64).exp()
}

/// Smallest level count whose thermal tail weight is below `tail`.
pub fn levels_for_tail(omega: f64, beta: f64, tail: f64) -> usize {
    let n = (-(tail.ln()) / (beta * omega)).floor() as usize + 1;
    n.max(2)
}

/// Oscillator coupled to a thermal bath: channels `(a†, γ₊)` and `(a, γ₋)`
/// with `γ₊ = γ₋ e^{-βω}` and `H = ω a†a`, truncated to `levels` states.
pub fn thermal_oscillator_model(levels: usize, omega: f64, beta: f64, gamma_minus: f64) -> Result<LindbladModel> {
    if levels < 2 {
        return Err(Error::InvalidParameter("need at least 2 levels".into()));
    }
    if !(omega > 0.0) || !(beta > 0.0) || !(gamma_minus > 0.0) {
        return Err(Error::InvalidParameter("ω, β and γ₋ must be positive".into()));
    }
    let a = Operator::from_matrix(DMatrix::from_fn(levels, levels, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    }));
    let h = (&a.adjoint() * &a).scale_real(omega);
    let gamma_plus = gamma_minus * (-beta * omega).exp();
    LindbladModel::new(
        h,
        vec![
            Channel {
                jump: a.adjoint(),
                rate: gamma_plus,
            },
            Channel {
                jump: a,
                rate: gamma_minus,
            },
        ],
    )
}

/// Qubit amplitude damping: `H = 0`, `L = |0><1|` at rate `γ`.
pub fn qubit_damping_model(gamma: f64) -> Result<LindbladModel> {
    let lower = Operator::from_rows(2, &[ZERO, ONE, ZERO, ZERO])?;
    LindbladModel::new(
        Operator::zeros(2),
        vec![Channel {
            jump: lower,
            rate: gamma,
        }],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{partial_trace, tensor_product, StateVector, Traced};

    #[test]
    fn rhs_without_channels_is_commutator() {
        let h = Operator::from_real_diagonal(&[0.0, 1.0, 3.0]);
        let m = LindbladModel::new(h.clone(), vec![]).unwrap();
        let rho = DensityMatrix::from_populations(&[0.2, 0.3, 0.5]).unwrap();
        assert!(m.rhs(rho.operator()).unwrap().max_abs() < 1e-15);
        let plus = StateVector::normalized(DVector::from_vec(vec![ONE, ONE, ZERO])).unwrap();
        let r = m.rhs(&plus.projector()).unwrap();
        let expected = h.commutator(&plus.projector()).unwrap().scale(-I);
        assert!(r.distance(&expected) < 1e-15);
    }

    #[test]
    fn rhs_qubit_damping_excited_state() {
        let m = qubit_damping_model(1.0).unwrap();
        let excited = DensityMatrix::from_populations(&[0.0, 1.0]).unwrap();
        let r = m.rhs(excited.operator()).unwrap();
        assert!(r.distance(&Operator::from_real_diagonal(&[1.0, -1.0])) < 1e-15);
    }

    #[test]
    fn superoperator_agrees_with_rhs() {
        let m = thermal_oscillator_model(4, 1.0, 0.7, 0.3).unwrap();
        let psi = StateVector::normalized(DVector::from_vec(vec![ONE, I, ONE * 0.5, -ONE])).unwrap();
        let rho = psi.projector();
        let direct = m.rhs(&rho).unwrap();
        let via = unvectorize(&(m.superoperator() * vectorize(rho.matrix())), 4);
        assert!(direct.distance(&Operator::from_matrix(via)) < 1e-13);
        assert!(direct.trace().norm() < 1e-13);
        assert!(direct.is_hermitian(1e-13));
    }

    #[test]
    fn amplitude_damping_population_decays_exponentially() {
        let gamma = 0.8;
        let m = qubit_damping_model(gamma).unwrap();
        let excited = DensityMatrix::from_populations(&[0.0, 1.0]).unwrap();
        for t in [0.1, 0.5, 1.0, 3.0] {
            let exact = propagate(&m, &excited, t, PropagationMethod::Exact).unwrap();
            assert!((exact.operator().get(1, 1).re - (-gamma * t).exp()).abs() < 1e-12);
            let rk = propagate(&m, &excited, t, PropagationMethod::Rk4 { tolerance: 1e-12 }).unwrap();
            assert!(rk.trace_distance(&exact) < 1e-9);
        }
        assert_eq!(propagate(&m, &excited, 0.0, PropagationMethod::Auto).unwrap(), excited);
    }

    #[test]
    fn propagation_is_completely_positive() {
        let m = thermal_oscillator_model(3, 1.0, 0.5, 1.0).unwrap();
        let map = ChannelMap::from_model(&m, 0.7).unwrap();
        let d = 3;
        // (E ⊗ id) on a maximally entangled state = Choi / d
        let choi = map.choi().scale_real(1.0 / d as f64);
        let min = hermitian_eigen(&choi).values[0];
        assert!(min >= -1e-8);
        let reduced = partial_trace(&choi, (d, d), Traced::Second).unwrap();
        assert!(reduced.distance(&Operator::identity(d).scale_real(1.0 / d as f64)) < 1e-10);
        let _ = tensor_product(&Operator::identity(1), &Operator::identity(1));
    }

    #[test]
    fn kraus_decomposition_reproduces_channel() {
        let m = thermal_oscillator_model(3, 1.2, 0.4, 0.9).unwrap();
        let map = ChannelMap::from_model(&m, 0.3).unwrap();
        let ks = map.kraus().unwrap();
        let x = Operator::from_rows(3, &[ONE, I, ZERO, ZERO, ONE * 2.0, ONE, -I, ZERO, ONE]).unwrap();
        let mut sum = Operator::zeros(3);
        for k in &ks {
            sum = &sum + &(&(k * &x) * &k.adjoint());
        }
        assert!(sum.distance(&map.apply(&x)) < 1e-10);
        let mut completeness = Operator::zeros(3);
        for k in &ks {
            completeness = &completeness + &(&k.adjoint() * k);
        }
        assert!(completeness.distance(&Operator::identity(3)) < 1e-10);
    }

    #[test]
    fn thermal_model_rates_and_stationarity() {
        let m = thermal_oscillator_model(10, 1.0, 2.0, 0.5).unwrap();
        let ratio = m.channels()[0].rate / m.channels()[1].rate;
        assert_eq!(ratio, 0.5 * (-2.0f64).exp() / 0.5);
        let rho = thermal_state(10, 1.0, 2.0).unwrap();
        assert!(m.rhs(rho.operator()).unwrap().trace_norm() < 1e-12);
        let cold = thermal_oscillator_model(4, 1.0, 1e6, 1.0).unwrap();
        assert_eq!(cold.channels()[0].rate, 0.0);
    }

    #[test]
    fn fock_state_emission_and_absorption_weights() {
        // tr(a ρ a†) = n and tr(a† ρ a) = n + 1 on |n><n|
        let levels = 8;
        let m = thermal_oscillator_model(levels, 1.0, 1.0, 1.0).unwrap();
        let up = &m.channels()[0].jump;
        let down = &m.channels()[1].jump;
        for n in 0..levels - 1 {
            let rho = StateVector::basis(levels, n).unwrap().projector();
            let emit = down.conjugate(&rho).trace().re;
            let absorb = up.conjugate(&rho).trace().re;
            assert!((emit - n as f64).abs() < 1e-12);
            assert!((absorb - (n + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_state_and_gap_for_damping() {
        let m = qubit_damping_model(2.0).unwrap();
        let s = stationary_state(&m).unwrap();
        assert!(s.operator().distance(&Operator::from_real_diagonal(&[1.0, 0.0])) < 1e-10);
        assert!((spectral_gap(&m).unwrap() - 1.0).abs() < 1e-10);
        let closed = LindbladModel::new(Operator::from_real_diagonal(&[0.0, 1.0]), vec![]).unwrap();
        assert!(matches!(
            stationary_state(&closed),
            Err(Error::DegenerateFixedPoint { .. })
        ));
    }

    #[test]
    fn tail_weight_level_choice() {
        let n = levels_for_tail(1.0, 2.0, 1e-8);
        assert!(thermal_tail_weight(n, 1.0, 2.0) < 1e-8);
        assert!(thermal_tail_weight(n - 1, 1.0, 2.0) >= 1e-8);
    }

    #[test]
    fn model_validation() {
        let h = Operator::from_rows(2, &[ZERO, ONE, ZERO, ZERO]).unwrap();
        assert!(LindbladModel::new(h, vec![]).is_err());
        let bad_rate = Channel {
            jump: Operator::identity(2),
            rate: -1.0,
        };
        assert!(LindbladModel::new(Operator::zeros(2), vec![bad_rate]).is_err());
        let wrong_dim = Channel {
            jump: Operator::identity(3),
            rate: 1.0,
        };
        assert!(LindbladModel::new(Operator::zeros(2), vec![wrong_dim]).is_err());
    }
}
