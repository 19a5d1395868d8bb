//! de Sitter thermodynamics and fluctuation rates, evaluated in log space.
//!
//! Planck units throughout. A phase with cosmological term `Λ` has horizon
//! `ℓ = √(3/Λ)`, temperature `T = 1/(2πℓ)` and entropy `S = πℓ²`.
//! Probabilities are returned as natural logarithms and never exponentiated.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance for the internal cross-form identity checks.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeSitterPhase {
    pub lambda: f64,
    pub length: f64,
    pub temperature: f64,
    pub entropy: f64,
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {x}")))
    }
}

impl DeSitterPhase {
    pub fn from_length(length: f64) -> Result<Self> {
        let l = positive("horizon length", length)?;
        Ok(Self {
            lambda: 3.0 / (l * l),
            length: l,
            temperature: 1.0 / (2.0 * PI * l),
            entropy: PI * l * l,
        })
    }

    pub fn from_lambda(lambda: f64) -> Result<Self> {
        let lambda = positive("cosmological term", lambda)?;
        let mut p = Self::from_length((3.0 / lambda).sqrt())?;
        p.lambda = lambda;
        Ok(p)
    }

    pub fn from_temperature(temperature: f64) -> Result<Self> {
        let t = positive("temperature", temperature)?;
        let mut p = Self::from_length(1.0 / (2.0 * PI * t))?;
        p.temperature = t;
        Ok(p)
    }

    pub fn from_entropy(entropy: f64) -> Result<Self> {
        let s = positive("entropy", entropy)?;
        let mut p = Self::from_length((s / PI).sqrt())?;
        p.entropy = s;
        Ok(p)
    }

    /// Largest relative disagreement among the four fields.
    pub fn consistency_defect(&self) -> f64 {
        let l = self.length;
        [
            rel(self.lambda, 3.0 / (l * l)),
            rel(self.temperature, 1.0 / (2.0 * PI * l)),
            rel(self.entropy, PI * l * l),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn identity(what: &str, a: f64, b: f64) -> Result<()> {
    let r = rel(a, b);
    if r > IDENTITY_TOLERANCE {
        return Err(Error::IdentityViolation(format!("{what}: {a} vs {b} (relative {r:.3e})")));
    }
    Ok(())
}

/// High phase `Λ₀`, low phase `Λ₁` and the bubble-size constant `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReinflationParams {
    pub high: DeSitterPhase,
    pub low: DeSitterPhase,
    pub c: f64,
}

impl ReinflationParams {
    pub fn new(lambda_high: f64, lambda_low: f64, c: f64) -> Result<Self> {
        let high = DeSitterPhase::from_lambda(lambda_high)?;
        let low = DeSitterPhase::from_lambda(lambda_low)?;
        positive("C", c)?;
        if lambda_high < lambda_low {
            return Err(Error::InvalidParameter(format!(
                "high-phase term {lambda_high} is below low-phase term {lambda_low}"
            )));
        }
        Ok(Self { high, low, c })
    }

    /// Radius `Cℓ₀` of the false-vacuum region.
    pub fn bubble_radius(&self) -> f64 {
        self.c * self.high.length
    }

    /// Fluctuation that assembles the reinflating region.
    pub fn fluctuation(&self) -> Result<FluctuationSpec> {
        FluctuationSpec::new(reinflation_energy(self)?, self.high.entropy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationSpec {
    pub energy: f64,
    /// `S_max - S`
    pub entropy_deficit: f64,
}

impl FluctuationSpec {
    pub fn new(energy: f64, entropy_deficit: f64) -> Result<Self> {
        if !(energy >= 0.0) || !(entropy_deficit >= 0.0) || !energy.is_finite() || entropy_deficit.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "fluctuation needs energy >= 0 and entropy deficit >= 0, got {energy}, {entropy_deficit}"
            )));
        }
        Ok(Self {
            energy,
            entropy_deficit,
        })
    }
}

/// Every closed form of the reinflation energy and log-probability,
/// evaluated independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReinflationForms {
    /// `3C³ℓ₀`
    pub energy: f64,
    /// `ℓ³Λ₀` with `ℓ = Cℓ₀`
    pub energy_volume: f64,
    /// `-6πC³ℓ₀ℓ₁ - πℓ₀²`
    pub log_p: f64,
    /// `-6C³√(S₀S₁) - S₀`
    pub log_p_entropy: f64,
    /// `-ΔE/T₁ - S₀`
    pub log_p_thermal: f64,
}

impl ReinflationForms {
    pub fn of(params: &ReinflationParams) -> Self {
        let (h, l) = (&params.high, &params.low);
        let c3 = params.c.powi(3);
        let energy = 3.0 * c3 * h.length;
        Self {
            energy,
            energy_volume: params.bubble_radius().powi(3) * h.lambda,
            log_p: -6.0 * PI * c3 * h.length * l.length - PI * h.length * h.length,
            log_p_entropy: -6.0 * c3 * h.entropy.sqrt() * l.entropy.sqrt() - h.entropy,
            log_p_thermal: -energy / l.temperature - h.entropy,
        }
    }

    /// Largest relative disagreement within each family of forms.
    pub fn max_relative_disagreement(&self) -> f64 {
        rel(self.energy, self.energy_volume)
            .max(rel(self.log_p, self.log_p_entropy))
            .max(rel(self.log_p, self.log_p_thermal))
    }
}

/// `ΔE = 3C³ℓ₀`, checked against `ℓ³Λ₀` with `ℓ = Cℓ₀`.
pub fn reinflation_energy(params: &ReinflationParams) -> Result<f64> {
    let f = ReinflationForms::of(params);
    identity("reinflation energy", f.energy, f.energy_volume)?;
    Ok(f.energy)
}

/// `log p = -6πC³ℓ₀ℓ₁ - πℓ₀²`, checked against `-6C³√(S₀S₁) - S₀` and
/// `-ΔE/T₁ - S₀`.
pub fn reinflation_log_probability(params: &ReinflationParams) -> Result<f64> {
    let f = ReinflationForms::of(params);
    identity("reinflation energy", f.energy, f.energy_volume)?;
    identity("reinflation probability (entropy form)", f.log_p, f.log_p_entropy)?;
    identity("reinflation probability (thermal form)", f.log_p, f.log_p_thermal)?;
    Ok(f.log_p)
}

/// `log p = -ΔE/T - ΔS`.
pub fn fluctuation_log_probability(spec: &FluctuationSpec, temperature: f64) -> Result<f64> {
    let t = positive("temperature", temperature)?;
    Ok(-spec.energy / t - spec.entropy_deficit)
}

/// `log τ₁ = log(4π²ℓ₁) + exponent` with `exponent = -log p`; kept as two
/// terms so that `log τ₁ + log p` recovers the prefactor exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecurrenceTime {
    /// `4π²ℓ₁ = π / T₁`
    pub prefactor: f64,
    pub log_prefactor: f64,
    pub exponent: f64,
    pub log_time: f64,
}

pub fn recurrence_log_time(params: &ReinflationParams) -> Result<RecurrenceTime> {
    let log_p = reinflation_log_probability(params)?;
    let prefactor = 4.0 * PI * PI * params.low.length;
    let log_prefactor = prefactor.ln();
    let exponent = -log_p;
    Ok(RecurrenceTime {
        prefactor,
        log_prefactor,
        exponent,
        log_time: log_prefactor + exponent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BrainVerdict {
    OrdinaryBrainsDominate,
    FluctuatedBrainsDominate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrainComparison {
    pub log_p_reinflation: f64,
    pub log_p_brain: f64,
    pub log_odds: f64,
    pub verdict: BrainVerdict,
    /// `3C³ℓ₀`
    pub energy_threshold: f64,
    /// `ℓ₀`
    pub horizon_threshold: f64,
    pub exceeds_energy_threshold: bool,
    pub exceeds_horizon_threshold: bool,
}

/// Odds of reinflating (and evolving observers normally) against a direct
/// thermal fluctuation `brain` in the low phase.
pub fn compare_boltzmann_brain(params: &ReinflationParams, brain: &FluctuationSpec) -> Result<BrainComparison> {
    reinflation_log_probability(params)?;
    let t1 = params.low.temperature;
    // both sides through the same formula so identical specs cancel exactly
    let log_p_reinflation = fluctuation_log_probability(&params.fluctuation()?, t1)?;
    let log_p_brain = fluctuation_log_probability(brain, t1)?;
    let log_odds = log_p_reinflation - log_p_brain;
    let energy_threshold = reinflation_energy(params)?;
    Ok(BrainComparison {
        log_p_reinflation,
        log_p_brain,
        log_odds,
        verdict: if log_odds > 0.0 {
            BrainVerdict::OrdinaryBrainsDominate
        } else {
            BrainVerdict::FluctuatedBrainsDominate
        },
        energy_threshold,
        horizon_threshold: params.high.length,
        exceeds_energy_threshold: brain.energy > energy_threshold,
        exceeds_horizon_threshold: brain.energy > params.high.length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda_low: f64,
    pub log_p_reinflation: f64,
    pub log_recurrence_time: f64,
    pub log_p_brain: f64,
    pub log_odds: f64,
}

/// Log-spaced sweep of the low-phase term over `[from, to]`.
pub fn sweep(lambda_high: f64, c: f64, from: f64, to: f64, steps: usize, brain: &FluctuationSpec) -> Result<Vec<SweepRow>> {
    positive("sweep start", from)?;
    positive("sweep end", to)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("sweep needs at least one step".into()));
    }
    let (a, b) = (from.ln(), to.ln());
    (0..steps)
        .map(|k| {
            let x = if steps == 1 { a } else { a + (b - a) * k as f64 / (steps - 1) as f64 };
            let lambda_low = if k + 1 == steps { to } else if k == 0 { from } else { x.exp() };
            let params = ReinflationParams::new(lambda_high, lambda_low, c)?;
            let cmp = compare_boltzmann_brain(&params, brain)?;
            Ok(SweepRow {
                lambda_low,
                log_p_reinflation: reinflation_log_probability(&params)?,
                log_recurrence_time: recurrence_log_time(&params)?.log_time,
                log_p_brain: cmp.log_p_brain,
                log_odds: cmp.log_odds,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_horizon() {
        let p = DeSitterPhase::from_lambda(3.0).unwrap();
        assert_eq!(p.length, 1.0);
        assert!((p.temperature - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((p.entropy - PI).abs() < 1e-15);
    }

    #[test]
    fn inverse_constructors_round_trip() {
        for lambda in [3.0, 1e-5, 3e-122, 0.7] {
            let p = DeSitterPhase::from_lambda(lambda).unwrap();
            for q in [
                DeSitterPhase::from_entropy(p.entropy).unwrap(),
                DeSitterPhase::from_temperature(p.temperature).unwrap(),
                DeSitterPhase::from_length(p.length).unwrap(),
            ] {
                assert!(rel(q.lambda, lambda) < 1e-12);
                assert!(q.consistency_defect() < 1e-12);
            }
        }
        assert!(DeSitterPhase::from_lambda(0.0).is_err());
        assert!(DeSitterPhase::from_entropy(-1.0).is_err());
        let s: Vec<f64> = [1.0, 1e-3, 1e-9].iter().map(|&l| DeSitterPhase::from_lambda(l).unwrap().entropy).collect();
        assert!(s[0] < s[1] && s[1] < s[2]);
    }

    #[test]
    fn energy_examples() {
        let p = ReinflationParams::new(3.0, 0.03, 1.0).unwrap();
        assert!((reinflation_energy(&p).unwrap() - 3.0).abs() < 1e-14);
        let p2 = ReinflationParams::new(3.0, 0.03, 2.0).unwrap();
        assert!(rel(reinflation_energy(&p2).unwrap(), 24.0) < 1e-14);
    }

    #[test]
    fn equal_phases_probability_and_time() {
        let p = ReinflationParams::new(3.0, 3.0, 1.0).unwrap();
        let log_p = reinflation_log_probability(&p).unwrap();
        assert!(rel(log_p, -7.0 * PI) < 1e-14);
        let t = recurrence_log_time(&p).unwrap();
        assert!(rel(t.log_time, (4.0 * PI * PI).ln() + 7.0 * PI) < 1e-14);
        assert_eq!(t.exponent, -log_p);
    }

    #[test]
    fn realistic_low_phase_stays_finite() {
        let p = ReinflationParams::new(1e-10, 3e-122, 1.0).unwrap();
        let log_p = reinflation_log_probability(&p).unwrap();
        assert!(log_p.is_finite() && log_p < -1e60);
        assert!(recurrence_log_time(&p).unwrap().log_time.is_finite());
    }

    #[test]
    fn probability_decreases_with_low_horizon_and_c() {
        let a = reinflation_log_probability(&ReinflationParams::new(3.0, 0.3, 1.0).unwrap()).unwrap();
        let b = reinflation_log_probability(&ReinflationParams::new(3.0, 0.03, 1.0).unwrap()).unwrap();
        let c = reinflation_log_probability(&ReinflationParams::new(3.0, 0.03, 1.5).unwrap()).unwrap();
        assert!(b < a && c < b);
    }

    #[test]
    fn brain_comparison_examples() {
        let p = ReinflationParams::new(3.0, 0.03, 1.0).unwrap();
        let same = compare_boltzmann_brain(&p, &p.fluctuation().unwrap()).unwrap();
        assert_eq!(same.log_odds, 0.0);
        assert_eq!(same.verdict, BrainVerdict::FluctuatedBrainsDominate);

        let heavy = FluctuationSpec::new(30.0, 0.0).unwrap();
        let r = compare_boltzmann_brain(&p, &heavy).unwrap();
        // -61π + 600π
        assert!(rel(r.log_odds, 539.0 * PI) < 1e-13);
        assert_eq!(r.verdict, BrainVerdict::OrdinaryBrainsDominate);
        assert!(r.exceeds_energy_threshold && r.exceeds_horizon_threshold);

        let hopeless = FluctuationSpec::new(0.0, f64::INFINITY).unwrap();
        assert_eq!(
            compare_boltzmann_brain(&p, &hopeless).unwrap().verdict,
            BrainVerdict::OrdinaryBrainsDominate
        );
        assert_eq!(fluctuation_log_probability(&FluctuationSpec::new(0.0, 0.0).unwrap(), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sweep_endpoints() {
        let brain = FluctuationSpec::new(10.0, 5.0).unwrap();
        let rows = sweep(3.0, 1.0, 1e-3, 1.0, 4, &brain).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].lambda_low, 1e-3);
        assert_eq!(rows[3].lambda_low, 1.0);
        assert!(rows.windows(2).all(|w| w[0].log_p_reinflation < w[1].log_p_reinflation));
    }
}
