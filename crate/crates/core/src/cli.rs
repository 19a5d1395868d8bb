//! Command-line driver: one subcommand per scenario, JSON (plus optional
//! CSV) artifacts, seeded and reproducible.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::acceptance;
use crate::cosmo::{
    compare_boltzmann_brain, recurrence_log_time, sweep, FluctuationSpec, ReinflationForms, ReinflationParams,
};
use crate::ensembles::{
    information_capacity_check, sample_random_family, typical_ratio_experiment, InitialState, RandomScheduleSpec,
};
use crate::error::{Error, Result};
use crate::histories::{
    decoherence_functional, time_symmetric_functional, DEFAULT_RATIO_FLOOR,
};
use crate::io::{read_json, FunctionalReport, ModelFile, ScheduleFile, Table};
use crate::openquantum::{
    ensemble_average, propagate, qubit_damping_model, relaxation_decoherence_experiment, spectral_gap,
    step_order_fit, thermal_oscillator_model, EnsembleConfig, LindbladModel, PropagationMethod,
};
use crate::oscillator::TruncatedOscillator;
use crate::qops::{DensityMatrix, Operator, StateVector, Tolerances, C64};
use crate::rng::stream;

/// Exit status for validation errors.
pub const EXIT_INVALID: i32 = 1;
/// Exit status when `selftest` finds a failing criterion.
pub const EXIT_ASSERTION: i32 = 2;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "DECOHIST_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(name = "decohist", version, about = "Decoherent histories of closed and open quantum systems")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    /// Parses an argument list, mapping usage errors to [`Error::InvalidParameter`].
    pub fn try_parse_from_args<T: AsRef<str>>(args: &[T]) -> Result<Self> {
        Self::try_parse_from(args.iter().map(|a| a.as_ref())).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Override a named tolerance (structural, roundtrip, epsilon, ratio_floor, unity).
    #[arg(long = "tolerance", global = true, value_parser = parse_key_value)]
    pub tolerance: Vec<(String, f64)>,
    /// Write the JSON artifact here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write row data as CSV.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
}

fn parse_key_value(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.to_string(), v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunTolerances {
    pub structural: f64,
    pub roundtrip: f64,
    /// Decoherence threshold on normalized off-diagonal ratios.
    pub epsilon: f64,
    pub ratio_floor: f64,
    /// Allowed `|ratio - 1|` in the pure-endpoint check.
    pub unity: f64,
}

impl Default for RunTolerances {
    fn default() -> Self {
        let base = Tolerances::default();
        Self {
            structural: base.structural,
            roundtrip: base.roundtrip,
            epsilon: 1e-6,
            ratio_floor: DEFAULT_RATIO_FLOOR,
            unity: 1e-8,
        }
    }
}

impl RunTolerances {
    pub fn with_overrides(overrides: &[(String, f64)]) -> Result<Self> {
        let mut t = Self::default();
        for (k, v) in overrides {
            if !(*v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("tolerance {k} must be >= 0, got {v}")));
            }
            let slot = match k.as_str() {
                "structural" => &mut t.structural,
                "roundtrip" => &mut t.roundtrip,
                "epsilon" => &mut t.epsilon,
                "ratio_floor" => &mut t.ratio_floor,
                "unity" => &mut t.unity,
                other => return Err(Error::InvalidParameter(format!("unknown tolerance {other:?}"))),
            };
            *slot = *v;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OscillatorStart {
    Ground,
    /// First phase state.
    Phase,
    /// Haar-random pure state from the seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    QubitDamping,
    ThermalOscillator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelStart {
    /// Highest level.
    Top,
    Ground,
    /// Maximally mixed.
    Mixed,
    /// Uniform superposition of all levels.
    Superposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Rk4,
    Auto,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Model file `{"dim","H","channels":[{"L","gamma"}]}`; overrides --builtin.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Builtin::QubitDamping)]
    pub builtin: Builtin,
    /// Decay rate (γ₋ for the thermal oscillator).
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 8)]
    pub levels: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, value_enum, default_value_t = ModelStart::Top)]
    pub initial: ModelStart,
}

impl ModelArgs {
    fn build(&self) -> Result<LindbladModel> {
        match &self.model {
            Some(path) => read_json::<ModelFile>(path)?.into_model(),
            None => match self.builtin {
                Builtin::QubitDamping => qubit_damping_model(self.gamma),
                Builtin::ThermalOscillator => thermal_oscillator_model(self.levels, self.omega, self.beta, self.gamma),
            },
        }
    }

    fn initial_state(&self, d: usize) -> Result<DensityMatrix> {
        Ok(match self.initial {
            ModelStart::Top => StateVector::basis(d, d - 1)?.density(),
            ModelStart::Ground => StateVector::basis(d, 0)?.density(),
            ModelStart::Mixed => DensityMatrix::maximally_mixed(d),
            ModelStart::Superposition => {
                let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
                StateVector::new(nalgebra::DVector::from_element(d, a))?.density()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CosmoAction {
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleStart {
    Random,
    Ground,
    Thermal,
}

impl From<EnsembleStart> for InitialState {
    fn from(s: EnsembleStart) -> Self {
        match s {
            EnsembleStart::Random => InitialState::Random,
            EnsembleStart::Ground => InitialState::Ground,
            EnsembleStart::Thermal => InitialState::Thermal,
        }
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Phase-basis histories of the truncated oscillator.
    OscillatorPhase {
        #[arg(long = "N", default_value_t = 8)]
        levels: usize,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, value_enum, default_value_t = OscillatorStart::Ground)]
        initial: OscillatorStart,
    },
    /// Energy-basis histories at arbitrary times.
    OscillatorEnergy {
        #[arg(long = "N", default_value_t = 6)]
        levels: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,0.37,1.1")]
        times: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, value_enum, default_value_t = OscillatorStart::Random)]
        initial: OscillatorStart,
    },
    /// Phase histories between pure energy endpoints.
    MixedCoherence {
        #[arg(long = "N", default_value_t = 8)]
        levels: usize,
        #[arg(long, default_value_t = 3)]
        steps: usize,
    },
    /// Decoherence functional of a schedule file.
    Functional {
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Time-symmetric functional of a schedule file with a final state.
    TsFunctional {
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Master-equation evolution of a model.
    LindbladPropagate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Output sampling interval.
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
    },
    /// Quantum-jump ensemble compared with the master equation.
    JumpEnsemble {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1000)]
        trajectories: usize,
        #[arg(long, value_enum, default_value_t = Switch::On)]
        exact_oracle: Switch,
        /// Snapshot interval in steps (0: horizon only).
        #[arg(long, default_value_t = 0)]
        sample_every: usize,
    },
    /// One-step error of the averaged jump map against the exact channel.
    PovmStepOrder {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001,0.0001")]
        dts: Vec<f64>,
    },
    /// Histories of random families spaced by Lindblad evolution.
    Relaxation {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 2)]
        events: usize,
        /// Spacings in units of the relaxation time.
        #[arg(long, value_delimiter = ',', default_value = "0,1,5,10,20")]
        spacing_over_tau: Vec<f64>,
    },
    /// de Sitter reinflation and fluctuation rates.
    Cosmo {
        #[arg(value_enum)]
        action: Option<CosmoAction>,
        #[arg(long)]
        lambda0: f64,
        #[arg(long)]
        lambda1: Option<f64>,
        /// `from:to:steps`, log-spaced.
        #[arg(long)]
        lambda1_range: Option<String>,
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        #[arg(long = "brain-dE")]
        brain_de: Option<f64>,
        #[arg(long = "brain-dS", default_value_t = 0.0)]
        brain_ds: f64,
    },
    /// Ratio statistics of random coarse-grained histories.
    RandomHistories {
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        events: usize,
        #[arg(long, default_value_t = 32)]
        rank: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = EnsembleStart::Random)]
        initial: EnsembleStart,
        /// Also sweep fineness and locate the ratio threshold crossing.
        #[arg(long)]
        capacity: bool,
        #[arg(long, value_delimiter = ',', default_value = "32,16,8,4,2")]
        capacity_ranks: Vec<usize>,
        #[arg(long, default_value_t = 40)]
        capacity_samples: usize,
        #[arg(long, default_value_t = crate::ensembles::CAPACITY_THRESHOLD)]
        threshold: f64,
    },
    /// Runs the acceptance suite.
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::OscillatorPhase { .. } => "oscillator-phase",
            Self::OscillatorEnergy { .. } => "oscillator-energy",
            Self::MixedCoherence { .. } => "mixed-coherence",
            Self::Functional { .. } => "functional",
            Self::TsFunctional { .. } => "ts-functional",
            Self::LindbladPropagate { .. } => "lindblad-propagate",
            Self::JumpEnsemble { .. } => "jump-ensemble",
            Self::PovmStepOrder { .. } => "povm-step-order",
            Self::Relaxation { .. } => "relaxation",
            Self::Cosmo { .. } => "cosmo",
            Self::RandomHistories { .. } => "random-histories",
            Self::Selftest => "selftest",
        }
    }
}

/// Output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub json: String,
    pub csv: Option<String>,
    /// `false` only when `selftest` saw a failing criterion.
    pub passed: bool,
}

#[derive(Serialize)]
struct Envelope<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    tolerances: RunTolerances,
    config: &'a Command,
    result: Value,
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn operator_json(op: &Operator) -> Result<Value> {
    to_value(op)
}

fn probability_table(labels: &[String], probs: &[f64]) -> Table {
    let mut t = Table::new(&["label", "probability"]);
    for (l, p) in labels.iter().zip(probs) {
        t.push([l.clone(), p.to_string()]);
    }
    t
}

fn oscillator_start(osc: &TruncatedOscillator, start: OscillatorStart, seed: u64) -> Result<StateVector> {
    Ok(match start {
        OscillatorStart::Ground => osc.energy_state(0)?,
        OscillatorStart::Phase => osc.phase_states().states[0].clone(),
        OscillatorStart::Random => crate::ensembles::haar_state(osc.levels(), &mut stream(seed, 0)),
    })
}

fn parse_range(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidParameter(format!("range must be from:to:steps, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

/// Runs a parsed command line and returns its artifacts.
pub fn execute(cli: &Cli) -> Result<Artifacts> {
    let tol = RunTolerances::with_overrides(&cli.common.tolerance)?;
    let seed = cli.common.seed;
    let mut csv: Option<Table> = None;
    let mut passed = true;
    let result = match &cli.command {
        Command::OscillatorPhase {
            levels,
            steps,
            omega,
            initial,
        } => {
            let osc = TruncatedOscillator::new(*levels, *omega)?;
            let schedule = osc.phase_history_schedule(*steps)?;
            let psi = oscillator_start(&osc, *initial, seed)?;
            let d = decoherence_functional(&schedule, &psi.density())?.with_floor(tol.ratio_floor);
            let report = FunctionalReport::new(&d, tol.epsilon);
            let support_on_chains = d
                .labels()
                .iter()
                .zip(d.diagonal())
                .all(|(l, p)| (p > tol.structural) == osc.is_successor_chain(l) || *initial != OscillatorStart::Ground);
            csv = Some(probability_table(&report.labels, &report.probabilities));
            json!({
                "step_time": osc.step_time(),
                "step_shift": crate::oscillator::STEP_SHIFT,
                "support_on_successor_chains": support_on_chains,
                "functional": to_value(&report)?,
            })
        }
        Command::OscillatorEnergy {
            levels,
            times,
            omega,
            initial,
        } => {
            let osc = TruncatedOscillator::new(*levels, *omega)?;
            let schedule = osc.energy_history_schedule(times)?;
            let psi = oscillator_start(&osc, *initial, seed)?;
            let d = decoherence_functional(&schedule, &psi.density())?.with_floor(tol.ratio_floor);
            let report = FunctionalReport::new(&d, tol.epsilon);
            csv = Some(probability_table(&report.labels, &report.probabilities));
            json!({ "functional": to_value(&report)? })
        }
        Command::MixedCoherence { levels, steps } => {
            let osc = TruncatedOscillator::new(*levels, 1.0)?;
            let report = osc.mixed_basis_coherence_demo(*steps)?;
            json!({
                "all_ratios_unity_within": tol.unity,
                "all_ratios_unity": report.ground_to_ground.max_deviation_from_unity <= tol.unity
                    && !report.ground_to_ground.pairs.is_empty(),
                "report": to_value(&report)?,
            })
        }
        Command::Functional { schedule } => {
            let input = read_json::<ScheduleFile>(schedule)?.into_input()?;
            let d = decoherence_functional(&input.schedule, &input.initial)?.with_floor(tol.ratio_floor);
            let report = FunctionalReport::new(&d, tol.epsilon);
            csv = Some(probability_table(&report.labels, &report.probabilities));
            to_value(&report)?
        }
        Command::TsFunctional { schedule } => {
            let input = read_json::<ScheduleFile>(schedule)?.into_input()?;
            let endpoints = input
                .endpoints
                .ok_or_else(|| Error::InvalidSchedule("time-symmetric functional needs final_state".into()))?;
            let d = time_symmetric_functional(&input.schedule, &endpoints)?.with_floor(tol.ratio_floor);
            let report = FunctionalReport::new(&d, tol.epsilon);
            csv = Some(probability_table(&report.labels, &report.probabilities));
            json!({ "normalization": d.normalization(), "functional": to_value(&report)? })
        }
        Command::LindbladPropagate {
            model,
            horizon,
            dt,
            method,
        } => {
            let m = model.build()?;
            let rho = model.initial_state(m.dim())?;
            let method = match method {
                Method::Exact => PropagationMethod::Exact,
                Method::Rk4 => PropagationMethod::Rk4 {
                    tolerance: tol.structural,
                },
                Method::Auto => PropagationMethod::Auto,
            };
            let steps = crate::openquantum::step_count(*horizon, *dt)?;
            let mut header = vec!["time".to_string()];
            header.extend((0..m.dim()).map(|i| format!("p{i}")));
            header.push("trace".into());
            let mut table = Table {
                header,
                rows: Vec::new(),
            };
            let mut last = rho.clone();
            for k in 0..=steps {
                let t = k as f64 * dt;
                last = propagate(&m, &rho, t, method)?;
                let mut row = vec![t.to_string()];
                row.extend((0..m.dim()).map(|i| last.operator().get(i, i).re.to_string()));
                row.push(last.operator().trace().re.to_string());
                table.rows.push(row);
            }
            csv = Some(table);
            json!({
                "model": to_value(&ModelFile::from_model(&m))?,
                "initial": operator_json(rho.operator())?,
                "final_time": horizon,
                "final_state": operator_json(last.operator())?,
            })
        }
        Command::JumpEnsemble {
            model,
            dt,
            horizon,
            trajectories,
            exact_oracle,
            sample_every,
        } => {
            let m = model.build()?;
            let rho = model.initial_state(m.dim())?;
            let config = EnsembleConfig {
                horizon: *horizon,
                dt: *dt,
                trajectories: *trajectories,
                seed,
                sample_every: *sample_every,
                exact_oracle: *exact_oracle == Switch::On,
                record_jumps: true,
            };
            let r = ensemble_average(&m, &rho, config)?;
            let mut table = Table::new(&["trajectory_id", "time", "channel", "event"]);
            for (k, e) in &r.jumps {
                table.push([k.to_string(), e.time.to_string(), e.channel.to_string(), "jump".to_string()]);
            }
            csv = Some(table);
            let snapshots: Vec<Value> = r
                .snapshots
                .iter()
                .map(|s| {
                    json!({
                        "time": s.time,
                        "populations": (0..m.dim()).map(|i| s.mean.operator().get(i, i).re).collect::<Vec<_>>(),
                        "statistical_error": s.statistical_error,
                        "trace_distance_to_exact": s.trace_distance_to_exact,
                    })
                })
                .collect();
            let last = r.final_snapshot();
            json!({
                "trajectories": trajectories,
                "total_jumps": r.total_jumps,
                "dt_bias_scale": r.dt_bias_scale,
                "ensemble_state": operator_json(last.mean.operator())?,
                "error_bars_re": last.stderr_re.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
                "error_bars_im": last.stderr_im.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
                "statistical_error": last.statistical_error,
                "trace_distance_to_exact": last.trace_distance_to_exact,
                "snapshots": snapshots,
            })
        }
        Command::PovmStepOrder { model, dts } => {
            let m = model.build()?;
            let rho = model.initial_state(m.dim())?;
            let r = step_order_fit(&m, &rho, dts)?;
            let mut table = Table::new(&["dt", "error"]);
            for (dt, e) in r.dts.iter().zip(&r.errors) {
                table.push([dt.to_string(), e.to_string()]);
            }
            csv = Some(table);
            to_value(&r)?
        }
        Command::Relaxation {
            model,
            events,
            spacing_over_tau,
        } => {
            let m = model.build()?;
            let rho = model.initial_state(m.dim())?;
            let d = m.dim();
            let mut rng = stream(seed, 0);
            let families = (0..*events)
                .map(|_| sample_random_family(d, &vec![1; d], &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let tau = 1.0 / spectral_gap(&m)?;
            let mut table = Table::new(&["spacing_over_tau", "max_ratio", "gap_bound", "marginal_deviation"]);
            let mut reports = Vec::new();
            for &x in spacing_over_tau {
                let r = relaxation_decoherence_experiment(&m, &families, x * tau, &rho)?;
                table.push([
                    x.to_string(),
                    r.max_ratio.to_string(),
                    r.gap_bound.to_string(),
                    r.marginal_deviation.to_string(),
                ]);
                reports.push(r);
            }
            csv = Some(table);
            json!({ "relaxation_time": tau, "points": to_value(&reports)? })
        }
        Command::Cosmo {
            action,
            lambda0,
            lambda1,
            lambda1_range,
            c,
            brain_de,
            brain_ds,
        } => {
            let brain = FluctuationSpec::new(brain_de.unwrap_or(0.0), *brain_ds)?;
            let range = match (action, lambda1_range) {
                (_, Some(r)) => Some(parse_range(r)?),
                (Some(CosmoAction::Sweep), None) => {
                    return Err(Error::InvalidParameter("sweep needs --lambda1-range".into()))
                }
                (None, None) => None,
            };
            match (range, lambda1) {
                (Some((from, to, steps)), _) => {
                    let rows = sweep(*lambda0, *c, from, to, steps, &brain)?;
                    let mut table = Table::new(&["lambda1", "log_p_reinflate", "log_tau1", "log_p_brain", "log_odds"]);
                    for r in &rows {
                        table.push([
                            r.lambda_low.to_string(),
                            r.log_p_reinflation.to_string(),
                            r.log_recurrence_time.to_string(),
                            r.log_p_brain.to_string(),
                            r.log_odds.to_string(),
                        ]);
                    }
                    csv = Some(table);
                    json!({ "rows": to_value(&rows)? })
                }
                (None, Some(l1)) => {
                    let params = ReinflationParams::new(*lambda0, *l1, *c)?;
                    let forms = ReinflationForms::of(&params);
                    let log_p = crate::cosmo::reinflation_log_probability(&params)?;
                    let rec = recurrence_log_time(&params)?;
                    let mut table = Table::new(&["lambda1", "log_p_reinflate", "log_tau1"]);
                    table.push([l1.to_string(), log_p.to_string(), rec.log_time.to_string()]);
                    csv = Some(table);
                    let cmp = match brain_de {
                        Some(_) => Some(compare_boltzmann_brain(&params, &brain)?),
                        None => None,
                    };
                    json!({
                        "params": to_value(&params)?,
                        "energy": forms.energy,
                        "log_p_reinflate": log_p,
                        "forms": to_value(&forms)?,
                        "recurrence": to_value(&rec)?,
                        "brain": to_value(&cmp)?,
                    })
                }
                (None, None) => return Err(Error::InvalidParameter("give --lambda1 or --lambda1-range".into())),
            }
        }
        Command::RandomHistories {
            dim,
            events,
            rank,
            samples,
            initial,
            capacity,
            capacity_ranks,
            capacity_samples,
            threshold,
        } => {
            let spec = RandomScheduleSpec::uniform(*dim, *events, *rank, *samples, seed)?;
            let report = typical_ratio_experiment(&spec, (*initial).into())?;
            let mut table = Table::new(&["sample", "pair", "p", "p_prime", "ratio"]);
            for r in &report.rows {
                table.push([
                    r.sample.to_string(),
                    format!("{}|{}", r.first, r.second),
                    r.p.to_string(),
                    r.p_prime.to_string(),
                    r.ratio.to_string(),
                ]);
            }
            csv = Some(table);
            let cap = if *capacity {
                Some(information_capacity_check(*dim, *events, capacity_ranks, *capacity_samples, seed, *threshold)?)
            } else {
                None
            };
            json!({ "typical": to_value(&report)?, "capacity": to_value(&cap)? })
        }
        Command::Selftest => {
            let outcomes = acceptance::run_all();
            passed = outcomes.iter().all(|o| o.passed);
            let mut table = Table::new(&["criterion", "passed", "seconds", "detail"]);
            for o in &outcomes {
                table.push([o.id.to_string(), o.passed.to_string(), format!("{:.3}", o.seconds), o.detail.clone()]);
            }
            csv = Some(table);
            // wall-clock times stay in the CSV so the JSON is reproducible
            let list: Vec<Value> = outcomes
                .iter()
                .map(|o| json!({ "id": o.id, "title": o.title, "passed": o.passed, "detail": o.detail }))
                .collect();
            json!({ "passed": passed, "criteria": list })
        }
    };
    let envelope = Envelope {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        tolerances: tol,
        config: &cli.command,
        result,
    };
    let mut json = serde_json::to_string_pretty(&envelope)?;
    json.push('\n');
    Ok(Artifacts {
        json,
        csv: csv.map(|t| t.to_csv()).transpose()?,
        passed,
    })
}

/// Caps the global thread pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::InvalidParameter(format!("{THREADS_ENV} must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(())
}

/// Parses `args`, runs, writes artifacts and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    let artifacts = match execute(&cli) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let write = |path: &PathBuf, text: &str| {
        std::fs::write(path, text).map_err(|e| Error::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    };
    let written = match &cli.common.out {
        Some(p) => write(p, &artifacts.json),
        None => {
            print!("{}", artifacts.json);
            Ok(())
        }
    }
    .and_then(|_| match (&cli.common.csv, &artifacts.csv) {
        (Some(p), Some(text)) => write(p, text),
        (Some(_), None) => Err(Error::InvalidParameter(format!("{} has no CSV output", cli.command.name()))),
        _ => Ok(()),
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    if artifacts.passed {
        0
    } else {
        EXIT_ASSERTION
    }
}
