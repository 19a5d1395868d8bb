//! File formats: schedule and model inputs, functional reports, CSV rows.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histories::{
    DecoherenceFunctional, Endpoints, Event, EventSchedule, KrausFamily, MeasurementFamily, Propagation,
};
use crate::openquantum::{Channel, LindbladModel};
use crate::qops::{DensityMatrix, Operator, ProjectorFamily};

/// Reads and parses a JSON file, tagging errors with the path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let tag = |message: String| Error::Input {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| tag(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| tag(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Projective,
    Kraus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventFile {
    pub t: f64,
    pub family: Vec<Operator>,
    pub kind: FamilyKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PropagatorFile {
    Hamiltonian(Operator),
    Unitaries(Vec<Operator>),
}

/// `{"dim", "initial_state", "final_state"?, "final_time"?, "events", "propagator"}`
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub dim: usize,
    pub initial_state: Operator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<Operator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_time: Option<f64>,
    pub events: Vec<EventFile>,
    pub propagator: PropagatorFile,
}

/// Parsed contents of a [`ScheduleFile`].
#[derive(Debug, Clone)]
pub struct ScheduleInput {
    pub schedule: EventSchedule,
    pub initial: DensityMatrix,
    pub endpoints: Option<Endpoints>,
}

fn check_dim(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::InvalidSchedule(format!("{what} has dimension {found}, expected {expected}")));
    }
    Ok(())
}

impl ScheduleFile {
    pub fn into_input(self) -> Result<ScheduleInput> {
        check_dim("initial_state", self.dim, self.initial_state.dim())?;
        let initial = DensityMatrix::new(self.initial_state)?;
        let events = self
            .events
            .into_iter()
            .map(|e| {
                for op in &e.family {
                    check_dim("event family member", self.dim, op.dim())?;
                }
                let family: MeasurementFamily = match e.kind {
                    FamilyKind::Projective => ProjectorFamily::new(e.family)?.into(),
                    FamilyKind::Kraus => KrausFamily::new(e.family)?.into(),
                };
                Ok(Event::new(e.t, family))
            })
            .collect::<Result<Vec<_>>>()?;
        let propagation = match self.propagator {
            PropagatorFile::Hamiltonian(h) => Propagation::Hamiltonian(h),
            PropagatorFile::Unitaries(us) => Propagation::Unitaries(us),
        };
        let schedule = EventSchedule::new(events, propagation)?;
        let endpoints = match self.final_state {
            Some(f) => {
                check_dim("final_state", self.dim, f.dim())?;
                Some(Endpoints {
                    initial: initial.clone(),
                    final_state: DensityMatrix::new(f)?,
                    final_time: self.final_time,
                })
            }
            None => None,
        };
        Ok(ScheduleInput {
            schedule,
            initial,
            endpoints,
        })
    }
}

/// `{"dim", "H", "channels": [{"L", "gamma"}]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dim: usize,
    #[serde(rename = "H")]
    pub hamiltonian: Operator,
    pub channels: Vec<Channel>,
}

impl ModelFile {
    pub fn into_model(self) -> Result<LindbladModel> {
        check_dim("H", self.dim, self.hamiltonian.dim())?;
        LindbladModel::new(self.hamiltonian, self.channels)
    }

    pub fn from_model(model: &LindbladModel) -> Self {
        Self {
            dim: model.dim(),
            hamiltonian: model.hamiltonian().clone(),
            channels: model.channels().to_vec(),
        }
    }
}

/// JSON view of a decoherence functional.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    pub labels: Vec<String>,
    #[serde(rename = "D_re", skip_serializing_if = "Option::is_none")]
    pub d_re: Option<Vec<Vec<f64>>>,
    #[serde(rename = "D_im", skip_serializing_if = "Option::is_none")]
    pub d_im: Option<Vec<Vec<f64>>>,
    pub probabilities: Vec<f64>,
    pub probability_sum: f64,
    /// Largest defined off-diagonal ratio (0 when none is defined).
    pub max_ratio: f64,
    pub max_off_diagonal: f64,
    pub epsilon: f64,
    pub decoherent: bool,
    pub defined_pairs: usize,
    pub pruned_pairs: usize,
}

impl FunctionalReport {
    pub fn new(d: &DecoherenceFunctional, epsilon: f64) -> Self {
        let verdict = d.is_decoherent(epsilon);
        let table = d.is_dense().then(|| d.to_dense());
        let n = d.len();
        let split = |f: fn(&crate::qops::C64) -> f64| {
            table
                .as_ref()
                .map(|m| (0..n).map(|i| (0..n).map(|j| f(&m[(i, j)])).collect()).collect())
        };
        Self {
            labels: d.labels().iter().map(ToString::to_string).collect(),
            d_re: split(|z| z.re),
            d_im: split(|z| z.im),
            probabilities: d.diagonal(),
            probability_sum: d.diagonal_sum(),
            max_ratio: verdict.worst.as_ref().map_or(0.0, |w| w.ratio),
            max_off_diagonal: d.max_off_diagonal(),
            epsilon,
            decoherent: verdict.decoherent,
            defined_pairs: verdict.defined_pairs,
            pruned_pairs: verdict.pruned_pairs,
        }
    }
}

/// Rows for a CSV artifact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::decoherence_functional;

    const QUBIT: &str = r#"{
        "dim": 2,
        "initial_state": {"dim": 2, "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]},
        "events": [
            {"t": 0.0, "kind": "projective", "family": [
                {"dim": 2, "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]},
                {"dim": 2, "re": [[0, 0], [0, 1]], "im": [[0, 0], [0, 0]]}]},
            {"t": 1.0, "kind": "projective", "family": [
                {"dim": 2, "re": [[0.5, 0.5], [0.5, 0.5]], "im": [[0, 0], [0, 0]]},
                {"dim": 2, "re": [[0.5, -0.5], [-0.5, 0.5]], "im": [[0, 0], [0, 0]]}]}
        ],
        "propagator": {"hamiltonian": {"dim": 2, "re": [[0, 0], [0, 0]], "im": [[0, 0], [0, 0]]}}
    }"#;

    #[test]
    fn schedule_file_round_trip() {
        let file: ScheduleFile = serde_json::from_str(QUBIT).unwrap();
        let input = file.clone().into_input().unwrap();
        assert_eq!(input.schedule.len(), 2);
        assert!(input.endpoints.is_none());
        let d = decoherence_functional(&input.schedule, &input.initial).unwrap();
        let rep = FunctionalReport::new(&d, 1e-6);
        assert_eq!(rep.labels, ["0.0", "0.1", "1.0", "1.1"]);
        assert!((rep.probabilities[0] - 0.5).abs() < 1e-12);
        let again: ScheduleFile = serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap();
        assert_eq!(again.events.len(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = QUBIT.replacen("\"dim\": 2,", "\"dim\": 2, \"colour\": 1,", 1);
        assert!(serde_json::from_str::<ScheduleFile>(&bad).is_err());
    }

    #[test]
    fn model_file_parses() {
        let text = r#"{"dim": 2,
            "H": {"dim": 2, "re": [[0, 0], [0, 1]], "im": [[0, 0], [0, 0]]},
            "channels": [{"L": {"dim": 2, "re": [[0, 1], [0, 0]], "im": [[0, 0], [0, 0]]}, "gamma": 0.5}]}"#;
        let m: ModelFile = serde_json::from_str(text).unwrap();
        let model = m.into_model().unwrap();
        assert_eq!(model.channels().len(), 1);
        assert_eq!(model.channels()[0].rate, 0.5);
    }

    #[test]
    fn csv_quotes_and_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.push(["1".to_string(), "x,y".to_string()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n1,\"x,y\"\n");
    }
}
