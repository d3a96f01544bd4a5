//! Machine-readable experiment reports (`report.json`).

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind, LossKind, RetractionKind};

#[derive(Debug, Clone, Serialize)]
pub struct CellParams {
    pub p: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_pair: Option<(usize, usize)>,
    pub eta: f64,
    pub steps: usize,
    pub loss: LossKind,
    pub retraction: RetractionKind,
    /// RNG stream index of this cell under the master seed.
    pub stream: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub params: CellParams,
    /// Max-over-steps ‖Π_a(k) − Π_b(k)‖_F (equivalence, depth) or the
    /// endpoint gap to the flow (flow cells).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_step: Option<usize>,
    /// First step at which the deviation exceeded the threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_exceed_step: Option<usize>,
    /// `null` when the criterion is reported but not asserted (e.g.
    /// non-exponential retractions).
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_defect: Option<f64>,
    pub runtime_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimizer_distance: Option<f64>,
}

impl CellReport {
    pub fn empty(params: CellParams) -> Self {
        Self {
            params,
            deviation: None,
            worst_step: None,
            first_exceed_step: None,
            pass: None,
            max_defect: None,
            runtime_ms: 0,
            error: None,
            final_loss: None,
            initial_loss: None,
            generator_norm: None,
            minimizer_distance: None,
        }
    }

    pub fn errored(params: CellParams, error: String, started: Instant) -> Self {
        Self {
            pass: Some(false),
            error: Some(error),
            runtime_ms: started.elapsed().as_millis(),
            ..Self::empty(params)
        }
    }

    /// One human-readable summary line per cell.
    pub fn summary_line(&self) -> String {
        let p = self.params.p;
        let shape = match (self.params.depth, self.params.depth_pair) {
            (_, Some((a, b))) => format!("p={p} L={a} vs L'={b}"),
            (Some(depth), None) => format!("p={p} L={depth}"),
            (None, None) => format!("p={p}"),
        };
        let verdict = match (&self.error, self.pass) {
            (Some(e), _) => format!("ERROR ({e})"),
            (None, Some(true)) => "PASS".to_string(),
            (None, Some(false)) => "FAIL".to_string(),
            (None, None) => "REPORTED".to_string(),
        };
        let mut extras = Vec::new();
        if let Some(d) = self.deviation {
            extras.push(format!("deviation={d:.3e}"));
        }
        if let Some(d) = self.minimizer_distance {
            extras.push(format!("dist={d:.3e}"));
        }
        if let (Some(f), Some(i)) = (self.final_loss, self.initial_loss) {
            extras.push(format!("loss {i:.3e} -> {f:.3e}"));
        }
        if let Some(step) = self.first_exceed_step {
            extras.push(format!("first_exceed_step={step}"));
        }
        format!(
            "{verdict:8} {shape} eta={} steps={} {}",
            self.params.eta,
            self.params.steps,
            extras.join(" ")
        )
    }
}

/// Extra summary for the flow comparison.
#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    /// One endpoint gap per step size, largest step first.
    pub endpoint_gaps: Vec<f64>,
    /// Consecutive-gap ratios; empty when everything is at rounding level.
    pub ratios: Vec<f64>,
    pub ratio_band: (f64, f64),
    pub ratios_pass: bool,
    /// RK4 endpoint-error contraction under dt halving (≈16 when clean).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rk4_ratio: Option<f64>,
    pub rk4_pass: bool,
    /// Reference-endpoint movement under dt → dt/2.
    pub refinement_gap: f64,
    pub max_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSummary>,
    pub all_pass: bool,
    pub any_error: bool,
}

impl Report {
    pub fn grid(experiment: ExperimentKind, config: ExperimentConfig, cells: Vec<CellReport>) -> Self {
        let any_error = cells.iter().any(|c| c.error.is_some());
        let all_pass = cells.iter().all(|c| c.pass != Some(false));
        Self {
            experiment,
            config,
            cells,
            flow: None,
            all_pass,
            any_error,
        }
    }

    pub fn write_json(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("report.json");
        let file = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }
}
