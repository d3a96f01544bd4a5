//! Experiment configuration: a single JSON document, every field
//! overridable from the command line (flags win).

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ortho_core::{
    haar_sample_with_rng, polar_orthogonal_factor, read_matrix, DifferentiableLoss,
    LinearTraceLoss, Mat, OrthogonalMatrix, Prng, ProcrustesLoss, RegressionLoss, Retraction,
};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Equivalence,
    Depth,
    Flow,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Procrustes,
    Regression,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RetractionKind {
    Exp,
    Cayley,
    Projection,
    ProjectionQr,
}

impl RetractionKind {
    pub fn to_core(self) -> Retraction {
        match self {
            RetractionKind::Exp => Retraction::Exponential,
            RetractionKind::Cayley => Retraction::Cayley,
            RetractionKind::Projection => Retraction::ProjectionPolar,
            RetractionKind::ProjectionQr => Retraction::ProjectionQr,
        }
    }

    /// The deep/shallow coincidence is exact (to rounding) only for the
    /// exponential retraction; for the others the harness reports the
    /// deviation without asserting a threshold.
    pub fn asserted(self) -> bool {
        matches!(self, RetractionKind::Exp)
    }
}

/// How the deeper network of a depth-independence pair is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DepthConstruction {
    /// Append identity layers (equal products by construction).
    IdentityPad,
    /// Split the first layer through a chain of Haar factors Q·Qᵀ.
    Split,
}

/// Loss specification: the kind plus either a seed (synthetic data drawn
/// from the experiment RNG stream) or file paths for the matrices.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LossSpec {
    pub kind: Option<LossKind>,
    /// Overrides the experiment stream for loss data when set.
    pub seed: Option<u64>,
    pub target_path: Option<PathBuf>,
    pub inputs_path: Option<PathBuf>,
    pub outputs_path: Option<PathBuf>,
    pub coefficient_path: Option<PathBuf>,
}

impl LossSpec {
    pub fn kind(&self) -> LossKind {
        self.kind.unwrap_or(LossKind::Procrustes)
    }

    /// Default step size per loss kind; the theorem is step-size-agnostic,
    /// these just keep the shipped runs well conditioned.
    pub fn default_eta(&self) -> f64 {
        match self.kind() {
            LossKind::Procrustes | LossKind::Trace => 0.1,
            LossKind::Regression => 0.01,
        }
    }
}

/// A loss instance plus the known manifold minimizer when one exists,
/// used by convergence checks and determinant matching.
pub struct BuiltLoss {
    pub loss: Box<dyn DifferentiableLoss>,
    pub minimizer: Option<OrthogonalMatrix>,
}

fn read_matrix_file(path: &Path) -> anyhow::Result<Mat> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_matrix(&mut BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

impl LossSpec {
    pub fn build(&self, p: usize, rng: &mut Prng) -> anyhow::Result<BuiltLoss> {
        let mut own_rng;
        let rng: &mut Prng = match self.seed {
            Some(seed) => {
                own_rng = ortho_core::substream(seed, 0);
                &mut own_rng
            }
            None => rng,
        };
        match self.kind() {
            LossKind::Procrustes => {
                let target = match &self.target_path {
                    Some(path) => OrthogonalMatrix::new(read_matrix_file(path)?)?,
                    None => haar_sample_with_rng(p, rng)?,
                };
                if target.dim() != p {
                    bail!("procrustes target is {}x{0}, expected {p}x{p}", target.dim());
                }
                Ok(BuiltLoss {
                    minimizer: Some(target.clone()),
                    loss: Box::new(ProcrustesLoss::new(target)),
                })
            }
            LossKind::Regression => {
                let (x, y, minimizer) = match (&self.inputs_path, &self.outputs_path) {
                    (Some(xp), Some(yp)) => (read_matrix_file(xp)?, read_matrix_file(yp)?, None),
                    (None, None) => {
                        let teacher = haar_sample_with_rng(p, rng)?;
                        let x = gaussian(p, 2 * p, rng);
                        let y = teacher.matrix() * &x;
                        (x, y, Some(teacher))
                    }
                    _ => bail!("regression loss needs both inputs_path and outputs_path"),
                };
                if x.nrows() != p {
                    bail!("regression data has {} rows, expected {p}", x.nrows());
                }
                Ok(BuiltLoss {
                    loss: Box::new(RegressionLoss::new(x, y)?),
                    minimizer,
                })
            }
            LossKind::Trace => {
                let c = match &self.coefficient_path {
                    Some(path) => read_matrix_file(path)?,
                    None => gaussian(p, p, rng),
                };
                if c.nrows() != p || c.ncols() != p {
                    bail!("trace coefficient is {}x{}, expected {p}x{p}", c.nrows(), c.ncols());
                }
                let minimizer = polar_orthogonal_factor(&(-&c))?;
                Ok(BuiltLoss {
                    loss: Box::new(LinearTraceLoss::new(c)?),
                    minimizer: Some(minimizer),
                })
            }
        }
    }
}

/// The full experiment description. Serialized into every report for
/// reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Matrix dimensions of the grid.
    pub p: Vec<usize>,
    /// Network depths of the grid (equivalence); the depth pair (depth
    /// experiment).
    pub depth: Vec<usize>,
    /// Step size; per-loss default when absent.
    pub eta: Option<f64>,
    /// Decreasing step sizes for the flow comparison.
    pub eta_sequence: Vec<f64>,
    pub steps: usize,
    pub loss: LossSpec,
    pub retraction: RetractionKind,
    pub seed: u64,
    /// Max-over-steps trajectory deviation threshold.
    pub threshold: f64,
    /// Flow comparison horizon and reference integrator step.
    pub t_end: f64,
    pub dt: f64,
    /// Convergence tolerances: loss ratio and distance to the known
    /// minimizer.
    pub loss_ratio_tol: f64,
    pub minimizer_tol: f64,
    /// Negative control: sequential (non-simultaneous) deep updates.
    pub sequential: bool,
    /// Negative control: mismatched initial products in the depth pair.
    pub mismatched_products: bool,
    pub depth_construction: DepthConstruction,
    pub record_stride: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Equivalence,
            p: vec![4],
            depth: vec![2],
            eta: None,
            eta_sequence: vec![0.1, 0.05, 0.025],
            steps: 200,
            loss: LossSpec::default(),
            retraction: RetractionKind::Exp,
            seed: 42,
            threshold: 1e-8,
            t_end: 1.0,
            dt: 1e-3,
            loss_ratio_tol: 1e-8,
            minimizer_tol: 1e-6,
            sequential: false,
            mismatched_products: false,
            depth_construction: DepthConstruction::IdentityPad,
            record_stride: 1,
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// The fixed acceptance grid.
    pub fn paper_preset(experiment: ExperimentKind) -> Self {
        let base = Self::default();
        match experiment {
            ExperimentKind::Equivalence => Self {
                experiment,
                p: vec![2, 4, 16, 64],
                depth: vec![1, 2, 3, 8],
                eta: Some(0.1),
                steps: 200,
                ..base
            },
            ExperimentKind::Depth => Self {
                experiment,
                p: vec![8],
                depth: vec![2, 5],
                eta: Some(0.1),
                steps: 200,
                ..base
            },
            ExperimentKind::Flow => Self {
                experiment,
                p: vec![4],
                eta_sequence: vec![0.1, 0.05, 0.025],
                t_end: 1.0,
                dt: 1e-3,
                ..base
            },
            ExperimentKind::Convergence => Self {
                experiment,
                p: vec![3, 8],
                eta: None,
                steps: 4000,
                ..base
            },
        }
    }

    pub fn effective_eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| self.loss.default_eta())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.p.is_empty() {
            bail!("grid has no dimensions p");
        }
        if self.p.contains(&0) {
            bail!("p must be ≥ 1");
        }
        match self.experiment {
            ExperimentKind::Equivalence => {
                if self.depth.is_empty() {
                    bail!("grid has no depths");
                }
                if self.depth.contains(&0) {
                    bail!("depth must be ≥ 1");
                }
            }
            ExperimentKind::Depth => {
                if self.depth.len() != 2 {
                    bail!("depth experiment needs exactly two depths, got {:?}", self.depth);
                }
                if self.depth.contains(&0) {
                    bail!("depth must be ≥ 1");
                }
            }
            ExperimentKind::Flow => {
                if self.eta_sequence.is_empty() {
                    bail!("flow experiment needs a step-size sequence");
                }
                if self.eta_sequence.windows(2).any(|w| w[1] >= w[0]) {
                    bail!("flow step sizes must be strictly decreasing");
                }
                if !(self.t_end >= 0.0) || !(self.dt > 0.0) {
                    bail!("need t_end ≥ 0 and dt > 0");
                }
            }
            ExperimentKind::Convergence => {}
        }
        let eta = self.effective_eta();
        if !(eta > 0.0) {
            bail!("step size must be positive, got {eta}");
        }
        if !(self.threshold > 0.0) || !(self.loss_ratio_tol > 0.0) || !(self.minimizer_tol > 0.0) {
            bail!("tolerances must be positive");
        }
        if self.record_stride == 0 {
            bail!("record stride must be ≥ 1");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        serde_json::from_reader(BufReader::new(file))
            .with_context(|| format!("parsing {}", path.display()))
    }
}
