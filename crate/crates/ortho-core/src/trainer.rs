//! Training loops: shallow Riemannian gradient descent on the product,
//! deep descent on the factorization, and the continuous gradient-flow
//! integrator. All loops are single-threaded and deterministic.

use std::io::Write;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::expm::matrix_exp_skew;
use crate::loss::DifferentiableLoss;
use crate::manifold::{polar_orthogonal_factor, Retraction};
use crate::matrix::{orthogonality_defect, Mat};
use crate::network::{deep_step, product, NetworkWeights, REORTHO_TRIGGER};
use crate::orthogonal::OrthogonalMatrix;
use crate::qr::qr_orthonormalize;
use crate::skew::skew_part;

/// Loss above this is treated as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// Per-step log entry. For discrete runs `t = step · η`; for flow runs
/// `t` is integration time and `step` counts integrator steps.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub t: f64,
    pub loss: f64,
    /// ‖Skew(G(Π)Πᵀ)‖_F at the recorded iterate.
    pub generator_norm: f64,
    pub product: OrthogonalMatrix,
    /// Largest per-layer defect (equals `product_defect` for shallow runs).
    pub max_layer_defect: f64,
    pub product_defect: f64,
}

/// A run that hit non-finite or absurd loss values. Carries everything
/// recorded up to and including the last good step.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("run diverged at step {step}")]
    Diverged {
        step: usize,
        records: Vec<TrajectoryRecord>,
    },
    #[error(transparent)]
    Numeric(#[from] Error),
}

pub type TrainResult = std::result::Result<Vec<TrajectoryRecord>, TrainError>;

/// Plain training configuration for one run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub p: usize,
    pub depth: usize,
    pub eta: f64,
    pub steps: usize,
    pub seed: u64,
    pub retraction: Retraction,
    pub record_stride: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidInput("p must be ≥ 1".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidInput("depth must be ≥ 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidInput("step size must be positive".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidInput("record stride must be ≥ 1".into()));
        }
        Ok(())
    }
}

fn diverged(loss: f64) -> bool {
    !loss.is_finite() || loss.abs() > DIVERGENCE_LOSS
}

fn shallow_record(
    step: usize,
    t: f64,
    pi: &OrthogonalMatrix,
    loss: &dyn DifferentiableLoss,
) -> Result<(TrajectoryRecord, crate::skew::SkewSymmetricMatrix)> {
    let value = loss.value(pi.matrix());
    let g = loss.euclidean_gradient(pi.matrix());
    let s = skew_part(&(g * pi.matrix().transpose()))?;
    let defect = pi.defect();
    Ok((
        TrajectoryRecord {
            step,
            t,
            loss: value,
            generator_norm: s.norm(),
            product: pi.clone(),
            max_layer_defect: defect,
            product_defect: defect,
        },
        s,
    ))
}

/// Riemannian gradient descent directly on the product:
/// Π ← R(Π, Skew(G(Π)Πᵀ), η). Record 0 is the initial state.
pub fn shallow_rgd(
    pi0: &OrthogonalMatrix,
    loss: &dyn DifferentiableLoss,
    eta: f64,
    steps: usize,
    retraction: Retraction,
) -> TrainResult {
    let mut records = Vec::with_capacity(steps + 1);
    let mut pi = pi0.clone();
    for step in 0..=steps {
        let (record, generator) = shallow_record(step, step as f64 * eta, &pi, loss)?;
        let bad = diverged(record.loss);
        records.push(record);
        if bad {
            return Err(TrainError::Diverged { step, records });
        }
        if step == steps {
            break;
        }
        let stepped = retraction.apply(&pi, &generator, eta)?;
        pi = if stepped.defect() > REORTHO_TRIGGER {
            qr_orthonormalize(stepped.matrix())?
        } else {
            stepped
        };
    }
    Ok(records)
}

/// Riemannian gradient descent on the factorization via simultaneous
/// per-layer updates. Records carry the (re-computed) product iterate.
pub fn deep_rgd(
    weights0: &NetworkWeights,
    loss: &dyn DifferentiableLoss,
    eta: f64,
    steps: usize,
    retraction: Retraction,
) -> TrainResult {
    let mut records = Vec::with_capacity(steps + 1);
    let mut weights = weights0.clone();
    for step in 0..=steps {
        let pi = product(&weights);
        let value = loss.value(pi.matrix());
        let g = loss.euclidean_gradient(pi.matrix());
        let generator_norm = skew_part(&(g * pi.matrix().transpose()))?.norm();
        let record = TrajectoryRecord {
            step,
            t: step as f64 * eta,
            loss: value,
            generator_norm,
            product_defect: pi.defect(),
            max_layer_defect: weights.max_layer_defect(),
            product: pi,
        };
        let bad = diverged(record.loss);
        records.push(record);
        if bad {
            return Err(TrainError::Diverged { step, records });
        }
        if step == steps {
            break;
        }
        weights = deep_step(&weights, loss, eta, retraction)?.weights;
    }
    Ok(records)
}

/// Integrates the Riemannian gradient flow dΠ/dt = −Skew(G(Π)Πᵀ)·Π with
/// classical RK4 in the ambient space, polar-projecting back onto O(p)
/// after every step. The step count is `round(t_end / dt)` and the actual
/// step is adjusted so the integration ends exactly at `t_end`.
pub fn flow_integrate(
    pi0: &OrthogonalMatrix,
    loss: &dyn DifferentiableLoss,
    t_end: f64,
    dt: f64,
) -> TrainResult {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and t_end ≥ 0".into()).into());
    }
    let n = (t_end / dt).round().max(0.0) as usize;
    let h = if n > 0 { t_end / n as f64 } else { dt };

    let velocity = |m: &Mat| -> Result<Mat> {
        let g = loss.euclidean_gradient(m);
        let s = skew_part(&(g * m.transpose()))?;
        Ok(-(s.matrix() * m))
    };

    let mut records = Vec::with_capacity(n + 1);
    let mut pi = pi0.clone();
    for step in 0..=n {
        let (record, _) = shallow_record(step, step as f64 * h, &pi, loss)?;
        let bad = diverged(record.loss);
        records.push(record);
        if bad {
            return Err(TrainError::Diverged { step, records });
        }
        if step == n {
            break;
        }
        let y = pi.matrix();
        let k1 = velocity(y)?;
        let k2 = velocity(&(y + &k1 * (h / 2.0)))?;
        let k3 = velocity(&(y + &k2 * (h / 2.0)))?;
        let k4 = velocity(&(y + &k3 * h))?;
        let stepped = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        pi = polar_orthogonal_factor(&stepped)?;
    }
    Ok(records)
}

/// Lie–Euler flow integrator: Π ← exp(−dt·Skew(G(Π)Πᵀ))·Π. First-order
/// accurate; literally the gradient-descent iterate with η = dt, so it
/// stays on the manifold without projection.
pub fn flow_integrate_lie_euler(
    pi0: &OrthogonalMatrix,
    loss: &dyn DifferentiableLoss,
    t_end: f64,
    dt: f64,
) -> TrainResult {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and t_end ≥ 0".into()).into());
    }
    let n = (t_end / dt).round().max(0.0) as usize;
    let h = if n > 0 { t_end / n as f64 } else { dt };

    let mut records = Vec::with_capacity(n + 1);
    let mut pi = pi0.clone();
    for step in 0..=n {
        let (record, generator) = shallow_record(step, step as f64 * h, &pi, loss)?;
        let bad = diverged(record.loss);
        records.push(record);
        if bad {
            return Err(TrainError::Diverged { step, records });
        }
        if step == n {
            break;
        }
        let e = matrix_exp_skew(&generator.scale(-h));
        let stepped = e.matrix() * pi.matrix();
        pi = if orthogonality_defect(&stepped) > REORTHO_TRIGGER {
            qr_orthonormalize(&stepped)?
        } else {
            OrthogonalMatrix::new(stepped)?
        };
    }
    Ok(records)
}

/// Writes records as CSV with the columns
/// `step,t,loss,generator_norm,max_layer_defect,product_defect`,
/// keeping every `stride`-th record (plus the last).
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    records: &[TrajectoryRecord],
    stride: usize,
) -> Result<()> {
    let stride = stride.max(1);
    writeln!(out, "step,t,loss,generator_norm,max_layer_defect,product_defect")?;
    for (k, r) in records.iter().enumerate() {
        if k % stride != 0 && k != records.len() - 1 {
            continue;
        }
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.step, r.t, r.loss, r.generator_norm, r.max_layer_defect, r.product_defect
        )?;
    }
    Ok(())
}
