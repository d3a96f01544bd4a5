//! Differentiable objectives on p×p matrices.
//!
//! All losses are total on finite matrices, not only orthogonal ones,
//! since finite-difference probes step off the manifold.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::orthogonal::OrthogonalMatrix;

/// A loss ℓ on p×p matrices exposing its value and Euclidean gradient G(X).
pub trait DifferentiableLoss: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Mat) -> f64;
    fn euclidean_gradient(&self, x: &Mat) -> Mat;
}

/// ℓ(W) = ½‖W − T‖²_F for an orthogonal target T; G(W) = W − T.
/// The manifold minimum is exactly 0 at W = T.
pub struct ProcrustesLoss {
    target: Mat,
}

impl ProcrustesLoss {
    pub fn new(target: OrthogonalMatrix) -> Self {
        Self { target: target.into_inner() }
    }

    pub fn target(&self) -> &Mat {
        &self.target
    }
}

impl DifferentiableLoss for ProcrustesLoss {
    fn dim(&self) -> usize {
        self.target.nrows()
    }

    fn value(&self, x: &Mat) -> f64 {
        0.5 * (x - &self.target).norm_squared()
    }

    fn euclidean_gradient(&self, x: &Mat) -> Mat {
        x - &self.target
    }
}

/// ℓ(W) = ½‖WX − Y‖²_F; G(W) = (WX − Y)Xᵀ, for data X, Y of shape p×n.
pub struct RegressionLoss {
    x: Mat,
    y: Mat,
}

impl RegressionLoss {
    pub fn new(x: Mat, y: Mat) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::InvalidInput(format!(
                "X is {:?}, Y is {:?}",
                x.shape(),
                y.shape()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidInput("need at least one sample".into()));
        }
        Ok(Self { x, y })
    }
}

impl DifferentiableLoss for RegressionLoss {
    fn dim(&self) -> usize {
        self.x.nrows()
    }

    fn value(&self, w: &Mat) -> f64 {
        0.5 * (w * &self.x - &self.y).norm_squared()
    }

    fn euclidean_gradient(&self, w: &Mat) -> Mat {
        (w * &self.x - &self.y) * self.x.transpose()
    }
}

/// ℓ(W) = ⟨C, W⟩_F with constant gradient G ≡ C. The manifold minimizer
/// is the orthogonal polar factor of −C.
pub struct LinearTraceLoss {
    c: Mat,
}

impl LinearTraceLoss {
    pub fn new(c: Mat) -> Result<Self> {
        if c.nrows() != c.ncols() {
            return Err(Error::InvalidInput("C must be square".into()));
        }
        Ok(Self { c })
    }

    pub fn coefficient(&self) -> &Mat {
        &self.c
    }
}

impl DifferentiableLoss for LinearTraceLoss {
    fn dim(&self) -> usize {
        self.c.nrows()
    }

    fn value(&self, w: &Mat) -> f64 {
        self.c.dot(w)
    }

    fn euclidean_gradient(&self, _w: &Mat) -> Mat {
        self.c.clone()
    }
}

/// Central finite differences of the loss: entry (i,j) is
/// (ℓ(W + h·E_ij) − ℓ(W − h·E_ij)) / (2h). Test oracle for analytic
/// gradients.
pub fn finite_diff_gradient(loss: &dyn DifferentiableLoss, w: &Mat, h: f64) -> Mat {
    let (rows, cols) = w.shape();
    let mut g = Mat::zeros(rows, cols);
    let mut probe = w.clone();
    for i in 0..rows {
        for j in 0..cols {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let plus = loss.value(&probe);
            probe[(i, j)] = orig - h;
            let minus = loss.value(&probe);
            probe[(i, j)] = orig;
            g[(i, j)] = (plus - minus) / (2.0 * h);
        }
    }
    g
}
