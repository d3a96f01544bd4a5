//! Depth-L orthogonal factorizations: forward map, partial products,
//! per-factor gradients, and the simultaneous deep update.
//!
//! Layer indices are 1-based at the public surface, matching the usual
//! factorization convention Π = W_L × … × W_1 (layer 1 acts first).

use std::io::{BufRead, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::loss::DifferentiableLoss;
use crate::manifold::Retraction;
use crate::matrix::{orthogonality_defect, read_matrix, write_matrix, Mat};
use crate::orthogonal::OrthogonalMatrix;
use crate::qr::qr_orthonormalize;
use crate::skew::{skew_part, SkewSymmetricMatrix};

/// Re-orthonormalize accumulated products / updated layers whose defect
/// drifts past this.
pub const REORTHO_TRIGGER: f64 = 1e-11;

/// The ordered layers (W_1, …, W_L) of a deep orthogonal network.
#[derive(Debug, Clone)]
pub struct NetworkWeights {
    layers: Vec<OrthogonalMatrix>,
}

impl NetworkWeights {
    pub fn new(layers: Vec<OrthogonalMatrix>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("depth must be ≥ 1".into()));
        }
        let p = layers[0].dim();
        if layers.iter().any(|w| w.dim() != p) {
            return Err(Error::InvalidInput("all layers must share the dimension".into()));
        }
        Ok(Self { layers })
    }

    /// L identity layers.
    pub fn identity(p: usize, depth: usize) -> Result<Self> {
        Self::new(vec![OrthogonalMatrix::identity(p); depth.max(0)])
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    pub fn layers(&self) -> &[OrthogonalMatrix] {
        &self.layers
    }

    /// Layer W_i, 1-based.
    pub fn layer(&self, i: usize) -> Result<&OrthogonalMatrix> {
        self.check_index(i)?;
        Ok(&self.layers[i - 1])
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.depth() {
            return Err(Error::InvalidInput(format!(
                "layer index {i} out of range 1..={}",
                self.depth()
            )));
        }
        Ok(())
    }

    /// Largest per-layer orthogonality defect.
    pub fn max_layer_defect(&self) -> f64 {
        self.layers.iter().map(|w| w.defect()).fold(0.0, f64::max)
    }
}

/// Suffix products of the layers. `suffix[i] = W_L × … × W_{i+1}` for
/// i = 0..=L, so `suffix[0]` is the full product Π, `suffix[L] = I`, and
/// the paper's Π_i is `suffix[i]`.
pub struct PartialProducts {
    suffix: Vec<Mat>,
}

impl PartialProducts {
    pub fn compute(weights: &NetworkWeights) -> Self {
        let depth = weights.depth();
        let p = weights.dim();
        let mut suffix = vec![Mat::identity(p, p); depth + 1];
        for i in (0..depth).rev() {
            // suffix[i] = suffix[i+1] · W_{i+1}
            suffix[i] = if i + 1 == depth {
                weights.layers[i].matrix().clone()
            } else {
                &suffix[i + 1] * weights.layers[i].matrix()
            };
        }
        Self { suffix }
    }

    pub fn depth(&self) -> usize {
        self.suffix.len() - 1
    }

    /// The full product Π = W_L × … × W_1 as a raw matrix.
    pub fn full(&self) -> &Mat {
        &self.suffix[0]
    }

    /// Π_i = W_L × … × W_{i+1}, 1-based i ≤ L (Π_L = I).
    pub fn above(&self, i: usize) -> &Mat {
        &self.suffix[i]
    }

    /// Largest telescoping residual ‖Π_i·W_i·(W_{i−1}⋯W_1) − Π‖_F over i.
    pub fn telescoping_residual(&self, weights: &NetworkWeights) -> f64 {
        let p = weights.dim();
        let mut below = Mat::identity(p, p); // W_{i−1}⋯W_1
        let mut worst: f64 = 0.0;
        for i in 1..=weights.depth() {
            let reassembled = self.above(i) * weights.layers[i - 1].matrix() * &below;
            worst = worst.max((reassembled - self.full()).norm());
            below = weights.layers[i - 1].matrix() * below;
        }
        worst
    }
}

/// Applies the network to an input: x_{L+1} via x_{i+1} = W_i x_i.
pub fn forward(weights: &NetworkWeights, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != weights.dim() {
        return Err(Error::DimensionMismatch {
            expected: weights.dim(),
            rows: x.len(),
            cols: 1,
        });
    }
    let mut v = x.clone();
    for w in &weights.layers {
        v = w.matrix() * v;
    }
    Ok(v)
}

/// The full product Π = W_L × … × W_1, re-orthonormalized if the
/// accumulated defect drifted past [`REORTHO_TRIGGER`].
pub fn product(weights: &NetworkWeights) -> OrthogonalMatrix {
    let full = PartialProducts::compute(weights).full().clone();
    if orthogonality_defect(&full) > REORTHO_TRIGGER {
        qr_orthonormalize(&full).expect("product of orthogonal layers is nonsingular")
    } else {
        OrthogonalMatrix::new(full).expect("product of orthogonal layers is orthogonal")
    }
}

/// Euclidean gradient of 𝓛 = ℓ(Π)/L with respect to W_i, in the factored
/// form (1/L)·Π_iᵀ·G(Π)·Πᵀ·Π_i·W_i.
pub fn euclidean_grad_factor(
    weights: &NetworkWeights,
    loss: &dyn DifferentiableLoss,
    i: usize,
) -> Result<Mat> {
    weights.check_index(i)?;
    let products = PartialProducts::compute(weights);
    Ok(euclidean_grad_factor_from(&products, weights, loss, i))
}

fn euclidean_grad_factor_from(
    products: &PartialProducts,
    weights: &NetworkWeights,
    loss: &dyn DifferentiableLoss,
    i: usize,
) -> Mat {
    let pi = products.full();
    let pi_i = products.above(i);
    let g = loss.euclidean_gradient(pi);
    let scale = 1.0 / weights.depth() as f64;
    (pi_i.transpose() * g * pi.transpose() * pi_i * weights.layers[i - 1].matrix()) * scale
}

/// The same gradient as the explicit chain
/// (1/L)·W_{i+1}ᵀ⋯W_Lᵀ·G(Π)·W_1ᵀ⋯W_{i−1}ᵀ. Slower; kept as the
/// independent route for consistency tests.
pub fn euclidean_grad_factor_chain(
    weights: &NetworkWeights,
    loss: &dyn DifferentiableLoss,
    i: usize,
) -> Result<Mat> {
    weights.check_index(i)?;
    let depth = weights.depth();
    let p = weights.dim();
    let g = loss.euclidean_gradient(PartialProducts::compute(weights).full());
    // left = W_{i+1}ᵀ × … × W_Lᵀ
    let mut left = Mat::identity(p, p);
    for k in ((i + 1)..=depth).rev() {
        left = weights.layers[k - 1].matrix().transpose() * left;
    }
    // right = W_1ᵀ × … × W_{i−1}ᵀ
    let mut right = Mat::identity(p, p);
    for k in 1..i {
        right = right * weights.layers[k - 1].matrix().transpose();
    }
    Ok((left * g * right) * (1.0 / depth as f64))
}

/// ψ_i = (1/L)·Π_iᵀ·Skew(G(Π)Πᵀ)·Π_i, the generator of the Riemannian
/// gradient at layer i (the gradient itself is ψ_i·W_i).
pub fn riemannian_grad_factor(
    weights: &NetworkWeights,
    loss: &dyn DifferentiableLoss,
    i: usize,
) -> Result<SkewSymmetricMatrix> {
    weights.check_index(i)?;
    let products = PartialProducts::compute(weights);
    riemannian_grad_factor_from(&products, weights, loss, i)
}

fn riemannian_grad_factor_from(
    products: &PartialProducts,
    weights: &NetworkWeights,
    loss: &dyn DifferentiableLoss,
    i: usize,
) -> Result<SkewSymmetricMatrix> {
    let pi = products.full();
    let g = loss.euclidean_gradient(pi);
    let s = skew_part(&(g * pi.transpose()))?;
    let pi_i = products.above(i);
    let sandwich = pi_i.transpose() * s.matrix() * pi_i;
    Ok(skew_part(&sandwich)?.scale(1.0 / weights.depth() as f64))
}

/// The alternative ψ_i = (1/L)·Skew(Π_iᵀ·G(Π)·Πᵀ·Π_i) — equal to
/// [`riemannian_grad_factor`] by equivariance of Skew under orthogonal
/// conjugation. Kept as the second algebraic route for tests.
pub fn riemannian_grad_factor_direct(
    weights: &NetworkWeights,
    loss: &dyn DifferentiableLoss,
    i: usize,
) -> Result<SkewSymmetricMatrix> {
    weights.check_index(i)?;
    let products = PartialProducts::compute(weights);
    let pi = products.full();
    let pi_i = products.above(i);
    let g = loss.euclidean_gradient(pi);
    let inner = pi_i.transpose() * g * pi.transpose() * pi_i;
    Ok(skew_part(&inner)?.scale(1.0 / weights.depth() as f64))
}

/// Result of one deep step, with the largest raw layer defect observed
/// before any corrective re-orthonormalization.
pub struct DeepStepResult {
    pub weights: NetworkWeights,
    pub pre_correction_defect: f64,
    pub generator_norm: f64,
}

fn wrap_layer(raw: Mat) -> Result<(OrthogonalMatrix, f64)> {
    let defect = orthogonality_defect(&raw);
    let layer = if defect > REORTHO_TRIGGER {
        qr_orthonormalize(&raw)?
    } else {
        OrthogonalMatrix::new(raw)?
    };
    Ok((layer, defect))
}

/// One simultaneous Riemannian step: every ψ_i is evaluated at the
/// incoming weights, then all layers move at once via the retraction.
pub fn deep_step(
    weights: &NetworkWeights,
    loss: &dyn DifferentiableLoss,
    eta: f64,
    retraction: Retraction,
) -> Result<DeepStepResult> {
    let products = PartialProducts::compute(weights);
    let depth = weights.depth();

    let mut generators = Vec::with_capacity(depth);
    for i in 1..=depth {
        generators.push(riemannian_grad_factor_from(&products, weights, loss, i)?);
    }
    let generator_norm = {
        let pi = products.full();
        let g = loss.euclidean_gradient(pi);
        skew_part(&(g * pi.transpose()))?.norm()
    };

    let mut new_layers = Vec::with_capacity(depth);
    let mut worst_defect: f64 = 0.0;
    for (w, psi) in weights.layers.iter().zip(&generators) {
        let stepped = retraction.apply(w, psi, eta)?;
        let (layer, defect) = wrap_layer(stepped.into_inner())?;
        worst_defect = worst_defect.max(defect);
        new_layers.push(layer);
    }
    Ok(DeepStepResult {
        weights: NetworkWeights::new(new_layers)?,
        pre_correction_defect: worst_defect,
        generator_norm,
    })
}

/// Sequential (non-simultaneous) variant: updates layer 1, recomputes all
/// products and gradients, then layer 2, and so on. This breaks the
/// product recursion at order η² and exists as a negative control.
pub fn deep_step_sequential(
    weights: &NetworkWeights,
    loss: &dyn DifferentiableLoss,
    eta: f64,
    retraction: Retraction,
) -> Result<NetworkWeights> {
    let mut current = weights.clone();
    for i in 1..=weights.depth() {
        let psi = riemannian_grad_factor(&current, loss, i)?;
        let stepped = retraction.apply(&current.layers[i - 1], &psi, eta)?;
        let (layer, _) = wrap_layer(stepped.into_inner())?;
        current.layers[i - 1] = layer;
    }
    Ok(current)
}

/// Writes a checkpoint: header `L p`, then the L layer matrices in the
/// text format, layer 1 first.
pub fn write_checkpoint<W: Write>(out: &mut W, weights: &NetworkWeights) -> Result<()> {
    writeln!(out, "{} {}", weights.depth(), weights.dim())?;
    for layer in &weights.layers {
        write_matrix(out, layer.matrix())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: &mut R) -> Result<NetworkWeights> {
    let mut header = String::new();
    if input.read_line(&mut header)? == 0 {
        return Err(Error::Parse("unexpected end of input reading checkpoint header".into()));
    }
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad checkpoint header {t:?}"))))
        .collect::<Result<_>>()?;
    let [depth, p] = fields.as_slice() else {
        return Err(Error::Parse(format!("bad checkpoint header {header:?}")));
    };
    let mut layers = Vec::with_capacity(*depth);
    for _ in 0..*depth {
        let m = read_matrix(input)?;
        if m.nrows() != *p || m.ncols() != *p {
            return Err(Error::Parse("layer dimension does not match header".into()));
        }
        layers.push(OrthogonalMatrix::new(m)?);
    }
    NetworkWeights::new(layers)
}
