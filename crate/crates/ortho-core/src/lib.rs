//! Riemannian optimization on the orthogonal group O(p).
//!
//! The crate provides the dense kernels (skew decomposition, matrix
//! exponential, QR, Haar sampling), the manifold geometry (tangent
//! projection, Riemannian gradient, exponential / Cayley / projection
//! retractions), concrete differentiable losses, deep orthogonal linear
//! networks with per-factor gradients and the simultaneous update, and
//! the discrete and continuous training loops.
//!
//! Everything is immutable after construction and safe to share across
//! threads; all operations are pure.

pub mod error;
pub mod expm;
pub mod haar;
pub mod loss;
pub mod manifold;
pub mod matrix;
pub mod network;
pub mod orthogonal;
pub mod qr;
pub mod skew;
pub mod trainer;

pub use error::{Error, Result};
pub use expm::matrix_exp_skew;
pub use haar::{haar_sample, haar_sample_with_rng, substream, Prng};
pub use loss::{
    finite_diff_gradient, DifferentiableLoss, LinearTraceLoss, ProcrustesLoss, RegressionLoss,
};
pub use manifold::{
    polar_orthogonal_factor, project_tangent, retract_cayley, retract_exponential,
    retract_projection, retract_projection_qr, riemannian_grad, Retraction, TangentVector,
};
pub use matrix::{orthogonality_defect, read_matrix, write_matrix, Mat};
pub use network::{
    deep_step, deep_step_sequential, euclidean_grad_factor, euclidean_grad_factor_chain, forward,
    product, read_checkpoint, riemannian_grad_factor, riemannian_grad_factor_direct,
    write_checkpoint, DeepStepResult, NetworkWeights, PartialProducts,
};
pub use orthogonal::OrthogonalMatrix;
pub use qr::qr_orthonormalize;
pub use skew::{skew_part, SkewSymmetricMatrix};
pub use trainer::{
    deep_rgd, flow_integrate, flow_integrate_lie_euler, shallow_rgd, write_trajectory_csv,
    TrainConfig, TrainError, TrajectoryRecord,
};
