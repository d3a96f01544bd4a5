//! Matrix exponential of skew-symmetric matrices via scaling-and-squaring
//! with a degree-13 Padé approximant (Higham 2005). For skew input the
//! result is orthogonal to machine precision, with determinant one.

use crate::matrix::Mat;
use crate::orthogonal::OrthogonalMatrix;
use crate::skew::SkewSymmetricMatrix;

// Padé(13) coefficients.
const B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which Padé(13) has backward error below unit roundoff.
const THETA_13: f64 = 5.371920351148152;

fn one_norm(m: &Mat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(A) for a general square matrix. Internal; the public entry point is
/// [`matrix_exp_skew`], which carries the orthogonality guarantee.
pub(crate) fn expm(a: &Mat) -> Mat {
    let p = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a = a / 2f64.powi(s as i32);

    let ident = Mat::identity(p, p);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * (B[13] * &a6 + B[11] * &a4 + B[9] * &a2)
        + B[7] * &a6
        + B[5] * &a4
        + B[3] * &a2
        + B[1] * &ident;
    let u = &a * u_inner;
    let v = &a6 * (B[12] * &a6 + B[10] * &a4 + B[8] * &a2)
        + B[6] * &a6
        + B[4] * &a4
        + B[2] * &a2
        + B[0] * &ident;

    // exp(A) ≈ (V − U)⁻¹ (V + U)
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs
        .lu()
        .solve(&rhs)
        .expect("Padé denominator is nonsingular for scaled input");

    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// exp(A) for skew-symmetric A. The result lies in SO(p).
pub fn matrix_exp_skew(a: &SkewSymmetricMatrix) -> OrthogonalMatrix {
    OrthogonalMatrix::new(expm(a.matrix()))
        .expect("exp of a skew-symmetric matrix is orthogonal")
}
