//! Brute-force real-space evolution `C(t) = e^{Xt} C(0) e^{X†t}`.

use nalgebra::DMatrix;

use super::DynamicsError;
use crate::algebra::C64;
use crate::model::{real_space_damping, LatticeModel};

// Padé [13/13] coefficients
const PADE13: [f64; 14] = [
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

/// 1-norm bound below which the degree-13 approximant is accurate to unit roundoff.
const THETA_13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a Padé [13/13] core.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let a = a * C64::from(0.5f64.powi(squarings));

    let ident = DMatrix::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |j: usize| C64::from(PADE13[j]);

    let inner_u = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = &a * (inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1));
    let inner_v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8));
    let v = inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Evolves a real-space correlation matrix `C` (not its transpose) under
/// `dC/dt = XC + CX†` with `X = iHᵀ − Mᵀ`.
pub fn evolve_realspace_oracle(
    model: &LatticeModel,
    c0: &DMatrix<C64>,
    t: f64,
) -> Result<DMatrix<C64>, DynamicsError> {
    let dim = model.dim();
    if c0.nrows() != dim || c0.ncols() != dim {
        return Err(DynamicsError::DimensionMismatch { expected: dim, got: c0.nrows().max(c0.ncols()) });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(DynamicsError::InvalidParameter(format!("time {t} must be finite and non-negative")));
    }
    if t == 0.0 {
        return Ok(c0.clone());
    }
    let (x, _) = real_space_damping(model);
    let e = expm(&(x * C64::from(t)));
    Ok(&e * c0 * e.adjoint())
}
