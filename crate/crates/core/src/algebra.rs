//! Dense complex 2×2 kernel.
//!
//! Everything in the k-space engines reduces to products, exponentials and
//! logarithms of 2×2 blocks written over the basis `{σ0, σx, σy, σz}`. The
//! closed forms here avoid general-purpose eigensolvers entirely.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Below this value of |μt| the propagator uses the series for sinh(μt)/μ.
const SINHC_SERIES_CUTOFF: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("matrix is not Hermitian (anti-Hermitian residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix has a non-positive eigenvalue {eigenvalue:.6e}")]
    NonPositiveSpectrum { eigenvalue: f64 },
}

/// Complex 2×2 matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex2x2(pub [[C64; 2]; 2]);

impl Complex2x2 {
    pub const fn new(a00: C64, a01: C64, a10: C64, a11: C64) -> Self {
        Self([[a00, a01], [a10, a11]])
    }

    pub const fn zero() -> Self {
        Self([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Self([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn from_real(rows: [[f64; 2]; 2]) -> Self {
        Self::new(
            rows[0][0].into(),
            rows[0][1].into(),
            rows[1][0].into(),
            rows[1][1].into(),
        )
    }

    pub fn diag(a: C64, b: C64) -> Self {
        Self::new(a, ZERO, ZERO, b)
    }

    pub const fn sigma_x() -> Self {
        Self([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn sigma_y() -> Self {
        Self([[ZERO, -I], [I, ZERO]])
    }

    pub fn sigma_z() -> Self {
        Self([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: [C64; 2], b: [C64; 2]) -> Self {
        Self::new(
            a[0] * b[0].conj(),
            a[0] * b[1].conj(),
            a[1] * b[0].conj(),
            a[1] * b[1].conj(),
        )
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0], m[1][0], m[0][1], m[1][1])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        let m = &self.0;
        Self::new(f(m[0][0]), f(m[0][1]), f(m[1][0]), f(m[1][1]))
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    /// Inverse by adjugate; `None` when the determinant vanishes exactly.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == ZERO {
            return None;
        }
        let m = &self.0;
        Some(Self::new(m[1][1] / d, -m[0][1] / d, -m[1][0] / d, m[0][0] / d))
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        let f2 = self.norm().powi(2);
        let d = self.det().norm();
        let disc = (f2 * f2 - 4.0 * d * d).max(0.0);
        ((f2 + disc.sqrt()) / 2.0).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.is_finite())
    }

    /// Frobenius norm of the anti-Hermitian part `(M − M†)/2`.
    pub fn hermitian_residual(&self) -> f64 {
        (*self - self.adjoint()).norm() / 2.0
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    /// `(M + M†)/2`
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale(0.5.into())
    }

    pub fn pauli(&self) -> PauliForm {
        pauli_decompose(self)
    }
}

impl Default for Complex2x2 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Index<(usize, usize)> for Complex2x2 {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for Complex2x2 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.0[r][c]
    }
}

impl Add for Complex2x2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        Self::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl Sub for Complex2x2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        Self::new(a[0][0] - b[0][0], a[0][1] - b[0][1], a[1][0] - b[1][0], a[1][1] - b[1][1])
    }
}

impl Neg for Complex2x2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|z| -z)
    }
}

impl Mul for Complex2x2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Mul<C64> for Complex2x2 {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        self.scale(s)
    }
}

impl Mul<f64> for Complex2x2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s.into())
    }
}

/// Expansion `M = alpha·σ0 + n·σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliForm {
    pub alpha: C64,
    pub n: [C64; 3],
}

impl PauliForm {
    pub fn new(alpha: C64, n: [C64; 3]) -> Self {
        Self { alpha, n }
    }

    pub fn real(alpha: f64, n: [f64; 3]) -> Self {
        Self {
            alpha: alpha.into(),
            n: [n[0].into(), n[1].into(), n[2].into()],
        }
    }

    /// `n·n` without conjugation; its square root gives the eigenvalue splitting.
    pub fn n_dot_n(&self) -> C64 {
        self.n.iter().map(|z| z * z).sum()
    }

    pub fn n_re(&self) -> [f64; 3] {
        self.n.map(|z| z.re)
    }

    pub fn n_im(&self) -> [f64; 3] {
        self.n.map(|z| z.im)
    }

    pub fn n_norm(&self) -> f64 {
        self.n.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn compose(&self) -> Complex2x2 {
        pauli_compose(self)
    }
}

pub fn pauli_decompose(m: &Complex2x2) -> PauliForm {
    let a = &m.0;
    let half = 0.5;
    PauliForm {
        alpha: (a[0][0] + a[1][1]) * half,
        n: [
            (a[0][1] + a[1][0]) * half,
            (a[1][0] - a[0][1]) * (I * -half),
            (a[0][0] - a[1][1]) * half,
        ],
    }
}

pub fn pauli_compose(p: &PauliForm) -> Complex2x2 {
    let [nx, ny, nz] = p.n;
    Complex2x2::new(p.alpha + nz, nx - I * ny, nx + I * ny, p.alpha - nz)
}

/// Biorthogonal eigensystem of a 2×2 matrix.
///
/// Left eigenvectors are stored as kets: `⟨L_ξ|v⟩ = Σ conj(L_ξ[i])·v[i]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenSystem2 {
    pub eps_plus: C64,
    pub eps_minus: C64,
    pub r_plus: [C64; 2],
    pub r_minus: [C64; 2],
    pub l_plus: [C64; 2],
    pub l_minus: [C64; 2],
    pub defective: bool,
}

impl EigenSystem2 {
    pub fn eigenvalues(&self) -> [C64; 2] {
        [self.eps_plus, self.eps_minus]
    }

    pub fn right(&self) -> [[C64; 2]; 2] {
        [self.r_plus, self.r_minus]
    }

    pub fn left(&self) -> [[C64; 2]; 2] {
        [self.l_plus, self.l_minus]
    }

    /// `Σ_ξ f(ε_ξ)|R_ξ⟩⟨L_ξ|`
    pub fn spectral_sum(&self, f: impl Fn(C64) -> C64) -> Complex2x2 {
        Complex2x2::outer(self.r_plus, self.l_plus).scale(f(self.eps_plus))
            + Complex2x2::outer(self.r_minus, self.l_minus).scale(f(self.eps_minus))
    }
}

/// `⟨a|b⟩`
pub fn braket(a: [C64; 2], b: [C64; 2]) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Splitting below which a block counts as defective.
///
/// At an exact exceptional point the computed `n·n` carries roundoff of order
/// `ε‖n‖²`, so the computed splitting is ~1e-8‖n‖ rather than zero.
pub fn default_ep_tol(m: &Complex2x2) -> f64 {
    1e-7 * m.norm().max(1.0)
}

/// Eigenvalues `alpha ± √(n·n)` (principal root), with eigenvectors
/// biorthonormalized through the inverse of the right-eigenvector matrix.
///
/// Blocks whose splitting falls below `ep_tol` while `n` itself does not
/// vanish are flagged defective; their eigenvectors are not meaningful.
pub fn eigensystem(m: &Complex2x2, ep_tol: f64) -> EigenSystem2 {
    assert!(ep_tol > 0.0, "ep_tol must be positive");
    let p = pauli_decompose(m);
    let mu = p.n_dot_n().sqrt();
    let eps_plus = p.alpha + mu;
    let eps_minus = p.alpha - mu;
    let e0 = [ONE, ZERO];
    let e1 = [ZERO, ONE];

    if p.n_norm() <= ep_tol {
        // scalar matrix: any basis diagonalizes it
        return EigenSystem2 {
            eps_plus,
            eps_minus,
            r_plus: e0,
            r_minus: e1,
            l_plus: e0,
            l_minus: e1,
            defective: false,
        };
    }
    if mu.norm() < ep_tol {
        let r = n_sigma_eigvec(&p.n, mu);
        return EigenSystem2 {
            eps_plus,
            eps_minus,
            r_plus: r,
            r_minus: r,
            l_plus: [ZERO, ZERO],
            l_minus: [ZERO, ZERO],
            defective: true,
        };
    }

    let r_plus = n_sigma_eigvec(&p.n, mu);
    let r_minus = n_sigma_eigvec(&p.n, -mu);
    let det = r_plus[0] * r_minus[1] - r_minus[0] * r_plus[1];
    // rows of R⁻¹, conjugated into kets
    let l_plus = [(r_minus[1] / det).conj(), (-r_minus[0] / det).conj()];
    let l_minus = [(-r_plus[1] / det).conj(), (r_plus[0] / det).conj()];
    EigenSystem2 {
        eps_plus,
        eps_minus,
        r_plus,
        r_minus,
        l_plus,
        l_minus,
        defective: false,
    }
}

/// Unit eigenvector of `n·σ` for eigenvalue `s` (with `s² = n·n`).
fn n_sigma_eigvec(n: &[C64; 3], s: C64) -> [C64; 2] {
    let [nx, ny, nz] = *n;
    let v1 = [nx - I * ny, s - nz];
    let v2 = [s + nz, nx + I * ny];
    let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
    let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
    let (v, nrm) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
    let nrm = nrm.sqrt();
    [v[0] / nrm, v[1] / nrm]
}

/// `e^{Mt}` from `e^{αt}[cosh(μt)σ0 + sinh(μt)/μ n·σ]`; exact at exceptional points.
pub fn propagator(m: &Complex2x2, t: f64) -> Complex2x2 {
    PauliPropagator::new(m).at(t)
}

/// Cached Pauli data for repeated evaluation of `e^{Mt}` at many times.
#[derive(Clone, Copy, Debug)]
pub struct PauliPropagator {
    alpha: C64,
    n: [C64; 3],
    mu: C64,
}

impl PauliPropagator {
    pub fn new(m: &Complex2x2) -> Self {
        let p = pauli_decompose(m);
        Self {
            alpha: p.alpha,
            n: p.n,
            mu: p.n_dot_n().sqrt(),
        }
    }

    pub fn at(&self, t: f64) -> Complex2x2 {
        let z = self.mu * t;
        let (ch, sh_over_mu) = if z.norm() < SINHC_SERIES_CUTOFF {
            let z2 = z * z;
            (ONE + z2 / 2.0, (ONE + z2 / 6.0) * t)
        } else {
            (z.cosh(), z.sinh() / self.mu)
        };
        let pre = (self.alpha * t).exp();
        let c = ch * pre;
        let s = sh_over_mu * pre;
        pauli_compose(&PauliForm {
            alpha: c,
            n: self.n.map(|x| x * s),
        })
    }
}

/// Principal logarithm of a positive-definite Hermitian matrix.
pub fn hermitian_log(m: &Complex2x2) -> Result<Complex2x2, AlgebraError> {
    let residual = m.hermitian_residual();
    if residual > 1e-10 * m.norm().max(1.0) {
        return Err(AlgebraError::NotHermitian { residual });
    }
    let p = pauli_decompose(&m.hermitian_part());
    let alpha = p.alpha.re;
    let n = p.n_re();
    let r = norm3(&n);
    let lo = alpha - r;
    if lo <= 0.0 || !lo.is_finite() {
        return Err(AlgebraError::NonPositiveSpectrum { eigenvalue: lo });
    }
    let hi = alpha + r;
    let mean_log = 0.5 * (hi.ln() + lo.ln());
    if r == 0.0 {
        return Ok(Complex2x2::identity() * mean_log);
    }
    // ln(hi) − ln(lo) = 2 atanh(r/α), kept accurate for small splittings
    let half_split = (r / alpha).atanh();
    let scale = half_split / r;
    Ok(pauli_compose(&PauliForm::real(mean_log, n.map(|x| x * scale))))
}

/// Applies a scalar function to a Hermitian matrix through its real eigendecomposition.
pub fn hermitian_function(m: &Complex2x2, f: impl Fn(f64) -> f64) -> Complex2x2 {
    let p = pauli_decompose(&m.hermitian_part());
    let alpha = p.alpha.re;
    let n = p.n_re();
    let r = norm3(&n);
    let (fp, fm) = (f(alpha + r), f(alpha - r));
    let mean = 0.5 * (fp + fm);
    if r == 0.0 {
        return Complex2x2::identity() * mean;
    }
    let scale = 0.5 * (fp - fm) / r;
    pauli_compose(&PauliForm::real(mean, n.map(|x| x * scale)))
}

pub fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn scale3(a: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Angle between two real 3-vectors, accurate near 0 and π.
pub fn angle_between(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    norm3(&cross3(a, b)).atan2(dot3(a, b))
}
