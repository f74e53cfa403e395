//! Time evolution of single-particle correlation matrices.
//!
//! Each k-sector obeys `dC_k^T/dt = X̃_k C_k^T + C_k^T X̃_k†`. Three k-space
//! engines solve it independently:
//!
//! * [`evolve_propagator`]: `C(t) = e^{X̃t} C(0) e^{X̃†t}` with the closed-form
//!   2×2 exponential. Exact, including at exceptional points; the default.
//! * [`evolve_spectral`]: the four-term biorthogonal sum over left/right
//!   eigenvectors. Undefined at exceptional points.
//! * [`evolve_bloch_ode`]: fixed-step RK4 on the `(α_C, n_C)` equations of motion.
//!
//! [`evolve_realspace_oracle`] integrates the full `2L×2L` problem with a dense
//! matrix exponential and serves as a brute-force reference.

mod realspace;

pub use realspace::{evolve_realspace_oracle, expm};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    default_ep_tol, eigensystem, norm3, pauli_decompose, scale3, Complex2x2, PauliForm, PauliPropagator,
};
use crate::model::{pt_decompose, pt_label, BlochBlock, ModelError, PtLabel, DEFAULT_EP_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{blocks} damping blocks but {fields} correlation blocks")]
    LengthMismatch { blocks: usize, fields: usize },
    #[error("damping block at k={k:.6} is defective; use the propagator engine")]
    DefectiveBlock { k: f64 },
    #[error("matrix dimension {got} does not match the model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("correlation block at k={k:.6} is unphysical: {reason}")]
    Unphysical { k: f64, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

const HERMITIAN_TOL: f64 = 1e-10;

/// The blocks `C_k^T` on a k-grid at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationField {
    pub kgrid: Vec<f64>,
    pub blocks: Vec<Complex2x2>,
    pub time: f64,
}

impl CorrelationField {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Real `(α_C, n_C)` of block `j`.
    pub fn bloch_vector(&self, j: usize) -> (f64, [f64; 3]) {
        let p = pauli_decompose(&self.blocks[j]);
        (p.alpha.re, p.n_re())
    }

    /// `Σ_k Tr C_k^T / n_k`
    pub fn total_occupation(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum::<f64>() / self.blocks.len() as f64
    }

    /// Hermitian blocks with spectrum in `[−tol, 1 + tol]`.
    pub fn check_physical(&self, tol: f64) -> Result<(), DynamicsError> {
        for (k, b) in self.kgrid.iter().zip(&self.blocks) {
            let residual = b.hermitian_residual();
            if residual > HERMITIAN_TOL {
                return Err(DynamicsError::Unphysical { k: *k, reason: format!("Hermitian residual {residual:.3e}") });
            }
            let [lo, hi] = occupation_spectrum(b);
            if lo < -tol || hi > 1.0 + tol {
                return Err(DynamicsError::Unphysical {
                    k: *k,
                    reason: format!("eigenvalues {lo:.6e}, {hi:.6e} outside [0, 1]"),
                });
            }
        }
        Ok(())
    }

    /// Extreme eigenvalues over all blocks.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        self.blocks.iter().map(occupation_spectrum).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), [a, b]| {
            (lo.min(a), hi.max(b))
        })
    }
}

/// Ascending eigenvalues of the Hermitian part of a block.
pub fn occupation_spectrum(b: &Complex2x2) -> [f64; 2] {
    let p = pauli_decompose(&b.hermitian_part());
    let r = norm3(&p.n_re());
    [p.alpha.re - r, p.alpha.re + r]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub a: f64,
    pub b: f64,
}

impl InitialStateSpec {
    pub fn new(a: f64, b: f64) -> Result<Self, DynamicsError> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(DynamicsError::InvalidParameter(format!("initial state needs a > 0, b > 0 (got a={a}, b={b})")));
        }
        Ok(Self { a, b })
    }

    /// `n_k = (0, b sin k, a + b cos k)`
    pub fn n_k(&self, k: f64) -> [f64; 3] {
        [0.0, self.b * k.sin(), self.a + self.b * k.cos()]
    }
}

/// `C_k^T(0) = ½[1 − tanh(|n_k|)/|n_k| · n_k·σ]`
pub fn initial_state(spec: &InitialStateSpec, kgrid: &[f64]) -> CorrelationField {
    let blocks = kgrid
        .iter()
        .map(|&k| {
            let n = spec.n_k(k);
            let r = norm3(&n);
            let ratio = if r > 0.0 { r.tanh() / r } else { 1.0 };
            PauliForm::real(0.5, scale3(&n, -0.5 * ratio)).compose()
        })
        .collect();
    CorrelationField { kgrid: kgrid.to_vec(), blocks, time: 0.0 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<CorrelationField>,
}

fn check_lengths(blocks: &[BlochBlock], c0: &CorrelationField) -> Result<(), DynamicsError> {
    if blocks.len() != c0.blocks.len() {
        return Err(DynamicsError::LengthMismatch { blocks: blocks.len(), fields: c0.blocks.len() });
    }
    Ok(())
}

fn check_time(t: f64) -> Result<(), DynamicsError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(DynamicsError::InvalidParameter(format!("time {t} must be finite and non-negative")));
    }
    Ok(())
}

/// Closed-form propagators for every k-sector, reusable across many times.
#[derive(Clone, Debug)]
pub struct PropagatorEngine {
    kgrid: Vec<f64>,
    props: Vec<PauliPropagator>,
    initial: Vec<Complex2x2>,
}

impl PropagatorEngine {
    pub fn new(blocks: &[BlochBlock], c0: &CorrelationField) -> Result<Self, DynamicsError> {
        check_lengths(blocks, c0)?;
        Ok(Self {
            kgrid: c0.kgrid.clone(),
            props: blocks.iter().map(|b| PauliPropagator::new(&b.x_tilde)).collect(),
            initial: c0.blocks.clone(),
        })
    }

    pub fn block_at(&self, j: usize, t: f64) -> Complex2x2 {
        let u = self.props[j].at(t);
        u * self.initial[j] * u.adjoint()
    }

    pub fn at(&self, t: f64) -> CorrelationField {
        let blocks = (0..self.props.len()).map(|j| self.block_at(j, t)).collect();
        CorrelationField { kgrid: self.kgrid.clone(), blocks, time: t }
    }
}

pub fn evolve_propagator(blocks: &[BlochBlock], c0: &CorrelationField, t: f64) -> Result<CorrelationField, DynamicsError> {
    check_time(t)?;
    if t == 0.0 {
        check_lengths(blocks, c0)?;
        return Ok(c0.clone());
    }
    Ok(PropagatorEngine::new(blocks, c0)?.at(t))
}

/// `C(t) = Σ_{ξξ'} e^{(ε_ξ+ε*_ξ')t} |R_ξ⟩⟨R_ξ'| ⟨L_ξ|C(0)|L_ξ'⟩`
pub fn evolve_spectral(blocks: &[BlochBlock], c0: &CorrelationField, t: f64) -> Result<CorrelationField, DynamicsError> {
    check_time(t)?;
    check_lengths(blocks, c0)?;
    let out = blocks
        .iter()
        .zip(&c0.blocks)
        .map(|(b, c)| {
            let es = eigensystem(&b.x_tilde, default_ep_tol(&b.x_tilde));
            if es.defective {
                return Err(DynamicsError::DefectiveBlock { k: b.k });
            }
            let eps = es.eigenvalues();
            let right = es.right();
            let left = es.left();
            let mut acc = Complex2x2::zero();
            for xi in 0..2 {
                for xp in 0..2 {
                    let weight = crate::algebra::braket(left[xi], c.apply(left[xp]));
                    let growth = ((eps[xi] + eps[xp].conj()) * t).exp();
                    acc = acc + Complex2x2::outer(right[xi], right[xp]).scale(weight * growth);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CorrelationField { kgrid: c0.kgrid.clone(), blocks: out, time: t })
}

/// Largest step as a fraction of `1/‖X̃_k‖₂`.
const ODE_STEP_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug)]
struct BlochState {
    alpha: f64,
    n: [f64; 3],
}

impl BlochState {
    fn axpy(&self, h: f64, d: &BlochState) -> BlochState {
        BlochState {
            alpha: self.alpha + h * d.alpha,
            n: std::array::from_fn(|j| self.n[j] + h * d.n[j]),
        }
    }
}

/// `dα_C/dt = 2[α_X α_C + Re(n_C·n_X)]`,
/// `dn_C/dt = 2[α_X n_C + α_C Re n_X + Im(n_C × n_X)]`.
fn bloch_rhs(alpha_x: f64, n_re: &[f64; 3], n_im: &[f64; 3], s: &BlochState) -> BlochState {
    let c = &s.n;
    let dot_re = c[0] * n_re[0] + c[1] * n_re[1] + c[2] * n_re[2];
    let cross_im = crate::algebra::cross3(c, n_im);
    BlochState {
        alpha: 2.0 * (alpha_x * s.alpha + dot_re),
        n: std::array::from_fn(|j| 2.0 * (alpha_x * c[j] + s.alpha * n_re[j] + cross_im[j])),
    }
}

/// RK4 integration of the Bloch-vector equations; `times` must be
/// non-negative and strictly increasing.
pub fn evolve_bloch_ode(
    blocks: &[BlochBlock],
    c0: &CorrelationField,
    times: &[f64],
    dt_max: f64,
) -> Result<Trajectory, DynamicsError> {
    check_lengths(blocks, c0)?;
    if !(dt_max > 0.0) {
        return Err(DynamicsError::InvalidParameter(format!("dt_max = {dt_max} must be positive")));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DynamicsError::InvalidParameter("times must be non-negative and strictly increasing".into()));
    }

    let mut per_k: Vec<Vec<Complex2x2>> = Vec::with_capacity(blocks.len());
    for (b, c) in blocks.iter().zip(&c0.blocks) {
        let pt = pt_decompose(b)?;
        let n_x = pt.n_x();
        let n_re = n_x.map(|z| z.re);
        let n_im = n_x.map(|z| z.im);
        let norm = b.x_tilde.spectral_norm();
        let h_max = if norm > 0.0 { dt_max.min(ODE_STEP_FRACTION / norm) } else { dt_max };

        let p0 = pauli_decompose(c);
        let mut state = BlochState { alpha: p0.alpha.re, n: p0.n_re() };
        let mut now = 0.0;
        let mut samples = Vec::with_capacity(times.len());
        for &target in times {
            let span = target - now;
            if span > 0.0 {
                let steps = (span / h_max).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for _ in 0..steps {
                    let f = |s: &BlochState| bloch_rhs(pt.alpha_x, &n_re, &n_im, s);
                    let k1 = f(&state);
                    let k2 = f(&state.axpy(0.5 * h, &k1));
                    let k3 = f(&state.axpy(0.5 * h, &k2));
                    let k4 = f(&state.axpy(h, &k3));
                    state = BlochState {
                        alpha: state.alpha + h / 6.0 * (k1.alpha + 2.0 * k2.alpha + 2.0 * k3.alpha + k4.alpha),
                        n: std::array::from_fn(|j| {
                            state.n[j] + h / 6.0 * (k1.n[j] + 2.0 * k2.n[j] + 2.0 * k3.n[j] + k4.n[j])
                        }),
                    };
                }
                now = target;
            }
            samples.push(PauliForm::real(state.alpha, state.n).compose());
        }
        per_k.push(samples);
    }

    let fields = times
        .iter()
        .enumerate()
        .map(|(i, &t)| CorrelationField {
            kgrid: c0.kgrid.clone(),
            blocks: per_k.iter().map(|s| s[i]).collect(),
            time: t,
        })
        .collect();
    Ok(Trajectory { times: times.to_vec(), fields })
}

/// Unit Bloch vector of `|R_+⟩⟨R_+|` for PT-unbroken, non-defective blocks.
pub fn steady_direction(block: &BlochBlock) -> Option<[f64; 3]> {
    if pt_label(block, DEFAULT_EP_TOL) != PtLabel::Unbroken {
        return None;
    }
    let es = eigensystem(&block.x_tilde, default_ep_tol(&block.x_tilde));
    if es.defective {
        return None;
    }
    let n = pauli_decompose(&Complex2x2::outer(es.r_plus, es.r_plus)).n_re();
    let r = norm3(&n);
    (r > 0.0).then(|| scale3(&n, 1.0 / r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bloch_blocks, build_ssh_model, kgrid};
    use std::f64::consts::PI;

    fn ssh(u: f64, w: f64, lambda: f64, n_k: usize) -> Vec<BlochBlock> {
        bloch_blocks(&build_ssh_model(u, w, lambda, 4).unwrap(), n_k).unwrap()
    }

    fn max_field_diff(a: &CorrelationField, b: &CorrelationField) -> f64 {
        a.blocks.iter().zip(&b.blocks).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
    }

    #[test]
    fn initial_state_at_zone_boundary() {
        let spec = InitialStateSpec::new(1.0, 2.0).unwrap();
        let c = initial_state(&spec, &[PI]);
        let t = 1.0f64.tanh();
        let expect = Complex2x2::diag((0.5 * (1.0 + t)).into(), (0.5 * (1.0 - t)).into());
        assert!(c.blocks[0].max_abs_diff(&expect) < 1e-15);
        assert!((c.blocks[0][(0, 0)].re - 0.880797).abs() < 1e-6);
        assert!((c.blocks[0][(1, 1)].re - 0.119203).abs() < 1e-6);
    }

    #[test]
    fn initial_state_has_unit_trace_and_antiparallel_vector() {
        let spec = InitialStateSpec::new(1.0, 2.0).unwrap();
        let ks = kgrid(64);
        let c = initial_state(&spec, &ks);
        c.check_physical(0.0).unwrap();
        for (j, &k) in ks.iter().enumerate() {
            assert!((c.blocks[j].trace().re - 1.0).abs() < 1e-15);
            let (_, n_c) = c.bloch_vector(j);
            let n_k = spec.n_k(k);
            let angle = crate::algebra::angle_between(&n_c, &scale3(&n_k, -1.0));
            assert!(angle < 1e-12, "k={k} angle={angle}");
        }
    }

    #[test]
    fn invalid_initial_spec() {
        assert!(InitialStateSpec::new(0.0, 1.0).is_err());
        assert!(InitialStateSpec::new(1.0, -2.0).is_err());
    }

    #[test]
    fn propagator_at_time_zero_is_identity() {
        let blocks = ssh(0.6, 0.2, 1.0, 16);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(16));
        assert_eq!(evolve_propagator(&blocks, &c0, 0.0).unwrap(), c0);
        let spectral = evolve_spectral(&blocks, &c0, 0.0).unwrap();
        assert!(max_field_diff(&spectral, &c0) < 1e-13);
    }

    #[test]
    fn hopping_free_decay_rates() {
        let lambda = 0.8;
        let blocks = ssh(0.0, 0.0, lambda, 8);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(8));
        for t in [0.3, 1.0, 2.5] {
            let c = evolve_propagator(&blocks, &c0, t).unwrap();
            for (a, b) in c.blocks.iter().zip(&c0.blocks) {
                assert!((a[(0, 0)] - b[(0, 0)]).norm() < 1e-15);
                assert!((a[(0, 1)] - b[(0, 1)] * (-2.0 * lambda * t).exp()).norm() < 1e-15);
                assert!((a[(1, 1)] - b[(1, 1)] * (-4.0 * lambda * t).exp()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn unitary_limit_preserves_trace_and_length() {
        let blocks = ssh(0.9, 0.4, 0.0, 16);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(16));
        for t in [0.5, 3.0, 11.0] {
            let c = evolve_propagator(&blocks, &c0, t).unwrap();
            for j in 0..16 {
                let (a0, n0) = c0.bloch_vector(j);
                let (a, n) = c.bloch_vector(j);
                assert!((a - a0).abs() < 1e-13);
                assert!((norm3(&n) - norm3(&n0)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn spectral_rejects_defective_blocks() {
        let blocks = ssh(1.0, 0.0, 1.0, 8);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(8));
        assert!(matches!(evolve_spectral(&blocks, &c0, 1.0), Err(DynamicsError::DefectiveBlock { .. })));
    }

    #[test]
    fn spectral_long_time_direction() {
        let blocks = ssh(0.2, 0.0, 1.0, 8);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(8));
        let t = 400.0;
        let c = evolve_spectral(&blocks, &c0, t).unwrap();
        for (j, b) in blocks.iter().enumerate() {
            let es = eigensystem(&b.x_tilde, 1e-9);
            let dominant = Complex2x2::outer(es.r_plus, es.r_plus).scale(
                crate::algebra::braket(es.l_plus, c0.blocks[j].apply(es.l_plus)) * (2.0 * es.eps_plus * t).exp(),
            );
            let scale = dominant.norm();
            assert!(scale < 1e-6, "amplitude vanishes");
            assert!(c.blocks[j].max_abs_diff(&dominant) < 1e-6 * scale);
        }
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let blocks = ssh(0.6, 0.0, 1.0, 8);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(16));
        assert!(matches!(evolve_propagator(&blocks, &c0, 1.0), Err(DynamicsError::LengthMismatch { .. })));
        assert!(matches!(evolve_propagator(&blocks, &c0, -1.0), Err(DynamicsError::InvalidParameter(_))));
    }

    #[test]
    fn ode_zero_generator_is_constant() {
        let blocks: Vec<BlochBlock> =
            kgrid(8).into_iter().map(|k| BlochBlock::from_damping(k, Complex2x2::zero())).collect();
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(8));
        let tr = evolve_bloch_ode(&blocks, &c0, &[0.0, 1.0, 5.0], 0.1).unwrap();
        for f in &tr.fields {
            assert!(max_field_diff(f, &c0) < 1e-15);
        }
    }

    #[test]
    fn ode_matches_propagator_on_ssh_loss() {
        let blocks = ssh(0.6, 0.0, 1.0, 32);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(32));
        let times: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
        let tr = evolve_bloch_ode(&blocks, &c0, &times, 0.01).unwrap();
        for (t, f) in times.iter().zip(&tr.fields) {
            let exact = evolve_propagator(&blocks, &c0, *t).unwrap();
            assert!(max_field_diff(f, &exact) < 1e-6, "t={t}");
            assert_eq!(f.time, *t);
        }
    }

    #[test]
    fn ode_keeps_vectors_in_chiral_plane() {
        let blocks = ssh(1.3, 0.2, 1.0, 32);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(32));
        let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let tr = evolve_bloch_ode(&blocks, &c0, &times, 0.05).unwrap();
        for f in &tr.fields {
            for j in 0..f.len() {
                let (_, n) = f.bloch_vector(j);
                // Im(n_X) is along x̂
                assert!(n[0].abs() <= 1e-12 * norm3(&n).max(1e-300));
            }
        }
    }

    #[test]
    fn ode_rejects_bad_times() {
        let blocks = ssh(0.6, 0.0, 1.0, 8);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(8));
        assert!(evolve_bloch_ode(&blocks, &c0, &[1.0, 0.5], 0.1).is_err());
        assert!(evolve_bloch_ode(&blocks, &c0, &[1.0], 0.0).is_err());
    }

    #[test]
    fn steady_direction_cases() {
        for b in ssh(0.2, 0.0, 1.0, 16) {
            let d = steady_direction(&b).expect("unbroken");
            assert!((norm3(&d) - 1.0).abs() < 1e-12);
            assert!(d[0].abs() < 1e-12);
        }
        for b in ssh(2.0, 0.0, 1.0, 16) {
            assert!(steady_direction(&b).is_none());
        }
        let b = BlochBlock::from_damping(0.0, Complex2x2::diag(0.0.into(), (-2.0).into()));
        let d = steady_direction(&b).unwrap();
        assert!((d[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn occupation_decreases_with_loss() {
        let blocks = ssh(0.6, 0.2, 1.0, 32);
        let c0 = initial_state(&InitialStateSpec::new(1.0, 2.0).unwrap(), &kgrid(32));
        let mut prev = c0.total_occupation();
        for i in 1..20 {
            let c = evolve_propagator(&blocks, &c0, 0.25 * i as f64).unwrap();
            let occ = c.total_occupation();
            assert!(occ < prev);
            prev = occ;
        }
    }
}
