//! Modular Hamiltonians, chiral winding numbers and dynamic transitions.
//!
//! The winding is evaluated on the discretized Brillouin zone: the in-plane
//! Bloch vectors `p(k) = (n_C·e1, n_C·e2)/α_C` at consecutive grid points form
//! a closed polygon, and the sum of principal-value angle increments is
//! `2π` times its winding about the origin. That integer can only change when
//! the polygon sweeps through the origin, so the polygon's distance to the
//! origin is the gap reported as `min_amp`. Dividing by `α_C` makes the gap
//! insensitive to the overall decay of the state.
//!
//! A polygon only stands in for the continuum curve while the grid resolves
//! it. Near exceptional points the rotation rate of `p(k)` varies without
//! bound in `k`, so at late times neighbouring points drift arbitrarily far
//! apart in phase. A winding is accepted only if every phase step satisfies
//! `|Δφ| ≤ π/2`; otherwise the sample is `Unresolved`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{angle_between, hermitian_function, hermitian_log, norm3, pauli_decompose, scale3, Complex2x2};
use crate::dynamics::{CorrelationField, DynamicsError, PropagatorEngine};
use crate::model::{BlochBlock, ChiralFrame};

pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// Largest phase step between neighbouring grid points for a resolved winding.
pub const MAX_PHASE_STEP: f64 = PI / 2.0;

/// Margin by which the occupation spectrum must avoid 0 and 1 for `K` to exist.
const SPECTRUM_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("occupations at k={k:.6} are ({lo:.3e}, {hi:.3e}); the modular Hamiltonian diverges")]
    SpectrumOutOfRange { k: f64, lo: f64, hi: f64 },
    #[error("correlation block at k={k:.6} is not Hermitian")]
    NotHermitian { k: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Blocks `K_k = α_K σ0 + n_K·σ` with `C_k^T = (e^{K_k} + 1)^{-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModularField {
    pub kgrid: Vec<f64>,
    pub blocks: Vec<Complex2x2>,
    pub alpha_k: Vec<f64>,
    pub n_k: Vec<[f64; 3]>,
    pub time: f64,
}

impl ModularField {
    pub fn from_blocks(kgrid: Vec<f64>, blocks: Vec<Complex2x2>, time: f64) -> Self {
        let (alpha_k, n_k) = blocks
            .iter()
            .map(|b| {
                let p = pauli_decompose(b);
                (p.alpha.re, p.n_re())
            })
            .unzip();
        Self { kgrid, blocks, alpha_k, n_k, time }
    }
}

fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `K_k = ln[(1 − C_k^T)(C_k^T)^{-1}]`
pub fn modular_from_correlation(c: &CorrelationField) -> Result<ModularField, TopologyError> {
    let blocks = c
        .kgrid
        .iter()
        .zip(&c.blocks)
        .map(|(&k, b)| {
            if !b.is_hermitian(1e-10 * b.norm().max(1.0)) {
                return Err(TopologyError::NotHermitian { k });
            }
            let [lo, hi] = crate::dynamics::occupation_spectrum(b);
            if lo <= SPECTRUM_MARGIN || hi >= 1.0 - SPECTRUM_MARGIN {
                return Err(TopologyError::SpectrumOutOfRange { k, lo, hi });
            }
            let herm = b.hermitian_part();
            let inv = herm.inverse().ok_or(TopologyError::SpectrumOutOfRange { k, lo, hi })?;
            let ratio = (Complex2x2::identity() - herm) * inv;
            hermitian_log(&ratio.hermitian_part()).map_err(|_| TopologyError::SpectrumOutOfRange { k, lo, hi })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModularField::from_blocks(c.kgrid.clone(), blocks, c.time))
}

/// `C_k^T = (e^{K_k} + 1)^{-1}`
pub fn correlation_from_modular(k: &ModularField) -> CorrelationField {
    let blocks = k.blocks.iter().map(|b| hermitian_function(b, fermi)).collect();
    CorrelationField { kgrid: k.kgrid.clone(), blocks, time: k.time }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiralReport {
    pub max_axis_component: f64,
    pub ok: bool,
}

/// Largest relative component of `n_C` along the chiral axis.
pub fn check_chiral(c: &CorrelationField, frame: &ChiralFrame, tol: f64) -> ChiralReport {
    let max_axis_component = (0..c.len())
        .map(|j| {
            let (_, n) = c.bloch_vector(j);
            let along = crate::algebra::dot3(&n, &frame.n_gamma).abs();
            along / norm3(&n).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    ChiralReport { max_axis_component, ok: max_axis_component < tol }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Winding {
    Defined { nu: i64, min_amp: f64 },
    Undefined { min_amp: f64 },
    /// Some neighbouring phase step exceeds [`MAX_PHASE_STEP`]: the loop is under-sampled.
    Unresolved { nu: i64, max_phase_step: f64, min_amp: f64 },
}

impl Winding {
    pub fn nu(&self) -> Option<i64> {
        match self {
            Winding::Defined { nu, .. } => Some(*nu),
            Winding::Undefined { .. } | Winding::Unresolved { .. } => None,
        }
    }

    pub fn min_amp(&self) -> f64 {
        match self {
            Winding::Defined { min_amp, .. } | Winding::Undefined { min_amp } | Winding::Unresolved { min_amp, .. } => *min_amp,
        }
    }
}

/// Principal-value angle increments `Δφ ∈ (−π, π]` around the closed loop.
pub fn phase_steps(points: &[(f64, f64)]) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|j| {
            let (x0, y0) = points[j];
            let (x1, y1) = points[(j + 1) % n];
            let mut d = y1.atan2(x1) - y0.atan2(x0);
            if d > PI {
                d -= 2.0 * PI;
            } else if d <= -PI {
                d += 2.0 * PI;
            }
            d
        })
        .collect()
}

/// Sum of principal angle increments around the closed loop, in turns.
pub fn loop_turns(points: &[(f64, f64)]) -> f64 {
    phase_steps(points).iter().sum::<f64>() / (2.0 * PI)
}

/// Distance from the origin to the closed polygon through `points`.
pub fn loop_gap(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|j| {
            let (px, py) = points[j];
            let (qx, qy) = points[(j + 1) % n];
            let (dx, dy) = (qx - px, qy - py);
            let len2 = dx * dx + dy * dy;
            let s = if len2 > 0.0 { (-(px * dx + py * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            (px + s * dx).hypot(py + s * dy)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Winding of an arbitrary closed loop of 3-vectors projected on the chiral plane.
pub fn winding_of_vectors(vectors: &[[f64; 3]], frame: &ChiralFrame, gap_tol: f64) -> Winding {
    let points: Vec<(f64, f64)> = vectors.iter().map(|v| frame.project(v)).collect();
    winding_of_points(&points, gap_tol, true)
}

fn winding_of_points(points: &[(f64, f64)], gap_tol: f64, check_resolution: bool) -> Winding {
    let min_amp = loop_gap(points);
    if !(min_amp >= gap_tol) {
        return Winding::Undefined { min_amp: if min_amp.is_nan() { 0.0 } else { min_amp } };
    }
    let nu = loop_turns(points).round() as i64;
    // the modular vector n_K points opposite to n_C; point reflection keeps the winding
    let flipped: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (-x, -y)).collect();
    let nu_k = loop_turns(&flipped).round() as i64;
    assert_eq!(nu, nu_k, "winding must be invariant under n -> -n");
    if check_resolution {
        let max_phase_step = phase_steps(points).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if max_phase_step > MAX_PHASE_STEP {
            return Winding::Unresolved { nu: nu_k, max_phase_step, min_amp };
        }
    }
    Winding::Defined { nu: nu_k, min_amp }
}

fn planar_points(c: &CorrelationField, frame: &ChiralFrame) -> Vec<(f64, f64)> {
    (0..c.len())
        .map(|j| {
            let (alpha, n) = c.bloch_vector(j);
            let (x, y) = frame.project(&n);
            if alpha > 0.0 {
                (x / alpha, y / alpha)
            } else {
                (0.0, 0.0)
            }
        })
        .collect()
}

/// Chiral winding number of the modular Hamiltonian encoded in `c`.
pub fn winding_number(c: &CorrelationField, frame: &ChiralFrame, gap_tol: f64) -> Winding {
    winding_of_points(&planar_points(c, frame), gap_tol, true)
}

/// Winding of the full-grid polygon, defined whenever it misses the origin.
pub fn polygon_winding(c: &CorrelationField, frame: &ChiralFrame) -> Winding {
    winding_of_points(&planar_points(c, frame), f64::MIN_POSITIVE, false)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub time: f64,
    pub nu_before: i64,
    pub nu_after: i64,
    pub min_planar_amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopologyTrace {
    pub times: Vec<f64>,
    pub nu: Vec<Option<i64>>,
    pub min_planar_amplitude: Vec<f64>,
    pub transitions: Vec<Transition>,
}

impl TopologyTrace {
    pub fn transition_times(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.time).collect()
    }

    pub fn final_nu(&self) -> Option<i64> {
        self.nu.iter().rev().find_map(|v| *v)
    }
}

/// Bisection stops once the bracket is this fraction of the horizon.
const REFINE_REL_WIDTH: f64 = 1e-12;
const REFINE_MAX_DEPTH: usize = 200;

struct Refiner<'a> {
    engine: &'a PropagatorEngine,
    frame: &'a ChiralFrame,
    width: f64,
}

impl Refiner<'_> {
    fn exact_winding(&self, t: f64) -> Winding {
        polygon_winding(&self.engine.at(t), self.frame)
    }

    fn refine(&self, mut lo: f64, nu_lo: i64, mut hi: f64, nu_hi: i64, depth: usize, out: &mut Vec<Transition>) {
        for _ in 0..REFINE_MAX_DEPTH {
            if hi - lo <= self.width {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let w = self.exact_winding(mid);
            match w.nu() {
                None => {
                    out.push(Transition { time: mid, nu_before: nu_lo, nu_after: nu_hi, min_planar_amplitude: w.min_amp() });
                    return;
                }
                Some(v) if v == nu_lo => lo = mid,
                Some(v) if v == nu_hi => hi = mid,
                Some(v) if depth < 8 => {
                    self.refine(lo, nu_lo, mid, v, depth + 1, out);
                    self.refine(mid, v, hi, nu_hi, depth + 1, out);
                    return;
                }
                Some(_) => lo = mid,
            }
        }
        let time = 0.5 * (lo + hi);
        let min_planar_amplitude = self.exact_winding(time).min_amp();
        out.push(Transition { time, nu_before: nu_lo, nu_after: nu_hi, min_planar_amplitude });
    }
}

/// Winding on a uniform time grid with bisection-refined transition times.
pub fn transition_scan(
    blocks: &[BlochBlock],
    c0: &CorrelationField,
    frame: &ChiralFrame,
    t_max: f64,
    n_samples: usize,
    gap_tol: f64,
) -> Result<TopologyTrace, TopologyError> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(TopologyError::InvalidParameter(format!("t_max = {t_max} must be positive")));
    }
    if n_samples < 16 {
        return Err(TopologyError::InvalidParameter(format!("n_samples = {n_samples} < 16")));
    }
    let engine = PropagatorEngine::new(blocks, c0)?;
    let times: Vec<f64> = (0..n_samples).map(|i| t_max * i as f64 / (n_samples - 1) as f64).collect();
    let samples: Vec<Winding> = times.par_iter().map(|&t| winding_number(&engine.at(t), frame, gap_tol)).collect();

    let refiner = Refiner { engine: &engine, frame, width: REFINE_REL_WIDTH * t_max };
    let mut transitions = Vec::new();
    let mut last: Option<(f64, i64)> = None;
    for (&t, w) in times.iter().zip(&samples) {
        let Some(nu) = w.nu() else { continue };
        if let Some((t_prev, nu_prev)) = last {
            if nu != nu_prev {
                refiner.refine(t_prev, nu_prev, t, nu, 0, &mut transitions);
            }
        }
        last = Some((t, nu));
    }

    Ok(TopologyTrace {
        nu: samples.iter().map(Winding::nu).collect(),
        min_planar_amplitude: samples.iter().map(Winding::min_amp).collect(),
        times,
        transitions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AntiparallelReport {
    pub max_angle: f64,
    /// Grid indices where `n_C` or `n_K` vanishes and no direction exists.
    pub excluded: Vec<usize>,
}

/// Largest angle between `n_K` and `−n_C` over the grid.
pub fn nk_nc_antiparallel_check(c: &CorrelationField) -> Result<AntiparallelReport, TopologyError> {
    let modular = modular_from_correlation(c)?;
    let mut excluded = Vec::new();
    let mut max_angle: f64 = 0.0;
    for j in 0..c.len() {
        let (alpha, n_c) = c.bloch_vector(j);
        let n_k = modular.n_k[j];
        if norm3(&n_c) <= 1e-14 * alpha.abs().max(f64::MIN_POSITIVE) || norm3(&n_k) == 0.0 {
            excluded.push(j);
            continue;
        }
        max_angle = max_angle.max(angle_between(&n_k, &scale3(&n_c, -1.0)));
    }
    Ok(AntiparallelReport { max_angle, excluded })
}
