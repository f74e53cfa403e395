//! Region labels over the `(u, w)` plane and the flat-band threshold `u_c`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{cross3, dot3, norm3, scale3};
use crate::dynamics::{initial_state, DynamicsError, InitialStateSpec};
use crate::model::{bloch_blocks, build_ssh_model, chiral_axis, kgrid, pt_classify, ChiralFrame, ModelError, PtPhase, DEFAULT_EP_TOL};
use crate::topology::{transition_scan, TopologyError, TopologyTrace, DEFAULT_GAP_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("[{lo}, {hi}] does not bracket the onset of transitions")]
    NoBracket { lo: f64, hi: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    I,
    II,
    III,
    IV,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TransitionBehavior {
    AtLeastOnce,
    Repeated,
    None,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RegionLabel {
    pub region: Region,
    pub pt_part: PtPhase,
    pub transition_behavior: TransitionBehavior,
}

/// Numerical settings shared by every point of a scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanSettings {
    pub n_k: usize,
    pub t_max: f64,
    pub n_samples: usize,
    pub ep_tol: f64,
    pub gap_tol: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { n_k: 256, t_max: 20.0, n_samples: 2000, ep_tol: DEFAULT_EP_TOL, gap_tol: DEFAULT_GAP_TOL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointClassification {
    pub u: f64,
    pub w: f64,
    pub label: RegionLabel,
    pub transition_times: Vec<f64>,
}

impl PointClassification {
    pub fn n_transitions(&self) -> usize {
        self.transition_times.len()
    }

    pub fn first_transition_time(&self) -> Option<f64> {
        self.transition_times.first().copied()
    }
}

const AXIS_TOL: f64 = 1e-12;

/// Chiral frame of the dynamics, oriented along the normal `n(0) × n(π/2)` of
/// the initial state so that `a < b` starts at `ν = +1`. Falls back to that
/// normal when the damping has no imaginary part anywhere (nothing rotates).
pub fn dynamics_frame(blocks: &[crate::model::BlochBlock], spec: &InitialStateSpec) -> Result<ChiralFrame, ModelError> {
    let normal = initial_plane_normal(spec);
    match chiral_axis(blocks, AXIS_TOL) {
        Ok(frame) if dot3(&frame.n_gamma, &normal) < 0.0 => Ok(ChiralFrame::from_axis(scale3(&frame.n_gamma, -1.0))),
        Err(ModelError::AllImaginaryPartsZero) => Ok(ChiralFrame::from_axis(normal)),
        other => other,
    }
}

fn initial_plane_normal(spec: &InitialStateSpec) -> [f64; 3] {
    let normal = cross3(&spec.n_k(0.0), &spec.n_k(std::f64::consts::FRAC_PI_2));
    if norm3(&normal) > 0.0 {
        normal
    } else {
        [-1.0, 0.0, 0.0]
    }
}

/// Winding trace of the lossy SSH chain from the given initial state.
pub fn scan_point(u: f64, w: f64, lambda: f64, spec: &InitialStateSpec, settings: &ScanSettings) -> Result<(PtPhase, TopologyTrace), PhaseError> {
    let blocks = bloch_blocks(&build_ssh_model(u, w, lambda, 4)?, settings.n_k)?;
    let pt = pt_classify(&blocks, settings.ep_tol).global;
    let c0 = initial_state(spec, &kgrid(settings.n_k));
    let frame = dynamics_frame(&blocks, spec)?;
    let trace = transition_scan(&blocks, &c0, &frame, settings.t_max, settings.n_samples, settings.gap_tol)?;
    Ok((pt, trace))
}

pub fn behavior(transition_times: &[f64], t_max: f64) -> TransitionBehavior {
    match transition_times {
        [] => TransitionBehavior::None,
        [.., last] if *last < 0.75 * t_max => TransitionBehavior::AtLeastOnce,
        ts if ts.len() >= 3 => TransitionBehavior::Repeated,
        _ => TransitionBehavior::Mixed,
    }
}

pub fn region(pt_part: PtPhase, n_transitions: usize) -> Region {
    match pt_part {
        PtPhase::FullyUnbroken => Region::I,
        PtPhase::PartiallyBroken => Region::II,
        PtPhase::FullyBroken if n_transitions > 0 => Region::III,
        PtPhase::FullyBroken => Region::IV,
    }
}

pub fn classify_point(u: f64, w: f64, lambda: f64, spec: &InitialStateSpec, settings: &ScanSettings) -> Result<PointClassification, PhaseError> {
    let (pt_part, trace) = scan_point(u, w, lambda, spec, settings)?;
    let transition_times = trace.transition_times();
    let label = RegionLabel {
        region: region(pt_part, transition_times.len()),
        pt_part,
        transition_behavior: behavior(&transition_times, settings.t_max),
    };
    Ok(PointClassification { u, w, label, transition_times })
}

/// Evenly spaced values `min..=max`; a single step requires `min == max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self, PhaseError> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(PhaseError::InvalidParameter(format!("axis [{min}, {max}] is not a finite interval")));
        }
        if steps == 0 || (steps == 1 && min != max) || (steps >= 2 && min == max) {
            return Err(PhaseError::InvalidParameter(format!("{steps} steps over [{min}, {max}]")));
        }
        Ok(Self { min, max, steps })
    }

    pub fn single(value: f64) -> Self {
        Self { min: value, max: value, steps: 1 }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + (self.max - self.min) * i as f64 / last })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepMetadata {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub u_axis: Axis,
    pub w_axis: Axis,
    pub settings: ScanSettings,
}

/// Points ordered with `w` outermost and `u` innermost.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub points: Vec<PointClassification>,
}

impl SweepResult {
    pub fn point(&self, iu: usize, iw: usize) -> &PointClassification {
        &self.points[iw * self.metadata.u_axis.steps + iu]
    }
}

pub fn sweep(u_axis: Axis, w_axis: Axis, lambda: f64, spec: &InitialStateSpec, settings: &ScanSettings) -> Result<SweepResult, PhaseError> {
    let us = u_axis.values();
    let ws = w_axis.values();
    let grid: Vec<(f64, f64)> = ws.iter().flat_map(|&w| us.iter().map(move |&u| (u, w))).collect();
    let points = grid
        .par_iter()
        .map(|&(u, w)| classify_point(u, w, lambda, spec, settings))
        .collect::<Result<Vec<_>, _>>()?;
    let metadata = SweepMetadata { lambda, a: spec.a, b: spec.b, u_axis, w_axis, settings: *settings };
    Ok(SweepResult { metadata, points })
}

/// Smallest `u` above which the flat-band-like chain shows no transitions,
/// by bisection on "at least one transition within `t_max`".
pub fn find_uc(
    lambda: f64,
    spec: &InitialStateSpec,
    w: f64,
    search: (f64, f64),
    tol: f64,
    settings: &ScanSettings,
) -> Result<f64, PhaseError> {
    let (mut lo, mut hi) = search;
    if !(lo < hi && tol > 0.0) {
        return Err(PhaseError::InvalidParameter(format!("search [{lo}, {hi}] with tol {tol}")));
    }
    let has_transition = |u: f64| -> Result<bool, PhaseError> { Ok(!scan_point(u, w, lambda, spec, settings)?.1.transitions.is_empty()) };
    if !has_transition(lo)? || has_transition(hi)? {
        return Err(PhaseError::NoBracket { lo, hi });
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if has_transition(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> InitialStateSpec {
        InitialStateSpec::new(1.0, 2.0).unwrap()
    }

    fn quick() -> ScanSettings {
        ScanSettings { n_k: 128, n_samples: 800, ..ScanSettings::default() }
    }

    #[test]
    fn flat_band_exemplars() {
        let p = classify_point(0.6, 0.0, 1.0, &spec(), &quick()).unwrap();
        assert_eq!((p.label.region, p.label.transition_behavior), (Region::I, TransitionBehavior::AtLeastOnce));
        let p = classify_point(1.3, 0.0, 1.0, &spec(), &quick()).unwrap();
        assert_eq!((p.label.region, p.label.transition_behavior), (Region::III, TransitionBehavior::Repeated));
        let p = classify_point(2.0, 0.0, 1.0, &spec(), &quick()).unwrap();
        assert_eq!((p.label.region, p.label.transition_behavior), (Region::IV, TransitionBehavior::None));
    }

    #[test]
    fn behavior_rules() {
        assert_eq!(behavior(&[], 20.0), TransitionBehavior::None);
        assert_eq!(behavior(&[3.0], 20.0), TransitionBehavior::AtLeastOnce);
        assert_eq!(behavior(&[3.0, 9.0, 16.0], 20.0), TransitionBehavior::Repeated);
        assert_eq!(behavior(&[18.0], 20.0), TransitionBehavior::Mixed);
        assert_eq!(behavior(&[2.0, 17.0], 20.0), TransitionBehavior::Mixed);
    }

    #[test]
    fn axis_values_hit_endpoints() {
        let a = Axis::new(0.0, 3.0, 61).unwrap();
        let v = a.values();
        assert_eq!(v.len(), 61);
        assert_eq!((v[0], v[60]), (0.0, 3.0));
        assert!((v[20] - 1.0).abs() < 1e-15);
        assert_eq!(Axis::new(0.5, 0.5, 1).unwrap().values(), vec![0.5]);
        assert!(Axis::new(0.0, 1.0, 1).is_err());
        assert!(Axis::new(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn exemplar_pt_parts() {
        let settings = ScanSettings { n_k: 256, n_samples: 200, ..ScanSettings::default() };
        let parts: Vec<PtPhase> = [0.2, 1.0, 2.5]
            .iter()
            .map(|&u| sweep(Axis::single(u), Axis::single(0.5), 1.0, &spec(), &settings).unwrap().points[0].label.pt_part)
            .collect();
        assert_eq!(parts, vec![PtPhase::FullyUnbroken, PtPhase::PartiallyBroken, PtPhase::FullyBroken]);
    }

    #[test]
    fn sweep_is_ordered_w_major() {
        let settings = ScanSettings { n_k: 32, n_samples: 32, t_max: 2.0, ..ScanSettings::default() };
        let r = sweep(Axis::new(0.0, 2.0, 3).unwrap(), Axis::new(0.0, 0.4, 2).unwrap(), 1.0, &spec(), &settings).unwrap();
        let coords: Vec<(f64, f64)> = r.points.iter().map(|p| (p.u, p.w)).collect();
        assert_eq!(coords, vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (0.0, 0.4), (1.0, 0.4), (2.0, 0.4)]);
        assert_eq!(r.point(2, 1).u, 2.0);
    }

    #[test]
    fn lossless_chain_keeps_winding() {
        let settings = ScanSettings { n_k: 128, n_samples: 400, ..ScanSettings::default() };
        let p = classify_point(0.7, 0.0, 0.0, &spec(), &settings).unwrap();
        assert_eq!(p.label.pt_part, PtPhase::FullyBroken);
        assert_eq!(p.label.transition_behavior, TransitionBehavior::None);
    }

    #[test]
    fn frame_orientation_fixes_sign() {
        let settings = ScanSettings { n_k: 128, n_samples: 100, t_max: 1.0, ..ScanSettings::default() };
        for (u, w) in [(0.6, 0.0), (0.2, 0.5), (0.3, 0.6), (1.3, 0.0), (0.0, 0.0)] {
            let (_, trace) = scan_point(u, w, 1.0, &spec(), &settings).unwrap();
            assert_eq!(trace.nu[0], Some(1), "u={u} w={w}");
        }
    }

    #[test]
    fn trivial_state_has_no_bracket() {
        let trivial = InitialStateSpec::new(3.0, 2.0).unwrap();
        let err = find_uc(1.0, &trivial, 0.0, (1.0, 2.0), 0.05, &quick()).unwrap_err();
        assert!(matches!(err, PhaseError::NoBracket { .. }));
        let err = find_uc(1.0, &spec(), 0.0, (1.8, 2.0), 0.05, &quick()).unwrap_err();
        assert!(matches!(err, PhaseError::NoBracket { .. }));
    }
}
