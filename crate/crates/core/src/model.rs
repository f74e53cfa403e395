//! Lattice models, Bloch blocks and damping matrices.
//!
//! Sites are indexed `i = 2·cell + sublattice` with sublattice 0 = A and
//! 1 = B. Boundary conditions are periodic.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    cross3, default_ep_tol, dot3, eigensystem, norm3, pauli_decompose, scale3, Complex2x2, C64,
};

pub const DEFAULT_EP_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model is not translation invariant: {0}")]
    NotTranslationInvariant(String),
    #[error("damping block at k={k:.6} is not of pseudo-Hermitian form: {reason}")]
    NotPTForm { k: f64, reason: String },
    #[error("imaginary parts of n_X do not share a common axis (k={k:.6})")]
    NoCommonAxis { k: f64 },
    #[error("imaginary part of n_X vanishes at every k")]
    AllImaginaryPartsZero,
}

/// Coherent hopping `amplitude·c†_to c_from + h.c.`.
///
/// `shift` is the unwrapped cell displacement `cell(to) − cell(from)`; it
/// fixes the Bloch phase when the ring is short enough for bonds to alias.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hopping {
    pub to: usize,
    pub from: usize,
    pub shift: i64,
    pub amplitude: C64,
}

/// One entry `D_{μi}` of a lossy jump operator `L_μ = Σ_i D_{μi} c_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpCoefficient {
    pub mu: usize,
    pub site: usize,
    pub coefficient: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeModel {
    pub u: f64,
    pub w: f64,
    pub lambda: f64,
    pub cells: usize,
    pub hoppings: Vec<Hopping>,
    pub jumps: Vec<JumpCoefficient>,
}

pub fn site(cell: usize, sublattice: usize) -> usize {
    2 * cell + sublattice
}

/// Two-sublattice chain with intra-cell hopping `u`, symmetric inter-cell
/// hopping `w/2` in both directions, and loss `√(2λ)` on every B site.
pub fn build_ssh_model(u: f64, w: f64, lambda: f64, cells: usize) -> Result<LatticeModel, ModelError> {
    if !(u.is_finite() && w.is_finite() && lambda.is_finite()) {
        return Err(ModelError::InvalidParameter("parameters must be finite".into()));
    }
    if lambda < 0.0 {
        return Err(ModelError::InvalidParameter(format!("lambda = {lambda} < 0")));
    }
    if cells < 2 {
        return Err(ModelError::InvalidParameter(format!("L = {cells} < 2")));
    }
    let mut hoppings = Vec::with_capacity(3 * cells);
    let mut jumps = Vec::with_capacity(cells);
    for x in 0..cells {
        let next = (x + 1) % cells;
        hoppings.push(Hopping { to: site(x, 0), from: site(x, 1), shift: 0, amplitude: u.into() });
        hoppings.push(Hopping { to: site(next, 0), from: site(x, 1), shift: 1, amplitude: (0.5 * w).into() });
        hoppings.push(Hopping { to: site(x, 0), from: site(next, 1), shift: -1, amplitude: (0.5 * w).into() });
        jumps.push(JumpCoefficient { mu: x, site: site(x, 1), coefficient: (2.0 * lambda).sqrt().into() });
    }
    Ok(LatticeModel { u, w, lambda, cells, hoppings, jumps })
}

impl LatticeModel {
    pub fn dim(&self) -> usize {
        2 * self.cells
    }

    /// Single-particle Hamiltonian `H`.
    pub fn hamiltonian(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for hop in &self.hoppings {
            h[(hop.to, hop.from)] += hop.amplitude;
            h[(hop.from, hop.to)] += hop.amplitude.conj();
        }
        h
    }

    /// `M_ij = Σ_μ D*_{μi} D_{μj}`
    pub fn loss_matrix(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for a in &self.jumps {
            for b in self.jumps.iter().filter(|b| b.mu == a.mu) {
                m[(a.site, b.site)] += a.coefficient.conj() * b.coefficient;
            }
        }
        m
    }

    /// Minimal-image displacement `cell(a) − cell(b)`.
    fn displacement(&self, a: usize, b: usize) -> i64 {
        let l = self.cells as i64;
        let d = (a / 2) as i64 - (b / 2) as i64;
        let d = d.rem_euclid(l);
        if d > l / 2 {
            d - l
        } else {
            d
        }
    }

    pub fn check_translation_invariance(&self) -> Result<(), ModelError> {
        let tol = 1e-12;
        // hoppings grouped by the cell of the annihilated site
        let mut per_cell: Vec<Vec<(usize, usize, i64, C64)>> = vec![Vec::new(); self.cells];
        for hop in &self.hoppings {
            if hop.to >= self.dim() || hop.from >= self.dim() {
                return Err(ModelError::InvalidParameter("hopping site out of range".into()));
            }
            per_cell[hop.from / 2].push((hop.to % 2, hop.from % 2, hop.shift, hop.amplitude));
        }
        for cell in per_cell.iter_mut() {
            cell.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        }
        for (x, cell) in per_cell.iter().enumerate().skip(1) {
            if !patterns_match(&per_cell[0], cell, tol) {
                return Err(ModelError::NotTranslationInvariant(format!("hoppings of cell {x} differ from cell 0")));
            }
        }

        let mut mus: Vec<usize> = self.jumps.iter().map(|j| j.mu).collect();
        mus.sort_unstable();
        mus.dedup();
        let mut anchors = vec![0usize; self.cells];
        let mut reference: Option<Vec<(usize, usize, i64, C64)>> = None;
        for mu in mus {
            let entries: Vec<&JumpCoefficient> = self.jumps.iter().filter(|j| j.mu == mu).collect();
            if entries.iter().any(|j| j.site >= self.dim()) {
                return Err(ModelError::InvalidParameter("jump site out of range".into()));
            }
            let anchor = entries[0].site;
            anchors[anchor / 2] += 1;
            let mut pattern: Vec<(usize, usize, i64, C64)> = entries
                .iter()
                .map(|j| (0, j.site % 2, self.displacement(j.site, anchor), j.coefficient))
                .collect();
            pattern.sort_by(|a, b| (a.2, a.1).cmp(&(b.2, b.1)));
            match &reference {
                None => reference = Some(pattern),
                Some(r) if patterns_match(r, &pattern, tol) => {}
                Some(_) => {
                    return Err(ModelError::NotTranslationInvariant(format!("jump operator {mu} differs from the first")));
                }
            }
        }
        if anchors.iter().any(|&c| c != anchors[0]) {
            return Err(ModelError::NotTranslationInvariant("jump operators are not uniformly distributed over cells".into()));
        }
        Ok(())
    }
}

fn patterns_match(a: &[(usize, usize, i64, C64)], b: &[(usize, usize, i64, C64)], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(p, q)| p.0 == q.0 && p.1 == q.1 && p.2 == q.2 && (p.3 - q.3).norm() <= tol)
}

/// Uniform grid `k_j = −π + 2πj/n`, endpoint excluded.
pub fn kgrid(n: usize) -> Vec<f64> {
    (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochBlock {
    pub k: f64,
    pub h: Complex2x2,
    pub m: Complex2x2,
    pub x_tilde: Complex2x2,
}

impl BlochBlock {
    pub fn new(k: f64, h: Complex2x2, m: Complex2x2) -> Self {
        let x_tilde = h * C64::new(0.0, -1.0) - m;
        Self { k, h, m, x_tilde }
    }

    /// Block with a prescribed damping matrix; `h` and `m` are recovered
    /// from its anti-Hermitian and Hermitian parts.
    pub fn from_damping(k: f64, x_tilde: Complex2x2) -> Self {
        let m = -x_tilde.hermitian_part();
        let h = (x_tilde - x_tilde.adjoint()).scale(C64::new(0.0, 0.5));
        Self { k, h, m, x_tilde }
    }

    /// The two eigenvalues of `X̃_k`, larger real part first.
    pub fn eigenvalues(&self) -> [C64; 2] {
        let es = eigensystem(&self.x_tilde, default_ep_tol(&self.x_tilde));
        [es.eps_plus, es.eps_minus]
    }
}

pub fn bloch_blocks(model: &LatticeModel, n_k: usize) -> Result<Vec<BlochBlock>, ModelError> {
    if n_k < 8 {
        return Err(ModelError::InvalidParameter(format!("n_k = {n_k} < 8")));
    }
    model.check_translation_invariance()?;
    let inv_l = 1.0 / model.cells as f64;
    Ok(kgrid(n_k)
        .into_iter()
        .map(|k| {
            let mut h = Complex2x2::zero();
            for hop in &model.hoppings {
                let phase = C64::from_polar(inv_l, -k * hop.shift as f64);
                h[(hop.to % 2, hop.from % 2)] += hop.amplitude * phase;
                h[(hop.from % 2, hop.to % 2)] += hop.amplitude.conj() * phase.conj();
            }
            let mut m = Complex2x2::zero();
            for a in &model.jumps {
                for b in model.jumps.iter().filter(|b| b.mu == a.mu) {
                    let d = model.displacement(a.site, b.site) as f64;
                    m[(a.site % 2, b.site % 2)] += a.coefficient.conj() * b.coefficient * C64::from_polar(inv_l, -k * d);
                }
            }
            BlochBlock::new(k, h, m)
        })
        .collect())
}

/// `(X, X̃)` with `X = iHᵀ − Mᵀ` and `X̃ = X*`.
pub fn real_space_damping(model: &LatticeModel) -> (DMatrix<C64>, DMatrix<C64>) {
    let x = model.hamiltonian().transpose() * C64::new(0.0, 1.0) - model.loss_matrix().transpose();
    let x_tilde = x.map(|z| z.conj());
    (x, x_tilde)
}

/// Bloch components `O_k = ⟨k|O|k⟩` of a real-space matrix on the `cells`-point grid,
/// with `|k⟩ = L^{-1/2} Σ_x e^{ikx}|x⟩`.
pub fn to_bloch(matrix: &DMatrix<C64>, cells: usize) -> Vec<Complex2x2> {
    kgrid(cells).into_iter().map(|k| bloch_element(matrix, cells, k, k)).collect()
}

/// `⟨k|O|k'⟩` as a 2×2 sublattice block.
pub fn bloch_element(matrix: &DMatrix<C64>, cells: usize, k: f64, kp: f64) -> Complex2x2 {
    let inv_l = 1.0 / cells as f64;
    let mut out = Complex2x2::zero();
    for x in 0..cells {
        for xp in 0..cells {
            let phase = C64::from_polar(inv_l, -k * x as f64 + kp * xp as f64);
            for s in 0..2 {
                for sp in 0..2 {
                    out[(s, sp)] += phase * matrix[(site(x, s), site(xp, sp))];
                }
            }
        }
    }
    out
}

/// Real-space matrix `Σ_k O_k ⊗ |k⟩⟨k|` from blocks on the `blocks.len()`-point grid.
pub fn from_bloch(blocks: &[Complex2x2]) -> DMatrix<C64> {
    let cells = blocks.len();
    let inv_l = 1.0 / cells as f64;
    let ks = kgrid(cells);
    let mut out = DMatrix::zeros(2 * cells, 2 * cells);
    for x in 0..cells {
        for xp in 0..cells {
            for (k, b) in ks.iter().zip(blocks) {
                let phase = C64::from_polar(inv_l, k * (x as f64 - xp as f64));
                for s in 0..2 {
                    for sp in 0..2 {
                        out[(site(x, s), site(xp, sp))] += phase * b[(s, sp)];
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PtLabel {
    Unbroken,
    Broken,
    ExceptionalPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PtPhase {
    FullyUnbroken,
    PartiallyBroken,
    FullyBroken,
}

impl PtPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            PtPhase::FullyUnbroken => "FullyUnbroken",
            PtPhase::PartiallyBroken => "PartiallyBroken",
            PtPhase::FullyBroken => "FullyBroken",
        }
    }
}

impl PtLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PtLabel::Unbroken => "Unbroken",
            PtLabel::Broken => "Broken",
            PtLabel::ExceptionalPoint => "ExceptionalPoint",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PTClassification {
    pub per_k: Vec<PtLabel>,
    pub global: PtPhase,
}

pub fn pt_label(block: &BlochBlock, ep_tol: f64) -> PtLabel {
    let p = pauli_decompose(&block.x_tilde);
    let disc = p.n_dot_n();
    // n·n = (λ−θ)(λ+θ) for the lossy chain, so this keeps the EP band at width ~ep_tol in θ
    if disc.norm() < ep_tol * p.n_norm().max(1.0) {
        return PtLabel::ExceptionalPoint;
    }
    let mu = disc.sqrt();
    let plus = p.alpha + mu;
    let minus = p.alpha - mu;
    if plus.im.abs() < ep_tol && minus.im.abs() < ep_tol {
        PtLabel::Unbroken
    } else {
        PtLabel::Broken
    }
}

pub fn pt_classify(blocks: &[BlochBlock], ep_tol: f64) -> PTClassification {
    assert!(ep_tol > 0.0, "ep_tol must be positive");
    let per_k: Vec<PtLabel> = blocks.iter().map(|b| pt_label(b, ep_tol)).collect();
    let global = if per_k.iter().all(|l| *l == PtLabel::Unbroken) {
        PtPhase::FullyUnbroken
    } else if per_k.iter().all(|l| *l == PtLabel::Broken) {
        PtPhase::FullyBroken
    } else {
        PtPhase::PartiallyBroken
    };
    PTClassification { per_k, global }
}

/// Pseudo-Hermitian parametrization
/// `n_X = γ·n1 + iρ sinθ·n2 + iρ cosθ·n3` of a damping block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PTDecomposition {
    pub alpha_x: f64,
    pub gamma: f64,
    pub rho: f64,
    pub theta: f64,
    pub n1: [f64; 3],
    pub n2: [f64; 3],
    pub n3: [f64; 3],
}

impl PTDecomposition {
    pub fn n_x(&self) -> [C64; 3] {
        let (s, c) = self.theta.sin_cos();
        std::array::from_fn(|j| {
            C64::new(self.gamma * self.n1[j], self.rho * (s * self.n2[j] + c * self.n3[j]))
        })
    }
}

const PT_FORM_TOL: f64 = 1e-10;

pub fn pt_decompose(block: &BlochBlock) -> Result<PTDecomposition, ModelError> {
    let p = pauli_decompose(&block.x_tilde);
    let scale = block.x_tilde.norm().max(1.0);
    let fail = |reason: String| ModelError::NotPTForm { k: block.k, reason };
    if p.alpha.im.abs() > PT_FORM_TOL * scale {
        return Err(fail(format!("Im(alpha_X) = {:.3e}", p.alpha.im)));
    }
    let re = p.n_re();
    let im = p.n_im();
    let overlap = dot3(&re, &im);
    if overlap.abs() > PT_FORM_TOL * scale * scale {
        return Err(fail(format!("Re(n_X)·Im(n_X) = {overlap:.3e}")));
    }
    let gamma = norm3(&re);
    let rho = norm3(&im);
    let tiny = PT_FORM_TOL * scale;

    let (n1, n3) = match (gamma > tiny, rho > tiny) {
        (true, true) => {
            let n1 = scale3(&re, 1.0 / gamma);
            // drop the residual component of Im(n_X) along n1
            let perp = sub3(&im, &scale3(&n1, dot3(&im, &n1)));
            (n1, sign_fixed(&scale3(&perp, 1.0 / norm3(&perp))))
        }
        (true, false) => {
            let n1 = scale3(&re, 1.0 / gamma);
            (n1, perpendicular_unit(&n1))
        }
        (false, true) => {
            let n3 = sign_fixed(&scale3(&im, 1.0 / rho));
            (perpendicular_unit(&n3), n3)
        }
        (false, false) => ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
    };
    let n2 = cross3(&n3, &n1);
    let theta = dot3(&im, &n2).atan2(dot3(&im, &n3));
    Ok(PTDecomposition { alpha_x: p.alpha.re, gamma, rho, theta, n1, n2, n3 })
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Flips `v` so that its largest-magnitude component is positive.
fn sign_fixed(v: &[f64; 3]) -> [f64; 3] {
    let j = (0..3).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
    if v[j] < 0.0 {
        scale3(v, -1.0)
    } else {
        *v
    }
}

/// Unit vector orthogonal to the unit vector `n`, built from the least aligned axis.
fn perpendicular_unit(n: &[f64; 3]) -> [f64; 3] {
    let j = (0..3).min_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap();
    let mut axis = [0.0; 3];
    axis[j] = 1.0;
    let v = sub3(&axis, &scale3(n, dot3(&axis, n)));
    scale3(&v, 1.0 / norm3(&v))
}

/// Chiral axis `n_Γ` with a right-handed in-plane basis `(e1, e2, n_Γ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiralFrame {
    pub n_gamma: [f64; 3],
    pub e1: [f64; 3],
    pub e2: [f64; 3],
}

impl ChiralFrame {
    /// Frame around an arbitrary nonzero axis.
    pub fn from_axis(axis: [f64; 3]) -> Self {
        let n_gamma = scale3(&axis, 1.0 / norm3(&axis));
        let e1 = perpendicular_unit(&n_gamma);
        let e2 = cross3(&n_gamma, &e1);
        Self { n_gamma, e1, e2 }
    }

    /// In-plane coordinates `(v·e1, v·e2)`.
    pub fn project(&self, v: &[f64; 3]) -> (f64, f64) {
        (dot3(v, &self.e1), dot3(v, &self.e2))
    }
}

/// Common direction of `Im(n_X)` across the grid.
pub fn chiral_axis(blocks: &[BlochBlock], tol: f64) -> Result<ChiralFrame, ModelError> {
    let mut axis: Option<[f64; 3]> = None;
    for b in blocks {
        let im = pauli_decompose(&b.x_tilde).n_im();
        let r = norm3(&im);
        if r <= tol {
            continue;
        }
        let dir = scale3(&im, 1.0 / r);
        match axis {
            None => axis = Some(dir),
            Some(a) => {
                if norm3(&cross3(&a, &dir)) > tol {
                    return Err(ModelError::NoCommonAxis { k: b.k });
                }
            }
        }
    }
    axis.map(ChiralFrame::from_axis).ok_or(ModelError::AllImaginaryPartsZero)
}
