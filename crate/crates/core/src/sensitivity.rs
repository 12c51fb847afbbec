//! Structured sensitivity matrices.
//!
//! A sensitivity matrix `A_l` dominates the network's output response to a
//! perturbation of layer `l`: the certificate pipeline requires
//! `‖f_{w+u}(x) - f_w(x)‖_∞² <= Σ_l ‖A_l u_l‖₂²` on the admissible
//! perturbation region. Five designs are built here, one per network
//! structure:
//!
//! - diagonal: `A_l = e·√d·B·Π_{i≠l}‖W_i‖₂ · I`
//! - residual: `A_l = e·√d·B·Π_{i≠l}(‖W_i‖₂+1) · I`
//! - low-rank: `A_l = √d·B·Π_{i≠l}‖W_i‖₂ · V_K V_Kᵀ` with `V_K` the top
//!   right-singular subspace of the layer Jacobian at an anchor input
//! - circulant: `A_l = √d·B·λ_l · Π_K` with `Π_K` the projector onto the
//!   first `K` Fourier modes and `λ_l` a product of per-layer frequency
//!   gains
//! - Toeplitz: `A_l = (e·√d·B·Π_{i≠l}‖W_i‖₂ / ψ_min) · T·P` with `T` a
//!   banded Toeplitz design matrix with symbol `ψ` and `P` the
//!   kernel-vectorization map
//!
//! Every form answers trace/Frobenius/spectral queries about `A Aᵀ` and
//! applies `u ↦ ‖A u‖₂²` without densifying anything larger than the layer
//! itself.
//!
//! Two circulant gain conventions coexist (see [`CircGain`]): the normalized
//! `‖V^H w‖_∞` reading and the exact eigenvalue `max_j |DFT(w)_j|` reading,
//! which differ by `√h` per layer. Reports carry both; the exact convention
//! is the one under which the perturbation-bound inequality is actually
//! checkable.

use serde::{Deserialize, Serialize};
use std::f64::consts::{E, TAU};

use num_complex::Complex64;

use crate::linalg::{
    apply_banded_toeplitz, dft_forward, kernel_vec_apply, symmetric_eigen, Matrix,
};
use crate::networks::{LayerParams, NetKind, Network};
use crate::{Error, Result};

/// Which structured design a sensitivity matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Diagonal,
    Residual,
    LowRank,
    Circulant,
    Toeplitz,
}

impl StructureKind {
    pub const ALL: [StructureKind; 5] = [
        StructureKind::Diagonal,
        StructureKind::Residual,
        StructureKind::LowRank,
        StructureKind::Circulant,
        StructureKind::Toeplitz,
    ];

    /// The network family this structure certifies.
    pub fn net_kind(self) -> NetKind {
        match self {
            StructureKind::Diagonal | StructureKind::LowRank => NetKind::Dense,
            StructureKind::Residual => NetKind::Residual,
            StructureKind::Circulant => NetKind::Circulant,
            StructureKind::Toeplitz => NetKind::Toeplitz,
        }
    }
}

impl std::fmt::Display for StructureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StructureKind::Diagonal => "diagonal",
            StructureKind::Residual => "residual",
            StructureKind::LowRank => "lowrank",
            StructureKind::Circulant => "circulant",
            StructureKind::Toeplitz => "toeplitz",
        };
        f.write_str(s)
    }
}

/// Circulant frequency-gain convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircGain {
    /// `‖V^H w‖_∞` with the normalized DFT matrix — the literal reading of
    /// the frequency-domain analysis, `√h` below the true spectral norm.
    Paper,
    /// `max_j |DFT(w)_j|`, the exact eigenvalue magnitude of `circ(w)`.
    Exact,
}

/// Per-layer frequency gain of a circulant layer under a convention.
pub fn circulant_layer_gain(kernel: &[f64], convention: CircGain) -> f64 {
    let peak = dft_forward(kernel)
        .iter()
        .fold(0.0_f64, |m, c| m.max(c.norm()));
    match convention {
        CircGain::Paper => peak / (kernel.len() as f64).sqrt(),
        CircGain::Exact => peak,
    }
}

// ---------------------------------------------------------------------------
// Toeplitz symbol
// ---------------------------------------------------------------------------

/// Generating function `ψ(ω) = Σ_{i=0}^{k-1} t_i e^{-i·i·ω}` of a banded
/// Toeplitz design matrix.
///
/// The singular values of the banded triangular Toeplitz matrix are bounded
/// below by `min_ω |ψ(ω)|` whenever `ψ(z) = Σ t_i z^i` has no zeros on the
/// closed unit disc; both defaults below satisfy that.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToeplitzSymbol {
    coeffs: Vec<f64>,
    grid: usize,
}

/// Extrema of `|ψ|` over `[0, 2π]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SymbolExtrema {
    pub psi_min: f64,
    pub psi_max: f64,
}

impl SymbolExtrema {
    /// Below this floor the symbol is treated as singular.
    pub const SINGULAR_EPS: f64 = 1e-12;

    pub fn is_singular(&self) -> bool {
        self.psi_min < Self::SINGULAR_EPS
    }

    /// `(ψ_max / ψ_min)²`, the dynamic-range factor in the Toeplitz
    /// complexity.
    pub fn ratio_sq(&self) -> f64 {
        (self.psi_max / self.psi_min).powi(2)
    }
}

/// Default ω-grid resolution for extrema scans.
pub const SYMBOL_GRID: usize = 4096;

impl ToeplitzSymbol {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        Self::with_grid(coeffs, SYMBOL_GRID)
    }

    pub fn with_grid(coeffs: Vec<f64>, grid: usize) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("empty symbol coefficients".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite symbol coefficient".into()));
        }
        Ok(Self { coeffs, grid })
    }

    /// The constant symbol `t = [1]`: `T = I`, `ψ ≡ 1`.
    pub fn identity() -> Self {
        Self {
            coeffs: vec![1.0],
            grid: SYMBOL_GRID,
        }
    }

    /// Geometric two-tap kernel `t = [1, ρ]`, `0 <= ρ < 1`. Its magnitude
    /// range is exactly `[1-ρ, 1+ρ]`, so `ψ_max/ψ_min = (1+ρ)/(1-ρ)`.
    pub fn geometric(rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!(
                "geometric symbol needs 0 <= rho < 1, got {rho}"
            )));
        }
        Self::new(vec![1.0, rho])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bandwidth(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, omega: f64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &t)| Complex64::from_polar(t, -(i as f64) * omega))
            .sum()
    }

    /// Min and max of `|ψ(ω)|` over a uniform grid of at least 4096 points,
    /// refined by golden-section search around the grid extrema to `1e-8`.
    pub fn extrema(&self) -> Result<SymbolExtrema> {
        if self.grid < 4096 {
            return Err(Error::InvalidArgument(format!(
                "symbol grid resolution {} below the required 4096",
                self.grid
            )));
        }
        let n = self.grid;
        let f = |omega: f64| self.eval(omega).norm();
        let mut min_val = f64::INFINITY;
        let mut max_val = f64::NEG_INFINITY;
        let mut min_idx = 0usize;
        let mut max_idx = 0usize;
        for i in 0..=n {
            let omega = TAU * i as f64 / n as f64;
            let v = f(omega);
            if v < min_val {
                min_val = v;
                min_idx = i;
            }
            if v > max_val {
                max_val = v;
                max_idx = i;
            }
        }
        let step = TAU / n as f64;
        let bracket = |idx: usize| {
            let center = TAU * idx as f64 / n as f64;
            (center - step, center + step)
        };
        let (a, b) = bracket(min_idx);
        let min_ref = golden_section_min(&f, a, b, 1e-8);
        let (a, b) = bracket(max_idx);
        let max_ref = -golden_section_min(&|w| -f(w), a, b, 1e-8);
        Ok(SymbolExtrema {
            psi_min: min_val.min(min_ref),
            psi_max: max_val.max(max_ref),
        })
    }
}

/// Golden-section minimization of `f` on `[a, b]` to ω-tolerance `tol`;
/// returns the minimal value.
fn golden_section_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

/// Min/max of `|ψ|` as a free function mirroring the symbol method.
pub fn symbol_extrema(symbol: &ToeplitzSymbol) -> Result<(f64, f64)> {
    let e = symbol.extrema()?;
    Ok((e.psi_min, e.psi_max))
}

// ---------------------------------------------------------------------------
// Sensitivity matrices
// ---------------------------------------------------------------------------

/// Structure-specific geometry of a sensitivity matrix.
#[derive(Debug, Clone)]
pub enum SensForm {
    /// `gain · I` on a `dim`-dimensional layer parameterization.
    ScalarIdentity { dim: usize },
    /// `gain · V V ᵀ` for orthonormal columns `basis` (dim x rank).
    LowRank { basis: Matrix, dim: usize },
    /// `gain · Π_K` in the Fourier basis of size `size`.
    CirculantFreq { rank: usize, size: usize },
    /// `gain · T·P / (base includes 1/ψ_min)`; `gram = PᵀTᵀTP` is the small
    /// `k x k` Gram of the unscaled factors.
    ToeplitzFactor {
        symbol: ToeplitzSymbol,
        gram: Matrix,
        h: usize,
        k: usize,
    },
}

/// One layer's sensitivity matrix `A_l = base · prod · (form geometry)`.
///
/// `base` is the structural constant (`e√d·B`, `√d·B`, or `e√d·B/ψ_min`);
/// `prod` is the learned product factor `Π_{i≠l}(·)` that the β̂
/// approximation replaces.
#[derive(Debug, Clone)]
pub struct SensitivityMatrix {
    pub layer: usize,
    pub kind: StructureKind,
    pub depth: usize,
    base: f64,
    prod: f64,
    form: SensForm,
}

impl SensitivityMatrix {
    /// Per-direction magnitude `base · prod` of `A`.
    pub fn gain(&self) -> f64 {
        self.base * self.prod
    }

    pub fn learned_product(&self) -> f64 {
        self.prod
    }

    pub fn form(&self) -> &SensForm {
        &self.form
    }

    /// Dimension of the perturbed parameterization this matrix acts on.
    pub fn input_dim(&self) -> usize {
        match &self.form {
            SensForm::ScalarIdentity { dim } => *dim,
            SensForm::LowRank { dim, .. } => *dim,
            SensForm::CirculantFreq { size, .. } => *size,
            SensForm::ToeplitzFactor { k, .. } => *k,
        }
    }

    /// Effective rank of `AᵀA` (number of nonzero eigenvalues).
    pub fn rank(&self) -> usize {
        match &self.form {
            SensForm::ScalarIdentity { dim } => *dim,
            SensForm::LowRank { basis, .. } => basis.cols(),
            SensForm::CirculantFreq { rank, .. } => *rank,
            SensForm::ToeplitzFactor { k, .. } => *k,
        }
    }

    /// `Tr(A Aᵀ)`, structure-aware.
    pub fn trace_aat(&self) -> f64 {
        let g2 = self.gain().powi(2);
        match &self.form {
            SensForm::ScalarIdentity { dim } => g2 * *dim as f64,
            SensForm::LowRank { basis, .. } => g2 * basis.cols() as f64,
            SensForm::CirculantFreq { rank, .. } => g2 * *rank as f64,
            SensForm::ToeplitzFactor { gram, .. } => {
                g2 * gram.trace().expect("gram is square")
            }
        }
    }

    /// Nonzero eigenvalues of `AᵀA` (paper bookkeeping for the circulant
    /// form: `rank` copies of the squared gain).
    pub fn ata_eigenvalues(&self) -> Result<Vec<f64>> {
        let g2 = self.gain().powi(2);
        Ok(match &self.form {
            SensForm::ScalarIdentity { dim } => vec![g2; *dim],
            SensForm::LowRank { basis, .. } => vec![g2; basis.cols()],
            SensForm::CirculantFreq { rank, .. } => vec![g2; *rank],
            SensForm::ToeplitzFactor { gram, .. } => {
                let (vals, _) = symmetric_eigen(gram)?;
                vals.iter().map(|v| g2 * v.max(0.0)).collect()
            }
        })
    }

    /// `‖A u‖₂²` without densifying `A`.
    pub fn apply_sq_norm(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "sensitivity expects dim {}, got {}",
                self.input_dim(),
                u.len()
            )));
        }
        let g2 = self.gain().powi(2);
        Ok(match &self.form {
            SensForm::ScalarIdentity { .. } => g2 * u.iter().map(|v| v * v).sum::<f64>(),
            SensForm::LowRank { basis, .. } => {
                let proj = basis.matvec_t(u)?;
                g2 * proj.iter().map(|v| v * v).sum::<f64>()
            }
            SensForm::CirculantFreq { rank, size } => {
                let freq = dft_forward(u);
                let energy: f64 = freq.iter().take(*rank).map(|c| c.norm_sqr()).sum();
                g2 * energy / *size as f64
            }
            SensForm::ToeplitzFactor { gram, .. } => {
                let gu = gram.matvec(u)?;
                g2 * u.iter().zip(&gu).map(|(a, b)| a * b).sum::<f64>()
            }
        })
    }

    /// Dense `AᵀA` for small-dimension tests; the circulant form densifies
    /// the real part of the Hermitian projector, which induces the same
    /// quadratic form on real vectors.
    pub fn ata_dense(&self) -> Result<Matrix> {
        let g2 = self.gain().powi(2);
        Ok(match &self.form {
            SensForm::ScalarIdentity { dim } => Matrix::identity(*dim).scale(g2),
            SensForm::LowRank { basis, dim } => {
                let mut out = Matrix::zeros(*dim, *dim);
                for c in 0..basis.cols() {
                    for i in 0..*dim {
                        let bi = basis.at(i, c);
                        if bi == 0.0 {
                            continue;
                        }
                        for j in 0..*dim {
                            out.set(i, j, out.at(i, j) + g2 * bi * basis.at(j, c));
                        }
                    }
                }
                out
            }
            SensForm::CirculantFreq { rank, size } => {
                circulant_projector_real(*size, *rank).scale(g2)
            }
            SensForm::ToeplitzFactor { gram, .. } => gram.scale(g2),
        })
    }

    /// The β̂ approximation: replace the learned product factor by
    /// `β̂^{d-1}` (residual: `(β̂+1)^{d-1}`), leaving the geometry untouched.
    pub fn approximate(&self, beta_hat: f64) -> Result<SensitivityMatrix> {
        if !(beta_hat > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta_hat must be positive, got {beta_hat}"
            )));
        }
        let exp = (self.depth - 1) as i32;
        let prod = match self.kind {
            StructureKind::Residual => (beta_hat + 1.0).powi(exp),
            _ => beta_hat.powi(exp),
        };
        Ok(SensitivityMatrix {
            prod,
            form: self.form.clone(),
            ..self.clone()
        })
    }
}

/// Real part of the Hermitian projector onto the first `rank` Fourier
/// modes; as a quadratic form on real vectors it coincides with the
/// projector itself.
pub fn circulant_projector_real(size: usize, rank: usize) -> Matrix {
    Matrix::from_fn(size, size, |r, c| {
        let diff = (r as isize - c as isize).rem_euclid(size as isize) as f64;
        (0..rank)
            .map(|j| (TAU * j as f64 * diff / size as f64).cos())
            .sum::<f64>()
            / size as f64
    })
}

fn per_layer_spectral_norms(net: &Network) -> Result<Vec<f64>> {
    (0..net.depth()).map(|l| net.layer_spectral_norm(l)).collect()
}

fn exclusive_products(gains: &[f64]) -> Vec<f64> {
    let d = gains.len();
    (0..d)
        .map(|l| {
            gains
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != l)
                .map(|(_, g)| g)
                .product()
        })
        .collect()
}

fn require_kind(net: &Network, expect: NetKind, what: &str) -> Result<()> {
    if net.kind() != expect {
        return Err(Error::StructureMismatch(format!(
            "{what} requires a {expect} network, got {}",
            net.kind()
        )));
    }
    Ok(())
}

/// Diagonal design for dense networks: `A_l = e√d·B·Π_{i≠l}‖W_i‖₂ · I`.
pub fn build_diagonal(net: &Network, b: f64) -> Result<Vec<SensitivityMatrix>> {
    require_kind(net, NetKind::Dense, "diagonal sensitivity")?;
    if b < 0.0 {
        return Err(Error::InvalidArgument("radius B must be nonnegative".into()));
    }
    let norms = per_layer_spectral_norms(net)?;
    if let Some(l) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::Degenerate(format!(
            "layer {l} has zero spectral norm; diagonal gains are undefined"
        )));
    }
    let d = net.depth();
    let base = E * (d as f64).sqrt() * b;
    let prods = exclusive_products(&norms);
    Ok((0..d)
        .map(|l| SensitivityMatrix {
            layer: l,
            kind: StructureKind::Diagonal,
            depth: d,
            base,
            prod: prods[l],
            form: SensForm::ScalarIdentity {
                dim: net.layer_param_count(l),
            },
        })
        .collect())
}

/// Residual design: `A_l = e√d·B·Π_{i≠l}(‖W_i‖₂+1) · I`. Always
/// well-defined (the `+1` keeps gains positive).
pub fn build_residual(net: &Network, b: f64) -> Result<Vec<SensitivityMatrix>> {
    require_kind(net, NetKind::Residual, "residual sensitivity")?;
    if b < 0.0 {
        return Err(Error::InvalidArgument("radius B must be nonnegative".into()));
    }
    let shifted: Vec<f64> = per_layer_spectral_norms(net)?
        .iter()
        .map(|n| n + 1.0)
        .collect();
    let d = net.depth();
    let base = E * (d as f64).sqrt() * b;
    let prods = exclusive_products(&shifted);
    Ok((0..d)
        .map(|l| SensitivityMatrix {
            layer: l,
            kind: StructureKind::Residual,
            depth: d,
            base,
            prod: prods[l],
            form: SensForm::ScalarIdentity {
                dim: net.layer_param_count(l),
            },
        })
        .collect())
}

/// Low-rank design for dense networks: the top right-singular subspace of
/// the layer Jacobian at `anchor_x`, with equal gains `B·Π_{i≠l}‖W_i‖₂` on
/// the retained directions and `√d` folded into the structural scale.
/// Rank-deficient Jacobians keep their actual rank; [`SensitivityMatrix::rank`]
/// reports it.
pub fn build_lowrank(net: &Network, b: f64, anchor_x: &[f64]) -> Result<Vec<SensitivityMatrix>> {
    require_kind(net, NetKind::Dense, "low-rank sensitivity")?;
    if b < 0.0 {
        return Err(Error::InvalidArgument("radius B must be nonnegative".into()));
    }
    let anchor_norm = anchor_x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if anchor_norm > b * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "anchor input norm {anchor_norm} exceeds radius {b}"
        )));
    }
    let norms = per_layer_spectral_norms(net)?;
    if let Some(l) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::Degenerate(format!(
            "layer {l} has zero spectral norm; low-rank gains are undefined"
        )));
    }
    let d = net.depth();
    let base = (d as f64).sqrt() * b;
    let prods = exclusive_products(&norms);
    let mut out = Vec::with_capacity(d);
    for l in 0..d {
        let jac = net.layer_jacobian(anchor_x, l)?;
        let basis = right_singular_basis(&jac)?;
        let dim = net.layer_param_count(l);
        out.push(SensitivityMatrix {
            layer: l,
            kind: StructureKind::LowRank,
            depth: d,
            base,
            prod: prods[l],
            form: SensForm::LowRank { basis, dim },
        });
    }
    Ok(out)
}

/// Orthonormal basis of the row space of `j` (its right-singular vectors
/// for nonzero singular values), via the small-side Gram `J Jᵀ`.
fn right_singular_basis(j: &Matrix) -> Result<Matrix> {
    let jjt = j.matmul(&j.transpose())?;
    let (vals, vecs) = symmetric_eigen(&jjt)?;
    let k = j.rows();
    let s_max = vals.iter().fold(0.0_f64, |m, v| m.max(v.max(0.0))).sqrt();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    // Eigenvalues arrive ascending; take from the top.
    for idx in (0..k).rev() {
        let s = vals[idx].max(0.0).sqrt();
        if s_max == 0.0 || s <= 1e-9 * s_max {
            continue;
        }
        let u: Vec<f64> = (0..k).map(|r| vecs.at(r, idx)).collect();
        let mut v = j.matvec_t(&u)?;
        for vi in &mut v {
            *vi /= s;
        }
        cols.push(v);
    }
    let rank = cols.len();
    let q = j.cols();
    Ok(Matrix::from_fn(q, rank, |r, c| cols[c][r]))
}

/// Circulant design: rank-`K` Fourier projector scaled by
/// `√d·B·Π_{i≠l} g_i` where `g_i` is the per-layer frequency gain under
/// `convention`.
pub fn build_circulant(
    net: &Network,
    b: f64,
    convention: CircGain,
) -> Result<Vec<SensitivityMatrix>> {
    require_kind(net, NetKind::Circulant, "circulant sensitivity")?;
    if b < 0.0 {
        return Err(Error::InvalidArgument("radius B must be nonnegative".into()));
    }
    let d = net.depth();
    let gains: Vec<f64> = net
        .layers()
        .iter()
        .map(|l| match l {
            LayerParams::Kernel { kernel, .. } => circulant_layer_gain(kernel, convention),
            LayerParams::Weight(_) => unreachable!("validated"),
        })
        .collect();
    let base = (d as f64).sqrt() * b;
    let prods = exclusive_products(&gains);
    Ok((0..d)
        .map(|l| SensitivityMatrix {
            layer: l,
            kind: StructureKind::Circulant,
            depth: d,
            base,
            prod: prods[l],
            form: SensForm::CirculantFreq {
                rank: net.output_dim(),
                size: net.input_dim(),
            },
        })
        .collect())
}

/// Toeplitz design: `A_l = (e√d·B·Π_{i≠l}‖W_i‖₂/ψ_min) · T·P` with the
/// `k x k` Gram `PᵀTᵀTP` cached. Errors when the symbol is effectively
/// singular.
pub fn build_toeplitz(
    net: &Network,
    b: f64,
    symbol: &ToeplitzSymbol,
) -> Result<Vec<SensitivityMatrix>> {
    require_kind(net, NetKind::Toeplitz, "toeplitz sensitivity")?;
    if b < 0.0 {
        return Err(Error::InvalidArgument("radius B must be nonnegative".into()));
    }
    let extrema = symbol.extrema()?;
    if extrema.is_singular() || extrema.psi_min <= 0.0 {
        return Err(Error::SingularSymbol {
            psi_min: extrema.psi_min,
        });
    }
    let norms = per_layer_spectral_norms(net)?;
    let d = net.depth();
    let h = net.input_dim();
    let base = E * (d as f64).sqrt() * b / extrema.psi_min;
    let prods = exclusive_products(&norms);
    let mut out = Vec::with_capacity(d);
    for l in 0..d {
        let k = net.layer_param_count(l);
        let gram = toeplitz_design_gram(symbol, h, k)?;
        out.push(SensitivityMatrix {
            layer: l,
            kind: StructureKind::Toeplitz,
            depth: d,
            base,
            prod: prods[l],
            form: SensForm::ToeplitzFactor {
                symbol: symbol.clone(),
                gram,
                h,
                k,
            },
        });
    }
    Ok(out)
}

/// `PᵀTᵀTP` for the size-`h²` banded design matrix `T` and the `(h², k)`
/// kernel-vectorization map `P`, assembled matrix-free.
pub fn toeplitz_design_gram(symbol: &ToeplitzSymbol, h: usize, k: usize) -> Result<Matrix> {
    let len = h * h;
    if symbol.bandwidth() > len {
        return Err(Error::InvalidArgument(format!(
            "symbol bandwidth {} exceeds design size {len}",
            symbol.bandwidth()
        )));
    }
    // Columns of T·P: apply the banded T to each embedded basis kernel.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let embedded = kernel_vec_apply(h, &e);
        cols.push(apply_banded_toeplitz(symbol.coeffs(), len, &embedded)?);
    }
    let mut gram = Matrix::zeros(k, k);
    for a in 0..k {
        for c in a..k {
            let v = cols[a].iter().zip(&cols[c]).map(|(x, y)| x * y).sum();
            gram.set(a, c, v);
            gram.set(c, a, v);
        }
    }
    Ok(gram)
}

/// Frequency-mode eigenvalue profile of a circulant-form `AᵀA` after
/// real-symmetrization: mode `j` carries
/// `gain² · (1[j<K] + 1[(h-j) mod h < K]) / 2`.
pub fn circulant_real_mode_profile(gain_sq: f64, rank: usize, size: usize) -> Vec<f64> {
    (0..size)
        .map(|j| {
            let fwd = if j < rank { 1.0 } else { 0.0 };
            let mirror = if (size - j) % size < rank { 1.0 } else { 0.0 };
            gain_sq * 0.5 * (fwd + mirror)
        })
        .collect()
}

/// Helper shared with sampling: symmetrize a per-mode profile so the
/// implied circulant matrix is real.
pub fn symmetrize_modes(vals: &[f64]) -> Vec<f64> {
    let h = vals.len();
    (0..h).map(|j| 0.5 * (vals[j] + vals[(h - j) % h])).collect()
}
