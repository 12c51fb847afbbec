//! Spectral complexities, the β̂ grid, and the end-to-end certificate
//! pipeline.
//!
//! The pipeline follows one recipe for every structure:
//!
//! 1. spectral-normalize the network (no-op for residual networks, whose
//!    skip connections make per-layer rescaling change the function);
//! 2. locate the normalized scale `β` on a finite cover of the nontrivial
//!    range and pick the nearest grid point `β̂`;
//! 3. build the structured sensitivities `A_l` and their β̂ approximants;
//! 4. choose `σ²` from the approximants, take the closed-form optimal
//!    posterior `R*_l`, and evaluate the KL divergence;
//! 5. assemble the certificate
//!    `L̂_γ + 4 √((KL + ln(6 m |grid| / δ)) / (m - 1))`
//!    with the union correction over the grid, plus the per-structure
//!    `Δ(d, h, w)` scaling factor for comparison.
//!
//! Complexity measures use the per-layer coupled form
//! `Π_i gain_i² · Σ_l ‖·_l‖² / gain_l²`, the unique reading of the
//! product-index notation that is invariant under spectral normalization
//! (the same shape the dense measure has).

use serde::{Deserialize, Serialize};

use crate::linalg::RngSeed;
use crate::networks::{empirical_margin_loss, Dataset, LayerParams, NetKind, Network};
use crate::pacbayes::{choose_sigma2, kappa, kl_divergence, optimal_posterior, PosteriorSpec};
use crate::sensitivity::{
    build_circulant, build_diagonal, build_lowrank, build_residual, build_toeplitz,
    circulant_layer_gain, CircGain, SensitivityMatrix, StructureKind, ToeplitzSymbol,
};
use crate::verify::{run_certificate_diagnostics, McDiagnostics};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Spectral complexities
// ---------------------------------------------------------------------------

/// Which complexity measure to evaluate.
#[derive(Debug, Clone)]
pub enum ComplexityKind {
    /// `Φ = Π ‖W_l‖₂² · Σ ‖W_l‖_F² / ‖W_l‖₂²` (dense; also used by the
    /// low-rank bound).
    Phi,
    /// `Φ^rn` with `‖W_l‖₂ + 1` factors (residual).
    PhiRn,
    /// `Φ^circ` over frequency gains and kernel norms.
    PhiCirc(CircGain),
    /// `Φ^toep` with the symbol dynamic-range factor.
    PhiToep(ToeplitzSymbol),
}

/// A complexity value together with its factor decomposition
/// (`value = product · sum · ratio`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityValue {
    pub kind: String,
    pub value: f64,
    /// Product of squared per-layer gains over all layers.
    pub product_term: f64,
    /// Sum of squared per-layer "mass" normalized by the layer's own gain.
    pub sum_term: f64,
    /// Symbol dynamic-range factor (1 except for the Toeplitz measure).
    pub ratio_term: f64,
}

fn coupled_complexity(
    kind: &str,
    gains: &[f64],
    masses_sq: &[f64],
    ratio: f64,
) -> Result<ComplexityValue> {
    if let Some(l) = gains.iter().position(|&g| g == 0.0) {
        return Err(Error::Degenerate(format!(
            "layer {l} has zero gain; the complexity divides by it"
        )));
    }
    let product_term: f64 = gains.iter().map(|g| g * g).product();
    let sum_term: f64 = masses_sq
        .iter()
        .zip(gains)
        .map(|(m2, g)| m2 / (g * g))
        .sum();
    Ok(ComplexityValue {
        kind: kind.to_string(),
        value: product_term * sum_term * ratio,
        product_term,
        sum_term,
        ratio_term: ratio,
    })
}

/// Evaluate a spectral complexity measure on a matching network.
pub fn complexity(net: &Network, kind: &ComplexityKind) -> Result<ComplexityValue> {
    match kind {
        ComplexityKind::Phi => {
            expect_kind(net, NetKind::Dense, "Phi")?;
            let (gains, masses) = dense_norms(net)?;
            coupled_complexity("phi", &gains, &masses, 1.0)
        }
        ComplexityKind::PhiRn => {
            expect_kind(net, NetKind::Residual, "PhiRn")?;
            let (norms, masses) = dense_norms(net)?;
            let shifted: Vec<f64> = norms.iter().map(|n| n + 1.0).collect();
            coupled_complexity("phi_rn", &shifted, &masses, 1.0)
        }
        ComplexityKind::PhiCirc(conv) => {
            expect_kind(net, NetKind::Circulant, "PhiCirc")?;
            let gains: Vec<f64> = net
                .layers()
                .iter()
                .map(|l| match l {
                    LayerParams::Kernel { kernel, .. } => circulant_layer_gain(kernel, *conv),
                    LayerParams::Weight(_) => unreachable!("validated"),
                })
                .collect();
            let masses: Vec<f64> = net.layers().iter().map(|l| l.param_norm_sq()).collect();
            coupled_complexity("phi_circ", &gains, &masses, 1.0)
        }
        ComplexityKind::PhiToep(symbol) => {
            expect_kind(net, NetKind::Toeplitz, "PhiToep")?;
            let extrema = symbol.extrema()?;
            if extrema.is_singular() {
                return Err(Error::SingularSymbol {
                    psi_min: extrema.psi_min,
                });
            }
            let gains: Vec<f64> = net
                .layers()
                .iter()
                .map(|l| match l {
                    LayerParams::Kernel { kernel, .. } => {
                        kernel.iter().map(|v| v.abs()).sum::<f64>()
                    }
                    LayerParams::Weight(_) => unreachable!("validated"),
                })
                .collect();
            let masses: Vec<f64> = net.layers().iter().map(|l| l.param_norm_sq()).collect();
            coupled_complexity("phi_toep", &gains, &masses, extrema.ratio_sq())
        }
    }
}

fn dense_norms(net: &Network) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut norms = Vec::with_capacity(net.depth());
    let mut masses = Vec::with_capacity(net.depth());
    for l in 0..net.depth() {
        norms.push(net.layer_spectral_norm(l)?);
        masses.push(net.layer(l).param_norm_sq());
    }
    Ok((norms, masses))
}

fn expect_kind(net: &Network, kind: NetKind, what: &str) -> Result<()> {
    if net.kind() != kind {
        return Err(Error::StructureMismatch(format!(
            "{what} requires a {kind} network, got {}",
            net.kind()
        )));
    }
    Ok(())
}

/// Complexity measure matching a certificate structure.
pub fn complexity_for_structure(
    net: &Network,
    structure: StructureKind,
    circ_gain: CircGain,
    symbol: &ToeplitzSymbol,
) -> Result<ComplexityValue> {
    let kind = match structure {
        StructureKind::Diagonal | StructureKind::LowRank => ComplexityKind::Phi,
        StructureKind::Residual => ComplexityKind::PhiRn,
        StructureKind::Circulant => ComplexityKind::PhiCirc(circ_gain),
        StructureKind::Toeplitz => ComplexityKind::PhiToep(symbol.clone()),
    };
    complexity(net, &kind)
}

/// The `Δ(d, h, w)` scaling-factor table: `d²h²Φ`, `d²h²Φ^rn`, `d²KΦ`,
/// `d²KΦ^circ`, `d²kΦ^toep`.
pub fn delta_factor(
    net: &Network,
    structure: StructureKind,
    circ_gain: CircGain,
    symbol: &ToeplitzSymbol,
) -> Result<f64> {
    let phi = complexity_for_structure(net, structure, circ_gain, symbol)?.value;
    let d = net.depth() as f64;
    let factor = match structure {
        StructureKind::Diagonal | StructureKind::Residual => {
            let h = net.max_width() as f64;
            d * d * h * h
        }
        StructureKind::LowRank | StructureKind::Circulant => {
            d * d * net.output_dim() as f64
        }
        StructureKind::Toeplitz => {
            let k = (0..net.depth())
                .map(|l| net.layer_param_count(l))
                .max()
                .unwrap_or(1) as f64;
            d * d * k
        }
    };
    Ok(factor * phi)
}

// ---------------------------------------------------------------------------
// Beta grid
// ---------------------------------------------------------------------------

/// Finite cover of the nontrivial range of the normalized spectral scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaGrid {
    pub beta_min: f64,
    pub beta_max: f64,
    pub radius: f64,
    pub points: Vec<f64>,
}

/// Grid over `[ (γ/2B)^{1/d}, (γ√m/2B)^{1/d} ]` with cover radius
/// `(1/d)(γ/2B)^{1/d}`: uniform spacing `2·radius` from `beta_min`, last
/// point at or beyond `beta_max`. `m = 1` degenerates to a single point.
pub fn beta_grid(gamma: f64, b: f64, d: usize, m: usize) -> Result<BetaGrid> {
    if !(gamma > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidArgument(
            "beta grid needs positive gamma and B".into(),
        ));
    }
    if d < 2 || m < 1 {
        return Err(Error::InvalidArgument(format!(
            "beta grid needs d >= 2 and m >= 1, got d={d}, m={m}"
        )));
    }
    let inv_d = 1.0 / d as f64;
    let beta_min = (gamma / (2.0 * b)).powf(inv_d);
    let beta_max = (gamma * (m as f64).sqrt() / (2.0 * b)).powf(inv_d);
    build_grid(beta_min, beta_max, d)
}

/// Residual variant: the grid lives on the shifted axis `β + 1`, with
/// endpoints clamped at 1 (spectral scales are nonnegative, so shifted
/// values below 1 are unreachable).
pub fn beta_grid_residual(gamma: f64, b: f64, d: usize, m: usize) -> Result<BetaGrid> {
    let raw = beta_grid(gamma, b, d, m)?;
    let lo = raw.beta_min.max(1.0);
    let hi = raw.beta_max.max(lo);
    build_grid(lo, hi, d)
}

fn build_grid(beta_min: f64, beta_max: f64, d: usize) -> Result<BetaGrid> {
    let radius = beta_min / d as f64;
    let mut points = vec![beta_min];
    let mut p = beta_min;
    while p < beta_max - 1e-15 * beta_max {
        p += 2.0 * radius;
        points.push(p);
    }
    Ok(BetaGrid {
        beta_min,
        beta_max,
        radius,
        points,
    })
}

impl BetaGrid {
    /// Nearest grid point; exact ties resolve toward the smaller point.
    pub fn nearest(&self, v: f64) -> (usize, f64) {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (i, &p) in self.points.iter().enumerate() {
            let dist = (v - p).abs();
            if dist < best_dist {
                best_dist = dist;
                best = i;
            }
        }
        (best, self.points[best])
    }

    pub fn in_range(&self, v: f64) -> bool {
        let tol = 1e-12 * self.beta_max.max(1.0);
        v >= self.beta_min - tol && v <= self.beta_max + tol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Spectral normalization
// ---------------------------------------------------------------------------

/// A spectrally normalized network together with its scale statistics.
#[derive(Debug, Clone)]
pub struct NormalizedNet {
    pub net: Network,
    /// Geometric-mean layer gain; for residual networks the shifted scale
    /// `(Π (‖W_l‖₂ + 1))^{1/d} - 1` of the unmodified network.
    pub beta: f64,
    pub layer_gains: Vec<f64>,
}

/// Rescale layers to share the geometric-mean gain
/// `β = (Π_l gain_l)^{1/d}`; the product of scale factors is 1, so ReLU
/// homogeneity leaves the network function unchanged. Residual networks are
/// returned as-is: the skip term breaks per-layer rescaling equivariance, so
/// the identity map is the only function-preserving normalization there.
pub fn spectral_normalize(net: &Network, circ_gain: CircGain) -> Result<NormalizedNet> {
    let d = net.depth();
    let gains: Vec<f64> = match net.kind() {
        NetKind::Circulant => net
            .layers()
            .iter()
            .map(|l| match l {
                LayerParams::Kernel { kernel, .. } => circulant_layer_gain(kernel, circ_gain),
                LayerParams::Weight(_) => unreachable!("validated"),
            })
            .collect(),
        _ => (0..d)
            .map(|l| net.layer_spectral_norm(l))
            .collect::<Result<Vec<_>>>()?,
    };

    if net.kind() == NetKind::Residual {
        let beta = gains
            .iter()
            .map(|n| n + 1.0)
            .product::<f64>()
            .powf(1.0 / d as f64)
            - 1.0;
        return Ok(NormalizedNet {
            net: net.clone(),
            beta,
            layer_gains: gains,
        });
    }

    if let Some(l) = gains.iter().position(|&g| g == 0.0) {
        return Err(Error::Degenerate(format!(
            "layer {l} has zero gain; spectral normalization undefined"
        )));
    }
    let beta = gains.iter().product::<f64>().powf(1.0 / d as f64);
    let layers = net
        .layers()
        .iter()
        .zip(&gains)
        .map(|(layer, &g)| {
            let c = beta / g;
            match layer {
                LayerParams::Weight(w) => LayerParams::Weight(w.scale(c)),
                LayerParams::Kernel { kernel, size } => LayerParams::Kernel {
                    kernel: kernel.iter().map(|v| v * c).collect(),
                    size: *size,
                },
            }
        })
        .collect();
    let normalized = Network::new(net.kind(), net.input_dim(), net.output_dim(), layers)?;
    Ok(NormalizedNet {
        net: normalized,
        beta,
        layer_gains: gains,
    })
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// Anchor-input policy for the low-rank Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorPolicy {
    /// The dataset input with the largest norm (default).
    MaxNorm,
    /// A fixed dataset index.
    Index(usize),
}

/// Pipeline knobs for [`certify`].
#[derive(Debug, Clone)]
pub struct CertifyConfig {
    pub circ_gain: CircGain,
    pub symbol: ToeplitzSymbol,
    pub anchor: AnchorPolicy,
    pub seed: u64,
    /// Monte Carlo samples for the embedded diagnostics; 0 disables them.
    pub mc_samples: usize,
    /// Samples for the deterministic perturbation-bound check.
    pub mc_bound_samples: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            circ_gain: CircGain::Paper,
            symbol: ToeplitzSymbol::identity(),
            anchor: AnchorPolicy::MaxNorm,
            seed: 42,
            mc_samples: 2000,
            mc_bound_samples: 500,
        }
    }
}

/// KL report: the exact terms plus the `δ(x) <= x²` relaxed total that
/// reproduces the closed-form algebra.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KlReport {
    pub weight_term: f64,
    pub trace_term: f64,
    pub logdet_term: f64,
    pub dim_term: f64,
    pub total: f64,
    pub relaxed_total: f64,
}

/// Everything a certificate run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub structure: String,
    pub net_kind: String,
    pub depth: usize,
    pub max_width: usize,
    pub output_dim: usize,
    pub m: usize,
    pub gamma: f64,
    pub delta: f64,
    pub radius_b: f64,
    pub empirical_margin_loss: f64,
    pub beta: f64,
    pub beta_hat: f64,
    pub beta_in_range: bool,
    pub grid_size: usize,
    pub grid_beta_min: f64,
    pub grid_beta_max: f64,
    pub sigma2: f64,
    pub eta2: f64,
    pub kl: KlReport,
    pub complexity: ComplexityValue,
    /// For circulant certificates: the complexity under the other gain
    /// convention, so reports always carry both readings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complexity_alt: Option<ComplexityValue>,
    pub final_bound: f64,
    pub asymptotic_delta_factor: f64,
    pub trivial_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowrank_ranks: Option<Vec<usize>>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_diagnostics: Option<McDiagnostics>,
    pub seed: u64,
}

/// Build the structured sensitivities for `structure` on `net` (normalized
/// or not) with radius `b`.
pub fn build_sensitivities(
    net: &Network,
    data: &Dataset,
    structure: StructureKind,
    b: f64,
    cfg: &CertifyConfig,
) -> Result<Vec<SensitivityMatrix>> {
    match structure {
        StructureKind::Diagonal => build_diagonal(net, b),
        StructureKind::Residual => build_residual(net, b),
        StructureKind::LowRank => match cfg.anchor {
            AnchorPolicy::Index(i) => {
                if i >= data.len() {
                    return Err(Error::InvalidArgument(format!(
                        "anchor index {i} out of range for {} samples",
                        data.len()
                    )));
                }
                build_lowrank(net, b, &data.inputs()[i])
            }
            AnchorPolicy::MaxNorm => {
                // Largest-norm input first; a dead anchor (every ReLU path
                // off, so all layer Jacobians vanish) yields rank-zero
                // sensitivities, so fall through to the next-largest input
                // with a live Jacobian.
                let mut order: Vec<usize> = (0..data.len()).collect();
                order.sort_by(|&a, &c| {
                    let na: f64 = data.inputs()[a].iter().map(|v| v * v).sum();
                    let nc: f64 = data.inputs()[c].iter().map(|v| v * v).sum();
                    nc.partial_cmp(&na).expect("finite norms")
                });
                let mut last = None;
                for idx in order {
                    let sens = build_lowrank(net, b, &data.inputs()[idx])?;
                    if sens.iter().map(|s| s.rank()).sum::<usize>() > 0 {
                        return Ok(sens);
                    }
                    last = Some(sens);
                }
                last.ok_or_else(|| Error::InvalidDataset("empty dataset".into()))
            }
        },
        StructureKind::Circulant => build_circulant(net, b, cfg.circ_gain),
        StructureKind::Toeplitz => build_toeplitz(net, b, &cfg.symbol),
    }
}

/// Run the full certificate pipeline for one structure.
pub fn certify(
    net: &Network,
    data: &Dataset,
    gamma: f64,
    delta: f64,
    structure: StructureKind,
    cfg: &CertifyConfig,
) -> Result<BoundReport> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument("delta must be in (0, 1)".into()));
    }
    if net.kind() != structure.net_kind() {
        return Err(Error::StructureMismatch(format!(
            "structure {structure} certifies {} networks, got {}",
            structure.net_kind(),
            net.kind()
        )));
    }
    let m = data.len();
    if m < 2 {
        return Err(Error::InvalidDataset("need at least 2 samples".into()));
    }
    if data.input_dim() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "dataset dim {} vs network input dim {}",
            data.input_dim(),
            net.input_dim()
        )));
    }
    let b = data.radius_b();
    if !(b > 0.0) {
        return Err(Error::Degenerate("dataset radius B is zero".into()));
    }

    let mut notes = Vec::new();
    let normalized = spectral_normalize(net, cfg.circ_gain)?;
    let d = net.depth();

    // Grid over the (possibly shifted) scale axis.
    let (grid, grid_value) = match structure {
        StructureKind::Residual => {
            notes.push(
                "residual: normalization is the identity; grid taken over beta+1, \
                 clamped at 1"
                    .to_string(),
            );
            (
                beta_grid_residual(gamma, b, d, m)?,
                normalized.beta + 1.0,
            )
        }
        _ => (beta_grid(gamma, b, d, m)?, normalized.beta),
    };
    let beta_in_range = grid.in_range(grid_value);
    let (_, grid_point) = grid.nearest(grid_value);
    let beta_hat = match structure {
        StructureKind::Residual => grid_point - 1.0,
        _ => grid_point,
    };
    if beta_in_range {
        debug_assert!(
            (grid_value - grid_point).abs() <= grid_value / d as f64 + 1e-12,
            "grid cover violated"
        );
    }

    let empirical = empirical_margin_loss(&normalized.net, data, gamma)?;

    let sens = build_sensitivities(&normalized.net, data, structure, b, cfg)?;
    let approx: Vec<SensitivityMatrix> = sens
        .iter()
        .map(|s| {
            s.approximate(match structure {
                // approximate() re-adds the +1 internally for residual.
                StructureKind::Residual => beta_hat.max(f64::MIN_POSITIVE),
                _ => beta_hat,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let sigma2 = choose_sigma2(&approx, gamma)?;
    let w_norm_sq = normalized.net.param_norm_sq();
    let eta2 = 16.0 * kappa() * w_norm_sq / (gamma * gamma);
    let posts = sens
        .iter()
        .map(|s| optimal_posterior(s, eta2))
        .collect::<Result<Vec<_>>>()?;
    let kl = kl_divergence(w_norm_sq, sigma2, &posts)?;
    let relaxed_inner: f64 = sens.iter().map(|s| 0.5 * eta2 * s.trace_aat()).sum();
    let kl_report = KlReport {
        weight_term: kl.weight_term,
        trace_term: kl.trace_term,
        logdet_term: kl.logdet_term,
        dim_term: kl.dim_term,
        total: kl.total,
        relaxed_total: kl.weight_term + relaxed_inner,
    };

    let union_log = (6.0 * m as f64 * grid.len() as f64 / delta).ln();
    let raw_bound = empirical + 4.0 * ((kl.total + union_log) / (m as f64 - 1.0)).sqrt();
    let final_bound = if beta_in_range {
        raw_bound
    } else {
        raw_bound.min(1.0)
    };
    let trivial_flag = !beta_in_range || final_bound >= 1.0;

    let complexity_val =
        complexity_for_structure(&normalized.net, structure, cfg.circ_gain, &cfg.symbol)?;
    let complexity_alt = if structure == StructureKind::Circulant {
        let other = match cfg.circ_gain {
            CircGain::Paper => CircGain::Exact,
            CircGain::Exact => CircGain::Paper,
        };
        Some(complexity_for_structure(
            &normalized.net,
            structure,
            other,
            &cfg.symbol,
        )?)
    } else {
        None
    };
    let asymptotic_delta_factor =
        delta_factor(&normalized.net, structure, cfg.circ_gain, &cfg.symbol)?;

    let lowrank_ranks = if structure == StructureKind::LowRank {
        Some(sens.iter().map(|s| s.rank()).collect())
    } else {
        None
    };
    notes.push("complexity product index: coupled per-layer sum (normalization-invariant)".into());
    if structure == StructureKind::Circulant {
        notes.push(format!(
            "circulant gain convention: {:?}; perturbation-bound diagnostics use the exact \
             eigenvalue convention",
            cfg.circ_gain
        ));
    }

    let post_spec = PosteriorSpec {
        sigma2,
        eta2,
        layers: posts,
    };
    let mc_diagnostics = if cfg.mc_samples > 0 {
        Some(run_certificate_diagnostics(
            &normalized.net,
            data,
            &sens,
            &post_spec,
            gamma,
            structure,
            cfg,
            RngSeed(cfg.seed),
        )?)
    } else {
        None
    };

    Ok(BoundReport {
        structure: structure.to_string(),
        net_kind: net.kind().to_string(),
        depth: d,
        max_width: net.max_width(),
        output_dim: net.output_dim(),
        m,
        gamma,
        delta,
        radius_b: b,
        empirical_margin_loss: empirical,
        beta: normalized.beta,
        beta_hat,
        beta_in_range,
        grid_size: grid.len(),
        grid_beta_min: grid.beta_min,
        grid_beta_max: grid.beta_max,
        sigma2,
        eta2,
        kl: kl_report,
        complexity: complexity_val,
        complexity_alt,
        final_bound,
        asymptotic_delta_factor,
        trivial_flag,
        lowrank_ranks,
        notes,
        mc_diagnostics,
        seed: cfg.seed,
    })
}

impl BoundReport {
    /// Canonical JSON document (pretty, trailing newline).
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Human-readable markdown table mirroring the report fields.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# Certificate report: {} structure on a {} network\n\n",
            self.structure, self.net_kind
        ));
        out.push_str("| field | value |\n|---|---|\n");
        let mut row = |k: &str, v: String| out.push_str(&format!("| {k} | {v} |\n"));
        row("structure", self.structure.clone());
        row("empirical_margin_loss", format!("{:.6}", self.empirical_margin_loss));
        row("beta", format!("{:.6e}", self.beta));
        row("beta_hat", format!("{:.6e}", self.beta_hat));
        row("beta_in_range", self.beta_in_range.to_string());
        row(
            "grid",
            format!(
                "{} points on [{:.4e}, {:.4e}]",
                self.grid_size, self.grid_beta_min, self.grid_beta_max
            ),
        );
        row("sigma2", format!("{:.6e}", self.sigma2));
        row("eta2", format!("{:.6e}", self.eta2));
        row("kl_total (exact)", format!("{:.6e}", self.kl.total));
        row("kl_total (relaxed)", format!("{:.6e}", self.kl.relaxed_total));
        row("kl weight term", format!("{:.6e}", self.kl.weight_term));
        row(
            "complexity",
            format!("{} = {:.6e}", self.complexity.kind, self.complexity.value),
        );
        if let Some(alt) = &self.complexity_alt {
            row(
                "complexity (other gain convention)",
                format!("{:.6e}", alt.value),
            );
        }
        row("final_bound", format!("{:.6e}", self.final_bound));
        row(
            "asymptotic_delta_factor",
            format!("{:.6e}", self.asymptotic_delta_factor),
        );
        row("trivial_flag", self.trivial_flag.to_string());
        if let Some(ranks) = &self.lowrank_ranks {
            row("lowrank ranks", format!("{ranks:?}"));
        }
        if let Some(mc) = &self.mc_diagnostics {
            row("mc all pass", mc.all_pass.to_string());
            row(
                "mc perturbation condition (surrogate freq)",
                format!("{:.4}", mc.condition.frequency),
            );
            if let Some(direct) = mc.condition.direct_frequency {
                row("mc perturbation condition (direct freq)", format!("{direct:.4}"));
            }
            row(
                "mc perturbation bound violations",
                format!("{}", mc.perturbation_bound.violations.unwrap_or(0)),
            );
        }
        for n in &self.notes {
            out.push_str(&format!("\n- note: {n}"));
        }
        out.push('\n');
        out
    }
}

/// Markdown comparison table across structures, one row per report,
/// mirroring the `Δ(d, h, w)` table.
pub fn comparison_markdown(reports: &[BoundReport]) -> String {
    let mut out = String::new();
    out.push_str("# Structure comparison\n\n");
    out.push_str(
        "| structure | delta-factor formula | delta factor | KL (exact) | final bound | trivial |\n",
    );
    out.push_str("|---|---|---|---|---|---|\n");
    for r in reports {
        let formula = match r.structure.as_str() {
            "diagonal" => "d^2 h^2 Phi",
            "residual" => "d^2 h^2 Phi_rn",
            "lowrank" => "d^2 K Phi",
            "circulant" => "d^2 K Phi_circ",
            "toeplitz" => "d^2 k Phi_toep",
            _ => "?",
        };
        out.push_str(&format!(
            "| {} | {} | {:.6e} | {:.6e} | {:.6e} | {} |\n",
            r.structure, formula, r.asymptotic_delta_factor, r.kl.total, r.final_bound,
            r.trivial_flag
        ));
    }
    out
}

#[cfg(test)]
mod tests;
