//! Feedforward ReLU network families, margins, perturbations, and analytic
//! layer Jacobians.
//!
//! Four homogeneous families are supported (mixed-kind networks are
//! rejected):
//!
//! - `Dense`: `f(x) = W_d φ(W_{d-1} φ(… φ(W_1 x)))`.
//! - `Residual`: inner layers apply the skip recurrence
//!   `g_l = W_l φ(g_{l-1}) + g_{l-1}` (so inner layers are square); the
//!   final layer is a plain linear map `W_d φ(g_{d-1})` without a skip, which
//!   also lets the output dimension differ from the width.
//! - `Circulant`: every layer is `circ(w_l)` for a length-`h` kernel; the
//!   `K`-dimensional output is the first `K` coordinates of the final
//!   `h`-vector (a fixed, weight-free readout).
//! - `Toeplitz`: every layer is the banded upper Toeplitz `toep(w_l)` for a
//!   length-`k` kernel; readout as in the circulant case.
//!
//! Bias terms are absorbed into the weight matrices; the file format has no
//! bias field. ReLU uses the subgradient convention `φ'(0) = 0`.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{
    circulant_from_kernel, circulant_matvec, dft_forward, toeplitz_from_kernel, toeplitz_matvec,
    Matrix,
};
use crate::{Error, Result};

/// Network family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Dense,
    Residual,
    Circulant,
    Toeplitz,
}

impl std::fmt::Display for NetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NetKind::Dense => "dense",
            NetKind::Residual => "residual",
            NetKind::Circulant => "circulant",
            NetKind::Toeplitz => "toeplitz",
        };
        f.write_str(s)
    }
}

/// Per-layer parameters in the parameterization that is actually perturbed:
/// full matrices for dense/residual layers, kernels for the weight-sharing
/// families.
#[derive(Debug, Clone)]
pub enum LayerParams {
    Weight(Matrix),
    Kernel { kernel: Vec<f64>, size: usize },
}

impl LayerParams {
    /// Number of perturbed parameters in this layer.
    pub fn param_count(&self) -> usize {
        match self {
            LayerParams::Weight(w) => w.rows() * w.cols(),
            LayerParams::Kernel { kernel, .. } => kernel.len(),
        }
    }

    /// Squared Euclidean norm of the perturbed parameterization.
    pub fn param_norm_sq(&self) -> f64 {
        match self {
            LayerParams::Weight(w) => w.frobenius_norm().powi(2),
            LayerParams::Kernel { kernel, .. } => kernel.iter().map(|v| v * v).sum(),
        }
    }
}

/// A `d`-layer ReLU network of one homogeneous [`NetKind`].
#[derive(Debug, Clone)]
pub struct Network {
    kind: NetKind,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerParams>,
}

/// Per-layer additive perturbation, in the same parameterization as
/// [`LayerParams`].
#[derive(Debug, Clone)]
pub enum LayerPerturb {
    Weight(Matrix),
    Kernel(Vec<f64>),
}

impl Network {
    /// Validate and build a network. Enforces: `d >= 2`, finite entries,
    /// chained shapes, square inner residual layers, kernels matching the
    /// layer size, and `K <= h` for the weight-sharing families.
    pub fn new(
        kind: NetKind,
        input_dim: usize,
        output_dim: usize,
        layers: Vec<LayerParams>,
    ) -> Result<Self> {
        let d = layers.len();
        if d < 2 {
            return Err(Error::InvalidNetwork(format!(
                "need at least 2 layers, got {d}"
            )));
        }
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidNetwork("zero input or output dim".into()));
        }
        match kind {
            NetKind::Dense | NetKind::Residual => {
                let mut prev = input_dim;
                for (l, layer) in layers.iter().enumerate() {
                    let w = match layer {
                        LayerParams::Weight(w) => w,
                        LayerParams::Kernel { .. } => {
                            return Err(Error::InvalidNetwork(format!(
                                "{kind} layer {l} must carry a weight matrix"
                            )))
                        }
                    };
                    if w.cols() != prev {
                        return Err(Error::InvalidNetwork(format!(
                            "layer {l} expects input dim {prev}, weight has {} cols",
                            w.cols()
                        )));
                    }
                    if kind == NetKind::Residual && l + 1 < d && w.rows() != w.cols() {
                        return Err(Error::InvalidNetwork(format!(
                            "residual inner layer {l} must be square, got {}x{}",
                            w.rows(),
                            w.cols()
                        )));
                    }
                    prev = w.rows();
                }
                if prev != output_dim {
                    return Err(Error::InvalidNetwork(format!(
                        "last layer outputs {prev}, expected {output_dim}"
                    )));
                }
            }
            NetKind::Circulant | NetKind::Toeplitz => {
                let h = input_dim;
                if output_dim > h {
                    return Err(Error::InvalidNetwork(format!(
                        "output dim {output_dim} exceeds layer size {h}"
                    )));
                }
                for (l, layer) in layers.iter().enumerate() {
                    let (kernel, size) = match layer {
                        LayerParams::Kernel { kernel, size } => (kernel, *size),
                        LayerParams::Weight(_) => {
                            return Err(Error::InvalidNetwork(format!(
                                "{kind} layer {l} must carry a kernel"
                            )))
                        }
                    };
                    if size != h {
                        return Err(Error::InvalidNetwork(format!(
                            "layer {l} size {size} differs from network size {h}"
                        )));
                    }
                    if kernel.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidNetwork(format!(
                            "layer {l} kernel has non-finite entries"
                        )));
                    }
                    match kind {
                        NetKind::Circulant if kernel.len() != h => {
                            return Err(Error::InvalidNetwork(format!(
                                "circulant layer {l} kernel length {} must equal size {h}",
                                kernel.len()
                            )))
                        }
                        NetKind::Toeplitz if kernel.is_empty() || kernel.len() > h => {
                            return Err(Error::InvalidNetwork(format!(
                                "toeplitz layer {l} kernel length {} must be in 1..={h}",
                                kernel.len()
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(Self {
            kind,
            input_dim,
            output_dim,
            layers,
        })
    }

    pub fn kind(&self) -> NetKind {
        self.kind
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &LayerParams {
        &self.layers[l]
    }

    /// Width `h_l` at the output of layer `l` (0-based layers; `width(0)` is
    /// the input dimension). The weight-sharing families have constant width.
    pub fn width(&self, l: usize) -> usize {
        match self.kind {
            NetKind::Dense | NetKind::Residual => {
                if l == 0 {
                    self.input_dim
                } else {
                    match &self.layers[l - 1] {
                        LayerParams::Weight(w) => w.rows(),
                        LayerParams::Kernel { .. } => unreachable!("validated"),
                    }
                }
            }
            NetKind::Circulant | NetKind::Toeplitz => self.input_dim,
        }
    }

    /// Largest width, including the input dimension.
    pub fn max_width(&self) -> usize {
        (0..=self.depth()).map(|l| self.width(l)).max().unwrap_or(0)
    }

    /// Number of perturbed parameters at layer `l` (matrix entries for
    /// dense/residual, kernel taps for the weight-sharing families).
    pub fn layer_param_count(&self, l: usize) -> usize {
        self.layers[l].param_count()
    }

    /// Squared norm of the full perturbed parameterization, `‖w‖₂²`
    /// (kernel-space for the weight-sharing families).
    pub fn param_norm_sq(&self) -> f64 {
        self.layers.iter().map(|l| l.param_norm_sq()).sum()
    }

    /// Dense expansion of the weight matrix at layer `l`.
    pub fn expanded_weight(&self, l: usize) -> Result<Matrix> {
        match &self.layers[l] {
            LayerParams::Weight(w) => Ok(w.clone()),
            LayerParams::Kernel { kernel, size } => match self.kind {
                NetKind::Circulant => Ok(circulant_from_kernel(kernel)),
                NetKind::Toeplitz => Ok(toeplitz_from_kernel(kernel, *size)?),
                _ => unreachable!("validated"),
            },
        }
    }

    /// True spectral norm of the expanded weight at layer `l`. Circulant
    /// layers use the exact closed form `max_j |DFT(w)_j|`; other kinds use
    /// power iteration with the pinned defaults.
    pub fn layer_spectral_norm(&self, l: usize) -> Result<f64> {
        match (&self.layers[l], self.kind) {
            (LayerParams::Kernel { kernel, .. }, NetKind::Circulant) => Ok(dft_forward(kernel)
                .iter()
                .fold(0.0_f64, |m, c| m.max(c.norm()))),
            _ => Ok(self.expanded_weight(l)?.spectral_norm_default()?),
        }
    }

    /// Forward pass; see the module docs for the per-family composition.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.output)
    }

    /// Forward pass retaining the layer inputs and the vectors each ReLU was
    /// applied to (for Jacobians and kink-distance checks).
    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension(format!(
                "input has dim {}, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let d = self.depth();
        let mut trace = ForwardTrace {
            layer_inputs: Vec::with_capacity(d),
            phi_inputs: Vec::with_capacity(d),
            output: Vec::new(),
        };
        match self.kind {
            NetKind::Dense => {
                let mut a = x.to_vec();
                for (l, layer) in self.layers.iter().enumerate() {
                    let w = weight(layer);
                    trace.layer_inputs.push(a.clone());
                    let z = w.matvec(&a)?;
                    if l + 1 < d {
                        trace.phi_inputs.push(z.clone());
                        a = relu(&z);
                    } else {
                        a = z;
                    }
                }
                trace.output = a;
            }
            NetKind::Residual => {
                let mut g = x.to_vec();
                for (l, layer) in self.layers.iter().enumerate() {
                    let w = weight(layer);
                    trace.layer_inputs.push(g.clone());
                    trace.phi_inputs.push(g.clone());
                    let wg = w.matvec(&relu(&g))?;
                    if l + 1 < d {
                        g = wg.iter().zip(&g).map(|(a, b)| a + b).collect();
                    } else {
                        g = wg;
                    }
                }
                trace.output = g;
            }
            NetKind::Circulant | NetKind::Toeplitz => {
                let mut a = x.to_vec();
                for (l, layer) in self.layers.iter().enumerate() {
                    let (kern, size) = kernel(layer);
                    trace.layer_inputs.push(a.clone());
                    let z = match self.kind {
                        NetKind::Circulant => circulant_matvec(kern, &a)?,
                        _ => toeplitz_matvec(kern, size, &a)?,
                    };
                    if l + 1 < d {
                        trace.phi_inputs.push(z.clone());
                        a = relu(&z);
                    } else {
                        a = z;
                    }
                }
                a.truncate(self.output_dim);
                trace.output = a;
            }
        }
        Ok(trace)
    }

    /// New network with per-layer perturbations added; the original is
    /// unchanged. Shapes must match the layer parameterization.
    pub fn perturb(&self, u: &[LayerPerturb]) -> Result<Network> {
        if u.len() != self.depth() {
            return Err(Error::Dimension(format!(
                "perturbation has {} layers, network has {}",
                u.len(),
                self.depth()
            )));
        }
        let mut layers = Vec::with_capacity(self.depth());
        for (l, (params, pert)) in self.layers.iter().zip(u).enumerate() {
            let new = match (params, pert) {
                (LayerParams::Weight(w), LayerPerturb::Weight(uw)) => {
                    LayerParams::Weight(w.add(uw).map_err(|_| {
                        Error::Dimension(format!(
                            "layer {l} perturbation shape {}x{} vs weight {}x{}",
                            uw.rows(),
                            uw.cols(),
                            w.rows(),
                            w.cols()
                        ))
                    })?)
                }
                (LayerParams::Kernel { kernel, size }, LayerPerturb::Kernel(uk)) => {
                    if uk.len() != kernel.len() {
                        return Err(Error::Dimension(format!(
                            "layer {l} kernel perturbation length {} vs {}",
                            uk.len(),
                            kernel.len()
                        )));
                    }
                    LayerParams::Kernel {
                        kernel: kernel.iter().zip(uk).map(|(a, b)| a + b).collect(),
                        size: *size,
                    }
                }
                _ => {
                    return Err(Error::Dimension(format!(
                        "layer {l} perturbation parameterization does not match the layer"
                    )))
                }
            };
            layers.push(new);
        }
        Network::new(self.kind, self.input_dim, self.output_dim, layers)
    }

    /// Analytic Jacobian of the output with respect to `vec(W_l)` (row-major
    /// `vec`), shape `K x (h_l · h_{l-1})`. Dense networks only; uses the
    /// ReLU masks from the forward pass at `x` with `φ'(0) = 0`.
    pub fn layer_jacobian(&self, x: &[f64], l: usize) -> Result<Matrix> {
        if self.kind != NetKind::Dense {
            return Err(Error::StructureMismatch(format!(
                "layer_jacobian supports dense networks, got {}",
                self.kind
            )));
        }
        let d = self.depth();
        if l >= d {
            return Err(Error::InvalidArgument(format!(
                "layer index {l} out of range for depth {d}"
            )));
        }
        let trace = self.forward_trace(x)?;
        let k_out = self.output_dim;
        // G = ∂f/∂z_l: identity at the top layer, otherwise the masked
        // product W_d D_{d-1} W_{d-1} ... W_{l+1} D_l.
        let mut g = Matrix::identity(k_out);
        for j in (l..d - 1).rev() {
            let w_next = weight(&self.layers[j + 1]);
            g = g.matmul(w_next)?;
            let mask = &trace.phi_inputs[j];
            for c in 0..g.cols() {
                if mask[c] <= 0.0 {
                    for r in 0..g.rows() {
                        g.set(r, c, 0.0);
                    }
                }
            }
        }
        let a_in = &trace.layer_inputs[l];
        let rows_w = self.width(l + 1);
        let cols_w = a_in.len();
        debug_assert_eq!(g.cols(), rows_w);
        let mut jac = Matrix::zeros(k_out, rows_w * cols_w);
        for r in 0..k_out {
            for p in 0..rows_w {
                let grp = g.at(r, p);
                if grp == 0.0 {
                    continue;
                }
                for (q, aq) in a_in.iter().enumerate() {
                    jac.set(r, p * cols_w + q, grp * aq);
                }
            }
        }
        Ok(jac)
    }
}

/// Intermediate vectors from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input to each layer (`a_0 = x` first).
    pub layer_inputs: Vec<Vec<f64>>,
    /// The vectors ReLU is applied to, in layer order.
    pub phi_inputs: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl ForwardTrace {
    /// Smallest distance of any ReLU input to its kink.
    pub fn min_kink_distance(&self) -> f64 {
        self.phi_inputs
            .iter()
            .flat_map(|z| z.iter())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

fn weight(layer: &LayerParams) -> &Matrix {
    match layer {
        LayerParams::Weight(w) => w,
        LayerParams::Kernel { .. } => unreachable!("validated at construction"),
    }
}

fn kernel(layer: &LayerParams) -> (&[f64], usize) {
    match layer {
        LayerParams::Kernel { kernel, size } => (kernel, *size),
        LayerParams::Weight(_) => unreachable!("validated at construction"),
    }
}

pub(crate) fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// Margin of `logits` for 1-based class `y`: `logits[y] - max_{j != y} logits[j]`.
pub fn margin(logits: &[f64], y: usize) -> f64 {
    debug_assert!(logits.len() >= 2, "margin needs at least two classes");
    debug_assert!(y >= 1 && y <= logits.len(), "label out of range");
    let own = logits[y - 1];
    let best_other = logits
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != y - 1)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    own - best_other
}

/// Labeled inputs with a certified radius `B = max ‖x‖₂`.
#[derive(Debug, Clone)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    radius_b: f64,
}

impl Dataset {
    /// Build from inputs and 1-based labels. When `radius_b` is `None` the
    /// radius is the exact maximum input norm; an explicit radius must cover
    /// every input.
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, radius_b: Option<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidDataset("empty dataset".into()));
        }
        if inputs.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} inputs vs {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let dim = inputs[0].len();
        let mut max_norm = 0.0_f64;
        for (i, x) in inputs.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "input {i} has dim {}, expected {dim}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("input {i} not finite")));
            }
            max_norm = max_norm.max(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        if labels.iter().any(|&y| y == 0) {
            return Err(Error::InvalidDataset("labels are 1-based".into()));
        }
        let radius = match radius_b {
            Some(b) => {
                if b + 1e-12 < max_norm {
                    return Err(Error::InvalidDataset(format!(
                        "radius {b} smaller than max input norm {max_norm}"
                    )));
                }
                b
            }
            None => max_norm,
        };
        Ok(Self {
            inputs,
            labels,
            radius_b: radius,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn radius_b(&self) -> f64 {
        self.radius_b
    }

    /// Index of the input with the largest norm (the default low-rank
    /// anchor).
    pub fn max_norm_index(&self) -> usize {
        let mut best = 0;
        let mut best_norm = -1.0;
        for (i, x) in self.inputs.iter().enumerate() {
            let n = x.iter().map(|v| v * v).sum::<f64>();
            if n > best_norm {
                best_norm = n;
                best = i;
            }
        }
        best
    }
}

/// Fraction of samples with margin at most `gamma` (the empirical margin
/// loss; `gamma = 0` is the training error).
pub fn empirical_margin_loss(net: &Network, data: &Dataset, gamma: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("empty dataset".into()));
    }
    let k = net.output_dim();
    let mut count = 0usize;
    for (x, &y) in data.inputs().iter().zip(data.labels()) {
        if y > k {
            return Err(Error::InvalidDataset(format!(
                "label {y} exceeds output dim {k}"
            )));
        }
        let logits = net.forward(x)?;
        if margin(&logits, y) <= gamma {
            count += 1;
        }
    }
    Ok(count as f64 / data.len() as f64)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    kind: NetKind,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
}

impl Network {
    /// Serialize to the canonical JSON document (pretty-printed with a
    /// trailing newline; byte-stable for a given network).
    pub fn to_json(&self) -> Result<String> {
        let file = NetworkFile {
            kind: self.kind,
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    LayerParams::Weight(w) => LayerFile {
                        weight: Some((0..w.rows()).map(|i| w.row(i).to_vec()).collect()),
                        kernel: None,
                        size: None,
                    },
                    LayerParams::Kernel { kernel, size } => LayerFile {
                        weight: None,
                        kernel: Some(kernel.clone()),
                        size: Some(*size),
                    },
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Network> {
        let file: NetworkFile = serde_json::from_str(s)?;
        let layers = file
            .layers
            .into_iter()
            .enumerate()
            .map(|(l, lf)| match (lf.weight, lf.kernel, lf.size) {
                (Some(rows), None, None) => Ok(LayerParams::Weight(
                    Matrix::from_rows(&rows).map_err(Error::from)?,
                )),
                (None, Some(kernel), Some(size)) => Ok(LayerParams::Kernel { kernel, size }),
                _ => Err(Error::InvalidNetwork(format!(
                    "layer {l} must carry either a weight matrix or a kernel with a size"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(file.kind, file.input_dim, file.output_dim, layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Network> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s)
    }
}

impl Dataset {
    /// Write as CSV with header `label,x1,...,xn`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        let dim = self.input_dim();
        let mut header = vec!["label".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        wtr.write_record(&header)?;
        for (x, &y) in self.inputs.iter().zip(&self.labels) {
            let mut rec = vec![y.to_string()];
            rec.extend(x.iter().map(|v| format!("{v}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Read CSV written by [`Dataset::save_csv`]; the radius is recomputed
    /// from the data unless `radius_b` is supplied.
    pub fn load_csv(path: &Path, radius_b: Option<f64>) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let mut it = record.iter();
            let label: usize = it
                .next()
                .ok_or_else(|| Error::InvalidDataset("empty row".into()))?
                .trim()
                .parse()
                .map_err(|e| Error::InvalidDataset(format!("bad label: {e}")))?;
            let x = it
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidDataset(format!("bad value: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            labels.push(label);
            inputs.push(x);
        }
        Dataset::new(inputs, labels, radius_b)
    }
}
