//! The `pacb` command-line front end.
//!
//! Four subcommands: `certify` (run the certificate pipeline and write
//! report JSON + markdown), `verify` (run the oracle and Monte Carlo
//! suites), `gen` (emit synthetic networks and two-blob datasets), and
//! `sweep` (CSV of delta factors and exact bounds across architecture
//! grids).
//!
//! Exit codes: `0` success, `1` error, `2` the normalized scale fell
//! outside the nontrivial grid range (the certificate is vacuous by
//! construction), `3` a verification check failed.
//!
//! The seed is resolved as: `--seed` flag, then the `PACB_SEED`
//! environment variable, then the config file, then 42.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    beta_grid, beta_grid_residual, certify, comparison_markdown, delta_factor,
    spectral_normalize, AnchorPolicy, CertifyConfig,
};
use crate::linalg::{Matrix, RngSeed};
use crate::networks::{Dataset, LayerParams, NetKind, Network};
use crate::pacbayes::{choose_sigma2, kappa, optimal_posterior, PosteriorSpec};
use crate::sensitivity::{CircGain, StructureKind, ToeplitzSymbol};
use crate::verify::{
    check_neyshabur_perturbation, closed_form_min_d, finite_diff_jacobian, mc_concentration,
    mc_perturbation_bound, mc_perturbation_condition, oracle_min_d, spectral_norm_bruteforce,
};

const EXIT_OK: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_TRIVIAL: i32 = 2;
const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Parser)]
#[command(
    name = "pacb",
    about = "PAC-Bayesian norm-based generalization certificates for small ReLU networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute certificates and write report JSON/markdown.
    Certify(CertifyArgs),
    /// Run the verification suite (oracles + Monte Carlo checks).
    Verify(VerifyArgs),
    /// Generate a synthetic network family and a two-blob dataset.
    Gen(GenArgs),
    /// Sweep architectures and write a CSV of delta factors and bounds.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StructureArg {
    Diagonal,
    Residual,
    Lowrank,
    Circulant,
    Toeplitz,
    All,
}

impl StructureArg {
    fn kinds(self) -> Vec<StructureKind> {
        match self {
            StructureArg::Diagonal => vec![StructureKind::Diagonal],
            StructureArg::Residual => vec![StructureKind::Residual],
            StructureArg::Lowrank => vec![StructureKind::LowRank],
            StructureArg::Circulant => vec![StructureKind::Circulant],
            StructureArg::Toeplitz => vec![StructureKind::Toeplitz],
            StructureArg::All => StructureKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CircGainArg {
    Paper,
    Exact,
}

impl From<CircGainArg> for CircGain {
    fn from(v: CircGainArg) -> Self {
        match v {
            CircGainArg::Paper => CircGain::Paper,
            CircGainArg::Exact => CircGain::Exact,
        }
    }
}

/// Optional JSON config file; command-line flags override these values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub structure: Option<String>,
    pub toeplitz_coeffs: Option<Vec<f64>>,
    pub toeplitz_rho: Option<f64>,
    pub circ_gain: Option<String>,
    pub anchor: Option<String>,
    pub out_dir: Option<PathBuf>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => {
                let s = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                Ok(serde_json::from_str(&s).context("parsing config file")?)
            }
            None => Ok(Self::default()),
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Margin parameter gamma (> 0).
    #[arg(long)]
    gamma: Option<f64>,
    /// Confidence parameter delta in (0, 1).
    #[arg(long)]
    delta: Option<f64>,
    /// Monte Carlo sample count for the statistical checks (>= 1000; 0
    /// disables the embedded diagnostics).
    #[arg(long)]
    mc_samples: Option<usize>,
    /// RNG seed (overrides PACB_SEED and the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Circulant gain convention.
    #[arg(long, value_enum)]
    circ_gain: Option<CircGainArg>,
    /// Toeplitz design symbol as comma-separated taps, e.g. "1,0.5".
    #[arg(long, value_delimiter = ',')]
    toeplitz_coeffs: Option<Vec<f64>>,
    /// Geometric Toeplitz symbol parameter rho (builds taps [1, rho]).
    #[arg(long)]
    toeplitz_rho: Option<f64>,
    /// Low-rank anchor policy: "max-norm" or a dataset index.
    #[arg(long)]
    anchor: Option<String>,
    /// Optional JSON config file supplying defaults for the above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct Resolved {
    gamma: f64,
    delta: f64,
    mc_samples: usize,
    seed: u64,
    circ_gain: CircGain,
    symbol: ToeplitzSymbol,
    anchor: AnchorPolicy,
    out_dir: PathBuf,
}

impl CommonArgs {
    fn resolve(&self, out_dir: Option<&Path>) -> anyhow::Result<Resolved> {
        let file = ConfigFile::load(self.config.as_deref())?;
        let env_seed = std::env::var("PACB_SEED")
            .ok()
            .map(|s| s.parse::<u64>().context("PACB_SEED must be an integer"))
            .transpose()?;
        let seed = self.seed.or(env_seed).or(file.seed).unwrap_or(42);
        let gamma = self.gamma.or(file.gamma).unwrap_or(1.0);
        let delta = self.delta.or(file.delta).unwrap_or(0.05);
        let mc_samples = self.mc_samples.or(file.mc_samples).unwrap_or(2000);
        if mc_samples > 0 && mc_samples < 1000 {
            bail!("mc_samples must be 0 (disabled) or at least 1000, got {mc_samples}");
        }
        let circ_gain = match (&self.circ_gain, file.circ_gain.as_deref()) {
            (Some(v), _) => (*v).into(),
            (None, Some("exact")) => CircGain::Exact,
            (None, Some("paper")) | (None, None) => CircGain::Paper,
            (None, Some(other)) => bail!("unknown circ_gain {other:?} in config"),
        };
        let rho = self.toeplitz_rho.or(file.toeplitz_rho);
        let coeffs = self
            .toeplitz_coeffs
            .clone()
            .or_else(|| file.toeplitz_coeffs.clone());
        let symbol = match (rho, coeffs) {
            (Some(r), None) => ToeplitzSymbol::geometric(r)?,
            (None, Some(c)) => ToeplitzSymbol::new(c)?,
            (None, None) => ToeplitzSymbol::identity(),
            (Some(_), Some(_)) => {
                bail!("pass either toeplitz_rho or toeplitz_coeffs, not both")
            }
        };
        let anchor = match self.anchor.as_deref().or(file.anchor.as_deref()) {
            None | Some("max-norm") => AnchorPolicy::MaxNorm,
            Some(s) => AnchorPolicy::Index(
                s.parse::<usize>()
                    .map_err(|_| anyhow!("anchor must be \"max-norm\" or an index, got {s:?}"))?,
            ),
        };
        let out_dir = out_dir
            .map(Path::to_path_buf)
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Resolved {
            gamma,
            delta,
            mc_samples,
            seed,
            circ_gain,
            symbol,
            anchor,
            out_dir,
        })
    }

    fn certify_config(&self, r: &Resolved) -> CertifyConfig {
        CertifyConfig {
            circ_gain: r.circ_gain,
            symbol: r.symbol.clone(),
            anchor: r.anchor,
            seed: r.seed,
            mc_samples: r.mc_samples,
            mc_bound_samples: 500,
        }
    }
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct CertifyArgs {
    /// Network JSON file; repeat to cover several kinds for --structure all.
    #[arg(long = "net", required = true)]
    nets: Vec<PathBuf>,
    /// Dataset CSV (header: label,x1,...,xn).
    #[arg(long = "data")]
    data: PathBuf,
    /// Which structured certificate(s) to compute.
    #[arg(long, value_enum, default_value_t = StructureArg::Diagonal)]
    structure: StructureArg,
    /// Override the certified radius B (must cover every input norm).
    #[arg(long)]
    radius_b: Option<f64>,
    /// Output directory for report files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

pub fn cmd_certify(args: &CertifyArgs) -> i32 {
    match certify_inner(args) {
        Ok(any_out_of_range) => {
            if any_out_of_range {
                EXIT_TRIVIAL
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn certify_inner(args: &CertifyArgs) -> anyhow::Result<bool> {
    let resolved = args.common.resolve(args.out_dir.as_deref())?;
    let cfg = args.common.certify_config(&resolved);
    let data = Dataset::load_csv(&args.data, args.radius_b)
        .with_context(|| format!("loading dataset {}", args.data.display()))?;
    let nets: Vec<Network> = args
        .nets
        .iter()
        .map(|p| Network::load(p).with_context(|| format!("loading network {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;

    std::fs::create_dir_all(&resolved.out_dir)?;
    let mut reports = Vec::new();
    let mut any_out_of_range = false;
    for structure in args.structure.kinds() {
        let net = nets
            .iter()
            .find(|n| n.kind() == structure.net_kind())
            .ok_or_else(|| {
                anyhow!(
                    "no loaded network of kind {} for structure {structure}",
                    structure.net_kind()
                )
            })?;
        let report = certify(net, &data, resolved.gamma, resolved.delta, structure, &cfg)?;
        let json_path = resolved.out_dir.join(format!("report_{structure}.json"));
        let md_path = resolved.out_dir.join(format!("report_{structure}.md"));
        std::fs::write(&json_path, report.to_json()?)?;
        std::fs::write(&md_path, report.to_markdown())?;
        println!(
            "{structure}: bound {:.6e}{}{} -> {}",
            report.final_bound,
            if report.trivial_flag { " (trivial)" } else { "" },
            match &report.mc_diagnostics {
                Some(mc) if !mc.all_pass => " [mc diagnostics FAILED]",
                _ => "",
            },
            json_path.display()
        );
        any_out_of_range |= !report.beta_in_range;
        reports.push(report);
    }
    if reports.len() > 1 {
        let cmp_path = resolved.out_dir.join("comparison.md");
        std::fs::write(&cmp_path, comparison_markdown(&reports))?;
        println!("comparison table -> {}", cmp_path.display());
    }
    Ok(any_out_of_range)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct VerifyArgs {
    /// Network JSON file.
    #[arg(long = "net")]
    net: PathBuf,
    /// Dataset CSV.
    #[arg(long = "data")]
    data: PathBuf,
    /// Structure to verify (defaults to the network kind's primary
    /// structure).
    #[arg(long, value_enum)]
    structure: Option<StructureArg>,
    /// Comma-separated subset of checks:
    /// condition,bound,concentration,oracle,jacobian,neyshabur.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    /// Fault-injection knob: multiply the pipeline sigma² by this factor.
    #[arg(long, default_value_t = 1.0)]
    sigma2_scale: f64,
    #[command(flatten)]
    common: CommonArgs,
}

pub fn cmd_verify(args: &VerifyArgs) -> i32 {
    match verify_inner(args) {
        Ok(failures) if failures.is_empty() => EXIT_OK,
        Ok(failures) => {
            for f in &failures {
                eprintln!("check failed: {f}");
            }
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn default_structure(kind: NetKind) -> StructureKind {
    match kind {
        NetKind::Dense => StructureKind::Diagonal,
        NetKind::Residual => StructureKind::Residual,
        NetKind::Circulant => StructureKind::Circulant,
        NetKind::Toeplitz => StructureKind::Toeplitz,
    }
}

fn verify_inner(args: &VerifyArgs) -> anyhow::Result<Vec<String>> {
    let resolved = args.common.resolve(None)?;
    let cfg = args.common.certify_config(&resolved);
    let net = Network::load(&args.net)?;
    let data = Dataset::load_csv(&args.data, None)?;
    let structure = match args.structure {
        Some(s) => {
            let kinds = s.kinds();
            if kinds.len() != 1 {
                bail!("verify takes a single structure, not \"all\"");
            }
            kinds[0]
        }
        None => default_structure(net.kind()),
    };
    if structure.net_kind() != net.kind() {
        bail!(
            "structure {structure} verifies {} networks, got {}",
            structure.net_kind(),
            net.kind()
        );
    }
    let selected: Vec<String> = args.checks.clone().unwrap_or_else(|| {
        let mut v = vec![
            "condition".to_string(),
            "bound".to_string(),
            "concentration".to_string(),
            "oracle".to_string(),
        ];
        if net.kind() == NetKind::Dense {
            v.push("jacobian".to_string());
            v.push("neyshabur".to_string());
        }
        v
    });
    let want = |name: &str| selected.iter().any(|s| s == name);

    // Pipeline pieces at the requested gamma. Scales outside the grid fall
    // back to beta_hat = beta (a zero-width approximation the sandwich
    // trivially covers), so the analytic claims stay well-posed.
    let normalized = spectral_normalize(&net, cfg.circ_gain)?;
    let b = data.radius_b();
    let d = net.depth();
    let m = data.len();
    let (grid, grid_value) = match structure {
        StructureKind::Residual => (
            beta_grid_residual(resolved.gamma, b, d, m)?,
            normalized.beta + 1.0,
        ),
        _ => (beta_grid(resolved.gamma, b, d, m)?, normalized.beta),
    };
    let beta_hat = if grid.in_range(grid_value) {
        let (_, p) = grid.nearest(grid_value);
        match structure {
            StructureKind::Residual => p - 1.0,
            _ => p,
        }
    } else {
        normalized.beta
    };
    let sens = crate::bounds::build_sensitivities(&normalized.net, &data, structure, b, &cfg)?;
    let approx = sens
        .iter()
        .map(|s| s.approximate(beta_hat.max(f64::MIN_POSITIVE)))
        .collect::<crate::Result<Vec<_>>>()?;
    let sigma2 = choose_sigma2(&approx, resolved.gamma)? * args.sigma2_scale;
    let eta2 =
        16.0 * kappa() * normalized.net.param_norm_sq() / (resolved.gamma * resolved.gamma);
    let posts = sens
        .iter()
        .map(|s| optimal_posterior(s, eta2))
        .collect::<crate::Result<Vec<_>>>()?;
    let post_spec = PosteriorSpec {
        sigma2,
        eta2,
        layers: posts,
    };

    let mut failures = Vec::new();
    let seed = RngSeed(resolved.seed);

    if want("condition") {
        let r = mc_perturbation_condition(
            &normalized.net,
            &data,
            &post_spec,
            &sens,
            resolved.gamma,
            resolved.mc_samples.max(1000),
            seed,
        )?;
        println!(
            "condition: surrogate {:.4} direct {:.4} pass {}",
            r.frequency,
            r.direct_frequency.unwrap_or(f64::NAN),
            r.pass
        );
        if !r.pass {
            failures.push("perturbation_condition".into());
        }
    }
    if want("bound") {
        let bound_sens = match structure {
            StructureKind::Circulant => {
                crate::sensitivity::build_circulant(&normalized.net, b, CircGain::Exact)?
            }
            _ => sens.clone(),
        };
        let r = mc_perturbation_bound(
            &normalized.net,
            &data,
            &bound_sens,
            structure,
            500,
            RngSeed(resolved.seed.wrapping_add(1 << 40)),
        )?;
        println!(
            "bound: {} violations in {} samples",
            r.violations.unwrap_or(0),
            r.n_samples
        );
        if !r.pass {
            failures.push("perturbation_bound".into());
        }
    }
    if want("concentration") {
        for (l, (s, p)) in sens.iter().zip(&post_spec.layers).enumerate() {
            for t in [std::f64::consts::LN_2, 1.0, 2.0] {
                let r = mc_concentration(
                    s,
                    p,
                    sigma2,
                    t,
                    resolved.mc_samples.max(1000),
                    RngSeed(resolved.seed.wrapping_add((2 + l as u64) << 40)),
                )?;
                if !r.pass {
                    failures.push(format!("concentration layer {l} t={t:.3}"));
                }
            }
        }
        println!(
            "concentration: checked t in {{ln 2, 1, 2}} on {} layers",
            sens.len()
        );
    }
    if want("oracle") {
        let mut rng = RngSeed(resolved.seed.wrapping_add(7 << 40)).rng();
        for trial in 0..3usize {
            let dim = 4 + trial;
            let a = Matrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let eta2_trial = 0.3 + 0.7 * trial as f64;
            let oracle = oracle_min_d(&a, eta2_trial, 50_000, 1e-10)?;
            let closed = closed_form_min_d(&a, eta2_trial)?;
            let diff = oracle.sub(&closed).map_err(crate::Error::from)?.frobenius_norm();
            if diff > 1e-6 {
                failures.push(format!("oracle_min_d trial {trial} (diff {diff:.2e})"));
            }
        }
        println!("oracle: closed-form posterior vs gradient descent on 3 instances");
    }
    if want("jacobian") && net.kind() == NetKind::Dense {
        let mut errs = Vec::new();
        for x in data.inputs().iter().take(10) {
            let trace = normalized.net.forward_trace(x)?;
            if trace.min_kink_distance() < 1e-3 {
                continue;
            }
            for l in 0..d {
                let analytic = normalized.net.layer_jacobian(x, l)?;
                let fd = finite_diff_jacobian(&normalized.net, x, l, 1e-5)?;
                let denom = fd.frobenius_norm().max(1e-12);
                errs.push(
                    analytic
                        .sub(&fd)
                        .map_err(crate::Error::from)?
                        .frobenius_norm()
                        / denom,
                );
            }
        }
        errs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let median = errs.get(errs.len() / 2).copied().unwrap_or(0.0);
        println!(
            "jacobian: median relative error {median:.2e} over {} probes",
            errs.len()
        );
        if median >= 1e-5 {
            failures.push("jacobian_finite_difference".into());
        }
        // Cross-check the two spectral-norm routes while we are here.
        let w0 = normalized.net.expanded_weight(0)?;
        let power = w0.spectral_norm_default().map_err(crate::Error::from)?;
        let brute = spectral_norm_bruteforce(&w0)?;
        if (power - brute).abs() > 1e-8 * brute.max(1.0) {
            failures.push("spectral_norm_oracle".into());
        }
    }
    if want("neyshabur") && net.kind() == NetKind::Dense {
        let r = check_neyshabur_perturbation(
            &normalized.net,
            &data,
            500,
            RngSeed(resolved.seed.wrapping_add(9 << 40)),
        )?;
        println!(
            "neyshabur: {} violations in {} samples",
            r.violations.unwrap_or(0),
            r.n_samples
        );
        if !r.pass {
            failures.push("neyshabur_perturbation".into());
        }
    }
    Ok(failures)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Dense,
    Residual,
    Circulant,
    Toeplitz,
    All,
}

#[derive(Args)]
pub struct GenArgs {
    /// Network family to generate.
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Depth (number of layers, >= 2).
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Width / layer size.
    #[arg(long, default_value_t = 16)]
    h: usize,
    /// Input dimension (dense only; defaults to h).
    #[arg(long)]
    n: Option<usize>,
    /// Output dimension.
    #[arg(long = "K", default_value_t = 2)]
    k_out: usize,
    /// Toeplitz kernel taps.
    #[arg(long, default_value_t = 3)]
    kernel_k: usize,
    /// Dataset size.
    #[arg(long, default_value_t = 200)]
    m: usize,
    /// Weight scale s (entries are N(0, s²/fan-in)).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Blob separation along the first coordinate.
    #[arg(long, default_value_t = 3.0)]
    blob_sep: f64,
    /// Blob noise standard deviation.
    #[arg(long, default_value_t = 0.5)]
    blob_noise: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn cmd_gen(args: &GenArgs) -> i32 {
    match gen_inner(args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn gen_inner(args: &GenArgs) -> anyhow::Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let env_seed = std::env::var("PACB_SEED")
        .ok()
        .map(|s| s.parse::<u64>().context("PACB_SEED must be an integer"))
        .transpose()?;
    let seed = args.seed.or(env_seed).or(file.seed).unwrap_or(42);
    std::fs::create_dir_all(&args.out_dir)?;
    let kinds: Vec<NetKind> = match args.kind {
        GenKind::Dense => vec![NetKind::Dense],
        GenKind::Residual => vec![NetKind::Residual],
        GenKind::Circulant => vec![NetKind::Circulant],
        GenKind::Toeplitz => vec![NetKind::Toeplitz],
        GenKind::All => vec![
            NetKind::Dense,
            NetKind::Residual,
            NetKind::Circulant,
            NetKind::Toeplitz,
        ],
    };
    let input_dim = match args.kind {
        GenKind::Dense => args.n.unwrap_or(args.h),
        // The shared dataset must feed every kind, so the input is the
        // layer size.
        _ => args.h,
    };
    for (i, kind) in kinds.iter().enumerate() {
        let net = generate_network(
            *kind,
            args.d,
            args.h,
            input_dim,
            args.k_out,
            args.kernel_k,
            args.scale,
            RngSeed(seed.wrapping_add(i as u64)),
        )?;
        let name = if kinds.len() == 1 {
            "net.json".to_string()
        } else {
            format!("net_{kind}.json")
        };
        let path = args.out_dir.join(name);
        net.save(&path)?;
        println!("wrote {}", path.display());
    }
    let data = generate_blobs(
        input_dim,
        args.m,
        args.blob_sep,
        args.blob_noise,
        RngSeed(seed.wrapping_add(1000)),
    )?;
    let data_path = args.out_dir.join("data.csv");
    data.save_csv(&data_path)?;
    println!(
        "wrote {} (m={}, B={:.4})",
        data_path.display(),
        data.len(),
        data.radius_b()
    );
    Ok(())
}

/// Seeded random network of a given family with N(0, s²/fan-in) entries.
#[allow(clippy::too_many_arguments)]
pub fn generate_network(
    kind: NetKind,
    d: usize,
    h: usize,
    input_dim: usize,
    output_dim: usize,
    kernel_k: usize,
    scale: f64,
    seed: RngSeed,
) -> crate::Result<Network> {
    let mut rng = seed.rng();
    let mut gauss = |sd: f64| -> f64 { sd * rng.sample::<f64, _>(StandardNormal) };
    let layers: Vec<LayerParams> = match kind {
        NetKind::Dense => {
            let mut dims = vec![input_dim];
            dims.extend(std::iter::repeat(h).take(d - 1));
            dims.push(output_dim);
            (0..d)
                .map(|l| {
                    let (fan_in, fan_out) = (dims[l], dims[l + 1]);
                    let sd = scale / (fan_in as f64).sqrt();
                    LayerParams::Weight(Matrix::from_fn(fan_out, fan_in, |_, _| gauss(sd)))
                })
                .collect()
        }
        NetKind::Residual => {
            let sd = scale / (input_dim as f64).sqrt();
            let mut layers: Vec<LayerParams> = (0..d - 1)
                .map(|_| {
                    LayerParams::Weight(Matrix::from_fn(input_dim, input_dim, |_, _| gauss(sd)))
                })
                .collect();
            layers.push(LayerParams::Weight(Matrix::from_fn(
                output_dim,
                input_dim,
                |_, _| gauss(sd),
            )));
            layers
        }
        NetKind::Circulant => (0..d)
            .map(|_| {
                let sd = scale / (h as f64).sqrt();
                LayerParams::Kernel {
                    kernel: (0..h).map(|_| gauss(sd)).collect(),
                    size: h,
                }
            })
            .collect(),
        NetKind::Toeplitz => (0..d)
            .map(|_| {
                let sd = scale / (kernel_k as f64).sqrt();
                LayerParams::Kernel {
                    kernel: (0..kernel_k).map(|_| gauss(sd)).collect(),
                    size: h,
                }
            })
            .collect(),
    };
    let input = match kind {
        NetKind::Dense | NetKind::Residual => input_dim,
        _ => h,
    };
    Network::new(kind, input, output_dim, layers)
}

/// Two Gaussian blobs at ±sep along the first coordinate, labels 1 and 2;
/// the radius is the exact maximum norm.
pub fn generate_blobs(
    dim: usize,
    m: usize,
    sep: f64,
    noise: f64,
    seed: RngSeed,
) -> crate::Result<Dataset> {
    let mut rng = seed.rng();
    let mut inputs = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let label = if i % 2 == 0 { 1 } else { 2 };
        let sign = if label == 1 { 1.0 } else { -1.0 };
        let mut x: Vec<f64> = (0..dim)
            .map(|_| noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        x[0] += sign * sep;
        inputs.push(x);
        labels.push(label);
    }
    Dataset::new(inputs, labels, None)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SweepArgs {
    /// Depths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    d_list: Vec<usize>,
    /// Widths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "8,16")]
    h_list: Vec<usize>,
    /// Output dimensions to sweep.
    #[arg(long = "out-dim-list", value_delimiter = ',', default_value = "2")]
    out_dim_list: Vec<usize>,
    /// Toeplitz kernel tap counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    kernel_list: Vec<usize>,
    /// Geometric symbol parameters for the Toeplitz rows.
    #[arg(long, value_delimiter = ',', default_value = "0.0")]
    rho_list: Vec<f64>,
    /// Structures to sweep.
    #[arg(long, value_enum, default_value_t = StructureArg::All)]
    structures: StructureArg,
    /// Dataset size per cell.
    #[arg(long, default_value_t = 200)]
    m: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

pub fn cmd_sweep(args: &SweepArgs) -> i32 {
    match sweep_inner(args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn sweep_inner(args: &SweepArgs) -> anyhow::Result<()> {
    let resolved = args.common.resolve(None)?;
    let mut wtr = csv::Writer::from_path(&args.out)?;
    wtr.write_record([
        "d",
        "h",
        "k",
        "K",
        "structure",
        "rho",
        "delta_factor",
        "exact_bound",
    ])?;
    for &d in &args.d_list {
        for &h in &args.h_list {
            for &k_out in &args.out_dim_list {
                if k_out > h {
                    continue;
                }
                for structure in args.structures.kinds() {
                    let rhos: Vec<f64> = match structure {
                        StructureKind::Toeplitz => args.rho_list.clone(),
                        _ => vec![0.0],
                    };
                    let kernels: Vec<usize> = match structure {
                        StructureKind::Toeplitz => args.kernel_list.clone(),
                        _ => vec![0],
                    };
                    for &kk in &kernels {
                        for &rho in &rhos {
                            let row =
                                sweep_cell(structure, d, h, k_out, kk, rho, args.m, &resolved)?;
                            wtr.write_record(&row)?;
                        }
                    }
                }
            }
        }
    }
    wtr.flush()?;
    println!("wrote {}", args.out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep_cell(
    structure: StructureKind,
    d: usize,
    h: usize,
    k_out: usize,
    kernel_k: usize,
    rho: f64,
    m: usize,
    resolved: &Resolved,
) -> anyhow::Result<Vec<String>> {
    let kind = structure.net_kind();
    // One seed per (kind, d, h, K, k) cell so the rho sweep reuses the
    // identical network and isolates the symbol's effect.
    let cell_seed = resolved
        .seed
        .wrapping_add((d as u64) << 8)
        .wrapping_add((h as u64) << 16)
        .wrapping_add((k_out as u64) << 24)
        .wrapping_add((kernel_k as u64) << 32)
        .wrapping_add(match kind {
            NetKind::Dense => 0,
            NetKind::Residual => 1,
            NetKind::Circulant => 2,
            NetKind::Toeplitz => 3,
        });
    let net = generate_network(
        kind,
        d,
        h,
        h,
        k_out,
        kernel_k.max(1),
        1.0,
        RngSeed(cell_seed),
    )?;
    let data = generate_blobs(h, m, 3.0, 0.5, RngSeed(cell_seed.wrapping_add(7777)))?;
    let symbol = if rho > 0.0 {
        ToeplitzSymbol::geometric(rho)?
    } else {
        ToeplitzSymbol::identity()
    };
    let cfg = CertifyConfig {
        circ_gain: resolved.circ_gain,
        symbol: symbol.clone(),
        anchor: resolved.anchor,
        seed: cell_seed,
        mc_samples: 0,
        mc_bound_samples: 0,
    };
    let delta_val = delta_factor(&net, structure, resolved.circ_gain, &symbol)?;
    let report = certify(&net, &data, resolved.gamma, resolved.delta, structure, &cfg)?;
    Ok(vec![
        d.to_string(),
        h.to_string(),
        kernel_k.to_string(),
        k_out.to_string(),
        structure.to_string(),
        format!("{rho}"),
        format!("{delta_val}"),
        format!("{}", report.final_bound),
    ])
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

/// Parse argv and dispatch; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    dispatch(&cli)
}

/// Test hook: dispatch from an explicit argv slice.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => dispatch(&cli),
        Err(e) => {
            eprintln!("{e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Certify(a) => cmd_certify(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}
