//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mddm_core::density::DensityEstimator;
use mddm_core::functional::{DimensionConfig, Resampling};
use mddm_core::kriging::VariogramConfig;
use mddm_core::mixture::{LabelConvention, MixtureOptions, RegressionThreshold};
use mddm_core::pipeline::{KrigingSmoother, PipelineConfig, Reduction, Smoother};
use mddm_core::raster::SeriesFormat;
use mddm_core::wavelet::{Subband, Threshold, TransformKind, WaveletFamily, WaveletSpec};

/// Invalid configuration; the message names the offending key.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("invalid value for `{key}`: {msg}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub input: Input,
    #[serde(default)]
    pub smoother: SmootherSection,
    #[serde(default)]
    pub wavelet: WaveletSection,
    #[serde(default)]
    pub density: DensitySection,
    #[serde(default)]
    pub dimension: DimensionSection,
    #[serde(default)]
    pub mddm: MddmSection,
    #[serde(default)]
    pub mixture: MixtureSection,
    #[serde(default)]
    pub kriging: KrigingSection,
    #[serde(default)]
    pub predict: PredictSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Input {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: String,
    /// Apply `ln(v + log_offset)`.
    #[serde(default = "yes")]
    pub log: bool,
    #[serde(default)]
    pub log_offset: f64,
}

fn default_format() -> String {
    "rts1".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmootherSection {
    /// `none`, `wavelet-threshold` or `kriging`.
    #[serde(default = "default_smoother")]
    pub kind: String,
    /// Explicit soft threshold; universal when absent.
    pub threshold: Option<f64>,
}

fn default_smoother() -> String {
    "none".into()
}

impl Default for SmootherSection {
    fn default() -> Self {
        SmootherSection {
            kind: default_smoother(),
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveletSection {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// `stationary` or `decimated`.
    #[serde(default = "default_transform")]
    pub transform: String,
}

fn default_family() -> String {
    "haar".into()
}
fn default_levels() -> usize {
    2
}
fn default_transform() -> String {
    "stationary".into()
}

impl Default for WaveletSection {
    fn default() -> Self {
        WaveletSection {
            family: default_family(),
            levels: default_levels(),
            transform: default_transform(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    /// `J0`.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub shrink: bool,
}

fn default_resolution() -> usize {
    5
}

impl Default for DensitySection {
    fn default() -> Self {
        DensitySection {
            resolution: default_resolution(),
            shrink: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionSection {
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// `iid` or `block`.
    #[serde(default = "default_resampling")]
    pub resampling: String,
    /// Mean block length for `block`; 0 picks `ceil(M^(1/3))`.
    #[serde(default)]
    pub block_length: usize,
    /// `bootstrap`, `fixed` or `off`.
    #[serde(default = "default_reduction")]
    pub reduction: String,
    #[serde(default = "one")]
    pub fixed_dim: usize,
}

fn default_p() -> usize {
    2
}
fn default_replicates() -> usize {
    500
}
fn default_alpha() -> f64 {
    0.05
}
fn default_resampling() -> String {
    "iid".into()
}
fn default_reduction() -> String {
    "bootstrap".into()
}
fn one() -> usize {
    1
}

impl Default for DimensionSection {
    fn default() -> Self {
        DimensionSection {
            p: default_p(),
            replicates: default_replicates(),
            alpha: default_alpha(),
            resampling: default_resampling(),
            block_length: 0,
            reduction: default_reduction(),
            fixed_dim: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MddmSection {
    #[serde(default = "all_subbands")]
    pub subbands: Vec<String>,
    /// Detail levels pooled per orientation; all when absent.
    pub levels: Option<Vec<usize>>,
}

fn all_subbands() -> Vec<String> {
    Subband::ALL.iter().map(|s| s.name().to_string()).collect()
}

impl Default for MddmSection {
    fn default() -> Self {
        MddmSection {
            subbands: all_subbands(),
            levels: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    #[serde(default = "all_subbands")]
    pub subbands: Vec<String>,
    /// Leading loading series per subband (`reduction = "fixed"`).
    #[serde(default = "one")]
    pub components: usize,
    /// `fixed` or `bootstrap`.
    #[serde(default = "default_mixture_reduction")]
    pub reduction: String,
    #[serde(default = "half")]
    pub valley_threshold: f64,
    /// `majority` or `larger-mean`.
    #[serde(default = "default_convention")]
    pub convention: String,
    /// Regression depth; full depth when absent.
    pub levels: Option<usize>,
    #[serde(default = "default_family")]
    pub family: String,
}

fn default_mixture_reduction() -> String {
    "fixed".into()
}
fn half() -> f64 {
    0.5
}
fn default_convention() -> String {
    "majority".into()
}

impl Default for MixtureSection {
    fn default() -> Self {
        MixtureSection {
            subbands: all_subbands(),
            components: 1,
            reduction: default_mixture_reduction(),
            valley_threshold: 0.5,
            convention: default_convention(),
            levels: None,
            family: default_family(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrigingSection {
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_max_lag")]
    pub max_lag: f64,
    #[serde(default = "default_subsample")]
    pub subsample: usize,
    pub taper_range: Option<f64>,
}

fn default_bins() -> usize {
    15
}
fn default_max_lag() -> f64 {
    10.0
}
fn default_subsample() -> usize {
    600
}

impl Default for KrigingSection {
    fn default() -> Self {
        KrigingSection {
            bins: default_bins(),
            max_lag: default_max_lag(),
            subsample: default_subsample(),
            taper_range: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

fn default_horizon() -> usize {
    1
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection { horizon: 1 }
    }
}

/// Parsed configuration with paths resolved against the config file.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub raw: Config,
    pub input: PathBuf,
    pub format: SeriesFormat,
    pub output_dir: PathBuf,
    pub pipeline: PipelineConfig,
    pub kriging: KrigingSmoother,
}

pub fn load(path: &Path) -> Result<Resolved, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let raw: Config = toml::from_str(&text).map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(raw, base)
}

fn parse_subbands(key: &str, names: &[String]) -> Result<Vec<Subband>, ConfigError> {
    if names.is_empty() {
        return Err(bad(key, "at least one subband required"));
    }
    let mut out: Vec<Subband> = Vec::new();
    for n in names {
        let s: Subband = n.parse().map_err(|_| {
            bad(key, format!("unknown subband `{n}` (expected approx, horizontal, vertical, diagonal)"))
        })?;
        if out.contains(&s) {
            return Err(bad(key, format!("duplicate subband `{n}`")));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn resolve(raw: Config, base: &Path) -> Result<Resolved, ConfigError> {
    let format: SeriesFormat = raw
        .input
        .format
        .parse()
        .map_err(|_| bad("input.format", format!("`{}` (expected rts1 or ascii-matrix-dir)", raw.input.format)))?;
    if !(raw.input.log_offset >= 0.0 && raw.input.log_offset.is_finite()) {
        return Err(bad("input.log_offset", "must be a non-negative number"));
    }

    let family: WaveletFamily = raw
        .wavelet
        .family
        .parse()
        .map_err(|_| bad("wavelet.family", format!("`{}` (expected haar, daubechies-4, daubechies-8)", raw.wavelet.family)))?;
    if raw.wavelet.levels == 0 || raw.wavelet.levels > 16 {
        return Err(bad("wavelet.levels", "must lie in 1..=16"));
    }
    let wavelet = WaveletSpec::new(family, raw.wavelet.levels);
    let transform = match raw.wavelet.transform.as_str() {
        "stationary" => TransformKind::Stationary,
        "decimated" => TransformKind::Decimated,
        other => return Err(bad("wavelet.transform", format!("`{other}` (expected stationary or decimated)"))),
    };

    if raw.density.resolution == 0 || raw.density.resolution > 20 {
        return Err(bad("density.resolution", "must lie in 1..=20"));
    }
    let density = DensityEstimator::new(raw.density.resolution, WaveletSpec::haar(raw.density.resolution.min(3)))
        .with_shrinkage(raw.density.shrink);

    let d = &raw.dimension;
    if d.p == 0 {
        return Err(bad("dimension.p", "must be at least 1"));
    }
    if d.replicates < 100 {
        return Err(bad("dimension.replicates", "at least 100 bootstrap replicates required"));
    }
    if !(d.alpha > 0.0 && d.alpha < 1.0) {
        return Err(bad("dimension.alpha", "must lie in (0, 1)"));
    }
    let resampling = match d.resampling.as_str() {
        "iid" => Resampling::Iid,
        "block" => Resampling::StationaryBlock(d.block_length),
        other => return Err(bad("dimension.resampling", format!("`{other}` (expected iid or block)"))),
    };
    if d.fixed_dim == 0 {
        return Err(bad("dimension.fixed_dim", "must be at least 1"));
    }
    let reduction = match d.reduction.as_str() {
        "bootstrap" => Reduction::Bootstrap,
        "fixed" => Reduction::Fixed(d.fixed_dim),
        "off" => Reduction::Off,
        other => return Err(bad("dimension.reduction", format!("`{other}` (expected bootstrap, fixed or off)"))),
    };

    let subbands = parse_subbands("mddm.subbands", &raw.mddm.subbands)?;
    if let Some(levels) = &raw.mddm.levels {
        if levels.is_empty() || levels.iter().any(|&l| l == 0 || l > raw.wavelet.levels) {
            return Err(bad("mddm.levels", format!("levels must lie in 1..={}", raw.wavelet.levels)));
        }
    }

    let k = &raw.kriging;
    if k.bins == 0 {
        return Err(bad("kriging.bins", "must be at least 1"));
    }
    if !(k.max_lag > 0.0 && k.max_lag.is_finite()) {
        return Err(bad("kriging.max_lag", "must be positive"));
    }
    if k.subsample < 2 {
        return Err(bad("kriging.subsample", "must be at least 2"));
    }
    if let Some(r) = k.taper_range {
        if !(r > 0.0 && r.is_finite()) {
            return Err(bad("kriging.taper_range", "must be positive"));
        }
    }
    let kriging = KrigingSmoother {
        variogram: VariogramConfig {
            max_lag: k.max_lag,
            n_bins: k.bins,
            subsample: k.subsample,
            seed: raw.seed,
        },
        taper_range: k.taper_range,
    };

    let threshold = match raw.smoother.threshold {
        None => Threshold::Universal,
        Some(t) if t >= 0.0 && t.is_finite() => Threshold::Explicit(t),
        Some(_) => return Err(bad("smoother.threshold", "must be a non-negative number")),
    };
    let smoother = match raw.smoother.kind.as_str() {
        "none" => Smoother::None,
        "wavelet-threshold" => Smoother::WaveletThreshold(threshold),
        "kriging" => Smoother::Kriging(kriging),
        other => return Err(bad("smoother.kind", format!("`{other}` (expected none, wavelet-threshold or kriging)"))),
    };

    let m = &raw.mixture;
    parse_subbands("mixture.subbands", &m.subbands)?;
    if m.components == 0 {
        return Err(bad("mixture.components", "must be at least 1"));
    }
    if !matches!(m.reduction.as_str(), "fixed" | "bootstrap") {
        return Err(bad("mixture.reduction", format!("`{}` (expected fixed or bootstrap)", m.reduction)));
    }
    if !(m.valley_threshold > 0.0 && m.valley_threshold <= 1.0) {
        return Err(bad("mixture.valley_threshold", "must lie in (0, 1]"));
    }
    if !matches!(m.convention.as_str(), "majority" | "larger-mean") {
        return Err(bad("mixture.convention", format!("`{}` (expected majority or larger-mean)", m.convention)));
    }
    if m.levels == Some(0) {
        return Err(bad("mixture.levels", "must be at least 1"));
    }
    m.family
        .parse::<WaveletFamily>()
        .map_err(|_| bad("mixture.family", format!("`{}`", m.family)))?;

    if raw.predict.horizon == 0 {
        return Err(bad("predict.horizon", "must be at least 1"));
    }

    let pipeline = PipelineConfig {
        log_offset: raw.input.log.then_some(raw.input.log_offset),
        smoother,
        transform,
        wavelet,
        density,
        subbands,
        detail_levels: raw.mddm.levels.clone(),
        reduction,
        dimension: DimensionConfig {
            p: d.p,
            replicates: d.replicates,
            alpha: d.alpha,
            resampling,
            seed: raw.seed,
            stream: 0,
        },
    };
    pipeline.validate().map_err(|e| ConfigError(format!("invalid configuration: {e}")))?;

    Ok(Resolved {
        input: base.join(&raw.input.path),
        output_dir: base.join(&raw.output_dir),
        format,
        pipeline,
        kriging,
        raw,
    })
}

impl Resolved {
    /// Pipeline settings of the mixture analysis.
    pub fn mixture_pipeline(&self) -> PipelineConfig {
        let m = &self.raw.mixture;
        let subbands = parse_subbands("mixture.subbands", &m.subbands).expect("validated");
        PipelineConfig {
            subbands,
            reduction: if m.reduction == "bootstrap" {
                Reduction::Bootstrap
            } else {
                Reduction::Fixed(m.components)
            },
            ..self.pipeline.clone()
        }
    }

    pub fn mixture_options(&self) -> (WaveletSpec, MixtureOptions) {
        let m = &self.raw.mixture;
        let family: WaveletFamily = m.family.parse().expect("validated");
        let spec = WaveletSpec::new(family, m.levels.unwrap_or(30));
        let convention = if m.convention == "majority" {
            LabelConvention::Majority
        } else {
            LabelConvention::LargerMean
        };
        let opts = MixtureOptions {
            valley_threshold: m.valley_threshold,
            convention,
            threshold: RegressionThreshold::Universal,
        };
        (spec, opts)
    }
}
