mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mddm_core::kriging::{empirical_variogram, fit_variogram, EmpiricalVariogram, VariogramModel};
use mddm_core::mddm::{change_scores, forecast_distances_from_fits, mddm_from_fits, ChangeScores};
use mddm_core::pipeline::{mixture_analysis, preprocess, run_stages, Smoother};
use mddm_core::raster::{load_series, save_series, RasterSeries};
use mddm_core::synth::{exponentiate, Fixture};

use config::{ConfigError, Resolved};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "mddm", version, about = "Change detection in raster image time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Divergence matrix and change scores (mddm.csv, scores.json).
    Mddm {
        #[arg(long)]
        config: PathBuf,
    },
    /// Distances between observed and forecast densities (forecast_distances.csv).
    Predict {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `predict.horizon`.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Mixture function and its valleys (mixture.csv, valleys.json).
    Mixture {
        #[arg(long)]
        config: PathBuf,
    },
    /// Empirical variogram and exponential fit (variogram.json).
    Variogram {
        #[arg(long)]
        config: PathBuf,
    },
    /// Writes the preprocessed and smoothed series as RTS1 (smoothed.rts1).
    Smooth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Writes a synthetic fixture series as RTS1.
    Synth {
        #[arg(long, value_enum)]
        fixture: FixtureKind,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 8)]
        images: usize,
        #[arg(long, default_value_t = 32)]
        rows: usize,
        #[arg(long, default_value_t = 32)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// First changed image (variance-change) or the changed image (transient), 0-based.
        #[arg(long, default_value_t = 4)]
        at: usize,
        /// Variance factor (variance-change) or standard deviation factor (transient).
        #[arg(long, default_value_t = 2.0)]
        factor: f64,
        /// Standard deviation increase per image (drift).
        #[arg(long, default_value_t = 0.05)]
        slope: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Identical,
    VarianceChange,
    Drift,
    Transient,
    NoChange,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(c) = e.downcast_ref::<ConfigError>() {
                eprintln!("mddm: {c}");
                ExitCode::from(2)
            } else {
                eprintln!("mddm: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Mddm { config } => cmd_mddm(&config::load(&config)?),
        Command::Predict { config, horizon } => {
            let cfg = config::load(&config)?;
            let horizon = horizon.unwrap_or(cfg.raw.predict.horizon);
            if horizon == 0 {
                return Err(ConfigError("invalid value for `horizon`: must be at least 1".into()).into());
            }
            cmd_predict(&cfg, horizon)
        }
        Command::Mixture { config } => cmd_mixture(&config::load(&config)?),
        Command::Variogram { config } => cmd_variogram(&config::load(&config)?),
        Command::Smooth { config } => cmd_smooth(&config::load(&config)?),
        Command::Synth {
            fixture,
            output,
            images,
            rows,
            cols,
            seed,
            at,
            factor,
            slope,
        } => {
            if images < 2 || rows == 0 || cols == 0 {
                return Err(ConfigError("synth needs at least 2 images of positive size".into()).into());
            }
            let fixture = match fixture {
                FixtureKind::Identical => Fixture::Identical,
                FixtureKind::VarianceChange => Fixture::VarianceChange { change_at: at, factor },
                FixtureKind::Drift => Fixture::Drift { slope },
                FixtureKind::Transient => Fixture::Transient { at, factor },
                FixtureKind::NoChange => Fixture::NoChange,
            };
            let series = exponentiate(&fixture.generate(images, rows, cols, seed));
            if let Some(dir) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            save_series(&series, &output).context("stage `synth`")
        }
    }
}

fn load_input(cfg: &Resolved) -> Result<RasterSeries<f64>> {
    load_series(&cfg.input, cfg.format).with_context(|| format!("stage `load`: {}", cfg.input.display()))
}

fn output_file(cfg: &Resolved, name: &str) -> Result<BufWriter<fs::File>> {
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let path = cfg.output_dir.join(name);
    let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(cfg: &Resolved, name: &str, value: &T) -> Result<()> {
    let mut w = output_file(cfg, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a config::Config,
    #[serde(flatten)]
    body: T,
}

fn report<'a, T: Serialize>(cfg: &'a Resolved, command: &'static str, body: T) -> Report<'a, T> {
    Report {
        tool: "mddm",
        version: VERSION,
        command,
        config: &cfg.raw,
        body,
    }
}

#[derive(Serialize)]
struct SubbandSummary {
    subband: String,
    d_hat: Option<usize>,
    p_values: Vec<f64>,
}

#[derive(Serialize)]
struct ScoresBody {
    scores: Vec<f64>,
    profile_jump: Vec<f64>,
    argmax: usize,
    subbands: Vec<SubbandSummary>,
}

fn cmd_mddm(cfg: &Resolved) -> Result<()> {
    let series = load_input(cfg)?;
    let fits = run_stages(&series, &cfg.pipeline).context("stage `mddm`")?;
    let mddm = mddm_from_fits(&fits, false).context("stage `mddm`")?;
    let ChangeScores {
        row_means,
        profile_jump,
        argmax,
    } = change_scores(&mddm);
    let mut w = output_file(cfg, "mddm.csv")?;
    mddm.write_csv(&mut w)?;
    w.flush()?;
    let subbands = fits
        .iter()
        .map(|f| SubbandSummary {
            subband: f.subband.name().to_string(),
            d_hat: f.model.as_ref().map(|m| m.d_hat),
            p_values: f.model.as_ref().map(|m| m.p_values.clone()).unwrap_or_default(),
        })
        .collect();
    write_json(
        cfg,
        "scores.json",
        &report(
            cfg,
            "mddm",
            ScoresBody {
                scores: row_means,
                profile_jump,
                argmax,
                subbands,
            },
        ),
    )
}

fn cmd_predict(cfg: &Resolved, horizon: usize) -> Result<()> {
    let series = load_input(cfg)?;
    let fits = run_stages(&series, &cfg.pipeline).context("stage `predict`")?;
    let d = forecast_distances_from_fits(&fits, horizon).context("stage `predict`")?;
    let mut w = output_file(cfg, "forecast_distances.csv")?;
    let header: Vec<String> = std::iter::once("m".to_string())
        .chain((1..=horizon).map(|h| format!("h{h}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (m, row) in d.row_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
        writeln!(w, "{m},{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ComponentSummary {
    subband: String,
    component: usize,
    mu_u: f64,
    mu_v: f64,
    valleys: Vec<usize>,
}

#[derive(Serialize)]
struct ValleysBody {
    valleys: Vec<usize>,
    components: Vec<ComponentSummary>,
}

fn cmd_mixture(cfg: &Resolved) -> Result<()> {
    let series = load_input(cfg)?;
    let pipeline = cfg.mixture_pipeline();
    let fits = run_stages(&series, &pipeline).context("stage `mixture`")?;
    let (spec, opts) = cfg.mixture_options();
    let analysis = mixture_analysis(&fits, &spec, &opts).context("stage `mixture`")?;
    let mut w = output_file(cfg, "mixture.csv")?;
    writeln!(w, "t,rho")?;
    for (t, r) in analysis.grid.iter().zip(&analysis.rho) {
        writeln!(w, "{},{}", num(*t), num(*r))?;
    }
    w.flush()?;
    let components = analysis
        .components
        .iter()
        .map(|(band, k, r)| ComponentSummary {
            subband: band.name().to_string(),
            component: *k,
            mu_u: r.mu_u,
            mu_v: r.mu_v,
            valleys: r.valleys.clone(),
        })
        .collect();
    write_json(
        cfg,
        "valleys.json",
        &report(
            cfg,
            "mixture",
            ValleysBody {
                valleys: analysis.valleys,
                components,
            },
        ),
    )
}

#[derive(Serialize)]
struct VariogramBody {
    empirical: EmpiricalVariogram,
    model: VariogramModel,
    contrast: f64,
}

fn cmd_variogram(cfg: &Resolved) -> Result<()> {
    let series = load_input(cfg)?;
    let logged = match cfg.pipeline.log_offset {
        Some(o) => mddm_core::raster::log_transform(&series, o).context("stage `log`")?,
        None => series,
    };
    let ev = empirical_variogram(&logged, &cfg.kriging.variogram).context("stage `variogram`")?;
    let fit = fit_variogram(&ev).context("stage `variogram fit`")?;
    let model = match cfg.kriging.taper_range {
        Some(r) => fit.model.with_taper_range(r),
        None => fit.model,
    };
    write_json(
        cfg,
        "variogram.json",
        &report(
            cfg,
            "variogram",
            VariogramBody {
                empirical: ev,
                model,
                contrast: fit.contrast_value,
            },
        ),
    )
}

fn cmd_smooth(cfg: &Resolved) -> Result<()> {
    if matches!(cfg.pipeline.smoother, Smoother::None) {
        return Err(ConfigError("invalid value for `smoother.kind`: `smooth` needs a smoother other than none".into()).into());
    }
    let series = load_input(cfg)?;
    let out = preprocess(&series, &cfg.pipeline).context("stage `smooth`")?;
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let path: &Path = &cfg.output_dir.join("smoothed.rts1");
    save_series(&out, path).context("stage `write`")
}
