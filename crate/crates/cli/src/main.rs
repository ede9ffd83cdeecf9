use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use egosearch::pipeline::rerank_visual;
use egosearch::{
    format, generate, run_matrix, score_all, sweep, train_codebook, Codebook, Corpus, Dataset, Error, MatrixOptions,
    PresetOptions, RunConfig, Strategy, SynthSpec, ThresholdPolicy,
};
use serde_json::json;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Data(Error::InvalidArgument(_)) => 2,
            CliError::Data(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Last-appearance search over days of lifelog images.
#[derive(Debug, Parser)]
#[command(name = "egosearch", version)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Command,
}

/// Settings shared with the config file; flags override file values.
#[derive(Debug, Args)]
struct Opts {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    manifest: Option<String>,
    #[arg(long, global = true)]
    queries: Option<String>,
    #[arg(long, global = true)]
    judgments: Option<String>,
    #[arg(long, global = true)]
    codebook: Option<String>,
    /// FI, HBB or SBB.
    #[arg(long, global = true)]
    query_mode: Option<String>,
    /// FI, CB or SM.
    #[arg(long, global = true)]
    target_mode: Option<String>,
    /// NNDR or TVSS.
    #[arg(long, global = true)]
    filter: Option<String>,
    #[arg(long, global = true)]
    nu_th: Option<String>,
    #[arg(long, global = true)]
    rho_th: Option<String>,
    /// time or interleave.
    #[arg(long, global = true)]
    rerank: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    exclude_query_images: Option<String>,
    /// Comma-separated day ids.
    #[arg(long, global = true)]
    train_days: Option<String>,
    /// Comma-separated day ids.
    #[arg(long, global = true)]
    eval_days: Option<String>,
    /// Codebook size.
    #[arg(long, global = true)]
    words: Option<String>,
    #[arg(long, global = true)]
    max_iters: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a codebook on the descriptors of every feature map in the manifest.
    BuildCodebook {
        /// Use every n-th descriptor of each image.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Encode target images and write the per-day vectors as JSON.
    Index {
        /// Days to encode; all days when omitted.
        #[arg(long)]
        day: Vec<String>,
    },
    /// Rank one day for one query category.
    Query {
        #[arg(long)]
        category: String,
        #[arg(long)]
        day: String,
        /// Also write the visual ranking here.
        #[arg(long)]
        visual_out: Option<PathBuf>,
    },
    /// Score judged days and write a report.
    Evaluate {
        /// Rank newest first, ignoring the query.
        #[arg(long, conflicts_with = "visual")]
        baseline: bool,
        /// Use the visual ranking without filtering.
        #[arg(long)]
        visual: bool,
    },
    /// Sweep the threshold grid over the training days.
    Train,
    /// Generate a synthetic corpus directory.
    Synth {
        #[arg(long, default_value_t = 10)]
        days: usize,
        #[arg(long, default_value_t = 200)]
        images_per_day: usize,
        #[arg(long, default_value_t = 4)]
        categories: usize,
        #[arg(long, default_value_t = 0.4)]
        noise: f32,
        #[arg(long, default_value_t = 0.15)]
        distractor_rate: f64,
        #[arg(long, default_value_t = 12)]
        rows: usize,
        #[arg(long, default_value_t = 16)]
        cols: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        queries_per_category: usize,
    },
    /// Evaluate every query mode, target mode, filter and rerank combination.
    Matrix,
}

impl Opts {
    fn pairs(&self) -> [(&'static str, &Option<String>); 17] {
        [
            ("manifest", &self.manifest),
            ("queries", &self.queries),
            ("judgments", &self.judgments),
            ("codebook", &self.codebook),
            ("query_mode", &self.query_mode),
            ("target_mode", &self.target_mode),
            ("filter", &self.filter),
            ("nu_th", &self.nu_th),
            ("rho_th", &self.rho_th),
            ("rerank", &self.rerank),
            ("seed", &self.seed),
            ("out", &self.out),
            ("exclude_query_images", &self.exclude_query_images),
            ("train_days", &self.train_days),
            ("eval_days", &self.eval_days),
            ("words", &self.words),
            ("max_iters", &self.max_iters),
        ]
    }

    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
            None => RunConfig::default(),
        };
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)
                    .map_err(|e| CliError::Usage(format!("--{}: {e}", key.replace('_', "-"))))?;
            }
        }
        Ok(cfg)
    }
}

fn required<'a>(cfg: &RunConfig, value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    cfg.require(value, name).map_err(|e| CliError::Usage(e.to_string()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| {
            Error::Io {
                path: p.to_path_buf(),
                source: e,
            }
            .into()
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| {
            Error::Io {
                path: "<stdout>".into(),
                source: e,
            }
            .into()
        }),
    }
}

fn write_dir(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    for (name, text) in files {
        emit(Some(&dir.join(name)), text)?;
    }
    Ok(())
}

fn load_codebook(cfg: &RunConfig) -> Result<Codebook> {
    Ok(format::read_codebook(required(cfg, &cfg.codebook, "codebook")?)?)
}

fn load_dataset(cfg: &RunConfig, queries: bool, judgments: bool) -> Result<Dataset> {
    let codebook = load_codebook(cfg)?;
    let manifest = required(cfg, &cfg.manifest, "manifest")?;
    let q = if queries {
        Some(required(cfg, &cfg.queries, "queries")?)
    } else {
        None
    };
    let j = if judgments {
        Some(required(cfg, &cfg.judgments, "judgments")?)
    } else {
        None
    };
    let mut ds = Dataset::load_parts(manifest, q, j, &codebook)?;
    ds.exclude_query_images = cfg.exclude_query_images;
    Ok(ds)
}

fn build_codebook(cfg: &RunConfig, stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(CliError::Usage("--stride must be positive".into()));
    }
    let corpus = Corpus::load(required(cfg, &cfg.manifest, "manifest")?)?;
    let out = required(cfg, &cfg.out, "out")?;
    let mut samples = Vec::new();
    for rec in corpus.images() {
        let fm = format::read_feature_map(corpus.resolve(&rec.feature_ref))?;
        samples.extend(fm.descriptors().step_by(stride).map(<[f32]>::to_vec));
    }
    let cb = train_codebook(&samples, cfg.words, cfg.max_iters, cfg.seed)?;
    format::write_codebook(out, &cb)?;
    Ok(())
}

fn index(cfg: &RunConfig, days: &[String]) -> Result<()> {
    let ds = load_dataset(cfg, false, false)?;
    let days: Vec<String> = if days.is_empty() {
        ds.corpus.days.iter().map(|d| d.day_id.clone()).collect()
    } else {
        days.to_vec()
    };
    let mut out_days = Vec::new();
    for day in &days {
        let entries = ds.encode_day(day, cfg.target_mode)?;
        let images: Vec<_> = entries
            .iter()
            .map(|e| {
                let (words, weights): (Vec<u32>, Vec<f64>) = e.vector.entries().iter().copied().unzip();
                json!({ "image_id": e.image_id, "timestamp": e.timestamp, "words": words, "weights": weights })
            })
            .collect();
        out_days.push(json!({ "day_id": day, "images": images }));
    }
    let doc = json!({ "words": ds.words(), "target_mode": cfg.target_mode.code(), "days": out_days });
    emit(
        cfg.out.as_deref(),
        &(serde_json::to_string_pretty(&doc).expect("json") + "\n"),
    )
}

fn query(cfg: &RunConfig, category: &str, day: &str, visual_out: Option<&Path>) -> Result<()> {
    let ds = load_dataset(cfg, true, false)?;
    let qs = ds
        .query_set(category)
        .ok_or_else(|| CliError::Usage(format!("no query set for category `{category}`")))?;
    let q = ds.query_vector(qs, cfg.query_mode)?;
    let idx = ds.index_day(day, cfg.target_mode)?;
    let visual = score_all(&idx, &q)?;
    let fc = cfg.filter_config();
    let (part, ranking) = rerank_visual(&visual, fc.method, fc.threshold(), cfg.rerank);
    if let Some(p) = visual_out {
        let label = |id: &str| if part.is_candidate(id) { 'C' } else { 'D' };
        emit(Some(p), &visual.to_tsv(Some(&label)))?;
    }
    emit(cfg.out.as_deref(), &ranking.to_tsv())
}

fn eval_days(cfg: &RunConfig, ds: &Dataset) -> Vec<String> {
    if cfg.eval_days.is_empty() {
        ds.judged_days()
    } else {
        cfg.eval_days.clone()
    }
}

fn evaluate(cfg: &RunConfig, baseline: bool, visual: bool) -> Result<()> {
    let ds = load_dataset(cfg, true, true)?;
    let cache = ds.score_cache(cfg.query_mode, cfg.target_mode, &eval_days(cfg, &ds))?;
    let strategy = if baseline {
        Strategy::TimeSorting
    } else if visual {
        Strategy::Visual
    } else {
        let fc = cfg.filter_config();
        Strategy::filtered(fc.method, fc.threshold(), cfg.rerank)
    };
    let report = cache.evaluate(strategy)?;
    match &cfg.out {
        Some(dir) => write_dir(
            dir,
            &[("report.json", report.to_json()), ("report.txt", report.to_text())],
        ),
        None => emit(None, &report.to_text()),
    }
}

fn train(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg, true, true)?;
    let days = if cfg.train_days.is_empty() {
        ds.judged_days()
    } else {
        cfg.train_days.clone()
    };
    let cache = ds.score_cache(cfg.query_mode, cfg.target_mode, &days)?;
    let result = sweep(&cache, cfg.filter, cfg.rerank)?;
    eprintln!(
        "best {} threshold {:.2} (A-MRR {:.6})",
        cfg.filter, result.best_threshold, result.best_amrr
    );
    emit(cfg.out.as_deref(), &result.to_csv())
}

fn matrix(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg, true, true)?;
    let policy = if cfg.train_days.is_empty() {
        ThresholdPolicy::Fixed {
            nu_th: cfg.nu_th,
            rho_th: cfg.rho_th,
        }
    } else {
        ThresholdPolicy::Trained {
            train_days: cfg.train_days.clone(),
        }
    };
    let report = run_matrix(
        &ds,
        &MatrixOptions {
            policy,
            eval_days: cfg.eval_days.clone(),
        },
    )?;
    match &cfg.out {
        Some(dir) => write_dir(
            dir,
            &[("matrix.json", report.to_json()), ("matrix.txt", report.to_text())],
        ),
        None => emit(None, &report.to_text()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.opts.resolve()?;
    match cli.cmd {
        Command::BuildCodebook { stride } => build_codebook(&cfg, stride),
        Command::Index { day } => index(&cfg, &day),
        Command::Query {
            category,
            day,
            visual_out,
        } => query(&cfg, &category, &day, visual_out.as_deref()),
        Command::Evaluate { baseline, visual } => evaluate(&cfg, baseline, visual),
        Command::Train => train(&cfg),
        Command::Synth {
            days,
            images_per_day,
            categories,
            noise,
            distractor_rate,
            rows,
            cols,
            dim,
            queries_per_category,
        } => {
            let out = required(&cfg, &cfg.out, "out")?;
            let opts = PresetOptions {
                days,
                images_per_day,
                categories,
                noise,
                distractor_rate,
                rows,
                cols,
                dim,
                queries_per_category,
            };
            let spec = SynthSpec::preset(cfg.seed, &opts)?;
            generate(&spec)?.write(out)?;
            Ok(())
        }
        Command::Matrix => matrix(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
