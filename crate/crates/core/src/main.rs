use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use guided_restore::config::{load_config, ModelConfig, Perception, PipelineOrder};
use guided_restore::degrade::{generate_dataset, synthetic_scene, SpecFile};
use guided_restore::evaluation::{
    evaluate, input_baseline, run_component_ablation, run_order_ablation, ComparisonReport, DEFAULT_ORDERS,
};
use guided_restore::guidance::Providers;
use guided_restore::manifest::Manifest;
use guided_restore::training::{load_checkpoint, load_checkpoint_for, train_loop, LoopOptions, PairSet, LOSS_CURVE_FILE};

/// Guided all-in-one image restoration.
#[derive(Parser)]
#[command(name = "guided-restore", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a paired degraded/clean dataset and its manifest.
    Degrade(DegradeArgs),
    /// Train a model and write checkpoints plus a loss curve.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a manifest (PSNR/SSIM per tag).
    Eval(EvalArgs),
    /// Train one model per perception order and compare them.
    AblateOrder(AblateOrderArgs),
    /// Train the eight component variants and compare them.
    AblateComponents(AblateArgs),
    /// Summarize a training output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct ProviderArgs {
    /// Precomputed quality embeddings (GRVEC file).
    #[arg(long)]
    quality_file: Option<PathBuf>,
    /// Precomputed semantic masks (GRMASK file).
    #[arg(long)]
    mask_file: Option<PathBuf>,
    /// Precomputed content/degradation embeddings (GRVEC file, 1024-d records).
    #[arg(long)]
    clip_file: Option<PathBuf>,
}

impl ProviderArgs {
    fn build(&self, cfg: &ModelConfig) -> anyhow::Result<Providers> {
        Ok(Providers::with_files(
            cfg,
            self.quality_file.as_deref(),
            self.mask_file.as_deref(),
            self.clip_file.as_deref(),
        )?)
    }
}

#[derive(Args)]
struct DegradeArgs {
    /// Directory of clean PNG images.
    #[arg(long, required_unless_present = "synthetic")]
    clean: Option<PathBuf>,
    /// Generate this many synthetic clean scenes instead of reading `--clean`.
    #[arg(long, conflicts_with = "clean")]
    synthetic: Option<usize>,
    /// Side length of synthetic scenes.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// TOML file with a `composites` list of degradation recipes.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of pairs to write.
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Training manifest (`degraded<TAB>clean<TAB>tag` lines).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Continue from a checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop early at this iteration (a checkpoint is written there).
    #[arg(long)]
    stop_at: Option<u64>,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Report directory; defaults to the checkpoint's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate under this configuration instead of the checkpoint's own.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated tags expected in the report; missing ones are noted.
    #[arg(long, value_delimiter = ',')]
    tags: Vec<String>,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Args)]
struct AblateOrderArgs {
    #[command(flatten)]
    common: AblateArgs,
    /// Orders such as `how-where-what`, comma separated. Defaults to the three studied orders.
    #[arg(long, value_delimiter = ',')]
    orders: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of a `train` run.
    #[arg(long)]
    run: PathBuf,
}

fn parse_order(s: &str) -> anyhow::Result<PipelineOrder> {
    let parts: Vec<Perception> = s
        .split('-')
        .map(|p| match p.to_ascii_lowercase().as_str() {
            "how" => Ok(Perception::How),
            "where" => Ok(Perception::Where),
            "what" => Ok(Perception::What),
            other => bail!("unknown perception stage `{other}` in `{s}`"),
        })
        .collect::<anyhow::Result<_>>()?;
    let arr: [Perception; 3] = parts
        .try_into()
        .map_err(|_| anyhow::anyhow!("order `{s}` must name three stages"))?;
    Ok(PipelineOrder::new(arr)?)
}

fn load_set(path: &Path) -> anyhow::Result<PairSet> {
    let manifest = Manifest::load(path)?;
    Ok(PairSet::load(&manifest)?)
}

fn write_report(dir: &Path, stem: &str, text: &str, ndjson: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join(format!("{stem}.txt")), text)?;
    fs::write(dir.join(format!("{stem}.ndjson")), ndjson)?;
    Ok(())
}

fn emit_comparison(dir: &Path, stem: &str, report: &ComparisonReport) -> anyhow::Result<()> {
    let text = report.to_text();
    print!("{text}");
    write_report(dir, stem, &text, &report.to_ndjson())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Degrade(a) => {
            let specs = SpecFile::load(&a.spec)?.composites;
            let clean_dir = match (a.clean, a.synthetic) {
                (Some(dir), _) => dir,
                (None, Some(n)) => {
                    let dir = a.out.join("scenes");
                    fs::create_dir_all(&dir)?;
                    for i in 0..n {
                        synthetic_scene(a.size, a.size, a.seed ^ (i as u64 + 1))?
                            .save_png(&dir.join(format!("scene{i:04}.png")))?;
                    }
                    dir
                }
                (None, None) => bail!("either --clean or --synthetic is required"),
            };
            let m = generate_dataset(&clean_dir, &a.out, &specs, a.count, a.seed)?;
            println!("wrote {} pairs to {}", m.len(), a.out.join("manifest.tsv").display());
        }
        Command::Train(a) => {
            let cfg = load_config(&a.config)?;
            let set = load_set(&a.data)?;
            let providers = a.providers.build(&cfg)?;
            let opts = LoopOptions {
                resume: a.resume,
                stop_at: a.stop_at,
                progress: true,
            };
            let ckpt = train_loop(&cfg, &set, &providers, &a.out, &opts)?;
            println!("{}", ckpt.display());
        }
        Command::Eval(a) => {
            let state = match &a.config {
                Some(c) => load_checkpoint_for(&a.ckpt, &load_config(c)?)?,
                None => load_checkpoint(&a.ckpt)?,
            };
            let set = load_set(&a.data)?;
            let providers = a.providers.build(state.config())?;
            let report = evaluate(&state.model, &set, &providers, &a.tags)?;
            let baseline = input_baseline(&set)?;
            let text = format!(
                "{}input baseline: {:.3} dB / {:.4}\n",
                report.to_text(),
                baseline.averages.0,
                baseline.averages.1
            );
            print!("{text}");
            let out = a
                .out
                .or_else(|| a.ckpt.parent().map(Path::to_path_buf))
                .unwrap_or_default();
            write_report(&out, "eval_report", &text, &report.to_ndjson())?;
        }
        Command::AblateOrder(a) => {
            let cfg = load_config(&a.common.config)?;
            let set = load_set(&a.common.data)?;
            let providers = a.common.providers.build(&cfg)?;
            let orders = if a.orders.is_empty() {
                DEFAULT_ORDERS.to_vec()
            } else {
                a.orders.iter().map(|s| parse_order(s)).collect::<anyhow::Result<_>>()?
            };
            let report = run_order_ablation(&cfg, &set, &providers, &orders)?;
            emit_comparison(&a.common.out, "order_ablation", &report)?;
        }
        Command::AblateComponents(a) => {
            let cfg = load_config(&a.config)?;
            let set = load_set(&a.data)?;
            let providers = a.providers.build(&cfg)?;
            let report = run_component_ablation(&cfg, &set, &providers)?;
            emit_comparison(&a.out, "component_ablation", &report)?;
        }
        Command::Report(a) => {
            let mut ckpts: Vec<PathBuf> = fs::read_dir(&a.run)
                .with_context(|| format!("reading {}", a.run.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("ckpt_") && n.ends_with(".bin"))
                })
                .collect();
            ckpts.sort();
            let Some(last) = ckpts.last() else {
                bail!("no checkpoints in {}", a.run.display());
            };
            let state = load_checkpoint(last)?;
            println!("checkpoints: {}", ckpts.len());
            println!("latest: {} (iteration {})", last.display(), state.iteration);
            println!("parameters: {}", state.model.parameter_count());
            println!("perception order: {}", state.config().perception_order);
            let curve_path = a.run.join(LOSS_CURVE_FILE);
            if let Ok(text) = fs::read_to_string(&curve_path) {
                let totals: Vec<(u64, f64)> = text
                    .lines()
                    .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
                    .filter_map(|v| Some((v["iteration"].as_u64()?, v["total"].as_f64()?)))
                    .collect();
                if let (Some(first), Some(lastl)) = (totals.first(), totals.last()) {
                    let best = totals.iter().cloned().fold(first.to_owned(), |b, x| if x.1 < b.1 { x } else { b });
                    println!("loss: first {:.5} (it {}), last {:.5} (it {}), best {:.5} (it {})", first.1, first.0, lastl.1, lastl.0, best.1, best.0);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
