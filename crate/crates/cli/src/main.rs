//! Command-line front end: synthesize cohorts and stimuli, build group
//! templates, score memory capacity, and run the cross-validated battery.
//! All randomness flows from explicit seeds; reports never contain wall-clock
//! or environment-dependent content, so equal invocations give equal bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cogres_core::cognition::{mc_suite, CognitiveConfig};
use cogres_core::connectome::build_group_cbt;
use cogres_core::evaluation::{run_full_evaluation, summarize, EvalSummary};
use cogres_core::io::{
    load_connectome, load_manifest, load_timeseries, save_connectome, save_manifest,
    save_timeseries,
};
use cogres_core::model::{EvalReport, MCReport, SubjectEntry, SubjectManifest, TimeSeries};
use cogres_core::synth::{derive_seed, synth_bold, synth_modality, GroupProfile, ModalityKind};
use cogres_core::{Activation, ReservoirConfig, UpdateForm};

#[derive(Parser)]
#[command(
    name = "cogres",
    version,
    about = "Connectome-template reservoirs: cohort synthesis, template building, \
             memory-capacity scoring, and cross-validated evaluation"
)]
struct Cli {
    /// Worker thread cap (env COGRES_THREADS as fallback; default: all cores).
    /// Results are identical for every value.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-group BOLD cohort plus its manifest
    Synth(SynthArgs),
    /// Generate one stimulus stream (visual-like, text-like or audio-like)
    SynthModality(SynthModalityArgs),
    /// Encode one group's subjects and write its connectional template
    GenCbt(GenCbtArgs),
    /// Memory capacity of a template-driven reservoir on stimulus files
    Mc(McArgs),
    /// Cross-validated evaluation battery over a two-group cohort
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Total subjects, split as evenly as possible across groups
    #[arg(long)]
    subjects: usize,
    /// Brain regions per subject (channels per CSV)
    #[arg(long)]
    rois: usize,
    /// Timepoints per subject
    #[arg(long)]
    timepoints: usize,
    /// Comma-separated group names
    #[arg(long, value_delimiter = ',', default_value = "ASD,TD")]
    groups: Vec<String>,
    /// Per-subject channel noise level
    #[arg(long, default_value_t = 0.05)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory for the CSVs and manifest.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthModalityArgs {
    /// visual-like | text-like | audio-like
    #[arg(long, value_parser = parse_modality_kind)]
    kind: ModalityKind,
    #[arg(long)]
    timepoints: usize,
    /// Channels per timepoint
    #[arg(long)]
    dims: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

/// Field-by-field overrides of an encoding config; set flags win over the
/// JSON file, which wins over defaults.
#[derive(Args)]
struct ReservoirOverrides {
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    leak: Option<f64>,
    #[arg(long)]
    spectral_target: Option<f64>,
    #[arg(long)]
    input_scaling: Option<f64>,
    /// tanh | linear
    #[arg(long, value_parser = parse_activation)]
    activation: Option<Activation>,
    /// leak_inside | leak_outside
    #[arg(long, value_parser = parse_update_form)]
    update_form: Option<UpdateForm>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ReservoirOverrides {
    fn apply(&self, cfg: &mut ReservoirConfig) {
        if let Some(v) = self.size {
            cfg.size = v;
        }
        if let Some(v) = self.leak {
            cfg.leak = v;
        }
        if let Some(v) = self.spectral_target {
            cfg.spectral_target = v;
        }
        if let Some(v) = self.input_scaling {
            cfg.input_scaling = v;
        }
        if let Some(v) = self.activation {
            cfg.activation = v;
        }
        if let Some(v) = self.update_form {
            cfg.update_form = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

#[derive(Args)]
struct GenCbtArgs {
    /// Manifest JSON written by `synth` (or hand-rolled to the same shape)
    #[arg(long)]
    manifest: PathBuf,
    /// Group to template
    #[arg(long)]
    group: String,
    /// Encoding config JSON; omitted fields take defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: ReservoirOverrides,
    /// Output CSV path; run metadata goes to <out>.meta.json
    #[arg(long)]
    out: PathBuf,
}

/// Overrides for the cognitive config, same precedence as the encoding ones.
#[derive(Args)]
struct CognitiveOverrides {
    #[arg(long)]
    spectral_target: Option<f64>,
    #[arg(long)]
    input_scaling: Option<f64>,
    #[arg(long)]
    leak: Option<f64>,
    #[arg(long)]
    tau_max: Option<u32>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    washout: Option<usize>,
    #[arg(long)]
    ridge_lambda: Option<f64>,
    /// tanh | linear
    #[arg(long, value_parser = parse_activation)]
    activation: Option<Activation>,
    /// leak_inside | leak_outside
    #[arg(long, value_parser = parse_update_form)]
    update_form: Option<UpdateForm>,
    #[arg(long)]
    seed: Option<u64>,
}

impl CognitiveOverrides {
    fn apply(&self, cfg: &mut CognitiveConfig) {
        if let Some(v) = self.spectral_target {
            cfg.spectral_target = v;
        }
        if let Some(v) = self.input_scaling {
            cfg.input_scaling = v;
        }
        if let Some(v) = self.leak {
            cfg.leak = v;
        }
        if let Some(v) = self.tau_max {
            cfg.tau_max = v;
        }
        if let Some(v) = self.train_fraction {
            cfg.train_fraction = v;
        }
        if let Some(v) = self.washout {
            cfg.washout = Some(v);
        }
        if let Some(v) = self.ridge_lambda {
            cfg.ridge_lambda = v;
        }
        if let Some(v) = self.activation {
            cfg.activation = v;
        }
        if let Some(v) = self.update_form {
            cfg.update_form = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

#[derive(Args)]
struct McArgs {
    /// Template CSV (square, symmetric, unit diagonal)
    #[arg(long)]
    cbt: PathBuf,
    /// Stimulus stream as name=path; repeatable. Zero streams still write
    /// a (empty) report and exit 0.
    #[arg(long, value_parser = parse_modality_spec)]
    modality: Vec<(String, PathBuf)>,
    /// Cognitive config JSON; omitted fields take defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: CognitiveOverrides,
    /// Output report path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Manifest JSON of a two-group cohort
    #[arg(long)]
    manifest: PathBuf,
    /// Cross-validation folds (at least 2)
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    folds: u64,
    /// Encoding config JSON
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cognitive config JSON
    #[arg(long)]
    cogconfig: Option<PathBuf>,
    /// Seeds the fold shuffle and the built-in stimulus streams
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory for fold_<i>.json and summary.json
    #[arg(long)]
    out: PathBuf,
}

fn parse_modality_kind(s: &str) -> Result<ModalityKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "linear" => Ok(Activation::Linear),
        other => Err(format!("expected tanh or linear, got {other:?}")),
    }
}

fn parse_update_form(s: &str) -> Result<UpdateForm, String> {
    match s {
        "leak_inside" => Ok(UpdateForm::LeakInside),
        "leak_outside" => Ok(UpdateForm::LeakOutside),
        other => Err(format!("expected leak_inside or leak_outside, got {other:?}")),
    }
}

fn parse_modality_spec(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=path, got {s:?}"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected name=path with both parts nonempty, got {s:?}"));
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = resolve_threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::SynthModality(args) => cmd_synth_modality(args),
        Command::GenCbt(args) => cmd_gen_cbt(args),
        Command::Mc(args) => cmd_mc(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn resolve_threads(flag: Option<u64>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n as usize));
    }
    match std::env::var("COGRES_THREADS") {
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .with_context(|| format!("COGRES_THREADS is not a thread count: {raw:?}"))?;
            if n == 0 {
                bail!("COGRES_THREADS must be >= 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let raw = fs::read_to_string(path)
        .with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&raw).with_context(|| format!("parsing {what} {}", path.display()))
}

fn resolve_cognitive_config(
    path: Option<&Path>,
    overrides: &CognitiveOverrides,
) -> Result<CognitiveConfig> {
    let mut cfg = match path {
        Some(p) => load_json_config(p, "cognitive config")?,
        None => CognitiveConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {}", path.display()))?;
    body.push('\n');
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    if args.groups.is_empty() {
        bail!("need at least one group name");
    }
    if args.subjects < args.groups.len() {
        bail!(
            "{} subjects cannot cover {} groups",
            args.subjects,
            args.groups.len()
        );
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let base = args.subjects / args.groups.len();
    let extra = args.subjects % args.groups.len();
    let mut subjects = Vec::with_capacity(args.subjects);
    for (g, group) in args.groups.iter().enumerate() {
        let count = base + usize::from(g < extra);
        let profile = GroupProfile {
            structure_seed: derive_seed(args.seed, g as u64),
            noise_sigma: args.noise_sigma,
        };
        let series = synth_bold(
            count,
            args.rois,
            args.timepoints,
            &profile,
            derive_seed(args.seed, 1_000 + g as u64),
        )?;
        for (i, ts) in series.iter().enumerate() {
            let id = format!("{group}-{i:03}");
            let file = format!("{id}.csv");
            save_timeseries(args.out.join(&file), ts)?;
            subjects.push(SubjectEntry { id, path: PathBuf::from(file), group: group.clone() });
        }
        println!("wrote {count} subjects for group {group}");
    }

    let manifest = SubjectManifest { atlas_dim: args.rois, subjects };
    let manifest_path = args.out.join("manifest.json");
    save_manifest(&manifest_path, &manifest)?;
    println!("wrote {}", manifest_path.display());
    Ok(())
}

fn cmd_synth_modality(args: SynthModalityArgs) -> Result<()> {
    let series = synth_modality(args.kind, args.timepoints, args.dims, args.seed)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_timeseries(&args.out, &series)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct CbtMeta<'a> {
    group: &'a str,
    subject_count: usize,
    atlas_dim: usize,
    config: &'a ReservoirConfig,
}

fn cmd_gen_cbt(args: GenCbtArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let mut cfg = match args.config.as_deref() {
        Some(p) => load_json_config(p, "encoding config")?,
        None => ReservoirConfig {
            size: manifest.atlas_dim,
            ..ReservoirConfig::default()
        },
    };
    args.overrides.apply(&mut cfg);
    cfg.validate()?;
    let cbt = build_group_cbt(&manifest, &args.group, &cfg)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_connectome(&args.out, &cbt)?;
    let meta_path = meta_path_for(&args.out);
    write_json(
        &meta_path,
        &CbtMeta {
            group: &args.group,
            subject_count: manifest.subjects_in_group(&args.group).len(),
            atlas_dim: manifest.atlas_dim,
            config: &cfg,
        },
    )?;
    println!("wrote {}", args.out.display());
    println!("wrote {}", meta_path.display());
    Ok(())
}

fn meta_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

#[derive(Serialize)]
struct McFile<'a> {
    config: &'a CognitiveConfig,
    reports: &'a [MCReport],
}

fn cmd_mc(args: McArgs) -> Result<()> {
    let cbt = load_connectome(&args.cbt)?;
    let cfg = resolve_cognitive_config(args.config.as_deref(), &args.overrides)?;
    let mut modalities: Vec<(String, TimeSeries)> = Vec::with_capacity(args.modality.len());
    for (name, path) in &args.modality {
        let series = load_timeseries(path, None)?;
        modalities.push((name.clone(), series));
    }
    let reports = mc_suite(&cbt, &modalities, &cfg)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_json(&args.out, &McFile { config: &cfg, reports: &reports })?;
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Built-in stimulus archetypes the evaluation scores every template
/// against: (kind, timepoints, channels). Ordered by temporal complexity,
/// with channel counts shrinking from frame-like to tone-like.
const EVAL_MODALITIES: [(ModalityKind, usize, usize); 3] = [
    (ModalityKind::VisualLike, 300, 16),
    (ModalityKind::TextLike, 300, 8),
    (ModalityKind::AudioLike, 300, 4),
];

#[derive(Serialize)]
struct EvalModalityMeta {
    name: &'static str,
    timepoints: usize,
    dims: usize,
    seed: u64,
}

#[derive(Serialize)]
struct FoldFile<'a> {
    config: &'a ReservoirConfig,
    cogconfig: &'a CognitiveConfig,
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    folds: u64,
    seed: u64,
    config: &'a ReservoirConfig,
    cogconfig: &'a CognitiveConfig,
    modalities: &'a [EvalModalityMeta],
    summary: &'a EvalSummary,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let cfg: ReservoirConfig = match args.config.as_deref() {
        Some(p) => load_json_config(p, "encoding config")?,
        None => ReservoirConfig {
            size: manifest.atlas_dim,
            ..ReservoirConfig::default()
        },
    };
    cfg.validate()?;
    let cogcfg: CognitiveConfig = match args.cogconfig.as_deref() {
        Some(p) => load_json_config(p, "cognitive config")?,
        None => CognitiveConfig::default(),
    };
    cogcfg.validate()?;

    let mut modalities = Vec::with_capacity(EVAL_MODALITIES.len());
    let mut modality_meta = Vec::with_capacity(EVAL_MODALITIES.len());
    for (i, (kind, timepoints, dims)) in EVAL_MODALITIES.iter().enumerate() {
        let seed = derive_seed(args.seed, 2_000 + i as u64);
        modalities.push((
            kind.name().to_string(),
            synth_modality(*kind, *timepoints, *dims, seed)?,
        ));
        modality_meta.push(EvalModalityMeta {
            name: kind.name(),
            timepoints: *timepoints,
            dims: *dims,
            seed,
        });
    }

    let reports = run_full_evaluation(
        &manifest,
        &cfg,
        &cogcfg,
        &modalities,
        args.folds as usize,
        args.seed,
    )?;
    let summary = summarize(&reports)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for report in &reports {
        let path = args.out.join(format!("fold_{}.json", report.fold_index));
        write_json(&path, &FoldFile { config: &cfg, cogconfig: &cogcfg, report })?;
        println!("wrote {}", path.display());
    }
    let summary_path = args.out.join("summary.json");
    write_json(
        &summary_path,
        &SummaryFile {
            folds: args.folds,
            seed: args.seed,
            config: &cfg,
            cogconfig: &cogcfg,
            modalities: &modality_meta,
            summary: &summary,
        },
    )?;
    println!("wrote {}", summary_path.display());
    Ok(())
}
