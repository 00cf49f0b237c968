//! Command-line interface.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mtcnn_core::data::{
    group_holdout, group_split, rotate90, sharpen, synth_generate, Class, Manifest, ManifestRecord,
    Rotation, Sample, SplitTag,
};
use mtcnn_core::eval::{
    check_fixtures, evaluate, expert_summary, fixtures_report, format_percent, report,
    summary_lines, two_proportion_test, ConfusionMatrix, TaskSpec,
};
use mtcnn_core::pipeline::prepare_image;
use mtcnn_core::train::{cross_validate, topology_search, train_samples, SearchSpace};

use crate::config::RunConfig;
use crate::dataset::{manifest_path, Dataset};
use crate::error::{Error, Result};
use crate::manifest_io::{self, write_manifest, ManifestFile};
use crate::model_io::{self, load_model, save_model, SavedModel};
use crate::pgm::{load_image, save_image};
use crate::raters::read_raters;

#[derive(Debug, Parser)]
#[command(
    name = "mtcnn",
    version,
    about = "Microtubule image classification with a small convolutional network"
)]
pub struct Cli {
    /// key=value configuration file; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 forces the serial path
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by the dataset and model commands.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// 3class, 0v0.1, 0v1 or 0.1v1
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    #[arg(long)]
    pub input_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    #[arg(long)]
    pub l2_lambda: Option<f64>,
    #[arg(long)]
    pub patience_epochs: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sharpen: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub rotations: Option<bool>,
    /// Cross-validation folds
    #[arg(long)]
    pub k: Option<usize>,
    /// Topologies tried by search
    #[arg(long)]
    pub budget: Option<usize>,
    /// Any other setting, as key=value
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a manifest from class directories 0/, 0.1/ and 1/ of graymaps
    Ingest { root: PathBuf },
    /// Write sharpened copies of every image in a manifest
    Sharpen(Opts),
    /// Add 90, 180 and 270 degree rotations of every non-test image
    Augment(Opts),
    /// Assign test, validation and training splits by group
    Split {
        #[command(flatten)]
        opts: Opts,
        #[arg(long, default_value_t = 100)]
        test_per_class: usize,
    },
    /// Train one model with early stopping on the validation split
    Train(Opts),
    /// k-fold cross-validation on the non-test records
    Cv(Opts),
    /// Random topology search scored by cross-validation
    Search(Opts),
    /// Evaluate a model on the test split
    Eval(Opts),
    /// Class probabilities for individual images
    Predict {
        #[command(flatten)]
        opts: Opts,
        images: Vec<PathBuf>,
    },
    /// Two-proportion z-test on k1/n1 versus k2/n2 correct answers
    Stats { k1: u64, n1: u64, k2: u64, n2: u64 },
    /// Expert and model accuracy report for the test split
    Report {
        #[command(flatten)]
        opts: Opts,
        /// Rater sheet file
        #[arg(long)]
        raters: Option<PathBuf>,
        /// Additional model files to evaluate
        #[arg(long = "eval-model")]
        eval_models: Vec<PathBuf>,
    },
    /// Recompute the published accuracies from the embedded confusion matrices
    Fixtures,
    /// Generate a labelled synthetic dataset
    Synth {
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 100)]
        size: usize,
    },
}

impl Opts {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let mut pairs: Vec<(&str, String)> = Vec::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k, v));
            }
        };
        push("manifest", path(&self.manifest));
        push("task", self.task.clone());
        push("model", path(&self.model));
        push("model_config", path(&self.model_config));
        push("input_size", self.input_size.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("dropout_rate", self.dropout_rate.map(|v| v.to_string()));
        push("l2_lambda", self.l2_lambda.map(|v| v.to_string()));
        push(
            "patience_epochs",
            self.patience_epochs.map(|v| v.to_string()),
        );
        push("max_epochs", self.max_epochs.map(|v| v.to_string()));
        push("val_fraction", self.val_fraction.map(|v| v.to_string()));
        push("sharpen", self.sharpen.map(|v| v.to_string()));
        push("rotations", self.rotations.map(|v| v.to_string()));
        push("k", self.k.map(|v| v.to_string()));
        push("budget", self.budget.map(|v| v.to_string()));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)
                .map_err(|m| Error::Usage(format!("--set {kv}: {m}")))?;
        }
        for (k, v) in pairs {
            cfg.set(k, &v)
                .map_err(|m| Error::Usage(format!("--{}: {m}", k.replace('_', "-"))))?;
        }
        Ok(())
    }
}

/// Resolves the configuration: defaults, then the config file, then flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let opts = match &cli.command {
        Command::Sharpen(o)
        | Command::Augment(o)
        | Command::Train(o)
        | Command::Cv(o)
        | Command::Search(o)
        | Command::Eval(o) => Some(o),
        Command::Split { opts, .. }
        | Command::Predict { opts, .. }
        | Command::Report { opts, .. } => Some(opts),
        _ => None,
    };
    if let Some(o) = opts {
        o.apply(&mut cfg)?;
    }
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses arguments, runs the command on a pool of the configured size and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} threads: {e}", cfg.threads)))?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<()> {
    match command {
        Command::Ingest { root } => ingest(root, cfg),
        Command::Sharpen(_) => sharpen_cmd(cfg),
        Command::Augment(_) => augment_cmd(cfg),
        Command::Split { test_per_class, .. } => split_cmd(cfg, *test_per_class),
        Command::Train(_) => train_cmd(cfg),
        Command::Cv(_) => cv_cmd(cfg),
        Command::Search(_) => search_cmd(cfg),
        Command::Eval(_) => eval_cmd(cfg),
        Command::Predict { images, .. } => predict_cmd(cfg, images),
        Command::Stats { k1, n1, k2, n2 } => {
            let t = two_proportion_test(*k1, *n1, *k2, *n2)?;
            println!("z={:.4}", t.z);
            println!("p={:.3e}", t.p);
            Ok(())
        }
        Command::Report {
            raters,
            eval_models,
            ..
        } => report_cmd(cfg, raters.as_deref(), eval_models),
        Command::Fixtures => {
            print!("{}", fixtures_report(&check_fixtures()?));
            Ok(())
        }
        Command::Synth { per_class, size } => synth_cmd(cfg, *per_class, *size),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Records what produced the files in `dir`: command, formats, seed and the
/// resolved configuration. Contains no timestamps.
fn write_stanza(dir: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "command={command}");
    let _ = writeln!(s, "mtcnn_version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "model_format={}", model_io::FORMAT_VERSION);
    let _ = writeln!(s, "manifest_format={}", manifest_io::FORMAT_VERSION);
    s.push_str(&cfg.to_text());
    write(&dir.join("run.txt"), &s)
}

fn ingest(root: &Path, cfg: &RunConfig) -> Result<()> {
    let out = cfg.out.clone().unwrap_or_else(|| root.to_path_buf());
    let mut records = Vec::new();
    for class in Class::ALL {
        let dir = root.join(class.label());
        if !dir.is_dir() {
            return Err(Error::Usage(format!(
                "{} has no class directory {}",
                root.display(),
                class.label()
            )));
        }
        let mut files = Vec::new();
        collect_pgm(&dir, &mut files)?;
        files.sort();
        for f in files {
            load_image(&f)?;
            let rel_to_class = manifest_path(&f, &dir);
            let stem = rel_to_class
                .rsplit_once('.')
                .map_or(rel_to_class.as_str(), |(s, _)| s);
            let rot = Rotation::from_path(&rel_to_class);
            let base = stem.strip_suffix(rot.path_suffix()).unwrap_or(stem);
            records.push(ManifestRecord {
                path: manifest_path(&f, &out),
                label: class,
                group_id: format!("{}/{base}", class.label()),
                split: SplitTag::Unassigned,
            });
        }
    }
    let mut manifest = Manifest { records };
    manifest.sort();
    let path = out.join("manifest.tsv");
    write_manifest(
        &path,
        &ManifestFile {
            manifest,
            sharpened: false,
        },
    )?;
    write_stanza(&out, "ingest", cfg)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn collect_pgm(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_pgm(&p, out)?;
        } else if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            out.push(p);
        }
    }
    Ok(())
}

fn rebased(ds: &Dataset, rec: &ManifestRecord, out: &Path) -> String {
    manifest_path(&ds.resolve(rec), out)
}

fn sharpen_cmd(cfg: &RunConfig) -> Result<()> {
    let ds = Dataset::open(cfg.require_manifest()?)?;
    if ds.file.sharpened {
        return Err(Error::Usage("manifest images are already sharpened".into()));
    }
    let out = cfg.out_dir();
    let mut records = Vec::new();
    for rec in &ds.file.manifest.records {
        let img = sharpen(&load_image(&ds.resolve(rec))?)?;
        let path = out.join(&rec.path);
        save_image(&path, &img)?;
        records.push(ManifestRecord {
            path: manifest_path(&path, &out),
            ..rec.clone()
        });
    }
    let path = out.join("manifest.tsv");
    write_manifest(
        &path,
        &ManifestFile {
            manifest: Manifest { records },
            sharpened: true,
        },
    )?;
    write_stanza(&out, "sharpen", cfg)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn augment_cmd(cfg: &RunConfig) -> Result<()> {
    let ds = Dataset::open(cfg.require_manifest()?)?;
    let out = cfg.out_dir();
    let mut records = Vec::new();
    for rec in &ds.file.manifest.records {
        if rec.rotation() != Rotation::R0 {
            return Err(mtcnn_core::Error::DoubleAugmentation(rec.group_id.clone()).into());
        }
        records.push(ManifestRecord {
            path: rebased(&ds, rec, &out),
            ..rec.clone()
        });
        if rec.split == SplitTag::Test {
            continue;
        }
        let img = load_image(&ds.resolve(rec))?;
        let (stem, ext) = rec
            .path
            .rsplit_once('.')
            .unwrap_or((rec.path.as_str(), "pgm"));
        for rot in &Rotation::ALL[1..] {
            let path = out.join(format!("{stem}{}.{ext}", rot.path_suffix()));
            save_image(&path, &rotate90(&img, rot.quarter_turns())?)?;
            records.push(ManifestRecord {
                path: manifest_path(&path, &out),
                ..rec.clone()
            });
        }
    }
    let mut manifest = Manifest { records };
    manifest.sort();
    mtcnn_core::data::validate_manifest(&manifest)?;
    let path = out.join("manifest.tsv");
    write_manifest(
        &path,
        &ManifestFile {
            manifest,
            sharpened: ds.file.sharpened,
        },
    )?;
    write_stanza(&out, "augment", cfg)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn split_cmd(cfg: &RunConfig, test_per_class: usize) -> Result<()> {
    let ds = Dataset::open(cfg.require_manifest()?)?;
    let out = cfg.out_dir();
    let seed = cfg.train.seed;
    let mut records: Vec<ManifestRecord> = ds
        .file
        .manifest
        .records
        .iter()
        .map(|r| ManifestRecord {
            path: rebased(&ds, r, &out),
            ..r.clone()
        })
        .collect();
    let has_test = records.iter().any(|r| r.split == SplitTag::Test);
    let (mut pool, mut test): (Vec<ManifestRecord>, Vec<ManifestRecord>) =
        records.drain(..).partition(|r| r.split != SplitTag::Test);
    if !has_test {
        if pool.iter().any(|r| r.rotation() != Rotation::R0) {
            return Err(Error::Usage(
                "hold out the test split before augmenting".into(),
            ));
        }
        let (rest, held) = group_holdout(&pool, test_per_class, seed)?;
        pool = rest;
        test = held;
    }
    let (train, val) = group_split(&pool, cfg.train.val_fraction, seed)?;
    let tag = |v: Vec<ManifestRecord>, s: SplitTag| {
        v.into_iter().map(move |r| ManifestRecord { split: s, ..r })
    };
    let mut manifest = Manifest {
        records: tag(train, SplitTag::Train)
            .chain(tag(val, SplitTag::Val))
            .chain(tag(test, SplitTag::Test))
            .collect(),
    };
    manifest.sort();
    mtcnn_core::data::validate_manifest(&manifest)?;
    let path = out.join("manifest.tsv");
    write_manifest(
        &path,
        &ManifestFile {
            manifest,
            sharpened: ds.file.sharpened,
        },
    )?;
    write_stanza(&out, "split", cfg)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Training and validation samples: the tagged splits, or a group split of
/// the training records when none are tagged for validation.
fn train_val(ds: &Dataset, cfg: &RunConfig) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let train = ds.load(&ds.records(&[SplitTag::Train, SplitTag::Unassigned]))?;
    let val = ds.load(&ds.records(&[SplitTag::Val]))?;
    if val.is_empty() {
        return Ok(group_split(&train, cfg.train.val_fraction, cfg.train.seed)?);
    }
    Ok((train, val))
}

fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let ds = Dataset::open(cfg.require_manifest()?)?;
    let model_cfg = cfg.model_config()?;
    let out = cfg.out_dir();
    let (train, val) = train_val(&ds, cfg)?;
    let start = Instant::now();
    let (model, mut report) = train_samples(&model_cfg, &cfg.train, &train, &val, cfg.task)?;
    report.wall_time_secs = Some(start.elapsed().as_secs_f64());
    save_model(
        &out.join("model.mtcn"),
        &SavedModel {
            model,
            task: cfg.task,
        },
    )?;
    write(&out.join("train.log"), &report.to_log())?;
    write(&out.join("summary.txt"), &report.summary())?;
    write_stanza(&out, "train", cfg)?;
    print!("{}", report.to_log());
    println!(
        "best_epoch={} best_val_acc={} stop_reason={} wall_time={:.1}s",
        report.best_epoch,
        format_percent(report.best_val_acc),
        report.stop_reason,
        report.wall_time_secs.unwrap_or_default()
    );
    Ok(())
}

fn non_test(ds: &Dataset) -> Result<Vec<Sample>> {
    ds.load(&ds.records(&[SplitTag::Train, SplitTag::Val, SplitTag::Unassigned]))
}

fn cv_cmd(cfg: &RunConfig) -> Result<()> {
    let ds = Dataset::open(cfg.require_manifest()?)?;
    let model_cfg = cfg.model_config()?;
    let cv = cross_validate(&model_cfg, &cfg.train, &non_test(&ds)?, cfg.task, cfg.k)?;
    let mut s = String::new();
    for (i, a) in cv.folds.iter().enumerate() {
        let _ = writeln!(s, "fold{}={}", i + 1, format_percent(*a));
    }
    let _ = writeln!(s, "mean={}", format_percent(cv.mean));
    let out = cfg.out_dir();
    write(&out.join("cv.txt"), &s)?;
    write_stanza(&out, "cv", cfg)?;
    print!("{s}");
    Ok(())
}

fn search_cmd(cfg: &RunConfig) -> Result<()> {
    let ds = Dataset::open(cfg.require_manifest()?)?;
    let samples = non_test(&ds)?;
    let tc = &cfg.train;
    let results = topology_search(
        &SearchSpace::default(),
        tc,
        &samples,
        cfg.task,
        cfg.budget,
        tc.seed,
        cfg.k,
    )?;
    let mut s = String::new();
    for (rank, r) in results.iter().enumerate() {
        let _ = writeln!(
            s,
            "# rank {} mean={} params={}",
            rank + 1,
            format_percent(r.mean),
            r.params
        );
        s.push_str(&r.config.to_text());
        s.push('\n');
    }
    let out = cfg.out_dir();
    write(&out.join("search.txt"), &s)?;
    write_stanza(&out, "search", cfg)?;
    print!("{s}");
    Ok(())
}

fn load_checked(path: &Path, cfg: &RunConfig, explicit_task: bool) -> Result<SavedModel> {
    let saved = load_model(path)?;
    if explicit_task && saved.task != cfg.task {
        return Err(Error::Usage(format!(
            "model {} was trained for {}, not {}",
            path.display(),
            saved.task,
            cfg.task
        )));
    }
    Ok(saved)
}

fn eval_cmd(cfg: &RunConfig) -> Result<()> {
    let ds = Dataset::open(cfg.require_manifest()?)?;
    let saved = load_checked(cfg.require_model()?, cfg, cfg.task != TaskSpec::ThreeClass)?;
    let test = ds.load(&ds.records(&[SplitTag::Test]))?;
    if test.is_empty() {
        return Err(Error::Usage("manifest has no test records".into()));
    }
    let cm = evaluate(&saved.model, &test, saved.task)?;
    let entries = vec![("CNN".to_string(), cm)];
    let out = cfg.out_dir();
    write(&out.join("report.txt"), &report(&entries))?;
    write(&out.join("summary.txt"), &summary_lines(&entries))?;
    write_stanza(&out, "eval", cfg)?;
    print!("{}", report(&entries));
    Ok(())
}

fn predict_cmd(cfg: &RunConfig, images: &[PathBuf]) -> Result<()> {
    let saved = load_model(cfg.require_model()?)?;
    let model_cfg = saved.model.config();
    let classes = saved.task.classes();
    let mut header = String::from("path");
    for c in &classes {
        let _ = write!(header, "\tp({c})");
    }
    println!("{header}\tpredicted");
    for path in images {
        let sample = Sample {
            image: load_image(path)?,
            label: classes[0],
            group_id: String::new(),
            rotation: Rotation::R0,
            sharpened: false,
        };
        let img = prepare_image(&sample, model_cfg.input_size, model_cfg.sharpen)?;
        let probs = saved.model.predict(&img.to_tensor())?;
        let best = mtcnn_core::model::argmax(probs.data());
        let mut line = path.display().to_string();
        for p in probs.data() {
            let _ = write!(line, "\t{p:.6}");
        }
        println!("{line}\t{}", classes[best]);
    }
    Ok(())
}

fn report_cmd(cfg: &RunConfig, raters: Option<&Path>, models: &[PathBuf]) -> Result<()> {
    let ds = Dataset::open(cfg.require_manifest()?)?;
    let test_records = ds.records(&[SplitTag::Test]);
    let mut entries: Vec<(String, ConfusionMatrix)> = Vec::new();
    let mut expert_lines = String::new();
    if let Some(path) = raters {
        let sheets = read_raters(path)?;
        let truth: BTreeMap<String, Class> = test_records
            .iter()
            .map(|r| (r.path.clone(), r.label))
            .collect();
        for task in TaskSpec::ALL {
            if !sheets
                .iter()
                .any(|s| s.labels.keys().any(|(_, t)| *t == task))
            {
                continue;
            }
            let sum = expert_summary(&sheets, &truth, task)?;
            let _ = writeln!(
                expert_lines,
                "{:<12} average={} best={} voting={}",
                task.to_string(),
                format_percent(sum.average),
                format_percent(sum.best),
                format_percent(sum.voting.accuracy()?)
            );
            entries.push(("Voting".into(), sum.voting));
        }
    }
    if !models.is_empty() {
        let test = ds.load(&test_records)?;
        for path in models {
            let saved = load_model(path)?;
            let label = path
                .file_stem()
                .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
            entries.push((label, evaluate(&saved.model, &test, saved.task)?));
        }
    }
    let mut text = report(&entries);
    if !expert_lines.is_empty() {
        text.push_str("\nExperts\n");
        text.push_str(&expert_lines);
    }
    let out = cfg.out_dir();
    write(&out.join("report.txt"), &text)?;
    write(&out.join("summary.txt"), &summary_lines(&entries))?;
    write_stanza(&out, "report", cfg)?;
    print!("{text}");
    Ok(())
}

fn synth_cmd(cfg: &RunConfig, per_class: usize, size: usize) -> Result<()> {
    let out = cfg.out_dir();
    let seed = cfg.train.seed;
    if per_class == 0 || per_class >= 1 << 20 {
        return Err(Error::Usage(format!(
            "--per-class must be between 1 and {}",
            (1 << 20) - 1
        )));
    }
    let mut jobs = Vec::with_capacity(per_class * 3);
    for class in Class::ALL {
        for i in 0..per_class {
            jobs.push((class, i, (seed << 20) | i as u64));
        }
    }
    use rayon::prelude::*;
    let records = jobs
        .par_iter()
        .map(|&(class, i, s)| {
            let sample = synth_generate(class, s, size)?;
            let rel = format!("{}/synth_{i:04}.pgm", class.label());
            save_image(&out.join(&rel), &sample.image)?;
            Ok(ManifestRecord {
                group_id: rel.trim_end_matches(".pgm").to_string(),
                path: rel,
                label: class,
                split: SplitTag::Unassigned,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = Manifest { records };
    manifest.sort();
    let path = out.join("manifest.tsv");
    write_manifest(
        &path,
        &ManifestFile {
            manifest,
            sharpened: false,
        },
    )?;
    write_stanza(&out, "synth", cfg)?;
    println!("wrote {} images and {}", per_class * 3, path.display());
    Ok(())
}
