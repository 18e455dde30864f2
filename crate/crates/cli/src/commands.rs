use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use libu::baselines::{run_baseline, Algorithm};
use libu::data::{generate_synthetic_corpus, CorpusSpec, PackedSplit, SyntheticCorpus, Vocabulary};
use libu::evaluate::{evaluate_model, render_table, EvalReport};
use libu::model::{Checkpoint, Model, ModelConfig};
use libu::unlearn::{memorize as run_memorize, run_libu, Budget, MemorizeConfig, RunLog};

use crate::config::{resolve, KvConfig, PresetChoice};
use crate::manifest::Manifest;
use crate::Common;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const RUNLOG_FILE: &str = "runlog.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "table.txt";

const ALGORITHMS: &str = "libu, ga, gd, kl";

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>, manifest: &mut Manifest) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    manifest.output(name);
    Ok(())
}

fn write_log(dir: &Path, log: &RunLog, manifest: &mut Manifest) -> Result<()> {
    for w in &log.warnings {
        eprintln!("warning: {w}");
    }
    write(dir, RUNLOG_FILE, log.to_jsonl(), manifest)
}

fn load_corpus(dir: &Path) -> Result<(SyntheticCorpus, Vocabulary)> {
    if !dir.is_dir() {
        bail!("dataset directory {} does not exist", dir.display());
    }
    let corpus = SyntheticCorpus::read_dir(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
    let vocab = Vocabulary::from_examples(corpus.all_examples())?;
    Ok((corpus, vocab))
}

/// Checkpoint whose stored vocabulary must equal the corpus vocabulary.
fn load_checkpoint(path: &Path, vocab: &Vocabulary) -> Result<Model> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    match &ckpt.vocabulary {
        Some(v) if v != vocab => {
            return Err(libu::Error::ModelMismatch(format!(
                "checkpoint {} was trained with a different vocabulary ({} vs {} tokens)",
                path.display(),
                v.len(),
                vocab.len()
            ))
            .into())
        }
        None if ckpt.model.config().vocab_size != vocab.len() => {
            return Err(libu::Error::ModelMismatch(format!(
                "checkpoint vocab size {} differs from dataset vocab size {}",
                ckpt.model.config().vocab_size,
                vocab.len()
            ))
            .into())
        }
        _ => {}
    }
    Ok(ckpt.model)
}

fn save_checkpoint(dir: &Path, model: &Model, vocab: &Vocabulary, manifest: &mut Manifest) -> Result<()> {
    let bytes = Checkpoint::new(model.clone(), Some(vocab.clone())).to_bytes()?;
    write(dir, CHECKPOINT_FILE, bytes, manifest)
}

pub fn gen_corpus(common: &Common, counts: [usize; 5], force: bool) -> Result<()> {
    let out = &common.out;
    if out.is_dir() && fs::read_dir(out)?.next().is_some() && !force {
        bail!(
            "output directory {} is not empty; pass --force to overwrite",
            out.display()
        );
    }
    let [forget, retain, utility, member, nonmember] = counts;
    let spec = CorpusSpec::with_counts(forget, retain, utility, member, nonmember);
    let corpus = generate_synthetic_corpus(&spec, common.seed)?;
    corpus.write_dir(out)?;
    let mut manifest = Manifest::new("gen-corpus", Some(common.seed), &spec)?;
    for f in [
        libu::data::RETAIN_FILE,
        libu::data::FORGET_FILE,
        libu::data::UTILITY_FILE,
        libu::data::MIA_MEMBER_FILE,
        libu::data::MIA_NONMEMBER_FILE,
    ] {
        manifest.output(f);
    }
    manifest.write(out)
}

pub fn memorize(
    common: &Common,
    data: &Path,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
) -> Result<()> {
    let (corpus, vocab) = load_corpus(data)?;
    let mut config = ModelConfig::desk(vocab.len());
    config.seed = common.seed;
    let mut model = Model::build(config)?;
    let packed = PackedSplit::new(&corpus.split, &vocab, model.config().max_length)?;
    let defaults = MemorizeConfig::default();
    let cfg = MemorizeConfig {
        epochs: epochs.unwrap_or(defaults.epochs),
        learning_rate: learning_rate.unwrap_or(defaults.learning_rate),
        batch_size: batch_size.unwrap_or(defaults.batch_size),
        seed: common.seed,
        ..defaults
    };
    let report = run_memorize(&mut model, &packed, &cfg, &Budget::seconds(common.max_seconds))?;
    create_out(&common.out)?;
    let mut manifest = Manifest::new(
        "memorize",
        Some(common.seed),
        serde_json::json!({ "model": model.config(), "memorize": cfg }),
    )?;
    manifest.input(data)?;
    save_checkpoint(&common.out, &model, &vocab, &mut manifest)?;
    write_log(&common.out, &report.log, &mut manifest)?;
    eprintln!(
        "memorized after {} epochs: retain recall {:.3}, forget recall {:.3}",
        report.epochs_run, report.retain_recall, report.forget_recall
    );
    manifest.write(&common.out)
}

pub fn unlearn(
    common: &Common,
    data: &Path,
    checkpoint: &Path,
    algorithm: &str,
    preset: &str,
    allow_override: bool,
    eta_scale: Option<f64>,
) -> Result<()> {
    let baseline = match algorithm {
        "libu" => None,
        other => Some(
            Algorithm::parse(other).ok_or_else(|| anyhow::anyhow!("unknown algorithm {other}; valid: {ALGORITHMS}"))?,
        ),
    };
    let kv = match &common.config {
        Some(p) => KvConfig::load(p)?,
        None => KvConfig::default(),
    };
    let exp = resolve(
        PresetChoice::parse(preset)?,
        algorithm,
        &kv,
        allow_override,
        common.seed,
        eta_scale,
    )?;
    let (corpus, vocab) = load_corpus(data)?;
    let mut model = load_checkpoint(checkpoint, &vocab)?;
    let max_length = exp.unlearn.max_length.min(model.config().max_length);
    let packed = PackedSplit::new(&corpus.split, &vocab, max_length)?;
    let budget = Budget::seconds(common.max_seconds);
    let log = match baseline {
        None => run_libu(&mut model, &packed, &exp.unlearn, &budget)?,
        Some(a) => run_baseline(&mut model, &packed, &exp.baseline(a), &budget)?,
    };
    create_out(&common.out)?;
    let mut manifest = Manifest::new("unlearn", Some(common.seed), &exp)?;
    manifest.input(data)?;
    manifest.input(checkpoint)?;
    if let Some(p) = &common.config {
        manifest.input(p)?;
    }
    save_checkpoint(&common.out, &model, &vocab, &mut manifest)?;
    write_log(&common.out, &log, &mut manifest)?;
    if log.aborted {
        eprintln!("warning: time budget exhausted; the checkpoint holds the partial result");
    }
    manifest.write(&common.out)
}

pub fn eval(common: &Common, data: &Path, checkpoint: &Path, name: &str) -> Result<()> {
    let (corpus, vocab) = load_corpus(data)?;
    let model = load_checkpoint(checkpoint, &vocab)?;
    let report = evaluate_model(&model, &vocab, &corpus)?;
    create_out(&common.out)?;
    let mut manifest = Manifest::new("eval", Some(common.seed), serde_json::json!({ "name": name }))?;
    manifest.input(data)?;
    manifest.input(checkpoint)?;
    write(
        &common.out,
        REPORT_FILE,
        serde_json::to_string_pretty(&report)? + "\n",
        &mut manifest,
    )?;
    let table = render_table(&[(name.to_string(), report)])?;
    print!("{table}");
    write(&common.out, TABLE_FILE, table, &mut manifest)?;
    manifest.write(&common.out)
}

fn read_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading report {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed report {}", path.display()))
}

/// Row label: the report's parent directory name, else its file stem.
fn label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    match (stem.as_deref(), path.parent().and_then(|p| p.file_name())) {
        (Some("report"), Some(dir)) => dir.to_string_lossy().into_owned(),
        (Some(s), _) => s.to_string(),
        _ => path.display().to_string(),
    }
}

pub fn compare(reports: &[std::path::PathBuf], out: Option<&Path>) -> Result<()> {
    if reports.len() < 2 {
        bail!("compare needs at least two reports");
    }
    let rows = reports
        .iter()
        .map(|p| Ok((label(p), read_report(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let table = render_table(&rows)?;
    print!("{table}");
    if let Some(dir) = out {
        create_out(dir)?;
        let mut manifest = Manifest::new("compare", None, serde_json::Value::Null)?;
        for p in reports {
            manifest.input(p)?;
        }
        write(dir, TABLE_FILE, table, &mut manifest)?;
        manifest.write(dir)?;
    }
    Ok(())
}
