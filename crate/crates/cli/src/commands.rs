use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;
use topicwise::corpus::{ingest_dataset, Corpus, InputFormat, StanceLabel};
use topicwise::diagnostics::{
    classification_metrics, imbalance_report, pca_2d, write_projection_csv, Metrics,
};
use topicwise::embedding::EmbeddingMatrix;
use topicwise::pipeline::{self, cluster_corpus, draw_subset, leave_one_out, unknown_ids};
use topicwise::sampler::{SampledSubset, SamplerKind};
use topicwise::synthetic::generate;
use topicwise::topic::{import_clustering, TopicClustering};
use topicwise::trainer::{load_checkpoint, save_checkpoint};

use crate::config::FileConfig;
use crate::manifest::{self, Manifest};
use crate::UsageError;

/// Fails with a data error naming the stage that produces `path`.
fn require(path: &Path, what: &str, stage: &str) -> anyhow::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        bail!(MissingArtifact {
            what: what.to_string(),
            stage: stage.to_string(),
            path: path.to_path_buf(),
        })
    }
}

#[derive(Debug)]
struct MissingArtifact {
    what: String,
    stage: String,
    path: PathBuf,
}

impl std::fmt::Display for MissingArtifact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "missing {} at {} (produced by `topicwise {}`)",
            self.what,
            self.path.display(),
            self.stage
        )
    }
}

impl std::error::Error for MissingArtifact {}

fn load_corpus(path: &Path, role: &str, m: &mut Manifest) -> anyhow::Result<Corpus> {
    require(path, role, "ingest")?;
    m.input(role, path)?;
    Corpus::read_jsonl(path).with_context(|| format!("loading {role} {}", path.display()))
}

fn load_embeddings(path: &Path, m: &mut Manifest) -> anyhow::Result<EmbeddingMatrix> {
    require(path, "embeddings", "synth")?;
    m.input("embeddings", path)?;
    let loaded = if path.extension().is_some_and(|e| e == "csv") {
        EmbeddingMatrix::read_csv(path)
    } else {
        EmbeddingMatrix::read(path)
    };
    loaded.with_context(|| format!("loading embeddings {}", path.display()))
}

fn load_clustering(
    path: Option<&Path>,
    corpus: &Corpus,
    sampler: SamplerKind,
    m: &mut Manifest,
) -> anyhow::Result<Option<TopicClustering>> {
    match (path, sampler) {
        (Some(path), _) => {
            require(path, "clustering", "cluster")?;
            m.input("clustering", path)?;
            let c = import_clustering(path, corpus)
                .with_context(|| format!("loading clustering {}", path.display()))?;
            Ok(Some(c))
        }
        (None, SamplerKind::Topic) => Err(UsageError(
            "the topic sampler needs --clustering (produced by `topicwise cluster`)".into(),
        )
        .into()),
        (None, _) => Ok(None),
    }
}

fn load_subset(path: &Path, corpus: &Corpus, m: &mut Manifest) -> anyhow::Result<SampledSubset> {
    require(path, "subset", "sample")?;
    m.input("subset", path)?;
    let subset = SampledSubset::read_json(path)
        .with_context(|| format!("loading subset {}", path.display()))?;
    let unknown = unknown_ids(&subset.selected, corpus);
    if !unknown.is_empty() {
        bail!(topicwise::Error::InvalidArgument(format!(
            "subset has {} ids missing from the corpus, first {:?}",
            unknown.len(),
            unknown[0]
        )));
    }
    Ok(subset)
}

fn finish(m: &mut Manifest, role: &str, out: &Path) -> anyhow::Result<()> {
    m.output(role, out)?;
    m.write(&manifest::path_for(out))
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_metrics(metrics: &Metrics) {
    println!("macro_f1        {:.4}", metrics.macro_f1);
    println!("macro_precision {:.4}", metrics.macro_precision);
    println!("macro_recall    {:.4}", metrics.macro_recall);
    println!("accuracy        {:.4}", metrics.accuracy);
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// `NAME=PATH`; repeat for every dataset. Format follows the extension.
    #[arg(long = "source", required = true)]
    sources: Vec<String>,
    /// Merged corpus (JSONL).
    #[arg(long)]
    out: PathBuf,
}

pub fn ingest(a: &IngestArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let mut m = Manifest::new("ingest", &cfg.ingest)?;
    let mut fragments = Vec::new();
    for source in &a.sources {
        let Some((name, path)) = source.split_once('=') else {
            bail!(UsageError(format!("--source {source:?} is not NAME=PATH")));
        };
        let path = Path::new(path);
        let Some(format) = InputFormat::from_path(path) else {
            bail!(UsageError(format!(
                "{}: expected a .jsonl or .csv file",
                path.display()
            )));
        };
        if !path.exists() {
            bail!(topicwise::Error::InvalidArgument(format!(
                "input {} does not exist",
                path.display()
            )));
        }
        m.input(name, path)?;
        let got = ingest_dataset(path, name, format, &cfg.ingest)
            .with_context(|| format!("ingesting {}", path.display()))?;
        for err in &got.errors {
            eprintln!("{}:{}: {}", path.display(), err.line, err.message);
        }
        println!(
            "{name}: {} documents, {} record errors",
            got.corpus.len(),
            got.errors.len()
        );
        fragments.push(got.corpus);
    }
    let corpus = Corpus::merge(fragments)?;
    corpus.write_jsonl(&a.out)?;
    println!("wrote {} documents to {}", corpus.len(), a.out.display());
    finish(&mut m, "corpus", &a.out)
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Clustering JSON.
    #[arg(long)]
    out: PathBuf,
}

pub fn cluster(a: &ClusterArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let run = &cfg.run;
    let mut m = Manifest::new("cluster", run)?;
    let corpus = load_corpus(&a.corpus, "corpus", &mut m)?;
    let emb = load_embeddings(&a.embeddings, &mut m)?;
    let clustering = cluster_corpus(&corpus, &emb, run.clusters, run.seed, run.kmeans_max_iter)?;
    clustering.write(&a.out)?;
    println!(
        "{} clusters, sizes {:?}",
        clustering.t(),
        clustering.sizes()
    );
    finish(&mut m, "clustering", &a.out)
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Required by the topic sampler.
    #[arg(long)]
    clustering: Option<PathBuf>,
    /// Subset JSON with the selection ledger.
    #[arg(long)]
    out: PathBuf,
    /// Also write the selected ids, one per line.
    #[arg(long)]
    ids: Option<PathBuf>,
}

pub fn sample(a: &SampleArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let run = &cfg.run;
    let mut m = Manifest::new("sample", run)?;
    let corpus = load_corpus(&a.corpus, "corpus", &mut m)?;
    let emb = load_embeddings(&a.embeddings, &mut m)?;
    let clustering = load_clustering(a.clustering.as_deref(), &corpus, run.sampler, &mut m)?;
    let subset = draw_subset(&corpus, &emb, clustering.as_ref(), run)?;
    subset.write_json(&a.out)?;
    println!(
        "selected {} of {} documents (S = {})",
        subset.len(),
        corpus.len(),
        pipeline::budget_size(run.budget, corpus.len())
    );
    if let Some(ids) = &a.ids {
        subset.write_id_list(ids)?;
        m.output("ids", ids)?;
    }
    finish(&mut m, "subset", &a.out)
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    subset: PathBuf,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Directory for topic and label count CSVs.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    /// Embeddings for a 2-D projection of the subset.
    #[arg(long, requires = "projection")]
    embeddings: Option<PathBuf>,
    /// Projection CSV (`id,label,x,y`).
    #[arg(long, requires = "embeddings")]
    projection: Option<PathBuf>,
}

pub fn diagnose(a: &DiagnoseArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let run = &cfg.run;
    let mut m = Manifest::new("diagnose", serde_json::json!({ "top_k": run.top_k }))?;
    let corpus = load_corpus(&a.corpus, "corpus", &mut m)?;
    let subset = load_subset(&a.subset, &corpus, &mut m)?;
    let report = imbalance_report(&corpus, &subset.selected, run.top_k)?;
    print!("{}", report.to_text());
    write_json(&a.out, &report)?;
    if let Some(dir) = &a.csv_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, body) in [
            ("topic_counts.csv", report.topic_counts_csv()),
            ("label_counts.csv", report.label_counts_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            m.output(name, &path)?;
        }
    }
    if let (Some(emb_path), Some(proj)) = (&a.embeddings, &a.projection) {
        let emb = load_embeddings(emb_path, &mut m)?;
        let rows: Vec<Vec<f32>> = subset
            .selected
            .iter()
            .map(|id| {
                emb.get(id)
                    .map(<[f32]>::to_vec)
                    .ok_or_else(|| topicwise::Error::MissingEmbedding(vec![id.clone()]))
            })
            .collect::<Result<_, _>>()?;
        let labels: Vec<StanceLabel> = subset
            .selected
            .iter()
            .map(|id| corpus.get(id).expect("checked").label)
            .collect();
        write_projection_csv(proj, &subset.selected, &labels, &pca_2d(&rows)?)?;
        m.output("projection", proj)?;
    }
    finish(&mut m, "report", &a.out)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    subset: PathBuf,
    /// Model checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Per-step loss CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

pub fn train(a: &TrainArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let train_cfg = cfg.run.train_config();
    let mut m = Manifest::new("train", train_cfg)?;
    let corpus = load_corpus(&a.corpus, "corpus", &mut m)?;
    let emb = load_embeddings(&a.embeddings, &mut m)?;
    let subset = load_subset(&a.subset, &corpus, &mut m)?;
    let state = pipeline::train_subset(&subset, &corpus, &emb, &train_cfg)?;
    save_checkpoint(&state.head, &train_cfg, &a.out)?;
    if let Some(last) = state.history.last() {
        println!(
            "{} steps, final loss {:.4} (ce {:.4}, cl {:.4})",
            state.step, last.total, last.ce, last.cl
        );
    }
    if let Some(h) = &a.history {
        state.write_history_csv(h)?;
        m.output("history", h)?;
    }
    finish(&mut m, "model", &a.out)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labeled corpus to score against.
    #[arg(long)]
    test: PathBuf,
    /// Checkpoint from `topicwise train`.
    #[arg(long, conflicts_with = "predictions", requires = "embeddings")]
    model: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// CSV with `id,label` columns instead of a model.
    #[arg(long, required_unless_present = "model")]
    predictions: Option<PathBuf>,
    /// Metrics JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the model's predictions as `id,label` CSV.
    #[arg(long, requires = "model")]
    predictions_out: Option<PathBuf>,
}

fn read_predictions(path: &Path) -> anyhow::Result<HashMap<String, StanceLabel>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let (Some(id), Some(label)) = (row.get(0), row.get(1)) else {
            bail!(topicwise::Error::InvalidArgument(format!(
                "{}: row {} needs id and label",
                path.display(),
                i + 1
            )));
        };
        out.insert(id.to_string(), label.parse::<StanceLabel>()?);
    }
    Ok(out)
}

pub fn eval(a: &EvalArgs, _cfg: &FileConfig) -> anyhow::Result<()> {
    let mut m = Manifest::new("eval", serde_json::Value::Null)?;
    let test = load_corpus(&a.test, "test", &mut m)?;
    let golds: Vec<StanceLabel> = test.documents().iter().map(|d| d.label).collect();
    let (metrics, preds) = match (&a.model, &a.predictions) {
        (Some(model), _) => {
            require(model, "model", "train")?;
            m.input("model", model)?;
            let emb = load_embeddings(a.embeddings.as_deref().expect("required by clap"), &mut m)?;
            let (head, _) = load_checkpoint(model)?;
            let (metrics, preds) = pipeline::evaluate(&head, &test, &emb)?;
            (metrics, preds)
        }
        (None, Some(path)) => {
            require(path, "predictions", "eval --predictions-out")?;
            m.input("predictions", path)?;
            let table = read_predictions(path)?;
            let preds = test
                .documents()
                .iter()
                .map(|d| {
                    table.get(&d.id).copied().ok_or_else(|| {
                        topicwise::Error::InvalidArgument(format!("no prediction for {}", d.id))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            (classification_metrics(&preds, &golds)?, preds)
        }
        (None, None) => bail!(UsageError("pass --model or --predictions".into())),
    };
    print_metrics(&metrics);
    if let Some(path) = &a.predictions_out {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["id", "label"])?;
        for (d, p) in test.documents().iter().zip(&preds) {
            w.write_record([d.id.as_str(), p.name()])?;
        }
        w.flush()?;
        m.output("predictions", path)?;
    }
    match &a.out {
        Some(out) => {
            write_json(out, &metrics)?;
            finish(&mut m, "metrics", out)
        }
        None => Ok(()),
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    clustering: Option<PathBuf>,
    /// Comma-separated budget fractions.
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<f64>,
    /// CSV with `budget,macro_f1,subset_size`.
    #[arg(long)]
    out: PathBuf,
}

pub fn sweep(a: &SweepArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let run = &cfg.run;
    if let Some(b) = a.budgets.iter().find(|b| !(**b > 0.0 && **b <= 1.0)) {
        bail!(UsageError(format!("budget {b} outside (0, 1]")));
    }
    let mut m = Manifest::new(
        "sweep",
        serde_json::json!({ "run": run, "budgets": a.budgets }),
    )?;
    let corpus = load_corpus(&a.corpus, "corpus", &mut m)?;
    let test = load_corpus(&a.test, "test", &mut m)?;
    let emb = load_embeddings(&a.embeddings, &mut m)?;
    let clustering = load_clustering(a.clustering.as_deref(), &corpus, run.sampler, &mut m)?;
    let rows = pipeline::sweep(&corpus, &test, &emb, clustering.as_ref(), &a.budgets, run)?;
    let mut w =
        csv::Writer::from_path(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    for row in &rows {
        w.serialize(row)?;
        println!(
            "budget {:.3}  subset {:>6}  macro_f1 {:.4}",
            row.budget, row.subset_size, row.macro_f1
        );
    }
    w.flush()?;
    finish(&mut m, "sweep", &a.out)
}

#[derive(Debug, Args)]
pub struct LooArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Dataset withheld from training and used as the test set.
    #[arg(long)]
    held_out: String,
    /// Metrics JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct LooSummary<'a> {
    held_out: &'a str,
    train_size: usize,
    test_size: usize,
    subset_size: usize,
    metrics: &'a Metrics,
}

pub fn loo(a: &LooArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let run = &cfg.run;
    let mut m = Manifest::new(
        "loo",
        serde_json::json!({ "run": run, "held_out": a.held_out }),
    )?;
    let corpus = load_corpus(&a.corpus, "corpus", &mut m)?;
    let emb = load_embeddings(&a.embeddings, &mut m)?;
    let out = leave_one_out(&corpus, &emb, &a.held_out, run)?;
    println!(
        "held out {} ({} documents), trained on {} of {}",
        out.held_out,
        out.test_ids.len(),
        out.outcome.subset.len(),
        out.train_size
    );
    print_metrics(&out.outcome.metrics);
    write_json(
        &a.out,
        &LooSummary {
            held_out: &out.held_out,
            train_size: out.train_size,
            test_size: out.test_ids.len(),
            subset_size: out.outcome.subset.len(),
            metrics: &out.outcome.metrics,
        },
    )?;
    finish(&mut m, "metrics", &a.out)
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for corpus.jsonl, test.jsonl, embeddings.tseb and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn synth(a: &SynthArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let data = generate(&cfg.synthetic)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut m = Manifest::new("synth", &cfg.synthetic)?;
    let corpus = a.out_dir.join("corpus.jsonl");
    let test = a.out_dir.join("test.jsonl");
    let emb = a.out_dir.join("embeddings.tseb");
    data.corpus.write_jsonl(&corpus)?;
    data.test.write_jsonl(&test)?;
    data.embeddings.write(&emb)?;
    m.output("corpus", &corpus)?;
    m.output("test", &test)?;
    m.output("embeddings", &emb)?;
    m.write(&a.out_dir.join("manifest.json"))?;
    println!(
        "{} train and {} test documents, {} dims, in {}",
        data.corpus.len(),
        data.test.len(),
        data.embeddings.dims(),
        a.out_dir.display()
    );
    Ok(())
}
