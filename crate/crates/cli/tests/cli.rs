use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn topicwise(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topicwise"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = topicwise(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL: &str =
    "[synthetic]\ntopic_sizes = [600, 300, 100]\n\n[run.train]\nepochs = 2\nhidden = 16\n";

fn pipeline(dir: &Path) {
    fs::write(dir.join("cfg.toml"), SMALL).unwrap();
    let c = ["--config", "cfg.toml"];
    let emb = ["--embeddings", "d/embeddings.tseb"];
    let corpus = ["--corpus", "d/corpus.jsonl"];
    ok(
        dir,
        &[&c[..], &["synth", "--out-dir", "d", "--seed", "7"]].concat(),
    );
    ok(
        dir,
        &[
            &c[..],
            &["cluster"],
            &corpus,
            &emb,
            &["--out", "c.json", "--seed", "7"],
        ]
        .concat(),
    );
    ok(
        dir,
        &[
            &c[..],
            &["sample"],
            &corpus,
            &emb,
            &["--clustering", "c.json", "--out", "s.json", "--seed", "7"],
        ]
        .concat(),
    );
    ok(
        dir,
        &[
            &c[..],
            &["diagnose"],
            &corpus,
            &["--subset", "s.json", "--out", "r.json"],
        ]
        .concat(),
    );
    ok(
        dir,
        &[
            &c[..],
            &["train"],
            &corpus,
            &emb,
            &["--subset", "s.json", "--out", "m.bin", "--seed", "7"],
        ]
        .concat(),
    );
    ok(
        dir,
        &[
            &c[..],
            &["eval", "--test", "d/test.jsonl"],
            &emb,
            &["--model", "m.bin", "--out", "e.json"],
        ]
        .concat(),
    );
}

const MANIFESTS: [&str; 6] = [
    "d/manifest.json",
    "c.json.manifest.json",
    "s.json.manifest.json",
    "r.json.manifest.json",
    "m.bin.manifest.json",
    "e.json.manifest.json",
];

#[test]
fn rerun_reproduces_every_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    for name in MANIFESTS {
        let x = fs::read_to_string(a.path().join(name)).unwrap();
        let y = fs::read_to_string(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
        let v: serde_json::Value = serde_json::from_str(&x).unwrap();
        assert!(!v["outputs"].as_array().unwrap().is_empty(), "{name}");
    }
    // the sample manifest chains the clustering's output hash
    let c: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("c.json.manifest.json")).unwrap())
            .unwrap();
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("s.json.manifest.json")).unwrap())
            .unwrap();
    let inputs = s["inputs"].as_array().unwrap();
    assert!(inputs
        .iter()
        .any(|i| i["sha256"] == c["outputs"][0]["sha256"]));
}

#[test]
fn sample_stays_within_budget_slack() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("cfg.toml"),
        "[synthetic]\ntopic_sizes = [600, 300, 100]\n\n[run]\nclusters = 12\nbudget = 0.5\n",
    )
    .unwrap();
    ok(d, &["--config", "cfg.toml", "synth", "--out-dir", "d"]);
    ok(
        d,
        &[
            "--config",
            "cfg.toml",
            "cluster",
            "--corpus",
            "d/corpus.jsonl",
            "--embeddings",
            "d/embeddings.tseb",
            "--out",
            "c.json",
        ],
    );
    let stdout = ok(
        d,
        &[
            "--config",
            "cfg.toml",
            "sample",
            "--corpus",
            "d/corpus.jsonl",
            "--embeddings",
            "d/embeddings.tseb",
            "--clustering",
            "c.json",
            "--out",
            "s.json",
            "--budget",
            "0.10",
        ],
    );
    assert!(stdout.contains("(S = 100)"), "{stdout}");
    let subset: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    let n = subset["selected"].as_array().unwrap().len();
    assert!(n <= 100 + 12, "{n}");
    // the budget flag won over the file, the cluster count came from the file
    let manifest = fs::read_to_string(d.join("s.json.manifest.json")).unwrap();
    assert!(manifest.contains("\"budget\": 0.1,"), "{manifest}");
    assert!(manifest.contains("\"clusters\": 12"), "{manifest}");
}

#[test]
fn perfect_predictions_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.toml"), "[synthetic]\ntopic_sizes = [40, 10]\n").unwrap();
    ok(d, &["--config", "cfg.toml", "synth", "--out-dir", "d"]);
    let mut preds = String::from("id,label\n");
    for line in fs::read_to_string(d.join("d/test.jsonl")).unwrap().lines() {
        let doc: serde_json::Value = serde_json::from_str(line).unwrap();
        preds.push_str(&format!(
            "{},{}\n",
            doc["id"].as_str().unwrap(),
            doc["label"].as_str().unwrap()
        ));
    }
    fs::write(d.join("p.csv"), preds).unwrap();
    let stdout = ok(
        d,
        &["eval", "--test", "d/test.jsonl", "--predictions", "p.csv"],
    );
    assert!(stdout.contains("macro_f1        1.0000"), "{stdout}");
    assert!(stdout.contains("accuracy        1.0000"), "{stdout}");
}

#[test]
fn sweep_writes_one_row_per_budget() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.toml"), SMALL).unwrap();
    ok(d, &["--config", "cfg.toml", "synth", "--out-dir", "d"]);
    ok(
        d,
        &[
            "--config",
            "cfg.toml",
            "sweep",
            "--corpus",
            "d/corpus.jsonl",
            "--test",
            "d/test.jsonl",
            "--embeddings",
            "d/embeddings.tseb",
            "--sampler",
            "stratified",
            "--no-contrastive",
            "--budgets",
            "0.01,0.05,0.10,0.15",
            "--out",
            "sw.csv",
        ],
    );
    let csv = fs::read_to_string(d.join("sw.csv")).unwrap();
    let sizes: Vec<usize> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(sizes.len(), 4);
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "{sizes:?}");
}

#[test]
fn leave_one_out_scores_the_held_out_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.toml"), SMALL).unwrap();
    ok(d, &["--config", "cfg.toml", "synth", "--out-dir", "d"]);
    let args = [
        "--config",
        "cfg.toml",
        "loo",
        "--corpus",
        "d/corpus.jsonl",
        "--embeddings",
        "d/embeddings.tseb",
        "--held-out",
        "synth-b",
    ];
    ok(d, &[&args[..], &["--out", "a.json"]].concat());
    ok(d, &[&args[..], &["--out", "b.json"]].concat());
    let a: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("a.json")).unwrap()).unwrap();
    assert_eq!(a["test_size"], 500);
    assert_eq!(a["train_size"], 500);
    assert_eq!(
        fs::read(d.join("a.json")).unwrap(),
        fs::read(d.join("b.json")).unwrap()
    );

    let out = topicwise(
        d,
        &[
            "loo",
            "--corpus",
            "d/corpus.jsonl",
            "--embeddings",
            "d/embeddings.tseb",
            "--held-out",
            "nope",
            "--out",
            "x.json",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn ingest_merges_sources_and_reports_bad_records() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("a.jsonl"),
        "{\"text\":\"t\",\"topic\":\"guns\",\"label\":\"pro\"}\n",
    )
    .unwrap();
    fs::write(
        d.join("b.csv"),
        "text,topic,label\nx,tax,against\ny,,for\nz,tax,neutral\n",
    )
    .unwrap();
    let out = topicwise(
        d,
        &[
            "ingest",
            "--source",
            "a=a.jsonl",
            "--source",
            "b=b.csv",
            "--out",
            "corpus.jsonl",
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("b.csv:2"));
    let text = fs::read_to_string(d.join("corpus.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(
        text.contains("\"label\":\"Positive\"") || text.contains("\"label\":\"positive\""),
        "{text}"
    );
    assert!(d.join("corpus.jsonl.manifest.json").exists());

    fs::write(
        d.join("c.jsonl"),
        "{\"text\":\"t\",\"topic\":\"g\",\"label\":\"maybe\"}\n",
    )
    .unwrap();
    let out = topicwise(
        d,
        &["ingest", "--source", "c=c.jsonl", "--out", "bad.jsonl"],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("maybe"));
}

#[test]
fn exit_codes_separate_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&topicwise(d, &["frobnicate"])), 1);
    assert_eq!(code(&topicwise(d, &["sample", "--corpus", "x"])), 1);
    assert_eq!(
        code(&topicwise(
            d,
            &["--budget", "1.5", "synth", "--out-dir", "d"]
        )),
        1
    );
    fs::write(d.join("bad.toml"), "[run]\nbudjet = 0.1\n").unwrap();
    assert_eq!(
        code(&topicwise(
            d,
            &["--config", "bad.toml", "synth", "--out-dir", "d"]
        )),
        1
    );
    assert_eq!(code(&topicwise(d, &["--help"])), 0);

    fs::write(d.join("cfg.toml"), "[synthetic]\ntopic_sizes = [30, 10]\n").unwrap();
    ok(d, &["--config", "cfg.toml", "synth", "--out-dir", "d"]);
    let out = topicwise(
        d,
        &[
            "sample",
            "--corpus",
            "d/corpus.jsonl",
            "--embeddings",
            "d/embeddings.tseb",
            "--clustering",
            "missing.json",
            "--out",
            "s.json",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("topicwise cluster"));
    let out = topicwise(
        d,
        &[
            "train",
            "--corpus",
            "d/corpus.jsonl",
            "--embeddings",
            "d/embeddings.tseb",
            "--subset",
            "none.json",
            "--out",
            "m.bin",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("topicwise sample"));
}

#[test]
fn numerical_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("emb.csv"), "id,x,y\na,0,0\nb,1,0\n").unwrap();
    fs::write(
        d.join("corpus.jsonl"),
        "{\"id\":\"a\",\"dataset\":\"x\",\"topic\":\"t\",\"text\":\"p\",\"raw_label\":\"pro\",\"label\":\"Positive\"}\n\
         {\"id\":\"b\",\"dataset\":\"x\",\"topic\":\"t\",\"text\":\"q\",\"raw_label\":\"con\",\"label\":\"Negative\"}\n",
    )
    .unwrap();
    let out = topicwise(
        d,
        &[
            "cluster",
            "--corpus",
            "corpus.jsonl",
            "--embeddings",
            "emb.csv",
            "--out",
            "c.json",
        ],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
