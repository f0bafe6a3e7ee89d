//! Stance corpora: ingestion, five-way label standardization, prompt
//! construction and dataset-level splits.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five-way stance inventory shared by every source dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StanceLabel {
    Positive,
    Negative,
    Discuss,
    Other,
    Neutral,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 5] = [
        StanceLabel::Positive,
        StanceLabel::Negative,
        StanceLabel::Discuss,
        StanceLabel::Other,
        StanceLabel::Neutral,
    ];

    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            StanceLabel::Positive => "Positive",
            StanceLabel::Negative => "Negative",
            StanceLabel::Discuss => "Discuss",
            StanceLabel::Other => "Other",
            StanceLabel::Neutral => "Neutral",
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StanceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        standardize_label(s)
    }
}

/// Hard mapping from source-dataset label strings to the five-way scheme.
///
/// "comment" is listed under both Discuss and Other in the benchmark's table;
/// it resolves to Discuss here and can be redirected per dataset through
/// [`IngestOptions::label_overrides`].
const LABEL_TABLE: &[(&str, StanceLabel)] = &[
    ("agree", StanceLabel::Positive),
    ("argument for", StanceLabel::Positive),
    ("for", StanceLabel::Positive),
    ("pro", StanceLabel::Positive),
    ("favor", StanceLabel::Positive),
    ("support", StanceLabel::Positive),
    ("endorse", StanceLabel::Positive),
    ("positive", StanceLabel::Positive),
    ("disagree", StanceLabel::Negative),
    ("argument against", StanceLabel::Negative),
    ("against", StanceLabel::Negative),
    ("anti", StanceLabel::Negative),
    ("con", StanceLabel::Negative),
    ("undermine", StanceLabel::Negative),
    ("deny", StanceLabel::Negative),
    ("refute", StanceLabel::Negative),
    ("negative", StanceLabel::Negative),
    ("discuss", StanceLabel::Discuss),
    ("observing", StanceLabel::Discuss),
    ("question", StanceLabel::Discuss),
    ("query", StanceLabel::Discuss),
    ("comment", StanceLabel::Discuss),
    ("unrelated", StanceLabel::Other),
    ("none", StanceLabel::Other),
    ("other", StanceLabel::Other),
    ("neutral", StanceLabel::Neutral),
];

/// Maps a raw source label onto the five-way scheme. Matching is
/// case-insensitive and ignores surrounding whitespace.
pub fn standardize_label(raw: &str) -> Result<StanceLabel> {
    let key = raw.trim().to_lowercase();
    LABEL_TABLE
        .iter()
        .find(|(name, _)| *name == key)
        .map(|(_, label)| *label)
        .ok_or_else(|| Error::UnknownLabel(raw.to_string()))
}

/// One labeled text instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub dataset: String,
    pub topic: String,
    pub text: String,
    pub raw_label: String,
    pub label: StanceLabel,
}

impl Document {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidDocument {
                id: self.id.clone(),
                reason: "empty id".into(),
            });
        }
        if self.text.trim().is_empty() {
            return Err(Error::InvalidDocument {
                id: self.id.clone(),
                reason: "empty text".into(),
            });
        }
        if self.topic.trim().is_empty() {
            return Err(Error::InvalidDocument {
                id: self.id.clone(),
                reason: "empty topic".into(),
            });
        }
        Ok(())
    }
}

/// Premise/hypothesis prompt fed to the stance classifier. Marker strings are
/// emitted as literal text and the inputs are not escaped.
pub fn build_prompt(doc: &Document) -> String {
    format!(
        "[CLS] premise: {} hypothesis: {} [EOS]",
        doc.text, doc.topic
    )
}

/// An immutable collection of documents drawn from one or more datasets.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    datasets: BTreeSet<String>,
    topics: BTreeMap<String, usize>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, checking document invariants and id uniqueness.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut index = HashMap::with_capacity(documents.len());
        let mut datasets = BTreeSet::new();
        let mut topics = BTreeMap::new();
        for (i, doc) in documents.iter().enumerate() {
            doc.validate()?;
            if index.insert(doc.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
            datasets.insert(doc.dataset.clone());
            *topics.entry(doc.topic.clone()).or_insert(0) += 1;
        }
        Ok(Self {
            documents,
            datasets,
            topics,
            index,
        })
    }

    /// Concatenates fragments, typically one per ingested dataset file.
    pub fn merge(fragments: impl IntoIterator<Item = Corpus>) -> Result<Self> {
        let docs = fragments
            .into_iter()
            .flat_map(|c| c.documents)
            .collect::<Vec<_>>();
        Self::new(docs)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn datasets(&self) -> &BTreeSet<String> {
        &self.datasets
    }

    /// Topic multiset as topic → document count.
    pub fn topic_counts(&self) -> &BTreeMap<String, usize> {
        &self.topics
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&i| &self.documents[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.id.as_str())
    }

    pub fn labels(&self) -> HashMap<String, StanceLabel> {
        self.documents
            .iter()
            .map(|d| (d.id.clone(), d.label))
            .collect()
    }

    /// Sub-corpus restricted to the given ids, in corpus order.
    pub fn select(&self, ids: &HashSet<&str>) -> Result<Corpus> {
        Corpus::new(
            self.documents
                .iter()
                .filter(|d| ids.contains(d.id.as_str()))
                .cloned()
                .collect(),
        )
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for doc in &self.documents {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads the canonical JSONL form written by [`Corpus::write_jsonl`].
    pub fn read_jsonl(path: &Path) -> Result<Corpus> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut docs = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            docs.push(serde_json::from_str::<Document>(&line)?);
        }
        Corpus::new(docs)
    }
}

/// Holds out one dataset entirely: returns `(train, test)`.
pub fn split_leave_one_out(corpus: &Corpus, held_out: &str) -> Result<(Corpus, Corpus)> {
    if !corpus.datasets.contains(held_out) {
        return Err(Error::UnknownDataset(held_out.to_string()));
    }
    let (test, train): (Vec<_>, Vec<_>) = corpus
        .documents
        .iter()
        .cloned()
        .partition(|d| d.dataset == held_out);
    if train.is_empty() {
        log::warn!("holding out {held_out:?} leaves an empty training corpus");
    }
    Ok((Corpus::new(train)?, Corpus::new(test)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "jsonl" | "json" => Some(InputFormat::Jsonl),
            "csv" => Some(InputFormat::Csv),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    pub text_field: String,
    pub topic_field: String,
    pub label_field: String,
    pub id_field: String,
    /// Raw label (lowercased) → label, consulted before the default table.
    pub label_overrides: BTreeMap<String, StanceLabel>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            text_field: "text".into(),
            topic_field: "topic".into(),
            label_field: "label".into(),
            id_field: "id".into(),
            label_overrides: BTreeMap::new(),
        }
    }
}

impl IngestOptions {
    fn resolve_label(&self, raw: &str) -> Result<StanceLabel> {
        let key = raw.trim().to_lowercase();
        match self.label_overrides.get(&key) {
            Some(label) => Ok(*label),
            None => standardize_label(raw),
        }
    }
}

/// A record that could not be turned into a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordError {
    /// 1-based line number for JSONL, 1-based data row for CSV.
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct Ingested {
    pub corpus: Corpus,
    pub errors: Vec<RecordError>,
    pub warnings: Vec<String>,
}

/// Reads one source dataset, standardizing its labels.
///
/// Malformed records are reported and skipped. An unmappable raw label aborts
/// the whole ingest with [`Error::UnknownLabel`].
pub fn ingest_dataset(
    path: &Path,
    dataset: &str,
    format: InputFormat,
    opts: &IngestOptions,
) -> Result<Ingested> {
    let records = match format {
        InputFormat::Jsonl => read_jsonl_records(path)?,
        InputFormat::Csv => read_csv_records(path)?,
    };

    let mut docs = Vec::new();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    if records.is_empty() {
        let msg = format!("{} contains no records", path.display());
        log::warn!("{msg}");
        warnings.push(msg);
    }

    for (index, (line, record)) in records.into_iter().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(message) => {
                errors.push(RecordError { line, message });
                continue;
            }
        };
        let field = |name: &str| -> std::result::Result<String, String> {
            match record.get(name) {
                Some(v) if !v.trim().is_empty() => Ok(v.clone()),
                _ => Err(format!("missing field {name:?}")),
            }
        };
        let parsed = (|| {
            let text = field(&opts.text_field)?;
            let topic = field(&opts.topic_field)?;
            let raw_label = field(&opts.label_field)?;
            Ok::<_, String>((text, topic, raw_label))
        })();
        let (text, topic, raw_label) = match parsed {
            Ok(t) => t,
            Err(message) => {
                errors.push(RecordError { line, message });
                continue;
            }
        };
        let label = opts.resolve_label(&raw_label)?;
        let id = match record.get(&opts.id_field) {
            Some(id) if !id.trim().is_empty() => id.clone(),
            _ => format!("{dataset}:{index}"),
        };
        docs.push(Document {
            id,
            dataset: dataset.to_string(),
            topic,
            text,
            raw_label,
            label,
        });
    }

    for err in &errors {
        log::warn!("{}:{}: {}", path.display(), err.line, err.message);
    }

    Ok(Ingested {
        corpus: Corpus::new(docs)?,
        errors,
        warnings,
    })
}

type RawRecord = (usize, std::result::Result<HashMap<String, String>, String>);

fn read_jsonl_records(path: &Path) -> Result<Vec<RawRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = match serde_json::from_str::<serde_json::Value>(&line) {
            Ok(serde_json::Value::Object(map)) => Ok(map
                .into_iter()
                .filter_map(|(k, v)| {
                    let s = match v {
                        serde_json::Value::String(s) => s,
                        serde_json::Value::Null => return None,
                        other => other.to_string(),
                    };
                    Some((k, s))
                })
                .collect()),
            Ok(_) => Err("record is not a JSON object".to_string()),
            Err(e) => Err(format!("invalid JSON: {e}")),
        };
        out.push((i + 1, record));
    }
    Ok(out)
}

fn read_csv_records(path: &Path) -> Result<Vec<RawRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let record = row.map_err(|e| e.to_string()).map(|row| {
            headers
                .iter()
                .zip(row.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        });
        out.push((i + 1, record));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn doc(id: &str, dataset: &str, topic: &str, label: StanceLabel) -> Document {
        Document {
            id: id.into(),
            dataset: dataset.into(),
            topic: topic.into(),
            text: format!("text of {id}"),
            raw_label: label.name().to_lowercase(),
            label,
        }
    }

    #[test]
    fn mapping_table_examples() {
        assert_eq!(standardize_label("pro").unwrap(), StanceLabel::Positive);
        assert_eq!(
            standardize_label("argument against").unwrap(),
            StanceLabel::Negative
        );
        assert_eq!(standardize_label("neutral").unwrap(), StanceLabel::Neutral);
        assert_eq!(standardize_label("unrelated").unwrap(), StanceLabel::Other);
        assert_eq!(standardize_label("comment").unwrap(), StanceLabel::Discuss);
        assert_eq!(
            standardize_label("  AGREE ").unwrap(),
            StanceLabel::Positive
        );
    }

    #[test]
    fn canonical_names_are_fixed_points() {
        for label in StanceLabel::ALL {
            assert_eq!(standardize_label(label.name()).unwrap(), label);
        }
    }

    #[test]
    fn unknown_label_carries_raw_string() {
        match standardize_label("maybe-ish") {
            Err(Error::UnknownLabel(s)) => assert_eq!(s, "maybe-ish"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prompt_layout() {
        let mut d = doc("a", "ds", "Y", StanceLabel::Positive);
        d.text = "X".into();
        assert_eq!(build_prompt(&d), "[CLS] premise: X hypothesis: Y [EOS]");
        d.text = "ends here [EOS]".into();
        assert_eq!(
            build_prompt(&d),
            "[CLS] premise: ends here [EOS] hypothesis: Y [EOS]"
        );
    }

    #[test]
    fn blank_topic_rejected() {
        let mut d = doc("a", "ds", "t", StanceLabel::Positive);
        d.topic = "   ".into();
        assert!(matches!(
            Corpus::new(vec![d]),
            Err(Error::InvalidDocument { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let d = doc("a", "ds", "t", StanceLabel::Positive);
        assert!(matches!(
            Corpus::new(vec![d.clone(), d]),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn topic_multiset_counts() {
        let c = Corpus::new(vec![
            doc("1", "a", "guns", StanceLabel::Positive),
            doc("2", "a", "guns", StanceLabel::Negative),
            doc("3", "b", "tax", StanceLabel::Neutral),
        ])
        .unwrap();
        assert_eq!(c.topic_counts()["guns"], 2);
        assert_eq!(c.topic_counts()["tax"], 1);
        assert_eq!(c.datasets().len(), 2);
    }

    #[test]
    fn leave_one_out_partitions() {
        let c = Corpus::new(vec![
            doc("a1", "A", "t", StanceLabel::Positive),
            doc("a2", "A", "t", StanceLabel::Positive),
            doc("a3", "A", "t", StanceLabel::Negative),
            doc("b1", "B", "u", StanceLabel::Other),
            doc("b2", "B", "u", StanceLabel::Discuss),
        ])
        .unwrap();
        let (train, test) = split_leave_one_out(&c, "B").unwrap();
        assert_eq!(train.len(), 3);
        assert_eq!(test.len(), 2);
        assert!(test.documents().iter().all(|d| d.dataset == "B"));
        assert!(train.ids().all(|id| !test.contains(id)));

        assert!(matches!(
            split_leave_one_out(&c, "nope"),
            Err(Error::UnknownDataset(_))
        ));

        let only_a = Corpus::new(c.documents()[..3].to_vec()).unwrap();
        let (train, test) = split_leave_one_out(&only_a, "A").unwrap();
        assert!(train.is_empty());
        assert_eq!(test.len(), 3);
    }

    #[test]
    fn ingest_jsonl_standardizes() {
        let mut f = tempfile::NamedTempFile::with_suffix(".jsonl").unwrap();
        writeln!(f, r#"{{"text":"t","topic":"guns","label":"pro"}}"#).unwrap();
        writeln!(
            f,
            r#"{{"text":"u","topic":"guns","label":"Against","id":"x9"}}"#
        )
        .unwrap();
        let out = ingest_dataset(
            f.path(),
            "ds",
            InputFormat::Jsonl,
            &IngestOptions::default(),
        )
        .unwrap();
        let docs = out.corpus.documents();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].label, StanceLabel::Positive);
        assert_eq!(docs[0].id, "ds:0");
        assert_eq!(docs[0].raw_label, "pro");
        assert_eq!(docs[1].id, "x9");
        assert_eq!(docs[1].label, StanceLabel::Negative);
        assert!(out.errors.is_empty());
    }

    #[test]
    fn ingest_empty_file_warns() {
        let f = tempfile::NamedTempFile::with_suffix(".jsonl").unwrap();
        let out = ingest_dataset(
            f.path(),
            "ds",
            InputFormat::Jsonl,
            &IngestOptions::default(),
        )
        .unwrap();
        assert!(out.corpus.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn ingest_csv_reports_missing_field() {
        let mut f = tempfile::NamedTempFile::with_suffix(".csv").unwrap();
        writeln!(f, "text,topic,label").unwrap();
        writeln!(f, "a,guns,pro").unwrap();
        writeln!(f, "b,,against").unwrap();
        writeln!(f, "\"c, quoted\",tax,neutral").unwrap();
        let out =
            ingest_dataset(f.path(), "ds", InputFormat::Csv, &IngestOptions::default()).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].line, 2);
        assert!(out.errors[0].message.contains("topic"));
        assert_eq!(out.corpus.documents()[1].text, "c, quoted");
    }

    #[test]
    fn ingest_unmappable_label_is_fatal() {
        let mut f = tempfile::NamedTempFile::with_suffix(".jsonl").unwrap();
        writeln!(f, r#"{{"text":"t","topic":"guns","label":"sarcastic"}}"#).unwrap();
        let err = ingest_dataset(
            f.path(),
            "ds",
            InputFormat::Jsonl,
            &IngestOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("sarcastic"));
    }

    #[test]
    fn label_override_and_custom_fields() {
        let mut f = tempfile::NamedTempFile::with_suffix(".jsonl").unwrap();
        writeln!(f, r#"{{"body":"t","claim":"c","stance":"comment"}}"#).unwrap();
        let mut opts = IngestOptions {
            text_field: "body".into(),
            topic_field: "claim".into(),
            label_field: "stance".into(),
            ..Default::default()
        };
        opts.label_overrides
            .insert("comment".into(), StanceLabel::Other);
        let out = ingest_dataset(f.path(), "rumour", InputFormat::Jsonl, &opts).unwrap();
        assert_eq!(out.corpus.documents()[0].label, StanceLabel::Other);
    }

    #[test]
    fn canonical_jsonl_round_trip() {
        let c = Corpus::new(vec![
            doc("1", "a", "guns", StanceLabel::Positive),
            doc("2", "b", "tax", StanceLabel::Discuss),
        ])
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        c.write_jsonl(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["id", "dataset", "topic", "text", "raw_label", "label"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        assert_eq!(first["label"], "Positive");
        let back = Corpus::read_jsonl(f.path()).unwrap();
        assert_eq!(back.documents(), c.documents());
    }
}
