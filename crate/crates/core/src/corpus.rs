//! Dataset model and on-disk formats.
//!
//! Two formats are supported:
//!
//! * JSONL: one object per line with keys `id`, `input`, `output` and an
//!   optional `meta` string map. Lossless.
//! * TSV: `input<TAB>output`. Ids are assigned from the row index and meta is
//!   dropped on save.
//!
//! Token sequences are stored as single-space-joined strings in both formats.
//! The read-only `scan` format parses the `IN: ... OUT: ...` lines of the
//! released SCAN task files.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Meta key marking whether an example is `original` or `augmented`.
pub const META_ORIGIN: &str = "origin";
pub const ORIGIN_ORIGINAL: &str = "original";
pub const ORIGIN_AUGMENTED: &str = "augmented";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub input: Vec<String>,
    pub output: Vec<String>,
    pub meta: BTreeMap<String, String>,
}

impl Example {
    pub fn new(id: impl Into<String>, input: Vec<String>, output: Vec<String>) -> Self {
        Example {
            id: id.into(),
            input,
            output,
            meta: BTreeMap::new(),
        }
    }

    /// Build from space-separated strings.
    pub fn from_text(id: impl Into<String>, input: &str, output: &str) -> Self {
        Example::new(id, split_tokens(input), split_tokens(output))
    }

    pub fn input_text(&self) -> String {
        self.input.join(" ")
    }

    pub fn output_text(&self) -> String {
        self.output.join(" ")
    }

    pub fn is_augmented(&self) -> bool {
        self.meta.get(META_ORIGIN).map(String::as_str) == Some(ORIGIN_AUGMENTED)
    }

    fn validate(&self) -> Result<(), String> {
        if self.input.is_empty() || self.output.is_empty() {
            return Err(format!("example {:?} has an empty side", self.id));
        }
        for tok in self.input.iter().chain(&self.output) {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(format!("example {:?} has invalid token {tok:?}", self.id));
            }
        }
        Ok(())
    }
}

pub fn split_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Ordered collection of examples with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Result<Self, CorpusError> {
        let mut ids = HashSet::with_capacity(examples.len());
        for ex in &examples {
            ex.validate().map_err(CorpusError::Invalid)?;
            if !ids.insert(ex.id.as_str()) {
                return Err(CorpusError::Invalid(format!("duplicate id {:?}", ex.id)));
            }
        }
        Ok(Dataset { examples })
    }

    pub fn empty() -> Self {
        Dataset::default()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    pub fn source_vocab(&self) -> BTreeSet<&str> {
        self.examples
            .iter()
            .flat_map(|e| e.input.iter().map(String::as_str))
            .collect()
    }

    pub fn target_vocab(&self) -> BTreeSet<&str> {
        self.examples
            .iter()
            .flat_map(|e| e.output.iter().map(String::as_str))
            .collect()
    }

    /// Reassign ids as `<prefix><index>`.
    pub fn renumbered(self, prefix: &str) -> Self {
        let examples = self
            .examples
            .into_iter()
            .enumerate()
            .map(|(i, mut e)| {
                e.id = format!("{prefix}{i}");
                e
            })
            .collect();
        Dataset { examples }
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Example;
    type IntoIter = std::slice::Iter<'a, Example>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Tsv,
    Scan,
}

impl Format {
    /// Guess from a file extension; anything unrecognized is JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => Format::Tsv,
            Some("txt") => Format::Scan,
            _ => Format::Jsonl,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "tsv" => Ok(Format::Tsv),
            "scan" => Ok(Format::Scan),
            other => Err(format!("unknown format {other:?} (expected jsonl, tsv or scan)")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    input: String,
    output: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
}

pub fn read_dataset<R: BufRead>(reader: R, format: Format) -> Result<Dataset, CorpusError> {
    let mut examples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| CorpusError::Format {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| CorpusError::Format { line: line_no, message };
        let row = examples.len();
        let mut ex = match format {
            Format::Jsonl => {
                let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
                let mut ex = Example::from_text(rec.id.unwrap_or_else(|| row.to_string()), &rec.input, &rec.output);
                ex.meta = rec.meta;
                ex
            }
            Format::Tsv => {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 2 {
                    return Err(fail(format!("expected 2 tab-separated fields, found {}", fields.len())));
                }
                Example::from_text(row.to_string(), fields[0], fields[1])
            }
            Format::Scan => {
                let rest = line
                    .strip_prefix("IN:")
                    .ok_or_else(|| fail("expected a line starting with \"IN:\"".into()))?;
                let (input, output) = rest
                    .split_once("OUT:")
                    .ok_or_else(|| fail("missing \"OUT:\"".into()))?;
                Example::from_text(row.to_string(), input, output)
            }
        };
        ex.id = ex.id.trim().to_string();
        ex.validate().map_err(fail)?;
        examples.push(ex);
    }
    Dataset::new(examples).map_err(|e| match e {
        CorpusError::Invalid(msg) => CorpusError::Format { line: 0, message: msg },
        other => other,
    })
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut writer: W, format: Format) -> std::io::Result<()> {
    for ex in dataset {
        match format {
            Format::Jsonl => {
                let rec = JsonRecord {
                    id: Some(ex.id.clone()),
                    input: ex.input_text(),
                    output: ex.output_text(),
                    meta: ex.meta.clone(),
                };
                serde_json::to_writer(&mut writer, &rec)?;
                writer.write_all(b"\n")?;
            }
            Format::Tsv => writeln!(writer, "{}\t{}", ex.input_text(), ex.output_text())?,
            Format::Scan => writeln!(writer, "IN: {} OUT: {}", ex.input_text(), ex.output_text())?,
        }
    }
    writer.flush()
}

pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_dataset(BufReader::new(file), format)
}

pub fn save_dataset(dataset: &Dataset, path: &Path, format: Format) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CorpusError::io(path, e))?;
    }
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_dataset(dataset, BufWriter::new(file), format).map_err(|e| CorpusError::io(path, e))
}

/// Serialize to JSONL bytes in memory.
pub fn to_jsonl_bytes(dataset: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf, Format::Jsonl).expect("writing to memory");
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, format: Format) -> Result<Dataset, CorpusError> {
        read_dataset(text.as_bytes(), format)
    }

    #[test]
    fn jsonl_line_maps_directly() {
        let d = read(r#"{"id":"3","input":"walk","output":"I_WALK"}"#, Format::Jsonl).unwrap();
        assert_eq!(d.examples()[0], Example::from_text("3", "walk", "I_WALK"));
    }

    #[test]
    fn tsv_line_gets_row_id() {
        let d = read("walk twice\tI_WALK I_WALK\njump\tI_JUMP\n", Format::Tsv).unwrap();
        assert_eq!(d.examples()[0], Example::from_text("0", "walk twice", "I_WALK I_WALK"));
        assert_eq!(d.examples()[1].id, "1");
        assert_eq!(d.source_vocab(), BTreeSet::from(["jump", "twice", "walk"]));
        assert_eq!(d.target_vocab(), BTreeSet::from(["I_JUMP", "I_WALK"]));
    }

    #[test]
    fn missing_output_is_a_format_error_with_line() {
        let text = "{\"input\":\"walk\",\"output\":\"I_WALK\"}\n{\"input\":\"run\"}\n";
        match read(text, Format::Jsonl) {
            Err(CorpusError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match read("walk\n", Format::Tsv) {
            Err(CorpusError::Format { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match read("{\"input\":\"walk\",\"output\":\"  \"}\n", Format::Jsonl) {
            Err(CorpusError::Format { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "{\"id\":\"a\",\"input\":\"walk\",\"output\":\"W\"}\n{\"id\":\"a\",\"input\":\"run\",\"output\":\"R\"}\n";
        assert!(read(text, Format::Jsonl).is_err());
    }

    #[test]
    fn jsonl_round_trip_is_byte_identical() {
        let mut ex = Example::from_text("x1", "walk left", "I_TURN_LEFT I_WALK");
        ex.meta.insert("origin".into(), "augmented".into());
        let d = Dataset::new(vec![
            ex,
            Example::from_text("x2", "run", "I_RUN"),
            Example::from_text("x3", "jump twice", "I_JUMP I_JUMP"),
        ])
        .unwrap();
        let bytes = to_jsonl_bytes(&d);
        let back = read_dataset(bytes.as_slice(), Format::Jsonl).unwrap();
        assert_eq!(back, d);
        assert_eq!(to_jsonl_bytes(&back), bytes);
    }

    #[test]
    fn tsv_save_drops_meta_and_ids() {
        let mut ex = Example::from_text("custom", "walk", "I_WALK");
        ex.meta.insert("origin".into(), "original".into());
        let d = Dataset::new(vec![ex]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf, Format::Tsv).unwrap();
        assert_eq!(buf, b"walk\tI_WALK\n");
        let back = read_dataset(buf.as_slice(), Format::Tsv).unwrap();
        assert_eq!(back.examples()[0].id, "0");
        assert!(back.examples()[0].meta.is_empty());
    }

    #[test]
    fn empty_dataset_writes_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        save_dataset(&Dataset::empty(), &path, Format::Jsonl).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"");
        assert!(load_dataset(&path, Format::Jsonl).unwrap().is_empty());
    }

    #[test]
    fn scan_task_lines() {
        let text = "IN: jump opposite right twice OUT: I_TURN_RIGHT I_TURN_RIGHT I_JUMP I_TURN_RIGHT I_TURN_RIGHT I_JUMP\n";
        let d = read(text, Format::Scan).unwrap();
        assert_eq!(d.examples()[0].input, ["jump", "opposite", "right", "twice"]);
        assert_eq!(d.examples()[0].output.len(), 6);
    }

    #[test]
    fn whitespace_tokens_are_rejected() {
        let ex = Example::new("a", vec!["wa lk".into()], vec!["W".into()]);
        assert!(Dataset::new(vec![ex]).is_err());
    }
}
