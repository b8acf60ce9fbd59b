//! Dataset files: CSV (RFC 4180) and JSON arrays, both with the fixed column order
//! of [`COLUMNS`], plus ingestion of external corpora through a column mapping.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use synthline_core::sample::{timestamp, COLUMNS};
use synthline_core::{Dataset, DatasetError, SyntheticSample};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for Format {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(StoreError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("unknown dataset format `{0}` (expected csv or json)")]
    UnknownFormat(String),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Invalid(#[from] DatasetError),
    #[error("invalid column mapping: {0}")]
    Mapping(String),
}

fn csv_error(e: csv::Error) -> StoreError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => StoreError::Io(io),
        kind => StoreError::Malformed { line, message: format!("{kind:?}") },
    }
}

/// Destination for samples as a generation run produces them.
pub trait SampleSink: Send {
    fn write(&mut self, sample: &SyntheticSample) -> io::Result<()>;
    fn finish(&mut self) -> io::Result<()>;
}

#[derive(Debug, Default)]
pub struct VecSink(pub Vec<SyntheticSample>);

impl SampleSink for VecSink {
    fn write(&mut self, sample: &SyntheticSample) -> io::Result<()> {
        self.0.push(sample.clone());
        Ok(())
    }

    fn finish(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn fmt_real(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn record(s: &SyntheticSample) -> [String; 15] {
    [
        s.id.clone(),
        s.text.clone(),
        s.label.clone(),
        s.label_description.clone(),
        s.requirement_type.clone(),
        s.specification_level.clone(),
        s.requirement_source.clone(),
        s.specification_format.clone(),
        s.language.clone(),
        s.domain.clone(),
        s.llm.clone(),
        fmt_real(s.temperature),
        fmt_real(s.top_p),
        s.run_id.clone(),
        s.created_at.as_ref().map(timestamp::format).unwrap_or_default(),
    ]
}

pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    /// Writes the header immediately so an empty run still yields a valid file.
    pub fn new(inner: W) -> io::Result<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(inner);
        writer.write_record(COLUMNS).map_err(io::Error::other)?;
        Ok(CsvSink { writer })
    }

    pub fn into_inner(self) -> io::Result<W> {
        self.writer.into_inner().map_err(|e| e.into_error())
    }
}

impl<W: Write + Send> SampleSink for CsvSink<W> {
    fn write(&mut self, sample: &SyntheticSample) -> io::Result<()> {
        self.writer.write_record(record(sample)).map_err(io::Error::other)?;
        self.writer.flush()
    }

    fn finish(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

/// Streams a JSON array, one object per line.
pub struct JsonSink<W: Write> {
    inner: W,
    first: bool,
    closed: bool,
}

impl<W: Write> JsonSink<W> {
    pub fn new(mut inner: W) -> io::Result<Self> {
        inner.write_all(b"[")?;
        Ok(JsonSink { inner, first: true, closed: false })
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

impl<W: Write + Send> SampleSink for JsonSink<W> {
    fn write(&mut self, sample: &SyntheticSample) -> io::Result<()> {
        self.inner.write_all(if self.first { b"\n" } else { b",\n" })?;
        self.first = false;
        serde_json::to_writer(&mut self.inner, sample)?;
        self.inner.flush()
    }

    fn finish(&mut self) -> io::Result<()> {
        if !self.closed {
            self.closed = true;
            self.inner.write_all(b"\n]\n")?;
        }
        self.inner.flush()
    }
}

/// A sink writing `format` to a freshly created file.
pub fn file_sink(path: &Path, format: Format) -> io::Result<Box<dyn SampleSink>> {
    let file = BufWriter::new(File::create(path)?);
    Ok(match format {
        Format::Csv => Box::new(CsvSink::new(file)?),
        Format::Json => Box::new(JsonSink::new(file)?),
    })
}

pub fn write_to<W: Write + Send>(dataset: &Dataset, format: Format, out: W) -> io::Result<W> {
    match format {
        Format::Csv => {
            let mut sink = CsvSink::new(out)?;
            for s in dataset.samples() {
                sink.write(s)?;
            }
            sink.finish()?;
            sink.into_inner()
        }
        Format::Json => {
            let mut sink = JsonSink::new(out)?;
            for s in dataset.samples() {
                sink.write(s)?;
            }
            sink.finish()?;
            Ok(sink.into_inner())
        }
    }
}

pub fn to_bytes(dataset: &Dataset, format: Format) -> Vec<u8> {
    write_to(dataset, format, Vec::new()).expect("writing to memory cannot fail")
}

pub fn write_dataset(dataset: &Dataset, format: Format, path: &Path) -> Result<(), StoreError> {
    let file = BufWriter::new(File::create(path)?);
    write_to(dataset, format, file)?.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path, format: Format) -> Result<Dataset, StoreError> {
    read_from(BufReader::new(File::open(path)?), format)
}

pub fn read_from<R: Read>(input: R, format: Format) -> Result<Dataset, StoreError> {
    match format {
        Format::Csv => read_csv(input, &ColumnMapping::default()),
        Format::Json => {
            let samples: Vec<SyntheticSample> = serde_json::from_reader(input).map_err(|e| StoreError::Malformed {
                line: e.line() as u64,
                message: e.to_string(),
            })?;
            Ok(Dataset::new(samples)?)
        }
    }
}

/// How the columns of an external CSV corpus map onto sample fields.
///
/// ```json
/// {"id": "ID", "text": "Requirement", "label": "Defect",
///  "labels": {"ambiguity": "Ambiguous"}, "delimiter": ";"}
/// ```
///
/// Unmapped provenance fields keep their standard column names. Rows without an
/// id get `row-<line>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default = "default_text")]
    pub text: String,
    #[serde(default = "default_label")]
    pub label: String,
    /// Rewrites raw label values; unlisted values pass through.
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(default)]
    pub delimiter: Option<char>,
}

fn default_id() -> String {
    "id".into()
}
fn default_text() -> String {
    "text".into()
}
fn default_label() -> String {
    "label".into()
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            id: default_id(),
            text: default_text(),
            label: default_label(),
            labels: BTreeMap::new(),
            delimiter: None,
        }
    }
}

impl ColumnMapping {
    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let m: ColumnMapping = serde_json::from_str(text).map_err(|e| StoreError::Mapping(e.to_string()))?;
        if m.delimiter.is_some_and(|d| !d.is_ascii()) {
            return Err(StoreError::Mapping("delimiter must be a single ASCII character".into()));
        }
        Ok(m)
    }
}

pub fn read_external(path: &Path, mapping: &ColumnMapping) -> Result<Dataset, StoreError> {
    read_csv(BufReader::new(File::open(path)?), mapping)
}

fn read_csv<R: Read>(input: R, mapping: &ColumnMapping) -> Result<Dataset, StoreError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter.map(|d| d as u8).unwrap_or(b','))
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim_start_matches('\u{feff}') == name);
    let text_col = col(&mapping.text).ok_or_else(|| StoreError::MissingColumn(mapping.text.clone()))?;
    let label_col = col(&mapping.label).ok_or_else(|| StoreError::MissingColumn(mapping.label.clone()))?;
    let id_col = col(&mapping.id);
    let other: Vec<Option<usize>> = COLUMNS[3..].iter().map(|c| col(c)).collect();

    let mut samples = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: Option<usize>| i.and_then(|i| row.get(i)).unwrap_or("").to_string();
        let id = get(id_col);
        let raw_label = get(Some(label_col));
        let mut s = SyntheticSample::bare(
            if id.is_empty() { format!("row-{line}") } else { id },
            get(Some(text_col)),
            mapping.labels.get(&raw_label).cloned().unwrap_or(raw_label),
        );
        let [ld, rt, sl, rs, sf, lang, dom, llm, temp, top_p, run, created] = &other[..] else {
            unreachable!("COLUMNS has 15 entries")
        };
        s.label_description = get(*ld);
        s.requirement_type = get(*rt);
        s.specification_level = get(*sl);
        s.requirement_source = get(*rs);
        s.specification_format = get(*sf);
        s.language = get(*lang);
        s.domain = get(*dom);
        s.llm = get(*llm);
        s.temperature = parse_real(&get(*temp), "temperature", line)?;
        s.top_p = parse_real(&get(*top_p), "top_p", line)?;
        s.run_id = get(*run);
        let created = get(*created);
        if !created.is_empty() {
            s.created_at = Some(timestamp::parse(&created).map_err(|e| StoreError::Malformed {
                line,
                message: format!("created_at: {e}"),
            })?);
        }
        samples.push(s);
    }
    Ok(Dataset::new(samples)?)
}

fn parse_real(v: &str, column: &str, line: u64) -> Result<Option<f64>, StoreError> {
    if v.is_empty() {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| StoreError::Malformed {
        line,
        message: format!("{column}: `{v}` is not a number"),
    })
}
