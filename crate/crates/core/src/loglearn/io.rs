//! JSON-lines catalog/session files and the trained-model document.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Session, TrainedModel, TrainingMetadata};
use crate::error::{Error, Result};
use crate::facet::{Catalog, ItemRecord};
use crate::models::{ItemModelState, ModelConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Parses one JSON value per non-blank line; errors carry 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_jsonl(BufReader::new(file), &path.display().to_string())
}

pub fn parse_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, name: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: name.to_string(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: name.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_catalog(path: &Path) -> Result<Catalog> {
    Catalog::from_records(read_jsonl::<ItemRecord>(path)?)
}

pub fn write_catalog(path: &Path, catalog: &Catalog) -> Result<()> {
    write_jsonl(path, &catalog.records())
}

pub fn read_sessions(path: &Path) -> Result<Vec<Session>> {
    read_jsonl(path)
}

pub fn write_sessions(path: &Path, sessions: &[Session]) -> Result<()> {
    write_jsonl(path, sessions)
}

/// Per-query relevance scores: `{"query": .., "scores": {item_id: score}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceRecord {
    pub query: String,
    pub scores: BTreeMap<String, f64>,
}

pub fn read_relevance(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    Ok(read_jsonl::<RelevanceRecord>(path)?
        .into_iter()
        .map(|r| (r.query, r.scores))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    config: ModelConfig,
    brands: Vec<String>,
    metadata: TrainingMetadata,
    queries: BTreeMap<String, Vec<ItemModelState>>,
}

impl From<&TrainedModel> for ModelDocument {
    fn from(m: &TrainedModel) -> Self {
        let mut queries: BTreeMap<String, Vec<ItemModelState>> = BTreeMap::new();
        for ((q, _), state) in &m.states {
            queries.entry(q.clone()).or_default().push(state.clone());
        }
        Self {
            version: MODEL_FORMAT_VERSION,
            config: m.config.clone(),
            brands: m.brands.clone(),
            metadata: m.metadata.clone(),
            queries,
        }
    }
}

impl TryFrom<ModelDocument> for TrainedModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model format version {}",
                doc.version
            )));
        }
        doc.config.validate()?;
        let mut states = BTreeMap::new();
        for (q, list) in doc.queries {
            for s in list {
                if s.dirichlet.k() != doc.brands.len() {
                    return Err(Error::InvalidParameter(format!(
                        "state for {:?} has {} brand components, vocabulary has {}",
                        s.item_id,
                        s.dirichlet.k(),
                        doc.brands.len()
                    )));
                }
                if states.insert((q.clone(), s.item_id.clone()), s).is_some() {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate state under query {q:?}"
                    )));
                }
            }
        }
        Ok(TrainedModel {
            config: doc.config,
            brands: doc.brands,
            states,
            metadata: doc.metadata,
        })
    }
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<model>".into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        doc.try_into()
    }
}

pub fn write_model(path: &Path, model: &TrainedModel) -> Result<()> {
    write_json(path, &ModelDocument::from(model))
}

pub fn read_model(path: &Path) -> Result<TrainedModel> {
    read_json::<ModelDocument>(path)?.try_into()
}
