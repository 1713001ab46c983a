//! Line-delimited JSON files.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use assertgen_core::model::TestAssertEntry;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: duplicate id `{id}`")]
    DuplicateId { path: String, id: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

/// Reads every non-blank line of `path` as one `T`.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| StoreError::Parse {
            path: path.display().to_string(),
            line: n + 1,
            msg: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn to_line<T: Serialize>(item: &T) -> String {
    serde_json::to_string(item).expect("model types serialize")
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<(), StoreError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        writeln!(w, "{}", to_line(item)).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Appends lines to a file, flushing after each one.
pub struct JsonlAppender {
    path: String,
    file: File,
}

impl JsonlAppender {
    pub fn open(path: &Path, truncate: bool) -> Result<Self, StoreError> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(!truncate)
            .truncate(truncate)
            .open(path)
            .map_err(io_err(path))?;
        Ok(JsonlAppender { path: path.display().to_string(), file })
    }

    pub fn append<T: Serialize>(&mut self, item: &T) -> Result<(), StoreError> {
        let mut line = to_line(item);
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|source| StoreError::Io { path: self.path.clone(), source })
    }
}

/// Reads a dataset, rejecting duplicate ids.
pub fn read_dataset(path: &Path) -> Result<Vec<TestAssertEntry>, StoreError> {
    let entries: Vec<TestAssertEntry> = read_jsonl(path)?;
    let mut seen = std::collections::HashSet::new();
    for e in &entries {
        if !seen.insert(e.id.as_str()) {
            return Err(StoreError::DuplicateId { path: path.display().to_string(), id: e.id.clone() });
        }
    }
    Ok(entries)
}

/// Ids already present in a results file; lines that do not parse are ignored.
pub fn completed_ids(path: &Path) -> std::collections::HashSet<String> {
    #[derive(serde::Deserialize)]
    struct IdOnly {
        entry_id: String,
    }
    let Ok(file) = File::open(path) else { return Default::default() };
    BufReader::new(file)
        .lines()
        .map_while(Result::ok)
        .filter_map(|l| serde_json::from_str::<IdOnly>(&l).ok())
        .map(|r| r.entry_id)
        .collect()
}
