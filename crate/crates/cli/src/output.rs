//! CSV and report files. Everything is written to a temporary file in the
//! target directory and renamed into place once complete.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp =
        builder.tempfile_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// A table with named columns, written as CSV with one header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Keeps only `channels`, in the order given.
    pub fn select(&self, channels: &[String]) -> Result<Self> {
        let idx = channels
            .iter()
            .map(|c| {
                self.columns.iter().position(|h| h == c).with_context(|| {
                    format!("output.channels: unknown channel `{c}` (available: {})", self.columns.join(","))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            columns: channels.to_vec(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, |out| {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|x| fmt_f64(*x)))?;
            }
            w.flush()?;
            Ok(())
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .with_context(|| format!("{}: row {}: `{s}` is not a number", path.display(), i + 2))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Reads the named columns of a CSV file, in the order requested.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let table = Table::read(path)?;
    names.iter().map(|n| table.column(n).with_context(|| format!("{}: missing column `{n}`", path.display()))).collect()
}

/// Ordered `key = value` lines, the same syntax as config files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.set(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.render();
        write_atomic(path, |out| Ok(out.write_all(text.as_bytes())?))
    }
}

/// Files produced by a run, collected before anything touches the disk.
#[derive(Debug, Default)]
pub struct Outputs {
    pub tables: Vec<(String, Table)>,
    pub report: Report,
}

impl Outputs {
    pub fn write(&self, dir: &Path, channels: Option<&[String]>) -> Result<Vec<PathBuf>> {
        let mut selected = Vec::with_capacity(self.tables.len());
        for (name, table) in &self.tables {
            let t = match channels {
                Some(c) => table.select(c)?,
                None => table.clone(),
            };
            selected.push((name, t));
        }
        let mut written = Vec::new();
        for (name, table) in selected {
            let path = dir.join(name);
            table.write(&path)?;
            written.push(path);
        }
        let path = dir.join("report.txt");
        self.report.write(&path)?;
        written.push(path);
        Ok(written)
    }

    pub fn check_channels(&self, channels: &[String]) -> Result<()> {
        if channels.is_empty() {
            bail!("output.channels: list at least one channel");
        }
        for (_, t) in &self.tables {
            t.select(channels)?;
        }
        Ok(())
    }
}
