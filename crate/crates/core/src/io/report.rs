use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::Format;
use super::IoError;
use crate::runner::CellRecord;

pub const SCHEDULE_COLUMNS: [&str; 11] = [
    "p",
    "m",
    "n",
    "y0",
    "e_supY2",
    "e_intZ2",
    "e_AT2",
    "e_KT2",
    "gap_vs_oracle",
    "mono_viol_m",
    "mono_viol_n",
];

pub const SKOROHOD_COLUMNS: [&str; 3] = ["theta", "r_A", "r_K"];

/// A CSV cell; `None` prints empty and maps to JSON `null`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(Option<f64>),
    Count(usize),
    Text(String),
    Flag(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(Some(v)) => format!("{v}"),
            Cell::Num(None) => String::new(),
            Cell::Count(c) => c.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(Some(v)) => serde_json::json!(v),
            Cell::Num(None) => serde_json::Value::Null,
            Cell::Count(c) => serde_json::json!(c),
            Cell::Text(s) => serde_json::json!(s),
            Cell::Flag(b) => serde_json::json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(Some(v))
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Count(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

/// A named table written as `<name>.csv` and mirrored as `<name>.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: serde_json::Map<String, serde_json::Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), v.json()))
                        .collect();
                    serde_json::Value::Object(obj)
                })
                .collect(),
        )
    }
}

pub fn schedule_table(records: &[CellRecord]) -> Table {
    let mut t = Table::new("schedule", &SCHEDULE_COLUMNS);
    for r in records {
        t.push(vec![
            r.p.into(),
            r.m.into(),
            r.n.into(),
            r.y0.into(),
            r.bounds.e_sup_y2.into(),
            r.bounds.e_int_z2.into(),
            r.bounds.e_a_t2.into(),
            r.bounds.e_k_t2.into(),
            r.gap_vs_oracle.into(),
            r.mono_viol_m.into(),
            r.mono_viol_n.into(),
        ]);
    }
    t
}

pub fn skorohod_table(rows: &[(f64, f64, f64)]) -> Table {
    let mut t = Table::new("skorohod", &SKOROHOD_COLUMNS);
    for &(theta, ra, rk) in rows {
        t.push(vec![theta.into(), ra.into(), rk.into()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub files: Vec<FileEntry>,
}

/// Writes report files into one directory and keeps the inventory.
#[derive(Debug)]
pub struct ReportWriter {
    dir: PathBuf,
    formats: Vec<Format>,
    files: Vec<FileEntry>,
}

impl ReportWriter {
    pub fn create(dir: &Path, formats: &[Format]) -> Result<Self, IoError> {
        fs::create_dir_all(dir).map_err(|e| IoError::new(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &[u8]) -> Result<(), IoError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| IoError::new(&path, e))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.into(),
            bytes: body.len(),
            sha256: hex::encode(Sha256::digest(body)),
        });
        Ok(())
    }

    /// Writes the table in every configured format.
    pub fn table(&mut self, table: &Table) -> Result<(), IoError> {
        if self.formats.contains(&Format::Csv) {
            self.write(&format!("{}.csv", table.name), table.to_csv().as_bytes())?;
        }
        if self.formats.contains(&Format::Json) {
            self.json(&table.name, &table.to_json())?;
        }
        Ok(())
    }

    /// Writes `<name>.json` regardless of the configured formats.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), IoError> {
        let mut body = serde_json::to_string_pretty(value).expect("report values serialize");
        body.push('\n');
        self.write(&format!("{name}.json"), body.as_bytes())
    }

    pub fn files(&self) -> Vec<PathBuf> {
        self.files.iter().map(|f| self.dir.join(&f.name)).collect()
    }

    /// Writes `manifest.json` last and returns every written path.
    pub fn finish(
        self,
        command: &str,
        config_hash: &str,
        started_at: chrono::DateTime<chrono::Utc>,
    ) -> Result<Vec<PathBuf>, IoError> {
        let manifest = RunManifest {
            command: command.into(),
            config_hash: config_hash.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_at: started_at.to_rfc3339(),
            finished_at: chrono::Utc::now().to_rfc3339(),
            files: self.files.clone(),
        };
        let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        body.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, body).map_err(|e| IoError::new(&path, e))?;
        let mut out = self.files();
        out.push(path);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_schedule_is_header_only() {
        let t = schedule_table(&[]);
        assert_eq!(
            t.to_csv(),
            "p,m,n,y0,e_supY2,e_intZ2,e_AT2,e_KT2,gap_vs_oracle,mono_viol_m,mono_viol_n\n"
        );
        assert_eq!(t.to_json(), serde_json::json!([]));
    }

    #[test]
    fn missing_p_is_blank_and_null() {
        let mut t = Table::new("x", &["p", "m"]);
        t.push(vec![None.into(), 4.0.into()]);
        assert_eq!(t.to_csv(), "p,m\n,4\n");
        assert_eq!(t.to_json(), serde_json::json!([{"p": null, "m": 4.0}]));
    }

    #[test]
    fn manifest_written_last() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ReportWriter::create(dir.path(), &[Format::Csv]).unwrap();
        w.table(&skorohod_table(&[(0.5, 0.0, 0.0)])).unwrap();
        let files = w.finish("diagnose", "abc", chrono::Utc::now()).unwrap();
        assert_eq!(files.last().unwrap().file_name().unwrap(), "manifest.json");
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(files.last().unwrap()).unwrap()).unwrap();
        assert_eq!(m["files"][0]["name"], "skorohod.csv");
        assert_eq!(
            fs::read_to_string(dir.path().join("skorohod.csv")).unwrap(),
            "theta,r_A,r_K\n0.5,0,0\n"
        );
    }
}
