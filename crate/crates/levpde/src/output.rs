//! Deterministic artifact emission: CSV tables with full-precision floats
//! and the run manifest tying a config echo to content digests. Every
//! float is written as 17 significant decimal digits, which round-trips
//! doubles exactly, so parse -> re-emit is byte-identical.

use sha2::{Digest, Sha256};
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: row has {got} cells, header has {want}")]
    RaggedRow { line: usize, got: usize, want: usize },
    #[error("manifest is missing its `{0}` section")]
    MissingSection(&'static str),
    #[error("manifest line {line}: expected `key = value`")]
    BadManifestLine { line: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn emit(&self, out: &mut String) {
        match self {
            Cell::Int(v) => out.push_str(&v.to_string()),
            Cell::Float(v) => out.push_str(&format!("{v:.16e}")),
            Cell::Text(s) => {
                debug_assert!(
                    !s.contains(',') && !s.contains('\n'),
                    "text cell must stay delimiter-free: {s:?}"
                );
                out.push_str(s);
            }
        }
    }

    fn read(s: &str) -> Cell {
        if let Ok(v) = s.parse::<i64>() {
            return Cell::Int(v);
        }
        if let Ok(v) = s.parse::<f64>() {
            return Cell::Float(v);
        }
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<I, S>(columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.emit(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Table, OutputError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<Cell> = line.split(',').map(Cell::read).collect();
            if cells.len() != columns.len() {
                return Err(OutputError::RaggedRow {
                    line: i + 2,
                    got: cells.len(),
                    want: columns.len(),
                });
            }
            rows.push(cells);
        }
        Ok(Table { columns, rows })
    }

    /// Writes the CSV and returns the content digest.
    pub fn write(&self, path: &Path) -> Result<String, OutputError> {
        let text = self.to_csv();
        std::fs::write(path, &text)
            .map_err(|source| OutputError::Io { path: path.to_path_buf(), source })?;
        Ok(sha256_hex(text.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Run record: resolved config echo, code version, seed, wall clock, and
/// the emitted files with their digests. The wall clock is informational
/// and excluded from [`Manifest::stable_digest`].
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub wall_clock_unix: u64,
    pub config: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(seed: u64, config: Vec<(String, String)>) -> Self {
        let wall_clock_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            wall_clock_unix,
            config,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, name: impl Into<String>, digest: String) {
        self.outputs.push((name.into(), digest));
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("version = {}\n", self.version));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("wall_clock_unix = {}\n", self.wall_clock_unix));
        out.push_str("[config]\n");
        for (k, v) in &self.config {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str("[outputs]\n");
        for (name, digest) in &self.outputs {
            out.push_str(&format!("{name} = {digest}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Manifest, OutputError> {
        let mut manifest = Manifest {
            version: String::new(),
            seed: 0,
            wall_clock_unix: 0,
            config: Vec::new(),
            outputs: Vec::new(),
        };
        let mut section = "";
        let mut seen_config = false;
        let mut seen_outputs = false;
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            if line == "[config]" {
                section = "config";
                seen_config = true;
                continue;
            }
            if line == "[outputs]" {
                section = "outputs";
                seen_outputs = true;
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(OutputError::BadManifestLine { line: i + 1 })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            match section {
                "config" => manifest.config.push((k, v)),
                "outputs" => manifest.outputs.push((k, v)),
                _ => match k.as_str() {
                    "version" => manifest.version = v,
                    "seed" => {
                        manifest.seed = v
                            .parse()
                            .map_err(|_| OutputError::BadManifestLine { line: i + 1 })?
                    }
                    "wall_clock_unix" => {
                        manifest.wall_clock_unix = v
                            .parse()
                            .map_err(|_| OutputError::BadManifestLine { line: i + 1 })?
                    }
                    _ => return Err(OutputError::BadManifestLine { line: i + 1 }),
                },
            }
        }
        if !seen_config {
            return Err(OutputError::MissingSection("config"));
        }
        if !seen_outputs {
            return Err(OutputError::MissingSection("outputs"));
        }
        Ok(manifest)
    }

    /// The config section as parseable config text, for reruns.
    pub fn config_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Digest over everything except the wall clock; identical runs of one
    /// config and version produce the identical value.
    pub fn stable_digest(&self) -> String {
        let mut body = format!("version = {}\nseed = {}\n", self.version, self.seed);
        body.push_str(&self.config_text());
        for (name, digest) in &self.outputs {
            body.push_str(&format!("{name} = {digest}\n"));
        }
        sha256_hex(body.as_bytes())
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        std::fs::write(path, self.to_text())
            .map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_table() -> Table {
        let mut t = Table::new(["step", "value", "label"]);
        t.push(vec![Cell::Int(0), Cell::Float(1.0 / 3.0), Cell::Text("start".into())]);
        t.push(vec![Cell::Int(-7), Cell::Float(-0.0), Cell::Text("f1[smagorinsky]".into())]);
        t.push(vec![Cell::Int(i64::MAX), Cell::Float(1e-300), Cell::Text("end".into())]);
        t
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let t = sample_table();
        let text = t.to_csv();
        let back = Table::parse_csv(&text).unwrap();
        assert_eq!(back.to_csv(), text);
        assert_eq!(back, t);
    }

    #[test]
    fn floats_keep_full_precision() {
        let mut t = Table::new(["x"]);
        let vals = [std::f64::consts::PI, 0.1, f64::MIN_POSITIVE, 1.0 + f64::EPSILON];
        for v in vals {
            t.push(vec![Cell::Float(v)]);
        }
        let back = Table::parse_csv(&t.to_csv()).unwrap();
        for (row, v) in back.rows.iter().zip(vals) {
            match row[0] {
                Cell::Float(got) => assert_eq!(got.to_bits(), v.to_bits()),
                ref other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn ragged_rows_report_the_line() {
        let err = Table::parse_csv("a,b\n1,2\n3\n").unwrap_err();
        match err {
            OutputError::RaggedRow { line, got, want } => {
                assert_eq!((line, got, want), (3, 1, 2));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn manifest_round_trips_and_digest_ignores_the_clock() {
        let mut m = Manifest::new(9, vec![("T".into(), "1.0e0".into())]);
        m.record("trajectory.csv", sha256_hex(b"x"));
        let back = Manifest::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
        let mut later = m.clone();
        later.wall_clock_unix += 60;
        assert_eq!(later.stable_digest(), m.stable_digest());
        assert_eq!(back.config_text(), "T = 1.0e0\n");
    }
}
