//! Output files. Every file starts with a header line recording the tool
//! version, the configuration hash and the seed. CSV values carry 17
//! significant digits so they round-trip binary64 exactly; state files are
//! flat little-endian binary64 after a one-line text header.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{LabError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped into every emitted file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunHeader {
    pub config_hash: String,
    pub seed: u64,
}

impl RunHeader {
    pub fn line(&self) -> String {
        format!("# kinlab {TOOL_VERSION} config={} seed={}", self.config_hash, self.seed)
    }
}

/// Shortest form for integers, otherwise 17 significant digits.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Self::Num(v) => format_value(*v),
            Self::Int(v) => v.to_string(),
            Self::Text(s) => s.replace([',', '\n'], ";"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::Text(if v { "pass".into() } else { "fail".into() })
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

#[derive(Clone, Debug)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, header: &RunHeader) -> String {
        let mut s = header.line();
        s.push('\n');
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path, header: &RunHeader) -> Result<()> {
        ensure_parent(path)?;
        fs::write(path, self.render(header))?;
        Ok(())
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Flat grid values with their shape and per-axis extents.
#[derive(Clone, Debug, PartialEq)]
pub struct StateFile {
    pub shape: Vec<usize>,
    pub extents: Vec<(f64, f64)>,
    pub values: Vec<f64>,
}

impl StateFile {
    pub fn encode(&self, header: &RunHeader) -> Result<Vec<u8>> {
        let count: usize = self.shape.iter().product();
        if count != self.values.len() || self.extents.len() != self.shape.len() {
            return Err(LabError::Params("state shape does not match its values".into()));
        }
        let shape: Vec<String> = self.shape.iter().map(|n| n.to_string()).collect();
        let ext: Vec<String> = self.extents.iter().map(|(a, b)| format!("{}:{}", format_value(*a), format_value(*b))).collect();
        let mut out = format!("{} shape={} extents={} dtype=f64le\n", header.line(), shape.join("x"), ext.join(",")).into_bytes();
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<(String, Self)> {
        let bad = |m: &str| LabError::Params(format!("malformed state file: {m}"));
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("no header"))?;
        let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not text"))?.to_string();
        let field = |key: &str| {
            head.split_whitespace().find_map(|w| w.strip_prefix(key)).ok_or_else(|| bad(key))
        };
        let shape = field("shape=")?
            .split('x')
            .map(|s| s.parse::<usize>().map_err(|_| bad("shape")))
            .collect::<Result<Vec<_>>>()?;
        let extents = field("extents=")?
            .split(',')
            .map(|p| {
                let (a, b) = p.split_once(':').ok_or_else(|| bad("extents"))?;
                Ok((a.parse().map_err(|_| bad("extents"))?, b.parse().map_err(|_| bad("extents"))?))
            })
            .collect::<Result<Vec<_>>>()?;
        let body = &bytes[nl + 1..];
        let count: usize = shape.iter().product();
        if body.len() != 8 * count {
            return Err(bad("payload length"));
        }
        let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok((head, Self { shape, extents, values }))
    }

    pub fn write(&self, path: &Path, header: &RunHeader) -> Result<()> {
        ensure_parent(path)?;
        fs::write(path, self.encode(header)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> RunHeader {
        RunHeader { config_hash: "00ff00ff00ff00ff".into(), seed: 9 }
    }

    #[test]
    fn csv_values_round_trip() {
        let mut t = CsvTable::new(&["x", "n", "label"]);
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23];
        for (i, v) in vals.iter().enumerate() {
            t.push(vec![(*v).into(), i.into(), "a,b".into()]);
        }
        let text = t.render(&header());
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), header().line());
        assert_eq!(lines.next().unwrap(), "x,n,label");
        for (line, v) in lines.zip(vals) {
            let parts: Vec<&str> = line.split(',').collect();
            assert_eq!(parts[0].parse::<f64>().unwrap(), v);
            assert_eq!(parts[2], "a;b");
        }
    }

    #[test]
    fn state_file_round_trip() {
        let s = StateFile { shape: vec![2, 3], extents: vec![(-1.0, 1.0), (0.0, 0.5)], values: (0..6).map(|k| k as f64 * 0.1).collect() };
        let bytes = s.encode(&header()).unwrap();
        assert!(bytes.starts_with(header().line().as_bytes()));
        let (head, back) = StateFile::decode(&bytes).unwrap();
        assert!(head.contains("shape=2x3"));
        assert_eq!(back, s);
        let bad = StateFile { shape: vec![4], ..s };
        assert!(bad.encode(&header()).is_err());
    }
}
