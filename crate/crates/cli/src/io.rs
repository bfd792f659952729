//! Config loading, CSV tables and binary field snapshots.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use polaron_core::{Error as CoreError, ExperimentConfig, Grid};
use serde::de::DeserializeOwned;
use serde::Deserialize;

/// Reads and validates a TOML experiment config. Errors carry the line of
/// the offending key where one can be found.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    config.validate().map_err(|e| {
        let msg = match &e {
            CoreError::InvalidGrid(m) | CoreError::InvalidArgument(m) => m.as_str(),
            _ => "",
        };
        let key = msg.split_whitespace().next().unwrap_or("").trim_end_matches(':');
        match locate_key(text, key) {
            Some(line) => anyhow!("line {line}: {e}"),
            None => anyhow!("{e}"),
        }
    })?;
    Ok(config)
}

/// Tagged tables report unknown keys at the table header; point at the key.
fn parse_error(text: &str, e: &toml::de::Error) -> anyhow::Error {
    let msg = e.message().trim_end();
    let start = e.span().map_or(0, |s| s.start);
    let mut line = text[..start.min(text.len())].lines().count().max(1);
    if text[..start.min(text.len())].ends_with('\n') {
        line += 1;
    }
    if let Some(name) = msg.strip_prefix("unknown field `").and_then(|m| m.split('`').next()) {
        let offset = text[..start.min(text.len())].lines().count().saturating_sub(1);
        if let Some(i) = text.lines().skip(offset).position(|l| l.split('=').next().is_some_and(|k| k.trim() == name)) {
            line = offset + i + 1;
        }
    }
    anyhow!("line {line}: {msg}")
}

/// 1-based line of a dotted key such as `grid.length` or `eps`.
pub fn locate_key(text: &str, dotted: &str) -> Option<usize> {
    if dotted.is_empty() {
        return None;
    }
    let (table, key) = match dotted.rsplit_once('.') {
        Some((t, k)) => (Some(t), k),
        None => (None, dotted),
    };
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(header.trim().to_string());
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        let hit = match (table, current.as_deref()) {
            (None, None) => lhs == key,
            (Some(t), Some(c)) => c == t && lhs == key,
            (Some(t), None) => lhs == dotted || (lhs == t && line.contains(key)),
            (None, Some(_)) => false,
        };
        if hit {
            return Some(i + 1);
        }
    }
    // a table key given as `[table]` with no matching entry
    table.and_then(|t| text.lines().position(|l| l.trim() == format!("[{t}]")).map(|i| i + 1))
}

/// Float formatting shared by all tables: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const RUN_HEADER: [&str; 6] = ["t", "mass", "Xs_norm_u", "Y_norm_v", "Y_norm_w", "energy"];
pub const COMPARE_HEADER: [&str; 6] = ["t", "Ru_Xs", "Rv_Y", "Rw_Y", "S_eps", "composite"];
pub const SWEEP_HEADER: [&str; 6] = ["eps", "sup_composite_error", "sup_S", "completed", "dt", "seconds"];

pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct RunRow {
    pub t: f64,
    pub mass: f64,
    #[serde(rename = "Xs_norm_u")]
    pub xs_norm_u: f64,
    #[serde(rename = "Y_norm_v")]
    pub y_norm_v: f64,
    #[serde(rename = "Y_norm_w")]
    pub y_norm_w: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct CompareRow {
    pub t: f64,
    #[serde(rename = "Ru_Xs")]
    pub ru: f64,
    #[serde(rename = "Rv_Y")]
    pub rv: f64,
    #[serde(rename = "Rw_Y")]
    pub rw: f64,
    #[serde(rename = "S_eps")]
    pub s_eps: f64,
    pub composite: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub sup_composite_error: f64,
    #[serde(rename = "sup_S")]
    pub sup_s: f64,
    pub completed: bool,
    pub dt: f64,
    pub seconds: f64,
}

/// Loads a table, insisting on the exact header.
pub fn read_table<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        bail!("{}: header {:?} does not match {:?}", path.display(), found, header);
    }
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

pub fn eps_tag(eps: f64) -> String {
    format!("eps{eps}")
}

pub fn output_path(dir: &Path, stem: &str, eps: Option<f64>, ext: &str) -> PathBuf {
    match eps {
        Some(e) => dir.join(format!("{stem}_{}.{ext}", eps_tag(e))),
        None => dir.join(format!("{stem}.{ext}")),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl FieldData {
    fn kind(&self) -> &'static str {
        match self {
            FieldData::Real(_) => "real",
            FieldData::Complex(_) => "complex",
        }
    }
}

/// Fields on one grid at one time. On disk: a single text header line
/// followed by little-endian f64 values, row-major, complex values as
/// interleaved `re, im`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub length: f64,
    pub t: f64,
    pub eps: Option<f64>,
    pub fields: Vec<(String, FieldData)>,
}

const SNAPSHOT_MAGIC: &str = "polaron-snapshot";

impl Snapshot {
    pub fn header(&self) -> String {
        let mut h = format!("{SNAPSHOT_MAGIC} n={} L={} t={}", self.n, fmt_f64(self.length), fmt_f64(self.t));
        match self.eps {
            Some(e) => write!(h, " eps={}", fmt_f64(e)).unwrap(),
            None => h.push_str(" eps=none"),
        }
        let list: Vec<String> = self.fields.iter().map(|(name, f)| format!("{name}:{}", f.kind())).collect();
        write!(h, " fields={}", list.join(",")).unwrap();
        h
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "{}", self.header())?;
        for (_, field) in &self.fields {
            match field {
                FieldData::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                FieldData::Complex(v) => v.iter().for_each(|z| {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }),
            }
        }
        fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let mut reader = BufReader::new(file);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let mut parts = line.trim_end().split(' ');
        if parts.next() != Some(SNAPSHOT_MAGIC) {
            bail!("{}: not a snapshot file", path.display());
        }
        let mut get = |key: &str| -> Result<String> {
            let part = parts.next().ok_or_else(|| anyhow!("snapshot header is missing {key}"))?;
            part.strip_prefix(&format!("{key}="))
                .map(str::to_string)
                .ok_or_else(|| anyhow!("expected {key}= in snapshot header, found {part}"))
        };
        let n: usize = get("n")?.parse()?;
        let length: f64 = get("L")?.parse()?;
        let t: f64 = get("t")?.parse()?;
        let eps = match get("eps")?.as_str() {
            "none" => None,
            e => Some(e.parse()?),
        };
        let specs = get("fields")?;
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let len = n * n * n;
        let mut fields = Vec::new();
        for spec in specs.split(',').filter(|s| !s.is_empty()) {
            let (name, kind) = spec.split_once(':').ok_or_else(|| anyhow!("bad field spec {spec}"))?;
            let data = match kind {
                "real" => FieldData::Real(values.by_ref().take(len).collect()),
                "complex" => {
                    let flat: Vec<f64> = values.by_ref().take(2 * len).collect();
                    FieldData::Complex(flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
                }
                other => bail!("unknown field kind {other}"),
            };
            let got = match &data {
                FieldData::Real(v) => v.len(),
                FieldData::Complex(v) => v.len(),
            };
            if got != len {
                bail!("{}: field {name} is truncated", path.display());
            }
            fields.push((name.to_string(), data));
        }
        if bytes.len() % 8 != 0 || values.next().is_some() {
            bail!("{}: trailing data after the declared fields", path.display());
        }
        Ok(Snapshot { n, length, t, eps, fields })
    }

    pub fn grid(&self) -> Result<std::sync::Arc<Grid>> {
        Ok(Grid::new(self.n, self.length)?)
    }
}
