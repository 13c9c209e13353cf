//! Text map files (`REMAP v1`) and pair descriptors (JSON).
//!
//! ```text
//! REMAP v1
//! H W unit
//! v00 v01 ... v0(W-1)
//! ...
//! ```
//!
//! A pair descriptor points at two map files relative to its own directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::grid::{EnvironmentPair, GridMap, PairMeta, UnitTag};

pub const REMAP_MAGIC: &str = "REMAP v1";

/// Renders a map in `REMAP v1` text form. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn map_to_string(map: &GridMap) -> String {
    let mut out = String::with_capacity(map.len() * 12 + 32);
    out.push_str(REMAP_MAGIC);
    out.push('\n');
    let _ = writeln!(out, "{} {} {}", map.height(), map.width(), map.unit().as_str());
    for r in 0..map.height() {
        for c in 0..map.width() {
            if c > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:?}", map.get(r, c));
        }
        out.push('\n');
    }
    out
}

pub fn parse_map(text: &str) -> Result<GridMap, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim_end() == REMAP_MAGIC => {}
        Some((_, l)) => return Err(FormatError::Header(format!("expected `{REMAP_MAGIC}`, found `{l}`"))),
        None => return Err(FormatError::Header("empty file".into())),
    }
    let dims = lines
        .next()
        .ok_or_else(|| FormatError::Header("missing dimension line".into()))?
        .1;
    let fields: Vec<&str> = dims.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(FormatError::Header(format!("expected `H W unit`, found `{dims}`")));
    }
    let height: usize = fields[0]
        .parse()
        .map_err(|_| FormatError::Header(format!("bad height `{}`", fields[0])))?;
    let width: usize = fields[1]
        .parse()
        .map_err(|_| FormatError::Header(format!("bad width `{}`", fields[1])))?;
    let unit = UnitTag::parse(fields[2]).ok_or_else(|| FormatError::Header(format!("bad unit `{}`", fields[2])))?;

    let mut values = Vec::with_capacity(height * width);
    let mut rows = 0;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        let before = values.len();
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| FormatError::Body {
                line: lineno + 1,
                message: format!("bad number `{token}`"),
            })?;
            if !v.is_finite() {
                return Err(FormatError::Body {
                    line: lineno + 1,
                    message: format!("non-finite value `{token}`"),
                });
            }
            values.push(v);
        }
        if values.len() - before != width {
            return Err(FormatError::Body {
                line: lineno + 1,
                message: format!("expected {width} values, found {}", values.len() - before),
            });
        }
    }
    if rows != height {
        return Err(FormatError::Body {
            line: 0,
            message: format!("expected {height} rows ({} values), found {rows} rows ({} values)", height * width, values.len()),
        });
    }
    Ok(GridMap::new(height, width, values, unit)?)
}

pub fn save_map(map: &GridMap, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, map_to_string(map)).map_err(|e| FormatError::io(path, e))
}

pub fn load_map(path: impl AsRef<Path>) -> Result<GridMap, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_map(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub meta: PairMeta,
    pub empty: String,
    pub occupied: String,
}

/// Writes `<stem>.json` plus `<stem>_empty.remap` and `<stem>_occupied.remap` beside it.
pub fn save_pair(pair: &EnvironmentPair, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or_else(|| Path::new(""));
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| FormatError::Header(format!("bad pair path {}", path.display())))?;
    let empty_name = format!("{stem}_empty.remap");
    let occupied_name = format!("{stem}_occupied.remap");
    save_map(&pair.empty, dir.join(&empty_name))?;
    save_map(&pair.occupied, dir.join(&occupied_name))?;
    let file = PairFile {
        meta: pair.meta.clone(),
        empty: empty_name,
        occupied: occupied_name,
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    fs::write(path, json).map_err(|e| FormatError::io(path, e))
}

pub fn load_pair(path: impl AsRef<Path>) -> Result<EnvironmentPair, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let file: PairFile = serde_json::from_str(&text)?;
    let dir: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let empty = load_map(dir.join(&file.empty))?;
    let occupied = load_map(dir.join(&file.occupied))?;
    Ok(EnvironmentPair::new(empty, occupied, file.meta)?)
}
