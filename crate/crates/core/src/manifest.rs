//! Run manifests and content hashes.
//!
//! A manifest is human-readable structured text: `key: value` lines, nested
//! by two-space indentation. A line `key:` with nothing after the colon opens
//! a section whose entries follow on deeper-indented lines.
//!
//! ```text
//! fkl-manifest v1
//! command: ground-state
//! code_version: fkl-core/0.1.0
//! input_hash: <64 lowercase hex digits, sha-256>
//! wall_clock_seconds: 1.25
//! params:
//!   s: 0.5
//!   ...
//! grid:
//!   ...
//! solver:
//!   ...
//! outputs:
//!   q_field: q.field
//! results:
//!   residual_l2: 3.1e-13
//!   decay:
//!     c1: ...
//! ```
//!
//! Schema:
//!
//! * The first line is exactly `fkl-manifest v1`.
//! * Then the scalar keys `command`, `code_version`, `input_hash`,
//!   `wall_clock_seconds`, in this order.
//! * Then the sections `params`, `grid`, `solver`, `outputs`, `results`, in
//!   this order. `outputs` holds only leaves, each a relative file name.
//!   Other sections may nest.
//! * Keys are non-empty and use `[A-Za-z0-9_.-]`.
//! * Values run to the end of the line. A value that is empty, has
//!   surrounding whitespace, starts with `"` or contains control characters
//!   is written double-quoted with `\\`, `\"`, `\n`, `\r`, `\t` escapes.
//! * Floating-point values are written in the shortest form that parses
//!   back to the same `f64`, so text → manifest → text is lossless.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{FklError, Result};

const MAGIC: &str = "fkl-manifest v1";
const INDENT: usize = 2;

/// A node of the manifest tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Value(String),
    Section(Section),
}

/// An ordered list of `(key, node)` entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    entries: Vec<(String, Node)>,
}

/// Shortest round-trip text of a float.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

impl Section {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(String, Node)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn put(&mut self, key: &str, node: Node) {
        assert!(valid_key(key), "invalid manifest key {key:?}");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = node,
            None => self.entries.push((key.to_string(), node)),
        }
    }

    /// Sets a leaf, replacing an existing entry of the same key in place.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.put(key, Node::Value(value.to_string()));
        self
    }

    pub fn set_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.set(key, format_f64(value))
    }

    pub fn set_f64_list(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let text: Vec<String> = values.iter().map(|v| format_f64(*v)).collect();
        self.set(key, text.join(","))
    }

    pub fn set_section(&mut self, key: &str, section: Section) -> &mut Self {
        self.put(key, Node::Section(section));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).and_then(|(_, n)| match n {
            Node::Value(v) => Some(v.as_str()),
            Node::Section(_) => None,
        })
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn section(&self, key: &str) -> Option<&Section> {
        self.entries.iter().find(|(k, _)| k == key).and_then(|(_, n)| match n {
            Node::Section(s) => Some(s),
            Node::Value(_) => None,
        })
    }

    fn write(&self, out: &mut String, depth: usize) {
        for (key, node) in &self.entries {
            let pad = " ".repeat(depth * INDENT);
            match node {
                Node::Value(v) => {
                    let _ = writeln!(out, "{pad}{key}: {}", encode_value(v));
                }
                Node::Section(s) => {
                    let _ = writeln!(out, "{pad}{key}:");
                    s.write(out, depth + 1);
                }
            }
        }
    }
}

fn valid_key(key: &str) -> bool {
    !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

fn encode_value(v: &str) -> String {
    let needs_quotes = v.is_empty()
        || v.starts_with('"')
        || v.trim() != v
        || v.chars().any(|c| c.is_control());
    if !needs_quotes {
        return v.to_string();
    }
    let mut out = String::with_capacity(v.len() + 2);
    out.push('"');
    for c in v.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn decode_value(raw: &str, line: usize) -> Result<String> {
    if !raw.starts_with('"') {
        return Ok(raw.to_string());
    }
    let bad = || FklError::InvalidInput(format!("manifest line {line}: malformed quoted value"));
    let body = raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')).ok_or_else(bad)?;
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next().ok_or_else(bad)? {
                '\\' => out.push('\\'),
                '"' => out.push('"'),
                'n' => out.push('\n'),
                'r' => out.push('\r'),
                't' => out.push('\t'),
                _ => return Err(bad()),
            },
            '"' => return Err(bad()),
            c => out.push(c),
        }
    }
    Ok(out)
}

struct Line<'a> {
    number: usize,
    depth: usize,
    key: &'a str,
    value: Option<&'a str>,
}

fn parse_lines(text: &str) -> Result<Vec<Line<'_>>> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate().skip(1) {
        let number = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let indent = raw.len() - raw.trim_start_matches(' ').len();
        if indent % INDENT != 0 {
            return Err(FklError::InvalidInput(format!(
                "manifest line {number}: indentation must be a multiple of {INDENT}"
            )));
        }
        let rest = &raw[indent..];
        let colon = rest
            .find(':')
            .ok_or_else(|| FklError::InvalidInput(format!("manifest line {number}: missing ':'")))?;
        let key = &rest[..colon];
        if !valid_key(key) {
            return Err(FklError::InvalidInput(format!("manifest line {number}: invalid key {key:?}")));
        }
        let after = &rest[colon + 1..];
        let value = if after.is_empty() {
            None
        } else {
            Some(after.strip_prefix(' ').ok_or_else(|| {
                FklError::InvalidInput(format!("manifest line {number}: expected ': ' after key"))
            })?)
        };
        lines.push(Line {
            number,
            depth: indent / INDENT,
            key,
            value,
        });
    }
    Ok(lines)
}

fn build(lines: &[Line<'_>], pos: &mut usize, depth: usize) -> Result<Section> {
    let mut section = Section::new();
    while *pos < lines.len() {
        let line = &lines[*pos];
        if line.depth < depth {
            break;
        }
        if line.depth > depth {
            return Err(FklError::InvalidInput(format!(
                "manifest line {}: unexpected indentation",
                line.number
            )));
        }
        *pos += 1;
        if section.entries.iter().any(|(k, _)| k == line.key) {
            return Err(FklError::InvalidInput(format!(
                "manifest line {}: duplicate key {:?}",
                line.number, line.key
            )));
        }
        let node = match line.value {
            Some(v) => Node::Value(decode_value(v, line.number)?),
            None => Node::Section(build(lines, pos, depth + 1)?),
        };
        section.entries.push((line.key.to_string(), node));
    }
    Ok(section)
}

/// Everything needed to reproduce and audit one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    /// sha-256 of the inputs, see [`content_hash`].
    pub input_hash: String,
    pub wall_clock_seconds: f64,
    pub params: Section,
    pub grid: Section,
    pub solver: Section,
    /// Output files, relative to the manifest's directory.
    pub outputs: Section,
    pub results: Section,
}

const SCALARS: [&str; 4] = ["command", "code_version", "input_hash", "wall_clock_seconds"];
const SECTIONS: [&str; 5] = ["params", "grid", "solver", "outputs", "results"];

impl RunManifest {
    pub fn new(command: &str, input_hash: &str) -> Self {
        Self {
            command: command.to_string(),
            code_version: crate::CODE_VERSION.to_string(),
            input_hash: input_hash.to_string(),
            wall_clock_seconds: 0.0,
            params: Section::new(),
            grid: Section::new(),
            solver: Section::new(),
            outputs: Section::new(),
            results: Section::new(),
        }
    }

    /// Output file names in declaration order.
    pub fn output_files(&self) -> Vec<&str> {
        self.outputs
            .entries()
            .iter()
            .filter_map(|(_, n)| match n {
                Node::Value(v) => Some(v.as_str()),
                Node::Section(_) => None,
            })
            .collect()
    }

    fn as_tree(&self) -> Section {
        let mut root = Section::new();
        root.set("command", &self.command)
            .set("code_version", &self.code_version)
            .set("input_hash", &self.input_hash)
            .set_f64("wall_clock_seconds", self.wall_clock_seconds)
            .set_section("params", self.params.clone())
            .set_section("grid", self.grid.clone())
            .set_section("solver", self.solver.clone())
            .set_section("outputs", self.outputs.clone())
            .set_section("results", self.results.clone());
        root
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        self.as_tree().write(&mut out, 0);
        out
    }

    /// Parses and validates against the schema.
    pub fn from_text(text: &str) -> Result<Self> {
        if text.lines().next() != Some(MAGIC) {
            return Err(FklError::InvalidInput(format!("manifest must start with {MAGIC:?}")));
        }
        let lines = parse_lines(text)?;
        let mut pos = 0;
        let root = build(&lines, &mut pos, 0)?;
        let keys: Vec<&str> = root.entries.iter().map(|(k, _)| k.as_str()).collect();
        let expected: Vec<&str> = SCALARS.iter().chain(SECTIONS.iter()).copied().collect();
        if keys != expected {
            return Err(FklError::InvalidInput(format!(
                "manifest top-level keys {keys:?} differ from the schema {expected:?}"
            )));
        }
        let scalar = |k: &str| {
            root.get(k)
                .map(str::to_string)
                .ok_or_else(|| FklError::InvalidInput(format!("manifest key {k} must be a value")))
        };
        let section = |k: &str| {
            root.section(k)
                .cloned()
                .ok_or_else(|| FklError::InvalidInput(format!("manifest key {k} must be a section")))
        };
        let wall = scalar("wall_clock_seconds")?;
        let manifest = Self {
            command: scalar("command")?,
            code_version: scalar("code_version")?,
            input_hash: scalar("input_hash")?,
            wall_clock_seconds: wall
                .parse()
                .map_err(|_| FklError::InvalidInput(format!("wall_clock_seconds {wall:?} is not a number")))?,
            params: section("params")?,
            grid: section("grid")?,
            solver: section("solver")?,
            outputs: section("outputs")?,
            results: section("results")?,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    /// Schema checks that go beyond the layout.
    pub fn validate(&self) -> Result<()> {
        if self.input_hash.len() != 64 || !self.input_hash.chars().all(|c| matches!(c, '0'..='9' | 'a'..='f')) {
            return Err(FklError::InvalidInput("input_hash must be 64 lowercase hex digits".into()));
        }
        if !(self.wall_clock_seconds >= 0.0) {
            return Err(FklError::InvalidInput("wall_clock_seconds must be non-negative".into()));
        }
        for (key, node) in self.outputs.entries() {
            match node {
                Node::Value(v) if !v.is_empty() && !v.contains('/') && !v.contains('\\') && v != ".." => {}
                _ => {
                    return Err(FklError::InvalidInput(format!(
                        "output {key} must be a plain file name"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Lowercase hex sha-256 of `parts`, each length-prefixed so that the split
/// points are part of the hashed content.
pub fn content_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p.as_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        let mut m = RunManifest::new("ground-state", &content_hash(&["x"]));
        m.wall_clock_seconds = 0.1 + 0.2;
        m.params.set_f64("s", 0.5).set("note", "  padded \"quoted\"\n");
        m.grid.set("n", 8192).set_f64("L", 200.0);
        m.outputs.set("q_field", "q.field");
        let mut decay = Section::new();
        decay.set_f64("c1", 1.0 / 3.0).set("passed", true);
        m.results.set_section("decay", decay).set("empty", "");
        m
    }

    #[test]
    fn round_trip_is_lossless() {
        let m = sample();
        let text = m.to_text();
        let back = RunManifest::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.results.section("decay").unwrap().get_f64("c1"), Some(1.0 / 3.0));
    }

    #[test]
    fn rejects_schema_violations() {
        let text = sample().to_text();
        assert!(RunManifest::from_text(&text.replacen("fkl-manifest v1", "manifest", 1)).is_err());
        assert!(RunManifest::from_text(&text.replace("q.field", "../q.field")).is_err());
        assert!(RunManifest::from_text(&text.replace("grid:", "grd:")).is_err());
        assert!(RunManifest::from_text(&text.replace("  n: 8192", "   n: 8192")).is_err());
    }

    #[test]
    fn hash_separates_parts() {
        assert_ne!(content_hash(&["ab", "c"]), content_hash(&["a", "bc"]));
        assert_eq!(content_hash(&["a"]).len(), 64);
    }
}
