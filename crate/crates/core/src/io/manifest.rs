//! Line-oriented dataset manifests.
//!
//! ```text
//! # free-form comment
//! format_version=bloodhound-manifest/1
//! meta extent=-1.5 1.5 -1.5 1.5
//! path=img/u0000.pgm label=unjammed seed=42 hardware_tag=sim
//! path=img/j0000.pgm label=jammed rjp=0.4 jammer_kind=gaussian ror=1 jor=1
//! ```
//!
//! Values may not contain whitespace, except `meta` values, which run to the
//! end of the line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: &str = "bloodhound-manifest/1";
const WHAT: &str = "manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Unjammed,
    Jammed,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Unjammed => "unjammed",
            Label::Jammed => "jammed",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unjammed" => Ok(Label::Unjammed),
            "jammed" => Ok(Label::Jammed),
            _ => Err(Error::malformed(WHAT, format!("unknown label {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: Label,
    pub rjp: Option<f64>,
    pub jammer_kind: Option<String>,
    pub ror: Option<usize>,
    pub jor: Option<usize>,
    pub hardware_tag: Option<String>,
    pub seed: Option<u64>,
}

impl ManifestEntry {
    pub fn new(path: impl Into<String>, label: Label) -> Self {
        ManifestEntry {
            path: path.into(),
            label,
            rjp: None,
            jammer_kind: None,
            ror: None,
            jor: None,
            hardware_tag: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub format_version: String,
    /// Dataset-wide properties such as the extent and image geometry.
    pub meta: BTreeMap<String, String>,
    pub entries: Vec<ManifestEntry>,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        DatasetManifest {
            format_version: MANIFEST_VERSION.to_string(),
            meta: BTreeMap::new(),
            entries: Vec::new(),
        }
    }
}

fn check_token(what: &str, v: &str) -> Result<()> {
    if v.is_empty() || v.chars().any(char::is_whitespace) {
        return Err(Error::InvalidConfig(format!(
            "manifest {what} {v:?} must be non-empty and free of whitespace"
        )));
    }
    Ok(())
}

impl DatasetManifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry, rejecting duplicate paths.
    pub fn push(&mut self, entry: ManifestEntry) -> Result<()> {
        if self.entries.iter().any(|e| e.path == entry.path) {
            return Err(Error::InvalidConfig(format!("duplicate manifest path {:?}", entry.path)));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(Error::VersionMismatch {
                expected: MANIFEST_VERSION.into(),
                found: self.format_version.clone(),
            });
        }
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            check_token("path", &e.path)?;
            if !seen.insert(e.path.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate manifest path {:?}", e.path)));
            }
            for v in [&e.jammer_kind, &e.hardware_tag].into_iter().flatten() {
                check_token("value", v)?;
            }
        }
        for (k, v) in &self.meta {
            check_token("meta key", k)?;
            if v.contains('\n') {
                return Err(Error::InvalidConfig(format!("meta value for {k} spans lines")));
            }
        }
        Ok(())
    }

    pub fn with_label(&self, label: Label) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.label == label)
    }

    /// Resolves an entry path against the manifest file's directory.
    pub fn resolve(manifest_path: &Path, entry: &ManifestEntry) -> PathBuf {
        manifest_path
            .parent()
            .unwrap_or_else(|| Path::new(""))
            .join(&entry.path)
    }

    /// Renders the manifest, preceded by `comments` as `#` lines.
    pub fn render(&self, comments: &[String]) -> Result<String> {
        self.validate()?;
        let mut s = String::new();
        for c in comments {
            for line in c.lines() {
                let _ = writeln!(s, "# {line}");
            }
        }
        let _ = writeln!(s, "format_version={}", self.format_version);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "meta {k}={v}");
        }
        for e in &self.entries {
            let _ = write!(s, "path={} label={}", e.path, e.label);
            if let Some(v) = e.rjp {
                let _ = write!(s, " rjp={v}");
            }
            if let Some(v) = &e.jammer_kind {
                let _ = write!(s, " jammer_kind={v}");
            }
            if let Some(v) = e.ror {
                let _ = write!(s, " ror={v}");
            }
            if let Some(v) = e.jor {
                let _ = write!(s, " jor={v}");
            }
            if let Some(v) = &e.hardware_tag {
                let _ = write!(s, " hardware_tag={v}");
            }
            if let Some(v) = e.seed {
                let _ = write!(s, " seed={v}");
            }
            s.push('\n');
        }
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let version = match lines.next() {
            Some((_, l)) => l
                .strip_prefix("format_version=")
                .ok_or_else(|| Error::malformed(WHAT, "first record must be format_version"))?,
            None => return Err(Error::malformed(WHAT, "empty file")),
        };
        if version != MANIFEST_VERSION {
            return Err(Error::VersionMismatch {
                expected: MANIFEST_VERSION.into(),
                found: version.into(),
            });
        }

        let mut m = DatasetManifest::new();
        for (n, line) in lines {
            let bad = |detail: String| Error::malformed(WHAT, format!("line {n}: {detail}"));
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| bad(format!("meta without '=': {rest:?}")))?;
                m.meta.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            let mut fields = BTreeMap::new();
            for pair in line.split_whitespace() {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=value, got {pair:?}")))?;
                if fields.insert(k, v).is_some() {
                    return Err(bad(format!("repeated key {k}")));
                }
            }
            let path = fields.remove("path").ok_or_else(|| bad("missing path".into()))?;
            let label: Label = fields
                .remove("label")
                .ok_or_else(|| bad("missing label".into()))?
                .parse()?;
            let mut e = ManifestEntry::new(path, label);
            fn num<T: FromStr>(v: Option<&str>, key: &str) -> std::result::Result<Option<T>, String> {
                v.map(|s| s.parse().map_err(|_| format!("bad {key} {s:?}"))).transpose()
            }
            e.rjp = num(fields.remove("rjp"), "rjp").map_err(bad)?;
            e.ror = num(fields.remove("ror"), "ror").map_err(bad)?;
            e.jor = num(fields.remove("jor"), "jor").map_err(bad)?;
            e.seed = num(fields.remove("seed"), "seed").map_err(bad)?;
            e.jammer_kind = fields.remove("jammer_kind").map(String::from);
            e.hardware_tag = fields.remove("hardware_tag").map(String::from);
            if let Some(k) = fields.keys().next() {
                return Err(bad(format!("unknown key {k}")));
            }
            m.push(e).map_err(|e| bad(e.to_string()))?;
        }
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn write(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.render(comments)?).map_err(|e| Error::io(path, e))
    }
}
