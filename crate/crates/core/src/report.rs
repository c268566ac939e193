//! CSV outputs and plot-ready reports.
//!
//! Every CSV starts with `#` comment lines naming the tool version, the
//! schema, the master seed and the config hash, followed by a header row.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("bloodhound ", env!("CARGO_PKG_VERSION"));

pub const SUMMARY_SCHEMA: &str = "bloodhound-summary/1";
pub const FOLDS_SCHEMA: &str = "bloodhound-folds/1";
pub const SCORES_SCHEMA: &str = "bloodhound-scores/1";
pub const GRID_SCHEMA: &str = "bloodhound-grid/1";
pub const REPORT_SCHEMA: &str = "bloodhound-report/1";

/// Where an output came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

impl Provenance {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Provenance {
            seed: Some(seed),
            config_hash: Some(config_hash.into()),
        }
    }

    /// Comment lines (without the leading `#`) for an output of `schema`.
    pub fn comments(&self, schema: &str) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        vec![
            format!("tool={TOOL_VERSION}"),
            format!("schema={schema}"),
            format!("seed={}", opt(self.seed.map(|s| s.to_string()))),
            format!("config_hash={}", opt(self.config_hash.clone())),
        ]
    }
}

/// Renders comment lines, a header and rows as CSV text.
pub fn csv_text<R, S>(comments: &[String], header: &[&str], rows: R) -> Result<String>
where
    R: IntoIterator<Item = Vec<S>>,
    S: AsRef<str>,
{
    let mut out = Vec::new();
    for c in comments {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(AsRef::as_ref))?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
    }
    Ok(String::from_utf8(out).expect("CSV output is UTF-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Formats an optional value; `None` becomes an empty field.
pub fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// A parsed CSV with its comment metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str, expected_schema: &str) -> Result<Self> {
        let comments: Vec<(String, String)> = text
            .lines()
            .map_while(|l| l.strip_prefix('#'))
            .filter_map(|c| c.trim().split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
            .collect();
        let schema = comments.iter().find(|(k, _)| k == "schema").map(|(_, v)| v.as_str());
        if schema != Some(expected_schema) {
            return Err(Error::malformed(
                "CSV",
                format!("schema {:?}, expected {expected_schema:?}", schema.unwrap_or("none")),
            ));
        }
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(CsvTable { comments, header, rows })
    }

    pub fn read(path: &Path, expected_schema: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, expected_schema)
            .map_err(|e| Error::malformed("CSV", format!("{}: {e}", path.display())))
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::malformed("CSV", format!("missing column {name:?}")))
    }

    pub fn comment(&self, key: &str) -> Option<&str> {
        self.comments.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Rjp,
    NSamples,
    TrainSize,
    Jor,
    MseHist,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Rjp => "rjp",
            ReportKind::NSamples => "nsamples",
            ReportKind::TrainSize => "trainsize",
            ReportKind::Jor => "jor",
            ReportKind::MseHist => "mse-hist",
        }
    }

    /// Summary column used as the x axis; `None` for the histogram.
    fn x_column(self) -> Option<&'static str> {
        match self {
            ReportKind::Rjp => Some("rjp"),
            ReportKind::NSamples => Some("n"),
            ReportKind::TrainSize => Some("train_size"),
            ReportKind::Jor => Some("jor"),
            ReportKind::MseHist => None,
        }
    }

    fn input_file(self) -> &'static str {
        match self {
            ReportKind::MseHist => "scores.csv",
            _ => "summary.csv",
        }
    }
}

impl FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rjp" => Ok(ReportKind::Rjp),
            "nsamples" => Ok(ReportKind::NSamples),
            "trainsize" => Ok(ReportKind::TrainSize),
            "jor" => Ok(ReportKind::Jor),
            "mse-hist" => Ok(ReportKind::MseHist),
            _ => Err(Error::InvalidConfig(format!(
                "unknown report kind {s:?} (expected rjp, nsamples, trainsize, jor or mse-hist)"
            ))),
        }
    }
}

fn collect_files(dir: &Path, name: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, name, out)?;
        } else if p.file_name().is_some_and(|f| f == name) {
            out.push(p);
        }
    }
    Ok(())
}

/// Expands directories into the files a report kind consumes, in sorted order.
pub fn report_inputs(kind: ReportKind, inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            collect_files(p, kind.input_file(), &mut files)?;
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    /// Summary metric for the x/mean/ci kinds.
    pub metric: String,
    /// Histogram bin count for `mse-hist`.
    pub bins: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            metric: "accuracy".into(),
            bins: 50,
        }
    }
}

fn provenance_of(tables: &[CsvTable]) -> Provenance {
    let agreed = |key: &str| -> Option<String> {
        let values: BTreeSet<&str> = tables.iter().filter_map(|t| t.comment(key)).collect();
        match values.len() {
            0 => None,
            1 => values.into_iter().next().map(String::from),
            _ => Some("mixed".into()),
        }
    };
    Provenance {
        seed: agreed("seed").and_then(|s| s.parse().ok()),
        config_hash: agreed("config_hash"),
    }
}

/// Builds a plot-ready CSV from experiment outputs.
pub fn build_report(kind: ReportKind, files: &[PathBuf], opts: &ReportOptions) -> Result<String> {
    let schema = match kind {
        ReportKind::MseHist => SCORES_SCHEMA,
        _ => SUMMARY_SCHEMA,
    };
    let tables = files
        .iter()
        .map(|f| CsvTable::read(f, schema))
        .collect::<Result<Vec<_>>>()?;
    let comments = provenance_of(&tables).comments(REPORT_SCHEMA);
    match kind.x_column() {
        Some(x) => summary_report(x, &tables, &opts.metric, &comments),
        None => mse_histogram(&tables, opts.bins, &comments),
    }
}

fn summary_report(x: &str, tables: &[CsvTable], metric: &str, comments: &[String]) -> Result<String> {
    if !crate::eval::Summary::METRICS.contains(&metric) {
        return Err(Error::InvalidConfig(format!("unknown metric {metric:?}")));
    }
    let mut rows = Vec::new();
    for t in tables {
        let cx = t.column(x)?;
        let cm = t.column(&format!("{metric}_mean"))?;
        let clo = t.column(&format!("{metric}_lo"))?;
        let chi = t.column(&format!("{metric}_hi"))?;
        for r in &t.rows {
            rows.push(vec![r[cx].clone(), r[cm].clone(), r[clo].clone(), r[chi].clone()]);
        }
    }
    csv_text(comments, &["x", "mean", "ci_lo", "ci_hi"], rows)
}

fn mse_histogram(tables: &[CsvTable], bins: usize, comments: &[String]) -> Result<String> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let mut scores: Vec<(bool, f64)> = Vec::new();
    for t in tables {
        let cl = t.column("label")?;
        let cm = t.column("mse")?;
        for r in &t.rows {
            let jammed = r[cl].parse::<crate::io::Label>()? == crate::io::Label::Jammed;
            let mse: f64 = r[cm]
                .parse()
                .map_err(|_| Error::malformed("CSV", format!("bad mse {:?}", r[cm])))?;
            scores.push((jammed, mse));
        }
    }
    let header = ["bin_lo", "bin_hi", "unjammed", "jammed"];
    if scores.is_empty() {
        return csv_text(comments, &header, Vec::<Vec<String>>::new());
    }
    let lo = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![[0u64; 2]; bins];
    for (jammed, v) in scores {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b][usize::from(jammed)] += 1;
    }
    let rows = counts.iter().enumerate().map(|(b, c)| {
        let start = lo + b as f64 * width;
        let end = if b + 1 == bins { hi.max(start) } else { lo + (b + 1) as f64 * width };
        vec![start.to_string(), end.to_string(), c[0].to_string(), c[1].to_string()]
    });
    csv_text(comments, &header, rows)
}
