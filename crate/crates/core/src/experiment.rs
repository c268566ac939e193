//! Declarative parameter sweeps.
//!
//! An [`ExperimentConfig`] names lists of jammer kinds, RJPs, oversampling
//! ratios, window sizes and training-set caps. Their cross product forms the
//! sweep points. Each point simulates fresh unjammed and jammed recordings,
//! encodes them into images and runs the k-fold protocol. A failing point is
//! recorded and the sweep continues.
//!
//! Seeds are derived from the master seed and a key naming the point's
//! parameters, so adding or reordering points never changes the data of
//! another point.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoenc::{flatten, EncoderTransfer, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{grid_search, run_kfold, EvalReport, Execution, GridEntry, HyperGrid, HyperParams, KFoldOptions, Summary};
use crate::imaging::{compute_extent, window_stream, HistogramImage, ImageConfig, ImageMode, PlaneExtent};
use crate::io::{format_extent, parse_policy, Label};
use crate::report::{self, csv_text, opt_field, Provenance};
use crate::seed::{derive_seed, sha256_hex};
use crate::sim::{measure_ber, simulate_link, JammerConfig, JammerKind, LinkConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub snr_db: f64,
    pub agc: bool,
    pub phase_noise_std: f64,
    pub ror: Vec<usize>,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            snr_db: 15.0,
            agc: true,
            phase_noise_std: 0.0,
            ror: vec![1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JammerSection {
    pub kinds: Vec<String>,
    pub rjp: Vec<f64>,
    pub jor: Vec<usize>,
    pub tone_offset: f64,
}

impl Default for JammerSection {
    fn default() -> Self {
        JammerSection {
            kinds: vec!["gaussian".into()],
            rjp: vec![0.1],
            jor: vec![1],
            tone_offset: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSection {
    /// Samples per image; one sweep point per entry.
    pub n: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
    pub mode: String,
    /// `auto <percentile> <margin>` or `fixed <i_min> <i_max> <q_min> <q_max>`.
    pub extent: String,
    pub unjammed: usize,
    pub jammed: usize,
    /// Length of the unjammed recording the automatic extent is fitted on.
    pub calibration_symbols: usize,
}

impl Default for ImageSection {
    fn default() -> Self {
        ImageSection {
            n: vec![100_000],
            rows: 224,
            cols: 224,
            mode: "gray".into(),
            extent: "auto 99.9 1.05".into(),
            unjammed: 60,
            jammed: 60,
            calibration_symbols: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub hidden: usize,
    pub encoder: String,
    pub sparsity_weight: f64,
    pub sparsity_proportion: f64,
    pub l2_weight: f64,
    pub learning_rate: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            hidden: 16,
            encoder: "logsig".into(),
            sparsity_weight: t.sparsity_weight,
            sparsity_proportion: t.sparsity_proportion,
            l2_weight: t.l2_weight,
            learning_rate: t.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    /// Caps on the number of training images; empty means no cap.
    pub train_sizes: Vec<usize>,
    /// Search the 72-configuration hyperparameter grid at every point.
    pub grid: bool,
    /// Symbols for the per-point BER measurement; 0 skips it.
    pub ber_symbols: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            k: 10,
            train_sizes: Vec::new(),
            grid: false,
            ber_symbols: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Master seed; every other seed is derived from it.
    pub seed: u64,
    /// Default output directory for the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub jammer: JammerSection,
    #[serde(default)]
    pub images: ImageSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_name() -> String {
    "experiment".into()
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    pub index: usize,
    pub kind: JammerKind,
    pub rjp: f64,
    pub ror: usize,
    pub jor: usize,
    pub n: usize,
    pub train_size: Option<usize>,
}

impl PointSpec {
    /// Stable name of the point's parameters, used for seeding.
    pub fn key(&self) -> String {
        format!(
            "{}/rjp={}/ror={}/jor={}/n={}",
            self.kind, self.rjp, self.ror, self.jor, self.n
        )
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// SHA-256 of the normalized config, independent of formatting and comments.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())
    }

    pub fn provenance(&self) -> Provenance {
        Provenance::new(self.seed, self.hash())
    }

    pub fn kinds(&self) -> Result<Vec<JammerKind>> {
        self.jammer
            .kinds
            .iter()
            .map(|k| {
                let kind: JammerKind = k.parse()?;
                if kind == JammerKind::None {
                    return Err(Error::InvalidConfig(
                        "jammer kind \"none\" has no jammed class to evaluate".into(),
                    ));
                }
                Ok(kind)
            })
            .collect()
    }

    pub fn image_config(&self, n: usize) -> Result<ImageConfig> {
        let cfg = ImageConfig {
            n,
            rows: self.images.rows,
            cols: self.images.cols,
            mode: self.images.mode.parse()?,
            extent_policy: parse_policy(&self.images.extent)?,
        };
        cfg.validate()?;
        if cfg.mode != ImageMode::Gray {
            return Err(Error::InvalidConfig("evaluation uses grayscale images".into()));
        }
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            sparsity_weight: self.train.sparsity_weight,
            sparsity_proportion: self.train.sparsity_proportion,
            l2_weight: self.train.l2_weight,
            learning_rate: self.train.learning_rate,
            ..TrainConfig::default()
        }
    }

    pub fn hyper_params(&self) -> Result<HyperParams> {
        Ok(HyperParams {
            k_hidden: self.train.hidden,
            sparsity_weight: self.train.sparsity_weight,
            l2_weight: self.train.l2_weight,
            enc_transfer: self.train.encoder.parse::<EncoderTransfer>()?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let empty = [
            ("jammer.kinds", self.jammer.kinds.is_empty()),
            ("jammer.rjp", self.jammer.rjp.is_empty()),
            ("jammer.jor", self.jammer.jor.is_empty()),
            ("link.ror", self.link.ror.is_empty()),
            ("images.n", self.images.n.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return bad(format!("{name} must list at least one value"));
        }
        self.kinds()?;
        for &rjp in &self.jammer.rjp {
            JammerConfig::new(JammerKind::Gaussian, rjp, 0).validate()?;
        }
        if self.link.ror.contains(&0) || self.jammer.jor.contains(&0) {
            return bad("ror and jor must be at least 1".into());
        }
        LinkConfig {
            snr_db: self.link.snr_db,
            phase_noise_std: self.link.phase_noise_std,
            ..LinkConfig::default()
        }
        .validate()?;
        for &n in &self.images.n {
            self.image_config(n)?;
        }
        if self.images.calibration_symbols == 0 {
            return bad("images.calibration_symbols must be at least 1".into());
        }
        if self.eval.k < 2 {
            return bad(format!("eval.k must be at least 2, got {}", self.eval.k));
        }
        let per_fold = self.images.unjammed.min(self.images.jammed);
        if per_fold < self.eval.k {
            return bad(format!(
                "{} unjammed / {} jammed images cannot fill {} folds",
                self.images.unjammed, self.images.jammed, self.eval.k
            ));
        }
        if self.eval.train_sizes.iter().any(|&t| t < 2) {
            return bad("training sets need at least 2 images".into());
        }
        self.train_config().validate()?;
        self.hyper_params()?;
        if self.train.hidden == 0 {
            return bad("train.hidden must be at least 1".into());
        }
        Ok(())
    }

    /// The sweep points in nested order kind → rjp → ror → jor → n → train size.
    pub fn points(&self) -> Result<Vec<PointSpec>> {
        let caps: Vec<Option<usize>> = if self.eval.train_sizes.is_empty() {
            vec![None]
        } else {
            self.eval.train_sizes.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for kind in self.kinds()? {
            for &rjp in &self.jammer.rjp {
                for &ror in &self.link.ror {
                    for &jor in &self.jammer.jor {
                        for &n in &self.images.n {
                            for &train_size in &caps {
                                out.push(PointSpec {
                                    index: out.len(),
                                    kind,
                                    rjp,
                                    ror,
                                    jor,
                                    n,
                                    train_size,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn link(&self, ror: usize, num_symbols: usize, seed: u64) -> LinkConfig {
        LinkConfig {
            num_symbols,
            snr_db: self.link.snr_db,
            ror,
            agc: self.link.agc,
            phase_noise_std: self.link.phase_noise_std,
            seed,
            ..LinkConfig::default()
        }
    }

    fn jammer(&self, spec: &PointSpec, seed: u64) -> JammerConfig {
        JammerConfig {
            jor: spec.jor,
            tone_offset: self.jammer.tone_offset,
            ..JammerConfig::new(spec.kind, spec.rjp, seed)
        }
    }

    /// Plane extent for receivers at `ror`, fitted on a calibration recording
    /// when the policy is automatic.
    pub fn extent(&self, ror: usize) -> Result<PlaneExtent> {
        let policy = parse_policy(&self.images.extent)?;
        let samples = match policy {
            crate::imaging::ExtentPolicy::Fixed(_) => Vec::new(),
            _ => {
                let seed = derive_seed(self.seed, &format!("calibration/ror={ror}"), 0);
                let link = self.link(ror, self.images.calibration_symbols, seed);
                simulate_link(&link, &JammerConfig::none())?.samples
            }
        };
        compute_extent(&samples, &policy)
    }
}

/// Simulates one recording long enough for `count` windows and encodes the
/// first `count` of them.
pub fn simulate_images(
    link: &LinkConfig,
    jammer: &JammerConfig,
    count: usize,
    image_config: &ImageConfig,
    extent: &PlaneExtent,
) -> Result<Vec<HistogramImage>> {
    let link = LinkConfig {
        num_symbols: (count * image_config.n).div_ceil(link.ror).max(1),
        ..link.clone()
    };
    let rec = simulate_link(&link, jammer)?;
    let mut images = window_stream(&rec, image_config, extent)?;
    images.truncate(count);
    Ok(images)
}

/// A successfully evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub extent: PlaneExtent,
    /// Configuration behind `report`: the fixed one, or the top of the grid.
    pub params: HyperParams,
    pub report: EvalReport,
    pub grid: Option<Vec<GridEntry>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub spec: PointSpec,
    pub ber: Option<f64>,
    pub result: std::result::Result<PointResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub provenance: Provenance,
    pub points: Vec<PointOutcome>,
}

fn run_point(cfg: &ExperimentConfig, spec: &PointSpec, extent: &PlaneExtent, exec: Execution) -> Result<PointResult> {
    let image_config = cfg.image_config(spec.n)?;
    let key = spec.key();
    let u_seed = derive_seed(cfg.seed, &format!("unjammed/ror={}/n={}", spec.ror, spec.n), 0);
    let j_seed = derive_seed(cfg.seed, &format!("jammed/{key}"), 0);
    let jam_seed = derive_seed(cfg.seed, &format!("jammer/{key}"), 0);

    let to_vectors = |images: Vec<HistogramImage>, wanted: usize| -> Result<Vec<Vec<f64>>> {
        if images.len() < wanted {
            return Err(Error::TooFewValues { needed: wanted, got: images.len() });
        }
        images.iter().map(flatten).collect()
    };
    let unjammed = to_vectors(
        simulate_images(&cfg.link(spec.ror, 1, u_seed), &JammerConfig::none(), cfg.images.unjammed, &image_config, extent)?,
        cfg.images.unjammed,
    )?;
    let jammed = to_vectors(
        simulate_images(&cfg.link(spec.ror, 1, j_seed), &cfg.jammer(spec, jam_seed), cfg.images.jammed, &image_config, extent)?,
        cfg.images.jammed,
    )?;

    let opts = KFoldOptions {
        k: cfg.eval.k,
        seed: derive_seed(cfg.seed, &format!("kfold/{key}"), spec.train_size.unwrap_or(0) as u64),
        max_train: spec.train_size,
        execution: exec,
    };
    let base = cfg.train_config();
    let fixed = cfg.hyper_params()?;
    if cfg.eval.grid {
        let ranked = grid_search(&unjammed, &jammed, &HyperGrid::reference(), &base, &opts);
        let best = ranked
            .iter()
            .find(|e| e.report.is_ok())
            .ok_or_else(|| Error::InvalidConfig("every grid configuration failed".into()))?;
        Ok(PointResult {
            extent: *extent,
            params: best.params,
            report: best.report.clone().expect("checked above"),
            grid: Some(ranked),
        })
    } else {
        let report = run_kfold(&unjammed, &jammed, fixed.architecture(), &fixed.apply(&base), &opts)?;
        Ok(PointResult {
            extent: *extent,
            params: fixed,
            report,
            grid: None,
        })
    }
}

fn point_ber(cfg: &ExperimentConfig, spec: &PointSpec) -> Result<Option<f64>> {
    if cfg.eval.ber_symbols == 0 {
        return Ok(None);
    }
    let key = spec.key();
    let link = cfg.link(spec.ror, cfg.eval.ber_symbols, derive_seed(cfg.seed, &format!("ber/{key}"), 0));
    let jam = cfg.jammer(spec, derive_seed(cfg.seed, &format!("ber-jammer/{key}"), 0));
    Ok(Some(measure_ber(&simulate_link(&link, &jam)?)?))
}

/// Runs every sweep point and, when `out_dir` is given, writes the CSVs.
/// Results do not depend on `exec`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>, exec: Execution) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let points = cfg.points()?;
    let mut rors: Vec<usize> = cfg.link.ror.clone();
    rors.sort_unstable();
    rors.dedup();
    let extents: Vec<(usize, std::result::Result<PlaneExtent, String>)> = rors
        .iter()
        .map(|&ror| (ror, cfg.extent(ror).map_err(|e| e.to_string())))
        .collect();

    let outcomes = exec.map(points, |spec| {
        let extent = &extents.iter().find(|(r, _)| *r == spec.ror).expect("extent per ror").1;
        let result = extent
            .clone()
            .and_then(|e| run_point(cfg, &spec, &e, exec).map_err(|e| e.to_string()));
        let ber = point_ber(cfg, &spec);
        let (ber, result) = match ber {
            Ok(b) => (b, result),
            Err(e) => (None, result.and(Err(format!("BER: {e}")))),
        };
        PointOutcome { spec, ber, result }
    });
    let outcome = ExperimentOutcome {
        provenance: cfg.provenance(),
        points: outcomes,
    };
    if let Some(dir) = out_dir {
        write_outputs(&outcome, dir)?;
    }
    Ok(outcome)
}

/// Column names of `summary.csv`.
pub fn summary_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "point", "jammer", "rjp", "ror", "jor", "n", "train_size", "status", "ber", "k_hidden",
        "sparsity_weight", "l2_weight", "encoder", "extent",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in Summary::METRICS {
        for suffix in ["mean", "lo", "hi"] {
            h.push(format!("{m}_{suffix}"));
        }
    }
    h
}

fn summary_row(p: &PointOutcome) -> Vec<String> {
    let s = &p.spec;
    let mut row = vec![
        s.index.to_string(),
        s.kind.to_string(),
        s.rjp.to_string(),
        s.ror.to_string(),
        s.jor.to_string(),
        s.n.to_string(),
    ];
    match &p.result {
        Ok(r) => {
            let trained = r.report.folds.iter().map(|f| f.train_size).min().unwrap_or(0);
            row.push(trained.to_string());
            row.push("ok".into());
            row.push(opt_field(p.ber));
            row.push(r.params.k_hidden.to_string());
            row.push(r.params.sparsity_weight.to_string());
            row.push(r.params.l2_weight.to_string());
            row.push(r.params.enc_transfer.to_string());
            row.push(format_extent(&r.extent));
            for m in Summary::METRICS {
                let values: Vec<f64> = r
                    .report
                    .folds
                    .iter()
                    .filter_map(|f| match m {
                        "auc" => Some(f.auc),
                        "accuracy" => f.metrics.accuracy,
                        "tpr_paper" => f.metrics.tpr_paper,
                        "tnr_paper" => f.metrics.tnr_paper,
                        "recall" => f.metrics.recall,
                        _ => f.metrics.specificity,
                    })
                    .collect();
                let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
                // A single defined fold has no interval; collapse it onto the mean.
                let (lo, hi) = match r.report.summary.get(m) {
                    Some(ci) => (Some(ci.lo), Some(ci.hi)),
                    None => (mean, mean),
                };
                row.extend([opt_field(mean), opt_field(lo), opt_field(hi)]);
            }
        }
        Err(e) => {
            row.push(s.train_size.map(|t| t.to_string()).unwrap_or_default());
            row.push(format!("failed: {e}"));
            row.push(opt_field(p.ber));
            row.extend(std::iter::repeat_n(String::new(), 5 + 3 * Summary::METRICS.len()));
        }
    }
    row
}

fn folds_csv(r: &PointResult, prov: &Provenance) -> Result<String> {
    let header = [
        "fold", "train_size", "tau", "tp", "fp", "tn", "fn", "accuracy", "tpr_paper", "tnr_paper", "recall",
        "specificity", "auc",
    ];
    let rows = r.report.folds.iter().map(|f| {
        vec![
            f.fold_index.to_string(),
            f.train_size.to_string(),
            f.tau.to_string(),
            f.counts.tp.to_string(),
            f.counts.fp.to_string(),
            f.counts.tn.to_string(),
            f.counts.fn_.to_string(),
            opt_field(f.metrics.accuracy),
            opt_field(f.metrics.tpr_paper),
            opt_field(f.metrics.tnr_paper),
            opt_field(f.metrics.recall),
            opt_field(f.metrics.specificity),
            f.auc.to_string(),
        ]
    });
    csv_text(&prov.comments(report::FOLDS_SCHEMA), &header, rows)
}

fn scores_csv(r: &PointResult, prov: &Provenance) -> Result<String> {
    let rows = r.report.folds.iter().flat_map(|f| {
        let u = f.unjammed_mses.iter().map(move |m| (f.fold_index, Label::Unjammed, *m));
        let j = f.jammed_mses.iter().map(move |m| (f.fold_index, Label::Jammed, *m));
        u.chain(j)
            .map(|(fold, label, m)| vec![fold.to_string(), label.to_string(), m.to_string()])
            .collect::<Vec<_>>()
    });
    csv_text(&prov.comments(report::SCORES_SCHEMA), &["fold", "label", "mse"], rows)
}

/// Column names of `grid.csv`.
pub const GRID_HEADER: [&str; 8] = [
    "point", "rank", "k_hidden", "sparsity_weight", "l2_weight", "encoder", "mean_auc", "status",
];

fn grid_rows(point: usize, ranked: &[GridEntry]) -> Vec<Vec<String>> {
    ranked
        .iter()
        .enumerate()
        .map(|(rank, e)| {
            vec![
                point.to_string(),
                (rank + 1).to_string(),
                e.params.k_hidden.to_string(),
                e.params.sparsity_weight.to_string(),
                e.params.l2_weight.to_string(),
                e.params.enc_transfer.to_string(),
                opt_field(e.mean_auc),
                match &e.report {
                    Ok(_) => "ok".into(),
                    Err(msg) => format!("failed: {msg}"),
                },
            ]
        })
        .collect()
}

/// Writes `summary.csv`, `grid.csv` (grid sweeps only) and per-point
/// `points/<index>/{folds,scores,grid}.csv` under `dir`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    let prov = &outcome.provenance;
    let header = summary_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let summary = csv_text(
        &prov.comments(report::SUMMARY_SCHEMA),
        &header,
        outcome.points.iter().map(summary_row),
    )?;
    report::write_text(&dir.join("summary.csv"), &summary)?;

    let mut all_grid = Vec::new();
    for p in &outcome.points {
        let Ok(r) = &p.result else { continue };
        let pdir = dir.join("points").join(format!("{:03}", p.spec.index));
        report::write_text(&pdir.join("folds.csv"), &folds_csv(r, prov)?)?;
        report::write_text(&pdir.join("scores.csv"), &scores_csv(r, prov)?)?;
        if let Some(ranked) = &r.grid {
            let rows = grid_rows(p.spec.index, ranked);
            let text = csv_text(&prov.comments(report::GRID_SCHEMA), &GRID_HEADER, rows.clone())?;
            report::write_text(&pdir.join("grid.csv"), &text)?;
            all_grid.extend(rows);
        }
    }
    if !all_grid.is_empty() {
        let text = csv_text(&prov.comments(report::GRID_SCHEMA), &GRID_HEADER, all_grid)?;
        report::write_text(&dir.join("grid.csv"), &text)?;
    }
    Ok(())
}
