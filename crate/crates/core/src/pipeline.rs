//! File-level pipeline stages: simulate → encode → train → detect.
//!
//! Each stage reads and writes the formats in [`crate::io`] and only writes
//! inside the output directory it is given.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::autoenc::{flatten, Architecture, DetectorModel, TrainConfig, TrainOutcome, Verdict};
use crate::error::{Error, Result};
use crate::eval::{run_kfold, EvalReport, KFoldOptions};
use crate::imaging::{compute_extent, window_stream, ExtentPolicy, HistogramImage, ImageConfig, PlaneExtent};
use crate::io::{
    format_extent, format_policy, parse_extent, parse_policy, read_image_pgm, read_raw_iq, write_image_pgm,
    write_raw_iq, DatasetManifest, Label, ManifestEntry, RawFormat,
};
use crate::report::Provenance;
use crate::seed::{derive_seed, sha256_hex};
use crate::sim::{simulate_link, IqRecording, JammerConfig, JammerKind, LinkConfig};

pub const MANIFEST_FILE: &str = "manifest.txt";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Link and jammer settings for one simulated capture under a master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateRequest {
    pub link: LinkConfig,
    pub jammer: JammerConfig,
    pub master_seed: u64,
}

impl SimulateRequest {
    /// Link and jammer configs with their child seeds filled in.
    pub fn seeded(&self) -> (LinkConfig, JammerConfig) {
        let link = LinkConfig {
            seed: derive_seed(self.master_seed, "link", 0),
            ..self.link.clone()
        };
        let jammer = JammerConfig {
            seed: derive_seed(self.master_seed, "jammer", 0),
            ..self.jammer.clone()
        };
        (link, jammer)
    }

    pub fn file_name(&self) -> String {
        let j = &self.jammer;
        let l = &self.link;
        match j.kind {
            JammerKind::None => format!("none-ror{}-seed{}.iq", l.ror, self.master_seed),
            k => format!("{k}-rjp{}-ror{}-jor{}-seed{}.iq", j.rjp, l.ror, j.jor, self.master_seed),
        }
    }

    fn provenance(&self) -> Provenance {
        let (l, j) = self.seeded();
        let canonical = format!(
            "symbols={} snr_db={} ror={} agc={} phase_noise_std={} jam={} rjp={} jor={} tone_offset={}",
            l.num_symbols, l.snr_db, l.ror, l.agc, l.phase_noise_std, j.kind, j.rjp, j.jor, j.tone_offset
        );
        Provenance::new(self.master_seed, sha256_hex(canonical.as_bytes()))
    }
}

/// Simulates one capture into `out_dir` and records it in the directory's
/// manifest, replacing any entry with the same file name.
pub fn simulate_to_dir(req: &SimulateRequest, out_dir: &Path) -> Result<PathBuf> {
    let (link, jammer) = req.seeded();
    let rec = simulate_link(&link, &jammer)?;
    create_dir(out_dir)?;
    let name = req.file_name();
    let path = out_dir.join(&name);
    write_raw_iq(&rec, &path, RawFormat::InterleavedFloat32Le)?;

    let manifest_path = out_dir.join(MANIFEST_FILE);
    let mut manifest = if manifest_path.exists() {
        DatasetManifest::read(&manifest_path)?
    } else {
        DatasetManifest::new()
    };
    let jammed = jammer.kind != JammerKind::None;
    let entry = ManifestEntry {
        rjp: jammed.then_some(jammer.rjp),
        jammer_kind: Some(jammer.kind.to_string()),
        ror: Some(link.ror),
        jor: jammed.then_some(jammer.jor),
        hardware_tag: Some("sim".into()),
        seed: Some(req.master_seed),
        ..ManifestEntry::new(name, if jammed { Label::Jammed } else { Label::Unjammed })
    };
    manifest.entries.retain(|e| e.path != entry.path);
    manifest.push(entry)?;
    manifest.write(&manifest_path, &req.provenance().comments(crate::io::MANIFEST_VERSION))?;
    Ok(path)
}

/// Where the plane extent comes from when encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtentSource {
    Fixed(PlaneExtent),
    /// Fit with the automatic policy on an unjammed recording.
    Recording(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeRequest {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub mode: crate::imaging::ImageMode,
    pub extent: ExtentSource,
    /// Label for a bare recording; manifests carry their own labels.
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOutput {
    pub manifest: PathBuf,
    pub images: usize,
    pub warnings: Vec<String>,
}

/// True when `path` holds a dataset manifest rather than raw samples.
pub fn is_manifest(path: &Path) -> Result<bool> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(std::str::from_utf8(&bytes).is_ok_and(|t| DatasetManifest::parse(t).is_ok()))
}

fn stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recording".into())
}

/// Encodes a recording, or every recording in a manifest, into PGM/PPM
/// images under `out_dir/images` with a manifest at `out_dir/manifest.txt`.
pub fn encode_to_dir(input: &Path, req: &EncodeRequest, out_dir: &Path) -> Result<EncodeOutput> {
    let (extent, policy) = match &req.extent {
        ExtentSource::Fixed(e) => (*e, ExtentPolicy::Fixed(*e)),
        ExtentSource::Recording(p) => {
            let rec = read_raw_iq(p, RawFormat::InterleavedFloat32Le)?;
            let policy = ExtentPolicy::default();
            (compute_extent(&rec.samples, &policy)?, policy)
        }
    };
    let cfg = ImageConfig {
        n: req.n,
        rows: req.rows,
        cols: req.cols,
        mode: req.mode,
        extent_policy: policy,
    };
    cfg.validate()?;

    let sources: Vec<(PathBuf, ManifestEntry)> = if is_manifest(input)? {
        let m = DatasetManifest::read(input)?;
        m.entries
            .iter()
            .map(|e| (DatasetManifest::resolve(input, e), e.clone()))
            .collect()
    } else {
        let name = input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        vec![(input.to_path_buf(), ManifestEntry::new(name, req.label))]
    };

    let ext = match req.mode {
        crate::imaging::ImageMode::Gray => "pgm",
        crate::imaging::ImageMode::Color => "ppm",
    };
    create_dir(&out_dir.join("images"))?;
    let mut manifest = DatasetManifest::new();
    manifest.meta.insert("image.n".into(), cfg.n.to_string());
    manifest.meta.insert("image.rows".into(), cfg.rows.to_string());
    manifest.meta.insert("image.cols".into(), cfg.cols.to_string());
    manifest.meta.insert("image.mode".into(), cfg.mode.as_str().into());
    manifest.meta.insert("image.extent_policy".into(), format_policy(&cfg.extent_policy));
    manifest.meta.insert("extent".into(), format_extent(&extent));

    let mut warnings = Vec::new();
    let mut hasher_input = format!("n={} rows={} cols={} mode={} extent={}", cfg.n, cfg.rows, cfg.cols, cfg.mode.as_str(), format_extent(&extent));
    let mut count = 0;
    for (path, entry) in sources {
        let rec = read_raw_iq(&path, RawFormat::InterleavedFloat32Le)?;
        let images = window_stream(&rec, &cfg, &extent)?;
        if images.is_empty() {
            warnings.push(format!(
                "{}: {} samples is shorter than one window of {}; no images",
                path.display(),
                rec.len(),
                cfg.n
            ));
        }
        let noisy = images.iter().filter(|i| i.discard_warning()).count();
        if noisy > 0 {
            warnings.push(format!(
                "{}: {noisy} of {} windows had more than 1% of samples outside the extent",
                path.display(),
                images.len()
            ));
        }
        let base = stem(&entry.path);
        for (k, img) in images.iter().enumerate() {
            let rel = format!("images/{base}-{k:05}.{ext}");
            write_image_pgm(img, out_dir.join(&rel))?;
            manifest.push(ManifestEntry {
                path: rel,
                ..entry.clone()
            })?;
            count += 1;
        }
        let _ = write!(hasher_input, " {}", entry.path);
    }
    let prov = Provenance {
        seed: None,
        config_hash: Some(sha256_hex(hasher_input.as_bytes())),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    manifest.write(&manifest_path, &prov.comments(crate::io::MANIFEST_VERSION))?;
    Ok(EncodeOutput {
        manifest: manifest_path,
        images: count,
        warnings,
    })
}

/// Loads every image of a manifest with its label, checking that they share
/// one geometry.
pub fn load_images(manifest_path: &Path) -> Result<(DatasetManifest, Vec<(Label, HistogramImage)>)> {
    let m = DatasetManifest::read(manifest_path)?;
    let mut out = Vec::with_capacity(m.entries.len());
    for e in &m.entries {
        let img = read_image_pgm(DatasetManifest::resolve(manifest_path, e))?;
        if let Some((_, first)) = out.first() {
            let first: &HistogramImage = first;
            if (img.rows, img.cols, img.mode) != (first.rows, first.cols, first.mode) {
                return Err(Error::DimensionMismatch {
                    expected: first.rows * first.cols,
                    actual: img.rows * img.cols,
                });
            }
        }
        out.push((e.label, img));
    }
    Ok((m, out))
}

fn image_config_from(m: &DatasetManifest, first: &HistogramImage) -> Result<ImageConfig> {
    let meta = |k: &str| m.meta.get(k).map(String::as_str);
    let num = |k: &str, default: usize| -> Result<usize> {
        meta(k).map_or(Ok(default), |v| {
            v.parse().map_err(|_| Error::malformed("manifest", format!("bad {k} {v:?}")))
        })
    };
    Ok(ImageConfig {
        n: num("image.n", first.n_used + first.n_discarded)?,
        rows: num("image.rows", first.rows)?,
        cols: num("image.cols", first.cols)?,
        mode: first.mode,
        extent_policy: match meta("image.extent_policy") {
            Some(p) => parse_policy(p)?,
            None => ExtentPolicy::Fixed(first.extent),
        },
    })
}

/// Trains a detector on the unjammed images of a manifest. Jammed entries
/// are refused: the threshold must come from unjammed data only.
pub fn train_from_manifest(
    manifest_path: &Path,
    cfg: &TrainConfig,
    arch: Architecture,
) -> Result<(DetectorModel, TrainOutcome)> {
    let (m, images) = load_images(manifest_path)?;
    if let Some(e) = m.entries.iter().find(|e| e.label == Label::Jammed) {
        return Err(Error::InvalidConfig(format!(
            "training manifest lists jammed image {:?}; the detector is trained on unjammed images only",
            e.path
        )));
    }
    if images.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "{} training image(s): the threshold needs a standard deviation over at least 2",
            images.len()
        )));
    }
    let images: Vec<HistogramImage> = images.into_iter().map(|(_, img)| img).collect();
    let extent = match m.meta.get("extent") {
        Some(s) => parse_extent(s)?,
        None => images[0].extent,
    };
    let image_config = image_config_from(&m, &images[0])?;
    DetectorModel::fit(&images, image_config, extent, cfg, arch)
}

/// Runs the k-fold protocol over a labelled manifest. Entries are sorted by
/// path first, so the listing order of the manifest does not matter.
pub fn evaluate_manifest(
    manifest_path: &Path,
    cfg: &TrainConfig,
    arch: Architecture,
    opts: &KFoldOptions,
) -> Result<EvalReport> {
    let (m, images) = load_images(manifest_path)?;
    let mut labelled: Vec<(&str, Label, Vec<f64>)> = m
        .entries
        .iter()
        .zip(images)
        .map(|(e, (label, img))| Ok((e.path.as_str(), label, flatten(&img)?)))
        .collect::<Result<_>>()?;
    labelled.sort_by(|a, b| a.0.cmp(b.0));
    let (unjammed, jammed): (Vec<_>, Vec<_>) = labelled.into_iter().partition(|(_, l, _)| *l == Label::Unjammed);
    let strip = |set: Vec<(&str, Label, Vec<f64>)>| -> Vec<Vec<f64>> { set.into_iter().map(|(_, _, x)| x).collect() };
    run_kfold(&strip(unjammed), &strip(jammed), arch, cfg, opts)
}

/// Provenance comments for a model trained from `manifest_path`.
pub fn train_provenance(manifest_path: &Path, cfg: &TrainConfig, arch: Architecture) -> Result<Provenance> {
    let manifest = std::fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let canonical = format!(
        "manifest={} epochs={} hidden={} encoder={} beta={} rho={} l2={} lr={} seed={}",
        sha256_hex(&manifest),
        cfg.epochs,
        arch.k_hidden,
        arch.enc_transfer,
        cfg.sparsity_weight,
        cfg.sparsity_proportion,
        cfg.l2_weight,
        cfg.learning_rate,
        cfg.seed
    );
    Ok(Provenance::new(cfg.seed, sha256_hex(canonical.as_bytes())))
}

/// Verdict for one window or image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub index: usize,
    pub score: f64,
    pub verdict: Verdict,
}

/// Scores consecutive windows of a recording with the model's geometry.
pub fn detect_recording(model: &DetectorModel, rec: &IqRecording) -> Result<Vec<Detection>> {
    let images = window_stream(rec, &model.image_config, &model.extent)?;
    detect_images(model, &images)
}

pub fn detect_images(model: &DetectorModel, images: &[HistogramImage]) -> Result<Vec<Detection>> {
    images
        .iter()
        .enumerate()
        .map(|(index, img)| {
            let (verdict, score) = model.classify(img)?;
            Ok(Detection {
                index,
                score: score.value(),
                verdict,
            })
        })
        .collect()
}

/// One `index score verdict` line per detection (scores with 17 significant
/// digits) and a closing `# jammed_fraction=` line.
pub fn format_detections(detections: &[Detection], comments: &[String]) -> String {
    let mut s = String::new();
    for c in comments {
        let _ = writeln!(s, "# {c}");
    }
    for d in detections {
        let _ = writeln!(s, "{} {:.16e} {}", d.index, d.score, d.verdict.as_str());
    }
    let jammed = detections.iter().filter(|d| d.verdict == Verdict::Jammed).count();
    let fraction = if detections.is_empty() {
        0.0
    } else {
        jammed as f64 / detections.len() as f64
    };
    let _ = writeln!(s, "# jammed_fraction={fraction} ({jammed}/{})", detections.len());
    s
}
