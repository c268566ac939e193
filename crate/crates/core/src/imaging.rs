//! Bivariate-histogram images of the I-Q plane.
//!
//! A window of `n` samples is binned on an `rows x cols` grid over a fixed
//! [`PlaneExtent`]. Column `c` covers `i` in `[i_min + c*di, i_min + (c+1)*di)`
//! and row `r` covers `q` in `(q_max - (r+1)*dq, q_max - r*dq]`, so row 0 holds
//! the highest `q`. The outer edges `i = i_max` and `q = q_min` belong to the
//! last column and last row. Samples outside the extent are discarded and
//! counted; tile counts above 255 saturate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sim::{IqRecording, IqSample};

/// Discard fraction above which an image carries a warning flag.
pub const DISCARD_WARNING_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneExtent {
    pub i_min: f64,
    pub i_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl PlaneExtent {
    pub fn new(i_min: f64, i_max: f64, q_min: f64, q_max: f64) -> Result<Self> {
        let extent = PlaneExtent {
            i_min,
            i_max,
            q_min,
            q_max,
        };
        extent.validate()?;
        Ok(extent)
    }

    /// The square `[-e, e]^2`.
    pub fn symmetric(e: f64) -> Result<Self> {
        PlaneExtent::new(-e, e, -e, e)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.i_min, self.i_max, self.q_min, self.q_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.i_min >= self.i_max || self.q_min >= self.q_max {
            return Err(Error::InvalidConfig(format!("degenerate plane extent {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtentPolicy {
    Fixed(PlaneExtent),
    /// Symmetric square sized from a percentile of `max(|i|, |q|)` over
    /// training samples, widened by `margin`.
    AutoFromTraining { percentile: f64, margin: f64 },
}

impl Default for ExtentPolicy {
    fn default() -> Self {
        ExtentPolicy::AutoFromTraining {
            percentile: 99.9,
            margin: 1.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageMode {
    #[default]
    Gray,
    Color,
}

impl ImageMode {
    pub fn channels(self) -> usize {
        match self {
            ImageMode::Gray => 1,
            ImageMode::Color => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ImageMode::Gray => "gray",
            ImageMode::Color => "color",
        }
    }
}

impl std::str::FromStr for ImageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gray" | "grey" | "grayscale" => Ok(ImageMode::Gray),
            "color" | "colour" | "rgb" => Ok(ImageMode::Color),
            _ => Err(Error::InvalidConfig(format!("unknown image mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageConfig {
    /// Samples per image.
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub mode: ImageMode,
    pub extent_policy: ExtentPolicy,
}

impl Default for ImageConfig {
    fn default() -> Self {
        ImageConfig {
            n: 100_000,
            rows: 224,
            cols: 224,
            mode: ImageMode::Gray,
            extent_policy: ExtentPolicy::default(),
        }
    }
}

impl ImageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("samples per image must be at least 1".into()));
        }
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::InvalidConfig(format!(
                "image must be at least 2x2, got {}x{}",
                self.rows, self.cols
            )));
        }
        if let ExtentPolicy::Fixed(e) = &self.extent_policy {
            e.validate()?;
        }
        Ok(())
    }

    /// Flattened input dimension `rows * cols`.
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }
}

/// A histogram image. Pixels are row-major; color images interleave RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramImage {
    pub rows: usize,
    pub cols: usize,
    pub mode: ImageMode,
    pub pixels: Vec<u8>,
    pub extent: PlaneExtent,
    pub n_used: usize,
    pub n_discarded: usize,
}

impl HistogramImage {
    /// A grayscale image from explicit pixel values.
    pub fn gray(rows: usize, cols: usize, pixels: Vec<u8>, extent: PlaneExtent) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: pixels.len(),
            });
        }
        Ok(HistogramImage {
            rows,
            cols,
            mode: ImageMode::Gray,
            pixels,
            extent,
            n_used: 0,
            n_discarded: 0,
        })
    }

    pub fn channels(&self) -> usize {
        self.mode.channels()
    }

    /// Gray value at `(row, col)`, or the first channel of a color image.
    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[(row * self.cols + col) * self.channels()]
    }

    pub fn discard_fraction(&self) -> f64 {
        let n = self.n_used + self.n_discarded;
        if n == 0 {
            0.0
        } else {
            self.n_discarded as f64 / n as f64
        }
    }

    /// Set when more than 1% of the window fell outside the extent.
    pub fn discard_warning(&self) -> bool {
        self.discard_fraction() > DISCARD_WARNING_FRACTION
    }
}

/// Linear blue → green → red ramp indexed by the clipped tile count.
pub const COLORMAP: [[u8; 3]; 256] = build_colormap();

const fn build_colormap() -> [[u8; 3]; 256] {
    let mut map = [[0u8; 3]; 256];
    let mut v = 0;
    while v < 256 {
        map[v] = if v < 128 {
            let g = ((v * 255 + 63) / 127) as u8;
            [0, g, 255 - g]
        } else {
            let r = (((v - 128) * 255 + 63) / 127) as u8;
            [r, 255 - r, 0]
        };
        v += 1;
    }
    map
}

/// Size of the symmetric extent for a policy, or the fixed extent verbatim.
pub fn compute_extent(training_samples: &[IqSample], policy: &ExtentPolicy) -> Result<PlaneExtent> {
    match *policy {
        ExtentPolicy::Fixed(extent) => {
            extent.validate()?;
            Ok(extent)
        }
        ExtentPolicy::AutoFromTraining { percentile, margin } => {
            if training_samples.is_empty() {
                return Err(Error::Empty("extent needs at least one training sample"));
            }
            if !(0.0..=100.0).contains(&percentile) || !(margin.is_finite() && margin > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "percentile {percentile} / margin {margin} out of range"
                )));
            }
            let mut radii: Vec<f64> = training_samples
                .iter()
                .map(|s| s.i.abs().max(s.q.abs()))
                .collect();
            if radii.iter().any(|r| !r.is_finite()) {
                return Err(Error::InvalidConfig("non-finite training sample".into()));
            }
            radii.sort_by(f64::total_cmp);
            let e = margin * percentile_sorted(&radii, percentile);
            PlaneExtent::symmetric(e)
        }
    }
}

// Linear interpolation between closest ranks.
fn percentile_sorted(sorted: &[f64], percentile: f64) -> f64 {
    let rank = percentile / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

struct Grid {
    extent: PlaneExtent,
    rows: usize,
    cols: usize,
    di: f64,
    dq: f64,
}

impl Grid {
    fn new(extent: PlaneExtent, rows: usize, cols: usize) -> Self {
        Grid {
            extent,
            rows,
            cols,
            di: (extent.i_max - extent.i_min) / cols as f64,
            dq: (extent.q_max - extent.q_min) / rows as f64,
        }
    }

    fn i_edge(&self, c: usize) -> f64 {
        self.extent.i_min + c as f64 * self.di
    }

    fn q_edge(&self, r: usize) -> f64 {
        self.extent.q_max - r as f64 * self.dq
    }

    fn col(&self, i: f64) -> Option<usize> {
        if !(i >= self.extent.i_min && i <= self.extent.i_max) {
            return None;
        }
        let last = self.cols - 1;
        let mut c = (((i - self.extent.i_min) / self.di).floor().max(0.0) as usize).min(last);
        // The division can land one bin off near an edge; settle on the
        // bin whose explicit edges contain the sample.
        while c > 0 && i < self.i_edge(c) {
            c -= 1;
        }
        while c < last && i >= self.i_edge(c + 1) {
            c += 1;
        }
        Some(c)
    }

    fn row(&self, q: f64) -> Option<usize> {
        if !(q >= self.extent.q_min && q <= self.extent.q_max) {
            return None;
        }
        let last = self.rows - 1;
        let mut r = (((self.extent.q_max - q) / self.dq).floor().max(0.0) as usize).min(last);
        while r > 0 && q > self.q_edge(r) {
            r -= 1;
        }
        while r < last && q <= self.q_edge(r + 1) {
            r += 1;
        }
        Some(r)
    }
}

/// Unclipped per-tile counts (row-major) and the number of discarded samples.
pub fn tile_counts(
    samples: &[IqSample],
    rows: usize,
    cols: usize,
    extent: &PlaneExtent,
) -> (Vec<u32>, usize) {
    let grid = Grid::new(*extent, rows, cols);
    let mut counts = vec![0u32; rows * cols];
    let mut discarded = 0;
    for s in samples {
        match (grid.row(s.q), grid.col(s.i)) {
            (Some(r), Some(c)) => counts[r * cols + c] += 1,
            _ => discarded += 1,
        }
    }
    (counts, discarded)
}

/// Encodes exactly `cfg.n` samples into one image.
pub fn make_image(
    samples: &[IqSample],
    cfg: &ImageConfig,
    extent: &PlaneExtent,
) -> Result<HistogramImage> {
    cfg.validate()?;
    extent.validate()?;
    if samples.len() != cfg.n {
        return Err(Error::DimensionMismatch {
            expected: cfg.n,
            actual: samples.len(),
        });
    }
    let (counts, discarded) = tile_counts(samples, cfg.rows, cfg.cols, extent);
    let clipped = counts.iter().map(|&c| c.min(255) as u8);
    let pixels = match cfg.mode {
        ImageMode::Gray => clipped.collect(),
        ImageMode::Color => clipped.flat_map(|v| COLORMAP[v as usize]).collect(),
    };
    Ok(HistogramImage {
        rows: cfg.rows,
        cols: cfg.cols,
        mode: cfg.mode,
        pixels,
        extent: *extent,
        n_used: samples.len() - discarded,
        n_discarded: discarded,
    })
}

/// Splits a recording into consecutive non-overlapping windows of `cfg.n`
/// samples and encodes each. A trailing partial window is dropped.
pub fn window_stream(
    rec: &IqRecording,
    cfg: &ImageConfig,
    extent: &PlaneExtent,
) -> Result<Vec<HistogramImage>> {
    cfg.validate()?;
    rec.samples
        .par_chunks_exact(cfg.n)
        .map(|window| make_image(window, cfg, extent))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> PlaneExtent {
        PlaneExtent::symmetric(1.0).unwrap()
    }

    fn cfg(n: usize, rows: usize, cols: usize) -> ImageConfig {
        ImageConfig {
            n,
            rows,
            cols,
            ..ImageConfig::default()
        }
    }

    #[test]
    fn fixed_extent_is_returned_verbatim() {
        let e = PlaneExtent::symmetric(1.5).unwrap();
        assert_eq!(compute_extent(&[], &ExtentPolicy::Fixed(e)).unwrap(), e);
    }

    #[test]
    fn auto_extent_examples() {
        let ring: Vec<IqSample> = (0..1000)
            .map(|k| {
                let t = k as f64 * 0.01;
                IqSample::new(t.cos().signum(), t.sin().clamp(-1.0, 1.0))
            })
            .collect();
        let e = compute_extent(&ring, &ExtentPolicy::default()).unwrap();
        assert!((e.i_max - 1.05).abs() < 1e-12 && (e.q_min + 1.05).abs() < 1e-12);

        let e = compute_extent(&[IqSample::new(2.0, -3.0)], &ExtentPolicy::default()).unwrap();
        assert!((e.i_max - 3.15).abs() < 1e-12);
    }

    #[test]
    fn auto_extent_rejects_empty_input() {
        assert!(compute_extent(&[], &ExtentPolicy::default()).is_err());
    }

    #[test]
    fn manual_tile_count() {
        let samples = [
            IqSample::new(-0.5, 0.5),
            IqSample::new(0.5, 0.5),
            IqSample::new(0.5, 0.5),
        ];
        let img = make_image(&samples, &cfg(3, 2, 2), &unit()).unwrap();
        assert_eq!(img.pixels, vec![1, 2, 0, 0]);
        assert_eq!((img.n_used, img.n_discarded), (3, 0));
    }

    #[test]
    fn counts_saturate_at_255() {
        let samples = vec![IqSample::new(0.1, 0.1); 300];
        let img = make_image(&samples, &cfg(300, 4, 4), &unit()).unwrap();
        assert_eq!(img.pixels.iter().copied().max(), Some(255));
        assert_eq!(img.pixels.iter().filter(|&&p| p > 0).count(), 1);
    }

    #[test]
    fn out_of_extent_samples_are_discarded() {
        let samples = vec![IqSample::new(5.0, 0.0); 10];
        let img = make_image(&samples, &cfg(10, 3, 3), &unit()).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 0));
        assert_eq!(img.n_discarded, 10);
        assert!(img.discard_warning());
    }

    #[test]
    fn closing_edges_land_in_last_tile() {
        let samples = [IqSample::new(1.0, -1.0), IqSample::new(-1.0, 1.0)];
        let img = make_image(&samples, &cfg(2, 2, 2), &unit()).unwrap();
        assert_eq!(img.pixels, vec![1, 0, 0, 1]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(make_image(&[IqSample::default()], &cfg(2, 2, 2), &unit()).is_err());
    }

    #[test]
    fn color_mode_uses_colormap() {
        let samples = vec![IqSample::new(-0.5, 0.5); 3];
        let c = ImageConfig {
            mode: ImageMode::Color,
            ..cfg(3, 2, 2)
        };
        let img = make_image(&samples, &c, &unit()).unwrap();
        assert_eq!(img.pixels.len(), 12);
        assert_eq!(&img.pixels[..3], &COLORMAP[3]);
        assert_eq!(&img.pixels[3..6], &COLORMAP[0]);
    }

    #[test]
    fn colormap_ramps_blue_green_red() {
        assert_eq!(COLORMAP[0], [0, 0, 255]);
        assert_eq!(COLORMAP[127], [0, 255, 0]);
        assert_eq!(COLORMAP[255], [255, 0, 0]);
    }

    #[test]
    fn windows_drop_trailing_partial() {
        let n = 50;
        let c = cfg(n, 4, 4);
        let rec = |len| IqRecording::from_samples(vec![IqSample::new(0.2, -0.3); len]);
        assert_eq!(window_stream(&rec(2 * n), &c, &unit()).unwrap().len(), 2);
        assert_eq!(window_stream(&rec(2 * n - 1), &c, &unit()).unwrap().len(), 1);
        let single = rec(n);
        assert_eq!(
            window_stream(&single, &c, &unit()).unwrap(),
            vec![make_image(&single.samples, &c, &unit()).unwrap()]
        );
    }
}
