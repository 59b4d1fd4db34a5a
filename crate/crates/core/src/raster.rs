//! Rasterization of the wind power curve scatter into a binary image.
//!
//! The transform maps the (wind speed, power) ranges of a dataset onto a
//! fixed-size pixel grid. Each point is drawn as a `stamp`-by-`stamp` block
//! anchored at its mapped pixel; anchors are clamped so blocks always stay
//! inside the canvas. Power grows upward, so pixel `y` is inverted.
//! Points already labeled `type1` are excluded from both the range fit and
//! the drawing, matching the pipeline order (rule-based pre-cleaning first).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::scada::{Dataset, Label};

const WORD_BITS: usize = 64;

/// A binary image stored as bit-packed row-major `u64` words.
///
/// Bits beyond `width` in the last word of each row are always zero, so
/// equality, popcounts and word-wise set operations are semantic.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BinaryImage {
    /// Creates an all-background image. Both dimensions must be at least 1.
    pub fn new(width: usize, height: usize) -> Self {
        assert!(
            width >= 1 && height >= 1,
            "image dimensions must be at least 1x1"
        );
        let words_per_row = width.div_ceil(WORD_BITS);
        BinaryImage {
            width,
            height,
            words_per_row,
            words: vec![0; words_per_row * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut img = BinaryImage::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    img.set(x, y, true);
                }
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x},{y}) out of bounds"
        );
        let word = self.words[y * self.words_per_row + x / WORD_BITS];
        word >> (x % WORD_BITS) & 1 == 1
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x},{y}) out of bounds"
        );
        let word = &mut self.words[y * self.words_per_row + x / WORD_BITS];
        let mask = 1u64 << (x % WORD_BITS);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    /// Sets a `size`-by-`size` block with its top-left corner at `(x, y)`.
    /// The block must fit inside the image.
    pub fn stamp(&mut self, x: usize, y: usize, size: usize) {
        assert!(
            x + size <= self.width && y + size <= self.height,
            "stamp at ({x},{y}) size {size} exceeds {}x{}",
            self.width,
            self.height
        );
        for yy in y..y + size {
            for xx in x..x + size {
                self.set(xx, yy, true);
            }
        }
    }

    /// True if any pixel in the `size`-by-`size` block at `(x, y)` is set.
    pub fn block_any(&self, x: usize, y: usize, size: usize) -> bool {
        let x_end = (x + size).min(self.width);
        let y_end = (y + size).min(self.height);
        for yy in y..y_end {
            for xx in x..x_end {
                if self.get(xx, yy) {
                    return true;
                }
            }
        }
        false
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    /// True if every foreground pixel of `self` is also set in `other`.
    /// Images must share dimensions.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        assert_eq!(self.dimensions(), other.dimensions(), "dimension mismatch");
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    /// Iterates foreground pixels in raster order (row by row, left to
    /// right).
    pub fn foreground(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.words_per_row).flat_map(move |wi| {
                let mut word = self.words[y * self.words_per_row + wi];
                std::iter::from_fn(move || {
                    if word == 0 {
                        None
                    } else {
                        let bit = word.trailing_zeros() as usize;
                        word &= word - 1;
                        Some(PixelCoord {
                            x: wi * WORD_BITS + bit,
                            y,
                        })
                    }
                })
            })
        })
    }

    pub(crate) fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub(crate) fn row(&self, y: usize) -> &[u64] {
        &self.words[y * self.words_per_row..(y + 1) * self.words_per_row]
    }

    pub(crate) fn row_mut(&mut self, y: usize) -> &mut [u64] {
        &mut self.words[y * self.words_per_row..(y + 1) * self.words_per_row]
    }

    /// Mask with ones on every valid bit of the last word in a row.
    pub(crate) fn last_word_mask(&self) -> u64 {
        let rem = self.width % WORD_BITS;
        if rem == 0 {
            u64::MAX
        } else {
            (1u64 << rem) - 1
        }
    }
}

impl fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BinaryImage({}x{}, {} foreground)",
            self.width,
            self.height,
            self.count_ones()
        )
    }
}

/// A pixel position; `x` grows right, `y` grows down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelCoord {
    pub y: usize,
    pub x: usize,
}

impl PixelCoord {
    pub fn new(x: usize, y: usize) -> Self {
        PixelCoord { x, y }
    }
}

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("degenerate {axis} range: all values equal, nothing to rasterize")]
    DegenerateRange { axis: &'static str },
    #[error("invalid raster dimensions: {0}")]
    InvalidDimensions(String),
    #[error("no points available to fit the raster transform")]
    EmptyDataset,
    #[error("unsupported image format `{0}`, expected `pgm` or `png`")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Affine map from (wind speed, power) space to pixel anchors.
///
/// The transform is frozen when built: applying it never re-fits ranges, so
/// the same instance maps repeatedly and deterministically. Anchors live in
/// `[0, x_max] x [0, y_max]` where `x_max = width - stamp` and
/// `y_max = height - stamp`, which keeps every stamped block on the canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterTransform {
    pub v_min: f64,
    pub v_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub dx: f64,
    pub dy: f64,
    pub x_max: usize,
    pub y_max: usize,
    pub width: usize,
    pub height: usize,
    pub stamp: usize,
}

impl RasterTransform {
    /// Builds a transform from explicit value ranges. Range checks are
    /// negated comparisons so NaN bounds fail them.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn from_ranges(
        v_min: f64,
        v_max: f64,
        p_min: f64,
        p_max: f64,
        width: usize,
        height: usize,
        stamp: usize,
    ) -> Result<Self, RasterError> {
        if stamp < 1 {
            return Err(RasterError::InvalidDimensions(
                "stamp must be at least 1".into(),
            ));
        }
        if width < stamp || height < stamp {
            return Err(RasterError::InvalidDimensions(format!(
                "canvas {width}x{height} cannot hold a {stamp}x{stamp} stamp"
            )));
        }
        if !(v_max > v_min) {
            return Err(RasterError::DegenerateRange { axis: "wind_speed" });
        }
        if !(p_max > p_min) {
            return Err(RasterError::DegenerateRange { axis: "power" });
        }
        let x_max = width - stamp;
        let y_max = height - stamp;
        Ok(RasterTransform {
            v_min,
            v_max,
            p_min,
            p_max,
            dx: x_max as f64 / (v_max - v_min),
            dy: y_max as f64 / (p_max - p_min),
            x_max,
            y_max,
            width,
            height,
            stamp,
        })
    }

    /// Maps a value pair to its stamp anchor. Rounds to nearest (ties away
    /// from zero) and clamps to the anchor range, so out-of-range values pin
    /// to the border.
    pub fn map_point(&self, wind_speed: f64, power: f64) -> PixelCoord {
        let x = ((wind_speed - self.v_min) * self.dx).round();
        let y = (self.y_max as f64 - (power - self.p_min) * self.dy).round();
        PixelCoord {
            x: x.clamp(0.0, self.x_max as f64) as usize,
            y: y.clamp(0.0, self.y_max as f64) as usize,
        }
    }
}

/// Fits a transform to the value ranges of all points not labeled `type1`.
pub fn build_transform(
    dataset: &Dataset,
    width: usize,
    height: usize,
    stamp: usize,
) -> Result<RasterTransform, RasterError> {
    let mut any = false;
    let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut p_min, mut p_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for point in dataset.points.iter().filter(|p| p.label != Label::Type1) {
        any = true;
        v_min = v_min.min(point.wind_speed);
        v_max = v_max.max(point.wind_speed);
        p_min = p_min.min(point.power);
        p_max = p_max.max(point.power);
    }
    if !any {
        return Err(RasterError::EmptyDataset);
    }
    RasterTransform::from_ranges(v_min, v_max, p_min, p_max, width, height, stamp)
}

/// Draws every non-`type1` point as a stamp block.
pub fn rasterize(dataset: &Dataset, transform: &RasterTransform) -> BinaryImage {
    let mut img = BinaryImage::new(transform.width, transform.height);
    for point in dataset.points.iter().filter(|p| p.label != Label::Type1) {
        let anchor = transform.map_point(point.wind_speed, point.power);
        img.stamp(anchor.x, anchor.y, transform.stamp);
    }
    img
}

/// Output encodings for binary images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl FromStr for ImageFormat {
    type Err = RasterError;

    fn from_str(s: &str) -> Result<Self, RasterError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pgm" => Ok(ImageFormat::Pgm),
            "png" => Ok(ImageFormat::Png),
            other => Err(RasterError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Writes the image with foreground black (0) and background white (255).
pub fn write_image<W: Write>(
    img: &BinaryImage,
    mut sink: W,
    format: ImageFormat,
) -> Result<(), RasterError> {
    let mut bytes = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            bytes.push(if img.get(x, y) { 0u8 } else { 255u8 });
        }
    }
    match format {
        ImageFormat::Pgm => {
            write!(sink, "P5\n{} {}\n255\n", img.width(), img.height())?;
            sink.write_all(&bytes)?;
        }
        ImageFormat::Png => {
            use image::ImageEncoder;
            let encoder = image::codecs::png::PngEncoder::new(&mut sink);
            encoder.write_image(
                &bytes,
                img.width() as u32,
                img.height() as u32,
                image::ExtendedColorType::L8,
            )?;
        }
    }
    sink.flush()?;
    Ok(())
}
