//! Binary mathematical morphology with square structuring elements.
//!
//! Erosion keeps a pixel when the whole structuring element, anchored at its
//! origin, fits inside the foreground; dilation marks every pixel covered by
//! the element anchored at some foreground pixel. Pixels outside the canvas
//! count as background (zero padding), so erosion always shrinks at the
//! borders and dilation never wraps.
//!
//! A square element is separable: a 2-D pass is two 1-D passes (horizontal
//! then vertical). Combined with the bit-packed rows of
//! [`crate::raster::BinaryImage`], each 1-D pass is `n` shifted
//! word-wise AND/OR sweeps, which keeps full sweeps over 432x288 rasters in
//! the microsecond range.

use thiserror::Error;

use crate::raster::BinaryImage;

/// Smallest and largest supported structuring element sizes. The sweep over
/// this range is what the pipeline optimizes, so sizes outside it are
/// rejected up front.
pub const MIN_SE_SIZE: usize = 2;
pub const MAX_SE_SIZE: usize = 9;

/// An all-ones square structuring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquareSe {
    pub size: usize,
    /// Anchor cell, `(floor((n-1)/2), floor((n-1)/2))`: the true center for
    /// odd sizes, the upper-left of the central quad for even sizes.
    pub origin: (usize, usize),
}

impl SquareSe {
    /// The element reflected through its origin; dilation by `self` and
    /// erosion by the reflection are adjoint, which the duality tests use.
    pub fn reflected(&self) -> SquareSe {
        let n = self.size;
        SquareSe {
            size: n,
            origin: (n - 1 - self.origin.0, n - 1 - self.origin.1),
        }
    }
}

#[derive(Debug, Error)]
pub enum MorphologyError {
    #[error("structuring element size {0} outside supported range {MIN_SE_SIZE}..={MAX_SE_SIZE}")]
    InvalidSize(usize),
}

/// Builds the `n`-by-`n` all-ones element for `n` in 2..=9.
pub fn square_se(n: usize) -> Result<SquareSe, MorphologyError> {
    if !(MIN_SE_SIZE..=MAX_SE_SIZE).contains(&n) {
        return Err(MorphologyError::InvalidSize(n));
    }
    let o = (n - 1) / 2;
    Ok(SquareSe {
        size: n,
        origin: (o, o),
    })
}

/// Writes `src` shifted by `shift` into `dst`: `dst(x) = src(x + shift)`,
/// with zeros shifted in from both ends. `last_mask` clears padding bits of
/// the final word.
fn shift_row_into(src: &[u64], dst: &mut [u64], shift: isize, last_mask: u64) {
    let len = src.len();
    if shift >= 0 {
        let w = shift as usize / 64;
        let b = shift as usize % 64;
        for i in 0..len {
            let lo = if i + w < len { src[i + w] >> b } else { 0 };
            let hi = if b > 0 && i + w + 1 < len {
                src[i + w + 1] << (64 - b)
            } else {
                0
            };
            dst[i] = lo | hi;
        }
    } else {
        let k = (-shift) as usize;
        let w = k / 64;
        let b = k % 64;
        for i in (0..len).rev() {
            let lo = if i >= w { src[i - w] << b } else { 0 };
            let hi = if b > 0 && i > w {
                src[i - w - 1] >> (64 - b)
            } else {
                0
            };
            dst[i] = lo | hi;
        }
        dst[len - 1] &= last_mask;
    }
}

/// 1-D pass along rows: `out(x, y) = OP over s in lo..=hi of img(x+s, y)`.
fn horizontal_combine(img: &BinaryImage, lo: isize, hi: isize, and_mode: bool) -> BinaryImage {
    let (width, height) = img.dimensions();
    let mut out = BinaryImage::new(width, height);
    let mask = img.last_word_mask();
    let mut shifted = vec![0u64; img.words_per_row()];
    for y in 0..height {
        shift_row_into(img.row(y), &mut shifted, lo, mask);
        out.row_mut(y).copy_from_slice(&shifted);
        for s in lo + 1..=hi {
            shift_row_into(img.row(y), &mut shifted, s, mask);
            for (acc, word) in out.row_mut(y).iter_mut().zip(&shifted) {
                if and_mode {
                    *acc &= word;
                } else {
                    *acc |= word;
                }
            }
        }
    }
    out
}

/// 1-D pass along columns: `out(x, y) = OP over t in lo..=hi of img(x, y+t)`.
fn vertical_combine(img: &BinaryImage, lo: isize, hi: isize, and_mode: bool) -> BinaryImage {
    let (width, height) = img.dimensions();
    let mut out = BinaryImage::new(width, height);
    for y in 0..height {
        let mut initialized = false;
        let mut dead = false;
        for t in lo..=hi {
            let yy = y as isize + t;
            if yy < 0 || yy >= height as isize {
                if and_mode {
                    dead = true;
                    break;
                }
                continue;
            }
            let src_row = yy as usize;
            if !initialized {
                let row = img.row(src_row).to_vec();
                out.row_mut(y).copy_from_slice(&row);
                initialized = true;
            } else {
                let row = img.row(src_row).to_vec();
                for (acc, word) in out.row_mut(y).iter_mut().zip(&row) {
                    if and_mode {
                        *acc &= word;
                    } else {
                        *acc |= word;
                    }
                }
            }
        }
        if and_mode && dead {
            out.row_mut(y).fill(0);
        }
    }
    out
}

/// Erosion: keeps pixel `z` when the element anchored at `z` lies entirely
/// in the foreground (out-of-canvas cells count as background).
pub fn erode(img: &BinaryImage, se: &SquareSe) -> BinaryImage {
    let n = se.size as isize;
    let (ox, oy) = (se.origin.0 as isize, se.origin.1 as isize);
    let h = horizontal_combine(img, -ox, n - 1 - ox, true);
    vertical_combine(&h, -oy, n - 1 - oy, true)
}

/// Dilation: marks every pixel covered by the element anchored at any
/// foreground pixel.
pub fn dilate(img: &BinaryImage, se: &SquareSe) -> BinaryImage {
    let n = se.size as isize;
    let (ox, oy) = (se.origin.0 as isize, se.origin.1 as isize);
    let h = horizontal_combine(img, ox - (n - 1), ox, false);
    vertical_combine(&h, oy - (n - 1), oy, false)
}

/// Opening: erosion followed by dilation with the same element. Removes
/// foreground features thinner than the element while (mostly) restoring
/// larger regions.
pub fn open(img: &BinaryImage, se: &SquareSe) -> BinaryImage {
    dilate(&erode(img, se), se)
}
