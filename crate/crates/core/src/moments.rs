//! Image moments, Hu invariants and the shape dissimilarity measure.
//!
//! Raw moments of a binary image are integer sums, so central moments up to
//! third order are computed from integer numerators (i128) divided by the
//! appropriate power of the area. That keeps them bit-identical under
//! translation, which the invariance guarantees (and tests) rely on.
//!
//! The seven Hu invariants span many orders of magnitude, so comparisons use
//! a signed log transfer: `m_i = sign(I_i) * ln|I_i|`, with `m_i = 0` when
//! `|I_i|` is below [`TRANSFER_EPSILON`]. Dissimilarity between two
//! transferred vectors is the worst relative deviation, measured against the
//! first argument's components; components too small to normalize by are
//! skipped. Note the measure is deliberately asymmetric: the first argument
//! is the candidate shape under test.

use thiserror::Error;

use crate::raster::BinaryImage;

/// Magnitude below which invariants are treated as zero by the log
/// transfer, and transferred components are skipped as dissimilarity
/// denominators.
pub const TRANSFER_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MomentsError {
    #[error("image has no foreground pixels, moments are undefined")]
    EmptyImage,
    #[error("normalized moments require order p+q >= 2, got p={p} q={q}")]
    BadOrder { p: u32, q: u32 },
}

/// Integer raw moments through third order: `m[p][q] = sum x^p y^q`.
#[derive(Debug, Clone, Copy)]
struct RawMoments {
    m00: i128,
    m10: i128,
    m01: i128,
    m11: i128,
    m20: i128,
    m02: i128,
    m21: i128,
    m12: i128,
    m30: i128,
    m03: i128,
}

fn raw_moments(img: &BinaryImage) -> RawMoments {
    let mut m = RawMoments {
        m00: 0,
        m10: 0,
        m01: 0,
        m11: 0,
        m20: 0,
        m02: 0,
        m21: 0,
        m12: 0,
        m30: 0,
        m03: 0,
    };
    for p in img.foreground() {
        let x = p.x as i128;
        let y = p.y as i128;
        m.m00 += 1;
        m.m10 += x;
        m.m01 += y;
        m.m11 += x * y;
        m.m20 += x * x;
        m.m02 += y * y;
        m.m21 += x * x * y;
        m.m12 += x * y * y;
        m.m30 += x * x * x;
        m.m03 += y * y * y;
    }
    m
}

/// Central moments through third order as exact integer numerators over
/// powers of `m00`: second order over `m00`, third order over `m00^2`.
#[derive(Debug, Clone, Copy)]
struct CentralNumerators {
    mu20: i128,
    mu02: i128,
    mu11: i128,
    mu30: i128,
    mu21: i128,
    mu12: i128,
    mu03: i128,
}

fn central_numerators(m: &RawMoments) -> CentralNumerators {
    let RawMoments {
        m00,
        m10,
        m01,
        m11,
        m20,
        m02,
        m21,
        m12,
        m30,
        m03,
    } = *m;
    CentralNumerators {
        mu20: m00 * m20 - m10 * m10,
        mu02: m00 * m02 - m01 * m01,
        mu11: m00 * m11 - m10 * m01,
        mu30: m00 * m00 * m30 - 3 * m00 * m10 * m20 + 2 * m10 * m10 * m10,
        mu21: m00 * m00 * m21 - 2 * m00 * m10 * m11 - m00 * m01 * m20 + 2 * m10 * m10 * m01,
        mu12: m00 * m00 * m12 - 2 * m00 * m01 * m11 - m00 * m10 * m02 + 2 * m01 * m01 * m10,
        mu03: m00 * m00 * m03 - 3 * m00 * m01 * m02 + 2 * m01 * m01 * m01,
    }
}

/// Central moment `mu_pq`. Exact up to third order; higher orders fall back
/// to direct summation around the floating-point centroid. First-order
/// central moments are identically zero by definition and returned as such.
pub fn central_moment(img: &BinaryImage, p: u32, q: u32) -> Result<f64, MomentsError> {
    let m = raw_moments(img);
    if m.m00 == 0 {
        return Err(MomentsError::EmptyImage);
    }
    let c = central_numerators(&m);
    let m00 = m.m00 as f64;
    Ok(match (p, q) {
        (0, 0) => m00,
        (1, 0) | (0, 1) => 0.0,
        (2, 0) => c.mu20 as f64 / m00,
        (0, 2) => c.mu02 as f64 / m00,
        (1, 1) => c.mu11 as f64 / m00,
        (3, 0) => c.mu30 as f64 / (m00 * m00),
        (2, 1) => c.mu21 as f64 / (m00 * m00),
        (1, 2) => c.mu12 as f64 / (m00 * m00),
        (0, 3) => c.mu03 as f64 / (m00 * m00),
        _ => {
            let cx = m.m10 as f64 / m00;
            let cy = m.m01 as f64 / m00;
            img.foreground()
                .map(|px| (px.x as f64 - cx).powi(p as i32) * (px.y as f64 - cy).powi(q as i32))
                .sum()
        }
    })
}

/// Scale-normalized central moment `eta_pq = mu_pq / mu00^(1 + (p+q)/2)`.
pub fn normalized_moment(img: &BinaryImage, p: u32, q: u32) -> Result<f64, MomentsError> {
    if p + q < 2 {
        return Err(MomentsError::BadOrder { p, q });
    }
    let mu = central_moment(img, p, q)?;
    let m00 = central_moment(img, 0, 0)?;
    let gamma = 1.0 + (p + q) as f64 / 2.0;
    Ok(mu / m00.powf(gamma))
}

/// The seven Hu invariants of a shape, raw and log-transferred.
#[derive(Debug, Clone, PartialEq)]
pub struct HuVector {
    pub invariants: [f64; 7],
    pub transferred: [f64; 7],
}

/// Signed log transfer: `sign(I) * ln|I|`, zero when `|I|` is below
/// [`TRANSFER_EPSILON`].
pub fn transfer(invariants: &[f64; 7]) -> [f64; 7] {
    let mut out = [0.0; 7];
    for (dst, &i) in out.iter_mut().zip(invariants) {
        if i.abs() >= TRANSFER_EPSILON {
            *dst = i.signum() * i.abs().ln();
        }
    }
    out
}

/// Computes the seven Hu moment invariants of the image's foreground.
pub fn hu_set(img: &BinaryImage) -> Result<HuVector, MomentsError> {
    let m = raw_moments(img);
    if m.m00 == 0 {
        return Err(MomentsError::EmptyImage);
    }
    let c = central_numerators(&m);
    let m00 = m.m00 as f64;
    // eta_pq = mu_pq / m00^(1+(p+q)/2) with mu already over m00^k, so one
    // division by m00^(k+1+(p+q)/2) per moment.
    let n20 = c.mu20 as f64 / m00.powi(3);
    let n02 = c.mu02 as f64 / m00.powi(3);
    let n11 = c.mu11 as f64 / m00.powi(3);
    let pow45 = m00.powf(4.5);
    let n30 = c.mu30 as f64 / pow45;
    let n21 = c.mu21 as f64 / pow45;
    let n12 = c.mu12 as f64 / pow45;
    let n03 = c.mu03 as f64 / pow45;

    let p = n20 - n02;
    let q = n30 - 3.0 * n12;
    let r = n30 + n12;
    let y = 3.0 * n21 - n03;
    let z = n21 + n03;

    let invariants = [
        n20 + n02,
        p * p + 4.0 * n11 * n11,
        q * q + y * y,
        r * r + z * z,
        q * r * (r * r - 3.0 * z * z) + y * z * (3.0 * r * r - z * z),
        p * (r * r - z * z) + 4.0 * n11 * r * z,
        y * r * (r * r - 3.0 * z * z) - q * z * (3.0 * r * r - z * z),
    ];
    Ok(HuVector {
        transferred: transfer(&invariants),
        invariants,
    })
}

/// Worst relative deviation between transferred Hu vectors, normalized by
/// the first argument's components. Components of `a` smaller in magnitude
/// than [`TRANSFER_EPSILON`] are skipped; if everything is skipped the
/// result is 0 for identical vectors and infinity otherwise.
pub fn dissimilarity(a: &HuVector, b: &HuVector) -> f64 {
    let mut worst: Option<f64> = None;
    for i in 0..7 {
        let ma = a.transferred[i];
        if ma.abs() < TRANSFER_EPSILON {
            continue;
        }
        let rel = (ma - b.transferred[i]).abs() / ma.abs();
        worst = Some(worst.map_or(rel, |w: f64| w.max(rel)));
    }
    match worst {
        Some(d) => d,
        None if a.transferred == b.transferred => 0.0,
        None => f64::INFINITY,
    }
}
