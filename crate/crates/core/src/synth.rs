//! Synthetic SCADA data with known ground truth, plus the built-in
//! reference curve image the pipeline compares shapes against.
//!
//! The generator draws true wind speeds from a Weibull distribution (shape
//! 2, scale 0.55 x rated speed, truncated a little past cut-out), pushes
//! them through an idealized logistic power curve, and perturbs power with
//! Gaussian noise clamped at zero. The recorded wind speed carries its own
//! Gaussian measurement error (anemometers sit behind the rotor and miss
//! the wind the blades actually saw), which is what makes real power-curve
//! clouds wide in the steep mid-section while curtailment bands stay thin.
//! Abnormal points are injected by construction:
//!
//! * `type1`: wind above cut-in, power uniform in [-30, 0) kW
//! * `type2`: uniform power rejected until it sits at least three effective
//!   sigmas off the ideal curve, where the effective sigma combines power
//!   noise with slope-amplified wind measurement noise
//! * `type3`: horizontal curtailment bands at configurable power levels,
//!   from the wind speed where the ideal curve reaches the band level out
//!   to the populated end of the cloud's rated arm
//!
//! Every draw comes from one seeded ChaCha8 stream, so a (config, seed)
//! pair reproduces the dataset bit for bit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Weibull};
use thiserror::Error;

use crate::raster::{BinaryImage, RasterError, RasterTransform};
use crate::scada::{validate_spec, Dataset, Label, ScadaPoint, TurbineSpec};

/// Vertical padding of the reference raster's power range, as a fraction of
/// rated power. Leaves room for noise overshoot above rated power.
const POWER_PAD_FRAC: f64 = 0.022;

/// Curtailment bands stop at this quantile of the default wind
/// distribution; beyond it real datasets are too sparse to matter.
const BAND_WIND_QUANTILE: f64 = 0.998;

/// Fixed seed and opening size for the built-in reference: a clean cloud
/// from this generator run through the same rasterization and a mid-range
/// opening, i.e. what the pipeline's own extraction looks like on healthy
/// data. The draw count follows the dataset under test (ink density drives
/// how shapes respond to opening), clamped to stay solid yet cheap.
const REFERENCE_SEED: u64 = 715_517;
const REFERENCE_OPENING: usize = 5;
const REFERENCE_MIN_N: usize = 1_000;
const REFERENCE_MAX_N: usize = 200_000;

/// Highest wind speed the synthetic bands treat as populated: the
/// [`BAND_WIND_QUANTILE`] of the default Weibull draw, capped at cut-out.
fn arm_end(spec: &TurbineSpec) -> f64 {
    let scale = 0.55 * spec.rated_speed;
    (scale * (-(1.0 - BAND_WIND_QUANTILE).ln()).sqrt()).min(spec.cut_out)
}

/// Vertical jitter of curtailment bands, as a fraction of rated power.
/// Keeps bands a few pixels thick: dense enough to rasterize as solid
/// strips, thin enough that mid-size openings remove them.
const BAND_JITTER_FRAC: f64 = 0.0015;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid abnormality fractions: {0}")]
    InvalidFractions(String),
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("invalid turbine spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Configuration for [`generate`].
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub spec: TurbineSpec,
    pub n_points: usize,
    /// Gaussian noise sigma on power, in kW.
    pub noise_sigma: f64,
    /// Gaussian measurement noise on the recorded wind speed, in m/s.
    pub wind_noise_sigma: f64,
    pub type1_frac: f64,
    pub type2_frac: f64,
    pub type3_frac: f64,
    /// Curtailment band power levels in kW; type3 points cycle through
    /// them. Must be non-empty when `type3_frac > 0`.
    pub type3_levels: Vec<f64>,
    pub seed: u64,
}

impl SynthConfig {
    /// Defaults: 30k points, 1.5% rated power noise, wind measurement noise
    /// at 0.8% of the ramp width, 2/5/10 percent type1/2/3, one band at 40%
    /// rated power.
    pub fn for_spec(spec: TurbineSpec) -> Self {
        SynthConfig {
            spec,
            n_points: 30_000,
            noise_sigma: 0.015 * spec.rated_power,
            wind_noise_sigma: 0.008 * (spec.rated_speed - spec.cut_in),
            type1_frac: 0.02,
            type2_frac: 0.05,
            type3_frac: 0.10,
            type3_levels: vec![0.4 * spec.rated_power],
            seed: 1,
        }
    }
}

/// Idealized wind power curve: zero outside [cut_in, cut_out], rated at and
/// above rated speed, and a logistic ramp in between that stays within 1%
/// of the endpoints at the knots.
pub fn ideal_power(wind_speed: f64, spec: &TurbineSpec) -> f64 {
    if wind_speed < spec.cut_in || wind_speed > spec.cut_out {
        0.0
    } else if wind_speed >= spec.rated_speed {
        spec.rated_power
    } else {
        let mid = (spec.cut_in + spec.rated_speed) / 2.0;
        let steep = 2.0 * 199f64.ln() / (spec.rated_speed - spec.cut_in);
        spec.rated_power / (1.0 + (-steep * (wind_speed - mid)).exp())
    }
}

/// Derivative of the ideal curve in kW per m/s, zero off the ramp.
fn ideal_slope(wind_speed: f64, spec: &TurbineSpec) -> f64 {
    if wind_speed < spec.cut_in || wind_speed >= spec.rated_speed {
        0.0
    } else {
        let steep = 2.0 * 199f64.ln() / (spec.rated_speed - spec.cut_in);
        let s = ideal_power(wind_speed, spec) / spec.rated_power;
        spec.rated_power * steep * s * (1.0 - s)
    }
}

/// Power spread expected at a recorded wind speed: power noise plus wind
/// measurement noise amplified by the local curve slope.
fn effective_sigma(wind_speed: f64, cfg: &SynthConfig) -> f64 {
    let amplified = ideal_slope(wind_speed, &cfg.spec) * cfg.wind_noise_sigma;
    (cfg.noise_sigma * cfg.noise_sigma + amplified * amplified).sqrt()
}

/// Wind speed at which the ideal curve first reaches `level` kW, found by
/// bisection on the monotone ramp.
fn crossing_speed(level: f64, spec: &TurbineSpec) -> f64 {
    if level <= ideal_power(spec.cut_in, spec) {
        return spec.cut_in;
    }
    if level >= spec.rated_power {
        return spec.rated_speed;
    }
    let (mut lo, mut hi) = (spec.cut_in, spec.rated_speed);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ideal_power(mid, spec) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// Sigma checks are negated comparisons so NaN fails them.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn validate_config(cfg: &SynthConfig) -> Result<(), SynthError> {
    let spec_violations = validate_spec(&cfg.spec);
    if !spec_violations.is_empty() {
        return Err(SynthError::InvalidSpec(spec_violations.join("; ")));
    }
    if cfg.n_points == 0 {
        return Err(SynthError::InvalidConfig(
            "n_points must be at least 1".into(),
        ));
    }
    for (name, sigma) in [
        ("noise_sigma", cfg.noise_sigma),
        ("wind_noise_sigma", cfg.wind_noise_sigma),
    ] {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(SynthError::InvalidConfig(format!(
                "{name} must be finite and non-negative, got {sigma}"
            )));
        }
    }
    for (name, frac) in [
        ("type1_frac", cfg.type1_frac),
        ("type2_frac", cfg.type2_frac),
        ("type3_frac", cfg.type3_frac),
    ] {
        if !(0.0..1.0).contains(&frac) {
            return Err(SynthError::InvalidFractions(format!(
                "{name} must lie in [0, 1), got {frac}"
            )));
        }
    }
    if cfg.type3_frac > 0.0 && cfg.type3_levels.is_empty() {
        return Err(SynthError::InvalidConfig(
            "type3_frac > 0 requires at least one band level".into(),
        ));
    }
    Ok(())
}

/// Generates a dataset and its ground-truth labels. Points come back
/// unlabeled (the truth vector is separate) so the pipeline can be run on
/// them unmodified. Per-type counts are `round(frac * n)`, computed once.
pub fn generate(cfg: &SynthConfig) -> Result<(Dataset, Vec<Label>), SynthError> {
    validate_config(cfg)?;
    let n = cfg.n_points;
    let n1 = (cfg.type1_frac * n as f64).round() as usize;
    let n2 = (cfg.type2_frac * n as f64).round() as usize;
    let n3 = (cfg.type3_frac * n as f64).round() as usize;
    let abnormal = n1 + n2 + n3;
    if abnormal > n {
        return Err(SynthError::InvalidFractions(format!(
            "rounded abnormal counts ({abnormal}) exceed n_points ({n})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut truth = Vec::with_capacity(n);
    truth.extend(std::iter::repeat_n(Label::Type1, n1));
    truth.extend(std::iter::repeat_n(Label::Type2, n2));
    truth.extend(std::iter::repeat_n(Label::Type3, n3));
    truth.extend(std::iter::repeat_n(Label::Normal, n - abnormal));
    truth.shuffle(&mut rng);

    let spec = cfg.spec;
    let weibull = Weibull::new(0.55 * spec.rated_speed, 2.0)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let noise =
        Normal::new(0.0, cfg.noise_sigma).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let wind_noise = Normal::new(0.0, cfg.wind_noise_sigma)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let band_jitter = Normal::new(0.0, BAND_JITTER_FRAC * spec.rated_power)
        .expect("jitter sigma is non-negative");
    let v_cap = spec.cut_out + 2.0;
    let draw_wind = |rng: &mut ChaCha8Rng| loop {
        let v: f64 = weibull.sample(rng);
        if v <= v_cap {
            return v;
        }
    };

    let band_starts: Vec<f64> = cfg
        .type3_levels
        .iter()
        .map(|&level| crossing_speed(level, &spec))
        .collect();
    let mut band_counter = 0usize;

    let mut points = Vec::with_capacity(n);
    for (i, &label) in truth.iter().enumerate() {
        let (v, p) = match label {
            Label::Normal | Label::Unlabeled => {
                let v_true = draw_wind(&mut rng);
                let p = (ideal_power(v_true, &spec) + noise.sample(&mut rng)).max(0.0);
                let v = (v_true + wind_noise.sample(&mut rng)).clamp(0.0, v_cap);
                (v, p)
            }
            Label::Type1 => {
                let v = loop {
                    let v = draw_wind(&mut rng);
                    if v > spec.cut_in {
                        break v;
                    }
                };
                (v, rng.random_range(-30.0..0.0))
            }
            Label::Type2 => {
                let mut v = draw_wind(&mut rng);
                let mut p = rng.random_range(0.0..spec.rated_power);
                for _ in 0..1000 {
                    if (p - ideal_power(v, &spec)).abs() >= 3.0 * effective_sigma(v, cfg) {
                        break;
                    }
                    v = draw_wind(&mut rng);
                    p = rng.random_range(0.0..spec.rated_power);
                }
                (v, p)
            }
            Label::Type3 => {
                let band = band_counter % cfg.type3_levels.len();
                band_counter += 1;
                let level = cfg.type3_levels[band];
                // Curtailment holds whenever the wind could exceed the band
                // level, so bands run to the populated end of the arm.
                let v_hi = arm_end(&spec);
                let v_lo = band_starts[band].min(v_hi);
                let v = if v_lo < v_hi {
                    rng.random_range(v_lo..v_hi)
                } else {
                    v_hi
                };
                let p = (level + band_jitter.sample(&mut rng)).max(0.0);
                (v, p)
            }
        };
        points.push(ScadaPoint::new(timestamp(i), v, p));
    }

    let dataset = Dataset::new(spec, format!("synth-seed{}", cfg.seed), points);
    Ok((dataset, truth))
}

/// Turns a known-clean dataset into a reference curve image: the points are
/// rasterized over the spec's padded operating ranges and opened with a
/// mid-range 5x5 structuring element, which is exactly
/// what the pipeline's own extraction produces on healthy data. Candidate
/// regions are then scored against a shape of the same species instead of a
/// hand-drawn silhouette.
pub fn reference_from_dataset(
    dataset: &Dataset,
    width: usize,
    height: usize,
    stamp: usize,
) -> Result<BinaryImage, SynthError> {
    let spec = &dataset.spec;
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(SynthError::InvalidSpec(violations.join("; ")));
    }
    let pad = POWER_PAD_FRAC * spec.rated_power;
    let transform = RasterTransform::from_ranges(
        0.0,
        spec.cut_out,
        -pad,
        spec.rated_power + pad,
        width,
        height,
        stamp,
    )?;
    let mut img = BinaryImage::new(width, height);
    for point in &dataset.points {
        let anchor = transform.map_point(point.wind_speed, point.power);
        img.stamp(anchor.x, anchor.y, stamp);
    }
    let se = crate::morphology::square_se(REFERENCE_OPENING).expect("reference opening in range");
    Ok(crate::morphology::open(&img, &se))
}

/// Renders the built-in reference curve image: a clean synthetic cloud
/// (fixed seed, no abnormal points, roughly `n_points` draws) fed through
/// [`reference_from_dataset`]. Pass the size of the dataset
/// under test so the reference ink density matches it. Deterministic given
/// the arguments.
pub fn reference_image(
    spec: &TurbineSpec,
    width: usize,
    height: usize,
    stamp: usize,
    n_points: usize,
) -> Result<BinaryImage, SynthError> {
    let cfg = SynthConfig {
        n_points: n_points.clamp(REFERENCE_MIN_N, REFERENCE_MAX_N),
        seed: REFERENCE_SEED,
        type1_frac: 0.0,
        type2_frac: 0.0,
        type3_frac: 0.0,
        ..SynthConfig::for_spec(*spec)
    };
    let (dataset, _) = generate(&cfg)?;
    reference_from_dataset(&dataset, width, height, stamp)
}

fn is_leap(year: u64) -> bool {
    year.is_multiple_of(4) && (!year.is_multiple_of(100) || year.is_multiple_of(400))
}

fn days_in_month(year: u64, month: u64) -> u64 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => unreachable!("month out of range"),
    }
}

/// ISO timestamp of sample `i` on a 10-minute grid from 2016-01-01T00:00:00.
fn timestamp(i: usize) -> String {
    let secs = i as u64 * 600;
    let mut days = secs / 86_400;
    let rem = secs % 86_400;
    let (mut year, mut month) = (2016u64, 1u64);
    loop {
        let dim = days_in_month(year, month);
        if days < dim {
            break;
        }
        days -= dim;
        month += 1;
        if month > 12 {
            month = 1;
            year += 1;
        }
    }
    format!(
        "{year:04}-{month:02}-{day:02}T{h:02}:{m:02}:{s:02}",
        day = days + 1,
        h = rem / 3600,
        m = rem % 3600 / 60,
        s = rem % 60
    )
}
