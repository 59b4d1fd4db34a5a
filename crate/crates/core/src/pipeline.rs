//! The cleaning pipeline: rule-based pre-cleaning, morphological normal
//! region extraction, and point marking.
//!
//! Stage 1 (`preclean`) flags stacked negative-power points by rule: wind
//! speed strictly above cut-in and power strictly below zero.
//!
//! Stage 2 (`extract_normal`) rasterizes the remaining points and opens the
//! image with square structuring elements of every supported size. Each
//! opening's dominant filled silhouette is compared against the reference
//! curve shape via Hu moment dissimilarity; the size with the smallest
//! dissimilarity wins (smallest size on ties). Openings that wipe the image
//! out get infinite dissimilarity and can never win.
//!
//! Stage 3 (`mark`) classifies every remaining point by where its stamp
//! block lands: outside the curve's filled edge region it is `type2`,
//! inside the edge region but off the extracted normal region it is
//! `type3`, otherwise `normal`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::contour::{fill_region, max_contour, Contour, ContourError, RegionMask};
use crate::moments::{dissimilarity, hu_set, MomentsError};
use crate::morphology::{open, square_se, MorphologyError, MAX_SE_SIZE, MIN_SE_SIZE};
use crate::raster::{build_transform, rasterize, BinaryImage, RasterError, RasterTransform};
use crate::scada::{Dataset, Label};
use crate::synth;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("every candidate opening is empty; no normal region can be extracted")]
    AllEmpty,
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Morphology(#[from] MorphologyError),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
}

/// Which image supplies the edge region for marking: the raw raster
/// (default; keeps sparse-but-attached fringes inside the edge) or the best
/// opening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeSource {
    #[default]
    Raw,
    Opened,
}

impl FromStr for EdgeSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(EdgeSource::Raw),
            "opened" => Ok(EdgeSource::Opened),
            other => Err(format!(
                "unknown edge source `{other}`, expected `raw` or `opened`"
            )),
        }
    }
}

/// Where the reference curve shape comes from.
#[derive(Debug, Clone)]
pub enum ReferenceSource {
    /// Render a healthy cloud for the dataset's turbine spec: a fixed-seed
    /// clean draw from the synthetic generator, rasterized and opened the
    /// same way the pipeline treats its input.
    Builtin,
    /// A caller-supplied binary image with the pipeline's raster dimensions.
    Image(BinaryImage),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub width: usize,
    pub height: usize,
    /// Side of the square block drawn per point.
    pub stamp: usize,
    /// Largest structuring element size to try (sweep runs 2..=n_max).
    pub n_max: usize,
    pub edge_source: EdgeSource,
    pub reference: ReferenceSource,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            width: 432,
            height: 288,
            stamp: 2,
            n_max: MAX_SE_SIZE,
            edge_source: EdgeSource::Raw,
            reference: ReferenceSource::Builtin,
        }
    }
}

/// One structuring element candidate from the sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub n: usize,
    /// Dissimilarity of this opening's silhouette to the reference;
    /// infinite when the opening is empty.
    pub dissimilarity: f64,
    pub opened: BinaryImage,
}

/// Full sweep outcome, entries ordered by element size.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    pub n_best: usize,
}

impl SweepResult {
    pub fn best(&self) -> &SweepEntry {
        self.entries
            .iter()
            .find(|e| e.n == self.n_best)
            .expect("n_best always refers to a sweep entry")
    }
}

/// Wall-clock seconds per pipeline stage, excluding file I/O.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StageTimings {
    pub precleaning_s: f64,
    pub extraction_s: f64,
    pub marking_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub normal: usize,
    pub type1: usize,
    pub type2: usize,
    pub type3: usize,
}

impl LabelCounts {
    pub fn abnormal(&self) -> usize {
        self.type1 + self.type2 + self.type3
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DissimilarityEntry {
    pub n: usize,
    pub dissimilarity: f64,
}

/// Summary of one pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct CleanReport {
    pub source: String,
    pub total: usize,
    pub counts: LabelCounts,
    /// Percent of points labeled abnormal.
    pub deletion_rate: f64,
    pub n_best: usize,
    pub dissimilarities: Vec<DissimilarityEntry>,
    pub timings: StageTimings,
}

impl fmt::Display for CleanReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "source: {}", self.source)?;
        writeln!(f, "points: {}", self.total)?;
        let best = self
            .dissimilarities
            .iter()
            .find(|d| d.n == self.n_best)
            .map(|d| d.dissimilarity)
            .unwrap_or(f64::NAN);
        writeln!(
            f,
            "structuring element: {}x{0} (dissimilarity {1:.6})",
            self.n_best, best
        )?;
        writeln!(
            f,
            "labels: normal {} | type1 {} | type2 {} | type3 {}",
            self.counts.normal, self.counts.type1, self.counts.type2, self.counts.type3
        )?;
        writeln!(f, "deletion rate: {:.2}%", self.deletion_rate)?;
        write!(
            f,
            "timings: preclean {:.3}s, extraction {:.3}s, marking {:.3}s, total {:.3}s",
            self.timings.precleaning_s,
            self.timings.extraction_s,
            self.timings.marking_s,
            self.timings.total_s
        )
    }
}

/// Intermediate images from a full run, for inspection and rendering.
#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub transform: RasterTransform,
    pub raw_image: BinaryImage,
    pub reference_image: BinaryImage,
    pub sweep: SweepResult,
    pub edge_contour: Contour,
    pub edge_mask: RegionMask,
    /// Filled principal region of the best opening; marking tests stamp
    /// blocks against this, not the raw opening.
    pub normal_mask: RegionMask,
}

/// Stage 1: labels `type1` every point with wind speed strictly above
/// cut-in and power strictly below zero. Returns how many were flagged.
pub fn preclean(dataset: &mut Dataset) -> usize {
    let cut_in = dataset.spec.cut_in;
    let mut flagged = 0;
    for point in &mut dataset.points {
        if point.wind_speed > cut_in && point.power < 0.0 {
            point.label = Label::Type1;
            flagged += 1;
        }
    }
    flagged
}

/// Stage 2: sweeps structuring element sizes `2..=n_max`, opening the image
/// with each and scoring the opening's dominant silhouette against the
/// reference shape. Smallest dissimilarity wins; ties pick the smaller
/// element. Errors with [`PipelineError::AllEmpty`] if every opening is
/// empty.
pub fn extract_normal(
    img: &BinaryImage,
    reference: &BinaryImage,
    n_max: usize,
) -> Result<SweepResult, PipelineError> {
    if img.dimensions() != reference.dimensions() {
        return Err(PipelineError::InconsistentInputs(format!(
            "image is {:?} but reference is {:?}",
            img.dimensions(),
            reference.dimensions()
        )));
    }
    if !(MIN_SE_SIZE..=MAX_SE_SIZE).contains(&n_max) {
        return Err(MorphologyError::InvalidSize(n_max).into());
    }
    let (width, height) = img.dimensions();
    let ref_mask = fill_region(&max_contour(reference)?, width, height)?;
    let ref_hu = hu_set(ref_mask.image())?;

    let entries: Vec<SweepEntry> = (MIN_SE_SIZE..=n_max)
        .into_par_iter()
        .map(|n| -> Result<SweepEntry, PipelineError> {
            let opened = open(img, &square_se(n)?);
            if opened.is_empty() {
                return Ok(SweepEntry {
                    n,
                    dissimilarity: f64::INFINITY,
                    opened,
                });
            }
            let mask = fill_region(&max_contour(&opened)?, width, height)?;
            let hu = hu_set(mask.image())?;
            Ok(SweepEntry {
                n,
                dissimilarity: dissimilarity(&hu, &ref_hu),
                opened,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n_best = entries
        .iter()
        .filter(|e| !e.opened.is_empty())
        .min_by(|a, b| a.dissimilarity.total_cmp(&b.dissimilarity))
        .map(|e| e.n)
        .ok_or(PipelineError::AllEmpty)?;
    Ok(SweepResult { entries, n_best })
}

fn edge_region(
    img: &BinaryImage,
    width: usize,
    height: usize,
) -> Result<(Contour, RegionMask), PipelineError> {
    let contour = max_contour(img)?;
    let mask = fill_region(&contour, width, height)?;
    Ok((contour, mask))
}

fn label_points(
    dataset: &mut Dataset,
    transform: &RasterTransform,
    edge: &RegionMask,
    normal: &BinaryImage,
) {
    let stamp = transform.stamp;
    for point in dataset
        .points
        .iter_mut()
        .filter(|p| p.label != Label::Type1)
    {
        let anchor = transform.map_point(point.wind_speed, point.power);
        point.label = if !edge.image().block_any(anchor.x, anchor.y, stamp) {
            Label::Type2
        } else if !normal.block_any(anchor.x, anchor.y, stamp) {
            Label::Type3
        } else {
            Label::Normal
        };
    }
}

/// Stage 3: labels every non-`type1` point by intersecting its stamp block
/// with the edge region (from `raw` or `normal` per `edge_source`) and the
/// supplied normal image, used as given. [`run`] passes the filled
/// principal region of the best opening here. Returns the edge region.
pub fn mark(
    dataset: &mut Dataset,
    transform: &RasterTransform,
    raw: &BinaryImage,
    normal: &BinaryImage,
    edge_source: EdgeSource,
) -> Result<RegionMask, PipelineError> {
    let dims = (transform.width, transform.height);
    if raw.dimensions() != dims || normal.dimensions() != dims {
        return Err(PipelineError::InconsistentInputs(format!(
            "transform canvas {:?} does not match raw {:?} / normal {:?}",
            dims,
            raw.dimensions(),
            normal.dimensions()
        )));
    }
    let edge_img = match edge_source {
        EdgeSource::Raw => raw,
        EdgeSource::Opened => normal,
    };
    let (_, edge) = edge_region(edge_img, transform.width, transform.height)?;
    label_points(dataset, transform, &edge, normal);
    Ok(edge)
}

/// Runs the full pipeline in place and returns the report.
pub fn run(dataset: &mut Dataset, config: &PipelineConfig) -> Result<CleanReport, PipelineError> {
    run_with_artifacts(dataset, config).map(|(report, _)| report)
}

/// Runs the full pipeline, also returning intermediate images.
pub fn run_with_artifacts(
    dataset: &mut Dataset,
    config: &PipelineConfig,
) -> Result<(CleanReport, PipelineArtifacts), PipelineError> {
    let start = Instant::now();
    // Labels are recomputed from values alone; stale labels from a previous
    // run (or an input label column) must not leak through.
    for point in &mut dataset.points {
        point.label = Label::Unlabeled;
    }
    let t0 = Instant::now();
    preclean(dataset);
    let precleaning_s = t0.elapsed().as_secs_f64();

    if dataset.points.iter().all(|p| p.label == Label::Type1) {
        return Err(PipelineError::AllEmpty);
    }

    let t1 = Instant::now();
    let transform = build_transform(dataset, config.width, config.height, config.stamp)?;
    let raw_image = rasterize(dataset, &transform);
    let reference_image = match &config.reference {
        ReferenceSource::Builtin => {
            // Size the reference cloud like the raster's input so both
            // respond to opening the same way.
            let kept = dataset
                .points
                .iter()
                .filter(|p| p.label != Label::Type1)
                .count();
            synth::reference_image(
                &dataset.spec,
                config.width,
                config.height,
                config.stamp,
                kept,
            )?
        }
        ReferenceSource::Image(img) => {
            if img.dimensions() != (config.width, config.height) {
                return Err(PipelineError::InconsistentInputs(format!(
                    "reference image is {:?} but the raster is {}x{}",
                    img.dimensions(),
                    config.width,
                    config.height
                )));
            }
            img.clone()
        }
    };
    let sweep = extract_normal(&raw_image, &reference_image, config.n_max)?;
    let extraction_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let edge_img = match config.edge_source {
        EdgeSource::Raw => &raw_image,
        EdgeSource::Opened => &sweep.best().opened,
    };
    let (edge_contour, edge_mask) = edge_region(edge_img, config.width, config.height)?;
    let (_, normal_mask) = edge_region(&sweep.best().opened, config.width, config.height)?;
    label_points(dataset, &transform, &edge_mask, normal_mask.image());
    let marking_s = t2.elapsed().as_secs_f64();

    let mut counts = LabelCounts::default();
    for point in &dataset.points {
        match point.label {
            Label::Normal => counts.normal += 1,
            Label::Type1 => counts.type1 += 1,
            Label::Type2 => counts.type2 += 1,
            Label::Type3 => counts.type3 += 1,
            Label::Unlabeled => unreachable!("marking labels every point"),
        }
    }
    let total = dataset.len();
    let report = CleanReport {
        source: dataset.source_id.clone(),
        total,
        counts,
        deletion_rate: 100.0 * counts.abnormal() as f64 / total as f64,
        n_best: sweep.n_best,
        dissimilarities: sweep
            .entries
            .iter()
            .map(|e| DissimilarityEntry {
                n: e.n,
                dissimilarity: e.dissimilarity,
            })
            .collect(),
        timings: StageTimings {
            precleaning_s,
            extraction_s,
            marking_s,
            total_s: start.elapsed().as_secs_f64(),
        },
    };
    let artifacts = PipelineArtifacts {
        transform,
        raw_image,
        reference_image,
        sweep,
        edge_contour,
        edge_mask,
        normal_mask,
    };
    Ok((report, artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RasterTransform;
    use crate::scada::{ScadaPoint, TurbineSpec};
    use crate::synth::{generate, SynthConfig};

    fn matang() -> TurbineSpec {
        TurbineSpec::new(3.0, 13.0, 25.0, 1500.0)
    }

    #[test]
    fn preclean_uses_strict_inequalities() {
        let mut ds = Dataset::new(
            matang(),
            "t",
            vec![
                ScadaPoint::new("a", 5.0, -10.0),
                ScadaPoint::new("b", 2.0, -10.0),
                ScadaPoint::new("c", 5.0, 0.0),
                ScadaPoint::new("d", 3.0, -10.0),
            ],
        );
        assert_eq!(preclean(&mut ds), 1);
        assert_eq!(ds.points[0].label, Label::Type1);
        assert_eq!(
            ds.points[1].label,
            Label::Unlabeled,
            "wind at or below cut-in is exempt"
        );
        assert_eq!(
            ds.points[2].label,
            Label::Unlabeled,
            "zero power is not negative"
        );
        assert_eq!(
            ds.points[3].label,
            Label::Unlabeled,
            "cut-in itself is exempt"
        );
    }

    #[test]
    fn sweep_prefers_smallest_size_on_ties() {
        // A solid block survives every opening unchanged, so comparing the
        // image against itself yields zero dissimilarity everywhere.
        let img = BinaryImage::from_fn(40, 40, |x, y| (5..35).contains(&x) && (5..35).contains(&y));
        let sweep = extract_normal(&img, &img, 9).unwrap();
        assert_eq!(sweep.entries.len(), 8);
        for (i, entry) in sweep.entries.iter().enumerate() {
            assert_eq!(entry.n, i + 2);
            assert!(entry.dissimilarity.abs() < 1e-12);
        }
        assert_eq!(sweep.n_best, 2);
        assert_eq!(sweep.best().n, 2);
    }

    #[test]
    fn sweep_argmin_matches_manual_rescan() {
        // Thick diagonal band plus clutter: dissimilarities genuinely vary.
        let img = BinaryImage::from_fn(96, 96, |x, y| {
            let on_band = y.abs_diff(95 - x) < 7;
            let clutter = (x * 31 + y * 17) % 23 == 0;
            on_band || clutter
        });
        let reference = BinaryImage::from_fn(96, 96, |x, y| y.abs_diff(95 - x) < 8);
        let sweep = extract_normal(&img, &reference, 9).unwrap();

        let ref_hu = hu_set(
            fill_region(&max_contour(&reference).unwrap(), 96, 96)
                .unwrap()
                .image(),
        )
        .unwrap();
        let mut best: Option<(usize, f64)> = None;
        for n in 2..=9 {
            let opened = open(&img, &square_se(n).unwrap());
            if opened.is_empty() {
                continue;
            }
            let hu = hu_set(
                fill_region(&max_contour(&opened).unwrap(), 96, 96)
                    .unwrap()
                    .image(),
            )
            .unwrap();
            let d = dissimilarity(&hu, &ref_hu);
            let entry = sweep.entries.iter().find(|e| e.n == n).unwrap();
            assert_eq!(entry.dissimilarity.to_bits(), d.to_bits(), "entry n={n}");
            if best.is_none() || d < best.unwrap().1 {
                best = Some((n, d));
            }
        }
        assert_eq!(sweep.n_best, best.unwrap().0);
    }

    #[test]
    fn empty_openings_never_win_and_all_empty_errors() {
        // A 2x2 speck survives only the 2x2 opening.
        let mut img = BinaryImage::new(32, 32);
        img.stamp(10, 10, 2);
        let sweep = extract_normal(&img, &img, 9).unwrap();
        assert_eq!(sweep.n_best, 2);
        for entry in &sweep.entries {
            if entry.n > 2 {
                assert!(entry.opened.is_empty());
                assert!(entry.dissimilarity.is_infinite());
            }
        }

        let mut speck = BinaryImage::new(32, 32);
        speck.set(5, 5, true);
        assert!(matches!(
            extract_normal(&speck, &img, 9),
            Err(PipelineError::AllEmpty)
        ));
    }

    #[test]
    fn extract_normal_validates_inputs() {
        let img = BinaryImage::new(16, 16);
        let other = BinaryImage::new(8, 8);
        assert!(matches!(
            extract_normal(&img, &other, 9),
            Err(PipelineError::InconsistentInputs(_))
        ));
        assert!(matches!(
            extract_normal(&img, &img, 1),
            Err(PipelineError::Morphology(MorphologyError::InvalidSize(1)))
        ));
        assert!(matches!(
            extract_normal(&img, &img, 10),
            Err(PipelineError::Morphology(MorphologyError::InvalidSize(10)))
        ));
    }

    /// Identity transform on a 32x32 canvas: x = v, y = 31 - p, stamp 1.
    fn identity_transform() -> RasterTransform {
        RasterTransform::from_ranges(0.0, 31.0, 0.0, 31.0, 32, 32, 1).unwrap()
    }

    fn point_at(x: usize, y: usize) -> ScadaPoint {
        ScadaPoint::new(format!("p{x}-{y}"), x as f64, (31 - y) as f64)
    }

    #[test]
    fn mark_separates_the_three_point_kinds() {
        let t = identity_transform();
        let normal = BinaryImage::from_fn(32, 32, |x, y| {
            (10..20).contains(&x) && (10..20).contains(&y)
        });
        let mut raw =
            BinaryImage::from_fn(32, 32, |x, y| (8..24).contains(&x) && (8..24).contains(&y));
        raw.set(28, 2, true);

        let mut ds = Dataset::new(
            matang(),
            "t",
            vec![
                point_at(12, 12), // inside normal region
                point_at(28, 2),  // isolated speck, outside the edge region
                point_at(9, 9),   // inside edge region, outside normal region
            ],
        );
        let edge = mark(&mut ds, &t, &raw, &normal, EdgeSource::Raw).unwrap();
        assert_eq!(ds.points[0].label, Label::Normal);
        assert_eq!(ds.points[1].label, Label::Type2);
        assert_eq!(ds.points[2].label, Label::Type3);
        // The edge region is the filled max contour of the raw image: the
        // big block, not the speck.
        assert_eq!(edge.area(), 16 * 16);
    }

    #[test]
    fn mark_leaves_type1_untouched_and_checks_dims() {
        let t = identity_transform();
        let img = BinaryImage::from_fn(32, 32, |x, y| {
            (10..20).contains(&x) && (10..20).contains(&y)
        });
        let mut ds = Dataset::new(matang(), "t", vec![point_at(12, 12), point_at(13, 13)]);
        ds.points[0].label = Label::Type1;
        mark(&mut ds, &t, &img, &img, EdgeSource::Raw).unwrap();
        assert_eq!(ds.points[0].label, Label::Type1);
        assert_eq!(ds.points[1].label, Label::Normal);

        let small = BinaryImage::new(8, 8);
        assert!(matches!(
            mark(&mut ds, &t, &small, &img, EdgeSource::Raw),
            Err(PipelineError::InconsistentInputs(_))
        ));
    }

    #[test]
    fn narrower_normal_images_can_only_shrink_the_normal_set() {
        let mut cfg = SynthConfig::for_spec(matang());
        cfg.n_points = 4000;
        let (mut ds, _) = generate(&cfg).unwrap();
        let config = PipelineConfig::default();
        let (_, artifacts) = run_with_artifacts(&mut ds, &config).unwrap();

        let normals_with = |normal_img: &BinaryImage| -> Vec<bool> {
            let mut clone = ds.clone();
            for p in &mut clone.points {
                if p.label != Label::Type1 {
                    p.label = Label::Unlabeled;
                }
            }
            mark(
                &mut clone,
                &artifacts.transform,
                &artifacts.raw_image,
                normal_img,
                EdgeSource::Raw,
            )
            .unwrap();
            clone
                .points
                .iter()
                .map(|p| p.label == Label::Normal)
                .collect()
        };
        let entries = &artifacts.sweep.entries;
        for pair in entries.windows(2) {
            assert!(
                pair[1].opened.is_subset_of(&pair[0].opened),
                "openings are antitone in n"
            );
        }
        let wide = normals_with(&entries[0].opened);
        let narrow = normals_with(&entries.last().unwrap().opened);
        for (w, n) in wide.iter().zip(&narrow) {
            assert!(
                !n | w,
                "a point normal under a smaller opening cannot become normal"
            );
        }
    }

    #[test]
    fn run_errors_when_everything_is_precleaned() {
        let mut ds = Dataset::new(
            matang(),
            "t",
            vec![
                ScadaPoint::new("a", 5.0, -1.0),
                ScadaPoint::new("b", 7.0, -2.0),
            ],
        );
        assert!(matches!(
            run(&mut ds, &PipelineConfig::default()),
            Err(PipelineError::AllEmpty)
        ));
    }

    #[test]
    fn run_validates_supplied_reference_dimensions() {
        let mut cfg = SynthConfig::for_spec(matang());
        cfg.n_points = 500;
        let (mut ds, _) = generate(&cfg).unwrap();
        let config = PipelineConfig {
            reference: ReferenceSource::Image(BinaryImage::new(64, 64)),
            ..PipelineConfig::default()
        };
        assert!(matches!(
            run(&mut ds, &config),
            Err(PipelineError::InconsistentInputs(_))
        ));
    }

    #[test]
    fn run_labels_everything_and_reports_consistently() {
        let mut cfg = SynthConfig::for_spec(matang());
        cfg.n_points = 4000;
        let (mut ds, truth) = generate(&cfg).unwrap();
        let report = run(&mut ds, &PipelineConfig::default()).unwrap();

        assert!(ds.points.iter().all(|p| p.label != Label::Unlabeled));
        assert_eq!(report.total, 4000);
        let c = report.counts;
        assert_eq!(c.normal + c.abnormal(), 4000);
        let truth_type1 = truth.iter().filter(|l| **l == Label::Type1).count();
        assert_eq!(
            c.type1, truth_type1,
            "rule-based stage matches the generator's rule"
        );
        assert!((2..=9).contains(&report.n_best));
        assert_eq!(report.dissimilarities.len(), 8);
        let expected_rate = 100.0 * c.abnormal() as f64 / 4000.0;
        assert!((report.deletion_rate - expected_rate).abs() < 1e-12);
        assert!(report.timings.total_s >= report.timings.extraction_s);

        let text = report.to_string();
        assert!(text.contains("deletion rate"));
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["counts"]["type1"], serde_json::json!(truth_type1));
    }

    #[test]
    fn run_is_deterministic_and_ignores_stale_labels() {
        let mut cfg = SynthConfig::for_spec(matang());
        cfg.n_points = 3000;
        let (ds, _) = generate(&cfg).unwrap();
        let config = PipelineConfig::default();

        let mut first = ds.clone();
        let report_a = run(&mut first, &config).unwrap();

        let mut second = ds.clone();
        for p in &mut second.points {
            p.label = Label::Type3;
        }
        let report_b = run(&mut second, &config).unwrap();

        assert_eq!(report_a.counts, report_b.counts);
        assert_eq!(report_a.n_best, report_b.n_best);
        for (a, b) in first.points.iter().zip(&second.points) {
            assert_eq!(a.label, b.label);
        }
    }
}
