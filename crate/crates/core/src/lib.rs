//! Wind power curve (WPC) cleaning for wind turbine SCADA data.
//!
//! The cleaning pipeline turns a scatter of (wind speed, power) points into a
//! binary raster image, extracts the principal curve region with mathematical
//! morphology (the structuring element size is chosen by minimizing a Hu
//! moment dissimilarity against a reference curve shape), and maps pixel
//! classifications back to per-point labels:
//!
//! * `type1`: stacked points with positive wind speed and negative power,
//!   removed by rule before any image processing
//! * `type2`: sparse outliers that fall outside the curve's edge region
//! * `type3`: dense abnormal clusters (e.g. curtailment bands) inside the
//!   edge region but outside the morphologically extracted normal region
//! * `normal`: everything else
//!
//! Modules mirror the pipeline stages: [`scada`] (CSV I/O), [`raster`]
//! (point-to-pixel transform and binary images), [`morphology`] /
//! [`contour`] / [`moments`] (image machinery), [`pipeline`] (the cleaning
//! procedure), plus [`baselines`] (LOF and k-means reference methods),
//! [`synth`] (synthetic dataset generator) and [`eval`] (metrics and method
//! comparison).

pub mod baselines;
pub mod contour;
pub mod eval;
pub mod moments;
pub mod morphology;
pub mod pipeline;
pub mod raster;
pub mod scada;
pub mod synth;

pub use baselines::{BaselineConfig, BaselineError};
pub use contour::{ComponentMap, Contour, ContourError, RegionMask};
pub use eval::{ComparisonReport, EvalError, Method, Metrics};
pub use moments::{HuVector, MomentsError};
pub use morphology::{MorphologyError, SquareSe};
pub use pipeline::{
    run, run_with_artifacts, CleanReport, EdgeSource, PipelineConfig, PipelineError,
    ReferenceSource, StageTimings, SweepResult,
};
pub use raster::{BinaryImage, ImageFormat, PixelCoord, RasterError, RasterTransform};
pub use scada::{Dataset, Label, ScadaError, ScadaPoint, TurbineSpec};
pub use synth::{SynthConfig, SynthError};
