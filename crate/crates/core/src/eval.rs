//! Scoring predicted labels against ground truth, and a harness that runs
//! the image pipeline alongside the reference cleaners on one dataset.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::baselines::{kmeans_clean, lof_clean, BaselineConfig, BaselineError};
use crate::pipeline::{run, PipelineConfig, PipelineError, StageTimings};
use crate::scada::{Dataset, Label};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label vectors differ in length: {expected} vs {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("point {row} carries no label")]
    UnlabeledPoint { row: usize },
    #[error("cannot evaluate an empty label vector")]
    Empty,
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Index into confusion-matrix axes: Normal, Type1, Type2, Type3.
fn label_index(label: Label, row: usize) -> Result<usize, EvalError> {
    match label {
        Label::Normal => Ok(0),
        Label::Type1 => Ok(1),
        Label::Type2 => Ok(2),
        Label::Type3 => Ok(3),
        Label::Unlabeled => Err(EvalError::UnlabeledPoint { row }),
    }
}

/// Ratio with the vacuous-truth convention: an empty denominator scores 1.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Multi-class agreement between predicted and true labels.
///
/// Per-type precision and recall are strict (the exact type must match);
/// `abnormal_recall` and `false_flag_rate` collapse the three abnormal
/// types into one flag. Empty denominators score 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub n: usize,
    /// `confusion[truth][pred]`, axes ordered Normal, Type1, Type2, Type3.
    pub confusion: [[usize; 4]; 4],
    /// Strict precision for Type1..Type3.
    pub precision: [f64; 3],
    /// Strict recall for Type1..Type3.
    pub recall: [f64; 3],
    /// Fraction of truly abnormal points predicted abnormal (any type).
    pub abnormal_recall: f64,
    /// Fraction of truly normal points predicted abnormal.
    pub false_flag_rate: f64,
    /// Fraction of all points predicted abnormal.
    pub deletion_rate: f64,
}

pub fn evaluate(pred: &[Label], truth: &[Label]) -> Result<Metrics, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut confusion = [[0usize; 4]; 4];
    for (row, (&p, &t)) in pred.iter().zip(truth).enumerate() {
        confusion[label_index(t, row)?][label_index(p, row)?] += 1;
    }
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    for t in 1..4 {
        let tp = confusion[t][t];
        let predicted: usize = (0..4).map(|i| confusion[i][t]).sum();
        let actual: usize = confusion[t].iter().sum();
        precision[t - 1] = ratio(tp, predicted);
        recall[t - 1] = ratio(tp, actual);
    }
    let truly_abnormal: usize = (1..4).map(|t| confusion[t].iter().sum::<usize>()).sum();
    let caught: usize = (1..4)
        .map(|t| confusion[t][1..].iter().sum::<usize>())
        .sum();
    let normal_total: usize = confusion[0].iter().sum();
    let false_flags: usize = confusion[0][1..].iter().sum();
    let flagged: usize = (0..4)
        .map(|t| confusion[t][1..].iter().sum::<usize>())
        .sum();
    Ok(Metrics {
        n: pred.len(),
        confusion,
        precision,
        recall,
        abnormal_recall: ratio(caught, truly_abnormal),
        false_flag_rate: ratio(false_flags, normal_total),
        deletion_rate: flagged as f64 / pred.len() as f64,
    })
}

/// Agreement between binary abnormal flags and true labels. `type_caught`
/// holds, per true type, the fraction of its points that were flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryEval {
    pub abnormal_recall: f64,
    pub false_flag_rate: f64,
    pub type_caught: [f64; 3],
}

pub fn evaluate_flags(flags: &[bool], truth: &[Label]) -> Result<BinaryEval, EvalError> {
    if flags.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            expected: truth.len(),
            got: flags.len(),
        });
    }
    if flags.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut caught = [0usize; 4];
    let mut total = [0usize; 4];
    for (row, (&f, &t)) in flags.iter().zip(truth).enumerate() {
        let ti = label_index(t, row)?;
        total[ti] += 1;
        if f {
            caught[ti] += 1;
        }
    }
    let abnormal_total = total[1] + total[2] + total[3];
    let abnormal_caught = caught[1] + caught[2] + caught[3];
    Ok(BinaryEval {
        abnormal_recall: ratio(abnormal_caught, abnormal_total),
        false_flag_rate: ratio(caught[0], total[0]),
        type_caught: [
            ratio(caught[1], total[1]),
            ratio(caught[2], total[2]),
            ratio(caught[3], total[3]),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Image,
    Lof,
    KMeans,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Image => "image",
            Method::Lof => "lof",
            Method::KMeans => "kmeans",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "image" => Ok(Method::Image),
            "lof" => Ok(Method::Lof),
            "kmeans" | "k-means" => Ok(Method::KMeans),
            other => Err(format!(
                "unknown method '{other}' (expected image, lof, or kmeans)"
            )),
        }
    }
}

/// One method's result on the dataset under comparison.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub seconds: f64,
    pub deletion_rate: f64,
    /// Present when ground truth was supplied.
    pub eval: Option<BinaryEval>,
    /// Strict multi-class metrics; image method with truth only.
    pub image_metrics: Option<Metrics>,
    /// Stage breakdown; image method only.
    pub stage_timings: Option<StageTimings>,
    /// Selected structuring-element size; image method only.
    pub se_size: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub n: usize,
    pub rows: Vec<MethodOutcome>,
}

/// Runs each requested method on a copy of the dataset and scores it
/// against `truth` when given. The image method reports strict per-type
/// metrics on top of the binary view the baselines are limited to.
pub fn compare(
    dataset: &Dataset,
    truth: Option<&[Label]>,
    methods: &[Method],
    pipeline_cfg: &PipelineConfig,
    baseline_cfg: &BaselineConfig,
) -> Result<ComparisonReport, CompareError> {
    if let Some(t) = truth {
        if t.len() != dataset.len() {
            return Err(EvalError::LengthMismatch {
                expected: dataset.len(),
                got: t.len(),
            }
            .into());
        }
    }
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let start = Instant::now();
        let outcome = match method {
            Method::Image => {
                let mut copy = dataset.clone();
                let report = run(&mut copy, pipeline_cfg)?;
                let seconds = start.elapsed().as_secs_f64();
                let pred: Vec<Label> = copy.points.iter().map(|p| p.label).collect();
                let flags: Vec<bool> = pred.iter().map(|l| l.is_abnormal()).collect();
                let (eval, image_metrics) = match truth {
                    Some(t) => (Some(evaluate_flags(&flags, t)?), Some(evaluate(&pred, t)?)),
                    None => (None, None),
                };
                MethodOutcome {
                    method,
                    seconds,
                    deletion_rate: flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64,
                    eval,
                    image_metrics,
                    stage_timings: Some(report.timings),
                    se_size: Some(report.n_best),
                }
            }
            Method::Lof | Method::KMeans => {
                let flags = match method {
                    Method::Lof => lof_clean(dataset, baseline_cfg)?,
                    _ => kmeans_clean(dataset, baseline_cfg)?,
                };
                let seconds = start.elapsed().as_secs_f64();
                MethodOutcome {
                    method,
                    seconds,
                    deletion_rate: flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64,
                    eval: truth.map(|t| evaluate_flags(&flags, t)).transpose()?,
                    image_metrics: None,
                    stage_timings: None,
                    se_size: None,
                }
            }
        };
        rows.push(outcome);
    }
    Ok(ComparisonReport {
        n: dataset.len(),
        rows,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => "-".to_string(),
    }
}

impl ComparisonReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Comparison over {} points\n\n", self.n));
        out.push_str(
            "| method | seconds | deleted | abnormal recall | false flags | type1 | type2 | type3 |\n",
        );
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for row in &self.rows {
            let e = row.eval.as_ref();
            out.push_str(&format!(
                "| {} | {:.3} | {:.3} | {} | {} | {} | {} | {} |\n",
                row.method,
                row.seconds,
                row.deletion_rate,
                fmt_opt(e.map(|e| e.abnormal_recall)),
                fmt_opt(e.map(|e| e.false_flag_rate)),
                fmt_opt(e.map(|e| e.type_caught[0])),
                fmt_opt(e.map(|e| e.type_caught[1])),
                fmt_opt(e.map(|e| e.type_caught[2])),
            ));
        }
        for row in &self.rows {
            if let (Some(t), Some(se)) = (&row.stage_timings, row.se_size) {
                out.push_str(&format!(
                    "\nimage stages (se {se}x{se}): preclean {:.3}s, extraction {:.3}s, marking {:.3}s\n",
                    t.precleaning_s, t.extraction_s, t.marking_s,
                ));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("method,seconds,deleted,abnormal_recall,false_flags,type1,type2,type3\n");
        for row in &self.rows {
            let e = row.eval.as_ref();
            out.push_str(&format!(
                "{},{:.3},{:.3},{},{},{},{},{}\n",
                row.method,
                row.seconds,
                row.deletion_rate,
                fmt_opt(e.map(|e| e.abnormal_recall)),
                fmt_opt(e.map(|e| e.false_flag_rate)),
                fmt_opt(e.map(|e| e.type_caught[0])),
                fmt_opt(e.map(|e| e.type_caught[1])),
                fmt_opt(e.map(|e| e.type_caught[2])),
            ));
        }
        out
    }
}
