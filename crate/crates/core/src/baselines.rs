//! Reference cleaning methods to compare the image pipeline against:
//! density-based outlier scoring (LOF) and k-means distance screening.
//!
//! Both operate on min-max normalized (wind speed, power) pairs and return
//! one flag per point (true = abnormal), leaving thresholds and label
//! semantics to the caller. LOF flags a fixed fraction of the data by
//! score; k-means flags points far from their cluster centroid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::scada::Dataset;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("invalid baseline config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    /// Neighborhood size for LOF.
    pub lof_k: usize,
    /// Fraction of points LOF flags, by descending score.
    pub lof_fraction: f64,
    /// Cluster count for k-means.
    pub kmeans_k: usize,
    /// Flag threshold in standard deviations above the mean
    /// centroid distance of a cluster.
    pub kmeans_sigma: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            lof_k: 300,
            lof_fraction: 0.10,
            kmeans_k: 13,
            kmeans_sigma: 2.0,
            seed: 1,
        }
    }
}

fn normalized_features(dataset: &Dataset) -> Vec<[f64; 2]> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &dataset.points {
        for (i, v) in [p.wind_speed, p.power].into_iter().enumerate() {
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    dataset
        .points
        .iter()
        .map(|p| {
            let mut f = [p.wind_speed, p.power];
            for i in 0..2 {
                f[i] = if hi[i] > lo[i] {
                    (f[i] - lo[i]) / (hi[i] - lo[i])
                } else {
                    0.0
                };
            }
            f
        })
        .collect()
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Uniform grid over the unit square for exact k-nearest-neighbor queries:
/// candidate cells are visited in expanding Chebyshev rings until the k-th
/// distance provably beats everything outside the visited rings.
struct Grid {
    dims: usize,
    cell: f64,
    cells: Vec<Vec<u32>>,
}

impl Grid {
    fn build(points: &[[f64; 2]], k: usize) -> Self {
        // Aim for roughly k candidates within the first ring around a cell.
        let target = (9.0 * points.len() as f64 / (k + 1) as f64).sqrt().ceil() as usize;
        let dims = target.clamp(1, 512);
        let cell = 1.0 / dims as f64;
        let mut cells = vec![Vec::new(); dims * dims];
        for (i, p) in points.iter().enumerate() {
            cells[Self::cell_index(p, dims)].push(i as u32);
        }
        Grid { dims, cell, cells }
    }

    fn cell_index(p: &[f64; 2], dims: usize) -> usize {
        let cx = ((p[0] * dims as f64) as usize).min(dims - 1);
        let cy = ((p[1] * dims as f64) as usize).min(dims - 1);
        cy * dims + cx
    }

    /// All neighbors of point `idx` within its k-distance (ties included),
    /// plus the k-distance itself.
    fn neighborhood(&self, points: &[[f64; 2]], idx: usize, k: usize) -> Neighborhood {
        let p = points[idx];
        let home_x = ((p[0] * self.dims as f64) as usize).min(self.dims - 1) as isize;
        let home_y = ((p[1] * self.dims as f64) as usize).min(self.dims - 1) as isize;
        let side = self.dims as isize;
        let mut candidates: Vec<(f64, u32)> = Vec::with_capacity(4 * (k + 1));
        let mut kth_d2 = f64::INFINITY;
        let visit = |cx: isize, cy: isize, candidates: &mut Vec<(f64, u32)>| {
            if (0..side).contains(&cx) && (0..side).contains(&cy) {
                for &j in &self.cells[cy as usize * self.dims + cx as usize] {
                    if j as usize != idx {
                        candidates.push((dist2(p, points[j as usize]), j));
                    }
                }
            }
        };
        // Cells at Chebyshev distance `ring` from the home cell, expanding
        // until the k-th candidate provably beats every unvisited cell.
        for ring in 0..side {
            for cy in home_y - ring..=home_y + ring {
                if ring == 0 || cy == home_y - ring || cy == home_y + ring {
                    for cx in home_x - ring..=home_x + ring {
                        visit(cx, cy, &mut candidates);
                    }
                } else {
                    visit(home_x - ring, cy, &mut candidates);
                    visit(home_x + ring, cy, &mut candidates);
                }
            }
            if candidates.len() >= k {
                let (_, kth, _) =
                    candidates.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
                kth_d2 = kth.0;
                // Anything in an unvisited cell is at least ring*cell away.
                let bound = ring as f64 * self.cell;
                if kth_d2 < bound * bound {
                    break;
                }
            }
        }
        let mut neighbors: Vec<(f64, u32)> = candidates
            .into_iter()
            .filter(|(d2, _)| *d2 <= kth_d2)
            .collect();
        neighbors.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Neighborhood {
            kdist: kth_d2.sqrt(),
            dists: neighbors.iter().map(|(d2, _)| d2.sqrt()).collect(),
            indices: neighbors.into_iter().map(|(_, j)| j).collect(),
        }
    }
}

struct Neighborhood {
    kdist: f64,
    indices: Vec<u32>,
    dists: Vec<f64>,
}

/// Local outlier factor of every point with neighborhood size `k`.
/// Scores near 1 mean inlier; larger means more isolated than the local
/// density around it. Exact with respect to the textbook definition
/// (tied k-distances enlarge the neighborhood).
pub fn lof_scores(points: &[[f64; 2]], k: usize) -> Result<Vec<f64>, BaselineError> {
    if k == 0 {
        return Err(BaselineError::InvalidConfig(
            "lof_k must be at least 1".into(),
        ));
    }
    if points.len() <= k {
        return Err(BaselineError::TooFewPoints {
            needed: k + 1,
            got: points.len(),
        });
    }
    let grid = Grid::build(points, k);
    let hoods: Vec<Neighborhood> = (0..points.len())
        .into_par_iter()
        .map(|i| grid.neighborhood(points, i, k))
        .collect();

    let lrd: Vec<f64> = hoods
        .par_iter()
        .map(|h| {
            let reach: f64 = h
                .indices
                .iter()
                .zip(&h.dists)
                .map(|(&o, &d)| hoods[o as usize].kdist.max(d))
                .sum();
            if reach > 0.0 {
                h.indices.len() as f64 / reach
            } else {
                // All neighbors coincide with the point (mass duplicates).
                f64::INFINITY
            }
        })
        .collect();

    Ok(hoods
        .par_iter()
        .enumerate()
        .map(|(i, h)| {
            let ratio_sum: f64 = h
                .indices
                .iter()
                .map(|&o| {
                    let (num, den) = (lrd[o as usize], lrd[i]);
                    if num.is_infinite() && den.is_infinite() {
                        1.0
                    } else {
                        num / den
                    }
                })
                .sum();
            ratio_sum / h.indices.len() as f64
        })
        .collect())
}

/// LOF cleaning: flags exactly `ceil(lof_fraction * n)` points with the
/// highest scores; score ties break toward earlier input rows.
pub fn lof_clean(dataset: &Dataset, cfg: &BaselineConfig) -> Result<Vec<bool>, BaselineError> {
    if !(0.0..=1.0).contains(&cfg.lof_fraction) {
        return Err(BaselineError::InvalidConfig(format!(
            "lof_fraction must lie in [0, 1], got {}",
            cfg.lof_fraction
        )));
    }
    let features = normalized_features(dataset);
    let scores = lof_scores(&features, cfg.lof_k)?;
    let n = scores.len();
    let flag_count = ((cfg.lof_fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut flags = vec![false; n];
    for &i in order.iter().take(flag_count) {
        flags[i] = true;
    }
    Ok(flags)
}

/// k-means cleaning: clusters the normalized points (k-means++ seeding,
/// Lloyd iterations), then flags points whose centroid distance exceeds
/// their cluster's mean by `kmeans_sigma` standard deviations.
// The sigma check is a negated comparison so NaN fails it.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn kmeans_clean(dataset: &Dataset, cfg: &BaselineConfig) -> Result<Vec<bool>, BaselineError> {
    let k = cfg.kmeans_k;
    if k == 0 {
        return Err(BaselineError::InvalidConfig(
            "kmeans_k must be at least 1".into(),
        ));
    }
    if !(cfg.kmeans_sigma >= 0.0) {
        return Err(BaselineError::InvalidConfig(format!(
            "kmeans_sigma must be non-negative, got {}",
            cfg.kmeans_sigma
        )));
    }
    let points = normalized_features(dataset);
    let n = points.len();
    if n < k {
        return Err(BaselineError::TooFewPoints { needed: k, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // k-means++ seeding.
    let mut centroids: Vec<[f64; 2]> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)]);
    let mut min_d2: Vec<f64> = points.iter().map(|p| dist2(*p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick];
        centroids.push(c);
        for (d, p) in min_d2.iter_mut().zip(&points) {
            *d = d.min(dist2(*p, c));
        }
    }

    // Lloyd iterations.
    let mut assignment = vec![0u32; n];
    for _ in 0..300 {
        assignment = points
            .par_iter()
            .map(|p| {
                let mut best = 0u32;
                let mut best_d = f64::INFINITY;
                for (c, centroid) in centroids.iter().enumerate() {
                    let d = dist2(*p, *centroid);
                    if d < best_d {
                        best_d = d;
                        best = c as u32;
                    }
                }
                best
            })
            .collect();
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a as usize][0] += p[0];
            sums[a as usize][1] += p[1];
            counts[a as usize] += 1;
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its centroid
            }
            let next = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            shift = shift.max(dist2(next, centroids[c]).sqrt());
            centroids[c] = next;
        }
        if shift < 1e-6 {
            break;
        }
    }

    // Distance statistics per cluster.
    let dist: Vec<f64> = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| dist2(*p, centroids[a as usize]).sqrt())
        .collect();
    let mut sum = vec![0.0f64; k];
    let mut count = vec![0usize; k];
    for (&d, &a) in dist.iter().zip(&assignment) {
        sum[a as usize] += d;
        count[a as usize] += 1;
    }
    let mean: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mut var = vec![0.0f64; k];
    for (&d, &a) in dist.iter().zip(&assignment) {
        var[a as usize] += (d - mean[a as usize]).powi(2);
    }
    let std: Vec<f64> = var
        .iter()
        .zip(&count)
        .map(|(v, &c)| if c > 0 { (v / c as f64).sqrt() } else { 0.0 })
        .collect();

    Ok(dist
        .iter()
        .zip(&assignment)
        .map(|(&d, &a)| d > mean[a as usize] + cfg.kmeans_sigma * std[a as usize])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scada::{ScadaPoint, TurbineSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset_from(points: &[[f64; 2]]) -> Dataset {
        Dataset::new(
            TurbineSpec::new(3.0, 13.0, 25.0, 1500.0),
            "t",
            points
                .iter()
                .enumerate()
                .map(|(i, p)| ScadaPoint::new(format!("t{i}"), p[0], p[1]))
                .collect(),
        )
    }

    /// LOF straight from the definition, O(n^2).
    fn brute_lof(points: &[[f64; 2]], k: usize) -> Vec<f64> {
        let n = points.len();
        let mut kdist = vec![0.0f64; n];
        let mut hoods: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut d: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, dist2(points[i], points[j]).sqrt()))
                .collect();
            d.sort_by(|a, b| a.1.total_cmp(&b.1));
            kdist[i] = d[k - 1].1;
            hoods.push(d.into_iter().filter(|&(_, dd)| dd <= kdist[i]).collect());
        }
        let lrd: Vec<f64> = (0..n)
            .map(|i| {
                let reach: f64 = hoods[i].iter().map(|&(o, d)| kdist[o].max(d)).sum();
                if reach > 0.0 {
                    hoods[i].len() as f64 / reach
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        (0..n)
            .map(|i| {
                let s: f64 = hoods[i]
                    .iter()
                    .map(|&(o, _)| {
                        if lrd[o].is_infinite() && lrd[i].is_infinite() {
                            1.0
                        } else {
                            lrd[o] / lrd[i]
                        }
                    })
                    .sum();
                s / hoods[i].len() as f64
            })
            .collect()
    }

    #[test]
    fn grid_lof_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<[f64; 2]> = (0..180)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        for k in [3, 7, 25] {
            let fast = lof_scores(&points, k).unwrap();
            let brute = brute_lof(&points, k);
            for (i, (a, b)) in fast.iter().zip(&brute).enumerate() {
                assert!(
                    (a - b).abs() / b.abs().max(1e-12) < 1e-9,
                    "k={k} point {i}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn lof_flags_exact_count_with_stable_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points: Vec<[f64; 2]> = (0..1000)
            .map(|_| [rng.random::<f64>() * 20.0, rng.random::<f64>() * 1500.0])
            .collect();
        let ds = dataset_from(&points);
        let cfg = BaselineConfig {
            lof_k: 10,
            lof_fraction: 0.1,
            ..Default::default()
        };
        let flags = lof_clean(&ds, &cfg).unwrap();
        assert_eq!(flags.iter().filter(|f| **f).count(), 100);

        let none = lof_clean(
            &ds,
            &BaselineConfig {
                lof_fraction: 0.0,
                lof_k: 10,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(none.iter().filter(|f| **f).count(), 0);
        let all = lof_clean(
            &ds,
            &BaselineConfig {
                lof_fraction: 1.0,
                lof_k: 10,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(all.iter().filter(|f| **f).count(), 1000);
    }

    #[test]
    fn lof_spots_the_far_outlier() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut points: Vec<[f64; 2]> = (0..300)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        points.push([100.0, 100.0]);
        let ds = dataset_from(&points);
        let cfg = BaselineConfig {
            lof_k: 5,
            lof_fraction: 0.003,
            ..Default::default()
        };
        let flags = lof_clean(&ds, &cfg).unwrap();
        assert_eq!(flags.iter().filter(|f| **f).count(), 1);
        assert!(flags[300], "the far point must carry the top score");
    }

    #[test]
    fn lof_handles_mass_duplicates_without_nan() {
        let mut points = vec![[0.5, 0.5]; 40];
        points.extend((0..40).map(|i| [i as f64 / 40.0, 1.0 - i as f64 / 40.0]));
        let scores = lof_scores(&points, 10).unwrap();
        assert!(
            scores.iter().all(|s| !s.is_nan()),
            "duplicate-heavy data must stay defined"
        );
    }

    #[test]
    fn lof_rejects_small_inputs_and_bad_fractions() {
        let points: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 0.0]).collect();
        assert!(matches!(
            lof_scores(&points, 10),
            Err(BaselineError::TooFewPoints { needed: 11, got: 5 })
        ));
        let ds = dataset_from(&points);
        assert!(matches!(
            lof_clean(
                &ds,
                &BaselineConfig {
                    lof_fraction: 1.5,
                    ..Default::default()
                }
            ),
            Err(BaselineError::InvalidConfig(_))
        ));
        assert!(matches!(
            lof_scores(&points, 0),
            Err(BaselineError::InvalidConfig(_))
        ));
    }

    #[test]
    fn lof_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let points: Vec<[f64; 2]> = (0..600)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let ds = dataset_from(&points);
        let cfg = BaselineConfig {
            lof_k: 20,
            lof_fraction: 0.1,
            ..Default::default()
        };
        assert_eq!(lof_clean(&ds, &cfg).unwrap(), lof_clean(&ds, &cfg).unwrap());
    }

    #[test]
    fn kmeans_flags_far_point_not_tight_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut points: Vec<[f64; 2]> = Vec::new();
        for _ in 0..200 {
            points.push([
                0.1 + rng.random::<f64>() * 0.01,
                0.1 + rng.random::<f64>() * 0.01,
            ]);
        }
        for _ in 0..200 {
            points.push([
                0.8 + rng.random::<f64>() * 0.01,
                0.9 + rng.random::<f64>() * 0.01,
            ]);
        }
        points.push([0.5, 0.1]);
        let ds = dataset_from(&points);
        let cfg = BaselineConfig {
            kmeans_k: 2,
            kmeans_sigma: 2.0,
            seed: 7,
            ..Default::default()
        };
        let flags = kmeans_clean(&ds, &cfg).unwrap();
        assert!(flags[400], "the stray point sits far from either centroid");
        let flagged = flags.iter().filter(|f| **f).count();
        assert!(
            flagged < 60,
            "tight clusters should flag few points, got {flagged}"
        );
    }

    #[test]
    fn kmeans_identical_points_flag_nothing() {
        let points = vec![[0.3, 0.7]; 25];
        let ds = dataset_from(&points);
        let cfg = BaselineConfig {
            kmeans_k: 1,
            ..Default::default()
        };
        let flags = kmeans_clean(&ds, &cfg).unwrap();
        assert!(flags.iter().all(|f| !f));
    }

    #[test]
    fn kmeans_is_seed_deterministic_and_validates() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let points: Vec<[f64; 2]> = (0..500)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let ds = dataset_from(&points);
        let cfg = BaselineConfig {
            kmeans_k: 13,
            seed: 3,
            ..Default::default()
        };
        assert_eq!(
            kmeans_clean(&ds, &cfg).unwrap(),
            kmeans_clean(&ds, &cfg).unwrap()
        );

        let tiny = dataset_from(&[[0.0, 0.0], [1.0, 1.0]]);
        assert!(matches!(
            kmeans_clean(
                &tiny,
                &BaselineConfig {
                    kmeans_k: 13,
                    ..Default::default()
                }
            ),
            Err(BaselineError::TooFewPoints { .. })
        ));
        assert!(matches!(
            kmeans_clean(
                &ds,
                &BaselineConfig {
                    kmeans_k: 0,
                    ..Default::default()
                }
            ),
            Err(BaselineError::InvalidConfig(_))
        ));
    }
}
