//! Connected components, outer border tracing and region filling.
//!
//! The pipeline needs the silhouette of the dominant blob in an image: the
//! outer border of the connected component whose filled region (border plus
//! everything it encloses, holes included) covers the most pixels. Borders
//! are traced with the Suzuki-Abe following scheme on the 8-neighborhood;
//! regions are filled with an even-odd scanline rule driven by integer
//! crossing counts, so the fill is exact and needs no floating point.

use std::collections::VecDeque;

use thiserror::Error;

use crate::raster::{BinaryImage, PixelCoord};

#[derive(Debug, Error)]
pub enum ContourError {
    #[error("image has no foreground pixels")]
    EmptyImage,
    #[error("pixel ({x},{y}) outside {width}x{height} canvas")]
    OutOfCanvas {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Labeling of foreground pixels into connected components. Label 0 is
/// background; component labels start at 1 in raster order of their first
/// pixel.
#[derive(Debug, Clone)]
pub struct ComponentMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl ComponentMap {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x},{y}) out of bounds"
        );
        self.labels[y * self.width + x]
    }

    /// Pixel count of a component; `label` is 1-based.
    pub fn size(&self, label: u32) -> usize {
        self.sizes[label as usize - 1]
    }
}

/// Labels connected foreground components with the given connectivity.
pub fn connected_components(img: &BinaryImage, connectivity: Connectivity) -> ComponentMap {
    let (width, height) = img.dimensions();
    let mut labels = vec![0u32; width * height];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    let neighbors: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Connectivity::Eight => &[
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ],
    };
    for seed in img.foreground() {
        if labels[seed.y * width + seed.x] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        let mut size = 0usize;
        labels[seed.y * width + seed.x] = label;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            size += 1;
            for (dx, dy) in neighbors {
                let nx = p.x as isize + dx;
                let ny = p.y as isize + dy;
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                let idx = ny * width + nx;
                if labels[idx] == 0 && img.get(nx, ny) {
                    labels[idx] = label;
                    stack.push(PixelCoord::new(nx, ny));
                }
            }
        }
        sizes.push(size);
    }
    ComponentMap {
        width,
        height,
        labels,
        sizes,
    }
}

/// Clockwise Moore neighborhood starting west: w, nw, n, ne, e, se, s, sw.
const MOORE_CW: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn rotate_to(diffs: &mut VecDeque<(i64, i64)>, target: (i64, i64)) {
    let pos = diffs
        .iter()
        .position(|&d| d == target)
        .expect("target is a Moore offset");
    diffs.rotate_left(pos);
}

/// Traces the outer border of the component containing `start`, following
/// Suzuki-Abe border following on the 8-neighborhood. `start` must be a
/// foreground pixel whose west neighbor is background (the first pixel of a
/// component in raster order always qualifies). Consecutive points are
/// 8-adjacent and the walk closes back to `start`; spur pixels may appear
/// twice.
pub fn trace_outer_border(img: &BinaryImage, start: PixelCoord) -> Vec<PixelCoord> {
    let (width, height) = img.dimensions();
    debug_assert!(img.get(start.x, start.y), "start must be foreground");
    debug_assert!(
        start.x == 0 || !img.get(start.x - 1, start.y),
        "west neighbor must be background"
    );

    let fg = |p: (i64, i64)| -> bool {
        p.0 >= 0
            && p.1 >= 0
            && (p.0 as usize) < width
            && (p.1 as usize) < height
            && img.get(p.0 as usize, p.1 as usize)
    };
    let add = |p: (i64, i64), d: (i64, i64)| (p.0 + d.0, p.1 + d.1);

    let curr = (start.x as i64, start.y as i64);
    let mut diffs: VecDeque<(i64, i64)> = MOORE_CW.into_iter().collect();

    // Clockwise scan from west for the first foreground neighbor.
    let pos1 = match diffs.iter().map(|&d| add(curr, d)).find(|&p| fg(p)) {
        Some(p) => p,
        None => return vec![start],
    };

    let mut points = Vec::new();
    let mut pos2 = pos1;
    let mut pos3 = curr;
    loop {
        points.push(PixelCoord::new(pos3.0 as usize, pos3.1 as usize));
        rotate_to(&mut diffs, (pos2.0 - pos3.0, pos2.1 - pos3.1));
        // Counterclockwise scan starting just past pos2; pos2 itself is
        // foreground, so a neighbor is always found.
        let pos4 = diffs
            .iter()
            .rev()
            .map(|&d| add(pos3, d))
            .find(|&p| fg(p))
            .expect("component has at least pos2");
        if pos4 == curr && pos3 == pos1 {
            break;
        }
        pos2 = pos3;
        pos3 = pos4;
    }
    points
}

/// A closed outer border and the pixel count of the region it encloses
/// (border, interior and any holes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<PixelCoord>,
    pub area: usize,
}

/// A filled region produced by [`fill_region`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    mask: BinaryImage,
}

impl RegionMask {
    pub fn area(&self) -> usize {
        self.mask.count_ones()
    }

    pub fn image(&self) -> &BinaryImage {
        &self.mask
    }

    /// Whether the pixel lies in the filled region. Out-of-canvas queries
    /// are an error rather than `false` so callers cannot silently test
    /// pixels under a different transform.
    pub fn contains(&self, p: PixelCoord) -> Result<bool, ContourError> {
        let (width, height) = self.mask.dimensions();
        if p.x >= width || p.y >= height {
            return Err(ContourError::OutOfCanvas {
                x: p.x,
                y: p.y,
                width,
                height,
            });
        }
        Ok(self.mask.get(p.x, p.y))
    }
}

fn fill_points(
    points: &[PixelCoord],
    width: usize,
    height: usize,
) -> Result<BinaryImage, ContourError> {
    let mut mask = BinaryImage::new(width, height);
    for p in points {
        if p.x >= width || p.y >= height {
            return Err(ContourError::OutOfCanvas {
                x: p.x,
                y: p.y,
                width,
                height,
            });
        }
        mask.set(p.x, p.y, true);
    }
    if points.len() < 2 {
        return Ok(mask);
    }

    // Even-odd scanline fill. Border steps are unit-length, so a step
    // crossing between row k and row k+1 contributes one crossing on row k
    // at the x of its upper endpoint (half-open rule: y_low <= k < y_high).
    // A pixel is interior when the number of crossings strictly to its
    // right is odd.
    let mut crossings: Vec<Vec<usize>> = vec![Vec::new(); height];
    for (i, &p) in points.iter().enumerate() {
        let q = points[(i + 1) % points.len()];
        if p.y != q.y {
            let (y_low, x_at) = if p.y < q.y { (p.y, p.x) } else { (q.y, q.x) };
            crossings[y_low].push(x_at);
        }
    }
    for (y, xs) in crossings.iter_mut().enumerate() {
        if xs.is_empty() {
            continue;
        }
        xs.sort_unstable();
        let total = xs.len();
        let mut at_or_left = 0usize;
        for x in 0..width {
            while at_or_left < total && xs[at_or_left] <= x {
                at_or_left += 1;
            }
            if (total - at_or_left) % 2 == 1 {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

/// Fills the region enclosed by a traced border on a canvas of the given
/// size: all border pixels plus every pixel the border encloses.
pub fn fill_region(
    contour: &Contour,
    width: usize,
    height: usize,
) -> Result<RegionMask, ContourError> {
    Ok(RegionMask {
        mask: fill_points(&contour.points, width, height)?,
    })
}

/// Finds the outer border enclosing the most pixels: traces each
/// 8-connected component's outer border, fills it, and keeps the largest
/// filled area. Ties go to the component whose first pixel comes earliest
/// in raster order.
pub fn max_contour(img: &BinaryImage) -> Result<Contour, ContourError> {
    if img.is_empty() {
        return Err(ContourError::EmptyImage);
    }
    let (width, height) = img.dimensions();
    let components = connected_components(img, Connectivity::Eight);

    struct Candidate {
        start: PixelCoord,
        bbox_area: usize,
    }
    let mut candidates: Vec<Option<Candidate>> = Vec::new();
    let mut bounds: Vec<(usize, usize, usize, usize)> = Vec::new();
    for p in img.foreground() {
        let idx = components.label_at(p.x, p.y) as usize - 1;
        while candidates.len() <= idx {
            candidates.push(None);
            bounds.push((usize::MAX, 0, usize::MAX, 0));
        }
        if candidates[idx].is_none() {
            candidates[idx] = Some(Candidate {
                start: p,
                bbox_area: 0,
            });
        }
        let b = &mut bounds[idx];
        b.0 = b.0.min(p.x);
        b.1 = b.1.max(p.x);
        b.2 = b.2.min(p.y);
        b.3 = b.3.max(p.y);
    }
    let mut candidates: Vec<Candidate> = candidates
        .into_iter()
        .zip(bounds)
        .map(|(c, b)| {
            let mut c = c.expect("every label has pixels");
            c.bbox_area = (b.1 - b.0 + 1) * (b.3 - b.2 + 1);
            c
        })
        .collect();
    // A filled region cannot exceed its border's bounding box, so visiting
    // by descending bbox area lets the scan stop early. Sort is stable, so
    // equal bboxes keep raster order of their start pixels.
    candidates.sort_by_key(|c| std::cmp::Reverse(c.bbox_area));

    let mut best: Option<(usize, PixelCoord, Vec<PixelCoord>)> = None;
    for cand in candidates {
        if let Some((best_area, _, _)) = &best {
            if cand.bbox_area < *best_area {
                break;
            }
        }
        let points = trace_outer_border(img, cand.start);
        let area = fill_points(&points, width, height)?.count_ones();
        let replace = match &best {
            None => true,
            Some((best_area, best_start, _)) => {
                area > *best_area || (area == *best_area && cand.start < *best_start)
            }
        };
        if replace {
            best = Some((area, cand.start, points));
        }
    }
    let (area, _, points) = best.expect("image is non-empty");
    Ok(Contour { points, area })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Ground-truth fill: complement of the 4-connected background region
    /// reachable from outside the canvas.
    fn flood_oracle(trace: &[PixelCoord], width: usize, height: usize) -> BinaryImage {
        let mut on_trace = vec![false; (width + 2) * (height + 2)];
        for p in trace {
            on_trace[(p.y + 1) * (width + 2) + (p.x + 1)] = true;
        }
        let mut outside = vec![false; (width + 2) * (height + 2)];
        let mut stack = vec![(0usize, 0usize)];
        outside[0] = true;
        while let Some((x, y)) = stack.pop() {
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx < 0 || ny < 0 || nx >= (width + 2) as i64 || ny >= (height + 2) as i64 {
                    continue;
                }
                let idx = ny as usize * (width + 2) + nx as usize;
                if !outside[idx] && !on_trace[idx] {
                    outside[idx] = true;
                    stack.push((nx as usize, ny as usize));
                }
            }
        }
        BinaryImage::from_fn(width, height, |x, y| {
            !outside[(y + 1) * (width + 2) + (x + 1)]
        })
    }

    /// Partition oracle: iterate min-label propagation to a fixed point.
    fn propagation_labels(img: &BinaryImage, connectivity: Connectivity) -> Vec<usize> {
        let (w, h) = img.dimensions();
        let mut labels: Vec<usize> = (0..w * h)
            .map(|i| if img.get(i % w, i / w) { i + 1 } else { 0 })
            .collect();
        let offsets: &[(isize, isize)] = match connectivity {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        };
        loop {
            let mut changed = false;
            for y in 0..h {
                for x in 0..w {
                    if labels[y * w + x] == 0 {
                        continue;
                    }
                    for (dx, dy) in offsets {
                        let nx = x as isize + dx;
                        let ny = y as isize + dy;
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let n = labels[ny as usize * w + nx as usize];
                        if n != 0 && n < labels[y * w + x] {
                            labels[y * w + x] = n;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return labels;
            }
        }
    }

    fn random_blobs(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryImage {
        let mut img = BinaryImage::new(w, h);
        for _ in 0..rng.random_range(1..8) {
            let size = rng.random_range(1..6);
            let x = rng.random_range(0..w - size);
            let y = rng.random_range(0..h - size);
            img.stamp(x, y, size);
        }
        for y in 0..h {
            for x in 0..w {
                if rng.random::<f64>() < 0.08 {
                    img.set(x, y, true);
                }
            }
        }
        img
    }

    #[test]
    fn components_of_empty_image() {
        let img = BinaryImage::new(8, 8);
        assert_eq!(connected_components(&img, Connectivity::Eight).count(), 0);
        assert!(matches!(max_contour(&img), Err(ContourError::EmptyImage)));
    }

    #[test]
    fn two_separate_stamps_are_two_components() {
        let mut img = BinaryImage::new(16, 16);
        img.stamp(1, 1, 2);
        img.stamp(10, 10, 2);
        let cc = connected_components(&img, Connectivity::Eight);
        assert_eq!(cc.count(), 2);
        assert_eq!(cc.size(1), 4);
        assert_eq!(cc.size(2), 4);
        assert_eq!(cc.label_at(1, 1), 1);
        assert_eq!(cc.label_at(10, 10), 2);
        assert_eq!(cc.label_at(5, 5), 0);
    }

    #[test]
    fn connectivity_distinguishes_diagonal_touch() {
        let mut img = BinaryImage::new(4, 4);
        img.set(1, 1, true);
        img.set(2, 2, true);
        assert_eq!(connected_components(&img, Connectivity::Eight).count(), 1);
        assert_eq!(connected_components(&img, Connectivity::Four).count(), 2);
    }

    #[test]
    fn components_match_propagation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for connectivity in [Connectivity::Four, Connectivity::Eight] {
            for _ in 0..20 {
                let img = random_blobs(&mut rng, 20, 15);
                let cc = connected_components(&img, connectivity);
                let oracle = propagation_labels(&img, connectivity);
                // Same partition: two pixels share a label in one labeling
                // iff they share one in the other.
                let mut seen: std::collections::HashMap<u32, usize> = Default::default();
                for p in img.foreground() {
                    let ours = cc.label_at(p.x, p.y);
                    let theirs = oracle[p.y * 20 + p.x];
                    match seen.get(&ours) {
                        Some(&t) => assert_eq!(t, theirs, "partition mismatch at {p:?}"),
                        None => {
                            assert!(
                                !seen.values().any(|&t| t == theirs),
                                "two of our labels map to one oracle label"
                            );
                            seen.insert(ours, theirs);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn trace_of_solid_square_is_its_perimeter() {
        let img = BinaryImage::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y));
        let points = trace_outer_border(&img, PixelCoord::new(2, 2));
        assert_eq!(points.len(), 16);
        let unique: std::collections::HashSet<_> = points.iter().collect();
        assert_eq!(unique.len(), 16);
        for p in &points {
            let on_edge = p.x == 2 || p.x == 6 || p.y == 2 || p.y == 6;
            assert!(on_edge, "{p:?} is not on the square's perimeter");
        }
        // Consecutive points are 8-adjacent and the loop closes.
        for (i, p) in points.iter().enumerate() {
            let q = points[(i + 1) % points.len()];
            let dx = (p.x as i64 - q.x as i64).abs();
            let dy = (p.y as i64 - q.y as i64).abs();
            assert!(dx <= 1 && dy <= 1 && (dx, dy) != (0, 0));
        }
    }

    #[test]
    fn trace_degenerate_shapes() {
        let mut img = BinaryImage::new(6, 6);
        img.set(3, 3, true);
        assert_eq!(
            trace_outer_border(&img, PixelCoord::new(3, 3)),
            vec![PixelCoord::new(3, 3)]
        );

        let mut img = BinaryImage::new(6, 6);
        img.set(1, 2, true);
        img.set(2, 2, true);
        let points = trace_outer_border(&img, PixelCoord::new(1, 2));
        assert_eq!(points, vec![PixelCoord::new(1, 2), PixelCoord::new(2, 2)]);
    }

    #[test]
    fn fill_matches_flood_oracle_on_random_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let img = random_blobs(&mut rng, 24, 18);
            if img.is_empty() {
                continue;
            }
            let contour = max_contour(&img).unwrap();
            let mask = fill_region(&contour, 24, 18).unwrap();
            let oracle = flood_oracle(&contour.points, 24, 18);
            assert_eq!(
                *mask.image(),
                oracle,
                "scanline fill disagrees with flood fill for {contour:?}"
            );
        }
    }

    #[test]
    fn fill_includes_holes() {
        // 7x7 ring: outer border encloses the hollow center.
        let img = BinaryImage::from_fn(9, 9, |x, y| {
            let on = (1..8).contains(&x) && (1..8).contains(&y);
            let hole = (2..7).contains(&x) && (2..7).contains(&y);
            on && !hole
        });
        let contour = max_contour(&img).unwrap();
        assert_eq!(contour.area, 49, "filled ring covers the full 7x7 block");
        let mask = fill_region(&contour, 9, 9).unwrap();
        assert!(
            mask.contains(PixelCoord::new(4, 4)).unwrap(),
            "hole center is enclosed"
        );
        assert!(!mask.contains(PixelCoord::new(0, 0)).unwrap());
    }

    #[test]
    fn fill_leaves_open_cavities_out() {
        // U shape: cavity opens upward, so it is not enclosed.
        let img = BinaryImage::from_fn(7, 7, |x, y| {
            let left = x == 1 && (1..6).contains(&y);
            let right = x == 5 && (1..6).contains(&y);
            let bottom = y == 5 && (1..6).contains(&x);
            left || right || bottom
        });
        let contour = max_contour(&img).unwrap();
        let mask = fill_region(&contour, 7, 7).unwrap();
        assert!(
            !mask.contains(PixelCoord::new(3, 3)).unwrap(),
            "open cavity must stay outside"
        );
        assert!(
            mask.contains(PixelCoord::new(1, 3)).unwrap(),
            "arm pixels are on the trace"
        );
    }

    #[test]
    fn max_contour_prefers_largest_filled_area_then_raster_order() {
        let mut img = BinaryImage::new(32, 32);
        img.stamp(20, 2, 3);
        for y in 10..20 {
            for x in 5..15 {
                img.set(x, y, true);
            }
        }
        let contour = max_contour(&img).unwrap();
        assert_eq!(contour.area, 100);
        assert!(contour.points.contains(&PixelCoord::new(5, 10)));

        let mut tie = BinaryImage::new(16, 16);
        tie.stamp(9, 9, 3);
        tie.stamp(2, 1, 3);
        let contour = max_contour(&tie).unwrap();
        assert_eq!(contour.area, 9);
        assert!(
            contour.points.contains(&PixelCoord::new(2, 1)),
            "tie must go to the earlier start pixel"
        );
    }

    #[test]
    fn filled_area_covers_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let img = random_blobs(&mut rng, 20, 20);
            if img.is_empty() {
                continue;
            }
            let contour = max_contour(&img).unwrap();
            let mask = fill_region(&contour, 20, 20).unwrap();
            assert_eq!(mask.area(), contour.area);
            for p in &contour.points {
                assert!(
                    mask.contains(*p).unwrap(),
                    "trace pixel {p:?} must be in the mask"
                );
            }
        }
    }

    #[test]
    fn contains_rejects_out_of_canvas() {
        let mut img = BinaryImage::new(5, 5);
        img.set(2, 2, true);
        let mask = fill_region(&max_contour(&img).unwrap(), 5, 5).unwrap();
        assert!(matches!(
            mask.contains(PixelCoord::new(5, 0)),
            Err(ContourError::OutOfCanvas {
                x: 5,
                y: 0,
                width: 5,
                height: 5
            })
        ));
        assert!(matches!(
            mask.contains(PixelCoord::new(0, 9)),
            Err(ContourError::OutOfCanvas { .. })
        ));
    }

    #[test]
    fn fill_rejects_points_outside_canvas() {
        let contour = Contour {
            points: vec![PixelCoord::new(0, 0), PixelCoord::new(4, 0)],
            area: 0,
        };
        assert!(matches!(
            fill_region(&contour, 3, 3),
            Err(ContourError::OutOfCanvas { x: 4, y: 0, .. })
        ));
    }
}
