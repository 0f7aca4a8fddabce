//! Pose-seeded segment proposals.
//!
//! Each joint spawns a 5×5 seed grid over a 40×40 patch; each seed is grown
//! at 8 color thresholds by region growing; candidates enter the pool in
//! generation order unless they overlap an earlier member at IoU ≥ 0.95.

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{iou, rle_decode, rle_encode, ImageRgb, PoseJoints, RleMask, SegmentMask};
use crate::io;

pub const NUM_THRESHOLDS: usize = 8;
pub const GRID_SIDE: usize = 5;
pub const GRID_STEP: f64 = 10.0;
pub const DEDUP_IOU: f64 = 0.95;

/// 8 thresholds geometrically spaced over `[0.02, 0.5]`.
pub fn default_thresholds() -> [f64; NUM_THRESHOLDS] {
    let (lo, hi) = (0.02f64, 0.5f64);
    std::array::from_fn(|i| lo * (hi / lo).powf(i as f64 / (NUM_THRESHOLDS - 1) as f64))
}

/// Where a pool member came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Joint { joint: usize, seed: usize, threshold: usize },
    Grid { seed: usize, threshold: usize },
    GroundTruth { part: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPool {
    pub width: usize,
    pub height: usize,
    pub segments: Vec<SegmentMask>,
    pub provenance: Vec<Provenance>,
}

impl SegmentPool {
    pub fn new(width: usize, height: usize) -> Self {
        SegmentPool {
            width,
            height,
            segments: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Appends `seg` unless it is null or a near-duplicate of a member.
    /// Returns whether it was added.
    pub fn try_push(&mut self, seg: SegmentMask, prov: Provenance) -> Result<bool> {
        if seg.is_null() || self.is_near_duplicate(&seg)? {
            return Ok(false);
        }
        self.segments.push(seg);
        self.provenance.push(prov);
        Ok(true)
    }

    fn is_near_duplicate(&self, seg: &SegmentMask) -> Result<bool> {
        let a = seg.area() as f64;
        for m in &self.segments {
            let b = m.area() as f64;
            // iou ≤ min/max area
            if a.min(b) < DEDUP_IOU * a.max(b) {
                continue;
            }
            if iou(seg, m)? >= DEDUP_IOU {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// The 25 grid points around `joint`, row by row, clamped to the frame.
pub fn seed_grid(joint: [f64; 2], width: usize, height: usize) -> Vec<(usize, usize)> {
    let half = (GRID_SIDE / 2) as f64;
    let clamp = |v: f64, n: usize| -> usize {
        if v.is_nan() {
            0
        } else {
            v.round().clamp(0.0, (n - 1) as f64) as usize
        }
    };
    let mut out = Vec::with_capacity(GRID_SIDE * GRID_SIDE);
    for r in 0..GRID_SIDE {
        for c in 0..GRID_SIDE {
            let dx = (c as f64 - half) * GRID_STEP;
            let dy = (r as f64 - half) * GRID_STEP;
            out.push((clamp(joint[0] + dx, width), clamp(joint[1] + dy, height)));
        }
    }
    out
}

/// Grid positions `0..25` ordered by distance from the patch center, ties
/// row-major. Guided pools visit seeds in this order so that every prefix
/// covers all joints.
pub fn ring_order() -> Vec<usize> {
    let half = (GRID_SIDE / 2) as i64;
    let mut idx: Vec<usize> = (0..GRID_SIDE * GRID_SIDE).collect();
    idx.sort_by_key(|&i| {
        let (r, c) = ((i / GRID_SIDE) as i64 - half, (i % GRID_SIDE) as i64 - half);
        (r * r + c * c, i)
    });
    idx
}

/// A uniform grid of `budget` seeds over the frame, in farthest-point
/// order from the cell nearest the center (ties to the lower row-major
/// index), so every prefix is spread over the whole frame.
pub fn uniform_seeds(width: usize, height: usize, budget: usize) -> Vec<(usize, usize)> {
    if budget == 0 {
        return Vec::new();
    }
    let cols = ((budget as f64 * width as f64 / height as f64).sqrt().round() as usize).clamp(1, budget);
    let rows = budget.div_ceil(cols);
    let mut grid = Vec::with_capacity(budget);
    'outer: for r in 0..rows {
        for c in 0..cols {
            if grid.len() == budget {
                break 'outer;
            }
            let x = ((c as f64 + 0.5) * width as f64 / cols as f64).floor() as usize;
            let y = ((r as f64 + 0.5) * height as f64 / rows as f64).floor() as usize;
            grid.push((x.min(width - 1), y.min(height - 1)));
        }
    }
    let d2 = |a: (usize, usize), b: (usize, usize)| {
        let dx = a.0 as i64 - b.0 as i64;
        let dy = a.1 as i64 - b.1 as i64;
        dx * dx + dy * dy
    };
    let center = (width / 2, height / 2);
    let first = (0..grid.len()).min_by_key(|&i| (d2(grid[i], center), i)).expect("budget > 0");
    let mut nearest: Vec<i64> = grid.iter().map(|&g| d2(g, grid[first])).collect();
    let mut taken = vec![false; grid.len()];
    taken[first] = true;
    let mut out = vec![grid[first]];
    while out.len() < grid.len() {
        let next = (0..grid.len())
            .filter(|&i| !taken[i])
            .max_by_key(|&i| (nearest[i], std::cmp::Reverse(i)))
            .expect("untaken cells remain");
        taken[next] = true;
        out.push(grid[next]);
        for (i, n) in nearest.iter_mut().enumerate() {
            *n = (*n).min(d2(grid[i], grid[next]));
        }
    }
    out
}

fn color_dist(a: [f32; 3], mean: [f64; 3]) -> f64 {
    let d0 = a[0] as f64 - mean[0];
    let d1 = a[1] as f64 - mean[1];
    let d2 = a[2] as f64 - mean[2];
    (d0 * d0 + d1 * d1 + d2 * d2).sqrt()
}

/// Reusable scratch state for region growing on one image.
pub struct Grower<'a> {
    image: &'a ImageRgb,
    stamp: Vec<u32>,
    epoch: u32,
    queue: VecDeque<usize>,
    region: Vec<usize>,
}

impl<'a> Grower<'a> {
    pub fn new(image: &'a ImageRgb) -> Self {
        Grower {
            image,
            stamp: vec![0; image.width() * image.height()],
            epoch: 0,
            queue: VecDeque::new(),
            region: Vec::new(),
        }
    }

    /// Breadth-first growth over 4-neighbours, accepting a pixel when its
    /// color lies within `threshold` of the running region mean.
    pub fn grow(&mut self, seed: (usize, usize), threshold: f64) -> Result<SegmentMask> {
        let (w, h) = (self.image.width(), self.image.height());
        if seed.0 >= w || seed.1 >= h {
            return Err(Error::invalid(format!("seed {seed:?} outside {w}x{h} image")));
        }
        if threshold.is_nan() || threshold <= 0.0 {
            return Err(Error::invalid("threshold must be positive"));
        }
        self.epoch += 1;
        let epoch = self.epoch;
        let px = self.image.pixels();
        self.queue.clear();
        self.region.clear();
        let s = seed.1 * w + seed.0;
        self.stamp[s] = epoch;
        self.queue.push_back(s);
        self.region.push(s);
        let c = px[s];
        let mut sum = [c[0] as f64, c[1] as f64, c[2] as f64];
        while let Some(i) = self.queue.pop_front() {
            let (x, y) = (i % w, i / w);
            let neighbours = [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ];
            for n in neighbours.into_iter().flatten() {
                if self.stamp[n] == epoch {
                    continue;
                }
                let k = self.region.len() as f64;
                let mean = [sum[0] / k, sum[1] / k, sum[2] / k];
                if color_dist(px[n], mean) <= threshold {
                    self.stamp[n] = epoch;
                    let c = px[n];
                    sum[0] += c[0] as f64;
                    sum[1] += c[1] as f64;
                    sum[2] += c[2] as f64;
                    self.region.push(n);
                    self.queue.push_back(n);
                }
            }
        }
        Ok(SegmentMask::from_pixels(
            w,
            h,
            self.region.iter().map(|&i| (i % w, i / w)),
        ))
    }
}

/// One-shot region growing; see [`Grower::grow`].
pub fn grow_segment(image: &ImageRgb, seed: (usize, usize), threshold: f64) -> Result<SegmentMask> {
    Grower::new(image).grow(seed, threshold)
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.len() != NUM_THRESHOLDS {
        return Err(Error::invalid(format!(
            "expected {NUM_THRESHOLDS} thresholds, got {}",
            thresholds.len()
        )));
    }
    if thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0))
        || thresholds.windows(2).any(|p| p[0] >= p[1])
    {
        return Err(Error::invalid("thresholds must be positive and strictly increasing"));
    }
    Ok(())
}

/// Candidate counters of one pool build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PoolStats {
    pub candidates: usize,
    pub grown: usize,
    pub kept: usize,
}

fn grow_into(
    pool: &mut SegmentPool,
    grower: &mut Grower<'_>,
    cache: &mut HashSet<((usize, usize), usize)>,
    stats: &mut PoolStats,
    seed: (usize, usize),
    ti: usize,
    threshold: f64,
    prov: Provenance,
) -> Result<()> {
    stats.candidates += 1;
    // A repeated (seed, threshold) reproduces the same mask, which either
    // already sits in the pool or was rejected against an earlier member.
    if !cache.insert((seed, ti)) {
        return Ok(());
    }
    let seg = grower.grow(seed, threshold)?;
    stats.grown += 1;
    pool.try_push(seg, prov)?;
    Ok(())
}

/// Pose-guided pool: seed positions in [`ring_order`], joints in order
/// within a position, thresholds ascending.
pub fn build_pool(image: &ImageRgb, joints: &PoseJoints, thresholds: &[f64]) -> Result<SegmentPool> {
    build_pool_with_stats(image, joints, thresholds).map(|(p, _)| p)
}

pub fn build_pool_with_stats(
    image: &ImageRgb,
    joints: &PoseJoints,
    thresholds: &[f64],
) -> Result<(SegmentPool, PoolStats)> {
    check_thresholds(thresholds)?;
    let (w, h) = (image.width(), image.height());
    let mut pool = SegmentPool::new(w, h);
    let mut grower = Grower::new(image);
    let mut cache = HashSet::new();
    let mut stats = PoolStats::default();
    let grids: Vec<Vec<(usize, usize)>> = joints.joints.iter().map(|p| seed_grid(*p, w, h)).collect();
    for si in ring_order() {
        for (j, grid) in grids.iter().enumerate() {
            for (ti, &t) in thresholds.iter().enumerate() {
                let prov = Provenance::Joint {
                    joint: j,
                    seed: si,
                    threshold: ti,
                };
                grow_into(&mut pool, &mut grower, &mut cache, &mut stats, grid[si], ti, t, prov)?;
            }
        }
    }
    stats.kept = pool.len();
    Ok((pool, stats))
}

/// Baseline pool from a uniform seed grid with the same seed budget as the
/// pose-guided pool (14 joints × 25 seeds).
pub fn build_unguided_pool(image: &ImageRgb, thresholds: &[f64]) -> Result<SegmentPool> {
    check_thresholds(thresholds)?;
    let (w, h) = (image.width(), image.height());
    let budget = crate::geom::NUM_JOINTS * GRID_SIDE * GRID_SIDE;
    let mut pool = SegmentPool::new(w, h);
    let mut grower = Grower::new(image);
    let mut cache = HashSet::new();
    let mut stats = PoolStats::default();
    for (si, seed) in uniform_seeds(w, h, budget).into_iter().enumerate() {
        for (ti, &t) in thresholds.iter().enumerate() {
            let prov = Provenance::Grid { seed: si, threshold: ti };
            grow_into(&mut pool, &mut grower, &mut cache, &mut stats, seed, ti, t, prov)?;
        }
    }
    Ok(pool)
}

/// Prepends `masks[part]` (non-null entries) to the pool and drops members
/// they duplicate.
pub fn inject_segments(pool: &SegmentPool, masks: &[SegmentMask]) -> Result<SegmentPool> {
    let mut out = SegmentPool::new(pool.width, pool.height);
    for (part, m) in masks.iter().enumerate() {
        out.try_push(m.clone(), Provenance::GroundTruth { part })?;
    }
    for (seg, prov) in pool.segments.iter().zip(&pool.provenance) {
        out.try_push(seg.clone(), *prov)?;
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct PoolRecord {
    mask: RleMask,
    provenance: Provenance,
}

/// One JSON line per segment.
pub fn write_pool(path: &Path, pool: &SegmentPool) -> Result<()> {
    let recs: Vec<PoolRecord> = pool
        .segments
        .iter()
        .zip(&pool.provenance)
        .map(|(s, p)| PoolRecord {
            mask: rle_encode(s),
            provenance: *p,
        })
        .collect();
    io::write_jsonl(path, &recs)
}

pub fn read_pool(path: &Path, width: usize, height: usize) -> Result<SegmentPool> {
    let recs: Vec<PoolRecord> = io::read_jsonl(path)?;
    let mut pool = SegmentPool::new(width, height);
    for r in recs {
        let m = rle_decode(&r.mask)?;
        if m.width() != width || m.height() != height {
            return Err(Error::Parse(format!("{}: mask frame mismatch", path.display())));
        }
        pool.segments.push(m);
        pool.provenance.push(r.provenance);
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scene, GeneratorConfig};

    fn is_connected(m: &SegmentMask) -> bool {
        let Some(start) = m.iter_pixels().next() else {
            return true;
        };
        let mut seen = vec![start];
        let mut stack = vec![start];
        let mut visited = std::collections::HashSet::from([start]);
        while let Some((x, y)) = stack.pop() {
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if m.get_signed(nx, ny) && visited.insert((nx as usize, ny as usize)) {
                    stack.push((nx as usize, ny as usize));
                    seen.push((nx as usize, ny as usize));
                }
            }
        }
        seen.len() == m.area()
    }

    #[test]
    fn thresholds_are_geometric() {
        let t = default_thresholds();
        assert!((t[0] - 0.02).abs() < 1e-12 && (t[7] - 0.5).abs() < 1e-12);
        let r = t[1] / t[0];
        for p in t.windows(2) {
            assert!((p[1] / p[0] - r).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_at_center_and_corner() {
        let g = seed_grid([50.0, 50.0], 100, 100);
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], (30, 30));
        assert_eq!(g[24], (70, 70));
        let g = seed_grid([0.0, 0.0], 100, 100);
        assert!(g.iter().all(|&(x, y)| x < 100 && y < 100));
        assert_eq!(g[0], (0, 0));
        let a = seed_grid([20.0, 50.0], 200, 100);
        let b = seed_grid([120.0, 50.0], 200, 100);
        assert!(a.iter().all(|p| !b.contains(p)));
    }

    #[test]
    fn uniform_grid_has_budget() {
        let s = uniform_seeds(64, 128, 350);
        assert_eq!(s.len(), 350);
        let distinct: std::collections::HashSet<_> = s.iter().collect();
        assert_eq!(distinct.len(), 350);
    }

    #[test]
    fn uniform_image_grows_full_frame() {
        let img = ImageRgb::filled(20, 10, [0.3, 0.4, 0.5]).unwrap();
        assert_eq!(grow_segment(&img, (3, 3), 0.01).unwrap().area(), 200);
        let pool = build_pool(&img, &PoseJoints::new([[5.0, 5.0]; 14]).unwrap(), &default_thresholds()).unwrap();
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn two_tone_image_splits_in_half() {
        let px = (0..16 * 8)
            .map(|i| if i % 16 < 8 { [0.0; 3] } else { [1.0; 3] })
            .collect();
        let img = ImageRgb::new(16, 8, px).unwrap();
        let m = grow_segment(&img, (2, 4), 0.1).unwrap();
        let expect = SegmentMask::from_fn(16, 8, |x, _| x < 8);
        assert_eq!(m, expect);
    }

    #[test]
    fn tiny_threshold_on_noise_is_near_singleton() {
        let scene = generate_scene("t", 1, &GeneratorConfig::default()).unwrap();
        let m = grow_segment(&scene.image, (2, 2), 1e-9).unwrap();
        assert!(m.get(2, 2));
        assert!(m.area() < 10, "{}", m.area());
    }

    #[test]
    fn bad_seed_and_threshold_rejected() {
        let img = ImageRgb::filled(4, 4, [0.0; 3]).unwrap();
        assert!(grow_segment(&img, (4, 0), 0.1).is_err());
        assert!(grow_segment(&img, (0, 0), 0.0).is_err());
        let j = PoseJoints::new([[1.0, 1.0]; 14]).unwrap();
        assert!(build_pool(&img, &j, &[0.1, 0.2]).is_err());
        assert!(build_pool(&img, &j, &[0.1, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]).is_err());
    }

    #[test]
    fn scene_pool_is_unique_connected_and_deterministic() {
        let scene = generate_scene("t", 2, &GeneratorConfig::default()).unwrap();
        let (pool, stats) =
            build_pool_with_stats(&scene.image, &scene.joints, &default_thresholds()).unwrap();
        assert_eq!(stats.candidates, 14 * 25 * 8);
        assert!(pool.len() > 20);
        for i in 0..pool.len() {
            assert!(is_connected(&pool.segments[i]));
            if let Provenance::Joint { joint, seed, .. } = pool.provenance[i] {
                let s = seed_grid(scene.joints.joints[joint], 64, 128)[seed];
                assert!(pool.segments[i].get(s.0, s.1));
            }
            for k in 0..i {
                assert!(iou(&pool.segments[i], &pool.segments[k]).unwrap() < DEDUP_IOU);
            }
        }
        let again = build_pool(&scene.image, &scene.joints, &default_thresholds()).unwrap();
        assert_eq!(again, pool);
    }

    #[test]
    fn injection_prepends_and_keeps_uniqueness() {
        let scene = generate_scene("t", 3, &GeneratorConfig::default()).unwrap();
        let pool = build_pool(&scene.image, &scene.joints, &default_thresholds()).unwrap();
        let gt: Vec<SegmentMask> = (0..crate::parts::NUM_PARTS)
            .map(|p| scene.labels.mask_of(crate::parts::label_of(p)))
            .collect();
        let inj = inject_segments(&pool, &gt).unwrap();
        let visible = gt.iter().filter(|m| !m.is_null()).count();
        for i in 0..visible {
            assert!(matches!(inj.provenance[i], Provenance::GroundTruth { .. }));
        }
        for i in 0..inj.len() {
            for k in 0..i {
                assert!(iou(&inj.segments[i], &inj.segments[k]).unwrap() < DEDUP_IOU);
            }
        }
    }

    #[test]
    fn pool_file_round_trip() {
        let scene = generate_scene("t", 4, &GeneratorConfig::default()).unwrap();
        let pool = build_pool(&scene.image, &scene.joints, &default_thresholds()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        write_pool(&path, &pool).unwrap();
        assert_eq!(read_pool(&path, 64, 128).unwrap(), pool);
    }
}
