//! Pool and parse metrics: average part recall (APR), average part oracle
//! IoU (AOI), per-part pixel accuracy, plus rasterizing and overlays.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{iou, ImageRgb, LabelMap, SegmentMask};
use crate::io;
use crate::parts::{label_of, NUM_PARTS, PAINT_ORDER, PART_NAMES};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// A ground-truth part counts as recalled above this IoU.
pub const RECALL_IOU: f64 = 0.5;

/// Best IoU of each ground-truth part against a pool; `None` for parts that
/// are absent from the ground truth.
pub fn best_overlaps(pool: &[SegmentMask], gt: &[SegmentMask]) -> Result<Vec<Option<f64>>> {
    gt.iter()
        .map(|g| {
            if g.is_null() {
                return Ok(None);
            }
            let mut best = 0.0f64;
            for s in pool {
                best = best.max(iou(g, s)?);
            }
            Ok(Some(best))
        })
        .collect()
}

fn image_mean(best: &[Option<f64>], f: impl Fn(f64) -> f64) -> Option<f64> {
    let vals: Vec<f64> = best.iter().flatten().map(|&b| f(b)).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn dataset_mean(per_image: impl Iterator<Item = Option<f64>>) -> Result<f64> {
    let vals: Vec<f64> = per_image.flatten().collect();
    if vals.is_empty() {
        return Err(Error::DegenerateData("no ground-truth parts in any image".into()));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Mean over images of the fraction of ground-truth parts some pool segment
/// overlaps with IoU > 0.5. Images without ground-truth parts are skipped.
pub fn apr(pools: &[Vec<SegmentMask>], gts: &[Vec<SegmentMask>]) -> Result<f64> {
    check_aligned(pools.len(), gts.len())?;
    let per = pools
        .iter()
        .zip(gts)
        .map(|(p, g)| Ok(image_mean(&best_overlaps(p, g)?, |b| if b > RECALL_IOU { 1.0 } else { 0.0 })))
        .collect::<Result<Vec<_>>>()?;
    dataset_mean(per.into_iter())
}

/// Mean over images of the mean best IoU per ground-truth part.
pub fn aoi(pools: &[Vec<SegmentMask>], gts: &[Vec<SegmentMask>]) -> Result<f64> {
    check_aligned(pools.len(), gts.len())?;
    let per = pools
        .iter()
        .zip(gts)
        .map(|(p, g)| Ok(image_mean(&best_overlaps(p, g)?, |b| b)))
        .collect::<Result<Vec<_>>>()?;
    dataset_mean(per.into_iter())
}

/// Pool prefix sizes at which budget curves are sampled.
pub const CURVE_BUDGETS: [usize; 6] = [25, 50, 100, 200, 400, 800];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub budget: usize,
    pub apr: f64,
    pub aoi: f64,
}

/// APR and AOI when each pool is cut to its first `budget` members.
pub fn pool_curve(pools: &[Vec<SegmentMask>], gts: &[Vec<SegmentMask>], budgets: &[usize]) -> Result<Vec<CurvePoint>> {
    budgets
        .iter()
        .map(|&n| {
            let cut: Vec<Vec<SegmentMask>> = pools.iter().map(|p| p[..n.min(p.len())].to_vec()).collect();
            Ok(CurvePoint {
                budget: n,
                apr: apr(&cut, gts)?,
                aoi: aoi(&cut, gts)?,
            })
        })
        .collect()
}

/// Mean APR and AOI over the points of a curve.
pub fn curve_mean(curve: &[CurvePoint]) -> (f64, f64) {
    let n = curve.len().max(1) as f64;
    (
        curve.iter().map(|c| c.apr).sum::<f64>() / n,
        curve.iter().map(|c| c.aoi).sum::<f64>() / n,
    )
}

fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("{a} pools for {b} ground truths")));
    }
    Ok(())
}

/// Correct and total ground-truth pixels per part, summed over images.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PixelCounts {
    pub correct: Vec<u64>,
    pub total: Vec<u64>,
}

impl PixelCounts {
    pub fn new() -> Self {
        PixelCounts {
            correct: vec![0; NUM_PARTS],
            total: vec![0; NUM_PARTS],
        }
    }

    pub fn add(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(Error::invalid("prediction and ground truth differ in size"));
        }
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            if g == 0 || g as usize > NUM_PARTS {
                continue;
            }
            let part = g as usize - 1;
            self.total[part] += 1;
            if p == g {
                self.correct[part] += 1;
            }
        }
        Ok(())
    }

    /// Recall of each part; `None` where the part never occurs.
    pub fn per_part(&self) -> Vec<Option<f64>> {
        self.correct
            .iter()
            .zip(&self.total)
            .map(|(&c, &t)| (t > 0).then(|| c as f64 / t as f64))
            .collect()
    }

    /// Mean recall over the given parts that occur.
    pub fn mean(&self, parts: &[usize]) -> Option<f64> {
        let per = self.per_part();
        let vals: Vec<f64> = parts.iter().filter_map(|&p| per[p]).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Per-part pixel recall of one prediction and its mean over `parts`.
pub fn pixel_accuracy(pred: &LabelMap, gt: &LabelMap, parts: &[usize]) -> Result<(Vec<Option<f64>>, Option<f64>)> {
    let mut c = PixelCounts::new();
    c.add(pred, gt)?;
    Ok((c.per_part(), c.mean(parts)))
}

/// Paints per-part masks (indexed by part, null for absent parts) in the
/// fixed priority order; later parts win overlaps.
pub fn paint_parts(width: usize, height: usize, masks: &[SegmentMask]) -> Result<LabelMap> {
    if masks.len() != NUM_PARTS {
        return Err(Error::invalid("one mask per part is required"));
    }
    let mut out = LabelMap::background(width, height);
    for &p in &PAINT_ORDER {
        if !masks[p].is_null() {
            out.paint(&masks[p], label_of(p));
        }
    }
    Ok(out)
}

/// Display color per label (background first).
pub const PALETTE: [[u8; 3]; NUM_PARTS + 1] = [
    [0, 0, 0],
    [128, 0, 0],
    [255, 170, 120],
    [0, 85, 85],
    [0, 128, 255],
    [255, 255, 0],
    [170, 255, 85],
    [85, 85, 0],
    [0, 255, 255],
    [51, 170, 221],
    [255, 85, 0],
    [170, 0, 255],
];

/// Image blended half-and-half with label colors; background pixels keep
/// the image.
pub fn overlay(image: &ImageRgb, labels: &LabelMap) -> Result<ImageRgb> {
    if image.width() != labels.width() || image.height() != labels.height() {
        return Err(Error::invalid("image and labels differ in size"));
    }
    let px = image
        .pixels()
        .iter()
        .zip(labels.labels())
        .map(|(c, &l)| {
            if l == 0 {
                *c
            } else {
                let k = PALETTE[(l as usize).min(NUM_PARTS)];
                std::array::from_fn(|i| 0.5 * c[i] + 0.5 * k[i] as f32 / 255.0)
            }
        })
        .collect();
    ImageRgb::new(image.width(), image.height(), px)
}

pub fn write_overlay(path: &Path, image: &ImageRgb, labels: &LabelMap) -> Result<()> {
    io::write_rgb_png(path, &overlay(image, labels)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartMetric {
    pub part: String,
    /// Fraction of images showing the part whose pool recalls it.
    pub recall: Option<f64>,
    pub oracle_iou: Option<f64>,
    pub pixel_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSizeStats {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub label: String,
    pub images: usize,
    pub apr: Option<f64>,
    pub aoi: Option<f64>,
    pub pixel_accuracy: Option<f64>,
    pub parts: Vec<PartMetric>,
    pub pool_sizes: Option<PoolSizeStats>,
    pub meta: RunMeta,
}

/// Accumulates pool and parse statistics image by image.
#[derive(Debug, Clone)]
pub struct ReportBuilder {
    label: String,
    images: usize,
    apr_img: Vec<f64>,
    aoi_img: Vec<f64>,
    part_hits: Vec<(usize, usize)>,
    part_iou: Vec<(f64, usize)>,
    pool_sizes: Vec<usize>,
    pixels: PixelCounts,
    any_parse: bool,
}

impl ReportBuilder {
    pub fn new(label: impl Into<String>) -> Self {
        ReportBuilder {
            label: label.into(),
            images: 0,
            apr_img: Vec::new(),
            aoi_img: Vec::new(),
            part_hits: vec![(0, 0); NUM_PARTS],
            part_iou: vec![(0.0, 0); NUM_PARTS],
            pool_sizes: Vec::new(),
            pixels: PixelCounts::new(),
            any_parse: false,
        }
    }

    /// Adds one image. `pool` may be empty when only a parse is evaluated;
    /// `parse` is the predicted label map, if any.
    pub fn add(&mut self, pool: Option<&[SegmentMask]>, gt_parts: &[SegmentMask], gt_labels: &LabelMap, parse: Option<&LabelMap>) -> Result<()> {
        self.images += 1;
        if let Some(pool) = pool {
            self.pool_sizes.push(pool.len());
            let best = best_overlaps(pool, gt_parts)?;
            if let Some(a) = image_mean(&best, |b| if b > RECALL_IOU { 1.0 } else { 0.0 }) {
                self.apr_img.push(a);
            }
            if let Some(a) = image_mean(&best, |b| b) {
                self.aoi_img.push(a);
            }
            for (p, b) in best.iter().enumerate() {
                if let Some(b) = b {
                    self.part_hits[p].1 += 1;
                    if *b > RECALL_IOU {
                        self.part_hits[p].0 += 1;
                    }
                    self.part_iou[p].0 += b;
                    self.part_iou[p].1 += 1;
                }
            }
        }
        if let Some(pred) = parse {
            self.any_parse = true;
            self.pixels.add(pred, gt_labels)?;
        }
        Ok(())
    }

    pub fn finish(self, meta: RunMeta) -> MetricReport {
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let pix = self.pixels.per_part();
        let parts = (0..NUM_PARTS)
            .map(|p| PartMetric {
                part: PART_NAMES[p].to_string(),
                recall: (self.part_hits[p].1 > 0).then(|| self.part_hits[p].0 as f64 / self.part_hits[p].1 as f64),
                oracle_iou: (self.part_iou[p].1 > 0).then(|| self.part_iou[p].0 / self.part_iou[p].1 as f64),
                pixel_accuracy: if self.any_parse { pix[p] } else { None },
            })
            .collect();
        let all: Vec<usize> = (0..NUM_PARTS).collect();
        MetricReport {
            schema_version: REPORT_SCHEMA_VERSION,
            label: self.label,
            images: self.images,
            apr: mean(&self.apr_img),
            aoi: mean(&self.aoi_img),
            pixel_accuracy: if self.any_parse { self.pixels.mean(&all) } else { None },
            parts,
            pool_sizes: (!self.pool_sizes.is_empty()).then(|| PoolSizeStats {
                mean: self.pool_sizes.iter().sum::<usize>() as f64 / self.pool_sizes.len() as f64,
                min: *self.pool_sizes.iter().min().unwrap(),
                max: *self.pool_sizes.iter().max().unwrap(),
            }),
            meta,
        }
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{:.1}", 100.0 * x))
}

/// Aligned text table: one row per part and a mean row, one column group
/// per report.
pub fn render_table(reports: &[&MetricReport]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<18}", "part");
    for r in reports {
        let _ = write!(out, " | {:>22}", r.label);
    }
    out.push('\n');
    let _ = write!(out, "{:<18}", "");
    for _ in reports {
        let _ = write!(out, " | {:>6} {:>6} {:>8}", "recall", "AOI", "pix.acc");
    }
    out.push('\n');
    for p in 0..NUM_PARTS {
        let _ = write!(out, "{:<18}", PART_NAMES[p]);
        for r in reports {
            let m = &r.parts[p];
            let _ = write!(
                out,
                " | {:>6} {:>6} {:>8}",
                pct(m.recall),
                pct(m.oracle_iou),
                pct(m.pixel_accuracy)
            );
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<18}", "mean");
    for r in reports {
        let _ = write!(out, " | {:>6} {:>6} {:>8}", pct(r.apr), pct(r.aoi), pct(r.pixel_accuracy));
    }
    out.push('\n');
    let _ = write!(out, "{:<18}", "pool size (mean)");
    for r in reports {
        let s = r.pool_sizes.as_ref().map_or("-".into(), |s| format!("{:.1}", s.mean));
        let _ = write!(out, " | {:>22}", s);
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parts::{LEFT_ARM, UPPER_CLOTHES};
    use crate::seed::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    fn rect(x0: usize, x1: usize, y0: usize, y1: usize) -> SegmentMask {
        SegmentMask::from_fn(10, 10, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y))
    }

    fn brute_iou(a: &SegmentMask, b: &SegmentMask) -> f64 {
        let (mut i, mut u) = (0, 0);
        for y in 0..a.height() {
            for x in 0..a.width() {
                let (p, q) = (a.get(x, y), b.get(x, y));
                i += (p && q) as usize;
                u += (p || q) as usize;
            }
        }
        if u == 0 {
            1.0
        } else {
            i as f64 / u as f64
        }
    }

    #[test]
    fn perfect_pools_score_one() {
        let gt = vec![rect(0, 3, 0, 3), rect(5, 9, 5, 9)];
        assert_eq!(apr(&[gt.clone()], &[gt.clone()]).unwrap(), 1.0);
        assert_eq!(aoi(&[gt.clone()], &[gt.clone()]).unwrap(), 1.0);
    }

    #[test]
    fn half_recall_hand_case() {
        // gt a: 10 px; pool seg covers 6 of them exactly -> IoU 0.6
        let a = rect(0, 10, 0, 1);
        let b = rect(0, 10, 5, 6);
        let seg = rect(0, 6, 0, 1);
        assert!((brute_iou(&a, &seg) - 0.6).abs() < 1e-12);
        assert_eq!(apr(&[vec![seg.clone()]], &[vec![a.clone(), b.clone()]]).unwrap(), 0.5);
    }

    #[test]
    fn boundary_iou_is_not_recall() {
        let a = rect(0, 10, 0, 1);
        let half = rect(0, 5, 0, 1);
        let other = rect(0, 10, 3, 4);
        assert_eq!(apr(&[vec![half]], &[vec![a, other]]).unwrap(), 0.0);
    }

    #[test]
    fn aoi_hand_case_and_empty_gt() {
        // 73 of 100 gt pixels, no extras -> 0.73
        let gt = SegmentMask::from_fn(10, 10, |_, _| true);
        let seg = SegmentMask::from_fn(10, 10, |x, y| y * 10 + x < 73);
        assert!((aoi(&[vec![seg]], &[vec![gt]]).unwrap() - 0.73).abs() < 1e-12);
        let none = vec![SegmentMask::null(10, 10)];
        assert!(matches!(aoi(&[vec![]], &[none]), Err(Error::DegenerateData(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn metrics_match_brute_force(seed in 0u64..u64::MAX, ns in 0usize..=5, ng in 1usize..=3) {
            let mut rng = rng_from(seed);
            let mut r = || {
                let x0 = rng.random_range(0..8);
                let y0 = rng.random_range(0..8);
                let w = rng.random_range(1..4);
                let h = rng.random_range(1..4);
                rect(x0, x0 + w, y0, y0 + h)
            };
            let pool: Vec<SegmentMask> = (0..ns).map(|_| r()).collect();
            let gt: Vec<SegmentMask> = (0..ng).map(|_| r()).collect();
            let best: Vec<f64> = gt.iter().map(|g| pool.iter().map(|s| brute_iou(g, s)).fold(0.0, f64::max)).collect();
            let expect_aoi = best.iter().sum::<f64>() / ng as f64;
            let expect_apr = best.iter().filter(|&&b| b > 0.5).count() as f64 / ng as f64;
            prop_assert_eq!(aoi(&[pool.clone()], &[gt.clone()]).unwrap(), expect_aoi);
            prop_assert_eq!(apr(&[pool.clone()], &[gt.clone()]).unwrap(), expect_apr);
            if expect_apr == 1.0 {
                prop_assert!(expect_aoi > 0.5);
            }
            // more segments never lower AOI
            let mut bigger = pool.clone();
            bigger.push(r());
            prop_assert!(aoi(&[bigger], &[gt.clone()]).unwrap() >= expect_aoi);
            // image order does not matter
            let other = vec![r()];
            let a = aoi(&[pool.clone(), other.clone()], &[gt.clone(), gt.clone()]).unwrap();
            let b = aoi(&[other, pool], &[gt.clone(), gt]).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn pixel_accuracy_cases() {
        let mut gt = LabelMap::background(4, 2);
        for x in 0..4 {
            gt.set(x, 0, 1);
        }
        let (per, mean) = pixel_accuracy(&gt, &gt, &[0]).unwrap();
        assert_eq!(per[0], Some(1.0));
        assert_eq!(mean, Some(1.0));
        let bg = LabelMap::background(4, 2);
        assert_eq!(pixel_accuracy(&bg, &gt, &[0]).unwrap().1, Some(0.0));
        let mut half = LabelMap::background(4, 2);
        half.set(0, 0, 1);
        half.set(1, 0, 1);
        assert_eq!(pixel_accuracy(&half, &gt, &[0]).unwrap().0[0], Some(0.5));
        assert!(pixel_accuracy(&LabelMap::background(3, 2), &gt, &[0]).is_err());
    }

    #[test]
    fn painting_priority() {
        let mut masks = vec![SegmentMask::null(10, 10); NUM_PARTS];
        assert!(paint_parts(10, 10, &masks).unwrap().labels().iter().all(|&l| l == 0));
        masks[UPPER_CLOTHES] = rect(0, 6, 0, 10);
        masks[LEFT_ARM] = rect(4, 10, 0, 10);
        let m = paint_parts(10, 10, &masks).unwrap();
        assert_eq!(m.get(5, 5), label_of(LEFT_ARM));
        assert_eq!(m.get(1, 5), label_of(UPPER_CLOTHES));
        assert_eq!(m.get(8, 5), label_of(LEFT_ARM));
    }

    #[test]
    fn report_and_table() {
        let gt_parts: Vec<SegmentMask> = (0..NUM_PARTS)
            .map(|p| if p < 2 { rect(p * 5, p * 5 + 4, 0, 4) } else { SegmentMask::null(10, 10) })
            .collect();
        let labels = paint_parts(10, 10, &gt_parts).unwrap();
        let mut b = ReportBuilder::new("guided");
        b.add(Some(&gt_parts[..1]), &gt_parts, &labels, Some(&labels)).unwrap();
        let r = b.finish(RunMeta { seed: 1, config_hash: "x".into() });
        assert_eq!(r.apr, Some(0.5));
        assert_eq!(r.parts[0].recall, Some(1.0));
        assert_eq!(r.parts[1].recall, Some(0.0));
        assert_eq!(r.pixel_accuracy, Some(1.0));
        let t = render_table(&[&r, &r]);
        assert!(t.contains("hair") && t.contains("mean"));
        let widths: Vec<usize> = t.lines().map(|l| l.chars().count()).collect();
        assert!(widths.iter().all(|&w| w == widths[0]));
    }
}
