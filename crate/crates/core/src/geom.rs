//! Shared geometry: images, label maps, pose joints, binary segment masks
//! and the per-class potential stacks.
//!
//! Pixel coordinates are `x = column`, `y = row`, origin at the top-left
//! corner. Every other module follows this convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of pose joints.
pub const NUM_JOINTS: usize = 14;

/// Joint names in the fixed storage order.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "forehead",
    "neck",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// Indices into [`PoseJoints::joints`].
pub mod joint {
    pub const FOREHEAD: usize = 0;
    pub const NECK: usize = 1;
    pub const L_SHOULDER: usize = 2;
    pub const R_SHOULDER: usize = 3;
    pub const L_ELBOW: usize = 4;
    pub const R_ELBOW: usize = 5;
    pub const L_WRIST: usize = 6;
    pub const R_WRIST: usize = 7;
    pub const L_HIP: usize = 8;
    pub const R_HIP: usize = 9;
    pub const L_KNEE: usize = 10;
    pub const R_KNEE: usize = 11;
    pub const L_ANKLE: usize = 12;
    pub const R_ANKLE: usize = 13;
}

/// RGB image with channels in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    pixels: Vec<[f32; 3]>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image must be at least 1x1"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if pixels
            .iter()
            .flatten()
            .any(|c| !(0.0..=1.0).contains(c) || c.is_nan())
        {
            return Err(Error::invalid("channel value outside [0,1]"));
        }
        Ok(ImageRgb {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: [f32; 3]) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    /// Luminance as the plain channel mean.
    pub fn gray(&self) -> Vec<f32> {
        self.pixels
            .iter()
            .map(|p| (p[0] + p[1] + p[2]) / 3.0)
            .collect()
    }
}

/// Per-pixel part index: 0 is background, `1..=P` are part categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::invalid("label map dimensions do not match data"));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn background(width: usize, height: usize) -> Self {
        LabelMap {
            width,
            height,
            labels: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        self.labels[y * self.width + x] = label;
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn max_label(&self) -> u8 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Binary mask of the pixels carrying `label`.
    pub fn mask_of(&self, label: u8) -> SegmentMask {
        SegmentMask::from_fn(self.width, self.height, |x, y| self.get(x, y) == label)
    }

    /// Paints the true pixels of `mask` with `label`.
    pub fn paint(&mut self, mask: &SegmentMask, label: u8) {
        for (x, y) in mask.iter_pixels() {
            self.set(x, y, label);
        }
    }
}

/// The 14 pose joints, `[x, y]` in pixel coordinates, in [`JOINT_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoseJoints {
    pub joints: [[f64; 2]; NUM_JOINTS],
}

impl PoseJoints {
    pub fn new(joints: [[f64; 2]; NUM_JOINTS]) -> Result<Self> {
        if joints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("joint coordinates must be finite"));
        }
        Ok(PoseJoints { joints })
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut joints = self.joints;
        for j in &mut joints {
            j[0] += dx;
            j[1] += dy;
        }
        PoseJoints { joints }
    }

    /// Nearest pixel of joint `j` (halves round up), or `None` if it falls
    /// outside a `width x height` frame.
    pub fn pixel(&self, j: usize, width: usize, height: usize) -> Option<(usize, usize)> {
        let x = (self.joints[j][0] + 0.5).floor();
        let y = (self.joints[j][1] + 0.5).floor();
        if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
            None
        } else {
            Some((x as usize, y as usize))
        }
    }
}

/// Tight inclusive bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn overlaps(&self, other: &BBox) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }
}

/// Zeroth and first order pixel moments of a mask.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum_x: u64,
    pub sum_y: u64,
}

impl Moments {
    pub fn centroid(&self) -> Option<(f64, f64)> {
        (self.count > 0).then(|| {
            (
                self.sum_x as f64 / self.count as f64,
                self.sum_y as f64 / self.count as f64,
            )
        })
    }
}

// Bit j of a word position selects these bits; used to sum set-bit positions
// with popcounts.
const POS_BIT_MASKS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Binary pixel mask. Rows are packed into 64-bit words (padded per row), so
/// overlap counts are popcounts. A mask with zero area is the null segment.
#[derive(Clone, PartialEq, Eq)]
pub struct SegmentMask {
    width: usize,
    height: usize,
    words_per_row: usize,
    words: Vec<u64>,
    area: usize,
    bbox: Option<BBox>,
}

impl std::fmt::Debug for SegmentMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SegmentMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area)
            .field("bbox", &self.bbox)
            .finish()
    }
}

impl SegmentMask {
    /// The null segment of the given frame size.
    pub fn null(width: usize, height: usize) -> Self {
        let words_per_row = width.div_ceil(64);
        SegmentMask {
            width,
            height,
            words_per_row,
            words: vec![0; words_per_row * height],
            area: 0,
            bbox: None,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::null(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.words[y * m.words_per_row + x / 64] |= 1u64 << (x % 64);
                }
            }
        }
        m.refresh();
        m
    }

    /// Builds a mask from row-major booleans.
    pub fn from_bools(width: usize, height: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self::from_fn(width, height, |x, y| bits[y * width + x]))
    }

    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut m = Self::null(width, height);
        for (x, y) in pixels {
            if x < width && y < height {
                m.words[y * m.words_per_row + x / 64] |= 1u64 << (x % 64);
            }
        }
        m.refresh();
        m
    }

    fn refresh(&mut self) {
        let mut area = 0usize;
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            let row = &self.words[y * self.words_per_row..(y + 1) * self.words_per_row];
            let mut row_any = false;
            for (wi, &w) in row.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                row_any = true;
                area += w.count_ones() as usize;
                x0 = x0.min(wi * 64 + w.trailing_zeros() as usize);
                x1 = x1.max(wi * 64 + 63 - w.leading_zeros() as usize);
            }
            if row_any {
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        }
        self.area = area;
        self.bbox = (area > 0).then_some(BBox { x0, y0, x1, y1 });
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.bbox
    }

    pub fn is_null(&self) -> bool {
        self.area == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        (self.words[y * self.words_per_row + x / 64] >> (x % 64)) & 1 == 1
    }

    /// Bounds-checked lookup with signed coordinates; outside the frame is false.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.get(x, y));
            }
        }
        out
    }

    /// True pixels in row-major order.
    pub fn iter_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let wpr = self.words_per_row;
        self.words.iter().enumerate().flat_map(move |(i, &w)| {
            let y = i / wpr;
            let base = (i % wpr) * 64;
            BitIter(w).map(move |b| (base + b, y))
        })
    }

    pub fn same_frame(&self, other: &SegmentMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    fn check_frame(&self, other: &SegmentMask) -> Result<()> {
        if self.same_frame(other) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "mask dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Number of pixels set in both masks.
    pub fn intersection_area(&self, other: &SegmentMask) -> Result<usize> {
        self.check_frame(other)?;
        match (self.bbox, other.bbox) {
            (Some(a), Some(b)) if a.overlaps(&b) => {}
            _ => return Ok(0),
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    /// Whether every true pixel of `self` is also true in `other`.
    pub fn is_subset_of(&self, other: &SegmentMask) -> bool {
        self.same_frame(other) && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn moments(&self) -> Moments {
        moments_of_words(&self.words, self.words_per_row)
    }

    pub(crate) fn from_words(width: usize, height: usize, words: Vec<u64>) -> Self {
        let mut m = SegmentMask {
            width,
            height,
            words_per_row: width.div_ceil(64),
            words,
            area: 0,
            bbox: None,
        };
        debug_assert_eq!(m.words.len(), m.words_per_row * height);
        m.refresh();
        m
    }

    /// Same mask shifted by `(dx, dy)`; pixels leaving the frame are dropped.
    pub fn translated(&self, dx: i64, dy: i64) -> SegmentMask {
        SegmentMask::from_pixels(
            self.width,
            self.height,
            self.iter_pixels().filter_map(|(x, y)| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                (nx >= 0 && ny >= 0).then_some((nx as usize, ny as usize))
            }),
        )
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;
    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(b)
    }
}

pub(crate) fn moments_of_words(words: &[u64], words_per_row: usize) -> Moments {
    let mut m = Moments::default();
    for (i, &w) in words.iter().enumerate() {
        if w == 0 {
            continue;
        }
        let c = w.count_ones() as u64;
        let y = (i / words_per_row) as u64;
        let base = ((i % words_per_row) * 64) as u64;
        let mut pos = 0u64;
        for (j, bm) in POS_BIT_MASKS.iter().enumerate() {
            pos += ((w & bm).count_ones() as u64) << j;
        }
        m.count += c;
        m.sum_x += base * c + pos;
        m.sum_y += y * c;
    }
    m
}

/// Intersection over union. `iou(null, null) = 1`, `iou(null, nonempty) = 0`.
pub fn iou(a: &SegmentMask, b: &SegmentMask) -> Result<f64> {
    a.check_frame(b)?;
    if a.is_null() && b.is_null() {
        return Ok(1.0);
    }
    let inter = a.intersection_area(b)?;
    let union = a.area + b.area - inter;
    Ok(inter as f64 / union as f64)
}

/// Pixel-wise OR of all masks.
pub fn mask_union(children: &[&SegmentMask]) -> Result<SegmentMask> {
    let first = children
        .first()
        .ok_or_else(|| Error::invalid("mask_union of an empty list"))?;
    let mut words = first.words.clone();
    for m in &children[1..] {
        first.check_frame(m)?;
        for (w, o) in words.iter_mut().zip(&m.words) {
            *w |= o;
        }
    }
    Ok(SegmentMask::from_words(first.width, first.height, words))
}

/// Morphology mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Morph {
    Erode,
    Dilate,
}

/// Erosion or dilation with a Euclidean disc `{dx² + dy² <= r²}`.
///
/// Only in-frame pixels take part: erosion removes a pixel when some
/// in-frame background pixel lies within the disc.
pub fn morph(mask: &SegmentMask, radius: u32, mode: Morph) -> SegmentMask {
    if radius == 0 {
        return mask.clone();
    }
    let r2 = (radius as f64) * (radius as f64);
    let (w, h) = (mask.width, mask.height);
    match mode {
        Morph::Dilate => {
            let d = squared_distance_to(mask, true);
            SegmentMask::from_fn(w, h, |x, y| d[y * w + x] <= r2)
        }
        Morph::Erode => {
            let d = squared_distance_to(mask, false);
            SegmentMask::from_fn(w, h, |x, y| mask.get(x, y) && d[y * w + x] > r2)
        }
    }
}

/// Exact squared Euclidean distance from each pixel to the nearest pixel whose
/// mask value equals `target` (separable lower-envelope transform).
pub fn squared_distance_to(mask: &SegmentMask, target: bool) -> Vec<f64> {
    let (w, h) = (mask.width, mask.height);
    let mut grid: Vec<f64> = (0..w * h)
        .map(|i| {
            if mask.get(i % w, i / w) == target {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        dt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        dt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    // Sites with infinite cost never enter the envelope.
    let mut k: isize = -1;
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        d.fill(f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let diff = q as f64 - p as f64;
        *dq = diff * diff + f[p];
    }
}

/// Arithmetic mean of the true-pixel coordinates.
pub fn centroid(mask: &SegmentMask) -> Result<(f64, f64)> {
    mask.moments()
        .centroid()
        .ok_or_else(|| Error::invalid("centroid of the null segment"))
}

/// Row-major run-length record. Runs alternate false/true counts starting
/// with false; pixels after the last run are false, so the null segment has
/// no runs at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub w: usize,
    pub h: usize,
    pub runs: Vec<u64>,
}

pub fn rle_encode(mask: &SegmentMask) -> RleMask {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u64;
    for y in 0..mask.height {
        for x in 0..mask.width {
            let v = mask.get(x, y);
            if v != current {
                runs.push(count);
                count = 0;
                current = v;
            }
            count += 1;
        }
    }
    if current {
        runs.push(count);
    }
    RleMask {
        w: mask.width,
        h: mask.height,
        runs,
    }
}

pub fn rle_decode(rec: &RleMask) -> Result<SegmentMask> {
    let total = rec.w * rec.h;
    let mut mask = SegmentMask::null(rec.w, rec.h);
    let mut idx = 0usize;
    for (i, &run) in rec.runs.iter().enumerate() {
        if run == 0 && i > 0 {
            return Err(Error::Parse(format!("zero-length run at position {i}")));
        }
        let end = idx
            .checked_add(run as usize)
            .filter(|&e| e <= total)
            .ok_or_else(|| Error::Parse(format!("runs exceed {}x{} frame", rec.w, rec.h)))?;
        if i % 2 == 1 {
            for p in idx..end {
                let (x, y) = (p % rec.w, p / rec.w);
                mask.words[y * mask.words_per_row + x / 64] |= 1u64 << (x % 64);
            }
        }
        idx = end;
    }
    mask.refresh();
    Ok(mask)
}

/// `P + 1` per-class maps in `[0, 1]` (index 0 = background) and their
/// per-pixel argmax masks.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialStack {
    width: usize,
    height: usize,
    maps: Vec<Vec<f32>>,
    argmax_masks: Vec<SegmentMask>,
}

impl PotentialStack {
    pub fn new(width: usize, height: usize, maps: Vec<Vec<f32>>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::invalid("potential stack needs at least one map"));
        }
        for m in &maps {
            if m.len() != width * height {
                return Err(Error::invalid("potential map size mismatch"));
            }
            if m.iter().any(|v| !(0.0..=1.0).contains(v) || v.is_nan()) {
                return Err(Error::invalid("potential value outside [0,1]"));
            }
        }
        let mut owner = vec![0usize; width * height];
        for (i, o) in owner.iter_mut().enumerate() {
            let mut best = maps[0][i];
            for (j, m) in maps.iter().enumerate().skip(1) {
                if m[i] > best {
                    best = m[i];
                    *o = j;
                }
            }
        }
        let argmax_masks = (0..maps.len())
            .map(|j| SegmentMask::from_fn(width, height, |x, y| owner[y * width + x] == j))
            .collect();
        Ok(PotentialStack {
            width,
            height,
            maps,
            argmax_masks,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[Vec<f32>] {
        &self.maps
    }

    pub fn map(&self, j: usize) -> &[f32] {
        &self.maps[j]
    }

    pub fn argmax_masks(&self) -> &[SegmentMask] {
        &self.argmax_masks
    }

    /// Label map of the per-pixel argmax.
    pub fn argmax_labels(&self) -> LabelMap {
        let mut lm = LabelMap::background(self.width, self.height);
        for (j, m) in self.argmax_masks.iter().enumerate() {
            lm.paint(m, j as u8);
        }
        lm
    }
}
