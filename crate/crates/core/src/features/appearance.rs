//! Pooled appearance descriptors: second-order color/gradient/position
//! pooling, skin likelihood and potential-map statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{iou, ImageRgb, PotentialStack, SegmentMask};

pub const O2P_BASE_DIM: usize = 7;
pub const O2P_DIM: usize = O2P_BASE_DIM * (O2P_BASE_DIM + 1) / 2;
pub const SKIN_DIM: usize = 3;

/// Per-image gradient magnitudes of the gray image, central differences with
/// clamped borders.
#[derive(Debug, Clone)]
pub struct ImageContext<'a> {
    pub image: &'a ImageRgb,
    grad_x: Vec<f32>,
    grad_y: Vec<f32>,
}

impl<'a> ImageContext<'a> {
    pub fn new(image: &'a ImageRgb) -> Self {
        let (w, h) = (image.width(), image.height());
        let g = image.gray();
        let mut grad_x = vec![0.0; w * h];
        let mut grad_y = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
                grad_x[y * w + x] = ((g[y * w + xr] - g[y * w + xl]) / 2.0).abs();
                grad_y[y * w + x] = ((g[yd * w + x] - g[yu * w + x]) / 2.0).abs();
            }
        }
        ImageContext { image, grad_x, grad_y }
    }

    fn descriptor(&self, x: usize, y: usize) -> [f64; O2P_BASE_DIM] {
        let (w, h) = (self.image.width(), self.image.height());
        let c = self.image.get(x, y);
        let i = y * w + x;
        [
            c[0] as f64,
            c[1] as f64,
            c[2] as f64,
            self.grad_x[i] as f64,
            self.grad_y[i] as f64,
            x as f64 / w as f64,
            y as f64 / h as f64,
        ]
    }
}

fn check_frame(seg: &SegmentMask, w: usize, h: usize) -> Result<()> {
    if seg.width() != w || seg.height() != h {
        return Err(Error::invalid("segment and image sizes differ"));
    }
    if seg.is_null() {
        return Err(Error::invalid("feature of the null segment"));
    }
    Ok(())
}

/// Upper triangle (row-major, with diagonal) of the mean outer product of
/// `[R, G, B, |∂x|, |∂y|, x/W, y/H]` over the segment.
pub fn o2p_pool(ctx: &ImageContext<'_>, seg: &SegmentMask) -> Result<Vec<f64>> {
    check_frame(seg, ctx.image.width(), ctx.image.height())?;
    let mut acc = [[0.0f64; O2P_BASE_DIM]; O2P_BASE_DIM];
    for (x, y) in seg.iter_pixels() {
        let d = ctx.descriptor(x, y);
        for i in 0..O2P_BASE_DIM {
            for j in i..O2P_BASE_DIM {
                acc[i][j] += d[i] * d[j];
            }
        }
    }
    let n = seg.area() as f64;
    let mut out = Vec::with_capacity(O2P_DIM);
    for (i, row) in acc.iter().enumerate() {
        for v in &row[i..] {
            out.push(v / n);
        }
    }
    Ok(out)
}

/// Gaussian skin-color model in normalized rg chromaticity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinModel {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

fn chroma(c: [f32; 3]) -> [f64; 2] {
    let s = c[0] as f64 + c[1] as f64 + c[2] as f64;
    if s <= 0.0 {
        [1.0 / 3.0, 1.0 / 3.0]
    } else {
        [c[0] as f64 / s, c[1] as f64 / s]
    }
}

impl SkinModel {
    /// Fits mean and covariance (ridge 1e-6) to skin-colored pixels.
    pub fn fit(pixels: impl IntoIterator<Item = [f32; 3]>) -> Result<Self> {
        let pts: Vec<[f64; 2]> = pixels.into_iter().map(chroma).collect();
        if pts.len() < 2 {
            return Err(Error::DegenerateData("skin model needs at least 2 pixels".into()));
        }
        let n = pts.len() as f64;
        let mean = [
            pts.iter().map(|p| p[0]).sum::<f64>() / n,
            pts.iter().map(|p| p[1]).sum::<f64>() / n,
        ];
        let mut cov = [[0.0; 2]; 2];
        for p in &pts {
            let d = [p[0] - mean[0], p[1] - mean[1]];
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += d[i] * d[j] / n;
                }
            }
        }
        cov[0][0] += 1e-6;
        cov[1][1] += 1e-6;
        Ok(SkinModel { mean, cov })
    }

    /// `exp(-½ · Mahalanobis²)`, in `(0, 1]`.
    pub fn likelihood(&self, c: [f32; 3]) -> f64 {
        let p = chroma(c);
        let d = [p[0] - self.mean[0], p[1] - self.mean[1]];
        let [[a, b], [_, dd]] = self.cov;
        let det = a * dd - b * b;
        let m2 = (dd * d[0] * d[0] - 2.0 * b * d[0] * d[1] + a * d[1] * d[1]) / det;
        (-0.5 * m2).exp().clamp(0.0, 1.0)
    }
}

/// `[mean, second moment, max]` of the skin likelihood over the segment.
pub fn skin_pool(image: &ImageRgb, seg: &SegmentMask, model: &SkinModel) -> Result<Vec<f64>> {
    check_frame(seg, image.width(), image.height())?;
    let (mut s1, mut s2, mut mx) = (0.0, 0.0, 0.0f64);
    for (x, y) in seg.iter_pixels() {
        let l = model.likelihood(image.get(x, y));
        s1 += l;
        s2 += l * l;
        mx = mx.max(l);
    }
    let n = seg.area() as f64;
    Ok(vec![s1 / n, s2 / n, mx])
}

/// Pixels of `seg` with an in-frame 4-neighbour outside it, i.e.
/// `seg \ erode(seg, 1)`.
pub fn contour_band(seg: &SegmentMask) -> SegmentMask {
    let (w, h) = (seg.width(), seg.height());
    SegmentMask::from_pixels(
        w,
        h,
        seg.iter_pixels()
            .filter(|&(x, y)| {
                let (x, y) = (x as i64, y as i64);
                [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|(dx, dy)| {
                    let (nx, ny) = (x + dx, y + dy);
                    nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && !seg.get_signed(nx, ny)
                })
            })
            .collect::<Vec<_>>(),
    )
}

/// Potential-map feature, `3 (P+1)` values: inside means, contour-band
/// means, IoU with each argmax mask.
pub fn fcn_feature(seg: &SegmentMask, pot: &PotentialStack) -> Result<Vec<f64>> {
    check_frame(seg, pot.width(), pot.height())?;
    let w = pot.width();
    let k = pot.num_maps();
    let mut out = vec![0.0; 3 * k];
    let mean_over = |m: &SegmentMask, dst: &mut [f64]| {
        let n = m.area() as f64;
        if n == 0.0 {
            return;
        }
        for (j, d) in dst.iter_mut().enumerate() {
            let map = pot.map(j);
            *d = m.iter_pixels().map(|(x, y)| map[y * w + x] as f64).sum::<f64>() / n;
        }
    };
    mean_over(seg, &mut out[..k]);
    mean_over(&contour_band(seg), &mut out[k..2 * k]);
    for (j, am) in pot.argmax_masks().iter().enumerate() {
        out[2 * k + j] = iou(seg, am)?;
    }
    Ok(out)
}

/// `[dx, dx², dy, dy², ds, ds²]` from parent to child: centroid offset over
/// the image diagonal and `ds = sqrt(area_child / area_parent)`. Zero if
/// either mask is null.
pub fn pair_geometry(parent: &SegmentMask, child: &SegmentMask, image_diag: f64) -> [f64; 6] {
    pair_geometry_moments(&parent.moments(), &child.moments(), image_diag)
}

pub fn pair_geometry_moments(
    parent: &crate::geom::Moments,
    child: &crate::geom::Moments,
    image_diag: f64,
) -> [f64; 6] {
    match (parent.centroid(), child.centroid()) {
        (Some(p), Some(c)) => {
            let dx = (c.0 - p.0) / image_diag;
            let dy = (c.1 - p.1) / image_diag;
            let ds = (child.count as f64 / parent.count as f64).sqrt();
            [dx, dx * dx, dy, dy * dy, ds, ds * ds]
        }
        _ => [0.0; 6],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{morph, Morph};

    #[test]
    fn o2p_of_uniform_gray_interior() {
        let img = ImageRgb::filled(20, 20, [0.5; 3]).unwrap();
        let ctx = ImageContext::new(&img);
        let seg = SegmentMask::from_fn(20, 20, |x, y| (5..15).contains(&x) && (5..15).contains(&y));
        let v = o2p_pool(&ctx, &seg).unwrap();
        assert_eq!(v.len(), 28);
        // rows 0..3 of the triangle: (0,0),(0,1),(0,2) then (1,1),(1,2) then (2,2)
        for idx in [0, 1, 2, 7, 8, 13] {
            assert!((v[idx] - 0.25).abs() < 1e-12, "{idx}");
        }
        assert_eq!(o2p_pool(&ctx, &seg).unwrap(), v);
        assert!(o2p_pool(&ctx, &SegmentMask::null(20, 20)).is_err());
    }

    #[test]
    fn skin_model_mode_and_range() {
        let skin = [[0.9f32, 0.7, 0.55], [0.85, 0.66, 0.5], [0.8, 0.6, 0.47], [0.92, 0.7, 0.58]];
        let model = SkinModel::fit(skin).unwrap();
        let s = model.mean[0] + model.mean[1];
        let at_mean = [model.mean[0] as f32, model.mean[1] as f32, (1.0 - s) as f32];
        let img = ImageRgb::filled(4, 4, at_mean).unwrap();
        let seg = SegmentMask::from_fn(4, 4, |_, _| true);
        let v = skin_pool(&img, &seg, &model).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-6 && v.iter().all(|x| (0.0..=1.0).contains(x)));
        let blue = ImageRgb::filled(4, 4, [0.1, 0.3, 0.9]).unwrap();
        assert!(skin_pool(&blue, &seg, &model).unwrap()[0] < 0.1);
    }

    #[test]
    fn contour_band_matches_unit_erosion() {
        let seg = SegmentMask::from_fn(30, 20, |x, y| {
            ((x as i64 - 12).pow(2) + (y as i64 - 9).pow(2) <= 40) || (x > 22 && y < 4)
        });
        let er = morph(&seg, 1, Morph::Erode);
        let expect = SegmentMask::from_fn(30, 20, |x, y| seg.get(x, y) && !er.get(x, y));
        assert_eq!(contour_band(&seg), expect);
    }

    #[test]
    fn fcn_on_exact_potentials() {
        let labels: Vec<u8> = (0..100).map(|i| if i % 10 < 4 { 1 } else { 0 }).collect();
        let maps = (0..3)
            .map(|j| labels.iter().map(|&l| (l as usize == j) as u8 as f32).collect())
            .collect();
        let pot = PotentialStack::new(10, 10, maps).unwrap();
        let seg = SegmentMask::from_fn(10, 10, |x, _| x < 4);
        let f = fcn_feature(&seg, &pot).unwrap();
        assert_eq!(&f[6..9], &[0.0, 1.0, 0.0]);

        let half = PotentialStack::new(10, 10, vec![vec![0.5; 100], vec![0.5; 100]]).unwrap();
        let small = SegmentMask::from_fn(10, 10, |x, y| (2..6).contains(&x) && (3..7).contains(&y));
        let f = fcn_feature(&small, &half).unwrap();
        assert_eq!(&f[0..4], &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn fcn_iou_block_matches_pixel_counts() {
        // argmax mask of map 1 is the left 8 columns (80 px); segment covers 40 of them
        let maps = vec![
            (0..100).map(|i| if i % 10 < 8 { 0.2 } else { 0.9 }).collect(),
            (0..100).map(|i| if i % 10 < 8 { 0.8 } else { 0.1 }).collect(),
        ];
        let pot = PotentialStack::new(10, 10, maps).unwrap();
        let seg = SegmentMask::from_fn(10, 10, |x, _| x < 4);
        let f = fcn_feature(&seg, &pot).unwrap();
        let am = &pot.argmax_masks()[1];
        let inter = (0..10)
            .flat_map(|y| (0..10).map(move |x| (x, y)))
            .filter(|&(x, y)| seg.get(x, y) && am.get(x, y))
            .count() as f64;
        let uni = (0..10)
            .flat_map(|y| (0..10).map(move |x| (x, y)))
            .filter(|&(x, y)| seg.get(x, y) || am.get(x, y))
            .count() as f64;
        assert_eq!(f[5], inter / uni);
        assert_eq!(f[5], 0.5);
    }

    #[test]
    fn pair_geometry_cases() {
        let a = SegmentMask::from_fn(40, 40, |x, y| (4..12).contains(&x) && (4..12).contains(&y));
        assert_eq!(pair_geometry(&a, &a, 10.0), [0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let b = a.translated(5, 0);
        let g = pair_geometry(&a, &b, 10.0);
        assert_eq!((g[0], g[2]), (0.5, 0.0));
        let q = SegmentMask::from_fn(40, 40, |x, y| (4..8).contains(&x) && (4..8).contains(&y));
        assert_eq!(pair_geometry(&a, &q, 10.0)[4], 0.5);
        assert_eq!(pair_geometry(&a, &SegmentMask::null(40, 40), 10.0), [0.0; 6]);
        let (f, r) = (pair_geometry(&a, &q, 7.0), pair_geometry(&q, &a, 7.0));
        assert!((f[0] + r[0]).abs() < 1e-15 && (f[2] + r[2]).abs() < 1e-15);
        assert!((f[4] * r[4] - 1.0).abs() < 1e-15);
    }
}
