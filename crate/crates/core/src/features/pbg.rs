//! Pose-based geometric feature: every joint falls into one of 24 bins
//! (3 region scales × 8 orientations) relative to the segment.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PoseJoints, SegmentMask, NUM_JOINTS};

pub const PBG_RADIUS: i64 = 10;
pub const NUM_SECTORS: usize = 8;
pub const NUM_SCALES: usize = 3;
pub const BINS_PER_JOINT: usize = NUM_SECTORS * NUM_SCALES;
pub const PBG_DIM: usize = NUM_JOINTS * BINS_PER_JOINT;

/// Region scale of a joint relative to a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    /// Inside the 10-px erosion.
    S1 = 0,
    /// Inside the 10-px dilation but not the erosion.
    S2 = 1,
    /// Elsewhere, including off-frame.
    S3 = 2,
}

/// One bin per joint, `bin = scale * 8 + sector`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PbgFeature {
    pub bins: [u8; NUM_JOINTS],
}

impl PbgFeature {
    /// Positions of the 14 set bits in the 336-dim vector.
    pub fn hot(&self) -> [usize; NUM_JOINTS] {
        std::array::from_fn(|j| j * BINS_PER_JOINT + self.bins[j] as usize)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; PBG_DIM];
        for i in self.hot() {
            v[i] = 1.0;
        }
        v
    }

    pub fn scale(&self, joint: usize) -> Scale {
        match self.bins[joint] as usize / NUM_SECTORS {
            0 => Scale::S1,
            1 => Scale::S2,
            _ => Scale::S3,
        }
    }

    pub fn sector(&self, joint: usize) -> usize {
        self.bins[joint] as usize % NUM_SECTORS
    }
}

/// Offsets of the radius-10 Euclidean disc.
fn disc_offsets() -> &'static [(i64, i64)] {
    static CELL: OnceLock<Vec<(i64, i64)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let r = PBG_RADIUS;
        let mut v = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    v.push((dx, dy));
                }
            }
        }
        v
    })
}

/// Scale bin of pixel `(x, y)`; agrees with testing membership in
/// `morph(seg, 10, Erode)` and `morph(seg, 10, Dilate)`.
pub fn scale_of_pixel(seg: &SegmentMask, p: Option<(usize, usize)>) -> Scale {
    let Some((x, y)) = p else {
        return Scale::S3;
    };
    let (w, h) = (seg.width() as i64, seg.height() as i64);
    let (x, y) = (x as i64, y as i64);
    let Some(bb) = seg.bbox() else {
        return Scale::S3;
    };
    if x < bb.x0 as i64 - PBG_RADIUS
        || x > bb.x1 as i64 + PBG_RADIUS
        || y < bb.y0 as i64 - PBG_RADIUS
        || y > bb.y1 as i64 + PBG_RADIUS
    {
        return Scale::S3;
    }
    let mut any_in = false;
    let mut all_in = seg.get(x as usize, y as usize);
    for &(dx, dy) in disc_offsets() {
        let (qx, qy) = (x + dx, y + dy);
        if qx < 0 || qy < 0 || qx >= w || qy >= h {
            continue;
        }
        if seg.get(qx as usize, qy as usize) {
            any_in = true;
        } else {
            all_in = false;
        }
        if any_in && !all_in {
            break;
        }
    }
    if all_in {
        Scale::S1
    } else if any_in {
        Scale::S2
    } else {
        Scale::S3
    }
}

/// Orientation sector of the vector `(dx, -dy)` (image y points down), with
/// sector 0 starting east and counting counter-clockwise in 45° steps. A
/// vector on a sector boundary belongs to the lower-index sector; the zero
/// vector is sector 0.
pub fn sector_of(dx: f64, dy_image: f64) -> usize {
    let u = dx;
    let v = -dy_image;
    if u == 0.0 && v == 0.0 {
        return 0;
    }
    if u > 0.0 && v >= 0.0 && v <= u {
        0
    } else if v > 0.0 && u >= 0.0 {
        1
    } else if u < 0.0 && v > 0.0 && v >= -u {
        2
    } else if u < 0.0 && v >= 0.0 {
        3
    } else if u < 0.0 && -v <= -u {
        4
    } else if u <= 0.0 {
        5
    } else if -v >= u {
        6
    } else {
        7
    }
}

/// PBG feature of a non-null segment.
pub fn pbg(segment: &SegmentMask, joints: &PoseJoints) -> Result<PbgFeature> {
    let m = segment.moments();
    if m.count == 0 {
        return Err(Error::invalid("PBG of the null segment"));
    }
    let (w, h) = (segment.width(), segment.height());
    let c = m.count as f64;
    let mut bins = [0u8; NUM_JOINTS];
    for (j, bin) in bins.iter_mut().enumerate() {
        let [jx, jy] = joints.joints[j];
        // Offsets scaled by the pixel count; exact for dyadic joints, which
        // keeps the sector invariant under integer translation.
        let sx = scaled_offset(jx, m.sum_x, m.count, c);
        let sy = scaled_offset(jy, m.sum_y, m.count, c);
        let sector = sector_of(sx, sy);
        let scale = scale_of_pixel(segment, joints.pixel(j, w, h));
        *bin = (scale as usize * NUM_SECTORS + sector) as u8;
    }
    Ok(PbgFeature { bins })
}

fn scaled_offset(j: f64, sum: u64, count: u64, c: f64) -> f64 {
    let fl = j.floor();
    let frac = j - fl;
    let int_part = fl as i128 * count as i128 - sum as i128;
    int_part as f64 + frac * c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{morph, Morph};
    use proptest::prelude::*;

    fn angle_oracle(u: f64, v: f64) -> usize {
        if u == 0.0 && v == 0.0 {
            return 0;
        }
        let a = v.atan2(u).to_degrees();
        let a = if a < 0.0 { a + 360.0 } else { a };
        // an exact positive multiple of 45° belongs to the sector below it
        let k = (a / 45.0).floor() as usize % 8;
        if (a / 45.0).fract() == 0.0 && a > 0.0 {
            k - 1
        } else {
            k
        }
    }

    #[test]
    fn sectors_on_axes_and_diagonals() {
        // (dx, image dy)
        let cases = [
            ((1.0, 0.0), 0),
            ((1.0, -1.0), 0),
            ((0.0, -1.0), 1),
            ((-1.0, -1.0), 2),
            ((-1.0, 0.0), 3),
            ((-1.0, 1.0), 4),
            ((0.0, 1.0), 5),
            ((1.0, 1.0), 6),
            ((2.0, 1.0), 7),
            ((0.0, 0.0), 0),
        ];
        for ((dx, dy), s) in cases {
            assert_eq!(sector_of(dx, dy), s, "({dx},{dy})");
        }
    }

    #[test]
    fn sectors_match_angle_oracle_on_grid() {
        for u in -6..=6 {
            for v in -6..=6 {
                let (u, v) = (u as f64, v as f64);
                let expect = angle_oracle(u, v);
                assert_eq!(sector_of(u, -v), expect, "u={u} v={v}");
            }
        }
    }

    fn disc(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> SegmentMask {
        SegmentMask::from_fn(w, h, |x, y| {
            (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r
        })
    }

    #[test]
    fn centered_joint_in_big_disc_is_s1_sector0() {
        let seg = disc(101, 101, 50.0, 50.0, 30.0);
        let f = pbg(&seg, &PoseJoints::new([[50.0, 50.0]; 14]).unwrap()).unwrap();
        for j in 0..14 {
            assert_eq!(f.scale(j), Scale::S1);
            assert_eq!(f.sector(j), 0);
        }
        assert_eq!(f.to_dense().iter().filter(|v| **v == 1.0).count(), 14);
    }

    #[test]
    fn far_east_joint_is_s3_sector0() {
        let seg = disc(101, 101, 50.0, 50.0, 3.0);
        let f = pbg(&seg, &PoseJoints::new([[550.0, 50.0]; 14]).unwrap()).unwrap();
        assert_eq!(f.bins[0] as usize, 2 * NUM_SECTORS);
    }

    #[test]
    fn null_segment_rejected() {
        let j = PoseJoints::new([[0.0, 0.0]; 14]).unwrap();
        assert!(pbg(&SegmentMask::null(5, 5), &j).is_err());
    }

    fn mask_strategy() -> impl Strategy<Value = SegmentMask> {
        (0u64..u64::MAX, 1usize..12).prop_map(|(seed, blobs)| {
            use rand::Rng;
            let mut rng = crate::seed::rng_from(seed);
            let centers: Vec<(f64, f64, f64)> = (0..blobs)
                .map(|_| {
                    (
                        rng.random_range(26.0..70.0),
                        rng.random_range(26.0..70.0),
                        rng.random_range(0.0..14.0),
                    )
                })
                .collect();
            SegmentMask::from_fn(96, 96, |x, y| {
                (26..=70).contains(&x)
                    && (26..=70).contains(&y)
                    && centers
                        .iter()
                        .any(|(cx, cy, r)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
            })
        })
    }

    fn joints_strategy() -> impl Strategy<Value = PoseJoints> {
        // dyadic coordinates keep translation arithmetic exact
        proptest::collection::vec((-1920i64..6144, -1920i64..6144), 14).prop_map(|v| {
            let mut j = [[0.0; 2]; 14];
            for (k, (x, y)) in v.into_iter().enumerate() {
                j[k] = [x as f64 / 64.0, y as f64 / 64.0];
            }
            PoseJoints::new(j).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn one_bit_per_joint_and_scales_match_morphology(seg in mask_strategy(), joints in joints_strategy()) {
            prop_assume!(!seg.is_null());
            let f = pbg(&seg, &joints).unwrap();
            let dense = f.to_dense();
            prop_assert_eq!(dense.iter().filter(|v| **v == 1.0).count(), 14);
            for j in 0..14 {
                let block = &dense[j * 24..(j + 1) * 24];
                prop_assert_eq!(block.iter().filter(|v| **v == 1.0).count(), 1);
            }
            let er = morph(&seg, 10, Morph::Erode);
            let di = morph(&seg, 10, Morph::Dilate);
            for j in 0..14 {
                let expect = match joints.pixel(j, 96, 96) {
                    Some((x, y)) if er.get(x, y) => Scale::S1,
                    Some((x, y)) if di.get(x, y) => Scale::S2,
                    _ => Scale::S3,
                };
                prop_assert_eq!(f.scale(j), expect);
            }
        }

        #[test]
        fn translation_covariance(seg in mask_strategy(), joints in joints_strategy(), tx in -15i64..=15, ty in -15i64..=15) {
            prop_assume!(!seg.is_null());
            let a = pbg(&seg, &joints).unwrap();
            let b = pbg(&seg.translated(tx, ty), &joints.translated(tx as f64, ty as f64)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
