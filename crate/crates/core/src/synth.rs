//! Synthetic articulated figures: a skeleton with capsule limbs, disc head and
//! polygonal clothing, rendered with per-pixel part labels, the 14 pose
//! joints and oracle class potentials.
//!
//! Everything is a pure function of `(seed, config)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{joint, ImageRgb, LabelMap, PoseJoints, PotentialStack, NUM_JOINTS};
use crate::parts::{self, NUM_PARTS};
use crate::seed::{derive_seed, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    fn check(&self, what: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(Error::Config(format!(
                "empty range for {what}: [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.max == self.min {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

/// Limb angles in radians. Zero points straight down; positive values swing
/// the limb away from the body midline. Forearm and shin angles are relative
/// to the upper segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRanges {
    pub head_tilt: Range,
    pub upper_arm: Range,
    pub forearm: Range,
    pub thigh: Range,
    pub shin: Range,
}

impl Default for AngleRanges {
    fn default() -> Self {
        AngleRanges {
            head_tilt: Range::new(-0.15, 0.15),
            upper_arm: Range::new(0.05, 0.5),
            forearm: Range::new(-0.3, 0.5),
            thigh: Range::new(0.0, 0.25),
            shin: Range::new(-0.15, 0.15),
        }
    }
}

/// Probability that a part is hidden (occluded, or covered by clothing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenProbs {
    pub hair: f64,
    pub face: f64,
    pub arm: f64,
    pub leg_skin: f64,
    pub shoe: f64,
}

impl Default for HiddenProbs {
    fn default() -> Self {
        HiddenProbs {
            hair: 0.1,
            face: 0.05,
            arm: 0.1,
            leg_skin: 0.15,
            shoe: 0.1,
        }
    }
}

/// Generator configuration, serialized as the generator's JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub width: usize,
    pub height: usize,
    /// Torso height (neck to hip line) in pixels.
    pub body_scale: Range,
    pub offset_x: Range,
    pub offset_y: Range,
    pub angles: AngleRanges,
    pub full_body_prob: f64,
    pub hidden: HiddenProbs,
    pub skin_palette: Vec<[f32; 3]>,
    pub hair_palette: Vec<[f32; 3]>,
    pub color_jitter: f32,
    /// Minimum RGB distance between colors of touching regions.
    pub min_contrast: f32,
    pub texture_amplitude: f32,
    pub noise_sigma: f32,
    /// Box-blur radius of the oracle potentials.
    pub potential_blur: usize,
    /// Label flip probability of the oracle potentials.
    pub potential_flip_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            width: 64,
            height: 128,
            body_scale: Range::new(28.0, 34.0),
            offset_x: Range::new(-2.0, 2.0),
            offset_y: Range::new(-3.0, 3.0),
            angles: AngleRanges::default(),
            full_body_prob: 0.3,
            hidden: HiddenProbs::default(),
            skin_palette: vec![
                [0.96, 0.80, 0.69],
                [0.89, 0.67, 0.52],
                [0.76, 0.53, 0.38],
                [0.55, 0.37, 0.25],
            ],
            hair_palette: vec![
                [0.08, 0.06, 0.05],
                [0.30, 0.18, 0.09],
                [0.55, 0.22, 0.10],
                [0.60, 0.60, 0.62],
            ],
            color_jitter: 0.04,
            min_contrast: 0.3,
            texture_amplitude: 0.06,
            noise_sigma: 0.02,
            potential_blur: 2,
            potential_flip_rate: 0.1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        self.body_scale.check("body_scale")?;
        self.offset_x.check("offset_x")?;
        self.offset_y.check("offset_y")?;
        let a = &self.angles;
        a.head_tilt.check("head_tilt")?;
        a.upper_arm.check("upper_arm")?;
        a.forearm.check("forearm")?;
        a.thigh.check("thigh")?;
        a.shin.check("shin")?;
        if self.skin_palette.is_empty() || self.hair_palette.is_empty() {
            return Err(Error::Config("empty color palette".into()));
        }
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config("canvas too small".into()));
        }
        if !(0.0..=1.0).contains(&self.full_body_prob) {
            return Err(Error::Config("full_body_prob outside [0,1]".into()));
        }
        if !(0.0..0.5).contains(&self.potential_flip_rate) {
            return Err(Error::Config("potential_flip_rate must be in [0, 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClothesMode {
    UpperLower,
    FullBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub head_tilt: f64,
    pub left_upper_arm: f64,
    pub left_forearm: f64,
    pub right_upper_arm: f64,
    pub right_forearm: f64,
    pub left_thigh: f64,
    pub left_shin: f64,
    pub right_thigh: f64,
    pub right_shin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub body_scale: f64,
    /// Neck position in pixels.
    pub neck: [f64; 2],
    pub joint_angles: JointAngles,
    pub clothes_mode: ClothesMode,
    pub part_colors: [[f32; 3]; NUM_PARTS],
    pub visibility: [bool; NUM_PARTS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background: [f32; 3],
    pub texture_seed: u64,
    pub texture_amplitude: f32,
    pub noise_seed: u64,
    pub noise_sigma: f32,
    pub figure: FigureSpec,
}

/// A rendered scene with its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub image: ImageRgb,
    pub labels: LabelMap,
    pub joints: PoseJoints,
    pub potentials: PotentialStack,
}

fn dist3(a: [f32; 3], b: [f32; 3]) -> f32 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn jitter(c: [f32; 3], amount: f32, rng: &mut impl Rng) -> [f32; 3] {
    let mut out = c;
    if amount > 0.0 {
        for v in &mut out {
            *v = (*v + rng.random_range(-amount..=amount)).clamp(0.0, 1.0);
        }
    }
    out
}

fn random_color(rng: &mut impl Rng) -> [f32; 3] {
    [
        rng.random_range(0.05..0.95),
        rng.random_range(0.05..0.95),
        rng.random_range(0.05..0.95),
    ]
}

/// Draws a color at least `min` away from every color in `avoid`, giving up
/// after a bounded number of tries.
fn contrasting_color(avoid: &[[f32; 3]], min: f32, rng: &mut impl Rng) -> [f32; 3] {
    let mut best = random_color(rng);
    let mut best_d = avoid.iter().map(|a| dist3(*a, best)).fold(f32::MAX, f32::min);
    for _ in 0..500 {
        if best_d >= min {
            break;
        }
        let c = random_color(rng);
        let d = avoid.iter().map(|a| dist3(*a, c)).fold(f32::MAX, f32::min);
        if d > best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Samples a figure. Deterministic in `seed`.
pub fn sample_figure(seed: u64, config: &GeneratorConfig) -> Result<FigureSpec> {
    config.validate()?;
    let mut rng = rng_from(seed);
    let a = &config.angles;
    let joint_angles = JointAngles {
        head_tilt: a.head_tilt.sample(&mut rng),
        left_upper_arm: a.upper_arm.sample(&mut rng),
        left_forearm: a.forearm.sample(&mut rng),
        right_upper_arm: a.upper_arm.sample(&mut rng),
        right_forearm: a.forearm.sample(&mut rng),
        left_thigh: a.thigh.sample(&mut rng),
        left_shin: a.shin.sample(&mut rng),
        right_thigh: a.thigh.sample(&mut rng),
        right_shin: a.shin.sample(&mut rng),
    };
    let body_scale = config.body_scale.sample(&mut rng);
    let neck = [
        config.width as f64 / 2.0 + config.offset_x.sample(&mut rng),
        0.65 * body_scale + 6.0 + config.offset_y.sample(&mut rng),
    ];
    let clothes_mode = if rng.random_bool(config.full_body_prob) {
        ClothesMode::FullBody
    } else {
        ClothesMode::UpperLower
    };

    let mc = config.min_contrast;
    let skin_base = config.skin_palette[rng.random_range(0..config.skin_palette.len())];
    let skin = jitter(skin_base, config.color_jitter, &mut rng);
    let hair_base = config.hair_palette[rng.random_range(0..config.hair_palette.len())];
    let hair = jitter(hair_base, config.color_jitter, &mut rng);
    let upper = contrasting_color(&[skin, hair], mc, &mut rng);
    let lower = contrasting_color(&[skin, upper], mc, &mut rng);
    let full = contrasting_color(&[skin, hair], mc, &mut rng);
    let shoe = contrasting_color(&[skin, lower, full], mc, &mut rng);

    let mut part_colors = [[0.0f32; 3]; NUM_PARTS];
    part_colors[parts::HAIR] = hair;
    part_colors[parts::FACE] = skin;
    part_colors[parts::FULL_BODY] = full;
    part_colors[parts::UPPER_CLOTHES] = upper;
    part_colors[parts::LEFT_ARM] = skin;
    part_colors[parts::RIGHT_ARM] = skin;
    part_colors[parts::LOWER_CLOTHES] = lower;
    part_colors[parts::LEFT_LEG] = skin;
    part_colors[parts::RIGHT_LEG] = skin;
    part_colors[parts::LEFT_SHOE] = shoe;
    part_colors[parts::RIGHT_SHOE] = shoe;

    let h = &config.hidden;
    let mut visibility = [true; NUM_PARTS];
    visibility[parts::HAIR] = !rng.random_bool(h.hair);
    visibility[parts::FACE] = !rng.random_bool(h.face);
    visibility[parts::LEFT_ARM] = !rng.random_bool(h.arm);
    visibility[parts::RIGHT_ARM] = !rng.random_bool(h.arm);
    // Leg skin hides in pairs (long trousers or stockings).
    let legs_hidden = rng.random_bool(h.leg_skin);
    visibility[parts::LEFT_LEG] = !legs_hidden;
    visibility[parts::RIGHT_LEG] = !legs_hidden;
    visibility[parts::LEFT_SHOE] = !rng.random_bool(h.shoe);
    visibility[parts::RIGHT_SHOE] = !rng.random_bool(h.shoe);
    match clothes_mode {
        ClothesMode::UpperLower => visibility[parts::FULL_BODY] = false,
        ClothesMode::FullBody => {
            visibility[parts::UPPER_CLOTHES] = false;
            visibility[parts::LOWER_CLOTHES] = false;
        }
    }

    Ok(FigureSpec {
        body_scale,
        neck,
        joint_angles,
        clothes_mode,
        part_colors,
        visibility,
    })
}

/// Background color that contrasts with every figure color.
pub fn sample_scene(seed: u64, config: &GeneratorConfig, figure: FigureSpec) -> SceneSpec {
    let mut rng = rng_from(derive_seed(seed, "scene"));
    let avoid: Vec<[f32; 3]> = figure.part_colors.to_vec();
    let background = contrasting_color(&avoid, config.min_contrast, &mut rng);
    SceneSpec {
        width: config.width,
        height: config.height,
        background,
        texture_seed: rng.random(),
        texture_amplitude: config.texture_amplitude,
        noise_seed: rng.random(),
        noise_sigma: config.noise_sigma,
        figure,
    }
}

type P2 = [f64; 2];

fn add(a: P2, b: P2) -> P2 {
    [a[0] + b[0], a[1] + b[1]]
}

/// Unit vector pointing down rotated by `angle` towards `side` (+1 = +x).
fn limb(len: f64, angle: f64, side: f64) -> P2 {
    [side * len * angle.sin(), len * angle.cos()]
}

enum Shape {
    Disc { c: P2, r: f64 },
    Capsule { a: P2, b: P2, r: f64 },
    Polygon(Vec<P2>),
}

impl Shape {
    fn extent(&self) -> (f64, f64, f64, f64) {
        match self {
            Shape::Disc { c, r } => (c[0] - r, c[1] - r, c[0] + r, c[1] + r),
            Shape::Capsule { a, b, r } => (
                a[0].min(b[0]) - r,
                a[1].min(b[1]) - r,
                a[0].max(b[0]) + r,
                a[1].max(b[1]) + r,
            ),
            Shape::Polygon(pts) => pts.iter().fold(
                (f64::MAX, f64::MAX, f64::MIN, f64::MIN),
                |(x0, y0, x1, y1), p| (x0.min(p[0]), y0.min(p[1]), x1.max(p[0]), y1.max(p[1])),
            ),
        }
    }

    fn contains(&self, p: P2) -> bool {
        match self {
            Shape::Disc { c, r } => (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) <= r * r,
            Shape::Capsule { a, b, r } => {
                let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
                let len2 = vx * vx + vy * vy;
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / len2).clamp(0.0, 1.0)
                };
                let (qx, qy) = (a[0] + t * vx, a[1] + t * vy);
                (p[0] - qx).powi(2) + (p[1] - qy).powi(2) <= r * r
            }
            Shape::Polygon(pts) => {
                // Convex polygon: all edge cross products share a sign.
                let n = pts.len();
                let mut sign = 0.0f64;
                for i in 0..n {
                    let (a, b) = (pts[i], pts[(i + 1) % n]);
                    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                    if cross != 0.0 {
                        if sign == 0.0 {
                            sign = cross.signum();
                        } else if cross.signum() != sign {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }
}

/// Skeleton joint positions and the ordered list of (part, shape) primitives.
struct Layout {
    joints: [P2; NUM_JOINTS],
    shapes: Vec<(usize, Shape)>,
}

fn layout(fig: &FigureSpec) -> Layout {
    let s = fig.body_scale;
    let ang = &fig.joint_angles;
    let neck = fig.neck;
    let hr = 0.27 * s;
    let tilt = ang.head_tilt;
    let rot = |v: P2| -> P2 {
        let (c, sn) = (tilt.cos(), tilt.sin());
        [c * v[0] - sn * v[1], sn * v[0] + c * v[1]]
    };
    let head = add(neck, rot([0.0, -1.15 * hr]));
    let forehead = add(head, rot([0.0, -0.5 * hr]));

    let l_sh = add(neck, [0.33 * s, 0.1 * s]);
    let r_sh = add(neck, [-0.33 * s, 0.1 * s]);
    let l_el = add(l_sh, limb(0.5 * s, ang.left_upper_arm, 1.0));
    let r_el = add(r_sh, limb(0.5 * s, ang.right_upper_arm, -1.0));
    let l_wr = add(l_el, limb(0.45 * s, ang.left_upper_arm + ang.left_forearm, 1.0));
    let r_wr = add(r_el, limb(0.45 * s, ang.right_upper_arm + ang.right_forearm, -1.0));

    let l_hip = add(neck, [0.2 * s, s]);
    let r_hip = add(neck, [-0.2 * s, s]);
    let l_kn = add(l_hip, limb(0.6 * s, ang.left_thigh, 1.0));
    let r_kn = add(r_hip, limb(0.6 * s, ang.right_thigh, -1.0));
    let l_an = add(l_kn, limb(0.55 * s, ang.left_thigh + ang.left_shin, 1.0));
    let r_an = add(r_kn, limb(0.55 * s, ang.right_thigh + ang.right_shin, -1.0));

    let mut joints = [[0.0; 2]; NUM_JOINTS];
    joints[joint::FOREHEAD] = forehead;
    joints[joint::NECK] = neck;
    joints[joint::L_SHOULDER] = l_sh;
    joints[joint::R_SHOULDER] = r_sh;
    joints[joint::L_ELBOW] = l_el;
    joints[joint::R_ELBOW] = r_el;
    joints[joint::L_WRIST] = l_wr;
    joints[joint::R_WRIST] = r_wr;
    joints[joint::L_HIP] = l_hip;
    joints[joint::R_HIP] = r_hip;
    joints[joint::L_KNEE] = l_kn;
    joints[joint::R_KNEE] = r_kn;
    joints[joint::L_ANKLE] = l_an;
    joints[joint::R_ANKLE] = r_an;

    let vis = &fig.visibility;
    let mut shapes: Vec<(usize, Shape)> = Vec::new();
    let hip_y = l_hip[1];

    if vis[parts::HAIR] {
        shapes.push((
            parts::HAIR,
            Shape::Disc {
                c: add(head, rot([0.0, -0.3 * hr])),
                r: 1.2 * hr,
            },
        ));
    }
    let leg_r = 0.11 * s;
    for (part, kn, an) in [(parts::LEFT_LEG, l_kn, l_an), (parts::RIGHT_LEG, r_kn, r_an)] {
        if vis[part] {
            shapes.push((part, Shape::Capsule { a: kn, b: an, r: leg_r }));
        }
    }
    for (part, an) in [(parts::LEFT_SHOE, l_an), (parts::RIGHT_SHOE, r_an)] {
        if vis[part] {
            shapes.push((
                part,
                Shape::Capsule {
                    a: add(an, [-0.07 * s, 0.07 * s]),
                    b: add(an, [0.07 * s, 0.07 * s]),
                    r: 0.085 * s,
                },
            ));
        }
    }
    let torso = Shape::Polygon(vec![
        [neck[0] - 0.36 * s, neck[1] + 0.02 * s],
        [neck[0] + 0.36 * s, neck[1] + 0.02 * s],
        [neck[0] + 0.27 * s, hip_y + 0.05 * s],
        [neck[0] - 0.27 * s, hip_y + 0.05 * s],
    ]);
    match fig.clothes_mode {
        ClothesMode::UpperLower => {
            if vis[parts::LOWER_CLOTHES] {
                shapes.push((
                    parts::LOWER_CLOTHES,
                    Shape::Polygon(vec![
                        [neck[0] - 0.3 * s, hip_y - 0.08 * s],
                        [neck[0] + 0.3 * s, hip_y - 0.08 * s],
                        [neck[0] + 0.3 * s, hip_y + 0.15 * s],
                        [neck[0] - 0.3 * s, hip_y + 0.15 * s],
                    ]),
                ));
                let trouser_r = 0.14 * s;
                for (hip, kn, an, leg) in [
                    (l_hip, l_kn, l_an, parts::LEFT_LEG),
                    (r_hip, r_kn, r_an, parts::RIGHT_LEG),
                ] {
                    shapes.push((
                        parts::LOWER_CLOTHES,
                        Shape::Capsule {
                            a: hip,
                            b: kn,
                            r: trouser_r,
                        },
                    ));
                    // Without visible leg skin the trousers run down to the ankle.
                    if !vis[leg] {
                        shapes.push((
                            parts::LOWER_CLOTHES,
                            Shape::Capsule {
                                a: kn,
                                b: an,
                                r: 0.12 * s,
                            },
                        ));
                    }
                }
            }
            if vis[parts::UPPER_CLOTHES] {
                shapes.push((parts::UPPER_CLOTHES, torso));
            }
        }
        ClothesMode::FullBody => {
            if vis[parts::FULL_BODY] {
                let knee_y = l_kn[1].max(r_kn[1]);
                shapes.push((
                    parts::FULL_BODY,
                    Shape::Polygon(vec![
                        [neck[0] - 0.28 * s, hip_y - 0.1 * s],
                        [neck[0] + 0.28 * s, hip_y - 0.1 * s],
                        [l_kn[0] + 0.16 * s, knee_y + 0.02 * s],
                        [r_kn[0] - 0.16 * s, knee_y + 0.02 * s],
                    ]),
                ));
                shapes.push((parts::FULL_BODY, torso));
            }
        }
    }
    for (part, sh, el, wr) in [
        (parts::LEFT_ARM, l_sh, l_el, l_wr),
        (parts::RIGHT_ARM, r_sh, r_el, r_wr),
    ] {
        if vis[part] {
            shapes.push((part, Shape::Capsule { a: sh, b: el, r: 0.11 * s }));
            shapes.push((part, Shape::Capsule { a: el, b: wr, r: 0.1 * s }));
        }
    }
    if vis[parts::FACE] {
        shapes.push((parts::FACE, Shape::Disc { c: head, r: hr }));
    }
    Layout { joints, shapes }
}

/// Rasterizes a scene into an 8-bit quantized image, its label map and joints.
pub fn render_scene(spec: &SceneSpec) -> Result<(ImageRgb, LabelMap, PoseJoints)> {
    let (w, h) = (spec.width, spec.height);
    let lay = layout(&spec.figure);
    for (part, shape) in &lay.shapes {
        let (x0, y0, x1, y1) = shape.extent();
        if x0 < 0.0 || y0 < 0.0 || x1 > (w - 1) as f64 || y1 > (h - 1) as f64 {
            return Err(Error::Render(format!(
                "{} extends outside the {w}x{h} canvas",
                parts::PART_NAMES[*part]
            )));
        }
    }
    let mut labels = LabelMap::background(w, h);
    for (part, shape) in &lay.shapes {
        let (x0, y0, x1, y1) = shape.extent();
        for y in (y0.floor().max(0.0) as usize)..=(y1.ceil() as usize).min(h - 1) {
            for x in (x0.floor().max(0.0) as usize)..=(x1.ceil() as usize).min(w - 1) {
                if shape.contains([x as f64, y as f64]) {
                    labels.set(x, y, parts::label_of(*part));
                }
            }
        }
    }

    let mut tex = rng_from(spec.texture_seed);
    let waves: Vec<(f64, f64, f64, f64, usize)> = (0..3)
        .map(|c| {
            (
                tex.random_range(0.05..0.2),
                tex.random_range(0.05..0.2),
                tex.random_range(0.0..std::f64::consts::TAU),
                tex.random_range(0.0..std::f64::consts::TAU),
                c,
            )
        })
        .collect();
    let mut noise_rng = rng_from(spec.noise_seed);
    let noise = Normal::new(0.0f32, spec.noise_sigma.max(0.0))
        .map_err(|e| Error::Config(format!("noise sigma: {e}")))?;
    let fig = &spec.figure;
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let l = labels.get(x, y);
            let mut c = if l == 0 {
                let mut c = spec.background;
                for &(fx, fy, px, py, ch) in &waves {
                    let v = (fx * x as f64 + px).sin() * (fy * y as f64 + py).sin();
                    c[ch] += spec.texture_amplitude * v as f32;
                }
                c
            } else {
                fig.part_colors[(l - 1) as usize]
            };
            for v in &mut c {
                let n = if spec.noise_sigma > 0.0 {
                    noise.sample(&mut noise_rng)
                } else {
                    0.0
                };
                *v = quantize(*v + n);
            }
            pixels.push(c);
        }
    }
    let image = ImageRgb::new(w, h, pixels)?;
    let joints = PoseJoints::new(lay.joints)?;
    Ok((image, labels, joints))
}

fn quantize(v: f32) -> f32 {
    ((v.clamp(0.0, 1.0) * 255.0).round() as u8) as f32 / 255.0
}

/// One-hot ground truth, corrupted by random label flips, box-blurred and
/// renormalized per pixel.
pub fn make_oracle_potentials(
    gt: &LabelMap,
    num_maps: usize,
    blur_radius: usize,
    flip_rate: f64,
    seed: u64,
) -> Result<PotentialStack> {
    if !(0.0..0.5).contains(&flip_rate) {
        return Err(Error::invalid("flip_rate must be in [0, 0.5)"));
    }
    if num_maps < 2 || (gt.max_label() as usize) >= num_maps {
        return Err(Error::invalid("label values exceed the number of maps"));
    }
    let (w, h) = (gt.width(), gt.height());
    let mut rng = rng_from(seed);
    let mut noisy: Vec<u8> = gt.labels().to_vec();
    if flip_rate > 0.0 {
        for l in &mut noisy {
            if rng.random_bool(flip_rate) {
                let other = rng.random_range(0..num_maps - 1) as u8;
                *l = if other >= *l { other + 1 } else { other };
            }
        }
    }
    let mut maps: Vec<Vec<f64>> = (0..num_maps)
        .map(|j| noisy.iter().map(|&l| (l as usize == j) as u8 as f64).collect())
        .collect();
    if blur_radius > 0 {
        for m in &mut maps {
            *m = box_blur(m, w, h, blur_radius);
        }
    }
    let mut out: Vec<Vec<f32>> = vec![vec![0.0; w * h]; num_maps];
    for i in 0..w * h {
        let total: f64 = maps.iter().map(|m| m[i]).sum();
        for j in 0..num_maps {
            out[j][i] = ((maps[j][i] / total) as f32).clamp(0.0, 1.0);
        }
    }
    PotentialStack::new(w, h, out)
}

/// Mean over the in-frame part of the `(2r+1)²` window.
fn box_blur(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let pass = |src: &[f64], len: usize, stride: usize, lines: usize, lstride: usize| {
        let mut out = vec![0.0; src.len()];
        for line in 0..lines {
            let base = line * lstride;
            let mut prefix = vec![0.0; len + 1];
            for i in 0..len {
                prefix[i + 1] = prefix[i] + src[base + i * stride];
            }
            for i in 0..len {
                let lo = i.saturating_sub(r);
                let hi = (i + r).min(len - 1);
                out[base + i * stride] = (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
            }
        }
        out
    };
    let horiz = pass(src, w, 1, h, w);
    pass(&horiz, h, w, w, 1)
}

/// Samples, renders and annotates one scene. Figures that do not fit the
/// canvas are resampled from a derived seed.
pub fn generate_scene(id: &str, seed: u64, config: &GeneratorConfig) -> Result<Scene> {
    config.validate()?;
    let mut last_err = None;
    for attempt in 0..32 {
        let fseed = derive_seed(seed, &format!("figure/{attempt}"));
        let figure = sample_figure(fseed, config)?;
        let spec = sample_scene(fseed, config, figure);
        match render_scene(&spec) {
            Ok((image, labels, joints)) => {
                let potentials = make_oracle_potentials(
                    &labels,
                    NUM_PARTS + 1,
                    config.potential_blur,
                    config.potential_flip_rate,
                    derive_seed(fseed, "potentials"),
                )?;
                return Ok(Scene {
                    id: id.to_string(),
                    image,
                    labels,
                    joints,
                    potentials,
                });
            }
            Err(e @ Error::Render(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Render("no figure fits the canvas".into())))
}

/// Scene ids are `scene_0000`, `scene_0001`, ...
pub fn scene_id(index: usize) -> String {
    format!("scene_{index:04}")
}

/// Generates `count` scenes; scene `i` depends only on `(seed, i, config)`.
pub fn generate_scenes(
    seed: u64,
    start: usize,
    count: usize,
    config: &GeneratorConfig,
) -> Result<Vec<Scene>> {
    (start..start + count)
        .map(|i| generate_scene(&scene_id(i), derive_seed(seed, &format!("scene/{i}")), config))
        .collect()
}

/// Joints adjacent to each part: the joints a part is drawn around.
pub fn adjacent_joints(part: usize) -> &'static [usize] {
    use joint::*;
    match part {
        parts::HAIR => &[FOREHEAD],
        parts::FACE => &[FOREHEAD, NECK],
        parts::FULL_BODY => &[NECK, L_SHOULDER, R_SHOULDER, L_HIP, R_HIP, L_KNEE, R_KNEE],
        parts::UPPER_CLOTHES => &[NECK, L_SHOULDER, R_SHOULDER, L_HIP, R_HIP],
        parts::LEFT_ARM => &[L_SHOULDER, L_ELBOW, L_WRIST],
        parts::RIGHT_ARM => &[R_SHOULDER, R_ELBOW, R_WRIST],
        parts::LOWER_CLOTHES => &[L_HIP, R_HIP, L_KNEE, R_KNEE],
        parts::LEFT_LEG => &[L_KNEE, L_ANKLE],
        parts::RIGHT_LEG => &[R_KNEE, R_ANKLE],
        parts::LEFT_SHOE => &[L_ANKLE],
        parts::RIGHT_SHOE => &[R_ANKLE],
        _ => &[],
    }
}
