//! Segment descriptors and their learned models (prototype dictionaries and
//! skin color model).

pub mod appearance;
pub mod coding;
pub mod pbg;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use appearance::{
    contour_band, fcn_feature, o2p_pool, pair_geometry, pair_geometry_moments, skin_pool,
    ImageContext, SkinModel, O2P_DIM, SKIN_DIM,
};
pub use coding::{
    assign_part_type, code_pbg, code_pbg_feature, kmeans, learn_dictionary, learn_pbg_dictionary,
    pair_dense, pairwise_code, Dictionary, UnaryDictionary, DEFAULT_LAMBDA, PAIR_PROTOTYPES,
    UNARY_PROTOTYPES,
};
pub use pbg::{pbg, PbgFeature, Scale, PBG_DIM};

use crate::error::{Error, Result};
use crate::geom::{PoseJoints, PotentialStack, SegmentMask};
use crate::io;
use crate::parts::{self, NUM_PARTS};
use crate::seed::derive_seed;
use crate::synth::Scene;

pub const FEATURE_SCHEMA_VERSION: u32 = 1;
pub const BLOCK_NAMES: [&str; 5] = ["o2p", "skin", "fcn", "pbg", "c-pbg"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Concatenation of L2-normalized blocks, itself L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub blocks: Vec<BlockInfo>,
}

impl FeatureVector {
    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .map(|b| &self.values[b.offset..b.offset + b.len])
    }
}

fn l2_normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Normalizes each block, concatenates, and normalizes the result.
pub fn concat_blocks(blocks: Vec<(&str, Vec<f64>)>) -> FeatureVector {
    let mut values = Vec::new();
    let mut infos = Vec::new();
    for (name, mut b) in blocks {
        l2_normalize(&mut b);
        infos.push(BlockInfo {
            name: name.to_string(),
            offset: values.len(),
            len: b.len(),
        });
        values.extend(b);
    }
    l2_normalize(&mut values);
    FeatureVector {
        values,
        blocks: infos,
    }
}

/// Everything learned from training data that feature extraction needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModels {
    pub schema_version: u32,
    pub lambda: f64,
    /// One dictionary per part, in part order.
    pub unary: UnaryDictionary,
    /// One dictionary per adjacent part pair.
    pub pairs: Vec<PairDictionary>,
    pub skin: SkinModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDictionary {
    pub parts: (usize, usize),
    pub dictionary: Dictionary,
}

impl FeatureModels {
    pub fn feature_dim(&self, num_maps: usize) -> usize {
        O2P_DIM + SKIN_DIM + 3 * num_maps + PBG_DIM + 2 * self.unary.total()
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<&Dictionary> {
        self.pairs
            .iter()
            .find(|p| p.parts == (a, b))
            .map(|p| &p.dictionary)
    }

    pub fn part_dictionary(&self, part: usize) -> &Dictionary {
        &self.unary.parts[part]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut m: FeatureModels = io::read_json(path)?;
        if m.schema_version != FEATURE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: FEATURE_SCHEMA_VERSION,
                found: m.schema_version,
            });
        }
        m.unary.refresh();
        for p in &mut m.pairs {
            p.dictionary.refresh();
        }
        Ok(m)
    }
}

/// Dictionary sizes and coding sharpness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub lambda: f64,
    pub unary_prototypes: usize,
    pub pair_prototypes: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            lambda: DEFAULT_LAMBDA,
            unary_prototypes: UNARY_PROTOTYPES,
            pair_prototypes: PAIR_PROTOTYPES,
        }
    }
}

/// Ground-truth part masks of a scene, in part order (null when absent).
pub fn gt_part_masks(scene: &Scene) -> Vec<SegmentMask> {
    (0..NUM_PARTS)
        .map(|p| scene.labels.mask_of(parts::label_of(p)))
        .collect()
}

/// Learns dictionaries on ground-truth segments and the skin model on
/// skin-labeled pixels. A dictionary gets at most as many prototypes as it
/// has samples.
pub fn learn_feature_models<'a>(
    scenes: impl IntoIterator<Item = &'a Scene>,
    pairs: &[(usize, usize)],
    config: &FeatureConfig,
    seed: u64,
) -> Result<FeatureModels> {
    let mut unary: Vec<Vec<PbgFeature>> = vec![Vec::new(); NUM_PARTS];
    let mut pair_samples: Vec<Vec<Vec<f64>>> = vec![Vec::new(); pairs.len()];
    let mut skin_pixels = Vec::new();
    for scene in scenes {
        let masks = gt_part_masks(scene);
        let feats: Vec<Option<PbgFeature>> = masks
            .iter()
            .map(|m| (!m.is_null()).then(|| pbg(m, &scene.joints)).transpose())
            .collect::<Result<_>>()?;
        for (p, f) in feats.iter().enumerate() {
            if let Some(f) = f {
                unary[p].push(*f);
            }
        }
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if let (Some(fa), Some(fb)) = (&feats[a], &feats[b]) {
                pair_samples[k].push(pair_dense(fa, fb));
            }
        }
        for &p in &parts::SKIN_PARTS {
            skin_pixels.extend(masks[p].iter_pixels().map(|(x, y)| scene.image.get(x, y)));
        }
    }
    let mut dicts = Vec::with_capacity(NUM_PARTS);
    for (p, feats) in unary.iter().enumerate() {
        let name = parts::PART_NAMES[p];
        if feats.is_empty() {
            return Err(Error::DegenerateData(format!("no training segments of {name}")));
        }
        let k = config.unary_prototypes.min(feats.len());
        dicts.push(learn_pbg_dictionary(name, feats, k, derive_seed(seed, name))?);
    }
    let mut pair_dicts = Vec::with_capacity(pairs.len());
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let name = format!("{}+{}", parts::PART_NAMES[a], parts::PART_NAMES[b]);
        let samples = &pair_samples[k];
        let dictionary = if samples.is_empty() {
            // never co-visible in training: one all-zero prototype
            Dictionary::new(name, vec![vec![0.0; 2 * PBG_DIM]])?
        } else {
            let n = config.pair_prototypes.min(samples.len());
            learn_dictionary(&name, samples, n, derive_seed(seed, &name))?
        };
        pair_dicts.push(PairDictionary {
            parts: (a, b),
            dictionary,
        });
    }
    Ok(FeatureModels {
        schema_version: FEATURE_SCHEMA_VERSION,
        lambda: config.lambda,
        unary: UnaryDictionary { parts: dicts },
        pairs: pair_dicts,
        skin: SkinModel::fit(skin_pixels)?,
    })
}

/// Full descriptor of one non-null segment.
pub fn assemble_feature(
    ctx: &ImageContext<'_>,
    seg: &SegmentMask,
    joints: &PoseJoints,
    potentials: &PotentialStack,
    models: &FeatureModels,
) -> Result<FeatureVector> {
    let p = pbg(seg, joints)?;
    assemble_with_pbg(ctx, seg, &p, potentials, models)
}

pub fn assemble_with_pbg(
    ctx: &ImageContext<'_>,
    seg: &SegmentMask,
    p: &PbgFeature,
    potentials: &PotentialStack,
    models: &FeatureModels,
) -> Result<FeatureVector> {
    Ok(concat_blocks(vec![
        ("o2p", o2p_pool(ctx, seg)?),
        ("skin", skin_pool(ctx.image, seg, &models.skin)?),
        ("fcn", fcn_feature(seg, potentials)?),
        ("pbg", p.to_dense()),
        ("c-pbg", models.unary.code(p, models.lambda)?),
    ]))
}

/// Shape sidecar of a feature dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDumpHeader {
    pub schema_version: u32,
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub blocks: Vec<BlockInfo>,
}

/// Writes `<stem>.bin` (f32 LE, row per segment) and `<stem>.json`.
pub fn write_feature_dump(dir: &Path, stem: &str, rows: &[FeatureVector]) -> Result<()> {
    let cols = rows.first().map_or(0, |r| r.values.len());
    if rows.iter().any(|r| r.values.len() != cols) {
        return Err(Error::invalid("feature rows differ in length"));
    }
    io::write_f32_le(
        &dir.join(format!("{stem}.bin")),
        rows.iter().flat_map(|r| r.values.iter().map(|&v| v as f32)),
    )?;
    io::write_json(
        &dir.join(format!("{stem}.json")),
        &FeatureDumpHeader {
            schema_version: FEATURE_SCHEMA_VERSION,
            rows: rows.len(),
            cols,
            dtype: "f32le".into(),
            blocks: rows.first().map(|r| r.blocks.clone()).unwrap_or_default(),
        },
    )
}

/// Reads a dump back as rows of f64 (values are f32-rounded).
pub fn read_feature_dump(dir: &Path, stem: &str) -> Result<(FeatureDumpHeader, Vec<Vec<f64>>)> {
    let header: FeatureDumpHeader = io::read_json(&dir.join(format!("{stem}.json")))?;
    if header.schema_version != FEATURE_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            expected: FEATURE_SCHEMA_VERSION,
            found: header.schema_version,
        });
    }
    let flat = io::read_f32_le(&dir.join(format!("{stem}.bin")))?;
    if flat.len() != header.rows * header.cols {
        return Err(Error::Parse(format!("{stem}.bin does not match its header")));
    }
    let rows = if header.cols == 0 {
        vec![Vec::new(); header.rows]
    } else {
        flat.chunks_exact(header.cols)
            .map(|c| c.iter().map(|&v| v as f64).collect())
            .collect()
    };
    Ok((header, rows))
}
