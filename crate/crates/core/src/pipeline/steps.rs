//! Per-scene building blocks shared by the stage runner, the examples and
//! the acceptance tests. Nothing here touches the filesystem.

use serde::{Deserialize, Serialize};

use crate::aog::{AogStructure, LayoutSpec, LeafCandidate, ParseInput, ParseTree};
use crate::error::{Error, Result};
use crate::eval::paint_parts;
use crate::features::{assemble_with_pbg, gt_part_masks, pbg, Dictionary, FeatureModels, FeatureVector, ImageContext, PbgFeature};
use crate::geom::{iou, LabelMap, SegmentMask};
use crate::parts::{part_index, NUM_PARTS};
use crate::proposal::{build_pool, build_unguided_pool, inject_segments, SegmentPool};
use crate::ranking::SelectedPool;
use crate::synth::Scene;

/// Which seeds drive region growing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// Seed grids around the pose joints.
    Guided,
    /// Uniform seed grid over the canvas with the same seed budget.
    Unguided,
}

impl PoolMode {
    pub fn name(self) -> &'static str {
        match self {
            PoolMode::Guided => "guided",
            PoolMode::Unguided => "unguided",
        }
    }
}

impl std::str::FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "guided" => Ok(PoolMode::Guided),
            "unguided" => Ok(PoolMode::Unguided),
            _ => Err(Error::Config(format!("unknown pool mode `{s}` (guided|unguided)"))),
        }
    }
}

pub fn propose(scene: &Scene, mode: PoolMode, thresholds: &[f64]) -> Result<SegmentPool> {
    match mode {
        PoolMode::Guided => build_pool(&scene.image, &scene.joints, thresholds),
        PoolMode::Unguided => build_unguided_pool(&scene.image, thresholds),
    }
}

/// The pool the later stages work on: `pool`, with the scene's ground-truth
/// part segments prepended when `inject_gt` is set.
pub fn working_pool(scene: &Scene, pool: &SegmentPool, inject_gt: bool) -> Result<SegmentPool> {
    if !inject_gt {
        return Ok(pool.clone());
    }
    let gt: Vec<SegmentMask> = gt_part_masks(scene).into_iter().filter(|m| !m.is_null()).collect();
    inject_segments(pool, &gt)
}

/// Part index of every AOG leaf. Leaves must be named after part
/// categories.
pub fn leaf_parts(s: &AogStructure) -> Result<Vec<usize>> {
    (0..s.num_parts)
        .map(|v| {
            part_index(&s.names[v])
                .ok_or_else(|| Error::Config(format!("taxonomy leaf `{}` is not a part category", s.names[v])))
        })
        .collect()
}

/// The structure's adjacent pairs as part-index pairs.
pub fn pair_parts(s: &AogStructure, leaves: &[usize]) -> Vec<(usize, usize)> {
    s.leaf_pairs().into_iter().map(|(a, b)| (leaves[a], leaves[b])).collect()
}

pub fn pool_pbgs(scene: &Scene, pool: &SegmentPool) -> Result<Vec<PbgFeature>> {
    pool.segments.iter().map(|m| pbg(m, &scene.joints)).collect()
}

/// Descriptor and PBG feature of every pool segment.
pub fn pool_features(scene: &Scene, pool: &SegmentPool, models: &FeatureModels) -> Result<(Vec<FeatureVector>, Vec<PbgFeature>)> {
    let ctx = ImageContext::new(&scene.image);
    let pbgs = pool_pbgs(scene, pool)?;
    let feats = pool
        .segments
        .iter()
        .zip(&pbgs)
        .map(|(m, p)| assemble_with_pbg(&ctx, m, p, &scene.potentials, models))
        .collect::<Result<Vec<_>>>()?;
    Ok((feats, pbgs))
}

/// Regression targets `[part][segment]`: IoU with the part's ground truth,
/// 0 when the part is absent.
pub fn ranking_targets(scene: &Scene, pool: &SegmentPool) -> Result<Vec<Vec<f64>>> {
    gt_part_masks(scene)
        .iter()
        .map(|g| pool.segments.iter().map(|m| iou(g, m)).collect())
        .collect()
}

pub fn layout_spec(s: &AogStructure, leaves: &[usize], models: &FeatureModels, type_specific_pairs: bool) -> Result<LayoutSpec> {
    let pair_dims = pair_parts(s, leaves)
        .into_iter()
        .map(|(a, b)| pair_dictionary(models, a, b).map(|d| 2 * d.len()))
        .collect::<Result<Vec<_>>>()?;
    Ok(LayoutSpec {
        part_types: leaves.iter().map(|&p| models.part_dictionary(p).len()).collect(),
        pair_dims,
        type_specific_pairs,
    })
}

fn pair_dictionary(models: &FeatureModels, a: usize, b: usize) -> Result<&Dictionary> {
    models
        .pair(a, b)
        .ok_or_else(|| Error::Config(format!("feature models lack a dictionary for pair ({a}, {b})")))
}

/// AOG input of one image: each leaf takes its part's selected candidates.
pub fn parse_input(
    s: &AogStructure,
    leaves: &[usize],
    models: &FeatureModels,
    pool: &SegmentPool,
    pbgs: &[PbgFeature],
    selection: &SelectedPool,
) -> Result<ParseInput> {
    if pbgs.len() != pool.len() {
        return Err(Error::invalid("one PBG feature per pool segment is required"));
    }
    let mut cands = Vec::with_capacity(leaves.len());
    let mut leaf_pbgs = Vec::with_capacity(leaves.len());
    for &p in leaves {
        let sel = selection.candidates(p);
        let mut cs = Vec::with_capacity(sel.len());
        let mut ps = Vec::with_capacity(sel.len());
        for c in sel {
            let seg = pool
                .segments
                .get(c.segment)
                .ok_or_else(|| Error::invalid(format!("selected segment {} outside the pool", c.segment)))?;
            cs.push(LeafCandidate::new(seg.clone(), c.score, c.part_type)?);
            ps.push(pbgs[c.segment]);
        }
        cands.push(cs);
        leaf_pbgs.push(ps);
    }
    let dicts = pair_parts(s, leaves)
        .into_iter()
        .map(|(a, b)| pair_dictionary(models, a, b))
        .collect::<Result<Vec<_>>>()?;
    ParseInput::with_pair_codes(s, pool.width, pool.height, cands, &leaf_pbgs, &dicts, models.lambda)
}

/// Ground-truth mask of every leaf.
pub fn leaf_ground_truth(scene: &Scene, leaves: &[usize]) -> Vec<SegmentMask> {
    let all = gt_part_masks(scene);
    leaves.iter().map(|&p| all[p].clone()).collect()
}

/// Label map of a parse tree.
pub fn paint_tree(s: &AogStructure, leaves: &[usize], input: &ParseInput, tree: &ParseTree) -> Result<LabelMap> {
    let masks = tree.masks(s, input);
    let mut by_part = vec![SegmentMask::null(input.width, input.height); NUM_PARTS];
    for (v, &p) in leaves.iter().enumerate() {
        by_part[p] = masks[v].clone();
    }
    paint_parts(input.width, input.height, &by_part)
}
