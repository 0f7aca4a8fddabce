//! Trains the per-part segment ranker and shows how much of the pool's
//! overlap quality survives top-n selection.
//!
//! `cargo run --release --example ranking -- [top_n]`

use poseparse::aog::AogStructure;
use poseparse::eval::aoi;
use poseparse::features::{gt_part_masks, learn_feature_models, FeatureConfig};
use poseparse::geom::iou;
use poseparse::parts::PART_NAMES;
use poseparse::pipeline::{leaf_parts, pair_parts, pool_features, propose, ranking_targets, PoolMode};
use poseparse::proposal::default_thresholds;
use poseparse::ranking::{select_top, SvrConfig, SvrModel};
use poseparse::synth::{generate_scenes, GeneratorConfig};

fn main() -> poseparse::Result<()> {
    let top_n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let (n_train, n_test) = (20, 5);
    let scenes = generate_scenes(5, 0, n_train + n_test, &GeneratorConfig::default())?;
    let pools = scenes
        .iter()
        .map(|s| propose(s, PoolMode::Guided, &default_thresholds()))
        .collect::<poseparse::Result<Vec<_>>>()?;

    let s = AogStructure::default_human();
    let leaves = leaf_parts(&s)?;
    let models = learn_feature_models(scenes[..n_train].iter(), &pair_parts(&s, &leaves), &FeatureConfig::default(), 1)?;
    let mut feats = Vec::new();
    for (scene, pool) in scenes.iter().zip(&pools) {
        feats.push(pool_features(scene, pool, &models)?);
    }

    let mut xs = Vec::new();
    let mut targets = vec![Vec::new(); PART_NAMES.len()];
    for i in 0..n_train {
        xs.extend(feats[i].0.iter().map(|f| f.values.clone()));
        for (all, t) in targets.iter_mut().zip(ranking_targets(&scenes[i], &pools[i])?) {
            all.extend(t);
        }
    }
    println!("training {} part regressors on {} segments", PART_NAMES.len(), xs.len());
    let ranker = SvrModel::train(&xs, &targets, &SvrConfig::default())?;

    let (mut full, mut kept, mut gts) = (Vec::new(), Vec::new(), Vec::new());
    for i in n_train..n_train + n_test {
        let rows: Vec<&[f64]> = feats[i].0.iter().map(|f| f.values.as_slice()).collect();
        let sel = select_top(&rows, &feats[i].1, &ranker, &models.unary, top_n)?;
        let gt = gt_part_masks(&scenes[i]);
        let mut union: Vec<usize> = sel.parts.iter().flat_map(|p| p.candidates.iter().map(|c| c.segment)).collect();
        union.sort_unstable();
        union.dedup();
        println!("\n{}: pool {} -> {} selected", scenes[i].id, pools[i].len(), union.len());
        for (p, name) in PART_NAMES.iter().enumerate() {
            if gt[p].is_null() {
                continue;
            }
            let best = &sel.parts[p].candidates[0];
            let q = iou(&gt[p], &pools[i].segments[best.segment])?;
            println!("  {name:>18}: top-1 score {:+.3}, IoU {q:.3}, type {}", best.score, best.part_type);
        }
        kept.push(union.iter().map(|&j| pools[i].segments[j].clone()).collect());
        full.push(pools[i].segments.clone());
        gts.push(gt);
    }
    println!("\nAOI full pool {:.3}, top-{top_n} union {:.3}", aoi(&full, &gts)?, aoi(&kept, &gts)?);
    Ok(())
}
