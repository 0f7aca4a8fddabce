//! Learns And-Or graph weights with the cutting-plane trainer on
//! ground-truth-injected pools, then parses held-out scenes.
//!
//! `cargo run --release --example aog_parse -- [out-dir]`

use std::path::PathBuf;

use poseparse::aog::{infer, train_structural, AogLayout, AogStructure, LeafGain, StructConfig, TrainExample};
use poseparse::eval::{write_overlay, PixelCounts};
use poseparse::features::{learn_feature_models, FeatureConfig};
use poseparse::parts::{NUM_PARTS, PART_NAMES};
use poseparse::pipeline::{
    layout_spec, leaf_ground_truth, leaf_parts, pair_parts, paint_tree, parse_input, pool_features, propose,
    ranking_targets, working_pool, PoolMode,
};
use poseparse::proposal::default_thresholds;
use poseparse::ranking::{select_top, SvrConfig, SvrModel};
use poseparse::synth::{generate_scenes, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "aog_parse_out".into()));
    std::fs::create_dir_all(&out)?;
    let (n_train, n_test) = (30, 6);
    let scenes = generate_scenes(9, 0, n_train + n_test, &GeneratorConfig::default())?;
    let pools = scenes
        .iter()
        .map(|s| working_pool(s, &propose(s, PoolMode::Guided, &default_thresholds())?, true))
        .collect::<poseparse::Result<Vec<_>>>()?;

    let s = AogStructure::default_human();
    let leaves = leaf_parts(&s)?;
    let models = learn_feature_models(scenes[..n_train].iter(), &pair_parts(&s, &leaves), &FeatureConfig::default(), 2)?;
    let feats = scenes
        .iter()
        .zip(&pools)
        .map(|(sc, p)| pool_features(sc, p, &models))
        .collect::<poseparse::Result<Vec<_>>>()?;
    let mut xs = Vec::new();
    let mut targets = vec![Vec::new(); NUM_PARTS];
    for i in 0..n_train {
        xs.extend(feats[i].0.iter().map(|f| f.values.clone()));
        for (all, t) in targets.iter_mut().zip(ranking_targets(&scenes[i], &pools[i])?) {
            all.extend(t);
        }
    }
    let ranker = SvrModel::train(&xs, &targets, &SvrConfig::default())?;

    let layout = AogLayout::new(&s, layout_spec(&s, &leaves, &models, false)?)?;
    let cfg = StructConfig::default();
    let mut inputs = Vec::new();
    for i in 0..scenes.len() {
        let rows: Vec<&[f64]> = feats[i].0.iter().map(|f| f.values.as_slice()).collect();
        let sel = select_top(&rows, &feats[i].1, &ranker, &models.unary, 10)?;
        inputs.push(parse_input(&s, &leaves, &models, &pools[i], &feats[i].1, &sel)?);
    }
    let examples = (0..n_train)
        .map(|i| TrainExample::new(&s, &layout, inputs[i].clone(), &leaf_ground_truth(&scenes[i], &leaves), cfg.k))
        .collect::<poseparse::Result<Vec<_>>>()?;
    let (w, trace) = train_structural(&s, &layout, &examples, &cfg)?;
    println!(
        "{} weights, {} cutting-plane iterations, converged {}, final dual {:.4}",
        layout.dim,
        trace.dual.len(),
        trace.converged,
        trace.dual.last().copied().unwrap_or(0.0)
    );

    let mut counts = PixelCounts::new();
    for i in n_train..scenes.len() {
        let r = infer(&s, &layout, &w, &inputs[i], cfg.k)?;
        let labels = paint_tree(&s, &leaves, &inputs[i], &r.tree)?;
        counts.add(&labels, &scenes[i].labels)?;
        let gain = LeafGain::from_ground_truth(&inputs[i], &leaf_ground_truth(&scenes[i], &leaves))?;
        println!("{}: objective {:.3}, summed part IoU {:.3}", scenes[i].id, r.objective, gain.delta(&r.tree));
        write_overlay(&out.join(format!("{}.png", scenes[i].id)), &scenes[i].image, &labels)?;
    }
    println!("\npixel accuracy on {} test scenes", n_test);
    for (name, acc) in PART_NAMES.iter().zip(counts.per_part()) {
        if let Some(a) = acc {
            println!("  {name:>18}: {a:.3}");
        }
    }
    let all: Vec<usize> = (0..NUM_PARTS).collect();
    println!("  {:>18}: {:.3}", "mean", counts.mean(&all).unwrap_or(0.0));
    println!("overlays in {}", out.display());
    Ok(())
}
