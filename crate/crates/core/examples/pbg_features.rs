//! Pose-based-grid features of ground-truth parts and their soft codes
//! against dictionaries learned from a handful of scenes.
//!
//! `cargo run --release --example pbg_features`

use poseparse::aog::AogStructure;
use poseparse::features::{code_pbg_feature, gt_part_masks, learn_feature_models, pbg, FeatureConfig, PBG_DIM};
use poseparse::geom::JOINT_NAMES;
use poseparse::parts::{PART_NAMES, UPPER_CLOTHES};
use poseparse::pipeline::{leaf_parts, pair_parts};
use poseparse::synth::{generate_scenes, GeneratorConfig};

fn main() -> poseparse::Result<()> {
    let scenes = generate_scenes(11, 0, 24, &GeneratorConfig::default())?;
    let (train, probe) = scenes.split_at(20);

    let part = UPPER_CLOTHES;
    let scene = &probe[0];
    let mask = &gt_part_masks(scene)[part];
    let f = pbg(mask, &scene.joints)?;
    println!("{} of {}: {PBG_DIM}-dim grid, one hot bin per joint", PART_NAMES[part], scene.id);
    for (j, name) in JOINT_NAMES.iter().enumerate() {
        println!("  {name:>14}: scale {:?}, sector {}", f.scale(j), f.sector(j));
    }

    let s = AogStructure::default_human();
    let leaves = leaf_parts(&s)?;
    let models = learn_feature_models(train.iter(), &pair_parts(&s, &leaves), &FeatureConfig::default(), 7)?;
    let dict = models.part_dictionary(part);
    println!("\n{} prototypes for {}, lambda {}", dict.len(), PART_NAMES[part], models.lambda);
    for sc in probe {
        let m = &gt_part_masks(sc)[part];
        if m.is_null() {
            continue;
        }
        let code = code_pbg_feature(&pbg(m, &sc.joints)?, dict, models.lambda)?;
        let (raw, norm) = code.split_at(dict.len());
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        println!("  {}: raw [{}]  normalized [{}]", sc.id, fmt(raw), fmt(norm));
    }
    Ok(())
}
