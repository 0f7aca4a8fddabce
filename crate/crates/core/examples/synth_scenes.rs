//! Generates a small synthetic dataset and writes it to disk.
//!
//! `cargo run --example synth_scenes -- <out-dir> [n_train] [n_test] [seed]`

use std::path::PathBuf;

use poseparse::dataset::{write_dataset, Dataset};
use poseparse::parts::{NUM_PARTS, PART_NAMES};
use poseparse::synth::GeneratorConfig;

fn main() -> poseparse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map(String::as_str).unwrap_or("synth_out"));
    let n_train = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let n_test = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(4);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);

    let data = Dataset::generate(&GeneratorConfig::default(), seed, n_train, n_test)?;
    write_dataset(&out, &data)?;

    let mut pixels = [0usize; NUM_PARTS + 1];
    for scene in &data.scenes {
        for &l in scene.labels.labels() {
            pixels[l as usize] += 1;
        }
    }
    println!("wrote {} scenes to {}", data.scenes.len(), out.display());
    for (p, name) in PART_NAMES.iter().enumerate() {
        println!("{name:>18}: {:>7} px", pixels[p + 1]);
    }
    Ok(())
}
