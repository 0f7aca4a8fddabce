//! On-disk synthetic dataset.
//!
//! ```text
//! root/manifest.json
//! root/images/<id>.png        8-bit RGB
//! root/labels/<id>.png        8-bit gray, value = part label
//! root/joints.jsonl           {"image_id": .., "joints": [[x, y]; 14]}
//! root/potentials/<id>.bin    f32 LE, map-major then row-major
//! root/potentials/<id>.json   shape sidecar
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PoseJoints, PotentialStack};
use crate::io;
use crate::parts::NUM_PARTS;
use crate::synth::{generate_scenes, GeneratorConfig, Scene};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub num_maps: usize,
    pub scene_ids: Vec<String>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub generator: GeneratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointsRecord {
    pub image_id: String,
    pub joints: PoseJoints,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialShape {
    pub maps: usize,
    pub height: usize,
    pub width: usize,
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    /// In `manifest.scene_ids` order.
    pub scenes: Vec<Scene>,
}

impl Dataset {
    /// Generates `n_train + n_test` scenes; the first `n_train` form the
    /// training split.
    pub fn generate(config: &GeneratorConfig, seed: u64, n_train: usize, n_test: usize) -> Result<Self> {
        let scenes = generate_scenes(seed, 0, n_train + n_test, config)?;
        let ids: Vec<String> = scenes.iter().map(|s| s.id.clone()).collect();
        Ok(Dataset {
            manifest: DatasetManifest {
                schema_version: DATASET_SCHEMA_VERSION,
                seed,
                width: config.width,
                height: config.height,
                num_maps: NUM_PARTS + 1,
                train_ids: ids[..n_train].to_vec(),
                test_ids: ids[n_train..].to_vec(),
                scene_ids: ids,
                generator: config.clone(),
            },
            scenes,
        })
    }

    pub fn scene(&self, id: &str) -> Option<&Scene> {
        self.scenes.iter().find(|s| s.id == id)
    }

    fn split<'a>(&'a self, ids: &'a [String]) -> impl Iterator<Item = &'a Scene> + 'a {
        ids.iter().filter_map(move |id| self.scene(id))
    }

    pub fn train(&self) -> impl Iterator<Item = &Scene> + '_ {
        self.split(&self.manifest.train_ids)
    }

    pub fn test(&self) -> impl Iterator<Item = &Scene> + '_ {
        self.split(&self.manifest.test_ids)
    }
}

pub fn write_dataset(root: &Path, data: &Dataset) -> Result<()> {
    for sub in ["images", "labels", "potentials"] {
        io::ensure_dir(&root.join(sub))?;
    }
    let mut joints = Vec::with_capacity(data.scenes.len());
    for s in &data.scenes {
        io::write_rgb_png(&root.join("images").join(format!("{}.png", s.id)), &s.image)?;
        io::write_label_png(&root.join("labels").join(format!("{}.png", s.id)), &s.labels)?;
        let p = &s.potentials;
        io::write_f32_le(
            &root.join("potentials").join(format!("{}.bin", s.id)),
            p.maps().iter().flatten().copied(),
        )?;
        io::write_json(
            &root.join("potentials").join(format!("{}.json", s.id)),
            &PotentialShape {
                maps: p.num_maps(),
                height: p.height(),
                width: p.width(),
                dtype: "f32le".into(),
            },
        )?;
        joints.push(JointsRecord {
            image_id: s.id.clone(),
            joints: s.joints,
        });
    }
    io::write_jsonl(&root.join("joints.jsonl"), &joints)?;
    io::write_json(&root.join("manifest.json"), &data.manifest)
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingAnnotation(path))
    }
}

pub fn read_manifest(root: &Path) -> Result<DatasetManifest> {
    let path = root.join("manifest.json");
    if !path.exists() {
        return Err(Error::MissingAnnotation(path));
    }
    let raw: serde_json::Value = io::read_json(&path)?;
    let found = raw
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Parse(format!("{}: no schema_version", path.display())))?;
    if found != DATASET_SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion {
            expected: DATASET_SCHEMA_VERSION,
            found: found as u32,
        });
    }
    serde_json::from_value(raw).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_dataset(root: &Path) -> Result<Dataset> {
    let manifest = read_manifest(root)?;
    let joints_path = require(root.join("joints.jsonl"))?;
    let records: Vec<JointsRecord> = io::read_jsonl(&joints_path)?;
    let mut joints: HashMap<String, PoseJoints> =
        records.into_iter().map(|r| (r.image_id, r.joints)).collect();
    let mut scenes = Vec::with_capacity(manifest.scene_ids.len());
    for id in &manifest.scene_ids {
        let image = io::read_rgb_png(&root.join("images").join(format!("{id}.png")))?;
        let labels = io::read_label_png(&require(root.join("labels").join(format!("{id}.png")))?)?;
        let shape: PotentialShape =
            io::read_json(&require(root.join("potentials").join(format!("{id}.json")))?)?;
        let flat = io::read_f32_le(&require(root.join("potentials").join(format!("{id}.bin")))?)?;
        let plane = shape.width * shape.height;
        if shape.dtype != "f32le" || flat.len() != shape.maps * plane {
            return Err(Error::Parse(format!("potentials of {id} do not match their shape")));
        }
        let maps = flat.chunks_exact(plane).map(<[f32]>::to_vec).collect();
        let potentials = PotentialStack::new(shape.width, shape.height, maps)?;
        let j = joints
            .remove(id)
            .ok_or_else(|| Error::MissingAnnotation(joints_path.join(id)))?;
        if image.width() != labels.width() || image.height() != labels.height() {
            return Err(Error::invalid(format!("{id}: image and label map sizes differ")));
        }
        scenes.push(Scene {
            id: id.clone(),
            image,
            labels,
            joints: j,
            potentials,
        });
    }
    Ok(Dataset { manifest, scenes })
}
