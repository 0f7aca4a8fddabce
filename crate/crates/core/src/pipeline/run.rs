//! Stage runner: on-disk artifacts, manifests, skip and resume.
//!
//! Layout under the run directory:
//!
//! ```text
//! dataset/                  synth
//! pools/<mode>/<id>.jsonl   propose (raw pools)
//! pools/working/<id>.jsonl  propose (pool the later stages use)
//! features/<id>.{bin,json}  features
//! models/features.json      features
//! models/ranker.json        train-ranker
//! selected/<id>.json        rank
//! models/aog.json           train-aog (+ aog_trace.json)
//! parses/<id>.{png,json}    parse
//! reports/, overlays/       eval
//! manifests/<stage>.json
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::manifest::{outputs_digest, FileDigest, RunManifest, MANIFEST_SCHEMA_VERSION};
use super::steps::{
    layout_spec, leaf_ground_truth, leaf_parts, paint_tree, pair_parts, parse_input, pool_features, pool_pbgs, propose,
    ranking_targets, working_pool, PoolMode,
};
use crate::aog::{infer, oracle_parse, train_structural, AogLayout, AogModel, AogStructure, LeafGain, ParseTree, TrainExample, TrainTrace};
use crate::dataset::{read_dataset, write_dataset, Dataset};
use crate::error::{Error, Result};
use crate::eval::{
    curve_mean, pool_curve, render_table, write_overlay, CurvePoint, MetricReport, ReportBuilder, RunMeta, CURVE_BUDGETS,
    REPORT_SCHEMA_VERSION,
};
use crate::features::{gt_part_masks, learn_feature_models, read_feature_dump, write_feature_dump, FeatureModels};
use crate::geom::SegmentMask;
use crate::io;
use crate::proposal::{read_pool, write_pool, SegmentPool};
use crate::ranking::{select_top, SelectedPool, SvrModel};
use crate::seed::{derive_seed, sha256_hex};
use crate::synth::Scene;

pub const STAGE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Synth,
    Propose,
    Features,
    TrainRanker,
    Rank,
    TrainAog,
    Parse,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Propose,
        Stage::Features,
        Stage::TrainRanker,
        Stage::Rank,
        Stage::TrainAog,
        Stage::Parse,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Propose => "propose",
            Stage::Features => "features",
            Stage::TrainRanker => "train-ranker",
            Stage::Rank => "rank",
            Stage::TrainAog => "train-aog",
            Stage::Parse => "parse",
            Stage::Eval => "eval",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Paths relative to the run directory that the stage owns; they are
    /// cleared before the stage runs.
    fn owned(self) -> &'static [&'static str] {
        match self {
            Stage::Synth => &["dataset"],
            Stage::Propose => &["pools"],
            Stage::Features => &["features", "models/features.json"],
            Stage::TrainRanker => &["models/ranker.json"],
            Stage::Rank => &["selected"],
            Stage::TrainAog => &["models/aog.json", "models/aog_trace.json"],
            Stage::Parse => &["parses"],
            Stage::Eval => &["reports", "overlays"],
        }
    }
}

/// Config sections read by `stage` and everything upstream of it.
fn stage_hash(c: &PipelineConfig, stage: Stage) -> String {
    let mut parts = serde_json::Map::new();
    let mut put = |k: &str, v: serde_json::Value| {
        parts.insert(k.to_string(), v);
    };
    for s in Stage::ALL.into_iter().filter(|s| *s <= stage) {
        match s {
            Stage::Synth => {
                put("seed", j(&c.seed));
                put("dataset", j(&c.dataset));
            }
            Stage::Propose => put("proposal", j(&c.proposal)),
            Stage::Features => {
                put("features", j(&c.features));
                put("taxonomy", j(&c.taxonomy));
            }
            Stage::TrainRanker => put("ranker.svr", j(&c.ranker.svr)),
            Stage::Rank => put("ranker.top_n", j(&c.ranker.top_n)),
            Stage::TrainAog => {
                put("aog.learn", j(&c.aog.learn));
                put("aog.type_specific_pairs", j(&c.aog.type_specific_pairs));
            }
            Stage::Parse => {
                put("aog_model", j(&c.aog_model));
                put("aog.parse_k", j(&c.aog.parse_k));
            }
            Stage::Eval => put("eval", j(&c.eval)),
        }
    }
    sha256_hex(&serde_json::to_vec(&parts).expect("config serializes"))
}

fn j<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseRecord {
    pub image_id: String,
    pub objective: f64,
    pub tree: ParseTree,
}

/// Pool metrics, selected-pool metrics and oracle/learned parse accuracy on
/// the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub schema_version: u32,
    pub reports: Vec<MetricReport>,
}

impl EvalSummary {
    pub fn report(&self, label: &str) -> Option<&MetricReport> {
        self.reports.iter().find(|r| r.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub mode: PoolMode,
    pub report: MetricReport,
    /// APR/AOI of pool prefixes.
    pub curve: Vec<CurvePoint>,
    pub curve_mean_apr: f64,
    pub curve_mean_aoi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub modes: Vec<ModeComparison>,
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub manifest: RunManifest,
    /// Outputs were already complete for this config and inputs.
    pub skipped: bool,
}

/// A pipeline run rooted at `config.workdir`.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: PipelineConfig,
    pub root: PathBuf,
    /// Recompute stages whose outputs are complete, and overwrite outputs
    /// produced under different settings.
    pub force: bool,
}

fn stage_err(stage: Stage, e: Error) -> Error {
    match e {
        Error::Stage { .. } => e,
        e => Error::Stage {
            stage: stage.name().into(),
            source: Box::new(e),
        },
    }
}

fn list_files(root: &Path, rel: &str, out: &mut Vec<String>) -> Result<()> {
    let path = root.join(rel);
    if path.is_file() {
        out.push(rel.to_string());
    } else if path.is_dir() {
        let mut names: Vec<String> = fs::read_dir(&path)
            .map_err(|e| Error::io(&path, e))?
            .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(&path, e))?;
        names.sort();
        for n in names {
            list_files(root, &format!("{rel}/{n}"), out)?;
        }
    }
    Ok(())
}

fn remove(path: &Path) -> Result<()> {
    if path.is_dir() {
        fs::remove_dir_all(path).map_err(|e| Error::io(path, e))
    } else if path.exists() {
        fs::remove_file(path).map_err(|e| Error::io(path, e))
    } else {
        Ok(())
    }
}

impl Run {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Run {
            root: config.workdir.clone(),
            config,
            force: false,
        })
    }

    pub fn with_force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.root.join("manifests").join(format!("{}.json", stage.name()))
    }

    fn upstream(&self, stage: Stage) -> Vec<Stage> {
        match stage {
            Stage::Synth => vec![],
            Stage::Propose => vec![Stage::Synth],
            Stage::Features => vec![Stage::Propose],
            Stage::TrainRanker => vec![Stage::Features],
            Stage::Rank => vec![Stage::TrainRanker],
            Stage::TrainAog => vec![Stage::Rank],
            Stage::Parse if self.config.aog_model.is_some() => vec![Stage::Rank],
            Stage::Parse => vec![Stage::TrainAog],
            Stage::Eval => vec![Stage::Parse],
        }
    }

    fn dir(&self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        io::ensure_dir(&p)?;
        Ok(p)
    }

    /// Runs one stage, or reuses its outputs when they are intact and were
    /// produced from the same settings and inputs.
    pub fn run_stage(&self, stage: Stage) -> Result<StageOutcome> {
        self.run_stage_inner(stage).map_err(|e| stage_err(stage, e))
    }

    fn run_stage_inner(&self, stage: Stage) -> Result<StageOutcome> {
        let mut inputs = Vec::new();
        for up in self.upstream(stage) {
            let path = self.manifest_path(up);
            if !path.is_file() {
                return Err(Error::Dependency {
                    stage: up.name().into(),
                    path,
                });
            }
            let m = RunManifest::load(&path)?;
            if m.stage_hash != stage_hash(&self.config, up) {
                return Err(Error::Config(format!(
                    "{} outputs were produced with different settings; rerun it with the current config first",
                    up.name()
                )));
            }
            inputs.push(FileDigest {
                path: format!("manifests/{}.json", up.name()),
                sha256: m.outputs_digest,
            });
        }
        let hash = stage_hash(&self.config, stage);
        let mpath = self.manifest_path(stage);
        if mpath.is_file() {
            let old = RunManifest::load(&mpath)?;
            let same = old.stage_hash == hash && old.stage_version == STAGE_VERSION && old.inputs == inputs;
            if same && !self.force && old.outputs_intact(&self.root) {
                log::info!("{}: outputs up to date", stage.name());
                return Ok(StageOutcome {
                    manifest: old,
                    skipped: true,
                });
            }
            if old.stage_hash != hash && !self.force {
                return Err(Error::Config(format!(
                    "{} outputs in {} were produced with different settings; pass --force to overwrite or use another workdir",
                    stage.name(),
                    self.root.display()
                )));
            }
            remove(&mpath)?;
        }
        for rel in stage.owned() {
            remove(&self.root.join(rel))?;
        }
        log::info!("{}: running", stage.name());
        let t0 = Instant::now();
        match stage {
            Stage::Synth => self.synth()?,
            Stage::Propose => self.propose()?,
            Stage::Features => self.features()?,
            Stage::TrainRanker => self.train_ranker()?,
            Stage::Rank => self.rank()?,
            Stage::TrainAog => self.train_aog()?,
            Stage::Parse => self.parse()?,
            Stage::Eval => self.eval()?,
        }
        let mut files = Vec::new();
        for rel in stage.owned() {
            list_files(&self.root, rel, &mut files)?;
        }
        let outputs = files
            .iter()
            .map(|f| FileDigest::of(&self.root, f))
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            stage: stage.name().into(),
            stage_version: STAGE_VERSION,
            config_hash: self.config.hash(),
            stage_hash: hash,
            seed: self.config.seed,
            elapsed_ms: t0.elapsed().as_millis() as u64,
            inputs,
            outputs_digest: outputs_digest(&outputs),
            outputs,
        };
        self.dir("manifests")?;
        manifest.save_atomic(&mpath)?;
        Ok(StageOutcome {
            manifest,
            skipped: false,
        })
    }

    /// Runs every stage in order and returns the learned parse report.
    pub fn run_all(&self) -> Result<MetricReport> {
        for stage in Stage::ALL {
            self.run_stage(stage)?;
        }
        let summary = self.eval_summary()?;
        summary
            .report("parse")
            .cloned()
            .ok_or_else(|| Error::Parse("eval summary lacks the parse report".into()))
    }

    pub fn eval_summary(&self) -> Result<EvalSummary> {
        io::read_json(&self.root.join("reports/eval.json"))
    }

    pub fn compare_report(&self) -> Result<CompareReport> {
        io::read_json(&self.root.join("reports/compare.json"))
    }

    fn dataset(&self) -> Result<Dataset> {
        read_dataset(&self.root.join("dataset"))
    }

    fn meta(&self) -> RunMeta {
        RunMeta {
            seed: self.config.seed,
            config_hash: self.config.hash(),
        }
    }

    fn pool_path(&self, dir: &str, id: &str) -> PathBuf {
        self.root.join("pools").join(dir).join(format!("{id}.jsonl"))
    }

    fn working(&self, scene: &Scene) -> Result<SegmentPool> {
        read_pool(&self.pool_path("working", &scene.id), scene.image.width(), scene.image.height())
    }

    fn feature_models(&self) -> Result<FeatureModels> {
        FeatureModels::load(&self.root.join("models/features.json"))
    }

    fn selection(&self, id: &str) -> Result<SelectedPool> {
        io::read_json(&self.root.join("selected").join(format!("{id}.json")))
    }

    fn aog_model(&self) -> Result<AogModel> {
        match &self.config.aog_model {
            Some(p) => AogModel::load(p),
            None => AogModel::load(&self.root.join("models/aog.json")),
        }
    }

    fn synth(&self) -> Result<()> {
        let d = &self.config.dataset;
        let data = Dataset::generate(&d.generator, derive_seed(self.config.seed, "synth"), d.n_train, d.n_test)?;
        write_dataset(&self.dir("dataset")?, &data)
    }

    /// Raw pools of the working mode for every scene, both modes for the
    /// test split, and the working pools.
    fn propose(&self) -> Result<()> {
        let data = self.dataset()?;
        let p = &self.config.proposal;
        let test: Vec<&String> = data.manifest.test_ids.iter().collect();
        for mode in [PoolMode::Guided, PoolMode::Unguided] {
            self.dir(&format!("pools/{}", mode.name()))?;
        }
        self.dir("pools/working")?;
        for scene in &data.scenes {
            let is_test = test.contains(&&scene.id);
            for mode in [PoolMode::Guided, PoolMode::Unguided] {
                if mode != p.mode && !is_test {
                    continue;
                }
                let pool = propose(scene, mode, &p.thresholds)?;
                write_pool(&self.pool_path(mode.name(), &scene.id), &pool)?;
                if mode == p.mode {
                    let w = working_pool(scene, &pool, p.inject_gt)?;
                    write_pool(&self.pool_path("working", &scene.id), &w)?;
                }
            }
        }
        Ok(())
    }

    fn structure(&self) -> Result<(AogStructure, Vec<usize>)> {
        let s = AogStructure::from_taxonomy(&self.config.load_taxonomy()?)?;
        let leaves = leaf_parts(&s)?;
        Ok((s, leaves))
    }

    fn features(&self) -> Result<()> {
        let data = self.dataset()?;
        let (s, leaves) = self.structure()?;
        let models = learn_feature_models(
            data.train(),
            &pair_parts(&s, &leaves),
            &self.config.features,
            derive_seed(self.config.seed, "features"),
        )?;
        self.dir("models")?;
        models.save(&self.root.join("models/features.json"))?;
        let dir = self.dir("features")?;
        for scene in &data.scenes {
            let (feats, _) = pool_features(scene, &self.working(scene)?, &models)?;
            write_feature_dump(&dir, &scene.id, &feats)?;
        }
        Ok(())
    }

    fn train_ranker(&self) -> Result<()> {
        let data = self.dataset()?;
        let dir = self.root.join("features");
        let mut xs = Vec::new();
        let mut targets = vec![Vec::new(); crate::parts::NUM_PARTS];
        for scene in data.train() {
            let (_, rows) = read_feature_dump(&dir, &scene.id)?;
            let t = ranking_targets(scene, &self.working(scene)?)?;
            if rows.len() != t[0].len() {
                return Err(Error::Parse(format!("{}: feature rows do not match the pool", scene.id)));
            }
            xs.extend(rows);
            for (all, part) in targets.iter_mut().zip(t) {
                all.extend(part);
            }
        }
        let model = SvrModel::train(&xs, &targets, &self.config.ranker.svr)?;
        self.dir("models")?;
        model.save(&self.root.join("models/ranker.json"))
    }

    fn rank(&self) -> Result<()> {
        let data = self.dataset()?;
        let models = self.feature_models()?;
        let ranker = SvrModel::load(&self.root.join("models/ranker.json"))?;
        let fdir = self.root.join("features");
        let out = self.dir("selected")?;
        for scene in &data.scenes {
            let (_, rows) = read_feature_dump(&fdir, &scene.id)?;
            let pbgs = pool_pbgs(scene, &self.working(scene)?)?;
            let sel = select_top(&rows, &pbgs, &ranker, &models.unary, self.config.ranker.top_n)?;
            io::write_json(&out.join(format!("{}.json", scene.id)), &sel)?;
        }
        Ok(())
    }

    fn scene_input(
        &self,
        s: &AogStructure,
        leaves: &[usize],
        models: &FeatureModels,
        scene: &Scene,
    ) -> Result<(crate::aog::ParseInput, SegmentPool, SelectedPool)> {
        let pool = self.working(scene)?;
        let sel = self.selection(&scene.id)?;
        let pbgs = pool_pbgs(scene, &pool)?;
        let input = parse_input(s, leaves, models, &pool, &pbgs, &sel)?;
        Ok((input, pool, sel))
    }

    fn train_aog(&self) -> Result<()> {
        let data = self.dataset()?;
        let models = self.feature_models()?;
        let taxonomy = self.config.load_taxonomy()?;
        let (s, leaves) = self.structure()?;
        let a = &self.config.aog;
        let spec = layout_spec(&s, &leaves, &models, a.type_specific_pairs)?;
        let layout = AogLayout::new(&s, spec.clone())?;
        let mut examples = Vec::with_capacity(data.manifest.train_ids.len());
        for scene in data.train() {
            let (input, _, _) = self.scene_input(&s, &leaves, &models, scene)?;
            examples.push(TrainExample::new(&s, &layout, input, &leaf_ground_truth(scene, &leaves), a.learn.k)?);
        }
        let (w, trace) = train_structural(&s, &layout, &examples, &a.learn)?;
        if !trace.converged {
            log::warn!("cutting-plane training stopped after {} iterations", trace.dual.len());
        }
        let mut model = AogModel::zeros(taxonomy, spec)?;
        model.w = w;
        model.trace = trace.dual.clone();
        self.dir("models")?;
        model.save(&self.root.join("models/aog.json"))?;
        io::write_json(&self.root.join("models/aog_trace.json"), &trace)
    }

    fn checked_model(&self, models: &FeatureModels) -> Result<(AogModel, Vec<usize>)> {
        let model = self.aog_model()?;
        let leaves = leaf_parts(&model.structure)?;
        let spec = layout_spec(&model.structure, &leaves, models, model.layout.spec.type_specific_pairs)?;
        if spec != model.layout.spec {
            return Err(Error::Config("AOG model layout does not match the feature models".into()));
        }
        Ok((model, leaves))
    }

    fn parse(&self) -> Result<()> {
        let data = self.dataset()?;
        let models = self.feature_models()?;
        let (model, leaves) = self.checked_model(&models)?;
        let s = &model.structure;
        let out = self.dir("parses")?;
        for scene in data.test() {
            let (input, _, _) = self.scene_input(s, &leaves, &models, scene)?;
            let r = infer(s, &model.layout, &model.w, &input, self.config.aog.parse_k)?;
            io::write_label_png(&out.join(format!("{}.png", scene.id)), &paint_tree(s, &leaves, &input, &r.tree)?)?;
            io::write_json(
                &out.join(format!("{}.json", scene.id)),
                &ParseRecord {
                    image_id: scene.id.clone(),
                    objective: r.objective,
                    tree: r.tree,
                },
            )?;
        }
        Ok(())
    }

    fn eval(&self) -> Result<()> {
        let data = self.dataset()?;
        let models = self.feature_models()?;
        let (model, leaves) = self.checked_model(&models)?;
        let s = &model.structure;
        let out = self.dir("reports")?;
        let mut pool_r = ReportBuilder::new("pool");
        let mut sel_r = ReportBuilder::new("selected");
        let mut oracle_r = ReportBuilder::new("oracle");
        let mut parse_r = ReportBuilder::new("parse");
        for scene in data.test() {
            let gt = gt_part_masks(scene);
            let (input, pool, sel) = self.scene_input(s, &leaves, &models, scene)?;
            pool_r.add(Some(&pool.segments), &gt, &scene.labels, None)?;
            let mut picked: Vec<usize> = Vec::new();
            for part in &sel.parts {
                for c in &part.candidates {
                    if !picked.contains(&c.segment) {
                        picked.push(c.segment);
                    }
                }
            }
            let sel_masks: Vec<SegmentMask> = picked.iter().map(|&i| pool.segments[i].clone()).collect();
            sel_r.add(Some(&sel_masks), &gt, &scene.labels, None)?;
            let gain = LeafGain::from_ground_truth(&input, &leaf_ground_truth(scene, &leaves))?;
            let oracle = oracle_parse(s, &model.layout, &input, &gain, self.config.aog.parse_k)?;
            let oracle_map = paint_tree(s, &leaves, &input, &oracle.tree)?;
            oracle_r.add(None, &gt, &scene.labels, Some(&oracle_map))?;
            let parsed = io::read_label_png(&self.root.join("parses").join(format!("{}.png", scene.id)))?;
            parse_r.add(None, &gt, &scene.labels, Some(&parsed))?;
            if self.config.eval.overlay {
                write_overlay(&self.dir("overlays")?.join(format!("{}.png", scene.id)), &scene.image, &parsed)?;
            }
        }
        let summary = EvalSummary {
            schema_version: REPORT_SCHEMA_VERSION,
            reports: [pool_r, sel_r, oracle_r, parse_r].map(|b| b.finish(self.meta())).to_vec(),
        };
        io::write_json(&out.join("eval.json"), &summary)?;
        let refs: Vec<&MetricReport> = summary.reports.iter().collect();
        fs::write(out.join("eval.txt"), render_table(&refs)).map_err(|e| Error::io(out.join("eval.txt"), e))?;
        if !self.config.eval.compare.is_empty() {
            self.compare(&data, &out)?;
        }
        Ok(())
    }

    fn compare(&self, data: &Dataset, out: &Path) -> Result<()> {
        let mut modes = Vec::new();
        let gts: Vec<Vec<SegmentMask>> = data.test().map(gt_part_masks).collect();
        for &mode in &self.config.eval.compare {
            let mut b = ReportBuilder::new(mode.name());
            let mut pools = Vec::new();
            for (scene, gt) in data.test().zip(&gts) {
                let pool = read_pool(&self.pool_path(mode.name(), &scene.id), scene.image.width(), scene.image.height())?;
                b.add(Some(&pool.segments), gt, &scene.labels, None)?;
                pools.push(pool.segments);
            }
            let curve = pool_curve(&pools, &gts, &CURVE_BUDGETS)?;
            let (apr, aoi) = curve_mean(&curve);
            modes.push(ModeComparison {
                mode,
                report: b.finish(self.meta()),
                curve,
                curve_mean_apr: apr,
                curve_mean_aoi: aoi,
            });
        }
        let report = CompareReport {
            schema_version: REPORT_SCHEMA_VERSION,
            modes,
        };
        io::write_json(&out.join("compare.json"), &report)?;
        fs::write(out.join("compare.txt"), render_compare(&report)).map_err(|e| Error::io(out.join("compare.txt"), e))
    }
}

/// Full-pool table followed by the budget curves.
pub fn render_compare(report: &CompareReport) -> String {
    let refs: Vec<&MetricReport> = report.modes.iter().map(|m| &m.report).collect();
    let mut out = render_table(&refs);
    out.push('\n');
    let _ = write!(out, "{:<18}", "budget");
    for m in &report.modes {
        let _ = write!(out, " | {:>8} APR {:>6}", m.mode.name(), "AOI");
    }
    out.push('\n');
    let rows = report.modes.first().map_or(0, |m| m.curve.len());
    for i in 0..rows {
        let _ = write!(out, "{:<18}", report.modes[0].curve[i].budget);
        for m in &report.modes {
            let c = &m.curve[i];
            let _ = write!(out, " | {:>12.1} {:>6.1}", 100.0 * c.apr, 100.0 * c.aoi);
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<18}", "mean");
    for m in &report.modes {
        let _ = write!(out, " | {:>12.1} {:>6.1}", 100.0 * m.curve_mean_apr, 100.0 * m.curve_mean_aoi);
    }
    out.push('\n');
    out
}

/// Training trace saved next to the AOG model.
pub fn read_trace(root: &Path) -> Result<TrainTrace> {
    io::read_json(&root.join("models/aog_trace.json"))
}
