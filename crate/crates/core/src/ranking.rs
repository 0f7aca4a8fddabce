//! Per-part linear SVR over segment features and top-n candidate selection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{assign_part_type, Dictionary, PbgFeature, UnaryDictionary};
use crate::io;
use crate::parts::{NUM_PARTS, PART_NAMES};

pub const RANKER_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOP_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 1.0,
            epsilon: 0.05,
            tolerance: 1e-4,
            max_epochs: 2000,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("SVR C must be positive, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("SVR epsilon must be non-negative, got {}", self.epsilon)));
        }
        if !(self.tolerance > 0.0) || self.max_epochs == 0 {
            return Err(Error::Config("SVR tolerance and max_epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrFit {
    pub weights: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
    /// All examples share one feature vector, so only its direction is fit.
    pub degenerate: bool,
}

const SHRUNK_PASSES: usize = 50;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `½‖β‖² + C Σ max(0, |βᵀx − t| − ε)` by dual coordinate descent
/// in example order. Stops when the largest scaled dual step of a pass over
/// all examples is below the tolerance.
pub fn train_svr<X: AsRef<[f64]>>(xs: &[X], targets: &[f64], config: &SvrConfig) -> Result<SvrFit> {
    config.validate()?;
    if xs.len() != targets.len() {
        return Err(Error::invalid("SVR examples and targets differ in count"));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("SVR needs at least two examples"));
    }
    let dim = xs[0].as_ref().len();
    if xs.iter().any(|x| x.as_ref().len() != dim) {
        return Err(Error::invalid("SVR examples differ in dimension"));
    }
    if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::invalid("SVR targets must lie in [0, 1]"));
    }
    let degenerate = xs.iter().all(|x| x.as_ref() == xs[0].as_ref());
    let q: Vec<f64> = xs.iter().map(|x| dot(x.as_ref(), x.as_ref())).collect();
    let mut alpha = vec![0.0; xs.len()];
    let mut w = vec![0.0; dim];
    let (c, eps) = (config.c, config.epsilon);
    let mut epochs = 0;
    let mut converged = false;
    // between full passes, up to SHRUNK_PASSES sweeps visit only examples
    // whose multiplier moved or is nonzero; only a full pass can declare
    // convergence
    let all: Vec<usize> = (0..xs.len()).filter(|&i| q[i] > 0.0).collect();
    let sweep = |idx: &[usize], alpha: &mut [f64], w: &mut [f64]| {
        let mut max_step = 0.0f64;
        let mut keep = Vec::with_capacity(idx.len());
        for &i in idx {
            let x = xs[i].as_ref();
            let g = dot(w, x) - targets[i];
            let z = alpha[i] - g / q[i];
            let t = eps / q[i];
            let shrunk = z.signum() * (z.abs() - t).max(0.0);
            let new = shrunk.clamp(-c, c);
            let d = new - alpha[i];
            if d != 0.0 {
                for (wk, xk) in w.iter_mut().zip(x) {
                    *wk += d * xk;
                }
                alpha[i] = new;
            }
            max_step = max_step.max(d.abs() * q[i]);
            if new != 0.0 || d != 0.0 {
                keep.push(i);
            }
        }
        (max_step, keep)
    };
    while epochs < config.max_epochs {
        epochs += 1;
        let (max_step, mut active) = sweep(&all, &mut alpha, &mut w);
        if max_step < config.tolerance {
            converged = true;
            break;
        }
        for _ in 0..SHRUNK_PASSES {
            let (step, keep) = sweep(&active, &mut alpha, &mut w);
            active = keep;
            if step < config.tolerance {
                break;
            }
        }
    }
    if degenerate {
        log::warn!("SVR examples are all identical; only the shared direction is fit");
    }
    Ok(SvrFit {
        weights: w,
        epochs,
        converged,
        degenerate,
    })
}

/// Primal objective, for checking solutions.
pub fn svr_objective<X: AsRef<[f64]>>(w: &[f64], xs: &[X], targets: &[f64], c: f64, eps: f64) -> f64 {
    let loss: f64 = xs
        .iter()
        .zip(targets)
        .map(|(x, t)| ((dot(w, x.as_ref()) - t).abs() - eps).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * loss
}

pub fn score(weights: &[f64], feature: &[f64]) -> Result<f64> {
    if weights.len() != feature.len() {
        return Err(Error::invalid(format!(
            "weight dimension {} does not match feature dimension {}",
            weights.len(),
            feature.len()
        )));
    }
    Ok(dot(weights, feature))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartWeights {
    pub part: String,
    pub weights: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

/// One regressor per part category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub schema_version: u32,
    pub feature_dim: usize,
    pub config: SvrConfig,
    pub parts: Vec<PartWeights>,
}

impl SvrModel {
    /// `targets[p][i]` is the regression target of example `i` for part `p`.
    pub fn train<X: AsRef<[f64]>>(xs: &[X], targets: &[Vec<f64>], config: &SvrConfig) -> Result<Self> {
        if targets.len() != NUM_PARTS {
            return Err(Error::invalid("one target list per part is required"));
        }
        let feature_dim = xs.first().map_or(0, |x| x.as_ref().len());
        let mut parts = Vec::with_capacity(NUM_PARTS);
        for (p, t) in targets.iter().enumerate() {
            let fit = train_svr(xs, t, config)?;
            if !fit.converged {
                log::warn!("SVR for {} stopped at {} epochs", PART_NAMES[p], fit.epochs);
            }
            parts.push(PartWeights {
                part: PART_NAMES[p].to_string(),
                weights: fit.weights,
                epochs: fit.epochs,
                converged: fit.converged,
            });
        }
        Ok(SvrModel {
            schema_version: RANKER_SCHEMA_VERSION,
            feature_dim,
            config: *config,
            parts,
        })
    }

    pub fn weights(&self, part: usize) -> &[f64] {
        &self.parts[part].weights
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: SvrModel = io::read_json(path)?;
        if m.schema_version != RANKER_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: RANKER_SCHEMA_VERSION,
                found: m.schema_version,
            });
        }
        if m.parts.len() != NUM_PARTS
            || m.parts.iter().enumerate().any(|(p, w)| w.part != PART_NAMES[p] || w.weights.len() != m.feature_dim)
        {
            return Err(Error::Parse(format!("{} does not hold one weight vector per part", path.display())));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Index into the image's segment pool.
    pub segment: usize,
    pub score: f64,
    /// Part type in `1..=K_p`.
    pub part_type: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSelection {
    pub part: usize,
    pub candidates: Vec<Candidate>,
    /// The pool held fewer than `n` segments.
    pub short: bool,
}

/// Top-scored segments per part; per-type lists are filtered views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPool {
    pub top_n: usize,
    pub parts: Vec<PartSelection>,
}

impl SelectedPool {
    pub fn candidates(&self, part: usize) -> &[Candidate] {
        &self.parts[part].candidates
    }

    pub fn of_type(&self, part: usize, part_type: usize) -> impl Iterator<Item = &Candidate> + '_ {
        self.parts[part]
            .candidates
            .iter()
            .filter(move |c| c.part_type == part_type)
    }
}

/// Indices of the `n` highest scores, descending; ties go to the lower index.
pub fn top_indices(scores: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Scores every pool segment for every part and keeps the top `n`.
/// `features[i]` and `pbgs[i]` describe pool segment `i`.
pub fn select_top<X: AsRef<[f64]>>(
    features: &[X],
    pbgs: &[PbgFeature],
    model: &SvrModel,
    unary: &UnaryDictionary,
    n: usize,
) -> Result<SelectedPool> {
    if features.is_empty() {
        return Err(Error::invalid("cannot select from an empty pool"));
    }
    if features.len() != pbgs.len() {
        return Err(Error::invalid("feature and PBG counts differ"));
    }
    if n == 0 {
        return Err(Error::invalid("top-n must be positive"));
    }
    let mut parts = Vec::with_capacity(NUM_PARTS);
    for p in 0..NUM_PARTS {
        let w = model.weights(p);
        let scores = features
            .iter()
            .map(|f| score(w, f.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let dict: &Dictionary = &unary.parts[p];
        let candidates = top_indices(&scores, n)
            .into_iter()
            .map(|i| {
                Ok(Candidate {
                    segment: i,
                    score: scores[i],
                    part_type: assign_part_type(Some(&pbgs[i]), dict)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        parts.push(PartSelection {
            part: p,
            candidates,
            short: features.len() < n,
        });
    }
    Ok(SelectedPool { top_n: n, parts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand::Rng;

    #[test]
    fn tube_covering_targets_gives_zero_weights() {
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        let t = [0.3, 0.32, 0.31];
        let cfg = SvrConfig {
            epsilon: 0.35,
            ..Default::default()
        };
        let fit = train_svr(&xs, &t, &cfg).unwrap();
        assert!(fit.converged);
        assert!(fit.weights.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn scalar_fit_matches_grid_search() {
        let xs: Vec<Vec<f64>> = [0.0, 1.0, 1.0, 0.0, 1.0].iter().map(|&x| vec![x]).collect();
        let t: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let cfg = SvrConfig {
            c: 10.0,
            epsilon: 0.01,
            tolerance: 1e-10,
            ..Default::default()
        };
        let fit = train_svr(&xs, &t, &cfg).unwrap();
        let best = (0..=200_000)
            .map(|k| k as f64 * 1e-5)
            .min_by(|a, b| {
                svr_objective(&[*a], &xs, &t, cfg.c, cfg.epsilon)
                    .total_cmp(&svr_objective(&[*b], &xs, &t, cfg.c, cfg.epsilon))
            })
            .unwrap();
        assert!(fit.weights[0] > 0.0);
        assert!((fit.weights[0] - best).abs() < 1e-4, "{} vs {best}", fit.weights[0]);
        let s: Vec<f64> = xs.iter().map(|x| score(&fit.weights, x).unwrap()).collect();
        for (a, b) in s.iter().zip(&t) {
            for (c, d) in s.iter().zip(&t) {
                if b > d {
                    assert!(a > c);
                }
            }
        }
    }

    #[test]
    fn dual_solution_matches_primal_optimum_on_random_data() {
        let mut rng = rng_from(5);
        let xs: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let t: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
        let cfg = SvrConfig {
            tolerance: 1e-10,
            max_epochs: 100_000,
            ..Default::default()
        };
        let fit = train_svr(&xs, &t, &cfg).unwrap();
        let f0 = svr_objective(&fit.weights, &xs, &t, cfg.c, cfg.epsilon);
        // no coordinate perturbation improves the primal objective
        for k in 0..3 {
            for h in [1e-3, -1e-3] {
                let mut w = fit.weights.clone();
                w[k] += h;
                assert!(svr_objective(&w, &xs, &t, cfg.c, cfg.epsilon) >= f0 - 1e-9);
            }
        }
    }

    #[test]
    fn duplicated_set_at_half_c_matches_original() {
        let mut rng = rng_from(9);
        let xs: Vec<Vec<f64>> = (0..12).map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let t: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
        let cfg = SvrConfig {
            tolerance: 1e-12,
            max_epochs: 200_000,
            ..Default::default()
        };
        let a = train_svr(&xs, &t, &cfg).unwrap();
        let xs2: Vec<Vec<f64>> = xs.iter().chain(&xs).cloned().collect();
        let t2: Vec<f64> = t.iter().chain(&t).copied().collect();
        let half = SvrConfig { c: cfg.c / 2.0, ..cfg };
        let b = train_svr(&xs2, &t2, &half).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn degenerate_examples_are_flagged() {
        let xs = vec![vec![0.6, 0.8]; 4];
        let fit = train_svr(&xs, &[0.0, 1.0, 0.5, 0.5], &SvrConfig::default()).unwrap();
        assert!(fit.degenerate);
    }

    #[test]
    fn bad_inputs_rejected() {
        let cfg = SvrConfig::default();
        assert!(train_svr(&[vec![1.0]], &[0.5], &cfg).is_err());
        assert!(train_svr(&[vec![1.0], vec![0.0]], &[0.5, 1.5], &cfg).is_err());
        assert!(score(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn score_is_a_dot_product() {
        assert_eq!(score(&[0.0; 3], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(score(&[0.0, 1.0, 0.0], &[1.0, 2.0, 3.0]).unwrap(), 2.0);
        let mut rng = rng_from(3);
        let w: Vec<f64> = (0..535).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f: Vec<f64> = (0..535).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut naive = 0.0;
        for i in 0..535 {
            naive += w[i] * f[i];
        }
        assert!((score(&w, &f).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn top_indices_sorts_and_breaks_ties_low() {
        assert_eq!(top_indices(&[0.1, 0.9], 1), vec![1]);
        assert_eq!(top_indices(&[0.5, 0.7, 0.5, 0.7], 4), vec![1, 3, 0, 2]);
        assert_eq!(top_indices(&[0.2, 0.1, 0.3], 3), vec![2, 0, 1]);
        // positive rescaling keeps the order
        let s = [0.3, -0.2, 0.8, 0.1];
        let scaled: Vec<f64> = s.iter().map(|v| v * 7.5).collect();
        assert_eq!(top_indices(&s, 4), top_indices(&scaled, 4));
    }

    #[test]
    fn select_top_keeps_best_and_tags_types() {
        use crate::features::PBG_DIM;
        let a = PbgFeature { bins: [0; 14] };
        let b = PbgFeature { bins: [17; 14] };
        let dicts = (0..NUM_PARTS)
            .map(|p| Dictionary::new(PART_NAMES[p], vec![a.to_dense(), b.to_dense()]).unwrap())
            .collect();
        let unary = UnaryDictionary { parts: dicts };
        let feats = vec![vec![0.9, 0.0], vec![0.1, 0.0], vec![0.5, 0.0]];
        let model = SvrModel {
            schema_version: RANKER_SCHEMA_VERSION,
            feature_dim: 2,
            config: SvrConfig::default(),
            parts: (0..NUM_PARTS)
                .map(|p| PartWeights {
                    part: PART_NAMES[p].into(),
                    weights: vec![1.0, 0.0],
                    epochs: 0,
                    converged: true,
                })
                .collect(),
        };
        let sel = select_top(&feats, &[a, b, b], &model, &unary, 2).unwrap();
        let c = sel.candidates(0);
        assert_eq!(c.iter().map(|c| c.segment).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(c.iter().map(|c| c.part_type).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(sel.of_type(0, 2).count(), 1);
        assert!(!sel.parts[0].short);
        let all = select_top(&feats, &[a, b, b], &model, &unary, 5).unwrap();
        assert!(all.parts[0].short);
        assert_eq!(all.candidates(3).len(), 3);
        assert_eq!(PBG_DIM, unary.parts[0].dim());
    }
}
