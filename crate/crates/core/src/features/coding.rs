//! Prototype dictionaries (k-means) and soft-assignment coding
//! `a_m = exp(-λ‖f - b_m‖)`, `a'_m = a_m / Σ a`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pbg::{PbgFeature, PBG_DIM};
use crate::error::{Error, Result};
use crate::seed::rng_from;

pub const DEFAULT_LAMBDA: f64 = 4.0;
pub const UNARY_PROTOTYPES: usize = 6;
pub const PAIR_PROTOTYPES: usize = 8;
const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    /// Part or part-pair name.
    pub owner: String,
    pub prototypes: Vec<Vec<f64>>,
    #[serde(skip)]
    sq_norms: Vec<f64>,
}

impl Dictionary {
    pub fn new(owner: impl Into<String>, prototypes: Vec<Vec<f64>>) -> Result<Self> {
        let dim = prototypes
            .first()
            .ok_or_else(|| Error::invalid("dictionary needs at least one prototype"))?
            .len();
        if prototypes.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("prototypes differ in dimension"));
        }
        let mut d = Dictionary {
            owner: owner.into(),
            prototypes,
            sq_norms: Vec::new(),
        };
        d.refresh();
        Ok(d)
    }

    /// Recomputes cached norms; call after deserializing.
    pub fn refresh(&mut self) {
        self.sq_norms = self
            .prototypes
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum())
            .collect();
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].len()
    }

    /// Squared distances from a dense feature.
    pub fn sq_distances(&self, feat: &[f64]) -> Result<Vec<f64>> {
        if feat.len() != self.dim() {
            return Err(Error::invalid(format!(
                "feature has {} dims, dictionary {} has {}",
                feat.len(),
                self.owner,
                self.dim()
            )));
        }
        Ok(self.prototypes.iter().map(|p| sq_dist(feat, p)).collect())
    }

    /// Squared distances from a binary feature given by its set positions.
    pub fn sq_distances_hot(&self, hot: &[usize]) -> Result<Vec<f64>> {
        if let Some(&m) = hot.iter().max() {
            if m >= self.dim() {
                return Err(Error::invalid("binary feature exceeds dictionary dimension"));
            }
        }
        let n = hot.len() as f64;
        Ok(self
            .prototypes
            .iter()
            .zip(&self.sq_norms)
            .map(|(p, sq)| {
                let dot: f64 = hot.iter().map(|&i| p[i]).sum();
                (sq - 2.0 * dot + n).max(0.0)
            })
            .collect())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of [`kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    /// Nearest-centroid index of each sample w.r.t. the final centroids.
    pub labels: Vec<usize>,
    pub iterations: usize,
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Seeded k-means++ initialization followed by Lloyd iterations until the
/// largest centroid move is below 1e-6 or 100 iterations. An empty cluster
/// is reseeded at the sample farthest from its centroid.
pub fn kmeans(samples: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::invalid("k-means needs at least one cluster"));
    }
    if samples.len() < k {
        return Err(Error::invalid(format!(
            "{} samples cannot form {k} clusters",
            samples.len()
        )));
    }
    let dim = samples[0].len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::invalid("samples differ in dimension"));
    }
    let mut rng = rng_from(seed);
    let mut chosen = vec![rng.random_range(0..samples.len())];
    let mut d2: Vec<f64> = samples.iter().map(|s| sq_dist(s, &samples[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut t = rng.random_range(0.0..total);
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    if t < d {
                        pick = Some(i);
                        break;
                    }
                    t -= d;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            // fewer distinct samples than clusters
            (0..samples.len()).find(|i| !chosen.contains(i)).expect("samples.len() >= k")
        };
        chosen.push(next);
        for (i, s) in samples.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(s, &samples[next]));
        }
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&i| samples[i].clone()).collect();
    let mut labels = vec![0usize; samples.len()];
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITERS {
        iterations += 1;
        let mut dist = vec![0.0; samples.len()];
        for (i, s) in samples.iter().enumerate() {
            let (l, d) = nearest(s, &centroids);
            labels[i] = l;
            dist[i] = d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (s, &l) in samples.iter().zip(&labels) {
            counts[l] += 1;
            for (a, v) in sums[l].iter_mut().zip(s) {
                *a += v;
            }
        }
        let mut taken = vec![false; samples.len()];
        let mut moved = 0.0f64;
        for c in 0..k {
            let new = if counts[c] == 0 {
                let far = (0..samples.len())
                    .filter(|&i| !taken[i])
                    .fold(None::<usize>, |best, i| match best {
                        Some(b) if dist[b] >= dist[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("samples.len() >= k");
                taken[far] = true;
                dist[far] = 0.0;
                samples[far].clone()
            } else {
                sums[c].iter().map(|v| v / counts[c] as f64).collect()
            };
            moved = moved.max(sq_dist(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if moved < KMEANS_TOL {
            break;
        }
    }
    for (i, s) in samples.iter().enumerate() {
        labels[i] = nearest(s, &centroids).0;
    }
    Ok(KMeans {
        centroids,
        labels,
        iterations,
    })
}

/// k-means dictionary over dense features.
pub fn learn_dictionary(
    owner: &str,
    features: &[Vec<f64>],
    n_clusters: usize,
    seed: u64,
) -> Result<Dictionary> {
    let km = kmeans(features, n_clusters, seed)?;
    Dictionary::new(owner, km.centroids)
}

/// Dictionary over PBG features.
pub fn learn_pbg_dictionary(
    owner: &str,
    features: &[PbgFeature],
    n_clusters: usize,
    seed: u64,
) -> Result<Dictionary> {
    let dense: Vec<Vec<f64>> = features.iter().map(PbgFeature::to_dense).collect();
    learn_dictionary(owner, &dense, n_clusters, seed)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("lambda must be positive"))
    }
}

/// `[a_1..a_N, a'_1..a'_N]` from squared distances.
pub fn code_from_sq_distances(sq: &[f64], lambda: f64) -> Vec<f64> {
    let n = sq.len();
    let mut out = vec![0.0; 2 * n];
    let dmin = sq.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
    // normalize relative to the nearest prototype so the ratio survives underflow
    let mut rel_sum = 0.0;
    for (m, &d2) in sq.iter().enumerate() {
        let d = d2.sqrt();
        out[m] = (-lambda * d).exp();
        let rel = (-lambda * (d - dmin)).exp();
        out[n + m] = rel;
        rel_sum += rel;
    }
    for v in &mut out[n..] {
        *v /= rel_sum;
    }
    out
}

/// Soft-assignment code of a dense feature.
pub fn code_pbg(feat: &[f64], dict: &Dictionary, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    Ok(code_from_sq_distances(&dict.sq_distances(feat)?, lambda))
}

/// Soft-assignment code of a PBG feature.
pub fn code_pbg_feature(feat: &PbgFeature, dict: &Dictionary, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    Ok(code_from_sq_distances(&dict.sq_distances_hot(&feat.hot())?, lambda))
}

/// Code of the concatenation `[pbg(a); pbg(b)]`; a missing side gives the
/// all-zero vector.
pub fn pairwise_code(
    a: Option<&PbgFeature>,
    b: Option<&PbgFeature>,
    dict: &Dictionary,
    lambda: f64,
) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if dict.dim() != 2 * PBG_DIM {
        return Err(Error::invalid(format!(
            "pair dictionary {} has {} dims, expected {}",
            dict.owner,
            dict.dim(),
            2 * PBG_DIM
        )));
    }
    match (a, b) {
        (Some(a), Some(b)) => {
            let mut hot = a.hot().to_vec();
            hot.extend(b.hot().iter().map(|i| i + PBG_DIM));
            Ok(code_from_sq_distances(&dict.sq_distances_hot(&hot)?, lambda))
        }
        _ => Ok(vec![0.0; 2 * dict.len()]),
    }
}

/// Concatenated pair feature for dictionary learning.
pub fn pair_dense(a: &PbgFeature, b: &PbgFeature) -> Vec<f64> {
    let mut v = a.to_dense();
    v.extend(b.to_dense());
    v
}

/// Type index `1..=N` of the prototype with the largest un-normalized code
/// (ties go low); `None` (the null segment) maps to type 0.
pub fn assign_part_type(feat: Option<&PbgFeature>, dict: &Dictionary) -> Result<usize> {
    let Some(f) = feat else {
        return Ok(0);
    };
    let sq = dict.sq_distances_hot(&f.hot())?;
    Ok(argmin_low(&sq) + 1)
}

fn argmin_low(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Per-part dictionaries coded jointly over all `K × N_p` prototypes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnaryDictionary {
    pub parts: Vec<Dictionary>,
}

impl UnaryDictionary {
    pub fn total(&self) -> usize {
        self.parts.iter().map(Dictionary::len).sum()
    }

    pub fn refresh(&mut self) {
        for d in &mut self.parts {
            d.refresh();
        }
    }

    /// C-PBG over the concatenated dictionary, length `2 * total()`.
    pub fn code(&self, feat: &PbgFeature, lambda: f64) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        let hot = feat.hot();
        let mut sq = Vec::with_capacity(self.total());
        for d in &self.parts {
            sq.extend(d.sq_distances_hot(&hot)?);
        }
        Ok(code_from_sq_distances(&sq, lambda))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_distance_codes_one() {
        let f = vec![1.0, 0.0, 1.0];
        let d = Dictionary::new("x", vec![f.clone()]).unwrap();
        assert_eq!(code_pbg(&f, &d, 4.0).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn equidistant_prototypes_split_evenly() {
        let d = Dictionary::new("x", vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let c = code_pbg(&[0.0, 0.0], &d, 4.0).unwrap();
        assert_eq!(&c[2..], &[0.5, 0.5]);
        assert_eq!(assign_part_type(None, &d).unwrap(), 0);
    }

    #[test]
    fn tiny_lambda_limit() {
        let d = Dictionary::new("x", vec![vec![0.0; 4], vec![1.0; 4], vec![3.0; 4]]).unwrap();
        let c = code_pbg(&[0.5; 4], &d, 1e-9).unwrap();
        for v in &c[..3] {
            assert!((v - 1.0).abs() < 1e-8);
        }
        for v in &c[3..] {
            assert!((v - 1.0 / 3.0).abs() < 1e-8);
        }
        assert!(code_pbg(&[0.5; 4], &d, 0.0).is_err());
        assert!(code_pbg(&[0.5; 3], &d, 1.0).is_err());
    }

    #[test]
    fn kmeans_recovers_distinct_inputs_and_group_means() {
        let pts = vec![vec![0.0, 0.0], vec![5.0, 1.0], vec![-3.0, 7.0]];
        let km = kmeans(&pts, 3, 1).unwrap();
        let mut got = km.centroids.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = pts.clone();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);

        let g1 = [vec![0.0, 0.0], vec![0.2, 0.1], vec![0.1, 0.3]];
        let g2 = [vec![10.0, 10.0], vec![10.4, 9.9]];
        let all: Vec<Vec<f64>> = g1.iter().chain(&g2).cloned().collect();
        let km = kmeans(&all, 2, 7).unwrap();
        let mean = |g: &[Vec<f64>]| -> Vec<f64> {
            (0..2).map(|d| g.iter().map(|p| p[d]).sum::<f64>() / g.len() as f64).collect()
        };
        let (m1, m2) = (mean(&g1), mean(&g2));
        let close = |a: &[f64], b: &[f64]| sq_dist(a, b) < 1e-20;
        assert!(
            (close(&km.centroids[0], &m1) && close(&km.centroids[1], &m2))
                || (close(&km.centroids[0], &m2) && close(&km.centroids[1], &m1))
        );
        assert_eq!(kmeans(&all, 2, 7).unwrap(), km);
        assert!(kmeans(&all, 6, 7).is_err());
    }

    #[test]
    fn duplicate_samples_still_fill_clusters() {
        let pts = vec![vec![1.0], vec![1.0], vec![1.0], vec![2.0]];
        let km = kmeans(&pts, 3, 0).unwrap();
        assert_eq!(km.centroids.len(), 3);
    }

    #[test]
    fn type_assignment_follows_kmeans_labels() {
        use crate::features::pbg::pbg;
        use crate::parts;
        use crate::synth::{generate_scenes, GeneratorConfig};
        let scenes = generate_scenes(5, 0, 40, &GeneratorConfig::default()).unwrap();
        let feats: Vec<PbgFeature> = scenes
            .iter()
            .filter_map(|s| {
                let m = s.labels.mask_of(parts::label_of(parts::FACE));
                (!m.is_null()).then(|| pbg(&m, &s.joints).unwrap())
            })
            .collect();
        let dense: Vec<Vec<f64>> = feats.iter().map(PbgFeature::to_dense).collect();
        let km = kmeans(&dense, UNARY_PROTOTYPES, 3).unwrap();
        let dict = Dictionary::new("face", km.centroids.clone()).unwrap();
        for (f, l) in feats.iter().zip(&km.labels) {
            assert_eq!(assign_part_type(Some(f), &dict).unwrap(), l + 1);
        }
    }

    #[test]
    fn pair_code_conventions() {
        let a = PbgFeature { bins: [3; 14] };
        let b = PbgFeature { bins: [17; 14] };
        let other = PbgFeature { bins: [0; 14] };
        let d = Dictionary::new(
            "pair",
            vec![pair_dense(&other, &other), pair_dense(&a, &b), pair_dense(&b, &a)],
        )
        .unwrap();
        let c = pairwise_code(Some(&a), Some(&b), &d, 4.0).unwrap();
        assert_eq!(c[1], 1.0);
        let norm = &c[3..];
        assert!(norm[1] >= norm[0] && norm[1] >= norm[2]);
        assert_eq!(pairwise_code(None, None, &d, 4.0).unwrap(), vec![0.0; 6]);
        assert_eq!(pairwise_code(Some(&a), None, &d, 4.0).unwrap(), vec![0.0; 6]);
    }

    proptest! {
        #[test]
        fn codes_normalize_and_hot_distances_match_dense(
            bins in proptest::array::uniform14(0u8..24),
            protos in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, PBG_DIM), 1..5),
            lambda in 0.01f64..20.0,
        ) {
            let f = PbgFeature { bins };
            let d = Dictionary::new("p", protos).unwrap();
            let dense = d.sq_distances(&f.to_dense()).unwrap();
            let hot = d.sq_distances_hot(&f.hot()).unwrap();
            for (a, b) in dense.iter().zip(&hot) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let c = code_pbg_feature(&f, &d, lambda).unwrap();
            let n = d.len();
            prop_assert!((c[n..].iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for v in &c {
                prop_assert!(*v >= 0.0 && *v <= 1.0);
            }
        }
    }
}
