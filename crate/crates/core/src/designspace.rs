//! Design-space embedding, clustering, representative sampling and
//! diversity scoring.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::depthsynth::DepthMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignSpaceError {
    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("vector length {got} differs from {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot draw {wanted} designs from {available}")]
    InsufficientDesigns { wanted: usize, available: usize },
    #[error("{0} is undefined for this clustering")]
    UndefinedIndex(&'static str),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub design_id: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Embedding2D {
    pub design_id: usize,
    pub x: f64,
    pub y: f64,
}

impl Embedding2D {
    pub fn point(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Block-averaged depths on a `grid` x `grid` tiling, each depth divided by
/// the map's largest valid depth. Blocks without valid pixels are 0.
pub fn depth_features(d: &DepthMap, grid: usize) -> Vec<f64> {
    let max = d
        .values
        .iter()
        .zip(&d.valid)
        .filter(|(_, &ok)| ok)
        .map(|(v, _)| *v)
        .fold(0.0, f64::max);
    let mut sum = vec![0.0; grid * grid];
    let mut count = vec![0usize; grid * grid];
    if grid == 0 || max <= 0.0 {
        return sum;
    }
    for y in 0..d.height {
        let by = y * grid / d.height;
        for x in 0..d.width {
            let i = y * d.width + x;
            if d.valid[i] {
                let b = by * grid + x * grid / d.width;
                sum[b] += d.values[i] / max;
                count[b] += 1;
            }
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect()
}

/// Two-component principal-axis projection of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub embeddings: Vec<Embedding2D>,
    pub mean: Vec<f64>,
    /// Unit principal directions, largest-magnitude loading positive.
    pub components: [Vec<f64>; 2],
    /// Sample variance (n - 1 denominator) along each component.
    pub variances: [f64; 2],
    /// Set when the second component carries no variance.
    pub rank_deficient: bool,
}

impl Reduction {
    /// Maps embedding coordinates back into feature space.
    pub fn reconstruct(&self, x: f64, y: f64) -> Vec<f64> {
        (0..self.mean.len())
            .map(|j| self.mean[j] + x * self.components[0][j] + y * self.components[1][j])
            .collect()
    }
}

pub fn reduce_2d(features: &[FeatureVector]) -> Result<Reduction, DesignSpaceError> {
    let n = features.len();
    if n < 3 {
        return Err(DesignSpaceError::TooFew { needed: 3, got: n });
    }
    let p = features[0].values.len();
    for f in features {
        if f.values.len() != p {
            return Err(DesignSpaceError::DimensionMismatch { expected: p, got: f.values.len() });
        }
    }
    if p == 0 {
        return Err(DesignSpaceError::InvalidParams("empty feature vectors".into()));
    }
    let mean: Vec<f64> = (0..p).map(|j| features.iter().map(|f| f.values[j]).sum::<f64>() / n as f64).collect();
    let centred = faer::Mat::<f64>::from_fn(n, p, |i, j| features[i].values[j] - mean[j]);
    let svd = centred
        .thin_svd()
        .map_err(|_| DesignSpaceError::InvalidParams("singular value decomposition failed".into()))?;
    let v = svd.V();
    let s = svd.S().column_vector();
    let mut components: [Vec<f64>; 2] = [vec![0.0; p], vec![0.0; p]];
    let mut variances = [0.0; 2];
    for c in 0..2.min(p) {
        let mut dir: Vec<f64> = (0..p).map(|j| v[(j, c)]).collect();
        let lead = dir.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            dir.iter_mut().for_each(|x| *x = -*x);
        }
        components[c] = dir;
        variances[c] = s[c] * s[c] / (n - 1) as f64;
    }
    let scale = s[0].max(f64::MIN_POSITIVE);
    let rank_deficient = p < 2 || s[1] <= 1e-12 * scale;
    if rank_deficient {
        components[1] = vec![0.0; p];
        variances[1] = 0.0;
    }
    let embeddings = features
        .iter()
        .map(|f| {
            let proj = |c: &[f64]| f.values.iter().zip(&mean).zip(c).map(|((x, m), w)| (x - m) * w).sum::<f64>();
            Embedding2D { design_id: f.design_id, x: proj(&components[0]), y: proj(&components[1]) }
        })
        .collect();
    Ok(Reduction { embeddings, mean, components, variances, rank_deficient })
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    pub inertia: f64,
    pub iterations: usize,
}

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, q) in centroids.iter().enumerate() {
        let d = dist2(p, *q);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd iterations from a seeded k-means++ start, run until no label
/// changes. An emptied cluster is moved onto the point farthest from its
/// current centroid.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> Result<KMeans, DesignSpaceError> {
    let n = points.len();
    if k == 0 {
        return Err(DesignSpaceError::InvalidParams("k must be positive".into()));
    }
    if n < k {
        return Err(DesignSpaceError::TooFew { needed: k, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(*p, points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let last = d2.iter().rposition(|&w| w > 0.0).unwrap();
            (0..last)
                .find(|&i| {
                    let hit = d2[i] > 0.0 && u < d2[i];
                    u -= d2[i];
                    hit
                })
                .unwrap_or(last)
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(pick);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(*p, points[pick]));
        }
    }
    let mut centroids: Vec<[f64; 2]> = chosen.iter().map(|&i| points[i]).collect();
    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(*p, &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        loop {
            let mut counts = vec![0usize; k];
            labels.iter().for_each(|&l| counts[l] += 1);
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| {
                    dist2(points[a], centroids[labels[a]])
                        .total_cmp(&dist2(points[b], centroids[labels[b]]))
                        .then(b.cmp(&a))
                })
                .unwrap();
            labels[far] = empty;
            centroids[empty] = points[far];
            changed = true;
        }
        let mut sums = vec![[0.0; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        for c in 0..k {
            centroids[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
        }
        if !changed || iterations >= 500 {
            break;
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| dist2(*p, centroids[l])).sum();
    Ok(KMeans { labels, centroids, inertia, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterQuality {
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub calinski_harabasz: f64,
}

/// Silhouette (singletons score 0), Davies-Bouldin and Calinski-Harabasz
/// indices for labels `0..k`.
pub fn cluster_quality(points: &[[f64; 2]], labels: &[usize]) -> Result<ClusterQuality, DesignSpaceError> {
    let n = points.len();
    if labels.len() != n {
        return Err(DesignSpaceError::DimensionMismatch { expected: n, got: labels.len() });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(DesignSpaceError::TooFew { needed: 2, got: k });
    }
    let mut counts = vec![0usize; k];
    let mut centroids = vec![[0.0; 2]; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        centroids[l][0] += p[0];
        centroids[l][1] += p[1];
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(DesignSpaceError::EmptyCluster(c));
    }
    for c in 0..k {
        centroids[c] = [centroids[c][0] / counts[c] as f64, centroids[c][1] / counts[c] as f64];
    }

    let mut silhouette = 0.0;
    let mut to_cluster = vec![0.0; k];
    for i in 0..n {
        to_cluster.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            if i != j {
                to_cluster[labels[j]] += dist2(points[i], points[j]).sqrt();
            }
        }
        let own = labels[i];
        if counts[own] == 1 {
            continue;
        }
        let a = to_cluster[own] / (counts[own] - 1) as f64;
        let b = (0..k).filter(|&c| c != own).map(|c| to_cluster[c] / counts[c] as f64).fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            silhouette += (b - a) / m;
        }
    }
    silhouette /= n as f64;

    let mut scatter = vec![0.0; k];
    for (p, &l) in points.iter().zip(labels) {
        scatter[l] += dist2(*p, centroids[l]).sqrt();
    }
    for c in 0..k {
        scatter[c] /= counts[c] as f64;
    }
    let mut davies_bouldin = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = dist2(centroids[i], centroids[j]).sqrt();
            if d == 0.0 {
                return Err(DesignSpaceError::UndefinedIndex("davies_bouldin"));
            }
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        davies_bouldin += worst;
    }
    davies_bouldin /= k as f64;

    let mean = [
        points.iter().map(|p| p[0]).sum::<f64>() / n as f64,
        points.iter().map(|p| p[1]).sum::<f64>() / n as f64,
    ];
    let between: f64 = (0..k).map(|c| counts[c] as f64 * dist2(centroids[c], mean)).sum();
    let within: f64 = points.iter().zip(labels).map(|(p, &l)| dist2(*p, centroids[l])).sum();
    if within == 0.0 || n == k {
        return Err(DesignSpaceError::UndefinedIndex("calinski_harabasz"));
    }
    let calinski_harabasz = (between / (k - 1) as f64) / (within / (n - k) as f64);
    Ok(ClusterQuality { silhouette, davies_bouldin, calinski_harabasz })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LhsSample {
    /// Chosen design ids in the order their LHS points were drawn.
    pub design_ids: Vec<usize>,
    pub lhs_points: Vec<[f64; 2]>,
}

/// Latin hypercube points over the embedding bounding box, each matched to
/// its nearest not-yet-claimed design (ties go to the lower id).
pub fn lhs_sample(embeddings: &[Embedding2D], n_samples: usize, seed: u64) -> Result<LhsSample, DesignSpaceError> {
    if n_samples == 0 || n_samples > embeddings.len() {
        return Err(DesignSpaceError::InsufficientDesigns { wanted: n_samples, available: embeddings.len() });
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for e in embeddings {
        for (a, v) in e.point().into_iter().enumerate() {
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: [Vec<usize>; 2] = [(0..n_samples).collect(), (0..n_samples).collect()];
    for s in &mut strata {
        s.shuffle(&mut rng);
    }
    let lhs_points: Vec<[f64; 2]> = (0..n_samples)
        .map(|i| {
            std::array::from_fn(|a| {
                let u: f64 = rng.random();
                lo[a] + (strata[a][i] as f64 + u) / n_samples as f64 * (hi[a] - lo[a])
            })
        })
        .collect();
    let mut order: Vec<usize> = (0..embeddings.len()).collect();
    order.sort_by_key(|&i| embeddings[i].design_id);
    let mut claimed = vec![false; embeddings.len()];
    let mut design_ids = Vec::with_capacity(n_samples);
    for q in &lhs_points {
        let mut best: Option<(usize, f64)> = None;
        for &i in &order {
            if claimed[i] {
                continue;
            }
            let d = dist2(*q, embeddings[i].point());
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("fewer designs than samples");
        claimed[i] = true;
        design_ids.push(embeddings[i].design_id);
    }
    Ok(LhsSample { design_ids, lhs_points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diversity {
    /// Indices of the scored subset in the input order.
    pub subset: Vec<usize>,
    /// Mean Euclidean distance from each subset item to the others.
    pub scores: Vec<f64>,
    pub mean: f64,
}

/// Per-item mean pairwise distance over a seeded random subset of size
/// `subset_size`; the whole set is used when the sizes match.
pub fn diversity(vectors: &[Vec<f64>], subset_size: usize, seed: u64) -> Result<Diversity, DesignSpaceError> {
    if subset_size < 2 {
        return Err(DesignSpaceError::TooFew { needed: 2, got: subset_size });
    }
    if subset_size > vectors.len() {
        return Err(DesignSpaceError::InsufficientDesigns { wanted: subset_size, available: vectors.len() });
    }
    let dim = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(DesignSpaceError::DimensionMismatch { expected: dim, got: v.len() });
    }
    let subset: Vec<usize> = if subset_size == vectors.len() {
        (0..vectors.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, vectors.len(), subset_size).into_vec();
        idx.sort_unstable();
        idx
    };
    let n = subset.len();
    let mut scores = vec![0.0; n];
    for a in 0..n {
        for b in a + 1..n {
            let d = vectors[subset[a]]
                .iter()
                .zip(&vectors[subset[b]])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            scores[a] += d;
            scores[b] += d;
        }
    }
    scores.iter_mut().for_each(|s| *s /= (n - 1) as f64);
    let mean = scores.iter().sum::<f64>() / n as f64;
    Ok(Diversity { subset, scores, mean })
}
