use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{AnalysisError, Result};

const MAX_LLOYD_ITERS: u32 = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct Kmeans {
    /// Cluster index per input row.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each point to its centroid.
    pub inertia: f64,
    pub iterations: u32,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Careful-seeding initialization: first centroid uniform, each next drawn
/// with probability proportional to squared distance from the chosen set.
fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = d2.iter().rposition(|&w| w > 0.0).unwrap_or(n - 1);
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            // all remaining mass at distance zero: duplicates of the chosen
            // set, take the lowest unchosen index
            match chosen.iter().position(|&c| !c) {
                Some(i) => i,
                None => break,
            }
        };
        chosen[pick] = true;
        centroids.push(points[pick].clone());
        let last = centroids.last().unwrap();
        for (slot, p) in d2.iter_mut().zip(points) {
            let d = dist2(p, last);
            if d < *slot {
                *slot = d;
            }
        }
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut assignments = Vec::with_capacity(points.len());
    let mut inertia = 0.0;
    for p in points {
        let (i, d) = nearest(p, centroids);
        assignments.push(i);
        inertia += d;
    }
    (assignments, inertia)
}

fn update_centroids(points: &[Vec<f64>], assignments: &[usize], k: usize, d: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (sum, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            for s in sum.iter_mut() {
                *s /= c as f64;
            }
        }
    }
    sums
}

/// Lloyd's algorithm with careful seeding. Runs to an assignment fixpoint or
/// 300 iterations. A cluster that loses all members is re-seeded with the
/// point farthest from its current centroid, which keeps every centroid
/// meaningful on degenerate data. Same seed, same input, same result.
pub fn kmeans_cluster(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Kmeans> {
    let n = points.len();
    if k == 0 {
        return Err(AnalysisError::InvalidInput("k must be at least 1".into()));
    }
    if n < k {
        return Err(AnalysisError::TooFewRows { rows: n, need: k });
    }
    let d = points[0].len();
    for p in points {
        if p.len() != d {
            return Err(AnalysisError::RaggedRows { a: d, b: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let (mut assignments, mut inertia) = assign(points, &centroids);

    let mut iterations = 0;
    for _ in 0..MAX_LLOYD_ITERS {
        iterations += 1;
        let mut next_centroids = update_centroids(points, &assignments, k, d);

        // revive empty clusters from the worst-fit point
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        let mut reseeded = false;
        for cluster in 0..k {
            if counts[cluster] > 0 {
                continue;
            }
            let mut far = 0;
            let mut far_d = f64::NEG_INFINITY;
            for (i, &a) in assignments.iter().enumerate() {
                let d = dist2(&points[i], &next_centroids[a]);
                if d > far_d {
                    far = i;
                    far_d = d;
                }
            }
            counts[assignments[far]] -= 1;
            counts[cluster] += 1;
            assignments[far] = cluster;
            next_centroids[cluster] = points[far].clone();
            reseeded = true;
        }

        centroids = next_centroids;
        let (new_assignments, new_inertia) = assign(points, &centroids);
        let stable = new_assignments == assignments && !reseeded;
        assignments = new_assignments;
        inertia = new_inertia;
        if stable {
            break;
        }
    }

    Ok(Kmeans { assignments, centroids, inertia, iterations })
}
