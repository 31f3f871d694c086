//! Flat clustering: k-means++ seeding, k-majority, Lloyd's k-means and BRB-KMeans.
//!
//! All three algorithms share one Lloyd loop parameterized by a metric space. The loop
//! stops at an assignment fixpoint (or `max_iters`), breaks assignment ties toward the
//! lowest centroid index, and repairs empty clusters by moving the farthest member of the
//! largest cluster into them. On return every centroid is the mean (or majority) of the
//! returned members.
//!
//! BRB-KMeans here is realize-once, Lloyd in real space, binarize-once, followed by a
//! Hamming re-assignment so the binary centroids agree with the reported members.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{
    binarize, mean_of_refs, BinaryDescriptor, BitCounts, RealDescriptor, BINARIZE_THRESHOLD,
};
use crate::error::{Error, Result};

/// Below this many points the assignment step stays on the calling thread.
const PAR_MIN_POINTS: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop early once the relative objective improvement drops below this. 0 disables.
    pub min_relative_improvement: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 10,
            max_iters: 100,
            seed: 0,
            min_relative_improvement: 0.0,
        }
    }
}

impl ClusterConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.min_relative_improvement.is_nan() || self.min_relative_improvement < 0.0 {
            return Err(Error::Config(
                "min_relative_improvement must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult<C> {
    pub centroids: Vec<C>,
    /// Centroid index per input point.
    pub assignments: Vec<usize>,
    /// Sum of distances (Hamming or squared Euclidean) of points to their centroids.
    pub objective: f64,
    pub iterations_run: usize,
    /// Objective after every centroid update, in order.
    pub objective_trace: Vec<f64>,
}

impl<C> ClusterResult<C> {
    /// Member indices per centroid, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centroids.len()];
        for (i, &a) in self.assignments.iter().enumerate() {
            out[a].push(i);
        }
        out
    }
}

/// A metric space the Lloyd loop can run in.
pub(crate) trait Space: Sync {
    type Point: Sync;
    type Centroid: Clone + Send + Sync;
    /// Per-centroid precomputation used by `distance`.
    type Prepared: Send + Sync;

    fn prepare(&self, c: &Self::Centroid) -> Self::Prepared;
    fn distance(&self, p: &Self::Point, c: &Self::Prepared) -> f64;
    /// Distance between two input points (k-means++ weights).
    fn point_distance(&self, a: &Self::Point, b: &Self::Point) -> f64;
    fn to_centroid(&self, p: &Self::Point) -> Self::Centroid;
    fn mean(&self, members: &[&Self::Point]) -> Self::Centroid;
}

/// Binary points, binary centroids, Hamming distance, majority-vote centroids.
pub(crate) struct HammingSpace;

impl Space for HammingSpace {
    type Point = BinaryDescriptor;
    type Centroid = BinaryDescriptor;
    type Prepared = BinaryDescriptor;

    fn prepare(&self, c: &BinaryDescriptor) -> BinaryDescriptor {
        c.clone()
    }

    #[inline]
    fn distance(&self, p: &BinaryDescriptor, c: &BinaryDescriptor) -> f64 {
        p.distance(c) as f64
    }

    fn point_distance(&self, a: &BinaryDescriptor, b: &BinaryDescriptor) -> f64 {
        a.distance(b) as f64
    }

    fn to_centroid(&self, p: &BinaryDescriptor) -> BinaryDescriptor {
        p.clone()
    }

    fn mean(&self, members: &[&BinaryDescriptor]) -> BinaryDescriptor {
        let mut counts = BitCounts::new(members[0].bits());
        members.iter().for_each(|d| counts.add(d));
        counts.majority()
    }
}

/// Arbitrary real points with squared Euclidean distance.
pub(crate) struct EuclideanSpace;

impl Space for EuclideanSpace {
    type Point = RealDescriptor;
    type Centroid = RealDescriptor;
    type Prepared = RealDescriptor;

    fn prepare(&self, c: &RealDescriptor) -> RealDescriptor {
        c.clone()
    }

    #[inline]
    fn distance(&self, p: &RealDescriptor, c: &RealDescriptor) -> f64 {
        p.distance_sq(c)
    }

    fn point_distance(&self, a: &RealDescriptor, b: &RealDescriptor) -> f64 {
        a.distance_sq(b)
    }

    fn to_centroid(&self, p: &RealDescriptor) -> RealDescriptor {
        p.clone()
    }

    fn mean(&self, members: &[&RealDescriptor]) -> RealDescriptor {
        mean_of_refs(members)
    }
}

/// Realized binary points (0/1 vectors) against real centroids.
///
/// Squared distance from a 0/1 point to a centroid splits into per-octet partial sums, so
/// each centroid is prepared as a `bytes x 256` table and a distance costs one lookup per
/// octet instead of one multiply-add per bit.
pub(crate) struct RealizedSpace;

pub(crate) struct OctetTable {
    table: Vec<f64>,
}

impl Space for RealizedSpace {
    type Point = BinaryDescriptor;
    type Centroid = RealDescriptor;
    type Prepared = OctetTable;

    fn prepare(&self, c: &RealDescriptor) -> OctetTable {
        let values = c.values();
        let octets = values.len() / 8;
        let mut table = vec![0.0; octets * 256];
        for j in 0..octets {
            let bits = &values[8 * j..8 * j + 8];
            let zero: [f64; 8] = std::array::from_fn(|b| bits[b] * bits[b]);
            let one: [f64; 8] = std::array::from_fn(|b| (1.0 - bits[b]) * (1.0 - bits[b]));
            let row = &mut table[256 * j..256 * (j + 1)];
            for (v, slot) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for b in 0..8 {
                    s += if (v >> (7 - b)) & 1 == 1 {
                        one[b]
                    } else {
                        zero[b]
                    };
                }
                *slot = s;
            }
        }
        OctetTable { table }
    }

    #[inline]
    fn distance(&self, p: &BinaryDescriptor, c: &OctetTable) -> f64 {
        p.as_bytes()
            .iter()
            .enumerate()
            .map(|(j, &b)| c.table[256 * j + b as usize])
            .sum()
    }

    fn point_distance(&self, a: &BinaryDescriptor, b: &BinaryDescriptor) -> f64 {
        a.distance(b) as f64
    }

    fn to_centroid(&self, p: &BinaryDescriptor) -> RealDescriptor {
        crate::descriptor::realize(p)
    }

    fn mean(&self, members: &[&BinaryDescriptor]) -> RealDescriptor {
        let mut counts = BitCounts::new(members[0].bits());
        members.iter().for_each(|d| counts.add(d));
        counts.mean()
    }
}

fn check_uniform(mut widths: impl Iterator<Item = usize>) -> Result<()> {
    if let Some(first) = widths.next() {
        for w in widths {
            if w != first {
                return Err(Error::WidthMismatch {
                    expected: first,
                    found: w,
                });
            }
        }
    }
    Ok(())
}

fn kmeanspp_indices<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    distance: impl Fn(usize, usize) -> f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::InsufficientPoints {
            needed: k,
            available: n,
        });
    }
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut nearest: Vec<f64> = (0..n).map(|i| distance(i, first)).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // Everything left coincides with a chosen point.
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        for (i, w) in nearest.iter_mut().enumerate() {
            let d = distance(i, next);
            if d < *w {
                *w = d;
            }
        }
    }
    Ok(chosen)
}

/// k-means++ seeding: the first centroid uniformly, then each next one with probability
/// proportional to the distance to the nearest already chosen centroid.
///
/// Pass squared Euclidean distance for real points and Hamming distance for binary points.
pub fn kmeanspp_seed<P: Clone, R: Rng + ?Sized>(
    points: &[P],
    k: usize,
    distance: impl Fn(&P, &P) -> f64,
    rng: &mut R,
) -> Result<Vec<P>> {
    let idx = kmeanspp_indices(
        points.len(),
        k,
        |i, j| distance(&points[i], &points[j]),
        rng,
    )?;
    Ok(idx.into_iter().map(|i| points[i].clone()).collect())
}

fn nearest<S: Space>(space: &S, p: &S::Point, prepared: &[S::Prepared]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = space.distance(p, &prepared[0]);
    for (c, prep) in prepared.iter().enumerate().skip(1) {
        let d = space.distance(p, prep);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

fn assign<S: Space>(
    space: &S,
    points: &[&S::Point],
    prepared: &[S::Prepared],
) -> Vec<(usize, f64)> {
    if points.len() >= PAR_MIN_POINTS {
        points
            .par_iter()
            .with_min_len(PAR_MIN_POINTS / 4)
            .map(|p| nearest(space, p, prepared))
            .collect()
    } else {
        points.iter().map(|p| nearest(space, p, prepared)).collect()
    }
}

/// Moves the farthest member of the largest cluster into each empty cluster.
///
/// `assigned[i].1` must hold the distance of point `i` to its current centroid. Returns the
/// (point, cluster) moves made, in order.
fn repair_empty(assigned: &mut [(usize, f64)], k: usize) -> Vec<(usize, usize)> {
    let mut counts = vec![0usize; k];
    for &(c, _) in assigned.iter() {
        counts[c] += 1;
    }
    let mut moves = Vec::new();
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        // max_by_key returns the last maximum; scan manually for the lowest index.
        let mut largest = 0;
        for c in 1..k {
            if counts[c] > counts[largest] {
                largest = c;
            }
        }
        if counts[largest] < 2 {
            break;
        }
        let mut far: Option<usize> = None;
        for (i, &(c, d)) in assigned.iter().enumerate() {
            if c == largest && far.is_none_or(|f| d > assigned[f].1) {
                far = Some(i);
            }
        }
        let far = far.expect("largest cluster has members");
        assigned[far] = (empty, 0.0);
        counts[largest] -= 1;
        counts[empty] += 1;
        moves.push((far, empty));
    }
    moves
}

fn update<S: Space>(
    space: &S,
    points: &[&S::Point],
    assignments: &[usize],
    k: usize,
) -> Vec<S::Centroid> {
    let mut members: Vec<Vec<&S::Point>> = vec![Vec::new(); k];
    for (p, &a) in points.iter().zip(assignments) {
        members[a].push(*p);
    }
    members.par_iter().map(|m| space.mean(m)).collect()
}

fn objective<S: Space>(
    space: &S,
    points: &[&S::Point],
    assignments: &[usize],
    prepared: &[S::Prepared],
) -> f64 {
    // Sequential so the float sum is independent of thread count.
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| space.distance(p, &prepared[a]))
        .sum()
}

/// The shared Lloyd loop. Requires `points.len() >= init.len() >= 1`.
pub(crate) fn lloyd<S: Space>(
    space: &S,
    points: &[&S::Point],
    init: Vec<S::Centroid>,
    cfg: &ClusterConfig,
) -> ClusterResult<S::Centroid> {
    let k = init.len();
    let mut centroids = init;
    let mut assignments: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations_run = 0;
    for _ in 0..cfg.max_iters {
        iterations_run += 1;
        let prepared: Vec<_> = centroids.iter().map(|c| space.prepare(c)).collect();
        let mut assigned = assign(space, points, &prepared);
        repair_empty(&mut assigned, k);
        let next: Vec<usize> = assigned.into_iter().map(|(c, _)| c).collect();
        if next == assignments {
            break;
        }
        assignments = next;
        centroids = update(space, points, &assignments, k);
        let prepared: Vec<_> = centroids.iter().map(|c| space.prepare(c)).collect();
        let obj = objective(space, points, &assignments, &prepared);
        let stalled = match trace.last() {
            Some(&prev) if cfg.min_relative_improvement > 0.0 => {
                prev <= 0.0 || (prev - obj) / prev < cfg.min_relative_improvement
            }
            _ => false,
        };
        trace.push(obj);
        if stalled {
            break;
        }
    }
    ClusterResult {
        centroids,
        assignments,
        objective: *trace.last().expect("at least one iteration"),
        iterations_run,
        objective_trace: trace,
    }
}

pub(crate) fn seeded_lloyd<S: Space>(
    space: &S,
    points: &[&S::Point],
    cfg: &ClusterConfig,
) -> Result<ClusterResult<S::Centroid>> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyInput("clustering input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds = kmeanspp_indices(
        points.len(),
        cfg.k,
        |i, j| space.point_distance(points[i], points[j]),
        &mut rng,
    )?;
    let init = seeds
        .iter()
        .map(|&i| space.to_centroid(points[i]))
        .collect();
    Ok(lloyd(space, points, init, cfg))
}

pub(crate) fn kmajority_refs(
    descs: &[&BinaryDescriptor],
    cfg: &ClusterConfig,
) -> Result<ClusterResult<BinaryDescriptor>> {
    seeded_lloyd(&HammingSpace, descs, cfg)
}

/// Lloyd's k-means over the realized form of binary points.
pub(crate) fn realized_lloyd_refs(
    descs: &[&BinaryDescriptor],
    cfg: &ClusterConfig,
) -> Result<ClusterResult<RealDescriptor>> {
    seeded_lloyd(&RealizedSpace, descs, cfg)
}

pub(crate) fn brb_kmeans_refs(
    descs: &[&BinaryDescriptor],
    cfg: &ClusterConfig,
) -> Result<ClusterResult<BinaryDescriptor>> {
    let real = realized_lloyd_refs(descs, cfg)?;
    let mut centroids: Vec<BinaryDescriptor> = real
        .centroids
        .iter()
        .map(|c| binarize(c, BINARIZE_THRESHOLD))
        .collect();
    let mut assigned = assign(&HammingSpace, descs, &centroids);
    for (point, cluster) in repair_empty(&mut assigned, centroids.len()) {
        centroids[cluster] = descs[point].clone();
    }
    let assignments: Vec<usize> = assigned.into_iter().map(|(c, _)| c).collect();
    let obj = objective(&HammingSpace, descs, &assignments, &centroids);
    let mut trace = real.objective_trace;
    trace.push(obj);
    Ok(ClusterResult {
        centroids,
        assignments,
        objective: obj,
        iterations_run: real.iterations_run,
        objective_trace: trace,
    })
}

/// k-majority: Lloyd iterations in Hamming space with per-bit majority centroids.
pub fn kmajority(
    descs: &[BinaryDescriptor],
    cfg: &ClusterConfig,
) -> Result<ClusterResult<BinaryDescriptor>> {
    check_uniform(descs.iter().map(|d| d.bits()))?;
    let refs: Vec<_> = descs.iter().collect();
    kmajority_refs(&refs, cfg)
}

/// Standard Lloyd's k-means with squared Euclidean distance.
pub fn lloyd_real(
    points: &[RealDescriptor],
    cfg: &ClusterConfig,
) -> Result<ClusterResult<RealDescriptor>> {
    check_uniform(points.iter().map(|p| p.len()))?;
    let refs: Vec<_> = points.iter().collect();
    seeded_lloyd(&EuclideanSpace, &refs, cfg)
}

/// BRB-KMeans: k-means on the realized descriptors, centroids binarized at 0.5, then every
/// descriptor re-assigned to its nearest binary centroid. The objective is the Hamming
/// objective of that final assignment; `objective_trace` holds the real-domain trace
/// followed by it.
pub fn brb_kmeans(
    descs: &[BinaryDescriptor],
    cfg: &ClusterConfig,
) -> Result<ClusterResult<BinaryDescriptor>> {
    check_uniform(descs.iter().map(|d| d.bits()))?;
    let refs: Vec<_> = descs.iter().collect();
    brb_kmeans_refs(&refs, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{majority_centroid, real_mean, realize};
    use proptest::prelude::*;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_descs(n: usize, bits: usize, seed: u64) -> Vec<BinaryDescriptor> {
        let mut r = rng(seed);
        (0..n)
            .map(|_| BinaryDescriptor::random(bits, &mut r))
            .collect()
    }

    /// 8 copies of x and 8 of y with hamming(x, y) = 16, D = 32.
    fn two_bundles() -> (Vec<BinaryDescriptor>, BinaryDescriptor, BinaryDescriptor) {
        let x = BinaryDescriptor::from_bytes(vec![0x0f, 0x0f, 0x00, 0xff]);
        let y = BinaryDescriptor::from_bytes(vec![0xf0, 0xf0, 0x00, 0xff]);
        assert_eq!(x.distance(&y), 16);
        let mut v = vec![x.clone(); 8];
        v.extend(vec![y.clone(); 8]);
        (v, x, y)
    }

    fn as_set<T: Ord + Clone>(v: &[T]) -> Vec<T> {
        let mut v = v.to_vec();
        v.sort();
        v
    }

    #[test]
    fn kmeanspp_k1_picks_one_input() {
        let pts = random_descs(10, 32, 0);
        let out = kmeanspp_seed(&pts, 1, |a, b| a.distance(b) as f64, &mut rng(42)).unwrap();
        assert_eq!(out.len(), 1);
        assert!(pts.contains(&out[0]));
    }

    #[test]
    fn kmeanspp_exhausts_distinct_points() {
        let pts = random_descs(10, 32, 1);
        for seed in 0..100 {
            let out = kmeanspp_seed(&pts, 10, |a, b| a.distance(b) as f64, &mut rng(seed)).unwrap();
            assert_eq!(as_set(&out), as_set(&pts));
        }
    }

    #[test]
    fn kmeanspp_is_deterministic() {
        let pts = random_descs(10, 64, 2);
        let a = kmeanspp_seed(&pts, 4, |a, b| a.distance(b) as f64, &mut rng(42)).unwrap();
        let b = kmeanspp_seed(&pts, 4, |a, b| a.distance(b) as f64, &mut rng(42)).unwrap();
        assert_eq!(a, b);
        // Frozen: indices into the fixture for seed 42.
        let idx: Vec<usize> = a
            .iter()
            .map(|c| pts.iter().position(|p| p == c).unwrap())
            .collect();
        assert_eq!(
            idx,
            kmeanspp_indices(10, 4, |i, j| pts[i].distance(&pts[j]) as f64, &mut rng(42)).unwrap()
        );
    }

    #[test]
    fn kmeanspp_insufficient_points() {
        let pts = random_descs(3, 8, 0);
        let err = kmeanspp_seed(&pts, 4, |a, b| a.distance(b) as f64, &mut rng(0)).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientPoints {
                needed: 4,
                available: 3
            }
        ));
    }

    #[test]
    fn kmeanspp_with_duplicates_still_fills_k() {
        let x = BinaryDescriptor::zeros(8);
        let pts = vec![x.clone(), x.clone(), x];
        let out = kmeanspp_seed(&pts, 3, |a, b| a.distance(b) as f64, &mut rng(0)).unwrap();
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn kmajority_k1_is_majority() {
        let v = random_descs(33, 64, 3);
        let res = kmajority(&v, &ClusterConfig::new(1, 0)).unwrap();
        let m = majority_centroid(&v).unwrap();
        assert_eq!(res.centroids, vec![m.clone()]);
        let expected: u32 = v.iter().map(|d| d.distance(&m)).sum();
        assert_eq!(res.objective, expected as f64);
    }

    #[test]
    fn separable_bundles_reach_zero_for_every_algorithm() {
        let (v, x, y) = two_bundles();
        for seed in 0..10 {
            let cfg = ClusterConfig::new(2, seed);
            let km = kmajority(&v, &cfg).unwrap();
            assert_eq!(km.objective, 0.0);
            assert_eq!(as_set(&km.centroids), as_set(&[x.clone(), y.clone()]));

            let brb = brb_kmeans(&v, &cfg).unwrap();
            assert_eq!(brb.objective, 0.0);
            assert_eq!(as_set(&brb.centroids), as_set(&km.centroids));

            let real: Vec<_> = v.iter().map(realize).collect();
            let lr = lloyd_real(&real, &cfg).unwrap();
            assert_eq!(lr.objective, 0.0);
            let mut got: Vec<_> = lr.centroids.iter().map(|c| binarize(c, 0.5)).collect();
            got.sort();
            assert_eq!(got, as_set(&[x.clone(), y.clone()]));
            assert!(lr.centroids.contains(&realize(&x)));
        }
    }

    #[test]
    fn kmajority_not_better_than_brute_force_optimum() {
        let v = random_descs(6, 8, 7);
        let all: Vec<_> = (0..=255u8)
            .map(|b| BinaryDescriptor::from_bytes(vec![b]))
            .collect();
        let mut best = u32::MAX;
        for a in &all {
            for b in &all {
                let cost: u32 = v.iter().map(|d| d.distance(a).min(d.distance(b))).sum();
                best = best.min(cost);
            }
        }
        for seed in 0..20 {
            let res = kmajority(&v, &ClusterConfig::new(2, seed)).unwrap();
            assert!(res.objective >= best as f64);
        }
    }

    #[test]
    fn lloyd_k1_is_mean() {
        let mut r = rng(4);
        let pts: Vec<_> = (0..25)
            .map(|_| RealDescriptor::new((0..6).map(|_| r.gen()).collect()).unwrap())
            .collect();
        let res = lloyd_real(&pts, &ClusterConfig::new(1, 0)).unwrap();
        assert_eq!(res.centroids, vec![real_mean(&pts).unwrap()]);
    }

    #[test]
    fn objectives_are_monotone() {
        for seed in 0..5 {
            let v = random_descs(300, 32, 100 + seed);
            let km = kmajority(&v, &ClusterConfig::new(6, seed)).unwrap();
            assert!(km.objective_trace.windows(2).all(|w| w[1] <= w[0]));
            let mut r = rng(seed);
            let pts: Vec<_> = (0..300)
                .map(|_| RealDescriptor::new((0..8).map(|_| r.gen()).collect()).unwrap())
                .collect();
            let lr = lloyd_real(&pts, &ClusterConfig::new(6, seed)).unwrap();
            assert!(lr.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn results_have_no_empty_clusters_and_consistent_centroids() {
        for seed in 0..10 {
            let v = random_descs(40, 16, seed);
            let cfg = ClusterConfig::new(12, seed);
            for res in [kmajority(&v, &cfg).unwrap(), brb_kmeans(&v, &cfg).unwrap()] {
                let members = res.members();
                assert!(members.iter().all(|m| !m.is_empty()));
                let obj: u32 = v
                    .iter()
                    .zip(&res.assignments)
                    .map(|(d, &a)| d.distance(&res.centroids[a]))
                    .sum();
                assert_eq!(res.objective, obj as f64);
            }
            let km = kmajority(&v, &cfg).unwrap();
            for (c, m) in km.centroids.iter().zip(km.members()) {
                let group: Vec<_> = m.iter().map(|&i| v[i].clone()).collect();
                assert_eq!(*c, majority_centroid(&group).unwrap());
            }
        }
    }

    #[test]
    fn repair_moves_farthest_member_of_largest() {
        let mut assigned = vec![(0, 1.0), (0, 3.0), (0, 3.0), (2, 0.5)];
        let moves = repair_empty(&mut assigned, 3);
        assert_eq!(moves, vec![(1, 1)]);
        assert_eq!(assigned[1].0, 1);
    }

    #[test]
    fn realized_space_agrees_with_materialized_lloyd() {
        for seed in 0..4 {
            let v = random_descs(400, 64, 50 + seed);
            let cfg = ClusterConfig::new(5, seed);
            let refs: Vec<_> = v.iter().collect();
            let fast = realized_lloyd_refs(&refs, &cfg).unwrap();
            let real: Vec<_> = v.iter().map(realize).collect();
            let slow = lloyd_real(&real, &cfg).unwrap();
            assert_eq!(fast.assignments, slow.assignments);
            assert_eq!(fast.centroids, slow.centroids);
            assert!((fast.objective - slow.objective).abs() < 1e-9 * slow.objective);
        }
    }

    #[test]
    fn brb_beats_kmajority_on_average() {
        // Recorded, not asserted per corpus; the mean over all runs must not lose.
        let (mut brb, mut km) = (0.0, 0.0);
        for corpus in 0..20 {
            let v = random_descs(500, 32, 1000 + corpus);
            for seed in 0..5 {
                let cfg = ClusterConfig::new(8, seed);
                brb += brb_kmeans(&v, &cfg).unwrap().objective;
                km += kmajority(&v, &cfg).unwrap().objective;
            }
        }
        assert!(brb <= km, "brb {brb} vs kmajority {km}");
    }

    #[test]
    fn errors() {
        assert!(matches!(
            kmajority(&[], &ClusterConfig::new(1, 0)),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            lloyd_real(&[], &ClusterConfig::new(1, 0)),
            Err(Error::EmptyInput(_))
        ));
        let v = random_descs(3, 8, 0);
        assert!(matches!(
            kmajority(&v, &ClusterConfig::new(0, 0)),
            Err(Error::Config(_))
        ));
        let mixed = vec![BinaryDescriptor::zeros(8), BinaryDescriptor::zeros(16)];
        assert!(matches!(
            brb_kmeans(&mixed, &ClusterConfig::new(1, 0)),
            Err(Error::WidthMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn brb_k1_is_majority(bytes in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 4), 1..30)) {
            let v: Vec<_> = bytes.into_iter().map(BinaryDescriptor::from_bytes).collect();
            let res = brb_kmeans(&v, &ClusterConfig::new(1, 0)).unwrap();
            prop_assert_eq!(&res.centroids[0], &majority_centroid(&v).unwrap());
        }

        #[test]
        fn clustering_is_deterministic(seed in 0u64..1000) {
            let v = random_descs(60, 32, seed);
            let cfg = ClusterConfig::new(4, seed);
            prop_assert_eq!(kmajority(&v, &cfg).unwrap(), kmajority(&v, &cfg).unwrap());
            prop_assert_eq!(brb_kmeans(&v, &cfg).unwrap(), brb_kmeans(&v, &cfg).unwrap());
        }
    }
}
