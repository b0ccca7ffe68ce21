//! Hartigan–Wong k-means over the stacked person and attribute means, and
//! summaries of fitted link probabilities by cluster.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::median;
use crate::model::{row_major, sq_dist};
use crate::simulation::replicate_rng;
use crate::vbem::{posterior_link_probabilities, FitResult};

/// Sweep cap per start; Hartigan–Wong stops far earlier on any realistic input.
const MAX_SWEEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub k: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl KMeansOptions {
    pub fn new(k: usize) -> Self {
        Self { k, n_starts: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Person,
    Attribute,
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster of each point, in `0..k`.
    pub labels: Vec<usize>,
    pub kinds: Vec<NodeKind>,
    pub k: usize,
    /// Within-cluster sum of squares.
    pub objective: f64,
    /// `1 − WSS/TSS`.
    pub variance_explained: f64,
    /// Index of the winning start.
    pub start: usize,
}

impl ClusterAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Labels of the points tagged `kind`, in input order.
    pub fn labels_of(&self, kind: NodeKind) -> Vec<usize> {
        self.labels
            .iter()
            .zip(&self.kinds)
            .filter(|(_, &k)| k == kind)
            .map(|(&l, _)| l)
            .collect()
    }
}

/// One Hartigan–Wong run: the final labels and the within-cluster sum of
/// squares after the initial assignment and after every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct HartiganWongRun {
    pub labels: Vec<usize>,
    pub objective: f64,
    pub trace: Vec<f64>,
}

/// Indices of the `k` distinct points that seed start `start`.
pub fn forgy_start(n_points: usize, k: usize, seed: u64, start: usize) -> Vec<usize> {
    let (_, mut rng) = replicate_rng(seed, start);
    sample(&mut rng, n_points, k).into_vec()
}

struct Points {
    x: Vec<f64>,
    n: usize,
    d: usize,
}

impl Points {
    fn new(points: &DMatrix<f64>) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        Ok(Self {
            x: row_major(points),
            n: points.nrows(),
            d: points.ncols(),
        })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

fn centroids(p: &Points, labels: &[usize], k: usize) -> (Vec<f64>, Vec<usize>) {
    let mut c = vec![0.0; k * p.d];
    let mut counts = vec![0usize; k];
    for i in 0..p.n {
        counts[labels[i]] += 1;
        for t in 0..p.d {
            c[labels[i] * p.d + t] += p.row(i)[t];
        }
    }
    for l in 0..k {
        if counts[l] > 0 {
            for t in 0..p.d {
                c[l * p.d + t] /= counts[l] as f64;
            }
        }
    }
    (c, counts)
}

fn wss(p: &Points, labels: &[usize], k: usize) -> f64 {
    let (c, _) = centroids(p, labels, k);
    (0..p.n)
        .map(|i| sq_dist(p.row(i), &c[labels[i] * p.d..(labels[i] + 1) * p.d]))
        .sum()
}

/// Within-cluster sum of squares of `labels`, recomputed from scratch.
pub fn within_cluster_ss(points: &DMatrix<f64>, labels: &[usize], k: usize) -> Result<f64> {
    let p = Points::new(points)?;
    check_labels(&p, labels, k)?;
    Ok(wss(&p, labels, k))
}

fn check_labels(p: &Points, labels: &[usize], k: usize) -> Result<()> {
    if labels.len() != p.n {
        return Err(Error::dims(format!("{} labels for {} points", labels.len(), p.n)));
    }
    if labels.iter().any(|&l| l >= k) {
        return Err(Error::invalid(format!("label out of range for k = {k}")));
    }
    Ok(())
}

fn nearest_two(x: &[f64], c: &[f64], k: usize, d: usize) -> (usize, usize) {
    let (mut b1, mut b2) = (0, usize::MAX);
    let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
    for l in 0..k {
        let dist = sq_dist(x, &c[l * d..(l + 1) * d]);
        if dist < d1 {
            (b2, d2) = (b1, d1);
            (b1, d1) = (l, dist);
        } else if dist < d2 {
            (b2, d2) = (l, dist);
        }
    }
    (b1, if b2 == usize::MAX { b1 } else { b2 })
}

/// A transfer must beat rounding noise, so near-ties never ping-pong.
fn improves(cost: f64, gain: f64) -> bool {
    cost < gain - 1e-12 * gain.abs()
}

/// Running state of one Hartigan–Wong descent.
struct Hw<'a> {
    p: &'a Points,
    k: usize,
    labels: Vec<usize>,
    second: Vec<usize>,
    c: Vec<f64>,
    counts: Vec<usize>,
}

impl Hw<'_> {
    fn center(&self, l: usize) -> &[f64] {
        &self.c[l * self.p.d..(l + 1) * self.p.d]
    }

    /// Cost of removing point `i` from its own cluster.
    fn removal_gain(&self, i: usize) -> f64 {
        let l = self.labels[i];
        let n = self.counts[l] as f64;
        n / (n - 1.0) * sq_dist(self.p.row(i), self.center(l))
    }

    fn addition_cost(&self, i: usize, l: usize) -> f64 {
        let n = self.counts[l] as f64;
        n / (n + 1.0) * sq_dist(self.p.row(i), self.center(l))
    }

    fn transfer(&mut self, i: usize, to: usize) {
        let from = self.labels[i];
        let d = self.p.d;
        let (nf, nt) = (self.counts[from] as f64, self.counts[to] as f64);
        for t in 0..d {
            let x = self.p.row(i)[t];
            self.c[from * d + t] = (self.c[from * d + t] * nf - x) / (nf - 1.0);
            self.c[to * d + t] = (self.c[to * d + t] * nt + x) / (nt + 1.0);
        }
        self.counts[from] -= 1;
        self.counts[to] += 1;
        self.second[i] = from;
        self.labels[i] = to;
    }

    /// Optimal-transfer stage: every point may move to whichever cluster
    /// lowers the total sum of squares most. Returns the number of moves.
    fn optimal_transfer(&mut self) -> usize {
        let mut moves = 0;
        for i in 0..self.p.n {
            let own = self.labels[i];
            if self.counts[own] == 1 {
                continue;
            }
            let gain = self.removal_gain(i);
            let (mut best, mut best_cost) = (usize::MAX, f64::INFINITY);
            for l in (0..self.k).filter(|&l| l != own) {
                let cost = self.addition_cost(i, l);
                if cost < best_cost {
                    (best, best_cost) = (l, cost);
                }
            }
            if best == usize::MAX {
                continue;
            }
            if improves(best_cost, gain) {
                self.transfer(i, best);
                moves += 1;
            } else {
                self.second[i] = best;
            }
        }
        moves
    }

    /// Quick-transfer stage: only swaps between each point's closest and
    /// second-closest cluster, repeated until a full pass makes no move.
    fn quick_transfer(&mut self) -> usize {
        let mut moves = 0;
        let mut quiet = 0;
        let mut i = 0;
        let mut steps = 0;
        while quiet < self.p.n && steps < MAX_SWEEPS * self.p.n {
            steps += 1;
            let own = self.labels[i];
            let alt = self.second[i];
            let mut moved = false;
            if alt != own && self.counts[own] > 1 && improves(self.addition_cost(i, alt), self.removal_gain(i)) {
                self.transfer(i, alt);
                moves += 1;
                moved = true;
            }
            quiet = if moved { 0 } else { quiet + 1 };
            i = (i + 1) % self.p.n;
        }
        moves
    }
}

/// Moves the farthest member of the largest cluster into each empty cluster.
fn repair_empty(p: &Points, labels: &mut [usize], k: usize) {
    loop {
        let (c, counts) = centroids(p, labels, k);
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        let largest = (0..k).max_by_key(|&l| (counts[l], std::cmp::Reverse(l))).unwrap();
        let far = (0..p.n)
            .filter(|&i| labels[i] == largest)
            .max_by(|&a, &b| {
                let da = sq_dist(p.row(a), &c[largest * p.d..(largest + 1) * p.d]);
                let db = sq_dist(p.row(b), &c[largest * p.d..(largest + 1) * p.d]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .unwrap();
        labels[far] = empty;
    }
}

/// Hartigan–Wong from the given initial centres (one row per cluster).
pub fn hartigan_wong(points: &DMatrix<f64>, initial_centers: &DMatrix<f64>) -> Result<HartiganWongRun> {
    let p = Points::new(points)?;
    let k = initial_centers.nrows();
    if k == 0 || k > p.n {
        return Err(Error::invalid(format!("k = {k} with {} points", p.n)));
    }
    if initial_centers.ncols() != p.d {
        return Err(Error::dims("centres and points differ in dimension"));
    }
    let c0 = row_major(initial_centers);
    let mut labels = Vec::with_capacity(p.n);
    let mut second = Vec::with_capacity(p.n);
    for i in 0..p.n {
        let (a, b) = nearest_two(p.row(i), &c0, k, p.d);
        labels.push(a);
        second.push(b);
    }
    repair_empty(&p, &mut labels, k);
    let (c, counts) = centroids(&p, &labels, k);
    let mut hw = Hw {
        p: &p,
        k,
        labels,
        second,
        c,
        counts,
    };
    let mut trace = vec![wss(&p, &hw.labels, k)];
    for _ in 0..MAX_SWEEPS {
        let moved = hw.optimal_transfer();
        trace.push(wss(&p, &hw.labels, k));
        if moved == 0 {
            break;
        }
        if k > 1 {
            hw.quick_transfer();
            trace.push(wss(&p, &hw.labels, k));
        }
    }
    let objective = *trace.last().unwrap();
    Ok(HartiganWongRun {
        labels: hw.labels,
        objective,
        trace,
    })
}

fn total_ss(p: &Points) -> f64 {
    let zeros = vec![0; p.n];
    wss(p, &zeros, 1)
}

/// `1 − WSS/TSS`; zero when every point coincides.
pub fn variance_explained(assignment: &ClusterAssignment, points: &DMatrix<f64>) -> Result<f64> {
    let p = Points::new(points)?;
    check_labels(&p, &assignment.labels, assignment.k)?;
    let tss = total_ss(&p);
    Ok(if tss > 0.0 {
        1.0 - wss(&p, &assignment.labels, assignment.k) / tss
    } else {
        0.0
    })
}

/// Best of `n_starts` Hartigan–Wong runs from Forgy starts. Ties in the
/// objective go to the lowest start index.
pub fn kmeans(points: &DMatrix<f64>, options: &KMeansOptions) -> Result<ClusterAssignment> {
    kmeans_tagged(points, vec![NodeKind::Point; points.nrows()], options)
}

fn kmeans_tagged(points: &DMatrix<f64>, kinds: Vec<NodeKind>, options: &KMeansOptions) -> Result<ClusterAssignment> {
    let p = Points::new(points)?;
    let k = options.k;
    if k == 0 || k > p.n {
        return Err(Error::invalid(format!("k = {k} with {} points", p.n)));
    }
    if options.n_starts == 0 {
        return Err(Error::config("n_starts must be at least 1"));
    }
    let runs: Vec<Result<HartiganWongRun>> = (0..options.n_starts)
        .into_par_iter()
        .map(|s| {
            let idx = forgy_start(p.n, k, options.seed, s);
            let centers = DMatrix::from_fn(k, p.d, |l, t| p.row(idx[l])[t]);
            hartigan_wong(points, &centers)
        })
        .collect();
    let mut best: Option<(usize, HartiganWongRun)> = None;
    for (s, run) in runs.into_iter().enumerate() {
        let run = run?;
        if best.as_ref().is_none_or(|(_, b)| run.objective < b.objective) {
            best = Some((s, run));
        }
    }
    let (start, run) = best.unwrap();
    let tss = total_ss(&p);
    let objective = wss(&p, &run.labels, k);
    Ok(ClusterAssignment {
        labels: run.labels,
        kinds,
        k,
        objective,
        variance_explained: if tss > 0.0 { 1.0 - objective / tss } else { 0.0 },
        start,
    })
}

/// Person means stacked above attribute means.
pub fn joint_points(result: &FitResult) -> DMatrix<f64> {
    let s = &result.state;
    let (n, m, d) = (s.n_persons(), s.n_attributes(), s.dim());
    DMatrix::from_fn(n + m, d, |r, t| {
        if r < n {
            s.mean_persons[(r, t)]
        } else {
            s.mean_attributes[(r - n, t)]
        }
    })
}

/// k-means on the persons and attributes of a fit together.
pub fn cluster_fit(result: &FitResult, options: &KMeansOptions) -> Result<ClusterAssignment> {
    let s = &result.state;
    let mut kinds = vec![NodeKind::Person; s.n_persons()];
    kinds.extend(std::iter::repeat_n(NodeKind::Attribute, s.n_attributes()));
    kmeans_tagged(&joint_points(result), kinds, options)
}

/// Fitted probabilities falling in one bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub probabilities: Vec<f64>,
    pub median: Option<f64>,
    pub empty: bool,
}

impl Bucket {
    fn new(probabilities: Vec<f64>) -> Self {
        Self {
            median: median(&probabilities),
            empty: probabilities.is_empty(),
            probabilities,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadBucket {
    /// Cluster pair with `first ≤ second`.
    pub first: usize,
    pub second: usize,
    pub bucket: Bucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeBucket {
    pub attribute: usize,
    pub cluster: usize,
    pub bucket: Bucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLinkSummaries {
    /// Friendship probabilities of person dyads `i < j`, by the clusters of
    /// the two persons.
    pub dyads: Vec<DyadBucket>,
    /// Attribute probabilities of the persons in each cluster.
    pub attributes: Vec<AttributeBucket>,
}

/// Posterior link probabilities grouped by the person clusters of `assignment`.
pub fn cluster_link_summaries(assignment: &ClusterAssignment, result: &FitResult) -> Result<ClusterLinkSummaries> {
    let n = result.state.n_persons();
    let person_labels = if assignment.kinds.iter().all(|&k| k == NodeKind::Point) {
        assignment.labels.iter().take(n).copied().collect::<Vec<_>>()
    } else {
        assignment.labels_of(NodeKind::Person)
    };
    if person_labels.len() != n {
        return Err(Error::dims(format!(
            "assignment covers {} persons, fit has {n}",
            person_labels.len()
        )));
    }
    let k = assignment.k;
    let probs = posterior_link_probabilities(result);

    let mut dyads = Vec::new();
    if let Some(ps) = &probs.social {
        let mut buckets = vec![Vec::new(); k * k];
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (person_labels[i].min(person_labels[j]), person_labels[i].max(person_labels[j]));
                buckets[a * k + b].push(ps[(i, j)]);
            }
        }
        for a in 0..k {
            for b in a..k {
                dyads.push(DyadBucket {
                    first: a,
                    second: b,
                    bucket: Bucket::new(std::mem::take(&mut buckets[a * k + b])),
                });
            }
        }
    }

    let mut attributes = Vec::new();
    if let Some(pa) = &probs.attributes {
        for a in 0..pa.ncols() {
            for c in 0..k {
                let values = (0..n).filter(|&i| person_labels[i] == c).map(|i| pa[(i, a)]).collect();
                attributes.push(AttributeBucket {
                    attribute: a,
                    cluster: c,
                    bucket: Bucket::new(values),
                });
            }
        }
    }
    Ok(ClusterLinkSummaries { dyads, attributes })
}

/// Adjusted Rand index of two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(format!("{} and {} labels", a.len(), b.len())));
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let choose2 = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().map(|&n| choose2(n)).sum();
    let rows: f64 = (0..ka).map(|x| choose2(table[x * kb..(x + 1) * kb].iter().sum())).sum();
    let cols: f64 = (0..kb).map(|y| choose2((0..ka).map(|x| table[x * kb + y]).sum())).sum();
    let total = choose2(a.len() as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(per: usize, sep: f64, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nrm = Normal::new(0.0, 0.3).unwrap();
        let mut truth = Vec::new();
        let pts = DMatrix::from_fn(2 * per, 2, |r, _| {
            let c = if r < per { 0.0 } else { sep };
            c + nrm.sample(&mut rng)
        });
        for r in 0..2 * per {
            truth.push(usize::from(r >= per));
        }
        (pts, truth)
    }

    fn random_points(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nrm = Normal::new(0.0, 1.0).unwrap();
        DMatrix::from_fn(n, d, |_, _| nrm.sample(&mut rng))
    }

    /// Plain Lloyd iterations from the given centres.
    fn lloyd(points: &DMatrix<f64>, centers: &DMatrix<f64>) -> f64 {
        let (n, d, k) = (points.nrows(), points.ncols(), centers.nrows());
        let mut c = centers.clone();
        let mut labels = vec![usize::MAX; n];
        for _ in 0..1000 {
            let mut changed = false;
            for i in 0..n {
                let best = (0..k)
                    .min_by(|&a, &b| {
                        let da = (points.row(i) - c.row(a)).norm_squared();
                        let db = (points.row(i) - c.row(b)).norm_squared();
                        da.total_cmp(&db)
                    })
                    .unwrap();
                if labels[i] != best {
                    labels[i] = best;
                    changed = true;
                }
            }
            for l in 0..k {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == l).collect();
                if !members.is_empty() {
                    for t in 0..d {
                        c[(l, t)] = members.iter().map(|&i| points[(i, t)]).sum::<f64>() / members.len() as f64;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (0..n).map(|i| (points.row(i) - c.row(labels[i])).norm_squared()).sum()
    }

    #[test]
    fn planted_blobs_are_recovered() {
        let (pts, truth) = blobs(30, 6.0, 3);
        let a = kmeans(&pts, &KMeansOptions::new(2)).unwrap();
        assert_eq!(adjusted_rand_index(&a.labels, &truth).unwrap(), 1.0);
    }

    #[test]
    fn one_cluster_per_point() {
        let pts = random_points(7, 2, 1);
        let a = kmeans(&pts, &KMeansOptions::new(7)).unwrap();
        assert!(a.objective.abs() < 1e-12);
        assert_eq!(a.sizes(), vec![1; 7]);
        assert!((a.variance_explained - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_explains_nothing() {
        let pts = random_points(9, 3, 2);
        let a = kmeans(&pts, &KMeansOptions::new(1)).unwrap();
        assert_eq!(a.variance_explained, 0.0);
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let pts = random_points(3, 2, 2);
        assert!(kmeans(&pts, &KMeansOptions::new(4)).is_err());
    }

    #[test]
    fn duplicate_points_are_fine() {
        let pts = DMatrix::from_row_slice(4, 1, &[1.0, 1.0, 1.0, 5.0]);
        let a = kmeans(&pts, &KMeansOptions::new(3)).unwrap();
        assert_eq!(a.sizes().iter().filter(|&&s| s == 0).count(), 0);
        assert!(a.objective.abs() < 1e-12);
    }

    #[test]
    fn objective_matches_recomputation() {
        let pts = random_points(40, 2, 5);
        let a = kmeans(&pts, &KMeansOptions::new(4)).unwrap();
        let direct = within_cluster_ss(&pts, &a.labels, 4).unwrap();
        assert!((a.objective - direct).abs() < 1e-10);
        let ve = variance_explained(&a, &pts).unwrap();
        let mean = pts.row_mean();
        let tss: f64 = pts.row_iter().map(|r| (r - &mean).norm_squared()).sum();
        assert!((ve - (1.0 - direct / tss)).abs() < 1e-10);
    }

    #[test]
    fn sweeps_never_increase_objective() {
        for seed in 0..10 {
            let pts = random_points(50, 2, seed);
            let idx = forgy_start(50, 5, seed, 0);
            let centers = DMatrix::from_fn(5, 2, |l, t| pts[(idx[l], t)]);
            let run = hartigan_wong(&pts, &centers).unwrap();
            for w in run.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", run.trace);
            }
        }
    }

    #[test]
    fn no_worse_than_lloyd_from_the_same_starts() {
        for seed in 0..20 {
            let pts = random_points(60, 2, 100 + seed);
            let opts = KMeansOptions { k: 4, n_starts: 100, seed };
            let hw = kmeans(&pts, &opts).unwrap();
            let best_lloyd = (0..opts.n_starts)
                .map(|s| {
                    let idx = forgy_start(60, 4, seed, s);
                    lloyd(&pts, &DMatrix::from_fn(4, 2, |l, t| pts[(idx[l], t)]))
                })
                .fold(f64::INFINITY, f64::min);
            assert!(hw.objective <= best_lloyd + 1e-9, "{} > {}", hw.objective, best_lloyd);
        }
    }

    #[test]
    fn splitting_along_the_principal_axis_helps() {
        let pts = DMatrix::from_row_slice(6, 2, &[0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 3.0, 0.0, 3.1, 0.0, 3.0, 0.1]);
        let one = ClusterAssignment {
            labels: vec![0; 6],
            kinds: vec![NodeKind::Point; 6],
            k: 1,
            objective: 0.0,
            variance_explained: 0.0,
            start: 0,
        };
        let two = ClusterAssignment {
            labels: vec![0, 0, 0, 1, 1, 1],
            k: 2,
            ..one.clone()
        };
        assert!(variance_explained(&two, &pts).unwrap() > variance_explained(&one, &pts).unwrap());
    }

    #[test]
    fn ari_of_relabelled_partition_is_one() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1, 2], &[2, 2, 0, 0, 1]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() < 0.0);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let pts = random_points(30, 2, 9);
        let opts = KMeansOptions { k: 3, n_starts: 10, seed: 4 };
        assert_eq!(kmeans(&pts, &opts).unwrap(), kmeans(&pts, &opts).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn rigid_motion_keeps_objective(seed in 0u64..1000, angle in 0.0f64..6.28, shift in -5.0f64..5.0) {
            let pts = random_points(20, 2, seed);
            let (c, s) = (angle.cos(), angle.sin());
            let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            let moved = (&pts * rot).add_scalar(shift);
            let opts = KMeansOptions { k: 3, n_starts: 10, seed };
            let a = kmeans(&pts, &opts).unwrap();
            let b = kmeans(&moved, &opts).unwrap();
            prop_assert!((a.objective - b.objective).abs() < 1e-8 * a.objective.max(1.0));
            prop_assert!((adjusted_rand_index(&a.labels, &b.labels).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn permutation_relabels_points(seed in 0u64..1000) {
            let (pts, _) = blobs(8, 6.0, seed);
            let perm: Vec<usize> = (0..16).rev().collect();
            let permuted = DMatrix::from_fn(16, 2, |r, t| pts[(perm[r], t)]);
            let opts = KMeansOptions { k: 2, n_starts: 20, seed };
            let a = kmeans(&pts, &opts).unwrap();
            let b = kmeans(&permuted, &opts).unwrap();
            prop_assert!((a.objective - b.objective).abs() < 1e-9);
            let back: Vec<usize> = (0..16).map(|r| b.labels[perm.iter().position(|&p| p == r).unwrap()]).collect();
            prop_assert!((adjusted_rand_index(&a.labels, &back).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
