//! Recovery and agreement metrics: absolute error, ROC/AUC, rank
//! correlation, distance ratios, rank diagnostics and Procrustes alignment.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::sq_dist;
use crate::vbem::{FitData, FitResult};

/// Which cells of a matrix enter [`average_absolute_error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entries {
    All,
    /// Skip the diagonal of a square matrix.
    OffDiagonal,
}

/// Mean of `|est − truth|` over the selected cells.
pub fn average_absolute_error(est: &DMatrix<f64>, truth: &DMatrix<f64>, entries: Entries) -> Result<f64> {
    if est.shape() != truth.shape() {
        return Err(Error::dims(format!(
            "estimate is {:?}, truth is {:?}",
            est.shape(),
            truth.shape()
        )));
    }
    if entries == Entries::OffDiagonal && !est.is_square() {
        return Err(Error::dims("off-diagonal error needs a square matrix"));
    }
    let (r, c) = est.shape();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..r {
        for j in 0..c {
            if entries == Entries::OffDiagonal && i == j {
                continue;
            }
            let (a, b) = (est[(i, j)], truth[(i, j)]);
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::invalid(format!("non-finite probability at ({i}, {j})")));
            }
            total += (a - b).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("no cells to compare"));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Decreasing thresholds; the first is `+∞` (nothing predicted positive).
    pub thresholds: Vec<f64>,
    pub true_positive_rates: Vec<f64>,
    pub false_positive_rates: Vec<f64>,
    pub auc: f64,
}

/// ROC curve over the distinct score values, with the tie-corrected
/// Mann–Whitney AUC.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::dims(format!(
            "{} scores and {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("ROC needs both positive and negative labels"));
    }

    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, q) = (pos as f64, neg as f64);
    let auc = (rank_sum - p * (p + 1.0) / 2.0) / (p * q);

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut thresholds = vec![f64::INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = scores[order[k]];
        while k < order.len() && scores[order[k]] == t {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        thresholds.push(t);
        tpr.push(tp as f64 / p);
        fpr.push(fp as f64 / q);
    }
    Ok(RocCurve {
        thresholds,
        true_positive_rates: tpr,
        false_positive_rates: fpr,
        auc,
    })
}

impl RocCurve {
    /// Trapezoidal area under the stored curve.
    pub fn trapezoid_area(&self) -> f64 {
        let (x, y) = (&self.false_positive_rates, &self.true_positive_rates);
        (1..x.len()).map(|k| (x[k] - x[k - 1]) * (y[k] + y[k - 1]) / 2.0).sum()
    }
}

/// Ranks starting at 1, ties sharing the mean of their positions.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && x[order[end]] == x[order[k]] {
            end += 1;
        }
        let rank = (k + 1 + end) as f64 / 2.0;
        for &idx in &order[k..end] {
            ranks[idx] = rank;
        }
        k = end;
    }
    ranks
}

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dims(format!("lengths {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation of a constant sequence"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the midranks.
pub fn spearman_rank_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dims(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::invalid("rank correlation needs at least 3 pairs"));
    }
    pearson_correlation(&midranks(x), &midranks(y))
}

/// Ratios of estimated to true pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRatios {
    /// One ratio per unordered pair `i < j`, in row-major pair order.
    pub ratios: Vec<f64>,
    /// Pairs skipped because their true points coincide.
    pub skipped: usize,
}

/// Ratios of unsquared Euclidean distances `‖est_i − est_j‖ / ‖truth_i − truth_j‖`.
pub fn pairwise_distance_ratios(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<DistanceRatios> {
    if est.nrows() != truth.nrows() {
        return Err(Error::dims(format!(
            "{} estimated and {} true points",
            est.nrows(),
            truth.nrows()
        )));
    }
    let (e, t) = (crate::model::row_major(est), crate::model::row_major(truth));
    let (de, dt) = (est.ncols(), truth.ncols());
    let n = est.nrows();
    let mut ratios = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut skipped = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let true_dist = sq_dist(&t[i * dt..(i + 1) * dt], &t[j * dt..(j + 1) * dt]).sqrt();
            if true_dist == 0.0 {
                skipped += 1;
                continue;
            }
            let est_dist = sq_dist(&e[i * de..(i + 1) * de], &e[j * de..(j + 1) * de]).sqrt();
            ratios.push(est_dist / true_dist);
        }
    }
    Ok(DistanceRatios { ratios, skipped })
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Paired rank vectors with their Spearman correlation and the reference
/// line `rank_y = intercept + slope · rank_x` a plot would draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPairs {
    pub labels: Vec<String>,
    pub x_ranks: Vec<f64>,
    pub y_ranks: Vec<f64>,
    pub spearman: Option<f64>,
    pub reference_intercept: f64,
    pub reference_slope: f64,
}

impl RankPairs {
    fn new(labels: Vec<String>, x: &[f64], y: &[f64]) -> Self {
        let n = x.len() as f64;
        Self {
            labels,
            x_ranks: midranks(x),
            y_ranks: midranks(y),
            spearman: spearman_rank_correlation(x, y).ok(),
            reference_intercept: n,
            reference_slope: -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostics {
    /// Distance of each person to the centre against its number of ties.
    pub persons: Option<RankPairs>,
    /// Distance of each attribute to the centre against its column total.
    pub attributes: Option<RankPairs>,
    /// Distance between attribute positions against the correlation of the
    /// attribute columns, one entry per attribute pair.
    pub attribute_pairs: Option<RankPairs>,
    /// Centroid of all fitted positions.
    pub center: Vec<f64>,
}

/// Rank diagnostics of a fit. The centre is the centroid of every fitted
/// person and attribute mean.
pub fn rank_diagnostics(result: &FitResult, data: &FitData) -> Result<RankDiagnostics> {
    let state = &result.state;
    let d = state.dim();
    if state.n_persons() != data.n_persons() || state.n_attributes() != data.n_attributes() {
        return Err(Error::dims("fit and data disagree in size"));
    }
    let mut center = vec![0.0; d];
    let total = state.n_persons() + state.n_attributes();
    for row in state.mean_persons.row_iter().chain(state.mean_attributes.row_iter()) {
        for k in 0..d {
            center[k] += row[k] / total as f64;
        }
    }
    let dist_to_center = |m: &DMatrix<f64>| -> Vec<f64> {
        m.row_iter()
            .map(|r| (0..d).map(|k| (r[k] - center[k]).powi(2)).sum::<f64>().sqrt())
            .collect()
    };

    let persons = data.social.map(|yi| {
        let dist = dist_to_center(&state.mean_persons);
        let degree: Vec<f64> = (0..yi.n_persons()).map(|i| yi.degree(i)).collect();
        let labels = (1..=yi.n_persons()).map(|i| format!("P{i}")).collect();
        RankPairs::new(labels, &dist, &degree)
    });

    let (attributes, attribute_pairs) = match data.attributes {
        Some(yia) if yia.n_attributes() > 0 => {
            let m = yia.n_attributes();
            let dist = dist_to_center(&state.mean_attributes);
            let sums: Vec<f64> = (0..m).map(|a| yia.column_sum(a)).collect();
            let names: Vec<String> = (0..m).map(|a| yia.name(a)).collect();
            let single = RankPairs::new(names.clone(), &dist, &sums);

            let v = crate::model::row_major(&state.mean_attributes);
            let mut labels = Vec::new();
            let mut pair_dist = Vec::new();
            let mut pair_corr = Vec::new();
            for a in 0..m {
                for b in (a + 1)..m {
                    let (mut xa, mut xb) = (Vec::new(), Vec::new());
                    for i in 0..yia.n_persons() {
                        if let (Some(p), Some(q)) = (yia.get(i, a), yia.get(i, b)) {
                            xa.push(p);
                            xb.push(q);
                        }
                    }
                    if let Ok(r) = pearson_correlation(&xa, &xb) {
                        labels.push(format!("{}~{}", names[a], names[b]));
                        pair_dist.push(sq_dist(&v[a * d..(a + 1) * d], &v[b * d..(b + 1) * d]).sqrt());
                        pair_corr.push(r);
                    }
                }
            }
            let pairs = (!pair_dist.is_empty()).then(|| RankPairs::new(labels, &pair_dist, &pair_corr));
            (Some(single), pairs)
        }
        _ => (None, None),
    };

    Ok(RankDiagnostics {
        persons,
        attributes,
        attribute_pairs,
        center,
    })
}

/// Result of [`orthogonal_align`].
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Orthogonal `D x D` matrix applied on the right of the centred source.
    pub rotation: DMatrix<f64>,
    /// Source rotated and moved onto the target centroid.
    pub aligned: DMatrix<f64>,
    /// Frobenius norm of `aligned − target`.
    pub residual: f64,
}

fn centered(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (r, c) = m.shape();
    let means: Vec<f64> = (0..c).map(|k| m.column(k).sum() / r.max(1) as f64).collect();
    (DMatrix::from_fn(r, c, |i, k| m[(i, k)] - means[k]), means)
}

/// Orthogonal Procrustes: the rotation or reflection `Q` minimising
/// `‖(source − s̄) Q − (target − t̄)‖_F`. No scaling.
pub fn orthogonal_align(source: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<Alignment> {
    if source.shape() != target.shape() {
        return Err(Error::dims(format!(
            "source is {:?}, target is {:?}",
            source.shape(),
            target.shape()
        )));
    }
    let (xs, _) = centered(source);
    let (xt, t_mean) = centered(target);
    let svd = (xs.transpose() * &xt).svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numeric("SVD did not converge".into())),
    };
    let rotation = u * vt;
    let mut aligned = xs * &rotation;
    for mut row in aligned.row_iter_mut() {
        for (k, m) in t_mean.iter().enumerate() {
            row[k] += m;
        }
    }
    let residual = (&aligned - target).norm();
    Ok(Alignment {
        rotation,
        aligned,
        residual,
    })
}

/// Tucker congruence `Σab / √(Σa² Σb²)` of two coordinate matrices.
pub fn congruence_coefficient(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dims(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let ab = a.dot(b);
    let denom = (a.norm_squared() * b.norm_squared()).sqrt();
    if denom == 0.0 {
        return Err(Error::invalid("congruence of an all-zero configuration"));
    }
    Ok((ab / denom).clamp(-1.0, 1.0))
}
