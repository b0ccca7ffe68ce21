//! Summary statistics of a fitted data set and their comparison against a
//! table of reference values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_fit, cluster_link_summaries, KMeansOptions};
use crate::error::{Error, Result};
use crate::metrics::{congruence_coefficient, orthogonal_align, rank_diagnostics, roc_auc};
use crate::vbem::{posterior_link_probabilities, FitData, FitResult};

/// Absolute deviation above which a value is flagged for review.
pub const DEFAULT_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub observed: f64,
    pub reference: Option<f64>,
    pub deviation: Option<f64>,
    pub flagged: bool,
}

/// Reference values keyed by statistic name, as read from JSON.
pub type Reference = BTreeMap<String, f64>;

pub fn read_reference(path: impl AsRef<Path>) -> Result<Reference> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Pairs each observed statistic with its reference, if any, and flags
/// absolute deviations above `tolerance`. Reference entries with no observed
/// counterpart are listed with a `NaN` observation and flagged.
pub fn compare(observed: &[(String, f64)], reference: &Reference, tolerance: f64) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = observed
        .iter()
        .map(|(name, v)| {
            let r = reference.get(name).copied();
            let deviation = r.map(|r| (v - r).abs());
            ReportRow {
                name: name.clone(),
                observed: *v,
                reference: r,
                deviation,
                flagged: deviation.is_some_and(|d| !(d <= tolerance)),
            }
        })
        .collect();
    for (name, r) in reference {
        if !observed.iter().any(|(n, _)| n == name) {
            rows.push(ReportRow {
                name: name.clone(),
                observed: f64::NAN,
                reference: Some(*r),
                deviation: None,
                flagged: true,
            });
        }
    }
    rows
}

/// Statistics of a joint fit: variance explained and cluster medians for
/// each `k`; given the data, Spearman correlations of the rank diagnostics
/// and AUCs of the fitted probabilities; given a social-only baseline fit,
/// the congruence of the two person configurations after alignment.
pub fn fit_statistics(
    fit: &FitResult,
    data: Option<&FitData>,
    baseline: Option<&FitResult>,
    ks: &[usize],
    kmeans_seed: u64,
) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    if let Some(base) = baseline {
        let a = orthogonal_align(&base.state.mean_persons, &fit.state.mean_persons)?;
        out.push((
            "congruence_persons".into(),
            congruence_coefficient(&center(&a.aligned), &center(&fit.state.mean_persons))?,
        ));
    }
    if let Some(data) = data {
        data_statistics(fit, data, &mut out)?;
    }
    for &k in ks {
        let opts = KMeansOptions {
            k,
            n_starts: 100,
            seed: kmeans_seed,
        };
        let assignment = cluster_fit(fit, &opts)?;
        out.push((format!("variance_explained_k{k}"), assignment.variance_explained));
        let summaries = cluster_link_summaries(&assignment, fit)?;
        for b in &summaries.dyads {
            if let Some(m) = b.bucket.median {
                out.push((format!("median_friendship_k{k}_c{}_c{}", b.first + 1, b.second + 1), m));
            }
        }
    }
    Ok(out)
}

fn data_statistics(fit: &FitResult, data: &FitData, out: &mut Vec<(String, f64)>) -> Result<()> {
    let diag = rank_diagnostics(fit, data)?;
    for (name, pairs) in [
        ("spearman_person_distance_degree", &diag.persons),
        ("spearman_attribute_distance_total", &diag.attributes),
        ("spearman_attribute_pair_distance_correlation", &diag.attribute_pairs),
    ] {
        if let Some(s) = pairs.as_ref().and_then(|p| p.spearman) {
            out.push((name.into(), s));
        }
    }
    let probs = posterior_link_probabilities(fit);
    if let (Some(yi), Some(ps)) = (data.social, &probs.social) {
        let (mut scores, mut labels) = (Vec::new(), Vec::new());
        for i in 0..yi.n_persons() {
            for j in (i + 1)..yi.n_persons() {
                if let Some(y) = yi.get(i, j) {
                    scores.push(ps[(i, j)]);
                    labels.push(y > 0.0);
                }
            }
        }
        if let Ok(roc) = roc_auc(&scores, &labels) {
            out.push(("auc_social".into(), roc.auc));
        }
    }
    if let (Some(yia), Some(pa)) = (data.attributes, &probs.attributes) {
        let (mut scores, mut labels) = (Vec::new(), Vec::new());
        for i in 0..yia.n_persons() {
            for a in 0..yia.n_attributes() {
                if let Some(y) = yia.get(i, a) {
                    scores.push(pa[(i, a)]);
                    labels.push(y > 0.0);
                }
            }
        }
        if let Ok(roc) = roc_auc(&scores, &labels) {
            out.push(("auc_attributes".into(), roc.auc));
        }
    }
    Ok(())
}

fn center(m: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let mean = m.row_mean();
    let mut c = m.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c
}

pub fn write_report(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["name", "observed", "reference", "deviation", "flagged"])
        .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x}"));
    for r in rows {
        w.write_record([
            r.name.clone(),
            format!("{}", r.observed),
            opt(r.reference),
            opt(r.deviation),
            r.flagged.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
