//! Readers for the input matrices and writers for fits, metrics and plot data.
//!
//! Matrices are plain CSV with `0`, `1` and `NA`. Fits and simulation truths
//! are versioned JSON. Every other output is CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clustering::{Bucket, ClusterAssignment, ClusterLinkSummaries, NodeKind};
use crate::error::{Error, Result};
use crate::metrics::RankDiagnostics;
use crate::model::{AttributeMatrix, Intercepts, LatentPositions, SocialNetwork};
use crate::simulation::{Quantiles, ReplicationResult, SimulationReplicate, SimulationSpec};
use crate::vbem::FitResult;

/// Major version of the JSON files written by this build.
pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_VERSION: &str = "1.0";

/// Standard normal 90% point: the half-width of a central 80% interval.
pub const Z_80: f64 = 1.281_551_565_544_600_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocialFormat {
    DenseCsv,
    EdgeList,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_cell(path: &Path, line: usize, s: &str) -> Result<Option<u8>> {
    match s.trim() {
        "0" => Ok(Some(0)),
        "1" => Ok(Some(1)),
        "NA" | "na" | "" => Ok(None),
        other => Err(parse_err(path, line, format!("expected 0, 1 or NA, found {other:?}"))),
    }
}

fn is_cell(s: &str) -> bool {
    matches!(s.trim(), "0" | "1" | "NA" | "na" | "")
}

/// Non-empty lines with their 1-based line numbers, split on commas.
fn rows(text: &str) -> Vec<(usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| (k + 1, l.split(',').collect()))
        .collect()
}

pub fn read_social_network(path: impl AsRef<Path>, format: SocialFormat, directed: bool) -> Result<SocialNetwork> {
    let path = path.as_ref();
    let text = read_text(path)?;
    match format {
        SocialFormat::DenseCsv => parse_dense_social(&text, path, directed),
        SocialFormat::EdgeList => parse_edge_list(&text, path, directed),
    }
}

/// `N` rows of `N` cells, with an optional header row of names. Diagonal
/// cells are ignored.
pub fn parse_dense_social(text: &str, path: &Path, directed: bool) -> Result<SocialNetwork> {
    let mut lines = rows(text);
    if let Some((_, first)) = lines.first() {
        if !first.iter().all(|c| is_cell(c)) {
            lines.remove(0);
        }
    }
    let n = lines.len();
    if n == 0 {
        return Err(parse_err(path, 1, "no rows"));
    }
    let mut cells = Vec::with_capacity(n * n);
    for (i, (line, row)) in lines.iter().enumerate() {
        if row.len() != n {
            return Err(parse_err(path, *line, format!("expected {n} cells, found {}", row.len())));
        }
        for (j, c) in row.iter().enumerate() {
            let v = parse_cell(path, *line, c)?;
            cells.push(if i == j { None } else { v });
        }
    }
    SocialNetwork::from_cells(n, &cells, directed).map_err(|e| parse_err(path, lines[0].0, e.to_string()))
}

/// First line `nodes=N`, then one `i,j` pair per line with 1-based indices.
pub fn parse_edge_list(text: &str, path: &Path, directed: bool) -> Result<SocialNetwork> {
    let lines = rows(text);
    let Some((first_line, header)) = lines.first() else {
        return Err(parse_err(path, 1, "empty edge list"));
    };
    let n: usize = header
        .first()
        .and_then(|h| h.trim().strip_prefix("nodes="))
        .and_then(|v| v.trim().parse().ok())
        .filter(|_| header.len() == 1)
        .ok_or_else(|| parse_err(path, *first_line, "first line must be nodes=N"))?;
    let mut edges = Vec::new();
    for (line, row) in &lines[1..] {
        if row.len() != 2 {
            return Err(parse_err(path, *line, format!("expected i,j, found {} fields", row.len())));
        }
        let mut idx = [0usize; 2];
        for (k, field) in row.iter().enumerate() {
            let v: usize = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, *line, format!("bad node index {:?}", field.trim())))?;
            if v == 0 || v > n {
                return Err(parse_err(path, *line, format!("node {v} outside 1..={n}")));
            }
            idx[k] = v - 1;
        }
        if idx[0] == idx[1] {
            return Err(parse_err(path, *line, "self-loop"));
        }
        edges.push((idx[0], idx[1]));
    }
    SocialNetwork::from_edges(n, &edges, directed).map_err(|e| parse_err(path, *first_line, e.to_string()))
}

/// `N x M` cells under a header of attribute names.
pub fn read_attribute_matrix(path: impl AsRef<Path>) -> Result<AttributeMatrix> {
    let path = path.as_ref();
    parse_attribute_matrix(&read_text(path)?, path)
}

pub fn parse_attribute_matrix(text: &str, path: &Path) -> Result<AttributeMatrix> {
    let lines = rows(text);
    let Some((_, header)) = lines.first() else {
        return Err(parse_err(path, 1, "missing header"));
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let m = names.len();
    let mut cells = Vec::new();
    for (line, row) in &lines[1..] {
        if row.len() != m {
            return Err(parse_err(
                path,
                *line,
                format!("expected {m} cells to match the header, found {}", row.len()),
            ));
        }
        for c in row {
            cells.push(parse_cell(path, *line, c)?);
        }
    }
    let n = lines.len() - 1;
    if n == 0 {
        return Err(parse_err(path, 2, "no data rows"));
    }
    AttributeMatrix::from_cells(n, m, &cells)
        .and_then(|a| a.with_names(names))
        .map_err(|e| parse_err(path, 1, e.to_string()))
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn cell_text(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".into(),
    }
}

/// Dense CSV without a header; the diagonal is written as `0`.
pub fn write_social_network(yi: &SocialNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let n = yi.n_persons();
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| if i == j { "0".into() } else { cell_text(yi.get(i, j)) })
            .collect();
        w.write_record(&row).map_err(csv_err(path))?;
    }
    flush(w, path)
}

pub fn write_attribute_matrix(yia: &AttributeMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let m = yia.n_attributes();
    w.write_record((0..m).map(|a| yia.name(a))).map_err(csv_err(path))?;
    for i in 0..yia.n_persons() {
        w.write_record((0..m).map(|a| cell_text(yia.get(i, a))))
            .map_err(csv_err(path))?;
    }
    flush(w, path)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

fn check_version(found: &str) -> Result<()> {
    let major: Option<u32> = found.split('.').next().and_then(|m| m.parse().ok());
    if major != Some(SCHEMA_MAJOR) {
        return Err(Error::SchemaVersion {
            found: found.to_string(),
            supported: SCHEMA_MAJOR,
        });
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    #[derive(Deserialize)]
    struct Versioned {
        schema_version: String,
    }
    let text = read_text(path)?;
    let json_err = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    let v: Versioned = serde_json::from_str(&text).map_err(json_err)?;
    check_version(&v.schema_version)?;
    serde_json::from_str(&text).map_err(json_err)
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub schema_version: String,
    /// Attribute names from the input header, if any.
    #[serde(default)]
    pub attribute_names: Option<Vec<String>>,
    pub result: FitResult,
}

impl FitFile {
    pub fn new(result: FitResult, attribute_names: Option<Vec<String>>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            attribute_names,
            result,
        }
    }
}

pub fn write_fit(file: &FitFile, path: impl AsRef<Path>) -> Result<()> {
    write_json(file, path.as_ref())
}

/// Reads `fit.json`, rejecting files with an unknown major schema version.
pub fn read_fit(path: impl AsRef<Path>) -> Result<FitFile> {
    let path = path.as_ref();
    let file: FitFile = read_json(path)?;
    file.result.state.validate()?;
    Ok(file)
}

/// Generating truth of a simulated data set, stored as `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema_version: String,
    pub spec: SimulationSpec,
    pub replicate: usize,
    pub replicate_seed: u64,
    pub intercepts: Intercepts,
    pub persons: DMatrix<f64>,
    pub attributes: DMatrix<f64>,
}

impl TruthFile {
    pub fn positions(&self) -> Result<LatentPositions> {
        LatentPositions::new(self.persons.clone(), self.attributes.clone())
    }
}

/// Writes `truth.json`, `y_i.csv` and `y_ia.csv` for one replicate.
pub fn write_truth_dir(spec: &SimulationSpec, rep: &SimulationReplicate, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let truth = TruthFile {
        schema_version: SCHEMA_VERSION.into(),
        spec: spec.clone(),
        replicate: rep.index,
        replicate_seed: rep.replicate_seed,
        intercepts: Intercepts {
            alpha0: spec.alpha0,
            alpha1: spec.alpha1,
        },
        persons: rep.true_positions.persons.clone(),
        attributes: rep.true_positions.attributes.clone(),
    };
    write_json(&truth, &dir.join("truth.json"))?;
    write_social_network(&rep.sampled_yi, dir.join("y_i.csv"))?;
    write_attribute_matrix(&rep.sampled_yia, dir.join("y_ia.csv"))
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<TruthFile> {
    read_json(path.as_ref())
}

/// Two-column `metric,value` table.
pub fn write_metrics(rows: &[(String, f64)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "value"]).map_err(csv_err(path))?;
    for (name, v) in rows {
        w.write_record([name.as_str(), &format!("{v}")]).map_err(csv_err(path))?;
    }
    flush(w, path)
}

/// Column order of `replication.csv`.
pub const REPLICATION_COLUMNS: [&str; 27] = [
    "index",
    "replicate_seed",
    "aae_social_aplsm",
    "aae_social_lsm",
    "aae_attr_aplsm",
    "aae_attr_blsm",
    "alpha0_error",
    "alpha1_error",
    "ratio_person_q05",
    "ratio_person_q25",
    "ratio_person_q50",
    "ratio_person_q75",
    "ratio_person_q95",
    "ratio_attr_q05",
    "ratio_attr_q25",
    "ratio_attr_q50",
    "ratio_attr_q75",
    "ratio_attr_q95",
    "iterations_aplsm",
    "iterations_lsm",
    "iterations_blsm",
    "all_converged",
    "max_objective_drop",
    "alpha0",
    "alpha1",
    "status",
    "error",
];

fn quantile_fields(q: &Quantiles) -> [String; 5] {
    [q.q05, q.q25, q.q50, q.q75, q.q95].map(|v| format!("{v}"))
}

/// One row per replicate. Failed replicates keep their row with empty
/// metric cells, `status = failed` and the error message.
pub fn write_replication_csv(result: &ReplicationResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(REPLICATION_COLUMNS).map_err(csv_err(path))?;
    for row in &result.rows {
        let mut rec = vec![row.index.to_string(), row.replicate_seed.to_string()];
        match &row.metrics {
            Some(m) => {
                rec.extend(
                    [
                        m.aae_social_aplsm,
                        m.aae_social_lsm,
                        m.aae_attr_aplsm,
                        m.aae_attr_blsm,
                        m.alpha0_error,
                        m.alpha1_error,
                    ]
                    .map(|v| format!("{v}")),
                );
                rec.extend(quantile_fields(&m.distance_ratio_quantiles_person));
                rec.extend(quantile_fields(&m.distance_ratio_quantiles_attr));
                rec.extend([
                    m.iterations_aplsm.to_string(),
                    m.iterations_lsm.to_string(),
                    m.iterations_blsm.to_string(),
                    m.all_converged.to_string(),
                    format!("{}", m.max_objective_drop),
                ]);
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 21)),
        }
        rec.push(format!("{}", result.spec.alpha0));
        rec.push(format!("{}", result.spec.alpha1));
        rec.push(if row.metrics.is_some() { "ok" } else { "failed" }.into());
        rec.push(row.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    flush(w, path)
}

/// Long-format tables behind the replication plots: `aae.csv`,
/// `alpha_error.csv` and `distance_ratio.csv`. Returns the files written.
pub fn write_replication_plot_data(result: &ReplicationResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let aae = dir.join("aae.csv");
    let mut w = csv_writer(&aae)?;
    w.write_record(["replicate", "matrix", "model", "aae"]).map_err(csv_err(&aae))?;
    for row in &result.rows {
        if let Some(m) = &row.metrics {
            for (matrix, model, v) in [
                ("social", "aplsm", m.aae_social_aplsm),
                ("social", "lsm", m.aae_social_lsm),
                ("attributes", "aplsm", m.aae_attr_aplsm),
                ("attributes", "blsm", m.aae_attr_blsm),
            ] {
                w.write_record([row.index.to_string(), matrix.into(), model.into(), format!("{v}")])
                    .map_err(csv_err(&aae))?;
            }
        }
    }
    flush(w, &aae)?;

    let alpha = dir.join("alpha_error.csv");
    let mut w = csv_writer(&alpha)?;
    w.write_record(["replicate", "parameter", "truth", "error"]).map_err(csv_err(&alpha))?;
    for row in &result.rows {
        if let Some(m) = &row.metrics {
            for (name, truth, v) in [
                ("alpha0", result.spec.alpha0, m.alpha0_error),
                ("alpha1", result.spec.alpha1, m.alpha1_error),
            ] {
                w.write_record([row.index.to_string(), name.into(), format!("{truth}"), format!("{v}")])
                    .map_err(csv_err(&alpha))?;
            }
        }
    }
    flush(w, &alpha)?;

    let ratio = dir.join("distance_ratio.csv");
    let mut w = csv_writer(&ratio)?;
    w.write_record(["replicate", "side", "q05", "q25", "q50", "q75", "q95"])
        .map_err(csv_err(&ratio))?;
    for row in &result.rows {
        if let Some(m) = &row.metrics {
            for (side, q) in [
                ("persons", &m.distance_ratio_quantiles_person),
                ("attributes", &m.distance_ratio_quantiles_attr),
            ] {
                let mut rec = vec![row.index.to_string(), side.to_string()];
                rec.extend(quantile_fields(q));
                w.write_record(&rec).map_err(csv_err(&ratio))?;
            }
        }
    }
    flush(w, &ratio)?;
    Ok(vec![aae, alpha, ratio])
}

/// Posterior means with the half-widths of per-axis 80% intervals,
/// `z · √Λ̃_kk`, one row per person then per attribute.
pub fn write_positions(result: &FitResult, attribute_names: Option<&[String]>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let s = &result.state;
    let d = s.dim();
    let mut w = csv_writer(path)?;
    let mut header = vec!["kind".to_string(), "index".into(), "name".into()];
    header.extend((1..=d).map(|k| format!("dim{k}")));
    header.extend((1..=d).map(|k| format!("radius{k}")));
    w.write_record(&header).map_err(csv_err(path))?;
    let sides = [
        ("person", &s.mean_persons, &s.cov_persons),
        ("attribute", &s.mean_attributes, &s.cov_attributes),
    ];
    for (kind, means, cov) in sides {
        let radii: Vec<String> = (0..d).map(|k| format!("{}", Z_80 * cov[(k, k)].sqrt())).collect();
        for r in 0..means.nrows() {
            let name = match (kind, attribute_names) {
                ("attribute", Some(names)) => names.get(r).cloned().unwrap_or_default(),
                ("attribute", None) => format!("A{}", r + 1),
                _ => format!("P{}", r + 1),
            };
            let mut rec = vec![kind.to_string(), (r + 1).to_string(), name];
            rec.extend((0..d).map(|k| format!("{}", means[(r, k)])));
            rec.extend(radii.iter().cloned());
            w.write_record(&rec).map_err(csv_err(path))?;
        }
    }
    flush(w, path)
}

/// Rank pairs in long format; every row repeats the reference line of its
/// diagnostic.
pub fn write_rank_pairs(diag: &RankDiagnostics, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record([
        "diagnostic",
        "label",
        "x_rank",
        "y_rank",
        "spearman",
        "reference_intercept",
        "reference_slope",
    ])
    .map_err(csv_err(path))?;
    for (name, pairs) in [
        ("person_distance_vs_degree", &diag.persons),
        ("attribute_distance_vs_total", &diag.attributes),
        ("attribute_pair_distance_vs_correlation", &diag.attribute_pairs),
    ] {
        let Some(p) = pairs else { continue };
        for k in 0..p.labels.len() {
            w.write_record([
                name.to_string(),
                p.labels[k].clone(),
                format!("{}", p.x_ranks[k]),
                format!("{}", p.y_ranks[k]),
                p.spearman.map_or_else(|| "NA".into(), |s| format!("{s}")),
                format!("{}", p.reference_intercept),
                format!("{}", p.reference_slope),
            ])
            .map_err(csv_err(path))?;
        }
    }
    flush(w, path)
}

/// Objective value per iteration, starting with the initial state at 0.
pub fn write_trace(result: &FitResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "objective"]).map_err(csv_err(path))?;
    let values = std::iter::once(result.initial_objective).chain(result.objective_trace.iter().copied());
    for (k, v) in values.enumerate() {
        w.write_record([k.to_string(), format!("{v}")]).map_err(csv_err(path))?;
    }
    flush(w, path)
}

/// One row per clustered point: its kind, 1-based index, name and cluster
/// (1-based).
pub fn write_clusters(
    assignment: &ClusterAssignment,
    attribute_names: Option<&[String]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["kind", "index", "name", "cluster"]).map_err(csv_err(path))?;
    let mut seen = [0usize; 3];
    for (&label, &kind) in assignment.labels.iter().zip(&assignment.kinds) {
        let slot = kind as usize;
        seen[slot] += 1;
        let r = seen[slot];
        let (tag, name) = match kind {
            NodeKind::Person => ("person", format!("P{r}")),
            NodeKind::Attribute => (
                "attribute",
                attribute_names
                    .and_then(|n| n.get(r - 1).cloned())
                    .unwrap_or_else(|| format!("A{r}")),
            ),
            NodeKind::Point => ("point", format!("{r}")),
        };
        w.write_record([tag.to_string(), r.to_string(), name, (label + 1).to_string()])
            .map_err(csv_err(path))?;
    }
    flush(w, path)
}

/// Medians of the fitted link probabilities per cluster pair and per
/// (attribute, cluster); clusters are 1-based and empty buckets have `NA`.
pub fn write_cluster_summaries(
    summaries: &ClusterLinkSummaries,
    attribute_names: Option<&[String]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["kind", "first", "second", "count", "median"])
        .map_err(csv_err(path))?;
    let med = |b: &Bucket| b.median.map_or_else(|| "NA".to_string(), |m| format!("{m}"));
    for d in &summaries.dyads {
        w.write_record([
            "dyad".to_string(),
            (d.first + 1).to_string(),
            (d.second + 1).to_string(),
            d.bucket.probabilities.len().to_string(),
            med(&d.bucket),
        ])
        .map_err(csv_err(path))?;
    }
    for a in &summaries.attributes {
        let name = attribute_names
            .and_then(|n| n.get(a.attribute).cloned())
            .unwrap_or_else(|| format!("A{}", a.attribute + 1));
        w.write_record([
            "attribute".to_string(),
            name,
            (a.cluster + 1).to_string(),
            a.bucket.probabilities.len().to_string(),
            med(&a.bucket),
        ])
        .map_err(csv_err(path))?;
    }
    flush(w, path)
}
