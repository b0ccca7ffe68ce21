//! Data containers, link functions and the exact joint likelihood.
//!
//! Both matrices store their entries densely as `f64`, with `NaN` marking a
//! missing cell. Every sum in the crate skips missing cells, and the diagonal
//! of the social network is never read.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary person-by-person adjacency matrix.
#[derive(Debug, Clone)]
pub struct SocialNetwork {
    n: usize,
    entries: Vec<f64>,
    directed: bool,
}

/// Missing cells compare equal to each other.
fn same_cells(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

impl PartialEq for SocialNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.directed == other.directed && same_cells(&self.entries, &other.entries)
    }
}

impl PartialEq for AttributeMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.m == other.m && self.names == other.names && same_cells(&self.entries, &other.entries)
    }
}

impl SocialNetwork {
    /// Builds a network from row-major cells. `None` marks a missing cell.
    ///
    /// Diagonal cells are accepted whatever they hold and then dropped. For an
    /// undirected network every observed pair must be stored symmetrically.
    pub fn from_cells(n: usize, cells: &[Option<u8>], directed: bool) -> Result<Self> {
        if cells.len() != n * n {
            return Err(Error::dims(format!(
                "social network with {n} persons needs {} cells, got {}",
                n * n,
                cells.len()
            )));
        }
        let mut entries = vec![f64::NAN; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                match cells[i * n + j] {
                    None => {}
                    Some(v @ (0 | 1)) => entries[i * n + j] = f64::from(v),
                    Some(v) => {
                        return Err(Error::invalid(format!(
                            "social network entry ({i}, {j}) = {v} is not binary"
                        )))
                    }
                }
            }
        }
        let net = Self {
            n,
            entries,
            directed,
        };
        if !directed {
            for i in 0..n {
                for j in (i + 1)..n {
                    let (a, b) = (net.entries[i * n + j], net.entries[j * n + i]);
                    let same = (a.is_nan() && b.is_nan()) || a == b;
                    if !same {
                        return Err(Error::invalid(format!(
                            "undirected network is asymmetric at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(net)
    }

    /// Builds a fully observed network from 0/1 rows.
    pub fn from_rows(rows: &[Vec<u8>], directed: bool) -> Result<Self> {
        let n = rows.len();
        let mut cells = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::dims(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            cells.extend(row.iter().map(|&v| Some(v)));
        }
        Self::from_cells(n, &cells, directed)
    }

    /// Builds an undirected network on `n` nodes from 0-based edge pairs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], directed: bool) -> Result<Self> {
        let mut cells = vec![Some(0u8); n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            cells[i * n + j] = Some(1);
            if !directed {
                cells[j * n + i] = Some(1);
            }
        }
        Self::from_cells(n, &cells, directed)
    }

    pub fn n_persons(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Observed value of the ordered pair `(i, j)`; always `None` on the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.entries[i * self.n + j];
        (!v.is_nan()).then_some(v)
    }

    /// Row-major entries with `NaN` for missing cells and on the diagonal.
    pub fn raw(&self) -> &[f64] {
        &self.entries
    }

    /// Number of observed ties touching `i` (out-ties plus in-ties for directed
    /// networks, plain degree for undirected ones).
    pub fn degree(&self, i: usize) -> f64 {
        let out: f64 = (0..self.n).filter_map(|j| self.get(i, j)).sum();
        if self.directed {
            out + (0..self.n).filter_map(|j| self.get(j, i)).sum::<f64>()
        } else {
            out
        }
    }

    /// Sum of `y_ij` over observed ordered pairs `i != j`.
    pub fn ordered_edge_sum(&self) -> f64 {
        self.entries.iter().filter(|v| !v.is_nan()).sum()
    }

    pub fn observed_ordered_pairs(&self) -> usize {
        self.entries.iter().filter(|v| !v.is_nan()).count()
    }

    /// Fraction of observed ordered pairs that are ties.
    pub fn density(&self) -> f64 {
        let obs = self.observed_ordered_pairs();
        if obs == 0 {
            0.0
        } else {
            self.ordered_edge_sum() / obs as f64
        }
    }

    /// Relabels persons so that new index `k` is old index `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut entries = vec![f64::NAN; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.entries[perm[i] * n + perm[j]];
            }
        }
        Self {
            n,
            entries,
            directed: self.directed,
        }
    }
}

/// Person-by-attribute incidence matrix.
///
/// Binary matrices come from [`AttributeMatrix::from_cells`]; count-valued
/// matrices (Poisson and zero-inflated Poisson simulations) from
/// [`AttributeMatrix::from_counts`]. Estimators accept only binary matrices.
#[derive(Debug, Clone)]
pub struct AttributeMatrix {
    n: usize,
    m: usize,
    entries: Vec<f64>,
    names: Option<Vec<String>>,
}

impl AttributeMatrix {
    pub fn from_cells(n: usize, m: usize, cells: &[Option<u8>]) -> Result<Self> {
        for (k, c) in cells.iter().enumerate() {
            if let Some(v) = c {
                if *v > 1 {
                    return Err(Error::invalid(format!(
                        "attribute entry ({}, {}) = {v} is not binary",
                        k / m.max(1),
                        k % m.max(1)
                    )));
                }
            }
        }
        Self::from_counts(
            n,
            m,
            &cells.iter().map(|c| c.map(u32::from)).collect::<Vec<_>>(),
        )
    }

    pub fn from_counts(n: usize, m: usize, cells: &[Option<u32>]) -> Result<Self> {
        if cells.len() != n * m {
            return Err(Error::dims(format!(
                "attribute matrix {n}x{m} needs {} cells, got {}",
                n * m,
                cells.len()
            )));
        }
        let entries = cells
            .iter()
            .map(|c| c.map_or(f64::NAN, f64::from))
            .collect();
        Ok(Self {
            n,
            m,
            entries,
            names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::dims(format!(
                    "row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            cells.extend(row.iter().map(|&v| Some(v)));
        }
        Self::from_cells(n, m, &cells)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.m {
            return Err(Error::dims(format!(
                "{} attribute names for {} columns",
                names.len(),
                self.m
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn n_persons(&self) -> usize {
        self.n
    }

    pub fn n_attributes(&self) -> usize {
        self.m
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Name of column `a`, falling back to `A{a+1}`.
    pub fn name(&self, a: usize) -> String {
        self.names
            .as_ref()
            .map_or_else(|| format!("A{}", a + 1), |n| n[a].clone())
    }

    #[inline]
    pub fn get(&self, i: usize, a: usize) -> Option<f64> {
        let v = self.entries[i * self.m + a];
        (!v.is_nan()).then_some(v)
    }

    pub fn raw(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_binary(&self) -> bool {
        self.entries.iter().all(|v| v.is_nan() || *v == 0.0 || *v == 1.0)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().filter(|v| !v.is_nan()).sum()
    }

    pub fn observed(&self) -> usize {
        self.entries.iter().filter(|v| !v.is_nan()).count()
    }

    pub fn density(&self) -> f64 {
        let obs = self.observed();
        if obs == 0 {
            0.0
        } else {
            self.sum() / obs as f64
        }
    }

    /// Observed column total for attribute `a`.
    pub fn column_sum(&self, a: usize) -> f64 {
        (0..self.n).filter_map(|i| self.get(i, a)).sum()
    }

    pub fn permuted_persons(&self, perm: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for &p in perm {
            entries.extend_from_slice(&self.entries[p * self.m..(p + 1) * self.m]);
        }
        Self {
            n: self.n,
            m: self.m,
            entries,
            names: self.names.clone(),
        }
    }
}

/// Latent dimension and prior variances of the person and attribute positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentConfig {
    pub dim: usize,
    pub prior_var_person: f64,
    pub prior_var_attribute: f64,
}

impl LatentConfig {
    pub fn new(dim: usize, prior_var_person: f64, prior_var_attribute: f64) -> Result<Self> {
        let cfg = Self {
            dim,
            prior_var_person,
            prior_var_attribute,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_dim(dim: usize) -> Result<Self> {
        Self::new(dim, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("latent dimension must be at least 1"));
        }
        for (name, v) in [
            ("prior_var_person", self.prior_var_person),
            ("prior_var_attribute", self.prior_var_attribute),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for LatentConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            prior_var_person: 1.0,
            prior_var_attribute: 1.0,
        }
    }
}

/// Person positions `U` (N x D) and attribute positions `V` (M x D).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPositions {
    pub persons: DMatrix<f64>,
    pub attributes: DMatrix<f64>,
}

impl LatentPositions {
    pub fn new(persons: DMatrix<f64>, attributes: DMatrix<f64>) -> Result<Self> {
        if persons.ncols() != attributes.ncols() && attributes.nrows() > 0 {
            return Err(Error::dims(format!(
                "persons live in {} dimensions, attributes in {}",
                persons.ncols(),
                attributes.ncols()
            )));
        }
        if persons.iter().chain(attributes.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent positions must be finite"));
        }
        Ok(Self {
            persons,
            attributes,
        })
    }

    pub fn dim(&self) -> usize {
        self.persons.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intercepts {
    pub alpha0: f64,
    pub alpha1: f64,
}

/// Link family of a data matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFamily {
    BernoulliLogistic,
    PoissonLog,
    /// Zero-inflated Poisson: with probability `kappa(theta)` the cell is drawn
    /// from Poisson(`gamma(theta)`), otherwise it is a structural zero.
    ZeroInflatedPoisson,
}

/// Mean-function output of [`link_probability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkValue {
    Probability(f64),
    Rate(f64),
    ZeroInflated { kappa: f64, gamma: f64 },
}

/// Squared Euclidean distance between two points.
pub fn squared_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dims(format!(
            "points of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(sq_dist(x, y))
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Overflow-safe logistic function `exp(t) / (1 + exp(t))`.
#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn link_probability(theta: f64, family: LinkFamily) -> LinkValue {
    match family {
        LinkFamily::BernoulliLogistic => LinkValue::Probability(logistic(theta)),
        LinkFamily::PoissonLog => LinkValue::Rate(theta.exp()),
        LinkFamily::ZeroInflatedPoisson => LinkValue::ZeroInflated {
            kappa: logistic(theta),
            gamma: theta.exp(),
        },
    }
}

/// Bernoulli log-probability of `y` under logit `theta`.
#[inline]
pub fn bernoulli_log_term(y: f64, theta: f64) -> f64 {
    y * theta - softplus(theta)
}

/// Exact Bernoulli-logistic log-likelihood of both matrices at fixed positions.
///
/// Social terms run over observed ordered pairs `i != j`; attribute terms over
/// observed cells.
pub fn joint_log_likelihood(
    yi: &SocialNetwork,
    yia: &AttributeMatrix,
    pos: &LatentPositions,
    icpt: &Intercepts,
) -> Result<f64> {
    Ok(social_log_likelihood(yi, &pos.persons, icpt.alpha0)?
        + attribute_log_likelihood(yia, &pos.persons, &pos.attributes, icpt.alpha1)?)
}

pub fn social_log_likelihood(
    yi: &SocialNetwork,
    persons: &DMatrix<f64>,
    alpha0: f64,
) -> Result<f64> {
    let n = yi.n_persons();
    if persons.nrows() != n {
        return Err(Error::dims(format!(
            "{} person positions for {n} persons",
            persons.nrows()
        )));
    }
    let u = row_major(persons);
    let d = persons.ncols();
    let mut ll = 0.0;
    for i in 0..n {
        for j in 0..n {
            if let Some(y) = yi.get(i, j) {
                let theta = alpha0 - sq_dist(&u[i * d..(i + 1) * d], &u[j * d..(j + 1) * d]);
                ll += bernoulli_log_term(y, theta);
            }
        }
    }
    Ok(ll)
}

pub fn attribute_log_likelihood(
    yia: &AttributeMatrix,
    persons: &DMatrix<f64>,
    attributes: &DMatrix<f64>,
    alpha1: f64,
) -> Result<f64> {
    let (n, m) = (yia.n_persons(), yia.n_attributes());
    if persons.nrows() != n || attributes.nrows() != m {
        return Err(Error::dims(format!(
            "positions {}+{} for a {n}x{m} attribute matrix",
            persons.nrows(),
            attributes.nrows()
        )));
    }
    if persons.ncols() != attributes.ncols() {
        return Err(Error::dims("person and attribute dimensions differ"));
    }
    if !yia.is_binary() {
        return Err(Error::invalid(
            "non-binary attribute entry under the Bernoulli family",
        ));
    }
    let d = persons.ncols();
    let u = row_major(persons);
    let v = row_major(attributes);
    let mut ll = 0.0;
    for i in 0..n {
        for a in 0..m {
            if let Some(y) = yia.get(i, a) {
                let theta = alpha1 - sq_dist(&u[i * d..(i + 1) * d], &v[a * d..(a + 1) * d]);
                ll += bernoulli_log_term(y, theta);
            }
        }
    }
    Ok(ll)
}

/// Copies a matrix into a row-major buffer.
pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}
