//! Synthetic data from the generative model and the replication study that
//! compares the joint fit with the two single-matrix baselines.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{average_absolute_error, median, pairwise_distance_ratios, quantile, Entries};
use crate::model::{
    link_probability, logistic, sq_dist, AttributeMatrix, LatentConfig, LatentPositions, LinkFamily, LinkValue,
    SocialNetwork,
};
use crate::vbem::{fit_aplsm, fit_blsm, fit_lsm, posterior_link_probabilities, FitOptions, FitResult};

/// Settings of a replication study. Missing JSON fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSpec {
    pub n_persons: usize,
    pub n_attributes: usize,
    pub dim: usize,
    pub prior_var_person: f64,
    pub prior_var_attribute: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub link_family: LinkFamily,
    pub n_replications: usize,
    pub seed: u64,
    /// Sample every ordered pair independently instead of mirroring `i < j`.
    pub directed: bool,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            n_persons: 50,
            n_attributes: 50,
            dim: 2,
            prior_var_person: 1.0,
            prior_var_attribute: 1.0,
            alpha0: 2.0,
            alpha1: 1.5,
            link_family: LinkFamily::BernoulliLogistic,
            n_replications: 200,
            seed: 1,
            directed: false,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_persons == 0 || self.n_attributes == 0 || self.dim == 0 {
            return Err(Error::config("persons, attributes and dimension must be at least 1"));
        }
        if self.n_replications == 0 {
            return Err(Error::config("n_replications must be at least 1"));
        }
        for (name, v) in [
            ("prior_var_person", self.prior_var_person),
            ("prior_var_attribute", self.prior_var_attribute),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha0.is_finite() && self.alpha1.is_finite()) {
            return Err(Error::config("intercepts must be finite"));
        }
        Ok(())
    }

    pub fn latent_config(&self) -> LatentConfig {
        LatentConfig {
            dim: self.dim,
            prior_var_person: self.prior_var_person,
            prior_var_attribute: self.prior_var_attribute,
        }
    }
}

/// Independent generator for replicate `index`, derived from the study seed
/// so that replicates can run in any order.
pub fn replicate_rng(seed: u64, index: usize) -> (u64, ChaCha8Rng) {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z, ChaCha8Rng::seed_from_u64(z))
}

/// Rows of `U` from `N(0, λ₀² I)` then rows of `V` from `N(0, λ₁² I)`.
pub fn sample_latent_positions<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<LatentPositions> {
    spec.validate()?;
    let draw = |rng: &mut R, rows: usize, var: f64| {
        let normal = Normal::new(0.0, var.sqrt()).expect("validated variance");
        let data: Vec<f64> = (0..rows * spec.dim).map(|_| normal.sample(rng)).collect();
        DMatrix::from_row_slice(rows, spec.dim, &data)
    };
    let persons = draw(rng, spec.n_persons, spec.prior_var_person);
    let attributes = draw(rng, spec.n_attributes, spec.prior_var_attribute);
    LatentPositions::new(persons, attributes)
}

/// Draws one count or indicator from a link value.
pub fn sample_link_value<R: Rng + ?Sized>(value: LinkValue, rng: &mut R) -> u32 {
    let poisson = |rate: f64, rng: &mut R| -> u32 {
        if !(rate > 0.0) {
            return 0;
        }
        match Poisson::new(rate) {
            Ok(dist) => dist.sample(rng) as u32,
            Err(_) => u32::MAX,
        }
    };
    match value {
        LinkValue::Probability(p) => u32::from(rng.random::<f64>() < p),
        LinkValue::Rate(rate) => poisson(rate, rng),
        LinkValue::ZeroInflated { kappa, gamma } => {
            if rng.random::<f64>() < kappa {
                poisson(gamma, rng)
            } else {
                0
            }
        }
    }
}

/// One synthetic data set with its generating truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReplicate {
    pub index: usize,
    pub replicate_seed: u64,
    pub true_positions: LatentPositions,
    /// True tie probabilities; the diagonal is `NaN`.
    pub true_prob_social: DMatrix<f64>,
    /// True attribute probabilities for the Bernoulli family, expected counts
    /// (`κγ` for the zero-inflated family) otherwise.
    pub true_prob_attr: DMatrix<f64>,
    pub sampled_yi: SocialNetwork,
    pub sampled_yia: AttributeMatrix,
}

/// True tie probabilities (diagonal `NaN`) and attribute means at the given
/// positions under the spec's intercepts and attribute family.
pub fn true_probabilities(spec: &SimulationSpec, positions: &LatentPositions) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (positions.persons.nrows(), positions.attributes.nrows());
    let d = positions.dim();
    let u = crate::model::row_major(&positions.persons);
    let v = crate::model::row_major(&positions.attributes);
    let social = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            f64::NAN
        } else {
            logistic(spec.alpha0 - sq_dist(&u[i * d..(i + 1) * d], &u[j * d..(j + 1) * d]))
        }
    });
    let attr = DMatrix::from_fn(n, m, |i, a| {
        let theta = spec.alpha1 - sq_dist(&u[i * d..(i + 1) * d], &v[a * d..(a + 1) * d]);
        match link_probability(theta, spec.link_family) {
            LinkValue::Probability(p) => p,
            LinkValue::Rate(r) => r,
            LinkValue::ZeroInflated { kappa, gamma } => kappa * gamma,
        }
    });
    (social, attr)
}

/// Samples both matrices at the given positions. The social network always
/// uses the logistic link; the attribute matrix uses the spec's family.
pub fn sample_data<R: Rng + ?Sized>(
    spec: &SimulationSpec,
    positions: &LatentPositions,
    rng: &mut R,
) -> Result<(SocialNetwork, AttributeMatrix, DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = (positions.persons.nrows(), positions.attributes.nrows());
    let d = positions.dim();
    let u = crate::model::row_major(&positions.persons);
    let v = crate::model::row_major(&positions.attributes);
    let (prob_social, mean_attr) = true_probabilities(spec, positions);

    let mut cells = vec![Some(0u8); n * n];
    for i in 0..n {
        let start = if spec.directed { 0 } else { i + 1 };
        for j in start..n {
            if i == j {
                continue;
            }
            let y = u8::from(rng.random::<f64>() < prob_social[(i, j)]);
            cells[i * n + j] = Some(y);
            if !spec.directed {
                cells[j * n + i] = Some(y);
            }
        }
    }
    let yi = SocialNetwork::from_cells(n, &cells, spec.directed)?;

    let mut counts = Vec::with_capacity(n * m);
    for i in 0..n {
        for a in 0..m {
            let theta = spec.alpha1 - sq_dist(&u[i * d..(i + 1) * d], &v[a * d..(a + 1) * d]);
            counts.push(Some(sample_link_value(link_probability(theta, spec.link_family), rng)));
        }
    }
    let yia = AttributeMatrix::from_counts(n, m, &counts)?;
    Ok((yi, yia, prob_social, mean_attr))
}

pub fn generate_replicate(spec: &SimulationSpec, index: usize) -> Result<SimulationReplicate> {
    spec.validate()?;
    let (replicate_seed, mut rng) = replicate_rng(spec.seed, index);
    let positions = sample_latent_positions(spec, &mut rng)?;
    let (yi, yia, ps, pa) = sample_data(spec, &positions, &mut rng)?;
    Ok(SimulationReplicate {
        index,
        replicate_seed,
        true_positions: positions,
        true_prob_social: ps,
        true_prob_attr: pa,
        sampled_yi: yi,
        sampled_yia: yia,
    })
}

/// The 5%, 25%, 50%, 75% and 95% points of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Self {
            q05: quantile(values, 0.05)?,
            q25: quantile(values, 0.25)?,
            q50: median(values)?,
            q75: quantile(values, 0.75)?,
            q95: quantile(values, 0.95)?,
        })
    }
}

/// Metrics of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    pub aae_social_aplsm: f64,
    pub aae_social_lsm: f64,
    pub aae_attr_aplsm: f64,
    pub aae_attr_blsm: f64,
    /// `α̂₀ − α₀` from the joint fit.
    pub alpha0_error: f64,
    /// `α̂₁ − α₁` from the joint fit.
    pub alpha1_error: f64,
    pub distance_ratio_quantiles_person: Quantiles,
    pub distance_ratio_quantiles_attr: Quantiles,
    pub iterations_aplsm: usize,
    pub iterations_lsm: usize,
    pub iterations_blsm: usize,
    /// True when all three fits stopped on the convergence test.
    pub all_converged: bool,
    /// Largest single-iteration decrease of the objective over the three fits.
    pub max_objective_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub index: usize,
    pub replicate_seed: u64,
    /// `None` when a fit in this replicate failed.
    pub metrics: Option<ReplicateMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub spec: SimulationSpec,
    /// One row per replicate, ordered by index.
    pub rows: Vec<ReplicationRow>,
}

impl ReplicationResult {
    pub fn completed(&self) -> impl Iterator<Item = &ReplicateMetrics> {
        self.rows.iter().filter_map(|r| r.metrics.as_ref())
    }

    /// Collects one metric across the completed replicates.
    pub fn column(&self, f: impl Fn(&ReplicateMetrics) -> f64) -> Vec<f64> {
        self.completed().map(f).collect()
    }
}

fn max_drop(fit: &FitResult) -> f64 {
    let mut prev = fit.initial_objective;
    let mut worst: f64 = 0.0;
    for &v in &fit.objective_trace {
        worst = worst.max(prev - v);
        prev = v;
    }
    worst
}

/// Fits all three models to one replicate and scores them against the truth.
pub fn evaluate_replicate(
    spec: &SimulationSpec,
    rep: &SimulationReplicate,
    options: &FitOptions,
) -> Result<ReplicateMetrics> {
    let config = spec.latent_config();
    let opts = FitOptions {
        seed: rep.replicate_seed,
        ..*options
    };
    let joint = fit_aplsm(&rep.sampled_yi, &rep.sampled_yia, &config, &opts)?;
    let social = fit_lsm(&rep.sampled_yi, &config, &opts)?;
    let bipartite = fit_blsm(&rep.sampled_yia, &config, &opts)?;

    let pj = posterior_link_probabilities(&joint);
    let ps = posterior_link_probabilities(&social);
    let pb = posterior_link_probabilities(&bipartite);
    let expect = |m: Option<DMatrix<f64>>| m.ok_or_else(|| Error::Numeric("missing probabilities".into()));

    let ratios_u = pairwise_distance_ratios(&joint.state.mean_persons, &rep.true_positions.persons)?;
    let ratios_v = pairwise_distance_ratios(&joint.state.mean_attributes, &rep.true_positions.attributes)?;
    let no_ratios = || Error::invalid("no distance ratios");

    Ok(ReplicateMetrics {
        aae_social_aplsm: average_absolute_error(&expect(pj.social)?, &rep.true_prob_social, Entries::OffDiagonal)?,
        aae_social_lsm: average_absolute_error(&expect(ps.social)?, &rep.true_prob_social, Entries::OffDiagonal)?,
        aae_attr_aplsm: average_absolute_error(&expect(pj.attributes)?, &rep.true_prob_attr, Entries::All)?,
        aae_attr_blsm: average_absolute_error(&expect(pb.attributes)?, &rep.true_prob_attr, Entries::All)?,
        alpha0_error: joint.state.intercepts.alpha0 - spec.alpha0,
        alpha1_error: joint.state.intercepts.alpha1 - spec.alpha1,
        distance_ratio_quantiles_person: Quantiles::of(&ratios_u.ratios).ok_or_else(no_ratios)?,
        distance_ratio_quantiles_attr: Quantiles::of(&ratios_v.ratios).ok_or_else(no_ratios)?,
        iterations_aplsm: joint.iterations_run,
        iterations_lsm: social.iterations_run,
        iterations_blsm: bipartite.iterations_run,
        all_converged: joint.converged && social.converged && bipartite.converged,
        max_objective_drop: max_drop(&joint).max(max_drop(&social)).max(max_drop(&bipartite)),
    })
}

/// Runs every replicate of `spec` in parallel. A failed replicate becomes a
/// row without metrics rather than an error.
pub fn run_replication_study(spec: &SimulationSpec, options: &FitOptions) -> Result<ReplicationResult> {
    spec.validate()?;
    options.validate()?;
    if spec.link_family != LinkFamily::BernoulliLogistic {
        return Err(Error::config(
            "the replication study fits Bernoulli models only; use the bernoulli_logistic family",
        ));
    }
    let rows = (0..spec.n_replications)
        .into_par_iter()
        .map(|index| {
            let (replicate_seed, _) = replicate_rng(spec.seed, index);
            let outcome = generate_replicate(spec, index).and_then(|rep| evaluate_replicate(spec, &rep, options));
            match outcome {
                Ok(m) => ReplicationRow {
                    index,
                    replicate_seed,
                    metrics: Some(m),
                    error: None,
                },
                Err(e) => ReplicationRow {
                    index,
                    replicate_seed,
                    metrics: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ReplicationResult {
        spec: spec.clone(),
        rows,
    })
}
