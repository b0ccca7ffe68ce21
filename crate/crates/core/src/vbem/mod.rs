//! Variational Bayesian EM for the latent space models.
//!
//! The variational family is `q(u_i) = N(ũ_i, Λ̃₀)` and `q(v_a) = N(ṽ_a, Λ̃₁)`,
//! one covariance shared by all persons and one by all attributes. The
//! intercepts are point estimates updated in the M-step.
//!
//! Gradients and Hessians are the exact derivatives of the two log-sum
//! functions `F_I` and `F_IA`, so they can be checked against finite
//! differences. The update formulas are written in terms of these.

mod fit;
mod gradients;
mod objective;
mod problem;
mod updates;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Intercepts, LatentConfig};

pub use fit::{
    fit, fit_aplsm, fit_blsm, fit_from_state, fit_lsm, initial_state, posterior_link_probabilities,
    LinkProbabilities,
};
pub use gradients::{objective_gradients, GradientBundle};
pub use objective::{
    elbo_surrogate, expected_log_likelihood_bound, gaussian_expectation_exp_negdist,
    log_sum_terms, prior_terms,
};
pub use problem::FitData;
pub use updates::{
    m_update_intercepts, ve_update_attributes, ve_update_covariances, ve_update_persons,
    InterceptUpdate, MeanUpdate,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Social network only.
    Lsm,
    /// Person-attribute matrix only.
    Blsm,
    /// Both, sharing the person positions.
    Aplsm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lsm => "lsm",
            ModelKind::Blsm => "blsm",
            ModelKind::Aplsm => "aplsm",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lsm" => Ok(ModelKind::Lsm),
            "blsm" => Ok(ModelKind::Blsm),
            "aplsm" => Ok(ModelKind::Aplsm),
            other => Err(Error::config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Form of the attribute mean update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttributeUpdate {
    /// Newton step on the bound, the same form as the person update.
    #[default]
    Newton,
    /// `[(1/(2λ₁²) + Σ_i y_ia) I − ½H]⁻¹ [Σ_i y_ia ũ_i − ½G]`, literally.
    AsPrinted,
}

/// Variational parameters and intercepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub mean_persons: DMatrix<f64>,
    pub mean_attributes: DMatrix<f64>,
    pub cov_persons: DMatrix<f64>,
    pub cov_attributes: DMatrix<f64>,
    pub intercepts: Intercepts,
}

impl VariationalState {
    pub fn n_persons(&self) -> usize {
        self.mean_persons.nrows()
    }

    pub fn n_attributes(&self) -> usize {
        self.mean_attributes.nrows()
    }

    pub fn dim(&self) -> usize {
        self.mean_persons.ncols()
    }

    /// Checks shapes, finiteness and positive definiteness of both covariances.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.mean_attributes.ncols() != d && self.n_attributes() > 0 {
            return Err(Error::dims("person and attribute means differ in dimension"));
        }
        for (name, c) in [("cov_persons", &self.cov_persons), ("cov_attributes", &self.cov_attributes)] {
            if c.shape() != (d, d) {
                return Err(Error::dims(format!("{name} is {:?}, expected {d}x{d}", c.shape())));
            }
            crate::linalg::check_psd(c, name)?;
            if crate::linalg::min_eigenvalue(c) <= 0.0 {
                return Err(Error::NotPositiveSemidefinite(format!("{name} is singular")));
            }
        }
        let finite = self
            .mean_persons
            .iter()
            .chain(self.mean_attributes.iter())
            .all(|v| v.is_finite())
            && self.intercepts.alpha0.is_finite()
            && self.intercepts.alpha1.is_finite();
        if !finite {
            return Err(Error::Numeric("state has non-finite entries".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub convergence_ratio: f64,
    pub abs_tolerance: f64,
    pub ridge: f64,
    pub seed: u64,
    pub init_scale: f64,
    #[serde(default)]
    pub attribute_update: AttributeUpdate,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            convergence_ratio: 0.999_999,
            abs_tolerance: 1e-6,
            ridge: 1e-6,
            seed: 0,
            init_scale: 0.1,
            attribute_update: AttributeUpdate::default(),
        }
    }
}

impl FitOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if !(self.convergence_ratio > 0.0 && self.convergence_ratio < 1.0) {
            return Err(Error::config(format!(
                "convergence_ratio must lie in (0, 1), got {}",
                self.convergence_ratio
            )));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::config("ridge must be non-negative"));
        }
        if !(self.abs_tolerance >= 0.0) {
            return Err(Error::config("abs_tolerance must be non-negative"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config("init_scale must be non-negative"));
        }
        Ok(())
    }
}

/// Counts of the numerical safeguards that fired during a fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    /// Bracket matrices that needed the ridge before they could be factored.
    pub ridge_repairs: usize,
    /// Node updates that fell back to a damped gradient step.
    pub gradient_fallbacks: usize,
    /// Intercept updates skipped because the curvature was too small.
    pub intercept_skips: usize,
    /// Blocks whose step was shortened by backtracking.
    pub damped_steps: usize,
    /// Blocks whose step was rejected outright.
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model_kind: ModelKind,
    pub config: LatentConfig,
    pub options: FitOptions,
    pub state: VariationalState,
    pub initial_objective: f64,
    /// Objective after each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub flags: FitFlags,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }
}
