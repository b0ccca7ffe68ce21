use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::gradients::compute;
use super::objective::objective;
use super::problem::{FitData, Geometry, Problem};
use super::updates::{attributes, covariances, intercepts, persons};
use super::{FitFlags, FitOptions, FitResult, ModelKind, VariationalState};
use crate::error::{Error, Result};
use crate::model::{logistic, logit, sq_dist, AttributeMatrix, Intercepts, LatentConfig, SocialNetwork};

const INITIAL_COVARIANCE: f64 = 0.1;
const INTERCEPT_BOUND: f64 = 5.0;
const MAX_HALVINGS: usize = 5;

/// Starting state: means drawn from `N(0, init_scale²)` with the seeded
/// generator, both covariances `0.1·I`, intercepts at the logit of the
/// observed densities clamped to ±5.
pub fn initial_state(data: &FitData, config: &LatentConfig, options: &FitOptions) -> Result<VariationalState> {
    config.validate()?;
    options.validate()?;
    let (n, m, d) = (data.n_persons(), data.n_attributes(), config.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let normal = Normal::new(0.0, options.init_scale).map_err(|e| Error::config(e.to_string()))?;
    let persons: Vec<f64> = (0..n * d).map(|_| normal.sample(&mut rng)).collect();
    let attributes: Vec<f64> = (0..m * d).map(|_| normal.sample(&mut rng)).collect();
    let start = |density: Option<f64>| {
        density.map_or(0.0, |p| logit(p).clamp(-INTERCEPT_BOUND, INTERCEPT_BOUND))
    };
    Ok(VariationalState {
        mean_persons: DMatrix::from_row_slice(n, d, &persons),
        mean_attributes: DMatrix::from_row_slice(m, d, &attributes),
        cov_persons: DMatrix::identity(d, d) * INITIAL_COVARIANCE,
        cov_attributes: DMatrix::identity(d, d) * INITIAL_COVARIANCE,
        intercepts: Intercepts {
            alpha0: start(data.social.map(SocialNetwork::density)),
            alpha1: start(data.attributes.map(AttributeMatrix::density)),
        },
    })
}

/// Joint fit of a social network and an attribute matrix.
pub fn fit_aplsm(
    yi: &SocialNetwork,
    yia: &AttributeMatrix,
    config: &LatentConfig,
    options: &FitOptions,
) -> Result<FitResult> {
    fit(&FitData::aplsm(yi, yia), config, options)
}

/// Fit of the social network alone.
pub fn fit_lsm(yi: &SocialNetwork, config: &LatentConfig, options: &FitOptions) -> Result<FitResult> {
    fit(&FitData::lsm(yi), config, options)
}

/// Fit of the person-attribute matrix alone.
pub fn fit_blsm(yia: &AttributeMatrix, config: &LatentConfig, options: &FitOptions) -> Result<FitResult> {
    fit(&FitData::blsm(yia), config, options)
}

pub fn fit(data: &FitData, config: &LatentConfig, options: &FitOptions) -> Result<FitResult> {
    let init = initial_state(data, config, options)?;
    fit_from_state(data, config, options, init)
}

/// Runs the VBEM loop from a given starting state.
///
/// Each iteration updates the intercepts, then both covariances, then all
/// means from the same state, and finally evaluates the objective. Every
/// block is a proposal: if it lowers the objective the step is halved up to
/// five times, and dropped if it still does.
pub fn fit_from_state(
    data: &FitData,
    config: &LatentConfig,
    options: &FitOptions,
    init: VariationalState,
) -> Result<FitResult> {
    config.validate()?;
    options.validate()?;
    let kind = data
        .kind()
        .ok_or_else(|| Error::config("nothing to fit"))?;
    let problem = Problem::new(data)?;
    if init.dim() != config.dim {
        return Err(Error::dims(format!(
            "initial state has dimension {}, config {}",
            init.dim(),
            config.dim
        )));
    }
    problem.check_state(&init)?;

    let mut state = init;
    let mut obj = objective(&problem, &state, config)?;
    let initial_objective = obj;
    let mut flags = FitFlags::default();
    let mut trace = Vec::new();
    let mut converged = false;
    let ctx = Ctx {
        problem: &problem,
        config,
    };

    for _ in 0..options.max_iterations {
        let previous = obj;

        let bundle = compute(&problem, &Geometry::new(&state)?);
        let upd = intercepts(&problem, &state, &bundle);
        flags.intercept_skips += upd.skipped;
        let mut proposal = state.clone();
        proposal.intercepts = upd.intercepts;
        (state, obj) = ctx.line_search(state, obj, proposal, &mut flags);

        let bundle = compute(&problem, &Geometry::new(&state)?);
        let (l0, l1, repairs) = covariances(&problem, &state, &bundle, config, options.ridge);
        flags.ridge_repairs += repairs;
        let mut proposal = state.clone();
        proposal.cov_persons = l0;
        proposal.cov_attributes = l1;
        (state, obj) = ctx.line_search(state, obj, proposal, &mut flags);

        let bundle = compute(&problem, &Geometry::new(&state)?);
        let pu = persons(&problem, &state, &bundle, config, options.ridge);
        let pv = attributes(&problem, &state, &bundle, config, options.ridge, options.attribute_update);
        flags.ridge_repairs += pu.ridge_repairs + pv.ridge_repairs;
        flags.gradient_fallbacks += pu.gradient_fallbacks + pv.gradient_fallbacks;
        let mut proposal = state.clone();
        proposal.mean_persons = pu.means;
        proposal.mean_attributes = pv.means;
        (state, obj) = ctx.line_search(state, obj, proposal, &mut flags);

        if !obj.is_finite() {
            return Err(Error::Numeric(format!("objective became {obj}")));
        }
        trace.push(obj);
        let delta = obj - previous;
        let ratio_test = previous != 0.0 && (obj / previous - 1.0).abs() <= 1.0 - options.convergence_ratio;
        if ratio_test || delta.abs() <= options.abs_tolerance {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        model_kind: kind,
        config: *config,
        options: *options,
        state,
        initial_objective,
        iterations_run: trace.len(),
        objective_trace: trace,
        converged,
        flags,
    })
}

struct Ctx<'a> {
    problem: &'a Problem,
    config: &'a LatentConfig,
}

impl Ctx<'_> {
    fn line_search(
        &self,
        base: VariationalState,
        base_obj: f64,
        proposal: VariationalState,
        flags: &mut FitFlags,
    ) -> (VariationalState, f64) {
        let tol = 1e-10 * base_obj.abs().max(1.0);
        let mut t = 1.0;
        for k in 0..=MAX_HALVINGS {
            let cand = if k == 0 { proposal.clone() } else { blend(&base, &proposal, t) };
            if let Ok(value) = objective(self.problem, &cand, self.config) {
                if value >= base_obj - tol {
                    if k > 0 {
                        flags.damped_steps += 1;
                    }
                    return (cand, value);
                }
            }
            t *= 0.5;
        }
        flags.rejected_steps += 1;
        (base, base_obj)
    }
}

fn blend(a: &VariationalState, b: &VariationalState, t: f64) -> VariationalState {
    let mix = |x: &DMatrix<f64>, y: &DMatrix<f64>| x + (y - x) * t;
    VariationalState {
        mean_persons: mix(&a.mean_persons, &b.mean_persons),
        mean_attributes: mix(&a.mean_attributes, &b.mean_attributes),
        cov_persons: mix(&a.cov_persons, &b.cov_persons),
        cov_attributes: mix(&a.cov_attributes, &b.cov_attributes),
        intercepts: Intercepts {
            alpha0: a.intercepts.alpha0 + (b.intercepts.alpha0 - a.intercepts.alpha0) * t,
            alpha1: a.intercepts.alpha1 + (b.intercepts.alpha1 - a.intercepts.alpha1) * t,
        },
    }
}

/// Plug-in link probabilities at the posterior means.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkProbabilities {
    /// `σ(α̃₀ − ‖ũ_i − ũ_j‖²)`; the diagonal is `NaN`.
    pub social: Option<DMatrix<f64>>,
    /// `σ(α̃₁ − ‖ũ_i − ṽ_a‖²)`.
    pub attributes: Option<DMatrix<f64>>,
}

pub fn posterior_link_probabilities(result: &FitResult) -> LinkProbabilities {
    state_link_probabilities(&result.state, result.model_kind)
}

pub(crate) fn state_link_probabilities(state: &VariationalState, kind: ModelKind) -> LinkProbabilities {
    let n = state.n_persons();
    let u = crate::model::row_major(&state.mean_persons);
    let v = crate::model::row_major(&state.mean_attributes);
    let d = state.dim();
    let social = (kind != ModelKind::Blsm).then(|| {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                f64::NAN
            } else {
                logistic(state.intercepts.alpha0 - sq_dist(&u[i * d..(i + 1) * d], &u[j * d..(j + 1) * d]))
            }
        })
    });
    let attributes = (kind != ModelKind::Lsm).then(|| {
        DMatrix::from_fn(n, state.n_attributes(), |i, a| {
            logistic(state.intercepts.alpha1 - sq_dist(&u[i * d..(i + 1) * d], &v[a * d..(a + 1) * d]))
        })
    });
    LinkProbabilities { social, attributes }
}
