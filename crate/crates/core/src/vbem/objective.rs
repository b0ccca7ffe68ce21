use nalgebra::DMatrix;

use super::problem::{FitData, Geometry, Problem};
use super::VariationalState;
use crate::error::{Error, Result};
use crate::linalg::{check_psd, quad_form, spd_inverse_logdet};
use crate::model::{softplus, sq_dist, LatentConfig};

/// `E[exp(−‖X‖²)]` for `X ~ N(m, C/2)`, which equals
/// `det(I + C)^(−1/2) · exp(−mᵀ(I + C)⁻¹m)`.
///
/// `C` is `4Λ̃₀` for a person pair and `2Λ̃₀ + 2Λ̃₁` for a person-attribute
/// pair.
pub fn gaussian_expectation_exp_negdist(mean_diff: &[f64], cov_sum: &DMatrix<f64>) -> Result<f64> {
    let d = mean_diff.len();
    if cov_sum.shape() != (d, d) {
        return Err(Error::dims(format!(
            "mean difference of length {d} with a {:?} covariance",
            cov_sum.shape()
        )));
    }
    check_psd(cov_sum, "cov_sum")?;
    let s = DMatrix::<f64>::identity(d, d) + cov_sum;
    let (p, logdet) = spd_inverse_logdet(&s)?;
    let q = quad_form(&crate::linalg::flat(&p), mean_diff);
    Ok((-q - 0.5 * logdet).exp())
}

/// The prior and entropy part of the bound:
/// `−Σ KL[q(u_i) | p(u_i)] − Σ KL[q(v_a) | p(v_a)]`.
///
/// Attribute terms vanish when the state has no attributes.
pub fn prior_terms(state: &VariationalState, config: &LatentConfig) -> Result<f64> {
    let d = state.dim() as f64;
    let side = |count: usize, means: &DMatrix<f64>, cov: &DMatrix<f64>, lambda2: f64| -> Result<f64> {
        if count == 0 {
            return Ok(0.0);
        }
        let k = count as f64;
        let (_, logdet) = spd_inverse_logdet(cov)?;
        let sq: f64 = means.iter().map(|x| x * x).sum();
        Ok(-0.5 * (d * k * lambda2.ln() - k * logdet) - k * cov.trace() / (2.0 * lambda2)
            - sq / (2.0 * lambda2)
            + 0.5 * k * d)
    };
    Ok(side(
        state.n_persons(),
        &state.mean_persons,
        &state.cov_persons,
        config.prior_var_person,
    )? + side(
        state.n_attributes(),
        &state.mean_attributes,
        &state.cov_attributes,
        config.prior_var_attribute,
    )?)
}

/// The two log-sum functions `(F_I, F_IA)`: sums over observed cells of
/// `log(1 + exp(α̃) · E[exp(−‖x − y‖²)])`.
pub fn log_sum_terms(state: &VariationalState, data: &FitData) -> Result<(f64, f64)> {
    let problem = Problem::new(data)?;
    problem.check_state(state)?;
    let g = Geometry::new(state)?;
    Ok((f_social(&problem, &g), f_attr(&problem, &g)))
}

/// Jensen lower bound on `E_q[log p(Y | U, V)]`.
pub fn expected_log_likelihood_bound(state: &VariationalState, data: &FitData) -> Result<f64> {
    let problem = Problem::new(data)?;
    problem.check_state(state)?;
    let g = Geometry::new(state)?;
    Ok(data_terms(&problem, &g))
}

/// The bound maximized by the fitters: prior terms plus the Jensen bound on
/// the expected log-likelihood. Constants that do not depend on the state
/// are dropped.
pub fn elbo_surrogate(state: &VariationalState, data: &FitData, config: &LatentConfig) -> Result<f64> {
    let problem = Problem::new(data)?;
    problem.check_state(state)?;
    objective(&problem, state, config)
}

pub(crate) fn objective(problem: &Problem, state: &VariationalState, config: &LatentConfig) -> Result<f64> {
    let g = Geometry::new(state)?;
    let value = prior_terms(state, config)? + data_terms(problem, &g);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("objective evaluated to {value}")));
    }
    Ok(value)
}

fn data_terms(problem: &Problem, g: &Geometry) -> f64 {
    let mut total = 0.0;
    if problem.has_social {
        for p in &problem.pairs {
            if p.y != 0.0 {
                total += p.y * (g.alpha0 - 2.0 * g.tr0 - sq_dist(g.person(p.i), g.person(p.j)));
            }
        }
        total -= f_social(problem, g);
    }
    if problem.has_attributes {
        for c in &problem.cells {
            if c.y != 0.0 {
                total += c.y * (g.alpha1 - g.tr0 - g.tr1 - sq_dist(g.person(c.i), g.attribute(c.a)));
            }
        }
        total -= f_attr(problem, g);
    }
    total
}

pub(crate) fn f_social(problem: &Problem, g: &Geometry) -> f64 {
    let d = g.d;
    let mut diff = vec![0.0; d];
    let mut total = 0.0;
    for p in &problem.pairs {
        let (x, y) = (g.person(p.i), g.person(p.j));
        for k in 0..d {
            diff[k] = x[k] - y[k];
        }
        total += p.w * softplus(g.logc0 - quad_form(&g.p0, &diff));
    }
    total
}

pub(crate) fn f_attr(problem: &Problem, g: &Geometry) -> f64 {
    let d = g.d;
    let mut diff = vec![0.0; d];
    let mut total = 0.0;
    for c in &problem.cells {
        let (x, y) = (g.person(c.i), g.attribute(c.a));
        for k in 0..d {
            diff[k] = x[k] - y[k];
        }
        total += softplus(g.logc1 - quad_form(&g.p1, &diff));
    }
    total
}
