use nalgebra::{DMatrix, DVector};

use super::gradients::{compute, GradientBundle};
use super::problem::{FitData, Geometry, Problem};
use super::{AttributeUpdate, FitFlags, FitOptions, VariationalState};
use crate::error::Result;
use crate::linalg::{eigen_floor, symmetrize};
use crate::model::{Intercepts, LatentConfig};

/// Largest intercept change allowed in one M-step.
pub(crate) const MAX_ALPHA_STEP: f64 = 5.0;
const TINY_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanUpdate {
    pub means: DMatrix<f64>,
    /// Bracket matrices that needed the ridge before factoring.
    pub ridge_repairs: usize,
    /// Rows that fell back to a damped gradient step.
    pub gradient_fallbacks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptUpdate {
    pub intercepts: Intercepts,
    /// Intercepts left unchanged because `h` was too small.
    pub skipped: usize,
}

struct Prepared {
    problem: Problem,
    bundle: GradientBundle,
}

fn prepare(state: &VariationalState, data: &FitData) -> Result<Prepared> {
    let problem = Problem::new(data)?;
    problem.check_state(state)?;
    let g = Geometry::new(state)?;
    let bundle = compute(&problem, &g);
    Ok(Prepared { problem, bundle })
}

/// One Jacobi sweep of the person-mean update. Every row is computed from the
/// current state.
///
/// For person `i` the update is the Newton step
/// `ũ_i ← B⁻¹ [Σ_j (y_ij + y_ji) ũ_j + Σ_a y_ia ṽ_a − ½G_I − ½G_IA + ½(H_I + H_IA) ũ_i]`
/// with `B = (1/(2λ₀²) + Σ_j (y_ij + y_ji) + Σ_a y_ia) I + ½(H_I + H_IA)`.
pub fn ve_update_persons(state: &VariationalState, data: &FitData, config: &LatentConfig) -> Result<MeanUpdate> {
    let p = prepare(state, data)?;
    Ok(persons(&p.problem, state, &p.bundle, config, FitOptions::default().ridge))
}

/// One Jacobi sweep of the attribute-mean update in the requested form.
pub fn ve_update_attributes(
    state: &VariationalState,
    data: &FitData,
    config: &LatentConfig,
    rule: AttributeUpdate,
) -> Result<MeanUpdate> {
    let p = prepare(state, data)?;
    Ok(attributes(&p.problem, state, &p.bundle, config, FitOptions::default().ridge, rule))
}

/// Fixed-point covariance updates
/// `Λ̃₀ = (N/2)[(N/(2λ₀²) + 2Σ_{i≠j} y_ij + Σ y_ia) I + G_I(Λ̃₀) + G_IA(Λ̃₀)]⁻¹` and
/// `Λ̃₁ = (M/2)[(M/(2λ₁²) + Σ y_ia) I + G_IA(Λ̃₁)]⁻¹`, each symmetrized and
/// eigenvalue-floored at `ridge`.
pub fn ve_update_covariances(
    state: &VariationalState,
    data: &FitData,
    config: &LatentConfig,
    ridge: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = prepare(state, data)?;
    let (l0, l1, _) = covariances(&p.problem, state, &p.bundle, config, ridge);
    Ok((l0, l1))
}

/// Newton M-step `α ← (Σy − g + α h) / h` for both intercepts, with the step
/// clamped to ±5.
pub fn m_update_intercepts(state: &VariationalState, data: &FitData) -> Result<InterceptUpdate> {
    let p = prepare(state, data)?;
    Ok(intercepts(&p.problem, state, &p.bundle))
}

fn solve_row(
    bracket: DMatrix<f64>,
    rhs: DVector<f64>,
    current: &[f64],
    scalar: f64,
    ridge: f64,
    flags: &mut FitFlags,
) -> Vec<f64> {
    let b = symmetrize(&bracket);
    if let Some(ch) = b.clone().cholesky() {
        return ch.solve(&rhs).iter().copied().collect();
    }
    flags.ridge_repairs += 1;
    let d = current.len();
    let repaired = &b + DMatrix::<f64>::identity(d, d) * ridge.max(f64::EPSILON);
    if let Some(ch) = repaired.cholesky() {
        return ch.solve(&rhs).iter().copied().collect();
    }
    // Damped gradient step: rhs − Bx is half the bound's gradient at x.
    flags.gradient_fallbacks += 1;
    let x = DVector::from_column_slice(current);
    let step = (&rhs - &b * &x) / scalar;
    (x + step).iter().copied().collect()
}

pub(crate) fn persons(
    problem: &Problem,
    state: &VariationalState,
    bundle: &GradientBundle,
    config: &LatentConfig,
    ridge: f64,
) -> MeanUpdate {
    let (n, d) = (problem.n, state.dim());
    let u = &state.mean_persons;
    let v = &state.mean_attributes;
    let mut neighbours = DMatrix::<f64>::zeros(n, d);
    for p in problem.pairs.iter().filter(|p| p.y != 0.0) {
        for k in 0..d {
            neighbours[(p.i, k)] += p.y * u[(p.j, k)];
            neighbours[(p.j, k)] += p.y * u[(p.i, k)];
        }
    }
    for c in problem.cells.iter().filter(|c| c.y != 0.0) {
        for k in 0..d {
            neighbours[(c.i, k)] += c.y * v[(c.a, k)];
        }
    }
    let mut flags = FitFlags::default();
    let mut out = DMatrix::<f64>::zeros(n, d);
    for i in 0..n {
        let scalar =
            1.0 / (2.0 * config.prior_var_person) + problem.person_social_y[i] + problem.person_attr_y[i];
        let half_h = (&bundle.hess_social_persons[i] + &bundle.hess_attr_persons[i]) * 0.5;
        let bracket = DMatrix::<f64>::identity(d, d) * scalar + &half_h;
        let ui = u.row(i).transpose();
        let rhs = neighbours.row(i).transpose()
            - (bundle.social_persons.row(i).transpose() + bundle.attr_persons.row(i).transpose()) * 0.5
            + &half_h * &ui;
        let row = solve_row(bracket, rhs, ui.as_slice(), scalar, ridge, &mut flags);
        for k in 0..d {
            out[(i, k)] = row[k];
        }
    }
    MeanUpdate {
        means: out,
        ridge_repairs: flags.ridge_repairs,
        gradient_fallbacks: flags.gradient_fallbacks,
    }
}

pub(crate) fn attributes(
    problem: &Problem,
    state: &VariationalState,
    bundle: &GradientBundle,
    config: &LatentConfig,
    ridge: f64,
    rule: AttributeUpdate,
) -> MeanUpdate {
    let (m, d) = (problem.m, state.dim());
    let u = &state.mean_persons;
    let v = &state.mean_attributes;
    let mut responders = DMatrix::<f64>::zeros(m, d);
    for c in problem.cells.iter().filter(|c| c.y != 0.0) {
        for k in 0..d {
            responders[(c.a, k)] += c.y * u[(c.i, k)];
        }
    }
    let mut flags = FitFlags::default();
    let mut out = DMatrix::<f64>::zeros(m, d);
    for a in 0..m {
        let scalar = 1.0 / (2.0 * config.prior_var_attribute) + problem.attr_col_y[a];
        let half_h = &bundle.hess_attr_attributes[a] * 0.5;
        let va = v.row(a).transpose();
        let base = responders.row(a).transpose() - bundle.attr_attributes.row(a).transpose() * 0.5;
        let eye = DMatrix::<f64>::identity(d, d) * scalar;
        let (bracket, rhs) = match rule {
            AttributeUpdate::Newton => (eye + &half_h, base + &half_h * &va),
            AttributeUpdate::AsPrinted => (eye - &half_h, base),
        };
        let row = solve_row(bracket, rhs, va.as_slice(), scalar, ridge, &mut flags);
        for k in 0..d {
            out[(a, k)] = row[k];
        }
    }
    MeanUpdate {
        means: out,
        ridge_repairs: flags.ridge_repairs,
        gradient_fallbacks: flags.gradient_fallbacks,
    }
}

/// Returns the new covariances and the number of brackets whose spectrum had
/// to be floored before inversion.
pub(crate) fn covariances(
    problem: &Problem,
    state: &VariationalState,
    bundle: &GradientBundle,
    config: &LatentConfig,
    ridge: f64,
) -> (DMatrix<f64>, DMatrix<f64>, usize) {
    let d = state.dim();
    let eye = DMatrix::<f64>::identity(d, d);
    let mut repairs = 0;
    let mut invert = |count: usize, bracket: DMatrix<f64>| -> DMatrix<f64> {
        let eig = symmetrize(&bracket).symmetric_eigen();
        let floor = ridge.max(1e-12);
        if eig.eigenvalues.iter().any(|&l| l < floor) {
            repairs += 1;
        }
        let inv = eig.eigenvalues.map(|l| 0.5 * count as f64 / l.max(floor));
        let out = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
        eigen_floor(&out, ridge)
    };

    let n = problem.n as f64;
    let l0 = invert(
        problem.n,
        &eye * (n / (2.0 * config.prior_var_person) + 2.0 * problem.social_y + problem.attr_y)
            + &bundle.social_cov_persons
            + &bundle.attr_cov_persons,
    );
    let l1 = if problem.m > 0 {
        let m = problem.m as f64;
        invert(
            problem.m,
            &eye * (m / (2.0 * config.prior_var_attribute) + problem.attr_y) + &bundle.attr_cov_attributes,
        )
    } else {
        state.cov_attributes.clone()
    };
    (l0, l1, repairs)
}

pub(crate) fn intercepts(problem: &Problem, state: &VariationalState, bundle: &GradientBundle) -> InterceptUpdate {
    let mut out = state.intercepts;
    let mut skipped = 0;
    let mut newton = |alpha: &mut f64, y: f64, g: f64, h: f64| {
        if h <= TINY_CURVATURE {
            skipped += 1;
            return;
        }
        let step = ((y - g) / h).clamp(-MAX_ALPHA_STEP, MAX_ALPHA_STEP);
        *alpha += step;
    };
    if problem.has_social && !problem.pairs.is_empty() {
        newton(&mut out.alpha0, problem.social_y, bundle.g_alpha0, bundle.h_alpha0);
    }
    if problem.has_attributes && !problem.cells.is_empty() {
        newton(&mut out.alpha1, problem.attr_y, bundle.g_alpha1, bundle.h_alpha1);
    }
    InterceptUpdate {
        intercepts: out,
        skipped,
    }
}
