use nalgebra::DMatrix;

use super::problem::{FitData, Geometry, Problem};
use super::VariationalState;
use crate::error::Result;
use crate::linalg::mat_vec;
use crate::model::logistic;

/// Exact first and second derivatives of `F_I` and `F_IA`.
///
/// With `S₀ = I + 4Λ̃₀`, `S₁ = I + 2Λ̃₀ + 2Λ̃₁` and `σ` the logistic of the
/// log-sum argument, a social pair `d = ũ_i − ũ_j` contributes
/// `−2σS₀⁻¹d` to the gradient at `ũ_i` and `−2σS₀⁻¹ + 4σ(1−σ)S₀⁻¹ddᵀS₀⁻¹`
/// to the Hessian, once per observed ordered cell. Attribute cells work the
/// same way with `S₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    /// `G_I(ũ_i)`, one row per person.
    pub social_persons: DMatrix<f64>,
    /// `G_IA(ũ_i)`, one row per person.
    pub attr_persons: DMatrix<f64>,
    /// `G_IA(ṽ_a)`, one row per attribute.
    pub attr_attributes: DMatrix<f64>,
    /// `H_I(ũ_i)` per person.
    pub hess_social_persons: Vec<DMatrix<f64>>,
    /// `H_IA(ũ_i)` per person.
    pub hess_attr_persons: Vec<DMatrix<f64>>,
    /// `H_IA(ṽ_a)` per attribute.
    pub hess_attr_attributes: Vec<DMatrix<f64>>,
    /// `G_I(Λ̃₀)`.
    pub social_cov_persons: DMatrix<f64>,
    /// `G_IA(Λ̃₀)`.
    pub attr_cov_persons: DMatrix<f64>,
    /// `G_IA(Λ̃₁)`; equal to `G_IA(Λ̃₀)` since both enter `S₁` the same way.
    pub attr_cov_attributes: DMatrix<f64>,
    /// `g_I(α̃₀)`.
    pub g_alpha0: f64,
    /// `h_I(α̃₀)`.
    pub h_alpha0: f64,
    /// `g_IA(α̃₁)`.
    pub g_alpha1: f64,
    /// `h_IA(α̃₁)`.
    pub h_alpha1: f64,
}

pub fn objective_gradients(state: &VariationalState, data: &FitData) -> Result<GradientBundle> {
    let problem = Problem::new(data)?;
    problem.check_state(state)?;
    let g = Geometry::new(state)?;
    Ok(compute(&problem, &g))
}

pub(crate) fn compute(problem: &Problem, g: &Geometry) -> GradientBundle {
    let (n, m, d) = (problem.n, problem.m, g.d);
    let dd = d * d;
    let mut gu_s = vec![0.0; n * d];
    let mut gu_a = vec![0.0; n * d];
    let mut gv = vec![0.0; m * d];
    // Hessians are accumulated as outer-product parts plus a scalar multiple of S⁻¹.
    let mut hu_s = vec![0.0; n * dd];
    let mut hu_s_scalar = vec![0.0; n];
    let mut hu_a = vec![0.0; n * dd];
    let mut hu_a_scalar = vec![0.0; n];
    let mut hv = vec![0.0; m * dd];
    let mut hv_scalar = vec![0.0; m];
    let mut outer0 = vec![0.0; dd];
    let mut outer1 = vec![0.0; dd];
    let (mut g0, mut h0, mut g1, mut h1) = (0.0, 0.0, 0.0, 0.0);

    let mut diff = vec![0.0; d];
    let mut pd = vec![0.0; d];

    for p in &problem.pairs {
        let (x, y) = (g.person(p.i), g.person(p.j));
        for k in 0..d {
            diff[k] = x[k] - y[k];
        }
        mat_vec(&g.p0, &diff, &mut pd);
        let q: f64 = diff.iter().zip(&pd).map(|(a, b)| a * b).sum();
        let s = logistic(g.logc0 - q);
        let ws = p.w * s;
        let curv = 4.0 * ws * (1.0 - s);
        g0 += ws;
        h0 += ws * (1.0 - s);
        for k in 0..d {
            gu_s[p.i * d + k] -= 2.0 * ws * pd[k];
            gu_s[p.j * d + k] += 2.0 * ws * pd[k];
        }
        hu_s_scalar[p.i] += ws;
        hu_s_scalar[p.j] += ws;
        for r in 0..d {
            for c in 0..d {
                let o = pd[r] * pd[c];
                hu_s[p.i * dd + r * d + c] += curv * o;
                hu_s[p.j * dd + r * d + c] += curv * o;
                outer0[r * d + c] += ws * o;
            }
        }
    }

    for c in &problem.cells {
        let (x, y) = (g.person(c.i), g.attribute(c.a));
        for k in 0..d {
            diff[k] = x[k] - y[k];
        }
        mat_vec(&g.p1, &diff, &mut pd);
        let q: f64 = diff.iter().zip(&pd).map(|(a, b)| a * b).sum();
        let s = logistic(g.logc1 - q);
        let curv = 4.0 * s * (1.0 - s);
        g1 += s;
        h1 += s * (1.0 - s);
        for k in 0..d {
            gu_a[c.i * d + k] -= 2.0 * s * pd[k];
            gv[c.a * d + k] += 2.0 * s * pd[k];
        }
        hu_a_scalar[c.i] += s;
        hv_scalar[c.a] += s;
        for r in 0..d {
            for col in 0..d {
                let o = pd[r] * pd[col];
                hu_a[c.i * dd + r * d + col] += curv * o;
                hv[c.a * dd + r * d + col] += curv * o;
                outer1[r * d + col] += s * o;
            }
        }
    }

    let hess = |raw: &[f64], scalar: &[f64], p: &DMatrix<f64>| -> Vec<DMatrix<f64>> {
        scalar
            .iter()
            .enumerate()
            .map(|(k, &sc)| DMatrix::from_row_slice(d, d, &raw[k * dd..(k + 1) * dd]) - p * (2.0 * sc))
            .collect()
    };
    let outer0 = DMatrix::from_row_slice(d, d, &outer0);
    let outer1 = DMatrix::from_row_slice(d, d, &outer1);
    let social_cov = outer0 * 4.0 - &g.p0_mat * (2.0 * g0);
    let attr_cov = outer1 * 2.0 - &g.p1_mat * g1;

    GradientBundle {
        social_persons: DMatrix::from_row_slice(n, d, &gu_s),
        attr_persons: DMatrix::from_row_slice(n, d, &gu_a),
        attr_attributes: DMatrix::from_row_slice(m, d, &gv),
        hess_social_persons: hess(&hu_s, &hu_s_scalar, &g.p0_mat),
        hess_attr_persons: hess(&hu_a, &hu_a_scalar, &g.p1_mat),
        hess_attr_attributes: hess(&hv, &hv_scalar, &g.p1_mat),
        social_cov_persons: social_cov,
        attr_cov_persons: attr_cov.clone(),
        attr_cov_attributes: attr_cov,
        g_alpha0: g0,
        h_alpha0: h0,
        g_alpha1: g1,
        h_alpha1: h1,
    }
}
