use nalgebra::DMatrix;

use super::{ModelKind, VariationalState};
use crate::error::{Error, Result};
use crate::linalg::{flat, spd_inverse_logdet};
use crate::model::{AttributeMatrix, SocialNetwork};

/// The data a fit sees: a social network, an attribute matrix, or both.
#[derive(Debug, Clone, Copy)]
pub struct FitData<'a> {
    pub social: Option<&'a SocialNetwork>,
    pub attributes: Option<&'a AttributeMatrix>,
}

impl<'a> FitData<'a> {
    pub fn aplsm(social: &'a SocialNetwork, attributes: &'a AttributeMatrix) -> Self {
        Self {
            social: Some(social),
            attributes: Some(attributes),
        }
    }

    pub fn lsm(social: &'a SocialNetwork) -> Self {
        Self {
            social: Some(social),
            attributes: None,
        }
    }

    pub fn blsm(attributes: &'a AttributeMatrix) -> Self {
        Self {
            social: None,
            attributes: Some(attributes),
        }
    }

    pub fn kind(&self) -> Option<ModelKind> {
        match (self.social.is_some(), self.attributes.is_some()) {
            (true, true) => Some(ModelKind::Aplsm),
            (true, false) => Some(ModelKind::Lsm),
            (false, true) => Some(ModelKind::Blsm),
            (false, false) => None,
        }
    }

    pub fn n_persons(&self) -> usize {
        self.social
            .map(SocialNetwork::n_persons)
            .or(self.attributes.map(AttributeMatrix::n_persons))
            .unwrap_or(0)
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.map_or(0, AttributeMatrix::n_attributes)
    }
}

/// Unordered person pair with at least one observed ordered cell.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pair {
    pub i: usize,
    pub j: usize,
    /// Number of observed ordered cells, 1 or 2.
    pub w: f64,
    /// `y_ij + y_ji` over the observed cells.
    pub y: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub i: usize,
    pub a: usize,
    pub y: f64,
}

/// Flattened data shared by the objective, gradients and updates.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub n: usize,
    pub m: usize,
    pub has_social: bool,
    pub has_attributes: bool,
    pub pairs: Vec<Pair>,
    pub cells: Vec<Cell>,
    /// `Σ_{i≠j} y_ij` over observed ordered pairs.
    pub social_y: f64,
    /// `Σ y_ia` over observed cells.
    pub attr_y: f64,
    /// `Σ_j (y_ij + y_ji)` per person.
    pub person_social_y: Vec<f64>,
    /// `Σ_a y_ia` per person.
    pub person_attr_y: Vec<f64>,
    /// `Σ_i y_ia` per attribute.
    pub attr_col_y: Vec<f64>,
}

impl Problem {
    pub fn new(data: &FitData) -> Result<Self> {
        if data.kind().is_none() {
            return Err(Error::config("a fit needs a social network, an attribute matrix, or both"));
        }
        let n = data.n_persons();
        let m = data.n_attributes();
        if let (Some(s), Some(a)) = (data.social, data.attributes) {
            if s.n_persons() != a.n_persons() {
                return Err(Error::dims(format!(
                    "social network has {} persons, attribute matrix {}",
                    s.n_persons(),
                    a.n_persons()
                )));
            }
        }
        let mut pairs = Vec::new();
        let mut person_social_y = vec![0.0; n];
        let mut social_y = 0.0;
        if let Some(s) = data.social {
            for i in 0..n {
                for j in (i + 1)..n {
                    let (a, b) = (s.get(i, j), s.get(j, i));
                    let w = f64::from(u8::from(a.is_some()) + u8::from(b.is_some()));
                    if w == 0.0 {
                        continue;
                    }
                    let y = a.unwrap_or(0.0) + b.unwrap_or(0.0);
                    person_social_y[i] += y;
                    person_social_y[j] += y;
                    social_y += y;
                    pairs.push(Pair { i, j, w, y });
                }
            }
        }
        let mut cells = Vec::new();
        let mut person_attr_y = vec![0.0; n];
        let mut attr_col_y = vec![0.0; m];
        let mut attr_y = 0.0;
        if let Some(a) = data.attributes {
            if !a.is_binary() {
                return Err(Error::invalid(
                    "estimators accept only binary attribute matrices",
                ));
            }
            for i in 0..n {
                for k in 0..m {
                    if let Some(y) = a.get(i, k) {
                        cells.push(Cell { i, a: k, y });
                        person_attr_y[i] += y;
                        attr_col_y[k] += y;
                        attr_y += y;
                    }
                }
            }
        }
        Ok(Self {
            n,
            m,
            has_social: data.social.is_some(),
            has_attributes: data.attributes.is_some(),
            pairs,
            cells,
            social_y,
            attr_y,
            person_social_y,
            person_attr_y,
            attr_col_y,
        })
    }

    pub fn check_state(&self, state: &VariationalState) -> Result<()> {
        if state.n_persons() != self.n {
            return Err(Error::dims(format!(
                "state has {} persons, data {}",
                state.n_persons(),
                self.n
            )));
        }
        if state.n_attributes() != self.m {
            return Err(Error::dims(format!(
                "state has {} attributes, data {}",
                state.n_attributes(),
                self.m
            )));
        }
        state.validate()
    }
}

/// Quantities derived from the covariances and intercepts, plus row-major
/// copies of the means for the hot loops.
pub(crate) struct Geometry {
    pub d: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `(I + 4Λ̃₀)⁻¹`, row-major.
    pub p0: Vec<f64>,
    /// `(I + 2Λ̃₀ + 2Λ̃₁)⁻¹`, row-major.
    pub p1: Vec<f64>,
    pub p0_mat: DMatrix<f64>,
    pub p1_mat: DMatrix<f64>,
    /// `α̃₀ − ½ log det(I + 4Λ̃₀)`.
    pub logc0: f64,
    /// `α̃₁ − ½ log det(I + 2Λ̃₀ + 2Λ̃₁)`.
    pub logc1: f64,
    pub tr0: f64,
    pub tr1: f64,
    pub alpha0: f64,
    pub alpha1: f64,
}

impl Geometry {
    pub fn new(state: &VariationalState) -> Result<Self> {
        let d = state.dim();
        let eye = DMatrix::<f64>::identity(d, d);
        let (p0_mat, ld0) = spd_inverse_logdet(&(&eye + &state.cov_persons * 4.0))?;
        let (p1_mat, ld1) =
            spd_inverse_logdet(&(&eye + &state.cov_persons * 2.0 + &state.cov_attributes * 2.0))?;
        Ok(Self {
            d,
            u: flat(&state.mean_persons),
            v: flat(&state.mean_attributes),
            p0: flat(&p0_mat),
            p1: flat(&p1_mat),
            p0_mat,
            p1_mat,
            logc0: state.intercepts.alpha0 - 0.5 * ld0,
            logc1: state.intercepts.alpha1 - 0.5 * ld1,
            tr0: state.cov_persons.trace(),
            tr1: state.cov_attributes.trace(),
            alpha0: state.intercepts.alpha0,
            alpha1: state.intercepts.alpha1,
        })
    }

    #[inline]
    pub fn person(&self, i: usize) -> &[f64] {
        &self.u[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn attribute(&self, a: usize) -> &[f64] {
        &self.v[a * self.d..(a + 1) * self.d]
    }
}
