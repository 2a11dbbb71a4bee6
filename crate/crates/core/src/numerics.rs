//! Dense least-squares and leverage primitives.
//!
//! Every solve goes through a Householder QR of the (row-scaled) design; the
//! normal equations are never formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A regression problem: `n` observations of `p` predictors and a response.
///
/// Construction enforces `n > p >= 1`, finite entries and full column rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Real> {
    x: DMatrix<T>,
    y: DVector<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new(x: DMatrix<T>, y: DVector<T>) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 {
            return Err(Error::InvalidInput("design has no columns".into()));
        }
        if n <= p {
            return Err(Error::InvalidInput(format!(
                "need more observations than predictors (n = {n}, p = {p})"
            )));
        }
        if y.len() != n {
            return Err(Error::InvalidInput(format!(
                "response has length {} but design has {n} rows",
                y.len()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite design entry at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.finite()) {
            return Err(Error::InvalidInput(format!("non-finite response at row {i}")));
        }
        qr_solve(x.clone(), y.clone())?;
        Ok(Self { x, y })
    }

    /// Builds a dataset from row-major predictor values.
    pub fn from_rows(rows: &[Vec<T>], y: &[T]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged predictor rows".into()));
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(x, DVector::from_column_slice(y))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<T> {
        &self.x
    }

    pub fn y(&self) -> &DVector<T> {
        &self.y
    }

    pub fn residuals(&self, beta: &DVector<T>) -> DVector<T> {
        &self.y - &self.x * beta
    }

    /// Multiplies row `i` of both `X` and `y` by `factor[i]`.
    ///
    /// The result is not re-checked for rank; callers scale by strictly
    /// positive factors, which preserves it.
    pub fn scale_rows(&self, factor: &[T]) -> Self {
        assert_eq!(factor.len(), self.n(), "one factor per row");
        let mut x = self.x.clone();
        let mut y = self.y.clone();
        for (i, &f) in factor.iter().enumerate() {
            x.row_mut(i).scale_mut(f);
            y[i] *= f;
        }
        Self { x, y }
    }
}

/// Solves `min Σ (y_i - x_i'β)²` by Householder QR, rejecting rank-deficient designs.
fn qr_solve<T: Real>(x: DMatrix<T>, mut y: DVector<T>) -> Result<DVector<T>> {
    let p = x.ncols();
    let qr = x.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > T::zero()) || min / max < T::rank_tolerance() {
        return Err(Error::SingularDesign);
    }
    qr.q_tr_mul(&mut y);
    let top = y.rows(0, p).into_owned();
    r.solve_upper_triangular(&top).ok_or(Error::SingularDesign)
}

/// Least squares on a raw design, optionally with nonnegative row weights.
///
/// Rows are scaled by the square root of their weight before factorization.
pub fn weighted_lstsq<T: Real>(
    x: &DMatrix<T>,
    y: &DVector<T>,
    row_weights: Option<&[T]>,
) -> Result<DVector<T>> {
    let (n, p) = x.shape();
    match row_weights {
        None => qr_solve(x.clone(), y.clone()),
        Some(w) => {
            if w.len() != n {
                return Err(Error::InvalidInput(format!(
                    "expected {n} row weights, got {}",
                    w.len()
                )));
            }
            if w.iter().any(|v| !v.finite() || *v < T::zero()) {
                return Err(Error::InvalidInput(
                    "row weights must be finite and nonnegative".into(),
                ));
            }
            if w.iter().filter(|v| **v > T::zero()).count() < p {
                return Err(Error::SingularDesign);
            }
            let mut xw = x.clone();
            let mut yw = y.clone();
            for (i, &wi) in w.iter().enumerate() {
                let s = wi.sqrt();
                xw.row_mut(i).scale_mut(s);
                yw[i] *= s;
            }
            qr_solve(xw, yw)
        }
    }
}

/// Coefficients minimizing `Σ row_weights_i (y_i - x_i'β)²` (unit weights when `None`).
pub fn ols_solve<T: Real>(data: &Dataset<T>, row_weights: Option<&DVector<T>>) -> Result<DVector<T>> {
    weighted_lstsq(&data.x, &data.y, row_weights.map(|w| w.as_slice()))
}

/// Diagonal of the hat matrix `X(X'X)⁻¹X'`.
pub fn hat_diag<T: Real>(data: &Dataset<T>) -> Result<DVector<T>> {
    leverages(&data.x)
}

/// Leverages of a raw design with `n >= p`.
pub fn leverages<T: Real>(x: &DMatrix<T>) -> Result<DVector<T>> {
    if x.nrows() < x.ncols() || x.ncols() == 0 {
        return Err(Error::SingularDesign);
    }
    let qr = x.clone().qr();
    let sv = qr.r().singular_values();
    if !(sv.max() > T::zero()) || sv.min() / sv.max() < T::rank_tolerance() {
        return Err(Error::SingularDesign);
    }
    let q = qr.q();
    Ok(DVector::from_iterator(
        x.nrows(),
        q.row_iter().map(|row| row.norm_squared()),
    ))
}

/// `max_i |r_i| / sqrt(1 - h_ii)` where `r = (I - H) y`.
pub fn lambda_max<T: Real>(data: &Dataset<T>) -> Result<T> {
    let h = hat_diag(data)?;
    let beta = ols_solve(data, None)?;
    let r = data.residuals(&beta);
    let limit = T::one() - T::lit(1e-12);
    let mut best = T::zero();
    for (i, (&ri, &hi)) in r.iter().zip(h.iter()).enumerate() {
        if hi >= limit {
            return Err(Error::DegenerateLeverage { index: i });
        }
        let v = ri.abs() / (T::one() - hi).sqrt();
        if v > best {
            best = v;
        }
    }
    Ok(best)
}
