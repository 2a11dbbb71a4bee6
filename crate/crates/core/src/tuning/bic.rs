use crate::numerics::Dataset;
use crate::scalar::Real;
use crate::solver::{PwlsFit, SolutionPath};

#[derive(Debug, Clone, PartialEq)]
pub struct BicReport<T: Real> {
    pub values: Vec<T>,
    pub index: usize,
    pub lambda: T,
}

/// `(n - p) log(‖ŵ∘r‖² / ‖ŵ‖²) + k̂ (log(n - p) + 1)` with `k̂` the number of
/// flagged observations.
///
/// A perfect fit (zero weighted residual sum of squares) scores `-∞`.
pub fn bic<T: Real>(fit: &PwlsFit<T>, n: usize, p: usize) -> T {
    assert!(n > p, "bic needs n > p");
    let mut wrss = T::zero();
    let mut wss = T::zero();
    for (w, r) in fit.w.iter().zip(fit.residuals.iter()) {
        wrss += (*w * *r) * (*w * *r);
        wss += *w * *w;
    }
    let dof = T::from_count(n - p);
    let complexity = T::from_count(fit.n_flagged()) * (dof.ln() + T::one());
    if !(wrss > T::zero()) {
        return T::lit(f64::NEG_INFINITY);
    }
    dof * (wrss / wss).ln() + complexity
}

/// Minimum-BIC grid point; ties go to the larger `λ` (earlier on the path).
pub fn select_bic<T: Real>(path: &SolutionPath<T>, data: &Dataset<T>) -> BicReport<T> {
    assert!(!path.fits.is_empty(), "empty solution path");
    let values: Vec<T> = path.fits.iter().map(|f| bic(f, data.n(), data.p())).collect();
    let mut index = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v < values[index] {
            index = k;
        }
    }
    BicReport {
        lambda: path.lambdas[index],
        values,
        index,
    }
}
