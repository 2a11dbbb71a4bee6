use nalgebra::DVector;

use super::{PenaltyScales, SolverConfig};
use crate::error::Result;
use crate::numerics::{self, Dataset};
use crate::scalar::Real;

/// Stand-in for `1 / 0` in the adaptive penalty scales.
pub const ADAPTIVE_CAP: f64 = 999.0;

const HUBER_K: f64 = 1.345;
const HUBER_MAX_ITER: usize = 50;
/// Normal-consistency factor for the median absolute deviation.
const MAD_SCALE: f64 = 0.6745;

/// Pilot coefficients and weights for the adaptive estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialEstimates<T: Real> {
    pub beta: DVector<T>,
    pub w: DVector<T>,
    /// `‖y - Xβ⁽⁰⁾‖² / (n - p)`.
    pub lambda0: T,
}

fn median<T: Real>(v: &mut [T]) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) * T::lit(0.5)
    }
}

pub(crate) fn mad_scale<T: Real>(r: &DVector<T>) -> T {
    let mut v: Vec<T> = r.iter().copied().collect();
    let med = median(&mut v);
    let mut dev: Vec<T> = r.iter().map(|x| (*x - med).abs()).collect();
    median(&mut dev) / T::lit(MAD_SCALE)
}

/// Huber M-estimate by iteratively reweighted least squares, started from OLS.
///
/// The residual scale is re-estimated by the normalized MAD at every step and
/// the Huber constant is `1.345` scale units.
pub fn huber_irls<T: Real>(data: &Dataset<T>) -> Result<DVector<T>> {
    let mut beta = numerics::ols_solve(data, None)?;
    let mut weights = vec![T::one(); data.n()];
    for _ in 0..HUBER_MAX_ITER {
        let r = data.residuals(&beta);
        let s = mad_scale(&r);
        if !(s > T::zero()) {
            break;
        }
        let k = T::lit(HUBER_K) * s;
        for (wi, ri) in weights.iter_mut().zip(r.iter()) {
            let a = ri.abs();
            *wi = if a > k { k / a } else { T::one() };
        }
        let next = numerics::weighted_lstsq(data.x(), data.y(), Some(&weights))?;
        let step = (&next - &beta).amax();
        let size = beta.amax() + T::one();
        beta = next;
        if step <= T::lit(1e-10) * size {
            break;
        }
    }
    Ok(beta)
}

/// Robust pilot fit plus the pilot weights `w⁽⁰⁾_i = min(1, λ₀ / r_i²)`.
///
/// A zero residual gets weight one.
pub fn initial_estimates<T: Real>(
    data: &Dataset<T>,
    config: &SolverConfig<T>,
) -> Result<InitialEstimates<T>> {
    config.validate()?;
    let beta = huber_irls(data)?;
    Ok(pilot_weights(data, beta))
}

pub(crate) fn pilot_weights<T: Real>(data: &Dataset<T>, beta: DVector<T>) -> InitialEstimates<T> {
    // residuals at rounding level count as exact zeros
    let noise = T::lit(64.0) * T::default_epsilon() * (data.y().amax() + T::one());
    let r = data
        .residuals(&beta)
        .map(|ri| if ri.abs() <= noise { T::zero() } else { ri });
    let lambda0 = r.norm_squared() / T::from_count(data.n() - data.p());
    let w = r.map(|ri| {
        let r2 = ri * ri;
        if r2 > lambda0 {
            lambda0 / r2
        } else {
            T::one()
        }
    });
    InitialEstimates { beta, w, lambda0 }
}

/// `ϖ_i = 1 / |log w⁽⁰⁾_i|`, capped at [`ADAPTIVE_CAP`].
pub fn adaptive_scales<T: Real>(w0: &DVector<T>) -> PenaltyScales<T> {
    let cap = T::lit(ADAPTIVE_CAP);
    let varpi = w0.map(|w| {
        let l = w.ln().abs();
        if l > T::zero() && T::one() / l < cap {
            T::one() / l
        } else {
            cap
        }
    });
    PenaltyScales { varpi, cap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn adaptive_scale_values() {
        let w0 = DVector::from_vec(vec![1.0, (-1.0f64).exp(), 0.5, 1.0 - 1e-6]);
        let s = adaptive_scales(&w0);
        assert_eq!(s.varpi()[0], 999.0);
        assert!((s.varpi()[1] - 1.0).abs() < 1e-15);
        assert!((s.varpi()[2] - 1.0 / 2f64.ln()).abs() < 1e-15);
        assert!((s.varpi()[2] - 1.442695).abs() < 1e-6);
        // 1/|log(1 - 1e-6)| ≈ 1e6 exceeds the cap
        assert_eq!(s.varpi()[3], 999.0);
    }

    #[test]
    fn perfect_fit_gives_unit_weights() {
        let x = DMatrix::from_column_slice(4, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 4.0]);
        let d = Dataset::new(x, DVector::from_vec(vec![2.0, 3.0, 4.0, 5.0])).unwrap();
        let est = initial_estimates(&d, &SolverConfig::default()).unwrap();
        assert!(est.w.iter().all(|w| *w == 1.0));
    }

    #[test]
    fn pilot_weight_rule() {
        // intercept-only; beta0 = 0 gives residuals equal to y
        let d = Dataset::new(
            DMatrix::from_element(5, 1, 1.0),
            DVector::from_vec(vec![0.5, -0.5, 0.5, -0.5, 4.0]),
        )
        .unwrap();
        let est = pilot_weights(&d, DVector::zeros(1));
        // λ₀ = (4·0.25 + 16) / 4 = 4.25
        assert!((est.lambda0 - 4.25f64).abs() < 1e-15);
        assert!((est.w[4] - 4.25f64 / 16.0).abs() < 1e-15);
        assert!(est.w.iter().take(4).all(|w| *w == 1.0));

        // n = 9, p = 1, r = (√8, 1, …, 1): λ₀ = 16 / 8 = 2 and r₀² = 4 λ₀
        let mut r = vec![1.0; 9];
        r[0] = 8f64.sqrt();
        let d = Dataset::new(DMatrix::from_element(9, 1, 1.0), DVector::from_vec(r)).unwrap();
        let est = pilot_weights(&d, DVector::zeros(1));
        assert!((est.lambda0 - 2.0).abs() < 1e-15);
        assert!((est.w[0] - 0.25).abs() < 1e-15);
        assert!(est.w.iter().skip(1).all(|w| *w == 1.0));
    }

    #[test]
    fn huber_resists_gross_outlier() {
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let mut y = DVector::from_fn(20, |i, _| 1.0 + 2.0 * i as f64 + 0.1 * ((i * 7 % 5) as f64 - 2.0));
        y[3] += 100.0;
        let b = huber_irls(&Dataset::new(x, y).unwrap()).unwrap();
        assert!((b[1] - 2.0).abs() < 0.05);
    }
}
