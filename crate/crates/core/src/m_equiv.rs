//! The M-estimation view of PWLS.
//!
//! Profiling the weights out of the PWLS objective leaves a redescending
//! M-estimator with
//!
//! ```text
//! ψ(t, λ) = 2t                          |t| ≤ √(λ/2)
//!         = λ / t                       otherwise
//! ρ(t, λ) = t²                          |t| ≤ √(λ/2)
//!         = λ log(|t| √(2/λ)) + λ/2     otherwise
//! ```
//!
//! With a concomitant scale `σ` the M-estimator minimizes
//! `Σ ρ(r_i/σ, λ) + 2cn log σ`; the matching PWLS problem minimizes
//! `Σ w_i² r_i² / σ² + λ Σ |log w_i| + 2cn log σ`. Both share their fixed
//! points, which [`theorem1_check`] verifies numerically.
//!
//! The concomitant objective is bounded below only when `λ(n - p) > 2cn`
//! (roughly `λ > 2c`): an exact fit through `p` points leaves `n - p`
//! flagged terms, each growing like `λ log(1/σ)` as `σ → 0`, against a scale
//! term falling like `2cn log(1/σ)`. Outside that range both fits drive `σ`
//! to zero and report [`Error::ScaleCollapsed`].

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numerics::{self, Dataset};
use crate::scalar::Real;
use crate::solver::huber_irls;

/// Relative scale below which `σ` is treated as having collapsed to zero.
const COLLAPSE_RATIO: f64 = 1e-10;

pub fn rho<T: Real>(t: T, lambda: T) -> T {
    let knot = (lambda * T::lit(0.5)).sqrt();
    let a = t.abs();
    if a <= knot {
        t * t
    } else {
        lambda * (a / knot).ln() + lambda * T::lit(0.5)
    }
}

pub fn psi<T: Real>(t: T, lambda: T) -> T {
    let knot = (lambda * T::lit(0.5)).sqrt();
    if t.abs() <= knot {
        T::lit(2.0) * t
    } else {
        lambda / t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MConfig<T: Real> {
    /// Concomitant-scale constant.
    pub c: T,
    pub lambda: T,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> MConfig<T> {
    pub fn new(lambda: T) -> Self {
        Self {
            c: T::one(),
            lambda,
            tol: T::lit(1e-8),
            max_iter: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > T::zero()) {
            return Err(Error::InvalidInput("c must be positive".into()));
        }
        if !(self.lambda > T::zero()) {
            return Err(Error::InvalidInput("lambda must be positive".into()));
        }
        if !(self.tol > T::zero()) || self.max_iter == 0 {
            return Err(Error::InvalidInput("tol and max_iter must be positive".into()));
        }
        Ok(())
    }

    fn knot(&self) -> T {
        (self.lambda * T::lit(0.5)).sqrt()
    }
}

/// Concomitant-scale M-estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MFit<T: Real> {
    pub beta: DVector<T>,
    pub sigma: T,
    /// `{i : |r_i| > √(λ/2) σ}`, zero-based.
    pub flagged: Vec<usize>,
    /// `Σ ρ(r_i/σ, λ) + 2cn log σ`.
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
}

/// PWLS with a concomitant scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPwlsFit<T: Real> {
    pub beta: DVector<T>,
    pub w: DVector<T>,
    pub residuals: DVector<T>,
    pub flagged: Vec<usize>,
    pub sigma: T,
    /// `Σ w_i² r_i² / σ² + λ Σ |log w_i| + 2cn log σ`.
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Report<T: Real> {
    pub beta_gap: T,
    pub sigma_gap: T,
    pub pass: bool,
}

pub fn concomitant_objective<T: Real>(r: &DVector<T>, sigma: T, config: &MConfig<T>) -> T {
    let n = T::from_count(r.len());
    r.iter().fold(T::zero(), |acc, ri| acc + rho(*ri / sigma, config.lambda))
        + T::lit(2.0) * config.c * n * sigma.ln()
}

/// `σ² = ‖r_{Ôᶜ}‖² / (cn - (λ/2) #Ô)` with `Ô` taken at the supplied `σ`.
pub fn sigma_closed_form<T: Real>(r: &DVector<T>, sigma: T, config: &MConfig<T>) -> Result<T> {
    let cut = config.knot() * sigma;
    let mut inlier_ss = T::zero();
    let mut flagged = 0usize;
    for ri in r.iter() {
        if ri.abs() > cut {
            flagged += 1;
        } else {
            inlier_ss += *ri * *ri;
        }
    }
    let n = r.len();
    let den = config.c * T::from_count(n) - config.lambda * T::lit(0.5) * T::from_count(flagged);
    if !(den > T::zero()) {
        return Err(Error::ScaleDenominator { flagged, n });
    }
    Ok((inlier_ss / den).sqrt())
}

fn start<T: Real>(data: &Dataset<T>) -> Result<(DVector<T>, T)> {
    let beta = huber_irls(data)?;
    let r = data.residuals(&beta);
    let mut sigma = crate::solver::mad_scale(&r);
    if !(sigma > T::zero()) {
        sigma = (r.norm_squared() / T::from_count(r.len())).sqrt();
    }
    if !(sigma > T::zero()) {
        return Err(Error::InvalidInput("data are fit exactly; scale is zero".into()));
    }
    Ok((beta, sigma))
}

fn scaled_weights<T: Real>(r: &DVector<T>, sigma: T, knot: T) -> DVector<T> {
    let cut = knot * sigma;
    r.map(|ri| {
        let a = ri.abs();
        if a > cut {
            cut / a
        } else {
            T::one()
        }
    })
}

fn weighted_beta<T: Real>(data: &Dataset<T>, w: &DVector<T>, iteration: usize) -> Result<DVector<T>> {
    let row_w: Vec<T> = w.iter().map(|v| *v * *v).collect();
    numerics::weighted_lstsq(data.x(), data.y(), Some(&row_w)).map_err(|e| match e {
        Error::SingularDesign => Error::DegenerateWeighting { iteration },
        e => e,
    })
}

fn flagged_set<T: Real>(r: &DVector<T>, cut: T) -> Vec<usize> {
    r.iter()
        .enumerate()
        .filter(|(_, ri)| ri.abs() > cut)
        .map(|(i, _)| i)
        .collect()
}

/// Concomitant-scale M-estimate.
///
/// Alternates a ψ-type reweighted least-squares step at fixed `σ` (row
/// weights `w_i²`, `w_i = min(1, √(λ/2) σ / |r_i|)`) with the closed-form
/// scale update [`sigma_closed_form`], starting from a Huber fit and its
/// MAD scale.
pub fn fit_concomitant_m<T: Real>(data: &Dataset<T>, config: &MConfig<T>) -> Result<MFit<T>> {
    config.validate()?;
    let knot = config.knot();
    let (mut beta, mut sigma) = start(data)?;
    let floor = sigma * T::lit(COLLAPSE_RATIO);
    let mut r = data.residuals(&beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let w = scaled_weights(&r, sigma, knot);
        let next_beta = weighted_beta(data, &w, iterations)?;
        r = data.residuals(&next_beta);
        let next_sigma = sigma_closed_form(&r, sigma, config)?;
        if !(next_sigma > floor) {
            return Err(Error::ScaleCollapsed);
        }
        let moved = (&next_beta - &beta).amax().max((next_sigma - sigma).abs() / sigma);
        beta = next_beta;
        sigma = next_sigma;
        if moved < config.tol {
            converged = true;
            break;
        }
    }
    Ok(MFit {
        flagged: flagged_set(&r, knot * sigma),
        objective: concomitant_objective(&r, sigma, config),
        beta,
        sigma,
        iterations,
        converged,
    })
}

pub fn scaled_pwls_objective<T: Real>(
    r: &DVector<T>,
    w: &DVector<T>,
    sigma: T,
    config: &MConfig<T>,
) -> T {
    let n = T::from_count(r.len());
    let mut loss = T::zero();
    let mut pen = T::zero();
    for (wi, ri) in w.iter().zip(r.iter()) {
        loss += (*wi * *ri) * (*wi * *ri);
        pen += wi.ln().abs();
    }
    loss / (sigma * sigma) + config.lambda * pen + T::lit(2.0) * config.c * n * sigma.ln()
}

/// PWLS with a concomitant scale: a `β` step at the current weights, the
/// scaled weight update `w_i = min(1, σ√(λ/2)/|r_i|)`, then `cn σ² = Σ w_i² r_i²`.
pub fn fit_pwls_with_scale<T: Real>(
    data: &Dataset<T>,
    config: &MConfig<T>,
) -> Result<ScaledPwlsFit<T>> {
    config.validate()?;
    let knot = config.knot();
    let cn = config.c * T::from_count(data.n());
    let (mut beta, mut sigma) = start(data)?;
    let floor = sigma * T::lit(COLLAPSE_RATIO);
    let mut r = data.residuals(&beta);
    let mut w = scaled_weights(&r, sigma, knot);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let next_beta = weighted_beta(data, &w, iterations)?;
        r = data.residuals(&next_beta);
        w = scaled_weights(&r, sigma, knot);
        let wrss = w
            .iter()
            .zip(r.iter())
            .fold(T::zero(), |acc, (wi, ri)| acc + (*wi * *ri) * (*wi * *ri));
        let next_sigma = (wrss / cn).sqrt();
        if !(next_sigma > floor) {
            return Err(Error::ScaleCollapsed);
        }
        let moved = (&next_beta - &beta).amax().max((next_sigma - sigma).abs() / sigma);
        beta = next_beta;
        sigma = next_sigma;
        if moved < config.tol {
            converged = true;
            break;
        }
    }
    // weights consistent with the final scale
    w = scaled_weights(&r, sigma, knot);
    Ok(ScaledPwlsFit {
        flagged: flagged_set(&r, knot * sigma),
        objective: scaled_pwls_objective(&r, &w, sigma, config),
        beta,
        w,
        residuals: r,
        sigma,
        iterations,
        converged,
    })
}

/// Runs both estimators and compares them: pass iff `‖β_M - β_P‖_∞ < 1e-6`
/// and `|σ_M - σ_P| < 1e-6`.
pub fn theorem1_check<T: Real>(data: &Dataset<T>, config: &MConfig<T>) -> Result<Theorem1Report<T>> {
    let m = fit_concomitant_m(data, config)?;
    let p = fit_pwls_with_scale(data, config)?;
    let beta_gap = (&m.beta - &p.beta).amax();
    let sigma_gap = (m.sigma - p.sigma).abs();
    let tol = T::lit(1e-6);
    Ok(Theorem1Report {
        beta_gap,
        sigma_gap,
        pass: beta_gap < tol && sigma_gap < tol,
    })
}
