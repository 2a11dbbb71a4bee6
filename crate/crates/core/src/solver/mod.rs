//! The (adaptive) penalized weighted least squares estimator.
//!
//! For a penalty level `λ` and per-observation penalty scales `ϖ`, the
//! estimator minimizes
//!
//! ```text
//! Σ w_i² (y_i - x_i'β)² + λ Σ ϖ_i |log w_i|,     w_i ∈ (0, 1]
//! ```
//!
//! by alternating an exact weighted least-squares step in `β` with the
//! closed-form minimizer in `w`. Observations whose weight drops below one
//! are the flagged outliers.

mod init;

pub use init::{adaptive_scales, huber_irls, initial_estimates, InitialEstimates, ADAPTIVE_CAP};
pub(crate) use init::mad_scale;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numerics::{self, Dataset};
use crate::scalar::Real;

/// Halvings attempted below the top of the grid while looking for `λ_min`.
const MAX_HALVINGS: usize = 200;

/// Where a solution path starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathTop {
    /// `2 λ_max² / min ϖ`: the largest studentized residual carried onto the
    /// squared-residual scale of the penalty, where nothing is flagged.
    #[default]
    AllClean,
    /// The largest studentized residual itself.
    Studentized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T: Real> {
    /// Stop once `‖w⁽ʲ⁾ - w⁽ʲ⁻¹⁾‖_∞` falls below this.
    pub epsilon: T,
    pub max_iter: usize,
    /// Number of `λ` values on a solution path.
    pub grid_size: usize,
    /// Flagged fraction that marks the low end of the grid.
    pub lambda_min_rule: T,
    pub path_top: PathTop,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(1e-6),
            max_iter: 500,
            grid_size: 100,
            lambda_min_rule: T::lit(0.5),
            path_top: PathTop::AllClean,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidInput("grid_size must be at least 2".into()));
        }
        if !(self.lambda_min_rule > T::zero() && self.lambda_min_rule < T::one()) {
            return Err(Error::InvalidInput("lambda_min_rule must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-observation penalty multipliers `ϖ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyScales<T: Real> {
    varpi: DVector<T>,
    cap: T,
}

impl<T: Real> PenaltyScales<T> {
    pub fn new(varpi: DVector<T>, cap: T) -> Result<Self> {
        if !(cap > T::zero()) {
            return Err(Error::InvalidInput("penalty cap must be positive".into()));
        }
        if varpi.iter().any(|v| !(*v > T::zero() && *v <= cap)) {
            return Err(Error::InvalidInput("penalty scales must lie in (0, cap]".into()));
        }
        Ok(Self { varpi, cap })
    }

    /// `ϖ ≡ 1`: the plain (non-adaptive) estimator.
    pub fn uniform(n: usize) -> Self {
        Self {
            varpi: DVector::from_element(n, T::one()),
            cap: T::lit(ADAPTIVE_CAP),
        }
    }

    pub fn varpi(&self) -> &DVector<T> {
        &self.varpi
    }

    pub fn cap(&self) -> T {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.varpi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.varpi.is_empty()
    }

    pub fn min(&self) -> T {
        self.varpi.min()
    }
}

/// Result of one alternating fit at a fixed `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlsFit<T: Real> {
    pub beta: DVector<T>,
    pub w: DVector<T>,
    pub residuals: DVector<T>,
    /// Zero-based indices with `w_i < 1`, ascending.
    pub flagged: Vec<usize>,
    pub objective: T,
    pub lambda: T,
    pub iterations: usize,
    pub converged: bool,
    /// `Σ w_i² r_i² / (n - p)`.
    pub sigma2: T,
    /// Objective at the starting point followed by its value after each sweep.
    pub history: Vec<T>,
}

impl<T: Real> PwlsFit<T> {
    pub fn n_flagged(&self) -> usize {
        self.flagged.len()
    }
}

/// A sequence of fits over a strictly decreasing `λ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath<T: Real> {
    pub lambdas: Vec<T>,
    pub fits: Vec<PwlsFit<T>>,
    pub scales: PenaltyScales<T>,
}

/// Exact minimizer of `w² r² + λ_i |log w|` over `w ∈ (0, 1]`.
///
/// Equal to `√(λ_i/2) / |r|` when `|r|` exceeds `√(λ_i/2)`, one otherwise
/// (ties included).
pub fn w_update<T: Real>(residual: T, lambda_i: T) -> T {
    let knot = (T::lit(0.5) * lambda_i).sqrt();
    let a = residual.abs();
    if a > knot {
        knot / a
    } else {
        T::one()
    }
}

/// `Σ ω_i w_i² r_i² + λ Σ ϖ_i |log w_i|`, with `ω ≡ 1` when `loss_weights` is `None`.
pub fn objective<T: Real>(
    residuals: &DVector<T>,
    w: &DVector<T>,
    lambda: T,
    scales: &PenaltyScales<T>,
    loss_weights: Option<&[T]>,
) -> T {
    let mut loss = T::zero();
    let mut penalty = T::zero();
    for i in 0..w.len() {
        let om = loss_weights.map_or(T::one(), |o| o[i]);
        let wr = w[i] * residuals[i];
        loss += om * wr * wr;
        penalty += scales.varpi[i] * w[i].ln().abs();
    }
    loss + lambda * penalty
}

fn flagged_of<T: Real>(w: &DVector<T>) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter(|(_, v)| **v < T::one())
        .map(|(i, _)| i)
        .collect()
}

fn check_inputs<T: Real>(
    data: &Dataset<T>,
    lambda: T,
    scales: &PenaltyScales<T>,
    init_beta: &DVector<T>,
    init_w: &DVector<T>,
    config: &SolverConfig<T>,
) -> Result<()> {
    config.validate()?;
    if !(lambda > T::zero()) || !lambda.finite() {
        return Err(Error::InvalidInput("lambda must be positive and finite".into()));
    }
    if scales.len() != data.n() || init_w.len() != data.n() {
        return Err(Error::InvalidInput(
            "scales and initial weights need one entry per observation".into(),
        ));
    }
    if init_beta.len() != data.p() {
        return Err(Error::InvalidInput("initial beta has wrong length".into()));
    }
    if init_w.iter().any(|w| !(*w > T::zero() && *w <= T::one())) {
        return Err(Error::InvalidInput("initial weights must lie in (0, 1]".into()));
    }
    Ok(())
}

/// Alternating minimization at a single `λ`.
///
/// Each sweep solves weighted least squares with row weights `w²` (from the
/// previous sweep) and then applies [`w_update`] to the new residuals.
/// Stops when the weights move less than `config.epsilon` in sup-norm, or
/// returns the current iterate with `converged = false` after `max_iter`.
pub fn fit<T: Real>(
    data: &Dataset<T>,
    lambda: T,
    scales: &PenaltyScales<T>,
    init_beta: &DVector<T>,
    init_w: &DVector<T>,
    config: &SolverConfig<T>,
) -> Result<PwlsFit<T>> {
    fit_weighted(data, lambda, scales, None, init_beta, init_w, config)
}

/// [`fit`] with positive loss multipliers `ω_i` on the squared-residual term.
pub(crate) fn fit_weighted<T: Real>(
    data: &Dataset<T>,
    lambda: T,
    scales: &PenaltyScales<T>,
    loss_weights: Option<&[T]>,
    init_beta: &DVector<T>,
    init_w: &DVector<T>,
    config: &SolverConfig<T>,
) -> Result<PwlsFit<T>> {
    check_inputs(data, lambda, scales, init_beta, init_w, config)?;
    let n = data.n();
    let p = data.p();
    if let Some(om) = loss_weights {
        if om.len() != n || om.iter().any(|o| !(*o > T::zero()) || !o.finite()) {
            return Err(Error::InvalidInput(
                "loss weights must be positive and finite, one per observation".into(),
            ));
        }
    }
    let om = |i: usize| loss_weights.map_or(T::one(), |o| o[i]);
    let lambda_i: Vec<T> = (0..n).map(|i| lambda * scales.varpi[i] / om(i)).collect();

    let mut w = init_w.clone();
    let mut beta = init_beta.clone();
    let mut residuals = data.residuals(&beta);
    let mut history = vec![objective(&residuals, &w, lambda, scales, loss_weights)];
    let mut converged = false;
    let mut iterations = 0;
    let mut row_w = vec![T::zero(); n];

    while iterations < config.max_iter {
        iterations += 1;
        for i in 0..n {
            row_w[i] = om(i) * w[i] * w[i];
        }
        beta = match numerics::weighted_lstsq(data.x(), data.y(), Some(&row_w)) {
            Ok(b) => b,
            Err(Error::SingularDesign) => {
                return Err(Error::DegenerateWeighting { iteration: iterations })
            }
            Err(e) => return Err(e),
        };
        residuals = data.residuals(&beta);
        let mut delta = T::zero();
        for i in 0..n {
            let next = w_update(residuals[i], lambda_i[i]);
            let d = (next - w[i]).abs();
            if d > delta {
                delta = d;
            }
            w[i] = next;
        }
        history.push(objective(&residuals, &w, lambda, scales, loss_weights));
        if delta < config.epsilon {
            converged = true;
            break;
        }
    }

    let objective = *history.last().expect("history is never empty");
    let wrss = w
        .iter()
        .zip(residuals.iter())
        .fold(T::zero(), |acc, (wi, ri)| acc + (*wi * *ri) * (*wi * *ri));
    Ok(PwlsFit {
        flagged: flagged_of(&w),
        sigma2: wrss / T::from_count(n - p),
        beta,
        w,
        residuals,
        objective,
        lambda,
        iterations,
        converged,
        history,
    })
}

/// Top of the `λ` grid, derived from [`numerics::lambda_max`] per
/// [`PathTop`].
///
/// With [`PathTop::AllClean`] every OLS residual satisfies
/// `|r_i| ≤ √(λ ϖ_i / 2)`, so the all-ones weight vector is a fixed point.
pub fn path_lambda_max<T: Real>(
    data: &Dataset<T>,
    scales: &PenaltyScales<T>,
    top: PathTop,
) -> Result<T> {
    let lm = numerics::lambda_max(data)?;
    if !(lm > T::zero()) {
        return Err(Error::InvalidInput(
            "response lies in the column space of the design".into(),
        ));
    }
    Ok(match top {
        PathTop::AllClean => T::lit(2.0) * lm * lm / scales.min(),
        PathTop::Studentized => lm,
    })
}

/// `count` points equally spaced in `log λ` from `hi` down to `lo`.
pub fn log_grid<T: Real>(hi: T, lo: T, count: usize) -> Vec<T> {
    assert!(count >= 2 && hi > lo && lo > T::zero());
    let (lh, ll) = (hi.ln(), lo.ln());
    let last = T::from_count(count - 1);
    (0..count)
        .map(|k| {
            if k == 0 {
                hi
            } else if k == count - 1 {
                lo
            } else {
                let t = T::from_count(k) / last;
                (lh + (ll - lh) * t).exp()
            }
        })
        .collect()
}

/// Fits along a caller-supplied strictly decreasing grid, warm-starting each
/// `λ` from the previous solution and the first from OLS with unit weights.
pub fn path_on_grid<T: Real>(
    data: &Dataset<T>,
    scales: &PenaltyScales<T>,
    lambdas: &[T],
    config: &SolverConfig<T>,
) -> Result<SolutionPath<T>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("empty lambda grid".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("lambda grid must be strictly decreasing".into()));
    }
    let mut beta = numerics::ols_solve(data, None)?;
    let mut w = DVector::from_element(data.n(), T::one());
    let mut fits = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let f = fit(data, lambda, scales, &beta, &w, config)
            .map_err(|e| e.at_lambda(lambda.to_f64_lossy()))?;
        beta.copy_from(&f.beta);
        w.copy_from(&f.w);
        fits.push(f);
    }
    Ok(SolutionPath {
        lambdas: lambdas.to_vec(),
        fits,
        scales: scales.clone(),
    })
}

/// Lowest grid level: halve from `top` (warm-started) until the flagged
/// fraction first reaches `config.lambda_min_rule`.
pub fn find_lambda_min<T: Real>(
    data: &Dataset<T>,
    scales: &PenaltyScales<T>,
    top: T,
    config: &SolverConfig<T>,
) -> Result<T> {
    let n = data.n();
    let mut beta = numerics::ols_solve(data, None)?;
    let mut w = DVector::from_element(n, T::one());
    let mut lambda = top;
    for _ in 0..MAX_HALVINGS {
        lambda *= T::lit(0.5);
        let f = fit(data, lambda, scales, &beta, &w, config)
            .map_err(|e| e.at_lambda(lambda.to_f64_lossy()))?;
        if T::from_count(f.n_flagged()) >= config.lambda_min_rule * T::from_count(n) {
            return Ok(lambda);
        }
        beta = f.beta;
        w = f.w;
    }
    log::warn!(
        "flagged fraction never reached {} after {MAX_HALVINGS} halvings",
        config.lambda_min_rule.to_f64_lossy()
    );
    Ok(lambda)
}

/// Full solution path from [`path_lambda_max`] down to the `λ_min` located by
/// [`find_lambda_min`], on `config.grid_size` log-spaced levels.
pub fn solution_path<T: Real>(
    data: &Dataset<T>,
    scales: &PenaltyScales<T>,
    config: &SolverConfig<T>,
) -> Result<SolutionPath<T>> {
    config.validate()?;
    if scales.len() != data.n() {
        return Err(Error::InvalidInput("one penalty scale per observation".into()));
    }
    let top = path_lambda_max(data, scales, config.path_top)?;
    let bottom = find_lambda_min(data, scales, top, config)?;
    let grid = log_grid(top, bottom, config.grid_size);
    path_on_grid(data, scales, &grid, config)
}
