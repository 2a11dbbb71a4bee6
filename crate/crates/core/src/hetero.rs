//! Heteroscedastic extension (H-PWLS).
//!
//! Three steps: a homogeneous aPWLS fit gives `β̂ʰᵒᵐᵒ`; the absolute residuals
//! `R_i` are regressed on a variance function `g(z_i'ϑ)` by nonlinear least
//! squares; finally PWLS is solved on residuals scaled by `g(z_i'ϑ̂)`, which
//! is plain PWLS on the row-scaled problem `(x_i / g_i, y_i / g_i)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::Dataset;
use crate::scalar::Real;
use crate::solver::{self, PenaltyScales, PwlsFit, SolutionPath, SolverConfig};
use crate::tuning;

/// Lower bound applied to `g` before it is used as a divisor.
pub const DELTA_FLOOR: f64 = 1e-6;

const GN_MAX_ITER: usize = 200;
const GN_MAX_HALVINGS: usize = 30;
const GN_GRAD_TOL: f64 = 1e-10;
const MULTISTARTS: usize = 5;
const MULTISTART_SEED: u64 = 0x5eed_0f_7a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceKind {
    /// `g(v) = |v|`
    Absolute,
    /// `g(v) = e^|v|`
    ExpAbsolute,
    /// `g(v) = √|v|`
    SqrtAbsolute,
    /// `g(v) = v`
    Identity,
}

impl VarianceKind {
    pub fn eval<T: Real>(self, v: T) -> T {
        match self {
            VarianceKind::Absolute => v.abs(),
            VarianceKind::ExpAbsolute => v.abs().exp(),
            VarianceKind::SqrtAbsolute => v.abs().sqrt(),
            VarianceKind::Identity => v,
        }
    }

    /// Derivative, with the zero subgradient at the kink of `|·|`.
    pub fn derivative<T: Real>(self, v: T) -> T {
        let sign = if v > T::zero() {
            T::one()
        } else if v < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        match self {
            VarianceKind::Absolute => sign,
            VarianceKind::ExpAbsolute => sign * v.abs().exp(),
            VarianceKind::SqrtAbsolute => {
                if sign == T::zero() {
                    T::zero()
                } else {
                    sign / (T::lit(2.0) * v.abs().sqrt())
                }
            }
            VarianceKind::Identity => T::one(),
        }
    }

    pub fn floored<T: Real>(self, v: T) -> T {
        let g = self.eval(v);
        let floor = T::lit(DELTA_FLOOR);
        if g > floor {
            g
        } else {
            floor
        }
    }
}

impl std::str::FromStr for VarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" | "absolute" => Ok(VarianceKind::Absolute),
            "exp-abs" | "exp_abs" | "exponential-absolute" => Ok(VarianceKind::ExpAbsolute),
            "sqrt-abs" | "sqrt_abs" | "square-root-absolute" => Ok(VarianceKind::SqrtAbsolute),
            "identity" | "linear" => Ok(VarianceKind::Identity),
            other => Err(Error::InvalidInput(format!("unknown variance function {other:?}"))),
        }
    }
}

/// Which columns of `X` (plus an optional leading one) form `z_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZSpec {
    pub intercept: bool,
    pub columns: Vec<usize>,
}

impl ZSpec {
    pub fn intercept_only() -> Self {
        Self {
            intercept: true,
            columns: Vec::new(),
        }
    }

    /// `z_i = (1, x_ip)'`.
    pub fn intercept_and_last(p: usize) -> Self {
        Self {
            intercept: true,
            columns: vec![p - 1],
        }
    }

    pub fn dim(&self) -> usize {
        usize::from(self.intercept) + self.columns.len()
    }

    pub fn build<T: Real>(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if self.dim() == 0 {
            return Err(Error::InvalidInput("variance covariates are empty".into()));
        }
        if let Some(c) = self.columns.iter().find(|c| **c >= x.ncols()) {
            return Err(Error::InvalidInput(format!("variance covariate column {c} out of range")));
        }
        let off = usize::from(self.intercept);
        Ok(DMatrix::from_fn(x.nrows(), self.dim(), |i, j| {
            if self.intercept && j == 0 {
                T::one()
            } else {
                x[(i, self.columns[j - off])]
            }
        }))
    }

    /// `(1, 0, …, 0)` with an intercept, all ones without.
    pub fn default_theta<T: Real>(&self) -> DVector<T> {
        if self.intercept {
            let mut t = DVector::zeros(self.dim());
            t[0] = T::one();
            t
        } else {
            DVector::from_element(self.dim(), T::one())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceModel<T: Real> {
    pub kind: VarianceKind,
    pub theta: DVector<T>,
    pub z_spec: ZSpec,
}

impl<T: Real> VarianceModel<T> {
    /// Floored `g(z_i'ϑ)` for every row of `x`.
    pub fn g_values(&self, x: &DMatrix<T>) -> Result<Vec<T>> {
        let z = self.z_spec.build(x)?;
        let v = z * &self.theta;
        Ok(v.iter().map(|vi| self.kind.floored(*vi)).collect())
    }
}

pub fn variance_objective<T: Real>(
    z: &DMatrix<T>,
    r: &DVector<T>,
    kind: VarianceKind,
    theta: &DVector<T>,
) -> T {
    let v = z * theta;
    v.iter()
        .zip(r.iter())
        .fold(T::zero(), |acc, (vi, ri)| {
            let e = *ri - kind.eval(*vi);
            acc + e * e
        })
}

fn gauss_newton<T: Real>(
    z: &DMatrix<T>,
    r: &DVector<T>,
    kind: VarianceKind,
    start: DVector<T>,
) -> Option<(DVector<T>, T)> {
    let mut theta = start;
    let mut obj = variance_objective(z, r, kind, &theta);
    if !obj.finite() {
        return None;
    }
    for _ in 0..GN_MAX_ITER {
        let v = z * &theta;
        let e = DVector::from_iterator(r.len(), v.iter().zip(r.iter()).map(|(vi, ri)| *ri - kind.eval(*vi)));
        let mut jac = z.clone();
        for (i, vi) in v.iter().enumerate() {
            jac.row_mut(i).scale_mut(kind.derivative(*vi));
        }
        let grad = jac.transpose() * &e * T::lit(-2.0);
        if grad.norm() < T::lit(GN_GRAD_TOL) {
            break;
        }
        let step = jac.svd(true, true).solve(&e, T::default_epsilon()).ok()?;
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..=GN_MAX_HALVINGS {
            let cand = &theta + &step * t;
            let cand_obj = variance_objective(z, r, kind, &cand);
            if cand_obj.finite() && cand_obj < obj {
                let moved = (&cand - &theta).amax();
                theta = cand;
                obj = cand_obj;
                accepted = true;
                if moved <= T::default_epsilon() * (theta.amax() + T::one()) {
                    return Some((theta, obj));
                }
                break;
            }
            t *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    Some((theta, obj))
}

/// `argmin_ϑ Σ (R_i - g(z_i'ϑ))²` by damped Gauss–Newton from `init_theta`
/// and five random perturbations of it; returns the best local minimizer.
pub fn variance_fit<T: Real>(
    z: &DMatrix<T>,
    r: &DVector<T>,
    kind: VarianceKind,
    init_theta: &DVector<T>,
) -> Result<DVector<T>> {
    if z.nrows() != r.len() || z.ncols() == 0 || init_theta.len() != z.ncols() {
        return Err(Error::InvalidInput("variance fit dimensions disagree".into()));
    }
    if r.iter().any(|v| !v.finite() || *v < T::zero()) {
        return Err(Error::InvalidInput("absolute residuals must be finite and nonnegative".into()));
    }
    let norm = init_theta.norm();
    let spread = if norm > T::zero() { norm * T::lit(0.5) } else { T::lit(0.5) };
    let mut rng = ChaCha8Rng::seed_from_u64(MULTISTART_SEED);
    let mut starts = vec![init_theta.clone()];
    for _ in 0..MULTISTARTS {
        starts.push(init_theta.map(|t| {
            let u: f64 = StandardNormal.sample(&mut rng);
            t + spread * T::lit(u)
        }));
    }
    starts
        .into_iter()
        .filter_map(|s| gauss_newton(z, r, kind, s))
        .filter(|(th, o)| o.finite() && th.iter().all(|v| v.finite()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite objectives"))
        .map(|(th, _)| th)
        .ok_or(Error::VarianceFitFailed)
}

/// Step-3 fit and the quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct HpwlsFit<T: Real> {
    /// PWLS fit of the `g`-scaled problem; its residuals are `r_i / g_i`.
    pub fit: PwlsFit<T>,
    pub variance: VarianceModel<T>,
    /// Step-1 homogeneous coefficients.
    pub beta_homo: DVector<T>,
    /// Floored `g(z_i'ϑ̂)`.
    pub g: Vec<T>,
    /// Penalty scales of the step-3 fit.
    pub scales: PenaltyScales<T>,
}

impl<T: Real> HpwlsFit<T> {
    pub fn beta(&self) -> &DVector<T> {
        &self.fit.beta
    }

    pub fn w(&self) -> &DVector<T> {
        &self.fit.w
    }

    pub fn flagged(&self) -> &[usize] {
        &self.fit.flagged
    }
}

/// Solution path of the step-3 problem.
#[derive(Debug, Clone, PartialEq)]
pub struct HpwlsPath<T: Real> {
    pub path: SolutionPath<T>,
    pub variance: VarianceModel<T>,
    pub beta_homo: DVector<T>,
    /// The row-scaled data the path was computed on.
    pub scaled: Dataset<T>,
}

/// Divides each row of `data` by its floored `g(z_i'ϑ)`.
pub fn scale_by_variance<T: Real>(data: &Dataset<T>, variance: &VarianceModel<T>) -> Result<(Dataset<T>, Vec<T>)> {
    let g = variance.g_values(data.x())?;
    let inv: Vec<T> = g.iter().map(|v| T::one() / *v).collect();
    Ok((data.scale_rows(&inv), g))
}

/// Step 2: absolute residuals at `beta_homo` regressed on `g(z'ϑ)`.
pub fn estimate_variance<T: Real>(
    data: &Dataset<T>,
    beta_homo: &DVector<T>,
    z_spec: &ZSpec,
    kind: VarianceKind,
) -> Result<VarianceModel<T>> {
    let r = data.residuals(beta_homo).abs();
    let z = z_spec.build(data.x())?;
    let theta = variance_fit(&z, &r, kind, &z_spec.default_theta())?;
    Ok(VarianceModel {
        kind,
        theta,
        z_spec: z_spec.clone(),
    })
}

/// Step 3 alone at a fixed variance model.
pub fn step3_fit<T: Real>(
    data: &Dataset<T>,
    variance: &VarianceModel<T>,
    scales: &PenaltyScales<T>,
    lambda: T,
    init_beta: &DVector<T>,
    init_w: &DVector<T>,
    config: &SolverConfig<T>,
) -> Result<(PwlsFit<T>, Vec<T>)> {
    let (scaled, g) = scale_by_variance(data, variance)?;
    let fit = solver::fit(&scaled, lambda, scales, init_beta, init_w, config)?;
    Ok((fit, g))
}

/// All three steps at one `λ`, each PWLS step started from the pilot
/// estimates of its own (raw or scaled) problem.
pub fn hpwls_fit<T: Real>(
    data: &Dataset<T>,
    z_spec: &ZSpec,
    kind: VarianceKind,
    scales: &PenaltyScales<T>,
    lambda: T,
    config: &SolverConfig<T>,
) -> Result<HpwlsFit<T>> {
    let init = solver::initial_estimates(data, config)?;
    let homo = solver::fit(data, lambda, scales, &init.beta, &init.w, config)?;
    let variance = estimate_variance(data, &homo.beta, z_spec, kind)?;
    let (scaled, g) = scale_by_variance(data, &variance)?;
    let init3 = solver::initial_estimates(&scaled, config)?;
    let fit = solver::fit(&scaled, lambda, scales, &init3.beta, &init3.w, config)?;
    Ok(HpwlsFit {
        fit,
        variance,
        beta_homo: homo.beta,
        g,
        scales: scales.clone(),
    })
}

/// [`hpwls_fit`] with adaptive penalty scales recomputed for each step from
/// that step's own pilot estimates.
pub fn hpwls_adaptive_fit<T: Real>(
    data: &Dataset<T>,
    z_spec: &ZSpec,
    kind: VarianceKind,
    lambda: T,
    config: &SolverConfig<T>,
) -> Result<HpwlsFit<T>> {
    let init = solver::initial_estimates(data, config)?;
    let scales = solver::adaptive_scales(&init.w);
    let homo = solver::fit(data, lambda, &scales, &init.beta, &init.w, config)?;
    let variance = estimate_variance(data, &homo.beta, z_spec, kind)?;
    let (scaled, g) = scale_by_variance(data, &variance)?;
    let init3 = solver::initial_estimates(&scaled, config)?;
    let scales3 = solver::adaptive_scales(&init3.w);
    let fit = solver::fit(&scaled, lambda, &scales3, &init3.beta, &init3.w, config)?;
    Ok(HpwlsFit {
        fit,
        variance,
        beta_homo: homo.beta,
        g,
        scales: scales3,
    })
}

/// Homogeneous path tuned by BIC for step 1, then the step-3 path on the
/// scaled problem, both with the given penalty scales.
pub fn hpwls_path<T: Real>(
    data: &Dataset<T>,
    z_spec: &ZSpec,
    kind: VarianceKind,
    scales: &PenaltyScales<T>,
    config: &SolverConfig<T>,
) -> Result<HpwlsPath<T>> {
    let homo = solver::solution_path(data, scales, config)?;
    let pick = tuning::select_bic(&homo, data);
    let beta_homo = homo.fits[pick.index].beta.clone();
    let variance = estimate_variance(data, &beta_homo, z_spec, kind)?;
    let (scaled, _) = scale_by_variance(data, &variance)?;
    let path = solver::solution_path(&scaled, scales, config)?;
    Ok(HpwlsPath {
        path,
        variance,
        beta_homo,
        scaled,
    })
}

/// [`hpwls_path`] with adaptive penalty scales recomputed for each step
/// from that step's own pilot estimates.
pub fn hpwls_adaptive_path<T: Real>(
    data: &Dataset<T>,
    z_spec: &ZSpec,
    kind: VarianceKind,
    config: &SolverConfig<T>,
) -> Result<HpwlsPath<T>> {
    let init = solver::initial_estimates(data, config)?;
    let scales = solver::adaptive_scales(&init.w);
    let homo = solver::solution_path(data, &scales, config)?;
    let pick = tuning::select_bic(&homo, data);
    let beta_homo = homo.fits[pick.index].beta.clone();
    let variance = estimate_variance(data, &beta_homo, z_spec, kind)?;
    let (scaled, _) = scale_by_variance(data, &variance)?;
    let init3 = solver::initial_estimates(&scaled, config)?;
    let scales3 = solver::adaptive_scales(&init3.w);
    let path = solver::solution_path(&scaled, &scales3, config)?;
    Ok(HpwlsPath {
        path,
        variance,
        beta_homo,
        scaled,
    })
}
