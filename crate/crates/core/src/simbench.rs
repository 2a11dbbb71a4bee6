//! Simulation designs with planted mean-shift outliers, detection metrics and
//! a repetition runner.
//!
//! Metrics follow the usual outlier-detection conventions: masking `M` is the
//! fraction of true outliers left unflagged, swamping `S` the fraction of
//! clean observations flagged, and the joint-detection rate `JD` the share of
//! repetitions with no masking at all.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hetero::{self, VarianceKind, VarianceModel, ZSpec};
use crate::numerics::Dataset;
use crate::solver::{self, SolverConfig};
use crate::tuning;

/// Share of failed repetitions above which a benchmark errors.
pub const MAX_REP_FAILURE_RATE: f64 = 0.05;

/// Homoscedastic design: `y_i = x_i'1 + γ_i + ε_i` with `X = UΣ^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomoSimConfig {
    pub n: usize,
    pub p: usize,
    /// Number of outliers; they occupy the first `k` rows.
    pub k: usize,
    /// Mean shift of each outlier.
    pub r: f64,
    /// When set, outlier rows of `X` are replaced by `L·1_p`.
    pub leverage: Option<f64>,
    pub seed: u64,
}

impl Default for HomoSimConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            p: 15,
            k: 100,
            r: 5.0,
            leverage: None,
            seed: 0,
        }
    }
}

impl HomoSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.k >= self.n || self.n <= self.p {
            return Err(Error::InvalidInput("need 0 < p < n and k < n".into()));
        }
        if !self.r.is_finite() || self.r < 0.0 || self.leverage.is_some_and(|l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidInput("shift and leverage must be finite and positive".into()));
        }
        Ok(())
    }
}

/// Correct specification or misspecification of the variance function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeteroCase {
    /// True and fitted `g(v) = |v|`.
    Correct,
    /// True `g(v) = e^|v|`, fitted `g(v) = √|v|`.
    Misspecified,
}

impl HeteroCase {
    pub fn true_kind(self) -> VarianceKind {
        match self {
            HeteroCase::Correct => VarianceKind::Absolute,
            HeteroCase::Misspecified => VarianceKind::ExpAbsolute,
        }
    }

    pub fn fitted_kind(self) -> VarianceKind {
        match self {
            HeteroCase::Correct => VarianceKind::Absolute,
            HeteroCase::Misspecified => VarianceKind::SqrtAbsolute,
        }
    }
}

/// Heteroscedastic design: `y_i = x_i'1 + (γ_i + e_i) g(z_i'ϑ)` with
/// `z_i = (1, x_ip)'`, `x_i ~ N(0, Σ)`, `Σ_jl = 0.5^|j-l|` and
/// `e_i ~ N(0, π/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroSimConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub r: f64,
    pub case: HeteroCase,
    pub theta: [f64; 2],
    pub seed: u64,
}

impl Default for HeteroSimConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            p: 15,
            k: 10,
            r: 20.0,
            case: HeteroCase::Correct,
            theta: [1.0, 0.7],
            seed: 0,
        }
    }
}

impl HeteroSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.k >= self.n || self.n <= self.p {
            return Err(Error::InvalidInput("need 0 < p < n and k < n".into()));
        }
        if !self.r.is_finite() || self.r < 0.0 || self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("shift and variance parameters must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimConfig {
    Homo(HomoSimConfig),
    Hetero(HeteroSimConfig),
}

impl SimConfig {
    fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        match &mut c {
            SimConfig::Homo(h) => h.seed = seed,
            SimConfig::Hetero(h) => h.seed = seed,
        }
        c
    }

    pub fn k(&self) -> usize {
        match self {
            SimConfig::Homo(h) => h.k,
            SimConfig::Hetero(h) => h.k,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            SimConfig::Homo(h) => h.p,
            SimConfig::Hetero(h) => h.p,
        }
    }

    /// Leverage level (`L=15`, `noL`) or shift (`r=20`) column of a report row.
    pub fn scenario(&self) -> String {
        match self {
            SimConfig::Homo(h) => match h.leverage {
                Some(l) => format!("L={l}"),
                None => "noL".into(),
            },
            SimConfig::Hetero(h) => {
                let case = match h.case {
                    HeteroCase::Correct => 1,
                    HeteroCase::Misspecified => 2,
                };
                format!("case{case}:r={}", h.r)
            }
        }
    }

    pub fn generate(&self) -> Result<(Dataset<f64>, Vec<usize>)> {
        match self {
            SimConfig::Homo(h) => gen_homo(h),
            SimConfig::Hetero(h) => gen_hetero(h).map(|(d, t, _)| (d, t)),
        }
    }
}

/// Symmetric square root through the eigendecomposition.
fn sym_sqrt(sigma: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sigma);
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

pub fn equicorrelation(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })
}

pub fn autoregressive(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// Returns the data and the 0-based indices of the planted outliers.
pub fn gen_homo(config: &HomoSimConfig) -> Result<(Dataset<f64>, Vec<usize>)> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unif = Uniform::new(-15.0, 15.0).expect("valid bounds");
    let u = DMatrix::from_fn(n, p, |_, _| unif.sample(&mut rng));
    let mut x = u * sym_sqrt(equicorrelation(p, 0.5));
    if let Some(l) = config.leverage {
        x.rows_mut(0, config.k).fill(l);
    }
    let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y = DVector::from_fn(n, |i, _| {
        let shift = if i < config.k { config.r } else { 0.0 };
        x.row(i).sum() + shift + noise[i]
    });
    Ok((Dataset::new(x, y)?, (0..config.k).collect()))
}

/// Returns the data, the planted outliers and the true variance model.
pub fn gen_hetero(config: &HeteroSimConfig) -> Result<(Dataset<f64>, Vec<usize>, VarianceModel<f64>)> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = z * sym_sqrt(autoregressive(p, 0.5));
    let model = VarianceModel {
        kind: config.case.true_kind(),
        theta: DVector::from_column_slice(&config.theta),
        z_spec: ZSpec::intercept_and_last(p),
    };
    let g = model.g_values(&x)?;
    let e_dist = Normal::new(0.0, (PI / 2.0).sqrt()).expect("positive sd");
    let y = DVector::from_fn(n, |i, _| {
        let shift = if i < config.k { config.r } else { 0.0 };
        x.row(i).sum() + (shift + e_dist.sample(&mut rng)) * g[i]
    });
    Ok((Dataset::new(x, y)?, (0..config.k).collect(), model))
}

/// Detection quality of one flagged set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub masking: f64,
    pub swamping: f64,
    pub joint: bool,
}

/// `masking = |truth \ flagged| / |truth|`, `swamping = |flagged \ truth| /
/// (n - |truth|)`; an empty truth set masks nothing.
pub fn score(truth: &[usize], flagged: &[usize], n: usize) -> Score {
    let mut is_true = vec![false; n];
    for &i in truth {
        is_true[i] = true;
    }
    let mut is_flagged = vec![false; n];
    for &i in flagged {
        is_flagged[i] = true;
    }
    let n_true = is_true.iter().filter(|v| **v).count();
    let missed = (0..n).filter(|&i| is_true[i] && !is_flagged[i]).count();
    let false_pos = (0..n).filter(|&i| !is_true[i] && is_flagged[i]).count();
    let masking = if n_true == 0 { 0.0 } else { missed as f64 / n_true as f64 };
    let swamping = if n_true == n { 0.0 } else { false_pos as f64 / (n - n_true) as f64 };
    Score {
        masking,
        swamping,
        joint: missed == 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Adaptive PWLS tuned by BIC.
    Pwls,
    /// Heteroscedastic PWLS tuned by BIC.
    Hpwls,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pwls => "pwls",
            Method::Hpwls => "hpwls",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pwls" | "apwls" => Ok(Method::Pwls),
            "hpwls" => Ok(Method::Hpwls),
            other => Err(Error::InvalidInput(format!("unknown benchmark method {other:?}"))),
        }
    }
}

/// Averages over successful repetitions, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub masking: f64,
    pub swamping: f64,
    pub joint_detection: f64,
    /// Successful repetitions.
    pub reps: usize,
    pub failures: usize,
}

/// Flagged set chosen by BIC along the adaptive path of `method`.
pub fn detect(
    method: Method,
    data: &Dataset<f64>,
    fitted: VarianceKind,
    config: &SolverConfig<f64>,
) -> Result<Vec<usize>> {
    match method {
        Method::Pwls => {
            let init = solver::initial_estimates(data, config)?;
            let scales = solver::adaptive_scales(&init.w);
            let path = solver::solution_path(data, &scales, config)?;
            let pick = tuning::select_bic(&path, data);
            Ok(path.fits[pick.index].flagged.clone())
        }
        Method::Hpwls => {
            let z_spec = ZSpec::intercept_and_last(data.p());
            let h = hetero::hpwls_adaptive_path(data, &z_spec, fitted, config)?;
            let pick = tuning::select_bic(&h.path, &h.scaled);
            Ok(h.path.fits[pick.index].flagged.clone())
        }
    }
}

/// One repetition: seed `base_seed + rep`, then generate, detect and score.
pub fn run_repetition(
    method: Method,
    config: &SimConfig,
    seed: u64,
    solver_config: &SolverConfig<f64>,
) -> Result<Score> {
    let config = config.with_seed(seed);
    let (data, truth) = config.generate()?;
    let fitted = match &config {
        SimConfig::Homo(_) => VarianceKind::Absolute,
        SimConfig::Hetero(h) => h.case.fitted_kind(),
    };
    let flagged = detect(method, &data, fitted, solver_config)?;
    Ok(score(&truth, &flagged, data.n()))
}

/// Per-repetition scores in repetition order; `None` marks a failure.
pub fn run_scores(
    method: Method,
    config: &SimConfig,
    reps: usize,
    base_seed: u64,
    solver_config: &SolverConfig<f64>,
) -> Vec<Option<Score>> {
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = base_seed.wrapping_add(rep as u64);
            run_repetition(method, config, seed, solver_config)
                .map_err(|e| log::warn!("repetition {rep} (seed {seed}) failed: {e}"))
                .ok()
        })
        .collect()
}

pub fn summarize(scores: &[Option<Score>]) -> Result<MetricsReport> {
    let ok: Vec<&Score> = scores.iter().flatten().collect();
    let failures = scores.len() - ok.len();
    if ok.is_empty() || failures as f64 > MAX_REP_FAILURE_RATE * scores.len() as f64 {
        return Err(Error::TooManyFailures {
            what: "repetitions",
            failed: failures,
            total: scores.len(),
        });
    }
    let m = ok.len() as f64;
    Ok(MetricsReport {
        masking: 100.0 * ok.iter().map(|s| s.masking).sum::<f64>() / m,
        swamping: 100.0 * ok.iter().map(|s| s.swamping).sum::<f64>() / m,
        joint_detection: 100.0 * ok.iter().filter(|s| s.joint).count() as f64 / m,
        reps: ok.len(),
        failures,
    })
}

pub fn run_benchmark(method: Method, config: &SimConfig, reps: usize, base_seed: u64) -> Result<MetricsReport> {
    if reps == 0 {
        return Err(Error::InvalidInput("need at least one repetition".into()));
    }
    let scores = run_scores(method, config, reps, base_seed, &SolverConfig::default());
    summarize(&scores)
}

pub const REPORT_HEADER: [&str; 9] = ["method", "k", "p", "scenario", "JD", "M", "S", "reps", "failures"];

/// Report fields in [`REPORT_HEADER`] order.
pub fn report_row(method: Method, config: &SimConfig, report: &MetricsReport) -> Vec<String> {
    vec![
        method.name().to_string(),
        config.k().to_string(),
        config.p().to_string(),
        config.scenario(),
        format!("{:.1}", report.joint_detection),
        format!("{:.2}", report.masking),
        format!("{:.2}", report.swamping),
        report.reps.to_string(),
        report.failures.to_string(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        let truth: Vec<usize> = (0..10).collect();
        assert_eq!(
            score(&truth, &truth, 100),
            Score { masking: 0.0, swamping: 0.0, joint: true }
        );
        assert_eq!(
            score(&truth, &[], 100),
            Score { masking: 1.0, swamping: 0.0, joint: false }
        );
        let flagged: Vec<usize> = (0..8).chain([14, 15]).collect();
        let s = score(&truth, &flagged, 100);
        assert!((s.masking - 0.2).abs() < 1e-15);
        assert!((s.swamping - 2.0 / 90.0).abs() < 1e-15);
        assert!(!s.joint);
        let empty = score(&[], &[3], 10);
        assert_eq!(empty.masking, 0.0);
        assert!(empty.joint);
    }

    #[test]
    fn homo_is_deterministic() {
        let c = HomoSimConfig { n: 200, seed: 7, ..Default::default() };
        let (a, ta) = gen_homo(&c).unwrap();
        let (b, tb) = gen_homo(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(ta.len(), 100);
        let (other, _) = gen_homo(&HomoSimConfig { seed: 8, ..c }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn leverage_rows_are_constant() {
        let c = HomoSimConfig { n: 300, k: 20, leverage: Some(15.0), seed: 1, ..Default::default() };
        let (d, _) = gen_homo(&c).unwrap();
        assert!(d.x().rows(0, 20).iter().all(|v| *v == 15.0));
        assert!(d.x()[(20, 0)] != 15.0);
    }

    #[test]
    fn sqrt_squares_back() {
        let s = equicorrelation(6, 0.5);
        let r = sym_sqrt(s.clone());
        assert!((&r * &r - s).amax() < 1e-12);
        let a = autoregressive(4, 0.5);
        assert_eq!(a[(0, 3)], 0.125);
    }

    #[test]
    fn homo_design_covariance() {
        let c = HomoSimConfig { n: 100_000, p: 3, k: 1, seed: 3, ..Default::default() };
        let (d, _) = gen_homo(&c).unwrap();
        let x = d.x();
        let n = x.nrows() as f64;
        let means: Vec<f64> = (0..3).map(|j| x.column(j).sum() / n).collect();
        for a in 0..3 {
            for b in 0..3 {
                let cov = (0..x.nrows())
                    .map(|i| (x[(i, a)] - means[a]) * (x[(i, b)] - means[b]))
                    .sum::<f64>()
                    / (n - 1.0);
                let target = 75.0 * if a == b { 1.0 } else { 0.5 };
                assert!((cov / target - 1.0).abs() < 0.03, "({a},{b}) {cov}");
            }
        }
    }

    #[test]
    fn hetero_error_has_unit_mean_absolute_value() {
        let c = HeteroSimConfig { n: 100_000, p: 2, k: 0, r: 0.0, seed: 11, ..Default::default() };
        let (d, _, model) = gen_hetero(&c).unwrap();
        let g = model.g_values(d.x()).unwrap();
        let fit = d.x() * DVector::from_element(2, 1.0);
        let mean_abs = (0..d.n()).map(|i| ((d.y()[i] - fit[i]) / g[i]).abs()).sum::<f64>() / d.n() as f64;
        assert!((mean_abs - 1.0).abs() < 0.02, "{mean_abs}");
    }

    #[test]
    fn hetero_is_deterministic() {
        let c = HeteroSimConfig { n: 100, seed: 4, ..Default::default() };
        assert_eq!(gen_hetero(&c).unwrap(), gen_hetero(&c).unwrap());
    }

    #[test]
    fn summary_rules() {
        let s = Score { masking: 0.1, swamping: 0.02, joint: false };
        let rep = summarize(&[Some(s)]).unwrap();
        assert!((rep.masking - 10.0).abs() < 1e-12);
        assert!((rep.swamping - 2.0).abs() < 1e-12);
        assert_eq!(rep.joint_detection, 0.0);
        let mut many = vec![Some(s); 19];
        many.push(None);
        assert_eq!(summarize(&many).unwrap().failures, 1);
        many.push(None);
        assert!(summarize(&many).is_err());
    }
}
