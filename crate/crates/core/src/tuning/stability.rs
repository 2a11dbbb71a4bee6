use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::kappa;
use crate::error::{Error, Result};
use crate::numerics::{self, Dataset};
use crate::scalar::Real;
use crate::solver::{self, PenaltyScales, PwlsFit, SolverConfig};

/// A grid point errors when more than this fraction of its pairs failed.
pub const MAX_PAIR_FAILURE_RATE: f64 = 0.2;

/// Positive i.i.d. loss multipliers with unit mean and unit variance
/// (standard exponential draws).
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWeights<T: Real> {
    pub omega: Vec<T>,
    pub seed: u64,
}

impl<T: Real> RandomWeights<T> {
    /// `ω ≡ 1`; reduces the perturbed fit to the ordinary one.
    pub fn ones(n: usize) -> Self {
        Self {
            omega: vec![T::one(); n],
            seed: 0,
        }
    }
}

pub fn draw_weights<T: Real>(n: usize, seed: u64) -> RandomWeights<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = (0..n)
        .map(|_| {
            let v: f64 = rng.sample(Exp1);
            let t = T::lit(v);
            if t > T::zero() {
                t
            } else {
                T::default_epsilon()
            }
        })
        .collect();
    RandomWeights { omega, seed }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T: Real> {
    pub lambdas: Vec<T>,
    /// Mean kappa between paired perturbed flagged sets, per grid point.
    pub s_curve: Vec<T>,
    /// `n × grid` outlier probabilities.
    pub outlier_prob: DMatrix<T>,
    /// Pairs excluded at each grid point because a perturbed fit failed.
    pub failed_pairs: Vec<usize>,
    pub index: usize,
    pub lambda: T,
    /// Number of weight pairs.
    pub pairs: usize,
    pub seed: u64,
}

fn weighted_start<T: Real>(data: &Dataset<T>, omega: &[T]) -> Result<DVector<T>> {
    numerics::weighted_lstsq(data.x(), data.y(), Some(omega))
}

/// Minimizes `Σ ω_i w_i² r_i² + λ Σ ϖ_i |log w_i|`, started from unit weights.
pub fn perturbed_fit<T: Real>(
    data: &Dataset<T>,
    lambda: T,
    scales: &PenaltyScales<T>,
    omega: &RandomWeights<T>,
    config: &SolverConfig<T>,
) -> Result<PwlsFit<T>> {
    if omega.omega.len() != data.n() {
        return Err(Error::InvalidInput("one random weight per observation".into()));
    }
    let beta = weighted_start(data, &omega.omega)?;
    let w = DVector::from_element(data.n(), T::one());
    solver::fit_weighted(data, lambda, scales, Some(&omega.omega), &beta, &w, config)
}

/// Flagged sets along the grid for one perturbation, warm-started down the
/// grid; a failed grid point yields `None` and the chain restarts cold.
fn perturbed_chain<T: Real>(
    data: &Dataset<T>,
    lambdas: &[T],
    scales: &PenaltyScales<T>,
    omega: &[T],
    config: &SolverConfig<T>,
) -> Vec<Option<Vec<usize>>> {
    let n = data.n();
    let cold = match weighted_start(data, omega) {
        Ok(b) => b,
        Err(_) => return vec![None; lambdas.len()],
    };
    let ones = DVector::from_element(n, T::one());
    let mut beta = cold.clone();
    let mut w = ones.clone();
    lambdas
        .iter()
        .map(|&lambda| {
            match solver::fit_weighted(data, lambda, scales, Some(omega), &beta, &w, config) {
                Ok(f) => {
                    beta = f.beta;
                    w = f.w;
                    Some(f.flagged)
                }
                Err(e) => {
                    log::debug!("perturbed fit failed at lambda {}: {e}", lambda.to_f64_lossy());
                    beta.copy_from(&cold);
                    w.copy_from(&ones);
                    None
                }
            }
        })
        .collect()
}

/// Random-weighting stability selection with `pairs` freshly drawn pairs.
///
/// Sub-seeds for the `2·pairs` weight vectors come from one ChaCha stream
/// seeded with `seed`, so the report is a pure function of its inputs.
pub fn stability_curve<T: Real>(
    data: &Dataset<T>,
    lambdas: &[T],
    scales: &PenaltyScales<T>,
    pairs: usize,
    seed: u64,
    config: &SolverConfig<T>,
) -> Result<StabilityReport<T>> {
    if pairs == 0 {
        return Err(Error::InvalidInput("need at least one weight pair".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let drawn: Vec<(RandomWeights<T>, RandomWeights<T>)> = (0..pairs)
        .map(|_| {
            let a = master.random::<u64>();
            let b = master.random::<u64>();
            (draw_weights(data.n(), a), draw_weights(data.n(), b))
        })
        .collect();
    let mut report = stability_curve_with_pairs(data, lambdas, scales, &drawn, config)?;
    report.seed = seed;
    Ok(report)
}

/// [`stability_curve`] on caller-supplied weight pairs.
///
/// `Ŝ(λ)` averages kappa over the pairs whose two fits both succeeded;
/// `P̂_i(λ)` is the fraction of those fits flagging `i`. The selected `λ̂`
/// maximizes `Ŝ` over grid points where some perturbed fit flags anything
/// (ties toward larger `λ`); when no grid point flags anything the top of
/// the grid is returned.
pub fn stability_curve_with_pairs<T: Real>(
    data: &Dataset<T>,
    lambdas: &[T],
    scales: &PenaltyScales<T>,
    pairs: &[(RandomWeights<T>, RandomWeights<T>)],
    config: &SolverConfig<T>,
) -> Result<StabilityReport<T>> {
    config.validate()?;
    if pairs.is_empty() || lambdas.is_empty() {
        return Err(Error::InvalidInput("need weight pairs and a nonempty grid".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("lambda grid must be strictly decreasing".into()));
    }
    let n = data.n();
    if pairs
        .iter()
        .any(|(a, b)| a.omega.len() != n || b.omega.len() != n)
    {
        return Err(Error::InvalidInput("one random weight per observation".into()));
    }
    let vectors: Vec<&[T]> = pairs
        .iter()
        .flat_map(|(a, b)| [a.omega.as_slice(), b.omega.as_slice()])
        .collect();
    // collect() keeps chain order, so the reduction below is scheduling-independent
    let chains: Vec<Vec<Option<Vec<usize>>>> = vectors
        .par_iter()
        .map(|om| perturbed_chain(data, lambdas, scales, om, config))
        .collect();

    let grid = lambdas.len();
    let mut s_curve = Vec::with_capacity(grid);
    let mut failed_pairs = Vec::with_capacity(grid);
    let mut outlier_prob = DMatrix::zeros(n, grid);
    let mut informative = vec![false; grid];
    for k in 0..grid {
        let mut total = T::zero();
        let mut ok = 0usize;
        let mut counts = vec![0usize; n];
        for b in 0..pairs.len() {
            let (Some(first), Some(second)) = (&chains[2 * b][k], &chains[2 * b + 1][k]) else {
                continue;
            };
            ok += 1;
            total += kappa(first, second, n);
            for &i in first.iter().chain(second.iter()) {
                counts[i] += 1;
            }
        }
        let failed = pairs.len() - ok;
        if failed as f64 > MAX_PAIR_FAILURE_RATE * pairs.len() as f64 {
            return Err(Error::TooManyFailures {
                what: "weight pairs",
                failed,
                total: pairs.len(),
            }
            .at_lambda(lambdas[k].to_f64_lossy()));
        }
        failed_pairs.push(failed);
        s_curve.push(total / T::from_count(ok));
        let fits = T::from_count(2 * ok);
        for (i, c) in counts.iter().enumerate() {
            outlier_prob[(i, k)] = T::from_count(*c) / fits;
        }
        informative[k] = counts.iter().any(|c| *c > 0);
    }

    let mut index: Option<usize> = None;
    for k in (0..grid).filter(|k| informative[*k]) {
        match index {
            Some(best) if s_curve[k] <= s_curve[best] => {}
            _ => index = Some(k),
        }
    }
    let index = index.unwrap_or(0);
    Ok(StabilityReport {
        lambdas: lambdas.to_vec(),
        lambda: lambdas[index],
        s_curve,
        outlier_prob,
        failed_pairs,
        index,
        pairs: pairs.len(),
        seed: 0,
    })
}
