use serde::Serialize;

use pwls::hetero::{self, VarianceKind, ZSpec};
use pwls::m_equiv::{self, MConfig};
use pwls::simbench::{self, REPORT_HEADER};
use pwls::{solver, tuning, Dataset64, PenaltyScales64, PwlsFit64, SolutionPath64, SolverConfig64, VarianceModel64};

use crate::args::{BenchArgs, CheckArgs, DataArgs, FitArgs, Format, MethodArg, MethodArgs, PathArgs, TuneArgs, Tuner};
use crate::bench::parse_bench;
use crate::data::{load_csv, Loaded};
use crate::error::{CliError, Result};
use crate::output::{csv_table, fmt_csv, Artifacts};

#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub kind: String,
    /// `z` columns after the intercept.
    pub z_columns: Vec<String>,
    pub theta: Vec<f64>,
    /// Floored `g(z_i'θ)`, one per observation.
    pub g: Vec<f64>,
}

/// Everything needed to rescore a fit offline: with `r` the residuals of
/// the (for hpwls, g-scaled) data at `beta`, the objective is
/// `Σ w_i² r_i² + λ Σ varpi_i |log w_i|`.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub method: String,
    pub response: String,
    pub lambda: f64,
    pub columns: Vec<String>,
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
    pub residuals: Vec<f64>,
    pub varpi: Vec<f64>,
    /// 1-based observation ids with `w < 1`.
    pub flagged: Vec<usize>,
    pub sigma2: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub variance: Option<VarianceReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub tuner: String,
    pub lambda_hat: f64,
    /// 1-based position of `lambda_hat` on the grid.
    pub grid_index: usize,
    pub grid_size: usize,
    pub pairs: Option<usize>,
    pub seed: Option<u64>,
    pub fit: FitReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub lambda: f64,
    pub c: f64,
    pub beta_gap: f64,
    pub sigma_gap: f64,
    pub pass: bool,
}

fn load(args: &DataArgs) -> Result<Loaded> {
    load_csv(
        &args.input,
        &args.response,
        args.predictors.as_deref(),
        !args.no_intercept,
        args.delimiter,
    )
}

/// Variance model settings for hpwls.
struct HeteroSpec {
    kind: VarianceKind,
    z: ZSpec,
}

fn hetero_spec(loaded: &Loaded, m: &MethodArgs) -> Result<HeteroSpec> {
    let kind: VarianceKind = m.g.parse()?;
    let z = match &m.z_cols {
        None => ZSpec::intercept_and_last(loaded.data.p()),
        Some(names) => ZSpec {
            intercept: true,
            columns: names.iter().map(|n| loaded.column_index(n)).collect::<Result<_>>()?,
        },
    };
    Ok(HeteroSpec { kind, z })
}

fn variance_report(loaded: &Loaded, model: &VarianceModel64, g: Vec<f64>) -> VarianceReport {
    VarianceReport {
        kind: match model.kind {
            VarianceKind::Absolute => "abs",
            VarianceKind::ExpAbsolute => "exp-abs",
            VarianceKind::SqrtAbsolute => "sqrt-abs",
            VarianceKind::Identity => "identity",
        }
        .to_string(),
        z_columns: model.z_spec.columns.iter().map(|&j| loaded.columns[j].clone()).collect(),
        theta: model.theta.iter().copied().collect(),
        g,
    }
}

fn fit_report(
    method: MethodArg,
    loaded: &Loaded,
    fit: &PwlsFit64,
    scales: &PenaltyScales64,
    variance: Option<VarianceReport>,
) -> FitReport {
    FitReport {
        method: method.name().to_string(),
        response: loaded.response.clone(),
        lambda: fit.lambda,
        columns: loaded.columns.clone(),
        beta: fit.beta.iter().copied().collect(),
        w: fit.w.iter().copied().collect(),
        residuals: fit.residuals.iter().copied().collect(),
        varpi: scales.varpi().iter().copied().collect(),
        flagged: fit.flagged.iter().map(|i| i + 1).collect(),
        sigma2: fit.sigma2,
        objective: fit.objective,
        iterations: fit.iterations,
        converged: fit.converged,
        variance,
    }
}

fn scales_for(method: MethodArg, data: &Dataset64, config: &SolverConfig64) -> Result<PenaltyScales64> {
    Ok(match method {
        MethodArg::Pwls => PenaltyScales64::uniform(data.n()),
        _ => solver::adaptive_scales(&solver::initial_estimates(data, config)?.w),
    })
}

/// A path with the data it was computed on.
struct Working {
    data: Dataset64,
    path: SolutionPath64,
    variance: Option<VarianceReport>,
}

fn working_path(loaded: &Loaded, m: &MethodArgs, config: &SolverConfig64) -> Result<Working> {
    if m.method == MethodArg::Hpwls {
        let spec = hetero_spec(loaded, m)?;
        let h = hetero::hpwls_adaptive_path(&loaded.data, &spec.z, spec.kind, config)?;
        let g = h.variance.g_values(loaded.data.x())?;
        let variance = Some(variance_report(loaded, &h.variance, g));
        return Ok(Working {
            data: h.scaled,
            path: h.path,
            variance,
        });
    }
    let scales = scales_for(m.method, &loaded.data, config)?;
    let path = solver::solution_path(&loaded.data, &scales, config)?;
    Ok(Working {
        data: loaded.data.clone(),
        path,
        variance: None,
    })
}

fn fit_csv(r: &FitReport) -> String {
    let mut rows: Vec<[String; 3]> = Vec::new();
    let scalar = |k: &str, v: String| [k.to_string(), String::new(), v];
    rows.push(scalar("method", r.method.clone()));
    rows.push(scalar("lambda", fmt_csv(r.lambda)));
    rows.push(scalar("sigma2", fmt_csv(r.sigma2)));
    rows.push(scalar("objective", fmt_csv(r.objective)));
    rows.push(scalar("iterations", r.iterations.to_string()));
    rows.push(scalar("converged", r.converged.to_string()));
    for (name, b) in r.columns.iter().zip(&r.beta) {
        rows.push(["beta".into(), name.clone(), fmt_csv(*b)]);
    }
    for (i, w) in r.w.iter().enumerate() {
        rows.push(["w".into(), (i + 1).to_string(), fmt_csv(*w)]);
    }
    for id in &r.flagged {
        rows.push(["flagged".into(), id.to_string(), "1".into()]);
    }
    if let Some(v) = &r.variance {
        rows.push(scalar("g_kind", v.kind.clone()));
        for (k, t) in v.theta.iter().enumerate() {
            rows.push(["theta".into(), k.to_string(), fmt_csv(*t)]);
        }
    }
    csv_table(&["field", "key", "value"], rows)
}

fn add_report<S: Serialize>(art: &mut Artifacts, stem: &str, format: Format, report: &S, csv: impl FnOnce() -> String) {
    match format {
        Format::Json => art.add_json(&format!("{stem}.json"), report),
        Format::Csv => art.add(&format!("{stem}.csv"), csv()),
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<Artifacts> {
    let loaded = load(&args.data)?;
    let config = SolverConfig64::default();
    let report = if args.method.method == MethodArg::Hpwls {
        let spec = hetero_spec(&loaded, &args.method)?;
        let h = hetero::hpwls_adaptive_fit(&loaded.data, &spec.z, spec.kind, args.lambda, &config)?;
        let v = variance_report(&loaded, &h.variance, h.g.clone());
        fit_report(MethodArg::Hpwls, &loaded, &h.fit, &h.scales, Some(v))
    } else {
        let init = solver::initial_estimates(&loaded.data, &config)?;
        let scales = scales_for(args.method.method, &loaded.data, &config)?;
        let fit = solver::fit(&loaded.data, args.lambda, &scales, &init.beta, &init.w, &config)?;
        fit_report(args.method.method, &loaded, &fit, &scales, None)
    };
    if !report.converged {
        log::warn!("fit stopped after {} iterations without converging", report.iterations);
    }
    let mut art = Artifacts::default();
    add_report(&mut art, "fit", args.out.format, &report, || fit_csv(&report));
    Ok(art)
}

fn path_csv(path: &SolutionPath64) -> String {
    let rows = path.fits.iter().flat_map(|f| {
        f.w.iter()
            .enumerate()
            .map(move |(i, w)| vec![fmt_csv(f.lambda), (i + 1).to_string(), fmt_csv(*w)])
    });
    csv_table(&["lambda", "obs_id", "weight"], rows)
}

fn solver_config(grid_size: usize) -> SolverConfig64 {
    SolverConfig64 {
        grid_size,
        ..Default::default()
    }
}

pub fn cmd_path(args: &PathArgs) -> Result<Artifacts> {
    let loaded = load(&args.data)?;
    let work = working_path(&loaded, &args.method, &solver_config(args.grid_size))?;
    let mut art = Artifacts::default();
    art.add("path.csv", path_csv(&work.path));
    Ok(art)
}

pub fn cmd_tune(args: &TuneArgs) -> Result<Artifacts> {
    let loaded = load(&args.data)?;
    let config = solver_config(args.grid_size);
    let work = working_path(&loaded, &args.method, &config)?;
    let path = &work.path;
    let mut art = Artifacts::default();
    let (index, pairs, seed) = match args.tuner {
        Tuner::Bic => {
            let pick = tuning::select_bic(path, &work.data);
            let rows = path
                .lambdas
                .iter()
                .zip(&pick.values)
                .map(|(l, b)| vec![fmt_csv(*l), fmt_csv(*b)]);
            art.add("bic.csv", csv_table(&["lambda", "BIC"], rows));
            (pick.index, None, None)
        }
        Tuner::Stability => {
            let rep = tuning::stability_curve(&work.data, &path.lambdas, &path.scales, args.pairs, args.seed, &config)?;
            let n = work.data.n();
            let probs = (0..path.lambdas.len()).flat_map(|k| {
                let lambda = fmt_csv(path.lambdas[k]);
                let col = rep.outlier_prob.column(k).clone_owned();
                (0..n).map(move |i| vec![lambda.clone(), (i + 1).to_string(), fmt_csv(col[i])])
            });
            art.add("probs.csv", csv_table(&["lambda", "obs_id", "prob"], probs));
            let curve = path
                .lambdas
                .iter()
                .zip(&rep.s_curve)
                .map(|(l, s)| vec![fmt_csv(*l), fmt_csv(*s)]);
            art.add("stability.csv", csv_table(&["lambda", "S"], curve));
            let failed: usize = rep.failed_pairs.iter().sum();
            if failed > 0 {
                log::warn!("{failed} perturbed pair fits failed across the grid");
            }
            (rep.index, Some(args.pairs), Some(args.seed))
        }
    };
    let fit = fit_report(args.method.method, &loaded, &path.fits[index], &path.scales, work.variance.clone());
    let report = TuneReport {
        tuner: match args.tuner {
            Tuner::Bic => "bic",
            Tuner::Stability => "stability",
        }
        .to_string(),
        lambda_hat: path.lambdas[index],
        grid_index: index + 1,
        grid_size: path.lambdas.len(),
        pairs,
        seed,
        fit,
    };
    add_report(&mut art, "tune", args.out.format, &report, || {
        let mut text = csv_table(
            &["field", "key", "value"],
            vec![
                vec!["tuner".into(), String::new(), report.tuner.clone()],
                vec!["lambda_hat".into(), String::new(), fmt_csv(report.lambda_hat)],
                vec!["grid_index".into(), String::new(), report.grid_index.to_string()],
            ],
        );
        // fit rows follow without a second header
        text.push_str(fit_csv(&report.fit).split_once('\n').map_or("", |(_, rest)| rest));
        text
    });
    Ok(art)
}

/// Writes the comparison even when it fails, then reports the failure.
pub fn cmd_check_theorem1(args: &CheckArgs) -> Result<(Artifacts, Option<CliError>)> {
    let loaded = load(&args.data)?;
    let config = MConfig {
        c: args.c,
        ..MConfig::new(args.lambda)
    };
    let rep = m_equiv::theorem1_check(&loaded.data, &config)?;
    let report = EquivalenceReport {
        lambda: args.lambda,
        c: args.c,
        beta_gap: rep.beta_gap,
        sigma_gap: rep.sigma_gap,
        pass: rep.pass,
    };
    let mut art = Artifacts::default();
    add_report(&mut art, "theorem1", args.out.format, &report, || {
        csv_table(
            &["lambda", "c", "beta_gap", "sigma_gap", "pass"],
            [vec![
                fmt_csv(report.lambda),
                fmt_csv(report.c),
                fmt_csv(report.beta_gap),
                fmt_csv(report.sigma_gap),
                report.pass.to_string(),
            ]],
        )
    });
    let failure = (!rep.pass).then_some(CliError::EquivalenceFailed {
        beta_gap: rep.beta_gap,
        sigma_gap: rep.sigma_gap,
    });
    Ok((art, failure))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Artifacts> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Read {
        path: args.config.clone(),
        source,
    })?;
    let cells = parse_bench(&text, args.seed)?;
    let mut rows = Vec::with_capacity(cells.len());
    for cell in &cells {
        log::info!(
            "{} {} k={} p={}: {} reps from seed {}",
            cell.method.name(),
            cell.config.scenario(),
            cell.config.k(),
            cell.config.p(),
            cell.reps,
            cell.seed
        );
        let report = simbench::run_benchmark(cell.method, &cell.config, cell.reps, cell.seed)?;
        rows.push(simbench::report_row(cell.method, &cell.config, &report));
    }
    let mut art = Artifacts::default();
    art.add("bench.csv", csv_table(&REPORT_HEADER, rows));
    Ok(art)
}
