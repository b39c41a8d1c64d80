//! Subcommand implementations. Each returns the library error type; the
//! binary maps those onto exit codes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use copreg::data::Dataset;
use copreg::error::{Error, Result};
use copreg::estimator::{fit, fit_independence, FitResult};
use copreg::inference::{
    aic, bic, dependence_summary, joint_probabilities, pointwise_intervals, posterior_draws,
    predict_params, PredictedParams,
};
use copreg::model::{build, BuiltModel};
use copreg::simulate::{run_sim_study, simulate_dataset, SimDesign, SimStudyConfig};
use copreg::smooth::Adjacency;
use copreg::special::qnorm;

use super::config;
use super::persist::{self, SavedFit};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ProbMode {
    Copula,
    Independence,
}

fn bail_on_config_errors(errs: Vec<config::ConfigError>, what: &str) -> Error {
    for e in &errs {
        eprintln!("{e}");
    }
    Error::Config(format!("{} problem(s) in {what}", errs.len()))
}

fn read_adjacency(path: &Path) -> Result<Adjacency> {
    Adjacency::parse(&std::fs::read_to_string(path)?)
}

/// Fit the configured model and write a self-contained output directory:
/// the fit container, a copy of the training data (and adjacency list), and
/// a human-readable summary.
pub fn cmd_fit(config_path: &Path, data_override: Option<&Path>, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let cfg = config::parse_config(&text)
        .map_err(|e| bail_on_config_errors(e, &config_path.display().to_string()))?;

    let config_dir = config_path.parent().unwrap_or_else(|| Path::new("."));
    let data_path: PathBuf = match (data_override, &cfg.data) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => config_dir.join(p),
        (None, None) => {
            return Err(Error::Config(
                "no data source: pass --data or set 'data =' in the config".into(),
            ))
        }
    };
    let data = Dataset::from_csv_path(&data_path)?;
    let col_errs = config::check_columns(&cfg, &data);
    if !col_errs.is_empty() {
        return Err(bail_on_config_errors(col_errs, &data_path.display().to_string()));
    }
    let adj_text = match &cfg.adjacency {
        Some(p) => Some(std::fs::read_to_string(config_dir.join(p))?),
        None => None,
    };
    let adjacency = adj_text.as_deref().map(Adjacency::parse).transpose()?;

    let model = build(cfg.spec.clone(), &data, adjacency.as_ref())?;
    let result = fit(&model, &cfg.options)?;
    let indep = fit_independence(&model, &cfg.options)?;

    std::fs::create_dir_all(out)?;
    let mut train = std::fs::File::create(out.join("train.csv"))?;
    data.write_csv(&mut train)?;
    if let Some(t) = &adj_text {
        std::fs::write(out.join("adjacency.txt"), t)?;
    }
    persist::save_fit(
        &out.join("fit.txt"),
        &model.spec,
        &result,
        model.n,
        "train.csv",
        adj_text.as_ref().map(|_| "adjacency.txt"),
    )?;

    let summary = render_summary(&model, &data, &result, &indep)?;
    std::fs::write(out.join("summary.txt"), &summary)?;
    print!("{summary}");

    if !result.converged {
        return Err(Error::NonConvergence(format!(
            "fit written to {}, but the outer loop did not converge; see its warnings",
            out.display()
        )));
    }
    Ok(())
}

fn render_summary(
    model: &BuiltModel,
    data: &Dataset,
    res: &FitResult,
    indep: &(
        copreg::estimator::MarginFitResult,
        copreg::estimator::MarginFitResult,
    ),
) -> Result<String> {
    let spec = &model.spec;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "model: {} / {} margins, {} copula   n = {}",
        spec.margin1.tag(),
        spec.margin2.tag(),
        spec.copula.tag(),
        model.n
    );
    let _ = writeln!(
        s,
        "converged: {}   outer iterations: {}   gradient norm: {:.2e}",
        res.converged, res.outer_iters, res.grad_norm
    );
    let _ = writeln!(
        s,
        "loglik: {:.4}   penalized: {:.4}   edf: {:.3}",
        res.loglik, res.penalized_loglik, res.edf
    );
    let _ = writeln!(
        s,
        "aic: {:.4}   bic: {:.4}",
        aic(res.loglik, res.edf),
        bic(res.loglik, res.edf, model.n)
    );
    let _ = writeln!(s, "equation edf:");
    for (name, e) in &res.edf_by_equation {
        let _ = writeln!(s, "  {name:>8}  {e:.3}");
    }
    if !res.lambdas.is_empty() {
        let _ = writeln!(s, "smoothing parameters:");
        for (l, v) in res.lambda_labels.iter().zip(&res.lambdas) {
            let _ = writeln!(s, "  {l:>24}  {v:.4e}");
        }
    }
    let pred = predict_params(model, &res.delta, data)?;
    let dep = dependence_summary(model, &pred.theta);
    let (tmin, tmax) = dep
        .tau
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
            (lo.min(t), hi.max(t))
        });
    let _ = writeln!(
        s,
        "dependence: mean theta {:.4}   mean tau {:.4}   tau range [{:.4}, {:.4}]",
        dep.theta_mean, dep.tau_mean, tmin, tmax
    );
    let (m1, m2) = indep;
    let il = m1.loglik + m2.loglik;
    let ie = m1.edf + m2.edf;
    let _ = writeln!(
        s,
        "margins alone (independence): loglik {:.4}   edf {:.3}   aic {:.4}",
        il,
        ie,
        aic(il, ie)
    );
    let _ = writeln!(
        s,
        "  joint model changes aic by {:+.4}",
        aic(res.loglik, res.edf) - aic(il, ie)
    );
    for w in &res.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    Ok(s)
}

/// Reload a saved fit and rebuild its model on the stored training data.
fn rebuild(saved: &SavedFit) -> Result<(BuiltModel, Dataset)> {
    let train = Dataset::from_csv_path(&saved.data)?;
    if train.n != saved.n {
        return Err(Error::InvalidInput(format!(
            "training data has {} rows but the fit was made on {}",
            train.n, saved.n
        )));
    }
    let adjacency = saved.adjacency.as_deref().map(read_adjacency).transpose()?;
    let model = build(saved.spec.clone(), &train, adjacency.as_ref())?;
    if model.layout.total != saved.fit.delta.len() {
        return Err(Error::InvalidInput(format!(
            "rebuilt design has {} coefficients but the fit stores {}; \
             the training data file no longer matches the fit",
            model.layout.total,
            saved.fit.delta.len()
        )));
    }
    Ok((model, train))
}

fn cdf_pair(model: &BuiltModel, pred: &PredictedParams, y1: f64, y2: f64) -> (Vec<f64>, Vec<f64>) {
    let lim = copreg::UV_EPS;
    let u = pred
        .p1
        .iter()
        .map(|p| model.spec.margin1.cdf(y1, p).clamp(lim, 1.0 - lim))
        .collect();
    let v = pred
        .p2
        .iter()
        .map(|p| model.spec.margin2.cdf(y2, p).clamp(lim, 1.0 - lim))
        .collect();
    (u, v)
}

fn mode_probs(
    model: &BuiltModel,
    delta: &DVector<f64>,
    data: &Dataset,
    y1: f64,
    y2: f64,
    mode: ProbMode,
) -> Result<Vec<f64>> {
    let pred = predict_params(model, delta, data)?;
    let (u, v) = cdf_pair(model, &pred, y1, y2);
    let jp = joint_probabilities(model, &u, &v, &pred.theta);
    Ok(match mode {
        ProbMode::Copula => jp.joint,
        ProbMode::Independence => jp.independent,
    })
}

/// Joint-probability prediction P(Y1 <= y1, Y2 <= y2) on new data, under the
/// fitted copula and under an independence assumption, optionally with
/// posterior intervals for one of the two.
#[allow(clippy::too_many_arguments)]
pub fn cmd_predict(
    fit_path: &Path,
    data_path: Option<&Path>,
    y1: f64,
    y2: f64,
    mode: ProbMode,
    intervals: bool,
    nsim: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let saved = persist::load_fit(fit_path)?;
    let (model, train) = rebuild(&saved)?;
    let data = match data_path {
        Some(p) => Dataset::from_csv_path(p)?,
        None => train,
    };

    let pred = predict_params(&model, &saved.fit.delta, &data)?;
    let (u, v) = cdf_pair(&model, &pred, y1, y2);
    let jp = joint_probabilities(&model, &u, &v, &pred.theta);
    let tau: Vec<f64> = pred
        .theta
        .iter()
        .map(|&t| model.spec.copula.theta_to_tau(t))
        .collect();

    let ivs = if intervals {
        let draws = posterior_draws(&saved.fit.delta, &saved.fit.cov, nsim, seed)?;
        Some(pointwise_intervals(&draws, 0.95, |d| {
            mode_probs(&model, d, &data, y1, y2, mode)
                .unwrap_or_else(|_| vec![f64::NAN; data.n])
        }))
    } else {
        None
    };

    let mut w = open_out(out)?;
    write!(w, "row,u1,u2,theta,tau,p_copula,p_independence")?;
    if ivs.is_some() {
        write!(w, ",lo95,hi95")?;
    }
    writeln!(w)?;
    for i in 0..data.n {
        write!(
            w,
            "{},{},{},{},{},{},{}",
            i + 1,
            u[i],
            v[i],
            pred.theta[i],
            tau[i],
            jp.joint[i],
            jp.independent[i]
        )?;
        if let Some(iv) = &ivs {
            write!(w, ",{},{}", iv[i].0, iv[i].1)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Draw a dataset from the reference simulation design.
pub fn cmd_simulate(n: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let design = SimDesign::benchmark(n);
    let data = simulate_dataset(&design, seed, 0)?;
    let mut w = open_out(out)?;
    data.write_csv(&mut w)?;
    Ok(())
}

/// Replicated model-selection experiment over a set of candidate copulas.
pub fn cmd_simstudy(
    n: usize,
    replicates: usize,
    candidates: &[String],
    seed: u64,
    grid: usize,
    out: &Path,
) -> Result<()> {
    let mut cfg = SimStudyConfig {
        n,
        replicates,
        seed,
        grid_size: grid,
        ..SimStudyConfig::default()
    };
    if !candidates.is_empty() {
        cfg.candidates = candidates.to_vec();
    }
    let report = run_sim_study(&cfg)?;
    report.write_files(out)?;
    print!("{}", std::fs::read_to_string(out.join("summary.txt"))?);
    Ok(())
}

/// Normal-score residual diagnostics for a saved fit, on the training data
/// or on fresh data holding the same columns.
pub fn cmd_diagnose(fit_path: &Path, data_path: Option<&Path>, out: &Path) -> Result<()> {
    let saved = persist::load_fit(fit_path)?;
    let (model, train) = rebuild(&saved)?;
    let data = match data_path {
        Some(p) => Dataset::from_csv_path(p)?,
        None => train,
    };
    let pred = predict_params(&model, &saved.fit.delta, &data)?;
    let y1 = data.numeric(&model.spec.y1)?;
    let y2 = data.numeric(&model.spec.y2)?;
    let lim = copreg::UV_EPS;
    let score = |ys: &[f64], ps: &[copreg::margins::MarginParams], side: usize| -> Vec<f64> {
        ys.iter()
            .zip(ps)
            .map(|(&y, p)| {
                let fam = if side == 0 {
                    model.spec.margin1
                } else {
                    model.spec.margin2
                };
                qnorm(fam.cdf(y, p).clamp(lim, 1.0 - lim))
            })
            .collect()
    };
    let r1 = score(y1, &pred.p1, 0);
    let r2 = score(y2, &pred.p2, 1);

    std::fs::create_dir_all(out)?;
    let mut res = String::from("row,r1,r2\n");
    for i in 0..data.n {
        let _ = writeln!(res, "{},{},{}", i + 1, r1[i], r2[i]);
    }
    std::fs::write(out.join("residuals.csv"), res)?;

    let mut s1 = r1.clone();
    let mut s2 = r2.clone();
    s1.sort_by(f64::total_cmp);
    s2.sort_by(f64::total_cmp);
    let n = data.n;
    let mut qq = String::from("p,theory,margin1,margin2\n");
    let mut dev = [0.0f64; 2];
    for i in 0..n {
        let p = (i as f64 + 0.5) / n as f64;
        let t = qnorm(p);
        dev[0] = dev[0].max((s1[i] - t).abs());
        dev[1] = dev[1].max((s2[i] - t).abs());
        let _ = writeln!(qq, "{p},{t},{},{}", s1[i], s2[i]);
    }
    std::fs::write(out.join("qq.csv"), qq)?;

    let bins = 30usize;
    let (lo, hi) = (-4.0f64, 4.0f64);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![[0usize; 2]; bins];
    for (k, rs) in [&r1, &r2].into_iter().enumerate() {
        for &r in rs {
            let b = (((r - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
            counts[b][k] += 1;
        }
    }
    let mut hist = String::from("lo,hi,count1,count2\n");
    for (b, c) in counts.iter().enumerate() {
        let _ = writeln!(
            hist,
            "{},{},{},{}",
            lo + b as f64 * width,
            lo + (b + 1) as f64 * width,
            c[0],
            c[1]
        );
    }
    std::fs::write(out.join("hist.csv"), hist)?;

    println!("margin 1 max |qq deviation|: {:.4}", dev[0]);
    println!("margin 2 max |qq deviation|: {:.4}", dev[1]);
    Ok(())
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn std::io::Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}
