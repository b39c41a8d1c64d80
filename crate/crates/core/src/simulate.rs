//! Sampling from a copula regression specification and a simulation-study
//! harness that fits a list of candidate copulas to replicated datasets and
//! tallies AIC/BIC model selection.

use crate::copula::Copula;
use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{fit, FitOptions};
use crate::inference::{aic, bic};
use crate::likelihood::Likelihood;
use crate::margins::{MarginFamily, MarginParams};
use crate::model::{self, ModelSpec, TermExpr};
use crate::special::erfc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::sync::Arc;

fn pnorm(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// One (u, v) pair by conditional inversion: u uniform, v solving
/// P(V <= v | U = u) = w for a second uniform w.
pub fn sample_copula_pair<R: Rng + ?Sized>(cop: &Copula, theta: f64, rng: &mut R) -> (f64, f64) {
    let lim = crate::UV_EPS;
    let u = rng.gen::<f64>().clamp(lim, 1.0 - lim);
    let w = rng.gen::<f64>().clamp(lim, 1.0 - lim);
    let v = cop.hfun_inverse(u, w, theta).clamp(lim, 1.0 - lim);
    (u, v)
}

type EtaFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A data-generating truth: margins, copula and one predictor function of
/// the covariates (x1, x2, x3) per parameter equation.
#[derive(Clone)]
pub struct SimDesign {
    pub margin1: MarginFamily,
    pub margin2: MarginFamily,
    pub copula: Copula,
    pub n: usize,
    /// Truth predictors in equation order (mu1, mu2, sigma1, sigma2,
    /// optional nus, theta); values are mapped through the same links the
    /// fitted model uses.
    pub etas: Vec<EtaFn>,
}

impl SimDesign {
    /// Benchmark design: inverse-Gaussian and Singh-Maddala margins joined
    /// by a Joe copula, with linear effects on mu1/nu, a smooth effect on
    /// mu2, and both on the dependence parameter.
    pub fn benchmark(n: usize) -> Self {
        let c = |v: f64| -> EtaFn { Arc::new(move |_, _, _| v) };
        SimDesign {
            margin1: MarginFamily::InverseGaussian,
            margin2: MarginFamily::SinghMaddala,
            copula: Copula::from_tag("J0").unwrap(),
            n,
            etas: vec![
                Arc::new(|_, x2, x3| 0.5 - 1.25 * x2 - 0.8 * x3),
                Arc::new(|x1, x2, _| 0.1 - 0.9 * x1 + x2 * (3.0 * x2).sin()),
                c(1.8),
                c(0.1),
                Arc::new(|_, _, x3| 0.2 + x3),
                Arc::new(|x1, x2, _| 0.2 + 0.7 * x1 + x2 + (-3.0 * (x2 - 0.5).powi(2)).exp()),
            ],
        }
    }

    fn n_equations(&self) -> usize {
        self.margin1.n_params() + self.margin2.n_params() + 1
    }
}

/// Smooth truth on the mu2 predictor scale in the benchmark design.
pub fn benchmark_smooth_mu2(x: f64) -> f64 {
    x * (3.0 * x).sin()
}

/// Smooth truth on the theta predictor scale in the benchmark design.
pub fn benchmark_smooth_theta(x: f64) -> f64 {
    x + (-3.0 * (x - 0.5).powi(2)).exp()
}

/// True values of the tracked linear coefficients in the benchmark design.
pub fn benchmark_true_coefs() -> Vec<(&'static str, f64)> {
    vec![
        ("mu1:x2", -1.25),
        ("mu1:x3", -0.8),
        ("mu2:x1", -0.9),
        ("nu2:x3", 1.0),
        ("theta:x1", 0.7),
    ]
}

/// Draw a dataset (columns y1, y2, x1, x2, x3) from the design. The three
/// covariates come from a correlated-Gaussian copula (correlation 0.5)
/// mapped to uniforms; the third is dichotomized at 0.5.
pub fn simulate_dataset(design: &SimDesign, seed: u64, stream: u64) -> Result<Dataset> {
    if design.etas.len() != design.n_equations() {
        return Err(Error::Config(format!(
            "design has {} predictor functions but the margins need {}",
            design.etas.len(),
            design.n_equations()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let n = design.n;
    let (np1, np2) = (design.margin1.n_params(), design.margin2.n_params());
    let links1 = design.margin1.links();
    let links2 = design.margin2.links();
    // Cholesky factor of the 3x3 equicorrelation(0.5) matrix
    let (l21, l22) = (0.5, 0.75f64.sqrt());
    let (l31, l32) = (0.5, (0.75f64 - 0.25) / 0.75f64.sqrt());
    let l33 = (1.0 - l31 * l31 - l32 * l32).sqrt();

    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 5];
    for _ in 0..n {
        let e1: f64 = pnorm_inv_gauss(&mut rng);
        let e2: f64 = pnorm_inv_gauss(&mut rng);
        let e3: f64 = pnorm_inv_gauss(&mut rng);
        let x1 = pnorm(e1);
        let x2 = pnorm(l21 * e1 + l22 * e2);
        let u3 = pnorm(l31 * e1 + l32 * e2 + l33 * e3);
        let x3 = if u3 >= 0.5 { 1.0 } else { 0.0 };

        let etas: Vec<f64> = design.etas.iter().map(|f| f(x1, x2, x3)).collect();
        for (e, v) in etas.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Config(format!(
                    "truth predictor {} is not finite at (x1={x1:.3}, x2={x2:.3}, x3={x3})",
                    e + 1
                )));
            }
        }
        // equation order: mu1, mu2, sigma1, sigma2, optional nus, theta
        let eq_of = |side: usize, param: usize| match param {
            0 | 1 => 2 * param + side,
            _ => 4 + usize::from(side == 1 && np1 == 3),
        };
        let mut p1 = MarginParams::new(0.0, 1.0);
        let mut p2 = MarginParams::new(0.0, 1.0);
        for k in 0..np1 {
            p1.set(k, links1[k].apply(etas[eq_of(0, k)]).0);
        }
        for k in 0..np2 {
            p2.set(k, links2[k].apply(etas[eq_of(1, k)]).0);
        }
        let theta = design.copula.theta_from_eta(etas[np1 + np2]).0;

        let (u, v) = sample_copula_pair(&design.copula, theta, &mut rng);
        cols[0].push(design.margin1.quantile(u, &p1));
        cols[1].push(design.margin2.quantile(v, &p2));
        cols[2].push(x1);
        cols[3].push(x2);
        cols[4].push(x3);
    }
    Dataset::new(
        vec![
            "y1".into(),
            "y2".into(),
            "x1".into(),
            "x2".into(),
            "x3".into(),
        ],
        cols.into_iter().map(Column::Numeric).collect(),
    )
}

fn pnorm_inv_gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    crate::special::qnorm(rng.gen::<f64>().clamp(1e-16, 1.0 - 1e-16))
}

/// The model specification fitted to benchmark data, with the candidate
/// copula as a free choice.
pub fn benchmark_spec(tag: &str) -> Result<ModelSpec> {
    let copula = Copula::from_tag(tag)
        .ok_or_else(|| Error::Config(format!("unknown copula tag '{tag}'")))?;
    let lin = |c: &str| TermExpr::Linear { col: c.into() };
    let sm = |c: &str| TermExpr::Spline { col: c.into(), k: 10 };
    Ok(ModelSpec {
        margin1: MarginFamily::InverseGaussian,
        margin2: MarginFamily::SinghMaddala,
        copula,
        y1: "y1".into(),
        y2: "y2".into(),
        equations: vec![
            vec![lin("x2"), lin("x3")],
            vec![lin("x1"), sm("x2")],
            vec![],
            vec![],
            vec![lin("x3")],
            vec![lin("x1"), sm("x2")],
        ],
    })
}

#[derive(Debug, Clone)]
pub struct SimStudyConfig {
    pub n: usize,
    pub replicates: usize,
    pub candidates: Vec<String>,
    pub seed: u64,
    pub grid_size: usize,
}

impl Default for SimStudyConfig {
    fn default() -> Self {
        SimStudyConfig {
            n: 1000,
            replicates: 25,
            candidates: ["J0", "J180", "C0", "C180", "G0", "G180", "F", "N"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            seed: 1,
            grid_size: 200,
        }
    }
}

/// One candidate fitted to one replicate.
#[derive(Debug, Clone)]
pub struct ReplicateFit {
    pub replicate: usize,
    pub tag: String,
    pub ok: bool,
    pub converged: bool,
    pub loglik: f64,
    pub edf: f64,
    pub aic: f64,
    pub bic: f64,
    pub tau_mean: f64,
    /// Named non-intercept linear coefficients ("equation:column").
    pub coefs: Vec<(String, f64)>,
    /// Centered fitted smooths over the study grid.
    pub smooth_mu2: Vec<f64>,
    pub smooth_theta: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub config: SimStudyConfig,
    pub grid: Vec<f64>,
    pub fits: Vec<ReplicateFit>,
    /// (tag, selection proportion) per criterion, over replicates where at
    /// least one candidate fitted.
    pub aic_share: Vec<(String, f64)>,
    pub bic_share: Vec<(String, f64)>,
    pub failures: usize,
}

fn center(mut v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len().max(1) as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
    v
}

fn fit_candidate(
    replicate: usize,
    tag: &str,
    data: &Dataset,
    grid_data: &Dataset,
    opts: &FitOptions,
) -> ReplicateFit {
    let mut rec = ReplicateFit {
        replicate,
        tag: tag.to_string(),
        ok: false,
        converged: false,
        loglik: f64::NAN,
        edf: f64::NAN,
        aic: f64::NAN,
        bic: f64::NAN,
        tau_mean: f64::NAN,
        coefs: Vec::new(),
        smooth_mu2: Vec::new(),
        smooth_theta: Vec::new(),
        error: None,
    };
    let spec = match benchmark_spec(tag) {
        Ok(s) => s,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let built = match model::build(spec, data, None) {
        Ok(m) => m,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let res = match fit(&built, opts) {
        Ok(r) => r,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.ok = true;
    rec.converged = res.converged;
    rec.loglik = res.loglik;
    rec.edf = res.edf;
    rec.aic = aic(res.loglik, res.edf);
    rec.bic = bic(res.loglik, res.edf, built.n);
    let st = Likelihood::new(&built).state(&res.delta);
    rec.tau_mean = st
        .theta
        .iter()
        .map(|&t| built.spec.copula.theta_to_tau(t))
        .sum::<f64>()
        / built.n as f64;

    let names = built.spec.equation_names();
    for (e, eq) in built.equations.iter().enumerate() {
        let (goff, _) = built.layout.eq_spans[e];
        for (span, term) in eq.term_spans().iter().zip(&built.spec.equations[e]) {
            if let TermExpr::Linear { col } = term {
                if span.1 == 1 {
                    rec.coefs
                        .push((format!("{}:{col}", names[e]), res.delta[goff + span.0]));
                }
            }
        }
        if (names[e] == "mu2" || names[e] == "theta")
            && built.spec.equations[e]
                .iter()
                .any(|t| matches!(t, TermExpr::Spline { .. }))
        {
            if let Ok(z) = eq.design_for(grid_data) {
                let (off, w) = built.layout.eq_spans[e];
                let eta = z * res.delta.rows(off, w);
                let curve = center(eta.iter().cloned().collect());
                if names[e] == "mu2" {
                    rec.smooth_mu2 = curve;
                } else {
                    rec.smooth_theta = curve;
                }
            }
        }
    }
    rec
}

/// Fit every candidate to every replicate and tally model selection.
pub fn run_sim_study(cfg: &SimStudyConfig) -> Result<SimReport> {
    if cfg.candidates.is_empty() {
        return Err(Error::Config("no candidate copulas given".into()));
    }
    for tag in &cfg.candidates {
        if Copula::from_tag(tag).is_none() {
            return Err(Error::Config(format!("unknown copula tag '{tag}'")));
        }
    }
    let design = SimDesign::benchmark(cfg.n);
    let g = cfg.grid_size.max(2);
    let grid: Vec<f64> = (0..g).map(|i| i as f64 / (g - 1) as f64).collect();
    let grid_data = Dataset::new(
        vec!["x1".into(), "x2".into(), "x3".into()],
        vec![
            Column::Numeric(vec![0.0; g]),
            Column::Numeric(grid.clone()),
            Column::Numeric(vec![0.0; g]),
        ],
    )?;
    let opts = FitOptions::default();

    let per_rep: Vec<Result<Vec<ReplicateFit>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let data = simulate_dataset(&design, cfg.seed, rep as u64 + 1)?;
            Ok(cfg
                .candidates
                .iter()
                .map(|tag| fit_candidate(rep, tag, &data, &grid_data, &opts))
                .collect())
        })
        .collect();

    let mut fits = Vec::new();
    for r in per_rep {
        fits.extend(r?);
    }
    let failures = fits.iter().filter(|f| !f.ok).count();

    let mut aic_wins = vec![0usize; cfg.candidates.len()];
    let mut bic_wins = vec![0usize; cfg.candidates.len()];
    let mut scored_reps = 0usize;
    for rep in 0..cfg.replicates {
        let pool: Vec<&ReplicateFit> = fits
            .iter()
            .filter(|f| f.replicate == rep && f.ok && f.aic.is_finite())
            .collect();
        if pool.is_empty() {
            continue;
        }
        scored_reps += 1;
        let best_aic = pool
            .iter()
            .min_by(|a, b| a.aic.total_cmp(&b.aic))
            .unwrap()
            .tag
            .clone();
        let best_bic = pool
            .iter()
            .min_by(|a, b| a.bic.total_cmp(&b.bic))
            .unwrap()
            .tag
            .clone();
        for (k, tag) in cfg.candidates.iter().enumerate() {
            if *tag == best_aic {
                aic_wins[k] += 1;
            }
            if *tag == best_bic {
                bic_wins[k] += 1;
            }
        }
    }
    let share = |wins: &[usize]| {
        cfg.candidates
            .iter()
            .zip(wins)
            .map(|(t, &w)| (t.clone(), w as f64 / scored_reps.max(1) as f64))
            .collect::<Vec<_>>()
    };
    Ok(SimReport {
        config: cfg.clone(),
        grid,
        aic_share: share(&aic_wins),
        bic_share: share(&bic_wins),
        failures,
        fits,
    })
}

impl SimReport {
    /// Mean fitted smooth across replicates of one candidate; empty if the
    /// candidate never fitted.
    pub fn mean_smooth(&self, tag: &str, which: &str) -> Vec<f64> {
        let curves: Vec<&Vec<f64>> = self
            .fits
            .iter()
            .filter(|f| f.tag == tag && f.ok)
            .map(|f| {
                if which == "mu2" {
                    &f.smooth_mu2
                } else {
                    &f.smooth_theta
                }
            })
            .filter(|c| c.len() == self.grid.len())
            .collect();
        if curves.is_empty() {
            return Vec::new();
        }
        let mut mean = vec![0.0; self.grid.len()];
        for c in &curves {
            for (m, v) in mean.iter_mut().zip(c.iter()) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= curves.len() as f64;
        }
        mean
    }

    /// Mean of one named coefficient across a candidate's fits.
    pub fn mean_coef(&self, tag: &str, name: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .fits
            .iter()
            .filter(|f| f.tag == tag && f.ok)
            .filter_map(|f| {
                f.coefs
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| *v)
            })
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// Write the selection tallies, per-fit table and smooth grids as CSV
    /// files plus a text summary in `dir`.
    pub fn write_files(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut sel = String::from("tag,aic_share,bic_share\n");
        for ((tag, a), (_, b)) in self.aic_share.iter().zip(&self.bic_share) {
            writeln!(sel, "{tag},{a},{b}").unwrap();
        }
        std::fs::write(dir.join("selection.csv"), sel)?;

        let coef_names: Vec<String> = self
            .fits
            .iter()
            .find(|f| f.ok)
            .map(|f| f.coefs.iter().map(|(n, _)| n.clone()).collect())
            .unwrap_or_default();
        let mut tab = String::from("replicate,tag,ok,converged,loglik,edf,aic,bic,tau_mean");
        for n in &coef_names {
            write!(tab, ",{n}").unwrap();
        }
        tab.push('\n');
        for f in &self.fits {
            write!(
                tab,
                "{},{},{},{},{},{},{},{},{}",
                f.replicate,
                f.tag,
                f.ok,
                f.converged,
                f.loglik,
                f.edf,
                f.aic,
                f.bic,
                f.tau_mean
            )
            .unwrap();
            for n in &coef_names {
                let v = f
                    .coefs
                    .iter()
                    .find(|(cn, _)| cn == n)
                    .map(|(_, v)| *v)
                    .unwrap_or(f64::NAN);
                write!(tab, ",{v}").unwrap();
            }
            tab.push('\n');
        }
        std::fs::write(dir.join("fits.csv"), tab)?;

        for which in ["mu2", "theta"] {
            let mut s = String::from("x");
            let cols: Vec<&ReplicateFit> = self
                .fits
                .iter()
                .filter(|f| f.ok && !f.smooth_mu2.is_empty())
                .collect();
            for f in &cols {
                write!(s, ",r{}_{}", f.replicate, f.tag).unwrap();
            }
            s.push('\n');
            for (i, x) in self.grid.iter().enumerate() {
                write!(s, "{x}").unwrap();
                for f in &cols {
                    let c = if which == "mu2" {
                        &f.smooth_mu2
                    } else {
                        &f.smooth_theta
                    };
                    write!(s, ",{}", c.get(i).copied().unwrap_or(f64::NAN)).unwrap();
                }
                s.push('\n');
            }
            std::fs::write(dir.join(format!("smooth_{which}.csv")), s)?;
        }

        let mut sum = String::new();
        writeln!(
            sum,
            "replicates: {}   n: {}   failures: {}",
            self.config.replicates, self.config.n, self.failures
        )
        .unwrap();
        writeln!(sum, "selection shares (aic | bic):").unwrap();
        for ((tag, a), (_, b)) in self.aic_share.iter().zip(&self.bic_share) {
            writeln!(sum, "  {tag:>5}  {a:.3} | {b:.3}").unwrap();
        }
        writeln!(sum, "mean tracked coefficients (correct copula):").unwrap();
        let correct = &self.config.candidates[0];
        for (name, truth) in benchmark_true_coefs() {
            if let Some(m) = self.mean_coef(correct, name) {
                writeln!(sum, "  {name:>10}  mean {m:+.4}   truth {truth:+.4}").unwrap();
            }
        }
        std::fs::write(dir.join("summary.txt"), sum)?;
        Ok(())
    }
}
