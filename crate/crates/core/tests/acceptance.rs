//! Acceptance suite: ten release-gate criteria, one test per criterion.
//! Each prints a single PASS line with its headline metric; a failure
//! panics with the matching FAIL message.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use copreg::copula::{Copula, TAGS as COPULA_TAGS};
use copreg::data::{Column, Dataset};
use copreg::estimator::{fit, fit_independence, FitOptions};
use copreg::inference::{aic, joint_probabilities, predict_params, quantile_residuals};
use copreg::likelihood::Likelihood;
use copreg::margins::{MarginFamily, MarginParams, TAGS as MARGIN_TAGS};
use copreg::model::{self, ModelSpec, TermExpr};
use copreg::quadrature::integrate_segmented;
use copreg::simulate::{
    benchmark_smooth_mu2, benchmark_true_coefs, run_sim_study, sample_copula_pair, SimStudyConfig,
};
use copreg::special::{pnorm, qnorm};
use copreg::stats::{kendall_tau, ks_critical_1pct, ks_statistic};

// ---------------------------------------------------------------- helpers

/// Five tau values per family, spanning its dependence range.
fn tau_grid(tag: &str) -> Vec<f64> {
    let negate = |v: Vec<f64>| v.into_iter().map(|t| -t).collect();
    match tag {
        "N" | "F" => vec![-0.7, -0.3, 0.2, 0.5, 0.8],
        "AMH" => vec![-0.15, -0.05, 0.1, 0.2, 0.3],
        "FGM" => vec![-0.2, -0.1, 0.05, 0.1, 0.2],
        "C0" | "C180" | "G0" | "G180" | "J0" | "J180" => vec![0.1, 0.25, 0.5, 0.7, 0.85],
        "C90" | "C270" | "G90" | "G270" | "J90" | "J270" => {
            negate(vec![0.1, 0.25, 0.5, 0.7, 0.85])
        }
        other => panic!("no tau grid for {other}"),
    }
}

/// Representative parameters per margin family; all Table-2 moments (and
/// the fourth moments the empirical checks lean on) exist at these values.
fn margin_params(fam: MarginFamily) -> MarginParams {
    use MarginFamily::*;
    match fam {
        Normal => MarginParams::new(1.2, 0.9),
        LogNormal => MarginParams::new(0.3, 0.5),
        Logistic => MarginParams::new(1.5, 0.8),
        Gumbel => MarginParams::new(2.0, 0.8),
        ReverseGumbel => MarginParams::new(2.0, 0.8),
        Weibull => MarginParams::new(1.5, 2.0),
        Gamma => MarginParams::new(1.2, 0.6),
        InverseGaussian => MarginParams::new(1.1, 0.7),
        Beta => MarginParams::new(0.4, 0.5),
        Dagum => MarginParams::new3(1.0, 5.0, 1.5),
        SinghMaddala => MarginParams::new3(1.0, 3.0, 2.0),
    }
}

fn all_margins() -> Vec<MarginFamily> {
    MARGIN_TAGS
        .iter()
        .map(|t| MarginFamily::from_tag(t).unwrap())
        .collect()
}

/// Correlated bivariate normal responses:
/// y1 ~ N(0.4, 1.1), y2 ~ N(-0.3, 0.9), correlation rho.
fn bvn_data(n: usize, rho: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha20Rng| qnorm(rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12));
    let mut y1 = Vec::with_capacity(n);
    let mut y2 = Vec::with_capacity(n);
    for _ in 0..n {
        let z1 = draw(&mut rng);
        let z2 = draw(&mut rng);
        y1.push(0.4 + 1.1 * z1);
        y2.push(-0.3 + 0.9 * (rho * z1 + (1.0 - rho * rho).sqrt() * z2));
    }
    Dataset::new(
        vec!["y1".into(), "y2".into()],
        vec![Column::Numeric(y1), Column::Numeric(y2)],
    )
    .unwrap()
}

fn gaussian_spec() -> ModelSpec {
    ModelSpec {
        margin1: MarginFamily::Normal,
        margin2: MarginFamily::Normal,
        copula: Copula::from_tag("N").unwrap(),
        y1: "y1".into(),
        y2: "y2".into(),
        equations: vec![vec![]; 5],
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn centered(mut v: Vec<f64>) -> Vec<f64> {
    let m = mean(&v);
    for x in v.iter_mut() {
        *x -= m;
    }
    v
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

// -------------------------------------------------------------- criteria

#[test]
fn criterion_01_copula_validity() {
    let t0 = Instant::now();
    let eps = 1e-9;
    let pts = [eps, 1e-4, 0.05, 0.5, 0.95, 1.0 - 1e-4, 1.0 - eps];
    let mut worst_mass: f64 = 0.0;
    let mut worst_frechet: f64 = 0.0;
    let mut worst_boundary: f64 = 0.0;
    for tag in COPULA_TAGS {
        let cop = Copula::from_tag(tag).unwrap();
        for tau in tau_grid(tag) {
            let theta = cop.tau_to_theta(tau);
            let mass = integrate_segmented(
                |v| {
                    integrate_segmented(|u| cop.log_density(u, v, theta).exp(), &pts, 1e-7)
                },
                &pts,
                1e-6,
            );
            let err = (mass - 1.0).abs();
            assert!(
                err < 1e-4,
                "criterion 1: FAIL — {tag} theta {theta:.4}: density mass {mass:.6}"
            );
            worst_mass = worst_mass.max(err);

            for i in 1..19 {
                let u = i as f64 / 19.0;
                for j in 1..19 {
                    let v = j as f64 / 19.0;
                    let c = cop.cdf(u, v, theta);
                    let lower = (u + v - 1.0).max(0.0);
                    let upper = u.min(v);
                    assert!(
                        c >= lower - 1e-9 && c <= upper + 1e-9,
                        "criterion 1: FAIL — {tag} theta {theta:.4}: C({u},{v}) = {c} outside Frechet bounds"
                    );
                    worst_frechet = worst_frechet
                        .max(lower - c)
                        .max(c - upper);
                }
                // uniform margins and the zero boundary
                let d = (cop.cdf(u, 1.0, theta) - u)
                    .abs()
                    .max((cop.cdf(1.0, u, theta) - u).abs())
                    .max(cop.cdf(u, 0.0, theta))
                    .max(cop.cdf(0.0, u, theta));
                assert!(
                    d < 1e-6,
                    "criterion 1: FAIL — {tag} theta {theta:.4}: boundary identity off by {d:.2e}"
                );
                worst_boundary = worst_boundary.max(d);
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 120.0, "criterion 1: FAIL — runtime {dt:.1}s exceeds 2 min");
    println!(
        "criterion 1: PASS — 16 tags x 5 thetas: worst density-mass error {worst_mass:.2e}, \
         worst Frechet violation {worst_frechet:.2e}, worst boundary error {worst_boundary:.2e}, {dt:.1}s"
    );
}

#[test]
fn criterion_02_tau_oracle() {
    let t0 = Instant::now();
    let n = 100_000;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha20Rng::seed_from_u64(20_260_815);
    for tag in COPULA_TAGS {
        let cop = Copula::from_tag(tag).unwrap();
        for tau in tau_grid(tag) {
            let theta = cop.tau_to_theta(tau);
            let tau_formula = cop.theta_to_tau(theta);
            let mut us = Vec::with_capacity(n);
            let mut vs = Vec::with_capacity(n);
            for _ in 0..n {
                let (u, v) = sample_copula_pair(&cop, theta, &mut rng);
                us.push(u);
                vs.push(v);
            }
            let emp = kendall_tau(&us, &vs);
            let err = (emp - tau_formula).abs();
            assert!(
                err < 0.02,
                "criterion 2: FAIL — {tag} theta {theta:.4}: formula tau {tau_formula:.4} vs empirical {emp:.4}"
            );
            worst = worst.max(err);
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 300.0, "criterion 2: FAIL — runtime {dt:.1}s exceeds 5 min");
    println!(
        "criterion 2: PASS — 16 tags x 5 thetas x 1e5 pairs: worst |tau| gap {worst:.4}, {dt:.1}s"
    );
}

#[test]
fn criterion_03_margin_suite() {
    let nsamp = 1_000_000;
    let mut rng = ChaCha20Rng::seed_from_u64(33);
    let mut worst_mass: f64 = 0.0;
    let mut worst_round: f64 = 0.0;
    let mut worst_moment: f64 = 0.0;
    for fam in all_margins() {
        let p = margin_params(fam);

        // density mass over the support, split at quantiles
        let qs = [1e-9, 1e-4, 0.25, 0.5, 0.75, 1.0 - 1e-4, 1.0 - 1e-9];
        let pts: Vec<f64> = qs.iter().map(|&q| fam.quantile(q, &p)).collect();
        let mass = integrate_segmented(|y| fam.pdf(y, &p), &pts, 1e-8);
        let err = (mass - 1.0).abs();
        assert!(
            err < 1e-6,
            "criterion 3: FAIL — {fam}: density mass {mass:.8}"
        );
        worst_mass = worst_mass.max(err);

        for pr in [1e-6, 1e-3, 0.1, 0.5, 0.9, 0.999, 1.0 - 1e-6] {
            let y = fam.quantile(pr, &p);
            let back = fam.cdf(y, &p);
            let err = (back - pr).abs();
            assert!(
                err < 1e-8,
                "criterion 3: FAIL — {fam}: cdf(quantile({pr})) = {back}"
            );
            worst_round = worst_round.max(err);
        }

        let (m_th, v_th) = fam.moments(&p);
        let (m_th, v_th) = (m_th.unwrap(), v_th.unwrap());
        let sample = fam.sample(&p, nsamp, &mut rng);
        let m_emp = mean(&sample);
        let v_emp = sample.iter().map(|x| (x - m_emp).powi(2)).sum::<f64>() / nsamp as f64;
        let me = ((m_emp - m_th) / m_th).abs();
        let ve = ((v_emp - v_th) / v_th).abs();
        assert!(
            me < 0.01 && ve < 0.01,
            "criterion 3: FAIL — {fam}: mean {m_th:.4} vs {m_emp:.4}, var {v_th:.4} vs {v_emp:.4}"
        );
        worst_moment = worst_moment.max(me).max(ve);
    }

    // distributional dualities, checked by KS at the 1% level
    let n = 20_000;
    let pl = margin_params(MarginFamily::LogNormal);
    let logs: Vec<f64> = MarginFamily::LogNormal
        .sample(&pl, n, &mut rng)
        .iter()
        .map(|x| x.ln())
        .collect();
    let d_ln = ks_statistic(&logs, |x| pnorm((x - pl.mu) / pl.sigma));
    assert!(
        d_ln < ks_critical_1pct(n),
        "criterion 3: FAIL — log of LN sample is not N (D = {d_ln:.4})"
    );
    let pg = margin_params(MarginFamily::Gumbel);
    let flipped = MarginParams::new(-pg.mu, pg.sigma);
    let negs: Vec<f64> = MarginFamily::Gumbel
        .sample(&pg, n, &mut rng)
        .iter()
        .map(|x| -x)
        .collect();
    let d_gu = ks_statistic(&negs, |x| MarginFamily::ReverseGumbel.cdf(x, &flipped));
    assert!(
        d_gu < ks_critical_1pct(n),
        "criterion 3: FAIL — negated GU sample is not rGU (D = {d_gu:.4})"
    );

    println!(
        "criterion 3: PASS — 11 families: worst mass error {worst_mass:.2e}, worst roundtrip {worst_round:.2e}, \
         worst moment rel. err {worst_moment:.4}, dualities D = {d_ln:.4}/{d_gu:.4}"
    );
}

#[test]
fn criterion_04_gradient_suite() {
    let t0 = Instant::now();
    let n = 50;
    let margins = all_margins();
    let mut worst: f64 = 0.0;
    for (k, tag) in COPULA_TAGS.iter().enumerate() {
        let cop = Copula::from_tag(tag).unwrap();
        let m1 = margins[(2 * k) % margins.len()];
        let m2 = margins[(2 * k + 1) % margins.len()];
        let p1 = margin_params(m1);
        let p2 = margin_params(m2);
        let mut rng = ChaCha20Rng::seed_from_u64(400 + k as u64);
        let y1 = m1.sample(&p1, n, &mut rng);
        let y2 = m2.sample(&p2, n, &mut rng);
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let data = Dataset::new(
            vec!["y1".into(), "y2".into(), "x".into()],
            vec![Column::Numeric(y1), Column::Numeric(y2), Column::Numeric(x)],
        )
        .unwrap();
        let lin = TermExpr::Linear { col: "x".into() };
        let mut equations = vec![vec![lin.clone()], vec![], vec![], vec![]];
        equations.resize(m1.n_params() + m2.n_params() - 3, Vec::new());
        equations.push(vec![lin.clone()]); // theta
        let spec = ModelSpec {
            margin1: m1,
            margin2: m2,
            copula: cop,
            y1: "y1".into(),
            y2: "y2".into(),
            equations,
        };
        let built = model::build(spec, &data, None).unwrap();
        let lik = Likelihood::new(&built);

        // test point: links inverted at the sampling parameters, covariate
        // slopes at 0.1, plus a small deterministic perturbation
        let mut delta = DVector::zeros(built.layout.total);
        let names = built.spec.equation_names();
        for (e, &(off, _)) in built.layout.eq_spans.iter().enumerate() {
            let links1 = m1.links();
            let links2 = m2.links();
            delta[off] = match names[e] {
                "mu1" => links1[0].invert(p1.mu),
                "mu2" => links2[0].invert(p2.mu),
                "sigma1" => links1[1].invert(p1.sigma),
                "sigma2" => links2[1].invert(p2.sigma),
                "nu1" => links1[2].invert(p1.nu),
                "nu2" => links2[2].invert(p2.nu),
                _ => cop.eta_from_theta(cop.tau_to_theta(tau_grid(tag)[2])),
            };
        }
        for i in 0..delta.len() {
            delta[i] += 0.05 * ((3 * i + 1) as f64).sin();
        }
        let (val, clamps) = lik.value(&delta);
        assert!(val.is_finite() && clamps == 0, "bad fixture for {tag}");

        let analytic = lik.score(&delta).unwrap();
        let mut fd = DVector::zeros(delta.len());
        for i in 0..delta.len() {
            let h = 1e-5 * (1.0 + delta[i].abs());
            let mut dp = delta.clone();
            dp[i] += h;
            let mut dm = delta.clone();
            dm[i] -= h;
            fd[i] = (lik.value(&dp).0 - lik.value(&dm).0) / (2.0 * h);
        }
        let rel = (&analytic - &fd).norm() / fd.norm();
        assert!(
            rel < 1e-5,
            "criterion 4: FAIL — {tag} with {m1}/{m2}: score rel. err {rel:.2e}"
        );
        worst = worst.max(rel);
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 600.0, "criterion 4: FAIL — runtime {dt:.1}s exceeds 10 min");
    println!(
        "criterion 4: PASS — 16 copulas x rotating margins (all 11 covered): worst score rel. err {worst:.2e}, {dt:.1}s"
    );
}

/// Intercept-only Gaussian fit; returns (mu1, sd1, mu2, sd2, rho, converged,
/// loglik, delta).
fn gaussian_recovery(n: usize, rho: f64, seed: u64) -> (Vec<f64>, bool, f64, DVector<f64>) {
    let data = bvn_data(n, rho, seed);
    let m = model::build(gaussian_spec(), &data, None).unwrap();
    let f = fit(&m, &FitOptions::default()).unwrap();
    let est = vec![
        f.delta[0],
        f.delta[2].exp(),
        f.delta[1],
        f.delta[3].exp(),
        m.spec.copula.theta_from_eta(f.delta[4]).0,
    ];
    (est, f.converged, f.loglik, f.delta.clone())
}

#[test]
fn criterion_05_estimator_recovery() {
    let t0 = Instant::now();
    let (n, rho) = (2000, 0.55);
    let (est, converged, _, _) = gaussian_recovery(n, rho, 5);
    let dt = t0.elapsed().as_secs_f64();

    let nf = n as f64;
    let truth = [0.4, 1.1, -0.3, 0.9, rho];
    let se = [
        1.1 / nf.sqrt(),
        1.1 / (2.0 * nf).sqrt(),
        0.9 / nf.sqrt(),
        0.9 / (2.0 * nf).sqrt(),
        (1.0 - rho * rho) / nf.sqrt(),
    ];
    let labels = ["mu1", "sd1", "mu2", "sd2", "rho"];
    let mut worst_z: f64 = 0.0;
    for i in 0..5 {
        let z = (est[i] - truth[i]).abs() / se[i];
        assert!(
            z < 3.0,
            "criterion 5: FAIL — {} = {:.4}, truth {:.4}, {:.1} MC se away",
            labels[i],
            est[i],
            truth[i],
            z
        );
        worst_z = worst_z.max(z);
    }
    assert!(converged, "criterion 5: FAIL — fit did not converge");
    assert!(dt < 10.0, "criterion 5: FAIL — fit took {dt:.1}s (> 10 s)");
    println!(
        "criterion 5: PASS — n=2000 Gaussian recovery, worst |z| {worst_z:.2} MC se, converged, {dt:.2}s"
    );
}

#[test]
fn criterion_06_selection_study() {
    let t0 = Instant::now();
    let cfg = SimStudyConfig {
        n: 1000,
        replicates: 25,
        seed: 1,
        ..SimStudyConfig::default()
    };
    let report = run_sim_study(&cfg).unwrap();
    assert_eq!(report.failures, 0, "criterion 6: FAIL — {} fit failures", report.failures);

    // dependence strength at the truth, recovered by the correct candidate
    let taus: Vec<f64> = report
        .fits
        .iter()
        .filter(|f| f.tag == "J0" && f.ok)
        .map(|f| f.tau_mean)
        .collect();
    let tau_bar = mean(&taus);
    assert!(
        (tau_bar - 0.76).abs() < 0.05,
        "criterion 6: FAIL — mean tau {tau_bar:.4}, expected 0.76 +/- 0.05"
    );

    // AIC concentrates on the truth and its same-tail survival competitor
    let mut j0_share = 0.0;
    for (tag, share) in &report.aic_share {
        match tag.as_str() {
            "J0" => j0_share = *share,
            "C180" => {}
            _ => assert!(
                *share == 0.0,
                "criterion 6: FAIL — AIC selected {tag} in {share:.0}% of replicates"
            ),
        }
    }
    assert!(
        j0_share >= 0.5,
        "criterion 6: FAIL — J0 AIC share {j0_share:.2} < 0.5"
    );

    // linear-coefficient bias under the correct candidate
    let mut worst_bias = 0.0f64;
    for (name, truth) in benchmark_true_coefs() {
        let m = report.mean_coef("J0", name).unwrap();
        let rel = ((m - truth) / truth).abs();
        assert!(
            rel < 0.10,
            "criterion 6: FAIL — {name}: mean {m:.4} vs truth {truth:.4} ({:.1}% bias)",
            100.0 * rel
        );
        worst_bias = worst_bias.max(rel);
    }

    // the fitted smooth tightens with sample size
    let truth_curve = centered(report.grid.iter().map(|&x| benchmark_smooth_mu2(x)).collect());
    let rmse_1000 = rmse(&report.mean_smooth("J0", "mu2"), &truth_curve);
    let cfg2 = SimStudyConfig {
        n: 2000,
        replicates: 25,
        seed: 1,
        candidates: vec!["J0".into()],
        ..SimStudyConfig::default()
    };
    let report2 = run_sim_study(&cfg2).unwrap();
    let rmse_2000 = rmse(&report2.mean_smooth("J0", "mu2"), &truth_curve);
    assert!(
        rmse_2000 < rmse_1000,
        "criterion 6: FAIL — smooth RMSE did not shrink: {rmse_1000:.4} -> {rmse_2000:.4}"
    );

    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 7200.0, "criterion 6: FAIL — runtime {dt:.0}s exceeds 2 h");
    println!(
        "criterion 6: PASS — 25 reps x 8 candidates at n=1000: mean tau {tau_bar:.3}, \
         J0 AIC share {j0_share:.2}, worst coef bias {:.1}%, smooth RMSE {rmse_1000:.4} -> {rmse_2000:.4} (n=2000), {dt:.0}s",
        100.0 * worst_bias
    );
}

/// One well-specified and one margin-misspecified fit on the same draw;
/// returns the per-margin KS statistics (well_1, well_2, bad_1).
fn residual_ks(n: usize, seed: u64) -> (f64, f64, f64, Vec<f64>) {
    let data = bvn_data(n, 0.5, seed);
    let m = model::build(gaussian_spec(), &data, None).unwrap();
    let f = fit(&m, &FitOptions::default()).unwrap();
    let st = Likelihood::new(&m).state(&f.delta);
    let (r1, r2) = quantile_residuals(&st);
    let phi = |x: f64| pnorm(x);
    let d1 = ks_statistic(&r1, phi);
    let d2 = ks_statistic(&r2, phi);

    // same shape of data, but the first response is exponentiated so a
    // normal margin is wrong for it
    let y1_ln: Vec<f64> = data.numeric("y1").unwrap().iter().map(|z| (0.8 * z).exp()).collect();
    let data_bad = Dataset::new(
        vec!["y1".into(), "y2".into()],
        vec![
            Column::Numeric(y1_ln),
            Column::Numeric(data.numeric("y2").unwrap().to_vec()),
        ],
    )
    .unwrap();
    let mb = model::build(gaussian_spec(), &data_bad, None).unwrap();
    let fb = fit(&mb, &FitOptions::default()).unwrap();
    let stb = Likelihood::new(&mb).state(&fb.delta);
    let (rb1, _) = quantile_residuals(&stb);
    (d1, d2, ks_statistic(&rb1, phi), r1)
}

#[test]
fn criterion_07_residual_calibration() {
    let reps = 25;
    let n = 600;
    let crit = ks_critical_1pct(n);
    let mut well_pass = 0;
    let mut bad_fail = 0;
    for r in 0..reps {
        let (d1, d2, db, _) = residual_ks(n, 700 + r);
        if d1 < crit && d2 < crit {
            well_pass += 1;
        }
        if db > crit {
            bad_fail += 1;
        }
    }
    assert!(
        well_pass * 10 >= reps * 9,
        "criterion 7: FAIL — well-specified residuals passed KS in only {well_pass}/{reps}"
    );
    assert!(
        bad_fail * 10 >= reps * 9,
        "criterion 7: FAIL — misspecified margin failed KS in only {bad_fail}/{reps}"
    );
    println!(
        "criterion 7: PASS — residual KS at 1%: well-specified passed {well_pass}/{reps}, \
         misspecified failed {bad_fail}/{reps}"
    );
}

/// Benchmark-design fit and its orthant probabilities at the median
/// thresholds; returns (p_copula, p_independence, joint aic, margins aic).
fn orthant_case(seed: u64) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let design = copreg::simulate::SimDesign::benchmark(400);
    let data = copreg::simulate::simulate_dataset(&design, seed, 0).unwrap();
    let spec = copreg::simulate::benchmark_spec("J0").unwrap();
    let m = model::build(spec, &data, None).unwrap();
    let opts = FitOptions::default();
    let f = fit(&m, &opts).unwrap();
    let (i1, i2) = fit_independence(&m, &opts).unwrap();

    let pred = predict_params(&m, &f.delta, &data).unwrap();
    let med = |xs: &[f64]| {
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };
    let (t1, t2) = (med(data.numeric("y1").unwrap()), med(data.numeric("y2").unwrap()));
    let lim = copreg::UV_EPS;
    let u: Vec<f64> = pred
        .p1
        .iter()
        .map(|p| m.spec.margin1.cdf(t1, p).clamp(lim, 1.0 - lim))
        .collect();
    let v: Vec<f64> = pred
        .p2
        .iter()
        .map(|p| m.spec.margin2.cdf(t2, p).clamp(lim, 1.0 - lim))
        .collect();
    let jp = joint_probabilities(&m, &u, &v, &pred.theta);
    let joint_aic = aic(f.loglik, f.edf);
    let indep_aic = aic(i1.loglik, i1.edf) + aic(i2.loglik, i2.edf);
    (jp.joint, jp.independent, joint_aic, indep_aic)
}

#[test]
fn criterion_08_orthant_underestimation() {
    let (p_cop, p_ind, joint_aic, indep_aic) = orthant_case(8);
    let lifted = p_cop.iter().zip(&p_ind).filter(|(c, i)| c > i).count();
    assert!(
        lifted == p_cop.len(),
        "criterion 8: FAIL — copula probability exceeded independence for only {lifted}/{} observations",
        p_cop.len()
    );
    assert!(
        joint_aic < indep_aic,
        "criterion 8: FAIL — joint AIC {joint_aic:.2} not below independence {indep_aic:.2}"
    );
    let mean_gap = mean(
        &p_cop
            .iter()
            .zip(&p_ind)
            .map(|(c, i)| c - i)
            .collect::<Vec<_>>(),
    );
    println!(
        "criterion 8: PASS — copula > independence for all {} observations (mean gap {mean_gap:.4}); \
         AIC {joint_aic:.1} < {indep_aic:.1}",
        p_cop.len()
    );
}

/// One coverage replicate: true b1 covered by the 95% interval?
fn coverage_once(seed: u64) -> (bool, f64, f64) {
    let n = 300;
    let (b0, b1) = (0.3, 0.8);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha20Rng| qnorm(rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12));
    let mut y1 = Vec::new();
    let mut y2 = Vec::new();
    let mut xs = Vec::new();
    for _ in 0..n {
        let x: f64 = rng.gen();
        let z1 = draw(&mut rng);
        let z2 = draw(&mut rng);
        y1.push(b0 + b1 * x + 0.9 * z1);
        y2.push(-0.2 + 0.8 * (0.5 * z1 + 0.75f64.sqrt() * z2));
        xs.push(x);
    }
    let data = Dataset::new(
        vec!["y1".into(), "y2".into(), "x".into()],
        vec![Column::Numeric(y1), Column::Numeric(y2), Column::Numeric(xs)],
    )
    .unwrap();
    let mut spec = gaussian_spec();
    spec.equations[0] = vec![TermExpr::Linear { col: "x".into() }];
    let m = model::build(spec, &data, None).unwrap();
    let f = fit(&m, &FitOptions::default()).unwrap();
    // mu1 equation: intercept then the x slope
    let j = m.layout.eq_spans[0].0 + 1;
    let se = f.cov[(j, j)].sqrt();
    let (lo, hi) = (f.delta[j] - 1.96 * se, f.delta[j] + 1.96 * se);
    (lo <= b1 && b1 <= hi, lo, hi)
}

#[test]
fn criterion_09_interval_coverage() {
    let reps = 50;
    let covered = (0..reps).filter(|r| coverage_once(900 + r).0).count();
    let rate = covered as f64 / reps as f64;
    assert!(
        (0.90..=0.99).contains(&rate),
        "criterion 9: FAIL — coverage {covered}/{reps} outside [0.90, 0.99]"
    );
    println!("criterion 9: PASS — 95% interval covered the slope in {covered}/{reps} replicates");
}

#[test]
fn criterion_10_determinism() {
    // each randomized pipeline from criteria 5-9 is run twice with its seed
    // fixed; outputs must agree to the bit (study scale reduced: the
    // property under test is reproducibility, not the statistics again)
    let (est_a, _, ll_a, delta_a) = gaussian_recovery(2000, 0.55, 5);
    let (est_b, _, ll_b, delta_b) = gaussian_recovery(2000, 0.55, 5);
    assert_eq!(bits(&est_a), bits(&est_b), "criterion 10: FAIL — recovery fits differ");
    assert_eq!(ll_a.to_bits(), ll_b.to_bits());
    assert_eq!(bits(delta_a.as_slice()), bits(delta_b.as_slice()));

    let study = |_: ()| {
        let cfg = SimStudyConfig {
            n: 300,
            replicates: 3,
            seed: 11,
            grid_size: 50,
            candidates: vec!["J0".into(), "F".into()],
        };
        run_sim_study(&cfg).unwrap()
    };
    let (ra, rb) = (study(()), study(()));
    let digest = |r: &copreg::simulate::SimReport| {
        let mut d: Vec<u64> = Vec::new();
        for f in &r.fits {
            d.push(f.loglik.to_bits());
            d.push(f.aic.to_bits());
            d.extend(f.coefs.iter().map(|(_, v)| v.to_bits()));
            d.extend(bits(&f.smooth_mu2));
        }
        d.extend(r.aic_share.iter().map(|(_, s)| s.to_bits()));
        d
    };
    assert_eq!(digest(&ra), digest(&rb), "criterion 10: FAIL — studies differ");

    let (.., r1_a) = residual_ks(600, 701);
    let (.., r1_b) = residual_ks(600, 701);
    assert_eq!(bits(&r1_a), bits(&r1_b), "criterion 10: FAIL — residuals differ");

    let (pa, ia, aa, xa) = orthant_case(8);
    let (pb, ib, ab, xb) = orthant_case(8);
    assert_eq!(bits(&pa), bits(&pb), "criterion 10: FAIL — orthant probabilities differ");
    assert_eq!(bits(&ia), bits(&ib));
    assert_eq!(aa.to_bits(), ab.to_bits());
    assert_eq!(xa.to_bits(), xb.to_bits());

    let (ca, lo_a, hi_a) = coverage_once(901);
    let (cb, lo_b, hi_b) = coverage_once(901);
    assert!(ca == cb && lo_a.to_bits() == lo_b.to_bits() && hi_a.to_bits() == hi_b.to_bits());

    println!("criterion 10: PASS — criteria 5-9 pipelines are bit-identical across repeated seeded runs");
}
