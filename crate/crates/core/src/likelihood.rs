//! Joint log-likelihood of the bivariate model: per-observation log density,
//! analytic score, and a finite-difference Hessian built from the score.
//!
//! For margins f1, f2 with cdfs F1, F2 and copula density c, the
//! log density of one observation is
//!
//! ```text
//! log f1(y1) + log f2(y2) + log c(F1(y1), F2(y2); theta)
//! ```
//!
//! Every distribution parameter is tied to its own linear predictor through
//! a link, so the score chains d(log density)/d(parameter) through the link
//! slope and the design row of the corresponding equation. Copula arguments
//! are clamped into (0, 1) and the clamp events are counted; a parameter or
//! density overflow makes the likelihood -inf rather than an error, so an
//! optimizer can back off.

use crate::copula::Copula;
use crate::error::{Error, Result};
use crate::margins::{MarginFamily, MarginParams};
use crate::model::{BuiltModel, EqTarget};
use crate::UV_EPS;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// One observation's joint density evaluation.
#[derive(Debug, Clone, Copy)]
pub struct JointParts {
    pub log_density: f64,
    pub u: f64,
    pub v: f64,
    pub clamps: usize,
}

fn clamp_unit(p: f64, clamps: &mut usize) -> f64 {
    if p > UV_EPS && p < 1.0 - UV_EPS {
        p
    } else {
        *clamps += 1;
        p.clamp(UV_EPS, 1.0 - UV_EPS)
    }
}

/// Log joint density at a single point, for given parameter values.
pub fn joint_parts(
    m1: MarginFamily,
    p1: &MarginParams,
    m2: MarginFamily,
    p2: &MarginParams,
    cop: &Copula,
    theta: f64,
    y1: f64,
    y2: f64,
) -> JointParts {
    let finite = p1.mu.is_finite()
        && p1.sigma.is_finite()
        && p1.nu.is_finite()
        && p2.mu.is_finite()
        && p2.sigma.is_finite()
        && p2.nu.is_finite()
        && theta.is_finite();
    if !finite {
        return JointParts {
            log_density: f64::NEG_INFINITY,
            u: 0.5,
            v: 0.5,
            clamps: 0,
        };
    }
    let mut clamps = 0;
    let u = clamp_unit(m1.cdf(y1, p1), &mut clamps);
    let v = clamp_unit(m2.cdf(y2, p2), &mut clamps);
    let ld = m1.logpdf(y1, p1) + m2.logpdf(y2, p2) + cop.log_density(u, v, theta);
    JointParts {
        log_density: if ld.is_nan() { f64::NEG_INFINITY } else { ld },
        u,
        v,
        clamps,
    }
}

/// Everything the score and downstream summaries need at one coefficient
/// vector: predictors, per-observation parameters, link slopes, copula
/// arguments and per-observation log densities.
#[derive(Debug, Clone)]
pub struct ObsState {
    pub etas: Vec<DVector<f64>>,
    pub p1: Vec<MarginParams>,
    pub p2: Vec<MarginParams>,
    pub slopes1: Vec<[f64; 3]>,
    pub slopes2: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
    pub dtheta_deta: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub log_density: Vec<f64>,
    pub clamps: usize,
}

impl ObsState {
    pub fn log_likelihood(&self) -> f64 {
        let s: f64 = self.log_density.iter().sum();
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    }

    pub fn is_finite(&self) -> bool {
        self.log_density.iter().all(|l| l.is_finite())
    }
}

pub struct Likelihood<'a> {
    pub model: &'a BuiltModel,
    /// Equation index feeding margin-1 parameter k, if any.
    idx1: [Option<usize>; 3],
    idx2: [Option<usize>; 3],
    theta_eq: usize,
}

impl<'a> Likelihood<'a> {
    pub fn new(model: &'a BuiltModel) -> Self {
        let mut idx1 = [None; 3];
        let mut idx2 = [None; 3];
        let mut theta_eq = 0;
        for (e, t) in model.spec.eq_targets().iter().enumerate() {
            match *t {
                EqTarget::Margin { side: 0, param } => idx1[param] = Some(e),
                EqTarget::Margin { side: 1, param } => idx2[param] = Some(e),
                EqTarget::Margin { .. } => unreachable!(),
                EqTarget::Theta => theta_eq = e,
            }
        }
        Likelihood {
            model,
            idx1,
            idx2,
            theta_eq,
        }
    }

    fn obs_params(
        &self,
        etas: &[DVector<f64>],
        i: usize,
    ) -> (MarginParams, MarginParams, [f64; 3], [f64; 3], f64, f64) {
        let links1 = self.model.spec.margin1.links();
        let links2 = self.model.spec.margin2.links();
        let mut p1 = MarginParams::new(0.0, 1.0);
        let mut p2 = MarginParams::new(0.0, 1.0);
        let mut s1 = [0.0; 3];
        let mut s2 = [0.0; 3];
        for k in 0..3 {
            if let Some(e) = self.idx1[k] {
                let (val, sl) = links1[k].apply(etas[e][i]);
                p1.set(k, val);
                s1[k] = sl;
            }
            if let Some(e) = self.idx2[k] {
                let (val, sl) = links2[k].apply(etas[e][i]);
                p2.set(k, val);
                s2[k] = sl;
            }
        }
        let (theta, dth) = self.model.spec.copula.theta_from_eta(etas[self.theta_eq][i]);
        (p1, p2, s1, s2, theta, dth)
    }

    /// Log-likelihood and clamp count; -inf when any observation fails.
    pub fn value(&self, delta: &DVector<f64>) -> (f64, usize) {
        let m = self.model;
        let etas = m.linear_predictors(delta);
        let mut sum = 0.0;
        let mut clamps = 0;
        for i in 0..m.n {
            let (p1, p2, _, _, theta, _) = self.obs_params(&etas, i);
            let parts = joint_parts(
                m.spec.margin1,
                &p1,
                m.spec.margin2,
                &p2,
                &m.spec.copula,
                theta,
                m.y1[i],
                m.y2[i],
            );
            clamps += parts.clamps;
            sum += parts.log_density;
        }
        if sum.is_nan() {
            sum = f64::NEG_INFINITY;
        }
        (sum, clamps)
    }

    pub fn state(&self, delta: &DVector<f64>) -> ObsState {
        let m = self.model;
        let n = m.n;
        let etas = m.linear_predictors(delta);
        let mut st = ObsState {
            etas: Vec::new(),
            p1: Vec::with_capacity(n),
            p2: Vec::with_capacity(n),
            slopes1: Vec::with_capacity(n),
            slopes2: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
            dtheta_deta: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            log_density: Vec::with_capacity(n),
            clamps: 0,
        };
        for i in 0..n {
            let (p1, p2, s1, s2, theta, dth) = self.obs_params(&etas, i);
            let parts = joint_parts(
                m.spec.margin1,
                &p1,
                m.spec.margin2,
                &p2,
                &m.spec.copula,
                theta,
                m.y1[i],
                m.y2[i],
            );
            st.p1.push(p1);
            st.p2.push(p2);
            st.slopes1.push(s1);
            st.slopes2.push(s2);
            st.theta.push(theta);
            st.dtheta_deta.push(dth);
            st.u.push(parts.u);
            st.v.push(parts.v);
            st.log_density.push(parts.log_density);
            st.clamps += parts.clamps;
        }
        st.etas = etas;
        st
    }

    /// Analytic score of the unpenalized log-likelihood.
    pub fn score(&self, delta: &DVector<f64>) -> Result<DVector<f64>> {
        self.score_from(&self.state(delta))
    }

    pub fn score_from(&self, st: &ObsState) -> Result<DVector<f64>> {
        if !st.is_finite() {
            return Err(Error::Numerical(
                "score requested where the likelihood is not finite".into(),
            ));
        }
        let m = self.model;
        let n = m.n;
        let (m1, m2) = (m.spec.margin1, m.spec.margin2);

        let mut dlc_du = vec![0.0; n];
        let mut dlc_dv = vec![0.0; n];
        let mut dlc_dth = vec![0.0; n];
        for i in 0..n {
            let d = m.spec.copula.derivs(st.u[i], st.v[i], st.theta[i]);
            dlc_du[i] = d.dlogc_du;
            dlc_dv[i] = d.dlogc_dv;
            dlc_dth[i] = d.dlogc_dtheta;
        }
        let lp1: Vec<[f64; 3]> = (0..n).map(|i| m1.logpdf_derivs(m.y1[i], &st.p1[i])).collect();
        let lp2: Vec<[f64; 3]> = (0..n).map(|i| m2.logpdf_derivs(m.y2[i], &st.p2[i])).collect();
        let cd1: Vec<[f64; 3]> = (0..n).map(|i| m1.cdf_derivs(m.y1[i], &st.p1[i])).collect();
        let cd2: Vec<[f64; 3]> = (0..n).map(|i| m2.cdf_derivs(m.y2[i], &st.p2[i])).collect();

        let mut g = DVector::zeros(m.layout.total);
        for (e, target) in m.spec.eq_targets().iter().enumerate() {
            let w = DVector::from_fn(n, |i, _| match *target {
                EqTarget::Margin { side: 0, param } => {
                    (lp1[i][param] + dlc_du[i] * cd1[i][param]) * st.slopes1[i][param]
                }
                EqTarget::Margin { side: 1, param } => {
                    (lp2[i][param] + dlc_dv[i] * cd2[i][param]) * st.slopes2[i][param]
                }
                EqTarget::Margin { .. } => unreachable!(),
                EqTarget::Theta => dlc_dth[i] * st.dtheta_deta[i],
            });
            let (off, wdt) = m.layout.eq_spans[e];
            let ge = m.equations[e].design.z.tr_mul(&w);
            if ge.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite score in equation {}",
                    m.equations[e].name
                )));
            }
            g.rows_mut(off, wdt).copy_from(&ge);
        }
        Ok(g)
    }

    /// Hessian of the log-likelihood: central differences of the analytic
    /// score, column-parallel, symmetrized.
    pub fn hessian(&self, delta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = delta.len();
        let cols: Vec<DVector<f64>> = (0..p)
            .into_par_iter()
            .map(|j| {
                let h = 1e-5 * (1.0 + delta[j].abs());
                let mut dp = delta.clone();
                dp[j] += h;
                let mut dm = delta.clone();
                dm[j] -= h;
                Ok((self.score(&dp)? - self.score(&dm)?) / (2.0 * h))
            })
            .collect::<Result<Vec<_>>>()?;
        let h = DMatrix::from_columns(&cols);
        Ok((&h + h.transpose()) * 0.5)
    }

    /// ell_p = ell - 0.5 delta' S delta for a fixed penalty matrix.
    pub fn penalized_value(&self, delta: &DVector<f64>, s: &DMatrix<f64>) -> (f64, usize) {
        let (l, c) = self.value(delta);
        (l - 0.5 * (s * delta).dot(delta), c)
    }

    pub fn penalized_score(&self, delta: &DVector<f64>, s: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(self.score(delta)? - s * delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Dataset};
    use crate::model::{self, ModelSpec, TermExpr};
    use crate::quadrature::integrate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn lin(col: &str) -> TermExpr {
        TermExpr::Linear { col: col.into() }
    }

    /// Dataset with two covariates and responses drawn from the margins.
    fn make_data(n: usize, m1: MarginFamily, m2: MarginFamily, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let pick = |m: MarginFamily, rng: &mut ChaCha20Rng| match m {
            MarginFamily::Beta => MarginFamily::Beta.sample(&MarginParams::new(0.4, 0.5), n, rng),
            MarginFamily::Dagum | MarginFamily::SinghMaddala => {
                m.sample(&MarginParams::new3(1.2, 2.5, 1.5), n, rng)
            }
            MarginFamily::Normal | MarginFamily::Gumbel | MarginFamily::ReverseGumbel
            | MarginFamily::Logistic => m.sample(&MarginParams::new(0.3, 0.8), n, rng),
            _ => m.sample(&MarginParams::new(1.1, 0.6), n, rng),
        };
        let y1 = pick(m1, &mut rng);
        let y2 = pick(m2, &mut rng);
        Dataset::new(
            vec!["y1".into(), "y2".into(), "x1".into(), "x2".into()],
            vec![
                Column::Numeric(y1),
                Column::Numeric(y2),
                Column::Numeric(x1),
                Column::Numeric(x2),
            ],
        )
        .unwrap()
    }

    /// Small model: linear + spline pieces spread over the equations.
    fn make_model(m1: MarginFamily, m2: MarginFamily, cop: &str, data: &Dataset) -> crate::model::BuiltModel {
        let n_eq = m1.n_params() + m2.n_params() + 1;
        let mut equations = vec![Vec::new(); n_eq];
        equations[0] = vec![lin("x1"), TermExpr::Spline { col: "x2".into(), k: 6 }];
        equations[1] = vec![lin("x2")];
        equations[n_eq - 1] = vec![lin("x1")];
        let spec = ModelSpec {
            margin1: m1,
            margin2: m2,
            copula: Copula::from_tag(cop).unwrap(),
            y1: "y1".into(),
            y2: "y2".into(),
            equations,
        };
        model::build(spec, data, None).unwrap()
    }

    /// A coefficient vector keeping every parameter near its sampling value.
    fn start_delta(m: &crate::model::BuiltModel, jitter: f64, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut delta = DVector::from_fn(m.layout.total, |_, _| jitter * (rng.gen::<f64>() - 0.5));
        let names = m.spec.equation_names();
        for (e, &(off, _)) in m.layout.eq_spans.iter().enumerate() {
            let (m1, m2) = (m.spec.margin1, m.spec.margin2);
            let three = |fam: MarginFamily| fam.n_params() == 3;
            let intercept = match names[e] {
                "mu1" if three(m1) => m1.links()[0].invert(1.2),
                "mu2" if three(m2) => m2.links()[0].invert(1.2),
                "mu1" => m1.links()[0].invert(if m1 == MarginFamily::Beta { 0.4 } else { 0.9 }),
                "mu2" => m2.links()[0].invert(if m2 == MarginFamily::Beta { 0.4 } else { 0.9 }),
                "sigma1" if three(m1) => m1.links()[1].invert(2.5),
                "sigma2" if three(m2) => m2.links()[1].invert(2.5),
                "sigma1" => m1.links()[1].invert(if m1 == MarginFamily::Beta { 0.5 } else { 0.7 }),
                "sigma2" => m2.links()[1].invert(if m2 == MarginFamily::Beta { 0.5 } else { 0.7 }),
                "nu1" => m1.links()[2].invert(1.5),
                "nu2" => m2.links()[2].invert(1.5),
                "theta" => {
                    let (lo, hi) = m.spec.copula.theta_bounds();
                    let th = if lo >= 0.0 {
                        lo + 0.8
                    } else if hi <= 0.0 {
                        hi - 0.8
                    } else {
                        0.4 * hi.min(5.0)
                    };
                    m.spec.copula.eta_from_theta(th)
                }
                _ => unreachable!(),
            };
            delta[off] += intercept;
        }
        delta
    }

    #[test]
    fn score_matches_finite_differences() {
        use MarginFamily::*;
        let cases = [
            (Normal, Normal, "N"),
            (Gamma, LogNormal, "C90"),
            (Weibull, Gumbel, "J180"),
            (Dagum, Beta, "F"),
            (SinghMaddala, Logistic, "G270"),
            (InverseGaussian, ReverseGumbel, "AMH"),
            (Normal, Gamma, "FGM"),
            (LogNormal, Weibull, "C180"),
        ];
        for (round, &(m1, m2, cop)) in cases.iter().enumerate() {
            let data = make_data(50, m1, m2, 100 + round as u64);
            let m = make_model(m1, m2, cop, &data);
            let lik = Likelihood::new(&m);
            let delta = start_delta(&m, 0.2, 7 + round as u64);
            let (l0, _) = lik.value(&delta);
            assert!(l0.is_finite(), "{cop}: start not finite");
            let g = lik.score(&delta).unwrap();
            for j in 0..delta.len() {
                let h = 1e-6 * (1.0 + delta[j].abs());
                let mut dp = delta.clone();
                dp[j] += h;
                let mut dm = delta.clone();
                dm[j] -= h;
                let fd = (lik.value(&dp).0 - lik.value(&dm).0) / (2.0 * h);
                let tol = 1e-5 * g[j].abs().max(fd.abs()).max(1.0);
                assert!(
                    (g[j] - fd).abs() < tol,
                    "{m1} {m2} {cop} coef {j}: analytic {} vs fd {}",
                    g[j],
                    fd
                );
            }
        }
    }

    #[test]
    fn independence_fgm_score_decomposes() {
        let data = make_data(60, MarginFamily::Gamma, MarginFamily::Normal, 3);
        let m = make_model(MarginFamily::Gamma, MarginFamily::Normal, "FGM", &data);
        let lik = Likelihood::new(&m);
        let mut delta = start_delta(&m, 0.15, 11);
        // zero the whole theta equation: theta = tanh(0) = 0, independence
        let (off, w) = *m.layout.eq_spans.last().unwrap();
        for j in 0..w {
            delta[off + j] = 0.0;
        }
        let st = lik.state(&delta);
        let g = lik.score_from(&st).unwrap();

        // at theta = 0 the copula factor is flat: margin blocks must equal the
        // margin-only score and the theta intercept must match d tau-like term
        for (e, target) in m.spec.eq_targets().iter().enumerate() {
            let (off, wdt) = m.layout.eq_spans[e];
            match *target {
                EqTarget::Margin { side, param } => {
                    for i in 0..m.n {
                        assert!(st.log_density[i].is_finite());
                    }
                    let w = DVector::from_fn(m.n, |i, _| {
                        if side == 0 {
                            m.spec.margin1.logpdf_derivs(m.y1[i], &st.p1[i])[param]
                                * st.slopes1[i][param]
                        } else {
                            m.spec.margin2.logpdf_derivs(m.y2[i], &st.p2[i])[param]
                                * st.slopes2[i][param]
                        }
                    });
                    let ge = m.equations[e].design.z.tr_mul(&w);
                    for j in 0..wdt {
                        assert!(
                            (g[off + j] - ge[j]).abs() < 1e-10 * ge[j].abs().max(1.0),
                            "margin-only score mismatch at eq {e}"
                        );
                    }
                }
                EqTarget::Theta => {}
            }
        }
    }

    #[test]
    fn gaussian_margins_gaussian_copula_closed_form() {
        let data = make_data(100, MarginFamily::Normal, MarginFamily::Normal, 9);
        let m = make_model(MarginFamily::Normal, MarginFamily::Normal, "N", &data);
        let lik = Likelihood::new(&m);
        let delta = start_delta(&m, 0.3, 21);
        let st = lik.state(&delta);
        assert!(st.is_finite());
        for i in 0..m.n {
            let (mu1, s1) = (st.p1[i].mu, st.p1[i].sigma);
            let (mu2, s2) = (st.p2[i].mu, st.p2[i].sigma);
            let r = st.theta[i];
            let z1 = (m.y1[i] - mu1) / s1;
            let z2 = (m.y2[i] - mu2) / s2;
            let q = (z1 * z1 - 2.0 * r * z1 * z2 + z2 * z2) / (1.0 - r * r);
            let ln_bvn = -(2.0 * std::f64::consts::PI * s1 * s2 * (1.0 - r * r).sqrt()).ln()
                - 0.5 * q;
            let rel = (st.log_density[i] - ln_bvn).abs() / ln_bvn.abs().max(1.0);
            assert!(rel < 1e-8, "obs {i}: {} vs {ln_bvn}", st.log_density[i]);
        }
    }

    #[test]
    fn joint_density_integrates_to_one() {
        let p1 = MarginParams::new(0.4, 0.9);
        let p2 = MarginParams::new(-0.3, 1.2);
        let cop = Copula::from_tag("F").unwrap();
        let f = |y1: f64, y2: f64| {
            joint_parts(
                MarginFamily::Normal,
                &p1,
                MarginFamily::Gumbel,
                &p2,
                &cop,
                3.0,
                y1,
                y2,
            )
            .log_density
            .exp()
        };
        let total = integrate(
            &|y1| integrate(&|y2| f(y1, y2), -14.0, 12.0, 1e-9),
            -9.0,
            10.0,
            1e-8,
        );
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn reordering_rows_leaves_likelihood_unchanged() {
        let m1 = MarginFamily::Weibull;
        let m2 = MarginFamily::Logistic;
        let data = make_data(40, m1, m2, 17);
        let m = make_model(m1, m2, "G0", &data);
        let lik = Likelihood::new(&m);
        let delta = start_delta(&m, 0.2, 5);
        let (l0, _) = lik.value(&delta);

        // reverse all rows
        let rev = |c: &Column| match c {
            Column::Numeric(v) => Column::Numeric(v.iter().rev().copied().collect()),
            Column::Factor(v) => Column::Factor(v.iter().rev().cloned().collect()),
        };
        let data2 = Dataset::new(
            data.names.clone(),
            data.columns.iter().map(rev).collect(),
        )
        .unwrap();
        let m2b = make_model(m1, m2, "G0", &data2);
        let lik2 = Likelihood::new(&m2b);
        // spline knots come from quantiles of the same values, so designs agree
        let (l1, _) = lik2.value(&delta);
        assert!((l0 - l1).abs() < 1e-9 * l0.abs().max(1.0));
    }

    #[test]
    fn penalty_shrinks_objective() {
        let data = make_data(45, MarginFamily::Normal, MarginFamily::Normal, 23);
        let m = make_model(MarginFamily::Normal, MarginFamily::Normal, "N", &data);
        let lik = Likelihood::new(&m);
        let mut delta = start_delta(&m, 0.0, 0);
        // put visible curvature in the spline block of equation 1
        let pen = &m.layout.penalties[0];
        for j in 0..pen.d.nrows() {
            delta[pen.offset + j] = ((j as f64) - 1.5).powi(2) * 0.1;
        }
        let quad = {
            let seg = delta.rows(pen.offset, pen.d.nrows());
            (&pen.d * seg).dot(&seg)
        };
        assert!(quad > 1e-6, "spline coefficients must leave the null space");
        let (l1, _) = lik.penalized_value(&delta, &m.layout.penalty_matrix(&[1.0]));
        let (l10, _) = lik.penalized_value(&delta, &m.layout.penalty_matrix(&[10.0]));
        let (l0, _) = lik.value(&delta);
        assert!(l10 < l1 && l1 < l0);
        assert!((l0 - 0.5 * quad - l1).abs() < 1e-10 * l0.abs().max(1.0));
    }

    #[test]
    fn hessian_matches_value_curvature() {
        let data = make_data(35, MarginFamily::Gamma, MarginFamily::Normal, 31);
        let m = make_model(MarginFamily::Gamma, MarginFamily::Normal, "C0", &data);
        let lik = Likelihood::new(&m);
        let delta = start_delta(&m, 0.1, 13);
        let hess = lik.hessian(&delta).unwrap();
        assert!((&hess - hess.transpose()).abs().max() < 1e-8);

        let val = |d: &DVector<f64>| lik.value(d).0;
        let h = 1e-4;
        for &(i, j) in &[(0usize, 0usize), (2, 2), (0, 3), (4, 9), (1, 7)] {
            let mut dpp = delta.clone();
            let mut dpm = delta.clone();
            let mut dmp = delta.clone();
            let mut dmm = delta.clone();
            dpp[i] += h;
            dpp[j] += h;
            dpm[i] += h;
            dpm[j] -= h;
            dmp[i] -= h;
            dmp[j] += h;
            dmm[i] -= h;
            dmm[j] -= h;
            let fd = (val(&dpp) - val(&dpm) - val(&dmp) + val(&dmm)) / (4.0 * h * h);
            let tol = 2e-3 * fd.abs().max(hess[(i, j)].abs()).max(1.0);
            assert!(
                (hess[(i, j)] - fd).abs() < tol,
                "H[{i},{j}] = {} vs fd {fd}",
                hess[(i, j)]
            );
        }
    }

    #[test]
    fn overflow_is_signaled_not_fatal() {
        let data = make_data(30, MarginFamily::Gamma, MarginFamily::Normal, 37);
        let m = make_model(MarginFamily::Gamma, MarginFamily::Normal, "N", &data);
        let lik = Likelihood::new(&m);
        let mut delta = start_delta(&m, 0.1, 19);
        delta[0] = 800.0; // exp overflow in the mu1 link
        let (l, _) = lik.value(&delta);
        assert_eq!(l, f64::NEG_INFINITY);
        assert!(lik.score(&delta).is_err());
    }

    #[test]
    fn extreme_tail_points_clamp_and_count() {
        let data = {
            let y1 = vec![1e-9, 0.5, 40.0];
            let y2 = vec![-30.0, 0.0, 30.0];
            let x = vec![0.1, 0.5, 0.9];
            Dataset::new(
                vec!["y1".into(), "y2".into(), "x1".into(), "x2".into()],
                vec![
                    Column::Numeric(y1),
                    Column::Numeric(y2),
                    Column::Numeric(x.clone()),
                    Column::Numeric(x),
                ],
            )
            .unwrap()
        };
        let spec = ModelSpec {
            margin1: MarginFamily::Gamma,
            margin2: MarginFamily::Normal,
            copula: Copula::from_tag("N").unwrap(),
            y1: "y1".into(),
            y2: "y2".into(),
            equations: vec![vec![]; 5],
        };
        let m = model::build(spec, &data, None).unwrap();
        let lik = Likelihood::new(&m);
        let delta = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.5]);
        let (l, clamps) = lik.value(&delta);
        assert!(l.is_finite());
        assert!(clamps > 0);
    }
}
