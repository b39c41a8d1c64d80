//! Post-fit summaries: information criteria, normal-score residuals,
//! posterior coefficient draws for interval estimation, prediction on new
//! data, and fitted joint/conditional probabilities.

use crate::error::{Error, Result};
use crate::likelihood::ObsState;
use crate::margins::MarginParams;
use crate::model::{BuiltModel, EqTarget};
use crate::special::qnorm;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn aic(loglik: f64, edf: f64) -> f64 {
    -2.0 * loglik + 2.0 * edf
}

pub fn bic(loglik: f64, edf: f64, n: usize) -> f64 {
    -2.0 * loglik + (n as f64).ln() * edf
}

/// Normal scores of the fitted margin cdf values. When a margin is specified
/// correctly these are standard-normal samples.
pub fn quantile_residuals(state: &ObsState) -> (Vec<f64>, Vec<f64>) {
    (
        state.u.iter().map(|&u| qnorm(u)).collect(),
        state.v.iter().map(|&v| qnorm(v)).collect(),
    )
}

/// Draws from the large-sample coefficient posterior N(delta, cov); one draw
/// per row. Deterministic for a given seed.
pub fn posterior_draws(
    delta: &DVector<f64>,
    cov: &DMatrix<f64>,
    n_sim: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let p = delta.len();
    let mut m = cov.clone();
    let mut chol = nalgebra::linalg::Cholesky::new(m.clone());
    let mut jitter = 1e-12 * cov.diagonal().amax().max(1.0);
    while chol.is_none() && jitter < 1.0 {
        m += DMatrix::from_diagonal_element(p, p, jitter);
        chol = nalgebra::linalg::Cholesky::new(m.clone());
        jitter *= 100.0;
    }
    let chol =
        chol.ok_or_else(|| Error::Numerical("covariance could not be factorized".into()))?;
    let l = chol.l();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n_sim, p);
    for s in 0..n_sim {
        let z = DVector::from_fn(p, |_, _| {
            qnorm(rng.gen::<f64>().clamp(1e-16, 1.0 - 1e-16))
        });
        let draw = delta + &l * z;
        out.row_mut(s).copy_from(&draw.transpose());
    }
    Ok(out)
}

/// Empirical quantile with linear interpolation; `xs` must be sorted.
pub fn empirical_quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let h = p.clamp(0.0, 1.0) * (xs.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// Pointwise equal-tail intervals for a vector-valued function of the
/// coefficients, evaluated over posterior draws (rows of `draws`).
pub fn pointwise_intervals<F>(
    draws: &DMatrix<f64>,
    level: f64,
    f: F,
) -> Vec<(f64, f64)>
where
    F: Fn(&DVector<f64>) -> Vec<f64>,
{
    let n_sim = draws.nrows();
    let mut per_obs: Vec<Vec<f64>> = Vec::new();
    for s in 0..n_sim {
        let delta = draws.row(s).transpose();
        let vals = f(&delta);
        if per_obs.is_empty() {
            per_obs = vec![Vec::with_capacity(n_sim); vals.len()];
        }
        for (slot, v) in per_obs.iter_mut().zip(vals) {
            slot.push(v);
        }
    }
    let tail = 0.5 * (1.0 - level);
    per_obs
        .iter_mut()
        .map(|xs| {
            xs.sort_by(f64::total_cmp);
            (
                empirical_quantile(xs, tail),
                empirical_quantile(xs, 1.0 - tail),
            )
        })
        .collect()
}

/// Per-observation fitted parameters on arbitrary data.
#[derive(Debug, Clone)]
pub struct PredictedParams {
    pub etas: Vec<DVector<f64>>,
    pub p1: Vec<MarginParams>,
    pub p2: Vec<MarginParams>,
    pub theta: Vec<f64>,
    pub n: usize,
}

/// Evaluate every additive predictor on `data` and map through the links.
pub fn predict_params(
    model: &BuiltModel,
    delta: &DVector<f64>,
    data: &crate::data::Dataset,
) -> Result<PredictedParams> {
    let targets = model.spec.eq_targets();
    let mut etas = Vec::with_capacity(model.equations.len());
    for (eq, &(off, w)) in model.equations.iter().zip(&model.layout.eq_spans) {
        let z = eq.design_for(data)?;
        etas.push(&z * delta.rows(off, w));
    }
    let n = data.n;
    let links1 = model.spec.margin1.links();
    let links2 = model.spec.margin2.links();
    let mut p1 = vec![MarginParams::new(0.0, 1.0); n];
    let mut p2 = vec![MarginParams::new(0.0, 1.0); n];
    let mut theta = vec![0.0; n];
    for (e, target) in targets.iter().enumerate() {
        for i in 0..n {
            let eta = etas[e][i];
            match *target {
                EqTarget::Margin { side, param } => {
                    let links = if side == 0 { &links1 } else { &links2 };
                    let (val, _) = links[param].apply(eta);
                    if side == 0 {
                        p1[i].set(param, val);
                    } else {
                        p2[i].set(param, val);
                    }
                }
                EqTarget::Theta => {
                    theta[i] = model.spec.copula.theta_from_eta(eta).0;
                }
            }
        }
    }
    Ok(PredictedParams {
        etas,
        p1,
        p2,
        theta,
        n,
    })
}

/// Fitted dependence across observations.
#[derive(Debug, Clone)]
pub struct DependenceSummary {
    pub theta: Vec<f64>,
    pub tau: Vec<f64>,
    pub theta_mean: f64,
    pub tau_mean: f64,
}

pub fn dependence_summary(model: &BuiltModel, theta: &[f64]) -> DependenceSummary {
    let tau: Vec<f64> = theta
        .iter()
        .map(|&t| model.spec.copula.theta_to_tau(t))
        .collect();
    let n = theta.len().max(1) as f64;
    DependenceSummary {
        theta_mean: theta.iter().sum::<f64>() / n,
        tau_mean: tau.iter().sum::<f64>() / n,
        theta: theta.to_vec(),
        tau,
    }
}

/// P(Y1 <= y1, Y2 <= y2) under the fitted copula, and the product of the
/// fitted margins for comparison with an independence assumption.
#[derive(Debug, Clone)]
pub struct JointProbabilities {
    pub joint: Vec<f64>,
    pub independent: Vec<f64>,
}

pub fn joint_probabilities(
    model: &BuiltModel,
    u: &[f64],
    v: &[f64],
    theta: &[f64],
) -> JointProbabilities {
    let cop = &model.spec.copula;
    let joint: Vec<f64> = (0..u.len())
        .map(|i| cop.cdf(u[i], v[i], theta[i]))
        .collect();
    let independent = (0..u.len()).map(|i| u[i] * v[i]).collect();
    JointProbabilities { joint, independent }
}

/// P(Y1 <= y1 | Y2 <= y2) = C(u, v) / v.
pub fn conditional_probabilities(joint: &[f64], v: &[f64]) -> Vec<f64> {
    joint
        .iter()
        .zip(v)
        .map(|(&c, &vv)| if vv > 0.0 { (c / vv).clamp(0.0, 1.0) } else { 0.0 })
        .collect()
}
