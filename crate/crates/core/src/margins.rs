//! Marginal response distributions: eleven continuous two- and
//! three-parameter families, each giving cdf, log-density, quantile, moments,
//! parameter links, and the partial derivatives of F and log f with respect
//! to (mu, sigma, nu) that the joint score needs.
//!
//! Log-densities are evaluated directly in log space, and cdf tails use
//! expm1/ln_1p forms, so extreme observations degrade to -inf rather than
//! NaN.

use crate::error::{Error, Result};
use crate::rootfind::brent;
use crate::special::{
    beta_inc, beta_inc_da, beta_inc_db, digamma, dnorm, erfcx, gamma, gamma_p, gamma_p_da,
    ln_beta, ln_gamma, pnorm, qnorm, LN_SQRT_2PI,
};
use crate::LINK_EPS;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;

/// Euler-Mascheroni constant (Gumbel-family means).
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Family tags accepted by [`MarginFamily::from_tag`], in alphabetical order.
pub const TAGS: [&str; 11] = [
    "BE", "DAGUM", "GA", "GU", "iG", "LN", "LO", "N", "rGU", "SM", "WEI",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginFamily {
    Beta,
    Dagum,
    Gamma,
    Gumbel,
    InverseGaussian,
    LogNormal,
    Logistic,
    Normal,
    ReverseGumbel,
    SinghMaddala,
    Weibull,
}

/// Parameter triple for a marginal family. `nu` is ignored by the
/// two-parameter families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginParams {
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
}

impl MarginParams {
    pub fn new(mu: f64, sigma: f64) -> Self {
        Self { mu, sigma, nu: 1.0 }
    }

    pub fn new3(mu: f64, sigma: f64, nu: f64) -> Self {
        Self { mu, sigma, nu }
    }

    /// Parameter by index: 0 = mu, 1 = sigma, 2 = nu.
    pub fn get(&self, k: usize) -> f64 {
        match k {
            0 => self.mu,
            1 => self.sigma,
            2 => self.nu,
            _ => panic!("parameter index {k} out of range"),
        }
    }

    pub fn set(&mut self, k: usize, v: f64) {
        match k {
            0 => self.mu = v,
            1 => self.sigma = v,
            2 => self.nu = v,
            _ => panic!("parameter index {k} out of range"),
        }
    }
}

/// Monotone map from an unconstrained predictor onto a parameter range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// Real line: parameter = eta.
    Identity,
    /// Positive half-line: parameter = exp(eta) + epsilon.
    LogShifted,
    /// Unit interval: parameter = standardized logistic cdf of eta.
    LogisticCdf,
}

impl Link {
    /// Map a predictor value to (parameter, d parameter / d predictor).
    pub fn apply(self, eta: f64) -> (f64, f64) {
        match self {
            Link::Identity => (eta, 1.0),
            Link::LogShifted => {
                let e = eta.exp();
                (e + LINK_EPS, e)
            }
            Link::LogisticCdf => {
                let p = plogis(eta);
                (p, p * (1.0 - p))
            }
        }
    }

    /// Predictor value reproducing `value`; inverse of [`Link::apply`].
    pub fn invert(self, value: f64) -> f64 {
        match self {
            Link::Identity => value,
            Link::LogShifted => (value - LINK_EPS).max(f64::MIN_POSITIVE).ln(),
            Link::LogisticCdf => {
                let p = value.clamp(1e-15, 1.0 - 1e-15);
                (p / (1.0 - p)).ln()
            }
        }
    }
}

fn plogis(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Shared inverse-Gaussian cdf pieces: (cdf, leading normal argument a,
/// g = e^{2/(mu sigma^2)} Phi(b)). The exponential factor is folded into a
/// scaled complementary error function so nothing overflows.
fn ig_parts(y: f64, mu: f64, s: f64) -> (f64, f64, f64) {
    let rt = s * y.sqrt();
    let a = (y / mu - 1.0) / rt;
    let b = -(y / mu + 1.0) / rt;
    let g = 0.5 * erfcx(-b / SQRT_2) * (-0.5 * a * a).exp();
    (pnorm(a) + g, a, g)
}

/// Beta shapes (alpha1, alpha2) from the (mean, scale) parameterization.
fn be_shapes(mu: f64, s: f64) -> (f64, f64) {
    let r = (1.0 - s * s) / (s * s);
    (mu * r, (1.0 - mu) * r)
}

impl MarginFamily {
    pub const ALL: [MarginFamily; 11] = [
        MarginFamily::Beta,
        MarginFamily::Dagum,
        MarginFamily::Gamma,
        MarginFamily::Gumbel,
        MarginFamily::InverseGaussian,
        MarginFamily::LogNormal,
        MarginFamily::Logistic,
        MarginFamily::Normal,
        MarginFamily::ReverseGumbel,
        MarginFamily::SinghMaddala,
        MarginFamily::Weibull,
    ];

    pub fn from_tag(tag: &str) -> Option<Self> {
        let i = TAGS.iter().position(|t| *t == tag)?;
        Some(Self::ALL[i])
    }

    pub fn tag(self) -> &'static str {
        let i = Self::ALL.iter().position(|f| *f == self).unwrap();
        TAGS[i]
    }

    pub fn n_params(self) -> usize {
        match self {
            MarginFamily::Dagum | MarginFamily::SinghMaddala => 3,
            _ => 2,
        }
    }

    /// Open support interval of the response.
    pub fn support(self) -> (f64, f64) {
        match self {
            MarginFamily::Beta => (0.0, 1.0),
            MarginFamily::Gumbel
            | MarginFamily::Logistic
            | MarginFamily::Normal
            | MarginFamily::ReverseGumbel => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Per-parameter links, in (mu, sigma, nu) order.
    pub fn links(self) -> [Link; 3] {
        match self {
            MarginFamily::Beta => [Link::LogisticCdf, Link::LogisticCdf, Link::Identity],
            MarginFamily::Gumbel
            | MarginFamily::Logistic
            | MarginFamily::Normal
            | MarginFamily::ReverseGumbel => [Link::Identity, Link::LogShifted, Link::Identity],
            _ => [Link::LogShifted, Link::LogShifted, Link::LogShifted],
        }
    }

    /// Validate a parameter triple against the family's ranges.
    pub fn check_params(self, p: &MarginParams) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::Domain(format!(
                "{} out of range for margin {}: mu={}, sigma={}, nu={}",
                what,
                self.tag(),
                p.mu,
                p.sigma,
                p.nu
            )))
        };
        if !p.mu.is_finite() || !p.sigma.is_finite() {
            return bad("non-finite parameter");
        }
        match self {
            MarginFamily::Beta => {
                if !(p.mu > 0.0 && p.mu < 1.0) || !(p.sigma > 0.0 && p.sigma < 1.0) {
                    return bad("parameter");
                }
            }
            MarginFamily::Gumbel
            | MarginFamily::Logistic
            | MarginFamily::Normal
            | MarginFamily::ReverseGumbel => {
                if !(p.sigma > 0.0) {
                    return bad("sigma");
                }
            }
            _ => {
                if !(p.mu > 0.0) || !(p.sigma > 0.0) {
                    return bad("parameter");
                }
                if self.n_params() == 3 && !(p.nu > 0.0 && p.nu.is_finite()) {
                    return bad("nu");
                }
            }
        }
        Ok(())
    }

    /// Validate an observation against the family's support.
    pub fn check_y(self, y: f64) -> Result<()> {
        let (lo, hi) = self.support();
        if y.is_finite() && y > lo && y < hi {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "response {} outside the support of margin {}",
                y,
                self.tag()
            )))
        }
    }

    /// F(y | mu, sigma, nu).
    pub fn cdf(self, y: f64, p: &MarginParams) -> f64 {
        let (mu, s, nu) = (p.mu, p.sigma, p.nu);
        match self {
            MarginFamily::Normal => pnorm((y - mu) / s),
            MarginFamily::LogNormal => pnorm((y.ln() - mu) / s),
            MarginFamily::Logistic => plogis((y - mu) / s),
            MarginFamily::Gumbel => -(-((y - mu) / s).exp()).exp_m1(),
            MarginFamily::ReverseGumbel => (-(-(y - mu) / s).exp()).exp(),
            MarginFamily::Weibull => -(-(s * (y / mu).ln()).exp()).exp_m1(),
            MarginFamily::Gamma => {
                let a = 1.0 / (s * s);
                gamma_p(a, y / (mu * s * s))
            }
            MarginFamily::InverseGaussian => ig_parts(y, mu, s).0,
            MarginFamily::Beta => {
                let (a1, a2) = be_shapes(mu, s);
                beta_inc(a1, a2, y)
            }
            MarginFamily::SinghMaddala => {
                let lt = s * (y / mu).ln();
                -(-nu * softplus(lt)).exp_m1()
            }
            MarginFamily::Dagum => {
                let lt = s * (y / mu).ln();
                (-nu * softplus(-lt)).exp()
            }
        }
    }

    /// log f(y | mu, sigma, nu).
    pub fn logpdf(self, y: f64, p: &MarginParams) -> f64 {
        let (mu, s, nu) = (p.mu, p.sigma, p.nu);
        match self {
            MarginFamily::Normal => {
                let w = (y - mu) / s;
                -LN_SQRT_2PI - s.ln() - 0.5 * w * w
            }
            MarginFamily::LogNormal => {
                let w = (y.ln() - mu) / s;
                -LN_SQRT_2PI - s.ln() - y.ln() - 0.5 * w * w
            }
            MarginFamily::Logistic => {
                let a = -((y - mu) / s).abs();
                a - 2.0 * a.exp().ln_1p() - s.ln()
            }
            MarginFamily::Gumbel => {
                let w = (y - mu) / s;
                w - w.exp() - s.ln()
            }
            MarginFamily::ReverseGumbel => {
                let w = (y - mu) / s;
                -w - (-w).exp() - s.ln()
            }
            MarginFamily::Weibull => {
                let l = (y / mu).ln();
                s.ln() - mu.ln() + (s - 1.0) * l - (s * l).exp()
            }
            MarginFamily::Gamma => {
                let a = 1.0 / (s * s);
                let x = y / (mu * s * s);
                (a - 1.0) * y.ln() - x - ln_gamma(a) - a * (mu * s * s).ln()
            }
            MarginFamily::InverseGaussian => {
                let d = y - mu;
                -LN_SQRT_2PI - s.ln() - 1.5 * y.ln() - d * d / (2.0 * mu * mu * s * s * y)
            }
            MarginFamily::Beta => {
                let (a1, a2) = be_shapes(mu, s);
                (a1 - 1.0) * y.ln() + (a2 - 1.0) * (-y).ln_1p() - ln_beta(a1, a2)
            }
            MarginFamily::SinghMaddala => {
                let l = (y / mu).ln();
                s.ln() + nu.ln() + s * l - y.ln() - (nu + 1.0) * softplus(s * l)
            }
            MarginFamily::Dagum => {
                let l = (y / mu).ln();
                s.ln() + nu.ln() - y.ln() + s * nu * l - (nu + 1.0) * softplus(s * l)
            }
        }
    }

    pub fn pdf(self, y: f64, p: &MarginParams) -> f64 {
        self.logpdf(y, p).exp()
    }

    /// Inverse cdf. `pr` must lie strictly in (0, 1); families without a
    /// closed-form inverse (GA, iG, BE) are solved by bracketed root-finding.
    pub fn quantile(self, pr: f64, p: &MarginParams) -> f64 {
        let (mu, s, nu) = (p.mu, p.sigma, p.nu);
        match self {
            MarginFamily::Normal => mu + s * qnorm(pr),
            MarginFamily::LogNormal => (mu + s * qnorm(pr)).exp(),
            MarginFamily::Logistic => mu + s * (pr / (1.0 - pr)).ln(),
            MarginFamily::Gumbel => mu + s * (-(-pr).ln_1p()).ln(),
            MarginFamily::ReverseGumbel => mu - s * (-pr.ln()).ln(),
            MarginFamily::Weibull => mu * (-(-pr).ln_1p()).powf(1.0 / s),
            MarginFamily::SinghMaddala => {
                mu * ((1.0 - pr).powf(-1.0 / nu) - 1.0).powf(1.0 / s)
            }
            MarginFamily::Dagum => mu * (pr.powf(-1.0 / nu) - 1.0).powf(-1.0 / s),
            MarginFamily::Gamma | MarginFamily::InverseGaussian => {
                root_quantile(pr, mu, |y| self.cdf(y, p))
            }
            MarginFamily::Beta => {
                let f = |y: f64| self.cdf(y, p) - pr;
                let mut lo = 1e-12;
                while lo > 1e-300 && f(lo) > 0.0 {
                    lo *= 0.25;
                }
                let mut gap = 1e-12;
                while gap > 1e-300 && f(1.0 - gap) < 0.0 {
                    gap *= 0.25;
                }
                brent(f, lo, 1.0 - gap, 0.0, 200).unwrap_or(f64::NAN)
            }
        }
    }

    /// (mean, variance); `None` where the family's existence condition fails.
    pub fn moments(self, p: &MarginParams) -> (Option<f64>, Option<f64>) {
        let (mu, s, nu) = (p.mu, p.sigma, p.nu);
        // ratio Gamma(a)/Gamma(b) for positive arguments
        let gr = |a: f64, b: f64| (ln_gamma(a) - ln_gamma(b)).exp();
        match self {
            MarginFamily::Normal => (Some(mu), Some(s * s)),
            MarginFamily::LogNormal => {
                let s2 = s * s;
                (
                    Some((mu + 0.5 * s2).exp()),
                    Some(s2.exp_m1() * (2.0 * mu + s2).exp()),
                )
            }
            MarginFamily::Logistic => (Some(mu), Some(PI * PI * s * s / 3.0)),
            MarginFamily::Gumbel => (Some(mu - EULER_GAMMA * s), Some(PI * PI * s * s / 6.0)),
            MarginFamily::ReverseGumbel => {
                (Some(mu + EULER_GAMMA * s), Some(PI * PI * s * s / 6.0))
            }
            MarginFamily::Weibull => {
                let g1 = gamma(1.0 + 1.0 / s);
                let g2 = gamma(1.0 + 2.0 / s);
                (Some(mu * g1), Some(mu * mu * (g2 - g1 * g1)))
            }
            MarginFamily::Gamma => (Some(mu), Some(mu * mu * s * s)),
            MarginFamily::InverseGaussian => (Some(mu), Some(mu * mu * mu * s * s)),
            MarginFamily::Beta => (Some(mu), Some(s * s * mu * (1.0 - mu))),
            MarginFamily::Dagum => {
                // first two moments exist for sigma > 1 and > 2 respectively;
                // gamma(-k/sigma) < 0 there, hence the leading signs
                let mean = (s > 1.0)
                    .then(|| -(mu / s) * gamma(-1.0 / s) * gr(1.0 / s + nu, nu));
                let var = (s > 2.0).then(|| {
                    let m1 = gamma(-1.0 / s) * gr(1.0 / s + nu, nu);
                    let t2 = 2.0 * s * gamma(-2.0 / s) * gr(2.0 / s + nu, nu);
                    -(mu / s) * (mu / s) * (t2 + m1 * m1)
                });
                (mean, var)
            }
            MarginFamily::SinghMaddala => {
                let mean = (s * nu > 1.0)
                    .then(|| mu * gamma(1.0 + 1.0 / s) * gr(nu - 1.0 / s, nu));
                let var = (s * nu > 2.0).then(|| {
                    let m1 = gamma(1.0 + 1.0 / s) * gr(nu - 1.0 / s, nu);
                    let m2 = gamma(1.0 + 2.0 / s) * gr(nu - 2.0 / s, nu);
                    mu * mu * (m2 - m1 * m1)
                });
                (mean, var)
            }
        }
    }

    /// (dF/dmu, dF/dsigma, dF/dnu); the nu slot is zero for two-parameter
    /// families.
    pub fn cdf_derivs(self, y: f64, p: &MarginParams) -> [f64; 3] {
        let (mu, s, nu) = (p.mu, p.sigma, p.nu);
        match self {
            MarginFamily::Normal => {
                let w = (y - mu) / s;
                let d = dnorm(w);
                [-d / s, -d * w / s, 0.0]
            }
            MarginFamily::LogNormal => {
                let w = (y.ln() - mu) / s;
                let d = dnorm(w);
                [-d / s, -d * w / s, 0.0]
            }
            MarginFamily::Logistic => {
                let w = (y - mu) / s;
                let f = plogis(w);
                let d = f * (1.0 - f);
                [-d / s, -d * w / s, 0.0]
            }
            MarginFamily::Gumbel => {
                let w = (y - mu) / s;
                let d = (w - w.exp()).exp();
                [-d / s, -d * w / s, 0.0]
            }
            MarginFamily::ReverseGumbel => {
                let w = (y - mu) / s;
                let d = (-w - (-w).exp()).exp();
                [-d / s, -d * w / s, 0.0]
            }
            MarginFamily::Weibull => {
                let l = (y / mu).ln();
                let lt = s * l;
                let te = (lt - lt.exp()).exp(); // t e^{-t}
                [-s * te / mu, te * l, 0.0]
            }
            MarginFamily::Gamma => {
                let a = 1.0 / (s * s);
                let x = y / (mu * s * s);
                let core = (a * x.ln() - x - ln_gamma(a)).exp(); // x^a e^{-x} / Gamma(a)
                [
                    -core / mu,
                    -2.0 * (gamma_p_da(a, x) / (s * s) + core) / s,
                    0.0,
                ]
            }
            MarginFamily::InverseGaussian => {
                let (_, a, g) = ig_parts(y, mu, s);
                [
                    -2.0 * g / (mu * mu * s * s),
                    2.0 * dnorm(a) / (s * s * y.sqrt()) - 4.0 * g / (mu * s * s * s),
                    0.0,
                ]
            }
            MarginFamily::Beta => {
                let (a1, a2) = be_shapes(mu, s);
                let ia = beta_inc_da(a1, a2, y);
                let ib = beta_inc_db(a1, a2, y);
                let r = (1.0 - s * s) / (s * s);
                [
                    ia * r - ib * r,
                    ia * (-2.0 * mu / (s * s * s)) + ib * (-2.0 * (1.0 - mu) / (s * s * s)),
                    0.0,
                ]
            }
            MarginFamily::SinghMaddala => {
                let l = (y / mu).ln();
                let lt = s * l;
                let sp = softplus(lt);
                let core = nu * (lt - (nu + 1.0) * sp).exp(); // nu t (1+t)^{-nu-1}
                [-core * s / mu, core * l, (-nu * sp).exp() * sp]
            }
            MarginFamily::Dagum => {
                let l = (y / mu).ln();
                let ls = -s * l;
                let sp = softplus(ls);
                let core = nu * (ls - (nu + 1.0) * sp).exp();
                [-core * s / mu, core * l, -(-nu * sp).exp() * sp]
            }
        }
    }

    /// (d log f/dmu, d log f/dsigma, d log f/dnu).
    pub fn logpdf_derivs(self, y: f64, p: &MarginParams) -> [f64; 3] {
        let (mu, s, nu) = (p.mu, p.sigma, p.nu);
        match self {
            MarginFamily::Normal => {
                let w = (y - mu) / s;
                [w / s, (w * w - 1.0) / s, 0.0]
            }
            MarginFamily::LogNormal => {
                let w = (y.ln() - mu) / s;
                [w / s, (w * w - 1.0) / s, 0.0]
            }
            MarginFamily::Logistic => {
                let w = (y - mu) / s;
                let f = plogis(w);
                [(2.0 * f - 1.0) / s, ((2.0 * f - 1.0) * w - 1.0) / s, 0.0]
            }
            MarginFamily::Gumbel => {
                let w = (y - mu) / s;
                let e = w.exp();
                [(e - 1.0) / s, ((e - 1.0) * w - 1.0) / s, 0.0]
            }
            MarginFamily::ReverseGumbel => {
                let w = (y - mu) / s;
                let e = (-w).exp();
                [(1.0 - e) / s, ((1.0 - e) * w - 1.0) / s, 0.0]
            }
            MarginFamily::Weibull => {
                let l = (y / mu).ln();
                let t = (s * l).exp();
                [s * (t - 1.0) / mu, 1.0 / s + (1.0 - t) * l, 0.0]
            }
            MarginFamily::Gamma => {
                let a = 1.0 / (s * s);
                let x = y / (mu * s * s);
                [
                    (y - mu) / (mu * mu * s * s),
                    -2.0 * (x.ln() - digamma(a)) / (s * s * s) + 2.0 * (x - a) / s,
                    0.0,
                ]
            }
            MarginFamily::InverseGaussian => {
                let d = y - mu;
                [
                    d / (mu * mu * mu * s * s),
                    -1.0 / s + d * d / (mu * mu * s * s * s * y),
                    0.0,
                ]
            }
            MarginFamily::Beta => {
                let (a1, a2) = be_shapes(mu, s);
                let c = digamma(a1 + a2);
                let d1 = y.ln() - digamma(a1) + c;
                let d2 = (-y).ln_1p() - digamma(a2) + c;
                let r = (1.0 - s * s) / (s * s);
                [
                    d1 * r - d2 * r,
                    d1 * (-2.0 * mu / (s * s * s)) + d2 * (-2.0 * (1.0 - mu) / (s * s * s)),
                    0.0,
                ]
            }
            MarginFamily::SinghMaddala => {
                let l = (y / mu).ln();
                let lt = s * l;
                let rt = plogis(lt); // t / (1 + t)
                [
                    s / mu * ((nu + 1.0) * rt - 1.0),
                    1.0 / s + l * (1.0 - (nu + 1.0) * rt),
                    1.0 / nu - softplus(lt),
                ]
            }
            MarginFamily::Dagum => {
                let l = (y / mu).ln();
                let lt = s * l;
                let rt = plogis(lt);
                [
                    s / mu * ((nu + 1.0) * rt - nu),
                    1.0 / s + l * (nu - (nu + 1.0) * rt),
                    1.0 / nu + s * l - softplus(lt),
                ]
            }
        }
    }

    /// Draw `n` observations by inverse-cdf sampling.
    pub fn sample<R: rand::Rng + ?Sized>(
        self,
        p: &MarginParams,
        n: usize,
        rng: &mut R,
    ) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                self.quantile(u.clamp(1e-16, 1.0 - 1e-16), p)
            })
            .collect()
    }
}

impl fmt::Display for MarginFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Solve cdf(y) = pr on (0, inf) by bracket expansion from `guess` + Brent.
fn root_quantile<F: Fn(f64) -> f64>(pr: f64, guess: f64, cdf: F) -> f64 {
    let mut lo = guess.max(1e-300);
    let mut hi = lo;
    let mut k = 0;
    while cdf(lo) > pr && k < 4000 {
        lo *= 0.5;
        k += 1;
    }
    k = 0;
    while cdf(hi) < pr && k < 4000 {
        hi *= 2.0;
        k += 1;
    }
    brent(|y| cdf(y) - pr, lo, hi, 0.0, 200).unwrap_or(f64::NAN)
}
