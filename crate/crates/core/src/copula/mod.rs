//! Bivariate copula families: AMH, Clayton, FGM, Frank, Gaussian, Gumbel and
//! Joe, with 90/180/270-degree rotations of Clayton, Gumbel and Joe.
//!
//! Rotated variants carry a signed dependence parameter: the 90- and
//! 270-degree rotations model negative dependence, so their theta is the
//! negated base parameter (for example Clayton-90 has theta < 0 and evaluates
//! the base Clayton at -theta).

mod base;
mod tau;

use base::{Base, BaseDerivs};

pub use crate::{LINK_EPS, UV_EPS};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

/// A copula family (base family + rotation).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Copula {
    base: Base,
    rot: Rotation,
}

/// Log copula density and its partial derivatives.
#[derive(Clone, Copy, Debug)]
pub struct CopulaDerivs {
    pub log_c: f64,
    pub dlogc_du: f64,
    pub dlogc_dv: f64,
    pub dlogc_dtheta: f64,
}

/// All recognized family tags.
pub const TAGS: [&str; 16] = [
    "AMH", "C0", "C90", "C180", "C270", "F", "FGM", "G0", "G90", "G180", "G270", "J0", "J90",
    "J180", "J270", "N",
];

impl Copula {
    pub fn from_tag(tag: &str) -> Option<Self> {
        use Base::*;
        use Rotation::*;
        let (base, rot) = match tag {
            "AMH" => (Amh, R0),
            "C0" => (Clayton, R0),
            "C90" => (Clayton, R90),
            "C180" => (Clayton, R180),
            "C270" => (Clayton, R270),
            "F" => (Frank, R0),
            "FGM" => (Fgm, R0),
            "N" => (Gaussian, R0),
            "G0" => (Gumbel, R0),
            "G90" => (Gumbel, R90),
            "G180" => (Gumbel, R180),
            "G270" => (Gumbel, R270),
            "J0" => (Joe, R0),
            "J90" => (Joe, R90),
            "J180" => (Joe, R180),
            "J270" => (Joe, R270),
            _ => return None,
        };
        Some(Copula { base, rot })
    }

    pub fn tag(&self) -> &'static str {
        use Base::*;
        use Rotation::*;
        match (self.base, self.rot) {
            (Amh, _) => "AMH",
            (Clayton, R0) => "C0",
            (Clayton, R90) => "C90",
            (Clayton, R180) => "C180",
            (Clayton, R270) => "C270",
            (Frank, _) => "F",
            (Fgm, _) => "FGM",
            (Gaussian, _) => "N",
            (Gumbel, R0) => "G0",
            (Gumbel, R90) => "G90",
            (Gumbel, R180) => "G180",
            (Gumbel, R270) => "G270",
            (Joe, R0) => "J0",
            (Joe, R90) => "J90",
            (Joe, R180) => "J180",
            (Joe, R270) => "J270",
        }
    }

    /// Open interval of admissible theta values.
    pub fn theta_bounds(&self) -> (f64, f64) {
        use Base::*;
        use Rotation::*;
        let neg = matches!(self.rot, R90 | R270);
        match self.base {
            Amh | Fgm | Gaussian => (-1.0, 1.0),
            Frank => (f64::NEG_INFINITY, f64::INFINITY),
            Clayton => {
                if neg {
                    (f64::NEG_INFINITY, 0.0)
                } else {
                    (0.0, f64::INFINITY)
                }
            }
            Gumbel | Joe => {
                if neg {
                    (f64::NEG_INFINITY, -1.0)
                } else {
                    (1.0, f64::INFINITY)
                }
            }
        }
    }

    /// Maps (u, v, theta) to the base family's arguments.
    fn base_args(&self, u: f64, v: f64, theta: f64) -> (f64, f64, f64) {
        match self.rot {
            Rotation::R0 => (u, v, theta),
            Rotation::R90 => (1.0 - u, v, -theta),
            Rotation::R180 => (1.0 - u, 1.0 - v, theta),
            Rotation::R270 => (u, 1.0 - v, -theta),
        }
    }

    /// Joint cdf C(u, v; theta).
    pub fn cdf(&self, u: f64, v: f64, theta: f64) -> f64 {
        let (bu, bv, bt) = self.base_args(u, v, theta);
        let c = self.base.cdf(bu, bv, bt);
        match self.rot {
            Rotation::R0 => c,
            Rotation::R90 => v - c,
            Rotation::R180 => u + v - 1.0 + c,
            Rotation::R270 => u - c,
        }
    }

    /// Conditional cdf dC/du = P(V <= v | U = u).
    pub fn hfun(&self, u: f64, v: f64, theta: f64) -> f64 {
        let (bu, bv, bt) = self.base_args(u, v, theta);
        let h = self.base.hfun(bu, bv, bt);
        match self.rot {
            Rotation::R0 | Rotation::R90 => h,
            Rotation::R180 | Rotation::R270 => 1.0 - h,
        }
    }

    /// Inverse of `hfun` in its second argument: the v solving
    /// hfun(u, v, theta) = w. Used for conditional-inversion sampling.
    pub fn hfun_inverse(&self, u: f64, w: f64, theta: f64) -> f64 {
        let (bu, bw, bt) = match self.rot {
            Rotation::R0 => (u, w, theta),
            Rotation::R90 => (1.0 - u, w, -theta),
            Rotation::R180 => (1.0 - u, 1.0 - w, theta),
            Rotation::R270 => (u, 1.0 - w, -theta),
        };
        let bv = base_hinv(self.base, bu, bw, bt);
        match self.rot {
            Rotation::R0 | Rotation::R90 => bv,
            Rotation::R180 | Rotation::R270 => 1.0 - bv,
        }
    }

    /// dC/dtheta at fixed (u, v).
    pub fn dcdf_dtheta(&self, u: f64, v: f64, theta: f64) -> f64 {
        let (bu, bv, bt) = self.base_args(u, v, theta);
        self.base.dcdf_dtheta(bu, bv, bt)
    }

    /// Log copula density.
    pub fn log_density(&self, u: f64, v: f64, theta: f64) -> f64 {
        let (bu, bv, bt) = self.base_args(u, v, theta);
        self.base.derivs(bu, bv, bt).log_c
    }

    /// Log density with all first derivatives, rotation signs applied.
    pub fn derivs(&self, u: f64, v: f64, theta: f64) -> CopulaDerivs {
        let (bu, bv, bt) = self.base_args(u, v, theta);
        let d: BaseDerivs = self.base.derivs(bu, bv, bt);
        let (su, sv, st) = match self.rot {
            Rotation::R0 => (1.0, 1.0, 1.0),
            Rotation::R90 => (-1.0, 1.0, -1.0),
            Rotation::R180 => (-1.0, -1.0, 1.0),
            Rotation::R270 => (1.0, -1.0, -1.0),
        };
        CopulaDerivs {
            log_c: d.log_c,
            dlogc_du: su * d.dlogc_du,
            dlogc_dv: sv * d.dlogc_dv,
            dlogc_dtheta: st * d.dlogc_dtheta,
        }
    }

    /// Kendall's tau implied by theta.
    pub fn theta_to_tau(&self, theta: f64) -> f64 {
        match self.rot {
            Rotation::R0 | Rotation::R180 => tau::base_tau(self.base, theta),
            Rotation::R90 | Rotation::R270 => -tau::base_tau(self.base, -theta),
        }
    }

    /// Theta achieving a given Kendall's tau (clamped into the attainable
    /// range; used for starting values).
    pub fn tau_to_theta(&self, tau_val: f64) -> f64 {
        match self.rot {
            Rotation::R0 | Rotation::R180 => tau::base_tau_inverse(self.base, tau_val),
            Rotation::R90 | Rotation::R270 => -tau::base_tau_inverse(self.base, -tau_val),
        }
    }

    /// Link function: theta and d theta / d eta from the unconstrained
    /// predictor eta.
    pub fn theta_from_eta(&self, eta: f64) -> (f64, f64) {
        use Base::*;
        let neg = matches!(self.rot, Rotation::R90 | Rotation::R270);
        match self.base {
            Amh | Fgm | Gaussian => {
                let t = eta.tanh().clamp(-(1.0 - LINK_EPS), 1.0 - LINK_EPS);
                (t, 1.0 - t * t)
            }
            Frank => {
                if eta >= 0.0 {
                    (eta + LINK_EPS, 1.0)
                } else {
                    (eta - LINK_EPS, 1.0)
                }
            }
            Clayton => {
                let e = eta.exp();
                if neg {
                    (-(e + LINK_EPS), -e)
                } else {
                    (e + LINK_EPS, e)
                }
            }
            Gumbel => {
                let e = eta.exp();
                if neg {
                    (-(e + 1.0), -e)
                } else {
                    (e + 1.0, e)
                }
            }
            Joe => {
                let e = eta.exp();
                if neg {
                    (-(e + 1.0 + LINK_EPS), -e)
                } else {
                    (e + 1.0 + LINK_EPS, e)
                }
            }
        }
    }

    /// Inverse link: the eta producing a given theta.
    pub fn eta_from_theta(&self, theta: f64) -> f64 {
        use Base::*;
        let a = theta.abs();
        match self.base {
            Amh | Fgm | Gaussian => {
                let t = theta.clamp(-(1.0 - LINK_EPS), 1.0 - LINK_EPS);
                t.atanh()
            }
            Frank => theta - LINK_EPS.copysign(theta),
            Clayton => (a - LINK_EPS).max(1e-300).ln(),
            Gumbel => (a - 1.0).max(1e-300).ln(),
            Joe => (a - 1.0 - LINK_EPS).max(1e-300).ln(),
        }
    }
}

impl std::fmt::Display for Copula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Inverse conditional cdf for a base family: v solving hfun(u, v) = w.
fn base_hinv(b: Base, u: f64, w: f64, th: f64) -> f64 {
    use crate::special::{pnorm, qnorm};
    let w = w.clamp(UV_EPS, 1.0 - UV_EPS);
    match b {
        Base::Gaussian => {
            let x = qnorm(u);
            pnorm(th * x + (1.0 - th * th).sqrt() * qnorm(w))
        }
        Base::Clayton => {
            // S = (w u^(th+1))^(-th/(th+1)); v = (S - u^-th + 1)^(-1/th)
            let a = -th * u.ln();
            let bexp = -th / (th + 1.0) * w.ln(); // ln S - a, always >= 0
            let lt = a + bexp.exp_m1().ln(); // ln(S - u^-th)
            let ln1pt = if lt > 700.0 { lt } else { lt.exp().ln_1p() };
            (-ln1pt / th).exp()
        }
        Base::Frank if th.abs() <= 30.0 => {
            let d = (-th).exp_m1();
            let y = w * d / ((-th * u).exp() * (1.0 - w) + w);
            (-y.ln_1p() / th).clamp(UV_EPS, 1.0 - UV_EPS)
        }
        Base::Fgm => {
            let k = th * (1.0 - 2.0 * u);
            if k.abs() < 1e-9 {
                w
            } else {
                let disc = (1.0 + k) * (1.0 + k) - 4.0 * k * w;
                (1.0 + k - disc.sqrt()) / (2.0 * k)
            }
        }
        _ => {
            // monotone in v; bracketed root find
            let f = |v: f64| b.hfun(u, v, th) - w;
            let lo = 1e-14;
            let hi = 1.0 - 1e-14;
            crate::rootfind::brent(f, lo, hi, 1e-12, 200).unwrap_or_else(|| {
                if f(lo) > 0.0 {
                    lo
                } else {
                    hi
                }
            })
        }
    }
}
