//! Kendall's tau as a function of the dependence parameter, and its inverse.
//!
//! Frank and Joe need one-dimensional integrals with no elementary closed
//! form; both are evaluated by adaptive quadrature after substitutions that
//! remove the endpoint singularities. Inverses without a closed form use
//! bisection on the (strictly monotone) forward map.

use super::base::Base;
use crate::quadrature;

/// Kendall's tau for a base family at parameter `th` (base range).
pub(super) fn base_tau(base: Base, th: f64) -> f64 {
    match base {
        Base::Amh => amh_tau(th),
        Base::Clayton => th / (th + 2.0),
        Base::Fgm => 2.0 * th / 9.0,
        Base::Frank => frank_tau(th),
        Base::Gaussian => 2.0 / std::f64::consts::PI * th.asin(),
        Base::Gumbel => 1.0 - 1.0 / th,
        Base::Joe => joe_tau(th),
    }
}

/// Inverse of `base_tau`; `tau` is clamped into the family's attainable
/// range (used for starting values, so the clamp is deliberately generous).
pub(super) fn base_tau_inverse(base: Base, tau: f64) -> f64 {
    match base {
        Base::Amh => {
            let t = tau.clamp(-0.18, 0.33);
            invert_monotone(|th| amh_tau(th), t, -1.0 + 1e-9, 1.0 - 1e-9)
        }
        Base::Clayton => {
            let t = tau.clamp(1e-6, 0.95);
            2.0 * t / (1.0 - t)
        }
        Base::Fgm => (4.5 * tau).clamp(-1.0 + 1e-6, 1.0 - 1e-6),
        Base::Frank => {
            let t = tau.clamp(-0.95, 0.95);
            if t.abs() < 1e-8 {
                9.0 * t
            } else {
                invert_monotone(frank_tau, t, -300.0, 300.0)
            }
        }
        Base::Gaussian => (std::f64::consts::PI * tau.clamp(-0.999, 0.999) / 2.0).sin(),
        Base::Gumbel => 1.0 / (1.0 - tau.clamp(1e-6, 0.95)),
        Base::Joe => {
            let t = tau.clamp(1e-6, 0.95);
            invert_monotone(joe_tau, t, 1.0 + 1e-9, 1e4)
        }
    }
}

fn invert_monotone<F: Fn(f64) -> f64>(f: F, target: f64, lo: f64, hi: f64) -> f64 {
    crate::rootfind::brent(|th| f(th) - target, lo, hi, 1e-10, 200).unwrap_or_else(|| {
        if f(lo) > target {
            lo
        } else {
            hi
        }
    })
}

/// AMH: tau = 1 - 2/(3 th) - 2 (1-th)^2 ln(1-th) / (3 th^2), with the series
/// expansion taking over near th = 0 where the closed form cancels.
fn amh_tau(th: f64) -> f64 {
    if th.abs() < 1e-2 {
        return th * (2.0 / 9.0 + th * (1.0 / 18.0 + th / 45.0));
    }
    let omt = 1.0 - th;
    let l = (-th).ln_1p(); // ln(1 - th)
    1.0 - 2.0 / (3.0 * th) - 2.0 * omt * omt * l / (3.0 * th * th)
}

/// Frank: tau = 1 - 4/th + (4/th^2) * int_0^th t/(e^t - 1) dt.
fn frank_tau(th: f64) -> f64 {
    if th.abs() < 1e-6 {
        return th / 9.0;
    }
    let debye = quadrature::integrate(
        |t| {
            if t == 0.0 {
                1.0
            } else {
                t / t.exp_m1()
            }
        },
        0.0,
        th,
        1e-12,
    );
    1.0 - 4.0 / th + 4.0 * debye / (th * th)
}

/// Joe: tau = 1 + (2/th) * int_0^1 (1-w) ln(1-w) / w ds with w = s^(th/2);
/// the substitution keeps the integrand bounded on (0, 1).
fn joe_tau(th: f64) -> f64 {
    let half = 0.5 * th;
    let integral = quadrature::integrate(
        |s| {
            if s <= 0.0 {
                return -1.0; // limit of the integrand as w -> 0
            }
            let w = s.powf(half);
            if w < 1e-14 {
                return -1.0;
            }
            if w >= 1.0 {
                return 0.0;
            }
            (1.0 - w) * (-w).ln_1p() / w
        },
        0.0,
        1.0,
        1e-12,
    );
    1.0 + 2.0 / th * integral
}
