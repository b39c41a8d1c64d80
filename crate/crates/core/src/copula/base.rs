//! Base copula families evaluated in their native parameterization.
//!
//! Rotations are applied by the parent module; everything here assumes
//! `u, v` strictly inside (0, 1) and `theta` in the family's base range
//! (positive-dependence branch for Clayton, Gumbel and Joe; the full range
//! for AMH, FGM, Frank and Gaussian).
//!
//! Formulas are arranged so that extreme parameter values degrade to a
//! `-inf` log density rather than NaN, which lets the optimizer back off
//! from absurd trial steps.

use crate::special::{dnorm, pnorm, pnorm2, qnorm};

/// Log density and its partial derivatives with respect to both arguments
/// and the dependence parameter.
#[derive(Clone, Copy, Debug)]
pub(super) struct BaseDerivs {
    pub log_c: f64,
    pub dlogc_du: f64,
    pub dlogc_dv: f64,
    pub dlogc_dtheta: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(super) enum Base {
    Amh,
    Clayton,
    Fgm,
    Frank,
    Gaussian,
    Gumbel,
    Joe,
}

/// log(exp(a) + exp(b)) without overflow.
fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl Base {
    pub(super) fn cdf(self, u: f64, v: f64, th: f64) -> f64 {
        match self {
            Base::Amh => u * v / (1.0 - th * (1.0 - u) * (1.0 - v)),
            Base::Clayton => {
                let (ln_s, _, _) = clayton_ln_s(u, v, th);
                (-ln_s / th).exp()
            }
            Base::Fgm => u * v * (1.0 + th * (1.0 - u) * (1.0 - v)),
            Base::Frank => frank(u, v, th).cdf,
            Base::Gaussian => pnorm2(qnorm(u), qnorm(v), th),
            Base::Gumbel => {
                let g = gumbel_core(u, v, th);
                (-g.a).exp()
            }
            Base::Joe => {
                let j = joe_core(u, v, th);
                1.0 - (j.ln_s / th).exp()
            }
        }
    }

    /// Conditional cdf dC/du = P(V <= v | U = u).
    pub(super) fn hfun(self, u: f64, v: f64, th: f64) -> f64 {
        match self {
            Base::Amh => {
                let q = 1.0 - v;
                let m = 1.0 - th * (1.0 - u) * q;
                v * (1.0 - th * q) / (m * m)
            }
            Base::Clayton => {
                let (ln_s, _, _) = clayton_ln_s(u, v, th);
                ((-th - 1.0) * u.ln() - (1.0 + 1.0 / th) * ln_s).exp()
            }
            Base::Fgm => v * (1.0 + th * (1.0 - v) * (1.0 - 2.0 * u)),
            Base::Frank => frank(u, v, th).h,
            Base::Gaussian => {
                let x = qnorm(u);
                let y = qnorm(v);
                pnorm((y - th * x) / (1.0 - th * th).sqrt())
            }
            Base::Gumbel => {
                let g = gumbel_core(u, v, th);
                (-g.a).exp() * g.wx / u
            }
            Base::Joe => {
                let j = joe_core(u, v, th);
                ((1.0 / th - 1.0) * j.ln_s + (th - 1.0) * j.lp).exp() * (1.0 - j.qq)
            }
        }
    }

    /// dC/dtheta at fixed (u, v).
    pub(super) fn dcdf_dtheta(self, u: f64, v: f64, th: f64) -> f64 {
        match self {
            Base::Amh => {
                let p = 1.0 - u;
                let q = 1.0 - v;
                let m = 1.0 - th * p * q;
                u * v * p * q / (m * m)
            }
            Base::Clayton => {
                let (ln_s, ea, eb) = clayton_ln_s(u, v, th);
                let s_ratio = -(u.ln() * ea + v.ln() * eb); // (dS/dth)/S
                (-ln_s / th).exp() * (ln_s / (th * th) - s_ratio / th)
            }
            Base::Fgm => u * v * (1.0 - u) * (1.0 - v),
            Base::Frank => frank(u, v, th).dcdf_dtheta,
            Base::Gaussian => {
                let x = qnorm(u);
                let y = qnorm(v);
                let om = 1.0 - th * th;
                (-(x * x - 2.0 * th * x * y + y * y) / (2.0 * om)).exp()
                    / (2.0 * std::f64::consts::PI * om.sqrt())
            }
            Base::Gumbel => {
                let g = gumbel_core(u, v, th);
                -(-g.a).exp() * g.a * g.dln_a_dth
            }
            Base::Joe => {
                let j = joe_core(u, v, th);
                let a = (j.ln_s / th).exp();
                -a * (-j.ln_s / (th * th) + j.ds_dth_rel / th)
            }
        }
    }

    pub(super) fn derivs(self, u: f64, v: f64, th: f64) -> BaseDerivs {
        match self {
            Base::Amh => amh_derivs(u, v, th),
            Base::Clayton => clayton_derivs(u, v, th),
            Base::Fgm => fgm_derivs(u, v, th),
            Base::Frank => {
                let f = frank(u, v, th);
                BaseDerivs {
                    log_c: f.log_c,
                    dlogc_du: f.dlogc_du,
                    dlogc_dv: f.dlogc_dv,
                    dlogc_dtheta: f.dlogc_dtheta,
                }
            }
            Base::Gaussian => gaussian_derivs(u, v, th),
            Base::Gumbel => gumbel_derivs(u, v, th),
            Base::Joe => joe_derivs(u, v, th),
        }
    }
}

// ---------------------------------------------------------------- AMH

fn amh_derivs(u: f64, v: f64, th: f64) -> BaseDerivs {
    let p = 1.0 - u;
    let q = 1.0 - v;
    let m = 1.0 - th * p * q;
    // density numerator: c = n / m^3
    let n = 1.0 + th * (1.0 - 2.0 * p - 2.0 * q + p * q) + th * th * p * q;
    let dn_dp = th * (q - 2.0) + th * th * q;
    let dn_dq = th * (p - 2.0) + th * th * p;
    BaseDerivs {
        log_c: n.ln() - 3.0 * m.ln(),
        dlogc_du: -(dn_dp / n + 3.0 * th * q / m),
        dlogc_dv: -(dn_dq / n + 3.0 * th * p / m),
        dlogc_dtheta: (1.0 - 2.0 * p - 2.0 * q + p * q + 2.0 * th * p * q) / n
            + 3.0 * p * q / m,
    }
}

// ---------------------------------------------------------------- Clayton

/// Returns (ln S, u^-th/S, v^-th/S) for S = u^-th + v^-th - 1, computed in
/// log space so that very large theta degrades gracefully.
fn clayton_ln_s(u: f64, v: f64, th: f64) -> (f64, f64, f64) {
    let a = -th * u.ln();
    let b = -th * v.ln();
    let ln_s = if a < 700.0 && b < 700.0 {
        // S - 1 = expm1(a) + expm1(b) is a sum of non-negatives, so this
        // stays fully accurate as theta -> 0 where S -> 1
        (a.exp_m1() + b.exp_m1()).ln_1p()
    } else {
        let m = a.max(b);
        m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
    };
    (ln_s, (a - ln_s).exp(), (b - ln_s).exp())
}

fn clayton_derivs(u: f64, v: f64, th: f64) -> BaseDerivs {
    let lu = u.ln();
    let lv = v.ln();
    let (ln_s, ea, eb) = clayton_ln_s(u, v, th);
    // u^(-th-1)/S and v^(-th-1)/S
    let ru = (-th * lu - lu - ln_s).exp();
    let rv = (-th * lv - lv - ln_s).exp();
    let s_ratio = -(lu * ea + lv * eb); // (dS/dth)/S
    BaseDerivs {
        log_c: th.ln_1p() - (1.0 + th) * (lu + lv) - (2.0 + 1.0 / th) * ln_s,
        dlogc_du: -(1.0 + th) / u + (1.0 + 2.0 * th) * ru,
        dlogc_dv: -(1.0 + th) / v + (1.0 + 2.0 * th) * rv,
        dlogc_dtheta: 1.0 / (1.0 + th) - (lu + lv) + ln_s / (th * th)
            - (2.0 + 1.0 / th) * s_ratio,
    }
}

// ---------------------------------------------------------------- FGM

fn fgm_derivs(u: f64, v: f64, th: f64) -> BaseDerivs {
    let su = 1.0 - 2.0 * u;
    let sv = 1.0 - 2.0 * v;
    let c = 1.0 + th * su * sv;
    BaseDerivs {
        log_c: c.ln(),
        dlogc_du: -2.0 * th * sv / c,
        dlogc_dv: -2.0 * th * su / c,
        dlogc_dtheta: su * sv / c,
    }
}

// ---------------------------------------------------------------- Frank

struct FrankVals {
    cdf: f64,
    h: f64,
    dcdf_dtheta: f64,
    log_c: f64,
    dlogc_du: f64,
    dlogc_dv: f64,
    dlogc_dtheta: f64,
}

/// Frank evaluation; theta of either sign is native to the family.
fn frank(u: f64, v: f64, th: f64) -> FrankVals {
    if th.abs() <= 30.0 {
        return frank_direct(u, v, th);
    }
    if th > 0.0 {
        return frank_large_pos(u, v, th);
    }
    // strong negative dependence: the family satisfies
    // C_{-t}(u, v) = u - C_t(u, 1-v), i.e. it is its own reflection
    let b = frank_large_pos(u, 1.0 - v, -th);
    FrankVals {
        cdf: u - b.cdf,
        h: 1.0 - b.h,
        dcdf_dtheta: b.dcdf_dtheta,
        log_c: b.log_c,
        dlogc_du: b.dlogc_du,
        dlogc_dv: -b.dlogc_dv,
        dlogc_dtheta: -b.dlogc_dtheta,
    }
}

fn frank_direct(u: f64, v: f64, th: f64) -> FrankVals {
    let d = (-th).exp_m1(); // e^-th - 1, same sign as -th
    let gu = (-th * u).exp_m1();
    let gv = (-th * v).exp_m1();
    let e = d + gu * gv; // same sign as d
    let eu = (-th * u).exp();
    let ev = (-th * v).exp();
    let h = eu * gv / e;
    let h2 = ev * gu / e;
    let de_dth = -(-th).exp() - u * eu * gv - v * ev * gu;
    let dd_dth = -(-th).exp();
    let ln_ed = (e / d).ln(); // E/D > 0 always
    FrankVals {
        cdf: -(gu * gv / d).ln_1p() / th,
        h,
        dcdf_dtheta: ln_ed / (th * th) - (de_dth / e - dd_dth / d) / th,
        log_c: (-th * d).ln() - th * (u + v) - 2.0 * e.abs().ln(),
        dlogc_du: th * (2.0 * h - 1.0),
        dlogc_dv: th * (2.0 * h2 - 1.0),
        dlogc_dtheta: 1.0 / th + dd_dth / d - (u + v) - 2.0 * de_dth / e,
    }
}

/// Stable path for theta > 30, where e^theta overflows the direct formulas.
fn frank_large_pos(u: f64, v: f64, th: f64) -> FrankVals {
    // |E| = e^(-th u) (1 - e^(-th(1-u))) + e^(-th v) (1 - e^(-th u))
    let t1 = -th * u;
    let t2 = -th * v;
    let f1 = -(-th * (1.0 - u)).exp_m1();
    let f2u = -(-th * u).exp_m1(); // 1 - e^(-th u)
    let f2v = -(-th * v).exp_m1();
    let mt = t1.max(t2);
    let bracket = (t1 - mt).exp() * f1 + (t2 - mt).exp() * f2u;
    let ln_abs_e = mt + bracket.ln();
    let ln_abs_d = (-(-th).exp()).ln_1p(); // ln(1 - e^-th)
    let h = (-th * u - ln_abs_e).exp() * f2v;
    let h2 = (-th * v - ln_abs_e).exp() * f2u;
    // E'/E = [e^-th - u e^(-th u) f2v - v e^(-th v) f2u] / |E|
    let e_ratio = (-th - ln_abs_e).exp()
        - u * (-th * u - ln_abs_e).exp() * f2v
        - v * (-th * v - ln_abs_e).exp() * f2u;
    let d_ratio = (-th - ln_abs_d).exp(); // D'/D
    let ln_ed = ln_abs_e - ln_abs_d;
    FrankVals {
        cdf: -ln_ed / th,
        h,
        dcdf_dtheta: ln_ed / (th * th) - (e_ratio - d_ratio) / th,
        log_c: th.ln() + ln_abs_d - th * (u + v) - 2.0 * ln_abs_e,
        dlogc_du: th * (2.0 * h - 1.0),
        dlogc_dv: th * (2.0 * h2 - 1.0),
        dlogc_dtheta: 1.0 / th + d_ratio - (u + v) - 2.0 * e_ratio,
    }
}

// ---------------------------------------------------------------- Gaussian

fn gaussian_derivs(u: f64, v: f64, th: f64) -> BaseDerivs {
    let x = qnorm(u);
    let y = qnorm(v);
    let om = 1.0 - th * th;
    BaseDerivs {
        log_c: -0.5 * om.ln()
            - (th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * om),
        dlogc_du: -th * (th * x - y) / om / dnorm(x),
        dlogc_dv: -th * (th * y - x) / om / dnorm(y),
        dlogc_dtheta: th / om
            - (th * (x * x + y * y) - (1.0 + th * th) * x * y) / (om * om),
    }
}

// ---------------------------------------------------------------- Gumbel

struct GumbelCore {
    lx: f64, // -ln u
    ly: f64,
    llx: f64, // ln(-ln u)
    lly: f64,
    ln_a: f64, // A = (x^th + y^th)^(1/th) on x = -ln u
    a: f64,
    wx: f64, // dA/dx = A^(1-th) x^(th-1), in (0, 1]
    wy: f64,
    dln_a_dth: f64,
}

fn gumbel_core(u: f64, v: f64, th: f64) -> GumbelCore {
    let lx = -u.ln();
    let ly = -v.ln();
    let llx = lx.ln();
    let lly = ly.ln();
    let ln_sg = lse2(th * llx, th * lly);
    let ln_a = ln_sg / th;
    let a = ln_a.exp();
    let wlx = (th * llx - ln_sg).exp();
    let wly = (th * lly - ln_sg).exp();
    GumbelCore {
        lx,
        ly,
        llx,
        lly,
        ln_a,
        a,
        wx: ((th - 1.0) * (llx - ln_a)).exp(),
        wy: ((th - 1.0) * (lly - ln_a)).exp(),
        dln_a_dth: -ln_sg / (th * th) + (wlx * llx + wly * lly) / th,
    }
}

fn gumbel_derivs(u: f64, v: f64, th: f64) -> BaseDerivs {
    let g = gumbel_core(u, v, th);
    let da_dth = g.a * g.dln_a_dth;
    let dlogc_dlx = -g.wx + (th - 1.0) / g.lx + (1.0 - 2.0 * th) * g.wx / g.a
        + g.wx / (g.a + th - 1.0);
    let dlogc_dly = -g.wy + (th - 1.0) / g.ly + (1.0 - 2.0 * th) * g.wy / g.a
        + g.wy / (g.a + th - 1.0);
    BaseDerivs {
        log_c: -g.a - u.ln() - v.ln() + (th - 1.0) * (g.llx + g.lly)
            + (1.0 - 2.0 * th) * g.ln_a
            + (g.a + th - 1.0).ln(),
        dlogc_du: -(1.0 + dlogc_dlx) / u,
        dlogc_dv: -(1.0 + dlogc_dly) / v,
        dlogc_dtheta: -da_dth + (g.llx + g.lly) + (1.0 - 2.0 * th) * da_dth / g.a
            - 2.0 * g.ln_a
            + (da_dth + 1.0) / (g.a + th - 1.0),
    }
}

// ---------------------------------------------------------------- Joe

struct JoeCore {
    lp: f64, // ln(1-u)
    lq: f64,
    pp: f64, // P = (1-u)^th
    qq: f64,
    ln_s: f64, // S = P + Q - PQ
    s: f64,
    ds_dth: f64,
    ds_dth_rel: f64, // (dS/dth)/S, underflow-safe
}

fn joe_core(u: f64, v: f64, th: f64) -> JoeCore {
    let lp = (1.0 - u).ln();
    let lq = (1.0 - v).ln();
    let a = th * lp;
    let b = th * lq;
    let m = a.max(b);
    let ln_s = m + ((a - m).exp() + (b - m).exp() - (a + b - m).exp()).ln();
    let pp = a.exp();
    let qq = b.exp();
    JoeCore {
        lp,
        lq,
        pp,
        qq,
        ln_s,
        s: ln_s.exp(),
        ds_dth: pp * lp * (1.0 - qq) + qq * lq * (1.0 - pp),
        ds_dth_rel: (a - ln_s).exp() * lp * (1.0 - qq)
            + (b - ln_s).exp() * lq * (1.0 - pp),
    }
}

fn joe_derivs(u: f64, v: f64, th: f64) -> BaseDerivs {
    let p = 1.0 - u;
    let q = 1.0 - v;
    let j = joe_core(u, v, th);
    // dS/dp = th p^(th-1) (1-Q), plus the version divided by S
    let dsp = th * ((th - 1.0) * j.lp).exp() * (1.0 - j.qq);
    let dsq = th * ((th - 1.0) * j.lq).exp() * (1.0 - j.pp);
    let dsp_rel = th * ((th - 1.0) * j.lp - j.ln_s).exp() * (1.0 - j.qq);
    let dsq_rel = th * ((th - 1.0) * j.lq - j.ln_s).exp() * (1.0 - j.pp);
    let denom = th - 1.0 + j.s;
    BaseDerivs {
        log_c: (1.0 / th - 2.0) * j.ln_s + (th - 1.0) * (j.lp + j.lq) + denom.ln(),
        dlogc_du: -((1.0 / th - 2.0) * dsp_rel + (th - 1.0) / p + dsp / denom),
        dlogc_dv: -((1.0 / th - 2.0) * dsq_rel + (th - 1.0) / q + dsq / denom),
        dlogc_dtheta: -j.ln_s / (th * th)
            + (1.0 / th - 2.0) * j.ds_dth_rel
            + j.lp
            + j.lq
            + (1.0 + j.ds_dth) / denom,
    }
}
