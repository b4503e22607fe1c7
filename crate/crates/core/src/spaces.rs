//! Modulars and norms of the double-phase space.

use serde::{Deserialize, Serialize};

use crate::domain::{weighted_sum, Field, ProblemParams};
use crate::error::Result;
use crate::fracops::Operators;

fn pointwise(u: &Field, f: impl Fn(usize, f64) -> f64) -> Result<f64> {
    u.check_finite()?;
    let w = u.grid.weights();
    let vals: Vec<f64> = u.values.iter().enumerate().map(|(k, &v)| f(k, v)).collect();
    Ok(weighted_sum(&w, &vals))
}

/// ∫ |u|^p.
pub fn lp_modular(u: &Field, p: f64) -> Result<f64> {
    pointwise(u, |_, v| v.abs().powf(p))
}

/// ∫ μ |u|^q.
pub fn weighted_modular(u: &Field, mu: &Field, q: f64) -> Result<f64> {
    u.same_shape(mu)?;
    mu.check_finite()?;
    pointwise(u, |k, v| mu.values[k] * v.abs().powf(q))
}

/// ‖u‖_{L^p} = (∫ |u|^p)^{1/p}.
pub fn lp_norm(u: &Field, p: f64) -> Result<f64> {
    Ok(lp_modular(u, p)?.powf(1.0 / p))
}

/// ∫ a |u|^{1−γ}.
pub fn singular_integral(u: &Field, a: &Field, gamma: f64) -> Result<f64> {
    u.same_shape(a)?;
    pointwise(u, |k, v| a.values[k] * v.abs().powf(1.0 - gamma))
}

/// ρ(u) = ∫ (|u|^p + μ |u|^q).
pub fn modular_rho_h(u: &Field, mu: &Field, p: f64, q: f64) -> Result<f64> {
    Ok(lp_modular(u, p)? + weighted_modular(u, mu, q)?)
}

/// Luxemburg norm inf{τ > 0 : ρ(u/τ) ≤ 1}.
pub fn luxemburg_norm(u: &Field, mu: &Field, p: f64, q: f64) -> Result<f64> {
    let mp = lp_modular(u, p)?;
    let mq = weighted_modular(u, mu, q)?;
    Ok(luxemburg_from_parts(mp, mq, p, q))
}

/// Luxemburg norm from the two homogeneous parts of the modular:
/// `ρ(u/τ) = τ^{−p} mp + τ^{−q} mq` is strictly decreasing in τ.
pub fn luxemburg_from_parts(mp: f64, mq: f64, p: f64, q: f64) -> f64 {
    if mp == 0.0 && mq == 0.0 {
        return 0.0;
    }
    let rho = |tau: f64| tau.powf(-p) * mp + tau.powf(-q) * mq;
    let c = 4.0;
    let mut lo = mp.powf(1.0 / p) / c;
    let mut hi = c * (mp.powf(1.0 / p) + mq.powf(1.0 / q));
    if lo <= 0.0 {
        lo = hi * 1e-3;
    }
    while rho(lo) < 1.0 {
        lo *= 0.5;
    }
    while rho(hi) > 1.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * lo.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The four integrals entering the energy, for one field `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    /// ∫ |Du|^p.
    pub dup_p: f64,
    /// ∫ μ |Du|^q.
    pub dup_q_mu: f64,
    /// ∫ a |u|^{1−γ}.
    pub sing: f64,
    /// ∫ |u|^r.
    pub ur_r: f64,
}

impl NormBundle {
    /// Bundle of `t·u` given the bundle of `u`.
    pub fn scaled(&self, t: f64, p: f64, q: f64, r: f64, gamma: f64) -> NormBundle {
        NormBundle {
            dup_p: t.powf(p) * self.dup_p,
            dup_q_mu: t.powf(q) * self.dup_q_mu,
            sing: t.powf(1.0 - gamma) * self.sing,
            ur_r: t.powf(r) * self.ur_r,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.dup_p >= 0.0 && self.dup_q_mu >= 0.0 && self.sing >= 0.0 && self.ur_r >= 0.0
    }
}

/// The bundle of `u` together with the mixed derivative it was computed from.
pub fn norm_bundle_with_du(u: &Field, params: &ProblemParams, ops: &Operators) -> Result<(NormBundle, Field)> {
    u.check_finite()?;
    let du = ops.mixed_left(u)?;
    let bundle = NormBundle {
        dup_p: lp_modular(&du, params.p)?,
        dup_q_mu: weighted_modular(&du, &params.mu, params.q)?,
        sing: singular_integral(u, &params.a, params.gamma)?,
        ur_r: lp_modular(u, params.r)?,
    };
    Ok((bundle, du))
}

pub fn norm_bundle(u: &Field, params: &ProblemParams, ops: &Operators) -> Result<NormBundle> {
    Ok(norm_bundle_with_du(u, params, ops)?.0)
}
