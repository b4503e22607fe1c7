//! Fibering maps along rays `t ↦ E(tu)` and the Nehari decomposition.
//!
//! Everything here is a closed form in the [`NormBundle`] `(A, B, C, D)` of a
//! direction `u`:
//!
//! ```text
//! w(t)  = tᵖ/p A + t^q/q B − t^{1−γ}/(1−γ) C − λ tʳ/r D
//! Φ(t)  = t^{p−r} A + t^{q−r} B − t^{1−r−γ} C        w′(t) = t^{r−1} (Φ(t) − λD)
//! Φ̂(t)  = t^{p−r} A − t^{1−r−γ} C
//! ```

use serde::{Deserialize, Serialize};

use crate::domain::{Exponents, Field, ProblemParams};
use crate::error::{Error, Result};
use crate::fracops::Operators;
use crate::spaces::{norm_bundle, NormBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NehariTag {
    #[serde(rename = "N_plus")]
    NPlus,
    #[serde(rename = "N_zero")]
    NZero,
    #[serde(rename = "N_minus")]
    NMinus,
    #[serde(rename = "off_manifold")]
    OffManifold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NehariClass {
    pub tag: NehariTag,
    /// w′(1).
    pub w1: f64,
    /// w″(1).
    pub w2: f64,
}

/// Relative thresholds, scaled by `A + B + C + λD`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub manifold: f64,
    pub degeneracy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { manifold: 1e-8, degeneracy: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberReport {
    pub bundle: NormBundle,
    pub lambda: f64,
    pub t_hat0: f64,
    pub phi_hat_max: f64,
    pub t0: f64,
    /// Φ(t₀) − λD.
    pub gap: f64,
    /// Set when the gap is within tolerance of zero (the ray grazes N⁰).
    pub degenerate: bool,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub class_at_t1: Option<NehariClass>,
    pub class_at_t2: Option<NehariClass>,
}

impl FiberReport {
    pub fn has_roots(&self) -> bool {
        self.t1.is_some() && self.t2.is_some()
    }

    /// λ at which the gap closes for this direction, Φ(t₀)/D.
    pub fn critical_lambda(&self) -> f64 {
        (self.gap + self.lambda * self.bundle.ur_r) / self.bundle.ur_r
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(t))
    }
}

/// w(t) = E(tu); defined for t ≥ 0.
pub fn fiber_w(b: &NormBundle, t: f64, e: &Exponents) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::DomainError(t));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(t.powf(e.p) / e.p * b.dup_p + t.powf(e.q) / e.q * b.dup_q_mu
        - t.powf(1.0 - e.gamma) / (1.0 - e.gamma) * b.sing
        - e.lambda * t.powf(e.r) / e.r * b.ur_r)
}

pub fn fiber_w1(b: &NormBundle, t: f64, e: &Exponents) -> Result<f64> {
    check_t(t)?;
    Ok(t.powf(e.p - 1.0) * b.dup_p + t.powf(e.q - 1.0) * b.dup_q_mu
        - t.powf(-e.gamma) * b.sing
        - e.lambda * t.powf(e.r - 1.0) * b.ur_r)
}

pub fn fiber_w2(b: &NormBundle, t: f64, e: &Exponents) -> Result<f64> {
    check_t(t)?;
    Ok((e.p - 1.0) * t.powf(e.p - 2.0) * b.dup_p
        + (e.q - 1.0) * t.powf(e.q - 2.0) * b.dup_q_mu
        + e.gamma * t.powf(-e.gamma - 1.0) * b.sing
        - e.lambda * (e.r - 1.0) * t.powf(e.r - 2.0) * b.ur_r)
}

pub fn phi(b: &NormBundle, t: f64, e: &Exponents) -> Result<f64> {
    check_t(t)?;
    Ok(t.powf(e.p - e.r) * b.dup_p + t.powf(e.q - e.r) * b.dup_q_mu - t.powf(1.0 - e.r - e.gamma) * b.sing)
}

pub fn phi_prime(b: &NormBundle, t: f64, e: &Exponents) -> Result<f64> {
    check_t(t)?;
    Ok((e.p - e.r) * t.powf(e.p - e.r - 1.0) * b.dup_p
        + (e.q - e.r) * t.powf(e.q - e.r - 1.0) * b.dup_q_mu
        + (e.r + e.gamma - 1.0) * t.powf(-e.r - e.gamma) * b.sing)
}

pub fn phi_hat(b: &NormBundle, t: f64, e: &Exponents) -> Result<f64> {
    check_t(t)?;
    Ok(t.powf(e.p - e.r) * b.dup_p - t.powf(1.0 - e.r - e.gamma) * b.sing)
}

pub fn phi_hat_prime(b: &NormBundle, t: f64, e: &Exponents) -> Result<f64> {
    check_t(t)?;
    Ok((e.p - e.r) * t.powf(e.p - e.r - 1.0) * b.dup_p + (e.r + e.gamma - 1.0) * t.powf(-e.r - e.gamma) * b.sing)
}

fn check_direction(b: &NormBundle) -> Result<()> {
    if !(b.dup_p > 0.0 && b.dup_p.is_finite()) {
        return Err(Error::DegenerateDirection(format!("derivative p-modular is {}", b.dup_p)));
    }
    if !(b.sing > 0.0 && b.sing.is_finite()) {
        return Err(Error::DegenerateDirection(format!("singular integral is {}", b.sing)));
    }
    Ok(())
}

/// Maximizer of Φ̂: t̂₀ = ((r+γ−1)C / ((r−p)A))^{1/(p+γ−1)}.
pub fn t_hat0(b: &NormBundle, e: &Exponents) -> Result<f64> {
    check_direction(b)?;
    Ok(((e.r + e.gamma - 1.0) * b.sing / ((e.r - e.p) * b.dup_p)).powf(1.0 / (e.p + e.gamma - 1.0)))
}

/// Closed form of max Φ̂ = Φ̂(t̂₀).
pub fn phi_hat_max_closed_form(b: &NormBundle, e: &Exponents) -> Result<f64> {
    check_direction(b)?;
    let (p, r, g) = (e.p, e.r, e.gamma);
    let k = p + g - 1.0;
    Ok((k / (r - p)) * ((r - p) / (r + g - 1.0)).powf((r + g - 1.0) / k) * b.dup_p.powf((r + g - 1.0) / k)
        / b.sing.powf((r - p) / k))
}

/// Golden-section maximization of Φ in log t, seeded at t̂₀.
fn argmax_phi(b: &NormBundle, e: &Exponents, seed: f64) -> Result<f64> {
    let f = |s: f64| phi(b, s.exp(), e);
    let (mut lo, mut hi) = ((seed * 1e-3).ln(), (seed * 1e3).ln());
    // Φ is unimodal; widen until the maximum is interior
    for _ in 0..200 {
        if phi_prime(b, lo.exp(), e)? <= 0.0 {
            lo -= 3.0 * std::f64::consts::LN_10;
        } else if phi_prime(b, hi.exp(), e)? >= 0.0 {
            hi += 3.0 * std::f64::consts::LN_10;
        } else {
            break;
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while hi - lo > 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d)?;
        }
        if d <= c {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Root of w′ (equivalently Φ = λD) in `[lo, hi]`, where `w′(lo)` and `w′(hi)`
/// have opposite signs: bisection in log t, then Newton steps kept in the bracket.
fn bracketed_root(b: &NormBundle, e: &Exponents, mut lo: f64, mut hi: f64) -> Result<f64> {
    let level = e.lambda * b.ur_r;
    let g = |t: f64| -> Result<f64> { Ok(phi(b, t, e)? - level) };
    let up_at_lo = g(lo)? < 0.0;
    for _ in 0..200 {
        if hi / lo - 1.0 <= 1e-10 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if (g(mid)? < 0.0) == up_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = (lo * hi).sqrt();
    for _ in 0..5 {
        let w2 = fiber_w2(b, t, e)?;
        if w2 == 0.0 || !w2.is_finite() {
            break;
        }
        let next = t - fiber_w1(b, t, e)? / w2;
        if !(next > lo && next < hi) {
            break;
        }
        if next == t {
            break;
        }
        t = next;
    }
    Ok(t)
}

fn expand_until_below(b: &NormBundle, e: &Exponents, start: f64, factor: f64) -> Result<f64> {
    let level = e.lambda * b.ur_r;
    let mut t = start;
    for _ in 0..4000 {
        if phi(b, t, e)? < level {
            return Ok(t);
        }
        t *= factor;
        if !(t.is_finite() && t > 0.0) {
            break;
        }
    }
    Err(Error::NumericalBreakdown("root bracket expansion failed".into()))
}

fn scale_of(b: &NormBundle, lambda: f64) -> f64 {
    b.dup_p + b.dup_q_mu + b.sing + lambda * b.ur_r
}

/// Classification of the direction itself from w′(1), w″(1).
pub fn classify_bundle(b: &NormBundle, e: &Exponents, tol: &Tolerances) -> Result<NehariClass> {
    let w1 = fiber_w1(b, 1.0, e)?;
    let w2 = fiber_w2(b, 1.0, e)?;
    let scale = scale_of(b, e.lambda);
    let tag = if w1.abs() > tol.manifold * scale {
        NehariTag::OffManifold
    } else if w2.abs() <= tol.degeneracy * scale {
        NehariTag::NZero
    } else if w2 > 0.0 {
        NehariTag::NPlus
    } else {
        NehariTag::NMinus
    };
    Ok(NehariClass { tag, w1, w2 })
}

/// Complete fibering analysis; roots are absent when the gap is not positive.
pub fn fiber_analysis(b: &NormBundle, e: &Exponents, tol: &Tolerances) -> Result<FiberReport> {
    check_direction(b)?;
    if !(b.ur_r > 0.0) {
        return Err(Error::DegenerateDirection("L^r modular vanishes".into()));
    }
    let th = t_hat0(b, e)?;
    let phi_hat_max = phi_hat_max_closed_form(b, e)?;
    let t0 = argmax_phi(b, e, th)?;
    let level = e.lambda * b.ur_r;
    let gap = phi(b, t0, e)? - level;
    // the gap is compared against the size of the competing terms of Φ at t₀
    let phi_scale = t0.powf(e.p - e.r) * b.dup_p + t0.powf(e.q - e.r) * b.dup_q_mu + level;
    let degenerate = gap.abs() <= tol.degeneracy * phi_scale;
    let mut report = FiberReport {
        bundle: *b,
        lambda: e.lambda,
        t_hat0: th,
        phi_hat_max,
        t0,
        gap,
        degenerate,
        t1: None,
        t2: None,
        class_at_t1: None,
        class_at_t2: None,
    };
    if gap <= 0.0 || degenerate {
        return Ok(report);
    }
    let lo = expand_until_below(b, e, t0 * 0.5, 0.5)?;
    let hi = expand_until_below(b, e, t0 * 2.0, 2.0)?;
    let t1 = bracketed_root(b, e, lo, t0)?;
    let t2 = bracketed_root(b, e, t0, hi)?;
    let scaled = |t: f64| b.scaled(t, e.p, e.q, e.r, e.gamma);
    report.t1 = Some(t1);
    report.t2 = Some(t2);
    report.class_at_t1 = Some(classify_bundle(&scaled(t1), e, tol)?);
    report.class_at_t2 = Some(classify_bundle(&scaled(t2), e, tol)?);
    Ok(report)
}

/// As [`fiber_analysis`] but a missing two-root structure is an error.
pub fn find_roots(b: &NormBundle, e: &Exponents, tol: &Tolerances) -> Result<FiberReport> {
    let report = fiber_analysis(b, e, tol)?;
    if !report.has_roots() {
        return Err(Error::NoTwoRootStructure { gap: report.gap, degenerate: report.degenerate });
    }
    Ok(report)
}

pub fn classify(u: &Field, params: &ProblemParams, ops: &Operators, tol: &Tolerances) -> Result<NehariClass> {
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let b = norm_bundle(u, params, ops)?;
    classify_bundle(&b, &params.exponents(), tol)
}

/// η_h(t) = (p−1)∫|D(u+th)|^p + (q−1)∫μ|D(u+th)|^q + γ∫a|u+th|^{1−γ} − λ(r−1)∫|u+th|^r.
pub fn eta_h(u: &Field, h: &Field, t: f64, params: &ProblemParams, ops: &Operators) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::DomainError(t));
    }
    u.same_shape(h)?;
    let b = norm_bundle(&u.add_scaled(t, h), params, ops)?;
    let ProblemParams { p, q, r, gamma, lambda, .. } = *params;
    Ok((p - 1.0) * b.dup_p + (q - 1.0) * b.dup_q_mu + gamma * b.sing - lambda * (r - 1.0) * b.ur_r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex() -> Exponents {
        Exponents { p: 1.5, q: 2.0, r: 2.4, gamma: 0.5, lambda: 1e-3 }
    }

    fn bundle() -> NormBundle {
        NormBundle { dup_p: 1.0, dup_q_mu: 0.6, sing: 0.3, ur_r: 0.05 }
    }

    #[test]
    fn w_at_zero_and_domain() {
        let b = bundle();
        assert_eq!(fiber_w(&b, 0.0, &ex()).unwrap(), 0.0);
        assert!(matches!(fiber_w1(&b, 0.0, &ex()), Err(Error::DomainError(_))));
        assert!(matches!(phi(&b, -1.0, &ex()), Err(Error::DomainError(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (b, e) = (bundle(), ex());
        let (t, h) = (1.3, 1e-5);
        let w = |t| fiber_w(&b, t, &e).unwrap();
        let fd1 = (w(t + h) - w(t - h)) / (2.0 * h);
        let w1 = fiber_w1(&b, t, &e).unwrap();
        assert!((fd1 - w1).abs() <= 1e-6 * w1.abs());
        let w1f = |t| fiber_w1(&b, t, &e).unwrap();
        let fd2 = (w1f(t + h) - w1f(t - h)) / (2.0 * h);
        let w2 = fiber_w2(&b, t, &e).unwrap();
        assert!((fd2 - w2).abs() <= 1e-6 * w2.abs());
        let pf = |t| phi(&b, t, &e).unwrap();
        let fdp = (pf(t + h) - pf(t - h)) / (2.0 * h);
        let pp = phi_prime(&b, t, &e).unwrap();
        assert!((fdp - pp).abs() <= 1e-6 * pp.abs());
    }

    #[test]
    fn t_hat0_cases() {
        let e = ex();
        // (r+γ−1) C = (r−p) A  ⇒  t̂₀ = 1
        let b = NormBundle { dup_p: 1.9, dup_q_mu: 0.0, sing: 0.9 * 1.9 / 1.9, ur_r: 1.0 };
        assert!((t_hat0(&b, &e).unwrap() - 1.0).abs() < 1e-14);
        let b = bundle();
        let th = t_hat0(&b, &e).unwrap();
        assert!(phi_hat_prime(&b, th, &e).unwrap().abs() < 1e-10);
        let s = 3.0;
        let bs = b.scaled(s, e.p, e.q, e.r, e.gamma);
        assert!((t_hat0(&bs, &e).unwrap() * s - th).abs() < 1e-12 * th);
        let direct = phi_hat(&b, th, &e).unwrap();
        let closed = phi_hat_max_closed_form(&b, &e).unwrap();
        assert!((direct - closed).abs() <= 1e-10 * closed.abs());
        let zero = NormBundle { dup_p: 0.0, ..b };
        assert!(matches!(t_hat0(&zero, &e), Err(Error::DegenerateDirection(_))));
    }

    #[test]
    fn two_roots_and_classes() {
        let (b, e) = (bundle(), ex());
        let rep = find_roots(&b, &e, &Tolerances::default()).unwrap();
        let (t1, t2) = (rep.t1.unwrap(), rep.t2.unwrap());
        assert!(t1 < rep.t0 && rep.t0 < t2);
        let level = e.lambda * b.ur_r;
        for t in [t1, t2] {
            assert!((phi(&b, t, &e).unwrap() - level).abs() <= 1e-8 * level);
        }
        assert_eq!(rep.class_at_t1.unwrap().tag, NehariTag::NPlus);
        assert_eq!(rep.class_at_t2.unwrap().tag, NehariTag::NMinus);
        // the gap is affine in λ with slope −D
        let lam = rep.critical_lambda();
        let above = Exponents { lambda: 10.0 * lam, ..e };
        assert!(matches!(find_roots(&b, &above, &Tolerances::default()), Err(Error::NoTwoRootStructure { .. })));
    }

    #[test]
    fn roots_are_ray_invariant() {
        let (b, e) = (bundle(), ex());
        let tol = Tolerances::default();
        let r = find_roots(&b, &e, &tol).unwrap();
        let r2 = find_roots(&b.scaled(2.0, e.p, e.q, e.r, e.gamma), &e, &tol).unwrap();
        assert!((r2.t1.unwrap() * 2.0 - r.t1.unwrap()).abs() <= 1e-9 * r.t1.unwrap());
        assert!((r2.t2.unwrap() * 2.0 - r.t2.unwrap()).abs() <= 1e-9 * r.t2.unwrap());
    }

    #[test]
    fn second_derivative_identities_at_roots() {
        let (b, e) = (bundle(), ex());
        let rep = find_roots(&b, &e, &Tolerances::default()).unwrap();
        for t in [rep.t1.unwrap(), rep.t2.unwrap()] {
            let w2 = fiber_w2(&b, t, &e).unwrap();
            let form = ((e.p + e.gamma - 1.0) * t.powf(e.p) * b.dup_p
                + (e.q + e.gamma - 1.0) * t.powf(e.q) * b.dup_q_mu
                - e.lambda * (e.r + e.gamma - 1.0) * t.powf(e.r) * b.ur_r)
                / (t * t);
            assert!((w2 - form).abs() <= 1e-8 * w2.abs());
            let via_phi = t.powf(e.r - 1.0) * phi_prime(&b, t, &e).unwrap();
            assert!((w2 - via_phi).abs() <= 1e-8 * w2.abs());
        }
    }

    #[test]
    fn w_decreasing_before_t1() {
        let (b, e) = (bundle(), ex());
        let rep = find_roots(&b, &e, &Tolerances::default()).unwrap();
        let t1 = rep.t1.unwrap();
        for k in 1..20 {
            let t = t1 * k as f64 / 20.0;
            assert!(fiber_w1(&b, t, &e).unwrap() < 0.0);
        }
    }

    #[test]
    fn phi_dominates_phi_hat() {
        let (b, e) = (bundle(), ex());
        for k in -20..20 {
            let t = 10f64.powf(k as f64 / 5.0);
            assert!(phi(&b, t, &e).unwrap() >= phi_hat(&b, t, &e).unwrap());
            let lhs = fiber_w1(&b, t, &e).unwrap();
            let rhs = t.powf(e.r - 1.0) * (phi(&b, t, &e).unwrap() - e.lambda * b.ur_r);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
        }
    }
}
