//! Reference computations that do not reuse the primary discretization.
//!
//! Integrals use the composite midpoint rule on a refined grid with fields
//! re-sampled from their closed forms. Fractional integrals are evaluated
//! pointwise through the substitution `w = (ψ(x) − ψ(s))^a`, which removes the
//! kernel singularity:
//!
//! ```text
//! I^{a;ψ} f(x) = 1/Γ(a+1) ∫₀^{(ψ(x)−ψ(0))^a} f(ψ⁻¹(ψ(x) − w^{1/a})) dw
//! ```
//!
//! For fields with a vanishing trace at 0 the Hilfer derivative reduces to
//! `I^{1−α;ψ}(u′/ψ′)`; otherwise the extra term `u(0)(ψ(x)−ψ(0))^{−α}/Γ(1−α)`
//! (type β < 1) is added.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::domain::{AnalyticField, GridSpec, PsiFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub refine_factor: usize,
    pub fd_step: f64,
    pub scan_points: usize,
    /// Midpoint nodes per unit of the substituted variable range.
    pub kernel_points: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { refine_factor: 4, fd_step: 1e-5, scan_points: 2048, kernel_points: 400 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.refine_factor < 2 {
            return Err(Error::InvalidConfig(format!("refine_factor {} < 2", self.refine_factor)));
        }
        if !(self.fd_step > 1e-9 && self.fd_step < 1e-2) {
            return Err(Error::InvalidConfig(format!("fd_step {} outside (1e-9, 1e-2)", self.fd_step)));
        }
        if self.scan_points < 64 {
            return Err(Error::InvalidConfig(format!("scan_points {} < 64", self.scan_points)));
        }
        if self.kernel_points < 8 {
            return Err(Error::InvalidConfig(format!("kernel_points {} < 8", self.kernel_points)));
        }
        Ok(())
    }
}

/// Which energy integrand a [`Quantity::EnergyTerm`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyTerm {
    P,
    Q,
    Sing,
    R,
    Total,
}

/// Constants of the problem restricted to what the oracle needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleProblem {
    pub alpha: f64,
    pub beta: f64,
    pub psi: PsiFunction,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Constant coefficient a.
    pub a: f64,
    /// Constant coefficient μ.
    pub mu: f64,
}

impl Default for OracleProblem {
    fn default() -> Self {
        OracleProblem {
            alpha: 0.8,
            beta: 0.5,
            psi: PsiFunction::Identity,
            p: 1.5,
            q: 2.0,
            r: 2.4,
            gamma: 0.5,
            lambda: 1e-3,
            a: 1.0,
            mu: 0.5,
        }
    }
}

/// A registered computation.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantity {
    /// ∫ u.
    Integral { u: AnalyticField },
    /// ∫ (|u|^p + μ|u|^q) with constant μ.
    Modular { u: AnalyticField, mu: f64, p: f64, q: f64 },
    /// One energy term (or the total) for the separable field f(x₁)·g(x₂)
    /// (just f in 1-D).
    EnergyTerm { f: AnalyticField, g: AnalyticField, problem: OracleProblem, term: EnergyTerm },
    /// I^{order;ψ} u at x, 1-D.
    RlAt { u: AnalyticField, order: f64, psi: PsiFunction, x: f64 },
    /// Hilfer derivative of u at x, 1-D.
    HilferAt { u: AnalyticField, alpha: f64, beta: f64, psi: PsiFunction, x: f64 },
}

impl Quantity {
    /// Names accepted by [`Quantity::from_name`].
    pub const NAMES: [&'static str; 9] = [
        "integral-bilinear",
        "modular-sine",
        "modular-zero",
        "energy-p-sine",
        "energy-q-sine",
        "energy-sing-sine",
        "energy-r-sine",
        "energy-total-sine",
        "hilfer-sine",
    ];

    /// Registered quantities on the default problem constants.
    pub fn from_name(name: &str) -> Result<Quantity> {
        let sine = AnalyticField::SineProduct { k1: 1, k2: 1 };
        let problem = OracleProblem::default();
        let energy = |term| Quantity::EnergyTerm { f: sine.clone(), g: sine.clone(), problem, term };
        Ok(match name {
            "integral-bilinear" => Quantity::Integral { u: AnalyticField::Bilinear },
            "modular-sine" => Quantity::Modular { u: sine, mu: 0.5, p: 1.5, q: 2.0 },
            "modular-zero" => Quantity::Modular { u: AnalyticField::Zero, mu: 0.5, p: 1.5, q: 2.0 },
            "energy-p-sine" => energy(EnergyTerm::P),
            "energy-q-sine" => energy(EnergyTerm::Q),
            "energy-sing-sine" => energy(EnergyTerm::Sing),
            "energy-r-sine" => energy(EnergyTerm::R),
            "energy-total-sine" => energy(EnergyTerm::Total),
            "hilfer-sine" => Quantity::HilferAt { u: sine, alpha: 0.8, beta: 0.5, psi: PsiFunction::Identity, x: 0.5 },
            other => return Err(Error::UnknownQuantity(other.to_string())),
        })
    }
}

fn midpoints(extent: f64, cells: usize) -> Vec<f64> {
    let h = extent / cells as f64;
    (0..cells).map(|i| (i as f64 + 0.5) * h).collect()
}

/// Midpoint rule for ∫_Ω f on `cells` cells per axis.
fn midpoint_integral(extent: f64, cells: usize, dim: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let xs = midpoints(extent, cells);
    let h = extent / cells as f64;
    if dim == 1 {
        return h * xs.iter().map(|&x| f(x, 0.0)).sum::<f64>();
    }
    let mut s = 0.0;
    for &x1 in &xs {
        for &x2 in &xs {
            s += f(x1, x2);
        }
    }
    s * h * h
}

/// Fourth-order central difference of a 1-D closed form.
fn derivative_1d(f: &dyn Fn(f64) -> f64, x: f64, extent: f64) -> f64 {
    let h = 1e-3 * extent;
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

/// I^{a;ψ} f(x) by the substitution quadrature.
pub fn rl_integral_at(f: &dyn Fn(f64) -> f64, order: f64, psi: PsiFunction, x: f64, points: usize) -> f64 {
    let v = psi.eval(x);
    let span = (v - psi.eval(0.0)).powf(order);
    if span == 0.0 {
        return 0.0;
    }
    let m = points.max(8);
    let dw = span / m as f64;
    let inv = 1.0 / order;
    let s: f64 = (0..m)
        .map(|k| {
            let w = (k as f64 + 0.5) * dw;
            f(psi.inverse(v - w.powf(inv)))
        })
        .sum();
    s * dw / gamma(order + 1.0)
}

/// Hilfer derivative of a 1-D closed form at `x`.
pub fn hilfer_at(
    u: &dyn Fn(f64) -> f64,
    alpha: f64,
    beta: f64,
    psi: PsiFunction,
    x: f64,
    extent: f64,
    points: usize,
) -> f64 {
    // u′ is taken inside (0, T); the substitution never samples the endpoints
    let dpsi = |s: f64| derivative_1d(u, s, extent) / psi.deriv(s);
    let mut val = rl_integral_at(&dpsi, 1.0 - alpha, psi, x, points);
    let u0 = u(0.0);
    if u0 != 0.0 && beta < 1.0 {
        val += u0 * (psi.eval(x) - psi.eval(0.0)).powf(-alpha) / gamma(1.0 - alpha);
    }
    val
}

fn eval_fn(u: &AnalyticField, extent: f64) -> impl Fn(f64) -> f64 + '_ {
    move |x| u.eval(x, 0.0, extent, 1)
}

/// Recomputes a quantity on the refined grid of `grid` (or at a point).
pub fn dense_reference(quantity: &Quantity, grid: &GridSpec, config: &OracleConfig) -> Result<f64> {
    config.validate()?;
    let cells = (grid.n - 1) * config.refine_factor;
    let t = grid.extent;
    let dim = grid.dim;
    let kp = config.kernel_points;
    match quantity {
        Quantity::Integral { u } => Ok(midpoint_integral(t, cells, dim, |x1, x2| u.eval(x1, x2, t, dim))),
        Quantity::Modular { u, mu, p, q } => Ok(midpoint_integral(t, cells, dim, |x1, x2| {
            let v = u.eval(x1, x2, t, dim).abs();
            v.powf(*p) + mu * v.powf(*q)
        })),
        Quantity::RlAt { u, order, psi, x } => Ok(rl_integral_at(&eval_fn(u, t), *order, *psi, *x, kp)),
        Quantity::HilferAt { u, alpha, beta, psi, x } => Ok(hilfer_at(&eval_fn(u, t), *alpha, *beta, *psi, *x, t, kp)),
        Quantity::EnergyTerm { f, g, problem: pb, term } => {
            let xs = midpoints(t, cells);
            let h = t / cells as f64;
            let f1 = eval_fn(f, t);
            let g1 = eval_fn(g, t);
            let d = |u: &dyn Fn(f64) -> f64| -> Vec<f64> {
                xs.iter().map(|&x| hilfer_at(u, pb.alpha, pb.beta, pb.psi, x, t, kp)).collect()
            };
            let fv: Vec<f64> = xs.iter().map(|&x| f1(x)).collect();
            let df = d(&f1);
            let (gv, dg) =
                if dim == 2 { (xs.iter().map(|&x| g1(x)).collect::<Vec<_>>(), d(&g1)) } else { (vec![1.0], vec![1.0]) };
            let sum_pow = |a: &[f64], b: &[f64], e: f64| -> f64 {
                let mut s = 0.0;
                for x in a {
                    for y in b {
                        s += (x * y).abs().powf(e);
                    }
                }
                s * h.powi(dim as i32)
            };
            let tp = sum_pow(&df, &dg, pb.p) / pb.p;
            let tq = pb.mu * sum_pow(&df, &dg, pb.q) / pb.q;
            let ts = pb.a * sum_pow(&fv, &gv, 1.0 - pb.gamma) / (1.0 - pb.gamma);
            let tr = pb.lambda * sum_pow(&fv, &gv, pb.r) / pb.r;
            Ok(match term {
                EnergyTerm::P => tp,
                EnergyTerm::Q => tq,
                EnergyTerm::Sing => ts,
                EnergyTerm::R => tr,
                EnergyTerm::Total => tp + tq - ts - tr,
            })
        }
    }
}

/// A finite-difference estimate with its Richardson error indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdEstimate {
    pub value: f64,
    /// |extrapolated − fine|.
    pub error_estimate: f64,
    /// |fine − coarse| before extrapolation.
    pub coarse_error: f64,
}

/// Central differences of a scalar map at `at` (first or second derivative)
/// with one Richardson step-halving.
pub fn fd_derivative(
    map: &dyn Fn(f64) -> Result<f64>,
    at: f64,
    order: usize,
    config: &OracleConfig,
) -> Result<FdEstimate> {
    let h = config.fd_step * at.abs().max(1.0);
    let eval = |x: f64| -> Result<f64> {
        let v = map(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NumericalBreakdown(format!("map is {v} at {x}")))
        }
    };
    let central = |h: f64| -> Result<f64> {
        Ok(match order {
            1 => (eval(at + h)? - eval(at - h)?) / (2.0 * h),
            2 => (eval(at + h)? - 2.0 * eval(at)? + eval(at - h)?) / (h * h),
            _ => return Err(Error::InvalidConfig(format!("derivative order {order}"))),
        })
    };
    // second differences lose digits quickly; use a wider base step
    let base = if order == 2 { h * 100.0 } else { h };
    let coarse = central(base)?;
    let fine = central(0.5 * base)?;
    let value = (4.0 * fine - coarse) / 3.0;
    Ok(FdEstimate { value, error_estimate: (value - fine).abs() / 3.0, coarse_error: (fine - coarse).abs() })
}

/// Directional derivative of a field functional by central differences.
pub fn fd_directional(
    map: &dyn Fn(&crate::domain::Field) -> Result<f64>,
    at: &crate::domain::Field,
    direction: &crate::domain::Field,
    config: &OracleConfig,
) -> Result<FdEstimate> {
    let scale = at.max_abs().max(f64::MIN_POSITIVE) / direction.max_abs().max(f64::MIN_POSITIVE);
    let line = |s: f64| map(&at.add_scaled(s * scale, direction));
    let est = fd_derivative(&line, 0.0, 1, config)?;
    Ok(FdEstimate {
        value: est.value / scale,
        error_estimate: est.error_estimate / scale,
        coarse_error: est.coarse_error / scale,
    })
}

/// Argmax over `scan_points` log-uniform points of `[lo, hi]`.
pub fn scan_argmax(map: &dyn Fn(f64) -> f64, lo: f64, hi: f64, config: &OracleConfig) -> f64 {
    let n = config.scan_points.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    let mut best = (f64::NEG_INFINITY, lo);
    for k in 0..n {
        let t = if k + 1 == n { hi } else { (a + (b - a) * k as f64 / (n - 1) as f64).exp() };
        let v = map(t);
        if v > best.0 {
            best = (v, t);
        }
    }
    best.1
}

/// Width of one cell of the [`scan_argmax`] grid, as a ratio.
pub fn scan_cell_ratio(lo: f64, hi: f64, config: &OracleConfig) -> f64 {
    ((hi / lo).ln() / (config.scan_points.max(2) - 1) as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_bounds() {
        OracleConfig::default().validate().unwrap();
        assert!(OracleConfig { refine_factor: 1, ..Default::default() }.validate().is_err());
        assert!(OracleConfig { fd_step: 0.1, ..Default::default() }.validate().is_err());
        assert!(OracleConfig { scan_points: 10, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn registry() {
        for name in Quantity::NAMES {
            Quantity::from_name(name).unwrap();
        }
        assert!(matches!(Quantity::from_name("nope"), Err(Error::UnknownQuantity(_))));
    }

    #[test]
    fn zero_and_exact_classes() {
        let cfg = OracleConfig::default();
        let z = Quantity::from_name("modular-zero").unwrap();
        let bl = Quantity::from_name("integral-bilinear").unwrap();
        for n in [9, 17, 33] {
            let g = GridSpec::new(1.0, n, 2).unwrap();
            assert_eq!(dense_reference(&z, &g, &cfg).unwrap(), 0.0);
            assert!((dense_reference(&bl, &g, &cfg).unwrap() - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn modular_self_convergence() {
        let cfg = OracleConfig::default();
        let q = Quantity::from_name("modular-sine").unwrap();
        let fine = dense_reference(&q, &GridSpec::new(1.0, 257, 2).unwrap(), &cfg).unwrap();
        let e = |n| (dense_reference(&q, &GridSpec::new(1.0, n, 2).unwrap(), &cfg).unwrap() - fine).abs();
        let order = (e(9) / e(17)).log2();
        assert!(order >= 1.0, "order {order}");
    }

    #[test]
    fn rl_constant_power_rule() {
        let one = |_: f64| 1.0;
        let v = rl_integral_at(&one, 0.5, PsiFunction::Identity, 1.0, 64);
        assert!((v - 1.0 / gamma(1.5)).abs() < 1e-13);
        // ψ = x², f = ψ: Γ(2)/Γ(2.3) ψ^{1.3}
        let sq = |x: f64| x * x;
        let v = rl_integral_at(&sq, 0.3, PsiFunction::Power(2.0), 0.7, 2000);
        let exact = (0.49f64).powf(1.3) / gamma(2.3);
        assert!((v - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn hilfer_of_linear_function() {
        // ψ = x, u = x: D u = x^{1−α}/Γ(2−α) for every type β
        let u = |x: f64| x;
        for beta in [0.0, 0.5, 1.0] {
            let v = hilfer_at(&u, 0.7, beta, PsiFunction::Identity, 0.6, 1.0, 400);
            let exact = 0.6f64.powf(0.3) / gamma(1.3);
            assert!((v - exact).abs() < 1e-9, "beta {beta}");
        }
    }

    #[test]
    fn fd_oracle_properties() {
        let cfg = OracleConfig::default();
        let c = fd_derivative(&|_| Ok(3.0), 1.3, 1, &cfg).unwrap();
        assert!(c.value.abs() < 1e-10);
        let f = |x: f64| Ok((2.0 * x).sin());
        let d = fd_derivative(&f, 1.3, 1, &cfg).unwrap();
        assert!((d.value - 2.0 * (2.6f64).cos()).abs() < 1e-8);
        assert!(d.error_estimate <= d.coarse_error);
        let d2 = fd_derivative(&f, 1.3, 2, &cfg).unwrap();
        assert!((d2.value + 4.0 * (2.6f64).sin()).abs() < 1e-5);
        assert!(matches!(fd_derivative(&|_| Ok(f64::NAN), 1.0, 1, &cfg), Err(Error::NumericalBreakdown(_))));
    }

    #[test]
    fn scan_cases() {
        let cfg = OracleConfig::default();
        assert_eq!(scan_argmax(&|t| t, 0.5, 4.0, &cfg), 4.0);
        // symmetric in log t about ln 2
        let peak = scan_argmax(&|t: f64| -((t / 2.0).ln()).powi(2), 0.2, 20.0, &cfg);
        assert!((peak / 2.0).ln().abs() <= scan_cell_ratio(0.2, 20.0, &cfg).ln());
    }
}
