//! The energy functional, the double-phase operator A, the weak-form residual
//! and the discrete gradient.
//!
//! ```text
//! E(u) = (1/p)∫|Du|^p + (1/q)∫μ|Du|^q − (1/(1−γ))∫a|u|^{1−γ} − (λ/r)∫|u|^r
//! ```

use serde::{Deserialize, Serialize};

use crate::domain::{inner_quad, Field, ProblemParams};
use crate::error::{Error, Result};
use crate::fracops::Operators;
use crate::spaces::{norm_bundle_with_du, NormBundle};

/// The four energy terms and their signed total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub term_p: f64,
    pub term_q: f64,
    pub term_sing: f64,
    pub term_r: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn from_bundle(b: &NormBundle, params: &ProblemParams) -> Self {
        let term_p = b.dup_p / params.p;
        let term_q = b.dup_q_mu / params.q;
        let term_sing = b.sing / (1.0 - params.gamma);
        let term_r = params.lambda * b.ur_r / params.r;
        EnergyBreakdown { term_p, term_q, term_sing, term_r, total: term_p + term_q - term_sing - term_r }
    }
}

pub fn energy(u: &Field, params: &ProblemParams, ops: &Operators) -> Result<EnergyBreakdown> {
    let (b, _) = norm_bundle_with_du(u, params, ops)?;
    let e = EnergyBreakdown::from_bundle(&b, params);
    if !e.total.is_finite() {
        return Err(Error::NumericalBreakdown(format!("energy is {}", e.total)));
    }
    Ok(e)
}

/// Default singular floor: 1e-8 × (mean interior |u| + tiny).
pub fn default_floor(u: &Field) -> f64 {
    1e-8 * (u.interior_mean_abs() + f64::MIN_POSITIVE)
}

/// Fraction of interior nodes where u sits below the floor.
pub fn floor_activity(u: &Field, floor: f64) -> f64 {
    let mut total = 0usize;
    let mut active = 0usize;
    for (k, &v) in u.values.iter().enumerate() {
        if !u.grid.is_boundary(k) {
            total += 1;
            if v < floor {
                active += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        active as f64 / total as f64
    }
}

/// Nodal flux |Du|^{p−2}Du + μ|Du|^{q−2}Du, written so that Du = 0 gives 0.
pub fn flux(du: &Field, params: &ProblemParams) -> Field {
    let values = du
        .values
        .iter()
        .zip(&params.mu.values)
        .map(|(&d, &m)| {
            let a = d.abs();
            d.signum() * (a.powf(params.p - 1.0) + m * a.powf(params.q - 1.0))
        })
        .collect();
    Field { grid: du.grid, values }
}

/// ⟨A u, φ⟩ = ∫ (|Du|^{p−2}Du + μ|Du|^{q−2}Du) Dφ.
pub fn apply_a(u: &Field, phi: &Field, params: &ProblemParams, ops: &Operators) -> Result<f64> {
    u.same_shape(phi)?;
    phi.check_finite()?;
    let du = ops.mixed_left(u)?;
    let dphi = ops.mixed_left(phi)?;
    Ok(inner_quad(&flux(&du, params), &dphi))
}

fn check_nonnegative(u: &Field) -> Result<()> {
    for (k, &v) in u.values.iter().enumerate() {
        if v < 0.0 && !u.grid.is_boundary(k) {
            return Err(Error::NegativeCandidate { node: k, value: v });
        }
    }
    Ok(())
}

/// Nodal `a·max(u, floor)^{−γ} + λ u^{r−1}`: the lower-order part of the
/// first variation.
fn source(u: &Field, params: &ProblemParams, floor: f64) -> Field {
    let values = u
        .values
        .iter()
        .zip(&params.a.values)
        .map(|(&v, &a)| {
            let v = v.max(0.0);
            a * v.max(floor).powf(-params.gamma) + params.lambda * v.powf(params.r - 1.0)
        })
        .collect();
    Field { grid: u.grid, values }
}

/// ⟨Au, h⟩ − ∫ a max(u, floor)^{−γ} h − λ ∫ u^{r−1} h.
pub fn weak_residual(u: &Field, h: &Field, params: &ProblemParams, ops: &Operators, floor: f64) -> Result<f64> {
    u.check_finite()?;
    check_nonnegative(u)?;
    let a_part = apply_a(u, h, params, ops)?;
    let mut s = source(u, params, floor);
    // boundary nodes carry no singular contribution: u and admissible h vanish there
    for (k, v) in s.values.iter_mut().enumerate() {
        if u.grid.is_boundary(k) && u.values[k] == 0.0 {
            *v = 0.0;
        }
    }
    Ok(a_part - inner_quad(&s, h))
}

/// Gradient of the discrete energy in the quadrature inner product, so that
/// `⟨g, h⟩_quad` equals [`weak_residual`]`(u, h)` for every interior `h`.
/// Boundary entries are zero.
pub fn energy_gradient(u: &Field, params: &ProblemParams, ops: &Operators, floor: f64) -> Result<Field> {
    u.check_finite()?;
    check_nonnegative(u)?;
    let du = ops.mixed_left(u)?;
    let mut g = ops.mixed_left_adjoint(&flux(&du, params))?;
    let s = source(u, params, floor);
    for (k, gk) in g.values.iter_mut().enumerate() {
        if u.grid.is_boundary(k) {
            *gk = 0.0;
        } else {
            *gk -= s.values[k];
        }
    }
    g.check_finite().map_err(|_| Error::NumericalBreakdown("non-finite gradient".into()))?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AnalyticField, GridSpec, PsiFunction};
    use crate::spaces::norm_bundle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (ProblemParams, Operators) {
        let g = GridSpec::new(1.0, n, 2).unwrap();
        let params = ProblemParams {
            alpha: 0.8,
            beta: 0.5,
            p: 1.5,
            q: 2.0,
            r: 2.4,
            gamma: 0.5,
            lambda: 1e-3,
            a: Field::constant(&g, 1.0),
            mu: Field::constant(&g, 0.5),
        };
        let ops = Operators::new(0.8, 0.5, PsiFunction::Identity, &g).unwrap();
        (params, ops)
    }

    fn random_interior(g: &GridSpec, rng: &mut ChaCha8Rng) -> Field {
        Field::dirichlet_from_fn(g, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Random combination of the low sine modes.
    fn random_smooth(g: &GridSpec, rng: &mut ChaCha8Rng) -> Field {
        let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::dirichlet_from_fn(g, |x1, x2| {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    let f = AnalyticField::SineProduct { k1: k + 1, k2: l + 1 };
                    s += c[4 * k + l] * f.eval(x1, x2, 1.0, 2);
                }
            }
            s
        })
    }

    fn bump(g: &GridSpec) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        AnalyticField::random_bump(&mut rng, 2, 0.5).sample(g)
    }

    #[test]
    fn zero_energy_and_total() {
        let (params, ops) = setup(17);
        let g = params.grid();
        let e0 = energy(&Field::zeros(&g), &params, &ops).unwrap();
        assert_eq!(e0.total, 0.0);
        let e = energy(&bump(&g), &params, &ops).unwrap();
        assert_eq!(e.total, e.term_p + e.term_q - e.term_sing - e.term_r);
        assert!(e.term_p >= 0.0 && e.term_q >= 0.0 && e.term_sing >= 0.0 && e.term_r >= 0.0);
    }

    #[test]
    fn energy_along_ray() {
        let (params, ops) = setup(17);
        let u = bump(&params.grid());
        let b = norm_bundle(&u, &params, &ops).unwrap();
        for t in [0.5f64, 2.0] {
            let e = energy(&u.scaled(t), &params, &ops).unwrap().total;
            let closed = t.powf(1.5) / 1.5 * b.dup_p + t * t / 2.0 * b.dup_q_mu
                - t.powf(0.5) / 0.5 * b.sing
                - 1e-3 * t.powf(2.4) / 2.4 * b.ur_r;
            assert!((e - closed).abs() <= 1e-13 * closed.abs().max(1.0));
        }
    }

    #[test]
    fn apply_a_identities() {
        let (params, ops) = setup(17);
        let g = params.grid();
        let u = bump(&g);
        assert_eq!(apply_a(&u, &Field::zeros(&g), &params, &ops).unwrap(), 0.0);
        let b = norm_bundle(&u, &params, &ops).unwrap();
        let auu = apply_a(&u, &u, &params, &ops).unwrap();
        assert!((auu - b.dup_p - b.dup_q_mu).abs() <= 1e-13 * auu);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (h1, h2) = (random_interior(&g, &mut rng), random_interior(&g, &mut rng));
        let lhs = apply_a(&u, &h1.add_scaled(-2.5, &h2), &params, &ops).unwrap();
        let rhs = apply_a(&u, &h1, &params, &ops).unwrap() - 2.5 * apply_a(&u, &h2, &params, &ops).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn gradient_matches_residual_and_fd() {
        let (params, ops) = setup(17);
        let g = params.grid();
        let u = AnalyticField::SineProduct { k1: 1, k2: 1 }.sample(&g);
        let floor = default_floor(&u);
        let grad = energy_gradient(&u, &params, &ops, floor).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let h = random_interior(&g, &mut rng);
            let gh = inner_quad(&grad, &h);
            let res = weak_residual(&u, &h, &params, &ops, floor).unwrap();
            assert!((gh - res).abs() <= 1e-10 * gh.abs().max(res.abs()));
            let h = random_smooth(&g, &mut rng);
            let gh = inner_quad(&grad, &h);
            let eps = 1e-5;
            let up = energy(&u.add_scaled(eps, &h), &params, &ops).unwrap().total;
            let dn = energy(&u.add_scaled(-eps, &h), &params, &ops).unwrap().total;
            let fd = (up - dn) / (2.0 * eps);
            assert!((fd - gh).abs() <= 1e-6 * gh.abs(), "fd {fd} vs {gh}");
        }
        for (k, v) in grad.values.iter().enumerate() {
            if g.is_boundary(k) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn ray_derivative_is_residual_on_u() {
        let (params, ops) = setup(17);
        let u = bump(&params.grid());
        let floor = default_floor(&u);
        let b = norm_bundle(&u, &params, &ops).unwrap();
        let w1 = b.dup_p + b.dup_q_mu - b.sing - params.lambda * b.ur_r;
        let res = weak_residual(&u, &u, &params, &ops, floor).unwrap();
        assert!((w1 - res).abs() <= 1e-8 * w1.abs());
    }

    #[test]
    fn negative_candidate_rejected() {
        let (params, ops) = setup(17);
        let g = params.grid();
        let mut u = bump(&g);
        u.values[5 * 17 + 5] = -0.1;
        let h = u.clone();
        assert!(matches!(weak_residual(&u, &h, &params, &ops, 1e-10), Err(Error::NegativeCandidate { node: 90, .. })));
        assert!(energy_gradient(&u, &params, &ops, 1e-10).is_err());
    }

    #[test]
    fn energy_nonincreasing_in_lambda() {
        let (params, ops) = setup(17);
        let u = bump(&params.grid());
        let e1 = energy(&u, &params.with_lambda(1e-4), &ops).unwrap().total;
        let e2 = energy(&u, &params.with_lambda(1e-2), &ops).unwrap().total;
        assert!(e1 >= e2);
    }
}
