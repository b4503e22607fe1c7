//! Discrete ψ-Riemann–Liouville integrals and ψ-Hilfer derivatives.
//!
//! Each one-dimensional operator is a dense `n × n` matrix acting on nodal
//! values along one axis. The fractional integral uses product-trapezoidal
//! weights in the variable `v = ψ(s)`: the field is interpolated linearly in
//! `v` on every cell and the weakly singular moments of `(ψ(xᵢ) − v)^{α−1}`
//! are integrated exactly. The Hilfer derivative is the composition
//! `I^{β(1−α)} · P · I^{(1−β)(1−α)}` with `P = (1/ψ′) d/dx`.
//!
//! The 2-D mixed operator is the Kronecker product of the axis operators, so
//! applying the matrix along axis 1 and axis 2 in either order gives the same
//! result.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::domain::{Field, GridSpec, PsiFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Left-sided (0+), lower-triangular kernel.
    Left,
    /// Right-sided (T), upper-triangular kernel.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    RlIntegral,
    HilferDerivative,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    pub fn from_index(axis: usize) -> Result<Axis> {
        match axis {
            1 => Ok(Axis::X1),
            2 => Ok(Axis::X2),
            other => Err(Error::ShapeError { expected: "axis 1 or 2".into(), found: format!("axis {other}") }),
        }
    }
}

/// A one-dimensional discrete fractional operator.
#[derive(Debug, Clone)]
pub struct FracOperator {
    pub matrix: DMatrix<f64>,
    pub side: Side,
    pub order: f64,
    pub kind: OperatorKind,
    pub beta: Option<f64>,
    pub psi: PsiFunction,
    /// The 1-D grid the matrix is assembled on.
    pub grid: GridSpec,
}

/// Exact moments `(∫ₐᵇ s^{α−1} ds, ∫ₐᵇ s^α ds)` for `0 ≤ a < b`.
fn singular_moments(a: f64, b: f64, alpha: f64) -> (f64, f64) {
    if a == 0.0 {
        return (b.powf(alpha) / alpha, b.powf(alpha + 1.0) / (alpha + 1.0));
    }
    // b^c − a^c = a^c · expm1(c · ln(b/a)), accurate when b ≈ a
    let log_ratio = ((b - a) / a).ln_1p();
    let m0 = a.powf(alpha) * (alpha * log_ratio).exp_m1() / alpha;
    let m1 = a.powf(alpha + 1.0) * ((alpha + 1.0) * log_ratio).exp_m1() / (alpha + 1.0);
    (m0, m1)
}

fn check_psi(psi: &PsiFunction, grid: &GridSpec) -> Result<()> {
    psi.validate_on(grid)
}

/// Product-trapezoidal matrix for I^{order;ψ}; the identity when `order == 0`.
fn rl_matrix(side: Side, order: f64, psi: &PsiFunction, grid: &GridSpec) -> DMatrix<f64> {
    let n = grid.n;
    if order == 0.0 {
        return DMatrix::identity(n, n);
    }
    let v: Vec<f64> = grid.nodes().iter().map(|&x| psi.eval(x)).collect();
    let scale = 1.0 / gamma(order);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let vi = v[i];
        match side {
            Side::Left => {
                for j in 0..i {
                    let (a, b) = (vi - v[j + 1], vi - v[j]);
                    let delta = v[j + 1] - v[j];
                    let (m0, m1) = singular_moments(a.max(0.0), b, order);
                    m[(i, j)] += (m1 - a * m0) / delta;
                    m[(i, j + 1)] += (b * m0 - m1) / delta;
                }
            }
            Side::Right => {
                for j in i..n - 1 {
                    let (a, b) = (v[j] - vi, v[j + 1] - vi);
                    let delta = v[j + 1] - v[j];
                    let (m0, m1) = singular_moments(a.max(0.0), b, order);
                    m[(i, j)] += (b * m0 - m1) / delta;
                    m[(i, j + 1)] += (m1 - a * m0) / delta;
                }
            }
        }
    }
    m * scale
}

/// Discrete `(1/ψ′) d/dx` with a one-sided second-order stencil pointing
/// into the kernel's history: backward differences for the left side,
/// forward differences for the right side, first order next to the start
/// node. The stencil has no odd-even null mode, unlike central differences.
///
/// Where ψ′ is not a finite positive number (ψ′(0) for some power ψ), the
/// secant slope of ψ over the adjacent cell is used instead.
pub fn psi_derivative_matrix(side: Side, psi: &PsiFunction, grid: &GridSpec) -> DMatrix<f64> {
    let n = grid.n;
    let h = grid.spacing();
    let x = grid.nodes();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut dpsi = psi.deriv(x[i]);
        if !(dpsi.is_finite() && dpsi > 0.0) {
            let (l, r) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
            dpsi = (psi.eval(x[r]) - psi.eval(x[l])) / (x[r] - x[l]);
        }
        let s = 1.0 / dpsi;
        // mirror the index for the right side so both cases share one stencil
        let (k, dir) = match side {
            Side::Left => (i, 1isize),
            Side::Right => (n - 1 - i, -1isize),
        };
        let at = |off: isize| (i as isize - dir * off) as usize;
        let sgn = dir as f64;
        if k == 0 {
            // no history yet: first-order difference into the domain
            m[(i, at(0))] -= sgn * s / h;
            m[(i, at(-1))] += sgn * s / h;
        } else if k == 1 {
            m[(i, at(0))] += sgn * s / h;
            m[(i, at(1))] -= sgn * s / h;
        } else {
            m[(i, at(0))] += sgn * 1.5 * s / h;
            m[(i, at(1))] -= sgn * 2.0 * s / h;
            m[(i, at(2))] += sgn * 0.5 * s / h;
        }
    }
    m
}

fn axis_grid(grid: &GridSpec) -> GridSpec {
    grid.axis_grid()
}

/// Assembles the ψ-Riemann–Liouville fractional integral of the given order.
pub fn assemble_rl_integral(side: Side, order: f64, psi: PsiFunction, grid: &GridSpec) -> Result<FracOperator> {
    if !(order > 0.0 && order < 1.0) {
        return Err(Error::InvalidOrder(order));
    }
    let g = axis_grid(grid);
    check_psi(&psi, &g)?;
    Ok(FracOperator {
        matrix: rl_matrix(side, order, &psi, &g),
        side,
        order,
        kind: OperatorKind::RlIntegral,
        beta: None,
        psi,
        grid: g,
    })
}

/// Assembles the ψ-Hilfer derivative of order α and type β as the literal
/// three-factor composition; the right-sided version carries `−(1/ψ′) d/dx`.
pub fn assemble_hilfer_derivative(
    side: Side,
    alpha: f64,
    beta: f64,
    psi: PsiFunction,
    grid: &GridSpec,
) -> Result<FracOperator> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidOrder(alpha));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidOrder(beta));
    }
    let g = axis_grid(grid);
    check_psi(&psi, &g)?;
    let outer = rl_matrix(side, beta * (1.0 - alpha), &psi, &g);
    let inner = rl_matrix(side, (1.0 - beta) * (1.0 - alpha), &psi, &g);
    let mut diff = psi_derivative_matrix(side, &psi, &g);
    if side == Side::Right {
        diff = -diff;
    }
    Ok(FracOperator {
        matrix: outer * diff * inner,
        side,
        order: alpha,
        kind: OperatorKind::HilferDerivative,
        beta: Some(beta),
        psi,
        grid: g,
    })
}

impl FracOperator {
    /// Identity operator, used to check the adjoint in the symmetric case.
    pub fn identity(grid: &GridSpec) -> FracOperator {
        let g = axis_grid(grid);
        FracOperator {
            matrix: DMatrix::identity(g.n, g.n),
            side: Side::Left,
            order: 0.0,
            kind: OperatorKind::Identity,
            beta: None,
            psi: PsiFunction::Identity,
            grid: g,
        }
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// Sign of the derivative factor on one axis: +1 left-sided, −1 right-sided.
    pub fn axis_sign(&self) -> f64 {
        match (self.kind, self.side) {
            (OperatorKind::HilferDerivative, Side::Right) => -1.0,
            _ => 1.0,
        }
    }

    fn check_field(&self, u: &Field, axis: Axis) -> Result<()> {
        if u.grid.n != self.grid.n || u.grid.extent != self.grid.extent {
            return Err(Error::ShapeError {
                expected: format!("{} nodes per axis on [0, {}]", self.grid.n, self.grid.extent),
                found: format!("{} nodes per axis on [0, {}]", u.grid.n, u.grid.extent),
            });
        }
        if axis == Axis::X2 && u.grid.dim != 2 {
            return Err(Error::ShapeError { expected: "2-D field".into(), found: "1-D field".into() });
        }
        Ok(())
    }

    /// Applies the matrix along one axis.
    pub fn apply(&self, u: &Field, axis: Axis) -> Result<Field> {
        self.check_field(u, axis)?;
        Ok(Field { grid: u.grid, values: apply_matrix(&self.matrix, &u.values, u.grid, axis, false) })
    }

    /// Quadrature adjoint along one axis: `z = W⁻¹ Mᵀ W w`.
    pub fn adjoint_apply(&self, w: &Field, axis: Axis) -> Result<Field> {
        self.check_field(w, axis)?;
        let weights = self.grid.axis_weights();
        let n = self.grid.n;
        let grid = w.grid;
        let mut values = w.values.clone();
        scale_along(&mut values, grid, axis, |i| weights[i]);
        let mut z = apply_matrix(&self.matrix, &values, grid, axis, true);
        scale_along(&mut z, grid, axis, |i| 1.0 / weights[i]);
        debug_assert_eq!(z.len(), if grid.dim == 2 { n * n } else { n });
        Ok(Field { grid, values: z })
    }

    /// Dense matrix dump, one row per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.n()).map(|j| format!("{:e}", self.matrix[(i, j)])).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn scale_along(values: &mut [f64], grid: GridSpec, axis: Axis, s: impl Fn(usize) -> f64) {
    for (k, v) in values.iter_mut().enumerate() {
        let (i, j) = grid.index(k);
        *v *= match axis {
            Axis::X1 => s(i),
            Axis::X2 => s(j),
        };
    }
}

/// `M · u` (or `Mᵀ · u`) along the given axis of row-major nodal data.
pub(crate) fn apply_matrix(m: &DMatrix<f64>, u: &[f64], grid: GridSpec, axis: Axis, transpose: bool) -> Vec<f64> {
    let n = grid.n;
    let entry = |i: usize, k: usize| if transpose { m[(k, i)] } else { m[(i, k)] };
    let mut out = vec![0.0; u.len()];
    if grid.dim == 1 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|k| entry(i, k) * u[k]).sum();
        }
        return out;
    }
    match axis {
        Axis::X1 => {
            for i in 0..n {
                let row = &mut out[i * n..(i + 1) * n];
                for k in 0..n {
                    let c = entry(i, k);
                    if c != 0.0 {
                        let src = &u[k * n..(k + 1) * n];
                        for (o, s) in row.iter_mut().zip(src) {
                            *o += c * s;
                        }
                    }
                }
            }
        }
        Axis::X2 => {
            for i in 0..n {
                let src = &u[i * n..(i + 1) * n];
                for j in 0..n {
                    out[i * n + j] = (0..n).map(|k| entry(j, k) * src[k]).sum();
                }
            }
        }
    }
    out
}

/// The left- and right-sided Hilfer derivatives used by the energy, applied
/// per axis on the problem grid.
#[derive(Debug, Clone)]
pub struct Operators {
    pub grid: GridSpec,
    pub left: FracOperator,
    pub right: FracOperator,
}

impl Operators {
    pub fn new(alpha: f64, beta: f64, psi: PsiFunction, grid: &GridSpec) -> Result<Self> {
        Ok(Operators {
            grid: *grid,
            left: assemble_hilfer_derivative(Side::Left, alpha, beta, psi, grid)?,
            right: assemble_hilfer_derivative(Side::Right, alpha, beta, psi, grid)?,
        })
    }

    /// Mixed left-sided derivative: axis 1, then axis 2 in 2-D.
    pub fn mixed_left(&self, u: &Field) -> Result<Field> {
        mixed(&self.left, u)
    }

    pub fn mixed_right(&self, u: &Field) -> Result<Field> {
        mixed(&self.right, u)
    }

    /// Quadrature adjoint of [`Operators::mixed_left`].
    pub fn mixed_left_adjoint(&self, w: &Field) -> Result<Field> {
        let z = self.left.adjoint_apply(w, Axis::X1)?;
        if w.grid.dim == 2 {
            self.left.adjoint_apply(&z, Axis::X2)
        } else {
            Ok(z)
        }
    }

    /// Net sign of the right-sided mixed operator: the per-axis −1 raised to the dimension.
    pub fn right_net_sign(&self) -> f64 {
        self.right.axis_sign().powi(self.grid.dim as i32)
    }
}

fn mixed(op: &FracOperator, u: &Field) -> Result<Field> {
    let v = op.apply(u, Axis::X1)?;
    if u.grid.dim == 2 {
        op.apply(&v, Axis::X2)
    } else {
        Ok(v)
    }
}
