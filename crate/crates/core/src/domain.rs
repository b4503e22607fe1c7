//! Grids, kernel generators, nodal fields and problem parameters.
//!
//! The computational domain is `[0, T]` (1-D test bed) or `[0, T]²`, sampled
//! on a uniform tensor grid. 2-D nodal data is stored row-major: node `(i, j)`
//! with `x₁ = xᵢ`, `x₂ = xⱼ` lives at flat index `i * n + j`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increasing kernel generator ψ together with its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PsiFunction {
    /// ψ(x) = x, the classical Riemann–Liouville setting.
    Identity,
    /// ψ(x) = x^σ with σ > 0.
    Power(f64),
    /// ψ(x) = eˣ.
    Exp,
}

impl PsiFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PsiFunction::Identity => x,
            PsiFunction::Power(s) => x.powf(s),
            PsiFunction::Exp => x.exp(),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            PsiFunction::Identity => 1.0,
            PsiFunction::Power(s) => s * x.powf(s - 1.0),
            PsiFunction::Exp => x.exp(),
        }
    }

    /// ψ⁻¹, used by the substitution quadrature in [`crate::oracle`].
    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            PsiFunction::Identity => y,
            PsiFunction::Power(s) => y.max(0.0).powf(1.0 / s),
            PsiFunction::Exp => y.ln(),
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Checks ψ′ > 0 on the nodes in (0, T] and strict monotonicity of ψ on all nodes.
    pub fn validate_on(&self, grid: &GridSpec) -> Result<()> {
        if let PsiFunction::Power(s) = *self {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidPsi(format!("power exponent {s} must be > 0")));
            }
        }
        let nodes = grid.nodes();
        for (i, &x) in nodes.iter().enumerate().skip(1) {
            let d = self.deriv(x);
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidPsi(format!("{self}: psi'({x}) = {d} is not positive at node {i}")));
            }
        }
        for w in nodes.windows(2) {
            if !(self.eval(w[1]) > self.eval(w[0])) {
                return Err(Error::InvalidPsi(format!(
                    "{self} is not strictly increasing between {} and {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiFunction::Identity => write!(f, "identity"),
            PsiFunction::Power(s) => write!(f, "power:{s}"),
            PsiFunction::Exp => write!(f, "exp"),
        }
    }
}

impl FromStr for PsiFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(PsiFunction::Identity),
            "exp" => Ok(PsiFunction::Exp),
            other => {
                let Some(exp) = other.strip_prefix("power:") else {
                    return Err(Error::InvalidPsi(format!("unknown psi `{other}`")));
                };
                let sigma: f64 = exp.parse().map_err(|_| Error::InvalidPsi(format!("bad power exponent `{exp}`")))?;
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidPsi(format!("power exponent {sigma} must be > 0")));
                }
                Ok(PsiFunction::Power(sigma))
            }
        }
    }
}

impl TryFrom<String> for PsiFunction {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PsiFunction> for String {
    fn from(p: PsiFunction) -> String {
        p.to_string()
    }
}

/// Uniform tensor grid on `[0, T]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Extent T of each axis.
    #[serde(rename = "t")]
    pub extent: f64,
    /// Nodes per axis, endpoints included.
    pub n: usize,
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
}

impl Default for GridSpec {
    /// T = 1, 33 nodes per axis, 2-D.
    fn default() -> Self {
        GridSpec { extent: 1.0, n: 33, dim: 2 }
    }
}

impl GridSpec {
    pub const MIN_NODES: usize = 8;

    pub fn new(extent: f64, n: usize, dim: usize) -> Result<Self> {
        let g = GridSpec { extent, n, dim };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::InvalidGrid(format!("extent {} must be > 0", self.extent)));
        }
        if self.n < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!("n = {} below the minimum of {}", self.n, Self::MIN_NODES)));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {} not in {{1, 2}}", self.dim)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.extent / (self.n - 1) as f64
    }

    /// Axis nodes `0 = x₀ < … < x_{n-1} = T` with exact endpoints.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|i| if i + 1 == self.n { self.extent } else { i as f64 * h }).collect()
    }

    /// Total number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis node indices of a flat index (`j` is 0 in 1-D).
    pub fn index(&self, k: usize) -> (usize, usize) {
        if self.dim == 1 {
            (k, 0)
        } else {
            (k / self.n, k % self.n)
        }
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        let nodes = self.nodes();
        let (i, j) = self.index(k);
        if self.dim == 1 {
            [nodes[i], 0.0]
        } else {
            [nodes[i], nodes[j]]
        }
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let last = self.n - 1;
        let (i, j) = self.index(k);
        if self.dim == 1 {
            i == 0 || i == last
        } else {
            i == 0 || i == last || j == 0 || j == last
        }
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|k| self.is_boundary(k)).collect()
    }

    /// Composite trapezoid weights along one axis.
    pub fn axis_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n];
        w[0] = 0.5 * h;
        w[self.n - 1] = 0.5 * h;
        w
    }

    /// Tensor-product trapezoid weights for every node.
    pub fn weights(&self) -> Vec<f64> {
        let w1 = self.axis_weights();
        if self.dim == 1 {
            return w1;
        }
        let mut w = Vec::with_capacity(self.len());
        for wi in &w1 {
            for wj in &w1 {
                w.push(wi * wj);
            }
        }
        w
    }

    /// The same domain sampled with `factor` times as many cells per axis.
    pub fn refined(&self, factor: usize) -> GridSpec {
        GridSpec { extent: self.extent, n: (self.n - 1) * factor + 1, dim: self.dim }
    }

    /// The 1-D grid underlying a tensor grid.
    pub fn axis_grid(&self) -> GridSpec {
        GridSpec { dim: 1, ..*self }
    }
}

/// Nodal values on a grid. Candidate solutions additionally satisfy the
/// Dirichlet condition at every boundary node; coefficient fields need not.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &GridSpec) -> Self {
        Field { grid: *grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        Field { grid: *grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeError {
                expected: format!("{} nodes", grid.len()),
                found: format!("{} values", values.len()),
            });
        }
        Ok(Field { grid: *grid, values })
    }

    /// Samples `f(x₁, x₂)` at every node (`x₂ = 0` in 1-D).
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let nodes = grid.nodes();
        let values = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.index(k);
                if grid.dim == 1 {
                    f(nodes[i], 0.0)
                } else {
                    f(nodes[i], nodes[j])
                }
            })
            .collect();
        Field { grid: *grid, values }
    }

    /// As [`Field::from_fn`] but with the boundary nodes set to zero.
    pub fn dirichlet_from_fn(grid: &GridSpec, f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut u = Field::from_fn(grid, f);
        u.enforce_dirichlet();
        u
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn enforce_dirichlet(&mut self) {
        for k in 0..self.values.len() {
            if self.grid.is_boundary(k) {
                self.values[k] = 0.0;
            }
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(node) => Err(Error::NonFiniteField { node }),
            None => Ok(()),
        }
    }

    pub fn satisfies_dirichlet(&self) -> bool {
        self.values.iter().enumerate().all(|(k, &v)| !self.grid.is_boundary(k) || v == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn same_shape(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeError { expected: format!("{:?}", self.grid), found: format!("{:?}", other.grid) });
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| s * v).collect() }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: f64, other: &Field) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Field { grid: self.grid, values }
    }

    pub fn abs(&self) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| v.abs()).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mean of |u| over interior nodes.
    pub fn interior_mean_abs(&self) -> f64 {
        let (sum, count) = self
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| !self.grid.is_boundary(*k))
            .fold((0.0, 0usize), |(s, c), (_, v)| (s + v.abs(), c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

/// Trapezoid tensor-product approximation of ∫_Ω f dx.
pub fn integrate(f: &Field, grid: &GridSpec) -> Result<f64> {
    if f.grid != *grid {
        return Err(Error::ShapeError { expected: format!("{grid:?}"), found: format!("{:?}", f.grid) });
    }
    f.check_finite()?;
    Ok(weighted_sum(&grid.weights(), &f.values))
}

pub(crate) fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

/// Quadrature-weighted inner product ⟨u, v⟩ = Σ wₖ uₖ vₖ.
pub fn inner_quad(u: &Field, v: &Field) -> f64 {
    let w = u.grid.weights();
    w.iter().zip(&u.values).zip(&v.values).map(|((w, a), b)| w * a * b).sum()
}

/// Closed-form test functions, evaluable on any grid.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticField {
    Zero,
    Constant(f64),
    /// Power of the first coordinate, x₁^ν.
    Power(f64),
    /// sin(k π x₁ / T) in 1-D, the product over both axes in 2-D.
    SineProduct {
        k1: usize,
        k2: usize,
    },
    /// x₁ x₂ (multilinear, integrated exactly by the trapezoid rule).
    Bilinear,
    /// Sine bump times exp(Σ c sin(kπx₁/T) sin(lπx₂/T)): positive inside, zero on ∂Ω.
    RandomBump {
        modes: Vec<(usize, usize, f64)>,
    },
}

impl AnalyticField {
    pub fn eval(&self, x1: f64, x2: f64, extent: f64, dim: usize) -> f64 {
        let s = |k: usize, x: f64| (k as f64 * PI * x / extent).sin();
        match self {
            AnalyticField::Zero => 0.0,
            AnalyticField::Constant(c) => *c,
            AnalyticField::Power(nu) => {
                if *nu == 0.0 {
                    1.0
                } else {
                    x1.powf(*nu)
                }
            }
            AnalyticField::SineProduct { k1, k2 } => {
                if dim == 1 {
                    s(*k1, x1)
                } else {
                    s(*k1, x1) * s(*k2, x2)
                }
            }
            AnalyticField::Bilinear => x1 * x2,
            AnalyticField::RandomBump { modes } => {
                let base = if dim == 1 { s(1, x1) } else { s(1, x1) * s(1, x2) };
                let expo: f64 =
                    modes.iter().map(|&(k, l, c)| if dim == 1 { c * s(k, x1) } else { c * s(k, x1) * s(l, x2) }).sum();
                base * expo.exp()
            }
        }
    }

    pub fn sample(&self, grid: &GridSpec) -> Field {
        Field::from_fn(grid, |x1, x2| self.eval(x1, x2, grid.extent, grid.dim))
    }

    /// Smooth random positive bump with a few low modes.
    pub fn random_bump(rng: &mut impl rand::Rng, max_mode: usize, amplitude: f64) -> Self {
        let mut modes = Vec::new();
        for k in 1..=max_mode {
            for l in 1..=max_mode {
                modes.push((k, l, amplitude * rng.gen_range(-1.0..1.0) / (k * l) as f64));
            }
        }
        AnalyticField::RandomBump { modes }
    }
}

/// The exponents and parameter that enter the fibering maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub gamma: f64,
    pub lambda: f64,
}

/// (α, β, p, q, r, γ, λ) and the coefficient fields a(x), μ(x).
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub a: Field,
    pub mu: Field,
}

impl ProblemParams {
    /// Critical exponent p*_α = 2p / (2 − αp).
    pub fn p_star_alpha(&self) -> f64 {
        2.0 * self.p / (2.0 - self.alpha * self.p)
    }

    pub fn exponents(&self) -> Exponents {
        Exponents { p: self.p, q: self.q, r: self.r, gamma: self.gamma, lambda: self.lambda }
    }

    pub fn grid(&self) -> GridSpec {
        self.a.grid
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ProblemParams { lambda, ..self.clone() }
    }
}

/// One clause of the structural hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub p_star_alpha: f64,
    pub clauses: Vec<Clause>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.holds)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p*_alpha = {}", self.p_star_alpha)?;
        for c in &self.clauses {
            let tag = if c.holds { "ok  " } else { "FAIL" };
            writeln!(f, "[{tag}] {}: {}", c.name, c.detail)?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Checks every clause of the structural hypotheses on the exponents and coefficients.
pub fn validate_params(params: &ProblemParams) -> ValidationReport {
    let &ProblemParams { alpha, beta, p, q, r, gamma, lambda, .. } = params;
    let denom = 2.0 - alpha * p;
    let p_star = params.p_star_alpha();
    let star_ok = denom > 0.0;
    let grid = params.a.grid;

    let interior_a_min = params
        .a
        .values
        .iter()
        .enumerate()
        .filter(|(k, _)| !grid.is_boundary(*k))
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mu_all_finite = params.mu.values.iter().all(|v| v.is_finite());
    let mu_min = params.mu.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mu_max = params.mu.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let clause = |name, holds, detail: String| Clause { name, holds, detail };
    let clauses = vec![
        clause("1<p<2", 1.0 < p && p < 2.0, format!("p = {p}")),
        clause("2-alpha*p>0", star_ok, format!("2 - alpha*p = {denom}")),
        clause("p<q<p*_α", star_ok && p < q && q < p_star, format!("p = {p}, q = {q}, p*_alpha = {p_star}")),
        clause("0<γ<1", 0.0 < gamma && gamma < 1.0, format!("gamma = {gamma}")),
        clause("q<r<p*_α", star_ok && q < r && r < p_star, format!("q = {q}, r = {r}, p*_alpha = {p_star}")),
        clause("1/p<α<1", 1.0 / p < alpha && alpha < 1.0, format!("1/p = {}, alpha = {alpha}", 1.0 / p)),
        clause("0≤β≤1", (0.0..=1.0).contains(&beta), format!("beta = {beta}")),
        clause("λ>0", lambda > 0.0 && lambda.is_finite(), format!("lambda = {lambda}")),
        clause(
            "a(x)>0",
            interior_a_min > 0.0 && params.a.values.iter().all(|v| v.is_finite()),
            format!("min interior a = {interior_a_min}"),
        ),
        clause("0≤μ(x)<∞", mu_all_finite && mu_min >= 0.0, format!("mu in [{mu_min}, {mu_max}]")),
    ];
    ValidationReport { p_star_alpha: p_star, clauses }
}

/// How a coefficient field a(x) or μ(x) is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Constant {
        value: f64,
    },
    /// base + amplitude · Π sin(π xₖ / T).
    Bump {
        base: f64,
        amplitude: f64,
    },
    /// CSV with header `i,value` (1-D) or `i,j,value` (2-D).
    File {
        path: String,
    },
}

impl Coefficient {
    pub fn to_field(&self, grid: &GridSpec) -> Result<Field> {
        match self {
            Coefficient::Constant { value } => Ok(Field::constant(grid, *value)),
            Coefficient::Bump { base, amplitude } => {
                let bump = AnalyticField::SineProduct { k1: 1, k2: 1 };
                Ok(Field::from_fn(grid, |x1, x2| base + amplitude * bump.eval(x1, x2, grid.extent, grid.dim)))
            }
            Coefficient::File { path } => load_field_csv(Path::new(path), grid),
        }
    }
}

/// Reads nodal values from CSV (`i,value` or `i,j,value`, one row per node).
pub fn load_field_csv(path: &Path, grid: &GridSpec) -> Result<Field> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    read_field_csv(&mut reader, grid)
}

pub fn read_field_csv<R: std::io::Read>(reader: &mut csv::Reader<R>, grid: &GridSpec) -> Result<Field> {
    let want = grid.dim + 1;
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != want {
            return Err(Error::Coefficient(format!(
                "row {}: expected {want} columns, found {}",
                line + 1,
                record.len()
            )));
        }
        let parse_idx = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::Coefficient(format!("row {}: bad index `{s}`", line + 1)))
        };
        let i = parse_idx(&record[0])?;
        let j = if grid.dim == 2 { parse_idx(&record[1])? } else { 0 };
        if i >= grid.n || j >= grid.n {
            return Err(Error::Coefficient(format!("row {}: index out of range", line + 1)));
        }
        let v: f64 =
            record[want - 1].parse().map_err(|_| Error::Coefficient(format!("row {}: bad value", line + 1)))?;
        let k = if grid.dim == 2 { i * grid.n + j } else { i };
        values[k] = v;
        seen[k] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Coefficient(format!("missing value for node {k}")));
    }
    let f = Field::from_values(grid, values)?;
    f.check_finite()?;
    Ok(f)
}

/// Writes a field as CSV in the same layout [`read_field_csv`] accepts.
pub fn write_field_csv<W: std::io::Write>(writer: W, field: &Field) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let grid = field.grid;
    if grid.dim == 2 {
        w.write_record(["i", "j", "value"])?;
    } else {
        w.write_record(["i", "value"])?;
    }
    for (k, v) in field.values.iter().enumerate() {
        let (i, j) = grid.index(k);
        let v = format!("{v:e}");
        if grid.dim == 2 {
            w.write_record([i.to_string(), j.to_string(), v])?;
        } else {
            w.write_record([i.to_string(), v])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, p: f64, q: f64, r: f64) -> ProblemParams {
        let g = GridSpec::new(1.0, 9, 2).unwrap();
        ProblemParams {
            alpha,
            beta: 0.5,
            p,
            q,
            r,
            gamma: 0.5,
            lambda: 1e-3,
            a: Field::constant(&g, 1.0),
            mu: Field::constant(&g, 0.5),
        }
    }

    #[test]
    fn default_exponents_pass() {
        let rep = validate_params(&params(0.8, 1.5, 2.0, 2.4));
        assert!((rep.p_star_alpha - 3.75).abs() < 1e-12);
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn alpha_below_one_over_p_fails() {
        let rep = validate_params(&params(0.6, 1.5, 2.0, 2.4));
        let names: Vec<_> = rep.failures().map(|c| c.name).collect();
        assert_eq!(names, vec!["1/p<α<1"]);
    }

    #[test]
    fn r_above_critical_exponent_fails() {
        let rep = validate_params(&params(0.8, 1.5, 2.0, 4.0));
        let names: Vec<_> = rep.failures().map(|c| c.name).collect();
        assert_eq!(names, vec!["q<r<p*_α"]);
    }

    #[test]
    fn nonpositive_coefficient_fails() {
        let mut pr = params(0.8, 1.5, 2.0, 2.4);
        pr.a.values[4 * 9 + 4] = 0.0;
        assert!(!validate_params(&pr).passed());
        // boundary values of a are not constrained
        let mut pr = params(0.8, 1.5, 2.0, 2.4);
        pr.a.values[0] = -1.0;
        assert!(validate_params(&pr).passed());
    }

    #[test]
    fn grid_nodes_and_bounds() {
        let g = GridSpec::new(2.0, 17, 1).unwrap();
        let x = g.nodes();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[16], 2.0);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
        assert!(GridSpec::new(1.0, 7, 1).is_err());
        assert!(GridSpec::new(1.0, 9, 3).is_err());
        assert!(GridSpec::new(0.0, 9, 1).is_err());
    }

    #[test]
    fn integrate_examples() {
        let g = GridSpec::new(1.0, 9, 2).unwrap();
        assert_eq!(integrate(&Field::zeros(&g), &g).unwrap(), 0.0);
        assert!((integrate(&Field::constant(&g, 1.0), &g).unwrap() - 1.0).abs() < 1e-14);
        let f = AnalyticField::Bilinear.sample(&g);
        assert!((integrate(&f, &g).unwrap() - 0.25).abs() < 1e-14);
        let mut bad = Field::constant(&g, 1.0);
        bad.values[3] = f64::NAN;
        assert!(matches!(integrate(&bad, &g), Err(Error::NonFiniteField { node: 3 })));
    }

    #[test]
    fn integrate_second_order() {
        let f = |x1: f64, x2: f64| (x1 * 1.3).exp() * (2.0 * x2).cos();
        let exact = ((1.3f64).exp() - 1.0) / 1.3 * (2.0f64).sin() / 2.0;
        let err = |n: usize| {
            let g = GridSpec::new(1.0, n, 2).unwrap();
            (integrate(&Field::from_fn(&g, f), &g).unwrap() - exact).abs()
        };
        let order = (err(17) / err(33)).log2();
        assert!(order >= 1.8, "observed order {order}");
    }

    #[test]
    fn psi_parsing_and_validation() {
        let g = GridSpec::new(1.0, 9, 1).unwrap();
        for name in ["identity", "exp", "power:2", "power:0.5"] {
            let psi: PsiFunction = name.parse().unwrap();
            assert_eq!(psi.to_string(), name);
            psi.validate_on(&g).unwrap();
        }
        assert!("power:-1".parse::<PsiFunction>().is_err());
        assert!("cubic".parse::<PsiFunction>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = GridSpec::new(1.0, 9, 2).unwrap();
        let f = AnalyticField::SineProduct { k1: 1, k2: 2 }.sample(&g);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let mut rd = csv::ReaderBuilder::new().from_reader(buf.as_slice());
        let back = read_field_csv(&mut rd, &g).unwrap();
        for (a, b) in f.values.iter().zip(&back.values) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn csv_missing_node_rejected() {
        let g = GridSpec::new(1.0, 8, 1).unwrap();
        let text = "i,value\n0,1\n1,1\n";
        let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        assert!(matches!(read_field_csv(&mut rd, &g), Err(Error::Coefficient(_))));
    }
}
