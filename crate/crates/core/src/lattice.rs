//! Time grids, pointed paths, dual paths and the primitive integrators.
//!
//! A [`Path`] is a pointed map on a [`TimeGrid`]: its value at the first node
//! is the anchor and every constructor preserves that. A [`DualPath`] is a
//! linear form on paths, stored as node weights together with the quadrature
//! rule used to pair it with a path.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{self, Axis, Rule};

/// A strictly increasing set of nodes covering `[t_a, t_b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    uniform: bool,
}

impl TimeGrid {
    /// Uniform grid with `n` nodes spanning `[t_a, t_b]`.
    pub fn uniform(t_a: f64, t_b: f64, n: usize) -> Result<Self> {
        if !(t_a.is_finite() && t_b.is_finite()) || t_b <= t_a {
            return Err(Error::InvalidGrid(format!(
                "need finite t_b > t_a, got [{t_a}, {t_b}]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {n}")));
        }
        let h = (t_b - t_a) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|k| t_a + k as f64 * h).collect();
        nodes[n - 1] = t_b;
        Ok(Self {
            nodes,
            uniform: true,
        })
    }

    /// Non-uniform grid from explicit nodes.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("need at least 2 nodes".into()));
        }
        if nodes.iter().any(|t| !t.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("nodes must be finite and strictly increasing".into()));
        }
        Ok(Self {
            nodes,
            uniform: false,
        })
    }

    pub fn t_a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false; a grid has at least two nodes.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn duration(&self) -> f64 {
        self.t_b() - self.t_a()
    }

    /// Spacing of a uniform grid; for non-uniform grids the mean spacing.
    pub fn step(&self) -> f64 {
        self.duration() / (self.len() - 1) as f64
    }

    /// Trapezoid weights for integrating nodal values over `[t_a, t_b]`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.len();
        let mut w = vec![0.0; n];
        for k in 0..n - 1 {
            let h = self.nodes[k + 1] - self.nodes[k];
            w[k] += 0.5 * h;
            w[k + 1] += 0.5 * h;
        }
        w
    }

    /// Index of the node closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &s) in self.nodes.iter().enumerate() {
            if (s - t).abs() < (self.nodes[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    pub(crate) fn check_same(&self, other: &TimeGrid) -> Result<()> {
        if self.nodes.len() != other.nodes.len()
            || self
                .nodes
                .iter()
                .zip(&other.nodes)
                .any(|(a, b)| (a - b).abs() > 1e-14 * (1.0 + a.abs()))
        {
            return Err(Error::GridMismatch(format!(
                "grids with {} and {} nodes on [{}, {}] vs [{}, {}]",
                self.len(),
                other.len(),
                self.t_a(),
                self.t_b(),
                other.t_a(),
                other.t_b()
            )));
        }
        Ok(())
    }
}

/// Uniform grid constructor with the usual argument order.
pub fn make_grid(t_a: f64, t_b: f64, n: usize) -> Result<TimeGrid> {
    TimeGrid::uniform(t_a, t_b, n)
}

/// A pointed path sampled on a grid, with `dim` components per node.
///
/// Values are stored node-major: component `c` at node `k` lives at
/// `k * dim + c`. The value at node 0 is the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T = f64> {
    grid: TimeGrid,
    dim: usize,
    values: Vec<T>,
}

impl<T: Copy> Path<T> {
    pub fn from_values(grid: &TimeGrid, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("path dimension must be positive".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for {} nodes of dimension {dim}, got {}",
                grid.len() * dim,
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            dim,
            values,
        })
    }

    /// Scalar path `t ↦ f(t)`.
    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> T) -> Self {
        Self {
            grid: grid.clone(),
            dim: 1,
            values: grid.nodes().iter().map(|&t| f(t)).collect(),
        }
    }

    /// Vector path; `f(t, out)` fills the `dim` components at time `t`.
    pub fn from_vector_fn(grid: &TimeGrid, dim: usize, zero: T, f: impl Fn(f64, &mut [T])) -> Self {
        let mut values = vec![zero; grid.len() * dim];
        for (k, &t) in grid.nodes().iter().enumerate() {
            f(t, &mut values[k * dim..(k + 1) * dim]);
        }
        Self {
            grid: grid.clone(),
            dim,
            values,
        }
    }

    pub fn constant(grid: &TimeGrid, value: T) -> Self {
        Self::from_fn(grid, |_| value)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Components at node `k`.
    pub fn at(&self, k: usize) -> &[T] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn anchor(&self) -> &[T] {
        self.at(0)
    }

    pub fn terminal(&self) -> &[T] {
        self.at(self.len() - 1)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Scalar value at node `k` of a one-dimensional path.
    pub fn scalar(&self, k: usize) -> T {
        self.values[k * self.dim]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Path<U> {
        Path {
            grid: self.grid.clone(),
            dim: self.dim,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl Path<f64> {
    pub fn zeros(grid: &TimeGrid, dim: usize) -> Self {
        Self {
            grid: grid.clone(),
            dim,
            values: vec![0.0; grid.len() * dim],
        }
    }

    /// Pointwise `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Path<f64>) -> Result<Path<f64>> {
        self.grid.check_same(&other.grid)?;
        if self.dim != other.dim {
            return Err(Error::InvalidArgument("path dimensions differ".into()));
        }
        Ok(Path {
            grid: self.grid.clone(),
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Path<f64>) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> Path<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

/// How a dual path is paired with a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingRule {
    /// Weights are used as given: a unit weight at one node evaluates the path there.
    PointEvaluation,
    /// Weights are sampled densities `x′(t)` integrated by the trapezoid rule.
    Trapezoid,
}

/// A linear form on paths over a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPath {
    grid: TimeGrid,
    dim: usize,
    weights: Vec<Complex64>,
    rule: PairingRule,
}

impl DualPath {
    pub fn new(grid: &TimeGrid, dim: usize, weights: Vec<Complex64>, rule: PairingRule) -> Result<Self> {
        if dim == 0 || weights.len() != grid.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "dual path needs {} weights, got {}",
                grid.len() * dim,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("dual weights must be finite".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            dim,
            weights,
            rule,
        })
    }

    pub fn zero(grid: &TimeGrid, dim: usize) -> Self {
        Self {
            grid: grid.clone(),
            dim,
            weights: vec![Complex64::new(0.0, 0.0); grid.len() * dim],
            rule: PairingRule::PointEvaluation,
        }
    }

    /// Evaluation of a scalar path at node `k`, scaled by `amplitude`.
    pub fn point(grid: &TimeGrid, k: usize, amplitude: f64) -> Result<Self> {
        if k >= grid.len() {
            return Err(Error::InvalidArgument(format!("node {k} outside grid")));
        }
        let mut d = Self::zero(grid, 1);
        d.weights[k] = Complex64::new(amplitude, 0.0);
        Ok(d)
    }

    /// Smooth scalar density `t ↦ f(t)` paired by the trapezoid rule.
    pub fn smooth(grid: &TimeGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid: grid.clone(),
            dim: 1,
            weights: grid.nodes().iter().map(|&t| f(t)).collect(),
            rule: PairingRule::Trapezoid,
        }
    }

    /// Point-evaluation dual from explicit nodal coefficients.
    pub fn from_coefficients(grid: &TimeGrid, coefficients: &[f64]) -> Result<Self> {
        Self::new(
            grid,
            1,
            coefficients.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
            PairingRule::PointEvaluation,
        )
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> PairingRule {
        self.rule
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// Nodal coefficients `a` with `⟨x′, x⟩ = Σ a_k · x_k`.
    pub fn coefficients(&self) -> Vec<Complex64> {
        match self.rule {
            PairingRule::PointEvaluation => self.weights.clone(),
            PairingRule::Trapezoid => {
                let q = self.grid.trapezoid_weights();
                self.weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * q[i / self.dim])
                    .collect()
            }
        }
    }

    /// `a·self + other`, expressed with point-evaluation weights.
    pub fn scale_add(&self, a: Complex64, other: &DualPath) -> Result<DualPath> {
        self.grid.check_same(&other.grid)?;
        if self.dim != other.dim {
            return Err(Error::InvalidArgument("dual dimensions differ".into()));
        }
        let (p, q) = (self.coefficients(), other.coefficients());
        Ok(DualPath {
            grid: self.grid.clone(),
            dim: self.dim,
            weights: p.iter().zip(&q).map(|(x, y)| a * x + y).collect(),
            rule: PairingRule::PointEvaluation,
        })
    }

    pub fn scaled(&self, a: f64) -> DualPath {
        DualPath {
            weights: self.weights.iter().map(|w| w * a).collect(),
            ..self.clone()
        }
    }

    pub fn neg(&self) -> DualPath {
        self.scaled(-1.0)
    }
}

/// The bilinear pairing `⟨x′, x⟩`.
pub fn pairing<T>(xp: &DualPath, x: &Path<T>) -> Result<Complex64>
where
    T: Copy + Into<Complex64>,
{
    xp.grid.check_same(&x.grid)?;
    if xp.dim != x.dim {
        return Err(Error::InvalidArgument(format!(
            "dual dimension {} does not match path dimension {}",
            xp.dim, x.dim
        )));
    }
    let coeffs = xp.coefficients();
    let mut acc = crate::numerics::CompensatedSum::<Complex64>::default();
    for (a, &v) in coeffs.iter().zip(&x.values) {
        acc.add(a * v.into());
    }
    Ok(acc.total())
}

/// The scale parameter `s ∈ {1, i}` of the Gaussian families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    /// `s = 1`: diffusion-type (probabilistic) integrals.
    #[default]
    Real,
    /// `s = i`: oscillatory (Schrödinger-type) integrals, by analytic continuation.
    Imaginary,
}

impl Scale {
    pub fn value(self) -> Complex64 {
        match self {
            Scale::Real => Complex64::new(1.0, 0.0),
            Scale::Imaginary => Complex64::new(0.0, 1.0),
        }
    }

    /// `√s`, continued from `√1 = 1` along the unit circle.
    pub fn sqrt(self) -> Complex64 {
        self.power(0.5)
    }

    /// `s^p` on the branch continued from `s = 1`.
    pub fn power(self, p: f64) -> Complex64 {
        match self {
            Scale::Real => Complex64::new(1.0, 0.0),
            Scale::Imaginary => Complex64::from_polar(1.0, p * std::f64::consts::FRAC_PI_2),
        }
    }
}

/// The two reference weights from which the families are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveKind {
    /// Lebesgue measure `dx`; invariant under `x ↦ x + x₀`.
    TranslationInvariant,
    /// `dτ/τ` on positive reals; invariant under `τ ↦ λτ`.
    ScaleInvariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimitiveIntegrator {
    pub kind: PrimitiveKind,
    pub dimension: usize,
}

impl PrimitiveIntegrator {
    pub fn new(kind: PrimitiveKind, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self { kind, dimension })
    }

    /// Density of the primitive integrator with respect to Lebesgue measure.
    pub fn density(&self, x: &[f64]) -> f64 {
        match self.kind {
            PrimitiveKind::TranslationInvariant => 1.0,
            PrimitiveKind::ScaleInvariant => x.iter().map(|v| 1.0 / v).product(),
        }
    }

    /// `∫ f dμ` over `axes` with the primitive weight folded in.
    pub fn integrate(
        &self,
        f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
        axes: &[Axis],
        rule: Rule,
    ) -> Result<quadrature::QuadResult> {
        if axes.len() != self.dimension {
            return Err(Error::InvalidArgument(format!(
                "{} axes for a {}-dimensional primitive",
                axes.len(),
                self.dimension
            )));
        }
        if self.kind == PrimitiveKind::ScaleInvariant
            && axes.iter().any(|a| a.lower() < 0.0)
        {
            return Err(Error::Domain("scale-invariant primitive lives on positive reals".into()));
        }
        let g = |x: &[f64]| f(x) * self.density(x);
        quadrature::quad_integrate(&g, axes, rule)
    }
}

/// `∫ e^{−(π/s)|x|²} dx` over `ℝ^dim`, which is `s^{dim/2}`.
///
/// For `s = 1` the value is obtained by quadrature of the one-dimensional
/// factor; for `s = i` by continuation of the closed form.
pub fn primitive_gaussian_norm(dim: usize, s: Scale) -> Result<Complex64> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    match s {
        Scale::Real => {
            let f = |x: &[f64]| Complex64::new((-std::f64::consts::PI * x[0] * x[0]).exp(), 0.0);
            let one = quadrature::quad_integrate(&f, &[Axis::WholeLine], Rule::default())?;
            Ok(one.value.powu(dim as u32))
        }
        Scale::Imaginary => Ok(s.power(dim as f64 / 2.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grids() {
        assert_eq!(make_grid(0.0, 1.0, 2).unwrap().nodes(), &[0.0, 1.0]);
        assert_eq!(
            make_grid(0.0, 1.0, 5).unwrap().nodes(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(make_grid(-1.0, 3.0, 3).unwrap().nodes(), &[-1.0, 1.0, 3.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(1.0, 1.0, 4).is_err());
        assert!(make_grid(2.0, 1.0, 4).is_err());
        assert!(make_grid(0.0, 1.0, 1).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.4]).is_err());
    }

    #[test]
    fn point_evaluation_pairing() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let x = Path::from_fn(&g, |t| t * t + 3.0);
        let xp = DualPath::point(&g, 10, 1.0).unwrap();
        assert_eq!(pairing(&xp, &x).unwrap(), Complex64::new(4.0, 0.0));
    }

    #[test]
    fn trapezoid_pairing() {
        let g = make_grid(0.0, 1.0, 101).unwrap();
        let one = DualPath::smooth(&g, |_| Complex64::new(1.0, 0.0));
        let v = pairing(&one, &Path::constant(&g, 1.0)).unwrap();
        assert!((v.re - 1.0).abs() < 1e-12 && v.im == 0.0);

        let g = make_grid(0.0, 1.0, 1001).unwrap();
        let t = DualPath::smooth(&g, |t| Complex64::new(t, 0.0));
        let v = pairing(&t, &Path::from_fn(&g, |t| t)).unwrap();
        assert!((v.re - 1.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn pairing_grid_mismatch() {
        let g1 = make_grid(0.0, 1.0, 11).unwrap();
        let g2 = make_grid(0.0, 1.0, 12).unwrap();
        let xp = DualPath::point(&g1, 0, 1.0).unwrap();
        assert!(matches!(
            pairing(&xp, &Path::constant(&g2, 1.0)),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn paths_are_pointed() {
        let g = make_grid(0.0, 2.0, 9).unwrap();
        let x = Path::from_fn(&g, |t| 1.5 + t);
        assert_eq!(x.anchor(), &[1.5]);
        let y = x.axpy(2.0, &Path::from_fn(&g, |t| t)).unwrap();
        assert_eq!(y.anchor(), &[1.5]);
    }

    #[test]
    fn gaussian_norms() {
        let one = primitive_gaussian_norm(1, Scale::Real).unwrap();
        assert!((one.re - 1.0).abs() < 1e-12 && one.im.abs() < 1e-15);
        let two = primitive_gaussian_norm(2, Scale::Real).unwrap();
        assert!((two.re - 1.0).abs() < 1e-12);
        let osc = primitive_gaussian_norm(1, Scale::Imaginary).unwrap();
        let expected = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!((osc - expected).norm() < 1e-15);
    }

    #[test]
    fn translation_invariant_primitive() {
        let p = PrimitiveIntegrator::new(PrimitiveKind::TranslationInvariant, 1).unwrap();
        let x0 = 0.7;
        let f = |x: &[f64]| Complex64::new((-(x[0] * x[0])).exp() * (1.0 + x[0]).cos(), 0.0);
        let shifted = |x: &[f64]| f(&[x[0] + x0]);
        let a = p
            .integrate(&f, &[Axis::Interval(-9.0, 9.0)], Rule::default())
            .unwrap();
        let b = p
            .integrate(&shifted, &[Axis::Interval(-9.0 - x0, 9.0 - x0)], Rule::default())
            .unwrap();
        assert!((a.value - b.value).norm() < 1e-12);
    }

    #[test]
    fn scale_invariant_primitive() {
        let p = PrimitiveIntegrator::new(PrimitiveKind::ScaleInvariant, 1).unwrap();
        let g = |t: f64| t * t * (-t).exp();
        let base = p
            .integrate(&|x: &[f64]| Complex64::new(g(x[0]), 0.0), &[Axis::HalfLine(0.0)], Rule::default())
            .unwrap();
        for lambda in [0.5, 2.0, 10.0] {
            let scaled = p
                .integrate(
                    &|x: &[f64]| Complex64::new(g(lambda * x[0]), 0.0),
                    &[Axis::HalfLine(0.0)],
                    Rule::default(),
                )
                .unwrap();
            assert!((scaled.value - base.value).norm() < 1e-10, "lambda {lambda}");
        }
    }
}
