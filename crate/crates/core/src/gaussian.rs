//! Real and complex Gaussian integrators on a time lattice.
//!
//! The weight is `e^{−(π/s)[Q(x − x̄) − B(x̄)]}` over the free nodes, where
//! `Q(x) = xᵀAx` for the symmetric node matrix `A` of a [`LatticeAction`].
//! Free nodes are every node except the anchor and, for a fixed terminal
//! value, the last node. With `K` the restriction of `A` to free nodes the
//! covariance is `G = K⁻¹`, and `s = 1` samples have covariance `G/(2π)`.
//!
//! ```
//! use lattice_integrators::gaussian::GaussianSpec;
//! use lattice_integrators::lattice::make_grid;
//!
//! let grid = make_grid(0.0, 1.0, 5).unwrap();
//! let spec = GaussianSpec::brownian(&grid).unwrap();
//! // Brownian motion: G(t, s) = min(t, s).
//! assert!((spec.kernel().at(2, 4) - 0.5).abs() < 1e-12);
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{pairing, DualPath, Path, Scale, TimeGrid};
use crate::montecarlo::{sample_rng, standard_normals, PathSampler, CHUNK};
use crate::numerics::CompensatedSum;
use crate::quadrature::{gauss_hermite, tensor_sum};

const PI: f64 = std::f64::consts::PI;

/// Condition at `t_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminal {
    /// `x(t_b) = x_b`
    Fixed(f64),
    /// `ẋ(t_b) = v_b`, imposed as the natural boundary condition `(A x)_N = v_b`.
    Derivative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub anchor: f64,
    pub terminal: Terminal,
}

impl BoundaryConditions {
    pub fn fixed(x_a: f64, x_b: f64) -> Self {
        Self {
            anchor: x_a,
            terminal: Terminal::Fixed(x_b),
        }
    }

    pub fn derivative(x_a: f64, v_b: f64) -> Self {
        Self {
            anchor: x_a,
            terminal: Terminal::Derivative(v_b),
        }
    }

    /// Indices of the nodes left free by these conditions.
    pub fn free_nodes(&self, n: usize) -> Vec<usize> {
        match self.terminal {
            Terminal::Fixed(_) => (1..n - 1).collect(),
            Terminal::Derivative(_) => (1..n).collect(),
        }
    }
}

/// Quadratic action `Q(x₁, x₂) = x₁ᵀ A x₂` on node values.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeAction {
    grid: TimeGrid,
    matrix: DMatrix<f64>,
    omega: Option<f64>,
}

impl LatticeAction {
    /// `∫ ẋ²` discretized as `Σ (Δx)²/h`.
    pub fn free(grid: &TimeGrid) -> Self {
        Self::harmonic(grid, 0.0)
    }

    /// `∫ ẋ² − ω²x²` with the midpoint rule on each segment.
    pub fn harmonic(grid: &TimeGrid, omega: f64) -> Self {
        let n = grid.len();
        let w2 = omega * omega;
        let mut a = DMatrix::zeros(n, n);
        for (k, seg) in grid.nodes().windows(2).enumerate() {
            let h = seg[1] - seg[0];
            let d = 1.0 / h - w2 * h / 4.0;
            let o = -1.0 / h - w2 * h / 4.0;
            a[(k, k)] += d;
            a[(k + 1, k + 1)] += d;
            a[(k, k + 1)] += o;
            a[(k + 1, k)] += o;
        }
        Self {
            grid: grid.clone(),
            matrix: a,
            omega: Some(omega),
        }
    }

    /// Arbitrary symmetric node matrix.
    pub fn from_matrix(grid: &TimeGrid, matrix: DMatrix<f64>) -> Result<Self> {
        let n = grid.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "action matrix must be {n}×{n}, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument("action matrix is not symmetric".into()));
                }
            }
        }
        Ok(Self {
            grid: grid.clone(),
            matrix,
            omega: None,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Frequency of a harmonic action, `None` for a general matrix.
    pub fn omega(&self) -> Option<f64> {
        self.omega
    }

    fn apply(&self, x: &[f64]) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(x)
    }
}

/// `G = K⁻¹` embedded into node coordinates, with zero rows and columns at constrained nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceKernel {
    grid: TimeGrid,
    bc: BoundaryConditions,
    free: Vec<usize>,
    full: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl CovarianceKernel {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn bc(&self) -> BoundaryConditions {
        self.bc
    }

    /// `G(t_i, t_j)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.full[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.full
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    /// `G` restricted to free nodes.
    pub fn free_block(&self) -> DMatrix<f64> {
        let m = self.free.len();
        DMatrix::from_fn(m, m, |i, j| self.full[(self.free[i], self.free[j])])
    }

    /// Eigenvalues of `K = G⁻¹` on the free nodes, ascending.
    pub fn precision_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `max |K G − I|` on the free nodes.
    pub fn identity_residual(&self, action: &LatticeAction) -> f64 {
        let k = restrict(action.matrix(), &self.free);
        let prod = k * self.free_block();
        let m = self.free.len();
        (prod - DMatrix::<f64>::identity(m, m)).amax()
    }

    /// The kernel as CSV: header `t,<node times…>`, then one row per node.
    pub fn to_csv(&self) -> String {
        matrix_csv(self.grid.nodes(), &self.full)
    }
}

pub(crate) fn matrix_csv(nodes: &[f64], m: &DMatrix<f64>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(nodes.iter().map(|t| format!("{t:.16e}")));
    w.write_record(&header).expect("in-memory csv");
    for (i, t) in nodes.iter().enumerate() {
        let mut row = vec![format!("{t:.16e}")];
        row.extend((0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])));
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

fn restrict(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

fn embed(n: usize, free: &[usize], g: &DMatrix<f64>) -> DMatrix<f64> {
    let mut full = DMatrix::zeros(n, n);
    for (i, &p) in free.iter().enumerate() {
        for (j, &q) in free.iter().enumerate() {
            full[(p, q)] = g[(i, j)];
        }
    }
    full
}

/// Invert the action on the nodes left free by `bc`.
///
/// Fails with [`Error::ZeroMode`] when the restricted operator has a kernel.
/// For harmonic actions the test also catches frequencies that sit between a
/// continuum conjugate point and its lattice image, where the lattice operator
/// is invertible only because of discretization error.
pub fn build_covariance(action: &LatticeAction, bc: BoundaryConditions) -> Result<CovarianceKernel> {
    let n = action.grid.len();
    if n < 3 {
        return Err(Error::InvalidGrid("a Gaussian spec needs at least 3 nodes".into()));
    }
    let free = bc.free_nodes(n);
    let k = restrict(&action.matrix, &free);
    let eig = SymmetricEigen::new(k.clone());
    let lmax = eig.eigenvalues.amax();
    let mut band = 1e-12 * lmax;
    if let Some(w) = action.omega {
        let h = action
            .grid
            .nodes()
            .windows(2)
            .map(|s| s[1] - s[0])
            .fold(0.0, f64::max);
        band += 0.25 * h * w * w * (w * h).powi(2);
    }
    let mut order: Vec<usize> = (0..free.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let kernel: Vec<Vec<f64>> = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i].abs() <= band)
        .map(|&i| {
            let mut v = vec![0.0; n];
            for (r, &p) in free.iter().enumerate() {
                v[p] = eig.eigenvectors[(r, i)];
            }
            v
        })
        .collect();
    if !kernel.is_empty() {
        return Err(Error::ZeroMode { basis: kernel });
    }
    let g = match k.clone().cholesky() {
        Some(c) => c.inverse(),
        None => k
            .lu()
            .try_inverse()
            .ok_or(Error::Singular { condition: f64::INFINITY })?,
    };
    let g = (&g + g.transpose()) * 0.5;
    Ok(CovarianceKernel {
        grid: action.grid.clone(),
        bc,
        full: embed(n, &free, &g),
        free,
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
    })
}

/// A Gaussian integrator: action, boundary data, scale and derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    action: LatticeAction,
    bc: BoundaryConditions,
    s: Scale,
    kernel: CovarianceKernel,
    mean: Path,
    log_det_k: f64,
    negative_modes: usize,
}

impl GaussianSpec {
    pub fn new(action: LatticeAction, bc: BoundaryConditions, s: Scale) -> Result<Self> {
        let kernel = build_covariance(&action, bc)?;
        let negative_modes = kernel.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        if s == Scale::Real && negative_modes > 0 {
            return Err(Error::NotPositiveDefinite);
        }
        let log_det_k = kernel.eigenvalues.iter().map(|l| l.abs().ln()).sum();
        let mean = solve_mean(&action, &kernel, bc)?;
        Ok(Self {
            action,
            bc,
            s,
            kernel,
            mean,
            log_det_k,
            negative_modes,
        })
    }

    /// Brownian motion from 0 with a free end: `G(t, s) = min(t, s) − t_a`.
    pub fn brownian(grid: &TimeGrid) -> Result<Self> {
        Self::new(
            LatticeAction::free(grid),
            BoundaryConditions::derivative(0.0, 0.0),
            Scale::Real,
        )
    }

    pub fn with_scale(&self, s: Scale) -> Result<Self> {
        if s == Scale::Real && self.negative_modes > 0 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { s, ..self.clone() })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.action.grid()
    }

    pub fn action(&self) -> &LatticeAction {
        &self.action
    }

    pub fn bc(&self) -> BoundaryConditions {
        self.bc
    }

    pub fn scale(&self) -> Scale {
        self.s
    }

    pub fn kernel(&self) -> &CovarianceKernel {
        &self.kernel
    }

    /// The mean path `x̄`, the zero mode of the action with the declared boundary data.
    pub fn mean(&self) -> &Path {
        &self.mean
    }

    /// Number of free nodes.
    pub fn free_dimension(&self) -> usize {
        self.kernel.free.len()
    }

    /// Number of negative eigenvalues of `K` (the Morse index).
    pub fn negative_modes(&self) -> usize {
        self.negative_modes
    }

    /// `log Det W = −log |det K|`.
    pub fn log_det_w(&self) -> f64 {
        -self.log_det_k
    }

    /// `Z(0) = s^{m/2} Det(W)^{1/2}` for `m` free nodes.
    ///
    /// For `s = i` each negative eigenvalue of `K` contributes a phase `e^{−iπ/2}`,
    /// the value obtained by continuing each one-dimensional Fresnel factor.
    pub fn normalization(&self) -> Complex64 {
        let m = self.free_dimension() as f64;
        let phase = match self.s {
            Scale::Real => 0.0,
            Scale::Imaginary => PI / 4.0 * m - PI / 2.0 * self.negative_modes as f64,
        };
        Complex64::from_polar((0.5 * self.log_det_w()).exp(), phase)
    }

    /// `W(x′) = ⟨x′, G x′⟩`.
    pub fn variance(&self, xp: &DualPath) -> Result<Complex64> {
        self.grid().check_same(xp.grid())?;
        if xp.dim() != 1 {
            return Err(Error::InvalidArgument("Gaussian duals are scalar".into()));
        }
        let a = xp.coefficients();
        let free = &self.kernel.free;
        let mut acc = CompensatedSum::<Complex64>::default();
        for &p in free {
            let mut row = CompensatedSum::<Complex64>::default();
            for &q in free {
                row.add(a[q] * self.kernel.full[(p, q)]);
            }
            acc.add(a[p] * row.total());
        }
        Ok(acc.total())
    }
}

fn solve_mean(action: &LatticeAction, kernel: &CovarianceKernel, bc: BoundaryConditions) -> Result<Path> {
    let n = action.grid.len();
    let mut x = vec![0.0; n];
    x[0] = bc.anchor;
    let mut rhs = vec![0.0; n];
    match bc.terminal {
        Terminal::Fixed(xb) => x[n - 1] = xb,
        Terminal::Derivative(vb) => rhs[n - 1] = vb,
    }
    let fixed: Vec<usize> = (0..n).filter(|i| !kernel.free.contains(i)).collect();
    let a = &action.matrix;
    for &p in &kernel.free {
        for &q in &fixed {
            rhs[p] -= a[(p, q)] * x[q];
        }
    }
    for &p in &kernel.free {
        x[p] = kernel.free.iter().map(|&q| kernel.full[(p, q)] * rhs[q]).sum();
    }
    Path::from_values(&action.grid, 1, x)
}

fn check_path(spec: &GaussianSpec, x: &Path) -> Result<()> {
    spec.grid().check_same(x.grid())?;
    if x.dim() != 1 {
        return Err(Error::InvalidArgument("Gaussian paths are scalar".into()));
    }
    Ok(())
}

/// `Q(x₁, x₂) = x₁ᵀ A x₂`.
pub fn quadratic_form(spec: &GaussianSpec, x1: &Path, x2: &Path) -> Result<Complex64> {
    check_path(spec, x1)?;
    check_path(spec, x2)?;
    let ax2 = spec.action.apply(x2.values());
    let q: f64 = x1.values().iter().zip(ax2.iter()).map(|(a, b)| a * b).sum();
    Ok(Complex64::new(q, 0.0))
}

/// Lattice boundary form: `½ Σ_{k ∈ {0, N}} [x₁(k)(A x₂)_k + x₂(k)(A x₁)_k]`.
///
/// `(A x)_N` and `−(A x)_0` are the lattice endpoint derivatives, so this is the
/// discrete `½[x₁ẋ₂ + ẋ₁x₂]` between the endpoints. It makes `Q(x̄) = B(x̄)`
/// hold to rounding for the mean path.
pub fn discrete_boundary_form(spec: &GaussianSpec, x1: &Path, x2: &Path) -> Result<Complex64> {
    check_path(spec, x1)?;
    check_path(spec, x2)?;
    let n = spec.grid().len();
    let a1 = spec.action.apply(x1.values());
    let a2 = spec.action.apply(x2.values());
    let (u, v) = (x1.values(), x2.values());
    let b = 0.5 * (u[0] * a2[0] + v[0] * a1[0] + u[n - 1] * a2[n - 1] + v[n - 1] * a1[n - 1]);
    Ok(Complex64::new(b, 0.0))
}

fn one_sided_derivative(t: [f64; 3], f: [f64; 3]) -> f64 {
    let [t0, t1, t2] = t;
    f[0] * (2.0 * t0 - t1 - t2) / ((t0 - t1) * (t0 - t2))
        + f[1] * (t0 - t2) / ((t1 - t0) * (t1 - t2))
        + f[2] * (t0 - t1) / ((t2 - t0) * (t2 - t1))
}

fn endpoint_derivatives(grid: &TimeGrid, x: &[f64]) -> (f64, f64) {
    let t = grid.nodes();
    let n = t.len();
    if n == 2 {
        let d = (x[1] - x[0]) / (t[1] - t[0]);
        return (d, d);
    }
    let left = one_sided_derivative([t[0], t[1], t[2]], [x[0], x[1], x[2]]);
    let right = one_sided_derivative(
        [t[n - 1], t[n - 2], t[n - 3]],
        [x[n - 1], x[n - 2], x[n - 3]],
    );
    (left, right)
}

/// `B(x₁, x₂) = ½[x₁ẋ₂ + ẋ₁x₂]` evaluated between `t_a` and `t_b`.
///
/// Endpoint derivatives use second-order one-sided stencils, so the value
/// agrees with the continuum boundary form to `O(h²)`.
pub fn boundary_form(spec: &GaussianSpec, x1: &Path, x2: &Path) -> Result<Complex64> {
    check_path(spec, x1)?;
    check_path(spec, x2)?;
    Ok(Complex64::new(stencil_boundary_form(spec.grid(), x1.values(), x2.values()), 0.0))
}

/// [`boundary_form`] on raw node values.
pub fn stencil_boundary_form(grid: &TimeGrid, x1: &[f64], x2: &[f64]) -> f64 {
    let n = grid.len();
    let (d1a, d1b) = endpoint_derivatives(grid, x1);
    let (d2a, d2b) = endpoint_derivatives(grid, x2);
    let at_b = x1[n - 1] * d2b + d1b * x2[n - 1];
    let at_a = x1[0] * d2a + d1a * x2[0];
    0.5 * (at_b - at_a)
}

/// `Z(x′) = s^{m/2} Det(W)^{1/2} e^{2πi⟨x′, x̄⟩ − πs W(x′)}`.
///
/// The boundary factor `e^{(π/s)B(x̄)}` is not included; see [`boundary_weight`].
pub fn gaussian_z(spec: &GaussianSpec, xp: &DualPath) -> Result<Complex64> {
    let w = spec.variance(xp)?;
    let mean_pairing = pairing(xp, spec.mean())?;
    let i = Complex64::i();
    Ok(spec.normalization() * (2.0 * PI * i * mean_pairing - PI * spec.s.value() * w).exp())
}

/// `e^{(π/s) B(x̄)}`, the factor separating `Z(0)` from the total mass of the weight.
pub fn boundary_weight(spec: &GaussianSpec) -> Result<Complex64> {
    let b = effective_action(spec)?;
    Ok((b * PI / spec.s.value()).exp())
}

/// `Σ_x̄ Z_x̄(0) e^{(π/s)B(x̄)}` over an explicit list of zero-mode means.
pub fn total_mass(specs: &[GaussianSpec]) -> Result<Complex64> {
    let mut acc = CompensatedSum::<Complex64>::default();
    for spec in specs {
        acc.add(spec.normalization() * boundary_weight(spec)?);
    }
    Ok(acc.total())
}

/// Integrand for [`gaussian_integrate`].
#[derive(Clone)]
pub enum Functional {
    /// `F(x) = f(x(t_{k₁}), …, x(t_{k_r}))` for at most six nodes.
    Cylinder {
        nodes: Vec<usize>,
        f: Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>,
    },
    /// `F(x) = Σ_j c_j e^{2πi⟨x′_j, x⟩}`.
    Characters(Vec<(Complex64, DualPath)>),
}

impl Functional {
    pub fn cylinder(nodes: Vec<usize>, f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Functional::Cylinder {
            nodes,
            f: Arc::new(f),
        }
    }

    /// `Θ(·, x′) = e^{2πi⟨x′, ·⟩}`.
    pub fn character(xp: DualPath) -> Self {
        Functional::Characters(vec![(Complex64::new(1.0, 0.0), xp)])
    }
}

/// Gauss–Hermite points per axis for a cylinder functional of `k` free nodes.
fn hermite_points(k: usize) -> usize {
    match k {
        0 | 1 => 64,
        2 => 40,
        3 => 24,
        4 => 14,
        5 => 10,
        _ => 8,
    }
}

/// `∫ F(x) e^{−(π/s)Q(x − x̄)} dx` over the free nodes.
///
/// Character combinations use the closed form and work for both scales.
/// Cylinder functionals (`s = 1` only) are integrated by tensor Gauss–Hermite
/// quadrature in the whitened coordinates of their marginal.
pub fn gaussian_integrate(spec: &GaussianSpec, f: &Functional) -> Result<Complex64> {
    match f {
        Functional::Characters(terms) => {
            let mut acc = CompensatedSum::<Complex64>::default();
            for (c, xp) in terms {
                acc.add(c * gaussian_z(spec, xp)?);
            }
            Ok(acc.total())
        }
        Functional::Cylinder { nodes, f } => {
            if spec.s != Scale::Real {
                return Err(Error::Unsupported(
                    "cylinder functionals are integrated at s = 1 only".into(),
                ));
            }
            let n = spec.grid().len();
            if nodes.iter().any(|&k| k >= n) {
                return Err(Error::InvalidArgument("cylinder node outside grid".into()));
            }
            let free: Vec<usize> = nodes
                .iter()
                .copied()
                .filter(|k| spec.kernel.free.contains(k))
                .collect();
            let mut distinct = free.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() > 6 {
                return Err(Error::DimensionLimit {
                    dim: distinct.len(),
                    limit: 6,
                });
            }
            let mean = spec.mean().values().to_vec();
            let g = restrict(spec.kernel.matrix(), &distinct);
            let l = g
                .cholesky()
                .ok_or(Error::NotPositiveDefinite)?
                .l();
            let k = distinct.len();
            let (u, w) = gauss_hermite(hermite_points(k));
            let grids: Vec<(Vec<f64>, Vec<f64>)> = (0..k).map(|_| (u.clone(), w.clone())).collect();
            let scale = 1.0 / PI.sqrt();
            let integrand = |z: &[f64]| {
                let mut x = mean.clone();
                for (r, &p) in distinct.iter().enumerate() {
                    let mut v = 0.0;
                    for c in 0..=r {
                        v += l[(r, c)] * z[c];
                    }
                    x[p] += v * scale;
                }
                let args: Vec<f64> = nodes.iter().map(|&p| x[p]).collect();
                f(&args)
            };
            let (sum, _) = tensor_sum(&integrand, &grids)?;
            let expectation = sum * PI.powf(-(k as f64) / 2.0);
            Ok(expectation * spec.normalization())
        }
    }
}

/// Draws paths from the `s = 1` Gaussian: `x = x̄ + L z / √(2π)` with `L Lᵀ = G`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    grid: TimeGrid,
    mean: Vec<f64>,
    free: Vec<usize>,
    l: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(spec: &GaussianSpec) -> Result<Self> {
        if spec.s != Scale::Real {
            return Err(Error::Unsupported("sampling requires s = 1".into()));
        }
        let l = spec
            .kernel
            .free_block()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .l()
            / (2.0 * PI).sqrt();
        Ok(Self {
            grid: spec.grid().clone(),
            mean: spec.mean().values().to_vec(),
            free: spec.kernel.free.clone(),
            l,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z = standard_normals(rng, self.free.len());
        let mut x = self.mean.clone();
        for (r, &p) in self.free.iter().enumerate() {
            let mut v = 0.0;
            for (c, zc) in z.iter().enumerate().take(r + 1) {
                v += self.l[(r, c)] * zc;
            }
            x[p] += v;
        }
        x
    }
}

impl PathSampler for GaussianSampler {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Path> {
        Path::from_values(&self.grid, 1, self.draw(rng))
    }
}

/// `n` seeded samples; sample `i` uses RNG stream `i`.
pub fn sample_gaussian(spec: &GaussianSpec, n: usize, seed: u64) -> Result<Vec<Path>> {
    let sampler = GaussianSampler::new(spec)?;
    (0..n)
        .into_par_iter()
        .map(|i| sampler.sample(&mut sample_rng(seed, i as u64)))
        .collect()
}

/// Nodewise sample moments with standard errors.
///
/// Second moments are taken about the mean path `x̄`, so `covariance`
/// estimates `G/(2π)` without the bias of a fitted mean.
#[derive(Debug, Clone)]
pub struct SampleMoments {
    pub samples: usize,
    pub mean: Vec<f64>,
    pub mean_stderr: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub covariance_stderr: DMatrix<f64>,
}

/// Stream `n` samples and accumulate [`SampleMoments`] without storing paths.
pub fn gaussian_moments(spec: &GaussianSpec, n: usize, seed: u64) -> Result<SampleMoments> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let sampler = GaussianSampler::new(spec)?;
    let nodes = spec.grid().len();
    let xbar = spec.mean().values().to_vec();
    struct Acc {
        s1: Vec<f64>,
        s2: Vec<f64>,
        p: DMatrix<f64>,
        p2: DMatrix<f64>,
    }
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<Acc> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Acc {
                s1: vec![0.0; nodes],
                s2: vec![0.0; nodes],
                p: DMatrix::zeros(nodes, nodes),
                p2: DMatrix::zeros(nodes, nodes),
            };
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let x = sampler.draw(&mut sample_rng(seed, i as u64));
                let d: Vec<f64> = x.iter().zip(&xbar).map(|(a, b)| a - b).collect();
                for k in 0..nodes {
                    acc.s1[k] += x[k];
                    acc.s2[k] += x[k] * x[k];
                }
                for j in 0..nodes {
                    for k in 0..=j {
                        let v = d[j] * d[k];
                        acc.p[(j, k)] += v;
                        acc.p2[(j, k)] += v * v;
                    }
                }
            }
            acc
        })
        .collect();
    let nf = n as f64;
    let sum_vec = |pick: &dyn Fn(&Acc, usize) -> f64, k: usize| {
        let mut s = CompensatedSum::<f64>::default();
        for p in &partials {
            s.add(pick(p, k));
        }
        s.total()
    };
    let mut mean = vec![0.0; nodes];
    let mut mean_stderr = vec![0.0; nodes];
    for k in 0..nodes {
        let m = sum_vec(&|a, k| a.s1[k], k) / nf;
        let m2 = sum_vec(&|a, k| a.s2[k], k) / nf;
        mean[k] = m;
        mean_stderr[k] = ((m2 - m * m).max(0.0) * nf / (nf - 1.0) / nf).sqrt();
    }
    let mut cov = DMatrix::zeros(nodes, nodes);
    let mut cov_se = DMatrix::zeros(nodes, nodes);
    for j in 0..nodes {
        for k in 0..=j {
            let mut s = CompensatedSum::<f64>::default();
            let mut s2 = CompensatedSum::<f64>::default();
            for p in &partials {
                s.add(p.p[(j, k)]);
                s2.add(p.p2[(j, k)]);
            }
            let c = s.total() / nf;
            let var = (s2.total() / nf - c * c).max(0.0) * nf / (nf - 1.0);
            cov[(j, k)] = c;
            cov[(k, j)] = c;
            cov_se[(j, k)] = (var / nf).sqrt();
            cov_se[(k, j)] = cov_se[(j, k)];
        }
    }
    Ok(SampleMoments {
        samples: n,
        mean,
        mean_stderr,
        covariance: cov,
        covariance_stderr: cov_se,
    })
}

/// Recover `x̄(t_k)` from `(1/2πi) ∂/∂x′(t_k) log Z` by central differences in the dual weight.
pub fn mean_via_characteristic(spec: &GaussianSpec, step: f64) -> Result<Path> {
    if !(step.is_finite() && step > 1e-150) {
        return Err(Error::InvalidArgument(format!("difference step {step} underflows")));
    }
    let grid = spec.grid();
    let z0 = gaussian_z(spec, &DualPath::zero(grid, 1))?;
    if z0.norm() == 0.0 {
        return Err(Error::Vanishing("Z(0)"));
    }
    let values = (0..grid.len())
        .map(|k| {
            let plus = gaussian_z(spec, &DualPath::point(grid, k, step)?)?;
            let minus = gaussian_z(spec, &DualPath::point(grid, k, -step)?)?;
            let d = (plus - minus) / (2.0 * step * z0);
            Ok((d / (2.0 * PI * Complex64::i())).re)
        })
        .collect::<Result<Vec<f64>>>()?;
    Path::from_values(grid, 1, values)
}

/// `Γ = B(x̄)`, checked against `Q(x̄)`.
pub fn effective_action(spec: &GaussianSpec) -> Result<Complex64> {
    let b = discrete_boundary_form(spec, spec.mean(), spec.mean())?;
    let q = quadratic_form(spec, spec.mean(), spec.mean())?;
    if (b - q).norm() > 1e-10 * q.norm().max(1.0) {
        return Err(Error::Domain(format!("B(x̄) = {b} differs from Q(x̄) = {q}")));
    }
    Ok(b)
}

/// A complex Gaussian on pairs `w = (z, z̲)` with block covariance
/// `[[G_z̲z, G_z̲z̲], [G_zz, G_zz̲]]` acting on `w′ = (z′, z̲′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGaussianSpec {
    gc: DMatrix<Complex64>,
    mean: DVector<Complex64>,
    conjugate_pair: bool,
}

impl ComplexGaussianSpec {
    pub fn from_blocks(
        g_zbar_z: DMatrix<Complex64>,
        g_zbar_zbar: DMatrix<Complex64>,
        g_zz: DMatrix<Complex64>,
        g_z_zbar: DMatrix<Complex64>,
        mean: DVector<Complex64>,
    ) -> Result<Self> {
        let m = g_zbar_z.nrows();
        for b in [&g_zbar_z, &g_zbar_zbar, &g_zz, &g_z_zbar] {
            if b.nrows() != m || b.ncols() != m {
                return Err(Error::InvalidArgument("covariance blocks must all be m×m".into()));
            }
        }
        if mean.len() != 2 * m {
            return Err(Error::InvalidArgument(format!("mean pair must have {} entries", 2 * m)));
        }
        let mut gc = DMatrix::zeros(2 * m, 2 * m);
        gc.view_mut((0, 0), (m, m)).copy_from(&g_zbar_z);
        gc.view_mut((0, m), (m, m)).copy_from(&g_zbar_zbar);
        gc.view_mut((m, 0), (m, m)).copy_from(&g_zz);
        gc.view_mut((m, m), (m, m)).copy_from(&g_z_zbar);
        Ok(Self {
            gc,
            mean,
            conjugate_pair: false,
        })
    }

    /// Declare `z̲ = z*`, which enables the Hermiticity report.
    pub fn conjugate_pair(mut self) -> Self {
        self.conjugate_pair = true;
        self
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.gc
    }

    /// `max |G − G†|` when `z̲ = z*` was declared, else `None`.
    pub fn hermiticity_defect(&self) -> Option<f64> {
        self.conjugate_pair
            .then(|| (&self.gc - self.gc.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// `W^ℂ(w′) = w′ᵀ G^ℂ w′`.
    pub fn variance(&self, wp: &[Complex64]) -> Result<Complex64> {
        if wp.len() != self.gc.nrows() {
            return Err(Error::InvalidArgument(format!(
                "dual pair must have {} entries",
                self.gc.nrows()
            )));
        }
        let v = DVector::from_column_slice(wp);
        Ok((v.transpose() * &self.gc * &v)[(0, 0)])
    }
}

/// `Z(w′) = Det(G^ℂ)^{1/2} e^{2πi⟨w′, w̄⟩ − πW^ℂ(w′)}`.
pub fn complex_gaussian_z(cspec: &ComplexGaussianSpec, wp: &[Complex64]) -> Result<Complex64> {
    let w = cspec.variance(wp)?;
    if w.re < -1e-14 * w.norm().max(1.0) {
        return Err(Error::Domain(format!("Re W(w′) = {} is negative", w.re)));
    }
    let det = crate::determinants::lattice_logdet_complex(&cspec.gc)?;
    let pair: Complex64 = wp.iter().zip(cspec.mean.iter()).map(|(a, b)| a * b).sum();
    Ok(det.power(0.5) * (2.0 * PI * Complex64::i() * pair - PI * w).exp())
}
