//! Pinned endpoints, Dirac limits and image sums on quotient spaces.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::determinants::{lattice_logdet, tracked_power};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianSpec, Terminal};
use crate::lattice::{DualPath, Path, Scale};
use crate::numerics::{compensated_sum_complex, neville_to_zero};
use crate::quadrature::{adaptive_kronrod, gauss_legendre, quad_integrate, Axis, Rule};

fn cz(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A Gaussian on pointed paths with its free end pinned to `x_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedSpec {
    base: GaussianSpec,
    pin_value: f64,
    kernel: DMatrix<f64>,
    mean: Path,
    normalization: Complex64,
}

/// Condition a free-ended Gaussian on `x(t_b) = x_b`.
pub fn pin_endpoint(spec: &GaussianSpec, x_b: f64) -> Result<PinnedSpec> {
    if !matches!(spec.bc().terminal, Terminal::Derivative(_)) {
        return Err(Error::InvalidArgument("pinning needs a free terminal node".into()));
    }
    let g = spec.kernel().matrix();
    let n = g.nrows() - 1;
    let gnn = g[(n, n)];
    if !(gnn.abs() > 1e-14 * g.amax().max(1.0)) {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let col = g.column(n).into_owned();
    let kernel = g - &col * col.transpose() / gnn;
    let shift = (x_b - spec.mean().scalar(n)) / gnn;
    let mut values: Vec<f64> = (0..=n).map(|k| spec.mean().scalar(k) + col[k] * shift).collect();
    values[n] = x_b;
    let mean = Path::from_values(spec.grid(), 1, values)?;
    let normalization = pinned_normalization(gnn, spec.scale())?;
    Ok(PinnedSpec {
        base: spec.clone(),
        pin_value: x_b,
        kernel,
        mean,
        normalization,
    })
}

/// `(s·G(t_b, t_b))^{−1/2}`, continued along `s = e^{iθ}` from `θ = 0`.
pub fn pinned_normalization(g_bb: f64, s: Scale) -> Result<Complex64> {
    let end = match s {
        Scale::Real => 0.0,
        Scale::Imaginary => PI / 2.0,
    };
    let path: Vec<Complex64> = (0..=64)
        .map(|k| Complex64::from_polar(1.0, end * k as f64 / 64.0) * g_bb)
        .collect();
    tracked_power(&path, -0.5)
}

impl PinnedSpec {
    pub fn base(&self) -> &GaussianSpec {
        &self.base
    }

    pub fn pin_value(&self) -> f64 {
        self.pin_value
    }

    /// `G^{(a,b)}` on all nodes; rows and columns at both ends vanish.
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn mean(&self) -> &Path {
        &self.mean
    }

    pub fn normalization(&self) -> Complex64 {
        self.normalization
    }

    /// `W^{(a,b)}(x′) = ⟨x′, G^{(a,b)} x′⟩`.
    pub fn variance(&self, xp: &DualPath) -> Result<Complex64> {
        self.base.grid().check_same(xp.grid())?;
        let a = DVector::from_vec(xp.coefficients());
        let g = self.kernel.map(cz);
        Ok((a.transpose() * g * &a)[(0, 0)])
    }

    /// `Z(x′) = norm · e^{2πi⟨x′, x̄^{(a,b)}⟩ − πs W^{(a,b)}(x′)}`.
    pub fn z(&self, xp: &DualPath) -> Result<Complex64> {
        let w = self.variance(xp)?;
        let pair = crate::lattice::pairing(xp, &self.mean)?;
        let s = self.base.scale().value();
        Ok(self.normalization * (2.0 * PI * Complex64::i() * pair - PI * s * w).exp())
    }
}

/// Width schedule `ε_k = ε₀ 2^{−k}`, `k = 0..levels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthSchedule {
    pub eps0: f64,
    pub levels: usize,
}

impl Default for WidthSchedule {
    fn default() -> Self {
        Self { eps0: 0.5, levels: 9 }
    }
}

impl WidthSchedule {
    pub fn widths(&self) -> Vec<f64> {
        (0..self.levels).map(|k| self.eps0 * 0.5f64.powi(k as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiracResult {
    /// `Σ F(x₀)/|det M′(x₀)|`.
    pub value: Complex64,
    /// `Σ F(x₀) sgn det M′(x₀)/|det M′(x₀)|`.
    pub signed: Complex64,
    pub widths: Vec<f64>,
    pub estimates: Vec<Complex64>,
    pub extrapolated: Vec<Complex64>,
    pub error_estimate: f64,
}

/// Number of trailing widths used in the extrapolation.
const EXTRAPOLATION_POINTS: usize = 5;

/// `∫ F Dδ(M(x))` as the limit of `∫ F(x) ε^{−d} e^{−π|M(x)|²/ε²} dx` over `ε → 0`.
///
/// `bounds` is a box that contains every zero of `M` with some margin.
pub fn dirac_integrate(
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
    m: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    bounds: &[(f64, f64)],
    schedule: WidthSchedule,
) -> Result<DiracResult> {
    let d = bounds.len();
    if d == 0 || d > 4 {
        return Err(Error::DimensionLimit { dim: d, limit: 4 });
    }
    if schedule.levels < 3 || !(schedule.eps0 > 0.0) {
        return Err(Error::InvalidArgument("need ≥ 3 widths and ε₀ > 0".into()));
    }
    if m(&bounds.iter().map(|b| 0.5 * (b.0 + b.1)).collect::<Vec<_>>()).len() != d {
        return Err(Error::InvalidArgument("M must map ℝᵈ to ℝᵈ".into()));
    }
    let widths = schedule.widths();
    let mut estimates = Vec::new();
    let mut signed_estimates = Vec::new();
    for &eps in &widths {
        let (v, s) = smeared_integral(f, m, bounds, eps)?;
        estimates.push(v);
        signed_estimates.push(s);
    }
    let k0 = widths.len().saturating_sub(EXTRAPOLATION_POINTS);
    let xs: Vec<f64> = widths[k0..].iter().map(|e| e * e).collect();
    let extrapolated = neville_to_zero(&xs, &estimates[k0..]);
    let signed = *neville_to_zero(&xs, &signed_estimates[k0..]).last().unwrap_or(&cz(0.0));
    let n = extrapolated.len();
    let value = extrapolated[n - 1];
    let error_estimate = (extrapolated[n - 1] - extrapolated[n - 2]).norm();
    let scale = value.norm().max(1.0);
    let raw_drift = (estimates[estimates.len() - 1] - estimates[estimates.len() - 2]).norm();
    if !(error_estimate <= 1e-3 * scale) || !(raw_drift <= 0.1 * scale) {
        return Err(Error::Divergence(format!(
            "Dirac limit does not stabilize: last extrapolated change {error_estimate:.3e}, raw change {raw_drift:.3e}"
        )));
    }
    Ok(DiracResult {
        value,
        signed,
        widths,
        estimates,
        extrapolated,
        error_estimate,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn jacobian(m: &(dyn Fn(&[f64]) -> Vec<f64> + Sync), x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let mut j = DMatrix::zeros(d, d);
    let mut xp = x.to_vec();
    for c in 0..d {
        let h = 1e-6 * x[c].abs().max(1.0);
        xp[c] = x[c] + h;
        let up = m(&xp);
        xp[c] = x[c] - h;
        let dn = m(&xp);
        xp[c] = x[c];
        for r in 0..d {
            j[(r, c)] = (up[r] - dn[r]) / (2.0 * h);
        }
    }
    j
}

#[derive(Clone)]
struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Cell {
    fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    fn half_diagonal(&self) -> f64 {
        0.5 * self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }

    fn side(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.lo.len();
        (0..1usize << d)
            .map(|mask| (0..d).map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] }).collect())
            .collect()
    }

    fn split(&self) -> Vec<Cell> {
        let d = self.lo.len();
        let mid = self.center();
        (0..1usize << d)
            .map(|mask| {
                let (mut lo, mut hi) = (self.lo.clone(), self.hi.clone());
                for k in 0..d {
                    if mask >> k & 1 == 1 {
                        lo[k] = mid[k];
                    } else {
                        hi[k] = mid[k];
                    }
                }
                Cell { lo, hi }
            })
            .collect()
    }
}

fn leaf_points(d: usize) -> usize {
    [12, 10, 7, 5][d - 1]
}

/// Smeared integral and its Jacobian-sign-weighted twin at width `eps`.
fn smeared_integral(
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
    m: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    bounds: &[(f64, f64)],
    eps: f64,
) -> Result<(Complex64, Complex64)> {
    let d = bounds.len();
    let split = 4usize;
    let roots: Vec<Cell> = (0..split.pow(d as u32))
        .map(|mut idx| {
            let mut lo = vec![0.0; d];
            let mut hi = vec![0.0; d];
            for k in 0..d {
                let i = idx % split;
                idx /= split;
                let w = (bounds[k].1 - bounds[k].0) / split as f64;
                lo[k] = bounds[k].0 + w * i as f64;
                hi[k] = lo[k] + w;
            }
            Cell { lo, hi }
        })
        .collect();
    let (gx, gw) = gauss_legendre(leaf_points(d));
    let parts: Vec<Result<(Complex64, Complex64)>> = roots
        .par_iter()
        .map(|root| {
            let mut stack = vec![root.clone()];
            let mut acc = Vec::new();
            let mut acc_signed = Vec::new();
            let mut cells = 0usize;
            while let Some(cell) = stack.pop() {
                cells += 1;
                if cells > 5_000_000 {
                    return Err(Error::Divergence("zero set is not isolated".into()));
                }
                let c = cell.center();
                let mc = norm(&m(&c));
                let mut lip: f64 = 0.0;
                for p in std::iter::once(c.clone()).chain(cell.corners()) {
                    lip = lip.max(jacobian(m, &p).norm());
                }
                let lip = 1.5 * lip;
                if mc - lip * cell.half_diagonal() > 6.0 * eps {
                    continue;
                }
                if cell.side() > eps / lip.max(1.0) {
                    stack.extend(cell.split());
                    continue;
                }
                let (v, s) = leaf(f, m, &cell, eps, &gx, &gw);
                acc.push(v);
                acc_signed.push(s);
            }
            Ok((compensated_sum_complex(acc), compensated_sum_complex(acc_signed)))
        })
        .collect();
    let mut total = Vec::new();
    let mut signed = Vec::new();
    for p in parts {
        let (v, s) = p?;
        total.push(v);
        signed.push(s);
    }
    Ok((compensated_sum_complex(total), compensated_sum_complex(signed)))
}

fn leaf(
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
    m: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    cell: &Cell,
    eps: f64,
    gx: &[f64],
    gw: &[f64],
) -> (Complex64, Complex64) {
    let d = cell.lo.len();
    let p = gx.len();
    let sign = lattice_logdet(&jacobian(m, &cell.center()))
        .map(|r| r.phase.cos().signum())
        .unwrap_or(0.0);
    let mut x = vec![0.0; d];
    let mut sum = Vec::with_capacity(p.pow(d as u32));
    for mut idx in 0..p.pow(d as u32) {
        let mut w = 1.0;
        for k in 0..d {
            let i = idx % p;
            idx /= p;
            let half = 0.5 * (cell.hi[k] - cell.lo[k]);
            x[k] = cell.lo[k] + half * (gx[i] + 1.0);
            w *= half * gw[i];
        }
        let r2: f64 = m(&x).iter().map(|v| v * v).sum();
        let kernel = (-PI * r2 / (eps * eps)).exp() / eps.powi(d as i32);
        if kernel > 0.0 {
            sum.push(f(&x) * (w * kernel));
        }
    }
    let v = compensated_sum_complex(sum);
    (v, v * sign)
}

/// One member of the inverse-Dirac family and its weak-limit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseDiracProfile {
    /// Variance `v` of the path-space factor `e^{−|x|²/2v}`.
    pub width: f64,
    /// Dual-space center `x′_o`.
    pub center: Vec<f64>,
    /// Per-coordinate dual variance `1/(4π²v)`, measured by quadrature.
    pub dual_variance: f64,
    /// `∫ φ_j(x′) p(x′) dx′` for each test function.
    pub test_masses: Vec<Complex64>,
    pub mass: f64,
}

impl InverseDiracProfile {
    /// `p(x′) = (2πv)^{d/2} e^{−2π²v|x′ − x′_o|²}`.
    pub fn density(&self, xp: &[f64]) -> f64 {
        profile_density(self.width, &self.center, xp)
    }
}

fn profile_density(v: f64, center: &[f64], xp: &[f64]) -> f64 {
    let d = center.len() as f64;
    let r2: f64 = xp.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
    (2.0 * PI * v).powf(0.5 * d) * (-2.0 * PI * PI * v * r2).exp()
}

/// Test function on the dual lattice.
pub type DualTest = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

/// Profiles of `∫ e^{−2πi⟨x′, x⟩} Dδ⁻¹_v(x + x_o)` along an increasing width schedule.
///
/// The shift `x_o` is carried to the dual side through the lattice pairing,
/// so the profile centers at the coefficient vector of `x_o`.
pub fn inverse_dirac_transform(x_o: &[f64], widths: &[f64], tests: &[DualTest]) -> Result<Vec<InverseDiracProfile>> {
    let d = x_o.len();
    if d == 0 || d > 3 {
        return Err(Error::DimensionLimit { dim: d, limit: 3 });
    }
    if widths.is_empty() || widths.windows(2).any(|w| !(w[1] > w[0])) || !(widths[0] > 0.0) {
        return Err(Error::InvalidArgument("widths must be positive and strictly increasing".into()));
    }
    let rule = Rule::default();
    widths
        .iter()
        .map(|&v| {
            let sd = 1.0 / (2.0 * PI * v).sqrt();
            let shifted = |u: &[f64]| -> Vec<f64> { u.iter().zip(x_o).map(|(a, b)| b + sd * a).collect() };
            // in u = (x′ − x′_o)/σ′ the profile is e^{−πu²}
            let jac = sd.powi(d as i32);
            let axes = vec![Axis::WholeLine; d];
            let mass = quad_integrate(&|u: &[f64]| cz(profile_density(v, x_o, &shifted(u)) * jac), &axes, rule)?
                .value
                .re;
            let var = quad_integrate(
                &|u: &[f64]| cz(sd * sd * u[0] * u[0] * profile_density(v, x_o, &shifted(u)) * jac),
                &axes,
                rule,
            )?
            .value
            .re
                / mass;
            let mut center = Vec::with_capacity(d);
            for k in 0..d {
                let m1 = quad_integrate(&|u: &[f64]| cz(shifted(u)[k] * profile_density(v, x_o, &shifted(u)) * jac), &axes, rule)?
                    .value
                    .re;
                center.push(m1 / mass);
            }
            let test_masses = tests
                .iter()
                .map(|phi| {
                    quad_integrate(&|u: &[f64]| phi(&shifted(u)) * (profile_density(v, x_o, &shifted(u)) * jac), &axes, rule)
                        .map(|r| r.value)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(InverseDiracProfile {
                width: v,
                center,
                dual_variance: var,
                test_masses,
                mass,
            })
        })
        .collect()
}

/// Base propagator on the covering space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseKernel {
    /// `(4πDT)^{−1/2} e^{−d²/4DT}`.
    Heat { diffusion: f64 },
}

impl BaseKernel {
    pub fn eval(&self, d: f64, t: f64) -> f64 {
        match *self {
            BaseKernel::Heat { diffusion } => {
                let q = 4.0 * diffusion * t;
                (-d * d / q).exp() / (PI * q).sqrt()
            }
        }
    }

    fn tail_bound(&self, n: usize, period: f64, t: f64) -> f64 {
        match *self {
            BaseKernel::Heat { diffusion } => {
                let q = 4.0 * diffusion * t;
                let a = (n as f64 + 0.5) * period;
                let ratio = (-(n as f64 + 1.0) * period * period * 2.0 / q).exp();
                2.0 * (-a * a / q).exp() / (PI * q).sqrt() / (1.0 - ratio)
            }
        }
    }
}

/// Image count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Smallest `N` with tail bound below `tol`.
    Auto { tol: f64 },
    Fixed(usize),
}

/// `K(x, y; T) = Σ_{|n| ≤ N} e^{inφ} K_base(x − y + nL; T)`.
///
/// The holonomy is the U(1) character `n ↦ e^{inφ}`; `φ = 0` is the trivial
/// one, `φ = π` gives antiperiodic weights and `φ = 2πm/k` a ℤ_k character.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSumSpec {
    pub period: f64,
    pub base: BaseKernel,
    pub holonomy: f64,
    pub truncation: Truncation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSum {
    pub value: Complex64,
    pub images: usize,
    pub tail_bound: f64,
}

pub const MAX_IMAGES: usize = 100_000;

impl ImageSumSpec {
    pub fn heat(period: f64, holonomy: f64) -> Self {
        Self {
            period,
            base: BaseKernel::Heat { diffusion: 1.0 },
            holonomy,
            truncation: Truncation::Auto { tol: 1e-12 },
        }
    }

    /// Character weight of the `n`-th image.
    pub fn weight(&self, n: i64) -> Complex64 {
        Complex64::from_polar(1.0, n as f64 * self.holonomy)
    }
}

pub fn image_sum_propagator(spec: &ImageSumSpec, x_start: f64, x_end: f64, t: f64) -> Result<ImageSum> {
    let l = spec.period;
    if !(l > 0.0 && t > 0.0) {
        return Err(Error::InvalidArgument("need L > 0 and T > 0".into()));
    }
    let d = x_start - x_end;
    let n0 = (d / l).round();
    let dr = d - n0 * l;
    let (images, tail) = match spec.truncation {
        Truncation::Fixed(n) => (n, spec.base.tail_bound(n, l, t)),
        Truncation::Auto { tol } => {
            let mut n = 0;
            while spec.base.tail_bound(n, l, t) >= tol {
                n += 1;
                if n > MAX_IMAGES {
                    return Err(Error::Truncation { bound: spec.base.tail_bound(n, l, t), tol });
                }
            }
            (n, spec.base.tail_bound(n, l, t))
        }
    };
    let n = images as i64;
    let terms = (-n..=n).map(|m| spec.weight(m) * spec.base.eval(dr + m as f64 * l, t));
    // shifting the summation index by n₀ multiplies every term by e^{−in₀φ}
    let value = spec.weight(-(n0 as i64)) * compensated_sum_complex(terms);
    Ok(ImageSum {
        value,
        images,
        tail_bound: tail,
    })
}

/// Heat kernel on the circle from its eigenfunctions `e^{ik_m(x−y)}/L`, `k_m = (2πm − φ)/L`.
pub fn heat_eigen_expansion(period: f64, holonomy: f64, x_start: f64, x_end: f64, t: f64) -> Complex64 {
    let d = x_start - x_end;
    let mut terms = Vec::new();
    let mut m = 0i64;
    loop {
        let mut small = true;
        for s in if m == 0 { vec![0] } else { vec![m, -m] } {
            let k = (2.0 * PI * s as f64 - holonomy) / period;
            let w = (-k * k * t).exp();
            if w > 1e-18 {
                small = false;
            }
            terms.push(Complex64::from_polar(w / period, k * d));
        }
        if small && m > 0 {
            break;
        }
        m += 1;
    }
    compensated_sum_complex(terms)
}

/// `∫₀^L K(x, y; T₁) K(y, z; T₂) dy − K(x, z; T₁ + T₂)`.
pub fn chapman_kolmogorov_residual(spec: &ImageSumSpec, x: f64, z: f64, t1: f64, t2: f64) -> Result<Complex64> {
    let mut f = |y: f64| -> Result<Complex64> {
        Ok(image_sum_propagator(spec, x, y, t1)?.value * image_sum_propagator(spec, y, z, t2)?.value)
    };
    let lhs = adaptive_kronrod(&mut f, 0.0, spec.period, 1e-13)?.value;
    Ok(lhs - image_sum_propagator(spec, x, z, t1 + t2)?.value)
}

/// CSV of the wrapped propagator over `(x_end, T)`.
pub fn image_sum_csv(spec: &ImageSumSpec, x_start: f64, ends: &[f64], times: &[f64]) -> Result<String> {
    let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x_end", "t", "re", "im", "images", "tail_bound"]).map_err(io)?;
    for &t in times {
        for &x in ends {
            let r = image_sum_propagator(spec, x_start, x, t)?;
            w.write_record([
                format!("{x:.16e}"),
                format!("{t:.16e}"),
                format!("{:.16e}", r.value.re),
                format!("{:.16e}", r.value.im),
                r.images.to_string(),
                format!("{:.16e}", r.tail_bound),
            ])
            .map_err(io)?;
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?)
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}
