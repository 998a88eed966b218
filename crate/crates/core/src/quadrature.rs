//! Deterministic quadrature over low-dimensional boxes and half-lines.
//!
//! Tensor products of one-dimensional rules. Every other module reaches for
//! these when it needs a brute-force value to compare a closed form against,
//! so the rules here never use any structure of the integrand.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{compensated_sum_complex, CompensatedSum};

/// Default limit on the number of tensor axes.
pub const DEFAULT_MAX_DIM: usize = 6;

/// Integration domain along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    Interval(f64, f64),
    /// `[a, ∞)`
    HalfLine(f64),
    WholeLine,
}

impl Axis {
    pub fn lower(&self) -> f64 {
        match *self {
            Axis::Interval(a, _) | Axis::HalfLine(a) => a,
            Axis::WholeLine => f64::NEG_INFINITY,
        }
    }
}

/// One-dimensional rule applied along every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// tanh-sinh / exp-sinh / sinh-sinh with step `2^-level`.
    DoubleExponential { level: u32 },
    /// Composite Gauss–Legendre; infinite axes are mapped algebraically onto finite ones.
    GaussLegendre { points: usize, panels: usize },
    /// Gauss–Hermite for the whole line; the `e^{-x²}` weight is divided out of the integrand.
    GaussHermite { points: usize },
}

impl Default for Rule {
    fn default() -> Self {
        Rule::DoubleExponential { level: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    /// Difference between this rule and the next coarser one.
    pub error: f64,
    pub evaluations: usize,
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Nodes and weights of the `n`-point Gauss–Hermite rule for the weight `e^{-x²}`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-14 * (1.0 + z.abs()) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    (x, w)
}

type Nodes1d = (Vec<f64>, Vec<f64>);

fn double_exponential_nodes(axis: Axis, level: u32) -> Nodes1d {
    use std::f64::consts::FRAC_PI_2;
    let h = 0.5f64.powi(level as i32);
    let (t_lo, t_hi) = match axis {
        Axis::Interval(..) => (-4.5, 4.5),
        Axis::HalfLine(_) => (-6.0, 3.5),
        Axis::WholeLine => (-4.0, 4.0),
    };
    let k_lo = (t_lo / h).ceil() as i64;
    let k_hi = (t_hi / h).floor() as i64;
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for k in k_lo..=k_hi {
        let t = k as f64 * h;
        let (x, w) = match axis {
            Axis::Interval(a, b) => {
                let u = FRAC_PI_2 * t.sinh();
                let du = FRAC_PI_2 * t.cosh();
                let x = if t < 0.0 {
                    a + (b - a) / (1.0 + (-2.0 * u).exp())
                } else {
                    b - (b - a) / (1.0 + (2.0 * u).exp())
                };
                let w = (b - a) * du / (2.0 * u.cosh().powi(2));
                (x, w)
            }
            Axis::HalfLine(a) => {
                let e = (FRAC_PI_2 * t.sinh()).exp();
                (a + e, FRAC_PI_2 * t.cosh() * e)
            }
            Axis::WholeLine => {
                let u = FRAC_PI_2 * t.sinh();
                (u.sinh(), FRAC_PI_2 * t.cosh() * u.cosh())
            }
        };
        let on_edge = match axis {
            Axis::Interval(a, b) => x <= a || x >= b,
            Axis::HalfLine(a) => x <= a,
            Axis::WholeLine => false,
        };
        if !on_edge && w > 0.0 && w.is_finite() && x.is_finite() {
            xs.push(x);
            ws.push(w * h);
        }
    }
    (xs, ws)
}

fn gauss_legendre_nodes(axis: Axis, points: usize, panels: usize) -> Nodes1d {
    let (gx, gw) = gauss_legendre(points);
    // Work in a finite parameter interval, then map.
    let (lo, hi) = match axis {
        Axis::Interval(a, b) => (a, b),
        Axis::HalfLine(_) => (0.0, 1.0),
        Axis::WholeLine => (-1.0, 1.0),
    };
    let width = (hi - lo) / panels as f64;
    let mut xs = Vec::with_capacity(points * panels);
    let mut ws = Vec::with_capacity(points * panels);
    for p in 0..panels {
        let c = lo + (p as f64 + 0.5) * width;
        for (z, w) in gx.iter().zip(&gw) {
            let t = c + 0.5 * width * z;
            let wt = 0.5 * width * w;
            let (x, jac) = match axis {
                Axis::Interval(..) => (t, 1.0),
                Axis::HalfLine(a) => (a + t / (1.0 - t), 1.0 / ((1.0 - t) * (1.0 - t))),
                Axis::WholeLine => {
                    let d = 1.0 - t * t;
                    (t / d, (1.0 + t * t) / (d * d))
                }
            };
            xs.push(x);
            ws.push(wt * jac);
        }
    }
    (xs, ws)
}

fn gauss_hermite_nodes(axis: Axis, points: usize) -> Result<Nodes1d> {
    if axis != Axis::WholeLine {
        return Err(Error::Unsupported(
            "Gauss–Hermite rules apply to the whole line only".into(),
        ));
    }
    let (x, w) = gauss_hermite(points);
    let w = x.iter().zip(&w).map(|(x, w)| w * (x * x).exp()).collect();
    Ok((x, w))
}

fn nodes_for(axis: Axis, rule: Rule) -> Result<Nodes1d> {
    if let Axis::Interval(a, b) = axis {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidArgument(format!("bad interval [{a}, {b}]")));
        }
    }
    match rule {
        Rule::DoubleExponential { level } => Ok(double_exponential_nodes(axis, level)),
        Rule::GaussLegendre { points, panels } => {
            if points == 0 || panels == 0 {
                return Err(Error::InvalidArgument("empty Gauss–Legendre rule".into()));
            }
            Ok(gauss_legendre_nodes(axis, points, panels))
        }
        Rule::GaussHermite { points } => gauss_hermite_nodes(axis, points),
    }
}

fn coarser(rule: Rule) -> Rule {
    match rule {
        Rule::DoubleExponential { level } => Rule::DoubleExponential {
            level: level.saturating_sub(1),
        },
        Rule::GaussLegendre { points, panels } if panels > 1 => Rule::GaussLegendre {
            points,
            panels: panels / 2,
        },
        Rule::GaussLegendre { points, panels } => Rule::GaussLegendre {
            points: (3 * points / 4).max(1),
            panels,
        },
        Rule::GaussHermite { points } => Rule::GaussHermite {
            points: (3 * points / 4).max(1),
        },
    }
}

/// Sum `Σ Π w · f(x)` over the tensor grid.
///
/// The outermost axis is split across threads; partial sums are combined in
/// index order, so the result does not depend on scheduling.
pub fn tensor_sum(
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
    grids: &[Nodes1d],
) -> Result<(Complex64, usize)> {
    let dim = grids.len();
    if dim == 0 {
        return Ok((f(&[]), 1));
    }
    let inner: usize = grids[1..].iter().map(|g| g.0.len()).product();
    let partials: Vec<Result<Complex64>> = (0..grids[0].0.len())
        .into_par_iter()
        .map(|i0| {
            let mut x = vec![0.0; dim];
            let mut idx = vec![0usize; dim];
            x[0] = grids[0].0[i0];
            let w0 = grids[0].1[i0];
            let mut acc = CompensatedSum::<Complex64>::default();
            for _ in 0..inner {
                let mut w = w0;
                for d in 1..dim {
                    x[d] = grids[d].0[idx[d]];
                    w *= grids[d].1[idx[d]];
                }
                let v = f(&x);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFinite { at: x.clone() });
                }
                acc.add(v * w);
                for d in (1..dim).rev() {
                    idx[d] += 1;
                    if idx[d] < grids[d].0.len() {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            Ok(acc.total())
        })
        .collect();
    let mut values = Vec::with_capacity(partials.len());
    for p in partials {
        values.push(p?);
    }
    Ok((compensated_sum_complex(values), grids[0].0.len() * inner))
}

/// Integrate `f` over the product of `axes` with the default dimension limit.
pub fn quad_integrate(
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
    axes: &[Axis],
    rule: Rule,
) -> Result<QuadResult> {
    quad_integrate_limited(f, axes, rule, DEFAULT_MAX_DIM)
}

pub fn quad_integrate_limited(
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
    axes: &[Axis],
    rule: Rule,
    max_dim: usize,
) -> Result<QuadResult> {
    if axes.len() > max_dim {
        return Err(Error::DimensionLimit {
            dim: axes.len(),
            limit: max_dim,
        });
    }
    let fine: Vec<Nodes1d> = axes.iter().map(|&a| nodes_for(a, rule)).collect::<Result<_>>()?;
    let coarse: Vec<Nodes1d> = axes
        .iter()
        .map(|&a| nodes_for(a, coarser(rule)))
        .collect::<Result<_>>()?;
    let (value, n1) = tensor_sum(f, &fine)?;
    let (rough, n2) = tensor_sum(f, &coarse)?;
    Ok(QuadResult {
        value,
        error: (value - rough).norm(),
        evaluations: n1 + n2,
    })
}

/// Real-valued convenience wrapper around [`quad_integrate`].
pub fn quad_real(f: impl Fn(&[f64]) -> f64 + Sync, axes: &[Axis], rule: Rule) -> Result<f64> {
    let g = move |x: &[f64]| Complex64::new(f(x), 0.0);
    Ok(quad_integrate(&g, axes, rule)?.value.re)
}

const KRONROD_X: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const GAUSS7_W: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod15(f: &mut dyn FnMut(f64) -> Result<Complex64>, a: f64, b: f64) -> Result<(Complex64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * KRONROD_W[7];
    let mut g = fc * GAUSS7_W[3];
    for j in 0..7 {
        let dx = h * KRONROD_X[j];
        let s = f(c - dx)? + f(c + dx)?;
        k += s * KRONROD_W[j];
        if j % 2 == 1 {
            g += s * GAUSS7_W[j / 2];
        }
    }
    Ok((k * h, ((k - g) * h).norm()))
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on `[a, b]`.
pub fn adaptive_kronrod(
    f: &mut dyn FnMut(f64) -> Result<Complex64>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadResult> {
    let panels = 8;
    let mut stack: Vec<(f64, f64, u32)> = (0..panels)
        .rev()
        .map(|i| {
            let lo = a + (b - a) * i as f64 / panels as f64;
            let hi = if i + 1 == panels { b } else { a + (b - a) * (i + 1) as f64 / panels as f64 };
            (lo, hi, 0)
        })
        .collect();
    let mut total = CompensatedSum::<Complex64>::default();
    let mut err = 0.0;
    let mut evals = 0;
    let width = b - a;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = kronrod15(f, lo, hi)?;
        evals += 15;
        let local_tol = tol * (hi - lo) / width;
        if e <= local_tol.max(1e-15 * v.norm()) || depth >= 40 {
            total.add(v);
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(QuadResult {
        value: total.total(),
        error: err,
        evaluations: evals,
    })
}

/// Iterated adaptive quadrature over the box `[lo, hi]`.
pub fn adaptive_box(
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
    lo: &[f64],
    hi: &[f64],
    tol: f64,
) -> Result<QuadResult> {
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(Error::InvalidArgument("box bounds must match and be non-empty".into()));
    }
    let mut x = vec![0.0; lo.len()];
    let mut evals = 0usize;
    let value = adaptive_level(f, lo, hi, tol, 0, &mut x, &mut evals)?;
    Ok(QuadResult {
        value,
        error: tol,
        evaluations: evals,
    })
}

fn adaptive_level(
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    d: usize,
    x: &mut Vec<f64>,
    evals: &mut usize,
) -> Result<Complex64> {
    let last = d + 1 == lo.len();
    let mut g = |t: f64| -> Result<Complex64> {
        x[d] = t;
        if last {
            *evals += 1;
            let v = f(x);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite { at: x.clone() });
            }
            Ok(v)
        } else {
            let mut inner = x.clone();
            adaptive_level(f, lo, hi, tol, d + 1, &mut inner, evals)
        }
    };
    Ok(adaptive_kronrod(&mut g, lo[d], hi[d], tol)?.value)
}

/// Chebyshev–Lobatto points on `[a, b]` with spectral cumulative integration.
#[derive(Debug, Clone)]
pub struct ChebyshevGrid {
    a: f64,
    b: f64,
    /// Nodes in increasing order.
    nodes: Vec<f64>,
}

impl ChebyshevGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 3 || b <= a {
            return Err(Error::InvalidArgument("Chebyshev grid needs n ≥ 3 and b > a".into()));
        }
        let m = (n - 1) as f64;
        let nodes = (0..n)
            .map(|j| {
                let x = -(std::f64::consts::PI * j as f64 / m).cos();
                0.5 * (a + b) + 0.5 * (b - a) * x
            })
            .collect();
        Ok(Self { a, b, nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Given samples at the nodes, return `F(t) = ∫_t^b f(s) ds` at the nodes.
    pub fn integrate_from_right(&self, values: &[Complex64]) -> Vec<Complex64> {
        let left = self.integrate_from_left(values);
        let total = left[left.len() - 1];
        left.iter().map(|v| total - v).collect()
    }

    /// Given samples at the nodes, return `F(t) = ∫_a^t f(s) ds` at the nodes.
    pub fn integrate_from_left(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.nodes.len();
        let m = n - 1;
        let pi = std::f64::consts::PI;
        // Nodes are x_j = -cos(jπ/m); reflect so that y_j = cos(jπ/m) carries f(-y).
        let mut b = vec![Complex64::new(0.0, 0.0); m + 3];
        for (k, bk) in b.iter_mut().enumerate().take(m + 1) {
            let mut acc = CompensatedSum::<Complex64>::default();
            for (j, v) in values.iter().enumerate() {
                let half = if j == 0 || j == m { 0.5 } else { 1.0 };
                acc.add(v * (half * (pi * (j * k) as f64 / m as f64).cos()));
            }
            let mut c = acc.total() * (2.0 / m as f64);
            if k == 0 || k == m {
                c *= 0.5;
            }
            *bk = c;
        }
        // b are coefficients of g(y) = f(-y) in T_k(y); f(x) = Σ b_k (-1)^k T_k(x).
        let coef: Vec<Complex64> = b
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 1 { -c } else { *c })
            .collect();
        let mut big = vec![Complex64::new(0.0, 0.0); m + 2];
        big[1] = coef[0] - coef[2] * 0.5;
        for k in 2..=m + 1 {
            big[k] = (coef[k - 1] - coef[k + 1]) / (2.0 * k as f64);
        }
        let half = 0.5 * (self.b - self.a);
        let eval = |x: f64| -> Complex64 {
            let theta = x.clamp(-1.0, 1.0).acos();
            let mut acc = CompensatedSum::<Complex64>::default();
            for (k, c) in big.iter().enumerate().skip(1) {
                acc.add(c * (k as f64 * theta).cos());
            }
            acc.total()
        };
        let base = eval(-1.0);
        self.nodes
            .iter()
            .map(|&t| {
                let x = (2.0 * t - self.a - self.b) / (self.b - self.a);
                (eval(x) - base) * half
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite(20);
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((m0 - PI.sqrt()).abs() < 1e-13);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_on_the_line() {
        let f = |x: &[f64]| c((-PI * x[0] * x[0]).exp());
        for rule in [
            Rule::default(),
            Rule::GaussLegendre { points: 20, panels: 8 },
            Rule::GaussHermite { points: 40 },
        ] {
            let r = quad_integrate(&f, &[Axis::WholeLine], rule).unwrap();
            assert!((r.value.re - 1.0).abs() < 1e-10, "{rule:?}: {}", r.value);
        }
    }

    #[test]
    fn gamma_integrand_on_half_line() {
        let f = |x: &[f64]| c((-3.0 * x[0]).exp() * x[0]);
        let r = quad_integrate(&f, &[Axis::HalfLine(0.0)], Rule::default()).unwrap();
        assert!((r.value.re - 1.0 / 9.0).abs() < 1e-10);
        assert!(r.error < 1e-8);
    }

    #[test]
    fn unit_square() {
        let f = |_: &[f64]| c(1.0);
        let r = quad_integrate(&f, &[Axis::Interval(0.0, 1.0); 2], Rule::default()).unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-13);
    }

    #[test]
    fn dimension_limit() {
        let f = |_: &[f64]| c(1.0);
        let err = quad_integrate(&f, &[Axis::Interval(0.0, 1.0); 7], Rule::default()).unwrap_err();
        assert_eq!(err, Error::DimensionLimit { dim: 7, limit: 6 });
    }

    #[test]
    fn non_finite_samples_are_reported() {
        let f = |x: &[f64]| c(1.0 / (x[0] - 0.5));
        let rule = Rule::GaussLegendre { points: 1, panels: 1 };
        assert!(matches!(
            quad_integrate(&f, &[Axis::Interval(0.0, 1.0)], rule),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn kronrod_handles_peaks() {
        let eps = 0.05;
        let f = |x: &[f64]| c((-PI * (x[0] - 0.3).powi(2) / (eps * eps)).exp() / eps);
        let r = adaptive_box(&f, &[-1.0], &[1.0], 1e-12).unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn chebyshev_cumulative_integral() {
        let g = ChebyshevGrid::new(0.0, 2.0, 33).unwrap();
        let vals: Vec<Complex64> = g.nodes().iter().map(|t| c(t.cos())).collect();
        let right = g.integrate_from_right(&vals);
        for (t, v) in g.nodes().iter().zip(&right) {
            assert!((v.re - (2.0f64.sin() - t.sin())).abs() < 1e-14);
        }
    }
}
