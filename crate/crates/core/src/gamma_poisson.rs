//! Gamma and Poisson integrator families.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::determinants::lattice_logdet_complex;
use crate::error::{Error, Result};
use crate::lattice::{pairing, DualPath, Path};
use crate::quadrature::{adaptive_kronrod, ChebyshevGrid};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest `|c|` summed by the series before switching to the continued fraction.
pub const SERIES_LIMIT: f64 = 50.0;
const MAX_TERMS: usize = 10_000;

fn cz(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// `log Γ(z)` on the principal branch, via Lanczos with reflection.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    let pi = std::f64::consts::PI;
    if z.re < 0.5 {
        // Γ(z)Γ(1 − z) = π / sin(πz)
        return cz(pi.ln()) - (pi * z).sin().ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = cz(LANCZOS[0]);
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    cz(0.5 * (2.0 * pi).ln()) + (z + 0.5) * t.ln() - t + x.ln()
}

/// `Γ(z)`; errors at the poles `0, −1, −2, …`.
pub fn gamma(z: Complex64) -> Result<Complex64> {
    if is_pole(z) {
        return Err(Error::GammaPole(z.re));
    }
    if z.im == 0.0 && z.re > 0.0 && z.re == z.re.round() && z.re <= 21.0 {
        return Ok(cz((1..z.re as u64).map(|k| k as f64).product()));
    }
    Ok(ln_gamma(z).exp())
}

/// `τ^α = e^{α log τ}` pointwise on the principal branch.
pub fn tau_power(tau: &Path<Complex64>, alpha: Complex64) -> Result<Path<Complex64>> {
    if let Some(t) = tau.values().iter().find(|t| t.im == 0.0 && t.re <= 0.0) {
        return Err(Error::BranchCut(format!("τ = {t} lies on the cut")));
    }
    Ok(tau.map(|t| if alpha == cz(0.0) { cz(1.0) } else { (alpha * t.ln()).exp() }))
}

/// `Σ_n c^n / (α)_{n+1}`, the series part of `γ(α, c) = c^α e^{−c} Σ`.
fn lower_series(alpha: Complex64, c: Complex64) -> Result<Complex64> {
    let mut term = 1.0 / alpha;
    let mut sum = term;
    for n in 1..MAX_TERMS {
        term *= c / (alpha + n as f64);
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_TERMS,
        residual: term.norm(),
    })
}

/// `Γ(α, c)` by the Legendre continued fraction (modified Lentz).
pub fn upper_gamma_continued_fraction(alpha: Complex64, c: Complex64) -> Result<Complex64> {
    let tiny = 1e-300;
    let mut b = c + 1.0 - alpha;
    let mut cc = cz(1.0 / tiny);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (cz(i as f64) - alpha);
        b += 2.0;
        d = an * d + b;
        if d.norm() < tiny {
            d = cz(tiny);
        }
        cc = b + an / cc;
        if cc.norm() < tiny {
            cc = cz(tiny);
        }
        d = 1.0 / d;
        let del = d * cc;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            return Ok((alpha * c.ln() - c).exp() * h);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_TERMS,
        residual: f64::NAN,
    })
}

/// `γ(α, c) = ∫₀^c t^{α−1} e^{−t} dt`.
pub fn lower_incomplete_gamma(alpha: Complex64, c: Complex64) -> Result<Complex64> {
    if is_pole(alpha) {
        return Err(Error::GammaPole(alpha.re));
    }
    if c == cz(0.0) {
        return Ok(cz(0.0));
    }
    if c.norm() > SERIES_LIMIT && c.re > 0.0 {
        return Ok(gamma(alpha)? - upper_gamma_continued_fraction(alpha, c)?);
    }
    Ok((alpha * c.ln() - c).exp() * lower_series(alpha, c)?)
}

/// `Γ(α, c) = Γ(α) − γ(α, c)`.
pub fn upper_incomplete_gamma(alpha: Complex64, c: Complex64) -> Result<Complex64> {
    if is_pole(alpha) {
        return Err(Error::GammaPole(alpha.re));
    }
    if c.norm() > SERIES_LIMIT && c.re > 0.0 {
        return upper_gamma_continued_fraction(alpha, c);
    }
    Ok(gamma(alpha)? - lower_incomplete_gamma(alpha, c)?)
}

/// `P(n, c) = γ(n, c)/Γ(n)`, with `P(0, c) = 1`.
pub fn regularized_p(n: u32, c: Complex64) -> Result<Complex64> {
    if n == 0 {
        return Ok(cz(1.0));
    }
    let a = cz(n as f64);
    Ok(lower_incomplete_gamma(a, c)? / gamma(a)?)
}

/// `Pr(N ≥ n)` for `N ~ Poisson(c)` by direct summation.
pub fn poisson_tail(n: u32, c: f64) -> Result<f64> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("Poisson mean {c} must be finite and ≥ 0")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    let mut k = n as f64;
    let mut term = (-c + k * c.ln() - ln_gamma(cz(k + 1.0)).re).exp();
    let mut sum = crate::numerics::CompensatedSum::<f64>::default();
    loop {
        sum.add(term);
        k += 1.0;
        term *= c / k;
        // once k > c the remaining terms are dominated by a geometric series
        let ratio = c / (k + 1.0);
        if k > c && term / (1.0 - ratio) < 1e-17 * sum.total() {
            break;
        }
        if term == 0.0 {
            break;
        }
    }
    Ok(sum.total())
}

/// Lattice representation of a dual operator `β′`.
#[derive(Debug, Clone, PartialEq)]
pub enum DualOperator {
    /// `λ·Id′` on `dim` lattice sites.
    ScaledIdentity { lambda: Complex64, dim: usize },
    Diagonal(Vec<Complex64>),
    /// Dense `k × k` action, `k ≤ 64`.
    Dense(DMatrix<Complex64>),
}

pub const DENSE_LIMIT: usize = 64;

impl DualOperator {
    pub fn dim(&self) -> usize {
        match self {
            DualOperator::ScaledIdentity { dim, .. } => *dim,
            DualOperator::Diagonal(d) => d.len(),
            DualOperator::Dense(m) => m.nrows(),
        }
    }

    pub fn scaled(&self, a: f64) -> DualOperator {
        match self {
            DualOperator::ScaledIdentity { lambda, dim } => DualOperator::ScaledIdentity {
                lambda: lambda * a,
                dim: *dim,
            },
            DualOperator::Diagonal(d) => DualOperator::Diagonal(d.iter().map(|x| x * a).collect()),
            DualOperator::Dense(m) => DualOperator::Dense(m * cz(a)),
        }
    }

    /// `log Det(β′ − iτ′)` with `τ′` acting diagonally; an empty `taup` means zero.
    ///
    /// Diagonal forms sum principal logs, so the phase is continuous in `τ′`.
    pub fn log_det_shifted(&self, taup: &[f64]) -> Result<Complex64> {
        let k = self.dim();
        if k == 0 {
            return Err(Error::InvalidArgument("dual operator has no sites".into()));
        }
        if !taup.is_empty() && taup.len() != k {
            return Err(Error::InvalidArgument(format!("τ′ needs {k} entries, got {}", taup.len())));
        }
        let t = |j: usize| if taup.is_empty() { 0.0 } else { taup[j] };
        let diag_log = |d: &mut dyn Iterator<Item = Complex64>| -> Result<Complex64> {
            let mut acc = cz(0.0);
            for v in d {
                if v.norm() < 1e-300 {
                    return Err(Error::Vanishing("Det(β′ − iτ′)"));
                }
                acc += v.ln();
            }
            Ok(acc)
        };
        match self {
            DualOperator::ScaledIdentity { lambda, .. } => {
                diag_log(&mut (0..k).map(|j| lambda - Complex64::i() * t(j)))
            }
            DualOperator::Diagonal(d) => diag_log(&mut d.iter().enumerate().map(|(j, b)| b - Complex64::i() * t(j))),
            DualOperator::Dense(m) => {
                if k > DENSE_LIMIT {
                    return Err(Error::DimensionLimit { dim: k, limit: DENSE_LIMIT });
                }
                let mut a = m.clone();
                for j in 0..k {
                    a[(j, j)] -= Complex64::i() * t(j);
                }
                let det = lattice_logdet_complex(&a).map_err(|e| match e {
                    Error::Singular { .. } => Error::Vanishing("Det(β′ − iτ′)"),
                    other => other,
                })?;
                Ok(Complex64::new(det.log_magnitude, det.phase))
            }
        }
    }
}

/// Cutoff `c` on `⟨β′, τ⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    Infinite,
    At(Complex64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSpec {
    pub alpha: Complex64,
    pub beta: DualOperator,
    pub cutoff: Cutoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSpec {
    pub n: u32,
    pub beta: DualOperator,
    pub cutoff: Cutoff,
}

fn cutoff_factor(alpha: Complex64, cutoff: Cutoff) -> Result<Complex64> {
    match cutoff {
        Cutoff::Infinite => Ok(cz(1.0)),
        Cutoff::At(c) => {
            if c.re < 0.0 {
                return Err(Error::Domain(format!("cutoff {c} must have Re c ≥ 0")));
            }
            Ok(lower_incomplete_gamma(alpha, c)? / gamma(alpha)?)
        }
    }
}

/// `Z_{α,β′}(τ′) = P(α, c) · Det(β′ − iτ′)^{−α}`; `P = 1` when `c = ∞`.
pub fn gamma_z(spec: &GammaSpec, taup: &[f64]) -> Result<Complex64> {
    if spec.alpha == cz(0.0) {
        return Ok(cz(1.0));
    }
    let log_det = spec.beta.log_det_shifted(taup)?;
    Ok(cutoff_factor(spec.alpha, spec.cutoff)? * (-spec.alpha * log_det).exp())
}

/// `Z_{n,β′,c}(τ′) = P(n, c) / Det(β′ − iτ′)^n`.
pub fn poisson_z(spec: &PoissonSpec, taup: &[f64]) -> Result<Complex64> {
    if spec.n == 0 {
        return Ok(cz(1.0));
    }
    let log_det = spec.beta.log_det_shifted(taup)?;
    let p = match spec.cutoff {
        Cutoff::Infinite => cz(1.0),
        Cutoff::At(c) => regularized_p(spec.n, c)?,
    };
    Ok(p * (-(spec.n as f64) * log_det).exp())
}

/// `⟨β′⟩_{τ₀} = e^{⟨β′, τ₀⟩}`.
pub fn shifted_poisson_expectation(beta: &DualPath, tau0: &Path<Complex64>) -> Result<Complex64> {
    Ok(pairing(beta, tau0)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesResult {
    pub value: Complex64,
    /// `|∫β|^{order+1}/(order+1)!`
    pub bound: f64,
}

/// Partial sum of `Σ_n ∫_{t_a ≤ t₁ < … < t_n ≤ t_b} Π iβ(t_k) dt`.
pub fn time_ordered_series(beta: &dyn Fn(f64) -> f64, t_a: f64, t_b: f64, order: usize) -> Result<SeriesResult> {
    let grid = ChebyshevGrid::new(t_a, t_b, 48)?;
    let ib: Vec<Complex64> = grid.nodes().iter().map(|&t| Complex64::new(0.0, beta(t))).collect();
    let mut f = vec![cz(1.0); ib.len()];
    let mut value = cz(1.0);
    let mut abs_int = 0.0;
    for k in 1..=order {
        let integrand: Vec<Complex64> = f.iter().zip(&ib).map(|(a, b)| a * b).collect();
        f = grid.integrate_from_left(&integrand);
        if k == 1 {
            abs_int = f[f.len() - 1].norm();
        }
        value += f[f.len() - 1];
    }
    if order == 0 {
        let integrand: Vec<Complex64> = ib.clone();
        abs_int = grid.integrate_from_left(&integrand).last().map_or(0.0, |v| v.norm());
    }
    let bound = ((order as f64 + 1.0) * abs_int.ln() - ln_gamma(cz(order as f64 + 2.0)).re).exp();
    Ok(SeriesResult { value, bound })
}

/// `e^{i∫_{t_a}^{t} β}` with the integral done adaptively.
pub fn evolution_value(beta: &dyn Fn(f64) -> f64, t_a: f64, t: f64) -> Result<Complex64> {
    if t == t_a {
        return Ok(cz(1.0));
    }
    let (lo, hi, sign) = if t > t_a { (t_a, t, 1.0) } else { (t, t_a, -1.0) };
    let r = adaptive_kronrod(&mut |s| Ok(cz(beta(s))), lo, hi, 1e-14)?;
    Ok(Complex64::new(0.0, sign * r.value.re).exp())
}

/// Central difference of `⟨β′⟩` in `t_b` minus `iβ(t_b)⟨β′⟩`.
pub fn evolution_derivative_check(beta: &dyn Fn(f64) -> f64, t_a: f64, t_b: f64, h: f64) -> Result<Complex64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let plus = evolution_value(beta, t_a, t_b + h)?;
    let minus = evolution_value(beta, t_a, t_b - h)?;
    let value = evolution_value(beta, t_a, t_b)?;
    Ok((plus - minus) / (2.0 * h) - Complex64::new(0.0, beta(t_b)) * value)
}

/// CSV table of `γ`, `Γ(·, c)` and `P` over a parameter grid.
pub fn special_function_csv(alphas: &[f64], cs: &[f64]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
    w.write_record(["alpha", "c", "lower", "upper", "regularized"]).map_err(io)?;
    for &a in alphas {
        for &c in cs {
            let lo = lower_incomplete_gamma(cz(a), cz(c))?;
            let up = upper_incomplete_gamma(cz(a), cz(c))?;
            let p = lo / gamma(cz(a))?;
            w.write_record([
                format!("{a:.16e}"),
                format!("{c:.16e}"),
                format!("{:.16e}", lo.re),
                format!("{:.16e}", up.re),
                format!("{:.16e}", p.re),
            ])
            .map_err(io)?;
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?)
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;
    use crate::quadrature::{quad_integrate, Axis, Rule};

    const E: f64 = std::f64::consts::E;

    #[test]
    fn gamma_values() {
        assert!((gamma(cz(0.5)).unwrap().re - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert_eq!(gamma(cz(5.0)).unwrap().re, 24.0);
        assert!(matches!(gamma(cz(-2.0)), Err(Error::GammaPole(_))));
        let g = gamma(Complex64::new(1.0, 1.0)).unwrap();
        assert!((g - Complex64::new(0.498_015_668_118_356, -0.154_949_828_301_810_7)).norm() < 1e-13);
    }

    #[test]
    fn tau_power_branch() {
        let g = make_grid(0.0, 1.0, 3).unwrap();
        let one = Path::constant(&g, cz(4.0));
        assert!((tau_power(&one, cz(0.5)).unwrap().scalar(1) - 2.0).norm() < 1e-15);
        let i = Path::constant(&g, Complex64::i());
        assert!((tau_power(&i, cz(2.0)).unwrap().scalar(0) + 1.0).norm() < 1e-15);
        let cut = Path::constant(&g, cz(-1.0));
        assert!(matches!(tau_power(&cut, cz(0.5)), Err(Error::BranchCut(_))));
    }

    #[test]
    fn incomplete_gamma_examples() {
        let c = 0.7;
        assert!((lower_incomplete_gamma(cz(1.0), cz(c)).unwrap().re - (1.0 - (-c).exp())).abs() < 1e-15);
        assert_eq!(lower_incomplete_gamma(cz(3.3), cz(0.0)).unwrap(), cz(0.0));
        assert!((lower_incomplete_gamma(cz(2.0), cz(1.0)).unwrap().re - (1.0 - 2.0 / E)).abs() < 1e-15);
        assert!((upper_incomplete_gamma(cz(2.0), cz(1.0)).unwrap().re - 2.0 / E).abs() < 1e-15);
        assert!((upper_incomplete_gamma(cz(1.0), cz(c)).unwrap().re - (-c).exp()).abs() < 1e-15);
        assert!((upper_incomplete_gamma(cz(3.5), cz(0.0)).unwrap() - gamma(cz(3.5)).unwrap()).norm() < 1e-15);
        assert!(matches!(lower_incomplete_gamma(cz(0.0), cz(1.0)), Err(Error::GammaPole(_))));
    }

    #[test]
    fn large_cutoff_uses_continued_fraction() {
        let up = upper_incomplete_gamma(cz(2.0), cz(60.0)).unwrap().re;
        assert!((up - 61.0 * (-60.0f64).exp()).abs() < 1e-12 * up);
        let lo = lower_incomplete_gamma(cz(2.0), cz(60.0)).unwrap().re;
        assert!((lo - 1.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_examples() {
        assert_eq!(poisson_tail(0, 3.0).unwrap(), 1.0);
        assert!((poisson_tail(2, 1.0).unwrap() - (1.0 - 2.0 / E)).abs() < 1e-15);
        let direct: f64 = 1.0 - (0..5).map(|k| (-10.0f64).exp() * 10f64.powi(k) / gamma(cz(k as f64 + 1.0)).unwrap().re).sum::<f64>();
        assert!((poisson_tail(5, 10.0).unwrap() - direct).abs() < 1e-14);
        assert!((poisson_tail(5, 10.0).unwrap() - 0.970_747).abs() < 1e-6);
        assert_eq!(regularized_p(3, cz(0.0)).unwrap(), cz(0.0));
        assert!((regularized_p(2, cz(1.0)).unwrap().re - (1.0 - 2.0 / E)).abs() < 1e-15);
        assert_eq!(regularized_p(0, cz(0.4)).unwrap(), cz(1.0));
    }

    #[test]
    fn gamma_z_examples() {
        let diag = GammaSpec {
            alpha: cz(1.5),
            beta: DualOperator::Diagonal(vec![cz(2.0), cz(3.0), cz(0.5)]),
            cutoff: Cutoff::Infinite,
        };
        let want = (2.0f64 * 3.0 * 0.5).powf(-1.5);
        assert!((gamma_z(&diag, &[]).unwrap().re - want).abs() < 1e-14);

        let one = GammaSpec {
            alpha: cz(2.0),
            beta: DualOperator::ScaledIdentity { lambda: cz(3.0), dim: 1 },
            cutoff: Cutoff::Infinite,
        };
        let quad = quad_integrate(&|x: &[f64]| cz((-3.0 * x[0]).exp() * x[0]), &[Axis::HalfLine(0.0)], Rule::default())
            .unwrap()
            .value
            .re;
        assert!((gamma_z(&one, &[]).unwrap().re - quad).abs() < 1e-12);
        assert!((quad - 1.0 / 9.0).abs() < 1e-12);

        let cut = GammaSpec {
            alpha: cz(1.0),
            beta: DualOperator::ScaledIdentity { lambda: cz(1.0), dim: 1 },
            cutoff: Cutoff::At(cz(1.0)),
        };
        let mut f = |t: f64| Ok(cz((-t).exp()));
        let truncated = adaptive_kronrod(&mut f, 0.0, 1.0, 1e-14).unwrap().value.re;
        assert!((gamma_z(&cut, &[]).unwrap().re - truncated).abs() < 1e-14);
    }

    #[test]
    fn gamma_z_characteristic() {
        let spec = GammaSpec {
            alpha: cz(2.0),
            beta: DualOperator::ScaledIdentity { lambda: cz(1.5), dim: 1 },
            cutoff: Cutoff::Infinite,
        };
        let tp = 0.8;
        let want = (Complex64::new(1.5, -tp)).powc(cz(-2.0));
        assert!((gamma_z(&spec, &[tp]).unwrap() - want).norm() < 1e-14);
        let dense = GammaSpec {
            beta: DualOperator::Dense(DMatrix::from_element(1, 1, cz(1.5))),
            ..spec.clone()
        };
        assert!((gamma_z(&dense, &[tp]).unwrap() - want).norm() < 1e-14);
        let zero = GammaSpec {
            beta: DualOperator::Diagonal(vec![cz(0.0)]),
            ..spec
        };
        assert!(matches!(gamma_z(&zero, &[]), Err(Error::Vanishing(_))));
    }

    #[test]
    fn poisson_z_examples() {
        let p = |n, lambda: f64, cutoff| PoissonSpec {
            n,
            beta: DualOperator::ScaledIdentity { lambda: cz(lambda), dim: 1 },
            cutoff,
        };
        assert_eq!(poisson_z(&p(0, 3.0, Cutoff::At(cz(0.2))), &[]).unwrap(), cz(1.0));
        assert!((poisson_z(&p(2, 1.0, Cutoff::At(cz(1.0))), &[]).unwrap().re - (1.0 - 2.0 / E)).abs() < 1e-15);
        assert!((poisson_z(&p(1, 2.0, Cutoff::Infinite), &[]).unwrap().re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shifted_expectation() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let zero = Path::constant(&g, cz(0.0));
        let beta = DualPath::smooth(&g, |_| cz(1.0));
        assert_eq!(shifted_poisson_expectation(&beta, &zero).unwrap(), cz(1.0));
        let tau = Path::constant(&g, Complex64::i());
        let v = shifted_poisson_expectation(&beta, &tau).unwrap();
        assert!((v - Complex64::i().exp()).norm() < 1e-15);
        let pi_tau = Path::constant(&g, Complex64::new(0.0, std::f64::consts::PI));
        assert!((shifted_poisson_expectation(&beta, &pi_tau).unwrap() + 1.0).norm() < 1e-15);
    }

    #[test]
    fn time_ordered_examples() {
        assert_eq!(time_ordered_series(&|_| 0.0, 0.0, 1.0, 7).unwrap().value, cz(1.0));
        let r = time_ordered_series(&|_| 1.0, 0.0, 1.0, 20).unwrap();
        assert!((r.value - Complex64::i().exp()).norm() < 1e-15);
        let r = time_ordered_series(&|t| t, 0.0, 1.0, 20).unwrap();
        assert!((r.value - Complex64::new(0.0, 0.5).exp()).norm() < 1e-15);
        let short = time_ordered_series(&|t| t.cos(), 0.0, 2.0, 3).unwrap();
        let exact = Complex64::new(0.0, 2f64.sin()).exp();
        assert!((short.value - exact).norm() <= short.bound);
    }

    #[test]
    fn evolution_examples() {
        assert!(evolution_derivative_check(&|_| 1.0, 0.0, 1.0, 1e-4).unwrap().norm() <= 1e-7);
        assert_eq!(evolution_derivative_check(&|_| 0.0, 0.0, 1.0, 1e-4).unwrap(), cz(0.0));
        let r = evolution_derivative_check(&|t| t.cos(), 0.0, std::f64::consts::FRAC_PI_2, 1e-4).unwrap();
        assert!(r.norm() <= 1e-6);
    }

    #[test]
    fn csv_table() {
        let s = special_function_csv(&[1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("alpha,c,lower,upper,regularized"));
    }
}
