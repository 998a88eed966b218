//! Joint, marginal and conditional integrators on product spaces.
//!
//! Gaussian blocks are handled in closed form through Schur complements.
//! Everything else (Bayes updates, conjugacy, Fubini) works on low-dimensional
//! densities integrated by the quadrature engine.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use num_rational::Ratio;

use crate::determinants::lattice_logdet;
use crate::error::{Error, Result};
use crate::lattice::Scale;
use crate::quadrature::{quad_integrate, Axis, Rule};

const PI: f64 = std::f64::consts::PI;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!("{what} must be square")));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!("{what} is not symmetric")));
            }
        }
    }
    Ok(())
}

fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// A Gaussian on `X × Y` with joint covariance `G̃ = [[G_xx, G_xy], [G_yx, G_yy]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGaussianSpec {
    nx: usize,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    mean: DVector<f64>,
    s: Scale,
}

impl BlockGaussianSpec {
    /// From the joint covariance; the first `nx` coordinates form `X`.
    pub fn from_covariance(covariance: DMatrix<f64>, nx: usize, mean: DVector<f64>, s: Scale) -> Result<Self> {
        check_symmetric(&covariance, "joint covariance")?;
        let n = covariance.nrows();
        if nx == 0 || nx >= n || mean.len() != n {
            return Err(Error::InvalidArgument(format!(
                "need 0 < nx < {n} and a mean of length {n}"
            )));
        }
        let precision = spd_inverse(&covariance)?;
        Ok(Self {
            nx,
            covariance,
            precision,
            mean,
            s,
        })
    }

    /// From the joint precision, i.e. the matrix of `Q̃`.
    pub fn from_precision(precision: DMatrix<f64>, nx: usize, mean: DVector<f64>, s: Scale) -> Result<Self> {
        check_symmetric(&precision, "joint precision")?;
        let covariance = spd_inverse(&precision)?;
        let mut spec = Self::from_covariance(covariance, nx, mean, s)?;
        spec.precision = precision;
        Ok(spec)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.covariance.nrows() - self.nx
    }

    pub fn scale(&self) -> Scale {
        self.s
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn g_xx(&self) -> DMatrix<f64> {
        self.covariance.view((0, 0), (self.nx, self.nx)).into_owned()
    }

    pub fn g_xy(&self) -> DMatrix<f64> {
        self.covariance.view((0, self.nx), (self.nx, self.ny())).into_owned()
    }

    pub fn g_yx(&self) -> DMatrix<f64> {
        self.covariance.view((self.nx, 0), (self.ny(), self.nx)).into_owned()
    }

    pub fn g_yy(&self) -> DMatrix<f64> {
        self.covariance.view((self.nx, self.nx), (self.ny(), self.ny())).into_owned()
    }

    pub fn mean_x(&self) -> DVector<f64> {
        self.mean.rows(0, self.nx).into_owned()
    }

    pub fn mean_y(&self) -> DVector<f64> {
        self.mean.rows(self.nx, self.ny()).into_owned()
    }

    /// `Q̃((x, y) − m̄)`.
    pub fn joint_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut v = DVector::from_iterator(self.mean.len(), x.iter().chain(y).copied());
        v -= &self.mean;
        (v.transpose() * &self.precision * &v)[(0, 0)]
    }

    /// `Z_B(x′, y′) = s^{n/2} Det(G̃)^{1/2} e^{2πi⟨b′, m̄⟩ − πs b′ᵀG̃b′}`.
    pub fn z(&self, xp: &[f64], yp: &[f64]) -> Result<Complex64> {
        let b = DVector::from_iterator(self.mean.len(), xp.iter().chain(yp).copied());
        if b.len() != self.mean.len() {
            return Err(Error::InvalidArgument("dual point has the wrong length".into()));
        }
        gaussian_z_dense(&self.covariance, &self.mean, &b, self.s)
    }

    /// `Z_Y(y′)` of the marginal on `Y`.
    pub fn z_y(&self, yp: &[f64]) -> Result<Complex64> {
        if yp.len() != self.ny() {
            return Err(Error::InvalidArgument("dual point has the wrong length".into()));
        }
        gaussian_z_dense(&self.g_yy(), &self.mean_y(), &DVector::from_column_slice(yp), self.s)
    }
}

fn gaussian_z_dense(g: &DMatrix<f64>, mean: &DVector<f64>, b: &DVector<f64>, s: Scale) -> Result<Complex64> {
    let det = lattice_logdet(g)?;
    let w = (b.transpose() * g * b)[(0, 0)];
    let pair = b.dot(mean);
    let pre = s.power(g.nrows() as f64 / 2.0) * Complex64::from_polar((0.5 * det.log_magnitude).exp(), 0.5 * det.phase);
    Ok(pre * (2.0 * PI * Complex64::i() * pair - PI * s.value() * w).exp())
}

/// The conditional and marginal pieces of a [`BlockGaussianSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSpec {
    x_bar: DVector<f64>,
    y_bar: DVector<f64>,
    gain: DMatrix<f64>,
    /// `Q_X = (G_xx − G_xy D_yy G_yx)⁻¹`
    pub q_x: DMatrix<f64>,
    /// `Q_Y = D_yy = G_yy⁻¹`
    pub q_y: DMatrix<f64>,
    /// `G_xx − G_xy D_yy G_yx`
    pub conditional_covariance: DMatrix<f64>,
    s: Scale,
}

impl ConditionalSpec {
    /// `m̄_{x|y} = x̄ + G_xy D_yy (y − ȳ)`.
    pub fn conditional_mean(&self, y: &[f64]) -> DVector<f64> {
        let dy = DVector::from_column_slice(y) - &self.y_bar;
        &self.x_bar + &self.gain * dy
    }

    /// `G_xy D_yy`.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn q_x_form(&self, v: &DVector<f64>) -> f64 {
        (v.transpose() * &self.q_x * v)[(0, 0)]
    }

    pub fn q_y_form(&self, v: &DVector<f64>) -> f64 {
        (v.transpose() * &self.q_y * v)[(0, 0)]
    }

    /// `Q̃((x,y) − m̄) − Q_X(x − m̄_{x|y}) − Q_Y(y − ȳ)`.
    pub fn pythagorean_residual(&self, joint: &BlockGaussianSpec, x: &[f64], y: &[f64]) -> f64 {
        let dx = DVector::from_column_slice(x) - self.conditional_mean(y);
        let dy = DVector::from_column_slice(y) - &self.y_bar;
        joint.joint_form(x, y) - self.q_x_form(&dx) - self.q_y_form(&dy)
    }

    /// Conditional weight `e^{−(π/s)Q_X(x − m̄_{x|y})}`.
    pub fn weight(&self, x: &[f64], y: &[f64]) -> Complex64 {
        let dx = DVector::from_column_slice(x) - self.conditional_mean(y);
        (-PI / self.s.value() * self.q_x_form(&dx)).exp()
    }
}

/// Schur-complement decomposition of a block Gaussian.
pub fn conditional_decompose(b: &BlockGaussianSpec) -> Result<ConditionalSpec> {
    let g_yy = b.g_yy();
    let d_yy = match spd_inverse(&g_yy) {
        Ok(d) => d,
        Err(_) => {
            let det = lattice_logdet(&g_yy);
            let condition = det.map(|d| d.condition_estimate).unwrap_or(f64::INFINITY);
            return Err(Error::Singular { condition });
        }
    };
    let gain = b.g_xy() * &d_yy;
    let schur = b.g_xx() - &gain * b.g_yx();
    let schur = (&schur + schur.transpose()) * 0.5;
    let q_x = spd_inverse(&schur)?;
    Ok(ConditionalSpec {
        x_bar: b.mean_x(),
        y_bar: b.mean_y(),
        gain,
        q_x,
        q_y: d_yy,
        conditional_covariance: schur,
        s: b.s,
    })
}

/// `∫ e^{−(π/s)Q_X(x − m̄_{x|y})} dx = s^{n_x/2} Det(Q_X + Q_Y)^{−1/2} / Det(Q_Y)^{−1/2}`.
///
/// `Q_X + Q_Y` is the block-diagonal form on `X × Y`, so the ratio is `Det(Q_X)^{−1/2}`.
pub fn conditional_normalization(b: &BlockGaussianSpec) -> Result<Complex64> {
    let cs = conditional_decompose(b)?;
    let n = b.nx + b.ny();
    let mut sum = DMatrix::zeros(n, n);
    sum.view_mut((0, 0), (b.nx, b.nx)).copy_from(&cs.q_x);
    sum.view_mut((b.nx, b.nx), (b.ny(), b.ny())).copy_from(&cs.q_y);
    let both = lattice_logdet(&sum)?;
    let marginal = lattice_logdet(&cs.q_y)?;
    let ratio = (-0.5 * (both.log_magnitude - marginal.log_magnitude)).exp();
    Ok(b.s.power(b.nx as f64 / 2.0) * ratio)
}

/// Quadrature version of [`conditional_normalization`] (`s = 1`, `n_x + n_y ≤ 6`):
/// `∫∫ e^{−πQ_X(x − m̄_{x|y})} e^{−πQ_Y(y − ȳ)} dx dy / ∫ e^{−πQ_Y(y − ȳ)} dy`.
pub fn conditional_normalization_quadrature(b: &BlockGaussianSpec, rule: Rule) -> Result<f64> {
    if b.s != Scale::Real {
        return Err(Error::Unsupported("quadrature oracle requires s = 1".into()));
    }
    let cs = conditional_decompose(b)?;
    let (nx, ny) = (b.nx, b.ny());
    let y_bar = b.mean_y();
    let joint = |v: &[f64]| {
        let (x, y) = v.split_at(nx);
        let dy = DVector::from_column_slice(y) - &y_bar;
        cs.weight(x, y) * (-PI * cs.q_y_form(&dy)).exp()
    };
    let marginal = |y: &[f64]| {
        let dy = DVector::from_column_slice(y) - &y_bar;
        c((-PI * cs.q_y_form(&dy)).exp())
    };
    let num = quad_integrate(&joint, &vec![Axis::WholeLine; nx + ny], rule)?.value.re;
    let den = quad_integrate(&marginal, &vec![Axis::WholeLine; ny], rule)?.value.re;
    Ok(num / den)
}

/// `Θ_{X|Y} = Θ_B / Θ_Y` built from a joint and a marginal functional.
#[derive(Clone)]
pub struct ConditionalDensity {
    joint: Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>,
    marginal: Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>,
}

/// The joint, marginal and conditional functionals together.
#[derive(Clone)]
pub struct DensityTriple {
    pub joint: Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>,
    pub marginal: Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>,
    pub conditional: ConditionalDensity,
}

pub fn theta_conditional(
    joint: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    marginal: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
) -> DensityTriple {
    let joint: Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync> = Arc::new(joint);
    let marginal: Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync> = Arc::new(marginal);
    DensityTriple {
        conditional: ConditionalDensity {
            joint: joint.clone(),
            marginal: marginal.clone(),
        },
        joint,
        marginal,
    }
}

impl ConditionalDensity {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        let m = (self.marginal)(y);
        if m.norm() < 1e-300 {
            return Err(Error::Vanishing("marginal functional"));
        }
        Ok((self.joint)(x, y) / m)
    }
}

/// Both sides of the integrator relation for a Gaussian joint at one dual point `(x′, y′)`.
///
/// Left: `Z_{X′|Y′}(x′|y′) = Z_B(x′, y′)/Z_Y(y′)` in closed form. Right:
/// `(1/Z_Y(y′)) ∫ F·Θ_Y(y, y′) e^{−πQ̃(b − m̄)} db` by quadrature, with
/// `F = Θ_B/Θ_Y` evaluated as a ratio and `Z_Y(y′)` also by quadrature.
pub fn integrator_relation(b: &BlockGaussianSpec, xp: &[f64], yp: &[f64], rule: Rule) -> Result<(Complex64, Complex64)> {
    if b.s != Scale::Real {
        return Err(Error::Unsupported("quadrature oracle requires s = 1".into()));
    }
    let (nx, ny) = (b.nx, b.ny());
    if xp.len() != nx || yp.len() != ny {
        return Err(Error::InvalidArgument("dual point has the wrong length".into()));
    }
    let lhs = b.z(xp, yp)? / b.z_y(yp)?;
    let (xp_v, yp_v) = (xp.to_vec(), yp.to_vec());
    let theta_y = {
        let yp = yp_v.clone();
        move |y: &[f64]| Complex64::from_polar(1.0, 2.0 * PI * y.iter().zip(&yp).map(|(a, b)| a * b).sum::<f64>())
    };
    let theta_b = {
        let (xp, yp) = (xp_v.clone(), yp_v.clone());
        move |x: &[f64], y: &[f64]| {
            let arg: f64 = x.iter().zip(&xp).map(|(a, b)| a * b).sum::<f64>()
                + y.iter().zip(&yp).map(|(a, b)| a * b).sum::<f64>();
            Complex64::from_polar(1.0, 2.0 * PI * arg)
        }
    };
    let triple = theta_conditional(theta_b, theta_y.clone());
    let joint_integrand = |v: &[f64]| {
        let (x, y) = v.split_at(nx);
        let f = triple.conditional.eval(x, y).unwrap_or(Complex64::new(f64::NAN, 0.0));
        f * theta_y(y) * (-PI * b.joint_form(x, y)).exp()
    };
    let num = quad_integrate(&joint_integrand, &vec![Axis::WholeLine; nx + ny], rule)?.value;
    let y_bar = b.mean_y();
    let q_y = spd_inverse(&b.g_yy())?;
    let marginal_integrand = |y: &[f64]| {
        let dy = DVector::from_column_slice(y) - &y_bar;
        theta_y(y) * (-PI * (dy.transpose() * &q_y * &dy)[(0, 0)]).exp()
    };
    let z_y = quad_integrate(&marginal_integrand, &vec![Axis::WholeLine; ny], rule)?.value;
    Ok((lhs, num / z_y))
}

/// A posterior `Θ̃_X(x|c) = 𝒞(c|x) Θ_X(x)` with its evidence.
#[derive(Clone)]
pub struct Posterior {
    pub evidence: f64,
    likelihood: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    prior: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl Posterior {
    pub fn density(&self, x: &[f64]) -> f64 {
        self.normalized_ratio(x) * (self.prior)(x)
    }

    /// `𝒞(c|x) = Θ̃_C(c|x) / ∫ Θ̃_C Θ_X`.
    pub fn normalized_ratio(&self, x: &[f64]) -> f64 {
        (self.likelihood)(x) / self.evidence
    }
}

/// Bayes' rule on a lattice: the evidence is computed by quadrature over `axes`.
pub fn bayes_posterior(
    likelihood: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    prior: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    axes: &[Axis],
    rule: Rule,
) -> Result<Posterior> {
    let likelihood: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(likelihood);
    let prior: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = Arc::new(prior);
    let f = |x: &[f64]| c(likelihood(x) * prior(x));
    let evidence = quad_integrate(&f, axes, rule)?.value.re;
    if !(evidence.abs() > 1e-300) || !evidence.is_finite() {
        return Err(Error::Vanishing("evidence"));
    }
    Ok(Posterior {
        evidence,
        likelihood,
        prior,
    })
}

/// `max_x |Θ̃_X(x|c) − F(x) Θ̃_S(S(x)|c)|` over the sample points.
pub fn sufficient_factorization_check(
    likelihood: &dyn Fn(&[f64]) -> f64,
    f: &dyn Fn(&[f64]) -> f64,
    stat: &dyn Fn(&[f64]) -> Vec<f64>,
    stat_likelihood: &dyn Fn(&[f64]) -> f64,
    samples: &[Vec<f64>],
) -> f64 {
    samples
        .iter()
        .map(|x| (likelihood(x) - f(x) * stat_likelihood(&stat(x))).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LikelihoodFamily {
    /// Independent Poisson counts with a common rate.
    Poisson { counts: Vec<u64> },
    /// Independent normal observations with known variance.
    Gaussian { variance: f64, observations: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorFamily {
    /// Density `∝ λ^{α−1} e^{−βλ}`.
    Gamma { alpha: Ratio<i64>, beta: Ratio<i64> },
    Gaussian { mean: f64, variance: f64 },
    DiscreteUniform { atoms: Vec<f64> },
}

impl PriorFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PriorFamily::Gamma { .. } => "gamma",
            PriorFamily::Gaussian { .. } => "gaussian",
            PriorFamily::DiscreteUniform { .. } => "discrete_uniform",
        }
    }
}

impl LikelihoodFamily {
    pub fn name(&self) -> &'static str {
        match self {
            LikelihoodFamily::Poisson { .. } => "poisson",
            LikelihoodFamily::Gaussian { .. } => "gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorParameters {
    Gamma { alpha: f64, beta: f64 },
    Gaussian { mean: f64, variance: f64 },
    Atoms { atoms: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyReport {
    pub likelihood: &'static str,
    pub prior: &'static str,
    /// Parameters fitted to the quadrature posterior.
    pub fitted: PosteriorParameters,
    /// The conjugate update in exact arithmetic, when the pair is conjugate.
    pub analytic: Option<PriorFamily>,
    /// Max deviation between the quadrature posterior and the fitted member.
    pub max_deviation: f64,
    pub in_family: bool,
}

/// Exact gamma–Poisson update `(α + Σk, β + n)`.
pub fn gamma_poisson_update(alpha: Ratio<i64>, beta: Ratio<i64>, counts: &[u64]) -> (Ratio<i64>, Ratio<i64>) {
    let k: i64 = counts.iter().map(|&k| k as i64).sum();
    (alpha + k, beta + counts.len() as i64)
}

/// Normal–normal update with known observation variance: `(mean, variance)`.
pub fn gaussian_update(mean: f64, variance: f64, obs_variance: f64, observations: &[f64]) -> (f64, f64) {
    let precision = 1.0 / variance + observations.len() as f64 / obs_variance;
    let m = (mean / variance + observations.iter().sum::<f64>() / obs_variance) / precision;
    (m, 1.0 / precision)
}

fn ln_gamma(x: f64) -> f64 {
    crate::gamma_poisson::ln_gamma(Complex64::new(x, 0.0)).re
}

/// Lattice Bayes update followed by a same-family fit.
pub fn conjugacy_check(likelihood: &LikelihoodFamily, prior: &PriorFamily, rule: Rule) -> Result<ConjugacyReport> {
    const TOL: f64 = 1e-8;
    match (likelihood, prior) {
        (LikelihoodFamily::Poisson { counts }, PriorFamily::Gamma { alpha, beta }) => {
            let (a, b) = (ratio_f64(*alpha), ratio_f64(*beta));
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidArgument("gamma prior needs α, β > 0".into()));
            }
            let counts = counts.clone();
            let log_fact: f64 = counts.iter().map(|&k| ln_gamma(k as f64 + 1.0)).sum();
            let like = move |x: &[f64]| {
                let lam = x[0];
                let k: f64 = counts.iter().map(|&k| k as f64).sum();
                (k * lam.ln() - counts.len() as f64 * lam - log_fact).exp()
            };
            let norm = a * b.ln() - ln_gamma(a);
            let pri = move |x: &[f64]| ((a - 1.0) * x[0].ln() - b * x[0] + norm).exp();
            let post = bayes_posterior(like, pri, &[Axis::HalfLine(0.0)], rule)?;
            let (m, v) = moments(&post, Axis::HalfLine(0.0), rule)?;
            let (fa, fb) = (m * m / v, m / v);
            let fnorm = fa * fb.ln() - ln_gamma(fa);
            let fitted = |x: f64| ((fa - 1.0) * x.ln() - fb * x + fnorm).exp();
            let hi = m + 12.0 * v.sqrt();
            let dev = max_dev(&post, &fitted, 1e-6 * hi, hi);
            let analytic = match likelihood {
                LikelihoodFamily::Poisson { counts } => {
                    let (pa, pb) = gamma_poisson_update(*alpha, *beta, counts);
                    Some(PriorFamily::Gamma { alpha: pa, beta: pb })
                }
                _ => None,
            };
            Ok(ConjugacyReport {
                likelihood: likelihood.name(),
                prior: prior.name(),
                fitted: PosteriorParameters::Gamma { alpha: fa, beta: fb },
                analytic,
                max_deviation: dev,
                in_family: dev <= TOL,
            })
        }
        (LikelihoodFamily::Gaussian { variance, observations }, PriorFamily::Gaussian { mean, variance: v0 }) => {
            let (s2, m0, v0) = (*variance, *mean, *v0);
            if !(s2 > 0.0 && v0 > 0.0) {
                return Err(Error::InvalidArgument("variances must be positive".into()));
            }
            let obs = observations.clone();
            let like = move |x: &[f64]| {
                obs.iter()
                    .map(|y| (-(y - x[0]).powi(2) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt())
                    .product()
            };
            let pri = move |x: &[f64]| (-(x[0] - m0).powi(2) / (2.0 * v0)).exp() / (2.0 * PI * v0).sqrt();
            let post = bayes_posterior(like, pri, &[Axis::WholeLine], rule)?;
            let (m, v) = moments(&post, Axis::WholeLine, rule)?;
            let fitted = |x: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
            let sd = v.sqrt();
            let dev = max_dev(&post, &fitted, m - 12.0 * sd, m + 12.0 * sd);
            let (pm, pv) = gaussian_update(m0, v0, s2, observations);
            Ok(ConjugacyReport {
                likelihood: likelihood.name(),
                prior: prior.name(),
                fitted: PosteriorParameters::Gaussian { mean: m, variance: v },
                analytic: Some(PriorFamily::Gaussian { mean: pm, variance: pv }),
                max_deviation: dev,
                in_family: dev <= TOL,
            })
        }
        (LikelihoodFamily::Gaussian { variance, observations }, PriorFamily::DiscreteUniform { atoms }) => {
            if atoms.is_empty() {
                return Err(Error::InvalidArgument("discrete prior needs atoms".into()));
            }
            let like = |x: f64| {
                observations
                    .iter()
                    .map(|y| (-(y - x).powi(2) / (2.0 * variance)).exp())
                    .product::<f64>()
            };
            let raw: Vec<f64> = atoms.iter().map(|&a| like(a)).collect();
            let total: f64 = raw.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Vanishing("evidence"));
            }
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let uniform = 1.0 / atoms.len() as f64;
            let dev = weights.iter().map(|w| (w - uniform).abs()).fold(0.0, f64::max);
            Ok(ConjugacyReport {
                likelihood: likelihood.name(),
                prior: prior.name(),
                fitted: PosteriorParameters::Atoms {
                    atoms: atoms.clone(),
                    weights,
                },
                analytic: None,
                max_deviation: dev,
                in_family: dev <= TOL,
            })
        }
        _ => Err(Error::Unsupported(format!(
            "no conjugacy check for a {} likelihood with a {} prior",
            likelihood.name(),
            prior.name()
        ))),
    }
}

fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn moments(post: &Posterior, axis: Axis, rule: Rule) -> Result<(f64, f64)> {
    let m1 = quad_integrate(&|x: &[f64]| c(x[0] * post.density(x)), &[axis], rule)?.value.re;
    let m2 = quad_integrate(&|x: &[f64]| c((x[0] - m1).powi(2) * post.density(x)), &[axis], rule)?
        .value
        .re;
    Ok((m1, m2))
}

fn max_dev(post: &Posterior, fitted: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    (0..=400)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / 400.0;
            (post.density(&[x]) - fitted(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// Order of the iterated integral in [`fubini_strategy_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FubiniOrder {
    /// `∫_X [∫_Y F dy] dx`
    InnerY,
    /// `∫_Y [∫_X F dx] dy`
    InnerX,
}

/// Iterated lattice integral of `F(x, y)` in the requested order.
pub fn fubini_strategy_eval(
    f: &(dyn Fn(&[f64], &[f64]) -> Complex64 + Sync),
    x_axes: &[Axis],
    y_axes: &[Axis],
    order: FubiniOrder,
    rule: Rule,
) -> Result<Complex64> {
    if x_axes.len() > 4 || y_axes.len() > 4 {
        return Err(Error::DimensionLimit {
            dim: x_axes.len().max(y_axes.len()),
            limit: 4,
        });
    }
    let inner_fail = |e: Error| Error::Divergence(format!("inner integral failed: {e}"));
    match order {
        FubiniOrder::InnerY => {
            let outer = |x: &[f64]| {
                let g = |y: &[f64]| f(x, y);
                quad_integrate(&g, y_axes, rule)
                    .map(|r| r.value)
                    .unwrap_or(Complex64::new(f64::NAN, 0.0))
            };
            quad_integrate(&outer, x_axes, rule)
                .map(|r| r.value)
                .map_err(inner_fail)
        }
        FubiniOrder::InnerX => {
            let outer = |y: &[f64]| {
                let g = |x: &[f64]| f(x, y);
                quad_integrate(&g, x_axes, rule)
                    .map(|r| r.value)
                    .unwrap_or(Complex64::new(f64::NAN, 0.0))
            };
            quad_integrate(&outer, y_axes, rule)
                .map(|r| r.value)
                .map_err(inner_fail)
        }
    }
}

/// `∫ e^{−(π/s)Q₂} D₁x = Det(Q₂)^{−1/2} / Det(Q₁)^{−1/2}`.
pub fn covariance_change_ratio(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> Result<f64> {
    if q1.shape() != q2.shape() {
        return Err(Error::InvalidArgument("forms must have the same dimension".into()));
    }
    for q in [q1, q2] {
        check_symmetric(q, "quadratic form")?;
        q.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    }
    let d1 = lattice_logdet(q1)?;
    let d2 = lattice_logdet(q2)?;
    Ok((-0.5 * (d2.log_magnitude - d1.log_magnitude)).exp())
}

/// `∫_{ℝⁿ} e^{−π xᵀQx} dx` by quadrature along the principal axes of `Q`.
///
/// An orthogonal change of variables has unit Jacobian, so the integral is
/// the product of `n` one-dimensional quadratures.
pub fn gaussian_volume_quadrature(q: &DMatrix<f64>, rule: Rule) -> Result<f64> {
    check_symmetric(q, "quadratic form")?;
    let eig = SymmetricEigen::new(q.clone());
    let mut total = 1.0;
    for &lam in eig.eigenvalues.iter() {
        if !(lam > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let f = |u: &[f64]| c((-PI * lam * u[0] * u[0]).exp());
        total *= quad_integrate(&f, &[Axis::WholeLine], rule)?.value.re;
    }
    Ok(total)
}
