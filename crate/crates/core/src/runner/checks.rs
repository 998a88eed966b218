//! The checks a scenario can name, with their parameters and default tolerances.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{Kind, Scenario};
use crate::conditioning::{
    conjugacy_check, covariance_change_ratio, fubini_strategy_eval, gamma_poisson_update, gaussian_volume_quadrature,
    FubiniOrder, LikelihoodFamily, PosteriorParameters, PriorFamily,
};
use crate::determinants::{det_ratio_ivp, harmonic_boundary_form};
use crate::error::{Error, Result};
use crate::gamma_poisson::{
    evolution_derivative_check, gamma, gamma_z, lower_incomplete_gamma, poisson_tail, regularized_p,
    time_ordered_series, upper_gamma_continued_fraction, upper_incomplete_gamma, Cutoff, DualOperator, GammaSpec,
};
use crate::gaussian::{
    discrete_boundary_form, gaussian_moments, matrix_csv, quadratic_form, BoundaryConditions, GaussianSpec,
    LatticeAction,
};
use crate::lattice::{make_grid, Scale};
use crate::localization::{
    chapman_kolmogorov_residual, dirac_integrate, heat_eigen_expansion, image_sum_csv, image_sum_propagator,
    pin_endpoint, ImageSumSpec, WidthSchedule,
};
use crate::numerics::observed_order;
use crate::quadrature::{quad_integrate, Axis, Rule};
use crate::variational::{
    arrival_angle, discrete_action, euler_solve, fixed_energy_residual, transversality_residual, Lagrangian,
    SurfaceFn, TerminalCondition, VariationalProblem,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Float,
    Int,
    Str,
    List,
}

impl ParamType {
    pub fn describe(self) -> &'static str {
        match self {
            ParamType::Float => "a number",
            ParamType::Int => "a non-negative integer",
            ParamType::Str => "a string",
            ParamType::List => "an array of numbers",
        }
    }
}

/// One measured quantity compared as `|measured − reference| ≤ tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckOutput {
    pub measurements: Vec<Measurement>,
    /// CSV table written to the scenario's `output` path.
    pub table: Option<String>,
}

impl CheckOutput {
    fn push(&mut self, name: &str, measured: f64, reference: f64) {
        self.measurements.push(Measurement {
            name: name.to_string(),
            measured,
            reference,
        });
    }
}

pub struct CheckSpec {
    pub kind: Kind,
    pub name: &'static str,
    pub params: &'static [(&'static str, ParamType)],
    pub tolerances: &'static [(&'static str, f64)],
    pub run: fn(&Scenario) -> Result<CheckOutput>,
}

use ParamType::{Float, Int, List, Str};

pub static CHECKS: &[CheckSpec] = &[
    CheckSpec {
        kind: Kind::GaussianCheck,
        name: "moments",
        params: &[("nodes", Int), ("duration", Float), ("samples", Int), ("omega", Float), ("x_a", Float)],
        tolerances: &[("mean_z", 5.0), ("covariance_z", 5.0)],
        run: gaussian_moments_check,
    },
    CheckSpec {
        kind: Kind::GaussianCheck,
        name: "identities",
        params: &[("nodes", Int), ("duration", Float), ("omega", Float), ("x_a", Float), ("x_b", Float)],
        tolerances: &[("boundary_form", 1e-10), ("kernel_identity", 1e-9)],
        run: gaussian_identities_check,
    },
    CheckSpec {
        kind: Kind::ConditioningCheck,
        name: "covariance_change",
        params: &[("pairs", Int), ("max_dim", Int)],
        tolerances: &[("max_rel_error", 1e-8)],
        run: covariance_change_check,
    },
    CheckSpec {
        kind: Kind::ConditioningCheck,
        name: "conjugacy",
        params: &[("alpha", Float), ("beta", Float), ("counts", List)],
        tolerances: &[("alpha", 1e-8), ("beta", 1e-8), ("max_deviation", 1e-8), ("exact_update", 0.0)],
        run: conjugacy_scenario,
    },
    CheckSpec {
        kind: Kind::ConditioningCheck,
        name: "fubini",
        params: &[("functional", Str)],
        tolerances: &[("order_swap", 1e-10), ("value", 1e-10)],
        run: fubini_check,
    },
    CheckSpec {
        kind: Kind::LocalizationCheck,
        name: "bridge_kernel",
        params: &[("nodes", Int), ("duration", Float)],
        tolerances: &[("max_abs_error", 1e-10)],
        run: bridge_kernel_check,
    },
    CheckSpec {
        kind: Kind::LocalizationCheck,
        name: "pinned_normalization",
        params: &[("nodes", Int), ("duration", Float)],
        tolerances: &[("rel_error", 1e-10)],
        run: pinned_normalization_check,
    },
    CheckSpec {
        kind: Kind::LocalizationCheck,
        name: "dirac",
        params: &[("example", Str), ("eps0", Float), ("levels", Int)],
        tolerances: &[("error", 1e-6), ("schedule_agreement", 1e-6)],
        run: dirac_check,
    },
    CheckSpec {
        kind: Kind::LocalizationCheck,
        name: "image_sum",
        params: &[("period", Float), ("holonomy", Float), ("points", Int), ("times", List)],
        tolerances: &[("eigen_error", 1e-8), ("chapman_kolmogorov", 1e-8)],
        run: image_sum_check,
    },
    CheckSpec {
        kind: Kind::GammaPoissonCheck,
        name: "identities",
        params: &[("max_alpha", Float), ("max_c", Float)],
        tolerances: &[("complement", 1e-10), ("recurrence", 1e-10), ("tail", 1e-12), ("normalization", 1e-10)],
        run: gamma_identities_check,
    },
    CheckSpec {
        kind: Kind::GammaPoissonCheck,
        name: "evolution",
        params: &[("profile", Str), ("h", Float), ("order", Int)],
        tolerances: &[("derivative_residual", 1e-6), ("series_error", 1e-12)],
        run: evolution_check,
    },
    CheckSpec {
        kind: Kind::DeterminantCheck,
        name: "harmonic_oracle",
        params: &[
            ("omega", Float),
            ("duration", Float),
            ("x_a", Float),
            ("x_b", Float),
            ("node_counts", List),
            ("samples", Int),
        ],
        tolerances: &[("action_order", 0.1), ("det_ratio_error", 1e-10)],
        run: harmonic_oracle_check,
    },
    CheckSpec {
        kind: Kind::VariationalCheck,
        name: "transversality",
        params: &[
            ("nodes", Int),
            ("duration", Float),
            ("normal", List),
            ("offset", Float),
            ("start", List),
            ("omega", Float),
            ("node_counts", List),
        ],
        tolerances: &[("arrival_angle", 1e-6), ("residual", 1e-8), ("energy_order", 0.1)],
        run: transversality_check,
    },
];

pub fn find_check(kind: Kind, name: &str) -> Option<&'static CheckSpec> {
    CHECKS.iter().find(|c| c.kind == kind && c.name == name)
}

pub fn run_check(s: &Scenario) -> Result<CheckOutput> {
    let spec = find_check(s.kind, &s.check)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown check {}", s.check)))?;
    (spec.run)(s)
}

fn gaussian_moments_check(s: &Scenario) -> Result<CheckOutput> {
    let grid = s.grid()?;
    let omega = s.f64("omega", 0.0);
    let action = if omega == 0.0 {
        LatticeAction::free(&grid)
    } else {
        LatticeAction::harmonic(&grid, omega)
    };
    let spec = GaussianSpec::new(action, BoundaryConditions::derivative(s.f64("x_a", 0.0), 0.0), Scale::Real)?;
    let m = gaussian_moments(&spec, s.usize("samples", 100_000), s.seed)?;
    let n = grid.len();
    let mut mean_z: f64 = 0.0;
    for k in 0..n {
        if m.mean_stderr[k] > 0.0 {
            mean_z = mean_z.max((m.mean[k] - spec.mean().scalar(k)).abs() / m.mean_stderr[k]);
        }
    }
    let mut cov_z: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            let se = m.covariance_stderr[(j, k)];
            if se > 0.0 {
                let want = spec.kernel().at(j, k) / (2.0 * PI);
                cov_z = cov_z.max((m.covariance[(j, k)] - want).abs() / se);
            }
        }
    }
    let mut out = CheckOutput::default();
    out.push("mean_z", mean_z, 0.0);
    out.push("covariance_z", cov_z, 0.0);
    Ok(out)
}

fn gaussian_identities_check(s: &Scenario) -> Result<CheckOutput> {
    let grid = s.grid()?;
    let spec = GaussianSpec::new(
        LatticeAction::harmonic(&grid, s.f64("omega", 1.0)),
        BoundaryConditions::fixed(s.f64("x_a", 0.0), s.f64("x_b", 1.0)),
        Scale::Real,
    )?;
    let q = quadratic_form(&spec, spec.mean(), spec.mean())?;
    let b = discrete_boundary_form(&spec, spec.mean(), spec.mean())?;
    let mut out = CheckOutput::default();
    out.push("boundary_form", q.re, b.re);
    out.push("kernel_identity", spec.kernel().identity_residual(spec.action()), 0.0);
    out.table = Some(spec.kernel().to_csv());
    Ok(out)
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt());
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

fn covariance_change_check(s: &Scenario) -> Result<CheckOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let max_dim = s.usize("max_dim", 8).max(1);
    let mut worst: f64 = 0.0;
    for _ in 0..s.usize("pairs", 100) {
        let d = rng.random_range(1..=max_dim);
        let q1 = random_spd(&mut rng, d);
        let q2 = random_spd(&mut rng, d);
        let ratio = covariance_change_ratio(&q1, &q2)?;
        let rule = Rule::default();
        let direct = gaussian_volume_quadrature(&q2, rule)? / gaussian_volume_quadrature(&q1, rule)?;
        worst = worst.max((ratio - direct).abs() / direct);
    }
    let mut out = CheckOutput::default();
    out.push("max_rel_error", worst, 0.0);
    Ok(out)
}

fn ratio_param(x: f64, name: &str) -> Result<Ratio<i64>> {
    Ratio::approximate_float(x).ok_or_else(|| Error::InvalidArgument(format!("{name} = {x} is not representable")))
}

fn conjugacy_scenario(s: &Scenario) -> Result<CheckOutput> {
    let alpha = ratio_param(s.f64("alpha", 2.0), "alpha")?;
    let beta = ratio_param(s.f64("beta", 1.0), "beta")?;
    let counts: Vec<u64> = s
        .list("counts", &[3.0])
        .iter()
        .map(|&k| if k >= 0.0 && k.fract() == 0.0 { Ok(k as u64) } else { Err(Error::InvalidArgument(format!("count {k} is not a natural number"))) })
        .collect::<Result<_>>()?;
    let report = conjugacy_check(
        &LikelihoodFamily::Poisson { counts: counts.clone() },
        &PriorFamily::Gamma { alpha, beta },
        Rule::default(),
    )?;
    let total: u64 = counts.iter().sum();
    let want_alpha = alpha + Ratio::from_integer(total as i64);
    let want_beta = beta + Ratio::from_integer(counts.len() as i64);
    let exact = (gamma_poisson_update(alpha, beta, &counts) == (want_alpha, want_beta))
        && report.analytic == Some(PriorFamily::Gamma { alpha: want_alpha, beta: want_beta });
    let to_f = |r: Ratio<i64>| *r.numer() as f64 / *r.denom() as f64;
    let (fa, fb) = match report.fitted {
        PosteriorParameters::Gamma { alpha, beta } => (alpha, beta),
        _ => (f64::NAN, f64::NAN),
    };
    let mut out = CheckOutput::default();
    out.push("alpha", fa, to_f(want_alpha));
    out.push("beta", fb, to_f(want_beta));
    out.push("max_deviation", report.max_deviation, 0.0);
    out.push("exact_update", if exact { 1.0 } else { 0.0 }, 1.0);
    Ok(out)
}

type Bivariate = Box<dyn Fn(&[f64], &[f64]) -> Complex64 + Sync>;

/// `(name, F, dim X, dim Y, closed form)`.
fn fubini_functionals() -> Vec<(&'static str, Bivariate, usize, usize, Complex64)> {
    let c = |x: f64| Complex64::new(x, 0.0);
    vec![
        (
            "gaussian",
            Box::new(move |x: &[f64], y: &[f64]| c((-PI * (x[0] * x[0] + x[0] * y[0] + y[0] * y[0])).exp())),
            1,
            1,
            c(0.75f64.powf(-0.5)),
        ),
        (
            "sufficient",
            // depends on y only through S(y) = y₁ + y₂
            Box::new(move |x: &[f64], y: &[f64]| {
                let st = y[0] + y[1];
                c((2.0 * PI * 0.3 * st).cos() * (-PI * (x[0] - 0.5 * st).powi(2)).exp() * (-PI * (y[0] * y[0] + y[1] * y[1])).exp())
            }),
            1,
            2,
            c((-0.18 * PI).exp()),
        ),
        (
            "oscillatory",
            Box::new(move |x: &[f64], y: &[f64]| {
                Complex64::from_polar((-PI * (x[0] * x[0] + y[0] * y[0])).exp(), 2.0 * PI * (0.4 * x[0] - 0.2 * y[0]))
            }),
            1,
            1,
            c((-0.2 * PI).exp()),
        ),
    ]
}

fn fubini_check(s: &Scenario) -> Result<CheckOutput> {
    let which = s.str("functional", "all");
    let mut swap: f64 = 0.0;
    let mut value: f64 = 0.0;
    let mut any = false;
    for (name, f, dx, dy, exact) in fubini_functionals() {
        if which != "all" && which != name {
            continue;
        }
        any = true;
        let (xa, ya) = (vec![Axis::WholeLine; dx], vec![Axis::WholeLine; dy]);
        let a = fubini_strategy_eval(f.as_ref(), &xa, &ya, FubiniOrder::InnerY, Rule::default())?;
        let b = fubini_strategy_eval(f.as_ref(), &xa, &ya, FubiniOrder::InnerX, Rule::default())?;
        swap = swap.max((a - b).norm());
        value = value.max((a - exact).norm());
    }
    if !any {
        return Err(Error::InvalidArgument(format!("unknown functional `{which}`")));
    }
    let mut out = CheckOutput::default();
    out.push("order_swap", swap, 0.0);
    out.push("value", value, 0.0);
    Ok(out)
}

fn bridge_kernel_check(s: &Scenario) -> Result<CheckOutput> {
    let grid = s.grid()?;
    let pinned = pin_endpoint(&GaussianSpec::brownian(&grid)?, 0.0)?;
    let t = grid.nodes();
    let mut err: f64 = 0.0;
    for i in 0..t.len() {
        for j in 0..t.len() {
            err = err.max((pinned.kernel()[(i, j)] - (t[i].min(t[j]) - t[i] * t[j])).abs());
        }
    }
    let mut out = CheckOutput::default();
    out.push("max_abs_error", err, 0.0);
    out.table = Some(matrix_csv(t, pinned.kernel()));
    Ok(out)
}

fn pinned_normalization_check(s: &Scenario) -> Result<CheckOutput> {
    let grid = s.grid()?;
    let spec = GaussianSpec::brownian(&grid)?.with_scale(Scale::Imaginary)?;
    let got = pin_endpoint(&spec, 0.0)?.normalization();
    let want = (Complex64::i() * grid.duration()).powf(-0.5);
    let mut out = CheckOutput::default();
    out.push("rel_error", (got - want).norm() / want.norm(), 0.0);
    Ok(out)
}

type Field = Box<dyn Fn(&[f64]) -> Vec<f64> + Sync>;
type Scalar = Box<dyn Fn(&[f64]) -> Complex64 + Sync>;

/// `(name, F, M, box, Σ F(x₀)/|det M′(x₀)|)`.
pub fn dirac_examples() -> Vec<(&'static str, Scalar, Field, Vec<(f64, f64)>, f64)> {
    let c = |x: f64| Complex64::new(x, 0.0);
    vec![
        (
            "identity",
            Box::new(move |x: &[f64]| c(x[0].cos() + x[1] * x[1] + 0.5)),
            Box::new(|x: &[f64]| x.to_vec()),
            vec![(-2.0, 2.0), (-2.5, 2.0)],
            1.5,
        ),
        (
            "linear",
            Box::new(move |x: &[f64]| c(x[0] * x[0])),
            Box::new(|x: &[f64]| vec![2.0 * x[0] - 1.0]),
            vec![(-2.0, 3.0)],
            0.125,
        ),
        (
            "quadratic",
            Box::new(move |_: &[f64]| c(1.0)),
            Box::new(|x: &[f64]| vec![x[0] * x[0] - 1.0]),
            vec![(-3.0, 3.0)],
            1.0,
        ),
    ]
}

fn dirac_check(s: &Scenario) -> Result<CheckOutput> {
    let which = s.str("example", "all");
    let sched = WidthSchedule {
        eps0: s.f64("eps0", 0.5),
        levels: s.usize("levels", 9),
    };
    let alt = WidthSchedule {
        eps0: 0.8 * sched.eps0,
        ..sched
    };
    let (mut err, mut agree, mut any): (f64, f64, bool) = (0.0, 0.0, false);
    for (name, f, m, bounds, exact) in dirac_examples() {
        if which != "all" && which != name {
            continue;
        }
        any = true;
        let a = dirac_integrate(f.as_ref(), m.as_ref(), &bounds, sched)?;
        let b = dirac_integrate(f.as_ref(), m.as_ref(), &bounds, alt)?;
        err = err.max((a.value - exact).norm());
        agree = agree.max((a.value - b.value).norm());
    }
    if !any {
        return Err(Error::InvalidArgument(format!("unknown example `{which}`")));
    }
    let mut out = CheckOutput::default();
    out.push("error", err, 0.0);
    out.push("schedule_agreement", agree, 0.0);
    Ok(out)
}

fn image_sum_check(s: &Scenario) -> Result<CheckOutput> {
    let period = s.f64("period", 1.0);
    let spec = ImageSumSpec::heat(period, s.f64("holonomy", 0.0));
    let points = s.usize("points", 20).max(1);
    let times = s.list("times", &[0.01, 0.05, 0.2, 1.0, 5.0]);
    let ends: Vec<f64> = (0..points).map(|k| period * k as f64 / points as f64).collect();
    let x0 = 0.1 * period;
    let mut err: f64 = 0.0;
    for &t in &times {
        for &x in &ends {
            let a = image_sum_propagator(&spec, x0, x, t)?.value;
            let b = heat_eigen_expansion(period, spec.holonomy, x0, x, t);
            err = err.max((a - b).norm());
        }
    }
    let ck = chapman_kolmogorov_residual(&spec, x0, 0.7 * period, 0.02, 0.05)?.norm();
    let mut out = CheckOutput::default();
    out.push("eigen_error", err, 0.0);
    out.push("chapman_kolmogorov", ck, 0.0);
    out.table = Some(image_sum_csv(&spec, x0, &ends, &times)?);
    Ok(out)
}

fn gamma_identities_check(s: &Scenario) -> Result<CheckOutput> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let max_alpha = s.f64("max_alpha", 20.0);
    let max_c = s.f64("max_c", 50.0);
    let alphas: Vec<f64> = (1..=(2.0 * max_alpha) as usize).map(|k| 0.5 * k as f64).collect();
    let cs: Vec<f64> = (1..=40).map(|k| max_c * k as f64 / 40.0).collect();
    let (mut comp, mut rec): (f64, f64) = (0.0, 0.0);
    for &a in &alphas {
        for &x in &cs {
            let g = gamma(c(a))?;
            let lower = lower_incomplete_gamma(c(a), c(x))?;
            comp = comp.max((lower + upper_incomplete_gamma(c(a), c(x))? - g).norm() / g.norm());
            // the continued fraction converges for c ≥ α + 1
            if x >= a + 1.0 {
                let cf = upper_gamma_continued_fraction(c(a), c(x))?;
                comp = comp.max((lower + cf - g).norm() / g.norm());
            }
            let lhs = lower_incomplete_gamma(c(a + 1.0), c(x))?;
            let rhs = a * lower_incomplete_gamma(c(a), c(x))? - (a * x.ln() - x).exp();
            rec = rec.max((lhs - rhs).norm() / lhs.norm());
        }
    }
    let mut tail: f64 = 0.0;
    for n in 0..=20u32 {
        for k in 0..=60 {
            let x = 0.5 * k as f64;
            tail = tail.max((poisson_tail(n, x)? - regularized_p(n, c(x))?.re).abs());
        }
    }
    let mut norm: f64 = 0.0;
    for a in [0.5, 1.0, 2.0, 3.5] {
        for b in [0.5, 3.0] {
            let spec = GammaSpec {
                alpha: c(a),
                beta: DualOperator::ScaledIdentity { lambda: c(b), dim: 1 },
                cutoff: Cutoff::Infinite,
            };
            let z = gamma_z(&spec, &[])?.re;
            let g = gamma(c(a))?.re;
            let q = quad_integrate(&|t: &[f64]| c(t[0].powf(a - 1.0) * (-b * t[0]).exp() / g), &[Axis::HalfLine(0.0)], Rule::default())?
                .value
                .re;
            norm = norm.max((z - q).abs() / q);
        }
    }
    let mut out = CheckOutput::default();
    out.push("complement", comp, 0.0);
    out.push("recurrence", rec, 0.0);
    out.push("tail", tail, 0.0);
    out.push("normalization", norm, 0.0);
    Ok(out)
}

type Profile = (&'static str, Box<dyn Fn(f64) -> f64 + Sync>, f64, Box<dyn Fn(f64) -> f64>);

/// `(name, β, t_b, ∫₀^{t_b} β)`.
pub fn evolution_profiles() -> Vec<Profile> {
    vec![
        ("constant", Box::new(|_| 1.0), 1.0, Box::new(|t| t)),
        ("linear", Box::new(|t| t), 1.0, Box::new(|t| 0.5 * t * t)),
        ("cosine", Box::new(|t: f64| t.cos()), PI / 2.0, Box::new(|t: f64| t.sin())),
    ]
}

fn evolution_check(s: &Scenario) -> Result<CheckOutput> {
    let which = s.str("profile", "all");
    let h = s.f64("h", 1e-4);
    let order = s.usize("order", 20);
    let (mut der, mut ser, mut any): (f64, f64, bool) = (0.0, 0.0, false);
    for (name, beta, tb, integral) in evolution_profiles() {
        if which != "all" && which != name {
            continue;
        }
        any = true;
        der = der.max(evolution_derivative_check(beta.as_ref(), 0.0, tb, h)?.norm());
        let series = time_ordered_series(beta.as_ref(), 0.0, tb, order)?.value;
        ser = ser.max((series - Complex64::new(0.0, integral(tb)).exp()).norm());
    }
    if !any {
        return Err(Error::InvalidArgument(format!("unknown profile `{which}`")));
    }
    let mut out = CheckOutput::default();
    out.push("derivative_residual", der, 0.0);
    out.push("series_error", ser, 0.0);
    Ok(out)
}

/// Errors of the Euler-solved discrete action against the closed form, per node count.
pub fn harmonic_action_errors(omega: f64, t: f64, x_a: f64, x_b: f64, node_counts: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let exact = harmonic_boundary_form(x_a, x_b, omega, t)?;
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for &n in node_counts {
        let grid = make_grid(0.0, t, n)?;
        let lag = Lagrangian::Harmonic { mass: 1.0, omega };
        let sol = euler_solve(&VariationalProblem::new(lag.clone(), &grid, vec![x_a], TerminalCondition::Fixed(vec![x_b])))?;
        // the closed form is ∫(ẋ² − ω²x²), twice the unit-mass action
        let s = 2.0 * discrete_action(&lag, &sol.path);
        steps.push(grid.step());
        errors.push(s - exact);
    }
    Ok((steps, errors))
}

fn harmonic_oracle_check(s: &Scenario) -> Result<CheckOutput> {
    let counts: Vec<usize> = s.list("node_counts", &[64.0, 128.0, 256.0]).iter().map(|&n| n as usize).collect();
    let (steps, errors) = harmonic_action_errors(
        s.f64("omega", 1.0),
        s.f64("duration", 1.0),
        s.f64("x_a", 0.3),
        s.f64("x_b", -0.5),
        &counts,
    )?;
    let order = observed_order(&steps, &errors);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < s.usize("samples", 20) {
        let omega: f64 = rng.random_range(0.1..3.0);
        let t: f64 = rng.random_range(0.2..2.0);
        let phase = (omega * t) % PI;
        if omega * t > PI - 0.3 && !(0.3..=PI - 0.3).contains(&phase) {
            continue;
        }
        taken += 1;
        let want = (omega * t).sin() / (omega * t);
        worst = worst.max((det_ratio_ivp(omega, t)? - want).abs());
    }
    let mut out = CheckOutput::default();
    out.push("action_order", order, 2.0);
    out.push("det_ratio_error", worst, 0.0);
    Ok(out)
}

/// `max |(∂L/∂ẋ)ẋ − L − E|` of Euler-solved harmonic paths, per node count.
pub fn harmonic_energy_errors(omega: f64, t: f64, x_a: f64, x_b: f64, node_counts: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (sn, cs) = ((omega * t).sin(), (omega * t).cos());
    let v0 = omega * (x_b - x_a * cs) / sn;
    let energy = 0.5 * v0 * v0 + 0.5 * omega * omega * x_a * x_a;
    let lag = Lagrangian::Harmonic { mass: 1.0, omega };
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for &n in node_counts {
        let grid = make_grid(0.0, t, n)?;
        let sol = euler_solve(&VariationalProblem::new(lag.clone(), &grid, vec![x_a], TerminalCondition::Fixed(vec![x_b])))?;
        steps.push(grid.step());
        errors.push(fixed_energy_residual(&sol.path, &lag, energy));
    }
    Ok((steps, errors))
}

fn transversality_check(s: &Scenario) -> Result<CheckOutput> {
    let grid = s.grid()?;
    let normal = s.list("normal", &[0.6, 0.8]);
    let start = s.list("start", &[0.5, -0.3]);
    if normal.len() != start.len() || normal.is_empty() {
        return Err(Error::InvalidArgument("normal and start must have the same length".into()));
    }
    let offset = s.f64("offset", 2.0);
    let nn = normal.clone();
    let surface: SurfaceFn = Arc::new(move |x: &[f64]| x.iter().zip(&nn).map(|(a, b)| a * b).sum::<f64>() - offset);
    let lag = Lagrangian::Free { mass: 1.0 };
    let sol = euler_solve(&VariationalProblem::new(lag.clone(), &grid, start, TerminalCondition::Surface(surface.clone())))?;
    let angle = arrival_angle(&sol.path, surface.as_ref());
    let tr = transversality_residual(&sol.path, &lag, surface.as_ref(), None)?;
    let counts: Vec<usize> = s.list("node_counts", &[64.0, 128.0, 256.0]).iter().map(|&n| n as usize).collect();
    let (steps, errors) = harmonic_energy_errors(s.f64("omega", 1.5), s.f64("duration", 1.0), 0.2, 1.0, &counts)?;
    let mut out = CheckOutput::default();
    out.push("arrival_angle", angle, 0.0);
    out.push("residual", tr.residual, 0.0);
    out.push("energy_order", observed_order(&steps, &errors), 2.0);
    Ok(out)
}
