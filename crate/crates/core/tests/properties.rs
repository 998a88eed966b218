use std::f64::consts::PI;
use std::sync::Arc;

use lattice_integrators::conditioning::{
    conditional_decompose, covariance_change_ratio, fubini_strategy_eval, gamma_poisson_update, BlockGaussianSpec,
    FubiniOrder,
};
use lattice_integrators::determinants::{lattice_logdet, tracked_power};
use lattice_integrators::gamma_poisson::{
    gamma, gamma_z, lower_incomplete_gamma, upper_incomplete_gamma, Cutoff, DualOperator, GammaSpec,
};
use lattice_integrators::gaussian::{gaussian_z, BoundaryConditions, GaussianSpec, LatticeAction};
use lattice_integrators::lattice::{make_grid, pairing, DualPath, Path, Scale};
use lattice_integrators::localization::{dirac_integrate, image_sum_propagator, pin_endpoint, ImageSumSpec, WidthSchedule};
use lattice_integrators::quadrature::{Axis, Rule};
use lattice_integrators::variational::{
    arrival_angle, euler_solve, Lagrangian, SurfaceFn, TerminalCondition, VariationalProblem,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::Ratio;
use proptest::collection::vec;
use proptest::prelude::*;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn spd(entries: &[f64], d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(d, d, &entries[..d * d]);
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pairing_is_bilinear(
        a in -3.0..3.0f64,
        w1 in vec(-2.0..2.0f64, 17),
        w2 in vec(-2.0..2.0f64, 17),
        x in vec(-5.0..5.0f64, 17),
    ) {
        let g = make_grid(0.0, 1.0, 17).unwrap();
        let (p1, p2) = (DualPath::from_coefficients(&g, &w1).unwrap(), DualPath::from_coefficients(&g, &w2).unwrap());
        let path = Path::from_values(&g, 1, x).unwrap();
        let lhs = pairing(&p1.scale_add(c(a), &p2).unwrap(), &path).unwrap();
        let combo = pairing(&p1.scaled(a), &path).unwrap() + pairing(&p2, &path).unwrap();
        prop_assert!((lhs - combo).norm() <= 1e-12 * (1.0 + combo.norm()));
    }

    #[test]
    fn constructors_keep_the_anchor(x0 in -10.0..10.0f64, n in 2usize..40) {
        let g = make_grid(0.0, 1.0, n).unwrap();
        let p = Path::from_fn(&g, |t| x0 + t.sin());
        prop_assert_eq!(p.anchor()[0], x0);
        prop_assert_eq!(Path::constant(&g, x0).anchor()[0], x0);
    }

    #[test]
    fn kernel_inverts_the_action(omega in 0.0..1.4f64, n in 3usize..64, fixed in any::<bool>()) {
        let g = make_grid(0.0, 1.0, n).unwrap();
        let action = LatticeAction::harmonic(&g, omega);
        let bc = if fixed { BoundaryConditions::fixed(0.2, -0.4) } else { BoundaryConditions::derivative(0.2, 0.0) };
        let spec = GaussianSpec::new(action.clone(), bc, Scale::Real).unwrap();
        prop_assert!(spec.kernel().identity_residual(&action) <= 1e-10);
    }

    #[test]
    fn centered_z_is_even(coeffs in vec(-1.0..1.0f64, 12)) {
        let g = make_grid(0.0, 1.0, 12).unwrap();
        let spec = GaussianSpec::brownian(&g).unwrap();
        let xp = DualPath::from_coefficients(&g, &coeffs).unwrap();
        let (a, b) = (gaussian_z(&spec, &xp).unwrap(), gaussian_z(&spec, &xp.neg()).unwrap());
        prop_assert!((a - b).norm() <= 1e-14 * a.norm().max(1.0));
    }

    #[test]
    fn conditioning_splits_the_form(
        entries in vec(-1.0..1.0f64, 64),
        nx in 1usize..5,
        ny in 1usize..4,
        mean in vec(-1.0..1.0f64, 8),
        point in vec(-3.0..3.0f64, 8),
    ) {
        let d = nx + ny;
        let joint = BlockGaussianSpec::from_covariance(spd(&entries, d), nx, DVector::from_column_slice(&mean[..d]), Scale::Real).unwrap();
        let cs = conditional_decompose(&joint).unwrap();
        let r = cs.pythagorean_residual(&joint, &point[..nx], &point[nx..d]);
        prop_assert!(r.abs() <= 1e-10 * (1.0 + joint.joint_form(&point[..nx], &point[nx..d]).abs()));
    }

    #[test]
    fn pinning_is_conditioning_on_the_endpoint(omega in 0.0..1.2f64, n in 3usize..24, x_b in -2.0..2.0f64) {
        let g = make_grid(0.0, 1.0, n).unwrap();
        let spec = GaussianSpec::new(LatticeAction::harmonic(&g, omega), BoundaryConditions::derivative(0.0, 0.0), Scale::Real).unwrap();
        let pinned = pin_endpoint(&spec, x_b).unwrap();
        let block = spec.kernel().free_block();
        let m = block.nrows();
        let b = BlockGaussianSpec::from_covariance(block, m - 1, DVector::zeros(m), Scale::Real).unwrap();
        let cs = conditional_decompose(&b).unwrap();
        for i in 0..m - 1 {
            for j in 0..m - 1 {
                prop_assert!((cs.conditional_covariance[(i, j)] - pinned.kernel()[(i + 1, j + 1)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn conjugate_updates_compose(alpha in 1i64..20, beta in 1i64..5, a in vec(0u64..30, 1..6), b in vec(0u64..30, 1..6)) {
        let (al, be) = (Ratio::from_integer(alpha), Ratio::from_integer(beta));
        let (a1, b1) = gamma_poisson_update(al, be, &a);
        let twice = gamma_poisson_update(a1, b1, &b);
        let all: Vec<u64> = a.iter().chain(&b).copied().collect();
        prop_assert_eq!(twice, gamma_poisson_update(al, be, &all));
        let total: u64 = all.iter().sum();
        prop_assert_eq!(twice, (al + Ratio::from_integer(total as i64), be + Ratio::from_integer(all.len() as i64)));
    }

    #[test]
    fn fubini_orders_agree(a in 0.5..2.0f64, b in -0.8..0.8f64, k in -1.0..1.0f64) {
        let f = move |x: &[f64], y: &[f64]| {
            Complex64::from_polar((-PI * (a * x[0] * x[0] + b * x[0] * y[0] + y[0] * y[0])).exp(), k * (x[0] - y[0]))
        };
        let run = |o| fubini_strategy_eval(&f, &[Axis::WholeLine], &[Axis::WholeLine], o, Rule::default()).unwrap();
        let (p, q) = (run(FubiniOrder::InnerY), run(FubiniOrder::InnerX));
        prop_assert!((p - q).norm() <= 1e-10 * p.norm().max(1.0));
    }

    #[test]
    fn wrapped_kernel_is_periodic(x in 0.0..1.0f64, y in 0.0..1.0f64, t in 0.01..2.0f64, phi in -3.0..3.0f64, shift in -3i32..4) {
        let spec = ImageSumSpec::heat(1.0, phi);
        let base = image_sum_propagator(&spec, x, y, t).unwrap().value;
        let moved = image_sum_propagator(&spec, x + shift as f64, y + shift as f64, t).unwrap().value;
        prop_assert!((base - moved).norm() <= 1e-12 * base.norm().max(1.0));
    }

    #[test]
    fn incomplete_gammas_complement(alpha in 0.05..20.0f64, x in 0.0..50.0f64) {
        let total = lower_incomplete_gamma(c(alpha), c(x)).unwrap() + upper_incomplete_gamma(c(alpha), c(x)).unwrap();
        let g = gamma(c(alpha)).unwrap();
        prop_assert!((total - g).norm() <= 1e-13 * g.norm());
    }

    #[test]
    fn gamma_recurrence(alpha in 0.1..19.0f64, x in 0.01..50.0f64) {
        let next = lower_incomplete_gamma(c(alpha + 1.0), c(x)).unwrap().re;
        let want = alpha * lower_incomplete_gamma(c(alpha), c(x)).unwrap().re - (alpha * x.ln() - x).exp();
        prop_assert!((next - want).abs() <= 1e-10 * next.abs());
    }

    #[test]
    fn gamma_z_scales_with_beta(alpha in 0.1..6.0f64, beta in 0.2..5.0f64, lambda in 0.1..10.0f64) {
        let z = |b: f64| {
            let spec = GammaSpec {
                alpha: c(alpha),
                beta: DualOperator::ScaledIdentity { lambda: c(b), dim: 1 },
                cutoff: Cutoff::Infinite,
            };
            gamma_z(&spec, &[]).unwrap()
        };
        let (scaled, base) = (z(beta / lambda), z(beta) * lambda.powf(alpha));
        prop_assert!((scaled - base).norm() <= 1e-10 * base.norm());
    }

    #[test]
    fn logdet_matches_ratio(entries in vec(-1.0..1.0f64, 64), other in vec(-1.0..1.0f64, 64), d in 1usize..9) {
        let (q1, q2) = (spd(&entries, d), spd(&other, d));
        let diff = lattice_logdet(&q2).unwrap().log_magnitude - lattice_logdet(&q1).unwrap().log_magnitude;
        let ratio = covariance_change_ratio(&q1, &q2).unwrap();
        prop_assert!((diff + 2.0 * ratio.ln()).abs() <= 1e-10);
    }

    #[test]
    fn dirac_is_linear_in_f(a in -2.0..2.0f64, shift in -0.5..0.5f64) {
        let m = move |x: &[f64]| vec![x[0] - shift];
        let bounds = [(-2.0, 2.0)];
        let run = |f: &(dyn Fn(&[f64]) -> Complex64 + Sync)| dirac_integrate(f, &m, &bounds, WidthSchedule::default()).unwrap().value;
        let f1 = |x: &[f64]| c(x[0].cos());
        let f2 = |x: &[f64]| c(x[0] * x[0]);
        let both = run(&|x: &[f64]| f1(x) * a + f2(x));
        prop_assert!((both - (run(&f1) * a + run(&f2))).norm() <= 1e-9);
        prop_assert!((both - c(a * shift.cos() + shift * shift)).norm() <= 1e-6);
    }

    #[test]
    fn free_motion_arrives_orthogonally(theta in 0.0..(2.0 * PI), offset in 0.5..3.0f64, x0 in -0.5..0.5f64, y0 in -0.5..0.5f64) {
        let normal = [theta.cos(), theta.sin()];
        let surface: SurfaceFn = Arc::new(move |x: &[f64]| normal[0] * x[0] + normal[1] * x[1] - offset);
        let g = make_grid(0.0, 1.0, 24).unwrap();
        let p = VariationalProblem::new(Lagrangian::Free { mass: 1.0 }, &g, vec![x0, y0], TerminalCondition::Surface(surface.clone()));
        let sol = euler_solve(&p).unwrap();
        prop_assert!(arrival_angle(&sol.path, surface.as_ref()) <= 1e-6);
    }

    #[test]
    fn euler_path_is_the_gaussian_mean(omega in 0.0..2.0f64, x_a in -1.0..1.0f64, x_b in -1.0..1.0f64, n in 5usize..40) {
        let g = make_grid(0.0, 1.0, n).unwrap();
        let p = VariationalProblem::new(Lagrangian::Harmonic { mass: 1.0, omega }, &g, vec![x_a], TerminalCondition::Fixed(vec![x_b]));
        let sol = euler_solve(&p).unwrap();
        let spec = GaussianSpec::new(LatticeAction::harmonic(&g, omega), BoundaryConditions::fixed(x_a, x_b), Scale::Real).unwrap();
        prop_assert!(sol.path.max_abs_diff(spec.mean()) <= 1e-8);
    }

    #[test]
    fn phase_track_is_continuous(t in 0.5..2.0f64) {
        // det ratio sin(ωT)/(ωT) raised to −1/2 as ω crosses the first conjugate point
        let path: Vec<Complex64> = (1..400)
            .map(|k| {
                let w = 1.5 * PI / t * k as f64 / 400.0;
                Complex64::new((w * t).sin() / (w * t), 1e-3)
            })
            .collect();
        let end = tracked_power(&path, -0.5).unwrap();
        let start = path[0].powf(-0.5);
        prop_assert!(end.is_finite() && start.is_finite());
        prop_assert!(end.im.abs() > 0.5 * end.norm());
    }
}
