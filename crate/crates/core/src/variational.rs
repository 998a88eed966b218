//! Discrete Euler–Lagrange solver for point-to-point and point-to-boundary paths.
//!
//! The action is discretized at segment midpoints,
//! `S = Σ_k h_k f(t_{k+½}, (x_k + x_{k+1})/2, (x_{k+1} − x_k)/h_k)`,
//! and its stationarity conditions are solved by damped Newton iteration.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{Path, TimeGrid};

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-10;

pub type Integrand = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
pub type SurfaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The integrand `f(t, x, ẋ)`.
#[derive(Clone)]
pub enum Lagrangian {
    /// `m|ẋ|²/2`
    Free { mass: f64 },
    /// `m|ẋ|²/2 − mω²|x|²/2`
    Harmonic { mass: f64, omega: f64 },
    /// Derivatives by central differences.
    Custom(Integrand),
}

impl std::fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lagrangian::Free { mass } => write!(f, "Free {{ mass: {mass} }}"),
            Lagrangian::Harmonic { mass, omega } => write!(f, "Harmonic {{ mass: {mass}, omega: {omega} }}"),
            Lagrangian::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Lagrangian {
    pub fn value(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        match self {
            Lagrangian::Free { mass } => 0.5 * mass * dot(v, v),
            Lagrangian::Harmonic { mass, omega } => 0.5 * mass * (dot(v, v) - omega * omega * dot(x, x)),
            Lagrangian::Custom(f) => f(t, x, v),
        }
    }

    /// `(∂f/∂x, ∂f/∂ẋ)`.
    pub fn gradients(&self, t: f64, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            Lagrangian::Free { mass } => (vec![0.0; x.len()], v.iter().map(|u| mass * u).collect()),
            Lagrangian::Harmonic { mass, omega } => (
                x.iter().map(|u| -mass * omega * omega * u).collect(),
                v.iter().map(|u| mass * u).collect(),
            ),
            Lagrangian::Custom(f) => {
                let partial = |which: usize, k: usize| {
                    let (mut xp, mut vp) = (x.to_vec(), v.to_vec());
                    let base = if which == 0 { x[k] } else { v[k] };
                    let h = 1e-5 * base.abs().max(1.0);
                    let set = |xp: &mut Vec<f64>, vp: &mut Vec<f64>, val: f64| {
                        if which == 0 {
                            xp[k] = val
                        } else {
                            vp[k] = val
                        }
                    };
                    set(&mut xp, &mut vp, base + h);
                    let up = f(t, &xp, &vp);
                    set(&mut xp, &mut vp, base - h);
                    let dn = f(t, &xp, &vp);
                    (up - dn) / (2.0 * h)
                };
                (
                    (0..x.len()).map(|k| partial(0, k)).collect(),
                    (0..v.len()).map(|k| partial(1, k)).collect(),
                )
            }
        }
    }

    /// `(∂f/∂ẋ)·ẋ − f`.
    pub fn energy(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        let (_, p) = self.gradients(t, x, v);
        dot(&p, v) - self.value(t, x, v)
    }
}

#[derive(Clone)]
pub enum TerminalCondition {
    Fixed(Vec<f64>),
    /// `S(x(t_b)) = 0` with `t_b` fixed and the endpoint free on the surface.
    Surface(SurfaceFn),
    /// `x(t_b)` fixed and `t_b` free, selected by the energy `E`.
    Horizontal { x_b: Vec<f64>, energy: f64 },
}

impl std::fmt::Debug for TerminalCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminalCondition::Fixed(x) => write!(f, "Fixed({x:?})"),
            TerminalCondition::Surface(_) => write!(f, "Surface"),
            TerminalCondition::Horizontal { x_b, energy } => write!(f, "Horizontal {{ x_b: {x_b:?}, energy: {energy} }}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariationalProblem {
    pub lagrangian: Lagrangian,
    pub grid: TimeGrid,
    pub x_a: Vec<f64>,
    pub terminal: TerminalCondition,
    pub initial_guess: Option<Path>,
}

impl VariationalProblem {
    pub fn new(lagrangian: Lagrangian, grid: &TimeGrid, x_a: Vec<f64>, terminal: TerminalCondition) -> Self {
        Self {
            lagrangian,
            grid: grid.clone(),
            x_a,
            terminal,
            initial_guess: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.x_a.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub path: Path,
    pub iterations: usize,
    /// Max discrete Euler–Lagrange residual over interior nodes.
    pub residual: f64,
    /// `|S(x_b)|`, or `|x_N − x_b|` for fixed ends.
    pub terminal_residual: f64,
    /// Lagrange multiplier of the surface constraint.
    pub multiplier: Option<f64>,
    /// Mean discrete energy over the segments.
    pub energy: f64,
}

/// Gradient of a scalar function by central differences.
pub fn surface_gradient(s: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let h = 1e-6 * x[k].abs().max(1.0);
            let mut p = x.to_vec();
            p[k] = x[k] + h;
            let up = s(&p);
            p[k] = x[k] - h;
            (up - s(&p)) / (2.0 * h)
        })
        .collect()
}

struct Discrete<'a> {
    f: &'a Lagrangian,
    nodes: &'a [f64],
    dim: usize,
}

impl Discrete<'_> {
    fn segment(&self, x: &[f64], k: usize) -> (f64, Vec<f64>, Vec<f64>, f64) {
        let d = self.dim;
        let h = self.nodes[k + 1] - self.nodes[k];
        let t = 0.5 * (self.nodes[k] + self.nodes[k + 1]);
        let (a, b) = (&x[k * d..(k + 1) * d], &x[(k + 1) * d..(k + 2) * d]);
        let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
        let vel: Vec<f64> = a.iter().zip(b).map(|(p, q)| (q - p) / h).collect();
        (t, mid, vel, h)
    }

    /// `∂S/∂x_k` for every node.
    fn action_gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let n = self.nodes.len();
        let mut g = vec![0.0; n * d];
        for k in 0..n - 1 {
            let (t, mid, vel, h) = self.segment(x, k);
            let (fx, fv) = self.f.gradients(t, &mid, &vel);
            for c in 0..d {
                g[k * d + c] += h * 0.5 * fx[c] - fv[c];
                g[(k + 1) * d + c] += h * 0.5 * fx[c] + fv[c];
            }
        }
        g
    }

    /// `max(1, max_k |∂f/∂ẋ|)`, the size of the terms that cancel in the gradient.
    fn momentum_scale(&self, x: &[f64]) -> f64 {
        (0..self.nodes.len() - 1).fold(1.0, |m: f64, k| {
            let (t, mid, vel, _) = self.segment(x, k);
            let (_, fv) = self.f.gradients(t, &mid, &vel);
            fv.iter().fold(m, |m, p| m.max(p.abs()))
        })
    }

    fn mean_energy(&self, x: &[f64]) -> f64 {
        let n = self.nodes.len();
        let total: f64 = (0..n - 1)
            .map(|k| {
                let (t, mid, vel, _) = self.segment(x, k);
                self.f.energy(t, &mid, &vel)
            })
            .sum();
        total / (n - 1) as f64
    }
}

fn interior_residual(disc: &Discrete, x: &[f64]) -> f64 {
    let d = disc.dim;
    let n = disc.nodes.len();
    let g = disc.action_gradient(x);
    g[d..(n - 1) * d].iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `Σ_k h_k f(t_{k+½}, x_{k+½}, (x_{k+1} − x_k)/h_k)`.
pub fn discrete_action(lagrangian: &Lagrangian, path: &Path) -> f64 {
    let disc = Discrete {
        f: lagrangian,
        nodes: path.grid().nodes(),
        dim: path.dim(),
    };
    let terms = (0..path.len() - 1).map(|k| {
        let (t, mid, vel, h) = disc.segment(path.values(), k);
        h * lagrangian.value(t, &mid, &vel)
    });
    crate::numerics::compensated_sum(terms)
}

/// Max discrete Euler–Lagrange residual of `path` at interior nodes.
pub fn euler_lagrange_residual(lagrangian: &Lagrangian, path: &Path) -> f64 {
    let disc = Discrete {
        f: lagrangian,
        nodes: path.grid().nodes(),
        dim: path.dim(),
    };
    interior_residual(&disc, path.values())
}

pub fn euler_solve(problem: &VariationalProblem) -> Result<Solution> {
    let d = problem.dim();
    if d == 0 {
        return Err(Error::InvalidArgument("initial point is empty".into()));
    }
    match &problem.terminal {
        TerminalCondition::Fixed(x_b) => {
            if x_b.len() != d {
                return Err(Error::InvalidArgument("terminal point has the wrong dimension".into()));
            }
            solve_on(problem, &problem.grid, Some(x_b), None)
        }
        TerminalCondition::Surface(s) => solve_on(problem, &problem.grid, None, Some(s)),
        TerminalCondition::Horizontal { x_b, energy } => solve_horizontal(problem, x_b, *energy),
    }
}

fn initial_values(problem: &VariationalProblem, grid: &TimeGrid, x_b: Option<&Vec<f64>>) -> Result<Vec<f64>> {
    if let Some(g) = &problem.initial_guess {
        if g.len() == grid.len() && g.dim() == problem.dim() {
            return Ok(g.values().to_vec());
        }
    }
    let target = x_b.cloned().unwrap_or_else(|| problem.x_a.clone());
    let (ta, tb) = (grid.t_a(), grid.t_b());
    let mut v = Vec::with_capacity(grid.len() * problem.dim());
    for &t in grid.nodes() {
        let w = (t - ta) / (tb - ta);
        v.extend(problem.x_a.iter().zip(&target).map(|(a, b)| a + w * (b - a)));
    }
    Ok(v)
}

fn solve_on(
    problem: &VariationalProblem,
    grid: &TimeGrid,
    x_b: Option<&Vec<f64>>,
    surface: Option<&SurfaceFn>,
) -> Result<Solution> {
    let d = problem.dim();
    let n = grid.len();
    if n < 3 {
        return Err(Error::InvalidGrid("need at least three nodes".into()));
    }
    let disc = Discrete {
        f: &problem.lagrangian,
        nodes: grid.nodes(),
        dim: d,
    };
    let mut x = initial_values(problem, grid, x_b)?;
    x[..d].copy_from_slice(&problem.x_a);
    if let Some(b) = x_b {
        x[(n - 1) * d..].copy_from_slice(b);
    }
    // unknowns: interior nodes, then for a surface the end node and the multiplier
    let free_nodes = if surface.is_some() { n - 1 } else { n - 2 };
    let m = free_nodes * d + usize::from(surface.is_some());
    let mut lambda = 0.0;
    let pack = |x: &[f64], lambda: f64| -> DVector<f64> {
        let mut u: Vec<f64> = x[d..(1 + free_nodes) * d].to_vec();
        if surface.is_some() {
            u.push(lambda);
        }
        DVector::from_vec(u)
    };
    let unpack = |u: &DVector<f64>, x: &mut Vec<f64>| -> f64 {
        x[d..(1 + free_nodes) * d].copy_from_slice(&u.as_slice()[..free_nodes * d]);
        if surface.is_some() {
            u[m - 1]
        } else {
            0.0
        }
    };
    let equations = |x: &[f64], lambda: f64| -> DVector<f64> {
        let g = disc.action_gradient(x);
        let mut r: Vec<f64> = g[d..(1 + free_nodes) * d].to_vec();
        if let Some(s) = surface {
            let end = &x[(n - 1) * d..];
            let grad = surface_gradient(s.as_ref(), end);
            for c in 0..d {
                r[(n - 2) * d + c] -= lambda * grad[c];
            }
            r.push(s(end));
        }
        DVector::from_vec(r)
    };
    let mut u = pack(&x, lambda);
    let mut r = equations(&x, lambda);
    let mut iterations = 0;
    while r.amax() > TOLERANCE * (disc.momentum_scale(&x) + lambda.abs()) {
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations,
                residual: r.amax(),
            });
        }
        iterations += 1;
        let mut jac = DMatrix::zeros(m, m);
        let mut xt = x.clone();
        for j in 0..m {
            let mut up = u.clone();
            let h = 1e-7 * u[j].abs().max(1.0);
            up[j] += h;
            let lt = unpack(&up, &mut xt);
            let rp = equations(&xt, lt);
            jac.set_column(j, &((rp - &r) / h));
        }
        let step = jac
            .lu()
            .solve(&(-&r))
            .ok_or(Error::Singular { condition: f64::INFINITY })?;
        let mut alpha = 1.0;
        let norm0 = r.norm();
        loop {
            let trial = &u + &step * alpha;
            let lt = unpack(&trial, &mut xt);
            let rt = equations(&xt, lt);
            if rt.norm() < norm0 || alpha < 1e-6 {
                u = trial;
                x.clone_from(&xt);
                lambda = lt;
                r = rt;
                break;
            }
            alpha *= 0.5;
        }
    }
    let end = &x[(n - 1) * d..];
    let terminal_residual = match (surface, x_b) {
        (Some(s), _) => s(end).abs(),
        (None, Some(b)) => end.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max),
        _ => 0.0,
    };
    let residual = interior_residual(&disc, &x);
    let energy = disc.mean_energy(&x);
    Ok(Solution {
        path: Path::from_values(grid, d, x)?,
        iterations,
        residual,
        terminal_residual,
        multiplier: surface.map(|_| lambda),
        energy,
    })
}

fn rescaled(grid: &TimeGrid, duration: f64) -> Result<TimeGrid> {
    let ta = grid.t_a();
    let scale = duration / grid.duration();
    TimeGrid::from_nodes(grid.nodes().iter().map(|t| ta + (t - ta) * scale).collect())
}

fn solve_horizontal(problem: &VariationalProblem, x_b: &[f64], energy: f64) -> Result<Solution> {
    let x_b = x_b.to_vec();
    let at = |t: f64| -> Result<Solution> { solve_on(problem, &rescaled(&problem.grid, t)?, Some(&x_b), None) };
    let (mut t0, mut t1) = (problem.grid.duration(), 1.1 * problem.grid.duration());
    let mut s0 = at(t0)?;
    let mut s1 = at(t1)?;
    for _ in 0..MAX_ITERATIONS {
        let (g0, g1) = (s0.energy - energy, s1.energy - energy);
        if g1.abs() <= 1e-12 * energy.abs().max(1.0) {
            return Ok(s1);
        }
        if g1 == g0 {
            break;
        }
        let mut t2 = t1 - g1 * (t1 - t0) / (g1 - g0);
        if !(t2 > 0.0) {
            t2 = 0.5 * t1;
        }
        t0 = t1;
        s0 = s1;
        t1 = t2;
        s1 = at(t1)?;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: (s1.energy - energy).abs(),
    })
}

fn end_state(path: &Path) -> (f64, Vec<f64>, Vec<f64>) {
    let n = path.len();
    let nodes = path.grid().nodes();
    let h = nodes[n - 1] - nodes[n - 2];
    let (a, b) = (path.at(n - 2), path.at(n - 1));
    (nodes[n - 1], b.to_vec(), a.iter().zip(b).map(|(p, q)| (q - p) / h).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transversality {
    pub residual: f64,
    pub nu: f64,
    /// `false` when the best fit is `ν = 0`, which the condition excludes.
    pub admissible: bool,
}

/// Least-squares fit of `ν` in `∂f/∂ẋ = −ν∇S` and `f + E = −ν∇S·ẋ` at `t_b`.
///
/// `E` defaults to the path's own terminal energy, so the scalar equation is
/// the momentum equations dotted with `ẋ`.
pub fn transversality_residual(
    path: &Path,
    lagrangian: &Lagrangian,
    surface: &dyn Fn(&[f64]) -> f64,
    energy: Option<f64>,
) -> Result<Transversality> {
    let (t, x, v) = end_state(path);
    let grad = surface_gradient(surface, &x);
    let (_, p) = lagrangian.gradients(t, &x, &v);
    let f = lagrangian.value(t, &x, &v) + energy.unwrap_or_else(|| dot(&p, &v) - lagrangian.value(t, &x, &v));
    let gv = dot(&grad, &v);
    if gv.abs() < 1e-14 && f.abs() > 1e-14 {
        return Err(Error::Domain("∇S·ẋ vanishes while f does not; no admissible ν".into()));
    }
    // rows: p_c + ν g_c = 0 and f + ν g·v = 0
    let mut a = grad.clone();
    a.push(gv);
    let mut b: Vec<f64> = p.iter().map(|q| -q).collect();
    b.push(-f);
    let aa = dot(&a, &a);
    let nu = if aa > 0.0 { dot(&a, &b) / aa } else { 0.0 };
    let residual = a.iter().zip(&b).map(|(ai, bi)| (ai * nu - bi).powi(2)).sum::<f64>().sqrt();
    Ok(Transversality {
        residual,
        nu,
        admissible: nu.abs() >= 1e-12,
    })
}

/// `max_k |(∂L/∂ẋ)·ẋ − L − E|` with centered differences.
pub fn fixed_energy_residual(path: &Path, lagrangian: &Lagrangian, energy: f64) -> f64 {
    let nodes = path.grid().nodes();
    let n = path.len();
    let d = path.dim();
    (0..n)
        .map(|k| {
            let (i, j) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            let h = nodes[j] - nodes[i];
            let v: Vec<f64> = if k == 0 || k == n - 1 {
                // second-order one-sided difference at the ends
                let (a, b, c, s) = if k == 0 { (0, 1, 2, 1.0) } else { (n - 1, n - 2, n - 3, -1.0) };
                let h1 = (nodes[b] - nodes[a]).abs();
                (0..d)
                    .map(|c2| s * (-3.0 * path.at(a)[c2] + 4.0 * path.at(b)[c2] - path.at(c)[c2]) / (2.0 * h1))
                    .collect()
            } else {
                (0..d).map(|c| (path.at(j)[c] - path.at(i)[c]) / h).collect()
            };
            (lagrangian.energy(nodes[k], path.at(k), &v) - energy).abs()
        })
        .fold(0.0, f64::max)
}

/// Angle between the arrival velocity and the surface normal, in radians.
pub fn arrival_angle(path: &Path, surface: &dyn Fn(&[f64]) -> f64) -> f64 {
    let (_, x, v) = end_state(path);
    let g = surface_gradient(surface, &x);
    let c = dot(&g, &v).abs() / (dot(&g, &g).sqrt() * dot(&v, &v).sqrt());
    c.min(1.0).acos()
}

/// CSV with columns `t, x0, x1, …`.
pub fn path_csv(path: &Path) -> Result<String> {
    let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((0..path.dim()).map(|c| format!("x{c}")));
    w.write_record(&header).map_err(io)?;
    for (k, &t) in path.grid().nodes().iter().enumerate() {
        let mut row = vec![format!("{t:.16e}")];
        row.extend(path.at(k).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&row).map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?)
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{BoundaryConditions, GaussianSpec, LatticeAction};
    use crate::lattice::{make_grid, Scale};

    #[test]
    fn free_motion_is_a_line() {
        let g = make_grid(0.0, 1.0, 33).unwrap();
        let p = VariationalProblem::new(Lagrangian::Free { mass: 1.0 }, &g, vec![0.0], TerminalCondition::Fixed(vec![1.0]));
        let s = euler_solve(&p).unwrap();
        for (k, &t) in g.nodes().iter().enumerate() {
            assert!((s.path.scalar(k) - t).abs() < 1e-12);
        }
        assert!(s.residual <= 1e-8 && s.terminal_residual <= 1e-8);
    }

    #[test]
    fn harmonic_matches_gaussian_mean() {
        let g = make_grid(0.0, 2.0, 41).unwrap();
        let omega = 1.2;
        let p = VariationalProblem::new(
            Lagrangian::Harmonic { mass: 1.0, omega },
            &g,
            vec![0.3],
            TerminalCondition::Fixed(vec![-0.7]),
        );
        let s = euler_solve(&p).unwrap();
        let spec = GaussianSpec::new(LatticeAction::harmonic(&g, omega), BoundaryConditions::fixed(0.3, -0.7), Scale::Real)
            .unwrap();
        assert!(s.path.max_abs_diff(spec.mean()) < 1e-8);
        let custom = VariationalProblem {
            lagrangian: Lagrangian::Custom(Arc::new(move |_, x: &[f64], v: &[f64]| 0.5 * (v[0] * v[0] - omega * omega * x[0] * x[0]))),
            ..p
        };
        assert!(euler_solve(&custom).unwrap().path.max_abs_diff(spec.mean()) < 1e-8);
    }

    #[test]
    fn one_dimensional_surface() {
        let g = make_grid(0.0, 1.0, 17).unwrap();
        let s: SurfaceFn = Arc::new(|x: &[f64]| x[0] - 1.0);
        let p = VariationalProblem::new(Lagrangian::Free { mass: 1.0 }, &g, vec![0.0], TerminalCondition::Surface(s));
        let sol = euler_solve(&p).unwrap();
        for (k, &t) in g.nodes().iter().enumerate() {
            assert!((sol.path.scalar(k) - t).abs() < 1e-10);
        }
    }

    #[test]
    fn orthogonal_arrival() {
        let g = make_grid(0.0, 1.0, 21).unwrap();
        let n = [0.6, 0.8];
        let s: SurfaceFn = Arc::new(move |x: &[f64]| n[0] * x[0] + n[1] * x[1] - 2.0);
        let p = VariationalProblem::new(
            Lagrangian::Free { mass: 1.0 },
            &g,
            vec![0.5, -0.3],
            TerminalCondition::Surface(s.clone()),
        );
        let sol = euler_solve(&p).unwrap();
        assert!(arrival_angle(&sol.path, s.as_ref()) < 1e-6);
        let tr = transversality_residual(&sol.path, &p.lagrangian, s.as_ref(), None).unwrap();
        assert!(tr.residual <= 1e-8 && tr.admissible);
        let oblique = Path::from_values(
            &g,
            2,
            g.nodes().iter().flat_map(|&t| [0.5 + 1.0 * t, -0.3 + 1.7 * t]).collect(),
        )
        .unwrap();
        let tr = transversality_residual(&oblique, &p.lagrangian, s.as_ref(), None).unwrap();
        assert!(tr.residual > 0.01);
    }

    #[test]
    fn degenerate_zero_path() {
        let g = make_grid(0.0, 1.0, 5).unwrap();
        let zero = Path::zeros(&g, 1);
        let tr = transversality_residual(&zero, &Lagrangian::Free { mass: 1.0 }, &|x| x[0], None).unwrap();
        assert_eq!(tr.residual, 0.0);
        assert!(!tr.admissible);
    }

    #[test]
    fn energy_residuals() {
        let g = make_grid(0.0, 1.0, 65).unwrap();
        let v = 1.5;
        let line = Path::from_fn(&g, |t| v * t);
        let free = Lagrangian::Free { mass: 1.0 };
        assert!(fixed_energy_residual(&line, &free, 0.5 * v * v) < 1e-12);
        assert!((fixed_energy_residual(&line, &free, 0.5 * v * v + 1.0) - 1.0).abs() < 1e-12);
        let w = 2.0;
        let orbit = Path::from_fn(&g, |t| (w * t).sin());
        let r = fixed_energy_residual(&orbit, &Lagrangian::Harmonic { mass: 1.0, omega: w }, 0.5 * w * w);
        assert!(r < 1e-2 && r > 0.0);
    }

    #[test]
    fn horizontal_terminal_selects_duration() {
        let g = make_grid(0.0, 1.0, 33).unwrap();
        let p = VariationalProblem::new(
            Lagrangian::Free { mass: 1.0 },
            &g,
            vec![0.0],
            TerminalCondition::Horizontal { x_b: vec![3.0], energy: 2.0 },
        );
        let s = euler_solve(&p).unwrap();
        // speed 2, distance 3
        assert!((s.path.grid().t_b() - 1.5).abs() < 1e-10);
        assert!(fixed_energy_residual(&s.path, &p.lagrangian, 2.0) < 1e-10);
    }

    #[test]
    fn csv_export() {
        let g = make_grid(0.0, 1.0, 3).unwrap();
        let s = path_csv(&Path::from_fn(&g, |t| t)).unwrap();
        assert_eq!(s.lines().next(), Some("t,x0"));
        assert_eq!(s.lines().count(), 4);
    }
}
