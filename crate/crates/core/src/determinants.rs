//! Lattice determinants and Gelfand–Yaglom ratios.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Condition estimates above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetMethod {
    Lattice,
    IvpRatio,
}

/// `Det = exp(log_magnitude + i·phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetResult {
    pub log_magnitude: f64,
    pub phase: f64,
    pub method: DetMethod,
    pub condition_estimate: f64,
}

impl DetResult {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.log_magnitude.exp(), self.phase)
    }

    /// `Det^p` on the branch selected by the stored phase.
    pub fn power(&self, p: f64) -> Complex64 {
        Complex64::from_polar((p * self.log_magnitude).exp(), p * self.phase)
    }
}

fn wrap(phase: f64) -> f64 {
    phase.sin().atan2(phase.cos())
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Log-determinant of a complex square matrix by partially pivoted LU.
///
/// The phase is the sum of pivot arguments plus `π` per row swap, wrapped to
/// `(−π, π]`.
pub fn lattice_logdet_complex(a: &DMatrix<Complex64>) -> Result<DetResult> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "determinant of a {}×{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(DetResult {
            log_magnitude: 0.0,
            phase: 0.0,
            method: DetMethod::Lattice,
            condition_estimate: 1.0,
        });
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let mut log_mag = 0.0;
    let mut phase = 0.0;
    for i in 0..n {
        let d = u[(i, i)];
        if d.norm() == 0.0 {
            return Err(Error::Singular {
                condition: f64::INFINITY,
            });
        }
        log_mag += d.norm().ln();
        phase += d.arg();
    }
    if lu.p().determinant::<f64>() < 0.0 {
        phase += std::f64::consts::PI;
    }
    let inv = lu.try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = norm1(a) * norm1(&inv);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok(DetResult {
        log_magnitude: log_mag,
        phase: wrap(phase),
        method: DetMethod::Lattice,
        condition_estimate: condition,
    })
}

/// Log-determinant of a real square matrix; the phase is `0` or `π`.
pub fn lattice_logdet(a: &DMatrix<f64>) -> Result<DetResult> {
    lattice_logdet_complex(&a.map(|x| Complex64::new(x, 0.0)))
}

/// Unwrap a sequence of phases so adjacent entries differ by at most `π`.
pub fn track_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    let tau = std::f64::consts::TAU;
    for (k, &p) in phases.iter().enumerate() {
        if k > 0 {
            let prev = out[k - 1];
            let mut cur = p + offset;
            while cur - prev > std::f64::consts::PI {
                cur -= tau;
                offset -= tau;
            }
            while cur - prev < -std::f64::consts::PI {
                cur += tau;
                offset += tau;
            }
            out.push(cur);
        } else {
            out.push(p);
        }
    }
    out
}

/// `z^p` for the last point of `path`, following the argument continuously
/// from the first point (which is taken on the principal branch).
pub fn tracked_power(path: &[Complex64], p: f64) -> Result<Complex64> {
    let last = *path
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty continuation path".into()))?;
    if path.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::Vanishing("continuation path value"));
    }
    let phases: Vec<f64> = path.iter().map(|z| z.arg()).collect();
    let tracked = track_phase(&phases);
    let arg = tracked[tracked.len() - 1];
    Ok(Complex64::from_polar(last.norm().powf(p), p * arg))
}

fn harmonic_rk4(omega: f64, t_end: f64, steps: usize) -> (f64, Vec<f64>) {
    let h = t_end / steps as f64;
    let w2 = omega * omega;
    let (mut u, mut v) = (0.0f64, 1.0f64);
    let stride = (steps / 64).max(1);
    let mut samples = vec![0.0];
    for k in 0..steps {
        let (k1u, k1v) = (v, -w2 * u);
        let (k2u, k2v) = (v + 0.5 * h * k1v, -w2 * (u + 0.5 * h * k1u));
        let (k3u, k3v) = (v + 0.5 * h * k2v, -w2 * (u + 0.5 * h * k2u));
        let (k4u, k4v) = (v + h * k3v, -w2 * (u + h * k3u));
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if (k + 1) % stride == 0 {
            samples.push(u);
        }
    }
    (u, samples)
}

/// `Det(d²/dt² + ω²) / Det(d²/dt²)` on `[0, T]` with both ends fixed.
///
/// Integrates `u″ + ω²u = 0`, `u(0) = 0`, `u′(0) = 1` with RK4 at two step
/// counts, extrapolates, and returns `u(T)/T`.
pub fn det_ratio_ivp(omega: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite() && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("need T > 0, got T = {t}, ω = {omega}")));
    }
    if omega == 0.0 {
        return Ok(1.0);
    }
    let steps = ((omega.abs() * t * 400.0).ceil() as usize).max(2000);
    let (coarse, _) = harmonic_rk4(omega, t, steps);
    let (fine, samples) = harmonic_rk4(omega, t, 2 * steps);
    let u = fine + (fine - coarse) / 15.0;
    let ratio = u / t;
    if ratio.abs() < 1e-9 {
        return Err(Error::ZeroMode {
            basis: vec![samples],
        });
    }
    Ok(ratio)
}

/// Interior Dirichlet matrix of the midpoint lattice action
/// `Σ h[(Δx/h)² − ω²((x_k + x_{k+1})/2)²]` on `n` nodes over `[0, T]`.
pub fn harmonic_lattice_matrix(omega: f64, t: f64, n: usize) -> Result<DMatrix<f64>> {
    if n < 3 || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need n ≥ 3 and T > 0, got n = {n}")));
    }
    let h = t / (n - 1) as f64;
    let m = n - 2;
    let w2 = omega * omega;
    let diag = 2.0 / h - w2 * h / 2.0;
    let off = -1.0 / h - w2 * h / 4.0;
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            diag
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    }))
}

/// Lattice version of [`det_ratio_ivp`]: `det A_ω / det A_0` with `n` nodes.
///
/// Computed by the three-term recurrence for tridiagonal determinants, which
/// is the discrete Gelfand–Yaglom equation. Converges to the continuum ratio
/// at first order in `h`.
pub fn lattice_det_ratio(omega: f64, t: f64, n: usize) -> Result<f64> {
    if n < 3 || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need n ≥ 3 and T > 0, got n = {n}")));
    }
    let h = t / (n - 1) as f64;
    let w2 = omega * omega;
    // h^k D_k with D_k the leading k×k minor; equals k + 1 when ω = 0.
    let scaled_det = |d: f64, o: f64| {
        let (mut p_prev, mut p) = (1.0f64, d * h);
        for _ in 2..=n - 2 {
            let next = d * h * p - (o * h).powi(2) * p_prev;
            p_prev = p;
            p = next;
        }
        p
    };
    let with = scaled_det(2.0 / h - w2 * h / 2.0, -1.0 / h - w2 * h / 4.0);
    let without = (n - 1) as f64;
    let r = with / without;
    if r.abs() < 1e-12 {
        return Err(Error::ZeroMode { basis: vec![] });
    }
    Ok(r)
}

/// Classical action of the harmonic oscillator between `x_a` and `x_b` in time `T`:
/// `ω[(x_a² + x_b²) cos ωT − 2 x_a x_b] / sin ωT`.
pub fn harmonic_boundary_form(x_a: f64, x_b: f64, omega: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need T > 0, got {t}")));
    }
    let wt = omega * t;
    if wt.abs() < 1e-4 {
        let w2t = omega * omega * t;
        return Ok((x_a * x_a + x_b * x_b) * (1.0 / t - w2t / 3.0)
            - 2.0 * x_a * x_b * (1.0 / t + w2t / 6.0));
    }
    let s = wt.sin();
    if s.abs() < 1e-12 {
        return Err(Error::ZeroMode { basis: vec![] });
    }
    Ok(omega * ((x_a * x_a + x_b * x_b) * wt.cos() - 2.0 * x_a * x_b) / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cofactor(m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = m.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * cofactor(&minor)
            })
            .sum()
    }

    #[test]
    fn identity_and_diagonal() {
        let r = lattice_logdet(&DMatrix::identity(7, 7)).unwrap();
        assert_eq!((r.log_magnitude, r.phase), (0.0, 0.0));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]));
        let r = lattice_logdet(&d).unwrap();
        assert!((r.log_magnitude - 120f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn negative_determinant_has_phase_pi() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = lattice_logdet(&m).unwrap();
        assert!((r.value().re + 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_cofactor_expansion() {
        let m = DMatrix::from_fn(8, 8, |i, j| {
            let base = 1.0 / (1.0 + i as f64 + j as f64);
            if i == j { base + 1.0 } else { base }
        });
        let r = lattice_logdet(&m).unwrap();
        let oracle = cofactor(&m);
        assert!((r.value().re - oracle).abs() <= 1e-10 * oracle.abs());
    }

    #[test]
    fn singular_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(lattice_logdet(&m), Err(Error::Singular { .. })));
    }

    #[test]
    fn gelfand_yaglom_closed_form() {
        assert_eq!(det_ratio_ivp(0.0, 1.0).unwrap(), 1.0);
        let r = det_ratio_ivp(PI / 2.0, 1.0).unwrap();
        assert!((r - 2.0 / PI).abs() < 1e-12);
        assert!(matches!(det_ratio_ivp(PI, 1.0), Err(Error::ZeroMode { .. })));
    }

    #[test]
    fn lattice_ratio_recurrence_matches_lu() {
        let (w, t, n) = (1.3, 1.0, 40);
        let a = lattice_logdet(&harmonic_lattice_matrix(w, t, n).unwrap()).unwrap();
        let b = lattice_logdet(&harmonic_lattice_matrix(0.0, t, n).unwrap()).unwrap();
        let lu = (a.log_magnitude - b.log_magnitude).exp();
        assert!((lu - lattice_det_ratio(w, t, n).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn boundary_form_limits() {
        assert_eq!(harmonic_boundary_form(0.0, 0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(harmonic_boundary_form(0.0, 1.0, PI / 2.0, 1.0).unwrap().abs() < 1e-15);
        assert!((harmonic_boundary_form(0.0, 1.0, 1e-7, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let near = harmonic_boundary_form(0.3, -0.4, 2e-4, 2.0).unwrap();
        let far = harmonic_boundary_form(0.3, -0.4, 2e-4 + 1e-9, 2.0).unwrap();
        assert!((near - far).abs() < 1e-8);
    }

    #[test]
    fn phase_tracking_removes_jumps() {
        let raw = [3.0, -3.1, -2.9, 3.1];
        let t = track_phase(&raw);
        assert!(t.windows(2).all(|w| (w[1] - w[0]).abs() <= PI));
        let path: Vec<Complex64> = (0..=16)
            .map(|k| Complex64::from_polar(2.0, PI / 2.0 * k as f64 / 16.0))
            .collect();
        let r = tracked_power(&path, -0.5).unwrap();
        let expect = (Complex64::new(0.0, 2.0)).powf(-0.5);
        assert!((r - expect).norm() < 1e-15);
    }
}
