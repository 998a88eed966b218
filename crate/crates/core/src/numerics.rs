//! Small numerical helpers shared across modules.

use num_complex::Complex64;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum<f64> {
    pub fn add(&mut self, x: f64) {
        neumaier(&mut self.sum, &mut self.comp, x);
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl CompensatedSum<Complex64> {
    pub fn add(&mut self, x: Complex64) {
        neumaier(&mut self.sum.re, &mut self.comp.re, x.re);
        neumaier(&mut self.sum.im, &mut self.comp.im, x.im);
    }

    pub fn total(&self) -> Complex64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::<f64>::default();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

pub fn compensated_sum_complex(values: impl IntoIterator<Item = Complex64>) -> Complex64 {
    let mut acc = CompensatedSum::<Complex64>::default();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

/// Richardson extrapolation by Neville's scheme on `values[k] ≈ L + c₁·x_k + c₂·x_k² + …`.
///
/// Returns the table diagonal: entry `k` uses `values[0..=k]`.
pub fn neville_to_zero(xs: &[f64], values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let mut p = values.to_vec();
    let mut diag = vec![p[0]];
    // p[i] holds the interpolant through points i..=i+m evaluated at 0.
    for m in 1..n {
        for i in 0..n - m {
            let (xi, xj) = (xs[i], xs[i + m]);
            p[i] = (p[i + 1] * xi - p[i] * xj) / (xi - xj);
        }
        diag.push(p[0]);
    }
    diag
}

/// Fit `log|e| = a + p·log h` by least squares and return `p`.
pub fn observed_order(steps: &[f64], errors: &[f64]) -> f64 {
    let n = steps.len() as f64;
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Relative difference `|a − b| / max(1, |b|)`.
pub fn rel_diff(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut xs = vec![1.0e16, 1.0, -1.0e16];
        xs.extend(std::iter::repeat_n(1.0, 10));
        assert_eq!(compensated_sum(xs), 11.0);
    }

    #[test]
    fn neville_removes_polynomial_error() {
        let xs = [1.0, 0.25, 0.0625, 0.015625];
        let vals: Vec<Complex64> = xs
            .iter()
            .map(|x| Complex64::new(3.0 + 2.0 * x - 5.0 * x * x, 0.0))
            .collect();
        let d = neville_to_zero(&xs, &vals);
        assert!((d[2].re - 3.0).abs() < 1e-13);
    }

    #[test]
    fn order_of_quadratic_errors() {
        let hs = [0.1, 0.05, 0.025];
        let es: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        assert!((observed_order(&hs, &es) - 2.0).abs() < 1e-12);
    }
}
