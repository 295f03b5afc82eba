//! Quadrature grids on an interval.
//!
//! A [`Grid`] couples quadrature nodes with positive weights so that kernels
//! sampled on it can be weight-embedded for the Nystrom approximation of the
//! continuum singular spectrum.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Physical meaning of the grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Position,
    Time,
    Frequency,
    SpatialFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub axis: Axis,
    pub bounds: (f64, f64),
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node spacing if the grid is uniform, `None` otherwise.
    pub fn uniform_spacing(&self) -> Option<f64> {
        if self.nodes.len() < 2 {
            return None;
        }
        let h = self.nodes[1] - self.nodes[0];
        let uniform = self
            .nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.abs().max(1.0));
        uniform.then_some(h)
    }

    /// Quadrature of sampled values against the grid weights.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    fn validate(self) -> Result<Self> {
        let (lo, hi) = self.bounds;
        if !self.nodes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        if self
            .nodes
            .iter()
            .any(|&x| x < lo - 1e-12 || x > hi + 1e-12)
        {
            return Err(Error::InvalidArgument("grid nodes outside bounds".into()));
        }
        if self.weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidArgument(
                "grid weights must be positive".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if ((total - (hi - lo)) / (hi - lo)).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected {}",
                hi - lo
            )));
        }
        Ok(self)
    }
}

fn check_interval(n: usize, lo: f64, hi: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2 nodes, got {n}")));
    }
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "need lo < hi, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// `n`-point Gauss-Legendre rule mapped to `[lo, hi]`.
///
/// Exact for polynomials of degree `2n - 1`. Nodes and weights come from
/// Newton iteration on the Legendre polynomial with the asymptotic root
/// estimate as the starting point.
pub fn gauss_legendre_grid(n: usize, lo: f64, hi: f64, axis: Axis) -> Result<Grid> {
    check_interval(n, lo, hi)?;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess for the i-th root of P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Recurrence for P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let c = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    for i in 0..n {
        nodes[i] = mid + c * nodes[i];
        weights[i] *= c;
    }
    Grid {
        nodes,
        weights,
        axis,
        bounds: (lo, hi),
    }
    .validate()
}

/// `n` equally spaced nodes on `[lo, hi]` with trapezoid weights.
pub fn uniform_grid(n: usize, lo: f64, hi: f64, axis: Axis) -> Result<Grid> {
    check_interval(n, lo, hi)?;
    let h = (hi - lo) / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let mut weights = vec![h; n];
    weights[0] = 0.5 * h;
    weights[n - 1] = 0.5 * h;
    Grid {
        nodes,
        weights,
        axis,
        bounds: (lo, hi),
    }
    .validate()
}

/// Chebyshev-Lobatto nodes on `[lo, hi]` with Clenshaw-Curtis weights.
///
/// `n` is the number of nodes (polynomial degree `n - 1`). The weights are
/// exact for the Chebyshev expansion through degree `n - 1`, so smooth
/// integrands converge spectrally.
pub fn chebyshev_lobatto_grid(n: usize, lo: f64, hi: f64, axis: Axis) -> Result<Grid> {
    check_interval(n, lo, hi)?;
    let deg = n - 1;
    // Ascending nodes: x_j = -cos(pi j / deg) on [-1, 1].
    let nodes: Vec<f64> = (0..n)
        .map(|j| {
            let x = -(std::f64::consts::PI * j as f64 / deg as f64).cos();
            0.5 * (hi + lo) + 0.5 * (hi - lo) * x
        })
        .collect();
    // Clenshaw-Curtis: w_j = sum_k c_jk m_k with m_k the Chebyshev moments.
    let mut weights = vec![0.0; n];
    for j in 0..n {
        let mut w = 0.0;
        for k in (0..n).step_by(2) {
            let moment = if k == 0 {
                2.0
            } else {
                -2.0 / ((k * k - 1) as f64)
            };
            // Coefficient of T_k in the interpolant through the delta at node j.
            let mut c = 2.0 / deg as f64
                * (std::f64::consts::PI * (k * j) as f64 / deg as f64).cos();
            if j == 0 || j == deg {
                c *= 0.5;
            }
            if k == 0 || k == deg {
                c *= 0.5;
            }
            // Nodes are flipped (ascending), T_k(-x) = (-1)^k T_k(x); even k only.
            w += c * moment;
        }
        weights[j] = w * 0.5 * (hi - lo);
    }
    Grid {
        nodes,
        weights,
        axis,
        bounds: (lo, hi),
    }
    .validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Adaptive Simpson quadrature, used as an independent oracle.
    pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
        }
        fn recurse(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            fa: f64,
            b: f64,
            fb: f64,
            whole: f64,
            fm: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (left, flm) = simpson(f, a, fa, m, fm);
            let (right, frm) = simpson(f, m, fm, b, fb);
            if depth > 50 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                recurse(f, a, fa, m, fm, left, flm, 0.5 * tol, depth + 1)
                    + recurse(f, m, fm, b, fb, right, frm, 0.5 * tol, depth + 1)
            }
        }
        let fa = f(a);
        let fb = f(b);
        let (whole, fm) = simpson(f, a, fa, b, fb);
        recurse(f, a, fa, b, fb, whole, fm, tol, 0)
    }

    #[test]
    fn two_point_gauss_legendre_is_standard() {
        let g = gauss_legendre_grid(2, -1.0, 1.0, Axis::Position).unwrap();
        assert_relative_eq!(g.nodes[0], -1.0 / 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(g.nodes[1], 1.0 / 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(g.weights[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g.weights[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_exact_for_cubic() {
        let g = gauss_legendre_grid(5, 0.0, 1.0, Axis::Position).unwrap();
        let vals: Vec<f64> = g.nodes.iter().map(|&z| z * z * z).collect();
        assert_relative_eq!(g.integrate(&vals), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn gauss_legendre_matches_adaptive_simpson_on_bessel_integrand() {
        let g = gauss_legendre_grid(64, 0.0, 1.0, Axis::Position).unwrap();
        let f = |z: f64| crate::bessel::i0_scaled(10.0 * z);
        let vals: Vec<f64> = g.nodes.iter().map(|&z| f(z)).collect();
        let oracle = adaptive_simpson(&f, 0.0, 1.0, 1e-13);
        assert_relative_eq!(g.integrate(&vals), oracle, epsilon = 1e-10);
    }

    #[test]
    fn uniform_grid_trapezoid_weights() {
        let g = uniform_grid(3, 0.0, 1.0, Axis::Time).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.5, 1.0]);
        assert_eq!(g.weights, vec![0.25, 0.5, 0.25]);
        let g2 = uniform_grid(2, 0.0, 1.0, Axis::Time).unwrap();
        assert_eq!(g2.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn uniform_grid_integrates_cosine() {
        let g = uniform_grid(2001, -10.0, 10.0, Axis::Frequency).unwrap();
        let vals: Vec<f64> = g.nodes.iter().map(|&w| w.cos()).collect();
        // Trapezoid error here is h^2/12 [f'(b) - f'(a)] ~ 9e-6.
        assert_relative_eq!(g.integrate(&vals), 2.0 * 10f64.sin(), epsilon = 1e-4);
    }

    #[test]
    fn rejects_degenerate_intervals() {
        assert!(gauss_legendre_grid(1, 0.0, 1.0, Axis::Position).is_err());
        assert!(gauss_legendre_grid(4, 1.0, 1.0, Axis::Position).is_err());
        assert!(uniform_grid(5, 2.0, -1.0, Axis::Time).is_err());
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for g in [
            gauss_legendre_grid(37, -2.0, 5.5, Axis::Position).unwrap(),
            uniform_grid(41, -2.0, 5.5, Axis::Time).unwrap(),
            chebyshev_lobatto_grid(33, -2.0, 5.5, Axis::Position).unwrap(),
        ] {
            let total: f64 = g.weights.iter().sum();
            assert_relative_eq!(total, 7.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn clenshaw_curtis_integrates_smooth_function() {
        let g = chebyshev_lobatto_grid(48, 0.0, 1.0, Axis::Position).unwrap();
        let f = |z: f64| (3.0 * z).sin() * (-z).exp();
        let vals: Vec<f64> = g.nodes.iter().map(|&z| f(z)).collect();
        let oracle = adaptive_simpson(&f, 0.0, 1.0, 1e-13);
        assert_relative_eq!(g.integrate(&vals), oracle, epsilon = 1e-12);
    }

    #[test]
    fn uniform_spacing_detection() {
        let u = uniform_grid(11, 0.0, 1.0, Axis::Time).unwrap();
        assert!(u.uniform_spacing().is_some());
        let g = gauss_legendre_grid(11, 0.0, 1.0, Axis::Position).unwrap();
        assert!(g.uniform_spacing().is_none());
    }
}
