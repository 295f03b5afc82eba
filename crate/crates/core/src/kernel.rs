//! Analytic memory kernels sampled onto quadrature grids.
//!
//! Each constructor maps a [`ProtocolSpec`] and grids to a
//! [`DiscretizedKernel`]: the unbroadened anti-normal product kernel, the
//! tCRIB and AFC total (storage-plus-retrieval) kernels in frequency space,
//! the broadened-Raman storage kernel in (spatial-frequency, time) space, and
//! the closed-form lCRIB kernel used for point-wise validation of the solver.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::bessel::i0_scaled;
use crate::error::Error;
use crate::grid::Grid;
use crate::protocol::{Protocol, ProtocolSpec};
use crate::Result;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// Map from input envelope to spin wave; efficiencies are sigma^4.
    Storage,
    /// Map from input to retrieved envelope; efficiencies are sigma^2.
    Total,
    /// Hermitian product K_N or K_A; efficiencies are mu^2.
    Product,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Storage => "storage",
            KernelKind::Total => "total",
            KernelKind::Product => "product",
        }
    }
}

/// A kernel sampled on (row_grid x col_grid).
#[derive(Debug, Clone)]
pub struct DiscretizedKernel {
    pub values: Array2<Complex64>,
    pub row_grid: Grid,
    pub col_grid: Grid,
    pub kind: KernelKind,
    pub provenance: String,
}

impl DiscretizedKernel {
    pub fn new(
        values: Array2<Complex64>,
        row_grid: Grid,
        col_grid: Grid,
        kind: KernelKind,
        provenance: String,
    ) -> Result<Self> {
        if values.nrows() != row_grid.len() || values.ncols() != col_grid.len() {
            return Err(Error::GridMismatch(format!(
                "matrix {}x{} vs grids {}x{}",
                values.nrows(),
                values.ncols(),
                row_grid.len(),
                col_grid.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("kernel entries".into()));
        }
        let k = DiscretizedKernel {
            values,
            row_grid,
            col_grid,
            kind,
            provenance,
        };
        if kind == KernelKind::Product {
            if k.row_grid != k.col_grid {
                return Err(Error::GridMismatch(
                    "product kernel requires identical row and column grids".into(),
                ));
            }
            let scale = k.max_abs().max(f64::MIN_POSITIVE);
            if k.hermitian_defect() > 1e-10 * scale {
                return Err(Error::NonFinite(format!(
                    "product kernel not Hermitian: defect {:.3e} vs scale {:.3e}",
                    k.hermitian_defect(),
                    scale
                )));
            }
        }
        Ok(k)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max |K - K^dagger| over entries (square kernels only).
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.values.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                let dev = (self.values[[i, j]] - self.values[[j, i]].conj()).norm();
                worst = worst.max(dev);
            }
        }
        worst
    }
}

fn require_protocol(spec: &ProtocolSpec, expected: Protocol) -> Result<()> {
    spec.validate()?;
    if spec.protocol != expected {
        return Err(Error::InvalidSpec(format!(
            "expected protocol {}, got {}",
            expected.name(),
            spec.protocol.name()
        )));
    }
    Ok(())
}

fn require_symmetric_about_zero(grid: &Grid) -> Result<()> {
    let n = grid.len();
    let scale = grid.bounds.1.abs().max(1.0);
    for i in 0..n / 2 {
        if (grid.nodes[i] + grid.nodes[n - 1 - i]).abs() > 1e-9 * scale {
            return Err(Error::GridMismatch(
                "frequency grid must be symmetric about 0".into(),
            ));
        }
    }
    Ok(())
}

/// Point value of the unbroadened anti-normal kernel
/// `(d/2) e^{-d(z+z')/2} I_0(d sqrt(z z'))`, evaluated in scaled-Bessel form
/// so it stays finite at large `d`.
pub fn unbroadened_kernel_value(d: f64, z: f64, zp: f64) -> f64 {
    let x = d * (z * zp).sqrt();
    // e^{-d(z+z')/2} I_0(x) = e^{x - d(z+z')/2} * [e^{-x} I_0(x)]; the
    // exponent is -d(sqrt z - sqrt z')^2 / 2 <= 0.
    let expo = x - 0.5 * d * (z + zp);
    0.5 * d * expo.exp() * i0_scaled(x)
}

/// Unbroadened-memory kernel of kind `product` on a z-grid over [0, 1].
pub fn unbroadened_antinormal_kernel(spec: &ProtocolSpec, zgrid: &Grid) -> Result<DiscretizedKernel> {
    require_protocol(spec, Protocol::Unbroadened)?;
    if zgrid.nodes.iter().any(|&z| !(0.0..=1.0).contains(&z)) {
        return Err(Error::InvalidArgument(
            "z-grid nodes must lie in [0, 1]".into(),
        ));
    }
    let d = spec.d;
    let n = zgrid.len();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    Complex64::new(
                        unbroadened_kernel_value(d, zgrid.nodes[i], zgrid.nodes[j]),
                        0.0,
                    )
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    DiscretizedKernel::new(
        values,
        zgrid.clone(),
        zgrid.clone(),
        KernelKind::Product,
        format!("unbroadened d={d} nz={n}"),
    )
}

/// Lineshape of a rectangular broadening profile of width `delta0`:
/// `f(w) = (gamma / (i delta0)) ln[(gamma + i(w + delta0/2)) / (gamma + i(w - delta0/2))]`,
/// reducing to the bare Lorentzian `gamma / (gamma + i w)` at `delta0 = 0`.
pub fn rect_lineshape(omega: f64, gamma: f64, delta0: f64) -> Result<Complex64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be > 0".into()));
    }
    if delta0 < 0.0 {
        return Err(Error::InvalidArgument("delta0 must be >= 0".into()));
    }
    if delta0 == 0.0 {
        return Ok(gamma / Complex64::new(gamma, omega));
    }
    let upper = Complex64::new(gamma, omega + 0.5 * delta0);
    let lower = Complex64::new(gamma, omega - 0.5 * delta0);
    // gamma > 0 keeps both arguments in the right half plane, away from the
    // principal branch cut.
    Ok(Complex64::new(gamma, 0.0) / Complex64::new(0.0, delta0) * (upper / lower).ln())
}

/// Comb lineshape: sum of `M` Lorentzian teeth spanning `delta0`.
pub fn comb_lineshape(omega: f64, gamma: f64, m: u32, delta0: f64) -> Result<Complex64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be > 0".into()));
    }
    if m < 1 {
        return Err(Error::InvalidArgument("tooth count M must be >= 1".into()));
    }
    if m >= 2 && delta0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "M >= 2 teeth require delta0 > 0".into(),
        ));
    }
    Ok(comb_teeth(m, delta0)
        .map(|dj| gamma / Complex64::new(gamma, dj + omega))
        .sum())
}

/// d/domega of [`comb_lineshape`]: `-sum_j i gamma / (gamma + i(delta_j + omega))^2`.
pub fn comb_lineshape_derivative(omega: f64, gamma: f64, m: u32, delta0: f64) -> Complex64 {
    comb_teeth(m, delta0)
        .map(|dj| {
            let den = Complex64::new(gamma, dj + omega);
            -Complex64::i() * gamma / (den * den)
        })
        .sum()
}

fn comb_teeth(m: u32, delta0: f64) -> impl Iterator<Item = f64> {
    (0..m).map(move |j| {
        if m == 1 {
            0.0
        } else {
            -0.5 * delta0 + j as f64 * delta0 / (m - 1) as f64
        }
    })
}

/// tCRIB total kernel on a symmetric frequency grid:
/// `(1/2pi) (e^{-d[f(w)+f(w')]} - 1) / (2 gamma + i(w + w'))`.
pub fn tcrib_total_kernel(spec: &ProtocolSpec, wgrid: &Grid) -> Result<DiscretizedKernel> {
    require_protocol(spec, Protocol::Tcrib)?;
    require_symmetric_about_zero(wgrid)?;
    let (d, gamma, delta0) = (spec.d, spec.gamma, spec.delta0);
    let f: Vec<Complex64> = wgrid
        .nodes
        .iter()
        .map(|&w| rect_lineshape(w, gamma, delta0))
        .collect::<Result<_>>()?;
    let n = wgrid.len();
    let mut values = Array2::zeros((n, n));
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let num = (-d * (f[i] + f[j])).exp() - 1.0;
                    let den = Complex64::new(2.0 * gamma, wgrid.nodes[i] + wgrid.nodes[j]);
                    num / den / TWO_PI
                })
                .collect()
        })
        .collect();
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    DiscretizedKernel::new(
        values,
        wgrid.clone(),
        wgrid.clone(),
        KernelKind::Total,
        format!("tcrib d={d} delta0={delta0} nw={n}"),
    )
}

/// AFC total kernel on a frequency grid, comb lineshape:
/// `(1/2pi) (f(w)-f(w'))/(w-w') (e^{-d[f(w)+f(w')]} - 1)/(f(w)+f(w'))`
/// with the analytic-derivative limit on the diagonal. `spec.d` is the depth
/// per tooth.
pub fn afc_total_kernel(spec: &ProtocolSpec, wgrid: &Grid) -> Result<DiscretizedKernel> {
    require_protocol(spec, Protocol::Afc)?;
    let (d, gamma, delta0, m) = (spec.d, spec.gamma, spec.delta0, spec.m_teeth);
    let f: Vec<Complex64> = wgrid
        .nodes
        .iter()
        .map(|&w| comb_lineshape(w, gamma, m, delta0))
        .collect::<Result<_>>()?;
    let n = wgrid.len();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let fsum = f[i] + f[j];
                    // Re f > 0 keeps fsum away from zero.
                    let second = ((-d * fsum).exp() - 1.0) / fsum;
                    let first = if i == j {
                        comb_lineshape_derivative(wgrid.nodes[i], gamma, m, delta0)
                    } else {
                        (f[i] - f[j]) / (wgrid.nodes[i] - wgrid.nodes[j])
                    };
                    first * second / TWO_PI
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    DiscretizedKernel::new(
        values,
        wgrid.clone(),
        wgrid.clone(),
        KernelKind::Total,
        format!("afc d={d} M={m} delta0={delta0} nw={n}"),
    )
}

/// `g(k, tau) = 1 / (d gamma + i Gamma (k + Delta0 tau))` with `Gamma = gamma + i Delta`.
pub fn raman_g(spec: &ProtocolSpec, k: f64, tau: f64) -> Complex64 {
    let big_gamma = Complex64::new(spec.gamma, spec.delta);
    1.0 / (spec.d * spec.gamma + Complex64::i() * big_gamma * (k + spec.delta0 * tau))
}

/// Exponent of the Raman kernel at `(k, tau)`:
/// `-(1/Gamma) \int_tau^inf |Omega|^2 [1 - d gamma g(k, tau')] dtau'`.
///
/// The sign makes the AC-Stark term damp the stored spin wave after
/// write-in; with it the real part is nonpositive for every k, so the map
/// stays passive.
///
/// The `|Omega|^2`-only part uses the closed-form Gaussian integral; the
/// `d gamma g` part is integrated by composite Gauss rules on a grid refined
/// to resolve the quasi-resonance of `g`, truncated where `|Omega|^2` drops
/// below `1e-12` of its peak.
pub fn raman_exponent(spec: &ProtocolSpec, k: f64, tau: f64) -> Complex64 {
    let c = spec.control.expect("raman control pulse required");
    let big_gamma = Complex64::new(spec.gamma, spec.delta);
    // \int_tau^inf |Omega|^2 = A^2 w sqrt(pi/8) erfc(sqrt(2) u).
    let u = (tau - c.center) / c.width;
    let energy_tail = c.amplitude * c.amplitude
        * c.width
        * (std::f64::consts::PI / 8.0).sqrt()
        * erfc(std::f64::consts::SQRT_2 * u);
    let g_part = raman_g_tail_integral(spec, k, tau);
    -(energy_tail - spec.d * spec.gamma * g_part) / big_gamma
}

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
const GX5: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];
const GW5: [f64; 5] = [
    0.23692688505618908,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618908,
];

/// Time scale of the sharpest structure of `|Omega|^2 g(k, .)`: the Gaussian
/// envelope and the quasi-resonance of `g` swept through by the broadening.
pub fn raman_time_resolution(spec: &ProtocolSpec) -> f64 {
    let c = spec.control.expect("raman control pulse required");
    let g2 = spec.gamma * spec.gamma + spec.delta * spec.delta;
    let feature_x = (spec.d * spec.gamma * spec.gamma / g2).max(1e-3);
    let feature_tau = if spec.delta0 > 0.0 {
        feature_x / spec.delta0
    } else {
        f64::INFINITY
    };
    feature_tau.min(c.width)
}

/// `\int_a^b |Omega(t)|^2 g(k, t) dt` by composite 5-point Gauss cells sized
/// to resolve `res`.
fn raman_g_segment(spec: &ProtocolSpec, k: f64, a: f64, b: f64, res: f64) -> Complex64 {
    if b <= a {
        return Complex64::new(0.0, 0.0);
    }
    let c = spec.control.expect("raman control pulse required");
    let span = b - a;
    let cells = (((span / res) * 8.0).ceil() as usize).clamp(2, 200_000);
    let h = span / cells as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for ci in 0..cells {
        let mid = a + (ci as f64 + 0.5) * h;
        for q in 0..5 {
            let t = mid + 0.5 * h * GX5[q];
            let om = c.rabi(t);
            acc += 0.5 * h * GW5[q] * om * om * raman_g(spec, k, t);
        }
    }
    acc
}

/// `\int_tau^inf |Omega(t)|^2 g(k, t) dt`, truncated where `|Omega|^2` drops
/// below `1e-12` of its peak.
fn raman_g_tail_integral(spec: &ProtocolSpec, k: f64, tau: f64) -> Complex64 {
    let c = spec.control.expect("raman control pulse required");
    // |Omega|^2 / peak = e^{-2u^2} < 1e-12 beyond |u| = 3.72.
    let hi = c.center + 3.72 * c.width;
    if tau >= hi {
        return Complex64::new(0.0, 0.0);
    }
    let lo = tau.max(c.center - 3.72 * c.width);
    raman_g_segment(spec, k, lo, hi, raman_time_resolution(spec))
}

/// Point value of the broadened-Raman storage kernel.
pub fn raman_kernel_value(spec: &ProtocolSpec, k: f64, tau: f64) -> Complex64 {
    let c = spec.control.expect("raman control pulse required");
    let pre = (spec.d * spec.gamma / TWO_PI).sqrt();
    // Omega is real, so Omega* = Omega.
    pre * c.rabi(tau) * raman_g(spec, k, tau) * raman_exponent(spec, k, tau).exp()
}

/// Broadened-Raman storage kernel on (k-grid x time-grid).
pub fn raman_storage_kernel(
    spec: &ProtocolSpec,
    kgrid: &Grid,
    tgrid: &Grid,
) -> Result<DiscretizedKernel> {
    require_protocol(spec, Protocol::Raman)?;
    let nk = kgrid.len();
    let nt = tgrid.len();
    let c = spec.control.expect("raman control pulse required");
    let big_gamma = Complex64::new(spec.gamma, spec.delta);
    let pre = (spec.d * spec.gamma / TWO_PI).sqrt();
    let res = raman_time_resolution(spec);
    let support_hi = c.center + 3.72 * c.width;
    let energy_tail: Vec<f64> = tgrid
        .nodes
        .iter()
        .map(|&tau| {
            let u = (tau - c.center) / c.width;
            c.amplitude * c.amplitude
                * c.width
                * (std::f64::consts::PI / 8.0).sqrt()
                * erfc(std::f64::consts::SQRT_2 * u)
        })
        .collect();
    let rows: Vec<Vec<Complex64>> = (0..nk)
        .into_par_iter()
        .map(|i| {
            let k = kgrid.nodes[i];
            // Cumulative tail integral of |Omega|^2 g over the time grid,
            // accumulated right to left so each node costs one segment.
            let mut tail = vec![Complex64::new(0.0, 0.0); nt];
            tail[nt - 1] = raman_g_segment(
                spec,
                k,
                tgrid.nodes[nt - 1].max(c.center - 3.72 * c.width),
                support_hi,
                res,
            );
            for j in (0..nt - 1).rev() {
                let (a, b) = (tgrid.nodes[j], tgrid.nodes[j + 1]);
                let seg = if b <= c.center - 3.72 * c.width || a >= support_hi {
                    Complex64::new(0.0, 0.0)
                } else {
                    raman_g_segment(spec, k, a.max(c.center - 3.72 * c.width), b.min(support_hi), res)
                };
                tail[j] = tail[j + 1] + seg;
            }
            (0..nt)
                .map(|j| {
                    let tau = tgrid.nodes[j];
                    let expo = -(energy_tail[j] - spec.d * spec.gamma * tail[j]) / big_gamma;
                    pre * c.rabi(tau) * raman_g(spec, k, tau) * expo.exp()
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((nk, nt));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    DiscretizedKernel::new(
        values,
        kgrid.clone(),
        tgrid.clone(),
        KernelKind::Storage,
        format!(
            "raman d={} delta={} delta0={} nk={nk} nt={nt}",
            spec.d, spec.delta, spec.delta0
        ),
    )
}

/// Point value of the closed-form lCRIB kernel
/// `sqrt(d gamma / 2pi) e^{-gamma tau} k^{-i beta} (k + Delta0 tau)^{i beta - 1}`.
///
/// The complex powers use the branch arg in [-pi, pi) with arg(-|x|) = -pi,
/// the continuation from below the real axis. It is the bounded choice:
/// between the singular locus and k = 0 the magnitude carries e^{-pi beta}
/// (absorption when sweeping through resonance); the principal branch would
/// put e^{+pi beta} there instead.
pub fn lcrib_analytic_value(spec: &ProtocolSpec, k: f64, tau: f64) -> Complex64 {
    let beta = spec.beta();
    let pre = (spec.d * spec.gamma / TWO_PI).sqrt() * (-spec.gamma * tau).exp();
    let log_lower = |x: f64| {
        Complex64::new(x.abs().ln(), if x < 0.0 { -std::f64::consts::PI } else { 0.0 })
    };
    let kp = (Complex64::new(0.0, -beta) * log_lower(k)).exp();
    let sp = (Complex64::new(-1.0, beta) * log_lower(k + spec.delta0 * tau)).exp();
    pre * kp * sp
}

/// Closed-form lCRIB kernel, for point-wise validation of the solver only.
///
/// Every sample must stay outside the exclusion radius around the singular
/// locus `k = -Delta0 tau`, and the time grid must be nonnegative (the
/// `e^{-gamma tau}` factor grows without bound for tau < 0).
pub fn lcrib_analytic_kernel(
    spec: &ProtocolSpec,
    kgrid: &Grid,
    tgrid: &Grid,
) -> Result<DiscretizedKernel> {
    require_protocol(spec, Protocol::LcribAnalytic)?;
    if !(spec.delta0 > 0.0) {
        return Err(Error::InvalidSpec("lcrib-analytic requires delta0 > 0".into()));
    }
    if tgrid.nodes[0] < 0.0 {
        return Err(Error::InvalidArgument(
            "lcrib-analytic time grid must be nonnegative".into(),
        ));
    }
    let radius = singular_locus_radius(spec);
    let nk = kgrid.len();
    let nt = tgrid.len();
    let mut values = Array2::zeros((nk, nt));
    for i in 0..nk {
        let k = kgrid.nodes[i];
        for j in 0..nt {
            let tau = tgrid.nodes[j];
            if k == 0.0 || (k + spec.delta0 * tau).abs() <= radius {
                return Err(Error::SingularLocus { k, tau, radius });
            }
            values[[i, j]] = lcrib_analytic_value(spec, k, tau);
        }
    }
    DiscretizedKernel::new(
        values,
        kgrid.clone(),
        tgrid.clone(),
        KernelKind::Storage,
        format!("lcrib-analytic d={} delta0={}", spec.d, spec.delta0),
    )
}

/// Exclusion radius around the singular locus of the closed-form lCRIB kernel.
pub fn singular_locus_radius(spec: &ProtocolSpec) -> f64 {
    0.05 * spec.delta0 / spec.gamma
}
