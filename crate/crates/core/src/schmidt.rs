//! Schmidt spectra and the threshold capacity rule.
//!
//! Kernels are weight-embedded (Nystrom) so that matrix singular values
//! approximate the singular values of the continuum operator; the capacity is
//! the number of leading modes whose running average memory efficiency stays
//! above the threshold.

use ndarray::Array2;
use ndarray_linalg::{Eigh, SVD, UPLO};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{uniform_grid, Grid};
use crate::kernel::{DiscretizedKernel, KernelKind};
use crate::Result;

/// Leading singular value above this bound flags an under-resolved grid; the
/// continuum values of physical kernels are bounded by 1.
const SIGMA_PASSIVITY_BOUND: f64 = 1.01;
/// Values below this fraction of the leading one are numerical noise.
const TRUNCATION_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularSpectrum {
    /// Descending nonnegative singular (or eigen) values.
    pub values: Vec<f64>,
    pub kind: KernelKind,
    /// (rows, cols) of the source kernel.
    pub resolution: (usize, usize),
    /// Resolution diagnostics (passivity overshoot, clamped eigenvalues).
    pub warnings: Vec<String>,
}

impl SingularSpectrum {
    fn finish(mut values: Vec<f64>, kind: KernelKind, resolution: (usize, usize)) -> Self {
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut warnings = Vec::new();
        if let Some(&top) = values.first() {
            if top > SIGMA_PASSIVITY_BOUND {
                warnings.push(format!(
                    "leading value {top:.6} exceeds the passivity bound; refine grids"
                ));
            }
            values.retain(|&v| v >= TRUNCATION_RATIO * top);
        }
        SingularSpectrum {
            values,
            kind,
            resolution,
            warnings,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Per-mode memory efficiencies, descending.
    pub efficiencies: Vec<f64>,
    /// Running averages of the efficiencies.
    pub lambda_bar: Vec<f64>,
    pub theta: f64,
    /// Number of modes whose running average exceeds theta.
    pub n_modes: usize,
}

/// Nystrom weight embedding: `M[i][j] = sqrt(w_row[i]) K[i][j] sqrt(w_col[j])`.
pub fn weight_embed(kernel: &DiscretizedKernel) -> Result<Array2<Complex64>> {
    let (nr, nc) = (kernel.values.nrows(), kernel.values.ncols());
    if nr != kernel.row_grid.len() || nc != kernel.col_grid.len() {
        return Err(Error::GridMismatch("kernel/grid dimension mismatch".into()));
    }
    let sw_r: Vec<f64> = kernel.row_grid.weights.iter().map(|w| w.sqrt()).collect();
    let sw_c: Vec<f64> = kernel.col_grid.weights.iter().map(|w| w.sqrt()).collect();
    let mut m = kernel.values.clone();
    for i in 0..nr {
        for j in 0..nc {
            m[[i, j]] *= sw_r[i] * sw_c[j];
        }
    }
    Ok(m)
}

fn unembed(
    mut m: Array2<Complex64>,
    row_grid: &Grid,
    col_grid: &Grid,
) -> Array2<Complex64> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            m[[i, j]] /= (row_grid.weights[i] * col_grid.weights[j]).sqrt();
        }
    }
    m
}

/// Descending singular values of the weight-embedded kernel.
pub fn singular_spectrum(kernel: &DiscretizedKernel) -> Result<SingularSpectrum> {
    let m = weight_embed(kernel)?;
    let max_abs = kernel.max_abs();
    let dim = m.nrows().max(m.ncols());
    let (_, s, _) = m.svd(false, false).map_err(|e| Error::Decomposition {
        context: format!("SVD: {e}"),
        dim,
        max_abs,
    })?;
    Ok(SingularSpectrum::finish(
        s.to_vec(),
        kernel.kind,
        (kernel.values.nrows(), kernel.values.ncols()),
    ))
}

/// Descending real eigenvalues of a Hermitian product kernel, clamped at zero.
pub fn hermitian_eigen_spectrum(kernel: &DiscretizedKernel) -> Result<SingularSpectrum> {
    if kernel.kind != KernelKind::Product {
        return Err(Error::KindMismatch {
            expected: "product".into(),
            got: kernel.kind.name().into(),
        });
    }
    let scale = kernel.max_abs().max(f64::MIN_POSITIVE);
    if kernel.hermitian_defect() > 1e-8 * scale {
        return Err(Error::NonFinite(format!(
            "kernel not Hermitian within tolerance: defect {:.3e}",
            kernel.hermitian_defect()
        )));
    }
    let m = weight_embed(kernel)?;
    let (eigs, _) = m.eigh(UPLO::Lower).map_err(|e| Error::Decomposition {
        context: format!("eigh: {e}"),
        dim: kernel.values.nrows(),
        max_abs: scale,
    })?;
    let mut warnings = Vec::new();
    let most_negative = eigs.iter().cloned().fold(0.0, f64::min);
    if most_negative < -1e-10 * scale.max(1.0) {
        warnings.push(format!(
            "negative eigenvalue {most_negative:.3e} clamped; refine grids"
        ));
    }
    let clamped: Vec<f64> = eigs.iter().map(|&e| e.max(0.0)).collect();
    let mut spec = SingularSpectrum::finish(
        clamped,
        KernelKind::Product,
        (kernel.values.nrows(), kernel.values.ncols()),
    );
    spec.warnings.extend(warnings);
    Ok(spec)
}

fn product_matrix(
    kernel: &DiscretizedKernel,
    contract_rows: bool,
) -> Array2<Complex64> {
    let k = &kernel.values;
    if contract_rows {
        // K_N(t, t') = sum_z w_z K*(z,t) K(z,t').
        let w = &kernel.row_grid.weights;
        let n = k.ncols();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                (0..n)
                    .map(|b| {
                        (0..k.nrows())
                            .map(|i| w[i] * k[[i, a]].conj() * k[[i, b]])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let mut m = Array2::zeros((n, n));
        for (a, row) in rows.into_iter().enumerate() {
            for (b, v) in row.into_iter().enumerate() {
                m[[a, b]] = v;
            }
        }
        m
    } else {
        // K_A(z, z') = sum_t w_t K(z,t) K*(z',t).
        let w = &kernel.col_grid.weights;
        let n = k.nrows();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                (0..n)
                    .map(|b| {
                        (0..k.ncols())
                            .map(|j| w[j] * k[[a, j]] * k[[b, j]].conj())
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let mut m = Array2::zeros((n, n));
        for (a, row) in rows.into_iter().enumerate() {
            for (b, v) in row.into_iter().enumerate() {
                m[[a, b]] = v;
            }
        }
        m
    }
}

fn require_storage(kernel: &DiscretizedKernel) -> Result<()> {
    if kernel.kind != KernelKind::Storage {
        return Err(Error::KindMismatch {
            expected: "storage".into(),
            got: kernel.kind.name().into(),
        });
    }
    Ok(())
}

/// Normally ordered product `K_N(t,t') = int K*(z,t) K(z,t') dz`.
pub fn normal_product(kernel: &DiscretizedKernel) -> Result<DiscretizedKernel> {
    require_storage(kernel)?;
    let m = product_matrix(kernel, true);
    DiscretizedKernel::new(
        m,
        kernel.col_grid.clone(),
        kernel.col_grid.clone(),
        KernelKind::Product,
        format!("normal-product of [{}]", kernel.provenance),
    )
}

/// Anti-normally ordered product `K_A(z,z') = int K(z,t) K*(z',t) dt`.
pub fn antinormal_product(kernel: &DiscretizedKernel) -> Result<DiscretizedKernel> {
    require_storage(kernel)?;
    let m = product_matrix(kernel, false);
    DiscretizedKernel::new(
        m,
        kernel.row_grid.clone(),
        kernel.row_grid.clone(),
        KernelKind::Product,
        format!("antinormal-product of [{}]", kernel.provenance),
    )
}

/// Memory efficiency of one mode given the kernel kind its value came from.
///
/// Efficiency is a storage-plus-retrieval probability, so it is capped at 1:
/// approximate kernels (adiabatic forms near their validity edge) can carry
/// super-unitary singular values, already flagged by the passivity warning,
/// and letting those leak into the running averages would corrupt the count.
fn mode_efficiency(kind: KernelKind, sigma: f64) -> f64 {
    let eff = match kind {
        // Storage singular value lambda: storage + time-reversed retrieval.
        KernelKind::Storage => sigma.powi(4),
        // Total-kernel value nu plays the role of lambda^2.
        KernelKind::Total => sigma * sigma,
        // Product eigenvalue mu = lambda^2.
        KernelKind::Product => sigma * sigma,
    };
    eff.min(1.0)
}

/// Threshold capacity: count of leading modes whose running average memory
/// efficiency strictly exceeds `theta`.
pub fn capacity(spectrum: &SingularSpectrum, theta: f64) -> Result<CapacityResult> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    let efficiencies: Vec<f64> = spectrum
        .values
        .iter()
        .map(|&s| mode_efficiency(spectrum.kind, s))
        .collect();
    let mut lambda_bar = Vec::with_capacity(efficiencies.len());
    let mut running = 0.0;
    for (k, &e) in efficiencies.iter().enumerate() {
        running += e;
        lambda_bar.push(running / (k + 1) as f64);
    }
    let n_modes = lambda_bar.iter().filter(|&&l| l > theta).count();
    Ok(CapacityResult {
        efficiencies,
        lambda_bar,
        theta,
        n_modes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjugateAxis {
    Row,
    Col,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FourierSign {
    Forward,
    Inverse,
}

/// Unitary discrete Fourier transform along one axis of the kernel.
///
/// The transform acts on the weight-embedded matrix with an exactly unitary
/// DFT, so singular values are preserved to machine precision and applying
/// the opposite sign undoes it exactly. The transformed axis is relabelled
/// (position -> spatial frequency, time -> frequency) with nodes centred on
/// zero; the physical phase convention is that of the coordinate measured
/// from the grid's central node.
pub fn fourier_conjugate(
    kernel: &DiscretizedKernel,
    axis: ConjugateAxis,
    sign: FourierSign,
) -> Result<DiscretizedKernel> {
    let grid = match axis {
        ConjugateAxis::Row => &kernel.row_grid,
        ConjugateAxis::Col => &kernel.col_grid,
    };
    let h = grid.uniform_spacing().ok_or_else(|| {
        Error::GridMismatch("fourier_conjugate requires a uniform grid on the chosen axis".into())
    })?;
    let n = grid.len();
    let s = match sign {
        FourierSign::Forward => -1.0,
        FourierSign::Inverse => 1.0,
    };
    let c = (n / 2) as f64;
    let scale = 1.0 / (n as f64).sqrt();
    let mut u = Array2::zeros((n, n));
    for m in 0..n {
        for i in 0..n {
            let phase = s * 2.0 * std::f64::consts::PI * (m as f64 - c) * (i as f64 - c) / n as f64;
            u[[m, i]] = scale * Complex64::new(0.0, phase).exp();
        }
    }
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * h);
    let new_axis = conjugate_axis_label(grid.axis);
    let new_grid = uniform_grid(n, -c * dk, (n as f64 - 1.0 - c) * dk, new_axis)?;

    let embedded = weight_embed(kernel)?;
    let (transformed, row_grid, col_grid) = match axis {
        ConjugateAxis::Row => {
            let t = u.dot(&embedded);
            (t, new_grid, kernel.col_grid.clone())
        }
        ConjugateAxis::Col => {
            let t = embedded.dot(&u.t());
            (t, kernel.row_grid.clone(), new_grid)
        }
    };
    let raw = unembed(transformed, &row_grid, &col_grid);
    DiscretizedKernel::new(
        raw,
        row_grid,
        col_grid,
        kernel.kind,
        format!("fourier[{:?},{:?}] of [{}]", axis, sign, kernel.provenance),
    )
}

fn conjugate_axis_label(axis: crate::grid::Axis) -> crate::grid::Axis {
    use crate::grid::Axis;
    match axis {
        Axis::Position => Axis::SpatialFrequency,
        Axis::SpatialFrequency => Axis::Position,
        Axis::Time => Axis::Frequency,
        Axis::Frequency => Axis::Time,
    }
}

/// Coordinate of the central node used as the phase origin by
/// [`fourier_conjugate`]; needed when comparing against continuum-convention
/// transforms.
pub fn fourier_phase_origin(grid: &Grid) -> f64 {
    grid.nodes[grid.len() / 2]
}
